use super::{ClassMask, Grid, Label};

/// Half-size of the default 9x9 square structuring element.
pub const DEFAULT_SE_HALF: usize = 4;

/// 1-D min (`erode = true`) or max filter over a clipped window of radius `half`.
fn filter_line(line: &[bool], half: usize, erode: bool, out: &mut [bool], prefix: &mut Vec<usize>) {
    let n = line.len();
    prefix.clear();
    prefix.push(0);
    let mut acc = 0;
    for &v in line {
        acc += v as usize;
        prefix.push(acc);
    }
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let ones = prefix[hi] - prefix[lo];
        *o = if erode { ones == hi - lo } else { ones > 0 };
    }
}

/// Separable square erosion or dilation. Pixels outside the grid are ignored,
/// so erosion does not eat into objects from the image border.
fn square_filter(src: &[bool], width: usize, height: usize, half: usize, erode: bool) -> Vec<bool> {
    let mut rows = vec![false; src.len()];
    let mut prefix = Vec::with_capacity(width.max(height) + 1);
    for y in 0..height {
        let r = y * width..(y + 1) * width;
        filter_line(&src[r.clone()], half, erode, &mut rows[r], &mut prefix);
    }
    let mut out = vec![false; src.len()];
    let mut col = vec![false; height];
    let mut col_out = vec![false; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = rows[y * width + x];
        }
        filter_line(&col, half, erode, &mut col_out, &mut prefix);
        for y in 0..height {
            out[y * width + x] = col_out[y];
        }
    }
    out
}

/// Opens the union of Body and Boundary with a `(2*se_half+1)` square.
///
/// Surviving pixels keep their original class; removed pixels become
/// Background.
pub fn morphological_open(mask: &ClassMask, se_half: usize) -> ClassMask {
    let (w, h) = mask.dims();
    let fg: Vec<bool> = mask.as_slice().iter().map(|l| l.is_foreground()).collect();
    let eroded = square_filter(&fg, w, h, se_half, true);
    let opened = square_filter(&eroded, w, h, se_half, false);
    let data = mask
        .as_slice()
        .iter()
        .zip(&opened)
        .map(|(&l, &keep)| if keep { l } else { Label::Background })
        .collect();
    Grid::new(w, h, data).expect("dimensions unchanged")
}
