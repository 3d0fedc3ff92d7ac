use serde::{Deserialize, Serialize};

use super::{reflect_index, ClassMask, Grid, Label};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 512;
pub const DEFAULT_STRIDE: usize = 256;

/// Sliding-window geometry over a reflect-padded image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileLayout {
    pub window: usize,
    pub stride: usize,
    /// Size of the source image before padding.
    pub image_size: (usize, usize),
    pub padded_size: (usize, usize),
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Top-left corners, row-major.
    pub tile_origins: Vec<(usize, usize)>,
}

impl TileLayout {
    pub fn len(&self) -> usize {
        self.tile_origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tile_origins.is_empty()
    }

    pub fn index_of(&self, origin: (usize, usize)) -> Option<usize> {
        let (x, y) = origin;
        if x % self.stride != 0 || y % self.stride != 0 {
            return None;
        }
        let (tx, ty) = (x / self.stride, y / self.stride);
        (tx < self.tiles_x && ty < self.tiles_y).then_some(ty * self.tiles_x + tx)
    }
}

fn padded_extent(dim: usize, window: usize, stride: usize) -> usize {
    if dim <= window {
        window
    } else {
        window + (dim - window).div_ceil(stride) * stride
    }
}

pub fn plan_tiles(width: usize, height: usize, window: usize, stride: usize) -> Result<TileLayout> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    if stride == 0 || window == 0 {
        return Err(Error::invalid("window and stride must be positive"));
    }
    if stride > window {
        return Err(Error::invalid(format!(
            "stride {stride} exceeds window {window}"
        )));
    }
    let pw = padded_extent(width, window, stride);
    let ph = padded_extent(height, window, stride);
    let tiles_x = (pw - window) / stride + 1;
    let tiles_y = (ph - window) / stride + 1;
    let mut tile_origins = Vec::with_capacity(tiles_x * tiles_y);
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            tile_origins.push((tx * stride, ty * stride));
        }
    }
    Ok(TileLayout {
        window,
        stride,
        image_size: (width, height),
        padded_size: (pw, ph),
        tiles_x,
        tiles_y,
        tile_origins,
    })
}

/// Crops a `window` x `window` block starting at `origin`; samples past the
/// right/bottom edge are mirrored back into the image.
pub fn extract_tile<T: Copy>(src: &Grid<T>, origin: (usize, usize), window: usize) -> Result<Grid<T>> {
    let (ox, oy) = origin;
    if window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    if ox >= src.width() || oy >= src.height() {
        return Err(Error::invalid(format!(
            "tile origin ({ox}, {oy}) outside {}x{} source",
            src.width(),
            src.height()
        )));
    }
    let cols: Vec<usize> = (0..window)
        .map(|i| reflect_index((ox + i) as isize, src.width()))
        .collect();
    let mut data = Vec::with_capacity(window * window);
    for j in 0..window {
        let sy = reflect_index((oy + j) as isize, src.height());
        data.extend(cols.iter().map(|&sx| src.get(sx, sy)));
    }
    Grid::new(window, window, data)
}

/// For each padded coordinate along one axis, the tile index whose center is
/// nearest; equal distances resolve to the lower index.
fn nearest_tile_along(len: usize, tiles: usize, window: usize, stride: usize) -> Vec<usize> {
    // doubled coordinates keep everything integral: pixel center 2x+1, tile center 2o+window
    (0..len)
        .map(|x| {
            let p = 2 * x as i64 + 1;
            let mut best = 0;
            let mut best_d = i64::MAX;
            for t in 0..tiles {
                let c = 2 * (t * stride) as i64 + window as i64;
                let d = (p - c).abs();
                if d < best_d {
                    best_d = d;
                    best = t;
                }
            }
            best
        })
        .collect()
}

/// Reassembles per-tile masks into one mask of `out_size`, each pixel taking
/// its label from the tile with the nearest center.
pub fn stitch(
    tile_masks: &[((usize, usize), ClassMask)],
    layout: &TileLayout,
    out_size: (usize, usize),
) -> Result<ClassMask> {
    let (ow, oh) = out_size;
    if ow == 0 || oh == 0 || ow > layout.padded_size.0 || oh > layout.padded_size.1 {
        return Err(Error::invalid(format!(
            "output size {ow}x{oh} incompatible with padded layout {}x{}",
            layout.padded_size.0, layout.padded_size.1
        )));
    }
    let mut slots: Vec<Option<&ClassMask>> = vec![None; layout.len()];
    for (origin, mask) in tile_masks {
        let idx = layout.index_of(*origin).ok_or_else(|| {
            Error::invalid(format!("tile origin ({}, {}) not in layout", origin.0, origin.1))
        })?;
        if mask.dims() != (layout.window, layout.window) {
            return Err(Error::invalid(format!(
                "tile at ({}, {}) is {}x{}, expected {w}x{w}",
                origin.0,
                origin.1,
                mask.width(),
                mask.height(),
                w = layout.window
            )));
        }
        if slots[idx].is_some() {
            return Err(Error::invalid(format!(
                "duplicate tile at ({}, {})",
                origin.0, origin.1
            )));
        }
        slots[idx] = Some(mask);
    }
    if let Some(missing) = slots.iter().position(Option::is_none) {
        let (x, y) = layout.tile_origins[missing];
        return Err(Error::MissingTile(x, y));
    }

    let col_tile = nearest_tile_along(ow, layout.tiles_x, layout.window, layout.stride);
    let row_tile = nearest_tile_along(oh, layout.tiles_y, layout.window, layout.stride);
    let mut data = Vec::with_capacity(ow * oh);
    for (y, &ty) in row_tile.iter().enumerate() {
        let oy = ty * layout.stride;
        for (x, &tx) in col_tile.iter().enumerate() {
            let tile = slots[ty * layout.tiles_x + tx].unwrap_or_else(|| unreachable!());
            let ox = tx * layout.stride;
            data.push(tile.get(x - ox, y - oy));
        }
    }
    Grid::<Label>::new(ow, oh, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GrayImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tile_counts() {
        let l = plan_tiles(4096, 3072, 512, 256).unwrap();
        assert_eq!((l.tiles_x, l.tiles_y, l.len()), (15, 11, 165));
        assert_eq!(l.padded_size, (4096, 3072));
        assert_eq!(plan_tiles(512, 512, 512, 256).unwrap().len(), 1);
        let l = plan_tiles(768, 512, 512, 256).unwrap();
        assert_eq!((l.tiles_x, l.tiles_y), (2, 1));
        let l = plan_tiles(600, 100, 512, 256).unwrap();
        assert_eq!(l.padded_size, (768, 512));
        assert!(plan_tiles(100, 100, 256, 512).is_err());
        assert!(plan_tiles(100, 100, 256, 0).is_err());
    }

    #[test]
    fn origins_are_row_major() {
        let l = plan_tiles(1024, 768, 512, 256).unwrap();
        let mut sorted = l.tile_origins.clone();
        sorted.sort_by_key(|&(x, y)| (y, x));
        assert_eq!(sorted, l.tile_origins);
        for (i, &o) in l.tile_origins.iter().enumerate() {
            assert_eq!(l.index_of(o), Some(i));
        }
    }

    #[test]
    fn every_padded_pixel_covered() {
        for (w, h, win, st) in [(1000, 700, 512, 256), (37, 11, 8, 3), (5, 5, 4, 4)] {
            let l = plan_tiles(w, h, win, st).unwrap();
            let (pw, ph) = l.padded_size;
            let mut cover = vec![0u32; pw * ph];
            for &(ox, oy) in &l.tile_origins {
                for y in oy..oy + win {
                    for x in ox..ox + win {
                        cover[y * pw + x] += 1;
                    }
                }
            }
            assert!(cover.iter().all(|&c| c >= 1));
        }
        // half-window stride: every interior column lies in at least two tiles
        let l = plan_tiles(1024, 512, 512, 256).unwrap();
        for x in 256..768 {
            let n = (0..l.tiles_x)
                .filter(|t| (t * 256..t * 256 + 512).contains(&x))
                .count();
            assert!(n >= 2);
        }
    }

    #[test]
    fn crop_top_left() {
        let m = GrayImage::from_fn(4, 4, |x, y| (y * 4 + x) as u8).unwrap();
        let t = extract_tile(&m, (0, 0), 2).unwrap();
        assert_eq!(t.as_slice(), &[0, 1, 4, 5]);
    }

    #[test]
    fn crop_reflects_past_edge() {
        let src = GrayImage::from_fn(512, 4, |x, _| (x % 251) as u8).unwrap();
        let t = extract_tile(&src, (256, 0), 512).unwrap();
        for i in 0..256 {
            assert_eq!(t.get(i, 0), src.get(256 + i, 0));
        }
        for k in 0..256 {
            // column 512 + k mirrors to 510 - k
            assert_eq!(t.get(256 + k, 0), src.get(510 - k, 0));
        }
    }

    #[test]
    fn crop_origin_outside() {
        let src = GrayImage::filled(512, 512, 0).unwrap();
        assert!(extract_tile(&src, (9999, 0), 512).is_err());
    }

    fn label(v: u32) -> Label {
        Label::from_u8((v % 3) as u8).unwrap()
    }

    #[test]
    fn stitch_reconstructs_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = ClassMask::from_fn(700, 300, |_, _| label(rng.gen())).unwrap();
        let l = plan_tiles(700, 300, 128, 64).unwrap();
        let tiles: Vec<_> = l
            .tile_origins
            .iter()
            .map(|&o| (o, extract_tile(&src, o, 128).unwrap()))
            .collect();
        assert_eq!(stitch(&tiles, &l, (700, 300)).unwrap(), src);
        let mut rev = tiles.clone();
        rev.reverse();
        assert_eq!(stitch(&rev, &l, (700, 300)).unwrap(), src);
    }

    #[test]
    fn equidistant_pixel_goes_to_lower_index() {
        // odd window: tile centers at 1.5 and 3.5, pixel 2 (center 2.5) ties
        let l = plan_tiles(5, 3, 3, 2).unwrap();
        assert_eq!(l.tiles_x, 2);
        let tiles: Vec<_> = l
            .tile_origins
            .iter()
            .enumerate()
            .map(|(i, &o)| (o, ClassMask::filled(3, 3, if i == 0 { Label::Body } else { Label::Boundary }).unwrap()))
            .collect();
        let out = stitch(&tiles, &l, (5, 3)).unwrap();
        assert_eq!(out.get(2, 0), Label::Body);
        assert_eq!(out.get(3, 0), Label::Boundary);
    }

    #[test]
    fn stitch_reports_missing_origin() {
        let l = plan_tiles(4096, 3072, 512, 256).unwrap();
        let blank = ClassMask::filled(512, 512, Label::Background).unwrap();
        let tiles: Vec<_> = l
            .tile_origins
            .iter()
            .filter(|&&o| o != (3584, 2560))
            .map(|&o| (o, blank.clone()))
            .collect();
        match stitch(&tiles, &l, (4096, 3072)) {
            Err(Error::MissingTile(3584, 2560)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stitch_rejects_bad_tiles() {
        let l = plan_tiles(8, 8, 4, 2).unwrap();
        let blank = ClassMask::filled(4, 4, Label::Background).unwrap();
        let mut tiles: Vec<_> = l.tile_origins.iter().map(|&o| (o, blank.clone())).collect();
        tiles.push(((1, 0), blank.clone()));
        assert!(stitch(&tiles, &l, (8, 8)).is_err());
        tiles.pop();
        tiles.push(((0, 0), blank.clone()));
        assert!(stitch(&tiles, &l, (8, 8)).is_err());
        tiles.pop();
        tiles[0].1 = ClassMask::filled(3, 4, Label::Background).unwrap();
        assert!(stitch(&tiles, &l, (8, 8)).is_err());
    }
}
