use super::GrayImage;
use crate::error::{Error, Result};

/// Source coordinate and blend weight for one output sample along an axis
/// (half-pixel centers, clamped at the edges).
fn axis_taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear rescale returning unquantized values in row-major order.
pub fn rescale_bilinear_values(img: &GrayImage, new_width: usize, new_height: usize) -> Result<Vec<f64>> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::invalid(format!(
            "target size must be positive, got {new_width}x{new_height}"
        )));
    }
    let xs = axis_taps(new_width, img.width());
    let ys = axis_taps(new_height, img.height());
    let mut out = Vec::with_capacity(new_width * new_height);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let p00 = img.get(x0, y0) as f64;
            let p10 = img.get(x1, y0) as f64;
            let p01 = img.get(x0, y1) as f64;
            let p11 = img.get(x1, y1) as f64;
            let top = p00 + (p10 - p00) * tx;
            let bottom = p01 + (p11 - p01) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    Ok(out)
}

/// Bilinear rescale to `new_width` x `new_height`, rounding to the nearest byte.
pub fn rescale_bilinear(img: &GrayImage, new_width: usize, new_height: usize) -> Result<GrayImage> {
    let values = rescale_bilinear_values(img, new_width, new_height)?;
    GrayImage::new(
        new_width,
        new_height,
        values.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_pixel_row_to_four() {
        let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        let v = rescale_bilinear_values(&img, 4, 1).unwrap();
        assert_eq!(v, vec![0.0, 63.75, 191.25, 255.0]);
        let q = rescale_bilinear(&img, 4, 1).unwrap();
        assert_eq!(q.as_slice(), &[0, 64, 191, 255]);
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(2, 2, 117).unwrap();
        for (w, h) in [(1, 1), (3, 7), (64, 5)] {
            let out = rescale_bilinear(&img, w, h).unwrap();
            assert!(out.as_slice().iter().all(|&v| v == 117));
        }
    }

    #[test]
    fn full_size_camera_frame() {
        let img = GrayImage::from_fn(4000, 3000, |x, y| ((x * 7 + y * 3) % 256) as u8).unwrap();
        let out = rescale_bilinear(&img, 4096, 3072).unwrap();
        assert_eq!(out.dims(), (4096, 3072));
    }

    #[test]
    fn zero_target_rejected() {
        let img = GrayImage::filled(2, 2, 0).unwrap();
        assert!(rescale_bilinear(&img, 0, 4).is_err());
        assert!(rescale_bilinear(&img, 4, 0).is_err());
    }

    proptest! {
        #[test]
        fn output_within_input_range(
            w in 1usize..8, h in 1usize..8,
            nw in 1usize..20, nh in 1usize..20,
            seed in proptest::collection::vec(any::<u8>(), 64),
        ) {
            let img = GrayImage::from_fn(w, h, |x, y| seed[(y * 8 + x) % 64]).unwrap();
            let lo = *img.as_slice().iter().min().unwrap() as f64;
            let hi = *img.as_slice().iter().max().unwrap() as f64;
            for v in rescale_bilinear_values(&img, nw, nh).unwrap() {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }
}
