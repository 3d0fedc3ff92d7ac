//! Per-fragment geometry.
//!
//! Each fragment is replaced by its equivalent ellipse: orientation and axis
//! ratio come from the second central moments of the pixel set, and the
//! axes are scaled so that the ellipse area `pi * a * b` equals the pixel
//! area. Pixels are treated as unit squares, which adds `1/12` to each axial
//! variance and makes solid rectangles come out with their exact aspect
//! ratio.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::InstanceMap;
use crate::raster::Calibration;

/// Coefficient and ratio of the equivalent-diameter formula.
pub const DIAMETER_COEFF: f64 = 1.16;
pub const DIAMETER_RATIO: f64 = 1.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: u32,
    pub pixel_area: u64,
    /// Pixel-center coordinates.
    pub centroid: (f64, f64),
    /// Semi-major axis, cm.
    pub a: f64,
    /// Semi-minor axis, cm.
    pub b: f64,
    /// Major-axis direction in `[0, pi)`, measured from +x towards +y (image rows).
    pub orientation: f64,
    /// Equivalent diameter, cm.
    pub d: f64,
    /// Ellipsoid volume, cm^3.
    pub volume: f64,
    pub touches_border: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseFit {
    pub a: f64,
    pub b: f64,
    pub orientation: f64,
    pub centroid: (f64, f64),
}

/// Equivalent ellipse of a pixel set, in pixel units.
///
/// Panics on an empty set.
pub fn fit_ellipse(pixels: &[(usize, usize)]) -> EllipseFit {
    assert!(!pixels.is_empty(), "fit_ellipse needs at least one pixel");
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let dx = x as f64 - mx;
        let dy = y as f64 - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let mu20 = sxx / n + 1.0 / 12.0;
    let mu02 = syy / n + 1.0 / 12.0;
    let mu11 = sxy / n;

    let half_tr = 0.5 * (mu20 + mu02);
    let disc = (0.25 * (mu20 - mu02).powi(2) + mu11 * mu11).sqrt();
    let major = half_tr + disc;
    let minor = half_tr - disc;
    let ratio = if minor > 0.0 && major.is_finite() {
        (major / minor).sqrt()
    } else {
        1.0
    };
    let a = (n * ratio / PI).sqrt();
    let b = (n / (PI * ratio)).sqrt();
    let orientation = if disc > 0.0 {
        (0.5 * (2.0 * mu11).atan2(mu20 - mu02)).rem_euclid(PI)
    } else {
        0.0
    };
    // rem_euclid can round up to exactly pi
    let orientation = if orientation >= PI { 0.0 } else { orientation };
    EllipseFit {
        a,
        b,
        orientation,
        centroid: (mx, my),
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

/// `1.16 * b * sqrt(1.35 * a / b)`; zero when `b` is zero.
pub fn equivalent_diameter(a: f64, b: f64) -> Result<f64> {
    check_nonneg("a", a)?;
    check_nonneg("b", b)?;
    if a < b {
        return Err(Error::invalid(format!("semi-major axis {a} smaller than semi-minor {b}")));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    Ok(DIAMETER_COEFF * b * (DIAMETER_RATIO * a / b).sqrt())
}

/// Ellipsoid with semi-axes `a`, `b` and `d / 2`.
pub fn ellipsoid_volume(a: f64, b: f64, d: f64) -> Result<f64> {
    check_nonneg("a", a)?;
    check_nonneg("b", b)?;
    check_nonneg("d", d)?;
    Ok(4.0 / 3.0 * PI * a * b * (d / 2.0))
}

pub(crate) fn fragment_from_pixels(
    id: u32,
    pixels: &[(usize, usize)],
    dims: (usize, usize),
    cal: &Calibration,
) -> Fragment {
    let fit = fit_ellipse(pixels);
    let a = cal.to_cm(fit.a);
    let b = cal.to_cm(fit.b);
    let d = equivalent_diameter(a, b).expect("fit yields a >= b >= 0");
    let volume = ellipsoid_volume(a, b, d).expect("nonnegative axes");
    let (w, h) = dims;
    let touches_border = pixels
        .iter()
        .any(|&(x, y)| x == 0 || y == 0 || x + 1 == w || y + 1 == h);
    Fragment {
        id,
        pixel_area: pixels.len() as u64,
        centroid: fit.centroid,
        a,
        b,
        orientation: fit.orientation,
        d,
        volume,
        touches_border,
    }
}

/// One fragment per positive instance id, sorted by id.
pub fn measure(instances: &InstanceMap, cal: &Calibration) -> Vec<Fragment> {
    let dims = instances.dims();
    instances
        .pixel_lists()
        .par_iter()
        .enumerate()
        .map(|(k, px)| fragment_from_pixels(k as u32 + 1, px, dims, cal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disc(r: f64, c: f64) -> Vec<(usize, usize)> {
        let n = (2.0 * c) as usize + 1;
        let mut v = Vec::new();
        for y in 0..n {
            for x in 0..n {
                let (dx, dy) = (x as f64 - c, y as f64 - c);
                if dx * dx + dy * dy <= r * r {
                    v.push((x, y));
                }
            }
        }
        v
    }

    #[test]
    fn disc_is_round() {
        let px = disc(10.0, 15.0);
        let f = fit_ellipse(&px);
        assert!((f.a / f.b - 1.0).abs() < 1e-9);
        assert!((PI * f.a * f.b - px.len() as f64).abs() < 1e-9);
        assert!((f.a - 10.0).abs() < 0.1, "a = {}", f.a);
    }

    #[test]
    fn rectangle_axes() {
        let px: Vec<_> = (0..10).flat_map(|y| (0..20).map(move |x| (x + 3, y + 5))).collect();
        let f = fit_ellipse(&px);
        assert!((f.a - 20.0 / PI.sqrt()).abs() < 1e-9);
        assert!((f.b - 10.0 / PI.sqrt()).abs() < 1e-9);
        assert!(f.orientation.abs() < 1e-12);
        assert!((f.a - 11.2838).abs() < 1e-4 && (f.b - 5.6419).abs() < 1e-4);
    }

    #[test]
    fn single_pixel() {
        let f = fit_ellipse(&[(7, 7)]);
        assert!((f.a - 1.0 / PI.sqrt()).abs() < 1e-12);
        assert_eq!(f.a, f.b);
        assert!((f.a - 0.5642).abs() < 1e-4);
    }

    #[test]
    fn vertical_line_orientation() {
        let px: Vec<_> = (0..9).map(|y| (4, y)).collect();
        let f = fit_ellipse(&px);
        assert!((f.orientation - PI / 2.0).abs() < 1e-12);
        assert!((f.a / f.b - 9.0).abs() < 1e-9);
    }

    #[test]
    fn diameter_values() {
        assert!((equivalent_diameter(10.0, 10.0).unwrap() - 13.4780).abs() < 1e-4);
        assert!((equivalent_diameter(20.0, 10.0).unwrap() - 19.0607).abs() < 1e-4);
        assert_eq!(equivalent_diameter(5.0, 0.0).unwrap(), 0.0);
        assert!(equivalent_diameter(1.0, 2.0).is_err());
        assert!(equivalent_diameter(-1.0, -2.0).is_err());
    }

    #[test]
    fn volume_values() {
        let v = ellipsoid_volume(20.0, 10.0, 19.0607).unwrap();
        assert!((v - 7984.1).abs() < 0.5, "{v}");
        let v = ellipsoid_volume(10.0, 10.0, 13.4780).unwrap();
        assert!((v - 2822.9).abs() < 0.5, "{v}");
        assert_eq!(ellipsoid_volume(0.0, 3.0, 4.0).unwrap(), 0.0);
        assert_eq!(ellipsoid_volume(3.0, 3.0, 0.0).unwrap(), 0.0);
        assert!(ellipsoid_volume(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn measure_scales_pixels_to_cm() {
        // a disc whose equivalent diameter is close to 10 px
        let r = 10.0 / (DIAMETER_COEFF * DIAMETER_RATIO.sqrt());
        let px = disc(r, 12.0);
        let mut ids = vec![0u32; 25 * 25];
        for &(x, y) in &px {
            ids[y * 25 + x] = 1;
        }
        let im = InstanceMap::new(25, 25, ids).unwrap();
        let unit = measure(&im, &Calibration::new(1.0).unwrap());
        let cm = measure(&im, &Calibration::new(0.125).unwrap());
        assert!((unit[0].d - 10.0).abs() < 0.3, "d_px = {}", unit[0].d);
        assert!((cm[0].d - unit[0].d * 0.125).abs() < 1e-12);
        assert!((cm[0].d - 1.25).abs() < 0.05);
        assert!(!cm[0].touches_border);
    }

    #[test]
    fn measure_empty_and_border() {
        let cal = Calibration::new(1.0).unwrap();
        assert!(measure(&InstanceMap::empty(3, 3).unwrap(), &cal).is_empty());
        let im = InstanceMap::new(3, 3, vec![0, 0, 0, 0, 1, 0, 0, 0, 2]).unwrap();
        let f = measure(&im, &cal);
        assert_eq!(f.len(), 2);
        assert!(!f[0].touches_border && f[1].touches_border);
    }

    fn arb_pixels() -> impl Strategy<Value = Vec<(usize, usize)>> {
        proptest::collection::btree_set((0usize..30, 0usize..30), 1..120)
            .prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn diameter_identity(a in 0.0f64..1e4, t in 0.0f64..1.0) {
            let b = a * t;
            let d = equivalent_diameter(a, b).unwrap();
            let alt = DIAMETER_COEFF * DIAMETER_RATIO.sqrt() * (a * b).sqrt();
            prop_assert!((d - alt).abs() <= 1e-12 * alt.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn area_matches_and_axes_ordered(px in arb_pixels()) {
            let f = fit_ellipse(&px);
            prop_assert!(f.a >= f.b && f.b > 0.0);
            prop_assert!((PI * f.a * f.b / px.len() as f64 - 1.0).abs() < 1e-9);
            prop_assert!((0.0..PI).contains(&f.orientation));
        }

        #[test]
        fn quarter_turn_keeps_size(px in arb_pixels()) {
            let rot: Vec<_> = px.iter().map(|&(x, y)| (29 - y, x)).collect();
            let f = fit_ellipse(&px);
            let g = fit_ellipse(&rot);
            prop_assert!((f.a - g.a).abs() < 1e-9 * f.a);
            prop_assert!((f.b - g.b).abs() < 1e-9 * f.a);
            if f.a / f.b > 1.0 + 1e-6 {
                let diff = (g.orientation - f.orientation - PI / 2.0).rem_euclid(PI);
                prop_assert!(diff.min(PI - diff) < 1e-6);
            }
        }

        #[test]
        fn calibration_scale_covariance(px in arb_pixels(), s in 0.01f64..5.0) {
            let c1 = Calibration::new(s).unwrap();
            let c2 = Calibration::new(2.0 * s).unwrap();
            let f1 = fragment_from_pixels(1, &px, (30, 30), &c1);
            let f2 = fragment_from_pixels(1, &px, (30, 30), &c2);
            prop_assert!((f2.a - 2.0 * f1.a).abs() <= 1e-12 * f2.a);
            prop_assert!((f2.d - 2.0 * f1.d).abs() <= 1e-12 * f2.d);
            prop_assert!((f2.volume - 8.0 * f1.volume).abs() <= 1e-12 * f2.volume);
            let area = f1.pixel_area as f64 * s * s;
            prop_assert!((PI * f1.a * f1.b - area).abs() <= 1e-9 * area);
        }
    }
}
