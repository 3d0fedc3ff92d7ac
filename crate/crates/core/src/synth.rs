//! Synthetic body/boundary scenes with known fragment geometry.
//!
//! Each ellipse's interior `(a, b)` is painted Body and the ring out to
//! `(a + band, b + band)` is painted Boundary, so the reconstructed fragment
//! is the outer ellipse. Ground truth is reported for that outer ellipse.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Calibration, ClassMask, Grid, Label};
use crate::shape::{ellipsoid_volume, equivalent_diameter, Fragment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub center: (f64, f64),
    /// Body semi-axes, pixels.
    pub a_px: f64,
    pub b_px: f64,
    pub orientation: f64,
    pub boundary_band_px: f64,
}

impl EllipseSpec {
    fn outer(&self) -> (f64, f64) {
        (self.a_px + self.boundary_band_px, self.b_px + self.boundary_band_px)
    }

    /// Half-extent of the outer ellipse's bounding box along x and y.
    fn half_extent(&self) -> (f64, f64) {
        let (a, b) = self.outer();
        let (s, c) = self.orientation.sin_cos();
        (
            ((a * c).powi(2) + (b * s).powi(2)).sqrt(),
            ((a * s).powi(2) + (b * c).powi(2)).sqrt(),
        )
    }

    /// Normalized radius of pixel `(x, y)` for semi-axes `(a, b)`; <= 1 inside.
    fn level(&self, x: f64, y: f64, a: f64, b: f64) -> f64 {
        let (s, c) = self.orientation.sin_cos();
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / a).powi(2) + (v / b).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub width: usize,
    pub height: usize,
    pub ellipses: Vec<EllipseSpec>,
    pub seed: u64,
    pub cm_per_pixel: f64,
}

/// Parameters for randomly placed, mutually separated ellipses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSceneParams {
    pub width: usize,
    pub height: usize,
    pub count: usize,
    pub a_range: (f64, f64),
    /// Range of `b / a`.
    pub aspect_range: (f64, f64),
    pub band_px: f64,
    /// Minimum background gap between outer ellipses, pixels.
    pub gap_px: f64,
    pub cm_per_pixel: f64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            count: 30,
            a_range: (10.0, 60.0),
            aspect_range: (0.5, 1.0),
            band_px: 2.0,
            gap_px: 4.0,
            cm_per_pixel: 1.0,
        }
    }
}

impl SyntheticSceneSpec {
    /// Places `count` ellipses by rejection sampling so that no two outer
    /// ellipses come within `gap_px` of each other.
    pub fn random(p: &RandomSceneParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ellipses: Vec<EllipseSpec> = Vec::with_capacity(p.count);
        let mut attempts = 0usize;
        while ellipses.len() < p.count {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::invalid(format!(
                    "could not place {} separated ellipses on {}x{}",
                    p.count, p.width, p.height
                )));
            }
            let a = rng.gen_range(p.a_range.0..=p.a_range.1);
            let b = (a * rng.gen_range(p.aspect_range.0..=p.aspect_range.1)).max(1.0);
            let r = a + p.band_px;
            let margin = r + 1.0;
            if 2.0 * margin >= p.width.min(p.height) as f64 {
                continue;
            }
            let cx = rng.gen_range(margin..p.width as f64 - 1.0 - margin);
            let cy = rng.gen_range(margin..p.height as f64 - 1.0 - margin);
            let clear = ellipses.iter().all(|e| {
                let (ea, _) = e.outer();
                let dist = ((e.center.0 - cx).powi(2) + (e.center.1 - cy).powi(2)).sqrt();
                dist >= ea + r + p.gap_px
            });
            if !clear {
                continue;
            }
            ellipses.push(EllipseSpec {
                center: (cx, cy),
                a_px: a,
                b_px: b,
                orientation: rng.gen_range(0.0..PI),
                boundary_band_px: p.band_px,
            });
        }
        Ok(Self {
            width: p.width,
            height: p.height,
            ellipses,
            seed,
            cm_per_pixel: p.cm_per_pixel,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("canvas must be nonempty"));
        }
        Calibration::new(self.cm_per_pixel)?;
        for (i, e) in self.ellipses.iter().enumerate() {
            if !(e.a_px > 0.0 && e.b_px > 0.0 && e.boundary_band_px >= 1.0) {
                return Err(Error::invalid(format!(
                    "ellipse {i}: axes must be positive and band at least 1 px"
                )));
            }
            let (hx, hy) = e.half_extent();
            let (cx, cy) = e.center;
            if cx - hx < 0.0 || cy - hy < 0.0 || cx + hx > (self.width - 1) as f64 || cy + hy > (self.height - 1) as f64 {
                return Err(Error::invalid(format!("ellipse {i} extends outside the canvas")));
            }
        }
        Ok(())
    }
}

/// Rasterizes the scene (later ellipses overwrite earlier ones) and returns
/// the analytic fragment for every ellipse.
pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<(ClassMask, Vec<Fragment>)> {
    spec.validate()?;
    let cal = Calibration::new(spec.cm_per_pixel)?;
    let mut mask = Grid::filled(spec.width, spec.height, Label::Background)?;
    let mut truth = Vec::with_capacity(spec.ellipses.len());
    for (i, e) in spec.ellipses.iter().enumerate() {
        let (oa, ob) = e.outer();
        let (hx, hy) = e.half_extent();
        let x0 = (e.center.0 - hx).floor().max(0.0) as usize;
        let y0 = (e.center.1 - hy).floor().max(0.0) as usize;
        let x1 = ((e.center.0 + hx).ceil() as usize).min(spec.width - 1);
        let y1 = ((e.center.1 + hy).ceil() as usize).min(spec.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (fx, fy) = (x as f64, y as f64);
                if e.level(fx, fy, e.a_px, e.b_px) <= 1.0 {
                    mask.set(x, y, Label::Body);
                } else if e.level(fx, fy, oa, ob) <= 1.0 {
                    mask.set(x, y, Label::Boundary);
                }
            }
        }

        let (major, minor, orientation) = if oa >= ob {
            (oa, ob, e.orientation)
        } else {
            (ob, oa, e.orientation + PI / 2.0)
        };
        let a = cal.to_cm(major);
        let b = cal.to_cm(minor);
        let d = equivalent_diameter(a, b)?;
        truth.push(Fragment {
            id: i as u32 + 1,
            pixel_area: (PI * oa * ob).round() as u64,
            centroid: e.center,
            a,
            b,
            orientation: orientation.rem_euclid(PI),
            d,
            volume: ellipsoid_volume(a, b, d)?,
            touches_border: false,
        });
    }
    Ok((mask, truth))
}
