//! Content-aware reassembly upsampling.
//!
//! Kernel prediction compresses the input channels with a 1x1 convolution,
//! encodes them into `sigma^2 * k_up^2` channels, moves those channels to
//! the `sigma x sigma` sub-positions of each source pixel and normalizes. The
//! reassembly step then forms every target pixel as the weighted sum of the
//! `k_up x k_up` source neighborhood around its source pixel.

use serde::{Deserialize, Serialize};

use super::tensor::{conv2d, sigmoid, ConvWeights, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarafeConfig {
    pub sigma: usize,
    pub k_up: usize,
    pub k_encoder: usize,
    pub c_m: usize,
    pub normalizer: Normalizer,
}

impl Default for CarafeConfig {
    fn default() -> Self {
        Self {
            sigma: 2,
            k_up: 5,
            k_encoder: 3,
            c_m: 64,
            normalizer: Normalizer::Sigmoid,
        }
    }
}

impl CarafeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma == 0 {
            return Err(Error::invalid("upsampling ratio must be at least 1"));
        }
        if self.k_up.is_multiple_of(2) || self.k_encoder.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel sizes must be odd, got k_up={} k_encoder={}",
                self.k_up, self.k_encoder
            )));
        }
        if self.c_m == 0 {
            return Err(Error::invalid("compressor needs at least one channel"));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.k_up / 2
    }

    pub fn encoder_channels(&self) -> usize {
        self.sigma * self.sigma * self.k_up * self.k_up
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarafeWeights {
    /// 1x1, `C -> c_m`.
    pub compressor: ConvWeights,
    /// `k_encoder x k_encoder`, `c_m -> sigma^2 * k_up^2`.
    pub encoder: ConvWeights,
}

impl CarafeWeights {
    fn check(&self, channels: usize, cfg: &CarafeConfig) -> Result<()> {
        let c = &self.compressor;
        if c.depthwise || c.kernel != 1 || c.in_channels != channels || c.out_channels != cfg.c_m {
            return Err(Error::invalid(format!(
                "compressor must be 1x1 {channels} -> {}, got {}x{} {} -> {}",
                cfg.c_m, c.kernel, c.kernel, c.in_channels, c.out_channels
            )));
        }
        let e = &self.encoder;
        if e.depthwise || e.kernel != cfg.k_encoder || e.in_channels != cfg.c_m || e.out_channels != cfg.encoder_channels() {
            return Err(Error::invalid(format!(
                "encoder must be {k}x{k} {} -> {}, got {}x{} {} -> {}",
                cfg.c_m,
                cfg.encoder_channels(),
                e.kernel,
                e.kernel,
                e.in_channels,
                e.out_channels,
                k = cfg.k_encoder
            )));
        }
        Ok(())
    }
}

/// Reassembly kernels, one `k_up x k_up` set per target position, stored
/// `[y][x][n][m]` for neighborhood offsets `(n - r, m - r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    height: usize,
    width: usize,
    k_up: usize,
    weights: Vec<f64>,
}

impl KernelField {
    pub fn new(height: usize, width: usize, k_up: usize, weights: Vec<f64>) -> Result<Self> {
        if k_up.is_multiple_of(2) {
            return Err(Error::invalid(format!("k_up {k_up} must be odd")));
        }
        if weights.len() != height * width * k_up * k_up {
            return Err(Error::invalid(format!(
                "kernel field ({height}, {width}, {}) needs {} weights, got {}",
                k_up * k_up,
                height * width * k_up * k_up,
                weights.len()
            )));
        }
        Ok(Self {
            height,
            width,
            k_up,
            weights,
        })
    }

    /// `(sigma H, sigma W, k_up^2)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.k_up * self.k_up)
    }

    pub fn k_up(&self) -> usize {
        self.k_up
    }

    pub fn kernel_at(&self, y: usize, x: usize) -> &[f64] {
        let kk = self.k_up * self.k_up;
        let base = (y * self.width + x) * kk;
        &self.weights[base..base + kk]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

pub fn carafe_predict_kernels(x: &Tensor, weights: &CarafeWeights, cfg: &CarafeConfig) -> Result<KernelField> {
    cfg.validate()?;
    weights.check(x.channels(), cfg)?;
    let compressed = conv2d(x, &weights.compressor)?;
    let encoded = conv2d(&compressed, &weights.encoder)?;

    let (_, h, w) = x.shape();
    let s = cfg.sigma;
    let kk = cfg.k_up * cfg.k_up;
    let (oh, ow) = (h * s, w * s);
    let mut field = vec![0.0; oh * ow * kk];
    // encoder channel (kidx * s^2 + dy * s + dx) lands on target (i*s+dy, j*s+dx)
    for kidx in 0..kk {
        for dy in 0..s {
            for dx in 0..s {
                let plane = encoded.channel(kidx * s * s + dy * s + dx);
                for i in 0..h {
                    for j in 0..w {
                        let (ty, tx) = (i * s + dy, j * s + dx);
                        field[(ty * ow + tx) * kk + kidx] = plane[i * w + j];
                    }
                }
            }
        }
    }
    match cfg.normalizer {
        Normalizer::Sigmoid => field.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Normalizer::Softmax => {
            for k in field.chunks_mut(kk) {
                let m = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                k.iter_mut().for_each(|v| *v = (*v - m).exp());
                let z: f64 = k.iter().sum();
                k.iter_mut().for_each(|v| *v /= z);
            }
        }
    }
    KernelField::new(oh, ow, cfg.k_up, field)
}

pub fn carafe_reassemble(x: &Tensor, kf: &KernelField, sigma: usize) -> Result<Tensor> {
    let (c, h, w) = x.shape();
    if sigma == 0 {
        return Err(Error::invalid("upsampling ratio must be at least 1"));
    }
    let (oh, ow, _) = kf.shape();
    if (oh, ow) != (h * sigma, w * sigma) {
        return Err(Error::invalid(format!(
            "kernel field is {oh}x{ow}, expected {}x{}",
            h * sigma,
            w * sigma
        )));
    }
    let k = kf.k_up();
    let r = (k / 2) as isize;
    let mut out = vec![0.0; c * oh * ow];
    for ty in 0..oh {
        let i = (ty / sigma) as isize;
        for tx in 0..ow {
            let j = (tx / sigma) as isize;
            let kern = kf.kernel_at(ty, tx);
            for n in -r..=r {
                let sy = i + n;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for m in -r..=r {
                    let sx = j + m;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let wgt = kern[((n + r) as usize) * k + (m + r) as usize];
                    for ch in 0..c {
                        out[(ch * oh + ty) * ow + tx] += wgt * x.get(ch, sy as usize, sx as usize);
                    }
                }
            }
        }
    }
    Ok(Tensor::from_raw_unchecked(c, oh, ow, out))
}

/// Kernel prediction followed by reassembly.
pub fn carafe(x: &Tensor, weights: &CarafeWeights, cfg: &CarafeConfig) -> Result<Tensor> {
    let kf = carafe_predict_kernels(x, weights, cfg)?;
    carafe_reassemble(x, &kf, cfg.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(c: usize, cfg: &CarafeConfig, fill: f64) -> CarafeWeights {
        let compressor = ConvWeights::new(cfg.c_m, c, 1, vec![fill; cfg.c_m * c]).unwrap();
        let n = cfg.encoder_channels() * cfg.c_m * cfg.k_encoder * cfg.k_encoder;
        let encoder = ConvWeights::new(cfg.encoder_channels(), cfg.c_m, cfg.k_encoder, vec![fill; n]).unwrap();
        CarafeWeights { compressor, encoder }
    }

    #[test]
    fn field_shape() {
        let cfg = CarafeConfig { c_m: 4, ..Default::default() };
        let x = Tensor::from_fn(8, 4, 4, |c, y, x| (c + y * x) as f64 * 0.01).unwrap();
        let kf = carafe_predict_kernels(&x, &weights(8, &cfg, 0.01), &cfg).unwrap();
        assert_eq!(kf.shape(), (8, 8, 25));
    }

    #[test]
    fn zero_encoder_gives_half() {
        let cfg = CarafeConfig { c_m: 2, k_up: 3, ..Default::default() };
        let x = Tensor::from_fn(3, 4, 5, |c, y, x| (c * 7 + y * 3 + x) as f64).unwrap();
        let kf = carafe_predict_kernels(&x, &weights(3, &cfg, 0.0), &cfg).unwrap();
        assert!(kf.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn constant_input_interior() {
        let c = 2.5;
        let x = Tensor::from_fn(1, 6, 6, |_, _, _| c).unwrap();
        let kf = KernelField::new(12, 12, 3, vec![0.5; 12 * 12 * 9]).unwrap();
        let out = carafe_reassemble(&x, &kf, 2).unwrap();
        for ty in 2..10 {
            for tx in 2..10 {
                assert!((out.get(0, ty, tx) - 4.5 * c).abs() < 1e-12);
            }
        }
        // corner source pixel sees only a 2x2 neighborhood
        assert!((out.get(0, 0, 0) - 2.0 * c).abs() < 1e-12);
    }

    #[test]
    fn delta_kernel_is_nearest_neighbor() {
        let x = Tensor::from_fn(2, 3, 4, |c, y, x| (c * 100 + y * 10 + x) as f64).unwrap();
        let (s, k) = (3, 5);
        let mut w = vec![0.0; 9 * 12 * k * k];
        for kern in w.chunks_mut(k * k) {
            kern[(k * k) / 2] = 1.0;
        }
        let kf = KernelField::new(9, 12, k, w).unwrap();
        let out = carafe_reassemble(&x, &kf, s).unwrap();
        for c in 0..2 {
            for ty in 0..9 {
                for tx in 0..12 {
                    assert_eq!(out.get(c, ty, tx), x.get(c, ty / s, tx / s));
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let cfg = CarafeConfig { c_m: 2, k_up: 3, ..Default::default() };
        let x = Tensor::zeros(3, 4, 4).unwrap();
        assert!(carafe_predict_kernels(&x, &weights(4, &cfg, 0.0), &cfg).is_err());
        let kf = KernelField::new(4, 4, 3, vec![0.0; 16 * 9]).unwrap();
        assert!(carafe_reassemble(&x, &kf, 2).is_err());
        assert!(KernelField::new(4, 4, 2, vec![0.0; 64]).is_err());
        let bad = CarafeConfig { k_up: 4, ..cfg };
        assert!(bad.validate().is_err());
    }
}
