//! Randomized comparison of every operator against its reference loop.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::carafe::{carafe_predict_kernels, carafe_reassemble, CarafeConfig, CarafeWeights, KernelField, Normalizer};
use super::ghost::{eca, ghost_conv, ghost_eca, GhostWeights};
use super::params::{count_params, OpSpec};
use super::reference;
use super::tensor::{ConvWeights, Tensor};

pub const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestRow {
    pub check: String,
    pub cases: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn row(check: &str, cases: usize, err: f64, tol: f64) -> SelfTestRow {
    SelfTestRow {
        check: check.to_string(),
        cases,
        max_abs_error: err,
        tolerance: tol,
        pass: err <= tol,
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_tensor(rng: &mut ChaCha8Rng) -> Tensor {
    let c = rng.gen_range(1..=4);
    let h = rng.gen_range(1..=6);
    let w = rng.gen_range(1..=6);
    let data = rand_vec(rng, c * h * w);
    Tensor::new(c, h, w, data).expect("valid shape")
}

/// Runs `cases` random instances per operator plus the fixed structural checks.
pub fn run_selftest(seed: u64, cases: usize) -> Vec<SelfTestRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err_kernels: f64 = 0.0;
    let mut err_reassemble: f64 = 0.0;
    let mut err_ghost: f64 = 0.0;
    let mut err_eca: f64 = 0.0;
    let mut err_ghost_eca: f64 = 0.0;

    for case in 0..cases {
        let x = rand_tensor(&mut rng);
        let (c, h, w) = x.shape();

        let cfg = CarafeConfig {
            sigma: rng.gen_range(1..=3),
            k_up: [1, 3, 5][rng.gen_range(0..3)],
            k_encoder: [1, 3][rng.gen_range(0..2)],
            c_m: rng.gen_range(1..=4),
            normalizer: if case % 2 == 0 { Normalizer::Sigmoid } else { Normalizer::Softmax },
        };
        let comp = rand_vec(&mut rng, cfg.c_m * c);
        let enc_n = cfg.encoder_channels() * cfg.c_m * cfg.k_encoder * cfg.k_encoder;
        let enc = rand_vec(&mut rng, enc_n);
        let weights = CarafeWeights {
            compressor: ConvWeights::new(cfg.c_m, c, 1, comp.clone()).expect("shape"),
            encoder: ConvWeights::new(cfg.encoder_channels(), cfg.c_m, cfg.k_encoder, enc.clone()).expect("shape"),
        };
        let kf = carafe_predict_kernels(&x, &weights, &cfg).expect("consistent weights");
        let oracle_kf = reference::carafe_kernels(
            x.as_slice(),
            c,
            h,
            w,
            &comp,
            &enc,
            cfg.c_m,
            cfg.k_encoder,
            cfg.sigma,
            cfg.k_up,
            cfg.normalizer == Normalizer::Softmax,
        );
        err_kernels = err_kernels.max(max_diff(kf.as_slice(), &oracle_kf));

        // reassembly with unconstrained random kernels
        let (oh, ow, kk) = kf.shape();
        let raw_k = rand_vec(&mut rng, oh * ow * kk);
        let rkf = KernelField::new(oh, ow, cfg.k_up, raw_k.clone()).expect("shape");
        let up = carafe_reassemble(&x, &rkf, cfg.sigma).expect("shape");
        let oracle_up = reference::carafe_reassemble(x.as_slice(), c, h, w, &raw_k, cfg.sigma, cfg.k_up);
        err_reassemble = err_reassemble.max(max_diff(up.as_slice(), &oracle_up));

        let c_h = rng.gen_range(1..=4);
        let prim = rand_vec(&mut rng, c_h * c);
        let cheap = rand_vec(&mut rng, c_h * 9);
        let gw = GhostWeights::new(
            ConvWeights::new(c_h, c, 1, prim.clone()).expect("shape"),
            ConvWeights::depthwise(c_h, 3, cheap.clone()).expect("shape"),
        )
        .expect("ghost stages");
        let g = ghost_conv(&x, &gw).expect("shape");
        let oracle_g = reference::ghost(x.as_slice(), c, h, w, &prim, &cheap, c_h);
        err_ghost = err_ghost.max(max_diff(g.as_slice(), &oracle_g));

        let k = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let e = eca(&x, &k);
        err_eca = err_eca.max(max_diff(e.as_slice(), &reference::eca(x.as_slice(), c, h, w, &k)));

        let ge = ghost_eca(&x, &gw, &k).expect("shape");
        let oracle_ge = reference::eca(&oracle_g, 2 * c_h, h, w, &k);
        err_ghost_eca = err_ghost_eca.max(max_diff(ge.as_slice(), &oracle_ge));
    }

    let mut rows = vec![
        row("carafe kernel prediction vs loop oracle", cases, err_kernels, ORACLE_TOLERANCE),
        row("carafe reassembly vs loop oracle", cases, err_reassemble, ORACLE_TOLERANCE),
        row("ghost conv vs loop oracle", cases, err_ghost, ORACLE_TOLERANCE),
        row("eca vs loop oracle", cases, err_eca, ORACLE_TOLERANCE),
        row("ghost-eca vs loop oracle", cases, err_ghost_eca, ORACLE_TOLERANCE),
    ];

    // delta kernel reproduces nearest-neighbor upsampling exactly
    let mut err_delta: f64 = 0.0;
    for _ in 0..cases.max(1) {
        let x = rand_tensor(&mut rng);
        let (c, h, w) = x.shape();
        let sigma = rng.gen_range(1..=3);
        let k_up = [1, 3, 5][rng.gen_range(0..3)];
        let kk = k_up * k_up;
        let mut wts = vec![0.0; h * sigma * w * sigma * kk];
        for kern in wts.chunks_mut(kk) {
            kern[kk / 2] = 1.0;
        }
        let kf = KernelField::new(h * sigma, w * sigma, k_up, wts).expect("shape");
        let up = carafe_reassemble(&x, &kf, sigma).expect("shape");
        for ch in 0..c {
            for ty in 0..h * sigma {
                for tx in 0..w * sigma {
                    err_delta = err_delta.max((up.get(ch, ty, tx) - x.get(ch, ty / sigma, tx / sigma)).abs());
                }
            }
        }
    }
    rows.push(row("delta kernel equals nearest-neighbor upsample", cases.max(1), err_delta, 0.0));

    // softmax normalizer with sigma = 1, k_up = 1 is the identity
    let mut err_ident: f64 = 0.0;
    for _ in 0..cases.max(1) {
        let x = rand_tensor(&mut rng);
        let c = x.channels();
        let cfg = CarafeConfig {
            sigma: 1,
            k_up: 1,
            k_encoder: 3,
            c_m: 2,
            normalizer: Normalizer::Softmax,
        };
        let weights = CarafeWeights {
            compressor: ConvWeights::new(2, c, 1, rand_vec(&mut rng, 2 * c)).expect("shape"),
            encoder: ConvWeights::new(1, 2, 3, rand_vec(&mut rng, 18)).expect("shape"),
        };
        let kf = carafe_predict_kernels(&x, &weights, &cfg).expect("shape");
        let out = carafe_reassemble(&x, &kf, 1).expect("shape");
        err_ident = err_ident.max(out.max_abs_diff(&x));
    }
    rows.push(row("softmax sigma=1 k_up=1 is identity", cases.max(1), err_ident, 0.0));

    // zero ECA kernel halves the input
    let mut err_half: f64 = 0.0;
    for _ in 0..cases.max(1) {
        let x = rand_tensor(&mut rng);
        let out = eca(&x, &[0.0; 3]);
        err_half = err_half.max(max_diff(out.as_slice(), &x.as_slice().iter().map(|v| v / 2.0).collect::<Vec<_>>()));
    }
    rows.push(row("eca with zero kernel halves input", cases.max(1), err_half, 0.0));

    let std64 = count_params(OpSpec::StandardConv3x3 { c_in: 64, c_out: 64 }, false).unwrap_or(0);
    let ghost64 = count_params(OpSpec::Ghost { c_in: 64, c_out: 64 }, false).unwrap_or(0);
    rows.push(row("standard 3x3 conv 64->64 has 36864 weights", 1, (std64 as f64 - 36_864.0).abs(), 0.0));
    rows.push(row("ghost conv 64->64 has 2336 weights", 1, (ghost64 as f64 - 2_336.0).abs(), 0.0));
    rows
}

pub fn render_table(rows: &[SelfTestRow]) -> String {
    let width = rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>6}  {:>12}  {:>9}  result", "check", "cases", "max error", "tol");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>12.3e}  {:>9.1e}  {}",
            r.check,
            r.cases,
            r.max_abs_error,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}
