//! Straightforward per-output-element loops used as oracles for the
//! operators in this module. Everything here works on flat slices and
//! recomputes each output from scratch with explicit bounds checks.

fn at(x: &[f64], h: usize, w: usize, c: usize, y: isize, xx: isize) -> f64 {
    if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
        0.0
    } else {
        x[c * h * w + y as usize * w + xx as usize]
    }
}

/// Zero-padded stride-1 convolution. `weights` is `[out][in][k][k]`
/// (`in == 1` when `depthwise`).
#[allow(clippy::too_many_arguments)]
pub fn conv(
    x: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    out_ch: usize,
    k: usize,
    depthwise: bool,
) -> Vec<f64> {
    let r = (k / 2) as isize;
    let in_ch = if depthwise { 1 } else { channels };
    let mut out = Vec::with_capacity(out_ch * h * w);
    for o in 0..out_ch {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for i in 0..in_ch {
                    let src_c = if depthwise { o } else { i };
                    for ky in 0..k {
                        for kx in 0..k {
                            let wt = weights[o * in_ch * k * k + i * k * k + ky * k + kx];
                            acc += wt * at(x, h, w, src_c, y as isize + ky as isize - r, xx as isize + kx as isize - r);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Kernel prediction, returned as `[ty][tx][k_up^2]`.
#[allow(clippy::too_many_arguments)]
pub fn carafe_kernels(
    x: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    compressor: &[f64],
    encoder: &[f64],
    c_m: usize,
    k_encoder: usize,
    sigma: usize,
    k_up: usize,
    softmax: bool,
) -> Vec<f64> {
    let kk = k_up * k_up;
    let comp = conv(x, channels, h, w, compressor, c_m, 1, false);
    let enc = conv(&comp, c_m, h, w, encoder, sigma * sigma * kk, k_encoder, false);
    let (oh, ow) = (h * sigma, w * sigma);
    let mut out = Vec::with_capacity(oh * ow * kk);
    for ty in 0..oh {
        for tx in 0..ow {
            let raw: Vec<f64> = (0..kk)
                .map(|kidx| {
                    let ch = kidx * sigma * sigma + (ty % sigma) * sigma + tx % sigma;
                    enc[ch * h * w + (ty / sigma) * w + tx / sigma]
                })
                .collect();
            if softmax {
                let denom: f64 = raw.iter().map(|v| v.exp()).sum();
                out.extend(raw.iter().map(|v| v.exp() / denom));
            } else {
                out.extend(raw.iter().map(|v| 1.0 / (1.0 + (-v).exp())));
            }
        }
    }
    out
}

/// Content-aware reassembly with kernels `[ty][tx][k_up^2]`.
pub fn carafe_reassemble(x: &[f64], channels: usize, h: usize, w: usize, kernels: &[f64], sigma: usize, k_up: usize) -> Vec<f64> {
    let r = (k_up / 2) as isize;
    let (oh, ow) = (h * sigma, w * sigma);
    let mut out = Vec::with_capacity(channels * oh * ow);
    for c in 0..channels {
        for ty in 0..oh {
            for tx in 0..ow {
                let (i, j) = ((ty / sigma) as isize, (tx / sigma) as isize);
                let mut acc = 0.0;
                for n in -r..=r {
                    for m in -r..=r {
                        let kidx = ((n + r) * k_up as isize + (m + r)) as usize;
                        acc += kernels[(ty * ow + tx) * k_up * k_up + kidx] * at(x, h, w, c, i + n, j + m);
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// GhostConv with rectification after both stages.
pub fn ghost(x: &[f64], c_in: usize, h: usize, w: usize, primary: &[f64], cheap: &[f64], c_h: usize) -> Vec<f64> {
    let relu = |v: Vec<f64>| v.into_iter().map(|a| if a > 0.0 { a } else { 0.0 }).collect::<Vec<_>>();
    let p = relu(conv(x, c_in, h, w, primary, c_h, 1, false));
    let q = relu(conv(&p, c_h, h, w, cheap, c_h, 3, true));
    [p, q].concat()
}

pub fn eca(x: &[f64], channels: usize, h: usize, w: usize, kernel: &[f64; 3]) -> Vec<f64> {
    let plane = h * w;
    let mut padded = vec![0.0; channels + 2];
    for c in 0..channels {
        padded[c + 1] = x[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64;
    }
    let mut out = Vec::with_capacity(x.len());
    for c in 0..channels {
        let z = kernel[0] * padded[c] + kernel[1] * padded[c + 1] + kernel[2] * padded[c + 2];
        let s = 1.0 / (1.0 + (-z).exp());
        out.extend(x[c * plane..(c + 1) * plane].iter().map(|v| s * v));
    }
    out
}
