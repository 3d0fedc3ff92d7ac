use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operator whose weight count is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpSpec {
    StandardConv3x3 { c_in: usize, c_out: usize },
    Ghost { c_in: usize, c_out: usize },
    Carafe { channels: usize, c_m: usize, k_encoder: usize, sigma: usize, k_up: usize },
    Eca,
}

/// Weight count without biases; `with_bias` adds one per output channel of
/// every convolution stage (ECA's 1-D convolution has none).
pub fn count_params(op: OpSpec, with_bias: bool) -> Result<u64> {
    let b = |n: usize| if with_bias { n as u64 } else { 0 };
    match op {
        OpSpec::StandardConv3x3 { c_in, c_out } => Ok(9 * c_in as u64 * c_out as u64 + b(c_out)),
        OpSpec::Ghost { c_in, c_out } => {
            if c_out % 2 != 0 {
                return Err(Error::invalid(format!("ghost output channels must be even, got {c_out}")));
            }
            let h = (c_out / 2) as u64;
            Ok(c_in as u64 * h + 9 * h + 2 * b(c_out / 2))
        }
        OpSpec::Carafe { channels, c_m, k_encoder, sigma, k_up } => {
            let enc_out = sigma * sigma * k_up * k_up;
            Ok((channels * c_m) as u64 + (k_encoder * k_encoder * c_m * enc_out) as u64 + b(c_m) + b(enc_out))
        }
        OpSpec::Eca => Ok(3),
    }
}
