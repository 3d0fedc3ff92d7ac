use super::tensor::{conv2d, relu_in_place, sigmoid, ConvWeights, Tensor};
use crate::error::{Error, Result};

/// GhostConv weights: a 1x1 primary convolution `C_in -> C_h` and a 3x3
/// depthwise "cheap" convolution over its `C_h` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostWeights {
    pub primary: ConvWeights,
    pub cheap: ConvWeights,
    /// Rectify after both stages.
    pub activation: bool,
}

impl GhostWeights {
    pub fn new(primary: ConvWeights, cheap: ConvWeights) -> Result<Self> {
        if primary.depthwise || primary.kernel != 1 {
            return Err(Error::invalid("ghost primary stage must be a dense 1x1 convolution"));
        }
        if !cheap.depthwise || cheap.kernel != 3 || cheap.out_channels != primary.out_channels {
            return Err(Error::invalid(format!(
                "ghost cheap stage must be a 3x3 depthwise convolution over {} channels",
                primary.out_channels
            )));
        }
        Ok(Self {
            primary,
            cheap,
            activation: true,
        })
    }

    pub fn hidden_channels(&self) -> usize {
        self.primary.out_channels
    }
}

/// Primary features concatenated with their cheap depthwise transform,
/// giving `2 * C_h` channels at the input resolution.
pub fn ghost_conv(x: &Tensor, w: &GhostWeights) -> Result<Tensor> {
    let mut primary = conv2d(x, &w.primary)?;
    if w.activation {
        relu_in_place(&mut primary);
    }
    let mut cheap = conv2d(&primary, &w.cheap)?;
    if w.activation {
        relu_in_place(&mut cheap);
    }
    primary.concat_channels(&cheap)
}

/// Per-channel attention weights: spatial means, a zero-padded length-3
/// cross-channel convolution without bias, then a sigmoid.
pub fn eca_attention(x: &Tensor, kernel: &[f64; 3]) -> Vec<f64> {
    let (c, h, w) = x.shape();
    let n = (h * w) as f64;
    let pooled: Vec<f64> = (0..c).map(|ch| x.channel(ch).iter().sum::<f64>() / n).collect();
    (0..c)
        .map(|ch| {
            let mut z = kernel[1] * pooled[ch];
            if ch > 0 {
                z += kernel[0] * pooled[ch - 1];
            }
            if ch + 1 < c {
                z += kernel[2] * pooled[ch + 1];
            }
            sigmoid(z)
        })
        .collect()
}

pub fn eca(x: &Tensor, kernel: &[f64; 3]) -> Tensor {
    let s = eca_attention(x, kernel);
    let (c, h, w) = x.shape();
    let plane = h * w;
    let data = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| v * s[i / plane])
        .collect();
    Tensor::from_raw_unchecked(c, h, w, data)
}

/// Channel attention applied to the concatenated GhostConv output.
pub fn ghost_eca(x: &Tensor, w: &GhostWeights, eca_kernel: &[f64; 3]) -> Result<Tensor> {
    Ok(eca(&ghost_conv(x, w)?, eca_kernel))
}
