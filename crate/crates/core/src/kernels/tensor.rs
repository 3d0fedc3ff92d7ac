use crate::error::{Error, Result};

/// Dense `channels x height x width` array of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "tensor shape ({channels}, {height}, {width}) has a zero dimension"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "tensor shape ({channels}, {height}, {width}) needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor values must be finite"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Stacks along the channel axis.
    pub fn concat_channels(&self, other: &Tensor) -> Result<Tensor> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::invalid("concatenated tensors differ in spatial size"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Tensor::new(self.channels + other.channels, self.height, self.width, data)
    }

    pub(crate) fn from_raw_unchecked(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(data.len(), channels * height * width);
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }
}

/// Weights of a square 2-D convolution, laid out `[out][in][ky][kx]`.
///
/// With `depthwise` set, `in_channels` is 1 and output channel `o` reads only
/// input channel `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub depthwise: bool,
    pub data: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl ConvWeights {
    pub fn new(out_channels: usize, in_channels: usize, kernel: usize, data: Vec<f64>) -> Result<Self> {
        let w = Self {
            out_channels,
            in_channels,
            kernel,
            depthwise: false,
            data,
            bias: None,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn depthwise(channels: usize, kernel: usize, data: Vec<f64>) -> Result<Self> {
        let w = Self {
            out_channels: channels,
            in_channels: 1,
            kernel,
            depthwise: true,
            data,
            bias: None,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Result<Self> {
        self.bias = Some(bias);
        self.validate()?;
        Ok(self)
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel,
            depthwise: false,
            data: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.in_channels == 0 {
            return Err(Error::invalid("convolution needs at least one channel"));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size {} must be odd", self.kernel)));
        }
        let n = self.out_channels * self.in_channels * self.kernel * self.kernel;
        if self.data.len() != n {
            return Err(Error::invalid(format!(
                "convolution weights need {n} values, got {}",
                self.data.len()
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_channels {
                return Err(Error::invalid(format!(
                    "bias needs {} values, got {}",
                    self.out_channels,
                    b.len()
                )));
            }
        }
        if self.data.iter().chain(self.bias.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.data[((o * self.in_channels + i) * self.kernel + ky) * self.kernel + kx]
    }

    /// Expected number of input channels of the tensor this convolution consumes.
    pub fn input_channels(&self) -> usize {
        if self.depthwise {
            self.out_channels
        } else {
            self.in_channels
        }
    }
}

/// Stride-1 "same" convolution with zero padding.
pub fn conv2d(x: &Tensor, w: &ConvWeights) -> Result<Tensor> {
    let (c, h, wd) = x.shape();
    if w.input_channels() != c {
        return Err(Error::invalid(format!(
            "convolution expects {} input channels, tensor has {c}",
            w.input_channels()
        )));
    }
    let r = (w.kernel / 2) as isize;
    let mut out = vec![0.0; w.out_channels * h * wd];
    for o in 0..w.out_channels {
        let plane = &mut out[o * h * wd..(o + 1) * h * wd];
        if let Some(b) = &w.bias {
            plane.iter_mut().for_each(|v| *v = b[o]);
        }
        let inputs: Box<dyn Iterator<Item = (usize, usize)>> = if w.depthwise {
            Box::new(std::iter::once((0, o)))
        } else {
            Box::new((0..c).map(|i| (i, i)))
        };
        for (wi, xi) in inputs {
            let src = x.channel(xi);
            for ky in 0..w.kernel {
                let dy = ky as isize - r;
                for kx in 0..w.kernel {
                    let dx = kx as isize - r;
                    let k = w.get(o, wi, ky, kx);
                    if k == 0.0 {
                        continue;
                    }
                    let y_lo = (-dy).max(0) as usize;
                    let y_hi = (h as isize - dy).min(h as isize).max(0) as usize;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (wd as isize - dx).min(wd as isize).max(0) as usize;
                    for y in y_lo..y_hi {
                        let sy = (y as isize + dy) as usize;
                        let srow = &src[sy * wd..(sy + 1) * wd];
                        let orow = &mut plane[y * wd..(y + 1) * wd];
                        for xx in x_lo..x_hi {
                            orow[xx] += k * srow[(xx as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_raw_unchecked(w.out_channels, h, wd, out))
}

pub fn relu_in_place(t: &mut Tensor) {
    t.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}
