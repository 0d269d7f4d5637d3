//! Dense clip tensors and the handful of forward primitives the encoder and
//! decoder networks are assembled from.
//!
//! Everything here is `f32`, row-major in `(frame, channel, row, col)` order,
//! and pure: no op mutates its inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("invalid dimensions {0:?}: every axis must be at least 1")]
    InvalidDims([usize; 4]),
    #[error("data length {actual} does not match dimensions (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("height and width must be even, got {height}x{width}")]
    OddSpatial { height: usize, width: usize },
    #[error("missing weight entry `{0}`")]
    MissingWeight(String),
    #[error("weight entry `{name}` has shape {actual:?}, expected {expected:?}")]
    WeightShape {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("malformed weight file: {0}")]
    WeightFormat(String),
}

/// Shape of a clip: frames, channels, height, width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipDims {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ClipDims {
    pub const fn new(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            frames,
            channels,
            height,
            width,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.pixels()
    }

    pub fn len(&self) -> usize {
        self.frames * self.frame_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.frames == 0 || self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(TensorError::InvalidDims(self.as_array()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.frames, self.channels, self.height, self.width]
    }
}

impl std::fmt::Display for ClipDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.frames, self.channels, self.height, self.width
        )
    }
}

/// F×C×H×W clip. Also used for any 4-D activation (n×c×h×w) inside the
/// networks, where the leading axis doubles as the temporal axis for 3-D ops.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    dims: ClipDims,
    data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Avg,
    Max,
}

impl VideoTensor {
    pub fn new(dims: ClipDims, data: Vec<f32>) -> Result<Self, TensorError> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(TensorError::LengthMismatch {
                expected: dims.len(),
                actual: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(idx));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: ClipDims) -> Result<Self, TensorError> {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: ClipDims, value: f32) -> Result<Self, TensorError> {
        dims.validate()?;
        Ok(Self {
            dims,
            data: vec![value; dims.len()],
        })
    }

    /// Build from a closure over `(frame, channel, row, col)`.
    pub fn from_fn(
        dims: ClipDims,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self, TensorError> {
        dims.validate()?;
        let mut data = Vec::with_capacity(dims.len());
        for fr in 0..dims.frames {
            for c in 0..dims.channels {
                for h in 0..dims.height {
                    for w in 0..dims.width {
                        data.push(f(fr, c, h, w));
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    // Internal constructor for op outputs whose shape is correct by construction.
    fn from_parts(dims: ClipDims, data: Vec<f32>) -> Self {
        debug_assert_eq!(dims.len(), data.len());
        Self { dims, data }
    }

    pub fn dims(&self) -> ClipDims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, f: usize, c: usize, h: usize, w: usize) -> usize {
        let d = &self.dims;
        ((f * d.channels + c) * d.height + h) * d.width + w
    }

    #[inline]
    pub fn get(&self, f: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.index(f, c, h, w)]
    }

    pub fn set(&mut self, f: usize, c: usize, h: usize, w: usize, value: f32) {
        let idx = self.index(f, c, h, w);
        self.data[idx] = value;
    }

    /// Contiguous C·H·W slice of one frame.
    pub fn frame(&self, f: usize) -> &[f32] {
        let len = self.dims.frame_len();
        &self.data[f * len..(f + 1) * len]
    }

    /// New tensor made of the listed frames, in the order given.
    pub fn gather_frames(&self, indices: &[usize]) -> Result<Self, TensorError> {
        if indices.is_empty() {
            return Err(TensorError::ShapeMismatch {
                op: "gather_frames",
                detail: "no frames requested".into(),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * self.dims.frame_len());
        for &i in indices {
            if i >= self.dims.frames {
                return Err(TensorError::ShapeMismatch {
                    op: "gather_frames",
                    detail: format!("frame {i} out of range for {} frames", self.dims.frames),
                });
            }
            data.extend_from_slice(self.frame(i));
        }
        let dims = ClipDims {
            frames: indices.len(),
            ..self.dims
        };
        Ok(Self::from_parts(dims, data))
    }

    /// Concatenate along the channel axis. Frame count and spatial size must agree.
    pub fn concat_channels(parts: &[&VideoTensor]) -> Result<Self, TensorError> {
        let first = parts.first().ok_or_else(|| TensorError::ShapeMismatch {
            op: "concat_channels",
            detail: "no inputs".into(),
        })?;
        let base = first.dims;
        for p in parts {
            let d = p.dims;
            if d.frames != base.frames || d.height != base.height || d.width != base.width {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    detail: format!("{d} incompatible with {base}"),
                });
            }
        }
        let channels = parts.iter().map(|p| p.dims.channels).sum();
        let dims = ClipDims { channels, ..base };
        let mut data = Vec::with_capacity(dims.len());
        for f in 0..base.frames {
            for p in parts {
                data.extend_from_slice(p.frame(f));
            }
        }
        Ok(Self::from_parts(dims, data))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self::from_parts(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn add(&self, other: &VideoTensor) -> Result<Self, TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                detail: format!("{} vs {}", self.dims, other.dims),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::from_parts(self.dims, data))
    }

    pub fn relu(&self) -> Self {
        self.map(|v| v.max(0.0))
    }
}

pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn reduce(values: &[f32], mode: PoolMode) -> f32 {
    match mode {
        PoolMode::Avg => {
            // f64 accumulation keeps large frames (224×224×3) accurate.
            let sum: f64 = values.iter().map(|&v| v as f64).sum();
            (sum / values.len() as f64) as f32
        }
        PoolMode::Max => values.iter().copied().fold(f32::NEG_INFINITY, f32::max),
    }
}

/// One scalar per frame, pooled over every channel and pixel of that frame.
pub fn pool_frames(x: &VideoTensor, mode: PoolMode) -> Vec<f32> {
    (0..x.dims.frames)
        .map(|f| reduce(x.frame(f), mode))
        .collect()
}

/// Collapse the channel axis: output is F×1×H×W.
pub fn pool_channels(x: &VideoTensor, mode: PoolMode) -> VideoTensor {
    let d = x.dims;
    let px = d.pixels();
    let mut out = Vec::with_capacity(d.frames * px);
    let mut column = vec![0.0f32; d.channels];
    for f in 0..d.frames {
        let frame = x.frame(f);
        for p in 0..px {
            for (c, slot) in column.iter_mut().enumerate() {
                *slot = frame[c * px + p];
            }
            out.push(reduce(&column, mode));
        }
    }
    VideoTensor::from_parts(ClipDims { channels: 1, ..d }, out)
}

/// 2×2 average pooling over each frame and channel.
pub fn downsample2x(x: &VideoTensor) -> Result<VideoTensor, TensorError> {
    let d = x.dims;
    if !d.height.is_multiple_of(2) || !d.width.is_multiple_of(2) {
        return Err(TensorError::OddSpatial {
            height: d.height,
            width: d.width,
        });
    }
    let out_dims = ClipDims {
        height: d.height / 2,
        width: d.width / 2,
        ..d
    };
    let mut out = Vec::with_capacity(out_dims.len());
    for f in 0..d.frames {
        for c in 0..d.channels {
            for h in 0..out_dims.height {
                for w in 0..out_dims.width {
                    let s = x.get(f, c, 2 * h, 2 * w)
                        + x.get(f, c, 2 * h, 2 * w + 1)
                        + x.get(f, c, 2 * h + 1, 2 * w)
                        + x.get(f, c, 2 * h + 1, 2 * w + 1);
                    out.push(s * 0.25);
                }
            }
        }
    }
    Ok(VideoTensor::from_parts(out_dims, out))
}

/// Nearest-neighbour resize of the (frame, row, col) axes to `target`.
/// Channels are kept. Used by the decoder half of the 3-D branch.
pub fn resize_nearest(
    x: &VideoTensor,
    frames: usize,
    height: usize,
    width: usize,
) -> Result<VideoTensor, TensorError> {
    let d = x.dims;
    let out_dims = ClipDims {
        frames,
        channels: d.channels,
        height,
        width,
    };
    out_dims.validate()?;
    let mut out = Vec::with_capacity(out_dims.len());
    for f in 0..frames {
        let sf = f * d.frames / frames;
        for c in 0..d.channels {
            for h in 0..height {
                let sh = h * d.height / height;
                for w in 0..width {
                    let sw = w * d.width / width;
                    out.push(x.get(sf, c, sh, sw));
                }
            }
        }
    }
    Ok(VideoTensor::from_parts(out_dims, out))
}

/// Fully connected layer: `out = weight · v + bias`, weight is out×in row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn new(
        in_features: usize,
        out_features: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self, TensorError> {
        if weight.len() != in_features * out_features || bias.len() != out_features {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                detail: format!(
                    "weight {} / bias {} for {in_features}->{out_features}",
                    weight.len(),
                    bias.len()
                ),
            });
        }
        Ok(Self {
            in_features,
            out_features,
            weight,
            bias,
        })
    }

    pub fn forward(&self, v: &[f32]) -> Result<Vec<f32>, TensorError> {
        if v.len() != self.in_features {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                detail: format!("input length {} != {}", v.len(), self.in_features),
            });
        }
        Ok(self
            .weight
            .chunks_exact(self.in_features)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(v).map(|(w, x)| w * x).sum::<f32>() + b)
            .collect())
    }
}

/// Two-layer bottleneck perceptron `W2·relu(W1·v + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn new(hidden: Linear, output: Linear) -> Result<Self, TensorError> {
        if hidden.out_features != output.in_features || output.out_features != hidden.in_features
        {
            return Err(TensorError::ShapeMismatch {
                op: "mlp",
                detail: format!(
                    "layers {}->{} and {}->{} do not chain back to the input width",
                    hidden.in_features,
                    hidden.out_features,
                    output.in_features,
                    output.out_features
                ),
            });
        }
        Ok(Self { hidden, output })
    }

    pub fn width(&self) -> usize {
        self.hidden.in_features
    }

    pub fn forward(&self, v: &[f32]) -> Result<Vec<f32>, TensorError> {
        let h: Vec<f32> = self
            .hidden
            .forward(v)?
            .into_iter()
            .map(|x| x.max(0.0))
            .collect();
        self.output.forward(&h)
    }
}

/// Hidden width of the frame-attention bottleneck (reduction ratio 2).
pub fn mlp_hidden_width(frames: usize) -> usize {
    (frames / 2).max(1)
}

/// Square 2-D convolution kernel, `c_out×c_in×k×k`, stride 1, zero padding k/2.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self, TensorError> {
        if k.is_multiple_of(2) {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                detail: format!("kernel size {k} must be odd"),
            });
        }
        if weight.len() != c_out * c_in * k * k || bias.len() != c_out {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                detail: format!(
                    "weight {} / bias {} for {c_out}x{c_in}x{k}x{k}",
                    weight.len(),
                    bias.len()
                ),
            });
        }
        Ok(Self {
            c_in,
            c_out,
            k,
            weight,
            bias,
        })
    }

    pub fn forward(&self, x: &VideoTensor) -> Result<VideoTensor, TensorError> {
        conv2d_forward(x, self, self.k / 2)
    }
}

/// Cross-correlation of every n×c_in×H×W slice with zero padding `pad`.
pub fn conv2d_forward(
    x: &VideoTensor,
    conv: &Conv2d,
    pad: usize,
) -> Result<VideoTensor, TensorError> {
    let d = x.dims;
    if d.channels != conv.c_in {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("input has {} channels, kernel expects {}", d.channels, conv.c_in),
        });
    }
    let k = conv.k;
    if d.height + 2 * pad < k || d.width + 2 * pad < k {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            detail: format!("kernel {k} larger than padded input {}x{}", d.height, d.width),
        });
    }
    let oh = d.height + 2 * pad - k + 1;
    let ow = d.width + 2 * pad - k + 1;
    let out_dims = ClipDims::new(d.frames, conv.c_out, oh, ow);
    let mut out = vec![0.0f32; out_dims.len()];
    let (ih, iw) = (d.height as isize, d.width as isize);
    for n in 0..d.frames {
        for co in 0..conv.c_out {
            let plane = &mut out[((n * conv.c_out + co) * oh) * ow..((n * conv.c_out + co) + 1) * oh * ow];
            plane.fill(conv.bias[co]);
            for ci in 0..conv.c_in {
                let src = &x.data[(n * d.channels + ci) * d.height * d.width..][..d.height * d.width];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = conv.weight[((co * conv.c_in + ci) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for y in 0..oh {
                            let sy = y as isize + ky as isize - pad as isize;
                            if sy < 0 || sy >= ih {
                                continue;
                            }
                            let row = &src[sy as usize * d.width..][..d.width];
                            let dst = &mut plane[y * ow..][..ow];
                            for (xo, slot) in dst.iter_mut().enumerate() {
                                let sx = xo as isize + kx as isize - pad as isize;
                                if sx >= 0 && sx < iw {
                                    *slot += wv * row[sx as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(VideoTensor::from_parts(out_dims, out))
}

/// Cubic 3-D kernel `c_out×c_in×k×k×k` over (time, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv3d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self, TensorError> {
        if weight.len() != c_out * c_in * k * k * k || bias.len() != c_out {
            return Err(TensorError::ShapeMismatch {
                op: "conv3d",
                detail: format!(
                    "weight {} / bias {} for {c_out}x{c_in}x{k}x{k}x{k}",
                    weight.len(),
                    bias.len()
                ),
            });
        }
        Ok(Self {
            c_in,
            c_out,
            k,
            weight,
            bias,
        })
    }
}

fn conv_out_len(n: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    (n + 2 * pad).checked_sub(k).map(|v| v / stride + 1)
}

/// 3-D cross-correlation. The tensor's frame axis is the temporal axis and its
/// channel axis holds features; output length per axis is ⌊(n+2p−k)/s⌋+1.
pub fn conv3d_forward(
    x: &VideoTensor,
    conv: &Conv3d,
    stride: usize,
    pad: usize,
) -> Result<VideoTensor, TensorError> {
    let d = x.dims;
    if d.channels != conv.c_in {
        return Err(TensorError::ShapeMismatch {
            op: "conv3d",
            detail: format!("input has {} channels, kernel expects {}", d.channels, conv.c_in),
        });
    }
    if stride == 0 {
        return Err(TensorError::ShapeMismatch {
            op: "conv3d",
            detail: "stride must be positive".into(),
        });
    }
    let k = conv.k;
    let too_small = || TensorError::ShapeMismatch {
        op: "conv3d",
        detail: format!("kernel {k} larger than padded input {d}"),
    };
    let of = conv_out_len(d.frames, k, stride, pad).ok_or_else(too_small)?;
    let oh = conv_out_len(d.height, k, stride, pad).ok_or_else(too_small)?;
    let ow = conv_out_len(d.width, k, stride, pad).ok_or_else(too_small)?;
    let out_dims = ClipDims::new(of, conv.c_out, oh, ow);
    let mut out = Vec::with_capacity(out_dims.len());
    let p = pad as isize;
    for t in 0..of {
        for co in 0..conv.c_out {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = conv.bias[co];
                    for ci in 0..conv.c_in {
                        for kt in 0..k {
                            let st = (t * stride + kt) as isize - p;
                            if st < 0 || st >= d.frames as isize {
                                continue;
                            }
                            for ky in 0..k {
                                let sy = (y * stride + ky) as isize - p;
                                if sy < 0 || sy >= d.height as isize {
                                    continue;
                                }
                                for kx in 0..k {
                                    let sx = (xo * stride + kx) as isize - p;
                                    if sx < 0 || sx >= d.width as isize {
                                        continue;
                                    }
                                    let wv = conv.weight
                                        [(((co * conv.c_in + ci) * k + kt) * k + ky) * k + kx];
                                    acc += wv * x.get(st as usize, ci, sy as usize, sx as usize);
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    Ok(VideoTensor::from_parts(out_dims, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: ClipDims, seed: u64) -> VideoTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VideoTensor::from_fn(dims, |_, _, _, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        let d = ClipDims::new(1, 1, 2, 2);
        assert!(matches!(
            VideoTensor::new(d, vec![0.0; 3]),
            Err(TensorError::LengthMismatch { .. })
        ));
        assert!(matches!(
            VideoTensor::new(d, vec![0.0, f32::NAN, 0.0, 0.0]),
            Err(TensorError::NonFinite(1))
        ));
        assert!(matches!(
            VideoTensor::zeros(ClipDims::new(0, 1, 2, 2)),
            Err(TensorError::InvalidDims(_))
        ));
    }

    #[test]
    fn pool_frames_constant_inputs() {
        let ones = VideoTensor::filled(ClipDims::new(2, 3, 4, 4), 1.0).unwrap();
        assert_eq!(pool_frames(&ones, PoolMode::Avg), vec![1.0, 1.0]);

        let two = VideoTensor::from_fn(ClipDims::new(2, 3, 4, 4), |f, _, _, _| 2.0 * f as f32)
            .unwrap();
        assert_eq!(pool_frames(&two, PoolMode::Max), vec![0.0, 2.0]);
    }

    #[test]
    fn pool_frames_matches_direct_summation() {
        let x = random_tensor(ClipDims::new(4, 3, 8, 8), 7);
        let avg = pool_frames(&x, PoolMode::Avg);
        let max = pool_frames(&x, PoolMode::Max);
        for f in 0..4 {
            let mut sum = 0.0f64;
            let mut hi = f32::NEG_INFINITY;
            for c in 0..3 {
                for h in 0..8 {
                    for w in 0..8 {
                        let v = x.get(f, c, h, w);
                        sum += v as f64;
                        hi = hi.max(v);
                    }
                }
            }
            assert!((avg[f] as f64 - sum / 192.0).abs() < 1e-6);
            assert_eq!(max[f], hi);
        }
    }

    #[test]
    fn pool_channels_examples() {
        let x = VideoTensor::new(ClipDims::new(1, 3, 1, 1), vec![0.0, 0.3, 0.6]).unwrap();
        let avg = pool_channels(&x, PoolMode::Avg);
        assert!((avg.data()[0] - 0.3).abs() < 1e-7);
        let y = VideoTensor::new(ClipDims::new(1, 3, 1, 1), vec![0.1, 0.9, 0.5]).unwrap();
        assert_eq!(pool_channels(&y, PoolMode::Max).data(), &[0.9]);

        let r = random_tensor(ClipDims::new(2, 3, 4, 4), 3);
        let p = pool_channels(&r, PoolMode::Avg);
        assert_eq!(p.dims(), ClipDims::new(2, 1, 4, 4));
        for f in 0..2 {
            for h in 0..4 {
                for w in 0..4 {
                    let m = (0..3).map(|c| r.get(f, c, h, w) as f64).sum::<f64>() / 3.0;
                    assert!((p.get(f, 0, h, w) as f64 - m).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn mlp_zero_and_identity() {
        let zero = Mlp::new(
            Linear::new(4, 2, vec![0.3; 8], vec![0.0; 2]).unwrap(),
            Linear::new(2, 4, vec![0.0; 8], vec![0.0; 4]).unwrap(),
        )
        .unwrap();
        assert_eq!(zero.forward(&[0.0; 4]).unwrap(), vec![0.0; 4]);

        let eye = |n: usize| {
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                w[i * n + i] = 1.0;
            }
            w
        };
        let id = Mlp::new(
            Linear::new(3, 3, eye(3), vec![0.0; 3]).unwrap(),
            Linear::new(3, 3, eye(3), vec![0.0; 3]).unwrap(),
        )
        .unwrap();
        assert_eq!(id.forward(&[0.5, 0.0, 2.0]).unwrap(), vec![0.5, 0.0, 2.0]);
        assert!(matches!(
            id.forward(&[1.0, 2.0]),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn mlp_matches_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut r = |n: usize| (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>();
        let (w1, b1, w2, b2, v) = (r(8 * 16), r(8), r(16 * 8), r(16), r(16));
        let mlp = Mlp::new(
            Linear::new(16, 8, w1.clone(), b1.clone()).unwrap(),
            Linear::new(8, 16, w2.clone(), b2.clone()).unwrap(),
        )
        .unwrap();
        let got = mlp.forward(&v).unwrap();
        // f64 reference
        let mut hidden = [0.0f64; 8];
        for i in 0..8 {
            let mut s = b1[i] as f64;
            for j in 0..16 {
                s += w1[i * 16 + j] as f64 * v[j] as f64;
            }
            hidden[i] = s.max(0.0);
        }
        for i in 0..16 {
            let mut s = b2[i] as f64;
            for j in 0..8 {
                s += w2[i * 8 + j] as f64 * hidden[j];
            }
            assert!((got[i] as f64 - s).abs() < 1e-5, "{i}: {} vs {s}", got[i]);
        }
    }

    #[test]
    fn conv2d_identity_is_bit_exact() {
        let x = random_tensor(ClipDims::new(2, 3, 5, 6), 5);
        let mut w = vec![0.0; 3 * 3];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let conv = Conv2d::new(3, 3, 1, w, vec![0.0; 3]).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv2d_zero_and_box() {
        let x = random_tensor(ClipDims::new(1, 2, 4, 4), 9);
        let zero = Conv2d::new(2, 1, 3, vec![0.0; 18], vec![0.0]).unwrap();
        assert!(zero.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));

        let mut impulse = VideoTensor::zeros(ClipDims::new(1, 1, 7, 7)).unwrap();
        impulse.set(0, 0, 3, 3, 1.0);
        let boxk = Conv2d::new(1, 1, 3, vec![1.0 / 9.0; 9], vec![0.0]).unwrap();
        let y = boxk.forward(&impulse).unwrap();
        for h in 0..7 {
            for w in 0..7 {
                let expect = if (2..=4).contains(&h) && (2..=4).contains(&w) {
                    1.0 / 9.0
                } else {
                    0.0
                };
                assert_eq!(y.get(0, 0, h, w), expect, "({h},{w})");
            }
        }
        assert!(matches!(
            boxk.forward(&x),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn conv3d_identity_zero_and_average() {
        let x = random_tensor(ClipDims::new(3, 2, 4, 4), 1);
        let id = Conv3d::new(2, 2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(conv3d_forward(&x, &id, 1, 0).unwrap().data(), x.data());

        let zero = Conv3d::new(2, 4, 3, vec![0.0; 4 * 2 * 27], vec![0.0; 4]).unwrap();
        let z = conv3d_forward(&x, &zero, 2, 1).unwrap();
        assert_eq!(z.dims(), ClipDims::new(2, 4, 2, 2));
        assert!(z.data().iter().all(|&v| v == 0.0));

        let c = VideoTensor::filled(ClipDims::new(5, 1, 5, 5), 0.75).unwrap();
        let avg = Conv3d::new(1, 1, 3, vec![1.0 / 27.0; 27], vec![0.0]).unwrap();
        let y = conv3d_forward(&c, &avg, 1, 0).unwrap();
        assert_eq!(y.dims(), ClipDims::new(3, 1, 3, 3));
        for &v in y.data() {
            assert!((v - 0.75).abs() < 1e-6);
        }
    }

    #[test]
    fn conv3d_output_sizes() {
        for n in 1..10 {
            let x = VideoTensor::zeros(ClipDims::new(n, 1, n + 1, n + 2)).unwrap();
            let k = Conv3d::new(1, 1, 3, vec![0.0; 27], vec![0.0]).unwrap();
            let y = conv3d_forward(&x, &k, 2, 1).unwrap();
            assert_eq!(y.dims().frames, (n + 2 - 3) / 2 + 1);
            assert_eq!(y.dims().height, (n + 1 + 2 - 3) / 2 + 1);
            assert_eq!(y.dims().width, (n + 2 + 2 - 3) / 2 + 1);
        }
    }

    #[test]
    fn downsample_examples() {
        let c = VideoTensor::filled(ClipDims::new(2, 3, 4, 6), 1.5).unwrap();
        let d = downsample2x(&c).unwrap();
        assert_eq!(d.dims(), ClipDims::new(2, 3, 2, 3));
        assert!(d.data().iter().all(|&v| v == 1.5));

        let b = VideoTensor::new(ClipDims::new(1, 1, 2, 2), vec![0.0, 0.0, 4.0, 4.0]).unwrap();
        assert_eq!(downsample2x(&b).unwrap().data(), &[2.0]);

        let r = random_tensor(ClipDims::new(1, 1, 4, 4), 2);
        let rd = downsample2x(&r).unwrap();
        for h in 0..2 {
            for w in 0..2 {
                let m = (r.get(0, 0, 2 * h, 2 * w) as f64
                    + r.get(0, 0, 2 * h, 2 * w + 1) as f64
                    + r.get(0, 0, 2 * h + 1, 2 * w) as f64
                    + r.get(0, 0, 2 * h + 1, 2 * w + 1) as f64)
                    / 4.0;
                assert!((rd.get(0, 0, h, w) as f64 - m).abs() < 1e-6);
            }
        }
        let odd = VideoTensor::zeros(ClipDims::new(1, 1, 3, 4)).unwrap();
        assert!(matches!(
            downsample2x(&odd),
            Err(TensorError::OddSpatial { .. })
        ));
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [-5.0f32, -0.3, 0.7, 3.0] {
            assert!((sigmoid(x) - (1.0 - sigmoid(-x))).abs() < 1e-7);
        }
        // 1/(1+e^-2) to 7 digits
        assert!((sigmoid(2.0) as f64 - 0.880_797_077_977_882_3).abs() < 1e-6);
    }

    #[test]
    fn forward_ops_are_deterministic() {
        let x = random_tensor(ClipDims::new(3, 2, 6, 6), 4);
        let k = Conv3d::new(2, 3, 3, (0..162).map(|i| (i as f32).sin()).collect(), vec![0.1; 3])
            .unwrap();
        let a = conv3d_forward(&x, &k, 2, 1).unwrap();
        let b = conv3d_forward(&x, &k, 2, 1).unwrap();
        assert_eq!(a, b);
    }
}
