//! Semantic encoder: frame attention, spatial attention and the budgeted
//! hard top-k selection they drive.

use thiserror::Error;

use crate::budget::{BudgetPair, SpatialBudget};
use crate::mask::PixelMask;
use crate::tensor::{
    pool_channels, pool_frames, sigmoid, ClipDims, Conv2d, PoolMode, TensorError, VideoTensor,
};
use crate::weights::WeightBundle;

/// Weight-bundle prefix of the shared frame-attention MLP.
pub const FA_MLP: &str = "fa.mlp";
/// Weight-bundle prefix of the 2→1 channel 3×3 spatial-attention conv.
pub const SA_CONV: &str = "sa.conv";
pub const SA_KERNEL: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("frame budget {alpha_k} is not in 1..={frames}")]
    FrameBudget { alpha_k: usize, frames: usize },
    #[error("spatial budget {budget} keeps no pixels of a {height}x{width} frame")]
    EmptyPixelBudget {
        budget: SpatialBudget,
        height: usize,
        width: usize,
    },
    #[error("attention map does not match the tensor: {0}")]
    MapMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAttentionMap {
    pub scores: Vec<f32>,
}

/// One H×W grid per selected frame, stored as an αk×1×H×W tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAttentionMap {
    pub maps: VideoTensor,
    pub source_frame_indices: Vec<usize>,
}

impl SpatialAttentionMap {
    pub fn grid(&self, i: usize) -> &[f32] {
        self.maps.frame(i)
    }
}

/// What the encoder keeps: which frames, which pixels, and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub frame_indices: Vec<usize>,
    pub k_px: usize,
    pub masks: Vec<PixelMask>,
    /// Frame-major, then channel, then ascending row-major position.
    pub values: Vec<f32>,
}

impl SelectionResult {
    pub fn alpha_k(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn element_count(&self, channels: usize) -> usize {
        self.alpha_k() * channels * self.k_px
    }

    /// Check every structural invariant against the source clip shape.
    pub fn validate(&self, dims: ClipDims) -> Result<(), String> {
        let px = dims.pixels();
        if self.frame_indices.is_empty() {
            return Err("no frames selected".into());
        }
        if self.frame_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err("frame indices not strictly increasing".into());
        }
        if let Some(&last) = self.frame_indices.last() {
            if last >= dims.frames {
                return Err(format!("frame index {last} out of range for {} frames", dims.frames));
            }
        }
        if self.masks.len() != self.frame_indices.len() {
            return Err(format!(
                "{} masks for {} frames",
                self.masks.len(),
                self.frame_indices.len()
            ));
        }
        if self.k_px == 0 || self.k_px > px {
            return Err(format!("k_px {} outside 1..={px}", self.k_px));
        }
        for (i, m) in self.masks.iter().enumerate() {
            if m.len() != px {
                return Err(format!("mask {i} covers {} positions, expected {px}", m.len()));
            }
            if m.count_ones() != self.k_px {
                return Err(format!(
                    "mask {i} has {} bits set, expected {}",
                    m.count_ones(),
                    self.k_px
                ));
            }
        }
        let expected = self.element_count(dims.channels);
        if self.values.len() != expected {
            return Err(format!("{} values, expected {expected}", self.values.len()));
        }
        Ok(())
    }
}

/// `σ(MLP(avgpool(x)) + MLP(maxpool(x)))` with one MLP shared by both branches.
pub fn frame_attention(
    x: &VideoTensor,
    weights: &WeightBundle,
) -> Result<FrameAttentionMap, AttentionError> {
    let mlp = weights.mlp(FA_MLP, x.dims().frames)?;
    let avg = mlp.forward(&pool_frames(x, PoolMode::Avg))?;
    let max = mlp.forward(&pool_frames(x, PoolMode::Max))?;
    let scores = avg
        .iter()
        .zip(&max)
        .map(|(a, m)| sigmoid(a + m))
        .collect();
    Ok(FrameAttentionMap { scores })
}

/// Indices of the `k` largest scores, ties to the lower index, returned ascending.
pub fn top_k_ascending(scores: &[f32], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

pub fn select_frames(
    x: &VideoTensor,
    m_fa: &FrameAttentionMap,
    alpha_k: usize,
) -> Result<(VideoTensor, Vec<usize>), AttentionError> {
    let frames = x.dims().frames;
    if alpha_k == 0 || alpha_k > frames {
        return Err(AttentionError::FrameBudget { alpha_k, frames });
    }
    if m_fa.scores.len() != frames {
        return Err(AttentionError::MapMismatch(format!(
            "{} frame scores for {frames} frames",
            m_fa.scores.len()
        )));
    }
    let indices = top_k_ascending(&m_fa.scores, alpha_k);
    Ok((x.gather_frames(&indices)?, indices))
}

/// Per frame: `σ(conv3x3([avg_c(x); max_c(x)]))`.
pub fn spatial_attention(
    x_sel: &VideoTensor,
    weights: &WeightBundle,
    source_frame_indices: &[usize],
) -> Result<SpatialAttentionMap, AttentionError> {
    let conv: Conv2d = weights.conv2d(SA_CONV, 2, 1, SA_KERNEL)?;
    if source_frame_indices.len() != x_sel.dims().frames {
        return Err(AttentionError::MapMismatch(format!(
            "{} source indices for {} frames",
            source_frame_indices.len(),
            x_sel.dims().frames
        )));
    }
    let avg = pool_channels(x_sel, PoolMode::Avg);
    let max = pool_channels(x_sel, PoolMode::Max);
    let stacked = VideoTensor::concat_channels(&[&avg, &max])?;
    let maps = conv.forward(&stacked)?.map(sigmoid);
    Ok(SpatialAttentionMap {
        maps,
        source_frame_indices: source_frame_indices.to_vec(),
    })
}

pub fn select_pixels(
    x_sel: &VideoTensor,
    m_sa: &SpatialAttentionMap,
    beta_m: SpatialBudget,
    frame_indices: &[usize],
) -> Result<SelectionResult, AttentionError> {
    let d = x_sel.dims();
    let md = m_sa.maps.dims();
    if md.frames != d.frames || md.height != d.height || md.width != d.width || md.channels != 1 {
        return Err(AttentionError::MapMismatch(format!(
            "spatial map {md} for tensor {d}"
        )));
    }
    if frame_indices.len() != d.frames {
        return Err(AttentionError::MapMismatch(format!(
            "{} frame indices for {} frames",
            frame_indices.len(),
            d.frames
        )));
    }
    let k_px = beta_m.pixels(d.height, d.width);
    if k_px == 0 {
        return Err(AttentionError::EmptyPixelBudget {
            budget: beta_m,
            height: d.height,
            width: d.width,
        });
    }
    let px = d.pixels();
    let mut masks = Vec::with_capacity(d.frames);
    let mut values = Vec::with_capacity(d.frames * d.channels * k_px);
    for f in 0..d.frames {
        let positions = top_k_ascending(m_sa.grid(f), k_px);
        let frame = x_sel.frame(f);
        for c in 0..d.channels {
            values.extend(positions.iter().map(|&p| frame[c * px + p]));
        }
        masks.push(PixelMask::from_positions(px, positions));
    }
    Ok(SelectionResult {
        frame_indices: frame_indices.to_vec(),
        k_px,
        masks,
        values,
    })
}

/// Full semantic-encoder pass: frame pruning followed by pixel selection.
#[derive(Debug, Clone)]
pub struct SemanticEncoder<'w> {
    weights: &'w WeightBundle,
    /// Skip the FA module (and its weights) when αk = F.
    pub skip_fa_when_full: bool,
}

impl<'w> SemanticEncoder<'w> {
    pub fn new(weights: &'w WeightBundle) -> Self {
        Self {
            weights,
            skip_fa_when_full: true,
        }
    }

    pub fn encode(
        &self,
        x: &VideoTensor,
        budget: BudgetPair,
    ) -> Result<SelectionResult, AttentionError> {
        let d = x.dims();
        let (x_sel, indices) = if budget.alpha_k == d.frames && self.skip_fa_when_full {
            (x.clone(), (0..d.frames).collect())
        } else {
            let m_fa = frame_attention(x, self.weights)?;
            select_frames(x, &m_fa, budget.alpha_k)?
        };
        if budget.beta_m.is_full() {
            // SA is not run at full spatial budget; every position is kept.
            let px = d.pixels();
            let masks = vec![PixelMask::full(px); indices.len()];
            return Ok(SelectionResult {
                frame_indices: indices,
                k_px: px,
                masks,
                values: x_sel.into_data(),
            });
        }
        let m_sa = spatial_attention(&x_sel, self.weights, &indices)?;
        select_pixels(&x_sel, &m_sa, budget.beta_m, &indices)
    }
}

/// Deterministic random FA/SA parameters for a clip with `frames` frames.
pub fn synthesize_encoder_weights(
    bundle: &mut WeightBundle,
    frames: usize,
    seed: u64,
) -> Result<(), TensorError> {
    use crate::tensor::mlp_hidden_width;
    use crate::weights::WeightSynth;
    let mut synth = WeightSynth::new(seed, 0.5);
    let hidden = mlp_hidden_width(frames);
    synth.layer(bundle, &format!("{FA_MLP}.0"), vec![hidden, frames])?;
    synth.layer(bundle, &format!("{FA_MLP}.1"), vec![frames, hidden])?;
    synth.layer(bundle, SA_CONV, vec![1, 2, SA_KERNEL, SA_KERNEL])
}
