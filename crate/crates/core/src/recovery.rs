//! Semantic decoder: scatter received values back into place and fill the
//! pixels that were not transmitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::SelectionResult;
use crate::mask::PixelMask;
use crate::tensor::{
    conv3d_forward, downsample2x, resize_nearest, ClipDims, Conv2d, Conv3d, TensorError,
    VideoTensor,
};
use crate::weights::{WeightBundle, WeightSynth};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("selection does not fit dimensions {dims}: {detail}")]
    DimensionMismatch { dims: ClipDims, detail: String },
    #[error("frame {0} has no available pixels")]
    FullyMaskedFrame(usize),
    #[error("invalid recovery network config: {0}")]
    Config(String),
}

/// Zero-filled αk×C×H×W clip plus the availability mask of each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedClip {
    pub x_m: VideoTensor,
    pub masks: Vec<PixelMask>,
}

impl MaskedClip {
    pub fn dims(&self) -> ClipDims {
        self.x_m.dims()
    }

    /// Mask as an αk×1×H×W tensor of 1.0 (available) and 0.0 (missing).
    pub fn mask_tensor(&self) -> VideoTensor {
        let d = self.dims();
        VideoTensor::from_fn(ClipDims { channels: 1, ..d }, |f, _, h, w| {
            if self.masks[f].get(h * d.width + w) {
                1.0
            } else {
                0.0
            }
        })
        .expect("mask tensor dims come from a valid clip")
    }
}

pub fn zero_fill(sel: &SelectionResult, dims: ClipDims) -> Result<MaskedClip, RecoveryError> {
    sel.validate(dims)
        .map_err(|detail| RecoveryError::DimensionMismatch { dims, detail })?;
    let out_dims = ClipDims {
        frames: sel.alpha_k(),
        ..dims
    };
    let px = dims.pixels();
    let mut x_m = VideoTensor::zeros(out_dims)?.into_data();
    let mut values = sel.values.iter();
    for (f, mask) in sel.masks.iter().enumerate() {
        let positions: Vec<usize> = mask.ones().collect();
        for c in 0..dims.channels {
            let base = (f * dims.channels + c) * px;
            for &p in &positions {
                x_m[base + p] = *values.next().expect("validated value count");
            }
        }
    }
    Ok(MaskedClip {
        x_m: VideoTensor::new(out_dims, x_m)?,
        masks: sel.masks.clone(),
    })
}

/// Copy every available pixel of `mc` over `out`.
fn composite(mc: &MaskedClip, out: &VideoTensor) -> VideoTensor {
    let d = mc.dims();
    let px = d.pixels();
    let mut data = out.data().to_vec();
    for (f, mask) in mc.masks.iter().enumerate() {
        for p in mask.ones() {
            for c in 0..d.channels {
                let i = (f * d.channels + c) * px + p;
                data[i] = mc.x_m.data()[i];
            }
        }
    }
    VideoTensor::new(d, data).expect("composite keeps shape and finiteness")
}

/// Fill each missing pixel from the nearest available pixel of the same
/// frame (Euclidean distance, ties to the lower row-major index).
pub fn interpolate_baseline(mc: &MaskedClip) -> Result<VideoTensor, RecoveryError> {
    let d = mc.dims();
    let (h, w, px) = (d.height, d.width, d.pixels());
    let mut data = mc.x_m.data().to_vec();
    for (f, mask) in mc.masks.iter().enumerate() {
        if mask.count_ones() == 0 {
            return Err(RecoveryError::FullyMaskedFrame(f));
        }
        // Per row: nearest available column to the left (inclusive) and right.
        let mut left = vec![None; px];
        let mut right = vec![None; px];
        for y in 0..h {
            let mut last = None;
            for x in 0..w {
                if mask.get(y * w + x) {
                    last = Some(x);
                }
                left[y * w + x] = last;
            }
            let mut next = None;
            for x in (0..w).rev() {
                if mask.get(y * w + x) {
                    next = Some(x);
                }
                right[y * w + x] = next;
            }
        }
        for y in 0..h {
            for x in 0..w {
                if mask.get(y * w + x) {
                    continue;
                }
                let mut best: Option<(usize, usize)> = None;
                for sy in 0..h {
                    let dy = y.abs_diff(sy);
                    let dy2 = dy * dy;
                    if let Some((d2, _)) = best {
                        if dy2 > d2 {
                            continue;
                        }
                    }
                    let cand = match (left[sy * w + x], right[sy * w + x]) {
                        (Some(l), Some(r)) => {
                            if x - l <= r - x {
                                l
                            } else {
                                r
                            }
                        }
                        (Some(l), None) => l,
                        (None, Some(r)) => r,
                        (None, None) => continue,
                    };
                    let dx = x.abs_diff(cand);
                    let d2 = dy2 + dx * dx;
                    if best.is_none_or(|(bd, _)| d2 < bd) {
                        best = Some((d2, sy * w + cand));
                    }
                }
                let (_, src) = best.expect("frame has an available pixel");
                for c in 0..d.channels {
                    let base = (f * d.channels + c) * px;
                    data[base + y * w + x] = data[base + src];
                }
            }
        }
    }
    Ok(VideoTensor::new(d, data)?)
}

/// Layer widths of the recovery network. Stored in the weight bundle under
/// the `__config__.*` keys so a bundle describes its own architecture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryNetConfig {
    /// Channel count of each stride-2 encoder level of the 3-D branch.
    pub widths3d: Vec<usize>,
    /// Channel count of each 2-D layer; the last must equal the clip channels.
    pub widths2d: Vec<usize>,
    /// 2-D layer indices that receive the two temporal feature maps.
    pub inject: [usize; 2],
}

const CFG_WIDTHS3D: &str = "__config__.widths3d";
const CFG_WIDTHS2D: &str = "__config__.widths2d";
const CFG_INJECT: &str = "__config__.inject";

impl RecoveryNetConfig {
    pub fn for_channels(channels: usize) -> Self {
        Self {
            widths3d: vec![16, 32, 64],
            widths2d: vec![32, 32, 32, channels],
            inject: [0, 2],
        }
    }

    pub fn levels3d(&self) -> usize {
        self.widths3d.len()
    }

    pub fn validate(&self, channels: usize) -> Result<(), RecoveryError> {
        if self.widths3d.is_empty() || self.widths2d.is_empty() {
            return Err(RecoveryError::Config("width lists must be non-empty".into()));
        }
        if self.widths3d.iter().chain(&self.widths2d).any(|&w| w == 0) {
            return Err(RecoveryError::Config("zero-width layer".into()));
        }
        if *self.widths2d.last().unwrap() != channels {
            return Err(RecoveryError::Config(format!(
                "last 2-D layer has {} channels, clip has {channels}",
                self.widths2d.last().unwrap()
            )));
        }
        for &i in &self.inject {
            if i >= self.widths2d.len() {
                return Err(RecoveryError::Config(format!(
                    "injection point {i} beyond {} 2-D layers",
                    self.widths2d.len()
                )));
            }
        }
        if self.inject[0] > self.inject[1] {
            return Err(RecoveryError::Config("injection points out of order".into()));
        }
        Ok(())
    }

    pub fn write_to(&self, bundle: &mut WeightBundle) -> Result<(), TensorError> {
        let as_f32 = |v: &[usize]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        bundle.insert(CFG_WIDTHS3D, vec![self.widths3d.len()], as_f32(&self.widths3d))?;
        bundle.insert(CFG_WIDTHS2D, vec![self.widths2d.len()], as_f32(&self.widths2d))?;
        bundle.insert(CFG_INJECT, vec![2], as_f32(&self.inject))
    }

    /// Config stored in `bundle`, or `None` if the bundle carries none.
    pub fn read_from(bundle: &WeightBundle) -> Result<Option<Self>, RecoveryError> {
        if !bundle.contains(CFG_WIDTHS3D) {
            return Ok(None);
        }
        let read = |key: &str| -> Result<Vec<usize>, RecoveryError> {
            let arr = bundle.get(key)?;
            arr.data
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(RecoveryError::Config(format!("{key} holds non-integer {v}")))
                    }
                })
                .collect()
        };
        let inject = read(CFG_INJECT)?;
        if inject.len() != 2 {
            return Err(RecoveryError::Config(format!(
                "{CFG_INJECT} needs two entries, has {}",
                inject.len()
            )));
        }
        Ok(Some(Self {
            widths3d: read(CFG_WIDTHS3D)?,
            widths2d: read(CFG_WIDTHS2D)?,
            inject: [inject[0], inject[1]],
        }))
    }
}

const K: usize = 3;

/// The feature-recovery network with its parameters resolved.
#[derive(Debug, Clone)]
pub struct FeatureRecovery {
    cfg: RecoveryNetConfig,
    channels: usize,
    enc3d: Vec<Conv3d>,
    dec3d: Vec<Conv3d>,
    out3d: Conv3d,
    inject: [Conv3d; 2],
    conv2d: Vec<Conv2d>,
}

impl FeatureRecovery {
    /// Load from a bundle; uses the bundle's own config when present.
    pub fn from_bundle(bundle: &WeightBundle, channels: usize) -> Result<Self, RecoveryError> {
        let cfg = RecoveryNetConfig::read_from(bundle)?
            .unwrap_or_else(|| RecoveryNetConfig::for_channels(channels));
        Self::with_config(bundle, cfg, channels)
    }

    pub fn with_config(
        bundle: &WeightBundle,
        cfg: RecoveryNetConfig,
        channels: usize,
    ) -> Result<Self, RecoveryError> {
        cfg.validate(channels)?;
        let w3 = &cfg.widths3d;
        let mut enc3d = Vec::with_capacity(w3.len());
        for (i, &out) in w3.iter().enumerate() {
            let inp = if i == 0 { channels + 1 } else { w3[i - 1] };
            enc3d.push(bundle.conv3d(&format!("fr.enc3d.{i}"), inp, out, K)?);
        }
        let mut dec3d = Vec::with_capacity(w3.len() - 1);
        for i in 0..w3.len() - 1 {
            dec3d.push(bundle.conv3d(&format!("fr.dec3d.{i}"), w3[i + 1], w3[i], K)?);
        }
        let out3d = bundle.conv3d("fr.out3d", w3[0], w3[0], K)?;
        let inject = [
            bundle.conv3d("fr.inject.0", w3[0], cfg.widths2d[cfg.inject[0]], K)?,
            bundle.conv3d("fr.inject.1", w3[0], cfg.widths2d[cfg.inject[1]], K)?,
        ];
        let mut conv2d = Vec::with_capacity(cfg.widths2d.len());
        for (j, &out) in cfg.widths2d.iter().enumerate() {
            let inp = if j == 0 {
                channels + 1
            } else {
                cfg.widths2d[j - 1]
            };
            conv2d.push(bundle.conv2d(&format!("fr.conv2d.{j}"), inp, out, K)?);
        }
        Ok(Self {
            cfg,
            channels,
            enc3d,
            dec3d,
            out3d,
            inject,
            conv2d,
        })
    }

    pub fn config(&self) -> &RecoveryNetConfig {
        &self.cfg
    }

    /// Temporal guidance: the two injection feature maps at half resolution.
    fn temporal_features(
        &self,
        mc: &MaskedClip,
        mask: &VideoTensor,
    ) -> Result<[VideoTensor; 2], RecoveryError> {
        let low = VideoTensor::concat_channels(&[&downsample2x(&mc.x_m)?, &downsample2x(mask)?])?;
        let ld = low.dims();

        let mut skips = Vec::with_capacity(self.enc3d.len());
        let mut h = low;
        for conv in &self.enc3d {
            h = conv3d_forward(&h, conv, 2, 1)?.relu();
            skips.push(h.clone());
        }
        // Mirrored decoder: upsample, conv, add the encoder output of that level.
        for (i, conv) in self.dec3d.iter().enumerate().rev() {
            let target = skips[i].dims();
            let up = resize_nearest(&h, target.frames, target.height, target.width)?;
            h = conv3d_forward(&up, conv, 1, 1)?.relu().add(&skips[i])?;
        }
        let up = resize_nearest(&h, ld.frames, ld.height, ld.width)?;
        let features = conv3d_forward(&up, &self.out3d, 1, 1)?.relu();
        let a = conv3d_forward(&features, &self.inject[0], 1, 1)?;
        let b = conv3d_forward(&features, &self.inject[1], 1, 1)?;
        Ok([a, b])
    }

    /// Raw network output before compositing.
    pub fn predict(&self, mc: &MaskedClip) -> Result<VideoTensor, RecoveryError> {
        let d = mc.dims();
        if d.channels != self.channels {
            return Err(RecoveryError::DimensionMismatch {
                dims: d,
                detail: format!("network built for {} channels", self.channels),
            });
        }
        if !d.height.is_multiple_of(2) || !d.width.is_multiple_of(2) {
            return Err(TensorError::OddSpatial {
                height: d.height,
                width: d.width,
            }
            .into());
        }
        let mask = mc.mask_tensor();
        let [ga, gb] = self.temporal_features(mc, &mask)?;
        let ga = resize_nearest(&ga, d.frames, d.height, d.width)?;
        let gb = resize_nearest(&gb, d.frames, d.height, d.width)?;

        // 2-D completion; frames are the batch axis so each is convolved on its own.
        let mut h = VideoTensor::concat_channels(&[&mc.x_m, &mask])?;
        let last = self.conv2d.len() - 1;
        for (j, conv) in self.conv2d.iter().enumerate() {
            h = conv.forward(&h)?;
            if j < last {
                h = h.relu();
            }
            if j == self.cfg.inject[0] {
                h = h.add(&ga)?;
            }
            if j == self.cfg.inject[1] {
                h = h.add(&gb)?;
            }
        }
        Ok(h)
    }

    /// Network output with every transmitted pixel copied back unchanged.
    pub fn forward(&self, mc: &MaskedClip) -> Result<VideoTensor, RecoveryError> {
        let out = self.predict(mc)?;
        Ok(composite(mc, &out))
    }
}

/// Deterministic random recovery-network parameters (plus the config keys).
pub fn synthesize_recovery_weights(
    bundle: &mut WeightBundle,
    cfg: &RecoveryNetConfig,
    channels: usize,
    seed: u64,
) -> Result<(), RecoveryError> {
    cfg.validate(channels)?;
    let mut synth = WeightSynth::new(seed, 0.05);
    let w3 = &cfg.widths3d;
    for (i, &out) in w3.iter().enumerate() {
        let inp = if i == 0 { channels + 1 } else { w3[i - 1] };
        synth.layer(bundle, &format!("fr.enc3d.{i}"), vec![out, inp, K, K, K])?;
    }
    for i in 0..w3.len() - 1 {
        synth.layer(bundle, &format!("fr.dec3d.{i}"), vec![w3[i], w3[i + 1], K, K, K])?;
    }
    synth.layer(bundle, "fr.out3d", vec![w3[0], w3[0], K, K, K])?;
    for (n, &j) in cfg.inject.iter().enumerate() {
        synth.layer(
            bundle,
            &format!("fr.inject.{n}"),
            vec![cfg.widths2d[j], w3[0], K, K, K],
        )?;
    }
    for (j, &out) in cfg.widths2d.iter().enumerate() {
        let inp = if j == 0 { channels + 1 } else { cfg.widths2d[j - 1] };
        synth.layer(bundle, &format!("fr.conv2d.{j}"), vec![out, inp, K, K])?;
    }
    cfg.write_to(bundle)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    /// Feature-recovery network.
    Fr,
    /// Nearest available pixel.
    Interpolate,
    /// Leave missing pixels at zero.
    Zero,
}

pub fn recover(
    mc: &MaskedClip,
    mode: RecoveryMode,
    weights: Option<&WeightBundle>,
) -> Result<VideoTensor, RecoveryError> {
    match mode {
        RecoveryMode::Zero => Ok(mc.x_m.clone()),
        RecoveryMode::Interpolate => interpolate_baseline(mc),
        RecoveryMode::Fr => {
            let weights = weights.ok_or_else(|| {
                RecoveryError::Config("feature recovery needs a weight bundle".into())
            })?;
            FeatureRecovery::from_bundle(weights, mc.dims().channels)?.forward(mc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{select_pixels, SpatialAttentionMap};
    use crate::budget::SpatialBudget;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_selection(dims: ClipDims, alpha_k: usize, beta: f64, seed: u64) -> SelectionResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = ClipDims {
            frames: alpha_k,
            ..dims
        };
        let x = VideoTensor::from_fn(d, |_, _, _, _| rng.gen_range(-1.0..1.0)).unwrap();
        let maps = VideoTensor::from_fn(ClipDims { channels: 1, ..d }, |_, _, _, _| rng.gen())
            .unwrap();
        let idx: Vec<usize> = (0..alpha_k).collect();
        let m = SpatialAttentionMap {
            maps,
            source_frame_indices: idx.clone(),
        };
        select_pixels(&x, &m, SpatialBudget::from_fraction(beta).unwrap(), &idx).unwrap()
    }

    fn small_cfg(channels: usize) -> RecoveryNetConfig {
        RecoveryNetConfig {
            widths3d: vec![4, 6],
            widths2d: vec![5, 5, channels],
            inject: [0, 1],
        }
    }

    #[test]
    fn zero_fill_full_mask_is_identity() {
        let dims = ClipDims::new(2, 3, 4, 4);
        let sel = random_selection(dims, 2, 1.0, 1);
        let mc = zero_fill(&sel, dims).unwrap();
        assert_eq!(mc.x_m.data(), &sel.values[..]);
        assert!(mc.masks.iter().all(|m| m.count_ones() == 16));
    }

    #[test]
    fn zero_fill_single_pixel() {
        let dims = ClipDims::new(1, 3, 2, 2);
        let sel = SelectionResult {
            frame_indices: vec![0],
            k_px: 1,
            masks: vec![PixelMask::from_positions(4, [2])],
            values: vec![0.1, 0.2, 0.3],
        };
        let mc = zero_fill(&sel, dims).unwrap();
        assert_eq!(
            mc.x_m.data(),
            &[0., 0., 0.1, 0., 0., 0., 0.2, 0., 0., 0., 0.3, 0.]
        );
    }

    #[test]
    fn zero_fill_gather_roundtrip() {
        let dims = ClipDims::new(3, 2, 6, 6);
        let sel = random_selection(dims, 3, 0.4, 2);
        let mc = zero_fill(&sel, dims).unwrap();
        let mut gathered = Vec::new();
        for f in 0..3 {
            for c in 0..2 {
                for p in 0..36 {
                    if mc.masks[f].get(p) {
                        gathered.push(mc.x_m.get(f, c, p / 6, p % 6));
                    }
                }
            }
        }
        assert_eq!(gathered, sel.values);
    }

    #[test]
    fn zero_fill_rejects_wrong_dims() {
        let sel = random_selection(ClipDims::new(2, 3, 4, 4), 2, 0.5, 3);
        assert!(matches!(
            zero_fill(&sel, ClipDims::new(2, 1, 4, 4)),
            Err(RecoveryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interpolation_cases() {
        let dims = ClipDims::new(1, 2, 3, 3);
        let sel = SelectionResult {
            frame_indices: vec![0],
            k_px: 1,
            masks: vec![PixelMask::from_positions(9, [4])],
            values: vec![0.5, -2.0],
        };
        let out = interpolate_baseline(&zero_fill(&sel, dims).unwrap()).unwrap();
        assert_eq!(&out.data()[..9], &[0.5; 9]);
        assert_eq!(&out.data()[9..], &[-2.0; 9]);

        let full = random_selection(ClipDims::new(2, 3, 4, 4), 2, 1.0, 4);
        let mc = zero_fill(&full, ClipDims::new(2, 3, 4, 4)).unwrap();
        assert_eq!(interpolate_baseline(&mc).unwrap(), mc.x_m);

        let empty = MaskedClip {
            x_m: VideoTensor::zeros(ClipDims::new(1, 1, 2, 2)).unwrap(),
            masks: vec![PixelMask::empty(4)],
        };
        assert_eq!(
            interpolate_baseline(&empty),
            Err(RecoveryError::FullyMaskedFrame(0))
        );
    }

    #[test]
    fn interpolation_tie_breaks_to_lower_index() {
        // available at (0,1) and (1,0); (0,0) is equidistant -> position 1 wins
        let mc = MaskedClip {
            x_m: VideoTensor::new(ClipDims::new(1, 1, 2, 2), vec![0.0, 1.0, 2.0, 0.0]).unwrap(),
            masks: vec![PixelMask::from_positions(4, [1, 2])],
        };
        let out = interpolate_baseline(&mc).unwrap();
        assert_eq!(out.data(), &[1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn config_roundtrips_through_bundle() {
        let cfg = RecoveryNetConfig::for_channels(3);
        let mut b = WeightBundle::new();
        assert_eq!(RecoveryNetConfig::read_from(&b).unwrap(), None);
        cfg.write_to(&mut b).unwrap();
        assert_eq!(RecoveryNetConfig::read_from(&b).unwrap(), Some(cfg));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(3);
        assert!(cfg.validate(3).is_ok());
        assert!(cfg.validate(2).is_err());
        cfg.inject = [0, 7];
        assert!(cfg.validate(3).is_err());
        cfg.widths3d.clear();
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn zero_network_leaves_zero_fill() {
        let dims = ClipDims::new(2, 3, 8, 8);
        let sel = random_selection(dims, 2, 0.4, 5);
        let mc = zero_fill(&sel, dims).unwrap();
        let cfg = small_cfg(3);
        let mut b = WeightBundle::new();
        synthesize_recovery_weights(&mut b, &cfg, 3, 0).unwrap();
        let names: Vec<String> = b.names().map(String::from).collect();
        for n in names.iter().filter(|n| n.starts_with("fr.")) {
            let shape = b.get(n).unwrap().shape.clone();
            let len = b.get(n).unwrap().data.len();
            b.insert(n.clone(), shape, vec![0.0; len]).unwrap();
        }
        let out = FeatureRecovery::from_bundle(&b, 3).unwrap().forward(&mc).unwrap();
        assert_eq!(out, mc.x_m);
    }

    #[test]
    fn network_preserves_known_pixels_and_fills_others() {
        let dims = ClipDims::new(3, 3, 8, 8);
        let sel = random_selection(dims, 3, 0.4, 6);
        let mc = zero_fill(&sel, dims).unwrap();
        let mut b = WeightBundle::new();
        synthesize_recovery_weights(&mut b, &RecoveryNetConfig::for_channels(3), 3, 1).unwrap();
        let fr = FeatureRecovery::from_bundle(&b, 3).unwrap();
        let out = fr.forward(&mc).unwrap();
        assert_eq!(out.dims(), mc.dims());
        let mut changed = 0;
        for f in 0..3 {
            for p in 0..64 {
                for c in 0..3 {
                    let (o, x) = (out.get(f, c, p / 8, p % 8), mc.x_m.get(f, c, p / 8, p % 8));
                    if mc.masks[f].get(p) {
                        assert_eq!(o.to_bits(), x.to_bits());
                    } else if o != 0.0 {
                        changed += 1;
                    }
                }
            }
        }
        assert!(changed > 0);
        assert!(out.data().iter().all(|v| v.is_finite()));
        assert_eq!(fr.forward(&mc).unwrap(), out);
    }

    #[test]
    fn network_needs_even_sides_and_complete_weights() {
        let mut b = WeightBundle::new();
        synthesize_recovery_weights(&mut b, &small_cfg(1), 1, 0).unwrap();
        let fr = FeatureRecovery::from_bundle(&b, 1).unwrap();
        let odd = MaskedClip {
            x_m: VideoTensor::zeros(ClipDims::new(1, 1, 3, 4)).unwrap(),
            masks: vec![PixelMask::full(12)],
        };
        assert!(matches!(
            fr.forward(&odd),
            Err(RecoveryError::Tensor(TensorError::OddSpatial { .. }))
        ));

        let mut partial = WeightBundle::new();
        small_cfg(1).write_to(&mut partial).unwrap();
        assert!(matches!(
            FeatureRecovery::from_bundle(&partial, 1),
            Err(RecoveryError::Tensor(TensorError::MissingWeight(_)))
        ));
    }

    #[test]
    fn recover_dispatches_modes() {
        let dims = ClipDims::new(1, 1, 4, 4);
        let sel = random_selection(dims, 1, 0.5, 9);
        let mc = zero_fill(&sel, dims).unwrap();
        assert_eq!(recover(&mc, RecoveryMode::Zero, None).unwrap(), mc.x_m);
        assert!(recover(&mc, RecoveryMode::Fr, None).is_err());
        assert_eq!(
            recover(&mc, RecoveryMode::Interpolate, None).unwrap(),
            interpolate_baseline(&mc).unwrap()
        );
    }
}
