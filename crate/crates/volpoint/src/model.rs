//! A small convolutional classifier trained from scratch: stacked 3x3
//! conv / ReLU / 2x2 max-pool stages, one hidden fully-connected layer
//! (the feature layer) and an N-way output with softmax.
//!
//! The loss is cross-entropy against an arbitrary non-negative target
//! vector. One-hot targets give the plain softmax loss; targets that decay
//! exponentially with geodesic distance from the ground-truth viewpoint
//! give the geometry-aware loss. Both run through the same code path.
//!
//! All arithmetic is f64. Gradients are exact (verified against central
//! finite differences); per-sample gradients inside a batch are computed
//! in parallel and reduced in a fixed chunk order, so training is
//! bit-reproducible for any worker count.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::DatasetManifest;
use crate::error::{Error, Result};
use crate::imgio;
use crate::render::RenderedImage;
use crate::viewsphere::SpherePixelization;

/// Probabilities below this are clamped inside the log.
const LOG_CLAMP: f64 = 1e-12;
/// Per-sample chunk size for the deterministic parallel reduction.
const GRAD_CHUNK: usize = 8;

/// Architecture description. Every conv stage is 3x3, stride 1, padding 1,
/// followed by ReLU and 2x2 max pooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_h: usize,
    pub input_w: usize,
    pub conv_channels: Vec<usize>,
    /// Width of the hidden fully-connected layer; its activations are the
    /// feature vector.
    pub fc_hidden: usize,
    pub n_outputs: usize,
}

impl NetworkSpec {
    /// The desk-scale default: conv 8/16/32, fc 128.
    pub fn desk_scale(input: (usize, usize), n_outputs: usize) -> Self {
        NetworkSpec {
            input_h: input.0,
            input_w: input.1,
            conv_channels: vec![8, 16, 32],
            fc_hidden: 128,
            n_outputs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() {
            return Err(Error::InvalidArgument("need at least one conv stage".into()));
        }
        if self.fc_hidden == 0 || self.n_outputs == 0 {
            return Err(Error::InvalidArgument(
                "fc_hidden and n_outputs must be nonzero".into(),
            ));
        }
        let div = 1usize << self.conv_channels.len();
        if self.input_h % div != 0 || self.input_w % div != 0 {
            return Err(Error::InvalidArgument(format!(
                "input {}x{} must be divisible by 2^{} for the pooling stages",
                self.input_h,
                self.input_w,
                self.conv_channels.len()
            )));
        }
        if self.input_h / div == 0 || self.input_w / div == 0 {
            return Err(Error::InvalidArgument("input too small".into()));
        }
        Ok(())
    }

    /// Feature dimension of the penultimate layer.
    pub fn feature_dim(&self) -> usize {
        self.fc_hidden
    }

    fn flat_after_convs(&self) -> usize {
        let div = 1usize << self.conv_channels.len();
        self.conv_channels.last().unwrap() * (self.input_h / div) * (self.input_w / div)
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    /// Per stage, [out_ch, in_ch * 9].
    pub conv_w: Vec<Array2<f64>>,
    pub conv_b: Vec<Array1<f64>>,
    /// [fc_hidden, flat]
    pub fc1_w: Array2<f64>,
    pub fc1_b: Array1<f64>,
    /// [n_outputs, fc_hidden]
    pub fc2_w: Array2<f64>,
    pub fc2_b: Array1<f64>,
}

impl TensorSet {
    fn zeros_like_spec(spec: &NetworkSpec) -> TensorSet {
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        let mut in_ch = 3usize;
        for &out_ch in &spec.conv_channels {
            conv_w.push(Array2::zeros((out_ch, in_ch * 9)));
            conv_b.push(Array1::zeros(out_ch));
            in_ch = out_ch;
        }
        TensorSet {
            conv_w,
            conv_b,
            fc1_w: Array2::zeros((spec.fc_hidden, spec.flat_after_convs())),
            fc1_b: Array1::zeros(spec.fc_hidden),
            fc2_w: Array2::zeros((spec.n_outputs, spec.fc_hidden)),
            fc2_b: Array1::zeros(spec.n_outputs),
        }
    }

    fn for_each_tensor(&self, mut f: impl FnMut(&[f64])) {
        for i in 0..self.conv_w.len() {
            f(self.conv_w[i].as_slice().unwrap());
            f(self.conv_b[i].as_slice().unwrap());
        }
        f(self.fc1_w.as_slice().unwrap());
        f(self.fc1_b.as_slice().unwrap());
        f(self.fc2_w.as_slice().unwrap());
        f(self.fc2_b.as_slice().unwrap());
    }

    fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for i in 0..self.conv_w.len() {
            f(self.conv_w[i].as_slice_mut().unwrap());
            f(self.conv_b[i].as_slice_mut().unwrap());
        }
        f(self.fc1_w.as_slice_mut().unwrap());
        f(self.fc1_b.as_slice_mut().unwrap());
        f(self.fc2_w.as_slice_mut().unwrap());
        f(self.fc2_b.as_slice_mut().unwrap());
    }

    pub fn flat_len(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|t| n += t.len());
        n
    }

    pub fn get_flat(&self, idx: usize) -> f64 {
        let mut rem = idx;
        let mut out = None;
        self.for_each_tensor(|t| {
            if out.is_none() {
                if rem < t.len() {
                    out = Some(t[rem]);
                } else {
                    rem -= t.len();
                }
            }
        });
        out.expect("flat index in range")
    }

    pub fn set_flat(&mut self, idx: usize, value: f64) {
        let mut rem = idx;
        let mut done = false;
        self.for_each_tensor_mut(|t| {
            if !done {
                if rem < t.len() {
                    t[rem] = value;
                    done = true;
                } else {
                    rem -= t.len();
                }
            }
        });
        assert!(done, "flat index in range");
    }

    fn add_scaled(&mut self, other: &TensorSet, factor: f64) {
        for i in 0..self.conv_w.len() {
            self.conv_w[i].scaled_add(factor, &other.conv_w[i]);
            self.conv_b[i].scaled_add(factor, &other.conv_b[i]);
        }
        self.fc1_w.scaled_add(factor, &other.fc1_w);
        self.fc1_b.scaled_add(factor, &other.fc1_b);
        self.fc2_w.scaled_add(factor, &other.fc2_w);
        self.fc2_b.scaled_add(factor, &other.fc2_b);
    }

    fn scale(&mut self, factor: f64) {
        self.for_each_tensor_mut(|t| t.iter_mut().for_each(|v| *v *= factor));
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_tensor(|t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }
}

/// Trainable parameters bound to their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub spec: NetworkSpec,
    pub tensors: TensorSet,
}

impl Parameters {
    /// Fan-in scaled uniform initialization, deterministic in the seed.
    /// Hidden layers use the ReLU gain (bound sqrt(6 / fan_in)); the
    /// output layer starts small so the initial distribution is near
    /// uniform.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Parameters> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = TensorSet::zeros_like_spec(spec);
        for w in &mut tensors.conv_w {
            let bound = (6.0 / w.ncols() as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
        }
        let b1 = (6.0 / tensors.fc1_w.ncols() as f64).sqrt();
        tensors
            .fc1_w
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-b1..b1));
        let b2 = 0.1 * (1.0 / tensors.fc2_w.ncols() as f64).sqrt();
        tensors
            .fc2_w
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-b2..b2));
        Ok(Parameters {
            spec: spec.clone(),
            tensors,
        })
    }

    const MAGIC: &'static [u8; 8] = b"VPCKPT01";

    /// Versioned binary checkpoint: magic, JSON spec header, then the
    /// tensors as little-endian f64 in declaration order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        let header = serde_json::to_vec(&self.spec).expect("spec serializes");
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        self.tensors.for_each_tensor(|t| {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
        fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Parameters> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let err = |m: &str| Error::parse(path.display().to_string(), m.to_string());
        if bytes.len() < 16 || &bytes[..8] != Self::MAGIC {
            return Err(err("not a checkpoint file"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let spec: NetworkSpec = serde_json::from_slice(
            bytes.get(16..16 + hlen).ok_or_else(|| err("truncated header"))?,
        )
        .map_err(|e| err(&e.to_string()))?;
        spec.validate()?;
        let mut tensors = TensorSet::zeros_like_spec(&spec);
        let mut pos = 16 + hlen;
        let mut fail = false;
        tensors.for_each_tensor_mut(|t| {
            for v in t.iter_mut() {
                match bytes.get(pos..pos + 8) {
                    Some(chunk) => {
                        *v = f64::from_le_bytes(chunk.try_into().unwrap());
                        pos += 8;
                    }
                    None => fail = true,
                }
            }
        });
        if fail || pos != bytes.len() {
            return Err(err("tensor payload size mismatch"));
        }
        Ok(Parameters { spec, tensors })
    }
}

/// Probability vector over class labels: non-negative, sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedDistribution(Vec<f64>);

impl PredictedDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(PredictedDistribution(p))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Cross-entropy of a predicted distribution against a non-negative
/// target vector: -sum_v q_v ln(max(P_v, 1e-12)). With a one-hot target
/// this is exactly the softmax loss.
pub fn loss(dist: &PredictedDistribution, target: &[f64]) -> f64 {
    assert_eq!(dist.len(), target.len(), "target length mismatch");
    let mut sum = 0.0;
    for (&p, &q) in dist.probabilities().iter().zip(target) {
        if q != 0.0 {
            sum -= q * p.max(LOG_CLAMP).ln();
        }
    }
    sum
}

/// Softmax (one-hot) loss via the same code path as [`loss`].
pub fn cross_entropy(dist: &PredictedDistribution, label: usize) -> f64 {
    let mut one_hot = vec![0.0; dist.len()];
    one_hot[label] = 1.0;
    loss(dist, &one_hot)
}

struct ConvStageCache {
    col: Array2<f64>,
    /// Post-ReLU activations, [out_ch, h*w].
    act: Array2<f64>,
    /// Argmax source index (into h*w) per pooled cell, [out_ch, ph*pw].
    pool_idx: Vec<u32>,
    h: usize,
    w: usize,
}

struct ForwardCache {
    stages: Vec<ConvStageCache>,
    flat: Vec<f64>,
    fc1_pre: Array1<f64>,
    features: Array1<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

/// 3x3/pad-1 im2col: [in_ch, h, w] -> [in_ch*9, h*w].
fn im2col(input: &[f64], in_ch: usize, h: usize, w: usize) -> Array2<f64> {
    let mut col = Array2::zeros((in_ch * 9, h * w));
    {
        let cs = col.as_slice_mut().unwrap();
        let stride = h * w;
        for c in 0..in_ch {
            let plane = &input[c * stride..(c + 1) * stride];
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let row = (c * 9 + ky * 3 + kx) * stride;
                    let dy = ky as i64 - 1;
                    let dx = kx as i64 - 1;
                    for y in 0..h {
                        let sy = y as i64 + dy;
                        if sy < 0 || sy >= h as i64 {
                            continue;
                        }
                        let src_row = sy as usize * w;
                        let dst_row = row + y * w;
                        let x0 = if dx < 0 { 1 } else { 0 };
                        let x1 = if dx > 0 { w - 1 } else { w };
                        for x in x0..x1 {
                            cs[dst_row + x] = plane[src_row + (x as i64 + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Scatter-add transpose of [`im2col`].
fn col2im(col: &Array2<f64>, in_ch: usize, h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; in_ch * h * w];
    let cs = col.as_slice().unwrap();
    let stride = h * w;
    for c in 0..in_ch {
        for ky in 0..3usize {
            for kx in 0..3usize {
                let row = (c * 9 + ky * 3 + kx) * stride;
                let dy = ky as i64 - 1;
                let dx = kx as i64 - 1;
                for y in 0..h {
                    let sy = y as i64 + dy;
                    if sy < 0 || sy >= h as i64 {
                        continue;
                    }
                    let src_row = sy as usize * w;
                    let dst_row = row + y * w;
                    let x0 = if dx < 0 { 1 } else { 0 };
                    let x1 = if dx > 0 { w - 1 } else { w };
                    for x in x0..x1 {
                        out[c * stride + src_row + (x as i64 + dx) as usize] += cs[dst_row + x];
                    }
                }
            }
        }
    }
    out
}

fn forward_cached(params: &Parameters, image: &[f64]) -> Result<ForwardCache> {
    let spec = &params.spec;
    let expect = 3 * spec.input_h * spec.input_w;
    if image.len() != expect {
        return Err(Error::ShapeMismatch(format!(
            "expected {} input values, got {}",
            expect,
            image.len()
        )));
    }
    let mut stages = Vec::with_capacity(spec.conv_channels.len());
    // Center the [0, 1] channels around zero.
    let mut cur: Vec<f64> = image.iter().map(|v| v - 0.5).collect();
    let mut in_ch = 3usize;
    let mut h = spec.input_h;
    let mut w = spec.input_w;
    for (stage, &out_ch) in spec.conv_channels.iter().enumerate() {
        let col = im2col(&cur, in_ch, h, w);
        let mut act = params.tensors.conv_w[stage].dot(&col);
        for (mut row, &b) in act.rows_mut().into_iter().zip(&params.tensors.conv_b[stage]) {
            row.iter_mut().for_each(|v| *v = (*v + b).max(0.0));
        }
        // 2x2 max pool.
        let (ph, pw) = (h / 2, w / 2);
        let mut pooled = vec![0.0; out_ch * ph * pw];
        let mut pool_idx = vec![0u32; out_ch * ph * pw];
        {
            let acts = act.as_slice().unwrap();
            for c in 0..out_ch {
                let plane = &acts[c * h * w..(c + 1) * h * w];
                for py in 0..ph {
                    for px in 0..pw {
                        let mut best_idx = (2 * py) * w + 2 * px;
                        let mut best = plane[best_idx];
                        for (oy, ox) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = (2 * py + oy) * w + 2 * px + ox;
                            if plane[idx] > best {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                        pooled[c * ph * pw + py * pw + px] = best;
                        pool_idx[c * ph * pw + py * pw + px] = best_idx as u32;
                    }
                }
            }
        }
        stages.push(ConvStageCache {
            col,
            act,
            pool_idx,
            h,
            w,
        });
        cur = pooled;
        in_ch = out_ch;
        h = ph;
        w = pw;
    }
    let flat = cur;
    let x = Array1::from_vec(flat.clone());
    let fc1_pre = params.tensors.fc1_w.dot(&x) + &params.tensors.fc1_b;
    let features = fc1_pre.mapv(|v| v.max(0.0));
    let logits_arr = params.tensors.fc2_w.dot(&features) + &params.tensors.fc2_b;
    let logits = logits_arr.to_vec();
    // Stable softmax.
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    Ok(ForwardCache {
        stages,
        flat,
        fc1_pre,
        features,
        logits,
        probs,
    })
}

/// Forward pass: logits, softmax distribution and the penultimate-layer
/// feature vector.
pub fn forward(
    params: &Parameters,
    image: &[f64],
) -> Result<(Vec<f64>, PredictedDistribution, Vec<f64>)> {
    let cache = forward_cached(params, image)?;
    Ok((
        cache.logits,
        PredictedDistribution::new(cache.probs)?,
        cache.features.to_vec(),
    ))
}

pub fn predict(params: &Parameters, image: &RenderedImage) -> Result<PredictedDistribution> {
    let (_, dist, _) = forward(params, &image.to_planar_f64())?;
    Ok(dist)
}

pub fn feature_vector(params: &Parameters, image: &RenderedImage) -> Result<Vec<f64>> {
    let (_, _, f) = forward(params, &image.to_planar_f64())?;
    Ok(f)
}

/// Backpropagate one sample; adds into `grad`, returns the sample loss.
fn backward_into(
    params: &Parameters,
    image: &[f64],
    target: &[f64],
    grad: &mut TensorSet,
) -> Result<f64> {
    let spec = &params.spec;
    if target.len() != spec.n_outputs {
        return Err(Error::ShapeMismatch(format!(
            "target length {} != n_outputs {}",
            target.len(),
            spec.n_outputs
        )));
    }
    let cache = forward_cached(params, image)?;
    let dist = PredictedDistribution::new(cache.probs.clone())?;
    let sample_loss = loss(&dist, target);

    // d(loss)/d(logit_k) = (sum_q) * P_k - q_k.
    let q_sum: f64 = target.iter().sum();
    let dlogits =
        Array1::from_iter(cache.probs.iter().zip(target).map(|(&p, &q)| q_sum * p - q));

    // Output layer.
    let features = &cache.features;
    grad.fc2_w += &dlogits
        .view()
        .insert_axis(ndarray::Axis(1))
        .dot(&features.view().insert_axis(ndarray::Axis(0)));
    grad.fc2_b += &dlogits;
    let dfeat = params.tensors.fc2_w.t().dot(&dlogits);

    // Hidden fully-connected layer (ReLU).
    let dfc1 = Array1::from_iter(
        dfeat
            .iter()
            .zip(cache.fc1_pre.iter())
            .map(|(&g, &pre)| if pre > 0.0 { g } else { 0.0 }),
    );
    let x = Array1::from_vec(cache.flat.clone());
    grad.fc1_w += &dfc1
        .view()
        .insert_axis(ndarray::Axis(1))
        .dot(&x.view().insert_axis(ndarray::Axis(0)));
    grad.fc1_b += &dfc1;
    let mut dcur: Vec<f64> = params.tensors.fc1_w.t().dot(&dfc1).to_vec();

    // Conv stages in reverse.
    for (stage, cache_stage) in cache.stages.iter().enumerate().rev() {
        let out_ch = spec.conv_channels[stage];
        let (h, w) = (cache_stage.h, cache_stage.w);
        let (ph, pw) = (h / 2, w / 2);
        // Un-pool into the conv activation grid, masked by ReLU.
        let mut dact = Array2::<f64>::zeros((out_ch, h * w));
        {
            let acts = cache_stage.act.as_slice().unwrap();
            let da = dact.as_slice_mut().unwrap();
            for c in 0..out_ch {
                for p in 0..ph * pw {
                    let src = c * ph * pw + p;
                    let idx = c * h * w + cache_stage.pool_idx[src] as usize;
                    if acts[idx] > 0.0 {
                        da[idx] += dcur[src];
                    }
                }
            }
        }
        grad.conv_w[stage] += &dact.dot(&cache_stage.col.t());
        for (gb, row) in grad.conv_b[stage]
            .iter_mut()
            .zip(dact.rows().into_iter())
        {
            *gb += row.sum();
        }
        if stage > 0 {
            let in_ch = spec.conv_channels[stage - 1];
            let dcol = params.tensors.conv_w[stage].t().dot(&dact);
            dcur = col2im(&dcol, in_ch, h, w);
        }
    }
    Ok(sample_loss)
}

/// Exact gradient of the summed loss over a batch of (image, target)
/// pairs. Returns (gradients, summed loss).
pub fn gradient(
    params: &Parameters,
    batch: &[(&[f64], &[f64])],
) -> Result<(TensorSet, f64)> {
    let chunks: Vec<(TensorSet, f64)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| -> Result<(TensorSet, f64)> {
            let mut grad = TensorSet::zeros_like_spec(&params.spec);
            let mut loss_sum = 0.0;
            for (image, target) in chunk {
                loss_sum += backward_into(params, image, target, &mut grad)?;
            }
            Ok((grad, loss_sum))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = TensorSet::zeros_like_spec(&params.spec);
    let mut total = 0.0;
    for (g, l) in chunks {
        grad.add_scaled(&g, 1.0);
        total += l;
    }
    Ok((grad, total))
}

/// Which per-class target vectors to train against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    /// Plain one-hot cross-entropy.
    Softmax,
    /// Exponential geodesic decay over the order-n neighborhood of the
    /// ground-truth viewpoint.
    Geodesic { order: usize, unit_deg: f64 },
}

/// Build the per-class target table. `Geodesic` requires the pixelization
/// whose labels the classes are.
pub fn class_targets(
    kind: &LossKind,
    n_classes: usize,
    p: Option<&SpherePixelization>,
) -> Result<Vec<Vec<f64>>> {
    match kind {
        LossKind::Softmax => Ok((0..n_classes)
            .map(|l| {
                let mut t = vec![0.0; n_classes];
                t[l] = 1.0;
                t
            })
            .collect()),
        LossKind::Geodesic { order, unit_deg } => {
            let p = p.ok_or_else(|| {
                Error::InvalidArgument("geodesic targets need a pixelization".into())
            })?;
            if p.n_pixels() != n_classes {
                return Err(Error::ShapeMismatch(format!(
                    "pixelization has {} labels, classifier has {n_classes}",
                    p.n_pixels()
                )));
            }
            (0..n_classes)
                .map(|l| p.soft_target(crate::viewsphere::ViewpointLabel(l), *order, *unit_deg))
                .collect()
        }
    }
}

/// Images + integer class labels.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub images: Vec<RenderedImage>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Load a manifest's images with their viewpoint labels.
pub fn load_training_set(
    manifest: &DatasetManifest,
    manifest_dir: &Path,
    n_classes: usize,
) -> Result<TrainingSet> {
    let images = manifest
        .samples
        .par_iter()
        .map(|s| imgio::read_image(&manifest_dir.join(&s.image_path)))
        .collect::<Result<Vec<_>>>()?;
    let labels = manifest.samples.iter().map(|s| s.label).collect();
    Ok(TrainingSet {
        images,
        labels,
        n_classes,
    })
}

/// Merge per-category manifests into one set labeled by category index;
/// returns the category names in label order.
pub fn category_training_set(
    parts: &[(String, &DatasetManifest, &Path)],
) -> Result<(TrainingSet, Vec<String>)> {
    if parts.len() < 2 {
        return Err(Error::InvalidArgument(
            "category training needs at least two categories".into(),
        ));
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    for (idx, (name, manifest, dir)) in parts.iter().enumerate() {
        names.push(name.clone());
        for s in &manifest.samples {
            images.push(imgio::read_image(&dir.join(&s.image_path))?);
            labels.push(idx);
        }
    }
    Ok((
        TrainingSet {
            images,
            labels,
            n_classes: parts.len(),
        },
        names,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(loss: LossKind, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs,
            loss,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            match e.heldout_accuracy {
                Some(acc) => out.push_str(&format!("{},{},{}\n", e.epoch, e.mean_loss, acc)),
                None => out.push_str(&format!("{},{},\n", e.epoch, e.mean_loss)),
            }
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f =
            fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Fraction of samples whose argmax matches the label.
pub fn accuracy(params: &Parameters, set: &TrainingSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let hits: usize = set
        .images
        .par_iter()
        .zip(&set.labels)
        .map(|(img, &label)| -> Result<usize> {
            Ok((predict(params, img)?.argmax() == label) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(hits as f64 / set.len() as f64)
}

/// Predicted distributions for a batch of images, in order.
pub fn predict_batch(
    params: &Parameters,
    images: &[RenderedImage],
) -> Result<Vec<PredictedDistribution>> {
    images.par_iter().map(|img| predict(params, img)).collect()
}

/// SGD with momentum over the summed batch loss. The learning rate decays
/// by 10x at two thirds of the epochs. Deterministic in the seed: fixed
/// initialization, fixed shuffles, ordered gradient reduction.
pub fn train(
    set: &TrainingSet,
    targets: &[Vec<f64>],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    heldout: Option<&TrainingSet>,
) -> Result<(Parameters, TrainingLog)> {
    cfg.validate()?;
    spec.validate()?;
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if targets.len() != spec.n_outputs {
        return Err(Error::ShapeMismatch(format!(
            "{} target rows for {} outputs",
            targets.len(),
            spec.n_outputs
        )));
    }
    if let Some(&bad) = set.labels.iter().find(|&&l| l >= spec.n_outputs) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            n_pixels: spec.n_outputs,
        });
    }
    let mut params = Parameters::init(spec, cfg.seed)?;
    let mut velocity = TensorSet::zeros_like_spec(spec);
    let mut log = TrainingLog::default();
    let planar: Vec<Vec<f64>> = set.images.iter().map(|i| i.to_planar_f64()).collect();
    let decay_at = cfg.epochs * 2 / 3;
    for epoch in 0..cfg.epochs {
        let lr = if decay_at > 0 && epoch >= decay_at {
            cfg.learning_rate * 0.1
        } else {
            cfg.learning_rate
        };
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], &[f64])> = batch_idx
                .iter()
                .map(|&i| {
                    (
                        planar[i].as_slice(),
                        targets[set.labels[i]].as_slice(),
                    )
                })
                .collect();
            let (mut grad, batch_loss) = gradient(&params, &batch)?;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became non-finite in epoch {epoch}"
                )));
            }
            loss_sum += batch_loss;
            // Normalize by batch size so the step is scale-free.
            grad.scale(1.0 / batch.len() as f64);
            velocity.scale(cfg.momentum);
            velocity.add_scaled(&grad, -lr);
            params.tensors.add_scaled(&velocity, 1.0);
        }
        if !params.tensors.all_finite() {
            return Err(Error::Diverged(format!(
                "parameters became non-finite in epoch {epoch}"
            )));
        }
        let heldout_accuracy = match heldout {
            Some(set) => Some(accuracy(&params, set)?),
            None => None,
        };
        log.epochs.push(EpochStats {
            epoch,
            mean_loss: loss_sum / set.len() as f64,
            heldout_accuracy,
        });
    }
    Ok((params, log))
}
