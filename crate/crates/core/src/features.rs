//! Frozen random feature layers `x ↦ tanh(W [φ; x] + b)`.
//!
//! Two weight schemes are provided: i.i.d. Gaussian, and SWIM pair sampling
//! where each neuron is built from a pair of training points chosen with
//! probability proportional to the target change per unit of input change.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Matrix};
use crate::rng::Rng;

pub const DEFAULT_SWIM_EPS: f64 = 1e-6;

/// Pair-sampling constants. `c2` is the SWIM scale and `c1 = c2 / 2`, which
/// puts the pre-activation at `∓c1` on the two anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwimConfig {
    c1: f64,
    c2: f64,
    eps: f64,
}

impl SwimConfig {
    pub fn new(scale: f64, eps: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("SWIM scale must be positive, got {scale}")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("SWIM eps must be positive, got {eps}")));
        }
        Ok(Self {
            c1: 0.5 * scale,
            c2: scale,
            eps,
        })
    }

    pub fn with_scale(scale: f64) -> Result<Self> {
        Self::new(scale, DEFAULT_SWIM_EPS)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureScheme {
    Iid { scale: f64 },
    Swim(SwimConfig),
}

/// Sampled weights and biases of one frozen tanh layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFeatureLayer {
    /// One row per neuron, over the concatenated input `[φ; x]`.
    pub weights: Matrix,
    pub biases: Array1<f64>,
    pub scheme: FeatureScheme,
}

impl RandomFeatureLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Pre-activations for an already concatenated input.
    pub fn preactivation(&self, inputs: ArrayView2<'_, f64>) -> Matrix {
        inputs.dot(&self.weights.t()) + self.biases.view().insert_axis(Axis(0))
    }
}

pub fn sample_iid_layer(input_dim: usize, p: usize, scale: f64, rng: &mut Rng) -> Result<RandomFeatureLayer> {
    if p == 0 || input_dim == 0 {
        return Err(Error::invalid(format!(
            "layer needs positive dims, got input {input_dim}, output {p}"
        )));
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("feature scale must be >= 0, got {scale}")));
    }
    let normal = Normal::new(0.0, scale).expect("finite scale");
    let weights = Array2::from_shape_simple_fn((p, input_dim), || normal.sample(rng));
    let biases = Array1::from_shape_simple_fn(p, || normal.sample(rng));
    Ok(RandomFeatureLayer {
        weights,
        biases,
        scheme: FeatureScheme::Iid { scale },
    })
}

/// Candidate pairs for SWIM sampling with their selection probabilities.
#[derive(Debug, Clone)]
pub struct CandidatePairs {
    /// `(first, second)` row indices.
    pub pairs: Vec<(usize, usize)>,
    pub probabilities: Vec<f64>,
    /// Row reads performed while building the pairs.
    pub point_touches: usize,
}

/// Pairs every point `i` with `(i + jᵢ) mod n`, `jᵢ` uniform on `1..n`.
pub fn offset_pairs(n: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + rng.gen_range(1..n)) % n)).collect()
}

fn row_distance(m: &ArrayView2<'_, f64>, a: usize, b: usize) -> f64 {
    m.row(a)
        .iter()
        .zip(m.row(b).iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Selection probabilities `∝ ‖Δy‖ / (‖Δx‖ + eps)` over the given pairs,
/// plus the number of row reads made.
///
/// Pairs with identical inputs get zero mass. If every remaining pair has
/// identical targets the distribution falls back to uniform over pairs with
/// distinct inputs.
pub fn pair_probabilities(
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    pairs: &[(usize, usize)],
    eps: f64,
) -> Result<(Vec<f64>, usize)> {
    let mut touches = 0;
    let mut weights = Vec::with_capacity(pairs.len());
    let mut distinct = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        touches += 2;
        let dx = row_distance(&inputs, a, b);
        if dx == 0.0 {
            weights.push(0.0);
            distinct.push(false);
            continue;
        }
        distinct.push(true);
        weights.push(row_distance(&targets, a, b) / (dx + eps));
    }
    if !distinct.iter().any(|&d| d) {
        return Err(Error::DegeneratePairs);
    }
    let mut total: f64 = weights.iter().sum();
    if total == 0.0 {
        weights = distinct.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect();
        total = weights.iter().sum();
    }
    Ok((weights.into_iter().map(|w| w / total).collect(), touches))
}

pub fn candidate_pairs(
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    eps: f64,
    rng: &mut Rng,
) -> Result<CandidatePairs> {
    let n = inputs.nrows();
    if n < 2 {
        return Err(Error::invalid("SWIM sampling needs at least two rows"));
    }
    if targets.nrows() != n {
        return Err(Error::invalid(format!(
            "SWIM sampling: {n} input rows but {} target rows",
            targets.nrows()
        )));
    }
    let pairs = offset_pairs(n, rng);
    let (probabilities, point_touches) = pair_probabilities(inputs, targets, &pairs, eps)?;
    Ok(CandidatePairs {
        pairs,
        probabilities,
        point_touches,
    })
}

/// Neuron weights `c2 Δ/‖Δ‖²` and bias `−⟨w, x¹⟩ − c1` for anchors `x¹, x²`.
pub fn swim_neuron(first: ArrayView1<'_, f64>, second: ArrayView1<'_, f64>, cfg: &SwimConfig) -> (Array1<f64>, f64) {
    let delta = &second - &first;
    let norm2 = delta.dot(&delta);
    let w = delta * (cfg.c2 / norm2);
    let b = -w.dot(&first) - cfg.c1;
    (w, b)
}

/// SWIM layer together with the anchor rows `(x¹, x²)` of every neuron.
pub fn sample_swim_layer_anchored(
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    p: usize,
    cfg: &SwimConfig,
    rng: &mut Rng,
) -> Result<(RandomFeatureLayer, Vec<(usize, usize)>)> {
    if p == 0 {
        return Err(Error::invalid("layer needs at least one neuron"));
    }
    ensure_finite(inputs, "SWIM inputs")?;
    ensure_finite(targets, "SWIM targets")?;
    let candidates = candidate_pairs(inputs, targets, cfg.eps, rng)?;
    let picker = WeightedIndex::new(&candidates.probabilities).map_err(|_| Error::DegeneratePairs)?;

    let dim = inputs.ncols();
    let mut weights = Array2::zeros((p, dim));
    let mut biases = Array1::zeros(p);
    let mut anchors = Vec::with_capacity(p);
    for k in 0..p {
        let (a, b) = candidates.pairs[picker.sample(rng)];
        let (w, bias) = swim_neuron(inputs.row(a), inputs.row(b), cfg);
        weights.row_mut(k).assign(&w);
        biases[k] = bias;
        anchors.push((a, b));
    }
    let layer = RandomFeatureLayer {
        weights,
        biases,
        scheme: FeatureScheme::Swim(*cfg),
    };
    Ok((layer, anchors))
}

/// Samples `p` neurons from pairs of rows of `inputs` (already concatenated
/// `[φ; x]`), drawing pairs with replacement.
pub fn sample_swim_layer(
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    p: usize,
    cfg: &SwimConfig,
    rng: &mut Rng,
) -> Result<RandomFeatureLayer> {
    sample_swim_layer_anchored(inputs, targets, p, cfg, rng).map(|(layer, _)| layer)
}

/// Horizontal concatenation `[φ | x]`.
pub fn concat_inputs(phi: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Matrix> {
    if phi.nrows() != x.nrows() {
        return Err(Error::invalid(format!(
            "representation has {} rows but inputs have {}",
            phi.nrows(),
            x.nrows()
        )));
    }
    ndarray::concatenate(Axis(1), &[phi.reborrow(), x.reborrow()]).map_err(|e| Error::invalid(e.to_string()))
}

/// `tanh(W [φᵢ; xᵢ] + b)` for every row.
pub fn apply_layer(layer: &RandomFeatureLayer, phi: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Matrix> {
    let d = phi.ncols();
    if d + x.ncols() != layer.input_dim() {
        return Err(Error::invalid(format!(
            "layer expects {} input columns, got {} + {}",
            layer.input_dim(),
            d,
            x.ncols()
        )));
    }
    if phi.nrows() != x.nrows() {
        return Err(Error::invalid("representation and inputs disagree on row count"));
    }
    let mut out = phi.dot(&layer.weights.slice(s![.., ..d]).t());
    out += &x.dot(&layer.weights.slice(s![.., d..]).t());
    out += &layer.biases.view().insert_axis(Axis(0));
    out.mapv_inplace(f64::tanh);
    Ok(out)
}

/// Per-feature standardization fitted on the training pass and frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl FeatureNorm {
    /// Zero-variance columns keep scale 1.
    pub fn fit(features: ArrayView2<'_, f64>) -> Self {
        let n = features.nrows().max(1) as f64;
        let mean = features.sum_axis(Axis(0)) / n;
        let centered = &features - &mean.view().insert_axis(Axis(0));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        let scale = var.mapv(|v| if v > 1e-24 { v.sqrt() } else { 1.0 });
        Self { mean, scale }
    }

    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Matrix {
        (&features - &self.mean.view().insert_axis(Axis(0))) / self.scale.view().insert_axis(Axis(0))
    }
}
