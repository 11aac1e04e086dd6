//! Losses on the linear head `F(x) = Wᵀ Φ(x) + b`, their functional
//! gradients with respect to the representation, and the per-round fits used
//! by gradient boosting.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, frobenius, ridge_solve, CholeskyFactor, Matrix};
use crate::optim::{lbfgs, LbfgsOptions};
use crate::sandwich::{sandwich_scalar, SandwichProblem};

/// RMS gradient size under which the functional gradient counts as zero.
pub const ZERO_GRADIENT_RMS: f64 = 1e-12;

/// Largest step the initial line-search bracket covers.
pub const LINE_SEARCH_MAX_STEP: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    /// `½‖F(x) − y‖²`.
    Mse,
    /// Sigmoid cross-entropy on a single logit.
    Bce,
    /// Softmax cross-entropy over `classes` logits.
    Cce { classes: usize },
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, LossKind::Mse)
    }
}

/// Supervision for `n` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Targets {
    Continuous(Matrix),
    Labels { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn labels(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid(format!("need at least two classes, got {classes}")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {bad} out of range 0..{classes}")));
        }
        Ok(Targets::Labels { labels, classes })
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Continuous(y) => y.nrows(),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels_slice(&self) -> Option<&[usize]> {
        match self {
            Targets::Labels { labels, .. } => Some(labels),
            Targets::Continuous(_) => None,
        }
    }

    /// Targets as a matrix: continuous values, or one-hot rows for labels.
    pub fn to_matrix(&self) -> Matrix {
        match self {
            Targets::Continuous(y) => y.clone(),
            Targets::Labels { labels, classes } => {
                let mut m = Array2::zeros((labels.len(), *classes));
                for (i, &l) in labels.iter().enumerate() {
                    m[[i, l]] = 1.0;
                }
                m
            }
        }
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Continuous(y) => Targets::Continuous(y.select(Axis(0), rows)),
            Targets::Labels { labels, classes } => Targets::Labels {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        }
    }
}

/// Affine head: logits `Φ W + 1 bᵀ`. The bias is never penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// `D × d`.
    pub weights: Matrix,
    pub bias: Array1<f64>,
}

impl LinearHead {
    pub fn zeros(width: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((width, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits(&self, phi: ArrayView2<'_, f64>) -> Matrix {
        phi.dot(&self.weights) + self.bias.view().insert_axis(Axis(0))
    }
}

/// Number of head outputs for a loss.
pub fn output_dim(kind: LossKind, targets: &Targets) -> Result<usize> {
    match (kind, targets) {
        (LossKind::Mse, Targets::Continuous(y)) => Ok(y.ncols()),
        (LossKind::Mse, Targets::Labels { .. }) => Err(Error::invalid("squared loss needs continuous targets")),
        (LossKind::Bce, Targets::Labels { classes: 2, .. }) => Ok(1),
        (LossKind::Bce, _) => Err(Error::invalid("binary cross-entropy needs two-class labels")),
        (LossKind::Cce { classes }, Targets::Labels { classes: k, .. }) if classes == *k => Ok(classes),
        (LossKind::Cce { classes }, Targets::Labels { classes: k, .. }) => Err(Error::invalid(format!(
            "loss expects {classes} classes but targets have {k}"
        ))),
        (LossKind::Cce { .. }, Targets::Continuous(_)) => Err(Error::invalid("cross-entropy needs labels")),
    }
}

fn check_shapes(kind: LossKind, head: &LinearHead, phi: ArrayView2<'_, f64>, targets: &Targets) -> Result<()> {
    let d = output_dim(kind, targets)?;
    if head.outputs() != d || head.bias.len() != d {
        return Err(Error::invalid(format!("head has {} outputs, loss needs {d}", head.outputs())));
    }
    if head.weights.nrows() != phi.ncols() {
        return Err(Error::invalid(format!(
            "head expects width {}, representation has {}",
            head.weights.nrows(),
            phi.ncols()
        )));
    }
    if phi.nrows() != targets.len() {
        return Err(Error::invalid(format!(
            "{} representation rows but {} targets",
            phi.nrows(),
            targets.len()
        )));
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn softmax_row(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    max + sum.ln()
}

/// Mean loss for precomputed logits, together with `∂₁l` per row (n×d).
fn loss_and_output_gradient(kind: LossKind, logits: &Matrix, targets: &Targets) -> (f64, Matrix) {
    let n = logits.nrows();
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    match (kind, targets) {
        (LossKind::Mse, Targets::Continuous(y)) => {
            grad = logits - y;
            total = 0.5 * grad.iter().map(|v| v * v).sum::<f64>();
        }
        (LossKind::Bce, Targets::Labels { labels, .. }) => {
            for i in 0..n {
                let (l, y) = (logits[[i, 0]], labels[i] as f64);
                total += softplus(l) - y * l;
                grad[[i, 0]] = sigmoid(l) - y;
            }
        }
        (LossKind::Cce { .. }, Targets::Labels { labels, .. }) => {
            let k = logits.ncols();
            let mut probs = vec![0.0; k];
            for i in 0..n {
                let row = logits.row(i);
                let lse = softmax_row(row.as_slice().expect("standard layout"), &mut probs);
                total += lse - row[labels[i]];
                for c in 0..k {
                    grad[[i, c]] = probs[c];
                }
                grad[[i, labels[i]]] -= 1.0;
            }
        }
        _ => unreachable!("shapes validated by caller"),
    }
    (total / n as f64, grad)
}

pub fn empirical_risk(kind: LossKind, head: &LinearHead, phi: ArrayView2<'_, f64>, targets: &Targets) -> Result<f64> {
    check_shapes(kind, head, phi, targets)?;
    let logits = head.logits(phi);
    Ok(loss_and_output_gradient(kind, &logits, targets).0)
}

/// Functional gradient `G` (n×D) with row `i` equal to `W ∂₁l(F(xᵢ), yᵢ)`.
///
/// This is the pointwise gradient in `L²(μ̂)`; the derivative of the
/// empirical risk with respect to `Φ[i, j]` is `G[i, j] / n`.
pub fn functional_gradient(
    kind: LossKind,
    head: &LinearHead,
    phi: ArrayView2<'_, f64>,
    targets: &Targets,
) -> Result<Matrix> {
    check_shapes(kind, head, phi, targets)?;
    let logits = head.logits(phi);
    let (_, dl) = loss_and_output_gradient(kind, &logits, targets);
    Ok(dl.dot(&head.weights.t()))
}

/// Fits the block map `A` (D×p) to the normalized negative gradient
/// `−√n G/‖G‖_F` by ridge regression on the features `F` (n×p).
pub fn fit_gradient_direction(features: ArrayView2<'_, f64>, gradient: ArrayView2<'_, f64>, lambda: f64) -> Result<Matrix> {
    let n = gradient.nrows();
    if n == 0 || features.nrows() != n {
        return Err(Error::invalid(format!(
            "gradient has {n} rows, features have {}",
            features.nrows()
        )));
    }
    ensure_finite(gradient, "functional gradient")?;
    let norm = frobenius(gradient);
    if norm <= ZERO_GRADIENT_RMS * (n as f64).sqrt() {
        return Err(Error::ZeroGradient);
    }
    let target = gradient.mapv(|g| -(n as f64).sqrt() * g / norm);
    let m = ridge_solve(features, target.view(), lambda)?;
    Ok(m.reversed_axes())
}

/// Step size `α ≥ 0` minimizing the risk along `Φ + α·direction`.
///
/// Squared loss is solved in closed form. Cross-entropy losses use a
/// safeguarded Newton iteration on the derivative, which is monotone in α.
pub fn line_search(
    kind: LossKind,
    head: &LinearHead,
    phi: ArrayView2<'_, f64>,
    direction: ArrayView2<'_, f64>,
    targets: &Targets,
) -> Result<f64> {
    check_shapes(kind, head, phi, targets)?;
    if direction.dim() != phi.dim() {
        return Err(Error::invalid("direction must have the shape of the representation"));
    }
    let logits = head.logits(phi);
    if let LossKind::Mse = kind {
        let Targets::Continuous(y) = targets else {
            unreachable!("validated")
        };
        let residuals = y - &logits;
        let problem = SandwichProblem::new(residuals.view(), head.weights.view(), direction.reborrow(), 0.0)?;
        return match sandwich_scalar(&problem) {
            Ok(alpha) => Ok(alpha.max(0.0)),
            Err(Error::DegenerateProblem(_)) => Ok(0.0),
            Err(e) => Err(e),
        };
    }

    let slope = direction.dot(&head.weights);
    let derivs = |alpha: f64| -> (f64, f64) {
        let shifted = &logits + &(&slope * alpha);
        let (_, dl) = loss_and_output_gradient(kind, &shifted, targets);
        let n = shifted.nrows() as f64;
        let first = (&dl * &slope).sum() / n;
        let second = match kind {
            LossKind::Bce => shifted
                .iter()
                .zip(slope.iter())
                .map(|(&l, &m)| {
                    let s = sigmoid(l);
                    s * (1.0 - s) * m * m
                })
                .sum::<f64>(),
            _ => {
                // Probabilities are dl + onehot; recover them from dl.
                let probs = &dl + &targets.to_matrix();
                let mut acc = 0.0;
                for (p, m) in probs.outer_iter().zip(slope.outer_iter()) {
                    let mean = p.dot(&m);
                    acc += p.iter().zip(m.iter()).map(|(pi, mi)| pi * mi * mi).sum::<f64>() - mean * mean;
                }
                acc
            }
        } / n;
        (first, second)
    };

    let (g0, _) = derivs(0.0);
    if !(g0 < 0.0) {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = LINE_SEARCH_MAX_STEP;
    // Separable data can push the minimizer past the initial bracket.
    while derivs(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(lo);
        }
    }
    let mut alpha = lo;
    for _ in 0..100 {
        let (g, h) = derivs(alpha);
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let newton = alpha - g / h;
        let next = if h > 1e-14 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - alpha).abs() <= 1e-10;
        alpha = next;
        if done {
            break;
        }
    }
    Ok(alpha.max(0.0))
}

/// Result of fitting the top-level head.
#[derive(Debug, Clone)]
pub struct HeadFit {
    pub head: LinearHead,
    /// Regularized objective after each accepted optimizer step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Regularized objective `risk + λ‖W‖²_F` for classification heads and
/// `(1/n)‖Y − F‖²_F + λ‖W‖²_F` for squared loss.
pub fn head_objective(kind: LossKind, head: &LinearHead, phi: ArrayView2<'_, f64>, targets: &Targets, lambda: f64) -> Result<f64> {
    let risk = empirical_risk(kind, head, phi, targets)?;
    let fit = if let LossKind::Mse = kind { 2.0 * risk } else { risk };
    Ok(fit + lambda * head.weights.iter().map(|v| v * v).sum::<f64>())
}

/// Fits the top-level head by ridge (squared loss) or L-BFGS (cross-entropy),
/// warm-starting the latter from `warm` when given.
pub fn fit_top_linear(
    kind: LossKind,
    phi: ArrayView2<'_, f64>,
    targets: &Targets,
    lambda: f64,
    warm: Option<&LinearHead>,
) -> Result<HeadFit> {
    fit_top_linear_with(kind, phi, targets, lambda, warm, &LbfgsOptions::default())
}

/// [`fit_top_linear`] with explicit solver settings for the cross-entropy case.
pub fn fit_top_linear_with(
    kind: LossKind,
    phi: ArrayView2<'_, f64>,
    targets: &Targets,
    lambda: f64,
    warm: Option<&LinearHead>,
    options: &LbfgsOptions,
) -> Result<HeadFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("head ridge weight must be >= 0, got {lambda}")));
    }
    ensure_finite(phi, "representation")?;
    let d = output_dim(kind, targets)?;
    let (n, width) = phi.dim();
    if n == 0 || n != targets.len() {
        return Err(Error::invalid(format!("{n} representation rows but {} targets", targets.len())));
    }

    if let LossKind::Mse = kind {
        let Targets::Continuous(y) = targets else {
            unreachable!("validated")
        };
        let phi_mean = phi.mean_axis(Axis(0)).expect("n > 0");
        let y_mean = y.mean_axis(Axis(0)).expect("n > 0");
        let centered_phi = &phi - &phi_mean.view().insert_axis(Axis(0));
        let centered_y = y - &y_mean.view().insert_axis(Axis(0));
        let weights = ridge_solve(centered_phi.view(), centered_y.view(), lambda)?;
        let bias = &y_mean - &weights.t().dot(&phi_mean);
        let head = LinearHead { weights, bias };
        let objective = head_objective(kind, &head, phi, targets, lambda)?;
        return Ok(HeadFit {
            head,
            objective_trace: vec![objective],
            converged: true,
        });
    }

    // Optimize over whitened coordinates: with centered features Fc and
    // Fcᵀ Fc / n + δI = L Lᵀ, set W = L⁻ᵀ V and logits = Fc W + c. The
    // objective is unchanged; only its conditioning improves.
    let mean = phi.mean_axis(Axis(0)).expect("n > 0");
    let centered = &phi - &mean.view().insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered) / n as f64;
    let avg_diag = cov.diag().sum() / width.max(1) as f64;
    let jitter = if avg_diag > 0.0 { lambda.max(1e-8 * avg_diag) } else { 1.0 };
    cov.diag_mut().mapv_inplace(|v| v + jitter);
    let factor = CholeskyFactor::new(cov.view())?;

    let warm = warm.filter(|h| h.weights.dim() == (width, d) && h.bias.len() == d);
    let mut x0 = vec![0.0; width * d + d];
    if let Some(h) = warm {
        let v = factor.mul_upper(h.weights.view());
        let c = &h.bias + &h.weights.t().dot(&mean);
        x0 = v.iter().chain(c.iter()).cloned().collect();
    }
    let split = |x: &[f64]| -> (Matrix, Array1<f64>) {
        let v = ArrayView2::from_shape((width, d), &x[..width * d]).expect("shape");
        (factor.solve_upper(v), Array1::from_vec(x[width * d..].to_vec()))
    };
    let objective = |x: &[f64], grad: &mut [f64]| -> f64 {
        let (w, c) = split(x);
        let logits = centered.dot(&w) + c.view().insert_axis(Axis(0));
        let (risk, dl) = loss_and_output_gradient(kind, &logits, targets);
        let gw = centered.t().dot(&dl) / n as f64 + &w * (2.0 * lambda);
        let gv = factor.solve_lower(gw.view());
        let gc = dl.sum_axis(Axis(0)) / n as f64;
        for (g, v) in grad.iter_mut().zip(gv.iter().chain(gc.iter())) {
            *g = *v;
        }
        risk + lambda * w.iter().map(|v| v * v).sum::<f64>()
    };
    let result = lbfgs(objective, x0, options);
    let (weights, c) = split(&result.x);
    let bias = &c - &weights.t().dot(&mean);
    Ok(HeadFit {
        head: LinearHead { weights, bias },
        objective_trace: result.trace,
        converged: result.converged,
    })
}

/// Class probabilities from logits: softmax rows, or sigmoid for one logit.
pub fn probabilities(kind: LossKind, logits: ArrayView2<'_, f64>) -> Matrix {
    match kind {
        LossKind::Bce => {
            let mut out = Array2::zeros((logits.nrows(), 2));
            for (i, &l) in logits.column(0).iter().enumerate() {
                let s = sigmoid(l);
                out[[i, 0]] = 1.0 - s;
                out[[i, 1]] = s;
            }
            out
        }
        _ => {
            let mut out = Array2::zeros(logits.raw_dim());
            let mut buf = vec![0.0; logits.ncols()];
            for (i, row) in logits.outer_iter().enumerate() {
                let row: Vec<f64> = row.to_vec();
                softmax_row(&row, &mut buf);
                out.row_mut(i).assign(&Array1::from_vec(buf.clone()));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::gauss_solve;
    use crate::rng::{rng_from_seed, Rng};
    use ndarray::array;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
    }

    fn random_head(width: usize, outputs: usize, rng: &mut Rng) -> LinearHead {
        LinearHead {
            weights: random(width, outputs, rng),
            bias: Array1::from_shape_fn(outputs, |_| rng.sample(StandardNormal)),
        }
    }

    fn random_labels(n: usize, k: usize, rng: &mut Rng) -> Targets {
        Targets::labels((0..n).map(|_| rng.gen_range(0..k)).collect(), k).unwrap()
    }

    #[test]
    fn mse_perfect_fit_has_zero_risk_and_gradient() {
        let mut rng = rng_from_seed(1);
        let phi = random(6, 3, &mut rng);
        let head = random_head(3, 2, &mut rng);
        let y = Targets::Continuous(head.logits(phi.view()));
        assert_eq!(empirical_risk(LossKind::Mse, &head, phi.view(), &y).unwrap(), 0.0);
        let g = functional_gradient(LossKind::Mse, &head, phi.view(), &y).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cce_uniform_logits() {
        let mut rng = rng_from_seed(2);
        let phi = random(5, 3, &mut rng);
        let mut head = LinearHead::zeros(3, 4);
        let labels = random_labels(5, 4, &mut rng);
        let kind = LossKind::Cce { classes: 4 };
        let risk = empirical_risk(kind, &head, phi.view(), &labels).unwrap();
        assert!((risk - 4f64.ln()).abs() < 1e-14);

        head.weights = random(3, 4, &mut rng);
        let phi0 = Array2::zeros((5, 3));
        let g = functional_gradient(kind, &head, phi0.view(), &labels).unwrap();
        let onehot = labels.to_matrix();
        let expected = (Array2::from_elem((5, 4), 0.25) - &onehot).dot(&head.weights.t());
        assert!(frobenius((&g - &expected).view()) < 1e-14);
    }

    #[test]
    fn bce_matches_direct_summation() {
        let mut rng = rng_from_seed(3);
        let phi = random(9, 3, &mut rng);
        let head = random_head(3, 1, &mut rng);
        let labels = random_labels(9, 2, &mut rng);
        let Targets::Labels { labels: ys, .. } = &labels else { unreachable!() };
        let mut direct = 0.0;
        for i in 0..9 {
            let z: f64 = (0..3).map(|j| phi[[i, j]] * head.weights[[j, 0]]).sum::<f64>() + head.bias[0];
            let p = 1.0 / (1.0 + (-z).exp());
            direct -= if ys[i] == 1 { p.ln() } else { (1.0 - p).ln() };
        }
        direct /= 9.0;
        let risk = empirical_risk(LossKind::Bce, &head, phi.view(), &labels).unwrap();
        assert!((risk - direct).abs() <= 1e-12);
    }

    #[test]
    fn label_out_of_range_rejected() {
        assert!(matches!(Targets::labels(vec![0, 3], 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(4);
        for kind in [LossKind::Mse, LossKind::Bce, LossKind::Cce { classes: 3 }] {
            let (n, width) = (7, 4);
            let phi = random(n, width, &mut rng);
            let (targets, d) = match kind {
                LossKind::Mse => (Targets::Continuous(random(n, 2, &mut rng)), 2),
                LossKind::Bce => (random_labels(n, 2, &mut rng), 1),
                LossKind::Cce { classes } => (random_labels(n, classes, &mut rng), classes),
            };
            let head = random_head(width, d, &mut rng);
            let g = functional_gradient(kind, &head, phi.view(), &targets).unwrap();
            let h = 1e-5;
            for i in 0..n {
                for j in 0..width {
                    let mut plus = phi.clone();
                    plus[[i, j]] += h;
                    let mut minus = phi.clone();
                    minus[[i, j]] -= h;
                    let fd = (empirical_risk(kind, &head, plus.view(), &targets).unwrap()
                        - empirical_risk(kind, &head, minus.view(), &targets).unwrap())
                        / (2.0 * h)
                        * n as f64;
                    let err = (fd - g[[i, j]]).abs() / (1.0f64).max(g[[i, j]].abs());
                    assert!(err <= 1e-5, "{kind:?} ({i},{j}): fd {fd} vs {}", g[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn gradient_direction_unit_norm_with_square_features() {
        let mut rng = rng_from_seed(5);
        let n = 6;
        let f = random(n, n, &mut rng);
        let g = random(n, 3, &mut rng);
        let a = fit_gradient_direction(f.view(), g.view(), 0.0).unwrap();
        let af = f.dot(&a.t());
        let norm = af.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((norm - 1.0).abs() <= 1e-8);
        let inner = (&af * &g).sum() / n as f64;
        assert!(inner <= 0.0);

        let gs = &g * ((n as f64).sqrt() / frobenius(g.view()));
        let a = fit_gradient_direction(f.view(), gs.view(), 0.0).unwrap();
        let inner = (&f.dot(&a.t()) * &gs).sum() / n as f64;
        assert!((inner + 1.0).abs() <= 1e-8);
    }

    #[test]
    fn gradient_direction_matches_closed_form() {
        let mut rng = rng_from_seed(6);
        let (n, p) = (10, 4);
        let f = random(n, p, &mut rng);
        let g = random(n, 3, &mut rng);
        let a = fit_gradient_direction(f.view(), g.view(), 1e-8).unwrap();
        // −√n/‖G‖ Gᵀ F (FᵀF)⁻¹, one column of (FᵀF)⁻¹ Fᵀ G at a time.
        let ftf = f.t().dot(&f);
        let ftg = f.t().dot(&g);
        let scale = -(n as f64).sqrt() / frobenius(g.view());
        for k in 0..3 {
            let col = gauss_solve(ftf.clone(), ftg.column(k).to_vec()).unwrap();
            for j in 0..p {
                let expected = scale * col[j];
                assert!((a[[k, j]] - expected).abs() <= 1e-5 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn gradient_direction_errors() {
        let f = Array2::<f64>::eye(3);
        assert!(matches!(
            fit_gradient_direction(f.view(), Array2::zeros((3, 2)).view(), 0.0),
            Err(Error::ZeroGradient)
        ));
        let mut f = Array2::<f64>::ones((4, 2));
        f[[0, 0]] = 1.0;
        assert!(matches!(
            fit_gradient_direction(f.view(), Array2::ones((4, 1)).view(), 0.0),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn mse_line_search_cases() {
        let mut rng = rng_from_seed(7);
        let phi = random(8, 2, &mut rng);
        let head = random_head(2, 1, &mut rng);
        let exact = Targets::Continuous(head.logits(phi.view()));
        let dir = random(8, 2, &mut rng);
        assert_eq!(line_search(LossKind::Mse, &head, phi.view(), dir.view(), &exact).unwrap(), 0.0);

        // Pick y so that the unit step lands exactly on it.
        let y = Targets::Continuous(head.logits((&phi + &dir).view()));
        let alpha = line_search(LossKind::Mse, &head, phi.view(), dir.view(), &y).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12);

        let neg = dir.mapv(|v| -v);
        assert_eq!(line_search(LossKind::Mse, &head, phi.view(), neg.view(), &y).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_line_search_beats_grid() {
        let mut rng = rng_from_seed(8);
        for kind in [LossKind::Cce { classes: 3 }, LossKind::Bce] {
            for _ in 0..10 {
                let phi = random(12, 3, &mut rng);
                let (targets, d) = match kind {
                    LossKind::Bce => (random_labels(12, 2, &mut rng), 1),
                    _ => (random_labels(12, 3, &mut rng), 3),
                };
                let head = random_head(3, d, &mut rng);
                let g = functional_gradient(kind, &head, phi.view(), &targets).unwrap();
                let dir = g.mapv(|v| -v);
                let alpha = line_search(kind, &head, phi.view(), dir.view(), &targets).unwrap();
                assert!(alpha > 0.0);
                let risk = |a: f64| empirical_risk(kind, &head, (&phi + &(&dir * a)).view(), &targets).unwrap();
                let best = risk(alpha);
                for k in 0..=1000 {
                    assert!(best <= risk(4.0 * alpha * k as f64 / 1000.0) + 1e-8);
                }
                assert!(best <= risk(alpha + 1e-4) && best <= risk((alpha - 1e-4).max(0.0)));
            }
        }
    }

    #[test]
    fn mse_head_identity_design() {
        let mut rng = rng_from_seed(9);
        let y = random(5, 2, &mut rng);
        let m = ridge_solve(Array2::<f64>::eye(5).view(), y.view(), 0.0).unwrap();
        assert!(frobenius((&m - &y).view()) < 1e-12);
        // With the unpenalized intercept the head still interpolates.
        let fit = fit_top_linear(LossKind::Mse, Array2::<f64>::eye(5).view(), &Targets::Continuous(y.clone()), 1e-12, None)
            .unwrap();
        let pred = fit.head.logits(Array2::<f64>::eye(5).view());
        assert!(frobenius((&pred - &y).view()) < 1e-6);
    }

    #[test]
    fn separable_classification_fits_exactly() {
        let phi = array![[-2.0, 0.1], [-1.5, -0.3], [-1.0, 0.4], [1.0, 0.2], [1.4, -0.5], [2.2, 0.0]];
        let targets = Targets::labels(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let kind = LossKind::Cce { classes: 2 };
        let fit = fit_top_linear(kind, phi.view(), &targets, 1e-4, None).unwrap();
        let probs = probabilities(kind, fit.head.logits(phi.view()).view());
        for (i, row) in probs.outer_iter().enumerate() {
            let pred = if row[1] > row[0] { 1 } else { 0 };
            assert_eq!(pred, usize::from(i >= 3));
        }
        assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cce_head_matches_slow_gradient_descent() {
        let mut rng = rng_from_seed(10);
        let (n, width, k) = (15, 3, 3);
        let phi = random(n, width, &mut rng);
        let targets = random_labels(n, k, &mut rng);
        let kind = LossKind::Cce { classes: k };
        let lambda = 1e-2;
        let fit = fit_top_linear(kind, phi.view(), &targets, lambda, None).unwrap();
        assert!(fit.converged);
        let fitted = head_objective(kind, &fit.head, phi.view(), &targets, lambda).unwrap();

        let mut head = LinearHead::zeros(width, k);
        let onehot = targets.to_matrix();
        let step = 0.05;
        for _ in 0..1_000_000 {
            let probs = probabilities(kind, head.logits(phi.view()).view());
            let dl = &probs - &onehot;
            let gw = phi.t().dot(&dl) / n as f64 + &head.weights * (2.0 * lambda);
            let gb = dl.sum_axis(Axis(0)) / n as f64;
            head.weights -= &(gw * step);
            head.bias -= &(gb * step);
        }
        let slow = head_objective(kind, &head, phi.view(), &targets, lambda).unwrap();
        assert!((fitted - slow).abs() <= 1e-6, "{fitted} vs {slow}");
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let mut rng = rng_from_seed(11);
        let phi = random(30, 2, &mut rng);
        let targets = random_labels(30, 3, &mut rng);
        let kind = LossKind::Cce { classes: 3 };
        let cold = fit_top_linear(kind, phi.view(), &targets, 1e-2, None).unwrap();
        let warm_start = random_head(2, 3, &mut rng);
        let warm = fit_top_linear(kind, phi.view(), &targets, 1e-2, Some(&warm_start)).unwrap();
        let a = head_objective(kind, &cold.head, phi.view(), &targets, 1e-2).unwrap();
        let b = head_objective(kind, &warm.head, phi.view(), &targets, 1e-2).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
