//! Evaluation pipeline for the recurrent model: per-sample spike-rate
//! features, train-fitted standardization, PCA at 95% retained variance, and
//! a multinomial logistic regression, trained by deterministic full-batch
//! gradient descent with backtracking line search.
//!
//! Test data is only ever transformed with states fitted on training data;
//! `FittedReadout` owns those states, so there is no path that refits on
//! evaluation features.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Feature rows: one sample per row, one excitatory neuron's mean rate (Hz)
/// per column.
pub type FeatureMatrix = Mat;

/// Mean firing rates in Hz from per-neuron spike counts over a stimulus
/// window of `t_image_ms` milliseconds.
pub fn aggregate_rates(counts: &[u32], t_image_ms: f64) -> Vec<f64> {
    counts.iter().map(|&c| f64::from(c) * 1000.0 / t_image_ms).collect()
}

/// Per-column mean/std state fitted on training features. Zero-variance
/// columns standardize to zero with a unit divisor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics over the rows of `train`.
    pub fn fit(train: &Mat) -> Result<Self> {
        if train.rows < 2 {
            return Err(Error::InvalidInput("standardizer needs at least 2 samples".into()));
        }
        let n = train.rows as f64;
        let mut mean = vec![0.0; train.cols];
        for r in 0..train.rows {
            for (m, v) in mean.iter_mut().zip(train.row(r)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; train.cols];
        for r in 0..train.rows {
            for (c, v) in train.row(r).iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, m: &Mat) -> Result<Mat> {
        if m.cols != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} columns, applied to {}",
                self.mean.len(),
                m.cols
            )));
        }
        let mut out = m.clone();
        for r in 0..out.rows {
            let base = r * out.cols;
            for c in 0..out.cols {
                out.data[base + c] = (out.data[base + c] - self.mean[c]) / self.std[c];
            }
        }
        Ok(out)
    }
}

/// Retained PCA basis (components as rows), the full explained-variance
/// spectrum, and the retained count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaState {
    /// k x d matrix; row j is the j-th principal direction.
    pub components: Mat,
    /// All d eigenvalues of the train covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Per-component explained-variance ratios (all d of them).
    pub explained_variance_ratio: Vec<f64>,
    pub k: usize,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns), unsorted.
fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let d = a.rows;
    let mut m = a.data.clone();
    let mut v = Mat::zeros(d, d);
    for i in 0..d {
        *v.at_mut(i, i) = 1.0;
    }
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                s += m[p * d + q] * m[p * d + q];
            }
        }
        s
    };
    let scale: f64 = (0..d).map(|i| m[i * d + i].abs()).sum::<f64>().max(1e-300);
    for _sweep in 0..100 {
        if off(&m).sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..d {
                    let aip = m[i * d + p];
                    let aiq = m[i * d + q];
                    m[i * d + p] = c * aip - s * aiq;
                    m[i * d + q] = s * aip + c * aiq;
                }
                for i in 0..d {
                    let api = m[p * d + i];
                    let aqi = m[q * d + i];
                    m[p * d + i] = c * api - s * aqi;
                    m[q * d + i] = s * api + c * aqi;
                }
                for i in 0..d {
                    let vip = v.at(i, p);
                    let viq = v.at(i, q);
                    *v.at_mut(i, p) = c * vip - s * viq;
                    *v.at_mut(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    let eigenvalues = (0..d).map(|i| m[i * d + i]).collect();
    (eigenvalues, v)
}

/// Spectral decomposition of the (n-1)-normalized covariance of already
/// standardized training features; keeps the smallest basis reaching 95%
/// cumulative explained variance.
pub fn pca_fit(standardized_train: &Mat) -> Result<PcaState> {
    pca_fit_with_target(standardized_train, 0.95)
}

pub fn pca_fit_with_target(standardized_train: &Mat, variance_target: f64) -> Result<PcaState> {
    let (n, d) = (standardized_train.rows, standardized_train.cols);
    if n < 2 {
        return Err(Error::InvalidInput("pca needs at least 2 rows".into()));
    }
    if !standardized_train.is_finite() {
        return Err(Error::Numeric("pca input contains non-finite values".into()));
    }
    // column means are ~0 after standardization, but don't rely on it
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(standardized_train.row(r)) {
            *m += v / n as f64;
        }
    }
    let mut cov = Mat::zeros(d, d);
    for r in 0..n {
        let row = standardized_train.row(r);
        for i in 0..d {
            let di = row[i] - mean[i];
            if di == 0.0 {
                continue;
            }
            for j in i..d {
                *cov.at_mut(i, j) += di * (row[j] - mean[j]);
            }
        }
    }
    let norm = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.at(i, j) / norm;
            *cov.at_mut(i, j) = v;
            *cov.at_mut(j, i) = v;
        }
    }

    let (mut eigenvalues, vectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    eigenvalues = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();

    let total: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|&l| l / total).collect()
    } else {
        vec![0.0; d]
    };
    let mut k = d.max(1);
    if total > 0.0 {
        let mut cum = 0.0;
        for (i, r) in explained_variance_ratio.iter().enumerate() {
            cum += r;
            if cum >= variance_target - 1e-12 {
                k = i + 1;
                break;
            }
        }
    } else {
        k = 1;
    }

    let mut components = Mat::zeros(k, d);
    for (row, &col) in order.iter().take(k).enumerate() {
        for i in 0..d {
            *components.at_mut(row, i) = vectors.at(i, col);
        }
    }
    Ok(PcaState { components, eigenvalues, explained_variance_ratio, k })
}

/// Project feature rows onto the retained basis.
pub fn pca_apply(state: &PcaState, m: &Mat) -> Result<Mat> {
    if m.cols != state.components.cols {
        return Err(Error::Shape(format!(
            "pca fitted on {} columns, applied to {}",
            state.components.cols, m.cols
        )));
    }
    let mut out = Mat::zeros(m.rows, state.k);
    for r in 0..m.rows {
        let row = m.row(r);
        for j in 0..state.k {
            out.data[r * state.k + j] =
                state.components.row(j).iter().zip(row).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlrModel {
    /// class_count x feature_count
    pub weights: Mat,
    pub bias: Vec<f64>,
    pub class_count: usize,
    /// False when the gradient tolerance was not reached within max_iters;
    /// carried as a warning, not an error.
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after every accepted step (including the initial one).
    pub loss_history: Vec<f64>,
}

fn softmax_into(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Regularized softmax cross-entropy and its gradient at (w, b):
/// mean CE over rows plus 0.5·reg·‖w‖² (bias unpenalized).
pub fn mlr_loss_and_grad(
    w: &Mat,
    b: &[f64],
    x: &Mat,
    labels: &[u8],
    reg: f64,
) -> Result<(f64, Mat, Vec<f64>)> {
    let classes = w.rows;
    if b.len() != classes || x.rows != labels.len() || w.cols != x.cols {
        return Err(Error::Shape("mlr loss: inconsistent shapes".into()));
    }
    let n = x.rows as f64;
    let mut loss = 0.0;
    let mut gw = Mat::zeros(classes, w.cols);
    let mut gb = vec![0.0; classes];
    let mut scores = vec![0.0; classes];
    for r in 0..x.rows {
        let row = x.row(r);
        for c in 0..classes {
            scores[c] = b[c] + w.row(c).iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logsum = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln() + max;
        let y = labels[r] as usize;
        loss += (logsum - scores[y]) / n;
        softmax_into(&mut scores);
        for c in 0..classes {
            let delta = scores[c] - if c == y { 1.0 } else { 0.0 };
            gb[c] += delta / n;
            if delta != 0.0 {
                let grow = &mut gw.data[c * x.cols..(c + 1) * x.cols];
                for (g, v) in grow.iter_mut().zip(row) {
                    *g += delta * v / n;
                }
            }
        }
    }
    loss += 0.5 * reg * w.data.iter().map(|v| v * v).sum::<f64>();
    for (g, wv) in gw.data.iter_mut().zip(&w.data) {
        *g += reg * wv;
    }
    Ok((loss, gw, gb))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MlrConfig {
    pub reg_strength: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for MlrConfig {
    fn default() -> Self {
        MlrConfig { reg_strength: 1e-4, max_iters: 2000, grad_tol: 1e-5 }
    }
}

/// Full-batch gradient descent with Armijo backtracking from a zero start.
pub fn mlr_train(x: &Mat, labels: &[u8], cfg: &MlrConfig) -> Result<MlrModel> {
    if x.rows == 0 || x.rows != labels.len() {
        return Err(Error::Shape("mlr_train: rows and labels must match".into()));
    }
    let class_count = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut per_class = vec![0usize; class_count];
    for &l in labels {
        per_class[l as usize] += 1;
    }
    if per_class.contains(&0) {
        return Err(Error::InvalidInput("every class needs at least one sample".into()));
    }

    let mut w = Mat::zeros(class_count, x.cols);
    let mut b = vec![0.0; class_count];
    let (mut loss, mut gw, mut gb) = mlr_loss_and_grad(&w, &b, x, labels, cfg.reg_strength)?;
    let mut loss_history = vec![loss];
    let mut step = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let grad_sq: f64 =
            gw.data.iter().map(|g| g * g).sum::<f64>() + gb.iter().map(|g| g * g).sum::<f64>();
        let grad_norm = grad_sq.sqrt();
        if grad_norm <= cfg.grad_tol * (1.0 + w.frobenius_norm()) {
            converged = true;
            break;
        }

        // Armijo backtracking on f(θ - t·g) <= f(θ) - c·t·‖g‖²
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let mut wt = w.clone();
            for (wv, g) in wt.data.iter_mut().zip(&gw.data) {
                *wv -= t * g;
            }
            let bt: Vec<f64> = b.iter().zip(&gb).map(|(bv, g)| bv - t * g).collect();
            let (lt, gwt, gbt) = mlr_loss_and_grad(&wt, &bt, x, labels, cfg.reg_strength)?;
            if lt <= loss - 1e-4 * t * grad_sq {
                w = wt;
                b = bt;
                loss = lt;
                gw = gwt;
                gb = gbt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // step underflow: gradient direction no longer improves at f64
            // resolution, treat as converged-in-practice
            break;
        }
        step = (t * 2.0).min(1e4);
        iterations += 1;
        loss_history.push(loss);
    }

    Ok(MlrModel { weights: w, bias: b, class_count, converged, iterations, loss_history })
}

impl MlrModel {
    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.weights.cols {
            return Err(Error::Shape("mlr predict: feature length".into()));
        }
        Ok((0..self.class_count)
            .map(|c| {
                self.bias[c]
                    + self.weights.row(c).iter().zip(features).map(|(a, v)| a * v).sum::<f64>()
            })
            .collect())
    }

    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.scores(features)?;
        softmax_into(&mut s);
        Ok(s)
    }
}

/// Argmax class per row; ties go to the lowest index.
pub fn mlr_predict(model: &MlrModel, x: &Mat) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let scores = model.scores(x.row(r))?;
        let mut best = 0usize;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        out.push(best as u8);
    }
    Ok(out)
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[u8], actual: &[u8]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::InvalidInput(format!(
            "accuracy: {} predictions vs {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub variance_target: f64,
    pub mlr: MlrConfig,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig { variance_target: 0.95, mlr: MlrConfig::default() }
    }
}

/// Train-fitted pipeline state. Prediction can only use what was fitted.
#[derive(Debug, Clone)]
pub struct FittedReadout {
    pub standardizer: Standardizer,
    pub pca: PcaState,
    pub mlr: MlrModel,
}

pub fn fit_readout(
    train_features: &Mat,
    labels: &[u8],
    cfg: &ReadoutConfig,
) -> Result<FittedReadout> {
    let standardizer = Standardizer::fit(train_features)?;
    let standardized = standardizer.apply(train_features)?;
    let pca = pca_fit_with_target(&standardized, cfg.variance_target)?;
    let reduced = pca_apply(&pca, &standardized)?;
    let mlr = mlr_train(&reduced, labels, &cfg.mlr)?;
    Ok(FittedReadout { standardizer, pca, mlr })
}

impl FittedReadout {
    pub fn predict(&self, features: &Mat) -> Result<Vec<u8>> {
        let standardized = self.standardizer.apply(features)?;
        let reduced = pca_apply(&self.pca, &standardized)?;
        mlr_predict(&self.mlr, &reduced)
    }
}

/// Feature hand-off for external visualization: `sample_id,label,rate_1..N`.
pub fn write_features_csv<W: Write>(features: &Mat, labels: &[u8], out: &mut W) -> Result<()> {
    if features.rows != labels.len() {
        return Err(Error::Shape("features/labels length mismatch".into()));
    }
    write!(out, "sample_id,label")?;
    for c in 1..=features.cols {
        write!(out, ",rate_{c}")?;
    }
    writeln!(out)?;
    for r in 0..features.rows {
        write!(out, "{r},{}", labels[r])?;
        for v in features.row(r) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn rate_aggregation_examples() {
        assert_eq!(aggregate_rates(&[0, 0], 100.0), vec![0.0, 0.0]);
        assert_eq!(aggregate_rates(&[100], 100.0), vec![1000.0]);
        assert_eq!(aggregate_rates(&[10], 100.0), vec![100.0]);
    }

    #[test]
    fn standardize_examples() {
        let m = Mat::from_rows(vec![vec![0.0, 5.0], vec![2.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&m).unwrap();
        let out = s.apply(&m).unwrap();
        // population std of {0,2} is 1
        assert_eq!(out.row(0), &[-1.0, 0.0]);
        assert_eq!(out.row(1), &[1.0, 0.0]);
        // applying the stored state again reproduces the matrix exactly
        let again = s.apply(&m).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn pca_rank_one_keeps_one_component() {
        // variance only along (1,1)/sqrt(2)
        let rows: Vec<Vec<f64>> = (0..40).map(|i| {
            let t = i as f64 - 19.5;
            vec![t, t]
        }).collect();
        let m = Mat::from_rows(rows).unwrap();
        let state = pca_fit(&m).unwrap();
        assert_eq!(state.k, 1);
        let reduced = pca_apply(&state, &m).unwrap();
        // projection recovers the shared coordinate up to sign and sqrt(2)
        let expected = (2.0f64).sqrt();
        let ratio = reduced.at(1, 0) / (1.0 - 19.5);
        assert!((ratio.abs() - expected).abs() < 1e-9);
    }

    #[test]
    fn pca_isotropic_3d_needs_all_three() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = stream(31, "pca");
        let rows: Vec<Vec<f64>> =
            (0..3000).map(|_| (0..3).map(|_| normal.sample(&mut rng)).collect()).collect();
        let m = Mat::from_rows(rows).unwrap();
        let state = pca_fit(&m).unwrap();
        assert_eq!(state.k, 3);
        for r in &state.explained_variance_ratio {
            assert!((r - 1.0 / 3.0).abs() < 0.05);
        }
    }

    #[test]
    fn pca_basis_is_orthonormal_and_reconstruction_matches_discarded_eigenvalues() {
        let mut rng = stream(7, "pca");
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-0.3..0.3);
                let c: f64 = rng.random_range(-0.05..0.05);
                vec![
                    a + 0.1 * b,
                    a - b + c,
                    0.5 * a + b,
                    c - 0.2 * a,
                    b + 0.3 * c,
                ]
            })
            .collect();
        let m = Mat::from_rows(rows).unwrap();
        let std = Standardizer::fit(&m).unwrap().apply(&m).unwrap();
        let state = pca_fit(&std).unwrap();

        // orthonormal basis to 1e-8
        for i in 0..state.k {
            for j in 0..state.k {
                let dot: f64 = state
                    .components
                    .row(i)
                    .iter()
                    .zip(state.components.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "({i},{j}) dot {dot}");
            }
        }

        // minimal k: dropping the last component dips below target
        let cum: f64 = state.explained_variance_ratio[..state.k].iter().sum();
        assert!(cum >= 0.95 - 1e-9);
        if state.k > 1 {
            let cum_less: f64 = state.explained_variance_ratio[..state.k - 1].iter().sum();
            assert!(cum_less < 0.95);
        }

        // reconstruction error equals the discarded eigenvalue mass
        let n = std.rows;
        let reduced = pca_apply(&state, &std).unwrap();
        let mut err = 0.0;
        let mut mean = vec![0.0; std.cols];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(std.row(r)) {
                *m += v / n as f64;
            }
        }
        for r in 0..n {
            for c in 0..std.cols {
                let mut recon = mean[c];
                for j in 0..state.k {
                    recon += reduced.at(r, j) * state.components.at(j, c);
                }
                // reduced coordinates are of the uncentered rows; correct by
                // removing the projected mean
                let mut mean_proj = 0.0;
                for j in 0..state.k {
                    let mj: f64 = state
                        .components
                        .row(j)
                        .iter()
                        .zip(&mean)
                        .map(|(a, b)| a * b)
                        .sum();
                    mean_proj += mj * state.components.at(j, c);
                }
                recon -= mean_proj;
                let d = std.at(r, c) - recon;
                err += d * d;
            }
        }
        err /= (n - 1) as f64;
        let discarded: f64 = state.eigenvalues[state.k..].iter().sum();
        assert!((err - discarded).abs() < 1e-6, "err {err} vs discarded {discarded}");
    }

    /// Independent eigen oracle: power iteration with deflation.
    fn power_iteration_eigen(cov: &Mat, count: usize) -> Vec<f64> {
        let d = cov.rows;
        let mut deflated = cov.clone();
        let mut values = Vec::new();
        for _ in 0..count {
            let mut v = vec![1.0 / (d as f64).sqrt(); d];
            let mut lambda = 0.0;
            for _ in 0..20_000 {
                let w = deflated.matvec(&v).unwrap();
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-300 {
                    break;
                }
                let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
                let next_lambda: f64 =
                    deflated.matvec(&next).unwrap().iter().zip(&next).map(|(a, b)| a * b).sum();
                let done = (next_lambda - lambda).abs() <= 1e-13 * next_lambda.abs().max(1.0);
                v = next;
                lambda = next_lambda;
                if done {
                    break;
                }
            }
            values.push(lambda);
            for i in 0..d {
                for j in 0..d {
                    *deflated.at_mut(i, j) -= lambda * v[i] * v[j];
                }
            }
        }
        values
    }

    #[test]
    fn jacobi_agrees_with_power_iteration_oracle_on_small_instances() {
        let mut rng = stream(77, "eig");
        for dim in 2..=8 {
            let rows: Vec<Vec<f64>> =
                (0..60).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let m = Mat::from_rows(rows).unwrap();
            let state = pca_fit_with_target(&m, 0.999999).unwrap();

            // rebuild covariance to feed the oracle
            let n = m.rows;
            let mut mean = vec![0.0; dim];
            for r in 0..n {
                for (mu, v) in mean.iter_mut().zip(m.row(r)) {
                    *mu += v / n as f64;
                }
            }
            let mut cov = Mat::zeros(dim, dim);
            for r in 0..n {
                for i in 0..dim {
                    for j in 0..dim {
                        *cov.at_mut(i, j) +=
                            (m.at(r, i) - mean[i]) * (m.at(r, j) - mean[j]) / (n - 1) as f64;
                    }
                }
            }
            let oracle = power_iteration_eigen(&cov, dim);
            for (a, b) in state.eigenvalues.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b} at dim {dim}");
            }
            // eigen-equation residual for every retained component
            for j in 0..state.k {
                let v: Vec<f64> = state.components.row(j).to_vec();
                let cv = cov.matvec(&v).unwrap();
                for (cvi, vi) in cv.iter().zip(&v) {
                    assert!((cvi - state.eigenvalues[j] * vi).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn mlr_separates_two_clusters_perfectly() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut rng = stream(3, "mlr");
        for i in 0..60 {
            let cls = i % 2;
            let center = if cls == 0 { -2.0 } else { 2.0 };
            rows.push(vec![
                center + rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ]);
            labels.push(cls as u8);
        }
        let x = Mat::from_rows(rows).unwrap();
        let model = mlr_train(&x, &labels, &MlrConfig::default()).unwrap();
        let pred = mlr_predict(&model, &x).unwrap();
        assert_eq!(accuracy(&pred, &labels).unwrap(), 1.0);
    }

    #[test]
    fn mlr_single_class_always_predicts_it() {
        let x = Mat::from_rows(vec![vec![1.0], vec![2.0], vec![-1.0]]).unwrap();
        let labels = vec![0, 0, 0];
        let model = mlr_train(&x, &labels, &MlrConfig::default()).unwrap();
        let pred = mlr_predict(&model, &x).unwrap();
        assert_eq!(pred, vec![0, 0, 0]);
    }

    #[test]
    fn mlr_gradient_norm_small_at_optimum() {
        let mut rng = stream(8, "mlr");
        let rows: Vec<Vec<f64>> =
            (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<u8> = (0..30).map(|i| (i % 3) as u8).collect();
        let x = Mat::from_rows(rows).unwrap();
        let cfg = MlrConfig::default();
        let model = mlr_train(&x, &labels, &cfg).unwrap();
        assert!(model.converged);
        let (_, gw, gb) =
            mlr_loss_and_grad(&model.weights, &model.bias, &x, &labels, cfg.reg_strength).unwrap();
        let norm = (gw.data.iter().map(|g| g * g).sum::<f64>()
            + gb.iter().map(|g| g * g).sum::<f64>())
        .sqrt();
        assert!(norm <= 1e-5 * (1.0 + model.weights.frobenius_norm()));
    }

    #[test]
    fn mlr_loss_history_is_monotone_nonincreasing() {
        let mut rng = stream(9, "mlr");
        let rows: Vec<Vec<f64>> =
            (0..50).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<u8> = (0..50).map(|i| (i % 4) as u8).collect();
        let x = Mat::from_rows(rows).unwrap();
        let model = mlr_train(&x, &labels, &MlrConfig::default()).unwrap();
        for w in model.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn mlr_gradient_matches_central_finite_differences() {
        // 5-sample instance, relative tolerance 1e-4
        let x = Mat::from_rows(vec![
            vec![0.3, -0.7],
            vec![-1.2, 0.4],
            vec![0.9, 0.8],
            vec![-0.1, -0.2],
            vec![0.5, 0.1],
        ])
        .unwrap();
        let labels = vec![0u8, 1, 2, 1, 0];
        let mut w = Mat::zeros(3, 2);
        let mut rng = stream(10, "fd");
        for v in &mut w.data {
            *v = rng.random_range(-0.5..0.5);
        }
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
        let reg = 1e-4;
        let (_, gw, gb) = mlr_loss_and_grad(&w, &b, &x, &labels, reg).unwrap();
        let eps = 1e-6;
        for i in 0..w.data.len() {
            let mut wp = w.clone();
            wp.data[i] += eps;
            let (lp, _, _) = mlr_loss_and_grad(&wp, &b, &x, &labels, reg).unwrap();
            let mut wm = w.clone();
            wm.data[i] -= eps;
            let (lm, _, _) = mlr_loss_and_grad(&wm, &b, &x, &labels, reg).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let rel = (fd - gw.data[i]).abs() / gw.data[i].abs().max(1e-8);
            assert!(rel < 1e-4, "weight {i}: fd {fd} vs analytic {}", gw.data[i]);
        }
        for c in 0..3 {
            let mut bp = b.clone();
            bp[c] += eps;
            let (lp, _, _) = mlr_loss_and_grad(&w, &bp, &x, &labels, reg).unwrap();
            let mut bm = b.clone();
            bm[c] -= eps;
            let (lm, _, _) = mlr_loss_and_grad(&w, &bm, &x, &labels, reg).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - gb[c]).abs() / gb[c].abs().max(1e-8) < 1e-4);
        }
    }

    #[test]
    fn softmax_outputs_sum_to_one() {
        let model = MlrModel {
            weights: Mat::from_rows(vec![vec![3.0, -2.0], vec![-1.0, 0.5], vec![10.0, 4.0]])
                .unwrap(),
            bias: vec![0.1, -0.3, 2.0],
            class_count: 3,
            converged: true,
            iterations: 0,
            loss_history: vec![],
        };
        let p = model.predict_proba(&[0.4, -1.1]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn accuracy_trivials() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 3], &[3, 1, 2]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2], &[1, 3]).unwrap(), 0.5);
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn fitted_pipeline_predicts_on_unseen_rows() {
        let mut rng = stream(21, "pipe");
        let make = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for i in 0..n {
                let cls = (i % 2) as u8;
                let center = if cls == 0 { -3.0 } else { 3.0 };
                rows.push(vec![
                    center + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    0.5 * center + rng.random_range(-1.0..1.0),
                ]);
                labels.push(cls);
            }
            (Mat::from_rows(rows).unwrap(), labels)
        };
        let (train_x, train_y) = make(80, &mut rng);
        let (test_x, test_y) = make(40, &mut rng);
        let fitted = fit_readout(&train_x, &train_y, &ReadoutConfig::default()).unwrap();
        let pred = fitted.predict(&test_x).unwrap();
        assert!(accuracy(&pred, &test_y).unwrap() > 0.9);
    }

    #[test]
    fn features_csv_layout() {
        let m = Mat::from_rows(vec![vec![1.5, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&m, &[3], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sample_id,label,rate_1,rate_2\n0,3,1.5,2\n");
    }
}
