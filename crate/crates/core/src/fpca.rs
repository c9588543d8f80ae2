//! Functional principal component analysis in coefficient space.
//!
//! With centered coefficients `Ã` (n × p) and Gram matrix `W = S S'`, the
//! covariance operator of the curves is represented by the symmetric matrix
//! `S' Ã' Ã S / (n - 1)`. Its eigenvectors `u_l` map back to harmonic
//! coefficients `b_l = S^{-T} u_l`, which are L2-orthonormal
//! (`b_k' W b_l = δ_kl`), and scores are `ξ_il = ã_i' W b_l`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSystem, FunctionalDataset, FunctionalDatum};
use crate::error::{FdaError, Result};
use crate::ingest::Variable;
use crate::linalg::GramFactor;

/// Components whose eigenvalue is at most this fraction of the total
/// variance are dropped as numerical noise.
pub const TRUNCATION_THRESHOLD: f64 = 1e-12;

/// Geometry used for the eigenproblem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// L2 inner product of the curves (Gram-aware).
    #[default]
    L2,
    /// Plain Euclidean inner product of the coefficient vectors.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FpcaOptions {
    /// `None` keeps up to `n - 1` components.
    pub max_components: Option<usize>,
    pub metric: Metric,
}

impl Default for FpcaOptions {
    fn default() -> Self {
        FpcaOptions {
            max_components: None,
            metric: Metric::L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FpcaRepr")]
pub struct FpcaModel {
    pub variable: Option<Variable>,
    pub basis: Arc<BasisSystem>,
    pub metric: Metric,
    pub labels: Vec<String>,
    pub mean_coeffs: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `r × p`; row `l` holds the coefficients of harmonic `f_l`.
    #[serde(with = "crate::serde_matrix")]
    pub harmonic_coeffs: DMatrix<f64>,
    /// `n × r`.
    #[serde(with = "crate::serde_matrix")]
    pub scores: DMatrix<f64>,
    pub var_proportions: Vec<f64>,
    /// Sum of all eigenvalues before truncation.
    pub total_variance: f64,
    pub divisor: f64,
}

#[derive(Deserialize)]
struct FpcaRepr {
    variable: Option<Variable>,
    basis: BasisSystem,
    metric: Metric,
    labels: Vec<String>,
    mean_coeffs: Vec<f64>,
    eigenvalues: Vec<f64>,
    #[serde(with = "crate::serde_matrix")]
    harmonic_coeffs: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix")]
    scores: DMatrix<f64>,
    var_proportions: Vec<f64>,
    total_variance: f64,
    divisor: f64,
}

impl TryFrom<FpcaRepr> for FpcaModel {
    type Error = FdaError;

    fn try_from(r: FpcaRepr) -> Result<Self> {
        let p = r.basis.num_basis();
        let k = r.eigenvalues.len();
        let n = r.labels.len();
        let harmonic_coeffs = if k == 0 { DMatrix::zeros(0, p) } else { r.harmonic_coeffs };
        let scores = if k == 0 { DMatrix::zeros(n, 0) } else { r.scores };
        if harmonic_coeffs.shape() != (k, p)
            || scores.shape() != (n, k)
            || r.mean_coeffs.len() != p
            || r.var_proportions.len() != k
        {
            return Err(FdaError::Validation("inconsistent FPCA model dimensions".into()));
        }
        Ok(FpcaModel {
            variable: r.variable,
            basis: Arc::new(r.basis),
            metric: r.metric,
            labels: r.labels,
            mean_coeffs: r.mean_coeffs,
            eigenvalues: r.eigenvalues,
            harmonic_coeffs,
            scores,
            var_proportions: r.var_proportions,
            total_variance: r.total_variance,
            divisor: r.divisor,
        })
    }
}

/// FPCA with default options capped at `max_components`.
pub fn fpca_fit(data: &FunctionalDataset, max_components: usize) -> Result<FpcaModel> {
    fpca_fit_with(
        data,
        FpcaOptions {
            max_components: Some(max_components),
            ..FpcaOptions::default()
        },
    )
}

pub fn fpca_fit_with(data: &FunctionalDataset, options: FpcaOptions) -> Result<FpcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(FdaError::InvalidArgument(format!(
            "FPCA needs at least 2 curves, got {n}"
        )));
    }
    let max_components = options.max_components.unwrap_or(n - 1);
    if max_components == 0 || max_components > n - 1 {
        return Err(FdaError::InvalidArgument(format!(
            "max_components must be in 1..={}, got {max_components}",
            n - 1
        )));
    }
    let basis = data.basis.clone();
    let p = basis.num_basis();
    let w = basis.gram();
    let divisor = (n - 1) as f64;

    let mean = data.coeffs.row_mean();
    let mut centered = data.coeffs.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }

    let (factor, inverse_transpose) = match options.metric {
        Metric::L2 => {
            let f = GramFactor::new(w)?;
            (f.factor, f.inverse_transpose)
        }
        Metric::Identity => (DMatrix::identity(p, p), DMatrix::identity(p, p)),
    };

    let whitened = &centered * &factor;
    let mut cov = whitened.transpose() * &whitened / divisor;
    cov = (&cov + cov.transpose()) * 0.5;
    let total_variance = cov.trace();

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let threshold = TRUNCATION_THRESHOLD * total_variance;
    let r = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > threshold && eig.eigenvalues[i] > 0.0)
        .count()
        .min(max_components)
        .min(n - 1);

    let integrals = basis.integrals();
    let mut harmonic_coeffs = DMatrix::zeros(r, p);
    let mut eigenvalues = Vec::with_capacity(r);
    for (l, &idx) in order.iter().take(r).enumerate() {
        let u = eig.eigenvectors.column(idx);
        let mut b: DVector<f64> = &inverse_transpose * u;
        orient(&mut b, &integrals);
        harmonic_coeffs.row_mut(l).copy_from(&b.transpose());
        eigenvalues.push(eig.eigenvalues[idx]);
    }

    let scores = match options.metric {
        Metric::L2 => &centered * w * harmonic_coeffs.transpose(),
        Metric::Identity => &centered * harmonic_coeffs.transpose(),
    };
    let var_proportions = eigenvalues.iter().map(|l| l / total_variance).collect();

    Ok(FpcaModel {
        variable: data.variable,
        basis,
        metric: options.metric,
        labels: data.labels.clone(),
        mean_coeffs: mean.iter().copied().collect(),
        eigenvalues,
        harmonic_coeffs,
        scores,
        var_proportions,
        total_variance,
        divisor,
    })
}

/// Sign convention: `∫ f_l ≥ 0`; when the integral vanishes, the
/// largest-magnitude coefficient is made positive.
fn orient(b: &mut DVector<f64>, integrals: &DVector<f64>) {
    let integral = b.dot(integrals);
    let flip = if integral.abs() < 1e-12 {
        let imax = b.iamax();
        b[imax] < 0.0
    } else {
        integral < 0.0
    };
    if flip {
        b.neg_mut();
    }
}

impl FpcaModel {
    pub fn num_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn mean(&self) -> FunctionalDatum {
        FunctionalDatum {
            coeffs: self.mean_coeffs.clone(),
            basis: self.basis.clone(),
        }
    }

    /// Harmonic `f_l`, 1-based.
    pub fn harmonic(&self, l: usize) -> Result<FunctionalDatum> {
        self.check_component(l)?;
        Ok(FunctionalDatum {
            coeffs: self.harmonic_coeffs.row(l - 1).iter().copied().collect(),
            basis: self.basis.clone(),
        })
    }

    fn check_component(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.num_components() {
            return Err(FdaError::InvalidArgument(format!(
                "component {l} out of range 1..={}",
                self.num_components()
            )));
        }
        Ok(())
    }

    /// Coefficients of the mean plus the first `k` score-weighted harmonics
    /// for every training curve.
    pub fn reconstruct(&self, k: usize) -> Result<DMatrix<f64>> {
        if k > self.num_components() {
            return Err(FdaError::InvalidArgument(format!(
                "cannot reconstruct with {k} of {} components",
                self.num_components()
            )));
        }
        let mut out = self.scores.columns(0, k) * self.harmonic_coeffs.rows(0, k);
        let mean = DVector::from_column_slice(&self.mean_coeffs).transpose();
        for mut row in out.row_iter_mut() {
            row += &mean;
        }
        Ok(out)
    }
}

/// Cumulative share of variance explained by the first `k` components.
pub fn explained_variance(model: &FpcaModel, k: usize) -> Result<f64> {
    if k == 0 || k > model.num_components() {
        return Err(FdaError::InvalidArgument(format!(
            "k = {k} out of range 1..={}",
            model.num_components()
        )));
    }
    Ok(model.var_proportions[..k].iter().sum())
}

/// Scores of new curves against a fitted model: `(a_i - mean)' W b_l`.
pub fn project_scores(model: &FpcaModel, new_data: &FunctionalDataset) -> Result<DMatrix<f64>> {
    if *new_data.basis != *model.basis {
        return Err(FdaError::BasisMismatch(format!(
            "new curves use a basis of {} functions (order {}), model uses {} (order {})",
            new_data.basis.num_basis(),
            new_data.basis.order(),
            model.basis.num_basis(),
            model.basis.order()
        )));
    }
    let mean = DVector::from_column_slice(&model.mean_coeffs).transpose();
    let mut centered = new_data.coeffs.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    Ok(match model.metric {
        Metric::L2 => centered * model.basis.gram() * model.harmonic_coeffs.transpose(),
        Metric::Identity => centered * model.harmonic_coeffs.transpose(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationCurves {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub component_index: usize,
    pub multiplier: f64,
}

/// Mean curve and `mean ± c·√λ_l·f_l` on `grid`.
pub fn perturbation_curves(model: &FpcaModel, l: usize, c: f64, grid: &[f64]) -> Result<PerturbationCurves> {
    model.check_component(l)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(FdaError::InvalidArgument(format!(
            "perturbation multiplier must be positive, got {c}"
        )));
    }
    let mean = model.basis.eval_coeffs(&model.mean_coeffs, grid)?;
    let harmonic = model.basis.eval_coeffs(&model.harmonic(l)?.coeffs, grid)?;
    let step = c * model.eigenvalues[l - 1].sqrt();
    let plus = mean.iter().zip(&harmonic).map(|(m, h)| m + step * h).collect();
    let minus = mean.iter().zip(&harmonic).map(|(m, h)| m - step * h).collect();
    Ok(PerturbationCurves {
        grid: grid.to_vec(),
        mean,
        plus,
        minus,
        component_index: l,
        multiplier: c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScorePair {
    pub label: String,
    pub score_i: f64,
    pub score_j: f64,
}

/// Per-curve scores on components `i` and `j` (1-based).
pub fn score_pairs(model: &FpcaModel, i: usize, j: usize) -> Result<Vec<ScorePair>> {
    model.check_component(i)?;
    model.check_component(j)?;
    Ok(model
        .labels
        .iter()
        .enumerate()
        .map(|(row, label)| ScorePair {
            label: label.clone(),
            score_i: model.scores[(row, i - 1)],
            score_j: model.scores[(row, j - 1)],
        })
        .collect())
}
