//! Multiple function-on-function linear regression through principal
//! component scores.
//!
//! Every response score column `k ≤ K` is regressed by ordinary least squares
//! on the first `L` score columns of each predictor (plus an optional
//! intercept). Predicted response curves are rebuilt as
//! `ŷ = ȳ + Σ_k ξ̂_k f_k^y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{FunctionalDataset, FunctionalDatum};
use crate::error::{FdaError, Result};
use crate::fpca::{fpca_fit_with, project_scores, FpcaModel, FpcaOptions, Metric};
use crate::linalg::least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MfflrConfig {
    /// Number of response components modelled (`K`).
    pub response_components: usize,
    /// Number of components taken from every predictor (`L`).
    pub predictor_components: usize,
    pub include_intercept: bool,
    #[serde(default)]
    pub metric: Metric,
}

impl Default for MfflrConfig {
    fn default() -> Self {
        MfflrConfig::reduced()
    }
}

impl MfflrConfig {
    /// First response component on the first component of every predictor,
    /// with intercept.
    pub fn reduced() -> Self {
        MfflrConfig {
            response_components: 1,
            predictor_components: 1,
            include_intercept: true,
            metric: Metric::L2,
        }
    }

    pub fn new(k: usize, l: usize) -> Self {
        MfflrConfig {
            response_components: k,
            predictor_components: l,
            ..MfflrConfig::reduced()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.response_components == 0 || self.predictor_components == 0 {
            return Err(FdaError::InvalidArgument(
                "K and L must both be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfflrModel {
    pub config: MfflrConfig,
    pub response_fpca: FpcaModel,
    pub predictor_fpcas: Vec<FpcaModel>,
    pub predictor_names: Vec<String>,
    /// Predictors with zero variance are left out of the design.
    pub active_predictors: Vec<bool>,
    /// `K × (1 + J·L)`: intercept, then predictor-major blocks of `L`.
    #[serde(with = "crate::serde_matrix")]
    pub coeffs: DMatrix<f64>,
    /// OLS standard errors in the layout of `coeffs`; zero when the fit has
    /// no residual degrees of freedom.
    #[serde(with = "crate::serde_matrix")]
    pub std_errors: DMatrix<f64>,
    pub residual_variance: Vec<f64>,
    pub residual_dof: usize,
}

impl MfflrModel {
    pub fn num_predictors(&self) -> usize {
        self.predictor_fpcas.len()
    }

    /// Column of `coeffs` holding `b_kl` for predictor `j` (0-based) and
    /// component `l` (1-based).
    pub fn coeff_column(&self, j: usize, l: usize) -> usize {
        1 + j * self.config.predictor_components + (l - 1)
    }

    /// `b_kl^{x_j}` with 1-based `k`, `l` and 0-based `j`.
    pub fn coefficient(&self, k: usize, j: usize, l: usize) -> f64 {
        self.coeffs[(k - 1, self.coeff_column(j, l))]
    }

    pub fn intercepts(&self) -> Vec<f64> {
        self.coeffs.column(0).iter().copied().collect()
    }

    /// Coefficients of `α(t) = ȳ(t) + Σ_k γ_0k f_k^y(t)`.
    pub fn intercept_function(&self) -> FunctionalDatum {
        let k = self.config.response_components;
        let gamma = DVector::from_iterator(k, self.coeffs.column(0).iter().copied());
        let shift = self.response_fpca.harmonic_coeffs.rows(0, k).transpose() * gamma;
        FunctionalDatum {
            coeffs: self
                .response_fpca
                .mean_coeffs
                .iter()
                .zip(shift.iter())
                .map(|(m, s)| m + s)
                .collect(),
            basis: self.response_fpca.basis.clone(),
        }
    }
}

fn check_alignment(responses: Option<&FunctionalDataset>, predictors: &[FunctionalDataset]) -> Result<()> {
    let reference = responses.or(predictors.first());
    let Some(reference) = reference else {
        return Ok(());
    };
    for p in predictors {
        if p.len() != reference.len() {
            return Err(FdaError::Validation(format!(
                "predictor {} has {} curves, expected {}",
                name_of(p),
                p.len(),
                reference.len()
            )));
        }
        if p.labels != reference.labels {
            return Err(FdaError::Validation(format!(
                "predictor {} lists curves in a different order than {}",
                name_of(p),
                name_of(reference)
            )));
        }
    }
    Ok(())
}

fn name_of(d: &FunctionalDataset) -> String {
    d.variable.map_or_else(|| "<unnamed>".to_string(), |v| v.to_string())
}

/// Score design `[1 | ξ^{x_1}_{1..L} | … | ξ^{x_J}_{1..L}]` restricted to the
/// active blocks; returns the matrix and the coefficient columns it maps to.
fn design(
    config: &MfflrConfig,
    active: &[bool],
    scores: &[DMatrix<f64>],
    n: usize,
) -> (DMatrix<f64>, Vec<usize>) {
    let l = config.predictor_components;
    let mut columns = Vec::new();
    if config.include_intercept {
        columns.push(0);
    }
    for (j, is_active) in active.iter().enumerate() {
        if *is_active {
            columns.extend((0..l).map(|c| 1 + j * l + c));
        }
    }
    let x = DMatrix::from_fn(n, columns.len(), |i, c| {
        let col = columns[c];
        if col == 0 {
            1.0
        } else {
            let j = (col - 1) / l;
            scores[j][(i, (col - 1) % l)]
        }
    });
    (x, columns)
}

/// Fits the score regressions on complete training curves.
pub fn fit_mfflr(
    responses: &FunctionalDataset,
    predictors: &[FunctionalDataset],
    config: &MfflrConfig,
) -> Result<MfflrModel> {
    config.validate()?;
    if predictors.is_empty() {
        return Err(FdaError::InvalidArgument("at least one predictor is required".into()));
    }
    check_alignment(Some(responses), predictors)?;
    let n = responses.len();
    let k_count = config.response_components;
    let l_count = config.predictor_components;
    let options = FpcaOptions {
        max_components: None,
        metric: config.metric,
    };

    let response_fpca = fpca_fit_with(responses, options)?;
    if response_fpca.num_components() == 0 {
        return Err(FdaError::InvalidArgument(format!(
            "response {} has no variance around its mean; nothing to regress",
            name_of(responses)
        )));
    }
    if k_count > response_fpca.num_components() {
        return Err(FdaError::InvalidArgument(format!(
            "K = {k_count} exceeds the {} response components",
            response_fpca.num_components()
        )));
    }

    let mut predictor_fpcas = Vec::with_capacity(predictors.len());
    let mut active = Vec::with_capacity(predictors.len());
    for p in predictors {
        let model = fpca_fit_with(p, options)?;
        let rank = model.num_components();
        if rank == 0 {
            log::warn!("predictor {} has zero variance; dropped from the design", name_of(p));
            active.push(false);
        } else if rank < l_count {
            return Err(FdaError::InvalidArgument(format!(
                "L = {l_count} exceeds the {rank} components of predictor {}",
                name_of(p)
            )));
        } else {
            active.push(true);
        }
        predictor_fpcas.push(model);
    }

    let scores: Vec<DMatrix<f64>> = predictor_fpcas
        .iter()
        .map(|m| {
            if m.num_components() >= l_count {
                m.scores.columns(0, l_count).into_owned()
            } else {
                DMatrix::zeros(n, l_count)
            }
        })
        .collect();
    let (x, columns) = design(config, &active, &scores, n);
    if x.ncols() == 0 {
        return Err(FdaError::InvalidArgument(
            "no usable regressors: every predictor is constant and the intercept is disabled".into(),
        ));
    }
    if x.ncols() > n {
        return Err(FdaError::Underdetermined {
            rows: n,
            cols: x.ncols(),
        });
    }
    let dof = n - x.ncols();

    let width = 1 + predictors.len() * l_count;
    let mut coeffs = DMatrix::zeros(k_count, width);
    let mut std_errors = DMatrix::zeros(k_count, width);
    let mut residual_variance = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let y = response_fpca.scores.column(k).into_owned();
        let fit = least_squares(&x, &y, &format!("score design for response component {}", k + 1))
            .map_err(|e| relabel_singular(e, &columns, l_count))?;
        let sigma2 = if dof > 0 { fit.sse / dof as f64 } else { 0.0 };
        for (c, &col) in columns.iter().enumerate() {
            coeffs[(k, col)] = fit.coeffs[c];
            std_errors[(k, col)] = (sigma2 * fit.inverse_gram_diag[c]).sqrt();
        }
        residual_variance.push(sigma2);
    }

    Ok(MfflrModel {
        config: *config,
        response_fpca,
        predictor_fpcas,
        predictor_names: predictors.iter().map(name_of).collect(),
        active_predictors: active,
        coeffs,
        std_errors,
        residual_variance,
        residual_dof: dof,
    })
}

fn relabel_singular(err: FdaError, columns: &[usize], l: usize) -> FdaError {
    match err {
        FdaError::Singular { context, columns: bad } => FdaError::Singular {
            context: format!(
                "{context} (offending regressors: {})",
                bad.iter()
                    .map(|&c| match columns[c] {
                        0 => "intercept".to_string(),
                        col => format!("predictor {} component {}", (col - 1) / l + 1, (col - 1) % l + 1),
                    })
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            columns: bad.iter().map(|&c| columns[c]).collect(),
        },
        other => other,
    }
}

/// Predicted response scores `ξ̂_ik`, `n × K`.
pub fn predict_scores(model: &MfflrModel, new_predictors: &[FunctionalDataset]) -> Result<DMatrix<f64>> {
    if new_predictors.len() != model.num_predictors() {
        return Err(FdaError::InvalidArgument(format!(
            "model has {} predictors, {} supplied",
            model.num_predictors(),
            new_predictors.len()
        )));
    }
    check_alignment(None, new_predictors)?;
    let n = new_predictors.first().map_or(0, FunctionalDataset::len);
    let l = model.config.predictor_components;
    let mut scores = Vec::with_capacity(new_predictors.len());
    for (fpca, data) in model.predictor_fpcas.iter().zip(new_predictors) {
        let s = project_scores(fpca, data)?;
        scores.push(if s.ncols() >= l {
            s.columns(0, l).into_owned()
        } else {
            DMatrix::zeros(n, l)
        });
    }
    let mut full = DMatrix::zeros(n, model.coeffs.ncols());
    for i in 0..n {
        full[(i, 0)] = 1.0;
        for (j, s) in scores.iter().enumerate() {
            for c in 0..l {
                full[(i, 1 + j * l + c)] = s[(i, c)];
            }
        }
    }
    Ok(full * model.coeffs.transpose())
}

/// Predicted response curves `ȳ + Σ_k ξ̂_ik f_k^y` for new predictor curves.
pub fn predict_response(model: &MfflrModel, new_predictors: &[FunctionalDataset]) -> Result<FunctionalDataset> {
    let scores = predict_scores(model, new_predictors)?;
    let k = model.config.response_components;
    let fpca = &model.response_fpca;
    let mut coeffs = &scores * fpca.harmonic_coeffs.rows(0, k);
    let mean = DVector::from_column_slice(&fpca.mean_coeffs).transpose();
    for mut row in coeffs.row_iter_mut() {
        row += &mean;
    }
    let labels = new_predictors.first().map(|p| p.labels.clone()).unwrap_or_default();
    FunctionalDataset::new(fpca.basis.clone(), fpca.variable, labels, coeffs)
}

/// Estimates unobserved response curves from their predictors; the result is
/// flagged as imputed.
pub fn impute_missing(model: &MfflrModel, predictors_of_missing: &[FunctionalDataset]) -> Result<FunctionalDataset> {
    let mut out = predict_response(model, predictors_of_missing)?;
    out.imputed = true;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSurface {
    pub grid_s: Vec<f64>,
    pub grid_t: Vec<f64>,
    /// `values[(a, b)] = β(grid_s[a], grid_t[b])`.
    #[serde(with = "crate::serde_matrix")]
    pub values: DMatrix<f64>,
}

/// `β_j(s,t) = Σ_k Σ_l b_kl^{x_j} f_l^{x_j}(s) f_k^y(t)` for predictor `j`
/// (0-based).
pub fn reconstruct_beta(model: &MfflrModel, j: usize, grid_s: &[f64], grid_t: &[f64]) -> Result<BetaSurface> {
    if j >= model.num_predictors() {
        return Err(FdaError::InvalidArgument(format!(
            "predictor index {j} out of range (model has {})",
            model.num_predictors()
        )));
    }
    let k_count = model.config.response_components;
    let l_count = model.config.predictor_components;
    let x_fpca = &model.predictor_fpcas[j];
    let y_fpca = &model.response_fpca;

    let l_avail = l_count.min(x_fpca.num_components());
    // rows: components, cols: grid points
    let mut fx = DMatrix::zeros(l_avail, grid_s.len());
    for l in 0..l_avail {
        let v = x_fpca.basis.eval_coeffs(&x_fpca.harmonic(l + 1)?.coeffs, grid_s)?;
        fx.row_mut(l).copy_from_slice(&v);
    }
    let mut fy = DMatrix::zeros(k_count, grid_t.len());
    for k in 0..k_count {
        let v = y_fpca.basis.eval_coeffs(&y_fpca.harmonic(k + 1)?.coeffs, grid_t)?;
        fy.row_mut(k).copy_from_slice(&v);
    }
    // B_j: K × L block of coefficients
    let b = DMatrix::from_fn(k_count, l_avail, |k, l| model.coeffs[(k, model.coeff_column(j, l + 1))]);
    let values = fx.transpose() * b.transpose() * fy;
    Ok(BetaSurface {
        grid_s: grid_s.to_vec(),
        grid_t: grid_t.to_vec(),
        values,
    })
}

/// `∫ x(s) β_j(s, t) ds` at each `t`, by Gauss–Legendre quadrature over the
/// predictor's knot intervals with β evaluated pointwise.
pub fn integrate_beta(model: &MfflrModel, j: usize, curve: &FunctionalDatum, grid_t: &[f64]) -> Result<Vec<f64>> {
    if j >= model.num_predictors() {
        return Err(FdaError::InvalidArgument(format!("predictor index {j} out of range")));
    }
    let basis = &model.predictor_fpcas[j].basis;
    if *curve.basis != **basis {
        return Err(FdaError::BasisMismatch("curve is not on the predictor's basis".into()));
    }
    let (nodes, weights) = basis.quadrature_rule(basis.order() + 1);
    let x = basis.eval_coeffs(&curve.coeffs, &nodes)?;
    let surface = reconstruct_beta(model, j, &nodes, grid_t)?;
    let wx = DVector::from_iterator(nodes.len(), x.iter().zip(&weights).map(|(x, w)| x * w));
    Ok((surface.values.transpose() * wx).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::make_bspline_basis;
    use std::sync::Arc;

    fn toy(n: usize, seed: u64) -> (FunctionalDataset, Vec<FunctionalDataset>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let basis = Arc::new(make_bspline_basis(4, 7).unwrap());
        let labels: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
        let mut mk = || {
            let m = DMatrix::from_fn(n, 7, |_, _| rng.random_range(-1.0..1.0));
            FunctionalDataset::new(basis.clone(), None, labels.clone(), m).unwrap()
        };
        let y = mk();
        let xs = vec![mk(), mk()];
        (y, xs)
    }

    #[test]
    fn config_validation_and_shapes() {
        let (y, xs) = toy(10, 1);
        assert!(fit_mfflr(&y, &xs, &MfflrConfig::new(0, 1)).is_err());
        assert!(fit_mfflr(&y, &[], &MfflrConfig::reduced()).is_err());
        let m = fit_mfflr(&y, &xs, &MfflrConfig::new(2, 3)).unwrap();
        assert_eq!(m.coeffs.shape(), (2, 7));
        assert_eq!(m.residual_dof, 10 - 7);
    }

    #[test]
    fn underdetermined_design() {
        let (y, xs) = toy(5, 2);
        // 1 + 2·3 = 7 regressors for 5 curves
        assert!(matches!(
            fit_mfflr(&y, &xs, &MfflrConfig::new(1, 3)),
            Err(FdaError::InvalidArgument(_)) | Err(FdaError::Underdetermined { .. })
        ));
        let (y, xs) = toy(6, 2);
        assert!(matches!(
            fit_mfflr(&y, &xs, &MfflrConfig::new(1, 3)),
            Err(FdaError::Underdetermined { rows: 6, cols: 7 })
        ));
    }

    #[test]
    fn constant_response_is_rejected() {
        let (mut y, xs) = toy(8, 3);
        let row = y.coeffs.row(0).into_owned();
        for mut r in y.coeffs.row_iter_mut() {
            r.copy_from(&row);
        }
        let err = fit_mfflr(&y, &xs, &MfflrConfig::reduced()).unwrap_err();
        assert!(err.to_string().contains("no variance"), "{err}");
    }

    #[test]
    fn constant_predictor_is_dropped() {
        let (y, mut xs) = toy(8, 4);
        let row = xs[1].coeffs.row(0).into_owned();
        for mut r in xs[1].coeffs.row_iter_mut() {
            r.copy_from(&row);
        }
        let m = fit_mfflr(&y, &xs, &MfflrConfig::reduced()).unwrap();
        assert_eq!(m.active_predictors, vec![true, false]);
        assert_eq!(m.coefficient(1, 1, 1), 0.0);
        let pred = predict_response(&m, &xs).unwrap();
        assert_eq!(pred.len(), 8);
    }

    #[test]
    fn misaligned_predictors() {
        let (y, mut xs) = toy(8, 5);
        xs[0].labels.swap(0, 1);
        assert!(fit_mfflr(&y, &xs, &MfflrConfig::reduced()).is_err());
    }

    #[test]
    fn mean_predictors_give_mean_response() {
        let (y, xs) = toy(9, 6);
        let m = fit_mfflr(&y, &xs, &MfflrConfig::new(2, 2)).unwrap();
        let means: Vec<FunctionalDataset> = m
            .predictor_fpcas
            .iter()
            .map(|f| {
                let c = DMatrix::from_row_slice(1, f.mean_coeffs.len(), &f.mean_coeffs);
                FunctionalDataset::new(f.basis.clone(), None, vec!["mean".into()], c).unwrap()
            })
            .collect();
        let pred = predict_response(&m, &means).unwrap();
        for (a, b) in pred.coeffs.iter().zip(&m.response_fpca.mean_coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn imputation_flags_and_empty_input() {
        let (y, xs) = toy(9, 7);
        let m = fit_mfflr(&y, &xs, &MfflrConfig::reduced()).unwrap();
        let one: Vec<_> = xs.iter().map(|x| x.select(&["r3".to_string()]).unwrap()).collect();
        let imputed = impute_missing(&m, &one).unwrap();
        assert!(imputed.imputed);
        assert_eq!(imputed.len(), 1);
        assert_eq!(imputed.labels, vec!["r3".to_string()]);
        let none: Vec<_> = xs.iter().map(|x| x.select(&[]).unwrap()).collect();
        let empty = impute_missing(&m, &none).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn beta_zero_and_index_errors() {
        let (y, xs) = toy(9, 8);
        let mut m = fit_mfflr(&y, &xs, &MfflrConfig::reduced()).unwrap();
        assert!(reconstruct_beta(&m, 2, &[0.5], &[0.5]).is_err());
        m.coeffs.fill(0.0);
        let s = reconstruct_beta(&m, 0, &[0.0, 0.3, 1.0], &[0.1, 0.9]).unwrap();
        assert_eq!(s.values.shape(), (3, 2));
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn model_json_round_trip() {
        let (y, xs) = toy(9, 9);
        let m = fit_mfflr(&y, &xs, &MfflrConfig::new(2, 1)).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: MfflrModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
