//! Train/test splits, curve MSE, count tables and the synthetic data
//! generator used to check regression recovery.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{make_bspline_basis, BasisSystem, FunctionalDataset, FunctionalDatum};
use crate::error::{FdaError, Result};
use crate::ffreg::{predict_response, MfflrModel};
use crate::ingest::{PopulationTable, ScaledSeries, Variable, PER_CAPITA_BASE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_regions: BTreeSet<String>,
    pub train_regions: BTreeSet<String>,
}

impl SplitSpec {
    /// Splits `all_regions` into the named test regions and the rest.
    pub fn new<'a>(
        all_regions: impl IntoIterator<Item = &'a str>,
        test_regions: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let all: BTreeSet<String> = all_regions.into_iter().map(str::to_string).collect();
        let test: BTreeSet<String> = test_regions.into_iter().map(str::to_string).collect();
        let unknown: Vec<&str> = test.iter().filter(|r| !all.contains(*r)).map(String::as_str).collect();
        if !unknown.is_empty() {
            return Err(FdaError::Validation(format!(
                "test regions not present in the data: {}",
                unknown.join(", ")
            )));
        }
        let train = all.difference(&test).cloned().collect();
        Ok(SplitSpec {
            test_regions: test,
            train_regions: train,
        })
    }

    pub fn train(&self) -> Vec<String> {
        self.train_regions.iter().cloned().collect()
    }

    pub fn test(&self) -> Vec<String> {
        self.test_regions.iter().cloned().collect()
    }
}

/// Mean over `grid` of the squared difference of two curves.
pub fn mse_curve(observed: &FunctionalDatum, predicted: &FunctionalDatum, grid: &[f64]) -> Result<f64> {
    if *observed.basis != *predicted.basis {
        return Err(FdaError::BasisMismatch(
            "observed and predicted curves use different bases".into(),
        ));
    }
    if grid.is_empty() {
        return Err(FdaError::InvalidArgument("MSE grid is empty".into()));
    }
    let a = observed.basis.eval_coeffs(&observed.coeffs, grid)?;
    let b = predicted.basis.eval_coeffs(&predicted.coeffs, grid)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / grid.len() as f64)
}

/// Per-100k values back to whole persons, rounded, negatives clamped to 0.
pub fn rescale_to_counts(curve_values: &[f64], region: &str, pop: &PopulationTable) -> Result<Vec<u64>> {
    let population = pop.get(region)? as f64;
    Ok(curve_values
        .iter()
        .map(|v| (v * population / PER_CAPITA_BASE).round().max(0.0) as u64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsPredRow {
    pub date: NaiveDate,
    pub region: String,
    pub variable: Variable,
    pub observed: u64,
    pub predicted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Response variables, in the column order of `per_region_mse`.
    pub variables: Vec<Variable>,
    /// Training region → MSE per response variable, (persons per 100k)².
    pub per_region_mse: BTreeMap<String, Vec<f64>>,
    pub predicted_vs_observed: Vec<ObsPredRow>,
}

/// Everything [`prediction_table`] needs besides the fitted models.
pub struct PredictionInputs<'a> {
    /// Smoothed curves of every variable for all regions.
    pub smoothed: &'a BTreeMap<Variable, FunctionalDataset>,
    /// Scaled observations of the response variables.
    pub observed: &'a [ScaledSeries],
    pub population: &'a PopulationTable,
    /// Grid for curve MSE; defaults to the observation points.
    pub mse_grid: Option<&'a [f64]>,
}

/// Predictions for every region from one response model.
#[derive(Debug, Clone)]
pub struct ResponsePrediction {
    pub variable: Variable,
    pub train: FunctionalDataset,
    pub test: FunctionalDataset,
}

/// Train-region MSE table and test-region observed/predicted counts.
pub fn prediction_table(
    models: &[(Variable, &MfflrModel)],
    split: &SplitSpec,
    inputs: &PredictionInputs<'_>,
) -> Result<(EvaluationReport, Vec<ResponsePrediction>)> {
    let train = split.train();
    let test = split.test();

    let mut missing = BTreeSet::new();
    for (variable, model) in models {
        let needed = model
            .predictor_fpcas
            .iter()
            .filter_map(|f| f.variable)
            .chain(std::iter::once(*variable));
        for v in needed {
            match inputs.smoothed.get(&v) {
                None => {
                    missing.insert(format!("<all regions: no smoothed {v}>"));
                }
                Some(ds) => {
                    for r in train.iter().chain(&test) {
                        if ds.index_of(r).is_none() {
                            missing.insert(r.clone());
                        }
                    }
                }
            }
        }
        for r in &test {
            if !inputs.observed.iter().any(|s| s.region == *r && s.variable == *variable) {
                missing.insert(r.clone());
            }
            if inputs.population.get(r).is_err() {
                missing.insert(r.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Err(FdaError::Validation(format!(
            "missing data for regions: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let mut per_region_mse: BTreeMap<String, Vec<f64>> =
        train.iter().map(|r| (r.clone(), Vec::with_capacity(models.len()))).collect();
    let mut rows = Vec::new();
    let mut predictions = Vec::with_capacity(models.len());

    for (variable, model) in models {
        let predictors_for = |regions: &[String]| -> Result<Vec<FunctionalDataset>> {
            model
                .predictor_fpcas
                .iter()
                .map(|f| {
                    let v = f.variable.ok_or_else(|| {
                        FdaError::Validation("predictor model has no variable".into())
                    })?;
                    inputs.smoothed[&v].select(regions)
                })
                .collect()
        };
        let observed_curves = inputs.smoothed[variable].select(&train)?;
        let pred_train = predict_response(model, &predictors_for(&train)?)?;
        let pred_test = predict_response(model, &predictors_for(&test)?)?;

        for (i, region) in train.iter().enumerate() {
            let grid: Vec<f64> = match inputs.mse_grid {
                Some(g) => g.to_vec(),
                None => observation_grid(inputs.observed, region, *variable)
                    .ok_or_else(|| FdaError::Validation(format!("no observations for {region}/{variable}")))?,
            };
            let mse = mse_curve(&observed_curves.curve(i), &pred_train.curve(i), &grid)?;
            per_region_mse.get_mut(region).expect("train region").push(mse);
        }

        for (i, region) in test.iter().enumerate() {
            let series = inputs
                .observed
                .iter()
                .find(|s| s.region == *region && s.variable == *variable)
                .expect("checked above");
            let observed = rescale_to_counts(&series.values, region, inputs.population)?;
            let values = pred_test.basis.eval_coeffs(&pred_test.curve(i).coeffs, &series.grid.points)?;
            let predicted = rescale_to_counts(&values, region, inputs.population)?;
            for ((date, obs), pred) in series.grid.dates.iter().zip(observed).zip(predicted) {
                rows.push(ObsPredRow {
                    date: *date,
                    region: region.clone(),
                    variable: *variable,
                    observed: obs,
                    predicted: pred,
                });
            }
        }
        predictions.push(ResponsePrediction {
            variable: *variable,
            train: pred_train,
            test: pred_test,
        });
    }

    Ok((
        EvaluationReport {
            variables: models.iter().map(|(v, _)| *v).collect(),
            per_region_mse,
            predicted_vs_observed: rows,
        },
        predictions,
    ))
}

fn observation_grid(observed: &[ScaledSeries], region: &str, variable: Variable) -> Option<Vec<f64>> {
    observed
        .iter()
        .find(|s| s.region == region && s.variable == variable)
        .or_else(|| observed.iter().find(|s| s.region == region))
        .map(|s| s.grid.points.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub predictors: usize,
    pub response_components: usize,
    pub predictor_components: usize,
    pub noise_sd: f64,
    pub seed: u64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_num_basis")]
    pub num_basis: usize,
}

fn default_order() -> usize {
    4
}

fn default_num_basis() -> usize {
    20
}

impl SyntheticSpec {
    pub fn new(n: usize, predictors: usize, k: usize, l: usize, noise_sd: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            predictors,
            response_components: k,
            predictor_components: l,
            noise_sd,
            seed,
            order: default_order(),
            num_basis: default_num_basis(),
        }
    }

    /// Components carried by each synthetic predictor: the `L*` used by the
    /// response plus up to two that are not.
    pub fn predictor_rank(&self) -> usize {
        (self.predictor_components + 2).min(self.n - 1).min(self.num_basis)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub responses: FunctionalDataset,
    /// Responses before score noise was added.
    pub clean_responses: FunctionalDataset,
    pub predictors: Vec<FunctionalDataset>,
    /// `K* × (1 + J·L*)` in the layout of [`MfflrModel::coeffs`].
    pub true_coeffs: DMatrix<f64>,
}

/// Response score variances, well separated so that the response
/// components are identifiable.
fn response_variance(k: usize) -> f64 {
    4.0 * 0.25_f64.powi(k as i32)
}

fn predictor_variance(l: usize, scale: f64) -> f64 {
    scale * 0.55_f64.powi(l as i32)
}

/// Draws predictor curves with known principal components, builds response
/// scores as a linear function of predictor scores plus Gaussian noise, and
/// assembles response curves from them. Deterministic in `seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let SyntheticSpec {
        n,
        predictors: j_count,
        response_components: k_count,
        predictor_components: l_count,
        noise_sd,
        seed,
        order,
        num_basis,
    } = *spec;
    if j_count == 0 || k_count == 0 || l_count == 0 {
        return Err(FdaError::InvalidArgument("J, K* and L* must be positive".into()));
    }
    if n <= j_count * l_count + 1 {
        return Err(FdaError::InvalidArgument(format!(
            "n = {n} must exceed J·L* + 1 = {}",
            j_count * l_count + 1
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(FdaError::InvalidArgument(format!("noise_sd must be non-negative, got {noise_sd}")));
    }
    let basis = Arc::new(make_bspline_basis(order, num_basis)?);
    let p = basis.num_basis();
    if l_count > p || k_count > p || k_count > n - 1 {
        return Err(FdaError::InvalidArgument(format!(
            "{p} basis functions cannot carry K* = {k_count} / L* = {l_count} components for n = {n}"
        )));
    }
    let q = spec.predictor_rank();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (0..n).map(|i| format!("s{i:04}")).collect();

    let mut predictors = Vec::with_capacity(j_count);
    let mut design_blocks = Vec::with_capacity(j_count);
    for _ in 0..j_count {
        let harmonics = random_orthonormal_functions(&basis, q, &mut rng);
        let scale = rng.random_range(0.5..2.0);
        let scores = random_orthogonal_scores(n, q, &mut rng, |l| predictor_variance(l, scale));
        let mean = DVector::from_fn(p, |_, _| rng.random_range(0.0..3.0));
        let coeffs = assemble(&mean, &scores, &harmonics);
        design_blocks.push(scores.columns(0, l_count).into_owned());
        predictors.push(FunctionalDataset::new(basis.clone(), None, labels.clone(), coeffs)?);
    }

    // η = Z B', rotated to uncorrelated columns and scaled to fixed variances
    let z = DMatrix::from_fn(n, j_count * l_count, |i, c| design_blocks[c / l_count][(i, c % l_count)]);
    let b = DMatrix::from_fn(k_count, j_count * l_count, |_, _| normal(&mut rng));
    let eta = &z * b.transpose();
    let cov = eta.transpose() * &eta / (n - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut idx: Vec<usize> = (0..k_count).collect();
    idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    if eig.eigenvalues[idx[k_count - 1]] <= 1e-10 * eig.eigenvalues[idx[0]].max(f64::MIN_POSITIVE) {
        return Err(FdaError::InvalidArgument(
            "synthetic response scores are degenerate; increase J·L*".into(),
        ));
    }
    let mut true_coeffs = DMatrix::zeros(k_count, 1 + j_count * l_count);
    let mut clean_scores = DMatrix::zeros(n, k_count);
    for (k, &e) in idx.iter().enumerate() {
        let v = eig.eigenvectors.column(e);
        let s = (response_variance(k) / eig.eigenvalues[e]).sqrt();
        let bk = b.transpose() * v * s;
        for c in 0..bk.len() {
            true_coeffs[(k, 1 + c)] = bk[c];
        }
        clean_scores.set_column(k, &(&eta * v * s));
    }

    let mut noise = DMatrix::from_fn(n, k_count, |_, _| noise_sd * normal(&mut rng));
    for mut col in noise.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let response_harmonics = random_orthonormal_functions(&basis, k_count, &mut rng);
    let response_mean = DVector::from_fn(p, |_, _| rng.random_range(0.0..3.0));

    let clean = assemble(&response_mean, &clean_scores, &response_harmonics);
    let noisy = assemble(&response_mean, &(&clean_scores + noise), &response_harmonics);
    Ok(SyntheticData {
        responses: FunctionalDataset::new(basis.clone(), None, labels.clone(), noisy)?,
        clean_responses: FunctionalDataset::new(basis, None, labels, clean)?,
        predictors,
        true_coeffs,
    })
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn assemble(mean: &DVector<f64>, scores: &DMatrix<f64>, harmonics: &DMatrix<f64>) -> DMatrix<f64> {
    let mut coeffs = scores * harmonics;
    let mean_t = mean.transpose();
    for mut row in coeffs.row_iter_mut() {
        row += &mean_t;
    }
    coeffs
}

/// `count × p` coefficient rows, orthonormal in the basis' L2 inner product,
/// each with a clearly positive integral.
fn random_orthonormal_functions(basis: &BasisSystem, count: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let p = basis.num_basis();
    let w = basis.gram();
    let integrals = basis.integrals();
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(count);
    while rows.len() < count {
        let mut v = DVector::from_fn(p, |_, _| normal(rng));
        for _ in 0..2 {
            for r in &rows {
                let proj = r.dot(&(w * &v));
                v -= r * proj;
            }
        }
        let norm = v.dot(&(w * &v)).sqrt();
        if norm < 1e-6 {
            continue;
        }
        v /= norm;
        let integral = v.dot(&integrals);
        if integral.abs() < 1e-3 {
            continue;
        }
        if integral < 0.0 {
            v.neg_mut();
        }
        rows.push(v);
    }
    DMatrix::from_fn(count, p, |i, j| rows[i][j])
}

/// `n × q` centered, mutually orthogonal score columns with sample variances
/// `variance(l)`.
fn random_orthogonal_scores(
    n: usize,
    q: usize,
    rng: &mut ChaCha8Rng,
    variance: impl Fn(usize) -> f64,
) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, q + 1, |_, c| if c == 0 { 1.0 } else { normal(rng) });
    // Gram–Schmidt against the constant column centers the rest
    for c in 0..=q {
        for _ in 0..2 {
            for prev in 0..c {
                let proj = m.column(prev).dot(&m.column(c));
                let prev_col = m.column(prev).into_owned();
                m.column_mut(c).axpy(-proj, &prev_col, 1.0);
            }
        }
        let norm = m.column(c).norm();
        m.column_mut(c).scale_mut(1.0 / norm);
    }
    let mut scores = m.columns(1, q).into_owned();
    for l in 0..q {
        let s = (variance(l) * (n - 1) as f64).sqrt();
        scores.column_mut(l).scale_mut(s);
    }
    scores
}
