//! Clamped B-spline bases on `[0, 1]`, least-squares smoothing of discrete
//! observations and basis-count selection.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FdaError, Result};
use crate::ingest::{ScaledSeries, Variable};
use crate::linalg::{gauss_legendre, least_squares};

/// A clamped B-spline basis with equally or arbitrarily spaced interior knots.
///
/// The full knot vector repeats `0` and `1` `order` times. The Gram matrix
/// `W[i][j] = ∫ φ_i φ_j` is computed once at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BasisRepr", into = "BasisRepr")]
pub struct BasisSystem {
    order: usize,
    interior_knots: Vec<f64>,
    knots: Vec<f64>,
    gram: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    order: usize,
    num_basis: usize,
    interior_knots: Vec<f64>,
}

impl TryFrom<BasisRepr> for BasisSystem {
    type Error = FdaError;

    fn try_from(repr: BasisRepr) -> Result<Self> {
        let basis = BasisSystem::with_knots(repr.order, repr.interior_knots)?;
        if basis.num_basis() != repr.num_basis {
            return Err(FdaError::Validation(format!(
                "num_basis {} does not match order {} + {} interior knots",
                repr.num_basis,
                basis.order,
                basis.interior_knots.len()
            )));
        }
        Ok(basis)
    }
}

impl From<BasisSystem> for BasisRepr {
    fn from(b: BasisSystem) -> Self {
        BasisRepr {
            order: b.order,
            num_basis: b.num_basis(),
            interior_knots: b.interior_knots,
        }
    }
}

impl PartialEq for BasisSystem {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.interior_knots == other.interior_knots
    }
}

/// Equally spaced clamped B-splines: `num_basis - order` interior knots at
/// `i / (num_basis - order + 1)`.
pub fn make_bspline_basis(order: usize, num_basis: usize) -> Result<BasisSystem> {
    if order == 0 {
        return Err(FdaError::InvalidArgument("spline order must be at least 1".into()));
    }
    if num_basis < order {
        return Err(FdaError::InvalidArgument(format!(
            "num_basis {num_basis} is smaller than the order {order}"
        )));
    }
    let interior = num_basis - order;
    let knots = (1..=interior)
        .map(|i| i as f64 / (interior + 1) as f64)
        .collect();
    BasisSystem::with_knots(order, knots)
}

impl BasisSystem {
    pub fn with_knots(order: usize, interior_knots: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(FdaError::InvalidArgument("spline order must be at least 1".into()));
        }
        if interior_knots.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
            return Err(FdaError::InvalidArgument(
                "interior knots must lie strictly inside (0, 1)".into(),
            ));
        }
        if interior_knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FdaError::InvalidArgument(
                "interior knots must be strictly increasing".into(),
            ));
        }
        let mut knots = vec![0.0; order];
        knots.extend_from_slice(&interior_knots);
        knots.extend(std::iter::repeat_n(1.0, order));
        let mut basis = BasisSystem {
            order,
            interior_knots,
            knots,
            gram: DMatrix::zeros(0, 0),
        };
        basis.gram = basis.compute_gram();
        Ok(basis)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_basis(&self) -> usize {
        self.interior_knots.len() + self.order
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior_knots
    }

    /// Full clamped knot vector, length `num_basis + order`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `∫₀¹ φ_j(t) dt = (u_{j+order} - u_j) / order`.
    pub fn integrals(&self) -> DVector<f64> {
        let k = self.order;
        DVector::from_iterator(
            self.num_basis(),
            (0..self.num_basis()).map(|j| (self.knots[j + k] - self.knots[j]) / k as f64),
        )
    }

    /// Index `μ` of the knot span containing `t`, so that the nonzero basis
    /// functions at `t` are `μ - order + 1 ..= μ`.
    fn span(&self, t: f64) -> usize {
        let last = self.num_basis() - 1;
        if t >= 1.0 {
            return last;
        }
        // knots[order-1] == 0 and knots[num_basis] == 1
        let (mut lo, mut hi) = (self.order - 1, self.num_basis());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t >= self.knots[mid] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// The `order` possibly-nonzero basis values at `t` and the index of the
    /// first of them (triangular Cox–de Boor scheme).
    pub fn eval_local(&self, t: f64) -> Result<(usize, Vec<f64>)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(FdaError::Domain(t));
        }
        let k = self.order;
        let mu = self.span(t);
        let u = &self.knots;
        let mut values = vec![0.0; k];
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        values[0] = 1.0;
        for j in 1..k {
            left[j] = t - u[mu + 1 - j];
            right[j] = u[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((mu + 1 - k, values))
    }

    /// All `num_basis` values at `t`.
    pub fn eval_basis(&self, t: f64) -> Result<Vec<f64>> {
        let (start, local) = self.eval_local(t)?;
        let mut out = vec![0.0; self.num_basis()];
        out[start..start + local.len()].copy_from_slice(&local);
        Ok(out)
    }

    /// Design matrix `Φ[k][j] = φ_j(t_k)`.
    pub fn design_matrix(&self, ts: &[f64]) -> Result<DMatrix<f64>> {
        let mut phi = DMatrix::zeros(ts.len(), self.num_basis());
        for (row, &t) in ts.iter().enumerate() {
            let (start, local) = self.eval_local(t)?;
            for (off, v) in local.into_iter().enumerate() {
                phi[(row, start + off)] = v;
            }
        }
        Ok(phi)
    }

    /// Composite Gauss–Legendre rule with `nodes_per_interval` nodes on each
    /// non-degenerate knot interval, mapped to `[0, 1]`.
    pub fn quadrature_rule(&self, nodes_per_interval: usize) -> (Vec<f64>, Vec<f64>) {
        let (gx, gw) = gauss_legendre(nodes_per_interval);
        let mut breaks = vec![0.0];
        breaks.extend_from_slice(&self.interior_knots);
        breaks.push(1.0);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * nodes_per_interval);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wt) in gx.iter().zip(&gw) {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        (nodes, weights)
    }

    fn compute_gram(&self) -> DMatrix<f64> {
        let p = self.num_basis();
        let mut gram = DMatrix::zeros(p, p);
        // products have degree 2(order-1) <= 2*order-1
        let (nodes, weights) = self.quadrature_rule(self.order);
        for (t, w) in nodes.into_iter().zip(weights) {
            let (start, local) = self.eval_local(t).expect("quadrature nodes lie in [0, 1]");
            for (a, va) in local.iter().enumerate() {
                for (b, vb) in local.iter().enumerate() {
                    gram[(start + a, start + b)] += w * va * vb;
                }
            }
        }
        // symmetrize exactly
        let upper = gram.clone();
        for i in 0..p {
            for j in 0..i {
                let v = 0.5 * (upper[(i, j)] + upper[(j, i)]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        gram
    }

    /// L2 inner product of two coefficient vectors, `a' W b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        a.dot(&(&self.gram * b))
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.num_basis() {
            return Err(FdaError::BasisMismatch(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                self.num_basis()
            )));
        }
        Ok(())
    }

    /// Values of `Σ_j c_j φ_j(t)` at each `t`.
    pub fn eval_coeffs(&self, coeffs: &[f64], ts: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        ts.iter()
            .map(|&t| {
                let (start, local) = self.eval_local(t)?;
                Ok(local
                    .iter()
                    .zip(&coeffs[start..])
                    .map(|(v, c)| v * c)
                    .sum())
            })
            .collect()
    }
}

/// A single curve: coefficients over a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDatum {
    pub coeffs: Vec<f64>,
    pub basis: Arc<BasisSystem>,
}

impl FunctionalDatum {
    pub fn new(coeffs: Vec<f64>, basis: Arc<BasisSystem>) -> Result<Self> {
        basis.check_len(&coeffs)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FdaError::Validation("non-finite basis coefficient".into()));
        }
        Ok(FunctionalDatum { coeffs, basis })
    }
}

/// Pointwise values of a curve.
pub fn eval_curve(datum: &FunctionalDatum, ts: &[f64]) -> Result<Vec<f64>> {
    datum.basis.eval_coeffs(&datum.coeffs, ts)
}

/// `n` curves over one shared basis, stored as an `n × p` coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct FunctionalDataset {
    pub basis: Arc<BasisSystem>,
    pub variable: Option<Variable>,
    pub labels: Vec<String>,
    pub coeffs: DMatrix<f64>,
    /// Set on curves produced by imputation rather than by smoothing.
    pub imputed: bool,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    variable: Option<Variable>,
    basis: BasisSystem,
    labels: Vec<String>,
    coefficients: Vec<Vec<f64>>,
    #[serde(default)]
    imputed: bool,
}

impl TryFrom<DatasetRepr> for FunctionalDataset {
    type Error = FdaError;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        let p = r.basis.num_basis();
        let n = r.coefficients.len();
        if r.coefficients.iter().any(|row| row.len() != p) {
            return Err(FdaError::Validation(format!(
                "coefficient rows must have {p} entries"
            )));
        }
        let coeffs = DMatrix::from_fn(n, p, |i, j| r.coefficients[i][j]);
        let mut ds = FunctionalDataset::new(Arc::new(r.basis), r.variable, r.labels, coeffs)?;
        ds.imputed = r.imputed;
        Ok(ds)
    }
}

impl From<FunctionalDataset> for DatasetRepr {
    fn from(d: FunctionalDataset) -> Self {
        let coefficients = d
            .coeffs
            .row_iter()
            .map(|row| row.iter().copied().collect())
            .collect();
        DatasetRepr {
            variable: d.variable,
            basis: (*d.basis).clone(),
            labels: d.labels,
            coefficients,
            imputed: d.imputed,
        }
    }
}

impl FunctionalDataset {
    pub fn new(
        basis: Arc<BasisSystem>,
        variable: Option<Variable>,
        labels: Vec<String>,
        coeffs: DMatrix<f64>,
    ) -> Result<Self> {
        if coeffs.nrows() != labels.len() {
            return Err(FdaError::Validation(format!(
                "{} labels for {} curves",
                labels.len(),
                coeffs.nrows()
            )));
        }
        if coeffs.ncols() != basis.num_basis() {
            return Err(FdaError::BasisMismatch(format!(
                "coefficient matrix has {} columns, basis has {} functions",
                coeffs.ncols(),
                basis.num_basis()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(FdaError::Validation(format!("duplicate curve label '{dup}'")));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FdaError::Validation("non-finite basis coefficient".into()));
        }
        Ok(FunctionalDataset {
            basis,
            variable,
            labels,
            coeffs,
            imputed: false,
        })
    }

    pub fn from_curves(curves: &[FunctionalDatum], variable: Option<Variable>, labels: Vec<String>) -> Result<Self> {
        let basis = curves
            .first()
            .map(|c| c.basis.clone())
            .ok_or_else(|| FdaError::InvalidArgument("no curves".into()))?;
        if let Some(c) = curves.iter().find(|c| *c.basis != *basis) {
            return Err(FdaError::BasisMismatch(format!(
                "curve with {} basis functions differs from the first curve's basis",
                c.basis.num_basis()
            )));
        }
        let coeffs = DMatrix::from_fn(curves.len(), basis.num_basis(), |i, j| curves[i].coeffs[j]);
        FunctionalDataset::new(basis, variable, labels, coeffs)
    }

    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    pub fn curve(&self, i: usize) -> FunctionalDatum {
        FunctionalDatum {
            coeffs: self.coeffs.row(i).iter().copied().collect(),
            basis: self.basis.clone(),
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Curves whose labels appear in `labels`, in that order.
    pub fn select(&self, labels: &[String]) -> Result<FunctionalDataset> {
        let idx = labels
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| FdaError::UnknownRegion(l.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let coeffs = DMatrix::from_fn(idx.len(), self.basis.num_basis(), |i, j| self.coeffs[(idx[i], j)]);
        let mut out = FunctionalDataset::new(self.basis.clone(), self.variable, labels.to_vec(), coeffs)?;
        out.imputed = self.imputed;
        Ok(out)
    }

    /// `n × len(ts)` matrix of curve values.
    pub fn eval(&self, ts: &[f64]) -> Result<DMatrix<f64>> {
        let phi = self.basis.design_matrix(ts)?;
        Ok(&self.coeffs * phi.transpose())
    }
}

/// Result of smoothing a single series.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub datum: FunctionalDatum,
    pub residuals: Vec<f64>,
    pub mse: f64,
}

/// Least-squares coefficients for observations `(ts, ys)`, solved by QR.
pub fn fit_points(ts: &[f64], ys: &[f64], basis: &Arc<BasisSystem>) -> Result<CurveFit> {
    if ts.len() != ys.len() {
        return Err(FdaError::InvalidArgument(format!(
            "{} observation times for {} values",
            ts.len(),
            ys.len()
        )));
    }
    let p = basis.num_basis();
    if ts.len() < p {
        return Err(FdaError::Underdetermined { rows: ts.len(), cols: p });
    }
    let phi = basis.design_matrix(ts)?;
    let y = DVector::from_column_slice(ys);
    let fit = least_squares(&phi, &y, "basis design matrix (basis functions without support among the observation points)")?;
    let m = ts.len() as f64;
    Ok(CurveFit {
        datum: FunctionalDatum::new(fit.coeffs.iter().copied().collect(), basis.clone())?,
        residuals: fit.residuals.iter().copied().collect(),
        mse: fit.sse / m,
    })
}

/// Smooths one scaled series; returns the curve and its mean squared residual.
pub fn fit_least_squares(series: &ScaledSeries, basis: &Arc<BasisSystem>) -> Result<(FunctionalDatum, f64)> {
    let fit = fit_points(&series.grid.points, &series.values, basis)?;
    Ok((fit.datum, fit.mse))
}

/// Smoothing of a whole variable across regions.
#[derive(Debug, Clone)]
pub struct SmoothingFit {
    pub dataset: FunctionalDataset,
    pub per_curve_mse: Vec<f64>,
    /// `n × m` residuals at the observation points.
    pub residuals: DMatrix<f64>,
}

/// Smooths several series of one variable, all observed on the same grid.
pub fn smooth_series(series: &[&ScaledSeries], basis: &Arc<BasisSystem>) -> Result<SmoothingFit> {
    let first = series
        .first()
        .ok_or_else(|| FdaError::InvalidArgument("no series to smooth".into()))?;
    let variable = first.variable;
    let m = first.values.len();
    let mut curves = Vec::with_capacity(series.len());
    let mut mse = Vec::with_capacity(series.len());
    let mut residuals = DMatrix::zeros(series.len(), m);
    for (i, s) in series.iter().enumerate() {
        if s.variable != variable || s.grid.points != first.grid.points {
            return Err(FdaError::Validation(format!(
                "series {}/{} is not on the same grid/variable as {}/{}",
                s.region, s.variable, first.region, first.variable
            )));
        }
        let fit = fit_points(&s.grid.points, &s.values, basis)?;
        for (k, r) in fit.residuals.iter().enumerate() {
            residuals[(i, k)] = *r;
        }
        mse.push(fit.mse);
        curves.push(fit.datum);
    }
    let labels = series.iter().map(|s| s.region.clone()).collect();
    Ok(SmoothingFit {
        dataset: FunctionalDataset::from_curves(&curves, Some(variable), labels)?,
        per_curve_mse: mse,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub num_basis: usize,
    pub mse: f64,
    pub gcv: f64,
}

/// `m · SSE / (m - p)²`; infinite when `p == m`.
pub fn gcv_criterion(sse: f64, m: usize, p: usize) -> f64 {
    if p >= m {
        return f64::INFINITY;
    }
    let dof = (m - p) as f64;
    m as f64 * sse / (dof * dof)
}

/// Picks the basis size minimizing GCV over `candidates`, breaking ties
/// (equal up to rounding of the data scale) toward the smaller size.
pub fn select_basis_count(
    series: &ScaledSeries,
    order: usize,
    candidates: &[usize],
) -> Result<(usize, Vec<CandidateScore>)> {
    select_basis_count_many(&[series], order, candidates)
}

/// As [`select_basis_count`], summing the criterion over several series that
/// must share one basis.
pub fn select_basis_count_many(
    series: &[&ScaledSeries],
    order: usize,
    candidates: &[usize],
) -> Result<(usize, Vec<CandidateScore>)> {
    if candidates.is_empty() {
        return Err(FdaError::InvalidArgument("no candidate basis sizes".into()));
    }
    if series.is_empty() {
        return Err(FdaError::InvalidArgument("no series to select a basis for".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut report = Vec::with_capacity(sorted.len());
    let mut scale = 0.0;
    for &p in &sorted {
        let basis = Arc::new(make_bspline_basis(order, p)?);
        let (mut mse_sum, mut gcv_sum) = (0.0, 0.0);
        for s in series {
            let m = s.values.len();
            if p > m {
                return Err(FdaError::InvalidArgument(format!(
                    "candidate {p} exceeds the {m} observations"
                )));
            }
            let fit = fit_points(&s.grid.points, &s.values, &basis)?;
            mse_sum += fit.mse;
            gcv_sum += gcv_criterion(fit.mse * m as f64, m, p);
        }
        report.push(CandidateScore {
            num_basis: p,
            mse: mse_sum / series.len() as f64,
            gcv: gcv_sum / series.len() as f64,
        });
    }
    for s in series {
        scale += s.values.iter().map(|v| v * v).sum::<f64>() / s.values.len() as f64;
    }
    scale /= series.len() as f64;

    let best = report.iter().map(|c| c.gcv).fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * scale.max(f64::MIN_POSITIVE) + 1e-12 * best.abs();
    let chosen = report
        .iter()
        .find(|c| c.gcv <= best + tie)
        .map(|c| c.num_basis)
        .unwrap_or(sorted[0]);
    Ok((chosen, report))
}
