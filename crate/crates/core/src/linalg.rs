//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{FdaError, Result};

/// Relative threshold on `|R[j][j]| / max_i |R[i][i]|` below which a column is
/// treated as linearly dependent on its predecessors.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Solution of an ordinary least-squares problem `min ||X b - y||`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coeffs: DVector<f64>,
    pub residuals: DVector<f64>,
    pub sse: f64,
    /// Diagonal of `(X'X)^{-1}`.
    pub inverse_gram_diag: DVector<f64>,
}

/// Least squares by Householder QR; never forms `X'X`.
pub fn least_squares(design: &DMatrix<f64>, rhs: &DVector<f64>, context: &str) -> Result<LeastSquares> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(FdaError::Underdetermined { rows, cols });
    }
    if rhs.len() != rows {
        return Err(FdaError::InvalidArgument(format!(
            "{context}: right-hand side has {} entries, design has {rows} rows",
            rhs.len()
        )));
    }
    if cols == 0 {
        return Ok(LeastSquares {
            coeffs: DVector::zeros(0),
            residuals: rhs.clone(),
            sse: rhs.norm_squared(),
            inverse_gram_diag: DVector::zeros(0),
        });
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let dependent: Vec<usize> = (0..cols)
        .filter(|&j| r[(j, j)].is_nan() || r[(j, j)].abs() <= RANK_TOLERANCE * scale)
        .collect();
    if scale == 0.0 || !dependent.is_empty() {
        return Err(FdaError::Singular {
            context: context.to_string(),
            columns: if scale == 0.0 { (0..cols).collect() } else { dependent },
        });
    }

    let mut qty = rhs.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, cols).into_owned();
    let coeffs = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| FdaError::Singular {
            context: context.to_string(),
            columns: Vec::new(),
        })?;

    let residuals = rhs - design * &coeffs;
    let sse = residuals.norm_squared();

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .expect("R checked non-singular");
    let inverse_gram_diag = DVector::from_iterator(cols, (0..cols).map(|i| r_inv.row(i).norm_squared()));

    Ok(LeastSquares {
        coeffs,
        residuals,
        sse,
        inverse_gram_diag,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Factor `S` of a symmetric positive (semi)definite matrix with `W ≈ S S'`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    pub factor: DMatrix<f64>,
    /// `S^{-T}`, used to map whitened eigenvectors back to coefficients.
    pub inverse_transpose: DMatrix<f64>,
    pub method: FactorMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMethod {
    Cholesky,
    EigenSqrt,
}

/// Eigenvalue floor, relative to the trace, for the eigen square root.
pub const GRAM_FLOOR: f64 = 1e-12;

impl GramFactor {
    /// Cholesky when the matrix is comfortably positive definite, otherwise a
    /// symmetric eigen square root with eigenvalues floored at `1e-12 * trace`.
    pub fn new(w: &DMatrix<f64>) -> Result<Self> {
        let p = w.nrows();
        if p == 0 || w.ncols() != p {
            return Err(FdaError::InvalidArgument("gram matrix must be square and non-empty".into()));
        }
        let trace = w.trace();
        if !trace.is_finite() || trace <= 0.0 {
            return Err(FdaError::Singular {
                context: "gram matrix".into(),
                columns: (0..p).collect(),
            });
        }
        if let Some(chol) = w.clone().cholesky() {
            let l = chol.l();
            let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
            if min_pivot > GRAM_FLOOR * trace {
                let inverse_transpose = l
                    .transpose()
                    .solve_upper_triangular(&DMatrix::identity(p, p))
                    .expect("cholesky factor has positive diagonal");
                return Ok(GramFactor {
                    factor: l,
                    inverse_transpose,
                    method: FactorMethod::Cholesky,
                });
            }
        }
        let eig = w.clone().symmetric_eigen();
        let floor = GRAM_FLOOR * trace;
        let sqrt: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(floor).sqrt()).collect();
        let mut factor = eig.eigenvectors.clone();
        let mut inverse_transpose = eig.eigenvectors.clone();
        for (j, s) in sqrt.iter().enumerate() {
            factor.column_mut(j).scale_mut(*s);
            inverse_transpose.column_mut(j).scale_mut(1.0 / s);
        }
        Ok(GramFactor {
            factor,
            inverse_transpose,
            method: FactorMethod::EigenSqrt,
        })
    }
}
