//! The orthogonality-constrained least-squares objective.
//!
//! After eliminating the bias, the regression problem reduces to
//!
//! ```text
//! min_W ‖WᵀA − B‖_F²   s.t.  WᵀW = I_k
//! ```
//!
//! where A and B are the row-centered feature and label matrices. Centering
//! is applied as a row-mean subtraction, which is algebraically identical to
//! right-multiplying by the centering matrix without ever materializing it.
//! The Gram products AAᵀ and ABᵀ are cached so each objective or gradient
//! evaluation costs O(d²k), independent of the sample count.

use nalgebra::{DMatrix, DVector};

use crate::dataset::OneHotLabels;
use crate::error::{Error, Result};

/// Frobenius tolerance for the orthonormality invariant ‖WᵀW − I‖_F.
pub const STIEFEL_TOL: f64 = 1e-8;

/// A d×k matrix with orthonormal columns (a point on the Stiefel manifold).
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    w: DMatrix<f64>,
}

impl StiefelPoint {
    /// Wraps a matrix after verifying ‖WᵀW − I_k‖_F ≤ 1e-8.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let err = orthonormality_error(&w);
        if err > STIEFEL_TOL {
            return Err(Error::Numerical(format!(
                "matrix is not orthonormal: |W'W - I| = {err:.3e}"
            )));
        }
        Ok(Self { w })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.w
    }

    pub fn nrows(&self) -> usize {
        self.w.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.w.ncols()
    }

    /// ‖WᵀW − I_k‖_F of the wrapped matrix.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.w)
    }
}

/// ‖WᵀW − I_k‖_F for an arbitrary matrix.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let k = w.ncols();
    let mut gram = w.transpose() * w;
    for i in 0..k {
        gram[(i, i)] -= 1.0;
    }
    gram.norm()
}

/// The centered problem data with cached Gram products.
#[derive(Debug, Clone)]
pub struct CenteredProblem {
    a: DMatrix<f64>,        // XH, d×n
    b: DMatrix<f64>,        // YH, k×n
    gram_aa: DMatrix<f64>,  // AAᵀ, d×d
    cross_ab: DMatrix<f64>, // ABᵀ, d×k
    b_norm_sq: f64,         // ‖B‖_F²
    d: usize,
    n: usize,
    k: usize,
}

impl CenteredProblem {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn gram_aa(&self) -> &DMatrix<f64> {
        &self.gram_aa
    }

    pub fn cross_ab(&self) -> &DMatrix<f64> {
        &self.cross_ab
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }
}

fn center_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols() as f64;
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
    }
    out
}

/// Centers X and Y and caches the Gram products.
///
/// Requires d >= k; a wider-than-tall W cannot have orthonormal columns.
pub fn build_problem(x: &DMatrix<f64>, y: &OneHotLabels) -> Result<CenteredProblem> {
    build_problem_raw(x, y.matrix())
}

/// [`build_problem`] for an arbitrary k×n target matrix (synthetic regression
/// targets, baseline comparisons).
pub fn build_problem_raw(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<CenteredProblem> {
    let (d, n) = (x.nrows(), x.ncols());
    let k = y.nrows();
    if y.ncols() != n {
        return Err(Error::Dimension(format!(
            "feature matrix has {n} samples but targets have {}",
            y.ncols()
        )));
    }
    if d < k {
        return Err(Error::Dimension(format!(
            "d = {d} < k = {k}: W'W = I_k is infeasible for a {d}x{k} matrix"
        )));
    }
    let a = center_rows(x);
    let b = center_rows(y);
    let gram_aa = &a * a.transpose();
    let cross_ab = &a * b.transpose();
    let b_norm_sq = b.norm_squared();
    Ok(CenteredProblem {
        a,
        b,
        gram_aa,
        cross_ab,
        b_norm_sq,
        d,
        n,
        k,
    })
}

/// f(W) = ‖WᵀA − B‖_F², evaluated from the cached Grams for any d×k matrix.
///
/// Expanding the square gives tr(WᵀAAᵀW) − 2 tr(WᵀABᵀ) + ‖B‖_F²; the value is
/// clamped at zero to absorb cancellation noise near a perfect fit.
pub fn objective_value_ambient(p: &CenteredProblem, w: &DMatrix<f64>) -> f64 {
    let aw = &p.gram_aa * w;
    let quad = w.dot(&aw);
    let cross = w.dot(&p.cross_ab);
    (quad - 2.0 * cross + p.b_norm_sq).max(0.0)
}

/// f(W) = ‖WᵀA − B‖_F² at a point on the manifold.
pub fn objective_value(p: &CenteredProblem, w: &StiefelPoint) -> f64 {
    objective_value_ambient(p, w.matrix())
}

/// Euclidean gradient G = 2(AAᵀW − ABᵀ) for any d×k matrix.
pub fn gradient_ambient(p: &CenteredProblem, w: &DMatrix<f64>) -> DMatrix<f64> {
    2.0 * (&p.gram_aa * w - &p.cross_ab)
}

/// Euclidean gradient of [`objective_value`] at a point on the manifold.
pub fn gradient(p: &CenteredProblem, w: &StiefelPoint) -> DMatrix<f64> {
    gradient_ambient(p, w.matrix())
}

/// Recovers the bias b = (Y·1 − WᵀX·1)/n of the original regression from the
/// uncentered data. Used for reporting and prediction only.
pub fn recover_bias(
    p: &CenteredProblem,
    w: &StiefelPoint,
    x: &DMatrix<f64>,
    y: &OneHotLabels,
) -> Result<DVector<f64>> {
    let n = p.n_samples();
    if x.ncols() != n || y.n_samples() != n {
        return Err(Error::Dimension(
            "bias recovery inputs do not match the problem dimensions".into(),
        ));
    }
    let ones = DVector::from_element(n, 1.0);
    let y_sum = y.matrix() * &ones;
    let x_sum = x * &ones;
    let wx = w.matrix().transpose() * x_sum;
    Ok((y_sum - wx) / n as f64)
}
