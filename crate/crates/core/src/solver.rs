//! Penalized least-squares core: dense Tikhonov solves, the row-decoupled
//! solve shared by the unstructured estimators, the Kronecker-structured
//! solve for the surface-curvature penalty, and equivalent-degrees-of-freedom
//! accounting (trace of the hat matrix).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_traits::Float;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::{num, Scalar};

/// Relative pivot/eigenvalue threshold below which a system counts as rank
/// deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Largest coefficient dimension at which a penalty is assembled densely.
/// The full surface system (96^2 = 9216 coefficients) is never assembled;
/// it goes through [`solve_kron`].
pub const MAX_ASSEMBLY_DIM: usize = 4096;

/// The (n-2) x n interior second-difference operator: maps v to
/// v[k+1] - 2 v[k] + v[k-1] for the interior indices. Annihilates constant
/// and linear sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SecondDiffOperator {
    n: usize,
}

impl SecondDiffOperator {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Dimension(format!(
                "second-difference operator needs n >= 3, got {n}"
            )));
        }
        Ok(SecondDiffOperator { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn out_dim(&self) -> usize {
        self.n - 2
    }

    pub fn apply<T: Scalar>(&self, v: &DVector<T>) -> DVector<T> {
        assert_eq!(v.len(), self.n, "second-difference input length");
        let two = num::<T>(2.0);
        DVector::from_fn(self.n - 2, |k, _| v[k + 2] - two * v[k + 1] + v[k])
    }

    pub fn matrix<T: Scalar>(&self) -> DMatrix<T> {
        let two = num::<T>(2.0);
        DMatrix::from_fn(self.n - 2, self.n, |r, c| {
            if c == r {
                T::one()
            } else if c == r + 1 {
                -two
            } else if c == r + 2 {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// The curvature Gram matrix D^T D (n x n, positive semidefinite with a
    /// two-dimensional affine null space).
    pub fn gram<T: Scalar>(&self) -> DMatrix<T> {
        let d = self.matrix::<T>();
        d.tr_mul(&d)
    }
}

pub fn second_diff(n: usize) -> Result<SecondDiffOperator> {
    SecondDiffOperator::new(n)
}

/// One additive term of the penalty matrix T.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PenaltyTerm<T> {
    /// lambda * I (ridge).
    ScaledIdentity(T),
    /// lambda * D^T D on a plain coefficient vector.
    SecondDiff(T),
    /// lambda * (I kron D^T D): curvature along each row of a row-major
    /// vectorized square surface.
    RowSecondDiff(T),
    /// lambda * (D^T D kron I): curvature along each column.
    ColSecondDiff(T),
    /// Zero block followed by a ridge block (unpenalized leading
    /// coefficients).
    BlockDiagRidge {
        zero_dim: usize,
        ridge_dim: usize,
        lambda: T,
    },
    /// Curvature on the two interleaved edge chains (diagonal entries at even
    /// positions, last-column entries at odd positions, shared endpoint
    /// last).
    EdgeSecondDiff { lambda_diag: T, lambda_last: T },
}

/// Structural description of a symmetric positive-semidefinite penalty
/// matrix, assembled densely only at test-oracle scales.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltySpec<T> {
    dim: usize,
    terms: Vec<PenaltyTerm<T>>,
}

impl<T: Scalar> PenaltySpec<T> {
    pub fn none(dim: usize) -> Self {
        PenaltySpec { dim, terms: vec![] }
    }

    pub fn ridge(dim: usize, lambda: T) -> Self {
        PenaltySpec {
            dim,
            terms: vec![PenaltyTerm::ScaledIdentity(lambda)],
        }
    }

    pub fn second_diff(dim: usize, lambda: T) -> Self {
        PenaltySpec {
            dim,
            terms: vec![PenaltyTerm::SecondDiff(lambda)],
        }
    }

    /// Row plus column curvature penalty on a q x q surface vectorized by
    /// rows (dimension q^2).
    pub fn surface_curvature(q: usize, lambda_row: T, lambda_col: T) -> Self {
        PenaltySpec {
            dim: q * q,
            terms: vec![
                PenaltyTerm::RowSecondDiff(lambda_row),
                PenaltyTerm::ColSecondDiff(lambda_col),
            ],
        }
    }

    pub fn block_ridge(zero_dim: usize, ridge_dim: usize, lambda: T) -> Self {
        PenaltySpec {
            dim: zero_dim + ridge_dim,
            terms: vec![PenaltyTerm::BlockDiagRidge {
                zero_dim,
                ridge_dim,
                lambda,
            }],
        }
    }

    /// Two-edge curvature penalty on the interleaved 2q-1 parameter layout.
    pub fn two_edge(q: usize, lambda_diag: T, lambda_last: T) -> Self {
        PenaltySpec {
            dim: 2 * q - 1,
            terms: vec![PenaltyTerm::EdgeSecondDiff {
                lambda_diag,
                lambda_last,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[PenaltyTerm<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match *t {
            PenaltyTerm::ScaledIdentity(l)
            | PenaltyTerm::SecondDiff(l)
            | PenaltyTerm::RowSecondDiff(l)
            | PenaltyTerm::ColSecondDiff(l) => l == T::zero(),
            PenaltyTerm::BlockDiagRidge { lambda, .. } => lambda == T::zero(),
            PenaltyTerm::EdgeSecondDiff {
                lambda_diag,
                lambda_last,
            } => lambda_diag == T::zero() && lambda_last == T::zero(),
        })
    }

    /// Dense T. Errors when a term does not fit the declared dimension or a
    /// weight is negative.
    pub fn assemble(&self) -> Result<DMatrix<T>> {
        if self.dim > MAX_ASSEMBLY_DIM {
            return Err(Error::Dimension(format!(
                "refusing to assemble a {0} x {0} penalty; use the structured solver",
                self.dim
            )));
        }
        let mut t = DMatrix::<T>::zeros(self.dim, self.dim);
        for term in &self.terms {
            self.add_term(&mut t, term)?;
        }
        Ok(t)
    }

    /// beta^T T beta.
    pub fn value(&self, beta: &DVector<T>) -> Result<T> {
        let t = self.assemble()?;
        Ok(beta.dot(&(&t * beta)))
    }

    fn add_term(&self, t: &mut DMatrix<T>, term: &PenaltyTerm<T>) -> Result<()> {
        let dim = self.dim;
        match *term {
            PenaltyTerm::ScaledIdentity(lambda) => {
                check_weight(lambda)?;
                for i in 0..dim {
                    t[(i, i)] += lambda;
                }
            }
            PenaltyTerm::SecondDiff(lambda) => {
                check_weight(lambda)?;
                let k = SecondDiffOperator::new(dim)?.gram::<T>();
                *t += k * lambda;
            }
            PenaltyTerm::RowSecondDiff(lambda) | PenaltyTerm::ColSecondDiff(lambda) => {
                check_weight(lambda)?;
                let q = (dim as f64).sqrt().round() as usize;
                if q * q != dim || q < 3 {
                    return Err(Error::Dimension(format!(
                        "surface curvature penalty needs a square dimension >= 9, got {dim}"
                    )));
                }
                let k = SecondDiffOperator::new(q)?.gram::<T>();
                let eye = DMatrix::<T>::identity(q, q);
                let kron = if matches!(term, PenaltyTerm::RowSecondDiff(_)) {
                    eye.kronecker(&k)
                } else {
                    k.kronecker(&eye)
                };
                *t += kron * lambda;
            }
            PenaltyTerm::BlockDiagRidge {
                zero_dim,
                ridge_dim,
                lambda,
            } => {
                check_weight(lambda)?;
                if zero_dim + ridge_dim != dim {
                    return Err(Error::Dimension(format!(
                        "block ridge {zero_dim}+{ridge_dim} does not match dimension {dim}"
                    )));
                }
                for i in zero_dim..dim {
                    t[(i, i)] += lambda;
                }
            }
            PenaltyTerm::EdgeSecondDiff {
                lambda_diag,
                lambda_last,
            } => {
                check_weight(lambda_diag)?;
                check_weight(lambda_last)?;
                if dim.is_multiple_of(2) || dim < 5 {
                    return Err(Error::Dimension(format!(
                        "two-edge penalty needs an odd dimension 2q-1 >= 5, got {dim}"
                    )));
                }
                let q = dim.div_ceil(2);
                let d = SecondDiffOperator::new(q)?.matrix::<T>();
                // Chain index -> beta index; the shared endpoint a(q,q) sits
                // at 2q-2 and closes both chains.
                let diag_idx: Vec<usize> = (0..q).map(|k| 2 * k).collect();
                let last_idx: Vec<usize> =
                    (0..q - 1).map(|k| 2 * k + 1).chain([2 * q - 2]).collect();
                for (lambda, idx) in [(lambda_diag, &diag_idx), (lambda_last, &last_idx)] {
                    if lambda == T::zero() {
                        continue;
                    }
                    // (S D^T D S^T) scattered through the selector S.
                    let k = d.tr_mul(&d);
                    for a in 0..q {
                        for b in 0..q {
                            t[(idx[a], idx[b])] += lambda * k[(a, b)];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_weight<T: Scalar>(lambda: T) -> Result<()> {
    if lambda < T::zero() || !Float::is_finite(lambda) {
        return Err(Error::Config(format!(
            "penalty weight must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Coefficient estimate with its hat-matrix trace and fit diagnostics.
#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub beta: DVector<T>,
    /// Equivalent degrees of freedom: trace((X^T X + T)^-1 X^T X).
    pub dof: T,
    /// Residual sum of squares.
    pub rss: T,
    /// beta^T T beta.
    pub penalty_value: T,
}

enum Factor<T: Scalar> {
    Chol(Cholesky<T, Dyn>),
    Eigen {
        vectors: DMatrix<T>,
        inv_values: DVector<T>,
    },
}

/// Symmetric positive-definite solver with Jacobi equilibration, a rank
/// check at [`RANK_TOLERANCE`], and one step of iterative refinement.
pub(crate) struct SymSolver<T: Scalar> {
    m: DMatrix<T>,
    scale: DVector<T>,
    factor: Factor<T>,
}

impl<T: Scalar> SymSolver<T> {
    pub fn new(m: DMatrix<T>, context: &str) -> Result<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "symmetric solver needs a square matrix");
        let scale = DVector::from_fn(n, |i, _| {
            let d = m[(i, i)];
            if d > T::zero() && Float::is_finite(d) {
                Float::recip(Float::sqrt(d))
            } else {
                T::one()
            }
        });
        let mut scaled = m.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= scale[i] * scale[j];
            }
        }

        let tol = num::<T>(RANK_TOLERANCE);
        if let Some(chol) = Cholesky::new(scaled.clone()) {
            let l = chol.l_dirty();
            let mut min_pivot = Float::infinity();
            let mut max_pivot = T::zero();
            for i in 0..n {
                let pivot = l[(i, i)] * l[(i, i)];
                min_pivot = Float::min(min_pivot, pivot);
                max_pivot = Float::max(max_pivot, pivot);
            }
            if min_pivot >= tol * max_pivot {
                return Ok(SymSolver {
                    m,
                    scale,
                    factor: Factor::Chol(chol),
                });
            }
        }

        // Numerically semidefinite: decide rank by eigenvalue and solve in
        // the eigenbasis when full rank survives the tolerance.
        let eig = SymmetricEigen::try_new(scaled, T::default_epsilon(), 0)
            .ok_or_else(|| Error::EigenFailure(context.to_string()))?;
        let max_ev = eig.eigenvalues.amax();
        let cutoff = if max_ev > T::zero() {
            tol * max_ev
        } else {
            tol
        };
        let rank = eig.eigenvalues.iter().filter(|&&ev| ev > cutoff).count();
        if rank < n {
            return Err(Error::RankDeficient {
                rank,
                dim: n,
                context: context.to_string(),
            });
        }
        let inv_values = eig.eigenvalues.map(|ev| Float::recip(ev));
        Ok(SymSolver {
            m,
            scale,
            factor: Factor::Eigen {
                vectors: eig.eigenvectors,
                inv_values,
            },
        })
    }

    fn solve_once(&self, rhs: &DVector<T>) -> DVector<T> {
        let z = rhs.component_mul(&self.scale);
        let w = match &self.factor {
            Factor::Chol(chol) => chol.solve(&z),
            Factor::Eigen {
                vectors,
                inv_values,
            } => {
                let proj = vectors.tr_mul(&z).component_mul(inv_values);
                vectors * proj
            }
        };
        w.component_mul(&self.scale)
    }

    /// Solve with one refinement pass against the unscaled matrix.
    pub fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        let x = self.solve_once(rhs);
        let residual = rhs - &self.m * &x;
        x + self.solve_once(&residual)
    }

    /// tr(M^-1 B).
    pub fn trace_solve(&self, b: &DMatrix<T>) -> T {
        let mut trace = T::zero();
        for j in 0..b.ncols() {
            let col = DVector::from(b.column(j));
            trace += self.solve(&col)[j];
        }
        trace
    }
}

/// Minimizer of ||y - X beta||^2 + beta^T T beta from accumulated normal
/// equations (X^T X, X^T y, y^T y).
pub fn solve_normal<T: Scalar>(
    xtx: &DMatrix<T>,
    xty: &DVector<T>,
    yty: T,
    penalty: &PenaltySpec<T>,
) -> Result<SolveResult<T>> {
    let p = xtx.nrows();
    if xtx.ncols() != p || xty.len() != p || penalty.dim() != p {
        return Err(Error::Dimension(format!(
            "normal equations: X^T X is {}x{}, X^T y has {}, penalty dimension {}",
            xtx.nrows(),
            xtx.ncols(),
            xty.len(),
            penalty.dim()
        )));
    }
    let t = penalty.assemble()?;
    let solver = SymSolver::new(xtx + &t, "")?;
    let beta = solver.solve(xty);
    let dof = solver.trace_solve(xtx);
    let penalty_value = beta.dot(&(&t * &beta));
    let fit_quad = beta.dot(&(xtx * &beta));
    let rss = Float::max(yty - num::<T>(2.0) * beta.dot(xty) + fit_quad, T::zero());
    Ok(SolveResult {
        beta,
        dof,
        rss,
        penalty_value,
    })
}

/// Minimizer of ||y - X beta||^2 + beta^T T beta from the design itself.
pub fn solve_dense<T: Scalar>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    penalty: &PenaltySpec<T>,
) -> Result<SolveResult<T>> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but y has {}",
            x.nrows(),
            y.len()
        )));
    }
    let xtx = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let mut result = solve_normal(&xtx, &xty, y.dot(y), penalty)?;
    // The residual is cheap here; prefer it over the normal-equation form.
    let r = y - x * &result.beta;
    result.rss = r.dot(&r);
    Ok(result)
}

/// Equivalent degrees of freedom tr((X^T X + T)^-1 X^T X) without a solve.
pub fn dof_of<T: Scalar>(xtx: &DMatrix<T>, penalty: &PenaltySpec<T>) -> Result<T> {
    let t = penalty.assemble()?;
    let solver = SymSolver::new(xtx + &t, "")?;
    Ok(solver.trace_solve(xtx))
}

/// Row-decoupled fit of a q x q coefficient matrix: row i solves
/// (G + T_row) a_i = b_i.
#[derive(Clone, Debug)]
pub struct RowwiseFit<T> {
    pub rows: Vec<SolveResult<T>>,
    /// Total hat-matrix trace: q * tr((G + T_row)^-1 G).
    pub dof: T,
    pub rss: T,
    pub penalty_value: T,
}

impl<T: Scalar> RowwiseFit<T> {
    /// Stacks the row solutions into the coefficient matrix A.
    pub fn matrix(&self) -> DMatrix<T> {
        let q = self.rows.len();
        DMatrix::from_fn(q, q, |i, j| self.rows[i].beta[j])
    }
}

/// Solves the q independent row problems sharing the Gram matrix
/// G = sum_d x_d x_d^T. Column i of `cross` must hold sum_d x_d y_d[i] and
/// `yty[i] = sum_d y_d[i]^2`.
pub fn solve_rowwise<T: Scalar>(
    gram: &DMatrix<T>,
    cross: &DMatrix<T>,
    yty: &DVector<T>,
    row_penalty: &PenaltySpec<T>,
) -> Result<RowwiseFit<T>> {
    let q = gram.nrows();
    if gram.ncols() != q || cross.nrows() != q || cross.ncols() != q || yty.len() != q {
        return Err(Error::Dimension(
            "rowwise solve needs square gram/cross with matching yty".into(),
        ));
    }
    if row_penalty.dim() != q {
        return Err(Error::Dimension(format!(
            "row penalty dimension {} does not match q = {q}",
            row_penalty.dim()
        )));
    }
    let t = row_penalty.assemble()?;
    let solver = SymSolver::new(gram + &t, "row system")?;
    let row_dof = solver.trace_solve(gram);

    let mut rows = Vec::with_capacity(q);
    let mut rss_total = T::zero();
    let mut penalty_total = T::zero();
    for i in 0..q {
        let b = DVector::from(cross.column(i));
        let a = solver.solve(&b);
        let penalty_value = a.dot(&(&t * &a));
        let fit_quad = a.dot(&(gram * &a));
        let rss = Float::max(yty[i] - num::<T>(2.0) * a.dot(&b) + fit_quad, T::zero());
        rss_total += rss;
        penalty_total += penalty_value;
        rows.push(SolveResult {
            beta: a,
            dof: row_dof,
            rss,
            penalty_value,
        });
    }
    Ok(RowwiseFit {
        rows,
        dof: row_dof * num::<T>(q as f64),
        rss: rss_total,
        penalty_value: penalty_total,
    })
}

/// Fit of the full surface system with row and column curvature penalties.
#[derive(Clone, Debug)]
pub struct KronFit<T> {
    pub a: DMatrix<T>,
    pub dof: T,
    pub rss: T,
    pub penalty_value: T,
}

/// Solves (I kron (G + l1 K) + l2 (K kron I)) a = vec-by-rows(cross^T), the
/// normal equations of the curvature-penalized surface fit, where
/// K = D^T D. The Kronecker system is never assembled: the eigenbasis of K
/// decouples it into q systems of dimension q, solved concurrently.
pub fn solve_kron<T: Scalar>(
    gram: &DMatrix<T>,
    cross: &DMatrix<T>,
    yty_total: T,
    lambda_row: T,
    lambda_col: T,
) -> Result<KronFit<T>> {
    let q = gram.nrows();
    if gram.ncols() != q || cross.nrows() != q || cross.ncols() != q {
        return Err(Error::Dimension(
            "kron solve needs square gram and cross of equal size".into(),
        ));
    }
    if q < 3 {
        return Err(Error::Dimension(format!(
            "kron solve needs q >= 3, got {q}"
        )));
    }
    check_weight(lambda_row)?;
    check_weight(lambda_col)?;

    let op = SecondDiffOperator::new(q)?;
    let curvature = op.gram::<T>();
    let eig = SymmetricEigen::try_new(curvature.clone(), T::default_epsilon(), 0)
        .ok_or_else(|| Error::EigenFailure("curvature gram".into()))?;
    let base = gram + &curvature * lambda_row;
    // Rows of R are the per-mode right-hand sides of the rotated system.
    let rhs = eig.eigenvectors.tr_mul(&cross.transpose());

    let modes: Vec<Result<(DVector<T>, T)>> = (0..q)
        .into_par_iter()
        .map(|mode| {
            let mu = Float::max(eig.eigenvalues[mode], T::zero());
            let mut m = base.clone();
            for i in 0..q {
                m[(i, i)] += lambda_col * mu;
            }
            let solver = SymSolver::new(m, &format!("eigenmode {mode}"))?;
            let b = rhs.row(mode).transpose();
            let c = solver.solve(&b);
            let mode_dof = solver.trace_solve(gram);
            Ok((c, mode_dof))
        })
        .collect();

    let mut rotated = DMatrix::<T>::zeros(q, q);
    let mut dof = T::zero();
    for (mode, entry) in modes.into_iter().enumerate() {
        let (c, mode_dof) = entry?;
        rotated.set_row(mode, &c.transpose());
        dof += mode_dof;
    }
    let a = &eig.eigenvectors * rotated;

    let fit_cross = a.dot(&cross.transpose());
    let fit_quad = (&a * gram).dot(&a);
    let rss = Float::max(yty_total - num::<T>(2.0) * fit_cross + fit_quad, T::zero());
    let d = op.matrix::<T>();
    let row_curv = &a * d.transpose();
    let col_curv = &d * &a;
    let penalty_value =
        lambda_row * row_curv.dot(&row_curv) + lambda_col * col_curv.dot(&col_curv);
    Ok(KronFit {
        a,
        dof,
        rss,
        penalty_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_vector(rng: &mut StdRng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Accumulate (G, B, yty) from raw pairs, the way the estimators do.
    fn normal_data(
        pairs: &[(DVector<f64>, DVector<f64>)],
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let q = pairs[0].0.len();
        let mut gram = DMatrix::zeros(q, q);
        let mut cross = DMatrix::zeros(q, q);
        let mut yty = DVector::zeros(q);
        for (x, y) in pairs {
            gram += x * x.transpose();
            cross += x * y.transpose();
            for i in 0..q {
                yty[i] += y[i] * y[i];
            }
        }
        (gram, cross, yty)
    }

    /// Row-major flattening matching the surface vectorization convention.
    fn vec_by_rows(m: &DMatrix<f64>) -> DVector<f64> {
        let (r, c) = m.shape();
        DVector::from_fn(r * c, |p, _| m[(p / c, p % c)])
    }

    /// The stacked design of the full surface system: one block I kron x^T
    /// per pair.
    fn surface_design(pairs: &[(DVector<f64>, DVector<f64>)]) -> (DMatrix<f64>, DVector<f64>) {
        let q = pairs[0].0.len();
        let n = pairs.len();
        let mut x = DMatrix::zeros(n * q, q * q);
        let mut y = DVector::zeros(n * q);
        for (d, (xv, yv)) in pairs.iter().enumerate() {
            for i in 0..q {
                let row = d * q + i;
                for j in 0..q {
                    x[(row, i * q + j)] = xv[j];
                }
                y[row] = yv[i];
            }
        }
        (x, y)
    }

    #[test]
    fn second_diff_examples() {
        let op = SecondDiffOperator::new(3).unwrap();
        let out = op.apply(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(out.len(), 1);
        assert!(out[0].abs() < 1e-15);

        let out = op.apply(&DVector::from_vec(vec![1.0, 0.0, 1.0]));
        assert!((out[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn second_diff_rejects_small_n() {
        assert!(SecondDiffOperator::new(2).is_err());
    }

    #[test]
    fn second_diff_matches_banded_matrix_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        let op = SecondDiffOperator::new(96).unwrap();
        // Explicit banded build, independent of SecondDiffOperator::matrix.
        let mut banded = DMatrix::<f64>::zeros(94, 96);
        for r in 0..94 {
            banded[(r, r)] = 1.0;
            banded[(r, r + 1)] = -2.0;
            banded[(r, r + 2)] = 1.0;
        }
        let v = random_vector(&mut rng, 96);
        let direct = op.apply(&v);
        let by_matrix = &banded * &v;
        assert!((direct - by_matrix).amax() < 1e-14);
        assert_eq!(op.matrix::<f64>(), banded);
    }

    #[test]
    fn second_diff_annihilates_affine_sequences() {
        let op = SecondDiffOperator::new(50).unwrap();
        let v = DVector::from_fn(50, |i, _| 3.5 - 0.25 * i as f64);
        assert!(op.apply(&v).amax() == 0.0);
    }

    #[test]
    fn identity_design_is_interpolated() {
        let x = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let res = solve_dense(&x, &y, &PenaltySpec::none(3)).unwrap();
        assert!((&res.beta - &y).amax() < 1e-12);
        assert!((res.dof - 3.0).abs() < 1e-12);
        assert!(res.rss < 1e-20);
    }

    #[test]
    fn scalar_ridge_shrinks_halfway() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 2.0);
        let res = solve_dense(&x, &y, &PenaltySpec::ridge(1, 1.0)).unwrap();
        assert!((res.beta[0] - 1.0).abs() < 1e-12);
        assert!((res.dof - 0.5).abs() < 1e-12);
    }

    /// Finite-difference gradient of the penalized objective.
    fn numeric_gradient(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        t: &DMatrix<f64>,
        beta: &DVector<f64>,
    ) -> DVector<f64> {
        let objective = |b: &DVector<f64>| {
            let r = y - x * b;
            r.dot(&r) + b.dot(&(t * b))
        };
        let h = 1e-6;
        DVector::from_fn(beta.len(), |i, _| {
            let mut plus = beta.clone();
            let mut minus = beta.clone();
            plus[i] += h;
            minus[i] -= h;
            (objective(&plus) - objective(&minus)) / (2.0 * h)
        })
    }

    #[test]
    fn ridge_solution_zeroes_the_objective_gradient() {
        let mut rng = StdRng::seed_from_u64(42);
        let x = random_matrix(&mut rng, 20, 5);
        let y = random_vector(&mut rng, 20);
        let penalty = PenaltySpec::ridge(5, 0.3);
        let res = solve_dense(&x, &y, &penalty).unwrap();
        let grad = numeric_gradient(&x, &y, &penalty.assemble().unwrap(), &res.beta);
        assert!(
            grad.amax() < 1e-8 * (1.0 + x.tr_mul(&y).amax()),
            "gradient {:.3e}",
            grad.amax()
        );
    }

    #[test]
    fn objective_gradient_property_across_penalties() {
        let mut rng = StdRng::seed_from_u64(5);
        for trial in 0..20 {
            let n = rng.random_range(10..40);
            let p = rng.random_range(3..10);
            let x = random_matrix(&mut rng, n, p);
            let y = random_vector(&mut rng, n);
            let penalty = match trial % 3 {
                0 => PenaltySpec::ridge(p, rng.random_range(0.0..5.0)),
                1 => PenaltySpec::second_diff(p, rng.random_range(0.0..5.0)),
                _ => PenaltySpec::none(p),
            };
            let res = match solve_dense(&x, &y, &penalty) {
                Ok(r) => r,
                Err(Error::RankDeficient { .. }) => continue,
                Err(e) => panic!("unexpected error {e}"),
            };
            let t = penalty.assemble().unwrap();
            let xty = x.tr_mul(&y);
            let grad = (x.tr_mul(&x) * &res.beta - &xty + &t * &res.beta) * 2.0;
            assert!(grad.norm() <= 1e-6 * (1.0 + xty.norm()));
        }
    }

    #[test]
    fn underdetermined_system_reports_rank() {
        let mut rng = StdRng::seed_from_u64(9);
        let x = random_matrix(&mut rng, 5, 10);
        let y = random_vector(&mut rng, 5);
        match solve_dense(&x, &y, &PenaltySpec::none(10)) {
            Err(Error::RankDeficient { rank, dim, .. }) => {
                assert!(rank <= 5);
                assert_eq!(dim, 10);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn ill_conditioned_monomials_still_solve_accurately() {
        // Raw cubic-monomial columns, the worst conditioning in the crate.
        let n = 96;
        let x = DMatrix::from_fn(n, 4, |i, j| ((i + 1) as f64).powi(j as i32));
        let mut rng = StdRng::seed_from_u64(1);
        let y = random_vector(&mut rng, n);
        let res = solve_dense(&x, &y, &PenaltySpec::none(4)).unwrap();
        let xty = x.tr_mul(&y);
        let grad = (x.tr_mul(&x) * &res.beta - &xty) * 2.0;
        assert!(grad.norm() <= 1e-6 * (1.0 + xty.norm()));
    }

    #[test]
    fn rowwise_recovers_identity_map() {
        let mut rng = StdRng::seed_from_u64(17);
        let q = 8;
        let pairs: Vec<_> = (0..40)
            .map(|_| {
                let x = random_vector(&mut rng, q);
                (x.clone(), x)
            })
            .collect();
        let (gram, cross, yty) = normal_data(&pairs);
        let fit = solve_rowwise(&gram, &cross, &yty, &PenaltySpec::none(q)).unwrap();
        let a = fit.matrix();
        assert!((a - DMatrix::<f64>::identity(q, q)).amax() < 1e-8);
        assert!((fit.dof - q as f64 * q as f64).abs() < 1e-6);
    }

    #[test]
    fn rowwise_huge_ridge_shrinks_to_zero() {
        let mut rng = StdRng::seed_from_u64(23);
        let q = 6;
        let pairs: Vec<_> = (0..30)
            .map(|_| (random_vector(&mut rng, q), random_vector(&mut rng, q)))
            .collect();
        let (gram, cross, yty) = normal_data(&pairs);
        let fit = solve_rowwise(&gram, &cross, &yty, &PenaltySpec::ridge(q, 1e12)).unwrap();
        assert!(fit.matrix().amax() < 1e-9);
        assert!(fit.dof < 1e-6);
    }

    #[test]
    fn rowwise_matches_dense_full_system() {
        let mut rng = StdRng::seed_from_u64(31);
        let q = 6;
        let pairs: Vec<_> = (0..30)
            .map(|_| (random_vector(&mut rng, q), random_vector(&mut rng, q)))
            .collect();
        let (gram, cross, yty) = normal_data(&pairs);
        let lambda = 0.7;
        let fit = solve_rowwise(&gram, &cross, &yty, &PenaltySpec::ridge(q, lambda)).unwrap();

        let (x, y) = surface_design(&pairs);
        let dense = solve_dense(&x, &y, &PenaltySpec::ridge(q * q, lambda)).unwrap();
        let a_flat = vec_by_rows(&fit.matrix());
        assert!((a_flat - &dense.beta).amax() <= 1e-8 * (1.0 + dense.beta.amax()));
        assert!((fit.dof - dense.dof).abs() <= 1e-8 * (1.0 + dense.dof));
        assert!((fit.rss - dense.rss).abs() <= 1e-8 * (1.0 + dense.rss));
    }

    #[test]
    fn kron_with_zero_penalty_equals_rowwise() {
        let mut rng = StdRng::seed_from_u64(37);
        let q = 7;
        let pairs: Vec<_> = (0..35)
            .map(|_| (random_vector(&mut rng, q), random_vector(&mut rng, q)))
            .collect();
        let (gram, cross, yty) = normal_data(&pairs);
        let rowwise = solve_rowwise(&gram, &cross, &yty, &PenaltySpec::none(q)).unwrap();
        let kron = solve_kron(&gram, &cross, yty.sum(), 0.0, 0.0).unwrap();
        assert!((kron.a - rowwise.matrix()).amax() < 1e-9);
        assert!((kron.dof - rowwise.dof).abs() < 1e-8);
    }

    #[test]
    fn kron_matches_dense_assembled_system() {
        let mut rng = StdRng::seed_from_u64(41);
        let q = 8;
        let pairs: Vec<_> = (0..50)
            .map(|_| (random_vector(&mut rng, q), random_vector(&mut rng, q)))
            .collect();
        let (gram, cross, yty) = normal_data(&pairs);
        let (l1, l2) = (0.8, 2.5);
        let kron = solve_kron(&gram, &cross, yty.sum(), l1, l2).unwrap();

        let (x, y) = surface_design(&pairs);
        let dense = solve_dense(&x, &y, &PenaltySpec::surface_curvature(q, l1, l2)).unwrap();
        let a_flat = vec_by_rows(&kron.a);
        assert!((a_flat - &dense.beta).amax() <= 1e-8 * (1.0 + dense.beta.amax()));
        assert!((kron.dof - dense.dof).abs() <= 1e-8 * (1.0 + dense.dof));
        assert!((kron.rss - dense.rss).abs() <= 1e-7 * (1.0 + dense.rss));
        assert!(
            (kron.penalty_value - dense.penalty_value).abs()
                <= 1e-7 * (1.0 + dense.penalty_value)
        );
    }

    #[test]
    fn kron_zero_rhs_gives_zero_surface_and_same_dof() {
        let mut rng = StdRng::seed_from_u64(43);
        let q = 6;
        let pairs: Vec<_> = (0..25)
            .map(|_| (random_vector(&mut rng, q), random_vector(&mut rng, q)))
            .collect();
        let (gram, cross, _) = normal_data(&pairs);
        let zero = DMatrix::zeros(q, q);
        let hom = solve_kron(&gram, &zero, 0.0, 1.0, 2.0).unwrap();
        assert!(hom.a.amax() < 1e-14);
        let inhom = solve_kron(&gram, &cross, 0.0, 1.0, 2.0).unwrap();
        assert!((hom.dof - inhom.dof).abs() < 1e-10);
    }

    #[test]
    fn dof_equals_parameter_count_without_penalty() {
        let mut rng = StdRng::seed_from_u64(47);
        let x = random_matrix(&mut rng, 50, 12);
        let xtx = x.tr_mul(&x);
        let dof = dof_of(&xtx, &PenaltySpec::none(12)).unwrap();
        assert!((dof - 12.0).abs() < 1e-9);
    }

    #[test]
    fn block_ridge_dof_tends_to_unpenalized_dimension() {
        let mut rng = StdRng::seed_from_u64(53);
        let x = random_matrix(&mut rng, 300, 179);
        let xtx = x.tr_mul(&x);
        let dof = dof_of(&xtx, &PenaltySpec::block_ridge(10, 169, 1e12)).unwrap();
        assert!((dof - 10.0).abs() < 1e-3, "dof {dof}");
    }

    #[test]
    fn dof_is_nonincreasing_in_lambda() {
        let mut rng = StdRng::seed_from_u64(59);
        let x = random_matrix(&mut rng, 50, 12);
        let xtx = x.tr_mul(&x);
        let mut last = f64::INFINITY;
        for &lambda in &[0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let dof = dof_of(&xtx, &PenaltySpec::ridge(12, lambda)).unwrap();
            assert!(dof <= last + 1e-9, "dof rose from {last} to {dof}");
            // Dense hat-matrix oracle.
            let m = (&xtx + DMatrix::<f64>::identity(12, 12) * lambda)
                .try_inverse()
                .unwrap();
            let oracle = (m * &xtx).trace();
            assert!((dof - oracle).abs() < 1e-8 * (1.0 + oracle));
            last = dof;
        }
    }

    #[test]
    fn two_edge_penalty_matches_scattered_chains() {
        let q = 5;
        let spec = PenaltySpec::two_edge(q, 2.0, 3.0);
        let t = spec.assemble().unwrap();
        assert_eq!(t.nrows(), 2 * q - 1);
        // Oracle: build both chains explicitly and scatter D^T D.
        let d = SecondDiffOperator::new(q).unwrap().matrix::<f64>();
        let k = d.tr_mul(&d);
        let diag_idx: Vec<usize> = vec![0, 2, 4, 6, 8];
        let last_idx: Vec<usize> = vec![1, 3, 5, 7, 8];
        let mut oracle = DMatrix::<f64>::zeros(9, 9);
        for a in 0..q {
            for b in 0..q {
                oracle[(diag_idx[a], diag_idx[b])] += 2.0 * k[(a, b)];
                oracle[(last_idx[a], last_idx[b])] += 3.0 * k[(a, b)];
            }
        }
        assert!((t - oracle).amax() < 1e-14);
    }

    #[test]
    fn penalty_rejects_negative_weights_and_oversized_assembly() {
        assert!(PenaltySpec::ridge(4, -1.0).assemble().is_err());
        let big = PenaltySpec::<f64>::none(MAX_ASSEMBLY_DIM + 1);
        assert!(big.assemble().is_err());
    }
}
