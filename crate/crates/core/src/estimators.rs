//! The six weight-surface estimators: each builds its design structure and
//! penalty, invokes the solver, and assembles a [`WeightSurface`].
//!
//! All six share one pass over the training pairs that accumulates the
//! normal-equation blocks G = sum x x^T and B = sum x y^T; every design in
//! this family reduces to those (the full-surface regressor matrix has
//! Gram I kron G, and the edge/diagonal designs read single entries of G
//! and B).

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::calendar::DaySerial;
use crate::error::{Error, Result};
use crate::series::TrainingSet;
use crate::solver::{solve_kron, solve_normal, solve_rowwise, PenaltySpec};
use crate::{num, Scalar};

pub const DEFAULT_RBF_SIGMA: f64 = 4.0;
pub const DEFAULT_RBF_SUBDIVISIONS: usize = 12;

/// Estimator selection with hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind<T> {
    /// Unpenalized least squares, one problem per target quarter.
    Ols,
    /// Ridge penalty on the surface amplitude.
    Ta { lambda: T },
    /// Curvature penalties along both surface directions.
    Ts { lambda1: T, lambda2: T },
    /// Cubic polynomial trend plus ridge-penalized radial bumps on an
    /// (m+1) x (m+1) center grid.
    Rbf { lambda: T, sigma: T, m: usize },
    /// Sparse surface keeping the main diagonal and the last column, each
    /// with its own curvature penalty.
    Te { lambda_diag: T, lambda_last: T },
    /// Sparse surface keeping only the main diagonal.
    One { lambda_diag: T },
}

impl<T: Scalar> EstimatorKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Ols => "OLS",
            EstimatorKind::Ta { .. } => "TA",
            EstimatorKind::Ts { .. } => "TS",
            EstimatorKind::Rbf { .. } => "RBF",
            EstimatorKind::Te { .. } => "TE",
            EstimatorKind::One { .. } => "OnE",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |l: T, what: &str| {
            if l < T::zero() || !Float::is_finite(l) {
                Err(Error::Config(format!("{what} must be finite and >= 0")))
            } else {
                Ok(())
            }
        };
        match *self {
            EstimatorKind::Ols => Ok(()),
            EstimatorKind::Ta { lambda } => check(lambda, "lambda"),
            EstimatorKind::Ts { lambda1, lambda2 } => {
                check(lambda1, "lambda1")?;
                check(lambda2, "lambda2")
            }
            EstimatorKind::Rbf { lambda, sigma, m } => {
                check(lambda, "lambda")?;
                if sigma <= T::zero() {
                    return Err(Error::Config("sigma must be > 0".into()));
                }
                if m < 1 {
                    return Err(Error::Config("m must be >= 1".into()));
                }
                Ok(())
            }
            EstimatorKind::Te {
                lambda_diag,
                lambda_last,
            } => {
                check(lambda_diag, "lambda_diag")?;
                check(lambda_last, "lambda_last")
            }
            EstimatorKind::One { lambda_diag } => check(lambda_diag, "lambda_diag"),
        }
    }
}

impl<T: Scalar> fmt::Display for EstimatorKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EstimatorKind::Ols => write!(f, "OLS"),
            EstimatorKind::Ta { lambda } => write!(f, "TA(lambda={lambda})"),
            EstimatorKind::Ts { lambda1, lambda2 } => {
                write!(f, "TS(lambda1={lambda1}, lambda2={lambda2})")
            }
            EstimatorKind::Rbf { lambda, sigma, m } => {
                write!(f, "RBF(lambda={lambda}, sigma={sigma}, m={m})")
            }
            EstimatorKind::Te {
                lambda_diag,
                lambda_last,
            } => write!(f, "TE(lambda_diag={lambda_diag}, lambda_last={lambda_last})"),
            EstimatorKind::One { lambda_diag } => write!(f, "OnE(lambda_diag={lambda_diag})"),
        }
    }
}

/// Accumulated normal-equation blocks shared by every estimator.
#[derive(Clone, Debug)]
pub struct NormalData<T> {
    pub q: usize,
    pub n_pairs: usize,
    /// G = sum_d x_d x_d^T over predictors.
    pub gram: DMatrix<T>,
    /// B = sum_d x_d y_d^T; column i is the right-hand side for row i of A.
    pub cross: DMatrix<T>,
    /// Per-target-quarter sum of squares sum_d y_d[i]^2.
    pub yty: DVector<T>,
}

impl<T: Scalar> NormalData<T> {
    pub fn from_training(train: &TrainingSet<T>) -> Self {
        let q = train.q();
        let mut gram = DMatrix::zeros(q, q);
        let mut cross = DMatrix::zeros(q, q);
        let mut yty = DVector::zeros(q);
        for pair in train.pairs() {
            gram.syger(T::one(), &pair.predictor, &pair.predictor, T::one());
            gram.fill_upper_triangle_with_lower_triangle();
            cross.ger(T::one(), &pair.predictor, &pair.target, T::one());
            for i in 0..q {
                yty[i] += pair.target[i] * pair.target[i];
            }
        }
        NormalData {
            q,
            n_pairs: train.len(),
            gram,
            cross,
            yty,
        }
    }

    pub fn yty_total(&self) -> T {
        self.yty.sum()
    }
}

/// How the surface is stored; sparse kinds expose the same entry accessor.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceStorage<T> {
    Dense(DMatrix<T>),
    /// Main diagonal (q entries) and last column above the shared corner
    /// (q-1 entries); entry (q-1, q-1) lives in `diag`.
    TwoEdge { diag: DVector<T>, last: DVector<T> },
    Diagonal(DVector<T>),
}

impl<T: Scalar> SurfaceStorage<T> {
    fn tag(&self) -> &'static str {
        match self {
            SurfaceStorage::Dense(_) => "dense",
            SurfaceStorage::TwoEdge { .. } => "two_edge",
            SurfaceStorage::Diagonal(_) => "diagonal",
        }
    }
}

/// A fitted q x q weight surface with provenance and complexity accounting.
#[derive(Clone, Debug)]
pub struct WeightSurface<T> {
    q: usize,
    storage: SurfaceStorage<T>,
    dof: T,
    rss: T,
    penalty_value: T,
    kind: Option<EstimatorKind<T>>,
    window: Option<(DaySerial, DaySerial)>,
}

impl<T: Scalar> WeightSurface<T> {
    /// The all-zero surface: the persistence forecaster.
    pub fn zeros(q: usize) -> Self {
        WeightSurface {
            q,
            storage: SurfaceStorage::Dense(DMatrix::zeros(q, q)),
            dof: T::zero(),
            rss: T::zero(),
            penalty_value: T::zero(),
            kind: None,
            window: None,
        }
    }

    pub fn from_parts(
        q: usize,
        storage: SurfaceStorage<T>,
        dof: T,
        kind: Option<EstimatorKind<T>>,
    ) -> Result<Self> {
        let ok = match &storage {
            SurfaceStorage::Dense(m) => m.nrows() == q && m.ncols() == q,
            SurfaceStorage::TwoEdge { diag, last } => diag.len() == q && last.len() == q - 1,
            SurfaceStorage::Diagonal(diag) => diag.len() == q,
        };
        if !ok {
            return Err(Error::Dimension(format!(
                "surface storage does not match q = {q}"
            )));
        }
        Ok(WeightSurface {
            q,
            storage,
            dof,
            rss: T::zero(),
            penalty_value: T::zero(),
            kind,
            window: None,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dof(&self) -> T {
        self.dof
    }

    pub fn rss(&self) -> T {
        self.rss
    }

    pub fn penalty_value(&self) -> T {
        self.penalty_value
    }

    pub fn kind(&self) -> Option<&EstimatorKind<T>> {
        self.kind.as_ref()
    }

    pub fn window(&self) -> Option<(DaySerial, DaySerial)> {
        self.window
    }

    pub fn storage(&self) -> &SurfaceStorage<T> {
        &self.storage
    }

    /// Entry a(i, j), 0-based.
    pub fn entry(&self, i: usize, j: usize) -> T {
        match &self.storage {
            SurfaceStorage::Dense(m) => m[(i, j)],
            SurfaceStorage::TwoEdge { diag, last } => {
                if j == i {
                    diag[i]
                } else if j == self.q - 1 && i < self.q - 1 {
                    last[i]
                } else {
                    T::zero()
                }
            }
            SurfaceStorage::Diagonal(diag) => {
                if j == i {
                    diag[i]
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        match &self.storage {
            SurfaceStorage::Dense(m) => m.clone(),
            _ => DMatrix::from_fn(self.q, self.q, |i, j| self.entry(i, j)),
        }
    }

    /// A x, honoring the sparse structure.
    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        assert_eq!(x.len(), self.q, "surface apply dimension");
        match &self.storage {
            SurfaceStorage::Dense(m) => m * x,
            SurfaceStorage::TwoEdge { diag, last } => {
                let x_last = x[self.q - 1];
                DVector::from_fn(self.q, |i, _| {
                    let edge = if i < self.q - 1 { last[i] * x_last } else { T::zero() };
                    diag[i] * x[i] + edge
                })
            }
            SurfaceStorage::Diagonal(diag) => DVector::from_fn(self.q, |i, _| diag[i] * x[i]),
        }
    }

    /// Writes the dense matrix as q rows of comma-separated values plus a
    /// `<stem>.meta.json` sidecar with kind, hyperparameters, dof, and the
    /// training window.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let dense = self.to_dense();
        let mut out = String::new();
        for i in 0..self.q {
            let row: Vec<String> = (0..self.q).map(|j| format!("{}", dense[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;

        let meta = SurfaceMeta {
            q: self.q,
            storage: self.storage.tag().to_string(),
            dof: self.dof,
            rss: self.rss,
            penalty_value: self.penalty_value,
            kind: self.kind,
            train_start: self.window.map(|(s, _)| s.date()).transpose()?,
            train_end: self.window.map(|(_, e)| e.date()).transpose()?,
        };
        let meta_json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(sidecar_path(path), meta_json)?;
        Ok(())
    }

    /// Reads a surface written by [`WeightSurface::write_csv`].
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let meta_path = sidecar_path(path);
        let meta: SurfaceMeta<T> = serde_json::from_str(
            &std::fs::read_to_string(&meta_path).map_err(|e| {
                Error::Config(format!(
                    "surface sidecar {} unreadable: {e}",
                    meta_path.display()
                ))
            })?,
        )?;
        let content = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<T> = line
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .ok()
                        .and_then(|v| num_traits::FromPrimitive::from_f64(v))
                        .ok_or_else(|| Error::Csv {
                            line: i + 1,
                            message: format!("bad surface value {tok:?}"),
                        })
                })
                .collect::<Result<_>>()?;
            if row.len() != meta.q {
                return Err(Error::Csv {
                    line: i + 1,
                    message: format!("expected {} values, found {}", meta.q, row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != meta.q {
            return Err(Error::Config(format!(
                "surface has {} rows, sidecar says q = {}",
                rows.len(),
                meta.q
            )));
        }
        let q = meta.q;
        let dense = DMatrix::from_fn(q, q, |i, j| rows[i][j]);
        let storage = match meta.storage.as_str() {
            "two_edge" => SurfaceStorage::TwoEdge {
                diag: DVector::from_fn(q, |i, _| dense[(i, i)]),
                last: DVector::from_fn(q - 1, |i, _| dense[(i, q - 1)]),
            },
            "diagonal" => SurfaceStorage::Diagonal(DVector::from_fn(q, |i, _| dense[(i, i)])),
            _ => SurfaceStorage::Dense(dense),
        };
        let window = match (meta.train_start, meta.train_end) {
            (Some(s), Some(e)) => Some((DaySerial::from_date(s)?, DaySerial::from_date(e)?)),
            _ => None,
        };
        Ok(WeightSurface {
            q,
            storage,
            dof: meta.dof,
            rss: meta.rss,
            penalty_value: meta.penalty_value,
            kind: meta.kind,
            window,
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
struct SurfaceMeta<T> {
    q: usize,
    storage: String,
    dof: T,
    rss: T,
    penalty_value: T,
    kind: Option<EstimatorKind<T>>,
    train_start: Option<NaiveDate>,
    train_end: Option<NaiveDate>,
}

/// The interleaved two-edge parameter vector
/// (a(1,1), a(1,q), a(2,2), a(2,q), ..., a(q,q)); the shared corner closes
/// both chains, giving 2q-1 entries.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeParams<T> {
    beta: DVector<T>,
}

impl<T: Scalar> EdgeParams<T> {
    pub fn from_vector(beta: DVector<T>) -> Result<Self> {
        if beta.len().is_multiple_of(2) || beta.len() < 5 {
            return Err(Error::Dimension(format!(
                "edge parameter vector must have odd length 2q-1 >= 5, got {}",
                beta.len()
            )));
        }
        Ok(EdgeParams { beta })
    }

    pub fn from_edges(diag: &DVector<T>, last: &DVector<T>) -> Result<Self> {
        let q = diag.len();
        if last.len() != q - 1 {
            return Err(Error::Dimension(format!(
                "diagonal has {q} entries, last column must have {}",
                q - 1
            )));
        }
        let mut beta = DVector::zeros(2 * q - 1);
        for k in 0..q - 1 {
            beta[2 * k] = diag[k];
            beta[2 * k + 1] = last[k];
        }
        beta[2 * q - 2] = diag[q - 1];
        Ok(EdgeParams { beta })
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn q(&self) -> usize {
        self.beta.len().div_ceil(2)
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.beta
    }

    pub fn diag(&self) -> DVector<T> {
        DVector::from_fn(self.q(), |k, _| self.beta[2 * k])
    }

    pub fn last(&self) -> DVector<T> {
        DVector::from_fn(self.q() - 1, |k, _| self.beta[2 * k + 1])
    }
}

/// Polynomial-plus-radial design on the q x q index grid, rows ordered to
/// match the row-major surface vectorization.
#[derive(Clone, Debug)]
pub struct RbfBasis<T> {
    q: usize,
    m: usize,
    design: DMatrix<T>,
}

impl<T: Scalar> RbfBasis<T> {
    pub const POLY_COLS: usize = 10;

    pub fn new(q: usize, sigma: T, m: usize) -> Result<Self> {
        if sigma <= T::zero() || m < 1 {
            return Err(Error::Config(
                "radial basis needs sigma > 0 and m >= 1".into(),
            ));
        }
        let radial = (m + 1) * (m + 1);
        let two_sigma_sq = num::<T>(2.0) * sigma * sigma;
        let centers: Vec<T> = (0..=m)
            .map(|k| num::<T>(q as f64 * k as f64 / m as f64))
            .collect();
        let design = DMatrix::from_fn(q * q, Self::POLY_COLS + radial, |p, c| {
            let i = num::<T>((p / q + 1) as f64);
            let j = num::<T>((p % q + 1) as f64);
            if c < Self::POLY_COLS {
                match c {
                    0 => T::one(),
                    1 => i,
                    2 => j,
                    3 => i * i,
                    4 => i * j,
                    5 => j * j,
                    6 => i * i * i,
                    7 => i * i * j,
                    8 => i * j * j,
                    _ => j * j * j,
                }
            } else {
                let idx = c - Self::POLY_COLS;
                let w = centers[idx / (m + 1)];
                let v = centers[idx % (m + 1)];
                let r_sq = (i - w) * (i - w) + (j - v) * (j - v);
                Float::exp(-r_sq / two_sigma_sq)
            }
        });
        Ok(RbfBasis { q, m, design })
    }

    pub fn radial_cols(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn cols(&self) -> usize {
        Self::POLY_COLS + self.radial_cols()
    }

    pub fn design(&self) -> &DMatrix<T> {
        &self.design
    }

    /// Surface implied by stacked coefficients (c, theta).
    pub fn surface(&self, beta: &DVector<T>) -> DMatrix<T> {
        let flat = &self.design * beta;
        let q = self.q;
        DMatrix::from_fn(q, q, |i, j| flat[i * q + j])
    }
}

/// Unpenalized fit; requires a nonsingular Gram matrix (at least q pairs in
/// general position).
pub fn fit_ols<T: Scalar>(train: &TrainingSet<T>) -> Result<WeightSurface<T>> {
    fit_ta(train, T::zero()).map_err(|e| match e {
        Error::RankDeficient { rank, dim, .. } => Error::RankDeficient {
            rank,
            dim,
            context:
                "least-squares Gram matrix is singular; add training days or use a regularized \
                 estimator (ta, ts, rbf)"
                    .into(),
        },
        other => other,
    })
}

/// Ridge-penalized fit, q independent row problems.
pub fn fit_ta<T: Scalar>(train: &TrainingSet<T>, lambda: T) -> Result<WeightSurface<T>> {
    EstimatorKind::Ta { lambda }.validate()?;
    let nd = NormalData::from_training(train);
    let penalty = if lambda == T::zero() {
        PenaltySpec::none(nd.q)
    } else {
        PenaltySpec::ridge(nd.q, lambda)
    };
    let fit = solve_rowwise(&nd.gram, &nd.cross, &nd.yty, &penalty)?;
    let kind = if lambda == T::zero() {
        EstimatorKind::Ols
    } else {
        EstimatorKind::Ta { lambda }
    };
    Ok(WeightSurface {
        q: nd.q,
        storage: SurfaceStorage::Dense(fit.matrix()),
        dof: fit.dof,
        rss: fit.rss,
        penalty_value: fit.penalty_value,
        kind: Some(kind),
        window: train.window(),
    })
}

/// Curvature-penalized fit over both surface directions.
pub fn fit_ts<T: Scalar>(
    train: &TrainingSet<T>,
    lambda1: T,
    lambda2: T,
) -> Result<WeightSurface<T>> {
    EstimatorKind::Ts { lambda1, lambda2 }.validate()?;
    let nd = NormalData::from_training(train);
    let fit = solve_kron(&nd.gram, &nd.cross, nd.yty_total(), lambda1, lambda2)?;
    Ok(WeightSurface {
        q: nd.q,
        storage: SurfaceStorage::Dense(fit.a),
        dof: fit.dof,
        rss: fit.rss,
        penalty_value: fit.penalty_value,
        kind: Some(EstimatorKind::Ts { lambda1, lambda2 }),
        window: train.window(),
    })
}

/// Polynomial-plus-radial surface fit; the ridge penalty acts on the radial
/// amplitudes only, so the cubic trend stays unpenalized.
pub fn fit_rbf<T: Scalar>(
    train: &TrainingSet<T>,
    lambda: T,
    sigma: T,
    m: usize,
) -> Result<WeightSurface<T>> {
    EstimatorKind::Rbf { lambda, sigma, m }.validate()?;
    let nd = NormalData::from_training(train);
    let q = nd.q;
    let basis = RbfBasis::new(q, sigma, m)?;
    let n_obs = q * nd.n_pairs;
    if basis.cols() > n_obs {
        return Err(Error::Config(format!(
            "radial basis fit needs at least {} observations, found {n_obs}",
            basis.cols()
        )));
    }

    // Reduced normal equations: with the full design Phi [P R], the Gram is
    // [P R]^T (I kron G) [P R] and the right side [P R]^T vec(B^T).
    let cols = basis.design();
    let mut weighted = DMatrix::<T>::zeros(q * q, basis.cols());
    for block in 0..q {
        let rows = cols.rows(block * q, q).into_owned();
        weighted.rows_mut(block * q, q).copy_from(&(&nd.gram * rows));
    }
    let xtx = cols.tr_mul(&weighted);
    let rhs_full = DVector::<T>::from_fn(q * q, |p, _| nd.cross[(p % q, p / q)]);
    let xty = cols.tr_mul(&rhs_full);
    let penalty = PenaltySpec::block_ridge(RbfBasis::<T>::POLY_COLS, basis.radial_cols(), lambda);
    let res = solve_normal(&xtx, &xty, nd.yty_total(), &penalty)?;

    Ok(WeightSurface {
        q,
        storage: SurfaceStorage::Dense(basis.surface(&res.beta)),
        dof: res.dof,
        rss: res.rss,
        penalty_value: res.penalty_value,
        kind: Some(EstimatorKind::Rbf { lambda, sigma, m }),
        window: train.window(),
    })
}

/// Two-edge fit: 2q-1 parameters against the per-quarter regressors
/// (x[k], x[q-1]), with curvature penalties on both edge chains.
pub fn fit_te<T: Scalar>(
    train: &TrainingSet<T>,
    lambda_diag: T,
    lambda_last: T,
) -> Result<WeightSurface<T>> {
    EstimatorKind::Te {
        lambda_diag,
        lambda_last,
    }
    .validate()?;
    let nd = NormalData::from_training(train);
    let q = nd.q;
    if q < 3 {
        return Err(Error::Dimension("two-edge fit needs q >= 3".into()));
    }
    let dim = 2 * q - 1;
    let lastq = q - 1;
    let mut xtx = DMatrix::<T>::zeros(dim, dim);
    let mut xty = DVector::<T>::zeros(dim);
    for k in 0..q - 1 {
        let (p, l) = (2 * k, 2 * k + 1);
        xtx[(p, p)] = nd.gram[(k, k)];
        xtx[(p, l)] = nd.gram[(k, lastq)];
        xtx[(l, p)] = nd.gram[(k, lastq)];
        xtx[(l, l)] = nd.gram[(lastq, lastq)];
        xty[p] = nd.cross[(k, k)];
        xty[l] = nd.cross[(lastq, k)];
    }
    xtx[(dim - 1, dim - 1)] = nd.gram[(lastq, lastq)];
    xty[dim - 1] = nd.cross[(lastq, lastq)];

    let penalty = PenaltySpec::two_edge(q, lambda_diag, lambda_last);
    let res = solve_normal(&xtx, &xty, nd.yty_total(), &penalty)?;
    let edges = EdgeParams::from_vector(res.beta)?;
    Ok(WeightSurface {
        q,
        storage: SurfaceStorage::TwoEdge {
            diag: edges.diag(),
            last: edges.last(),
        },
        dof: res.dof,
        rss: res.rss,
        penalty_value: res.penalty_value,
        kind: Some(EstimatorKind::Te {
            lambda_diag,
            lambda_last,
        }),
        window: train.window(),
    })
}

/// Diagonal-only fit: per-quarter scalar regressions coupled by the
/// curvature penalty.
pub fn fit_one<T: Scalar>(train: &TrainingSet<T>, lambda_diag: T) -> Result<WeightSurface<T>> {
    EstimatorKind::One { lambda_diag }.validate()?;
    let nd = NormalData::from_training(train);
    let q = nd.q;
    if q < 3 {
        return Err(Error::Dimension("one-edge fit needs q >= 3".into()));
    }
    let xtx = DMatrix::from_diagonal(&nd.gram.diagonal());
    let xty = DVector::from_fn(q, |k, _| nd.cross[(k, k)]);
    let penalty = if lambda_diag == T::zero() {
        PenaltySpec::none(q)
    } else {
        PenaltySpec::second_diff(q, lambda_diag)
    };
    let res = solve_normal(&xtx, &xty, nd.yty_total(), &penalty)?;
    Ok(WeightSurface {
        q,
        storage: SurfaceStorage::Diagonal(res.beta),
        dof: res.dof,
        rss: res.rss,
        penalty_value: res.penalty_value,
        kind: Some(EstimatorKind::One { lambda_diag }),
        window: train.window(),
    })
}

/// Fits the requested estimator.
pub fn fit<T: Scalar>(train: &TrainingSet<T>, kind: &EstimatorKind<T>) -> Result<WeightSurface<T>> {
    match *kind {
        EstimatorKind::Ols => fit_ols(train),
        EstimatorKind::Ta { lambda } => fit_ta(train, lambda),
        EstimatorKind::Ts { lambda1, lambda2 } => fit_ts(train, lambda1, lambda2),
        EstimatorKind::Rbf { lambda, sigma, m } => fit_rbf(train, lambda, sigma, m),
        EstimatorKind::Te {
            lambda_diag,
            lambda_last,
        } => fit_te(train, lambda_diag, lambda_last),
        EstimatorKind::One { lambda_diag } => fit_one(train, lambda_diag),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::DaySerial;
    use crate::series::TrainingPair;
    use crate::solver::{solve_dense, SecondDiffOperator};
    use crate::QUARTERS_PER_DAY;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut StdRng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn random_vec(rng: &mut StdRng, q: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(q, |_, _| scale * gaussian(rng))
    }

    /// Pairs with y = A x + noise, x standard normal.
    fn pairs_from_map(
        rng: &mut StdRng,
        a: &DMatrix<f64>,
        n: usize,
        noise_sd: f64,
    ) -> TrainingSet<f64> {
        let q = a.nrows();
        let pairs = (0..n)
            .map(|t| {
                let x = random_vec(rng, q, 1.0);
                let y = a * &x + random_vec(rng, q, noise_sd);
                TrainingPair {
                    day: DaySerial::new(1000 + t as i64),
                    predictor: x,
                    target: y,
                }
            })
            .collect();
        TrainingSet::from_pairs(q, pairs).unwrap()
    }

    fn random_training(rng: &mut StdRng, q: usize, n: usize) -> TrainingSet<f64> {
        let pairs = (0..n)
            .map(|t| TrainingPair {
                day: DaySerial::new(1000 + t as i64),
                predictor: random_vec(rng, q, 1.0),
                target: random_vec(rng, q, 1.0),
            })
            .collect();
        TrainingSet::from_pairs(q, pairs).unwrap()
    }

    /// Materializes the stacked design of the full-surface system.
    fn surface_design(train: &TrainingSet<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let q = train.q();
        let n = train.len();
        let mut x = DMatrix::zeros(n * q, q * q);
        let mut y = DVector::zeros(n * q);
        for (d, pair) in train.pairs().iter().enumerate() {
            for i in 0..q {
                for j in 0..q {
                    x[(d * q + i, i * q + j)] = pair.predictor[j];
                }
                y[d * q + i] = pair.target[i];
            }
        }
        (x, y)
    }

    #[test]
    fn ols_recovers_exact_linear_map_and_full_dof() {
        let mut rng = StdRng::seed_from_u64(101);
        let q = QUARTERS_PER_DAY;
        let a_true = DMatrix::from_fn(q, q, |_, _| 0.1 * gaussian(&mut rng));
        let train = pairs_from_map(&mut rng, &a_true, 200, 0.0);
        let fitted = fit_ols(&train).unwrap();
        assert!((fitted.to_dense() - &a_true).amax() < 1e-6);
        assert!((fitted.dof() - 9216.0).abs() < 1e-4 * 9216.0);
        assert!(fitted.rss() < 1e-10);
    }

    #[test]
    fn ols_with_too_few_pairs_advises_regularization() {
        let mut rng = StdRng::seed_from_u64(103);
        let train = random_training(&mut rng, QUARTERS_PER_DAY, 50);
        match fit_ols(&train) {
            Err(Error::RankDeficient { context, .. }) => {
                assert!(context.contains("regularized"))
            }
            other => panic!("expected rank error, got {:?}", other.map(|s| s.dof())),
        }
    }

    #[test]
    fn ta_at_zero_lambda_equals_ols() {
        let mut rng = StdRng::seed_from_u64(107);
        let train = random_training(&mut rng, 8, 40);
        let ols = fit_ols(&train).unwrap();
        let ta = fit_ta(&train, 0.0).unwrap();
        assert!((ols.to_dense() - ta.to_dense()).amax() < 1e-12);
        assert!((ols.dof() - ta.dof()).abs() < 1e-10);
    }

    #[test]
    fn ta_huge_lambda_shrinks_surface_to_zero() {
        let mut rng = StdRng::seed_from_u64(109);
        let train = random_training(&mut rng, 6, 30);
        let ta = fit_ta(&train, 1e12).unwrap();
        assert!(ta.to_dense().amax() < 1e-9);
        assert!(ta.dof() < 1e-6);
    }

    #[test]
    fn ta_matches_dense_tikhonov_oracle_small_q() {
        let mut rng = StdRng::seed_from_u64(113);
        let train = random_training(&mut rng, 6, 30);
        let ta = fit_ta(&train, 0.4).unwrap();
        let (x, y) = surface_design(&train);
        let dense = solve_dense(&x, &y, &PenaltySpec::ridge(36, 0.4)).unwrap();
        let a = ta.to_dense();
        for p in 0..36 {
            assert!((a[(p / 6, p % 6)] - dense.beta[p]).abs() < 1e-8);
        }
        assert!((ta.dof() - dense.dof).abs() < 1e-8 * (1.0 + dense.dof));
    }

    #[test]
    fn ts_at_zero_lambdas_equals_ols() {
        let mut rng = StdRng::seed_from_u64(127);
        let train = random_training(&mut rng, 8, 40);
        let ols = fit_ols(&train).unwrap();
        let ts = fit_ts(&train, 0.0, 0.0).unwrap();
        assert!((ols.to_dense() - ts.to_dense()).amax() < 1e-8);
    }

    #[test]
    fn ts_huge_lambdas_flatten_curvature() {
        let mut rng = StdRng::seed_from_u64(131);
        let train = random_training(&mut rng, 10, 60);
        let ts = fit_ts(&train, 1e12, 1e12).unwrap();
        let a = ts.to_dense();
        let d = SecondDiffOperator::new(10).unwrap().matrix::<f64>();
        let row_curv = (&a * d.transpose()).amax();
        let col_curv = (&d * &a).amax();
        assert!(row_curv < 1e-8, "row curvature {row_curv}");
        assert!(col_curv < 1e-8, "col curvature {col_curv}");
    }

    #[test]
    fn ts_matches_dense_tikhonov_oracle_q8() {
        let mut rng = StdRng::seed_from_u64(137);
        let train = random_training(&mut rng, 8, 50);
        let ts = fit_ts(&train, 1.3, 0.2).unwrap();
        let (x, y) = surface_design(&train);
        let dense = solve_dense(&x, &y, &PenaltySpec::surface_curvature(8, 1.3, 0.2)).unwrap();
        let a = ts.to_dense();
        for p in 0..64 {
            assert!((a[(p / 8, p % 8)] - dense.beta[p]).abs() < 1e-8);
        }
        assert!((ts.dof() - dense.dof).abs() < 1e-8 * (1.0 + dense.dof));
    }

    #[test]
    fn rbf_reproduces_exact_cubic_surface() {
        let mut rng = StdRng::seed_from_u64(139);
        let q = QUARTERS_PER_DAY;
        let basis = RbfBasis::<f64>::new(q, 4.0, 12).unwrap();
        // Cubic-only surface: scale coefficients so entries stay O(1).
        let mut beta = DVector::zeros(basis.cols());
        beta[0] = 0.3;
        beta[1] = 2e-3;
        beta[2] = -1e-3;
        beta[3] = 4e-5;
        beta[4] = -2e-5;
        beta[5] = 3e-5;
        beta[6] = -2e-7;
        beta[7] = 1e-7;
        beta[8] = -1e-7;
        beta[9] = 2e-7;
        let a_true = basis.surface(&beta);
        let train = pairs_from_map(&mut rng, &a_true, 250, 0.0);
        let fitted = fit_rbf(&train, 1.0, 4.0, 12).unwrap();
        assert!(
            (fitted.to_dense() - &a_true).amax() < 1e-6,
            "max error {}",
            (fitted.to_dense() - &a_true).amax()
        );
        assert!(fitted.rss() < 1e-8 * train.len() as f64);
    }

    #[test]
    fn rbf_basis_shape_and_center_hits() {
        let basis = RbfBasis::<f64>::new(QUARTERS_PER_DAY, 4.0, 12).unwrap();
        assert_eq!(basis.radial_cols(), 169);
        assert_eq!(basis.cols(), 179);
        let design = basis.design();
        // Radial entries are in (0, 1], hitting 1 exactly on a center.
        for p in 0..design.nrows() {
            for c in 10..design.ncols() {
                let v = design[(p, c)];
                assert!(v > 0.0 && v <= 1.0);
            }
        }
        // Grid point (8, 16) coincides with center (w_1, v_2) = (8, 16).
        let row = (8 - 1) * 96 + (16 - 1);
        let col = 10 + 13 + 2;
        assert_eq!(design[(row, col)], 1.0);
        // Non-center grid points never reach 1 in that column.
        let off_row = (9 - 1) * 96 + (16 - 1);
        assert!(design[(off_row, col)] < 1.0);
    }

    #[test]
    fn rbf_huge_lambda_leaves_polynomial_dof() {
        let mut rng = StdRng::seed_from_u64(149);
        let train = random_training(&mut rng, 24, 40);
        let fitted = fit_rbf(&train, 1e12, 2.0, 3).unwrap();
        assert!((fitted.dof() - 10.0).abs() < 1e-3, "dof {}", fitted.dof());
    }

    #[test]
    fn te_recovers_identity_dynamics() {
        let mut rng = StdRng::seed_from_u64(151);
        let q = QUARTERS_PER_DAY;
        let a_true = DMatrix::<f64>::identity(q, q);
        let noise = 0.01;
        let train = pairs_from_map(&mut rng, &a_true, 400, noise);
        let fitted = fit_te(&train, 0.0, 0.0).unwrap();
        match fitted.storage() {
            SurfaceStorage::TwoEdge { diag, last } => {
                // 2-parameter regressions at n=400, unit regressor variance:
                // estimate sd ~ noise/sqrt(n) = 5e-4; allow a wide band.
                for k in 0..q {
                    assert!((diag[k] - 1.0).abs() < 10.0 * noise, "diag[{k}] = {}", diag[k]);
                }
                for k in 0..q - 1 {
                    assert!(last[k].abs() < 10.0 * noise, "last[{k}] = {}", last[k]);
                }
            }
            other => panic!("expected two-edge storage, got {other:?}"),
        }
    }

    #[test]
    fn te_huge_lambdas_make_edges_affine() {
        let mut rng = StdRng::seed_from_u64(157);
        let train = random_training(&mut rng, 16, 80);
        let fitted = fit_te(&train, 1e12, 1e12).unwrap();
        let (diag, last) = match fitted.storage() {
            SurfaceStorage::TwoEdge { diag, last } => (diag.clone(), last.clone()),
            _ => unreachable!(),
        };
        let d16 = SecondDiffOperator::new(16).unwrap();
        assert!(d16.apply(&diag).amax() < 1e-8);
        let mut chain = last.clone().insert_row(15, 0.0);
        chain[15] = diag[15];
        assert!(d16.apply(&chain).amax() < 1e-8);
    }

    #[test]
    fn edge_params_interleaving_round_trips_with_191_parameters() {
        let q = QUARTERS_PER_DAY;
        let diag = DVector::from_fn(q, |k, _| k as f64);
        let last = DVector::from_fn(q - 1, |k, _| -(k as f64));
        let edges = EdgeParams::from_edges(&diag, &last).unwrap();
        assert_eq!(edges.len(), 191);
        assert_eq!(edges.diag(), diag);
        assert_eq!(edges.last(), last);
        let back = EdgeParams::from_vector(edges.as_vector().clone()).unwrap();
        assert_eq!(back.diag(), diag);
    }

    #[test]
    fn te_matches_dense_design_oracle() {
        let mut rng = StdRng::seed_from_u64(163);
        let q = 6;
        let train = random_training(&mut rng, q, 30);
        let fitted = fit_te(&train, 0.8, 1.7).unwrap();

        // Materialize the sparse design: row (d, k) has x[k] and x[q-1].
        let n = train.len();
        let dim = 2 * q - 1;
        let mut x = DMatrix::zeros(n * q, dim);
        let mut y = DVector::zeros(n * q);
        for (d, pair) in train.pairs().iter().enumerate() {
            for k in 0..q {
                let row = d * q + k;
                if k < q - 1 {
                    x[(row, 2 * k)] = pair.predictor[k];
                    x[(row, 2 * k + 1)] = pair.predictor[q - 1];
                } else {
                    x[(row, dim - 1)] = pair.predictor[q - 1];
                }
                y[row] = pair.target[k];
            }
        }
        let dense = solve_dense(&x, &y, &PenaltySpec::two_edge(q, 0.8, 1.7)).unwrap();
        let edges = EdgeParams::from_vector(dense.beta.clone()).unwrap();
        match fitted.storage() {
            SurfaceStorage::TwoEdge { diag, last } => {
                assert!((diag - edges.diag()).amax() < 1e-9);
                assert!((last - edges.last()).amax() < 1e-9);
            }
            _ => unreachable!(),
        }
        assert!((fitted.dof() - dense.dof).abs() < 1e-8 * (1.0 + dense.dof));
        assert!((fitted.rss() - dense.rss).abs() < 1e-7 * (1.0 + dense.rss));
    }

    #[test]
    fn one_edge_at_zero_lambda_matches_scalar_regressions() {
        let mut rng = StdRng::seed_from_u64(167);
        let q = 12;
        let train = random_training(&mut rng, q, 25);
        let fitted = fit_one(&train, 0.0).unwrap();
        for k in 0..q {
            let mut num = 0.0;
            let mut den = 0.0;
            for pair in train.pairs() {
                num += pair.predictor[k] * pair.target[k];
                den += pair.predictor[k] * pair.predictor[k];
            }
            assert!((fitted.entry(k, k) - num / den).abs() < 1e-10);
        }
    }

    #[test]
    fn one_edge_huge_lambda_goes_affine_with_dof_two() {
        let mut rng = StdRng::seed_from_u64(173);
        let train = random_training(&mut rng, 24, 60);
        let fitted = fit_one(&train, 1e12).unwrap();
        let diag = match fitted.storage() {
            SurfaceStorage::Diagonal(d) => d.clone(),
            _ => unreachable!(),
        };
        assert!(SecondDiffOperator::new(24).unwrap().apply(&diag).amax() < 1e-8);
        assert!((fitted.dof() - 2.0).abs() < 1e-3, "dof {}", fitted.dof());
    }

    #[test]
    fn one_edge_recovers_constant_diagonal() {
        let mut rng = StdRng::seed_from_u64(179);
        let q = QUARTERS_PER_DAY;
        let a_true = DMatrix::from_diagonal(&DVector::from_element(q, 0.3));
        let train = pairs_from_map(&mut rng, &a_true, 300, 0.01);
        let fitted = fit_one(&train, 1.0).unwrap();
        for k in 0..q {
            assert!((fitted.entry(k, k) - 0.3).abs() < 0.01);
        }
    }

    #[test]
    fn one_edge_matches_dense_design_oracle() {
        let mut rng = StdRng::seed_from_u64(181);
        let q = 8;
        let train = random_training(&mut rng, q, 30);
        let fitted = fit_one(&train, 2.3).unwrap();
        let n = train.len();
        let mut x = DMatrix::zeros(n * q, q);
        let mut y = DVector::zeros(n * q);
        for (d, pair) in train.pairs().iter().enumerate() {
            for k in 0..q {
                x[(d * q + k, k)] = pair.predictor[k];
                y[d * q + k] = pair.target[k];
            }
        }
        let dense = solve_dense(&x, &y, &PenaltySpec::second_diff(q, 2.3)).unwrap();
        for k in 0..q {
            assert!((fitted.entry(k, k) - dense.beta[k]).abs() < 1e-9);
        }
        assert!((fitted.dof() - dense.dof).abs() < 1e-8 * (1.0 + dense.dof));
    }

    #[test]
    fn rbf_matches_dense_design_oracle_small_q() {
        let mut rng = StdRng::seed_from_u64(191);
        let q = 6;
        let train = random_training(&mut rng, q, 30);
        let (m, sigma, lambda) = (2, 1.5, 0.6);
        let fitted = fit_rbf(&train, lambda, sigma, m).unwrap();

        let basis = RbfBasis::<f64>::new(q, sigma, m).unwrap();
        let (phi, y) = surface_design(&train);
        let x = phi * basis.design();
        let dense = solve_dense(
            &x,
            &y,
            &PenaltySpec::block_ridge(10, basis.radial_cols(), lambda),
        )
        .unwrap();
        let a_dense = basis.surface(&dense.beta);
        assert!((fitted.to_dense() - a_dense).amax() < 1e-8);
        assert!((fitted.dof() - dense.dof).abs() < 1e-8 * (1.0 + dense.dof));
    }

    #[test]
    fn all_estimators_match_dense_oracle_at_reduced_q() {
        let mut rng = StdRng::seed_from_u64(227);
        for &q in &[4usize, 6, 8] {
            let train = random_training(&mut rng, q, 8 * q);
            let (phi, y) = surface_design(&train);
            let lambda = 0.6;
            let check_surface = |fitted: &WeightSurface<f64>, dense: &crate::solver::SolveResult<f64>, a_dense: &DMatrix<f64>, name: &str| {
                let a = fitted.to_dense();
                assert!(
                    (a - a_dense).amax() <= 1e-8 * (1.0 + a_dense.amax()),
                    "{name} at q = {q}"
                );
                assert!(
                    (fitted.dof() - dense.dof).abs() <= 1e-8 * (1.0 + dense.dof),
                    "{name} dof at q = {q}"
                );
            };
            let reshape = |beta: &DVector<f64>| DMatrix::from_fn(q, q, |i, j| beta[i * q + j]);

            let dense = solve_dense(&phi, &y, &PenaltySpec::none(q * q)).unwrap();
            check_surface(&fit_ols(&train).unwrap(), &dense, &reshape(&dense.beta), "OLS");

            let dense = solve_dense(&phi, &y, &PenaltySpec::ridge(q * q, lambda)).unwrap();
            check_surface(
                &fit_ta(&train, lambda).unwrap(),
                &dense,
                &reshape(&dense.beta),
                "TA",
            );

            let dense =
                solve_dense(&phi, &y, &PenaltySpec::surface_curvature(q, lambda, 2.0)).unwrap();
            check_surface(
                &fit_ts(&train, lambda, 2.0).unwrap(),
                &dense,
                &reshape(&dense.beta),
                "TS",
            );

            let (m, sigma) = (2usize, q as f64 / 4.0);
            let basis = RbfBasis::<f64>::new(q, sigma, m).unwrap();
            let x_rbf = &phi * basis.design();
            let dense = solve_dense(
                &x_rbf,
                &y,
                &PenaltySpec::block_ridge(10, basis.radial_cols(), lambda),
            )
            .unwrap();
            check_surface(
                &fit_rbf(&train, lambda, sigma, m).unwrap(),
                &dense,
                &basis.surface(&dense.beta),
                "RBF",
            );

            let dim = 2 * q - 1;
            let mut x_te = DMatrix::zeros(train.len() * q, dim);
            let mut x_one = DMatrix::zeros(train.len() * q, q);
            for (d, pair) in train.pairs().iter().enumerate() {
                for k in 0..q {
                    let row = d * q + k;
                    x_one[(row, k)] = pair.predictor[k];
                    if k < q - 1 {
                        x_te[(row, 2 * k)] = pair.predictor[k];
                        x_te[(row, 2 * k + 1)] = pair.predictor[q - 1];
                    } else {
                        x_te[(row, dim - 1)] = pair.predictor[q - 1];
                    }
                }
            }
            let dense = solve_dense(&x_te, &y, &PenaltySpec::two_edge(q, lambda, 2.0)).unwrap();
            let edges = EdgeParams::from_vector(dense.beta.clone()).unwrap();
            let mut a_te = DMatrix::zeros(q, q);
            for k in 0..q {
                a_te[(k, k)] = edges.diag()[k];
                if k < q - 1 {
                    a_te[(k, q - 1)] = edges.last()[k];
                }
            }
            check_surface(&fit_te(&train, lambda, 2.0).unwrap(), &dense, &a_te, "TE");

            let dense = solve_dense(&x_one, &y, &PenaltySpec::second_diff(q, lambda)).unwrap();
            check_surface(
                &fit_one(&train, lambda).unwrap(),
                &dense,
                &DMatrix::from_diagonal(&dense.beta),
                "OnE",
            );
        }
    }

    #[test]
    fn training_rss_nests_te_below_one_edge() {
        let mut rng = StdRng::seed_from_u64(193);
        let train = random_training(&mut rng, 10, 50);
        let te = fit_te(&train, 0.0, 0.0).unwrap();
        let one = fit_one(&train, 0.0).unwrap();
        assert!(te.rss() <= one.rss() + 1e-10);
    }

    #[test]
    fn ta_frobenius_norm_shrinks_with_lambda() {
        let mut rng = StdRng::seed_from_u64(197);
        let train = random_training(&mut rng, 8, 40);
        let mut last = f64::INFINITY;
        for &lambda in &[0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let norm = fit_ta(&train, lambda).unwrap().to_dense().norm();
            assert!(norm <= last + 1e-10, "norm rose at lambda {lambda}");
            last = norm;
        }
    }

    #[test]
    fn sparse_views_agree_with_dense_materialization() {
        let mut rng = StdRng::seed_from_u64(199);
        let train = random_training(&mut rng, 9, 40);
        for surface in [
            fit_te(&train, 0.5, 0.5).unwrap(),
            fit_one(&train, 0.5).unwrap(),
        ] {
            let dense = surface.to_dense();
            for i in 0..9 {
                for j in 0..9 {
                    assert_eq!(dense[(i, j)], surface.entry(i, j));
                }
            }
            let x = random_vec(&mut rng, 9, 1.0);
            assert!((surface.apply(&x) - dense * &x).amax() < 1e-12);
        }
    }

    #[test]
    fn surface_csv_round_trips_with_sidecar() {
        let mut rng = StdRng::seed_from_u64(211);
        let train = random_training(&mut rng, 8, 40);
        let surface = fit_te(&train, 0.3, 0.7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("surface.csv");
        surface.write_csv(&path).unwrap();
        assert!(dir.path().join("surface.meta.json").exists());

        let back = WeightSurface::<f64>::read_csv(&path).unwrap();
        assert_eq!(back.q(), 8);
        assert!(matches!(back.storage(), SurfaceStorage::TwoEdge { .. }));
        assert!((back.to_dense() - surface.to_dense()).amax() < 1e-12);
        assert!((back.dof() - surface.dof()).abs() < 1e-12);
        assert_eq!(back.kind().map(|k| k.name()), Some("TE"));
    }

    #[test]
    fn estimator_kind_serializes_with_snake_case_tags() {
        let kind = EstimatorKind::Ta { lambda: 0.1 };
        let json = serde_json::to_string(&kind).unwrap();
        assert_eq!(json, r#"{"kind":"ta","lambda":0.1}"#);
        let back: EstimatorKind<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kind);
        let one: EstimatorKind<f64> =
            serde_json::from_str(r#"{"kind":"one","lambda_diag":10000.0}"#).unwrap();
        assert_eq!(one.name(), "OnE");
    }
}
