//! Gaussian information measures: entropy, mutual information, the
//! reciprocal information-loss proxy and eigen-based low-rank projection.
//!
//! All logarithms are natural, so results are in nats.

mod report;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
pub use report::{activation_info, layer_info_report, BlockInfo, InfoReport};

/// Symmetry tolerance for covariance inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the trace count as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Most negative mutual information accepted as rounding noise.
pub const MI_FLOOR: f64 = -1e-9;

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Numeric(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Numeric(format!(
                    "{what} is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
        if !m[(i, i)].is_finite() {
            return Err(Error::Numeric(format!("{what} has a non-finite diagonal")));
        }
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues sorted in decreasing order with matching eigenvector columns.
fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrized(m));
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &idx.iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// `ln |C|` of a symmetric PSD matrix, or `None` when it is singular.
fn log_det(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    let (values, _) = sorted_eigen(m);
    let trace: f64 = m.diagonal().iter().sum();
    let floor = RANK_TOL * trace.abs();
    if values.iter().any(|&v| v <= floor || v <= 0.0) {
        return None;
    }
    Some(values.iter().map(|v| v.ln()).sum())
}

/// A multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&cov, "covariance")?;
        if mean.len() != cov.nrows() {
            return Err(Error::Numeric(format!(
                "mean has {} entries, covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if cov.nrows() > 0 {
            let min = *sorted_eigen(&cov).0.last().expect("non-empty");
            if min < -PSD_TOL * (1.0 + cov.diagonal().amax()) {
                return Err(Error::Numeric(format!(
                    "covariance is not positive semi-definite (eigenvalue {min:e})"
                )));
            }
        }
        Ok(Self { mean, cov })
    }

    /// Zero-mean model.
    pub fn centered(cov: DMatrix<f64>) -> Result<Self> {
        Self::new(DVector::zeros(cov.nrows()), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// Jointly Gaussian pair `(X, Y)` with cross-covariance `C_XY`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    x: GaussianModel,
    y: GaussianModel,
    cross: DMatrix<f64>,
}

impl JointGaussian {
    pub fn new(x: GaussianModel, y: GaussianModel, cross: DMatrix<f64>) -> Result<Self> {
        if cross.shape() != (x.dim(), y.dim()) {
            return Err(Error::Numeric(format!(
                "cross-covariance must be {}x{}, got {}x{}",
                x.dim(),
                y.dim(),
                cross.nrows(),
                cross.ncols()
            )));
        }
        let joint = Self { x, y, cross };
        let c = joint.joint_cov();
        if c.nrows() > 0 {
            let min = *sorted_eigen(&c).0.last().expect("non-empty");
            if min < -PSD_TOL * (1.0 + c.diagonal().amax()) {
                return Err(Error::Numeric(format!(
                    "joint covariance is not positive semi-definite (eigenvalue {min:e})"
                )));
            }
        }
        Ok(joint)
    }

    /// Splits the covariance of a stacked vector `[X; Y]` with `dim_x`
    /// leading coordinates.
    pub fn from_joint_cov(cov: &DMatrix<f64>, dim_x: usize) -> Result<Self> {
        check_symmetric(cov, "joint covariance")?;
        let n = cov.nrows();
        if dim_x > n {
            return Err(Error::Numeric(format!("dim_x {dim_x} exceeds joint dimension {n}")));
        }
        let dim_y = n - dim_x;
        let x = GaussianModel::centered(cov.view((0, 0), (dim_x, dim_x)).into_owned())?;
        let y = GaussianModel::centered(cov.view((dim_x, dim_x), (dim_y, dim_y)).into_owned())?;
        Self::new(x, y, cov.view((0, dim_x), (dim_x, dim_y)).into_owned())
    }

    pub fn x(&self) -> &GaussianModel {
        &self.x
    }

    pub fn y(&self) -> &GaussianModel {
        &self.y
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    /// `[[C_X, C_XY], [C_YX, C_Y]]`.
    pub fn joint_cov(&self) -> DMatrix<f64> {
        let (nx, ny) = (self.x.dim(), self.y.dim());
        let mut c = DMatrix::zeros(nx + ny, nx + ny);
        c.view_mut((0, 0), (nx, nx)).copy_from(&self.x.cov);
        c.view_mut((nx, nx), (ny, ny)).copy_from(&self.y.cov);
        c.view_mut((0, nx), (nx, ny)).copy_from(&self.cross);
        c.view_mut((nx, 0), (ny, nx)).copy_from(&self.cross.transpose());
        c
    }

    /// The same pair with the roles of X and Y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            cross: self.cross.transpose(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    /// `-inf` when degenerate.
    pub nats: f64,
    /// The covariance is singular.
    pub degenerate: bool,
}

/// Differential entropy `½·ln((2πe)^n·|C|)`.
pub fn gaussian_entropy(g: &GaussianModel) -> Result<Entropy> {
    check_symmetric(&g.cov, "covariance")?;
    let n = g.dim() as f64;
    Ok(match log_det(&g.cov) {
        Some(ld) => Entropy {
            nats: 0.5 * (n * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + ld),
            degenerate: false,
        },
        None => Entropy {
            nats: f64::NEG_INFINITY,
            degenerate: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualInfo {
    /// `+inf` when fully correlated.
    pub nats: f64,
    /// The joint covariance is singular, so the information is unbounded.
    pub fully_correlated: bool,
}

/// `½·ln(|C_X|·|C_Y| / |C_joint|)`. Zero whenever the cross-covariance is
/// zero.
pub fn gaussian_mutual_info(j: &JointGaussian) -> Result<MutualInfo> {
    if j.cross.iter().all(|&v| v == 0.0) {
        return Ok(MutualInfo {
            nats: 0.0,
            fully_correlated: false,
        });
    }
    let parts = (log_det(&j.x.cov), log_det(&j.y.cov), log_det(&j.joint_cov()));
    let (Some(lx), Some(ly), Some(lj)) = parts else {
        return Ok(MutualInfo {
            nats: f64::INFINITY,
            fully_correlated: true,
        });
    };
    let mi = 0.5 * (lx + ly - lj);
    if mi < MI_FLOOR {
        return Err(Error::Numeric(format!("mutual information {mi:e} is negative")));
    }
    Ok(MutualInfo {
        nats: mi.max(0.0),
        fully_correlated: false,
    })
}

/// Information-loss proxy `1 / I` with unit proportionality constant; only
/// ratios between layers are meaningful. Zero information maps to
/// `+inf`.
pub fn info_loss_proxy(mi: f64) -> Result<f64> {
    if mi.is_nan() || mi < MI_FLOOR {
        return Err(Error::Numeric(format!(
            "information-loss proxy needs mutual information >= 0, got {mi}"
        )));
    }
    Ok(if mi <= 0.0 { f64::INFINITY } else { 1.0 / mi })
}

/// Sample mean and unbiased (`m − 1`) covariance of row samples.
pub fn empirical_covariance(samples: &[Vec<f64>]) -> Result<GaussianModel> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::Numeric(format!("covariance needs >= 2 samples, got {m}")));
    }
    let n = samples[0].len();
    if let Some(bad) = samples.iter().position(|s| s.len() != n) {
        return Err(Error::Numeric(format!(
            "sample {bad} has {} coordinates, expected {n}",
            samples[bad].len()
        )));
    }
    let data = DMatrix::from_fn(m, n, |i, j| samples[i][j]);
    covariance_of_rows(&data)
}

/// [`empirical_covariance`] for a matrix whose rows are samples.
pub fn covariance_of_rows(data: &DMatrix<f64>) -> Result<GaussianModel> {
    let m = data.nrows();
    if m < 2 {
        return Err(Error::Numeric(format!("covariance needs >= 2 samples, got {m}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("samples contain non-finite values".into()));
    }
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = symmetrized(&(centered.transpose() * &centered / (m as f64 - 1.0)));
    Ok(GaussianModel { mean, cov })
}

/// Top-`d` eigen-projection of a symmetric PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdProjection {
    /// `n × d`, orthonormal columns, leading eigenvectors first.
    pub basis: DMatrix<f64>,
    /// All eigenvalues in decreasing order, values under the rank
    /// tolerance set to zero.
    pub eigenvalues: Vec<f64>,
    /// Share of the eigenvalue mass kept by the first `d` directions.
    pub retention: f64,
}

impl SvdProjection {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `W_dᵀ·F` for a feature matrix with one column per sample.
    pub fn project(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.nrows() != self.basis.nrows() {
            return Err(Error::Numeric(format!(
                "features have {} rows, basis expects {}",
                features.nrows(),
                self.basis.nrows()
            )));
        }
        Ok(self.basis.transpose() * features)
    }
}

fn clamped_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (mut values, vectors) = sorted_eigen(m);
    let trace: f64 = m.diagonal().iter().sum();
    for v in &mut values {
        if *v < RANK_TOL * trace.abs() {
            *v = 0.0;
        }
    }
    (values, vectors)
}

fn retention_of(values: &[f64], d: usize) -> f64 {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    (values[..d].iter().sum::<f64>() / total).clamp(0.0, 1.0)
}

/// Projects onto the `d` leading eigenvectors of `m` (for a Gram matrix
/// `F·Fᵀ` these are the left singular vectors of `F`).
pub fn svd_project(m: &DMatrix<f64>, d: usize) -> Result<SvdProjection> {
    check_symmetric(m, "matrix")?;
    let n = m.nrows();
    if d == 0 || d > n {
        return Err(Error::Param(format!("rank must lie in 1..={n}, got {d}")));
    }
    let (eigenvalues, vectors) = clamped_eigen(m);
    let retention = retention_of(&eigenvalues, d);
    Ok(SvdProjection {
        basis: vectors.columns(0, d).into_owned(),
        eigenvalues,
        retention,
    })
}

/// Retention for every rank `1..=n` from a single decomposition.
pub fn retention_curve(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m, "matrix")?;
    let (values, _) = clamped_eigen(m);
    Ok((1..=values.len()).map(|d| retention_of(&values, d)).collect())
}
