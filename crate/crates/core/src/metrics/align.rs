//! Closed-form least-squares alignment of point sets.

use crate::metrics::MetricsError;
use crate::rotmath::{Matrix3, Quaternion, Rotation3, Vector3};
use crate::scalar::Real;

/// `q ≈ scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T> {
    pub rotation: Rotation3<T>,
    pub translation: Vector3<T>,
    pub scale: T,
}

impl<T: Real> Similarity<T> {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vector3::zeros(), scale: T::one() }
    }

    #[inline]
    pub fn apply(&self, p: Vector3<T>) -> Vector3<T> {
        self.rotation.apply(p) * self.scale + self.translation
    }

    /// Sum of squared residuals `Σ ‖s·R·p + t − q‖²`.
    pub fn residual(&self, p: &[Vector3<T>], q: &[Vector3<T>]) -> T {
        p.iter().zip(q).map(|(a, b)| (self.apply(*a) - *b).norm_squared()).sum()
    }
}

/// Jacobi eigen-decomposition of a symmetric matrix. Returns eigenvalues
/// in descending order and the matching eigenvectors as columns.
pub fn symmetric_eigen<T: Real, const N: usize>(mut a: [[T; N]; N]) -> ([T; N], [[T; N]; N]) {
    let mut v = [[T::zero(); N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for _sweep in 0..64 {
        let off: T = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: T = (0..N).map(|i| a[i][i] * a[i][i]).sum::<T>() + off;
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::two() * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = std::array::from_fn(|k| a[order[k]][order[k]]);
    let vectors = std::array::from_fn(|r| std::array::from_fn(|k| v[r][order[k]]));
    (values, vectors)
}

fn centroid<T: Real>(pts: &[Vector3<T>]) -> Vector3<T> {
    pts.iter().copied().sum::<Vector3<T>>() / T::from_usize_lossy(pts.len())
}

/// Cross-covariance `Σ (p − p̄)(q − q̄)ᵀ` and the source spread `Σ ‖p − p̄‖²`.
fn cross_covariance<T: Real>(p: &[Vector3<T>], q: &[Vector3<T>]) -> (Matrix3<T>, T, Vector3<T>, Vector3<T>) {
    let (pc, qc) = (centroid(p), centroid(q));
    let mut m = Matrix3::zeros();
    let mut spread = T::zero();
    for (a, b) in p.iter().zip(q) {
        let (a, b) = (*a - pc, *b - qc);
        m = m + Matrix3::outer(a, b);
        spread += a.norm_squared();
    }
    (m, spread, pc, qc)
}

/// Optimal similarity (or rigid motion) by Horn's quaternion method.
///
/// Always returns a minimiser; when the configuration is degenerate the
/// rotation is one of several equally good answers.
pub fn fit_similarity<T: Real>(p: &[Vector3<T>], q: &[Vector3<T>], with_scale: bool) -> Similarity<T> {
    if p.is_empty() {
        return Similarity::identity();
    }
    let (m, spread, pc, qc) = cross_covariance(p, q);
    let s = &m.m;
    let n = [
        [s[0][0] + s[1][1] + s[2][2], s[1][2] - s[2][1], s[2][0] - s[0][2], s[0][1] - s[1][0]],
        [s[1][2] - s[2][1], s[0][0] - s[1][1] - s[2][2], s[0][1] + s[1][0], s[2][0] + s[0][2]],
        [s[2][0] - s[0][2], s[0][1] + s[1][0], -s[0][0] + s[1][1] - s[2][2], s[1][2] + s[2][1]],
        [s[0][1] - s[1][0], s[2][0] + s[0][2], s[1][2] + s[2][1], -s[0][0] - s[1][1] + s[2][2]],
    ];
    let (values, vectors) = symmetric_eigen(n);
    let quat = Quaternion::new(vectors[0][0], vectors[1][0], vectors[2][0], vectors[3][0]);
    let rotation = Rotation3::from_quaternion(quat);
    let scale = if with_scale && spread > T::zero() { values[0] / spread } else { T::one() };
    let translation = qc - rotation.apply(pc) * scale;
    Similarity { rotation, translation, scale }
}

/// Least-squares similarity `Q ≈ s·R·P + t` (rigid when `with_scale` is
/// false). Rejects fewer than three points and covariances of rank < 2.
pub fn umeyama_align<T: Real>(p: &[Vector3<T>], q: &[Vector3<T>], with_scale: bool) -> Result<Similarity<T>, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::ShapeMismatch { what: "point counts", expected: p.len(), got: q.len() });
    }
    if p.len() < 3 {
        return Err(MetricsError::DegenerateConfiguration);
    }
    let (m, _, _, _) = cross_covariance(p, q);
    let (sv2, _) = symmetric_eigen((m.transpose() * m).m);
    let top = sv2[0].max(T::zero()).sqrt();
    let second = sv2[1].max(T::zero()).sqrt();
    if top <= T::zero() || second <= T::lit(1e-10) * top {
        return Err(MetricsError::DegenerateConfiguration);
    }
    Ok(fit_similarity(p, q, with_scale))
}
