//! 3D vectors and rotations.
//!
//! A [`Rotation3`] always stores a 3×3 orthonormal matrix. Axis-angle and
//! quaternion forms are conversion views, never the storage format.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::scalar::Real;

/// Horizontal projections shorter than this are treated as vertical.
pub const DEGENERATE_PROJECTION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RotError {
    #[error("horizontal (xz) projection is degenerate: norm {norm:e} <= 1e-6")]
    DegenerateHorizontalProjection { norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vector3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vector3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Returns `self / |self|`. A zero vector stays zero.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self / n
        } else {
            self
        }
    }

    /// Projection onto the xz-plane (y component dropped).
    #[inline]
    pub fn horizontal(self) -> Self {
        Self::new(self.x, T::zero(), self.z)
    }

    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn cast<U: Real>(self) -> Vector3<U> {
        Vector3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Add for Vector3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vector3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vector3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vector3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vector3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> AddAssign for Vector3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Real> SubAssign for Vector3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl<T: Real> Index<usize> for Vector3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vector3 index {i} out of range"),
        }
    }
}

impl<T: Real> std::iter::Sum for Vector3<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zeros(), |a, b| a + b)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Matrix3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn from_row_vectors(r0: Vector3<T>, r1: Vector3<T>, r2: Vector3<T>) -> Self {
        Self::from_rows([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn from_column_vectors(c0: Vector3<T>, c1: Vector3<T>, c2: Vector3<T>) -> Self {
        Self::from_row_vectors(c0, c1, c2).transpose()
    }

    pub fn zeros() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.m[i][i] = T::one();
        }
        m
    }

    /// `[v]×`, so that `skew(v) * w == v × w`.
    pub fn skew(v: Vector3<T>) -> Self {
        let z = T::zero();
        Self::from_rows([[z, -v.z, v.y], [v.z, z, -v.x], [-v.y, v.x, z]])
    }

    pub fn outer(a: Vector3<T>, b: Vector3<T>) -> Self {
        let a = a.to_array();
        let b = b.to_array();
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.m[i][j] = a[i] * b[j];
            }
        }
        m
    }

    pub fn row(&self, i: usize) -> Vector3<T> {
        Vector3::from_array(self.m[i])
    }

    pub fn col(&self, j: usize) -> Vector3<T> {
        Vector3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn scale(&self, s: T) -> Self {
        let mut r = *self;
        for row in r.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        r
    }

    pub fn frobenius_norm(&self) -> T {
        self.m.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.m
            .iter()
            .flatten()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn to_flat(&self) -> [T; 9] {
        let mut out = [T::zero(); 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.m[i][j];
            }
        }
        out
    }
}

impl<T: Real> Add for Matrix3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut r = self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }
}

impl<T: Real> Sub for Matrix3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut r = self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] -= o.m[i][j];
            }
        }
        r
    }
}

impl<T: Real> Mul for Matrix3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        r
    }
}

impl<T: Real> Mul<Vector3<T>> for Matrix3<T> {
    type Output = Vector3<T>;
    #[inline]
    fn mul(self, v: Vector3<T>) -> Vector3<T> {
        Vector3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
}

/// Unit quaternion in (w, x, y, z) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    fn vector(&self) -> Vector3<T> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Proper rotation of R³ stored as an orthonormal matrix with det +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3<T> {
    mat: Matrix3<T>,
}

impl<T: Real> Default for Rotation3<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Rotation3<T> {
    pub fn identity() -> Self {
        Self { mat: Matrix3::identity() }
    }

    /// Wraps a matrix that the caller guarantees is a rotation.
    pub fn from_matrix_unchecked(mat: Matrix3<T>) -> Self {
        Self { mat }
    }

    /// Wraps a matrix after checking orthonormality and orientation to `tol`.
    pub fn from_matrix(mat: Matrix3<T>, tol: T) -> Option<Self> {
        let r = Self { mat };
        (r.orthonormality_error() <= tol && (mat.determinant() - T::one()).abs() <= tol).then_some(r)
    }

    /// Rodrigues' formula. The zero vector maps to the identity.
    pub fn from_axis_angle(v: Vector3<T>) -> Self {
        let theta2 = v.norm_squared();
        let theta = theta2.sqrt();
        // sin(θ)/θ and (1 - cos θ)/θ², with series near zero.
        let (a, b) = if theta < T::lit(1e-4) {
            (
                T::one() - theta2 / T::lit(6.0),
                T::half() - theta2 / T::lit(24.0),
            )
        } else {
            (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
        };
        let k = Matrix3::skew(v);
        let mat = Matrix3::identity() + k.scale(a) + (k * k).scale(b);
        Self { mat }
    }

    /// Inverse of [`from_axis_angle`](Self::from_axis_angle); angle in `[0, π]`.
    pub fn to_axis_angle(&self) -> Vector3<T> {
        let q = self.to_quaternion();
        let v = q.vector();
        let vn = v.norm();
        let angle = T::two() * vn.atan2(q.w);
        let factor = if vn > T::lit(1e-12) {
            angle / vn
        } else {
            T::two() / q.w
        };
        v * factor
    }

    pub fn from_quaternion(q: Quaternion<T>) -> Self {
        let q = q.normalized();
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let two = T::two();
        let one = T::one();
        let mat = Matrix3::from_rows([
            [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
            [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
            [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
        ]);
        Self { mat }
    }

    /// Shepperd's method; the result has `w >= 0`.
    pub fn to_quaternion(&self) -> Quaternion<T> {
        let m = &self.mat.m;
        let tr = self.mat.trace();
        let quarter = T::lit(0.25);
        let two = T::two();
        let q = if tr > m[0][0] && tr > m[1][1] && tr > m[2][2] {
            let s = (T::one() + tr).sqrt() * two;
            Quaternion::new(
                quarter * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (T::one() + m[0][0] - m[1][1] - m[2][2]).sqrt() * two;
            Quaternion::new(
                (m[2][1] - m[1][2]) / s,
                quarter * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (T::one() + m[1][1] - m[0][0] - m[2][2]).sqrt() * two;
            Quaternion::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                quarter * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (T::one() + m[2][2] - m[0][0] - m[1][1]).sqrt() * two;
            Quaternion::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                quarter * s,
            )
        };
        let q = q.normalized();
        if q.w < T::zero() {
            Quaternion::new(-q.w, -q.x, -q.y, -q.z)
        } else {
            q
        }
    }

    /// Rotation about +y. Positive angles turn +z toward +x.
    pub fn about_y(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        let (z, o) = (T::zero(), T::one());
        Self { mat: Matrix3::from_rows([[c, z, s], [z, o, z], [-s, z, c]]) }
    }

    /// Rotation about +x. Positive angles turn +y toward +z.
    pub fn about_x(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        let (z, o) = (T::zero(), T::one());
        Self { mat: Matrix3::from_rows([[o, z, z], [z, c, -s], [z, s, c]]) }
    }

    /// Rotation about +z. Positive angles turn +x toward +y.
    pub fn about_z(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        let (z, o) = (T::zero(), T::one());
        Self { mat: Matrix3::from_rows([[c, -s, z], [s, c, z], [z, z, o]]) }
    }

    /// Builds a rotation from its first two columns by Gram–Schmidt
    /// (the continuous 6D parameterisation). Returns `None` when the
    /// columns are (near) parallel or zero.
    pub fn from_two_columns(a1: Vector3<T>, a2: Vector3<T>) -> Option<Self> {
        let n1 = a1.norm();
        if n1 <= T::epsilon() {
            return None;
        }
        let b1 = a1 / n1;
        let u = a2 - b1 * b1.dot(a2);
        let n2 = u.norm();
        if n2 <= T::epsilon() {
            return None;
        }
        let b2 = u / n2;
        let b3 = b1.cross(b2);
        Some(Self { mat: Matrix3::from_column_vectors(b1, b2, b3) })
    }

    /// First two columns, concatenated.
    pub fn to_two_columns(&self) -> [T; 6] {
        let c0 = self.mat.col(0);
        let c1 = self.mat.col(1);
        [c0.x, c0.y, c0.z, c1.x, c1.y, c1.z]
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<T> {
        &self.mat
    }

    /// The inverse, i.e. the transpose.
    #[inline]
    pub fn inverse(&self) -> Self {
        Self { mat: self.mat.transpose() }
    }

    #[inline]
    pub fn compose(&self, other: &Self) -> Self {
        Self { mat: self.mat * other.mat }
    }

    #[inline]
    pub fn apply(&self, v: Vector3<T>) -> Vector3<T> {
        self.mat * v
    }

    /// `‖RᵀR − I‖∞` (max abs entry).
    pub fn orthonormality_error(&self) -> T {
        (self.mat.transpose() * self.mat - Matrix3::identity()).max_abs()
    }

    /// Angle of the relative rotation `selfᵀ·other`, in `[0, π]`.
    ///
    /// Evaluated as `2·atan2(sin(θ/2), cos(θ/2))`, which equals
    /// `acos((tr − 1)/2)` but keeps full precision near 0 and π.
    pub fn geodesic_angle(&self, other: &Self) -> T {
        let rel = self.mat.transpose() * other.mat;
        let m = &rel.m;
        let skew = Vector3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]);
        let sin = skew.norm() / T::two();
        let cos = (rel.trace() - T::one()) / T::two();
        sin.atan2(cos).min(T::PI())
    }

    /// Gram–Schmidt re-orthonormalisation that treats the y row (gravity
    /// axis) as exact. Pure-yaw matrices keep their exact zeros and ones.
    pub fn reorthonormalize(&self) -> Self {
        let y = self.mat.row(1).normalized();
        let z = self.mat.row(2);
        let z = (z - y * y.dot(z)).normalized();
        let x = y.cross(z);
        Self { mat: Matrix3::from_row_vectors(x, y, z) }
    }

    pub fn cast<U: Real>(&self) -> Rotation3<U> {
        let mut m = Matrix3::<U>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.m[i][j] = U::lit(self.mat.m[i][j].as_f64());
            }
        }
        Rotation3 { mat: m }
    }
}

impl<T: Real> Mul for Rotation3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        self.compose(&o)
    }
}

impl<T: Real> Mul<Vector3<T>> for Rotation3<T> {
    type Output = Vector3<T>;
    #[inline]
    fn mul(self, v: Vector3<T>) -> Vector3<T> {
        self.apply(v)
    }
}

pub fn rot_from_axis_angle<T: Real>(v: Vector3<T>) -> Rotation3<T> {
    Rotation3::from_axis_angle(v)
}

pub fn rot_compose<T: Real>(a: &Rotation3<T>, b: &Rotation3<T>) -> Rotation3<T> {
    a.compose(b)
}

pub fn rot_inverse<T: Real>(a: &Rotation3<T>) -> Rotation3<T> {
    a.inverse()
}

pub fn geodesic_angle<T: Real>(a: &Rotation3<T>, b: &Rotation3<T>) -> T {
    a.geodesic_angle(b)
}

pub fn rot_about_y<T: Real>(theta: T) -> Rotation3<T> {
    Rotation3::about_y(theta)
}

/// Signed angle `θ` about +y such that `rot_about_y(θ)` carries the
/// normalized xz-projection of `u` onto that of `w`.
pub fn yaw_between_horizontal<T: Real>(u: Vector3<T>, w: Vector3<T>) -> Result<T, RotError> {
    let eps = T::lit(DEGENERATE_PROJECTION_EPS);
    let (uh, wh) = (u.horizontal(), w.horizontal());
    for n in [uh.norm(), wh.norm()] {
        if n <= eps {
            return Err(RotError::DegenerateHorizontalProjection { norm: n.as_f64() });
        }
    }
    // y-component of uh × wh is sin θ·|uh||wh| for a rotation taking +z to +x.
    let cross_y = uh.z * wh.x - uh.x * wh.z;
    Ok(cross_y.atan2(uh.dot(wh)))
}
