//! Complex Stiefel manifold `St(n, p) = {X ∈ C^{n×p} : X†X = I}` with the
//! embedded (real trace) metric, and products of such manifolds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat};
use crate::state::gaussian_vector;

pub const MEMBERSHIP_TOL: f64 = 1e-10;
pub const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    x: Mat,
}

impl StiefelPoint {
    pub fn new(x: Mat) -> Result<Self> {
        if x.nrows() < x.ncols() || x.ncols() == 0 {
            return Err(Error::Dimension(format!("Stiefel point needs n >= p >= 1, got {}x{}", x.nrows(), x.ncols())));
        }
        let defect = orthonormality_defect(&x);
        if defect > MEMBERSHIP_TOL {
            return Err(Error::Invariant { what: "X†X = I", defect });
        }
        Ok(Self { x })
    }

    /// Wraps `x` without checking orthonormality (ambient perturbations).
    pub fn from_matrix_unchecked(x: Mat) -> Self {
        Self { x }
    }

    pub fn matrix(&self) -> &Mat {
        &self.x
    }

    pub fn into_matrix(self) -> Mat {
        self.x
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x.shape()
    }

    pub fn defect(&self) -> f64 {
        orthonormality_defect(&self.x)
    }
}

/// Max-abs entry of `X†X − I`.
pub fn orthonormality_defect(x: &Mat) -> f64 {
    linalg::max_abs(&(x.adjoint() * x - linalg::identity(x.ncols())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    z: Mat,
}

impl TangentVector {
    pub fn matrix(&self) -> &Mat {
        &self.z
    }

    pub fn into_matrix(self) -> Mat {
        self.z
    }

    /// Max-abs entry of `Z†X + X†Z`.
    pub fn tangency_defect(&self, at: &StiefelPoint) -> f64 {
        let m = self.z.adjoint() * &at.x;
        linalg::max_abs(&(&m + m.adjoint()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { z: &self.z * c(s, 0.0) }
    }
}

/// Real part of `Tr[Z₁†Z₂]`.
pub fn inner(a: &TangentVector, b: &TangentVector) -> f64 {
    linalg::inner(&a.z, &b.z)
}

/// Sign-fixed thin QR: returns `Q` with `A = QR`, `R` having a positive real
/// diagonal.
pub fn qr_q(a: &Mat) -> Result<Mat> {
    let p = a.ncols();
    let qr = a.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].norm()).fold(0.0, f64::max).max(1.0);
    for i in 0..p {
        let rii = r[(i, i)];
        let mag = rii.norm();
        if mag <= 1e-12 * scale {
            return Err(Error::RankDeficient(mag));
        }
        let phase = rii / c(mag, 0.0);
        for row in 0..q.nrows() {
            q[(row, i)] *= phase;
        }
    }
    Ok(q)
}

pub fn random_point_with(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<StiefelPoint> {
    if n < p || p == 0 {
        return Err(Error::Dimension(format!("random_point needs n >= p >= 1, got ({n}, {p})")));
    }
    let g = gaussian_vector(n * p, rng);
    let ginibre = Mat::from_column_slice(n, p, g.as_slice());
    Ok(StiefelPoint { x: qr_q(&ginibre)? })
}

/// Orthonormalized complex Ginibre matrix.
pub fn random_point(n: usize, p: usize, seed: u64) -> Result<StiefelPoint> {
    random_point_with(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn check_shape(x: &StiefelPoint, v: &Mat) -> Result<()> {
    if x.x.shape() != v.shape() {
        return Err(Error::Dimension(format!("point {:?} vs ambient matrix {:?}", x.x.shape(), v.shape())));
    }
    Ok(())
}

/// `U = V − ½X(X†V + V†X)`.
pub fn project_tangent(x: &StiefelPoint, v: &Mat) -> Result<TangentVector> {
    check_shape(x, v)?;
    let xv = x.x.adjoint() * v;
    let sym = (&xv + xv.adjoint()) * c(0.5, 0.0);
    Ok(TangentVector { z: v - &x.x * sym })
}

/// Projects the Euclidean gradient `G = 2∂f/∂X*`.
pub fn riemannian_gradient(x: &StiefelPoint, g: &Mat) -> Result<TangentVector> {
    project_tangent(x, g)
}

/// `R(t) = qf(X + tU)`.
pub fn qr_retract(x: &StiefelPoint, u: &TangentVector, t: f64) -> Result<StiefelPoint> {
    check_shape(x, &u.z)?;
    Ok(StiefelPoint { x: qr_q(&(&x.x + &u.z * c(t, 0.0)))? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    parts: Vec<StiefelPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductTangent {
    parts: Vec<TangentVector>,
}

impl ProductPoint {
    pub fn new(parts: Vec<StiefelPoint>) -> Self {
        Self { parts }
    }

    pub fn from_matrices(mats: Vec<Mat>) -> Result<Self> {
        Ok(Self { parts: mats.into_iter().map(StiefelPoint::new).collect::<Result<_>>()? })
    }

    /// Builds a product of unchecked ambient matrices; evaluation code accepts
    /// these, which is what finite-difference checks need.
    pub fn from_matrices_unchecked(mats: Vec<Mat>) -> Self {
        Self { parts: mats.into_iter().map(StiefelPoint::from_matrix_unchecked).collect() }
    }

    pub fn random_with(shapes: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Result<Self> {
        let parts = shapes.iter().map(|&(n, p)| random_point_with(n, p, rng)).collect::<Result<_>>()?;
        Ok(Self { parts })
    }

    pub fn random(shapes: &[(usize, usize)], seed: u64) -> Result<Self> {
        Self::random_with(shapes, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn parts(&self) -> &[StiefelPoint] {
        &self.parts
    }

    pub fn part(&self, i: usize) -> &StiefelPoint {
        &self.parts[i]
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.parts.iter().map(|p| p.shape()).collect()
    }

    pub fn max_defect(&self) -> f64 {
        self.parts.iter().map(|p| p.defect()).fold(0.0, f64::max)
    }

    fn check_count(&self, n: usize) -> Result<()> {
        if n != self.parts.len() {
            return Err(Error::Layout(format!("{} parts in point, {} in vector", self.parts.len(), n)));
        }
        Ok(())
    }

    pub fn project(&self, v: &[Mat]) -> Result<ProductTangent> {
        self.check_count(v.len())?;
        let parts = self.parts.iter().zip(v).map(|(x, v)| project_tangent(x, v)).collect::<Result<_>>()?;
        Ok(ProductTangent { parts })
    }

    pub fn riemannian_gradient(&self, g: &[Mat]) -> Result<ProductTangent> {
        self.project(g)
    }

    pub fn retract(&self, u: &ProductTangent, t: f64) -> Result<ProductPoint> {
        self.check_count(u.parts.len())?;
        let parts = self.parts.iter().zip(&u.parts).map(|(x, u)| qr_retract(x, u, t)).collect::<Result<_>>()?;
        Ok(ProductPoint { parts })
    }
}

impl ProductTangent {
    pub fn parts(&self) -> &[TangentVector] {
        &self.parts
    }

    pub fn inner(&self, other: &ProductTangent) -> f64 {
        self.parts.iter().zip(&other.parts).map(|(a, b)| inner(a, b)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { parts: self.parts.iter().map(|p| p.scaled(s)).collect() }
    }

    pub fn max_tangency_defect(&self, at: &ProductPoint) -> f64 {
        self.parts.iter().zip(&at.parts).map(|(u, x)| u.tangency_defect(x)).fold(0.0, f64::max)
    }
}
