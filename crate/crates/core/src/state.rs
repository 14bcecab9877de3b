//! Multipartite density matrices, pure states, Kraus sets and the
//! information-theoretic quantities built on them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CVec, Mat, C64, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
/// Eigenvalues at or below this floor contribute nothing to entropies.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Density operator on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    data: Mat,
    dims: Vec<usize>,
}

impl QState {
    /// Validates Hermiticity, positivity and the subsystem bookkeeping.
    pub fn new(data: Mat, dims: Vec<usize>) -> Result<Self> {
        check_dims(&data, &dims)?;
        let herm = linalg::hermiticity_defect(&data);
        if herm > HERMITIAN_TOL {
            return Err(Error::Invariant { what: "hermiticity", defect: herm });
        }
        let data = linalg::hermitian_part(&data);
        let min = linalg::min_eigenvalue(&data);
        if min < -PSD_TOL {
            return Err(Error::Invariant { what: "positivity", defect: -min });
        }
        Ok(Self { data, dims })
    }

    /// Skips the positivity check; the matrix is symmetrized.
    pub(crate) fn from_parts(data: Mat, dims: Vec<usize>) -> Self {
        debug_assert_eq!(data.nrows(), linalg::product(&dims));
        Self { data: linalg::hermitian_part(&data), dims }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n = linalg::product(&dims);
        Self { data: linalg::identity(n) * c(1.0 / n as f64, 0.0), dims }
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Self {
        let n = linalg::product(&dims);
        let mut data = Mat::zeros(n, n);
        data[(index, index)] = c(1.0, 0.0);
        Self { data, dims }
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn into_data(self) -> Mat {
        self.data
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn trace_normalized(&self) -> bool {
        (self.trace() - 1.0).abs() <= TRACE_TOL
    }

    pub fn normalized(&self) -> Self {
        let t = self.trace();
        Self { data: &self.data * c(1.0 / t, 0.0), dims: self.dims.clone() }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.data)
    }

    /// Reinterprets the subsystem partition without touching the matrix.
    pub fn regroup(&self, dims: Vec<usize>) -> Result<Self> {
        check_dims(&self.data, &dims)?;
        Ok(Self { data: self.data.clone(), dims })
    }
}

fn check_dims(data: &Mat, dims: &[usize]) -> Result<()> {
    if data.nrows() != data.ncols() {
        return Err(Error::Dimension(format!("{}x{} is not square", data.nrows(), data.ncols())));
    }
    if dims.is_empty() || dims.contains(&0) || linalg::product(dims) != data.nrows() {
        return Err(Error::Dimension(format!("dims {dims:?} incompatible with a {}x{} matrix", data.nrows(), data.ncols())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amp: CVec,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amp: CVec, dims: Vec<usize>) -> Result<Self> {
        if linalg::product(&dims) != amp.len() {
            return Err(Error::Dimension(format!("dims {dims:?} for a vector of length {}", amp.len())));
        }
        let norm = amp.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Invariant { what: "unit norm", defect: (norm - 1.0).abs() });
        }
        Ok(Self { amp, dims })
    }

    pub fn product_basis(dims: Vec<usize>, index: usize) -> Self {
        let mut amp = CVec::zeros(linalg::product(&dims));
        amp[index] = c(1.0, 0.0);
        Self { amp, dims }
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amp
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn density(&self) -> QState {
        QState { data: &self.amp * self.amp.adjoint(), dims: self.dims.clone() }
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let amp = self.amp.kronecker(&other.amp);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState { amp, dims }
    }
}

/// Ordered Kraus operators of one CP map.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<Mat>,
}

impl KrausSet {
    /// Requires `Σ K†K ⪯ I` within tolerance.
    pub fn new(ops: Vec<Mat>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::Dimension("empty Kraus set".into()))?;
        let (r, cols) = first.shape();
        if ops.iter().any(|k| k.shape() != (r, cols)) {
            return Err(Error::Dimension("Kraus operators differ in shape".into()));
        }
        let set = Self { ops };
        let excess = linalg::eigvalsh(&set.completeness()).last().copied().unwrap_or(0.0) - 1.0;
        if excess > HERMITIAN_TOL {
            return Err(Error::Invariant { what: "trace non-increase", defect: excess });
        }
        Ok(set)
    }

    pub fn ops(&self) -> &[Mat] {
        &self.ops
    }

    pub fn dim_in(&self) -> usize {
        self.ops[0].ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.ops[0].nrows()
    }

    /// `Σ K†K`.
    pub fn completeness(&self) -> Mat {
        let n = self.dim_in();
        self.ops.iter().fold(Mat::zeros(n, n), |acc, k| acc + k.adjoint() * k)
    }

    /// Max-abs distance of `Σ K†K` from the identity.
    pub fn tp_defect(&self) -> f64 {
        linalg::max_abs(&(self.completeness() - linalg::identity(self.dim_in())))
    }

    pub fn apply(&self, rho: &Mat) -> Mat {
        linalg::hermitian_part(&linalg::apply_kraus(&self.ops, 0, &[rho.nrows()], rho))
    }

    /// Applies the map to subsystem `sub` of `rho`.
    pub fn apply_on(&self, rho: &QState, sub: usize) -> Result<QState> {
        if sub >= rho.dims.len() {
            return Err(Error::SubsystemIndex { index: sub, count: rho.dims.len() });
        }
        if rho.dims[sub] != self.dim_in() {
            return Err(Error::Dimension(format!("Kraus input dim {} on subsystem of dim {}", self.dim_in(), rho.dims[sub])));
        }
        let data = linalg::apply_kraus(&self.ops, sub, &rho.dims, &rho.data);
        let mut dims = rho.dims.clone();
        dims[sub] = self.dim_out();
        Ok(QState::from_parts(data, dims))
    }
}

/// Kronecker product; dims are concatenated.
pub fn tensor(a: &QState, b: &QState) -> QState {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    QState { data: linalg::kron(&a.data, &b.data), dims }
}

/// Row-major offsets of every multi-index over `subset` (in the given order)
/// inside the full composite index space.
pub(crate) fn subset_offsets(dims: &[usize], subset: &[usize]) -> Vec<usize> {
    let strides = linalg::strides(dims);
    let mut offsets = vec![0usize];
    for &s in subset {
        let mut next = Vec::with_capacity(offsets.len() * dims[s]);
        for &o in &offsets {
            for digit in 0..dims[s] {
                next.push(o + digit * strides[s]);
            }
        }
        offsets = next;
    }
    offsets
}

fn validate_keep(dims: &[usize], keep: &[usize]) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if let Some(&bad) = k.iter().find(|&&i| i >= dims.len()) {
        return Err(Error::SubsystemIndex { index: bad, count: dims.len() });
    }
    Ok(k)
}

/// Partial trace of a square operator, keeping `keep` (ascending order).
pub fn partial_trace_mat(m: &Mat, dims: &[usize], keep: &[usize]) -> Result<Mat> {
    let keep = validate_keep(dims, keep)?;
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let koff = subset_offsets(dims, &keep);
    let toff = subset_offsets(dims, &traced);
    let mut out = Mat::zeros(koff.len(), koff.len());
    for (j, &kj) in koff.iter().enumerate() {
        for (i, &ki) in koff.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &toff {
                acc += m[(ki + t, kj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Adjoint of [`partial_trace_mat`]: `Y ⊗ I` on the traced subsystems.
pub fn embed_identity(y: &Mat, dims: &[usize], keep: &[usize]) -> Result<Mat> {
    let keep = validate_keep(dims, keep)?;
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let koff = subset_offsets(dims, &keep);
    let toff = subset_offsets(dims, &traced);
    if y.nrows() != koff.len() || y.ncols() != koff.len() {
        return Err(Error::Dimension(format!("{}x{} operator on kept space of dim {}", y.nrows(), y.ncols(), koff.len())));
    }
    let n = linalg::product(dims);
    let mut out = Mat::zeros(n, n);
    for (j, &kj) in koff.iter().enumerate() {
        for (i, &ki) in koff.iter().enumerate() {
            let v = y[(i, j)];
            if v == ZERO {
                continue;
            }
            for &t in &toff {
                out[(ki + t, kj + t)] = v;
            }
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &QState, keep: &[usize]) -> Result<QState> {
    let data = partial_trace_mat(&rho.data, &rho.dims, keep)?;
    let keep = validate_keep(&rho.dims, keep)?;
    let dims = if keep.is_empty() { vec![1] } else { keep.iter().map(|&i| rho.dims[i]).collect() };
    Ok(QState { data, dims })
}

fn validate_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Permutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Permutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// New subsystem `i` is old subsystem `perm[i]`.
pub fn permute_mat(m: &Mat, dims: &[usize], perm: &[usize]) -> Result<(Mat, Vec<usize>)> {
    validate_perm(perm, dims.len())?;
    let map = subset_offsets(dims, perm);
    let n = map.len();
    let out = Mat::from_fn(n, n, |i, j| m[(map[i], map[j])]);
    Ok((out, perm.iter().map(|&p| dims[p]).collect()))
}

pub fn permute_vec(v: &CVec, dims: &[usize], perm: &[usize]) -> Result<(CVec, Vec<usize>)> {
    validate_perm(perm, dims.len())?;
    let map = subset_offsets(dims, perm);
    Ok((CVec::from_fn(map.len(), |i, _| v[map[i]]), perm.iter().map(|&p| dims[p]).collect()))
}

pub fn permute_subsystems(rho: &QState, perm: &[usize]) -> Result<QState> {
    let (data, dims) = permute_mat(&rho.data, &rho.dims, perm)?;
    Ok(QState { data, dims })
}

/// `(1/√d) Σ_i |i⟩^{⊗n}`; `d = 1` gives the trivial one-dimensional state.
pub fn max_entangled(n_parties: usize, local_dim: usize) -> Result<PureState> {
    if n_parties < 2 || local_dim == 0 {
        return Err(Error::Parameter(format!("max_entangled({n_parties}, {local_dim})")));
    }
    let dims = vec![local_dim; n_parties];
    let n = linalg::product(&dims);
    let strides = linalg::strides(&dims);
    let step: usize = strides.iter().sum();
    let mut amp = CVec::zeros(n);
    let a = c(1.0 / (local_dim as f64).sqrt(), 0.0);
    for i in 0..local_dim {
        amp[i * step] = a;
    }
    Ok(PureState { amp, dims })
}

/// `-Σ λ log₂ λ` over eigenvalues above the floor; accepts unnormalized input.
pub fn entropy_unnormalized(m: &Mat) -> f64 {
    linalg::eigvalsh(m).into_iter().filter(|&l| l > EIGEN_FLOOR).map(|l| -l * l.log2()).sum()
}

pub fn von_neumann_entropy(rho: &QState) -> Result<f64> {
    if !rho.trace_normalized() {
        return Err(Error::NotNormalized(rho.trace()));
    }
    Ok(entropy_unnormalized(&rho.data).max(0.0))
}

/// `S(B) − S(AB)` with `A = subsystems[..cut]`, `B = subsystems[cut..]`.
pub fn coherent_information(rho: &QState, cut: usize) -> Result<f64> {
    if cut == 0 || cut >= rho.dims.len() {
        return Err(Error::SubsystemIndex { index: cut, count: rho.dims.len() });
    }
    let b: Vec<usize> = (cut..rho.dims.len()).collect();
    let rho_b = partial_trace(rho, &b)?;
    Ok(von_neumann_entropy(&rho_b)? - von_neumann_entropy(rho)?)
}

/// `S(A|B) = S(AB) − S(B)` for a pure state on `R ⊗ A ⊗ B`.
pub fn conditional_entropy(psi: &PureState) -> Result<f64> {
    if psi.dims.len() != 3 {
        return Err(Error::Dimension(format!("expected R,A,B subsystems, got dims {:?}", psi.dims)));
    }
    let rho = psi.density();
    let ab = partial_trace(&rho, &[1, 2])?;
    let b = partial_trace(&rho, &[2])?;
    Ok(von_neumann_entropy(&ab)? - von_neumann_entropy(&b)?)
}

/// `⟨φ|ρ|φ⟩`.
pub fn fidelity_to_pure(rho: &QState, phi: &PureState) -> Result<f64> {
    if rho.dim() != phi.amp.len() {
        return Err(Error::Dimension(format!("state dim {} vs target dim {}", rho.dim(), phi.amp.len())));
    }
    let v = phi.amp.adjoint() * &rho.data * &phi.amp;
    Ok(v[(0, 0)].re)
}

pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Haar-distributed pure state via a normalized complex Gaussian vector.
pub fn haar_random_pure(dim: usize, seed: u64) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::Parameter("haar_random_pure needs dim >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = gaussian_vector(dim, &mut rng);
    let norm = v.norm();
    Ok(PureState { amp: v / c(norm, 0.0), dims: vec![dim] })
}
