//! Dense complex matrix helpers shared by every module.
//!
//! Composite indices are row-major over subsystems: the first subsystem is the
//! most significant digit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Real part of `Tr[a† b]`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn frob_norm_sq(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn hermiticity_defect(m: &Mat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Real trace of `a·b` without forming the product.
pub fn trace_product(a: &Mat, b: &Mat) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &Mat) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn spectral_map(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// Projection onto the positive semidefinite cone (eigenvalue clipping).
pub fn psd_projection(m: &Mat) -> Mat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let keep: Vec<usize> = (0..n).filter(|&j| vals[j] > 0.0).collect();
    if keep.is_empty() {
        return Mat::zeros(n, n);
    }
    let mut v = Mat::zeros(n, keep.len());
    let mut vs = Mat::zeros(n, keep.len());
    for (col, &j) in keep.iter().enumerate() {
        v.set_column(col, &vecs.column(j));
        vs.set_column(col, &(vecs.column(j) * c(vals[j], 0.0)));
    }
    hermitian_part(&(vs * v.adjoint()))
}

pub fn product(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Computes `(I ⊗ K ⊗ I)·M` where `K` acts on subsystem `sub` of the row space
/// of `M` (row dimensions `dims`). Columns of `M` are untouched.
pub fn apply_left(k: &Mat, sub: usize, dims: &[usize], m: &Mat) -> Mat {
    let d_in = dims[sub];
    assert_eq!(k.ncols(), d_in, "operator/subsystem dimension mismatch");
    let d_out = k.nrows();
    let pre = product(&dims[..sub]);
    let post = product(&dims[sub + 1..]);
    let rows_in = pre * d_in * post;
    assert_eq!(m.nrows(), rows_in, "matrix rows do not match subsystem dims");
    let rows_out = pre * d_out * post;
    let ncols = m.ncols();
    let mut out = Mat::zeros(rows_out, ncols);
    let src = m.as_slice();
    let dst = out.as_mut_slice();
    for col in 0..ncols {
        let s = &src[col * rows_in..(col + 1) * rows_in];
        let d = &mut dst[col * rows_out..(col + 1) * rows_out];
        for p in 0..pre {
            for a in 0..d_in {
                let sbase = (p * d_in + a) * post;
                let sblock = &s[sbase..sbase + post];
                for o in 0..d_out {
                    let kk = k[(o, a)];
                    if kk == ZERO {
                        continue;
                    }
                    let dbase = (p * d_out + o) * post;
                    for (dq, sq) in d[dbase..dbase + post].iter_mut().zip(sblock) {
                        *dq += kk * sq;
                    }
                }
            }
        }
    }
    out
}

/// `(I⊗K⊗I) ρ (I⊗K⊗I)†` for a Hermitian `ρ`.
pub fn sandwich(k: &Mat, sub: usize, dims: &[usize], rho: &Mat) -> Mat {
    let left = apply_left(k, sub, dims, rho);
    apply_left(k, sub, dims, &left.adjoint())
}

/// Sum of `L_i ρ L_i†` over the Kraus operators, where `L_i = I⊗K_i⊗I`.
pub fn apply_kraus(kraus: &[Mat], sub: usize, dims: &[usize], rho: &Mat) -> Mat {
    let d_out = kraus.first().map(|k| k.nrows()).unwrap_or(dims[sub]);
    let mut out_dims = dims.to_vec();
    out_dims[sub] = d_out;
    let n = product(&out_dims);
    let mut acc = Mat::zeros(n, n);
    for k in kraus {
        acc += sandwich(k, sub, dims, rho);
    }
    acc
}

/// Heisenberg-picture adjoint: `Σ L_i† W L_i` with `W` on the output dims.
pub fn apply_kraus_adjoint(kraus: &[Mat], sub: usize, out_dims: &[usize], w: &Mat) -> Mat {
    let d_in = kraus.first().map(|k| k.ncols()).unwrap_or(out_dims[sub]);
    let mut in_dims = out_dims.to_vec();
    in_dims[sub] = d_in;
    let n = product(&in_dims);
    let mut acc = Mat::zeros(n, n);
    for k in kraus {
        let kd = k.adjoint();
        let left = apply_left(&kd, sub, out_dims, w);
        acc += apply_left(&kd, sub, out_dims, &left.adjoint());
    }
    acc
}

/// Contracts every subsystem except `sub` along the diagonal:
/// `G[o, a] = Σ_{p,q} M[(p,o,q), (p,a,q)]`, with row dims `row_dims` and
/// column dims equal to `row_dims` except at `sub` (dimension `d_col`).
pub fn trace_rest(m: &Mat, sub: usize, row_dims: &[usize], d_col: usize) -> Mat {
    let d_row = row_dims[sub];
    let pre = product(&row_dims[..sub]);
    let post = product(&row_dims[sub + 1..]);
    assert_eq!(m.nrows(), pre * d_row * post);
    assert_eq!(m.ncols(), pre * d_col * post);
    let mut g = Mat::zeros(d_row, d_col);
    for p in 0..pre {
        for a in 0..d_col {
            for q in 0..post {
                let col = (p * d_col + a) * post + q;
                for o in 0..d_row {
                    let row = (p * d_row + o) * post + q;
                    g[(o, a)] += m[(row, col)];
                }
            }
        }
    }
    g
}

/// Digit decomposition helper: strides for row-major composite indexing.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}
