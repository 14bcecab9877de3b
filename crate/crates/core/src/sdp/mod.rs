//! Semidefinite programs over Hermitian blocks, solved by an interior-point
//! method when small and by ADMM otherwise, and the PPT relaxation bounds
//! built on them.

mod bounds;
mod ipm;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat};
use crate::state::{embed_identity, partial_trace_mat, QState};

pub use bounds::{
    choi_constraint_check, merging_choi_fidelity, ppt_avg_fidelity_bound, ppt_avg_fidelity_bound_with, ppt_fidelity_bound,
    ppt_fidelity_bound_sweep, ppt_fidelity_bound_with, ppt_merging_bound, simplified_constraint_check, ChoiCheck, PptBound,
    SimplifiedCheck,
};

fn pt_index(dims: &[usize], subsystems: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = subsystems.iter().find(|&&s| s >= dims.len()) {
        return Err(Error::SubsystemIndex { index: bad, count: dims.len() });
    }
    let n = linalg::product(dims);
    let strides = linalg::strides(dims);
    let mut index = vec![0; n * n];
    for col in 0..n {
        for row in 0..n {
            let (mut r, mut cl) = (row, col);
            for &s in subsystems {
                let a = (row / strides[s]) % dims[s];
                let b = (col / strides[s]) % dims[s];
                r = r + b * strides[s] - a * strides[s];
                cl = cl + a * strides[s] - b * strides[s];
            }
            // column-major source position of the entry that lands at (row, col)
            index[col * n + row] = cl * n + r;
        }
    }
    Ok(index)
}

fn gather(m: &Mat, index: &[usize]) -> Mat {
    let src = m.as_slice();
    Mat::from_iterator(m.nrows(), m.ncols(), index.iter().map(|&i| src[i]))
}

/// Transpose on the tensor factors `subsystems` of a square operator.
pub fn partial_transpose_mat(m: &Mat, dims: &[usize], subsystems: &[usize]) -> Result<Mat> {
    let n = linalg::product(dims);
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} operator for dims {dims:?}", m.nrows(), m.ncols())));
    }
    Ok(gather(m, &pt_index(dims, subsystems)?))
}

/// Partial transpose of a state; the result need not be positive, so it is
/// returned as an operator.
pub fn partial_transpose(rho: &QState, subsystems: &[usize]) -> Result<Mat> {
    partial_transpose_mat(rho.data(), rho.dims(), subsystems)
}

/// Real-linear maps between Hermitian operator spaces.
#[derive(Debug, Clone)]
pub enum LinMap {
    Identity,
    PartialTranspose {
        dims: Vec<usize>,
        index: Vec<usize>,
    },
    PartialTrace {
        dims: Vec<usize>,
        keep: Vec<usize>,
    },
    /// `X ↦ Tr[M X]` as a 1×1 operator.
    TraceWith(Mat),
}

impl LinMap {
    pub fn partial_transpose(dims: &[usize], subsystems: &[usize]) -> Result<Self> {
        Ok(LinMap::PartialTranspose { dims: dims.to_vec(), index: pt_index(dims, subsystems)? })
    }

    pub fn partial_trace(dims: &[usize], keep: &[usize]) -> Self {
        LinMap::PartialTrace { dims: dims.to_vec(), keep: keep.to_vec() }
    }

    fn domain_ok(&self, n: usize) -> bool {
        match self {
            LinMap::Identity => true,
            LinMap::PartialTranspose { dims, .. } | LinMap::PartialTrace { dims, .. } => linalg::product(dims) == n,
            LinMap::TraceWith(m) => m.nrows() == n && m.ncols() == n,
        }
    }

    fn output_dim(&self, n: usize) -> usize {
        match self {
            LinMap::Identity | LinMap::PartialTranspose { .. } => n,
            LinMap::PartialTrace { dims, keep } => keep.iter().map(|&k| dims[k]).product(),
            LinMap::TraceWith(_) => 1,
        }
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        match self {
            LinMap::Identity => x.clone(),
            LinMap::PartialTranspose { index, .. } => gather(x, index),
            LinMap::PartialTrace { dims, keep } => partial_trace_mat(x, dims, keep).expect("validated partial trace"),
            LinMap::TraceWith(m) => Mat::from_element(1, 1, c(linalg::trace_product(m, x).re, 0.0)),
        }
    }

    pub fn adjoint(&self, y: &Mat) -> Mat {
        match self {
            LinMap::Identity => y.clone(),
            LinMap::PartialTranspose { index, .. } => gather(y, index),
            LinMap::PartialTrace { dims, keep } => embed_identity(y, dims, keep).expect("validated partial trace"),
            LinMap::TraceWith(m) => m * c(y[(0, 0)].re, 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub block: usize,
    pub coeff: f64,
    pub map: LinMap,
}

impl Term {
    pub fn new(block: usize, coeff: f64, map: LinMap) -> Self {
        Self { block, coeff, map }
    }
}

/// `Σ coeff·map(X_block) = rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<Term>,
    pub rhs: Mat,
}

/// Maximize `Σ_b Re Tr[C_b X_b]` over PSD blocks `X_b` subject to affine
/// equalities. Inequalities are expressed with slack blocks.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<Mat>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.blocks.len() {
            return Err(Error::Dimension("one objective coefficient per block required".into()));
        }
        for (c, &n) in self.objective.iter().zip(&self.blocks) {
            if c.nrows() != n || c.ncols() != n || linalg::hermiticity_defect(c) > 1e-12 {
                return Err(Error::Dimension(format!("objective coefficient must be Hermitian {n}x{n}")));
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            let m = con.rhs.nrows();
            if con.rhs.ncols() != m || linalg::hermiticity_defect(&con.rhs) > 1e-12 || con.terms.is_empty() {
                return Err(Error::Dimension(format!("constraint {i}: right-hand side must be Hermitian and terms non-empty")));
            }
            for t in &con.terms {
                let ok =
                    t.block < self.blocks.len() && t.map.domain_ok(self.blocks[t.block]) && t.map.output_dim(self.blocks[t.block]) == m;
                if !ok {
                    return Err(Error::Dimension(format!("constraint {i}: term on block {} has inconsistent dimensions", t.block)));
                }
            }
        }
        Ok(())
    }

    fn apply(&self, x: &[Mat]) -> Vec<Mat> {
        self.constraints
            .iter()
            .map(|con| {
                let m = con.rhs.nrows();
                con.terms.iter().fold(Mat::zeros(m, m), |acc, t| acc + t.map.apply(&x[t.block]) * c(t.coeff, 0.0))
            })
            .collect()
    }

    fn adjoint(&self, y: &[Mat]) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.blocks.iter().map(|&n| Mat::zeros(n, n)).collect();
        for (con, yi) in self.constraints.iter().zip(y) {
            for t in &con.terms {
                out[t.block] += t.map.adjoint(yi) * c(t.coeff, 0.0);
            }
        }
        out
    }

    fn rhs(&self) -> Vec<Mat> {
        self.constraints.iter().map(|c| c.rhs.clone()).collect()
    }
}

fn dot(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| linalg::inner(x, y)).sum()
}

fn norm(a: &[Mat]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: &[Mat], s: f64, b: &[Mat]) -> Vec<Mat> {
    a.iter().zip(b).map(|(x, y)| x + y * c(s, 0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Wall-clock cap in seconds; `None` runs until `max_iters`.
    pub time_limit_s: Option<f64>,
    pub method: SdpMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 50_000, rho: 1.0, alpha: 1.6, time_limit_s: None, method: SdpMethod::Auto }
    }
}

/// `Auto` uses the interior-point method up to [`IPM_MAX_ORDER`] equality
/// coordinates and ADMM beyond that, or when the interior-point run breaks down.
/// `tol`, `max_iters`, `rho` and `alpha` are ADMM settings; the interior-point
/// method stops at `min(tol, 1e-9)` relative residuals and gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpMethod {
    #[default]
    Auto,
    Admm,
    Ipm,
}

pub const IPM_MAX_ORDER: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Converged,
    MaxIters,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// PSD blocks (the cone iterate).
    pub blocks: Vec<Mat>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `‖x − z‖` between the affine and cone iterates.
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖A(z) − b‖` of the reported blocks.
    pub equality_residual: f64,
    /// `|Σ Re Tr[Z_b S_b]|` with `S` the dual slack.
    pub complementarity: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

impl SdpSolution {
    pub fn gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs()
    }
}

/// Conjugate gradients on `A Aᵀ y = r`, warm-started from `y`.
fn solve_normal(problem: &SdpProblem, r: &[Mat], y: &mut Vec<Mat>) {
    let scale = 1.0 + norm(r);
    let aat = |v: &[Mat]| problem.apply(&problem.adjoint(v));
    let mut res = axpy(r, -1.0, &aat(y));
    let mut p = res.clone();
    let mut rs = dot(&res, &res);
    let max_iter = 10 * r.iter().map(|m| m.nrows() * m.nrows()).sum::<usize>().max(10);
    for _ in 0..max_iter {
        if rs.sqrt() <= 1e-13 * scale {
            break;
        }
        let ap = aat(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let a = rs / pap;
        *y = axpy(y, a, &p);
        res = axpy(&res, -a, &ap);
        let rs_new = dot(&res, &res);
        p = axpy(&res, rs_new / rs, &p);
        rs = rs_new;
    }
}

struct AffineProjector<'a> {
    problem: &'a SdpProblem,
    b: Vec<Mat>,
    y: Vec<Mat>,
}

impl AffineProjector<'_> {
    fn project(&mut self, v: &[Mat]) -> Vec<Mat> {
        let r = axpy(&self.problem.apply(v), -1.0, &self.b);
        solve_normal(self.problem, &r, &mut self.y);
        axpy(v, -1.0, &self.problem.adjoint(&self.y))
    }
}

fn project_cone(v: &[Mat]) -> Vec<Mat> {
    v.iter().map(linalg::psd_projection).collect()
}

pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    match opts.method {
        SdpMethod::Admm => solve_admm(problem, opts),
        SdpMethod::Ipm => ipm::solve_ipm(problem, opts),
        SdpMethod::Auto => {
            problem.validate()?;
            if ipm::schur_order(problem) > IPM_MAX_ORDER {
                return solve_admm(problem, opts);
            }
            match ipm::solve_ipm(problem, opts) {
                Err(Error::Solver(_)) => solve_admm(problem, opts),
                other => other,
            }
        }
    }
}

/// ADMM with over-relaxation: `x = Π_aff(z − u − c/ρ)`, `z = Π_PSD(αx + (1−α)z + u)`,
/// `u += αx + (1−α)z − z⁺`, with residual-balanced `ρ`.
pub fn solve_admm(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    problem.validate()?;
    // minimize ⟨cost, x⟩ with cost = −C
    let cost: Vec<Mat> = problem.objective.iter().map(|m| -m).collect();
    let mut proj = AffineProjector {
        problem,
        b: problem.rhs(),
        y: problem.constraints.iter().map(|c| Mat::zeros(c.rhs.nrows(), c.rhs.nrows())).collect(),
    };
    let zero: Vec<Mat> = problem.blocks.iter().map(|&n| Mat::zeros(n, n)).collect();
    let mut z = project_cone(&proj.project(&zero));
    let mut u = zero.clone();
    let mut rho = opts.rho;
    let mut status = SdpStatus::MaxIters;
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let started = Instant::now();
    for k in 0..opts.max_iters {
        if opts.time_limit_s.is_some_and(|cap| started.elapsed().as_secs_f64() > cap) {
            status = SdpStatus::TimeLimit;
            break;
        }
        iterations = k + 1;
        let target: Vec<Mat> = z.iter().zip(&u).zip(&cost).map(|((z, u), c0)| z - u - c0 * c(1.0 / rho, 0.0)).collect();
        let x = proj.project(&target);
        let relaxed: Vec<Mat> = x.iter().zip(&z).map(|(x, z)| x * c(opts.alpha, 0.0) + z * c(1.0 - opts.alpha, 0.0)).collect();
        let z_new = project_cone(&axpy(&relaxed, 1.0, &u));
        u = axpy(&axpy(&u, 1.0, &relaxed), -1.0, &z_new);
        r_norm = norm(&axpy(&x, -1.0, &z_new));
        s_norm = rho * norm(&axpy(&z_new, -1.0, &z));
        z = z_new;
        let eps_p = opts.tol * (1.0 + norm(&x).max(norm(&z)));
        let eps_d = opts.tol * (1.0 + rho * norm(&u));
        if r_norm <= eps_p && s_norm <= eps_d {
            status = SdpStatus::Converged;
            break;
        }
        if k % 20 == 19 {
            if r_norm > 10.0 * s_norm {
                rho *= 2.0;
                u.iter_mut().for_each(|m| *m *= c(0.5, 0.0));
            } else if s_norm > 10.0 * r_norm {
                rho *= 0.5;
                u.iter_mut().for_each(|m| *m *= c(2.0, 0.0));
            }
        }
    }
    // dual slack s = −ρu ∈ PSD; y from the normal equations on c − s
    let s: Vec<Mat> = u.iter().map(|m| m * c(-rho, 0.0)).collect();
    let mut y = proj.y.clone();
    solve_normal(problem, &problem.apply(&axpy(&cost, -1.0, &s)), &mut y);
    let objective = dot(&problem.objective, &z);
    let dual_objective = -dot(&proj.b, &y);
    let equality_residual = norm(&axpy(&problem.apply(&z), -1.0, &proj.b));
    let complementarity = dot(&z, &s).abs();
    Ok(SdpSolution {
        blocks: z,
        objective,
        dual_objective,
        primal_residual: r_norm,
        dual_residual: s_norm,
        equality_residual,
        complementarity,
        iterations,
        status,
    })
}
