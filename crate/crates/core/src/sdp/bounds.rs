use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{partial_transpose_mat, solve, Constraint, LinMap, SdpProblem, SdpStatus, SolveOptions, Term};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat};
use crate::state::{max_entangled, partial_trace_mat, permute_mat, PureState, QState};

/// An upper bound from a PPT relaxation with the solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PptBound {
    pub value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

impl PptBound {
    /// Residual-based error bar on `value`.
    pub fn residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual)
    }
}

fn bipartite(rho: &QState) -> Result<(usize, usize)> {
    match rho.dims() {
        [a, b] => Ok((*a, *b)),
        dims => Err(Error::Dimension(format!("expected an Alice/Bob bipartition, got dims {dims:?}"))),
    }
}

fn check_d(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Parameter(format!("output MES dimension {d} < 2")));
    }
    Ok(d as f64)
}

/// Blocks `[E, F, S1, S2]` with `S1 = E^{T_A} + (d−1)F^{T_A}` and
/// `S2 = (d+1)F^{T_A} − E^{T_A}`.
fn ppt_slack_constraints(dims: &[usize], d: f64) -> Result<Vec<Constraint>> {
    let n = linalg::product(dims);
    let pt = LinMap::partial_transpose(dims, &[0])?;
    Ok(vec![
        Constraint {
            terms: vec![Term::new(0, 1.0, pt.clone()), Term::new(1, d - 1.0, pt.clone()), Term::new(2, -1.0, LinMap::Identity)],
            rhs: Mat::zeros(n, n),
        },
        Constraint {
            terms: vec![Term::new(0, -1.0, pt.clone()), Term::new(1, d + 1.0, pt), Term::new(3, -1.0, LinMap::Identity)],
            rhs: Mat::zeros(n, n),
        },
    ])
}

fn finish(sol: super::SdpSolution, scale: f64) -> PptBound {
    PptBound {
        value: sol.objective / scale,
        dual_value: sol.dual_objective / scale,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        complementarity: sol.complementarity,
        iterations: sol.iterations,
        status: sol.status,
    }
}

/// `max Tr[ρᵀE]` s.t. `E, F ⪰ 0`, `(1−d)F^{T_A} ⪯ E^{T_A} ⪯ (1+d)F^{T_A}`,
/// `E + (d²−1)F = I`.
pub fn ppt_avg_fidelity_bound(rho: &QState, d: usize) -> Result<PptBound> {
    ppt_avg_fidelity_bound_with(rho, d, &SolveOptions::default())
}

pub fn ppt_avg_fidelity_bound_with(rho: &QState, d: usize, opts: &SolveOptions) -> Result<PptBound> {
    let (da, db) = bipartite(rho)?;
    let df = check_d(d)?;
    let n = da * db;
    let mut constraints = vec![Constraint {
        terms: vec![Term::new(0, 1.0, LinMap::Identity), Term::new(1, df * df - 1.0, LinMap::Identity)],
        rhs: linalg::identity(n),
    }];
    constraints.extend(ppt_slack_constraints(&[da, db], df)?);
    let zero = Mat::zeros(n, n);
    let problem = SdpProblem { blocks: vec![n; 4], objective: vec![rho.data().transpose(), zero.clone(), zero.clone(), zero], constraints };
    Ok(finish(solve(&problem, opts)?, 1.0))
}

/// Conditional-fidelity bound at success probability `p`: maximize `Tr[ρᵀE]`
/// at `Tr[ρᵀ(E + (d²−1)F)] = p` with `E + (d²−1)F ⪯ I`, then divide by `p`.
pub fn ppt_fidelity_bound(rho: &QState, d: usize, p: f64) -> Result<PptBound> {
    ppt_fidelity_bound_with(rho, d, p, &SolveOptions::default())
}

pub fn ppt_fidelity_bound_with(rho: &QState, d: usize, p: f64, opts: &SolveOptions) -> Result<PptBound> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Infeasible(format!("success probability {p} outside (0, 1]")));
    }
    let (da, db) = bipartite(rho)?;
    let df = check_d(d)?;
    let n = da * db;
    let rho_t = rho.data().transpose();
    let mut constraints = vec![
        Constraint {
            terms: vec![
                Term::new(0, 1.0, LinMap::Identity),
                Term::new(1, df * df - 1.0, LinMap::Identity),
                Term::new(4, 1.0, LinMap::Identity),
            ],
            rhs: linalg::identity(n),
        },
        Constraint {
            terms: vec![Term::new(0, 1.0, LinMap::TraceWith(rho_t.clone())), Term::new(1, df * df - 1.0, LinMap::TraceWith(rho_t.clone()))],
            rhs: Mat::from_element(1, 1, c(p, 0.0)),
        },
    ];
    constraints.extend(ppt_slack_constraints(&[da, db], df)?);
    let zero = Mat::zeros(n, n);
    let problem = SdpProblem { blocks: vec![n; 5], objective: vec![rho_t, zero.clone(), zero.clone(), zero.clone(), zero], constraints };
    let sol = solve(&problem, opts)?;
    if sol.status == SdpStatus::MaxIters && sol.equality_residual > 1e-4 {
        return Err(Error::Infeasible(format!(
            "no PPT operation reaches success probability {p} (equality residual {:.2e})",
            sol.equality_residual
        )));
    }
    Ok(finish(sol, p))
}

/// [`ppt_fidelity_bound`] over a grid of success probabilities, in parallel.
pub fn ppt_fidelity_bound_sweep(rho: &QState, d: usize, ps: &[f64]) -> Result<Vec<PptBound>> {
    ps.par_iter().map(|&p| ppt_fidelity_bound(rho, d, p)).collect()
}

/// Objective operator `Herm Tr_R[(ψ^{T_AB}_{RAB} ⊗ I)(I_AB ⊗ ψ_{RB'B''})]` on
/// `[A, B, B', B'']`.
fn merging_objective(psi: &PureState) -> Result<Mat> {
    let rho = psi.density().into_data();
    let pt = partial_transpose_mat(&rho, &[2, 2, 2], &[1, 2])?;
    let left = linalg::kron(&pt, &linalg::identity(4));
    let (right, _) = permute_mat(&linalg::kron(&rho, &linalg::identity(4)), &[2, 2, 2, 2, 2], &[0, 3, 4, 1, 2])?;
    let q = partial_trace_mat(&(left * right), &[2, 2, 2, 2, 2], &[1, 2, 3, 4])?;
    Ok(linalg::hermitian_part(&q))
}

/// `Tr[C · ψ^{T_AB}_{RAB} ψ_{RB'B''}]` for a Choi operator `C` on `[A, B, B', B'']`.
pub fn merging_choi_fidelity(choi: &Mat, psi: &PureState) -> Result<f64> {
    Ok(linalg::trace_product(choi, &merging_objective(psi)?).re)
}

/// Average merging fidelity bound for qubit `R, A, B` (`k = m = 1`):
/// `C ⪰ 0`, `Tr_{B'B''}C = I`, `C^{T_A} ⪰ 0`.
pub fn ppt_merging_bound(psi: &PureState) -> Result<PptBound> {
    if psi.dims() != [2, 2, 2] {
        return Err(Error::Dimension(format!("merging bound expects qubits R, A, B, got {:?}", psi.dims())));
    }
    let dims = [2, 2, 2, 2];
    let problem = SdpProblem {
        blocks: vec![16, 16],
        objective: vec![merging_objective(psi)?, Mat::zeros(16, 16)],
        constraints: vec![
            Constraint { terms: vec![Term::new(0, 1.0, LinMap::partial_trace(&dims, &[0, 1]))], rhs: linalg::identity(4) },
            Constraint {
                terms: vec![Term::new(0, 1.0, LinMap::partial_transpose(&dims, &[0])?), Term::new(1, -1.0, LinMap::Identity)],
                rhs: Mat::zeros(16, 16),
            },
        ],
    };
    Ok(finish(solve(&problem, &SolveOptions::default())?, 1.0))
}

/// Eigenvalue diagnostics of the simplified distillation constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedCheck {
    pub min_eig_e: f64,
    pub min_eig_f: f64,
    pub min_eig_lower: f64,
    pub min_eig_upper: f64,
    pub tp_defect: f64,
}

impl SimplifiedCheck {
    /// Smallest margin over all constraints (negative when violated).
    pub fn margin(&self) -> f64 {
        [self.min_eig_e, self.min_eig_f, self.min_eig_lower, self.min_eig_upper, -self.tp_defect].into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalue diagnostics of `Π = E⊗Φ + F⊗(I−Φ)` on `[A, B, A', B']`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiCheck {
    pub min_eig_choi: f64,
    pub min_eig_ppt: f64,
    pub tp_defect: f64,
}

impl ChoiCheck {
    pub fn margin(&self) -> f64 {
        self.min_eig_choi.min(self.min_eig_ppt).min(-self.tp_defect)
    }
}

pub fn simplified_constraint_check(e: &Mat, f: &Mat, dims: [usize; 2], d: usize) -> Result<SimplifiedCheck> {
    let df = check_d(d)?;
    let et = partial_transpose_mat(e, &dims, &[0])?;
    let ft = partial_transpose_mat(f, &dims, &[0])?;
    let n = dims[0] * dims[1];
    Ok(SimplifiedCheck {
        min_eig_e: linalg::min_eigenvalue(e),
        min_eig_f: linalg::min_eigenvalue(f),
        min_eig_lower: linalg::min_eigenvalue(&(&et + &ft * c(df - 1.0, 0.0))),
        min_eig_upper: linalg::min_eigenvalue(&(&ft * c(df + 1.0, 0.0) - &et)),
        tp_defect: linalg::max_abs(&(e + f * c(df * df - 1.0, 0.0) - linalg::identity(n))),
    })
}

pub fn choi_constraint_check(e: &Mat, f: &Mat, dims: [usize; 2], d: usize) -> Result<ChoiCheck> {
    check_d(d)?;
    let phi = max_entangled(2, d)?.density().into_data();
    let rest = linalg::identity(d * d) - &phi;
    let pi = linalg::kron(e, &phi) + linalg::kron(f, &rest);
    let all = [dims[0], dims[1], d, d];
    let pt = partial_transpose_mat(&pi, &all, &[0, 2])?;
    let tr = partial_trace_mat(&pi, &all, &[0, 1])?;
    Ok(ChoiCheck {
        min_eig_choi: linalg::min_eigenvalue(&pi),
        min_eig_ppt: linalg::min_eigenvalue(&pt),
        tp_defect: linalg::max_abs(&(tr - linalg::identity(dims[0] * dims[1]))),
    })
}
