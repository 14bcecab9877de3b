//! Riemannian gradient descent with Armijo backtracking on product Stiefel
//! manifolds, and seeded multi-restart orchestration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::ProductPoint;
use crate::objectives::Objective;

/// Backtracking halvings before a line search is declared failed.
pub const MAX_HALVINGS: usize = 60;

/// Orthonormality defect allowed at every accepted iterate.
pub const ITERATE_TOL: f64 = 1e-8;

/// A function on a product of Stiefel manifolds with its ambient gradient
/// `G = 2∂f/∂X̄` per part.
pub trait Differentiable: Sync {
    fn shapes(&self) -> Vec<(usize, usize)>;
    fn value(&self, x: &ProductPoint) -> Result<f64>;
    fn value_and_gradient(&self, x: &ProductPoint) -> Result<(f64, Vec<Mat>)>;
}

impl Differentiable for Objective {
    fn shapes(&self) -> Vec<(usize, usize)> {
        Objective::shapes(self)
    }

    fn value(&self, x: &ProductPoint) -> Result<f64> {
        Objective::value(self, x)
    }

    fn value_and_gradient(&self, x: &ProductPoint) -> Result<(f64, Vec<Mat>)> {
        Objective::value_and_gradient(self, x)
    }
}

/// `-f`, used to maximize.
pub struct Negated<'a, F: ?Sized>(pub &'a F);

impl<F: Differentiable + ?Sized> Differentiable for Negated<'_, F> {
    fn shapes(&self) -> Vec<(usize, usize)> {
        self.0.shapes()
    }

    fn value(&self, x: &ProductPoint) -> Result<f64> {
        Ok(-self.0.value(x)?)
    }

    fn value_and_gradient(&self, x: &ProductPoint) -> Result<(f64, Vec<Mat>)> {
        let (v, g) = self.0.value_and_gradient(x)?;
        Ok((-v, g.into_iter().map(|m| -m).collect()))
    }
}

/// Closure-backed objective.
pub struct FnObjective<F> {
    shapes: Vec<(usize, usize)>,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&ProductPoint) -> (f64, Vec<Mat>) + Sync,
{
    pub fn new(shapes: Vec<(usize, usize)>, f: F) -> Self {
        Self { shapes, f }
    }
}

impl<F> Differentiable for FnObjective<F>
where
    F: Fn(&ProductPoint) -> (f64, Vec<Mat>) + Sync,
{
    fn shapes(&self) -> Vec<(usize, usize)> {
        self.shapes.clone()
    }

    fn value(&self, x: &ProductPoint) -> Result<f64> {
        Ok((self.f)(x).0)
    }

    fn value_and_gradient(&self, x: &ProductPoint) -> Result<(f64, Vec<Mat>)> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub init_step: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { max_iters: 1000, grad_tol: 1e-6, armijo_c: 1e-4, backtrack_factor: 0.5, init_step: 1.0, restarts: 10, seed: 0 }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.into()));
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.init_step > 0.0) || !(self.grad_tol >= 0.0) {
            return bad("init_step must be positive and grad_tol non-negative");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

impl OptimStatus {
    pub fn label(&self) -> &'static str {
        match self {
            OptimStatus::Converged => "converged",
            OptimStatus::MaxIters => "max_iters",
            OptimStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

/// One iteration: value and gradient norm at the iterate, and the accepted
/// step (0 for the terminal record).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

/// Values are in the minimization sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimTrace {
    pub records: Vec<IterRecord>,
    pub status: OptimStatus,
    pub restart: usize,
    pub seed: u64,
}

impl OptimTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.grad_norm)
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub point: ProductPoint,
    pub value: f64,
    pub trace: OptimTrace,
}

#[derive(Debug, Clone)]
pub struct MultiRestart {
    pub best: OptimResult,
    pub traces: Vec<OptimTrace>,
    pub values: Vec<f64>,
}

impl MultiRestart {
    pub fn best_restart(&self) -> usize {
        self.best.trace.restart
    }
}

/// SplitMix64 of the master seed and restart index.
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    let mut z = seed ^ (restart as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gradient descent from `x0`.
pub fn minimize_from<F: Differentiable + ?Sized>(f: &F, x0: ProductPoint, opts: &OptimOptions) -> Result<OptimResult> {
    opts.validate()?;
    if x0.shapes() != f.shapes() {
        return Err(Error::Layout(format!("start point {:?} vs objective layout {:?}", x0.shapes(), f.shapes())));
    }
    let mut x = x0;
    let mut records = Vec::new();
    let mut trial = opts.init_step;
    let mut status = OptimStatus::MaxIters;
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    for iter in 0..=opts.max_iters {
        let grad = x.riemannian_gradient(&g)?;
        let norm_sq = grad.norm_sq();
        let norm = norm_sq.sqrt();
        if norm <= opts.grad_tol {
            records.push(IterRecord { value: fx, grad_norm: norm, step: 0.0 });
            status = OptimStatus::Converged;
            break;
        }
        if iter == opts.max_iters {
            records.push(IterRecord { value: fx, grad_norm: norm, step: 0.0 });
            break;
        }
        let descent = grad.scaled(-1.0);
        let mut t = trial;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let y = x.retract(&descent, t)?;
            let fy = f.value(&y)?;
            if fy <= fx - opts.armijo_c * t * norm_sq {
                accepted = Some((y, fy));
                break;
            }
            t *= opts.backtrack_factor;
        }
        let Some((y, _)) = accepted else {
            records.push(IterRecord { value: fx, grad_norm: norm, step: 0.0 });
            status = OptimStatus::LineSearchFailed;
            break;
        };
        let defect = y.max_defect();
        if defect > ITERATE_TOL {
            return Err(Error::Invariant { what: "iterate left the Stiefel manifold", defect });
        }
        records.push(IterRecord { value: fx, grad_norm: norm, step: t });
        trial = opts.init_step.min(2.0 * t);
        x = y;
        (fx, g) = f.value_and_gradient(&x)?;
    }
    Ok(OptimResult { point: x, value: fx, trace: OptimTrace { records, status, restart: 0, seed: opts.seed } })
}

/// Gradient descent from a random point drawn with `opts.seed`.
pub fn minimize<F: Differentiable + ?Sized>(f: &F, opts: &OptimOptions) -> Result<OptimResult> {
    let x0 = ProductPoint::random_with(&f.shapes(), &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    minimize_from(f, x0, opts)
}

/// `opts.restarts` independent runs in parallel; run `r` starts from a random
/// point seeded with [`restart_seed`]`(seed, r)`. Ties go to the lowest index.
pub fn multi_restart<F: Differentiable + ?Sized>(f: &F, opts: &OptimOptions) -> Result<MultiRestart> {
    opts.validate()?;
    let runs = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = restart_seed(opts.seed, r);
            let mut res = minimize(f, &OptimOptions { seed, ..*opts })?;
            res.trace.restart = r;
            Ok(res)
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let traces = runs.iter().map(|r| r.trace.clone()).collect();
    let best = runs.into_iter().reduce(|a, b| if b.value < a.value { b } else { a }).expect("restarts >= 1");
    Ok(MultiRestart { best, traces, values })
}

/// Maximizes `f`; reported values are in the objective's own sign, traces in
/// the minimization sense.
pub fn maximize_multi<F: Differentiable + ?Sized>(f: &F, opts: &OptimOptions) -> Result<MultiRestart> {
    let mut out = multi_restart(&Negated(f), opts)?;
    out.best.value = -out.best.value;
    out.values.iter_mut().for_each(|v| *v = -*v);
    Ok(out)
}
