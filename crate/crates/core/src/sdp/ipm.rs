//! Infeasible primal-dual interior-point method with the HKM direction and a
//! Mehrotra predictor-corrector step. The Schur complement is formed densely,
//! so this is meant for problems with a few thousand equality coordinates.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{dot, norm, SdpProblem, SdpSolution, SdpStatus, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat};

const MAX_ITERS: usize = 120;
const STEP_FRACTION: f64 = 0.98;

/// Real coordinates of a Hermitian matrix in the orthonormal basis
/// `E_kk, (E_kl + E_lk)/√2, i(E_kl − E_lk)/√2` under `Re Tr[A† B]`.
fn push_coords(h: &Mat, out: &mut Vec<f64>) {
    let m = h.nrows();
    for k in 0..m {
        out.push(h[(k, k)].re);
        for l in k + 1..m {
            out.push(std::f64::consts::SQRT_2 * h[(k, l)].re);
            out.push(std::f64::consts::SQRT_2 * h[(k, l)].im);
        }
    }
}

fn coords(hs: &[Mat]) -> DVector<f64> {
    let mut out = Vec::new();
    for h in hs {
        push_coords(h, &mut out);
    }
    DVector::from_vec(out)
}

fn from_coords(v: &[f64], sizes: &[usize]) -> Vec<Mat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut it = v.iter();
    sizes
        .iter()
        .map(|&m| {
            let mut h = Mat::zeros(m, m);
            for k in 0..m {
                h[(k, k)] = c(*it.next().unwrap(), 0.0);
                for l in k + 1..m {
                    let (re, im) = (*it.next().unwrap(), *it.next().unwrap());
                    h[(k, l)] = c(s * re, s * im);
                    h[(l, k)] = c(s * re, -s * im);
                }
            }
            h
        })
        .collect()
}

/// Number of real equality coordinates, i.e. the Schur complement order.
pub(super) fn schur_order(problem: &SdpProblem) -> usize {
    problem.constraints.iter().map(|con| con.rhs.nrows().pow(2)).sum()
}

/// Largest step `α` keeping `x + α d ⪰ 0`, given the Cholesky factor of `x`.
fn max_step(chol: &Cholesky<linalg::C64, nalgebra::Dyn>, d: &Mat) -> f64 {
    let l = chol.l();
    let p = l.solve_lower_triangular(d).expect("nonsingular factor");
    let q = l.solve_lower_triangular(&p.adjoint()).expect("nonsingular factor");
    let lmin = linalg::min_eigenvalue(&linalg::hermitian_part(&q));
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn factor(m: &Mat) -> Result<Cholesky<linalg::C64, nalgebra::Dyn>> {
    Cholesky::new(linalg::hermitian_part(m)).ok_or_else(|| Error::Solver("interior-point iterate lost definiteness".into()))
}

struct Direction {
    dx: Vec<Mat>,
    dy: Vec<Mat>,
    dz: Vec<Mat>,
}

pub(super) fn solve_ipm(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let started = Instant::now();
    let sizes: Vec<usize> = problem.constraints.iter().map(|con| con.rhs.nrows()).collect();
    let order = schur_order(problem);
    // A*(e_j) for every basis element, keeping only nonzero blocks
    let columns: Vec<Vec<(usize, Mat)>> = (0..order)
        .map(|j| {
            let mut e = vec![0.0; order];
            e[j] = 1.0;
            let y = from_coords(&e, &sizes);
            problem.adjoint(&y).into_iter().enumerate().filter(|(_, m)| linalg::max_abs(m) > 0.0).collect()
        })
        .collect();

    let cost: Vec<Mat> = problem.objective.iter().map(|m| -m).collect();
    let b = problem.rhs();
    let b_norm = norm(&b);
    let c_norm = norm(&cost);
    let start = 1.0f64.max(b_norm).max(c_norm).sqrt() * 10.0;
    let mut x: Vec<Mat> = problem.blocks.iter().map(|&n| linalg::identity(n) * c(start, 0.0)).collect();
    let mut z = x.clone();
    let mut y: Vec<Mat> = sizes.iter().map(|&m| Mat::zeros(m, m)).collect();
    let total: usize = problem.blocks.iter().sum();
    let tol = opts.tol.min(1e-9);

    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0;
    let (mut rp_norm, mut rd_norm) = (f64::INFINITY, f64::INFINITY);
    for k in 0..MAX_ITERS {
        if opts.time_limit_s.is_some_and(|cap| started.elapsed().as_secs_f64() > cap) {
            status = SdpStatus::TimeLimit;
            break;
        }
        let ax = problem.apply(&x);
        let rp: Vec<Mat> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = problem.adjoint(&y);
        let rd: Vec<Mat> = cost.iter().zip(&aty).zip(&z).map(|((c0, a), z)| c0 - a - z).collect();
        rp_norm = norm(&rp);
        rd_norm = norm(&rd);
        let mu = dot(&x, &z) / total as f64;
        let pobj = dot(&cost, &x);
        let dobj = dot(&b, &y);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if rp_norm <= tol * (1.0 + b_norm) && rd_norm <= tol * (1.0 + c_norm) && rel_gap <= tol {
            status = SdpStatus::Converged;
            break;
        }
        iterations = k + 1;

        let zinv: Vec<Mat> = z.iter().map(|m| factor(m).map(|ch| ch.inverse())).collect::<Result<_>>()?;
        let mut schur = DMatrix::<f64>::zeros(order, order);
        for (j, col) in columns.iter().enumerate() {
            let mut w: Vec<Mat> = problem.blocks.iter().map(|&n| Mat::zeros(n, n)).collect();
            for (blk, a) in col {
                w[*blk] = linalg::hermitian_part(&(&x[*blk] * a * &zinv[*blk]));
            }
            schur.set_column(j, &coords(&problem.apply(&w)));
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let diag_scale = schur.diagonal().amax().max(1e-300);
        let chol = Cholesky::new(schur.clone())
            .or_else(|| Cholesky::new(&schur + DMatrix::identity(order, order) * (1e-14 * diag_scale)))
            .ok_or_else(|| Error::Solver("interior-point Schur complement is singular".into()))?;

        let direction = |sigma_mu: f64, corr: Option<&Vec<Mat>>| -> Direction {
            // T = σμ Z⁻¹ − herm((K + X Rd) Z⁻¹)
            let t: Vec<Mat> = (0..x.len())
                .map(|i| {
                    let mut inner = &x[i] * &rd[i];
                    if let Some(k) = corr {
                        inner += &k[i];
                    }
                    &zinv[i] * c(sigma_mu, 0.0) - linalg::hermitian_part(&(inner * &zinv[i]))
                })
                .collect();
            let at = problem.apply(&t);
            let r: Vec<Mat> = b.iter().zip(&at).map(|(b, a)| b - a).collect();
            let dy_v = chol.solve(&coords(&r));
            let dy = from_coords(dy_v.as_slice(), &sizes);
            let atdy = problem.adjoint(&dy);
            let dz: Vec<Mat> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
            let dx: Vec<Mat> = (0..x.len())
                .map(|i| {
                    let mut inner = &x[i] * &dz[i];
                    if let Some(k) = corr {
                        inner += &k[i];
                    }
                    &zinv[i] * c(sigma_mu, 0.0) - &x[i] - linalg::hermitian_part(&(inner * &zinv[i]))
                })
                .collect();
            Direction { dx, dy, dz }
        };
        let xchol: Vec<_> = x.iter().map(factor).collect::<Result<_>>()?;
        let zchol: Vec<_> = z.iter().map(factor).collect::<Result<_>>()?;
        let steps = |d: &Direction| -> (f64, f64) {
            let ap = xchol.iter().zip(&d.dx).map(|(ch, dx)| max_step(ch, dx)).fold(f64::INFINITY, f64::min);
            let ad = zchol.iter().zip(&d.dz).map(|(ch, dz)| max_step(ch, dz)).fold(f64::INFINITY, f64::min);
            ((STEP_FRACTION * ap).min(1.0), (STEP_FRACTION * ad).min(1.0))
        };

        let pred = direction(0.0, None);
        let (ap, ad) = steps(&pred);
        let mu_aff = x
            .iter()
            .zip(&pred.dx)
            .zip(z.iter().zip(&pred.dz))
            .map(|((x, dx), (z, dz))| linalg::inner(&(x + dx * c(ap, 0.0)), &(z + dz * c(ad, 0.0))))
            .sum::<f64>()
            / total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let k_corr: Vec<Mat> = pred.dx.iter().zip(&pred.dz).map(|(dx, dz)| dx * dz).collect();
        let corr = direction(sigma * mu, Some(&k_corr));
        let (ap, ad) = steps(&corr);
        for i in 0..x.len() {
            x[i] = linalg::hermitian_part(&(&x[i] + &corr.dx[i] * c(ap, 0.0)));
            z[i] = linalg::hermitian_part(&(&z[i] + &corr.dz[i] * c(ad, 0.0)));
        }
        for (yi, dyi) in y.iter_mut().zip(&corr.dy) {
            *yi += dyi * c(ad, 0.0);
        }
    }

    let equality_residual = norm(&problem.apply(&x).iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(SdpSolution {
        objective: dot(&problem.objective, &x),
        dual_objective: -dot(&b, &y),
        primal_residual: rp_norm,
        dual_residual: rd_norm,
        equality_residual,
        complementarity: dot(&x, &z).abs(),
        iterations,
        status,
        blocks: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_round_trip_and_preserve_inner_products() {
        let a = linalg::hermitian_part(&Mat::from_fn(3, 3, |r, k| c(r as f64 - 0.3 * k as f64, 0.7 * r as f64 * k as f64 - 1.0)));
        let b = linalg::hermitian_part(&Mat::from_fn(3, 3, |r, k| c((r * k) as f64, r as f64 - k as f64)));
        let back = from_coords(coords(std::slice::from_ref(&a)).as_slice(), &[3]);
        assert!(linalg::max_abs(&(&back[0] - &a)) < 1e-15);
        let ip = coords(std::slice::from_ref(&a)).dot(&coords(std::slice::from_ref(&b)));
        assert!((ip - linalg::inner(&a, &b)).abs() < 1e-12);
    }
}
