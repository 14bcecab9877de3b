//! Acceptance suite: one PASS/FAIL line per criterion on stderr.
//!
//! `LOCCFORGE_ACCEPTANCE=quick` shrinks grids and sample counts for a smoke
//! run; those lines are tagged `[quick]` and do not count as acceptance.
//! `LOCCFORGE_ACCEPTANCE_ONLY=4,9` runs a subset. The process exits nonzero
//! on a FAIL only under `LOCCFORGE_ACCEPTANCE_STRICT=1`.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use loccforge::experiment::{cmps_trial, ppt_trial, run, ExperimentConfig, Row};
use loccforge::linalg::{self, c, Mat};
use loccforge::manifold::{project_tangent, qr_retract, random_point_with, ProductPoint};
use loccforge::objectives::{directional_check, gadc_choi, gadc_choi_input, noisy_bell_input, NoiseKind, NoiseLocus, Objective};
use loccforge::optimizer::{maximize_multi, OptimOptions};
use loccforge::protocol::{AgentSpace, Followers, LoccProtocol, Povm};
use loccforge::sdp::{choi_constraint_check, simplified_constraint_check};
use loccforge::state::{coherent_information, gaussian_vector, haar_random_pure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (usize, fn(&mut Suite));

struct Suite {
    quick: bool,
    failed: usize,
    /// (criterion, value, bound) pairs for the dominance check.
    dominance: Vec<(String, f64, f64)>,
}

impl Suite {
    fn say(&self, line: &str) {
        let mut err = std::io::stderr().lock();
        let _ = err.write_all(line.as_bytes());
        let _ = err.write_all(b"\n");
    }

    fn verdict(&mut self, id: &str, pass: bool, detail: &str, started: Instant) {
        if !pass {
            self.failed += 1;
        }
        let tag = if self.quick { " [quick]" } else { "" };
        let word = if pass { "PASS" } else { "FAIL" };
        self.say(&format!("{word} {id}{tag}: {detail} ({:.1}s)", started.elapsed().as_secs_f64()));
    }

    fn info(&self, id: &str, detail: &str) {
        self.say(&format!("INFO {id}: {detail}"));
    }

    fn grid(&self) -> String {
        if self.quick {
            "[noise.grid]\nvalues = [0.0, 0.4, 1.0]\n".into()
        } else {
            "[noise.grid]\npoints = 11\n".into()
        }
    }

    fn run_toml(&mut self, text: &str) -> Vec<Row> {
        let mut cfg = ExperimentConfig::from_toml(text).expect("acceptance config parses");
        let dir = tempfile::tempdir().expect("temp dir");
        cfg.output.dir = dir.path().to_path_buf();
        let out = run(&cfg).expect("experiment runs");
        for r in out.rows.iter().filter(|r| r.status.starts_with("error")) {
            self.info("run", &format!("{} {} point {} failed: {}", r.experiment, r.scheme, r.point, r.status));
        }
        out.rows
    }

    fn collect_dominance(&mut self, id: &str, rows: &[Row]) {
        for r in rows {
            if let (Some(v), Some(b)) = (r.value, r.bound) {
                self.dominance.push((format!("{id} {} γ={:?} s={:?}", r.scheme, r.gamma, r.sample), v, b));
            }
        }
    }
}

fn ambient(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_column_slice(n, p, gaussian_vector(n * p, rng).as_slice())
}

fn criterion_1(s: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_member, mut worst_tan, mut worst_idem, mut worst_slope) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let instances = 1000;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let p = rng.random_range(1..=n);
        let x = random_point_with(n, p, &mut rng).unwrap();
        let v = ambient(n, p, &mut rng);
        let t: f64 = rng.random_range(0.0..2.0);
        let u = project_tangent(&x, &v).unwrap();
        worst_tan = worst_tan.max(u.tangency_defect(&x));
        let uu = project_tangent(&x, u.matrix()).unwrap();
        worst_idem = worst_idem.max(linalg::max_abs(&(uu.matrix() - u.matrix())));
        worst_member = worst_member.max(qr_retract(&x, &u, t).unwrap().defect());
        let scale = linalg::max_abs(u.matrix());
        if scale > 1e-8 {
            let h = 1e-6;
            let y = qr_retract(&x, &u, h).unwrap();
            let slope = (y.matrix() - x.matrix()) * c(1.0 / h, 0.0);
            worst_slope = worst_slope.max(linalg::max_abs(&(slope - u.matrix())) / scale);
        }
    }
    let pass = worst_member <= 1e-10 && worst_tan <= 1e-10 && worst_idem <= 1e-12 && worst_slope <= 1e-5;
    let fast = t0.elapsed().as_secs_f64() < 60.0;
    s.verdict(
        "C1 manifold properties",
        pass && fast,
        &format!(
            "{instances} instances; max membership {worst_member:.1e}, tangency {worst_tan:.1e}, idempotence {worst_idem:.1e}, slope rel {worst_slope:.1e}"
        ),
        t0,
    );
}

fn distill_layouts(copies: usize) -> Vec<(&'static str, LoccProtocol)> {
    let d = 1 << copies;
    let agents = vec![AgentSpace::square(d); 2];
    let povm = Povm::computational(vec![2; copies], (1..copies).collect()).unwrap();
    vec![
        ("LOCC1", LoccProtocol::locc_r(2, d, 1, 2, 1, Followers::Channels { kraus_orders: vec![2] }).unwrap()),
        ("LOCC2", LoccProtocol::locc_r(2, d, 2, 2, 1, Followers::Channels { kraus_orders: vec![2, 1] }).unwrap()),
        ("IPS", LoccProtocol::ips(agents.clone(), vec![], 2, 2).unwrap()),
        ("CMPS", LoccProtocol::cmps(agents, vec![], 2, vec![povm.clone(), povm]).unwrap()),
    ]
}

fn criterion_2(s: &mut Suite) {
    let t0 = Instant::now();
    let mut objectives: Vec<(String, Objective)> = Vec::new();
    for copies in [1, 2] {
        let rho = noisy_bell_input(
            2,
            &[NoiseKind::AmplitudeDamping { gamma: 0.3 }, NoiseKind::Depolarizing { gamma: 0.2 }][..copies],
            NoiseLocus::Joint,
        )
        .unwrap();
        let gadc = gadc_choi_input(&vec![(0.3, 0.05); copies]).unwrap();
        for (name, proto) in distill_layouts(copies) {
            let tag = format!("{name} M={copies}");
            objectives.push((format!("avg_distill {tag}"), Objective::avg_distill(proto.clone(), rho.clone(), copies).unwrap()));
            objectives.push((format!("distill {tag}"), Objective::distill(proto.clone(), rho.clone(), copies, None).unwrap()));
            objectives.push((format!("coherent_info {tag}"), Objective::block_coherent_info(proto, gadc.clone(), copies).unwrap()));
        }
    }
    let psi = {
        let h = haar_random_pure(8, 3).unwrap();
        loccforge::state::PureState::new(h.amplitudes().clone(), vec![2, 2, 2]).unwrap()
    };
    for (k, m) in [(1, 1), (2, 1)] {
        let agents = vec![AgentSpace { dim_in: 2 * k, dim_out: m }, AgentSpace { dim_in: 2 * k, dim_out: 4 * m }];
        let proto = LoccProtocol::ips(agents, vec![2], 2, 2).unwrap();
        objectives.push((format!("merge IPS k={k} m={m}"), Objective::merge(proto.clone(), &psi, k, m, None).unwrap()));
        objectives.push((format!("avg_merge IPS k={k} m={m}"), Objective::avg_merge(proto, &psi, k, m).unwrap()));
    }
    let mut worst = (0.0f64, String::new());
    let mut checks = 0;
    for (i, (name, obj)) in objectives.iter().enumerate() {
        for j in 0..3u64 {
            let x = ProductPoint::random(&obj.shapes(), 1000 + 10 * i as u64 + j).unwrap();
            let (a, n) = directional_check(obj, &x, 7 + j, 1e-6).unwrap();
            let rel = (a - n).abs() / a.abs().max(1e-6);
            checks += 1;
            if rel > worst.0 {
                worst = (rel, name.clone());
            }
        }
    }
    let pass = worst.0 <= 1e-5 && t0.elapsed().as_secs_f64() < 300.0;
    s.verdict(
        "C2 gradient suite",
        pass,
        &format!(
            "{} objectives, {checks} directional checks at h=1e-6; worst relative error {:.2e} ({})",
            objectives.len(),
            worst.0,
            worst.1
        ),
        t0,
    );
}

fn criterion_3(s: &mut Suite) {
    let t0 = Instant::now();
    let rho = noisy_bell_input(2, &[NoiseKind::Depolarizing { gamma: 0.0 }; 2], NoiseLocus::Joint).unwrap();
    let proto = LoccProtocol::locc_r(2, 4, 1, 2, 1, Followers::Identity).unwrap();
    let obj = Objective::avg_distill(proto, rho, 2).unwrap();
    let best = maximize_multi(&obj, &OptimOptions { restarts: 10, seed: 3, ..Default::default() }).unwrap();
    s.verdict(
        "C3 noiseless sanity",
        best.best.value >= 1.0 - 1e-6,
        &format!("LOCC1 (S=2, T=1) on Φ⁺⊗Φ⁺, best of 10 restarts = {:.10}", best.best.value),
        t0,
    );
}

const NON_IID: &str = "[noise]\nkinds = [\"amplitude_damping\", \"depolarizing\"]\n";

fn criterion_4(s: &mut Suite) {
    let t0 = Instant::now();
    let grid = s.grid();
    let cfg = |scheme: &str, extra: &str| {
        format!("experiment = \"distill-avg\"\nseed = 4\n{scheme}\n{extra}{NON_IID}{grid}[optimizer]\nrestarts = 40\n")
    };
    let l2 = s.run_toml(&cfg("scheme = \"locc\"\nrounds = 2\nfollower_channels = true", "with_bound = true\n"));
    let l1 = s.run_toml(&cfg("scheme = \"locc\"\nrounds = 1\nfollower_channels = true", "with_bound = true\n"));
    let ips = s.run_toml(&cfg("scheme = \"ips\"", "with_bound = true\n"));
    s.collect_dominance("C4", &l2);
    s.collect_dominance("C4", &l1);
    s.collect_dominance("C4", &ips);
    let mut worst_ppt = 0.0f64;
    let mut order_ok = true;
    let mut gap = (0.0f64, 0.0);
    for ((a, b), ci) in l2.iter().zip(&l1).zip(&ips) {
        let (v2, v1, vi) = (a.value.unwrap_or(f64::NAN), b.value.unwrap_or(f64::NAN), ci.value.unwrap_or(f64::NAN));
        let bound = a.bound.unwrap_or(f64::NAN);
        worst_ppt = worst_ppt.max((v2 - bound).abs()).max(if bound.is_nan() { f64::INFINITY } else { 0.0 });
        order_ok &= v2 >= v1 - 1e-4 && v1 >= vi - 1e-4;
        let g = a.gamma.unwrap();
        if g > 0.0 && g < 1.0 && v2 - v1 > gap.0 {
            gap = (v2 - v1, g);
        }
        s.info("C4", &format!("γ={g:.2} LOCC2={v2:.6} LOCC1={v1:.6} IPS={vi:.6} PPT={bound:.6}"));
    }
    let pass = worst_ppt <= 1e-3 && order_ok && gap.0 > 1e-3;
    s.verdict(
        "C4 non-i.i.d. average fidelity",
        pass,
        &format!(
            "max |LOCC2−PPT| = {worst_ppt:.2e}; ordering LOCC2 ≥ LOCC1 ≥ IPS−1e-4 {}; max interior LOCC2−LOCC1 = {:.4} at γ={:.2}",
            if order_ok { "holds" } else { "violated" },
            gap.0,
            gap.1
        ),
        t0,
    );
}

fn criterion_5(s: &mut Suite) {
    let t0 = Instant::now();
    let grid = s.grid();
    let mut worst_stated = (0.0f64, String::new());
    let mut worst_corrected = 0.0f64;
    for (kind, baseline) in [("depolarizing", (|g: f64| 1.0 - 0.75 * g) as fn(f64) -> f64), ("dephasing", |g: f64| 1.0 - 0.5 * g)] {
        let cfg = |scheme: &str| {
            format!("experiment = \"distill-avg\"\nseed = 5\nwith_bound = true\n{scheme}\n[noise]\nkinds = [\"{kind}\"]\n{grid}")
        };
        let l2 = s.run_toml(&cfg("scheme = \"locc\"\nrounds = 2\nfollower_channels = true"));
        let ips = s.run_toml(&cfg("scheme = \"ips\""));
        s.collect_dominance("C5", &l2);
        s.collect_dominance("C5", &ips);
        for (a, b) in l2.iter().zip(&ips) {
            let g = a.gamma.unwrap();
            let expect = baseline(g);
            let vals = [a.value.unwrap_or(f64::NAN), b.value.unwrap_or(f64::NAN), a.bound.unwrap_or(f64::NAN)];
            let dev = vals.iter().map(|v| (v - expect).abs()).fold(0.0f64, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
            let corrected = vals.iter().map(|v| (v - expect.max(0.5)).abs()).fold(0.0f64, f64::max);
            if dev > worst_stated.0 {
                worst_stated = (dev, format!("{kind} γ={g:.2}"));
            }
            worst_corrected = worst_corrected.max(corrected);
            s.info(
                "C5",
                &format!(
                    "{kind} γ={g:.2} baseline={expect:.6} LOCC2={:.6} IPS={:.6} PPT={:.6} identity={:.6}",
                    vals[0],
                    vals[1],
                    vals[2],
                    a.baseline.unwrap_or(f64::NAN)
                ),
            );
        }
    }
    s.info("C5", &format!("against max(baseline, 1/2): max deviation {worst_corrected:.2e}"));
    s.verdict(
        "C5 i.i.d. null result",
        worst_stated.0 <= 1e-3,
        &format!("max |value − single-copy baseline| over LOCC2, IPS, PPT = {:.2e} ({})", worst_stated.0, worst_stated.1),
        t0,
    );
}

fn criterion_6(s: &mut Suite) {
    let t0 = Instant::now();
    let grid = s.grid();
    let rows = s.run_toml(&format!(
        "experiment = \"distill-fid\"\nscheme = \"cmps\"\nkraus_order = 2\nselected = [0, 0]\nwith_bound = true\nseed = 6\n{NON_IID}{grid}"
    ));
    s.collect_dominance("C6", &rows);
    let mut low = Vec::new();
    let mut min_p = f64::INFINITY;
    for r in &rows {
        let (v, p) = (r.value.unwrap_or(f64::NAN), r.success_probability.unwrap_or(0.0));
        min_p = min_p.min(p);
        if v.is_nan() || v < 0.99 {
            low.push(format!("γ={:.2}: F={v:.6}", r.gamma.unwrap()));
        }
        s.info("C6", &format!("γ={:.2} F={v:.6} p={p:.3e} PPT(p)={:.6}", r.gamma.unwrap(), r.bound.unwrap_or(f64::NAN)));
    }
    let pass = low.is_empty() && min_p > 0.0;
    let detail = if low.is_empty() {
        format!("all {} points ≥ 0.99; min success probability {min_p:.2e}", rows.len())
    } else {
        format!("below 0.99 at {}; min success probability {min_p:.2e}", low.join(", "))
    };
    s.verdict("C6 CMPS conditional fidelity", pass, &detail, t0);
}

fn criterion_7(s: &mut Suite) {
    let t0 = Instant::now();
    let grid = s.grid();
    let rows = s.run_toml(&format!(
        "experiment = \"coherent-info\"\nscheme = \"locc\"\nrounds = 2\noutcomes = 2\nkraus_order = 1\ncopies = 2\nseed = 7\n[noise]\nkinds = [\"gadc\"]\ngamma_n = 0.05\n{grid}"
    ));
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut worst_restriction = f64::INFINITY;
    for r in &rows {
        let ga = r.gamma.unwrap();
        let n1 = coherent_information(&gadc_choi(ga, 0.05).unwrap(), 1).unwrap();
        let n2 = r.value.unwrap_or(f64::NAN);
        let diff = n2 - n1;
        if diff > best.0 {
            best = (diff, ga);
        }
        worst_restriction = worst_restriction.min(if diff.is_nan() { f64::NEG_INFINITY } else { diff });
        s.info("C7", &format!("γ_a={ga:.2} γ_n=0.05 n1(hashing)={n1:.6} n2={n2:.6} diff={diff:.2e}"));
    }
    s.verdict(
        "C7 GADC coherent information",
        best.0 > 1e-3 && worst_restriction >= -1e-6,
        &format!("max n2−n1 = {:.4} at γ_a={:.2}; min n2−n1 = {worst_restriction:.2e}", best.0, best.1),
        t0,
    );
}

fn criterion_8(s: &mut Suite) {
    let t0 = Instant::now();
    let samples = if s.quick { 4 } else { 200 };
    let cfg = |k: usize, m: usize, objective: &str, bound: bool| {
        format!(
            "experiment = \"merge\"\nscheme = \"ips\"\nseed = 8\nwith_bound = {bound}\n[merge]\nk = {k}\nm = {m}\nsamples = {samples}\nobjective = \"{objective}\"\n"
        )
    };
    let k2m1 = s.run_toml(&cfg(2, 1, "conditional", false));
    let k1m1 = s.run_toml(&cfg(1, 1, "conditional", false));
    let k2m2 = s.run_toml(&cfg(2, 2, "conditional", false));
    let avg = s.run_toml(&cfg(1, 1, "average", true));
    s.collect_dominance("C8", &avg);
    let min_a =
        k2m1.iter().map(|r| r.value.unwrap_or(f64::NAN)).fold(f64::INFINITY, |m, v| if v.is_nan() { f64::NEG_INFINITY } else { m.min(v) });
    let max_b = k1m1
        .iter()
        .zip(&k2m2)
        .map(|(a, b)| (a.value.unwrap_or(f64::NAN) - b.value.unwrap_or(f64::NAN)).abs())
        .fold(0.0f64, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
    let min_c = avg.iter().map(|r| r.bound.unwrap_or(f64::NAN) - r.value.unwrap_or(f64::NAN)).fold(f64::INFINITY, |m, d| {
        if d.is_nan() {
            f64::NEG_INFINITY
        } else {
            m.min(d)
        }
    });
    let mean_gap = avg.iter().map(|r| r.bound.unwrap_or(0.0) - r.value.unwrap_or(0.0)).sum::<f64>() / avg.len() as f64;
    let (pa, pb, pc) = (min_a >= 0.99, max_b <= 1e-3, min_c >= 0.0);
    s.info("C8", &format!("(a) min F_mer(k=2,m=1) = {min_a:.6} {}", if pa { "ok" } else { "FAILED" }));
    s.info("C8", &format!("(b) max |F(k=1,m=1) − F(k=2,m=2)| = {max_b:.2e} {}", if pb { "ok" } else { "FAILED" }));
    s.info("C8", &format!("(c) min PPT bound − IPS average = {min_c:.2e}, mean gap {mean_gap:.4} {}", if pc { "ok" } else { "FAILED" }));
    let pass = pa && pb && pc && t0.elapsed().as_secs_f64() < 4.0 * 3600.0;
    s.verdict("C8 state merging", pass, &format!("{samples} Haar samples; (a) {pa} (b) {pb} (c) {pc}"), t0);
}

fn criterion_9(s: &mut Suite) {
    let t0 = Instant::now();
    let violations: Vec<&(String, f64, f64)> = s.dominance.iter().filter(|(_, v, b)| *b < *v - 1e-4).collect();
    for (what, v, b) in &violations {
        s.info("C9", &format!("violation {what}: value {v:.6} bound {b:.6}"));
    }
    let worst = s.dominance.iter().map(|(_, v, b)| v - b).fold(f64::NEG_INFINITY, f64::max);
    s.verdict(
        "C9 relaxation dominance",
        violations.is_empty() && !s.dominance.is_empty(),
        &format!("{} instances, {} violations; max value − bound = {worst:.2e}", s.dominance.len(), violations.len()),
        t0,
    );
}

fn criterion_10(s: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let id = linalg::identity(4);
    let (mut agree, mut feasible, mut total) = (0, 0, 0);
    while total < 100 {
        // E + 3F = I; F = I/4 + tH is feasible while the Frobenius norm of tH stays under 1/12
        let rank = [1, 2, 4][rng.random_range(0..3)];
        let a = ambient(4, rank, &mut rng);
        let raw = &a * a.adjoint();
        let h = &raw - &id * c(raw.trace().re / 4.0, 0.0);
        let t: f64 = rng.random_range(-0.4..0.4);
        let f = &id * c(0.25, 0.0) + &h * c(t / h.norm(), 0.0);
        let e = &id - &f * c(3.0, 0.0);
        let simple = simplified_constraint_check(&e, &f, [2, 2], 2).unwrap();
        if simple.min_eig_e < -1e-12 || simple.min_eig_f < -1e-12 {
            continue;
        }
        let choi = choi_constraint_check(&e, &f, [2, 2], 2).unwrap();
        let (a, b) = (simple.margin() >= -1e-8, choi.margin() >= -1e-8);
        total += 1;
        agree += usize::from(a == b);
        feasible += usize::from(b);
    }
    s.verdict(
        "C10 simplified PPT constraint equivalence",
        agree == total,
        &format!("{agree}/{total} pairs agree ({feasible} satisfy the PPT constraints, {} violate them)", total - feasible),
        t0,
    );
}

fn criterion_11(s: &mut Suite) {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::from_toml("experiment = \"timing\"\nseed = 11\n[timing]\ngamma = 0.4\n").unwrap();
    let (small, rho2) = cmps_trial(&cfg, 2, 0).unwrap();
    let small_ppt = ppt_trial(&cfg, &rho2, 2, 0, small.success_probability.unwrap_or(0.0), 1800.0);
    s.info(
        "C11",
        &format!(
            "M=2: CMPS {:.2}s (F={:.6}), PPT {:.2}s ({})",
            small.wall_time_s,
            small.value.unwrap_or(f64::NAN),
            small_ppt.wall_time_s,
            small_ppt.status
        ),
    );
    let (cmps, rho3) = cmps_trial(&cfg, 3, 0).unwrap();
    let cap = (5.0 * cmps.wall_time_s).clamp(1.0, 1800.0);
    let ppt = ppt_trial(&cfg, &rho3, 3, 0, cmps.success_probability.unwrap_or(0.0), cap);
    let ratio = ppt.wall_time_s / cmps.wall_time_s;
    let capped = ppt.status == "sdp_time_limit";
    s.info(
        "C11",
        &format!(
            "M=3: CMPS {:.2}s (F={:.6}, p={:.3e}), PPT {:.2}s ({}) cap {cap:.1}s",
            cmps.wall_time_s,
            cmps.value.unwrap_or(f64::NAN),
            cmps.success_probability.unwrap_or(f64::NAN),
            ppt.wall_time_s,
            ppt.status
        ),
    );
    let pass = cmps.wall_time_s < 600.0 && (capped || ratio >= 5.0);
    let detail = if capped {
        format!("SDP still unconverged after 5× the CMPS time ({ratio:.1}×)")
    } else {
        format!("SDP/CMPS time ratio {ratio:.1}")
    };
    s.verdict("C11 timing ordering at M=3", pass, &detail, t0);
}

fn main() -> ExitCode {
    let quick = std::env::var("LOCCFORGE_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let mut s = Suite { quick, failed: 0, dominance: Vec::new() };
    let only: Option<Vec<usize>> =
        std::env::var("LOCCFORGE_ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let criteria: [Criterion; 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let t0 = Instant::now();
    for (i, f) in criteria {
        if wanted(i) {
            f(&mut s);
        }
    }
    s.say(&format!("acceptance: {} failed ({:.0}s total)", s.failed, t0.elapsed().as_secs_f64()));
    // verdicts are the report; only strict mode turns a FAIL into a failing test run
    let strict = std::env::var("LOCCFORGE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if s.failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
