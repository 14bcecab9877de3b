//! Noise channels, experiment inputs and objective functions with gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat};
use crate::manifold::ProductPoint;
use crate::protocol::{BranchFunctional, Engine, LeafValue, LoccProtocol};
use crate::state::{
    embed_identity, entropy_unnormalized, max_entangled, partial_trace_mat, permute_mat, permute_vec, KrausSet, PureState, QState,
    EIGEN_FLOOR,
};

/// Branch probabilities below this count as a failed selection.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Depolarizing { gamma: f64 },
    AmplitudeDamping { gamma: f64 },
    Dephasing { gamma: f64 },
    Gadc { gamma_a: f64, gamma_n: f64 },
}

impl NoiseKind {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseKind::Depolarizing { .. } => "depolarizing",
            NoiseKind::AmplitudeDamping { .. } => "amplitude_damping",
            NoiseKind::Dephasing { .. } => "dephasing",
            NoiseKind::Gadc { .. } => "gadc",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            NoiseKind::Depolarizing { gamma } | NoiseKind::AmplitudeDamping { gamma } | NoiseKind::Dephasing { gamma } => {
                vec![gamma]
            }
            NoiseKind::Gadc { gamma_a, gamma_n } => vec![gamma_a, gamma_n],
        }
    }
}

/// Where distillation noise acts: on the whole copy or on the last agent's
/// qubit only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLocus {
    #[default]
    Joint,
    OneSided,
}

impl NoiseLocus {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseLocus::Joint => "joint",
            NoiseLocus::OneSided => "one_sided",
        }
    }
}

fn ket_bra(d: usize, i: usize, j: usize, v: f64) -> Mat {
    let mut m = Mat::zeros(d, d);
    m[(i, j)] = c(v, 0.0);
    m
}

/// Generalized Pauli `X^a Z^b` on dimension `d`.
fn weyl(d: usize, a: usize, b: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    for j in 0..d {
        let phase = 2.0 * std::f64::consts::PI * (b * j) as f64 / d as f64;
        m[((j + a) % d, j)] = c(phase.cos(), phase.sin());
    }
    m
}

pub fn make_noise(kind: &NoiseKind, d: usize) -> Result<KrausSet> {
    if d < 2 {
        return Err(Error::Parameter(format!("noise dimension {d} < 2")));
    }
    if kind.params().iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::Parameter(format!("noise parameters {:?} outside [0, 1]", kind.params())));
    }
    let ops = match *kind {
        NoiseKind::Depolarizing { gamma } => {
            let mut ops = vec![linalg::identity(d) * c((1.0 - gamma).sqrt(), 0.0)];
            let s = gamma.sqrt() / d as f64;
            for a in 0..d {
                for b in 0..d {
                    ops.push(weyl(d, a, b) * c(s, 0.0));
                }
            }
            ops
        }
        NoiseKind::AmplitudeDamping { gamma } => {
            let mut k0 = linalg::identity(d) * c((1.0 - gamma).sqrt(), 0.0);
            k0[(0, 0)] = c(1.0, 0.0);
            let mut ops = vec![k0];
            ops.extend((1..d).map(|i| ket_bra(d, i - 1, i, gamma.sqrt())));
            ops
        }
        NoiseKind::Dephasing { gamma } => {
            let mut ops = vec![linalg::identity(d) * c((1.0 - gamma).sqrt(), 0.0)];
            ops.extend((0..d).map(|i| ket_bra(d, i, i, gamma.sqrt())));
            ops
        }
        NoiseKind::Gadc { gamma_a, gamma_n } => {
            if d != 2 {
                return Err(Error::Parameter("GADC is defined on qubits only".into()));
            }
            let (a, n) = (gamma_a, gamma_n);
            vec![
                (ket_bra(2, 0, 0, 1.0) + ket_bra(2, 1, 1, (1.0 - a).sqrt())) * c((1.0 - n).sqrt(), 0.0),
                ket_bra(2, 0, 1, (a * (1.0 - n)).sqrt()),
                (ket_bra(2, 0, 0, (1.0 - a).sqrt()) + ket_bra(2, 1, 1, 1.0)) * c(n.sqrt(), 0.0),
                ket_bra(2, 1, 0, (a * n).sqrt()),
            ]
        }
    };
    KrausSet::new(ops)
}

/// Permutation taking copy-major qubits `(copy, agent)` to agent-major order.
fn agent_major_perm(n_agents: usize, copies: usize) -> Vec<usize> {
    (0..n_agents * copies).map(|i| (i % copies) * n_agents + i / copies).collect()
}

/// `⊗_k noise_k(Φ)` over `M` copies of the `N`-qubit GHZ state, regrouped so
/// that agent `x` holds the `M` qubits `x` of every copy (`dims = [2^M; N]`).
pub fn noisy_bell_input(n_agents: usize, noises: &[NoiseKind], locus: NoiseLocus) -> Result<QState> {
    if n_agents < 2 || noises.is_empty() {
        return Err(Error::Parameter("need >= 2 agents and >= 1 copy".into()));
    }
    let copies = noises.len();
    let phi = max_entangled(n_agents, 2)?.density();
    let mut full = Mat::from_element(1, 1, c(1.0, 0.0));
    for noise in noises {
        let copy = match locus {
            NoiseLocus::Joint => make_noise(noise, 1 << n_agents)?.apply(phi.data()),
            NoiseLocus::OneSided => make_noise(noise, 2)?.apply_on(&phi, n_agents - 1)?.into_data(),
        };
        full = linalg::kron(&full, &copy);
    }
    let dims = vec![2; n_agents * copies];
    let (m, _) = permute_mat(&full, &dims, &agent_major_perm(n_agents, copies))?;
    QState::new(m, vec![1 << copies; n_agents])
}

/// `Φ` on every agent's first qubit, identity on the rest (agent-major order).
pub fn distillation_target(n_agents: usize, copies: usize) -> Result<Mat> {
    let phi = max_entangled(n_agents, 2)?.density().into_data();
    let rest = linalg::identity(1 << (n_agents * (copies - 1)));
    let w = linalg::kron(&phi, &rest);
    let mut dims = vec![2; n_agents];
    dims.extend(std::iter::repeat_n(2, n_agents * (copies - 1)));
    // w is ordered (copy1 agents..., remaining copies...) which is copy-major
    let (m, _) = permute_mat(&w, &dims, &agent_major_perm(n_agents, copies))?;
    Ok(m)
}

/// `(I ⊗ N)(Φ)` for the GADC acting on Bob's qubit.
pub fn gadc_choi(gamma_a: f64, gamma_n: f64) -> Result<QState> {
    let phi = max_entangled(2, 2)?.density();
    make_noise(&NoiseKind::Gadc { gamma_a, gamma_n }, 2)?.apply_on(&phi, 1)
}

/// `⊗_k` GADC Choi states grouped as `[2^n, 2^n]` (Alice, Bob).
pub fn gadc_choi_input(params: &[(f64, f64)]) -> Result<QState> {
    if params.is_empty() {
        return Err(Error::Parameter("need at least one copy".into()));
    }
    let mut full = Mat::from_element(1, 1, c(1.0, 0.0));
    for &(a, n) in params {
        full = linalg::kron(&full, gadc_choi(a, n)?.data());
    }
    let copies = params.len();
    let (m, _) = permute_mat(&full, &vec![2; 2 * copies], &agent_major_perm(2, copies))?;
    QState::new(m, vec![1 << copies; 2])
}

fn check_rank(name: &str, r: usize) -> Result<()> {
    if !(1..=2).contains(&r) {
        return Err(Error::Parameter(format!("{name} = {r}; Schmidt ranks must be 1 or 2")));
    }
    Ok(())
}

/// `ψ_RAB ⊗ Φ_k` grouped as `[R, A⊗A_e, B⊗B_e]`.
pub fn merge_input(psi: &PureState, k: usize) -> Result<QState> {
    check_rank("k", k)?;
    if psi.dims() != [2, 2, 2] {
        return Err(Error::Dimension(format!("merging expects qubits R, A, B, got {:?}", psi.dims())));
    }
    let phi = max_entangled(2, k)?;
    let joint = psi.tensor(&phi);
    // (R, A, B, A_e, B_e) -> (R, A, A_e, B, B_e)
    let (v, _) = permute_vec(joint.amplitudes(), joint.dims(), &[0, 1, 3, 2, 4])?;
    QState::new(&v * v.adjoint(), vec![2, 2 * k, 2 * k])
}

/// `Φ'_m ⊗ ψ_{RB'B''}` grouped as `[R, A_e', B_e'⊗B'⊗B'']`.
pub fn merge_target(psi: &PureState, m: usize) -> Result<PureState> {
    check_rank("m", m)?;
    let phi = max_entangled(2, m)?;
    let joint = phi.tensor(psi);
    // (A_e', B_e', R, B', B'') -> (R, A_e', B_e', B', B'')
    let (v, _) = permute_vec(joint.amplitudes(), joint.dims(), &[2, 0, 1, 3, 4])?;
    PureState::new(v, vec![2, m, 4 * m])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    AvgDistillFid,
    DistillFid,
    BlockCoherentInfo,
    MergeFid,
    AvgMergeFid,
}

impl ObjectiveKind {
    pub fn is_conditional(&self) -> bool {
        matches!(self, ObjectiveKind::DistillFid | ObjectiveKind::MergeFid)
    }
}

/// Value of an objective with the probability of the selected branch when
/// the objective post-selects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub success_probability: Option<f64>,
    /// The selected branch fell below [`PROBABILITY_FLOOR`].
    pub failed: bool,
}

#[derive(Debug, Clone)]
enum Target {
    /// Fidelity is `Tr[Wσ]`.
    Operator(Mat),
    /// Coherent information per copy across the Alice/Bob cut.
    Cut { copies: usize },
}

#[derive(Debug, Clone)]
pub struct Objective {
    kind: ObjectiveKind,
    protocol: LoccProtocol,
    input: QState,
    target: Target,
    selected: Option<Vec<usize>>,
}

impl Objective {
    fn build(kind: ObjectiveKind, protocol: LoccProtocol, input: QState, target: Target, selected: Option<Vec<usize>>) -> Result<Self> {
        protocol.check_input(&input)?;
        let out = linalg::product(&protocol.output_dims());
        match &target {
            Target::Operator(w) if w.nrows() != out || w.ncols() != out => {
                return Err(Error::Dimension(format!("target is {}x{}, protocol output dim {out}", w.nrows(), w.ncols())));
            }
            Target::Cut { copies } if *copies == 0 || protocol.n_agents() != 2 || !protocol.spectators().is_empty() => {
                return Err(Error::Parameter("coherent information needs two agents, no spectators, n >= 1".into()));
            }
            _ => {}
        }
        let selected = match (kind.is_conditional(), selected) {
            (true, None) => Some(vec![0; protocol.depth()]),
            (true, Some(s)) => {
                if s.len() != protocol.depth() || s.iter().enumerate().any(|(k, &j)| j >= protocol.stage_outcomes(k)) {
                    return Err(Error::Parameter(format!("outcome sequence {s:?} is not a branch of the protocol")));
                }
                Some(s)
            }
            (false, Some(_)) => return Err(Error::Parameter("only conditional objectives select an outcome".into())),
            (false, None) => None,
        };
        Ok(Self { kind, protocol, input, target, selected })
    }

    /// Average distillation fidelity over all branches.
    pub fn avg_distill(protocol: LoccProtocol, input: QState, copies: usize) -> Result<Self> {
        let w = distillation_target(protocol.n_agents(), copies)?;
        Self::build(ObjectiveKind::AvgDistillFid, protocol, input, Target::Operator(w), None)
    }

    /// Distillation fidelity conditioned on `selected` (all zeros by default).
    pub fn distill(protocol: LoccProtocol, input: QState, copies: usize, selected: Option<Vec<usize>>) -> Result<Self> {
        let w = distillation_target(protocol.n_agents(), copies)?;
        Self::build(ObjectiveKind::DistillFid, protocol, input, Target::Operator(w), selected)
    }

    /// Per-copy coherent information `I(A⟩B)` of `Σ_j E_j(ρ) ⊗ |j⟩⟨j|_B`.
    pub fn block_coherent_info(protocol: LoccProtocol, input: QState, copies: usize) -> Result<Self> {
        Self::build(ObjectiveKind::BlockCoherentInfo, protocol, input, Target::Cut { copies }, None)
    }

    pub fn merge(protocol: LoccProtocol, psi: &PureState, k: usize, m: usize, selected: Option<Vec<usize>>) -> Result<Self> {
        let w = merge_target(psi, m)?.density().into_data();
        Self::build(ObjectiveKind::MergeFid, protocol, merge_input(psi, k)?, Target::Operator(w), selected)
    }

    pub fn avg_merge(protocol: LoccProtocol, psi: &PureState, k: usize, m: usize) -> Result<Self> {
        let w = merge_target(psi, m)?.density().into_data();
        Self::build(ObjectiveKind::AvgMergeFid, protocol, merge_input(psi, k)?, Target::Operator(w), None)
    }

    /// Fidelity-type objective against an arbitrary Hermitian target on the
    /// protocol output.
    pub fn with_target(
        kind: ObjectiveKind,
        protocol: LoccProtocol,
        input: QState,
        target: Mat,
        selected: Option<Vec<usize>>,
    ) -> Result<Self> {
        if kind == ObjectiveKind::BlockCoherentInfo {
            return Err(Error::Parameter("coherent information has no target operator".into()));
        }
        Self::build(kind, protocol, input, Target::Operator(target), selected)
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn protocol(&self) -> &LoccProtocol {
        &self.protocol
    }

    pub fn input(&self) -> &QState {
        &self.input
    }

    pub fn selected(&self) -> Option<&[usize]> {
        self.selected.as_deref()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.protocol.shapes()
    }

    fn run(&self, point: &ProductPoint, want_grad: bool) -> Result<(Evaluation, Option<Vec<Mat>>)> {
        self.protocol.check_point(point)?;
        let engine = Engine::new(&self.protocol, point);
        let rho = self.input.data().clone();
        match (&self.target, &self.selected) {
            (Target::Operator(w), None) => {
                let (value, grad) = engine.evaluate(rho, &AverageFidelity { w }, want_grad);
                Ok((Evaluation { value, success_probability: None, failed: false }, grad))
            }
            (Target::Operator(w), Some(sel)) => {
                let f = ConditionalFidelity { w, selected: sel, probability: std::cell::Cell::new(0.0) };
                let (value, grad) = engine.evaluate(rho, &f, want_grad);
                let p = f.probability.get();
                let failed = p < PROBABILITY_FLOOR;
                let grad = if failed { grad.map(|g| g.iter().map(|m| Mat::zeros(m.nrows(), m.ncols())).collect()) } else { grad };
                Ok((Evaluation { value, success_probability: Some(p), failed }, grad))
            }
            (Target::Cut { copies }, _) => {
                let (value, grad) = engine.evaluate(rho, &FlaggedCoherentInfo { copies: *copies }, want_grad);
                Ok((Evaluation { value, success_probability: None, failed: false }, grad))
            }
        }
    }

    pub fn evaluate(&self, point: &ProductPoint) -> Result<Evaluation> {
        Ok(self.run(point, false)?.0)
    }

    pub fn value(&self, point: &ProductPoint) -> Result<f64> {
        Ok(self.evaluate(point)?.value)
    }

    pub fn value_and_gradient(&self, point: &ProductPoint) -> Result<(f64, Vec<Mat>)> {
        let (e, g) = self.run(point, true)?;
        Ok((e.value, g.expect("gradient requested")))
    }
}

/// Ambient gradient `G = 2∂f/∂X̄` of each part, so that `Df[Z] = Re Tr[G†Z]`.
pub fn euclidean_gradient(objective: &Objective, point: &ProductPoint) -> Result<Vec<Mat>> {
    Ok(objective.value_and_gradient(point)?.1)
}

/// Directional derivative along a random ambient direction: analytic value
/// from the gradient and a central difference with step `h`.
pub fn directional_check(objective: &Objective, point: &ProductPoint, seed: u64, h: f64) -> Result<(f64, f64)> {
    let (_, grad) = objective.value_and_gradient(point)?;
    let dirs = ProductPoint::random(&objective.shapes(), seed)?;
    let analytic: f64 = grad.iter().zip(dirs.parts()).map(|(g, z)| linalg::inner(g, z.matrix())).sum();
    let shifted = |s: f64| {
        let mats = point.parts().iter().zip(dirs.parts()).map(|(x, z)| x.matrix() + z.matrix() * c(s, 0.0)).collect();
        objective.value(&ProductPoint::from_matrices_unchecked(mats))
    };
    let numeric = (shifted(h)? - shifted(-h)?) / (2.0 * h);
    Ok((analytic, numeric))
}

struct AverageFidelity<'a> {
    w: &'a Mat,
}

impl BranchFunctional for AverageFidelity<'_> {
    fn leaf(&self, _: &[usize], state: &Mat, _: &[usize], want: bool) -> LeafValue {
        LeafValue { value: linalg::trace_product(self.w, state).re, sensitivity: want.then(|| self.w.clone()) }
    }
}

struct ConditionalFidelity<'a> {
    w: &'a Mat,
    selected: &'a [usize],
    probability: std::cell::Cell<f64>,
}

impl BranchFunctional for ConditionalFidelity<'_> {
    fn relevant(&self, prefix: &[usize]) -> bool {
        self.selected.starts_with(prefix)
    }

    fn leaf(&self, _: &[usize], state: &Mat, _: &[usize], want: bool) -> LeafValue {
        let p = state.trace().re;
        self.probability.set(p);
        if p < PROBABILITY_FLOOR {
            return LeafValue::zero();
        }
        let f = linalg::trace_product(self.w, state).re / p;
        let sensitivity = want.then(|| {
            let n = state.nrows();
            (self.w - linalg::identity(n) * c(f, 0.0)) * c(1.0 / p, 0.0)
        });
        LeafValue { value: f, sensitivity }
    }
}

struct FlaggedCoherentInfo {
    copies: usize,
}

fn log2_clamped(m: &Mat) -> Mat {
    linalg::spectral_map(m, |x| x.max(EIGEN_FLOOR).log2())
}

impl BranchFunctional for FlaggedCoherentInfo {
    fn leaf(&self, _: &[usize], state: &Mat, dims: &[usize], want: bool) -> LeafValue {
        let n = self.copies as f64;
        let bob = partial_trace_mat(state, dims, &[1]).expect("two-slot output");
        let value = (entropy_unnormalized(&bob) - entropy_unnormalized(state)) / n;
        let sensitivity = want.then(|| {
            let lifted = embed_identity(&log2_clamped(&bob), dims, &[1]).expect("two-slot output");
            (log2_clamped(state) - lifted) * c(1.0 / n, 0.0)
        });
        LeafValue { value, sensitivity }
    }
}
