//! LOCC protocol structures parameterized by product Stiefel points.
//!
//! A protocol is compiled into a sequence of stages. Each stage optionally
//! applies a common prefix of local maps, then branches on a classical outcome.
//! Evaluation is a depth-first walk over outcome sequences; gradients are
//! accumulated by pushing output sensitivities back through the same walk.

mod document;
mod engine;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, Mat};
use crate::manifold::{ProductPoint, StiefelPoint};
use crate::state::{KrausSet, QState};

pub use document::{ProtocolDocument, DOCUMENT_FORMAT, DOCUMENT_VERSION};
pub(crate) use engine::{BranchFunctional, Engine, LeafValue};

/// Local input and output dimension of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpace {
    pub dim_in: usize,
    pub dim_out: usize,
}

impl AgentSpace {
    pub fn square(d: usize) -> Self {
        Self { dim_in: d, dim_out: d }
    }
}

/// Instrument order `S`, uniform Kraus order `T` and local dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub outcomes: usize,
    pub kraus_order: usize,
    pub dim_in: usize,
    pub dim_out: usize,
}

impl InstrumentSpec {
    pub fn new(outcomes: usize, kraus_order: usize, dim_in: usize, dim_out: usize) -> Result<Self> {
        if outcomes == 0 || kraus_order == 0 || dim_in == 0 || dim_out == 0 {
            return Err(Error::Parameter(format!("instrument spec S={outcomes} T={kraus_order} d_in={dim_in} d_out={dim_out}")));
        }
        let spec = Self { outcomes, kraus_order, dim_in, dim_out };
        if spec.shape().0 < dim_in {
            return Err(Error::Parameter(format!("instrument needs S*T*d_out >= d_in, got {} < {dim_in}", spec.shape().0)));
        }
        Ok(spec)
    }

    pub fn channel(kraus_order: usize, dim_in: usize, dim_out: usize) -> Result<Self> {
        Self::new(1, kraus_order, dim_in, dim_out)
    }

    /// `(S·T·d_out, d_in)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.outcomes * self.kraus_order * self.dim_out, self.dim_in)
    }

    pub fn blocks(&self) -> usize {
        self.outcomes * self.kraus_order
    }
}

/// A quantum instrument: one CP map per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    branches: Vec<KrausSet>,
}

impl Instrument {
    pub fn branches(&self) -> &[KrausSet] {
        &self.branches
    }

    /// Max-abs distance of `Σ_j Σ_i K†K` from the identity.
    pub fn tp_defect(&self) -> f64 {
        let n = self.branches[0].dim_in();
        let total = self.branches.iter().fold(Mat::zeros(n, n), |acc, b| acc + b.completeness());
        linalg::max_abs(&(total - linalg::identity(n)))
    }

    /// Stacks every Kraus block back into the Stiefel matrix.
    pub fn to_matrix(&self) -> Mat {
        let blocks: Vec<&Mat> = self.branches.iter().flat_map(|b| b.ops()).collect();
        stack_rows(&blocks)
    }

    pub fn branch_weights(&self, rho: &Mat) -> Vec<f64> {
        self.branches.iter().map(|b| b.apply(rho).trace().re).collect()
    }
}

pub(crate) fn stack_rows(blocks: &[&Mat]) -> Mat {
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub(crate) fn split_blocks(x: &Mat, dim_out: usize) -> Vec<Mat> {
    (0..x.nrows() / dim_out).map(|b| x.rows(b * dim_out, dim_out).into_owned()).collect()
}

/// Slices the rows of `X` into contiguous `d_out×d_in` Kraus blocks.
pub fn instrument_from_point(x: &StiefelPoint, spec: &InstrumentSpec) -> Result<Instrument> {
    if x.shape() != spec.shape() {
        return Err(Error::Dimension(format!("point {:?} does not match instrument shape {:?}", x.shape(), spec.shape())));
    }
    let blocks = split_blocks(x.matrix(), spec.dim_out);
    let branches = blocks.chunks(spec.kraus_order).map(|ops| KrausSet::new(ops.to_vec())).collect::<Result<_>>()?;
    Ok(Instrument { branches })
}

/// Computational-basis measurement on some tensor factors of an agent's space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Povm {
    pub factors: Vec<usize>,
    pub measured: Vec<usize>,
}

impl Povm {
    pub fn computational(factors: Vec<usize>, measured: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = measured.iter().find(|&&m| m >= factors.len()) {
            return Err(Error::SubsystemIndex { index: bad, count: factors.len() });
        }
        let mut m = measured;
        m.sort_unstable();
        m.dedup();
        Ok(Self { factors, measured: m })
    }

    pub fn dim(&self) -> usize {
        linalg::product(&self.factors)
    }

    pub fn outcomes(&self) -> usize {
        self.measured.iter().map(|&m| self.factors[m]).product()
    }

    /// Projector `I ⊗ |o⟩⟨o| ⊗ I` with `o` the row-major digit string over the
    /// measured factors.
    pub fn projector(&self, outcome: usize) -> Mat {
        let n = self.dim();
        let strides = linalg::strides(&self.factors);
        let mut digits = vec![0usize; self.measured.len()];
        let mut rem = outcome;
        for (slot, &m) in self.measured.iter().enumerate().rev() {
            digits[slot] = rem % self.factors[m];
            rem /= self.factors[m];
        }
        let mut p = Mat::zeros(n, n);
        for idx in 0..n {
            let ok = self.measured.iter().zip(&digits).all(|(&m, &d)| (idx / strides[m]) % self.factors[m] == d);
            if ok {
                p[(idx, idx)] = c(1.0, 0.0);
            }
        }
        p
    }
}

/// Follower channels of a general r-round protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Followers {
    Identity,
    /// One Kraus order per round.
    Channels {
        kraus_orders: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// `LOCC_r`: one leader instrument per outcome prefix, outcome-conditioned
    /// follower channels for everyone else.
    General { leaders: Vec<usize>, outcomes: usize, kraus_order: usize, followers: Followers },
    /// Independent instruments with post-selection.
    Ips { outcomes: usize, kraus_order: usize },
    /// A channel per agent followed by a fixed measurement.
    Cmps { kraus_order: usize, povms: Vec<Povm> },
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::General { .. } => "general",
            Scheme::Ips { .. } => "ips",
            Scheme::Cmps { .. } => "cmps",
        }
    }
}

/// Which Stiefel factor a layout entry parameterizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum PartRole {
    Leader {
        round: usize,
        prefix: Vec<usize>,
        agent: usize,
    },
    /// `prefix` includes the outcome of this round.
    Follower {
        round: usize,
        prefix: Vec<usize>,
        agent: usize,
    },
    Instrument {
        agent: usize,
    },
    Channel {
        agent: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartInfo {
    #[serde(flatten)]
    pub role: PartRole,
    pub spec: InstrumentSpec,
}

impl PartInfo {
    pub fn shape(&self) -> (usize, usize) {
        self.spec.shape()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoccProtocol {
    agents: Vec<AgentSpace>,
    /// Untouched leading subsystems (e.g. a purifying reference).
    spectators: Vec<usize>,
    scheme: Scheme,
}

/// An outcome sequence and its unnormalized post-branch state.
#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub outcomes: Vec<usize>,
    pub state: QState,
    pub weight: f64,
}

impl LoccProtocol {
    pub fn new(agents: Vec<AgentSpace>, spectators: Vec<usize>, scheme: Scheme) -> Result<Self> {
        let n = agents.len();
        if n == 0 || agents.iter().any(|a| a.dim_in == 0 || a.dim_out == 0) || spectators.contains(&0) {
            return Err(Error::Parameter("agents and spectators need positive dimensions".into()));
        }
        match &scheme {
            Scheme::General { leaders, outcomes, kraus_order, followers } => {
                if leaders.is_empty() || *outcomes == 0 || *kraus_order == 0 {
                    return Err(Error::Parameter("general scheme needs >= 1 round, S >= 1, T >= 1".into()));
                }
                if let Some(&bad) = leaders.iter().find(|&&l| l >= n) {
                    return Err(Error::Parameter(format!("leader {bad} is not one of {n} agents")));
                }
                if let Followers::Channels { kraus_orders } = followers {
                    if kraus_orders.len() != leaders.len() || kraus_orders.contains(&0) {
                        return Err(Error::Parameter("one positive follower Kraus order per round required".into()));
                    }
                }
            }
            Scheme::Ips { outcomes, kraus_order } => {
                if *outcomes == 0 || *kraus_order == 0 {
                    return Err(Error::Parameter("IPS needs S >= 1 and T >= 1".into()));
                }
            }
            Scheme::Cmps { kraus_order, povms } => {
                if *kraus_order == 0 || povms.len() != n {
                    return Err(Error::Parameter("CMPS needs T >= 1 and one POVM per agent".into()));
                }
                for (a, p) in agents.iter().zip(povms) {
                    if p.dim() != a.dim_out {
                        return Err(Error::Dimension(format!("POVM on dim {} for agent output dim {}", p.dim(), a.dim_out)));
                    }
                }
            }
        }
        let protocol = Self { agents, spectators, scheme };
        for part in protocol.layout() {
            InstrumentSpec::new(part.spec.outcomes, part.spec.kraus_order, part.spec.dim_in, part.spec.dim_out)?;
        }
        Ok(protocol)
    }

    /// `LOCC_r` over `n` agents of local dimension `d` with alternating leaders
    /// starting from agent 0.
    pub fn locc_r(n: usize, d: usize, rounds: usize, outcomes: usize, kraus_order: usize, followers: Followers) -> Result<Self> {
        let leaders = (0..rounds).map(|k| k % n.max(1)).collect();
        Self::new(vec![AgentSpace::square(d); n], vec![], Scheme::General { leaders, outcomes, kraus_order, followers })
    }

    pub fn ips(agents: Vec<AgentSpace>, spectators: Vec<usize>, outcomes: usize, kraus_order: usize) -> Result<Self> {
        Self::new(agents, spectators, Scheme::Ips { outcomes, kraus_order })
    }

    pub fn cmps(agents: Vec<AgentSpace>, spectators: Vec<usize>, kraus_order: usize, povms: Vec<Povm>) -> Result<Self> {
        Self::new(agents, spectators, Scheme::Cmps { kraus_order, povms })
    }

    pub fn agents(&self) -> &[AgentSpace] {
        &self.agents
    }

    pub fn spectators(&self) -> &[usize] {
        &self.spectators
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub(crate) fn slot(&self, agent: usize) -> usize {
        self.spectators.len() + agent
    }

    pub fn input_dims(&self) -> Vec<usize> {
        let mut d = self.spectators.clone();
        d.extend(self.agents.iter().map(|a| a.dim_in));
        d
    }

    /// Number of classical stages (rounds for the general scheme, agents
    /// otherwise); also the length of every outcome sequence.
    pub fn depth(&self) -> usize {
        match &self.scheme {
            Scheme::General { leaders, .. } => leaders.len(),
            _ => self.agents.len(),
        }
    }

    /// Outcomes available at stage `depth`.
    pub fn stage_outcomes(&self, depth: usize) -> usize {
        match &self.scheme {
            Scheme::General { outcomes, .. } | Scheme::Ips { outcomes, .. } => *outcomes,
            Scheme::Cmps { povms, .. } => povms[depth].outcomes(),
        }
    }

    fn general_acted_before(&self, agent: usize, round: usize) -> bool {
        match &self.scheme {
            Scheme::General { leaders, followers, .. } => {
                round > 0 && (matches!(followers, Followers::Channels { .. }) || leaders[..round].contains(&agent))
            }
            _ => false,
        }
    }

    fn general_dim_before(&self, agent: usize, round: usize) -> usize {
        if self.general_acted_before(agent, round) {
            self.agents[agent].dim_out
        } else {
            self.agents[agent].dim_in
        }
    }

    pub fn output_dims(&self) -> Vec<usize> {
        let mut d = self.spectators.clone();
        for (x, a) in self.agents.iter().enumerate() {
            let acted = match &self.scheme {
                Scheme::General { leaders, followers, .. } => {
                    matches!(followers, Followers::Channels { .. }) && self.agents.len() > 1 || leaders.contains(&x)
                }
                _ => true,
            };
            d.push(if acted { a.dim_out } else { a.dim_in });
        }
        d
    }

    fn parts_per_node(&self) -> usize {
        match &self.scheme {
            Scheme::General { outcomes, followers: Followers::Channels { .. }, .. } => 1 + outcomes * (self.agents.len() - 1),
            _ => 1,
        }
    }

    fn round_base(&self, round: usize) -> usize {
        match &self.scheme {
            Scheme::General { outcomes, .. } => (0..round).map(|k| outcomes.pow(k as u32)).sum::<usize>() * self.parts_per_node(),
            _ => 0,
        }
    }

    pub(crate) fn leader_part(&self, round: usize, prefix: &[usize]) -> usize {
        let s = self.stage_outcomes(round);
        let idx = prefix.iter().fold(0, |acc, &j| acc * s + j);
        self.round_base(round) + idx * self.parts_per_node()
    }

    pub(crate) fn follower_part(&self, round: usize, prefix: &[usize], outcome: usize, agent: usize, leader: usize) -> usize {
        let rank = if agent < leader { agent } else { agent - 1 };
        self.leader_part(round, prefix) + 1 + outcome * (self.agents.len() - 1) + rank
    }

    /// Deterministic enumeration of the Stiefel factors.
    pub fn layout(&self) -> Vec<PartInfo> {
        let mut parts = Vec::new();
        match &self.scheme {
            Scheme::General { leaders, outcomes, kraus_order, followers } => {
                let mut prefixes: Vec<Vec<usize>> = vec![vec![]];
                for (round, &leader) in leaders.iter().enumerate() {
                    for prefix in &prefixes {
                        let spec = InstrumentSpec {
                            outcomes: *outcomes,
                            kraus_order: *kraus_order,
                            dim_in: self.general_dim_before(leader, round),
                            dim_out: self.agents[leader].dim_out,
                        };
                        parts.push(PartInfo { role: PartRole::Leader { round, prefix: prefix.clone(), agent: leader }, spec });
                        if let Followers::Channels { kraus_orders } = followers {
                            for j in 0..*outcomes {
                                for agent in (0..self.agents.len()).filter(|&a| a != leader) {
                                    let mut p = prefix.clone();
                                    p.push(j);
                                    let spec = InstrumentSpec {
                                        outcomes: 1,
                                        kraus_order: kraus_orders[round],
                                        dim_in: self.general_dim_before(agent, round),
                                        dim_out: self.agents[agent].dim_out,
                                    };
                                    parts.push(PartInfo { role: PartRole::Follower { round, prefix: p, agent }, spec });
                                }
                            }
                        }
                    }
                    prefixes = prefixes
                        .iter()
                        .flat_map(|p| {
                            (0..*outcomes).map(move |j| {
                                let mut q = p.clone();
                                q.push(j);
                                q
                            })
                        })
                        .collect();
                }
            }
            Scheme::Ips { outcomes, kraus_order } => {
                for (agent, a) in self.agents.iter().enumerate() {
                    let spec = InstrumentSpec { outcomes: *outcomes, kraus_order: *kraus_order, dim_in: a.dim_in, dim_out: a.dim_out };
                    parts.push(PartInfo { role: PartRole::Instrument { agent }, spec });
                }
            }
            Scheme::Cmps { kraus_order, .. } => {
                for (agent, a) in self.agents.iter().enumerate() {
                    let spec = InstrumentSpec { outcomes: 1, kraus_order: *kraus_order, dim_in: a.dim_in, dim_out: a.dim_out };
                    parts.push(PartInfo { role: PartRole::Channel { agent }, spec });
                }
            }
        }
        parts
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layout().iter().map(|p| p.shape()).collect()
    }

    pub fn check_point(&self, point: &ProductPoint) -> Result<()> {
        let shapes = self.shapes();
        if point.shapes() != shapes {
            return Err(Error::Layout(format!("point shapes {:?} vs protocol layout {:?}", point.shapes(), shapes)));
        }
        Ok(())
    }

    pub fn check_input(&self, rho: &QState) -> Result<()> {
        if rho.dims() != self.input_dims().as_slice() {
            return Err(Error::Dimension(format!("input dims {:?} vs protocol input dims {:?}", rho.dims(), self.input_dims())));
        }
        Ok(())
    }

    /// Point whose outcome-0 first Kraus operator is the identity on every
    /// square part (all other blocks zero).
    pub fn identity_point(&self) -> Result<ProductPoint> {
        let mats = self
            .layout()
            .iter()
            .map(|p| {
                let (n, d) = p.shape();
                if p.spec.dim_in != p.spec.dim_out {
                    return Err(Error::Dimension("identity point needs square local maps".into()));
                }
                let mut x = Mat::zeros(n, d);
                x.view_mut((0, 0), (d, d)).copy_from(&linalg::identity(d));
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()?;
        ProductPoint::from_matrices(mats)
    }

    /// Enumerates every outcome sequence in lexicographic order.
    pub fn apply(&self, point: &ProductPoint, rho: &QState) -> Result<Vec<BranchOutcome>> {
        self.check_point(point)?;
        self.check_input(rho)?;
        let engine = Engine::new(self, point);
        let collector = engine::Collector::default();
        engine.evaluate(rho.data().clone(), &collector, false);
        Ok(collector.into_branches())
    }

    /// Same as [`apply`](Self::apply), restricted to the CMPS scheme.
    pub fn apply_cmps(&self, point: &ProductPoint, rho: &QState) -> Result<Vec<BranchOutcome>> {
        if !matches!(self.scheme, Scheme::Cmps { .. }) {
            return Err(Error::Parameter("apply_cmps requires the CMPS scheme".into()));
        }
        self.apply(point, rho)
    }

    /// Embeds an IPS point into the `LOCC_N` layout: round `k` is led by agent
    /// `k` with the same instrument for every prefix; followers are identity
    /// channels.
    pub fn ips_as_general(&self, point: &ProductPoint) -> Result<(LoccProtocol, ProductPoint)> {
        let Scheme::Ips { outcomes, kraus_order } = self.scheme else {
            return Err(Error::Parameter("ips_as_general requires the IPS scheme".into()));
        };
        self.check_point(point)?;
        if self.agents.iter().any(|a| a.dim_in != a.dim_out) {
            return Err(Error::Dimension("embedding needs square local maps".into()));
        }
        let n = self.agents.len();
        let general = LoccProtocol::new(
            self.agents.clone(),
            self.spectators.clone(),
            Scheme::General {
                leaders: (0..n).collect(),
                outcomes,
                kraus_order,
                followers: Followers::Channels { kraus_orders: vec![1; n] },
            },
        )?;
        let mats = general
            .layout()
            .iter()
            .map(|p| match &p.role {
                PartRole::Leader { agent, .. } => point.part(*agent).matrix().clone(),
                _ => linalg::identity(p.spec.dim_in),
            })
            .collect();
        Ok((general, ProductPoint::from_matrices(mats)?))
    }

    /// Folds each CMPS channel and its measurement into one instrument:
    /// `K_{o,i} = P_o K_i`.
    pub fn cmps_as_ips(&self, point: &ProductPoint) -> Result<(LoccProtocol, ProductPoint)> {
        let Scheme::Cmps { kraus_order, povms } = &self.scheme else {
            return Err(Error::Parameter("cmps_as_ips requires the CMPS scheme".into()));
        };
        self.check_point(point)?;
        let s = povms[0].outcomes();
        if povms.iter().any(|p| p.outcomes() != s) {
            return Err(Error::Parameter("IPS needs a uniform instrument order".into()));
        }
        let ips = LoccProtocol::ips(self.agents.clone(), self.spectators.clone(), s, *kraus_order)?;
        let mut mats = Vec::new();
        for (agent, povm) in povms.iter().enumerate() {
            let kraus = split_blocks(point.part(agent).matrix(), self.agents[agent].dim_out);
            let mut blocks = Vec::new();
            for o in 0..s {
                let proj = povm.projector(o);
                for k in &kraus {
                    blocks.push(&proj * k);
                }
            }
            let refs: Vec<&Mat> = blocks.iter().collect();
            mats.push(stack_rows(&refs));
        }
        Ok((ips, ProductPoint::from_matrices(mats)?))
    }
}

/// Unitary remixing of the Kraus operators inside every branch of every part:
/// `K_{j,i} → Σ_l u_{il} K_{j,l}`.
pub fn remix_kraus(protocol: &LoccProtocol, point: &ProductPoint, unitaries: &[Mat]) -> Result<ProductPoint> {
    let layout = protocol.layout();
    if unitaries.len() != layout.len() {
        return Err(Error::Layout("one unitary per part required".into()));
    }
    let mats = layout
        .iter()
        .zip(point.parts())
        .zip(unitaries)
        .map(|((info, x), u)| {
            let t = info.spec.kraus_order;
            let kraus = split_blocks(x.matrix(), info.spec.dim_out);
            let mut out = Vec::new();
            for branch in kraus.chunks(t) {
                for i in 0..t {
                    let mut acc = Mat::zeros(info.spec.dim_out, info.spec.dim_in);
                    for (l, k) in branch.iter().enumerate() {
                        acc += k * u[(i, l)];
                    }
                    out.push(acc);
                }
            }
            let refs: Vec<&Mat> = out.iter().collect();
            stack_rows(&refs)
        })
        .collect();
    ProductPoint::from_matrices(mats)
}

#[cfg(test)]
mod tests;
