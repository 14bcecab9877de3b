use std::cell::RefCell;
use std::ops::Range;

use super::{split_blocks, stack_rows, BranchOutcome, Followers, LoccProtocol, Scheme};
use crate::linalg::{self, c, Mat};
use crate::manifold::ProductPoint;
use crate::state::QState;

/// Value of one leaf and, if requested, `∂g/∂σ` as a Hermitian matrix.
pub(crate) struct LeafValue {
    pub value: f64,
    pub sensitivity: Option<Mat>,
}

impl LeafValue {
    pub fn zero() -> Self {
        Self { value: 0.0, sensitivity: None }
    }
}

/// An objective that decomposes as a sum over outcome sequences of a function
/// of the unnormalized branch state.
pub(crate) trait BranchFunctional {
    /// False prunes every branch starting with `prefix`.
    fn relevant(&self, _prefix: &[usize]) -> bool {
        true
    }

    fn leaf(&self, outcomes: &[usize], state: &Mat, dims: &[usize], want_sensitivity: bool) -> LeafValue;
}

#[derive(Default)]
pub(crate) struct Collector {
    branches: RefCell<Vec<BranchOutcome>>,
}

impl Collector {
    pub fn into_branches(self) -> Vec<BranchOutcome> {
        self.branches.into_inner()
    }
}

impl BranchFunctional for Collector {
    fn leaf(&self, outcomes: &[usize], state: &Mat, dims: &[usize], _: bool) -> LeafValue {
        let st = QState::from_parts(state.clone(), dims.to_vec());
        let weight = st.trace();
        self.branches.borrow_mut().push(BranchOutcome { outcomes: outcomes.to_vec(), state: st, weight });
        LeafValue::zero()
    }
}

enum OpKraus {
    Part { part: usize, range: Range<usize> },
    Projector { agent: usize, outcome: usize },
}

struct LocalOp {
    slot: usize,
    kraus: OpKraus,
}

struct Stage {
    pre: Vec<LocalOp>,
    branches: Vec<Vec<LocalOp>>,
}

pub(crate) struct Engine<'a> {
    protocol: &'a LoccProtocol,
    blocks: Vec<Vec<Mat>>,
    projectors: Vec<Vec<Mat>>,
}

impl<'a> Engine<'a> {
    /// The point must already match the protocol layout.
    pub fn new(protocol: &'a LoccProtocol, point: &ProductPoint) -> Self {
        let blocks = protocol.layout().iter().zip(point.parts()).map(|(info, x)| split_blocks(x.matrix(), info.spec.dim_out)).collect();
        let projectors = match protocol.scheme() {
            Scheme::Cmps { povms, .. } => povms.iter().map(|p| (0..p.outcomes()).map(|o| p.projector(o)).collect()).collect(),
            _ => Vec::new(),
        };
        Self { protocol, blocks, projectors }
    }

    fn kraus(&self, op: &LocalOp) -> &[Mat] {
        match &op.kraus {
            OpKraus::Part { part, range } => &self.blocks[*part][range.clone()],
            OpKraus::Projector { agent, outcome } => std::slice::from_ref(&self.projectors[*agent][*outcome]),
        }
    }

    fn stage(&self, depth: usize, prefix: &[usize]) -> Stage {
        let p = self.protocol;
        match p.scheme() {
            Scheme::General { leaders, outcomes, kraus_order, followers } => {
                let leader = leaders[depth];
                let part = p.leader_part(depth, prefix);
                let branches = (0..*outcomes)
                    .map(|j| {
                        let mut ops = vec![LocalOp {
                            slot: p.slot(leader),
                            kraus: OpKraus::Part { part, range: j * kraus_order..(j + 1) * kraus_order },
                        }];
                        if let Followers::Channels { kraus_orders } = followers {
                            for agent in (0..p.n_agents()).filter(|&a| a != leader) {
                                ops.push(LocalOp {
                                    slot: p.slot(agent),
                                    kraus: OpKraus::Part {
                                        part: p.follower_part(depth, prefix, j, agent, leader),
                                        range: 0..kraus_orders[depth],
                                    },
                                });
                            }
                        }
                        ops
                    })
                    .collect();
                Stage { pre: Vec::new(), branches }
            }
            Scheme::Ips { outcomes, kraus_order } => Stage {
                pre: Vec::new(),
                branches: (0..*outcomes)
                    .map(|j| {
                        vec![LocalOp {
                            slot: p.slot(depth),
                            kraus: OpKraus::Part { part: depth, range: j * kraus_order..(j + 1) * kraus_order },
                        }]
                    })
                    .collect(),
            },
            Scheme::Cmps { kraus_order, povms } => Stage {
                pre: vec![LocalOp { slot: p.slot(depth), kraus: OpKraus::Part { part: depth, range: 0..*kraus_order } }],
                branches: (0..povms[depth].outcomes())
                    .map(|o| vec![LocalOp { slot: p.slot(depth), kraus: OpKraus::Projector { agent: depth, outcome: o } }])
                    .collect(),
            },
        }
    }

    fn forward(&self, op: &LocalOp, rho: &Mat, dims: &[usize]) -> (Mat, Vec<usize>) {
        let kraus = self.kraus(op);
        let out = linalg::hermitian_part(&linalg::apply_kraus(kraus, op.slot, dims, rho));
        let mut d = dims.to_vec();
        d[op.slot] = kraus[0].nrows();
        (out, d)
    }

    fn backward(&self, op: &LocalOp, rho_in: &Mat, dims_in: &[usize], w_out: &Mat, grads: &mut [Vec<Mat>]) -> Mat {
        let kraus = self.kraus(op);
        let mut dims_out = dims_in.to_vec();
        dims_out[op.slot] = kraus[0].nrows();
        if let OpKraus::Part { part, range } = &op.kraus {
            let d_in = dims_in[op.slot];
            for (k, block) in kraus.iter().zip(range.clone()) {
                let a = linalg::apply_left(k, op.slot, dims_in, rho_in);
                let g = linalg::trace_rest(&(w_out * a), op.slot, &dims_out, d_in);
                grads[*part][block] += g * c(2.0, 0.0);
            }
        }
        linalg::hermitian_part(&linalg::apply_kraus_adjoint(kraus, op.slot, &dims_out, w_out))
    }

    /// Total value and, when requested, the per-part ambient gradient.
    pub fn evaluate(&self, rho: Mat, f: &dyn BranchFunctional, want_grad: bool) -> (f64, Option<Vec<Mat>>) {
        let dims = self.protocol.input_dims();
        let mut grads: Vec<Vec<Mat>> = if want_grad {
            self.blocks.iter().map(|bs| bs.iter().map(|b| Mat::zeros(b.nrows(), b.ncols())).collect()).collect()
        } else {
            Vec::new()
        };
        let mut prefix = Vec::with_capacity(self.protocol.depth());
        let leaf = self.visit(0, &mut prefix, rho, dims, f, want_grad, &mut grads);
        let grad = want_grad.then(|| {
            grads
                .iter()
                .map(|bs| {
                    let refs: Vec<&Mat> = bs.iter().collect();
                    stack_rows(&refs)
                })
                .collect()
        });
        (leaf.value, grad)
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &self,
        depth: usize,
        prefix: &mut Vec<usize>,
        rho: Mat,
        dims: Vec<usize>,
        f: &dyn BranchFunctional,
        want_grad: bool,
        grads: &mut Vec<Vec<Mat>>,
    ) -> LeafValue {
        if depth == self.protocol.depth() {
            return f.leaf(prefix, &rho, &dims, want_grad);
        }
        if !f.relevant(prefix) {
            return LeafValue::zero();
        }
        let stage = self.stage(depth, prefix);
        let mut pre_states = vec![(rho, dims)];
        for op in &stage.pre {
            let (r, d) = pre_states.last().unwrap();
            let next = self.forward(op, r, d);
            pre_states.push(next);
        }
        let (mid, mid_dims) = pre_states.pop().unwrap();
        let mut total = 0.0;
        let mut w_mid: Option<Mat> = None;
        for (j, branch) in stage.branches.iter().enumerate() {
            prefix.push(j);
            if !f.relevant(prefix) {
                prefix.pop();
                continue;
            }
            let mut states = vec![(mid.clone(), mid_dims.clone())];
            for op in branch {
                let (r, d) = states.last().unwrap();
                let next = self.forward(op, r, d);
                states.push(next);
            }
            let (out, out_dims) = states.pop().unwrap();
            let child = self.visit(depth + 1, prefix, out, out_dims, f, want_grad, grads);
            prefix.pop();
            total += child.value;
            if let Some(mut w) = child.sensitivity {
                for (op, (r, d)) in branch.iter().zip(&states).rev() {
                    w = self.backward(op, r, d, &w, grads);
                }
                w_mid = Some(match w_mid {
                    Some(acc) => acc + w,
                    None => w,
                });
            }
        }
        let sensitivity = w_mid.map(|mut w| {
            let mut inputs = pre_states;
            for op in stage.pre.iter().rev() {
                let (r, d) = inputs.pop().unwrap();
                w = self.backward(op, &r, &d, &w, grads);
            }
            w
        });
        LeafValue { value: total, sensitivity }
    }
}
