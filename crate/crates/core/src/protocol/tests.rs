use super::*;
use crate::linalg::{identity, max_abs};
use crate::manifold::random_point;
use crate::state::{max_entangled, tensor};

fn zero_branch_instrument(d: usize) -> Mat {
    let mut x = Mat::zeros(2 * d, d);
    x.view_mut((0, 0), (d, d)).copy_from(&identity(d));
    x
}

fn phi2() -> QState {
    max_entangled(2, 2).unwrap().density()
}

#[test]
fn slicing_gives_identity_and_zero_branches() {
    let spec = InstrumentSpec::new(2, 1, 2, 2).unwrap();
    let x = StiefelPoint::new(zero_branch_instrument(2)).unwrap();
    let inst = instrument_from_point(&x, &spec).unwrap();
    let rho = phi2().regroup(vec![4]).unwrap().into_data();
    let rho2 = Mat::from_fn(2, 2, |r, c| rho[(r, c)] * 2.0);
    let w = inst.branch_weights(&rho2);
    assert!((w[0] - 2.0 * 0.5 * 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    assert!(inst.tp_defect() < 1e-12);
    assert_eq!(inst.to_matrix(), *x.matrix());
}

#[test]
fn unitary_channel_round_trip() {
    let spec = InstrumentSpec::channel(1, 3, 3).unwrap();
    let x = random_point(3, 3, 4).unwrap();
    let inst = instrument_from_point(&x, &spec).unwrap();
    assert_eq!(inst.branches().len(), 1);
    assert!(inst.tp_defect() < 1e-12);
    assert_eq!(inst.to_matrix(), *x.matrix());
    let bad = InstrumentSpec::channel(2, 3, 3).unwrap();
    assert!(instrument_from_point(&x, &bad).is_err());
}

#[test]
fn layout_shapes() {
    let ips = LoccProtocol::ips(vec![AgentSpace::square(4); 2], vec![], 2, 1).unwrap();
    assert_eq!(ips.shapes(), vec![(8, 4), (8, 4)]);
    let povm = Povm::computational(vec![2, 2], vec![1]).unwrap();
    let cmps = LoccProtocol::cmps(vec![AgentSpace::square(4); 2], vec![], 4, vec![povm.clone(), povm]).unwrap();
    assert_eq!(cmps.shapes(), vec![(16, 4), (16, 4)]);
    let l1 = LoccProtocol::locc_r(2, 4, 1, 2, 1, Followers::Channels { kraus_orders: vec![1] }).unwrap();
    assert_eq!(l1.shapes(), vec![(8, 4), (4, 4), (4, 4)]);
    let l2 = LoccProtocol::locc_r(2, 4, 2, 2, 1, Followers::Channels { kraus_orders: vec![1, 1] }).unwrap();
    assert_eq!(l2.shapes().len(), 3 + 2 * 3);
    for (i, part) in l2.layout().iter().enumerate() {
        match &part.role {
            PartRole::Leader { round, prefix, .. } => assert_eq!(l2.leader_part(*round, prefix), i),
            PartRole::Follower { round, prefix, agent } => {
                let (head, j) = prefix.split_at(prefix.len() - 1);
                let leader = round % 2;
                assert_eq!(l2.follower_part(*round, head, j[0], *agent, leader), i);
            }
            _ => unreachable!(),
        }
    }
}

#[test]
fn identity_protocol_is_transparent() {
    let rho = tensor(&phi2(), &phi2());
    let rho = crate::state::permute_subsystems(&rho, &[0, 2, 1, 3]).unwrap().regroup(vec![4, 4]).unwrap();
    let l2 = LoccProtocol::locc_r(2, 4, 2, 2, 1, Followers::Channels { kraus_orders: vec![1, 1] }).unwrap();
    let branches = l2.apply(&l2.identity_point().unwrap(), &rho).unwrap();
    assert_eq!(branches.len(), 4);
    assert_eq!(branches[0].outcomes, vec![0, 0]);
    assert!(max_abs(&(branches[0].state.data() - rho.data())) < 1e-12);
    assert!(branches[1..].iter().all(|b| b.weight.abs() < 1e-12));
}

#[test]
fn ips_zero_branch_selects_first_outcome() {
    let ips = LoccProtocol::ips(vec![AgentSpace::square(2); 2], vec![], 2, 1).unwrap();
    let x = zero_branch_instrument(2);
    let point = ProductPoint::from_matrices(vec![x.clone(), x]).unwrap();
    let b = ips.apply(&point, &phi2()).unwrap();
    let w: Vec<f64> = b.iter().map(|b| b.weight).collect();
    assert!((w[0] - 1.0).abs() < 1e-12 && w[1..].iter().all(|w| w.abs() < 1e-12));
}

#[test]
fn weights_sum_to_one_for_random_points() {
    let rho = tensor(&phi2(), &phi2());
    let rho = crate::state::permute_subsystems(&rho, &[0, 2, 1, 3]).unwrap().regroup(vec![4, 4]).unwrap();
    let l2 = LoccProtocol::locc_r(2, 4, 2, 2, 2, Followers::Channels { kraus_orders: vec![2, 1] }).unwrap();
    for seed in 0..3 {
        let point = ProductPoint::random(&l2.shapes(), seed).unwrap();
        let branches = l2.apply(&point, &rho).unwrap();
        let total: f64 = branches.iter().map(|b| b.weight).sum();
        assert!((total - 1.0).abs() < 1e-8);
        for b in &branches {
            assert!(crate::linalg::min_eigenvalue(b.state.data()) > -1e-9);
        }
    }
}

#[test]
fn cmps_examples() {
    let povm = Povm::computational(vec![2], vec![0]).unwrap();
    let cmps = LoccProtocol::cmps(vec![AgentSpace::square(2); 2], vec![], 1, vec![povm.clone(), povm.clone()]).unwrap();
    let id = cmps.identity_point().unwrap();
    let zero = QState::basis(vec![2, 2], 0);
    let b = cmps.apply_cmps(&id, &zero).unwrap();
    assert!((b[0].weight - 1.0).abs() < 1e-12);

    let one_measured =
        LoccProtocol::cmps(vec![AgentSpace::square(2); 2], vec![], 1, vec![povm, Povm::computational(vec![2], vec![]).unwrap()]).unwrap();
    let b = one_measured.apply_cmps(&one_measured.identity_point().unwrap(), &phi2()).unwrap();
    assert_eq!(b.len(), 2);
    assert!((b[0].weight - 0.5).abs() < 1e-12);

    let point = ProductPoint::random(&cmps.shapes(), 9).unwrap();
    let u = kron(point.part(0).matrix(), point.part(1).matrix());
    let out = &u * phi2().data() * u.adjoint();
    let b = cmps.apply_cmps(&point, &phi2()).unwrap();
    for (o, br) in b.iter().enumerate() {
        assert!((br.weight - out[(o, o)].re).abs() < 1e-12);
    }
}

use crate::linalg::kron;

#[test]
fn ips_embeds_into_general() {
    let rho = QState::new(
        {
            let a = crate::manifold::random_point(16, 16, 3).unwrap().into_matrix();
            let d = Mat::from_diagonal(&crate::linalg::CVec::from_fn(16, |i, _| c((i + 1) as f64 / 136.0, 0.0)));
            &a * d * a.adjoint()
        },
        vec![4, 4],
    )
    .unwrap();
    let ips = LoccProtocol::ips(vec![AgentSpace::square(4); 2], vec![], 2, 2).unwrap();
    let point = ProductPoint::random(&ips.shapes(), 5).unwrap();
    let (general, gpoint) = ips.ips_as_general(&point).unwrap();
    let a = ips.apply(&point, &rho).unwrap();
    let b = general.apply(&gpoint, &rho).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.outcomes, y.outcomes);
        assert!(max_abs(&(x.state.data() - y.state.data())) < 1e-10);
    }
}

#[test]
fn cmps_folds_into_ips() {
    let povm = Povm::computational(vec![2, 2], vec![1]).unwrap();
    let cmps = LoccProtocol::cmps(vec![AgentSpace::square(4); 2], vec![], 2, vec![povm.clone(), povm]).unwrap();
    let point = ProductPoint::random(&cmps.shapes(), 11).unwrap();
    let (ips, ipoint) = cmps.cmps_as_ips(&point).unwrap();
    let rho = QState::maximally_mixed(vec![4, 4]);
    let a = cmps.apply(&point, &rho).unwrap();
    let b = ips.apply(&ipoint, &rho).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(max_abs(&(x.state.data() - y.state.data())) < 1e-10);
    }
}

#[test]
fn document_round_trip() {
    let l1 = LoccProtocol::locc_r(2, 2, 1, 2, 2, Followers::Channels { kraus_orders: vec![1] }).unwrap();
    let point = ProductPoint::random(&l1.shapes(), 2).unwrap();
    let doc = ProtocolDocument::new(&l1, &point).unwrap().with_metadata("value", serde_json::json!(0.5));
    let text = doc.to_json().unwrap();
    let (p2, x2) = ProtocolDocument::from_json(&text).unwrap().restore().unwrap();
    assert_eq!(p2, l1);
    for (a, b) in point.parts().iter().zip(x2.parts()) {
        assert_eq!(a.matrix(), b.matrix());
    }
    assert!(ProtocolDocument::from_json(&text.replace("loccforge-protocol", "other")).is_err());
}

#[test]
fn layout_mismatch_is_rejected() {
    let ips = LoccProtocol::ips(vec![AgentSpace::square(2); 2], vec![], 2, 1).unwrap();
    let wrong = ProductPoint::random(&[(4, 2)], 0).unwrap();
    assert!(matches!(ips.apply(&wrong, &phi2()), Err(Error::Layout(_))));
    let rho = QState::maximally_mixed(vec![4]);
    let point = ProductPoint::random(&ips.shapes(), 0).unwrap();
    assert!(matches!(ips.apply(&point, &rho), Err(Error::Dimension(_))));
}
