mod common;

use common::{apply_to_last_three, oracle_branches, oracle_input, spectral_propagator};
use wfusion::cavity::magic_time;
use wfusion::linalg::embed_operator;
use wfusion::protocol::{fuse, Protocol};

fn compare(protocol: Protocol, sizes: &[usize], lambda_t: f64) {
    let report = fuse(protocol, sizes, lambda_t).unwrap();
    let oracle = oracle_branches(sizes, lambda_t);
    assert_eq!(report.branches.len(), oracle.len());
    for (ours, theirs) in report.branches.iter().zip(&oracle) {
        assert_eq!(ours.outcome.to_string(), theirs.outcome);
        assert!(
            (ours.probability - theirs.probability).abs() < 1e-10,
            "{protocol} {sizes:?} {}: {} vs {}",
            theirs.outcome,
            ours.probability,
            theirs.probability
        );
        match (&ours.residual, &theirs.residual) {
            (Some(r), Some(full)) => {
                let expanded = r.expand_to_full().unwrap();
                assert_eq!(expanded.layout(), full.layout());
                let diff = expanded.state().max_abs_diff(full.state());
                assert!(diff < 1e-10, "{protocol} {sizes:?} {}: residual differs by {diff}", theirs.outcome);
            }
            (None, None) => {}
            (Some(_), None) if theirs.probability < 1e-20 => {}
            (None, Some(_)) if ours.probability < 1e-20 => {}
            _ => panic!("{protocol} {sizes:?} {}: residual presence differs", theirs.outcome),
        }
    }
}

#[test]
fn two_fusion_matches_state_vector_oracle() {
    for n in 2..=4 {
        for m in 2..=4 {
            for lt in [magic_time(), 0.37, 1.9] {
                compare(Protocol::TwoFusion, &[n, m], lt);
            }
        }
    }
}

#[test]
fn three_fusion_matches_state_vector_oracle() {
    for n in 2..=4 {
        for m in 2..=4 {
            for t in 2..=4 {
                for lt in [magic_time(), 0.81] {
                    compare(Protocol::ThreeFusion, &[n, m, t], lt);
                }
            }
        }
    }
}

#[test]
fn direct_application_agrees_with_embedded_operator() {
    let input = oracle_input(&[3, 4]);
    let q = input.qubit_count();
    let u = spectral_propagator(0.6);
    let embedded = embed_operator(&u, &[q - 3, q - 2, q - 1], q).unwrap();
    let a = input.apply(&embedded).unwrap();
    let b = apply_to_last_three(&u, &input);
    assert!(a.state().max_abs_diff(b.state()) < 1e-14);
}
