mod common;

use common::{element, m2};
use num_complex::Complex64 as C64;
use opspace_core::assembly::BlockAssembly;
use opspace_core::certify::certify_unitary;
use opspace_core::solver::{Objective, FD_STEP};
use opspace_core::sysdetect::detect_operator_system;
use opspace_core::{BoundSide, Element, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_gradient_matches_differences(c in element(4), y in element(4)) {
        let s = m2();
        let mut b = BlockAssembly::new(&s, 2, 2, 1);
        b.add_constant(0, 0, &[C64::new(2.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)], C64::new(1.0, 0.0))
            .add_constant(0, 1, c.coeffs(), C64::new(1.0, 0.0))
            .link(1, 0, 0, C64::new(1.0, 0.0))
            .add_constant(1, 1, c.coeffs(), C64::new(0.0, 1.0));
        let p: Vec<f64> = y.0.iter().flat_map(|z| [z.re, z.im]).collect();
        let e = Objective::evaluate(&b, &p);
        prop_assume!(e.gap > 1e-4);
        for (g, (hi, lo)) in e.gradient.iter().zip(Objective::values_along(&b, &p, FD_STEP)) {
            prop_assert!((g - (hi - lo) / (2.0 * FD_STEP)).abs() <= 1e-5);
        }
    }
}

#[test]
fn reports_state_their_bound_side() {
    let s = m2();
    let cfg = SolverConfig::default();
    let u = Element::basis(4, 0);
    assert_eq!(certify_unitary(&s, &u, 1, &cfg).unwrap().bound, BoundSide::Lower);
    assert_eq!(detect_operator_system(&s, &u, None, &cfg).unwrap().bound, BoundSide::Upper);
}

#[test]
fn same_seed_same_report() {
    let s = m2();
    let cfg = SolverConfig::default().with_seed(42);
    let u = Element::basis(4, 0);
    let a = serde_json::to_string(&detect_operator_system(&s, &u, None, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&detect_operator_system(&s, &u, None, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}
