mod common;

use common::{element, m2, space};
use num_complex::Complex64 as C64;
use opspace_core::sysdetect::detect_operator_system;
use opspace_core::tro::{ambient_system_check, generate_tro, involution};
use opspace_core::{make_space, Element, SolverConfig};
use proptest::prelude::*;

#[test]
fn regeneration_is_idempotent() {
    for name in ["m2-full", "m2-upper", "m2-sym3"] {
        let s = space(name, 1);
        let z = generate_tro(&s).unwrap();
        let again = make_space(z.z_basis(), None).unwrap();
        assert_eq!(generate_tro(&again).unwrap().dim(), z.dim(), "{name}");
    }
    let s = space("circle-1z", 24);
    let z = generate_tro(&s).unwrap();
    let again = make_space(z.z_basis(), None).unwrap();
    assert_eq!(generate_tro(&again).unwrap().dim(), z.dim());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn involution_is_conjugate_linear_isometric_of_period_two(x in element(4), y in element(4), a in (-2.0f64..2.0, -2.0f64..2.0)) {
        let s = m2();
        let z = generate_tro(&s).unwrap();
        let u = Element::basis(4, 0);
        let iota = |e: &Element| s.membership(&involution(&z, &u, e).unwrap()).unwrap().coeffs;
        let a = C64::new(a.0, a.1);
        let lhs = iota(&x.scale(a).add(&y));
        let rhs = iota(&x).scale(a.conj()).add(&iota(&y));
        prop_assert!(lhs.coeff_distance(&rhs) <= 1e-10);
        prop_assert!((s.norm(&iota(&x)) - s.norm(&x)).abs() <= 1e-10);
        prop_assert!(s.norm(&iota(&iota(&x)).sub(&x)) <= 1e-8);
    }
}

#[test]
fn ambient_pass_implies_intrinsic_pass() {
    let cfg = SolverConfig::default();
    for (name, m) in [("m2-full", 1), ("m2-upper", 1), ("m2-sym3", 1), ("circle-1zz̄", 48), ("circle-1z", 48)] {
        let s = space(name, m);
        let u = s.unit().unwrap().clone();
        let z = generate_tro(&s).unwrap();
        if ambient_system_check(&z, &u).unwrap().verdict.is_pass() {
            let r = detect_operator_system(&s, &u, None, &cfg).unwrap();
            assert!(r.verdict.is_pass(), "{name}: {r:?}");
        }
    }
}
