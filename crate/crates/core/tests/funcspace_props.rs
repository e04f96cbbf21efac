mod common;

use common::{element, space};
use opspace_core::certify::certify_unitary;
use opspace_core::funcspace::{catalog, g_hermitian_solve, min_opspace, scalar_unitary_check, CATALOG_NAMES};
use opspace_core::{AmplifiedElement, Element, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diagonal_model_norms_are_blockwise_sups(cells in prop::collection::vec(element(3), 4)) {
        let f = catalog("circle-1zz̄", 40).unwrap().as_function().unwrap().clone();
        let s = min_opspace(&f).unwrap();
        let x = AmplifiedElement { level: 2, cells: cells.clone() };
        // pointwise 2x2 matrices of function values
        let vals: Vec<Vec<_>> = cells.iter().map(|c| f.values(c)).collect();
        let mut sup = 0.0f64;
        for w in 0..f.points() {
            let m = opspace_core::matcore::CMat::from_fn(2, 2, |i, j| vals[i * 2 + j][w]);
            sup = sup.max(opspace_core::matcore::spectral_norm(&m).unwrap());
        }
        prop_assert!((s.norm_amplified(&x) - sup).abs() <= 1e-12 * (1.0 + sup));
    }
}

#[test]
fn constants_are_scalar_unitaries() {
    for name in CATALOG_NAMES.iter().filter(|n| n.contains("circle")) {
        let f = catalog(name, 90).unwrap().as_function().unwrap().clone();
        let r = scalar_unitary_check(&f, &Element::basis(f.dim(), 0), 16, 10.0 / 90.0, 5).unwrap();
        assert!(r.verdict.is_pass(), "{name}: {r:?}");
    }
}

#[test]
fn scalar_and_operator_unitary_verdicts_agree() {
    let cfg = SolverConfig { max_level: 1, ..Default::default() };
    for (name, m) in [("circle-1zz̄", 60), ("circle-1z", 60), ("two-circles", 30)] {
        let f = catalog(name, m).unwrap().as_function().unwrap().clone();
        let s = space(name, m);
        for k in 0..f.dim() {
            let g = Element::basis(f.dim(), k);
            if (f.norm(&g) - 1.0).abs() > 1e-12 {
                continue;
            }
            let scalar = scalar_unitary_check(&f, &g, 16, 10.0 / m as f64, 9).unwrap().verdict;
            let op = certify_unitary(&s, &g, 1, &cfg).unwrap().verdict;
            assert_eq!(scalar, op, "{name} basis {k}");
        }
    }
}

#[test]
fn hermitian_dimensions_are_stable_under_refinement() {
    for name in ["circle-1zz̄", "circle-1z", "two-circles"] {
        let dims: Vec<Vec<usize>> = [180, 360]
            .iter()
            .map(|&m| {
                let f = catalog(name, m).unwrap().as_function().unwrap().clone();
                (0..f.dim())
                    .filter_map(|k| g_hermitian_solve(&f, &Element::basis(f.dim(), k)).ok().map(|g| g.real_dim()))
                    .collect()
            })
            .collect();
        assert_eq!(dims[0], dims[1], "{name}");
    }
}
