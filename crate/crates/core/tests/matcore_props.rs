mod common;

use common::{complex, matrix};
use opspace_core::matcore::{block2x2, spectral_norm, CMat};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_absolutely_homogeneous(m in matrix(4, 4), a in complex()) {
        let lhs = spectral_norm(&(&m * a)).unwrap();
        prop_assert!((lhs - a.norm() * spectral_norm(&m).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn adjoint_preserves_norm(m in matrix(4, 3)) {
        prop_assert!((spectral_norm(&m.adjoint()).unwrap() - spectral_norm(&m).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn cstar_identity(m in matrix(4, 4)) {
        let n = spectral_norm(&m).unwrap();
        prop_assert!((n * n - spectral_norm(&(&m.adjoint() * &m)).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn block_diagonal_norm_is_max(a in matrix(2, 3), d in matrix(3, 2)) {
        let b = block2x2(&a, &CMat::zeros(2, 2), &CMat::zeros(3, 3), &d).unwrap();
        let want = spectral_norm(&a).unwrap().max(spectral_norm(&d).unwrap());
        prop_assert!((spectral_norm(&b).unwrap() - want).abs() <= 1e-12);
    }
}
