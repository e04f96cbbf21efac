use opspace_core::certify::certify_unitary;
use opspace_core::cstar::detect_cstar;
use opspace_core::funcspace::{catalog, catalog_entry, g_hermitian_solve, scalar_unitary_check, CATALOG_NAMES};
use opspace_core::sysdetect::detect_operator_system;
use opspace_core::tro::generate_tro;
use opspace_core::{SolverConfig, Verdict};

#[test]
fn catalog_verdicts_match_the_entries() {
    let cfg = SolverConfig::default();
    let m = 60;
    for name in CATALOG_NAMES {
        let c = catalog(name, m).unwrap();
        let s = c.to_opspace().unwrap();
        let u = s.unit().unwrap().clone();
        for (check, want) in catalog_entry(name, m).unwrap().expected {
            let got = match check.as_str() {
                "unitary" => certify_unitary(&s, &u, cfg.max_level, &cfg).unwrap().verdict,
                "system" => detect_operator_system(&s, &u, Some(&generate_tro(&s).unwrap()), &cfg).unwrap().verdict,
                "cstar" => detect_cstar(&s, &u, &cfg).unwrap().report.verdict,
                "function-unitary" => {
                    let f = c.as_function().unwrap();
                    scalar_unitary_check(f, &u, 16, 10.0 / m as f64, cfg.seed).unwrap().verdict
                }
                "function-system" => Verdict::from_bool(g_hermitian_solve(c.as_function().unwrap(), &u).unwrap().function_system),
                other => panic!("unknown check {other}"),
            };
            assert_eq!(got, want, "{name} {check}");
        }
    }
}

#[test]
fn unknown_names_and_empty_samples_are_rejected() {
    assert!(catalog("m3-full", 10).is_err());
    assert!(catalog("circle-1z", 0).is_err());
    assert_eq!(catalog("circle-1zzbar", 8).unwrap().to_opspace().unwrap().dim(), 3);
}
