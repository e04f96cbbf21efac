use std::path::PathBuf;
use std::process::{Command, Output};

use num_complex::Complex64 as C64;
use opspace_cli::{parse_coeffs, ReportFile, SpaceData, SpaceFile};
use opspace_core::funcspace::CATALOG_NAMES;
use proptest::prelude::*;

fn opspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opspace"))
        .args(args)
        .env_remove("OPSPACE_SEED")
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn report(path: &PathBuf) -> ReportFile {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn emit_parse_emit_is_byte_identical() {
    for name in CATALOG_NAMES {
        let first = SpaceFile::from_catalog(name, 24).unwrap().to_json();
        let again = SpaceFile::parse(&first).unwrap().to_json();
        assert_eq!(first, again, "{name}");
    }
    let o = opspace(&["catalog", "emit", "m2-sym3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(SpaceFile::parse(&text).unwrap().to_json(), text);
}

#[test]
fn catalog_list_has_six_names() {
    let o = opspace(&["catalog", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(names, CATALOG_NAMES.iter().map(|s| s.to_string()).collect::<Vec<_>>());
}

#[test]
fn two_circles_emit_has_four_functions_on_720_points() {
    let path = tmp("two-circles.json");
    let o = opspace(&["catalog", "emit", "two-circles", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let f = SpaceFile::read(path.to_str().unwrap()).unwrap();
    match f.space {
        SpaceData::Function { points, basis, .. } => {
            assert_eq!(points, 720);
            assert_eq!(basis.len(), 4);
            assert!(basis.iter().all(|b| b.len() == 720));
        }
        other => panic!("expected a function space, got {other:?}"),
    }
}

#[test]
fn m2_sym3_emit_is_identity_e12_e21() {
    let f = SpaceFile::from_catalog("m2-sym3", 1).unwrap();
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    match f.space {
        SpaceData::Matrix { rows: 2, cols: 2, basis, .. } => {
            assert_eq!(basis, vec![vec![vec![l, o], vec![o, l]], vec![vec![o, l], vec![o, o]], vec![vec![o, o], vec![l, o]]]);
        }
        other => panic!("expected 2x2 matrices, got {other:?}"),
    }
}

#[test]
fn unknown_catalog_name_exits_3() {
    let o = opspace(&["catalog", "emit", "m3-full"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m3-full"));
}

#[test]
fn m2_full_unitary_passes() {
    let o = opspace(&["check", "unitary", "--catalog", "m2-full"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn m2_upper_is_not_a_system_and_e12_is_the_witness() {
    let path = tmp("upper-system.json");
    let o = opspace(&["check", "system", "--catalog", "m2-upper", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&path);
    let w = r.checks[0].witness.as_ref().expect("witness");
    let c = &w.cells[0].0;
    assert!(c[0].norm() < 1e-9 && (c[1].norm() - 1.0).abs() < 1e-9, "{c:?}");
}

#[test]
fn missing_unit_exits_3() {
    let mut f = SpaceFile::from_catalog("m2-full", 1).unwrap();
    f.unit = None;
    let path = tmp("no-unit.json");
    std::fs::write(&path, f.to_json()).unwrap();
    let o = opspace(&["check", "unitary", "--space", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unit"));
}

#[test]
fn malformed_basis_names_the_field() {
    let mut f = SpaceFile::from_catalog("m2-upper", 1).unwrap();
    if let SpaceData::Matrix { basis, .. } = &mut f.space {
        basis[1].pop();
    }
    let err = f.load().unwrap_err().to_string();
    assert!(err.contains("space.matrix.basis[1]"), "{err}");
}

#[test]
fn involution_of_e12_is_e21() {
    let path = tmp("involution.json");
    let o = opspace(&["recover", "involution", "--catalog", "m2-full", "--x", "0,1,0,0", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&path).recovery.unwrap();
    let e21 = [0.0, 0.0, 1.0, 0.0];
    for (c, t) in r.coefficients.iter().zip(e21) {
        assert!((c - C64::new(t, 0.0)).norm() <= 0.011, "{:?}", r.coefficients);
    }
    assert!(!r.escapes);
}

// 2x2 matrices in row-major order.
type M2 = [C64; 4];

fn mul(a: &M2, b: &M2) -> M2 {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

fn adjoint(a: &M2) -> M2 {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

// m2-full basis is I, E12, E21, E22.
fn coeffs(m: &M2) -> Vec<C64> {
    vec![m[0], m[1], m[2], m[3] - m[0]]
}

fn matrix(c: &[C64]) -> M2 {
    [c[0], c[1], c[2], c[0] + c[3]]
}

fn arg(c: &[C64]) -> String {
    serde_json::to_string(c).unwrap()
}

#[test]
fn product_matches_ambient_on_m2_full() {
    let mut rng = 0x5eed_u64;
    let mut next = || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for trial in 0..4 {
        let (a, b, phi) = (C64::new(next(), next()), C64::new(next(), next()), next() * 3.0);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (a, b, e) = (a / n, b / n, C64::from_polar(1.0, phi));
        let v: M2 = [a, b, -b.conj() * e, a.conj() * e];
        let mut y: M2 = [C64::new(next(), next()), C64::new(next(), next()), C64::new(next(), next()), C64::new(next(), next())];
        let f = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        y.iter_mut().for_each(|z| *z /= f);
        let truth = mul(&v, &adjoint(&y));
        let path = tmp(&format!("product-{trial}.json"));
        let o = opspace(&[
            "recover", "product", "--catalog", "m2-full",
            "--v", &arg(&coeffs(&v)), "--y", &arg(&coeffs(&y)), "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        let got = matrix(&report(&path).recovery.unwrap().coefficients);
        let err = got.iter().zip(truth.iter()).map(|(g, t)| (g - t).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 0.011, "trial {trial}: {err}");
    }
}

#[test]
fn circle_product_z_zbar_escapes() {
    let points = 90;
    let path = tmp("escape.json");
    let o = opspace(&[
        "recover", "product", "--catalog", "circle-1zz̄", "--samples", &points.to_string(),
        "--v", "0,1,0", "--y", "0,0,1", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("product escapes X"));
    let r = report(&path).recovery.unwrap();
    assert!(r.escapes && r.ambient.is_none());
    // z^2 is orthogonal to 1, z and zbar over equally spaced points.
    assert!((r.ambient_residual - (points as f64).sqrt()).abs() < 1e-8, "{}", r.ambient_residual);
}

#[test]
fn same_seed_same_report_and_exit_matches_verdict() {
    let run = |name: &str, seed: &str| {
        let path = tmp(name);
        let o = Command::new(env!("CARGO_BIN_EXE_opspace"))
            .args(["check", "system", "--catalog", "m2-sym3", "--out", path.to_str().unwrap()])
            .env("OPSPACE_SEED", seed)
            .output()
            .unwrap();
        (o.status.code().unwrap(), std::fs::read(&path).unwrap())
    };
    let (c1, a) = run("seed.json", "17");
    let (c2, b) = run("seed.json", "17");
    assert_eq!(a, b);
    assert_eq!(c1, c2);
    let r: ReportFile = serde_json::from_slice(&a).unwrap();
    assert_eq!(r.seed, 17);
    assert_eq!(c1, r.verdict.exit_code());
}

#[test]
fn bad_flags_exit_3() {
    assert_eq!(opspace(&["check", "unitary"]).status.code(), Some(3));
    assert_eq!(opspace(&["check", "unitary", "--catalog", "m2-full", "--element", "1,x"]).status.code(), Some(3));
    assert_eq!(opspace(&["check", "order-unit", "--catalog", "m2-upper"]).status.code(), Some(3));
}

proptest! {
    #[test]
    fn coefficient_forms_agree(v in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..8)) {
        let list = v.iter().map(|(r, i)| format!("{r:?}:{i:?}")).collect::<Vec<_>>().join(",");
        let json = serde_json::to_string(&v.iter().map(|&(r, i)| [r, i]).collect::<Vec<_>>()).unwrap();
        let want: Vec<C64> = v.iter().map(|&(r, i)| C64::new(r, i)).collect();
        prop_assert_eq!(parse_coeffs(&list).unwrap(), want.clone());
        prop_assert_eq!(parse_coeffs(&json).unwrap(), want);
    }
}
