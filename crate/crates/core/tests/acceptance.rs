//! Acceptance run: one PASS/FAIL line per criterion.

use num_complex::Complex64 as C64;
use opspace_core::certify::{certify_unitary, defect_at, Direction};
use opspace_core::cstar::{detect_cstar, recover_product};
use opspace_core::funcspace::{catalog, g_hermitian_solve, scalar_unitary_check, selfadjoint_unit_check, SampledFunctionSpace};
use opspace_core::hermit::delta_span;
use opspace_core::matcore::{spectral_norm, CMat};
use opspace_core::order::{cone_equals_delta_plus, norm_order_unit_check, psd_fixture_cone, DEFAULT_CONE_SAMPLES};
use opspace_core::sysdetect::{detect_operator_system, recover_involution, recovery_bound, t1_insufficiency_probe};
use opspace_core::tro::{generate_tro, same_involution_check};
use opspace_core::{make_space, ConcreteOpSpace, Element, SolverConfig, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::time::Instant;

const ROOT_SEED: u64 = 0x0a11_5eed;
const TRIALS: usize = 20;

type Sink = Vec<String>;

fn keep(sink: &mut Sink, label: &str, value: &impl Serialize) {
    sink.push(format!("{label}: {}", serde_json::to_string(value).expect("serializable")));
}

fn rng(criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ROOT_SEED ^ (criterion << 32))
}

fn cfg(criterion: u64) -> SolverConfig {
    SolverConfig::default().with_seed(ROOT_SEED.wrapping_add(criterion))
}

fn m2() -> ConcreteOpSpace {
    catalog("m2-full", 1).unwrap().to_opspace().unwrap()
}

/// Coefficients of a 2×2 matrix in the basis `I, E12, E21, E22`.
fn coeffs(m: &CMat) -> Element {
    Element(vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)] - m[(0, 0)]])
}

fn gauss(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.sample(StandardNormal), r.sample(StandardNormal))
}

/// `e^{iφ} [[α, −β̄], [β, ᾱ]]` with `(α, β)` uniform on the 3-sphere.
fn random_unitary(r: &mut ChaCha8Rng) -> CMat {
    let (a, b) = (gauss(r), gauss(r));
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    let ph = C64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU));
    CMat::from_fn(2, 2, |i, j| ph * [[a, -b.conj()], [b, a.conj()]][i][j])
}

fn random_matrix(r: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(2, 2, |_, _| gauss(r))
}

fn random_ball(r: &mut ChaCha8Rng) -> CMat {
    let m = random_matrix(r);
    let radius: f64 = r.random_range(0.0..1.0);
    m.scale_real(radius.sqrt() / spectral_norm(&m).unwrap())
}

fn dist(s: &ConcreteOpSpace, a: &Element, b: &Element) -> f64 {
    s.norm(&a.sub(b))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn c1(sink: &mut Sink) -> Outcome {
    let s = m2();
    let c = cfg(1);
    let mut r = rng(1);
    let mut units = vec![CMat::identity(2)];
    units.extend((0..TRIALS).map(|_| random_unitary(&mut r)));
    let mut worst = 0.0f64;
    let mut ok = true;
    for u in &units {
        let rep = certify_unitary(&s, &coeffs(u), 2, &c).unwrap();
        let levels: Vec<_> = [1, 2].iter().flat_map(|n| [format!("row-defect-n{n}"), format!("column-defect-n{n}")]).collect();
        for name in &levels {
            let v = rep.part(name).map(|p| p.value).unwrap_or(f64::INFINITY);
            worst = worst.max(v);
        }
        ok &= rep.verdict.is_pass();
        keep(sink, "c1", &rep);
    }
    ok &= worst <= 1e-6;
    // diag(1, 1/2) = I − E22 / 2
    let d = Element(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]);
    let rep = certify_unitary(&s, &d, 2, &c).unwrap();
    let witnessed = rep
        .parts
        .iter()
        .filter_map(|p| {
            let dir = if p.check.starts_with("row") { Direction::Row } else { Direction::Column };
            p.witness.as_ref().map(|w| defect_at(&s, &d, w, dir))
        })
        .fold(0.0f64, f64::max);
    keep(sink, "c1", &rep);
    let fail_ok = rep.verdict == Verdict::Fail && witnessed >= 0.75 - 1e-4;
    Outcome {
        pass: ok && fail_ok,
        detail: format!("worst unitary defect {worst:.2e}; diag(1,1/2) {} with witnessed defect {witnessed:.6}", rep.verdict),
    }
}

fn c2(sink: &mut Sink) -> Outcome {
    let s = m2();
    let c = cfg(2);
    let mut r = rng(2);
    let u = Element::basis(4, 0);
    let mut worst = 0.0f64;
    for _ in 0..TRIALS {
        let m = random_matrix(&mut r);
        let h = (&m + &m.adjoint()).scale_real(0.5);
        let h = h.scale_real(r.random_range(0.0..1.0) / spectral_norm(&h).unwrap());
        let x = coeffs(&h);
        let nx = s.norm(&x);
        for &t in &c.t_grid {
            let lhs = s.norm(&u.add(&x.scale(C64::new(0.0, t)))).powi(2);
            worst = worst.max((lhs - (1.0 + t * t * nx * nx)).abs());
        }
    }
    keep(sink, "c2", &worst);
    Outcome { pass: worst <= 1e-8, detail: format!("worst deviation {worst:.2e}") }
}

fn c3(sink: &mut Sink) -> Outcome {
    let s = m2();
    let c = cfg(3);
    let mut r = rng(3);
    let u = Element::basis(4, 0);
    let bound = recovery_bound(100.0, 1e-4);
    let (mut worst, mut improved, mut ok) = (0.0f64, 0usize, true);
    for _ in 0..TRIALS {
        let x = random_ball(&mut r);
        let target = coeffs(&x.adjoint());
        let x = coeffs(&x);
        let far = recover_involution(&s, &u, &x, 100.0, &c).unwrap();
        let near = recover_involution(&s, &u, &x, 10.0, &c).unwrap();
        let (e100, e10) = (dist(&s, &far.element, &target), dist(&s, &near.element, &target));
        worst = worst.max(e100);
        ok &= e100 <= bound;
        improved += usize::from(e100 < e10);
        keep(sink, "c3", &(far, near));
    }
    Outcome {
        pass: ok && improved >= 18,
        detail: format!("worst error at t=100 {worst:.5} (bound {bound:.5}); improved over t=10 in {improved}/{TRIALS}"),
    }
}

fn c4(sink: &mut Sink) -> Outcome {
    let s = m2();
    let c = cfg(4);
    let mut r = rng(4);
    let u = Element::basis(4, 0);
    let mut worst = 0.0f64;
    for _ in 0..TRIALS {
        let v = random_unitary(&mut r);
        let y = random_ball(&mut r);
        let truth = coeffs(&(&v * &y.adjoint()));
        let rec = recover_product(&s, &u, &coeffs(&v), &coeffs(&y), 100.0, &c).unwrap();
        worst = worst.max(dist(&s, &rec.element, &truth));
        keep(sink, "c4", &rec);
    }
    let det = detect_cstar(&s, &u, &c).unwrap();
    keep(sink, "c4", &det.report);
    let Some(st) = det.structure else {
        return Outcome { pass: false, detail: format!("no product table: {}", det.report.verdict) };
    };
    keep(sink, "c4", &st.table);
    let mut entry = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let (bi, bj) = (Element::basis(4, i), Element::basis(4, j));
            let got = s.embed(&st.product(&bi, &bj));
            let want = &s.embed(&bi) * &s.embed(&bj);
            entry = entry.max(got.as_slice().iter().zip(want.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        }
    }
    let val = st.validate(TRIALS, c.seed, 1e-3);
    let assoc = val.part("associativity").map(|p| p.value).unwrap_or(f64::INFINITY);
    let cstar = val.part("cstar-identity").map(|p| p.value).unwrap_or(f64::INFINITY);
    keep(sink, "c4", &val);
    Outcome {
        pass: worst <= 0.0101 + 1e-4 && entry <= 1e-3 && assoc <= 1e-3 && cstar <= 1e-3,
        detail: format!("worst product error {worst:.5}; table entry error {entry:.2e}; associativity {assoc:.2e}; C*-identity {cstar:.2e}"),
    }
}

fn c5(sink: &mut Sink) -> Outcome {
    let fixture: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/upper_delta.json")).expect("fixture parses");
    let delta = fixture["delta"].as_f64().unwrap();
    let points = fixture["points"].as_u64().unwrap();
    let c = cfg(5);
    let mut ok = points >= 10_000 && delta > 0.0;
    let mut detail = Vec::new();
    for (name, want) in [("m2-full", Verdict::Pass), ("m2-sym3", Verdict::Pass), ("m2-upper", Verdict::Fail)] {
        let s = catalog(name, 1).unwrap().to_opspace().unwrap();
        let u = s.unit().unwrap().clone();
        let closure = generate_tro(&s).unwrap();
        let rep = detect_operator_system(&s, &u, Some(&closure), &c).unwrap();
        let amb = rep.part("ambient-system").map(|p| p.verdict);
        ok &= rep.verdict == want && amb == Some(rep.verdict);
        ok &= if want == Verdict::Pass { rep.value <= 1e-4 } else { rep.value >= delta };
        detail.push(format!("{name} {} ({:.2e})", rep.verdict, rep.value));
        keep(sink, "c5", &rep);
    }
    Outcome { pass: ok, detail: format!("{}; delta {delta:.4} from {points} grid points", detail.join(", ")) }
}

fn circle(m: usize) -> SampledFunctionSpace {
    catalog("circle-1zz̄", m).unwrap().as_function().unwrap().clone()
}

fn c6(sink: &mut Sink) -> Outcome {
    let seed = cfg(6).seed;
    let f = circle(360);
    let (one, z) = (Element::basis(3, 0), Element::basis(3, 1));
    let mut ok = true;
    let mut sups = Vec::new();
    for g in [&one, &z] {
        let rep = scalar_unitary_check(&f, g, 32, 10.0 / 360.0, seed).unwrap();
        ok &= rep.verdict.is_pass();
        sups.push(rep.value);
        keep(sink, "c6", &rep);
    }
    let mut dims = Vec::new();
    for m in [360, 720] {
        let f = circle(m);
        let d = (g_hermitian_solve(&f, &one).unwrap(), g_hermitian_solve(&f, &z).unwrap());
        dims.push((d.0.real_dim(), d.1.real_dim()));
        keep(sink, "c6", &d);
    }
    ok &= dims == [(3, 1), (3, 1)];
    Outcome { pass: ok, detail: format!("sup deviations {:.2e} and {:.2e}; real dims (g=1, g=z) at 360/720: {dims:?}", sups[0], sups[1]) }
}

fn c7(sink: &mut Sink) -> Outcome {
    let s = catalog("circle-1z", 360).unwrap().to_opspace().unwrap();
    let c = cfg(7);
    let rep = t1_insufficiency_probe(&s, &Element::basis(2, 0), &Element::basis(2, 1), &c).unwrap();
    let one = rep.part("t=1").unwrap();
    let grid = rep.part("t-grid").unwrap();
    keep(sink, "c7", &rep);
    Outcome {
        pass: one.value <= 1e-3 && grid.verdict == Verdict::Fail,
        detail: format!("t=1 residual {:.4} ({}); full grid {} ({:.4})", one.value, one.verdict, grid.verdict, grid.value),
    }
}

fn c8(sink: &mut Sink) -> Outcome {
    let c = cfg(8);
    let f = catalog("two-circles", 360).unwrap().as_function().unwrap().clone();
    let s = catalog("two-circles", 360).unwrap().to_opspace().unwrap();
    let (one, g) = (Element::basis(4, 0), Element::basis(4, 1));
    let cert = certify_unitary(&s, &g, 2, &c).unwrap();
    let real = f.values(&g).iter().all(|w| w.im == 0.0 && w.re.abs() == 1.0);
    let sa = selfadjoint_unit_check(&f, &g, 1e-9).unwrap();
    let closure = generate_tro(&s).unwrap();
    let same = same_involution_check(&closure, &one, &g).unwrap();
    keep(sink, "c8", &(&cert, &sa, &same));
    Outcome {
        pass: cert.verdict.is_pass() && real && sa.verdict.is_pass() && same.verdict.is_pass() && f.points() == 720,
        detail: format!(
            "unitary {} ({:.1e}); real-valued {real}; selfadjoint unit {}; same involution {}",
            cert.verdict, cert.value, sa.verdict, same.verdict
        ),
    }
}

fn c9(sink: &mut Sink) -> Outcome {
    let s = catalog("m2-sym3", 1).unwrap().to_opspace().unwrap();
    let z = generate_tro(&s).unwrap();
    let again = make_space(z.z_basis(), None).unwrap();
    let z2 = generate_tro(&again).unwrap();
    let res = z.ternary_residual().max(z2.ternary_residual());
    keep(sink, "c9", &(z.dim(), z2.dim(), res));
    Outcome {
        pass: z.dim() == 4 && z2.dim() == 4 && res <= 1e-8,
        detail: format!("dim {} in {} rounds; regenerated dim {}; ternary residual {res:.1e}", z.dim(), z.rounds(), z2.dim()),
    }
}

fn c10(sink: &mut Sink) -> Outcome {
    let s = m2();
    let c = cfg(10);
    let u = Element::basis(4, 0);
    let closure = generate_tro(&s).unwrap();
    let basis = delta_span(&s, &u, Some(&closure), &c).unwrap().real_basis;
    let cone = psd_fixture_cone();
    let unit = norm_order_unit_check(&s, &cone, &u, &basis, DEFAULT_CONE_SAMPLES, c.seed).unwrap();
    let eq = cone_equals_delta_plus(&closure, &cone, &u, DEFAULT_CONE_SAMPLES, &c).unwrap();
    let dropped = cone_equals_delta_plus(&closure, &cone.without(1), &u, DEFAULT_CONE_SAMPLES, &c).unwrap();
    let witness = dropped.part("positive-in-cone").map(|p| p.value).unwrap_or(0.0);
    keep(sink, "c10", &(&unit, &eq, &dropped));
    Outcome {
        pass: unit.verdict.is_pass() && eq.verdict.is_pass() && dropped.verdict == Verdict::Fail && witness >= 0.1,
        detail: format!(
            "norm-order unit {} ({:.3}); cone = positive {} ({:.3}); without E22 {} with witness residual {witness:.4}",
            unit.verdict, unit.value, eq.verdict, eq.value, dropped.verdict
        ),
    }
}

type Criterion = fn(&mut Sink) -> Outcome;

const CRITERIA: [(&str, Criterion); 10] = [
    ("unitary certificate", c1),
    ("hermitian equality", c2),
    ("involution recovery", c3),
    ("product recovery", c4),
    ("system detection", c5),
    ("function spaces", c6),
    ("t = 1 insufficiency", c7),
    ("two circles", c8),
    ("TRO closure", c9),
    ("order", c10),
];

fn line(k: usize, name: &str, o: &Outcome, secs: f64) {
    println!("criterion {k:>2} {:<4} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    let mut first: Sink = Vec::new();
    let mut failed = 0;
    for (k, (name, f)) in CRITERIA.iter().enumerate() {
        let t0 = Instant::now();
        let o = f(&mut first);
        line(k + 1, name, &o, t0.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    let t0 = Instant::now();
    let mut second: Sink = Vec::new();
    for (_, f) in CRITERIA.iter() {
        f(&mut second);
    }
    let differing = first.iter().zip(&second).filter(|(a, b)| a != b).count() + first.len().abs_diff(second.len());
    let o = Outcome {
        pass: differing == 0 && !first.is_empty(),
        detail: format!("{} serialized reports, {differing} differ on rerun", first.len()),
    };
    line(11, "determinism", &o, t0.elapsed().as_secs_f64());
    failed += usize::from(!o.pass);
    println!("acceptance: {} of 11 criteria pass", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
