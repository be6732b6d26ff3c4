use std::f64::consts::PI;

use proptest::prelude::*;
use warplab::warp::{build_theorem_a, build_theorem_a_with, eval_theorem_b, phi, Warp, WarpTable, PHI_SCALE};

/// Closed form of φ via integration by parts:
/// ∫₀ˣ arctan(u³)/u² du = -arctan(x³)/x + (3/2)∫₀^{x²} dv/(1+v³).
fn phi_closed_form(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let v = x * x;
    let s3 = 3f64.sqrt();
    let antiderivative =
        ((v + 1.0).powi(2) / (v * v - v + 1.0)).ln() / 6.0 + (((2.0 * v - 1.0) / s3).atan() + PI / 6.0) / s3;
    PHI_SCALE * (-(x * x * x).atan() / x + 1.5 * antiderivative)
}

#[test]
fn phi_matches_closed_form() {
    for &x in &[0.01, 0.3, 1.0, 1.7, 5.0, 40.0, 1000.0] {
        let got = phi(x, 1e-13).unwrap();
        let want = phi_closed_form(x);
        assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
    }
}

#[test]
fn phi_small_argument_is_quadratic() {
    for &x in &[1e-5, 1e-4, 1e-3] {
        let approx = 3f64.sqrt() / (2.0 * PI) * x * x;
        let got = phi(x, 1e-18).unwrap();
        assert!(((got - approx) / approx).abs() <= 1e-4, "x={x}");
    }
}

#[test]
fn phi_tail_bound() {
    let x = 1000.0;
    let defect = 1.0 - phi(x, 1e-12).unwrap();
    assert!(defect > 0.0);
    // arctan ≤ π/2 bounds the missing tail by (√3/2)/x
    assert!(defect <= (3f64.sqrt() / 2.0) / x);
    assert!(defect <= 1e-3);
}

#[test]
fn theorem_a_boundary_and_monotonicity() {
    let table = build_theorem_a(100.0, 1e-10).unwrap();
    let s0 = table.sample(0.0).unwrap();
    assert!(s0.f.abs() <= 1e-10 && (s0.df - 1.0).abs() <= 1e-10 && s0.d2f.abs() <= 1e-10);
    assert!(s0.h > 0.0 && s0.dh.abs() <= 1e-10);
    let mut prev = s0;
    let mut r = 0.05;
    while r <= 100.0 {
        let s = table.sample(r).unwrap();
        assert!(s.f < r && s.f > prev.f, "f at r={r}");
        assert!(s.df > 0.0 && s.df < 1.0);
        assert!(s.d2f < 0.0 && s.dh < 0.0);
        assert!(s.h < prev.h, "h not decreasing at r={r}");
        prev = s;
        r += 0.05;
    }
    assert!(table.sample(100.0).unwrap().h < table.sample(1.0).unwrap().h);
}

#[test]
fn theorem_a_half_step_reintegration_agrees() {
    let tol = 1e-10;
    let a = build_theorem_a(20.0, tol).unwrap();
    let b = build_theorem_a_with(20.0, tol, 0.005).unwrap();
    for &r in &[0.5, 2.0, 7.3, 19.0] {
        let (sa, sb) = (a.sample(r).unwrap(), b.sample(r).unwrap());
        assert!((sa.f - sb.f).abs() <= 10.0 * tol, "r={r}");
        assert!((sa.h - sb.h).abs() <= 10.0 * tol, "r={r}");
    }
}

#[test]
fn theorem_a_inverse_quadrature_oracle() {
    // r(f) = ∫₀^f dF / sqrt(1 - φ(F)) independently of the ODE solver.
    let table = build_theorem_a(50.0, 1e-10).unwrap();
    for &r in &[1.0, 10.0, 50.0] {
        let f = table.sample(r).unwrap().f;
        let n = 4000;
        let mut acc = 0.0;
        // midpoint rule in F = f·sin(θ)² style is unnecessary: integrand is smooth
        for i in 0..n {
            let lo = f * i as f64 / n as f64;
            let hi = f * (i + 1) as f64 / n as f64;
            // two-point Gauss per panel
            let c = 0.5 * (lo + hi);
            let d = 0.5 * (hi - lo) / 3f64.sqrt();
            for x in [c - d, c + d] {
                acc += 0.5 * (hi - lo) / (1.0 - phi_closed_form(x)).sqrt();
            }
        }
        assert!((acc - r).abs() < 1e-8 * (1.0 + r), "r={r}: {acc}");
    }
}

#[test]
fn phi_consistency_along_table() {
    let tol = 1e-10;
    let table = build_theorem_a(1000.0, tol).unwrap();
    for r in table.radii().step_by(25) {
        let (f, p) = table.f_and_p(r).unwrap();
        assert!((p - phi(f, 1e-13).unwrap()).abs() <= 10.0 * tol, "r={r}");
    }
}

fn central(g: impl Fn(f64) -> f64, r: f64, step: f64) -> f64 {
    (g(r + step) - g(r - step)) / (2.0 * step)
}

fn assert_rel(a: f64, b: f64, rel: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1e-12);
    assert!((a - b).abs() <= rel * scale, "{what}: {a} vs {b}");
}

#[test]
fn derivative_consistency_by_finite_differences() {
    let step = 1e-5;
    let warps = [
        Warp::theorem_a(200.0, 1e-10).unwrap(),
        Warp::theorem_b(),
        Warp::flat(0.7).unwrap(),
    ];
    for w in &warps {
        for &r in &[0.1, 0.4, 1.0, 3.0, 10.0, 50.0, 150.0] {
            let s = w.sample(r).unwrap();
            let at = |x: f64| w.sample(x).unwrap();
            assert_rel(central(|x| at(x).f, r, step), s.df, 1e-5, "f'");
            assert_rel(central(|x| at(x).df, r, step), s.d2f, 1e-5, "f''");
            if s.dh != 0.0 {
                assert_rel(central(|x| at(x).h, r, step), s.dh, 1e-5, "h'");
                assert_rel(central(|x| at(x).dh, r, step), s.d2h, 1e-5, "h''");
            }
            if let Some(d3f) = s.d3f {
                if d3f != 0.0 {
                    assert_rel(central(|x| at(x).d2f, r, step), d3f, 1e-5, "f'''");
                }
            }
        }
    }
}

#[test]
fn theorem_b_reference_values() {
    let s = eval_theorem_b(1.0).unwrap();
    assert!((s.f - (2f64.ln() / 3f64.ln()).sqrt()).abs() < 1e-15);
    assert!((s.f - 0.79431).abs() < 1e-5);
    let mut r = 0.1;
    while r <= 100.0 + 1e-9 {
        let s = eval_theorem_b(r).unwrap();
        assert!(s.dh < 0.0, "h' at {r}");
        assert!(s.df > 0.0 && s.df < 1.0 && s.d2f < 0.0, "f at {r}");
        r += 0.1;
    }
}

#[test]
fn flat_family_and_even_extension() {
    let w = Warp::flat(0.3).unwrap();
    for &r in &[0.0, 1.0, 17.0] {
        let s = w.sample(r).unwrap();
        assert_eq!((s.f, s.df, s.d2f, s.h, s.dh, s.d2h), (r, 1.0, 0.0, 0.3, 0.0, 0.0));
    }
    let b = Warp::theorem_b();
    for &r in &[0.2, 1.0, 9.5] {
        let (p, m) = (b.fiber(r).unwrap(), b.fiber(-r).unwrap());
        assert_eq!(p.h, m.h);
        assert_eq!(p.dh, -m.dh);
        assert_eq!(p.d2h, m.d2h);
    }
}

#[test]
fn table_artifact_round_trip() {
    let table = build_theorem_a(30.0, 1e-10).unwrap();
    let mut buf = Vec::new();
    table.write_to(&mut buf).unwrap();
    let back = WarpTable::read_from(buf.as_slice()).unwrap();
    assert_eq!(back, table);
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# warplab-warp-table v1"));
    let broken = text.replace("rows = ", "rows = 1");
    assert!(WarpTable::read_from(broken.as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_evaluation_is_deterministic_and_monotone(r1 in 0.0f64..100.0, r2 in 0.0f64..100.0) {
        let table = shared_table();
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let (a, b) = (table.sample(lo).unwrap(), table.sample(hi).unwrap());
        prop_assert_eq!(a, table.sample(lo).unwrap());
        if hi > lo {
            prop_assert!(b.f > a.f);
            prop_assert!(b.h < a.h);
        }
    }
}

fn shared_table() -> &'static WarpTable {
    use std::sync::OnceLock;
    static TABLE: OnceLock<WarpTable> = OnceLock::new();
    TABLE.get_or_init(|| build_theorem_a(100.0, 1e-10).unwrap())
}
