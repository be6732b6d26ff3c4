use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use proptest::prelude::*;
use warplab::cover::{
    deck, distance, distance_axis, distance_axis_to_point, grid_distance_oracle, shooting_refine, DistanceMethod,
    StripPoint,
};
use warplab::warp::Warp;
use warplab::Error;

const TOL: f64 = 1e-9;

fn theorem_a() -> &'static Warp {
    static W: OnceLock<Warp> = OnceLock::new();
    W.get_or_init(|| Warp::theorem_a(4000.0, 1e-10).unwrap())
}

fn families() -> [Warp; 2] {
    [Warp::theorem_b(), theorem_a().clone()]
}

#[test]
fn orbit_distance_from_itself_is_zero() {
    for w in families() {
        let r = distance_axis(&w, 0, TOL).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.lower_bound, 0.0);
    }
}

#[test]
fn l_zero_gives_the_radial_distance() {
    for w in families() {
        for t in [0.5, 10.0, 1000.0] {
            let r = distance_axis_to_point(&w, 0, t, TOL).unwrap();
            assert_eq!(r.value, t);
        }
    }
}

#[test]
fn theorem_b_orbit_one_is_shorter_than_the_axis_circle() {
    let r = distance_axis(&Warp::theorem_b(), 1, TOL).unwrap();
    assert!(r.value <= 2.0 * PI / LN_2);
    assert!(r.value <= 9.0647);
    assert!(r.lower_bound <= r.value && r.value <= r.upper_bound);
    assert!(r.lower_bound >= 2.0 * r.geodesic.unwrap().r_star.unwrap());
}

#[test]
fn theorem_b_point_at_hundred_lies_in_the_sandwich() {
    let r = distance_axis_to_point(&Warp::theorem_b(), 1, 100.0, TOL).unwrap();
    let upper = 100.0 + 2.0 * PI / 10002f64.ln();
    assert!((upper - 100.6822).abs() < 1e-4);
    assert!(r.value >= 100.0 && r.value <= upper, "{}", r.value);
    assert!(!r.degraded);
}

#[test]
fn point_distances_satisfy_the_sandwich() {
    for w in families() {
        for t in [10.0, 100.0, 1000.0] {
            let h = w.h(t).unwrap();
            for l in 1..=8 {
                let r = distance_axis_to_point(&w, l, t, TOL).unwrap();
                let upper = t + 2.0 * PI * l as f64 * h;
                assert!(
                    r.value >= t && r.value <= upper,
                    "{} t={t} l={l}: {}",
                    w.family(),
                    r.value
                );
                assert!(r.lower_bound >= t && r.upper_bound <= upper);
                assert!(r.lower_bound <= r.value && r.value <= r.upper_bound);
            }
        }
    }
}

#[test]
fn point_queries_resolve_a_geodesic() {
    for w in families() {
        for t in [0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0] {
            for l in 1..=12 {
                let r = distance_axis_to_point(&w, l, t, TOL).unwrap();
                assert!(!r.degraded, "{} t={t} l={l}: {:?}", w.family(), r.failed_branches);
            }
        }
    }
}

#[test]
fn arrival_turning_just_beyond_the_target_is_found() {
    // the minimiser turns at r* = t + O(1e-6): the direct branch and the
    // first returning branch meet there
    let w = theorem_a();
    let r = distance_axis_to_point(w, 7, 10.0, TOL).unwrap();
    let g = r.geodesic.unwrap();
    assert!(g.r_star.unwrap() - 10.0 < 1e-4);
    let shot = shooting_refine(w, 10.0, 14.0 * PI, &r, 1e-10).unwrap();
    assert!((shot.value - r.value).abs() < 1e-7);
}

#[test]
fn excess_over_the_radius_does_not_grow_with_the_radius() {
    for w in families() {
        for l in [1, 3, 8] {
            let excess: Vec<f64> = [10.0, 100.0, 1000.0]
                .iter()
                .map(|&t| distance_axis_to_point(&w, l, t, TOL).unwrap().value - t)
                .collect();
            assert!(
                excess[1] <= excess[0] + 1e-8 && excess[2] <= excess[1] + 1e-8,
                "{excess:?}"
            );
        }
    }
}

#[test]
fn orbit_distances_are_subadditive() {
    let w = Warp::theorem_b();
    let big: Vec<f64> = (0..=32).map(|l| distance_axis(&w, l, TOL).unwrap().value).collect();
    for a in 1..=16 {
        for b in 1..=16 {
            assert!(
                big[a + b] <= big[a] + big[b] + 2.0 * TOL,
                "L({}) > L({a}) + L({b})",
                a + b
            );
        }
    }
    // and strictly increasing
    assert!(big.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn distances_are_deck_invariant_and_reflection_symmetric() {
    for w in families() {
        for (t, y) in [(0.0, 5.0), (3.0, 2.0), (40.0, 13.0)] {
            let q = StripPoint::new(t, y).unwrap();
            let d0 = distance(&w, StripPoint::BASE, q, TOL).unwrap().value;
            for l in [-3, 1, 7] {
                let d = distance(&w, deck(StripPoint::BASE, l), deck(q, l), TOL).unwrap().value;
                assert!((d - d0).abs() < 1e-8, "{} ({t},{y}) l={l}: {d} vs {d0}", w.family());
            }
            let mirrored = distance(&w, StripPoint::BASE, StripPoint::new(t, -y).unwrap(), TOL).unwrap();
            assert!((mirrored.value - d0).abs() < 1e-8);
            let swapped = distance(&w, q, StripPoint::BASE, TOL).unwrap();
            assert!((swapped.value - d0).abs() < 1e-8);
        }
    }
}

#[test]
fn winning_geodesics_turn_where_the_fiber_equals_j() {
    for w in families() {
        let mut results = Vec::new();
        for l in [1, 2, 5] {
            results.push(distance_axis(&w, l, TOL).unwrap());
            results.push(distance_axis_to_point(&w, l, 1.0, TOL).unwrap());
        }
        for r in results {
            let g = r.geodesic.unwrap();
            if let Some(rs) = g.r_star.filter(|&rs| rs > 0.0) {
                assert!((w.h(rs).unwrap() - g.j.abs()).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn shooting_reproduces_the_quadrature_solution() {
    for w in families() {
        for (t, l) in [(0.0, 1), (0.0, 4), (1.0, 1), (10.0, 3), (100.0, 2)] {
            let seed = distance_axis_to_point(&w, l, t, TOL).unwrap();
            if seed.method != DistanceMethod::QuadratureBvp {
                continue;
            }
            let shot = shooting_refine(&w, t, 2.0 * PI * l as f64, &seed, 1e-10).unwrap();
            assert_eq!(shot.method, DistanceMethod::ShootingBvp);
            assert!((shot.value - seed.value).abs() < 1e-7, "{} t={t} l={l}", w.family());
        }
    }
}

#[test]
fn grid_oracle_agrees_with_the_orbit_distances() {
    let w = Warp::theorem_b();
    for l in [1, 2, 4] {
        let exact = distance_axis(&w, l, TOL).unwrap().value;
        let grid = grid_distance_oracle(&w, StripPoint::BASE, StripPoint::orbit(l), exact / 200.0).unwrap();
        assert!(((grid - exact) / exact).abs() <= 0.02, "l={l}: grid {grid} vs {exact}");
    }
}

#[test]
fn grid_oracle_agrees_off_the_axis() {
    let w = theorem_a();
    let exact = distance_axis_to_point(w, 2, 5.0, TOL).unwrap().value;
    let grid = grid_distance_oracle(
        w,
        StripPoint::BASE,
        StripPoint::new(5.0, 4.0 * PI).unwrap(),
        exact / 200.0,
    )
    .unwrap();
    assert!(((grid - exact) / exact).abs() <= 0.02, "grid {grid} vs {exact}");
}

#[test]
fn grid_oracle_on_the_flat_strip_is_euclidean() {
    let w = Warp::flat(1.0).unwrap();
    for (r, y) in [(0.0, 7.0), (1.0, 0.3), (2.0, 1.1), (0.5, 3.0), (3.0, 3.0)] {
        let exact = f64::hypot(r, y);
        let grid = grid_distance_oracle(&w, StripPoint::BASE, StripPoint::new(r, y).unwrap(), exact / 200.0).unwrap();
        assert!(grid >= exact * (1.0 - 1e-12), "({r},{y}) {grid}");
        assert!((grid - exact) / exact <= 0.02, "({r},{y}) {grid}");
        let solved = distance(&w, StripPoint::BASE, StripPoint::new(r, y).unwrap(), TOL)
            .unwrap()
            .value;
        assert!((solved - exact).abs() < 1e-8);
    }
}

#[test]
fn grid_refinement_does_not_increase_the_estimate() {
    let w = Warp::theorem_b();
    let target = StripPoint::orbit(1);
    let coarse = grid_distance_oracle(&w, StripPoint::BASE, target, 0.08).unwrap();
    let fine = grid_distance_oracle(&w, StripPoint::BASE, target, 0.04).unwrap();
    assert!(fine <= coarse + 1e-3 * coarse, "{fine} vs {coarse}");
}

#[test]
fn generic_off_axis_queries_are_rejected() {
    let w = Warp::theorem_b();
    let a = StripPoint::new(1.0, 0.0).unwrap();
    let b = StripPoint::new(2.0, 1.0).unwrap();
    assert!(matches!(distance(&w, a, b, TOL), Err(Error::Unsupported(_))));
    assert!(StripPoint::new(-1.0, 0.0).is_err());
    assert!(distance_axis_to_point(&w, 1, -1.0, TOL).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn deck_is_a_group_action(r in 0.0f64..50.0, y in -50.0f64..50.0, a in -20i64..20, b in -20i64..20) {
        let p = StripPoint::new(r, y).unwrap();
        let lhs = deck(deck(p, a), b);
        let rhs = deck(p, a + b);
        prop_assert_eq!(lhs.r, rhs.r);
        prop_assert!((lhs.y - rhs.y).abs() < 1e-12);
        prop_assert_eq!(deck(p, 0), p);
    }

    #[test]
    fn random_point_distances_lie_in_the_sandwich(t in 0.05f64..200.0, l in 1i64..6) {
        let w = Warp::theorem_b();
        let r = distance_axis_to_point(&w, l, t, TOL).unwrap();
        let upper = t + 2.0 * PI * l as f64 * w.h(t).unwrap();
        prop_assert!(r.value >= t && r.value <= upper);
        prop_assert!(r.lower_bound <= r.value && r.value <= r.upper_bound);
    }
}
