//! Property-based tests for the serialization formats and the small
//! numerical building blocks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use sl_inverse::linalg::solve_truncated_lsq;
use sl_inverse::spectra::{points_from_csv, SpectralPoint, Subspectrum};
use sl_inverse::{BoundaryH, ComplexGrid, ProblemSpec};

fn finite_c() -> impl Strategy<Value = Complex64> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn grid(max_len: usize) -> impl Strategy<Value = ComplexGrid> {
    (0.05..2.0f64, prop::collection::vec(finite_c(), 2..max_len))
        .prop_map(|(len, values)| ComplexGrid::new(len, values).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn problem_spec_json_round_trip(
        a in 0.05..0.95f64,
        q1 in grid(24),
        q2 in grid(24),
        h in finite_c(),
        big_h in prop::option::of(finite_c()),
        a1 in 0.2..5.0f64,
        a2 in finite_c(),
    ) {
        let q1 = ComplexGrid::new(a, q1.values).unwrap();
        let q2 = ComplexGrid::new(1.0 - a, q2.values).unwrap();
        let big_h = big_h.map_or(BoundaryH::Infinity, BoundaryH::Value);
        let spec = ProblemSpec::new(a, q1, q2, h, big_h, a1, a2).unwrap();
        let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(spec.a, back.a);
        prop_assert_eq!(spec.q1.values, back.q1.values);
        prop_assert_eq!(spec.q2.values, back.q2.values);
        prop_assert_eq!(spec.h, back.h);
        prop_assert_eq!(spec.big_h, back.big_h);
        prop_assert_eq!(spec.a1, back.a1);
        prop_assert_eq!(spec.a2, back.a2);
    }

    #[test]
    fn spectrum_csv_round_trip(
        i in 0u8..2,
        lambdas in prop::collection::vec((finite_c(), 1usize..4), 1..30),
    ) {
        let points: Vec<SpectralPoint> = lambdas
            .iter()
            .map(|&(lambda, multiplicity)| SpectralPoint { lambda, multiplicity, i })
            .collect();
        let sub = Subspectrum::new(i, points).unwrap();
        let parsed = points_from_csv(&sub.to_csv()).unwrap();
        let back = Subspectrum::new(i, parsed).unwrap();
        prop_assert_eq!(sub, back);
    }

    #[test]
    fn grid_resample_refinement_is_lossless(g in grid(16), factor in 2usize..5) {
        // piecewise-linear refinement onto a multiple of the segment count
        // changes neither nodal values nor the integral
        let fine = g.resample((g.len() - 1) * factor);
        for (k, v) in g.values.iter().enumerate() {
            prop_assert!((fine.values[k * factor] - v).norm() < 1e-9 * (1.0 + v.norm()));
        }
        let scale = 1.0 + g.integral().norm();
        prop_assert!((fine.integral() - g.integral()).norm() < 1e-9 * scale);
        prop_assert!(g.l2_distance(&fine) < 1e-7 * (1.0 + g.l2_norm()));
    }

    #[test]
    fn grid_eval_stays_in_segment_hull(g in grid(16), s in 0.0..1.0f64) {
        let x = s * g.interval_length;
        let v = g.eval(x);
        let bound = g.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(v.norm() <= bound + 1e-12);
    }

    #[test]
    fn lsq_recovers_well_conditioned_solutions(
        entries in prop::collection::vec(finite_c(), 16),
        x in prop::collection::vec(finite_c(), 4),
    ) {
        // diagonally dominated square system => well-conditioned
        let mut a = DMatrix::from_vec(4, 4, entries);
        for k in 0..4 {
            a[(k, k)] += Complex64::new(500.0, 0.0);
        }
        let x = DVector::from_vec(x);
        let b = &a * &x;
        let sol = solve_truncated_lsq(&a, &b, 1e-12).unwrap();
        prop_assert_eq!(sol.effective_rank, 4);
        prop_assert_eq!(sol.truncated_fraction, 0.0);
        let err = (&sol.x - &x).norm();
        prop_assert!(err < 1e-8 * (1.0 + x.norm()), "recovery error {err}");
    }
}
