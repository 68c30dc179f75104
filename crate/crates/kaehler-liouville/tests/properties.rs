mod common;

use std::f64::consts::PI;

use kaehler_liouville::block::{metric_and_integrals, BlockGeometry, BlockSeed};
use kaehler_liouville::constants::{dual_involution, validate_compatibility};
use kaehler_liouville::exact::{fmt_q, parse_q, Q};
use kaehler_liouville::fan::{build_fan, build_lattice, verify_fan};
use kaehler_liouville::flow::{FlowModel, Mode, PhaseState};
use kaehler_liouville::invariants::cell_counts;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn geometry(row: &[f64]) -> BlockGeometry {
    BlockGeometry::build(&BlockSeed::cos2(row.to_vec(), PI).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rationals_print_and_parse(n in -10_000i64..10_000, d in 1i64..10_000) {
        let x = Q::new(BigInt::from(n), BigInt::from(d));
        prop_assert_eq!(parse_q(&fmt_q(&x)), Some(x));
    }

    #[test]
    fn random_bundles_give_smooth_complete_fans(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = random_forest(&mut r, 4, 5);
        let (bundle, _) = random_bundle(&p, &mut r);
        prop_assert!(validate_compatibility(&p, &bundle).ok());
        let lat = build_lattice(&p, &bundle).unwrap();
        prop_assert!(lat.relations_hold());
        let fan = build_fan(&lat);
        prop_assert!(verify_fan(&lat, &fan, seed).ok());
        let cells = cell_counts(&p);
        prop_assert_eq!(cells.counts.iter().sum::<usize>(), fan.cones.len());
        prop_assert_eq!(cells.counts.first().copied(), Some(1));
        prop_assert_eq!(cells.counts.last().copied(), Some(1));
    }

    #[test]
    fn orientation_flip_is_an_involution(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = random_forest(&mut r, 4, 6);
        let (bundle, m) = random_bundle(&p, &mut r);
        for b in 0..p.len() {
            let f = dual_involution(&p, &bundle, b);
            prop_assert_eq!(&dual_involution(&p, &f, b), &bundle);
            prop_assert!(validate_compatibility(&p, &f).ok());
            for &a in p.children(b) {
                let mut rev = m[a].clone().unwrap();
                rev.reverse();
                prop_assert_eq!(f.m_rows(&p)[a].clone(), Some(rev));
            }
        }
    }

    #[test]
    fn profiles_are_even_and_periodic(seed in any::<u64>(), n in 1usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = geometry(&random_f64_row(n, 0.05, &mut r));
        for nu in 1..=n {
            let period = g.periods()[nu - 1];
            let x = rand::Rng::gen_range(&mut r, -period..period);
            let v = g.profile(nu, x).h;
            prop_assert!((g.profile(nu, -x).h - v).abs() < 1e-12);
            prop_assert!((g.profile(nu, x + period).h - v).abs() < 1e-10);
        }
    }

    #[test]
    fn metric_is_fold_invariant(seed in any::<u64>(), n in 2usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = geometry(&random_f64_row(n, 0.05, &mut r));
        let fold = g.fold_group();
        let x: Vec<f64> = g.periods().iter().map(|p| rand::Rng::gen_range(&mut r, 0.0..*p)).collect();
        let Ok(base) = metric_and_integrals(&g, &x) else { return Ok(()) };
        prop_assert!(base.g.iter().all(|v| *v > 0.0));
        for e in fold.elements() {
            let y = fold.apply(e, &x);
            let m = metric_and_integrals(&g, &y).unwrap();
            for (a, b) in m.g.iter().zip(&base.g) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn integrals_agree_and_real_mode_has_no_centrifugal_term(seed in any::<u64>(), n in 2usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let model = FlowModel::new(geometry(&random_f64_row(n, 0.1, &mut r)));
        let s = model.random_state(Mode::Complex, &mut r);
        let direct = model.first_integrals(&s);
        let inverse = model.first_integrals_by_inverse(&s);
        for (a, b) in direct.iter().zip(&inverse) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
        prop_assert!((direct[n - 1] - 2.0 * model.hamiltonian(&s)).abs() <= 1e-12 * direct[n - 1].abs().max(1.0));
        let real = PhaseState { j: vec![0.0; n], ..s };
        prop_assert!(model.point(&real.x, &real.j).q.iter().all(|q| *q == 0.0));
    }
}
