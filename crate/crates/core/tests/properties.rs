use proptest::prelude::*;

use riskdesign::ecdf::{quantile, SortedSample};
use riskdesign::problems::interval_cover_problem;
use riskdesign::scenario::{sample_box, PerturbationKind, PerturbationModel, RadiusRule, SeededSampler};
use riskdesign::uq::{reliability, robustness};

fn sample() -> impl Strategy<Value = SortedSample> {
    prop::collection::vec(-100.0f64..100.0, 1..40).prop_map(|v| SortedSample::from_unsorted(v).unwrap())
}

proptest! {
    #[test]
    fn ecdf_is_monotone_and_bounded(s in sample(), a in -120.0f64..120.0, b in -120.0f64..120.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (fa, fb) = (s.eval(lo), s.eval(hi));
        prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fb));
        prop_assert!(fa <= fb);
    }

    #[test]
    fn inverse_undoes_eval(s in sample(), t in 0.0f64..=1.0) {
        prop_assume!(s.len() > 1);
        let z = s.first() + t * (s.last() - s.first());
        let back = s.inverse(s.eval(z)).unwrap();
        prop_assert!((back - z).abs() <= 1e-9 * (1.0 + z.abs()));
    }

    #[test]
    fn quantile_is_monotone(v in prop::collection::vec(-10.0f64..10.0, 1..30), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let qa = quantile(&mut v.clone(), lo).unwrap();
        let qb = quantile(&mut v.clone(), hi).unwrap();
        prop_assert!(qa <= qb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stricter_gamma_never_lowers_failure(theta in 0.5f64..4.0, seed in 0u64..1000, g1 in 0.5f64..1.0, g2 in 0.5f64..1.0) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let problem = interval_cover_problem(0.0, 10.0);
        let test = sample_box(&[0.0], &[4.0], 200, &mut SeededSampler::new(seed, 0));
        let model = PerturbationModel::new(PerturbationKind::BallVolume, RadiusRule::Constant { radius: 0.3 });
        let sampler = SeededSampler::new(seed, 1);
        let a = robustness(&problem, &[theta], &test, &model, 40, lo, &sampler, 0.95).unwrap();
        let b = robustness(&problem, &[theta], &test, &model, 40, hi, &sampler, 0.95).unwrap();
        prop_assert!(a.p <= b.p);
        let nominal = reliability(&problem, &[theta], &test, 0.95).unwrap();
        prop_assert!(nominal.p <= b.p);
        for e in [a, b, nominal] {
            prop_assert!(e.lo <= e.p && e.p <= e.hi);
        }
    }
}
