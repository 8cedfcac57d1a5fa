use proptest::prelude::*;

use abcx::cli::output::sig9;
use abcx::gld::{omega, upsilon, DecodingMetric};
use abcx::metrics::chernoff_distance;
use abcx::opt::SolverConfig;
use abcx::prob::{
    conditional_mutual_info, mutual_info, row_divergence, Alphabet, Axis, ChannelModel, EnsembleSpec, JointPmf,
    RatePair,
};
use abcx::rc;

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter("not all zero", |w| w.iter().sum::<f64>() > 1e-6)
}

fn binary_axes(axes: &[Axis]) -> Vec<Alphabet> {
    axes.iter().map(|&a| Alphabet::new(a, 2)).collect()
}

fn crossover() -> impl Strategy<Value = f64> {
    (2u32..=30).prop_map(|k| k as f64 / 100.0)
}

fn metric() -> impl Strategy<Value = DecodingMetric> {
    prop_oneof![
        Just(DecodingMetric::Likelihood),
        (1u32..=20).prop_map(|b| DecodingMetric::TemperedLikelihood { beta: b as f64 / 10.0 }),
        (1u32..=20).prop_map(|b| DecodingMetric::MutualInfo { beta: b as f64 / 10.0 }),
    ]
}

fn ensemble() -> EnsembleSpec {
    EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.8, 0.2], vec![0.25, 0.75]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn information_is_nonnegative(w in weights(8)) {
        let q = JointPmf::normalized(binary_axes(&[Axis::X, Axis::Y, Axis::Z]), w).unwrap();
        prop_assert!(mutual_info(&q, &[Axis::X], &[Axis::Y, Axis::Z]).unwrap() >= -1e-12);
        prop_assert!(conditional_mutual_info(&q, &[Axis::X], &[Axis::Y], &[Axis::Z]).unwrap() >= -1e-12);
        // Conditioning on a function of the pair cannot exceed the joint information.
        let joint = mutual_info(&q, &[Axis::X], &[Axis::Y, Axis::Z]).unwrap();
        prop_assert!(mutual_info(&q, &[Axis::X], &[Axis::Y]).unwrap() <= joint + 1e-12);
    }

    #[test]
    fn divergence_is_nonnegative(a in weights(4), b in weights(4)) {
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let p: Vec<f64> = a.iter().map(|v| v / sa).collect();
        let q: Vec<f64> = b.iter().map(|v| v / sb).collect();
        prop_assert!(row_divergence(&p, &q) >= -1e-12);
    }

    #[test]
    fn chernoff_distance_is_nonnegative(w in weights(4), p in crossover(), s in 0.0f64..=1.0) {
        let q = JointPmf::normalized(binary_axes(&[Axis::X, Axis::Xp]), w).unwrap();
        let ch = ChannelModel::bsc_pair(p, p).unwrap();
        let d = chernoff_distance(&q, ch.w1(), s).unwrap();
        prop_assert!(d >= -1e-12);
        // The diagonal alone carries no distance.
        let diag = JointPmf::new(binary_axes(&[Axis::X, Axis::Xp]), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        prop_assert!(chernoff_distance(&diag, ch.w1(), s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sig9_round_trips(m in -1.0f64..1.0, e in -12i32..12) {
        let v = m * 10f64.powi(e);
        let back: f64 = sig9(v).parse().unwrap();
        prop_assert!((back - v).abs() <= 1e-8 * v.abs().max(1e-300) + 1e-300, "{v} -> {}", sig9(v));
    }

    #[test]
    fn rates_reject_bad_input(r in -1.0f64..-1e-9) {
        prop_assert!(RatePair::new(r, 0.1).is_err());
        prop_assert!(RatePair::new(0.1, r).is_err());
        prop_assert!(RatePair::new(f64::NAN, 0.1).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn omega_is_nonnegative(w in weights(16), g in metric(), p in crossover(), ry in 0.0f64..0.3, rz in 0.0f64..0.3) {
        let q = JointPmf::normalized(binary_axes(&[Axis::U, Axis::Up, Axis::X, Axis::Xp]), w).unwrap();
        let ch = ChannelModel::bsc_pair(p, p).unwrap();
        let r = RatePair::new(ry, rz).unwrap();
        let v = omega(&q, r, &g, &ensemble(), ch.w2(), &SolverConfig::default()).unwrap().value;
        prop_assert!(v >= -1e-9, "omega = {v}");
    }

    #[test]
    fn upsilon_is_nonnegative(w in weights(8), g in metric(), p in crossover(), ry in 0.0f64..0.3, rz in 0.0f64..0.3) {
        let q = JointPmf::normalized(binary_axes(&[Axis::U, Axis::X, Axis::Xp]), w).unwrap();
        let ch = ChannelModel::bsc_pair(p, p).unwrap();
        let r = RatePair::new(ry, rz).unwrap();
        let v = upsilon(&q, r, &g, &ensemble(), ch.w1(), &SolverConfig::default()).unwrap().value;
        prop_assert!(v >= -1e-9, "upsilon = {v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn random_coding_decreases_with_rate(p in crossover(), ry in 0.0f64..0.2, rz in 0.0f64..0.2, dr in 0.01f64..0.1) {
        let (e, cfg) = (ensemble(), SolverConfig::default());
        let ch = ChannelModel::bsc_pair(p / 2.0, p).unwrap();
        let base = rc::e_weak_rc(RatePair::new(ry, rz).unwrap(), &e, &ch, &cfg).unwrap().value;
        let up_y = rc::e_weak_rc(RatePair::new(ry + dr, rz).unwrap(), &e, &ch, &cfg).unwrap().value;
        let up_z = rc::e_weak_rc(RatePair::new(ry, rz + dr).unwrap(), &e, &ch, &cfg).unwrap().value;
        prop_assert!(base >= 0.0);
        prop_assert!(up_y <= base + 1e-4 && up_z <= base + 1e-4, "{base} {up_y} {up_z}");
    }
}
