use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use envsteer::channel::{cptp_report, kraus_from_model, natural_representation};
use envsteer::linalg::{Operator, SuperOperator};
use envsteer::model::ModelOperators;
use envsteer::random::{random_density, random_hermitian, random_operator};
use envsteer::stats::{commuting_peak_distribution, grid_moments};
use envsteer::trajectory::{step, x_statistic, MeasurementInstrument, Welford};

fn random_model(d: usize, seed: u64) -> ModelOperators {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelOperators::new(random_hermitian(d, &mut rng), random_hermitian(d, &mut rng)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rim_channel_is_unital_cptp(d in 2usize..=4, seed in any::<u64>(), t in 0.0f64..4.0, dphi in 0.0f64..6.3) {
        let k = kraus_from_model(&random_model(d, seed), t, dphi).unwrap();
        prop_assert!(k.completeness_residual() < 1e-12);
        let r = cptp_report(&natural_representation(&k)).unwrap();
        prop_assert!(r.trace_preservation_residual < 1e-12);
        prop_assert!(r.unitality_residual < 1e-10);
        prop_assert!(r.min_choi_eigenvalue > -1e-10);
    }

    #[test]
    fn step_keeps_a_valid_state(d in 2usize..=4, seed in any::<u64>(), t in 0.1f64..3.0, u in 0.0f64..1.0) {
        let k = kraus_from_model(&random_model(d, seed), t, std::f64::consts::FRAC_PI_2).unwrap();
        let inst = MeasurementInstrument::from_kraus(&k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let rho = random_density(d, &mut rng);
        let p1 = inst.probability_one(&rho);
        let p0 = inst.branch(&rho, 0).trace().re;
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
        if p0.min(p1) > 1e-10 {
            let out = step(&rho, &inst, u).unwrap();
            prop_assert!((out.rho.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(out.rho.hermitian_residual() < 1e-12);
            prop_assert_eq!(out.alpha == 0, u < p0);
        }
    }

    #[test]
    fn sandwich_superoperator_matches_products(d in 2usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, rho) = (random_operator(d, &mut rng), random_operator(d, &mut rng), random_operator(d, &mut rng));
        let direct = x.matmul(&rho).matmul(&y);
        prop_assert!(SuperOperator::sandwich(&x, &y).apply(&rho).distance(&direct) < 1e-12);
    }

    #[test]
    fn welford_merge_is_order_free(xs in prop::collection::vec(-10.0f64..10.0, 2..200), cut in 0usize..200) {
        let cut = cut % xs.len();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        prop_assert_eq!(a.count, whole.count);
        prop_assert!((a.mean - whole.mean).abs() < 1e-12);
        prop_assert!((a.variance() - whole.variance()).abs() < 1e-9);
    }

    #[test]
    fn x_statistic_is_bounded(m in 1usize..5000, frac in 0.0f64..=1.0) {
        let ones = ((m as f64) * frac).round() as usize;
        let x = x_statistic(ones, m);
        prop_assert!((-0.5..=0.5).contains(&x));
        prop_assert!((x - (ones as f64 / m as f64 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn peak_distribution_is_gaussian_for_large_m(theta in 0.2f64..1.3, m in 1000usize..4000) {
        // One sector with f_k = (1 − sin 2θ)/2, variance f_k(1−f_k)/m.
        let ops = ModelOperators::new(
            Operator::real_diag(&[1.0, -1.0]),
            Operator::zeros(2),
        ).unwrap();
        let rho0 = Operator::basis_projector(2, 0);
        let p = commuting_peak_distribution(&rho0, &ops, theta / 2.0, std::f64::consts::FRAC_PI_2, m).unwrap();
        let fk = (1.0 - theta.sin()) / 2.0;
        let (mean, var) = grid_moments(&p);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((mean - fk).abs() < 2e-3);
        prop_assert!((var * m as f64 / (fk * (1.0 - fk)) - 1.0).abs() < 0.05);
    }
}
