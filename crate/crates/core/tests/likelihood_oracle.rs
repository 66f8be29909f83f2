mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use support::{oracle_likelihood, random_series, random_spec, random_theta};
use tsselect::likelihood::quasi_log_likelihood;
use tsselect::model::{GarchInit, ModelConfig, ModelSpec};

#[test]
fn oracle_white_noise_hand_value() {
    let cfg = ModelConfig::default();
    let spec = ModelSpec::arma(0, 0);
    assert_eq!(oracle_likelihood(&spec, &[1.0], &[1.0, -1.0], &cfg), -1.0);
    let e = std::f64::consts::E;
    let v = oracle_likelihood(&spec, &[e], &[1.0, -1.0], &cfg);
    assert!((v + (1.0 / e + 1.0)).abs() < 1e-15);
}

#[test]
fn oracle_garch11_hand_value() {
    // H_1 = 0.1 + 0.2 * 0.1 = 0.12, H_2 = 0.1 + 0.3 * 1 + 0.2 * 0.12 = 0.424
    let cfg = ModelConfig::default();
    let x = [1.0, 0.5];
    let theta = [0.1, 0.3, 0.2];
    let h: [f64; 2] = [0.12, 0.424];
    let hand: f64 = -0.5 * x.iter().zip(h).map(|(x, h)| x * x / h + h.ln()).sum::<f64>();
    let spec = ModelSpec::garch(1, 1);
    assert!((oracle_likelihood(&spec, &theta, &x, &cfg) - hand).abs() < 1e-14);
    assert!((quasi_log_likelihood(&spec, &theta, &x, &cfg).unwrap() - hand).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn library_matches_oracle(seed in any::<u64>(), n in 1usize..120, known in any::<bool>(), unconditional in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig {
            known_variance: known,
            garch_init: if unconditional { GarchInit::Unconditional } else { GarchInit::Intercept },
            ..Default::default()
        };
        let spec = random_spec(&mut rng, 3);
        let theta = random_theta(&mut rng, &spec, &cfg);
        let x = random_series(&mut rng, n);
        let lib = quasi_log_likelihood(&spec, &theta, &x, &cfg).unwrap();
        let oracle = oracle_likelihood(&spec, &theta, &x, &cfg);
        prop_assert!((lib - oracle).abs() <= 1e-10, "{spec} {theta:?}: {lib} vs {oracle}");
    }
}
