//! Property tests over seeded random operators and channels.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qpolar::channel::haar_random_channel;
use qpolar::cqsynth::{
    amplitude_channel, duality_gap, environment_channel, holevo, holevo_fidelity_floor,
    phase_channel, sqrt_fidelity_param, BinaryCqChannel, CqLabel,
};
use qpolar::linalg::{
    self, fidelity, matrix_sqrt_psd, partial_trace, random_density_operator, tensor_product,
    trace_norm, von_neumann_entropy, CMatrix, DensityOperator, DimCap,
};
use qpolar::polar::{one_step_transform, synthesize_all, Direction, SynthesisConfig};

fn random_cq(seed: u64, dim: usize) -> BinaryCqChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BinaryCqChannel::new(
        random_density_operator(dim, &mut rng),
        random_density_operator(dim, &mut rng),
        CqLabel::Synthesized,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_norm_of_psd_is_its_trace(seed in 0u64..1 << 40, dim in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density_operator(dim, &mut rng);
        prop_assert!((trace_norm(rho.matrix()) - rho.matrix().trace().re).abs() < 1e-9);
    }

    #[test]
    fn fidelity_is_symmetric(seed in 0u64..1 << 40, dim in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density_operator(dim, &mut rng);
        let sigma = random_density_operator(dim, &mut rng);
        let f1 = fidelity(&rho, &sigma).unwrap();
        let f2 = fidelity(&sigma, &rho).unwrap();
        prop_assert!((f1 - f2).abs() < 1e-9);
    }

    #[test]
    fn entropy_is_additive_over_products(seed in 0u64..1 << 40, da in 1usize..8, db in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density_operator(da, &mut rng);
        let sigma = random_density_operator(db, &mut rng);
        let joint = DensityOperator::new(
            tensor_product(rho.matrix(), sigma.matrix(), DimCap::default()).unwrap(),
        )
        .unwrap();
        prop_assert!(
            (von_neumann_entropy(&joint) - von_neumann_entropy(&rho) - von_neumann_entropy(&sigma))
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn partial_trace_recovers_product_marginals(seed in 0u64..1 << 40, da in 1usize..6, db in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density_operator(da, &mut rng);
        let sigma = random_density_operator(db, &mut rng);
        let joint = tensor_product(rho.matrix(), sigma.matrix(), DimCap::default()).unwrap();
        let left = partial_trace(&joint, &[da, db], &[0]).unwrap();
        let right = partial_trace(&joint, &[da, db], &[1]).unwrap();
        prop_assert!((left - rho.matrix()).norm() < 1e-12);
        prop_assert!((right - sigma.matrix()).norm() < 1e-12);
    }

    #[test]
    fn sqrt_psd_squares_back(seed in 0u64..1 << 40, dim in 1usize..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density_operator(dim, &mut rng);
        let root = matrix_sqrt_psd(rho.matrix()).unwrap();
        let back = &root * &root;
        let max_err = (back - rho.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        prop_assert!(max_err < 1e-8);
    }

    #[test]
    fn duality_gap_vanishes_for_random_channels(seed in 0u64..1 << 40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = haar_random_channel(2, 2, 2, &mut rng);
        prop_assert!(duality_gap(&ch).unwrap().abs() < 1e-8);
    }

    #[test]
    fn channel_outputs_are_trace_one(seed in 0u64..1 << 40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = haar_random_channel(2, 3, 2, &mut rng);
        let rho = random_density_operator(2, &mut rng);
        let out = ch.apply(&rho).unwrap();
        let env = ch.complementary(&rho).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-10);
        prop_assert!((env.matrix().trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_step_martingale_properties(seed in 0u64..1 << 40, dim in 2usize..5) {
        let w = random_cq(seed, dim);
        let cfg = SynthesisConfig::default();
        let (minus, plus) = one_step_transform(&w, &cfg).unwrap();
        let (im, iw, ip) = (holevo(&minus), holevo(&w), holevo(&plus));
        prop_assert!((im + ip - 2.0 * iw).abs() < 1e-8);
        prop_assert!(im <= iw + 1e-9);
        prop_assert!(iw <= ip + 1e-9);
    }

    #[test]
    fn fidelity_floor_on_random_cq_channels(seed in 0u64..1 << 40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = haar_random_channel(2, 2, 2, &mut rng);
        for w in [
            amplitude_channel(&ch).unwrap(),
            phase_channel(&ch).unwrap(),
            environment_channel(&ch).unwrap(),
        ] {
            let i = holevo(&w);
            let sf = sqrt_fidelity_param(&w);
            prop_assert!((0.0..=1.0).contains(&i));
            prop_assert!((0.0..=1.0).contains(&sf));
            prop_assert!(i >= holevo_fidelity_floor(sf) - 1e-9);
        }
    }
}

proptest! {
    // blocklength-4 synthesis is heavier, keep the case count low
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn chain_rule_for_random_channels(seed in 0u64..1 << 40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = haar_random_channel(2, 2, 2, &mut rng);
        let cfg = SynthesisConfig::default();
        let wa = amplitude_channel(&ch).unwrap();
        let table = synthesize_all(&wa, 4, Direction::Forward, &cfg).unwrap();
        prop_assert!((table.sum_holevo() - 4.0 * holevo(&wa)).abs() < 1e-6);
        let wp = phase_channel(&ch).unwrap();
        let table = synthesize_all(&wp, 2, Direction::Transposed, &cfg).unwrap();
        prop_assert!((table.sum_holevo() - 2.0 * holevo(&wp)).abs() < 1e-6);
    }
}

#[test]
fn sqrt_psd_squares_back_at_dim_256() {
    // the large-dimension spot check behind the proptest sweep
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let rho = random_density_operator(256, &mut rng);
    let root = matrix_sqrt_psd(rho.matrix()).unwrap();
    let back = &root * &root;
    let max_err = (back - rho.matrix())
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    assert!(max_err < 1e-8, "max entry error {max_err}");
}

#[test]
fn partial_trace_preserves_trace_on_entangled_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let joint = random_density_operator(12, &mut rng);
    let reduced = partial_trace(joint.matrix(), &[3, 4], &[0]).unwrap();
    assert_relative_eq!(reduced.trace().re, 1.0, epsilon = 1e-12);
    let reduced = partial_trace(joint.matrix(), &[2, 3, 2], &[0, 2]).unwrap();
    assert_relative_eq!(reduced.trace().re, 1.0, epsilon = 1e-12);
}

#[test]
fn haar_isometries_are_isometries() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (out, inn) in [(4, 2), (8, 2), (6, 3)] {
        let v = linalg::haar_random_isometry(out, inn, &mut rng);
        let gram = v.matrix().adjoint() * v.matrix();
        assert_relative_eq!(
            (gram - CMatrix::identity(inn, inn)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }
}
