//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `-- --nocapture`). Tolerances are pinned in
//! the asserts; nothing is deferred to later calibration.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qpolar::channel::{haar_random_channel, QuantumChannel};
use qpolar::cqsynth::{
    amplitude_channel, duality_gap, holevo, holevo_fidelity_floor, phase_channel,
    sqrt_fidelity_param, BinaryCqChannel, CqLabel,
};
use qpolar::linalg::random_density_operator;
use qpolar::multilevel::{
    multilevel_net_rate, superactivation_probe, MultiQubitChannel,
};
use qpolar::polar::{
    classify, coherent_information, one_step_transform, rate_report, synthesize_all,
    uncertainty_report, ChannelPartition, Direction, SynthesisConfig,
};
use qpolar::protosim::{run_protocol, ProtocolConfig};

fn classify_channel(ch: &QuantumChannel, n: usize, beta: f64) -> ChannelPartition {
    let cfg = SynthesisConfig::default();
    let ta = synthesize_all(&amplitude_channel(ch).unwrap(), n, Direction::Forward, &cfg)
        .unwrap();
    let tp = synthesize_all(&phase_channel(ch).unwrap(), n, Direction::Transposed, &cfg)
        .unwrap();
    classify(&ta, &tp, beta).unwrap()
}

#[test]
fn criterion_1_duality_identity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let ch = haar_random_channel(2, 2, 2, &mut rng);
        worst = worst.max(duality_gap(&ch).unwrap().abs());
    }
    let elapsed = started.elapsed();
    let ok = worst < 1e-8 && elapsed.as_secs_f64() < 10.0;
    println!(
        "[acceptance] criterion 1 (duality identity): {} — worst |I(W_P)+I(W_E)-1| = {worst:.2e} over 50 random channels in {elapsed:.2?}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-8, "worst duality gap {worst:.3e} >= 1e-8");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:.2?}, budget 10 s");
}

#[test]
fn criterion_2_chain_rule_exactness() {
    let started = Instant::now();
    let cfg = SynthesisConfig::default();
    let w = amplitude_channel(&QuantumChannel::amplitude_damping(0.25).unwrap()).unwrap();
    let iw = holevo(&w);
    let mut worst = 0.0f64;
    for n in [2usize, 4, 8] {
        let table = synthesize_all(&w, n, Direction::Forward, &cfg).unwrap();
        worst = worst.max((table.sum_holevo() - n as f64 * iw).abs());
    }
    let elapsed = started.elapsed();
    let ok = worst < 1e-6 && elapsed.as_secs_f64() < 300.0;
    println!(
        "[acceptance] criterion 2 (chain rule): {} — worst |sum I_i - N I(W)| = {worst:.2e} over N in {{2,4,8}} in {elapsed:.2?}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(worst < 1e-6, "chain-rule deviation {worst:.3e} >= 1e-6");
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:.2?}, budget 5 min");
}

#[test]
fn criterion_3_one_step_martingale() {
    let cfg = SynthesisConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst_sum = 0.0f64;
    let mut ordering_ok = true;
    for k in 0..20 {
        let dim = if k % 2 == 0 { 2 } else { 3 };
        let w = BinaryCqChannel::new(
            random_density_operator(dim, &mut rng),
            random_density_operator(dim, &mut rng),
            CqLabel::Synthesized,
        )
        .unwrap();
        let (minus, plus) = one_step_transform(&w, &cfg).unwrap();
        let (im, iw, ip) = (holevo(&minus), holevo(&w), holevo(&plus));
        worst_sum = worst_sum.max((im + ip - 2.0 * iw).abs());
        ordering_ok &= im <= iw + 1e-9 && iw <= ip + 1e-9;
    }
    let ok = worst_sum < 1e-8 && ordering_ok;
    println!(
        "[acceptance] criterion 3 (one-step martingale): {} — worst |I- + I+ - 2I| = {worst_sum:.2e}, ordering held: {ordering_ok}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(worst_sum < 1e-8);
    assert!(ordering_ok);
}

#[test]
fn criterion_4_uncertainty_inequality_suite() {
    let cfg = SynthesisConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut channels = vec![QuantumChannel::amplitude_damping(0.25).unwrap()];
    for _ in 0..10 {
        channels.push(haar_random_channel(2, 2, 2, &mut rng));
    }
    let mut checked = 0usize;
    for ch in &channels {
        for n in [2usize, 4] {
            let report = uncertainty_report(ch, n, 0.3, &cfg).unwrap();
            for r in &report.records {
                assert!(
                    r.holevo_phase + r.holevo_env <= 1.0 + 1e-9,
                    "I_P + I_E = {} at index {} (N={n})",
                    r.holevo_phase + r.holevo_env,
                    r.index
                );
                assert!(
                    2.0 * r.sqrt_f_phase + r.sqrt_f_env >= 1.0 - 1e-9,
                    "2 sqrtF_P + sqrtF_E = {} at index {} (N={n})",
                    2.0 * r.sqrt_f_phase + r.sqrt_f_env,
                    r.index
                );
                assert!(
                    r.sqrt_f_phase + 2.0 * r.sqrt_f_env >= 1.0 - 1e-9,
                    "sqrtF_P + 2 sqrtF_E = {} at index {} (N={n})",
                    r.sqrt_f_phase + 2.0 * r.sqrt_f_env,
                    r.index
                );
                checked += 1;
            }
            assert!(report.fidelity_floor_ok, "I >= log2(2/(1+sqrtF)) failed (N={n})");
        }
    }
    println!(
        "[acceptance] criterion 4 (uncertainty inequality suite): PASS — all four families held at {checked} synthesized indices across {} channels",
        channels.len()
    );
}

#[test]
fn criterion_5_set_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let channels = vec![
        QuantumChannel::identity(2),
        QuantumChannel::amplitude_damping(0.25).unwrap(),
        QuantumChannel::dephasing(0.3).unwrap(),
        haar_random_channel(2, 2, 2, &mut rng),
    ];
    let mut runs = 0usize;
    for ch in &channels {
        for n in [2usize, 4] {
            let part = classify_channel(ch, n, 0.3);
            // exact integer identity |A| - |B| = |G_A| + |G_P| - N
            assert_eq!(
                part.a.len() as i64 - part.b.len() as i64,
                part.good_amplitude_count() as i64 + part.good_phase_count() as i64 - n as i64
            );
            let report = rate_report(&part, ch); // asserts the identity again
            runs += 1;
            let _ = report;
        }
    }
    for n in [2usize, 4] {
        let part = classify_channel(&QuantumChannel::identity(2), n, 0.3);
        let report = rate_report(&part, &QuantumChannel::identity(2));
        assert_eq!(report.net_rate, 1.0, "identity net rate at N={n}");
        assert!(part.b.is_empty(), "identity B set at N={n}");
    }
    println!(
        "[acceptance] criterion 5 (partition set identity): PASS — exact on {runs} classify runs; identity channel gives net rate 1 with empty B"
    );
}

#[test]
fn criterion_6_degradable_ebit_trend() {
    // N = 8 is excluded: phase synthesis there needs 4^8 = 65536-dimensional
    // operators, beyond the default cap.
    let cfg = SynthesisConfig::default();
    let ch = QuantumChannel::amplitude_damping(0.25).unwrap();
    let we = qpolar::cqsynth::environment_channel(&ch).unwrap();
    let mut prev = f64::INFINITY;
    let mut ebit_rates = Vec::new();
    for n in [2usize, 4] {
        let part = classify_channel(&ch, n, 0.3);
        let report = uncertainty_report(&ch, n, 0.3, &cfg).unwrap();
        assert!(
            report.phase_env_disjoint,
            "G(W_P) and G(W_E) intersect at N={n}"
        );
        assert_eq!(
            report.bad_env_disjoint,
            Some(true),
            "B and G(W_E) intersect at N={n}"
        );
        let rate = part.b.len() as f64 / n as f64;
        assert!(rate <= prev + 1e-12, "ebit rate rose at N={n}");
        prev = rate;
        ebit_rates.push(rate);
        let _ = synthesize_all(&we, n, Direction::Forward, &cfg).unwrap();
    }
    println!(
        "[acceptance] criterion 6 (degradable e-bit trend): PASS — |B|/N = {ebit_rates:?} over N in {{2,4}}, disjointness held at every N"
    );
}

#[test]
fn criterion_7_protocol_simulation() {
    let started = Instant::now();

    // noiseless: exact ebit generation
    let id = QuantumChannel::identity(2);
    let part = classify_channel(&id, 2, 0.3);
    let cfg = ProtocolConfig::new(id, part, vec![], vec![], false, 0);
    let report = run_protocol(&cfg).unwrap();
    assert!(
        (report.ebit_fidelity - 1.0).abs() < 1e-9,
        "identity fidelity {}",
        report.ebit_fidelity
    );

    // damping: frozen-averaged fidelity beats the decoder-error bound
    let ch = QuantumChannel::amplitude_damping(0.05).unwrap();
    let part = classify_channel(&ch, 2, 0.3);
    let cfg = ProtocolConfig::new(
        ch,
        part.clone(),
        vec![0; part.z.len()],
        vec![0; part.x.len()],
        true,
        0,
    );
    let damping = run_protocol(&cfg).unwrap();
    let bound = 1.0 - 2.0 * (damping.eps_amp + damping.eps_phase);
    assert!(
        damping.ebit_fidelity >= bound,
        "fidelity {} below 1 - 2(eps_A + eps_P) = {bound}",
        damping.ebit_fidelity
    );

    // fully depolarizing: no better than guessing
    let ch = QuantumChannel::depolarizing(1.0).unwrap();
    let all_info = ChannelPartition {
        n_size: 2,
        a: vec![1, 2],
        x: vec![],
        z: vec![],
        b: vec![],
    };
    let cfg = ProtocolConfig::new(ch, all_info, vec![], vec![], false, 0);
    let depol = run_protocol(&cfg).unwrap();
    assert!(
        depol.ebit_fidelity <= 0.25 + 0.1,
        "depolarizing fidelity {}",
        depol.ebit_fidelity
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:.2?}, budget 1 min");
    println!(
        "[acceptance] criterion 7 (protocol simulation): PASS — identity exact, damping fidelity {:.4} >= bound {:.4}, depolarizing fidelity {:.4} <= 0.35, in {elapsed:.2?}",
        damping.ebit_fidelity, bound, depol.ebit_fidelity
    );
}

#[test]
fn criterion_8_polarization_trend() {
    let cfg = SynthesisConfig::default();
    let w = amplitude_channel(&QuantumChannel::amplitude_damping(0.25).unwrap()).unwrap();
    let iw = holevo(&w);

    let mut variances = Vec::new();
    let mut table8 = None;
    for n in [2usize, 4, 8] {
        let table = synthesize_all(&w, n, Direction::Forward, &cfg).unwrap();
        variances.push(table.holevo_variance());
        if n == 8 {
            table8 = Some(table);
        }
    }
    let variance_ok = variances[0] < variances[1] && variances[1] < variances[2];
    assert!(
        variance_ok,
        "variance of I_i not strictly increasing: {variances:?}"
    );

    let fraction = table8.unwrap().fraction_holevo_above(0.99);
    let fraction_ok = (fraction - iw).abs() <= 0.25;
    println!(
        "[acceptance] criterion 8 (polarization trend): {} — variances {variances:?} strictly increase; fraction(I_i > 0.99) at N=8 is {fraction:.3} vs I(W_A) = {iw:.3} (|diff| = {:.3}, allowed 0.25)",
        if fraction_ok { "PASS" } else { "FAIL" },
        (fraction - iw).abs()
    );
    assert!(
        fraction_ok,
        "fraction {fraction:.3} differs from I(W_A) = {iw:.3} by {:.3} > 0.25: at N = 8 \
         polarization has produced only one near-perfect index (the runner-up sits at I ≈ 0.91), \
         so the stated window is unreachable at desk scale; the variance clause above confirms \
         the trend itself",
        (fraction - iw).abs()
    );
}

#[test]
fn criterion_9_superactivation_machinery() {
    // the four-dimensional 50% erasure channel has zero coherent information
    let erasure = QuantumChannel::erasure(4, 0.5).unwrap();
    let coh = coherent_information(&erasure);
    assert!(coh.abs() < 1e-9, "erasure(4, 1/2) coherent information {coh}");

    // multilevel chain rule on random four-dimensional channels
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    for _ in 0..20 {
        let ch = haar_random_channel(4, 4, 4, &mut rng);
        // verifies |net - I(A>B)| <= 1e-6 internally
        let _ = multilevel_net_rate(&MultiQubitChannel::new(ch).unwrap(), 4096).unwrap();
    }

    // joint-channel mode end to end on (erasure (x) user-supplied Kraus data)
    let user = haar_random_channel(4, 4, 4, &mut rng);
    let probe = superactivation_probe(&erasure, &user, 1 << 14).unwrap();
    assert!(probe.coherent_a.abs() < 1e-9);
    println!(
        "[acceptance] criterion 9 (superactivation machinery): PASS — erasure coherent information {coh:.2e}; 20 random channels met the chain rule; joint mode reports net {:.4} with predicate {}",
        probe.joint_net, probe.superactivated
    );
}
