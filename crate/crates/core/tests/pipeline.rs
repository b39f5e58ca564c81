//! Cross-module integration: certificates feeding tradeoff functions feeding
//! entropy accounting, audited against re-solves.

use direx_core::behaviour::ideal_chsh_behaviour;
use direx_core::digp::{self, AssembleOptions};
use direx_core::eat::{self, ProtocolParams};
use direx_core::engine;
use direx_core::game::{Game, ScoreDistribution};
use direx_core::mtf;
use direx_core::npa::LevelSpec;

fn example_params(n: u64, gamma: f64, num_scores: usize) -> ProtocolParams {
    ProtocolParams {
        n,
        gamma,
        delta: vec![1e-3; num_scores],
        eps_s: 1e-8,
        eps_eat: 1e-8,
        eps_ext: 1e-9,
        ell_ext: 0.0,
        ab_size: 4,
    }
}

fn noisy_omega() -> ScoreDistribution {
    ScoreDistribution::new(vec![0.4225, 0.49, 0.0875], false)
}

#[test]
fn tangent_bound_sits_below_min_entropy() {
    let game = Game::chsh_extended();
    let level = LevelSpec::parse("1+AB").unwrap();
    let gamma = 5e-3;
    let cert = digp::dual_certificate_with(
        &game,
        (1, 2),
        level,
        &noisy_omega(),
        AssembleOptions { score_slack: 0.0 },
    )
    .unwrap();
    for seed in 0..10 {
        let q = &digp::random_quantum_score_vectors(&game, 1, 100 + seed)[0];
        let g = mtf::tangent_lower_bound(&cert, gamma, q).unwrap();
        let p = digp::guessing_probability(&game, (1, 2), level, q).unwrap();
        let hmin = (1.0 - gamma) * (-p.log2());
        assert!(g <= hmin + 1e-6, "seed {seed}: tangent {g} > entropy bound {hmin}");
    }
}

#[test]
fn error_terms_balance_at_scaling_beta_on_real_certificate() {
    // The sqrt(gamma/n) choice keeps n*eps_v and eps_omega within a factor
    // of ten of each other at desk parameters.
    let game = Game::chsh_extended();
    let omega = noisy_omega();
    let cert = digp::dual_certificate_with(
        &game,
        (1, 2),
        LevelSpec::fixed(2),
        &omega,
        AssembleOptions { score_slack: 0.0 },
    )
    .unwrap();
    let params = example_params(10_000_000_000, 5e-3, 3);
    let f = mtf::build(&cert, params.gamma).unwrap();
    let beta = (params.gamma / params.n as f64).sqrt();
    let report = eat::certified_entropy(&params, &f, &omega, beta).unwrap();
    let n_eps_v = params.n as f64 * report.eps_v;
    let ratio = n_eps_v / report.eps_omega;
    // same order of magnitude; the exact ratio depends on the certificate's
    // multiplier spread (12.6 for this one)
    assert!(ratio < 20.0 && ratio > 0.05, "ratio {ratio}");
    let n_eps_k = params.n as f64 * report.eps_k;
    assert!(n_eps_k < n_eps_v, "eps_k is the subleading term");
}

#[test]
fn signed_corner_costs_entropy_on_real_certificate() {
    let game = Game::chsh_extended();
    let omega = noisy_omega();
    let cert =
        digp::dual_certificate(&game, (1, 2), LevelSpec::fixed(2), &omega).unwrap();
    let params = example_params(10_000_000_000, 5e-3, 3);
    let f = mtf::build(&cert, params.gamma).unwrap();
    let with_delta = eat::certified_entropy(&params, &f, &omega, 1e-7).unwrap();
    // First-order term at delta = 0 dominates the signed-corner version.
    let t0 = cert.lambda_dot(&omega);
    let zero_delta = params.n as f64 * (1.0 - params.gamma) * (f.a_v - f.b_v * t0);
    assert!(with_delta.entropy_bound_bits <= zero_delta);
}

#[test]
fn certify_pipeline_reports_consistent_fields() {
    let game = Game::chsh_extended();
    let omega = noisy_omega();
    let params = example_params(10_000_000_000, 5e-3, 3);
    let (report, cert) =
        engine::certify_pipeline(&game, (1, 2), LevelSpec::fixed(2), &omega, &params, None)
            .unwrap();
    assert!(report.entropy_bound_bits > 0.0);
    assert_eq!(
        report.output_length,
        report.entropy_bound_bits.floor().max(0.0) as u64
    );
    assert_eq!(cert.lambda.len(), 3);
    // certificate value upper-bounds the primal at its parameter point
    let p = digp::guessing_probability(&game, (1, 2), LevelSpec::fixed(2), &omega).unwrap();
    assert!(cert.lambda_dot(&omega) >= p - 1e-7);
}

#[test]
fn pipeline_surfaces_infeasible_omega() {
    let game = Game::chsh_extended();
    let params = example_params(1_000_000, 5e-3, 3);
    let bad = ScoreDistribution::new(vec![0.44, 0.5, 0.06], false); // chsh above Tsirelson
    let err = engine::certify_pipeline(
        &game,
        (1, 2),
        LevelSpec::fixed(2),
        &bad,
        &params,
        None,
    )
    .unwrap_err();
    let msg = format!("{err}");
    assert!(msg.contains("not achievable"), "got {msg}");
}

#[test]
fn certificates_serialize_round_trip() {
    let game = Game::chsh_extended();
    let omega = game
        .expected_score_distribution(&ideal_chsh_behaviour())
        .unwrap();
    let cert =
        digp::dual_certificate(&game, (1, 2), LevelSpec::fixed(1), &omega).unwrap();
    let json = serde_json::to_string(&cert).unwrap();
    let back: digp::DualCertificate = serde_json::from_str(&json).unwrap();
    // serde_json's default float parsing is accurate to an ulp, not exact
    for (a, b) in cert.lambda.iter().zip(back.lambda.iter()) {
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }
    assert_eq!(cert.level(), back.level());
    assert!((cert.dual_value - back.dual_value).abs() <= 1e-14 * cert.dual_value.abs());
}

#[test]
fn quick_audit_on_intermediate_level() {
    // Small-scale version of the certificate audit: all deterministic
    // strategies plus mixtures, at the intermediate level for speed.
    let game = Game::chsh_extended();
    let level = LevelSpec::parse("1+AB").unwrap();
    let omega = noisy_omega();
    for slack in [0.0, 1e-3] {
        let cert = digp::dual_certificate_with(
            &game,
            (1, 2),
            level,
            &omega,
            AssembleOptions { score_slack: slack },
        )
        .unwrap();
        let probes = digp::standard_probes(&game, &omega, 42);
        assert!(probes.len() >= 50);
        let audit = digp::verify_certificate(&game, (1, 2), &cert, &probes, 1e-7).unwrap();
        assert!(
            audit.passed,
            "slack {slack}: worst margin {}",
            audit.worst_margin
        );
    }
}

#[test]
fn guessing_probability_is_convex_along_segments() {
    let game = Game::chsh_extended();
    let level = LevelSpec::parse("1+AB").unwrap();
    let ends = digp::random_quantum_score_vectors(&game, 6, 31);
    for pair in ends.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let pa = digp::guessing_probability(&game, (1, 2), level, a).unwrap();
        let pb = digp::guessing_probability(&game, (1, 2), level, b).unwrap();
        for &t in &[0.25, 0.5, 0.75] {
            let mix = ScoreDistribution::new(
                a.values
                    .iter()
                    .zip(b.values.iter())
                    .map(|(x, y)| t * x + (1.0 - t) * y)
                    .collect(),
                false,
            );
            let pm = digp::guessing_probability(&game, (1, 2), level, &mix).unwrap();
            assert!(
                pm <= t * pa + (1.0 - t) * pb + 1e-7,
                "convexity violated at t = {t}"
            );
        }
    }
}

#[test]
fn rate_approaches_asymptote_as_n_grows() {
    // gamma = delta = n^(-1/3) protocol: nondecreasing rate, within 0.05
    // bits of the asymptote by n = 1e14 for the reduced-efficiency setup.
    let game = Game::chsh_extended();
    let setup = direx_core::behaviour::QubitSetup {
        theta: std::f64::consts::FRAC_PI_4,
        alice_angles: vec![0.0, std::f64::consts::FRAC_PI_2],
        bob_angles: vec![
            std::f64::consts::FRAC_PI_4,
            -std::f64::consts::FRAC_PI_4,
            0.0,
        ],
        eta: 0.9,
        werner: 1.0,
    };
    let behaviour = direx_core::behaviour::behaviour_from_setup(&setup).unwrap();
    let omega = game.expected_score_distribution(&behaviour).unwrap();
    let cert = digp::dual_certificate_with(
        &game,
        (1, 2),
        LevelSpec::fixed(2),
        &omega,
        AssembleOptions { score_slack: 0.0 },
    )
    .unwrap();
    let asymptote = eat::asymptotic_rate(&cert, &omega).unwrap();
    let mut prev = f64::NEG_INFINITY;
    let mut last = f64::NAN;
    for &n in &[1e10f64, 1e11, 1e12, 1e13, 1e14] {
        let gamma = n.powf(-1.0 / 3.0);
        let params = ProtocolParams {
            n: n as u64,
            gamma,
            delta: vec![gamma; 3],
            eps_s: 1e-8,
            eps_eat: 1e-8,
            eps_ext: 1e-9,
            ell_ext: 0.0,
            ab_size: 4,
        };
        let f = mtf::build(&cert, gamma).unwrap();
        let report = eat::optimize_beta(&params, &f, &omega).unwrap();
        assert!(report.rate_per_round >= prev - 1e-9, "rate dips at n = {n:.0e}");
        prev = report.rate_per_round;
        last = report.rate_per_round;
    }
    assert!(
        (asymptote - last).abs() <= 0.05,
        "rate {last} still {:.4} from asymptote {asymptote}",
        asymptote - last
    );
}
