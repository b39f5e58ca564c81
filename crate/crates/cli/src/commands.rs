//! The CLI workflows: rate evaluation, efficiency sweeps, min-tradeoff and
//! setup optimization, desk-scale simulation, and seed accounting.

use crate::config::{Resolved, SeedSource};
use crate::output::{fmt, render, CsvRow};
use anyhow::{anyhow, bail, Context, Result};
use direx_core::behaviour::{behaviour_from_setup, QubitSetup};
use direx_core::digp::{self, DigpError, DualCertificate};
use direx_core::eat::{self, ProtocolParams, RateReport};
use direx_core::engine::{self, HonestDevice, RiaInputs};
use direx_core::game::{Game, ScoreDistribution};
use direx_core::mtf;
use direx_core::npa::LevelSpec;
use direx_core::seed::{BitSource, ByteBits, PrngBits, RoundInputModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

pub struct CommandOutput {
    pub csv: String,
    pub summary: serde_json::Value,
    pub exit_code: i32,
}

fn is_infeasible(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(e.downcast_ref::<DigpError>(), Some(DigpError::PrimalInfeasible))
            || matches!(
                e.downcast_ref::<direx_core::engine::EngineError>(),
                Some(direx_core::engine::EngineError::Digp(DigpError::PrimalInfeasible))
            )
    })
}

pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if is_infeasible(err) {
        3
    } else {
        1
    }
}

/// Default qubit setup for a game: maximally entangled state, alternating
/// z/x bases for Alice, tilted bases for Bob with the final input aligned to
/// z so that the last input pair yields uniform outputs.
pub fn default_setup(game: &Game, eta: f64, werner: f64) -> QubitSetup {
    let alice_angles = (0..game.x_size)
        .map(|i| if i % 2 == 0 { 0.0 } else { FRAC_PI_2 })
        .collect();
    let bob_angles = (0..game.y_size)
        .map(|j| {
            if j == game.y_size - 1 {
                0.0
            } else if j % 2 == 0 {
                FRAC_PI_4
            } else {
                -FRAC_PI_4
            }
        })
        .collect();
    QubitSetup { theta: FRAC_PI_4, alice_angles, bob_angles, eta, werner }
}

/// Asymptotic rate of a setup: -log2 of the relaxed guessing probability at
/// the setup's expected score distribution.
pub fn asymptotic_for_setup(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    setup: &QubitSetup,
) -> Result<f64> {
    let behaviour = behaviour_from_setup(setup)?;
    let omega = game.expected_score_distribution(&behaviour)?;
    let p = digp::guessing_probability(game, gen_inputs, level, &omega)?;
    Ok(-p.clamp(1e-12, 1.0).log2())
}

fn golden_max(mut lo: f64, mut hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Surrogate hierarchy level for angle optimization: the intermediate level
/// is near-tight for these qubit costs and several times cheaper than the
/// full level; final figures are always re-evaluated at the configured level.
pub fn surrogate_level(level: LevelSpec) -> LevelSpec {
    if level.max_len >= 2 {
        LevelSpec { max_len: 1, plus_ab: true }
    } else {
        level
    }
}

/// Coordinate ascent over the state and measurement angles maximizing the
/// asymptotic rate at fixed detector efficiency. Deterministic.
pub fn optimize_setup(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    start: &QubitSetup,
    passes: usize,
    evals_per_coord: usize,
) -> (QubitSetup, f64) {
    let eval = |s: &QubitSetup| -> f64 {
        asymptotic_for_setup(game, gen_inputs, level, s).unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = start.clone();
    let mut best_val = eval(&best);
    let theta_lo = 0.02;
    let theta_hi = FRAC_PI_4;
    for pass in 0..passes {
        let width = 0.6 / (1 + pass) as f64;
        let improved_at_start = best_val;
        // theta
        {
            let lo = (best.theta - width).max(theta_lo);
            let hi = (best.theta + width).min(theta_hi);
            let (t, v) = golden_max(lo, hi, evals_per_coord, |t| {
                let mut s = best.clone();
                s.theta = t;
                eval(&s)
            });
            if v > best_val {
                best.theta = t;
                best_val = v;
            }
        }
        for i in 0..best.alice_angles.len() {
            let c = best.alice_angles[i];
            let (t, v) = golden_max(c - width, c + width, evals_per_coord, |t| {
                let mut s = best.clone();
                s.alice_angles[i] = t;
                eval(&s)
            });
            if v > best_val {
                best.alice_angles[i] = t;
                best_val = v;
            }
        }
        for j in 0..best.bob_angles.len() {
            let c = best.bob_angles[j];
            let (t, v) = golden_max(c - width, c + width, evals_per_coord, |t| {
                let mut s = best.clone();
                s.bob_angles[j] = t;
                eval(&s)
            });
            if v > best_val {
                best.bob_angles[j] = t;
                best_val = v;
            }
        }
        if best_val - improved_at_start < 1e-4 {
            break;
        }
    }
    (best, best_val)
}

/// Score vector of the uniform-output behaviour: a quantum-achievable
/// interior point used to retreat tradeoff anchors off the boundary.
fn uniform_score_vector(game: &Game) -> ScoreDistribution {
    let mut values = vec![0.0; game.num_scores()];
    let p = 1.0 / (game.a_size * game.b_size) as f64;
    for x in 0..game.x_size {
        for y in 0..game.y_size {
            let w = game.mu(x, y);
            if w > 0.0 {
                for a in 0..game.a_size {
                    for b in 0..game.b_size {
                        values[game.score(a, b, x, y)] += w * p;
                    }
                }
            }
        }
    }
    ScoreDistribution::new(values, false)
}

/// Certified rate (bits per round, second-order optimized) with the
/// min-tradeoff function taken at `v` while the device is expected at omega.
/// One tangent certificate, anchored at the evaluation corner: the fast
/// inner objective for the gradient ascent; the final point is re-evaluated
/// through the full pipeline.
fn certified_rate_at(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    params: &ProtocolParams,
    omega: &ScoreDistribution,
    v: &ScoreDistribution,
) -> Option<(RateReport, DualCertificate)> {
    // Exact boundary points (pure-state statistics) have no strictly
    // feasible moment matrix; a hair of interval slack restores an interior.
    let cert = [0.0, 1e-6]
        .iter()
        .find_map(|&slack| {
            digp::dual_certificate_with(
                game,
                gen_inputs,
                level,
                v,
                digp::AssembleOptions { score_slack: slack },
            )
            .ok()
        })?;
    let corner: f64 = cert
        .lambda
        .iter()
        .zip(omega.scores().iter().zip(params.delta.iter()))
        .map(|(&l, (&w, &d))| l * w + l.abs() * d)
        .sum();
    let anchor = corner.min(1.0);
    let f = if anchor > 0.0 {
        mtf::build_anchored(&cert, params.gamma, anchor).ok()?
    } else {
        mtf::build(&cert, params.gamma).ok()?
    };
    // An out-of-range corner is a valid zero-entropy report, not a failure;
    // the optimizer just sees a zero objective there.
    let report = eat::optimize_beta(params, &f, omega).ok()?;
    Some((report, cert))
}

/// Projected stochastic gradient ascent over the min-tradeoff parameter
/// point: central differences on the simplex tangent, per-step feasibility
/// check by re-solving, random restarts near the incumbent.
pub fn optimize_mtf(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    params: &ProtocolParams,
    omega: &ScoreDistribution,
    start: Option<&ScoreDistribution>,
    spec: &crate::config::OptimizerSpec,
) -> Result<(ScoreDistribution, RateReport, DualCertificate)> {
    let k = game.num_scores();
    let v0 = start.unwrap_or(omega).clone();
    let (r0, c0) = certified_rate_at(game, gen_inputs, level, params, omega, &v0)
        .ok_or_else(|| anyhow!("starting point is infeasible at this level"))?;
    let mut incumbent = (v0.clone(), r0, c0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let project = |values: &mut Vec<f64>| {
        let floor = 1e-9;
        for v in values.iter_mut() {
            *v = v.max(floor);
        }
        let s: f64 = values.iter().sum();
        for v in values.iter_mut() {
            *v /= s;
        }
    };

    for restart in 0..spec.restarts.max(1) {
        let mut v = if restart == 0 {
            incumbent.0.clone()
        } else {
            // jitter near the incumbent
            let mut values = incumbent.0.values.clone();
            for x in values.iter_mut() {
                *x += rng.gen_range(-3e-3..3e-3);
            }
            project(&mut values);
            ScoreDistribution::new(values, false)
        };
        let mut current = match certified_rate_at(game, gen_inputs, level, params, omega, &v) {
            Some((r, _)) => r.rate_per_round,
            None => continue,
        };
        let mut lr = 10.0 * spec.step;
        for _ in 0..spec.iters {
            // central differences along tangent directions e_i - e_last
            let h = spec.step;
            let mut grad = vec![0.0; k - 1];
            for (i, g) in grad.iter_mut().enumerate() {
                let mut plus = v.values.clone();
                plus[i] += h;
                plus[k - 1] -= h;
                let mut minus = v.values.clone();
                minus[i] -= h;
                minus[k - 1] += h;
                project(&mut plus);
                project(&mut minus);
                let fp = certified_rate_at(
                    game,
                    gen_inputs,
                    level,
                    params,
                    omega,
                    &ScoreDistribution::new(plus, false),
                )
                .map(|(r, _)| r.rate_per_round);
                let fm = certified_rate_at(
                    game,
                    gen_inputs,
                    level,
                    params,
                    omega,
                    &ScoreDistribution::new(minus, false),
                )
                .map(|(r, _)| r.rate_per_round);
                *g = match (fp, fm) {
                    (Some(a), Some(b)) => (a - b) / (2.0 * h),
                    _ => 0.0,
                };
            }
            let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            // backtracking step on the projected candidate
            let mut stepped = false;
            while lr > 1e-7 {
                let mut cand = v.values.clone();
                for (i, g) in grad.iter().enumerate() {
                    cand[i] += lr * g / norm;
                    cand[k - 1] -= lr * g / norm;
                }
                project(&mut cand);
                let cand = ScoreDistribution::new(cand, false);
                match certified_rate_at(game, gen_inputs, level, params, omega, &cand) {
                    Some((r, c)) if r.rate_per_round > current + spec.tolerance * 1e-3 => {
                        current = r.rate_per_round;
                        v = cand;
                        if r.rate_per_round > incumbent.1.rate_per_round {
                            incumbent = (v.clone(), r, c);
                        }
                        stepped = true;
                        lr *= 1.5;
                        break;
                    }
                    _ => {
                        lr *= 0.5;
                    }
                }
            }
            if !stepped {
                break;
            }
        }
    }
    Ok(incumbent)
}

fn completeness_for(
    params: &ProtocolParams,
    omega: &ScoreDistribution,
) -> f64 {
    eat::completeness_error(params.n, params.gamma, omega, &params.delta).unwrap_or(f64::NAN)
}

pub fn cmd_rate(res: &Resolved) -> Result<CommandOutput> {
    let omega = res
        .omega
        .clone()
        .ok_or_else(|| anyhow!("rate needs omega or a device in the config"))?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();

    let cert = digp::dual_certificate(res.game_ref(), res.gen_inputs, res.level, &omega)
        .context("certificate at omega")?;
    let asymptotic = eat::asymptotic_rate(&cert, &omega)?;

    if res.config.asymptotic_only {
        rows.push(CsvRow {
            grid_value: 0.0,
            setup: res.device.clone(),
            asymptotic_rate: asymptotic,
            report: None,
            eps_comp: f64::NAN,
        });
        summaries.push(json!({"v": omega.values, "asymptotic_rate": asymptotic}));
    } else {
        let params = res
            .params
            .clone()
            .ok_or_else(|| anyhow!("rate needs delta or delta_eps_comp_target"))?;
        let points: Vec<ScoreDistribution> = std::iter::once(omega.clone())
            .chain(
                res.config
                    .v_choices
                    .iter()
                    .map(|v| ScoreDistribution::new(v.clone(), false)),
            )
            .collect();
        for (idx, v) in points.iter().enumerate() {
            let (report, vcert) = engine::certify_pipeline(
                res.game_ref(),
                res.gen_inputs,
                res.level,
                &omega,
                &params,
                Some(v),
            )
            .with_context(|| format!("certifying at point {idx}"))?;
            let eps_comp = completeness_for(&params, &omega);
            let seed_bits =
                eat::expected_seed_bits(params.n, params.gamma, res.game_ref().mu_table());
            summaries.push(json!({
                "v": v.values,
                "asymptotic_rate": eat::asymptotic_rate(&vcert, &omega).unwrap_or(f64::NAN),
                "rate_per_round": report.rate_per_round,
                "entropy_bound_bits": report.entropy_bound_bits,
                "beta": report.beta,
                "eps_comp": eps_comp,
                "expected_seed_bits": seed_bits,
                "net_gain_bits": report.entropy_bound_bits - seed_bits - params.ell_ext,
                "output_length": report.output_length,
                "soundness_error": eat::soundness_error(&params),
                "lambda": vcert.lambda,
            }));
            rows.push(CsvRow {
                grid_value: idx as f64,
                setup: res.device.clone(),
                asymptotic_rate: eat::asymptotic_rate(&vcert, &omega).unwrap_or(f64::NAN),
                report: Some(report),
                eps_comp,
            });
        }
    }
    Ok(CommandOutput {
        csv: render(&rows),
        summary: json!({"command": "rate", "rows": summaries}),
        exit_code: 0,
    })
}

pub fn cmd_sweep(res: &Resolved) -> Result<CommandOutput> {
    let sweep = res
        .config
        .sweep
        .clone()
        .ok_or_else(|| anyhow!("sweep command needs a sweep section"))?;
    let base = match &res.device {
        Some(s) => s.clone(),
        None => default_setup(res.game_ref(), 1.0, 1.0),
    };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut warm = base.clone();
    for (idx, &value) in sweep.grid.iter().enumerate() {
        let mut setup = warm.clone();
        match sweep.parameter.as_str() {
            "eta" => setup.eta = value,
            "theta" => setup.theta = value,
            "werner" => setup.werner = value,
            _ => unreachable!("validated at load"),
        }
        let (opt_setup, _surrogate_rate) = if sweep.optimize_setup {
            optimize_setup(
                res.game_ref(),
                res.gen_inputs,
                surrogate_level(res.level),
                &setup,
                3,
                10,
            )
        } else {
            (setup.clone(), f64::NAN)
        };
        let asymptotic =
            asymptotic_for_setup(res.game_ref(), res.gen_inputs, res.level, &opt_setup)
                .unwrap_or(f64::NAN);
        warm = opt_setup.clone();

        let behaviour = behaviour_from_setup(&opt_setup)?;
        let omega = res.game_ref().expected_score_distribution(&behaviour)?;
        let spec = &res.config.protocol;
        let delta = match (&spec.delta, spec.delta_eps_comp_target) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(target)) => {
                eat::delta_for_target(&omega, spec.gamma, spec.n, target).map_err(|e| anyhow!(e))
            }
            (None, None) => Err(anyhow!("sweep needs delta or delta_eps_comp_target")),
        };
        let (report, eps_comp) = match delta {
            Ok(delta) => {
                let params = ProtocolParams {
                    n: spec.n,
                    gamma: spec.gamma,
                    delta,
                    eps_s: spec.eps_s,
                    eps_eat: spec.eps_eat,
                    eps_ext: spec.eps_ext,
                    ell_ext: spec.ell_ext,
                    ab_size: res.game_ref().a_size * res.game_ref().b_size,
                };
                let eps_comp = completeness_for(&params, &omega);
                // Best rate over lightly retreated tradeoff anchors: exactly
                // on the quantum boundary the tangent multipliers blow up,
                // and a certificate taken a step inside certifies more.
                let uniform = uniform_score_vector(res.game_ref());
                let mut report: Option<RateReport> = None;
                for t in [0.0, 0.01, 0.05] {
                    let v = ScoreDistribution::new(
                        omega
                            .values
                            .iter()
                            .zip(uniform.values.iter())
                            .map(|(w, u)| (1.0 - t) * w + t * u)
                            .collect(),
                        false,
                    );
                    if let Some((r, _)) = certified_rate_at(
                        res.game_ref(),
                        res.gen_inputs,
                        res.level,
                        &params,
                        &omega,
                        &v,
                    ) {
                        if report
                            .as_ref()
                            .map_or(true, |b| r.entropy_bound_bits > b.entropy_bound_bits)
                        {
                            report = Some(r);
                        }
                    }
                }
                (report, eps_comp)
            }
            Err(_) => (None, f64::NAN),
        };
        summaries.push(json!({
            "grid_value": value,
            "theta": opt_setup.theta,
            "asymptotic_rate": asymptotic,
            "eat_rate": report.as_ref().map_or(f64::NAN, |r| r.rate_per_round),
        }));
        rows.push(CsvRow {
            grid_value: value,
            setup: Some(opt_setup),
            asymptotic_rate: asymptotic,
            report,
            eps_comp,
        });
        let _ = idx;
    }
    Ok(CommandOutput {
        csv: render(&rows),
        summary: json!({"command": "sweep", "parameter": sweep.parameter, "rows": summaries}),
        exit_code: 0,
    })
}

pub fn cmd_optimize_mtf(res: &Resolved) -> Result<CommandOutput> {
    let omega = res
        .omega
        .clone()
        .ok_or_else(|| anyhow!("optimize-mtf needs omega or a device"))?;
    let params = res
        .params
        .clone()
        .ok_or_else(|| anyhow!("optimize-mtf needs delta or delta_eps_comp_target"))?;
    let start = res
        .config
        .v_choices
        .first()
        .map(|v| ScoreDistribution::new(v.clone(), false));
    let (v_star, report, cert) = optimize_mtf(
        res.game_ref(),
        res.gen_inputs,
        res.level,
        &params,
        &omega,
        start.as_ref(),
        &res.config.optimizer,
    )?;
    let eps_comp = completeness_for(&params, &omega);
    let rows = vec![CsvRow {
        grid_value: 0.0,
        setup: res.device.clone(),
        asymptotic_rate: eat::asymptotic_rate(&cert, &omega).unwrap_or(f64::NAN),
        report: Some(report.clone()),
        eps_comp,
    }];
    Ok(CommandOutput {
        csv: render(&rows),
        summary: json!({
            "command": "optimize-mtf",
            "v_star": v_star.values,
            "rate_per_round": report.rate_per_round,
            "entropy_bound_bits": report.entropy_bound_bits,
            "beta": report.beta,
        }),
        exit_code: 0,
    })
}

pub fn cmd_optimize_setup(res: &Resolved) -> Result<CommandOutput> {
    let base = match &res.device {
        Some(s) => s.clone(),
        None => default_setup(res.game_ref(), 1.0, 1.0),
    };
    let (setup, _) = optimize_setup(
        res.game_ref(),
        res.gen_inputs,
        surrogate_level(res.level),
        &base,
        4,
        12,
    );
    let rate = asymptotic_for_setup(res.game_ref(), res.gen_inputs, res.level, &setup)
        .unwrap_or(f64::NAN);
    let rows = vec![CsvRow {
        grid_value: base.eta,
        setup: Some(setup.clone()),
        asymptotic_rate: rate,
        report: None,
        eps_comp: f64::NAN,
    }];
    Ok(CommandOutput {
        csv: render(&rows),
        summary: json!({
            "command": "optimize-setup",
            "theta": setup.theta,
            "alice_angles": setup.alice_angles,
            "bob_angles": setup.bob_angles,
            "asymptotic_rate": rate,
        }),
        exit_code: 0,
    })
}

pub struct SimulateArtifacts {
    pub bits: Option<Vec<u8>>,
    pub rounds_log: Option<Vec<u8>>,
}

pub fn cmd_simulate(res: &Resolved) -> Result<(CommandOutput, SimulateArtifacts)> {
    let sim = res
        .config
        .simulate
        .clone()
        .ok_or_else(|| anyhow!("simulate command needs a simulate section"))?;
    let behaviour = res
        .behaviour
        .clone()
        .ok_or_else(|| anyhow!("simulate needs a device"))?;
    let omega = res.omega.clone().expect("device implies omega");
    let params = res
        .params
        .clone()
        .ok_or_else(|| anyhow!("simulate needs delta or delta_eps_comp_target"))?;
    if params.n > engine::LOG_CAP {
        bail!("simulate is desk-scale: n = {} exceeds {}", params.n, engine::LOG_CAP);
    }
    let game = res.game_ref();
    let device = HonestDevice { behaviour, stream: 0 };
    let model = RoundInputModel::new(game, params.gamma, res.gen_inputs)?;

    let seed_bytes;
    let mut prng;
    let mut file_bits;
    let bits: &mut dyn BitSource = match &sim.seed_source {
        SeedSource::Prng { seed } => {
            prng = PrngBits::new(*seed);
            &mut prng
        }
        SeedSource::File { path } => {
            seed_bytes = std::fs::read(path).with_context(|| format!("seed file {path}"))?;
            file_bits = ByteBits::new(seed_bytes.leak());
            &mut file_bits
        }
    };
    let mut inputs = RiaInputs::new(&model, bits, sim.block_len, sim.k_max_per_block);
    let transcript = engine::run_accumulation(
        &device,
        game,
        &params,
        &omega,
        &mut inputs,
        sim.master_seed,
        true,
    )?;

    let mut transcript_csv = String::from("score,name,count\n");
    for (i, &c) in transcript.score_counts.iter().enumerate() {
        let name = if i < game.num_scores() {
            game.score_names()[i].clone()
        } else {
            "no_test".to_string()
        };
        transcript_csv.push_str(&format!("{i},{name},{c}\n"));
    }

    let rounds_log = if sim.keep_round_log {
        transcript.rounds.as_ref().map(|rounds| {
            let mut buf = Vec::with_capacity(rounds.len() * 6);
            for r in rounds {
                buf.extend_from_slice(&[
                    r.a,
                    r.b,
                    r.x,
                    r.y,
                    r.test as u8,
                    r.score,
                ]);
            }
            buf
        })
    } else {
        None
    };

    if transcript.abort {
        return Ok((
            CommandOutput {
                csv: transcript_csv,
                summary: json!({
                    "command": "simulate",
                    "abort": true,
                    "score_counts": transcript.score_counts,
                    "seed_bits_used": transcript.seed_bits_used,
                }),
                exit_code: 2,
            },
            SimulateArtifacts { bits: None, rounds_log },
        ));
    }

    let (report, _cert) = engine::certify_pipeline(
        game,
        res.gen_inputs,
        res.level,
        &omega,
        &params,
        None,
    )?;
    let rounds = transcript.rounds.as_ref().expect("log kept at desk scale");
    let mut raw = Vec::with_capacity(2 * rounds.len());
    for r in rounds {
        raw.push(r.a == 1);
        raw.push(r.b == 1);
    }
    let out_len = (report.output_length as usize).min(raw.len());
    let mut ext_bits = PrngBits::new(sim.extractor_seed);
    let ext_seed: Vec<bool> = (0..raw.len() + out_len.max(1) - 1)
        .map(|_| ext_bits.next_bit().unwrap())
        .collect();
    let out = engine::extract_stub(&raw, &ext_seed, out_len)?;
    let mut packed = vec![0u8; (out.len() + 7) / 8];
    for (i, &bit) in out.iter().enumerate() {
        if bit {
            packed[i / 8] |= 1 << (7 - i % 8);
        }
    }

    Ok((
        CommandOutput {
            csv: transcript_csv,
            summary: json!({
                "command": "simulate",
                "abort": false,
                "score_counts": transcript.score_counts,
                "seed_bits_used": transcript.seed_bits_used,
                "entropy_bound_bits": report.entropy_bound_bits,
                "rate_per_round": report.rate_per_round,
                "output_length": out.len(),
                "soundness_error": eat::soundness_error(&params),
            }),
            exit_code: 0,
        },
        SimulateArtifacts { bits: Some(packed), rounds_log },
    ))
}

pub fn cmd_seed_account(res: &Resolved) -> Result<CommandOutput> {
    let spec = &res.config.protocol;
    let sim = res.config.simulate.clone().unwrap_or(crate::config::SimulateSpec {
        master_seed: 1,
        seed_source: SeedSource::Prng { seed: 1 },
        k_max_per_block: 1 << 20,
        block_len: 4096,
        keep_round_log: false,
        extractor_seed: 1,
    });
    let m_blocks = spec.n.div_ceil(sim.block_len.max(1));
    let req = direx_core::seed::seed_requirements(
        spec.n,
        m_blocks,
        spec.gamma,
        res.game_ref().mu_table(),
        sim.k_max_per_block as u64,
    )?;
    let csv = format!(
        "kappa,n_max,eps_ria,eps_dist,n_padded,m_blocks,k_max\n{},{},{},{},{},{},{}\n",
        fmt(req.kappa),
        fmt(req.n_max),
        fmt(req.eps_ria),
        fmt(req.eps_dist),
        req.n_padded,
        m_blocks,
        sim.k_max_per_block
    );
    Ok(CommandOutput {
        csv,
        summary: json!({
            "command": "seed-account",
            "kappa": req.kappa,
            "n_max": req.n_max,
            "eps_ria": req.eps_ria,
            "eps_dist": req.eps_dist,
            "n_padded": req.n_padded,
            "m_blocks": m_blocks,
        }),
        exit_code: 0,
    })
}

impl Resolved {
    pub fn game_ref(&self) -> &Game {
        &self.game
    }
}
