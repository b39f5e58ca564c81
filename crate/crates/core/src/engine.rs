//! Desk-scale simulation of the spot-checking accumulation phase against
//! honest i.i.d. devices, the abort rule, the end-to-end certification
//! pipeline, and a hashing-based extraction stub.

use crate::behaviour::Behaviour;
use crate::digp::{self, DigpError, DualCertificate};
use crate::eat::{self, EatError, ProtocolParams, RateReport};
use crate::game::{frequency_distribution, Game, GameError, ScoreDistribution};
use crate::mtf::{self, MtfError};
use crate::npa::LevelSpec;
use crate::seed::{ria_decode, BitSource, RoundInputModel, SeedError};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("test probability {0} outside (0,1)")]
    GammaRange(f64),
    #[error("round log requested for n = {0}, above the desk cap of 10^6")]
    LogTooLarge(u64),
    #[error("input source exhausted after {0} rounds")]
    InputsExhausted(u64),
    #[error("extractor needs raw_len + output_length - 1 = {need} seed bits, got {got}")]
    ExtractorSeed { need: usize, got: usize },
    #[error("output length {out} exceeds raw length {raw}")]
    ExtractorLength { out: usize, raw: usize },
    #[error(transparent)]
    Digp(#[from] DigpError),
    #[error(transparent)]
    Eat(#[from] EatError),
    #[error(transparent)]
    Mtf(#[from] MtfError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Seed(#[from] SeedError),
}

/// Honest i.i.d. device pair: one fixed behaviour queried every round.
#[derive(Debug, Clone)]
pub struct HonestDevice {
    pub behaviour: Behaviour,
    /// RNG stream id separating device randomness from input sampling.
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub a: u8,
    pub b: u8,
    pub x: u8,
    pub y: u8,
    pub test: bool,
    /// Score index, or 255 for the no-test symbol.
    pub score: u8,
}

pub const PERP_SCORE: u8 = 255;

/// Aggregated accumulation-phase transcript. Score counts are the sufficient
/// statistic for the abort rule; per-round logs are kept only at desk scale.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub n: u64,
    /// Counts per score, no-test symbol last.
    pub score_counts: Vec<u64>,
    pub abort: bool,
    pub seed_bits_used: u64,
    pub rounds: Option<Vec<RoundRecord>>,
}

impl Transcript {
    pub fn frequencies(&self) -> ScoreDistribution {
        frequency_distribution(&self.score_counts, self.n).expect("counts sum to n")
    }
}

/// Per-round input supply: test flag and input pair.
pub trait RoundInputs {
    fn next_round(&mut self) -> Option<(bool, usize, usize)>;
    fn bits_used(&self) -> u64;
}

/// Counter-based sampler: round i is a pure function of (master seed, i), so
/// chunked parallel simulation reproduces the serial transcript bit for bit.
/// Simulation plumbing only, not a protocol seed source.
pub struct DirectSampler<'a> {
    game: &'a Game,
    gamma: f64,
    gen_inputs: (usize, usize),
    master_seed: u64,
    round: u64,
    /// Cumulative input distribution over supp(mu), row-major.
    mu_cdf: Vec<(f64, usize, usize)>,
}

impl<'a> DirectSampler<'a> {
    pub fn new(
        game: &'a Game,
        gamma: f64,
        gen_inputs: (usize, usize),
        master_seed: u64,
    ) -> Result<Self, EngineError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(EngineError::GammaRange(gamma));
        }
        let mut mu_cdf = Vec::new();
        let mut acc = 0.0;
        for x in 0..game.x_size {
            for y in 0..game.y_size {
                let w = game.mu(x, y);
                if w > 0.0 {
                    acc += w;
                    mu_cdf.push((acc, x, y));
                }
            }
        }
        Ok(Self { game, gamma, gen_inputs, master_seed, round: 0, mu_cdf })
    }

    fn sample_at(&self, round: u64) -> (bool, usize, usize) {
        let mut rng = round_rng(self.master_seed, 0, round);
        let u = uniform_f64(&mut rng);
        if u >= self.gamma {
            (false, self.gen_inputs.0, self.gen_inputs.1)
        } else {
            let v = uniform_f64(&mut rng) * self.mu_cdf.last().map_or(1.0, |e| e.0);
            let mut chosen = self.mu_cdf[self.mu_cdf.len() - 1];
            for &e in &self.mu_cdf {
                if v < e.0 {
                    chosen = e;
                    break;
                }
            }
            (true, chosen.1, chosen.2)
        }
    }
}

impl RoundInputs for DirectSampler<'_> {
    fn next_round(&mut self) -> Option<(bool, usize, usize)> {
        let r = self.sample_at(self.round);
        self.round += 1;
        let _ = self.game;
        Some(r)
    }

    fn bits_used(&self) -> u64 {
        0
    }
}

/// Inputs decoded from a seed bit stream with the rounded interval algorithm,
/// one block of rounds per decoder invocation.
pub struct RiaInputs<'a> {
    model: &'a RoundInputModel,
    bits: &'a mut dyn BitSource,
    block_len: u64,
    k_max_per_block: usize,
    buffer: std::collections::VecDeque<usize>,
    used: u64,
}

impl<'a> RiaInputs<'a> {
    pub fn new(
        model: &'a RoundInputModel,
        bits: &'a mut dyn BitSource,
        block_len: u64,
        k_max_per_block: usize,
    ) -> Self {
        Self {
            model,
            bits,
            block_len: block_len.max(1),
            k_max_per_block,
            buffer: std::collections::VecDeque::new(),
            used: 0,
        }
    }
}

impl RoundInputs for RiaInputs<'_> {
    fn next_round(&mut self) -> Option<(bool, usize, usize)> {
        if self.buffer.is_empty() {
            let targets =
                std::iter::repeat(&self.model.quantized).take(self.block_len as usize);
            let out = ria_decode(targets, self.bits, self.k_max_per_block).ok()?;
            self.used += out.bits_consumed as u64;
            self.buffer.extend(out.symbols);
        }
        self.buffer.pop_front().map(|s| self.model.symbol_to_round(s))
    }

    fn bits_used(&self) -> u64 {
        self.used
    }
}

fn round_rng(master: u64, stream: u64, round: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(round);
    rng
}

fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sample (a,b) from p(.,.|x,y) by inverse CDF in a-major order.
fn sample_outcome(behaviour: &Behaviour, x: usize, y: usize, u: f64) -> (usize, usize) {
    let mut acc = 0.0;
    for a in 0..behaviour.a_size {
        for b in 0..behaviour.b_size {
            acc += behaviour.prob(a, b, x, y);
            if u < acc {
                return (a, b);
            }
        }
    }
    (behaviour.a_size - 1, behaviour.b_size - 1)
}

/// Strict two-sided acceptance window on the observed score frequencies;
/// the no-test frequency is unconstrained. Returns true when the run aborts.
pub fn abort_decision(
    freq: &ScoreDistribution,
    omega: &ScoreDistribution,
    delta: &[f64],
    gamma: f64,
) -> bool {
    let scores = freq.scores();
    for (k, (&f, (&w, &d))) in scores
        .iter()
        .zip(omega.scores().iter().zip(delta.iter()))
        .enumerate()
    {
        let _ = k;
        if !(gamma * (w - d) < f && f < gamma * (w + d)) {
            return true;
        }
    }
    false
}

/// Desk cap for keeping full per-round logs.
pub const LOG_CAP: u64 = 1_000_000;

/// Run the accumulation phase against an honest device and apply the abort
/// rule. Device outcomes are keyed by (master seed, device stream, round), so
/// transcripts are reproducible and chunk-parallelizable.
pub fn run_accumulation(
    device: &HonestDevice,
    game: &Game,
    params: &ProtocolParams,
    omega: &ScoreDistribution,
    inputs: &mut dyn RoundInputs,
    master_seed: u64,
    keep_round_log: bool,
) -> Result<Transcript, EngineError> {
    if keep_round_log && params.n > LOG_CAP {
        return Err(EngineError::LogTooLarge(params.n));
    }
    let mut counts = vec![0u64; game.num_scores() + 1];
    let perp = game.num_scores();
    let mut log = keep_round_log.then(|| Vec::with_capacity(params.n as usize));
    for round in 0..params.n {
        let (test, x, y) =
            inputs.next_round().ok_or(EngineError::InputsExhausted(round))?;
        let mut rng = round_rng(master_seed, device.stream, round);
        let u = uniform_f64(&mut rng);
        let (a, b) = sample_outcome(&device.behaviour, x, y, u);
        let score = if test { game.score(a, b, x, y) } else { perp };
        counts[score] += 1;
        if let Some(log) = log.as_mut() {
            log.push(RoundRecord {
                a: a as u8,
                b: b as u8,
                x: x as u8,
                y: y as u8,
                test,
                score: if test { score as u8 } else { PERP_SCORE },
            });
        }
    }
    let freq = frequency_distribution(&counts, params.n)?;
    let abort = abort_decision(&freq, omega, &params.delta, params.gamma);
    Ok(Transcript {
        n: params.n,
        score_counts: counts,
        abort,
        seed_bits_used: inputs.bits_used(),
        rounds: log,
    })
}

/// Chunk-parallel variant of [`run_accumulation`] over the counter-based
/// sampler; merging is plain count addition, and the result matches the
/// serial run exactly.
pub fn run_accumulation_parallel(
    device: &HonestDevice,
    game: &Game,
    params: &ProtocolParams,
    omega: &ScoreDistribution,
    gen_inputs: (usize, usize),
    master_seed: u64,
    chunk: u64,
) -> Result<Transcript, EngineError> {
    use rayon::prelude::*;
    let sampler = DirectSampler::new(game, params.gamma, gen_inputs, master_seed)?;
    let perp = game.num_scores();
    let nchunks = params.n.div_ceil(chunk.max(1));
    let counts = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(params.n);
            let mut counts = vec![0u64; perp + 1];
            for round in lo..hi {
                let (test, x, y) = sampler.sample_at(round);
                let mut rng = round_rng(master_seed, device.stream, round);
                let u = uniform_f64(&mut rng);
                let (a, b) = sample_outcome(&device.behaviour, x, y, u);
                let score = if test { game.score(a, b, x, y) } else { perp };
                counts[score] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; perp + 1],
            |mut acc, c| {
                for (a, b) in acc.iter_mut().zip(c) {
                    *a += b;
                }
                acc
            },
        );
    let freq = frequency_distribution(&counts, params.n)?;
    let abort = abort_decision(&freq, omega, &params.delta, params.gamma);
    Ok(Transcript {
        n: params.n,
        score_counts: counts,
        abort,
        seed_bits_used: 0,
        rounds: None,
    })
}

/// End-to-end certification: dual certificate at the chosen point, tradeoff
/// function, second-order optimization, rate report.
///
/// Certificates are shopped across the l1 selection strengths and the
/// tradeoff function is re-anchored at the worst-case score corner; every
/// candidate is a valid bound, so the one certifying the most entropy wins.
/// (At boundary points the exact tangent tracks the optimum; on steep faces
/// a flatter certificate avoids multiplier blow-up in the error terms.)
pub fn certify_pipeline(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    omega: &ScoreDistribution,
    params: &ProtocolParams,
    v_choice: Option<&ScoreDistribution>,
) -> Result<(RateReport, DualCertificate), EngineError> {
    let v = v_choice.unwrap_or(omega);
    let mut best: Option<(RateReport, DualCertificate)> = None;
    let mut last_err: Option<EngineError> = None;
    for slack in digp::SLACK_GRID {
        let cert = match digp::dual_certificate_with(
            game,
            gen_inputs,
            level,
            v,
            digp::AssembleOptions { score_slack: slack },
        ) {
            Ok(c) => c,
            Err(e) => {
                last_err = Some(e.into());
                continue;
            }
        };
        let corner: f64 = cert
            .lambda
            .iter()
            .zip(omega.scores().iter().zip(params.delta.iter()))
            .map(|(&l, (&w, &d))| l * w + l.abs() * d)
            .sum();
        let anchors = [cert.dual_value, corner.min(1.0)];
        for anchor in anchors {
            let attempt = (|| -> Result<RateReport, EngineError> {
                let f = mtf::build_anchored(&cert, params.gamma, anchor)?;
                Ok(eat::optimize_beta(params, &f, omega)?)
            })();
            match attempt {
                Ok(report) => {
                    if best.as_ref().map_or(true, |(b, _)| {
                        report.entropy_bound_bits > b.entropy_bound_bits
                    }) {
                        best = Some((report, cert.clone()));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.expect("at least one attempt ran"))
}

/// Toeplitz-matrix hashing stub standing in for a quantum-proof extractor.
/// Output bit i is the parity of raw AND the seed window starting at i;
/// cryptographic parameter choices are the caller's responsibility through
/// the entropy-loss budget.
pub fn extract_stub(
    raw: &[bool],
    extractor_seed: &[bool],
    output_length: usize,
) -> Result<Vec<bool>, EngineError> {
    if output_length > raw.len() {
        return Err(EngineError::ExtractorLength { out: output_length, raw: raw.len() });
    }
    if output_length == 0 {
        return Ok(Vec::new());
    }
    let need = raw.len() + output_length - 1;
    if extractor_seed.len() < need {
        return Err(EngineError::ExtractorSeed { need, got: extractor_seed.len() });
    }
    let mut out = Vec::with_capacity(output_length);
    for i in 0..output_length {
        let mut parity = false;
        for (j, &r) in raw.iter().enumerate() {
            parity ^= r & extractor_seed[i + j];
        }
        out.push(parity);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviour::ideal_chsh_behaviour;
    use crate::eat::completeness_error;
    use rand::Rng;

    fn chsh_omega() -> ScoreDistribution {
        Game::chsh_extended()
            .expected_score_distribution(&ideal_chsh_behaviour())
            .unwrap()
    }

    fn params(n: u64, gamma: f64, delta: Vec<f64>) -> ProtocolParams {
        ProtocolParams {
            n,
            gamma,
            delta,
            eps_s: 1e-8,
            eps_eat: 1e-8,
            eps_ext: 1e-9,
            ell_ext: 0.0,
            ab_size: 4,
        }
    }

    #[test]
    fn gamma_one_never_generates() {
        // gamma in (0,1) is enforced; 0.999 stands in for the all-test limit.
        let game = Game::chsh_extended();
        let device = HonestDevice { behaviour: ideal_chsh_behaviour(), stream: 1 };
        let p = params(2000, 0.999, vec![0.4, 0.45, 0.07]);
        let mut inputs = DirectSampler::new(&game, p.gamma, (1, 2), 7).unwrap();
        let t = run_accumulation(&device, &game, &p, &chsh_omega(), &mut inputs, 7, false)
            .unwrap();
        let perp = t.score_counts[3];
        assert!(perp < 20, "almost every round tests");
        assert!(DirectSampler::new(&game, 0.0, (1, 2), 7).is_err());
        assert!(DirectSampler::new(&game, 1.0, (1, 2), 7).is_err());
    }

    #[test]
    fn abort_rule_is_strict() {
        let omega = ScoreDistribution::new(vec![0.4, 0.4, 0.2], false);
        let delta = vec![0.05, 0.05, 0.05];
        let gamma = 0.1;
        // exactly on the lower boundary of score 0: abort
        let mut f = omega.values.iter().map(|w| gamma * w).collect::<Vec<_>>();
        f[0] = gamma * (0.4 - 0.05);
        let mut fv = f.clone();
        fv.push(1.0 - fv.iter().sum::<f64>());
        let freq = ScoreDistribution::new(fv, true);
        assert!(abort_decision(&freq, &omega, &delta, gamma));
        // exactly at gamma*omega: pass
        let mut fv = omega.values.iter().map(|w| gamma * w).collect::<Vec<_>>();
        fv.push(1.0 - fv.iter().sum::<f64>());
        let freq = ScoreDistribution::new(fv, true);
        assert!(!abort_decision(&freq, &omega, &delta, gamma));
        // single component out of window: abort
        let mut fv = omega.values.iter().map(|w| gamma * w).collect::<Vec<_>>();
        fv[2] = gamma * (0.2 + 0.06);
        fv.push(1.0 - fv.iter().sum::<f64>());
        let freq = ScoreDistribution::new(fv, true);
        assert!(abort_decision(&freq, &omega, &delta, gamma));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let game = Game::chsh_extended();
        let device = HonestDevice { behaviour: ideal_chsh_behaviour(), stream: 3 };
        let omega = chsh_omega();
        let p = params(40_000, 0.05, vec![0.05, 0.05, 0.03]);
        let mut inputs = DirectSampler::new(&game, p.gamma, (1, 2), 99).unwrap();
        let serial =
            run_accumulation(&device, &game, &p, &omega, &mut inputs, 99, false).unwrap();
        let par =
            run_accumulation_parallel(&device, &game, &p, &omega, (1, 2), 99, 1337).unwrap();
        assert_eq!(serial.score_counts, par.score_counts);
        assert_eq!(serial.abort, par.abort);
    }

    #[test]
    fn honest_counts_concentrate() {
        let game = Game::chsh_extended();
        let device = HonestDevice { behaviour: ideal_chsh_behaviour(), stream: 5 };
        let omega = chsh_omega();
        let gamma = 0.05;
        let n = 1_000_000u64;
        let p = params(n, gamma, vec![0.04, 0.045, 0.018]);
        let t = run_accumulation_parallel(&device, &game, &p, &omega, (1, 2), 5, 65_536)
            .unwrap();
        // Chernoff windows at 1e-6 confidence: r = sqrt(3 mu ln(2/1e-6))
        let lg = (2.0 / 1e-6f64).ln();
        for (k, &c) in t.score_counts.iter().enumerate() {
            let pk = if k < 3 { gamma * omega.values[k] } else { 1.0 - gamma };
            let mu = pk * n as f64;
            let r = (3.0 * mu * lg).sqrt();
            assert!(
                ((c as f64) - mu).abs() <= r,
                "score {k}: count {c}, expected {mu:.0} +- {r:.0}"
            );
        }
    }

    #[test]
    fn ria_inputs_drive_accumulation() {
        let game = Game::chsh_extended();
        let device = HonestDevice { behaviour: ideal_chsh_behaviour(), stream: 8 };
        let omega = chsh_omega();
        let gamma = 0.05;
        let n = 20_000u64;
        let p = params(n, gamma, vec![0.05, 0.05, 0.03]);
        let model = RoundInputModel::new(&game, gamma, (1, 2)).unwrap();
        let mut bits = crate::seed::PrngBits::new(1234);
        let mut inputs = RiaInputs::new(&model, &mut bits, 1000, 4000);
        let t = run_accumulation(&device, &game, &p, &omega, &mut inputs, 8, true).unwrap();
        assert_eq!(t.score_counts.iter().sum::<u64>(), n);
        assert!(t.seed_bits_used > 0);
        let log = t.rounds.as_ref().unwrap();
        assert_eq!(log.len(), n as usize);
        // log agrees with the counts
        let mut recount = vec![0u64; 4];
        for r in log {
            if r.test {
                recount[r.score as usize] += 1;
            } else {
                recount[3] += 1;
            }
        }
        assert_eq!(recount, t.score_counts);
    }

    #[test]
    fn honest_abort_rate_is_bounded_by_completeness() {
        let game = Game::chsh_extended();
        let device = HonestDevice { behaviour: ideal_chsh_behaviour(), stream: 2 };
        let omega = chsh_omega();
        let gamma = 0.05;
        let n = 100_000u64;
        // inflated windows: per-term target 1e-3
        let delta = crate::eat::delta_for_target(&omega, gamma, n, 1e-3).unwrap();
        let p = params(n, gamma, delta.clone());
        let eps = completeness_error(n, gamma, &omega, &delta).unwrap();
        let trials = 200u64;
        let mut aborts = 0u64;
        for t in 0..trials {
            let tr = run_accumulation_parallel(&device, &game, &p, &omega, (1, 2), t, 32_768)
                .unwrap();
            if tr.abort {
                aborts += 1;
            }
        }
        let freq = aborts as f64 / trials as f64;
        let sigma = (eps * (1.0 - eps) / trials as f64).sqrt();
        assert!(
            freq <= eps + 3.0 * sigma + 1.0 / trials as f64,
            "abort rate {freq} vs completeness {eps}"
        );
    }

    #[test]
    fn extractor_stub_behaviour() {
        let raw: Vec<bool> = (0..64).map(|i| i % 3 == 0).collect();
        let seed: Vec<bool> = (0..127).map(|i| i % 2 == 0).collect();
        assert_eq!(extract_stub(&raw, &seed, 0).unwrap(), Vec::<bool>::new());
        let a = extract_stub(&raw, &seed, 64).unwrap();
        let b = extract_stub(&raw, &seed, 64).unwrap();
        assert_eq!(a, b, "deterministic");
        assert_eq!(a.len(), 64);
        assert!(extract_stub(&raw, &seed[..100], 64).is_err());
        assert!(extract_stub(&raw, &seed, 65).is_err());
    }

    #[test]
    fn extractor_output_is_unbiased_on_uniform_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let trials = 10_000;
        let out_len = 16;
        let raw_len = 64;
        let mut ones = vec![0u64; out_len];
        let seed: Vec<bool> = (0..raw_len + out_len - 1).map(|_| rng.gen()).collect();
        for _ in 0..trials {
            let raw: Vec<bool> = (0..raw_len).map(|_| rng.gen()).collect();
            let out = extract_stub(&raw, &seed, out_len).unwrap();
            for (k, &bit) in out.iter().enumerate() {
                if bit {
                    ones[k] += 1;
                }
            }
        }
        let sigma = (trials as f64 * 0.25).sqrt();
        for (k, &c) in ones.iter().enumerate() {
            assert!(
                ((c as f64) - trials as f64 / 2.0).abs() < 4.0 * sigma,
                "bit {k} biased: {c}/{trials}"
            );
        }
    }
}
