//! The relaxed device-independent guessing-probability program and its dual
//! certificates.
//!
//! The primal maximizes the probability that an adversary's preparation
//! guesses the devices' outputs on the generation inputs: one subnormalized
//! moment block per guess value, score rows tying the mixture to an observed
//! score distribution, and a normalization row. The dual multipliers of the
//! score rows, after a PSD feasibility repair, give an affine functional
//! lambda with lambda . v' >= p_guess(v') for every achievable score vector
//! v' — the certificate that every entropy statement downstream consumes.

use crate::behaviour::{behaviour_from_setup, QubitSetup};
use crate::game::{Game, GameError, ScoreDistribution};
use crate::npa::{build_relaxation, Cell, LevelSpec, NpaError, Relaxation};
use direx_sdp::{
    dual_feasibility_repair, solve, BlockMat, SdpError, SdpProblem, SdpSolution, SolveOptions,
    SolveStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DigpError {
    #[error("score distribution is not achievable at this relaxation level")]
    PrimalInfeasible,
    #[error("solver ended with status {0:?} (residual score {1:.3e})")]
    NotConverged(SolveStatus, f64),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Npa(#[from] NpaError),
    #[error("{0}")]
    BadParameter(String),
}

/// Residual score above which a max-iteration iterate is rejected outright.
const MAX_ITER_ACCEPT: f64 = 2e-5;

/// Width of the interval relaxation applied to each score row.
///
/// Replacing the equality (W p)_c = omega_c by a band of half-width
/// `score_slack` charges the dual objective `slack` per unit of multiplier
/// deviation from a common center. The exact-equality dual is the local
/// subgradient of the guessing probability, which near the quantum boundary
/// can be steep enough to ruin the entropy error terms; the charge buys a
/// flatter certificate at a controlled cost in the certified value. The band
/// only enlarges the feasible set, so certificates remain valid upper bounds
/// everywhere.
#[derive(Debug, Clone, Copy)]
pub struct AssembleOptions {
    pub score_slack: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self { score_slack: 1e-3 }
    }
}

/// Slack grid scanned when shopping for the certificate with the best final
/// certified rate; every point yields a valid bound, so taking the best is
/// sound. The exact tangent wins on the geometries measured so far; the
/// flattened alternative guards games where the value/spread frontier is
/// shallower.
pub const SLACK_GRID: [f64; 2] = [0.0, 1e-3];

/// Constraint rows realizing one score: a single equality, or an interval
/// pair (upper, lower) when the slack relaxation is active.
#[derive(Debug, Clone, Copy)]
pub enum ScoreRows {
    Dropped,
    Equality(usize),
    Interval { upper: usize, lower: usize },
}

/// Assembled guessing program: the SDP plus its row bookkeeping.
#[derive(Debug, Clone)]
pub struct GuessingProgram {
    pub game: Game,
    pub gen_inputs: (usize, usize),
    pub level: LevelSpec,
    pub relaxation: Relaxation,
    pub sdp: SdpProblem,
    /// Constraint rows per score; the last score's rows are dropped as
    /// linearly dependent and reconstructed as multiplier zero.
    pub score_rows: Vec<ScoreRows>,
    pub norm_row: usize,
    /// Trace-domination row whose coefficient is the identity on every block;
    /// the PSD repair shifts this multiplier.
    pub identity_row: usize,
    pub num_guess_blocks: usize,
    pub score_slack: f64,
}

/// Feasible point of the dual guessing program at parameter `v`, with the
/// normalization and trace multipliers folded into the score components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda: Vec<f64>,
    pub v: ScoreDistribution,
    pub level_max_len: u32,
    pub level_plus_ab: bool,
    /// lambda . v; upper bound on the guessing probability at v.
    pub dual_value: f64,
    /// Minimum dual slack eigenvalue after repair (>= 0 up to margin).
    pub feasibility_margin: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl DualCertificate {
    pub fn level(&self) -> LevelSpec {
        LevelSpec { max_len: self.level_max_len, plus_ab: self.level_plus_ab }
    }

    pub fn lambda_dot(&self, dist: &ScoreDistribution) -> f64 {
        self.lambda.iter().zip(dist.scores()).map(|(l, w)| l * w).sum()
    }
}

fn check_score_distribution(game: &Game, omega: &ScoreDistribution) -> Result<(), DigpError> {
    if omega.includes_perp || omega.values.len() != game.num_scores() {
        return Err(DigpError::BadParameter(format!(
            "score distribution must have {} entries without the no-test symbol",
            game.num_scores()
        )));
    }
    if (omega.total() - 1.0).abs() > 1e-9 {
        return Err(DigpError::BadParameter(format!(
            "score distribution sums to {}",
            omega.total()
        )));
    }
    Ok(())
}

/// Build the SDP for the guessing program at parameter `omega` with the
/// default interval relaxation.
pub fn assemble(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    omega: &ScoreDistribution,
) -> Result<GuessingProgram, DigpError> {
    assemble_with(game, gen_inputs, level, omega, AssembleOptions::default())
}

pub fn assemble_with(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    omega: &ScoreDistribution,
    opts: AssembleOptions,
) -> Result<GuessingProgram, DigpError> {
    let (gx, gy) = gen_inputs;
    if gx >= game.x_size || gy >= game.y_size {
        return Err(DigpError::BadParameter(format!(
            "generation inputs ({gx},{gy}) out of range"
        )));
    }
    check_score_distribution(game, omega)?;
    let slack = opts.score_slack;
    if !(0.0..0.1).contains(&slack) {
        return Err(DigpError::BadParameter(format!("score slack {slack} out of range")));
    }

    let relax = build_relaxation(game.x_size, game.y_size, game.a_size, game.b_size, level)?;
    let d = relax.size();
    let num_guess_blocks = game.a_size * game.b_size;
    // With exact equalities the last score row is linearly dependent and gets
    // dropped. Interval rows are kept for every score: the slack columns make
    // them independent, and the l1 charge then centers itself across the
    // whole multiplier vector, which is what keeps the spread small.
    let kept_scores = if slack > 0.0 { game.num_scores() } else { game.num_scores() - 1 };
    let mut dims = vec![d; num_guess_blocks];
    if slack > 0.0 {
        dims.extend(std::iter::repeat(1).take(2 * kept_scores));
    }
    dims.push(1); // trace slack

    let mut sdp = SdpProblem::new(dims.clone());

    // Helper: accumulate `coeff * <class value>` into a row, on one block.
    let add_class = |mat: &mut BlockMat, block: usize, class: u32, coeff: f64, dims: &[usize]| {
        let (r, c) = relax.classes[class as usize].rep_cell;
        let v = if r == c { coeff } else { coeff / 2.0 };
        mat.push(block, r, c, v, dims);
    };

    // Objective: in block c_ab, the guessed-outcome probability on the
    // generation inputs.
    for a in 0..game.a_size {
        for b in 0..game.b_size {
            let block = a * game.b_size + b;
            for (class, coeff) in relax.prob_expression(a, b, gx, gy) {
                add_class(&mut sdp.objective, block, class, coeff, &dims);
            }
        }
    }

    // Structural rows: cell equalities within each block.
    for block in 0..num_guess_blocks {
        for i in 0..d {
            for j in i..d {
                match relax.cell(i, j) {
                    Cell::Zero => {
                        let mut row = BlockMat::new();
                        row.push(block, i, j, if i == j { 1.0 } else { 0.5 }, &dims);
                        sdp.constraints.push((row, 0.0));
                    }
                    Cell::Class(cl) => {
                        let (r, c) = relax.classes[cl as usize].rep_cell;
                        if (i, j) == (r, c) {
                            continue;
                        }
                        let mut row = BlockMat::new();
                        row.push(block, i, j, if i == j { 1.0 } else { 0.5 }, &dims);
                        row.push(block, r, c, if r == c { -1.0 } else { -0.5 }, &dims);
                        sdp.constraints.push((row, 0.0));
                    }
                }
            }
        }
    }

    // Score rows (last score dropped as linearly dependent on the others plus
    // normalization). With slack active, each equality becomes an interval
    // pair through nonnegative 1x1 slack blocks.
    let mut score_rows: Vec<ScoreRows> = vec![ScoreRows::Dropped; game.num_scores()];
    for s in 0..kept_scores {
        let mut row = BlockMat::new();
        for x in 0..game.x_size {
            for y in 0..game.y_size {
                let w = game.mu(x, y);
                if w == 0.0 {
                    continue;
                }
                for a in 0..game.a_size {
                    for b in 0..game.b_size {
                        if game.score(a, b, x, y) != s {
                            continue;
                        }
                        for block in 0..num_guess_blocks {
                            for (class, coeff) in relax.prob_expression(a, b, x, y) {
                                add_class(&mut row, block, class, w * coeff, &dims);
                            }
                        }
                    }
                }
            }
        }
        if slack > 0.0 {
            let plus_block = num_guess_blocks + 2 * s;
            let minus_block = plus_block + 1;
            // (score expr) + s_plus = omega + slack
            let mut up = row.clone();
            up.push(plus_block, 0, 0, 1.0, &dims);
            let upper = sdp.constraints.len();
            sdp.constraints.push((up, omega.values[s] + slack));
            // (score expr) - s_minus = omega - slack
            let mut down = row;
            down.push(minus_block, 0, 0, -1.0, &dims);
            let lower = sdp.constraints.len();
            sdp.constraints.push((down, omega.values[s] - slack));
            score_rows[s] = ScoreRows::Interval { upper, lower };
        } else {
            score_rows[s] = ScoreRows::Equality(sdp.constraints.len());
            sdp.constraints.push((row, omega.values[s]));
        }
    }

    // Normalization row: the subnormalized blocks' weights sum to one.
    let norm_row = sdp.constraints.len();
    let mut nrow = BlockMat::new();
    for block in 0..num_guess_blocks {
        nrow.push(block, 0, 0, 1.0, &dims);
    }
    sdp.constraints.push((nrow, 1.0));

    // Trace-domination row. Every diagonal moment <w' w> is bounded by the
    // block's normalization moment (nested 2x2 minors of the moment
    // structure), so sum_c tr(X_c) <= d holds on the whole feasible set;
    // each interval slack pair sums to exactly 2 * slack. The final slack
    // entry makes it an equality. Its coefficient is the identity on every
    // block, which is what the dual feasibility repair shifts.
    let identity_row = sdp.constraints.len();
    let trace_rhs = d as f64 + 2.0 * slack * kept_scores as f64;
    sdp.constraints.push((BlockMat::identity(&dims), trace_rhs));

    Ok(GuessingProgram {
        game: game.clone(),
        gen_inputs,
        level,
        relaxation: relax,
        sdp,
        score_rows,
        norm_row,
        identity_row,
        num_guess_blocks,
        score_slack: slack,
    })
}

fn run_solver(prog: &GuessingProgram, opts: &SolveOptions) -> Result<SdpSolution, DigpError> {
    let sol = solve(&prog.sdp, opts)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        SolveStatus::PrimalInfeasible => Err(DigpError::PrimalInfeasible),
        SolveStatus::DualUnbounded => {
            Err(DigpError::NotConverged(SolveStatus::DualUnbounded, f64::NAN))
        }
        SolveStatus::MaxIter => {
            let score = sol
                .primal_residual
                .max(sol.dual_residual)
                .max(sol.gap / (1.0 + sol.primal_value.abs()));
            if score <= MAX_ITER_ACCEPT {
                Ok(sol)
            } else {
                Err(DigpError::NotConverged(SolveStatus::MaxIter, score))
            }
        }
    }
}

/// Relaxed guessing probability p_guess at `omega`: exact score equalities,
/// primal value (advisory — certified statements use the repaired dual).
pub fn guessing_probability(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    omega: &ScoreDistribution,
) -> Result<f64, DigpError> {
    let prog = assemble_with(game, gen_inputs, level, omega, AssembleOptions { score_slack: 0.0 })?;
    let sol = run_solver(&prog, &SolveOptions::default())?;
    Ok(sol.primal_value)
}

/// Solve at parameter `v` and extract a repaired, exactly feasible dual point
/// with the default l1 selection.
pub fn dual_certificate(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    v: &ScoreDistribution,
) -> Result<DualCertificate, DigpError> {
    dual_certificate_with(game, gen_inputs, level, v, AssembleOptions::default())
}

pub fn dual_certificate_with(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    v: &ScoreDistribution,
    opts: AssembleOptions,
) -> Result<DualCertificate, DigpError> {
    let prog = assemble_with(game, gen_inputs, level, v, opts)?;
    let sol = run_solver(&prog, &SolveOptions::default())?;
    certificate_from_solution(&prog, &sol, v)
}

pub fn certificate_from_solution(
    prog: &GuessingProgram,
    sol: &SdpSolution,
    v: &ScoreDistribution,
) -> Result<DualCertificate, DigpError> {
    let repaired = dual_feasibility_repair(&prog.sdp, sol, prog.identity_row, 1e-12)?;
    let trace_rhs = prog.sdp.constraints[prog.identity_row].1;
    // Multipliers of the normalization and trace rows fold uniformly into the
    // score components (score vectors sum to one); the interval rows add the
    // l1 selection charge.
    let mut fold = repaired.y[prog.norm_row] + trace_rhs * repaired.y[prog.identity_row];
    for rows in &prog.score_rows {
        if let ScoreRows::Interval { upper, lower } = rows {
            fold += prog.score_slack * (repaired.y[*upper] - repaired.y[*lower]);
        }
    }
    let lambda: Vec<f64> = prog
        .score_rows
        .iter()
        .map(|rows| {
            let raw = match rows {
                ScoreRows::Dropped => 0.0,
                ScoreRows::Equality(r) => repaired.y[*r],
                ScoreRows::Interval { upper, lower } => repaired.y[*upper] + repaired.y[*lower],
            };
            raw + fold
        })
        .collect();
    let dual_value: f64 = lambda.iter().zip(v.scores()).map(|(l, w)| l * w).sum();
    let lambda_max = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DualCertificate {
        lambda,
        v: v.clone(),
        level_max_len: prog.level.max_len,
        level_plus_ab: prog.level.plus_ab,
        dual_value,
        feasibility_margin: repaired.min_slack_eig_after,
        lambda_max,
        lambda_min,
    })
}

/// Certificates for a batch of parameter points, solved in parallel.
pub fn dual_certificates_batch(
    game: &Game,
    gen_inputs: (usize, usize),
    level: LevelSpec,
    vs: &[ScoreDistribution],
) -> Vec<Result<DualCertificate, DigpError>> {
    use rayon::prelude::*;
    vs.par_iter()
        .map(|v| dual_certificate(game, gen_inputs, level, v))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub lambda_dot_v: f64,
    pub p_guess: f64,
    /// lambda . v' - p_guess(v'); negative beyond tolerance rejects the
    /// certificate.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct CertificateAudit {
    pub results: Vec<ProbeResult>,
    pub worst_margin: f64,
    pub passed: bool,
}

/// Check lambda . v' >= p_guess(v') - tol on each probe by re-solving the
/// primal there. A violation signals a solver or repair bug, not bad luck.
pub fn verify_certificate(
    game: &Game,
    gen_inputs: (usize, usize),
    cert: &DualCertificate,
    probes: &[ScoreDistribution],
    tol: f64,
) -> Result<CertificateAudit, DigpError> {
    use rayon::prelude::*;
    let level = cert.level();
    let results: Result<Vec<ProbeResult>, DigpError> = probes
        .par_iter()
        .map(|probe| {
            let p = guessing_probability(game, gen_inputs, level, probe)?;
            let lv = cert.lambda_dot(probe);
            Ok(ProbeResult { lambda_dot_v: lv, p_guess: p, margin: lv - p })
        })
        .collect();
    let results = results?;
    let worst_margin = results.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(CertificateAudit { passed: worst_margin >= -tol, results, worst_margin })
}

/// Score vectors of all local deterministic strategies.
pub fn deterministic_score_vectors(game: &Game) -> Vec<ScoreDistribution> {
    let mut out = Vec::new();
    let a_strategies = game.a_size.pow(game.x_size as u32);
    let b_strategies = game.b_size.pow(game.y_size as u32);
    for fa in 0..a_strategies {
        let a_of_x: Vec<usize> = (0..game.x_size)
            .map(|x| (fa / game.a_size.pow(x as u32)) % game.a_size)
            .collect();
        for fb in 0..b_strategies {
            let b_of_y: Vec<usize> = (0..game.y_size)
                .map(|y| (fb / game.b_size.pow(y as u32)) % game.b_size)
                .collect();
            let mut values = vec![0.0; game.num_scores()];
            for x in 0..game.x_size {
                for y in 0..game.y_size {
                    let w = game.mu(x, y);
                    if w > 0.0 {
                        values[game.score(a_of_x[x], b_of_y[y], x, y)] += w;
                    }
                }
            }
            out.push(ScoreDistribution::new(values, false));
        }
    }
    out
}

/// Random quantum-achievable score vectors from random binary-output qubit
/// setups (only valid for games with binary outputs).
pub fn random_quantum_score_vectors(game: &Game, count: usize, seed: u64) -> Vec<ScoreDistribution> {
    assert_eq!(game.a_size, 2);
    assert_eq!(game.b_size, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let setup = QubitSetup {
            theta: rng.gen_range(0.1..=std::f64::consts::FRAC_PI_4),
            alice_angles: (0..game.x_size).map(|_| rng.gen_range(-3.1..3.1)).collect(),
            bob_angles: (0..game.y_size).map(|_| rng.gen_range(-3.1..3.1)).collect(),
            eta: rng.gen_range(0.6..=1.0),
            werner: rng.gen_range(0.7..=1.0),
        };
        let beh = behaviour_from_setup(&setup).expect("random setup in range");
        out.push(game.expected_score_distribution(&beh).expect("alphabets match"));
    }
    out
}

/// The standard probe family for certificate audits: the parameter point,
/// Dirichlet mixtures of quantum-achievable score vectors, and every
/// deterministic-strategy score vector when the input alphabets are small.
pub fn standard_probes(game: &Game, v: &ScoreDistribution, seed: u64) -> Vec<ScoreDistribution> {
    let mut probes = vec![v.clone()];
    let pool = random_quantum_score_vectors(game, 6, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let dirichlet = rand_distr::Dirichlet::new(&vec![1.0; pool.len()]).expect("valid alphas");
    for _ in 0..20 {
        let weights: Vec<f64> = rng.sample(&dirichlet);
        let mut values = vec![0.0; game.num_scores()];
        for (w, q) in weights.iter().zip(pool.iter()) {
            for (dst, src) in values.iter_mut().zip(q.values.iter()) {
                *dst += w * src;
            }
        }
        probes.push(ScoreDistribution::new(values, false));
    }
    if game.x_size * game.y_size <= 6 {
        probes.extend(deterministic_score_vectors(game));
    }
    probes
}
