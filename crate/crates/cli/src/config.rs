//! Run configuration: a single JSON file validated against the module
//! preconditions before any solve. All floats are decimal, angles radians.

use anyhow::{bail, Context, Result};
use direx_core::behaviour::{behaviour_from_setup, Behaviour, QubitSetup};
use direx_core::eat::ProtocolParams;
use direx_core::game::{Game, ScoreDistribution};
use direx_core::npa::LevelSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameSpec,
    #[serde(default)]
    pub device: Option<DeviceSpec>,
    /// Expected score distribution; defaults to the device's distribution.
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    /// Min-tradeoff parameter points to evaluate in addition to omega.
    #[serde(default)]
    pub v_choices: Vec<Vec<f64>>,
    #[serde(default)]
    pub generation_inputs: Option<(usize, usize)>,
    #[serde(default = "default_level")]
    pub level: String,
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    /// Report only -log2(lambda.omega), skipping the finite-size analysis.
    #[serde(default)]
    pub asymptotic_only: bool,
}

fn default_level() -> String {
    "2".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSpec {
    ChshExtended,
    Correlator { x_size: usize, y_size: usize },
    Empirical { x_size: usize, y_size: usize, mu: Option<Vec<Vec<f64>>> },
    Custom(Box<Game>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceSpec {
    Qubit(QubitSetup),
    Behaviour(Box<Behaviour>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub n: u64,
    pub gamma: f64,
    /// Explicit confidence widths, or none to derive from the target below.
    #[serde(default)]
    pub delta: Option<Vec<f64>>,
    /// Per-term completeness target used when delta is absent.
    #[serde(default)]
    pub delta_eps_comp_target: Option<f64>,
    pub eps_s: f64,
    pub eps_eat: f64,
    pub eps_ext: f64,
    #[serde(default)]
    pub ell_ext: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// One of "eta", "theta", "werner".
    pub parameter: String,
    pub grid: Vec<f64>,
    #[serde(default = "default_true")]
    pub optimize_setup: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Central-difference step on the simplex tangent.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_opt_seed")]
    pub seed: u64,
}

fn default_restarts() -> usize {
    3
}
fn default_step() -> f64 {
    1e-4
}
fn default_iters() -> usize {
    12
}
fn default_tol() -> f64 {
    1e-6
}
fn default_opt_seed() -> u64 {
    7
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            step: default_step(),
            iters: default_iters(),
            tolerance: default_tol(),
            seed: default_opt_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    pub seed_source: SeedSource,
    /// Maximum seed bits per RIA block.
    #[serde(default = "default_k_max")]
    pub k_max_per_block: usize,
    #[serde(default = "default_block_len")]
    pub block_len: u64,
    #[serde(default)]
    pub keep_round_log: bool,
    /// Extractor seed PRNG (stub extraction is non-cryptographic anyway).
    #[serde(default = "default_master_seed")]
    pub extractor_seed: u64,
}

fn default_master_seed() -> u64 {
    1
}
fn default_k_max() -> usize {
    1 << 20
}
fn default_block_len() -> u64 {
    4096
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    /// Deterministic pseudorandom bits; testing only, not cryptographic.
    Prng { seed: u64 },
    /// Raw bit file, most significant bit of each byte first.
    File { path: String },
}

/// Everything resolved and validated, ready for a command.
pub struct Resolved {
    pub config: RunConfig,
    pub game: Game,
    pub device: Option<QubitSetup>,
    pub behaviour: Option<Behaviour>,
    pub omega: Option<ScoreDistribution>,
    pub gen_inputs: (usize, usize),
    pub level: LevelSpec,
    pub params: Option<ProtocolParams>,
}

pub fn load(path: &Path, level_override: Option<&str>) -> Result<Resolved> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text).context("parsing config")?;
    resolve(config, level_override)
}

pub fn resolve(config: RunConfig, level_override: Option<&str>) -> Result<Resolved> {
    let game = match &config.game {
        GameSpec::ChshExtended => Game::chsh_extended(),
        GameSpec::Correlator { x_size, y_size } => {
            if *x_size == 0 || *y_size == 0 {
                bail!("correlator game needs nonempty alphabets");
            }
            Game::correlator(*x_size, *y_size)
        }
        GameSpec::Empirical { x_size, y_size, mu } => {
            let mu_flat = match mu {
                Some(rows) => rows.iter().flatten().copied().collect(),
                None => vec![1.0 / (x_size * y_size) as f64; x_size * y_size],
            };
            Game::empirical_behaviour(*x_size, *y_size, mu_flat)?
        }
        GameSpec::Custom(g) => (**g).clone(),
    };

    let gen_inputs = config.generation_inputs.unwrap_or_else(|| default_gen_inputs(&config.game, &game));
    if gen_inputs.0 >= game.x_size || gen_inputs.1 >= game.y_size {
        bail!("generation inputs {:?} out of range", gen_inputs);
    }

    let level = LevelSpec::parse(level_override.unwrap_or(&config.level))?;

    let (device, behaviour) = match &config.device {
        Some(DeviceSpec::Qubit(setup)) => {
            if setup.alice_angles.len() != game.x_size || setup.bob_angles.len() != game.y_size {
                bail!(
                    "qubit setup has {}x{} angles, game needs {}x{}",
                    setup.alice_angles.len(),
                    setup.bob_angles.len(),
                    game.x_size,
                    game.y_size
                );
            }
            let b = behaviour_from_setup(setup)?;
            (Some(setup.clone()), Some(b))
        }
        Some(DeviceSpec::Behaviour(b)) => (None, Some((**b).clone())),
        None => (None, None),
    };

    let omega = match (&config.omega, &behaviour) {
        (Some(values), _) => {
            if values.len() != game.num_scores() {
                bail!("omega has {} entries, game has {} scores", values.len(), game.num_scores());
            }
            Some(ScoreDistribution::new(values.clone(), false))
        }
        (None, Some(b)) => Some(game.expected_score_distribution(b)?),
        (None, None) => None,
    };

    let params = build_params(&config.protocol, &game, omega.as_ref())?;

    for v in &config.v_choices {
        if v.len() != game.num_scores() {
            bail!("v_choice has {} entries, game has {} scores", v.len(), game.num_scores());
        }
    }
    if let Some(sweep) = &config.sweep {
        if !matches!(sweep.parameter.as_str(), "eta" | "theta" | "werner") {
            bail!("sweep parameter must be eta, theta or werner");
        }
        if sweep.grid.is_empty() {
            bail!("sweep grid is empty");
        }
    }

    Ok(Resolved { config, game, device, behaviour, omega, gen_inputs, level, params })
}

fn default_gen_inputs(spec: &GameSpec, game: &Game) -> (usize, usize) {
    match spec {
        GameSpec::ChshExtended => (1, 2),
        _ => (game.x_size - 1, game.y_size - 1),
    }
}

fn build_params(
    spec: &ProtocolSpec,
    game: &Game,
    omega: Option<&ScoreDistribution>,
) -> Result<Option<ProtocolParams>> {
    let delta = match (&spec.delta, spec.delta_eps_comp_target, omega) {
        (Some(d), _, _) => {
            if d.len() != game.num_scores() {
                bail!("delta has {} entries, game has {} scores", d.len(), game.num_scores());
            }
            Some(d.clone())
        }
        (None, Some(target), Some(omega)) => Some(direx_core::eat::delta_for_target(
            omega,
            spec.gamma,
            spec.n,
            target,
        )?),
        // A sweep derives omega (and so delta) per grid point.
        (None, Some(_), None) => None,
        (None, None, _) => None,
    };
    Ok(delta.map(|delta| ProtocolParams {
        n: spec.n,
        gamma: spec.gamma,
        delta,
        eps_s: spec.eps_s,
        eps_eat: spec.eps_eat,
        eps_ext: spec.eps_ext,
        ell_ext: spec.ell_ext,
        ab_size: game.a_size * game.b_size,
    }))
}
