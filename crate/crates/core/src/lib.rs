//! Toolkit for designing and rate-analyzing device-independent randomness
//! expansion protocols.
//!
//! The pipeline, bottom to top:
//!
//! * [`game`] — nonlocal games, score rules and score distributions;
//! * [`behaviour`] — device models: conditional distributions, qubit
//!   implementations with inefficient detectors and Werner noise;
//! * [`npa`] — moment-matrix relaxations of the quantum set;
//! * [`digp`] — the device-independent guessing-probability program and its
//!   dual certificates (built on the [`direx_sdp`] interior-point solver);
//! * [`mtf`] — min-tradeoff functions derived from dual certificates;
//! * [`eat`] — certified-entropy bounds, error terms, completeness and
//!   soundness accounting;
//! * [`seed`] — input sampling via the rounded interval algorithm and seed
//!   length accounting;
//! * [`engine`] — spot-checking protocol simulation, the abort rule, and the
//!   end-to-end certification pipeline.

pub mod behaviour;
pub mod digp;
pub mod eat;
pub mod engine;
pub mod game;
pub mod mtf;
pub mod npa;
pub mod seed;

pub use behaviour::{Behaviour, QubitSetup};
pub use game::{Game, ScoreDistribution};
