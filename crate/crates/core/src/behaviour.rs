//! Device strategies: conditional distributions p(a,b|x,y) and qubit models
//! with partial entanglement, planar projective measurements, detection
//! inefficiency and Werner noise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BehaviourError {
    #[error("probability vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("p({a},{b}|{x},{y}) = {value} out of [0,1]")]
    Range { a: usize, b: usize, x: usize, y: usize, value: f64 },
    #[error("outputs on input ({x},{y}) sum to {sum}, not 1")]
    Normalization { x: usize, y: usize, sum: f64 },
    #[error("no-signalling violated: max marginal spread {spread} exceeds {tol}")]
    Signalling { spread: f64, tol: f64 },
    #[error("invalid qubit setup: {0}")]
    Setup(String),
}

/// Conditional distribution p(a,b|x,y) stored as a flat vector indexed
/// (a,b,x,y), a-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behaviour {
    pub a_size: usize,
    pub b_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    p: Vec<f64>,
}

pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const NO_SIGNALLING_TOL: f64 = 1e-10;

impl Behaviour {
    pub fn new(
        a_size: usize,
        b_size: usize,
        x_size: usize,
        y_size: usize,
        p: Vec<f64>,
    ) -> Result<Self, BehaviourError> {
        let expected = a_size * b_size * x_size * y_size;
        if p.len() != expected {
            return Err(BehaviourError::Length { got: p.len(), expected });
        }
        let b = Self { a_size, b_size, x_size, y_size, p };
        for x in 0..x_size {
            for y in 0..y_size {
                let mut sum = 0.0;
                for a in 0..a_size {
                    for bb in 0..b_size {
                        let v = b.prob(a, bb, x, y);
                        if !(-1e-15..=1.0 + 1e-12).contains(&v) {
                            return Err(BehaviourError::Range { a, b: bb, x, y, value: v });
                        }
                        sum += v;
                    }
                }
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(BehaviourError::Normalization { x, y, sum });
                }
            }
        }
        let report = b.no_signalling_report();
        if report.max_spread() > NO_SIGNALLING_TOL {
            return Err(BehaviourError::Signalling {
                spread: report.max_spread(),
                tol: NO_SIGNALLING_TOL,
            });
        }
        Ok(b)
    }

    /// Construct without the no-signalling check (test fixtures for the
    /// validator itself).
    pub fn new_unchecked(
        a_size: usize,
        b_size: usize,
        x_size: usize,
        y_size: usize,
        p: Vec<f64>,
    ) -> Self {
        Self { a_size, b_size, x_size, y_size, p }
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((a * self.b_size + b) * self.x_size + x) * self.y_size + y
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.idx(a, b, x, y)]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    /// Alice marginal p(a|x), computed from y = 0 (no-signalling makes the
    /// choice irrelevant up to tolerance).
    pub fn marginal_a(&self, a: usize, x: usize) -> f64 {
        (0..self.b_size).map(|b| self.prob(a, b, x, 0)).sum()
    }

    pub fn marginal_b(&self, b: usize, y: usize) -> f64 {
        (0..self.a_size).map(|a| self.prob(a, b, 0, y)).sum()
    }

    /// Max over parties of the spread of one party's marginal as the other
    /// party's input varies; the no-signalling defect.
    pub fn no_signalling_report(&self) -> NoSignallingReport {
        let mut spread_b_over_x: f64 = 0.0; // sum_a p(a,b|x,y) should not depend on x
        for b in 0..self.b_size {
            for y in 0..self.y_size {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for x in 0..self.x_size {
                    let m: f64 = (0..self.a_size).map(|a| self.prob(a, b, x, y)).sum();
                    lo = lo.min(m);
                    hi = hi.max(m);
                }
                spread_b_over_x = spread_b_over_x.max(hi - lo);
            }
        }
        let mut spread_a_over_y: f64 = 0.0;
        for a in 0..self.a_size {
            for x in 0..self.x_size {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for y in 0..self.y_size {
                    let m: f64 = (0..self.b_size).map(|b| self.prob(a, b, x, y)).sum();
                    lo = lo.min(m);
                    hi = hi.max(m);
                }
                spread_a_over_y = spread_a_over_y.max(hi - lo);
            }
        }
        NoSignallingReport { spread_b_over_x, spread_a_over_y }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NoSignallingReport {
    /// Spread of Bob's marginal as Alice's input varies.
    pub spread_b_over_x: f64,
    /// Spread of Alice's marginal as Bob's input varies.
    pub spread_a_over_y: f64,
}

impl NoSignallingReport {
    pub fn max_spread(&self) -> f64 {
        self.spread_b_over_x.max(self.spread_a_over_y)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_spread() <= tol
    }
}

pub fn validate_no_signalling(p: &Behaviour, tol: f64) -> (NoSignallingReport, bool) {
    let report = p.no_signalling_report();
    let pass = report.passes(tol);
    (report, pass)
}

/// Two-qubit implementation: partially entangled state
/// cos(theta)|00> + sin(theta)|11>, planar projective measurements, detector
/// efficiency eta (no-click recorded as outcome 0) and Werner mixing weight
/// (1 = pure state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitSetup {
    pub theta: f64,
    pub alice_angles: Vec<f64>,
    pub bob_angles: Vec<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_werner")]
    pub werner: f64,
}

fn default_eta() -> f64 {
    1.0
}

fn default_werner() -> f64 {
    1.0
}

impl QubitSetup {
    pub fn validate(&self) -> Result<(), BehaviourError> {
        if !(self.theta > 0.0 && self.theta <= std::f64::consts::FRAC_PI_4) {
            return Err(BehaviourError::Setup(format!("theta {} outside (0, pi/4]", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(BehaviourError::Setup(format!("eta {} outside [0,1]", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.werner) {
            return Err(BehaviourError::Setup(format!("werner {} outside [0,1]", self.werner)));
        }
        if self.alice_angles.is_empty() || self.bob_angles.is_empty() {
            return Err(BehaviourError::Setup("empty angle list".into()));
        }
        Ok(())
    }
}

/// Dense 2x2 and 4x4 real symmetric matrix helpers for the qubit model. The
/// state and all planar projectors are real, so real arithmetic is exact.
pub mod qubit {
    /// Projector onto the +1 eigenvector of cos(phi) sigma_z + sin(phi) sigma_x.
    pub fn projector(phi: f64) -> [[f64; 2]; 2] {
        let c = (phi / 2.0).cos();
        let s = (phi / 2.0).sin();
        [[c * c, c * s], [c * s, s * s]]
    }

    /// Density matrix of the Werner-mixed partially entangled state.
    pub fn state_density(theta: f64, werner: f64) -> [[f64; 4]; 4] {
        let c = theta.cos();
        let s = theta.sin();
        // |psi> = c|00> + s|11> in basis (00,01,10,11)
        let psi = [c, 0.0, 0.0, s];
        let mut rho = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = werner * psi[i] * psi[j];
            }
        }
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] += (1.0 - werner) * 0.25;
        }
        rho
    }

    pub fn kron2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    pub fn trace_product(rho: &[[f64; 4]; 4], m: &[[f64; 4]; 4]) -> f64 {
        let mut t = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                t += rho[i][j] * m[j][i];
            }
        }
        t
    }

    pub const IDENTITY2: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

    pub fn sub2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
    }

    pub fn scale_add2(s1: f64, a: &[[f64; 2]; 2], s2: f64, b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
        [
            [s1 * a[0][0] + s2 * b[0][0], s1 * a[0][1] + s2 * b[0][1]],
            [s1 * a[1][0] + s2 * b[1][0], s1 * a[1][1] + s2 * b[1][1]],
        ]
    }
}

/// Build the behaviour of a qubit setup: Born rule on the Werner-mixed state,
/// then the detector model folding no-clicks into outcome 0 with independent
/// per-party efficiency.
pub fn behaviour_from_setup(s: &QubitSetup) -> Result<Behaviour, BehaviourError> {
    s.validate()?;
    let x_size = s.alice_angles.len();
    let y_size = s.bob_angles.len();
    let rho = qubit::state_density(s.theta, s.werner);
    let eta = s.eta;
    let mut p = vec![0.0; 4 * x_size * y_size];
    for (x, &phi_a) in s.alice_angles.iter().enumerate() {
        let proj_a = qubit::projector(phi_a);
        // Detector-folded effects: no-click is recorded as outcome 0.
        let e_a = [
            qubit::scale_add2(eta, &proj_a, 1.0 - eta, &qubit::IDENTITY2),
            {
                let rest = qubit::sub2(&qubit::IDENTITY2, &proj_a);
                qubit::scale_add2(eta, &rest, 0.0, &qubit::IDENTITY2)
            },
        ];
        for (y, &phi_b) in s.bob_angles.iter().enumerate() {
            let proj_b = qubit::projector(phi_b);
            let e_b = [
                qubit::scale_add2(eta, &proj_b, 1.0 - eta, &qubit::IDENTITY2),
                {
                    let rest = qubit::sub2(&qubit::IDENTITY2, &proj_b);
                    qubit::scale_add2(eta, &rest, 0.0, &qubit::IDENTITY2)
                },
            ];
            for a in 0..2 {
                for b in 0..2 {
                    let m = qubit::kron2(&e_a[a], &e_b[b]);
                    let v = qubit::trace_product(&rho, &m);
                    p[((a * 2 + b) * x_size + x) * y_size + y] = v.clamp(0.0, 1.0);
                }
            }
        }
    }
    Behaviour::new(2, 2, x_size, y_size, p)
}

/// The maximally entangled implementation with measurement angles achieving
/// Tsirelson's bound plus perfect alignment on the extra input pair.
pub fn ideal_chsh_setup() -> QubitSetup {
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::FRAC_PI_4;
    QubitSetup {
        theta: FRAC_PI_4,
        alice_angles: vec![0.0, FRAC_PI_2],
        bob_angles: vec![FRAC_PI_4, -FRAC_PI_4, 0.0],
        eta: 1.0,
        werner: 1.0,
    }
}

pub fn ideal_chsh_behaviour() -> Behaviour {
    behaviour_from_setup(&ideal_chsh_setup()).expect("ideal setup is valid")
}
