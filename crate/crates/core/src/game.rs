//! Nonlocal games: input distributions, scoring rules, and the score
//! distributions induced by behaviours and transcripts.

use crate::behaviour::Behaviour;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("input distribution must be {expected} entries, got {got}")]
    MuLength { got: usize, expected: usize },
    #[error("input distribution sums to {0}, not 1")]
    MuNormalization(f64),
    #[error("input distribution has negative entry at ({x},{y})")]
    MuNegative { x: usize, y: usize },
    #[error("input distribution lacks full support at ({x},{y})")]
    MuSupport { x: usize, y: usize },
    #[error("score rule table must be {expected} entries, got {got}")]
    RuleLength { got: usize, expected: usize },
    #[error("score index {index} out of range ({num_scores} scores)")]
    ScoreRange { index: usize, num_scores: usize },
    #[error("duplicate score name {0}")]
    DuplicateScore(String),
    #[error("behaviour alphabets do not match the game")]
    AlphabetMismatch,
    #[error("score counts sum to {got}, expected n = {n}")]
    CountMismatch { got: u64, n: u64 },
    #[error("distribution over scores has wrong length {got}, expected {expected}")]
    DistributionLength { got: usize, expected: usize },
}

/// A two-player nonlocal game: question alphabets, input distribution, and a
/// total scoring rule mapping (a,b,x,y) to one of an ordered list of scores.
///
/// The declaration order of `score_names` is the canonical score order used
/// by every downstream vector (constraint rows, dual multipliers, confidence
/// widths). The rule is stored as a dense lookup table so games serialize
/// deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameSchema", into = "GameSchema")]
pub struct Game {
    pub x_size: usize,
    pub y_size: usize,
    pub a_size: usize,
    pub b_size: usize,
    /// Row-major over (x, y).
    mu: Vec<f64>,
    score_names: Vec<String>,
    /// Dense table indexed (a,b,x,y), a-major; defined for every tuple.
    rule: Vec<usize>,
}

pub const MU_TOL: f64 = 1e-12;

impl Game {
    pub fn new(
        x_size: usize,
        y_size: usize,
        a_size: usize,
        b_size: usize,
        mu: Vec<f64>,
        score_names: Vec<String>,
        rule: Vec<usize>,
    ) -> Result<Self, GameError> {
        if mu.len() != x_size * y_size {
            return Err(GameError::MuLength { got: mu.len(), expected: x_size * y_size });
        }
        for x in 0..x_size {
            for y in 0..y_size {
                if mu[x * y_size + y] < 0.0 {
                    return Err(GameError::MuNegative { x, y });
                }
            }
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > MU_TOL {
            return Err(GameError::MuNormalization(total));
        }
        let expected = a_size * b_size * x_size * y_size;
        if rule.len() != expected {
            return Err(GameError::RuleLength { got: rule.len(), expected });
        }
        for &s in &rule {
            if s >= score_names.len() {
                return Err(GameError::ScoreRange { index: s, num_scores: score_names.len() });
            }
        }
        for (i, n) in score_names.iter().enumerate() {
            if score_names[..i].contains(n) {
                return Err(GameError::DuplicateScore(n.clone()));
            }
        }
        Ok(Self { x_size, y_size, a_size, b_size, mu, score_names, rule })
    }

    #[inline]
    pub fn mu(&self, x: usize, y: usize) -> f64 {
        self.mu[x * self.y_size + y]
    }

    pub fn mu_table(&self) -> &[f64] {
        &self.mu
    }

    #[inline]
    pub fn score(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        self.rule[((a * self.b_size + b) * self.x_size + x) * self.y_size + y]
    }

    pub fn num_scores(&self) -> usize {
        self.score_names.len()
    }

    pub fn score_names(&self) -> &[String] {
        &self.score_names
    }

    /// Shannon entropy of the input distribution in bits.
    pub fn input_entropy_bits(&self) -> f64 {
        -self
            .mu
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }

    pub fn support(&self) -> usize {
        self.mu.iter().filter(|&&p| p > 0.0).count()
    }

    /// Expected score distribution omega(c) = sum mu(x,y) p(a,b|x,y) over
    /// tuples scoring c.
    pub fn expected_score_distribution(
        &self,
        p: &Behaviour,
    ) -> Result<ScoreDistribution, GameError> {
        if p.a_size != self.a_size
            || p.b_size != self.b_size
            || p.x_size != self.x_size
            || p.y_size != self.y_size
        {
            return Err(GameError::AlphabetMismatch);
        }
        let mut values = vec![0.0; self.num_scores()];
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                let w = self.mu(x, y);
                if w == 0.0 {
                    continue;
                }
                for a in 0..self.a_size {
                    for b in 0..self.b_size {
                        values[self.score(a, b, x, y)] += w * p.prob(a, b, x, y);
                    }
                }
            }
        }
        Ok(ScoreDistribution { values, includes_perp: false })
    }

    /// The extended CHSH game: CHSH on (x,y) in {0,1}^2, an alignment check
    /// on (0,2), scores ordered (chsh, align, other).
    pub fn chsh_extended() -> Self {
        let x_size = 2;
        let y_size = 3;
        let mut mu = vec![0.0; 6];
        for x in 0..2 {
            for y in 0..2 {
                mu[x * 3 + y] = 1.0 / 8.0;
            }
        }
        mu[2] = 0.5; // (x,y) = (0,2)
        let names = vec!["chsh".to_string(), "align".to_string(), "other".to_string()];
        let mut rule = vec![2usize; 2 * 2 * 2 * 3];
        for a in 0..2usize {
            for b in 0..2usize {
                for x in 0..2usize {
                    for y in 0..3usize {
                        let idx = ((a * 2 + b) * 2 + x) * 3 + y;
                        if y != 2 && x * y == (a ^ b) {
                            rule[idx] = 0;
                        } else if (x, y) == (0, 2) && a ^ b == 0 {
                            rule[idx] = 1;
                        } else {
                            rule[idx] = 2;
                        }
                    }
                }
            }
        }
        Self::new(x_size, y_size, 2, 2, mu, names, rule).expect("builtin game is valid")
    }

    /// Reduced tuple set used by the empirical behaviour game for binary
    /// outputs: all joint tuples with a=0, b=0 across inputs, plus one
    /// marginal row per party (b=1 on y=0 and a=1 on x=0).
    pub fn empirical_reduced_tuples(x_size: usize, y_size: usize) -> Vec<(usize, usize, usize, usize)> {
        let mut tuples = Vec::new();
        for x in 0..x_size {
            for y in 0..y_size {
                tuples.push((0, 0, x, y));
            }
        }
        for x in 0..x_size {
            tuples.push((0, 1, x, 0));
        }
        for y in 0..y_size {
            tuples.push((1, 0, 0, y));
        }
        tuples
    }

    /// The empirical behaviour game for binary outputs: one score per tuple
    /// in a reduced set of (a,b,x,y) tuples carrying the behaviour's free
    /// parameters, plus a catch-all score absorbing the redundant tuples.
    pub fn empirical_behaviour(
        x_size: usize,
        y_size: usize,
        mu: Vec<f64>,
    ) -> Result<Self, GameError> {
        if mu.len() != x_size * y_size {
            return Err(GameError::MuLength { got: mu.len(), expected: x_size * y_size });
        }
        for x in 0..x_size {
            for y in 0..y_size {
                if mu[x * y_size + y] <= 0.0 {
                    return Err(GameError::MuSupport { x, y });
                }
            }
        }
        let tuples = Self::empirical_reduced_tuples(x_size, y_size);
        // (|A|-1)|X| + (|B|-1)|Y| + (|A|-1)(|B|-1)|X||Y| free parameters.
        debug_assert_eq!(tuples.len(), (x_size + 1) * (y_size + 1) - 1);
        let mut names: Vec<String> = tuples
            .iter()
            .map(|&(a, b, x, y)| format!("p{a}{b}x{x}y{y}"))
            .collect();
        names.push("rest".to_string());
        let catch_all = names.len() - 1;
        let mut rule = vec![catch_all; 4 * x_size * y_size];
        for (i, &(a, b, x, y)) in tuples.iter().enumerate() {
            rule[((a * 2 + b) * x_size + x) * y_size + y] = i;
        }
        Self::new(x_size, y_size, 2, 2, mu, names, rule)
    }

    /// The joint correlators game: score c_xy when the outcomes agree on
    /// input pair (x,y), one shared score otherwise; uniform inputs.
    pub fn correlator(x_size: usize, y_size: usize) -> Self {
        let mu = vec![1.0 / (x_size * y_size) as f64; x_size * y_size];
        let mut names: Vec<String> = Vec::new();
        for x in 0..x_size {
            for y in 0..y_size {
                names.push(format!("agree_x{x}y{y}"));
            }
        }
        names.push("norm".to_string());
        let norm = names.len() - 1;
        let mut rule = vec![norm; 4 * x_size * y_size];
        for a in 0..2usize {
            for x in 0..x_size {
                for y in 0..y_size {
                    rule[((a * 2 + a) * x_size + x) * y_size + y] = x * y_size + y;
                }
            }
        }
        Self::new(x_size, y_size, 2, 2, mu, names, rule).expect("builtin game is valid")
    }
}

/// Distribution over the score alphabet, optionally extended with the
/// no-test symbol as its final entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub values: Vec<f64>,
    pub includes_perp: bool,
}

impl ScoreDistribution {
    pub fn new(values: Vec<f64>, includes_perp: bool) -> Self {
        Self { values, includes_perp }
    }

    /// Entries over the game scores only.
    pub fn scores(&self) -> &[f64] {
        if self.includes_perp {
            &self.values[..self.values.len() - 1]
        } else {
            &self.values
        }
    }

    pub fn perp(&self) -> Option<f64> {
        self.includes_perp.then(|| *self.values.last().unwrap())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// The protocol-respecting extension (gamma * omega, 1 - gamma).
    pub fn protocol_respecting(&self, gamma: f64) -> ScoreDistribution {
        assert!(!self.includes_perp);
        let mut values: Vec<f64> = self.values.iter().map(|v| gamma * v).collect();
        values.push(1.0 - gamma);
        ScoreDistribution { values, includes_perp: true }
    }
}

/// Empirical frequency distribution F(c) = count(c)/n over scores and the
/// no-test symbol (final entry).
pub fn frequency_distribution(
    score_counts: &[u64],
    n: u64,
) -> Result<ScoreDistribution, GameError> {
    let got: u64 = score_counts.iter().sum();
    if got != n {
        return Err(GameError::CountMismatch { got, n });
    }
    let values = score_counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(ScoreDistribution { values, includes_perp: true })
}

/// Serialized form: mu as a row-major table, scores as an ordered list, rule
/// as a table of (a, b, x, y, score index) entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GameSchema {
    x_size: usize,
    y_size: usize,
    a_size: usize,
    b_size: usize,
    mu: Vec<Vec<f64>>,
    scores: Vec<String>,
    rule: Vec<(usize, usize, usize, usize, usize)>,
}

impl From<Game> for GameSchema {
    fn from(g: Game) -> Self {
        let mu = (0..g.x_size)
            .map(|x| (0..g.y_size).map(|y| g.mu(x, y)).collect())
            .collect();
        let mut rule = Vec::with_capacity(g.rule.len());
        for a in 0..g.a_size {
            for b in 0..g.b_size {
                for x in 0..g.x_size {
                    for y in 0..g.y_size {
                        rule.push((a, b, x, y, g.score(a, b, x, y)));
                    }
                }
            }
        }
        Self {
            x_size: g.x_size,
            y_size: g.y_size,
            a_size: g.a_size,
            b_size: g.b_size,
            mu,
            scores: g.score_names,
            rule,
        }
    }
}

impl TryFrom<GameSchema> for Game {
    type Error = GameError;

    fn try_from(s: GameSchema) -> Result<Self, GameError> {
        let mut mu = Vec::with_capacity(s.x_size * s.y_size);
        for row in &s.mu {
            mu.extend_from_slice(row);
        }
        let expected = s.a_size * s.b_size * s.x_size * s.y_size;
        if s.rule.len() != expected {
            return Err(GameError::RuleLength { got: s.rule.len(), expected });
        }
        let mut rule = vec![usize::MAX; expected];
        for &(a, b, x, y, c) in &s.rule {
            let idx = ((a * s.b_size + b) * s.x_size + x) * s.y_size + y;
            if idx >= expected {
                return Err(GameError::RuleLength { got: idx, expected });
            }
            rule[idx] = c;
        }
        if rule.iter().any(|&c| c == usize::MAX) {
            return Err(GameError::RuleLength { got: s.rule.len(), expected });
        }
        Game::new(s.x_size, s.y_size, s.a_size, s.b_size, mu, s.scores, rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviour::{ideal_chsh_behaviour, Behaviour};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chsh_extended_rule_and_inputs() {
        let g = Game::chsh_extended();
        // x*y = 1 != 0^0 -> other
        assert_eq!(g.score(0, 0, 1, 1), 2);
        // alignment on (0,2)
        assert_eq!(g.score(1, 1, 0, 2), 1);
        assert_eq!(g.mu(1, 2), 0.0);
        assert_eq!(g.mu(0, 2), 0.5);
        assert!((g.input_entropy_bits() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ideal_chsh_score_distribution() {
        let g = Game::chsh_extended();
        let omega = g.expected_score_distribution(&ideal_chsh_behaviour()).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        assert!((omega.values[0] - 0.5 * (0.5 + s2 / 4.0)).abs() < 1e-12);
        assert!((omega.values[1] - 0.5).abs() < 1e-12);
        assert!((omega.values[2] - 0.5 * (0.5 - s2 / 4.0)).abs() < 1e-12);
    }

    fn uniform_behaviour(x_size: usize, y_size: usize) -> Behaviour {
        Behaviour::new(2, 2, x_size, y_size, vec![0.25; 4 * x_size * y_size]).unwrap()
    }

    #[test]
    fn correlator_counts_and_uniform_output() {
        let g = Game::correlator(2, 2);
        assert_eq!(g.num_scores(), 5);
        let omega = g.expected_score_distribution(&uniform_behaviour(2, 2)).unwrap();
        for xy in 0..4 {
            assert!((omega.values[xy] - 1.0 / 8.0).abs() < 1e-15);
        }
        assert!((omega.values[4] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn correlator_perfectly_correlated_has_no_norm_weight() {
        // a = b = 0 always.
        let mut p = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                p[(0 * 2 + x) * 2 + y] = 1.0;
            }
        }
        let beh = Behaviour::new(2, 2, 2, 2, p).unwrap();
        let g = Game::correlator(2, 2);
        let omega = g.expected_score_distribution(&beh).unwrap();
        assert_eq!(omega.values[4], 0.0);
    }

    #[test]
    fn empirical_score_counts() {
        let g23 = Game::empirical_behaviour(2, 3, vec![1.0 / 6.0; 6]).unwrap();
        assert_eq!(g23.num_scores(), 12); // 11 free parameters + catch-all
        let g22 = Game::empirical_behaviour(2, 2, vec![0.25; 4]).unwrap();
        assert_eq!(g22.num_scores(), 9);
        assert!(Game::empirical_behaviour(2, 2, vec![0.5, 0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn empirical_scores_are_joint_probabilities() {
        let g = Game::empirical_behaviour(2, 3, vec![1.0 / 6.0; 6]).unwrap();
        let p = ideal_chsh_behaviour();
        let omega = g.expected_score_distribution(&p).unwrap();
        for (i, &(a, b, x, y)) in Game::empirical_reduced_tuples(2, 3).iter().enumerate() {
            assert!((omega.values[i] - p.prob(a, b, x, y) / 6.0).abs() < 1e-15);
        }
        let rest: f64 = omega.values[..11].iter().sum();
        assert!((omega.values[11] - (1.0 - rest)).abs() < 1e-12);
    }

    #[test]
    fn empirical_reconstruction_round_trip() {
        let g = Game::empirical_behaviour(2, 3, vec![1.0 / 6.0; 6]).unwrap();
        let p = ideal_chsh_behaviour();
        let omega = g.expected_score_distribution(&p).unwrap();
        // Reconstruct the reduced tuple probabilities from scores and rescore.
        let tuples = Game::empirical_reduced_tuples(2, 3);
        for (i, &(a, b, x, y)) in tuples.iter().enumerate() {
            let reconstructed = omega.values[i] / g.mu(x, y);
            assert!((reconstructed - p.prob(a, b, x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_distribution_basics() {
        let f = frequency_distribution(&[1, 1, 0, 2], 4).unwrap();
        assert_eq!(f.values, vec![0.25, 0.25, 0.0, 0.5]);
        assert!(f.includes_perp);
        assert!(frequency_distribution(&[1, 1], 3).is_err());
        let all_perp = frequency_distribution(&[0, 0, 5], 5).unwrap();
        assert_eq!(all_perp.values, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn random_behaviours_give_normalized_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Game::chsh_extended();
        for _ in 0..1000 {
            let s = crate::behaviour::QubitSetup {
                theta: rng.gen_range(0.05..=std::f64::consts::FRAC_PI_4),
                alice_angles: (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                bob_angles: (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                eta: rng.gen_range(0.0..=1.0),
                werner: rng.gen_range(0.0..=1.0),
            };
            let p = crate::behaviour::behaviour_from_setup(&s).unwrap();
            let omega = g.expected_score_distribution(&p).unwrap();
            assert!((omega.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn serialization_preserves_score_order() {
        let g = Game::chsh_extended();
        let json = serde_json::to_string(&g).unwrap();
        let back: Game = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..3 {
                        assert_eq!(g.score(a, b, x, y), back.score(a, b, x, y));
                    }
                }
            }
        }
    }
}
