//! Min-tradeoff functions built from dual certificates.
//!
//! A feasible dual point lambda bounds the single-round min-entropy through
//! -log2(lambda . q); linearizing that bound at the certificate's parameter
//! point and extending the domain with the no-test symbol gives an affine
//! function on distributions over scores-plus-perp, together with the
//! max/min/variance bounds the entropy accumulation error terms consume.
//! A blocked variant covers protocols that group rounds into variable-length
//! blocks ending at a test or after s_max rounds.

use crate::digp::DualCertificate;
use crate::game::ScoreDistribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtfError {
    #[error("test probability {0} outside (0,1)")]
    GammaRange(f64),
    #[error("certificate value lambda.v = {0} outside (0,1]")]
    CertificateValue(f64),
    #[error("expected a distribution over {expected} entries including the no-test symbol, got {got}")]
    Length { got: usize, expected: usize },
    #[error("lambda.q = {0} is not positive")]
    NonPositive(f64),
    #[error("blocked variant required")]
    NotBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    Round,
    Blocked { s_max: u32, s_bar: f64 },
}

/// Affine min-tradeoff function f_v with its EAT-facing bounds.
///
/// The bounds are stored at build time so downstream entropy accounting never
/// touches lambda directly; vertex evaluation stays available for tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinTradeoff {
    pub cert: DualCertificate,
    pub gamma: f64,
    /// A_v = 1/ln2 - log2(lambda.v)
    pub a_v: f64,
    /// B_v = 1/(lambda.v ln2)
    pub b_v: f64,
    pub variant: Variant,
    /// Maximum over all distributions on scores-plus-perp.
    pub fmax: f64,
    /// Lower bound on the minimum over protocol-respecting distributions.
    pub fmin_bound: f64,
    /// Upper bound on the variance over protocol-respecting distributions.
    pub fvar_bound: f64,
}

/// Expected rounds per block when blocks end at a test or after s_max rounds.
pub fn expected_block_length(gamma: f64, s_max: u32) -> f64 {
    (1.0 - (1.0 - gamma).powi(s_max as i32)) / gamma
}

fn coefficients_at(t: f64) -> Result<(f64, f64), MtfError> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(MtfError::CertificateValue(t));
    }
    let ln2 = std::f64::consts::LN_2;
    Ok((1.0 / ln2 - t.log2(), 1.0 / (t * ln2)))
}

/// Round-by-round min-tradeoff function from a certificate, linearized at
/// the certificate's own value lambda.v.
pub fn build(cert: &DualCertificate, gamma: f64) -> Result<MinTradeoff, MtfError> {
    build_anchored(cert, gamma, cert.dual_value)
}

/// Round-by-round min-tradeoff function with the -log2 linearization taken
/// at an arbitrary anchor in (0,1]. Any anchor yields a valid tradeoff
/// function (a tangent of -log2 lies below it everywhere); anchoring at the
/// score point where the function is finally evaluated maximizes the
/// first-order term.
pub fn build_anchored(
    cert: &DualCertificate,
    gamma: f64,
    anchor: f64,
) -> Result<MinTradeoff, MtfError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(MtfError::GammaRange(gamma));
    }
    let (a_v, b_v) = coefficients_at(anchor)?;
    let spread = cert.lambda_max - cert.lambda_min;
    Ok(MinTradeoff {
        cert: cert.clone(),
        gamma,
        a_v,
        b_v,
        variant: Variant::Round,
        fmax: (1.0 - gamma) * (a_v - b_v * cert.lambda_min),
        fmin_bound: (1.0 - gamma) * (a_v - b_v * cert.lambda_max),
        fvar_bound: (1.0 - gamma).powi(2) * b_v * b_v * spread * spread / gamma,
    })
}

/// Blocked min-tradeoff function: blocks end at a test round or after s_max
/// rounds, and the function acts on one score per block.
pub fn build_blocked(cert: &DualCertificate, gamma: f64, s_max: u32) -> Result<MinTradeoff, MtfError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(MtfError::GammaRange(gamma));
    }
    if s_max == 0 {
        return Err(MtfError::NotBlocked);
    }
    let (a_v, b_v) = coefficients_at(cert.dual_value)?;
    let s_bar = expected_block_length(gamma, s_max);
    let spread = cert.lambda_max - cert.lambda_min;
    Ok(MinTradeoff {
        cert: cert.clone(),
        gamma,
        a_v,
        b_v,
        variant: Variant::Blocked { s_max, s_bar },
        fmax: (1.0 - gamma) * s_bar * (a_v - b_v * cert.lambda_min),
        fmin_bound: (1.0 - gamma) * s_bar * (a_v - b_v * cert.lambda_max),
        fvar_bound: (1.0 - gamma).powi(2) * s_bar * b_v * b_v * spread * spread / gamma,
    })
}

impl MinTradeoff {
    pub fn num_scores(&self) -> usize {
        self.cert.lambda.len()
    }

    /// Vertex value f(e_c) for a score index, or f(e_perp) for `None`.
    pub fn vertex(&self, c: Option<usize>) -> f64 {
        let g = self.gamma;
        let lmin = self.cert.lambda_min;
        match self.variant {
            Variant::Round => match c {
                Some(c) => {
                    let l = self.cert.lambda[c];
                    (1.0 - g) * (self.a_v - self.b_v * (l - (1.0 - g) * lmin) / g)
                }
                None => (1.0 - g) * (self.a_v - self.b_v * lmin),
            },
            Variant::Blocked { s_bar, .. } => match c {
                Some(c) => {
                    let l = self.cert.lambda[c];
                    (1.0 - g)
                        * s_bar
                        * (self.a_v - self.b_v * (l - (1.0 - g * s_bar) * lmin) / (g * s_bar))
                }
                None => (1.0 - g) * s_bar * (self.a_v - self.b_v * lmin),
            },
        }
    }

    /// Affine evaluation on a distribution over scores-plus-perp.
    pub fn evaluate(&self, p: &ScoreDistribution) -> Result<f64, MtfError> {
        let expected = self.num_scores() + 1;
        if !p.includes_perp || p.values.len() != expected {
            return Err(MtfError::Length { got: p.values.len(), expected });
        }
        let mut acc = 0.0;
        for (c, w) in p.scores().iter().enumerate() {
            acc += w * self.vertex(Some(c));
        }
        acc += p.perp().unwrap() * self.vertex(None);
        Ok(acc)
    }
}

/// The tangent bound g_v(q) = (1-gamma)(A_v - B_v lambda.q), valid for every
/// achievable score distribution q; negative values are allowed away from
/// the tangency point (clamping would break affinity).
pub fn tangent_lower_bound(
    cert: &DualCertificate,
    gamma: f64,
    q: &ScoreDistribution,
) -> Result<f64, MtfError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(MtfError::GammaRange(gamma));
    }
    let (a_v, b_v) = coefficients_at(cert.dual_value)?;
    let lq = cert.lambda_dot(q);
    if lq <= 0.0 {
        return Err(MtfError::NonPositive(lq));
    }
    Ok((1.0 - gamma) * (a_v - b_v * lq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fake_cert(lambda: Vec<f64>, v: Vec<f64>) -> DualCertificate {
        let dual_value = lambda.iter().zip(v.iter()).map(|(l, w)| l * w).sum();
        let lambda_max = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lambda_min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        DualCertificate {
            lambda,
            v: ScoreDistribution::new(v, false),
            level_max_len: 2,
            level_plus_ab: false,
            dual_value,
            feasibility_margin: 0.0,
            lambda_max,
            lambda_min,
        }
    }

    fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().ln()).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    #[test]
    fn coefficient_formulas() {
        // lambda.v = 0.5
        let cert = fake_cert(vec![0.5, 0.5, 0.5], vec![0.2, 0.3, 0.5]);
        let f = build(&cert, 0.01).unwrap();
        assert!((f.a_v - (1.0 + 1.0 / std::f64::consts::LN_2)).abs() < 1e-12);
        assert!((f.b_v - 2.0 / std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perp_vertex_matches_formula() {
        let cert = fake_cert(vec![-0.5, 1.0, 0.6], vec![0.3, 0.3, 0.4]);
        let g = 0.05;
        let f = build(&cert, g).unwrap();
        let expected = (1.0 - g) * (f.a_v - f.b_v * (-0.5));
        assert!((f.vertex(None) - expected).abs() < 1e-12);
        assert!((f.fmax - expected).abs() < 1e-12, "perp attains the maximum");
    }

    #[test]
    fn protocol_respecting_evaluation_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cert = fake_cert(vec![-0.3, 0.9, 0.7], vec![0.4, 0.35, 0.25]);
        let g = 5e-3;
        let f = build(&cert, g).unwrap();
        for _ in 0..100 {
            let q = ScoreDistribution::new(random_simplex(&mut rng, 3), false);
            let p = q.protocol_respecting(g);
            let lhs = f.evaluate(&p).unwrap();
            // direct tangent formula, no domain restriction
            let rhs = (1.0 - g) * (f.a_v - f.b_v * cert.lambda_dot(&q));
            assert!((lhs - rhs).abs() < 1e-10, "affine extension identity");
        }
    }

    #[test]
    fn evaluation_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cert = fake_cert(vec![0.2, 0.9, 0.5], vec![0.4, 0.35, 0.25]);
        let f = build(&cert, 0.1).unwrap();
        for _ in 0..50 {
            let p = ScoreDistribution::new(random_simplex(&mut rng, 4), true);
            let q = ScoreDistribution::new(random_simplex(&mut rng, 4), true);
            let alpha: f64 = rng.gen();
            let mix = ScoreDistribution::new(
                p.values
                    .iter()
                    .zip(q.values.iter())
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect(),
                true,
            );
            let direct = f.evaluate(&mix).unwrap();
            let combo = alpha * f.evaluate(&p).unwrap() + (1.0 - alpha) * f.evaluate(&q).unwrap();
            assert!((direct - combo).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_bound_dominated_by_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cert = fake_cert(vec![0.2, 0.9, 0.5], vec![0.4, 0.35, 0.25]);
        let g = 0.01;
        // tangency: q = v recovers the log bound exactly
        let at_v = tangent_lower_bound(&cert, g, &cert.v.clone()).unwrap();
        assert!((at_v - (1.0 - g) * (-cert.dual_value.log2())).abs() < 1e-12);
        for _ in 0..100 {
            let q = ScoreDistribution::new(random_simplex(&mut rng, 3), false);
            let lq = cert.lambda_dot(&q);
            let bound = tangent_lower_bound(&cert, g, &q).unwrap();
            assert!(bound <= (1.0 - g) * (-lq.log2()) + 1e-12);
        }
    }

    #[test]
    fn tangent_can_go_negative_at_high_lambda_q() {
        // A_v <= B_v for lambda.v in (0,1], so lambda.q = 1 gives g <= 0.
        let cert = fake_cert(vec![0.2, 0.9, 0.5], vec![0.4, 0.35, 0.25]);
        let q = ScoreDistribution::new(vec![0.0, 1.0 / 0.9, 0.0], false);
        // lambda.q = 1 exactly (not a distribution, but the functional is affine)
        let mut qv = vec![0.0, 1.0, 0.0];
        qv[1] = 1.0;
        let q1 = ScoreDistribution::new(qv, false); // lambda.q = 0.9
        let _ = q;
        let g = 0.01;
        let b = tangent_lower_bound(&cert, g, &q1).unwrap();
        // with lambda.v = 0.52 and lambda.q = 0.9 the tangent sits below the
        // log curve, close to or under zero
        assert!(b <= (1.0 - g) * (-0.9f64.log2()) + 1e-12);
    }

    #[test]
    fn bounds_dominate_sampled_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cert = fake_cert(vec![-0.8, 1.4, 0.3], vec![0.45, 0.35, 0.2]);
        let g = 0.02;
        let f = build(&cert, g).unwrap();
        for _ in 0..1000 {
            let p = ScoreDistribution::new(random_simplex(&mut rng, 4), true);
            let val = f.evaluate(&p).unwrap();
            assert!(val <= f.fmax + 1e-10, "fmax dominates");
        }
        for _ in 0..1000 {
            let q = ScoreDistribution::new(random_simplex(&mut rng, 3), false);
            let p = q.protocol_respecting(g);
            let val = f.evaluate(&p).unwrap();
            assert!(val >= f.fmin_bound - 1e-10, "fmin bounds protocol-respecting points");
            // sampled variance against the stored bound
            let mut var = 0.0;
            for (c, w) in p.values.iter().enumerate() {
                let vertex = if c < 3 { f.vertex(Some(c)) } else { f.vertex(None) };
                var += w * (vertex - val) * (vertex - val);
            }
            assert!(var <= f.fvar_bound + 1e-9, "variance bound");
        }
    }

    #[test]
    fn blocked_expected_length() {
        assert!((expected_block_length(0.3, 1) - 1.0).abs() < 1e-15);
        // gamma = 5e-3, s_max = ceil(1/gamma) = 200
        let s_bar = expected_block_length(5e-3, 200);
        assert!((s_bar - 126.60843565476652).abs() < 1e-9, "got {s_bar}");
        // s_bar -> 1/gamma as s_max grows
        assert!((expected_block_length(5e-3, 20_000) - 200.0).abs() < 1e-6);
    }

    #[test]
    fn blocked_reduces_to_round_at_smax_one() {
        let cert = fake_cert(vec![-0.8, 1.4, 0.3], vec![0.45, 0.35, 0.2]);
        let g = 0.17;
        let round = build(&cert, g).unwrap();
        let blocked = build_blocked(&cert, g, 1).unwrap();
        assert!((round.fmax - blocked.fmax).abs() < 1e-12);
        assert!((round.fmin_bound - blocked.fmin_bound).abs() < 1e-12);
        assert!((round.fvar_bound - blocked.fvar_bound).abs() < 1e-12);
        for c in [Some(0), Some(1), Some(2), None] {
            assert!((round.vertex(c) - blocked.vertex(c)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cert = fake_cert(vec![0.5; 3], vec![0.4, 0.35, 0.25]);
        assert!(build(&cert, 0.0).is_err());
        assert!(build(&cert, 1.0).is_err());
        let bad = fake_cert(vec![3.0; 3], vec![0.4, 0.35, 0.25]); // lambda.v = 3
        assert!(build(&bad, 0.5).is_err());
        let f = build(&cert, 0.5).unwrap();
        let wrong_len = ScoreDistribution::new(vec![0.5, 0.5], true);
        assert!(f.evaluate(&wrong_len).is_err());
    }
}
