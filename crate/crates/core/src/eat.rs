//! Certified-entropy accounting: accumulated-entropy bounds with their error
//! terms, the second-order parameter search, asymptotic rates, completeness
//! and soundness errors, seed-length estimates, and the legacy blocked bound
//! kept for comparison curves.

use crate::game::ScoreDistribution;
use crate::mtf::{MinTradeoff, Variant};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EatError {
    #[error("beta {0} outside (0,1)")]
    BetaRange(f64),
    #[error("confidence width delta[{k}] = {delta} not inside (0, omega[{k}] = {omega})")]
    DeltaRange { k: usize, delta: f64, omega: f64 },
    #[error("delta has {got} entries, expected {expected}")]
    DeltaLength { got: usize, expected: usize },
    #[error("epsilon parameter {name} = {value} out of range")]
    EpsilonRange { name: &'static str, value: f64 },
    #[error("test probability {0} outside (0,1)")]
    GammaRange(f64),
    #[error("lambda.omega = {0} outside (0,1]: no asymptotic rate")]
    RateDomain(f64),
    #[error("blocked min-tradeoff function required")]
    NotBlocked,
    #[error("min-tradeoff gamma {f_gamma} does not match protocol gamma {p_gamma}")]
    GammaMismatch { f_gamma: f64, p_gamma: f64 },
}

/// All finite-size protocol parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Number of device interactions.
    pub n: u64,
    /// Test-round probability, in (0,1).
    pub gamma: f64,
    /// Confidence interval half-widths per score.
    pub delta: Vec<f64>,
    /// Smoothing parameter.
    pub eps_s: f64,
    /// Entropy accumulation error.
    pub eps_eat: f64,
    /// Extractor error.
    pub eps_ext: f64,
    /// Extractor entropy loss in bits.
    pub ell_ext: f64,
    /// Per-round output alphabet size |A||B|.
    pub ab_size: usize,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), EatError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(EatError::GammaRange(self.gamma));
        }
        for (name, v) in [("eps_s", self.eps_s), ("eps_eat", self.eps_eat)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(EatError::EpsilonRange { name, value: v });
            }
        }
        if !(self.eps_ext > 0.0) {
            return Err(EatError::EpsilonRange { name: "eps_ext", value: self.eps_ext });
        }
        if self.ell_ext < 0.0 {
            return Err(EatError::EpsilonRange { name: "ell_ext", value: self.ell_ext });
        }
        Ok(())
    }

    fn check_delta(&self, omega: &ScoreDistribution) -> Result<(), EatError> {
        let scores = omega.scores();
        if self.delta.len() != scores.len() {
            return Err(EatError::DeltaLength { got: self.delta.len(), expected: scores.len() });
        }
        for (k, (&d, &w)) in self.delta.iter().zip(scores).enumerate() {
            if !(d > 0.0 && d < w) {
                return Err(EatError::DeltaRange { k, delta: d, omega: w });
            }
        }
        Ok(())
    }
}

/// One full rate evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub beta: f64,
    pub eps_v: f64,
    pub eps_k: f64,
    pub eps_omega: f64,
    /// Certified smooth min-entropy of the whole run, in bits.
    pub entropy_bound_bits: f64,
    pub rate_per_round: f64,
    /// -log2(lambda.omega): the infinite-n, vanishing-delta limit.
    pub asymptotic_rate: f64,
    /// max(0, floor(entropy - extractor loss)).
    pub output_length: u64,
    /// Set when lambda.(omega - delta_sgn) leaves (0,1]; the bound is
    /// reported as zero entropy rather than a negative or invalid value.
    pub invalid_corner: bool,
}

/// delta with components signed against lambda: worst-case corner of the
/// acceptance window.
pub fn delta_sgn(delta: &[f64], lambda: &[f64]) -> Vec<f64> {
    delta
        .iter()
        .zip(lambda.iter())
        .map(|(&d, &l)| {
            let s = if l > 0.0 {
                -1.0
            } else if l < 0.0 {
                1.0
            } else {
                0.0
            };
            d * s
        })
        .collect()
}

/// log2(2 a^(2s) + 1) without overflowing for large block alphabets.
fn log2_alphabet_var_term(ab_size: usize, s_max: u32) -> f64 {
    let t = 2.0 * s_max as f64 * (ab_size as f64).log2();
    if t > 50.0 {
        // log2(2^(t+1) (1 + 2^-(t+1))) = t + 1 + O(2^-t)
        t + 1.0
    } else {
        (2.0 * (ab_size as f64).powf(2.0 * s_max as f64) + 1.0).log2()
    }
}

/// ln^3(2^t + e^2) without overflow.
fn ln_cubed(t: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    if t > 60.0 {
        (t * ln2).powi(3)
    } else {
        (2f64.powf(t) + std::f64::consts::E.powi(2)).ln().powi(3)
    }
}

/// The two per-unit error terms and the 1/beta coefficient of the third.
///
/// Returns (eps_v, eps_k, eps_omega_coeff); the caller multiplies the last by
/// 1 - 2 log2(eps_eat * eps_s).
pub fn error_terms(beta: f64, f: &MinTradeoff, ab_size: usize) -> Result<(f64, f64, f64), EatError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(EatError::BetaRange(beta));
    }
    let ln2 = std::f64::consts::LN_2;
    let (log_ab, var_term) = match f.variant {
        Variant::Round => ((ab_size as f64).log2(), log2_alphabet_var_term(ab_size, 1)),
        Variant::Blocked { s_max, .. } => (
            s_max as f64 * (ab_size as f64).log2(),
            log2_alphabet_var_term(ab_size, s_max),
        ),
    };
    let eps_v = beta * ln2 / 2.0 * (var_term + (f.fvar_bound + 2.0).sqrt()).powi(2);
    let spread = f.fmax - f.fmin_bound;
    let t = log_ab + spread;
    let pow = 2f64.powf(beta * t); // beta is tiny at any useful operating point
    let eps_k = beta * beta / (6.0 * (1.0 - beta).powi(3) * ln2) * pow * ln_cubed(t);
    Ok((eps_v, eps_k, 1.0 / beta))
}

fn asymptotic_from(f: &MinTradeoff, omega: &ScoreDistribution) -> f64 {
    let t = f.cert.lambda_dot(omega);
    if t > 0.0 && t <= 1.0 + 1e-9 {
        -t.min(1.0).log2()
    } else {
        f64::NAN
    }
}

/// Total certified smooth min-entropy of an n-round run at a fixed beta.
pub fn certified_entropy(
    params: &ProtocolParams,
    f: &MinTradeoff,
    omega: &ScoreDistribution,
    beta: f64,
) -> Result<RateReport, EatError> {
    params.validate()?;
    params.check_delta(omega)?;
    if (params.gamma - f.gamma).abs() > 1e-12 {
        return Err(EatError::GammaMismatch { f_gamma: f.gamma, p_gamma: params.gamma });
    }
    let n = params.n as f64;
    let gamma = params.gamma;
    let dsgn = delta_sgn(&params.delta, &f.cert.lambda);
    let corner: f64 = f
        .cert
        .lambda
        .iter()
        .zip(omega.scores().iter().zip(dsgn.iter()))
        .map(|(&l, (&w, &d))| l * (w - d))
        .sum();
    let asymptotic = asymptotic_from(f, omega);

    let invalid = !(corner > 0.0 && corner <= 1.0);
    let (eps_v, eps_k, eps_omega_coeff) = error_terms(beta, f, params.ab_size)?;
    let eps_omega =
        eps_omega_coeff * (1.0 - 2.0 * (params.eps_eat * params.eps_s).log2());

    let entropy = if invalid {
        0.0
    } else {
        let per_unit_first_order = match f.variant {
            Variant::Round => (1.0 - gamma) * (f.a_v - f.b_v * corner),
            Variant::Blocked { s_bar, .. } => {
                (1.0 - gamma) * s_bar * (f.a_v - f.b_v * corner)
            }
        };
        let units = match f.variant {
            Variant::Round => n,
            Variant::Blocked { s_bar, .. } => n / s_bar,
        };
        units * (per_unit_first_order - eps_v - eps_k) - eps_omega
    };

    let output_length = (entropy - params.ell_ext).floor().max(0.0) as u64;
    Ok(RateReport {
        beta,
        eps_v,
        eps_k,
        eps_omega,
        entropy_bound_bits: entropy,
        rate_per_round: entropy / n,
        asymptotic_rate: asymptotic,
        output_length,
        invalid_corner: invalid,
    })
}

/// Numerically maximize the certified entropy over the second-order
/// parameter: a log-uniform grid scan followed by golden-section refinement
/// around the best grid point.
pub fn optimize_beta(
    params: &ProtocolParams,
    f: &MinTradeoff,
    omega: &ScoreDistribution,
) -> Result<RateReport, EatError> {
    const GRID: usize = 200;
    let lo: f64 = 1e-12;
    let hi: f64 = 1.0 - 1e-6;
    let objective = |beta: f64| -> Result<f64, EatError> {
        Ok(certified_entropy(params, f, omega, beta)?.entropy_bound_bits)
    };
    let mut best_idx = 0;
    let mut best_val = f64::NEG_INFINITY;
    let log_lo = lo.ln();
    let log_hi = hi.ln();
    for i in 0..GRID {
        let beta = (log_lo + (log_hi - log_lo) * i as f64 / (GRID - 1) as f64).exp();
        let val = objective(beta)?;
        if val > best_val {
            best_val = val;
            best_idx = i;
        }
    }
    // Golden-section refinement in log space around the best grid point.
    let idx_to_log = |i: f64| log_lo + (log_hi - log_lo) * i / (GRID - 1) as f64;
    let mut a = idx_to_log((best_idx as f64 - 1.0).max(0.0));
    let mut b = idx_to_log((best_idx as f64 + 1.0).min((GRID - 1) as f64));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = objective(x1.exp())?;
    let mut f2 = objective(x2.exp())?;
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = objective(x2.exp())?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = objective(x1.exp())?;
        }
    }
    let beta_star = if f1 > f2 { x1.exp() } else { x2.exp() };
    let refined = certified_entropy(params, f, omega, beta_star)?;
    if refined.entropy_bound_bits >= best_val {
        Ok(refined)
    } else {
        let grid_beta = idx_to_log(best_idx as f64).exp();
        certified_entropy(params, f, omega, grid_beta)
    }
}

/// -log2(lambda.omega): the rate certified in the infinite-n, vanishing
/// test-fraction limit (exactly tangent when the certificate sits at omega).
pub fn asymptotic_rate(
    cert: &crate::digp::DualCertificate,
    omega: &ScoreDistribution,
) -> Result<f64, EatError> {
    let t = cert.lambda_dot(omega);
    if !(t > 0.0 && t <= 1.0 + 1e-9) {
        return Err(EatError::RateDomain(t));
    }
    Ok(-t.min(1.0).log2())
}

/// Probability that an honest i.i.d. device trips the acceptance window:
/// 2 sum_k exp(-gamma delta_k^2 n / (3 omega_k)), clipped to 1.
pub fn completeness_error(
    n: u64,
    gamma: f64,
    omega: &ScoreDistribution,
    delta: &[f64],
) -> Result<f64, EatError> {
    let scores = omega.scores();
    if delta.len() != scores.len() {
        return Err(EatError::DeltaLength { got: delta.len(), expected: scores.len() });
    }
    for (k, (&d, &w)) in delta.iter().zip(scores).enumerate() {
        if !(d > 0.0 && d < w) {
            return Err(EatError::DeltaRange { k, delta: d, omega: w });
        }
    }
    let nf = n as f64;
    let sum: f64 = delta
        .iter()
        .zip(scores)
        .map(|(&d, &w)| (-gamma * d * d * nf / (3.0 * w)).exp())
        .sum();
    Ok((2.0 * sum).min(1.0))
}

/// Per-score confidence widths hitting a per-term completeness target:
/// delta_k = sqrt(3 omega_k ln(2/eps) / (gamma n)).
pub fn delta_for_target(
    omega: &ScoreDistribution,
    gamma: f64,
    n: u64,
    eps_comp_target: f64,
) -> Result<Vec<f64>, EatError> {
    if !(eps_comp_target > 0.0 && eps_comp_target < 1.0) {
        return Err(EatError::EpsilonRange { name: "eps_comp_target", value: eps_comp_target });
    }
    let nf = n as f64;
    let lg = (2.0 / eps_comp_target).ln();
    let mut delta = Vec::with_capacity(omega.scores().len());
    for (k, &w) in omega.scores().iter().enumerate() {
        let d = (3.0 * w * lg / (gamma * nf)).sqrt();
        if d >= w {
            return Err(EatError::DeltaRange { k, delta: d, omega: w });
        }
        delta.push(d);
    }
    Ok(delta)
}

/// max(eps_ext + 2 eps_s, eps_eat).
pub fn soundness_error(params: &ProtocolParams) -> f64 {
    (params.eps_ext + 2.0 * params.eps_s).max(params.eps_eat)
}

/// Expected seed length for input sampling: (gamma H(mu) + h(gamma)) n bits.
pub fn expected_seed_bits(n: u64, gamma: f64, mu: &[f64]) -> f64 {
    let h_mu: f64 = -mu.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>();
    let h_gamma = binary_entropy(gamma);
    (gamma * h_mu + h_gamma) * n as f64
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// The legacy blocked accumulation bound: m f^B(corner) - sqrt(m) eps with
/// per-block alphabet |AB|^{s_max}. Kept for comparison plots against the
/// improved statement.
pub fn dfr16_blocked_entropy(
    params: &ProtocolParams,
    f: &MinTradeoff,
    omega: &ScoreDistribution,
) -> Result<RateReport, EatError> {
    params.validate()?;
    params.check_delta(omega)?;
    let (s_max, s_bar) = match f.variant {
        Variant::Blocked { s_max, s_bar } => (s_max, s_bar),
        Variant::Round => return Err(EatError::NotBlocked),
    };
    if (params.gamma - f.gamma).abs() > 1e-12 {
        return Err(EatError::GammaMismatch { f_gamma: f.gamma, p_gamma: params.gamma });
    }
    let n = params.n as f64;
    let gamma = params.gamma;
    let m = n / s_bar;
    let dsgn = delta_sgn(&params.delta, &f.cert.lambda);
    let corner: f64 = f
        .cert
        .lambda
        .iter()
        .zip(omega.scores().iter().zip(dsgn.iter()))
        .map(|(&l, (&w, &d))| l * (w - d))
        .sum();
    let invalid = !(corner > 0.0 && corner <= 1.0);

    // Gradient sup-norm from the blocked vertex values; the ceiling matches
    // the discrete statement. Potentially loose: no basis convention is
    // fixed, so the full vertex spread is used.
    let mut vmax = f.vertex(None);
    let mut vmin = f.vertex(None);
    for c in 0..f.num_scores() {
        let v = f.vertex(Some(c));
        vmax = vmax.max(v);
        vmin = vmin.min(v);
    }
    let grad = (vmax - vmin).ceil();
    let t_a = s_max as f64 * (params.ab_size as f64).log2();
    let alphabet_term = if t_a > 50.0 {
        1.0 + t_a
    } else {
        (1.0 + 2.0 * (params.ab_size as f64).powf(s_max as f64)).log2()
    };
    let eps = 2.0
        * (alphabet_term + grad)
        * (1.0 - 2.0 * (params.eps_s * params.eps_eat).log2()).sqrt();

    let entropy = if invalid {
        0.0
    } else {
        m * (1.0 - gamma) * s_bar * (f.a_v - f.b_v * corner) - m.sqrt() * eps
    };
    let output_length = (entropy - params.ell_ext).floor().max(0.0) as u64;
    Ok(RateReport {
        beta: f64::NAN,
        eps_v: f64::NAN,
        eps_k: f64::NAN,
        eps_omega: eps,
        entropy_bound_bits: entropy,
        rate_per_round: entropy / n,
        asymptotic_rate: asymptotic_from(f, omega),
        output_length,
        invalid_corner: invalid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digp::DualCertificate;
    use crate::mtf;

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

    fn test_setup() -> (ProtocolParams, MinTradeoff, ScoreDistribution) {
        let cert = fake_cert(vec![-0.2, 0.9, 0.6], vec![0.45, 0.35, 0.2]);
        let gamma = 5e-3;
        let f = mtf::build(&cert, gamma).unwrap();
        let params = ProtocolParams {
            n: 10_000_000_000,
            gamma,
            delta: vec![1e-3; 3],
            eps_s: 1e-8,
            eps_eat: 1e-8,
            eps_ext: 1e-9,
            ell_ext: 0.0,
            ab_size: 4,
        };
        let omega = cert.v.clone();
        (params, f, omega)
    }

    #[test]
    fn delta_sgn_definition() {
        let d = delta_sgn(&[0.1, 0.1, 0.1], &[-2.0, -3.0, 1.0]);
        assert_eq!(d, vec![0.1, 0.1, -0.1]);
        let z = delta_sgn(&[0.1], &[0.0]);
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn signed_corner_never_helps() {
        let (params, f, omega) = test_setup();
        let report = certified_entropy(&params, &f, &omega, 1e-5).unwrap();
        // Zero-delta corner evaluated directly.
        let t0 = f.cert.lambda_dot(&omega);
        let first_order_zero_delta = params.n as f64 * (1.0 - params.gamma) * (f.a_v - f.b_v * t0);
        assert!(
            report.entropy_bound_bits
                <= first_order_zero_delta + 1e-6 * first_order_zero_delta.abs()
        );
    }

    #[test]
    fn eps_v_formula_at_zero_variance() {
        let cert = fake_cert(vec![0.5, 0.5, 0.5], vec![0.45, 0.35, 0.2]); // spread 0
        let f = mtf::build(&cert, 0.01).unwrap();
        assert_eq!(f.fvar_bound, 0.0);
        let beta = 1e-6;
        let (eps_v, _, _) = error_terms(beta, &f, 4).unwrap();
        let expected = beta * std::f64::consts::LN_2 / 2.0
            * (33f64.log2() + 2f64.sqrt()).powi(2);
        assert!((eps_v - expected).abs() < 1e-18);
    }

    #[test]
    fn error_term_scalings_in_beta() {
        let (_, f, _) = test_setup();
        let (v1, k1, o1) = error_terms(1e-6, &f, 4).unwrap();
        let (v2, k2, o2) = error_terms(1e-7, &f, 4).unwrap();
        assert!((v1 / v2 - 10.0).abs() < 1e-6, "eps_v linear in beta");
        assert!((k1 / k2 - 100.0).abs() < 1e-2, "eps_k quadratic in beta");
        assert!((o2 / o1 - 10.0).abs() < 1e-9, "eps_omega inverse in beta");
    }

    #[test]
    fn beta_optimization_beats_samples() {
        let (params, f, omega) = test_setup();
        let best = optimize_beta(&params, &f, &omega).unwrap();
        for i in 0..100 {
            let beta = 10f64.powf(-10.0 + 8.0 * i as f64 / 99.0);
            let r = certified_entropy(&params, &f, &omega, beta).unwrap();
            assert!(best.entropy_bound_bits >= r.entropy_bound_bits - 1e-6);
        }
        // Remark-style scaling: the optimum sits within two decades of
        // sqrt(gamma/n).
        let guess = (params.gamma / params.n as f64).sqrt();
        assert!(best.beta >= 1e-2 * guess && best.beta <= 1e2 * guess, "beta {}", best.beta);
    }

    #[test]
    fn doubling_n_never_hurts() {
        let (mut params, f, omega) = test_setup();
        let mut prev = optimize_beta(&params, &f, &omega).unwrap().entropy_bound_bits;
        for _ in 0..3 {
            params.n *= 2;
            let next = optimize_beta(&params, &f, &omega).unwrap().entropy_bound_bits;
            assert!(next >= prev);
            prev = next;
        }
    }

    #[test]
    fn completeness_formula_and_monotonicity() {
        let omega = ScoreDistribution::new(vec![0.49, 0.4225, 0.0875], false);
        let delta = vec![1e-3; 3];
        assert!(completeness_error(0, 5e-3, &omega, &delta).unwrap() >= 1.0 - 1e-12);
        let e1 = completeness_error(1_000_000_000, 5e-3, &omega, &delta).unwrap();
        let e2 = completeness_error(2_000_000_000, 5e-3, &omega, &delta).unwrap();
        assert!(e2 < e1);
        let wider = vec![2e-3; 3];
        let e3 = completeness_error(1_000_000_000, 5e-3, &omega, &wider).unwrap();
        assert!(e3 < e1);
        // direct evaluation against the formula
        let n = 1e10;
        let direct: f64 = omega
            .scores()
            .iter()
            .map(|&w| (-5e-3 * 1e-6 * n / (3.0 * w)).exp())
            .sum::<f64>()
            * 2.0;
        let e = completeness_error(10_000_000_000, 5e-3, &omega, &delta).unwrap();
        assert!((e - direct).abs() <= 1e-18 + 1e-12 * direct);
    }

    #[test]
    fn delta_for_target_inverts_the_bound() {
        let omega = ScoreDistribution::new(vec![0.49, 0.4225, 0.0875], false);
        let n = 10_000_000_000u64;
        let gamma = 5e-3;
        let target = 1e-12;
        let delta = delta_for_target(&omega, gamma, n, target).unwrap();
        for (&d, &w) in delta.iter().zip(omega.scores()) {
            let term = 2.0 * (-gamma * d * d * n as f64 / (3.0 * w)).exp();
            assert!((term - target).abs() < 1e-24 + 1e-9 * target);
            assert!(d < w);
        }
        // smaller omega_k gives smaller delta_k
        assert!(delta[2] < delta[1] && delta[1] < delta[0]);
        let total = completeness_error(n, gamma, &omega, &delta).unwrap();
        assert!(total <= 3.0 * target * (1.0 + 1e-9));
    }

    #[test]
    fn delta_for_target_fails_at_small_n() {
        let omega = ScoreDistribution::new(vec![0.49, 0.4225, 0.0875], false);
        assert!(delta_for_target(&omega, 5e-3, 100, 1e-12).is_err());
    }

    #[test]
    fn soundness_is_max_of_branches() {
        let mut params = test_setup().0;
        params.eps_ext = 1e-9;
        params.eps_s = 1e-8;
        params.eps_eat = 1e-8;
        assert!((soundness_error(&params) - 2.1e-8).abs() < 1e-15);
        params.eps_eat = 1e-3;
        assert_eq!(soundness_error(&params), 1e-3);
    }

    #[test]
    fn seed_length_examples() {
        let game = crate::game::Game::chsh_extended();
        let bits = expected_seed_bits(10_000_000_000, 5e-3, game.mu_table());
        assert!((bits - 5.5415e8).abs() < 1e6, "got {bits}");
        assert_eq!(expected_seed_bits(1000, 0.0, game.mu_table()), 0.0);
        let full = expected_seed_bits(1000, 1.0, game.mu_table());
        assert!((full - 2000.0).abs() < 1e-9, "gamma = 1 tests every round");
    }

    #[test]
    fn dfr16_requires_blocked() {
        let (params, f, omega) = test_setup();
        assert!(matches!(
            dfr16_blocked_entropy(&params, &f, &omega),
            Err(EatError::NotBlocked)
        ));
    }

    #[test]
    fn dfr16_blocked_behaviour() {
        let (params, _, omega) = test_setup();
        let cert = fake_cert(vec![-0.2, 0.9, 0.6], vec![0.45, 0.35, 0.2]);
        let s_max = (1.0 / params.gamma).ceil() as u32;
        let fb = mtf::build_blocked(&cert, params.gamma, s_max).unwrap();
        let legacy = dfr16_blocked_entropy(&params, &fb, &omega).unwrap();
        let f = mtf::build(&cert, params.gamma).unwrap();
        let improved = optimize_beta(&params, &f, &omega).unwrap();
        assert!(improved.entropy_bound_bits >= legacy.entropy_bound_bits);
        // both carry the same first-order rate
        assert!((improved.asymptotic_rate - legacy.asymptotic_rate).abs() < 1e-12);
    }

    #[test]
    fn invalid_corner_reports_zero() {
        // lambda.omega close to 1 and deltas pushing the corner above 1.
        let cert = fake_cert(vec![0.95, 0.95, 0.95], vec![0.2, 0.3, 0.5]);
        let gamma = 0.01;
        let f = mtf::build(&cert, gamma).unwrap();
        let omega = ScoreDistribution::new(vec![0.2, 0.3, 0.5], false);
        let params = ProtocolParams {
            n: 1000,
            gamma,
            delta: vec![0.1, 0.1, 0.1],
            eps_s: 1e-8,
            eps_eat: 1e-8,
            eps_ext: 1e-9,
            ell_ext: 0.0,
            ab_size: 4,
        };
        let r = certified_entropy(&params, &f, &omega, 1e-4).unwrap();
        assert!(r.invalid_corner);
        assert_eq!(r.entropy_bound_bits, 0.0);
        assert_eq!(r.output_length, 0);
    }
}
