//! Seed-to-input conversion via the rounded interval algorithm, plus the
//! statistical bounds backing the seed-length accounting.
//!
//! The decoder tracks two nested dyadic intervals in a 64-bit frame: the
//! target interval of the symbol prefix decoded so far, and the seed interval
//! of the bits consumed so far. A symbol is emitted as soon as the seed
//! interval fits inside one of the current symbol subintervals; if the bit
//! budget runs out, the frozen left endpoint selects this and every remaining
//! symbol (round-down truncation). Each symbol's subdivision is floor-
//! quantized in the current frame, so per-symbol targets are the declared
//! quantized distributions and all arithmetic is exact in integers.

use crate::game::Game;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("probabilities must be nonnegative and sum to 1, got total {0}")]
    BadDistribution(f64),
    #[error("bit source exhausted after {0} bits")]
    BitsExhausted(usize),
    #[error("k_max {k_max} too large for exhaustive enumeration (cap {cap})")]
    EnumerationTooLarge { k_max: usize, cap: usize },
    #[error("Chernoff bound requires r <= mu, got r = {r}, mu = {mu}")]
    ChernoffRange { r: f64, mu: f64 },
    #[error("round count n = {n} not divisible into {m} blocks after padding")]
    BlockMismatch { n: u64, m: u64 },
    #[error("test probability {0} outside (0,1)")]
    GammaRange(f64),
}

const FRAME: u128 = 1u128 << 64;
const HALF: u128 = 1u128 << 63;
const QUARTER: u128 = 1u128 << 62;

/// A distribution quantized once to 64-bit dyadic cumulative weights; this
/// quantized object is the target all accounting refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDist {
    /// cum[0] = 0 < ... <= cum[k] = 2^64 (nondecreasing).
    cum: Vec<u128>,
}

impl QuantizedDist {
    pub fn quantize(probs: &[f64]) -> Result<Self, SeedError> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(SeedError::BadDistribution(total));
        }
        let mut cum = Vec::with_capacity(probs.len() + 1);
        cum.push(0u128);
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            let edge = if i + 1 == probs.len() {
                FRAME
            } else {
                ((acc.min(1.0) * FRAME as f64) as u128).min(FRAME)
            };
            let edge = edge.max(*cum.last().unwrap());
            cum.push(edge);
        }
        Ok(Self { cum })
    }

    pub fn num_symbols(&self) -> usize {
        self.cum.len() - 1
    }

    /// The quantized probability of a symbol.
    pub fn prob(&self, i: usize) -> f64 {
        (self.cum[i + 1] - self.cum[i]) as f64 / FRAME as f64
    }

    /// Statistical distance between the quantized target and the real-valued
    /// distribution it replaced (reported separately; < k 2^-64).
    pub fn quantization_distance(&self, probs: &[f64]) -> f64 {
        0.5 * probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - self.prob(i)).abs())
            .sum::<f64>()
    }
}

pub trait BitSource {
    fn next_bit(&mut self) -> Option<bool>;
}

/// Bits from a byte buffer, most significant bit first.
pub struct ByteBits<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteBits<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn bits_read(&self) -> usize {
        self.pos
    }
}

impl BitSource for ByteBits<'_> {
    fn next_bit(&mut self) -> Option<bool> {
        let byte = self.data.get(self.pos / 8)?;
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Some(bit)
    }
}

/// Deterministic pseudorandom bit stream. Testing only: not a cryptographic
/// seed source.
pub struct PrngBits {
    rng: ChaCha8Rng,
    word: u64,
    left: u8,
}

impl PrngBits {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), word: 0, left: 0 }
    }
}

impl BitSource for PrngBits {
    fn next_bit(&mut self) -> Option<bool> {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        self.left -= 1;
        Some((self.word >> self.left) & 1 == 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiaOutcome {
    pub symbols: Vec<usize>,
    pub bits_consumed: usize,
    pub truncated: bool,
}

struct Frame {
    lo: u128,
    hi: u128,
    slo: u128,
    shi: u128,
}

impl Frame {
    fn renormalize(&mut self) {
        loop {
            if self.hi <= HALF {
                self.lo *= 2;
                self.hi *= 2;
                self.slo *= 2;
                self.shi *= 2;
            } else if self.lo >= HALF {
                self.lo = 2 * self.lo - FRAME;
                self.hi = 2 * self.hi - FRAME;
                self.slo = 2 * self.slo - FRAME;
                self.shi = 2 * self.shi - FRAME;
            } else if self.lo >= QUARTER && self.hi <= HALF + QUARTER {
                self.lo = 2 * self.lo - HALF;
                self.hi = 2 * self.hi - HALF;
                self.slo = 2 * self.slo - HALF;
                self.shi = 2 * self.shi - HALF;
            } else {
                return;
            }
        }
    }

    /// Subinterval edges of the current frame under a quantized target;
    /// floor rounding, exact in integers.
    fn edge(&self, dist: &QuantizedDist, i: usize) -> u128 {
        let w = self.hi - self.lo;
        let c = dist.cum[i];
        if w == FRAME {
            self.lo + c
        } else if c == FRAME {
            self.hi
        } else {
            self.lo + ((w * c) >> 64)
        }
    }
}

/// Decode one symbol per provided target from a bit source, consuming at most
/// `k_max` bits total; on exhaustion the frozen left endpoint picks every
/// remaining symbol.
pub fn ria_decode<'a>(
    targets: impl Iterator<Item = &'a QuantizedDist>,
    bits: &mut dyn BitSource,
    k_max: usize,
) -> Result<RiaOutcome, SeedError> {
    let mut f = Frame { lo: 0, hi: FRAME, slo: 0, shi: FRAME };
    let mut used = 0usize;
    let mut truncated = false;
    let mut symbols = Vec::new();

    for dist in targets {
        let k = dist.num_symbols();
        loop {
            if truncated {
                // point mode: locate slo
                let mut chosen = k - 1;
                for i in 0..k {
                    if f.edge(dist, i) <= f.slo && f.slo < f.edge(dist, i + 1) {
                        chosen = i;
                        break;
                    }
                }
                let (lo, hi) = (f.edge(dist, chosen), f.edge(dist, chosen + 1));
                f.lo = lo;
                f.hi = hi;
                f.shi = f.slo + 1;
                f.renormalize();
                f.shi = f.slo + 1;
                symbols.push(chosen);
                break;
            }
            // interval mode: emit when the seed interval fits a subinterval
            let mut emitted = None;
            for i in 0..k {
                let lo_i = f.edge(dist, i);
                let hi_i = f.edge(dist, i + 1);
                if lo_i <= f.slo && f.shi <= hi_i {
                    emitted = Some((i, lo_i, hi_i));
                    break;
                }
                if lo_i > f.slo {
                    break;
                }
            }
            if let Some((i, lo_i, hi_i)) = emitted {
                f.lo = lo_i;
                f.hi = hi_i;
                f.renormalize();
                symbols.push(i);
                break;
            }
            // need another bit
            let width = f.shi - f.slo;
            if used >= k_max || width < 2 {
                truncated = true;
                continue;
            }
            let bit = bits.next_bit().ok_or(SeedError::BitsExhausted(used))?;
            used += 1;
            let mid = f.slo + width / 2;
            if bit {
                f.slo = mid;
            } else {
                f.shi = mid;
            }
        }
    }
    Ok(RiaOutcome { symbols, bits_consumed: used, truncated })
}

/// Exact distribution simulated by the RIA on a single symbol: enumerate all
/// 2^k_max seeds. Test oracle; small alphabets only.
pub fn ria_exact_distribution(
    target: &QuantizedDist,
    k_max: usize,
) -> Result<Vec<f64>, SeedError> {
    const CAP: usize = 20;
    if k_max > CAP {
        return Err(SeedError::EnumerationTooLarge { k_max, cap: CAP });
    }
    let mut counts = vec![0u64; target.num_symbols()];
    let total = 1u64 << k_max;
    for seed in 0..total {
        let mut bits: Vec<u8> = Vec::with_capacity((k_max + 7) / 8);
        for byte in 0..(k_max + 7) / 8 {
            let mut b = 0u8;
            for j in 0..8 {
                let pos = byte * 8 + j;
                if pos < k_max && (seed >> (k_max - 1 - pos)) & 1 == 1 {
                    b |= 1 << (7 - j);
                }
            }
            bits.push(b);
        }
        let mut src = ByteBits::new(&bits);
        let out = ria_decode(std::iter::once(target), &mut src, k_max)?;
        counts[out.symbols[0]] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Per-round device-input distribution: the no-test symbol first, then the
/// supported test input pairs in row-major order.
#[derive(Debug, Clone)]
pub struct RoundInputModel {
    pub gamma: f64,
    pub gen_inputs: (usize, usize),
    pub test_inputs: Vec<(usize, usize)>,
    pub probs: Vec<f64>,
    pub quantized: QuantizedDist,
}

impl RoundInputModel {
    pub fn new(game: &Game, gamma: f64, gen_inputs: (usize, usize)) -> Result<Self, SeedError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(SeedError::GammaRange(gamma));
        }
        let mut test_inputs = Vec::new();
        let mut probs = vec![1.0 - gamma];
        for x in 0..game.x_size {
            for y in 0..game.y_size {
                let w = game.mu(x, y);
                if w > 0.0 {
                    test_inputs.push((x, y));
                    probs.push(gamma * w);
                }
            }
        }
        let quantized = QuantizedDist::quantize(&probs)?;
        Ok(Self { gamma, gen_inputs, test_inputs, probs, quantized })
    }

    /// Map a decoded symbol to (is_test, x, y).
    pub fn symbol_to_round(&self, sym: usize) -> (bool, usize, usize) {
        if sym == 0 {
            (false, self.gen_inputs.0, self.gen_inputs.1)
        } else {
            let (x, y) = self.test_inputs[sym - 1];
            (true, x, y)
        }
    }

    pub fn num_symbols(&self) -> usize {
        1 + self.test_inputs.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SeedRequirements {
    /// Upper bound on the expected seed length, (gamma H(mu) + h(gamma)) n + 3m.
    pub kappa: f64,
    /// With probability 1 - eps_ria, N_max = 2 kappa bits suffice.
    pub n_max: f64,
    pub eps_ria: f64,
    /// Statistical distance of the sampled inputs from the target.
    pub eps_dist: f64,
    /// n rounded up to a multiple of the block count.
    pub n_padded: u64,
}

/// Seed-length accounting for sampling all device inputs with m RIA blocks.
pub fn seed_requirements(
    n: u64,
    m_blocks: u64,
    gamma: f64,
    mu: &[f64],
    k_max: u64,
) -> Result<SeedRequirements, SeedError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SeedError::GammaRange(gamma));
    }
    if m_blocks == 0 {
        return Err(SeedError::BlockMismatch { n, m: 0 });
    }
    let n_padded = n.div_ceil(m_blocks) * m_blocks;
    let kappa = crate::eat::expected_seed_bits(n_padded, gamma, mu) + 3.0 * m_blocks as f64;
    let n_max = 2.0 * kappa;
    let eps_ria = (-2.0 * kappa * kappa / (m_blocks as f64 * (k_max as f64).powi(2))).exp();
    let supp = mu.iter().filter(|&&p| p > 0.0).count() as f64;
    let exponent = n_padded as f64 * (supp + 1.0).log2() / m_blocks as f64 - (k_max as f64 + 1.0)
        + (m_blocks as f64).log2();
    let eps_dist = if exponent >= 0.0 { 1.0 } else { 2f64.powf(exponent) };
    Ok(SeedRequirements { kappa, n_max, eps_ria, eps_dist, n_padded })
}

/// Two-sided multiplicative Chernoff bound Pr[|S - mu| >= r] <= 2 e^(-r^2/3mu).
pub fn chernoff_tail(mu_mean: f64, r: f64) -> Result<f64, SeedError> {
    if r > mu_mean {
        return Err(SeedError::ChernoffRange { r, mu: mu_mean });
    }
    Ok((2.0 * (-r * r / (3.0 * mu_mean)).exp()).min(1.0))
}

/// Hoeffding: Pr[|S - mu| >= t] <= 2 exp(-2 t^2 / sum (b_i - a_i)^2).
pub fn hoeffding_tail(ranges: &[(f64, f64)], t: f64) -> f64 {
    let denom: f64 = ranges.iter().map(|(a, b)| (b - a) * (b - a)).sum();
    if denom == 0.0 {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    (2.0 * (-2.0 * t * t / denom).exp()).min(1.0)
}
