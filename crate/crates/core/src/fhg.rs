//! The relative-frequency operator on N-fold product states.
//!
//! For `|Ψ⟩ = Σ C_i |ψ_i⟩` and outcome `k` with `p_k = |C_k|²`, the squared
//! norm of `(F_N^k − p_k) |Ψ⟩^⊗N` is computed three ways:
//!
//! * [`freq_deviation_explicit`] walks every one of the `M^N` outcome
//!   strings,
//! * [`freq_deviation_multinomial`] collapses the sum onto the count `m_k`
//!   of outcome `k` (a binomial sum, polynomial in N),
//! * [`freq_deviation_closed`] is `p_k (1 − p_k) / N`.
//!
//! The module also produces the Born-versus-counting comparison table for
//! repeated two-outcome experiments and the Haar-average check of `|C_k|²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Complex;
use crate::rng::{self, Moments};

/// Largest number of outcome strings the explicit path will enumerate.
pub const MAX_STRINGS: u128 = 1 << 20;

/// Largest copy count accepted by the binomial path.
pub const MAX_MULTINOMIAL_COPIES: u64 = 1_000_000;

/// Largest trial count in a comparison table.
pub const MAX_TRIALS: u32 = 64;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySpec {
    amplitudes: Vec<Complex>,
    copies: u64,
    outcome: usize,
}

impl FrequencySpec {
    pub fn new(amplitudes: Vec<Complex>, copies: u64, outcome: usize) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Contract("at least one amplitude is required".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!(
                "amplitudes must be normalized (sum |C_i|^2 = {norm}, expected 1 within {NORM_TOL:e})"
            )));
        }
        if outcome >= amplitudes.len() {
            return Err(Error::Contract(format!(
                "outcome {outcome} out of range for {} amplitudes",
                amplitudes.len()
            )));
        }
        if copies == 0 {
            return Err(Error::Contract("copies must be >= 1".into()));
        }
        Ok(Self {
            amplitudes,
            copies,
            outcome,
        })
    }

    /// Two outcomes with amplitudes (√p, √(1−p)), measuring the first.
    pub fn binary(p: f64, copies: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Contract(format!("probability {p} outside [0, 1]")));
        }
        Self::new(
            vec![Complex::new(p.sqrt(), 0.0), Complex::new((1.0 - p).sqrt(), 0.0)],
            copies,
            0,
        )
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amplitudes
    }

    pub fn copies(&self) -> u64 {
        self.copies
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    /// Born weights |C_i|².
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn p_k(&self) -> f64 {
        self.amplitudes[self.outcome].norm_sqr()
    }

    /// Number of outcome strings, M^N, saturating.
    pub fn string_count(&self) -> u128 {
        let m = self.amplitudes.len() as u128;
        let mut total: u128 = 1;
        for _ in 0..self.copies {
            total = total.saturating_mul(m);
            if total > MAX_STRINGS {
                break;
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyResult {
    pub norm_sq_explicit: f64,
    pub norm_sq_closed: f64,
    pub p_k: f64,
}

/// Exact squared norm by enumerating all M^N outcome strings in
/// lexicographic order, keeping only prefix products (memory O(N)).
pub fn freq_deviation_explicit(spec: &FrequencySpec) -> Result<f64> {
    let strings = spec.string_count();
    if strings > MAX_STRINGS {
        return Err(Error::Capacity {
            what: "outcome strings",
            requested: strings,
            limit: MAX_STRINGS,
        });
    }
    let probs = spec.probabilities();
    let (m, n, k) = (probs.len(), spec.copies as usize, spec.outcome);
    let p_k = probs[k];
    let inv_n = 1.0 / n as f64;

    // digits[j] is the outcome of copy j; prefix_prob[j] / prefix_hits[j]
    // describe copies 0..j.
    let mut digits = vec![0usize; n];
    let mut prefix_prob = vec![1.0f64; n + 1];
    let mut prefix_hits = vec![0usize; n + 1];
    let mut from = 0;
    let mut total = 0.0;
    loop {
        for j in from..n {
            prefix_prob[j + 1] = prefix_prob[j] * probs[digits[j]];
            prefix_hits[j + 1] = prefix_hits[j] + usize::from(digits[j] == k);
        }
        let dev = prefix_hits[n] as f64 * inv_n - p_k;
        total += dev * dev * prefix_prob[n];

        // Odometer increment; `from` is the leftmost digit that changed.
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(total);
            }
            j -= 1;
            digits[j] += 1;
            if digits[j] < m {
                break;
            }
            digits[j] = 0;
        }
        from = j;
    }
}

pub fn freq_deviation_closed(p_k: f64, copies: u64) -> f64 {
    p_k * (1.0 - p_k) / copies as f64
}

/// Binomial weights `Binom(n, m) p^m (1−p)^{n−m}` for m = 0..=n.
///
/// Built by the ratio recurrence outward from the mode and normalised by
/// their sum, which keeps relative accuracy near machine precision even for
/// n ~ 10^6 where log-gamma evaluations would not.
pub fn binomial_weights(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    let mut w = vec![0.0; len];
    if p <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    if p >= 1.0 {
        w[len - 1] = 1.0;
        return w;
    }
    let q = 1.0 - p;
    let odds = p / q;
    let mode = (((n + 1) as f64 * p).floor() as usize).min(len - 1);
    w[mode] = 1.0;
    for m in mode..len - 1 {
        // w[m+1] / w[m] = (n − m) / (m + 1) · p / q
        w[m + 1] = w[m] * ((n as usize - m) as f64 / (m + 1) as f64) * odds;
        if w[m + 1] == 0.0 {
            break;
        }
    }
    for m in (1..=mode).rev() {
        w[m - 1] = w[m] * (m as f64 / (n as usize - m + 1) as f64) / odds;
        if w[m - 1] == 0.0 {
            break;
        }
    }
    let total = kahan_sum(w.iter().copied());
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Σ_m (m/N − p_k)² Binom(N, m) p_k^m (1 − p_k)^{N−m}.
pub fn freq_deviation_multinomial(spec: &FrequencySpec) -> Result<f64> {
    if spec.copies > MAX_MULTINOMIAL_COPIES {
        return Err(Error::Capacity {
            what: "copies",
            requested: spec.copies as u128,
            limit: MAX_MULTINOMIAL_COPIES as u128,
        });
    }
    Ok(binomial_deviation(spec.p_k(), spec.copies))
}

fn binomial_deviation(p: f64, n: u64) -> f64 {
    let inv_n = 1.0 / n as f64;
    let w = binomial_weights(n, p);
    kahan_sum(w.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(m, &x)| {
        let d = m as f64 * inv_n - p;
        d * d * x
    }))
}

pub fn freq_result(spec: &FrequencySpec) -> Result<FrequencyResult> {
    Ok(FrequencyResult {
        norm_sq_explicit: freq_deviation_explicit(spec)?,
        norm_sq_closed: freq_deviation_closed(spec.p_k(), spec.copies),
        p_k: spec.p_k(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrahamRow {
    /// Number of trials that gave the first outcome.
    pub m: u32,
    pub branch_count: u64,
    pub count_mass: f64,
    pub born_mass: f64,
}

fn binomial_coefficient(n: u32, k: u32) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Born vs. branch-counting mass for each class "m of `trials` outcomes were
/// the first one", where the first outcome has Born probability `p`.
pub fn graham_table(p: f64, trials: u32) -> Result<Vec<GrahamRow>> {
    if trials > MAX_TRIALS {
        return Err(Error::Capacity {
            what: "trials",
            requested: trials as u128,
            limit: MAX_TRIALS as u128,
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Contract(format!("probability {p} outside [0, 1]")));
    }
    let q = 1.0 - p;
    let rows = (0..=trials)
        .map(|m| {
            let branch_count = binomial_coefficient(trials, m);
            let (count_mass, born_mass) = if trials <= 30 {
                let c = branch_count as f64;
                (
                    c / (1u64 << trials) as f64,
                    c * (p.powi(m as i32) * q.powi((trials - m) as i32)),
                )
            } else {
                let ln_c = ln_binomial(trials, m);
                let ln_count = ln_c - trials as f64 * std::f64::consts::LN_2;
                let born = if (p == 0.0 && m > 0) || (q == 0.0 && m < trials) {
                    0.0
                } else {
                    let lp = if m == 0 { 0.0 } else { m as f64 * p.ln() };
                    let lq = if m == trials { 0.0 } else { (trials - m) as f64 * q.ln() };
                    (ln_c + lp + lq).exp()
                };
                (ln_count.exp(), born)
            };
            GrahamRow {
                m,
                branch_count,
                count_mass,
                born_mass,
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    pub(crate) fn from_moments(m: Moments) -> Self {
        Self {
            mean: m.mean(),
            std_error: m.std_error(),
            samples: m.count,
        }
    }
}

/// Monte Carlo mean of |C_0|² over Haar-random unit vectors in `dim`
/// dimensions (expectation 1/dim).
pub fn graham_average_check(dim: usize, samples: u64, seed: u64, streams: u64) -> Result<McEstimate> {
    if dim == 0 || samples == 0 {
        return Err(Error::Contract("dim and samples must be >= 1".into()));
    }
    if dim == 1 {
        return Ok(McEstimate {
            mean: 1.0,
            std_error: 0.0,
            samples,
        });
    }
    let parts = rng::run_streams(seed, samples, streams, |rng, n| {
        let mut acc = Moments::default();
        for _ in 0..n {
            let v = rng::haar_vector(rng, dim);
            acc.push(v[0].norm_sqr());
        }
        acc
    });
    Ok(McEstimate::from_moments(
        parts.into_iter().fold(Moments::default(), Moments::merge),
    ))
}
