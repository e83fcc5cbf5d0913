//! Anthropic-selection scenario engines.
//!
//! Monte Carlo estimators take a seed and a stream count; stream results are
//! merged in stream order, so a report is a pure function of
//! `(config, seed, streams)`. Astronomically large magnitudes are handled
//! only as (iterated) base-10 logarithms.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fhg::McEstimate;
use crate::rng::{self, Moments, StreamRng};
use rand::Rng;

/// Mean of |⟨i|f⟩|² over independent Haar-random pairs (expectation 1/dim).
pub fn haar_fidelity_mean(dim: usize, samples: u64, seed: u64, streams: u64) -> Result<McEstimate> {
    if dim == 0 {
        return Err(Error::Contract("dim must be >= 1".into()));
    }
    if samples < 2 {
        return Err(Error::Contract("samples must be >= 2".into()));
    }
    if dim == 1 {
        // Every unit vector in one dimension is a phase.
        return Ok(McEstimate {
            mean: 1.0,
            std_error: 0.0,
            samples,
        });
    }
    let parts = rng::run_streams(seed, samples, streams, |rng, n| {
        let mut acc = Moments::default();
        for _ in 0..n {
            let i = rng::haar_vector(rng, dim);
            let f = rng::haar_vector(rng, dim);
            let overlap: num_complex::Complex64 = i.iter().zip(&f).map(|(a, b)| a.conj() * b).sum();
            acc.push(overlap.norm_sqr());
        }
        acc
    });
    Ok(McEstimate::from_moments(
        parts.into_iter().fold(Moments::default(), Moments::merge),
    ))
}

/// Transmission through crossed polarizers with `intermediates` equally
/// spaced analyzers between them: cos^{2(K+1)}(π / (2(K+1))).
pub fn zeno_polarizer_chain(intermediates: u32) -> f64 {
    let stages = intermediates as i32 + 1;
    let step = std::f64::consts::FRAC_PI_2 / stages as f64;
    step.cos().powi(2 * stages)
}

/// The same chain obtained by projecting a real 2-vector through each
/// analyzer in turn and multiplying the survival probabilities.
pub fn zeno_polarizer_simulation(intermediates: u32) -> f64 {
    let stages = intermediates + 1;
    let step = std::f64::consts::FRAC_PI_2 / stages as f64;
    let mut state = [1.0f64, 0.0];
    let mut transmitted = 1.0;
    for j in 1..=stages {
        let theta = step * j as f64;
        let axis = [theta.cos(), theta.sin()];
        let amp = axis[0] * state[0] + axis[1] * state[1];
        let projected = [axis[0] * amp, axis[1] * amp];
        let prob = projected[0] * projected[0] + projected[1] * projected[1];
        transmitted *= prob;
        if prob == 0.0 {
            return 0.0;
        }
        let norm = prob.sqrt();
        state = [projected[0] / norm, projected[1] / norm];
    }
    transmitted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZenoMode {
    Polarizer,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZenoChainConfig {
    pub dim: usize,
    pub intermediates: u32,
    pub mode: ZenoMode,
    pub samples: u64,
    pub seed: u64,
    /// Index of the target basis state |f⟩; the chain starts in |0⟩.
    #[serde(default = "default_target")]
    pub target: usize,
}

fn default_target() -> usize {
    1
}

/// Exact mean of [`zeno_random_chain`]. Averaged over Haar bases, one
/// Born-sampled measurement acts as ρ ↦ (ρ + I)/(d + 1), so the transition
/// probability relaxes to 1/d as a_K = 1/d + (a_0 − 1/d)(d + 1)^{−K}.
pub fn zeno_random_chain_expectation(dim: usize, intermediates: u32, target: usize) -> f64 {
    let d = dim as f64;
    let a0 = if target == 0 { 1.0 } else { 0.0 };
    1.0 / d + (a0 - 1.0 / d) * (d + 1.0).powf(-(intermediates as f64))
}

/// Runs `intermediates` complete projective measurements in independent
/// Haar-random bases starting from |0⟩, sampling each outcome by its Born
/// weight, and averages the final transition probability |⟨f|ψ⟩|².
pub fn zeno_random_chain(cfg: &ZenoChainConfig, streams: u64) -> Result<McEstimate> {
    if cfg.mode != ZenoMode::Random {
        return Err(Error::Contract("zeno_random_chain requires mode = random".into()));
    }
    if cfg.dim < 2 {
        return Err(Error::Contract("dim must be >= 2".into()));
    }
    if cfg.target >= cfg.dim {
        return Err(Error::Contract(format!("target {} out of range for dim {}", cfg.target, cfg.dim)));
    }
    if cfg.samples == 0 {
        return Err(Error::Contract("samples must be >= 1".into()));
    }
    let (dim, target, k) = (cfg.dim, cfg.target, cfg.intermediates);
    let parts = rng::run_streams(cfg.seed, cfg.samples, streams, |rng, n| {
        let mut acc = Moments::default();
        for _ in 0..n {
            acc.push(random_chain_sample(rng, dim, target, k));
        }
        acc
    });
    Ok(McEstimate::from_moments(
        parts.into_iter().fold(Moments::default(), Moments::merge),
    ))
}

fn random_chain_sample(rng: &mut StreamRng, dim: usize, target: usize, steps: u32) -> f64 {
    let mut state = vec![num_complex::Complex64::new(0.0, 0.0); dim];
    state[0] = num_complex::Complex64::new(1.0, 0.0);
    for _ in 0..steps {
        let basis = rng::haar_basis(rng, dim);
        let probs: Vec<f64> = basis
            .iter()
            .map(|b| b.iter().zip(&state).map(|(x, y)| x.conj() * y).sum::<num_complex::Complex64>().norm_sqr())
            .collect();
        let total: f64 = probs.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = dim - 1;
        for (j, &p) in probs.iter().enumerate() {
            if u < p {
                pick = j;
                break;
            }
            u -= p;
        }
        state.clone_from(&basis[pick]);
    }
    state[target].norm_sqr()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub steps: u64,
    pub step_sigma: f64,
    pub threshold: f64,
    pub branches: u64,
    pub seed: u64,
    /// Reflecting barrier at zero complexity; disable to get the free walk.
    #[serde(default = "default_true")]
    pub reflecting: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionResult {
    pub mean_final: f64,
    pub std_error: f64,
    pub frac_above_threshold: f64,
    /// Mean over branches with final complexity ≥ threshold; `None` when no
    /// branch qualifies.
    pub conditional_mean: Option<f64>,
    pub branches: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct WalkTally {
    all: Moments,
    above: Moments,
}

/// B independent Gaussian random walks of complexity, reflected at zero.
pub fn evolve_complexity(cfg: &EvolutionConfig, streams: u64) -> Result<EvolutionResult> {
    if cfg.steps == 0 || cfg.branches == 0 {
        return Err(Error::Contract("steps and branches must be >= 1".into()));
    }
    if !(cfg.step_sigma.is_finite() && cfg.step_sigma > 0.0) {
        return Err(Error::Contract("step_sigma must be > 0".into()));
    }
    if !(cfg.threshold.is_finite() && cfg.threshold >= 0.0) {
        return Err(Error::Contract("threshold must be >= 0".into()));
    }
    let parts = rng::run_streams(cfg.seed, cfg.branches, streams, |rng, n| {
        let mut tally = WalkTally::default();
        for _ in 0..n {
            let mut x = 0.0f64;
            for _ in 0..cfg.steps {
                x += cfg.step_sigma * rng::standard_normal(rng);
                if cfg.reflecting {
                    x = x.abs();
                }
            }
            tally.all.push(x);
            if x >= cfg.threshold {
                tally.above.push(x);
            }
        }
        tally
    });
    let tally = parts.into_iter().fold(WalkTally::default(), |a, b| WalkTally {
        all: a.all.merge(b.all),
        above: a.above.merge(b.above),
    });
    Ok(EvolutionResult {
        mean_final: tally.all.mean(),
        std_error: tally.all.std_error(),
        frac_above_threshold: tally.above.count as f64 / tally.all.count as f64,
        conditional_mean: (tally.above.count > 0).then(|| tally.above.mean()),
        branches: tally.all.count,
    })
}

/// Probability that at least one of `branches` independent tries with
/// success probability `q` succeeds: 1 − (1 − q)^B, evaluated in log space.
pub fn survival_probability(q: f64, branches: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Contract(format!("probability {q} outside [0, 1]")));
    }
    if branches == 0 {
        return Err(Error::Contract("branches must be >= 1".into()));
    }
    Ok(-(branches as f64 * (-q).ln_1p()).exp_m1())
}

/// Monte Carlo counterpart of [`survival_probability`]: fraction of
/// `trials` experiments in which some of `branches` Bernoulli(q) draws
/// succeeds.
pub fn survival_monte_carlo(q: f64, branches: u64, trials: u64, seed: u64, streams: u64) -> Result<McEstimate> {
    survival_probability(q, branches)?;
    if trials < 2 {
        return Err(Error::Contract("trials must be >= 2".into()));
    }
    let parts = rng::run_streams(seed, trials, streams, |rng, n| {
        let mut acc = Moments::default();
        for _ in 0..n {
            let hit = (0..branches).any(|_| rng.random::<f64>() < q);
            acc.push(if hit { 1.0 } else { 0.0 });
        }
        acc
    });
    Ok(McEstimate::from_moments(
        parts.into_iter().fold(Moments::default(), Moments::merge),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceConfig {
    pub r0: f64,
    pub drift_sigma: f64,
    pub steps: u64,
    pub epsilon: f64,
    pub branches: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceResult {
    pub frac_in_band: f64,
    /// Binomial standard error of `frac_in_band`, evaluated at `analytic_frac`.
    pub std_error: f64,
    pub analytic_frac: f64,
    pub branches: u64,
}

/// Mass of N(r0, steps·σ²) inside (1 − ε, 1 + ε).
pub fn coincidence_band_mass(r0: f64, drift_sigma: f64, steps: u64, epsilon: f64) -> f64 {
    let sd = drift_sigma * (steps as f64).sqrt();
    if sd == 0.0 {
        return if (r0 - 1.0).abs() < epsilon { 1.0 } else { 0.0 };
    }
    let dist = Normal::new(r0, sd).expect("positive standard deviation");
    (dist.cdf(1.0 + epsilon) - dist.cdf(1.0 - epsilon)).max(0.0)
}

/// Diffuses a ratio r along `branches` independent trajectories and counts
/// how many end within `epsilon` of exact coincidence (r = 1).
pub fn coincidence_scan(cfg: &CoincidenceConfig, streams: u64) -> Result<CoincidenceResult> {
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        return Err(Error::Contract("epsilon must be > 0".into()));
    }
    if !(cfg.drift_sigma.is_finite() && cfg.drift_sigma > 0.0) {
        return Err(Error::Contract("drift_sigma must be > 0".into()));
    }
    if !cfg.r0.is_finite() {
        return Err(Error::NonFinite("r0"));
    }
    if cfg.branches == 0 {
        return Err(Error::Contract("branches must be >= 1".into()));
    }
    let parts = rng::run_streams(cfg.seed, cfg.branches, streams, |rng, n| {
        let mut hits = 0u64;
        for _ in 0..n {
            let mut r = cfg.r0;
            for _ in 0..cfg.steps {
                r += cfg.drift_sigma * rng::standard_normal(rng);
            }
            if (r - 1.0).abs() < cfg.epsilon {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = parts.into_iter().sum();
    let analytic = coincidence_band_mass(cfg.r0, cfg.drift_sigma, cfg.steps, cfg.epsilon);
    Ok(CoincidenceResult {
        frac_in_band: hits as f64 / cfg.branches as f64,
        std_error: (analytic * (1.0 - analytic) / cfg.branches as f64).sqrt(),
        analytic_frac: analytic,
        branches: cfg.branches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCountConfig {
    pub universe_age_s: f64,
    pub planck_time_s: f64,
    #[serde(default = "default_base")]
    pub branching_base: f64,
}

fn default_base() -> f64 {
    2.0
}

impl Default for BranchCountConfig {
    fn default() -> Self {
        Self {
            universe_age_s: 4.35e17,
            planck_time_s: 5.39e-44,
            branching_base: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchCountEstimate {
    /// T / t_P.
    pub ratio: f64,
    pub log10_ratio: f64,
    /// log10 N with N = base^{T/t_P}.
    pub log10_n: f64,
    pub log10_log10_n: f64,
}

/// Number of worlds for exponential branching once per Planck time, as
/// log10 N and log10 log10 N.
pub fn branch_count_estimate(cfg: &BranchCountConfig) -> Result<BranchCountEstimate> {
    let BranchCountConfig {
        universe_age_s: t,
        planck_time_s: tp,
        branching_base: base,
    } = *cfg;
    for (name, v) in [("universe_age_s", t), ("planck_time_s", tp), ("branching_base", base)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Contract(format!("{name} must be positive and finite")));
        }
    }
    if t < tp {
        return Err(Error::Contract("universe_age_s must be >= planck_time_s".into()));
    }
    if base <= 1.0 {
        return Err(Error::Contract("branching_base must be > 1".into()));
    }
    let log10_ratio = t.log10() - tp.log10();
    let ratio = t / tp;
    let log10_base = base.log10();
    Ok(BranchCountEstimate {
        ratio,
        log10_ratio,
        log10_n: ratio * log10_base,
        log10_log10_n: log10_ratio + log10_base.log10(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeLedger {
    pub log10_event_prob: f64,
    pub log10_attempts: f64,
    pub log10_log10_branches: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Compensated,
    NotCompensated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerVerdict {
    /// log10 of the expected number of successes in one world.
    pub log10_expected_per_world: f64,
    /// Orders of magnitude the per-world expectation falls short of one
    /// (zero if it does not fall short).
    pub log10_deficit: f64,
    /// log10 N − deficit, when representable as an f64.
    pub log10_surplus: Option<f64>,
    pub verdict: Verdict,
}

/// Compares the per-world expectation of a rare event with the number of
/// branches available to realise it.
pub fn life_ledger_verdict(ledger: &LifeLedger) -> Result<LedgerVerdict> {
    for (name, v) in [
        ("log10_event_prob", ledger.log10_event_prob),
        ("log10_attempts", ledger.log10_attempts),
        ("log10_log10_branches", ledger.log10_log10_branches),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    let expected = ledger.log10_event_prob + ledger.log10_attempts;
    let deficit = (-expected).max(0.0);
    let log10_n = 10f64.powf(ledger.log10_log10_branches);
    let surplus = log10_n - deficit;
    // Compare in iterated-log space so huge branch counts still decide.
    let compensated = deficit == 0.0 || ledger.log10_log10_branches >= deficit.log10();
    Ok(LedgerVerdict {
        log10_expected_per_world: expected,
        log10_deficit: deficit,
        log10_surplus: surplus.is_finite().then_some(surplus),
        verdict: if compensated {
            Verdict::Compensated
        } else {
            Verdict::NotCompensated
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarizer_values() {
        assert!(zeno_polarizer_chain(0) < 1e-30);
        assert!((zeno_polarizer_chain(1) - 0.25).abs() < 1e-15);
        let k9 = (std::f64::consts::PI / 20.0).cos().powi(20);
        assert!((zeno_polarizer_chain(9) - k9).abs() < 1e-15);
        assert!((k9 - 0.780_546_069_781_140_8).abs() < 1e-15);
    }

    #[test]
    fn polarizer_simulation_matches_closed_form() {
        for k in 0..50 {
            assert!((zeno_polarizer_simulation(k) - zeno_polarizer_chain(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn polarizer_monotone() {
        let v: Vec<f64> = (0..200).map(zeno_polarizer_chain).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(v.iter().all(|&x| x <= 1.0));
    }

    #[test]
    fn random_chain_matches_exact_expectation() {
        for &(dim, k, target) in &[(2usize, 1u32, 1usize), (2, 2, 1), (4, 1, 1), (3, 3, 0)] {
            let cfg = ZenoChainConfig {
                dim,
                intermediates: k,
                mode: ZenoMode::Random,
                samples: 40_000,
                seed: 31,
                target,
            };
            let est = zeno_random_chain(&cfg, 2).unwrap();
            let exact = zeno_random_chain_expectation(dim, k, target);
            assert!((est.mean - exact).abs() < 5.0 * est.std_error, "{dim} {k} {target}: {est:?} vs {exact}");
        }
        assert_eq!(zeno_random_chain_expectation(4, 1, 1), 0.2);
    }

    #[test]
    fn zeno_without_measurements() {
        let cfg = ZenoChainConfig {
            dim: 2,
            intermediates: 0,
            mode: ZenoMode::Random,
            samples: 10,
            seed: 1,
            target: 0,
        };
        assert_eq!(zeno_random_chain(&cfg, 1).unwrap().mean, 1.0);
        let cfg = ZenoChainConfig { target: 1, ..cfg };
        assert_eq!(zeno_random_chain(&cfg, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn survival_edges() {
        assert_eq!(survival_probability(0.0, 100).unwrap(), 0.0);
        assert!((survival_probability(0.123, 1).unwrap() - 0.123).abs() < 1e-16);
        assert_eq!(survival_probability(1.0, 5).unwrap(), 1.0);
        let v = survival_probability(1e-6, 10_000_000).unwrap();
        assert!((v - (1.0 - (-10.0f64).exp())).abs() < 1e-9);
        assert!((v - 0.999_954_6).abs() < 1e-7);
        assert!(survival_probability(1.5, 1).is_err());
    }

    #[test]
    fn survival_matches_direct_power() {
        for &(q, b) in &[(0.1, 5u64), (0.5, 20), (0.01, 300), (0.3, 1)] {
            let direct = 1.0 - (1.0f64 - q).powi(b as i32);
            assert!((survival_probability(q, b).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn band_mass_example() {
        let a = coincidence_band_mass(1.2, 0.01, 400, 0.01);
        let dist = Normal::new(0.0, 1.0).unwrap();
        let oracle = dist.cdf((1.01 - 1.2) / 0.2) - dist.cdf((0.99 - 1.2) / 0.2);
        assert!((a - oracle).abs() < 1e-15);
        assert!((a - 0.024_197_069_932_585_857).abs() < 1e-10, "{a}");
    }

    #[test]
    fn coincidence_edges() {
        let cfg = CoincidenceConfig {
            r0: 1.0,
            drift_sigma: 0.01,
            steps: 10,
            epsilon: 1e6,
            branches: 100,
            seed: 3,
        };
        assert_eq!(coincidence_scan(&cfg, 1).unwrap().frac_in_band, 1.0);
        let cfg = CoincidenceConfig {
            r0: 1.2,
            drift_sigma: 1e-9,
            epsilon: 0.01,
            ..cfg
        };
        let r = coincidence_scan(&cfg, 1).unwrap();
        assert_eq!(r.frac_in_band, 0.0);
        assert_eq!(r.analytic_frac, 0.0);
    }

    #[test]
    fn branch_count_magnitudes() {
        let e = branch_count_estimate(&BranchCountConfig::default()).unwrap();
        assert!((e.ratio - 8.07e60).abs() / 8.07e60 < 1e-3);
        assert!((60.0..=61.0).contains(&e.log10_log10_n));
        assert!((e.log10_log10_n - 60.385).abs() < 1e-3);

        let e = branch_count_estimate(&BranchCountConfig {
            branching_base: 10.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(e.log10_n, e.ratio);

        let e = branch_count_estimate(&BranchCountConfig {
            universe_age_s: 1.0,
            planck_time_s: 1.0,
            branching_base: 2.0,
        })
        .unwrap();
        assert_eq!(e.log10_n, 2f64.log10());
    }

    #[test]
    fn ledger_verdicts() {
        let v = life_ledger_verdict(&LifeLedger {
            log10_event_prob: -400.0,
            log10_attempts: 29.0,
            log10_log10_branches: 60.0,
        })
        .unwrap();
        assert_eq!(v.log10_expected_per_world, -371.0);
        assert_eq!(v.verdict, Verdict::Compensated);

        let v = life_ledger_verdict(&LifeLedger {
            log10_event_prob: 0.0,
            log10_attempts: 29.0,
            log10_log10_branches: 0.0,
        })
        .unwrap();
        assert_eq!(v.log10_expected_per_world, 29.0);
        assert_eq!(v.verdict, Verdict::Compensated);

        let v = life_ledger_verdict(&LifeLedger {
            log10_event_prob: -400.0,
            log10_attempts: 29.0,
            log10_log10_branches: 2.0,
        })
        .unwrap();
        assert_eq!(v.verdict, Verdict::NotCompensated);
        assert_eq!(v.log10_surplus, Some(100.0 - 371.0));
    }
}
