//! Seeded Monte Carlo runs of the protocol with an honest relay, and
//! empirical coverage checks for the concentration bounds.
//!
//! Randomness comes from ChaCha8 with one stream per (chunk, purpose), so a
//! run split into chunks and executed in parallel is bit-identical to the
//! sequential run.

use bitvec::prelude::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    click_distribution, expected_statistics, interference_from_amplitudes, ChannelParams, ExpectedTallies,
};
use crate::concentration::{
    chernoff_upper, expectation_lower, expectation_upper, observation_lower, observation_upper, ConfidenceLevel,
    TallyFrame,
};
use crate::error::{domain, Error, Result};
use crate::security::{minus_minus_bound, ProtocolParams, Tallies, Thresholds, VacuumFloors};
use crate::statemodel::{p_minus_exact, CorrelationKernel, Kernel};

/// Rounds per RNG chunk.
pub const CHUNK_ROUNDS: u64 = 1 << 16;

/// Largest `r1 + r2` for which P⁻ is tabulated exactly.
pub const MAX_EXACT_RANGE: usize = 8;

const STREAM_ALICE_BITS: u64 = 0;
const STREAM_BOB_BITS: u64 = 1;
const STREAM_ROUNDS: u64 = 2;
const STREAMS_PER_CHUNK: u64 = 3;

fn stream_rng(seed: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index * STREAMS_PER_CHUNK + purpose);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_rounds: u64,
    pub kernel_a: CorrelationKernel,
    pub kernel_b: CorrelationKernel,
    pub channel: ChannelParams,
    /// Supplies `P_est` and the ε budget; its round count is replaced by
    /// `n_rounds`.
    pub protocol: ProtocolParams,
    /// Abort thresholds; defaults to the expected tallies.
    pub thresholds: Option<Thresholds>,
}

/// Standardized deviations `(observed − expected)/σ` under binomial sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub n_sig: f64,
    pub n_est: f64,
    pub n_est_bit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub tallies: Tallies,
    /// Clicked estimation rounds.
    pub n_est: u64,
    /// Rounds with exactly one detector firing.
    pub total_clicks: u64,
    pub double_clicks: u64,
    pub sifted_alice: BitVec<u64, Lsb0>,
    pub sifted_bob: BitVec<u64, Lsb0>,
    pub aborted: bool,
    pub expected: Option<ExpectedTallies>,
    pub z_scores: ZScores,
}

impl SimResult {
    pub fn sifted_errors(&self) -> usize {
        (self.sifted_alice.clone() ^ self.sifted_bob.clone()).count_ones()
    }
}

#[derive(Default)]
struct ChunkOutcome {
    n_sig: u64,
    n_est: u64,
    n_est_bit: u64,
    double_clicks: u64,
    sifted_alice: BitVec<u64, Lsb0>,
    sifted_bob: BitVec<u64, Lsb0>,
}

fn chunk_bounds(n_rounds: u64) -> Vec<(u64, u64)> {
    (0..n_rounds.div_ceil(CHUNK_ROUNDS))
        .map(|c| (c * CHUNK_ROUNDS, ((c + 1) * CHUNK_ROUNDS).min(n_rounds)))
        .collect()
}

fn modulation_bits(seed: u64, n_rounds: u64, purpose: u64) -> BitVec<u64, Lsb0> {
    let parts: Vec<BitVec<u64, Lsb0>> = chunk_bounds(n_rounds)
        .into_par_iter()
        .enumerate()
        .map(|(c, (lo, hi))| {
            let mut rng = stream_rng(seed, c as u64, purpose);
            (lo..hi).map(|_| rng.random_bool(0.5)).collect()
        })
        .collect();
    let mut bits = BitVec::with_capacity(n_rounds as usize);
    for p in parts {
        bits.extend_from_bitslice(&p);
    }
    bits
}

/// Fills `window` with `s_{i-r2} ..= s_{i+r1}`, reading 0 outside the run.
fn fill_window<K: Kernel + ?Sized>(kernel: &K, bits: &BitSlice<u64, Lsb0>, i: u64, window: &mut Vec<bool>) {
    let (r1, r2) = (kernel.r1() as i64, kernel.r2() as i64);
    window.clear();
    for j in (i as i64 - r2)..=(i as i64 + r1) {
        window.push(j >= 0 && (j as usize) < bits.len() && bits[j as usize]);
    }
}

fn z_score(observed: u64, trials: u64, p: f64) -> f64 {
    let n = trials as f64;
    let mean = n * p;
    let var = n * p * (1.0 - p);
    let diff = observed as f64 - mean;
    if var > 0.0 {
        diff / var.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Runs protocol steps 1–4: modulation, interference at the relay, sifting
/// with Bob's flip on right clicks, and random estimation sampling.
pub fn run_protocol(config: &SimConfig) -> Result<SimResult> {
    config.channel.validate()?;
    config.kernel_a.validate()?;
    config.kernel_b.validate()?;
    let protocol = ProtocolParams {
        n_rounds: config.n_rounds,
        ..config.protocol
    };
    protocol.validate()?;

    let n = config.n_rounds;
    let alice = modulation_bits(config.seed, n, STREAM_ALICE_BITS);
    let bob = modulation_bits(config.seed, n, STREAM_BOB_BITS);
    let eta = config.channel.arm_transmittance();
    let (e_mis, dark, p_est) = (config.channel.e_mis, config.channel.dark, protocol.p_est);

    let outcomes: Vec<ChunkOutcome> = chunk_bounds(n)
        .into_par_iter()
        .enumerate()
        .map(|(c, (lo, hi))| {
            let mut rng = stream_rng(config.seed, c as u64, STREAM_ROUNDS);
            let mut out = ChunkOutcome::default();
            let (mut wa, mut wb) = (Vec::new(), Vec::new());
            for i in lo..hi {
                fill_window(&config.kernel_a, &alice, i, &mut wa);
                fill_window(&config.kernel_b, &bob, i, &mut wb);
                let alpha_a: Complex64 = config.kernel_a.amplitude(&wa);
                let alpha_b: Complex64 = config.kernel_b.amplitude(&wb);
                let (il, ir) = interference_from_amplitudes(alpha_a, alpha_b, eta, e_mis);
                let dist = click_distribution(il, ir, dark);

                let u: f64 = rng.random();
                let estimation = rng.random_bool(p_est);
                let right = if u < dist.p_left_only {
                    false
                } else if u < dist.p_single() {
                    true
                } else {
                    if u < dist.p_single() + dist.p_double {
                        out.double_clicks += 1;
                    }
                    continue;
                };
                let s_a = alice[i as usize];
                let s_b = bob[i as usize] ^ right;
                if estimation {
                    out.n_est += 1;
                    out.n_est_bit += u64::from(s_a != s_b);
                } else {
                    out.n_sig += 1;
                    out.sifted_alice.push(s_a);
                    out.sifted_bob.push(s_b);
                }
            }
            out
        })
        .collect();

    let mut merged = ChunkOutcome::default();
    for o in outcomes {
        merged.n_sig += o.n_sig;
        merged.n_est += o.n_est;
        merged.n_est_bit += o.n_est_bit;
        merged.double_clicks += o.double_clicks;
        merged.sifted_alice.extend_from_bitslice(&o.sifted_alice);
        merged.sifted_bob.extend_from_bitslice(&o.sifted_bob);
    }

    let expected = match expected_statistics(&protocol, &config.channel) {
        Ok(s) => Some(s),
        Err(Error::DegenerateChannel) => None,
        Err(e) => return Err(e),
    };
    let thresholds = config.thresholds.unwrap_or_else(|| {
        expected
            .as_ref()
            .map_or_else(Thresholds::degenerate, Thresholds::expected)
    });
    let tallies = Tallies {
        n_sig: merged.n_sig,
        n_est_bit: merged.n_est_bit,
        n_sig_tol: thresholds.n_sig_tol,
        n_est_tol: thresholds.n_est_tol,
    };
    let (p_sig, p_est_click, p_est_bit) = match &expected {
        Some(s) => ((1.0 - p_est) * s.p_succ, p_est * s.p_succ, p_est * s.p_succ * s.e_bit),
        None => (0.0, 0.0, 0.0),
    };
    Ok(SimResult {
        tallies,
        n_est: merged.n_est,
        total_clicks: merged.n_sig + merged.n_est,
        double_clicks: merged.double_clicks,
        sifted_alice: merged.sifted_alice,
        sifted_bob: merged.sifted_bob,
        aborted: tallies.aborts(),
        expected,
        z_scores: ZScores {
            n_sig: z_score(merged.n_sig, n, p_sig),
            n_est: z_score(merged.n_est, n, p_est_click),
            n_est_bit: z_score(merged.n_est_bit, n, p_est_bit),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `U_e`: violated when `Σ E > U_e(Λ)`.
    ExpectationUpper,
    /// `L_e`: violated when `Σ E < L_e(Λ)`.
    ExpectationLower,
    /// `U_m`: violated when `Λ > U_m(Σ E)`.
    ObservationUpper,
    /// `L_m`: violated when `Λ < L_m(Σ E)`.
    ObservationLower,
    /// `C_U`: violated when `Λ ≥ C_U(np)`.
    Chernoff,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::ExpectationUpper,
        BoundKind::ExpectationLower,
        BoundKind::ObservationUpper,
        BoundKind::ObservationLower,
        BoundKind::Chernoff,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BoundKind::ExpectationUpper => "U_e",
            BoundKind::ExpectationLower => "L_e",
            BoundKind::ObservationUpper => "U_m",
            BoundKind::ObservationLower => "L_m",
            BoundKind::Chernoff => "C_U",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    /// I.i.d. Bernoulli(p).
    Bernoulli { p: f64 },
    /// `P(X_m = 1 | F_{m-1}) = base + slope · (mean of X_1..X_{m-1})`,
    /// clamped to [0, 1]; the first draw uses `base`.
    PrefixMartingale { base: f64, slope: f64 },
}

impl SequenceSpec {
    pub fn label(&self) -> String {
        match self {
            SequenceSpec::Bernoulli { p } => format!("bernoulli({p})"),
            SequenceSpec::PrefixMartingale { base, slope } => format!("martingale({base}+{slope}*mean)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageOutcome {
    pub violations: u64,
    pub trials: u64,
    pub violation_fraction: f64,
}

/// `ε + 3σ` with `σ = √(ε(1−ε)/trials)`.
pub fn coverage_tolerance(eps: f64, trials: u64) -> f64 {
    eps + 3.0 * (eps * (1.0 - eps) / trials as f64).sqrt()
}

/// One realization: (observed sum Λ, sum of conditional expectations).
fn sample_sequence(spec: &SequenceSpec, n: u64, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    match *spec {
        SequenceSpec::Bernoulli { p } => {
            let dist = Binomial::new(n, p).map_err(|e| Error::Domain(e.to_string()))?;
            Ok((dist.sample(rng) as f64, n as f64 * p))
        }
        SequenceSpec::PrefixMartingale { base, slope } => {
            let (mut ones, mut expect) = (0u64, 0.0);
            for m in 0..n {
                let mean = if m == 0 { 0.0 } else { ones as f64 / m as f64 };
                let p = (base + slope * mean).clamp(0.0, 1.0);
                expect += p;
                ones += u64::from(rng.random_bool(p));
            }
            Ok((ones as f64, expect))
        }
    }
}

fn violates(kind: BoundKind, lambda: f64, expect: f64, n: u64, conf: ConfidenceLevel) -> Result<bool> {
    let nf = n as f64;
    // A failure probability of 1 guarantees nothing; compare against the
    // trivial extremes [0, n].
    if conf.is_trivial() {
        return Ok(match kind {
            BoundKind::ExpectationUpper => expect > nf,
            BoundKind::ExpectationLower => expect < 0.0,
            BoundKind::ObservationUpper => lambda > nf,
            BoundKind::ObservationLower => lambda < 0.0,
            BoundKind::Chernoff => lambda > nf,
        });
    }
    let expect = expect.clamp(0.0, nf);
    Ok(match kind {
        BoundKind::ExpectationUpper => expect > expectation_upper(&TallyFrame::new(n, lambda)?, conf),
        BoundKind::ExpectationLower => expect < expectation_lower(&TallyFrame::new(n, lambda)?, conf),
        BoundKind::ObservationUpper => lambda > observation_upper(expect, n, conf)?,
        BoundKind::ObservationLower => lambda < observation_lower(expect, n, conf)?,
        BoundKind::Chernoff => lambda >= chernoff_upper(expect, conf)?,
    })
}

/// Fraction of `trials` independent realizations in which the named bound
/// fails.
pub fn coverage_experiment(
    kind: BoundKind,
    spec: SequenceSpec,
    n: u64,
    eps: f64,
    trials: u64,
    seed: u64,
) -> Result<CoverageOutcome> {
    if trials < 100 {
        return domain(format!("coverage needs at least 100 trials, got {trials}"));
    }
    if n == 0 {
        return domain("sequence length must be positive");
    }
    match spec {
        SequenceSpec::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
            return domain(format!("Bernoulli parameter {p} outside [0, 1]"));
        }
        SequenceSpec::PrefixMartingale { .. } if kind == BoundKind::Chernoff => {
            return domain("the Chernoff bound needs independent variables");
        }
        _ => {}
    }
    let conf = ConfidenceLevel::new(eps)?;
    let violations = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t, 0);
            let (lambda, expect) = sample_sequence(&spec, n, &mut rng)?;
            violates(kind, lambda, expect, n, conf).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(CoverageOutcome {
        violations,
        trials,
        violation_fraction: violations as f64 / trials as f64,
    })
}

/// P⁻ for every context of a kernel, indexed by the `2(r1+r2)` non-pivot bits
/// of the dependence window (lowest index in the lowest bit).
struct PMinusTable {
    range: usize,
    values: Vec<f64>,
}

impl PMinusTable {
    fn new(kernel: &CorrelationKernel) -> Result<Self> {
        let range = kernel.range_total();
        let width = 2 * range;
        let values = (0..1usize << width)
            .into_par_iter()
            .map(|ctx| {
                let mut bits = vec![false; width + 1];
                for (j, slot) in (0..=width).filter(|&j| j != range).enumerate() {
                    bits[slot] = ctx >> j & 1 == 1;
                }
                p_minus_exact(kernel, &bits, range)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { range, values })
    }

    fn lookup(&self, bits: &BitSlice<u64, Lsb0>, pivot: usize) -> f64 {
        let r = self.range as isize;
        let mut ctx = 0usize;
        let mut j = 0;
        for idx in (pivot as isize - r)..=(pivot as isize + r) {
            if idx == pivot as isize {
                continue;
            }
            if idx >= 0 && (idx as usize) < bits.len() && bits[idx as usize] {
                ctx |= 1 << j;
            }
            j += 1;
        }
        self.values[ctx]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinusMinusOutcome {
    /// `N^{−−}_sig` in each trial.
    pub counts: Vec<u64>,
    /// `N̄^{−−}_sig` for the kernels' declared floors.
    pub bound: f64,
    pub exceedances: u64,
    pub exceedance_fraction: f64,
    /// `(r1+r2+1) ε²`.
    pub allowed_failure: f64,
}

impl MinusMinusOutcome {
    pub fn mean(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.counts.len() as f64
    }
}

/// Samples the count of signal rounds in which both users' ancillas are found
/// in `|−⟩`, using the exact per-round P⁻ given the realized neighbouring
/// bits, and compares it with `N̄^{−−}_sig`.
///
/// The grouping and the bound use `protocol`'s ranges and round count; the
/// vacuum floors are the kernels' declared floors.
pub fn minus_minus_experiment(
    kernel_a: &CorrelationKernel,
    kernel_b: &CorrelationKernel,
    protocol: &ProtocolParams,
    eps: ConfidenceLevel,
    trials: u64,
    seed: u64,
) -> Result<MinusMinusOutcome> {
    let range = protocol.range_total();
    if range > MAX_EXACT_RANGE {
        return Err(Error::RangeTooLarge(range, MAX_EXACT_RANGE));
    }
    for k in [kernel_a, kernel_b] {
        k.validate()?;
        if k.r1() > protocol.r1 || k.r2() > protocol.r2 {
            return domain(format!(
                "kernel ranges ({}, {}) exceed the protocol's ({}, {})",
                k.r1(),
                k.r2(),
                protocol.r1,
                protocol.r2
            ));
        }
    }
    if trials == 0 {
        return domain("need at least one trial");
    }
    let bound_params = ProtocolParams {
        floors: VacuumFloors::Explicit {
            p0a: kernel_a.vacuum_floor(),
            p0b: kernel_b.vacuum_floor(),
        },
        ..*protocol
    };
    bound_params.validate()?;
    let bound = minus_minus_bound(&bound_params, eps)?;
    let table_a = PMinusTable::new(kernel_a)?;
    let table_b = PMinusTable::new(kernel_b)?;
    let n = protocol.n_rounds;
    let p_sig = 1.0 - protocol.p_est;

    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t, 0);
            let alice: BitVec<u64, Lsb0> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let bob: BitVec<u64, Lsb0> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let mut count = 0u64;
            for u in 0..n as usize {
                if !rng.random_bool(p_sig) {
                    continue;
                }
                if rng.random::<f64>() >= table_a.lookup(&alice, u) {
                    continue;
                }
                if rng.random::<f64>() < table_b.lookup(&bob, u) {
                    count += 1;
                }
            }
            count
        })
        .collect();

    let exceedances = counts.iter().filter(|&&c| c as f64 >= bound).count() as u64;
    Ok(MinusMinusOutcome {
        exceedances,
        exceedance_fraction: exceedances as f64 / trials as f64,
        allowed_failure: (range + 1) as f64 * eps.squared().epsilon(),
        bound,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(seed: u64, n_rounds: u64, mu: f64, channel: ChannelParams) -> SimConfig {
        SimConfig {
            seed,
            n_rounds,
            kernel_a: CorrelationKernel::ideal(mu).unwrap(),
            kernel_b: CorrelationKernel::ideal(mu).unwrap(),
            channel,
            protocol: ProtocolParams::simulation(n_rounds, mu, 0.1, 0, 0, 1e-10),
            thresholds: None,
        }
    }

    #[test]
    fn noiseless_run_has_no_errors() {
        let ch = ChannelParams {
            attenuation_db: 0.0,
            dark: 0.0,
            e_mis: 0.0,
            f_ec: 1.1,
        };
        let r = run_protocol(&config(3, 200_000, 0.1, ch)).unwrap();
        assert_eq!(r.tallies.n_est_bit, 0);
        assert!(r.tallies.n_sig > 0);
        assert_eq!(r.sifted_alice, r.sifted_bob);
        assert_eq!(r.sifted_alice.len() as u64, r.tallies.n_sig);
    }

    #[test]
    fn dark_vacuum_run_aborts() {
        let ch = ChannelParams {
            attenuation_db: 0.0,
            dark: 0.0,
            e_mis: 0.0,
            f_ec: 1.1,
        };
        let r = run_protocol(&config(3, 10_000, 0.0, ch)).unwrap();
        assert_eq!(r.tallies.n_sig, 0);
        assert_eq!(r.total_clicks, 0);
        assert!(r.aborted);
        assert!(r.expected.is_none());
    }

    #[test]
    fn chunked_run_is_deterministic() {
        let cfg = config(99, 3 * CHUNK_ROUNDS + 17, 0.2, ChannelParams::standard(5.0));
        let a = run_protocol(&cfg).unwrap();
        let b = run_protocol(&cfg).unwrap();
        assert_eq!(a, b);
        let c = run_protocol(&SimConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.sifted_alice, c.sifted_alice);
    }

    #[test]
    fn tallies_are_consistent() {
        let r = run_protocol(&config(5, 300_000, 0.3, ChannelParams::standard(3.0))).unwrap();
        assert_eq!(r.tallies.n_sig + r.n_est, r.total_clicks);
        assert_eq!(r.sifted_bob.len() as u64, r.tallies.n_sig);
        assert!(r.sifted_errors() > 0);
    }

    #[test]
    fn abort_uses_thresholds() {
        let mut cfg = config(5, 100_000, 0.3, ChannelParams::standard(3.0));
        cfg.thresholds = Some(Thresholds {
            n_sig_tol: 0,
            n_est_tol: 0,
        });
        let r = run_protocol(&cfg).unwrap();
        assert_eq!(r.aborted, r.tallies.n_est_bit > 0);
        cfg.thresholds = Some(Thresholds {
            n_sig_tol: u64::MAX,
            n_est_tol: u64::MAX,
        });
        assert!(run_protocol(&cfg).unwrap().aborted);
    }

    #[test]
    fn phase_leak_raises_error_rate() {
        let ch = ChannelParams {
            attenuation_db: 0.0,
            dark: 0.0,
            e_mis: 0.0,
            f_ec: 1.1,
        };
        let mut cfg = config(8, 200_000, 0.1, ch);
        cfg.kernel_a = CorrelationKernel::phase_leak(0.1, 1, 0, vec![0.2]).unwrap();
        let r = run_protocol(&cfg).unwrap();
        assert!(r.tallies.n_est_bit > 0);
    }

    #[test]
    fn coverage_rejects_short_runs() {
        let spec = SequenceSpec::Bernoulli { p: 0.3 };
        assert!(coverage_experiment(BoundKind::ExpectationUpper, spec, 100, 0.05, 0, 1).is_err());
        assert!(coverage_experiment(BoundKind::ExpectationUpper, spec, 100, 0.05, 99, 1).is_err());
        let mart = SequenceSpec::PrefixMartingale { base: 0.2, slope: 0.3 };
        assert!(coverage_experiment(BoundKind::Chernoff, mart, 100, 0.05, 100, 1).is_err());
    }

    #[test]
    fn coverage_at_trivial_confidence_never_fails() {
        for kind in BoundKind::ALL {
            let out = coverage_experiment(kind, SequenceSpec::Bernoulli { p: 0.4 }, 500, 1.0, 200, 4).unwrap();
            assert_eq!(out.violations, 0, "{kind:?}");
        }
    }

    #[test]
    fn coverage_is_reproducible() {
        let spec = SequenceSpec::PrefixMartingale { base: 0.2, slope: 0.3 };
        let a = coverage_experiment(BoundKind::ObservationLower, spec, 1000, 0.05, 200, 12).unwrap();
        let b = coverage_experiment(BoundKind::ObservationLower, spec, 1000, 0.05, 200, 12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_labels_round_trip() {
        for k in BoundKind::ALL {
            assert_eq!(BoundKind::from_label(k.label()), Some(k));
        }
        assert_eq!(BoundKind::from_label("nope"), None);
    }

    #[test]
    fn pivot_blind_kernels_never_flip_to_minus() {
        // An intensity-leak kernel with µ = 0 emits vacuum regardless of bits.
        let k = CorrelationKernel::intensity_leak(0.0, 1, 0, vec![0.1]).unwrap();
        let p = ProtocolParams::simulation(10_000, 0.0, 0.1, 1, 0, 0.5);
        let out = minus_minus_experiment(&k, &k, &p, ConfidenceLevel::new(0.1).unwrap(), 20, 1).unwrap();
        assert!(out.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn range_limit() {
        let k = CorrelationKernel::ideal(0.1).unwrap();
        let p = ProtocolParams::simulation(1000, 0.1, 0.1, 5, 4, 0.5);
        assert_eq!(
            minus_minus_experiment(&k, &k, &p, ConfidenceLevel::new(0.1).unwrap(), 10, 1),
            Err(Error::RangeTooLarge(9, 8))
        );
        let wide = CorrelationKernel::phase_leak(0.1, 2, 0, vec![0.1, 0.1]).unwrap();
        let narrow = ProtocolParams::simulation(1000, 0.1, 0.1, 1, 0, 0.5);
        assert!(minus_minus_experiment(&wide, &k, &narrow, ConfidenceLevel::new(0.1).unwrap(), 10, 1).is_err());
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let k = CorrelationKernel::phase_leak(0.3, 1, 1, vec![0.07, -0.11]).unwrap();
        let table = PMinusTable::new(&k).unwrap();
        let bits: BitVec<u64, Lsb0> = [true, false, true, true, false, false, true].iter().copied().collect();
        let plain: Vec<bool> = bits.iter().map(|b| *b).collect();
        for pivot in 2..5 {
            let direct = p_minus_exact(&k, &plain, pivot).unwrap();
            assert_eq!(table.lookup(&bits, pivot), direct);
        }
    }
}
