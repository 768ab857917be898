//! Finite-key bound pipeline: ε allocation, round grouping, the `|−−⟩`
//! signal-count bound, the phase-error upper bound and the key length.

use serde::{Deserialize, Serialize};

use crate::channel::{expected_statistics, ChannelParams, ExpectedTallies};
use crate::concentration::{chernoff_upper, expectation_upper, observation_upper, ConfidenceLevel, TallyFrame};
use crate::error::{domain, Error, Result};

/// Where the vacuum-probability floors come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VacuumFloors {
    /// Ideal weak coherent pulses: `P̲₀A = P̲₀B = e^{-µ}`.
    IdealCoherent,
    Explicit {
        p0a: f64,
        p0b: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n_rounds: u64,
    pub mu: f64,
    pub p_est: f64,
    pub r1: usize,
    pub r2: usize,
    pub eps_tot: f64,
    pub floors: VacuumFloors,
}

impl ProtocolParams {
    /// Parameters with ideal-coherent vacuum floors.
    pub fn simulation(n_rounds: u64, mu: f64, p_est: f64, r1: usize, r2: usize, eps_tot: f64) -> Self {
        Self {
            n_rounds,
            mu,
            p_est,
            r1,
            r2,
            eps_tot,
            floors: VacuumFloors::IdealCoherent,
        }
    }

    pub fn range_total(&self) -> usize {
        self.r1 + self.r2
    }

    pub fn p0a_floor(&self) -> f64 {
        match self.floors {
            VacuumFloors::IdealCoherent => (-self.mu).exp(),
            VacuumFloors::Explicit { p0a, .. } => p0a,
        }
    }

    pub fn p0b_floor(&self) -> f64 {
        match self.floors {
            VacuumFloors::IdealCoherent => (-self.mu).exp(),
            VacuumFloors::Explicit { p0b, .. } => p0b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return domain("round count must be positive");
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return domain(format!("intensity {} must be finite and nonnegative", self.mu));
        }
        if !(self.p_est > 0.0 && self.p_est < 1.0) {
            return domain(format!("estimation probability {} outside (0, 1)", self.p_est));
        }
        if !(self.eps_tot > 0.0 && self.eps_tot < 1.0) {
            return domain(format!("total security parameter {} outside (0, 1)", self.eps_tot));
        }
        for floor in [self.p0a_floor(), self.p0b_floor()] {
            if !(floor > 0.0 && floor <= 1.0) {
                return domain(format!("vacuum floor {floor} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

/// The six security parameters. `eps_cor + eps_sec = eps_tot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    pub eps: f64,
    pub eps_cor: f64,
    pub eps_tilde: f64,
    pub eps_prime: f64,
    pub eps_sec: f64,
    pub eps_tot: f64,
    /// `ln ε`, computed from `ln ε_tot` so it survives squaring.
    pub ln_eps: f64,
}

impl EpsilonBudget {
    pub fn confidence(&self) -> ConfidenceLevel {
        ConfidenceLevel::from_ln(self.ln_eps).expect("budget ε lies in (0, 1)")
    }
}

/// `ε = ε_cor = ε̃ = ε_tot / (2 + 2√(r1+r2+4))`.
pub fn epsilon_budget(eps_tot: f64, r1: usize, r2: usize) -> Result<EpsilonBudget> {
    if !(eps_tot > 0.0 && eps_tot < 1.0) {
        return domain(format!("total security parameter {eps_tot} outside (0, 1)"));
    }
    let root = ((r1 + r2 + 4) as f64).sqrt();
    let divisor = 2.0 + 2.0 * root;
    let eps = eps_tot / divisor;
    let eps_prime = root * eps;
    Ok(EpsilonBudget {
        eps,
        eps_cor: eps,
        eps_tilde: eps,
        eps_prime,
        eps_sec: 2.0 * eps_prime + eps,
        eps_tot,
        ln_eps: eps_tot.ln() - divisor.ln(),
    })
}

/// Sizes of the `r1+r2+1` interleaved groups; group `g` holds rounds
/// `g, g + (r1+r2+1), ...` (1-based).
pub fn group_sizes(n_rounds: u64, r1: usize, r2: usize) -> Vec<u64> {
    let groups = (r1 + r2 + 1) as u64;
    (1..=groups)
        .map(|g| if g > n_rounds { 0 } else { (n_rounds - g) / groups + 1 })
        .collect()
}

/// Probability that a round is a signal round with both ancillas found in
/// `|−⟩`, at the worst case allowed by the vacuum floors.
fn minus_minus_probability(params: &ProtocolParams) -> f64 {
    let block = (params.range_total() + 1) as f64;
    let miss = |floor: f64| -(block * floor.ln()).exp_m1();
    (1.0 - params.p_est) * miss(params.p0a_floor()) * miss(params.p0b_floor())
}

/// `N̄^{−−}_sig = Σ_g C_U^{ε²}[N_g (1−P_est)(1−P̲₀A^{r+1})(1−P̲₀B^{r+1})]`,
/// failing with probability at most `(r1+r2+1)ε²`.
pub fn minus_minus_bound(params: &ProtocolParams, eps: ConfidenceLevel) -> Result<f64> {
    let conf = eps.squared();
    let p = minus_minus_probability(params);
    // Group sizes take only the values q+1 (first `rem` groups) and q.
    let groups = (params.range_total() + 1) as u64;
    let q = params.n_rounds / groups;
    let rem = params.n_rounds % groups;
    let big = chernoff_upper((q + 1) as f64 * p, conf)?;
    let small = chernoff_upper(q as f64 * p, conf)?;
    Ok(rem as f64 * big + (groups - rem) as f64 * small)
}

/// The pieces of the phase-error bound, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorTerms {
    pub minus_minus: f64,
    pub ue_est_bit: f64,
    pub ue_minus_minus: f64,
    pub expectation_bound: f64,
    pub n_ph_bar: f64,
}

pub fn phase_error_terms(n_est_bit: f64, params: &ProtocolParams, eps: ConfidenceLevel) -> Result<PhaseErrorTerms> {
    let n = params.n_rounds;
    let nf = n as f64;
    if !(n_est_bit >= 0.0 && n_est_bit <= nf) {
        return domain(format!("bit-error count {n_est_bit} outside [0, {n}]"));
    }
    let conf = eps.squared();
    let minus_minus = minus_minus_bound(params, eps)?;
    let ue_est_bit = expectation_upper(&TallyFrame::new(n, n_est_bit)?, conf);
    let ue_minus_minus = expectation_upper(&TallyFrame::new(n, minus_minus.min(nf))?, conf);

    let p_est = params.p_est;
    let expectation_bound = 2.0 * (1.0 - p_est) / p_est * ue_est_bit
        + 2.0 * ue_minus_minus
        + 2.0 * std::f64::consts::SQRT_2 * ((1.0 - p_est) / p_est).sqrt() * (ue_est_bit * ue_minus_minus).sqrt();

    let n_ph_bar = if expectation_bound >= nf {
        nf
    } else {
        observation_upper(expectation_bound, n, conf)?
    };
    Ok(PhaseErrorTerms {
        minus_minus,
        ue_est_bit,
        ue_minus_minus,
        expectation_bound,
        n_ph_bar,
    })
}

/// `n̄_ph`: upper bound on phase errors among signal rounds, failing with
/// probability at most `(r1+r2+4)ε²`. Capped at `N`.
pub fn phase_error_upper(n_est_bit: f64, params: &ProtocolParams, eps: ConfidenceLevel) -> Result<f64> {
    Ok(phase_error_terms(n_est_bit, params, eps)?.n_ph_bar)
}

pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability {p} outside [0, 1]"));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (-p).ln_1p() / std::f64::consts::LN_2)
}

/// Bits revealed by error correction: `f · n_sig · H₂(e_bit)`.
pub fn ec_leak(n_sig: f64, e_bit: f64, f_ec: f64) -> Result<f64> {
    Ok(f_ec * n_sig * binary_entropy(e_bit)?)
}

/// `l = n_tol(1 − H₂(n̄_ph/n_tol)) − leak − log₂(2/ε_cor) − 2log₂(1/(2ε̃))`,
/// with the entropy saturated at 1 once the ratio reaches 1/2 and `l`
/// clamped at 0.
pub fn key_length(n_sig_tol: f64, n_ph_bar: f64, leak_ec: f64, budget: &EpsilonBudget) -> Result<f64> {
    if !(n_sig_tol > 0.0) {
        return domain(format!("signal threshold {n_sig_tol} must be positive"));
    }
    let ratio = n_ph_bar / n_sig_tol;
    let entropy = if ratio >= 0.5 {
        1.0
    } else {
        binary_entropy(ratio.max(0.0))?
    };
    let length =
        n_sig_tol * (1.0 - entropy) - leak_ec - (1.0 - budget.eps_cor.log2()) - 2.0 * (-1.0 - budget.eps_tilde.log2());
    Ok(length.max(0.0))
}

/// Abort thresholds: the run aborts if `n_sig < n_sig_tol` or
/// `n_est_bit > n_est_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub n_sig_tol: u64,
    pub n_est_tol: u64,
}

impl Thresholds {
    /// `n_sig_tol = max(1, ⌊E n_sig⌋)`, `n_est_tol = ⌈E n_est_bit⌉`.
    pub fn expected(stats: &ExpectedTallies) -> Self {
        Self {
            n_sig_tol: (stats.exp_n_sig.floor() as u64).max(1),
            n_est_tol: stats.exp_n_est_bit.ceil() as u64,
        }
    }

    /// Thresholds for a channel with no clicks at all.
    pub fn degenerate() -> Self {
        Self {
            n_sig_tol: 1,
            n_est_tol: 0,
        }
    }
}

/// Observed counts from a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub n_sig: u64,
    pub n_est_bit: u64,
    pub n_sig_tol: u64,
    pub n_est_tol: u64,
}

impl Tallies {
    pub fn aborts(&self) -> bool {
        self.n_est_bit > self.n_est_tol || self.n_sig < self.n_sig_tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub budget: EpsilonBudget,
    /// `None` when the channel produces no successful clicks.
    pub expected: Option<ExpectedTallies>,
    pub thresholds: Thresholds,
    pub phase_error: Option<PhaseErrorTerms>,
    pub n_ph_bar: f64,
    pub leak_ec: f64,
    pub key_length: f64,
    pub rate: f64,
}

pub fn key_rate(params: &ProtocolParams, channel: &ChannelParams) -> Result<KeyRateResult> {
    key_rate_with(params, channel, None)
}

/// Expected-tally pipeline: statistics → `N̄^{−−}` → `n̄_ph` → leakage → key
/// length. `thresholds` overrides the expected-tally defaults.
pub fn key_rate_with(
    params: &ProtocolParams,
    channel: &ChannelParams,
    thresholds: Option<Thresholds>,
) -> Result<KeyRateResult> {
    params.validate()?;
    channel.validate()?;
    let budget = epsilon_budget(params.eps_tot, params.r1, params.r2)?;
    let n = params.n_rounds as f64;

    let stats = match expected_statistics(params, channel) {
        Ok(s) => s,
        Err(Error::DegenerateChannel) => {
            return Ok(KeyRateResult {
                budget,
                expected: None,
                thresholds: thresholds.unwrap_or_else(Thresholds::degenerate),
                phase_error: None,
                n_ph_bar: n,
                leak_ec: 0.0,
                key_length: 0.0,
                rate: 0.0,
            })
        }
        Err(e) => return Err(e),
    };
    let thresholds = thresholds.unwrap_or_else(|| Thresholds::expected(&stats));
    let terms = phase_error_terms((thresholds.n_est_tol as f64).min(n), params, budget.confidence())?;
    let leak_ec = ec_leak(stats.exp_n_sig, stats.e_bit, channel.f_ec)?;
    let key_length = key_length(thresholds.n_sig_tol as f64, terms.n_ph_bar, leak_ec, &budget)?;
    Ok(KeyRateResult {
        budget,
        expected: Some(stats),
        thresholds,
        phase_error: Some(terms),
        n_ph_bar: terms.n_ph_bar,
        leak_ec,
        key_length,
        rate: key_length / n,
    })
}
