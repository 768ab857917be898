//! Kato's martingale concentration bounds and the multiplicative Chernoff bound.
//!
//! For `[0,1]`-valued adapted variables `X_1..X_n` with observed sum `Λ`,
//! Kato's inequality bounds the gap between `Λ` and the sum of conditional
//! expectations `Σ E(X_m | F_{m-1})` by `(b + a(2Λ/n - 1))√n`, with failure
//! probability `exp(-2(b² - a²) / (1 ± 4a/(3√n))²)`. The coefficients below
//! are the closed-form minimizers of that gap once the failure probability is
//! pinned to `ε`.
//!
//! All bounds work with `L = -ln ε` rather than `ε`, so that `ε² ≈ 1e-24`
//! carries no precision loss.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Failure probability `ε ∈ (0, 1]`, stored as `ln ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceLevel {
    ln_eps: f64,
}

impl ConfidenceLevel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return domain(format!("failure probability {epsilon} outside (0, 1]"));
        }
        Ok(Self { ln_eps: epsilon.ln() })
    }

    pub fn from_ln(ln_eps: f64) -> Result<Self> {
        if !(ln_eps <= 0.0) || ln_eps == f64::NEG_INFINITY {
            return domain(format!("ln ε = {ln_eps} outside (-inf, 0]"));
        }
        Ok(Self { ln_eps })
    }

    /// The level `ε²`, used wherever the bound pipeline squares ε.
    pub fn squared(self) -> Self {
        Self {
            ln_eps: 2.0 * self.ln_eps,
        }
    }

    pub fn epsilon(self) -> f64 {
        self.ln_eps.exp()
    }

    pub fn ln_epsilon(self) -> f64 {
        self.ln_eps
    }

    /// `ln(1/ε) ≥ 0`.
    pub fn ln_inv(self) -> f64 {
        -self.ln_eps
    }

    pub fn is_trivial(self) -> bool {
        self.ln_eps == 0.0
    }
}

/// Trial count `n` and observed sum `Λ ∈ [0, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallyFrame {
    n: u64,
    lambda: f64,
}

impl TallyFrame {
    pub fn new(n: u64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return domain("trial count must be positive");
        }
        if !(lambda >= 0.0 && lambda <= n as f64) {
            return domain(format!("observed sum {lambda} outside [0, {n}]"));
        }
        Ok(Self { n, lambda })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoCoefficients {
    pub a: f64,
    pub b: f64,
}

impl KatoCoefficients {
    pub const ZERO: Self = Self { a: 0.0, b: 0.0 };

    /// `b + a(2Λ/n - 1)`, the deviation in units of `√n`.
    pub fn objective(&self, frame: &TallyFrame) -> f64 {
        self.b + self.a * (2.0 * frame.lambda / frame.n as f64 - 1.0)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Branch {
    /// `E - Λ` deviation, constraint denominator `(1 + 4a/(3√n))²`.
    Upper,
    /// `Λ - E` deviation, constraint denominator `(1 - 4a/(3√n))²`.
    Lower,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

fn kato_coeffs(frame: &TallyFrame, conf: ConfidenceLevel, branch: Branch) -> KatoCoefficients {
    if conf.is_trivial() {
        return KatoCoefficients::ZERO;
    }
    let n = frame.n as f64;
    let sqrt_n = n.sqrt();
    let x = frame.lambda / n;
    let v = x * (1.0 - x);
    let l = conf.ln_inv();
    let s = branch.sign();

    // The printed closed forms with Λ(n-Λ) = n²v and ln ε = -L, after
    // cancelling a common factor n^{3/2}.
    let quad = 9.0 * n * v + 2.0 * l;
    let root = (l * quad).sqrt();
    let num = -72.0 * n * v * l - 16.0 * l * l + s * 9.0 * std::f64::consts::SQRT_2 * n * (1.0 - 2.0 * x) * root;
    let a = s * 3.0 * sqrt_n * num / (4.0 * (9.0 * n + 8.0 * l) * quad);

    let shift = 3.0 * sqrt_n + s * 4.0 * a;
    let b = (a * a + l * shift * shift / (18.0 * n)).sqrt();
    KatoCoefficients { a, b }
}

/// `(a₁, b₁)`: optimal coefficients for bounding `Σ E - Λ` from above.
pub fn kato_coeffs_upper(frame: &TallyFrame, conf: ConfidenceLevel) -> KatoCoefficients {
    kato_coeffs(frame, conf, Branch::Upper)
}

/// `(a₂, b₂)`: optimal coefficients for bounding `Λ - Σ E` from above.
pub fn kato_coeffs_lower(frame: &TallyFrame, conf: ConfidenceLevel) -> KatoCoefficients {
    kato_coeffs(frame, conf, Branch::Lower)
}

/// Failure probability exponent `-2(b² - a²)/(1 ± 4a/(3√n))²` for the given
/// coefficients; equals `ln ε` at the closed-form optimum.
pub fn kato_log_failure(n: u64, coeffs: KatoCoefficients, upper: bool) -> f64 {
    let s = if upper { 1.0 } else { -1.0 };
    let d = 1.0 + s * 4.0 * coeffs.a / (3.0 * (n as f64).sqrt());
    -2.0 * (coeffs.b * coeffs.b - coeffs.a * coeffs.a) / (d * d)
}

/// `U_e^ε(Λ)`: upper bound on the sum of conditional expectations given the
/// observed sum. Capped at `n`.
pub fn expectation_upper(frame: &TallyFrame, conf: ConfidenceLevel) -> f64 {
    let c = kato_coeffs_upper(frame, conf);
    let n = frame.n as f64;
    (frame.lambda + c.objective(frame) * n.sqrt()).min(n)
}

/// `L_e^ε(Λ)`: lower bound on the sum of conditional expectations. Floored at 0.
pub fn expectation_lower(frame: &TallyFrame, conf: ConfidenceLevel) -> f64 {
    let c = kato_coeffs_lower(frame, conf);
    let n = frame.n as f64;
    (frame.lambda - c.objective(frame) * n.sqrt()).max(0.0)
}

fn check_expectation_sum(expectation_sum: f64, n: u64) -> Result<()> {
    if n == 0 {
        return domain("trial count must be positive");
    }
    if !(expectation_sum >= 0.0 && expectation_sum <= n as f64) {
        return domain(format!("expectation sum {expectation_sum} outside [0, {n}]"));
    }
    Ok(())
}

fn observation_upper_at(expectation_sum: f64, n: u64, conf: ConfidenceLevel, lambda_hat: f64) -> Result<f64> {
    let frame = TallyFrame::new(n, lambda_hat.clamp(0.0, n as f64))?;
    let c = kato_coeffs_lower(&frame, conf);
    let sqrt_n = (n as f64).sqrt();
    let denom = 1.0 - 2.0 * c.a / sqrt_n;
    if denom <= 0.0 {
        return domain(format!("U_m denominator {denom} is not positive"));
    }
    Ok((expectation_sum + (c.b - c.a) * sqrt_n) / denom)
}

fn observation_lower_at(expectation_sum: f64, n: u64, conf: ConfidenceLevel, lambda_hat: f64) -> Result<f64> {
    let frame = TallyFrame::new(n, lambda_hat.clamp(0.0, n as f64))?;
    let c = kato_coeffs_upper(&frame, conf);
    let sqrt_n = (n as f64).sqrt();
    let denom = 1.0 + 2.0 * c.a / sqrt_n;
    if denom <= 0.0 {
        return domain(format!("L_m denominator {denom} is not positive"));
    }
    Ok((expectation_sum - (c.b - c.a) * sqrt_n) / denom)
}

/// `U_m^ε(Σ E)`: upper bound on the observed sum given the expectation sum.
///
/// The coefficients depend on an unknown `Λ`. They are evaluated at
/// `Λ̂ = Σ E`, then once more at the resulting bound, and the larger of the two
/// bounds is kept. Capped at `n`.
pub fn observation_upper(expectation_sum: f64, n: u64, conf: ConfidenceLevel) -> Result<f64> {
    check_expectation_sum(expectation_sum, n)?;
    let nf = n as f64;
    if conf.is_trivial() {
        return Ok(expectation_sum);
    }
    if expectation_sum >= nf {
        return Ok(nf);
    }
    let first = observation_upper_at(expectation_sum, n, conf, expectation_sum)?;
    let second = observation_upper_at(expectation_sum, n, conf, first)?;
    Ok(first.max(second).min(nf))
}

/// `L_m^ε(Σ E)`: lower bound on the observed sum given the expectation sum.
/// Same two-pass coefficient evaluation as [`observation_upper`]; the smaller
/// bound is kept and floored at 0.
pub fn observation_lower(expectation_sum: f64, n: u64, conf: ConfidenceLevel) -> Result<f64> {
    check_expectation_sum(expectation_sum, n)?;
    if conf.is_trivial() {
        return Ok(expectation_sum);
    }
    let first = observation_lower_at(expectation_sum, n, conf, expectation_sum)?;
    let second = observation_lower_at(expectation_sum, n, conf, first)?;
    Ok(first.min(second).max(0.0))
}

/// `C_U^ε(µ) = (1+δ)µ`, the multiplicative Chernoff upper bound for a sum of
/// independent `{0,1}` variables with mean `µ`.
///
/// Written as `µ + (L + √(L² + 8µL))/2` with `L = ln(1/ε)`, which is the same
/// quantity and tends to `L` as `µ → 0`.
pub fn chernoff_upper(mu_expect: f64, conf: ConfidenceLevel) -> Result<f64> {
    if !(mu_expect >= 0.0) || !mu_expect.is_finite() {
        return domain(format!("Chernoff mean {mu_expect} must be finite and nonnegative"));
    }
    let l = conf.ln_inv();
    Ok(mu_expect + 0.5 * (l + (l * l + 8.0 * mu_expect * l).sqrt()))
}
