//! Coherent-state source models with finite-range correlations.
//!
//! A kernel maps the modulation bits to the coherent amplitude emitted in
//! each round. The amplitude of round `i` may depend on `s_j` for
//! `i - r2 <= j <= i + r1` only, so bit `s_i` affects the emissions of rounds
//! `i - r1 ..= i + r2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A finite-range amplitude map.
pub trait Kernel: Send + Sync {
    /// Backward range: how many earlier rounds' emissions a bit can reach.
    fn r1(&self) -> usize;
    /// Forward range.
    fn r2(&self) -> usize;

    /// Amplitude emitted in a round, given `window = [s_{i-r2}, ..., s_i, ..., s_{i+r1}]`
    /// (length `r1 + r2 + 1`, own bit at index `r2`).
    fn amplitude(&self, window: &[bool]) -> Complex64;

    /// Declared lower bound on `exp(-|α|²)` over every window.
    fn vacuum_floor(&self) -> f64;

    fn range_total(&self) -> usize {
        self.r1() + self.r2()
    }
}

/// The shipped kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationKernel {
    /// `α_i = √µ e^{iπ s_i}`, no correlation.
    Ideal { mu: f64 },
    /// `α_i = √µ exp(iπ(s_i + Σ_{k≠0} c_k s_{i+k}))`.
    PhaseLeak {
        mu: f64,
        r1: usize,
        r2: usize,
        /// `c_k` for `k = -r2..=r1`, skipping `k = 0`.
        coefficients: Vec<f64>,
    },
    /// `|α_i|² = µ(1 + Σ_{k≠0} g_k(2s_{i+k} - 1))` clipped at 0, phase `π s_i`.
    IntensityLeak {
        mu: f64,
        r1: usize,
        r2: usize,
        coefficients: Vec<f64>,
    },
}

impl CorrelationKernel {
    pub fn ideal(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self::Ideal { mu })
    }

    pub fn phase_leak(mu: f64, r1: usize, r2: usize, coefficients: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        check_coefficients(r1, r2, &coefficients)?;
        Ok(Self::PhaseLeak {
            mu,
            r1,
            r2,
            coefficients,
        })
    }

    pub fn intensity_leak(mu: f64, r1: usize, r2: usize, coefficients: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        check_coefficients(r1, r2, &coefficients)?;
        Ok(Self::IntensityLeak {
            mu,
            r1,
            r2,
            coefficients,
        })
    }

    pub fn mu(&self) -> f64 {
        match self {
            Self::Ideal { mu } | Self::PhaseLeak { mu, .. } | Self::IntensityLeak { mu, .. } => *mu,
        }
    }

    /// Re-checks a kernel built without a constructor (e.g. deserialized).
    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu())?;
        match self {
            Self::Ideal { .. } => Ok(()),
            Self::PhaseLeak {
                r1, r2, coefficients, ..
            }
            | Self::IntensityLeak {
                r1, r2, coefficients, ..
            } => check_coefficients(*r1, *r2, coefficients),
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return domain(format!("intensity {mu} must be finite and nonnegative"));
    }
    Ok(())
}

fn check_coefficients(r1: usize, r2: usize, coefficients: &[f64]) -> Result<()> {
    if coefficients.len() != r1 + r2 {
        return domain(format!(
            "expected {} leak coefficients for r1={r1}, r2={r2}, got {}",
            r1 + r2,
            coefficients.len()
        ));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return domain("leak coefficients must be finite");
    }
    Ok(())
}

/// Pairs each neighbour bit in the window with its coefficient.
fn neighbours<'a>(r2: usize, window: &'a [bool], coefficients: &'a [f64]) -> impl Iterator<Item = (bool, f64)> + 'a {
    window
        .iter()
        .enumerate()
        .filter(move |&(j, _)| j != r2)
        .map(|(_, &s)| s)
        .zip(coefficients.iter().copied())
}

fn bit(s: bool) -> f64 {
    if s {
        1.0
    } else {
        0.0
    }
}

impl Kernel for CorrelationKernel {
    fn r1(&self) -> usize {
        match self {
            Self::Ideal { .. } => 0,
            Self::PhaseLeak { r1, .. } | Self::IntensityLeak { r1, .. } => *r1,
        }
    }

    fn r2(&self) -> usize {
        match self {
            Self::Ideal { .. } => 0,
            Self::PhaseLeak { r2, .. } | Self::IntensityLeak { r2, .. } => *r2,
        }
    }

    fn amplitude(&self, window: &[bool]) -> Complex64 {
        match self {
            Self::Ideal { mu } => Complex64::from_polar(mu.sqrt(), PI * bit(window[0])),
            Self::PhaseLeak {
                mu, r2, coefficients, ..
            } => {
                let leak: f64 = neighbours(*r2, window, coefficients).map(|(s, c)| c * bit(s)).sum();
                Complex64::from_polar(mu.sqrt(), PI * (bit(window[*r2]) + leak))
            }
            Self::IntensityLeak {
                mu, r2, coefficients, ..
            } => {
                let skew: f64 = neighbours(*r2, window, coefficients)
                    .map(|(s, g)| g * (2.0 * bit(s) - 1.0))
                    .sum();
                let intensity = (mu * (1.0 + skew)).max(0.0);
                Complex64::from_polar(intensity.sqrt(), PI * bit(window[*r2]))
            }
        }
    }

    fn vacuum_floor(&self) -> f64 {
        match self {
            Self::Ideal { mu } | Self::PhaseLeak { mu, .. } => (-mu).exp(),
            Self::IntensityLeak { mu, coefficients, .. } => {
                let spread: f64 = coefficients.iter().map(|g| g.abs()).sum();
                (-mu * (1.0 + spread)).exp()
            }
        }
    }
}

/// `⟨α|β⟩ = exp(-|α|²/2 - |β|²/2 + conj(α)β)`.
pub fn coherent_overlap(alpha: Complex64, beta: Complex64) -> Complex64 {
    (-0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr() + alpha.conj() * beta).exp()
}

/// `|⟨0|α⟩|² = e^{-|α|²}`.
pub fn vacuum_probability(alpha: Complex64) -> f64 {
    (-alpha.norm_sqr()).exp()
}

/// Amplitude of round `i` in a bit string; bits outside the string read as 0.
pub fn amplitude_at<K: Kernel + ?Sized>(kernel: &K, bits: &[bool], i: usize) -> Complex64 {
    let (r1, r2) = (kernel.r1(), kernel.r2());
    let window: Vec<bool> = (0..=r1 + r2)
        .map(|j| {
            let idx = i as isize + j as isize - r2 as isize;
            idx >= 0 && (idx as usize) < bits.len() && bits[idx as usize]
        })
        .collect();
    kernel.amplitude(&window)
}

/// Emissions of rounds `i - r1 ..= i + r2` around a pivot `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    pub amplitudes: Vec<Complex64>,
}

impl BlockState {
    /// Joint vacuum probability of the block (product over rounds).
    pub fn vacuum_probability(&self) -> f64 {
        self.amplitudes.iter().map(|&a| vacuum_probability(a)).product()
    }

    /// `⟨self|other⟩` for product coherent states.
    pub fn overlap(&self, other: &BlockState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(&a, &b)| coherent_overlap(a, b))
            .product()
    }
}

/// The two block states around `pivot_index`, with the pivot bit forced to 0
/// and 1. `context_bits` must cover every bit the block depends on, i.e.
/// indices `pivot - r1 - r2 ..= pivot + r1 + r2`.
pub fn block_states<K: Kernel + ?Sized>(
    kernel: &K,
    context_bits: &[bool],
    pivot_index: usize,
) -> Result<(BlockState, BlockState)> {
    let r = kernel.range_total();
    let lo = pivot_index as isize - r as isize;
    let hi = pivot_index + r;
    if lo < 0 || hi >= context_bits.len() {
        return Err(Error::OutOfWindow {
            pivot: pivot_index,
            needed_lo: lo,
            needed_hi: hi,
            len: context_bits.len(),
        });
    }
    let mut bits = context_bits.to_vec();
    let mut block = |pivot_bit: bool| {
        bits[pivot_index] = pivot_bit;
        let amplitudes = (pivot_index - kernel.r1()..=pivot_index + kernel.r2())
            .map(|j| amplitude_at(kernel, &bits, j))
            .collect();
        BlockState { amplitudes }
    };
    let zero = block(false);
    let one = block(true);
    Ok((zero, one))
}

/// Probability of projecting the pivot's ancilla onto `|−⟩`:
/// `‖φ₀ − φ₁‖²/4 = (1 − Re⟨φ₀|φ₁⟩)/2`.
pub fn p_minus_exact<K: Kernel + ?Sized>(kernel: &K, context_bits: &[bool], pivot_index: usize) -> Result<f64> {
    let (zero, one) = block_states(kernel, context_bits, pivot_index)?;
    Ok(p_minus_of_blocks(&zero, &one))
}

pub fn p_minus_of_blocks(zero: &BlockState, one: &BlockState) -> f64 {
    (0.5 * (1.0 - zero.overlap(one).re)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumCheck {
    pub holds: bool,
    pub p_minus: f64,
    /// `1 − P̲₀^{r1+r2+1}`.
    pub bound: f64,
    /// `bound − p_minus`; negative on violation.
    pub slack: f64,
}

/// Checks `P⁻ ≤ 1 − P̲₀^{r1+r2+1}`. A violation means the declared floor is
/// wrong for this kernel.
pub fn vacuum_bound_check<K: Kernel + ?Sized>(
    kernel: &K,
    context_bits: &[bool],
    pivot_index: usize,
    p0_floor: f64,
) -> Result<VacuumCheck> {
    if !(p0_floor > 0.0 && p0_floor <= 1.0) {
        return domain(format!("vacuum floor {p0_floor} outside (0, 1]"));
    }
    let p_minus = p_minus_exact(kernel, context_bits, pivot_index)?;
    let block_len = (kernel.range_total() + 1) as f64;
    let bound = -(block_len * p0_floor.ln()).exp_m1();
    let slack = bound - p_minus;
    Ok(VacuumCheck {
        holds: slack >= -1e-15,
        p_minus,
        bound,
        slack,
    })
}
