//! Honest-relay click statistics for two weak coherent pulses interfering on a
//! balanced beam splitter with threshold detectors.
//!
//! Each user's pulse crosses half of the total attenuation. A fraction
//! `e_mis` of the interfering intensity leaks into the wrong output port.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::security::ProtocolParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Total loss between the two users, in dB.
    pub attenuation_db: f64,
    /// Dark-count probability per detector per round.
    pub dark: f64,
    pub e_mis: f64,
    /// Error-correction efficiency `f ≥ 1`.
    pub f_ec: f64,
}

impl ChannelParams {
    pub fn standard(attenuation_db: f64) -> Self {
        Self {
            attenuation_db,
            dark: 1e-10,
            e_mis: 0.01,
            f_ec: 1.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation_db >= 0.0) {
            return domain(format!("attenuation {} dB must be nonnegative", self.attenuation_db));
        }
        if !(0.0..=1.0).contains(&self.dark) {
            return domain(format!("dark-count probability {} outside [0, 1]", self.dark));
        }
        if !(0.0..=0.5).contains(&self.e_mis) {
            return domain(format!("misalignment {} outside [0, 1/2]", self.e_mis));
        }
        if !(self.f_ec >= 1.0) {
            return domain(format!("error-correction efficiency {} below 1", self.f_ec));
        }
        Ok(())
    }

    pub fn arm_transmittance(&self) -> f64 {
        arm_transmittance(self.attenuation_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution {
    pub p_left_only: f64,
    pub p_right_only: f64,
    pub p_none: f64,
    pub p_double: f64,
}

impl ClickDistribution {
    pub fn p_single(&self) -> f64 {
        self.p_left_only + self.p_right_only
    }

    pub fn total(&self) -> f64 {
        self.p_left_only + self.p_right_only + self.p_none + self.p_double
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTallies {
    pub p_succ: f64,
    pub e_bit: f64,
    pub exp_n_sig: f64,
    pub exp_n_est: f64,
    pub exp_n_est_bit: f64,
}

/// Transmittance of one arm when the relay sits midway: `10^(-(dB/2)/10)`.
pub fn arm_transmittance(attenuation_db: f64) -> f64 {
    10f64.powf(-attenuation_db / 20.0)
}

/// Output intensities `(I_L, I_R)` for two pulses of mean photon number `mu`
/// after one arm each. The left port is constructive when the phases agree.
pub fn interference_intensities(mu: f64, eta_arm: f64, same_phase: bool, e_mis: f64) -> (f64, f64) {
    let total = 2.0 * mu * eta_arm;
    let right = total * e_mis;
    let left = total - right;
    if same_phase {
        (left, right)
    } else {
        (right, left)
    }
}

/// Port intensities for arbitrary complex amplitudes arriving from each user
/// (before the channel). With `alpha_b = ±alpha_a` this reduces to
/// [`interference_intensities`].
pub fn interference_from_amplitudes(alpha_a: Complex64, alpha_b: Complex64, eta_arm: f64, e_mis: f64) -> (f64, f64) {
    let constructive = 0.5 * eta_arm * (alpha_a + alpha_b).norm_sqr();
    let destructive = 0.5 * eta_arm * (alpha_a - alpha_b).norm_sqr();
    (
        (1.0 - e_mis) * constructive + e_mis * destructive,
        (1.0 - e_mis) * destructive + e_mis * constructive,
    )
}

fn click_probability(intensity: f64, dark: f64) -> f64 {
    // 1 - (1-d)e^{-I}, arranged to keep precision for tiny I and d.
    let silent = (1.0 - dark) * (-intensity).exp();
    if silent > 0.5 {
        -((-dark).ln_1p() - intensity).exp_m1()
    } else {
        1.0 - silent
    }
}

pub fn click_distribution(i_left: f64, i_right: f64, dark: f64) -> ClickDistribution {
    let ql = click_probability(i_left, dark);
    let qr = click_probability(i_right, dark);
    ClickDistribution {
        p_left_only: ql * (1.0 - qr),
        p_right_only: qr * (1.0 - ql),
        p_none: (1.0 - ql) * (1.0 - qr),
        p_double: ql * qr,
    }
}

/// Expected per-round statistics, averaging over the four equally likely
/// `(s_A, s_B)` pairs. A sifted error is a left click with unequal bits or a
/// right click with equal bits (after Bob's flip on right clicks).
pub fn expected_statistics(protocol: &ProtocolParams, channel: &ChannelParams) -> Result<ExpectedTallies> {
    let eta = channel.arm_transmittance();
    let mut p_succ = 0.0;
    let mut p_err = 0.0;
    for (s_a, s_b) in [(false, false), (false, true), (true, false), (true, true)] {
        let same = s_a == s_b;
        let (il, ir) = interference_intensities(protocol.mu, eta, same, channel.e_mis);
        let dist = click_distribution(il, ir, channel.dark);
        p_succ += 0.25 * dist.p_single();
        p_err += 0.25 * if same { dist.p_right_only } else { dist.p_left_only };
    }
    if !(p_succ > 0.0) {
        return Err(Error::DegenerateChannel);
    }
    let e_bit = (p_err / p_succ).clamp(0.0, 1.0);
    let n = protocol.n_rounds as f64;
    let p_est = protocol.p_est;
    Ok(ExpectedTallies {
        p_succ,
        e_bit,
        exp_n_sig: n * (1.0 - p_est) * p_succ,
        exp_n_est: n * p_est * p_succ,
        exp_n_est_bit: n * p_est * p_succ * e_bit,
    })
}
