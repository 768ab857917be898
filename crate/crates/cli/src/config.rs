//! Run configuration: `key = value` lines grouped under `[section]` headers.
//!
//! Every key is optional; missing keys take the defaults below, which match
//! the reference simulation parameters (d = 1e-10, e_mis = 1 %, f = 1.1,
//! ε_tot = 1e-10, N = 1e14).

use std::path::Path;

use fcs_qkd::simulator::{BoundKind, SequenceSpec};
use fcs_qkd::{ChannelParams, CorrelationKernel, ProtocolParams, Thresholds, VacuumFloors};
use serde::{Deserialize, Deserializer};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub protocol: ProtocolSection,
    pub channel: ChannelSection,
    pub kernel_a: KernelSection,
    pub kernel_b: KernelSection,
    pub sweep: SweepSection,
    pub sim: SimSection,
    pub coverage: CoverageSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(deserialize_with = "count")]
    pub n_rounds: u64,
    pub mu: f64,
    pub p_est: f64,
    pub r1: usize,
    pub r2: usize,
    pub eps_tot: f64,
    /// Explicit vacuum floors; both or neither.
    pub p0a: Option<f64>,
    pub p0b: Option<f64>,
    pub optimize: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            n_rounds: 100_000_000_000_000,
            mu: 0.01,
            p_est: 0.1,
            r1: 0,
            r2: 0,
            eps_tot: 1e-10,
            p0a: None,
            p0b: None,
            optimize: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub attenuation_db: f64,
    pub dark: f64,
    pub e_mis: f64,
    pub f_ec: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let t = ChannelParams::standard(0.0);
        Self {
            attenuation_db: t.attenuation_db,
            dark: t.dark,
            e_mis: t.e_mis,
            f_ec: t.f_ec,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// `ideal`, `phase_leak` or `intensity_leak`.
    pub kind: String,
    /// Defaults to the protocol intensity.
    pub mu: Option<f64>,
    pub r1: usize,
    pub r2: usize,
    pub coefficients: Vec<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            kind: "ideal".into(),
            mu: None,
            r1: 0,
            r2: 0,
            coefficients: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub attenuation_start: f64,
    pub attenuation_stop: f64,
    pub attenuation_step: f64,
    pub range_list: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            attenuation_start: 0.0,
            attenuation_stop: 60.0,
            attenuation_step: 2.0,
            range_list: vec![0, 10, 100, 500],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub seed: u64,
    #[serde(deserialize_with = "count")]
    pub n_rounds: u64,
    pub n_sig_tol: Option<u64>,
    pub n_est_tol: Option<u64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            seed: 0,
            n_rounds: 1_000_000,
            n_sig_tol: None,
            n_est_tol: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSection {
    /// Bound labels: `U_e`, `L_e`, `U_m`, `L_m`, `C_U`.
    pub bounds: Vec<String>,
    /// `bernoulli` and/or `martingale`.
    pub sequences: Vec<String>,
    pub p: f64,
    pub base: f64,
    pub slope: f64,
    pub n: Vec<u64>,
    pub eps: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self {
            bounds: BoundKind::ALL.iter().map(|k| k.label().to_string()).collect(),
            sequences: vec!["bernoulli".into(), "martingale".into()],
            p: 0.3,
            base: 0.2,
            slope: 0.3,
            n: vec![10_000],
            eps: vec![0.05, 0.01],
            trials: 2000,
            seed: 0,
        }
    }
}

/// Accepts `1000000` as well as `1e6` for round counts.
fn count<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Count {
        Int(u64),
        Float(f64),
    }
    match Count::deserialize(d)? {
        Count::Int(v) => Ok(v),
        Count::Float(f) if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 => Ok(f as u64),
        Count::Float(f) => Err(serde::de::Error::custom(format!("{f} is not a nonnegative integer"))),
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn protocol(&self) -> Result<ProtocolParams, CliError> {
        let p = &self.protocol;
        let floors = match (p.p0a, p.p0b) {
            (None, None) => VacuumFloors::IdealCoherent,
            (Some(p0a), Some(p0b)) => VacuumFloors::Explicit { p0a, p0b },
            _ => return Err(config_err("[protocol] p0a and p0b must be given together")),
        };
        let params = ProtocolParams {
            n_rounds: p.n_rounds,
            mu: p.mu,
            p_est: p.p_est,
            r1: p.r1,
            r2: p.r2,
            eps_tot: p.eps_tot,
            floors,
        };
        params.validate().map_err(config_err)?;
        Ok(params)
    }

    pub fn channel(&self) -> Result<ChannelParams, CliError> {
        let c = &self.channel;
        let params = ChannelParams {
            attenuation_db: c.attenuation_db,
            dark: c.dark,
            e_mis: c.e_mis,
            f_ec: c.f_ec,
        };
        params.validate().map_err(config_err)?;
        Ok(params)
    }

    pub fn kernels(&self) -> Result<(CorrelationKernel, CorrelationKernel), CliError> {
        Ok((
            build_kernel("kernel_a", &self.kernel_a, self.protocol.mu)?,
            build_kernel("kernel_b", &self.kernel_b, self.protocol.mu)?,
        ))
    }

    pub fn thresholds(&self) -> Result<Option<Thresholds>, CliError> {
        match (self.sim.n_sig_tol, self.sim.n_est_tol) {
            (None, None) => Ok(None),
            (Some(n_sig_tol), Some(n_est_tol)) => Ok(Some(Thresholds { n_sig_tol, n_est_tol })),
            _ => Err(config_err("[sim] n_sig_tol and n_est_tol must be given together")),
        }
    }

    /// Attenuations `start, start + step, ...` up to `stop`.
    pub fn attenuations(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.sweep;
        if !(s.attenuation_step > 0.0) || !s.attenuation_step.is_finite() {
            return Err(config_err(format!(
                "[sweep] attenuation_step {} must be positive",
                s.attenuation_step
            )));
        }
        if !(s.attenuation_start <= s.attenuation_stop) || s.attenuation_start < 0.0 {
            return Err(config_err(format!(
                "[sweep] need 0 <= attenuation_start <= attenuation_stop, got {} and {}",
                s.attenuation_start, s.attenuation_stop
            )));
        }
        let count = ((s.attenuation_stop - s.attenuation_start) / s.attenuation_step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|k| s.attenuation_start + k as f64 * s.attenuation_step)
            .collect())
    }

    pub fn coverage_suite(&self) -> Result<Vec<(BoundKind, SequenceSpec)>, CliError> {
        let c = &self.coverage;
        if c.trials < 100 {
            return Err(config_err(format!(
                "[coverage] trials must be at least 100, got {}",
                c.trials
            )));
        }
        if c.n.contains(&0) {
            return Err(config_err("[coverage] sequence lengths must be positive"));
        }
        if let Some(e) = c.eps.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(config_err(format!("[coverage] eps {e} outside (0, 1]")));
        }
        let mut specs = Vec::new();
        for s in &c.sequences {
            specs.push(match s.as_str() {
                "bernoulli" => SequenceSpec::Bernoulli { p: c.p },
                "martingale" => SequenceSpec::PrefixMartingale {
                    base: c.base,
                    slope: c.slope,
                },
                other => return Err(config_err(format!("[coverage] unknown sequence `{other}`"))),
            });
        }
        let mut kinds = Vec::new();
        for b in &c.bounds {
            kinds.push(BoundKind::from_label(b).ok_or_else(|| config_err(format!("[coverage] unknown bound `{b}`")))?);
        }
        let mut suite = Vec::new();
        for spec in specs {
            for &kind in &kinds {
                // The Chernoff bound only covers independent variables.
                if kind == BoundKind::Chernoff && matches!(spec, SequenceSpec::PrefixMartingale { .. }) {
                    continue;
                }
                suite.push((kind, spec));
            }
        }
        Ok(suite)
    }
}

fn build_kernel(section: &str, k: &KernelSection, default_mu: f64) -> Result<CorrelationKernel, CliError> {
    let mu = k.mu.unwrap_or(default_mu);
    let built = match k.kind.as_str() {
        "ideal" => CorrelationKernel::ideal(mu),
        "phase_leak" => CorrelationKernel::phase_leak(mu, k.r1, k.r2, k.coefficients.clone()),
        "intensity_leak" => CorrelationKernel::intensity_leak(mu, k.r1, k.r2, k.coefficients.clone()),
        other => return Err(config_err(format!("[{section}] unknown kind `{other}`"))),
    };
    built.map_err(|e| config_err(format!("[{section}] {e}")))
}
