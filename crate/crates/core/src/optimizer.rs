//! Derivative-free key-rate maximization over `(µ, P_est)`.
//!
//! A 25×25 log-spaced grid is followed by two refinement rounds, each a fresh
//! 25×25 grid over a window one third the size of the previous one, centred on
//! the incumbent and clipped to the search box.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::Result;
use crate::security::{key_rate, ProtocolParams};

pub const GRID_POINTS: usize = 25;
pub const REFINEMENT_ROUNDS: usize = 2;
pub const SHRINK: f64 = 3.0;

/// Search box, in natural units. Bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub mu_min: f64,
    pub mu_max: f64,
    pub p_est_min: f64,
    pub p_est_max: f64,
}

impl Default for SearchBox {
    fn default() -> Self {
        Self {
            mu_min: 1e-9,
            mu_max: 1.0,
            p_est_min: 1e-3,
            p_est_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub mu: f64,
    pub p_est: f64,
    pub rate: f64,
    /// 0 for the coarse grid, then 1, 2 for the refinements.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub mu_opt: f64,
    pub p_est_opt: f64,
    pub rate_opt: f64,
    /// False when no evaluated point produced a positive key.
    pub found_key: bool,
    /// Incumbent rate after each round.
    pub incumbents: Vec<f64>,
    pub trace: Vec<GridPoint>,
}

/// Higher rate wins; ties go to smaller µ, then smaller P_est.
fn better(a: &GridPoint, b: &GridPoint) -> Ordering {
    a.rate
        .total_cmp(&b.rate)
        .then_with(|| b.mu.total_cmp(&a.mu))
        .then_with(|| b.p_est.total_cmp(&a.p_est))
}

fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (l0, l1) = (lo.log10(), hi.log10());
    (0..GRID_POINTS)
        .map(|i| {
            if i + 1 == GRID_POINTS {
                hi
            } else {
                10f64.powf(l0 + (l1 - l0) * i as f64 / (GRID_POINTS - 1) as f64)
            }
        })
        .collect()
}

/// Log-space window of `width` decades around `center`, clipped to `[lo, hi]`.
fn window(center: f64, width: f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = center.log10();
    let a = (c - width / 2.0).max(lo.log10());
    let b = (c + width / 2.0).min(hi.log10());
    (10f64.powf(a).max(lo), 10f64.powf(b).min(hi))
}

fn rate_at(template: &ProtocolParams, channel: &ChannelParams, mu: f64, p_est: f64) -> Result<f64> {
    let params = ProtocolParams { mu, p_est, ..*template };
    Ok(key_rate(&params, channel)?.rate)
}

/// Maximizes the key rate over `(µ, P_est)` with every other protocol field
/// taken from `template`.
pub fn optimize_params(
    template: &ProtocolParams,
    channel: &ChannelParams,
    bounds: SearchBox,
) -> Result<OptimizationResult> {
    let mut trace = Vec::with_capacity((REFINEMENT_ROUNDS + 1) * GRID_POINTS * GRID_POINTS);
    let mut incumbents = Vec::with_capacity(REFINEMENT_ROUNDS + 1);
    let mut mu_range = (bounds.mu_min, bounds.mu_max);
    let mut p_range = (bounds.p_est_min, bounds.p_est_max);
    let mut mu_width = bounds.mu_max.log10() - bounds.mu_min.log10();
    let mut p_width = bounds.p_est_max.log10() - bounds.p_est_min.log10();
    let mut best: Option<GridPoint> = None;

    for round in 0..=REFINEMENT_ROUNDS {
        let mus = log_grid(mu_range.0, mu_range.1);
        let ps = log_grid(p_range.0, p_range.1);
        let cells: Vec<(f64, f64)> = mus.iter().flat_map(|&m| ps.iter().map(move |&p| (m, p))).collect();
        let points = cells
            .par_iter()
            .map(|&(mu, p_est)| rate_at(template, channel, mu, p_est).map(|rate| GridPoint { mu, p_est, rate, round }))
            .collect::<Result<Vec<_>>>()?;

        for p in &points {
            if best.is_none_or(|b| better(p, &b) == Ordering::Greater) {
                best = Some(*p);
            }
        }
        trace.extend(points);
        let incumbent = best.expect("grid is nonempty");
        incumbents.push(incumbent.rate);

        mu_width /= SHRINK;
        p_width /= SHRINK;
        mu_range = window(incumbent.mu, mu_width, bounds.mu_min, bounds.mu_max);
        p_range = window(incumbent.p_est, p_width, bounds.p_est_min, bounds.p_est_max);
    }

    let best = best.expect("grid is nonempty");
    Ok(OptimizationResult {
        mu_opt: best.mu,
        p_est_opt: best.p_est,
        rate_opt: best.rate,
        found_key: best.rate > 0.0,
        incumbents,
        trace,
    })
}

/// Optimizes at a fixed channel, round count, correlation range and `ε_tot`,
/// using ideal-coherent vacuum floors.
pub fn optimize(
    channel: &ChannelParams,
    n_rounds: u64,
    r1: usize,
    r2: usize,
    eps_tot: f64,
) -> Result<OptimizationResult> {
    let template = ProtocolParams::simulation(n_rounds, 0.1, 0.1, r1, r2, eps_tot);
    optimize_params(&template, channel, SearchBox::default())
}
