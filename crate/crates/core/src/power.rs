//! Water-filling over the interference-free ZF channels.
//!
//! Maximizes `Σ log2(1 + γ_k p_k / σ²)` subject to `Σ p_k ≤ P` and `p_k ≥ 0`.
//! Stationarity gives `γ_k/(σ² + γ_k p_k) = μ` on active devices, so
//! `p_k = [1/μ − σ²/γ_k]⁺` with the water level `1/μ` set by the budget.

use crate::error::{Error, Result};

/// Maximum bisection steps on the water level.
pub const MAX_BISECTION_STEPS: usize = 200;
/// Relative budget residual that ends the bisection early.
pub const BUDGET_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Watts per device.
    pub powers: Vec<f64>,
    /// Lagrange multiplier μ of the budget constraint, in 1/W.
    pub water_level: f64,
    /// Budget in watts.
    pub budget: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

fn check(gains: &[f64], noise: f64, budget: f64) -> Result<()> {
    if gains.is_empty() {
        return Err(Error::InvalidInput("water-filling needs at least one gain".into()));
    }
    if gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidInput("gains must be positive and finite".into()));
    }
    if !(noise > 0.0) {
        return Err(Error::InvalidNoise(noise));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "power budget must be positive, got {budget}"
        )));
    }
    Ok(())
}

fn allocated(gains: &[f64], noise: f64, mu: f64) -> f64 {
    let level = 1.0 / mu;
    gains.iter().map(|g| (level - noise / g).max(0.0)).sum()
}

/// Water level μ such that `Σ [1/μ − σ²/γ_k]⁺ = P`, by bisection.
pub fn find_water_level(gains: &[f64], noise: f64, budget: f64) -> Result<f64> {
    check(gains, noise, budget)?;
    let floor_max = gains.iter().map(|g| noise / g).fold(0.0, f64::max);
    // Σ(lo) ≥ P and Σ(hi) = 0.
    let mut lo = 1.0 / (budget + floor_max);
    let mut hi = gains.iter().map(|g| g / noise).fold(0.0, f64::max);
    let mut mu = lo;
    for _ in 0..MAX_BISECTION_STEPS {
        mu = 0.5 * (lo + hi);
        let total = allocated(gains, noise, mu);
        if (total - budget).abs() <= BUDGET_RTOL * budget {
            break;
        }
        if total > budget {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    // Solve the budget equation exactly on the active set found above.
    let active: Vec<f64> = gains
        .iter()
        .filter(|&&g| noise / g < 1.0 / mu)
        .map(|g| noise / g)
        .collect();
    if !active.is_empty() {
        let exact = active.len() as f64 / (budget + active.iter().sum::<f64>());
        let level = 1.0 / exact;
        let consistent = gains.iter().all(|g| (noise / g < 1.0 / mu) == (noise / g < level));
        if consistent {
            return Ok(exact);
        }
    }
    Ok(mu)
}

pub fn waterfill(gains: &[f64], noise: f64, budget: f64) -> Result<PowerAllocation> {
    let mu = find_water_level(gains, noise, budget)?;
    let floors: Vec<f64> = gains.iter().map(|g| noise / g).collect();
    // Active set from the sorted floors: device m opens when filling every
    // lower floor up to its own costs less than the budget. Written with
    // floor differences, as are the powers below, so weak channels whose
    // floors dwarf the budget do not lose it to cancellation.
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]));
    let mut open = 1;
    while open < order.len() {
        let f = floors[order[open]];
        let cost: f64 = order[..open].iter().map(|&j| f - floors[j]).sum();
        if cost >= budget {
            break;
        }
        open += 1;
    }
    let active = &order[..open];
    let n = open as f64;
    let mut powers = vec![0.0; gains.len()];
    for &k in active {
        let spread: f64 = active.iter().map(|&j| floors[j] - floors[k]).sum();
        powers[k] = (budget + spread) / n;
    }
    let residual = budget - powers.iter().sum::<f64>();
    let share = residual / n;
    if active.iter().all(|&k| powers[k] + share >= 0.0) {
        active.iter().for_each(|&k| powers[k] += share);
    }
    Ok(PowerAllocation {
        powers,
        water_level: mu,
        budget,
    })
}

/// Largest KKT violation: stationarity on active devices, dual feasibility
/// on inactive ones, and the relative budget gap (the budget always binds
/// at the optimum since every gain is positive).
pub fn kkt_residual(alloc: &PowerAllocation, gains: &[f64], noise: f64) -> f64 {
    let mu = alloc.water_level;
    let stationarity = alloc
        .powers
        .iter()
        .zip(gains)
        .map(|(&p, &g)| {
            if p > 0.0 {
                (g / (noise + g * p) - mu).abs()
            } else {
                (g / noise - mu).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    let negative = alloc.powers.iter().map(|p| (-p).max(0.0)).fold(0.0, f64::max);
    let budget_gap = (alloc.total() - alloc.budget).abs() / alloc.budget;
    stationarity.max(negative).max(budget_gap)
}

/// `Σ log2(1 + γ_k p_k/σ²)`.
pub fn sum_rate(gains: &[f64], powers: &[f64], noise: f64) -> f64 {
    gains
        .iter()
        .zip(powers)
        .map(|(g, p)| (1.0 + g * p / noise).log2())
        .sum()
}
