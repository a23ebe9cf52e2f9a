//! Browser bindings: a small power sweep, water-filling and a stable
//! matching, each returning flat numeric arrays for the demo page.

use wasm_bindgen::prelude::*;

use dualris::association::{stable_match, RateMatrix, EXHAUSTIVE_LIMIT};
use dualris::config::{Scheme, SimConfig, SweepAxis};
use dualris::power::waterfill;
use dualris::simulation::monte_carlo_sweep;

/// Columns per row of [`power_sweep`]: budget then one mean per scheme.
pub const SWEEP_COLUMNS: usize = 1 + Scheme::ALL.len();

/// Mean sum rate of every scheme over a power grid `0..=max_dbm` in
/// `step_db` steps, on `elements × elements` panels. Rows are
/// `[dBm, jbpda, es, gs, rs]`; exhaustive search is `NaN` above its size
/// limit.
pub fn power_sweep(
    devices: usize,
    antennas: usize,
    elements: usize,
    trials: usize,
    seed: u64,
    max_dbm: f64,
    step_db: f64,
) -> Result<Vec<f64>, String> {
    if step_db.is_nan() || step_db <= 0.0 {
        return Err("step must be positive".into());
    }
    let grid: Vec<f64> = (0..)
        .map(|i| f64::from(i) * step_db)
        .take_while(|p| *p <= max_dbm + 1e-9)
        .collect();
    let mut schemes = Scheme::ALL.to_vec();
    if devices > EXHAUSTIVE_LIMIT {
        schemes.retain(|s| *s != Scheme::Exhaustive);
    }
    let config = SimConfig {
        devices,
        antennas,
        elements_y: elements,
        elements_z: elements,
        trials,
        seed,
        schemes,
        sweep: SweepAxis::Power,
        grid,
        ..SimConfig::default()
    };
    let report = monte_carlo_sweep(&config).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(report.points.len() * SWEEP_COLUMNS);
    for (i, point) in report.points.iter().enumerate() {
        out.push(point.value);
        for scheme in Scheme::ALL {
            out.push(report.stats(i, scheme).map_or(f64::NAN, |s| s.mean));
        }
    }
    Ok(out)
}

/// Water-filling powers followed by the water level `1/μ`.
pub fn water_levels(gains: &[f64], noise: f64, budget: f64) -> Result<Vec<f64>, String> {
    let a = waterfill(gains, noise, budget).map_err(|e| e.to_string())?;
    let mut out = a.powers;
    out.push(1.0 / a.water_level);
    Ok(out)
}

/// Device-proposing stable matching on a row-major `ris × devices` rate
/// table. Returns the panel of each device (`-1` when unmatched) followed by
/// the proposal count.
pub fn matching(rates: &[f64], ris: usize, devices: usize) -> Result<Vec<i32>, String> {
    if rates.len() != ris * devices {
        return Err(format!("expected {} rates, got {}", ris * devices, rates.len()));
    }
    let table = RateMatrix::from_fn(ris, devices, |l, k| rates[l * devices + k]).map_err(|e| e.to_string())?;
    let out = stable_match(&table);
    let mut v: Vec<i32> = (0..devices)
        .map(|k| out.association.ris_of(k).map_or(-1, |l| l as i32))
        .collect();
    v.push(out.proposals as i32);
    Ok(v)
}

#[wasm_bindgen(js_name = powerSweep)]
pub fn power_sweep_js(
    devices: usize,
    antennas: usize,
    elements: usize,
    trials: usize,
    seed: u32,
    max_dbm: f64,
    step_db: f64,
) -> Result<Vec<f64>, JsError> {
    power_sweep(devices, antennas, elements, trials, u64::from(seed), max_dbm, step_db).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = waterLevels)]
pub fn water_levels_js(gains: Vec<f64>, noise: f64, budget: f64) -> Result<Vec<f64>, JsError> {
    water_levels(&gains, noise, budget).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = stableMatching)]
pub fn matching_js(rates: Vec<f64>, ris: usize, devices: usize) -> Result<Vec<i32>, JsError> {
    matching(&rates, ris, devices).map_err(|e| JsError::new(&e))
}
