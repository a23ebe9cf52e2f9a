//! Alternating joint optimization and the Monte Carlo harness.
//!
//! Each JBPDA iteration matches devices to panels by deferred acceptance,
//! co-phases the matched panels, applies zero-forcing and water-filling, and
//! then rebuilds the rate matrix from the resulting rates for the next round.
//! The first round uses matching-independent single-pair rates. Baselines
//! (exhaustive, greedy, random association) go through the same evaluator on
//! the same channel draw.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::association::{
    exhaustive_search, greedy_association, random_association, stable_match, Association, RateMatrix,
};
use crate::beamforming::{zf_beamformer, zf_gains_from_gram, Beamformer};
use crate::channel::{assemble_channel_matrix, stacked_gram, CascadeSource, CascadeTable};
use crate::config::{Scheme, SimConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, NetworkGeometry};
use crate::numerics::{hermitian_pd_inverse, ComplexMatrix, DEFAULT_RTOL};
use crate::power::{waterfill, PowerAllocation};

/// Geometry re-draws allowed per trial before it is declared failed.
pub const MAX_REDRAWS: usize = 10;

/// Noise, budget and rank tolerance shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// σ² in watts.
    pub noise: f64,
    /// P_AP in watts.
    pub budget: f64,
    pub rtol: f64,
}

impl LinkBudget {
    pub fn new(noise: f64, budget: f64) -> Self {
        Self {
            noise,
            budget,
            rtol: DEFAULT_RTOL,
        }
    }
}

/// ZF + water-filling outcome for one association.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub association: Association,
    /// Device of each ZF row, ascending.
    pub served: Vec<usize>,
    /// ZF gains `γ` per served row.
    pub gains: Vec<f64>,
    pub allocation: PowerAllocation,
    /// bits/s/Hz per device; zero for unserved devices.
    pub device_rates: Vec<f64>,
    pub sum_rate: f64,
    inverse_gram: ComplexMatrix,
}

pub fn evaluate_association<S: CascadeSource + ?Sized>(
    source: &S,
    assoc: &Association,
    link: &LinkBudget,
) -> Result<Evaluation> {
    let served: Vec<usize> = assoc.pairs().map(|(k, _)| k).collect();
    if served.is_empty() {
        return Err(Error::InvalidAssociation("no matched device".into()));
    }
    let gram = stacked_gram(source, assoc);
    let gains = zf_gains_from_gram(&gram, link.rtol)?;
    let inverse_gram = hermitian_pd_inverse(&gram).ok_or(Error::SingularChannel {
        condition: f64::INFINITY,
        limit: 1.0 / link.rtol,
    })?;
    let allocation = waterfill(&gains, link.noise, link.budget)?;
    let mut device_rates = vec![0.0; assoc.num_devices()];
    for (i, &k) in served.iter().enumerate() {
        device_rates[k] = (1.0 + allocation.powers[i] * gains[i] / link.noise).log2();
    }
    let sum_rate = device_rates.iter().sum();
    Ok(Evaluation {
        association: assoc.clone(),
        served,
        gains,
        allocation,
        device_rates,
        sum_rate,
        inverse_gram,
    })
}

/// Single-pair rates `log2(1 + (P/K)·‖g_{l,k}‖²/σ²)` used before any
/// association exists.
pub fn proxy_rates<S: CascadeSource + ?Sized>(source: &S, link: &LinkBudget) -> Result<RateMatrix> {
    let share = link.budget / source.num_devices() as f64;
    RateMatrix::from_fn(source.num_ris(), source.num_devices(), |l, k| {
        (1.0 + share * source.gain(l, k) / link.noise).log2()
    })
}

/// Rate device `k` would get through panel `l`, given the current
/// zero-forcing rows of everyone else. The current holder of `l` is assumed
/// to give it up. Power is the device's current allocation, or an equal
/// share when it currently has none. For the pairs already matched this is
/// exactly the achieved rate.
pub fn refined_rates<S: CascadeSource + ?Sized>(
    source: &S,
    current: &Evaluation,
    link: &LinkBudget,
) -> Result<RateMatrix> {
    let (l_count, k_count) = (source.num_ris(), source.num_devices());
    let q = &current.inverse_gram;
    let rows: Vec<(usize, usize)> = current
        .served
        .iter()
        .map(|&k| (current.association.ris_of(k).expect("served device is matched"), k))
        .collect();
    let mut row_of = vec![None; k_count];
    for (i, &(_, k)) in rows.iter().enumerate() {
        row_of[k] = Some(i);
    }
    let share = link.budget / k_count as f64;
    let mut power = vec![share; k_count];
    for (i, &k) in current.served.iter().enumerate() {
        if current.allocation.powers[i] > 0.0 {
            power[k] = current.allocation.powers[i];
        }
    }

    let mut table = vec![vec![0.0; k_count]; l_count];
    for (l, out) in table.iter_mut().enumerate() {
        let holder_row = current.association.device_of(l).and_then(|h| row_of[h]);
        let reference = source
            .collinear_per_panel()
            .then(|| panel_projection(source, &rows, q, l, 0));
        for (k, slot) in out.iter_mut().enumerate() {
            let gain = source.gain(l, k);
            let (beta, y, scale) = match &reference {
                Some((beta, y)) => {
                    let g0 = source.gain(l, 0);
                    (beta, y, if g0 > 0.0 { gain / g0 } else { 0.0 })
                }
                None => {
                    let (beta, y) = panel_projection(source, &rows, q, l, k);
                    table_entry(
                        slot,
                        gain,
                        &beta,
                        &y,
                        q,
                        &removed(row_of[k], holder_row),
                        1.0,
                        power[k],
                        link,
                    );
                    continue;
                }
            };
            table_entry(
                slot,
                gain,
                beta,
                y,
                q,
                &removed(row_of[k], holder_row),
                scale,
                power[k],
                link,
            );
        }
    }
    RateMatrix::new(table)
}

fn removed(a: Option<usize>, b: Option<usize>) -> Vec<usize> {
    let mut t: Vec<usize> = a.into_iter().chain(b).collect();
    t.dedup();
    t
}

/// `β_i = g_iᴴ·g_{l,k}` over the current rows and `y = Q·β`.
fn panel_projection<S: CascadeSource + ?Sized>(
    source: &S,
    rows: &[(usize, usize)],
    q: &ComplexMatrix,
    l: usize,
    k: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let beta: Vec<Complex64> = rows.iter().map(|&r| source.cross(r, (l, k))).collect();
    let y = q.apply(&beta).expect("Gram inverse matches row count");
    (beta, y)
}

/// Residual ZF gain after projecting out all current rows except `removed`,
/// using the Schur complement of the full inverse Gram `Q`.
#[allow(clippy::too_many_arguments)]
fn table_entry(
    slot: &mut f64,
    gain: f64,
    beta: &[Complex64],
    y: &[Complex64],
    q: &ComplexMatrix,
    removed: &[usize],
    scale: f64,
    power: f64,
    link: &LinkBudget,
) {
    let mut quad: f64 = beta.iter().zip(y).map(|(b, v)| (b.conj() * v).re).sum();
    for &t in removed {
        quad -= 2.0 * (beta[t].conj() * y[t]).re;
        for &s in removed {
            quad += (beta[t].conj() * q[(t, s)] * beta[s]).re;
        }
    }
    let z: Vec<Complex64> = removed
        .iter()
        .map(|&t| y[t] - removed.iter().map(|&s| q[(t, s)] * beta[s]).sum::<Complex64>())
        .collect();
    let correction = match removed {
        [] => 0.0,
        [t] => z[0].norm_sqr() / q[(*t, *t)].re,
        [a, b] => {
            let (qa, qb, qab) = (q[(*a, *a)].re, q[(*b, *b)].re, q[(*a, *b)]);
            let det = qa * qb - qab.norm_sqr();
            // zᴴ·inv([[qa, qab], [conj(qab), qb]])·z
            ((z[0].norm_sqr() * qb + z[1].norm_sqr() * qa) - 2.0 * (z[0].conj() * qab * z[1]).re) / det
        }
        _ => unreachable!("at most two rows are removed"),
    };
    let residual = (gain - scale * (quad - correction)).max(0.0);
    *slot = (1.0 + power * residual / link.noise).log2();
}

#[derive(Debug, Clone, PartialEq)]
pub struct JbpdaOutcome {
    /// Best iterate seen.
    pub best: Evaluation,
    pub beamformer: Beamformer,
    /// Best sum rate so far after each iteration.
    pub trace: Vec<f64>,
    /// Sum rate of each iterate.
    pub raw_trace: Vec<f64>,
    pub iterations: usize,
    /// Sum rate settled within the tolerance.
    pub converged: bool,
    /// Stopped because a matching recurred; the deterministic loop would
    /// only repeat from there.
    pub cycled: bool,
    /// Proposals made by the matching round that produced the best iterate.
    pub proposals: usize,
    pub total_proposals: usize,
}

/// Alternating matching / ZF / water-filling until the sum rate moves by at
/// most `tolerance` (relative), a matching recurs, or `max_iterations` is hit.
pub fn jbpda_solve<S: CascadeSource + ?Sized>(
    source: &S,
    link: &LinkBudget,
    max_iterations: usize,
    tolerance: f64,
) -> Result<JbpdaOutcome> {
    let mut utilities = proxy_rates(source, link)?;
    let mut best: Option<(Evaluation, usize)> = None;
    let mut trace = Vec::new();
    let mut raw_trace = Vec::new();
    let mut total_proposals = 0;
    let mut converged = false;
    let mut cycled = false;
    let mut seen: Vec<Association> = Vec::new();
    for iteration in 1..=max_iterations.max(1) {
        let matching = stable_match(&utilities);
        total_proposals += matching.proposals;
        let repeat = seen.contains(&matching.association);
        let eval = evaluate_association(source, &matching.association, link)?;
        let sum = eval.sum_rate;
        let previous = raw_trace.last().copied();
        raw_trace.push(sum);
        if best.as_ref().is_none_or(|(b, _)| sum > b.sum_rate) {
            best = Some((eval.clone(), matching.proposals));
        }
        trace.push(best.as_ref().unwrap().0.sum_rate);
        if let Some(prev) = previous {
            if (sum - prev).abs() <= tolerance * sum.abs() {
                converged = true;
                break;
            }
        }
        if repeat {
            cycled = true;
            break;
        }
        seen.push(matching.association.clone());
        if iteration < max_iterations {
            utilities = refined_rates(source, &eval, link)?;
        }
    }
    let (best, proposals) = best.expect("at least one iteration");
    let stacked = assemble_channel_matrix(source, &best.association)?;
    let beamformer = zf_beamformer(&stacked.matrix, link.rtol)?;
    Ok(JbpdaOutcome {
        best,
        beamformer,
        iterations: trace.len(),
        trace,
        raw_trace,
        converged,
        cycled,
        proposals,
        total_proposals,
    })
}

/// Best association over every maximal matching; singular candidates are skipped.
pub fn exhaustive_solve<S: CascadeSource + ?Sized>(source: &S, link: &LinkBudget) -> Result<Evaluation> {
    let (best, score) = exhaustive_search(source.num_devices(), source.num_ris(), |a| {
        evaluate_association(source, a, link).map_or(f64::NEG_INFINITY, |e| e.sum_rate)
    })?;
    if score == f64::NEG_INFINITY {
        return Err(Error::SingularChannel {
            condition: f64::INFINITY,
            limit: 1.0 / link.rtol,
        });
    }
    evaluate_association(source, &best, link)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub sum_rate: f64,
    pub device_rates: Vec<f64>,
    pub matched: usize,
    pub association: Association,
}

impl SchemeResult {
    fn from_eval(scheme: Scheme, e: &Evaluation) -> Self {
        Self {
            scheme,
            sum_rate: e.sum_rate,
            device_rates: e.device_rates.clone(),
            matched: e.association.matched_count(),
            association: e.association.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub index: u64,
    pub seed: u64,
    pub results: Vec<SchemeResult>,
    /// Best-so-far JBPDA sum rate per iteration (empty without JBPDA).
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub cycled: bool,
    pub proposals: usize,
    pub redraws: usize,
    /// Seconds; zero where no clock is available.
    pub wall_time: f64,
}

impl TrialReport {
    pub fn sum_rate(&self, scheme: Scheme) -> Option<f64> {
        self.results.iter().find(|r| r.scheme == scheme).map(|r| r.sum_rate)
    }
}

pub fn trial_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.0.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Draws the deployment for trial `index` (geometry stream of the trial RNG).
pub fn draw_geometry(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<NetworkGeometry> {
    config.layout.sample(
        rng,
        config.devices,
        config.num_ris(),
        config.antennas,
        config.elements_y,
        config.elements_z,
    )
}

/// Runs every configured scheme on one channel draw for each AP budget in
/// `budgets_dbm`. The deployment is shared across budgets.
pub fn run_trial_budgets(config: &SimConfig, index: u64, budgets_dbm: &[f64]) -> Result<Vec<TrialReport>> {
    let clock = Stopwatch::start();
    let seed = trial_seed(config.seed, index);
    let mut geometry_rng = ChaCha8Rng::seed_from_u64(seed);
    let carrier = config.carrier();
    let noise = carrier.noise_power()?;
    for redraws in 0..=MAX_REDRAWS {
        let geometry = draw_geometry(config, &mut geometry_rng)?;
        let table = CascadeTable::generate(&geometry, &carrier)?;
        let attempt: Result<Vec<TrialReport>> = budgets_dbm
            .iter()
            .map(|&p| {
                // Same scheme stream at every budget: baselines draw the same
                // associations across a power sweep.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                run_schemes(config, &table, &LinkBudget::new(noise, dbm_to_watts(p)), &mut rng).map(
                    |(results, jbpda)| TrialReport {
                        index,
                        seed,
                        results,
                        trace: jbpda.as_ref().map_or_else(Vec::new, |o| o.trace.clone()),
                        iterations: jbpda.as_ref().map_or(0, |o| o.iterations),
                        converged: jbpda.as_ref().is_none_or(|o| o.converged),
                        cycled: jbpda.as_ref().is_some_and(|o| o.cycled),
                        proposals: jbpda.as_ref().map_or(0, |o| o.proposals),
                        redraws,
                        wall_time: 0.0,
                    },
                )
            })
            .collect();
        match attempt {
            Ok(mut reports) => {
                let t = clock.seconds();
                reports.iter_mut().for_each(|r| r.wall_time = t);
                return Ok(reports);
            }
            Err(Error::SingularChannel { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::TrialFailed {
        trial: index,
        redraws: MAX_REDRAWS,
    })
}

pub fn run_trial(config: &SimConfig, index: u64) -> Result<TrialReport> {
    Ok(run_trial_budgets(config, index, &[config.power_dbm])?.remove(0))
}

/// Evaluates the configured schemes, in `Scheme::ALL` order, on one source.
pub fn run_schemes<S: CascadeSource + ?Sized>(
    config: &SimConfig,
    source: &S,
    link: &LinkBudget,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SchemeResult>, Option<JbpdaOutcome>)> {
    let mut results = Vec::new();
    let mut jbpda = None;
    for scheme in Scheme::ALL {
        if !config.has(scheme) {
            continue;
        }
        let eval = match scheme {
            Scheme::Jbpda => {
                let out = jbpda_solve(source, link, config.max_iterations, config.rate_tolerance)?;
                let e = out.best.clone();
                jbpda = Some(out);
                e
            }
            Scheme::Exhaustive => exhaustive_solve(source, link)?,
            Scheme::Greedy => {
                let assoc = greedy_association(&proxy_rates(source, link)?, rng);
                evaluate_association(source, &assoc, link)?
            }
            Scheme::Random => {
                let assoc = random_association(source.num_devices(), source.num_ris(), rng);
                evaluate_association(source, &assoc, link)?
            }
        };
        results.push(SchemeResult::from_eval(scheme, &eval));
    }
    Ok((results, jbpda))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeStats {
    pub scheme: Scheme,
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub trials: usize,
    /// `100·(mean_JBPDA − mean)/mean`, when JBPDA ran.
    pub gap_vs_jbpda_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub stats: Vec<SchemeStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl AggregateReport {
    pub fn stats(&self, point: usize, scheme: Scheme) -> Option<&SchemeStats> {
        self.points.get(point)?.stats.iter().find(|s| s.scheme == scheme)
    }
}

pub fn summarize(value: f64, reports: &[TrialReport], schemes: &[Scheme]) -> SweepPoint {
    let mut stats: Vec<SchemeStats> = Scheme::ALL
        .iter()
        .filter(|s| schemes.contains(s))
        .map(|&scheme| {
            let xs: Vec<f64> = reports.iter().filter_map(|r| r.sum_rate(scheme)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SchemeStats {
                scheme,
                mean,
                stderr: (var / n).sqrt(),
                min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
                max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                trials: xs.len(),
                gap_vs_jbpda_percent: None,
            }
        })
        .collect();
    if let Some(j) = stats.iter().find(|s| s.scheme == Scheme::Jbpda).map(|s| s.mean) {
        for s in &mut stats {
            s.gap_vs_jbpda_percent = Some(if s.mean != 0.0 {
                100.0 * (j - s.mean) / s.mean
            } else {
                0.0
            });
        }
    }
    SweepPoint { value, stats }
}

fn collect_trials<T: Send>(trials: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials as u64).map(f).collect()
    }
}

/// Runs `trials` independent trials per sweep point and aggregates them.
/// A power sweep reuses each trial's deployment across all budgets.
pub fn monte_carlo_sweep(config: &SimConfig) -> Result<AggregateReport> {
    config.validate()?;
    let points = config.points();
    let per_point: Vec<Vec<TrialReport>> = match config.sweep {
        SweepAxis::Power | SweepAxis::None => {
            let by_trial = collect_trials(config.trials, |i| run_trial_budgets(config, i, &points))?;
            (0..points.len())
                .map(|j| by_trial.iter().map(|t| t[j].clone()).collect())
                .collect()
        }
        SweepAxis::Devices | SweepAxis::Antennas => points
            .iter()
            .map(|&v| {
                let c = config.at_point(v);
                collect_trials(c.trials, |i| run_trial(&c, i))
            })
            .collect::<Result<_>>()?,
    };
    Ok(AggregateReport {
        axis: config.sweep,
        points: points
            .iter()
            .zip(&per_point)
            .map(|(&v, reports)| summarize(v, reports, &config.schemes))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Mean best-so-far sum rate per iteration; finished trials hold their
    /// final value.
    pub mean_trace: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub cycled: Vec<bool>,
    /// Whether every trial's best-so-far trace is nondecreasing.
    pub monotone: bool,
}

/// JBPDA-only trials recording the iteration trace.
pub fn convergence_study(config: &SimConfig) -> Result<ConvergenceReport> {
    let mut c = config.clone();
    c.schemes = vec![Scheme::Jbpda];
    c.validate()?;
    let reports = collect_trials(c.trials, |i| run_trial(&c, i))?;
    let len = reports.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mean_trace = (0..len)
        .map(|i| {
            reports
                .iter()
                .map(|r| r.trace.get(i).or(r.trace.last()).copied().unwrap_or(0.0))
                .sum::<f64>()
                / reports.len() as f64
        })
        .collect();
    Ok(ConvergenceReport {
        mean_trace,
        iterations: reports.iter().map(|r| r.iterations).collect(),
        converged: reports.iter().map(|r| r.converged).collect(),
        cycled: reports.iter().map(|r| r.cycled).collect(),
        monotone: reports.iter().all(|r| r.trace.windows(2).all(|w| w[1] >= w[0])),
    })
}
