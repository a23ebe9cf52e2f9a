//! Invariant checks behind `dualris validate`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualris::association::{is_stable, stable_match, RateMatrix};
use dualris::config::{Scheme, SimConfig};
use dualris::geometry::{noise_power, watts_to_dbm};
use dualris::numerics::{pseudo_inverse, ComplexMatrix, DEFAULT_RTOL};
use dualris::power::{kkt_residual, sum_rate, waterfill};
use dualris::simulation::run_trial;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        zero_forcing(&mut rng),
        water_filling(&mut rng),
        matching(&mut rng),
        noise_floor(),
        config_round_trip(),
        exhaustive_bound(seed),
    ]
}

fn zero_forcing(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(2..=8);
        let n = rng.gen_range(k.max(8)..=64);
        let g = ComplexMatrix::from_fn(k, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let Ok(w) = pseudo_inverse(&g, DEFAULT_RTOL) else {
            return check("zero-forcing", false, "random channel reported singular".into());
        };
        let err = g
            .matmul(&w)
            .unwrap()
            .sub(&ComplexMatrix::identity(k))
            .unwrap()
            .frobenius_norm();
        worst = worst.max(err / g.frobenius_norm());
    }
    check(
        "zero-forcing",
        worst <= 1e-9,
        format!("worst ||GW - I||/||G|| = {worst:.2e}"),
    )
}

fn water_filling(rng: &mut ChaCha8Rng) -> CheckResult {
    let (mut budget_gap, mut kkt, mut beaten): (f64, f64, usize) = (0.0, 0.0, 0);
    for _ in 0..500 {
        let k = rng.gen_range(1..=8);
        let gains: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect();
        let budget = 10f64.powf(rng.gen_range(-2.0..2.0));
        let Ok(a) = waterfill(&gains, 1.0, budget) else {
            return check("water-filling", false, "solver rejected valid input".into());
        };
        budget_gap = budget_gap.max((a.total() - budget).abs() / budget);
        kkt = kkt.max(kkt_residual(&a, &gains, 1.0) / a.water_level);
        let equal = vec![budget / k as f64; k];
        if sum_rate(&gains, &equal, 1.0) > sum_rate(&gains, &a.powers, 1.0) + 1e-12 {
            beaten += 1;
        }
    }
    check(
        "water-filling",
        budget_gap <= 1e-12 && kkt <= 1e-8 && beaten == 0,
        format!("budget gap {budget_gap:.1e}, relative KKT {kkt:.1e}, beaten by equal split {beaten}"),
    )
}

fn matching(rng: &mut ChaCha8Rng) -> CheckResult {
    let (mut unstable, mut max_proposals) = (0, 0);
    for _ in 0..500 {
        let rates = RateMatrix::from_fn(5, 5, |_, _| rng.gen_range(0.0..10.0)).unwrap();
        let out = stable_match(&rates);
        if is_stable(&out.association, &rates).unwrap().is_some() {
            unstable += 1;
        }
        max_proposals = max_proposals.max(out.proposals);
    }
    check(
        "deferred acceptance",
        unstable == 0 && max_proposals <= 25,
        format!("{unstable} unstable, at most {max_proposals} proposals"),
    )
}

fn noise_floor() -> CheckResult {
    let dbm = noise_power(-174.0, 400e6, 10.0).map(watts_to_dbm).unwrap_or(f64::NAN);
    check("noise power", (dbm + 77.98).abs() <= 0.01, format!("{dbm:.4} dBm"))
}

fn config_round_trip() -> CheckResult {
    let mut c = SimConfig {
        devices: 5,
        ris: Some(3),
        seed: 99,
        schemes: vec![Scheme::Greedy, Scheme::Jbpda],
        ..SimConfig::default()
    };
    c.power_dbm = 17.5;
    let ok = SimConfig::parse(&c.to_text()).is_ok_and(|p| p == c);
    check("config round trip", ok, String::new())
}

fn exhaustive_bound(seed: u64) -> CheckResult {
    let c = SimConfig {
        devices: 4,
        antennas: 16,
        elements_y: 8,
        elements_z: 8,
        seed,
        ..SimConfig::default()
    };
    let mut worst = f64::INFINITY;
    for i in 0..10 {
        match run_trial(&c, i) {
            Ok(r) => {
                let es = r.sum_rate(Scheme::Exhaustive).unwrap();
                for s in &r.results {
                    worst = worst.min(es - s.sum_rate);
                }
            }
            Err(e) => return check("exhaustive bound", false, e.to_string()),
        }
    }
    check("exhaustive bound", worst >= 0.0, format!("smallest margin {worst:.3e}"))
}
