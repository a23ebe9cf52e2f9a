use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualris::association::{
    all_matchings, exhaustive_search, greedy_association, is_stable, random_association, stable_match, Association,
    RateMatrix,
};
use dualris::beamforming::zf_beamformer;
use dualris::geometry::{path_loss_linear, SPEED_OF_LIGHT};
use dualris::numerics::{pseudo_inverse, ComplexMatrix, DEFAULT_RTOL};
use dualris::power::{kkt_residual, sum_rate, waterfill};

fn matrix(k: usize, n: usize, vals: &[(f64, f64)]) -> ComplexMatrix {
    ComplexMatrix::from_fn(k, n, |i, j| {
        let (re, im) = vals[i * n + j];
        Complex64::new(re, im)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pinv_agrees_with_nalgebra(k in 1usize..6, extra in 0usize..6, vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 121)) {
        let n = k + extra;
        let g = matrix(k, n, &vals);
        let Ok(w) = pseudo_inverse(&g, DEFAULT_RTOL) else { return Ok(()); };
        let reference = DMatrix::from_fn(k, n, |i, j| g[(i, j)]).pseudo_inverse(1e-14).unwrap();
        let scale = reference.norm();
        for i in 0..n {
            for j in 0..k {
                prop_assert!((w[(i, j)] - reference[(i, j)]).norm() <= 1e-8 * scale);
            }
        }
        let err = g.matmul(&w).unwrap().sub(&ComplexMatrix::identity(k)).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-9 * g.frobenius_norm());
    }

    #[test]
    fn zf_gain_is_inverse_column_energy(k in 1usize..5, vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 40)) {
        let g = matrix(k, 8, &vals);
        let Ok(bf) = zf_beamformer(&g, DEFAULT_RTOL) else { return Ok(()); };
        let reference = DMatrix::from_fn(k, 8, |i, j| g[(i, j)]).pseudo_inverse(1e-14).unwrap();
        for j in 0..k {
            let energy: f64 = reference.column(j).iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((bf.gains[j] * energy - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn waterfill_invariants(gains in prop::collection::vec(1e-3f64..1e3, 1..8), budget in 1e-3f64..1e2, noise in 1e-3f64..10.0) {
        let a = waterfill(&gains, noise, budget).unwrap();
        prop_assert!(a.powers.iter().all(|p| *p >= 0.0));
        prop_assert!((a.total() - budget).abs() <= 1e-12 * budget);
        prop_assert!(kkt_residual(&a, &gains, noise) <= 1e-9 * a.water_level.max(1.0));
        let opt = sum_rate(&gains, &a.powers, noise);
        let equal = vec![budget / gains.len() as f64; gains.len()];
        prop_assert!(opt >= sum_rate(&gains, &equal, noise) - 1e-12);
        let more = waterfill(&gains, noise, budget * 1.5).unwrap();
        prop_assert!(sum_rate(&gains, &more.powers, noise) >= opt);
    }

    #[test]
    fn deferred_acceptance_is_stable_and_bounded(k in 1usize..7, l in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rates = RateMatrix::from_fn(l, k, |_, _| rng.gen_range(0.0..5.0)).unwrap();
        let out = stable_match(&rates);
        prop_assert_eq!(is_stable(&out.association, &rates).unwrap(), None);
        prop_assert!(out.proposals <= k * l);
        prop_assert_eq!(out.association.matched_count(), k.min(l));
    }
}

#[test]
fn device_optimal_among_stable_matchings_rectangular() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let rates = RateMatrix::from_fn(4, 3, |_, _| rng.gen_range(0.0..1.0)).unwrap();
        let got = stable_match(&rates).association;
        let stable: Vec<Association> = all_matchings(3, 4)
            .into_iter()
            .filter(|m| is_stable(m, &rates).unwrap().is_none())
            .collect();
        assert!(stable.contains(&got));
        for m in &stable {
            for k in 0..3 {
                let mine = got.ris_of(k).map_or(0.0, |l| rates.get(l, k));
                let other = m.ris_of(k).map_or(0.0, |l| rates.get(l, k));
                assert!(mine >= other);
            }
        }
    }
}

#[test]
fn exhaustive_search_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (k, l) in [(3, 3), (2, 4), (4, 2), (5, 5)] {
        let w: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..k).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let score = |a: &Association| a.pairs().map(|(d, r)| w[r][d]).sum::<f64>();
        let (best, value) = exhaustive_search(k, l, score).unwrap();
        let brute = all_matchings(k, l).iter().map(score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(value, brute);
        assert_eq!(best.matched_count(), k.min(l));
    }
    assert!(exhaustive_search(10, 10, |_| 0.0).is_err());
}

#[test]
fn random_association_is_uniform() {
    // Chi-square over the 6 perfect matchings of a 3x3 instance, df = 5;
    // 20.5 is the 0.999 quantile.
    let all = all_matchings(3, 3);
    let mut counts = vec![0usize; all.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = 12_000;
    for _ in 0..draws {
        let a = random_association(3, 3, &mut rng);
        counts[all.iter().position(|m| *m == a).unwrap()] += 1;
    }
    let expected = draws as f64 / all.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 20.5, "chi2 = {chi2}");
}

#[test]
fn greedy_takes_global_maximum_first() {
    let rates = RateMatrix::new(vec![vec![5.0, 9.0, 1.0], vec![8.0, 7.0, 2.0], vec![3.0, 6.0, 4.0]]).unwrap();
    let a = greedy_association(&rates, &mut ChaCha8Rng::seed_from_u64(0));
    // 9 at (panel 0, device 1), then 8 at (panel 1, device 0), then (panel 2, device 2).
    assert_eq!((a.ris_of(1), a.ris_of(0), a.ris_of(2)), (Some(0), Some(1), Some(2)));
}

#[test]
fn path_loss_reference_value() {
    // 20·log10(4π·d/λ) at 15 GHz and 1 m.
    let lambda = SPEED_OF_LIGHT / 15e9;
    let expect_db = 20.0 * (4.0 * std::f64::consts::PI / lambda).log10();
    let got_db = -10.0 * path_loss_linear(15e9, 1.0).unwrap().log10();
    assert!((got_db - expect_db).abs() < 1e-9);
    assert!((got_db - 55.96).abs() < 0.01);
    let ratio = path_loss_linear(15e9, 10.0).unwrap() / path_loss_linear(15e9, 1.0).unwrap();
    assert!((ratio - 0.01).abs() < 1e-15);
}
