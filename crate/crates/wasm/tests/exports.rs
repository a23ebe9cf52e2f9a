use dualris_wasm::{matching, power_sweep, water_levels, SWEEP_COLUMNS};

#[test]
fn sweep_is_reproducible_and_increasing_in_power() {
    let a = power_sweep(3, 16, 32, 4, 9, 20.0, 10.0).unwrap();
    assert_eq!(a, power_sweep(3, 16, 32, 4, 9, 20.0, 10.0).unwrap());
    for scheme in 1..SWEEP_COLUMNS {
        let col: Vec<f64> = a.chunks(SWEEP_COLUMNS).map(|row| row[scheme]).collect();
        assert!(col.windows(2).all(|w| w[1] >= w[0]), "column {scheme}: {col:?}");
    }
}

#[test]
fn invalid_sweep_input_is_an_error() {
    assert!(power_sweep(0, 16, 4, 1, 1, 10.0, 1.0).is_err());
    assert!(power_sweep(20, 16, 4, 1, 1, 10.0, 1.0).is_err());
}

#[test]
fn water_levels_spend_the_budget() {
    let v = water_levels(&[3.0, 0.2, 1.1], 0.5, 2.0).unwrap();
    assert!((v[..3].iter().sum::<f64>() - 2.0).abs() < 1e-12);
}

#[test]
fn rectangular_matching_leaves_devices_out() {
    let rates = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let v = matching(&rates, 2, 3).unwrap();
    assert_eq!(v[..3].iter().filter(|&&x| x < 0).count(), 1);
    assert!(v[3] <= 6);
}
