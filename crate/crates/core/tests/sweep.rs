use std::path::Path;

use alfven_core::experiments::{self, RunManifest};
use alfven_core::io;

fn sweep(polarized: bool, minus: Vec<f64>) -> RunManifest {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/amplitude_sweep.toml");
    let mut cfg = io::parse_config(&path).unwrap();
    cfg.sweep.plus = vec![1.0];
    cfg.sweep.minus = minus;
    if !polarized {
        for p in &mut cfg.packets {
            p.polarization_seed = 0;
        }
    }
    experiments::run(&cfg).unwrap().manifest
}

fn point(m: &RunManifest, lm: f64, key: &str) -> f64 {
    m.sweep.iter().find(|p| p.lambda_minus == lm).unwrap().values[key]
}

#[test]
fn energy_exchange_is_linear_in_the_other_amplitude() {
    let m = sweep(true, vec![0.0, 1.0, 2.0]);
    for a in &m.assertions {
        assert!(a.passed, "{a:?}");
    }
    assert!(m.assertion("amplitude_sweep.linear_limit[1]").is_some());
    assert!(m.assertion("amplitude_sweep.cross_doubling[1,1]").is_some());
    // the z+ data does not depend on the z- amplitude
    assert_eq!(point(&m, 1.0, "E_plus_0"), point(&m, 2.0, "E_plus_0"));
    assert!((point(&m, 2.0, "E_minus_0") / point(&m, 1.0, "E_minus_0") - 4.0).abs() < 1e-10);
}

#[test]
fn transverse_packets_exchange_energy_only_at_second_order() {
    let m = sweep(false, vec![1.0, 2.0]);
    let r = point(&m, 2.0, "dE_plus_rel") / point(&m, 1.0, "dE_plus_rel");
    assert!(r > 3.0 && r < 4.5, "doubling ratio {r}");
}
