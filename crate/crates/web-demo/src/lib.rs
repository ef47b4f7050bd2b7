//! Browser demo: weight profiles, the 1D wave model with its scattering
//! fields, and a small head-on collision. The computations are plain Rust
//! functions returning flat `Vec<f64>` buffers; the `wasm` module exports
//! them to JavaScript.

use alfven_core::diagnostics::NormRecorder;
use alfven_core::grid::species_weight;
use alfven_core::model1d::{self, Wave1D};
use alfven_core::solver::{Solver, StepperConfig};
use alfven_core::state::{make_wave_packet, ElsasserState, WavePacket};
use alfven_core::{DomainSpec, Species, WeightParams};

/// `[x3; n] ++ [<u->^{2ω}; n] ++ [<u+>^{2ω}; n]` on `[-l3/2, l3/2)`: the
/// weights measuring `z+` and `z-` at time `t`.
pub fn weight_profiles(delta: f64, a: f64, t: f64, l3: f64, n: usize) -> Result<Vec<f64>, String> {
    let w = WeightParams::new(a, delta).map_err(|e| e.to_string())?;
    if !(l3 > 0.0) || n == 0 {
        return Err("need a positive length and at least one point".into());
    }
    let xs: Vec<f64> = (0..n).map(|i| -0.5 * l3 + l3 * i as f64 / n as f64).collect();
    let mut out = xs.clone();
    for species in [Species::Plus, Species::Minus] {
        out.extend(xs.iter().map(|&x| species_weight(species, t, x, &w, 2.0 * w.omega)));
    }
    Ok(out)
}

/// Gaussian data `φ0 = A0 exp(-x²/2)`, `φ1 = A1 x exp(-x²/2)` on
/// `[-20, 20)`. Returns `[x; n] ++ [φ(t); n] ++ [L̄φ(+∞); n] ++ [Lφ(+∞); n]`.
pub fn wave_1d(a0: f64, a1: f64, t: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(8..=1 << 14).contains(&n) {
        return Err("n must lie in [8, 16384]".into());
    }
    let g = |x: f64| (-0.5 * x * x).exp();
    let w = Wave1D::from_fn(-20.0, 40.0, n, |x| a0 * g(x), |x| a1 * x * g(x)).map_err(|e| e.to_string())?;
    let s = model1d::scattering_1d(&w);
    let mut out = w.grid();
    out.extend(model1d::dalembert_evolve(&w, t));
    out.extend(s.lbar_future);
    out.extend(s.l_future);
    Ok(out)
}

/// Number of series returned by [`collision`].
pub const COLLISION_SERIES: usize = 5;

/// Head-on collision of two transverse packets of amplitude `amplitude`
/// on an `8 × 8 × 128` grid over `[0, 4)² × [-16, 16)`, integrated to
/// `t_end`. Returns `COLLISION_SERIES` equal-length series concatenated:
/// `t`, `E+`, `E-`, total energy, and `max|z+||z-|(1+|t|)^ω`.
pub fn collision(amplitude: f64, separation: f64, t_end: f64) -> Result<Vec<f64>, String> {
    if !(amplitude > 0.0 && amplitude <= 0.5) {
        return Err("amplitude must lie in (0, 0.5]".into());
    }
    if !(separation >= 0.0 && separation <= 20.0) || !(t_end > 0.0 && t_end <= 20.0) {
        return Err("separation and t_end must lie in [0, 20]".into());
    }
    let d = DomainSpec::new([8, 8, 128], [4.0, 4.0, 32.0]).map_err(|e| e.to_string())?;
    let mut solver = Solver::new(d);
    let packet = |species, x3| WavePacket {
        species,
        center: [2.0, 2.0, x3],
        widths: [1.2, 1.2, 1.0],
        amplitude,
        polarization_seed: 0,
    };
    let half = 0.5 * separation;
    let (zp, _) = make_wave_packet(&mut solver.sp, &packet(Species::Plus, half), [0.0, 0.0]).map_err(|e| e.to_string())?;
    let (zm, _) = make_wave_packet(&mut solver.sp, &packet(Species::Minus, -half), [0.0, 0.0]).map_err(|e| e.to_string())?;
    let s = ElsasserState::new(&mut solver.sp, 0.0, 0.0, zp, zm).map_err(|e| e.to_string())?;
    let w = WeightParams::default();
    let mut rec = NormRecorder::new(&d, 0.0, w, 0);
    // packets wrap around the periodic box in the demo, so no support guard
    let sc = StepperConfig {
        dt: 0.1,
        cfl: 1.0,
        t_end,
        record_every: 2,
        blowup_factor: 10.0,
        track_support: false,
    };
    solver.advance(&s, &sc, &mut [&mut rec]).map_err(|e| e.to_string())?;
    let samples = &rec.series.samples;
    let mut out = Vec::with_capacity(COLLISION_SERIES * samples.len());
    out.extend(samples.iter().map(|s| s.t));
    out.extend(samples.iter().map(|s| s.e_plus));
    out.extend(samples.iter().map(|s| s.e_minus));
    out.extend(samples.iter().map(|s| s.energy));
    out.extend(samples.iter().map(|s| s.sep_ratio));
    Ok(out)
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen(js_name = weightProfiles)]
    pub fn weight_profiles(delta: f64, a: f64, t: f64, l3: f64, n: usize) -> Result<Vec<f64>, JsError> {
        super::weight_profiles(delta, a, t, l3, n).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = wave1d)]
    pub fn wave_1d(a0: f64, a1: f64, t: f64, n: usize) -> Result<Vec<f64>, JsError> {
        super::wave_1d(a0, a1, t, n).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn collision(amplitude: f64, separation: f64, t_end: f64) -> Result<Vec<f64>, JsError> {
        super::collision(amplitude, separation, t_end).map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_one_on_their_characteristic() {
        let v = weight_profiles(0.1, 0.0, 2.0, 32.0, 64).unwrap();
        let (x, rest) = v.split_at(64);
        let (wp, wm) = rest.split_at(64);
        // z+ is weighted by <u-> = <x3 + t>, which is 1 where x3 = -t
        let i = x.iter().position(|&x| x == -2.0).unwrap();
        assert_eq!(wp[i], 1.0);
        let j = x.iter().position(|&x| x == 2.0).unwrap();
        assert_eq!(wm[j], 1.0);
        assert!(weight_profiles(0.7, 0.0, 0.0, 32.0, 8).is_err());
    }

    #[test]
    fn wave_splits_into_two_half_pulses() {
        let n = 400;
        let v = wave_1d(1.0, 0.0, 10.0, n).unwrap();
        let x = &v[..n];
        let phi = &v[n..2 * n];
        for (xi, p) in x.iter().zip(phi) {
            let exact = 0.5 * ((-0.5 * (xi - 10.0).powi(2)).exp() + (-0.5 * (xi + 10.0).powi(2)).exp());
            assert!((p - exact).abs() < 1e-12, "{xi}: {p} vs {exact}");
        }
        // with φ1 = 0 the two scattering fields are ∓φ0'
        let lbar = &v[2 * n..3 * n];
        let l = &v[3 * n..];
        for (a, b) in lbar.iter().zip(l) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_collision_conserves_energy() {
        let v = collision(0.05, 11.0, 12.0).unwrap();
        let m = v.len() / COLLISION_SERIES;
        assert_eq!(v.len(), COLLISION_SERIES * m);
        assert!(m > 10);
        let energy = &v[3 * m..4 * m];
        let drift = energy.iter().map(|e| (e - energy[0]).abs()).fold(0.0, f64::max) / energy[0];
        assert!(drift < 1e-8, "drift {drift}");
        let sep = &v[4 * m..];
        assert!(sep.iter().any(|&s| s > 0.0));
        assert!(collision(1.0, 11.0, 12.0).is_err());
    }
}
