//! The 1D wave equation `(-∂t² + ∂x²) φ = 0` as an exact model of the
//! scattering picture: null coordinates `u = x - t`, `ū = x + t`, null frame
//! `L = ∂t + ∂x`, `L̄ = ∂t - ∂x`, and
//!
//! ```text
//! φ(t, x) = φ+(x - t) + φ-(x + t)
//! φ-' = (φ0' + φ1) / 2       φ+' = (φ0' - φ1) / 2
//! L̄φ(±∞; u) = φ1(u) - φ0'(u)     Lφ(±∞; ū) = φ1(ū) + φ0'(ū)
//! ```
//!
//! Profiles live on a wide periodic grid; shifts and derivatives are
//! spectral, so there is no time stepping and no discretization error for
//! band-limited data.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled Cauchy data on `[x_min, x_min + length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave1D {
    pub x_min: f64,
    pub length: f64,
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    /// `φ0'`, spectral unless supplied.
    pub dphi0: Vec<f64>,
}

fn fft(data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let n = data.len();
    if inverse {
        planner.plan_fft_inverse(n).process(data);
    } else {
        planner.plan_fft_forward(n).process(data);
        let s = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

fn wavenumber(n: usize, length: f64, i: usize) -> f64 {
    if 2 * i == n {
        return 0.0;
    }
    let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
    TAU * m / length
}

fn spectrum(f: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut c, false);
    c
}

fn synthesize(mut c: Vec<Complex64>) -> Vec<f64> {
    fft(&mut c, true);
    c.into_iter().map(|v| v.re).collect()
}

/// `f'` by spectral differentiation (Nyquist mode dropped).
pub fn spectral_derivative(f: &[f64], length: f64) -> Vec<f64> {
    let n = f.len();
    let mut c = spectrum(f);
    for (i, v) in c.iter_mut().enumerate() {
        *v *= Complex64::new(0.0, wavenumber(n, length, i));
    }
    synthesize(c)
}

/// `f(x + s)` by a Fourier phase shift.
pub fn spectral_shift(f: &[f64], length: f64, s: f64) -> Vec<f64> {
    let n = f.len();
    let mut c = spectrum(f);
    for (i, v) in c.iter_mut().enumerate() {
        if 2 * i == n {
            *v *= (TAU * (n as f64 / 2.0) * s / length).cos();
        } else {
            *v *= Complex64::from_polar(1.0, wavenumber(n, length, i) * s);
        }
    }
    synthesize(c)
}

/// `F(x) - F(x_min)` for `F' = f`: the mean part integrates to a ramp, the
/// rest through the periodic antiderivative.
pub fn cumulative_integral(f: &[f64], length: f64) -> Vec<f64> {
    let n = f.len();
    let h = length / n as f64;
    let mut c = spectrum(f);
    let mean = c[0].re;
    c[0] = Complex64::default();
    for (i, v) in c.iter_mut().enumerate().skip(1) {
        let k = wavenumber(n, length, i);
        *v = if k == 0.0 { Complex64::default() } else { *v / Complex64::new(0.0, k) };
    }
    let p = synthesize(c);
    (0..n).map(|j| mean * j as f64 * h + p[j] - p[0]).collect()
}

impl Wave1D {
    pub fn new(x_min: f64, length: f64, phi0: Vec<f64>, phi1: Vec<f64>) -> Result<Self> {
        if phi0.len() != phi1.len() || phi0.len() < 4 {
            return Err(Error::ShapeMismatch(format!(
                "phi0 has {} samples, phi1 has {}",
                phi0.len(),
                phi1.len()
            )));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidDomain(format!("length = {length} must be positive")));
        }
        if phi0.iter().chain(&phi1).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Wave1D"));
        }
        let dphi0 = spectral_derivative(&phi0, length);
        Ok(Self {
            x_min,
            length,
            phi0,
            phi1,
            dphi0,
        })
    }

    /// Samples `phi0`, `phi1` from closures on `n` points.
    pub fn from_fn(x_min: f64, length: f64, n: usize, phi0: impl Fn(f64) -> f64, phi1: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| x_min + j as f64 * h).collect();
        Self::new(x_min, length, xs.iter().map(|&x| phi0(x)).collect(), xs.iter().map(|&x| phi1(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.phi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi0.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.len() as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x_min + j as f64 * self.spacing()).collect()
    }

    /// `φ+'`, the right-moving derivative profile.
    pub fn dphi_plus(&self) -> Vec<f64> {
        self.dphi0.iter().zip(&self.phi1).map(|(a, b)| 0.5 * (a - b)).collect()
    }

    /// `φ-'`, the left-moving derivative profile.
    pub fn dphi_minus(&self) -> Vec<f64> {
        self.dphi0.iter().zip(&self.phi1).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// `φ(t, ·) = ½(φ0(x - t) + φ0(x + t)) + ½(Φ1(x + t) - Φ1(x - t))`,
/// with `Φ1` the cumulative integral of `φ1`.
pub fn dalembert_evolve(w: &Wave1D, t: f64) -> Vec<f64> {
    let n = w.len();
    let mut g = spectrum(&w.phi1);
    let mean = g[0].re;
    g[0] = Complex64::default();
    // periodic antiderivative of φ1 - mean
    for (i, v) in g.iter_mut().enumerate().skip(1) {
        let k = wavenumber(n, w.length, i);
        *v = if k == 0.0 { Complex64::default() } else { *v / Complex64::new(0.0, k) };
    }
    let p = synthesize(g);
    let right = spectral_shift(&w.phi0, w.length, -t);
    let left = spectral_shift(&w.phi0, w.length, t);
    let p_ahead = spectral_shift(&p, w.length, t);
    let p_behind = spectral_shift(&p, w.length, -t);
    (0..n)
        .map(|j| 0.5 * (right[j] + left[j]) + 0.5 * (p_ahead[j] - p_behind[j]) + mean * t)
        .collect()
}

/// `(∂tφ, ∂xφ)` at time `t` from the shifted derivative profiles.
pub fn evolve_derivatives(w: &Wave1D, t: f64) -> (Vec<f64>, Vec<f64>) {
    let plus = spectral_shift(&w.dphi_plus(), w.length, -t);
    let minus = spectral_shift(&w.dphi_minus(), w.length, t);
    let dt = plus.iter().zip(&minus).map(|(p, m)| -p + m).collect();
    let dx = plus.iter().zip(&minus).map(|(p, m)| p + m).collect();
    (dt, dx)
}

/// The four scattering fields; future and past traces coincide for the
/// free wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scattering1D {
    /// `L̄φ(+∞; u)` on the `u` lattice.
    pub lbar_future: Vec<f64>,
    /// `Lφ(+∞; ū)` on the `ū` lattice.
    pub l_future: Vec<f64>,
    pub lbar_past: Vec<f64>,
    pub l_past: Vec<f64>,
}

pub fn scattering_1d(w: &Wave1D) -> Scattering1D {
    let lbar: Vec<f64> = w.phi1.iter().zip(&w.dphi0).map(|(a, b)| a - b).collect();
    let l: Vec<f64> = w.phi1.iter().zip(&w.dphi0).map(|(a, b)| a + b).collect();
    Scattering1D {
        lbar_future: lbar.clone(),
        l_future: l.clone(),
        lbar_past: lbar,
        l_past: l,
    }
}

/// `L̄φ(t, u + t)` and `Lφ(t, ū - t)` on the lattices, read off the evolved
/// solution; `t` must be a whole number of grid steps.
pub fn traces_at(w: &Wave1D, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = t / w.spacing();
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::Range(format!("t = {t} is not a multiple of the grid spacing")));
    }
    let n = w.len() as i64;
    let s = steps.round() as i64;
    let (dt, dx) = evolve_derivatives(w, t);
    let at = |j: i64| ((j % n + n) % n) as usize;
    let lbar = (0..n).map(|j| dt[at(j + s)] - dx[at(j + s)]).collect();
    let l = (0..n).map(|j| dt[at(j - s)] + dx[at(j - s)]).collect();
    Ok((lbar, l))
}

/// Cauchy data recovered from the two null derivatives:
/// `φ1 = (L̄ + L)/2`, `φ0' = (L - L̄)/2`, `φ0 = ∫ φ0'`.
pub fn reconstruct_from_scattering(lbar: &[f64], l: &[f64], x_min: f64, length: f64) -> Result<Wave1D> {
    let phi1: Vec<f64> = lbar.iter().zip(l).map(|(a, b)| 0.5 * (a + b)).collect();
    let dphi0: Vec<f64> = lbar.iter().zip(l).map(|(a, b)| 0.5 * (b - a)).collect();
    let phi0 = cumulative_integral(&dphi0, length);
    let mut w = Wave1D::new(x_min, length, phi0, phi1)?;
    w.dphi0 = dphi0;
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RigidityVariant {
    /// `L̄φ(+∞)` and `Lφ(+∞)`.
    Future,
    /// `L̄φ(+∞)` and `Lφ(-∞)`.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigidity1D {
    pub fields_vanish: bool,
    /// `max|φ|` of the reconstructed solution over the sampled times.
    pub reconstructed_max: f64,
}

/// Checks whether the scattering fields of `variant` vanish to `tol`; the
/// solution is reconstructed from them and sampled at `times` either way.
pub fn rigidity_check_1d(s: &Scattering1D, variant: RigidityVariant, x_min: f64, length: f64, times: &[f64], tol: f64) -> Result<Rigidity1D> {
    let (lbar, l) = match variant {
        RigidityVariant::Future => (&s.lbar_future, &s.l_future),
        RigidityVariant::Mixed => (&s.lbar_future, &s.l_past),
    };
    let small = |f: &[f64]| f.iter().all(|v| v.abs() <= tol);
    let fields_vanish = small(lbar) && small(l);
    let w = reconstruct_from_scattering(lbar, l, x_min, length)?;
    let reconstructed_max = times
        .iter()
        .flat_map(|&t| dalembert_evolve(&w, t))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Rigidity1D {
        fields_vanish,
        reconstructed_max,
    })
}
