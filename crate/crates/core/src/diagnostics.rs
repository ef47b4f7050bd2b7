//! Weighted energy and flux norms, conserved quantities and the decay
//! ratios sampled along a run.
//!
//! With `W∓ = <u±>^{2ω}` (the family paired with each species),
//!
//! ```text
//! E(t)      = ∫ W |z|^2
//! E^k(t)    = Σ_{|α|=k} ∫ W |curl ∂^α z|^2
//! F+(t, u+) = √2 ∫_0^t ∫ <u->^{2ω} |z+(τ, x1, x2, u+ + τ)|^2 dx1 dx2 dτ
//! F-(t, u-) = √2 ∫_0^t ∫ <u+>^{2ω} |z-(τ, x1, x2, u- - τ)|^2 dx1 dx2 dτ
//! ```

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{characteristic_coords, species_weight_profile, weight_value, DomainSpec, Species, WeightParams};
use crate::solver::{Frame, Observer, Tick};
use crate::spectral::{self, RealVectorField, Spectral, SpectralScalar, SpectralVectorField};
use crate::state::ElsasserState;

/// Default depth of the higher-order norms.
pub const DEFAULT_K_MAX: u32 = 2;

/// `∫ λ(x3) |f|^2` on the grid for a per-`x3` weight profile.
pub fn weighted_l2(f: &RealVectorField, profile: &[f64]) -> f64 {
    let d = f.domain;
    let n3 = d.n[2];
    let mut acc = 0.0;
    for idx in 0..d.len() {
        let m = f.comps[0][idx].powi(2) + f.comps[1][idx].powi(2) + f.comps[2][idx].powi(2);
        acc += profile[idx % n3] * m;
    }
    acc * d.cell_volume()
}

fn energy_profile(s: &ElsasserState, species: Species, w: &WeightParams) -> Vec<f64> {
    let w = w.with_a(s.a);
    species_weight_profile(&s.domain(), species, s.t, &w, 2.0 * w.omega)
}

/// `E∓(t) = ∫ <u±>^{2ω} |z∓|^2` at the state's time and position parameter.
pub fn energy_norm(sp: &mut Spectral, s: &ElsasserState, species: Species, w: &WeightParams) -> Result<f64> {
    let f = sp.inverse(s.field(species))?;
    Ok(weighted_l2(&f, &energy_profile(s, species, w)))
}

/// `E^k = Σ_{|α|=k} ∫ W |curl ∂^α z|^2`.
pub fn vorticity_norm(
    sp: &mut Spectral,
    s: &ElsasserState,
    species: Species,
    k: u32,
    w: &WeightParams,
) -> Result<f64> {
    let profile = energy_profile(s, species, w);
    let j = spectral::curl(s.field(species));
    let mut total = 0.0;
    for alpha in spectral::multi_indices(k) {
        let f = sp.inverse(&spectral::derivative(&j, alpha))?;
        total += weighted_l2(&f, &profile);
    }
    Ok(total)
}

/// Weighted data norm `Σ_{k<=k_max} Σ_{|β|=k} ∫ W |∂^β z|^2`, each
/// multi-index counted once.
pub fn data_norm(sp: &mut Spectral, s: &ElsasserState, species: Species, k_max: u32, w: &WeightParams) -> Result<f64> {
    let profile = energy_profile(s, species, w);
    let mut total = 0.0;
    for k in 0..=k_max {
        for beta in spectral::multi_indices(k) {
            let f = sp.inverse(&spectral::derivative(s.field(species), beta))?;
            total += weighted_l2(&f, &profile);
        }
    }
    Ok(total)
}

/// `(∫ |z+|^2 + |z-|^2, ∫ |z+|^2 - |z-|^2)`.
pub fn conserved_quantities(s: &ElsasserState) -> (f64, f64) {
    let p = s.z_plus.l2_norm_sq();
    let m = s.z_minus.l2_norm_sq();
    (p + m, p - m)
}

/// `max |z+||z-| (1 + |t + a|)^ω`.
pub fn separation_ratio(zp: &RealVectorField, zm: &RealVectorField, t: f64, a: f64, omega: f64) -> f64 {
    let peak = (0..zp.domain.len())
        .map(|i| zp.magnitude_at(i) * zm.magnitude_at(i))
        .fold(0.0, f64::max);
    peak * (1.0 + (t + a).abs()).powf(omega)
}

pub fn separation_ratio_of(sp: &mut Spectral, s: &ElsasserState, w: &WeightParams) -> Result<f64> {
    let zp = sp.inverse(&s.z_plus)?;
    let zm = sp.inverse(&s.z_minus)?;
    Ok(separation_ratio(&zp, &zm, s.t, s.a, w.omega))
}

/// `(max|∇p|, max|∇²p|)`, with the Frobenius norm for the Hessian.
pub fn pressure_derivative_maxima(sp: &mut Spectral, p: &SpectralScalar) -> (f64, f64) {
    let d = sp.domain;
    let grad = spectral::gradient(p);
    let g = sp.inverse(&grad).expect("pressure lives on the workspace grid");
    let g_max = g.max_magnitude();
    let mut hess = vec![0.0; d.len()];
    for i in 0..3 {
        for j in i..3 {
            let mut alpha = [0u32; 3];
            alpha[j] += 1;
            let hij = spectral::derivative(&grad, alpha);
            let phys = sp.inverse_scalar(&hij.comps[i]);
            let mult = if i == j { 1.0 } else { 2.0 };
            for (h, v) in hess.iter_mut().zip(&phys) {
                *h += mult * v * v;
            }
        }
    }
    let h_max = hess.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt();
    (g_max, h_max)
}

/// `(max|∇p|, max|∇²p|)` scaled by `(1 + |t + a|)^ω`.
pub fn pressure_decay_ratio(sp: &mut Spectral, s: &ElsasserState, w: &WeightParams) -> Result<(f64, f64)> {
    let p = sp.solve_pressure(&s.z_plus, &s.z_minus)?;
    let (g, h) = pressure_derivative_maxima(sp, &p);
    let f = (1.0 + (s.t + s.a).abs()).powf(w.omega);
    Ok((g * f, h * f))
}

/// Every column of a [`NormSample`] that a single state determines; the
/// fluxes need the run history and come back as NaN.
pub fn instantaneous_sample(sp: &mut Spectral, s: &ElsasserState, w: &WeightParams, k_max: u32) -> Result<NormSample> {
    let w = w.with_a(s.a);
    let mut ek_plus = Vec::new();
    let mut ek_minus = Vec::new();
    for k in 0..=k_max {
        ek_plus.push(vorticity_norm(sp, s, Species::Plus, k, &w)?);
        ek_minus.push(vorticity_norm(sp, s, Species::Minus, k, &w)?);
    }
    let (energy, cross_helicity) = conserved_quantities(s);
    let (p1_ratio, p2_ratio) = pressure_decay_ratio(sp, s, &w)?;
    Ok(NormSample {
        t: s.t,
        e_plus: energy_norm(sp, s, Species::Plus, &w)?,
        e_minus: energy_norm(sp, s, Species::Minus, &w)?,
        ek_plus,
        ek_minus,
        f_plus: f64::NAN,
        f_minus: f64::NAN,
        energy,
        cross_helicity,
        sep_ratio: separation_ratio_of(sp, s, &w)?,
        p1_ratio,
        p2_ratio,
        max_div: sp.max_divergence(&s.z_plus).max(sp.max_divergence(&s.z_minus)),
    })
}

/// Both sides of the weighted div-curl inequality
/// `‖√λ ∇v‖^2 ≲ ‖√λ curl v‖^2 + ‖√λ v‖^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivCurl {
    pub gradient: f64,
    pub curl: f64,
    pub mass: f64,
}

impl DivCurl {
    pub fn lhs(&self) -> f64 {
        self.gradient
    }

    pub fn rhs(&self) -> f64 {
        self.curl + self.mass
    }
}

pub fn divcurl_check(sp: &mut Spectral, f: &SpectralVectorField, lambda: &[f64]) -> Result<DivCurl> {
    let mut gradient = 0.0;
    for axis in 0..3 {
        let mut alpha = [0u32; 3];
        alpha[axis] = 1;
        gradient += weighted_l2(&sp.inverse(&spectral::derivative(f, alpha))?, lambda);
    }
    let curl = weighted_l2(&sp.inverse(&spectral::curl(f))?, lambda);
    let mass = weighted_l2(&sp.inverse(f)?, lambda);
    Ok(DivCurl { gradient, curl, mass })
}

/// `max W|z|^2 / (‖√W z‖^2 + Σ_{|β|≤1} ‖√W j^(β)‖^2)`, with `W = <u±>^{2ω}`.
pub fn sobolev_check(sp: &mut Spectral, s: &ElsasserState, species: Species, w: &WeightParams) -> Result<f64> {
    let profile = energy_profile(s, species, w);
    let z = sp.inverse(s.field(species))?;
    let n3 = s.domain().n[2];
    let lhs = (0..z.domain.len())
        .map(|i| profile[i % n3] * z.magnitude_at(i).powi(2))
        .fold(0.0, f64::max);
    if lhs == 0.0 {
        return Ok(0.0);
    }
    let rhs = weighted_l2(&z, &profile)
        + vorticity_norm(sp, s, species, 0, w)?
        + vorticity_norm(sp, s, species, 1, w)?;
    Ok(lhs / rhs)
}

/// Running flux integrals through the characteristic surfaces of one
/// species, one surface per grid `x3` value at the start time.
///
/// A surface is frozen once its `x3` position leaves the centered window,
/// since the periodic field no longer represents it there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxAccumulator {
    pub species: Species,
    pub t0: f64,
    /// Surface labels `u`.
    pub lattice: Vec<f64>,
    pub values: Vec<f64>,
    frozen: Vec<bool>,
    last: Option<(f64, Vec<f64>)>,
}

impl FluxAccumulator {
    pub fn new(domain: &DomainSpec, species: Species, t0: f64) -> Self {
        let n3 = domain.n[2];
        // u = x3 at t0, in increasing order
        let lattice: Vec<f64> = (0..n3).map(|j| -domain.x3_half_width() + j as f64 * domain.spacing(2)).collect();
        Self {
            species,
            t0,
            values: vec![0.0; n3],
            frozen: vec![false; n3],
            lattice,
            last: None,
        }
    }

    /// `x3` position of surface `u` at time `t`.
    fn surface_x3(&self, u: f64, t: f64) -> f64 {
        // both families move opposite to the species they measure
        u - self.species.transport_speed() * (t - self.t0)
    }

    /// Surface integrands `√2 ∫ W |z|^2 dx1 dx2` at time `t`; `None` marks a
    /// surface outside the window.
    fn integrand(&self, sp: &mut Spectral, field: &SpectralVectorField, t: f64, w: &WeightParams) -> Result<Vec<Option<f64>>> {
        let d = sp.domain;
        let n3 = d.n[2];
        let shift = -self.species.transport_speed() * (t - self.t0);
        let shifted = sp.inverse(&spectral::shift_x3(field, shift))?;
        // grid slot of lattice point j after centering
        let slot = |j: usize| (j + n3 / 2) % n3;
        let mut slab = vec![0.0; n3];
        for idx in 0..d.len() {
            slab[idx % n3] += shifted.magnitude_at(idx).powi(2);
        }
        let area = d.spacing(0) * d.spacing(1);
        let half = d.x3_half_width();
        let family = self.species.opposite();
        Ok(self
            .lattice
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                let x3 = self.surface_x3(u, t);
                if x3 < -half || x3 >= half {
                    return None;
                }
                let (up, um) = characteristic_coords(t, x3);
                let u_other = match family {
                    Species::Plus => up,
                    Species::Minus => um,
                };
                let weight = weight_value(u_other, family, w, 2.0 * w.omega);
                Some(std::f64::consts::SQRT_2 * area * slab[slot(j)] * weight)
            })
            .collect())
    }

    /// Advances every surface integral by the trapezoid rule to time `t`.
    pub fn accumulate(&mut self, sp: &mut Spectral, s: &ElsasserState, w: &WeightParams) -> Result<()> {
        let w = w.with_a(s.a);
        let cur = self.integrand(sp, s.field(self.species), s.t, &w)?;
        let cur_vals: Vec<f64> = cur.iter().map(|v| v.unwrap_or(0.0)).collect();
        if let Some((t_prev, prev)) = &self.last {
            let h = (s.t - t_prev).abs();
            for j in 0..self.values.len() {
                if self.frozen[j] {
                    continue;
                }
                match cur[j] {
                    Some(v) => self.values[j] += 0.5 * h * (prev[j] + v),
                    None => self.frozen[j] = true,
                }
            }
        } else {
            for (j, v) in cur.iter().enumerate() {
                self.frozen[j] = v.is_none();
            }
        }
        self.last = Some((s.t, cur_vals));
        Ok(())
    }

    /// `F(t) = sup_u F(t, u)`.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn value_at(&self, u: f64) -> Option<f64> {
        self.lattice.iter().position(|&x| (x - u).abs() < 1e-9).map(|j| self.values[j])
    }
}

/// One sampled time level; a row of `norms.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    /// `E^k` for `k = 0..=k_max`.
    pub ek_plus: Vec<f64>,
    pub ek_minus: Vec<f64>,
    pub f_plus: f64,
    pub f_minus: f64,
    pub energy: f64,
    pub cross_helicity: f64,
    pub sep_ratio: f64,
    pub p1_ratio: f64,
    pub p2_ratio: f64,
    pub max_div: f64,
}

impl NormSample {
    /// `E± + F± + Σ_k E^k±` summed over both species.
    pub fn total(&self) -> f64 {
        self.e_plus
            + self.e_minus
            + self.f_plus
            + self.f_minus
            + self.ek_plus.iter().sum::<f64>()
            + self.ek_minus.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormSeries {
    pub k_max: u32,
    pub samples: Vec<NormSample>,
}

impl NormSeries {
    fn sup(&self, f: impl Fn(&NormSample) -> f64) -> f64 {
        self.samples.iter().map(f).fold(0.0, f64::max)
    }

    /// `sup_t total / total(0)`.
    pub fn boundedness_constant(&self) -> f64 {
        let first = self.samples.first().map(NormSample::total).unwrap_or(0.0);
        if first == 0.0 {
            return 0.0;
        }
        self.sup(NormSample::total) / first
    }

    pub fn max_energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        self.sup(|s| (s.energy - first.energy).abs()) / first.energy
    }

    /// Cross-helicity drift normalized by the initial total energy, since the
    /// cross helicity itself vanishes for balanced collisions.
    pub fn max_cross_helicity_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        self.sup(|s| (s.cross_helicity - first.cross_helicity).abs()) / first.energy
    }

    pub fn max_divergence(&self) -> f64 {
        self.sup(|s| s.max_div)
    }

    /// Largest value of `f` over samples with `t` in `[t_a, t_b]`.
    pub fn max_over(&self, t_a: f64, t_b: f64, f: impl Fn(&NormSample) -> f64) -> f64 {
        let (lo, hi) = (t_a.min(t_b), t_a.max(t_b));
        self.samples
            .iter()
            .filter(|s| s.t >= lo - 1e-12 && s.t <= hi + 1e-12)
            .map(f)
            .fold(0.0, f64::max)
    }

    pub fn sup_of(&self, f: impl Fn(&NormSample) -> f64) -> f64 {
        self.sup(f)
    }
}

/// Observer building a [`NormSeries`] at record points while accumulating
/// the fluxes at every step.
#[derive(Debug, Clone)]
pub struct NormRecorder {
    pub weights: WeightParams,
    pub series: NormSeries,
    pub flux_plus: FluxAccumulator,
    pub flux_minus: FluxAccumulator,
}

impl NormRecorder {
    pub fn new(domain: &DomainSpec, t0: f64, weights: WeightParams, k_max: u32) -> Self {
        Self {
            weights,
            series: NormSeries {
                k_max,
                samples: Vec::new(),
            },
            flux_plus: FluxAccumulator::new(domain, Species::Plus, t0),
            flux_minus: FluxAccumulator::new(domain, Species::Minus, t0),
        }
    }

    pub fn sample(&self, sp: &mut Spectral, s: &ElsasserState, frame: &Frame) -> Result<NormSample> {
        let w = self.weights.with_a(s.a);
        let ep = weighted_l2(&frame.phys_plus, &energy_profile(s, Species::Plus, &w));
        let em = weighted_l2(&frame.phys_minus, &energy_profile(s, Species::Minus, &w));
        let mut ek_plus = Vec::new();
        let mut ek_minus = Vec::new();
        for k in 0..=self.series.k_max {
            ek_plus.push(vorticity_norm(sp, s, Species::Plus, k, &w)?);
            ek_minus.push(vorticity_norm(sp, s, Species::Minus, k, &w)?);
        }
        let (energy, cross_helicity) = conserved_quantities(s);
        let (g, h) = pressure_derivative_maxima(sp, &frame.pressure);
        let decay = (1.0 + (s.t + s.a).abs()).powf(w.omega);
        Ok(NormSample {
            t: s.t,
            e_plus: ep,
            e_minus: em,
            ek_plus,
            ek_minus,
            f_plus: self.flux_plus.sup(),
            f_minus: self.flux_minus.sup(),
            energy,
            cross_helicity,
            sep_ratio: separation_ratio(&frame.phys_plus, &frame.phys_minus, s.t, s.a, w.omega),
            p1_ratio: g * decay,
            p2_ratio: h * decay,
            max_div: sp.max_divergence(&s.z_plus).max(sp.max_divergence(&s.z_minus)),
        })
    }
}

impl Observer for NormRecorder {
    fn every_step(&self) -> bool {
        true
    }

    fn observe(&mut self, sp: &mut Spectral, s: &ElsasserState, frame: &Frame, tick: Tick) -> Result<()> {
        self.flux_plus.accumulate(sp, s, &self.weights)?;
        self.flux_minus.accumulate(sp, s, &self.weights)?;
        if tick.record {
            let sample = self.sample(sp, s, frame)?;
            self.series.samples.push(sample);
        }
        Ok(())
    }
}

/// Records `max|div z±|` at every step, independent of the sampling cadence.
#[derive(Debug, Clone, Default)]
pub struct DivergenceMonitor {
    pub max_div: f64,
    pub steps: usize,
}

impl Observer for DivergenceMonitor {
    fn every_step(&self) -> bool {
        true
    }

    fn observe(&mut self, sp: &mut Spectral, s: &ElsasserState, _: &Frame, _: Tick) -> Result<()> {
        let d = sp.max_divergence(&s.z_plus).max(sp.max_divergence(&s.z_minus));
        self.max_div = self.max_div.max(d);
        self.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Solver, StepperConfig};
    use crate::state::{make_random_solenoidal, make_wave_packet, RandomField, WavePacket};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn domain() -> DomainSpec {
        DomainSpec::new([8, 8, 256], [6.0, 6.0, 48.0]).unwrap()
    }

    fn packet(species: Species, x3: f64, amplitude: f64) -> WavePacket {
        WavePacket {
            species,
            center: [3.0, 3.0, x3],
            widths: [1.2, 1.2, 1.0],
            amplitude,
            polarization_seed: 11,
        }
    }

    fn one_sided(sp: &mut Spectral, species: Species, x3: f64) -> ElsasserState {
        let d = sp.domain;
        let (f, _) = make_wave_packet(sp, &packet(species, x3, 0.2), [0.0, 0.0]).unwrap();
        let (zp, zm) = match species {
            Species::Plus => (f, SpectralVectorField::zeros(d)),
            Species::Minus => (SpectralVectorField::zeros(d), f),
        };
        ElsasserState::new(sp, 0.0, 0.0, zp, zm).unwrap()
    }

    /// `x⊥`-integrated `|z|^2` at arbitrary `x3`, by pointwise trigonometric
    /// interpolation on every column.
    fn slab_mass(f: &SpectralVectorField, x3: f64) -> f64 {
        let d = f.domain;
        let mut acc = 0.0;
        for i1 in 0..d.n[0] {
            for i2 in 0..d.n[1] {
                let v = spectral::interpolate_x3(f, i1, i2, x3);
                acc += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            }
        }
        acc * d.spacing(0) * d.spacing(1)
    }

    #[test]
    fn zero_field_norms_vanish() {
        let d = domain();
        let mut sp = Spectral::new(d);
        let s = ElsasserState::zero(d);
        let w = WeightParams::default();
        assert_eq!(energy_norm(&mut sp, &s, Species::Plus, &w).unwrap(), 0.0);
        assert_eq!(vorticity_norm(&mut sp, &s, Species::Minus, 2, &w).unwrap(), 0.0);
        assert_eq!(conserved_quantities(&s), (0.0, 0.0));
        assert_eq!(separation_ratio_of(&mut sp, &s, &w).unwrap(), 0.0);
        assert_eq!(pressure_decay_ratio(&mut sp, &s, &w).unwrap(), (0.0, 0.0));
        assert_eq!(sobolev_check(&mut sp, &s, Species::Plus, &w).unwrap(), 0.0);
    }

    #[test]
    fn energy_matches_oversampled_quadrature() {
        // oracle: the x3 integral ∫ (1 + x3^2)^1.1 m(x3) dx3 on a 4x finer
        // lattice, with m(x3) evaluated by direct trigonometric interpolation
        let d = DomainSpec::new([8, 8, 128], [6.0, 6.0, 32.0]).unwrap();
        let mut sp = Spectral::new(d);
        let (f, _) = make_wave_packet(
            &mut sp,
            &WavePacket {
                species: Species::Minus,
                center: [3.0, 3.0, 1.5],
                widths: [1.2, 1.2, 1.2],
                amplitude: 0.3,
                polarization_seed: 2,
            },
            [0.0, 0.0],
        )
        .unwrap();
        let s = ElsasserState::new(&mut sp, 0.0, 0.0, SpectralVectorField::zeros(d), f.clone()).unwrap();
        let w = WeightParams::default();
        let e = energy_norm(&mut sp, &s, Species::Minus, &w).unwrap();
        let m = 4 * d.n[2];
        let h = d.l[2] / m as f64;
        let oracle: f64 = (0..m)
            .map(|j| {
                let x3 = -0.5 * d.l[2] + j as f64 * h;
                (1.0 + x3 * x3).powf(1.1) * slab_mass(&f, x3.rem_euclid(d.l[2]))
            })
            .sum::<f64>()
            * h;
        assert_relative_eq!(e, oracle, max_relative = 1e-8);
    }

    #[test]
    fn energy_is_translation_covariant() {
        let d = domain();
        let mut sp = Spectral::new(d);
        let w = WeightParams::default();
        let s0 = one_sided(&mut sp, Species::Minus, -2.0);
        let e0 = energy_norm(&mut sp, &s0, Species::Minus, &w).unwrap();
        // z- is weighted by <u+> = <x3 - t - a>: shift the packet and a together
        let shift = 3.0 * d.spacing(2) * 8.0;
        let mut s1 = s0.clone();
        s1.z_minus = spectral::shift_x3(&s0.z_minus, -shift);
        s1.a = shift;
        let e1 = energy_norm(&mut sp, &s1, Species::Minus, &w).unwrap();
        assert_relative_eq!(e0, e1, max_relative = 1e-10);

        let s0 = one_sided(&mut sp, Species::Plus, 2.0);
        let e0 = energy_norm(&mut sp, &s0, Species::Plus, &w).unwrap();
        let mut s1 = s0.clone();
        s1.z_plus = spectral::shift_x3(&s0.z_plus, -shift);
        s1.a = -shift;
        let e1 = energy_norm(&mut sp, &s1, Species::Plus, &w).unwrap();
        assert_relative_eq!(e0, e1, max_relative = 1e-10);
    }

    #[test]
    fn data_norm_of_transverse_mode() {
        // z = (0, 0, sin(k x1)): the derivative orders contribute 1, k^2, k^4
        // times (A/2) Σ_x3 W(x3) h3
        let d = DomainSpec::new([8, 8, 64], [4.0, 4.0, 16.0]).unwrap();
        let mut sp = Spectral::new(d);
        let k = TAU / d.l[0];
        let f = RealVectorField::from_fn(d, |x1, _, _| [0.0, 0.0, (k * x1).sin()]);
        let zp = sp.transform(&f).unwrap();
        let s = ElsasserState::new(&mut sp, 0.0, 0.5, zp, SpectralVectorField::zeros(d)).unwrap();
        let w = WeightParams::default();
        let weight_sum: f64 = (0..d.n[2])
            .map(|i| {
                let x3 = d.centered_coord(2, i);
                (1.0 + (x3 + 0.5) * (x3 + 0.5)).powf(1.1)
            })
            .sum::<f64>()
            * d.spacing(2);
        let area = d.l[0] * d.l[1];
        for (k_max, factor) in [(0, 1.0), (1, 1.0 + k * k), (2, 1.0 + k * k + k.powi(4))] {
            let norm = data_norm(&mut sp, &s, Species::Plus, k_max, &w).unwrap();
            assert_relative_eq!(norm, 0.5 * area * factor * weight_sum, max_relative = 1e-12);
        }
        assert_relative_eq!(
            data_norm(&mut sp, &s, Species::Plus, 0, &w).unwrap(),
            energy_norm(&mut sp, &s, Species::Plus, &w).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn mirror_swaps_weighted_energies() {
        let d = domain();
        let mut sp = Spectral::new(d);
        let w = WeightParams::default();
        let (fp, _) = make_wave_packet(&mut sp, &packet(Species::Plus, 5.0, 0.2), [0.0, 0.0]).unwrap();
        let (fm, _) = make_wave_packet(&mut sp, &packet(Species::Minus, -7.0, 0.1), [0.0, 0.0]).unwrap();
        let mut s = ElsasserState::new(&mut sp, 0.0, 0.0, fp, fm).unwrap();
        s.t = 1.5;
        let m = s.mirrored();
        let ep = energy_norm(&mut sp, &s, Species::Plus, &w).unwrap();
        let em = energy_norm(&mut sp, &s, Species::Minus, &w).unwrap();
        assert_relative_eq!(energy_norm(&mut sp, &m, Species::Minus, &w).unwrap(), ep, max_relative = 1e-12);
        assert_relative_eq!(energy_norm(&mut sp, &m, Species::Plus, &w).unwrap(), em, max_relative = 1e-12);
        assert!(sp.max_divergence(&m.z_plus) < 1e-14);
        let back = m.mirrored();
        assert_eq!(back.z_plus, s.z_plus);
        assert_eq!(back.z_minus, s.z_minus);
    }

    #[test]
    fn sine_mode_conserved_quantities() {
        let d = DomainSpec::cube(16, 4.0).unwrap();
        let mut sp = Spectral::new(d);
        let amp = 0.7;
        let f = RealVectorField::from_fn(d, |_, _, x3| [amp * (TAU * x3 / 4.0).sin(), 0.0, 0.0]);
        let fh = sp.transform(&f).unwrap();
        let s = ElsasserState::new(&mut sp, 0.0, 0.0, fh, SpectralVectorField::zeros(d)).unwrap();
        let (e, ch) = conserved_quantities(&s);
        let expected = amp * amp * d.volume() / 2.0;
        assert_relative_eq!(e, expected, max_relative = 1e-13);
        assert_relative_eq!(ch, expected, max_relative = 1e-13);
        let swapped = ElsasserState {
            z_plus: s.z_minus.clone(),
            z_minus: s.z_plus.clone(),
            ..s.clone()
        };
        let (e2, ch2) = conserved_quantities(&swapped);
        assert_eq!(e2, e);
        assert_eq!(ch2, -ch);
    }

    #[test]
    fn disjoint_packets_have_no_pressure_or_separation() {
        let d = domain();
        let mut sp = Spectral::new(d);
        let (a, _) = make_wave_packet(&mut sp, &packet(Species::Plus, 10.0, 0.2), [0.0, 0.0]).unwrap();
        let (b, _) = make_wave_packet(&mut sp, &packet(Species::Minus, -10.0, 0.2), [0.0, 0.0]).unwrap();
        let s = ElsasserState::new(&mut sp, 0.0, 0.0, a, b).unwrap();
        let w = WeightParams::default();
        assert!(separation_ratio_of(&mut sp, &s, &w).unwrap() <= 1e-14 * 0.04);
        let (p1, p2) = pressure_decay_ratio(&mut sp, &s, &w).unwrap();
        assert!(p1 <= 1e-10 && p2 <= 1e-10, "{p1} {p2}");

        let one = one_sided(&mut sp, Species::Plus, 0.0);
        assert_eq!(pressure_decay_ratio(&mut sp, &one, &w).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn pressure_hessian_of_single_mode() {
        // p = cos(k x1) cos(k x3) with k = 2π/L
        let d = DomainSpec::cube(16, 4.0).unwrap();
        let mut sp = Spectral::new(d);
        let k = TAU / 4.0;
        let samples: Vec<f64> = (0..d.len())
            .map(|idx| {
                let (i1, _, i3) = d.unindex(idx);
                (k * d.coord(0, i1)).cos() * (k * d.coord(2, i3)).cos()
            })
            .collect();
        let p = SpectralScalar {
            domain: d,
            data: sp.forward_scalar(&samples),
        };
        let (g, h) = pressure_derivative_maxima(&mut sp, &p);
        // |∇p|^2 = k^2 (sin^2 a cos^2 b + cos^2 a sin^2 b), maximal value k^2
        assert_relative_eq!(g, k, max_relative = 1e-12);
        // Hessian entries k^2 (-cos cos, sin sin; sin sin, -cos cos): Frobenius
        // norm k^2 sqrt(2 (c^2 + s^2)) with c = cos a cos b, s = sin a sin b,
        // maximal (√2 k^2) where c^2 + s^2 = 1
        assert_relative_eq!(h, 2f64.sqrt() * k * k, max_relative = 1e-12);
    }

    #[test]
    fn divcurl_single_mode_and_constant() {
        let d = DomainSpec::cube(16, TAU).unwrap();
        let mut sp = Spectral::new(d);
        let ones = vec![1.0; d.n[2]];
        let c = RealVectorField::from_fn(d, |_, _, _| [0.3, -0.2, 0.1]);
        let ch = sp.transform(&c).unwrap();
        let r = divcurl_check(&mut sp, &ch, &ones).unwrap();
        assert!(r.lhs() <= 1e-28);
        assert!(r.lhs() <= r.rhs());

        let f = RealVectorField::from_fn(d, |x1, x2, x3| [(2.0 * x3).sin(), (x1 + 3.0 * x3).cos(), 0.0 * x2]);
        let fh = sp.transform(&f).unwrap();
        let r = divcurl_check(&mut sp, &fh, &ones).unwrap();
        assert_relative_eq!(r.gradient, r.curl, max_relative = 1e-12);
    }

    #[test]
    fn divcurl_constant_is_stable_across_seeds() {
        let d = DomainSpec::new([16, 16, 32], [TAU, TAU, 16.0]).unwrap();
        let mut sp = Spectral::new(d);
        let w = WeightParams::default();
        let lambda = species_weight_profile(&d, Species::Minus, 0.0, &w, 2.0 * w.omega);
        let ratios: Vec<f64> = (1..=4)
            .map(|seed| {
                let f = make_random_solenoidal(
                    &mut sp,
                    &RandomField {
                        species: Species::Plus,
                        slope: -2.0,
                        seed,
                        rms: 1.0,
                    },
                )
                .unwrap();
                let r = divcurl_check(&mut sp, &f, &lambda).unwrap();
                r.lhs() / r.rhs()
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        for r in &ratios {
            assert!((r - mean).abs() <= 0.2 * mean, "{ratios:?}");
        }
    }

    #[test]
    fn sobolev_ratio_is_scale_invariant() {
        let d = domain();
        let mut sp = Spectral::new(d);
        let w = WeightParams::default();
        let s = one_sided(&mut sp, Species::Plus, 1.0);
        let r1 = sobolev_check(&mut sp, &s, Species::Plus, &w).unwrap();
        let mut s2 = s.clone();
        s2.z_plus.scale(2.0);
        let r2 = sobolev_check(&mut sp, &s2, Species::Plus, &w).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-12);
        assert!(r1 > 0.0 && r1.is_finite());
    }

    #[test]
    fn sobolev_constant_is_stable_across_polarizations() {
        let d = domain();
        let mut sp = Spectral::new(d);
        let w = WeightParams::default();
        let ratios: Vec<f64> = (1..=4)
            .map(|seed| {
                let p = WavePacket {
                    polarization_seed: seed,
                    ..packet(Species::Minus, -1.0, 0.3)
                };
                let (f, _) = make_wave_packet(&mut sp, &p, [0.0, 0.0]).unwrap();
                let s = ElsasserState::new(&mut sp, 0.0, 0.0, SpectralVectorField::zeros(d), f).unwrap();
                sobolev_check(&mut sp, &s, Species::Minus, &w).unwrap()
            })
            .collect();
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max <= 3.0 * min, "{ratios:?}");
    }

    #[test]
    fn one_sided_flux_saturates_at_surface_quadrature() {
        let d = domain();
        let mut solver = Solver::new(d);
        let w = WeightParams::default();
        let s = one_sided(&mut solver.sp, Species::Plus, 6.0);
        let mut rec = NormRecorder::new(&d, 0.0, w, 0);
        let mut cfg = StepperConfig::new(0.05, 9.0);
        cfg.record_every = 20;
        solver.advance(&s, &cfg, &mut [&mut rec]).unwrap();

        // oracle: (1/√2) ∫_{x3 ≥ u} (1 + x3^2)^ω m(x3) dx3 by dense Simpson
        // quadrature of the interpolated slab mass
        for u in [-4.5, -3.0, 1.875] {
            let upper = 16.0;
            let m = 1600;
            let h = (upper - u) / m as f64;
            let mut acc = 0.0;
            for j in 0..=m {
                let x3: f64 = u + j as f64 * h;
                let c = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                acc += c * (1.0 + x3 * x3).powf(w.omega) * slab_mass(&s.z_plus, x3.rem_euclid(d.l[2]));
            }
            let oracle = acc * h / 3.0 / std::f64::consts::SQRT_2;
            let got = rec.flux_plus.value_at(u).unwrap();
            if u < 0.0 {
                assert_relative_eq!(got, oracle, max_relative = 1e-6);
            } else {
                // the surface starts inside the packet: the trapezoid rule is
                // only second order near the initial endpoint
                assert_relative_eq!(got, oracle, max_relative = 1e-2);
            }
        }
        // monotone accumulation and untouched z- flux
        assert_eq!(rec.flux_minus.sup(), 0.0);
        let fs: Vec<f64> = rec.series.samples.iter().map(|s| s.f_plus).collect();
        assert!(fs.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn flux_is_monotone_in_collisions() {
        let d = domain();
        let mut solver = Solver::new(d);
        let w = WeightParams::default();
        let (a, _) = make_wave_packet(&mut solver.sp, &packet(Species::Plus, 1.5, 0.2), [0.0, 0.0]).unwrap();
        let (b, _) = make_wave_packet(&mut solver.sp, &packet(Species::Minus, -1.5, 0.2), [0.0, 0.0]).unwrap();
        let s = ElsasserState::new(&mut solver.sp, 0.0, 0.0, a, b).unwrap();
        let mut rec = NormRecorder::new(&d, 0.0, w, 0);
        let mut snapshots = Vec::new();
        let mut cur = s;
        for k in 1..=4 {
            cur = solver.advance(&cur, &StepperConfig::new(0.05, k as f64), &mut [&mut rec]).unwrap();
            snapshots.push((rec.flux_plus.values.clone(), rec.flux_minus.values.clone()));
        }
        for pair in snapshots.windows(2) {
            assert!(pair[0].0.iter().zip(&pair[1].0).all(|(a, b)| b >= a));
            assert!(pair[0].1.iter().zip(&pair[1].1).all(|(a, b)| b >= a));
        }
    }

    #[test]
    fn instantaneous_sample_matches_recorder() {
        let d = domain();
        let mut solver = Solver::new(d);
        let w = WeightParams::default();
        let (a, _) = make_wave_packet(&mut solver.sp, &packet(Species::Plus, 1.5, 0.2), [0.0, 0.0]).unwrap();
        let (b, _) = make_wave_packet(&mut solver.sp, &packet(Species::Minus, -1.5, 0.2), [0.0, 0.0]).unwrap();
        let s = ElsasserState::new(&mut solver.sp, 0.0, 0.5, a, b).unwrap();
        let mut rec = NormRecorder::new(&d, 0.0, w, 2);
        let end = solver.advance(&s, &StepperConfig::new(0.05, 0.5), &mut [&mut rec]).unwrap();
        let recorded = rec.series.samples.last().unwrap();
        let fresh = instantaneous_sample(&mut solver.sp, &end, &w, 2).unwrap();
        assert!(fresh.f_plus.is_nan() && fresh.f_minus.is_nan());
        let pairs = [
            (fresh.t, recorded.t),
            (fresh.e_plus, recorded.e_plus),
            (fresh.e_minus, recorded.e_minus),
            (fresh.energy, recorded.energy),
            (fresh.cross_helicity, recorded.cross_helicity),
            (fresh.sep_ratio, recorded.sep_ratio),
            (fresh.p1_ratio, recorded.p1_ratio),
            (fresh.p2_ratio, recorded.p2_ratio),
        ];
        for (x, y) in pairs.into_iter().chain(fresh.ek_plus.iter().copied().zip(recorded.ek_plus.iter().copied())) {
            assert_relative_eq!(x, y, max_relative = 1e-12, epsilon = 1e-300);
        }
    }
}
