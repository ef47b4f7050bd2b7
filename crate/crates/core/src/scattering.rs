//! Scattering fields: the nonlinearity integrated along the characteristic
//! lines of each species,
//!
//! ```text
//! z+(±∞; x1, x2, u-) = z+(0, x1, x2, u-) - ∫_0^{±∞} (∇p + z-·∇z+)(τ, x1, x2, u- - τ) dτ
//! z-(±∞; x1, x2, u+) = z-(0, x1, x2, u+) - ∫_0^{±∞} (∇p + z+·∇z-)(τ, x1, x2, u+ + τ) dτ
//! ```
//!
//! Sampling along `x3 = u- - τ` is the phase `e^{-i k3 τ}` in spectral space,
//! so the accumulator works on comoving Fourier coefficients and the lattice
//! `(x1, x2, u∓)` coincides with the grid. Past fields come from a backward
//! run with negative `dτ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{weight_value, DomainSpec, Species, WeightParams};
use crate::solver::{Frame, Observer, Tick};
use crate::spectral::{self, RealVectorField, Spectral, SpectralVectorField};
use crate::state::ElsasserState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Infinity {
    Future,
    Past,
}

impl Infinity {
    pub fn label(self) -> &'static str {
        match self {
            Infinity::Future => "future",
            Infinity::Past => "past",
        }
    }
}

/// `f(x3 - c τ)` with `c = +1` for `z+` lines (`x3 = u- - τ`) and `c = -1`
/// for `z-` lines (`x3 = u+ + τ`): the comoving frame of each species.
pub fn to_comoving(f: &SpectralVectorField, species: Species, tau: f64) -> SpectralVectorField {
    spectral::shift_x3(f, species.transport_speed() * tau)
}

/// Inverse of [`to_comoving`].
pub fn from_comoving(f: &SpectralVectorField, species: Species, tau: f64) -> SpectralVectorField {
    spectral::shift_x3(f, -species.transport_speed() * tau)
}

/// Scattering field of one species on the lattice `(x1, x2, u∓)`; the `u`
/// coordinate of grid slot `i3` is the centered `x3` coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringField {
    pub species: Species,
    pub infinity: Infinity,
    /// Time at which the improper integral was truncated.
    pub t_end: f64,
    /// Weighted-L² change of the accumulator over the tail window.
    pub tail: Option<f64>,
    pub coeffs: SpectralVectorField,
}

impl ScatteringField {
    pub fn domain(&self) -> DomainSpec {
        self.coeffs.domain
    }

    pub fn values(&self, sp: &mut Spectral) -> Result<RealVectorField> {
        sp.inverse(&self.coeffs)
    }
}

/// `<u∓>^{2ω}` on the lattice of the scattering field of `species`:
/// `z+` fields live on `u-`, `z-` fields on `u+`.
pub fn scattering_weight_profile(domain: &DomainSpec, species: Species, w: &WeightParams) -> Vec<f64> {
    let family = species.opposite();
    (0..domain.n[2])
        .map(|i3| weight_value(domain.centered_coord(2, i3), family, w, 2.0 * w.omega))
        .collect()
}

/// `Σ_{|β|=k} ∫ <u∓>^{2ω} |∂^β f|^2 dx1 dx2 du∓`.
pub fn scattering_norm(
    sp: &mut Spectral,
    coeffs: &SpectralVectorField,
    species: Species,
    k: u32,
    w: &WeightParams,
) -> Result<f64> {
    let profile = scattering_weight_profile(&coeffs.domain, species, w);
    let mut total = 0.0;
    for beta in spectral::multi_indices(k) {
        let f = sp.inverse(&spectral::derivative(coeffs, beta))?;
        total += crate::diagnostics::weighted_l2(&f, &profile);
    }
    Ok(total)
}

/// Observer accumulating both scattering integrals with the trapezoid rule
/// in absolute time.
#[derive(Debug, Clone)]
pub struct ScatteringAccumulator {
    pub infinity: Infinity,
    pub weights: WeightParams,
    plus: SpectralVectorField,
    minus: SpectralVectorField,
    last: Option<(f64, SpectralVectorField, SpectralVectorField)>,
    /// `(t, plus, minus)` at record points, for tail estimates.
    checkpoints: Vec<(f64, SpectralVectorField, SpectralVectorField)>,
    watch_after: Option<f64>,
    late_integrand: f64,
}

impl ScatteringAccumulator {
    pub fn new(domain: DomainSpec, infinity: Infinity, weights: WeightParams) -> Self {
        Self {
            infinity,
            weights,
            plus: SpectralVectorField::zeros(domain),
            minus: SpectralVectorField::zeros(domain),
            last: None,
            checkpoints: Vec::new(),
            watch_after: None,
            late_integrand: 0.0,
        }
    }

    /// Tracks the size of the integrand from time `t` on (in the run direction).
    pub fn watch_integrand_after(&mut self, t: f64) {
        self.watch_after = Some(t);
    }

    /// Largest `max|integrand|` seen after the watch time.
    pub fn late_integrand(&self) -> f64 {
        self.late_integrand
    }

    pub fn current(&self, species: Species) -> &SpectralVectorField {
        match species {
            Species::Plus => &self.plus,
            Species::Minus => &self.minus,
        }
    }

    pub fn time(&self) -> Option<f64> {
        self.last.as_ref().map(|l| l.0)
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.0).collect()
    }

    /// Advances both integrals to the state's time.
    pub fn accumulate(&mut self, sp: &mut Spectral, s: &ElsasserState, frame: &Frame, record: bool) -> Result<()> {
        let gp = to_comoving(&frame.nl_plus, Species::Plus, s.t);
        let gm = to_comoving(&frame.nl_minus, Species::Minus, s.t);
        match &self.last {
            None => {
                self.plus = to_comoving(&s.z_plus, Species::Plus, s.t);
                self.minus = to_comoving(&s.z_minus, Species::Minus, s.t);
            }
            Some((t_prev, pp, pm)) => {
                let h = s.t - t_prev;
                self.plus.axpy(0.5 * h, pp);
                self.plus.axpy(0.5 * h, &gp);
                self.minus.axpy(0.5 * h, pm);
                self.minus.axpy(0.5 * h, &gm);
            }
        }
        if let Some(tw) = self.watch_after {
            let past_watch = match self.infinity {
                Infinity::Future => s.t >= tw,
                Infinity::Past => s.t <= tw,
            };
            if past_watch {
                let p = sp.inverse(&frame.nl_plus)?.max_magnitude();
                let m = sp.inverse(&frame.nl_minus)?.max_magnitude();
                self.late_integrand = self.late_integrand.max(p).max(m);
            }
        }
        self.last = Some((s.t, gp, gm));
        if record {
            self.checkpoints.push((s.t, self.plus.clone(), self.minus.clone()));
        }
        Ok(())
    }

    /// Weighted-L² change of the accumulated fields over the last `window`
    /// of run time, `sqrt(Σ± ‖S±(T) - S±(T - window)‖^2)`.
    pub fn convergence_tail(&self, sp: &mut Spectral, window: f64) -> Result<f64> {
        if self.checkpoints.len() < 2 {
            return Err(Error::InsufficientHistory(format!(
                "{} checkpoint(s) recorded, need at least two",
                self.checkpoints.len()
            )));
        }
        let (t_end, _, _) = self.checkpoints.last().expect("non-empty");
        let target = match self.infinity {
            Infinity::Future => t_end - window,
            Infinity::Past => t_end + window,
        };
        let before = self
            .checkpoints
            .iter()
            .rev()
            .find(|c| match self.infinity {
                Infinity::Future => c.0 <= target + 1e-12,
                Infinity::Past => c.0 >= target - 1e-12,
            })
            .ok_or_else(|| {
                Error::InsufficientHistory(format!(
                    "no checkpoint at or before t = {target} (window {window})"
                ))
            })?;
        let mut total = 0.0;
        for (species, cur, old) in [
            (Species::Plus, &self.plus, &before.1),
            (Species::Minus, &self.minus, &before.2),
        ] {
            total += scattering_norm(sp, &cur.sub(old), species, 0, &self.weights)?;
        }
        Ok(total.sqrt())
    }

    pub fn finalize(&self, tail_window: Option<f64>, sp: &mut Spectral) -> Result<[ScatteringField; 2]> {
        let t_end = self
            .time()
            .ok_or_else(|| Error::InsufficientHistory("accumulator never sampled".into()))?;
        let tail = match tail_window {
            Some(w) => Some(self.convergence_tail(sp, w)?),
            None => None,
        };
        Ok([Species::Plus, Species::Minus].map(|species| ScatteringField {
            species,
            infinity: self.infinity,
            t_end,
            tail,
            coeffs: self.current(species).clone(),
        }))
    }
}

impl Observer for ScatteringAccumulator {
    fn every_step(&self) -> bool {
        true
    }

    fn observe(&mut self, sp: &mut Spectral, s: &ElsasserState, frame: &Frame, tick: Tick) -> Result<()> {
        self.accumulate(sp, s, frame, tick.record)
    }
}

/// Largest pointwise gap between the accumulated integral formula and the
/// solver's trace `z±(T)` on the moving lines, for both species.
pub fn trace_identity_check(sp: &mut Spectral, acc: &ScatteringAccumulator, s_at_t: &ElsasserState) -> Result<f64> {
    if acc.time().is_some_and(|t| (t - s_at_t.t).abs() > 1e-12) {
        return Err(Error::Range(format!(
            "accumulator is at t = {:?} but the state is at t = {}",
            acc.time(),
            s_at_t.t
        )));
    }
    let mut worst = 0.0f64;
    for species in [Species::Plus, Species::Minus] {
        let trace = to_comoving(s_at_t.field(species), species, s_at_t.t);
        let diff = sp.inverse(&trace.sub(acc.current(species)))?;
        worst = worst.max(diff.max_magnitude());
    }
    Ok(worst)
}

/// Largest `|div|` of a scattering field in the lattice coordinates.
pub fn scattering_divergence(sp: &mut Spectral, f: &ScatteringField) -> f64 {
    sp.max_divergence(&f.coeffs)
}
