//! Discrete periodic domain, characteristic coordinates and the polynomial
//! weights `<u±>` built from them.
//!
//! The background field points along `x3`, so `u+ = x3 - t` and
//! `u- = x3 + t`. With position parameter `a`,
//!
//! ```text
//! <u+> = (1 + |u+ - a|^2)^(1/2)      <u-> = (1 + |u- + a|^2)^(1/2)
//! ```
//!
//! `z-` is measured against `<u+>` and `z+` against `<u->`; each weight is
//! constant along the lines that carry its field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the two Elsasser species, also used to name the matching
/// characteristic family (`u+` or `u-`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Plus,
    Minus,
}

impl Species {
    pub fn opposite(self) -> Self {
        match self {
            Species::Plus => Species::Minus,
            Species::Minus => Species::Plus,
        }
    }

    /// Velocity along `x3` of the linear transport carrying this species:
    /// `z+` moves towards `-x3`, `z-` towards `+x3`.
    pub fn transport_speed(self) -> f64 {
        match self {
            Species::Plus => -1.0,
            Species::Minus => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Species::Plus => "plus",
            Species::Minus => "minus",
        }
    }
}

/// Uniform periodic grid. Samples are stored `x1`-major: the flat index of
/// `(i1, i2, i3)` is `(i1 * n2 + i2) * n3 + i3`, so `x3` lines are contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub n: [usize; 3],
    pub l: [f64; 3],
    /// Largest `|wrap_count|` accepted by [`DomainSpec::unwrap_x3`].
    #[serde(default = "default_max_wrap")]
    pub max_wrap: i32,
}

fn default_max_wrap() -> i32 {
    1
}

impl DomainSpec {
    pub fn new(n: [usize; 3], l: [f64; 3]) -> Result<Self> {
        for axis in 0..3 {
            if n[axis] < 8 || !n[axis].is_power_of_two() {
                return Err(Error::InvalidDomain(format!(
                    "n{} = {} must be a power of two >= 8",
                    axis + 1,
                    n[axis]
                )));
            }
            if !(l[axis].is_finite() && l[axis] > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "L{} = {} must be positive",
                    axis + 1,
                    l[axis]
                )));
            }
        }
        Ok(Self {
            n,
            l,
            max_wrap: default_max_wrap(),
        })
    }

    /// Cube with `n` points and side `l` on every axis.
    pub fn cube(n: usize, l: f64) -> Result<Self> {
        Self::new([n; 3], [l; 3])
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.l[axis] / self.n[axis] as f64
    }

    pub fn h_min(&self) -> f64 {
        (0..3).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.l[0] * self.l[1] * self.l[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n[1] + i2) * self.n[2] + i3
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let i3 = idx % self.n[2];
        let rest = idx / self.n[2];
        (rest / self.n[1], rest % self.n[1], i3)
    }

    /// Grid coordinate `i * h` used by the transforms.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 * self.spacing(axis)
    }

    /// Representative of grid point `i` in the centered window `[-L/2, L/2)`.
    pub fn centered_coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.n[axis];
        let m = if i >= n / 2 { i as f64 - n as f64 } else { i as f64 };
        m * self.spacing(axis)
    }

    /// Signed mode number of FFT slot `i`.
    #[inline]
    pub fn mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.n[axis];
        if i < n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Angular wavenumber of FFT slot `i`; the Nyquist slot maps to zero so
    /// that odd derivatives stay real.
    #[inline]
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        if 2 * i == self.n[axis] {
            return 0.0;
        }
        std::f64::consts::TAU * self.mode(axis, i) as f64 / self.l[axis]
    }

    /// Largest retained mode under the 2/3 rule.
    pub fn dealias_cutoff(&self, axis: usize) -> i64 {
        (self.n[axis] / 3) as i64
    }

    #[inline]
    pub fn keeps_mode(&self, i1: usize, i2: usize, i3: usize) -> bool {
        self.mode(0, i1).abs() <= self.dealias_cutoff(0)
            && self.mode(1, i2).abs() <= self.dealias_cutoff(1)
            && self.mode(2, i3).abs() <= self.dealias_cutoff(2)
    }

    /// Half-width of the centered `x3` window.
    pub fn x3_half_width(&self) -> f64 {
        0.5 * self.l[2]
    }

    /// Shifts an `x3` value by whole periods so weights stay monotone along
    /// characteristics that leave the centered window.
    pub fn unwrap_x3(&self, x3: f64, wrap_count: i32) -> Result<f64> {
        if wrap_count.abs() > self.max_wrap {
            return Err(Error::DomainExhaustion(format!(
                "wrap count {wrap_count} exceeds the configured maximum {}",
                self.max_wrap
            )));
        }
        Ok(x3 + wrap_count as f64 * self.l[2])
    }
}

/// `δ`, `ω = 1 + δ` and the position parameter `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub a: f64,
    pub delta: f64,
    pub omega: f64,
}

pub const DEFAULT_DELTA: f64 = 0.1;

impl WeightParams {
    pub fn new(a: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 2.0 / 3.0) {
            return Err(Error::Range(format!(
                "delta = {delta} must lie in (0, 2/3)"
            )));
        }
        if !a.is_finite() {
            return Err(Error::Range(format!("position parameter a = {a} must be finite")));
        }
        Ok(Self {
            a,
            delta,
            omega: 1.0 + delta,
        })
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            a: 0.0,
            delta: DEFAULT_DELTA,
            omega: 1.0 + DEFAULT_DELTA,
        }
    }
}

/// `(u+, u-) = (x3 - t, x3 + t)`.
pub fn characteristic_coords(t: f64, x3: f64) -> (f64, f64) {
    (x3 - t, x3 + t)
}

/// `<u±>^power` for the family `family`, with the `∓a` shift of that family.
pub fn weight_value(u: f64, family: Species, w: &WeightParams, power: f64) -> f64 {
    let shifted = match family {
        Species::Plus => u - w.a,
        Species::Minus => u + w.a,
    };
    (1.0 + shifted * shifted).powf(0.5 * power)
}

/// Weight family paired with a species in the energy and flux norms:
/// `z+` is measured with `<u->`, `z-` with `<u+>`.
pub fn weight_family(species: Species) -> Species {
    species.opposite()
}

/// `<u∓>^power` evaluated at `(t, x3)` for the family paired with `species`.
pub fn species_weight(species: Species, t: f64, x3: f64, w: &WeightParams, power: f64) -> f64 {
    let (up, um) = characteristic_coords(t, x3);
    match weight_family(species) {
        Species::Plus => weight_value(up, Species::Plus, w, power),
        Species::Minus => weight_value(um, Species::Minus, w, power),
    }
}

/// Per-`x3` values of `<u∓>^power` on the centered window at time `t`.
pub fn species_weight_profile(
    domain: &DomainSpec,
    species: Species,
    t: f64,
    w: &WeightParams,
    power: f64,
) -> Vec<f64> {
    (0..domain.n[2])
        .map(|i3| species_weight(species, t, domain.centered_coord(2, i3), w, power))
        .collect()
}
