//! The evolving Elsasser pair and reproducible initial-data generators.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Species};
use crate::spectral::{
    self, dealias_in_place, leray_project_in_place, RealVectorField, Spectral,
    SpectralVectorField,
};

/// Relative level below which a Gaussian tail counts as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-14;

/// Divergence tolerance used when validating states.
pub const DIV_TOLERANCE: f64 = 1e-12;

/// Background magnetic field `B0 = (0, 0, 1)`.
pub const B0: [f64; 3] = [0.0, 0.0, 1.0];

/// Closed `x3` interval (unwrapped coordinates) holding a packet at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    /// Interval after the species has been transported for `dt`.
    pub fn transported(self, species: Species, dt: f64) -> Self {
        let s = species.transport_speed() * dt;
        Self {
            lo: self.lo + s,
            hi: self.hi + s,
        }
    }

    pub fn hull(self, other: Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

/// Support-tracking metadata carried with a state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SupportGuard {
    /// Time at which the supports were measured.
    pub t0: f64,
    pub plus: Option<Support>,
    pub minus: Option<Support>,
    /// `max|z|` over both species at `t0`, used by the blowup cap.
    pub initial_peak: f64,
}

impl SupportGuard {
    pub fn support_at(&self, species: Species, t: f64) -> Option<Support> {
        let s = match species {
            Species::Plus => self.plus,
            Species::Minus => self.minus,
        };
        s.map(|s| s.transported(species, t - self.t0))
    }

    /// Fails once a tracked support touches the edge of the centered window.
    pub fn check(&self, domain: &DomainSpec, t: f64) -> Result<()> {
        let half = domain.x3_half_width();
        for species in [Species::Plus, Species::Minus] {
            if let Some(s) = self.support_at(species, t) {
                if s.lo < -half || s.hi >= half {
                    return Err(Error::DomainExhaustion(format!(
                        "z{} support [{:.3}, {:.3}] reached the wrap boundary ±{half} at t = {t:.4}",
                        if species == Species::Plus { '+' } else { '-' },
                        s.lo,
                        s.hi
                    )));
                }
            }
        }
        Ok(())
    }

    /// Earliest time after `t0` (in the direction `sign`) from which the two
    /// tracked supports stay disjoint.
    pub fn separation_time(&self, sign: f64) -> Option<f64> {
        let (p, m) = (self.plus?, self.minus?);
        // forward: z+ moves to -x3, z- to +x3
        let s = if sign >= 0.0 {
            0.5 * (p.hi - m.lo)
        } else {
            0.5 * (m.hi - p.lo)
        };
        Some(self.t0 + sign.signum() * s.max(0.0))
    }
}

/// Solution state `(z+, z-)` at time `t` with position parameter `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElsasserState {
    pub t: f64,
    pub a: f64,
    pub z_plus: SpectralVectorField,
    pub z_minus: SpectralVectorField,
    pub guard: SupportGuard,
}

impl ElsasserState {
    pub fn zero(domain: DomainSpec) -> Self {
        Self {
            t: 0.0,
            a: 0.0,
            z_plus: SpectralVectorField::zeros(domain),
            z_minus: SpectralVectorField::zeros(domain),
            guard: SupportGuard::default(),
        }
    }

    /// Builds a validated state and records its peak amplitude.
    pub fn new(
        sp: &mut Spectral,
        t: f64,
        a: f64,
        z_plus: SpectralVectorField,
        z_minus: SpectralVectorField,
    ) -> Result<Self> {
        let mut s = Self {
            t,
            a,
            z_plus,
            z_minus,
            guard: SupportGuard {
                t0: t,
                ..SupportGuard::default()
            },
        };
        s.validate(sp)?;
        s.guard.initial_peak = s.peak(sp);
        Ok(s)
    }

    pub fn domain(&self) -> DomainSpec {
        self.z_plus.domain
    }

    pub fn field(&self, species: Species) -> &SpectralVectorField {
        match species {
            Species::Plus => &self.z_plus,
            Species::Minus => &self.z_minus,
        }
    }

    pub fn field_mut(&mut self, species: Species) -> &mut SpectralVectorField {
        match species {
            Species::Plus => &mut self.z_plus,
            Species::Minus => &mut self.z_minus,
        }
    }

    /// `max|z+|` and `max|z-|` on the grid.
    pub fn peaks(&self, sp: &mut Spectral) -> (f64, f64) {
        let p = sp.inverse(&self.z_plus).map(|f| f.max_magnitude()).unwrap_or(f64::NAN);
        let m = sp.inverse(&self.z_minus).map(|f| f.max_magnitude()).unwrap_or(f64::NAN);
        (p, m)
    }

    pub fn peak(&self, sp: &mut Spectral) -> f64 {
        let (p, m) = self.peaks(sp);
        p.max(m)
    }

    /// Finite, Hermitian and solenoidal to [`DIV_TOLERANCE`].
    pub fn validate(&self, sp: &mut Spectral) -> Result<()> {
        if self.z_plus.domain != self.z_minus.domain {
            return Err(Error::ShapeMismatch("z+ and z- live on different grids".into()));
        }
        for f in [&self.z_plus, &self.z_minus] {
            if f.comps.iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
                return Err(Error::NonFinite("ElsasserState"));
            }
            let scale = f.max_coeff().max(f64::MIN_POSITIVE);
            if f.hermitian_defect() > 1e-12 * scale.max(1.0) {
                return Err(Error::Range("field is not Hermitian-symmetric".into()));
            }
            let div = sp.max_divergence(f);
            if div > DIV_TOLERANCE {
                return Err(Error::NotSolenoidal(div));
            }
        }
        Ok(())
    }

    /// The mirror image `z̃± = R z∓(R x)` under `x3 -> -x3`, which swaps the
    /// roles of the two species.
    pub fn mirrored(&self) -> Self {
        let flip = |s: Option<Support>| s.map(|s| Support { lo: -s.hi, hi: -s.lo });
        Self {
            t: self.t,
            a: self.a,
            z_plus: spectral::mirror_x3(&self.z_minus),
            z_minus: spectral::mirror_x3(&self.z_plus),
            guard: SupportGuard {
                plus: flip(self.guard.minus),
                minus: flip(self.guard.plus),
                ..self.guard
            },
        }
    }

    /// Time shift and new position parameter, keeping the data; the support
    /// guard follows the new clock.
    pub fn reposed(&self, t: f64, a: f64) -> Self {
        let mut s = self.clone();
        let shift = t - self.t;
        s.t = t;
        s.a = a;
        s.guard.t0 += shift;
        s
    }
}

/// Gaussian-enveloped, divergence-free wave packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    pub species: Species,
    pub center: [f64; 3],
    pub widths: [f64; 3],
    /// Target `max|z|`.
    pub amplitude: f64,
    #[serde(default)]
    pub polarization_seed: u64,
}

/// Unit polarization of the vector potential: `e3` for seed 0 (purely
/// transverse `z`), a seeded random direction otherwise.
pub fn polarization(seed: u64) -> [f64; 3] {
    if seed == 0 {
        return [0.0, 0.0, 1.0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 {
            return v.map(|x| x / n);
        }
    }
}

/// Periodized Gaussian `exp(-d^2 / 2w^2)` on one axis.
fn periodic_gaussian(x: f64, center: f64, width: f64, period: f64) -> f64 {
    let mut d = (x - center) % period;
    if d >= 0.5 * period {
        d -= period;
    } else if d < -0.5 * period {
        d += period;
    }
    (-3..=3)
        .map(|k| {
            let y = d + k as f64 * period;
            (-0.5 * y * y / (width * width)).exp()
        })
        .sum()
}

/// Measured `x3` extent of a field: centered coordinates of the first and
/// last slabs whose peak exceeds `SUPPORT_THRESHOLD * max|z|`.
pub fn measure_support(field: &RealVectorField) -> Option<Support> {
    let d = field.domain;
    let n3 = d.n[2];
    let mut slab = vec![0.0f64; n3];
    for idx in 0..d.len() {
        let i3 = idx % n3;
        slab[i3] = slab[i3].max(field.magnitude_at(idx));
    }
    let peak = slab.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let level = SUPPORT_THRESHOLD * peak;
    // walk the centered window in increasing x3
    let order: Vec<usize> = (n3 / 2..n3).chain(0..n3 / 2).collect();
    let inside: Vec<usize> = order.iter().copied().filter(|&i| slab[i] > level).collect();
    let h = d.spacing(2);
    let (first, last) = (inside[0], inside[inside.len() - 1]);
    Some(Support {
        lo: d.centered_coord(2, first) - h,
        hi: d.centered_coord(2, last) + h,
    })
}

/// Builds `z = curl(A g e)` for a Gaussian envelope `g` and polarization `e`,
/// truncated to the dealiased band and scaled so `max|z|` equals the
/// requested amplitude. `run_span` is the planned time window relative to
/// the start; the support transported over it must stay inside `[-L3/2, L3/2)`.
pub fn make_wave_packet(
    sp: &mut Spectral,
    packet: &WavePacket,
    run_span: [f64; 2],
) -> Result<(SpectralVectorField, Option<Support>)> {
    let d = sp.domain;
    if packet.widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Range(format!("packet widths {:?} must be positive", packet.widths)));
    }
    if packet.amplitude == 0.0 {
        return Ok((SpectralVectorField::zeros(d), None));
    }
    let g: Vec<f64> = (0..d.len())
        .map(|idx| {
            let (i1, i2, i3) = d.unindex(idx);
            [i1, i2, i3]
                .iter()
                .enumerate()
                .map(|(a, &i)| periodic_gaussian(d.coord(a, i), packet.center[a], packet.widths[a], d.l[a]))
                .product()
        })
        .collect();
    let mut g_hat = sp.forward_scalar(&g);
    dealias_in_place(&mut g_hat, &d);
    let e = polarization(packet.polarization_seed);
    let potential = SpectralVectorField {
        domain: d,
        comps: e.map(|ec| g_hat.iter().map(|v| v * ec).collect::<Vec<Complex64>>()),
    };
    let mut z = spectral::curl(&potential);
    let physical = sp.inverse(&z)?;
    let peak = physical.max_magnitude();
    if peak == 0.0 {
        return Err(Error::Range("packet is unresolved on this grid".into()));
    }
    z.scale(packet.amplitude / peak);
    let support = measure_support(&physical);
    if let Some(s) = support {
        let half = d.x3_half_width();
        let reach: Vec<Support> = run_span
            .iter()
            .map(|&dt| s.transported(packet.species, dt))
            .collect();
        let swept = reach[0].hull(reach[1]).hull(s);
        if swept.lo < -half || swept.hi >= half {
            return Err(Error::MarginViolation(format!(
                "z{} packet at x3 = {} with support [{:.3}, {:.3}] sweeps [{:.3}, {:.3}] over the run, beyond ±{half}",
                if packet.species == Species::Plus { '+' } else { '-' },
                packet.center[2],
                s.lo,
                s.hi,
                swept.lo,
                swept.hi
            )));
        }
    }
    Ok((z, support))
}

/// Seeded random solenoidal field with shell spectrum `E(k) ∝ k^slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomField {
    pub species: Species,
    pub slope: f64,
    pub seed: u64,
    /// Target root-mean-square `|z|`.
    pub rms: f64,
}

pub fn make_random_solenoidal(sp: &mut Spectral, spec: &RandomField) -> Result<SpectralVectorField> {
    let d = sp.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut f = SpectralVectorField::zeros(d);
    for c in 0..3 {
        let white: Vec<f64> = (0..d.len()).map(|_| rng.sample(StandardNormal)).collect();
        f.comps[c] = sp.forward_scalar(&white);
    }
    // |û|^2 ∝ k^(slope - 2) gives a shell spectrum ∝ k^slope
    let exponent = 0.5 * (spec.slope - 2.0);
    for c in &mut f.comps {
        for (idx, v) in c.iter_mut().enumerate() {
            let (i1, i2, i3) = d.unindex(idx);
            let k = (0..3)
                .map(|a| {
                    let m = d.mode(a, [i1, i2, i3][a]) as f64 * std::f64::consts::TAU / d.l[a];
                    m * m
                })
                .sum::<f64>()
                .sqrt();
            *v = if k == 0.0 { Complex64::default() } else { *v * k.powf(exponent) };
        }
        dealias_in_place(c, &d);
    }
    leray_project_in_place(&mut f);
    let energy = f.l2_norm_sq() / d.volume();
    if energy > 0.0 {
        f.scale(spec.rms / energy.sqrt());
    }
    Ok(f)
}

/// Physical fields recovered from the Elsasser pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalReconstruction {
    pub v: RealVectorField,
    pub b: RealVectorField,
    pub p: Vec<f64>,
}

/// `v = (z+ + z-)/2`, `b = (z+ - z-)/2 + B0`, pressure from the Poisson solve.
pub fn reconstruct_physical(sp: &mut Spectral, s: &ElsasserState) -> Result<PhysicalReconstruction> {
    let zp = sp.inverse(&s.z_plus)?;
    let zm = sp.inverse(&s.z_minus)?;
    let d = s.domain();
    let mut v = RealVectorField::zeros(d);
    let mut b = RealVectorField::zeros(d);
    for c in 0..3 {
        for idx in 0..d.len() {
            let (p, m) = (zp.comps[c][idx], zm.comps[c][idx]);
            v.comps[c][idx] = 0.5 * (p + m);
            b.comps[c][idx] = 0.5 * (p - m) + B0[c];
        }
    }
    let p_hat = sp.solve_pressure(&s.z_plus, &s.z_minus)?;
    let p = sp.inverse_scalar(&p_hat.data);
    Ok(PhysicalReconstruction { v, b, p })
}

/// Inverse of [`reconstruct_physical`] for the velocity and magnetic field:
/// `z± = v ± (b - B0)`.
pub fn elsasser_from_physical(v: &RealVectorField, b: &RealVectorField) -> (RealVectorField, RealVectorField) {
    let d = v.domain;
    let mut zp = RealVectorField::zeros(d);
    let mut zm = RealVectorField::zeros(d);
    for c in 0..3 {
        for idx in 0..d.len() {
            let bb = b.comps[c][idx] - B0[c];
            zp.comps[c][idx] = v.comps[c][idx] + bb;
            zm.comps[c][idx] = v.comps[c][idx] - bb;
        }
    }
    (zp, zm)
}

/// Assembles a state from packets and random fields at time `t0`. Packet
/// supports are recorded in the guard; random fields disable tracking for
/// their species.
pub fn build_state(
    sp: &mut Spectral,
    t0: f64,
    a: f64,
    packets: &[WavePacket],
    random: &[RandomField],
    run_span: [f64; 2],
) -> Result<ElsasserState> {
    let d = sp.domain;
    let mut zp = SpectralVectorField::zeros(d);
    let mut zm = SpectralVectorField::zeros(d);
    let mut sup_p: Option<Support> = None;
    let mut sup_m: Option<Support> = None;
    let mut untracked = [false, false];
    for packet in packets {
        let (f, support) = make_wave_packet(sp, packet, run_span)?;
        let (target, slot) = match packet.species {
            Species::Plus => (&mut zp, &mut sup_p),
            Species::Minus => (&mut zm, &mut sup_m),
        };
        target.add_assign(&f);
        if let Some(s) = support {
            *slot = Some(slot.map_or(s, |old| old.hull(s)));
        }
    }
    for r in random {
        let f = make_random_solenoidal(sp, r)?;
        match r.species {
            Species::Plus => {
                zp.add_assign(&f);
                untracked[0] = true;
            }
            Species::Minus => {
                zm.add_assign(&f);
                untracked[1] = true;
            }
        }
    }
    let mut s = ElsasserState::new(sp, t0, a, zp, zm)?;
    s.guard.plus = if untracked[0] { None } else { sup_p };
    s.guard.minus = if untracked[1] { None } else { sup_m };
    Ok(s)
}
