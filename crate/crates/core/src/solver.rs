//! Integrating-factor RK4 time stepping for the Elsasser system
//!
//! ```text
//! ∂t z+ - ∂3 z+ = -∇p - z-·∇z+
//! ∂t z- + ∂3 z- = -∇p - z+·∇z-
//! ```
//!
//! The transport terms are applied exactly as the phases `e^{±i k3 t}`; RK4
//! only sees the projected nonlinearity. Backward runs use a negative step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Species};
use crate::spectral::{RealVectorField, Spectral, SpectralScalar, SpectralVectorField};
use crate::state::ElsasserState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn of_span(t0: f64, t_end: f64) -> Self {
        if t_end >= t0 {
            Direction::Forward
        } else {
            Direction::Backward
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    /// Requested step size (positive).
    pub dt: f64,
    pub cfl: f64,
    /// Target time; the direction follows from the sign of `t_end - t`.
    pub t_end: f64,
    pub record_every: usize,
    /// Abort once `max|z|` exceeds this multiple of the initial peak.
    pub blowup_factor: f64,
    /// Enforce the support guard every step.
    pub track_support: bool,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            cfl: 0.5,
            t_end,
            record_every: 1,
            blowup_factor: 10.0,
            track_support: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Range(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Range(format!("cfl = {} must lie in (0, 1]", self.cfl)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::Range("t_end must be finite".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Range("record_every must be at least 1".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Range("blowup factor must exceed 1".into()));
        }
        Ok(())
    }

    /// `min(dt, cfl h_min / (1 + max|z|))`.
    pub fn effective_dt(&self, domain: &DomainSpec, max_z: f64) -> f64 {
        self.dt.min(self.cfl * domain.h_min() / (1.0 + max_z))
    }
}

/// Nonlinear right-hand side at one time level together with the fields
/// computed on the way, so observers do not repeat the transforms.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `-P(z-·∇z+)` and `-P(z+·∇z-)` in spectral space.
    pub nl_plus: SpectralVectorField,
    pub nl_minus: SpectralVectorField,
    pub pressure: SpectralScalar,
    pub phys_plus: RealVectorField,
    pub phys_minus: RealVectorField,
    pub max_plus: f64,
    pub max_minus: f64,
}

impl Frame {
    pub fn nonlinear(&self, species: Species) -> &SpectralVectorField {
        match species {
            Species::Plus => &self.nl_plus,
            Species::Minus => &self.nl_minus,
        }
    }

    pub fn physical(&self, species: Species) -> &RealVectorField {
        match species {
            Species::Plus => &self.phys_plus,
            Species::Minus => &self.phys_minus,
        }
    }

    pub fn max_z(&self) -> f64 {
        self.max_plus.max(self.max_minus)
    }
}

/// Position of a time level within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tick {
    pub step: usize,
    /// True at `step = 0`, every `record_every` steps and at the final level.
    pub record: bool,
}

/// Read-only consumer of time levels.
pub trait Observer {
    /// Accumulators that integrate in time ask for every step; samplers are
    /// only called at record points.
    fn every_step(&self) -> bool {
        false
    }

    fn observe(&mut self, sp: &mut Spectral, state: &ElsasserState, frame: &Frame, tick: Tick) -> Result<()>;
}

/// Projected nonlinearity, pressure and physical fields for `(z+, z-)`.
pub fn nonlinear_frame(sp: &mut Spectral, zp: &SpectralVectorField, zm: &SpectralVectorField) -> Frame {
    let phys_plus = sp.inverse(zp).expect("state lives on the workspace grid");
    let phys_minus = sp.inverse(zm).expect("state lives on the workspace grid");
    let tensor = sp.product_tensor_physical(&phys_plus.comps, &phys_minus.comps);
    let pressure = sp.pressure_from_tensor(&tensor);
    let (mut np, mut nm) = sp.advection_from_tensor(&tensor);
    // -(∇p + N) = -P N since k·N+ = k·N- = -|k|^2 p
    let d = sp.domain;
    let wn = &sp.wn;
    let n3 = d.n[2];
    let n2 = d.n[1];
    for idx in 0..d.len() {
        let i3 = idx % n3;
        let rest = idx / n3;
        let (i1, i2) = (rest / n2, rest % n2);
        let k = [wn.k[0][i1], wn.k[1][i2], wn.k[2][i3]];
        let grad_p = [0, 1, 2].map(|c| Complex64::new(0.0, k[c]) * pressure.data[idx]);
        for c in 0..3 {
            np.comps[c][idx] = -(np.comps[c][idx] + grad_p[c]);
            nm.comps[c][idx] = -(nm.comps[c][idx] + grad_p[c]);
        }
    }
    let max_plus = phys_plus.max_magnitude();
    let max_minus = phys_minus.max_magnitude();
    Frame {
        nl_plus: np,
        nl_minus: nm,
        pressure,
        phys_plus,
        phys_minus,
        max_plus,
        max_minus,
    }
}

/// Full right-hand sides `(∂t z+, ∂t z-)` including the transport terms.
pub fn compute_rhs(sp: &mut Spectral, s: &ElsasserState) -> (SpectralVectorField, SpectralVectorField) {
    let frame = nonlinear_frame(sp, &s.z_plus, &s.z_minus);
    let mut dp = frame.nl_plus;
    let mut dm = frame.nl_minus;
    let d = sp.domain;
    let n3 = d.n[2];
    for c in 0..3 {
        for idx in 0..d.len() {
            let k3 = sp.wn.k[2][idx % n3];
            dp.comps[c][idx] += Complex64::new(0.0, k3) * s.z_plus.comps[c][idx];
            dm.comps[c][idx] -= Complex64::new(0.0, k3) * s.z_minus.comps[c][idx];
        }
    }
    (dp, dm)
}

/// Per-`k3` phases `e^{i k3 h}` used by the integrating factor.
fn phases(sp: &Spectral, h: f64) -> Vec<Complex64> {
    sp.wn.k[2].iter().map(|&k3| Complex64::from_polar(1.0, k3 * h)).collect()
}

/// Applies the exact transport over `h`: `ẑ+ ← e^{i k3 h} ẑ+`,
/// `ẑ- ← e^{-i k3 h} ẑ-`.
fn propagate(f: &mut SpectralVectorField, phase: &[Complex64], species: Species) {
    let n3 = phase.len();
    for c in &mut f.comps {
        for (idx, v) in c.iter_mut().enumerate() {
            let p = phase[idx % n3];
            *v *= match species {
                Species::Plus => p,
                Species::Minus => p.conj(),
            };
        }
    }
}

/// Exact linear transport of a state over `h`, without nonlinearity.
pub fn transport(state: &ElsasserState, sp: &Spectral, h: f64) -> ElsasserState {
    let phase = phases(sp, h);
    let mut s = state.clone();
    propagate(&mut s.z_plus, &phase, Species::Plus);
    propagate(&mut s.z_minus, &phase, Species::Minus);
    s.t += h;
    s
}

/// Time stepper holding the transform workspace.
#[derive(Debug)]
pub struct Solver {
    pub sp: Spectral,
}

impl Solver {
    pub fn new(domain: DomainSpec) -> Self {
        Self {
            sp: Spectral::new(domain),
        }
    }

    pub fn domain(&self) -> DomainSpec {
        self.sp.domain
    }

    /// One IF-RK4 step of signed size `h`, given the stage-1 frame at `s`.
    fn step_with(&mut self, s: &ElsasserState, k1: &Frame, h: f64) -> ElsasserState {
        let half = phases(&self.sp, 0.5 * h);
        let full = phases(&self.sp, h);
        let pair = |f: &Frame| (f.nl_plus.clone(), f.nl_minus.clone());
        let (k1p, k1m) = pair(k1);

        // stage 2: E(h/2)(u + h/2 k1)
        let mut ap = s.z_plus.clone();
        ap.axpy(0.5 * h, &k1p);
        propagate(&mut ap, &half, Species::Plus);
        let mut am = s.z_minus.clone();
        am.axpy(0.5 * h, &k1m);
        propagate(&mut am, &half, Species::Minus);
        let (k2p, k2m) = pair(&nonlinear_frame(&mut self.sp, &ap, &am));

        // stage 3: E(h/2)u + h/2 k2
        let mut up_half = s.z_plus.clone();
        propagate(&mut up_half, &half, Species::Plus);
        let mut um_half = s.z_minus.clone();
        propagate(&mut um_half, &half, Species::Minus);
        let mut bp = up_half.clone();
        bp.axpy(0.5 * h, &k2p);
        let mut bm = um_half.clone();
        bm.axpy(0.5 * h, &k2m);
        let (k3p, k3m) = pair(&nonlinear_frame(&mut self.sp, &bp, &bm));

        // stage 4: E(h)u + h E(h/2) k3
        let mut k3p_half = k3p.clone();
        propagate(&mut k3p_half, &half, Species::Plus);
        let mut k3m_half = k3m.clone();
        propagate(&mut k3m_half, &half, Species::Minus);
        let mut cp = up_half.clone();
        propagate(&mut cp, &half, Species::Plus);
        cp.axpy(h, &k3p_half);
        let mut cm = um_half.clone();
        propagate(&mut cm, &half, Species::Minus);
        cm.axpy(h, &k3m_half);
        let (k4p, k4m) = pair(&nonlinear_frame(&mut self.sp, &cp, &cm));

        // u_{n+1} = E(h)u + h/6 (E(h)k1 + 2E(h/2)(k2 + k3) + k4)
        let combine = |u: &SpectralVectorField,
                       k1: &SpectralVectorField,
                       k2: &SpectralVectorField,
                       k3: &SpectralVectorField,
                       k4: &SpectralVectorField,
                       species: Species| {
            let mut out = u.clone();
            out.axpy(h / 6.0, k1);
            propagate(&mut out, &full, species);
            let mut mid = k2.clone();
            mid.add_assign(k3);
            propagate(&mut mid, &half, species);
            out.axpy(h / 3.0, &mid);
            out.axpy(h / 6.0, k4);
            out
        };
        let mut next = s.clone();
        next.z_plus = combine(&s.z_plus, &k1p, &k2p, &k3p, &k4p, Species::Plus);
        next.z_minus = combine(&s.z_minus, &k1m, &k2m, &k3m, &k4m, Species::Minus);
        next
    }

    /// Single step of signed size `h` from `s`.
    pub fn step(&mut self, s: &ElsasserState, h: f64) -> Result<ElsasserState> {
        s.guard.check(&self.sp.domain, s.t)?;
        let frame = nonlinear_frame(&mut self.sp, &s.z_plus, &s.z_minus);
        let mut next = self.step_with(s, &frame, h);
        next.t = s.t + h;
        Ok(next)
    }

    /// Steps from `s.t` to `cfg.t_end` with a uniform step no larger than the
    /// effective step, calling observers at every level they ask for.
    pub fn advance(
        &mut self,
        s: &ElsasserState,
        cfg: &StepperConfig,
        observers: &mut [&mut dyn Observer],
    ) -> Result<ElsasserState> {
        cfg.validate()?;
        let d = self.sp.domain;
        if s.domain() != d {
            return Err(Error::ShapeMismatch("state and solver grids differ".into()));
        }
        let span = cfg.t_end - s.t;
        let mut frame = nonlinear_frame(&mut self.sp, &s.z_plus, &s.z_minus);
        let cap = cfg.blowup_factor * s.guard.initial_peak;
        let n_steps = if span == 0.0 {
            0
        } else {
            (span.abs() / cfg.effective_dt(&d, frame.max_z())).ceil() as usize
        };
        for o in observers.iter_mut() {
            o.observe(&mut self.sp, s, &frame, Tick { step: 0, record: true })?;
        }
        if n_steps == 0 {
            return Ok(s.clone());
        }
        let h = span / n_steps as f64;
        let t0 = s.t;
        let mut cur = s.clone();
        for n in 1..=n_steps {
            if cfg.track_support {
                cur.guard.check(&d, cur.t)?;
            }
            let mut next = self.step_with(&cur, &frame, h);
            next.t = if n == n_steps { cfg.t_end } else { t0 + n as f64 * h };
            frame = nonlinear_frame(&mut self.sp, &next.z_plus, &next.z_minus);
            let peak = frame.max_z();
            if !peak.is_finite() || (cap > 0.0 && peak > cap) {
                return Err(Error::BlowupDetected { t: next.t, peak, cap });
            }
            let record = n % cfg.record_every == 0 || n == n_steps;
            for o in observers.iter_mut() {
                if record || o.every_step() {
                    o.observe(&mut self.sp, &next, &frame, Tick { step: n, record })?;
                }
            }
            cur = next;
        }
        if cfg.track_support {
            cur.guard.check(&d, cur.t)?;
        }
        Ok(cur)
    }
}

/// Number of uniform steps `advance` will take for this state and config.
pub fn planned_steps(sp: &mut Spectral, s: &ElsasserState, cfg: &StepperConfig) -> usize {
    let span = (cfg.t_end - s.t).abs();
    if span == 0.0 {
        return 0;
    }
    let (p, m) = s.peaks(sp);
    (span / cfg.effective_dt(&sp.domain, p.max(m))).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral;
    use crate::state::{make_wave_packet, WavePacket};

    fn domain() -> DomainSpec {
        DomainSpec::new([8, 8, 256], [6.0, 6.0, 48.0]).unwrap()
    }

    fn packet(species: Species, x3: f64, amplitude: f64) -> WavePacket {
        WavePacket {
            species,
            center: [3.0, 3.0, x3],
            widths: [1.2, 1.2, 1.0],
            amplitude,
            polarization_seed: 7,
        }
    }

    fn state(sp: &mut Spectral, plus: Option<f64>, minus: Option<f64>, amp: f64) -> ElsasserState {
        let d = sp.domain;
        let mut zp = SpectralVectorField::zeros(d);
        let mut zm = SpectralVectorField::zeros(d);
        if let Some(x) = plus {
            zp = make_wave_packet(sp, &packet(Species::Plus, x, amp), [0.0, 0.0]).unwrap().0;
        }
        if let Some(x) = minus {
            zm = make_wave_packet(sp, &packet(Species::Minus, x, amp), [0.0, 0.0]).unwrap().0;
        }
        ElsasserState::new(sp, 0.0, 0.0, zp, zm).unwrap()
    }

    struct Counter(usize);

    impl Observer for Counter {
        fn observe(&mut self, _: &mut Spectral, _: &ElsasserState, _: &Frame, _: Tick) -> Result<()> {
            self.0 += 1;
            Ok(())
        }
    }

    #[test]
    fn one_sided_rhs_is_pure_transport() {
        let mut sp = Spectral::new(domain());
        let s = state(&mut sp, Some(2.0), None, 0.3);
        let (dp, dm) = compute_rhs(&mut sp, &s);
        let expected = spectral::derivative(&s.z_plus, [0, 0, 1]);
        assert!(dp.sub(&expected).max_coeff() <= 1e-15);
        assert!(dm.is_zero());

        let s = state(&mut sp, None, Some(-2.0), 0.3);
        let (dp, dm) = compute_rhs(&mut sp, &s);
        let expected = spectral::derivative(&s.z_minus, [0, 0, 1]).scaled(-1.0);
        assert!(dm.sub(&expected).max_coeff() <= 1e-15);
        assert!(dp.is_zero());
    }

    #[test]
    fn zero_state_is_fixed() {
        let d = domain();
        let mut solver = Solver::new(d);
        let s = ElsasserState::zero(d);
        let (dp, dm) = compute_rhs(&mut solver.sp, &s);
        assert!(dp.is_zero() && dm.is_zero());
        let out = solver.advance(&s, &StepperConfig::new(0.1, 1.0), &mut []).unwrap();
        assert!(out.z_plus.is_zero() && out.z_minus.is_zero());
        assert_eq!(out.t, 1.0);
    }

    #[test]
    fn rhs_matches_direct_physical_space_evaluation() {
        // oracle: derivatives by spectral differentiation of each component,
        // products in physical space, projection applied afterwards
        let mut sp = Spectral::new(domain());
        let s = state(&mut sp, Some(1.0), Some(-1.0), 0.4);
        let (dp, _) = compute_rhs(&mut sp, &s);
        let zm = sp.inverse(&s.z_minus).unwrap();
        let d = sp.domain;
        let mut adv = RealVectorField::zeros(d);
        for j in 0..3 {
            let mut alpha = [0u32; 3];
            alpha[j] = 1;
            let dz = sp.inverse(&spectral::derivative(&s.z_plus, alpha)).unwrap();
            for i in 0..3 {
                for idx in 0..d.len() {
                    adv.comps[i][idx] += zm.comps[j][idx] * dz.comps[i][idx];
                }
            }
        }
        let adv_hat = spectral::dealias(&sp.transform(&adv).unwrap());
        let mut expected = spectral::leray_project(&adv_hat).scaled(-1.0);
        expected.add_assign(&spectral::derivative(&s.z_plus, [0, 0, 1]));
        assert!(dp.sub(&expected).max_coeff() <= 1e-14, "{}", dp.sub(&expected).max_coeff());
    }

    #[test]
    fn observer_counts() {
        let d = domain();
        let mut solver = Solver::new(d);
        let s = state(&mut solver.sp, Some(0.0), None, 0.1);
        let mut c = Counter(0);
        let out = solver.advance(&s, &StepperConfig::new(0.1, 0.0), &mut [&mut c]).unwrap();
        assert_eq!(c.0, 1);
        assert_eq!(out, s);

        let mut c = Counter(0);
        let cfg = StepperConfig::new(0.1, 1.0);
        let n = planned_steps(&mut solver.sp, &s, &cfg);
        solver.advance(&s, &cfg, &mut [&mut c]).unwrap();
        assert_eq!(c.0, n + 1);
    }

    #[test]
    fn one_sided_transport_is_exact() {
        let d = domain();
        let mut solver = Solver::new(d);
        let s = state(&mut solver.sp, Some(4.0), None, 0.5);
        let out = solver.advance(&s, &StepperConfig::new(0.25, 3.0), &mut []).unwrap();
        let got = solver.sp.inverse(&out.z_plus).unwrap();
        let init = solver.sp.inverse(&s.z_plus).unwrap();
        // z+(T, x3) = z+(0, x3 + T): the grid shift by T = 3 is 16 cells
        let shift = (3.0 / d.spacing(2)).round() as usize;
        let mut err = 0.0f64;
        for idx in 0..d.len() {
            let (i1, i2, i3) = d.unindex(idx);
            let src = d.index(i1, i2, (i3 + shift) % d.n[2]);
            for c in 0..3 {
                err = err.max((got.comps[c][idx] - init.comps[c][src]).abs());
            }
        }
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn forward_backward_recovers_state() {
        let d = domain();
        let mut solver = Solver::new(d);
        let s = state(&mut solver.sp, Some(1.0), Some(-1.0), 0.2);
        let fwd = solver.advance(&s, &StepperConfig::new(0.05, 1.0), &mut []).unwrap();
        let back = solver.advance(&fwd, &StepperConfig::new(0.05, 0.0), &mut []).unwrap();
        let err = back.z_plus.sub(&s.z_plus).max_coeff().max(back.z_minus.sub(&s.z_minus).max_coeff());
        assert!(err <= 1e-8, "{err}");
        assert!(solver.sp.max_divergence(&fwd.z_plus) <= 1e-12);
    }

    #[test]
    fn blowup_is_reported() {
        let d = domain();
        let mut solver = Solver::new(d);
        let s = state(&mut solver.sp, Some(0.5), Some(-0.5), 1.0);
        let mut cfg = StepperConfig::new(0.05, 1.0);
        cfg.blowup_factor = 1.0 + 1e-9;
        let err = solver.advance(&s, &cfg, &mut []).unwrap_err();
        assert!(matches!(err, Error::BlowupDetected { .. }), "{err}");
    }

    #[test]
    fn stepper_config_validation() {
        assert!(StepperConfig::new(0.0, 1.0).validate().is_err());
        let mut c = StepperConfig::new(0.1, 1.0);
        c.cfl = 1.5;
        assert!(c.validate().is_err());
        assert_eq!(Direction::of_span(1.0, 0.0), Direction::Backward);
    }
}
