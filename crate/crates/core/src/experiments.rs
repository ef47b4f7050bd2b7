//! Named experiments: configuration, orchestration and the assertions each
//! run records in its manifest.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{data_norm, DivergenceMonitor, NormRecorder, NormSeries, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Species, WeightParams};
use crate::model1d::{self, RigidityVariant, Scattering1D, Wave1D};
use crate::scattering::{scattering_norm, to_comoving, trace_identity_check, Infinity, ScatteringAccumulator, ScatteringField};
use crate::solver::{Observer, Solver, StepperConfig};
use crate::spectral::{self, Spectral, SpectralVectorField};
use crate::state::{build_state, make_wave_packet, ElsasserState, RandomField, WavePacket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OneSided,
    Collision,
    RigidityForwardBackward,
    RigidityMixed,
    AmplitudeSweep,
    Model1d,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::OneSided,
        ExperimentKind::Collision,
        ExperimentKind::RigidityForwardBackward,
        ExperimentKind::RigidityMixed,
        ExperimentKind::AmplitudeSweep,
        ExperimentKind::Model1d,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::OneSided => "one_sided",
            ExperimentKind::Collision => "collision",
            ExperimentKind::RigidityForwardBackward => "rigidity_forward_backward",
            ExperimentKind::RigidityMixed => "rigidity_mixed",
            ExperimentKind::AmplitudeSweep => "amplitude_sweep",
            ExperimentKind::Model1d => "model1d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperSettings {
    pub dt: f64,
    pub cfl: f64,
    /// `None` picks the support-separation time plus `margin`.
    pub t_end: Option<f64>,
    pub margin: f64,
    pub record_every: usize,
    pub blowup_factor: f64,
}

impl Default for StepperSettings {
    fn default() -> Self {
        Self {
            dt: 0.05,
            cfl: 0.5,
            t_end: None,
            margin: 3.0,
            record_every: 1,
            blowup_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSettings {
    pub k_max: u32,
    /// Window over which the scattering tail is measured, ending at `t_end`.
    pub tail_window: f64,
    /// Rerun at `dt/2` for the trace identity.
    pub refine_check: bool,
    /// Rerun the same configuration and compare scattering norms.
    pub rerun_check: bool,
    /// Separate short runs at `order_dt`, `order_dt/2` against `order_dt/8`.
    pub time_order: bool,
    pub order_dt: f64,
    /// Write field dumps of the initial, final and scattering fields.
    pub dump_fields: bool,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            tail_window: 1.0,
            refine_check: true,
            rerun_check: true,
            time_order: false,
            order_dt: 0.1,
            dump_fields: true,
        }
    }
}

/// Pass thresholds; every assertion compares against one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    pub transport: f64,
    pub pressure: f64,
    pub scattering_data: f64,
    pub saturation: f64,
    pub drift: f64,
    pub divergence: f64,
    pub bound: f64,
    pub decay_bound: f64,
    pub trace: f64,
    pub trace_gain: f64,
    pub tail: f64,
    pub reproducibility: f64,
    pub order_gain: f64,
    pub recovery: f64,
    pub linearity: f64,
    pub exponent: f64,
    pub linear_limit: f64,
    pub doubling_band: f64,
    pub model1d_exact: f64,
    pub model1d_analytic: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            transport: 1e-10,
            pressure: 1e-12,
            scattering_data: 1e-10,
            saturation: 1e-8,
            drift: 1e-8,
            divergence: 1e-12,
            bound: 4.0,
            decay_bound: 4.0,
            trace: 1e-6,
            trace_gain: 4.0,
            tail: 1e-10,
            reproducibility: 1e-9,
            order_gain: 12.0,
            recovery: 1e-8,
            linearity: 0.2,
            exponent: 0.2,
            linear_limit: 1e-10,
            doubling_band: 0.5,
            model1d_exact: 1e-14,
            model1d_analytic: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Amplitude factors for the rigidity probes.
    pub lambdas: Vec<f64>,
    /// Amplitude factor grids for the amplitude sweep.
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 0.5, 0.25],
            plus: vec![1.0, 2.0],
            minus: vec![0.0, 1.0, 2.0],
        }
    }
}

/// `amplitude * exp(-((x - center) / width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Gaussian1D {
    pub fn value(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.width;
        self.amplitude * (-y * y).exp()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        -2.0 * (x - self.center) / (self.width * self.width) * self.value(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model1dSettings {
    pub x_min: f64,
    pub length: f64,
    pub n: usize,
    pub phi0: Gaussian1D,
    pub phi1: Gaussian1D,
    /// Times at which reconstructed solutions are sampled.
    pub times: Vec<f64>,
    /// The trace check runs at `trace_steps` grid spacings.
    pub trace_steps: usize,
}

impl Default for Model1dSettings {
    fn default() -> Self {
        Self {
            x_min: -20.0,
            length: 40.0,
            n: 512,
            phi0: Gaussian1D {
                amplitude: 1.0,
                center: 0.0,
                width: 1.0,
            },
            phi1: Gaussian1D {
                amplitude: 0.0,
                center: 0.0,
                width: 1.0,
            },
            times: vec![0.0, 1.0, 4.0],
            trace_steps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    /// Offset added to every random-field seed and nonzero polarization seed.
    pub seed: u64,
    pub domain: DomainSpec,
    pub weights: WeightParams,
    pub packets: Vec<WavePacket>,
    pub random: Vec<RandomField>,
    pub stepper: StepperSettings,
    pub diagnostics: DiagnosticsSettings,
    pub checks: Checks,
    pub sweep: SweepSettings,
    pub model1d: Model1dSettings,
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, domain: DomainSpec) -> Self {
        Self {
            kind,
            name: kind.label().to_string(),
            seed: 0,
            domain,
            weights: WeightParams::default(),
            packets: Vec::new(),
            random: Vec::new(),
            stepper: StepperSettings::default(),
            diagnostics: DiagnosticsSettings::default(),
            checks: Checks::default(),
            sweep: SweepSettings::default(),
            model1d: Model1dSettings::default(),
            output_dir: None,
        }
    }

    /// Range problems, all of them.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let st = &self.stepper;
        if !(st.dt.is_finite() && st.dt > 0.0) {
            out.push(format!("stepper.dt = {} must be positive", st.dt));
        }
        if !(st.cfl > 0.0 && st.cfl <= 1.0) {
            out.push(format!("stepper.cfl = {} must lie in (0, 1]", st.cfl));
        }
        if !(st.margin.is_finite() && st.margin >= 0.0) {
            out.push(format!("stepper.margin = {} must be non-negative", st.margin));
        }
        if st.t_end.is_some_and(|t| !t.is_finite() || t == 0.0) {
            out.push("stepper.t_end must be finite and nonzero".into());
        }
        if st.record_every == 0 {
            out.push("stepper.record_every must be at least 1".into());
        }
        if !(st.blowup_factor > 1.0) {
            out.push(format!("stepper.blowup_factor = {} must exceed 1", st.blowup_factor));
        }
        if !(self.weights.delta > 0.0 && self.weights.delta < 2.0 / 3.0) {
            out.push(format!("weights.delta = {} must lie in (0, 2/3)", self.weights.delta));
        }
        if !(self.diagnostics.tail_window > 0.0) {
            out.push("diagnostics.tail_window must be positive".into());
        }
        if !(self.diagnostics.order_dt > 0.0) {
            out.push("diagnostics.order_dt must be positive".into());
        }
        for (i, p) in self.packets.iter().enumerate() {
            if p.widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                out.push(format!("packets[{i}].widths {:?} must be positive", p.widths));
            }
            if !(p.amplitude.is_finite() && p.amplitude >= 0.0) {
                out.push(format!("packets[{i}].amplitude = {} must be non-negative", p.amplitude));
            }
        }
        for (i, r) in self.random.iter().enumerate() {
            if !(r.rms.is_finite() && r.rms >= 0.0) {
                out.push(format!("random[{i}].rms = {} must be non-negative", r.rms));
            }
        }
        for (key, list) in [
            ("sweep.lambdas", &self.sweep.lambdas),
            ("sweep.plus", &self.sweep.plus),
            ("sweep.minus", &self.sweep.minus),
        ] {
            if list.is_empty() || list.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                out.push(format!("{key} must be a non-empty list of non-negative factors"));
            }
        }
        let m = &self.model1d;
        if m.n < 8 || !(m.length > 0.0) {
            out.push("model1d needs n >= 8 and a positive length".into());
        }
        if m.phi0.width <= 0.0 || m.phi1.width <= 0.0 {
            out.push("model1d profile widths must be positive".into());
        }
        let needs_data = !matches!(self.kind, ExperimentKind::Model1d);
        if needs_data && self.packets.is_empty() && self.random.is_empty() {
            out.push("at least one [[packets]] or [[random]] entry is required".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Seeds actually used, after the offset.
    pub fn effective_seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self
            .packets
            .iter()
            .filter(|p| p.polarization_seed != 0)
            .map(|p| p.polarization_seed.wrapping_add(self.seed))
            .collect();
        seeds.extend(self.random.iter().map(|r| r.seed.wrapping_add(self.seed)));
        seeds
    }

    /// Packets and random fields with the seed offset applied and the
    /// amplitudes of each species scaled.
    pub fn scaled_data(&self, plus: f64, minus: f64) -> (Vec<WavePacket>, Vec<RandomField>) {
        let factor = |s: Species| if s == Species::Plus { plus } else { minus };
        let packets = self
            .packets
            .iter()
            .map(|p| WavePacket {
                amplitude: p.amplitude * factor(p.species),
                polarization_seed: if p.polarization_seed == 0 {
                    0
                } else {
                    p.polarization_seed.wrapping_add(self.seed)
                },
                ..p.clone()
            })
            .collect();
        let random = self
            .random
            .iter()
            .map(|r| RandomField {
                rms: r.rms * factor(r.species),
                seed: r.seed.wrapping_add(self.seed),
                ..r.clone()
            })
            .collect();
        (packets, random)
    }
}

/// One recorded check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    #[serde(with = "finite_or_tag")]
    pub value: f64,
    #[serde(with = "finite_or_tag")]
    pub threshold: f64,
    pub detail: String,
}

impl Assertion {
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// `|value - target| <= tol`; the threshold field stores `tol`.
    pub fn near(name: &str, value: f64, target: f64, tol: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: (value - target).abs() <= tol,
            value,
            threshold: tol,
            detail: format!("target {target}; {}", detail.into()),
        }
    }
}

/// JSON has no infinities or NaN: those travel as `"inf"`, `"-inf"`, `"nan"`.
pub mod finite_or_tag {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Tag("nan".into())
        } else if v > 0.0 {
            Repr::Tag("inf".into())
        } else {
            Repr::Tag("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("expected a number, \"inf\", \"-inf\" or \"nan\", got {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod map {
        use std::collections::BTreeMap;

        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        use super::{from_repr, to_repr, Repr};

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            m.iter().map(|(k, v)| (k, to_repr(*v))).collect::<BTreeMap<_, _>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            BTreeMap::<String, Repr>::deserialize(d)?
                .into_iter()
                .map(|(k, r)| from_repr(r).map(|v| (k, v)))
                .collect()
        }
    }
}

/// Per-point values of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    #[serde(with = "finite_or_tag::map")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub wall_clock_s: f64,
    pub k_max: u32,
    pub t_end: Option<f64>,
    pub steps: usize,
    pub assertions: Vec<Assertion>,
    #[serde(with = "finite_or_tag::map")]
    pub constants: BTreeMap<String, f64>,
    pub sweep: Vec<SweepPoint>,
    pub files: Vec<String>,
    pub passed: bool,
}

impl RunManifest {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            name: cfg.name.clone(),
            kind: cfg.kind,
            config: cfg.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: cfg.effective_seeds(),
            wall_clock_s: 0.0,
            k_max: cfg.diagnostics.k_max,
            t_end: None,
            steps: 0,
            assertions: Vec::new(),
            constants: BTreeMap::new(),
            sweep: Vec::new(),
            files: Vec::new(),
            passed: false,
        }
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn failures(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }

    fn push(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    fn constant(&mut self, key: &str, v: f64) {
        self.constants.insert(key.to_string(), v);
    }
}

/// A spectral field kept for dumping.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub species: Option<Species>,
    pub t: f64,
    pub a: f64,
    pub coeffs: SpectralVectorField,
}

/// Column table written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Everything a run produces; the io layer decides file names.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    /// The first series becomes `norms.csv`.
    pub series: Vec<(String, NormSeries)>,
    pub scattering: Vec<ScatteringField>,
    pub snapshots: Vec<Snapshot>,
    pub tables: Vec<Table>,
}

impl RunOutput {
    fn new(manifest: RunManifest) -> Self {
        Self {
            manifest,
            series: Vec::new(),
            scattering: Vec::new(),
            snapshots: Vec::new(),
            tables: Vec::new(),
        }
    }
}

/// Runs the configured experiment; assertion failures are recorded, not
/// returned as errors.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = match cfg.kind {
        ExperimentKind::OneSided => run_one_sided(cfg),
        ExperimentKind::Collision => run_collision(cfg),
        ExperimentKind::RigidityForwardBackward => run_rigidity_forward_backward(cfg),
        ExperimentKind::RigidityMixed => run_rigidity_mixed(cfg),
        ExperimentKind::AmplitudeSweep => run_amplitude_sweep(cfg),
        ExperimentKind::Model1d => run_model1d(cfg),
    }?;
    out.manifest.wall_clock_s = start.elapsed().as_secs_f64();
    out.manifest.passed = out.manifest.assertions.iter().all(|a| a.passed);
    Ok(out)
}

/// Time at which the packet centers pass each other, from the supports.
fn crossing_time(s: &ElsasserState) -> Option<f64> {
    let (p, m) = (s.guard.plus?, s.guard.minus?);
    Some(s.guard.t0 + 0.25 * ((p.lo + p.hi) - (m.lo + m.hi)))
}

struct Prepared {
    solver: Solver,
    state: ElsasserState,
    t_end: f64,
    t_sep: Option<f64>,
}

/// Builds the initial state at `t = 0` and fixes the end time. With
/// `both_ways` the margin check covers `[-T, T]` and the automatic end time
/// waits for separation in both directions.
fn plan_span(cfg: &ExperimentConfig, probe: &ElsasserState, t_end: Option<f64>, both_ways: bool) -> Result<(f64, Option<f64>, [f64; 2])> {
    let t_sep = if both_ways {
        probe
            .guard
            .separation_time(1.0)
            .zip(probe.guard.separation_time(-1.0))
            .map(|(f, b)| f.max(-b))
    } else {
        probe.guard.separation_time(1.0)
    };
    let t_end = match t_end.or(cfg.stepper.t_end) {
        Some(t) => t,
        None => match t_sep {
            Some(t) => t + cfg.stepper.margin,
            None => {
                return Err(Error::Config(vec![
                    "stepper.t_end is required when the data has no crossing pair of packets".into(),
                ]))
            }
        },
    };
    let span = if both_ways { [-t_end.abs(), t_end.abs()] } else { [0.0, t_end] };
    Ok((t_end, t_sep, span))
}

fn prepare(cfg: &ExperimentConfig, lambda_plus: f64, lambda_minus: f64, t_end: Option<f64>, both_ways: bool) -> Result<Prepared> {
    let mut solver = Solver::new(cfg.domain);
    let (packets, random) = cfg.scaled_data(lambda_plus, lambda_minus);
    let a = cfg.weights.a;
    let probe = build_state(&mut solver.sp, 0.0, a, &packets, &random, [0.0, 0.0])?;
    let (t_end, t_sep, span) = plan_span(cfg, &probe, t_end, both_ways)?;
    let state = build_state(&mut solver.sp, 0.0, a, &packets, &random, span)?;
    Ok(Prepared {
        solver,
        state,
        t_end,
        t_sep,
    })
}

/// Checks that every packet stays inside the box over the planned run and
/// names the first one that does not.
pub fn check_margins(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.kind == ExperimentKind::Model1d {
        return Ok(());
    }
    let both_ways = cfg.kind == ExperimentKind::RigidityMixed;
    let mut sp = Spectral::new(cfg.domain);
    let (packets, random) = cfg.scaled_data(1.0, 1.0);
    let probe = match build_state(&mut sp, 0.0, cfg.weights.a, &packets, &random, [0.0, 0.0]) {
        Ok(p) => p,
        Err(Error::MarginViolation(_)) => ElsasserState::zero(cfg.domain),
        Err(e) => return Err(e),
    };
    let span = match plan_span(cfg, &probe, None, both_ways) {
        Ok((_, _, span)) => span,
        Err(_) => [0.0, 0.0],
    };
    for (i, p) in packets.iter().enumerate() {
        match make_wave_packet(&mut sp, p, span) {
            Err(Error::MarginViolation(m)) => return Err(Error::MarginViolation(format!("packets[{i}]: {m}"))),
            Err(e) => return Err(e),
            Ok(_) => {}
        }
    }
    Ok(())
}

fn stepper(cfg: &ExperimentConfig, t_end: f64) -> StepperConfig {
    StepperConfig {
        dt: cfg.stepper.dt,
        cfl: cfg.stepper.cfl,
        t_end,
        record_every: cfg.stepper.record_every,
        blowup_factor: cfg.stepper.blowup_factor,
        track_support: true,
    }
}

fn steps_for(solver: &mut Solver, s: &ElsasserState, sc: &StepperConfig) -> usize {
    crate::solver::planned_steps(&mut solver.sp, s, sc)
}

fn max_physical_diff(sp: &mut Spectral, a: &SpectralVectorField, b: &SpectralVectorField) -> Result<f64> {
    Ok(sp.inverse(&a.sub(b))?.max_magnitude())
}

fn state_diff(sp: &mut Spectral, a: &ElsasserState, b: &ElsasserState) -> Result<f64> {
    Ok(max_physical_diff(sp, &a.z_plus, &b.z_plus)?.max(max_physical_diff(sp, &a.z_minus, &b.z_minus)?))
}

fn snapshot(name: &str, s: &ElsasserState, species: Species) -> Snapshot {
    Snapshot {
        name: name.to_string(),
        species: Some(species),
        t: s.t,
        a: s.a,
        coeffs: s.field(species).clone(),
    }
}

fn state_snapshots(out: &mut RunOutput, cfg: &ExperimentConfig, label: &str, s: &ElsasserState) {
    if cfg.diagnostics.dump_fields {
        for species in [Species::Plus, Species::Minus] {
            out.snapshots.push(snapshot(&format!("z_{}_{label}", species.label()), s, species));
        }
    }
}

/// Weighted scattering norms `Σ_{|β|=k}` for `k = 0..=k_max`.
pub fn scattering_norms(sp: &mut Spectral, f: &ScatteringField, k_max: u32, w: &WeightParams) -> Result<Vec<f64>> {
    (0..=k_max).map(|k| scattering_norm(sp, &f.coeffs, f.species, k, w)).collect()
}

/// Least-squares slope of `ln y` against `ln x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `max/min - 1` over positive values.
fn spread(values: &[f64]) -> f64 {
    let pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.is_empty() {
        return 0.0;
    }
    let max = pos.iter().copied().fold(f64::MIN, f64::max);
    let min = pos.iter().copied().fold(f64::MAX, f64::min);
    max / min - 1.0
}

fn run_one_sided(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(RunManifest::new(cfg));
    let mut prep = prepare(cfg, 1.0, 1.0, None, false)?;
    let s0 = prep.state.clone();
    let t_end = prep.t_end;
    let zero_plus = s0.z_plus.is_zero();
    let zero_minus = s0.z_minus.is_zero();
    if !zero_plus && !zero_minus {
        return Err(Error::Config(vec!["one_sided needs one species identically zero".into()]));
    }
    let species = if zero_plus { Species::Minus } else { Species::Plus };
    let w = cfg.weights;
    let sc = stepper(cfg, t_end);
    out.manifest.steps = steps_for(&mut prep.solver, &s0, &sc);
    out.manifest.t_end = Some(t_end);

    let mut rec = NormRecorder::new(&cfg.domain, 0.0, w, cfg.diagnostics.k_max);
    let infinity = if t_end > 0.0 { Infinity::Future } else { Infinity::Past };
    let mut acc = ScatteringAccumulator::new(cfg.domain, infinity, w);
    let mut div = DivergenceMonitor::default();
    let sp_final = {
        let mut obs: [&mut dyn Observer; 3] = [&mut rec, &mut acc, &mut div];
        prep.solver.advance(&s0, &sc, &mut obs)?
    };
    let sp = &mut prep.solver.sp;

    // exact solution: rigid shift along x3 at the species speed
    let exact = spectral::shift_x3(s0.field(species), -species.transport_speed() * t_end);
    let transport_err = max_physical_diff(sp, sp_final.field(species), &exact)?;
    let other_err = sp.inverse(sp_final.field(species.opposite()))?.max_magnitude();
    let c = &cfg.checks;
    out.manifest.push(Assertion::at_most(
        "one_sided.transport_error",
        transport_err.max(other_err),
        c.transport,
        format!("max|z - z0(x3 - c t)| at t = {t_end}"),
    ));
    let grad_p = rec
        .series
        .samples
        .iter()
        .map(|s| s.p1_ratio / (1.0 + (s.t + w.a).abs()).powf(w.omega))
        .fold(0.0, f64::max);
    out.manifest.push(Assertion::at_most("one_sided.pressure_gradient", grad_p, c.pressure, "max_t max|∇p|"));

    let fields = acc.finalize(None, sp)?;
    let field = fields.iter().find(|f| f.species == species).expect("both species finalized");
    // both the integral formula and the comoving trace of the solver state
    let trace = to_comoving(sp_final.field(species), species, t_end);
    let base = scattering_norm(sp, s0.field(species), species, 0, &w)?;
    let mut rel = 0.0f64;
    for f in [&field.coeffs, &trace] {
        let diff = scattering_norm(sp, &f.sub(s0.field(species)), species, 0, &w)?;
        rel = rel.max(if base > 0.0 { (diff / base).sqrt() } else { diff.sqrt() });
    }
    out.manifest.push(Assertion::at_most(
        "one_sided.scattering_equals_data",
        rel,
        c.scattering_data,
        "relative weighted L2 distance between the scattering field and the initial data",
    ));

    // surfaces that sweep the whole packet and stay in the window
    let e0 = rec.series.samples.first().map(|s| if species == Species::Plus { s.e_plus } else { s.e_minus }).unwrap_or(0.0);
    let flux = if species == Species::Plus { &rec.flux_plus } else { &rec.flux_minus };
    let target = e0 / std::f64::consts::SQRT_2;
    let half = cfg.domain.x3_half_width();
    let speed = species.transport_speed();
    let mut worst = 0.0f64;
    let mut swept = 0usize;
    if let Some(sup) = s0.guard.support_at(species, 0.0) {
        for (j, &u) in flux.lattice.iter().enumerate() {
            let end = u - speed * t_end;
            if end < -half || end >= half {
                continue;
            }
            let (lo_t, hi_t) = (sup.lo + speed * t_end, sup.hi + speed * t_end);
            let full = (u < sup.lo && end > hi_t) || (u > sup.hi && end < lo_t);
            if full {
                swept += 1;
                worst = worst.max((flux.values[j] - target).abs() / target);
            }
        }
        out.manifest.push(Assertion {
            name: "one_sided.flux_saturation".into(),
            passed: swept > 0 && worst <= c.saturation,
            value: worst,
            threshold: c.saturation,
            detail: format!("max relative gap |F(u) - E(0)/√2| over {swept} fully swept surfaces"),
        });
    } else {
        out.manifest.push(Assertion::at_most("one_sided.flux_saturation", 0.0, c.saturation, "zero data"));
    }
    out.manifest.push(Assertion::at_most("one_sided.divergence", div.max_div, c.divergence, "max|div z| over all steps"));
    out.manifest.constant("transport_error", transport_err);
    out.manifest.constant("flux_saturation_gap", worst);
    out.manifest.constant("t_end", t_end);

    state_snapshots(&mut out, cfg, "initial", &s0);
    state_snapshots(&mut out, cfg, "final", &sp_final);
    out.series.push(("norms".into(), rec.series));
    out.scattering.extend(fields);
    Ok(out)
}

struct CollisionLeg {
    final_state: ElsasserState,
    acc: ScatteringAccumulator,
    steps: usize,
}

/// Forward run with only the scattering accumulator attached.
fn scattering_run(cfg: &ExperimentConfig, prep: &mut Prepared, dt: f64, watch_after: Option<f64>) -> Result<CollisionLeg> {
    let mut sc = stepper(cfg, prep.t_end);
    sc.dt = dt;
    let mut acc = ScatteringAccumulator::new(cfg.domain, Infinity::Future, cfg.weights);
    if let Some(t) = watch_after {
        acc.watch_integrand_after(t);
    }
    let steps = steps_for(&mut prep.solver, &prep.state, &sc);
    let final_state = {
        let mut obs: [&mut dyn Observer; 1] = [&mut acc];
        prep.solver.advance(&prep.state, &sc, &mut obs)?
    };
    Ok(CollisionLeg { final_state, acc, steps })
}

fn run_collision(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(RunManifest::new(cfg));
    let mut prep = prepare(cfg, 1.0, 1.0, None, false)?;
    let s0 = prep.state.clone();
    let t_end = prep.t_end;
    let w = cfg.weights;
    let c = cfg.checks.clone();
    let k_max = cfg.diagnostics.k_max;
    let sc = stepper(cfg, t_end);
    out.manifest.steps = steps_for(&mut prep.solver, &s0, &sc);
    out.manifest.t_end = Some(t_end);
    let tail_start = t_end - cfg.diagnostics.tail_window;

    let mut rec = NormRecorder::new(&cfg.domain, 0.0, w, k_max);
    let mut acc = ScatteringAccumulator::new(cfg.domain, Infinity::Future, w);
    acc.watch_integrand_after(tail_start);
    let mut div = DivergenceMonitor::default();
    let s_end = {
        let mut obs: [&mut dyn Observer; 3] = [&mut rec, &mut acc, &mut div];
        prep.solver.advance(&s0, &sc, &mut obs)?
    };
    let series = rec.series.clone();

    out.manifest.push(Assertion::at_most("collision.energy_drift", series.max_energy_drift(), c.drift, "max_t |E(t) - E(0)| / E(0)"));
    out.manifest.push(Assertion::at_most(
        "collision.cross_helicity_drift",
        series.max_cross_helicity_drift(),
        c.drift,
        "max_t |H(t) - H(0)| / E(0)",
    ));
    out.manifest.push(Assertion::at_most("collision.divergence", div.max_div, c.divergence, format!("max|div z| over {} levels", div.steps)));

    let c_meas = series.boundedness_constant();
    out.manifest.constant("C_meas", c_meas);
    out.manifest.push(Assertion::at_most(
        "collision.boundedness",
        c_meas,
        c.bound,
        format!("sup_t [E + F + Σ_(k<={k_max}) E^k] / initial"),
    ));

    let t_cross = crossing_time(&s0).unwrap_or(0.0).max(0.0);
    out.manifest.constant("t_cross", t_cross);
    type Pick = fn(&crate::diagnostics::NormSample) -> f64;
    let ratios: [(&str, Pick); 3] = [
        ("separation", |s| s.sep_ratio),
        ("pressure_gradient", |s| s.p1_ratio),
        ("pressure_hessian", |s| s.p2_ratio),
    ];
    for (label, pick) in ratios {
        let early = series.max_over(0.0, t_cross, pick);
        let sup = series.sup_of(pick);
        let r = if early > 0.0 { sup / early } else { 0.0 };
        out.manifest.constant(&format!("{label}_early_max"), early);
        out.manifest.constant(&format!("{label}_sup"), sup);
        out.manifest.push(Assertion::at_most(
            &format!("collision.{label}_decay"),
            r,
            c.decay_bound,
            format!("sup_t ratio / max over [0, {t_cross:.3}]"),
        ));
    }

    let gap = trace_identity_check(&mut prep.solver.sp, &acc, &s_end)?;
    out.manifest.constant("trace_gap", gap);
    out.manifest.push(Assertion::at_most("collision.trace_identity", gap, c.trace, "max|accumulated field - comoving trace at T|"));
    let dt_eff = sc.effective_dt(&cfg.domain, s0.peak(&mut prep.solver.sp));
    if cfg.diagnostics.refine_check {
        let fine = scattering_run(cfg, &mut prep, 0.5 * dt_eff, None)?;
        let gap_fine = trace_identity_check(&mut prep.solver.sp, &fine.acc, &fine.final_state)?;
        let gain = if gap_fine > 0.0 { gap / gap_fine } else { f64::INFINITY };
        out.manifest.constant("trace_gap_half_dt", gap_fine);
        out.manifest.push(Assertion::at_least("collision.trace_refinement", gain, c.trace_gain, format!("gap(dt) / gap(dt/2), {} fine steps", fine.steps)));
    }

    let sp = &mut prep.solver.sp;
    let tail = acc.convergence_tail(sp, cfg.diagnostics.tail_window)?;
    out.manifest.constant("tail", tail);
    out.manifest.constant("late_integrand", acc.late_integrand());
    if let Some(t) = prep.t_sep {
        out.manifest.constant("t_sep", t);
    }
    out.manifest.push(Assertion::at_most(
        "collision.scattering_tail",
        tail,
        c.tail,
        format!("weighted L2 change of the scattering fields over [{tail_start:.3}, {t_end:.3}]"),
    ));

    let fields = acc.finalize(Some(cfg.diagnostics.tail_window), sp)?;
    let mut norms = Vec::new();
    for f in &fields {
        let v = scattering_norms(sp, f, k_max, &w)?;
        for (k, x) in v.iter().enumerate() {
            out.manifest.constant(&format!("scattering_{}_k{k}", f.species.label()), *x);
        }
        norms.push(v);
    }
    let finite = norms.iter().flatten().all(|v| v.is_finite());
    out.manifest.push(Assertion {
        name: "collision.scattering_norms_finite".into(),
        passed: finite,
        value: norms.iter().flatten().copied().fold(0.0, f64::max),
        threshold: f64::INFINITY,
        detail: format!("weighted L2 norms of the scattering fields, orders 0..={k_max}"),
    });
    if cfg.diagnostics.rerun_check {
        let again = scattering_run(cfg, &mut prep, cfg.stepper.dt, None)?;
        let sp = &mut prep.solver.sp;
        let fields2 = again.acc.finalize(None, sp)?;
        let mut worst = 0.0f64;
        for (f, first) in fields2.iter().zip(&norms) {
            let v = scattering_norms(sp, f, k_max, &w)?;
            for (a, b) in v.iter().zip(first) {
                let scale = b.abs().max(f64::MIN_POSITIVE);
                worst = worst.max((a - b).abs() / scale);
            }
        }
        out.manifest.push(Assertion::at_most(
            "collision.scattering_reproducible",
            worst,
            c.reproducibility,
            "max relative change of the scattering norms on rerun",
        ));
    }

    if cfg.diagnostics.time_order {
        let (e1, e2) = time_order_study(cfg, &s0, t_cross.max(cfg.diagnostics.order_dt))?;
        let gain = if e2 > 0.0 { e1 / e2 } else { f64::INFINITY };
        out.manifest.constant("order_error_dt", e1);
        out.manifest.constant("order_error_half_dt", e2);
        out.manifest.push(Assertion::at_least(
            "collision.time_order",
            gain,
            c.order_gain,
            format!("error(dt) / error(dt/2) against dt/8, dt = {}", cfg.diagnostics.order_dt),
        ));
    }

    state_snapshots(&mut out, cfg, "initial", &s0);
    state_snapshots(&mut out, cfg, "final", &s_end);
    out.manifest.constant("t_end", t_end);
    out.series.push(("norms".into(), series));
    out.scattering.extend(fields);
    Ok(out)
}

/// Errors at `dt` and `dt/2` against a `dt/8` reference over `[0, t]`, with
/// the step cap relaxed to `cfl = 1`.
pub fn time_order_study(cfg: &ExperimentConfig, s0: &ElsasserState, t: f64) -> Result<(f64, f64)> {
    let mut solver = Solver::new(cfg.domain);
    let dt = cfg.diagnostics.order_dt;
    let mut at = |h: f64| -> Result<ElsasserState> {
        let mut sc = stepper(cfg, t);
        sc.dt = h;
        sc.cfl = 1.0;
        sc.record_every = usize::MAX;
        solver.advance(s0, &sc, &mut [])
    };
    let reference = at(dt / 8.0)?;
    let coarse = at(dt)?;
    let half = at(dt / 2.0)?;
    let sp = &mut solver.sp;
    Ok((state_diff(sp, &coarse, &reference)?, state_diff(sp, &half, &reference)?))
}

/// Weighted data norms of both species, `(plus, minus)`.
fn data_norms(sp: &mut Spectral, s: &ElsasserState, k_max: u32, w: &WeightParams) -> Result<(f64, f64)> {
    Ok((data_norm(sp, s, Species::Plus, k_max, w)?, data_norm(sp, s, Species::Minus, k_max, w)?))
}

/// Outcome of one leg: run from `Σ_0` to `Σ_T`, re-pose there with `a = T`,
/// and run back to the original slice.
struct Leg {
    /// Data norms at `Σ_T` under the shifted weights.
    at_t: (f64, f64),
    /// Data norms of the recovered state under the original weights.
    recovered: (f64, f64),
    recovery_error: f64,
    steps: usize,
    sigma_t: ElsasserState,
}

fn round_trip(cfg: &ExperimentConfig, prep: &mut Prepared, t: f64) -> Result<Leg> {
    let w = cfg.weights;
    let k_max = cfg.diagnostics.k_max;
    let s0 = prep.state.clone();
    let out_cfg = stepper(cfg, t);
    let mut steps = steps_for(&mut prep.solver, &s0, &out_cfg);
    let s_t = prep.solver.advance(&s0, &out_cfg, &mut [])?;
    let reposed = s_t.reposed(0.0, s0.a + t);
    let at_t = data_norms(&mut prep.solver.sp, &reposed, k_max, &w)?;
    let back_cfg = stepper(cfg, -t);
    steps += steps_for(&mut prep.solver, &reposed, &back_cfg);
    let back = prep.solver.advance(&reposed, &back_cfg, &mut [])?;
    let recovered = data_norms(&mut prep.solver.sp, &back, k_max, &w)?;
    let recovery_error = state_diff(&mut prep.solver.sp, &back, &s0)?;
    Ok(Leg {
        at_t,
        recovered,
        recovery_error,
        steps,
        sigma_t: reposed,
    })
}

fn run_rigidity_forward_backward(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(RunManifest::new(cfg));
    let c = cfg.checks.clone();
    let t_end = prepare(cfg, 1.0, 1.0, None, false)?.t_end;
    out.manifest.t_end = Some(t_end);
    let w = cfg.weights;
    let mut ratios = Vec::new();
    let mut pairs = Vec::new();
    for &lam in &cfg.sweep.lambdas {
        let mut prep = prepare(cfg, lam, lam, Some(t_end), false)?;
        let original = data_norms(&mut prep.solver.sp, &prep.state, cfg.diagnostics.k_max, &w)?;
        let leg = round_trip(cfg, &mut prep, t_end)?;
        out.manifest.steps += leg.steps;
        let eps = leg.at_t.0 + leg.at_t.1;
        let rec = leg.recovered.0 + leg.recovered.1;
        let mut values = BTreeMap::new();
        values.insert("data_norm_T".into(), eps);
        values.insert("data_norm_recovered".into(), rec);
        values.insert("data_norm_original".into(), original.0 + original.1);
        values.insert("recovery_error".into(), leg.recovery_error);
        out.manifest.sweep.push(SweepPoint {
            lambda_plus: lam,
            lambda_minus: lam,
            values,
        });
        out.manifest.push(Assertion::at_most(
            &format!("rigidity_forward_backward.recovery[{lam}]"),
            leg.recovery_error,
            c.recovery,
            "max|z(recovered) - z(0)| after forward to T and back from the re-posed slice",
        ));
        if lam == 0.0 {
            out.manifest.push(Assertion::at_most(
                "rigidity_forward_backward.zero_data",
                eps.max(rec),
                0.0,
                "all norms vanish for zero data",
            ));
        } else {
            ratios.push(rec / eps);
            pairs.push((eps, rec));
        }
        if lam == 1.0 {
            state_snapshots(&mut out, cfg, "initial", &prep.state);
            state_snapshots(&mut out, cfg, "sigma_t", &leg.sigma_t);
        }
    }
    let s = spread(&ratios);
    out.manifest.constant("C_rig", ratios.iter().copied().fold(0.0, f64::max));
    out.manifest.constant("linearity_spread", s);
    out.manifest.push(Assertion::at_most(
        "rigidity_forward_backward.linearity",
        s,
        c.linearity,
        "max/min - 1 of recovered data norm / Σ_T data norm across amplitudes",
    ));
    let slope = loglog_slope(&pairs).unwrap_or(f64::NAN);
    out.manifest.constant("transfer_exponent", slope);
    out.manifest.push(Assertion::near(
        "rigidity_forward_backward.exponent",
        slope,
        1.0,
        c.exponent,
        "log-log slope of recovered data norm against Σ_T data norm",
    ));
    Ok(out)
}

fn run_rigidity_mixed(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(RunManifest::new(cfg));
    let c = cfg.checks.clone();
    let t_end = prepare(cfg, 1.0, 1.0, None, true)?.t_end.abs();
    out.manifest.t_end = Some(t_end);
    let mut points = vec![(1.0, 1.0)];
    for &lam in &cfg.sweep.lambdas {
        if lam != 1.0 {
            points.push((1.0, lam));
            points.push((lam, 1.0));
        }
    }
    let mut c_values = Vec::new();
    let mut minus_pairs = Vec::new();
    let mut plus_pairs = Vec::new();
    for (lp, lm) in points {
        let mut prep = prepare(cfg, lp, lm, Some(t_end), true)?;
        // z- is small at Σ_{+T}; z+ at Σ_{-T}
        let future = round_trip(cfg, &mut prep, t_end)?;
        let past = round_trip(cfg, &mut prep, -t_end)?;
        out.manifest.steps += future.steps + past.steps;
        let eps_minus = future.at_t.1;
        let eps_plus = past.at_t.0;
        let e_minus = future.recovered.1;
        let e_plus = past.recovered.0;
        let denom = eps_plus + eps_minus;
        let c_mix = if denom > 0.0 { (e_plus + e_minus) / denom } else { 0.0 };
        let mut values = BTreeMap::new();
        values.insert("eps_plus_sq".into(), eps_plus);
        values.insert("eps_minus_sq".into(), eps_minus);
        values.insert("data_norm_plus_recovered".into(), e_plus);
        values.insert("data_norm_minus_recovered".into(), e_minus);
        values.insert("C".into(), c_mix);
        values.insert("recovery_error_future".into(), future.recovery_error);
        values.insert("recovery_error_past".into(), past.recovery_error);
        out.manifest.sweep.push(SweepPoint {
            lambda_plus: lp,
            lambda_minus: lm,
            values,
        });
        if denom > 0.0 {
            c_values.push(c_mix);
        }
        if lp == 1.0 {
            minus_pairs.push((eps_minus, e_minus));
        }
        if lm == 1.0 {
            plus_pairs.push((eps_plus, e_plus));
        }
        if (lp, lm) == (1.0, 1.0) {
            out.manifest.constant("C_mixed", c_mix);
            state_snapshots(&mut out, cfg, "initial", &prep.state);
            state_snapshots(&mut out, cfg, "sigma_plus_t", &future.sigma_t);
            state_snapshots(&mut out, cfg, "sigma_minus_t", &past.sigma_t);
        }
    }
    let s = spread(&c_values);
    out.manifest.constant("C_spread", s);
    out.manifest.push(Assertion::at_most(
        "rigidity_mixed.constant_stability",
        s,
        c.linearity,
        "max/min - 1 of C = E(0) / (eps+^2 + eps-^2) across the sweep",
    ));
    for (label, pairs) in [("minus", &minus_pairs), ("plus", &plus_pairs)] {
        let slope = loglog_slope(pairs).unwrap_or(f64::NAN);
        out.manifest.constant(&format!("exponent_{label}"), slope);
        out.manifest.push(Assertion::near(
            &format!("rigidity_mixed.exponent_{label}"),
            slope,
            1.0,
            c.exponent,
            format!("log-log slope of the recovered z{label} data norm against its smallness at the far slice"),
        ));
    }
    Ok(out)
}

fn run_amplitude_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(RunManifest::new(cfg));
    let c = cfg.checks.clone();
    let t_end = prepare(cfg, 1.0, 1.0, None, false)?.t_end;
    out.manifest.t_end = Some(t_end);
    let w = cfg.weights;
    // (lp, lm) -> (E+(0), ΔE+/E+(0), E-(0), ΔE-/E-(0))
    let mut table: Vec<((f64, f64), [f64; 4])> = Vec::new();
    for &lp in &cfg.sweep.plus {
        for &lm in &cfg.sweep.minus {
            let mut prep = prepare(cfg, lp, lm, Some(t_end), false)?;
            let sc = stepper(cfg, t_end);
            out.manifest.steps += steps_for(&mut prep.solver, &prep.state, &sc);
            let mut rec = NormRecorder::new(&cfg.domain, 0.0, w, 0);
            {
                let mut obs: [&mut dyn Observer; 1] = [&mut rec];
                prep.solver.advance(&prep.state, &sc, &mut obs)?;
            }
            let first = rec.series.samples[0].clone();
            let rel = |e0: f64, d: f64| if e0 > 0.0 { d / e0 } else { 0.0 };
            let dp = rec.series.sup_of(|s| (s.e_plus - first.e_plus).abs());
            let dm = rec.series.sup_of(|s| (s.e_minus - first.e_minus).abs());
            let row = [first.e_plus, rel(first.e_plus, dp), first.e_minus, rel(first.e_minus, dm)];
            let mut values = BTreeMap::new();
            for (k, v) in ["E_plus_0", "dE_plus_rel", "E_minus_0", "dE_minus_rel"].iter().zip(row) {
                values.insert(k.to_string(), v);
            }
            out.manifest.sweep.push(SweepPoint {
                lambda_plus: lp,
                lambda_minus: lm,
                values,
            });
            table.push(((lp, lm), row));
        }
    }
    let find = |lp: f64, lm: f64| table.iter().find(|(k, _)| *k == (lp, lm)).map(|(_, v)| *v);
    for &((lp, lm), row) in &table {
        if lm == 0.0 && lp > 0.0 {
            out.manifest.push(Assertion::at_most(
                &format!("amplitude_sweep.linear_limit[{lp}]"),
                row[1],
                c.linear_limit,
                "ΔE+/E+(0) with z- absent",
            ));
        }
        if lm > 0.0 && lp > 0.0 {
            if let Some(doubled) = find(lp, 2.0 * lm) {
                let r = doubled[1] / row[1];
                out.manifest.push(Assertion::near(
                    &format!("amplitude_sweep.cross_doubling[{lp},{lm}]"),
                    r,
                    2.0,
                    2.0 * c.doubling_band,
                    "growth of ΔE+/E+(0) when ε- doubles",
                ));
            }
        }
        if lp > 0.0 {
            if let Some(doubled) = find(2.0 * lp, lm) {
                let r = doubled[0] / row[0];
                out.manifest.push(Assertion::near(
                    &format!("amplitude_sweep.self_doubling[{lp},{lm}]"),
                    r,
                    4.0,
                    4.0 * 1e-10,
                    "growth of E+(0) when ε+ doubles",
                ));
            }
        }
    }
    for &lp in &cfg.sweep.plus {
        let pts: Vec<(f64, f64)> = table.iter().filter(|(k, _)| k.0 == lp).map(|(k, v)| (k.1, v[1])).collect();
        if let Some(s) = loglog_slope(&pts) {
            out.manifest.constant(&format!("cross_exponent[{lp}]"), s);
        }
    }
    Ok(out)
}

/// Analytic `(L̄φ, Lφ)` at `t = 0` for Gaussian data.
fn analytic_null_derivatives(m: &Model1dSettings, x: f64) -> (f64, f64) {
    let (d0, v1) = (m.phi0.derivative(x), m.phi1.value(x));
    (v1 - d0, v1 + d0)
}

fn run_model1d(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(RunManifest::new(cfg));
    let m = &cfg.model1d;
    let c = &cfg.checks;
    let w = Wave1D::from_fn(m.x_min, m.length, m.n, |x| m.phi0.value(x), |x| m.phi1.value(x))?;
    let s = model1d::scattering_1d(&w);
    let xs = w.grid();

    let analytic = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let (lbar, l) = analytic_null_derivatives(m, x);
            (s.lbar_future[j] - lbar).abs().max((s.l_future[j] - l).abs())
        })
        .fold(0.0, f64::max);
    out.manifest.push(Assertion::at_most("model1d.analytic_scattering", analytic, c.model1d_analytic, "max gap to the differentiated Gaussian"));

    let t_trace = m.trace_steps as f64 * w.spacing();
    let (lbar_t, l_t) = model1d::traces_at(&w, t_trace)?;
    let trace = (0..w.len())
        .map(|j| (lbar_t[j] - s.lbar_future[j]).abs().max((l_t[j] - s.l_future[j]).abs()))
        .fold(0.0, f64::max);
    out.manifest.push(Assertion::at_most(
        "model1d.trace_exactness",
        trace,
        c.model1d_exact,
        format!("null derivatives along characteristics at t = {t_trace} vs scattering fields"),
    ));

    let zero = vec![0.0; w.len()];
    let zero_fields = Scattering1D {
        lbar_future: zero.clone(),
        l_future: zero.clone(),
        lbar_past: zero.clone(),
        l_past: zero.clone(),
    };
    for (variant, label) in [(RigidityVariant::Future, "future"), (RigidityVariant::Mixed, "mixed")] {
        let r = model1d::rigidity_check_1d(&zero_fields, variant, m.x_min, m.length, &m.times, c.model1d_exact)?;
        out.manifest.push(Assertion {
            name: format!("model1d.rigidity_{label}"),
            passed: r.fields_vanish && r.reconstructed_max <= c.model1d_exact,
            value: r.reconstructed_max,
            threshold: c.model1d_exact,
            detail: "vanishing scattering fields reconstruct φ ≡ 0".into(),
        });
        let d = model1d::rigidity_check_1d(&s, variant, m.x_min, m.length, &m.times, c.model1d_exact)?;
        let data_zero = w.phi0.iter().chain(&w.phi1).all(|v| *v == 0.0);
        out.manifest.push(Assertion {
            name: format!("model1d.rigidity_{label}_detects_data"),
            passed: d.fields_vanish == data_zero,
            value: d.reconstructed_max,
            threshold: c.model1d_exact,
            detail: "the check reports nonvanishing fields for nonzero data".into(),
        });
    }
    // the mixed variant over the four vanishing patterns of (L̄(+∞), L(-∞))
    let mut matched = 0;
    for (lbar_zero, l_zero) in [(false, false), (true, false), (false, true), (true, true)] {
        let fields = Scattering1D {
            lbar_future: if lbar_zero { zero.clone() } else { s.lbar_future.clone() },
            l_future: s.l_future.clone(),
            lbar_past: s.lbar_past.clone(),
            l_past: if l_zero { zero.clone() } else { s.l_past.clone() },
        };
        let r = model1d::rigidity_check_1d(&fields, RigidityVariant::Mixed, m.x_min, m.length, &m.times, c.model1d_exact)?;
        let vanishes = |f: &[f64]| f.iter().all(|v| v.abs() <= c.model1d_exact);
        let expected = vanishes(&fields.lbar_future) && vanishes(&fields.l_past);
        if r.fields_vanish == expected && (!expected || r.reconstructed_max <= c.model1d_exact) {
            matched += 1;
        }
    }
    out.manifest.push(Assertion::at_least("model1d.mixed_sign_cases", matched as f64, 4.0, "cases where the verdict matches vanishing of both fields"));

    let t_sample = m.times.last().copied().unwrap_or(0.0);
    let phi_t = model1d::dalembert_evolve(&w, t_sample);
    let (dp, dm) = (w.dphi_plus(), w.dphi_minus());
    out.tables.push(Table {
        file: "model1d.csv".into(),
        header: ["x", "phi0", "phi1", "dphi_plus", "dphi_minus", "lbar_future", "l_future", "lbar_past", "l_past", "phi_t"]
            .map(String::from)
            .to_vec(),
        rows: (0..w.len())
            .map(|j| {
                vec![xs[j], w.phi0[j], w.phi1[j], dp[j], dm[j], s.lbar_future[j], s.l_future[j], s.lbar_past[j], s.l_past[j], phi_t[j]]
            })
            .collect(),
    });
    out.manifest.constant("analytic_gap", analytic);
    out.manifest.constant("trace_gap", trace);
    out.manifest.constant("phi_t_time", t_sample);
    Ok(out)
}
