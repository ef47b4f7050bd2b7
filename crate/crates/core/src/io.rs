//! Configuration parsing and the on-disk formats: `norms.csv`, field dumps,
//! scattering sidecars and `manifest.json`. Every file is written to a
//! temporary sibling and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::diagnostics::{instantaneous_sample, NormSeries};
use crate::error::{Error, Result};
use crate::experiments::{
    self, Checks, DiagnosticsSettings, ExperimentConfig, ExperimentKind, Gaussian1D, Model1dSettings, RunManifest,
    RunOutput, StepperSettings, SweepSettings, Table as CsvTable,
};
use crate::grid::{DomainSpec, Species, WeightParams};
use crate::scattering::{scattering_weight_profile, Infinity, ScatteringField};
use crate::spectral::{RealVectorField, Spectral, SpectralVectorField};
use crate::state::{ElsasserState, RandomField, WavePacket, DIV_TOLERANCE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const NORMS_FILE: &str = "norms.csv";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

/// JSON Schema (draft 2020-12) of `manifest.json`.
pub const MANIFEST_SCHEMA: &str = include_str!("../schema/manifest.schema.json");

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- config

/// Collects every problem instead of stopping at the first.
struct Reader {
    errors: Vec<String>,
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl Reader {
    fn missing(&mut self, key: &str) {
        self.errors.push(format!("missing key: {key}"));
    }

    fn bad_type(&mut self, key: &str, want: &str) {
        self.errors.push(format!("wrong type: {key} must be {want}"));
    }

    fn check_keys(&mut self, t: &Table, section: &str, known: &[&str]) {
        for k in t.keys() {
            if !known.contains(&k.as_str()) {
                self.errors.push(format!("unknown key: {section}.{k}"));
            }
        }
    }

    fn table<'a>(&mut self, root: &'a Table, name: &str, required: bool) -> Option<&'a Table> {
        match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.bad_type(name, "a table");
                None
            }
            None => {
                if required {
                    self.missing(&format!("[{name}]"));
                }
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let v = t.get(key)?;
        let out = as_f64(v);
        if out.is_none() {
            self.bad_type(&format!("{section}.{key}"), "a number");
        }
        out
    }

    fn req_f64(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.missing(&format!("{section}.{key}"));
        }
        self.f64(t, section, key)
    }

    fn uint(&mut self, t: &Table, section: &str, key: &str) -> Option<u64> {
        match t.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.bad_type(&format!("{section}.{key}"), "a non-negative integer");
                None
            }
        }
    }

    fn bool(&mut self, t: &Table, section: &str, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.bad_type(&format!("{section}.{key}"), "a boolean");
                None
            }
        }
    }

    fn string(&mut self, t: &Table, section: &str, key: &str) -> Option<String> {
        match t.get(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.bad_type(&format!("{section}.{key}"), "a string");
                None
            }
        }
    }

    fn f64_list(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        let parsed = match t.get(key)? {
            Value::Array(a) => a.iter().map(as_f64).collect::<Option<Vec<f64>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.bad_type(&format!("{section}.{key}"), "an array of numbers");
        }
        parsed
    }

    fn f64_triple(&mut self, t: &Table, section: &str, key: &str) -> Option<[f64; 3]> {
        let v = self.f64_list(t, section, key)?;
        match <[f64; 3]>::try_from(v) {
            Ok(a) => Some(a),
            Err(_) => {
                self.bad_type(&format!("{section}.{key}"), "an array of three numbers");
                None
            }
        }
    }

    fn species(&mut self, t: &Table, section: &str) -> Option<Species> {
        let key = format!("{section}.species");
        match t.get("species") {
            None => {
                self.missing(&key);
                None
            }
            Some(Value::String(s)) if s == "plus" => Some(Species::Plus),
            Some(Value::String(s)) if s == "minus" => Some(Species::Minus),
            Some(_) => {
                self.bad_type(&key, "\"plus\" or \"minus\"");
                None
            }
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

const STEPPER_KEYS: [&str; 6] = ["dt", "cfl", "t_end", "margin", "record_every", "blowup_factor"];
const DIAGNOSTICS_KEYS: [&str; 7] = ["k_max", "tail_window", "refine_check", "rerun_check", "time_order", "order_dt", "dump_fields"];
const CHECK_KEYS: [&str; 20] = [
    "transport",
    "pressure",
    "scattering_data",
    "saturation",
    "drift",
    "divergence",
    "bound",
    "decay_bound",
    "trace",
    "trace_gain",
    "tail",
    "reproducibility",
    "order_gain",
    "recovery",
    "linearity",
    "exponent",
    "linear_limit",
    "doubling_band",
    "model1d_exact",
    "model1d_analytic",
];

fn checks_field<'a>(c: &'a mut Checks, key: &str) -> &'a mut f64 {
    match key {
        "transport" => &mut c.transport,
        "pressure" => &mut c.pressure,
        "scattering_data" => &mut c.scattering_data,
        "saturation" => &mut c.saturation,
        "drift" => &mut c.drift,
        "divergence" => &mut c.divergence,
        "bound" => &mut c.bound,
        "decay_bound" => &mut c.decay_bound,
        "trace" => &mut c.trace,
        "trace_gain" => &mut c.trace_gain,
        "tail" => &mut c.tail,
        "reproducibility" => &mut c.reproducibility,
        "order_gain" => &mut c.order_gain,
        "recovery" => &mut c.recovery,
        "linearity" => &mut c.linearity,
        "exponent" => &mut c.exponent,
        "linear_limit" => &mut c.linear_limit,
        "doubling_band" => &mut c.doubling_band,
        "model1d_exact" => &mut c.model1d_exact,
        "model1d_analytic" => &mut c.model1d_analytic,
        _ => unreachable!("key list and fields agree"),
    }
}

fn read_gaussian(r: &mut Reader, t: &Table, section: &str, g: &mut Gaussian1D) {
    r.check_keys(t, section, &["amplitude", "center", "width"]);
    set(&mut g.amplitude, r.f64(t, section, "amplitude"));
    set(&mut g.center, r.f64(t, section, "center"));
    set(&mut g.width, r.f64(t, section, "width"));
}

/// Parses a configuration document without touching the filesystem.
///
/// Structural problems (missing keys, wrong types, unknown keys, ranges) are
/// reported together as [`Error::Config`]; once those are clean, packets
/// that cannot travel the planned distance inside the box raise
/// [`Error::MarginViolation`].
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader { errors: Vec::new() };
    r.check_keys(
        &root,
        "",
        &["experiment", "domain", "weights", "stepper", "diagnostics", "checks", "sweep", "model1d", "output", "packets", "random"],
    );

    let mut kind = None;
    let mut name = None;
    let mut seed = 0;
    if let Some(t) = r.table(&root, "experiment", true) {
        r.check_keys(t, "experiment", &["kind", "name", "seed"]);
        match r.string(t, "experiment", "kind") {
            Some(s) => match ExperimentKind::parse(&s) {
                Some(k) => kind = Some(k),
                None => r.errors.push(format!(
                    "out of range: experiment.kind = {s:?} is not one of {}",
                    ExperimentKind::ALL.map(|k| k.label()).join(", ")
                )),
            },
            None if !t.contains_key("kind") => r.missing("experiment.kind"),
            None => {}
        }
        name = r.string(t, "experiment", "name");
        set(&mut seed, r.uint(t, "experiment", "seed"));
    }
    let is_1d = kind == Some(ExperimentKind::Model1d);

    // the 1D model ignores the 3D grid, so it gets a placeholder
    let mut domain = DomainSpec::new([8, 8, 8], [1.0, 1.0, 1.0]).expect("valid placeholder");
    match r.table(&root, "domain", !is_1d) {
        Some(t) => {
            r.check_keys(t, "domain", &["n", "l", "max_wrap"]);
            let n = match t.get("n") {
                Some(Value::Array(a)) if a.len() == 3 => {
                    let v: Option<Vec<usize>> = a.iter().map(|x| x.as_integer().filter(|i| *i > 0).map(|i| i as usize)).collect();
                    if v.is_none() {
                        r.bad_type("domain.n", "three positive integers");
                    }
                    v
                }
                Some(_) => {
                    r.bad_type("domain.n", "three positive integers");
                    None
                }
                None => {
                    r.missing("domain.n");
                    None
                }
            };
            let l = if t.contains_key("l") {
                r.f64_triple(t, "domain", "l")
            } else {
                r.missing("domain.l");
                None
            };
            if let (Some(n), Some(l)) = (n, l) {
                match DomainSpec::new([n[0], n[1], n[2]], l) {
                    Ok(d) => domain = d,
                    Err(e) => r.errors.push(format!("out of range: {e}")),
                }
            }
            if let Some(w) = r.uint(t, "domain", "max_wrap") {
                domain.max_wrap = w as i32;
            }
        }
        None => {}
    }

    let mut weights = WeightParams::default();
    if let Some(t) = r.table(&root, "weights", false) {
        r.check_keys(t, "weights", &["delta", "a"]);
        let delta = r.f64(t, "weights", "delta").unwrap_or(weights.delta);
        let a = r.f64(t, "weights", "a").unwrap_or(0.0);
        weights = WeightParams {
            a,
            delta,
            omega: 1.0 + delta,
        };
    }

    let mut stepper = StepperSettings::default();
    match r.table(&root, "stepper", !is_1d) {
        Some(t) => {
            r.check_keys(t, "stepper", &STEPPER_KEYS);
            if is_1d {
                set(&mut stepper.dt, r.f64(t, "stepper", "dt"));
            } else {
                set(&mut stepper.dt, r.req_f64(t, "stepper", "dt"));
            }
            set(&mut stepper.cfl, r.f64(t, "stepper", "cfl"));
            stepper.t_end = r.f64(t, "stepper", "t_end");
            set(&mut stepper.margin, r.f64(t, "stepper", "margin"));
            set(&mut stepper.record_every, r.uint(t, "stepper", "record_every").map(|v| v as usize));
            set(&mut stepper.blowup_factor, r.f64(t, "stepper", "blowup_factor"));
        }
        None => {}
    }

    let mut diagnostics = DiagnosticsSettings::default();
    if let Some(t) = r.table(&root, "diagnostics", false) {
        r.check_keys(t, "diagnostics", &DIAGNOSTICS_KEYS);
        set(&mut diagnostics.k_max, r.uint(t, "diagnostics", "k_max").map(|v| v as u32));
        set(&mut diagnostics.tail_window, r.f64(t, "diagnostics", "tail_window"));
        set(&mut diagnostics.refine_check, r.bool(t, "diagnostics", "refine_check"));
        set(&mut diagnostics.rerun_check, r.bool(t, "diagnostics", "rerun_check"));
        set(&mut diagnostics.time_order, r.bool(t, "diagnostics", "time_order"));
        set(&mut diagnostics.order_dt, r.f64(t, "diagnostics", "order_dt"));
        set(&mut diagnostics.dump_fields, r.bool(t, "diagnostics", "dump_fields"));
    }

    let mut checks = Checks::default();
    if let Some(t) = r.table(&root, "checks", false) {
        r.check_keys(t, "checks", &CHECK_KEYS);
        for key in CHECK_KEYS {
            if let Some(v) = r.f64(t, "checks", key) {
                *checks_field(&mut checks, key) = v;
            }
        }
    }

    let mut sweep = SweepSettings::default();
    if let Some(t) = r.table(&root, "sweep", false) {
        r.check_keys(t, "sweep", &["lambdas", "plus", "minus"]);
        set(&mut sweep.lambdas, r.f64_list(t, "sweep", "lambdas"));
        set(&mut sweep.plus, r.f64_list(t, "sweep", "plus"));
        set(&mut sweep.minus, r.f64_list(t, "sweep", "minus"));
    }

    let mut model1d = Model1dSettings::default();
    if let Some(t) = r.table(&root, "model1d", false) {
        r.check_keys(t, "model1d", &["x_min", "length", "n", "phi0", "phi1", "times", "trace_steps"]);
        set(&mut model1d.x_min, r.f64(t, "model1d", "x_min"));
        set(&mut model1d.length, r.f64(t, "model1d", "length"));
        set(&mut model1d.n, r.uint(t, "model1d", "n").map(|v| v as usize));
        set(&mut model1d.times, r.f64_list(t, "model1d", "times"));
        set(&mut model1d.trace_steps, r.uint(t, "model1d", "trace_steps").map(|v| v as usize));
        if let Some(p) = r.table(t, "phi0", false) {
            read_gaussian(&mut r, p, "model1d.phi0", &mut model1d.phi0);
        }
        if let Some(p) = r.table(t, "phi1", false) {
            read_gaussian(&mut r, p, "model1d.phi1", &mut model1d.phi1);
        }
    }

    let mut output_dir = None;
    if let Some(t) = r.table(&root, "output", false) {
        r.check_keys(t, "output", &["dir"]);
        output_dir = r.string(t, "output", "dir");
    }

    let mut packets = Vec::new();
    let mut random = Vec::new();
    for (key, is_packet) in [("packets", true), ("random", false)] {
        let Some(v) = root.get(key) else { continue };
        let Some(items) = v.as_array() else {
            r.bad_type(key, "an array of tables ([[...]])");
            continue;
        };
        for (i, item) in items.iter().enumerate() {
            let section = format!("{key}[{i}]");
            let Some(t) = item.as_table() else {
                r.bad_type(&section, "a table");
                continue;
            };
            let species = r.species(t, &section);
            if is_packet {
                r.check_keys(t, &section, &["species", "center", "widths", "amplitude", "polarization_seed"]);
                let center = if t.contains_key("center") { r.f64_triple(t, &section, "center") } else { None };
                if !t.contains_key("center") {
                    r.missing(&format!("{section}.center"));
                }
                let widths = if t.contains_key("widths") { r.f64_triple(t, &section, "widths") } else { None };
                if !t.contains_key("widths") {
                    r.missing(&format!("{section}.widths"));
                }
                let amplitude = r.req_f64(t, &section, "amplitude");
                let polarization_seed = r.uint(t, &section, "polarization_seed").unwrap_or(0);
                if let (Some(species), Some(center), Some(widths), Some(amplitude)) = (species, center, widths, amplitude) {
                    packets.push(WavePacket {
                        species,
                        center,
                        widths,
                        amplitude,
                        polarization_seed,
                    });
                }
            } else {
                r.check_keys(t, &section, &["species", "slope", "seed", "rms"]);
                let slope = r.req_f64(t, &section, "slope");
                let rms = r.req_f64(t, &section, "rms");
                let s = r.uint(t, &section, "seed").unwrap_or(0);
                if let (Some(species), Some(slope), Some(rms)) = (species, slope, rms) {
                    random.push(RandomField { species, slope, seed: s, rms });
                }
            }
        }
    }

    let Some(kind) = kind else {
        return Err(Error::Config(r.errors));
    };
    let cfg = ExperimentConfig {
        kind,
        name: name.unwrap_or_else(|| kind.label().to_string()),
        seed,
        domain,
        weights,
        packets,
        random,
        stepper,
        diagnostics,
        checks,
        sweep,
        model1d,
        output_dir,
    };
    r.errors.extend(cfg.problems().into_iter().map(|p| format!("out of range: {p}")));
    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    if !is_1d {
        experiments::check_margins(&cfg)?;
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Renders a configuration in the input format; parsing the result gives
/// the same configuration back.
pub fn config_to_toml(cfg: &ExperimentConfig) -> String {
    let mut root = Table::new();
    let mut exp = Table::new();
    exp.insert("kind".into(), cfg.kind.label().into());
    exp.insert("name".into(), cfg.name.clone().into());
    exp.insert("seed".into(), Value::Integer(cfg.seed as i64));
    root.insert("experiment".into(), exp.into());
    let mut domain = Table::new();
    domain.insert("n".into(), Value::Array(cfg.domain.n.iter().map(|&n| Value::Integer(n as i64)).collect()));
    domain.insert("l".into(), Value::Array(cfg.domain.l.iter().map(|&l| l.into()).collect()));
    domain.insert("max_wrap".into(), Value::Integer(cfg.domain.max_wrap as i64));
    root.insert("domain".into(), domain.into());
    let mut weights = Table::new();
    weights.insert("delta".into(), cfg.weights.delta.into());
    weights.insert("a".into(), cfg.weights.a.into());
    root.insert("weights".into(), weights.into());
    let section = |v: &dyn erased::Ser| v.to_value();
    root.insert("stepper".into(), section(&cfg.stepper));
    root.insert("diagnostics".into(), section(&cfg.diagnostics));
    root.insert("checks".into(), section(&cfg.checks));
    root.insert("sweep".into(), section(&cfg.sweep));
    root.insert("model1d".into(), section(&cfg.model1d));
    if let Some(dir) = &cfg.output_dir {
        let mut out = Table::new();
        out.insert("dir".into(), dir.clone().into());
        root.insert("output".into(), out.into());
    }
    let packets: Vec<Value> = cfg
        .packets
        .iter()
        .map(|p| {
            let mut t = Table::new();
            t.insert("species".into(), p.species.label().into());
            t.insert("center".into(), Value::Array(p.center.iter().map(|&x| x.into()).collect()));
            t.insert("widths".into(), Value::Array(p.widths.iter().map(|&x| x.into()).collect()));
            t.insert("amplitude".into(), p.amplitude.into());
            t.insert("polarization_seed".into(), Value::Integer(p.polarization_seed as i64));
            Value::Table(t)
        })
        .collect();
    if !packets.is_empty() {
        root.insert("packets".into(), Value::Array(packets));
    }
    let random: Vec<Value> = cfg
        .random
        .iter()
        .map(|f| {
            let mut t = Table::new();
            t.insert("species".into(), f.species.label().into());
            t.insert("slope".into(), f.slope.into());
            t.insert("seed".into(), Value::Integer(f.seed as i64));
            t.insert("rms".into(), f.rms.into());
            Value::Table(t)
        })
        .collect();
    if !random.is_empty() {
        root.insert("random".into(), Value::Array(random));
    }
    toml::to_string(&root).expect("config tables serialize")
}

mod erased {
    use serde::Serialize;
    use toml::Value;

    pub trait Ser {
        fn to_value(&self) -> Value;
    }

    impl<T: Serialize> Ser for T {
        fn to_value(&self) -> Value {
            Value::try_from(self).expect("settings serialize to TOML")
        }
    }
}

// ---------------------------------------------------------------- norms.csv

pub const NORMS_HEADER_HEAD: [&str; 3] = ["t", "E_plus", "E_minus"];
pub const NORMS_HEADER_TAIL: [&str; 7] = ["F_plus", "F_minus", "energy", "cross_helicity", "sep_ratio", "p1_ratio", "p2_ratio"];

/// `t,E_plus,E_minus,E0_plus,E0_minus,...,F_plus,F_minus,energy,...`.
pub fn norms_header(k_max: u32) -> Vec<String> {
    let mut h: Vec<String> = NORMS_HEADER_HEAD.iter().map(|s| s.to_string()).collect();
    for k in 0..=k_max {
        h.push(format!("E{k}_plus"));
        h.push(format!("E{k}_minus"));
    }
    h.extend(NORMS_HEADER_TAIL.iter().map(|s| s.to_string()));
    h
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e),
    };
    w.write_record(header).map_err(fail)?;
    for row in rows {
        // `{:e}` round-trips f64 exactly and keeps the files compact
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    })
}

pub fn write_norms_csv(path: &Path, series: &NormSeries) -> Result<()> {
    let rows = series.samples.iter().map(|s| {
        let mut r = vec![s.t, s.e_plus, s.e_minus];
        for k in 0..=series.k_max as usize {
            r.push(s.ek_plus.get(k).copied().unwrap_or(f64::NAN));
            r.push(s.ek_minus.get(k).copied().unwrap_or(f64::NAN));
        }
        r.extend([s.f_plus, s.f_minus, s.energy, s.cross_helicity, s.sep_ratio, s.p1_ratio, s.p2_ratio]);
        r
    });
    write_atomic(path, &csv_bytes(&norms_header(series.k_max), rows)?)
}

pub fn write_table_csv(path: &Path, table: &CsvTable) -> Result<()> {
    write_atomic(path, &csv_bytes(&table.header, table.rows.iter().cloned())?)
}

/// Reads any numeric CSV written here: `(header, rows)`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::io(path, std::io::Error::other(e)))?);
    }
    Ok((header, rows))
}

// ---------------------------------------------------------------- field dumps

pub const DUMP_MAGIC: &[u8; 5] = b"ALFV1";
pub const DUMP_HEADER_LEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpKind {
    Physical,
    Spectral,
}

/// A vector field on disk: 128-byte header, then little-endian `f64`
/// samples in `x1`-major order with the three components concatenated
/// (interleaved real and imaginary parts for the spectral kind).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub domain: DomainSpec,
    pub t: f64,
    pub a: f64,
    pub species: Option<Species>,
    pub coeffs: SpectralVectorField,
}

fn species_byte(s: Option<Species>) -> u8 {
    match s {
        Some(Species::Plus) => 0,
        Some(Species::Minus) => 1,
        None => 2,
    }
}

pub fn encode_dump(sp: &mut Spectral, dump: &FieldDump, kind: DumpKind) -> Result<Vec<u8>> {
    let d = dump.domain;
    let mut out = vec![0u8; DUMP_HEADER_LEN];
    out[..5].copy_from_slice(DUMP_MAGIC);
    out[5] = 1;
    out[6] = species_byte(dump.species);
    out[7] = match kind {
        DumpKind::Physical => 0,
        DumpKind::Spectral => 1,
    };
    for i in 0..3 {
        out[8 + 4 * i..12 + 4 * i].copy_from_slice(&(d.n[i] as u32).to_le_bytes());
        out[20 + 8 * i..28 + 8 * i].copy_from_slice(&d.l[i].to_le_bytes());
    }
    out[44..52].copy_from_slice(&dump.t.to_le_bytes());
    out[52..60].copy_from_slice(&dump.a.to_le_bytes());
    match kind {
        DumpKind::Physical => {
            let f = sp.inverse(&dump.coeffs)?;
            out.reserve(3 * d.len() * 8);
            for c in &f.comps {
                for v in c {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        DumpKind::Spectral => {
            out.reserve(6 * d.len() * 8);
            for c in &dump.coeffs.comps {
                for v in c {
                    out.extend_from_slice(&v.re.to_le_bytes());
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn write_field_dump(path: &Path, sp: &mut Spectral, dump: &FieldDump, kind: DumpKind) -> Result<()> {
    write_atomic(path, &encode_dump(sp, dump, kind)?)
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("eight bytes"))
}

/// Decoded dump plus the raw physical samples when the dump stored them.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDump {
    pub dump: FieldDump,
    pub kind: DumpKind,
    pub physical: Option<RealVectorField>,
}

/// Parses a dump and re-validates that the field is solenoidal.
pub fn decode_dump(path: &Path, bytes: &[u8]) -> Result<LoadedDump> {
    let bad = |reason: String| Error::Dump {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < DUMP_HEADER_LEN || &bytes[..5] != DUMP_MAGIC {
        return Err(bad("missing ALFV1 header".into()));
    }
    if bytes[5] != 1 {
        return Err(bad(format!("unsupported endianness flag {}", bytes[5])));
    }
    let species = match bytes[6] {
        0 => Some(Species::Plus),
        1 => Some(Species::Minus),
        2 => None,
        b => return Err(bad(format!("unknown species byte {b}"))),
    };
    let kind = match bytes[7] {
        0 => DumpKind::Physical,
        1 => DumpKind::Spectral,
        b => return Err(bad(format!("unknown kind byte {b}"))),
    };
    let n: Vec<usize> = (0..3)
        .map(|i| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("four bytes")) as usize)
        .collect();
    let l = [f64_at(bytes, 20), f64_at(bytes, 28), f64_at(bytes, 36)];
    let domain = DomainSpec::new([n[0], n[1], n[2]], l).map_err(|e| bad(e.to_string()))?;
    let t = f64_at(bytes, 44);
    let a = f64_at(bytes, 52);
    let per = if kind == DumpKind::Physical { 1 } else { 2 };
    let expected = DUMP_HEADER_LEN + 3 * per * domain.len() * 8;
    if bytes.len() != expected {
        return Err(bad(format!("payload is {} bytes, expected {}", bytes.len() - DUMP_HEADER_LEN, expected - DUMP_HEADER_LEN)));
    }
    let payload = &bytes[DUMP_HEADER_LEN..];
    let mut sp = Spectral::new(domain);
    let (coeffs, physical) = match kind {
        DumpKind::Physical => {
            let mut f = RealVectorField::zeros(domain);
            for (c, comp) in f.comps.iter_mut().enumerate() {
                for (i, v) in comp.iter_mut().enumerate() {
                    *v = f64_at(payload, 8 * (c * domain.len() + i));
                }
            }
            (sp.transform(&f)?, Some(f))
        }
        DumpKind::Spectral => {
            let mut f = SpectralVectorField::zeros(domain);
            for (c, comp) in f.comps.iter_mut().enumerate() {
                for (i, v) in comp.iter_mut().enumerate() {
                    let at = 16 * (c * domain.len() + i);
                    *v = num_complex::Complex64::new(f64_at(payload, at), f64_at(payload, at + 8));
                }
            }
            (f, None)
        }
    };
    let div = sp.max_divergence(&coeffs);
    if !(div <= DIV_TOLERANCE) {
        return Err(bad(format!("field is not solenoidal: max|div| = {div:.3e}")));
    }
    Ok(LoadedDump {
        dump: FieldDump {
            domain,
            t,
            a,
            species,
            coeffs,
        },
        kind,
        physical,
    })
}

pub fn read_field_dump(path: &Path) -> Result<LoadedDump> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dump(path, &bytes)
}

// ---------------------------------------------------------------- sidecars

/// JSON companion of a scattering dump, readable without the binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSidecar {
    pub species: Species,
    pub infinity: Infinity,
    pub t_end: f64,
    pub tail: Option<f64>,
    pub weights: WeightParams,
    /// Weighted L2 norms, orders `0..=k_max`.
    pub norms: Vec<f64>,
    /// Lattice coordinate `u∓` of each `x3` slab.
    pub lattice: Vec<f64>,
    /// `∫ |field|^2 dx1 dx2` per slab.
    pub slab_mass: Vec<f64>,
    /// Scattering weight `<u>^{2ω}` per slab.
    pub weight: Vec<f64>,
    pub dump: String,
}

pub fn scattering_sidecar(sp: &mut Spectral, f: &ScatteringField, k_max: u32, w: &WeightParams, dump: &str) -> Result<ScatteringSidecar> {
    let d = f.domain();
    let values = f.values(sp)?;
    let n3 = d.n[2];
    let order: Vec<usize> = (n3 / 2..n3).chain(0..n3 / 2).collect();
    let mut slab = vec![0.0; n3];
    for idx in 0..d.len() {
        slab[idx % n3] += values.magnitude_at(idx).powi(2);
    }
    let area = d.spacing(0) * d.spacing(1);
    let weight = scattering_weight_profile(&d, f.species, w);
    Ok(ScatteringSidecar {
        species: f.species,
        infinity: f.infinity,
        t_end: f.t_end,
        tail: f.tail,
        weights: *w,
        norms: experiments::scattering_norms(sp, f, k_max, w)?,
        lattice: order.iter().map(|&i| d.centered_coord(2, i)).collect(),
        slab_mass: order.iter().map(|&i| slab[i] * area).collect(),
        weight: order.iter().map(|&i| weight[i]).collect(),
        dump: dump.to_string(),
    })
}

fn json_bytes<T: Serialize>(path: &Path, v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    write_atomic(path, &json_bytes(path, m)?)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    read_json(path)
}

/// Writes every artifact of a run under `dir`, the manifest last.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<RunManifest> {
    let mut manifest = out.manifest.clone();
    let mut files = Vec::new();
    let cfg = &manifest.config;
    let k_max = cfg.diagnostics.k_max;
    let w = cfg.weights;

    write_atomic(&dir.join(CONFIG_ECHO_FILE), config_to_toml(cfg).as_bytes())?;
    files.push(CONFIG_ECHO_FILE.to_string());
    for (i, (label, series)) in out.series.iter().enumerate() {
        let name = if i == 0 { NORMS_FILE.to_string() } else { format!("norms_{label}.csv") };
        write_norms_csv(&dir.join(&name), series)?;
        files.push(name);
    }
    if out.series.is_empty() && cfg.kind != ExperimentKind::Model1d {
        write_norms_csv(&dir.join(NORMS_FILE), &NormSeries { k_max, samples: Vec::new() })?;
        files.push(NORMS_FILE.to_string());
    }
    for t in &out.tables {
        write_table_csv(&dir.join(&t.file), t)?;
        files.push(t.file.clone());
    }
    if !out.snapshots.is_empty() || !out.scattering.is_empty() {
        let mut sp = Spectral::new(cfg.domain);
        for s in &out.snapshots {
            let name = format!("fields/{}.bin", s.name);
            let dump = FieldDump {
                domain: s.coeffs.domain,
                t: s.t,
                a: s.a,
                species: s.species,
                coeffs: s.coeffs.clone(),
            };
            write_field_dump(&dir.join(&name), &mut sp, &dump, DumpKind::Physical)?;
            files.push(name);
        }
        for f in &out.scattering {
            let stem = format!("scattering/{}_{}", f.species.label(), f.infinity.label());
            let bin = format!("{stem}.bin");
            let dump = FieldDump {
                domain: f.domain(),
                t: f.t_end,
                a: w.a,
                species: Some(f.species),
                coeffs: f.coeffs.clone(),
            };
            write_field_dump(&dir.join(&bin), &mut sp, &dump, DumpKind::Physical)?;
            let side = scattering_sidecar(&mut sp, f, k_max, &w, &bin)?;
            let json = format!("{stem}.json");
            write_atomic(&dir.join(&json), &json_bytes(&dir.join(&json), &side)?)?;
            files.push(bin);
            files.push(json);
        }
    }
    files.push(MANIFEST_FILE.to_string());
    manifest.files = files;
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

// ---------------------------------------------------------------- rescans

/// Instantaneous norms of every `(z+, z-)` snapshot pair of a run
/// directory, ordered by time.
pub fn snapshot_norms(dir: &Path) -> Result<NormSeries> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let w = manifest.config.weights;
    let k_max = manifest.k_max;
    let mut samples = Vec::new();
    for file in &manifest.files {
        let Some(label) = file.strip_prefix("fields/z_plus_").and_then(|f| f.strip_suffix(".bin")) else {
            continue;
        };
        let minus = format!("fields/z_minus_{label}.bin");
        if !manifest.files.contains(&minus) {
            continue;
        }
        let p = read_field_dump(&dir.join(file))?.dump;
        let m = read_field_dump(&dir.join(&minus))?.dump;
        if p.domain != m.domain || p.t != m.t || p.a != m.a {
            return Err(Error::Dump {
                path: dir.join(&minus),
                reason: format!("does not pair with {file}: different grid, t or a"),
            });
        }
        let mut sp = Spectral::new(p.domain);
        let s = ElsasserState::new(&mut sp, p.t, p.a, p.coeffs, m.coeffs)?;
        samples.push(instantaneous_sample(&mut sp, &s, &w, k_max)?);
    }
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(NormSeries { k_max, samples })
}

/// Stored and recomputed weighted norms of one scattering field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringRescan {
    pub sidecar: String,
    pub species: Species,
    pub infinity: Infinity,
    pub stored: Vec<f64>,
    pub recomputed: Vec<f64>,
    pub max_rel_diff: f64,
}

/// Recomputes the weighted norms of every scattering dump of a run.
pub fn rescan_scattering(dir: &Path) -> Result<Vec<ScatteringRescan>> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let mut out = Vec::new();
    for file in manifest.files.iter().filter(|f| f.starts_with("scattering/") && f.ends_with(".json")) {
        let side: ScatteringSidecar = read_json(&dir.join(file))?;
        let loaded = read_field_dump(&dir.join(&side.dump))?.dump;
        let field = ScatteringField {
            species: side.species,
            infinity: side.infinity,
            t_end: side.t_end,
            tail: side.tail,
            coeffs: loaded.coeffs,
        };
        let mut sp = Spectral::new(field.domain());
        let k_max = side.norms.len().saturating_sub(1) as u32;
        let recomputed = experiments::scattering_norms(&mut sp, &field, k_max, &side.weights)?;
        let max_rel_diff = side
            .norms
            .iter()
            .zip(&recomputed)
            .map(|(a, b)| if *a == 0.0 && *b == 0.0 { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
            .fold(0.0, f64::max);
        out.push(ScatteringRescan {
            sidecar: file.clone(),
            species: side.species,
            infinity: side.infinity,
            stored: side.norms,
            recomputed,
            max_rel_diff,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::NormSample;
    use crate::state::make_wave_packet;

    const MINIMAL: &str = r#"
[experiment]
kind = "collision"

[domain]
n = [8, 8, 256]
l = [4, 4, 32]

[stepper]
dt = 0.05

[[packets]]
species = "plus"
center = [2.0, 2.0, 5.5]
widths = [1.2, 1.2, 0.6]
amplitude = 0.05

[[packets]]
species = "minus"
center = [2.0, 2.0, -5.5]
widths = [1.2, 1.2, 0.6]
amplitude = 0.05
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.weights.delta, 0.1);
        assert_eq!(cfg.weights.omega, 1.1);
        assert_eq!(cfg.stepper.cfl, 0.5);
        assert_eq!(cfg.diagnostics.k_max, 2);
        assert_eq!(cfg.packets.len(), 2);
        assert_eq!(cfg.name, "collision");
    }

    #[test]
    fn delta_out_of_range_cites_interval() {
        let text = format!("{MINIMAL}\n[weights]\ndelta = 0.7\n");
        match parse_config_str(&text) {
            Err(Error::Config(errs)) => {
                assert!(errs.iter().any(|e| e.contains("weights.delta") && e.contains("(0, 2/3)")), "{errs:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = r#"
[experiment]
kind = "collision"
colour = "blue"

[domain]
n = [8, 8, 100]

[stepper]
cfl = 2.0

[[packets]]
species = "sideways"
center = [0, 0, 0]
widths = [1, 1, 1]
amplitude = 0.1
"#;
        match parse_config_str(text) {
            Err(Error::Config(errs)) => {
                let joined = errs.join("\n");
                for needle in ["experiment.colour", "domain.l", "stepper.dt", "packets[0].species", "cfl"] {
                    assert!(joined.contains(needle), "{needle} not in\n{joined}");
                }
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config_str("[experiment]\n"), Err(Error::Config(e)) if e.iter().any(|m| m.contains("experiment.kind"))));
        assert!(matches!(parse_config_str("not toml ["), Err(Error::Config(_))));
    }

    #[test]
    fn wide_packet_is_a_margin_violation_naming_it() {
        let text = MINIMAL.replacen("widths = [1.2, 1.2, 0.6]", "widths = [1.2, 1.2, 2.5]", 1);
        match parse_config_str(&text) {
            Err(Error::MarginViolation(msg)) => assert!(msg.contains("packets[0]"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_echo_round_trips() {
        let mut cfg = parse_config_str(MINIMAL).unwrap();
        cfg.stepper.t_end = Some(9.5);
        cfg.checks.tail = 3e-11;
        cfg.output_dir = Some("runs/x".into());
        cfg.random.push(RandomField {
            species: Species::Minus,
            slope: -2.0,
            seed: 4,
            rms: 0.0,
        });
        cfg.packets[1].polarization_seed = 9;
        let back = parse_config_str(&config_to_toml(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn empty_series_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("norms.csv");
        write_norms_csv(&p, &NormSeries { k_max: 2, samples: vec![] }).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(
            text.trim_end(),
            "t,E_plus,E_minus,E0_plus,E0_minus,E1_plus,E1_minus,E2_plus,E2_minus,F_plus,F_minus,energy,cross_helicity,sep_ratio,p1_ratio,p2_ratio"
        );
    }

    #[test]
    fn norms_csv_round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("norms.csv");
        let s = NormSample {
            t: 0.1,
            e_plus: 1.0 / 3.0,
            e_minus: 2.5e-17,
            ek_plus: vec![1.0, 2.0],
            ek_minus: vec![3.0, 4.0],
            f_plus: 0.5,
            f_minus: 0.25,
            energy: 7.0,
            cross_helicity: -1e-300,
            sep_ratio: 0.0,
            p1_ratio: 1e-3,
            p2_ratio: 2e-3,
            max_div: 0.0,
        };
        write_norms_csv(&p, &NormSeries { k_max: 1, samples: vec![s] }).unwrap();
        let (h, rows) = read_csv(&p).unwrap();
        assert_eq!(h.len(), 3 + 4 + 7);
        assert_eq!(rows[0], vec![0.1, 1.0 / 3.0, 2.5e-17, 1.0, 3.0, 2.0, 4.0, 0.5, 0.25, 7.0, -1e-300, 0.0, 1e-3, 2e-3]);
    }

    fn sample_dump() -> (Spectral, FieldDump) {
        let d = DomainSpec::new([8, 8, 256], [4.0, 4.0, 32.0]).unwrap();
        let mut sp = Spectral::new(d);
        let packet = WavePacket {
            species: Species::Minus,
            center: [2.0, 2.0, 1.0],
            widths: [1.2, 1.2, 0.6],
            amplitude: 0.3,
            polarization_seed: 5,
        };
        let (coeffs, _) = make_wave_packet(&mut sp, &packet, [0.0, 0.0]).unwrap();
        (
            sp,
            FieldDump {
                domain: d,
                t: 1.25,
                a: -0.5,
                species: Some(Species::Minus),
                coeffs,
            },
        )
    }

    #[test]
    fn dump_round_trip_is_bit_identical() {
        let (mut sp, dump) = sample_dump();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.bin");
        write_field_dump(&p, &mut sp, &dump, DumpKind::Physical).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 128 + 3 * dump.domain.len() * 8);
        assert_eq!(&bytes[..5], b"ALFV1");
        let loaded = read_field_dump(&p).unwrap();
        let original = sp.inverse(&dump.coeffs).unwrap();
        assert_eq!(loaded.physical.as_ref().unwrap(), &original);
        assert_eq!((loaded.dump.t, loaded.dump.a, loaded.dump.species), (1.25, -0.5, Some(Species::Minus)));

        write_field_dump(&p, &mut sp, &dump, DumpKind::Spectral).unwrap();
        let loaded = read_field_dump(&p).unwrap();
        assert_eq!(loaded.dump.coeffs, dump.coeffs);
    }

    #[test]
    fn corrupt_dumps_are_rejected() {
        let (mut sp, dump) = sample_dump();
        let bytes = encode_dump(&mut sp, &dump, DumpKind::Physical).unwrap();
        let p = Path::new("x.bin");
        assert!(matches!(decode_dump(p, &bytes[..100]), Err(Error::Dump { .. })));
        assert!(matches!(decode_dump(p, &bytes[..bytes.len() - 8]), Err(Error::Dump { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dump(p, &bad), Err(Error::Dump { .. })));
        // a gradient field is far from solenoidal
        let d = dump.domain;
        let g = RealVectorField::from_fn(d, |x1, _, _| {
            let k = std::f64::consts::TAU / d.l[0];
            [(k * x1).cos(), 0.0, 0.0]
        });
        let gd = FieldDump {
            coeffs: sp.transform(&g).unwrap(),
            ..dump
        };
        let bytes = encode_dump(&mut sp, &gd, DumpKind::Physical).unwrap();
        match decode_dump(p, &bytes) {
            Err(Error::Dump { reason, .. }) => assert!(reason.contains("solenoidal")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
        assert!(matches!(write_atomic(Path::new("/proc/nope/x"), b""), Err(Error::Io { .. })));
    }
}
