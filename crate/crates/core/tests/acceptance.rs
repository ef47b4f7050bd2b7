//! Runs the shipped configs and prints one verdict line per acceptance
//! criterion. Exits nonzero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use alfven_core::experiments::{self, RunManifest};
use alfven_core::io;

struct Criterion {
    label: &'static str,
    run: &'static str,
    /// Assertion names, or prefixes ending in `*`.
    checks: &'static [&'static str],
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        label: "one-sided exactness",
        run: "one_sided",
        checks: &["one_sided.transport_error", "one_sided.pressure_gradient", "one_sided.scattering_equals_data"],
    },
    Criterion {
        label: "conservation",
        run: "collision",
        checks: &["collision.energy_drift", "collision.cross_helicity_drift", "collision.divergence"],
    },
    Criterion {
        label: "time-step order",
        run: "collision",
        checks: &["collision.time_order"],
    },
    Criterion {
        label: "main-estimate boundedness",
        run: "collision",
        checks: &["collision.boundedness"],
    },
    Criterion {
        label: "separation and pressure decay",
        run: "collision",
        checks: &["collision.*_decay"],
    },
    Criterion {
        label: "scattering trace identity and tail",
        run: "collision",
        checks: &["collision.trace_identity", "collision.trace_refinement", "collision.scattering_tail"],
    },
    Criterion {
        label: "scattering norms finite and reproducible",
        run: "collision",
        checks: &["collision.scattering_norms_finite", "collision.scattering_reproducible"],
    },
    Criterion {
        label: "rigidity: forward, re-pose, backward",
        run: "rigidity_forward_backward",
        checks: &["rigidity_forward_backward.*"],
    },
    Criterion {
        label: "rigidity: mixed future/past smallness",
        run: "rigidity_mixed",
        checks: &["rigidity_mixed.*"],
    },
    Criterion {
        label: "1D model rigidity and analytic scattering",
        run: "model1d",
        checks: &["model1d.*"],
    },
];

fn matches(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        Some((head, tail)) => name.starts_with(head) && name.ends_with(tail) && name.len() >= head.len() + tail.len(),
        None => name == pattern,
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn execute(run: &str, out_root: &Path) -> Result<RunManifest, String> {
    let cfg = io::parse_config(&configs_dir().join(format!("{run}.toml"))).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = experiments::run(&cfg).map_err(|e| e.to_string())?;
    let m = io::write_run(&out_root.join(run), &out).map_err(|e| e.to_string())?;
    eprintln!("  ran {run}: {} steps in {:.1} s", m.steps, start.elapsed().as_secs_f64());
    Ok(m)
}

fn main() -> ExitCode {
    // `cargo test` passes libtest flags; listing must not start the runs
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let out_root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mut runs: Vec<(&str, Result<RunManifest, String>)> = Vec::new();
    let mut failed = 0;
    for c in CRITERIA {
        if !runs.iter().any(|(r, _)| *r == c.run) {
            runs.push((c.run, execute(c.run, &out_root)));
        }
        let (_, result) = runs.iter().find(|(r, _)| *r == c.run).expect("just ran");
        let (ok, detail) = match result {
            Err(e) => (false, format!("run failed: {e}")),
            Ok(m) => {
                let picked: Vec<_> = m
                    .assertions
                    .iter()
                    .filter(|a| c.checks.iter().any(|p| matches(p, &a.name)))
                    .collect();
                let parts: Vec<String> = picked
                    .iter()
                    .map(|a| {
                        let short = a.name.split_once('.').map_or(a.name.as_str(), |(_, s)| s);
                        format!("{}{short} {:.3e} vs {:.3e}", if a.passed { "" } else { "!" }, a.value, a.threshold)
                    })
                    .collect();
                let missing = c.checks.iter().filter(|p| !picked.iter().any(|a| matches(p, &a.name))).count();
                let ok = missing == 0 && picked.iter().all(|a| a.passed);
                let mut detail = parts.join("; ");
                if missing > 0 {
                    detail.push_str(&format!("; {missing} expected assertion(s) absent"));
                }
                (ok, detail)
            }
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:<44} {detail}", if ok { "PASS" } else { "FAIL" }, c.label);
    }
    println!(
        "acceptance: {} of {} criteria passed; run directories under {}",
        CRITERIA.len() - failed,
        CRITERIA.len(),
        out_root.display()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
