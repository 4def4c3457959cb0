//! Reproducible Monte-Carlo experiments.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: sample
//! `i` draws its noise from stream `i` of the configured seed, per-sample
//! results are collected in index order and reduced sequentially, so a
//! report is bit-identical across reruns and thread counts.

mod bessel;
mod bubble;
mod modulus;
mod qv;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::stats::{LineFit, McEstimate};

pub use bessel::bessel_continuity_experiment;
pub use bubble::{ball_filling_experiment, bubble_disconnection_experiment, max_filled_ball, trace_to_exit};
pub use modulus::{modulus_experiment, modulus_threshold};
pub use qv::{qv_limit_experiment, regularity_deterioration_experiment};

pub const EXPERIMENTS: [&str; 6] = [
    "bessel-continuity",
    "bubble-disconnection",
    "ball-filling",
    "modulus",
    "qv-limit",
    "regularity",
];

/// Experiment-specific parameter keys, per experiment.
pub fn known_params(name: &str) -> &'static [&'static str] {
    match name {
        "bessel-continuity" => &["d_star", "d_list", "x0", "min_level", "slack"],
        "bubble-disconnection" => &["radius", "px", "deltas", "threshold_delta", "threshold_p", "closing"],
        "ball-filling" => &["radius", "px", "eps", "closing"],
        "modulus" => &["r", "deltas", "m", "px"],
        "qv-limit" => &["tolerance", "hull_time", "hull_dt", "hull_samples", "hull_px"],
        "regularity" => &["window", "compare"],
        _ => &[],
    }
}

/// Configuration of one experiment run. The output directory and the
/// thread count do not influence results and are not serialized, so
/// reports compare equal across them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kappa: Vec<f64>,
    pub samples: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses the global pool.
    #[serde(skip_serializing)]
    pub threads: usize,
    /// Experiment-specific parameters (lists of reals).
    pub params: BTreeMap<String, Vec<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new("")
    }
}

impl ExperimentConfig {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kappa: Vec::new(),
            samples: 100,
            dt: 1e-3,
            t_end: 1.0,
            seed: 0,
            out_dir: None,
            threads: 0,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, values: &[f64]) -> Self {
        self.params.insert(key.to_string(), values.to_vec());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.name.as_str()) {
            return param_err!("unknown experiment {:?}; known: {}", self.name, EXPERIMENTS.join(", "));
        }
        let known = known_params(&self.name);
        if let Some(k) = self.params.keys().find(|k| !known.contains(&k.as_str())) {
            return param_err!(
                "unknown parameter {k:?} for {}; known: {}",
                self.name,
                known.join(", ")
            );
        }
        if self.samples == 0 {
            return param_err!("samples must be at least 1");
        }
        if let Some(k) = self.kappa.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return param_err!("kappa values must lie in (0, inf), got {k}");
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.dt <= self.t_end) {
            return param_err!("need 0 < dt <= T, got dt={} T={}", self.dt, self.t_end);
        }
        Ok(())
    }

    fn list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        self.params.get(key).cloned().unwrap_or_else(|| default.to_vec())
    }

    fn scalar(&self, key: &str, default: f64) -> f64 {
        self.params
            .get(key)
            .and_then(|v| v.first().copied())
            .unwrap_or(default)
    }

    fn kappas(&self, default: &[f64]) -> Vec<f64> {
        if self.kappa.is_empty() {
            default.to_vec()
        } else {
            self.kappa.clone()
        }
    }
}

/// One table cell: labelled parameters with an estimate and extra values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub estimate: Option<McEstimate>,
    pub values: BTreeMap<String, f64>,
}

impl Cell {
    fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            params: BTreeMap::new(),
            estimate: None,
            values: BTreeMap::new(),
        }
    }

    fn param(mut self, k: &str, v: f64) -> Self {
        self.params.insert(k.into(), v);
        self
    }

    fn value(mut self, k: &str, v: f64) -> Self {
        self.values.insert(k.into(), v);
        self
    }

    fn estimate(mut self, e: McEstimate) -> Self {
        self.estimate = Some(e);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub label: String,
    pub fit: Option<LineFit>,
    /// Too few usable cells for a fit.
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            cells: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        crate::io::to_json_bytes(self)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "# Experiment `{}`\n", c.name);
        let _ = writeln!(
            s,
            "seed {}, samples {}, dt {}, T {}, kappa {:?}\n",
            c.seed, c.samples, c.dt, c.t_end, c.kappa
        );
        if !c.params.is_empty() {
            for (k, v) in &c.params {
                let _ = writeln!(s, "- `{k}` = {v:?}");
            }
            s.push('\n');
        }
        if !self.cells.is_empty() {
            s.push_str("| cell | params | estimate | values |\n|---|---|---|---|\n");
            for cell in &self.cells {
                let params: Vec<String> = cell.params.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
                let est = cell
                    .estimate
                    .map(|e| format!("{:.6} ± {:.6}", e.value, e.stderr))
                    .unwrap_or_default();
                let vals: Vec<String> = cell.values.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
                let _ = writeln!(s, "| {} | {} | {} | {} |", cell.label, params.join(", "), est, vals.join(", "));
            }
            s.push('\n');
        }
        for f in &self.fits {
            match (&f.fit, f.censored) {
                (Some(fit), false) => {
                    let _ = writeln!(
                        s,
                        "- fit {}: slope {:.4} ± {:.4} (95%), intercept {:.4}, {} points",
                        f.label,
                        fit.slope,
                        fit.slope_band95(),
                        fit.intercept,
                        fit.n_points
                    );
                }
                _ => {
                    let _ = writeln!(s, "- fit {}: censored", f.label);
                }
            }
        }
        if !self.checks.is_empty() {
            s.push_str("\n## Checks\n\n");
            for ch in &self.checks {
                let _ = writeln!(s, "- [{}] {}: {}", if ch.passed { "pass" } else { "FAIL" }, ch.name, ch.detail);
            }
        }
        if !self.notes.is_empty() {
            s.push_str("\n## Notes\n\n");
            for n in &self.notes {
                let _ = writeln!(s, "- {n}");
            }
        }
        s
    }

    /// Writes `<name>.json` and `<name>.md` into `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.config.name));
        let md = dir.join(format!("{}.md", self.config.name));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&md, self.to_markdown())?;
        Ok(vec![json, md])
    }
}

/// Runs the experiment named in `cfg` on a pool of `cfg.threads` workers.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let run = || match cfg.name.as_str() {
        "bessel-continuity" => bessel_continuity_experiment(cfg),
        "bubble-disconnection" => bubble_disconnection_experiment(cfg),
        "ball-filling" => ball_filling_experiment(cfg),
        "modulus" => modulus_experiment(cfg),
        "qv-limit" => qv_limit_experiment(cfg),
        "regularity" => regularity_deterioration_experiment(cfg),
        other => param_err!("unknown experiment {other:?}"),
    };
    if cfg.threads == 0 {
        return run();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Computation(format!("thread pool: {e}")))?;
    pool.install(run)
}

/// Least-squares fit, or a censored entry when fewer than 3 points remain.
fn fit_or_censor(label: &str, xs: &[f64], ys: &[f64]) -> Fit {
    let fit = if xs.len() >= 3 {
        crate::stats::fit_line(xs, ys)
    } else {
        None
    };
    Fit {
        label: label.into(),
        censored: fit.is_none(),
        fit,
    }
}
