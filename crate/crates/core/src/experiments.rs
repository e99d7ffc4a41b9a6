//! Configuration-driven studies and their CSV outputs.
//!
//! Every run writes one CSV and a `manifest.json` into the output directory.
//! CSV floats carry 17 significant digits and rows come out in a fixed order,
//! so a given config and seed always produce the same bytes whatever the
//! thread count. Wall-clock data only appears in the manifest.
//!
//! | study | file | header |
//! |---|---|---|
//! | approx-error | `approx_error.csv` | [`APPROX_HEADER`] |
//! | design | `design.csv` | [`DESIGN_HEADER`] |
//! | peb-sweep | `peb_sweep.csv` | [`SWEEP_HEADER`] |
//! | rmse-curve | `rmse_curve.csv` | [`SWEEP_HEADER`] |

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::UePosition;
use crate::circuit::{approx_error, coupling_spectral_radius, Circuit, TerminationState, PHASE_FLOOR};
use crate::config::{Experiment, ExperimentConfig, PhaseInit};
use crate::error::{DmaError, Result};
use crate::fisher::peb_or_infinity;
use crate::optimizer::Architecture;
use crate::sim::{run_peb_sweep, run_rmse, trial_rng, Receiver};

pub const APPROX_HEADER: [&str; 4] = ["freq_ghz", "order", "squared_error", "spectral_radius"];
pub const DESIGN_HEADER: [&str; 4] = ["field", "index", "re", "im"];
pub const SWEEP_HEADER: [&str; 9] = [
    "experiment",
    "variant",
    "n_rf",
    "n_e",
    "p_max_dbm",
    "trials",
    "rmse_param",
    "rmse_cartesian",
    "peb",
];

/// Float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| DmaError::Io {
            path: "<csv>".into(),
            reason: e.to_string(),
        };
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| DmaError::Io {
            path: "<csv>".into(),
            reason: e.to_string(),
        })
    }
}

fn seed_of(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.seed
        .ok_or_else(|| DmaError::config("seed", "a seed is required to run an experiment"))
}

/// Truncation error of the coupling inverse per frequency and order.
pub fn approx_error_table(cfg: &ExperimentConfig) -> Result<Table> {
    let Experiment::ApproxError { freqs_ghz, orders, phases } = &cfg.experiment else {
        return Err(DmaError::config("experiment.kind", "expected approx-error"));
    };
    let seed = seed_of(cfg)?;
    let base = cfg.panel()?;
    let per_freq: Vec<Vec<Vec<String>>> = freqs_ghz
        .par_iter()
        .enumerate()
        .map(|(k, &f)| {
            let panel = cfg.panel_at(base.n_rf, base.n_e, f * 1e9);
            let circuit = Circuit::build(&panel)?;
            let n = panel.n_elements();
            let state = match phases {
                PhaseInit::Zeros => TerminationState::zeros(n),
                PhaseInit::Random => {
                    let mut rng = trial_rng(seed, k as u64);
                    let ph = (0..n)
                        .map(|_| rng.random_range(PHASE_FLOOR..=std::f64::consts::FRAC_PI_2))
                        .collect();
                    TerminationState::new(ph)?
                }
            };
            let rho = coupling_spectral_radius(&circuit.coupling, &state);
            orders
                .iter()
                .map(|&order| {
                    let e = approx_error(&circuit.coupling, &state, order)?;
                    Ok(vec![fmt_f64(f), order.to_string(), fmt_f64(e), fmt_f64(rho)])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&APPROX_HEADER);
    per_freq.into_iter().flatten().for_each(|r| t.push(r));
    Ok(t)
}

/// Single circuit-model design at the configured user position.
pub fn design_table(cfg: &ExperimentConfig) -> Result<Table> {
    seed_of(cfg)?;
    let panel = cfg.panel()?;
    let ue: UePosition = cfg.ue()?;
    let arch = if cfg.solver.order == 1 { Architecture::DmaOrder1 } else { Architecture::DmaOrder2 };
    let rx = Receiver::design(arch, &panel, &ue, &cfg.profile(), &cfg.solver)?;
    let pilots = cfg.pilots_at(cfg.powers_dbm()[0])?;
    let peb = peb_or_infinity(rx.bound(&ue, &pilots, &cfg.noise()?, &cfg.unknowns()?))?;
    let s = &rx.solution;
    let mut t = Table::new(&DESIGN_HEADER);
    let zero = fmt_f64(0.0);
    for (n, p) in s.phases.iter().enumerate() {
        t.push(vec!["phase".into(), n.to_string(), fmt_f64(*p), zero.clone()]);
    }
    for (i, z) in s.v.iter().enumerate() {
        t.push(vec!["v".into(), i.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
    }
    for (name, val) in [
        ("residual", s.residual),
        ("objective", s.objective),
        ("sigma1", s.sigma1),
        ("iterations", s.iterations as f64),
        ("peb", peb),
    ] {
        t.push(vec![name.into(), "0".into(), fmt_f64(val), zero.clone()]);
    }
    Ok(t)
}

/// Bound versus number of RF chains.
pub fn peb_sweep_table(cfg: &ExperimentConfig) -> Result<Table> {
    let Experiment::PebSweep { nrf, variants, .. } = &cfg.experiment else {
        return Err(DmaError::config("experiment.kind", "expected peb-sweep"));
    };
    seed_of(cfg)?;
    let template = cfg.panel()?;
    let ue = cfg.ue()?;
    let noise = cfg.noise()?;
    let unknown = cfg.unknowns()?;
    let mut t = Table::new(&SWEEP_HEADER);
    for p_dbm in cfg.powers_dbm() {
        let pilots = cfg.pilots_at(p_dbm)?;
        let rows = run_peb_sweep(&template, nrf, variants, &ue, &cfg.profile(), &pilots, &noise, &unknown, &cfg.solver)?;
        for r in rows {
            t.push(vec![
                "peb-sweep".into(),
                r.variant.name().into(),
                r.n_rf.to_string(),
                r.n_e.to_string(),
                fmt_f64(p_dbm),
                "0".into(),
                String::new(),
                String::new(),
                fmt_f64(r.peb),
            ]);
        }
    }
    Ok(t)
}

/// Monte Carlo RMSE versus pilot power.
pub fn rmse_curve_table(cfg: &ExperimentConfig) -> Result<Table> {
    let Experiment::RmseCurve { variants, trials, .. } = &cfg.experiment else {
        return Err(DmaError::config("experiment.kind", "expected rmse-curve"));
    };
    let seed = seed_of(cfg)?;
    let template = cfg.panel()?;
    let ue = cfg.ue()?;
    let noise = cfg.noise()?;
    let grid = cfg.grid()?;
    let mut t = Table::new(&SWEEP_HEADER);
    for &arch in variants {
        let rows = run_rmse(
            arch,
            &template,
            &ue,
            &cfg.profile(),
            cfg.t_pilots(),
            &cfg.powers_dbm(),
            &noise,
            &grid,
            *trials,
            seed,
            &cfg.solver,
        )?;
        for r in rows {
            t.push(vec![
                "rmse-curve".into(),
                r.variant.name().into(),
                r.n_rf.to_string(),
                r.n_e.to_string(),
                fmt_f64(r.p_max_dbm),
                r.trials.to_string(),
                fmt_f64(r.rmse_param),
                fmt_f64(r.rmse_cartesian),
                fmt_f64(r.peb),
            ]);
        }
    }
    Ok(t)
}

/// Table and file name of the configured study.
pub fn run_table(cfg: &ExperimentConfig) -> Result<(&'static str, Table)> {
    Ok(match cfg.experiment {
        Experiment::ApproxError { .. } => ("approx_error.csv", approx_error_table(cfg)?),
        Experiment::Design => ("design.csv", design_table(cfg)?),
        Experiment::PebSweep { .. } => ("peb_sweep.csv", peb_sweep_table(cfg)?),
        Experiment::RmseCurve { .. } => ("rmse_curve.csv", rmse_curve_table(cfg)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
    pub rows: usize,
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub wall_seconds: f64,
    /// Resolved configuration, as TOML.
    pub config: String,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

fn io_err(path: &Path, e: std::io::Error) -> DmaError {
    DmaError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Run the configured study and write its CSV and manifest.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &opts.out {
        cfg.output = Some(o.display().to_string());
    }
    cfg.validate()?;
    let seed = seed_of(&cfg)?;
    let out = PathBuf::from(cfg.output_dir());

    let started = chrono::Utc::now();
    let clock = std::time::Instant::now();
    let (threads, result) = match opts.threads {
        Some(k) => {
            if k == 0 {
                return Err(DmaError::config("threads", "must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| DmaError::config("threads", e.to_string()))?;
            (k, pool.install(|| run_table(&cfg)))
        }
        None => (rayon::current_num_threads(), run_table(&cfg)),
    };
    let (file, table) = result?;
    let bytes = table.to_csv()?;

    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let path = out.join(file);
    fs::write(&path, &bytes).map_err(|e| io_err(&path, e))?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.kind().into(),
        seed,
        threads,
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        config: cfg.to_toml(),
        outputs: vec![OutputEntry {
            file: file.into(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len(),
            rows: table.rows.len(),
        }],
    };
    let mpath = out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| DmaError::Io {
        path: mpath.display().to_string(),
        reason: e.to_string(),
    })?;
    fs::write(&mpath, json + "\n").map_err(|e| io_err(&mpath, e))?;
    Ok(manifest)
}
