//! The experiment commands. Each `*_experiment` function computes a result in
//! memory; the command functions around them write the output files.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use romkit::adeim::{run_aadeim, AadeimRun};
use romkit::diagnostics::{ledger_summary, probe_series, relative_error, svd_decay_report, tiled_windows, EvalLedger, LedgerSummary};
use romkit::fom::{simulate, BuiltinModel, FullModel};
use romkit::rom::{run_static, select_points, PointSet, ReducedBasis};

use crate::config::{RomMode, RunConfig};
use crate::error::CliError;
use crate::io::{csv_text, fmt_f64, read_csv, read_snapshots, write_atomic, write_csv, write_snapshots};

pub const OUTPUT_DIR_ENV: &str = "ROM_OUTPUT_DIR";

pub const SUMMARY_HEADER: [&str; 9] =
    ["label", "n", "m_s", "z", "error", "evals_total", "evals_refresh", "evals_sparse", "evals_rom"];

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub n: usize,
    /// Sampling points and refresh period; absent for static runs.
    pub m_s: Option<usize>,
    pub z: Option<usize>,
    pub error: f64,
    pub evals: LedgerSummary,
}

impl Summary {
    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.label.clone(),
            self.n.to_string(),
            opt(self.m_s),
            opt(self.z),
            fmt_f64(self.error),
            self.evals.total.to_string(),
            self.evals.full_refresh.to_string(),
            self.evals.sparse_estimate.to_string(),
            self.evals.rom_step.to_string(),
        ]
    }
}

/// `ROM_OUTPUT_DIR` if set, else `output.directory`.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.directory.clone(),
    }
}

pub struct StaticExperiment {
    pub basis: ReducedBasis,
    pub points: PointSet,
    /// Lifted trajectory `V Q~`.
    pub trajectory: DMatrix<f64>,
    pub reference: DMatrix<f64>,
    pub error: f64,
    pub ledger: EvalLedger,
}

pub struct AadeimExperiment {
    pub run: AadeimRun,
    pub reference: DMatrix<f64>,
    pub error: f64,
}

/// Concatenates snapshot files column-wise and keeps every `stride`-th column.
pub fn load_training(paths: &[PathBuf], stride: usize, dim: usize) -> Result<DMatrix<f64>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Config("no training snapshots: pass --snapshots or set training.snapshots".into()));
    }
    let mut blocks = Vec::with_capacity(paths.len());
    for p in paths {
        let m = read_snapshots(p)?;
        if m.nrows() != dim {
            return Err(CliError::Config(format!(
                "{}: snapshots have {} rows but the configured model has N = {dim}",
                p.display(),
                m.nrows()
            )));
        }
        blocks.push(m);
    }
    let cols: Vec<usize> = (0..blocks.iter().map(|b| b.ncols()).sum()).step_by(stride.max(1)).collect();
    let mut all = DMatrix::zeros(dim, blocks.iter().map(|b| b.ncols()).sum());
    let mut at = 0;
    for b in &blocks {
        all.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    Ok(all.select_columns(&cols))
}

/// POD + QDEIM on `snapshots`, then the static DEIM model from `q~_0 = V'q_0`.
pub fn static_experiment(cfg: &RunConfig, model: &BuiltinModel, snapshots: &DMatrix<f64>) -> Result<StaticExperiment, CliError> {
    let basis = ReducedBasis::from_snapshots(snapshots, cfg.rom.n)?;
    let points = select_points(&basis, &model.layout())?;
    let q0 = basis.project(&model.initial_state());
    let run = run_static(model, &basis, &points, &q0, model.time().steps)?;
    let trajectory = run.lifted(&basis);
    let reference = simulate(model);
    let error = relative_error(&trajectory, &reference)?;
    Ok(StaticExperiment { basis, points, trajectory, reference, error, ledger: run.ledger })
}

pub fn aadeim_experiment(cfg: &RunConfig, model: &BuiltinModel) -> Result<AadeimExperiment, CliError> {
    let run = run_aadeim(model, &cfg.aadeim_config())?;
    let reference = simulate(model);
    let error = relative_error(&run.trajectory, &reference)?;
    Ok(AadeimExperiment { run, reference, error })
}

fn ensure_mode(cfg: &RunConfig, mode: RomMode, command: &str) -> Result<(), CliError> {
    if cfg.rom.mode != mode {
        return Err(CliError::Config(format!("rom.mode: is `{}` but `{command}` was invoked", cfg.rom.mode.as_str())));
    }
    Ok(())
}

/// Resolved config plus probe series of `traj`.
fn write_common(cfg: &RunConfig, model: &BuiltinModel, dir: &Path, traj: &DMatrix<f64>) -> Result<(), CliError> {
    write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    let spec = cfg.probe_spec(model);
    let series = probe_series(traj, &model.grid(), &model.layout(), &spec, model.time().dt)?;
    let nvars = spec.variables.len();
    for (j, s) in series.iter().enumerate() {
        let path = dir.join(format!("probe_{}_{}.csv", s.variable, j / nvars));
        write_csv(&path, &["time", "value"], s.samples.iter().map(|(t, v)| [fmt_f64(*t), fmt_f64(*v)]))?;
    }
    Ok(())
}

fn write_ledger(dir: &Path, ledger: &EvalLedger) -> Result<(), CliError> {
    let rows = ledger.records().iter().map(|r| [r.step.to_string(), r.kind.to_string(), r.count.to_string()]);
    write_csv(&dir.join("ledger.csv"), &["step", "kind", "count"], rows)
}

fn write_summary(dir: &Path, s: &Summary) -> Result<(), CliError> {
    write_csv(&dir.join("summary.csv"), &SUMMARY_HEADER, [s.record()])
}

/// Full-model trajectory as `snapshots.bin`, plus probes.
pub fn fom_run(cfg: &RunConfig, dir: &Path) -> Result<DMatrix<f64>, CliError> {
    let model = cfg.build_model()?;
    let traj = simulate(&model);
    if let Some(k) = traj.column_iter().position(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(CliError::Numerical(format!("full-order trajectory is not finite at step {k}")));
    }
    write_snapshots(&dir.join("snapshots.bin"), &traj)?;
    write_common(cfg, &model, dir, &traj)?;
    Ok(traj)
}

pub fn rom_static(cfg: &RunConfig, snapshot_files: &[PathBuf], dir: &Path) -> Result<Summary, CliError> {
    ensure_mode(cfg, RomMode::Static, "rom-static")?;
    let model = cfg.build_model()?;
    let files = if snapshot_files.is_empty() { &cfg.training.snapshots[..] } else { snapshot_files };
    let snapshots = load_training(files, cfg.training.snapshot_stride, model.dim())?;
    let exp = static_experiment(cfg, &model, &snapshots)?;
    let summary = Summary {
        label: cfg.label().to_string(),
        n: cfg.rom.n,
        m_s: None,
        z: None,
        error: exp.error,
        evals: ledger_summary(&exp.ledger),
    };
    if cfg.output.write_trajectory {
        write_snapshots(&dir.join("trajectory.bin"), &exp.trajectory)?;
    }
    write_ledger(dir, &exp.ledger)?;
    write_summary(dir, &summary)?;
    write_common(cfg, &model, dir, &exp.trajectory)?;
    Ok(summary)
}

pub fn rom_aadeim(cfg: &RunConfig, dir: &Path) -> Result<Summary, CliError> {
    ensure_mode(cfg, RomMode::Aadeim, "rom-aadeim")?;
    let model = cfg.build_model()?;
    let exp = aadeim_experiment(cfg, &model)?;
    let ac = cfg.aadeim_config();
    let summary = Summary {
        label: cfg.label().to_string(),
        n: ac.n,
        m_s: Some(ac.m_s),
        z: Some(ac.z),
        error: exp.error,
        evals: ledger_summary(&exp.run.ledger),
    };
    if cfg.output.write_trajectory {
        write_snapshots(&dir.join("trajectory.bin"), &exp.run.trajectory)?;
    }
    if cfg.output.write_diagnostics {
        write_diagnostics(dir, &exp.run)?;
    }
    write_ledger(dir, &exp.run.ledger)?;
    write_summary(dir, &summary)?;
    write_common(cfg, &model, dir, &exp.run.trajectory)?;
    Ok(summary)
}

fn write_diagnostics(dir: &Path, run: &AadeimRun) -> Result<(), CliError> {
    let header = [
        "step",
        "refresh",
        "forced_refresh",
        "points",
        "evaluated",
        "read_set",
        "sample_churn",
        "max_residual",
        "basis_updated",
        "update_degenerate",
        "objective_before",
        "objective_after",
        "orthogonality_defect",
        "window_first",
        "window_last",
    ];
    fn opt(v: Option<f64>) -> String {
        v.map(fmt_f64).unwrap_or_default()
    }
    let rows = run.diagnostics.iter().map(|d| {
        vec![
            d.step.to_string(),
            d.refresh.to_string(),
            d.forced_refresh.to_string(),
            d.points.to_string(),
            d.evaluated.to_string(),
            d.read_set.to_string(),
            d.sample_churn.map(|c| c.to_string()).unwrap_or_default(),
            opt(d.max_residual),
            d.basis_updated.to_string(),
            d.update_degenerate.to_string(),
            opt(d.objective_before),
            opt(d.objective_after),
            opt(d.orthogonality_defect),
            d.window_span.0.to_string(),
            d.window_span.1.to_string(),
        ]
    });
    write_csv(&dir.join("diagnostics.csv"), &header, rows)
}

/// Normalized singular values of all columns and of consecutive windows of
/// `width` columns, as `index,sigma_normalized,window_label` CSV (`index` is the
/// 1-based position `i` of `sigma_i`).
pub fn svd_report(snapshots: &DMatrix<f64>, width: usize) -> Result<String, CliError> {
    if width == 0 {
        return Err(CliError::Config("--windows: must be ≥ 1".into()));
    }
    let rows = svd_decay_report(snapshots, &tiled_windows(snapshots.ncols(), width))?;
    let records = rows.iter().flat_map(|r| {
        r.normalized.iter().enumerate().map(move |(i, s)| [(i + 1).to_string(), fmt_f64(*s), r.label.clone()])
    });
    Ok(csv_text(&["index", "sigma_normalized", "window_label"], records))
}

/// Summary rows of several run directories, ordered by label.
pub fn compare(dirs: &[PathBuf]) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for d in dirs {
        let path = d.join("summary.csv");
        let (header, records) = read_csv(&path)?;
        if header != SUMMARY_HEADER {
            return Err(CliError::Io(format!("{}: unexpected header {header:?}", path.display())));
        }
        rows.extend(records);
    }
    rows.sort_by(|a, b| a[0].cmp(&b[0]));
    Ok(csv_text(&SUMMARY_HEADER, rows))
}
