//! Measurement layer: error metric, singular-value decay, evaluation cost
//! accounting and probe time series.

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Result, RomError};
use crate::fom::Grid;
use crate::numerics::singular_values;
use crate::rom::VariableLayout;

/// What a batch of full-model component evaluations was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalKind {
    /// Full-model steps that produce the initial snapshots.
    FomInit,
    /// All `N` components, for re-selecting sampling points.
    FullRefresh,
    /// Components at the union of sampling and interpolation points.
    SparseEstimate,
    /// Components at the interpolation points for the reduced time step.
    RomStep,
}

impl EvalKind {
    pub const ALL: [EvalKind; 4] = [EvalKind::FomInit, EvalKind::FullRefresh, EvalKind::SparseEstimate, EvalKind::RomStep];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalKind::FomInit => "fom_init",
            EvalKind::FullRefresh => "full_refresh",
            EvalKind::SparseEstimate => "sparse_estimate",
            EvalKind::RomStep => "rom_step",
        }
    }
}

impl fmt::Display for EvalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalRecord {
    pub step: usize,
    pub kind: EvalKind,
    pub count: u64,
}

/// Exact count of evaluated full-model right-hand-side components.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalLedger {
    records: Vec<EvalRecord>,
    total: u64,
}

impl EvalLedger {
    pub fn record(&mut self, step: usize, kind: EvalKind, count: usize) {
        let count = count as u64;
        self.records.push(EvalRecord { step, kind, count });
        self.total += count;
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn extend(&mut self, other: &EvalLedger) {
        for r in &other.records {
            self.record(r.step, r.kind, r.count as usize);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerSummary {
    pub fom_init: u64,
    pub full_refresh: u64,
    pub sparse_estimate: u64,
    pub rom_step: u64,
    pub total: u64,
}

impl LedgerSummary {
    pub fn get(&self, kind: EvalKind) -> u64 {
        match kind {
            EvalKind::FomInit => self.fom_init,
            EvalKind::FullRefresh => self.full_refresh,
            EvalKind::SparseEstimate => self.sparse_estimate,
            EvalKind::RomStep => self.rom_step,
        }
    }
}

pub fn ledger_summary(ledger: &EvalLedger) -> LedgerSummary {
    let mut s = LedgerSummary::default();
    for r in ledger.records() {
        match r.kind {
            EvalKind::FomInit => s.fom_init += r.count,
            EvalKind::FullRefresh => s.full_refresh += r.count,
            EvalKind::SparseEstimate => s.sparse_estimate += r.count,
            EvalKind::RomStep => s.rom_step += r.count,
        }
    }
    s.total = s.fom_init + s.full_refresh + s.sparse_estimate + s.rom_step;
    s
}

/// `||Q~ - Q||_F^2 / ||Q||_F^2`. Note the ratio is of *squared* norms.
pub fn relative_error(approx: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if approx.shape() != reference.shape() {
        return Err(RomError::Parameter(format!(
            "trajectory shapes differ: {:?} vs reference {:?}",
            approx.shape(),
            reference.shape()
        )));
    }
    let denom = reference.norm_squared();
    if !(denom > 0.0) {
        return Err(RomError::Parameter("reference trajectory has zero norm".into()));
    }
    Ok((approx - reference).norm_squared() / denom)
}

/// Singular values of a column range, normalized by the largest.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRow {
    pub label: String,
    pub normalized: Vec<f64>,
}

/// Normalized singular values of all of `q` (label `global`) followed by one
/// row per window.
pub fn svd_decay_report(q: &DMatrix<f64>, windows: &[(String, Range<usize>)]) -> Result<Vec<DecayRow>> {
    let mut rows = Vec::with_capacity(windows.len() + 1);
    rows.push(DecayRow { label: "global".into(), normalized: normalized_singular_values(q)? });
    for (label, r) in windows {
        if r.is_empty() || r.end > q.ncols() {
            return Err(RomError::Parameter(format!(
                "window `{label}` = {r:?} is empty or exceeds {} columns",
                q.ncols()
            )));
        }
        let block = q.columns(r.start, r.len()).into_owned();
        rows.push(DecayRow { label: label.clone(), normalized: normalized_singular_values(&block)? });
    }
    Ok(rows)
}

fn normalized_singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let s = singular_values(m)?;
    let s0 = s.get(0).copied().unwrap_or(0.0);
    if s0 == 0.0 {
        return Ok(vec![0.0; s.len()]);
    }
    Ok(s.iter().map(|x| x / s0).collect())
}

/// Consecutive non-overlapping windows of `width` columns (a shorter tail is dropped).
pub fn tiled_windows(columns: usize, width: usize) -> Vec<(String, Range<usize>)> {
    if width == 0 {
        return Vec::new();
    }
    (0..columns / width)
        .map(|w| {
            let r = w * width..(w + 1) * width;
            (format!("window_{}_{}", r.start, r.end - 1), r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    /// Probe x-coordinates.
    pub locations: Vec<f64>,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    pub variable: String,
    pub location: f64,
    pub cell: usize,
    /// `(time, value)` pairs.
    pub samples: Vec<(f64, f64)>,
}

/// Nearest-cell samples of every `(location, variable)` pair over all columns of
/// `q`; column `j` is at time `j * column_dt`.
pub fn probe_series(
    q: &DMatrix<f64>,
    grid: &Grid,
    layout: &VariableLayout,
    probes: &ProbeSpec,
    column_dt: f64,
) -> Result<Vec<ProbeSeries>> {
    if layout.dim() != q.nrows() {
        return Err(RomError::Parameter(format!(
            "trajectory has {} rows, layout covers {}",
            q.nrows(),
            layout.dim()
        )));
    }
    let mut out = Vec::new();
    for &x in &probes.locations {
        let cell = grid.nearest_cell(x)?;
        for var in &probes.variables {
            let r = layout
                .range_of(var)
                .ok_or_else(|| RomError::Parameter(format!("unknown probe variable `{var}`")))?;
            if cell >= r.len() {
                return Err(RomError::Parameter(format!("probe cell {cell} outside variable `{var}`")));
            }
            let row = r.start + cell;
            let samples = (0..q.ncols()).map(|j| (j as f64 * column_dt, q[(row, j)])).collect();
            out.push(ProbeSeries { variable: var.clone(), location: x, cell, samples });
        }
    }
    Ok(out)
}
