//! Online adaptive DEIM with adaptive sampling (AADEIM).
//!
//! The reduced model starts from a POD basis of `w_init` full-model steps and
//! then, at every step `k`:
//!
//! 1. advances `q~` with DEIM on the current basis `V_k` and points `p_k`;
//! 2. appends an approximation of `f(V_k q~_k)` to a sliding window `F` of the
//!    last `w` columns: either a full evaluation (every `z`-th step, which also
//!    re-ranks the sampling points by residual row norm) or an evaluation at
//!    the sampling points `s_k` united with `p_k`, completed by interpolation;
//! 3. applies the optimal rank-one update `V_k + alpha beta'` fitted to `F`
//!    over all `N` residual rows, re-orthonormalizes, re-projects `q~` and
//!    recomputes the QDEIM points.
//!
//! Indices are 0-based. State column `k` of the trajectory is step `k`; the
//! window column appended at step `k` carries tag `k`. The reduced update is
//! `q~_k = f~(q~_{k-1})`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{EvalKind, EvalLedger};
use crate::error::{Result, RomError};
use crate::fom::{check_indices, FullModel};
use crate::numerics::{condition_number, gen_eig_max, lstsq, orthonormalize, pod};
use crate::rom::{deim_step, sampled_rows, select_points, sparse_rhs, PointSet, ReducedBasis, MAX_POINT_CONDITION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AadeimConfig {
    /// Reduced dimension.
    pub n: usize,
    /// Number of initial full-model steps.
    pub w_init: usize,
    /// Window size.
    pub w: usize,
    /// Number of sampling points.
    pub m_s: usize,
    /// Sampling points are re-selected at every step divisible by `z`.
    pub z: usize,
    /// Basis adaptation happens every this many steps.
    pub basis_update_period: usize,
}

impl AadeimConfig {
    /// Defaults: `w = n + 1`, adapt every step.
    pub fn new(n: usize, w_init: usize, m_s: usize, z: usize) -> Self {
        Self { n, w_init, w: n + 1, m_s, z, basis_update_period: 1 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let fail = |key: &str, what: &str| Err(RomError::Config(format!("aadeim.{key}: {what}")));
        if self.n == 0 {
            return fail("n", "must be ≥ 1");
        }
        if self.w == 0 {
            return fail("w", "must be ≥ 1");
        }
        if self.w_init < self.w {
            return fail("w_init", "must be ≥ w");
        }
        if self.n > self.w_init {
            return fail("n", "must be ≤ w_init");
        }
        if self.m_s == 0 {
            return fail("m_s", "must be ≥ 1");
        }
        if self.m_s > dim {
            return fail("m_s", &format!("must be ≤ N = {dim}"));
        }
        if self.z == 0 {
            return fail("z", "must be ≥ 1");
        }
        if self.basis_update_period == 0 {
            return fail("basis_update_period", "must be ≥ 1");
        }
        Ok(())
    }
}

/// The last `w` data columns, each tagged with its step index.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    capacity: usize,
    cols: VecDeque<(usize, DVector<f64>)>,
}

impl WindowBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, cols: VecDeque::with_capacity(capacity) }
    }

    /// Appends the column for `step`, evicting the oldest once full. Steps must
    /// be consecutive.
    pub fn push(&mut self, step: usize, col: DVector<f64>) -> Result<()> {
        if let Some(&(last, ref prev)) = self.cols.back() {
            if step != last + 1 {
                return Err(RomError::Parameter(format!("window step {step} does not follow {last}")));
            }
            if prev.len() != col.len() {
                return Err(RomError::Parameter("window column length changed".into()));
            }
        }
        if self.cols.len() == self.capacity {
            self.cols.pop_front();
        }
        self.cols.push_back((step, col));
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        self.cols.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn tags(&self) -> Vec<usize> {
        self.cols.iter().map(|(t, _)| *t).collect()
    }

    /// Columns oldest first.
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows = self.cols.front().map_or(0, |(_, c)| c.len());
        let mut m = DMatrix::zeros(rows, self.cols.len());
        for (j, (_, c)) in self.cols.iter().enumerate() {
            m.set_column(j, c);
        }
        m
    }
}

/// Sampling points `s` (in residual rank order) and the sorted union `g = s ∪ p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub samples: Vec<usize>,
    pub union: Vec<usize>,
}

impl SampleSet {
    pub fn new(samples: Vec<usize>, points: &PointSet, dim: usize) -> Result<Self> {
        check_indices(&samples, dim)?;
        let mut union: Vec<usize> = samples.iter().chain(points.indices()).copied().collect();
        union.sort_unstable();
        union.dedup();
        Ok(Self { samples, union })
    }

    /// Same samples, union recomputed for new interpolation points.
    pub fn with_points(&self, points: &PointSet) -> Self {
        let mut union: Vec<usize> = self.samples.iter().chain(points.indices()).copied().collect();
        union.sort_unstable();
        union.dedup();
        Self { samples: self.samples.clone(), union }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisUpdate {
    pub alpha: DVector<f64>,
    /// Unit 2-norm.
    pub beta: DVector<f64>,
}

/// Row 2-norms of the DEIM residual of the window and their descending order
/// (ties by ascending index).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub norms: Vec<f64>,
    pub order: Vec<usize>,
}

impl ResidualReport {
    pub fn from_norms(norms: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..norms.len()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        Self { norms, order }
    }
}

/// `f(V q~)` at `g`, interpolated elsewhere: `V[ğ,:] V[g,:]^+ f_g`.
///
/// `q_reduced` is the reduced state at step `k`. Records `|g|` evaluations.
pub fn estimate_column(
    model: &dyn FullModel,
    v: &DMatrix<f64>,
    q_reduced: &DVector<f64>,
    k: usize,
    g: &[usize],
    ledger: &mut EvalLedger,
) -> Result<DVector<f64>> {
    let n = v.ncols();
    if g.len() < n {
        return Err(RomError::DegenerateSampling { step: k });
    }
    let vg = sampled_rows(v, g);
    if !(condition_number(&vg)? <= MAX_POINT_CONDITION) {
        return Err(RomError::DegenerateSampling { step: k });
    }
    let (values, _) = sparse_rhs(model, v, q_reduced, k, g)?;
    ledger.record(k, EvalKind::SparseEstimate, g.len());
    if values.iter().any(|x| !x.is_finite()) {
        return Err(RomError::Divergence { step: k });
    }
    let fg = DMatrix::from_column_slice(g.len(), 1, &values);
    let coeff = lstsq(&vg, &fg)?;
    let mut col = v * coeff.column(0);
    for (&i, &val) in g.iter().zip(&values) {
        col[i] = val;
    }
    Ok(col)
}

/// Residual `F - V (P'V)^+ P'F` of a window, ranked by row norm.
pub fn residual_report(f: &DMatrix<f64>, v: &DMatrix<f64>, points: &PointSet) -> Result<ResidualReport> {
    let pv = sampled_rows(v, points.indices());
    let pf = f.select_rows(points.indices());
    let coeff = lstsq(&pv, &pf)?;
    let r = f - v * coeff;
    let norms = r.row_iter().map(|row| row.norm()).collect();
    Ok(ResidualReport::from_norms(norms))
}

/// Picks the `m_s` rows with the largest DEIM residual over a full window.
pub fn adapt_samples(
    window: &WindowBuffer,
    basis: &ReducedBasis,
    points: &PointSet,
    m_s: usize,
) -> Result<(SampleSet, ResidualReport)> {
    if !window.is_full() {
        return Err(RomError::Parameter("sampling adaptation needs a full window".into()));
    }
    let f = window.matrix();
    let report = residual_report(&f, basis.matrix(), points)?;
    if m_s == 0 || m_s > report.norms.len() {
        return Err(RomError::Parameter(format!("m_s = {m_s} outside [1, {}]", report.norms.len())));
    }
    let samples = report.order[..m_s].to_vec();
    let set = SampleSet::new(samples, points, basis.dim())?;
    Ok((set, report))
}

/// Outcome of one basis adaptation.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    /// `None` when `C C'` vanished and the basis was left as is.
    pub update: Option<BasisUpdate>,
    pub basis: DMatrix<f64>,
    /// `||V C - F||_F^2`
    pub objective_before: f64,
    /// `||(V + alpha beta') C - F||_F^2`
    pub objective_after: f64,
}

/// `||(V + alpha beta') C - F||_F^2` with `C = V'F`.
pub fn update_objective(v: &DMatrix<f64>, f: &DMatrix<f64>, alpha: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let c = v.tr_mul(f);
    ((v + alpha * beta.transpose()) * &c - f).norm_squared()
}

/// Optimal rank-one update of `V` for the data window `F`.
///
/// With `C = V'F` and `R = V C - F`, the objective for a fixed `beta` is
/// minimized by `alpha = -R C' beta / (beta' C C' beta)`, leaving
/// `||R||^2 - (beta' C R'R C' beta) / (beta' C C' beta)`; the best `beta` is the
/// top generalized eigenvector of `(C R'R C', C C')`.
pub fn adeim_update(v: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<UpdateOutcome> {
    if v.nrows() != f.nrows() {
        return Err(RomError::Parameter(format!(
            "basis has {} rows, window has {}",
            v.nrows(),
            f.nrows()
        )));
    }
    if f.ncols() == 0 {
        return Err(RomError::Parameter("empty window".into()));
    }
    let c = v.tr_mul(f);
    let r = v * &c - f;
    let objective_before = r.norm_squared();
    let rct = &r * c.transpose();
    let a = sym(rct.tr_mul(&rct));
    let b = sym(&c * c.transpose());

    let beta = match gen_eig_max(&a, &b) {
        Ok((_, beta)) => beta,
        Err(RomError::Degenerate(_)) => {
            return Ok(UpdateOutcome {
                update: None,
                basis: v.clone(),
                objective_before,
                objective_after: objective_before,
            })
        }
        Err(e) => return Err(e),
    };
    let denom = beta.dot(&(&b * &beta));
    let alpha = -(&rct * &beta) / denom;
    let objective_after = ((v + &alpha * beta.transpose()) * &c - f).norm_squared();
    let basis = orthonormalize(&(v + &alpha * beta.transpose()))?;
    Ok(UpdateOutcome { update: Some(BasisUpdate { alpha, beta }), basis, objective_before, objective_after })
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Per-step record of an adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    /// Full evaluation and sampling re-selection at this step.
    pub refresh: bool,
    /// The refresh was forced by rank-deficient sampled basis rows.
    pub forced_refresh: bool,
    /// Interpolation points used for the reduced step.
    pub points: usize,
    /// `|g|` on sparse steps, `N` on refresh steps.
    pub evaluated: usize,
    /// Read-set size of the sparse evaluation (0 on refresh steps).
    pub read_set: usize,
    /// Sampling points replaced at this refresh.
    pub sample_churn: Option<usize>,
    /// Largest residual row norm at this refresh.
    pub max_residual: Option<f64>,
    pub basis_updated: bool,
    /// `C C'` vanished, update skipped.
    pub update_degenerate: bool,
    pub objective_before: Option<f64>,
    pub objective_after: Option<f64>,
    /// `||V'V - I||_max` of the adapted basis.
    pub orthogonality_defect: Option<f64>,
    /// First and last step tag held by the window after this step.
    pub window_span: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct AadeimRun {
    /// Lifted trajectory `N x (K + 1)`; the first `w_init + 1` columns are full-model states.
    pub trajectory: DMatrix<f64>,
    pub ledger: EvalLedger,
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_basis: ReducedBasis,
}

/// Runs the adaptive reduced model over the model's full time grid.
pub fn run_aadeim(model: &dyn FullModel, config: &AadeimConfig) -> Result<AadeimRun> {
    run_aadeim_steps(model, config, model.time().steps)
}

pub fn run_aadeim_steps(model: &dyn FullModel, config: &AadeimConfig, steps: usize) -> Result<AadeimRun> {
    let dim = model.dim();
    config.validate(dim)?;
    let AadeimConfig { n, w_init, w, m_s, z, basis_update_period } = *config;
    if steps < w_init {
        return Err(RomError::Config(format!("time.steps = {steps} must be ≥ aadeim.w_init = {w_init}")));
    }
    let layout = model.layout();
    let mut ledger = EvalLedger::default();
    let mut traj = DMatrix::zeros(dim, steps + 1);

    // Full-model warm-up: states 0..=w_init.
    let mut q = model.initial_state();
    traj.set_column(0, &q);
    for k in 1..=w_init {
        q = model.step_full(&q, k - 1);
        ledger.record(k, EvalKind::FomInit, dim);
        if q.iter().any(|x| !x.is_finite()) {
            return Err(RomError::Divergence { step: k });
        }
        traj.set_column(k, &q);
    }
    let snapshots = traj.columns(0, w_init + 1).into_owned();
    let mut basis = ReducedBasis::new(pod(&snapshots, n)?.basis)?;
    let mut points = select_points(&basis, &layout)?;

    let mut diagnostics = Vec::with_capacity(steps.saturating_sub(w_init));
    if steps == w_init {
        return Ok(AadeimRun { trajectory: traj, ledger, diagnostics, final_basis: basis });
    }

    // Window tags w_init+2-w ..= w_init hold states; the first loop step completes it.
    let start = w_init + 1;
    let mut window = WindowBuffer::new(w);
    for j in (start + 1 - w)..start {
        window.push(j, traj.column(j).into_owned())?;
    }
    let mut q_red = basis.project(&traj.column(w_init).into_owned());
    let mut samples: Option<SampleSet> = None;

    for k in start..=steps {
        let mut d = StepDiagnostics {
            step: k,
            refresh: false,
            forced_refresh: false,
            points: points.len(),
            evaluated: 0,
            read_set: 0,
            sample_churn: None,
            max_residual: None,
            basis_updated: false,
            update_degenerate: false,
            objective_before: None,
            objective_after: None,
            orthogonality_defect: None,
            window_span: (0, 0),
        };

        q_red = deim_step(model, &basis, &points, &q_red, k - 1, &mut ledger)?;
        let lifted = basis.lift(&q_red);
        traj.set_column(k, &lifted);

        let mut refresh = k % z == 0 || k == start;
        let mut column = None;
        if !refresh {
            let set = samples.as_ref().expect("first step refreshes").with_points(&points);
            match estimate_column(model, basis.matrix(), &q_red, k, &set.union, &mut ledger) {
                Ok(col) => {
                    d.evaluated = set.union.len();
                    d.read_set = model.read_set(&set.union)?.len();
                    column = Some(col);
                }
                Err(RomError::DegenerateSampling { .. }) => {
                    refresh = true;
                    d.forced_refresh = true;
                }
                Err(e) => return Err(e),
            }
        }
        if refresh {
            let full = model.step_full(&lifted, k);
            ledger.record(k, EvalKind::FullRefresh, dim);
            if full.iter().any(|x| !x.is_finite()) {
                return Err(RomError::Divergence { step: k });
            }
            window.push(k, full)?;
            let (set, report) = adapt_samples(&window, &basis, &points, m_s)?;
            d.refresh = true;
            d.evaluated = dim;
            d.max_residual = report.order.first().map(|&i| report.norms[i]);
            d.sample_churn = samples.as_ref().map(|old| churn(&old.samples, &set.samples));
            samples = Some(set);
        } else {
            window.push(k, column.expect("sparse column"))?;
        }
        let tags = window.tags();
        d.window_span = (tags[0], tags[tags.len() - 1]);

        if (k - start) % basis_update_period == 0 {
            let out = adeim_update(basis.matrix(), &window.matrix())?;
            d.objective_before = Some(out.objective_before);
            d.objective_after = Some(out.objective_after);
            if out.update.is_some() {
                let next = ReducedBasis::new(out.basis)?;
                let gram = next.matrix().tr_mul(next.matrix()) - DMatrix::identity(n, n);
                d.orthogonality_defect = Some(gram.amax());
                q_red = next.project(&lifted);
                basis = next;
                points = select_points(&basis, &layout)?;
                d.basis_updated = true;
            } else {
                d.update_degenerate = true;
            }
        }
        if q_red.iter().any(|x| !x.is_finite()) {
            return Err(RomError::Divergence { step: k });
        }
        diagnostics.push(d);
    }

    Ok(AadeimRun { trajectory: traj, ledger, diagnostics, final_basis: basis })
}

fn churn(old: &[usize], new: &[usize]) -> usize {
    let mut a = old.to_vec();
    a.sort_unstable();
    new.iter().filter(|i| a.binary_search(i).is_err()).count()
}
