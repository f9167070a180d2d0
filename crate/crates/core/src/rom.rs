//! Static reduced model: POD basis, QDEIM interpolation points and the DEIM
//! time stepper `q~_{k+1} = (P'V)^+ P' f(V q~_k)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{EvalKind, EvalLedger};
use crate::error::{Result, RomError};
use crate::fom::FullModel;
use crate::numerics::{self, condition_number, lstsq, pivoted_qr_pivots};

/// Largest admissible condition number of `P'V`.
pub const MAX_POINT_CONDITION: f64 = 1e12;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Partition of the state vector into named, contiguous variable blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    vars: Vec<(String, Range<usize>)>,
}

impl VariableLayout {
    /// Blocks must be non-empty, in order, and contiguous starting at 0.
    pub fn new(vars: Vec<(String, Range<usize>)>) -> Result<Self> {
        if vars.is_empty() {
            return Err(RomError::Parameter("layout has no variables".into()));
        }
        let mut next = 0;
        for (name, r) in &vars {
            if r.start != next || r.end <= r.start {
                return Err(RomError::Parameter(format!(
                    "variable `{name}` range {r:?} does not continue the partition at {next}"
                )));
            }
            next = r.end;
        }
        Ok(Self { vars })
    }

    pub fn single(name: &str, dim: usize) -> Self {
        Self { vars: vec![(name.to_string(), 0..dim)] }
    }

    pub fn dim(&self) -> usize {
        self.vars.last().map_or(0, |(_, r)| r.end)
    }

    pub fn vars(&self) -> &[(String, Range<usize>)] {
        &self.vars
    }

    pub fn range_of(&self, name: &str) -> Option<Range<usize>> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, r)| r.clone())
    }
}

/// Orthonormal basis matrix `V` (`N x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    v: DMatrix<f64>,
}

impl ReducedBasis {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        numerics::ensure_finite(&v, "basis")?;
        let n = v.ncols();
        if n == 0 || v.nrows() < n {
            return Err(RomError::Parameter(format!("invalid basis shape {}x{n}", v.nrows())));
        }
        let defect = (v.transpose() * &v - DMatrix::identity(n, n)).amax();
        if defect > ORTHONORMAL_TOL {
            return Err(RomError::Parameter(format!("basis is not orthonormal (defect {defect:.2e})")));
        }
        Ok(Self { v })
    }

    /// POD basis of dimension `n` from a snapshot matrix.
    pub fn from_snapshots(snapshots: &DMatrix<f64>, n: usize) -> Result<Self> {
        Ok(Self { v: numerics::pod(snapshots, n)?.basis })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.v.ncols()
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// `V' q`
    pub fn project(&self, q: &DVector<f64>) -> DVector<f64> {
        self.v.tr_mul(q)
    }

    /// `V q~`
    pub fn lift(&self, q_reduced: &DVector<f64>) -> DVector<f64> {
        &self.v * q_reduced
    }
}

/// Sorted, distinct interpolation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    points: Vec<usize>,
}

impl PointSet {
    pub fn new(mut points: Vec<usize>, dim: usize) -> Result<Self> {
        crate::fom::check_indices(&points, dim)?;
        points.sort_unstable();
        Ok(Self { points })
    }

    pub fn indices(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// QDEIM points chosen separately on every variable block of `V`, merged into
/// one sorted set.
pub fn select_points(basis: &ReducedBasis, layout: &VariableLayout) -> Result<PointSet> {
    let v = basis.matrix();
    if layout.dim() != v.nrows() {
        return Err(RomError::Parameter(format!(
            "layout covers {} components but the basis has {} rows",
            layout.dim(),
            v.nrows()
        )));
    }
    let n = basis.n();
    let mut points = Vec::with_capacity(n * layout.vars().len());
    for (name, r) in layout.vars() {
        if r.len() < n {
            return Err(RomError::Parameter(format!(
                "variable `{name}` has {} rows, fewer than n = {n}",
                r.len()
            )));
        }
        let block_t = v.rows(r.start, r.len()).transpose();
        let piv = pivoted_qr_pivots(&block_t)?;
        points.extend(piv.iter().take(n).map(|&p| r.start + p));
    }
    points.sort_unstable();
    points.dedup();
    Ok(PointSet { points })
}

/// `P'V`: the basis rows at the given indices.
pub fn sampled_rows(v: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    v.select_rows(idx)
}

/// Evaluates `f(V q~)` at `idx`, reconstructing `V q~` only on the read set.
pub(crate) fn sparse_rhs(
    model: &dyn FullModel,
    v: &DMatrix<f64>,
    q_reduced: &DVector<f64>,
    k: usize,
    idx: &[usize],
) -> Result<(Vec<f64>, Vec<usize>)> {
    let read = model.read_set(idx)?;
    let mut lifted = vec![0.0; model.dim()];
    for &r in &read {
        lifted[r] = v.row(r).dot(&q_reduced.transpose());
    }
    let (values, read) = model.step_components(&lifted, k, idx)?;
    Ok((values, read))
}

/// One DEIM step from `q~_k` (state index `k`) to `q~_{k+1}`. Records the `m`
/// evaluated components under step `k + 1`.
pub fn deim_step(
    model: &dyn FullModel,
    basis: &ReducedBasis,
    points: &PointSet,
    q_reduced: &DVector<f64>,
    k: usize,
    ledger: &mut EvalLedger,
) -> Result<DVector<f64>> {
    let pv = sampled_rows(basis.matrix(), points.indices());
    let cond = condition_number(&pv)?;
    if !(cond <= MAX_POINT_CONDITION) {
        return Err(RomError::IllConditioned { step: k + 1, cond });
    }
    let (values, _) = sparse_rhs(model, basis.matrix(), q_reduced, k, points.indices())?;
    ledger.record(k + 1, EvalKind::RomStep, values.len());
    if values.iter().any(|x| !x.is_finite()) {
        return Err(RomError::Divergence { step: k + 1 });
    }
    let rhs = DMatrix::from_column_slice(values.len(), 1, &values);
    let next = lstsq(&pv, &rhs)?.column(0).into_owned();
    if next.iter().any(|x| !x.is_finite()) {
        return Err(RomError::Divergence { step: k + 1 });
    }
    Ok(next)
}

/// Result of [`run_static`].
#[derive(Debug, Clone)]
pub struct StaticRun {
    /// Reduced trajectory, `n x (K + 1)`.
    pub reduced: DMatrix<f64>,
    pub ledger: EvalLedger,
}

impl StaticRun {
    /// Lifted trajectory `V Q~`.
    pub fn lifted(&self, basis: &ReducedBasis) -> DMatrix<f64> {
        basis.matrix() * &self.reduced
    }
}

/// Runs the static DEIM reduced model for `steps` steps.
///
/// `(P'V)^+` is factored once since `V` and `P` never change.
pub fn run_static(
    model: &dyn FullModel,
    basis: &ReducedBasis,
    points: &PointSet,
    q0_reduced: &DVector<f64>,
    steps: usize,
) -> Result<StaticRun> {
    let n = basis.n();
    if q0_reduced.len() != n {
        return Err(RomError::Parameter(format!(
            "initial reduced state has length {}, basis dimension is {n}",
            q0_reduced.len()
        )));
    }
    if basis.dim() != model.dim() {
        return Err(RomError::Parameter(format!(
            "basis has {} rows, model dimension is {}",
            basis.dim(),
            model.dim()
        )));
    }
    let pv = sampled_rows(basis.matrix(), points.indices());
    let cond = condition_number(&pv)?;
    if !(cond <= MAX_POINT_CONDITION) {
        return Err(RomError::IllConditioned { step: 1, cond });
    }
    let m = points.len();
    let pinv = lstsq(&pv, &DMatrix::identity(m, m))?;

    let mut ledger = EvalLedger::default();
    let mut reduced = DMatrix::zeros(n, steps + 1);
    reduced.set_column(0, q0_reduced);
    let mut q = q0_reduced.clone();
    for k in 0..steps {
        let (values, _) = sparse_rhs(model, basis.matrix(), &q, k, points.indices())?;
        ledger.record(k + 1, EvalKind::RomStep, m);
        q = &pinv * DVector::from_vec(values);
        if q.iter().any(|x| !x.is_finite()) {
            return Err(RomError::Divergence { step: k + 1 });
        }
        reduced.set_column(k + 1, &q);
    }
    Ok(StaticRun { reduced, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{AdvectionModel, AdvectionParams, Profile, TimeSpec};

    fn identity_cols(rows: usize, cols: &[usize]) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(rows, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            v[(c, j)] = 1.0;
        }
        v
    }

    fn advection(nx: usize) -> AdvectionModel {
        let dx = 1.0 / nx as f64;
        let profile = Profile::Gaussian { center: 0.5, width: 0.1, amplitude: 1.0, offset: 0.0 };
        AdvectionModel::new(AdvectionParams { nx, a: 1.0, dx, profile }, TimeSpec::new(0.5 * dx, 10).unwrap())
            .unwrap()
    }

    #[test]
    fn layout_validation() {
        assert!(VariableLayout::new(vec![("a".into(), 0..3), ("b".into(), 3..5)]).is_ok());
        assert!(VariableLayout::new(vec![("a".into(), 0..3), ("b".into(), 4..5)]).is_err());
        assert!(VariableLayout::new(vec![("a".into(), 1..3)]).is_err());
        assert!(VariableLayout::new(vec![]).is_err());
    }

    #[test]
    fn points_single_variable_identity() {
        let basis = ReducedBasis::new(identity_cols(5, &[0, 1, 2])).unwrap();
        let p = select_points(&basis, &VariableLayout::single("q", 5)).unwrap();
        assert_eq!(p.indices(), &[0, 1, 2]);
    }

    #[test]
    fn points_two_variables_take_union() {
        // each block's basis is its local e1, e2 (normalized over both blocks)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = DMatrix::zeros(8, 2);
        v[(0, 0)] = s;
        v[(4, 0)] = s;
        v[(1, 1)] = s;
        v[(5, 1)] = s;
        let basis = ReducedBasis::new(v).unwrap();
        let layout = VariableLayout::new(vec![("a".into(), 0..4), ("b".into(), 4..8)]).unwrap();
        let p = select_points(&basis, &layout).unwrap();
        assert_eq!(p.indices(), &[0, 1, 4, 5]);
    }

    #[test]
    fn points_reject_layout_mismatch() {
        let basis = ReducedBasis::new(identity_cols(5, &[0, 1])).unwrap();
        assert!(matches!(
            select_points(&basis, &VariableLayout::single("q", 6)),
            Err(RomError::Parameter(_))
        ));
        let short = VariableLayout::new(vec![("a".into(), 0..1), ("b".into(), 1..5)]).unwrap();
        assert!(matches!(select_points(&basis, &short), Err(RomError::Parameter(_))));
    }

    #[test]
    fn deim_without_reduction_is_the_full_step() {
        let model = advection(6);
        let basis = ReducedBasis::new(DMatrix::identity(6, 6)).unwrap();
        let points = PointSet::new((0..6).collect(), 6).unwrap();
        let q = model.initial_state();
        let mut ledger = EvalLedger::default();
        let next = deim_step(&model, &basis, &points, &q, 0, &mut ledger).unwrap();
        assert!((next - model.step_full(&q, 0)).amax() < 1e-14);
        assert_eq!(ledger.total(), 6);
    }

    #[test]
    fn deim_rejects_ill_conditioned_points() {
        let model = advection(6);
        let basis = ReducedBasis::new(identity_cols(6, &[0, 1])).unwrap();
        let points = PointSet::new(vec![0, 3], 6).unwrap();
        let q = DVector::from_vec(vec![1.0, 2.0]);
        let err = deim_step(&model, &basis, &points, &q, 4, &mut EvalLedger::default()).unwrap_err();
        assert!(matches!(err, RomError::IllConditioned { step: 5, .. }));
    }

    #[test]
    fn static_run_with_zero_steps() {
        let model = advection(6);
        let basis = ReducedBasis::new(identity_cols(6, &[0, 1])).unwrap();
        let points = PointSet::new(vec![0, 1], 6).unwrap();
        let q0 = DVector::from_vec(vec![1.0, 2.0]);
        let run = run_static(&model, &basis, &points, &q0, 0).unwrap();
        assert_eq!(run.reduced.ncols(), 1);
        assert_eq!(run.reduced.column(0), q0.column(0));
        assert_eq!(run.ledger.total(), 0);
    }
}
