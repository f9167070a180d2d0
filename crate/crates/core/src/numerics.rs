//! Dense linear-algebra kernels: POD, column-pivoted QR pivots, minimum-norm
//! least squares, a largest-eigenpair generalized symmetric eigensolver and
//! orthonormalization.
//!
//! All matrices are `nalgebra` column-major `DMatrix<f64>`. Every computed basis
//! or eigenvector is normalized with [`fix_sign`] so results are reproducible
//! bit for bit.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Result, RomError};

/// Relative tolerance under which two pivot-column norms are treated as equal.
const PIVOT_TIE_RTOL: f64 = 1e-14;
/// Symmetry tolerance of the generalized eigensolver inputs (relative to the largest entry).
const SYMMETRY_TOL: f64 = 1e-12;
/// B-eigenvalues below this fraction of the largest one are dropped.
const GEN_EIG_CUTOFF: f64 = 1e-12;
/// Smallest admissible singular value ratio for [`orthonormalize`].
const RANK_RTOL: f64 = 1e-12;

/// Output of [`pod`].
#[derive(Debug, Clone)]
pub struct Pod {
    /// Leading left singular vectors, `N x n`.
    pub basis: DMatrix<f64>,
    /// All `min(N, M)` singular values, non-increasing.
    pub sigma: DVector<f64>,
}

pub fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(RomError::Parameter(format!("{what} contains non-finite entries")))
    }
}

/// Scales `v` by -1 if needed so that its largest-magnitude entry is positive.
/// Ties go to the lowest index.
pub fn fix_sign(mut v: nalgebra::DVectorViewMut<'_, f64>) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        fix_sign(m.column_mut(j));
    }
}

/// SVD with singular values sorted descending, ties kept in the order the
/// bidiagonal solver produced them.
pub(crate) fn sorted_svd(m: &DMatrix<f64>, compute_u: bool, compute_v: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let (r, c) = m.shape();
    let max_iter = 200 * r.max(c).max(1);
    let eps = f64::EPSILON * 5.0;
    let mut svd = SVD::try_new_unordered(m.clone(), compute_u, compute_v, eps, max_iter)
        .ok_or_else(|| RomError::Numerical(format!("SVD of {r}x{c} matrix did not converge")))?;

    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    svd.singular_values = DVector::from_iterator(k, order.iter().map(|&i| svd.singular_values[i]));
    if let Some(u) = svd.u.as_mut() {
        *u = u.select_columns(&order);
    }
    if let Some(vt) = svd.v_t.as_mut() {
        *vt = vt.select_rows(&order);
    }
    Ok(svd)
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.is_empty() {
        return Ok(DVector::zeros(0));
    }
    Ok(sorted_svd(m, false, false)?.singular_values)
}

/// 2-norm condition number; infinite for rank-deficient or empty matrices.
pub fn condition_number(m: &DMatrix<f64>) -> Result<f64> {
    let s = singular_values(m)?;
    if s.is_empty() || s[s.len() - 1] == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(s[0] / s[s.len() - 1])
}

/// Proper orthogonal decomposition of a snapshot matrix.
pub fn pod(snapshots: &DMatrix<f64>, n: usize) -> Result<Pod> {
    let (rows, cols) = snapshots.shape();
    let kmax = rows.min(cols);
    if n == 0 || n > kmax {
        return Err(RomError::Parameter(format!(
            "POD dimension n = {n} must lie in [1, {kmax}] for a {rows}x{cols} snapshot matrix"
        )));
    }
    ensure_finite(snapshots, "snapshot matrix")?;
    let svd = sorted_svd(snapshots, true, false)?;
    let u = svd.u.expect("left singular vectors requested");
    let mut basis = u.columns(0, n).into_owned();
    fix_column_signs(&mut basis);
    Ok(Pod { basis, sigma: svd.singular_values })
}

/// Column order chosen by a column-pivoted Householder QR of `m` (0-based
/// column indices, `min(rows, cols)` of them).
///
/// Residual column norms are recomputed from scratch at every step instead of
/// being downdated, and ties within a relative `1e-14` go to the lowest
/// original column index.
pub fn pivoted_qr_pivots(m: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(RomError::Parameter("pivoted QR of an empty matrix".into()));
    }
    ensure_finite(m, "pivoted QR input")?;
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let steps = rows.min(cols);

    for j in 0..steps {
        let norms: Vec<f64> = (j..cols).map(|c| a.column(c).rows(j, rows - j).norm()).collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        let thresh = max * (1.0 - PIVOT_TIE_RTOL);
        let mut pick = None;
        for (off, &nrm) in norms.iter().enumerate() {
            if nrm >= thresh {
                let c = j + off;
                match pick {
                    Some(p) if perm[p] <= perm[c] => {}
                    _ => pick = Some(c),
                }
            }
        }
        let p = pick.expect("at least one candidate column");
        if p != j {
            a.swap_columns(j, p);
            perm.swap(j, p);
        }

        // Householder reflector zeroing a[j+1.., j].
        let x = a.column(j).rows(j, rows - j).into_owned();
        let alpha = x.norm();
        if alpha == 0.0 || rows - j == 1 {
            continue;
        }
        let mut v = x;
        let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += s * alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..cols {
            let mut col = a.column_mut(c);
            let mut col = col.rows_mut(j, rows - j);
            let d = v.dot(&col) * 2.0 / vnorm2;
            col.axpy(-d, &v, 1.0);
        }
    }
    perm.truncate(steps);
    Ok(perm)
}

/// Minimum-norm solution of `min ||A X - B||_F`.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(RomError::Parameter(format!(
            "lstsq dimension mismatch: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_finite(a, "lstsq matrix A")?;
    ensure_finite(b, "lstsq right-hand side B")?;
    if a.is_empty() {
        return Ok(DMatrix::zeros(a.ncols(), b.ncols()));
    }
    let svd = sorted_svd(a, true, true)?;
    let smax = svd.singular_values[0];
    let cutoff = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, cutoff).map_err(|e| RomError::Numerical(e.to_string()))
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(RomError::Parameter(format!("{name} must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax();
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(RomError::Parameter(format!("{name} is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Largest eigenpair of the symmetric-definite pencil `(A, B)`: maximizes the
/// Rayleigh quotient `v'Av / v'Bv` over the range of `B`.
///
/// The pencil is whitened with the eigendecomposition of `B`, keeping only the
/// eigenvalues above `1e-12` times the largest. The returned `v` has unit
/// 2-norm and `lambda` is the quotient it attains.
pub fn gen_eig_max(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    check_symmetric(a, "A")?;
    check_symmetric(b, "B")?;
    if a.shape() != b.shape() {
        return Err(RomError::Parameter("A and B must have the same shape".into()));
    }
    ensure_finite(a, "A")?;
    ensure_finite(b, "B")?;
    let n = a.nrows();
    if n == 0 {
        return Err(RomError::Parameter("empty pencil".into()));
    }

    let eb = SymmetricEigen::new(b.clone());
    let lmax = eb.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lmax > 0.0) || b.amax() == 0.0 {
        return Err(RomError::Degenerate("normalization matrix B is numerically zero".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| eb.eigenvalues[i] > GEN_EIG_CUTOFF * lmax).collect();

    // W = U_r diag(lambda_r^{-1/2})
    let mut w = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / eb.eigenvalues[i].sqrt();
        w.set_column(c, &(eb.eigenvectors.column(i) * s));
    }
    let mut m = w.transpose() * a * &w;
    m = (&m + m.transpose()) * 0.5;
    let em = SymmetricEigen::new(m);
    let top = em.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tie = top.abs().max(f64::MIN_POSITIVE) * 1e-12;
    let best = (0..em.eigenvalues.len())
        .find(|&i| em.eigenvalues[i] >= top - tie)
        .expect("non-empty spectrum");

    let mut v = &w * em.eigenvectors.column(best);
    let nrm = v.norm();
    if !(nrm > 0.0) || !nrm.is_finite() {
        return Err(RomError::Numerical("generalized eigenvector vanished".into()));
    }
    v /= nrm;
    fix_sign(v.column_mut(0));
    let lambda = v.dot(&(a * &v)) / v.dot(&(b * &v));
    Ok((lambda, v))
}

/// Orthonormal basis with the same range as `v` (thin Householder QR, then the
/// sign convention on each column).
pub fn orthonormalize(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = v.shape();
    if cols == 0 || rows < cols {
        return Err(RomError::Parameter(format!("cannot orthonormalize a {rows}x{cols} matrix")));
    }
    ensure_finite(v, "basis")?;
    let qr = v.clone().qr();
    let r = qr.r();
    let s = singular_values(&r)?;
    if !(s[cols - 1] > RANK_RTOL * s[0]) {
        let rank = s.iter().filter(|&&x| x > RANK_RTOL * s[0]).count();
        return Err(RomError::Numerical(format!(
            "basis with {cols} columns is rank deficient (numerical rank {rank})"
        )));
    }
    let mut q = qr.q();
    fix_column_signs(&mut q);
    Ok(q)
}
