//! Reference oracles for the romkit test suites.
//!
//! Every routine here deliberately takes a different numerical route than the
//! library code it checks (Gram eigenvalues instead of SVD, Gram-Schmidt
//! instead of Householder, alternating least squares instead of a generalized
//! eigenproblem, Cholesky whitening instead of eigen-whitening).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random `rows x cols` matrix with orthonormal columns.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    random_matrix(rng, rows, cols).qr().q()
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// `sum_{i > n} sigma_i^2` from the eigenvalues of the Gram matrix.
pub fn pod_tail_energy(q: &DMatrix<f64>, n: usize) -> f64 {
    let gram = if q.nrows() <= q.ncols() { q * q.transpose() } else { q.transpose() * q };
    let ev = sym_eigenvalues_desc(&gram);
    q.norm_squared() - ev[..n].iter().sum::<f64>()
}

/// Greedy column selection by largest Gram-Schmidt residual norm.
pub fn greedy_pivots(m: &DMatrix<f64>) -> Vec<usize> {
    let steps = m.nrows().min(m.ncols());
    let mut chosen: Vec<usize> = Vec::new();
    let mut q: Vec<DVector<f64>> = Vec::new();
    for _ in 0..steps {
        let residuals: Vec<(usize, DVector<f64>)> = (0..m.ncols())
            .filter(|c| !chosen.contains(c))
            .map(|c| {
                let mut r = m.column(c).into_owned();
                // twice is enough
                for _ in 0..2 {
                    for b in &q {
                        let d = b.dot(&r);
                        r -= b * d;
                    }
                }
                (c, r)
            })
            .collect();
        let max = residuals.iter().map(|(_, r)| r.norm()).fold(0.0, f64::max);
        // lowest index among norms within 1e-14 of the largest
        let (c, r) = residuals.into_iter().find(|(_, r)| r.norm() >= max * (1.0 - 1e-14)).expect("a remaining column");
        let nrm = r.norm();
        chosen.push(c);
        if nrm > 0.0 {
            q.push(r / nrm);
        }
    }
    chosen
}

/// `A^+` through the eigendecomposition of `A'A`, keeping `rank` eigenpairs.
pub fn pseudo_inverse_via_gram(a: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.transpose() * a);
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[j].partial_cmp(&e.eigenvalues[i]).unwrap());
    let mut inv = DMatrix::zeros(a.ncols(), a.ncols());
    for &i in &idx[..rank] {
        let v = e.eigenvectors.column(i);
        inv += v * v.transpose() / e.eigenvalues[i];
    }
    inv * a.transpose()
}

/// Largest eigenvalue of the pencil `(A, B)` for SPD `B` via Cholesky whitening.
pub fn gen_eig_max_cholesky(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let l = b.clone().cholesky().expect("B must be SPD").l();
    let linv = l.clone().try_inverse().expect("invertible factor");
    let m = &linv * a * linv.transpose();
    sym_eigenvalues_desc(&((&m + m.transpose()) * 0.5))[0]
}

/// `||(V + alpha beta') C - F||_F^2` with `C = V'F`.
pub fn rank_one_objective(v: &DMatrix<f64>, f: &DMatrix<f64>, alpha: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let c = v.transpose() * f;
    ((v + alpha * beta.transpose()) * &c - f).norm_squared()
}

/// Best objective of the rank-one update problem found by alternating least
/// squares from `restarts` random starting directions. Each run stops once the
/// relative objective change drops below `1e-12`.
pub fn als_rank_one(v: &DMatrix<f64>, f: &DMatrix<f64>, restarts: usize, rng: &mut ChaCha8Rng) -> f64 {
    let c = v.transpose() * f;
    let r = v * &c - f;
    let n = v.ncols();
    let mut best = r.norm_squared();
    for _ in 0..restarts {
        let mut beta = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut prev = f64::INFINITY;
        for _ in 0..200_000 {
            // alpha-step: least squares in alpha for fixed beta
            let u = c.transpose() * &beta;
            let uu = u.norm_squared();
            if uu == 0.0 {
                break;
            }
            let alpha = -(&r * &u) / uu;
            // beta-step: C'beta ~ -R'alpha / |alpha|^2 in the least-squares sense
            let aa = alpha.norm_squared();
            if aa == 0.0 {
                break;
            }
            let target = -(r.transpose() * &alpha) / aa;
            let normal = &c * c.transpose();
            let Some(chol) = normal.cholesky() else { break };
            beta = chol.solve(&(&c * target));
            let obj = (&r + &alpha * (c.transpose() * &beta).transpose()).norm_squared();
            let done = (prev - obj).abs() <= 1e-12 * obj.max(f64::MIN_POSITIVE);
            prev = obj;
            if done {
                break;
            }
        }
        best = best.min(prev);
    }
    best
}
