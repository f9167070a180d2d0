#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use romkit::fom::{AdvectionModel, AdvectionParams, FullModel, Grid, Profile, TimeSpec};
use romkit::rom::VariableLayout;

/// `q_{k+1} = A q_k` with a dense stencil.
pub struct DenseLinear {
    pub a: DMatrix<f64>,
    pub q0: DVector<f64>,
    pub steps: usize,
}

impl FullModel for DenseLinear {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn time(&self) -> TimeSpec {
        TimeSpec { dt: 1.0, steps: self.steps }
    }

    fn grid(&self) -> Grid {
        Grid { nx: self.dim(), dx: 1.0 }
    }

    fn layout(&self) -> VariableLayout {
        VariableLayout::single("q", self.dim())
    }

    fn initial_state(&self) -> DVector<f64> {
        self.q0.clone()
    }

    fn stencil(&self, _i: usize, out: &mut Vec<usize>) {
        out.extend(0..self.dim());
    }

    fn component(&self, q: &[f64], _k: usize, i: usize) -> f64 {
        (0..q.len()).map(|j| self.a[(i, j)] * q[j]).sum()
    }
}

/// Upwind advection of a single Fourier mode plus a constant. The discrete
/// trajectory stays in `span{1, cos, sin}` of that mode.
pub fn fourier_advection(nx: usize, steps: usize, mode: usize) -> AdvectionModel {
    let params = AdvectionParams {
        nx,
        a: 1.0,
        dx: 1.0 / nx as f64,
        profile: Profile::Fourier { mode, amplitude: 1.0, offset: 0.5 },
    };
    AdvectionModel::new(params, TimeSpec::new(0.5 / nx as f64, steps).unwrap()).unwrap()
}

/// Orthonormal basis of the invariant subspace of [`fourier_advection`].
pub fn fourier_basis(nx: usize, mode: usize) -> DMatrix<f64> {
    let theta = |i: usize| 2.0 * std::f64::consts::PI * mode as f64 * (i as f64 + 0.5) / nx as f64;
    let m = DMatrix::from_fn(nx, 3, |i, j| match j {
        0 => 1.0,
        1 => theta(i).cos(),
        _ => theta(i).sin(),
    });
    m.qr().q()
}

pub fn pulse_advection(nx: usize, steps: usize) -> AdvectionModel {
    let params = AdvectionParams {
        nx,
        a: 1.0,
        dx: 1.0 / nx as f64,
        profile: Profile::Gaussian { center: 0.25, width: 0.02, amplitude: 1.0, offset: 0.0 },
    };
    AdvectionModel::new(params, TimeSpec::new(0.5 / nx as f64, steps).unwrap()).unwrap()
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares `contents` with a committed golden file. With `ROMKIT_BLESS=1` the
/// file is (re)written instead.
pub fn golden_text(name: &str, contents: &str) -> String {
    let path = golden_path(name);
    if std::env::var_os("ROMKIT_BLESS").is_some() {
        std::fs::write(&path, contents).unwrap();
    }
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()))
}
