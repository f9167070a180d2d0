//! Full-order models `q_{k+1} = f(q_k)`.
//!
//! A model exposes each output component `f_i` as a function of a small stencil
//! of input components. Full evaluation and sparse evaluation are both built on
//! the same per-component kernel, so a sparse evaluation is bitwise identical to
//! the corresponding slice of a full evaluation.
//!
//! Step-index convention: `step_full(q, k)` maps the state at step `k` to the
//! state at step `k + 1`; time-dependent boundary data is evaluated at `k * dt`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RomError};
use crate::rom::VariableLayout;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub dt: f64,
    pub steps: usize,
}

impl TimeSpec {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(RomError::Config(format!("model.dt: must be > 0, got {dt}")));
        }
        if steps == 0 {
            return Err(RomError::Config("model.steps: must be ≥ 1".into()));
        }
        Ok(Self { dt, steps })
    }
}

/// Initial-condition descriptor. Coordinates are cell centers `x_i = (i + 1/2) dx`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `offset + amplitude * exp(-((x - center) / width)^2)`
    Gaussian { center: f64, width: f64, amplitude: f64, offset: f64 },
    /// `high` for `x < location`, `low` otherwise.
    Step { location: f64, low: f64, high: f64 },
    /// `offset + amplitude * cos(2 pi mode x / L)` on a periodic domain of length `L`.
    Fourier { mode: usize, amplitude: f64, offset: f64 },
    /// Flame front: fresh mixture (`Y = 1`) left of `location`, burnt gas right of
    /// it, smoothed with a `tanh` of the given width.
    Front { location: f64, width: f64 },
}

/// Uniform 1D cell-centered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub dx: f64,
}

impl Grid {
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn length(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    /// Nearest cell to `x`; a point halfway between two centers maps to the lower cell.
    pub fn nearest_cell(&self, x: f64) -> Result<usize> {
        if !(x >= 0.0 && x <= self.length()) {
            return Err(RomError::Parameter(format!(
                "probe location {x} outside the domain [0, {}]",
                self.length()
            )));
        }
        let s = x / self.dx - 0.5;
        let lo = s.floor();
        let i = if s - lo > 0.5 { lo + 1.0 } else { lo };
        Ok((i.max(0.0) as usize).min(self.nx - 1))
    }
}

/// The discrete-time map of a full-order model.
pub trait FullModel {
    /// State dimension `N`.
    fn dim(&self) -> usize;

    fn time(&self) -> TimeSpec;

    fn grid(&self) -> Grid;

    /// Partition of the state into physical variables.
    fn layout(&self) -> VariableLayout;

    fn initial_state(&self) -> DVector<f64>;

    /// Appends the input components that output component `i` reads.
    fn stencil(&self, i: usize, out: &mut Vec<usize>);

    /// Output component `i` of `f(q)` at step `k`. Only the entries of `q` in
    /// `stencil(i)` are read.
    fn component(&self, q: &[f64], k: usize, i: usize) -> f64;

    /// Sorted union of `idx` and the stencils of its entries.
    fn read_set(&self, idx: &[usize]) -> Result<Vec<usize>> {
        check_indices(idx, self.dim())?;
        let mut out = Vec::with_capacity(4 * idx.len());
        for &i in idx {
            out.push(i);
            self.stencil(i, &mut out);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Evaluates `f(q)[idx]` and returns it with the read set it consulted.
    fn step_components(&self, q: &[f64], k: usize, idx: &[usize]) -> Result<(Vec<f64>, Vec<usize>)> {
        if q.len() != self.dim() {
            return Err(RomError::Parameter(format!(
                "state has length {}, model dimension is {}",
                q.len(),
                self.dim()
            )));
        }
        let read = self.read_set(idx)?;
        let values = idx.iter().map(|&i| self.component(q, k, i)).collect();
        Ok((values, read))
    }

    fn step_full(&self, q: &DVector<f64>, k: usize) -> DVector<f64> {
        assert_eq!(q.len(), self.dim(), "state length does not match model dimension");
        let s = q.as_slice();
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.component(s, k, i)))
    }
}

pub(crate) fn check_indices(idx: &[usize], dim: usize) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
        return Err(RomError::Parameter(format!("index {bad} out of range for dimension {dim}")));
    }
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(RomError::Parameter(format!("duplicate index {}", w[0])));
    }
    Ok(())
}

/// Runs the model from its initial state; returns the `N x (K + 1)` trajectory.
pub fn simulate(model: &dyn FullModel) -> nalgebra::DMatrix<f64> {
    simulate_steps(model, model.time().steps)
}

pub fn simulate_steps(model: &dyn FullModel, steps: usize) -> nalgebra::DMatrix<f64> {
    let mut traj = nalgebra::DMatrix::zeros(model.dim(), steps + 1);
    let mut q = model.initial_state();
    traj.set_column(0, &q);
    for k in 0..steps {
        q = model.step_full(&q, k);
        traj.set_column(k + 1, &q);
    }
    traj
}

fn add_noise(q: &mut DVector<f64>, amplitude: f64, seed: u64) {
    if amplitude == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in q.iter_mut() {
        *x += amplitude * rng.random_range(-1.0..1.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvectionParams {
    pub nx: usize,
    /// Advection speed; must be non-negative (upwind from the left).
    pub a: f64,
    pub dx: f64,
    pub profile: Profile,
}

/// Periodic linear advection, first-order upwind, explicit Euler.
#[derive(Debug, Clone)]
pub struct AdvectionModel {
    params: AdvectionParams,
    time: TimeSpec,
    courant: f64,
    noise: (f64, u64),
}

impl AdvectionModel {
    pub fn new(params: AdvectionParams, time: TimeSpec) -> Result<Self> {
        if params.nx < 2 {
            return Err(RomError::Config("model.nx: must be ≥ 2".into()));
        }
        if !(params.dx > 0.0) {
            return Err(RomError::Config("model.dx: must be > 0".into()));
        }
        if !(params.a >= 0.0) {
            return Err(RomError::Config("model.a: must be ≥ 0".into()));
        }
        let courant = params.a * time.dt / params.dx;
        if courant > 1.0 {
            return Err(RomError::Config(format!("model.dt: CFL number a*dt/dx = {courant} exceeds 1")));
        }
        match params.profile {
            Profile::Front { .. } => {
                return Err(RomError::Config("model.profile: `front` applies to the flame model only".into()))
            }
            Profile::Gaussian { width, .. } if !(width > 0.0) => {
                return Err(RomError::Config("model.profile.width: must be > 0".into()))
            }
            _ => {}
        }
        Ok(Self { params, time, courant, noise: (0.0, 0) })
    }

    /// Adds seeded uniform noise of the given amplitude to the initial state.
    pub fn with_initial_noise(mut self, amplitude: f64, seed: u64) -> Self {
        self.noise = (amplitude, seed);
        self
    }

    pub fn params(&self) -> &AdvectionParams {
        &self.params
    }

    pub fn courant(&self) -> f64 {
        self.courant
    }
}

impl FullModel for AdvectionModel {
    fn dim(&self) -> usize {
        self.params.nx
    }

    fn time(&self) -> TimeSpec {
        self.time
    }

    fn grid(&self) -> Grid {
        Grid { nx: self.params.nx, dx: self.params.dx }
    }

    fn layout(&self) -> VariableLayout {
        VariableLayout::single("q", self.params.nx)
    }

    fn initial_state(&self) -> DVector<f64> {
        let g = self.grid();
        let len = g.length();
        let mut q = DVector::from_fn(g.nx, |i, _| {
            let x = g.center(i);
            match self.params.profile {
                Profile::Gaussian { center, width, amplitude, offset } => {
                    offset + amplitude * (-((x - center) / width).powi(2)).exp()
                }
                Profile::Step { location, low, high } => {
                    if x < location {
                        high
                    } else {
                        low
                    }
                }
                Profile::Fourier { mode, amplitude, offset } => {
                    offset + amplitude * (2.0 * std::f64::consts::PI * mode as f64 * x / len).cos()
                }
                Profile::Front { .. } => unreachable!("rejected at construction"),
            }
        });
        add_noise(&mut q, self.noise.0, self.noise.1);
        q
    }

    fn stencil(&self, i: usize, out: &mut Vec<usize>) {
        let nx = self.params.nx;
        out.push((i + nx - 1) % nx);
        out.push(i);
    }

    fn component(&self, q: &[f64], _k: usize, i: usize) -> f64 {
        let nx = self.params.nx;
        let left = q[(i + nx - 1) % nx];
        q[i] - self.courant * (q[i] - left)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlameProxyParams {
    pub nx: usize,
    pub dx: f64,
    pub a: f64,
    pub nu_t: f64,
    pub nu_y: f64,
    /// Arrhenius prefactor.
    pub a_r: f64,
    /// Activation temperature.
    pub t_a: f64,
    /// Heat release per unit of consumed fuel.
    pub q_r: f64,
    pub t_in: f64,
    pub forcing_amp: f64,
    pub forcing_freq: f64,
    pub profile: Profile,
}

impl Default for FlameProxyParams {
    fn default() -> Self {
        Self {
            nx: 512,
            dx: 1.0 / 512.0,
            a: 1.0,
            nu_t: 1e-3,
            nu_y: 1e-3,
            a_r: 50.0,
            t_a: 4.0,
            q_r: 3.0,
            t_in: 1.0,
            forcing_amp: 0.1,
            forcing_freq: 2.0,
            profile: Profile::Front { location: 0.0, width: 0.01 },
        }
    }
}

/// Default time grid of the flame proxy.
pub const FLAME_DEFAULT_TIME: TimeSpec = TimeSpec { dt: 2e-4, steps: 2000 };

/// Two-field advection-diffusion-reaction model of a premixed flame.
///
/// State layout `[T_0..T_{nx-1}, Y_0..Y_{nx-1}]`. Explicit Euler in time,
/// upwind advection, central diffusion, one-step Arrhenius chemistry
/// `omega = min(A_r Y exp(-T_a / max(T, 1)), Y / dt)`. The inlet (left ghost
/// cell) holds `T = T_in (1 + amp sin(2 pi freq t))`, `Y = 1`; the outlet is
/// zero-gradient.
#[derive(Debug, Clone)]
pub struct FlameProxyModel {
    params: FlameProxyParams,
    time: TimeSpec,
    noise: (f64, u64),
}

impl FlameProxyModel {
    pub fn new(params: FlameProxyParams, time: TimeSpec) -> Result<Self> {
        let p = &params;
        if p.nx < 3 {
            return Err(RomError::Config("model.nx: must be ≥ 3".into()));
        }
        if !(p.dx > 0.0) {
            return Err(RomError::Config("model.dx: must be > 0".into()));
        }
        if !(p.a >= 0.0) {
            return Err(RomError::Config("model.a: must be ≥ 0".into()));
        }
        if !(p.nu_t >= 0.0 && p.nu_y >= 0.0 && p.a_r >= 0.0 && p.t_a >= 0.0) {
            return Err(RomError::Config("model: diffusivities and reaction constants must be ≥ 0".into()));
        }
        if !(0.0..1.0).contains(&p.forcing_amp) {
            return Err(RomError::Config(format!("model.forcing_amp: must lie in [0, 1), got {}", p.forcing_amp)));
        }
        let cfl = p.a * time.dt / p.dx;
        if cfl > 1.0 {
            return Err(RomError::Config(format!("model.dt: CFL number a*dt/dx = {cfl} exceeds 1")));
        }
        for (name, nu) in [("nu_T", p.nu_t), ("nu_Y", p.nu_y)] {
            let d = nu * time.dt / (p.dx * p.dx);
            if d > 0.5 {
                return Err(RomError::Config(format!("model.dt: diffusion number {name}*dt/dx^2 = {d} exceeds 1/2")));
            }
        }
        match p.profile {
            Profile::Front { width, .. } if width > 0.0 => {}
            Profile::Front { .. } => return Err(RomError::Config("model.profile.width: must be > 0".into())),
            _ => return Err(RomError::Config("model.profile: the flame model requires a `front` profile".into())),
        }
        Ok(Self { params, time, noise: (0.0, 0) })
    }

    pub fn with_initial_noise(mut self, amplitude: f64, seed: u64) -> Self {
        self.noise = (amplitude, seed);
        self
    }

    pub fn params(&self) -> &FlameProxyParams {
        &self.params
    }

    pub fn inlet_temperature(&self, k: usize) -> f64 {
        let p = &self.params;
        let t = k as f64 * self.time.dt;
        p.t_in * (1.0 + p.forcing_amp * (2.0 * std::f64::consts::PI * p.forcing_freq * t).sin())
    }

    /// First cell whose fuel fraction is below 1/2.
    pub fn front_cell(&self, q: &[f64]) -> Option<usize> {
        let nx = self.params.nx;
        q[nx..2 * nx].iter().position(|&y| y < 0.5)
    }

    fn reaction_rate(&self, t: f64, y: f64) -> f64 {
        let p = &self.params;
        (p.a_r * y * (-p.t_a / t.max(1.0)).exp()).min(y / self.time.dt)
    }
}

impl FullModel for FlameProxyModel {
    fn dim(&self) -> usize {
        2 * self.params.nx
    }

    fn time(&self) -> TimeSpec {
        self.time
    }

    fn grid(&self) -> Grid {
        Grid { nx: self.params.nx, dx: self.params.dx }
    }

    fn layout(&self) -> VariableLayout {
        let nx = self.params.nx;
        VariableLayout::new(vec![("T".into(), 0..nx), ("Y".into(), nx..2 * nx)]).expect("valid layout")
    }

    fn initial_state(&self) -> DVector<f64> {
        let p = &self.params;
        let g = self.grid();
        let Profile::Front { location, width } = p.profile else {
            unreachable!("rejected at construction")
        };
        let mut q = DVector::zeros(2 * p.nx);
        for i in 0..p.nx {
            let y = 0.5 * (1.0 - ((g.center(i) - location) / width).tanh());
            q[i] = p.t_in + p.q_r * (1.0 - y);
            q[p.nx + i] = y;
        }
        add_noise(&mut q, self.noise.0, self.noise.1);
        q
    }

    fn stencil(&self, i: usize, out: &mut Vec<usize>) {
        let nx = self.params.nx;
        let (base, j, partner) = if i < nx { (0, i, nx + i) } else { (nx, i - nx, i - nx) };
        if j > 0 {
            out.push(base + j - 1);
        }
        out.push(base + j);
        if j + 1 < nx {
            out.push(base + j + 1);
        }
        out.push(partner);
    }

    fn component(&self, q: &[f64], k: usize, i: usize) -> f64 {
        let p = &self.params;
        let nx = p.nx;
        let dt = self.time.dt;
        let is_temp = i < nx;
        let j = if is_temp { i } else { i - nx };
        let base = if is_temp { 0 } else { nx };

        let t = q[j];
        let y = q[nx + j];
        let c = q[base + j];
        let left = if j == 0 {
            if is_temp {
                self.inlet_temperature(k)
            } else {
                1.0
            }
        } else {
            q[base + j - 1]
        };
        let right = if j + 1 == nx { c } else { q[base + j + 1] };
        let nu = if is_temp { p.nu_t } else { p.nu_y };

        let advection = -p.a * (c - left) / p.dx;
        let diffusion = nu * (right - 2.0 * c + left) / (p.dx * p.dx);
        let omega = self.reaction_rate(t, y);
        let source = if is_temp { p.q_r * omega } else { -omega };
        c + dt * (advection + diffusion + source)
    }
}

/// The built-in models behind one type, for config-driven runs.
#[derive(Debug, Clone)]
pub enum BuiltinModel {
    Advection(AdvectionModel),
    Flame(FlameProxyModel),
}

impl BuiltinModel {
    fn inner(&self) -> &dyn FullModel {
        match self {
            BuiltinModel::Advection(m) => m,
            BuiltinModel::Flame(m) => m,
        }
    }
}

impl FullModel for BuiltinModel {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn time(&self) -> TimeSpec {
        self.inner().time()
    }
    fn grid(&self) -> Grid {
        self.inner().grid()
    }
    fn layout(&self) -> VariableLayout {
        self.inner().layout()
    }
    fn initial_state(&self) -> DVector<f64> {
        self.inner().initial_state()
    }
    fn stencil(&self, i: usize, out: &mut Vec<usize>) {
        self.inner().stencil(i, out)
    }
    fn component(&self, q: &[f64], k: usize, i: usize) -> f64 {
        self.inner().component(q, k, i)
    }
}
