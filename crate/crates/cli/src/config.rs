//! Run configuration: TOML text to a fully resolved, validated [`RunConfig`].
//!
//! Unknown keys are rejected everywhere. Optional keys whose default depends on
//! other values (grid spacing, time step, profile, window size, sample count,
//! label) are filled in by [`parse_config`], so a parsed config serializes to a
//! complete description of the run.

use std::path::{Path, PathBuf};

use romkit::adeim::AadeimConfig;
use romkit::diagnostics::ProbeSpec;
use romkit::fom::{AdvectionModel, AdvectionParams, BuiltinModel, FlameProxyModel, FlameProxyParams, FullModel, Profile, TimeSpec, FLAME_DEFAULT_TIME};
use romkit::RomError;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the optional initial-condition noise.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub rom: RomSection,
    #[serde(default)]
    pub aadeim: AadeimSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Advection(AdvectionSection),
    Flame(FlameSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvectionSection {
    pub nx: usize,
    /// Defaults to `1 / nx`.
    pub dx: Option<f64>,
    pub a: f64,
    /// Defaults to Courant number 1/2.
    pub dt: Option<f64>,
    pub steps: usize,
    /// Amplitude of uniform initial-condition noise.
    pub noise: f64,
    /// Defaults to a Gaussian pulse at x = 0.25 of width 0.02.
    pub profile: Option<ProfileConfig>,
}

impl Default for AdvectionSection {
    fn default() -> Self {
        Self { nx: 512, dx: None, a: 1.0, dt: None, steps: 2000, noise: 0.0, profile: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlameSection {
    pub nx: usize,
    /// Defaults to `1 / nx`.
    pub dx: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub a: f64,
    pub nu_t: f64,
    pub nu_y: f64,
    pub a_r: f64,
    pub t_a: f64,
    pub q_r: f64,
    pub t_in: f64,
    pub forcing_amp: f64,
    pub forcing_freq: f64,
    pub noise: f64,
    /// Defaults to a front at the inlet of width 0.01.
    pub profile: Option<ProfileConfig>,
}

impl Default for FlameSection {
    fn default() -> Self {
        let p = FlameProxyParams::default();
        Self {
            nx: p.nx,
            dx: None,
            dt: FLAME_DEFAULT_TIME.dt,
            steps: FLAME_DEFAULT_TIME.steps,
            a: p.a,
            nu_t: p.nu_t,
            nu_y: p.nu_y,
            a_r: p.a_r,
            t_a: p.t_a,
            q_r: p.q_r,
            t_in: p.t_in,
            forcing_amp: p.forcing_amp,
            forcing_freq: p.forcing_freq,
            noise: 0.0,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Gaussian { center: f64, width: f64, amplitude: f64, offset: f64 },
    Step { location: f64, low: f64, high: f64 },
    Fourier { mode: usize, amplitude: f64, offset: f64 },
    Front { location: f64, width: f64 },
}

impl From<&ProfileConfig> for Profile {
    fn from(p: &ProfileConfig) -> Self {
        match *p {
            ProfileConfig::Gaussian { center, width, amplitude, offset } => Profile::Gaussian { center, width, amplitude, offset },
            ProfileConfig::Step { location, low, high } => Profile::Step { location, low, high },
            ProfileConfig::Fourier { mode, amplitude, offset } => Profile::Fourier { mode, amplitude, offset },
            ProfileConfig::Front { location, width } => Profile::Front { location, width },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomMode {
    Static,
    Aadeim,
}

impl RomMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RomMode::Static => "static",
            RomMode::Aadeim => "aadeim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomSection {
    pub mode: RomMode,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AadeimSection {
    pub w_init: usize,
    /// Defaults to `n + 1`.
    pub w: Option<usize>,
    /// Defaults to a quarter of the state dimension.
    pub m_s: Option<usize>,
    pub z: usize,
    pub basis_update_period: usize,
}

impl Default for AadeimSection {
    fn default() -> Self {
        Self { w_init: 15, w: None, m_s: None, z: 3, basis_update_period: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Snapshot files concatenated column-wise for static training.
    pub snapshots: Vec<PathBuf>,
    /// Keep every `snapshot_stride`-th snapshot column.
    pub snapshot_stride: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self { snapshots: Vec::new(), snapshot_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Overridden by `ROM_OUTPUT_DIR`.
    pub directory: PathBuf,
    /// Defaults to `<kind>_<mode>_n<n>`.
    pub label: Option<String>,
    /// Probe x-coordinates; defaults to quarter, half and three quarters of the domain.
    pub probes: Option<Vec<f64>>,
    /// Defaults to every state variable.
    pub probe_variables: Option<Vec<String>>,
    pub write_trajectory: bool,
    pub write_diagnostics: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            label: None,
            probes: None,
            probe_variables: None,
            write_trajectory: true,
            write_diagnostics: true,
        }
    }
}

/// A configuration error naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl From<RomError> for ConfigError {
    fn from(e: RomError) -> Self {
        match e {
            RomError::Config(m) | RomError::Parameter(m) => ConfigError(m),
            other => ConfigError(other.to_string()),
        }
    }
}

/// Parses, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().message().to_string();
        if path == "." {
            ConfigError(inner)
        } else {
            ConfigError(format!("{path}: {inner}"))
        }
    })?;
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a config file. Relative training snapshot paths are taken
/// relative to the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in &mut cfg.training.snapshots {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn kind(&self) -> &'static str {
        match self.model {
            ModelConfig::Advection(_) => "advection",
            ModelConfig::Flame(_) => "flame",
        }
    }

    fn resolve(&mut self) {
        match &mut self.model {
            ModelConfig::Advection(m) => {
                let dx = *m.dx.get_or_insert(1.0 / m.nx.max(1) as f64);
                if m.dt.is_none() && m.a > 0.0 {
                    m.dt = Some(0.5 * dx / m.a);
                }
                m.dt.get_or_insert(dx);
                m.profile.get_or_insert(ProfileConfig::Gaussian { center: 0.25, width: 0.02, amplitude: 1.0, offset: 0.0 });
            }
            ModelConfig::Flame(m) => {
                m.dx.get_or_insert(1.0 / m.nx.max(1) as f64);
                m.profile.get_or_insert(ProfileConfig::Front { location: 0.0, width: 0.01 });
            }
        }
        let n = self.rom.n;
        let dim = self.state_dim();
        self.aadeim.w.get_or_insert(n + 1);
        self.aadeim.m_s.get_or_insert((dim / 4).max(1));
        if self.output.label.is_none() {
            self.output.label = Some(format!("{}_{}_n{n}", self.kind(), self.rom.mode.as_str()));
        }
        if self.output.probes.is_none() {
            let len = self.domain_length();
            self.output.probes = Some(vec![0.25 * len, 0.5 * len, 0.75 * len]);
        }
    }

    fn state_dim(&self) -> usize {
        match &self.model {
            ModelConfig::Advection(m) => m.nx,
            ModelConfig::Flame(m) => 2 * m.nx,
        }
    }

    fn domain_length(&self) -> f64 {
        let (nx, dx) = match &self.model {
            ModelConfig::Advection(m) => (m.nx, m.dx),
            ModelConfig::Flame(m) => (m.nx, m.dx),
        };
        nx as f64 * dx.unwrap_or(1.0 / nx.max(1) as f64)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let model = self.build_model()?;
        let dim = model.dim();
        let noise = match &self.model {
            ModelConfig::Advection(m) => m.noise,
            ModelConfig::Flame(m) => m.noise,
        };
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(ConfigError("model.noise: must be a finite value ≥ 0".into()));
        }
        if self.rom.n == 0 {
            return Err(ConfigError("rom.n: must be ≥ 1".into()));
        }
        if self.rom.n > dim {
            return Err(ConfigError(format!("rom.n: must be ≤ N = {dim}")));
        }
        if self.rom.mode == RomMode::Aadeim {
            self.aadeim_config().validate(dim)?;
            let steps = model.time().steps;
            if steps < self.aadeim.w_init {
                return Err(ConfigError(format!("model.steps: must be ≥ aadeim.w_init = {}", self.aadeim.w_init)));
            }
        }
        if self.training.snapshot_stride == 0 {
            return Err(ConfigError("training.snapshot_stride: must be ≥ 1".into()));
        }
        if self.label().is_empty() {
            return Err(ConfigError("output.label: must not be empty".into()));
        }
        let grid = model.grid();
        for &x in self.output.probes.as_deref().unwrap_or_default() {
            if grid.nearest_cell(x).is_err() {
                return Err(ConfigError(format!("output.probes: x = {x} lies outside the domain [0, {}]", grid.length())));
            }
        }
        let layout = model.layout();
        for v in self.output.probe_variables.as_deref().unwrap_or_default() {
            if layout.range_of(v).is_none() {
                let known: Vec<&str> = layout.vars().iter().map(|(n, _)| n.as_str()).collect();
                return Err(ConfigError(format!("output.probe_variables: unknown variable `{v}`, expected one of {known:?}")));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<BuiltinModel, ConfigError> {
        match &self.model {
            ModelConfig::Advection(m) => {
                let dx = m.dx.unwrap_or(1.0 / m.nx.max(1) as f64);
                let time = TimeSpec::new(m.dt.unwrap_or(0.5 * dx), m.steps)?;
                let profile = m.profile.as_ref().map_or(Profile::Gaussian { center: 0.25, width: 0.02, amplitude: 1.0, offset: 0.0 }, Profile::from);
                let params = AdvectionParams { nx: m.nx, a: m.a, dx, profile };
                Ok(BuiltinModel::Advection(AdvectionModel::new(params, time)?.with_initial_noise(m.noise, self.seed)))
            }
            ModelConfig::Flame(m) => {
                let time = TimeSpec::new(m.dt, m.steps)?;
                let params = FlameProxyParams {
                    nx: m.nx,
                    dx: m.dx.unwrap_or(1.0 / m.nx.max(1) as f64),
                    a: m.a,
                    nu_t: m.nu_t,
                    nu_y: m.nu_y,
                    a_r: m.a_r,
                    t_a: m.t_a,
                    q_r: m.q_r,
                    t_in: m.t_in,
                    forcing_amp: m.forcing_amp,
                    forcing_freq: m.forcing_freq,
                    profile: m.profile.as_ref().map_or(Profile::Front { location: 0.0, width: 0.01 }, Profile::from),
                };
                Ok(BuiltinModel::Flame(FlameProxyModel::new(params, time)?.with_initial_noise(m.noise, self.seed)))
            }
        }
    }

    pub fn aadeim_config(&self) -> AadeimConfig {
        let n = self.rom.n;
        AadeimConfig {
            n,
            w_init: self.aadeim.w_init,
            w: self.aadeim.w.unwrap_or(n + 1),
            m_s: self.aadeim.m_s.unwrap_or(1),
            z: self.aadeim.z,
            basis_update_period: self.aadeim.basis_update_period,
        }
    }

    pub fn label(&self) -> &str {
        self.output.label.as_deref().unwrap_or("")
    }

    /// Probe locations and variables, with every layout variable by default.
    pub fn probe_spec(&self, model: &dyn FullModel) -> ProbeSpec {
        let variables = self
            .output
            .probe_variables
            .clone()
            .unwrap_or_else(|| model.layout().vars().iter().map(|(n, _)| n.clone()).collect());
        ProbeSpec { locations: self.output.probes.clone().unwrap_or_default(), variables }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nkind = \"advection\"\n\n[rom]\nmode = \"static\"\nn = 4\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let ModelConfig::Advection(m) = &cfg.model else { panic!("advection expected") };
        assert_eq!(m.nx, 512);
        assert_eq!(m.dx, Some(1.0 / 512.0));
        assert_eq!(m.dt, Some(0.5 / 512.0));
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.aadeim.w, Some(5));
        assert_eq!(cfg.aadeim.m_s, Some(128));
        assert_eq!(cfg.label(), "advection_static_n4");
        assert_eq!(cfg.output.probes, Some(vec![0.25, 0.5, 0.75]));
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let aadeim = MINIMAL.replace("static", "aadeim") + "[aadeim]\nm_s = 0\n";
        assert_eq!(parse_config(&aadeim).unwrap_err().0, "aadeim.m_s: must be ≥ 1");

        let err = parse_config(&(MINIMAL.to_string() + "[output]\ncolour = 1\n")).unwrap_err().0;
        assert!(err.starts_with("output.colour: unknown field"), "{err}");

        let err = parse_config("[model]\nkind = \"advection\"\n").unwrap_err().0;
        assert!(err.contains("rom"), "{err}");

        let err = parse_config(&MINIMAL.replace("n = 4", "n = 4.5")).unwrap_err().0;
        assert!(err.starts_with("rom.n:"), "{err}");

        let err = parse_config(&MINIMAL.replace("kind = \"advection\"", "kind = \"advection\"\nnu_t = 1.0")).unwrap_err().0;
        assert!(err.contains("nu_t"), "{err}");

        let err = parse_config(&MINIMAL.replace("kind = \"advection\"", "kind = \"advection\"\ndt = 0.01")).unwrap_err().0;
        assert!(err.starts_with("model.dt: CFL"), "{err}");

        let err = parse_config(&(MINIMAL.to_string() + "[output]\nprobes = [1.5]\n")).unwrap_err().0;
        assert!(err.starts_with("output.probes:"), "{err}");
    }

    #[test]
    fn flame_profile_must_be_a_front() {
        let text = "[model]\nkind = \"flame\"\n[model.profile]\nshape = \"step\"\nlocation = 0.5\nlow = 0.0\nhigh = 1.0\n[rom]\nmode = \"static\"\nn = 2\n";
        assert!(parse_config(text).unwrap_err().0.starts_with("model.profile:"));
    }
}
