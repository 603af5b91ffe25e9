//! Scenario configuration files.
//!
//! The format is TOML: `[section]` headers, `key = value` pairs and `#`
//! comments. Unknown sections and keys are rejected. Vector-valued keys
//! accept a single number, which is repeated for every dimension.

use std::fmt;

use madelung_core::diagnostics::{HistogramSpec, SlitGeometry};
use madelung_core::grid::{ComplexField, Grid};
use madelung_core::madelung::DEFAULT_RHO_FLOOR;
use madelung_core::tdse::{self, build_initial_state, build_potential, Aperture, InitialState, Potential, PotentialSpec};
use madelung_core::trajectories::{GuidanceOptions, Point};
use madelung_core::{TrajectoryKind, Units};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub section: String,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(section: &str, key: &str, message: impl Into<String>) -> Self {
        ConfigError { section: section.into(), key: key.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.section.is_empty(), self.key.is_empty()) {
            (true, _) => write!(f, "{}", self.message),
            (false, true) => write!(f, "[{}]: {}", self.section, self.message),
            (false, false) => write!(f, "[{}] {}: {}", self.section, self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A scalar or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn len(&self) -> Option<usize> {
        match self {
            OneOrMany::One(_) => None,
            OneOrMany::Many(v) => Some(v.len()),
        }
    }

    fn expand(&self, dims: usize, section: &str, key: &str) -> Result<Vec<T>, ConfigError> {
        match self {
            OneOrMany::One(x) => Ok(vec![x.clone(); dims]),
            OneOrMany::Many(v) if v.len() == dims => Ok(v.clone()),
            OneOrMany::Many(v) => Err(ConfigError::new(section, key, format!("expected {dims} value(s), got {}", v.len()))),
        }
    }
}

fn expand_or_zero(v: &Option<OneOrMany<f64>>, dims: usize, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
    match v {
        Some(v) => v.expand(dims, section, key),
        None => Ok(vec![0.0; dims]),
    }
}

fn many<T>(v: Vec<T>) -> OneOrMany<T> {
    OneOrMany::Many(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for UnitsConfig {
    fn default() -> Self {
        UnitsConfig { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    pub extents: OneOrMany<f64>,
    pub points: OneOrMany<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Free,
    Harmonic {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<OneOrMany<f64>>,
    },
    Barrier {
        position: f64,
        thickness: f64,
        height: f64,
        #[serde(default)]
        apertures: Vec<ApertureConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<OneOrMany<f64>>,
        width: OneOrMany<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        momentum: Option<OneOrMany<f64>>,
    },
    PlaneWave {
        k: OneOrMany<f64>,
    },
    TwoGaussianSlits {
        separation: f64,
        slit_width: f64,
        forward_momentum: f64,
        #[serde(default)]
        relative_phase: f64,
        source: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        longitudinal_width: Option<f64>,
    },
    HarmonicGround {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<OneOrMany<f64>>,
    },
    HarmonicCoherent {
        omega: f64,
        displacement: OneOrMany<f64>,
    },
    Vortex {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<OneOrMany<f64>>,
        width: f64,
        #[serde(default = "one_i32")]
        winding: i32,
    },
}

fn one_i32() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub total_time: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    10
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dt: default_dt(), total_time: 1.0, snapshot_stride: default_stride() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KindConfig {
    #[default]
    Bohm,
    Fluctuating,
}

impl From<KindConfig> for TrajectoryKind {
    fn from(k: KindConfig) -> Self {
        match k {
            KindConfig::Bohm => TrajectoryKind::Bohm,
            KindConfig::Fluctuating => TrajectoryKind::Fluctuating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default)]
    pub kind: KindConfig,
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "yes")]
    pub osmotic_drift: bool,
    #[serde(default = "default_margin")]
    pub edge_margin: usize,
}

fn default_substeps() -> usize {
    4
}

fn default_margin() -> usize {
    4
}

fn yes() -> bool {
    true
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            kind: KindConfig::Bohm,
            count: 0,
            seed: 0,
            substeps: default_substeps(),
            osmotic_drift: true,
            edge_margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamlineConfig {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Longitudinal coordinate of the fringe screen (2D only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<OneOrMany<usize>>,
    #[serde(default = "default_floor")]
    pub rho_floor: f64,
    #[serde(default)]
    pub streamlines: Vec<StreamlineConfig>,
}

fn default_floor() -> f64 {
    DEFAULT_RHO_FLOOR
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { screen: None, histogram_bins: None, rho_floor: DEFAULT_RHO_FLOOR, streamlines: vec![] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatConfig {
    /// Binary field files.
    Madfield,
    /// Tab-separated tables.
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Density,
    Wavefunction,
    QuantumPotential,
    Trajectories,
    Streamlines,
    Fringe,
    Dispersion,
    Summary,
}

impl Artifact {
    pub const ALL: [Artifact; 8] = [
        Artifact::Density,
        Artifact::Wavefunction,
        Artifact::QuantumPotential,
        Artifact::Trajectories,
        Artifact::Streamlines,
        Artifact::Fringe,
        Artifact::Dispersion,
        Artifact::Summary,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<FormatConfig>,
    #[serde(default = "default_artifacts")]
    pub artifacts: Vec<Artifact>,
    /// Write field files for every n-th snapshot (the last one is always written).
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
    /// Number of ensemble members written to the trajectory table.
    #[serde(default = "default_members")]
    pub trajectory_members: usize,
}

fn default_directory() -> String {
    "output".into()
}

fn default_formats() -> Vec<FormatConfig> {
    vec![FormatConfig::Madfield, FormatConfig::Tsv]
}

fn default_artifacts() -> Vec<Artifact> {
    Artifact::ALL.to_vec()
}

fn default_every() -> usize {
    1
}

fn default_members() -> usize {
    100
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
            artifacts: default_artifacts(),
            snapshot_every: 1,
            trajectory_members: default_members(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, a: Artifact) -> bool {
        self.artifacts.contains(&a)
    }

    pub fn has_format(&self, f: FormatConfig) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub units: UnitsConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub trajectories: TrajectoryConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Section and key enclosing a byte offset of a TOML document.
fn locate(text: &str, offset: usize) -> (String, String) {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    (section, key)
}

/// Parses, normalizes and validates a configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (section, key) = e.span().map(|s| locate(text, s.start)).unwrap_or_default();
        let message = e.message().to_string();
        let key = if message.starts_with("unknown field") { String::new() } else { key };
        ConfigError { section, key, message }
    })?;
    let config = raw.normalized()?;
    config.build()?;
    Ok(config)
}

/// Canonical text of a configuration: every default written out.
pub fn canonicalize(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("configuration serializes")
}

/// Everything a run needs, built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub units: Units,
    pub grid: Grid,
    pub potential: Potential,
    pub initial: ComplexField,
    pub steps: usize,
    pub guidance: GuidanceOptions,
    pub histogram: HistogramSpec,
    pub slits: Option<SlitGeometry>,
    pub streamline_seeds: Vec<Point>,
}

fn point(v: &[f64], dims: usize, key: &str) -> Result<Point, ConfigError> {
    if v.len() != dims {
        return Err(ConfigError::new("diagnostics", key, format!("expected {dims} coordinate(s), got {}", v.len())));
    }
    Ok([v[0], if dims > 1 { v[1] } else { 0.0 }])
}

impl ScenarioConfig {
    pub fn dims(&self) -> usize {
        self.grid
            .dims
            .or(self.grid.extents.len())
            .or(self.grid.points.len())
            .unwrap_or(1)
    }

    /// Expands scalars to per-dimension lists and fills optional defaults.
    pub fn normalized(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut c = self.clone();
        let dims = self.dims();
        if !(1..=2).contains(&dims) {
            return Err(ConfigError::new("grid", "dims", format!("1 or 2 dimensions are supported, got {dims}")));
        }
        c.grid = GridConfig {
            dims: Some(dims),
            extents: many(self.grid.extents.expand(dims, "grid", "extents")?),
            points: many(self.grid.points.expand(dims, "grid", "points")?),
        };
        if let PotentialConfig::Harmonic { omega, center } = &self.potential {
            c.potential =
                PotentialConfig::Harmonic { omega: *omega, center: Some(many(expand_or_zero(center, dims, "potential", "center")?)) };
        }
        c.initial = match &self.initial {
            InitialConfig::Gaussian { center, width, momentum } => InitialConfig::Gaussian {
                center: Some(many(expand_or_zero(center, dims, "initial", "center")?)),
                width: many(width.expand(dims, "initial", "width")?),
                momentum: Some(many(expand_or_zero(momentum, dims, "initial", "momentum")?)),
            },
            InitialConfig::PlaneWave { k } => InitialConfig::PlaneWave { k: many(k.expand(dims, "initial", "k")?) },
            InitialConfig::HarmonicGround { omega, center } => InitialConfig::HarmonicGround {
                omega: *omega,
                center: Some(many(expand_or_zero(center, dims, "initial", "center")?)),
            },
            InitialConfig::HarmonicCoherent { omega, displacement } => InitialConfig::HarmonicCoherent {
                omega: *omega,
                displacement: many(displacement.expand(dims, "initial", "displacement")?),
            },
            InitialConfig::Vortex { center, width, winding } => InitialConfig::Vortex {
                center: Some(many(expand_or_zero(center, dims, "initial", "center")?)),
                width: *width,
                winding: *winding,
            },
            other => other.clone(),
        };
        let bins = match &self.diagnostics.histogram_bins {
            Some(b) => b.expand(dims, "diagnostics", "histogram_bins")?,
            None => HistogramSpec::for_dims(dims, 0).bins[..dims].to_vec(),
        };
        c.diagnostics.histogram_bins = Some(many(bins));
        Ok(c)
    }

    /// Builds every numerical object; fails on the first invalid value.
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let c = self.normalized()?;
        let dims = c.dims();
        let units = Units::new(c.units.hbar, c.units.mass);
        for (key, v) in [("hbar", units.hbar), ("mass", units.mass)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::new("units", key, format!("must be positive, got {v}")));
            }
        }
        let list = |o: &Option<OneOrMany<f64>>| match o {
            Some(OneOrMany::Many(v)) => v.clone(),
            _ => unreachable!("normalized"),
        };
        let (OneOrMany::Many(extents), OneOrMany::Many(points)) = (&c.grid.extents, &c.grid.points) else {
            unreachable!("normalized")
        };
        let grid = Grid::new(extents, points).map_err(|e| {
            let key = if e.to_string().contains("points") { "points" } else { "extents" };
            ConfigError::new("grid", key, strip(e))
        })?;

        let spec = match &c.potential {
            PotentialConfig::Free => PotentialSpec::Free,
            PotentialConfig::Harmonic { omega, center } => PotentialSpec::Harmonic { omega: *omega, center: list(center) },
            PotentialConfig::Barrier { position, thickness, height, apertures } => PotentialSpec::HardBarrier {
                position: *position,
                thickness: *thickness,
                height: *height,
                apertures: apertures.iter().map(|a| Aperture { center: a.center, width: a.width }).collect(),
            },
        };
        let potential = build_potential(&spec, &grid, units).map_err(|e| ConfigError::new("potential", "", strip(e)))?;

        let mut slits = None;
        let state = match &c.initial {
            InitialConfig::Gaussian { center, width, momentum } => InitialState::Gaussian {
                center: list(center),
                width: match width {
                    OneOrMany::Many(v) => v.clone(),
                    OneOrMany::One(_) => unreachable!("normalized"),
                },
                momentum: list(momentum),
            },
            InitialConfig::PlaneWave { k } => InitialState::PlaneWave { k: list(&Some(k.clone())) },
            InitialConfig::TwoGaussianSlits {
                separation,
                slit_width,
                forward_momentum,
                relative_phase,
                source,
                longitudinal_width,
            } => {
                slits = Some(SlitGeometry { separation: *separation, forward_wavenumber: *forward_momentum, source: *source });
                InitialState::TwoGaussianSlits {
                    separation: *separation,
                    slit_width: *slit_width,
                    forward_momentum: *forward_momentum,
                    relative_phase: *relative_phase,
                    source: *source,
                    longitudinal_width: *longitudinal_width,
                }
            }
            InitialConfig::HarmonicGround { omega, center } => InitialState::HarmonicGround { omega: *omega, center: list(center) },
            InitialConfig::HarmonicCoherent { omega, displacement } => {
                InitialState::HarmonicCoherent { omega: *omega, displacement: list(&Some(displacement.clone())) }
            }
            InitialConfig::Vortex { center, width, winding } => {
                InitialState::Vortex { center: list(center), width: *width, winding: *winding }
            }
        };
        let initial = build_initial_state(&state, &grid, units).map_err(|e| ConfigError::new("initial", "", strip(e)))?;

        let s = &c.solver;
        let steps = tdse::step_count(s.total_time, s.dt).map_err(|e| {
            let key = if e.to_string().contains("dt must") { "dt" } else { "total_time" };
            ConfigError::new("solver", key, strip(e))
        })?;
        if s.snapshot_stride == 0 || steps % s.snapshot_stride != 0 {
            return Err(ConfigError::new(
                "solver",
                "snapshot_stride",
                format!("must be a positive divisor of the {steps} solver steps, got {}", s.snapshot_stride),
            ));
        }

        let t = &c.trajectories;
        if t.substeps == 0 {
            return Err(ConfigError::new("trajectories", "substeps", "must be at least 1"));
        }
        let smallest = grid.points().iter().min().copied().unwrap_or(0);
        if 2 * t.edge_margin + 2 >= smallest {
            return Err(ConfigError::new("trajectories", "edge_margin", format!("leaves no trusted region on a {smallest}-point axis")));
        }
        let d = &c.diagnostics;
        if !(d.rho_floor >= 0.0 && d.rho_floor < 1.0) {
            return Err(ConfigError::new("diagnostics", "rho_floor", format!("must lie in [0, 1), got {}", d.rho_floor)));
        }
        let bins = match &d.histogram_bins {
            Some(OneOrMany::Many(b)) => b.clone(),
            _ => unreachable!("normalized"),
        };
        if bins.contains(&0) {
            return Err(ConfigError::new("diagnostics", "histogram_bins", "bin counts must be positive"));
        }
        let histogram = HistogramSpec { bins: [bins[0], if dims > 1 { bins[1] } else { 1 }], edge_margin: t.edge_margin };
        if let Some(screen) = d.screen {
            if dims != 2 {
                return Err(ConfigError::new("diagnostics", "screen", "a fringe screen needs a 2D grid"));
            }
            if !(screen > grid.coord(0, 0) && screen < grid.coord(0, grid.points()[0] - 1)) {
                return Err(ConfigError::new("diagnostics", "screen", format!("{screen} is outside the domain")));
            }
        }
        let mut streamline_seeds = Vec::new();
        for line in &d.streamlines {
            let (from, to) = (point(&line.from, dims, "streamlines.from")?, point(&line.to, dims, "streamlines.to")?);
            let inside = |p: Point| (0..dims).all(|k| p[k] >= grid.lower(k) && p[k] <= grid.upper(k));
            if !(inside(from) && inside(to)) {
                return Err(ConfigError::new("diagnostics", "streamlines", "seed line leaves the domain"));
            }
            streamline_seeds.extend(madelung_core::diagnostics::seed_line(from, to, line.count));
        }
        let o = &c.output;
        if o.snapshot_every == 0 {
            return Err(ConfigError::new("output", "snapshot_every", "must be at least 1"));
        }
        if o.directory.is_empty() {
            return Err(ConfigError::new("output", "directory", "must not be empty"));
        }

        let guidance = GuidanceOptions {
            rho_floor: d.rho_floor,
            edge_margin: t.edge_margin,
            osmotic: t.osmotic_drift && t.kind == KindConfig::Fluctuating,
        };
        Ok(Scenario {
            units,
            grid,
            potential,
            initial,
            steps,
            guidance,
            histogram,
            slits,
            streamline_seeds,
            config: c,
        })
    }
}

/// Core error text without its category prefix.
fn strip(e: madelung_core::Error) -> String {
    let s = e.to_string();
    s.strip_prefix("configuration error: ").map(str::to_string).unwrap_or(s)
}
