//! Scenario pipeline: solve, analyze, integrate, diagnose, write.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use madelung_core::diagnostics::{self, canyon_summary, dispersion_report, equivariance_distance, fringe_profile};
use madelung_core::field_io::{encode_field, FieldData};
use madelung_core::madelung::{self, circulation, find_nodes, GridLoop, SnapshotWindow};
use madelung_core::tdse::{energy, evolve, Timeline};
use madelung_core::trajectories::{run_ensemble, GuidanceTimeline, Trajectory};
use madelung_core::{Error as CoreError, TrajectoryEnsemble};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{canonicalize, Artifact, ConfigError, FormatConfig, InitialConfig, Scenario, ScenarioConfig};

pub const TOOL: &str = "madelab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: CoreError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 configuration, 2 runtime, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Stage { source: CoreError::Io(_), .. } | RunError::Io { .. } => 3,
            RunError::Stage { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

/// Record of one run. Everything in it is a function of the configuration
/// and the tool version; wall times go to `timings.json` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Canonical configuration text.
    pub config: String,
    pub seeds: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
    pub stages: Vec<String>,
    pub failure: Option<StageFailure>,
    /// SHA-256 of every artifact, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where to write, instead of `output.directory`.
    pub output_dir: Option<PathBuf>,
    /// Replaces `trajectories.seed`.
    pub seed: Option<u64>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";

struct Writer {
    dir: PathBuf,
    created: bool,
    digests: BTreeMap<String, String>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        if !self.created {
            fs::create_dir_all(&self.dir).map_err(|e| RunError::Io { path: self.dir.clone(), source: e })?;
            self.created = true;
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| RunError::Io { path, source: e })?;
        self.digests.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }
}

fn stage_err(stage: &str) -> impl FnOnce(CoreError) -> RunError + '_ {
    move |source| RunError::Stage { stage: stage.to_string(), source }
}

fn trajectory_rows(out: &mut String, member: usize, tr: &Trajectory, dims: usize) {
    for (k, (t, x)) in tr.times.iter().zip(&tr.positions).enumerate() {
        let exited = tr.exited && k + 1 == tr.positions.len();
        let _ = write!(out, "{member}\t{}\t{t}\t{}", tr.kind.name(), x[0]);
        if dims == 2 {
            let _ = write!(out, "\t{}", x[1]);
        }
        let _ = writeln!(out, "\t{}", u8::from(exited));
    }
}

/// Plain-text trajectory table: member, kind, t, x, [y], exited.
pub fn trajectory_table<'a>(members: impl Iterator<Item = &'a Trajectory>, dims: usize) -> String {
    let mut out = String::from(if dims == 2 { "member\tkind\tt\tx\ty\texited\n" } else { "member\tkind\tt\tx\texited\n" });
    for (i, tr) in members.enumerate() {
        trajectory_rows(&mut out, i, tr, dims);
    }
    out
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("json");
    b.push(b'\n');
    b
}

struct Pipeline<'a> {
    scenario: &'a Scenario,
    writer: Writer,
    manifest: RunManifest,
    summary: serde_json::Map<String, Value>,
}

impl Pipeline<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, RunError>) -> Result<T, RunError> {
        log::info!("stage {name}");
        let start = Instant::now();
        let out = f(self);
        self.manifest.timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        match &out {
            Ok(_) => self.manifest.stages.push(name.to_string()),
            Err(e) => {
                self.manifest.failure = Some(StageFailure { stage: name.to_string(), message: e.to_string() });
            }
        }
        out
    }

    fn wants(&self, a: Artifact) -> bool {
        self.scenario.config.output.wants(a)
    }

    fn format(&self, f: FormatConfig) -> bool {
        self.scenario.config.output.has_format(f)
    }

    fn selected(&self, tl: &Timeline) -> Vec<usize> {
        let every = self.scenario.config.output.snapshot_every;
        (0..tl.len()).filter(|k| k % every == 0 || k + 1 == tl.len()).collect()
    }

    fn solve(&mut self) -> Result<Timeline, RunError> {
        let s = self.scenario;
        let c = &s.config.solver;
        let tl = evolve(&s.initial, &s.potential.field, s.units, c.total_time, c.dt, c.snapshot_stride)
            .map_err(stage_err("solve"))?;
        self.manifest.warnings.extend(tl.warnings.iter().cloned());
        let e0 = energy(&s.initial, &s.potential.field, s.units).map_err(stage_err("solve"))?;
        let e1 = energy(tl.last(), &s.potential.field, s.units).map_err(stage_err("solve"))?;
        self.summary.insert(
            "solver".into(),
            json!({
                "steps": s.steps,
                "snapshots": tl.len(),
                "norm_drift": (tl.last().norm_sqr() - s.initial.norm_sqr()).abs(),
                "energy_initial": e0,
                "energy_final": e1,
            }),
        );
        if self.format(FormatConfig::Madfield) {
            for k in self.selected(&tl) {
                let (psi, t) = (&tl.snapshots[k], tl.times[k]);
                if self.wants(Artifact::Density) {
                    self.writer.put(&format!("density_{k:04}.madfield"), &encode_field(&FieldData::Real(psi.density()), t))?;
                }
                if self.wants(Artifact::Wavefunction) {
                    self.writer.put(&format!("psi_{k:04}.madfield"), &encode_field(&FieldData::Complex(psi.clone()), t))?;
                }
            }
        }
        Ok(tl)
    }

    fn analyze(&mut self, tl: &Timeline) -> Result<(), RunError> {
        let s = self.scenario;
        let floor = s.config.diagnostics.rho_floor;
        if self.wants(Artifact::QuantumPotential) && self.format(FormatConfig::Madfield) {
            for k in self.selected(tl) {
                let f = madelung::decompose(&tl.snapshots[k], s.units, floor).map_err(stage_err("analyze"))?;
                self.writer.put(&format!("vq_{k:04}.madfield"), &encode_field(&FieldData::Real(f.v_q), tl.times[k]))?;
            }
        }
        let mut residuals = serde_json::Map::new();
        if tl.len() >= 3 {
            let mid = tl.len() / 2;
            let w = SnapshotWindow::from_timeline(tl, mid).map_err(stage_err("analyze"))?;
            let c = madelung::continuity_residual(&w).map_err(stage_err("analyze"))?;
            residuals.insert("time".into(), json!(tl.times[mid]));
            residuals.insert("continuity_l2".into(), json!(c.l2));
            residuals.insert("continuity_max".into(), json!(c.max_abs));
            match madelung::hj_residual(&w, floor) {
                Ok(h) => {
                    residuals.insert("hamilton_jacobi_l2".into(), json!(h.l2));
                    residuals.insert("hamilton_jacobi_max".into(), json!(h.max_abs));
                }
                Err(e) => {
                    residuals.insert("hamilton_jacobi_error".into(), json!(e.to_string()));
                }
            }
        }
        self.summary.insert("residuals".into(), Value::Object(residuals));
        if s.grid.dims() == 2 {
            let nodes = find_nodes(tl.last(), floor).map_err(stage_err("analyze"))?;
            self.summary.insert(
                "nodes".into(),
                json!({ "count": nodes.nodes.len(), "total_winding": nodes.total_winding() }),
            );
            if let InitialConfig::Vortex { .. } = s.config.initial {
                let v = madelung::velocity_field(tl.last(), s.units, floor, tl.times[tl.len() - 1])
                    .map_err(stage_err("analyze"))?;
                let n = s.grid.points();
                let lp = GridLoop::around([n[0] / 2, n[1] / 2], n[0].min(n[1]) / 8);
                let entry = match circulation(&v, &lp, s.units) {
                    Ok(c) => json!({ "value": c.value, "quanta": c.quanta, "deviation": c.deviation }),
                    Err(e) => json!({ "error": e.to_string() }),
                };
                self.summary.insert("circulation".into(), entry);
            }
        }
        Ok(())
    }

    fn trajectories(&mut self, g: &GuidanceTimeline) -> Result<Option<TrajectoryEnsemble>, RunError> {
        let s = self.scenario;
        let t = &s.config.trajectories;
        let mut ensemble = None;
        if t.count > 0 {
            let ens = run_ensemble(g, t.count, t.kind.into(), t.seed, t.substeps).map_err(stage_err("trajectories"))?;
            for (i, msg) in &ens.failures {
                self.manifest.warnings.push(format!("trajectory member {i}: {msg}"));
            }
            if self.wants(Artifact::Trajectories) && self.format(FormatConfig::Tsv) {
                let members = ens.members.iter().take(s.config.output.trajectory_members);
                self.writer.put("trajectories.tsv", trajectory_table(members, s.grid.dims()).as_bytes())?;
            }
            self.summary.insert(
                "ensemble".into(),
                json!({
                    "kind": ens.kind.name(),
                    "count": ens.count,
                    "seed": ens.seed,
                    "exited": ens.exited_count(),
                    "failures": ens.failures.len(),
                }),
            );
            ensemble = Some(ens);
        }
        if !s.streamline_seeds.is_empty() {
            let map = diagnostics::streamline_map(g, &s.streamline_seeds, t.substeps).map_err(stage_err("trajectories"))?;
            if self.wants(Artifact::Streamlines) && self.format(FormatConfig::Tsv) {
                self.writer.put("streamlines.tsv", trajectory_table(map.trajectories.iter(), s.grid.dims()).as_bytes())?;
            }
            self.summary.insert("streamline_undulations".into(), json!(map.undulations));
        }
        Ok(ensemble)
    }

    fn diagnose(&mut self, tl: &Timeline, g: Option<&GuidanceTimeline>, ens: Option<&TrajectoryEnsemble>) -> Result<(), RunError> {
        let s = self.scenario;
        let floor = s.config.diagnostics.rho_floor;
        if let (Some(g), Some(ens)) = (g, ens) {
            let mut eq = Vec::new();
            for k in [0, tl.len() - 1] {
                eq.push(match equivariance_distance(tl, ens, k, s.histogram) {
                    Ok(e) => json!({ "snapshot": k, "tv": e.tv, "excluded_fraction": e.excluded_fraction }),
                    Err(e) => json!({ "snapshot": k, "error": e.to_string() }),
                });
            }
            self.summary.insert("equivariance".into(), Value::Array(eq));
            let report = dispersion_report(tl, g, ens).map_err(stage_err("diagnostics"))?;
            if self.wants(Artifact::Dispersion) && self.format(FormatConfig::Tsv) {
                let dims = s.grid.dims();
                let mut out = String::from("t");
                for d in 0..dims {
                    let _ = write!(out, "\tdx{d}\tdp_quantum{d}\tdp_bohm{d}");
                }
                out.push_str("\tmembers\n");
                for k in 0..report.times.len() {
                    let _ = write!(out, "{}", report.times[k]);
                    for d in 0..dims {
                        let _ = write!(
                            out,
                            "\t{}\t{}\t{}",
                            report.delta_x[k][d], report.delta_p_quantum[k][d], report.delta_p_bohm[k][d]
                        );
                    }
                    let _ = writeln!(out, "\t{}", report.members[k]);
                }
                self.writer.put("dispersion.tsv", out.as_bytes())?;
            }
            let last = report.times.len() - 1;
            self.summary.insert(
                "dispersion_final".into(),
                json!({
                    "delta_x": report.delta_x[last],
                    "delta_p_quantum": report.delta_p_quantum[last],
                    "delta_p_bohm": report.delta_p_bohm[last],
                }),
            );
        }
        if let Some(screen) = s.config.diagnostics.screen {
            let profile = fringe_profile(tl, screen, s.slits.as_ref()).map_err(stage_err("diagnostics"))?;
            self.manifest.warnings.extend(profile.warnings.iter().cloned());
            if self.wants(Artifact::Fringe) && self.format(FormatConfig::Tsv) {
                let mut out = String::from("y\tdensity\n");
                for (y, r) in profile.coords.iter().zip(&profile.density) {
                    let _ = writeln!(out, "{y}\t{r}");
                }
                self.writer.put("fringe.tsv", out.as_bytes())?;
            }
            let canyon = canyon_summary(tl, screen, floor).map_err(stage_err("diagnostics"))?;
            self.summary.insert(
                "fringe".into(),
                json!({
                    "screen": screen,
                    "maxima": profile.maxima,
                    "minima": profile.minima,
                    "spacing": profile.spacing,
                    "predicted_spacing": profile.predicted_spacing,
                    "relative_error": profile.relative_spacing_error(),
                }),
            );
            self.summary.insert(
                "canyons".into(),
                json!({
                    "troughs": canyon.troughs,
                    "density_minima": canyon.density_minima,
                    "max_offset": canyon.max_offset(),
                }),
            );
        }
        Ok(())
    }
}

/// Validates, then runs every stage. On a stage failure the artifacts
/// already written stay in place and the manifest names the failed stage.
pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<RunManifest, RunError> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.trajectories.seed = seed;
    }
    let scenario = config.build()?;
    let dir = options.output_dir.clone().unwrap_or_else(|| PathBuf::from(&scenario.config.output.directory));
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: canonicalize(&scenario.config),
        seeds: BTreeMap::from([("trajectories".to_string(), scenario.config.trajectories.seed)]),
        warnings: vec![],
        stages: vec![],
        failure: None,
        outputs: BTreeMap::new(),
        timings: vec![],
    };
    let mut p = Pipeline {
        scenario: &scenario,
        writer: Writer { dir, created: false, digests: BTreeMap::new() },
        manifest,
        summary: serde_json::Map::new(),
    };
    let result = execute(&mut p);
    if let Err(e) = &result {
        if matches!(e, RunError::Io { .. }) && p.manifest.failure.is_none() {
            p.manifest.failure = Some(StageFailure { stage: "write".into(), message: e.to_string() });
        }
    }
    p.manifest.outputs = p.writer.digests.clone();
    let manifest_bytes = json_bytes(&p.manifest);
    let timings: BTreeMap<&str, f64> = p.manifest.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let written = p.writer.put(MANIFEST_FILE, &manifest_bytes).and_then(|_| p.writer.put(TIMINGS_FILE, &json_bytes(&timings)));
    result?;
    written?;
    Ok(p.manifest)
}

fn execute(p: &mut Pipeline<'_>) -> Result<(), RunError> {
    let tl = p.stage("solve", |p| p.solve())?;
    p.stage("analyze", |p| p.analyze(&tl))?;
    let s = p.scenario;
    let guidance = if s.config.trajectories.count > 0 || !s.streamline_seeds.is_empty() {
        Some(p.stage("guidance", |_| GuidanceTimeline::new(&tl, s.guidance).map_err(stage_err("guidance")))?)
    } else {
        None
    };
    let ensemble = match &guidance {
        Some(g) => p.stage("trajectories", |p| p.trajectories(g))?,
        None => None,
    };
    p.stage("diagnostics", |p| p.diagnose(&tl, guidance.as_ref(), ensemble.as_ref()))?;
    if p.wants(Artifact::Summary) {
        let bytes = json_bytes(&Value::Object(p.summary.clone()));
        p.stage("summary", |p| p.writer.put("summary.json", &bytes))?;
    }
    Ok(())
}

/// Reads the manifest of a finished run.
pub fn read_manifest(dir: &Path) -> std::io::Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}
