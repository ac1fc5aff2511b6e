//! End-to-end orchestration: validate -> 2D solve -> lift -> deform ->
//! export, plus the side-by-side comparison against the direct solver.
//!
//! Artifacts for a run named `name` land in the output directory as
//! `name.obj`, `name.trace.csv`, `name.energy.csv`, `name.manifest.json`
//! (and optionally `name.constraints.json`). The mesh and CSV artifacts are
//! byte-stable across reruns; the manifest records wall times and is not.

use crate::baseline::{solve_direct, BaselineError, DirectSolveOptions};
use crate::deform3d::{deform, energy_csv_string, DeformConfig, DeformError};
use crate::lift3d::{build_constraints, HeightMode};
use crate::mesh::{make_fine_mesh, obj_to_string};
use crate::pattern::{
    extract_springs_with, parse_pattern, PatternError, SmockingStyle, SpringSystem,
};
use crate::sim2d::{
    max_fabric_violation, simulate, simulate_canadian, thread_length, SimConfig2D, Sim2dError,
};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct PreviewOptions {
    pub sim: SimConfig2D,
    pub deform: DeformConfig,
    pub height_mode: HeightMode,
    /// Force Italian or Canadian handling regardless of the pattern's own
    /// style declaration.
    pub style_override: Option<SmockingStyle>,
    pub diagonal_springs: bool,
    pub out_dir: PathBuf,
    /// Artifact base name; defaults to the input file stem.
    pub name: Option<String>,
    /// Also write the lifted guide constraints as JSON.
    pub emit_constraints: bool,
}

impl Default for PreviewOptions {
    fn default() -> Self {
        PreviewOptions {
            sim: SimConfig2D::default(),
            deform: DeformConfig::default(),
            height_mode: HeightMode::Pythagorean,
            style_override: None,
            diagonal_springs: false,
            out_dir: PathBuf::from("."),
            name: None,
            emit_constraints: false,
        }
    }
}

#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub source: StageError,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Sim2d(#[from] Sim2dError),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

fn stage_err<E: Into<StageError>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        source: e.into(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub name: &'static str,
    pub status: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternSummary {
    pub rows: usize,
    pub cols: usize,
    pub style: SmockingStyle,
    pub grid_vertices: usize,
    pub stitching_vertices: usize,
    pub stitch_springs: usize,
    pub fine_vertices: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub sim: SimConfig2D,
    pub deform: DeformConfig,
    pub height_mode: HeightMode,
    pub style: SmockingStyle,
    pub diagonal_springs: bool,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct PreviewResults {
    pub sim_iterations: usize,
    pub shrinkage_ratio: f64,
    pub thread_length: f64,
    pub max_fabric_violation: f64,
    pub deform_iterations: usize,
    pub final_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub input: String,
    pub pattern: Option<PatternSummary>,
    pub config: ResolvedConfig,
    pub stages: Vec<StageReport>,
    pub results: Option<PreviewResults>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }
}

/// Run the full preview pipeline, writing artifacts as stages complete so
/// partial outputs survive a failing stage. The manifest is written last in
/// both the success and failure paths.
pub fn run_preview(pattern_path: &Path, opts: &PreviewOptions) -> Result<RunManifest, PipelineError> {
    let name = opts
        .name
        .clone()
        .or_else(|| {
            pattern_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "preview".to_string());
    let artifact = |ext: &str| opts.out_dir.join(format!("{name}.{ext}"));

    let mut manifest = RunManifest {
        input: pattern_path.display().to_string(),
        pattern: None,
        config: ResolvedConfig {
            sim: opts.sim.clone(),
            deform: opts.deform.clone(),
            height_mode: opts.height_mode,
            // provisional; fixed up once the pattern is parsed
            style: opts.style_override.unwrap_or(SmockingStyle::Italian),
            diagonal_springs: opts.diagonal_springs,
        },
        stages: Vec::new(),
        results: None,
        artifacts: Vec::new(),
    };

    let result = run_preview_stages(pattern_path, opts, &name, &mut manifest);
    fs::create_dir_all(&opts.out_dir).map_err(stage_err("manifest"))?;
    let manifest_path = artifact("manifest.json");
    fs::write(&manifest_path, manifest.to_json_string()).map_err(stage_err("manifest"))?;
    manifest.artifacts.push(manifest_path.display().to_string());
    result.map(|()| manifest)
}

fn run_preview_stages(
    pattern_path: &Path,
    opts: &PreviewOptions,
    name: &str,
    manifest: &mut RunManifest,
) -> Result<(), PipelineError> {
    let artifact = |ext: &str| opts.out_dir.join(format!("{name}.{ext}"));
    let record = |manifest: &mut RunManifest, stage: &'static str, seconds: f64, ok: bool, detail: String| {
        manifest.stages.push(StageReport {
            name: stage,
            status: if ok { "completed".into() } else { detail },
            seconds,
        });
    };

    // parse + validate
    let t = Instant::now();
    let text = match fs::read_to_string(pattern_path) {
        Ok(text) => text,
        Err(e) => {
            record(manifest, "parse", t.elapsed().as_secs_f64(), false, format!("failed: {e}"));
            return Err(stage_err("parse")(e));
        }
    };
    let pattern = match parse_pattern(&text) {
        Ok(p) => p,
        Err(e) => {
            record(manifest, "parse", t.elapsed().as_secs_f64(), false, format!("failed: {e}"));
            return Err(stage_err("parse")(e));
        }
    };
    let style = opts.style_override.unwrap_or(pattern.style());
    let pattern = pattern.restyled(style);
    manifest.config.style = style;
    let sys = extract_springs_with(&pattern, opts.sim.thickness, opts.diagonal_springs);
    manifest.pattern = Some(PatternSummary {
        rows: pattern.rows(),
        cols: pattern.cols(),
        style,
        grid_vertices: pattern.vertex_count(),
        stitching_vertices: sys.stitching_vertices().len(),
        stitch_springs: sys.stitch_springs().len(),
        fine_vertices: ((pattern.rows() - 1) * opts.deform.subdivision + 1)
            * ((pattern.cols() - 1) * opts.deform.subdivision + 1),
    });
    record(manifest, "parse", t.elapsed().as_secs_f64(), true, String::new());

    fs::create_dir_all(&opts.out_dir).map_err(stage_err("sim2d"))?;

    // 2D simulation
    let t = Instant::now();
    let sim_result = match style {
        SmockingStyle::Italian => simulate(&sys, &opts.sim),
        SmockingStyle::Canadian => simulate_canadian(&sys, &opts.sim),
    };
    let (solved, trace) = match sim_result {
        Ok(out) => out,
        Err(e) => {
            record(manifest, "sim2d", t.elapsed().as_secs_f64(), false, format!("failed: {e}"));
            return Err(stage_err("sim2d")(e));
        }
    };
    let sim_seconds = t.elapsed().as_secs_f64();
    let trace_path = artifact("trace.csv");
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).map_err(stage_err("sim2d"))?;
    fs::write(&trace_path, csv).map_err(stage_err("sim2d"))?;
    manifest.artifacts.push(trace_path.display().to_string());
    record(manifest, "sim2d", sim_seconds, true, String::new());

    let rest_thread = sys.rest_thread_length();
    let final_thread = thread_length(&solved, sys.stitch_springs());
    let mut results = PreviewResults {
        sim_iterations: trace.len(),
        shrinkage_ratio: if rest_thread > 0.0 {
            final_thread / rest_thread
        } else {
            1.0
        },
        thread_length: final_thread,
        max_fabric_violation: max_fabric_violation(&solved, &sys, opts.sim.thickness),
        ..PreviewResults::default()
    };

    // lift to 3D constraints
    let t = Instant::now();
    let constraints = build_constraints(&solved, &sys, opts.height_mode);
    if opts.emit_constraints {
        let path = artifact("constraints.json");
        let mut buf = Vec::new();
        constraints.write_json(&mut buf).map_err(stage_err("lift3d"))?;
        fs::write(&path, buf).map_err(stage_err("lift3d"))?;
        manifest.artifacts.push(path.display().to_string());
    }
    record(manifest, "lift3d", t.elapsed().as_secs_f64(), true, String::new());

    // fine deformation
    let t = Instant::now();
    let mesh = make_fine_mesh(&pattern, &sys, opts.deform.subdivision);
    let (deformed, history) = match deform(&mesh, &constraints, &opts.deform) {
        Ok(out) => out,
        Err(e) => {
            record(manifest, "deform3d", t.elapsed().as_secs_f64(), false, format!("failed: {e}"));
            return Err(stage_err("deform3d")(e));
        }
    };
    let deform_seconds = t.elapsed().as_secs_f64();
    let energy_path = artifact("energy.csv");
    fs::write(&energy_path, energy_csv_string(&history)).map_err(stage_err("deform3d"))?;
    manifest.artifacts.push(energy_path.display().to_string());
    let obj_path = artifact("obj");
    fs::write(&obj_path, obj_to_string(&deformed)).map_err(stage_err("deform3d"))?;
    manifest.artifacts.push(obj_path.display().to_string());
    record(manifest, "deform3d", deform_seconds, true, String::new());

    results.deform_iterations = history.len().saturating_sub(1);
    results.final_energy = history.last().map(|e| e.e_total).unwrap_or(0.0);
    manifest.results = Some(results);
    Ok(())
}

/// One solver's entry in the comparison report.
#[derive(Debug, Clone, Serialize)]
pub struct SolverEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrinkage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub alg1: SolverEntry,
    pub direct: SolverEntry,
}

impl CompareReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Worst violation of the fabric bands and the two-sided thread bound at a
/// configuration, in meters. Used to grade both solvers identically.
pub fn constraint_violation(positions: &[[f64; 2]], sys: &SpringSystem, gamma: f64, tau: f64) -> f64 {
    let mut worst = max_fabric_violation(positions, sys, tau);
    let thread = thread_length(positions, sys.stitch_springs());
    worst = worst.max(thread - gamma * sys.rest_thread_length());
    worst = worst.max(sys.total_lower_bound() - thread);
    worst.max(0.0)
}

/// Run the 2D simulator and the direct solver on the same spring system and
/// report both; one solver failing does not abort the other.
pub fn run_compare(
    pattern_path: &Path,
    sim: &SimConfig2D,
    baseline: &DirectSolveOptions,
    diagonal_springs: bool,
) -> Result<CompareReport, PipelineError> {
    let text = fs::read_to_string(pattern_path).map_err(stage_err("parse"))?;
    let pattern = parse_pattern(&text).map_err(stage_err("parse"))?;
    let sys = extract_springs_with(&pattern, sim.thickness, diagonal_springs);

    let t = Instant::now();
    let alg1 = match simulate(&sys, sim) {
        Ok((solved, _)) => {
            let rest = sys.rest_thread_length();
            SolverEntry {
                time_s: Some(t.elapsed().as_secs_f64()),
                shrinkage: Some(if rest > 0.0 {
                    thread_length(&solved, sys.stitch_springs()) / rest
                } else {
                    1.0
                }),
                objective: None,
                max_violation: Some(constraint_violation(&solved, &sys, sim.gamma, sim.thickness)),
                error: None,
            }
        }
        Err(e) => SolverEntry {
            time_s: Some(t.elapsed().as_secs_f64()),
            shrinkage: None,
            objective: None,
            max_violation: None,
            error: Some(e.to_string()),
        },
    };

    let t = Instant::now();
    let direct = match solve_direct(&sys, sim.gamma, sim.thickness, baseline) {
        Ok(report) => SolverEntry {
            time_s: Some(report.wall_time_s),
            shrinkage: None,
            objective: Some(report.objective),
            max_violation: Some(report.max_constraint_violation),
            error: None,
        },
        Err(BaselineError::Infeasible { tol, report }) => SolverEntry {
            time_s: Some(report.wall_time_s),
            shrinkage: None,
            objective: Some(report.objective),
            max_violation: Some(report.max_constraint_violation),
            error: Some(format!("infeasible at tolerance {tol}")),
        },
        Err(e) => SolverEntry {
            time_s: Some(t.elapsed().as_secs_f64()),
            shrinkage: None,
            objective: None,
            max_violation: None,
            error: Some(e.to_string()),
        },
    };

    Ok(CompareReport { alg1, direct })
}
