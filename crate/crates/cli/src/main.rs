//! Command-line front end: validate patterns, run the full preview pipeline,
//! or compare the 2D simulator against the direct constrained solver.
//!
//! Exit codes: 0 success, 2 I/O error, 3 malformed pattern document,
//! 4 pattern validation error, 1 any other stage failure. Stdout carries
//! artifact paths and summary lines; diagnostics go to stderr as JSON.
//! Set `SMOCKSIM_LOG=info` (or `debug`) for progress logging.

use clap::{Parser, Subcommand, ValueEnum};
use smocksim::baseline::DirectSolveOptions;
use smocksim::deform3d::DeformConfig;
use smocksim::lift3d::HeightMode;
use smocksim::pattern::SmockingStyle;
use smocksim::pipeline::{run_compare, run_preview, PipelineError, PreviewOptions, StageError};
use smocksim::sim2d::{PullMode, SimConfig2D};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "smocksim",
    version,
    about = "Preview smocked-fabric results from grid stitching patterns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a pattern file parses and satisfies all invariants.
    Validate { pattern: PathBuf },
    /// Run the full pipeline and write mesh, traces, and manifest.
    Preview {
        pattern: PathBuf,
        /// Target thread shrinkage in (0, 1].
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
        /// Fabric thickness in meters.
        #[arg(long, default_value_t = 0.01)]
        thickness: f64,
        /// Pulling direction: angle in degrees, or "per-spring".
        #[arg(long, default_value = "0")]
        pull: String,
        /// Fine cells per coarse grid cell (even).
        #[arg(long, default_value_t = 6)]
        subdivision: usize,
        #[arg(long = "w-sew", default_value_t = 0.1)]
        w_sew: f64,
        #[arg(long = "w-pos", default_value_t = 0.01)]
        w_pos: f64,
        /// Force italian or canadian handling regardless of the pattern.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long = "height-mode", value_enum, default_value_t = HeightModeArg::Pythagorean)]
        height_mode: HeightModeArg,
        /// Reserved; the pipeline is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
        /// Add the two cell diagonals as extra fabric springs.
        #[arg(long = "diagonal-springs")]
        diagonal_springs: bool,
        /// Also write the lifted 3D guide constraints as JSON.
        #[arg(long = "emit-constraints")]
        emit_constraints: bool,
        /// Artifact base name; defaults to the pattern file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Run both solvers on the same spring system and report timings.
    Compare {
        pattern: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
        #[arg(long, default_value_t = 0.01)]
        thickness: f64,
        /// Pulling direction: angle in degrees, or "per-spring".
        #[arg(long, default_value = "0")]
        pull: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Italian,
    Canadian,
}

impl From<ModeArg> for SmockingStyle {
    fn from(mode: ModeArg) -> SmockingStyle {
        match mode {
            ModeArg::Italian => SmockingStyle::Italian,
            ModeArg::Canadian => SmockingStyle::Canadian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum HeightModeArg {
    Pythagorean,
    Flat,
}

impl From<HeightModeArg> for HeightMode {
    fn from(mode: HeightModeArg) -> HeightMode {
        match mode {
            HeightModeArg::Pythagorean => HeightMode::Pythagorean,
            HeightModeArg::Flat => HeightMode::FlatCrease,
        }
    }
}

const EXIT_STAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_SCHEMA: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SMOCKSIM_LOG")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { pattern } => cmd_validate(&pattern),
        Command::Preview {
            pattern,
            gamma,
            thickness,
            pull,
            subdivision,
            w_sew,
            w_pos,
            mode,
            height_mode,
            seed,
            out_dir,
            diagonal_springs,
            emit_constraints,
            name,
        } => {
            if seed.is_some() {
                log::info!("--seed is reserved; the pipeline is deterministic");
            }
            match parse_pull(&pull) {
                Ok(pull_mode) => {
                    let opts = PreviewOptions {
                        sim: SimConfig2D {
                            gamma,
                            thickness,
                            pull_mode,
                            ..SimConfig2D::default()
                        },
                        deform: DeformConfig {
                            subdivision,
                            w_sew,
                            w_pos,
                            ..DeformConfig::default()
                        },
                        height_mode: height_mode.into(),
                        style_override: mode.map(SmockingStyle::from),
                        diagonal_springs,
                        out_dir,
                        name,
                        emit_constraints,
                    };
                    cmd_preview(&pattern, &opts)
                }
                Err(message) => {
                    diagnostic("usage", &message, None);
                    EXIT_IO
                }
            }
        }
        Command::Compare {
            pattern,
            gamma,
            thickness,
            pull,
            out,
        } => match parse_pull(&pull) {
            Ok(pull_mode) => {
                let sim = SimConfig2D {
                    gamma,
                    thickness,
                    pull_mode,
                    ..SimConfig2D::default()
                };
                cmd_compare(&pattern, &sim, out.as_deref())
            }
            Err(message) => {
                diagnostic("usage", &message, None);
                EXIT_IO
            }
        },
    };
    ExitCode::from(code)
}

fn parse_pull(text: &str) -> Result<PullMode, String> {
    if text.eq_ignore_ascii_case("per-spring") {
        return Ok(PullMode::PerSpring);
    }
    text.parse::<f64>()
        .map(PullMode::from_degrees)
        .map_err(|_| format!("--pull must be an angle in degrees or \"per-spring\", got {text:?}"))
}

/// Machine-readable diagnostic on stderr.
fn diagnostic(kind: &str, message: &str, detail: Option<serde_json::Value>) {
    let mut body = serde_json::json!({ "error": kind, "message": message });
    if let Some(detail) = detail {
        body["detail"] = detail;
    }
    eprintln!("{body}");
}

fn cmd_validate(pattern: &std::path::Path) -> u8 {
    let text = match std::fs::read_to_string(pattern) {
        Ok(text) => text,
        Err(e) => {
            diagnostic(
                "io",
                &format!("cannot read {}: {e}", pattern.display()),
                None,
            );
            return EXIT_IO;
        }
    };
    match smocksim::pattern::parse_pattern(&text) {
        Ok(parsed) => {
            println!(
                "valid: {} ({}x{} grid, {} paths, {} beads)",
                pattern.display(),
                parsed.rows(),
                parsed.cols(),
                parsed.paths().len(),
                parsed.beads().len()
            );
            0
        }
        Err(e) if e.is_schema() => {
            let detail = if let smocksim::pattern::PatternError::Schema(inner) = &e {
                Some(serde_json::json!({ "line": inner.line(), "column": inner.column() }))
            } else {
                None
            };
            diagnostic("schema", &e.to_string(), detail);
            EXIT_SCHEMA
        }
        Err(e) => {
            diagnostic("validation", &e.to_string(), None);
            EXIT_VALIDATION
        }
    }
}

fn pipeline_exit_code(err: &PipelineError) -> u8 {
    match &err.source {
        StageError::Io(_) => EXIT_IO,
        StageError::Pattern(p) if p.is_schema() => EXIT_SCHEMA,
        StageError::Pattern(_) => EXIT_VALIDATION,
        _ => EXIT_STAGE,
    }
}

fn cmd_preview(pattern: &std::path::Path, opts: &PreviewOptions) -> u8 {
    log::info!("previewing {}", pattern.display());
    match run_preview(pattern, opts) {
        Ok(manifest) => {
            for artifact in &manifest.artifacts {
                println!("{artifact}");
            }
            if let Some(results) = &manifest.results {
                println!(
                    "shrinkage {:.4} after {} iterations; deformation energy {:.3e} after {} rounds",
                    results.shrinkage_ratio,
                    results.sim_iterations,
                    results.final_energy,
                    results.deform_iterations
                );
            }
            0
        }
        Err(e) => {
            diagnostic(
                "stage",
                &e.to_string(),
                Some(serde_json::json!({ "stage": e.stage })),
            );
            pipeline_exit_code(&e)
        }
    }
}

fn cmd_compare(pattern: &std::path::Path, sim: &SimConfig2D, out: Option<&std::path::Path>) -> u8 {
    log::info!("comparing solvers on {}", pattern.display());
    match run_compare(pattern, sim, &DirectSolveOptions::default(), false) {
        Ok(report) => {
            let json = report.to_json_string();
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, format!("{json}\n")) {
                        diagnostic("io", &format!("cannot write {}: {e}", path.display()), None);
                        return EXIT_IO;
                    }
                    println!("{}", path.display());
                }
                None => println!("{json}"),
            }
            0
        }
        Err(e) => {
            diagnostic(
                "stage",
                &e.to_string(),
                Some(serde_json::json!({ "stage": e.stage })),
            );
            pipeline_exit_code(&e)
        }
    }
}
