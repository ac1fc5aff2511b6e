//! Python bindings: the pattern types and the pipeline stages as plain
//! functions and thin wrapper classes. Structured reports (manifests,
//! constraint sets, solver reports) cross the boundary as JSON strings.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use smocksim::baseline::{solve_direct as solve_direct_rs, BaselineError, DirectSolveOptions};
use smocksim::deform3d::{deform as deform_rs, energy_csv_string, DeformConfig, EnergyBreakdown};
use smocksim::lift3d::{build_constraints as build_constraints_rs, GuideConstraints3D, HeightMode};
use smocksim::mesh::{make_fine_mesh as make_fine_mesh_rs, obj_to_string, FineMesh};
use smocksim::pattern::{
    classify_vertices, extract_springs_with, parse_pattern as parse_pattern_rs, SmockingStyle,
};
use smocksim::pipeline::{run_preview as run_preview_rs, PreviewOptions};
use smocksim::sim2d::{
    simulate as simulate_rs, simulate_canadian as simulate_canadian_rs, PullMode, SimConfig2D,
    Sim2dError,
};

fn parse_style(text: &str) -> PyResult<SmockingStyle> {
    match text.to_ascii_lowercase().as_str() {
        "italian" => Ok(SmockingStyle::Italian),
        "canadian" => Ok(SmockingStyle::Canadian),
        other => Err(PyValueError::new_err(format!(
            "style must be \"italian\" or \"canadian\", got {other:?}"
        ))),
    }
}

fn parse_height_mode(text: &str) -> PyResult<HeightMode> {
    match text.to_ascii_lowercase().as_str() {
        "pythagorean" => Ok(HeightMode::Pythagorean),
        "flat" | "flat-crease" | "flat_crease" => Ok(HeightMode::FlatCrease),
        other => Err(PyValueError::new_err(format!(
            "height mode must be \"pythagorean\" or \"flat\", got {other:?}"
        ))),
    }
}

fn sim_error(e: Sim2dError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A validated, normalized smocking pattern.
#[pyclass(name = "Pattern")]
struct PyPattern {
    inner: smocksim::Pattern,
}

#[pymethods]
impl PyPattern {
    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    /// Grid spacing in meters after normalization.
    #[getter]
    fn unit(&self) -> f64 {
        self.inner.unit()
    }

    #[getter]
    fn style(&self) -> &'static str {
        match self.inner.style() {
            SmockingStyle::Italian => "italian",
            SmockingStyle::Canadian => "canadian",
        }
    }

    #[getter]
    fn path_count(&self) -> usize {
        self.inner.paths().len()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    /// Vertex ids on stitching paths and the remaining pleat vertices.
    fn classify(&self) -> (Vec<usize>, Vec<usize>) {
        let classes = classify_vertices(&self.inner);
        (classes.stitching, classes.pleat)
    }

    /// Serialize back to the pattern-file schema.
    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    /// Derive the coarse mass-spring system.
    #[pyo3(signature = (thickness=0.01, diagonal_springs=false))]
    fn extract_springs(&self, thickness: f64, diagonal_springs: bool) -> PySpringSystem {
        PySpringSystem {
            inner: extract_springs_with(&self.inner, thickness, diagonal_springs),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Pattern(rows={}, cols={}, style={:?}, paths={})",
            self.inner.rows(),
            self.inner.cols(),
            self.style(),
            self.inner.paths().len()
        )
    }
}

/// The coarse mass-spring system of a pattern.
#[pyclass(name = "SpringSystem")]
struct PySpringSystem {
    inner: smocksim::SpringSystem,
}

#[pymethods]
impl PySpringSystem {
    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn fabric_spring_count(&self) -> usize {
        self.inner.fabric_springs().len()
    }

    #[getter]
    fn stitch_spring_count(&self) -> usize {
        self.inner.stitch_springs().len()
    }

    #[getter]
    fn unit(&self) -> f64 {
        self.inner.unit()
    }

    fn stitching_vertices(&self) -> Vec<usize> {
        self.inner.stitching_vertices().to_vec()
    }

    fn rest_positions(&self) -> Vec<(f64, f64)> {
        self.inner
            .rest_positions()
            .iter()
            .map(|p| (p[0], p[1]))
            .collect()
    }

    /// Stitching-spring indices whose midpoints fold inward / outward.
    fn midpoint_sides(&self) -> (Vec<usize>, Vec<usize>) {
        (self.inner.front_midpoints(), self.inner.back_midpoints())
    }

    fn __repr__(&self) -> String {
        format!(
            "SpringSystem(vertices={}, fabric={}, stitching={})",
            self.inner.vertex_count(),
            self.inner.fabric_springs().len(),
            self.inner.stitch_springs().len()
        )
    }
}

/// Result of a 2D solve: the embedding plus its convergence trace.
#[pyclass(name = "SimResult")]
struct PySimResult {
    positions: Vec<[f64; 2]>,
    trace: smocksim::ConvergenceTrace,
    shrinkage_ratio: f64,
}

#[pymethods]
impl PySimResult {
    fn positions(&self) -> Vec<(f64, f64)> {
        self.positions.iter().map(|p| (p[0], p[1])).collect()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.trace.len()
    }

    #[getter]
    fn shrinkage_ratio(&self) -> f64 {
        self.shrinkage_ratio
    }

    /// Convergence trace as CSV (iteration, thread length, ratio, violation).
    fn trace_csv(&self) -> String {
        self.trace.to_csv_string()
    }
}

/// Lifted 3D guide constraints.
#[pyclass(name = "GuideConstraints")]
struct PyGuideConstraints {
    inner: GuideConstraints3D,
}

#[pymethods]
impl PyGuideConstraints {
    #[getter]
    fn sewing_targets(&self) -> Vec<f64> {
        self.inner.sewing_targets.clone()
    }

    fn midpoint_targets(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .midpoint_targets
            .iter()
            .map(|t| (t[0], t[1], t[2]))
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }
}

/// Triangulated fine fabric mesh.
#[pyclass(name = "FineMesh")]
struct PyFineMesh {
    inner: FineMesh,
}

#[pymethods]
impl PyFineMesh {
    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn triangle_count(&self) -> usize {
        self.inner.triangle_count()
    }

    fn vertices(&self) -> Vec<(f64, f64, f64)> {
        self.inner.vertices.iter().map(|v| (v[0], v[1], v[2])).collect()
    }

    fn triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .triangles
            .iter()
            .map(|t| (t[0], t[1], t[2]))
            .collect()
    }

    /// ASCII mesh file contents (v/f lines).
    fn to_obj(&self) -> String {
        obj_to_string(&self.inner)
    }
}

/// Deformed mesh plus its energy history.
#[pyclass(name = "DeformResult")]
struct PyDeformResult {
    mesh: FineMesh,
    history: Vec<EnergyBreakdown>,
}

#[pymethods]
impl PyDeformResult {
    fn mesh(&self) -> PyFineMesh {
        PyFineMesh {
            inner: self.mesh.clone(),
        }
    }

    #[getter]
    fn rounds(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    #[getter]
    fn final_energy(&self) -> f64 {
        self.history.last().map(|e| e.e_total).unwrap_or(0.0)
    }

    fn energy_csv(&self) -> String {
        energy_csv_string(&self.history)
    }
}

/// Parse a pattern document.
#[pyfunction]
fn parse_pattern(text: &str) -> PyResult<PyPattern> {
    parse_pattern_rs(text)
        .map(|inner| PyPattern { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Read and parse a pattern file.
#[pyfunction]
fn load_pattern(path: &str) -> PyResult<PyPattern> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PyIOError::new_err(format!("cannot read {path}: {e}")))?;
    parse_pattern(&text)
}

fn sim_config(
    gamma: f64,
    thickness: f64,
    pull_degrees: f64,
    per_spring: bool,
    max_iterations: u64,
) -> SimConfig2D {
    SimConfig2D {
        gamma,
        thickness,
        pull_mode: if per_spring {
            PullMode::PerSpring
        } else {
            PullMode::from_degrees(pull_degrees)
        },
        max_iterations,
        ..SimConfig2D::default()
    }
}

/// Run the 2D simulation to the shrinkage target.
#[pyfunction]
#[pyo3(signature = (system, gamma=0.3, thickness=0.01, pull_degrees=0.0, per_spring=false, max_iterations=200_000))]
fn simulate(
    system: &PySpringSystem,
    gamma: f64,
    thickness: f64,
    pull_degrees: f64,
    per_spring: bool,
    max_iterations: u64,
) -> PyResult<PySimResult> {
    let cfg = sim_config(gamma, thickness, pull_degrees, per_spring, max_iterations);
    let (positions, trace) = simulate_rs(&system.inner, &cfg).map_err(sim_error)?;
    let rest = system.inner.rest_thread_length();
    let ratio = if rest > 0.0 {
        smocksim::sim2d::thread_length(&positions, system.inner.stitch_springs()) / rest
    } else {
        1.0
    };
    Ok(PySimResult {
        positions,
        trace,
        shrinkage_ratio: ratio,
    })
}

/// Run the Canadian variant (zero-length stitch targets, fixed-point stop).
#[pyfunction]
#[pyo3(signature = (system, thickness=0.01, max_iterations=200_000))]
fn simulate_canadian(
    system: &PySpringSystem,
    thickness: f64,
    max_iterations: u64,
) -> PyResult<PySimResult> {
    let cfg = sim_config(1.0, thickness, 0.0, false, max_iterations);
    let (positions, trace) = simulate_canadian_rs(&system.inner, &cfg).map_err(sim_error)?;
    let rest = system.inner.rest_thread_length();
    let ratio = if rest > 0.0 {
        smocksim::sim2d::thread_length(&positions, system.inner.stitch_springs()) / rest
    } else {
        1.0
    };
    Ok(PySimResult {
        positions,
        trace,
        shrinkage_ratio: ratio,
    })
}

/// Lift a 2D solve into 3D positional and sewing-length targets.
#[pyfunction]
#[pyo3(signature = (result, system, height_mode="pythagorean"))]
fn build_constraints(
    result: &PySimResult,
    system: &PySpringSystem,
    height_mode: &str,
) -> PyResult<PyGuideConstraints> {
    let mode = parse_height_mode(height_mode)?;
    Ok(PyGuideConstraints {
        inner: build_constraints_rs(&result.positions, &system.inner, mode),
    })
}

/// Build the subdivided fabric mesh.
#[pyfunction]
#[pyo3(signature = (pattern, system, subdivision=6))]
fn make_fine_mesh(
    pattern: &PyPattern,
    system: &PySpringSystem,
    subdivision: usize,
) -> PyResult<PyFineMesh> {
    if subdivision < 2 || subdivision % 2 != 0 {
        return Err(PyValueError::new_err(format!(
            "subdivision must be an even integer >= 2, got {subdivision}"
        )));
    }
    Ok(PyFineMesh {
        inner: make_fine_mesh_rs(&pattern.inner, &system.inner, subdivision),
    })
}

/// Deform the fine mesh under the guide constraints.
#[pyfunction]
#[pyo3(signature = (mesh, constraints, w_sew=0.1, w_pos=0.01, dt=0.04, iterations=300, convergence_tol=1e-6, init_offset=0.0))]
#[allow(clippy::too_many_arguments)]
fn deform(
    mesh: &PyFineMesh,
    constraints: &PyGuideConstraints,
    w_sew: f64,
    w_pos: f64,
    dt: f64,
    iterations: usize,
    convergence_tol: f64,
    init_offset: f64,
) -> PyResult<PyDeformResult> {
    let cfg = DeformConfig {
        w_sew,
        w_pos,
        dt,
        iterations,
        convergence_tol,
        init_offset,
        ..DeformConfig::default()
    };
    let (deformed, history) = deform_rs(&mesh.inner, &constraints.inner, &cfg)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyDeformResult {
        mesh: deformed,
        history,
    })
}

/// Write a mesh as an ASCII mesh file.
#[pyfunction]
fn export_obj(mesh: &PyFineMesh, path: &str) -> PyResult<()> {
    std::fs::write(path, obj_to_string(&mesh.inner))
        .map_err(|e| PyIOError::new_err(format!("cannot write {path}: {e}")))
}

/// Solve the constrained 2D problem directly; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (system, gamma=0.3, thickness=0.01))]
fn solve_direct(system: &PySpringSystem, gamma: f64, thickness: f64) -> PyResult<String> {
    match solve_direct_rs(&system.inner, gamma, thickness, &DirectSolveOptions::default()) {
        Ok(report) => Ok(report.to_json_string()),
        Err(BaselineError::Infeasible { report, .. }) => Ok(report.to_json_string()),
        Err(e) => Err(PyRuntimeError::new_err(e.to_string())),
    }
}

/// Run the whole pipeline, writing artifacts next to `out_dir`; returns the
/// run manifest as JSON.
#[pyfunction]
#[pyo3(signature = (pattern_path, out_dir, gamma=0.3, thickness=0.01, pull_degrees=0.0, per_spring=false, subdivision=6, w_sew=0.1, w_pos=0.01, mode=None, height_mode="pythagorean", emit_constraints=false, name=None))]
#[allow(clippy::too_many_arguments)]
fn run_preview(
    pattern_path: &str,
    out_dir: &str,
    gamma: f64,
    thickness: f64,
    pull_degrees: f64,
    per_spring: bool,
    subdivision: usize,
    w_sew: f64,
    w_pos: f64,
    mode: Option<&str>,
    height_mode: &str,
    emit_constraints: bool,
    name: Option<String>,
) -> PyResult<String> {
    let opts = PreviewOptions {
        sim: sim_config(gamma, thickness, pull_degrees, per_spring, 200_000),
        deform: DeformConfig {
            subdivision,
            w_sew,
            w_pos,
            ..DeformConfig::default()
        },
        height_mode: parse_height_mode(height_mode)?,
        style_override: mode.map(parse_style).transpose()?,
        diagonal_springs: false,
        out_dir: out_dir.into(),
        name,
        emit_constraints,
    };
    run_preview_rs(std::path::Path::new(pattern_path), &opts)
        .map(|manifest| manifest.to_json_string())
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Expected length of a fabric spring (current clamped into [thickness, rest]).
#[pyfunction]
fn expected_length_fabric(
    xi: (f64, f64),
    xj: (f64, f64),
    rest_i: (f64, f64),
    rest_j: (f64, f64),
    thickness: f64,
) -> f64 {
    smocksim::sim2d::expected_length_fabric(
        [xi.0, xi.1],
        [xj.0, xj.1],
        [rest_i.0, rest_i.1],
        [rest_j.0, rest_j.1],
        thickness,
    )
}

/// Expected length of a stitching spring (projection orthogonal to the pull).
#[pyfunction]
fn expected_length_stitch(
    xi: (f64, f64),
    xj: (f64, f64),
    orth_dir: (f64, f64),
    lower_bound: f64,
) -> f64 {
    smocksim::sim2d::expected_length_stitch(
        [xi.0, xi.1],
        [xj.0, xj.1],
        [orth_dir.0, orth_dir.1],
        lower_bound,
    )
}

/// Fold height of a stitch midpoint.
#[pyfunction]
#[pyo3(signature = (rest_length, solved_length, mode="pythagorean"))]
fn midpoint_height(rest_length: f64, solved_length: f64, mode: &str) -> PyResult<f64> {
    Ok(smocksim::lift3d::midpoint_height(
        rest_length,
        solved_length,
        parse_height_mode(mode)?,
    ))
}

#[pymodule]
fn smocksim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPattern>()?;
    m.add_class::<PySpringSystem>()?;
    m.add_class::<PySimResult>()?;
    m.add_class::<PyGuideConstraints>()?;
    m.add_class::<PyFineMesh>()?;
    m.add_class::<PyDeformResult>()?;
    m.add_function(wrap_pyfunction!(parse_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(load_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_canadian, m)?)?;
    m.add_function(wrap_pyfunction!(build_constraints, m)?)?;
    m.add_function(wrap_pyfunction!(make_fine_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(deform, m)?)?;
    m.add_function(wrap_pyfunction!(export_obj, m)?)?;
    m.add_function(wrap_pyfunction!(solve_direct, m)?)?;
    m.add_function(wrap_pyfunction!(run_preview, m)?)?;
    m.add_function(wrap_pyfunction!(expected_length_fabric, m)?)?;
    m.add_function(wrap_pyfunction!(expected_length_stitch, m)?)?;
    m.add_function(wrap_pyfunction!(midpoint_height, m)?)?;
    Ok(())
}
