//! Damped explicit integration of the coarse mass-spring system.
//!
//! Each iteration re-estimates an expected length for every spring from the
//! current embedding — fabric springs clamp their current length into
//! `[thickness, rest]`, stitching springs take the length of their projection
//! orthogonal to the pulling direction — then integrates one damped Euler
//! step toward those targets. The loop stops once the total thread length
//! drops below the `gamma` fraction of its rest value.
//!
//! Masses are implicit and uniform: accelerations accumulate directly from
//! spring displacements. Forces are accumulated over springs in index order
//! (stitching springs first), so identical inputs produce bit-identical
//! trajectories.

use crate::pattern::{SpringSystem, StitchSpring};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

/// How the pulling direction is assigned to stitching springs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PullMode {
    /// One direction for all threads; stitches aligned with it shrink
    /// fastest, stitches orthogonal to it keep their projected length.
    Global { pulling: [f64; 2] },
    /// Each stitching spring is pulled along its own axis, so its expected
    /// length collapses to the lower bound. Used for curve patterns whose
    /// stitching directions wind through more than a full turn.
    PerSpring,
}

impl PullMode {
    /// Global pull at `degrees` from the x-axis.
    pub fn from_degrees(degrees: f64) -> PullMode {
        let rad = degrees.to_radians();
        PullMode::Global {
            pulling: [rad.cos(), rad.sin()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig2D {
    /// Target shrinkage: stop once the thread length is at most this
    /// fraction of its rest value. In (0, 1].
    pub gamma: f64,
    /// Fabric thickness in meters; lower bound for all spring lengths.
    pub thickness: f64,
    pub pull_mode: PullMode,
    /// Time step in seconds.
    pub dt: f64,
    /// Velocity damping ratio per step, in (0, 1).
    pub damping: f64,
    pub k_fabric: f64,
    pub k_stitch: f64,
    /// Safety cap on iterations.
    pub max_iterations: u64,
}

impl Default for SimConfig2D {
    fn default() -> Self {
        SimConfig2D {
            gamma: 0.3,
            thickness: 0.01,
            pull_mode: PullMode::from_degrees(0.0),
            dt: 0.1,
            damping: 0.9,
            k_fabric: 1.0,
            k_stitch: 5.0,
            max_iterations: 200_000,
        }
    }
}

impl SimConfig2D {
    pub fn validate(&self) -> Result<(), Sim2dError> {
        let bad = |msg: String| Err(Sim2dError::InvalidConfig(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.thickness > 0.0) {
            return bad(format!("thickness must be positive, got {}", self.thickness));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad(format!("damping must be in (0, 1), got {}", self.damping));
        }
        if !(self.k_fabric > 0.0 && self.k_stitch > 0.0) {
            return bad(format!(
                "stiffnesses must be positive, got k_fabric={} k_stitch={}",
                self.k_fabric, self.k_stitch
            ));
        }
        if let PullMode::Global { pulling } = self.pull_mode {
            if norm(pulling) < 1e-12 {
                return bad("pulling direction must be nonzero".to_string());
            }
        }
        Ok(())
    }
}

/// Mutable simulation state. `expected_lengths` holds the per-spring targets
/// from the most recent step, stitching springs first, then fabric springs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState2D {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub expected_lengths: Vec<f64>,
    pub iteration: u64,
    pub shrinkage_ratio: f64,
    rest_thread_length: f64,
}

impl SimState2D {
    /// Initial state: the rest embedding at zero velocity.
    pub fn new(sys: &SpringSystem) -> SimState2D {
        let n_springs = sys.stitch_springs().len() + sys.fabric_springs().len();
        SimState2D {
            positions: sys.rest_positions().to_vec(),
            velocities: vec![[0.0; 2]; sys.vertex_count()],
            expected_lengths: vec![0.0; n_springs],
            iteration: 0,
            shrinkage_ratio: 1.0,
            rest_thread_length: sys.rest_thread_length(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub thread_length: f64,
    pub shrinkage_ratio: f64,
    pub max_fabric_violation: f64,
}

/// Per-iteration convergence history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,thread_length,shrinkage_ratio,max_fabric_violation")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.thread_length, r.shrinkage_ratio, r.max_fabric_violation
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

#[derive(Debug, Error)]
pub enum Sim2dError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state has {state_vertices} vertices / {state_springs} expected lengths, system has {system_vertices} / {system_springs}")]
    StateMismatch {
        state_vertices: usize,
        state_springs: usize,
        system_vertices: usize,
        system_springs: usize,
    },
    #[error("coordinates became non-finite at iteration {iteration}; dt or stiffness too large")]
    NumericalBlowup { iteration: u64 },
    #[error("no convergence after {max_iterations} iterations: shrinkage {shrinkage_ratio:.6} vs target {gamma}")]
    MaxIterationsExceeded {
        max_iterations: u64,
        shrinkage_ratio: f64,
        gamma: f64,
        trace: ConvergenceTrace,
    },
}

fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

/// Total length of the threads along the stitching paths: the sum of the
/// Euclidean endpoint distances over all stitching springs.
pub fn thread_length(positions: &[[f64; 2]], springs: &[StitchSpring]) -> f64 {
    springs
        .iter()
        .map(|s| distance(positions[s.i], positions[s.j]))
        .sum()
}

/// Expected length of a fabric spring: the current length clamped into
/// `[thickness, rest length]`.
pub fn expected_length_fabric(
    xi: [f64; 2],
    xj: [f64; 2],
    rest_i: [f64; 2],
    rest_j: [f64; 2],
    thickness: f64,
) -> f64 {
    let current = distance(xi, xj);
    let rest = distance(rest_i, rest_j);
    thickness.max(current.min(rest))
}

/// Expected length of a stitching spring: the absolute projection of the
/// spring vector onto `orth_dir` (a unit vector orthogonal to the pulling
/// direction), clamped from below.
pub fn expected_length_stitch(
    xi: [f64; 2],
    xj: [f64; 2],
    orth_dir: [f64; 2],
    lower_bound: f64,
) -> f64 {
    let proj = (xi[0] - xj[0]) * orth_dir[0] + (xi[1] - xj[1]) * orth_dir[1];
    lower_bound.max(proj.abs())
}

/// Per-spring expected-length rule for one step.
#[derive(Clone, Copy)]
enum StitchRule {
    /// Eq-style projection against a fixed orthogonal direction.
    Project { orth: [f64; 2] },
    /// Pulling direction aligned with each spring; the orthogonal projection
    /// vanishes and the expected length is the spring's lower bound.
    PerSpring,
    /// Canadian mode: all stitching springs contract toward zero.
    Zero,
}

impl StitchRule {
    fn from_config(cfg: &SimConfig2D) -> StitchRule {
        match cfg.pull_mode {
            PullMode::Global { pulling } => {
                let len = norm(pulling);
                let p = [pulling[0] / len, pulling[1] / len];
                StitchRule::Project { orth: [-p[1], p[0]] }
            }
            PullMode::PerSpring => StitchRule::PerSpring,
        }
    }

    fn expected(self, s: &StitchSpring, positions: &[[f64; 2]], sys: &SpringSystem) -> f64 {
        match self {
            StitchRule::Project { orth } => {
                expected_length_stitch(positions[s.i], positions[s.j], orth, s.lower_bound)
            }
            StitchRule::PerSpring => {
                let xi = positions[s.i];
                let xj = positions[s.j];
                let v = [xi[0] - xj[0], xi[1] - xj[1]];
                let len = norm(v);
                // Degenerate springs reuse their rest-pose direction.
                let dir = if len > 0.0 {
                    [v[0] / len, v[1] / len]
                } else {
                    let ri = sys.rest_positions()[s.i];
                    let rj = sys.rest_positions()[s.j];
                    let rv = [ri[0] - rj[0], ri[1] - rj[1]];
                    let rlen = norm(rv);
                    [rv[0] / rlen, rv[1] / rlen]
                };
                expected_length_stitch(xi, xj, [-dir[1], dir[0]], s.lower_bound)
            }
            StitchRule::Zero => 0.0,
        }
    }
}

/// Largest amount by which any fabric spring currently violates its
/// `[thickness, rest]` band, in meters.
pub fn max_fabric_violation(positions: &[[f64; 2]], sys: &SpringSystem, thickness: f64) -> f64 {
    max_fabric_band_violation(positions, sys, thickness, 0.0)
}

/// As [`max_fabric_violation`], but against the relaxed band
/// `[thickness * (1 - delta), rest * (1 + delta)]`.
pub fn max_fabric_band_violation(
    positions: &[[f64; 2]],
    sys: &SpringSystem,
    thickness: f64,
    delta: f64,
) -> f64 {
    sys.fabric_springs()
        .iter()
        .map(|s| {
            let len = distance(positions[s.i], positions[s.j]);
            (thickness * (1.0 - delta) - len)
                .max(len - s.rest_length * (1.0 + delta))
                .max(0.0)
        })
        .fold(0.0, f64::max)
}

/// One damped explicit-Euler step toward freshly estimated expected lengths.
pub fn step(state: &mut SimState2D, sys: &SpringSystem, cfg: &SimConfig2D) -> Result<(), Sim2dError> {
    step_with_targets(state, sys, cfg, &StitchTargets::Rule(StitchRule::from_config(cfg)))
}

/// How stitch expected lengths are produced during one step: the raw rule,
/// or the rule with its per-iteration drop capped so the integration stays
/// quasi-static.
enum StitchTargets {
    Rule(StitchRule),
    RateLimited(StitchRule),
}

fn step_with_targets(
    state: &mut SimState2D,
    sys: &SpringSystem,
    cfg: &SimConfig2D,
    targets: &StitchTargets,
) -> Result<(), Sim2dError> {
    let n_stitch = sys.stitch_springs().len();
    let n_springs = n_stitch + sys.fabric_springs().len();
    if state.positions.len() != sys.vertex_count() || state.expected_lengths.len() != n_springs {
        return Err(Sim2dError::StateMismatch {
            state_vertices: state.positions.len(),
            state_springs: state.expected_lengths.len(),
            system_vertices: sys.vertex_count(),
            system_springs: n_springs,
        });
    }

    match targets {
        StitchTargets::Rule(rule) => {
            for (k, s) in sys.stitch_springs().iter().enumerate() {
                state.expected_lengths[k] = rule.expected(s, &state.positions, sys);
            }
        }
        StitchTargets::RateLimited(rule) => {
            let max_drop = PULL_RATE * sys.unit();
            for (k, s) in sys.stitch_springs().iter().enumerate() {
                let current = distance(state.positions[s.i], state.positions[s.j]);
                let target = rule.expected(s, &state.positions, sys);
                state.expected_lengths[k] = target.max(current - max_drop);
            }
        }
    }
    for (k, s) in sys.fabric_springs().iter().enumerate() {
        state.expected_lengths[n_stitch + k] = expected_length_fabric(
            state.positions[s.i],
            state.positions[s.j],
            sys.rest_positions()[s.i],
            sys.rest_positions()[s.j],
            cfg.thickness,
        );
    }

    let mut accel = vec![[0.0f64; 2]; state.positions.len()];
    let mut apply = |i: usize, j: usize, expected: f64, k: f64, positions: &[[f64; 2]]| {
        let v = [
            positions[i][0] - positions[j][0],
            positions[i][1] - positions[j][1],
        ];
        let len = norm(v);
        // Coincident endpoints have no defined axis; they exert no force.
        if len > 0.0 {
            let scale = k * (len - expected) / len;
            let d = [scale * v[0], scale * v[1]];
            accel[i][0] -= d[0];
            accel[i][1] -= d[1];
            accel[j][0] += d[0];
            accel[j][1] += d[1];
        }
    };
    for (k, s) in sys.stitch_springs().iter().enumerate() {
        apply(s.i, s.j, state.expected_lengths[k], cfg.k_stitch, &state.positions);
    }
    for (k, s) in sys.fabric_springs().iter().enumerate() {
        apply(
            s.i,
            s.j,
            state.expected_lengths[n_stitch + k],
            cfg.k_fabric,
            &state.positions,
        );
    }

    for (v, a) in state.velocities.iter_mut().zip(&accel) {
        v[0] = cfg.damping * (v[0] + a[0] * cfg.dt);
        v[1] = cfg.damping * (v[1] + a[1] * cfg.dt);
    }
    for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
        x[0] += v[0] * cfg.dt;
        x[1] += v[1] * cfg.dt;
    }
    state.iteration += 1;

    if state
        .positions
        .iter()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Sim2dError::NumericalBlowup {
            iteration: state.iteration,
        });
    }

    let d = thread_length(&state.positions, sys.stitch_springs());
    state.shrinkage_ratio = if state.rest_thread_length > 0.0 {
        d / state.rest_thread_length
    } else {
        1.0
    };
    Ok(())
}

/// Run the 2D simulation until the thread length drops to `gamma` times its
/// rest value. The stopping criterion is checked before each step, so
/// `gamma = 1` performs zero steps and returns the rest embedding exactly.
///
/// The pull is quasi-static: the per-iteration drop of each stitch expected
/// length is capped (see [`PULL_RATE`]) so the fabric tracks the shrinking
/// threads inside its soft `[thickness, rest]` band for the whole run, not
/// just asymptotically.
pub fn simulate(
    sys: &SpringSystem,
    cfg: &SimConfig2D,
) -> Result<(Vec<[f64; 2]>, ConvergenceTrace), Sim2dError> {
    run(sys, cfg, StitchRule::from_config(cfg), StopRule::Shrinkage)
}

/// Canadian variant: every stitching spring contracts toward zero length and
/// the loop stops at a displacement fixed point (`gamma` is ignored, since
/// the zero-length targets make the shrinkage bound degenerate).
pub fn simulate_canadian(
    sys: &SpringSystem,
    cfg: &SimConfig2D,
) -> Result<(Vec<[f64; 2]>, ConvergenceTrace), Sim2dError> {
    run(sys, cfg, StitchRule::Zero, StopRule::FixedPoint)
}

enum StopRule {
    Shrinkage,
    FixedPoint,
}

/// Per-iteration cap on how far a stitch expected length may drop below the
/// spring's current length, in grid units. Keeps the pull quasi-static so
/// the fabric never lags its target band by more than a few percent.
pub const PULL_RATE: f64 = 0.01;

/// The damped map spirals, so per-iteration displacement momentarily dips
/// near zero at oscillation turning points long before the state settles.
/// The fixed-point test therefore has to hold over consecutive iterations.
const FIXED_POINT_WINDOW: u32 = 3;

fn run(
    sys: &SpringSystem,
    cfg: &SimConfig2D,
    rule: StitchRule,
    stop: StopRule,
) -> Result<(Vec<[f64; 2]>, ConvergenceTrace), Sim2dError> {
    cfg.validate()?;
    let mut state = SimState2D::new(sys);
    let mut trace = ConvergenceTrace::default();
    let rest_length = sys.rest_thread_length();
    let targets = StitchTargets::RateLimited(rule);

    if sys.stitch_springs().is_empty() {
        return Ok((state.positions, trace));
    }

    macro_rules! advance {
        () => {{
            if state.iteration >= cfg.max_iterations {
                return Err(Sim2dError::MaxIterationsExceeded {
                    max_iterations: cfg.max_iterations,
                    shrinkage_ratio: state.shrinkage_ratio,
                    gamma: cfg.gamma,
                    trace,
                });
            }
            step_with_targets(&mut state, sys, cfg, &targets)?;
            trace.records.push(TraceRecord {
                iteration: state.iteration,
                thread_length: thread_length(&state.positions, sys.stitch_springs()),
                shrinkage_ratio: state.shrinkage_ratio,
                max_fabric_violation: max_fabric_violation(&state.positions, sys, cfg.thickness),
            });
        }};
    }

    match stop {
        StopRule::Shrinkage => {
            // Checked before stepping, so gamma = 1 performs zero steps and
            // returns the rest embedding exactly.
            while thread_length(&state.positions, sys.stitch_springs()) > cfg.gamma * rest_length {
                advance!();
            }
        }
        StopRule::FixedPoint => {
            let displacement_tol = 1e-6 * sys.unit();
            let mut previous = Vec::new();
            let mut settled_for = 0u32;
            while settled_for < FIXED_POINT_WINDOW {
                previous.clear();
                previous.extend_from_slice(&state.positions);
                advance!();
                let max_disp = state
                    .positions
                    .iter()
                    .zip(&previous)
                    .map(|(a, b): (&[f64; 2], &[f64; 2])| distance(*a, *b))
                    .fold(0.0, f64::max);
                if max_disp < displacement_tol {
                    settled_for += 1;
                } else {
                    settled_for = 0;
                }
            }
        }
    }
    Ok((state.positions, trace))
}
