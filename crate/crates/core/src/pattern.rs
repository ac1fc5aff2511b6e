//! Smocking patterns and their coarse mass-spring abstraction.
//!
//! A pattern is a rectangular grid of stitch points plus a set of stitching
//! paths, each an ordered list of grid vertices whose segments alternate
//! between front and back stitches. From a validated pattern we derive a
//! mass-spring system: fabric springs on grid adjacencies, stitching springs
//! on consecutive path vertices, and one midpoint record per stitching spring
//! carrying the front/back fold direction.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Which side of the fabric a stitch lies on. Front stitches fold their
/// midpoint inward (negative height), back stitches outward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StitchSide {
    Front,
    Back,
}

impl StitchSide {
    pub fn opposite(self) -> StitchSide {
        match self {
            StitchSide::Front => StitchSide::Back,
            StitchSide::Back => StitchSide::Front,
        }
    }
}

impl fmt::Display for StitchSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StitchSide::Front => write!(f, "front"),
            StitchSide::Back => write!(f, "back"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmockingStyle {
    Italian,
    Canadian,
}

/// One stitching path: an ordered list of `(row, col)` grid coordinates.
///
/// Front/back sides are never stored per segment; they are derived from
/// `first_stitch` by strict alternation, so inconsistent labelings are
/// unrepresentable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchPath {
    pub vertices: Vec<(usize, usize)>,
    pub first_stitch: StitchSide,
}

impl StitchPath {
    /// Number of stitches (segments) in the path.
    pub fn stitch_count(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    /// Side of stitch `k`, the segment between vertices `k` and `k + 1`.
    pub fn stitch_side(&self, k: usize) -> StitchSide {
        if k % 2 == 0 {
            self.first_stitch
        } else {
            self.first_stitch.opposite()
        }
    }
}

/// Lower-bound override for one stitching spring, modeling a bead threaded
/// onto the stitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeadConstraint {
    pub path: usize,
    pub stitch: usize,
    pub diameter: f64,
}

/// A validated, normalized smocking pattern.
///
/// After normalization the longest grid side spans exactly 1.0 m, so the
/// grid spacing is `1 / max(rows - 1, cols - 1)`. Immutable after
/// construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    unit: f64,
    style: SmockingStyle,
    paths: Vec<StitchPath>,
    beads: Vec<BeadConstraint>,
}

/// Raw document shape; validation happens after deserialization so error
/// messages can name the offending path or bead.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    rows: usize,
    cols: usize,
    style: SmockingStyle,
    paths: Vec<StitchPath>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    beads: Vec<BeadConstraint>,
}

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("schema error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("grid must be at least 2x2, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("path {path} has {len} vertices, need at least 2")]
    PathTooShort { path: usize, len: usize },
    #[error("path {path} vertex {index} is ({row},{col}), outside the {rows}x{cols} grid")]
    VertexOutOfGrid {
        path: usize,
        index: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("path {path} repeats vertex ({row},{col}) at consecutive positions {index} and {}", index + 1)]
    RepeatedVertex {
        path: usize,
        index: usize,
        row: usize,
        col: usize,
    },
    #[error("bead {bead} references path {path}, but there are only {path_count} paths")]
    BadBeadPath {
        bead: usize,
        path: usize,
        path_count: usize,
    },
    #[error("bead {bead} references stitch {stitch} of path {path}, which has {stitch_count} stitches")]
    BadBeadStitch {
        bead: usize,
        path: usize,
        stitch: usize,
        stitch_count: usize,
    },
    #[error("bead {bead} has non-positive diameter {diameter}")]
    BadBeadDiameter { bead: usize, diameter: f64 },
}

impl PatternError {
    /// True for malformed documents (as opposed to well-formed documents
    /// violating pattern invariants). The CLI maps the two classes to
    /// distinct exit codes.
    pub fn is_schema(&self) -> bool {
        matches!(self, PatternError::Schema(_))
    }
}

/// Parse and validate a pattern document, normalizing the grid so its
/// longest side spans 1.0 m.
pub fn parse_pattern(text: &str) -> Result<Pattern, PatternError> {
    let file: PatternFile = serde_json::from_str(text)?;
    Pattern::new(file.rows, file.cols, file.style, file.paths, file.beads)
}

impl Pattern {
    pub fn new(
        rows: usize,
        cols: usize,
        style: SmockingStyle,
        paths: Vec<StitchPath>,
        beads: Vec<BeadConstraint>,
    ) -> Result<Pattern, PatternError> {
        if rows < 2 || cols < 2 {
            return Err(PatternError::GridTooSmall { rows, cols });
        }
        for (p, path) in paths.iter().enumerate() {
            if path.vertices.len() < 2 {
                return Err(PatternError::PathTooShort {
                    path: p,
                    len: path.vertices.len(),
                });
            }
            for (k, &(row, col)) in path.vertices.iter().enumerate() {
                if row >= rows || col >= cols {
                    return Err(PatternError::VertexOutOfGrid {
                        path: p,
                        index: k,
                        row,
                        col,
                        rows,
                        cols,
                    });
                }
                if k + 1 < path.vertices.len() && path.vertices[k + 1] == (row, col) {
                    return Err(PatternError::RepeatedVertex {
                        path: p,
                        index: k,
                        row,
                        col,
                    });
                }
            }
        }
        for (b, bead) in beads.iter().enumerate() {
            if bead.path >= paths.len() {
                return Err(PatternError::BadBeadPath {
                    bead: b,
                    path: bead.path,
                    path_count: paths.len(),
                });
            }
            let stitch_count = paths[bead.path].stitch_count();
            if bead.stitch >= stitch_count {
                return Err(PatternError::BadBeadStitch {
                    bead: b,
                    path: bead.path,
                    stitch: bead.stitch,
                    stitch_count,
                });
            }
            if !(bead.diameter > 0.0) {
                return Err(PatternError::BadBeadDiameter {
                    bead: b,
                    diameter: bead.diameter,
                });
            }
        }
        // Longest side scaled to 1 m; rows/cols >= 2 keep the divisor >= 1.
        let unit = 1.0 / (rows.max(cols) - 1) as f64;
        Ok(Pattern {
            rows,
            cols,
            unit,
            style,
            paths,
            beads,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Grid spacing in meters after normalization.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn style(&self) -> SmockingStyle {
        self.style
    }

    pub fn paths(&self) -> &[StitchPath] {
        &self.paths
    }

    pub fn beads(&self) -> &[BeadConstraint] {
        &self.beads
    }

    pub fn vertex_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major vertex id of grid coordinate `(row, col)`.
    pub fn vertex_id(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Rest position of a grid vertex: x along columns, y along rows.
    pub fn rest_position(&self, row: usize, col: usize) -> [f64; 2] {
        [col as f64 * self.unit, row as f64 * self.unit]
    }

    /// Same pattern with a different style, used to force Canadian handling
    /// of a pattern authored as Italian (or vice versa).
    pub fn restyled(&self, style: SmockingStyle) -> Pattern {
        Pattern {
            style,
            ..self.clone()
        }
    }

    /// Serialize back to the pattern-file schema. `parse_pattern` on the
    /// output reproduces the pattern field-for-field.
    pub fn to_json_string(&self) -> String {
        let file = PatternFile {
            rows: self.rows,
            cols: self.cols,
            style: self.style,
            paths: self.paths.clone(),
            beads: self.beads.clone(),
        };
        serde_json::to_string_pretty(&file).expect("pattern serialization cannot fail")
    }
}

/// Spring between adjacent grid vertices, bounded between the fabric
/// thickness and its rest length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabricSpring {
    pub i: usize,
    pub j: usize,
    pub rest_length: f64,
}

/// Spring between consecutive path vertices. `lower_bound` defaults to the
/// fabric thickness and is overridden by bead diameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchSpring {
    pub i: usize,
    pub j: usize,
    pub rest_length: f64,
    pub lower_bound: f64,
    pub side: StitchSide,
    pub path: usize,
    pub stitch: usize,
}

/// Midpoint of one stitching spring, identified by pattern-level indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MidpointRef {
    pub path: usize,
    pub stitch: usize,
}

/// Exact partition of the grid vertices plus the stitch midpoints.
#[derive(Debug, Clone)]
pub struct VertexClassification {
    /// Vertex ids appearing on any stitching path, sorted ascending.
    pub stitching: Vec<usize>,
    /// All remaining vertex ids, sorted ascending.
    pub pleat: Vec<usize>,
    pub front_midpoints: Vec<MidpointRef>,
    pub back_midpoints: Vec<MidpointRef>,
}

/// The coarse mass-spring system extracted from a pattern.
///
/// Immutable after construction. Spring and vertex indices are stable:
/// stitching springs are ordered path-major, fabric springs horizontal
/// row-major then vertical row-major (then cell diagonals when enabled).
#[derive(Debug, Clone)]
pub struct SpringSystem {
    unit: f64,
    style: SmockingStyle,
    rest_positions: Vec<[f64; 2]>,
    fabric_springs: Vec<FabricSpring>,
    stitch_springs: Vec<StitchSpring>,
    stitching_vertices: Vec<usize>,
    is_stitching: Vec<bool>,
}

/// Derive the mass-spring system with 4-neighbor fabric adjacency.
///
/// `thickness` is the fabric thickness `tau` in meters; it becomes the
/// default lower bound of every stitching spring. For Canadian-style
/// patterns every stitch is treated as a front stitch (no back midpoints).
pub fn extract_springs(pattern: &Pattern, thickness: f64) -> SpringSystem {
    extract_springs_with(pattern, thickness, false)
}

/// As [`extract_springs`], optionally adding the two cell diagonals as
/// extra fabric springs for shear resistance.
pub fn extract_springs_with(
    pattern: &Pattern,
    thickness: f64,
    diagonal_springs: bool,
) -> SpringSystem {
    let (rows, cols, unit) = (pattern.rows, pattern.cols, pattern.unit);
    let rest_positions: Vec<[f64; 2]> = (0..rows * cols)
        .map(|id| pattern.rest_position(id / cols, id % cols))
        .collect();

    let mut fabric_springs = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols - 1 {
            fabric_springs.push(FabricSpring {
                i: pattern.vertex_id(r, c),
                j: pattern.vertex_id(r, c + 1),
                rest_length: unit,
            });
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            fabric_springs.push(FabricSpring {
                i: pattern.vertex_id(r, c),
                j: pattern.vertex_id(r + 1, c),
                rest_length: unit,
            });
        }
    }
    if diagonal_springs {
        let diag = unit * std::f64::consts::SQRT_2;
        for r in 0..rows - 1 {
            for c in 0..cols - 1 {
                fabric_springs.push(FabricSpring {
                    i: pattern.vertex_id(r, c),
                    j: pattern.vertex_id(r + 1, c + 1),
                    rest_length: diag,
                });
                fabric_springs.push(FabricSpring {
                    i: pattern.vertex_id(r, c + 1),
                    j: pattern.vertex_id(r + 1, c),
                    rest_length: diag,
                });
            }
        }
    }

    let mut stitch_springs = Vec::new();
    for (p, path) in pattern.paths.iter().enumerate() {
        for (k, pair) in path.vertices.windows(2).enumerate() {
            let i = pattern.vertex_id(pair[0].0, pair[0].1);
            let j = pattern.vertex_id(pair[1].0, pair[1].1);
            let a = rest_positions[i];
            let b = rest_positions[j];
            let rest_length = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let side = match pattern.style {
                SmockingStyle::Italian => path.stitch_side(k),
                SmockingStyle::Canadian => StitchSide::Front,
            };
            stitch_springs.push(StitchSpring {
                i,
                j,
                rest_length,
                lower_bound: thickness,
                side,
                path: p,
                stitch: k,
            });
        }
    }

    for bead in &pattern.beads {
        let offset: usize = pattern.paths[..bead.path]
            .iter()
            .map(StitchPath::stitch_count)
            .sum();
        stitch_springs[offset + bead.stitch].lower_bound = bead.diameter;
    }

    SpringSystem::from_parts(unit, pattern.style, rest_positions, fabric_springs, stitch_springs)
}

/// Partition the grid vertices into stitching and pleat vertices and list
/// the stitch midpoints by side.
pub fn classify_vertices(pattern: &Pattern) -> VertexClassification {
    let mut stitching_set = BTreeSet::new();
    let mut front_midpoints = Vec::new();
    let mut back_midpoints = Vec::new();
    for (p, path) in pattern.paths.iter().enumerate() {
        for &(row, col) in &path.vertices {
            stitching_set.insert(pattern.vertex_id(row, col));
        }
        for k in 0..path.stitch_count() {
            let side = match pattern.style {
                SmockingStyle::Italian => path.stitch_side(k),
                SmockingStyle::Canadian => StitchSide::Front,
            };
            let mid = MidpointRef { path: p, stitch: k };
            match side {
                StitchSide::Front => front_midpoints.push(mid),
                StitchSide::Back => back_midpoints.push(mid),
            }
        }
    }
    let stitching: Vec<usize> = stitching_set.iter().copied().collect();
    let pleat = (0..pattern.vertex_count())
        .filter(|v| !stitching_set.contains(v))
        .collect();
    VertexClassification {
        stitching,
        pleat,
        front_midpoints,
        back_midpoints,
    }
}

impl SpringSystem {
    /// Assemble a system directly from its parts, for callers that do not
    /// start from a grid pattern (two-body test rigs, scripted systems).
    /// Stitching-vertex bookkeeping is derived from the springs.
    pub fn from_parts(
        unit: f64,
        style: SmockingStyle,
        rest_positions: Vec<[f64; 2]>,
        fabric_springs: Vec<FabricSpring>,
        stitch_springs: Vec<StitchSpring>,
    ) -> SpringSystem {
        let mut is_stitching = vec![false; rest_positions.len()];
        for s in &stitch_springs {
            is_stitching[s.i] = true;
            is_stitching[s.j] = true;
        }
        let stitching_vertices = is_stitching
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(v, _)| v)
            .collect();
        SpringSystem {
            unit,
            style,
            rest_positions,
            fabric_springs,
            stitch_springs,
            stitching_vertices,
            is_stitching,
        }
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn style(&self) -> SmockingStyle {
        self.style
    }

    pub fn vertex_count(&self) -> usize {
        self.rest_positions.len()
    }

    pub fn rest_positions(&self) -> &[[f64; 2]] {
        &self.rest_positions
    }

    pub fn fabric_springs(&self) -> &[FabricSpring] {
        &self.fabric_springs
    }

    pub fn stitch_springs(&self) -> &[StitchSpring] {
        &self.stitch_springs
    }

    /// Vertex ids on any stitching path, sorted ascending.
    pub fn stitching_vertices(&self) -> &[usize] {
        &self.stitching_vertices
    }

    pub fn is_stitching_vertex(&self, v: usize) -> bool {
        self.is_stitching[v]
    }

    pub fn pleat_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count())
            .filter(|&v| !self.is_stitching[v])
            .collect()
    }

    /// Indices of stitching springs whose midpoint folds inward.
    pub fn front_midpoints(&self) -> Vec<usize> {
        self.midpoints_on(StitchSide::Front)
    }

    /// Indices of stitching springs whose midpoint folds outward.
    pub fn back_midpoints(&self) -> Vec<usize> {
        self.midpoints_on(StitchSide::Back)
    }

    fn midpoints_on(&self, side: StitchSide) -> Vec<usize> {
        self.stitch_springs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.side == side)
            .map(|(k, _)| k)
            .collect()
    }

    /// Sum of the per-spring lower bounds, the tightest total thread length
    /// admitted by the constraints.
    pub fn total_lower_bound(&self) -> f64 {
        self.stitch_springs.iter().map(|s| s.lower_bound).sum()
    }

    /// Rest-pose total thread length.
    pub fn rest_thread_length(&self) -> f64 {
        self.stitch_springs.iter().map(|s| s.rest_length).sum()
    }
}
