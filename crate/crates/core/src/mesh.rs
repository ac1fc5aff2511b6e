//! Fine fabric mesh generation and mesh file I/O.
//!
//! The fine mesh subdivides each coarse grid cell into `s x s` quads, each
//! split into two triangles along a consistent diagonal. Stitch endpoints
//! land exactly on fine vertices; stitch midpoints snap to the nearest free
//! fine vertex (exact for even subdivision, which the config enforces).

use crate::lift3d::GuideConstraints3D;
use crate::pattern::{Pattern, SpringSystem};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, BufReader, Read, Write};

/// Where a pattern-level point landed in the fine mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorRecord {
    pub fine_vertex: usize,
    pub snap_distance: f64,
}

/// Triangulated high-resolution fabric mesh with the index map from
/// pattern-level points to fine vertices.
#[derive(Debug, Clone)]
pub struct FineMesh {
    /// Current vertex positions.
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// Flat rest layout; the mesh starts at this layout lifted to z = 0.
    pub rest_positions: Vec<[f64; 2]>,
    /// Coarse stitching-vertex id to fine vertex.
    pub vertex_anchors: BTreeMap<usize, AnchorRecord>,
    /// One midpoint anchor per stitching spring, in spring order.
    pub midpoint_anchors: Vec<AnchorRecord>,
    /// Fine endpoint pair of each stitching spring, in spring order.
    pub sewing_pairs: Vec<[usize; 2]>,
    pub fine_rows: usize,
    pub fine_cols: usize,
    pub spacing: f64,
}

impl FineMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Positional anchors paired with their targets, stitching vertices
    /// first (ascending id), then midpoints in spring order.
    pub fn anchor_targets(&self, constraints: &GuideConstraints3D) -> Vec<(usize, [f64; 3])> {
        let mut anchors = Vec::with_capacity(self.vertex_anchors.len() + self.midpoint_anchors.len());
        for (coarse, record) in &self.vertex_anchors {
            anchors.push((record.fine_vertex, constraints.stitch_targets[coarse]));
        }
        for (k, record) in self.midpoint_anchors.iter().enumerate() {
            anchors.push((record.fine_vertex, constraints.midpoint_targets[k]));
        }
        anchors
    }
}

/// Build the subdivided fabric mesh for a pattern and its spring system.
///
/// `subdivision` is the number of fine cells per coarse grid cell.
pub fn make_fine_mesh(pattern: &Pattern, sys: &SpringSystem, subdivision: usize) -> FineMesh {
    let s = subdivision;
    let fine_rows = (pattern.rows() - 1) * s + 1;
    let fine_cols = (pattern.cols() - 1) * s + 1;
    let spacing = pattern.unit() / s as f64;

    let mut rest_positions = Vec::with_capacity(fine_rows * fine_cols);
    for r in 0..fine_rows {
        for c in 0..fine_cols {
            rest_positions.push([c as f64 * spacing, r as f64 * spacing]);
        }
    }
    let vertices = rest_positions.iter().map(|p| [p[0], p[1], 0.0]).collect();

    let fine_id = |r: usize, c: usize| r * fine_cols + c;
    let mut triangles = Vec::with_capacity(2 * (fine_rows - 1) * (fine_cols - 1));
    for r in 0..fine_rows - 1 {
        for c in 0..fine_cols - 1 {
            let a = fine_id(r, c);
            let b = fine_id(r, c + 1);
            let d = fine_id(r + 1, c + 1);
            let e = fine_id(r + 1, c);
            triangles.push([a, b, d]);
            triangles.push([a, d, e]);
        }
    }

    let mut taken = BTreeSet::new();
    let mut vertex_anchors = BTreeMap::new();
    for &v in sys.stitching_vertices() {
        let (row, col) = (v / pattern.cols(), v % pattern.cols());
        let fine = fine_id(row * s, col * s);
        taken.insert(fine);
        vertex_anchors.insert(
            v,
            AnchorRecord {
                fine_vertex: fine,
                snap_distance: 0.0,
            },
        );
    }

    let mut midpoint_anchors = Vec::with_capacity(sys.stitch_springs().len());
    let mut sewing_pairs = Vec::with_capacity(sys.stitch_springs().len());
    for spring in sys.stitch_springs() {
        let a = sys.rest_positions()[spring.i];
        let b = sys.rest_positions()[spring.j];
        let mid = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        let record = snap_to_free_vertex(mid, spacing, fine_rows, fine_cols, &mut taken);
        midpoint_anchors.push(record);
        sewing_pairs.push([
            vertex_anchors[&spring.i].fine_vertex,
            vertex_anchors[&spring.j].fine_vertex,
        ]);
    }

    FineMesh {
        vertices,
        triangles,
        rest_positions,
        vertex_anchors,
        midpoint_anchors,
        sewing_pairs,
        fine_rows,
        fine_cols,
        spacing,
    }
}

/// Nearest fine vertex not already claimed by another anchor. Searches
/// outward in rings from the rounded lattice position, breaking distance
/// ties by (row, col), so the assignment is deterministic.
fn snap_to_free_vertex(
    point: [f64; 2],
    spacing: f64,
    fine_rows: usize,
    fine_cols: usize,
    taken: &mut BTreeSet<usize>,
) -> AnchorRecord {
    let row0 = (point[1] / spacing).round() as i64;
    let col0 = (point[0] / spacing).round() as i64;
    for radius in 0..(fine_rows + fine_cols) as i64 {
        let mut best: Option<(f64, usize, usize)> = None;
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                if dr.abs().max(dc.abs()) != radius {
                    continue;
                }
                let (r, c) = (row0 + dr, col0 + dc);
                if r < 0 || c < 0 || r >= fine_rows as i64 || c >= fine_cols as i64 {
                    continue;
                }
                let (r, c) = (r as usize, c as usize);
                let id = r * fine_cols + c;
                if taken.contains(&id) {
                    continue;
                }
                let dx = c as f64 * spacing - point[0];
                let dy = r as f64 * spacing - point[1];
                let dist = (dx * dx + dy * dy).sqrt();
                match best {
                    Some((d, br, bc)) if (dist, r, c) >= (d, br, bc) => {}
                    _ => best = Some((dist, r, c)),
                }
            }
        }
        if let Some((dist, r, c)) = best {
            let id = r * fine_cols + c;
            taken.insert(id);
            return AnchorRecord {
                fine_vertex: id,
                snap_distance: dist,
            };
        }
    }
    unreachable!("fine mesh has more vertices than anchors");
}

/// Write an ASCII mesh file: one `v x y z` line per vertex (6 decimals,
/// index order), then one `f a b c` line per triangle (1-based indices).
/// Byte-stable for identical meshes.
pub fn write_obj<W: Write>(mesh: &FineMesh, mut out: W) -> io::Result<()> {
    for v in &mesh.vertices {
        writeln!(out, "v {:.6} {:.6} {:.6}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn obj_to_string(mesh: &FineMesh) -> String {
    let mut buf = Vec::new();
    write_obj(mesh, &mut buf).expect("writing to Vec cannot fail");
    String::from_utf8(buf).expect("obj output is ascii")
}

/// Parse `v`/`f` lines back out of a mesh file; other lines are ignored.
pub fn read_obj<R: Read>(input: R) -> io::Result<(Vec<[f64; 3]>, Vec<[usize; 3]>)> {
    let reader = BufReader::new(input);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut v = [0.0; 3];
                for coord in v.iter_mut() {
                    *coord = fields
                        .next()
                        .ok_or_else(|| bad(format!("line {}: short vertex", n + 1)))?
                        .parse()
                        .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
                }
                vertices.push(v);
            }
            Some("f") => {
                let mut t = [0usize; 3];
                for idx in t.iter_mut() {
                    let field = fields
                        .next()
                        .ok_or_else(|| bad(format!("line {}: short face", n + 1)))?;
                    let first = field.split('/').next().unwrap_or(field);
                    let one_based: usize =
                        first.parse().map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
                    *idx = one_based - 1;
                }
                triangles.push(t);
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{extract_springs, parse_pattern};

    fn grid_pattern(rows: usize, cols: usize, paths: &str) -> Pattern {
        parse_pattern(&format!(
            r#"{{"rows": {rows}, "cols": {cols}, "style": "italian", "paths": {paths}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn subdivision_counts() {
        // 2x2 coarse cells (3x3 vertex grid) at s = 2: 5x5 fine vertices,
        // 16 quads, 32 triangles.
        let p = grid_pattern(3, 3, "[]");
        let sys = extract_springs(&p, 0.01);
        let mesh = make_fine_mesh(&p, &sys, 2);
        assert_eq!(mesh.vertex_count(), 25);
        assert_eq!(mesh.triangle_count(), 32);
        assert_eq!(mesh.fine_rows, 5);
        assert_eq!(mesh.fine_cols, 5);
    }

    #[test]
    fn axis_aligned_stitch_snaps_exactly() {
        let p = grid_pattern(2, 3, r#"[{"first_stitch": "front", "vertices": [[0,0],[0,1]]}]"#);
        let sys = extract_springs(&p, 0.01);
        let mesh = make_fine_mesh(&p, &sys, 6);
        assert_eq!(mesh.midpoint_anchors.len(), 1);
        assert_eq!(mesh.midpoint_anchors[0].snap_distance, 0.0);
        // endpoints map exactly to fine vertices
        for record in mesh.vertex_anchors.values() {
            assert_eq!(record.snap_distance, 0.0);
        }
    }

    #[test]
    fn crossing_midpoints_stay_injective() {
        // Two diagonal stitches crossing in one cell share their midpoint;
        // the second anchor must take a distinct nearby vertex.
        let p = grid_pattern(
            2,
            2,
            r#"[{"first_stitch": "front", "vertices": [[0,0],[1,1]]},
                {"first_stitch": "front", "vertices": [[0,1],[1,0]]}]"#,
        );
        let sys = extract_springs(&p, 0.01);
        let mesh = make_fine_mesh(&p, &sys, 2);
        let a = mesh.midpoint_anchors[0];
        let b = mesh.midpoint_anchors[1];
        assert_ne!(a.fine_vertex, b.fine_vertex);
        assert_eq!(a.snap_distance, 0.0);
        assert!(b.snap_distance > 0.0 && b.snap_distance <= mesh.spacing + 1e-12);
    }

    #[test]
    fn obj_line_counts() {
        let p = grid_pattern(3, 3, "[]");
        let sys = extract_springs(&p, 0.01);
        let mesh = make_fine_mesh(&p, &sys, 2);
        let text = obj_to_string(&mesh);
        let v_lines = text.lines().filter(|l| l.starts_with("v ")).count();
        let f_lines = text.lines().filter(|l| l.starts_with("f ")).count();
        assert_eq!(v_lines, 25);
        assert_eq!(f_lines, 32);
    }

    #[test]
    fn single_triangle_writes_four_lines() {
        let mesh = FineMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.5]],
            triangles: vec![[0, 1, 2]],
            rest_positions: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vertex_anchors: BTreeMap::new(),
            midpoint_anchors: Vec::new(),
            sewing_pairs: Vec::new(),
            fine_rows: 0,
            fine_cols: 0,
            spacing: 1.0,
        };
        let text = obj_to_string(&mesh);
        assert_eq!(text.lines().count(), 4);
        assert!(text.ends_with("f 1 2 3\n"));
    }

    #[test]
    fn obj_round_trip_to_fixed_precision() {
        let p = grid_pattern(3, 4, "[]");
        let sys = extract_springs(&p, 0.01);
        let mut mesh = make_fine_mesh(&p, &sys, 2);
        for (k, v) in mesh.vertices.iter_mut().enumerate() {
            v[2] = (k as f64 * 0.137).sin() * 0.01;
        }
        let text = obj_to_string(&mesh);
        let (verts, tris) = read_obj(text.as_bytes()).unwrap();
        assert_eq!(tris, mesh.triangles);
        assert_eq!(verts.len(), mesh.vertices.len());
        for (a, b) in verts.iter().zip(&mesh.vertices) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn triangles_are_consistently_oriented() {
        let p = grid_pattern(3, 3, "[]");
        let sys = extract_springs(&p, 0.01);
        let mesh = make_fine_mesh(&p, &sys, 2);
        for t in &mesh.triangles {
            let a = mesh.rest_positions[t[0]];
            let b = mesh.rest_positions[t[1]];
            let c = mesh.rest_positions[t[2]];
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert!(cross > 0.0, "degenerate or flipped rest triangle");
        }
    }
}
