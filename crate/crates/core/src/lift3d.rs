//! Lift the solved 2D embedding into 3D guide constraints.
//!
//! Stitching vertices share a common height, fixed to zero. Each stitch
//! midpoint sits above the mean of its spring's solved endpoints at a fold
//! height recovered from the rest and solved stitch lengths — negative for
//! front stitches (folding inward), positive for back stitches. The solved
//! endpoint distances double as per-stitch target sewing lengths.

use crate::pattern::{SpringSystem, StitchSide};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};

/// How the fold height of a stitch midpoint is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightMode {
    /// Right-triangle relation between the rest half-length (hypotenuse)
    /// and the solved half-length (base).
    Pythagorean,
    /// Flat vertical crease: half the length deficit.
    FlatCrease,
}

/// 3D positional targets for the fine deformation stage.
///
/// `midpoint_targets` and `sewing_targets` are indexed by stitching-spring
/// index; every stitching vertex and every midpoint has exactly one target.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideConstraints3D {
    pub stitch_targets: BTreeMap<usize, [f64; 3]>,
    pub midpoint_targets: Vec<[f64; 3]>,
    pub midpoint_sides: Vec<StitchSide>,
    pub sewing_targets: Vec<f64>,
    pub height_mode: HeightMode,
}

/// Embed stitching vertices at height zero.
pub fn lift_stitch_vertices(
    positions: &[[f64; 2]],
    stitching_vertices: &[usize],
) -> BTreeMap<usize, [f64; 3]> {
    stitching_vertices
        .iter()
        .map(|&v| (v, [positions[v][0], positions[v][1], 0.0]))
        .collect()
}

/// Fold height of a stitch midpoint from its rest length and solved length.
///
/// Soft dynamics can overshoot the rest length; `solved > rest` clamps the
/// height to zero rather than erroring.
pub fn midpoint_height(rest_length: f64, solved_length: f64, mode: HeightMode) -> f64 {
    if solved_length >= rest_length {
        return 0.0;
    }
    match mode {
        HeightMode::Pythagorean => {
            let half_rest = rest_length * 0.5;
            let half_solved = solved_length * 0.5;
            (half_rest * half_rest - half_solved * half_solved).sqrt()
        }
        HeightMode::FlatCrease => (rest_length - solved_length) * 0.5,
    }
}

/// Assemble all guide constraints from a terminated 2D solve.
pub fn build_constraints(
    positions: &[[f64; 2]],
    sys: &SpringSystem,
    mode: HeightMode,
) -> GuideConstraints3D {
    let stitch_targets = lift_stitch_vertices(positions, sys.stitching_vertices());
    let n = sys.stitch_springs().len();
    let mut midpoint_targets = Vec::with_capacity(n);
    let mut midpoint_sides = Vec::with_capacity(n);
    let mut sewing_targets = Vec::with_capacity(n);
    for s in sys.stitch_springs() {
        let a = positions[s.i];
        let b = positions[s.j];
        let solved = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let h = midpoint_height(s.rest_length, solved, mode);
        let signed = match s.side {
            StitchSide::Front => -h,
            StitchSide::Back => h,
        };
        midpoint_targets.push([(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5, signed]);
        midpoint_sides.push(s.side);
        sewing_targets.push(solved);
    }
    GuideConstraints3D {
        stitch_targets,
        midpoint_targets,
        midpoint_sides,
        sewing_targets,
        height_mode: mode,
    }
}

impl GuideConstraints3D {
    /// JSON export: one map of positional targets keyed `v<vertex>` for
    /// stitching vertices and `m<spring>` for midpoints, plus sewing targets
    /// keyed `s<spring>`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut targets = serde_json::Map::new();
        for (&v, p) in &self.stitch_targets {
            targets.insert(format!("v{v}"), serde_json::json!([p[0], p[1], p[2]]));
        }
        for (k, p) in self.midpoint_targets.iter().enumerate() {
            targets.insert(format!("m{k}"), serde_json::json!([p[0], p[1], p[2]]));
        }
        let mut sewing = serde_json::Map::new();
        for (k, len) in self.sewing_targets.iter().enumerate() {
            sewing.insert(format!("s{k}"), serde_json::json!(len));
        }
        serde_json::json!({
            "targets": targets,
            "sewing_targets": sewing,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("json cannot fail")
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.to_json_string().as_bytes())?;
        out.write_all(b"\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{extract_springs, parse_pattern, SmockingStyle, SpringSystem, StitchSpring};

    fn stitch_only(positions: Vec<[f64; 2]>, springs: Vec<StitchSpring>) -> SpringSystem {
        SpringSystem::from_parts(1.0, SmockingStyle::Italian, positions, Vec::new(), springs)
    }

    #[test]
    fn lift_keeps_plane_coordinates() {
        let targets = lift_stitch_vertices(&[[0.3, 0.4]], &[0]);
        assert_eq!(targets[&0], [0.3, 0.4, 0.0]);
        let empty = lift_stitch_vertices(&[], &[]);
        assert!(empty.is_empty());
    }

    #[test]
    fn height_closed_forms() {
        // no fold
        assert_eq!(midpoint_height(1.0, 1.0, HeightMode::Pythagorean), 0.0);
        assert_eq!(midpoint_height(1.0, 1.0, HeightMode::FlatCrease), 0.0);
        // fully closed stitch
        assert_eq!(midpoint_height(1.0, 0.0, HeightMode::Pythagorean), 0.5);
        assert_eq!(midpoint_height(1.0, 0.0, HeightMode::FlatCrease), 0.5);
        // direct Pythagoras
        let h = midpoint_height(2.0, 1.0, HeightMode::Pythagorean);
        assert!((h - 3.0f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(midpoint_height(2.0, 1.0, HeightMode::FlatCrease), 0.5);
        // overshoot clamps instead of erroring
        assert_eq!(midpoint_height(1.0, 1.2, HeightMode::Pythagorean), 0.0);
    }

    #[test]
    fn front_and_back_signs() {
        let spring = |side| StitchSpring {
            i: 0,
            j: 1,
            rest_length: 1.0,
            lower_bound: 0.01,
            side,
            path: 0,
            stitch: 0,
        };
        let positions = vec![[0.0, 0.0], [0.5, 0.0]];

        let sys = stitch_only(positions.clone(), vec![spring(StitchSide::Front)]);
        let c = build_constraints(&positions, &sys, HeightMode::Pythagorean);
        let expected_h = (0.25f64 - 0.0625).sqrt();
        assert!((c.midpoint_targets[0][0] - 0.25).abs() < 1e-15);
        assert_eq!(c.midpoint_targets[0][1], 0.0);
        assert!((c.midpoint_targets[0][2] + expected_h).abs() < 1e-12);

        let sys = stitch_only(positions.clone(), vec![spring(StitchSide::Back)]);
        let c = build_constraints(&positions, &sys, HeightMode::Pythagorean);
        assert!((c.midpoint_targets[0][2] - expected_h).abs() < 1e-12);
    }

    #[test]
    fn sewing_targets_match_solved_distances() {
        // Randomized 20-stitch system: every sewing target equals the
        // distance recomputed from the lifted stitch targets.
        let mut positions = Vec::new();
        let mut springs = Vec::new();
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for k in 0..21 {
            positions.push([next(), next()]);
            if k > 0 {
                springs.push(StitchSpring {
                    i: k - 1,
                    j: k,
                    rest_length: 1.5,
                    lower_bound: 0.01,
                    side: if k % 2 == 0 { StitchSide::Back } else { StitchSide::Front },
                    path: 0,
                    stitch: k - 1,
                });
            }
        }
        let sys = stitch_only(positions.clone(), springs);
        let c = build_constraints(&positions, &sys, HeightMode::Pythagorean);
        assert_eq!(c.sewing_targets.len(), 20);
        for (k, s) in sys.stitch_springs().iter().enumerate() {
            let a = c.stitch_targets[&s.i];
            let b = c.stitch_targets[&s.j];
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            assert!((d - c.sewing_targets[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn pythagorean_identity_holds() {
        // sewing^2 + (2h)^2 = rest^2 when the height is not clamped.
        let positions = vec![[0.0, 0.0], [0.3, 0.4]];
        let sys = stitch_only(
            positions.clone(),
            vec![StitchSpring {
                i: 0,
                j: 1,
                rest_length: 1.2,
                lower_bound: 0.01,
                side: StitchSide::Front,
                path: 0,
                stitch: 0,
            }],
        );
        let c = build_constraints(&positions, &sys, HeightMode::Pythagorean);
        let sewing = c.sewing_targets[0];
        let h = c.midpoint_targets[0][2].abs();
        assert!((sewing * sewing + 4.0 * h * h - 1.2 * 1.2).abs() < 1e-12);
    }

    #[test]
    fn mirror_symmetry_preserves_heights() {
        // Reflect the 2D solution about the x-axis (the pulling axis):
        // x/y targets reflect, heights are unchanged.
        let text = r#"{"rows": 3, "cols": 4, "style": "italian", "paths": [
            {"first_stitch": "front", "vertices": [[0,0],[1,1],[0,2],[1,3]]}
        ]}"#;
        let p = parse_pattern(text).unwrap();
        let sys = extract_springs(&p, 0.01);
        let cfg = crate::sim2d::SimConfig2D {
            gamma: 0.6,
            ..Default::default()
        };
        let (solved, _) = crate::sim2d::simulate(&sys, &cfg).unwrap();
        let mirrored: Vec<[f64; 2]> = solved.iter().map(|p| [p[0], -p[1]]).collect();
        let c = build_constraints(&solved, &sys, HeightMode::Pythagorean);
        let cm = build_constraints(&mirrored, &sys, HeightMode::Pythagorean);
        for (a, b) in c.midpoint_targets.iter().zip(&cm.midpoint_targets) {
            assert!((a[0] - b[0]).abs() < 1e-12);
            assert!((a[1] + b[1]).abs() < 1e-12);
            assert!((a[2] - b[2]).abs() < 1e-12, "height changed under mirror");
        }
    }

    #[test]
    fn canadian_yields_no_positive_heights() {
        let text = r#"{"rows": 3, "cols": 3, "style": "canadian", "paths": [
            {"first_stitch": "front", "vertices": [[0,0],[1,1]]},
            {"first_stitch": "front", "vertices": [[0,2],[1,1]]}
        ]}"#;
        let p = parse_pattern(text).unwrap();
        let sys = extract_springs(&p, 0.01);
        let (solved, _) =
            crate::sim2d::simulate_canadian(&sys, &crate::sim2d::SimConfig2D::default()).unwrap();
        let c = build_constraints(&solved, &sys, HeightMode::Pythagorean);
        assert!(!c.midpoint_targets.is_empty());
        for t in &c.midpoint_targets {
            assert!(t[2] <= 0.0, "positive midpoint height in Canadian mode");
        }
    }

    #[test]
    fn json_export_shape() {
        let positions = vec![[0.0, 0.0], [0.5, 0.0]];
        let sys = stitch_only(
            positions.clone(),
            vec![StitchSpring {
                i: 0,
                j: 1,
                rest_length: 1.0,
                lower_bound: 0.01,
                side: StitchSide::Front,
                path: 0,
                stitch: 0,
            }],
        );
        let c = build_constraints(&positions, &sys, HeightMode::Pythagorean);
        let json = c.to_json();
        assert!(json["targets"]["v0"].is_array());
        assert!(json["targets"]["m0"].is_array());
        assert!(json["sewing_targets"]["s0"].is_number());
    }
}
