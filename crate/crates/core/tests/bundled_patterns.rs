//! Complexity and behavior checks for the shipped patterns and the larger
//! wave fixture, at the scales reported for comparable production patterns.

mod common;

use common::{bundled_patterns, load_pattern, wave_fixture};
use smocksim::lift3d::{build_constraints, HeightMode};
use smocksim::mesh::make_fine_mesh;
use smocksim::pattern::{classify_vertices, extract_springs};
use smocksim::sim2d::{simulate, simulate_canadian, thread_length, SimConfig2D};

#[test]
fn all_bundled_patterns_parse_and_validate() {
    for (name, pattern) in bundled_patterns() {
        assert!(pattern.rows() >= 2 && pattern.cols() >= 2, "{name}");
        assert!(!pattern.paths().is_empty(), "{name}");
    }
}

#[test]
fn wave_fixture_complexity_counts() {
    // Multi-row wave at the reference complexity: 174 stitching vertices on
    // a 304-vertex grid.
    let p = wave_fixture();
    assert_eq!(p.vertex_count(), 304);
    let sys = extract_springs(&p, 0.01);
    assert_eq!(sys.stitching_vertices().len(), 174);
}

#[test]
fn arrow_pattern_complexity_counts() {
    // Arrow rows at the reference complexity: 116 of 288 vertices stitched.
    let p = load_pattern("patterns/arrow.json");
    assert_eq!(p.vertex_count(), 288);
    let classes = classify_vertices(&p);
    assert_eq!(classes.stitching.len(), 116);
    assert_eq!(classes.pleat.len(), 288 - 116);
    // every stitching vertex lifts to a height-zero target
    let sys = extract_springs(&p, 0.01);
    let targets = smocksim::lift3d::lift_stitch_vertices(sys.rest_positions(), sys.stitching_vertices());
    assert_eq!(targets.len(), 116);
    assert!(targets.values().all(|t| t[2] == 0.0));
}

#[test]
fn wave_fine_mesh_size_near_reference() {
    // At the default subdivision the fine mesh lands within 20% of the
    // 9116-vertex reference resolution.
    let p = wave_fixture();
    let sys = extract_springs(&p, 0.01);
    let mesh = make_fine_mesh(&p, &sys, 6);
    let n = mesh.vertex_count() as f64;
    assert!(
        (n - 9116.0).abs() <= 0.2 * 9116.0,
        "fine mesh has {n} vertices"
    );
}

#[test]
fn wave_terminates_at_thirty_percent() {
    // The wave's axis-aligned stitches make deep shrinkage infeasible
    // (total lower bound = 0.18 x rest), but the reference shrinkage of 30%
    // terminates with the thread length inside the admissible interval.
    let p = wave_fixture();
    let sys = extract_springs(&p, 0.01);
    let cfg = SimConfig2D {
        gamma: 0.3,
        ..SimConfig2D::default()
    };
    let (solved, trace) = simulate(&sys, &cfg).unwrap();
    assert!(!trace.is_empty());
    let d = thread_length(&solved, sys.stitch_springs());
    assert!(d >= sys.total_lower_bound());
    assert!(d <= 0.3 * sys.rest_thread_length());
}

#[test]
fn canadian_box_contracts_all_stitches() {
    // Run to the displacement fixed point; every knot closes far tighter
    // than a twentieth of the grid spacing.
    let p = load_pattern("patterns/canadian_box.json");
    let sys = extract_springs(&p, 0.01);
    let (solved, _) = simulate_canadian(&sys, &SimConfig2D::default()).unwrap();
    for s in sys.stitch_springs() {
        let a = solved[s.i];
        let b = solved[s.j];
        let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(
            len < 0.05 * p.unit(),
            "stitch {}-{} still {len} long",
            s.i,
            s.j
        );
    }
}

#[test]
fn canadian_box_lifts_to_nonpositive_heights() {
    let p = load_pattern("patterns/canadian_box.json");
    let sys = extract_springs(&p, 0.01);
    let (solved, _) = simulate_canadian(&sys, &SimConfig2D::default()).unwrap();
    let constraints = build_constraints(&solved, &sys, HeightMode::Pythagorean);
    assert!(sys.back_midpoints().is_empty());
    for t in &constraints.midpoint_targets {
        assert!(t[2] <= 0.0);
    }
}
