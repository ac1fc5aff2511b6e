//! Fine-mesh deformation under the 3D guide constraints.
//!
//! A local-global solver minimizes
//!
//! ```text
//! 0.1 * dt^2 * E_arap(X, R) + w_sew * dt^2 * E_sew(X) + w_pos * E_pos(X)
//! ```
//!
//! where `E_arap` is the as-rigid-as-possible energy with uniform weights on
//! the fine triangle mesh, `E_sew` penalizes squared deviations of anchored
//! stitch endpoint distances from their target sewing lengths, and `E_pos`
//! is a soft positional term tying anchored vertices to their 3D targets.
//! The elastic and sewing terms carry the squared quasi-static timestep as
//! parts of the incremental potential; the positional term is a soft
//! constraint and does not. The local step fits per-vertex rotations and
//! projects each sewing pair onto its target length; the global step solves
//! one prefactorized sparse SPD system per coordinate. Both sub-steps
//! majorize the true objective, so the reported total energy is
//! non-increasing.

use crate::lift3d::GuideConstraints3D;
use crate::mesh::FineMesh;
use crate::pattern::StitchSide;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformConfig {
    /// Fine cells per coarse grid cell; even so stitch midpoints land on
    /// fine vertices.
    pub subdivision: usize,
    /// Weight of the sewing-length energy.
    pub w_sew: f64,
    /// Weight of the positional regularizer.
    pub w_pos: f64,
    /// Quasi-static timestep folded into the sewing weight as `w_sew * dt^2`.
    pub dt: f64,
    /// Cap on local-global rounds.
    pub iterations: usize,
    /// Stop once the relative total-energy change drops below this.
    pub convergence_tol: f64,
    /// Uniform initial z-offset magnitude for midpoint anchors; at 0.0 the
    /// anchors initialize at their constrained heights instead.
    pub init_offset: f64,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            subdivision: 6,
            w_sew: 0.1,
            w_pos: 0.01,
            dt: 0.04,
            iterations: 300,
            convergence_tol: 1e-6,
            init_offset: 0.0,
        }
    }
}

impl DeformConfig {
    pub fn validate(&self) -> Result<(), DeformError> {
        let bad = |msg: String| Err(DeformError::InvalidConfig(msg));
        if self.subdivision < 2 || self.subdivision % 2 != 0 {
            return bad(format!(
                "subdivision must be an even integer >= 2, got {}",
                self.subdivision
            ));
        }
        if self.w_sew < 0.0 || self.w_pos < 0.0 {
            return bad(format!(
                "weights must be nonnegative, got w_sew={} w_pos={}",
                self.w_sew, self.w_pos
            ));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1".to_string());
        }
        if !(self.convergence_tol >= 0.0) {
            return bad(format!("convergence_tol must be >= 0, got {}", self.convergence_tol));
        }
        Ok(())
    }

    /// Effective sewing weight with the squared timestep folded in.
    pub fn effective_sewing_weight(&self) -> f64 {
        self.w_sew * self.dt * self.dt
    }
}

/// Energy terms of one local-global round. `e_sew` and `e_pos` are raw sums
/// of squared residuals and `e_arap` includes its timestep factor, so
/// `e_total = e_arap + w_sew * dt^2 * e_sew + w_pos * e_pos`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub e_arap: f64,
    pub e_sew: f64,
    pub e_pos: f64,
    pub e_total: f64,
}

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("constraints describe {constraints} stitching springs, mesh has {mesh} midpoint anchors")]
    ConstraintMismatch { constraints: usize, mesh: usize },
    #[error("global system is not positive definite; zero weights with detached components ({0})")]
    SolverSingular(String),
    #[error("non-finite coordinates after iteration {iteration}")]
    NonFinite { iteration: usize },
}

/// Prefactor of the elastic (as-rigid-as-possible) term, matching the
/// default sewing weight: both are quasi-static potentials carrying dt^2,
/// while the positional term stays a soft constraint that must win at the
/// anchors.
const ELASTIC_PREFACTOR: f64 = 0.1;

/// Sum of squared sewing-length residuals over the anchored endpoint pairs.
/// The caller applies the `dt^2` factor as part of the weight.
pub fn sewing_energy(positions: &[[f64; 3]], pairs: &[[usize; 2]], targets: &[f64]) -> f64 {
    pairs
        .iter()
        .zip(targets)
        .map(|(&[p, q], &t)| {
            let r = distance(positions[p], positions[q]) - t;
            r * r
        })
        .sum()
}

/// Gradient of [`sewing_energy`] with respect to every vertex position.
pub fn sewing_energy_gradient(
    positions: &[[f64; 3]],
    pairs: &[[usize; 2]],
    targets: &[f64],
) -> Vec<[f64; 3]> {
    let mut grad = vec![[0.0; 3]; positions.len()];
    for (&[p, q], &t) in pairs.iter().zip(targets) {
        let d = sub(positions[p], positions[q]);
        let len = norm(d);
        if len == 0.0 {
            continue;
        }
        let scale = 2.0 * (len - t) / len;
        for c in 0..3 {
            grad[p][c] += scale * d[c];
            grad[q][c] -= scale * d[c];
        }
    }
    grad
}

/// Sum of squared distances of anchored vertices to their 3D targets.
pub fn positional_energy(positions: &[[f64; 3]], anchors: &[(usize, [f64; 3])]) -> f64 {
    anchors
        .iter()
        .map(|&(v, target)| {
            let d = sub(positions[v], target);
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        })
        .sum()
}

/// Gradient of [`positional_energy`] with respect to every vertex position.
pub fn positional_energy_gradient(
    positions: &[[f64; 3]],
    anchors: &[(usize, [f64; 3])],
) -> Vec<[f64; 3]> {
    let mut grad = vec![[0.0; 3]; positions.len()];
    for &(v, target) in anchors {
        for c in 0..3 {
            grad[v][c] += 2.0 * (positions[v][c] - target[c]);
        }
    }
    grad
}

/// As-rigid-as-possible energy of a configuration, with per-vertex rotations
/// freshly fitted to it. Invariant under global rigid motions.
pub fn arap_energy(mesh: &FineMesh, positions: &[[f64; 3]]) -> f64 {
    let neighbors = build_neighbors(mesh);
    let rotations = fit_rotations(mesh, positions, &neighbors);
    arap_energy_with(mesh, positions, &neighbors, &rotations)
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(sub(a, b))
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn build_neighbors(mesh: &FineMesh) -> Vec<Vec<usize>> {
    let mut sets = vec![std::collections::BTreeSet::new(); mesh.vertex_count()];
    for t in &mesh.triangles {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            sets[a].insert(b);
            sets[b].insert(a);
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Rest edge vector lifted to z = 0.
fn rest_edge(mesh: &FineMesh, i: usize, j: usize) -> Vector3<f64> {
    let a = mesh.rest_positions[i];
    let b = mesh.rest_positions[j];
    Vector3::new(a[0] - b[0], a[1] - b[1], 0.0)
}

fn fit_rotations(
    mesh: &FineMesh,
    positions: &[[f64; 3]],
    neighbors: &[Vec<usize>],
) -> Vec<Matrix3<f64>> {
    neighbors
        .iter()
        .enumerate()
        .map(|(i, adj)| {
            let mut covariance = Matrix3::zeros();
            let xi = positions[i];
            for &j in adj {
                let e = sub(xi, positions[j]);
                covariance += rest_edge(mesh, i, j) * Vector3::new(e[0], e[1], e[2]).transpose();
            }
            fit_rotation(covariance)
        })
        .collect()
}

/// Best rotation R maximizing tr(R * covariance), with a reflection fix.
fn fit_rotation(covariance: Matrix3<f64>) -> Matrix3<f64> {
    let svd = covariance.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Matrix3::identity(),
    };
    let mut v = v_t.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // Singular values come out sorted descending; flip the last one.
        for row in 0..3 {
            v[(row, 2)] = -v[(row, 2)];
        }
        r = v * u.transpose();
    }
    r
}

fn arap_energy_with(
    mesh: &FineMesh,
    positions: &[[f64; 3]],
    neighbors: &[Vec<usize>],
    rotations: &[Matrix3<f64>],
) -> f64 {
    let mut total = 0.0;
    for (i, adj) in neighbors.iter().enumerate() {
        for &j in adj {
            let e = sub(positions[i], positions[j]);
            let target = rotations[i] * rest_edge(mesh, i, j);
            let r = [e[0] - target[0], e[1] - target[1], e[2] - target[2]];
            total += r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        }
    }
    total
}

pub fn write_energy_csv<W: Write>(history: &[EnergyBreakdown], mut out: W) -> io::Result<()> {
    writeln!(out, "iteration,e_arap,e_sew,e_pos,e_total")?;
    for (k, e) in history.iter().enumerate() {
        writeln!(out, "{},{},{},{},{}", k, e.e_arap, e.e_sew, e.e_pos, e.e_total)?;
    }
    Ok(())
}

pub fn energy_csv_string(history: &[EnergyBreakdown]) -> String {
    let mut buf = Vec::new();
    write_energy_csv(history, &mut buf).expect("writing to Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

/// Deform the fine mesh toward the guide constraints.
///
/// Starts from the flat rest layout with midpoint anchors pre-offset out of
/// plane (breaking the fold-direction symmetry), then alternates rotation
/// fitting / sewing projection with a prefactorized global solve until the
/// energy stalls or the iteration cap is reached. Returns the deformed mesh
/// and the per-iteration energy history (entry 0 is the initial state).
pub fn deform(
    mesh: &FineMesh,
    constraints: &GuideConstraints3D,
    cfg: &DeformConfig,
) -> Result<(FineMesh, Vec<EnergyBreakdown>), DeformError> {
    cfg.validate()?;
    if constraints.midpoint_targets.len() != mesh.midpoint_anchors.len()
        || constraints.sewing_targets.len() != mesh.sewing_pairs.len()
    {
        return Err(DeformError::ConstraintMismatch {
            constraints: constraints.midpoint_targets.len(),
            mesh: mesh.midpoint_anchors.len(),
        });
    }

    let n = mesh.vertex_count();
    let neighbors = build_neighbors(mesh);
    let anchors = mesh.anchor_targets(constraints);
    let w_arap = ELASTIC_PREFACTOR * cfg.dt * cfg.dt;
    let w_sew = cfg.effective_sewing_weight();
    let w_pos = cfg.w_pos;

    // Constant system matrix: uniform Laplacian + sewing pairs + anchor
    // diagonal. Factorized once; only the right-hand side changes.
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut add = |r: usize, c: usize, v: f64| {
        *entries.entry((r, c)).or_insert(0.0) += v;
    };
    for (i, adj) in neighbors.iter().enumerate() {
        for &j in adj {
            if j > i {
                add(i, i, 2.0 * w_arap);
                add(j, j, 2.0 * w_arap);
                add(i, j, -2.0 * w_arap);
                add(j, i, -2.0 * w_arap);
            }
        }
    }
    if w_sew > 0.0 {
        for &[p, q] in &mesh.sewing_pairs {
            add(p, p, w_sew);
            add(q, q, w_sew);
            add(p, q, -w_sew);
            add(q, p, -w_sew);
        }
    }
    if w_pos > 0.0 {
        for &(a, _) in &anchors {
            add(a, a, w_pos);
        }
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = entries
        .iter()
        .map(|(&(r, c), &v)| Triplet::new(r, c, v))
        .collect();
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| DeformError::SolverSingular(format!("assembly failed: {e:?}")))?;
    let factorization = matrix
        .sp_cholesky(Side::Lower)
        .map_err(|e| DeformError::SolverSingular(format!("{e:?}")))?;

    // Rest layout with midpoint anchors pre-offset: to their constrained
    // heights by default, or by a uniform +/- offset when configured.
    let mut positions: Vec<[f64; 3]> = mesh
        .rest_positions
        .iter()
        .map(|p| [p[0], p[1], 0.0])
        .collect();
    for (k, record) in mesh.midpoint_anchors.iter().enumerate() {
        let z = if cfg.init_offset > 0.0 {
            match constraints.midpoint_sides[k] {
                StitchSide::Front => -cfg.init_offset,
                StitchSide::Back => cfg.init_offset,
            }
        } else {
            constraints.midpoint_targets[k][2]
        };
        positions[record.fine_vertex][2] = z;
    }

    let measure = |positions: &[[f64; 3]], rotations: &[Matrix3<f64>]| {
        let e_arap = w_arap * arap_energy_with(mesh, positions, &neighbors, rotations);
        let e_sew = sewing_energy(positions, &mesh.sewing_pairs, &constraints.sewing_targets);
        let e_pos = positional_energy(positions, &anchors);
        EnergyBreakdown {
            e_arap,
            e_sew,
            e_pos,
            e_total: e_arap + w_sew * e_sew + w_pos * e_pos,
        }
    };

    let mut history = Vec::new();
    let mut rhs = Mat::<f64>::zeros(n, 3);
    for round in 0..=cfg.iterations {
        let rotations = fit_rotations(mesh, &positions, &neighbors);
        let energy = measure(&positions, &rotations);
        history.push(energy);
        if round == cfg.iterations {
            break;
        }
        if round > 0 {
            let prev = history[history.len() - 2].e_total;
            let change = (prev - energy.e_total).abs();
            if change <= cfg.convergence_tol * energy.e_total.abs().max(1e-12) {
                break;
            }
        }

        rhs.fill(0.0);
        let mut add_rhs = |v: usize, x: [f64; 3]| {
            rhs[(v, 0)] += x[0];
            rhs[(v, 1)] += x[1];
            rhs[(v, 2)] += x[2];
        };
        for (i, adj) in neighbors.iter().enumerate() {
            for &j in adj {
                if j > i {
                    let m = (rotations[i] + rotations[j]) * rest_edge(mesh, i, j) * w_arap;
                    add_rhs(i, [m[0], m[1], m[2]]);
                    add_rhs(j, [-m[0], -m[1], -m[2]]);
                }
            }
        }
        if w_sew > 0.0 {
            for (s, &[p, q]) in mesh.sewing_pairs.iter().enumerate() {
                let d = sub(positions[p], positions[q]);
                let len = norm(d);
                // Coincident endpoints fall back to the rest direction.
                let dir = if len > 0.0 {
                    [d[0] / len, d[1] / len, d[2] / len]
                } else {
                    let r = rest_edge(mesh, p, q);
                    let rl = r.norm();
                    [r[0] / rl, r[1] / rl, r[2] / rl]
                };
                let t = constraints.sewing_targets[s];
                let projected = [w_sew * t * dir[0], w_sew * t * dir[1], w_sew * t * dir[2]];
                add_rhs(p, projected);
                add_rhs(q, [-projected[0], -projected[1], -projected[2]]);
            }
        }
        if w_pos > 0.0 {
            for &(a, target) in &anchors {
                add_rhs(a, [w_pos * target[0], w_pos * target[1], w_pos * target[2]]);
            }
        }

        let solution = factorization.solve(&rhs);
        for (i, p) in positions.iter_mut().enumerate() {
            *p = [solution[(i, 0)], solution[(i, 1)], solution[(i, 2)]];
        }
        if positions.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(DeformError::NonFinite { iteration: round + 1 });
        }
    }

    let mut deformed = mesh.clone();
    deformed.vertices = positions;
    Ok((deformed, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift3d::{build_constraints, HeightMode};
    use crate::mesh::make_fine_mesh;
    use crate::pattern::{extract_springs, parse_pattern, Pattern, SpringSystem};
    use crate::sim2d::{simulate, SimConfig2D};

    fn stitched_pattern() -> (Pattern, SpringSystem) {
        let text = r#"{"rows": 3, "cols": 5, "style": "italian", "paths": [
            {"first_stitch": "front", "vertices": [[1,0],[1,1],[1,2],[1,3],[1,4]]}
        ]}"#;
        let p = parse_pattern(text).unwrap();
        let sys = extract_springs(&p, 0.01);
        (p, sys)
    }

    fn small_config() -> DeformConfig {
        DeformConfig {
            subdivision: 2,
            iterations: 60,
            ..DeformConfig::default()
        }
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn sewing_energy_closed_forms() {
        let positions = vec![[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]];
        let pairs = vec![[0usize, 1usize]];
        // exactly at target
        assert_eq!(sewing_energy(&positions, &pairs, &[0.3]), 0.0);
        // single residual (0.3 - 0.1)^2
        let e = sewing_energy(&positions, &pairs, &[0.1]);
        assert!((e - 0.04).abs() < 1e-15);
    }

    #[test]
    fn sewing_energy_matches_naive_resummation() {
        let (p, sys) = stitched_pattern();
        let mesh = make_fine_mesh(&p, &sys, 2);
        let mut seed = 7u64;
        let positions: Vec<[f64; 3]> = mesh
            .vertices
            .iter()
            .map(|v| [v[0] + 0.1 * lcg(&mut seed), v[1] + 0.1 * lcg(&mut seed), 0.2 * lcg(&mut seed)])
            .collect();
        let targets: Vec<f64> = (0..mesh.sewing_pairs.len()).map(|k| 0.05 + 0.01 * k as f64).collect();
        let mut naive = 0.0;
        for (k, pair) in mesh.sewing_pairs.iter().enumerate() {
            let a = positions[pair[0]];
            let b = positions[pair[1]];
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            naive += (len - targets[k]) * (len - targets[k]);
        }
        let got = sewing_energy(&positions, &mesh.sewing_pairs, &targets);
        assert!((got - naive).abs() < 1e-12);
    }

    #[test]
    fn positional_energy_closed_forms() {
        let positions = vec![[0.0, 0.0, 0.1]];
        let anchors = vec![(0usize, [0.0, 0.0, 0.0])];
        let e = positional_energy(&positions, &anchors);
        assert!((e - 0.01).abs() < 1e-15);
        assert_eq!(
            positional_energy(&[[1.0, 2.0, 3.0]], &[(0, [1.0, 2.0, 3.0])]),
            0.0
        );
    }

    #[test]
    fn positional_energy_matches_naive_resummation() {
        let mut seed = 11u64;
        let positions: Vec<[f64; 3]> = (0..30)
            .map(|_| [lcg(&mut seed), lcg(&mut seed), lcg(&mut seed)])
            .collect();
        let anchors: Vec<(usize, [f64; 3])> = (0..10)
            .map(|k| (k * 3, [lcg(&mut seed), lcg(&mut seed), lcg(&mut seed)]))
            .collect();
        let mut naive = 0.0;
        for &(v, t) in &anchors {
            let d = [positions[v][0] - t[0], positions[v][1] - t[1], positions[v][2] - t[2]];
            naive += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        }
        assert!((positional_energy(&positions, &anchors) - naive).abs() < 1e-12);
    }

    fn central_difference_gradient(
        f: &dyn Fn(&[[f64; 3]]) -> f64,
        positions: &[[f64; 3]],
        step: f64,
    ) -> Vec<[f64; 3]> {
        let mut grad = vec![[0.0; 3]; positions.len()];
        let mut work = positions.to_vec();
        for v in 0..positions.len() {
            for c in 0..3 {
                work[v][c] = positions[v][c] + step;
                let hi = f(&work);
                work[v][c] = positions[v][c] - step;
                let lo = f(&work);
                work[v][c] = positions[v][c];
                grad[v][c] = (hi - lo) / (2.0 * step);
            }
        }
        grad
    }

    fn assert_gradients_close(analytic: &[[f64; 3]], numeric: &[[f64; 3]]) {
        let scale = numeric
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |m, &g| m.max(g.abs()))
            .max(1e-8);
        for (a, n) in analytic.iter().zip(numeric) {
            for c in 0..3 {
                let rel = (a[c] - n[c]).abs() / scale;
                assert!(rel < 1e-4, "gradient mismatch: {} vs {}", a[c], n[c]);
            }
        }
    }

    #[test]
    fn sewing_gradient_matches_finite_differences() {
        let (p, sys) = stitched_pattern();
        let mesh = make_fine_mesh(&p, &sys, 2);
        let mut seed = 3u64;
        let positions: Vec<[f64; 3]> = mesh
            .vertices
            .iter()
            .map(|v| [v[0] + 0.05 * lcg(&mut seed), v[1] + 0.05 * lcg(&mut seed), 0.1 * lcg(&mut seed)])
            .collect();
        let targets: Vec<f64> = (0..mesh.sewing_pairs.len()).map(|k| 0.08 + 0.02 * k as f64).collect();
        let analytic = sewing_energy_gradient(&positions, &mesh.sewing_pairs, &targets);
        let pairs = mesh.sewing_pairs.clone();
        let numeric = central_difference_gradient(
            &move |x: &[[f64; 3]]| sewing_energy(x, &pairs, &targets),
            &positions,
            1e-6,
        );
        assert_gradients_close(&analytic, &numeric);
    }

    #[test]
    fn positional_gradient_matches_finite_differences() {
        let mut seed = 5u64;
        let positions: Vec<[f64; 3]> = (0..20)
            .map(|_| [lcg(&mut seed), lcg(&mut seed), lcg(&mut seed)])
            .collect();
        let anchors: Vec<(usize, [f64; 3])> = (0..7)
            .map(|k| (k * 2, [lcg(&mut seed), lcg(&mut seed), lcg(&mut seed)]))
            .collect();
        let analytic = positional_energy_gradient(&positions, &anchors);
        let anchors2 = anchors.clone();
        let numeric = central_difference_gradient(
            &move |x: &[[f64; 3]]| positional_energy(x, &anchors2),
            &positions,
            1e-6,
        );
        assert_gradients_close(&analytic, &numeric);
    }

    #[test]
    fn identity_constraints_return_rest_mesh() {
        let (p, sys) = stitched_pattern();
        let mesh = make_fine_mesh(&p, &sys, 2);
        // gamma = 1 pipeline: the "solved" embedding is the rest embedding.
        let constraints = build_constraints(sys.rest_positions(), &sys, HeightMode::Pythagorean);
        let (deformed, history) = deform(&mesh, &constraints, &small_config()).unwrap();
        for (v, rest) in deformed.vertices.iter().zip(&mesh.rest_positions) {
            assert!((v[0] - rest[0]).abs() < 1e-6);
            assert!((v[1] - rest[1]).abs() < 1e-6);
            assert!(v[2].abs() < 1e-6);
        }
        assert!(history.last().unwrap().e_total < 1e-12);
    }

    #[test]
    fn single_front_stitch_folds_below_plane() {
        let text = r#"{"rows": 2, "cols": 3, "style": "italian", "paths": [
            {"first_stitch": "front", "vertices": [[0,0],[0,2]]}
        ]}"#;
        let p = parse_pattern(text).unwrap();
        let sys = extract_springs(&p, 0.01);
        let cfg2d = SimConfig2D {
            gamma: 0.35,
            ..SimConfig2D::default()
        };
        let (solved, _) = simulate(&sys, &cfg2d).unwrap();
        let constraints = build_constraints(&solved, &sys, HeightMode::Pythagorean);
        let mesh = make_fine_mesh(&p, &sys, 4);
        let cfg = DeformConfig {
            subdivision: 4,
            iterations: 120,
            ..DeformConfig::default()
        };
        let (deformed, _) = deform(&mesh, &constraints, &cfg).unwrap();

        let mid = mesh.midpoint_anchors[0].fine_vertex;
        assert!(
            deformed.vertices[mid][2] < 0.0,
            "front midpoint should fold below the plane, z = {}",
            deformed.vertices[mid][2]
        );
        let pair = mesh.sewing_pairs[0];
        let d = distance(deformed.vertices[pair[0]], deformed.vertices[pair[1]]);
        let target = constraints.sewing_targets[0];
        assert!(
            (d - target).abs() < 2.0 * mesh.spacing,
            "anchored distance {d} far from target {target}"
        );
    }

    #[test]
    fn energy_is_non_increasing() {
        let (p, sys) = stitched_pattern();
        let cfg2d = SimConfig2D {
            gamma: 0.4,
            ..SimConfig2D::default()
        };
        let (solved, _) = simulate(&sys, &cfg2d).unwrap();
        let constraints = build_constraints(&solved, &sys, HeightMode::Pythagorean);
        let mesh = make_fine_mesh(&p, &sys, 2);
        let (_, history) = deform(&mesh, &constraints, &small_config()).unwrap();
        assert!(history.len() > 2);
        for pair in history.windows(2) {
            assert!(
                pair[1].e_total <= pair[0].e_total + 1e-9,
                "energy increased: {} -> {}",
                pair[0].e_total,
                pair[1].e_total
            );
        }
        for e in &history {
            let recombined = e.e_arap + 0.1 * 0.04 * 0.04 * e.e_sew + 0.01 * e.e_pos;
            assert!((recombined - e.e_total).abs() <= 1e-12 * e.e_total.abs().max(1.0));
        }
    }

    #[test]
    fn arap_term_is_rigid_motion_invariant() {
        let (p, sys) = stitched_pattern();
        let mesh = make_fine_mesh(&p, &sys, 2);
        let mut seed = 9u64;
        let positions: Vec<[f64; 3]> = mesh
            .vertices
            .iter()
            .map(|v| [v[0] + 0.02 * lcg(&mut seed), v[1] + 0.02 * lcg(&mut seed), 0.05 * lcg(&mut seed)])
            .collect();
        let base = arap_energy(&mesh, &positions);

        let angle = 0.83f64;
        let (sin, cos) = angle.sin_cos();
        let moved: Vec<[f64; 3]> = positions
            .iter()
            .map(|p| {
                [
                    cos * p[0] - sin * p[2] + 0.4,
                    p[1] - 0.7,
                    sin * p[0] + cos * p[2] + 1.1,
                ]
            })
            .collect();
        let rotated = arap_energy(&mesh, &moved);
        assert!(
            (base - rotated).abs() < 1e-9 * base.max(1.0),
            "arap energy changed under rigid motion: {base} vs {rotated}"
        );
    }

    #[test]
    fn zero_weights_are_singular() {
        let (p, sys) = stitched_pattern();
        let mesh = make_fine_mesh(&p, &sys, 2);
        let constraints = build_constraints(sys.rest_positions(), &sys, HeightMode::Pythagorean);
        let cfg = DeformConfig {
            subdivision: 2,
            w_sew: 0.0,
            w_pos: 0.0,
            ..DeformConfig::default()
        };
        match deform(&mesh, &constraints, &cfg) {
            Err(DeformError::SolverSingular(_)) => {}
            other => panic!("expected SolverSingular, got {other:?}"),
        }
    }

    #[test]
    fn odd_subdivision_rejected() {
        let cfg = DeformConfig {
            subdivision: 3,
            ..DeformConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(DeformError::InvalidConfig(_))));
    }

    #[test]
    fn deform_is_deterministic() {
        let (p, sys) = stitched_pattern();
        let cfg2d = SimConfig2D {
            gamma: 0.5,
            ..SimConfig2D::default()
        };
        let (solved, _) = simulate(&sys, &cfg2d).unwrap();
        let constraints = build_constraints(&solved, &sys, HeightMode::Pythagorean);
        let mesh = make_fine_mesh(&p, &sys, 2);
        let (a, ha) = deform(&mesh, &constraints, &small_config()).unwrap();
        let (b, hb) = deform(&mesh, &constraints, &small_config()).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(ha.len(), hb.len());
    }

    #[test]
    fn energy_csv_header() {
        let history = vec![EnergyBreakdown {
            e_arap: 1.0,
            e_sew: 2.0,
            e_pos: 3.0,
            e_total: 1.0 + 0.1 * 0.0016 * 2.0 + 0.01 * 3.0,
        }];
        let csv = energy_csv_string(&history);
        assert!(csv.starts_with("iteration,e_arap,e_sew,e_pos,e_total\n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("0,"));
    }
}
