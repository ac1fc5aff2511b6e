//! Preview smocked-fabric results from Italian and Canadian smocking patterns.
//!
//! The pipeline has four stages:
//!
//! 1. [`pattern`] — parse and validate a grid-based smocking pattern and
//!    derive its coarse mass-spring abstraction (fabric springs, stitching
//!    springs, stitch midpoints).
//! 2. [`sim2d`] — damped explicit integration of the coarse system with
//!    dynamically re-estimated expected spring lengths, run until the thread
//!    shrinkage target is met.
//! 3. [`lift3d`] — lift the solved 2D embedding into 3D positional targets
//!    for stitching vertices and stitch midpoints, plus per-stitch sewing
//!    lengths.
//! 4. [`deform3d`] — deform a fine triangulated fabric mesh under those
//!    targets with a local-global solver combining an as-rigid-as-possible
//!    term, a sewing-length term, and a soft positional term.
//!
//! [`baseline`] solves the same constrained 2D problem with a generic
//! augmented-Lagrangian optimizer and serves as a slow reference.
//! [`pipeline`] orchestrates the stages and writes the output artifacts
//! consumed by the CLI.

pub mod baseline;
pub mod deform3d;
pub mod lift3d;
pub mod mesh;
pub mod pattern;
pub mod pipeline;
pub mod sim2d;

pub use pattern::{Pattern, PatternError, SmockingStyle, SpringSystem, StitchSide};
pub use sim2d::{ConvergenceTrace, PullMode, SimConfig2D, SimState2D};
