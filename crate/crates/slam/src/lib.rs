//! Planar landmark SLAM simulation for redundancy experiments.
//!
//! A robot takes a random walk in SE(2), measuring its own motion
//! (odometry, the base graph) and the range and bearing of two landmarks
//! (one source each). The crate simulates such worlds, solves the nonlinear
//! least-squares problems by Gauss–Newton, linearizes the result into the
//! linear factor graphs of [`fgr_core`] with the landmarks marginalized, and
//! scores estimates against ground truth with the worst-case aligned
//! trajectory error.

pub mod align;
pub mod error;
pub mod graph;
pub mod linearize;
pub mod pipeline;
pub mod se2;
pub mod sim;
pub mod solve;

pub use align::{ate, umeyama_align, wc_ate, RigidTransform2};
pub use error::{Result, SlamError};
pub use graph::{Factor, NonlinearGraph, Values};
pub use linearize::{linearize_factor, linearize_to_lfg, LinearizedGraph, PoseGraph};
pub use pipeline::{solve_sources, SourceSolutions};
pub use se2::{se2_compose, se2_inverse, wrap_angle, Pose2};
pub use sim::{simulate_world, RangeBearing, SimConfig, SimWorld};
pub use solve::{solve_gauss_newton, solve_gauss_newton_with, Solution, SolverOptions};
