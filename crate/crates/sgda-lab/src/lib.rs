//! Simulation and measurement laboratory for decentralized minimax training.
//!
//! The crate runs local stochastic gradient descent-ascent over gossiping
//! agents, measures how sensitive the learned saddle point is to replacing a
//! single sample per agent, and evaluates every closed-form guarantee the
//! analysis provides so measurements and theory can be compared directly.
//!
//! The main moving parts:
//!
//! - [`problems`]: saddle objectives with known constants (smoothness,
//!   gradient bound, curvature moduli) and, where available, analytic saddle
//!   points.
//! - [`data`]: per-agent sample sets, neighboring datasets differing in one
//!   sample per agent, and population moments for exact risk evaluation.
//! - [`topology`]: doubly stochastic gossip matrices and their spectral
//!   profile (mixing constant, decay constants).
//! - [`engine`]: the training loop itself; local steps, gossip rounds,
//!   trajectory records.
//! - [`stability`]: coupled runs on neighboring datasets, stability and risk
//!   estimators, generalization gaps.
//! - [`bounds`]: closed-form consensus, stability, and risk guarantees, plus
//!   tabulated reports with premise flags.
//! - [`config`], [`sweep`], [`report`], [`plot`], [`cli`]: the experiment
//!   front end; TOML configs in, deterministic CSV/JSON/SVG out.
//!
//! Determinism is a design rule throughout: every random choice derives from
//! explicit seeds, and rerunning any command reproduces its outputs byte for
//! byte.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod plot;
pub mod problems;
pub mod report;
pub mod seeds;
pub mod stability;
pub mod sweep;
pub mod topology;
