//! Numerical laboratory for non-uniformly hyperbolic dynamics.
//!
//! The crate bundles five computational toolkits that share a small
//! fixed-size linear-algebra layer:
//!
//! - [`maps`]: exact torus endomorphism families (linear, sheared
//!   volume-preserving, circle-cover products, Viana skew products) with
//!   full preimage enumeration and natural-extension backward sampling;
//! - [`billiard`]: finite-horizon dispersing billiards on the torus —
//!   collision solver, derivative, invariant cones, expansion bounds;
//! - [`cocycle`]: Lyapunov spectra by reorthonormalized QR products,
//!   Oseledets directions, Pliss times, Pesin-entropy estimates;
//! - [`preimage`]: preimage-tree statistics — the backward-expansion
//!   functional, angle tails, moment decay, hyperbolic-time histograms;
//! - [`orbits`]: billiard periodic orbits via the cyclic length functional,
//!   the expansion-rate report, and the zero-pressure consistency check;
//! - [`tms`]: finite topological Markov shifts — components, period,
//!   entropy, the entropy-maximizing Markov chain, entropy ladders.

pub mod billiard;
pub mod cocycle;
pub mod config;
pub mod linalg;
pub mod maps;
pub mod orbits;
pub mod preimage;
pub mod tms;

pub use billiard::{BilliardError, BilliardTable, CollisionState, ConeKind, Disc};
pub use cocycle::{
    lyapunov_qr, pesin_entropy_estimate, pliss_times, stable_direction, unstable_direction,
    z_chi_test, BilliardFlow, Cocycle, CocycleError, DitheredEndo, LyapunovEstimate,
    PesinEstimate, PlissResult,
};
pub use config::{load_map, load_table, ConfigError, DynMap, MapConfig, TableConfig};
pub use linalg::{Mat2, Vec2};
pub use maps::{
    sample_preorbit, validate_acs_matrix, IntMat2, MapError, PreOrbit, ShearFn, TorusEndo,
    TorusPoint, VianaMap,
};
pub use orbits::{
    enumerate_orbits, mme_criterion_report, pressure_zero_check, solve_orbit, EnumOptions,
    Itinerary, MmeReport, OrbitError, PeriodicOrbit, PressureDirection,
};
pub use preimage::{
    angle_tail_experiment, backward_functional, c_lower_estimate, hyperbolic_time_stats,
    moment_bound_check, PreimageError, TailFit,
};
pub use tms::{entropy_ladder, MarkovGraph, ParryMeasure, TmsError};
