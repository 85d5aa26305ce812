//! attlab — a numerical laboratory for bosonic attenuator channels in
//! truncated Fock space.
//!
//! The crate implements, cross-validates, and sweeps:
//!
//! - general and thermal attenuator channels Φ_{λ,σ} ([`beamsplitter`],
//!   [`thermal`]), with three mutually independent evaluation routes
//!   (closed-form eigenvalues, two Kraus representations, and an RK4
//!   integrator for the associated Lindblad master equation);
//! - energy-constrained capacity formulas and coherent-information lower
//!   bounds ([`capacities`]);
//! - the λ → 0 limit distributions built from modified Bessel and Laguerre
//!   functions, and their entropy gap ([`asymptotics`]);
//! - the positivity-threshold search n̄_N(λ) and its K(N)/λ fit
//!   ([`search`]);
//! - the trigger-signal noise-attenuation protocol with exact multimode
//!   simulation, closed-form moments, and trace-distance guarantees
//!   ([`protocol`]).
//!
//! Start with the runnable examples (`cargo run --example …`); the thin
//! `attlab` binary wraps the sweep drivers in [`sweep`] for batch CSV/JSON
//! emission.

pub mod asymptotics;
pub mod beamsplitter;
pub mod capacities;
pub mod error;
pub mod fock;
pub mod numeric;
pub mod protocol;
pub mod search;
pub mod sector;
pub mod sweep;
pub mod thermal;

pub use error::{Error, Result};
pub use fock::{
    bosonic_entropy_g, default_cutoff, fock_distance_bound, shannon_entropy, thermal_state,
    trace_distance, FockDistribution, MomentSummary, TruncatedDensityMatrix, DEFAULT_TAIL_TOL,
};
