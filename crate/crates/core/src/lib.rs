//! Numerical laboratory for the fermionic representation of 2D Ising models
//! with finite-range perturbations.
//!
//! The crate is organized as independent layers that validate one another:
//!
//! * [`grassmann`] — exact Grassmann algebra, Pfaffians, Berezin integrals
//!   and truncated expectations (the brute-force oracle);
//! * [`lattice`] — the spin model itself: Hamiltonian, exact enumeration on
//!   tiny tori and cluster/Metropolis Monte Carlo;
//! * [`freefermion`] — the solvable nearest-neighbor layer: momentum-space
//!   quadratic forms, critical modes, propagators, four-boundary-condition
//!   Pfaffian partition functions and loop-graph energy correlations;
//! * [`polymer`] — the cluster expansion of the finite-range perturbation:
//!   strings, polymers, activities, hard-core sums, Mayer coefficients and
//!   convergence diagnostics;
//! * [`scaling`] — continuum and dressed lattice propagators, the m-point
//!   loop formula, temperature tuning and convergence-rate studies;
//! * [`rg`] — scale decomposition, single-scale propagators, localization,
//!   tree dimension bookkeeping, coupling flows and the counterterm fixed
//!   point;
//! * [`pipelines`] — batch experiment drivers shared by the CLI and the
//!   examples.
//!
//! Everything is deterministic given a seed; see `README.md` for usage.

pub mod grassmann;
pub mod lattice;
pub mod rng;

pub use num_complex::Complex64;
