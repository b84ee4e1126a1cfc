//! A finite-dimensional numerical laboratory for "history space" quantum
//! mechanics: time-indexed partitions of the identity (analysers), the
//! commutation subspace they induce, Born path probabilities, the event
//! projection valued measure, consistency defects, refinements, and
//! trajectory samplers in label space.
//!
//! Everything is dense complex linear algebra over `C^d` with `d` at desk
//! scale (a few hundred at most). The crate is organised around one pipeline:
//!
//! 1. [`analyser`] builds a family `π = {p^t_a}` of projectors, one partition
//!    of identity per time `t`, by hand or by Heisenberg conjugation
//!    `p^t_a = U_{-t} p_a U_t` with `U_t = exp(-itH)`.
//! 2. [`commutant`] enumerates joint history projectors
//!    `p_ω = ∧_i p^{t_i}_{ω_i}` and splits the space into the commutation
//!    subspace `H_π` (range of `Σ_ω p_ω`) and its orthogonal null space `N`.
//! 3. [`histories`] carries the finite history space `Ω`, events, the Born
//!    path measure `P_φ(ω) = ||p_ω φ̂||²`, conditionals and observables.
//! 4. [`sampler`] draws trajectories, either exactly (path-wise law equals
//!    the Born measure) or with independent per-time marginals only.
//! 5. [`consistency`] and [`refinement`] quantify how far two partitions are
//!    from commuting and verify the event-lifting identity
//!    `p_{A'} = p_A p_{π'}` across refinements.
//!
//! All values are immutable after construction and safe to share across
//! threads; the few operations that parallelise internally reduce in a fixed
//! order so results are deterministic.

pub mod analyser;
pub mod commutant;
pub mod consistency;
pub mod error;
pub mod histories;
pub mod linalg;
pub mod refinement;
pub mod sampler;

pub use error::{Error, Result};

/// Default cap on the number of enumerated histories `|Ω|`.
pub const DEFAULT_BUDGET: usize = 65_536;

/// Residual tolerances used throughout the crate.
///
/// Operator-level residuals scale with the ambient dimension, vector
/// residuals with its square root; probabilities carry a fixed absolute
/// tolerance. Rank decisions follow the usual `dim · eps · σ_max` rule.
pub mod tol {
    /// Operator residual tolerance: `1e-10 · dim`.
    pub fn op(dim: usize) -> f64 {
        1e-10 * dim as f64
    }

    /// Vector residual tolerance: `1e-9 · sqrt(dim)`.
    pub fn vec(dim: usize) -> f64 {
        1e-9 * (dim as f64).sqrt()
    }

    /// Absolute tolerance on probabilities and their sums.
    pub const PROB: f64 = 1e-10;

    /// Eigenvalue cutoff when extracting the kernel of `(I-p) + (I-q)`.
    ///
    /// Exact intersections produce eigenvalues at rounding level (~1e-14
    /// for desk dimensions); genuine near-intersections (half-ring
    /// subspaces under a hopping Hamiltonian sit at ~5e-11) must stay
    /// excluded, so the cutoff separates the two regimes.
    pub const MEET_EIGEN: f64 = 1e-12;

    /// Numerical-rank threshold for a spectrum with largest magnitude
    /// `sigma_max`.
    pub fn rank(dim: usize, sigma_max: f64) -> f64 {
        dim as f64 * f64::EPSILON * sigma_max.max(1.0)
    }

    /// Tolerance for subspace containment checks.
    pub fn containment(dim: usize) -> f64 {
        1e-9 * dim as f64
    }
}
