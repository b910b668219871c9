//! Numerical tolerances and small-value guards.
//!
//! Validation tolerances live in [`Tolerances`] so callers can relax or
//! tighten them; the tiny branch guards (series limits near coincident
//! points) are fixed constants.

use serde::{Deserialize, Serialize};

/// Branch point below which exp/log maps return their series limit.
pub const SMALL_ANGLE: f64 = 1e-12;

/// Fixed-point tolerance for the Frechet mean iteration.
pub const FRECHET_TOL: f64 = 1e-10;

/// Iteration cap for the Frechet mean.
pub const FRECHET_MAX_ITERS: usize = 200;

/// Validation tolerances used by the checked constructors.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// |<x,x>_L + 1| bound for hyperboloid points.
    pub point: f64,
    /// |<base,v>_L| bound for tangent vectors.
    pub tangent: f64,
    /// Entrywise bound on A J A^T - J for Lorentz matrices.
    pub group: f64,
    /// |det - 1| bound for rotations and Lorentz matrices.
    pub det: f64,
    /// Entrywise bound on R R^T - I for rotations and Stiefel frames.
    pub ortho: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            point: 1e-9,
            tangent: 1e-9,
            group: 1e-9,
            det: 1e-8,
            ortho: 1e-8,
        }
    }
}

/// Default tolerances as a constant, for call sites that cannot thread a value.
pub const DEFAULT_TOL: Tolerances = Tolerances {
    point: 1e-9,
    tangent: 1e-9,
    group: 1e-9,
    det: 1e-8,
    ortho: 1e-8,
};
