//! First-order Riemannian optimization over the parameter manifolds the
//! rest of the crate needs: SO(k), Stiefel frames with orthonormal rows,
//! unconstrained matrices, and scalars.
//!
//! The driver cycles over parameters one at a time (block-coordinate
//! descent), projecting an ambient gradient onto the tangent space and
//! taking an Armijo backtracking step along a QR retraction. A joint mode
//! updates all parameters along one shared step instead. Gradients are
//! analytic when the caller supplies them, central finite differences
//! otherwise. A finite-difference checker for analytic gradients rounds
//! out the module.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::group::random_rotation;

/// A point on one of the supported parameter manifolds.
#[derive(Debug, Clone)]
pub enum Param {
    /// SO(k): orthogonal with determinant +1.
    Rotation(DMatrix<f64>),
    /// m x n matrix with orthonormal rows (m <= n).
    Stiefel(DMatrix<f64>),
    /// Unconstrained real.
    Scalar(f64),
    /// Unconstrained matrix (decoder weights and the like).
    Euclidean(DMatrix<f64>),
}

impl Param {
    /// Ambient representation as a matrix (scalars become 1x1).
    pub fn as_matrix(&self) -> DMatrix<f64> {
        match self {
            Param::Rotation(m) | Param::Stiefel(m) | Param::Euclidean(m) => m.clone(),
            Param::Scalar(s) => DMatrix::from_element(1, 1, *s),
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Param::Scalar(s) => Some(*s),
            _ => None,
        }
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Param::Rotation(m) | Param::Stiefel(m) | Param::Euclidean(m) => Some(m),
            Param::Scalar(_) => None,
        }
    }

    /// Manifold feasibility within the given tolerances.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        match self {
            Param::Rotation(m) => {
                crate::group::check_rotation(m, tol)?;
                Ok(())
            }
            Param::Stiefel(m) => {
                if m.nrows() > m.ncols() {
                    return Err(Error::dim(format!(
                        "Stiefel frame must have m <= n, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let dev =
                    (m * m.transpose() - DMatrix::identity(m.nrows(), m.nrows())).amax();
                if dev > tol.ortho {
                    return Err(Error::input(format!(
                        "Stiefel rows not orthonormal (deviation {dev:.3e})"
                    )));
                }
                Ok(())
            }
            Param::Scalar(s) => {
                if s.is_finite() {
                    Ok(())
                } else {
                    Err(Error::input("scalar parameter not finite"))
                }
            }
            Param::Euclidean(m) => {
                if m.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::input("matrix parameter not finite"))
                }
            }
        }
    }

    /// A random point of the same kind and shape (used by restarts).
    pub fn random_like<R: Rng>(&self, rng: &mut R) -> Param {
        match self {
            Param::Rotation(m) => Param::Rotation(random_rotation(m.nrows(), rng)),
            Param::Stiefel(m) => {
                let full = random_rotation(m.ncols(), rng);
                Param::Stiefel(full.rows(0, m.nrows()).into_owned())
            }
            Param::Scalar(s) => Param::Scalar(s + rng.sample::<f64, _>(StandardNormal)),
            Param::Euclidean(m) => Param::Euclidean(DMatrix::from_fn(
                m.nrows(),
                m.ncols(),
                |i, j| m[(i, j)] + rng.sample::<f64, _>(StandardNormal),
            )),
        }
    }
}

/// Settings for [`minimize`].
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Initial line-search step.
    pub step: f64,
    /// Maximum number of block sweeps.
    pub max_iters: usize,
    /// Stop when every projected-gradient Frobenius norm is below this.
    pub grad_tol: f64,
    /// Armijo backtracking contraction factor, in (0,1).
    pub contraction: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    /// Maximum backtracking halvings per line search.
    pub max_backtracks: usize,
    /// Total runs: the first from the given parameters, the rest from
    /// random initializations. Best final value wins.
    pub restarts: usize,
    /// Seed for restart initializations.
    pub seed: u64,
    /// Update all parameters along one shared step instead of one by one.
    pub joint: bool,
    /// Central-difference step for fallback gradients.
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step: 1.0,
            max_iters: 200,
            grad_tol: 1e-8,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
            restarts: 1,
            seed: 0,
            joint: false,
            fd_step: 1e-6,
        }
    }
}

/// One row of the optimization trace (recorded per sweep).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norms: Vec<f64>,
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub params: Vec<Param>,
    pub value: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
}

/// Project an ambient gradient onto the tangent space at `p`.
///
/// Rotation at R: `R skew(R^T G)`; Stiefel at X: `G - sym(G X^T) X`;
/// scalars and unconstrained matrices pass through.
pub fn tangent_project(p: &Param, ambient: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match p {
        Param::Rotation(r) => {
            if ambient.shape() != r.shape() {
                return Err(Error::dim("tangent_project: gradient shape mismatch"));
            }
            let a = r.transpose() * ambient;
            let skew = (&a - a.transpose()) * 0.5;
            Ok(r * skew)
        }
        Param::Stiefel(x) => {
            if ambient.shape() != x.shape() {
                return Err(Error::dim("tangent_project: gradient shape mismatch"));
            }
            let gxt = ambient * x.transpose();
            let sym = (&gxt + gxt.transpose()) * 0.5;
            Ok(ambient - sym * x)
        }
        Param::Scalar(_) => {
            if ambient.shape() != (1, 1) {
                return Err(Error::dim("tangent_project: scalar gradient must be 1x1"));
            }
            Ok(ambient.clone())
        }
        Param::Euclidean(m) => {
            if ambient.shape() != m.shape() {
                return Err(Error::dim("tangent_project: gradient shape mismatch"));
            }
            Ok(ambient.clone())
        }
    }
}

/// Q factor of a thin QR with the positive-diagonal convention.
fn qf(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cols = m.ncols();
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        let d = r[(j, j)];
        if d.abs() < 1e-300 {
            return Err(Error::Retraction(format!("rank-deficient QR at column {j}")));
        }
        if d < 0.0 {
            let flipped = -q.column(j);
            q.set_column(j, &flipped);
        }
    }
    Ok(q)
}

/// First-order retraction: move `step * tangent` and map back to the
/// manifold (QR-based for the orthogonality-constrained kinds).
pub fn retract(p: &Param, tangent: &DMatrix<f64>, step: f64) -> Result<Param> {
    match p {
        Param::Rotation(r) => {
            let moved = r + tangent * step;
            let q = qf(&moved)?;
            if q.determinant() < 0.0 {
                return Err(Error::Retraction(
                    "step crossed out of the rotation component".into(),
                ));
            }
            Ok(Param::Rotation(q))
        }
        Param::Stiefel(x) => {
            let moved = (x + tangent * step).transpose();
            let q = qf(&moved)?;
            Ok(Param::Stiefel(q.transpose()))
        }
        Param::Scalar(s) => Ok(Param::Scalar(s + step * tangent[(0, 0)])),
        Param::Euclidean(m) => Ok(Param::Euclidean(m + tangent * step)),
    }
}

/// Central finite-difference ambient gradient of `f` in parameter `i`.
pub fn fd_gradient<F: Fn(&[Param]) -> f64>(
    f: &F,
    params: &[Param],
    i: usize,
    h: f64,
) -> DMatrix<f64> {
    let base = params[i].as_matrix();
    let mut grad = DMatrix::zeros(base.nrows(), base.ncols());
    let mut work: Vec<Param> = params.to_vec();
    for r in 0..base.nrows() {
        for c in 0..base.ncols() {
            let mut plus = base.clone();
            plus[(r, c)] += h;
            work[i] = perturbed_like(&params[i], plus);
            let fp = f(&work);
            let mut minus = base.clone();
            minus[(r, c)] -= h;
            work[i] = perturbed_like(&params[i], minus);
            let fm = f(&work);
            grad[(r, c)] = (fp - fm) / (2.0 * h);
        }
    }
    work[i] = params[i].clone();
    grad
}

/// Rebuild a parameter of the same kind from raw ambient entries (used for
/// finite-difference probes, which step off the manifold on purpose).
fn perturbed_like(kind: &Param, entries: DMatrix<f64>) -> Param {
    match kind {
        Param::Rotation(_) => Param::Rotation(entries),
        Param::Stiefel(_) => Param::Stiefel(entries),
        Param::Scalar(_) => Param::Scalar(entries[(0, 0)]),
        Param::Euclidean(_) => Param::Euclidean(entries),
    }
}

/// Minimize with finite-difference gradients.
pub fn minimize<F>(f: F, params: Vec<Param>, config: &OptimizerConfig) -> Result<MinimizeResult>
where
    F: Fn(&[Param]) -> f64,
{
    minimize_impl(&f, None::<&GradFn>, params, config)
}

/// Type of an analytic gradient callback: ambient gradients for every
/// parameter, evaluated in one pass.
pub type GradFn<'a> = dyn Fn(&[Param]) -> Vec<DMatrix<f64>> + 'a;

/// Minimize with a caller-supplied analytic gradient.
pub fn minimize_with_grad<F>(
    f: F,
    grad: &GradFn,
    params: Vec<Param>,
    config: &OptimizerConfig,
) -> Result<MinimizeResult>
where
    F: Fn(&[Param]) -> f64,
{
    minimize_impl(&f, Some(grad), params, config)
}

fn minimize_impl<F>(
    f: &F,
    grad: Option<&GradFn>,
    params: Vec<Param>,
    config: &OptimizerConfig,
) -> Result<MinimizeResult>
where
    F: Fn(&[Param]) -> f64,
{
    if config.step <= 0.0
        || config.grad_tol <= 0.0
        || config.sufficient_decrease <= 0.0
        || config.fd_step <= 0.0
        || !(0.0..1.0).contains(&config.contraction)
        || config.contraction <= 0.0
    {
        return Err(Error::input(
            "optimizer settings must be positive with contraction in (0,1)",
        ));
    }
    let restarts = config.restarts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<MinimizeResult> = None;
    for attempt in 0..restarts {
        let start = if attempt == 0 {
            params.clone()
        } else {
            params.iter().map(|p| p.random_like(&mut rng)).collect()
        };
        let run = run_descent(f, grad, start, config)?;
        let better = best.as_ref().is_none_or(|b| run.value < b.value);
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn run_descent<F>(
    f: &F,
    grad: Option<&GradFn>,
    mut params: Vec<Param>,
    config: &OptimizerConfig,
) -> Result<MinimizeResult>
where
    F: Fn(&[Param]) -> f64,
{
    let mut value = f(&params);
    let mut trace: Vec<TraceRow> = Vec::new();
    if !value.is_finite() {
        return Err(Error::Optimization {
            iteration: 0,
            message: format!("objective not finite at start ({value})"),
            trace: vec![],
        });
    }

    let mut converged = false;
    for iteration in 0..config.max_iters {
        let ambient: Vec<DMatrix<f64>> = match grad {
            Some(g) => g(&params),
            None => (0..params.len())
                .map(|i| fd_gradient(f, &params, i, config.fd_step))
                .collect(),
        };
        if ambient.len() != params.len() {
            return Err(Error::Optimization {
                iteration,
                message: "gradient callback returned wrong arity".into(),
                trace: trace.iter().map(|t| t.objective).collect(),
            });
        }
        let tangents: Vec<DMatrix<f64>> = params
            .iter()
            .zip(&ambient)
            .map(|(p, g)| tangent_project(p, g))
            .collect::<Result<_>>()?;
        let grad_norms: Vec<f64> = tangents.iter().map(|t| t.norm()).collect();

        let improved = if config.joint {
            joint_step(f, &mut params, &tangents, &mut value, config)
        } else {
            block_step(f, &mut params, &tangents, &mut value, config)
        };

        if !value.is_finite() {
            return Err(Error::Optimization {
                iteration,
                message: format!("objective became non-finite ({value})"),
                trace: trace.iter().map(|t| t.objective).collect(),
            });
        }
        trace.push(TraceRow {
            iteration,
            objective: value,
            grad_norms: grad_norms.clone(),
        });
        if grad_norms.iter().all(|&n| n < config.grad_tol) {
            converged = true;
            break;
        }
        if !improved {
            // No parameter accepted a step; the line search is exhausted.
            break;
        }
    }
    Ok(MinimizeResult {
        params,
        value,
        trace,
        converged,
    })
}

/// One sweep of per-parameter Armijo steps. Gradients are evaluated at the
/// sweep start; each accepted step still only decreases the objective.
fn block_step<F>(
    f: &F,
    params: &mut [Param],
    tangents: &[DMatrix<f64>],
    value: &mut f64,
    config: &OptimizerConfig,
) -> bool
where
    F: Fn(&[Param]) -> f64,
{
    let mut any = false;
    for i in 0..params.len() {
        let norm_sq = tangents[i].norm_squared();
        if norm_sq.sqrt() < config.grad_tol {
            continue;
        }
        let mut step = config.step;
        for _ in 0..config.max_backtracks {
            let candidate = match retract(&params[i], &tangents[i], -step) {
                Ok(p) => p,
                Err(_) => {
                    step *= config.contraction;
                    continue;
                }
            };
            let old = std::mem::replace(&mut params[i], candidate);
            let trial = f(params);
            if trial.is_finite()
                && trial <= *value - config.sufficient_decrease * step * norm_sq
            {
                *value = trial;
                any = true;
                break;
            }
            params[i] = old;
            step *= config.contraction;
        }
    }
    any
}

/// One shared Armijo step along all projected gradients at once.
fn joint_step<F>(
    f: &F,
    params: &mut [Param],
    tangents: &[DMatrix<f64>],
    value: &mut f64,
    config: &OptimizerConfig,
) -> bool
where
    F: Fn(&[Param]) -> f64,
{
    let norm_sq: f64 = tangents.iter().map(|t| t.norm_squared()).sum();
    if norm_sq.sqrt() < config.grad_tol {
        return false;
    }
    let mut step = config.step;
    for _ in 0..config.max_backtracks {
        let candidate: Result<Vec<Param>> = params
            .iter()
            .zip(tangents)
            .map(|(p, t)| retract(p, t, -step))
            .collect();
        if let Ok(cand) = candidate {
            let trial = f(&cand);
            if trial.is_finite()
                && trial <= *value - config.sufficient_decrease * step * norm_sq
            {
                params.clone_from_slice(&cand);
                *value = trial;
                return true;
            }
        }
        step *= config.contraction;
    }
    false
}

/// Comparison of an analytic gradient against central differences.
#[derive(Debug, Clone)]
pub struct FdReport {
    /// Per-parameter relative error `|g_a - g_fd| / max(|g_fd|, eps)`.
    pub relative_errors: Vec<f64>,
    pub tolerance: f64,
}

impl FdReport {
    pub fn pass(&self) -> bool {
        self.relative_errors.iter().all(|&e| e < self.tolerance)
    }

    pub fn max_error(&self) -> f64 {
        self.relative_errors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Compare projected analytic gradients against projected central
/// differences at the given point; report-only, never fails.
pub fn fd_check<F>(
    f: &F,
    params: &[Param],
    grad: &GradFn,
    tol: f64,
) -> Result<FdReport>
where
    F: Fn(&[Param]) -> f64,
{
    let analytic = grad(params);
    if analytic.len() != params.len() {
        return Err(Error::input("fd_check: gradient callback arity mismatch"));
    }
    let mut relative_errors = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let numeric = fd_gradient(f, params, i, 1e-6);
        let pa = tangent_project(&params[i], &analytic[i])?;
        let pn = tangent_project(&params[i], &numeric)?;
        let denom = pn.norm().max(1e-12);
        relative_errors.push((pa - pn).norm() / denom);
    }
    Ok(FdReport {
        relative_errors,
        tolerance: tol,
    })
}
