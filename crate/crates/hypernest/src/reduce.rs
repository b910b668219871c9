//! Dimensionality reduction on the hyperboloid: nested-hyperboloid fitting
//! by Riemannian descent and the tangent-PCA baseline.
//!
//! Nested fitting is greedy over codimension-1 levels. At each level the
//! transformation is parameterized through the rotation-boost-rotation
//! factorization `Lambda = diag(1,P) B(alpha) diag(1,Q^T)` plus the offset
//! `r`, so the optimizer only ever sees rotation matrices and scalars. The
//! fitted result is compared against (and warm-started from) the tangent-PCA
//! subspace, whose reconstruction the nested machinery can always reproduce
//! with `r = 0` — the fitted error therefore never exceeds the baseline's.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::group::{
    self, axis_decompose, boost_along_first_axis, boost_derivative, complete_lorentz_frame,
};
use crate::lorentz::{
    exp_map, frechet_mean_uniform, geodesic_distance, inner_unchecked, log_map, Point, Tangent,
};
use crate::nested::{self, NestingLevel, NestingStack};
use crate::opt::{self, minimize_with_grad, MinimizeResult, OptimizerConfig, Param, TraceRow};

/// Tangent-space PCA anchored at the Frechet mean.
#[derive(Debug, Clone)]
pub struct TangentPcaModel {
    mean: Point,
    basis: Vec<Tangent>,
    eigenvalues: Vec<f64>,
}

impl TangentPcaModel {
    /// Rebuild a model from stored parts, revalidating the basis: pairwise
    /// Lorentz-orthonormal and orthogonal to the mean.
    pub fn from_parts(
        mean: Point,
        basis: Vec<Tangent>,
        eigenvalues: Vec<f64>,
    ) -> Result<Self> {
        for (i, a) in basis.iter().enumerate() {
            if a.base().ambient() != mean.ambient() {
                return Err(Error::input("basis vector based away from the mean"));
            }
            for (j, b) in basis.iter().enumerate() {
                let pairing = inner_unchecked(a.components(), b.components());
                let expected = if i == j { 1.0 } else { 0.0 };
                if (pairing - expected).abs() > 1e-8 {
                    return Err(Error::input(format!(
                        "basis not Lorentz-orthonormal: <b{i},b{j}> = {pairing}"
                    )));
                }
            }
        }
        Ok(TangentPcaModel {
            mean,
            basis,
            eigenvalues,
        })
    }

    pub fn mean(&self) -> &Point {
        &self.mean
    }

    /// Kept principal directions (Lorentz-orthonormal tangents at the mean).
    pub fn basis(&self) -> &[Tangent] {
        &self.basis
    }

    /// All tangent-covariance eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn target_dim(&self) -> usize {
        self.basis.len()
    }

    /// Tangent coordinates of `x` in the kept basis.
    pub fn coordinates(&self, x: &Point) -> Result<DVector<f64>> {
        let v = log_map(&self.mean, x)?;
        let mut coords = DVector::zeros(self.basis.len());
        for (k, b) in self.basis.iter().enumerate() {
            coords[k] = inner_unchecked(v.components(), b.components());
        }
        Ok(coords)
    }

    /// Reconstruction: exponential of the tangent projection.
    pub fn reconstruct(&self, x: &Point) -> Result<Point> {
        let coords = self.coordinates(x)?;
        let n = self.mean.ambient().len();
        let mut comp = DVector::zeros(n);
        for (k, b) in self.basis.iter().enumerate() {
            comp += b.components() * coords[k];
        }
        let tangent = Tangent::new_unchecked(self.mean.clone(), comp);
        exp_map(&self.mean, &tangent)
    }
}

/// A fitted reduction model of either kind.
#[derive(Debug, Clone)]
pub enum ReductionModel {
    Nested(NestingStack),
    TangentPca(TangentPcaModel),
}

impl ReductionModel {
    pub fn reconstruct(&self, x: &Point) -> Result<Point> {
        match self {
            ReductionModel::Nested(stack) => {
                nested::stack_reconstruct(stack, &nested::stack_project(stack, x)?)
            }
            ReductionModel::TangentPca(m) => m.reconstruct(x),
        }
    }

    pub fn upper_dim(&self) -> usize {
        match self {
            ReductionModel::Nested(stack) => stack.upper_dim(),
            ReductionModel::TangentPca(m) => m.mean().dim(),
        }
    }
}

/// Result of a fit or evaluation.
#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub model: ReductionModel,
    pub per_point_sq_errors: Vec<f64>,
    /// Always the mean of `per_point_sq_errors`.
    pub mean_sq_error: f64,
    /// Mean of the per-fit errors across repeated fits (equals
    /// `mean_sq_error` for a single fit).
    pub mean_across_repeats: f64,
    /// Standard deviation of the per-fit errors across repeated fits
    /// (zero for a single fit or a plain evaluation).
    pub std_error: f64,
    pub trace: Vec<TraceRow>,
}

/// Settings for [`fit_nh`].
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub opt: OptimizerConfig,
    /// Joint fine-tuning pass over all levels after the greedy sweep.
    pub joint_refine: bool,
    /// Include tangent-PCA warm starts among the candidate initializations.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            opt: OptimizerConfig {
                max_iters: 150,
                restarts: 3,
                grad_tol: 1e-9,
                ..Default::default()
            },
            joint_refine: false,
            warm_start: true,
            seed: 0,
        }
    }
}

// ---- Level loss and its analytic gradient -------------------------------

/// Assemble `Lambda = diag(1,P) B(alpha) diag(1,Q^T)` from raw factors.
pub(crate) fn assemble_lambda(p: &DMatrix<f64>, alpha: f64, q: &DMatrix<f64>) -> DMatrix<f64> {
    let k = p.nrows();
    let mut e = DMatrix::identity(k + 1, k + 1);
    e.view_mut((1, 1), (k, k)).copy_from(p);
    let b = boost_along_first_axis(alpha, k);
    let mut f = DMatrix::identity(k + 1, k + 1);
    f.view_mut((1, 1), (k, k)).copy_from(&q.transpose());
    e * b.matrix() * f
}

/// `acosh(a)^2` and its derivative, analytic across the branch point a = 1.
fn acosh_sq(a: f64) -> (f64, f64) {
    let t = a - 1.0;
    if t < 1e-7 {
        // theta^2 = 2t - t^2/3 + ...; d/da = 2 - 2t/3 + ...
        let t = t.max(0.0);
        (2.0 * t - t * t / 3.0, 2.0 - 2.0 * t / 3.0)
    } else {
        let theta = a.acosh();
        (theta * theta, 2.0 * theta / (a * a - 1.0).sqrt())
    }
}

/// Reconstruction `embed(project(x))` for a raw `(Lambda, r)`, defined for
/// matrices slightly off the group so finite differences stay meaningful.
fn level_reconstruct_raw(lambda: &DMatrix<f64>, r: f64, x: &DVector<f64>) -> DVector<f64> {
    let size = lambda.nrows();
    let k = size - 1;
    let tilde = lambda.columns(0, k);
    let v = lambda.column(k);
    let mut jx = x.clone();
    jx[0] = -jx[0];
    let mut u = tilde.tr_mul(&jx);
    u[0] = -u[0];
    let s = (-inner_unchecked(&u, &u)).max(1e-300).sqrt();
    let z = u / s;
    tilde * z * r.cosh() + v * r.sinh()
}

/// Mean squared geodesic reconstruction error of one raw level on a cloud.
pub(crate) fn level_loss_raw(lambda: &DMatrix<f64>, r: f64, data: &[DVector<f64>]) -> f64 {
    let mut total = 0.0;
    for x in data {
        let xhat = level_reconstruct_raw(lambda, r, x);
        let a = (-inner_unchecked(x, &xhat)).max(1.0);
        total += acosh_sq(a).0;
    }
    total / data.len() as f64
}

/// Ambient gradients of [`level_loss_raw`] with respect to `(P, alpha, Q, r)`.
///
/// Straight reverse-mode differentiation of the forward formulas; validated
/// against central differences in the tests.
fn level_loss_grad(
    p: &DMatrix<f64>,
    alpha: f64,
    q: &DMatrix<f64>,
    r: f64,
    data: &[DVector<f64>],
) -> Vec<DMatrix<f64>> {
    let k = p.nrows();
    let size = k + 1;
    let lambda = assemble_lambda(p, alpha, q);
    let tilde = lambda.columns(0, k).into_owned();
    let v = lambda.column(k).into_owned();
    let inv_n = 1.0 / data.len() as f64;

    let mut lambda_bar = DMatrix::zeros(size, size);
    let mut r_bar = 0.0;

    for x in data {
        // Forward pass, keeping intermediates.
        let mut jx = x.clone();
        jx[0] = -jx[0];
        let mut u = tilde.tr_mul(&jx);
        u[0] = -u[0];
        let s = (-inner_unchecked(&u, &u)).max(1e-300).sqrt();
        let z = &u / s;
        let embedded = &tilde * &z;
        let xhat = &embedded * r.cosh() + &v * r.sinh();
        let a = (-inner_unchecked(x, &xhat)).max(1.0);
        let (_, dfda) = acosh_sq(a);

        // Backward pass.
        let scale = inv_n * dfda;
        let mut xhat_bar = x.clone();
        xhat_bar[0] = -xhat_bar[0];
        let xhat_bar = xhat_bar * (-scale); // d a / d xhat = -J x

        r_bar += xhat_bar.dot(&(&embedded * r.sinh() + &v * r.cosh()));
        // Lambda~ from the embedding term, v from the offset term.
        let mut tilde_bar = &xhat_bar * z.transpose() * r.cosh();
        let v_bar = &xhat_bar * r.sinh();
        let z_bar = tilde.tr_mul(&xhat_bar) * r.cosh();

        // Normalization y = u / s with s = sqrt(-<u,u>_L).
        let mut ju = u.clone();
        ju[0] = -ju[0];
        let u_bar = &z_bar / s + &ju * (u.dot(&z_bar) / (s * s * s));

        // u = J_{k-1} Lambda~^T J x.
        let mut t1_bar = u_bar;
        t1_bar[0] = -t1_bar[0];
        tilde_bar += &jx * t1_bar.transpose();

        for col in 0..k {
            for row in 0..size {
                lambda_bar[(row, col)] += tilde_bar[(row, col)];
            }
        }
        for row in 0..size {
            lambda_bar[(row, k)] += v_bar[row];
        }
    }

    // Chain through Lambda = E B F.
    let b = boost_along_first_axis(alpha, k).into_matrix();
    let bprime = boost_derivative(alpha, k);
    let mut e = DMatrix::identity(size, size);
    e.view_mut((1, 1), (k, k)).copy_from(p);
    let mut f = DMatrix::identity(size, size);
    f.view_mut((1, 1), (k, k)).copy_from(&q.transpose());

    let e_bar: DMatrix<f64> = &lambda_bar * f.transpose() * b.transpose();
    let p_bar = e_bar.view((1, 1), (k, k)).into_owned();
    let alpha_bar = (&e * &bprime * &f).component_mul(&lambda_bar).sum();
    let f_bar = b.transpose() * e.transpose() * &lambda_bar;
    let q_bar = f_bar.view((1, 1), (k, k)).transpose();

    vec![
        p_bar,
        DMatrix::from_element(1, 1, alpha_bar),
        q_bar,
        DMatrix::from_element(1, 1, r_bar),
    ]
}

fn params_to_level(params: &[Param]) -> (DMatrix<f64>, f64) {
    let p = params[0].matrix().unwrap();
    let alpha = params[1].scalar().unwrap();
    let q = params[2].matrix().unwrap();
    let r = params[3].scalar().unwrap();
    (assemble_lambda(p, alpha, q), r)
}

/// Fit one codimension-1 level to a cloud by Riemannian descent from the
/// given initializations; returns the best (level, loss, trace).
fn fit_level(
    cloud: &[DVector<f64>],
    inits: Vec<Vec<Param>>,
    config: &OptimizerConfig,
) -> Result<(NestingLevel, f64, Vec<TraceRow>)> {
    let objective = |params: &[Param]| {
        let (lambda, r) = params_to_level(params);
        level_loss_raw(&lambda, r, cloud)
    };
    let gradient = |params: &[Param]| {
        let p = params[0].matrix().unwrap();
        let alpha = params[1].scalar().unwrap();
        let q = params[2].matrix().unwrap();
        let r = params[3].scalar().unwrap();
        level_loss_grad(p, alpha, q, r, cloud)
    };

    let mut best: Option<MinimizeResult> = None;
    for init in inits {
        let run = minimize_with_grad(objective, &gradient, init, config)?;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.ok_or_else(|| Error::input("fit_level: no initializations"))?;
    let (lambda, r) = params_to_level(&best.params);
    let level = NestingLevel::new(group::LorentzMatrix::new(lambda)?, r)?;
    Ok((level, best.value, best.trace))
}

fn identity_init(k: usize) -> Vec<Param> {
    vec![
        Param::Rotation(DMatrix::identity(k, k)),
        Param::Scalar(0.0),
        Param::Rotation(DMatrix::identity(k, k)),
        Param::Scalar(0.0),
    ]
}

fn random_init<R: Rng>(k: usize, rng: &mut R) -> Vec<Param> {
    vec![
        Param::Rotation(group::random_rotation(k, rng)),
        Param::Scalar(0.5 * rng.sample::<f64, _>(StandardNormal)),
        Param::Rotation(group::random_rotation(k, rng)),
        Param::Scalar(0.5 * rng.sample::<f64, _>(StandardNormal)),
    ]
}

/// Initialization from the cloud's tangent-PCA frame: `Lambda` whose dropped
/// column is the least principal direction, `r = 0`.
fn warm_init(cloud: &[Point]) -> Result<Vec<Param>> {
    let k = cloud[0].dim();
    let (mean, basis, _) = tangent_frame(cloud)?;
    let mut cols = vec![mean.ambient().clone()];
    for b in basis.iter().take(k - 1) {
        cols.push(b.components().clone());
    }
    let frame = complete_lorentz_frame(&cols)?;
    let d = axis_decompose(&frame)?;
    Ok(vec![
        Param::Rotation(d.p),
        Param::Scalar(d.alpha),
        Param::Rotation(d.q),
        Param::Scalar(0.0),
    ])
}

/// Frechet mean plus the full Lorentz-orthonormal eigenbasis of the tangent
/// covariance, eigenvalues descending.
fn tangent_frame(data: &[Point]) -> Result<(Point, Vec<Tangent>, Vec<f64>)> {
    let n = data[0].dim();
    let mean = frechet_mean_uniform(data)?;
    // Lorentz-orthonormal basis of the tangent space at the mean.
    let frame = complete_lorentz_frame(&[mean.ambient().clone()])?;
    let basis_cols: Vec<DVector<f64>> =
        (1..=n).map(|j| frame.matrix().column(j).into_owned()).collect();

    // Coordinates of the log-mapped data in that basis; the restricted form
    // is positive-definite, so these are ordinary Euclidean coordinates.
    let mut cov = DMatrix::zeros(n, n);
    for x in data {
        let v = log_map(&mean, x)?;
        let mut coords = DVector::zeros(n);
        for (j, e) in basis_cols.iter().enumerate() {
            coords[j] = inner_unchecked(v.components(), e);
        }
        cov += &coords * coords.transpose();
    }
    cov /= data.len() as f64;

    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis = Vec::with_capacity(n);
    let mut eigenvalues = Vec::with_capacity(n);
    for &idx in &order {
        eigenvalues.push(eig.eigenvalues[idx]);
        let dir = eig.eigenvectors.column(idx);
        let mut comp = DVector::zeros(n + 1);
        for (j, e) in basis_cols.iter().enumerate() {
            comp += e * dir[j];
        }
        basis.push(Tangent::new_unchecked(mean.clone(), comp));
    }
    Ok((mean, basis, eigenvalues))
}

/// Tangent PCA: log-map at the Frechet mean, eigendecomposition of the
/// tangent covariance, reconstruction through the top-m subspace.
pub fn fit_tangent_pca(data: &[Point], m: usize) -> Result<ReductionResult> {
    validate_reduction_input(data, m)?;
    let (mean, basis, eigenvalues) = tangent_frame(data)?;
    // from_parts re-asserts the post-fit invariants (Lorentz-orthonormal
    // basis, orthogonal to the mean).
    let model =
        TangentPcaModel::from_parts(mean, basis.into_iter().take(m).collect(), eigenvalues)?;
    evaluate(&ReductionModel::TangentPca(model), data)
}

fn validate_reduction_input(data: &[Point], m: usize) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::input("reduction needs at least 2 points"));
    }
    let n = data[0].dim();
    if data.iter().any(|p| p.dim() != n) {
        return Err(Error::dim("reduction data has mixed dimensions"));
    }
    if m < 1 || m >= n {
        return Err(Error::dim(format!(
            "reduction needs n > m >= 1, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

/// Greedy nested-hyperboloid fit from `L^n` down to `L^m`.
pub fn fit_nh(data: &[Point], m: usize, config: &FitConfig) -> Result<ReductionResult> {
    validate_reduction_input(data, m)?;
    let n = data[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace: Vec<TraceRow> = Vec::new();

    // Greedy sweep, one level per dimension.
    let mut cloud: Vec<Point> = data.to_vec();
    let mut levels: Vec<NestingLevel> = Vec::new();
    for k in ((m + 1)..=n).rev() {
        let raw: Vec<DVector<f64>> = cloud.iter().map(|p| p.ambient().clone()).collect();
        let mut inits = vec![identity_init(k)];
        if config.warm_start {
            // A degenerate cloud just loses this candidate; identity and
            // random initializations remain.
            if let Ok(init) = warm_init(&cloud) {
                inits.push(init);
            }
        }
        for _ in 1..config.opt.restarts.max(1) {
            inits.push(random_init(k, &mut rng));
        }
        let per_level = OptimizerConfig {
            restarts: 1,
            ..config.opt.clone()
        };
        let (level, _, mut level_trace) =
            fit_level(&raw, inits, &per_level).map_err(|e| match e {
                Error::Optimization {
                    iteration,
                    message,
                    trace,
                } => Error::Optimization {
                    iteration,
                    message: format!("level L^{k}: {message}"),
                    trace,
                },
                other => other,
            })?;
        cloud = cloud
            .iter()
            .map(|p| nested::project(&level, p))
            .collect::<Result<_>>()?;
        levels.push(level);
        trace.append(&mut level_trace);
    }
    let greedy = NestingStack::new(levels)?;
    let greedy_loss = nested::reconstruction_loss(&greedy, data)?;

    // Full-depth warm start: a stack whose image is the tangent-PCA
    // subspace. Its composed projection is the metric projection, so its
    // loss never exceeds the tangent-PCA reconstruction error.
    let mut best_stack = greedy;
    let mut best_loss = greedy_loss;
    if config.warm_start {
        if let Ok(stack) = tpca_stack(data, m) {
            let loss = nested::reconstruction_loss(&stack, data)?;
            if loss < best_loss {
                best_stack = stack;
                best_loss = loss;
            }
        }
    }

    if config.joint_refine {
        let (stack, loss, mut refine_trace) = joint_refine(data, &best_stack, &config.opt)?;
        if loss < best_loss {
            best_stack = stack;
            trace.append(&mut refine_trace);
        }
    }

    let mut result = evaluate(&ReductionModel::Nested(best_stack), data)?;
    result.trace = trace;
    Ok(result)
}

/// Stack realizing the tangent-PCA subspace: top level carries the frame,
/// deeper levels are identities, all offsets zero.
pub fn tpca_stack(data: &[Point], m: usize) -> Result<NestingStack> {
    let n = data[0].dim();
    let (mean, basis, _) = tangent_frame(data)?;
    let mut cols = vec![mean.ambient().clone()];
    for b in basis.iter().take(m) {
        cols.push(b.components().clone());
    }
    let frame = complete_lorentz_frame(&cols)?;
    let mut levels = vec![NestingLevel::new(frame, 0.0)?];
    for k in (m..n - 1).rev() {
        levels.push(NestingLevel::identity(k));
    }
    NestingStack::new(levels)
}

/// Joint fine-tuning of every level's `(P, alpha, Q, r)` on the full-stack
/// loss (finite-difference gradients; this pass is optional polish).
fn joint_refine(
    data: &[Point],
    stack: &NestingStack,
    opt: &OptimizerConfig,
) -> Result<(NestingStack, f64, Vec<TraceRow>)> {
    let dims: Vec<usize> = stack.levels().iter().map(|l| l.upper_dim()).collect();
    let mut params = Vec::new();
    for level in stack.levels() {
        let d = axis_decompose(level.lambda())?;
        params.push(Param::Rotation(d.p));
        params.push(Param::Scalar(d.alpha));
        params.push(Param::Rotation(d.q));
        params.push(Param::Scalar(level.r()));
    }
    let raw: Vec<DVector<f64>> = data.iter().map(|p| p.ambient().clone()).collect();
    let dims_for_obj = dims.clone();
    let objective = move |params: &[Param]| {
        let mut total = 0.0;
        for x in &raw {
            let mut down = x.clone();
            let mut stages: Vec<DVector<f64>> = vec![];
            for (li, _) in dims_for_obj.iter().enumerate() {
                let (lambda, r) = params_to_level(&params[4 * li..4 * li + 4]);
                stages.push(down.clone());
                let size = lambda.nrows();
                let tilde = lambda.columns(0, size - 1);
                let mut jx = down.clone();
                jx[0] = -jx[0];
                let mut u = tilde.tr_mul(&jx);
                u[0] = -u[0];
                let s = (-inner_unchecked(&u, &u)).max(1e-300).sqrt();
                down = u / s;
                let _ = r;
            }
            let mut up = down;
            for (li, _) in dims_for_obj.iter().enumerate().rev() {
                let (lambda, r) = params_to_level(&params[4 * li..4 * li + 4]);
                let size = lambda.nrows();
                let tilde = lambda.columns(0, size - 1);
                let v = lambda.column(size - 1);
                up = tilde * up * r.cosh() + v * r.sinh();
                let q = (-inner_unchecked(&up, &up)).max(1e-300).sqrt();
                up /= q;
            }
            let a = (-inner_unchecked(x, &up)).max(1.0);
            total += acosh_sq(a).0;
        }
        total / data.len() as f64
    };
    let refine_cfg = OptimizerConfig {
        restarts: 1,
        max_iters: opt.max_iters.min(30),
        ..opt.clone()
    };
    let run = opt::minimize(objective, params, &refine_cfg)?;
    let mut levels = Vec::new();
    for (li, _) in dims.iter().enumerate() {
        let (lambda, r) = params_to_level(&run.params[4 * li..4 * li + 4]);
        levels.push(NestingLevel::new(group::LorentzMatrix::new(lambda)?, r)?);
    }
    Ok((NestingStack::new(levels)?, run.value, run.trace))
}

/// Per-point squared geodesic reconstruction errors of a fitted model.
pub fn evaluate(model: &ReductionModel, data: &[Point]) -> Result<ReductionResult> {
    if data.is_empty() {
        return Err(Error::input("evaluate: empty data"));
    }
    if data[0].dim() != model.upper_dim() {
        return Err(Error::dim(format!(
            "evaluate: model lives in L^{}, data in L^{}",
            model.upper_dim(),
            data[0].dim()
        )));
    }
    let mut per_point = Vec::with_capacity(data.len());
    for x in data {
        let xhat = model.reconstruct(x)?;
        per_point.push(geodesic_distance(x, &xhat)?.powi(2));
    }
    let mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    Ok(ReductionResult {
        model: model.clone(),
        per_point_sq_errors: per_point,
        mean_sq_error: mean,
        mean_across_repeats: mean,
        std_error: 0.0,
        trace: vec![],
    })
}

/// Which reduction method a driver should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nested,
    TangentPca,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Nested => "nh",
            Method::TangentPca => "tpca",
        }
    }
}

/// Fit `repeats` times with distinct seeds; mean and standard deviation of
/// the per-fit mean errors, model from the best fit.
pub fn fit_with_repeats(
    data: &[Point],
    method: Method,
    m: usize,
    config: &FitConfig,
    repeats: usize,
) -> Result<ReductionResult> {
    let repeats = repeats.max(1);
    let mut results = Vec::with_capacity(repeats);
    for rep in 0..repeats {
        let result = match method {
            Method::TangentPca => fit_tangent_pca(data, m)?,
            Method::Nested => {
                let cfg = FitConfig {
                    seed: config.seed.wrapping_add(rep as u64),
                    ..config.clone()
                };
                fit_nh(data, m, &cfg)?
            }
        };
        results.push(result);
    }
    let means: Vec<f64> = results.iter().map(|r| r.mean_sq_error).collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / means.len() as f64;
    let best_idx = (0..results.len())
        .min_by(|&a, &b| means[a].total_cmp(&means[b]))
        .unwrap();
    let mut best = results.swap_remove(best_idx);
    best.mean_across_repeats = mean;
    best.std_error = var.sqrt();
    Ok(best)
}

/// One row of a variance-sweep table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sigma: f64,
    pub method: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub seconds: f64,
}

/// Fig-4-style protocol: for each sigma, sample a wrapped normal on `L^n`,
/// reduce to `L^m` with both methods across the seeds, record mean errors.
pub fn variance_sweep(
    n: usize,
    m: usize,
    sigmas: &[f64],
    count: usize,
    seeds: &[u64],
    config: &FitConfig,
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::input("variance_sweep: need at least one seed"));
    }
    let origin = Point::origin(n);
    let mut rows = Vec::new();
    for &sigma in sigmas {
        for method in [Method::Nested, Method::TangentPca] {
            let started = std::time::Instant::now();
            let mut errors = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let data = crate::lorentz::sample_wrapped_normal(&origin, sigma, count, seed)?;
                let result = match method {
                    Method::TangentPca => fit_tangent_pca(&data, m)?,
                    Method::Nested => {
                        let cfg = FitConfig {
                            seed,
                            ..config.clone()
                        };
                        fit_nh(&data, m, &cfg)?
                    }
                };
                errors.push(result.mean_sq_error);
            }
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                / errors.len() as f64;
            rows.push(SweepRow {
                sigma,
                method: method.label().to_string(),
                mean_error: mean,
                std_error: var.sqrt(),
                seconds: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{random_point, sample_wrapped_normal};
    use crate::opt::fd_check;
    use approx::assert_relative_eq;

    fn planted_level(seed: u64, lower_dim: usize) -> NestingLevel {
        let lambda = group::random_lorentz(lower_dim + 1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let r: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
        NestingLevel::new(lambda, r).unwrap()
    }

    #[test]
    fn level_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let cloud: Vec<DVector<f64>> = (0..8)
            .map(|_| random_point(2, 1.5, &mut rng).into_ambient())
            .collect();
        let params = vec![
            Param::Rotation(group::random_rotation(2, &mut rng)),
            Param::Scalar(0.3),
            Param::Rotation(group::random_rotation(2, &mut rng)),
            Param::Scalar(-0.4),
        ];
        let cloud_f = cloud.clone();
        let f = move |p: &[Param]| {
            let (lambda, r) = params_to_level(p);
            level_loss_raw(&lambda, r, &cloud_f)
        };
        let cloud_g = cloud.clone();
        let g: Box<dyn Fn(&[Param]) -> Vec<DMatrix<f64>>> = Box::new(move |p: &[Param]| {
            level_loss_grad(
                p[0].matrix().unwrap(),
                p[1].scalar().unwrap(),
                p[2].matrix().unwrap(),
                p[3].scalar().unwrap(),
                &cloud_g,
            )
        });
        let report = fd_check(&f, &params, g.as_ref(), 1e-6).unwrap();
        assert!(
            report.pass(),
            "analytic level gradient off: {:?}",
            report.relative_errors
        );
    }

    #[test]
    fn data_on_identity_nested_subspace_fits_exactly() {
        // Points with the trailing coordinate zero lie on the identity
        // nested L^2 inside L^3.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<Point> = (0..30)
            .map(|_| {
                let p = random_point(2, 1.5, &mut rng);
                let mut amb = DVector::zeros(4);
                for i in 0..3 {
                    amb[i] = p.ambient()[i];
                }
                Point::new(amb).unwrap()
            })
            .collect();
        let result = fit_nh(&data, 2, &FitConfig::default()).unwrap();
        assert!(
            result.mean_sq_error < 1e-8,
            "identity-nested data should fit exactly, got {}",
            result.mean_sq_error
        );
    }

    #[test]
    fn planted_level_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let level = planted_level(42, 1);
        let data: Vec<Point> = (0..50)
            .map(|_| {
                let z = random_point(1, 1.5, &mut rng);
                nested::embed(&level, &z).unwrap()
            })
            .collect();
        let config = FitConfig {
            opt: OptimizerConfig {
                max_iters: 1000,
                restarts: 3,
                grad_tol: 1e-9,
                ..Default::default()
            },
            ..Default::default()
        };
        let result = fit_nh(&data, 1, &config).unwrap();
        assert!(
            result.mean_sq_error < 1e-6,
            "planted model not recovered: loss {}",
            result.mean_sq_error
        );
    }

    #[test]
    fn tangent_pca_exact_on_geodesic_data() {
        // Points along a geodesic through the mean are reconstructed
        // exactly by a 1-dimensional tangent model.
        let origin = Point::origin(3);
        let mut dir = DVector::zeros(4);
        dir[1] = 0.6;
        dir[2] = 0.8;
        let data: Vec<Point> = (-5..=5)
            .map(|i| {
                let t = Tangent::new(origin.clone(), &dir * (i as f64 * 0.2)).unwrap();
                exp_map(&origin, &t).unwrap()
            })
            .collect();
        let result = fit_tangent_pca(&data, 1).unwrap();
        assert!(
            result.mean_sq_error < 1e-8,
            "geodesic data not exact: {}",
            result.mean_sq_error
        );
        if let ReductionModel::TangentPca(model) = &result.model {
            // Basis orthonormality and orthogonality to the mean.
            for b in model.basis() {
                assert_relative_eq!(
                    inner_unchecked(b.components(), b.components()),
                    1.0,
                    epsilon = 1e-8
                );
                assert!(
                    inner_unchecked(model.mean().ambient(), b.components()).abs() < 1e-8
                );
            }
        } else {
            panic!("expected tangent PCA model");
        }
    }

    #[test]
    fn tangent_pca_isotropic_explained_variance() {
        let origin = Point::origin(10);
        let data = sample_wrapped_normal(&origin, 0.3, 10_000, 33).unwrap();
        let result = fit_tangent_pca(&data, 2).unwrap();
        if let ReductionModel::TangentPca(model) = &result.model {
            let total: f64 = model.eigenvalues().iter().sum();
            let top2: f64 = model.eigenvalues().iter().take(2).sum();
            let share = top2 / total;
            assert!(
                (share - 0.2).abs() < 0.03,
                "isotropic top-2 share {share} far from 2/n"
            );
        } else {
            panic!("expected tangent PCA model");
        }
    }

    #[test]
    fn tangent_pca_error_matches_direct_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let data: Vec<Point> = (0..40).map(|_| random_point(3, 1.0, &mut rng)).collect();
        let result = fit_tangent_pca(&data, 2).unwrap();
        let mut direct = 0.0;
        for x in &data {
            let xhat = result.model.reconstruct(x).unwrap();
            direct += geodesic_distance(x, &xhat).unwrap().powi(2);
        }
        direct /= data.len() as f64;
        assert_relative_eq!(result.mean_sq_error, direct, epsilon = 1e-12);
    }

    #[test]
    fn nested_never_worse_than_tpca_baseline() {
        // The warm start guarantees this ordering even before descent.
        let origin = Point::origin(5);
        for seed in [1_u64, 2, 3] {
            let data = sample_wrapped_normal(&origin, 1.0, 80, seed).unwrap();
            let nh = fit_nh(&data, 2, &FitConfig::default()).unwrap();
            let tpca = fit_tangent_pca(&data, 2).unwrap();
            assert!(
                nh.mean_sq_error <= tpca.mean_sq_error + 1e-12,
                "NH {} worse than tPCA {} (seed {seed})",
                nh.mean_sq_error,
                tpca.mean_sq_error
            );
        }
    }

    #[test]
    fn fit_nh_not_worse_than_identity_stack() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let data: Vec<Point> = (0..40).map(|_| random_point(3, 1.2, &mut rng)).collect();
        let identity_loss =
            nested::reconstruction_loss(&NestingStack::identity(3, 1).unwrap(), &data).unwrap();
        let fitted = fit_nh(&data, 1, &FitConfig::default()).unwrap();
        assert!(fitted.mean_sq_error <= identity_loss + 1e-12);
    }

    #[test]
    fn evaluate_perfect_model_and_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let level = planted_level(5, 2);
        let data: Vec<Point> = (0..10)
            .map(|_| nested::embed(&level, &random_point(2, 1.0, &mut rng)).unwrap())
            .collect();
        let stack = NestingStack::new(vec![level]).unwrap();
        let result = evaluate(&ReductionModel::Nested(stack.clone()), &data).unwrap();
        assert!(result.mean_sq_error < 1e-12);
        assert!(result.per_point_sq_errors.iter().all(|&e| e < 1e-12));
        assert_eq!(result.std_error, 0.0);

        // Consistency with reconstruction_loss.
        let loss = nested::reconstruction_loss(&stack, &data).unwrap();
        assert_relative_eq!(result.mean_sq_error, loss, epsilon = 1e-12);

        // Single repeat reports zero spread.
        let rep = fit_with_repeats(&data, Method::TangentPca, 1, &FitConfig::default(), 1)
            .unwrap();
        assert_eq!(rep.std_error, 0.0);

        // The summary field always equals the per-point mean, repeats or not.
        let multi = fit_with_repeats(&data, Method::Nested, 1, &FitConfig::default(), 3)
            .unwrap();
        let recomputed = multi.per_point_sq_errors.iter().sum::<f64>()
            / multi.per_point_sq_errors.len() as f64;
        assert!((multi.mean_sq_error - recomputed).abs() < 1e-12);
    }

    #[test]
    fn sweep_shape_ordering_and_trends() {
        let config = FitConfig {
            opt: OptimizerConfig {
                max_iters: 60,
                restarts: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let rows = variance_sweep(4, 2, &[0.05, 0.3, 0.8], 40, &[7], &config).unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.chunks(2) {
            let nh = &pair[0];
            let tpca = &pair[1];
            assert_eq!(nh.method, "nh");
            assert_eq!(tpca.method, "tpca");
            assert!(nh.mean_error <= tpca.mean_error + 1e-12);
        }
        // Vanishing noise drives both errors toward zero like sigma^2 (the
        // floor is the variance of the discarded directions).
        let sigma_sq = 0.05 * 0.05;
        assert!(
            rows[0].mean_error < 4.0 * 2.0 * sigma_sq,
            "NH at tiny sigma: {}",
            rows[0].mean_error
        );
        assert!(
            rows[1].mean_error < 4.0 * 2.0 * sigma_sq,
            "tPCA at tiny sigma: {}",
            rows[1].mean_error
        );
        // tPCA error grows with sigma.
        let tpca_errors: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == "tpca")
            .map(|r| r.mean_error)
            .collect();
        for pair in tpca_errors.windows(2) {
            assert!(pair[1] >= pair[0], "tPCA error decreased with sigma");
        }
    }

    #[test]
    fn achieved_loss_matches_under_global_isometry() {
        // Fitting isometry-moved data reaches the same loss value (the
        // landscape is equivariant; the tangent-frame warm start moves
        // covariantly with the data).
        let origin = Point::origin(3);
        let data = sample_wrapped_normal(&origin, 0.8, 50, 21).unwrap();
        let a = group::random_lorentz(3, 22);
        let moved: Vec<Point> = data.iter().map(|p| a.apply(p).unwrap()).collect();
        let config = FitConfig {
            opt: OptimizerConfig {
                max_iters: 300,
                restarts: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let plain = fit_nh(&data, 1, &config).unwrap();
        let transformed = fit_nh(&moved, 1, &config).unwrap();
        let gap = (plain.mean_sq_error - transformed.mean_sq_error).abs();
        let scale = plain.mean_sq_error.max(transformed.mean_sq_error);
        assert!(
            gap <= 0.02 * scale + 1e-8,
            "achieved losses diverge: {} vs {}",
            plain.mean_sq_error,
            transformed.mean_sq_error
        );
    }
}
