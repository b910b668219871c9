//! Nested hyperboloids: embeddings `L^m -> L^{m+1}`, the matching
//! projections, reconstruction, and composed stacks.
//!
//! A level is a pair `(Lambda, r)` with `Lambda = [Lambda~ | v]` in
//! SO+(1, m+1). It embeds points as
//!
//! ```text
//! x  |->  cosh(r) Lambda~ x + sinh(r) v
//! ```
//!
//! whose image is the intersection of `L^{m+1}` with an affine hyperplane —
//! a copy of `L^m` that is isometric when `r = 0` and need not pass through
//! any distinguished point. The projection back is linear up to a
//! normalization, so composed stacks collapse to a single matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::group::LorentzMatrix;
use crate::lorentz::{self, geodesic_distance, inner_unchecked, Point};

/// One codimension-1 nesting level: `Lambda` in SO+(1, m+1) and offset `r`.
#[derive(Debug, Clone)]
pub struct NestingLevel {
    lambda: LorentzMatrix,
    r: f64,
}

impl NestingLevel {
    pub fn new(lambda: LorentzMatrix, r: f64) -> Result<Self> {
        if lambda.dim() < 1 {
            return Err(Error::dim("nesting level needs Lambda of size >= 2"));
        }
        if !r.is_finite() {
            return Err(Error::input("nesting level offset must be finite"));
        }
        let level = NestingLevel { lambda, r };
        // Consequences of the group invariant on the [Lambda~ | v] split,
        // checked directly: v is unit spacelike and Lambda~ is a Lorentz
        // isometry onto its image.
        let v = level.v();
        let vv = inner_unchecked(&v, &v);
        if (vv - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidLorentz(format!(
                "last column not unit spacelike: <v,v>_L = {vv}"
            )));
        }
        let tilde = level.lambda_tilde();
        let m = tilde.ncols() - 1;
        let mut jt = tilde.clone();
        for c in 0..tilde.ncols() {
            jt[(0, c)] = -jt[(0, c)];
        }
        let mut gram = tilde.tr_mul(&jt);
        gram[(0, 0)] += 1.0;
        for i in 1..=m {
            gram[(i, i)] -= 1.0;
        }
        let dev = gram.amax();
        if dev > 1e-9 {
            return Err(Error::InvalidLorentz(format!(
                "Lambda~^T J Lambda~ deviates from J_m by {dev:.3e}"
            )));
        }
        Ok(level)
    }

    /// Identity level: appends a zero coordinate on embedding.
    pub fn identity(lower_dim: usize) -> Self {
        NestingLevel {
            lambda: LorentzMatrix::identity(lower_dim + 1),
            r: 0.0,
        }
    }

    /// Dimension m of the lower space `L^m`.
    pub fn lower_dim(&self) -> usize {
        self.lambda.dim() - 1
    }

    /// Dimension m+1 of the upper space `L^{m+1}`.
    pub fn upper_dim(&self) -> usize {
        self.lambda.dim()
    }

    pub fn lambda(&self) -> &LorentzMatrix {
        &self.lambda
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// First m+1 columns of Lambda ((m+2) x (m+1)).
    pub fn lambda_tilde(&self) -> DMatrix<f64> {
        let size = self.lambda.matrix().nrows();
        self.lambda.matrix().columns(0, size - 1).into_owned()
    }

    /// Last column of Lambda (unit spacelike).
    pub fn v(&self) -> DVector<f64> {
        let size = self.lambda.matrix().ncols();
        self.lambda.matrix().column(size - 1).into_owned()
    }
}

/// Embed `x` in `L^m` into `L^{m+1}`: `cosh(r) Lambda~ x + sinh(r) v`.
pub fn embed(level: &NestingLevel, x: &Point) -> Result<Point> {
    if x.dim() != level.lower_dim() {
        return Err(Error::dim(format!(
            "embed: point in L^{} but level maps L^{}",
            x.dim(),
            level.lower_dim()
        )));
    }
    let ambient = embed_raw(level, x.ambient());
    Ok(Point::from_ambient_unchecked(lorentz::renormalize(ambient)))
}

pub(crate) fn embed_raw(level: &NestingLevel, x: &DVector<f64>) -> DVector<f64> {
    let lam = level.lambda.matrix();
    let size = lam.nrows();
    // cosh(r) * Lambda~ x + sinh(r) * v == Lambda * [cosh(r) x; sinh(r)].
    let mut lifted = DVector::zeros(size);
    let c = level.r.cosh();
    for i in 0..size - 1 {
        lifted[i] = c * x[i];
    }
    lifted[size - 1] = level.r.sinh();
    lam * lifted
}

/// Project `x` in `L^{m+1}` to `L^m`: normalize `J_m Lambda~^T J_{m+1} x`.
///
/// For valid inputs the unnormalized image equals the first m+1 coordinates
/// of `Lambda^{-1} x`, which is always timelike with positive first entry;
/// the degenerate error can only fire on invalid data.
pub fn project(level: &NestingLevel, x: &Point) -> Result<Point> {
    if x.dim() != level.upper_dim() {
        return Err(Error::dim(format!(
            "project: point in L^{} but level projects L^{}",
            x.dim(),
            level.upper_dim()
        )));
    }
    let y = project_raw(level, x.ambient());
    let q = inner_unchecked(&y, &y);
    if q >= -1e-12 {
        return Err(Error::DegenerateProjection(format!(
            "projected vector not timelike (<y,y>_L = {q:.3e})"
        )));
    }
    debug_assert!(y[0] > 0.0, "projection lost the positive sheet");
    Ok(Point::from_ambient_unchecked(y / (-q).sqrt()))
}

/// Unnormalized projection `J_m Lambda~^T J_{m+1} x`.
pub(crate) fn project_raw(level: &NestingLevel, x: &DVector<f64>) -> DVector<f64> {
    let tilde = level.lambda_tilde();
    let mut jx = x.clone();
    jx[0] = -jx[0];
    let mut y = tilde.tr_mul(&jx);
    y[0] = -y[0];
    y
}

/// Reconstruction `embed(project(x))`: the closest point on the level's
/// image, equal to `x` exactly when `x` already lies on it.
pub fn reconstruct(level: &NestingLevel, x: &Point) -> Result<Point> {
    embed(level, &project(level, x)?)
}

/// A chain of codimension-1 levels from `L^n` down to `L^m`.
#[derive(Debug, Clone)]
pub struct NestingStack {
    levels: Vec<NestingLevel>,
}

impl NestingStack {
    /// Levels ordered outermost first: `levels[0]` projects `L^n -> L^{n-1}`.
    pub fn new(levels: Vec<NestingLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::input("stack needs at least one level"));
        }
        for pair in levels.windows(2) {
            if pair[0].lower_dim() != pair[1].upper_dim() {
                return Err(Error::dim(format!(
                    "stack levels disagree: L^{} then L^{}",
                    pair[0].lower_dim(),
                    pair[1].upper_dim()
                )));
            }
        }
        Ok(NestingStack { levels })
    }

    /// Identity stack from `L^n` to `L^m` (drops trailing coordinates).
    pub fn identity(n: usize, m: usize) -> Result<Self> {
        if m >= n || m < 1 {
            return Err(Error::dim(format!("identity stack needs n > m >= 1, got {n} -> {m}")));
        }
        let levels = (m..n).rev().map(NestingLevel::identity).collect();
        NestingStack::new(levels)
    }

    pub fn levels(&self) -> &[NestingLevel] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut Vec<NestingLevel> {
        &mut self.levels
    }

    /// Dimension n of the ambient (top) space.
    pub fn upper_dim(&self) -> usize {
        self.levels[0].upper_dim()
    }

    /// Dimension m of the reduced (bottom) space.
    pub fn lower_dim(&self) -> usize {
        self.levels.last().unwrap().lower_dim()
    }

    /// The (n+1) x (m+1) product `Lambda~_n Lambda~_{n-1} ... Lambda~_{m+1}`
    /// realizing the composed projection in closed form.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        let mut m = self.levels[0].lambda_tilde();
        for level in &self.levels[1..] {
            m *= level.lambda_tilde();
        }
        m
    }
}

/// Apply every level's projection, outermost first.
pub fn stack_project(stack: &NestingStack, x: &Point) -> Result<Point> {
    let mut current = x.clone();
    for level in stack.levels() {
        current = project(level, &current)?;
    }
    Ok(current)
}

/// Apply every level's embedding, innermost first.
pub fn stack_reconstruct(stack: &NestingStack, z: &Point) -> Result<Point> {
    let mut current = z.clone();
    for level in stack.levels().iter().rev() {
        current = embed(level, &current)?;
    }
    Ok(current)
}

/// Closed-form composed projection `normalize(J_m M^T J_n x)`; agrees with
/// the sequential route.
pub fn stack_project_closed_form(stack: &NestingStack, x: &Point) -> Result<Point> {
    if x.dim() != stack.upper_dim() {
        return Err(Error::dim("stack_project: dimension mismatch"));
    }
    let m = stack.projection_matrix();
    let mut jx = x.ambient().clone();
    jx[0] = -jx[0];
    let mut y = m.tr_mul(&jx);
    y[0] = -y[0];
    let q = inner_unchecked(&y, &y);
    if q >= -1e-12 {
        return Err(Error::DegenerateProjection(format!(
            "closed-form projection not timelike (<y,y>_L = {q:.3e})"
        )));
    }
    Ok(Point::from_ambient_unchecked(y / (-q).sqrt()))
}

/// Mean squared geodesic reconstruction error over the data set.
pub fn reconstruction_loss(stack: &NestingStack, data: &[Point]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("reconstruction_loss: empty data"));
    }
    let mut total = 0.0;
    for x in data {
        let xhat = stack_reconstruct(stack, &stack_project(stack, x)?)?;
        total += geodesic_distance(x, &xhat)?.powi(2);
    }
    Ok(total / data.len() as f64)
}

/// Conjugated isometry action on the upper space:
/// `Lambda diag(R, 1) Lambda^{-1}` applied to `y`, where `R` acts on `L^m`.
///
/// Embedding commutes with it: `embed(R x) = conjugated_action(embed(x))`.
pub fn conjugated_action(level: &NestingLevel, r: &LorentzMatrix, y: &Point) -> Result<Point> {
    if r.dim() != level.lower_dim() {
        return Err(Error::dim(format!(
            "conjugated_action: R acts on L^{}, level lower dim is {}",
            r.dim(),
            level.lower_dim()
        )));
    }
    if y.dim() != level.upper_dim() {
        return Err(Error::dim("conjugated_action: point dimension mismatch"));
    }
    let size = level.lambda.matrix().nrows();
    let mut block = DMatrix::identity(size, size);
    block.view_mut((0, 0), (size - 1, size - 1)).copy_from(r.matrix());
    let conj = level.lambda.matrix() * block * level.lambda.inverse().matrix();
    let image = conj * y.ambient();
    Ok(Point::from_ambient_unchecked(lorentz::renormalize(image)))
}

/// The conjugated matrix itself (it stays in the group).
pub fn conjugated_matrix(level: &NestingLevel, r: &LorentzMatrix) -> Result<LorentzMatrix> {
    if r.dim() != level.lower_dim() {
        return Err(Error::dim("conjugated_matrix: dimension mismatch"));
    }
    let size = level.lambda.matrix().nrows();
    let mut block = DMatrix::identity(size, size);
    block.view_mut((0, 0), (size - 1, size - 1)).copy_from(r.matrix());
    LorentzMatrix::new(level.lambda.matrix() * block * level.lambda.inverse().matrix())
}
