//! Lorentzian linear algebra and the Riemannian geometry of the hyperboloid.
//!
//! The model realizes n-dimensional hyperbolic space as the upper sheet
//!
//! ```text
//! L^n = { x in R^{n+1} : <x,x>_L = -1, x_0 > 0 }
//! ```
//!
//! of a two-sheeted hyperboloid in Minkowski space, where
//! `<x,y>_L = -x_0 y_0 + x_1 y_1 + ... + x_n y_n` is the indefinite
//! Lorentzian form. Restricted to a tangent space of `L^n` the form is
//! positive-definite, so `L^n` is a Riemannian manifold of constant
//! curvature -1 with closed-form exp/log maps and geodesic distances.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{self, Tolerances, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::group;

/// Diagonal metric matrix J_n = diag(-1, I_n) of size (n+1) x (n+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinkowskiForm {
    dimension: usize,
}

impl MinkowskiForm {
    pub fn new(dimension: usize) -> Self {
        MinkowskiForm { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Dense J_n, first entry -1, remaining +1.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut j = DMatrix::identity(self.dimension + 1, self.dimension + 1);
        j[(0, 0)] = -1.0;
        j
    }

    /// J v without materializing the matrix.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        out[0] = -out[0];
        out
    }
}

/// The Lorentzian bilinear form `-u_0 v_0 + sum_{i>=1} u_i v_i`.
pub fn lorentz_inner(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim(format!(
            "lorentz_inner: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(Error::dim("lorentz_inner: vectors must have length >= 2"));
    }
    Ok(inner_unchecked(u, v))
}

/// Compensated product: returns `a*b` and its exact rounding error.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated (Neumaier) dot product of the spatial tails `u[1..] . v[1..]`.
#[inline]
pub(crate) fn spatial_dot(u: &[f64], v: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 1..u.len() {
        let (p, e) = two_prod(u[i], v[i]);
        let t = sum + p;
        comp += if sum.abs() >= p.abs() {
            (sum - t) + p
        } else {
            (p - t) + sum
        };
        comp += e;
        sum = t;
    }
    sum + comp
}

/// The Lorentzian form evaluated with compensated accumulation; the large
/// cancellations between the time term and the spatial sum otherwise
/// dominate round-trip errors far from the origin.
#[inline]
pub(crate) fn inner_unchecked(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let (p0, e0) = two_prod(u[0], v[0]);
    let s = spatial_dot(u.as_slice(), v.as_slice());
    (s - p0) - e0
}

/// Lorentzian norm of a vector, tagged by the sign of its self-product.
///
/// `<v,v>_L` is positive for spacelike vectors, zero for null vectors, and
/// negative for timelike vectors; in the last case the norm is imaginary
/// and we return its magnitude `sqrt(-<v,v>_L)` tagged as timelike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LorentzNorm {
    Spacelike(f64),
    Null,
    Timelike(f64),
}

impl LorentzNorm {
    /// |‖v‖_L|: the nonnegative magnitude regardless of causal type.
    pub fn magnitude(&self) -> f64 {
        match *self {
            LorentzNorm::Spacelike(m) | LorentzNorm::Timelike(m) => m,
            LorentzNorm::Null => 0.0,
        }
    }

    pub fn is_timelike(&self) -> bool {
        matches!(self, LorentzNorm::Timelike(_))
    }
}

pub fn lorentz_norm(v: &DVector<f64>) -> Result<LorentzNorm> {
    let q = lorentz_inner(v, v)?;
    Ok(if q > 0.0 {
        LorentzNorm::Spacelike(q.sqrt())
    } else if q < 0.0 {
        LorentzNorm::Timelike((-q).sqrt())
    } else {
        LorentzNorm::Null
    })
}

/// A point on the upper sheet `L^n`, stored in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    ambient: DVector<f64>,
}

impl Point {
    /// Validates `<x,x>_L = -1` and `x_0 >= 1` before wrapping.
    pub fn new(ambient: DVector<f64>) -> Result<Self> {
        Self::with_tol(ambient, &DEFAULT_TOL)
    }

    pub fn with_tol(ambient: DVector<f64>, tol: &Tolerances) -> Result<Self> {
        if ambient.len() < 2 {
            return Err(Error::dim("point needs at least 2 ambient coordinates"));
        }
        if !ambient.iter().all(|x| x.is_finite()) {
            return Err(Error::input("point has non-finite coordinates"));
        }
        let q = inner_unchecked(&ambient, &ambient);
        // The constraint can only be measured down to the roundoff of the
        // quadratic form itself, which grows with the squared coordinates;
        // allow that floor on top of the requested tolerance.
        let floor = 32.0 * f64::EPSILON * (1.0 + ambient.norm_squared());
        if (q + 1.0).abs() > tol.point + floor {
            return Err(Error::input(format!(
                "not on the hyperboloid: <x,x>_L = {q:.3e} != -1"
            )));
        }
        if ambient[0] < 1.0 - tol.point {
            return Err(Error::input(format!(
                "not on the upper sheet: x_0 = {}",
                ambient[0]
            )));
        }
        Ok(Point { ambient })
    }

    /// Wraps coordinates that are known to satisfy the invariants.
    pub(crate) fn from_ambient_unchecked(ambient: DVector<f64>) -> Self {
        debug_assert!(
            (inner_unchecked(&ambient, &ambient) + 1.0).abs() < 1e-6,
            "unchecked point off the hyperboloid"
        );
        Point { ambient }
    }

    /// The base point [1, 0, ..., 0] of `L^n`.
    pub fn origin(n: usize) -> Self {
        let mut v = DVector::zeros(n + 1);
        v[0] = 1.0;
        Point { ambient: v }
    }

    /// Canonical chart: spatial coordinates x~ lift to [sqrt(1+|x~|^2), x~].
    pub fn lift(spatial: &DVector<f64>) -> Result<Self> {
        if !spatial.iter().all(|x| x.is_finite()) {
            return Err(Error::input("lift: non-finite input"));
        }
        let n = spatial.len();
        let mut v = DVector::zeros(n + 1);
        v[0] = (1.0 + spatial.norm_squared()).sqrt();
        for i in 0..n {
            v[i + 1] = spatial[i];
        }
        Ok(Point { ambient: v })
    }

    /// Manifold dimension n (ambient length is n+1).
    pub fn dim(&self) -> usize {
        self.ambient.len() - 1
    }

    pub fn ambient(&self) -> &DVector<f64> {
        &self.ambient
    }

    pub fn into_ambient(self) -> DVector<f64> {
        self.ambient
    }

    /// Spatial part (coordinates 1..=n).
    pub fn spatial(&self) -> DVector<f64> {
        self.ambient.rows(1, self.ambient.len() - 1).into_owned()
    }

    /// Residual of the sheet constraint, `|<x,x>_L + 1|`.
    pub fn constraint_residual(&self) -> f64 {
        (inner_unchecked(&self.ambient, &self.ambient) + 1.0).abs()
    }
}

/// A tangent vector at a base point: `<base, v>_L = 0`, spacelike or zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    components: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, components: DVector<f64>) -> Result<Self> {
        Self::with_tol(base, components, &DEFAULT_TOL)
    }

    pub fn with_tol(base: Point, components: DVector<f64>, tol: &Tolerances) -> Result<Self> {
        if components.len() != base.ambient().len() {
            return Err(Error::dim(format!(
                "tangent length {} vs base length {}",
                components.len(),
                base.ambient().len()
            )));
        }
        let pairing = inner_unchecked(base.ambient(), &components);
        if pairing.abs() > tol.tangent {
            return Err(Error::InvalidTangent(format!(
                "<base,v>_L = {pairing:.3e} != 0"
            )));
        }
        let q = inner_unchecked(&components, &components);
        if q < -tol.tangent {
            return Err(Error::InvalidTangent(format!(
                "tangent is timelike: <v,v>_L = {q:.3e}"
            )));
        }
        Ok(Tangent { base, components })
    }

    pub(crate) fn new_unchecked(base: Point, components: DVector<f64>) -> Self {
        Tangent { base, components }
    }

    pub fn zero(base: Point) -> Self {
        let n = base.ambient().len();
        Tangent {
            base,
            components: DVector::zeros(n),
        }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.components
    }

    /// ‖v‖_L = sqrt(<v,v>_L); clamps tiny negatives from roundoff to 0.
    pub fn norm(&self) -> f64 {
        inner_unchecked(&self.components, &self.components)
            .max(0.0)
            .sqrt()
    }

    pub fn scale(&self, factor: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            components: &self.components * factor,
        }
    }
}

/// Exponential map: `cosh(|v|_L) x + sinh(|v|_L) v / |v|_L`, with
/// `exp_x(0) = x`.
///
/// Evaluated by carrying the tangent to the origin with the boost that maps
/// `x` there, applying the map at the origin, and boosting back. This is the
/// same map — the boost is an isometry — but avoids the catastrophic
/// cancellation the direct formula suffers at base points far from the
/// origin, where `<v,v>_L` is a small difference of huge coordinates.
pub fn exp_map(x: &Point, v: &Tangent) -> Result<Point> {
    if v.base().ambient() != x.ambient() {
        return Err(Error::input("exp_map: tangent is based at a different point"));
    }
    let q = inner_unchecked(v.components(), v.components());
    if q < -DEFAULT_TOL.tangent {
        return Err(Error::InvalidTangent(format!(
            "exp_map: tangent not spacelike (<v,v>_L = {q:.3e})"
        )));
    }
    // Carry to the origin, where the tangent space is {0} x R^n and the
    // Lorentzian norm is the plain Euclidean norm of the spatial part.
    let u = carry_tangent_to_origin(x, v.components());
    let norm = u.norm();
    if norm < config::SMALL_ANGLE {
        return Ok(x.clone());
    }
    let n = x.dim();
    let mut image = DVector::zeros(n + 1);
    image[0] = norm.cosh();
    let scale = norm.sinh() / norm;
    for i in 0..n {
        image[i + 1] = u[i] * scale;
    }
    let ambient = carry_from_origin(x, &image);
    Ok(Point::from_ambient_unchecked(renormalize(ambient)))
}

/// Logarithm map: `(theta / sinh theta) (y - cosh(theta) x)` with
/// `theta = d(x, y)`; returns the zero vector for coincident points.
///
/// Evaluated through the origin like [`exp_map`], for the same numerical
/// reason; there the first coordinate of the carried point *is*
/// `cosh(theta)`, so no cancellation occurs.
pub fn log_map(x: &Point, y: &Point) -> Result<Tangent> {
    if x.dim() != y.dim() {
        return Err(Error::dim("log_map: dimension mismatch"));
    }
    let n = x.dim();
    let carried = carry_point_to_origin(x, y);
    let theta = carried[0].max(1.0).acosh();
    if theta < config::SMALL_ANGLE {
        return Ok(Tangent::zero(x.clone()));
    }
    let scale = theta / theta.sinh();
    let mut at_origin = DVector::zeros(n + 1);
    for i in 0..n {
        at_origin[i + 1] = carried[i + 1] * scale;
    }
    let components = carry_from_origin(x, &at_origin);
    Ok(Tangent::new_unchecked(x.clone(), components))
}

/// Inverse origin boost of `x` applied to a tangent vector at `x`,
/// returning only the spatial part (the time component of a carried
/// tangent is zero by construction).
///
/// Uses the tangency identity `x~ . w~ = x_0 w_0` instead of evaluating
/// that inner product: the dot's rounding at large coordinates would
/// otherwise dominate the result, and the substitution doubles as a
/// projection onto the tangent space.
fn carry_tangent_to_origin(x: &Point, w: &DVector<f64>) -> DVector<f64> {
    let n = x.dim();
    let x0 = x.ambient()[0];
    let gamma = -w[0] / (1.0 + x0);
    let mut out = DVector::zeros(n);
    for i in 0..n {
        out[i] = w[i + 1] + x.ambient()[i + 1] * gamma;
    }
    out
}

/// Inverse origin boost of `x` applied to a point `y`; the first component
/// of the result is `cosh d(x,y)` exactly (in exact arithmetic).
fn carry_point_to_origin(x: &Point, y: &Point) -> DVector<f64> {
    let n = x.dim();
    let x0 = x.ambient()[0];
    let s = spatial_dot(x.ambient().as_slice(), y.ambient().as_slice());
    let mut out = DVector::zeros(n + 1);
    out[0] = x0 * y.ambient()[0] - s;
    let gamma = s / (1.0 + x0) - y.ambient()[0];
    for i in 0..n {
        out[i + 1] = y.ambient()[i + 1] + x.ambient()[i + 1] * gamma;
    }
    out
}

/// Origin boost of `x` applied to an arbitrary ambient vector `u`.
fn carry_from_origin(x: &Point, u: &DVector<f64>) -> DVector<f64> {
    let n = x.dim();
    let x0 = x.ambient()[0];
    let s = spatial_dot(x.ambient().as_slice(), u.as_slice());
    let mut out = DVector::zeros(n + 1);
    out[0] = x0 * u[0] + s;
    let gamma = u[0] + s / (1.0 + x0);
    for i in 0..n {
        out[i + 1] = u[i + 1] + x.ambient()[i + 1] * gamma;
    }
    out
}

/// Geodesic distance `arccosh(-<x,y>_L)`; the argument is clamped to
/// `[1, inf)` before arccosh to absorb roundoff near coincident points.
pub fn geodesic_distance(x: &Point, y: &Point) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::dim("geodesic_distance: dimension mismatch"));
    }
    let arg = (-inner_unchecked(x.ambient(), y.ambient())).max(1.0);
    Ok(arg.acosh())
}

/// First-order geodesic separation of two nearby points: the Lorentzian
/// norm of `b - a` projected onto the tangent space at `a`.
///
/// [`geodesic_distance`] loses half its digits near coincident points (the
/// arccosh argument sits at its branch point); this measure stays accurate
/// down to machine precision and agrees with the distance to second order,
/// so it is the right yardstick for round-trip and invariance checks.
pub fn tangent_gap(a: &Point, b: &Point) -> f64 {
    let delta = b.ambient() - a.ambient();
    let pairing = inner_unchecked(a.ambient(), &delta);
    let tangential = delta + a.ambient() * pairing;
    inner_unchecked(&tangential, &tangential).max(0.0).sqrt()
}

/// Squared Lorentzian distance `-1 - <x,y>_L`, clamped at 0.
pub fn squared_lorentz_distance(x: &Point, y: &Point) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::dim("squared_lorentz_distance: dimension mismatch"));
    }
    Ok((-1.0 - inner_unchecked(x.ambient(), y.ambient())).max(0.0))
}

/// Poincare-disk coordinates `p = x~ / (1 + x_0)`.
pub fn to_poincare(x: &Point) -> DVector<f64> {
    x.spatial() / (1.0 + x.ambient()[0])
}

/// Inverse of [`to_poincare`]; requires `|p| < 1`.
pub fn from_poincare(p: &DVector<f64>) -> Result<Point> {
    let norm_sq = p.norm_squared();
    if norm_sq >= 1.0 {
        return Err(Error::OutOfDisk(norm_sq.sqrt()));
    }
    Point::lift(&(p * (2.0 / (1.0 - norm_sq))))
}

/// Rescale an almost-on-sheet ambient vector back onto the hyperboloid.
pub(crate) fn renormalize(ambient: DVector<f64>) -> DVector<f64> {
    let q = inner_unchecked(&ambient, &ambient);
    if q < 0.0 {
        ambient / (-q).sqrt()
    } else {
        ambient
    }
}

/// Weighted Frechet mean: the minimizer of `sum w_i d(mu, x_i)^2`.
///
/// Fixed-point iteration `mu <- exp_mu(sum w_i log_mu(x_i))`, started at the
/// normalized Lorentzian centroid, stopping when the tangent update magnitude
/// drops below 1e-10 (error carrying the last iterate after 200 iterations).
pub fn frechet_mean(points: &[Point], weights: &[f64]) -> Result<Point> {
    if points.is_empty() {
        return Err(Error::input("frechet_mean: empty point list"));
    }
    if points.len() != weights.len() {
        return Err(Error::dim("frechet_mean: points/weights length mismatch"));
    }
    let n = points[0].dim();
    if points.iter().any(|p| p.dim() != n) {
        return Err(Error::dim("frechet_mean: mixed dimensions"));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::input("frechet_mean: negative weight"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!(
            "frechet_mean: weights sum to {total}, expected 1"
        )));
    }

    // Init: normalized Lorentzian centroid with uniform weights.
    let mut centroid = DVector::zeros(n + 1);
    for p in points {
        centroid += p.ambient();
    }
    let mut mu = Point::from_ambient_unchecked(renormalize(centroid));

    // Returns the fixed-point step, its magnitude, and the weighted mean
    // of d coth(d) over the data — the scale of the objective's Hessian,
    // used to damp the step.
    let step_at = |mu: &Point| -> Result<(DVector<f64>, f64, f64)> {
        let mut step = DVector::zeros(n + 1);
        let mut hessian_scale = 0.0;
        for (p, &w) in points.iter().zip(weights) {
            let log = log_map(mu, p)?;
            let d = log.norm();
            step += log.components() * w;
            hessian_scale += w * if d < 1e-9 { 1.0 } else { d * d.cosh() / d.sinh() };
        }
        let residual = Tangent::new_unchecked(mu.clone(), step.clone()).norm();
        Ok((step, residual, hessian_scale))
    };

    // The unit-step update overshoots for widely spread data (the
    // objective's Hessian eigenvalues reach d coth d per point), so the
    // step is damped by the Hessian scale, with residual-decrease
    // backtracking as a safety net; the objective is geodesically convex.
    let (mut step, mut residual, mut hessian_scale) = step_at(&mu)?;
    for _ in 0..config::FRECHET_MAX_ITERS {
        if residual < config::FRECHET_TOL {
            return Ok(mu);
        }
        let mut tau = (2.0 / (1.0 + hessian_scale)).min(1.0);
        let mut accepted = false;
        for _ in 0..60 {
            let update = Tangent::new_unchecked(mu.clone(), &step * tau);
            let trial = exp_map(&mu, &update)?;
            let (trial_step, trial_residual, trial_scale) = step_at(&trial)?;
            if trial_residual < residual {
                mu = trial;
                step = trial_step;
                residual = trial_residual;
                hessian_scale = trial_scale;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if residual < config::FRECHET_TOL {
        return Ok(mu);
    }
    Err(Error::NoConvergence {
        iterations: config::FRECHET_MAX_ITERS,
        residual,
        last: mu.ambient().iter().copied().collect(),
    })
}

/// Convenience: uniform-weight Frechet mean.
pub fn frechet_mean_uniform(points: &[Point]) -> Result<Point> {
    let w = vec![1.0 / points.len() as f64; points.len()];
    frechet_mean(points, &w)
}

/// Draw from the wrapped normal distribution on `L^n`.
///
/// A tangent vector at the origin is sampled as `[0, N(0, sigma^2 I_n)]`,
/// carried to `mean` by the boost mapping origin to mean, and pushed through
/// the exponential map. Deterministic for a fixed seed.
pub fn sample_wrapped_normal(mean: &Point, sigma: f64, count: usize, seed: u64) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_wrapped_normal_rng(mean, sigma, count, &mut rng)
}

/// [`sample_wrapped_normal`] with a caller-provided generator.
pub fn sample_wrapped_normal_rng<R: Rng>(
    mean: &Point,
    sigma: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if sigma <= 0.0 {
        return Err(Error::input(format!("sigma must be positive, got {sigma}")));
    }
    let n = mean.dim();
    let boost = group::origin_boost(mean);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = DVector::zeros(n + 1);
        for i in 1..=n {
            v[i] = sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let transported = boost.matrix() * v;
        let tangent = Tangent::new_unchecked(mean.clone(), transported);
        out.push(exp_map(mean, &tangent)?);
    }
    Ok(out)
}

/// Random point in `L^n` at geodesic distance < `radius` from the origin.
pub fn random_point<R: Rng>(n: usize, radius: f64, rng: &mut R) -> Point {
    let origin = Point::origin(n);
    let mut v = DVector::zeros(n + 1);
    for i in 1..=n {
        v[i] = rng.sample::<f64, _>(StandardNormal);
    }
    let norm = v.norm();
    if norm < 1e-12 {
        return origin;
    }
    let target = rng.gen_range(0.0..radius);
    let tangent = Tangent::new_unchecked(origin.clone(), v * (target / norm));
    exp_map(&origin, &tangent).expect("scaled spacelike tangent")
}

/// Random tangent vector at `x` with Lorentzian norm < `radius`.
pub fn random_tangent<R: Rng>(x: &Point, radius: f64, rng: &mut R) -> Tangent {
    let n = x.dim();
    let mut raw = DVector::zeros(n + 1);
    for i in 0..=n {
        raw[i] = rng.sample::<f64, _>(StandardNormal);
    }
    // Project onto the tangent space at x: u + <x,u>_L x.
    let pairing = inner_unchecked(x.ambient(), &raw);
    let mut comp = raw + x.ambient() * pairing;
    let norm = inner_unchecked(&comp, &comp).max(0.0).sqrt();
    if norm > 1e-12 {
        comp *= rng.gen_range(0.0..radius) / norm;
    }
    Tangent::new_unchecked(x.clone(), comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn pt(coords: &[f64]) -> Point {
        Point::new(DVector::from_row_slice(coords)).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let a = dvector![1.0, 0.0, 0.0];
        let b = dvector![0.0, 1.0, 0.0];
        assert_relative_eq!(lorentz_inner(&a, &a).unwrap(), -1.0);
        assert_relative_eq!(lorentz_inner(&a, &b).unwrap(), 0.0);
        let c = dvector![1.0_f64.cosh(), 1.0_f64.sinh(), 0.0];
        assert_relative_eq!(lorentz_inner(&c, &a).unwrap(), -(1.0_f64.cosh()));
        // Symmetry.
        assert_relative_eq!(
            lorentz_inner(&b, &c).unwrap(),
            lorentz_inner(&c, &b).unwrap()
        );
    }

    #[test]
    fn inner_product_length_mismatch() {
        let a = dvector![1.0, 0.0];
        let b = dvector![1.0, 0.0, 0.0];
        assert!(matches!(lorentz_inner(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(
            lorentz_norm(&dvector![0.0, 3.0, 4.0]).unwrap(),
            LorentzNorm::Spacelike(5.0)
        );
        let timelike = lorentz_norm(&dvector![1.0, 0.0, 0.0]).unwrap();
        assert!(timelike.is_timelike());
        assert_relative_eq!(timelike.magnitude(), 1.0);
        assert_eq!(
            lorentz_norm(&dvector![1.0, 1.0, 0.0]).unwrap(),
            LorentzNorm::Null
        );
    }

    #[test]
    fn lift_examples() {
        let o = Point::lift(&dvector![0.0, 0.0]).unwrap();
        assert_eq!(o.ambient(), &dvector![1.0, 0.0, 0.0]);

        let p = Point::lift(&dvector![1.0_f64.sinh(), 0.0]).unwrap();
        assert_relative_eq!(p.ambient()[0], 1.0_f64.cosh(), epsilon = 1e-15);

        let q = Point::lift(&dvector![3.0, 4.0]).unwrap();
        assert_relative_eq!(q.ambient()[0], 26.0_f64.sqrt(), epsilon = 1e-15);
        assert!(q.constraint_residual() < 1e-12);

        assert!(Point::lift(&dvector![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn point_validation_rejects_off_sheet() {
        assert!(Point::new(dvector![1.0, 1.0, 0.0]).is_err());
        assert!(Point::new(dvector![-1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn exp_map_examples() {
        let x = Point::origin(2);
        let t = 0.7_f64;
        let v = Tangent::new(x.clone(), dvector![0.0, t, 0.0]).unwrap();
        let y = exp_map(&x, &v).unwrap();
        assert_relative_eq!(y.ambient()[0], t.cosh(), epsilon = 1e-12);
        assert_relative_eq!(y.ambient()[1], t.sinh(), epsilon = 1e-12);

        // Zero vector fixes the point.
        let z = exp_map(&x, &Tangent::zero(x.clone())).unwrap();
        assert_eq!(z.ambient(), x.ambient());

        // Unit-speed direction [0, 0.6, 0.8].
        let u = Tangent::new(x.clone(), dvector![0.0, 0.6, 0.8]).unwrap();
        let w = exp_map(&x, &u).unwrap();
        assert_relative_eq!(w.ambient()[0], 1.0_f64.cosh(), epsilon = 1e-12);
        assert_relative_eq!(w.ambient()[1], 0.6 * 1.0_f64.sinh(), epsilon = 1e-12);
        assert_relative_eq!(w.ambient()[2], 0.8 * 1.0_f64.sinh(), epsilon = 1e-12);
    }

    #[test]
    fn exp_map_rejects_timelike_tangent() {
        let x = pt(&[2.0_f64.cosh(), 2.0_f64.sinh(), 0.0]);
        // A timelike vector orthogonal to nothing in particular; bypass the
        // Tangent constructor to hit exp_map's own guard.
        let bad = Tangent::new_unchecked(x.clone(), dvector![1.0, 0.0, 0.0]);
        assert!(matches!(exp_map(&x, &bad), Err(Error::InvalidTangent(_))));
    }

    #[test]
    fn log_map_examples() {
        let x = Point::origin(2);
        let y = pt(&[1.0_f64.cosh(), 1.0_f64.sinh(), 0.0]);
        let v = log_map(&x, &y).unwrap();
        assert_relative_eq!(v.components()[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(v.components()[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.components()[2], 0.0, epsilon = 1e-12);

        let zero = log_map(&x, &x).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn exp_log_round_trip_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let x = random_point(3, 4.0, &mut rng);
            let y = random_point(3, 4.0, &mut rng);
            let v = log_map(&x, &y).unwrap();
            let back = exp_map(&x, &v).unwrap();
            let err = tangent_gap(&y, &back);
            assert!(err < 1e-8, "exp(log) round trip error {err}");
            // Other composition order, compared as tangent vectors.
            let w = random_tangent(&x, 4.0, &mut rng);
            let v2 = log_map(&x, &exp_map(&x, &w).unwrap()).unwrap();
            let terr = (v2.components() - w.components()).norm();
            assert!(terr < 1e-8, "log(exp) round trip error {terr}");
            // log output orthogonal to base.
            let pairing = inner_unchecked(x.ambient(), v.components()).abs();
            assert!(pairing < 1e-9, "log not orthogonal: {pairing}");
        }
    }

    #[test]
    fn distance_examples_and_symmetry() {
        let x = Point::origin(2);
        assert_eq!(geodesic_distance(&x, &x).unwrap(), 0.0);
        let alpha = 1.3_f64;
        let y = pt(&[alpha.cosh(), alpha.sinh(), 0.0]);
        assert_relative_eq!(geodesic_distance(&x, &y).unwrap(), alpha, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = random_point(2, 5.0, &mut rng);
            let b = random_point(2, 5.0, &mut rng);
            let dab = geodesic_distance(&a, &b).unwrap();
            let dba = geodesic_distance(&b, &a).unwrap();
            assert_relative_eq!(dab, dba, epsilon = 1e-8);
        }
    }

    #[test]
    fn squared_lorentz_distance_examples() {
        let x = Point::origin(2);
        assert_eq!(squared_lorentz_distance(&x, &x).unwrap(), 0.0);
        let t = 0.9_f64;
        let y = pt(&[t.cosh(), t.sinh(), 0.0]);
        assert_relative_eq!(
            squared_lorentz_distance(&x, &y).unwrap(),
            t.cosh() - 1.0,
            epsilon = 1e-12
        );

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = random_point(2, 5.0, &mut rng);
            let b = random_point(2, 5.0, &mut rng);
            assert!(squared_lorentz_distance(&a, &b).unwrap() >= 0.0);
        }
    }

    #[test]
    fn triangle_inequality_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let a = random_point(3, 5.0, &mut rng);
            let b = random_point(3, 5.0, &mut rng);
            let c = random_point(3, 5.0, &mut rng);
            let ab = geodesic_distance(&a, &b).unwrap();
            let bc = geodesic_distance(&b, &c).unwrap();
            let ac = geodesic_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-8);
        }
    }

    #[test]
    fn poincare_examples_and_round_trip() {
        let o = Point::origin(2);
        let p = to_poincare(&o);
        assert_eq!(p, dvector![0.0, 0.0]);

        let t = 1.1_f64;
        let x = pt(&[t.cosh(), t.sinh(), 0.0]);
        let px = to_poincare(&x);
        assert_relative_eq!(px[0], (t / 2.0).tanh(), epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_point(2, 6.0, &mut rng);
            let back = from_poincare(&to_poincare(&a)).unwrap();
            assert!((back.ambient() - a.ambient()).norm() < 1e-10);
        }

        assert!(matches!(
            from_poincare(&dvector![0.8, 0.7]),
            Err(Error::OutOfDisk(_))
        ));
    }

    #[test]
    fn frechet_mean_examples() {
        let x = pt(&[0.5_f64.cosh(), 0.5_f64.sinh(), 0.0]);
        let m = frechet_mean(&[x.clone()], &[1.0]).unwrap();
        assert!((m.ambient() - x.ambient()).norm() < 1e-9);

        let t = 0.8_f64;
        let a = pt(&[t.cosh(), t.sinh(), 0.0]);
        let b = pt(&[t.cosh(), -t.sinh(), 0.0]);
        let mid = frechet_mean(&[a, b], &[0.5, 0.5]).unwrap();
        assert!((mid.ambient() - Point::origin(2).ambient()).norm() < 1e-9);
    }

    #[test]
    fn frechet_mean_weight_validation() {
        let x = Point::origin(2);
        assert!(frechet_mean(&[x.clone()], &[0.5]).is_err());
        assert!(frechet_mean(&[x.clone(), x.clone()], &[1.5, -0.5]).is_err());
        assert!(frechet_mean(&[], &[]).is_err());
    }

    #[test]
    fn frechet_mean_isometry_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let points: Vec<Point> = (0..5).map(|_| random_point(2, 2.0, &mut rng)).collect();
        let w = vec![0.2; 5];
        let mean = frechet_mean(&points, &w).unwrap();

        let a = group::random_lorentz_rng(2, &mut rng);
        let moved: Vec<Point> = points.iter().map(|p| a.apply(p).unwrap()).collect();
        let moved_mean = frechet_mean(&moved, &w).unwrap();
        let back = a.inverse().apply(&moved_mean).unwrap();
        assert!(geodesic_distance(&mean, &back).unwrap() < 1e-6);
    }

    #[test]
    fn wrapped_normal_behaviour() {
        // sigma -> 0 limit concentrates at the mean.
        let mean = pt(&[0.6_f64.cosh(), 0.6_f64.sinh(), 0.0]);
        let tight = sample_wrapped_normal(&mean, 1e-8, 100, 5).unwrap();
        for s in &tight {
            assert!(geodesic_distance(s, &mean).unwrap() < 1e-6);
        }

        // Empirical Frechet mean of 10^4 origin-centered samples stays near the origin.
        let origin = Point::origin(2);
        let samples = sample_wrapped_normal(&origin, 0.5, 10_000, 9).unwrap();
        let emp = frechet_mean_uniform(&samples).unwrap();
        assert!(geodesic_distance(&emp, &origin).unwrap() < 0.05);

        // Mean distance from the mean matches the chi-distribution moment.
        let sigma = 0.2;
        let samples = sample_wrapped_normal(&mean, sigma, 10_000, 17).unwrap();
        let avg: f64 = samples
            .iter()
            .map(|s| geodesic_distance(s, &mean).unwrap())
            .sum::<f64>()
            / samples.len() as f64;
        let expected = sigma * (std::f64::consts::PI / 2.0).sqrt(); // E chi_2
        assert!(
            (avg - expected).abs() / expected < 0.05,
            "avg {avg} vs expected {expected}"
        );

        // Determinism under a fixed seed.
        let a = sample_wrapped_normal(&mean, 0.3, 5, 123).unwrap();
        let b = sample_wrapped_normal(&mean, 0.3, 5, 123).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.ambient(), q.ambient());
        }

        assert!(sample_wrapped_normal(&mean, -1.0, 3, 1).is_err());
    }
}
