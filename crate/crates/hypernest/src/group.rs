//! The positive special Lorentz group SO+(1,n).
//!
//! Matrices `A` with `A J A^T = A^T J A = J`, `det A = 1`, and positive
//! (0,0) entry — the orientation- and sheet-preserving isometries of the
//! hyperboloid. Provides boosts, embedded rotations, the Lorentzian
//! Gram-Schmidt orthonormalization, random elements, and the boost/rotation
//! factorizations used throughout the crate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{Tolerances, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::lorentz::{inner_unchecked, MinkowskiForm, Point};

/// Below this magnitude of the boost angle, a decomposition treats the
/// matrix as a pure rotation.
const AXIS_ANGLE_EPS: f64 = 1e-10;

/// An element of SO+(1,n), stored as its (n+1)x(n+1) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzMatrix {
    entries: DMatrix<f64>,
}

impl LorentzMatrix {
    /// Validates the group invariants before wrapping.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(entries, &DEFAULT_TOL)
    }

    pub fn with_tol(entries: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() < 2 {
            return Err(Error::dim(format!(
                "Lorentz matrix must be square of size >= 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let dev = group_residual(&entries);
        if dev > tol.group {
            return Err(Error::InvalidLorentz(format!(
                "metric deviation {dev:.3e} exceeds {:.1e}",
                tol.group
            )));
        }
        if entries[(0, 0)] <= 0.0 {
            return Err(Error::InvalidLorentz(format!(
                "first entry {} not positive",
                entries[(0, 0)]
            )));
        }
        let det = entries.determinant();
        if (det - 1.0).abs() > tol.det {
            return Err(Error::InvalidLorentz(format!("det = {det}, expected 1")));
        }
        Ok(LorentzMatrix { entries })
    }

    /// Wraps a matrix produced by a construction that is exact up to
    /// roundoff (which scales with the squared matrix norm).
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<f64>) -> Self {
        debug_assert!(group_residual(&entries) < 1e-6 * (1.0 + entries.norm_squared()));
        LorentzMatrix { entries }
    }

    pub fn identity(n: usize) -> Self {
        LorentzMatrix {
            entries: DMatrix::identity(n + 1, n + 1),
        }
    }

    /// Manifold dimension n acted on (matrix is (n+1)x(n+1)).
    pub fn dim(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// Group inverse `J A^T J` — no linear solve needed.
    pub fn inverse(&self) -> LorentzMatrix {
        let n = self.dim();
        let j = MinkowskiForm::new(n).matrix();
        LorentzMatrix {
            entries: &j * self.entries.transpose() * &j,
        }
    }

    pub fn compose(&self, other: &LorentzMatrix) -> Result<LorentzMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::dim("compose: size mismatch"));
        }
        Ok(LorentzMatrix {
            entries: &self.entries * &other.entries,
        })
    }

    /// Apply to a hyperboloid point; the image is renormalized onto the
    /// sheet to absorb roundoff.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        if x.dim() != self.dim() {
            return Err(Error::dim(format!(
                "apply: matrix acts on L^{}, point lies in L^{}",
                self.dim(),
                x.dim()
            )));
        }
        let image = &self.entries * x.ambient();
        Ok(Point::from_ambient_unchecked(crate::lorentz::renormalize(
            image,
        )))
    }

    /// Max-entry residual of the two metric conditions plus determinant drift.
    pub fn invariant_residual(&self) -> f64 {
        group_residual(&self.entries).max((self.entries.determinant() - 1.0).abs())
    }
}

/// max(|A J A^T - J|, |A^T J A - J|) entrywise.
fn group_residual(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows() - 1;
    let j = MinkowskiForm::new(n).matrix();
    let left = a * &j * a.transpose() - &j;
    let right = a.transpose() * &j * a - &j;
    left.amax().max(right.amax())
}

/// Lorentz boost along the first coordinate axis:
/// `[[cosh a, sinh a, 0], [sinh a, cosh a, 0], [0, 0, I]]`.
pub fn boost_along_first_axis(alpha: f64, n: usize) -> LorentzMatrix {
    assert!(n >= 1, "boost needs n >= 1");
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(0, 0)] = alpha.cosh();
    m[(0, 1)] = alpha.sinh();
    m[(1, 0)] = alpha.sinh();
    m[(1, 1)] = alpha.cosh();
    LorentzMatrix::from_matrix_unchecked(m)
}

/// Derivative of [`boost_along_first_axis`] with respect to the angle.
pub(crate) fn boost_derivative(alpha: f64, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = alpha.sinh();
    m[(0, 1)] = alpha.cosh();
    m[(1, 0)] = alpha.cosh();
    m[(1, 1)] = alpha.sinh();
    m
}

/// Validate that `r` is in SO(k) within the given tolerances.
pub fn check_rotation(r: &DMatrix<f64>, tol: &Tolerances) -> Result<()> {
    if r.nrows() != r.ncols() {
        return Err(Error::InvalidRotation(format!(
            "not square: {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let dev = (r * r.transpose() - DMatrix::identity(r.nrows(), r.nrows())).amax();
    if dev > tol.ortho {
        return Err(Error::InvalidRotation(format!(
            "R R^T - I deviation {dev:.3e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol.det {
        return Err(Error::InvalidRotation(format!("det = {det}, expected 1")));
    }
    Ok(())
}

/// Lorentz rotation diag(1, R): fixes the origin point.
pub fn rotation_embed(r: &DMatrix<f64>) -> Result<LorentzMatrix> {
    check_rotation(r, &DEFAULT_TOL)?;
    Ok(rotation_embed_unchecked(r))
}

pub(crate) fn rotation_embed_unchecked(r: &DMatrix<f64>) -> LorentzMatrix {
    let n = r.nrows();
    let mut m = DMatrix::identity(n + 1, n + 1);
    m.view_mut((1, 1), (n, n)).copy_from(r);
    LorentzMatrix::from_matrix_unchecked(m)
}

/// The symmetric pure boost carrying the origin to `mu`:
/// `[[c, v^T], [v, I + v v^T / (1 + c)]]` with `v` the spatial part of `mu`
/// and `c = mu_0` (the spatial block equals `sqrt(I + v v^T)`).
pub fn origin_boost(mu: &Point) -> LorentzMatrix {
    let n = mu.dim();
    let c = mu.ambient()[0];
    let v = mu.spatial();
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(0, 0)] = c;
    for i in 0..n {
        m[(0, i + 1)] = v[i];
        m[(i + 1, 0)] = v[i];
    }
    let outer = &v * v.transpose() / (1.0 + c);
    for i in 0..n {
        for k in 0..n {
            m[(i + 1, k + 1)] += outer[(i, k)];
        }
    }
    LorentzMatrix::from_matrix_unchecked(m)
}

/// Gram-Schmidt adapted to the Lorentzian form.
///
/// Orthonormalizes the columns of `m` so that `<e_0,e_0>_L = -1`,
/// `<e_i,e_i>_L = +1` for `i >= 1`, and mixed products vanish, using
/// `w_k = c_k - sum_{j<k} eps_j <c_k, e_j>_L e_j` with `eps_0 = -1`,
/// `eps_j = +1`. Column 0 must be timelike with positive first entry; the
/// last column's sign is flipped if needed so the result has determinant +1.
pub fn adapted_gram_schmidt(m: &DMatrix<f64>) -> Result<LorentzMatrix> {
    if m.nrows() != m.ncols() || m.nrows() < 2 {
        return Err(Error::dim(format!(
            "adapted_gram_schmidt: expected square matrix of size >= 2, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let size = m.nrows();
    let cols: Vec<DVector<f64>> = (0..size).map(|k| m.column(k).into_owned()).collect();
    let basis = lorentz_orthonormalize(&cols, size)?;

    let mut out = DMatrix::zeros(size, size);
    for (k, e) in basis.iter().enumerate() {
        out.set_column(k, e);
    }
    if out.determinant() < 0.0 {
        // Restore orientation without touching the timelike column.
        let last = size - 1;
        let flipped = -out.column(last);
        out.set_column(last, &flipped);
    }
    LorentzMatrix::new(out)
}

/// Core of [`adapted_gram_schmidt`]: produce `count` orthonormal columns from
/// the given (possibly longer) candidate list, skipping near-degenerate
/// candidates only when extras are available.
pub(crate) fn lorentz_orthonormalize(
    candidates: &[DVector<f64>],
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    let strict = candidates.len() == count;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(count);
    for (k, c) in candidates.iter().enumerate() {
        if basis.len() == count {
            break;
        }
        let mut w = c.clone();
        for (j, e) in basis.iter().enumerate() {
            let eps = if j == 0 { -1.0 } else { 1.0 };
            let coef = eps * inner_unchecked(c, e);
            w -= e * coef;
        }
        let q = inner_unchecked(&w, &w);
        if basis.is_empty() {
            // Timelike with positive first entry required.
            if q >= -1e-12 {
                return Err(Error::Degenerate {
                    column: k,
                    message: format!("column 0 not timelike (<c,c>_L = {q:.3e})"),
                });
            }
            if w[0] <= 0.0 {
                return Err(Error::Degenerate {
                    column: k,
                    message: "column 0 has nonpositive first entry".into(),
                });
            }
            basis.push(&w / (-q).sqrt());
        } else {
            if q < 1e-12 {
                if strict {
                    return Err(Error::Degenerate {
                        column: k,
                        message: format!("residual not spacelike (<w,w>_L = {q:.3e})"),
                    });
                }
                continue; // dependent candidate; try the next one
            }
            basis.push(&w / q.sqrt());
        }
    }
    if basis.len() < count {
        return Err(Error::Degenerate {
            column: candidates.len(),
            message: format!("ran out of candidates at {} of {count}", basis.len()),
        });
    }
    Ok(basis)
}

/// Complete the given Lorentz-orthonormal prefix (first column timelike) to a
/// full element of SO+(1,n), filling with identity columns.
pub fn complete_lorentz_frame(prefix: &[DVector<f64>]) -> Result<LorentzMatrix> {
    if prefix.is_empty() {
        return Err(Error::input("complete_lorentz_frame: empty prefix"));
    }
    let size = prefix[0].len();
    let mut candidates = prefix.to_vec();
    for i in 0..size {
        let mut e = DVector::zeros(size);
        e[i] = 1.0;
        candidates.push(e);
    }
    let basis = lorentz_orthonormalize(&candidates, size)?;
    let mut out = DMatrix::zeros(size, size);
    for (k, e) in basis.iter().enumerate() {
        out.set_column(k, e);
    }
    if out.determinant() < 0.0 {
        let last = size - 1;
        let flipped = -out.column(last);
        out.set_column(last, &flipped);
    }
    LorentzMatrix::new(out)
}

/// Haar-ish random rotation: QR of a Gaussian matrix with sign fixing and
/// determinant repair.
pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::identity(0, 0);
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let flipped = -q.column(j);
            q.set_column(j, &flipped);
        }
    }
    if q.determinant() < 0.0 {
        let last = n - 1;
        let flipped = -q.column(last);
        q.set_column(last, &flipped);
    }
    q
}

/// Random element of SO+(1,n): `diag(1,P) . boost(alpha) . diag(1,Q^T)` with
/// Haar-ish rotations `P`, `Q` and `alpha ~ N(0,1)`. Deterministic per seed.
pub fn random_lorentz(n: usize, seed: u64) -> LorentzMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_lorentz_rng(n, &mut rng)
}

pub fn random_lorentz_rng<R: Rng>(n: usize, rng: &mut R) -> LorentzMatrix {
    assert!(n >= 1);
    let p = random_rotation(n, rng);
    let q = random_rotation(n, rng);
    let alpha: f64 = rng.sample(StandardNormal);
    AxisDecomposition {
        p,
        alpha,
        q,
    }
    .recompose()
}

/// The rotation-boost-rotation factorization `A = diag(1,P) B(alpha) diag(1,Q^T)`.
#[derive(Debug, Clone)]
pub struct AxisDecomposition {
    pub p: DMatrix<f64>,
    pub alpha: f64,
    pub q: DMatrix<f64>,
}

impl AxisDecomposition {
    pub fn recompose(&self) -> LorentzMatrix {
        let n = self.p.nrows();
        let left = rotation_embed_unchecked(&self.p);
        let boost = boost_along_first_axis(self.alpha, n);
        let right = rotation_embed_unchecked(&self.q.transpose());
        LorentzMatrix::from_matrix_unchecked(
            left.matrix() * boost.matrix() * right.matrix(),
        )
    }
}

/// Factor `A` as `diag(1,P) . boost(alpha) . diag(1,Q^T)` with `alpha >= 0`.
///
/// `cosh(alpha)` is read off the (0,0) entry; the boost axis images are the
/// first row and column. For `n = 1` the rotation factors are trivial and a
/// negative boost cannot be absorbed, so `alpha` keeps its sign there.
pub fn axis_decompose(a: &LorentzMatrix) -> Result<AxisDecomposition> {
    let n = a.dim();
    let m = a.matrix();
    let alpha = m[(0, 0)].max(1.0).acosh();

    if n == 1 {
        // SO(1) is trivial; the boost angle is signed.
        return Ok(AxisDecomposition {
            p: DMatrix::identity(1, 1),
            alpha: m[(1, 0)].asinh(),
            q: DMatrix::identity(1, 1),
        });
    }

    if alpha < AXIS_ANGLE_EPS {
        // Pure rotation: lower-right block is P Q^T; take Q = I.
        let block = m.view((1, 1), (n, n)).into_owned();
        return Ok(AxisDecomposition {
            p: block,
            alpha: 0.0,
            q: DMatrix::identity(n, n),
        });
    }

    let sinh_alpha = alpha.sinh();
    // First row of A is [cosh a, sinh a * (Q e_1)^T].
    let mut q1 = DVector::zeros(n);
    for i in 0..n {
        q1[i] = m[(0, i + 1)] / sinh_alpha;
    }
    let q1 = &q1 / q1.norm();
    let q = complete_rotation_with_first_column(&q1);

    // Strip the right rotation and the boost; what is left is diag(1, P).
    let right = rotation_embed_unchecked(&q);
    let unboosted = m * right.matrix() * boost_along_first_axis(-alpha, n).matrix();
    let p = unboosted.view((1, 1), (n, n)).into_owned();
    check_rotation(&p, &Tolerances {
        ortho: 1e-6,
        det: 1e-6,
        ..DEFAULT_TOL
    })
    .map_err(|e| Error::InvalidLorentz(format!("axis_decompose residual: {e}")))?;

    Ok(AxisDecomposition { p, alpha, q })
}

/// A rotation whose first column is the given unit vector (n >= 2).
fn complete_rotation_with_first_column(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    let w = u - &e1;
    let mut q = if w.norm() < 1e-12 {
        DMatrix::identity(n, n)
    } else {
        // Householder reflection sending e1 to u (determinant -1).
        DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / w.norm_squared())
    };
    if q.determinant() < 0.0 {
        let last = n - 1;
        let flipped = -q.column(last);
        q.set_column(last, &flipped);
    }
    q
}

/// Polar factorization `A = diag(1,R) . B` with `B` the symmetric pure boost
/// whose first row matches A's. Returns `(rotation, boost)`.
pub fn polar_decompose(a: &LorentzMatrix) -> Result<(LorentzMatrix, LorentzMatrix)> {
    let m = a.matrix();
    let n = a.dim();
    // [A_{00}, first row spatial] is a hyperboloid point; its origin boost is
    // the unique symmetric factor with rotation on the left.
    let mut mu = DVector::zeros(n + 1);
    mu[0] = m[(0, 0)];
    for i in 0..n {
        mu[i + 1] = m[(0, i + 1)];
    }
    let mu = Point::new(crate::lorentz::renormalize(mu))?;
    let boost = origin_boost(&mu);
    let rotation = LorentzMatrix::from_matrix_unchecked(m * boost.inverse().matrix());
    Ok((rotation, boost))
}
