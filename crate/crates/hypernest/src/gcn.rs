//! Nested hyperbolic graph convolutional network.
//!
//! Per layer, node features living on a hyperboloid are pushed through a
//! constrained linear map `y = W x / |W x|_L` with `W J_n W^T = J_m`,
//! aggregated as the closed-form weighted centroid under the squared
//! Lorentzian distance, and passed through a tangent ReLU at the origin.
//! `W` is never optimized directly: it is assembled from a Stiefel frame,
//! a boost angle, and a rotation, so every optimizer iterate satisfies the
//! constraint exactly.
//!
//! Decoders are a Fermi-Dirac head on squared Lorentzian distances for link
//! prediction and an affine head on origin-tangent coordinates for node
//! classification. Training is full-batch block-coordinate descent with
//! analytic gradients (hand-written reverse mode, checked against central
//! differences).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::group::{boost_along_first_axis, boost_derivative, random_rotation};
use crate::lorentz::{inner_unchecked, Point};
use crate::opt::{self, Param};

const TINY_NORM: f64 = 1e-12;

// ---- Layer parameters ----------------------------------------------------

/// Factors of one constrained layer map `W = diag(1,P~) B(alpha) diag(1,Q^T)`.
#[derive(Debug, Clone)]
pub struct LayerParams {
    p_tilde: DMatrix<f64>, // m x n, orthonormal rows
    alpha: f64,
    q: DMatrix<f64>, // n x n rotation
}

impl LayerParams {
    pub fn new(p_tilde: DMatrix<f64>, alpha: f64, q: DMatrix<f64>) -> Result<Self> {
        let (m, n) = p_tilde.shape();
        if m > n || q.shape() != (n, n) {
            return Err(Error::dim(format!(
                "layer expects P~ of shape m x n (m <= n) and Q of n x n, got {m}x{n} and {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        Param::Stiefel(p_tilde.clone()).validate(&DEFAULT_TOL)?;
        crate::group::check_rotation(&q, &DEFAULT_TOL)?;
        if !alpha.is_finite() {
            return Err(Error::input("layer boost angle must be finite"));
        }
        Ok(LayerParams { p_tilde, alpha, q })
    }

    /// Random layer: P~ = leading rows of a random rotation, alpha = 0,
    /// Q random.
    pub fn random<R: Rng>(m: usize, n: usize, rng: &mut R) -> Self {
        let full = random_rotation(n, rng);
        LayerParams {
            p_tilde: full.rows(0, m).into_owned(),
            alpha: 0.0,
            q: random_rotation(n, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.p_tilde.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.p_tilde.nrows()
    }

    pub fn p_tilde(&self) -> &DMatrix<f64> {
        &self.p_tilde
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// The assembled `(m+1) x (n+1)` transform.
    pub fn weight(&self) -> DMatrix<f64> {
        assemble_weight(&self.p_tilde, self.alpha, &self.q)
    }

    /// Max-entry residual of `W J_n W^T - J_m`.
    pub fn constraint_residual(&self) -> f64 {
        let w = self.weight();
        let n = self.input_dim();
        let m = self.output_dim();
        let mut jn = DMatrix::identity(n + 1, n + 1);
        jn[(0, 0)] = -1.0;
        let mut jm = DMatrix::identity(m + 1, m + 1);
        jm[(0, 0)] = -1.0;
        (&w * jn * w.transpose() - jm).amax()
    }
}

pub(crate) fn assemble_weight(p_tilde: &DMatrix<f64>, alpha: f64, q: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = p_tilde.shape();
    let mut e = DMatrix::zeros(m + 1, n + 1);
    e[(0, 0)] = 1.0;
    e.view_mut((1, 1), (m, n)).copy_from(p_tilde);
    let b = boost_along_first_axis(alpha, n);
    let mut f = DMatrix::identity(n + 1, n + 1);
    f.view_mut((1, 1), (n, n)).copy_from(&q.transpose());
    e * b.matrix() * f
}

// ---- Graph container -----------------------------------------------------

/// Which split a node or edge sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Positive and sampled negative edges per split.
#[derive(Debug, Clone, Default)]
pub struct EdgeSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// A graph with features, optional labels, and train/val/test masks.
#[derive(Debug, Clone)]
pub struct GraphData {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    node_split: Vec<Split>,
    edge_split: EdgeSplit,
}

impl GraphData {
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: DMatrix<f64>,
        labels: Option<Vec<usize>>,
        node_split: Vec<Split>,
        edge_split: EdgeSplit,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(Error::dim(format!(
                "feature matrix has {} rows for {num_nodes} nodes",
                features.nrows()
            )));
        }
        if node_split.len() != num_nodes {
            return Err(Error::dim("node split mask length mismatch"));
        }
        if let Some(l) = &labels {
            if l.len() != num_nodes {
                return Err(Error::dim("label vector length mismatch"));
            }
        }
        let in_range = |&(u, v): &(usize, usize)| u < num_nodes && v < num_nodes && u != v;
        if !edges.iter().all(in_range) {
            return Err(Error::input("edge endpoint out of range"));
        }
        for list in [
            &edge_split.train_pos,
            &edge_split.val_pos,
            &edge_split.test_pos,
            &edge_split.train_neg,
            &edge_split.val_neg,
            &edge_split.test_neg,
        ] {
            if !list.iter().all(in_range) {
                return Err(Error::input("edge-sample endpoint out of range"));
            }
        }
        Ok(GraphData {
            num_nodes,
            edges,
            features,
            labels,
            node_split,
            edge_split,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn node_split(&self) -> &[Split] {
        &self.node_split
    }

    pub fn edge_split(&self) -> &EdgeSplit {
        &self.edge_split
    }

    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes)
            .filter(|&i| self.node_split[i] == split)
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Neighbor lists with aggregation weights (self-loop included).
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    lists: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

impl Neighborhoods {
    /// Uniform weights `1/(deg+1)` over the neighborhood plus self-loop.
    pub fn uniform(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut lists: Vec<Vec<usize>> = (0..num_nodes).map(|i| vec![i]).collect();
        for &(u, v) in edges {
            lists[u].push(v);
            lists[v].push(u);
        }
        let weights = lists
            .iter()
            .map(|l| vec![1.0 / l.len() as f64; l.len()])
            .collect();
        Neighborhoods { lists, weights }
    }

    /// Self-loop weight `self_weight`, remainder split uniformly over
    /// the neighbors (isolated nodes keep weight 1 on themselves).
    pub fn self_biased(num_nodes: usize, edges: &[(usize, usize)], self_weight: f64) -> Self {
        let mut lists: Vec<Vec<usize>> = (0..num_nodes).map(|i| vec![i]).collect();
        for &(u, v) in edges {
            lists[u].push(v);
            lists[v].push(u);
        }
        let weights = lists
            .iter()
            .map(|l| {
                let deg = l.len() - 1;
                if deg == 0 {
                    vec![1.0]
                } else {
                    let mut w = vec![(1.0 - self_weight) / deg as f64; l.len()];
                    w[0] = self_weight;
                    w
                }
            })
            .collect();
        Neighborhoods { lists, weights }
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }
}

// ---- Forward operations (validated API) ----------------------------------

/// Lift Euclidean feature rows onto the hyperboloid through the exponential
/// map at the origin; a zero row lands on the origin point.
pub fn lift_features(features: &DMatrix<f64>) -> Result<Vec<Point>> {
    if !features.iter().all(|x| x.is_finite()) {
        return Err(Error::input("lift_features: non-finite entry"));
    }
    let d = features.ncols();
    let mut out = Vec::with_capacity(features.nrows());
    for row in features.row_iter() {
        let norm = row.norm();
        let mut ambient = DVector::zeros(d + 1);
        if norm < TINY_NORM {
            ambient[0] = 1.0;
        } else {
            ambient[0] = norm.cosh();
            let scale = norm.sinh() / norm;
            for j in 0..d {
                ambient[j + 1] = row[j] * scale;
            }
        }
        out.push(Point::new(ambient)?);
    }
    Ok(out)
}

/// Constrained feature transform `y = W x / |W x|_L`.
pub fn feature_transform(params: &LayerParams, x: &Point) -> Result<Point> {
    if x.dim() != params.input_dim() {
        return Err(Error::dim(format!(
            "feature_transform: point in L^{}, layer expects L^{}",
            x.dim(),
            params.input_dim()
        )));
    }
    let raw = transform_raw(&params.weight(), x.ambient())?;
    Point::new(raw)
}

fn transform_raw(w: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let u = w * x;
    let q = inner_unchecked(&u, &u);
    if q >= -TINY_NORM {
        return Err(Error::DegenerateProjection(format!(
            "transformed vector not timelike (<Wx,Wx>_L = {q:.3e})"
        )));
    }
    Ok(&u / (-q).sqrt())
}

/// Closed-form weighted centroid under the squared Lorentzian distance:
/// `sum nu_j x_j / | ||sum nu_j x_j||_L |`.
pub fn aggregate(neighbors: &[Point], weights: &[f64]) -> Result<Point> {
    if neighbors.is_empty() {
        return Err(Error::input("aggregate: empty neighborhood"));
    }
    if neighbors.len() != weights.len() {
        return Err(Error::dim("aggregate: weights length mismatch"));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::input("aggregate: negative weight"));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::input("aggregate: all weights zero"));
    }
    let n = neighbors[0].ambient().len();
    let mut c = DVector::zeros(n);
    for (p, &w) in neighbors.iter().zip(weights) {
        c += p.ambient() * w;
    }
    let q = inner_unchecked(&c, &c);
    // Convex combinations of sheet points are timelike.
    debug_assert!(q < 0.0);
    Ok(Point::from_ambient_unchecked(&c / (-q).sqrt()))
}

/// Tangent ReLU: componentwise `max(0, .)` in the tangent space at the
/// origin, conjugated by the origin exp/log maps.
pub fn tangent_relu(x: &Point) -> Point {
    Point::from_ambient_unchecked(tangent_relu_raw(x.ambient()))
}

fn tangent_relu_raw(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len() - 1;
    let (z, _, _) = log0_raw(x);
    let mut kept = DVector::zeros(n);
    for i in 0..n {
        kept[i] = z[i].max(0.0);
    }
    exp0_raw(&kept)
}

/// Spatial part of the origin log map plus the quantities reused by the
/// backward pass (theta and sinh theta).
fn log0_raw(x: &DVector<f64>) -> (DVector<f64>, f64, f64) {
    let n = x.len() - 1;
    let x0 = x[0].max(1.0);
    let theta = x0.acosh();
    if theta < TINY_NORM {
        return (DVector::zeros(n), 0.0, 0.0);
    }
    let s = theta.sinh();
    let g = theta / s;
    let mut z = DVector::zeros(n);
    for i in 0..n {
        z[i] = g * x[i + 1];
    }
    (z, theta, s)
}

/// Origin exp map of a spatial tangent vector.
fn exp0_raw(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let rho = v.norm();
    let mut out = DVector::zeros(n + 1);
    if rho < TINY_NORM {
        out[0] = 1.0;
        return out;
    }
    out[0] = rho.cosh();
    let scale = rho.sinh() / rho;
    for i in 0..n {
        out[i + 1] = v[i] * scale;
    }
    out
}

/// Full forward pass: per-layer node representations (layer 0 output first).
pub fn forward(
    layers: &[LayerParams],
    hood: &Neighborhoods,
    inputs: &[Point],
) -> Result<Vec<Vec<Point>>> {
    let raw_inputs: Vec<DVector<f64>> = inputs.iter().map(|p| p.ambient().clone()).collect();
    let ws: Vec<DMatrix<f64>> = layers.iter().map(|l| l.weight()).collect();
    let mut outs = Vec::with_capacity(layers.len());
    let mut current = raw_inputs;
    for (layer, w) in layers.iter().zip(&ws) {
        if current[0].len() != layer.input_dim() + 1 {
            return Err(Error::dim("forward: layer dimension chain mismatch"));
        }
        let next = layer_forward_raw(w, hood, &current)?;
        outs.push(
            next.iter()
                .map(|v| Point::new(v.clone()))
                .collect::<Result<Vec<_>>>()?,
        );
        current = next;
    }
    Ok(outs)
}

fn layer_forward_raw(
    w: &DMatrix<f64>,
    hood: &Neighborhoods,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let transformed: Vec<DVector<f64>> = inputs
        .iter()
        .map(|x| transform_raw(w, x))
        .collect::<Result<_>>()?;
    let mut outs = Vec::with_capacity(inputs.len());
    for (list, weights) in hood.lists().iter().zip(hood.weights()) {
        let m = w.nrows();
        let mut c = DVector::zeros(m);
        for (&j, &nu) in list.iter().zip(weights) {
            c += &transformed[j] * nu;
        }
        let q = inner_unchecked(&c, &c);
        if q >= -TINY_NORM {
            return Err(Error::DegenerateProjection(
                "aggregate centroid not timelike".into(),
            ));
        }
        let mu = &c / (-q).sqrt();
        outs.push(tangent_relu_raw(&mu));
    }
    Ok(outs)
}

// ---- Decoders --------------------------------------------------------------

/// Fermi-Dirac link head: `1 / (exp((d^2 - r) / t) + 1)`.
#[derive(Debug, Clone)]
pub struct LinkDecoder {
    pub r_fd: f64,
    pub t_fd: f64,
}

impl LinkDecoder {
    pub fn new(r_fd: f64, t_fd: f64) -> Result<Self> {
        if t_fd <= 0.0 {
            return Err(Error::input(format!("t_fd must be positive, got {t_fd}")));
        }
        Ok(LinkDecoder { r_fd, t_fd })
    }
}

/// Edge probability from the squared Lorentzian distance of the endpoints.
pub fn decode_link(h_u: &Point, h_v: &Point, decoder: &LinkDecoder) -> Result<f64> {
    let d2 = crate::lorentz::squared_lorentz_distance(h_u, h_v)?;
    Ok(sigmoid((decoder.r_fd - d2) / decoder.t_fd))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z), stable.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Affine classification head on origin-tangent coordinates.
#[derive(Debug, Clone)]
pub struct ClassDecoder {
    pub weight: DMatrix<f64>, // classes x dim
    pub bias: DVector<f64>,   // classes
}

impl ClassDecoder {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        ClassDecoder {
            weight: DMatrix::zeros(classes, dim),
            bias: DVector::zeros(classes),
        }
    }
}

/// Class probabilities (softmax of the affine logits).
pub fn decode_class(h: &Point, decoder: &ClassDecoder) -> Result<DVector<f64>> {
    if decoder.weight.ncols() != h.dim() {
        return Err(Error::dim("decode_class: dimension mismatch"));
    }
    let (z, _, _) = log0_raw(h.ambient());
    let logits = &decoder.weight * z + &decoder.bias;
    Ok(softmax(&logits))
}

fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let exps = logits.map(|v| (v - max).exp());
    let total = exps.sum();
    exps / total
}

/// Per-task decoder parameters.
#[derive(Debug, Clone)]
pub enum Decoder {
    Link(LinkDecoder),
    Class(ClassDecoder),
}

// ---- Metrics ---------------------------------------------------------------

/// Rank-based area under the ROC curve; ties contribute 1/2.
pub fn metric_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::input("metric_auc: empty or mismatched inputs"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks across ties.
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(l, _)| **l)
        .map(|(_, r)| r)
        .sum();
    let pos = pos as f64;
    let neg = neg as f64;
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Macro-averaged F1 over `classes` classes.
pub fn metric_f1(pred: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    if pred.len() != labels.len() || pred.is_empty() {
        return Err(Error::input("metric_f1: empty or mismatched inputs"));
    }
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let tp = pred
            .iter()
            .zip(labels)
            .filter(|(p, l)| **p == c && **l == c)
            .count() as f64;
        let fp = pred
            .iter()
            .zip(labels)
            .filter(|(p, l)| **p == c && **l != c)
            .count() as f64;
        let fn_ = pred
            .iter()
            .zip(labels)
            .filter(|(p, l)| **p != c && **l == c)
            .count() as f64;
        let denom = 2.0 * tp + fp + fn_;
        f1_sum += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    Ok(f1_sum / classes as f64)
}

// ---- Training ----------------------------------------------------------------

/// Which task the network is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    LinkPrediction,
    NodeClassification,
}

/// Training settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Output dimension of each layer (input dimension is the feature
    /// count; entries must not increase past their predecessor).
    pub dims: Vec<usize>,
    pub opt: opt::OptimizerConfig,
    pub steps: usize,
    pub seed: u64,
    /// Self-loop aggregation weight; `None` means uniform `1/(deg+1)`.
    pub self_weight: Option<f64>,
    /// Track constraint and representation residuals every step.
    pub validate_invariants: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: vec![2, 2],
            opt: opt::OptimizerConfig {
                max_iters: 1,
                restarts: 1,
                grad_tol: 1e-7,
                ..Default::default()
            },
            steps: 120,
            seed: 0,
            self_weight: None,
            validate_invariants: true,
        }
    }
}

/// One row of the training trace.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub step: usize,
    pub loss: f64,
    /// Validation metric (AUC or accuracy, by task).
    pub metric: f64,
}

/// A trained network plus its training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub layers: Vec<LayerParams>,
    pub decoder: Decoder,
    pub trace: Vec<MetricRow>,
    /// Max `|W J W^T - J|` seen across layers and steps.
    pub constraint_max_dev: f64,
    /// Max point-invariant residual across representations and steps.
    pub repr_max_dev: f64,
}

/// Network + data context for loss/gradient evaluation.
struct NetworkEval {
    dims: Vec<usize>, // [d0, d1, ..., dL]
    hood: Neighborhoods,
    inputs: Vec<DVector<f64>>,
    task: Task,
    // LP samples: (u, v, is_edge); NC samples: (node, class).
    lp_samples: Vec<(usize, usize, bool)>,
    nc_samples: Vec<(usize, usize)>,
    classes: usize,
}

/// Per-layer forward cache for the backward pass.
struct LayerCache {
    input: Vec<DVector<f64>>,      // x_j^{l-1}
    u: Vec<DVector<f64>>,          // W x_j
    s: Vec<f64>,                   // |W x_j|_L magnitude
    y: Vec<DVector<f64>>,          // normalized transform
    c: Vec<DVector<f64>>,          // aggregation sums
    sc: Vec<f64>,                  // |c|_L magnitude
    mu: Vec<DVector<f64>>,         // normalized centroids
    z: Vec<DVector<f64>>,          // log0 spatial coords of mu
    theta: Vec<f64>,               // acosh(mu_0)
    sinh_theta: Vec<f64>,
    kept: Vec<DVector<f64>>,       // relu'd tangent coords
    rho: Vec<f64>,                 // |kept|
    out: Vec<DVector<f64>>,
}

impl NetworkEval {
    fn param_layout(&self) -> (usize, usize) {
        // (params per layer block, number of layers)
        (3, self.dims.len() - 1)
    }

    fn unpack_weights(&self, params: &[Param]) -> Vec<DMatrix<f64>> {
        let (_, layers) = self.param_layout();
        (0..layers)
            .map(|l| {
                let p_tilde = params[3 * l].matrix().unwrap();
                let alpha = params[3 * l + 1].scalar().unwrap();
                let q = params[3 * l + 2].matrix().unwrap();
                assemble_weight(p_tilde, alpha, q)
            })
            .collect()
    }

    /// Forward with cache; `None` when a normalization degenerates (only
    /// reachable from off-manifold probes).
    fn forward_cached(&self, ws: &[DMatrix<f64>]) -> Option<Vec<LayerCache>> {
        let mut caches = Vec::with_capacity(ws.len());
        let mut current = self.inputs.clone();
        for w in ws {
            let nodes = current.len();
            let spatial = w.nrows() - 1;
            let mut cache = LayerCache {
                input: current.clone(),
                u: Vec::with_capacity(nodes),
                s: Vec::with_capacity(nodes),
                y: Vec::with_capacity(nodes),
                c: Vec::with_capacity(nodes),
                sc: Vec::with_capacity(nodes),
                mu: Vec::with_capacity(nodes),
                z: Vec::with_capacity(nodes),
                theta: Vec::with_capacity(nodes),
                sinh_theta: Vec::with_capacity(nodes),
                kept: Vec::with_capacity(nodes),
                rho: Vec::with_capacity(nodes),
                out: Vec::with_capacity(nodes),
            };
            for x in &current {
                let u = w * x;
                let qq = inner_unchecked(&u, &u);
                if qq >= -TINY_NORM {
                    return None;
                }
                let s = (-qq).sqrt();
                cache.y.push(&u / s);
                cache.u.push(u);
                cache.s.push(s);
            }
            for (list, weights) in self.hood.lists().iter().zip(self.hood.weights()) {
                let mut c = DVector::zeros(spatial + 1);
                for (&j, &nu) in list.iter().zip(weights) {
                    c += &cache.y[j] * nu;
                }
                let qq = inner_unchecked(&c, &c);
                if qq >= -TINY_NORM {
                    return None;
                }
                let sc = (-qq).sqrt();
                let mu = &c / sc;
                let (z, theta, sinh_theta) = log0_raw(&mu);
                let mut kept = DVector::zeros(spatial);
                for i in 0..spatial {
                    kept[i] = z[i].max(0.0);
                }
                let out = exp0_raw(&kept);
                cache.c.push(c);
                cache.sc.push(sc);
                cache.mu.push(mu);
                cache.z.push(z);
                cache.theta.push(theta);
                cache.sinh_theta.push(sinh_theta);
                cache.rho.push(kept.norm());
                cache.kept.push(kept);
                cache.out.push(out);
            }
            current = cache.out.clone();
            caches.push(cache);
        }
        Some(caches)
    }

    /// Total (summed) training loss.
    fn loss(&self, params: &[Param]) -> f64 {
        let ws = self.unpack_weights(params);
        let caches = match self.forward_cached(&ws) {
            Some(c) => c,
            None => return f64::INFINITY,
        };
        let finals = &caches.last().unwrap().out;
        match self.task {
            Task::LinkPrediction => {
                let (_, layers) = self.param_layout();
                let r_fd = params[3 * layers].scalar().unwrap();
                let tau = params[3 * layers + 1].scalar().unwrap();
                let t = tau.exp();
                let mut total = 0.0;
                for &(u, v, is_edge) in &self.lp_samples {
                    let d2 = -1.0 - inner_unchecked(&finals[u], &finals[v]);
                    let logit = (r_fd - d2) / t;
                    total += if is_edge {
                        softplus(-logit)
                    } else {
                        softplus(logit)
                    };
                }
                total
            }
            Task::NodeClassification => {
                let (_, layers) = self.param_layout();
                let wc = params[3 * layers].matrix().unwrap();
                let bias = params[3 * layers + 1].matrix().unwrap();
                let mut total = 0.0;
                for &(node, class) in &self.nc_samples {
                    let (z, _, _) = log0_raw(&finals[node]);
                    let logits = wc * z + bias.column(0);
                    let max = logits.max();
                    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    total += lse - logits[class];
                }
                total
            }
        }
    }

    /// Analytic ambient gradients for every parameter, one reverse pass.
    fn gradients(&self, params: &[Param]) -> Vec<DMatrix<f64>> {
        let ws = self.unpack_weights(params);
        let (_, layers) = self.param_layout();
        let caches = match self.forward_cached(&ws) {
            Some(c) => c,
            // Unreachable from on-manifold iterates; zero gradients keep
            // the optimizer's line search in charge.
            None => return params.iter().map(zero_like).collect(),
        };
        let finals = &caches.last().unwrap().out;
        let nodes = self.inputs.len();
        let final_dim = *self.dims.last().unwrap();

        // Head: gradient with respect to the final representations plus
        // the decoder parameters.
        let mut out_bar: Vec<DVector<f64>> = vec![DVector::zeros(final_dim + 1); nodes];
        let mut decoder_grads: Vec<DMatrix<f64>> = Vec::new();
        match self.task {
            Task::LinkPrediction => {
                let r_fd = params[3 * layers].scalar().unwrap();
                let tau = params[3 * layers + 1].scalar().unwrap();
                let t = tau.exp();
                let mut r_bar = 0.0;
                let mut tau_bar = 0.0;
                for &(u, v, is_edge) in &self.lp_samples {
                    let d2 = -1.0 - inner_unchecked(&finals[u], &finals[v]);
                    let logit = (r_fd - d2) / t;
                    let p = sigmoid(logit);
                    let dl_dlogit = p - if is_edge { 1.0 } else { 0.0 };
                    r_bar += dl_dlogit / t;
                    tau_bar += dl_dlogit * (-logit);
                    let d2_bar = -dl_dlogit / t;
                    // d d2 / d h_u = -J h_v.
                    let mut jv = finals[v].clone();
                    jv[0] = -jv[0];
                    out_bar[u] += jv * (-d2_bar);
                    let mut ju = finals[u].clone();
                    ju[0] = -ju[0];
                    out_bar[v] += ju * (-d2_bar);
                }
                decoder_grads.push(DMatrix::from_element(1, 1, r_bar));
                decoder_grads.push(DMatrix::from_element(1, 1, tau_bar));
            }
            Task::NodeClassification => {
                let wc = params[3 * layers].matrix().unwrap();
                let bias = params[3 * layers + 1].matrix().unwrap();
                let mut wc_bar = DMatrix::zeros(wc.nrows(), wc.ncols());
                let mut b_bar = DVector::zeros(wc.nrows());
                for &(node, class) in &self.nc_samples {
                    let (z, theta, sinh_theta) = log0_raw(&finals[node]);
                    let logits = wc * &z + bias.column(0);
                    let p = softmax(&logits);
                    let mut delta = p;
                    delta[class] -= 1.0;
                    wc_bar += &delta * z.transpose();
                    b_bar += &delta;
                    let z_bar = wc.transpose() * delta;
                    accumulate_log0_vjp(
                        &finals[node],
                        theta,
                        sinh_theta,
                        &z_bar,
                        &mut out_bar[node],
                    );
                }
                decoder_grads.push(wc_bar);
                decoder_grads.push(DMatrix::from_column_slice(
                    b_bar.len(),
                    1,
                    b_bar.as_slice(),
                ));
            }
        }

        // Layers, last to first.
        let mut layer_grads: Vec<(DMatrix<f64>, f64, DMatrix<f64>)> = Vec::with_capacity(layers);
        let mut current_bar = out_bar;
        for l in (0..layers).rev() {
            let cache = &caches[l];
            let w = &ws[l];
            let m = w.nrows() - 1;
            let n = w.ncols() - 1;

            // tangent ReLU backward: out = exp0(kept), kept = relu(z),
            // z = log0(mu).
            let mut mu_bar: Vec<DVector<f64>> = Vec::with_capacity(nodes);
            for i in 0..nodes {
                let ob = &current_bar[i];
                let kept = &cache.kept[i];
                let rho = cache.rho[i];
                let mut kept_bar = DVector::zeros(m);
                if rho >= TINY_NORM {
                    let sinh_rho = rho.sinh();
                    let cosh_rho = rho.cosh();
                    let ob_spatial = ob.rows(1, m).into_owned();
                    let dot = ob_spatial.dot(kept);
                    let coeff = ob[0] * sinh_rho + dot * (rho * cosh_rho - sinh_rho) / (rho * rho);
                    kept_bar = ob_spatial * (sinh_rho / rho) + kept * (coeff / rho);
                }
                let mut z_bar = DVector::zeros(m);
                for k in 0..m {
                    if cache.z[i][k] > 0.0 {
                        z_bar[k] = kept_bar[k];
                    }
                }
                let mut mb = DVector::zeros(m + 1);
                accumulate_log0_vjp(
                    &cache.mu[i],
                    cache.theta[i],
                    cache.sinh_theta[i],
                    &z_bar,
                    &mut mb,
                );
                mu_bar.push(mb);
            }

            // Aggregation backward.
            let mut y_bar: Vec<DVector<f64>> = vec![DVector::zeros(m + 1); nodes];
            for i in 0..nodes {
                let c_bar = normalize_vjp(&cache.c[i], cache.sc[i], &mu_bar[i]);
                for (&j, &nu) in self.hood.lists()[i].iter().zip(&self.hood.weights()[i]) {
                    y_bar[j] += &c_bar * nu;
                }
            }

            // Transform backward.
            let mut w_bar = DMatrix::zeros(m + 1, n + 1);
            let mut input_bar: Vec<DVector<f64>> = vec![DVector::zeros(n + 1); nodes];
            for j in 0..nodes {
                let u_bar = normalize_vjp(&cache.u[j], cache.s[j], &y_bar[j]);
                w_bar += &u_bar * cache.input[j].transpose();
                input_bar[j] = w.transpose() * u_bar;
            }

            // Chain W = E B F into the factors.
            let p_tilde = params[3 * l].matrix().unwrap();
            let alpha = params[3 * l + 1].scalar().unwrap();
            let q = params[3 * l + 2].matrix().unwrap();
            let mut e = DMatrix::zeros(m + 1, n + 1);
            e[(0, 0)] = 1.0;
            e.view_mut((1, 1), (m, n)).copy_from(p_tilde);
            let b = boost_along_first_axis(alpha, n).into_matrix();
            let bp = boost_derivative(alpha, n);
            let mut f = DMatrix::identity(n + 1, n + 1);
            f.view_mut((1, 1), (n, n)).copy_from(&q.transpose());

            let e_bar: DMatrix<f64> = &w_bar * f.transpose() * b.transpose();
            let p_bar = e_bar.view((1, 1), (m, n)).into_owned();
            let alpha_bar = (&e * &bp * &f).component_mul(&w_bar).sum();
            let f_bar: DMatrix<f64> = (&e * &b).transpose() * &w_bar;
            let q_bar = f_bar.view((1, 1), (n, n)).transpose();

            layer_grads.push((p_bar, alpha_bar, q_bar));
            current_bar = input_bar;
        }
        layer_grads.reverse();

        let mut grads: Vec<DMatrix<f64>> = Vec::with_capacity(params.len());
        for (p_bar, alpha_bar, q_bar) in layer_grads {
            grads.push(p_bar);
            grads.push(DMatrix::from_element(1, 1, alpha_bar));
            grads.push(q_bar);
        }
        grads.extend(decoder_grads);
        grads
    }
}

fn zero_like(p: &Param) -> DMatrix<f64> {
    let m = p.as_matrix();
    DMatrix::zeros(m.nrows(), m.ncols())
}

/// VJP of `y = u / sqrt(-<u,u>_L)`.
fn normalize_vjp(u: &DVector<f64>, s: f64, y_bar: &DVector<f64>) -> DVector<f64> {
    let mut ju = u.clone();
    ju[0] = -ju[0];
    y_bar / s + ju * (u.dot(y_bar) / (s * s * s))
}

/// Accumulate the VJP of the spatial origin-log `z = g(x0) x~` into `x_bar`.
fn accumulate_log0_vjp(
    x: &DVector<f64>,
    theta: f64,
    sinh_theta: f64,
    z_bar: &DVector<f64>,
    x_bar: &mut DVector<f64>,
) {
    let n = x.len() - 1;
    if theta < TINY_NORM {
        return; // branch returns a constant
    }
    let g = theta / sinh_theta;
    let x0 = x[0];
    // g'(x0) with dtheta/dx0 = 1/sinh, dsinh/dx0 = x0/sinh.
    let gprime = (1.0 - theta * x0 / sinh_theta) / (sinh_theta * sinh_theta);
    let mut spatial_dot = 0.0;
    for i in 0..n {
        x_bar[i + 1] += g * z_bar[i];
        spatial_dot += z_bar[i] * x[i + 1];
    }
    x_bar[0] += spatial_dot * gprime;
}

/// Assemble the optimizer parameter vector for a model.
fn model_params(layers: &[LayerParams], decoder: &Decoder) -> Vec<Param> {
    let mut params = Vec::new();
    for layer in layers {
        params.push(Param::Stiefel(layer.p_tilde.clone()));
        params.push(Param::Scalar(layer.alpha));
        params.push(Param::Rotation(layer.q.clone()));
    }
    match decoder {
        Decoder::Link(d) => {
            params.push(Param::Scalar(d.r_fd));
            params.push(Param::Scalar(d.t_fd.ln()));
        }
        Decoder::Class(d) => {
            params.push(Param::Euclidean(d.weight.clone()));
            params.push(Param::Euclidean(DMatrix::from_column_slice(
                d.bias.len(),
                1,
                d.bias.as_slice(),
            )));
        }
    }
    params
}

fn params_to_model(params: &[Param], dims: &[usize], task: Task) -> (Vec<LayerParams>, Decoder) {
    let layers_count = dims.len() - 1;
    let mut layers = Vec::with_capacity(layers_count);
    for l in 0..layers_count {
        layers.push(LayerParams {
            p_tilde: params[3 * l].matrix().unwrap().clone(),
            alpha: params[3 * l + 1].scalar().unwrap(),
            q: params[3 * l + 2].matrix().unwrap().clone(),
        });
    }
    let decoder = match task {
        Task::LinkPrediction => Decoder::Link(LinkDecoder {
            r_fd: params[3 * layers_count].scalar().unwrap(),
            t_fd: params[3 * layers_count + 1].scalar().unwrap().exp(),
        }),
        Task::NodeClassification => {
            let w = params[3 * layers_count].matrix().unwrap().clone();
            let b = params[3 * layers_count + 1].matrix().unwrap().column(0).into_owned();
            Decoder::Class(ClassDecoder { weight: w, bias: b })
        }
    };
    (layers, decoder)
}

/// Aggregation graph for a task: link prediction must not see held-out
/// edges, node classification uses the full graph.
pub fn neighborhoods_for_task(graph: &GraphData, task: Task, self_weight: Option<f64>) -> Neighborhoods {
    let edges: &[(usize, usize)] = match task {
        Task::LinkPrediction => &graph.edge_split().train_pos,
        Task::NodeClassification => graph.edges(),
    };
    match self_weight {
        Some(w) => Neighborhoods::self_biased(graph.num_nodes(), edges, w),
        None => Neighborhoods::uniform(graph.num_nodes(), edges),
    }
}

fn build_eval(graph: &GraphData, task: Task, config: &TrainConfig) -> Result<NetworkEval> {
    let d = graph.feature_dim();
    let mut dims = vec![d];
    dims.extend_from_slice(&config.dims);
    for pair in dims.windows(2) {
        if pair[1] > pair[0] || pair[1] < 1 {
            return Err(Error::dim(format!(
                "layer dims must not grow: {} -> {}",
                pair[0], pair[1]
            )));
        }
    }
    let inputs: Vec<DVector<f64>> = lift_features(graph.features())?
        .into_iter()
        .map(|p| p.into_ambient())
        .collect();
    let hood = neighborhoods_for_task(graph, task, config.self_weight);

    let mut lp_samples = Vec::new();
    let mut nc_samples = Vec::new();
    let mut classes = 0;
    match task {
        Task::LinkPrediction => {
            for &(u, v) in &graph.edge_split().train_pos {
                lp_samples.push((u, v, true));
            }
            for &(u, v) in &graph.edge_split().train_neg {
                lp_samples.push((u, v, false));
            }
            if lp_samples.is_empty() {
                return Err(Error::input("link prediction needs train edge samples"));
            }
        }
        Task::NodeClassification => {
            let labels = graph
                .labels()
                .ok_or_else(|| Error::input("node classification needs labels"))?;
            classes = labels.iter().max().map_or(0, |m| m + 1);
            for i in graph.nodes_in(Split::Train) {
                nc_samples.push((i, labels[i]));
            }
            if nc_samples.is_empty() {
                return Err(Error::input("node classification needs train nodes"));
            }
        }
    }
    Ok(NetworkEval {
        dims,
        hood,
        inputs,
        task,
        lp_samples,
        nc_samples,
        classes,
    })
}

/// Train a network with block-coordinate Riemannian descent.
pub fn train(graph: &GraphData, task: Task, config: &TrainConfig) -> Result<TrainedModel> {
    let eval = build_eval(graph, task, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Initial model.
    let mut layers = Vec::new();
    for pair in eval.dims.windows(2) {
        layers.push(LayerParams::random(pair[1], pair[0], &mut rng));
    }
    let decoder = match task {
        Task::LinkPrediction => {
            // Center the decoder at the mean initial squared distance so
            // the first probabilities sit near 1/2.
            let ws: Vec<DMatrix<f64>> = layers.iter().map(|l| l.weight()).collect();
            let caches = eval
                .forward_cached(&ws)
                .ok_or_else(|| Error::input("degenerate initial forward pass"))?;
            let finals = &caches.last().unwrap().out;
            let mut mean_d2 = 0.0;
            for &(u, v, _) in &eval.lp_samples {
                mean_d2 += -1.0 - inner_unchecked(&finals[u], &finals[v]);
            }
            mean_d2 /= eval.lp_samples.len() as f64;
            Decoder::Link(LinkDecoder {
                r_fd: mean_d2,
                t_fd: 1.0,
            })
        }
        Task::NodeClassification => {
            Decoder::Class(ClassDecoder::zeros(eval.classes, *eval.dims.last().unwrap()))
        }
    };

    let mut params = model_params(&layers, &decoder);
    let objective = |p: &[Param]| eval.loss(p);
    let gradient = |p: &[Param]| eval.gradients(p);

    let mut trace = Vec::with_capacity(config.steps);
    let mut constraint_max_dev: f64 = 0.0;
    let mut repr_max_dev: f64 = 0.0;

    let check = |params: &[Param], dev_c: &mut f64, dev_r: &mut f64| -> Result<()> {
        let (layers, _) = params_to_model(params, &eval.dims, task);
        for layer in &layers {
            *dev_c = dev_c.max(layer.constraint_residual());
        }
        let ws: Vec<DMatrix<f64>> = layers.iter().map(|l| l.weight()).collect();
        let caches = eval
            .forward_cached(&ws)
            .ok_or_else(|| Error::input("degenerate forward during validation"))?;
        for cache in &caches {
            for v in cache.y.iter().chain(cache.mu.iter()).chain(cache.out.iter()) {
                // Deviations below the quadratic-form roundoff floor are
                // measurement noise, not constraint violations.
                let floor = 32.0 * f64::EPSILON * (1.0 + v.norm_squared());
                *dev_r = dev_r.max(((inner_unchecked(v, v) + 1.0).abs() - floor).max(0.0));
            }
        }
        Ok(())
    };

    if config.validate_invariants {
        check(&params, &mut constraint_max_dev, &mut repr_max_dev)?;
    }

    let step_cfg = opt::OptimizerConfig {
        max_iters: 1,
        restarts: 1,
        ..config.opt.clone()
    };
    for step in 0..config.steps {
        let run = opt::minimize_with_grad(objective, &gradient, params, &step_cfg).map_err(
            |e| match e {
                Error::Optimization {
                    iteration, message, ..
                } => Error::Optimization {
                    iteration,
                    message: format!("training step {step}: {message}"),
                    trace: trace.iter().map(|r: &MetricRow| r.loss).collect(),
                },
                other => other,
            },
        )?;
        params = run.params;
        if config.validate_invariants {
            check(&params, &mut constraint_max_dev, &mut repr_max_dev)?;
        }
        let (cur_layers, cur_decoder) = params_to_model(&params, &eval.dims, task);
        let metric = match task {
            Task::LinkPrediction => {
                evaluate_lp(&cur_layers, &cur_decoder, graph, Split::Val, config.self_weight)
                    .unwrap_or(f64::NAN)
            }
            Task::NodeClassification => {
                evaluate_nc_accuracy(&cur_layers, graph, &cur_decoder, Split::Val, config.self_weight)
                    .unwrap_or(f64::NAN)
            }
        };
        trace.push(MetricRow {
            step,
            loss: run.value,
            metric,
        });
        if run.converged {
            break;
        }
    }

    let (layers, decoder) = params_to_model(&params, &eval.dims, task);
    Ok(TrainedModel {
        layers,
        decoder,
        trace,
        constraint_max_dev,
        repr_max_dev,
    })
}

/// Final-layer representations for evaluation.
pub fn representations(
    layers: &[LayerParams],
    graph: &GraphData,
    task: Task,
    self_weight: Option<f64>,
) -> Result<Vec<Point>> {
    let hood = neighborhoods_for_task(graph, task, self_weight);
    let inputs = lift_features(graph.features())?;
    let all = forward(layers, &hood, &inputs)?;
    Ok(all.into_iter().last().unwrap())
}

/// AUC of the Fermi-Dirac scores on a split's positive/negative samples.
pub fn evaluate_lp(
    layers: &[LayerParams],
    decoder: &Decoder,
    graph: &GraphData,
    split: Split,
    self_weight: Option<f64>,
) -> Result<f64> {
    let link = match decoder {
        Decoder::Link(d) => d,
        Decoder::Class(_) => return Err(Error::input("evaluate_lp: wrong decoder kind")),
    };
    let reps = representations(layers, graph, Task::LinkPrediction, self_weight)?;
    let (pos, neg) = match split {
        Split::Train => (&graph.edge_split().train_pos, &graph.edge_split().train_neg),
        Split::Val => (&graph.edge_split().val_pos, &graph.edge_split().val_neg),
        Split::Test => (&graph.edge_split().test_pos, &graph.edge_split().test_neg),
    };
    let mut scores = Vec::with_capacity(pos.len() + neg.len());
    let mut labels = Vec::with_capacity(pos.len() + neg.len());
    for &(u, v) in pos {
        scores.push(decode_link(&reps[u], &reps[v], link)?);
        labels.push(true);
    }
    for &(u, v) in neg {
        scores.push(decode_link(&reps[u], &reps[v], link)?);
        labels.push(false);
    }
    metric_auc(&scores, &labels)
}

/// Class predictions for every node.
pub fn predict_classes(
    layers: &[LayerParams],
    decoder: &Decoder,
    graph: &GraphData,
    self_weight: Option<f64>,
) -> Result<Vec<usize>> {
    let class = match decoder {
        Decoder::Class(d) => d,
        Decoder::Link(_) => return Err(Error::input("predict_classes: wrong decoder kind")),
    };
    let reps = representations(layers, graph, Task::NodeClassification, self_weight)?;
    reps.iter()
        .map(|h| {
            let probs = decode_class(h, class)?;
            Ok(probs.argmax().0)
        })
        .collect()
}

/// Accuracy on a split.
pub fn evaluate_nc_accuracy(
    layers: &[LayerParams],
    graph: &GraphData,
    decoder: &Decoder,
    split: Split,
    self_weight: Option<f64>,
) -> Result<f64> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::input("accuracy needs labels"))?;
    let pred = predict_classes(layers, decoder, graph, self_weight)?;
    let nodes = graph.nodes_in(split);
    if nodes.is_empty() {
        return Err(Error::input("empty split"));
    }
    let correct = nodes.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Macro F1 on a split.
pub fn evaluate_nc_f1(
    layers: &[LayerParams],
    graph: &GraphData,
    decoder: &Decoder,
    split: Split,
    self_weight: Option<f64>,
) -> Result<f64> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::input("F1 needs labels"))?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let pred = predict_classes(layers, decoder, graph, self_weight)?;
    let nodes = graph.nodes_in(split);
    let p: Vec<usize> = nodes.iter().map(|&i| pred[i]).collect();
    let l: Vec<usize> = nodes.iter().map(|&i| labels[i]).collect();
    metric_f1(&p, &l, classes)
}

/// Expose the training objective and gradients for verification harnesses.
pub fn training_problem(
    graph: &GraphData,
    task: Task,
    config: &TrainConfig,
    layers: &[LayerParams],
    decoder: &Decoder,
) -> Result<(Vec<Param>, impl Fn(&[Param]) -> f64, impl Fn(&[Param]) -> Vec<DMatrix<f64>>)>
{
    let eval = build_eval(graph, task, config)?;
    let eval2 = build_eval(graph, task, config)?;
    let params = model_params(layers, decoder);
    Ok((
        params,
        move |p: &[Param]| eval.loss(p),
        move |p: &[Param]| eval2.gradients(p),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{geodesic_distance, random_point};
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn tiny_graph(seed: u64) -> GraphData {
        // 3 nodes in a path, 2 features, labels 0/1/1.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
        GraphData::new(
            3,
            vec![(0, 1), (1, 2)],
            features,
            Some(vec![0, 1, 1]),
            vec![Split::Train, Split::Train, Split::Train],
            EdgeSplit {
                train_pos: vec![(0, 1), (1, 2)],
                train_neg: vec![(0, 2)],
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn lift_examples() {
        let feats = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 0.7, 0.0, 0.0]);
        let pts = lift_features(&feats).unwrap();
        assert_eq!(pts[0].ambient(), &dvector![1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(pts[1].ambient()[0], 0.7_f64.cosh(), epsilon = 1e-14);
        assert_relative_eq!(pts[1].ambient()[1], 0.7_f64.sinh(), epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let random = DMatrix::from_fn(50, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        for p in lift_features(&random).unwrap() {
            assert!(p.constraint_residual() < 1e-9);
        }
    }

    #[test]
    fn layer_constraint_holds_by_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let layer = LayerParams::random(2, 4, &mut rng);
            assert!(
                layer.constraint_residual() < 1e-9,
                "constraint residual {}",
                layer.constraint_residual()
            );
        }
    }

    #[test]
    fn full_rotation_layer_is_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = LayerParams::new(
            random_rotation(3, &mut rng),
            0.0,
            DMatrix::identity(3, 3),
        )
        .unwrap();
        for _ in 0..50 {
            let x = random_point(3, 3.0, &mut rng);
            let y = random_point(3, 3.0, &mut rng);
            let d = geodesic_distance(&x, &y).unwrap();
            let dt = geodesic_distance(
                &feature_transform(&layer, &x).unwrap(),
                &feature_transform(&layer, &y).unwrap(),
            )
            .unwrap();
            assert!((d - dt).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_layer_sends_last_axis_to_origin() {
        // W = [I_{m+1} | 0]: a point moving only along the dropped axis
        // collapses to the origin.
        let mut p_tilde = DMatrix::zeros(2, 3);
        p_tilde[(0, 0)] = 1.0;
        p_tilde[(1, 1)] = 1.0;
        let layer = LayerParams::new(p_tilde, 0.0, DMatrix::identity(3, 3)).unwrap();
        let t = 0.9_f64;
        let x = Point::new(dvector![t.cosh(), 0.0, 0.0, t.sinh()]).unwrap();
        let y = feature_transform(&layer, &x).unwrap();
        assert!((y.ambient() - dvector![1.0, 0.0, 0.0]).norm() < 1e-12);
    }

    #[test]
    fn transform_outputs_pass_point_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let layer = LayerParams::random(2, 4, &mut rng);
            let x = random_point(4, 3.0, &mut rng);
            let y = feature_transform(&layer, &x).unwrap();
            assert!(y.constraint_residual() < 1e-9);
        }
    }

    #[test]
    fn aggregate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_point(2, 2.0, &mut rng);
        let single = aggregate(std::slice::from_ref(&x), &[1.0]).unwrap();
        assert!((single.ambient() - x.ambient()).norm() < 1e-12);

        let t = 0.8_f64;
        let a = Point::new(dvector![t.cosh(), t.sinh()]).unwrap();
        let b = Point::new(dvector![t.cosh(), -t.sinh()]).unwrap();
        let mid = aggregate(&[a, b], &[0.5, 0.5]).unwrap();
        assert!((mid.ambient() - dvector![1.0, 0.0]).norm() < 1e-12);

        assert!(aggregate(&[], &[]).is_err());
        assert!(aggregate(std::slice::from_ref(&x), &[0.0]).is_err());
    }

    #[test]
    fn aggregate_matches_descent_on_the_centroid_objective() {
        // The closed form minimizes sum nu_j d_L^2(x_j, mu) over the sheet;
        // compare with Riemannian gradient descent on that objective.
        use crate::lorentz::{exp_map, Tangent};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let points: Vec<Point> = (0..5).map(|_| random_point(2, 1.5, &mut rng)).collect();
            let weights: Vec<f64> = (0..5).map(|_| rng.gen_range(0.1..1.0)).collect();
            let closed = aggregate(&points, &weights).unwrap();

            let mut mu = Point::origin(2);
            for _ in 0..4000 {
                // Euclidean gradient of sum w(-1 - <x,mu>) is -J sum w x;
                // project to the tangent space and step.
                let mut ambient = DVector::zeros(3);
                for (p, &w) in points.iter().zip(&weights) {
                    ambient += p.ambient() * w;
                }
                let mut jg = ambient.clone();
                jg[0] = -jg[0];
                let mut egrad = -jg;
                egrad[0] = -egrad[0]; // grad = J e-grad for the Lorentz metric
                let pairing = inner_unchecked(mu.ambient(), &egrad);
                let tangent_comp = egrad + mu.ambient() * pairing;
                let step = Tangent::new_unchecked(mu.clone(), tangent_comp * (-0.2));
                mu = exp_map(&mu, &step).unwrap();
            }
            let gap = geodesic_distance(&closed, &mu).unwrap();
            assert!(gap < 1e-5, "closed form vs descent gap {gap}");
        }
    }

    #[test]
    fn tangent_relu_examples() {
        let origin = Point::origin(3);
        let fixed = tangent_relu(&origin);
        assert_eq!(fixed.ambient(), origin.ambient());

        // All-nonnegative spatial coordinates: identity region.
        let x = Point::lift(&dvector![0.4, 0.2, 0.9]).unwrap();
        let y = tangent_relu(&x);
        assert!((y.ambient() - x.ambient()).norm() < 1e-10);

        // All-nonpositive: collapses to the origin.
        let z = Point::lift(&dvector![-0.4, -0.2, -0.9]).unwrap();
        let w = tangent_relu(&z);
        assert!((w.ambient() - origin.ambient()).norm() < 1e-12);

        // Idempotent.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let x = random_point(3, 2.0, &mut rng);
            let once = tangent_relu(&x);
            let twice = tangent_relu(&once);
            assert!((once.ambient() - twice.ambient()).norm() < 1e-10);
        }
    }

    #[test]
    fn forward_representations_valid_and_permutation_equivariant() {
        let graph = tiny_graph(23);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let layers = vec![
            LayerParams::random(2, 2, &mut rng),
            LayerParams::random(2, 2, &mut rng),
        ];
        let hood = Neighborhoods::uniform(graph.num_nodes(), graph.edges());
        let inputs = lift_features(graph.features()).unwrap();
        let outs = forward(&layers, &hood, &inputs).unwrap();
        for layer_out in &outs {
            for p in layer_out {
                assert!(p.constraint_residual() < 1e-8);
            }
        }

        // Permute node ids (reverse) and compare.
        let perm = [2usize, 1, 0];
        let mut pfeat = DMatrix::zeros(3, 2);
        for i in 0..3 {
            pfeat.set_row(i, &graph.features().row(perm[i]));
        }
        let pedges: Vec<(usize, usize)> = graph
            .edges()
            .iter()
            .map(|&(u, v)| (perm.iter().position(|&x| x == u).unwrap(), perm.iter().position(|&x| x == v).unwrap()))
            .collect();
        let phood = Neighborhoods::uniform(3, &pedges);
        let pinputs = lift_features(&pfeat).unwrap();
        let pouts = forward(&layers, &phood, &pinputs).unwrap();
        for i in 0..3 {
            let orig = outs.last().unwrap()[perm[i]].ambient();
            let perm_out = pouts.last().unwrap()[i].ambient();
            assert!((orig - perm_out).norm() < 1e-12, "not permutation equivariant");
        }
    }

    #[test]
    fn forward_single_node_reduces_to_transform_then_relu() {
        // One node, no edges: the layer is tangent_relu(feature_transform(x)).
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let layer = LayerParams::random(2, 2, &mut rng);
        let hood = Neighborhoods::uniform(1, &[]);
        let x = random_point(2, 1.5, &mut rng);
        let out = forward(std::slice::from_ref(&layer), &hood, std::slice::from_ref(&x))
            .unwrap();
        let direct = tangent_relu(&feature_transform(&layer, &x).unwrap());
        assert!((out[0][0].ambient() - direct.ambient()).norm() < 1e-12);
    }

    #[test]
    fn separable_features_reach_full_training_accuracy() {
        // Two well-separated clusters: the tangent-linear head fits the
        // training set exactly.
        let graph = two_sep_graph();
        let config = TrainConfig {
            dims: vec![2],
            steps: 80,
            seed: 3,
            ..Default::default()
        };
        let model = train(&graph, Task::NodeClassification, &config).unwrap();
        let acc =
            evaluate_nc_accuracy(&model.layers, &graph, &model.decoder, Split::Train, None)
                .unwrap();
        assert_eq!(acc, 1.0, "separable training data must fit exactly");
    }

    fn two_sep_graph() -> GraphData {
        let mut features = DMatrix::zeros(8, 2);
        let mut labels = Vec::new();
        for i in 0..8 {
            let side = if i < 4 { 1.0 } else { -1.0 };
            features[(i, 0)] = side * (1.0 + 0.1 * i as f64);
            features[(i, 1)] = 0.05 * i as f64;
            labels.push(if i < 4 { 0 } else { 1 });
        }
        GraphData::new(
            8,
            vec![(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)],
            features,
            Some(labels),
            vec![Split::Train; 8],
            EdgeSplit::default(),
        )
        .unwrap()
    }

    #[test]
    fn decode_link_examples() {
        let decoder = LinkDecoder::new(2.0, 1.0).unwrap();
        let origin = Point::origin(2);
        // Identical endpoints: d^2 = 0.
        let p = decode_link(&origin, &origin, &decoder).unwrap();
        assert_relative_eq!(p, 1.0 / ((-2.0_f64).exp() + 1.0), epsilon = 1e-12);

        // d^2 = r_fd gives exactly 1/2.
        let t = ((1.0 + 2.0_f64) as f64).acosh(); // squared distance 2 at -<x,y> = 3
        let far = Point::new(dvector![t.cosh(), t.sinh(), 0.0]).unwrap();
        let p_half = decode_link(&origin, &far, &decoder).unwrap();
        assert_relative_eq!(p_half, 0.5, epsilon = 1e-12);

        // Monotone decreasing along a geodesic sweep.
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let t = k as f64 * 0.3;
            let q = Point::new(dvector![t.cosh(), t.sinh(), 0.0]).unwrap();
            let p = decode_link(&origin, &q, &decoder).unwrap();
            assert!(p < last + 1e-15);
            last = p;
        }
        assert!(LinkDecoder::new(1.0, 0.0).is_err());
    }

    #[test]
    fn decode_class_examples() {
        let decoder = ClassDecoder::zeros(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_point(2, 2.0, &mut rng);
        let probs = decode_class(&h, &decoder).unwrap();
        for p in probs.iter() {
            assert_relative_eq!(*p, 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_relative_eq!(probs.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn metric_auc_examples() {
        let auc = metric_auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_relative_eq!(auc, 1.0);

        // Ties contribute one half.
        let auc = metric_auc(&[0.5, 0.5], &[true, false]).unwrap();
        assert_relative_eq!(auc, 0.5);

        assert!(matches!(
            metric_auc(&[0.5, 0.4], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));

        // Random scores vs labels: AUC near 1/2.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.5)).collect();
        let auc = metric_auc(&scores, &labels).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "random AUC {auc}");
    }

    #[test]
    fn metric_f1_examples() {
        let f1 = metric_f1(&[0, 1, 1, 0], &[0, 1, 1, 0], 2).unwrap();
        assert_relative_eq!(f1, 1.0);
        let f1 = metric_f1(&[0, 0, 0, 0], &[0, 1, 1, 0], 2).unwrap();
        assert!(f1 < 1.0);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        // 3-node graph, dims <= 4, both tasks.
        let graph = tiny_graph(41);
        for task in [Task::LinkPrediction, Task::NodeClassification] {
            let config = TrainConfig {
                dims: vec![2, 2],
                ..Default::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(43);
            let layers = vec![
                LayerParams::random(2, 2, &mut rng),
                LayerParams::random(2, 2, &mut rng),
            ];
            let decoder = match task {
                Task::LinkPrediction => Decoder::Link(LinkDecoder::new(1.3, 0.7).unwrap()),
                Task::NodeClassification => {
                    let w = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let b = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
                    Decoder::Class(ClassDecoder { weight: w, bias: b })
                }
            };
            let (params, f, g) = training_problem(&graph, task, &config, &layers, &decoder).unwrap();
            let boxed: Box<dyn Fn(&[Param]) -> Vec<DMatrix<f64>>> = Box::new(g);
            let report = opt::fd_check(&f, &params, boxed.as_ref(), 1e-4).unwrap();
            assert!(
                report.pass(),
                "gradients off for {task:?}: {:?}",
                report.relative_errors
            );
        }
    }

    #[test]
    fn training_loss_monotone_and_invariants_kept() {
        let graph = tiny_graph(47);
        let config = TrainConfig {
            dims: vec![2, 2],
            steps: 25,
            ..Default::default()
        };
        let model = train(&graph, Task::LinkPrediction, &config).unwrap();
        for pair in model.trace.windows(2) {
            assert!(pair[1].loss <= pair[0].loss + 1e-12, "loss increased");
        }
        assert!(model.constraint_max_dev < 1e-9);
        assert!(model.repr_max_dev < 1e-8);
    }

    #[test]
    fn two_community_toy_run_clears_both_tasks() {
        // Module-level end-to-end check on a two-community graph dense
        // enough that the LP information ceiling sits above the bar
        // (uniform negatives make sparse SBMs top out much lower).
        let mut nc_hits = 0;
        let mut lp_hits = 0;
        for seed in [0u64, 1, 2] {
            let graph =
                crate::data::two_community_graph(40, 0.8, 0.02, 0.6, seed).unwrap();
            let config = TrainConfig {
                dims: vec![2, 2],
                steps: 60,
                seed,
                self_weight: Some(0.5),
                opt: opt::OptimizerConfig {
                    max_iters: 1,
                    restarts: 1,
                    grad_tol: 1e-7,
                    ..Default::default()
                },
                validate_invariants: false,
            };
            let nc = train(&graph, Task::NodeClassification, &config).unwrap();
            let acc =
                evaluate_nc_accuracy(&nc.layers, &graph, &nc.decoder, Split::Test, Some(0.5))
                    .unwrap();
            let lp = train(&graph, Task::LinkPrediction, &config).unwrap();
            let auc =
                evaluate_lp(&lp.layers, &lp.decoder, &graph, Split::Test, Some(0.5)).unwrap();
            if acc >= 0.9 {
                nc_hits += 1;
            }
            if auc >= 0.85 {
                lp_hits += 1;
            }
        }
        assert!(nc_hits >= 2, "NC accuracy >= 0.9 on only {nc_hits}/3 seeds");
        assert!(lp_hits >= 2, "LP AUC >= 0.85 on only {lp_hits}/3 seeds");
    }

    #[test]
    fn initial_lp_loss_is_balanced_coin() {
        // With r_fd at the mean initial squared distance and t = 1, the
        // starting probabilities sit near 1/2, so the summed loss starts
        // near -log(1/2) per sample. Build the exactly-balanced case: all
        // pair distances equal.
        let features = DMatrix::zeros(3, 2); // every node lifts to the origin
        let graph = GraphData::new(
            3,
            vec![(0, 1), (1, 2)],
            features,
            None,
            vec![Split::Train; 3],
            EdgeSplit {
                train_pos: vec![(0, 1), (1, 2)],
                train_neg: vec![(0, 2), (0, 1)],
                ..Default::default()
            },
        )
        .unwrap();
        let config = TrainConfig {
            dims: vec![2],
            steps: 1,
            ..Default::default()
        };
        let eval = build_eval(&graph, Task::LinkPrediction, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layers = vec![LayerParams::random(2, 2, &mut rng)];
        // All representations coincide, so every d^2 is equal; set r_fd to
        // that common value.
        let decoder = Decoder::Link(LinkDecoder::new(0.0, 1.0).unwrap());
        let params = model_params(&layers, &decoder);
        let loss = eval.loss(&params);
        let expected = -(0.5_f64.ln()) * eval.lp_samples.len() as f64;
        assert_relative_eq!(loss, expected, epsilon = 1e-9);
    }
}
