//! Synthetic data generators: offset curves, trees and their hyperbolic
//! stress embeddings, and a two-community graph for the network tests.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gcn::{EdgeSplit, GraphData, Split};
use crate::group::{origin_boost, rotation_embed};
use crate::lorentz::{
    exp_map, frechet_mean_uniform, geodesic_distance, log_map, sample_wrapped_normal_rng, Point,
    Tangent,
};
use crate::nested::{embed, NestingLevel};

/// Points in `L^2` on a rotated, offset copy of `L^1` plus wrapped-normal
/// noise, recentered so the Frechet mean sits at the origin (within 1e-3).
///
/// With `r0 != 0` the generating submanifold does not pass through the
/// data's mean, which is exactly the regime where mean-anchored baselines
/// struggle.
pub fn toy_offset_curve(count: usize, sigma: f64, r0: f64, seed: u64) -> Result<Vec<Point>> {
    if count < 2 {
        return Err(Error::input("toy_offset_curve: need at least 2 points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let rotation = DMatrix::from_row_slice(
        2,
        2,
        &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
    );
    let level = NestingLevel::new(rotation_embed(&rotation)?, r0)?;

    // Curve parameters symmetric about zero: +/- pairs.
    let mut params = Vec::with_capacity(count);
    for _ in 0..count / 2 {
        let t = rng.gen_range(0.0..1.5);
        params.push(t);
        params.push(-t);
    }
    if params.len() < count {
        params.push(0.0);
    }

    let mut points = Vec::with_capacity(count);
    for &t in &params {
        let base = embed(&level, &Point::lift(&DVector::from_element(1, t))?)?;
        let noisy = if sigma > 0.0 {
            sample_wrapped_normal_rng(&base, sigma, 1, &mut rng)?.pop().unwrap()
        } else {
            base
        };
        points.push(noisy);
    }

    // Center: the boost carrying the mean to the origin transports the
    // Frechet mean exactly.
    let mean = frechet_mean_uniform(&points)?;
    let recenter = origin_boost(&mean).inverse();
    let centered: Vec<Point> = points
        .iter()
        .map(|p| recenter.apply(p))
        .collect::<Result<_>>()?;
    debug_assert!(
        geodesic_distance(&frechet_mean_uniform(&centered)?, &Point::origin(2))? < 1e-3
    );
    Ok(centered)
}

// ---- Trees -----------------------------------------------------------------

/// How to build a tree dataset.
#[derive(Debug, Clone)]
pub enum TreeSpec {
    /// Fully balanced: every internal node has `branching` children,
    /// `depth` levels below the root.
    Balanced { branching: usize, depth: usize },
    /// A base tree with `count` randomly chosen leaves removed one at a
    /// time (an unbalancing edit that keeps the tree connected).
    EdgeRemoved {
        base: Box<TreeSpec>,
        seed: u64,
        count: usize,
    },
    /// Explicit edge list (0-indexed, one edge per entry).
    Edges(Vec<(usize, usize)>),
}

/// An undirected tree as node count plus edge list.
#[derive(Debug, Clone)]
pub struct TreeGraph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Build a tree from a spec; the result is validated connected and acyclic.
pub fn build_tree(spec: &TreeSpec) -> Result<TreeGraph> {
    let tree = match spec {
        TreeSpec::Balanced { branching, depth } => {
            if *branching < 2 {
                return Err(Error::input("balanced tree needs branching >= 2"));
            }
            let mut edges = Vec::new();
            let mut frontier = vec![0usize];
            let mut next_id = 1usize;
            for _ in 0..*depth {
                let mut next_frontier = Vec::new();
                for &parent in &frontier {
                    for _ in 0..*branching {
                        edges.push((parent, next_id));
                        next_frontier.push(next_id);
                        next_id += 1;
                    }
                }
                frontier = next_frontier;
            }
            TreeGraph {
                num_nodes: next_id,
                edges,
            }
        }
        TreeSpec::EdgeRemoved { base, seed, count } => {
            let base_tree = build_tree(base)?;
            remove_leaves(&base_tree, *seed, *count)?
        }
        TreeSpec::Edges(edges) => {
            let num_nodes = edges
                .iter()
                .flat_map(|&(u, v)| [u, v])
                .max()
                .map_or(1, |m| m + 1);
            TreeGraph {
                num_nodes,
                edges: edges.clone(),
            }
        }
    };
    validate_tree(&tree)?;
    Ok(tree)
}

/// Delete `count` random leaves (never the root), then relabel compactly.
fn remove_leaves(tree: &TreeGraph, seed: u64, count: usize) -> Result<TreeGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alive = vec![true; tree.num_nodes];
    let mut edges: Vec<(usize, usize)> = tree.edges.clone();
    for _ in 0..count {
        let mut degree = vec![0usize; tree.num_nodes];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let leaves: Vec<usize> = (0..tree.num_nodes)
            .filter(|&i| alive[i] && i != 0 && degree[i] == 1)
            .collect();
        let Some(&leaf) = leaves.choose(&mut rng) else {
            return Err(Error::input(
                "leaf removal exhausted the tree (count too large)",
            ));
        };
        alive[leaf] = false;
        edges.retain(|&(u, v)| u != leaf && v != leaf);
    }
    // Compact relabeling.
    let mut remap = vec![usize::MAX; tree.num_nodes];
    let mut next = 0usize;
    for (i, &keep) in alive.iter().enumerate() {
        if keep {
            remap[i] = next;
            next += 1;
        }
    }
    Ok(TreeGraph {
        num_nodes: next,
        edges: edges.iter().map(|&(u, v)| (remap[u], remap[v])).collect(),
    })
}

fn validate_tree(tree: &TreeGraph) -> Result<()> {
    if tree.num_nodes == 0 {
        return Err(Error::input("empty tree"));
    }
    if tree.edges.len() + 1 != tree.num_nodes {
        return Err(Error::input(format!(
            "not a tree: {} nodes, {} edges",
            tree.num_nodes,
            tree.edges.len()
        )));
    }
    let reached = bfs_distances(tree.num_nodes, &tree.edges, 0);
    if reached.contains(&usize::MAX) {
        return Err(Error::input("tree is not connected"));
    }
    Ok(())
}

/// Unit-edge BFS distances from `source` (usize::MAX when unreachable).
pub fn bfs_distances(num_nodes: usize, edges: &[(usize, usize)], source: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); num_nodes];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut dist = vec![usize::MAX; num_nodes];
    dist[source] = 0;
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Settings for the stress embedder.
#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub sweeps: usize,
    pub step: f64,
    /// Initial per-edge length used by the hierarchical placement.
    pub edge_scale: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            sweeps: 300,
            step: 0.1,
            edge_scale: 1.0,
            seed: 0,
        }
    }
}

/// Outcome of [`embed_tree`].
#[derive(Debug, Clone)]
pub struct TreeEmbedding {
    pub positions: Vec<Point>,
    /// Fitted global scale relating graph distances to geodesic ones.
    pub scale: f64,
    /// Final stress `sum_{u<v} (d_L(x_u,x_v) - scale * d_graph(u,v))^2`.
    pub stress: f64,
    /// Mean relative distortion `|d_L / (scale * d_graph) - 1|` over pairs.
    pub mean_distortion: f64,
}

/// Embed a connected graph in `L^n` by minimizing all-pairs stress against
/// BFS distances, with a jointly fitted scale.
///
/// Nodes are first placed hierarchically (children in fresh random tangent
/// directions from their parent), then refined by coordinate-wise
/// Riemannian descent through the exp/log maps at the iterates.
pub fn embed_tree(tree: &TreeGraph, n: usize, config: &EmbedConfig) -> Result<TreeEmbedding> {
    let count = tree.num_nodes;
    if count < 2 {
        return Err(Error::input("embed_tree: need at least 2 nodes"));
    }
    let reached = bfs_distances(count, &tree.edges, 0);
    if reached.contains(&usize::MAX) {
        return Err(Error::input("embed_tree: graph is not connected"));
    }
    let graph_dist: Vec<Vec<usize>> = (0..count)
        .map(|s| bfs_distances(count, &tree.edges, s))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Hierarchical initialization along a BFS order.
    let mut adj = vec![Vec::new(); count];
    for &(u, v) in &tree.edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut positions: Vec<Option<Point>> = vec![None; count];
    positions[0] = Some(Point::origin(n));
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let at = positions[u].clone().unwrap();
        for &v in &adj[u] {
            if positions[v].is_none() {
                let dir = crate::lorentz::random_tangent(&at, 1.0, &mut rng);
                let norm = dir.norm().max(1e-9);
                let step = dir.scale(config.edge_scale / norm);
                positions[v] = Some(exp_map(&at, &step)?);
                queue.push_back(v);
            }
        }
    }
    let mut positions: Vec<Point> = positions.into_iter().map(Option::unwrap).collect();

    let fit_scale = |positions: &[Point]| -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for u in 0..count {
            for v in (u + 1)..count {
                let g = graph_dist[u][v] as f64;
                num += geodesic_distance(&positions[u], &positions[v])? * g;
                den += g * g;
            }
        }
        Ok((num / den).max(1e-6))
    };
    let stress_of = |positions: &[Point], c: f64| -> Result<f64> {
        let mut total = 0.0;
        for u in 0..count {
            for v in (u + 1)..count {
                let d = geodesic_distance(&positions[u], &positions[v])?;
                let target = c * graph_dist[u][v] as f64;
                total += (d - target) * (d - target);
            }
        }
        Ok(total)
    };

    let mut scale = fit_scale(&positions)?;
    let mut stress = stress_of(&positions, scale)?;
    let mut step = config.step;
    for _ in 0..config.sweeps {
        let snapshot = positions.clone();
        for u in 0..count {
            // Riemannian gradient of the per-node stress terms.
            let mut grad = DVector::zeros(n + 1);
            for v in 0..count {
                if v == u {
                    continue;
                }
                let d = geodesic_distance(&positions[u], &positions[v])?;
                if d < 1e-9 {
                    continue;
                }
                let target = scale * graph_dist[u][v] as f64;
                let log = log_map(&positions[u], &positions[v])?;
                grad += log.components() * (-2.0 * (d - target) / d);
            }
            let mut update = Tangent::new_unchecked(positions[u].clone(), grad * (-step));
            // Trust region: a single node's pull can be a large multiple of
            // the edge scale; cap the move so exp stays well-conditioned.
            let norm = update.norm();
            let cap = 2.0 * config.edge_scale;
            if norm > cap {
                update = update.scale(cap / norm);
            }
            positions[u] = exp_map(&positions[u], &update)?;
        }
        let new_scale = fit_scale(&positions)?;
        let new_stress = stress_of(&positions, new_scale)?;
        if new_stress < stress {
            stress = new_stress;
            scale = new_scale;
        } else {
            positions = snapshot;
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }

    let mut distortion = 0.0;
    let mut pairs = 0usize;
    for u in 0..count {
        for v in (u + 1)..count {
            let d = geodesic_distance(&positions[u], &positions[v])?;
            let target = scale * graph_dist[u][v] as f64;
            distortion += (d / target - 1.0).abs();
            pairs += 1;
        }
    }
    Ok(TreeEmbedding {
        positions,
        scale,
        stress,
        mean_distortion: distortion / pairs as f64,
    })
}

// ---- Two-community benchmark graph ----------------------------------------

/// Stochastic block model with two blocks, one-hot-plus-noise features,
/// stratified 60/20/20 node masks, and seeded edge splits with one sampled
/// negative per positive edge.
pub fn two_community_graph(
    community_size: usize,
    p_in: f64,
    p_out: f64,
    feature_noise: f64,
    seed: u64,
) -> Result<GraphData> {
    if community_size < 2 {
        return Err(Error::input("two_community_graph: communities too small"));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_in <= p_out {
        return Err(Error::input(format!(
            "two_community_graph: need 1 >= p_in > p_out >= 0, got {p_in} vs {p_out}"
        )));
    }
    let n = 2 * community_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |i: usize| i / community_size;

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block(u) == block(v) { p_in } else { p_out };
            if rng.gen_range(0.0..1.0) < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = DMatrix::zeros(n, 2);
    for i in 0..n {
        features[(i, block(i))] = 1.0;
        for j in 0..2 {
            features[(i, j)] += feature_noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let labels: Vec<usize> = (0..n).map(block).collect();

    // Stratified 60/20/20 node masks.
    let mut node_split = vec![Split::Train; n];
    for b in 0..2 {
        let mut ids: Vec<usize> =
            (b * community_size..(b + 1) * community_size).collect();
        ids.shuffle(&mut rng);
        let train_end = (ids.len() as f64 * 0.6).round() as usize;
        let val_end = (ids.len() as f64 * 0.8).round() as usize;
        for (pos, &i) in ids.iter().enumerate() {
            node_split[i] = if pos < train_end {
                Split::Train
            } else if pos < val_end {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    // Positive edge splits.
    let mut shuffled = edges.clone();
    shuffled.shuffle(&mut rng);
    let train_end = (shuffled.len() as f64 * 0.6).round() as usize;
    let val_end = (shuffled.len() as f64 * 0.8).round() as usize;
    let train_pos = shuffled[..train_end].to_vec();
    let val_pos = shuffled[train_end..val_end].to_vec();
    let test_pos = shuffled[val_end..].to_vec();

    // One distinct uniform non-edge per positive edge.
    let edge_set: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut negatives = std::collections::HashSet::new();
    let sample_negs = |count: usize,
                           rng: &mut ChaCha8Rng,
                           negatives: &mut std::collections::HashSet<(usize, usize)>|
     -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            let (u, v) = (u.min(v), u.max(v));
            if u == v || edge_set.contains(&(u, v)) || negatives.contains(&(u, v)) {
                continue;
            }
            negatives.insert((u, v));
            out.push((u, v));
        }
        out
    };
    let train_neg = sample_negs(train_pos.len(), &mut rng, &mut negatives);
    let val_neg = sample_negs(val_pos.len(), &mut rng, &mut negatives);
    let test_neg = sample_negs(test_pos.len(), &mut rng, &mut negatives);

    GraphData::new(
        n,
        edges,
        features,
        Some(labels),
        node_split,
        EdgeSplit {
            train_pos,
            val_pos,
            test_pos,
            train_neg,
            val_neg,
            test_neg,
        },
    )
}
