use hypernest::data::two_community_graph;
use hypernest::gcn::*;
use hypernest::opt::OptimizerConfig;
use std::time::Instant;

fn run(p_in: f64, noise: f64, self_w: Option<f64>, steps: usize, dims: Vec<usize>) {
    let mut nc_pass = 0;
    let mut lp_pass = 0;
    for seed in [0u64, 1, 2] {
        let graph = two_community_graph(40, p_in, 0.02, noise, seed).unwrap();
        let t0 = Instant::now();
        let cfg = TrainConfig {
            dims: dims.clone(),
            steps,
            seed,
            self_weight: self_w,
            opt: OptimizerConfig { max_iters: 1, restarts: 1, grad_tol: 1e-7, ..Default::default() },
            validate_invariants: false,
        };
        let nc = train(&graph, Task::NodeClassification, &cfg).unwrap();
        let acc = evaluate_nc_accuracy(&nc.layers, &graph, &nc.decoder, Split::Test, self_w).unwrap();
        let lp = train(&graph, Task::LinkPrediction, &cfg).unwrap();
        let auc = evaluate_lp(&lp.layers, &lp.decoder, &graph, Split::Test, self_w).unwrap();
        if acc >= 0.9 { nc_pass += 1; }
        if auc >= 0.85 { lp_pass += 1; }
        println!("  p_in {p_in} noise {noise} sw {self_w:?} steps {steps} dims {dims:?} seed {seed}: acc {acc:.3} auc {auc:.3} ({:.1}s)", t0.elapsed().as_secs_f64());
    }
    println!("  => NC {nc_pass}/3, LP {lp_pass}/3");
}

fn main() {
    println!("pinned acceptance parameters:");
    run(0.3, 0.6, Some(0.5), 80, vec![2, 2]);
    println!("capability check at denser blocks:");
    run(0.8, 0.6, Some(0.5), 80, vec![2, 2]);
}
