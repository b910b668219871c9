//! Command-line driver: dataset generation, dimensionality reduction,
//! variance sweeps, network training/evaluation, plot emission, and a
//! self-test of the library's geometric invariants.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hypernest::config::Tolerances;
use hypernest::data::{
    build_tree, embed_tree, toy_offset_curve, two_community_graph, EmbedConfig, TreeSpec,
};
use hypernest::gcn::{self, Split, Task, TrainConfig};
use hypernest::io;
use hypernest::lorentz::{sample_wrapped_normal, to_poincare, Point};
use hypernest::reduce::{self, FitConfig, Method, ReductionModel};

mod config;
mod selftest;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "hypernest",
    about = "Hyperbolic geometry toolkit: nested-hyperboloid reduction and hyperbolic GCNs",
    version
)]
struct Cli {
    /// Seed for every random choice this invocation makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Validation tolerance for hyperboloid inputs read from files.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Fit a dimensionality-reduction model to a point cloud.
    Reduce(ReduceArgs),
    /// Reconstruction-error sweep over wrapped-normal variances.
    Sweep(SweepArgs),
    /// Train or evaluate the graph network.
    Gcn {
        #[command(subcommand)]
        action: GcnAction,
    },
    /// Emit Poincare-disk plot data for a point cloud.
    Plot(PlotArgs),
    /// Run the library invariant suite and print a pass/fail table.
    Selftest,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Wrapped normal sample on L^n centered at the origin.
    WrappedNormal {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offset curve in L^2 (trend not through the mean).
    OffsetCurve {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
        #[arg(long, default_value_t = 0.5)]
        r0: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balanced tree (optionally with leaves removed), with an optional
    /// stress embedding of the nodes.
    Tree {
        #[arg(long)]
        branching: usize,
        #[arg(long)]
        depth: usize,
        /// Remove this many random leaves.
        #[arg(long, default_value_t = 0)]
        remove: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also embed the tree into L^n and write `<out>.points.csv`.
        #[arg(long)]
        embed_dim: Option<usize>,
    },
    /// Two-community stochastic block model graph bundle.
    TwoCommunity {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0.3)]
        p_in: f64,
        #[arg(long, default_value_t = 0.02)]
        p_out: f64,
        #[arg(long, default_value_t = 0.6)]
        noise: f64,
        /// Output stem; writes `<stem>.edges.tsv` and friends.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    target_dim: usize,
    #[arg(long)]
    out_model: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long)]
    joint_refine: bool,
    /// Evaluate a stored model instead of fitting (model path).
    #[arg(long)]
    eval_model: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "nh" => Ok(Method::Nested),
        "tpca" => Ok(Method::TangentPca),
        other => Err(format!("unknown method {other:?} (expected nh or tpca)")),
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    target_dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.6, 1.0, 1.4, 1.8, 2.0])]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2])]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GcnAction {
    Train(GcnTrainArgs),
    Eval(GcnEvalArgs),
}

#[derive(Args)]
struct GcnTrainArgs {
    /// Graph bundle stem (expects `<stem>.edges.tsv` and friends).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    /// Per-layer output dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 2])]
    dims: Vec<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Self-loop aggregation weight (uniform when omitted).
    #[arg(long)]
    self_weight: Option<f64>,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct GcnEvalArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    match s {
        "lp" => Ok(Task::LinkPrediction),
        "nc" => Ok(Task::NodeClassification),
        other => Err(format!("unknown task {other:?} (expected lp or nc)")),
    }
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    /// Reduction model whose reconstructed curve is drawn (1-dimensional
    /// nested stacks only).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReduceReport<'a> {
    method: &'a str,
    target_dim: usize,
    mean_error: f64,
    std_error: f64,
    seconds: f64,
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let run_config = match &cli.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(run_config.seed);
    let tol = Tolerances {
        point: cli.tol.unwrap_or(run_config.tol),
        ..Tolerances::default()
    };
    let quiet = cli.quiet;
    let say = |msg: String| {
        if !quiet {
            println!("{msg}");
        }
    };

    match cli.command {
        Command::Generate { kind } => generate(kind, seed, &run_config, say),
        Command::Reduce(args) => cmd_reduce(args, seed, &tol, &run_config, say),
        Command::Sweep(args) => cmd_sweep(args, seed, &run_config, say),
        Command::Gcn { action } => match action {
            GcnAction::Train(args) => cmd_gcn_train(args, seed, &run_config, say),
            GcnAction::Eval(args) => cmd_gcn_eval(args, say),
        },
        Command::Plot(args) => cmd_plot(args, &tol, say),
        Command::Selftest => selftest::run(seed, quiet),
    }
}

fn generate(
    kind: GenerateKind,
    seed: u64,
    run_config: &RunConfig,
    say: impl Fn(String),
) -> Result<()> {
    match kind {
        GenerateKind::WrappedNormal {
            dim,
            sigma,
            count,
            out,
        } => {
            if sigma <= 0.0 {
                bail!("usage: --sigma must be positive (got {sigma})");
            }
            if dim < 1 || count == 0 {
                bail!("usage: --dim must be >= 1 and --count positive");
            }
            let points = sample_wrapped_normal(&Point::origin(dim), sigma, count, seed)?;
            io::write_points(&out, &points)?;
            say(format!("wrote {} points to {}", count, out.display()));
        }
        GenerateKind::OffsetCurve {
            count,
            sigma,
            r0,
            out,
        } => {
            if sigma < 0.0 {
                bail!("usage: --sigma must be nonnegative (got {sigma})");
            }
            let points = toy_offset_curve(count, sigma, r0, seed)?;
            io::write_points(&out, &points)?;
            say(format!("wrote {} points to {}", count, out.display()));
        }
        GenerateKind::Tree {
            branching,
            depth,
            remove,
            out,
            embed_dim,
        } => {
            let mut spec = TreeSpec::Balanced { branching, depth };
            if remove > 0 {
                spec = TreeSpec::EdgeRemoved {
                    base: Box::new(spec),
                    seed,
                    count: remove,
                };
            }
            let tree = build_tree(&spec)?;
            let mut body = String::new();
            for &(u, v) in &tree.edges {
                body.push_str(&format!("{u}\t{v}\n"));
            }
            std::fs::write(&out, body)?;
            say(format!(
                "wrote tree with {} nodes / {} edges to {}",
                tree.num_nodes,
                tree.edges.len(),
                out.display()
            ));
            if let Some(n) = embed_dim {
                let embed_config = EmbedConfig {
                    seed,
                    ..run_config.embed.to_config()
                };
                let embedding = embed_tree(&tree, n, &embed_config)?;
                let points_path = out.with_extension("points.csv");
                io::write_points(&points_path, &embedding.positions)?;
                say(format!(
                    "embedded into L^{n} (distortion {:.3}) -> {}",
                    embedding.mean_distortion,
                    points_path.display()
                ));
            }
        }
        GenerateKind::TwoCommunity {
            size,
            p_in,
            p_out,
            noise,
            out,
        } => {
            let graph = two_community_graph(size, p_in, p_out, noise, seed)?;
            let files = io::write_graph(&out, &graph)?;
            for f in files {
                say(format!("wrote {}", f.display()));
            }
        }
    }
    Ok(())
}

fn cmd_reduce(
    args: ReduceArgs,
    seed: u64,
    tol: &Tolerances,
    run_config: &RunConfig,
    say: impl Fn(String),
) -> Result<()> {
    let data = io::read_points_with_tol(&args.input, tol)?;
    if args.target_dim >= data[0].dim() || args.target_dim < 1 {
        bail!(
            "usage: --target-dim must satisfy 1 <= m < {} (data dimension)",
            data[0].dim()
        );
    }

    if let Some(model_path) = &args.eval_model {
        let model = match io::read_model(model_path)? {
            io::ModelFile::Stack(s) => ReductionModel::Nested(s),
            io::ModelFile::TangentPca(m) => ReductionModel::TangentPca(m),
            io::ModelFile::Gcn { .. } => bail!("expected a reduction model, found a network"),
        };
        let result = reduce::evaluate(&model, &data)?;
        println!("mean_error={}", format_full(result.mean_sq_error));
        return Ok(());
    }

    let started = std::time::Instant::now();
    let fit_config = FitConfig {
        opt: run_config.opt.to_config(),
        joint_refine: args.joint_refine,
        warm_start: true,
        seed,
    };
    let result = reduce::fit_with_repeats(
        &data,
        args.method,
        args.target_dim,
        &fit_config,
        args.repeats,
    )?;
    let seconds = started.elapsed().as_secs_f64();
    if let Some(out_model) = &args.out_model {
        io::write_model(out_model, &io::ModelFile::from_reduction(&result.model))?;
        say(format!("model written to {}", out_model.display()));
    }
    println!("mean_error={}", format_full(result.mean_sq_error));
    if let Some(report) = &args.report {
        io::append_jsonl(
            report,
            &ReduceReport {
                method: args.method.label(),
                target_dim: args.target_dim,
                mean_error: result.mean_across_repeats,
                std_error: result.std_error,
                seconds,
                seed,
            },
        )?;
    }
    Ok(())
}

fn cmd_sweep(
    args: SweepArgs,
    seed: u64,
    run_config: &RunConfig,
    say: impl Fn(String),
) -> Result<()> {
    let fit_config = FitConfig {
        opt: run_config.opt.to_config(),
        joint_refine: false,
        warm_start: true,
        seed,
    };
    let seeds: Vec<u64> = args.seeds.iter().map(|s| s.wrapping_add(seed)).collect();
    let rows = reduce::variance_sweep(
        args.dim,
        args.target_dim,
        &args.sigmas,
        args.count,
        &seeds,
        &fit_config,
    )?;
    io::write_sweep_csv(&args.out, &rows)?;
    say(format!("sweep table written to {}", args.out.display()));
    Ok(())
}

fn cmd_gcn_train(
    args: GcnTrainArgs,
    seed: u64,
    run_config: &RunConfig,
    say: impl Fn(String),
) -> Result<()> {
    let graph = io::read_graph(&args.graph)?;
    if args.task == Task::NodeClassification && graph.labels().is_none() {
        bail!("usage: task nc requires a labels file next to the graph bundle");
    }
    let config = TrainConfig {
        dims: args.dims.clone(),
        steps: args.steps.unwrap_or(run_config.gcn.steps),
        seed,
        self_weight: args.self_weight,
        opt: run_config.gcn.to_opt_config(),
        validate_invariants: true,
    };
    let model = gcn::train(&graph, args.task, &config)?;
    io::write_model(
        &args.out_model,
        &io::ModelFile::Gcn {
            layers: model.layers.clone(),
            decoder: model.decoder.clone(),
            self_weight: args.self_weight,
        },
    )?;
    say(format!("checkpoint written to {}", args.out_model.display()));
    if let Some(metrics) = &args.metrics {
        io::write_metric_csv(metrics, &model.trace)?;
        say(format!("metric trace written to {}", metrics.display()));
    }
    let test_metric =
        final_metric(&model.layers, &model.decoder, &graph, args.task, args.self_weight)?;
    println!("test_metric={}", format_full(test_metric));
    Ok(())
}

fn cmd_gcn_eval(args: GcnEvalArgs, _say: impl Fn(String)) -> Result<()> {
    let graph = io::read_graph(&args.graph)?;
    let io::ModelFile::Gcn {
        layers,
        decoder,
        self_weight,
    } = io::read_model(&args.model)?
    else {
        bail!("expected a network checkpoint");
    };
    let test_metric = final_metric(&layers, &decoder, &graph, args.task, self_weight)?;
    println!("test_metric={}", format_full(test_metric));
    Ok(())
}

fn final_metric(
    layers: &[gcn::LayerParams],
    decoder: &gcn::Decoder,
    graph: &gcn::GraphData,
    task: Task,
    self_weight: Option<f64>,
) -> Result<f64> {
    let metric = match task {
        Task::LinkPrediction => {
            gcn::evaluate_lp(layers, decoder, graph, Split::Test, self_weight)?
        }
        Task::NodeClassification => {
            gcn::evaluate_nc_accuracy(layers, graph, decoder, Split::Test, self_weight)?
        }
    };
    Ok(metric)
}

fn cmd_plot(args: PlotArgs, tol: &Tolerances, say: impl Fn(String)) -> Result<()> {
    let data = io::read_points_with_tol(&args.input, tol)?;
    let coords: Vec<_> = data.iter().map(to_poincare).collect();
    let mut polylines = Vec::new();
    if let Some(model_path) = &args.model {
        let io::ModelFile::Stack(stack) = io::read_model(model_path)? else {
            bail!("plot overlays need a nested-stack model");
        };
        if stack.lower_dim() != 1 {
            bail!("curve overlay needs a stack down to L^1");
        }
        // Parameter range covering the projected data, then a 200-sample
        // sweep of the reconstructed curve.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &data {
            let z = hypernest::nested::stack_project(&stack, p)?;
            let t = z.ambient()[1].asinh();
            lo = lo.min(t);
            hi = hi.max(t);
        }
        let margin = 0.25 * (hi - lo).max(0.2);
        let (lo, hi) = (lo - margin, hi + margin);
        let mut line = Vec::with_capacity(200);
        for k in 0..200 {
            let t = lo + (hi - lo) * k as f64 / 199.0;
            let z = Point::lift(&nalgebra::DVector::from_element(1, t.sinh()))?;
            let up = hypernest::nested::stack_reconstruct(&stack, &z)?;
            line.push(to_poincare(&up));
        }
        polylines.push(line);
    }
    io::write_poincare_csv(&args.out, &coords, None)?;
    say(format!("plot data written to {}", args.out.display()));
    if let Some(svg) = &args.svg {
        io::write_poincare_svg(svg, &coords, None, &polylines)?;
        say(format!("svg written to {}", svg.display()));
    }
    Ok(())
}

fn format_full(x: f64) -> String {
    format!("{x:.16e}")
}
