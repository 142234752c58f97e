//! Command-line front end: dataset generation, training, evaluation,
//! decision-boundary export, and privacy accounting.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dpqml::accountant::training_epsilon;
use dpqml::data;
use dpqml::optim::PrivacyConfig;
use dpqml::train::{
    boundary_grid, build_dataset, evaluate, load_model, save_model, train, ModelKind, Task,
    TrainConfig,
};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dpqml",
    version,
    about = "Train variational quantum classifiers and MLP baselines, optionally under (epsilon, delta)-differential privacy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a 2D benchmark dataset and write it as CSV (x1,x2,label).
    GenData(GenDataArgs),
    /// Train a model and write a JSON report (plus optional CSV metrics and
    /// a model file).
    Train(TrainArgs),
    /// Score a saved model on a task's test split.
    Eval(EvalArgs),
    /// Compute the (epsilon, delta) guarantee of a training schedule.
    Epsilon(EpsilonArgs),
    /// Sample a trained 2D model's class-1 probability on a grid (x1,x2,p1).
    Boundary(BoundaryArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// One of: blobs, moons, circles
    #[arg(long)]
    task: Task,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coordinate noise for moons/circles (defaults: 0.1 / 0.05)
    #[arg(long)]
    noise: Option<f64>,
    /// Inner-circle radius for circles
    #[arg(long, default_value_t = data::DEFAULT_CIRCLES_FACTOR)]
    factor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config file mirroring the TrainConfig fields; mutually exclusive
    /// with --task/--model
    #[arg(long, conflicts_with_all = ["task", "model"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    task: Option<Task>,
    #[arg(long, required_unless_present = "config")]
    model: Option<ModelKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    rmsprop_alpha: Option<f64>,
    #[arg(long)]
    rmsprop_eps: Option<f64>,
    /// Master seed (defaults to 0 without a config file)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Train with the differentially private optimizer
    #[arg(long)]
    dp: bool,
    /// Noise multiplier sigma (requires --dp)
    #[arg(long, requires = "dp")]
    sigma: Option<f64>,
    /// L2 clip bound S
    #[arg(long, requires = "dp", default_value_t = 1.0)]
    clip: f64,
    #[arg(long, requires = "dp", default_value_t = 1)]
    microbatch: usize,
    #[arg(long, requires = "dp", default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    mnist_images: Option<PathBuf>,
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
    #[arg(long)]
    train_subset: Option<usize>,
    #[arg(long)]
    test_subset: Option<usize>,
    /// Use the full filtered image set instead of the desk-scale subsets
    #[arg(long)]
    full_mnist: bool,
    #[arg(long)]
    mlp_hidden: Option<usize>,
    /// Report JSON path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch metrics CSV path
    #[arg(long)]
    metrics_csv: Option<PathBuf>,
    /// Trained model JSON path
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    n_samples: usize,
    #[arg(long)]
    mnist_images: Option<PathBuf>,
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
    #[arg(long)]
    train_subset: Option<usize>,
    #[arg(long)]
    test_subset: Option<usize>,
    #[arg(long)]
    full_mnist: bool,
}

#[derive(Args)]
struct EpsilonArgs {
    /// Training set size
    #[arg(long)]
    n: usize,
    #[arg(long)]
    batch: usize,
    #[arg(long)]
    epochs: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long, default_value_t = -12.0, allow_negative_numbers = true)]
    xmin: f64,
    #[arg(long, default_value_t = 12.0, allow_negative_numbers = true)]
    xmax: f64,
    #[arg(long, default_value_t = -12.0, allow_negative_numbers = true)]
    ymin: f64,
    #[arg(long, default_value_t = 12.0, allow_negative_numbers = true)]
    ymax: f64,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Epsilon(args) => run_epsilon(args),
        Command::Boundary(args) => run_boundary(args),
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let examples = match args.task {
        Task::Blobs => data::make_blobs(args.n, args.seed)?,
        Task::Moons => data::make_moons(
            args.n,
            args.noise.unwrap_or(data::DEFAULT_MOONS_NOISE),
            args.seed,
        )?,
        Task::Circles => data::make_circles(
            args.n,
            args.factor,
            args.noise.unwrap_or(data::DEFAULT_CIRCLES_NOISE),
            args.seed,
        )?,
        Task::Mnist01 => bail!("gen-data handles the synthetic 2D tasks only"),
    };
    data::write_dataset_csv(&args.out, &examples)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} examples to {}",
        examples.len(),
        args.out.display()
    );
    Ok(())
}

fn config_from_args(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => TrainConfig::new(
            args.task.unwrap(),
            args.model.unwrap(),
            args.seed.unwrap_or(0),
        ),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.lr {
        config.lr = v;
    }
    if let Some(v) = args.momentum {
        config.momentum = v;
    }
    if let Some(v) = args.rmsprop_alpha {
        config.rmsprop_alpha = v;
    }
    if let Some(v) = args.rmsprop_eps {
        config.rmsprop_eps = v;
    }
    if let Some(v) = args.n_samples {
        config.n_samples = v;
    }
    if args.dp {
        let sigma = args
            .sigma
            .context("--dp requires --sigma (the noise multiplier)")?;
        config.privacy = Some(PrivacyConfig {
            clip_s: args.clip,
            noise_multiplier: sigma,
            microbatch_size: args.microbatch,
            delta: args.delta,
        });
    }
    if args.mnist_images.is_some() {
        config.mnist_images = args.mnist_images.clone();
    }
    if args.mnist_labels.is_some() {
        config.mnist_labels = args.mnist_labels.clone();
    }
    if args.train_subset.is_some() {
        config.train_subset = args.train_subset;
    }
    if args.test_subset.is_some() {
        config.test_subset = args.test_subset;
    }
    if args.full_mnist {
        config.full_mnist = true;
    }
    if let Some(v) = args.mlp_hidden {
        config.mlp_hidden = v;
    }
    Ok(config)
}

fn run_train(args: TrainArgs) -> Result<()> {
    let config = config_from_args(&args)?;
    let outcome = train(&config)?;
    let report = &outcome.report;

    println!(
        "task={} model={} epochs={} final_test_acc={:.4}",
        config.task, config.model, report.epochs, report.final_test_acc
    );
    if let Some(eps) = report.epsilon {
        let delta = config.privacy.as_ref().map(|p| p.delta).unwrap_or(0.0);
        println!("privacy: ({eps:.6}, {delta})-DP");
    }
    println!("wall_seconds={:.2}", report.wall_seconds);

    if let Some(path) = &args.out {
        let mut f =
            fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        f.write_all(report.to_json().as_bytes())?;
        println!("report: {}", path.display());
    }
    if let Some(path) = &args.metrics_csv {
        report.write_metrics_csv(path)?;
        println!("metrics: {}", path.display());
    }
    if let Some(path) = &args.save_model {
        save_model(&outcome.model, path)?;
        println!("model: {}", path.display());
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let model = load_model(&args.model_file)?;
    let mut config = TrainConfig::new(args.task, ModelKind::Vqc, args.seed);
    config.n_samples = args.n_samples;
    config.mnist_images = args.mnist_images;
    config.mnist_labels = args.mnist_labels;
    config.train_subset = args.train_subset;
    config.test_subset = args.test_subset;
    config.full_mnist = args.full_mnist;
    if args.task == Task::Mnist01
        && (config.mnist_images.is_none() || config.mnist_labels.is_none())
    {
        bail!("task mnist01 needs --mnist-images and --mnist-labels");
    }
    let (_train, test) = build_dataset(&config)?;
    let accuracy = evaluate(
        |x| {
            model
                .probs(x)
                .expect("model incompatible with this task's feature size")
        },
        &test,
    )?;
    println!("test_acc={accuracy:.4} on {} examples", test.len());
    Ok(())
}

fn run_epsilon(args: EpsilonArgs) -> Result<()> {
    let result = training_epsilon(args.n, args.batch, args.epochs, args.sigma, args.delta)?;
    println!("epsilon = {:.6}", result.epsilon);
    println!("best_order = {}", result.best_order);
    println!(
        "({:.6}, {})-DP after {} steps at q = {}",
        result.epsilon,
        args.delta,
        args.epochs * (args.n / args.batch),
        args.batch as f64 / args.n as f64
    );
    Ok(())
}

fn run_boundary(args: BoundaryArgs) -> Result<()> {
    let model = load_model(&args.model_file)?;
    let rows = boundary_grid(
        |x| {
            model
                .probs(x)
                .expect("boundary export needs a 2-feature model")
        },
        (args.xmin, args.xmax, args.ymin, args.ymax),
        args.resolution,
    )?;
    let mut out = String::from("x1,x2,p1\n");
    for (x1, x2, p1) in &rows {
        out.push_str(&format!("{x1},{x2},{p1}\n"));
    }
    fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} grid points to {}", rows.len(), args.out.display());
    Ok(())
}
