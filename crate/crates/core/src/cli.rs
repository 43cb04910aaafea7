//! Command-line front end.
//!
//! Every task subcommand trains one cell (all candidate learning rates times
//! all replicates), logs each run, prints the cell result and writes
//! task-specific artifacts. `sweep` runs a whole grid described by
//! `key = value` settings, either inline or from a config file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::activations::ActivationKind;
use crate::datasets::{pixel_grid, values_to_image, Dataset};
use crate::error::{Error, Result};
use crate::experiments::{
    aggregate, collect_activation_histogram, parallel_map, run_parabola_demo, run_task, train_single, write_tables,
    CellKey, DataSources, ExperimentResult, RunLog, SweepSpec, Task, TaskData,
};
use crate::model::{load_model, save_model};
use crate::netpbm::{write_pgm, write_ppm};
use crate::network::Network;
use crate::optim::OptimizerKind;
use crate::report::{emit_fit_curve_csv, emit_histogram_csv, render_decision_surface, render_reconstruction};
use crate::training::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "sudonet", version, about = "Train networks with discretized tanh units and reproduce sweep tables")]
pub struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit y = x² with one hidden layer and dump the fit curve over training.
    Parabola(ParabolaArgs),
    /// 2-D checkerboard classification; writes a decision-surface raster.
    Checkerboard(CheckerboardArgs),
    /// Fit sin(x)·cos(y) (scaled) on a grid; scored on a finer test grid.
    Regression(CellArgs),
    /// Memorize a grayscale PGM as a function of pixel coordinates.
    Memorize(MemorizeArgs),
    /// Fully connected autoencoder over a directory of PGM images.
    Autoencode(AutoencodeArgs),
    /// MNIST digit classification from IDX files.
    Mnist(MnistArgs),
    /// Run a full grid; settings are `key=value` pairs or config files.
    Sweep(SweepArgs),
    /// Render a saved 2-input model as a surface (PPM) or image (PGM).
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct ActivationArgs {
    /// Hidden activation: tanh, relu, sudo or r-sudo (sudo-64 style also accepted).
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    /// Output levels L for sudo and r-sudo (L >= 2).
    #[arg(long)]
    pub levels: Option<u32>,
}

impl ActivationArgs {
    pub fn kind(&self) -> Result<ActivationKind> {
        let family = self.activation.trim().to_ascii_lowercase();
        match (family.as_str(), self.levels) {
            ("tanh" | "relu", Some(_)) => Err(Error::config(format!("--levels does not apply to {family}"))),
            ("sudo" | "r-sudo" | "rsudo", None) => {
                Err(Error::config(format!("--activation {family} requires --levels L (L >= 2)")))
            }
            (_, Some(l)) if family.contains('-') && family != "r-sudo" => {
                Err(Error::config(format!("give levels either in --activation {family} or --levels {l}, not both")))
            }
            (_, levels) if family.ends_with(|c: char| c.is_ascii_digit()) && levels.is_none() => family.parse(),
            (_, levels) => ActivationKind::from_parts(&family, levels),
        }
    }
}

#[derive(Debug, Args)]
pub struct CellArgs {
    #[command(flatten)]
    pub activation: ActivationArgs,
    /// Hidden layers (ignored by autoencode).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Units per hidden layer (autoencode: width multiplier).
    #[arg(long)]
    pub width: Option<usize>,
    /// Learning rate; repeat to try several. Defaults to 1e-3, 1e-4, 1e-5.
    #[arg(long)]
    pub lr: Vec<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// sgd (momentum 0.9) or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Minibatch size; 0 trains full-batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Concurrent training runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckerboardArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// Board size n (n×n squares).
    #[arg(long, default_value_t = 4)]
    pub board: usize,
    /// Training points.
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    /// Side of the decision-surface raster.
    #[arg(long, default_value_t = 500)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct MemorizeArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// Grayscale PGM to memorize.
    #[arg(long)]
    pub image: PathBuf,
    /// Bins of the hidden-output histogram.
    #[arg(long, default_value_t = 32)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct AutoencodeArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// Directory of PGM images.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Side images are cropped and resized to.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Test images reconstructed as PGM files.
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct MnistFiles {
    /// Directory with the four standard MNIST file names.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    #[arg(long)]
    pub mnist_images: Option<PathBuf>,
    #[arg(long)]
    pub mnist_labels: Option<PathBuf>,
    #[arg(long)]
    pub mnist_test_images: Option<PathBuf>,
    #[arg(long)]
    pub mnist_test_labels: Option<PathBuf>,
    /// Train on the first N images only.
    #[arg(long)]
    pub train_limit: Option<usize>,
}

impl MnistFiles {
    fn apply(&self, mut src: DataSources) -> DataSources {
        if let Some(dir) = &self.mnist_dir {
            src = src.with_mnist_dir(dir);
        }
        let pick = |flag: &Option<PathBuf>, cur: Option<PathBuf>| flag.clone().or(cur);
        src.mnist_images = pick(&self.mnist_images, src.mnist_images);
        src.mnist_labels = pick(&self.mnist_labels, src.mnist_labels);
        src.mnist_test_images = pick(&self.mnist_test_images, src.mnist_test_images);
        src.mnist_test_labels = pick(&self.mnist_test_labels, src.mnist_test_labels);
        src.mnist_train_limit = self.train_limit;
        src
    }
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    #[command(flatten)]
    pub files: MnistFiles,
}

#[derive(Debug, Args)]
pub struct ParabolaArgs {
    #[command(flatten)]
    pub activation: ActivationArgs,
    /// Hidden units.
    #[arg(long, default_value_t = 2)]
    pub width: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value = "sgd")]
    pub optimizer: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample points on [-1, 1].
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Record the fit curve every K epochs.
    #[arg(long, default_value_t = 100)]
    pub every: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `key=value` settings or paths of config files, applied in order.
    #[arg(required = true)]
    pub settings: Vec<String>,
    /// Overrides the `out` setting.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the `jobs` setting.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RenderKind {
    /// Red/black sign raster over [-1, 1]² (PPM).
    Surface,
    /// Output mapped to 0..255 at every pixel coordinate (PGM).
    Reconstruction,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Model file written by a training subcommand.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "surface")]
    pub kind: RenderKind,
    /// Raster side for surfaces.
    #[arg(long, default_value_t = 500)]
    pub resolution: usize,
    /// Image size for reconstructions.
    #[arg(long, default_value_t = 150)]
    pub image_width: usize,
    #[arg(long, default_value_t = 150)]
    pub image_height: usize,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parabola(a) => parabola(a),
        Command::Checkerboard(a) => {
            let src = DataSources { board: a.board, checkerboard_samples: a.samples, data_seed: a.cell.seed, ..Default::default() };
            let (spec, out) = single_cell(Task::Checkerboard, &a.cell, &src)?;
            write_ppm(&render_decision_surface(&out.net, a.resolution)?, a.cell.out.join("surface.ppm"))?;
            finish(&a.cell.out, &spec, &out)
        }
        Command::Regression(a) => {
            let src = DataSources { data_seed: a.seed, ..Default::default() };
            let (spec, out) = single_cell(Task::Regression, &a, &src)?;
            let side = src.regression_test_side;
            write_pgm(&render_reconstruction(&out.net, side, side)?, a.out.join("prediction.pgm"))?;
            finish(&a.out, &spec, &out)
        }
        Command::Memorize(a) => {
            require_file(&a.image)?;
            let src = DataSources { image: Some(a.image.clone()), data_seed: a.cell.seed, ..Default::default() };
            let (spec, out) = single_cell(Task::Memorize, &a.cell, &src)?;
            let (w, h) = out.data.train.grid.unwrap_or((0, 0));
            write_pgm(&render_reconstruction(&out.net, w, h)?, a.cell.out.join("reconstruction.pgm"))?;
            let hist = collect_activation_histogram(&out.net, &pixel_grid(w, h), a.bins)?;
            emit_histogram_csv(a.cell.out.join("histogram.csv"), &hist)?;
            finish(&a.cell.out, &spec, &out)
        }
        Command::Autoencode(a) => {
            require_dir(&a.corpus)?;
            let src = DataSources {
                corpus: Some(a.corpus.clone()),
                corpus_size: a.size,
                data_seed: a.cell.seed,
                ..Default::default()
            };
            let (spec, out) = single_cell(Task::Autoencode, &a.cell, &src)?;
            write_autoencoder_samples(&out.net, &out.data.eval, a.size, a.samples, &a.cell.out)?;
            finish(&a.cell.out, &spec, &out)
        }
        Command::Mnist(a) => {
            let src = a.files.apply(DataSources { data_seed: a.cell.seed, ..Default::default() });
            for p in [&src.mnist_images, &src.mnist_labels, &src.mnist_test_images, &src.mnist_test_labels]
                .into_iter()
                .flatten()
            {
                require_file(p)?;
            }
            let (spec, out) = single_cell(Task::Mnist, &a.cell, &src)?;
            finish(&a.cell.out, &spec, &out)
        }
        Command::Sweep(a) => sweep(a),
        Command::Render(a) => render(a),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::config(format!("input file not found: {}", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::config(format!("input directory not found: {}", path.display())))
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    s.parse()
}

/// Result of a single-cell run plus what is needed for its artifacts.
struct CellOutput {
    result: ExperimentResult,
    net: Network<f64>,
    data: TaskData,
}

fn default_shape(task: Task) -> (usize, usize) {
    match task {
        Task::Parabola => (1, 2),
        Task::Checkerboard => (2, 50),
        Task::Regression => (2, 10),
        Task::Memorize => (1, 50),
        Task::Autoencode => (1, 1),
        Task::Mnist => (1, 100),
    }
}

fn cell_spec(task: Task, args: &CellArgs) -> Result<(SweepSpec, CellKey)> {
    let activation = args.activation.kind()?;
    let (depth, width) = default_shape(task);
    let depth = args.depth.unwrap_or(depth);
    let width = args.width.unwrap_or(width);
    let mut spec = SweepSpec {
        activations: vec![activation],
        depths: vec![depth],
        widths: vec![width],
        seed_base: args.seed,
        baseline: None,
        ..SweepSpec::for_task(task)
    };
    if !args.lr.is_empty() {
        spec.learning_rates = args.lr.clone();
    }
    if let Some(e) = args.epochs {
        spec.epochs = e;
    }
    if let Some(o) = &args.optimizer {
        spec.optimizer = parse_optimizer(o)?;
    }
    if let Some(b) = args.batch_size {
        spec.batch_size = (b > 0).then_some(b);
    }
    if let Some(r) = args.replicates {
        spec.replicates = r;
    }
    spec.validate()?;
    Ok((spec, CellKey { task, activation, depth, width }))
}

fn single_cell(task: Task, args: &CellArgs, src: &DataSources) -> Result<(SweepSpec, CellOutput)> {
    let (spec, key) = cell_spec(task, args)?;
    create_out_dir(&args.out)?;
    let data = TaskData::prepare(task, src)?;
    info!("{task}: {} training rows, {} evaluation rows", data.train.len(), data.eval.len());
    let log = RunLog::create(args.out.join("runs.csv"))?;
    let work: Vec<(f64, usize)> =
        spec.learning_rates.iter().flat_map(|&lr| (0..spec.replicates).map(move |r| (lr, r))).collect();
    let trained = parallel_map(args.jobs, &work, |&(lr, r)| {
        train_single(&spec, &data, &key, lr, r, &log).map(|(o, net)| (o, (r == 0).then_some(net)))
    })?;
    let mut runs = Vec::with_capacity(trained.len());
    let mut first_nets = Vec::new();
    for (outcome, net) in trained {
        if let Some(net) = net {
            first_nets.push((outcome.learning_rate, net));
        }
        runs.push(outcome);
    }
    let result = aggregate(&spec, key, runs)?;
    let net = first_nets
        .into_iter()
        .find(|(lr, _)| *lr == result.selected_lr)
        .map(|(_, n)| n)
        .expect("replicate 0 trained for every learning rate");
    Ok((spec, CellOutput { result, net, data }))
}

fn finish(out_dir: &Path, spec: &SweepSpec, out: &CellOutput) -> Result<()> {
    save_model(&out.net, out_dir.join("model.sudn"))?;
    write_tables(spec, std::slice::from_ref(&out.result), out_dir, spec.task.name())?;
    let r = &out.result;
    let ok = r.runs_at(r.selected_lr).filter(|o| o.metric.is_some()).count();
    println!(
        "{} {} depth={} width={}: {}={} (lr={}, {ok}/{} replicates)",
        r.key.task,
        r.key.activation,
        r.key.depth,
        r.key.width,
        r.metric_kind.name(),
        r.metric,
        r.selected_lr,
        spec.replicates
    );
    Ok(())
}

fn write_autoencoder_samples(
    net: &Network<f64>,
    eval: &Dataset<f64>,
    size: usize,
    count: usize,
    out_dir: &Path,
) -> Result<()> {
    let n = count.min(eval.len());
    if n == 0 {
        return Ok(());
    }
    let idx: Vec<usize> = (0..n).collect();
    let x = eval.inputs.select_rows(&idx);
    let y = net.predict(&x)?;
    for i in 0..n {
        let original = values_to_image(&x.select_rows(&[i]), size, size)?;
        let recon = values_to_image(&y.select_rows(&[i]), size, size)?;
        write_pgm(&original, out_dir.join(format!("sample{i}_input.pgm")))?;
        write_pgm(&recon, out_dir.join(format!("sample{i}_output.pgm")))?;
    }
    Ok(())
}

fn parabola(a: ParabolaArgs) -> Result<()> {
    let activation = a.activation.kind()?;
    create_out_dir(&a.out)?;
    let data = crate::datasets::gen_parabola::<f64>(a.points)?;
    let cfg = TrainConfig {
        optimizer: parse_optimizer(&a.optimizer)?,
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: None,
        seed: a.seed,
    };
    let (net, snapshots, report) = run_parabola_demo(a.width, activation, &data, &cfg, a.seed, a.every)?;
    emit_fit_curve_csv(
        a.out.join("fit_curve.csv"),
        data.inputs.as_slice(),
        data.targets.as_slice(),
        &snapshots,
    )?;
    save_model(&net, a.out.join("model.sudn"))?;
    let last = snapshots.last().map(|s| s.predictions.clone()).unwrap_or_default();
    let mut distinct: Vec<f64> = last.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    println!(
        "parabola {activation} width={}: sse {} -> {} ({} distinct predictions)",
        a.width,
        report.initial_loss,
        report.final_loss(),
        distinct.len()
    );
    Ok(())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
        out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

/// Settings of a sweep after all `key = value` pairs are applied.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub spec: SweepSpec,
    pub sources: DataSources,
    pub name: String,
    pub out: PathBuf,
    pub jobs: usize,
}

impl SweepSettings {
    /// Applies pairs in order. `table` or `task` must come before any grid
    /// override since it resets the grid to that table's defaults.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut spec: Option<SweepSpec> = None;
        let mut name = None;
        let mut sources = DataSources::default();
        let mut out = PathBuf::from("out");
        let mut jobs = 1;
        let mut overrides: Vec<(&str, &str)> = Vec::new();
        for (k, v) in pairs {
            match k.as_str() {
                "table" => {
                    spec = Some(SweepSpec::published_table(v)?);
                    name = Some(v.trim().to_ascii_lowercase());
                }
                "task" => {
                    let task: Task = v.parse()?;
                    spec = Some(SweepSpec::for_task(task));
                    name = Some(task.name().to_string());
                }
                "out" => out = PathBuf::from(v),
                "jobs" => jobs = scalar(k, v)?,
                "board" => sources.board = scalar(k, v)?,
                "samples" => sources.checkerboard_samples = scalar(k, v)?,
                "image" => sources.image = Some(PathBuf::from(v)),
                "corpus" => sources.corpus = Some(PathBuf::from(v)),
                "size" => sources.corpus_size = scalar(k, v)?,
                "mnist_dir" => sources = sources.with_mnist_dir(v),
                "mnist_images" => sources.mnist_images = Some(PathBuf::from(v)),
                "mnist_labels" => sources.mnist_labels = Some(PathBuf::from(v)),
                "mnist_test_images" => sources.mnist_test_images = Some(PathBuf::from(v)),
                "mnist_test_labels" => sources.mnist_test_labels = Some(PathBuf::from(v)),
                "train_limit" => sources.mnist_train_limit = Some(scalar(k, v)?),
                "data_seed" => sources.data_seed = scalar(k, v)?,
                _ => overrides.push((k, v)),
            }
        }
        let mut spec = spec.ok_or_else(|| Error::config("sweep needs a table or task setting"))?;
        for (k, v) in overrides {
            match k {
                "activations" => spec.activations = list(k, v)?,
                "depths" => spec.depths = list(k, v)?,
                "widths" => spec.widths = list(k, v)?,
                "lrs" | "learning_rates" => spec.learning_rates = list(k, v)?,
                "replicates" => spec.replicates = scalar(k, v)?,
                "epochs" => spec.epochs = scalar(k, v)?,
                "optimizer" => spec.optimizer = parse_optimizer(v)?,
                "batch_size" => {
                    let b: usize = scalar(k, v)?;
                    spec.batch_size = (b > 0).then_some(b);
                }
                "seed" => spec.seed_base = scalar(k, v)?,
                "baseline" => {
                    spec.baseline = if v.eq_ignore_ascii_case("none") {
                        None
                    } else {
                        let (act, width) = v
                            .split_once(':')
                            .ok_or_else(|| Error::config("baseline: expected activation:width or none"))?;
                        Some((act.trim().parse()?, scalar(k, width)?))
                    }
                }
                other => return Err(Error::config(format!("unknown setting {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(Self { name: name.expect("set with spec"), spec, sources, out, jobs })
    }
}

/// Expands positional sweep arguments: `key=value` pairs stay as they are,
/// anything else is read as a config file.
pub fn collect_settings(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for a in args {
        if a.contains('=') {
            pairs.extend(parse_config(a)?);
        } else {
            let path = Path::new(a);
            require_file(path)?;
            let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
            pairs.extend(parse_config(&text)?);
        }
    }
    Ok(pairs)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut s = SweepSettings::from_pairs(&collect_settings(&a.settings)?)?;
    if let Some(out) = a.out {
        s.out = out;
    }
    if let Some(jobs) = a.jobs {
        s.jobs = jobs;
    }
    for p in [&s.sources.image, &s.sources.mnist_images, &s.sources.mnist_labels, &s.sources.mnist_test_images, &s.sources.mnist_test_labels]
        .into_iter()
        .flatten()
    {
        require_file(p)?;
    }
    if let Some(dir) = &s.sources.corpus {
        require_dir(dir)?;
    }
    create_out_dir(&s.out)?;
    let data = TaskData::prepare(s.spec.task, &s.sources)?;
    let log = RunLog::create(s.out.join(format!("{}_runs.csv", s.name)))?;
    let results = run_task(&s.spec, &data, &log, s.jobs)?;
    let tables = write_tables(&s.spec, &results, &s.out, &s.name)?;
    for (depth, table) in tables {
        println!("{} depth {depth} ({}):", s.name, s.spec.task.metric().name());
        let header: Vec<String> = table.widths.iter().map(|w| format!("{w:>10}")).collect();
        println!("{:>12} {}", "", header.join(" "));
        for (act, values) in &table.rows {
            let cells: Vec<String> = values.iter().map(|v| format!("{v:>10.4}")).collect();
            println!("{act:>12} {}", cells.join(" "));
        }
    }
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    require_file(&a.model)?;
    let net: Network<f64> = load_model(&a.model)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_out_dir(parent)?;
    }
    match a.kind {
        RenderKind::Surface => write_ppm(&render_decision_surface(&net, a.resolution)?, &a.out)?,
        RenderKind::Reconstruction => {
            write_pgm(&render_reconstruction(&net, a.image_width, a.image_height)?, &a.out)?
        }
    }
    Ok(())
}

/// Exit status for an error: 2 for usage and configuration problems, 1 for
/// everything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(activation: &str, levels: Option<u32>) -> Result<ActivationKind> {
        ActivationArgs { activation: activation.into(), levels }.kind()
    }

    #[test]
    fn activation_flags() {
        assert_eq!(act("tanh", None).unwrap(), ActivationKind::Tanh);
        assert_eq!(act("sudo", Some(64)).unwrap(), ActivationKind::sudo(64).unwrap());
        assert_eq!(act("r-sudo", Some(8)).unwrap(), ActivationKind::rsudo(8).unwrap());
        assert_eq!(act("sudo-16", None).unwrap(), ActivationKind::sudo(16).unwrap());
        let err = act("sudo", Some(1)).unwrap_err().to_string();
        assert!(err.contains("L >= 2"), "{err}");
        assert!(act("sudo", None).unwrap_err().to_string().contains("--levels"));
        assert!(act("relu", Some(4)).is_err());
        assert!(act("sudo-16", Some(4)).is_err());
        assert!(act("sigmoid", None).is_err());
    }

    #[test]
    fn config_parsing() {
        let text = "# regression sweep\ntable = regression2\n\nreplicates=2 # fewer\n epochs = 10\n";
        let pairs = parse_config(text).unwrap();
        assert_eq!(pairs.len(), 3);
        let s = SweepSettings::from_pairs(&pairs).unwrap();
        assert_eq!(s.name, "regression2");
        assert_eq!(s.spec.replicates, 2);
        assert_eq!(s.spec.epochs, 10);
        assert_eq!(s.spec.widths, vec![10, 20, 50]);
        assert_eq!(s.spec.activations.len(), 10);
        assert!(parse_config("just words").is_err());
    }

    #[test]
    fn overrides_apply_after_table() {
        let pairs = parse_config(
            "activations = tanh, sudo-2\nwidths=5\ntable=checkerboard1\nlrs=0.01\nbatch_size=0\nbaseline=none",
        )
        .unwrap();
        let s = SweepSettings::from_pairs(&pairs).unwrap();
        assert_eq!(s.spec.activations, vec![ActivationKind::Tanh, ActivationKind::sudo(2).unwrap()]);
        assert_eq!(s.spec.widths, vec![5]);
        assert_eq!(s.spec.learning_rates, vec![0.01]);
        assert_eq!(s.spec.batch_size, None);
        assert!(SweepSettings::from_pairs(&parse_config("widths=5").unwrap()).is_err());
        assert!(SweepSettings::from_pairs(&parse_config("table=regression2\nflux=3").unwrap()).is_err());
        assert!(SweepSettings::from_pairs(&parse_config("table=regression2\nactivations=").unwrap()).is_err());
    }

    #[test]
    fn cli_parses_checkerboard_cell() {
        let cli = Cli::try_parse_from([
            "sudonet", "checkerboard", "--activation", "sudo", "--levels", "64", "--depth", "2", "--width", "50",
        ])
        .unwrap();
        let Command::Checkerboard(a) = cli.command else { panic!("wrong subcommand") };
        let (spec, key) = cell_spec(Task::Checkerboard, &a.cell).unwrap();
        assert_eq!(key.activation, ActivationKind::sudo(64).unwrap());
        assert_eq!((key.depth, key.width), (2, 50));
        assert_eq!(spec.learning_rates.len(), 3);
        assert!(Cli::try_parse_from(["sudonet", "checkerboard", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["sudonet", "sweep"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("x")), 2);
        assert_eq!(exit_code(&Error::Diverged("x".into())), 1);
    }
}
