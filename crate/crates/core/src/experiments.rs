//! Sweep orchestration.
//!
//! A sweep is a grid of cells `(task, activation, depth, width)`. Every cell
//! trains `replicates` networks for each candidate learning rate, keeps the
//! learning rate whose replicate mean is best, and reports that mean. Each
//! individual run is appended to a CSV log so the aggregation can be
//! recomputed independently.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::datasets::{self, Dataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netpbm::read_pgm;
use crate::network::{LayerActivation, Loss, Network, NetworkSpec};
use crate::optim::OptimizerKind;
use crate::training::{train, TrainConfig};

/// The three learning rates tried for every cell.
pub const DEFAULT_LEARNING_RATES: [f64; 3] = [1e-3, 1e-4, 1e-5];
/// Level counts swept for the discretized families.
pub const SWEEP_LEVELS: [u32; 8] = [2, 4, 8, 16, 32, 64, 128, 256];
/// Encoder then decoder widths of the fully connected autoencoder at scale 1.
pub const AUTOENCODER_WIDTHS: [usize; 7] = [50, 50, 40, 20, 40, 50, 50];
/// Rows evaluated per forward pass when scoring large sets.
const EVAL_CHUNK: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Parabola,
    Checkerboard,
    Regression,
    Memorize,
    Autoencode,
    Mnist,
}

impl Task {
    pub const ALL: [Task; 6] =
        [Task::Parabola, Task::Checkerboard, Task::Regression, Task::Memorize, Task::Autoencode, Task::Mnist];

    pub fn name(self) -> &'static str {
        match self {
            Task::Parabola => "parabola",
            Task::Checkerboard => "checkerboard",
            Task::Regression => "regression",
            Task::Memorize => "memorize",
            Task::Autoencode => "autoencode",
            Task::Mnist => "mnist",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Task::Checkerboard | Task::Mnist => Metric::Accuracy,
            _ => Metric::Sse,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown task {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Sse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Sse => "sse",
        }
    }

    /// True if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Sse => a < b,
        }
    }
}

/// Input files and generator parameters for building task data.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSources {
    pub board: usize,
    pub checkerboard_samples: usize,
    pub parabola_points: usize,
    pub regression_train_side: usize,
    pub regression_test_side: usize,
    pub image: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub corpus_size: usize,
    pub corpus_test_fraction: f64,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub mnist_test_images: Option<PathBuf>,
    pub mnist_test_labels: Option<PathBuf>,
    /// Use only the first `n` MNIST training rows.
    pub mnist_train_limit: Option<usize>,
    /// Seed for sampled data (checkerboard points, corpus split).
    pub data_seed: u64,
}

impl Default for DataSources {
    fn default() -> Self {
        Self {
            board: 4,
            checkerboard_samples: 5000,
            parabola_points: 200,
            regression_train_side: 100,
            regression_test_side: 101,
            image: None,
            corpus: None,
            corpus_size: 32,
            corpus_test_fraction: 0.2,
            mnist_images: None,
            mnist_labels: None,
            mnist_test_images: None,
            mnist_test_labels: None,
            mnist_train_limit: None,
            data_seed: 0,
        }
    }
}

impl DataSources {
    /// Fills all four MNIST paths from a directory holding the standard
    /// `train-images-idx3-ubyte`-style file names.
    pub fn with_mnist_dir(mut self, dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        self.mnist_images = Some(dir.join("train-images-idx3-ubyte"));
        self.mnist_labels = Some(dir.join("train-labels-idx1-ubyte"));
        self.mnist_test_images = Some(dir.join("t10k-images-idx3-ubyte"));
        self.mnist_test_labels = Some(dir.join("t10k-labels-idx1-ubyte"));
        self
    }
}

/// Training and evaluation sets for one task.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub task: Task,
    pub train: Dataset<f64>,
    pub eval: Dataset<f64>,
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, task: Task) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::config(format!("task {task} requires {flag}")))
}

impl TaskData {
    pub fn prepare(task: Task, src: &DataSources) -> Result<Self> {
        let (train, eval) = match task {
            Task::Parabola => {
                let d = datasets::gen_parabola(src.parabola_points)?;
                (d.clone(), d)
            }
            Task::Checkerboard => (
                datasets::gen_checkerboard(src.checkerboard_samples, src.board, src.data_seed)?,
                datasets::gen_checkerboard_testgrid(src.board)?,
            ),
            Task::Regression => {
                (datasets::gen_sincos(src.regression_train_side)?, datasets::gen_sincos(src.regression_test_side)?)
            }
            Task::Memorize => {
                let path = required(&src.image, "--image", task)?;
                let d = datasets::gen_memorization(&read_pgm(path)?);
                (d.clone(), d)
            }
            Task::Autoencode => {
                let dir = required(&src.corpus, "--corpus", task)?;
                datasets::load_image_dir(dir, src.corpus_size)?.split(src.corpus_test_fraction, src.data_seed)?
            }
            Task::Mnist => {
                let mut train = datasets::load_mnist(
                    required(&src.mnist_images, "--mnist-images", task)?,
                    required(&src.mnist_labels, "--mnist-labels", task)?,
                )?;
                if let Some(limit) = src.mnist_train_limit {
                    train = train.take(limit);
                }
                let eval = datasets::load_mnist(
                    required(&src.mnist_test_images, "--mnist-test-images", task)?,
                    required(&src.mnist_test_labels, "--mnist-test-labels", task)?,
                )?;
                (train, eval)
            }
        };
        Ok(Self { task, train, eval })
    }
}

/// Network for one cell. For [`Task::Autoencode`] `width` is the scale
/// multiplier of [`AUTOENCODER_WIDTHS`] and `depth` is ignored.
pub fn network_spec(
    task: Task,
    activation: ActivationKind,
    depth: usize,
    width: usize,
    input_dim: usize,
    output_dim: usize,
) -> Result<NetworkSpec> {
    if width == 0 {
        return Err(Error::config("width must be positive"));
    }
    if depth == 0 && task != Task::Autoencode {
        return Err(Error::config("depth must be positive"));
    }
    let hidden: Vec<usize> = match task {
        Task::Autoencode => AUTOENCODER_WIDTHS.iter().map(|w| w * width).collect(),
        _ => vec![width; depth],
    };
    let (out_act, loss) = match task {
        Task::Parabola | Task::Regression => (LayerActivation::Linear, Loss::Sse),
        Task::Checkerboard | Task::Memorize | Task::Autoencode => (ActivationKind::Tanh.into(), Loss::Sse),
        Task::Mnist => (LayerActivation::Softmax, Loss::SoftmaxCrossEntropy),
    };
    NetworkSpec::mlp(input_dim, &hidden, activation, output_dim, out_act, loss)
}

/// Scores `net` on `data` with the task's metric.
pub fn evaluate(task: Task, net: &Network<f64>, data: &Dataset<f64>) -> Result<f64> {
    let n = data.len();
    if n == 0 {
        return Err(Error::config("evaluation set is empty"));
    }
    let mut correct = 0usize;
    let mut sse = 0.0;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = data.inputs.select_rows(chunk);
        let y = data.targets.select_rows(chunk);
        let out = net.predict(&x)?;
        match task.metric() {
            Metric::Sse => sse += crate::network::loss_sse(&out, &y)?,
            Metric::Accuracy if out.cols() == 1 => {
                correct += out
                    .as_slice()
                    .iter()
                    .zip(y.as_slice())
                    .filter(|(&o, &t)| (o >= 0.0) == (t >= 0.0))
                    .count();
            }
            Metric::Accuracy => {
                correct += out.argmax_rows().iter().zip(y.argmax_rows()).filter(|(a, b)| *a == b).count();
            }
        }
    }
    Ok(match task.metric() {
        Metric::Accuracy => correct as f64 / n as f64,
        Metric::Sse => sse,
    })
}

/// Grid definition for one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub task: Task,
    pub activations: Vec<ActivationKind>,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub replicates: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed_base: u64,
    /// Cell whose metric divides every other cell for relative tables.
    pub baseline: Option<(ActivationKind, usize)>,
}

pub fn tanh_relu_sudo() -> Vec<ActivationKind> {
    let mut v = vec![ActivationKind::Tanh, ActivationKind::Relu];
    v.extend(SWEEP_LEVELS.iter().map(|&l| ActivationKind::sudo(l).expect("valid levels")));
    v
}

pub fn tanh_relu_rsudo() -> Vec<ActivationKind> {
    let mut v = vec![ActivationKind::Tanh, ActivationKind::Relu];
    v.extend(SWEEP_LEVELS.iter().map(|&l| ActivationKind::rsudo(l).expect("valid levels")));
    v
}

impl SweepSpec {
    /// Task defaults: the published grid for the task's first table plus
    /// the harness's epoch and batch budgets.
    pub fn for_task(task: Task) -> Self {
        let (depths, widths, replicates, epochs, batch, optimizer) = match task {
            Task::Parabola => (vec![1], vec![2, 4, 10], 1, 2000, None, OptimizerKind::SGD),
            Task::Checkerboard => (vec![1], vec![5, 10, 50, 100, 200], 3, 1000, Some(50), OptimizerKind::ADAM),
            Task::Regression => (vec![2], vec![10, 20, 50], 5, 2000, Some(50), OptimizerKind::ADAM),
            Task::Memorize => (vec![1], vec![50, 100, 200], 3, 500, Some(64), OptimizerKind::ADAM),
            Task::Autoencode => (vec![1], vec![1, 2, 4, 8], 3, 200, Some(64), OptimizerKind::ADAM),
            Task::Mnist => (vec![1], vec![2, 3, 4, 10, 50, 100], 5, 30, Some(64), OptimizerKind::ADAM),
        };
        Self {
            task,
            activations: tanh_relu_sudo(),
            depths,
            widths,
            learning_rates: DEFAULT_LEARNING_RATES.to_vec(),
            replicates,
            epochs,
            optimizer,
            batch_size: batch,
            seed_base: 0,
            baseline: (task == Task::Autoencode).then_some((ActivationKind::Tanh, 1)),
        }
    }

    /// Grid of a published table by name, e.g. `checkerboard2`,
    /// `regression4`, `memorize1`, `autoencode`, `mnist1`. A `-rsudo`
    /// suffix selects the rectified rows.
    pub fn published_table(name: &str) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        let (base, rectified) = match name.strip_suffix("-rsudo") {
            Some(b) => (b, true),
            None => (name.as_str(), false),
        };
        let split = base.find(|c: char| c.is_ascii_digit()).unwrap_or(base.len());
        let (task_name, depth) = base.split_at(split);
        let task: Task = task_name.parse()?;
        let depth: Option<usize> = if depth.is_empty() {
            None
        } else {
            Some(depth.parse().map_err(|_| Error::config(format!("bad table name {name:?}")))?)
        };
        let allowed: &[usize] = match task {
            Task::Checkerboard => &[1, 2, 4],
            Task::Regression => &[2, 4],
            Task::Memorize => &[1, 2, 4, 10],
            Task::Mnist => &[1, 4],
            Task::Autoencode | Task::Parabola => &[],
        };
        let mut spec = Self::for_task(task);
        match depth {
            Some(d) if allowed.contains(&d) => spec.depths = vec![d],
            None if allowed.is_empty() => {}
            _ => return Err(Error::config(format!("no published table named {name:?}"))),
        }
        if task == Task::Parabola {
            return Err(Error::config("the parabola task has figures, not tables; use the parabola subcommand"));
        }
        if rectified {
            spec.activations = tanh_relu_rsudo();
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.activations.is_empty() {
            return Err(Error::config("sweep needs at least one activation"));
        }
        if self.depths.is_empty() || self.widths.is_empty() {
            return Err(Error::config("sweep needs at least one depth and one width"));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(Error::config("learning rates must be positive and finite"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be >= 1"));
        }
        if self.widths.contains(&0) || (self.task != Task::Autoencode && self.depths.contains(&0)) {
            return Err(Error::config("depths and widths must be positive"));
        }
        Ok(())
    }

    pub fn train_config(&self, learning_rate: f64, seed: u64) -> TrainConfig {
        TrainConfig { optimizer: self.optimizer, learning_rate, epochs: self.epochs, batch_size: self.batch_size, seed }
    }

    /// Cells in row-major table order: depth, then activation, then width.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for &depth in &self.depths {
            for &activation in &self.activations {
                for &width in &self.widths {
                    cells.push(CellKey { task: self.task, activation, depth, width });
                }
            }
        }
        cells
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellKey {
    pub task: Task,
    pub activation: ActivationKind,
    pub depth: usize,
    pub width: usize,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.task, self.activation, self.depth, self.width)
    }
}

/// 64-bit FNV-1a; stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed of replicate `r` of `key`: `seed_base + hash(key) + r`. Identical
/// across learning rates so candidates start from the same weights.
pub fn run_seed(seed_base: u64, key: &CellKey, replicate: usize) -> u64 {
    seed_base.wrapping_add(fnv1a(key.to_string().as_bytes())).wrapping_add(replicate as u64)
}

/// One row of the per-run CSV log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub activation: String,
    pub levels: u32,
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    pub replicate: usize,
    pub seed: u64,
    pub epochs: usize,
    pub metric_name: String,
    /// `NaN` marks a run that diverged and was excluded.
    pub metric_value: f64,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn activation_kind(&self) -> Result<ActivationKind> {
        ActivationKind::from_parts(&self.activation, (self.levels > 0).then_some(self.levels))
    }

    pub fn succeeded(&self) -> bool {
        self.metric_value.is_finite()
    }
}

/// Append-only CSV log shared by concurrent runs.
pub struct RunLog {
    writer: Mutex<Option<csv::Writer<File>>>,
}

impl RunLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        Ok(Self { writer: Mutex::new(Some(csv::Writer::from_writer(file))) })
    }

    /// A log that discards everything.
    pub fn disabled() -> Self {
        Self { writer: Mutex::new(None) }
    }

    pub fn append(&self, record: &RunRecord) -> Result<()> {
        let mut guard = self.writer.lock().expect("log lock poisoned");
        if let Some(w) = guard.as_mut() {
            w.serialize(record)?;
            w.flush()?;
        }
        Ok(())
    }
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub learning_rate: f64,
    pub replicate: usize,
    pub seed: u64,
    /// `None` if the run diverged.
    pub metric: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub key: CellKey,
    pub metric_kind: Metric,
    pub runs: Vec<RunOutcome>,
    pub selected_lr: f64,
    /// Replicate mean at the selected learning rate.
    pub metric: f64,
}

impl ExperimentResult {
    pub fn runs_at(&self, lr: f64) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter(move |r| r.learning_rate == lr)
    }
}

/// Picks the learning rate whose mean over successful runs is best; ties go
/// to the earlier candidate.
pub fn select_best(
    metric: Metric,
    candidates: &[f64],
    runs: &[RunOutcome],
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &lr in candidates {
        let values: Vec<f64> = runs.iter().filter(|r| r.learning_rate == lr).filter_map(|r| r.metric).collect();
        if values.is_empty() {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if best.is_none_or(|(_, b)| metric.better(mean, b)) {
            best = Some((lr, mean));
        }
    }
    best
}

/// Recomputes a cell's `(selected_lr, metric)` from logged rows alone.
pub fn recount(records: &[RunRecord], key: &CellKey, candidates: &[f64]) -> Result<Option<(f64, f64)>> {
    let mut runs = Vec::new();
    for r in records {
        if r.task == key.task.name()
            && r.activation_kind()? == key.activation
            && r.depth == key.depth
            && r.width == key.width
        {
            runs.push(RunOutcome {
                learning_rate: r.lr,
                replicate: r.replicate,
                seed: r.seed,
                metric: r.succeeded().then_some(r.metric_value),
            });
        }
    }
    Ok(select_best(key.task.metric(), candidates, &runs))
}

/// Trains and scores one network. Divergence is reported as a `None` metric.
pub fn run_single(
    spec: &SweepSpec,
    data: &TaskData,
    key: &CellKey,
    learning_rate: f64,
    replicate: usize,
    log: &RunLog,
) -> Result<RunOutcome> {
    train_single(spec, data, key, learning_rate, replicate, log).map(|(outcome, _)| outcome)
}

/// [`run_single`] that also hands back the trained network.
pub fn train_single(
    spec: &SweepSpec,
    data: &TaskData,
    key: &CellKey,
    learning_rate: f64,
    replicate: usize,
    log: &RunLog,
) -> Result<(RunOutcome, Network<f64>)> {
    let seed = run_seed(spec.seed_base, key, replicate);
    let net_spec = network_spec(
        key.task,
        key.activation,
        key.depth,
        key.width,
        data.train.inputs.cols(),
        data.train.targets.cols(),
    )?;
    let start = Instant::now();
    let mut net = Network::init(net_spec, seed);
    let outcome = match train(&mut net, &data.train.inputs, &data.train.targets, &spec.train_config(learning_rate, seed), |_, _| Ok(())) {
        Ok(_) => match evaluate(key.task, &net, &data.eval) {
            Ok(m) if m.is_finite() => Some(m),
            Ok(_) | Err(Error::NonFinite { .. }) => None,
            Err(e) => return Err(e),
        },
        Err(Error::Diverged(reason)) => {
            warn!("{key} lr={learning_rate} replicate={replicate} diverged ({reason}); excluded");
            None
        }
        Err(e) => return Err(e),
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    log.append(&RunRecord {
        task: key.task.name().to_string(),
        activation: key.activation.family().to_string(),
        levels: key.activation.levels().map_or(0, |l| l.get()),
        depth: key.depth,
        width: key.width,
        lr: learning_rate,
        replicate,
        seed,
        epochs: spec.epochs,
        metric_name: key.task.metric().name().to_string(),
        metric_value: outcome.unwrap_or(f64::NAN),
        wall_seconds,
    })?;
    info!("{key} lr={learning_rate} rep={replicate} -> {outcome:?} ({wall_seconds:.1}s)");
    Ok((RunOutcome { learning_rate, replicate, seed, metric: outcome }, net))
}

pub fn aggregate(spec: &SweepSpec, key: CellKey, runs: Vec<RunOutcome>) -> Result<ExperimentResult> {
    let metric_kind = key.task.metric();
    let (selected_lr, metric) = select_best(metric_kind, &spec.learning_rates, &runs)
        .ok_or_else(|| Error::Diverged(format!("every run of cell {key} failed")))?;
    Ok(ExperimentResult { key, metric_kind, runs, selected_lr, metric })
}

/// Runs every learning rate and replicate of one cell sequentially.
pub fn run_cell(
    spec: &SweepSpec,
    data: &TaskData,
    activation: ActivationKind,
    depth: usize,
    width: usize,
    log: &RunLog,
) -> Result<ExperimentResult> {
    spec.validate()?;
    let key = CellKey { task: spec.task, activation, depth, width };
    let mut runs = Vec::with_capacity(spec.learning_rates.len() * spec.replicates);
    for &lr in &spec.learning_rates {
        for r in 0..spec.replicates {
            runs.push(run_single(spec, data, &key, lr, r, log)?);
        }
    }
    aggregate(spec, key, runs)
}

/// Runs the whole grid with up to `jobs` concurrent training runs. Results
/// come back in [`SweepSpec::cells`] order; a baseline cell missing from the
/// grid is appended.
pub fn run_task(spec: &SweepSpec, data: &TaskData, log: &RunLog, jobs: usize) -> Result<Vec<ExperimentResult>> {
    spec.validate()?;
    if data.task != spec.task {
        return Err(Error::config(format!("data prepared for {} but sweep is {}", data.task, spec.task)));
    }
    let mut cells = spec.cells();
    if let Some((act, width)) = spec.baseline {
        for &depth in &spec.depths {
            let key = CellKey { task: spec.task, activation: act, depth, width };
            if !cells.contains(&key) {
                cells.push(key);
            }
        }
    }
    let work: Vec<(usize, f64, usize)> = (0..cells.len())
        .flat_map(|c| spec.learning_rates.iter().flat_map(move |&lr| (0..spec.replicates).map(move |r| (c, lr, r))))
        .collect();
    let outcomes = parallel_map(jobs, &work, |&(c, lr, r)| run_single(spec, data, &cells[c], lr, r, log))?;
    let mut per_cell: Vec<Vec<RunOutcome>> = vec![Vec::new(); cells.len()];
    for (outcome, &(c, _, _)) in outcomes.into_iter().zip(&work) {
        per_cell[c].push(outcome);
    }
    cells.into_iter().zip(per_cell).map(|(key, runs)| aggregate(spec, key, runs)).collect()
}

/// Applies `f` to every item on up to `jobs` threads, keeping input order.
/// After the first error no new items are started; the error is returned
/// once in-flight items finish.
pub fn parallel_map<I, R, F>(jobs: usize, items: &[I], f: F) -> Result<Vec<R>>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> Result<R> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(item) = items.get(i) else { break };
        let out = f(item);
        let failed = out.is_err();
        slots.lock().expect("results lock poisoned")[i] = Some(out);
        if failed {
            next.store(items.len(), Ordering::SeqCst);
        }
    };
    std::thread::scope(|s| {
        for _ in 1..jobs.max(1).min(items.len().max(1)) {
            s.spawn(worker);
        }
        worker();
    });
    // items start in index order, so the first error precedes any unstarted slot
    slots
        .into_inner()
        .expect("results lock poisoned")
        .into_iter()
        .map(|s| s.expect("item started before the first error"))
        .collect()
}

/// Baseline metric for relative tables, per depth.
pub fn baseline_metrics(spec: &SweepSpec, results: &[ExperimentResult]) -> HashMap<usize, f64> {
    let mut out = HashMap::new();
    if let Some((act, width)) = spec.baseline {
        for r in results {
            if r.key.activation == act && r.key.width == width {
                out.insert(r.key.depth, r.metric);
            }
        }
    }
    out
}

/// A results table in published layout: one row per activation, one column
/// per width.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub widths: Vec<usize>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn from_results(
        spec: &SweepSpec,
        results: &[ExperimentResult],
        depth: usize,
        value: impl Fn(&ExperimentResult) -> f64,
    ) -> Self {
        let rows = spec
            .activations
            .iter()
            .map(|&act| {
                let cells = spec
                    .widths
                    .iter()
                    .map(|&w| {
                        results
                            .iter()
                            .find(|r| r.key.activation == act && r.key.depth == depth && r.key.width == w)
                            .map_or(f64::NAN, &value)
                    })
                    .collect();
                (act.to_string(), cells)
            })
            .collect();
        Self { widths: spec.widths.clone(), rows }
    }

    pub fn get(&self, activation: &str, width: usize) -> Option<f64> {
        let col = self.widths.iter().position(|&w| w == width)?;
        self.rows.iter().find(|(a, _)| a == activation).map(|(_, v)| v[col])
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["activation".to_string()];
        header.extend(self.widths.iter().map(|w| w.to_string()));
        w.write_record(&header)?;
        for (act, values) in &self.rows {
            let mut rec = vec![act.clone()];
            rec.extend(values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let widths = r
            .headers()?
            .iter()
            .skip(1)
            .map(|h| h.parse().map_err(|_| Error::config(format!("bad width header {h:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let act = rec.get(0).unwrap_or_default().to_string();
            let values = rec
                .iter()
                .skip(1)
                .map(|v| v.parse().map_err(|_| Error::config(format!("bad table value {v:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push((act, values));
        }
        Ok(Self { widths, rows })
    }
}

/// Writes `<stem>_depth<d>.csv` (cell metrics) and `<stem>_depth<d>_lr.csv`
/// (selected learning rates) per depth, plus `_relative` tables when the
/// sweep has a baseline. Returns the metric tables keyed by depth.
pub fn write_tables(
    spec: &SweepSpec,
    results: &[ExperimentResult],
    out_dir: impl AsRef<Path>,
    stem: &str,
) -> Result<Vec<(usize, Table)>> {
    let out_dir = out_dir.as_ref();
    let baselines = baseline_metrics(spec, results);
    let mut tables = Vec::new();
    for &depth in &spec.depths {
        let table = Table::from_results(spec, results, depth, |r| r.metric);
        table.write_csv(out_dir.join(format!("{stem}_depth{depth}.csv")))?;
        Table::from_results(spec, results, depth, |r| r.selected_lr)
            .write_csv(out_dir.join(format!("{stem}_depth{depth}_lr.csv")))?;
        if let Some(&base) = baselines.get(&depth) {
            Table::from_results(spec, results, depth, |r| r.metric / base)
                .write_csv(out_dir.join(format!("{stem}_depth{depth}_relative.csv")))?;
        }
        tables.push((depth, table));
    }
    Ok(tables)
}

/// Histogram of hidden-unit outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `(lower, upper)` per bin; `lower == upper` for exact-level buckets.
    pub bins: Vec<(f64, f64)>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts every hidden-unit output over all hidden layers and all rows of
/// `inputs`. Discretized layers whose level count fits in `bins` are
/// counted per exact output level; everything else uses `bins` equal-width
/// bins over the activation's range.
pub fn collect_activation_histogram(net: &Network<f64>, inputs: &Matrix<f64>, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    let layers = net.spec().layers();
    let hidden = &layers[..layers.len() - 1];
    let kinds: Vec<LayerActivation> = hidden.iter().map(|l| l.activation).collect();
    let shared = kinds.first().copied().filter(|k| kinds.iter().all(|x| x == k));

    let exact_levels: Option<Vec<f64>> = match shared {
        Some(LayerActivation::Unit(ActivationKind::Sudo(l))) if l.get() as usize <= bins => Some(l.output_values()),
        Some(LayerActivation::Unit(ActivationKind::RSudo(l))) => {
            let mut v: Vec<f64> = l.output_values::<f64>().into_iter().filter(|&x| x > 0.0).collect();
            v.insert(0, 0.0);
            (v.len() <= bins).then_some(v)
        }
        _ => None,
    };

    let mut outputs = Vec::new();
    let indices: Vec<usize> = (0..inputs.rows()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let trace = net.forward(&inputs.select_rows(chunk))?;
        for m in trace.hidden_outputs() {
            outputs.extend_from_slice(m.as_slice());
        }
    }

    if let Some(levels) = exact_levels {
        let mut counts = vec![0u64; levels.len()];
        for v in &outputs {
            let nearest = levels
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .expect("levels non-empty");
            counts[nearest] += 1;
        }
        return Ok(Histogram { bins: levels.iter().map(|&l| (l, l)).collect(), counts });
    }

    let (lo, hi) = match shared {
        Some(LayerActivation::Unit(ActivationKind::Relu)) => {
            (0.0, outputs.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE))
        }
        Some(LayerActivation::Unit(ActivationKind::RSudo(_))) => (0.0, 1.0),
        Some(LayerActivation::Unit(_)) => (-1.0, 1.0),
        _ => {
            let lo = outputs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0), lo.max(0.0) + 1.0) }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in &outputs {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let edges = (0..bins).map(|i| (lo + i as f64 * width, lo + (i + 1) as f64 * width)).collect();
    Ok(Histogram { bins: edges, counts })
}

/// Predictions of a parabola fit at one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSnapshot {
    pub epoch: usize,
    pub predictions: Vec<f64>,
}

/// Single-hidden-layer parabola fit with a linear output, recording the
/// prediction curve every `every` epochs (and at epoch 0 and the last
/// epoch).
pub fn run_parabola_demo(
    units: usize,
    activation: ActivationKind,
    data: &Dataset<f64>,
    config: &TrainConfig,
    init_seed: u64,
    every: usize,
) -> Result<(Network<f64>, Vec<FitSnapshot>, crate::training::TrainReport)> {
    let spec = network_spec(Task::Parabola, activation, 1, units, 1, 1)?;
    let mut net = Network::init(spec, init_seed);
    let every = every.max(1);
    let mut snapshots = Vec::new();
    let report = train(&mut net, &data.inputs, &data.targets, config, |epoch, n| {
        if epoch % every == 0 || epoch == config.epochs {
            snapshots.push(FitSnapshot { epoch, predictions: n.predict(&data.inputs)?.into_vec() });
        }
        Ok(())
    })?;
    Ok((net, snapshots, report))
}
