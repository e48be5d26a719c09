//! Run configuration: per-task defaults, an optional flat key=value config
//! file, and command-line flag overrides — in that precedence order.

use crate::errors::CliError;
use nesy_core::provenance::SemiringSpec;
use nesy_core::tasks::{Interplay, TaskConfig};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    MnistSum,
    Shapes,
    ToyNer,
    MathInference,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::MnistSum, Task::Shapes, Task::ToyNer, Task::MathInference];

    pub fn name(&self) -> &'static str {
        match self {
            Task::MnistSum => "mnist-sum",
            Task::Shapes => "shapes",
            Task::ToyNer => "toy-ner",
            Task::MathInference => "math",
        }
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "mnist-sum" | "mnist_sum" => Ok(Task::MnistSum),
            "shapes" => Ok(Task::Shapes),
            "toy-ner" | "toy_ner" | "ner" => Ok(Task::ToyNer),
            "math" | "math-inference" => Ok(Task::MathInference),
            other => Err(CliError::Config(format!(
                "unknown task {other:?}; expected one of mnist-sum, shapes, toy-ner, math"
            ))),
        }
    }
}

/// A semiring selection as written on the command line, keeping the label
/// for report rows.
#[derive(Debug, Clone)]
pub struct SemiringChoice {
    pub label: String,
    pub spec: SemiringSpec,
}

impl FromStr for SemiringChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let spec = match s {
            "bool" => SemiringSpec::Boolean,
            "maxmin" => SemiringSpec::MaxMin,
            "addmult" => SemiringSpec::AddMultProb,
            "exact" => SemiringSpec::TopKProofs(None),
            _ => match s.strip_prefix("topk:") {
                Some(k) => {
                    let k: usize = k
                        .parse()
                        .map_err(|_| CliError::Config(format!("bad top-k count in {s:?}")))?;
                    if k == 0 {
                        return Err(CliError::Config("semiring k must be at least 1".into()));
                    }
                    SemiringSpec::TopKProofs(Some(k))
                }
                None => {
                    return Err(CliError::Config(format!(
                        "unknown semiring {s:?}; expected topk:N, exact, maxmin, addmult or bool"
                    )))
                }
            },
        };
        Ok(SemiringChoice { label: s.to_string(), spec })
    }
}

fn parse_interplay(s: &str) -> Result<Interplay, CliError> {
    match s {
        "reasoner" => Ok(Interplay::Reasoner),
        "soft-constraint" | "soft_constraint" => Ok(Interplay::SoftConstraint),
        "sampling" => Ok(Interplay::Sampling),
        "primal-dual" | "primal_dual" => Ok(Interplay::PrimalDual),
        other => Err(CliError::Config(format!(
            "unknown interplay {other:?}; expected reasoner, soft-constraint, sampling or primal-dual"
        ))),
    }
}

fn interplay_name(i: Interplay) -> &'static str {
    match i {
        Interplay::Reasoner => "reasoner",
        Interplay::SoftConstraint => "soft-constraint",
        Interplay::Sampling => "sampling",
        Interplay::PrimalDual => "primal-dual",
    }
}

/// Partially specified options gathered from one source (file or flags).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub task: Option<String>,
    pub semiring: Option<String>,
    pub interplay: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    pub runs: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Parse the flat `key = value` config file format. Blank lines and
    /// `#` comments are ignored; unknown keys are rejected.
    pub fn from_file(text: &str) -> Result<Overrides, CliError> {
        let mut o = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| CliError::Config(format!("line {}: bad {what}: {value:?}", lineno + 1));
            match key {
                "task" => o.task = Some(value.to_string()),
                "semiring" => o.semiring = Some(value.to_string()),
                "interplay" => o.interplay = Some(value.to_string()),
                "seed" => o.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "epochs" => o.epochs = Some(value.parse().map_err(|_| bad("epochs"))?),
                "batch_size" => o.batch_size = Some(value.parse().map_err(|_| bad("batch_size"))?),
                "learning_rate" => {
                    o.learning_rate = Some(value.parse().map_err(|_| bad("learning_rate"))?)
                }
                "train_count" => o.train_count = Some(value.parse().map_err(|_| bad("train_count"))?),
                "test_count" => o.test_count = Some(value.parse().map_err(|_| bad("test_count"))?),
                "runs" => o.runs = Some(value.parse().map_err(|_| bad("runs"))?),
                "data_dir" => o.data_dir = Some(PathBuf::from(value)),
                "out" => o.out = Some(PathBuf::from(value)),
                other => return Err(CliError::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        Ok(o)
    }

    /// Later sources win field by field.
    pub fn merged_with(mut self, later: Overrides) -> Overrides {
        macro_rules! take {
            ($($f:ident),*) => { $( if later.$f.is_some() { self.$f = later.$f; } )* };
        }
        take!(task, semiring, interplay, seed, epochs, batch_size, learning_rate, train_count,
              test_count, runs, data_dir, out);
        self
    }
}

/// Fully resolved configuration for one command invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub semiring: SemiringChoice,
    pub interplay: Interplay,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub runs: usize,
    pub data_dir: Option<PathBuf>,
    pub out: PathBuf,
}

/// Baseline hyperparameters per task, tuned so every desk-scale run both
/// finishes quickly and reaches its target accuracy.
fn task_defaults(task: Task) -> Overrides {
    let mut o = Overrides::default();
    match task {
        Task::MnistSum => {
            o.epochs = Some(5);
            o.batch_size = Some(32);
            o.learning_rate = Some(0.01);
            o.train_count = Some(2000);
            o.test_count = Some(500);
            o.semiring = Some("exact".into());
        }
        Task::Shapes => {
            o.epochs = Some(8);
            o.batch_size = Some(8);
            o.learning_rate = Some(0.005);
            o.train_count = Some(1000);
            o.test_count = Some(1000);
            o.semiring = Some("topk:3".into());
        }
        Task::ToyNer => {
            o.epochs = Some(8);
            o.batch_size = Some(16);
            o.learning_rate = Some(0.01);
            o.train_count = Some(800);
            o.test_count = Some(500);
            o.semiring = Some("exact".into());
            o.interplay = Some("soft-constraint".into());
        }
        Task::MathInference => {
            o.epochs = Some(8);
            o.batch_size = Some(16);
            o.learning_rate = Some(0.01);
            o.train_count = Some(1500);
            o.test_count = Some(500);
            o.semiring = Some("exact".into());
        }
    }
    o
}

/// Small counts for benchmarking: per-sample times do not need full-length
/// training runs.
fn bench_defaults() -> Overrides {
    let mut o = Overrides::default();
    o.epochs = Some(1);
    o.train_count = Some(200);
    o.test_count = Some(100);
    o.runs = Some(5);
    o
}

pub fn resolve(
    file: Option<Overrides>,
    flags: Overrides,
    for_bench: bool,
) -> Result<RunConfig, CliError> {
    // Find the task first so its defaults form the base layer.
    let explicit = file.clone().unwrap_or_default().merged_with(flags.clone());
    let task: Option<Task> = explicit.task.as_deref().map(Task::from_str).transpose()?;

    let mut base = task.map(task_defaults).unwrap_or_default();
    if for_bench {
        base = base.merged_with(bench_defaults());
    }
    let o = base.merged_with(file.unwrap_or_default()).merged_with(flags);

    let semiring: SemiringChoice = o.semiring.as_deref().unwrap_or("topk:3").parse()?;
    let interplay = o.interplay.as_deref().map(parse_interplay).transpose()?.unwrap_or_default();

    let cfg = RunConfig {
        task,
        semiring,
        interplay,
        seed: o.seed.unwrap_or(0),
        epochs: o.epochs.unwrap_or(3),
        batch_size: o.batch_size.unwrap_or(16),
        learning_rate: o.learning_rate.unwrap_or(0.01),
        train_count: o.train_count.unwrap_or(1000),
        test_count: o.test_count.unwrap_or(500),
        runs: o.runs.unwrap_or(5),
        data_dir: o.data_dir,
        out: o.out.unwrap_or_else(|| PathBuf::from("out")),
    };
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.train_count == 0 || cfg.test_count == 0 {
        return Err(CliError::Config("counts and epochs must be positive".into()));
    }
    if cfg.learning_rate <= 0.0 {
        return Err(CliError::Config("learning rate must be positive".into()));
    }
    if cfg.runs == 0 {
        return Err(CliError::Config("runs must be positive".into()));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn task_config(&self) -> TaskConfig {
        TaskConfig {
            seed: self.seed,
            epochs: self.epochs,
            train_count: self.train_count,
            test_count: self.test_count,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            top_k: self.semiring.spec.k(),
            interplay: self.interplay,
            data_dir: self.data_dir.clone(),
        }
    }

    /// Report-row label: semiring plus interplay mode.
    pub fn mode_label(&self) -> String {
        format!("{}/{}", self.semiring.label, interplay_name(self.interplay))
    }
}
