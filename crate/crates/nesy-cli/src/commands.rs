//! Subcommand bodies: dataset generation with manifests, training with
//! checkpoints and metrics files, checkpoint evaluation, and benchmarking.

use crate::config::{RunConfig, Task};
use crate::errors::CliError;
use crate::mem::RssSampler;
use crate::report::{to_csv, to_markdown, BenchRecord};
use nesy_core::neural::Network;
use nesy_core::tasks::{digits, math, mnist_sum, ner, shapes, Metrics, TaskError};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

fn require_task(cfg: &RunConfig) -> Result<Task, CliError> {
    cfg.task.ok_or_else(|| CliError::Config("this command needs --task".into()))
}

fn task_dir(cfg: &RunConfig, task: Task) -> Result<PathBuf, CliError> {
    let dir = cfg.out.join(task.name());
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Write `manifest.jsonl`: one `{path, bytes, checksum}` line per file,
/// sorted by path.
fn write_manifest(dir: &Path, mut files: Vec<String>) -> Result<(), CliError> {
    files.sort();
    let mut lines = Vec::new();
    for name in &files {
        let bytes = fs::read(dir.join(name))?;
        lines.push(
            json!({ "path": name, "bytes": bytes.len(), "checksum": sha256_hex(&bytes) }).to_string(),
        );
    }
    fs::write(dir.join("manifest.jsonl"), lines.join("\n") + "\n")?;
    Ok(())
}

fn write_jsonl(dir: &Path, name: &str, lines: Vec<String>) -> Result<String, CliError> {
    fs::write(dir.join(name), lines.join("\n") + "\n")?;
    Ok(name.to_string())
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<(), CliError> {
    let task = require_task(cfg)?;
    let dir = task_dir(cfg, task)?;
    let files = match task {
        Task::Shapes => {
            shapes::write_shapes(&dir, cfg.seed, cfg.train_count + cfg.test_count)?
        }
        Task::MnistSum => {
            let mut files = Vec::new();
            for (prefix, seed, pairs) in
                [("train", cfg.seed, cfg.train_count), ("test", cfg.seed.wrapping_add(1), cfg.test_count)]
            {
                let ds = digits::gen_synthetic_digits(seed, pairs * 2);
                let images: Vec<_> = ds.iter().map(|d| d.image.clone()).collect();
                let labels: Vec<u8> = ds.iter().map(|d| d.label).collect();
                let img_name = format!("{prefix}-images.idx");
                let lab_name = format!("{prefix}-labels.idx");
                fs::write(dir.join(&img_name), digits::write_idx_images(&images))?;
                fs::write(dir.join(&lab_name), digits::write_idx_labels(&labels))?;
                files.push(img_name);
                files.push(lab_name);
            }
            files
        }
        Task::ToyNer => {
            let mut files = Vec::new();
            for (prefix, seed, count) in
                [("train", cfg.seed, cfg.train_count), ("test", cfg.seed.wrapping_add(1), cfg.test_count)]
            {
                let lines = ner::gen_ner(seed, count)
                    .iter()
                    .map(|s| {
                        json!({
                            "person_emb": s.person_emb,
                            "loc_emb": s.loc_emb,
                            "is_real_person": s.is_real_person,
                            "works_in": s.works_in,
                            "label_c1": s.label_c1,
                            "label_c2": s.label_c2,
                        })
                        .to_string()
                    })
                    .collect();
                files.push(write_jsonl(&dir, &format!("ner-{prefix}.jsonl"), lines)?);
            }
            files
        }
        Task::MathInference => {
            let mut files = Vec::new();
            for (prefix, seed, count) in
                [("train", cfg.seed, cfg.train_count), ("test", cfg.seed.wrapping_add(1), cfg.test_count)]
            {
                let lines = math::gen_math(seed, count)
                    .iter()
                    .map(|s| {
                        json!({
                            "l1": s.l1,
                            "l2": s.l2,
                            "prop_a_id": s.prop_a_id,
                            "prop_b_id": s.prop_b_id,
                            "rel_id": s.rel_id,
                            "label": s.label,
                        })
                        .to_string()
                    })
                    .collect();
                files.push(write_jsonl(&dir, &format!("math-{prefix}.jsonl"), lines)?);
            }
            files
        }
    };
    let count = files.len();
    write_manifest(&dir, files)?;
    println!("wrote {count} files + manifest.jsonl to {}", dir.display());
    Ok(())
}

fn save_net(dir: &Path, name: &str, net: &Network<f64>) -> Result<(), CliError> {
    let path = dir.join(format!("{name}.nsyn"));
    let mut f = fs::File::create(&path)?;
    net.save(&mut f).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}

fn load_net(dir: &Path, name: &str) -> Result<Network<f64>, CliError> {
    let path = dir.join(format!("{name}.nsyn"));
    let mut f = fs::File::open(&path)
        .map_err(|e| CliError::Data(format!("cannot open checkpoint {}: {e}", path.display())))?;
    Network::load(&mut f).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_metrics(dir: &Path, name: &str, metrics: &Metrics) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(metrics).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

fn print_metrics(metrics: &Metrics) {
    for (k, v) in metrics {
        println!("{k} = {v}");
    }
}

/// Train, evaluate, and persist checkpoints plus `metrics.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let task = require_task(cfg)?;
    let dir = task_dir(cfg, task)?;
    let tc = cfg.task_config();
    tc.validate().map_err(CliError::from)?;
    let metrics = match task {
        Task::MnistSum => {
            let (net, mut m) = mnist_sum::train_mnist_sum(&tc)?;
            m.extend(mnist_sum::eval_mnist_sum(&net, &tc)?);
            save_net(&dir, "digit", &net)?;
            m
        }
        Task::Shapes => {
            let (nets, mut m) = shapes::train_shapes(&tc)?;
            m.extend(shapes::eval_shapes(&nets, &tc)?);
            save_net(&dir, "color", &nets.color)?;
            save_net(&dir, "shape", &nets.shape)?;
            save_net(&dir, "above", &nets.above)?;
            m
        }
        Task::ToyNer => {
            let (nets, mut m) = ner::train_toy_ner(&tc)?;
            m.extend(ner::eval_toy_ner(&nets, &tc)?);
            save_net(&dir, "person", &nets.person)?;
            save_net(&dir, "works", &nets.works)?;
            m
        }
        Task::MathInference => {
            let (nets, mut m) = math::train_math_inference(&tc)?;
            m.extend(math::eval_math_inference(&nets, &tc)?);
            save_net(&dir, "prop1", &nets.prop1)?;
            save_net(&dir, "prop2", &nets.prop2)?;
            save_net(&dir, "rel1", &nets.rel1)?;
            save_net(&dir, "rel2", &nets.rel2)?;
            m
        }
    };
    write_metrics(&dir, "metrics.json", &metrics)?;
    print_metrics(&metrics);
    Ok(())
}

/// Evaluate previously trained checkpoints; writes `eval_metrics.json`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<(), CliError> {
    let task = require_task(cfg)?;
    let dir = task_dir(cfg, task)?;
    let tc = cfg.task_config();
    tc.validate().map_err(CliError::from)?;
    let metrics = match task {
        Task::MnistSum => mnist_sum::eval_mnist_sum(&load_net(&dir, "digit")?, &tc)?,
        Task::Shapes => {
            let nets = shapes::ShapeNets {
                color: load_net(&dir, "color")?,
                shape: load_net(&dir, "shape")?,
                above: load_net(&dir, "above")?,
            };
            shapes::eval_shapes(&nets, &tc)?
        }
        Task::ToyNer => {
            let nets =
                ner::NerNets { person: load_net(&dir, "person")?, works: load_net(&dir, "works")? };
            ner::eval_toy_ner(&nets, &tc)?
        }
        Task::MathInference => {
            let nets = math::MathNets {
                prop1: load_net(&dir, "prop1")?,
                prop2: load_net(&dir, "prop2")?,
                rel1: load_net(&dir, "rel1")?,
                rel2: load_net(&dir, "rel2")?,
            };
            math::eval_math_inference(&nets, &tc)?
        }
    };
    write_metrics(&dir, "eval_metrics.json", &metrics)?;
    print_metrics(&metrics);
    Ok(())
}

fn run_task_once(task: Task, cfg: &RunConfig) -> Result<Metrics, TaskError> {
    let tc = cfg.task_config();
    match task {
        Task::MnistSum => mnist_sum::run_mnist_sum(&tc),
        Task::Shapes => shapes::run_shapes(&tc),
        Task::ToyNer => ner::run_toy_ner(&tc),
        Task::MathInference => math::run_math_inference(&tc),
    }
}

/// Benchmark the requested tasks (all four by default): averages per-sample
/// times and peak sampled RSS over `cfg.runs` full runs each.
pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRecord>, CliError> {
    let tasks: Vec<Task> = match cfg.task {
        Some(t) => vec![t],
        None => Task::ALL.to_vec(),
    };
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out.display())))?;

    let mut records = Vec::new();
    for task in tasks {
        let mut train_ms = 0.0;
        let mut test_ms = 0.0;
        let mut peak_mb = 0.0;
        for run in 0..cfg.runs {
            let sampler = RssSampler::start();
            let metrics = run_task_once(task, cfg)?;
            peak_mb += sampler.finish();
            train_ms += metrics.get("train_ms_per_sample").copied().unwrap_or(0.0);
            test_ms += metrics.get("test_ms_per_sample").copied().unwrap_or(0.0);
            eprintln!("bench {} run {}/{} done", task.name(), run + 1, cfg.runs);
        }
        let n = cfg.runs as f64;
        records.push(BenchRecord {
            task: task.name().to_string(),
            mode: cfg.mode_label(),
            train_ms_per_sample: train_ms / n,
            test_ms_per_sample: test_ms / n,
            peak_mem_mb: peak_mb / n,
            runs: cfg.runs as u32,
        });
    }

    fs::write(cfg.out.join("report.csv"), to_csv(&records))?;
    fs::write(cfg.out.join("report.md"), to_markdown(&records))?;
    print!("{}", to_markdown(&records));
    Ok(records)
}
