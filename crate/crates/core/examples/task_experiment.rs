//! Runs one task at one observation setting with every classifier at its
//! headline hyperparameter and prints mean accuracy per classifier.
//!
//! cargo run --release --example task_experiment -- task1 0.3 0.5 64

use std::time::Instant;

use lims::classifiers::ClassifierKind;
use lims::experiments::{headline_hyperparams, run_experiment, task_by_name, ExperimentConfig, ObsSetting};

fn main() -> lims::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let task = task_by_name(&arg(0, "task1"))?;
    let setting = ObsSetting::new(arg(1, "0.3").parse().unwrap(), arg(2, "0.5").parse().unwrap());
    let cfg = ExperimentConfig {
        n_particles: arg(3, "64").parse().unwrap(),
        master_seed: arg(4, "2024").parse().unwrap(),
        ..Default::default()
    };
    let hyper = headline_hyperparams(&ClassifierKind::ALL);

    let start = Instant::now();
    let res = run_experiment(&task, &setting, &hyper, &cfg)?;
    println!("{} sigma={} isi={}  mean entropy {:.3}  ({:.1?})", task.name, setting.sigma, setting.isi, res.mean_entropy, start.elapsed());
    for s in res.summary() {
        println!("  {:<5} {:>7}  {:.3} +- {:.3}", s.classifier, s.hyperparam, s.mean_accuracy, s.std_accuracy);
    }
    for row in res.signrank_table()? {
        println!("  {} {} > {}: p = {}", row.hypothesis, row.better, row.worse, row.p_value);
    }
    Ok(())
}
