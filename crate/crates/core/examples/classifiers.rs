//! Trains every model-space classifier on posteriors from a small Task 2
//! dataset and reports test accuracy.
//!
//! cargo run --release --example classifiers -- 40 32

use std::sync::Arc;

use lims::classifiers::{
    bklr_predict, bklr_train, gram_klr_predict, gram_klr_train, kme_predict, kme_train, lims_predict, lims_train, map_classifier_predict,
    map_classifier_train, GramKind, KernelConfig, TrainConfig,
};
use lims::experiments::{generate_dataset, task_by_name, ObsSetting};
use lims::inference::{GridPosterior, ParamGrid, ParticleFilterConfig, SdwPosteriorEngine};

fn accuracy(pred: impl Fn(usize) -> lims::Result<f64>, labels: &[bool]) -> lims::Result<f64> {
    let mut hits = 0;
    for (i, &c) in labels.iter().enumerate() {
        hits += usize::from((pred(i)? >= 0.5) == c);
    }
    Ok(hits as f64 / labels.len() as f64)
}

fn main() -> lims::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n_per_class = args.first().copied().unwrap_or(40);
    let n_particles = args.get(1).copied().unwrap_or(32);

    let data = generate_dataset(&task_by_name("task2")?, &ObsSetting::new(0.3, 0.5), n_per_class, 7)?;
    let grid = Arc::new(ParamGrid::new(
        vec!["d".into(), "kappa".into(), "a".into()],
        vec![(1..=10).map(|i| 0.2 * i as f64).collect(), (1..=10).map(|i| 0.2 * i as f64).collect(), vec![-0.2, -0.1, 0.0, 0.1, 0.2]],
    )?);
    let engine = SdwPosteriorEngine::new(grid, ParticleFilterConfig::with_particles(n_particles))?;
    let infer = |split: &[lims::experiments::LabelledSeries]| -> lims::Result<Vec<(GridPosterior, bool)>> {
        split.iter().map(|s| Ok((engine.infer(&s.series, s.key(), data.master_seed)?, s.label))).collect()
    };
    let train = infer(&data.train)?;
    let test = infer(&data.test)?;
    let labels: Vec<bool> = test.iter().map(|(_, c)| *c).collect();
    println!("{} training and {} test posteriors", train.len(), test.len());

    let cfg = TrainConfig::default();
    let lims = lims_train(&train, &cfg, KernelConfig::Rho(0.05))?;
    let kme = kme_train(&train, &cfg, KernelConfig::Rho(0.05))?;
    let ppk = gram_klr_train(&train, GramKind::Ppk, &cfg, KernelConfig::Alpha(1.0))?;
    let map = map_classifier_train(&train, &cfg, KernelConfig::Rho(0.05))?;
    let feats: Vec<[f64; 2]> = data.train.iter().map(|s| s.features()).collect();
    let train_labels: Vec<bool> = data.train.iter().map(|s| s.label).collect();
    let bklr = bklr_train(&feats, &train_labels, &cfg, KernelConfig::Rho(1.0))?;

    println!("lims {:.3}", accuracy(|i| lims_predict(&lims, &test[i].0), &labels)?);
    println!("kme  {:.3}", accuracy(|i| kme_predict(&kme, &test[i].0), &labels)?);
    println!("ppk  {:.3}", accuracy(|i| gram_klr_predict(&ppk, &test[i].0), &labels)?);
    println!("map  {:.3}", accuracy(|i| map_classifier_predict(&map, &test[i].0), &labels)?);
    println!("bklr {:.3}", accuracy(|i| Ok(bklr_predict(&bklr, data.test[i].features())), &labels)?);
    Ok(())
}
