//! Result tables: per-run accuracies, summaries and sign-rank tests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};

use super::dataset::ObsSetting;
use super::signrank::signrank_test;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: String,
    pub setting_sigma: f64,
    pub setting_isi: f64,
    pub classifier: ClassifierKind,
    pub hyperparam: f64,
    pub run: usize,
    pub accuracy: f64,
    pub entropy: f64,
}

/// Hyperparameter chosen on the validation split of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub task: String,
    pub setting_sigma: f64,
    pub setting_isi: f64,
    pub classifier: ClassifierKind,
    pub run: usize,
    pub selected: f64,
    pub validation_accuracy: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub setting_sigma: f64,
    pub setting_isi: f64,
    pub classifier: ClassifierKind,
    pub hyperparam: f64,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignrankRow {
    pub task: String,
    pub setting_sigma: f64,
    pub setting_isi: f64,
    pub hypothesis: String,
    pub better: ClassifierKind,
    pub worse: ClassifierKind,
    /// p-value of `better > worse`, or `NA` when either classifier is absent.
    pub p_value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub task: String,
    pub setting: ObsSetting,
    pub master_seed: u64,
    /// Mean entropy over every train and test posterior.
    pub mean_entropy: f64,
    pub batches: Vec<Vec<usize>>,
    pub rows: Vec<ResultRow>,
    pub selections: Vec<SelectionRow>,
}

impl RunResult {
    /// Test accuracies by run for one classifier and hyperparameter.
    pub fn accuracies(&self, kind: ClassifierKind, hyper: f64) -> Vec<f64> {
        let mut v: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.classifier == kind && r.hyperparam == hyper)
            .map(|r| (r.run, r.accuracy))
            .collect();
        v.sort_by_key(|(r, _)| *r);
        v.into_iter().map(|(_, a)| a).collect()
    }

    pub fn mean_accuracy(&self, kind: ClassifierKind, hyper: f64) -> Option<f64> {
        let a = self.accuracies(kind, hyper);
        (!a.is_empty()).then(|| mean(&a))
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.rows)
    }

    pub fn signrank_table(&self) -> Result<Vec<SignrankRow>> {
        signrank_table(&self.rows)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); zero for a single value.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

type GroupKey = (String, u64, u64, ClassifierKind, u64);

fn group(rows: &[ResultRow]) -> BTreeMap<GroupKey, Vec<&ResultRow>> {
    let mut g: BTreeMap<GroupKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        g.entry((r.task.clone(), r.setting_sigma.to_bits(), r.setting_isi.to_bits(), r.classifier, r.hyperparam.to_bits()))
            .or_default()
            .push(r);
    }
    g
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    group(rows)
        .into_values()
        .map(|rs| {
            let acc: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
            let ent: Vec<f64> = rs.iter().map(|r| r.entropy).collect();
            let r0 = rs[0];
            SummaryRow {
                task: r0.task.clone(),
                setting_sigma: r0.setting_sigma,
                setting_isi: r0.setting_isi,
                classifier: r0.classifier,
                hyperparam: r0.hyperparam,
                runs: rs.len(),
                mean_accuracy: mean(&acc),
                std_accuracy: sample_std(&acc),
                mean_entropy: mean(&ent),
            }
        })
        .collect()
}

/// Hypotheses tested per setting: the first classifier beats the second.
pub const HYPOTHESES: [(&str, ClassifierKind, ClassifierKind); 7] = [
    ("H1", ClassifierKind::Lims, ClassifierKind::Kme),
    ("H2", ClassifierKind::Lims, ClassifierKind::Ppk),
    ("H3", ClassifierKind::Kme, ClassifierKind::Ppk),
    ("H4", ClassifierKind::Lims, ClassifierKind::Bklr),
    ("H5", ClassifierKind::Kme, ClassifierKind::Bklr),
    ("H6", ClassifierKind::Ppk, ClassifierKind::Bklr),
    ("H7", ClassifierKind::Lims, ClassifierKind::Map),
];

/// Hyperparameter compared for `kind`: the headline value when present,
/// otherwise the smallest value in the rows.
fn compared_hyperparam(rows: &[&ResultRow], kind: ClassifierKind) -> Option<f64> {
    let mut hs: Vec<f64> = rows.iter().filter(|r| r.classifier == kind).map(|r| r.hyperparam).collect();
    hs.sort_by(f64::total_cmp);
    if hs.contains(&kind.default_hyperparam()) {
        Some(kind.default_hyperparam())
    } else {
        hs.first().copied()
    }
}

pub fn signrank_table(rows: &[ResultRow]) -> Result<Vec<SignrankRow>> {
    let mut by_setting: BTreeMap<(String, u64, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_setting.entry((r.task.clone(), r.setting_sigma.to_bits(), r.setting_isi.to_bits())).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((task, sigma, isi), rs) in by_setting {
        let accs = |kind: ClassifierKind| -> Option<Vec<f64>> {
            let h = compared_hyperparam(&rs, kind)?;
            let mut v: Vec<(usize, f64)> =
                rs.iter().filter(|r| r.classifier == kind && r.hyperparam == h).map(|r| (r.run, r.accuracy)).collect();
            v.sort_by_key(|(r, _)| *r);
            Some(v.into_iter().map(|(_, a)| a).collect())
        };
        for (name, better, worse) in HYPOTHESES {
            // too few paired runs also reports NA
            let p_value = match (accs(better), accs(worse)) {
                (Some(a), Some(b)) => match signrank_test(&a, &b) {
                    Ok(p) => format!("{p}"),
                    Err(Error::InsufficientData(_)) => "NA".to_string(),
                    Err(e) => return Err(e),
                },
                _ => "NA".to_string(),
            };
            out.push(SignrankRow {
                task: task.clone(),
                setting_sigma: f64::from_bits(sigma),
                setting_isi: f64::from_bits(isi),
                hypothesis: name.to_string(),
                better,
                worse,
                p_value,
            });
        }
    }
    Ok(out)
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))?;
    Ok(())
}

pub const RESULT_HEADER: [&str; 8] = ["task", "setting_sigma", "setting_isi", "classifier", "hyperparam", "run", "accuracy", "entropy"];

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows(path, rows, &RESULT_HEADER)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_rows(
        path,
        rows,
        &["task", "setting_sigma", "setting_isi", "classifier", "hyperparam", "runs", "mean_accuracy", "std_accuracy", "mean_entropy"],
    )
}

pub fn write_signrank(path: &Path, rows: &[SignrankRow]) -> Result<()> {
    write_rows(path, rows, &["task", "setting_sigma", "setting_isi", "hypothesis", "better", "worse", "p_value"])
}

pub fn write_selections(path: &Path, rows: &[SelectionRow]) -> Result<()> {
    write_rows(
        path,
        rows,
        &["task", "setting_sigma", "setting_isi", "classifier", "run", "selected", "validation_accuracy", "accuracy"],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kind: ClassifierKind, run: usize, acc: f64) -> ResultRow {
        ResultRow {
            task: "task2".into(),
            setting_sigma: 0.3,
            setting_isi: 0.5,
            classifier: kind,
            hyperparam: kind.default_hyperparam(),
            run,
            accuracy: acc,
            entropy: 4.0,
        }
    }

    #[test]
    fn summary_uses_sample_std() {
        let rows: Vec<_> = [0.9, 0.8, 1.0].iter().enumerate().map(|(i, a)| row(ClassifierKind::Lims, i, *a)).collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert!((s[0].mean_accuracy - 0.9).abs() < 1e-12);
        assert!((s[0].std_accuracy - 0.1).abs() < 1e-12);
    }

    #[test]
    fn missing_classifier_gives_na() {
        let mut rows = Vec::new();
        for r in 0..10 {
            rows.push(row(ClassifierKind::Lims, r, 0.9 + 0.001 * r as f64));
            rows.push(row(ClassifierKind::Bklr, r, 0.6));
        }
        let t = signrank_table(&rows).unwrap();
        let h4 = t.iter().find(|r| r.hypothesis == "H4").unwrap();
        assert_eq!(h4.p_value.parse::<f64>().unwrap(), 1.0 / 1024.0);
        assert_eq!(t.iter().find(|r| r.hypothesis == "H1").unwrap().p_value, "NA");
    }

    #[test]
    fn results_csv_round_trip() {
        let rows = vec![row(ClassifierKind::Ppk, 0, 0.75), row(ClassifierKind::Kme, 1, 0.5)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("task,setting_sigma,setting_isi,classifier,hyperparam,run,accuracy,entropy\n"));
        assert_eq!(read_results(&p).unwrap(), rows);
    }
}
