//! One-sided Wilcoxon signed-rank test on paired accuracies.
//!
//! cargo run --example signrank

use lims::experiments::signrank_test;

fn main() -> lims::Result<()> {
    let lims = [0.93, 0.95, 0.91, 0.96, 0.94, 0.92, 0.95, 0.97, 0.93, 0.94];
    let kme = [0.90, 0.94, 0.91, 0.92, 0.93, 0.90, 0.93, 0.95, 0.92, 0.90];
    let map = [0.86, 0.88, 0.85, 0.90, 0.87, 0.85, 0.89, 0.91, 0.86, 0.88];

    for (name, other) in [("kme", &kme), ("map", &map)] {
        let p = signrank_test(&lims, other)?;
        let reverse = signrank_test(other, &lims)?;
        println!("lims > {name}: p = {p:.5}   ({name} > lims: p = {reverse:.5})");
    }
    // exact below 13 non-zero differences, normal approximation above
    let a: Vec<f64> = (0..30).map(|i| 0.9 + 0.002 * (i % 7) as f64).collect();
    let b: Vec<f64> = (0..30).map(|i| 0.9 + 0.0015 * (i % 5) as f64).collect();
    println!("n=30: p = {:.4}", signrank_test(&a, &b)?);
    Ok(())
}
