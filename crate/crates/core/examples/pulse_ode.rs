//! Fits the forcing amplitude and pulse length of the pulse ODE to a noisy
//! series by evaluating the likelihood on a grid.
//!
//! cargo run --release --example pulse_ode

use std::sync::Arc;

use lims::dynamics::PulseParams;
use lims::inference::{grid_posterior, map_estimate, marginalize, ode_loglik, NoiseModel, OdeModel, ParamGrid, Prior, PulseOdeModel};
use lims::observation::{regular_schedule, sample_observations};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn main() -> lims::Result<()> {
    let truth = PulseParams::new(0.125, 2.0)?;
    let model = PulseOdeModel::default();
    let traj = model.trajectory(&[truth.f, truth.t_p], 48.0)?;
    let sigma = 0.005;
    let ts = sample_observations(&traj, &regular_schedule(0.75, 0.0, 48.0)?, sigma, 11)?;
    let noise = NoiseModel::new(sigma)?;

    let grid = Arc::new(ParamGrid::new(vec!["f".into(), "t_p".into()], vec![linspace(0.05, 0.2, 31), linspace(0.5, 4.0, 36)])?);
    let post = grid_posterior(grid, |_, theta| ode_loglik(theta, &ts, &noise, &model), &Prior::Uniform)?;

    let map = map_estimate(&post);
    println!("truth f={} t_p={}", truth.f, truth.t_p);
    println!("MAP   f={:.3} t_p={:.2}", map.0[0], map.0[1]);
    for (axis, name) in [(0, "f"), (1, "t_p")] {
        let m = marginalize(&post, &[axis])?;
        let mean: f64 = m.grid().axis(0).iter().zip(m.weights()).map(|(x, w)| x * w).sum();
        let var: f64 = m.grid().axis(0).iter().zip(m.weights()).map(|(x, w)| w * (x - mean).powi(2)).sum();
        println!("{name:>4}: posterior mean {mean:.4}  sd {:.4}", var.sqrt());
    }
    Ok(())
}
