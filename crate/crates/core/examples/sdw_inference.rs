//! Infers a grid posterior over (d, kappa, a) for one double-well series
//! with the particle filter.
//!
//! cargo run --release --example sdw_inference -- 128

use std::sync::Arc;
use std::time::Instant;

use lims::dynamics::{double_well_drift, simulate_sde, SdwParams};
use lims::inference::{map_estimate, marginalize, posterior_entropy, sdw_default_grid, ParticleFilterConfig, SdwPosteriorEngine};
use lims::observation::{regular_schedule, sample_observations};

fn main() -> lims::Result<()> {
    let n_particles = std::env::args().nth(1).map(|s| s.parse().expect("particle count")).unwrap_or(64);
    let truth = SdwParams::new(1.0, 1.0, 0.1)?;
    let traj = simulate_sde(|x| double_well_drift(x, &truth), truth.kappa, truth.d, 0.01, 50.0, 3)?;
    let ts = sample_observations(&traj, &regular_schedule(0.5, 0.0, 50.0)?, 0.3, 4)?;

    let engine = SdwPosteriorEngine::new(Arc::new(sdw_default_grid()), ParticleFilterConfig::with_particles(n_particles))?;
    let start = Instant::now();
    let post = engine.infer(&ts, 0, 2024)?;
    println!("{} grid points, {n_particles} particles, {:.1?}", engine.grid().len(), start.elapsed());

    let map = map_estimate(&post);
    println!("truth d={} kappa={} a={}", truth.d, truth.kappa, truth.a);
    println!("MAP   d={:.2} kappa={:.2} a={:.2}", map.0[0], map.0[1], map.0[2]);
    println!("entropy {:.3} (uniform {:.3})", posterior_entropy(&post), (engine.grid().len() as f64).ln());

    for (axis, name) in [(0, "d"), (1, "kappa"), (2, "a")] {
        let m = marginalize(&post, &[axis])?;
        println!("{name}:");
        for (x, w) in m.grid().axis(0).iter().zip(m.weights()) {
            if *w > 1e-3 {
                println!("  {x:>6.3} {w:.3} {}", "#".repeat((w * 60.0).round() as usize));
            }
        }
    }
    Ok(())
}
