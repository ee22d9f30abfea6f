//! Simulates the stochastic double well and compares the long-run histogram
//! with the stationary density.
//!
//! cargo run --release --example double_well -- 1.0 0.8 0.1

use lims::dynamics::{double_well_drift, double_well_potential, equilibrium_density, simulate_sde, EquilibriumSampler, SdwParams, WellFamily};

fn main() -> lims::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let get = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
    let p = SdwParams::new(get(0, 1.0), get(1, 0.8), get(2, 0.1))?;

    let sampler = EquilibriumSampler::new(&p, WellFamily::DoubleWell)?;
    let (lo, hi) = sampler.support();
    let traj = simulate_sde(|x| double_well_drift(x, &p), p.kappa, p.d, 0.01, 20_000.0, 1)?;

    let bins = 24;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &traj.states {
        if x >= lo && x < hi {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    let centres: Vec<f64> = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let density = equilibrium_density(&centres, &p, double_well_potential)?;
    let total = traj.states.len() as f64;

    println!("d={} kappa={} a={}  support [{lo:.2}, {hi:.2}]", p.d, p.kappa, p.a);
    println!("{:>7} {:>9} {:>9}", "x", "empirical", "density");
    for b in 0..bins {
        let emp = counts[b] as f64 / (total * width);
        println!("{:>7.3} {:>9.4} {:>9.4}  {}", centres[b], emp, density[b], "#".repeat((emp * 40.0).round() as usize));
    }
    let right = traj.states.iter().filter(|x| **x > 0.0).count() as f64 / total;
    println!("fraction of time in the right well: {right:.3}");
    Ok(())
}
