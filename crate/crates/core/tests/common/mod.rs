//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use lims::classifiers::Objective;
use lims::inference::{GridPosterior, ParamGrid};
use lims::rng::rng_from_seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn small_grid() -> Arc<ParamGrid> {
    Arc::new(
        ParamGrid::new(
            vec!["d".into(), "kappa".into(), "a".into()],
            vec![vec![0.2, 0.8, 1.4, 2.0], vec![0.5, 1.0, 1.5], vec![-0.2, 0.2]],
        )
        .unwrap(),
    )
}

/// Grid point `idx` mapped to the unit cube, computed from the axes directly.
pub fn unit(grid: &ParamGrid, idx: usize) -> Vec<f64> {
    grid.multi_index(idx)
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let axis = grid.axis(k);
            (axis[i] - axis[0]) / (axis[axis.len() - 1] - axis[0])
        })
        .collect()
}

pub fn gauss(a: &[f64], b: &[f64], rho: f64) -> f64 {
    (-a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / rho).exp()
}

pub fn logistic(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// Random posterior with a random support size.
pub fn random_posterior(grid: &Arc<ParamGrid>, seed: u64) -> GridPosterior {
    let mut rng = rng_from_seed(seed);
    let keep: f64 = rng.random_range(0.1..1.0);
    let mass: Vec<f64> = (0..grid.len())
        .map(|i| if i == 0 || rng.random::<f64>() < keep { rng.random::<f64>().powi(3) + 1e-3 } else { 0.0 })
        .collect();
    GridPosterior::from_mass(grid.clone(), mass).unwrap()
}

pub fn labelled(grid: &Arc<ParamGrid>, n: usize, seed: u64) -> Vec<(GridPosterior, bool)> {
    (0..n).map(|i| (random_posterior(grid, seed * 1000 + i as u64), i % 2 == 0)).collect()
}

pub fn normal_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `-sum_k log sum_n pi_k^n p(c_k | theta_n)` straight from the definition.
pub fn lims_loss_oracle(grid: &ParamGrid, rho: f64, w: &[f64], data: &[(GridPosterior, bool)]) -> f64 {
    let pts: Vec<Vec<f64>> = (0..grid.len()).map(|i| unit(grid, i)).collect();
    let prob: Vec<f64> = pts
        .iter()
        .map(|t| logistic(pts.iter().zip(w).map(|(f, wj)| wj * gauss(t, f, rho)).sum()))
        .collect();
    data.iter()
        .map(|(p, c)| {
            let q: f64 = p.weights().iter().zip(&prob).map(|(pi, z)| pi * if *c { *z } else { 1.0 - z }).sum();
            -q.max(1e-12).ln()
        })
        .sum()
}

/// Double sum over all grid pairs.
pub fn kme_oracle(p1: &GridPosterior, p2: &GridPosterior, rho: f64) -> f64 {
    let g = p1.grid();
    let pts: Vec<Vec<f64>> = (0..g.len()).map(|i| unit(g, i)).collect();
    let mut s = 0.0;
    for (n, a) in p1.weights().iter().enumerate() {
        for (m, b) in p2.weights().iter().enumerate() {
            s += a * b * gauss(&pts[n], &pts[m], rho);
        }
    }
    s
}

pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, w: &[f64], h: f64) -> Vec<f64> {
    let mut x = w.to_vec();
    (0..w.len())
        .map(|j| {
            x[j] = w[j] + h;
            let up = f(&x);
            x[j] = w[j] - h;
            let down = f(&x);
            x[j] = w[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest absolute gradient discrepancy, relative to the largest gradient entry.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    analytic.iter().zip(numeric).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

pub fn objective_rel_error<O: Objective + ?Sized>(obj: &O, w: &[f64]) -> f64 {
    let mut g = vec![0.0; obj.dim()];
    obj.loss_grad(w, &mut g);
    let fd = central_difference(|x| obj.loss(x), w, 1e-6);
    rel_error(&g, &fd)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
    mat.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Upper-tail sign-rank p-value by enumerating every sign pattern of the
/// average ranks of the non-zero differences.
pub fn signrank_brute_force(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| v.abs() > 1e-12).collect();
    if d.is_empty() {
        return 1.0;
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|x| {
            let below = abs.iter().filter(|y| **y < *x - 1e-12).count() as f64;
            let tied = abs.iter().filter(|y| (**y - *x).abs() <= 1e-12).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            w >= observed - 1e-9
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}
