//! Kernels on parameter vectors and on grid posteriors.
//!
//! All distances are taken in unit-cube coordinates of the parameter grid.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{normalize_grid_coords, GridPosterior, ParamGrid, UnitCube};

/// Kernel hyperparameter: Gaussian width `rho` or product-kernel tempering `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelConfig {
    Rho(f64),
    Alpha(f64),
}

impl KernelConfig {
    pub fn value(&self) -> f64 {
        match *self {
            KernelConfig::Rho(v) | KernelConfig::Alpha(v) => v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.value();
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("kernel parameter must be > 0, got {v}")))
        }
    }

    pub(crate) fn rho(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            KernelConfig::Rho(r) => Ok(r),
            KernelConfig::Alpha(_) => Err(Error::invalid("expected a Gaussian width rho, got alpha")),
        }
    }

    pub(crate) fn alpha(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            KernelConfig::Alpha(a) => Ok(a),
            KernelConfig::Rho(_) => Err(Error::invalid("expected a tempering alpha, got rho")),
        }
    }
}

/// `exp(-||t1 - t2||^2 / rho)`.
#[inline]
pub fn gaussian_kernel(t1: &[f64], t2: &[f64], rho: f64) -> f64 {
    debug_assert_eq!(t1.len(), t2.len());
    let sq: f64 = t1.iter().zip(t2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / rho).exp()
}

/// Gaussian feature map whose centres are the points of a grid.
///
/// Products with the kernel matrix are computed axis by axis, since the
/// Gaussian kernel factorises over the Cartesian product. The dense matrix
/// is built on first use and gives predictions whose arithmetic matches a
/// direct evaluation of the feature map term by term.
#[derive(Debug)]
pub struct GridFeatures {
    grid: Arc<ParamGrid>,
    cube: UnitCube,
    rho: f64,
    unit_points: Vec<Vec<f64>>,
    axis_factors: Vec<Vec<f64>>,
    dense: OnceLock<Vec<f64>>,
}

impl GridFeatures {
    pub fn new(grid: Arc<ParamGrid>, rho: f64) -> Result<Self> {
        KernelConfig::Rho(rho).validate()?;
        let cube = normalize_grid_coords(&grid)?;
        let unit_points = grid.points().map(|p| cube.map(p.as_slice())).collect();
        let axis_factors = (0..grid.dims())
            .map(|dim| {
                let u: Vec<f64> = grid.axis(dim).iter().map(|&v| cube.map_axis(dim, v)).collect();
                let n = u.len();
                let mut f = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        f[i * n + j] = (-(u[i] - u[j]) * (u[i] - u[j]) / rho).exp();
                    }
                }
                f
            })
            .collect();
        Ok(GridFeatures { grid, cube, rho, unit_points, axis_factors, dense: OnceLock::new() })
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        &self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cube(&self) -> &UnitCube {
        &self.cube
    }

    /// Number of feature centres.
    pub fn len(&self) -> usize {
        self.unit_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_points.is_empty()
    }

    pub fn unit_point(&self, idx: usize) -> &[f64] {
        &self.unit_points[idx]
    }

    /// `[K(theta, c_1), ..., K(theta, c_m)]` for `theta` in original units.
    pub fn feature_map(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.grid.dims() {
            return Err(Error::GridMismatch(format!(
                "parameter vector has {} entries, grid has {} axes",
                theta.len(),
                self.grid.dims()
            )));
        }
        let u = self.cube.map(theta);
        Ok(self.unit_points.iter().map(|c| gaussian_kernel(&u, c, self.rho)).collect())
    }

    /// Dense kernel matrix over the grid, row-major.
    pub fn dense(&self) -> &[f64] {
        self.dense.get_or_init(|| {
            let m = self.len();
            let mut k = vec![0.0; m * m];
            for i in 0..m {
                k[i * m + i] = gaussian_kernel(&self.unit_points[i], &self.unit_points[i], self.rho);
                for j in 0..i {
                    let v = gaussian_kernel(&self.unit_points[i], &self.unit_points[j], self.rho);
                    k[i * m + j] = v;
                    k[j * m + i] = v;
                }
            }
            k
        })
    }

    /// `sum_j w_j K(c_n, c_j)` for every centre `n`, summed in index order.
    pub fn field_exact(&self, w: &[f64]) -> Vec<f64> {
        let m = self.len();
        self.dense()
            .chunks_exact(m)
            .map(|row| row.iter().zip(w).fold(0.0, |acc, (k, w)| acc + w * k))
            .collect()
    }

    /// `K v` through the per-axis factorisation.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let shape = self.grid.shape();
        let m = self.len();
        debug_assert_eq!(v.len(), m);
        let mut cur = v.to_vec();
        let mut tmp = vec![0.0; m];
        for (axis, factor) in self.axis_factors.iter().enumerate() {
            let n = shape[axis];
            let inner: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            tmp.iter_mut().for_each(|t| *t = 0.0);
            for o in 0..outer {
                for i in 0..n {
                    let dst = (o * n + i) * inner;
                    for j in 0..n {
                        let kij = factor[i * n + j];
                        if kij == 0.0 {
                            continue;
                        }
                        let src = (o * n + j) * inner;
                        for (t, c) in tmp[dst..dst + inner].iter_mut().zip(&cur[src..src + inner]) {
                            *t += kij * c;
                        }
                    }
                }
            }
            std::mem::swap(&mut cur, &mut tmp);
        }
        out.copy_from_slice(&cur);
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Discretised probability product kernel `sum_n (p1_n p2_n)^alpha`.
pub fn ppk_kernel(p1: &GridPosterior, p2: &GridPosterior, alpha: f64) -> Result<f64> {
    KernelConfig::Alpha(alpha).validate()?;
    p1.same_grid(p2)?;
    Ok(compensated_sum(
        p1.weights()
            .iter()
            .zip(p2.weights())
            .filter(|(a, b)| **a > 0.0 && **b > 0.0)
            .map(|(a, b)| a.powf(alpha) * b.powf(alpha)),
    ))
}

/// Kernel mean embedding inner product `sum_n sum_m p1_n p2_m k(theta_n, theta_m)`
/// with a Gaussian base kernel, evaluated directly over both supports.
pub fn kme_kernel(p1: &GridPosterior, p2: &GridPosterior, rho: f64) -> Result<f64> {
    KernelConfig::Rho(rho).validate()?;
    p1.same_grid(p2)?;
    let grid = p1.grid();
    let cube = normalize_grid_coords(grid)?;
    let s2: Vec<(f64, Vec<f64>)> = p2.support().map(|(j, w)| (w, cube.map(grid.point(j).as_slice()))).collect();
    let mut total = 0.0;
    for (i, wi) in p1.support() {
        let ui = cube.map(grid.point(i).as_slice());
        for (wj, uj) in &s2 {
            total += wi * wj * gaussian_kernel(&ui, uj, rho);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> Arc<ParamGrid> {
        Arc::new(
            ParamGrid::new(
                vec!["x".into(), "y".into(), "z".into()],
                vec![vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 2.0, 3.0], vec![-1.0, 1.0]],
            )
            .unwrap(),
        )
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_kernel(&[0.3, 0.2], &[0.3, 0.2], 0.5), 1.0);
        let rho: f64 = 0.7;
        let v = gaussian_kernel(&[0.0, 0.0], &[rho.sqrt(), 0.0], rho);
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(gaussian_kernel(&[0.1, 0.9], &[0.4, 0.2], 0.3), gaussian_kernel(&[0.4, 0.2], &[0.1, 0.9], 0.3));
    }

    #[test]
    fn separable_apply_matches_dense() {
        let f = GridFeatures::new(small_grid(), 0.3).unwrap();
        let m = f.len();
        let v: Vec<f64> = (0..m).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let mut out = vec![0.0; m];
        f.apply(&v, &mut out);
        let dense = f.field_exact(&v);
        for (a, b) in out.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn feature_map_rows_match_dense() {
        let f = GridFeatures::new(small_grid(), 0.05).unwrap();
        let m = f.len();
        for n in [0, 5, m - 1] {
            let row = f.feature_map(f.grid().point(n).as_slice()).unwrap();
            assert_eq!(row[n], 1.0);
            assert_eq!(&row[..], &f.dense()[n * m..(n + 1) * m]);
            assert!(row.iter().all(|v| *v > 0.0 && *v <= 1.0));
        }
    }

    #[test]
    fn ppk_examples() {
        let g = small_grid();
        let u = GridPosterior::uniform(g.clone());
        let n = g.len() as f64;
        assert_eq!(ppk_kernel(&u, &u, 1.0).unwrap(), 1.0 / n);
        let big = Arc::new(crate::inference::sdw_default_grid());
        let ub = GridPosterior::uniform(big.clone());
        assert_eq!(ppk_kernel(&ub, &ub, 1.0).unwrap(), 1.0 / big.len() as f64);
        let a = GridPosterior::one_hot(g.clone(), 3).unwrap();
        let b = GridPosterior::one_hot(g, 4).unwrap();
        assert_eq!(ppk_kernel(&a, &a, 1.0).unwrap(), 1.0);
        assert_eq!(ppk_kernel(&a, &b, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn kme_delta_reduction() {
        let g = small_grid();
        let cube = normalize_grid_coords(&g).unwrap();
        let a = GridPosterior::one_hot(g.clone(), 2).unwrap();
        let b = GridPosterior::one_hot(g.clone(), 17).unwrap();
        let expect = gaussian_kernel(&cube.map(g.point(2).as_slice()), &cube.map(g.point(17).as_slice()), 0.4);
        assert_eq!(kme_kernel(&a, &b, 0.4).unwrap(), expect);
        let u = GridPosterior::uniform(g);
        assert!((kme_kernel(&u, &a, 1e12).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_config_roles() {
        assert!(KernelConfig::Rho(0.0).validate().is_err());
        assert!(KernelConfig::Alpha(2.0).rho().is_err());
        assert_eq!(serde_json::to_string(&KernelConfig::Rho(0.05)).unwrap(), r#"{"rho":0.05}"#);
    }
}
