use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::grid::{ParamGrid, ParamVector};

/// Multinomial approximation of a parameter posterior on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    grid: Arc<ParamGrid>,
    weights: Vec<f64>,
}

/// Prior mass over grid points.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Prior {
    #[default]
    Uniform,
    Weights(Vec<f64>),
}

const SUM_TOLERANCE: f64 = 1e-12;

impl GridPosterior {
    /// Wrap already-normalised weights; the sum must be one within 1e-12.
    pub fn new(grid: Arc<ParamGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} weights for a grid of {} points",
                weights.len(),
                grid.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("posterior weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("posterior weights sum to {sum}, not 1")));
        }
        Ok(GridPosterior { grid, weights })
    }

    /// Normalise arbitrary non-negative mass.
    pub fn from_mass(grid: Arc<ParamGrid>, mut mass: Vec<f64>) -> Result<Self> {
        let total: f64 = mass.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical("posterior has no finite mass".into()));
        }
        mass.iter_mut().for_each(|w| *w /= total);
        Self::new(grid, mass)
    }

    pub fn one_hot(grid: Arc<ParamGrid>, idx: usize) -> Result<Self> {
        if idx >= grid.len() {
            return Err(Error::invalid(format!("index {idx} outside grid of {}", grid.len())));
        }
        let mut w = vec![0.0; grid.len()];
        w[idx] = 1.0;
        Self::new(grid, w)
    }

    pub fn uniform(grid: Arc<ParamGrid>) -> Self {
        let n = grid.len();
        GridPosterior { weights: vec![1.0 / n as f64; n], grid }
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices and weights of grid points carrying non-zero mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().copied().enumerate().filter(|(_, w)| *w > 0.0)
    }

    pub fn entropy(&self) -> f64 {
        posterior_entropy(self)
    }

    /// Index of the heaviest point; the lowest index wins ties.
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn same_grid(&self, other: &GridPosterior) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("posteriors live on different grids".into()))
        }
    }

    /// Write `idx,<axis names...>,weight`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["idx".to_string()];
        header.extend(self.grid.names().iter().cloned());
        header.push("weight".into());
        w.write_record(&header)?;
        for (idx, &weight) in self.weights.iter().enumerate() {
            let mut row = vec![idx.to_string()];
            row.extend(self.grid.point(idx).0.iter().map(f64::to_string));
            row.push(weight.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Read a posterior file written for `grid`, checking every coordinate.
    pub fn read_csv(path: &Path, grid: Arc<ParamGrid>) -> Result<Self> {
        let bad = |reason: String| Error::Format { path: path.into(), reason };
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut expected = vec!["idx".to_string()];
        expected.extend(grid.names().iter().cloned());
        expected.push("weight".into());
        if header != expected {
            return Err(bad(format!("expected header `{}`", expected.join(","))));
        }
        let mut weights = vec![f64::NAN; grid.len()];
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            let idx: usize = rec[0].parse().map_err(|_| bad(format!("bad index `{}`", &rec[0])))?;
            if idx >= grid.len() {
                return Err(bad(format!("index {idx} outside grid")));
            }
            let point = grid.point(idx);
            for (dim, v) in point.0.iter().enumerate() {
                let read: f64 = rec[dim + 1].parse().map_err(|_| bad(format!("bad coordinate in row {idx}")))?;
                if read != *v {
                    return Err(Error::GridMismatch(format!(
                        "{}: row {idx} has {} = {read}, grid has {v}",
                        path.display(),
                        grid.names()[dim]
                    )));
                }
            }
            weights[idx] = rec[grid.dims() + 1]
                .parse()
                .map_err(|_| bad(format!("bad weight in row {idx}")))?;
            rows += 1;
        }
        if rows != grid.len() || weights.iter().any(|w| w.is_nan()) {
            return Err(bad(format!("expected {} rows, found {rows}", grid.len())));
        }
        GridPosterior::new(grid, weights)
    }
}

/// `pi_n ∝ exp(loglik_n) * prior_n`, computed with max-subtraction.
pub fn posterior_from_logliks(grid: Arc<ParamGrid>, logliks: &[f64], prior: &Prior) -> Result<GridPosterior> {
    if logliks.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} log-likelihoods for a grid of {} points",
            logliks.len(),
            grid.len()
        )));
    }
    if logliks.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::Numerical("log-likelihood is NaN or +inf".into()));
    }
    let log_prior: Vec<f64> = match prior {
        Prior::Uniform => vec![0.0; grid.len()],
        Prior::Weights(w) => {
            if w.len() != grid.len() {
                return Err(Error::GridMismatch(format!("prior has {} weights, grid {}", w.len(), grid.len())));
            }
            if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || !w.iter().any(|v| *v > 0.0) {
                return Err(Error::invalid("prior weights must be non-negative and not all zero"));
            }
            w.iter().map(|v| v.ln()).collect()
        }
    };
    let scores: Vec<f64> = logliks.iter().zip(&log_prior).map(|(l, p)| l + p).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numerical("every grid point has zero likelihood".into()));
    }
    let mass: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    GridPosterior::from_mass(grid, mass)
}

/// Evaluate `loglik` on every grid point and normalise.
pub fn grid_posterior<F>(grid: Arc<ParamGrid>, loglik: F, prior: &Prior) -> Result<GridPosterior>
where
    F: Fn(usize, &ParamVector) -> Result<f64>,
{
    let logliks = (0..grid.len())
        .map(|i| loglik(i, &grid.point(i)))
        .collect::<Result<Vec<_>>>()?;
    posterior_from_logliks(grid, &logliks, prior)
}

/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn posterior_entropy(p: &GridPosterior) -> f64 {
    -p.weights.iter().filter(|w| **w > 0.0).map(|w| w * w.ln()).sum::<f64>()
}

pub fn map_estimate(p: &GridPosterior) -> ParamVector {
    p.grid.point(p.map_index())
}

/// Sum out every axis not listed in `keep` (given in the order they should appear).
pub fn marginalize(p: &GridPosterior, keep: &[usize]) -> Result<GridPosterior> {
    let grid = &p.grid;
    if keep.is_empty() {
        return Err(Error::invalid("marginalisation must keep at least one axis"));
    }
    let mut seen = vec![false; grid.dims()];
    for &k in keep {
        if k >= grid.dims() || std::mem::replace(&mut seen[k], true) {
            return Err(Error::invalid(format!("invalid or repeated axis {k}")));
        }
    }
    if keep.iter().copied().eq(0..grid.dims()) {
        return Ok(p.clone());
    }
    let sub = Arc::new(ParamGrid::new(
        keep.iter().map(|&k| grid.names()[k].clone()).collect(),
        keep.iter().map(|&k| grid.axis(k).to_vec()).collect(),
    )?);
    let mut mass = vec![0.0; sub.len()];
    for (idx, &w) in p.weights.iter().enumerate() {
        let multi = grid.multi_index(idx);
        let kept: Vec<usize> = keep.iter().map(|&k| multi[k]).collect();
        mass[sub.flat_index(&kept)] += w;
    }
    GridPosterior::from_mass(sub, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::grid::sdw_default_grid;

    fn line(n: usize) -> Arc<ParamGrid> {
        Arc::new(ParamGrid::new(vec!["x".into()], vec![(0..n).map(|i| i as f64).collect()]).unwrap())
    }

    #[test]
    fn closed_form_normalisation() {
        let p = posterior_from_logliks(line(2), &[0.0, 3f64.ln()], &Prior::Uniform).unwrap();
        assert!((p.weights()[0] - 0.25).abs() < 1e-15);
        assert!((p.weights()[1] - 0.75).abs() < 1e-15);
        assert!((posterior_entropy(&p) - 0.562_335_144_618_808_3).abs() < 1e-12);
        assert_eq!(map_estimate(&p).0, vec![1.0]);
    }

    #[test]
    fn constant_loglik_returns_prior() {
        let prior = vec![0.1, 0.2, 0.3, 0.4];
        let p = posterior_from_logliks(line(4), &[-7.0; 4], &Prior::Weights(prior.clone())).unwrap();
        for (a, b) in p.weights().iter().zip(&prior) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn stable_for_very_low_logliks() {
        let p = posterior_from_logliks(line(3), &[-1e6, -1e6 - 1.0, f64::NEG_INFINITY], &Prior::Uniform).unwrap();
        assert!(p.weights().iter().all(|w| w.is_finite()));
        assert_eq!(p.weights()[2], 0.0);
    }

    #[test]
    fn all_neg_infinite_is_error() {
        assert!(posterior_from_logliks(line(2), &[f64::NEG_INFINITY; 2], &Prior::Uniform).is_err());
        assert!(posterior_from_logliks(line(2), &[0.0, f64::NAN], &Prior::Uniform).is_err());
    }

    #[test]
    fn entropy_bounds() {
        let g = Arc::new(sdw_default_grid());
        let u = GridPosterior::uniform(g.clone());
        assert!((u.entropy() - 2000f64.ln()).abs() < 1e-9);
        assert_eq!(GridPosterior::one_hot(g, 17).unwrap().entropy(), 0.0);
    }

    #[test]
    fn map_tie_breaks_low() {
        let u = GridPosterior::uniform(line(5));
        assert_eq!(u.map_index(), 0);
        let oh = GridPosterior::one_hot(line(5), 3).unwrap();
        assert_eq!(map_estimate(&oh).0, vec![3.0]);
    }

    #[test]
    fn marginal_of_uniform_is_uniform() {
        let g = Arc::new(
            ParamGrid::new(
                vec!["x".into(), "y".into()],
                vec![(0..20).map(f64::from).collect(), (0..5).map(f64::from).collect()],
            )
            .unwrap(),
        );
        let u = GridPosterior::uniform(g.clone());
        let m = marginalize(&u, &[0]).unwrap();
        assert_eq!(m.grid().len(), 20);
        assert!(m.weights().iter().all(|w| (w - 0.05).abs() < 1e-15));
        assert_eq!(marginalize(&u, &[0, 1]).unwrap(), u);
        assert!(marginalize(&u, &[]).is_err());
        assert!(marginalize(&u, &[1, 1]).is_err());
    }

    #[test]
    fn rejects_unnormalised() {
        assert!(GridPosterior::new(line(2), vec![0.5, 0.6]).is_err());
        assert!(GridPosterior::new(line(2), vec![1.0]).is_err());
        assert!(GridPosterior::new(line(2), vec![1.5, -0.5]).is_err());
    }
}
