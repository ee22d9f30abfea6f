use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A point in model-parameter space, in original (not normalised) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// Cartesian-product discretisation of a parameter space.
///
/// Points are indexed in row-major order: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    names: Vec<String>,
    axes: Vec<Vec<f64>>,
}

impl ParamGrid {
    pub fn new(names: Vec<String>, axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        if names.len() != axes.len() {
            return Err(Error::invalid(format!("{} names for {} axes", names.len(), axes.len())));
        }
        for (name, axis) in names.iter().zip(&axes) {
            if axis.is_empty() {
                return Err(Error::invalid(format!("axis `{name}` is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(format!("axis `{name}` must be finite and strictly increasing")));
            }
        }
        Ok(ParamGrid { names, axes })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, dim: usize) -> &[f64] {
        &self.axes[dim]
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    /// Per-axis indices of point `idx`.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for (dim, axis) in self.axes.iter().enumerate().rev() {
            out[dim] = idx % axis.len();
            idx /= axis.len();
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn point(&self, idx: usize) -> ParamVector {
        let multi = self.multi_index(idx);
        ParamVector(multi.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect())
    }

    pub fn points(&self) -> impl Iterator<Item = ParamVector> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Content hash identifying the grid in persisted models.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (name, axis) in self.names.iter().zip(&self.axes) {
            h.update(name.as_bytes());
            h.update([0u8]);
            for v in axis {
                h.update(v.to_le_bytes());
            }
            h.update([0xffu8]);
        }
        h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

/// The double-well parameter grid: `d, kappa` in `{0.1, ..., 2.0}`,
/// `a` in `{-0.2, -0.1, 0, 0.1, 0.2}`; 2000 points.
pub fn sdw_default_grid() -> ParamGrid {
    let tenths = |lo: i32, hi: i32| (lo..=hi).map(|i| i as f64 / 10.0).collect::<Vec<_>>();
    ParamGrid::new(
        vec!["d".into(), "kappa".into(), "a".into()],
        vec![tenths(1, 20), tenths(1, 20), tenths(-2, 2)],
    )
    .expect("static grid is valid")
}

/// Per-axis affine map of a grid's bounding box onto the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCube {
    lo: Vec<f64>,
    span: Vec<f64>,
}

impl UnitCube {
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let mut lo = Vec::with_capacity(bounds.len());
        let mut span = Vec::with_capacity(bounds.len());
        for (i, &(min, max)) in bounds.iter().enumerate() {
            if !(max > min) {
                return Err(Error::invalid(format!("degenerate axis {i}: min = max = {min}")));
            }
            lo.push(min);
            span.push(max - min);
        }
        Ok(UnitCube { lo, span })
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn map(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.span))
            .map(|(v, (lo, span))| (v - lo) / span)
            .collect()
    }

    pub fn map_axis(&self, dim: usize, value: f64) -> f64 {
        (value - self.lo[dim]) / self.span[dim]
    }

    pub fn unmap(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lo.iter().zip(&self.span))
            .map(|(u, (lo, span))| lo + u * span)
            .collect()
    }
}

/// Unit-cube map of `grid`; fails on an axis with a single value.
pub fn normalize_grid_coords(grid: &ParamGrid) -> Result<UnitCube> {
    UnitCube::from_bounds(&grid.bounds())
}
