//! Tensor grids and sampled functions on them.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product of per-axis point sets; points are enumerated in row-major order
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid", "needs at least one axis"));
        }
        for axis in &axes {
            if axis.is_empty() {
                return Err(Error::invalid("grid", "empty axis"));
            }
            if axis.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFinite("grid point"));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("grid", "axis points must be strictly increasing"));
            }
        }
        Ok(TensorGrid { axes })
    }

    /// `points` equispaced values on `[-half_width, half_width]` per axis.
    pub fn uniform(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if points < 2 || !(half_width > 0.0) {
            return Err(Error::invalid("grid", "need at least 2 points and a positive half-width"));
        }
        let step = 2.0 * half_width / (points - 1) as f64;
        let axis: Vec<f64> = (0..points).map(|i| -half_width + step * i as f64).collect();
        TensorGrid::new(vec![axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
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

    /// Per-axis indices of the point with row-major position `flat`.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            idx[i] = flat % axis.len();
            flat /= axis.len();
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Composite trapezoid weight of each point (product of per-axis weights).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|axis| {
                let n = axis.len();
                (0..n)
                    .map(|i| {
                        let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
                        let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
                        0.5 * (left + right)
                    })
                    .collect()
            })
            .collect();
        (0..self.len())
            .map(|flat| {
                self.unflatten(flat)
                    .iter()
                    .zip(&per_axis)
                    .map(|(&i, w)| w[i])
                    .product()
            })
            .collect()
    }
}

/// Complex samples on a tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: TensorGrid,
    pub samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: TensorGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid(
                "samples",
                format!("{} samples for a grid of {} points", samples.len(), grid.len()),
            ));
        }
        Ok(GridFunction { grid, samples })
    }

    pub fn from_fn(grid: TensorGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = grid.points().map(|x| f(&x)).collect();
        GridFunction { grid, samples }
    }

    pub fn zeros(grid: TensorGrid) -> Self {
        let samples = vec![Complex64::new(0.0, 0.0); grid.len()];
        GridFunction { grid, samples }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |self - other|` over the grid.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "functions live on different grids"));
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.grid.dim() {
            let _ = write!(out, "x{},", i + 1);
        }
        out.push_str("re,im\n");
        for (flat, z) in self.samples.iter().enumerate() {
            for x in self.grid.point(flat) {
                let _ = write!(out, "{x:.16e},");
            }
            let _ = writeln!(out, "{:.16e},{:.16e}", z.re, z.im);
        }
        out
    }

    /// Parses the CSV layout written by [`GridFunction::to_csv`].
    pub fn from_csv(text: &str, context: &str) -> Result<Self> {
        let csv_err = |line: usize, message: String| Error::Csv {
            context: context.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| csv_err(1, "empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[cols.len() - 2] != "re" || cols[cols.len() - 1] != "im" {
            return Err(csv_err(1, "header must be x1,...,xn,re,im".into()));
        }
        let dim = cols.len() - 2;
        for (i, c) in cols[..dim].iter().enumerate() {
            if *c != format!("x{}", i + 1) {
                return Err(csv_err(1, format!("unexpected column `{c}`")));
            }
        }
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut samples = Vec::new();
        for (lineno, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| csv_err(lineno + 1, e.to_string()))?;
            if vals.len() != dim + 2 {
                return Err(csv_err(lineno + 1, format!("expected {} fields", dim + 2)));
            }
            coords.push(vals[..dim].to_vec());
            samples.push(Complex64::new(vals[dim], vals[dim + 1]));
        }
        let mut axes = vec![Vec::new(); dim];
        for (i, axis) in axes.iter_mut().enumerate() {
            let mut v: Vec<f64> = coords.iter().map(|c| c[i]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            *axis = v;
        }
        let grid = TensorGrid::new(axes).map_err(|e| csv_err(0, e.to_string()))?;
        if grid.len() != samples.len() {
            return Err(csv_err(0, "rows do not form a full tensor grid".into()));
        }
        for (flat, c) in coords.iter().enumerate() {
            if grid.point(flat) != *c {
                return Err(csv_err(flat + 2, "rows are not in row-major grid order".into()));
            }
        }
        Ok(GridFunction { grid, samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_order() {
        let g = TensorGrid::new(vec![vec![0.0, 1.0], vec![-1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(1), vec![0.0, 0.0]);
        assert_eq!(g.point(3), vec![1.0, -1.0]);
        for i in 0..6 {
            assert_eq!(g.flatten(&g.unflatten(i)), i);
        }
    }

    #[test]
    fn rejects_unsorted_axis() {
        assert!(TensorGrid::new(vec![vec![0.0, 0.0]]).is_err());
        assert!(TensorGrid::new(vec![]).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = TensorGrid::uniform(2, 1.0, 5).unwrap();
        let w = g.trapezoid_weights();
        let total: f64 = w.iter().sum();
        assert!((total - 4.0).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let g = TensorGrid::uniform(2, 2.0, 4).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::new(x[0] * x[1], x[0] - 0.1));
        let text = f.to_csv();
        assert!(text.starts_with("x1,x2,re,im\n"));
        let back = GridFunction::from_csv(&text, "memory").unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_errors_carry_line() {
        let err = GridFunction::from_csv("x1,re,im\n0.0,1.0\n", "f.csv").unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }));
        let err = GridFunction::from_csv("x1,re,im\n1.0,0,0\n0.0,0,0\n", "f.csv").unwrap_err();
        assert!(matches!(err, Error::Csv { .. }));
    }
}
