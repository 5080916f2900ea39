use serde::Serialize;

use crate::model::{BoundaryMode, TraitGrid};

/// Nodal values on the index window `start..start + values.len()`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Field {
    pub start: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(start: usize, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    /// Samples `f` on the active window of `grid` after `step` steps.
    pub fn sample(grid: &TraitGrid, step: usize, f: impl Fn(f64) -> f64) -> Self {
        let r = grid.active_range(step);
        Self {
            start: r.start,
            values: r.map(|i| f(grid.node(i))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(self.start).and_then(|k| self.values.get(k).copied())
    }

    /// Minimum value and the global index of its first occurrence.
    pub fn min_with_index(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, self.start);
        for (k, &v) in self.values.iter().enumerate() {
            if v < best.0 {
                best = (v, self.start + k);
            }
        }
        best
    }

    /// Subtracts the minimum so that it becomes exactly zero; returns it.
    pub fn normalize_min(&mut self) -> f64 {
        let (m, _) = self.min_with_index();
        for v in &mut self.values {
            *v -= m;
        }
        m
    }

    /// Largest absolute difference quotient.
    pub fn max_slope(&self, dx: f64) -> f64 {
        self.values
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dx).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation, extrapolating from the end segments.
    pub fn interpolate(&self, grid: &TraitGrid, x: f64) -> f64 {
        let sub = TraitGrid {
            x0: grid.node(self.start),
            n_points: self.len(),
            ..*grid
        };
        interp_values(&self.values, &sub, x)
    }
}

/// Linear interpolation of nodal `values` on `grid` (extrapolated outside).
#[inline]
pub fn interp_values(values: &[f64], grid: &TraitGrid, x: f64) -> f64 {
    let (i, s) = grid.locate(x);
    if s == 0.0 {
        return values[i];
    }
    if s == 1.0 {
        return values[i + 1];
    }
    values[i] + s * (values[i + 1] - values[i])
}

/// Left and right difference quotients at the nodes of the next window.
pub(crate) struct Slopes {
    pub out_start: usize,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Offset of the first output node inside the input field.
    pub offset: usize,
}

pub(crate) fn slopes(u: &Field, mode: BoundaryMode, dx: f64) -> Slopes {
    let v = &u.values;
    let n = v.len();
    let inv = 1.0 / dx;
    match mode {
        BoundaryMode::Shrink => {
            let left = (1..n - 1).map(|k| (v[k] - v[k - 1]) * inv).collect();
            let right = (1..n - 1).map(|k| (v[k + 1] - v[k]) * inv).collect();
            Slopes {
                out_start: u.start + 1,
                left,
                right,
                offset: 1,
            }
        }
        BoundaryMode::LinearExtrapolate => {
            let mut left = Vec::with_capacity(n);
            let mut right = Vec::with_capacity(n);
            for k in 0..n {
                // the ghost beyond each end repeats the end-segment slope
                let l = if k == 0 { v[1] - v[0] } else { v[k] - v[k - 1] };
                let r = if k == n - 1 {
                    v[n - 1] - v[n - 2]
                } else {
                    v[k + 1] - v[k]
                };
                left.push(l * inv);
                right.push(r * inv);
            }
            Slopes {
                out_start: u.start,
                left,
                right,
                offset: 0,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(mode: BoundaryMode) -> TraitGrid {
        TraitGrid::new(0.0, 0.5, 5, mode).unwrap()
    }

    #[test]
    fn interpolation_at_nodes_midpoints_and_beyond() {
        let g = grid(BoundaryMode::LinearExtrapolate);
        let v = [0.0, 1.0, 4.0, 9.0, 16.0];
        assert_eq!(interp_values(&v, &g, 1.0), 4.0);
        assert_eq!(interp_values(&v, &g, 0.75), 2.5);
        assert_eq!(interp_values(&v, &g, 2.5), 2.0 * 16.0 - 9.0);
        assert_eq!(interp_values(&v, &g, -0.5), -1.0);
    }

    #[test]
    fn shrink_slopes_drop_end_nodes() {
        let u = Field::new(2, vec![0.0, 1.0, 3.0, 6.0]);
        let s = slopes(&u, BoundaryMode::Shrink, 0.5);
        assert_eq!(s.out_start, 3);
        assert_eq!(s.left, vec![2.0, 4.0]);
        assert_eq!(s.right, vec![4.0, 6.0]);
    }

    #[test]
    fn extrapolated_slopes_copy_end_segments() {
        let u = Field::new(0, vec![0.0, 1.0, 3.0]);
        let s = slopes(&u, BoundaryMode::LinearExtrapolate, 1.0);
        assert_eq!(s.left, vec![1.0, 1.0, 2.0]);
        assert_eq!(s.right, vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn normalization_zeroes_minimum() {
        let mut u = Field::new(1, vec![0.4, 0.1 + 0.2, 0.5]);
        let m = u.normalize_min();
        assert_eq!(m, 0.1 + 0.2);
        assert_eq!(u.min_with_index(), (0.0, 2));
    }

    #[test]
    fn field_interpolation_respects_window_offset() {
        let g = grid(BoundaryMode::Shrink);
        let u = Field::new(1, vec![1.0, 2.0, 3.0]);
        assert_eq!(u.interpolate(&g, 0.5), 1.0);
        assert_eq!(u.interpolate(&g, 1.25), 2.5);
    }
}
