//! Parameters, grids and the vector-valued solution state.

use crate::error::{Error, Result};

/// The triple `(p, n, k)` together with the regularisation `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub p: f64,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
}

impl SystemParams {
    pub fn new(p: f64, n: usize, k: usize, epsilon: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must exceed 2, got {p}")));
        }
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "n must be 1 or 2, got {n}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self { p, n, k, epsilon })
    }

    /// `(a1, a2)` with `a2 = 1/((p-2)n + p)` and `a1 = n a2`.
    pub fn exponents(&self) -> (f64, f64) {
        let a2 = 1.0 / ((self.p - 2.0) * self.n as f64 + self.p);
        (self.n as f64 * a2, a2)
    }

    /// The large-time and Harnack statements are proved for `n >= 2`; one
    /// dimensional runs are supported but carry this note.
    pub fn dimension_note(&self) -> Option<&'static str> {
        (self.n < 2).then_some("n = 1 is outside the n >= 2 hypothesis of the large-time results")
    }
}

/// Uniform cell-centred grid on `[-L, L]^n`.
///
/// Cells are stored row-major: for `n = 2` the flat index is `i * shape[1] + j`
/// with `i` along axis 0. For `n = 1` the second axis has a single cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    shape: [usize; 2],
    half_extent: f64,
    h: [f64; 2],
}

impl Grid {
    pub fn new(n: usize, cells: &[usize], half_extent: f64) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidParameter(format!("n must be 1 or 2, got {n}")));
        }
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half extent must be positive, got {half_extent}"
            )));
        }
        let cells: Vec<usize> = match cells.len() {
            1 => vec![cells[0]; n],
            len if len == n => cells.to_vec(),
            len => {
                return Err(Error::InvalidParameter(format!(
                    "expected 1 or {n} cell counts, got {len}"
                )))
            }
        };
        if cells.contains(&0) {
            return Err(Error::InvalidParameter("cell counts must be positive".into()));
        }
        let shape = if n == 1 { [cells[0], 1] } else { [cells[0], cells[1]] };
        let h0 = 2.0 * half_extent / shape[0] as f64;
        let h = if n == 1 {
            [h0, h0]
        } else {
            [h0, 2.0 * half_extent / shape[1] as f64]
        };
        Ok(Self {
            n,
            shape,
            half_extent,
            h,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Cell counts along the active axes.
    pub fn cells(&self) -> Vec<usize> {
        self.shape[..self.n].to_vec()
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    /// Spacing along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.h[..self.n].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Volume of one cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h[..self.n].iter().product()
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.shape[1] + j
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.h[axis]
    }

    /// Cell centre of flat index `idx`; the second coordinate is 0 for `n = 1`.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let i = idx / self.shape[1];
        let j = idx % self.shape[1];
        if self.n == 1 {
            [self.coord(0, i), 0.0]
        } else {
            [self.coord(0, i), self.coord(1, j)]
        }
    }

    /// Euclidean distance of each cell centre to the origin.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let [x, y] = self.center(idx);
                x.hypot(y)
            })
            .collect()
    }

    /// Flat index of the cell whose centre is nearest to `point`; ties go to
    /// the higher index along each axis.
    pub fn nearest_cell(&self, point: [f64; 2]) -> usize {
        let locate = |axis: usize, x: f64| -> usize {
            let s = ((x + self.half_extent) / self.h[axis]).floor();
            (s.max(0.0) as usize).min(self.shape[axis] - 1)
        };
        let i = locate(0, point[0]);
        let j = if self.n == 1 { 0 } else { locate(1, point[1]) };
        self.index(i, j)
    }

    /// Number of cells between `idx` and the nearest outer boundary along any
    /// axis (0 for a cell touching the boundary).
    pub fn boundary_distance(&self, idx: usize) -> usize {
        let i = idx / self.shape[1];
        let j = idx % self.shape[1];
        let mut d = i.min(self.shape[0] - 1 - i);
        if self.n == 2 {
            d = d.min(j.min(self.shape[1] - 1 - j));
        }
        d
    }

    /// The same cell layout with every length divided by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Grid::new(self.n, &self.cells(), self.half_extent / factor)
    }
}

/// `k` nonnegative scalar fields on a common grid at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
    time: f64,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ShapeMismatch("a field needs at least one component".into()));
        }
        for (l, c) in components.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::ShapeMismatch(format!(
                    "component {l} has {} values, grid has {} cells",
                    c.len(),
                    grid.len()
                )));
            }
            if let Some(cell) = c.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "component {l} cell {cell} is negative or non-finite ({})",
                    c[cell]
                )));
            }
        }
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {time}")));
        }
        Ok(Self {
            grid,
            components,
            time,
        })
    }

    pub fn zeros(grid: Grid, k: usize, time: f64) -> Result<Self> {
        let len = grid.len();
        Self::new(grid, vec![vec![0.0; len]; k], time)
    }

    /// Build from a pointwise function `f(component, x)`.
    pub fn from_fn(
        grid: Grid,
        k: usize,
        time: f64,
        mut f: impl FnMut(usize, [f64; 2]) -> f64,
    ) -> Result<Self> {
        let components = (0..k)
            .map(|l| (0..grid.len()).map(|idx| f(l, grid.center(idx))).collect())
            .collect();
        Self::new(grid, components, time)
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, components: Vec<Vec<f64>>, time: f64) -> Self {
        Self {
            grid,
            components,
            time,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn component(&self, l: usize) -> Result<&[f64]> {
        self.components
            .get(l)
            .map(Vec::as_slice)
            .ok_or(Error::ComponentOutOfRange { index: l, k: self.k() })
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Pointwise Euclidean norm over components, `|u|(x)`.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|idx| {
                self.components
                    .iter()
                    .map(|c| c[idx] * c[idx])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Multiply every component by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.iter().map(|v| v * factor).collect())
            .collect();
        Self::new(self.grid.clone(), components, self.time)
    }

    /// Smallest distance (in cells) from any cell holding a value above
    /// `threshold` to the outer boundary, or `None` for an empty support.
    pub fn support_margin(&self, threshold: f64) -> Option<usize> {
        (0..self.grid.len())
            .filter(|&idx| self.components.iter().any(|c| c[idx] > threshold))
            .map(|idx| self.grid.boundary_distance(idx))
            .min()
    }
}

/// Component masses `M_l` and their Euclidean norm `|M|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    masses: Vec<f64>,
    total_norm: f64,
}

impl MassVector {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "masses must be finite and nonnegative, got {m}"
            )));
        }
        let total_norm = masses.iter().map(|m| m * m).sum::<f64>().sqrt();
        Ok(Self { masses, total_norm })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_norm(&self) -> f64 {
        self.total_norm
    }

    pub fn max(&self) -> f64 {
        self.masses.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_reject_degenerate_range() {
        assert!(SystemParams::new(2.0, 1, 1, 0.0).is_err());
        assert!(SystemParams::new(1.5, 1, 1, 0.0).is_err());
        assert!(SystemParams::new(3.0, 3, 1, 0.0).is_err());
        assert!(SystemParams::new(3.0, 1, 0, 0.0).is_err());
        assert!(SystemParams::new(3.0, 1, 1, -1.0).is_err());
        let p = SystemParams::new(3.0, 1, 2, 0.0).unwrap();
        assert!(p.dimension_note().is_some());
        assert!(SystemParams::new(3.0, 2, 2, 0.0).unwrap().dimension_note().is_none());
    }

    #[test]
    fn grid_centres_and_spacing() {
        let g = Grid::new(1, &[4], 1.0).unwrap();
        assert_eq!(g.h(0), 0.5);
        assert_eq!(g.center(0)[0], -0.75);
        assert_eq!(g.center(3)[0], 0.75);
        assert_eq!(g.cell_volume(), 0.5);

        let g2 = Grid::new(2, &[4, 2], 1.0).unwrap();
        assert_eq!(g2.len(), 8);
        assert_eq!(g2.h(1), 1.0);
        assert_eq!(g2.center(g2.index(3, 1)), [0.75, 0.5]);
        assert_eq!(g2.cell_volume(), 0.5);
        assert_eq!(g2.boundary_distance(g2.index(1, 0)), 0);
    }

    #[test]
    fn nearest_cell_picks_upper_on_tie() {
        let g = Grid::new(1, &[4], 1.0).unwrap();
        assert_eq!(g.nearest_cell([0.0, 0.0]), 2);
        let g = Grid::new(1, &[5], 1.0).unwrap();
        assert_eq!(g.nearest_cell([0.0, 0.0]), 2);
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = Grid::new(1, &[3], 1.0).unwrap();
        assert!(VectorField::new(g.clone(), vec![vec![0.0, -1.0, 0.0]], 0.0).is_err());
        assert!(VectorField::new(g.clone(), vec![vec![0.0, f64::NAN, 0.0]], 0.0).is_err());
        assert!(VectorField::new(g.clone(), vec![vec![0.0; 2]], 0.0).is_err());
        let f = VectorField::zeros(g, 2, 0.0).unwrap();
        assert!(f.component(2).is_err());
    }

    #[test]
    fn mass_vector_norm() {
        let m = MassVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(m.total_norm(), 5.0);
        assert!(MassVector::new(vec![-1.0]).is_err());
    }
}
