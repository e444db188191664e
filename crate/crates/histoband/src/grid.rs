//! Equidistant partition of the unit hypercube `[0,1]^p`.
//!
//! Cells are indexed in mixed radix with the first coordinate most
//! significant. Every cell is half-open `[kδ, (k+1)δ)` along each axis except
//! the last one per axis, which is closed at 1, so every point of `[0,1]^p`
//! has exactly one cell.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Largest admissible number of cells.
pub const MAX_CELLS: u64 = 1 << 48;

/// Equidistant grid with mesh `1 / inv_mesh` on `[0,1]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    inv_mesh: u64,
    cell_count: usize,
}

/// A cell of a [`Grid`], carrying both its linear and per-axis index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellId {
    pub linear: usize,
    pub multi: Vec<u64>,
}

impl Grid {
    /// Builds the grid, refusing zero sizes and partitions with more than
    /// [`MAX_CELLS`] cells.
    pub fn new(dim: usize, inv_mesh: u64) -> Result<Self> {
        if dim == 0 {
            return Err(domain("grid dimension must be positive"));
        }
        if inv_mesh == 0 {
            return Err(domain("inverse mesh must be positive"));
        }
        let mut count: u64 = 1;
        for _ in 0..dim {
            count = count
                .checked_mul(inv_mesh)
                .filter(|&c| c <= MAX_CELLS)
                .ok_or_else(|| {
                    domain(format!(
                        "{inv_mesh}^{dim} cells exceeds the limit of 2^48"
                    ))
                })?;
        }
        let cell_count = usize::try_from(count)
            .map_err(|_| domain("cell count does not fit the platform index type"))?;
        Ok(Self {
            dim,
            inv_mesh,
            cell_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inv_mesh(&self) -> u64 {
        self.inv_mesh
    }

    /// Number of cells `J = inv_mesh^dim`.
    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    /// Edge length δ.
    pub fn mesh(&self) -> f64 {
        1.0 / self.inv_mesh as f64
    }

    /// Cell volume δ^p, computed as `1 / inv_mesh^p`.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.cell_count as f64
    }

    /// Euclidean diameter of every cell, `δ·√p`.
    pub fn cell_diameter(&self) -> f64 {
        self.mesh() * (self.dim as f64).sqrt()
    }

    /// Axis index of the cell containing coordinate `v ∈ [0,1]`.
    ///
    /// The floor guess is corrected against the exact edge values
    /// `k / inv_mesh`, so the result agrees with [`Grid::cell_box`] bitwise.
    pub fn axis_index(&self, v: f64) -> Result<u64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(domain(format!("coordinate {v} outside [0,1]")));
        }
        let m = self.inv_mesh;
        let mf = m as f64;
        let mut k = ((v * mf).floor() as u64).min(m - 1);
        if k > 0 && v < k as f64 / mf {
            k -= 1;
        } else if k + 1 < m && v >= (k + 1) as f64 / mf {
            k += 1;
        }
        Ok(k)
    }

    /// Linear index of the cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x.len())?;
        let mut linear = 0usize;
        for &v in x {
            linear = linear * self.inv_mesh as usize + self.axis_index(v)? as usize;
        }
        Ok(linear)
    }

    /// The cell `A_δ(x)` containing `x`.
    pub fn cell_of(&self, x: &[f64]) -> Result<CellId> {
        self.check_dim(x.len())?;
        let multi = x
            .iter()
            .map(|&v| self.axis_index(v))
            .collect::<Result<Vec<_>>>()?;
        let linear = self.linear_of(&multi)?;
        Ok(CellId { linear, multi })
    }

    /// Mixed-radix linear index of a per-axis index vector.
    pub fn linear_of(&self, multi: &[u64]) -> Result<usize> {
        self.check_dim(multi.len())?;
        let mut linear = 0usize;
        for &k in multi {
            if k >= self.inv_mesh {
                return Err(domain(format!("axis index {k} >= {}", self.inv_mesh)));
            }
            linear = linear * self.inv_mesh as usize + k as usize;
        }
        Ok(linear)
    }

    /// Per-axis indices of a linear cell index.
    pub fn multi_of(&self, linear: usize) -> Result<Vec<u64>> {
        if linear >= self.cell_count {
            return Err(domain(format!(
                "cell {linear} out of range for {} cells",
                self.cell_count
            )));
        }
        let m = self.inv_mesh as usize;
        let mut multi = vec![0u64; self.dim];
        let mut rest = linear;
        for slot in multi.iter_mut().rev() {
            *slot = (rest % m) as u64;
            rest /= m;
        }
        Ok(multi)
    }

    pub fn cell(&self, linear: usize) -> Result<CellId> {
        Ok(CellId {
            linear,
            multi: self.multi_of(linear)?,
        })
    }

    /// Closed box `[k_i δ, (k_i+1) δ]` of a cell.
    pub fn cell_box(&self, cell: &CellId) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.linear_of(&cell.multi)? != cell.linear {
            return Err(domain("cell id linear and multi index disagree"));
        }
        Ok(self.box_of_multi(&cell.multi))
    }

    pub(crate) fn box_of_multi(&self, multi: &[u64]) -> (Vec<f64>, Vec<f64>) {
        let mf = self.inv_mesh as f64;
        let lower = multi.iter().map(|&k| k as f64 / mf).collect();
        let upper = multi.iter().map(|&k| (k + 1) as f64 / mf).collect();
        (lower, upper)
    }

    /// Iterates over all cells in linear order.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cell_count).map(move |c| CellId {
            linear: c,
            multi: self.multi_of(c).expect("index in range"),
        })
    }

    /// Tensor grid of `per_axis^p` interior probe points of a cell, placed at
    /// the midpoints of an even split of each edge. One probe is the center.
    pub fn probe_points(&self, multi: &[u64], per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let delta = self.mesh();
        let offsets: Vec<f64> = (0..per_axis)
            .map(|i| (i as f64 + 0.5) / per_axis as f64)
            .collect();
        let total = per_axis.pow(self.dim as u32);
        let mut out = Vec::with_capacity(total);
        for t in 0..total {
            let mut rest = t;
            let mut point = vec![0.0; self.dim];
            for (axis, v) in point.iter_mut().enumerate().rev() {
                let i = rest % per_axis;
                rest /= per_axis;
                *v = (multi[axis] as f64 + offsets[i]) * delta;
            }
            out.push(point);
        }
        out
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(domain(format!(
                "point has {len} coordinates, grid has dimension {}",
                self.dim
            )));
        }
        Ok(())
    }
}
