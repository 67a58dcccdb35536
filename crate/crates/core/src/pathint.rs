//! Time-sliced Euclidean path integral for `H0 = (e/2)(p^2 + m^2)` in one
//! spatial dimension.
//!
//! A slice integrates the momentum over the lattice Brillouin zone to first
//! order in the slice length, which gives the short-time kernel
//! `exp(-e m^2 db/2) (I - db (e/2) P) / h` with `P` the three-point `p^2`.
//! Kernels are densities in the second argument, so composition is the
//! matrix product weighted by the spacing `h`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::quantize::{kinetic, Grid, Stencil};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathIntError {
    #[error("`{0}` must be positive and finite")]
    NotPositive(&'static str),
    #[error("`{0}` must be non-negative and finite")]
    Negative(&'static str),
    #[error("slice too long for the grid: e*db = {product:e} exceeds h^2 = {limit:e}")]
    SliceTooLong { product: f64, limit: f64 },
    #[error("at least one slice is required")]
    NoSlices,
    #[error("kernels live on different grids")]
    GridMismatch,
}

/// Euclidean propagator `K(x, x')` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    /// Euclidean time covered.
    pub beta: f64,
    pub slices: usize,
}

impl Kernel {
    /// The kernel of zero evolution, `delta(x - x')` on the lattice.
    pub fn identity(grid: &Grid) -> Self {
        let matrix = DMatrix::identity(grid.n, grid.n) / grid.spacing();
        Kernel { grid: *grid, matrix, beta: 0.0, slices: 0 }
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.min()
    }

    /// `integral K(x_i, x') dx'` for each grid point.
    pub fn row_sums(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        self.matrix.row_iter().map(|r| r.sum() * h).collect()
    }

    /// Evolution by `self` followed by `other`.
    pub fn then(&self, other: &Kernel) -> Result<Kernel, PathIntError> {
        if self.grid != other.grid {
            return Err(PathIntError::GridMismatch);
        }
        Ok(Kernel {
            grid: self.grid,
            matrix: &self.matrix * &other.matrix * self.grid.spacing(),
            beta: self.beta + other.beta,
            slices: self.slices + other.slices,
        })
    }

    pub fn max_deviation(&self, other: &Kernel) -> f64 {
        (&self.matrix - &other.matrix).amax()
    }

    /// Matrix dump: a header row with the grid points, then one row per `x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for x in self.grid.points() {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
        for (i, row) in self.matrix.row_iter().enumerate() {
            let _ = write!(out, "{}", self.grid.point(i));
            for v in row.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), PathIntError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(PathIntError::NotPositive(name))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<(), PathIntError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(PathIntError::Negative(name))
    }
}

/// Single-slice kernel. Needs `e*db <= h^2` so that every entry stays
/// non-negative.
pub fn slice_kernel(m: f64, e: f64, db: f64, grid: &Grid) -> Result<Kernel, PathIntError> {
    positive("db", db)?;
    positive("e", e)?;
    if !m.is_finite() {
        return Err(PathIntError::NotPositive("m"));
    }
    let h = grid.spacing();
    let (product, limit) = (e * db, h * h);
    if product > limit {
        return Err(PathIntError::SliceTooLong { product, limit });
    }
    let p2 = kinetic(grid, Stencil::ThreePoint).matrix;
    let damping = (-e * m * m * db / 2.0).exp();
    let matrix = (DMatrix::identity(grid.n, grid.n) - p2 * (db * e / 2.0)) * (damping / h);
    Ok(Kernel { grid: *grid, matrix, beta: db, slices: 1 })
}

/// `k` composed with itself `times` times.
pub fn compose(k: &Kernel, times: usize) -> Result<Kernel, PathIntError> {
    if times == 0 {
        return Err(PathIntError::NoSlices);
    }
    let h = k.grid.spacing();
    // Work with the propagator h*K, whose composition is the plain product.
    let mut base = &k.matrix * h;
    let mut acc: Option<DMatrix<f64>> = None;
    let mut n = times;
    while n > 0 {
        if n & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a * &base,
            });
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    Ok(Kernel {
        grid: k.grid,
        matrix: acc.unwrap() / h,
        beta: k.beta * times as f64,
        slices: k.slices * times,
    })
}

/// The `slices`-slice path integral over Euclidean time `beta`.
pub fn sliced_kernel(m: f64, e: f64, beta: f64, slices: usize, grid: &Grid) -> Result<Kernel, PathIntError> {
    non_negative("beta", beta)?;
    positive("e", e)?;
    if slices == 0 {
        return Err(PathIntError::NoSlices);
    }
    if beta == 0.0 {
        return Ok(Kernel::identity(grid));
    }
    compose(&slice_kernel(m, e, beta / slices as f64, grid)?, slices)
}

/// `exp(-beta H0)` from the eigen-decomposition of the grid operator
/// `(e/2)(P + m^2)`.
pub fn operator_kernel(m: f64, e: f64, beta: f64, grid: &Grid) -> Result<Kernel, PathIntError> {
    non_negative("beta", beta)?;
    positive("e", e)?;
    if beta == 0.0 {
        return Ok(Kernel::identity(grid));
    }
    let mut h0 = kinetic(grid, Stencil::ThreePoint).matrix * (e / 2.0);
    for i in 0..grid.n {
        h0[(i, i)] += e * m * m / 2.0;
    }
    let eig = SymmetricEigen::new(h0);
    let decay = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-beta * l).exp()));
    let v = &eig.eigenvectors;
    let matrix = v * decay * v.transpose() / grid.spacing();
    Ok(Kernel { grid: *grid, matrix, beta, slices: 0 })
}

/// Largest entrywise deviation of `k` from the operator exponential.
pub fn compare_to_operator(k: &Kernel, m: f64, e: f64, beta: f64) -> Result<f64, PathIntError> {
    Ok(k.max_deviation(&operator_kernel(m, e, beta, &k.grid)?))
}

/// Outcome of a sliced-versus-operator comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelComparison {
    pub mass: f64,
    pub e: f64,
    pub beta: f64,
    pub slices: usize,
    pub grid: Grid,
    pub error: f64,
    pub error_doubled: f64,
    /// `error_doubled / error`; absent when the first error vanishes.
    pub ratio: Option<f64>,
}

/// Compares the sliced kernel with the operator exponential at `slices` and
/// at twice as many slices.
pub fn kernel_comparison(
    m: f64,
    e: f64,
    beta: f64,
    slices: usize,
    grid: &Grid,
) -> Result<KernelComparison, PathIntError> {
    let op = operator_kernel(m, e, beta, grid)?;
    let error = sliced_kernel(m, e, beta, slices, grid)?.max_deviation(&op);
    let error_doubled = sliced_kernel(m, e, beta, 2 * slices, grid)?.max_deviation(&op);
    let ratio = (error > 0.0).then(|| error_doubled / error);
    Ok(KernelComparison { mass: m, e, beta, slices, grid: *grid, error, error_doubled, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> Grid {
        Grid::new(33, 8.0).unwrap()
    }

    #[test]
    fn massless_slice_conserves_probability_inside() {
        let k = slice_kernel(0.0, 1.0, 0.1, &coarse()).unwrap();
        for s in &k.row_sums()[1..32] {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(k.asymmetry(), 0.0);
        assert!(k.min_entry() >= 0.0);
    }

    #[test]
    fn mass_damps_uniformly() {
        let free = slice_kernel(0.0, 1.0, 0.1, &coarse()).unwrap();
        let heavy = slice_kernel(1.0, 1.0, 0.1, &coarse()).unwrap();
        let expected = &free.matrix * (-0.05f64).exp();
        assert!((&heavy.matrix - expected).amax() < 1e-15);
    }

    #[test]
    fn invalid_slices() {
        assert_eq!(slice_kernel(1.0, 1.0, 0.0, &coarse()), Err(PathIntError::NotPositive("db")));
        assert_eq!(slice_kernel(1.0, -1.0, 0.1, &coarse()), Err(PathIntError::NotPositive("e")));
        assert!(matches!(slice_kernel(1.0, 1.0, 1.0, &coarse()), Err(PathIntError::SliceTooLong { .. })));
        assert_eq!(sliced_kernel(1.0, 1.0, 1.0, 0, &coarse()), Err(PathIntError::NoSlices));
    }

    #[test]
    fn compose_once_is_the_slice() {
        let k = slice_kernel(1.0, 1.0, 0.1, &coarse()).unwrap();
        assert_eq!(compose(&k, 1).unwrap(), k);
        assert_eq!(compose(&k, 0), Err(PathIntError::NoSlices));
    }

    #[test]
    fn csv_dump() {
        let k = Kernel::identity(&Grid::new(16, 7.5).unwrap());
        let csv = k.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 17);
        assert!(lines[0].starts_with("x,-7.5,-6.5,"));
        assert!(lines[1].starts_with("-7.5,1,0,"));
    }
}
