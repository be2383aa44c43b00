//! Space and time discretization: the uniform periodic grid on 𝕋^d and the
//! grid functions that live on it.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::math;

/// Uniform grid on 𝕋^d = ℝ^d/ℤ^d with `n` nodes per axis, carrying the
/// order `s` of the fractional Laplacian.
///
/// Nodes sit at x_j = j/n. Multi-dimensional node indices are row-major:
/// `node = i0 * n + i1`, so axis 1 is contiguous.
#[derive(Clone)]
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    order: f64,
    plan: Arc<FftPlan>,
}

impl SpectralGrid {
    pub fn new(dim: usize, n: usize, order: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} not in {{1, 2}}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {n} must be a power of two ≥ 8"
            )));
        }
        if !(order > 0.5 && order < 1.0) {
            return Err(Error::domain("s", order, "(1/2, 1)"));
        }
        Ok(SpectralGrid {
            dim,
            n,
            order,
            plan: Arc::new(FftPlan::new(n)),
        })
    }

    /// Same nodes, different fractional order. Only the operator changes, so
    /// the transform plan is shared.
    pub fn with_order(&self, order: f64) -> Result<Self> {
        if !(order > 0.5 && order < 1.0) {
            return Err(Error::domain("s", order, "(1/2, 1)"));
        }
        Ok(SpectralGrid {
            order,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of nodes, n^d.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Δx^d, the quadrature weight of a node.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    pub fn axis_indices(&self, node: usize) -> [usize; 2] {
        if self.dim == 1 {
            [node, 0]
        } else {
            [node / self.n, node % self.n]
        }
    }

    pub fn node_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    /// Node index after shifting by `offset` along each axis, with wrap-around.
    pub fn shifted(&self, node: usize, offset: [isize; 2]) -> usize {
        let idx = self.axis_indices(node);
        let n = self.n as isize;
        let wrap = |i: usize, o: isize| (i as isize + o).rem_euclid(n) as usize;
        if self.dim == 1 {
            wrap(idx[0], offset[0])
        } else {
            self.node_index([wrap(idx[0], offset[0]), wrap(idx[1], offset[1])])
        }
    }

    /// Physical coordinates of a node; unused axes are 0.
    pub fn position(&self, node: usize) -> [f64; 2] {
        let idx = self.axis_indices(node);
        let h = self.spacing();
        if self.dim == 1 {
            [idx[0] as f64 * h, 0.0]
        } else {
            [idx[0] as f64 * h, idx[1] as f64 * h]
        }
    }

    /// Signed integer wavenumber of DFT bin `j`, in {−n/2, …, n/2−1}.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Wavevector of spectral bin `node` (same row-major layout as nodes).
    pub fn wavevector(&self, node: usize) -> [i64; 2] {
        let idx = self.axis_indices(node);
        if self.dim == 1 {
            [self.wavenumber(idx[0]), 0]
        } else {
            [self.wavenumber(idx[0]), self.wavenumber(idx[1])]
        }
    }

    /// Euclidean |k| of spectral bin `node`; the Nyquist bin counts as n/2.
    pub fn wavevector_norm(&self, node: usize) -> f64 {
        let k = self.wavevector(node);
        math::sqrt((k[0] * k[0] + k[1] * k[1]) as f64)
    }

    pub(crate) fn check_same(&self, other: &SpectralGrid) -> Result<()> {
        if self.dim != other.dim || self.n != other.n {
            return Err(Error::Dimension(format!(
                "grid {}^{} vs {}^{}",
                self.n, self.dim, other.n, other.dim
            )));
        }
        Ok(())
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.order.to_bits() == other.order.to_bits()
    }
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("order", &self.order)
            .finish()
    }
}

/// Uniform time grid t_j = jΔt on [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("T", horizon, "(0, ∞)"));
        }
        if steps == 0 {
            return Err(Error::domain("n_t", 0.0, "[1, ∞)"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of time nodes, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }
}

/// Real values at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &SpectralGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &SpectralGrid, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples `f` at the node coordinates.
    pub fn from_fn(grid: &SpectralGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ∫ f dx by the nodal rule (exact for trigonometric polynomials below Nyquist).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        math::sqrt(self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume())
    }

    /// ∫ f g dx.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        Self::from_raw(&self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        ))
    }

    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs())))
    }
}

/// d real components per node, stored node-major: `values[node * d + axis]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        let expect = grid.len() * grid.dim();
        if values.len() != expect {
            return Err(Error::Dimension(format!(
                "vector field has {} values, expected {expect}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite component at node {}",
                i / grid.dim()
            )));
        }
        Ok(VectorField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &SpectralGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.dim());
        VectorField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len() * grid.dim()])
    }

    pub fn constant(grid: &SpectralGrid, value: &[f64]) -> Self {
        let d = grid.dim();
        let values = (0..grid.len() * d).map(|i| value[i % d]).collect();
        Self::from_raw(grid, values)
    }

    /// `f(x, out)` writes the d components at position x.
    pub fn from_fn(grid: &SpectralGrid, f: impl Fn([f64; 2], &mut [f64])) -> Self {
        let d = grid.dim();
        let mut values = vec![0.0; grid.len() * d];
        for (node, chunk) in values.chunks_mut(d).enumerate() {
            f(grid.position(node), chunk);
        }
        Self::from_raw(grid, values)
    }

    pub fn from_components(grid: &SpectralGrid, components: &[Vec<f64>]) -> Result<Self> {
        let d = grid.dim();
        if components.len() != d || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Dimension(format!(
                "expected {d} components of length {}",
                grid.len()
            )));
        }
        let mut values = vec![0.0; grid.len() * d];
        for (axis, comp) in components.iter().enumerate() {
            for (node, v) in comp.iter().enumerate() {
                values[node * d + axis] = *v;
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.values[node * d..(node + 1) * d]
    }

    pub fn component(&self, axis: usize) -> Vec<f64> {
        let d = self.grid.dim();
        self.values.iter().skip(axis).step_by(d).copied().collect()
    }

    pub fn component_field(&self, axis: usize) -> ScalarField {
        ScalarField::from_raw(&self.grid, self.component(axis))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// max over nodes of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.grid.dim())
            .fold(0.0, |a, v| a.max(math::norm(v)))
    }

    pub fn sup_distance(&self, other: &VectorField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let d = self.grid.dim();
        Ok(self
            .values
            .chunks(d)
            .zip(other.values.chunks(d))
            .fold(0.0, |a, (x, y)| {
                let s: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                a.max(math::sqrt(s))
            }))
    }

    /// ∫ v·w dx.
    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn scaled(&self, factor: f64) -> VectorField {
        Self::from_raw(&self.grid, self.values.iter().map(|v| v * factor).collect())
    }
}
