//! Probability densities on the grid and joint state–control measures of
//! graph form μ = (I, α)♯m.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, SpectralGrid, TimeGrid, VectorField};
use crate::math;

pub use crate::model::monotonicity_pairing;

/// Mass tolerance for a valid probability density.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// Nonnegative density with Σ m_j Δx^d = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: SpectralGrid,
    density: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: &SpectralGrid, density: Vec<f64>) -> Result<Self> {
        check_density(grid, &density)?;
        let mass = density.iter().sum::<f64>() * grid.cell_volume();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("mass {mass} is not 1")));
        }
        Ok(GridMeasure {
            grid: grid.clone(),
            density,
        })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        check_density(grid, &values)?;
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        Ok(GridMeasure {
            grid: grid.clone(),
            density: values.into_iter().map(|v| v / mass).collect(),
        })
    }

    pub fn uniform(grid: &SpectralGrid) -> Self {
        GridMeasure {
            grid: grid.clone(),
            density: alloc::vec![1.0; grid.len()],
        }
    }

    /// Unit point mass at a node.
    pub fn spike(grid: &SpectralGrid, node: usize) -> Self {
        let mut density = alloc::vec![0.0; grid.len()];
        density[node] = grid.len() as f64;
        GridMeasure {
            grid: grid.clone(),
            density,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Node masses m_j Δx^d.
    pub fn weights(&self) -> Vec<f64> {
        let w = self.grid.cell_volume();
        self.density.iter().map(|v| v * w).collect()
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField::from_raw(&self.grid, self.density.clone())
    }

    /// ∫ f dm.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.grid.check_same(f.grid())?;
        Ok(self
            .density
            .iter()
            .zip(f.values())
            .map(|(m, v)| m * v)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    /// Pointwise (1-δ)·self + δ·other, which stays a probability density.
    pub fn blend(&self, other: &GridMeasure, delta: f64) -> Result<GridMeasure> {
        self.grid.check_same(&other.grid)?;
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::domain("δ", delta, "[0, 1]"));
        }
        let values = self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (1.0 - delta) * a + delta * b)
            .collect();
        GridMeasure::normalized(&self.grid, values)
    }
}

fn check_density(grid: &SpectralGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "density has {} values for {} nodes",
            values.len(),
            grid.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidMeasure(format!(
            "density {} at node {i} is negative or non-finite",
            values[i]
        )));
    }
    Ok(())
}

/// μ = (I, α)♯m: mass m(x) sits at the point (x, α(x)).
#[derive(Debug, Clone, PartialEq)]
pub struct JointControlMeasure {
    state: GridMeasure,
    control: VectorField,
}

impl JointControlMeasure {
    pub fn new(state: GridMeasure, control: VectorField) -> Result<Self> {
        state.grid().check_same(control.grid())?;
        Ok(JointControlMeasure { state, control })
    }

    /// m × δ₀.
    pub fn at_rest(state: GridMeasure) -> Self {
        let control = VectorField::zeros(state.grid());
        JointControlMeasure { state, control }
    }

    pub fn state(&self) -> &GridMeasure {
        &self.state
    }

    pub fn control(&self) -> &VectorField {
        &self.control
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.state.grid()
    }

    /// ∫ α dμ.
    pub fn mean_control(&self) -> [f64; 2] {
        let grid = self.grid();
        let d = grid.dim();
        let w = grid.cell_volume();
        let mut out = [0.0; 2];
        for (node, m) in self.state.density().iter().enumerate() {
            for (axis, a) in self.control.at(node).iter().enumerate() {
                out[axis] += a * m * w;
            }
        }
        out[d..].iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// (I × c·I)♯μ: the same state marginal with every control scaled by `factor`.
    pub fn scale_controls(&self, factor: f64) -> JointControlMeasure {
        JointControlMeasure {
            state: self.state.clone(),
            control: self.control.scaled(factor),
        }
    }
}

/// One value per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePath<T> {
    time: TimeGrid,
    slices: Vec<T>,
}

impl<T> MeasurePath<T> {
    pub fn new(time: TimeGrid, slices: Vec<T>) -> Result<Self> {
        if slices.len() != time.len() {
            return Err(Error::Dimension(format!(
                "{} slices for {} time nodes",
                slices.len(),
                time.len()
            )));
        }
        Ok(MeasurePath { time, slices })
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn slices(&self) -> &[T] {
        &self.slices
    }

    pub fn get(&self, j: usize) -> &T {
        &self.slices[j]
    }

    pub fn into_slices(self) -> Vec<T> {
        self.slices
    }
}

/// Λ_q̃(μ) = (∫ |α|^q̃ dμ)^{1/q̃}.
pub fn lambda_q(mu: &JointControlMeasure, exponent: f64) -> Result<f64> {
    if !(exponent >= 1.0) || !exponent.is_finite() {
        return Err(Error::domain("q̃", exponent, "[1, ∞)"));
    }
    let w = mu.grid().cell_volume();
    let sum: f64 = mu
        .state()
        .density()
        .iter()
        .enumerate()
        .map(|(node, m)| math::powf(math::norm(mu.control().at(node)), exponent) * m * w)
        .sum();
    Ok(math::powf(sum, 1.0 / exponent))
}

/// Λ_∞(μ): largest |α(x)| over nodes with m(x) > `threshold`.
pub fn lambda_inf(mu: &JointControlMeasure, threshold: f64) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(Error::domain("ε_supp", threshold, "[0, ∞)"));
    }
    mu.state()
        .density()
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > threshold)
        .map(|(node, _)| math::norm(mu.control().at(node)))
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        })
        .ok_or(Error::DegenerateMeasure { threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid::new(1, n, 0.75).unwrap()
    }

    #[test]
    fn constant_control_moments() {
        let g = SpectralGrid::new(2, 8, 0.75).unwrap();
        let m =
            GridMeasure::normalized(&g, (0..64).map(|i| 1.0 + (i % 5) as f64).collect()).unwrap();
        let mu = JointControlMeasure::new(m, VectorField::constant(&g, &[3.0, 4.0])).unwrap();
        assert!((lambda_q(&mu, 2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((lambda_q(&mu, 1.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((lambda_inf(&mu, 0.0).unwrap() - 5.0).abs() < 1e-12);
        let rest = JointControlMeasure::at_rest(GridMeasure::uniform(&g));
        assert_eq!(lambda_q(&rest, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn sine_control_second_moment() {
        // (∫ sin² 2πx dx)^{1/2} = 2^{-1/2}, exact for the nodal rule
        let g = grid(256);
        let alpha = VectorField::from_fn(&g, |x, out| out[0] = (2.0 * PI * x[0]).sin());
        let mu = JointControlMeasure::new(GridMeasure::uniform(&g), alpha).unwrap();
        assert!((lambda_q(&mu, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        // max of |sin| over nodes j/256 hits 1 at j = 64
        assert!((lambda_inf(&mu, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spike_support() {
        let g = grid(16);
        let alpha = VectorField::from_fn(&g, |x, out| out[0] = 10.0 * x[0] - 3.0);
        let mu = JointControlMeasure::new(GridMeasure::spike(&g, 5), alpha).unwrap();
        assert!(
            (lambda_inf(&mu, 1e-12).unwrap() - (10.0 * 5.0 / 16.0 - 3.0f64).abs()).abs() < 1e-12
        );
    }

    #[test]
    fn errors() {
        let g = grid(16);
        let mu = JointControlMeasure::at_rest(GridMeasure::uniform(&g));
        assert!(matches!(lambda_q(&mu, 0.5), Err(Error::Domain { .. })));
        assert!(matches!(
            lambda_inf(&mu, 2.0),
            Err(Error::DegenerateMeasure { .. })
        ));
        assert!(GridMeasure::new(&g, alloc::vec![0.5; 16]).is_err());
        let mut neg = alloc::vec![1.0; 16];
        neg[2] = -0.1;
        assert!(GridMeasure::normalized(&g, neg).is_err());
    }

    #[test]
    fn blend_stays_probability() {
        let g = grid(16);
        let a = GridMeasure::spike(&g, 3);
        let b = GridMeasure::uniform(&g);
        let c = a.blend(&b, 0.5).unwrap();
        assert!((c.mass() - 1.0).abs() < 1e-14);
        assert!((c.density()[3] - 0.5 * (16.0 + 1.0)).abs() < 1e-12);
        assert!((c.density()[4] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_control_and_scaling() {
        let g = grid(16);
        let alpha = VectorField::constant(&g, &[2.0]);
        let mu = JointControlMeasure::new(GridMeasure::uniform(&g), alpha).unwrap();
        assert!((mu.mean_control()[0] - 2.0).abs() < 1e-14);
        assert!((mu.scale_controls(2.0).mean_control()[0] - 4.0).abs() < 1e-14);
    }
}
