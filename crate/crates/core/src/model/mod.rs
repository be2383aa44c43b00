//! Running costs and Hamiltonians.
//!
//! Models see the population only through a per-measure `Coupling` value that
//! they extract once from the joint measure (for instance the mean control
//! and a convolution potential); pointwise evaluations then take a node index,
//! a momentum or control vector, and that coupling.

mod growth;
mod legendre;
mod quadratic;
mod theta;

pub use growth::{growth_check, GrowthReport, ProbeRanges};
pub use legendre::NumericCoupling;
pub use legendre::{legendre_transform, legendre_with, LegendreOutcome, NumericHamiltonian};
pub use quadratic::{Kernel, QuadraticCoupling, QuadraticExample};
pub use theta::{theta_scale, ThetaScaled};

use crate::error::Result;
use crate::grid::{ScalarField, VectorField};
use crate::measure::JointControlMeasure;
use crate::par;

/// Structural constants C₀ and q of the growth assumptions; q̃ = q/(q-1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub c0: f64,
    pub q: f64,
}

impl GrowthConstants {
    pub fn conjugate(&self) -> f64 {
        self.q / (self.q - 1.0)
    }
}

/// What every model shares: growth constants and the statistics of μ it reads.
pub trait Model: Sync {
    type Coupling: Send + Sync;

    fn constants(&self) -> GrowthConstants;

    fn coupling(&self, mu: &JointControlMeasure) -> Result<Self::Coupling>;
}

pub trait Hamiltonian: Model {
    fn h(&self, node: usize, p: &[f64], coupling: &Self::Coupling) -> f64;

    /// D_pH, written to `out` (length d).
    fn h_p(&self, node: usize, p: &[f64], coupling: &Self::Coupling, out: &mut [f64]);

    fn h_x(&self, node: usize, p: &[f64], coupling: &Self::Coupling, out: &mut [f64]);
}

pub trait Lagrangian: Model {
    fn l(&self, node: usize, alpha: &[f64], coupling: &Self::Coupling) -> f64;

    fn l_alpha(&self, node: usize, alpha: &[f64], coupling: &Self::Coupling, out: &mut [f64]);

    fn l_x(&self, node: usize, alpha: &[f64], coupling: &Self::Coupling, out: &mut [f64]);

    /// D²_ααL, row-major d×d. Defaults to central differences of `l_alpha`.
    fn l_alpha_alpha(
        &self,
        node: usize,
        alpha: &[f64],
        coupling: &Self::Coupling,
        out: &mut [f64],
    ) {
        let d = alpha.len();
        let h = 1e-5;
        let mut probe = [0.0; 2];
        let mut plus = [0.0; 2];
        let mut minus = [0.0; 2];
        for col in 0..d {
            probe[..d].copy_from_slice(alpha);
            probe[col] = alpha[col] + h;
            self.l_alpha(node, &probe[..d], coupling, &mut plus[..d]);
            probe[col] = alpha[col] - h;
            self.l_alpha(node, &probe[..d], coupling, &mut minus[..d]);
            for row in 0..d {
                out[row * d + col] = (plus[row] - minus[row]) / (2.0 * h);
            }
        }
    }
}

impl<M: Model + ?Sized> Model for &M {
    type Coupling = M::Coupling;

    fn constants(&self) -> GrowthConstants {
        (**self).constants()
    }

    fn coupling(&self, mu: &JointControlMeasure) -> Result<Self::Coupling> {
        (**self).coupling(mu)
    }
}

impl<M: Hamiltonian + ?Sized> Hamiltonian for &M {
    fn h(&self, node: usize, p: &[f64], c: &Self::Coupling) -> f64 {
        (**self).h(node, p, c)
    }

    fn h_p(&self, node: usize, p: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        (**self).h_p(node, p, c, out)
    }

    fn h_x(&self, node: usize, p: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        (**self).h_x(node, p, c, out)
    }
}

impl<M: Lagrangian + ?Sized> Lagrangian for &M {
    fn l(&self, node: usize, alpha: &[f64], c: &Self::Coupling) -> f64 {
        (**self).l(node, alpha, c)
    }

    fn l_alpha(&self, node: usize, alpha: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        (**self).l_alpha(node, alpha, c, out)
    }

    fn l_x(&self, node: usize, alpha: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        (**self).l_x(node, alpha, c, out)
    }

    fn l_alpha_alpha(&self, node: usize, alpha: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        (**self).l_alpha_alpha(node, alpha, c, out)
    }
}

/// Lasry–Lions pairing ∫ (L(x,α,μ₁) - L(x,α,μ₂)) d(μ₁ - μ₂)(x,α), evaluated
/// on the graph representation of both measures.
pub fn monotonicity_pairing<L: Lagrangian>(
    model: &L,
    mu1: &JointControlMeasure,
    mu2: &JointControlMeasure,
) -> Result<f64> {
    mu1.grid().check_same(mu2.grid())?;
    let c1 = model.coupling(mu1)?;
    let c2 = model.coupling(mu2)?;
    let w = mu1.grid().cell_volume();
    let side = |mu: &JointControlMeasure| -> f64 {
        mu.state()
            .density()
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(node, m)| {
                let a = mu.control().at(node);
                (model.l(node, a, &c1) - model.l(node, a, &c2)) * m * w
            })
            .sum()
    };
    Ok(side(mu1) - side(mu2))
}

/// H(x, Du(x), μ) at every node.
pub fn h_field<H: Hamiltonian>(model: &H, du: &VectorField, coupling: &H::Coupling) -> ScalarField {
    let values = par::map_range(du.grid().len(), |node| model.h(node, du.at(node), coupling));
    ScalarField::from_raw(du.grid(), values)
}

/// D_pH(x, Du(x), μ) at every node.
pub fn h_p_field<H: Hamiltonian>(
    model: &H,
    du: &VectorField,
    coupling: &H::Coupling,
) -> VectorField {
    let d = du.dim();
    let per_node = par::map_range(du.grid().len(), |node| {
        let mut out = [0.0; 2];
        model.h_p(node, du.at(node), coupling, &mut out[..d]);
        out
    });
    let values = per_node
        .iter()
        .flat_map(|v| v[..d].iter().copied())
        .collect();
    VectorField::from_raw(du.grid(), values)
}
