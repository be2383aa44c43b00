use alloc::vec::Vec;

use super::{GrowthConstants, Hamiltonian, Lagrangian, Model};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::math;
use crate::measure::{GridMeasure, JointControlMeasure};
use crate::spectral;

/// Interaction kernel with Fourier coefficients κ̂(k) = amplitude·e^{-decay·|k|}.
/// Nonnegative coefficients make V(x, μ) = (κ ⋆ m)(x) monotone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub amplitude: f64,
    pub decay: f64,
}

impl Kernel {
    pub fn exponential(decay: f64) -> Self {
        Kernel {
            amplitude: 1.0,
            decay,
        }
    }

    /// κ ≡ 0, hence V ≡ 0.
    pub fn none() -> Self {
        Kernel {
            amplitude: 0.0,
            decay: 0.0,
        }
    }

    pub fn coefficient(&self, k_norm: f64) -> f64 {
        self.amplitude * math::exp(-self.decay * k_norm)
    }

    /// κ ⋆ m on the grid.
    pub fn convolve(&self, m: &GridMeasure) -> Result<ScalarField> {
        let grid = m.grid();
        spectral::apply_multiplier(&m.to_field(), |bin| {
            self.coefficient(grid.wavevector_norm(bin))
        })
    }
}

/// L(x,α,μ) = |α + β∫γ dμ|²/2 + V(x,μ),
/// H(x,p,μ) = |p|²/2 + β p·∫α dμ − V(x,μ), with V = κ ⋆ m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticExample {
    beta: f64,
    kernel: Kernel,
    c0: f64,
}

/// Statistics of μ the quadratic model depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoupling {
    pub mean_control: [f64; 2],
    pub potential: Vec<f64>,
    /// D_xV, node-major like [`crate::VectorField`].
    pub potential_grad: Vec<f64>,
}

impl QuadraticExample {
    /// `beta` ∈ [0, 1); β = 0 switches the control coupling off.
    pub fn new(beta: f64, kernel: Kernel, c0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::domain("coupling_beta", beta, "[0, 1)"));
        }
        if !(kernel.amplitude >= 0.0 && kernel.decay >= 0.0) {
            return Err(Error::domain(
                "kernel",
                kernel.amplitude.min(kernel.decay),
                "nonnegative amplitude and decay",
            ));
        }
        if !(c0 > 0.0) {
            return Err(Error::domain("c0", c0, "(0, ∞)"));
        }
        Ok(QuadraticExample { beta, kernel, c0 })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

impl Model for QuadraticExample {
    type Coupling = QuadraticCoupling;

    fn constants(&self) -> GrowthConstants {
        GrowthConstants {
            c0: self.c0,
            q: 2.0,
        }
    }

    fn coupling(&self, mu: &JointControlMeasure) -> Result<QuadraticCoupling> {
        let potential = self.kernel.convolve(mu.state())?;
        let potential_grad = spectral::gradient(&potential)?.values().to_vec();
        Ok(QuadraticCoupling {
            mean_control: mu.mean_control(),
            potential: potential.into_values(),
            potential_grad,
        })
    }
}

impl Hamiltonian for QuadraticExample {
    fn h(&self, node: usize, p: &[f64], c: &QuadraticCoupling) -> f64 {
        let mut kinetic = 0.0;
        let mut cross = 0.0;
        for (i, pi) in p.iter().enumerate() {
            kinetic += pi * pi;
            cross += pi * c.mean_control[i];
        }
        0.5 * kinetic + self.beta * cross - c.potential[node]
    }

    fn h_p(&self, _node: usize, p: &[f64], c: &QuadraticCoupling, out: &mut [f64]) {
        for (i, pi) in p.iter().enumerate() {
            out[i] = pi + self.beta * c.mean_control[i];
        }
    }

    fn h_x(&self, node: usize, p: &[f64], c: &QuadraticCoupling, out: &mut [f64]) {
        let d = p.len();
        for i in 0..d {
            out[i] = -c.potential_grad[node * d + i];
        }
    }
}

impl Lagrangian for QuadraticExample {
    fn l(&self, node: usize, alpha: &[f64], c: &QuadraticCoupling) -> f64 {
        let mut sq = 0.0;
        for (i, a) in alpha.iter().enumerate() {
            let shifted = a + self.beta * c.mean_control[i];
            sq += shifted * shifted;
        }
        0.5 * sq + c.potential[node]
    }

    fn l_alpha(&self, _node: usize, alpha: &[f64], c: &QuadraticCoupling, out: &mut [f64]) {
        for (i, a) in alpha.iter().enumerate() {
            out[i] = a + self.beta * c.mean_control[i];
        }
    }

    fn l_x(&self, node: usize, alpha: &[f64], c: &QuadraticCoupling, out: &mut [f64]) {
        let d = alpha.len();
        out[..d].copy_from_slice(&c.potential_grad[node * d..(node + 1) * d]);
    }

    fn l_alpha_alpha(&self, _node: usize, alpha: &[f64], _c: &QuadraticCoupling, out: &mut [f64]) {
        let d = alpha.len();
        for row in 0..d {
            for col in 0..d {
                out[row * d + col] = if row == col { 1.0 } else { 0.0 };
            }
        }
    }
}
