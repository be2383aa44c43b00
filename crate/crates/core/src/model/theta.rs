use super::{GrowthConstants, Hamiltonian, Lagrangian, Model};
use crate::error::{Error, Result};
use crate::measure::JointControlMeasure;

/// The θ-rescaled model: L^θ(x,α,μ) = θ L(x, α/θ, Θ(μ)) and
/// H^θ(x,p,μ) = θ H(x,p,Θ(μ)), where Θ divides every control by θ.
/// At θ = 0, H⁰ ≡ 0 and L⁰ is the indicator of α = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaScaled<M> {
    base: M,
    theta: f64,
}

pub fn theta_scale<M>(model: M, theta: f64) -> Result<ThetaScaled<M>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain("θ", theta, "[0, 1]"));
    }
    Ok(ThetaScaled { base: model, theta })
}

impl<M> ThetaScaled<M> {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    fn rescaled(&self, mu: &JointControlMeasure) -> JointControlMeasure {
        mu.scale_controls(1.0 / self.theta)
    }
}

impl<M: Model> Model for ThetaScaled<M> {
    /// `None` at θ = 0.
    type Coupling = Option<M::Coupling>;

    fn constants(&self) -> GrowthConstants {
        self.base.constants()
    }

    fn coupling(&self, mu: &JointControlMeasure) -> Result<Self::Coupling> {
        if self.theta == 0.0 {
            return Ok(None);
        }
        self.base.coupling(&self.rescaled(mu)).map(Some)
    }
}

impl<M: Hamiltonian> Hamiltonian for ThetaScaled<M> {
    fn h(&self, node: usize, p: &[f64], c: &Self::Coupling) -> f64 {
        match c {
            Some(c) => self.theta * self.base.h(node, p, c),
            None => 0.0,
        }
    }

    fn h_p(&self, node: usize, p: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match c {
            Some(c) => {
                self.base.h_p(node, p, c, out);
                out.iter_mut().for_each(|v| *v *= self.theta);
            }
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    fn h_x(&self, node: usize, p: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match c {
            Some(c) => {
                self.base.h_x(node, p, c, out);
                out.iter_mut().for_each(|v| *v *= self.theta);
            }
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }
}

impl<M: Lagrangian> Lagrangian for ThetaScaled<M> {
    fn l(&self, node: usize, alpha: &[f64], c: &Self::Coupling) -> f64 {
        match c {
            Some(c) => {
                let mut scaled = [0.0; 2];
                for (s, a) in scaled.iter_mut().zip(alpha) {
                    *s = a / self.theta;
                }
                self.theta * self.base.l(node, &scaled[..alpha.len()], c)
            }
            None if alpha.iter().all(|a| *a == 0.0) => 0.0,
            None => f64::INFINITY,
        }
    }

    fn l_alpha(&self, node: usize, alpha: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match c {
            Some(c) => {
                let mut scaled = [0.0; 2];
                for (s, a) in scaled.iter_mut().zip(alpha) {
                    *s = a / self.theta;
                }
                self.base.l_alpha(node, &scaled[..alpha.len()], c, out);
            }
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    fn l_x(&self, node: usize, alpha: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match c {
            Some(c) => {
                let mut scaled = [0.0; 2];
                for (s, a) in scaled.iter_mut().zip(alpha) {
                    *s = a / self.theta;
                }
                self.base.l_x(node, &scaled[..alpha.len()], c, out);
                out.iter_mut().for_each(|v| *v *= self.theta);
            }
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    fn l_alpha_alpha(&self, node: usize, alpha: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match c {
            Some(c) => {
                let mut scaled = [0.0; 2];
                for (s, a) in scaled.iter_mut().zip(alpha) {
                    *s = a / self.theta;
                }
                self.base
                    .l_alpha_alpha(node, &scaled[..alpha.len()], c, out);
                out.iter_mut().for_each(|v| *v /= self.theta);
            }
            None => out.iter_mut().for_each(|v| *v = f64::INFINITY),
        }
    }
}
