use super::{GrowthConstants, Hamiltonian, Lagrangian, Model};
use crate::error::{Error, Result};
use crate::math;
use crate::measure::{lambda_q, JointControlMeasure};

const GRADIENT_TOL: f64 = 1e-10;
const NEWTON_STEPS: usize = 100;
const MAX_HALVINGS: usize = 60;
/// Accepted first-order residual after the golden-section fallback.
const FALLBACK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreOutcome {
    pub value: f64,
    pub maximizer: [f64; 2],
    pub newton_steps: usize,
    pub used_fallback: bool,
}

/// sup_α {−p·α − L(x,α,μ)} at a grid node.
pub fn legendre_transform<L: Lagrangian>(
    model: &L,
    node: usize,
    p: &[f64],
    mu: &JointControlMeasure,
) -> Result<LegendreOutcome> {
    let coupling = model.coupling(mu)?;
    let lambda = lambda_q(mu, model.constants().conjugate())?;
    legendre_with(model, node, p, &coupling, lambda)
}

/// Same as [`legendre_transform`] with the coupling and Λ_q̃(μ) precomputed.
pub fn legendre_with<L: Lagrangian>(
    model: &L,
    node: usize,
    p: &[f64],
    coupling: &L::Coupling,
    lambda: f64,
) -> Result<LegendreOutcome> {
    let d = p.len();
    if d == 0 || d > 2 {
        return Err(Error::Dimension(alloc::format!("momentum of length {d}")));
    }
    let objective = |a: &[f64]| -> f64 {
        let dot: f64 = p.iter().zip(a).map(|(p, a)| p * a).sum();
        -dot - model.l(node, a, coupling)
    };
    let residual = |a: &[f64], g: &mut [f64]| -> f64 {
        model.l_alpha(node, a, coupling, g);
        for i in 0..d {
            g[i] += p[i];
        }
        math::norm(&g[..d])
    };

    let mut alpha = [0.0; 2];
    let mut g = [0.0; 2];
    let mut hess = [0.0; 4];
    let mut current = objective(&alpha[..d]);
    for step in 0..=NEWTON_STEPS {
        if residual(&alpha[..d], &mut g) < GRADIENT_TOL && current.is_finite() {
            return Ok(LegendreOutcome {
                value: current,
                maximizer: alpha,
                newton_steps: step,
                used_fallback: false,
            });
        }
        if step == NEWTON_STEPS {
            break;
        }
        model.l_alpha_alpha(node, &alpha[..d], coupling, &mut hess[..d * d]);
        let Some(dir) = solve_spd(d, &hess, &g) else {
            break;
        };
        let gnorm = math::norm(&g[..d]);
        // Near the optimum the objective gain falls below rounding; a step
        // that keeps the value within rounding and shrinks the gradient counts.
        let slack = 4.0 * f64::EPSILON * (1.0 + current.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = alpha;
            for i in 0..d {
                trial[i] -= t * dir[i];
            }
            let value = objective(&trial[..d]);
            let mut scratch = [0.0; 2];
            if value >= current
                || (value >= current - slack && residual(&trial[..d], &mut scratch) < gnorm)
            {
                alpha = trial;
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    golden_fallback(model, p, lambda, &objective, &residual)
}

/// Solves H x = g for symmetric positive-definite H (d ≤ 2).
fn solve_spd(d: usize, h: &[f64; 4], g: &[f64; 2]) -> Option<[f64; 2]> {
    if d == 1 {
        return (h[0] > 0.0 && h[0].is_finite()).then(|| [g[0] / h[0], 0.0]);
    }
    let det = h[0] * h[3] - h[1] * h[2];
    if !(h[0] > 0.0 && det > 0.0 && det.is_finite()) {
        return None;
    }
    Some([
        (h[3] * g[0] - h[1] * g[1]) / det,
        (h[0] * g[1] - h[2] * g[0]) / det,
    ])
}

fn golden_fallback<L: Lagrangian>(
    model: &L,
    p: &[f64],
    lambda: f64,
    objective: &dyn Fn(&[f64]) -> f64,
    residual: &dyn Fn(&[f64], &mut [f64]) -> f64,
) -> Result<LegendreOutcome> {
    let d = p.len();
    let GrowthConstants { c0, q } = model.constants();
    let radius = c0 * (1.0 + math::powf(math::norm(p), q - 1.0) + lambda);
    let mut alpha = [0.0; 2];
    let mut previous = objective(&alpha[..d]);
    for _ in 0..200 {
        for axis in 0..d {
            let line = |t: f64| {
                let mut a = alpha;
                a[axis] = t;
                objective(&a[..d])
            };
            alpha[axis] = golden_max(line, -radius, radius);
        }
        let value = objective(&alpha[..d]);
        if (value - previous).abs() <= 1e-15 * (1.0 + value.abs()) {
            break;
        }
        previous = value;
    }
    let mut g = [0.0; 2];
    let res = residual(&alpha[..d], &mut g);
    let value = objective(&alpha[..d]);
    if !(res < FALLBACK_TOL && value.is_finite()) {
        return Err(Error::Optimization(alloc::format!(
            "Legendre transform did not converge: residual {res:.3e} on box of radius {radius:.3e}"
        )));
    }
    Ok(LegendreOutcome {
        value,
        maximizer: alpha,
        newton_steps: NEWTON_STEPS,
        used_fallback: true,
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Hamiltonian obtained from a Lagrangian by numerical Legendre transform.
/// D_pH = −α* and D_xH = −D_xL(x, α*, μ) by the envelope theorem.
/// Evaluations that fail to optimize return NaN, which the solvers report
/// as a blow-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericHamiltonian<L> {
    lagrangian: L,
}

impl<L: Lagrangian> NumericHamiltonian<L> {
    pub fn new(lagrangian: L) -> Self {
        NumericHamiltonian { lagrangian }
    }

    pub fn lagrangian(&self) -> &L {
        &self.lagrangian
    }
}

pub struct NumericCoupling<C> {
    inner: C,
    lambda: f64,
}

impl<L: Lagrangian> Model for NumericHamiltonian<L> {
    type Coupling = NumericCoupling<L::Coupling>;

    fn constants(&self) -> GrowthConstants {
        self.lagrangian.constants()
    }

    fn coupling(&self, mu: &JointControlMeasure) -> Result<Self::Coupling> {
        Ok(NumericCoupling {
            inner: self.lagrangian.coupling(mu)?,
            lambda: lambda_q(mu, self.constants().conjugate())?,
        })
    }
}

impl<L: Lagrangian> Hamiltonian for NumericHamiltonian<L> {
    fn h(&self, node: usize, p: &[f64], c: &Self::Coupling) -> f64 {
        legendre_with(&self.lagrangian, node, p, &c.inner, c.lambda).map_or(f64::NAN, |o| o.value)
    }

    fn h_p(&self, node: usize, p: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match legendre_with(&self.lagrangian, node, p, &c.inner, c.lambda) {
            Ok(o) => {
                for (v, a) in out.iter_mut().zip(o.maximizer) {
                    *v = -a;
                }
            }
            Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }

    fn h_x(&self, node: usize, p: &[f64], c: &Self::Coupling, out: &mut [f64]) {
        match legendre_with(&self.lagrangian, node, p, &c.inner, c.lambda) {
            Ok(o) => {
                let d = p.len();
                self.lagrangian.l_x(node, &o.maximizer[..d], &c.inner, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }
            Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
        }
    }
}
