//! Wasserstein distances with the periodic ground metric.
//!
//! In one dimension the problem is solved exactly from cumulative
//! distributions; otherwise a debiased entropic (Sinkhorn divergence)
//! approximation is used.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, circle_dist};
use crate::measure::{GridMeasure, JointControlMeasure};

/// Masses below this are dropped before transport.
pub const SUPPORT_CUTOFF: f64 = 1e-15;

const MASS_MATCH: f64 = 1e-8;

/// Point masses on the unit circle: (position in [0,1), weight).
type Atoms = Vec<(f64, f64)>;

fn check_exponent(r: f64) -> Result<()> {
    if r >= 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("r", r, "[1, ∞)"))
    }
}

fn check_masses(m1: &GridMeasure, m2: &GridMeasure) -> Result<()> {
    m1.grid().check_same(m2.grid())?;
    let (a, b) = (m1.mass(), m2.mass());
    if (a - b).abs() > MASS_MATCH {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok(())
}

fn node_atoms(m: &GridMeasure) -> Atoms {
    let grid = m.grid();
    let total = m.mass();
    m.weights()
        .into_iter()
        .enumerate()
        .map(|(node, w)| (grid.position(node)[0], w / total))
        .collect()
}

/// Exact W_r between two grid densities on 𝕋¹, atoms at the nodes.
pub fn wasserstein_1d(m1: &GridMeasure, m2: &GridMeasure, r: f64) -> Result<f64> {
    if m1.grid().dim() != 1 {
        return Err(Error::Dimension("wasserstein_1d needs d = 1".into()));
    }
    check_exponent(r)?;
    check_masses(m1, m2)?;
    Ok(circle_wasserstein(&node_atoms(m1), &node_atoms(m2), r))
}

/// Exact W_r between two equally weighted samples on the unit circle.
pub fn empirical_wasserstein_1d(x: &[f64], y: &[f64], r: f64) -> Result<f64> {
    check_exponent(r)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidMeasure("empty sample".into()));
    }
    let atoms = |s: &[f64]| -> Atoms {
        let w = 1.0 / s.len() as f64;
        s.iter().map(|&p| (math::wrap_unit(p), w)).collect()
    };
    Ok(circle_wasserstein(&atoms(x), &atoms(y), r))
}

fn circle_wasserstein(a: &Atoms, b: &Atoms, r: f64) -> f64 {
    let mut a = a.clone();
    let mut b = b.clone();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    if r == 1.0 {
        circle_w1_cdf(&a, &b)
    } else {
        math::powf(circle_cost_quantile(&a, &b, r), 1.0 / r)
    }
}

/// W₁ = min_c ∫₀¹ |F₁ - F₂ - c| dx; the optimal c is a weighted median of
/// the CDF difference.
fn circle_w1_cdf(a: &Atoms, b: &Atoms) -> f64 {
    // merged breakpoints carrying signed mass
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .map(|&(x, w)| (x, w))
        .chain(b.iter().map(|&(x, w)| (x, -w)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut segments: Vec<(f64, f64)> = Vec::with_capacity(events.len());
    let mut level = 0.0;
    for (i, &(x, w)) in events.iter().enumerate() {
        level += w;
        let next = if i + 1 < events.len() {
            events[i + 1].0
        } else {
            events[0].0 + 1.0
        };
        if next > x {
            segments.push((level, next - x));
        }
    }
    if segments.is_empty() {
        return 0.0;
    }
    let c = weighted_median(&mut segments.clone());
    segments.iter().map(|(v, len)| (v - c).abs() * len).sum()
}

fn weighted_median(values: &mut [(f64, f64)]) -> f64 {
    values.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(v, w) in values.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    values[values.len() - 1].0
}

/// inf over shifts θ of ∫₀¹ |Q₁(t) - Q₂(t + θ)|^r dt, with quantiles of the
/// measures lifted to ℝ (Q(t + 1) = Q(t) + 1). Convex in θ.
fn circle_cost_quantile(a: &Atoms, b: &Atoms, r: f64) -> f64 {
    let qa = Quantile::new(a);
    let qb = Quantile::new(b);
    let cost = |theta: f64| -> f64 {
        let mut cuts: Vec<f64> = Vec::with_capacity(qa.cum.len() + qb.cum.len() + 2);
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.extend(qa.cum.iter().copied().filter(|c| *c > 0.0 && *c < 1.0));
        for &c in &qb.cum {
            let t = c - theta;
            let t = t - math::floor(t);
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let diff = qa.eval(mid) - qb.eval(mid + theta);
                (w[1] - w[0]) * math::powf(diff.abs(), r)
            })
            .sum()
    };
    golden_min(cost, -1.0, 1.0, 120)
}

struct Quantile {
    xs: Vec<f64>,
    // cumulative weights, ending at 1
    cum: Vec<f64>,
}

impl Quantile {
    fn new(atoms: &Atoms) -> Self {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut acc = 0.0;
        let mut xs = Vec::with_capacity(atoms.len());
        let mut cum = Vec::with_capacity(atoms.len());
        for &(x, w) in atoms {
            if w <= 0.0 {
                continue;
            }
            acc += w / total;
            xs.push(x);
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Quantile { xs, cum }
    }

    fn eval(&self, tau: f64) -> f64 {
        let k = math::floor(tau);
        let t = tau - k;
        let i = self.cum.partition_point(|c| *c <= t).min(self.xs.len() - 1);
        self.xs[i] + k
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let ratio = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// Settings for the entropic solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// L¹ violation of the marginals at which iteration stops.
    pub tolerance: f64,
}

impl SinkhornConfig {
    /// ε = 1e-2 · diam(𝕋^d)^r.
    pub fn for_torus(dim: usize, r: f64) -> Self {
        let diameter = math::sqrt(dim as f64) / 2.0;
        SinkhornConfig {
            epsilon: 1e-2 * math::powf(diameter, r),
            max_iterations: 10_000,
            tolerance: 1e-9,
        }
    }
}

fn check_config(cfg: &SinkhornConfig) -> Result<()> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::domain("ε_reg", cfg.epsilon, "(0, ∞)"));
    }
    Ok(())
}

fn support(m: &GridMeasure) -> (Vec<usize>, Vec<f64>) {
    let weights = m.weights();
    let nodes: Vec<usize> = (0..weights.len())
        .filter(|&i| weights[i] > SUPPORT_CUTOFF)
        .collect();
    let total: f64 = nodes.iter().map(|&i| weights[i]).sum();
    let w = nodes.iter().map(|&i| weights[i] / total).collect();
    (nodes, w)
}

fn torus_distance(p: [f64; 2], q: [f64; 2], dim: usize) -> f64 {
    let mut s = 0.0;
    for axis in 0..dim {
        let d = circle_dist(p[axis], q[axis]);
        s += d * d;
    }
    math::sqrt(s)
}

/// Debiased entropic W_r with periodic distance^r ground cost.
pub fn wasserstein_sinkhorn(
    m1: &GridMeasure,
    m2: &GridMeasure,
    r: f64,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    check_exponent(r)?;
    check_config(cfg)?;
    check_masses(m1, m2)?;
    let grid = m1.grid();
    let dim = grid.dim();
    let (na, wa) = support(m1);
    let (nb, wb) = support(m2);
    let cost = |p: &[usize], q: &[usize]| -> Vec<f64> {
        let mut c = Vec::with_capacity(p.len() * q.len());
        for &i in p {
            for &j in q {
                c.push(math::powf(
                    torus_distance(grid.position(i), grid.position(j), dim),
                    r,
                ));
            }
        }
        c
    };
    debiased(
        &wa,
        &wb,
        &cost(&na, &nb),
        &cost(&na, &na),
        &cost(&nb, &nb),
        r,
        cfg,
    )
}

/// Debiased entropic W_r between joint measures, ground cost
/// dist(x, y)^r + |α₁(x) - α₂(y)|^r over node pairs.
pub fn joint_wasserstein(
    mu1: &JointControlMeasure,
    mu2: &JointControlMeasure,
    r: f64,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    check_exponent(r)?;
    check_config(cfg)?;
    check_masses(mu1.state(), mu2.state())?;
    let grid = mu1.grid();
    let dim = grid.dim();
    let (na, wa) = support(mu1.state());
    let (nb, wb) = support(mu2.state());
    let cost = |p: &[usize], cp: &JointControlMeasure, q: &[usize], cq: &JointControlMeasure| {
        let mut c = Vec::with_capacity(p.len() * q.len());
        for &i in p {
            for &j in q {
                let dx = torus_distance(grid.position(i), grid.position(j), dim);
                let ai = cp.control().at(i);
                let aj = cq.control().at(j);
                let da = math::sqrt(ai.iter().zip(aj).map(|(x, y)| (x - y) * (x - y)).sum());
                c.push(math::powf(dx, r) + math::powf(da, r));
            }
        }
        c
    };
    debiased(
        &wa,
        &wb,
        &cost(&na, mu1, &nb, mu2),
        &cost(&na, mu1, &na, mu1),
        &cost(&nb, mu2, &nb, mu2),
        r,
        cfg,
    )
}

fn debiased(
    a: &[f64],
    b: &[f64],
    cab: &[f64],
    caa: &[f64],
    cbb: &[f64],
    r: f64,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    let ab = entropic_cost(a, b, cab, cfg)?;
    let aa = entropic_cost(a, a, caa, cfg)?;
    let bb = entropic_cost(b, b, cbb, cfg)?;
    let s = ab - 0.5 * (aa + bb);
    Ok(math::powf(s.max(0.0), 1.0 / r))
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + math::ln(terms.map(|t| math::exp(t - peak)).sum::<f64>())
}

/// Over-relaxation weight for the cross problem.
const RELAXATION: f64 = 1.8;

/// Dual value ⟨f, a⟩ + ⟨g, b⟩ of entropic OT (KL penalty relative to a ⊗ b),
/// log-domain updates with ε-scaling. Symmetric problems (a = b, symmetric
/// cost) use the averaged fixed point f ← ½(f + T(f)), which converges much
/// faster; the cross problem uses over-relaxed alternating updates.
fn entropic_cost(a: &[f64], b: &[f64], cost: &[f64], cfg: &SinkhornConfig) -> Result<f64> {
    let symmetric = a.len() == b.len() && a == b && is_symmetric(cost, a.len());
    let (na, nb) = (a.len(), b.len());
    let log_a: Vec<f64> = a.iter().map(|v| math::ln(*v)).collect();
    let log_b: Vec<f64> = b.iter().map(|v| math::ln(*v)).collect();
    let mut f = alloc::vec![0.0; na];
    let mut g = alloc::vec![0.0; nb];
    let cmax = cost.iter().copied().fold(0.0, f64::max);

    let row_update = |g: &[f64], i: usize, eps: f64| -> f64 {
        -eps * log_sum_exp((0..nb).map(|j| log_b[j] + (g[j] - cost[i * nb + j]) / eps))
    };
    let col_update = |f: &[f64], j: usize, eps: f64| -> f64 {
        -eps * log_sum_exp((0..na).map(|i| log_a[i] + (f[i] - cost[i * nb + j]) / eps))
    };
    // L¹ violation of the column marginals of the current plan
    let violation = |f: &[f64], g: &[f64], eps: f64| -> f64 {
        (0..nb)
            .map(|j| {
                let col: f64 = (0..na)
                    .map(|i| {
                        math::exp(log_a[i] + log_b[j] + (f[i] + g[j] - cost[i * nb + j]) / eps)
                    })
                    .sum();
                (col - b[j]).abs()
            })
            .sum()
    };

    let mut eps = cfg.epsilon.max(cmax);
    loop {
        let last = eps <= cfg.epsilon;
        let (limit, tol) = if last {
            (cfg.max_iterations, cfg.tolerance)
        } else {
            (200, 1e-3)
        };
        let mut residual = f64::INFINITY;
        let mut it = 0;
        while it < limit {
            it += 1;
            if symmetric {
                let next: Vec<f64> = (0..na).map(|i| row_update(&f, i, eps)).collect();
                for (fi, ni) in f.iter_mut().zip(next) {
                    *fi = 0.5 * (*fi + ni);
                }
                residual = violation(&f, &f, eps);
            } else {
                let w = if last { RELAXATION } else { 1.0 };
                for j in 0..nb {
                    g[j] = (1.0 - w) * g[j] + w * col_update(&f, j, eps);
                }
                for i in 0..na {
                    f[i] = (1.0 - w) * f[i] + w * row_update(&g, i, eps);
                }
                residual = violation(&f, &g, eps);
            }
            if residual < tol {
                break;
            }
        }
        if last {
            if residual >= tol {
                return Err(Error::Convergence {
                    iterations: it,
                    residual,
                });
            }
            break;
        }
        eps = (eps * 0.5).max(cfg.epsilon);
    }
    if symmetric {
        g.clone_from(&f);
    }
    Ok(a.iter().zip(&f).map(|(w, v)| w * v).sum::<f64>()
        + b.iter().zip(&g).map(|(w, v)| w * v).sum::<f64>())
}

fn is_symmetric(cost: &[f64], n: usize) -> bool {
    (0..n).all(|i| (0..i).all(|j| cost[i * n + j] == cost[j * n + i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SpectralGrid, VectorField};
    use alloc::vec;

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid::new(1, n, 0.75).unwrap()
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let g = grid(32);
        let m =
            GridMeasure::normalized(&g, (0..32).map(|i| 1.0 + (i as f64).sin().abs()).collect())
                .unwrap();
        assert!(wasserstein_1d(&m, &m, 1.0).unwrap() < 1e-15);
        assert!(wasserstein_1d(&m, &m, 2.0).unwrap() < 1e-6);
        let cfg = SinkhornConfig::for_torus(1, 1.0);
        assert!(wasserstein_sinkhorn(&m, &m, 1.0, &cfg).unwrap() <= 1e-9);
    }

    #[test]
    fn spikes_use_periodic_geodesic() {
        // nodes 6/64 and 58/64: straight distance 0.8125, around the wrap 0.1875
        let g = grid(64);
        let a = GridMeasure::spike(&g, 6);
        let b = GridMeasure::spike(&g, 58);
        assert!((wasserstein_1d(&a, &b, 1.0).unwrap() - 0.1875).abs() < 1e-14);
        assert!((wasserstein_1d(&a, &b, 2.0).unwrap() - 0.1875).abs() < 1e-9);
    }

    #[test]
    fn mass_mismatch_and_dimension_errors() {
        let g = grid(16);
        let a = GridMeasure::uniform(&g);
        let g2 = SpectralGrid::new(2, 8, 0.75).unwrap();
        let b = GridMeasure::uniform(&g2);
        assert!(matches!(
            wasserstein_1d(&b, &b, 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(wasserstein_1d(&a, &a, 0.5).is_err());
    }

    #[test]
    fn quantile_route_agrees_with_cdf_route_at_r1() {
        let g = grid(64);
        let a = GridMeasure::normalized(
            &g,
            (0..64).map(|i| ((i as f64) * 0.3).cos() + 1.2).collect(),
        )
        .unwrap();
        let b = GridMeasure::normalized(
            &g,
            (0..64).map(|i| ((i as f64) * 0.11).sin() + 1.1).collect(),
        )
        .unwrap();
        let mut pa = node_atoms(&a);
        let mut pb = node_atoms(&b);
        pa.sort_by(|p, q| p.0.total_cmp(&q.0));
        pb.sort_by(|p, q| p.0.total_cmp(&q.0));
        let cdf = circle_w1_cdf(&pa, &pb);
        let quant = circle_cost_quantile(&pa, &pb, 1.0);
        assert!((cdf - quant).abs() < 1e-9, "{cdf} vs {quant}");
    }

    #[test]
    fn empirical_samples() {
        let x = vec![0.1, 0.2, 0.3];
        let y = vec![0.15, 0.25, 0.35];
        assert!((empirical_wasserstein_1d(&x, &y, 1.0).unwrap() - 0.05).abs() < 1e-14);
        let z = vec![0.95, 0.05];
        let w = vec![0.05, 0.95];
        assert!(empirical_wasserstein_1d(&z, &w, 1.0).unwrap() < 1e-15);
    }

    #[test]
    fn sinkhorn_two_point_in_2d() {
        let g = SpectralGrid::new(2, 8, 0.75).unwrap();
        let a = GridMeasure::spike(&g, g.node_index([1, 1]));
        let b = GridMeasure::spike(&g, g.node_index([7, 3]));
        // offsets (2, 2)/8 periodically
        let rho = (2.0f64 * 0.25 * 0.25).sqrt();
        let cfg = SinkhornConfig::for_torus(2, 1.0);
        let w = wasserstein_sinkhorn(&a, &b, 1.0, &cfg).unwrap();
        assert!((w - rho).abs() <= 3.0 * cfg.epsilon, "{w} vs {rho}");
    }

    #[test]
    fn joint_two_point_closed_form() {
        let g = grid(16);
        let a1 = VectorField::constant(&g, &[0.5]);
        let a2 = VectorField::constant(&g, &[-0.25]);
        let mu1 = JointControlMeasure::new(GridMeasure::spike(&g, 2), a1).unwrap();
        let mu2 = JointControlMeasure::new(GridMeasure::spike(&g, 5), a2).unwrap();
        let cfg = SinkhornConfig::for_torus(1, 1.0);
        let w = joint_wasserstein(&mu1, &mu2, 1.0, &cfg).unwrap();
        let expect = 3.0 / 16.0 + 0.75;
        assert!((w - expect).abs() < 1e-9);
        let w2 = joint_wasserstein(&mu1, &mu2, 2.0, &SinkhornConfig::for_torus(1, 2.0)).unwrap();
        let expect2 = ((3.0f64 / 16.0).powi(2) + 0.75f64.powi(2)).sqrt();
        assert!((w2 - expect2).abs() < 1e-9);
        assert_eq!(joint_wasserstein(&mu1, &mu1, 1.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn bad_epsilon() {
        let g = grid(16);
        let m = GridMeasure::uniform(&g);
        let cfg = SinkhornConfig {
            epsilon: 0.0,
            ..SinkhornConfig::for_torus(1, 1.0)
        };
        assert!(wasserstein_sinkhorn(&m, &m, 1.0, &cfg).is_err());
    }

    #[test]
    fn sinkhorn_tracks_exact_solver_in_1d() {
        let g = grid(64);
        let a =
            GridMeasure::normalized(&g, (0..64).map(|i| (0.2 * i as f64).cos() + 1.5).collect())
                .unwrap();
        let b = GridMeasure::normalized(
            &g,
            (0..64)
                .map(|i| (0.1 * i as f64).sin().powi(2) + 0.2)
                .collect(),
        )
        .unwrap();
        let c = GridMeasure::spike(&g, 40);
        let cfg = SinkhornConfig::for_torus(1, 1.0);
        for (p, q) in [(&a, &b), (&a, &c), (&b, &c)] {
            let exact = wasserstein_1d(p, q, 1.0).unwrap();
            let ent = wasserstein_sinkhorn(p, q, 1.0, &cfg).unwrap();
            assert!(
                (exact - ent).abs() <= 3.0 * cfg.epsilon + 1e-6,
                "{exact} vs {ent}"
            );
        }
    }
}
