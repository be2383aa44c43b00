//! Particle simulation of dX = b dt + dJ with isotropic 2s-stable jumps.
//!
//! Increments are drawn by subordination, J = √(2S)·Z with Z standard normal
//! and S positive s-stable with E[e^{−λS}] = e^{−Δt λ^s}, so that
//! E[e^{i2πk·J}] = e^{−Δt(2π|k|)^{2s}}, the torus semigroup symbol.
//! Each particle owns a ChaCha8 stream keyed by its index, so trajectories
//! do not depend on how particles are scheduled across threads.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{SpectralGrid, TimeGrid, VectorField};
use crate::math;
use crate::measure::{GridMeasure, MeasurePath};
use crate::par;
use crate::transport::empirical_wasserstein_1d;

/// Particles per deposition chunk; chunks are merged in index order.
const CHUNK: usize = 4096;

/// Positive s-stable variable with Laplace transform e^{−λ^s} (Kanter's
/// representation of the Chambers–Mallows–Stuck sampler).
fn positive_stable<R: Rng + ?Sized>(s: f64, rng: &mut R) -> f64 {
    let u = loop {
        let u: f64 = rng.random::<f64>() * PI;
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    let head = math::sin(s * u) / math::powf(math::sin(u), 1.0 / s);
    let tail = math::powf(math::sin((1.0 - s) * u) / e, (1.0 - s) / s);
    head * tail
}

/// One increment J_Δt of the 2s-stable process, written to `out` (length d).
pub fn sample_stable_increment<R: Rng + ?Sized>(
    s: f64,
    dt: f64,
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::domain("s", s, "(1/2, 1)"));
    }
    if !(dt > 0.0) {
        return Err(Error::domain("Δt", dt, "(0, ∞)"));
    }
    jump(s, dt, rng, out);
    Ok(())
}

fn jump<R: Rng + ?Sized>(s: f64, dt: f64, rng: &mut R, out: &mut [f64]) {
    let scale = math::sqrt(2.0 * math::powf(dt, 1.0 / s) * positive_stable(s, rng));
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = scale * z;
    }
}

/// Particle positions in [0,1)^d, stored particle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) || positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::Dimension(alloc::format!(
                "{} coordinates for dimension {dim}",
                positions.len()
            )));
        }
        if positions.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::InvalidField("particle outside [0,1)^d".into()));
        }
        Ok(ParticleEnsemble { dim, positions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Coordinates along one axis.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.positions
            .iter()
            .skip(axis)
            .step_by(self.dim)
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub particles: usize,
    pub seed: u64,
    /// Disables the stable increments (pure transport).
    pub jumps: bool,
    /// Keep every `record_every`-th time level; the last level is always kept.
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(particles: usize, seed: u64) -> Self {
        SimConfig {
            particles,
            seed,
            jumps: true,
            record_every: 1,
        }
    }
}

/// Recorded ensembles with their time indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePath {
    pub time: TimeGrid,
    pub seed: u64,
    pub records: Vec<(usize, ParticleEnsemble)>,
}

impl ParticlePath {
    pub fn last(&self) -> &ParticleEnsemble {
        &self.records.last().expect("at least one record").1
    }

    pub fn at(&self, time_index: usize) -> Option<&ParticleEnsemble> {
        self.records
            .iter()
            .find(|(j, _)| *j == time_index)
            .map(|(_, e)| e)
    }
}

fn particle_rng(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    rng
}

/// Draws one position from m₀, read as piecewise constant on the cell
/// centred at each node.
struct InitialSampler<'a> {
    m: &'a GridMeasure,
    cdf: Vec<f64>,
    peak: f64,
}

impl<'a> InitialSampler<'a> {
    fn new(m: &'a GridMeasure) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = m
            .weights()
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        InitialSampler {
            m,
            cdf,
            peak: m.sup_norm(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let grid = self.m.grid();
        let h = grid.spacing();
        if grid.dim() == 1 {
            let u: f64 = rng.random();
            let node = self
                .cdf
                .partition_point(|c| *c <= u)
                .min(self.cdf.len() - 1);
            let offset: f64 = rng.random();
            out[0] = math::wrap_unit(grid.position(node)[0] + (offset - 0.5) * h);
            return;
        }
        let n = grid.points_per_axis();
        loop {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let nearest = |v: f64| (math::floor(v * n as f64 + 0.5) as usize) % n;
            let node = grid.node_index([nearest(x), nearest(y)]);
            let accept: f64 = rng.random();
            if accept * self.peak < self.m.density()[node] {
                out[0] = x;
                out[1] = y;
                return;
            }
        }
    }
}

/// Multilinear periodic interpolation of a nodal vector field.
fn interpolate(b: &VectorField, x: &[f64], out: &mut [f64]) {
    let grid = b.grid();
    let n = grid.points_per_axis();
    let d = grid.dim();
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for axis in 0..d {
        let scaled = x[axis] * n as f64;
        let cell = math::floor(scaled);
        frac[axis] = scaled - cell;
        base[axis] = (cell as usize) % n;
    }
    out[..d].iter_mut().for_each(|v| *v = 0.0);
    let corners = 1 << d;
    for corner in 0..corners {
        let mut idx = [0usize; 2];
        let mut weight = 1.0;
        for axis in 0..d {
            let up = (corner >> axis) & 1 == 1;
            idx[axis] = if up { (base[axis] + 1) % n } else { base[axis] };
            weight *= if up { frac[axis] } else { 1.0 - frac[axis] };
        }
        let node = if d == 1 { idx[0] } else { grid.node_index(idx) };
        for axis in 0..d {
            out[axis] += weight * b.at(node)[axis];
        }
    }
}

/// Euler scheme X_{j+1} = wrap(X_j + b(X_j, t^j)Δt + J_Δt) from X_0 ~ m₀.
pub fn simulate_sde(
    b_path: &MeasurePath<VectorField>,
    m0: &GridMeasure,
    cfg: &SimConfig,
) -> Result<ParticlePath> {
    let grid = m0.grid();
    let d = grid.dim();
    if cfg.particles == 0 {
        return Err(Error::domain("particles", 0.0, "[1, ∞)"));
    }
    if cfg.record_every == 0 {
        return Err(Error::domain("record_every", 0.0, "[1, ∞)"));
    }
    for b in b_path.slices() {
        grid.check_same(b.grid())?;
        if !b.is_finite() {
            return Err(Error::InvalidField("non-finite drift".into()));
        }
    }
    let time = *b_path.time();
    let dt = time.dt();
    let s = grid.order();
    let recorded: Vec<usize> = (0..time.len())
        .filter(|j| j % cfg.record_every == 0 || *j == time.steps())
        .collect();
    let sampler = InitialSampler::new(m0);

    let trajectories = par::map_range(cfg.particles, |p| {
        let mut rng = particle_rng(cfg.seed, p);
        let mut x = [0.0; 2];
        sampler.draw(&mut rng, &mut x[..d]);
        let mut out = Vec::with_capacity(recorded.len() * d);
        let mut next_record = 0;
        let mut drift = [0.0; 2];
        let mut kick = [0.0; 2];
        for j in 0..time.len() {
            if recorded[next_record] == j {
                out.extend_from_slice(&x[..d]);
                next_record += 1;
                if next_record == recorded.len() {
                    break;
                }
            }
            interpolate(b_path.get(j), &x[..d], &mut drift);
            if cfg.jumps {
                jump(s, dt, &mut rng, &mut kick[..d]);
            }
            for axis in 0..d {
                x[axis] = math::wrap_unit(x[axis] + drift[axis] * dt + kick[axis]);
            }
        }
        out
    });

    let records = recorded
        .iter()
        .enumerate()
        .map(|(r, &j)| {
            let positions = trajectories
                .iter()
                .flat_map(|t| t[r * d..(r + 1) * d].iter().copied())
                .collect();
            Ok((j, ParticleEnsemble::new(d, positions)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParticlePath {
        time,
        seed: cfg.seed,
        records,
    })
}

/// Cloud-in-cell deposition onto the grid, normalized to unit mass.
pub fn empirical_measure(ens: &ParticleEnsemble, grid: &SpectralGrid) -> Result<GridMeasure> {
    if ens.dim() != grid.dim() {
        return Err(Error::Dimension(
            "ensemble and grid dimensions differ".into(),
        ));
    }
    let chunks = ens.len().div_ceil(CHUNK);
    let partial = par::map_range(chunks, |c| {
        let mut acc = alloc::vec![0.0; grid.len()];
        let end = ((c + 1) * CHUNK).min(ens.len());
        for i in c * CHUNK..end {
            deposit(grid, ens.particle(i), &mut acc);
        }
        acc
    });
    let mut total = alloc::vec![0.0; grid.len()];
    for acc in partial {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    GridMeasure::normalized(grid, total)
}

fn deposit(grid: &SpectralGrid, x: &[f64], acc: &mut [f64]) {
    let n = grid.points_per_axis();
    let d = grid.dim();
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for axis in 0..d {
        let scaled = x[axis] * n as f64;
        let cell = math::floor(scaled);
        frac[axis] = scaled - cell;
        base[axis] = (cell as usize) % n;
    }
    for corner in 0..(1 << d) {
        let mut idx = [0usize; 2];
        let mut weight = 1.0;
        for axis in 0..d {
            let up = (corner >> axis) & 1 == 1;
            idx[axis] = if up { (base[axis] + 1) % n } else { base[axis] };
            weight *= if up { frac[axis] } else { 1.0 - frac[axis] };
        }
        let node = if d == 1 { idx[0] } else { grid.node_index(idx) };
        acc[node] += weight;
    }
}

/// W₁ between two ensembles: exact in d = 1; in d = 2 the identity coupling
/// of particle labels, which bounds W₁ from above.
pub fn ensemble_distance(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<f64> {
    if a.dim() != b.dim() || a.len() != b.len() {
        return Err(Error::Dimension("ensembles differ in shape".into()));
    }
    if a.dim() == 1 {
        return empirical_wasserstein_1d(a.positions(), b.positions(), 1.0);
    }
    let total: f64 = (0..a.len())
        .map(|i| {
            let (p, q) = (a.particle(i), b.particle(i));
            let dx = math::circle_dist(p[0], q[0]);
            let dy = math::circle_dist(p[1], q[1]);
            math::sqrt(dx * dx + dy * dy)
        })
        .sum();
    Ok(total / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderReport {
    /// (gap, W₁) over all pairs of recorded times.
    pub samples: Vec<(f64, f64)>,
    /// 2N^{−1/2}.
    pub noise_floor: f64,
    /// C fitted on the shortest quarter of gaps with W₁ above the floor.
    pub constant: f64,
    /// Largest W₁ / (‖b‖ gap + 2C gap^{1/2}) over samples above the floor.
    pub worst_ratio: f64,
    pub passed: bool,
    /// Log-log slope of W₁ against the gap from the first record, over the
    /// window where it sits above twice the floor and below 0.1.
    pub exponent: Option<f64>,
}

/// Checks W₁(m(t₁), m(t₀)) ≤ ‖b‖_∞|t₁−t₀| + C|t₁−t₀|^{1/2} on recorded ensembles.
pub fn holder_wasserstein_check(path: &ParticlePath, b_sup: f64) -> Result<HolderReport> {
    let records = &path.records;
    if records.len() < 8 {
        return Err(Error::Dimension(alloc::format!(
            "{} time samples, need at least 8",
            records.len()
        )));
    }
    let time = &path.time;
    let n = records[0].1.len();
    let noise_floor = 2.0 / math::sqrt(n as f64);
    let pairs: Vec<(usize, usize)> = (0..records.len())
        .flat_map(|i| (i + 1..records.len()).map(move |j| (i, j)))
        .collect();
    let distances = par::map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        ensemble_distance(&records[i].1, &records[j].1)
    });
    let mut samples = Vec::with_capacity(pairs.len());
    let mut from_start = Vec::new();
    for (&(i, j), w) in pairs.iter().zip(distances) {
        let w = w?;
        let gap = time.time(records[j].0) - time.time(records[i].0);
        samples.push((gap, w));
        if i == 0 {
            from_start.push((gap, w));
        }
    }

    // Fit on the shortest quarter of the resolved gaps, where the drift term
    // is negligible and the square-root term has to carry the bound.
    let mut resolved: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(_, w)| *w > noise_floor)
        .collect();
    resolved.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fitted = resolved.len().div_ceil(4);
    let constant = resolved[..fitted]
        .iter()
        .map(|(g, w)| (w - b_sup * g).max(0.0) / math::sqrt(*g))
        .fold(0.0, f64::max);
    let worst_ratio = samples
        .iter()
        .filter(|(_, w)| *w > noise_floor)
        .map(|(g, w)| w / (b_sup * g + 2.0 * constant * math::sqrt(*g)))
        .fold(0.0, f64::max);

    let window: Vec<(f64, f64)> = from_start
        .into_iter()
        .filter(|(_, w)| *w > 2.0 * noise_floor && *w < 0.1)
        .map(|(g, w)| (math::ln(g), math::ln(w)))
        .collect();
    let exponent = (window.len() >= 2).then(|| slope(&window));

    Ok(HolderReport {
        samples,
        noise_floor,
        constant,
        worst_ratio,
        passed: worst_ratio <= 1.0,
        exponent,
    })
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// A drift path repeating `b` at every time node.
pub fn constant_drift_path(b: &VectorField, time: &TimeGrid) -> Result<MeasurePath<VectorField>> {
    MeasurePath::new(*time, alloc::vec![b.clone(); time.len()])
}
