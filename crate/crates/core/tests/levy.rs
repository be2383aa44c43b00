use std::f64::consts::PI;

use fmfgc_core::levy::{
    constant_drift_path, empirical_measure, holder_wasserstein_check, sample_stable_increment,
    simulate_sde, ParticleEnsemble, SimConfig,
};
use fmfgc_core::spectral::{semigroup_apply, spectrum};
use fmfgc_core::transport::wasserstein_1d;
use fmfgc_core::{GridMeasure, SpectralGrid, TimeGrid, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn increments(s: f64, dt: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [0.0];
    (0..count)
        .map(|_| {
            sample_stable_increment(s, dt, &mut rng, &mut out).unwrap();
            out[0]
        })
        .collect()
}

#[test]
fn characteristic_function_matches_semigroup_symbol() {
    let n = 1_000_000;
    let (s, dt) = (0.75, 0.05);
    let jumps = increments(s, dt, n, 1);
    for k in 1..=3 {
        let omega = 2.0 * PI * k as f64;
        let mean = jumps.iter().map(|j| (omega * j).cos()).sum::<f64>() / n as f64;
        let target = (-dt * omega.powf(2.0 * s)).exp();
        assert!(
            (mean - target).abs() <= 4.0 / (n as f64).sqrt(),
            "k = {k}: {mean} vs {target}"
        );
    }
}

#[test]
fn median_scales_with_stable_exponent() {
    let s = 0.75;
    let points: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&dt| {
            let mut abs: Vec<f64> = increments(s, dt, 100_001, 7)
                .iter()
                .map(|j| j.abs())
                .collect();
            abs.sort_by(f64::total_cmp);
            (f64::ln(dt), abs[50_000].ln())
        })
        .collect();
    let slope = (points[3].1 - points[0].1) / (points[3].0 - points[0].0);
    assert!((slope - 1.0 / (2.0 * s)).abs() < 0.02, "slope {slope}");
}

#[test]
fn increments_are_symmetric() {
    let n = 1_000_000;
    let jumps = increments(0.9, 0.01, n, 3);
    let mean = jumps.iter().sum::<f64>() / n as f64;
    let var = jumps.iter().map(|j| (j - mean).powi(2)).sum::<f64>() / n as f64;
    assert!(mean.abs() <= 5.0 * var.sqrt() / (n as f64).sqrt());
}

#[test]
fn invalid_sampler_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = [0.0];
    assert!(sample_stable_increment(0.5, 0.1, &mut rng, &mut out).is_err());
    assert!(sample_stable_increment(0.7, 0.0, &mut rng, &mut out).is_err());
}

fn grid(n: usize) -> SpectralGrid {
    SpectralGrid::new(1, n, 0.75).unwrap()
}

#[test]
fn deposition_weights() {
    let g = grid(16);
    let at_node = ParticleEnsemble::new(1, vec![3.0 / 16.0]).unwrap();
    assert_eq!(
        empirical_measure(&at_node, &g).unwrap(),
        GridMeasure::spike(&g, 3)
    );
    let mid = ParticleEnsemble::new(1, vec![3.5 / 16.0]).unwrap();
    let m = empirical_measure(&mid, &g).unwrap();
    assert!((m.weights()[3] - 0.5).abs() < 1e-15 && (m.weights()[4] - 0.5).abs() < 1e-15);
    // Wraps across the seam.
    let seam = ParticleEnsemble::new(1, vec![15.5 / 16.0]).unwrap();
    assert!((empirical_measure(&seam, &g).unwrap().weights()[0] - 0.5).abs() < 1e-15);
}

#[test]
fn uniform_particles_deposit_flat() {
    let g = grid(64);
    let n = 1_000_000;
    let path = simulate_sde(
        &constant_drift_path(&VectorField::zeros(&g), &TimeGrid::new(1.0, 1).unwrap()).unwrap(),
        &GridMeasure::uniform(&g),
        &SimConfig::new(n, 5),
    )
    .unwrap();
    let m = empirical_measure(&path.records[0].1, &g).unwrap();
    let worst = m
        .density()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 5.0 * (64.0 / n as f64).sqrt(), "{worst}");
}

#[test]
fn uniform_law_is_stationary() {
    let g = grid(64);
    let n = 100_000;
    let time = TimeGrid::new(0.5, 20).unwrap();
    let path = simulate_sde(
        &constant_drift_path(&VectorField::zeros(&g), &time).unwrap(),
        &GridMeasure::uniform(&g),
        &SimConfig::new(n, 11),
    )
    .unwrap();
    let m = empirical_measure(path.last(), &g).unwrap();
    let w = wasserstein_1d(&m, &GridMeasure::uniform(&g), 1.0).unwrap();
    assert!(w <= 2.0 / (n as f64).sqrt() + 2.0 * g.spacing(), "{w}");
}

#[test]
fn pure_drift_translates() {
    let g = grid(32);
    let c = 0.37;
    let time = TimeGrid::new(1.0, 25).unwrap();
    let cfg = SimConfig {
        jumps: false,
        ..SimConfig::new(1000, 2)
    };
    let path = simulate_sde(
        &constant_drift_path(&VectorField::constant(&g, &[c]), &time).unwrap(),
        &GridMeasure::uniform(&g),
        &cfg,
    )
    .unwrap();
    let (start, end) = (&path.records[0].1, path.last());
    for i in 0..1000 {
        let moved = (start.particle(i)[0] + c).rem_euclid(1.0);
        let gap = (end.particle(i)[0] - moved).abs();
        assert!(gap.min(1.0 - gap) < 1e-12);
    }
}

#[test]
fn pure_jumps_reproduce_the_semigroup() {
    let g = grid(64);
    let m0 = GridMeasure::normalized(
        &g,
        (0..64)
            .map(|j| ((2.0 * PI * g.position(j)[0]).cos() - 1.0).exp())
            .collect(),
    )
    .unwrap();
    let horizon = 0.1;
    let n = 100_000;
    let time = TimeGrid::new(horizon, 10).unwrap();
    let path = simulate_sde(
        &constant_drift_path(&VectorField::zeros(&g), &time).unwrap(),
        &m0,
        &SimConfig::new(n, 23),
    )
    .unwrap();
    let exact = GridMeasure::new(
        &g,
        semigroup_apply(&m0.to_field(), horizon)
            .unwrap()
            .into_values(),
    )
    .unwrap();
    let m = empirical_measure(path.last(), &g).unwrap();
    let w = wasserstein_1d(&m, &exact, 1.0).unwrap();
    assert!(
        w <= 2.0 / (n as f64).sqrt() + 2.0 * g.spacing() + 0.01,
        "{w}"
    );

    // Cells are sampled uniformly, which multiplies each mode by sinc(k Δx).
    let coeffs = spectrum(&m0.to_field());
    let xs = path.last().positions();
    for k in 1..=3usize {
        let omega = 2.0 * PI * k as f64;
        let cell = (PI * k as f64 / 64.0).sin() / (PI * k as f64 / 64.0);
        let target = coeffs[64 - k].re * cell * (-horizon * omega.powf(1.5)).exp();
        let mean = xs.iter().map(|x| (omega * x).cos()).sum::<f64>() / n as f64;
        assert!(
            (mean - target).abs() <= 4.0 / (n as f64).sqrt(),
            "k = {k}: {mean} vs {target}"
        );
    }
}

#[test]
fn same_seed_same_paths() {
    let g = SpectralGrid::new(2, 16, 0.8).unwrap();
    let b = VectorField::from_fn(&g, |x, out| {
        out[0] = (2.0 * PI * x[1]).sin();
        out[1] = 0.3;
    });
    let m0 = GridMeasure::normalized(
        &g,
        (0..256)
            .map(|j| 1.0 + 0.5 * (2.0 * PI * g.position(j)[0]).cos())
            .collect(),
    )
    .unwrap();
    let time = TimeGrid::new(0.2, 8).unwrap();
    let run = |seed| {
        simulate_sde(
            &constant_drift_path(&b, &time).unwrap(),
            &m0,
            &SimConfig::new(5000, seed),
        )
        .unwrap()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4).last(), run(5).last());
}

#[test]
fn rejection_sampling_follows_the_density() {
    let g = SpectralGrid::new(2, 16, 0.8).unwrap();
    let m0 = GridMeasure::normalized(
        &g,
        (0..256)
            .map(|j| 1.0 + 0.8 * (2.0 * PI * g.position(j)[0]).cos())
            .collect(),
    )
    .unwrap();
    let n = 200_000;
    let path = simulate_sde(
        &constant_drift_path(&VectorField::zeros(&g), &TimeGrid::new(0.1, 1).unwrap()).unwrap(),
        &m0,
        &SimConfig::new(n, 9),
    )
    .unwrap();
    let xs = path.records[0].1.axis(0);
    let mean_cos = xs.iter().map(|x| (2.0 * PI * x).cos()).sum::<f64>() / n as f64;
    // ∫cos(2πx)(1 + 0.8cos(2πx)) dx = 0.4, up to the piecewise-constant cells.
    assert!((mean_cos - 0.4).abs() < 0.01, "{mean_cos}");
}

fn spike_path(s: f64, b: f64, jumps: bool) -> fmfgc_core::levy::ParticlePath {
    let g = SpectralGrid::new(1, 1024, s).unwrap();
    let time = TimeGrid::new(0.05, 128).unwrap();
    let cfg = SimConfig {
        jumps,
        record_every: 8,
        ..SimConfig::new(100_000, 31)
    };
    simulate_sde(
        &constant_drift_path(&VectorField::constant(&g, &[b]), &time).unwrap(),
        &GridMeasure::spike(&g, 512),
        &cfg,
    )
    .unwrap()
}

/// W₁ between a point mass and its image under the fractional heat flow on
/// the circle: 1/4 + Σ_k e^{-(2πk)^{2s}t}((-1)^k - 1)/(π²k²).
fn wrapped_spread(s: f64, t: f64) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut w = 0.25;
    for k in (1..200_000).step_by(2) {
        let k = k as f64;
        let term =
            (-(2.0 * std::f64::consts::PI * k).powf(2.0 * s) * t).exp() * 2.0 / (pi2 * k * k);
        w -= term;
        if term < 1e-16 {
            break;
        }
    }
    w
}

fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0.ln() / n, a.1 + p.1.ln() / n));
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0.ln() - mx) * (p.1.ln() - my))
        .sum();
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn holder_check_on_pure_jumps() {
    for s in [0.9, 0.75] {
        let path = spike_path(s, 0.0, true);
        let report = holder_wasserstein_check(&path, 0.0).unwrap();
        assert!(report.passed, "{report:?}");
        let from_start = &report.samples[..path.records.len() - 1];
        for &(gap, w) in from_start {
            let exact = wrapped_spread(s, gap);
            assert!(
                (w - exact).abs() < 2.0 * report.noise_floor,
                "s={s} gap={gap}: {w} vs {exact}"
            );
        }
        let window: Vec<_> = from_start
            .iter()
            .filter(|(_, w)| *w > 2.0 * report.noise_floor && *w < 0.1)
            .map(|&(g, _)| (g, wrapped_spread(s, g)))
            .collect();
        let exponent = report.exponent.unwrap();
        assert!(
            (exponent - fitted_slope(&window)).abs() < 0.03,
            "s={s}: {exponent}"
        );
        // Wrapping bends the curve, but at short times the stable scaling t^{1/(2s)} remains.
        let tiny = fitted_slope(&[
            (1e-7, wrapped_spread(s, 1e-7)),
            (1e-6, wrapped_spread(s, 1e-6)),
        ]);
        assert!((tiny - 0.5 / s).abs() < 0.01, "s={s}: {tiny}");
    }
}

#[test]
fn holder_check_trivial_and_transport_regimes() {
    let frozen = holder_wasserstein_check(&spike_path(0.75, 0.0, false), 0.0).unwrap();
    assert!(frozen.passed);
    assert!(frozen.samples.iter().all(|(_, w)| *w <= frozen.noise_floor));

    let b = 0.8;
    let moving = holder_wasserstein_check(&spike_path(0.75, b, false), b).unwrap();
    assert!(moving.passed);
    for (gap, w) in &moving.samples {
        assert!(*w <= b * gap + moving.noise_floor);
    }
}
