use std::f64::consts::PI;

use fmfgc_core::fp::{duality_residual, fp_step, solve_forward};
use fmfgc_core::hjb::solve_backward;
use fmfgc_core::model::{
    h_p_field, theta_scale, GrowthConstants, Hamiltonian, Kernel, Model, QuadraticExample,
};
use fmfgc_core::spectral::semigroup_apply;
use fmfgc_core::{
    Error, GridMeasure, JointControlMeasure, MeasurePath, ScalarField, SpectralGrid, TimeGrid,
    VectorField,
};
use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

fn grid(n: usize) -> SpectralGrid {
    SpectralGrid::new(1, n, 0.75).unwrap()
}

fn von_mises(grid: &SpectralGrid) -> GridMeasure {
    GridMeasure::normalized(
        grid,
        (0..grid.len())
            .map(|j| ((2.0 * PI * grid.position(j)[0]).cos() - 1.0).exp())
            .collect(),
    )
    .unwrap()
}

fn constant_path(time: &TimeGrid, b: VectorField) -> MeasurePath<VectorField> {
    MeasurePath::new(*time, vec![b; time.len()]).unwrap()
}

#[test]
fn uniform_is_fixed_without_drift_or_with_constant_drift() {
    let grid = SpectralGrid::new(2, 16, 0.75).unwrap();
    let uniform = GridMeasure::uniform(&grid);
    let still = fp_step(&uniform, &VectorField::zeros(&grid), 0.01).unwrap();
    let moving = fp_step(&uniform, &VectorField::constant(&grid, &[0.7, -0.3]), 0.01).unwrap();
    for m in [still, moving] {
        assert!(m.density().iter().all(|v| (v - 1.0).abs() < 1e-13));
    }
}

#[test]
fn one_step_converges_at_first_order() {
    let grid = grid(64);
    let b = VectorField::from_fn(&grid, |x, out| out[0] = (2.0 * PI * x[0]).sin());
    let uniform = GridMeasure::uniform(&grid);
    let error = |dt: f64| {
        let coarse = fp_step(&uniform, &b, dt).unwrap();
        let mut fine = uniform.clone();
        for _ in 0..100 {
            fine = fp_step(&fine, &b, dt / 100.0).unwrap();
        }
        coarse.to_field().sup_distance(&fine.to_field()).unwrap()
    };
    let (big, small) = (error(0.01), error(0.005));
    // Local error of a one-step splitting is O(Δt²); the global rate is one lower.
    assert!(big / small > 3.0, "{big} / {small}");
}

#[test]
fn zero_drift_is_the_semigroup() {
    let grid = grid(128);
    let bump = GridMeasure::normalized(
        &grid,
        (0..128)
            .map(|j| (-(grid.position(j)[0] - 0.4f64).powi(2) / (2.0 * 0.02f64.powi(2))).exp())
            .collect(),
    )
    .unwrap();
    let time = TimeGrid::new(0.3, 30).unwrap();
    let sol = solve_forward(&constant_path(&time, VectorField::zeros(&grid)), &bump).unwrap();
    let exact = semigroup_apply(&bump.to_field(), 0.3).unwrap();
    assert!(sol.terminal().to_field().sup_distance(&exact).unwrap() < 1e-10);
    for pair in sol.slices().windows(2) {
        assert!(pair[1].to_field().l2_norm() <= pair[0].to_field().l2_norm() + 1e-14);
    }
}

#[test]
fn divergence_free_drift_keeps_uniform() {
    let grid = SpectralGrid::new(2, 32, 0.75).unwrap();
    // b = (∂_y ψ, −∂_x ψ), ψ = sin(2πx) sin(2πy).
    let b = VectorField::from_fn(&grid, |x, out| {
        let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
        let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
        out[0] = 2.0 * PI * sx * cy;
        out[1] = -2.0 * PI * cx * sy;
    });
    let time = TimeGrid::new(0.2, 50).unwrap();
    let sol = solve_forward(&constant_path(&time, b), &GridMeasure::uniform(&grid)).unwrap();
    assert!(sol
        .terminal()
        .density()
        .iter()
        .all(|v| (v - 1.0).abs() < 1e-10));
}

#[test]
fn cfl_violation_is_reported() {
    let grid = grid(64);
    let b = VectorField::constant(&grid, &[3.0]);
    let time = TimeGrid::new(1.0, 10).unwrap();
    match solve_forward(&constant_path(&time, b), &GridMeasure::uniform(&grid)) {
        Err(Error::Cfl { required_steps, .. }) => assert_eq!(required_steps, 192),
        other => panic!("expected CFL error, got {other:?}"),
    }
}

fn random_drift(grid: &SpectralGrid, rng: &mut SmallRng) -> VectorField {
    let modes: Vec<(f64, f64, f64)> = (1..=3)
        .map(|k| {
            (
                k as f64,
                rng.random_range(-0.4..0.4),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    VectorField::from_fn(grid, |x, out| {
        out[0] = modes
            .iter()
            .map(|(k, a, phase)| a * (2.0 * PI * (k * x[0] + phase)).sin())
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smooth_drift_keeps_mass_positivity_and_comparison(seed in any::<u64>()) {
        let grid = grid(64);
        let mut rng = SmallRng::seed_from_u64(seed);
        let time = TimeGrid::new(1.0, 100).unwrap();
        let path = MeasurePath::new(
            time,
            (0..time.len()).map(|_| random_drift(&grid, &mut rng)).collect(),
        ).unwrap();
        let sol = solve_forward(&path, &von_mises(&grid)).unwrap();
        for m in sol.slices() {
            prop_assert!((m.mass() - 1.0).abs() <= 1e-10);
            prop_assert!(m.density().iter().all(|v| *v >= 0.0));
        }
        prop_assert!(sol.min_trace.iter().all(|v| *v >= -1e-12));
        for (sup, bound) in sol.sup_trace.iter().zip(sol.sup_bound()) {
            prop_assert!(*sup <= 1.1 * bound);
        }
    }
}

struct ConstantHamiltonian(f64);

impl Model for ConstantHamiltonian {
    type Coupling = ();

    fn constants(&self) -> GrowthConstants {
        GrowthConstants { c0: 1.0, q: 2.0 }
    }

    fn coupling(&self, _: &JointControlMeasure) -> fmfgc_core::Result<()> {
        Ok(())
    }
}

impl Hamiltonian for ConstantHamiltonian {
    fn h(&self, _: usize, _: &[f64], _: &()) -> f64 {
        self.0
    }

    fn h_p(&self, _: usize, _: &[f64], _: &(), out: &mut [f64]) {
        out.fill(0.0);
    }

    fn h_x(&self, _: usize, _: &[f64], _: &(), out: &mut [f64]) {
        out.fill(0.0);
    }
}

fn at_rest(time: &TimeGrid, m: &GridMeasure) -> MeasurePath<JointControlMeasure> {
    MeasurePath::new(
        *time,
        vec![JointControlMeasure::at_rest(m.clone()); time.len()],
    )
    .unwrap()
}

/// Frozen-μ HJB then FP with the induced drift.
fn coupled_residual<H: Hamiltonian>(
    model: &fmfgc_core::model::ThetaScaled<H>,
    n: usize,
    steps: usize,
) -> f64 {
    let grid = grid(n);
    let time = TimeGrid::new(1.0, steps).unwrap();
    let m0 = von_mises(&grid);
    let mu = at_rest(&time, &m0);
    let u_t = ScalarField::from_fn(&grid, |x| 0.1 * (2.0 * PI * x[0]).sin());
    let u = solve_backward(model, &mu, &u_t).unwrap();
    let drift: Vec<VectorField> = (0..time.len())
        .map(|j| {
            let c = model.coupling(mu.get(j)).unwrap();
            h_p_field(model, u.gradient(j), &c).scaled(-1.0)
        })
        .collect();
    let m = solve_forward(&MeasurePath::new(time, drift).unwrap(), &m0).unwrap();
    duality_residual(&u, &m, &mu, model).unwrap()
}

#[test]
fn duality_residual_vanishes_for_trivial_hamiltonians() {
    let frozen = theta_scale(
        QuadraticExample::new(0.3, Kernel::exponential(1.0), 2.0).unwrap(),
        0.0,
    )
    .unwrap();
    assert_eq!(coupled_residual(&frozen, 32, 20), 0.0);

    let constant = theta_scale(ConstantHamiltonian(0.8), 1.0).unwrap();
    assert!(coupled_residual(&constant, 64, 50) < 1e-12);
}

#[test]
fn duality_residual_refines() {
    let model = theta_scale(
        QuadraticExample::new(0.3, Kernel::exponential(1.0), 2.0).unwrap(),
        1.0,
    )
    .unwrap();
    let coarse = coupled_residual(&model, 64, 100);
    let fine = coupled_residual(&model, 128, 200);
    assert!(coarse < 1e-2, "{coarse}");
    assert!(coarse / fine >= 1.5, "{coarse} → {fine}");
}
