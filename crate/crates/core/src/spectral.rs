//! Fourier multiplier operators on the periodic grid.
//!
//! Convention: f(x) = Σ_k f̂(k) e^{2πik·x} with f̂(k) = n^{-d} Σ_j f(x_j) e^{-2πik·x_j},
//! so (-Δ)^s has symbol (2π|k|)^{2s}. Symbols that depend on |k| treat the
//! Nyquist bin as |k| = n/2; odd symbols (derivatives) vanish there so real
//! input stays real.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, SpectralGrid, VectorField};
use crate::math;

fn transform(grid: &SpectralGrid, data: &mut [Complex64], inverse: bool) {
    let plan = grid.plan();
    let n = grid.points_per_axis();
    let run = |chunk: &mut [Complex64]| {
        if inverse {
            plan.inverse(chunk)
        } else {
            plan.forward(chunk)
        }
    };
    if grid.dim() == 1 {
        run(data);
        return;
    }
    for row in data.chunks_mut(n) {
        run(row);
    }
    let mut column = alloc::vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            column[r] = data[r * n + c];
        }
        run(&mut column);
        for r in 0..n {
            data[r * n + c] = column[r];
        }
    }
}

/// Normalized Fourier coefficients f̂(k), laid out like the nodes.
pub fn spectrum(f: &ScalarField) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(f.grid(), &mut data, false);
    let scale = f.grid().cell_volume();
    for z in data.iter_mut() {
        *z *= scale;
    }
    data
}

/// Real part of Σ_k c(k) e^{2πik·x} at the nodes.
pub fn synthesize(grid: &SpectralGrid, coefficients: &[Complex64]) -> Result<ScalarField> {
    if coefficients.len() != grid.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} coefficients for {} nodes",
            coefficients.len(),
            grid.len()
        )));
    }
    let mut data = coefficients.to_vec();
    transform(grid, &mut data, true);
    let scale = grid.len() as f64;
    ScalarField::new(grid, data.iter().map(|z| z.re * scale).collect())
}

fn check_finite(f: &ScalarField) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidField("non-finite input".into()))
    }
}

/// Applies a real symbol given as a function of the spectral bin index.
pub fn apply_multiplier(f: &ScalarField, symbol: impl Fn(usize) -> f64) -> Result<ScalarField> {
    check_finite(f)?;
    let grid = f.grid();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, false);
    for (bin, z) in data.iter_mut().enumerate() {
        *z *= symbol(bin);
    }
    transform(grid, &mut data, true);
    ScalarField::new(grid, data.iter().map(|z| z.re).collect())
}

/// (2π|k|)^{2s}.
pub fn frac_symbol(grid: &SpectralGrid, bin: usize, s: f64) -> f64 {
    let k = grid.wavevector_norm(bin);
    if k == 0.0 {
        0.0
    } else {
        math::powf(2.0 * PI * k, 2.0 * s)
    }
}

/// (-Δ)^s f for s ∈ (0, 1].
pub fn frac_laplacian(f: &ScalarField, s: f64) -> Result<ScalarField> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain("s", s, "(0, 1]"));
    }
    let grid = f.grid();
    apply_multiplier(f, |bin| frac_symbol(grid, bin, s))
}

/// e^{-(2π|k|)^{2s} t}, the symbol of the fractional heat semigroup.
pub fn semigroup_symbol(grid: &SpectralGrid, bin: usize, t: f64) -> f64 {
    math::exp(-frac_symbol(grid, bin, grid.order()) * t)
}

/// T(t)f = e^{-t(-Δ)^s} f with s the grid's order.
pub fn semigroup_apply(f: &ScalarField, t: f64) -> Result<ScalarField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain("t", t, "[0, ∞)"));
    }
    if t == 0.0 {
        check_finite(f)?;
        return Ok(f.clone());
    }
    let grid = f.grid();
    apply_multiplier(f, |bin| semigroup_symbol(grid, bin, t))
}

/// Spectral gradient; the Nyquist bin of each axis is dropped.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    check_finite(f)?;
    let grid = f.grid();
    let d = grid.dim();
    let mut hat: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut hat, false);
    let mut components = Vec::with_capacity(d);
    for axis in 0..d {
        let mut data = hat.clone();
        for (bin, z) in data.iter_mut().enumerate() {
            *z *= derivative_symbol(grid, bin, axis);
        }
        transform(grid, &mut data, true);
        components.push(data.iter().map(|z| z.re).collect());
    }
    VectorField::from_components(grid, &components)
}

fn derivative_symbol(grid: &SpectralGrid, bin: usize, axis: usize) -> Complex64 {
    let j = grid.axis_indices(bin)[axis];
    if grid.is_nyquist(j) {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, 2.0 * PI * grid.wavenumber(j) as f64)
    }
}

/// Spectral divergence Σ_i ∂_i v_i.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    if !v.is_finite() {
        return Err(Error::InvalidField("non-finite input".into()));
    }
    let grid = v.grid();
    let mut total = alloc::vec![Complex64::new(0.0, 0.0); grid.len()];
    for axis in 0..grid.dim() {
        let mut data: Vec<Complex64> = v
            .component(axis)
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect();
        transform(grid, &mut data, false);
        for (bin, (acc, z)) in total.iter_mut().zip(&data).enumerate() {
            *acc += z * derivative_symbol(grid, bin, axis);
        }
    }
    transform(grid, &mut total, true);
    ScalarField::new(grid, total.iter().map(|z| z.re).collect())
}

fn bessel_weight(grid: &SpectralGrid, bin: usize) -> f64 {
    let k = grid.wavevector_norm(bin);
    1.0 + 4.0 * PI * PI * k * k
}

/// ‖f‖_{H^μ_2} = (Σ_k (1+4π²|k|²)^μ |f̂(k)|²)^{1/2}.
pub fn bessel_norm(f: &ScalarField, order: f64) -> Result<f64> {
    check_finite(f)?;
    let grid = f.grid();
    let hat = spectrum(f);
    let sum: f64 = hat
        .iter()
        .enumerate()
        .map(|(bin, z)| math::powf(bessel_weight(grid, bin), order) * z.norm_sqr())
        .sum();
    Ok(math::sqrt(sum))
}

/// (I - Δ)^{μ/2} f.
pub fn bessel_potential(f: &ScalarField, order: f64) -> Result<ScalarField> {
    let grid = f.grid();
    apply_multiplier(f, |bin| math::powf(bessel_weight(grid, bin), order / 2.0))
}

/// Discrete Hölder seminorm: max of |f(x) - f(y)| / dist(x, y)^β over node
/// pairs whose offset is at most n/4 nodes along every axis.
pub fn holder_seminorm(f: &ScalarField, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain("holder_beta", beta, "(0, 1]"));
    }
    check_finite(f)?;
    let grid = f.grid();
    let h = grid.spacing();
    let window = (grid.points_per_axis() / 4) as isize;
    let values = f.values();
    let mut offsets = Vec::new();
    if grid.dim() == 1 {
        for o in 1..=window {
            offsets.push(([o, 0], o as f64 * h));
        }
    } else {
        // half-plane of offsets; the other half gives the same pairs
        for o0 in 0..=window {
            for o1 in -window..=window {
                if o0 == 0 && o1 <= 0 {
                    continue;
                }
                let dist = h * math::sqrt((o0 * o0 + o1 * o1) as f64);
                offsets.push(([o0, o1], dist));
            }
        }
    }
    let mut best: f64 = 0.0;
    for (offset, dist) in offsets {
        let denom = math::powf(dist, beta);
        for node in 0..grid.len() {
            let other = grid.shifted(node, offset);
            best = best.max((values[node] - values[other]).abs() / denom);
        }
    }
    Ok(best)
}

/// Largest |f̂(k)| with some |k_i| > n/4, relative to the largest coefficient.
/// Small values mean pointwise nonlinearities are not aliasing.
pub fn spectral_tail(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let hat = spectrum(f);
    let quarter = (grid.points_per_axis() / 4) as i64;
    let mut peak: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for (bin, z) in hat.iter().enumerate() {
        let k = grid.wavevector(bin);
        let a = math::sqrt(z.norm_sqr());
        peak = peak.max(a);
        if k[0].abs() > quarter || k[1].abs() > quarter {
            tail = tail.max(a);
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        tail / peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> SpectralGrid {
        SpectralGrid::new(1, n, 0.75).unwrap()
    }

    #[test]
    fn cosine_mode_scaled_by_symbol() {
        let g = grid1(64);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
        let out = frac_laplacian(&f, 0.75).unwrap();
        let c = (2.0 * PI).powf(1.5);
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - c * v).abs() < 1e-12 * c);
        }
    }

    #[test]
    fn constants_in_kernel() {
        let g = grid1(32);
        let out = frac_laplacian(&ScalarField::constant(&g, 7.0), 0.75).unwrap();
        assert!(out.sup_norm() < 1e-13);
    }

    #[test]
    fn two_modes_at_half_order() {
        // (2π·1)^1 cos 2πx + (2π·2)^1 cos 4πx
        let g = grid1(64);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos() + (4.0 * PI * x[0]).cos());
        let out = frac_laplacian(&f, 0.5).unwrap();
        for (node, o) in out.values().iter().enumerate() {
            let x = g.position(node)[0];
            let expect = 2.0 * PI * (2.0 * PI * x).cos() + 4.0 * PI * (4.0 * PI * x).cos();
            assert!((o - expect).abs() < 1e-12 * 4.0 * PI);
        }
    }

    #[test]
    fn rejects_bad_order_and_time() {
        let g = grid1(16);
        let f = ScalarField::zeros(&g);
        assert!(frac_laplacian(&f, 0.0).is_err());
        assert!(frac_laplacian(&f, 1.2).is_err());
        assert!(matches!(
            semigroup_apply(&f, -1.0),
            Err(Error::Domain { name: "t", .. })
        ));
    }

    #[test]
    fn semigroup_single_mode_decay() {
        let g = grid1(64);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
        let out = semigroup_apply(&f, 0.1).unwrap();
        let factor = (-(2.0 * PI).powf(1.5) * 0.1).exp();
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - factor * v).abs() < 1e-14);
        }
        assert_eq!(semigroup_apply(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn gradient_of_sine() {
        let g = grid1(32);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let df = gradient(&f).unwrap();
        for node in 0..g.len() {
            let x = g.position(node)[0];
            assert!((df.at(node)[0] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_in_two_dimensions() {
        // ∂x[sin 2πx cos 2πy] = 2π cos 2πx cos 2πy, ∂y = -2π sin 2πx sin 2πy
        let g = SpectralGrid::new(2, 16, 0.75).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let df = gradient(&f).unwrap();
        for node in 0..g.len() {
            let [x, y] = g.position(node);
            let gx = 2.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).cos();
            let gy = -2.0 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
            assert!((df.at(node)[0] - gx).abs() < 1e-12);
            assert!((df.at(node)[1] - gy).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_constant_vanishes() {
        let g = SpectralGrid::new(2, 16, 0.75).unwrap();
        let v = VectorField::constant(&g, &[1.5, -2.0]);
        assert!(divergence(&v).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn divergence_of_gradient_is_minus_laplacian() {
        let g = grid1(32);
        let f = ScalarField::from_fn(&g, |x| {
            (2.0 * PI * x[0]).sin() + 0.3 * (6.0 * PI * x[0]).cos()
        });
        let lap = divergence(&gradient(&f).unwrap()).unwrap();
        let minus = apply_multiplier(&f, |bin| -frac_symbol(&g, bin, 1.0)).unwrap();
        assert!(lap.sup_distance(&minus).unwrap() < 1e-10);
        assert!(lap.integral().abs() < 1e-13);
    }

    #[test]
    fn bessel_norm_cases() {
        let g = grid1(64);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
        let l2 = f.l2_norm();
        assert!((bessel_norm(&f, 0.0).unwrap() - l2).abs() < 1e-14);
        let expect = (1.0 + 4.0 * PI * PI).sqrt() * l2;
        assert!((bessel_norm(&f, 1.0).unwrap() - expect).abs() < 1e-12 * expect);
        let h = ScalarField::from_fn(&g, |x| (x[0] * 9.0).sin() + x[0] * x[0]);
        let back = bessel_norm(&bessel_potential(&h, -1.0).unwrap(), 1.0).unwrap();
        assert!((back - h.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn holder_constant_and_domain() {
        let g = grid1(32);
        assert_eq!(
            holder_seminorm(&ScalarField::constant(&g, 2.0), 0.5).unwrap(),
            0.0
        );
        assert!(holder_seminorm(&ScalarField::zeros(&g), 0.0).is_err());
        assert!(holder_seminorm(&ScalarField::zeros(&g), 1.5).is_err());
    }

    /// Pairwise maximum over all node pairs within the window, written
    /// independently of the offset loop above.
    fn holder_brute(f: &ScalarField, beta: f64) -> f64 {
        let g = f.grid();
        let n = g.points_per_axis();
        let v = f.values();
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let raw = (i as isize - j as isize).unsigned_abs();
                let off = raw.min(n - raw);
                if off == 0 || off > n / 4 {
                    continue;
                }
                let dist = off as f64 / n as f64;
                best = best.max((v[i] - v[j]).abs() / dist.powf(beta));
            }
        }
        best
    }

    #[test]
    fn holder_of_sine_matches_brute_force() {
        let g = grid1(32);
        let h = g.spacing();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let lip = holder_seminorm(&f, 1.0).unwrap();
        assert!((lip - holder_brute(&f, 1.0)).abs() < 1e-14);
        assert!(lip <= 2.0 * PI + 1e-12);
        let half = holder_seminorm(&f, 0.5).unwrap();
        assert!((half - holder_brute(&f, 0.5)).abs() < 1e-14);
        assert!(half >= (2.0 * PI * h).sin() / h.sqrt());
    }

    #[test]
    fn tail_small_for_smooth_field() {
        let g = grid1(64);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos().exp());
        assert!(spectral_tail(&f) < 1e-10);
    }
}
