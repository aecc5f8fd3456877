//! 1D viscous Burgers on the periodic unit interval:
//! `u_t + (u^2/2)_x = nu * u_xx`.
//!
//! Pseudo-spectral solver: the nonlinear flux is formed in physical space
//! and dealiased by the 2/3 rule; diffusion is integrated exactly through
//! an integrating factor; time stepping is classical RK4 on the transformed
//! variable with the step chosen by an advective CFL bound of 0.25. The
//! equation is solved on a grid refined 4x from the caller's resolution and
//! the result subsampled back, so discretization error stays well under
//! model error.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::spectral::{dealias_1d, signed_freq, FftAxis};
use super::{GridSpec, PdeDataset, PdeSample};

/// Refinement factor between the caller's grid and the solver grid.
const REFINE: usize = 4;
/// Advective CFL bound.
const CFL: f64 = 0.25;
/// Hard cap on step count; beyond this the CFL-driven step has underflowed
/// into uselessness.
const MAX_STEPS: usize = 50_000_000;

/// Solves to `t_end` and returns `u(., t_end)` at the input resolution.
/// The step count is CFL-chosen; see [`burgers_solve_with_steps`] to force
/// a specific count (used by refinement checks).
pub fn burgers_solve(u0: &Tensor, nu: f64, t_end: f64) -> Result<Tensor> {
    burgers_solve_with_steps(u0, nu, t_end, None)
}

/// As [`burgers_solve`], but `force_steps` overrides the CFL-derived step
/// count (it must be at least as many steps, i.e. a smaller step).
pub fn burgers_solve_with_steps(
    u0: &Tensor,
    nu: f64,
    t_end: f64,
    force_steps: Option<usize>,
) -> Result<Tensor> {
    if u0.rank() != 1 {
        return Err(Error::Shape(format!(
            "burgers initial condition must be rank 1, got {:?}",
            u0.shape()
        )));
    }
    if nu <= 0.0 || !nu.is_finite() {
        return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
    }
    if t_end < 0.0 || !t_end.is_finite() {
        return Err(Error::Config(format!("t_end must be >= 0, got {t_end}")));
    }
    u0.check_finite("burgers initial condition")?;
    let m = u0.numel();
    if m < 4 {
        return Err(Error::Config(format!("grid too small ({m} points)")));
    }
    if t_end == 0.0 {
        return Ok(u0.clone());
    }

    let n = m * REFINE;
    let mut fft = FftAxis::new(n);

    // Spectrally upsample u0 to the solver grid (exact for resolved modes).
    let mut coarse: Vec<Complex<f64>> = u0.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut coarse_fft = FftAxis::new(m);
    coarse_fft.forward(&mut coarse);
    let mut spec = vec![Complex::default(); n];
    for i in 0..m {
        let f = signed_freq(i, m);
        let dst = if f >= 0 { f as usize } else { (n as i64 + f) as usize };
        spec[dst] = coarse[i] * REFINE as f64;
    }
    if m % 2 == 0 {
        // The coarse Nyquist bin m/2 is its own conjugate partner; split it
        // across +-m/2 on the fine grid to keep the upsampled field real.
        let idx_pos = m / 2;
        let idx_neg = n - m / 2;
        let v = spec[idx_pos];
        spec[idx_pos] = v * 0.5;
        spec[idx_neg] = (v * 0.5).conj();
    }

    // Step size from the advective CFL bound on the initial data.
    let max_u = u0.max_abs().max(1e-12);
    let dx = 1.0 / n as f64;
    let dt_cfl = CFL * dx / max_u;
    let mut steps = (t_end / dt_cfl).ceil().max(16.0) as usize;
    if let Some(forced) = force_steps {
        if forced < steps {
            return Err(Error::Config(format!(
                "forced step count {forced} below CFL requirement {steps}"
            )));
        }
        steps = forced;
    }
    if steps > MAX_STEPS {
        return Err(Error::Numerical(format!(
            "CFL step requires {steps} steps (> {MAX_STEPS}); initial data too steep"
        )));
    }
    let h = t_end / steps as f64;

    // Integrating factors for the diffusion operator L = -nu*k^2.
    let wavenumbers: Vec<f64> = (0..n).map(|i| 2.0 * PI * signed_freq(i, n) as f64).collect();
    let e_half: Vec<f64> = wavenumbers
        .iter()
        .map(|k| (-nu * k * k * h / 2.0).exp())
        .collect();
    let e_full: Vec<f64> = e_half.iter().map(|e| e * e).collect();

    // Nonlinear term N(spec) = -(i*k/2) * fft(dealias(u^2)).
    let nonlinear = |v: &[Complex<f64>], fft: &mut FftAxis| -> Result<Vec<Complex<f64>>> {
        let mut u = v.to_vec();
        fft.inverse(&mut u);
        for x in u.iter_mut() {
            let real = x.re / n as f64;
            *x = Complex::new(real * real, 0.0);
        }
        fft.forward(&mut u);
        dealias_1d(&mut u);
        let out: Vec<Complex<f64>> = u
            .iter()
            .zip(&wavenumbers)
            .map(|(w, &k)| Complex::new(0.0, -0.5 * k) * w)
            .collect();
        Ok(out)
    };

    let energy = |v: &[Complex<f64>]| -> f64 { v.iter().map(|c| c.norm_sqr()).sum() };
    let e0 = energy(&spec);
    let mut prev_energy = e0;
    let slack = 1e-9 * e0 + 1e-300;

    for step in 0..steps {
        // RK4 with exact diffusion propagation (integrating factor):
        // k1 = h*N(v)
        // k2 = h*N(E*(v + k1/2)),   k3 = h*N(E*v + k2/2)
        // k4 = h*N(E2*v + E*k3)
        // v+ = E2*v + (E2*k1 + 2E*(k2 + k3) + k4)/6
        let k1: Vec<Complex<f64>> = nonlinear(&spec, &mut fft)?
            .iter()
            .map(|x| x * h)
            .collect();
        let stage2: Vec<Complex<f64>> = spec
            .iter()
            .zip(&k1)
            .zip(&e_half)
            .map(|((v, k), &e)| (v + k * 0.5) * e)
            .collect();
        let k2: Vec<Complex<f64>> = nonlinear(&stage2, &mut fft)?
            .iter()
            .map(|x| x * h)
            .collect();
        let stage3: Vec<Complex<f64>> = spec
            .iter()
            .zip(&k2)
            .zip(&e_half)
            .map(|((v, k), &e)| v * e + k * 0.5)
            .collect();
        let k3: Vec<Complex<f64>> = nonlinear(&stage3, &mut fft)?
            .iter()
            .map(|x| x * h)
            .collect();
        let stage4: Vec<Complex<f64>> = spec
            .iter()
            .zip(&k3)
            .zip(e_full.iter().zip(&e_half))
            .map(|((v, k), (&e2, &e))| v * e2 + k * e)
            .collect();
        let k4: Vec<Complex<f64>> = nonlinear(&stage4, &mut fft)?
            .iter()
            .map(|x| x * h)
            .collect();

        for i in 0..n {
            let e = e_half[i];
            let e2 = e_full[i];
            spec[i] = spec[i] * e2
                + (k1[i] * e2 + (k2[i] + k3[i]) * (2.0 * e) + k4[i]) / 6.0;
        }

        // Viscous Burgers dissipates energy; a growing spectrum means the
        // step resolution has broken down.
        let e_now = energy(&spec);
        if !e_now.is_finite() {
            return Err(Error::Numerical(format!(
                "burgers solver produced non-finite energy at step {step}"
            )));
        }
        if e_now > prev_energy + slack {
            return Err(Error::Numerical(format!(
                "burgers energy increased at step {step} ({prev_energy} -> {e_now})"
            )));
        }
        prev_energy = e_now;
    }

    // Back to physical space, subsample to the caller's grid.
    fft.inverse(&mut spec);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        out.push(spec[i * REFINE].re / n as f64);
    }
    let t = Tensor::new(vec![m], out)?;
    t.check_finite("burgers solution")?;
    Ok(t)
}

/// Generator configuration, echoed into the dataset sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurgersConfig {
    pub resolution: usize,
    pub count: usize,
    pub seed: u64,
    pub nu: f64,
    pub t_end: f64,
    /// Initial-condition GRF decay exponent.
    pub alpha: f64,
    /// Initial-condition GRF low-frequency damping.
    pub tau: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig {
            resolution: 256,
            count: 32,
            seed: 0,
            nu: 1e-3,
            t_end: 1.0,
            alpha: 2.5,
            tau: 2.0,
        }
    }
}

/// Generates `(u0, u(., t_end))` pairs from GRF initial conditions.
/// Per-sample seeds are `seed + index`, so the dataset is identical no
/// matter how generation is parallelized.
pub fn generate(cfg: &BurgersConfig, threads: usize) -> Result<PdeDataset> {
    let grid = GridSpec::unit(&[cfg.resolution]);
    let samples = super::par_generate(cfg.count, threads, |i| {
        let u0 = super::grf::grf_sample(&[cfg.resolution], cfg.alpha, cfg.tau, cfg.seed + i as u64)?;
        let ut = burgers_solve(&u0, cfg.nu, cfg.t_end)?;
        Ok(PdeSample {
            input: Tensor::new(vec![1, cfg.resolution], u0.into_data())?,
            target: Tensor::new(vec![1, cfg.resolution], ut.into_data())?,
            grid: grid.clone(),
        })
    })?;
    let ds = PdeDataset {
        name: format!("burgers_{}x{}", cfg.count, cfg.resolution),
        samples,
        gen_config: serde_json::to_value(cfg)
            .map_err(|e| Error::Format(format!("config echo: {e}")))?,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stays_zero() {
        let u0 = Tensor::zeros(&[32]);
        let u = burgers_solve(&u0, 1e-3, 1.0).unwrap();
        assert!(u.max_abs() < 1e-14);
    }

    #[test]
    fn sine_decays_and_dissipates_energy() {
        let m = 64;
        let u0 = Tensor::new(
            vec![m],
            (0..m)
                .map(|i| (2.0 * PI * i as f64 / m as f64).sin())
                .collect(),
        )
        .unwrap();
        let u = burgers_solve(&u0, 0.1, 1.0).unwrap();
        let e0: f64 = u0.data().iter().map(|v| v * v).sum();
        let e1: f64 = u.data().iter().map(|v| v * v).sum();
        assert!(e1 < e0, "energy must drop: {e0} -> {e1}");
        assert!(u.max_abs() > 1e-6, "solution should not vanish at t=1, nu=0.1");
    }

    /// Halving the step size changes the solution by < 1e-6 relative L2.
    #[test]
    fn richardson_step_refinement() {
        let m = 64;
        let u0 = Tensor::new(
            vec![m],
            (0..m)
                .map(|i| (2.0 * PI * i as f64 / m as f64).sin())
                .collect(),
        )
        .unwrap();
        let nu = 0.1;
        // Baseline CFL steps for this data: recompute the same way.
        let n = m * REFINE;
        let steps = (1.0 / (CFL * (1.0 / n as f64) / 1.0)).ceil() as usize;
        let coarse = burgers_solve_with_steps(&u0, nu, 1.0, Some(steps)).unwrap();
        let fine = burgers_solve_with_steps(&u0, nu, 1.0, Some(2 * steps)).unwrap();
        let mut diff2 = 0.0;
        let mut norm2 = 0.0;
        for (a, b) in coarse.data().iter().zip(fine.data()) {
            diff2 += (a - b) * (a - b);
            norm2 += b * b;
        }
        let rel = (diff2 / norm2).sqrt();
        assert!(rel < 1e-6, "relative step-refinement error {rel}");
    }

    #[test]
    fn solver_is_deterministic() {
        let u0 = super::super::grf::grf_sample(&[64], 2.0, 1.0, 3).unwrap();
        let a = burgers_solve(&u0, 1e-2, 0.5).unwrap();
        let b = burgers_solve(&u0, 1e-2, 0.5).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn rejects_bad_arguments() {
        let u0 = Tensor::zeros(&[32]);
        assert!(burgers_solve(&u0, 0.0, 1.0).is_err());
        assert!(burgers_solve(&u0, -1.0, 1.0).is_err());
        assert!(burgers_solve(&Tensor::zeros(&[2]), 1e-3, 1.0).is_err());
    }

    #[test]
    fn generate_is_seed_reproducible_across_thread_counts() {
        let cfg = BurgersConfig {
            resolution: 32,
            count: 4,
            seed: 9,
            nu: 1e-2,
            t_end: 0.25,
            ..BurgersConfig::default()
        };
        let a = generate(&cfg, 1).unwrap();
        let b = generate(&cfg, 4).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.input.data(), y.input.data());
            assert_eq!(x.target.data(), y.target.data());
        }
    }
}
