//! 2D incompressible Navier-Stokes in vorticity form on a periodic square.
//!
//! Pseudo-spectral method: the streamfunction comes from a spectral
//! Poisson solve, velocities and vorticity gradients are differentiated
//! in Fourier space, and the advection product is formed on the grid and
//! dealiased with the 2/3 rule. Time stepping is Crank-Nicolson for the
//! diffusion term and Heun (predictor-corrector) for advection and
//! forcing. Steps adapt to a CFL bound and land exactly on every
//! requested record time, so trajectories are deterministic functions of
//! (initial field, viscosity, forcing, record grid).

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::grf::grf_sample;
use super::spectral::{dealias_2d, signed_freq, Fft2};
use super::{par_generate, GridSpec, PdeDataset, PdeSample};

/// Advective CFL factor; kept small so the explicit advection update
/// stays well inside the damping provided by dealiasing and diffusion.
const CFL: f64 = 0.125;
/// Hard ceiling on the step size (accuracy floor when velocities vanish).
const DT_MAX: f64 = 5e-3;
/// Root-mean-square vorticity beyond which the run is declared blown up.
const BLOW_UP: f64 = 1e6;
/// Ten past snapshots condition each temporal-flow prediction.
const NS_WINDOW: usize = 10;

/// Body forcing for the vorticity equation, which also fixes the domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// No forcing, periodic box of the given side length.
    Zero { domain: f64 },
    /// 0.1 (sin(2 pi (x1+x2)) + cos(2 pi (x1+x2))) on the unit square.
    NavierStokes,
    /// Curl of sin(n x2) x1-hat, i.e. -n cos(n x2), on (0, 2 pi)^2.
    Kolmogorov { n: u32 },
}

impl Forcing {
    /// Side length of the periodic box this forcing is defined on.
    pub fn domain(&self) -> f64 {
        match self {
            Forcing::Zero { domain } => *domain,
            Forcing::NavierStokes => 1.0,
            Forcing::Kolmogorov { .. } => 2.0 * std::f64::consts::PI,
        }
    }

    /// Vorticity-space forcing evaluated on an m-by-m grid.
    fn field(&self, m: usize) -> Option<Vec<f64>> {
        let tau = 2.0 * std::f64::consts::PI;
        match self {
            Forcing::Zero { .. } => None,
            Forcing::NavierStokes => {
                let mut f = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        let s = (i + j) as f64 / m as f64;
                        f[i * m + j] = 0.1 * ((tau * s).sin() + (tau * s).cos());
                    }
                }
                Some(f)
            }
            Forcing::Kolmogorov { n } => {
                let n = *n as f64;
                let mut f = vec![0.0; m * m];
                for j in 0..m {
                    // x2 = 2 pi j / m; the curl of sin(n x2) x1-hat.
                    let x2 = tau * j as f64 / m as f64;
                    let v = -n * (n * x2).cos();
                    for i in 0..m {
                        f[i * m + j] = v;
                    }
                }
                Some(f)
            }
        }
    }
}

/// Fixed spectral machinery for one grid size and domain.
struct Sim {
    m: usize,
    fft: Fft2,
    /// First-derivative wavenumbers per index (Nyquist zeroed).
    kd: Vec<f64>,
    /// |k|^2 per cell, from symmetric signed frequencies.
    ksq: Vec<f64>,
    /// Forcing in spectral space (same unnormalized convention as w).
    f_hat: Vec<Complex<f64>>,
    nu: f64,
    dx: f64,
}

impl Sim {
    fn new(m: usize, nu: f64, forcing: &Forcing) -> Self {
        let scale = 2.0 * std::f64::consts::PI / forcing.domain();
        let kd: Vec<f64> = (0..m)
            .map(|i| {
                if m % 2 == 0 && i == m / 2 {
                    0.0
                } else {
                    scale * signed_freq(i, m) as f64
                }
            })
            .collect();
        let ks: Vec<f64> = (0..m).map(|i| scale * signed_freq(i, m) as f64).collect();
        let mut ksq = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                ksq[i * m + j] = ks[i] * ks[i] + ks[j] * ks[j];
            }
        }
        let mut fft = Fft2::new(m);
        let f_hat = match forcing.field(m) {
            None => vec![Complex::new(0.0, 0.0); m * m],
            Some(f) => {
                let mut spec: Vec<Complex<f64>> =
                    f.iter().map(|&v| Complex::new(v, 0.0)).collect();
                fft.forward(&mut spec);
                spec
            }
        };
        Sim { m, fft, kd, ksq, f_hat, nu, dx: forcing.domain() / m as f64 }
    }

    /// Physical field from unnormalized spectral coefficients.
    fn to_physical(&mut self, spec: &[Complex<f64>]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.fft.inverse(&mut buf);
        let norm = 1.0 / (self.m * self.m) as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }

    /// Dealiased advection term -(u . grad w) plus forcing, in spectral
    /// space; also reports max |u| for the CFL bound.
    fn nonlinear(&mut self, w_hat: &[Complex<f64>]) -> (Vec<Complex<f64>>, f64) {
        let m = self.m;
        let n = m * m;
        let norm = 1.0 / n as f64;
        let mut psi = vec![Complex::new(0.0, 0.0); n];
        for p in 0..n {
            if self.ksq[p] > 0.0 {
                psi[p] = w_hat[p] / self.ksq[p];
            }
        }
        // u = (d psi / d x2, -d psi / d x1); grad w straight from w_hat.
        let mut u1 = vec![Complex::new(0.0, 0.0); n];
        let mut u2 = vec![Complex::new(0.0, 0.0); n];
        let mut wx = vec![Complex::new(0.0, 0.0); n];
        let mut wy = vec![Complex::new(0.0, 0.0); n];
        for i in 0..m {
            for j in 0..m {
                let p = i * m + j;
                let ik1 = Complex::new(0.0, self.kd[i]);
                let ik2 = Complex::new(0.0, self.kd[j]);
                u1[p] = ik2 * psi[p];
                u2[p] = -(ik1 * psi[p]);
                wx[p] = ik1 * w_hat[p];
                wy[p] = ik2 * w_hat[p];
            }
        }
        for buf in [&mut u1, &mut u2, &mut wx, &mut wy] {
            self.fft.inverse(buf);
        }
        let mut max_u: f64 = 0.0;
        let mut prod = vec![Complex::new(0.0, 0.0); n];
        for p in 0..n {
            let a = u1[p].re * norm;
            let b = u2[p].re * norm;
            max_u = max_u.max(a.abs()).max(b.abs());
            prod[p] = Complex::new(-(a * wx[p].re + b * wy[p].re) * norm, 0.0);
        }
        self.fft.forward(&mut prod);
        dealias_2d(&mut prod, m);
        for p in 0..n {
            prod[p] += self.f_hat[p];
        }
        (prod, max_u)
    }

    /// One Heun step of length dt from w_hat, given its nonlinear term.
    fn step(&mut self, w_hat: &mut Vec<Complex<f64>>, n1: &[Complex<f64>], dt: f64) {
        let n = self.m * self.m;
        let mut star = vec![Complex::new(0.0, 0.0); n];
        for p in 0..n {
            let a = 0.5 * dt * self.nu * self.ksq[p];
            star[p] = (w_hat[p] * (1.0 - a) + n1[p] * dt) / (1.0 + a);
        }
        let (n2, _) = self.nonlinear(&star);
        for p in 0..n {
            let a = 0.5 * dt * self.nu * self.ksq[p];
            w_hat[p] =
                (w_hat[p] * (1.0 - a) + (n1[p] + n2[p]) * (0.5 * dt)) / (1.0 + a);
        }
    }

    /// Blow-up detector on the spectral state at time t.
    fn check_state(&self, w_hat: &[Complex<f64>], t: f64) -> Result<()> {
        let n = (self.m * self.m) as f64;
        let mut sum_sq = 0.0;
        for c in w_hat {
            sum_sq += c.norm_sqr();
        }
        // Parseval: mean square of w = sum |w_hat|^2 / n^2.
        let rms = (sum_sq / (n * n)).sqrt();
        if !rms.is_finite() || rms > BLOW_UP {
            return Err(Error::Numerical(format!(
                "vorticity blow-up at t = {t:.6}: rms |w| = {rms:e}"
            )));
        }
        Ok(())
    }
}

/// Integrates the vorticity equation and records w at the given times.
///
/// Returns an (m, m, |t_grid|) tensor with time as the last axis. The
/// forcing tag fixes the domain: the temporal-flow forcing lives on the
/// unit square, Kolmogorov forcing on (0, 2 pi)^2.
pub fn navier_stokes_solve(
    w0: &Tensor,
    nu: f64,
    forcing: &Forcing,
    t_grid: &[f64],
) -> Result<Tensor> {
    let shape = w0.shape();
    if w0.rank() != 2 || shape[0] != shape[1] {
        return Err(Error::Shape(format!(
            "vorticity field must be square rank-2, got {shape:?}"
        )));
    }
    let m = shape[0];
    if m < 4 {
        return Err(Error::Config(format!(
            "vorticity grid needs at least 4 points per side, got {m}"
        )));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
    }
    if !(forcing.domain().is_finite() && forcing.domain() > 0.0) {
        return Err(Error::Config(format!(
            "domain length must be positive, got {}",
            forcing.domain()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Config("record grid must be non-empty".into()));
    }
    for pair in t_grid.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::Config(format!(
                "record times must increase strictly, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if !(t_grid[0].is_finite() && t_grid[0] >= 0.0)
        || !t_grid[t_grid.len() - 1].is_finite()
    {
        return Err(Error::Config("record times must be finite and >= 0".into()));
    }
    w0.check_finite("initial vorticity")?;

    let mut sim = Sim::new(m, nu, forcing);
    let n = m * m;
    let steps_out = t_grid.len();
    let mut w_hat: Vec<Complex<f64>> =
        w0.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    sim.fft.forward(&mut w_hat);
    sim.check_state(&w_hat, 0.0)?;

    let mut out = vec![0.0; n * steps_out];
    let mut t = 0.0;
    for (rec, &t_next) in t_grid.iter().enumerate() {
        while t < t_next {
            let (n1, max_u) = sim.nonlinear(&w_hat);
            let dt_cfl = CFL * sim.dx / max_u.max(1e-12);
            let mut dt = DT_MAX.min(dt_cfl);
            if dt <= 1e-12 {
                return Err(Error::Numerical(format!(
                    "step size underflow at t = {t:.6} (max |u| = {max_u:e})"
                )));
            }
            let remaining = t_next - t;
            if dt >= remaining {
                dt = remaining;
                t = t_next;
            } else {
                t += dt;
            }
            sim.step(&mut w_hat, &n1, dt);
            sim.check_state(&w_hat, t)?;
        }
        let w = sim.to_physical(&w_hat);
        for (p, &v) in w.iter().enumerate() {
            if !v.is_finite() || v.abs() > BLOW_UP {
                return Err(Error::Numerical(format!(
                    "vorticity blow-up at t = {t_next:.6}: |w| = {v:e}"
                )));
            }
            out[p * steps_out + rec] = v;
        }
    }
    Tensor::new(vec![m, m, steps_out], out)
}

/// Keeps every `factor`-th grid point of both spatial axes of an
/// (m, m, T) trajectory.
fn stride_trajectory(traj: &Tensor, factor: usize) -> Tensor {
    let mf = traj.shape()[0];
    let steps = traj.shape()[2];
    let m = mf / factor;
    let mut out = vec![0.0; m * m * steps];
    for i in 0..m {
        for j in 0..m {
            for t in 0..steps {
                out[(i * m + j) * steps + t] =
                    traj.data()[((i * factor) * mf + j * factor) * steps + t];
            }
        }
    }
    Tensor::new(vec![m, m, steps], out).expect("sized above")
}

/// Generator configuration for the temporal Navier-Stokes dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsConfig {
    /// Output grid size per side.
    pub resolution: usize,
    /// Number of trajectories (= samples).
    pub count: usize,
    /// Base seed; trajectory i uses seed + i.
    pub seed: u64,
    /// Viscosity.
    pub nu: f64,
    /// Number of predicted snapshots per sample.
    pub t_out: usize,
    /// Spacing of recorded snapshots in time units.
    pub dt: f64,
    /// The solver runs at resolution * sim_factor and subsamples.
    pub sim_factor: usize,
    /// Spectral decay exponent of the initial vorticity field.
    pub alpha: f64,
    /// Spectral scale of the initial vorticity field.
    pub tau: f64,
}

impl Default for NsConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            count: 8,
            seed: 0,
            nu: 1e-3,
            t_out: 10,
            dt: 1.0,
            sim_factor: 4,
            alpha: 2.5,
            tau: 1.1,
        }
    }
}

fn validate_common(
    resolution: usize,
    count: usize,
    nu: f64,
    dt: f64,
    sim_factor: usize,
) -> Result<()> {
    if resolution < 4 {
        return Err(Error::Config(format!(
            "resolution must be at least 4, got {resolution}"
        )));
    }
    if count == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("record spacing must be positive, got {dt}")));
    }
    if sim_factor == 0 {
        return Err(Error::Config("sim_factor must be at least 1".into()));
    }
    Ok(())
}

/// Generates temporal-flow samples: ten conditioning snapshots mapped to
/// the following `t_out` snapshots, packed as space-time fields.
///
/// Input shape (10, m, m, t_out): conditioning snapshot c is broadcast
/// along the output time axis of channel c. Target shape (1, m, m, t_out).
pub fn generate_ns(cfg: &NsConfig, threads: usize) -> Result<PdeDataset> {
    validate_common(cfg.resolution, cfg.count, cfg.nu, cfg.dt, cfg.sim_factor)?;
    if cfg.t_out == 0 {
        return Err(Error::Config("t_out must be at least 1".into()));
    }
    let cfg_owned = cfg.clone();
    let samples = par_generate(cfg.count, threads, move |i| {
        let cfg = &cfg_owned;
        let m = cfg.resolution;
        let ms = m * cfg.sim_factor;
        let records = NS_WINDOW + cfg.t_out;
        let t_grid: Vec<f64> = (1..=records).map(|j| cfg.dt * j as f64).collect();
        let w0 = grf_sample(&[ms, ms], cfg.alpha, cfg.tau, cfg.seed + i as u64)?;
        let traj = navier_stokes_solve(&w0, cfg.nu, &Forcing::NavierStokes, &t_grid)?;
        let traj = stride_trajectory(&traj, cfg.sim_factor);
        let td = traj.data();
        let mut input = vec![0.0; NS_WINDOW * m * m * cfg.t_out];
        let mut target = vec![0.0; m * m * cfg.t_out];
        for p in 0..m * m {
            for c in 0..NS_WINDOW {
                let v = td[p * records + c];
                for t in 0..cfg.t_out {
                    input[(c * m * m + p) * cfg.t_out + t] = v;
                }
            }
            for t in 0..cfg.t_out {
                target[p * cfg.t_out + t] = td[p * records + NS_WINDOW + t];
            }
        }
        Ok(PdeSample {
            input: Tensor::new(vec![NS_WINDOW, m, m, cfg.t_out], input)?,
            target: Tensor::new(vec![1, m, m, cfg.t_out], target)?,
            grid: GridSpec {
                extents: vec![m, m, cfg.t_out],
                domain: vec![1.0, 1.0, cfg.dt * cfg.t_out as f64],
            },
        })
    })?;
    let dataset = PdeDataset {
        name: format!("ns_{}x{}", cfg.count, cfg.resolution),
        samples,
        gen_config: serde_json::json!({
            "family": "navier_stokes",
            "resolution": cfg.resolution,
            "count": cfg.count,
            "seed": cfg.seed,
            "nu": cfg.nu,
            "t_out": cfg.t_out,
            "dt": cfg.dt,
            "sim_factor": cfg.sim_factor,
            "alpha": cfg.alpha,
            "tau": cfg.tau,
            "window": NS_WINDOW,
        }),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Generator configuration for the Kolmogorov-flow evolution dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KolmogorovConfig {
    /// Output grid size per side.
    pub resolution: usize,
    /// Total number of (w(t), w(t + dt)) pairs.
    pub count: usize,
    /// Base seed; trajectory i uses seed + i.
    pub seed: u64,
    /// Viscosity.
    pub nu: f64,
    /// Forcing wavenumber n in sin(n x2).
    pub forcing_n: u32,
    /// Pair spacing in time units.
    pub dt: f64,
    /// Discarded transient before the first recorded snapshot.
    pub burn_in: f64,
    /// Consecutive pairs taken from each trajectory.
    pub pairs_per_traj: usize,
    /// The solver runs at resolution * sim_factor and subsamples.
    pub sim_factor: usize,
    /// Spectral decay exponent of the initial vorticity field.
    pub alpha: f64,
    /// Spectral scale of the initial vorticity field.
    pub tau: f64,
}

impl Default for KolmogorovConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            count: 8,
            seed: 0,
            nu: 2.5e-2,
            forcing_n: 4,
            dt: 0.5,
            burn_in: 5.0,
            pairs_per_traj: 8,
            sim_factor: 4,
            alpha: 2.5,
            tau: 1.0,
        }
    }
}

/// Generates Kolmogorov-flow evolution pairs w(t) -> w(t + dt).
///
/// Each trajectory is burned in, then `pairs_per_traj` consecutive pairs
/// are cut from equally spaced snapshots; enough trajectories run to
/// reach `count` pairs in total.
pub fn generate_kolmogorov(cfg: &KolmogorovConfig, threads: usize) -> Result<PdeDataset> {
    validate_common(cfg.resolution, cfg.count, cfg.nu, cfg.dt, cfg.sim_factor)?;
    if cfg.pairs_per_traj == 0 {
        return Err(Error::Config("pairs_per_traj must be at least 1".into()));
    }
    if cfg.forcing_n == 0 {
        return Err(Error::Config("forcing wavenumber must be at least 1".into()));
    }
    if !(cfg.burn_in.is_finite() && cfg.burn_in >= 0.0) {
        return Err(Error::Config(format!(
            "burn-in must be finite and >= 0, got {}",
            cfg.burn_in
        )));
    }
    let n_traj = cfg.count.div_ceil(cfg.pairs_per_traj);
    let cfg_owned = cfg.clone();
    let per_traj = par_generate(n_traj, threads, move |i| {
        let cfg = &cfg_owned;
        let m = cfg.resolution;
        let ms = m * cfg.sim_factor;
        // pairs_per_traj + 1 snapshots yield pairs_per_traj pairs.
        let t_grid: Vec<f64> = (0..=cfg.pairs_per_traj)
            .map(|j| cfg.burn_in + cfg.dt * j as f64)
            .collect();
        let w0 = grf_sample(&[ms, ms], cfg.alpha, cfg.tau, cfg.seed + i as u64)?;
        let traj = navier_stokes_solve(
            &w0,
            cfg.nu,
            &Forcing::Kolmogorov { n: cfg.forcing_n },
            &t_grid,
        )?;
        let traj = stride_trajectory(&traj, cfg.sim_factor);
        let td = traj.data();
        let records = cfg.pairs_per_traj + 1;
        let snapshot = |r: usize| -> Vec<f64> {
            (0..m * m).map(|p| td[p * records + r]).collect()
        };
        let mut pairs = Vec::with_capacity(cfg.pairs_per_traj);
        for r in 0..cfg.pairs_per_traj {
            pairs.push(PdeSample {
                input: Tensor::new(vec![1, m, m], snapshot(r))?,
                target: Tensor::new(vec![1, m, m], snapshot(r + 1))?,
                grid: GridSpec {
                    extents: vec![m, m],
                    domain: vec![2.0 * std::f64::consts::PI; 2],
                },
            });
        }
        Ok(pairs)
    })?;
    let samples: Vec<PdeSample> =
        per_traj.into_iter().flatten().take(cfg.count).collect();
    let dataset = PdeDataset {
        name: format!("kolmogorov_{}x{}", cfg.count, cfg.resolution),
        samples,
        gen_config: serde_json::json!({
            "family": "kolmogorov",
            "resolution": cfg.resolution,
            "count": cfg.count,
            "seed": cfg.seed,
            "nu": cfg.nu,
            "forcing_n": cfg.forcing_n,
            "dt": cfg.dt,
            "burn_in": cfg.burn_in,
            "pairs_per_traj": cfg.pairs_per_traj,
            "sim_factor": cfg.sim_factor,
            "alpha": cfg.alpha,
            "tau": cfg.tau,
        }),
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_stays_zero() {
        let w0 = Tensor::zeros(&[16, 16]);
        let traj =
            navier_stokes_solve(&w0, 1e-2, &Forcing::Zero { domain: 1.0 }, &[0.1, 0.2])
                .unwrap();
        assert!(traj.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unforced_enstrophy_is_non_increasing() {
        let w0 = grf_sample(&[32, 32], 2.5, 1.1, 11).unwrap();
        let t_grid: Vec<f64> = (1..=10).map(|j| 0.05 * j as f64).collect();
        let traj =
            navier_stokes_solve(&w0, 1e-2, &Forcing::Zero { domain: 1.0 }, &t_grid)
                .unwrap();
        let steps = t_grid.len();
        let enstrophy = |rec: usize| -> f64 {
            (0..32 * 32)
                .map(|p| traj.data()[p * steps + rec].powi(2))
                .sum::<f64>()
        };
        let mut prev = w0.data().iter().map(|v| v * v).sum::<f64>();
        for rec in 0..steps {
            let e = enstrophy(rec);
            assert!(
                e <= prev * (1.0 + 1e-12),
                "enstrophy grew at record {rec}: {prev} -> {e}"
            );
            prev = e;
        }
    }

    #[test]
    fn single_harmonic_decays_at_the_exact_rate() {
        // w = sin(x2) on (0, 2 pi)^2 is an exact single-mode solution:
        // advection vanishes identically and the mode decays as
        // exp(-nu t). Validates diffusion, Poisson solve, and recording.
        let m = 32;
        let tau = 2.0 * std::f64::consts::PI;
        let mut w0 = Tensor::zeros(&[m, m]);
        for i in 0..m {
            for j in 0..m {
                w0.set(&[i, j], (tau * j as f64 / m as f64).sin());
            }
        }
        let nu = 0.1;
        let t_grid = [0.5, 1.0];
        let traj =
            navier_stokes_solve(&w0, nu, &Forcing::Zero { domain: tau }, &t_grid)
                .unwrap();
        for (rec, &t) in t_grid.iter().enumerate() {
            let decay = (-nu * t).exp();
            let mut num = 0.0;
            let mut den = 0.0;
            for p in 0..m * m {
                let expect = w0.data()[p] * decay;
                num += (traj.data()[p * 2 + rec] - expect).powi(2);
                den += expect * expect;
            }
            let rel = (num / den).sqrt();
            assert!(rel < 1e-6, "record {rec}: relative error {rel:e}");
        }
    }

    #[test]
    fn forcing_drives_flow_from_rest() {
        let w0 = Tensor::zeros(&[16, 16]);
        let traj =
            navier_stokes_solve(&w0, 1e-3, &Forcing::NavierStokes, &[1.0]).unwrap();
        assert!(traj.max_abs() > 1e-3);
    }

    #[test]
    fn blow_up_is_detected() {
        let w0 = Tensor::full(&[16, 16], 1e8);
        let err = navier_stokes_solve(&w0, 1e-3, &Forcing::Zero { domain: 1.0 }, &[0.1])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_bad_arguments() {
        let w0 = Tensor::zeros(&[16, 16]);
        let err = navier_stokes_solve(&w0, 0.0, &Forcing::NavierStokes, &[1.0]);
        assert_eq!(err.unwrap_err().exit_code(), 1);
        let err = navier_stokes_solve(&w0, 1e-3, &Forcing::NavierStokes, &[1.0, 0.5]);
        assert_eq!(err.unwrap_err().exit_code(), 1);
    }

    #[test]
    fn temporal_dataset_packs_the_window() {
        let cfg = NsConfig {
            resolution: 8,
            count: 2,
            t_out: 3,
            dt: 0.2,
            sim_factor: 2,
            ..Default::default()
        };
        let ds = generate_ns(&cfg, 2).unwrap();
        assert_eq!(ds.len(), 2);
        let s = &ds.samples[0];
        assert_eq!(s.input.shape(), &[10, 8, 8, 3]);
        assert_eq!(s.target.shape(), &[1, 8, 8, 3]);
        // Conditioning channels are constant along the output time axis.
        for c in 0..10 {
            for i in 0..8 {
                for j in 0..8 {
                    let v = s.input.get(&[c, i, j, 0]);
                    assert_eq!(v, s.input.get(&[c, i, j, 1]));
                    assert_eq!(v, s.input.get(&[c, i, j, 2]));
                }
            }
        }
        let again = generate_ns(&cfg, 1).unwrap();
        assert_eq!(s.input.data(), again.samples[0].input.data());
        assert_eq!(s.target.data(), again.samples[0].target.data());
    }

    #[test]
    fn kolmogorov_pairs_chain_within_a_trajectory() {
        let cfg = KolmogorovConfig {
            resolution: 8,
            count: 3,
            pairs_per_traj: 2,
            burn_in: 0.4,
            dt: 0.2,
            sim_factor: 2,
            nu: 2.5e-2,
            forcing_n: 2,
            ..Default::default()
        };
        let ds = generate_kolmogorov(&cfg, 2).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.samples[0].input.shape(), &[1, 8, 8]);
        // Within one trajectory, consecutive pairs share a snapshot.
        assert_eq!(ds.samples[0].target.data(), ds.samples[1].input.data());
        // Pair 2 starts the second trajectory; burn-in should have moved
        // it away from the first trajectory's snapshots.
        assert_ne!(ds.samples[2].input.data(), ds.samples[0].input.data());
    }
}
