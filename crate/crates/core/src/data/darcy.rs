//! Steady Darcy flow in the unit square with zero Dirichlet walls.
//!
//! -div(a grad u) = 1 is discretized on an m-by-m cell-centered grid with
//! the 5-point finite-volume stencil; face coefficients are harmonic means
//! of the adjacent cell coefficients, so discontinuous two-phase media are
//! handled without smearing fluxes. The SPD system is solved matrix-free
//! by conjugate gradient. Coefficient fields are thresholded Gaussian
//! random fields (two-phase: 12 above the median, 3 below).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::grf::grf_sample;
use super::{par_generate, GridSpec, PdeDataset, PdeSample};

/// Internal refinement factor: targets are solved on a 4x finer grid
/// (piecewise-constant coefficient injection) and cell-averaged back.
const REFINE: usize = 4;
/// CG convergence: relative residual below this is converged.
const CG_TOL: f64 = 1e-10;

/// 5-point finite-volume system for -div(a grad u) = 1, zero walls.
///
/// Cell centers sit at ((i+1/2)/m, (j+1/2)/m); wall faces use the
/// half-cell distance, so the Dirichlet condition enters as a 2*a term on
/// the diagonal.
struct FvSystem {
    m: usize,
    /// Transmissibility to the {west, east, south, north} neighbor; zero
    /// on wall faces (their contribution lives in `diag`).
    west: Vec<f64>,
    east: Vec<f64>,
    south: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
}

impl FvSystem {
    fn new(a: &Tensor) -> Result<Self> {
        let shape = a.shape();
        if a.rank() != 2 || shape[0] != shape[1] {
            return Err(Error::Shape(format!(
                "coefficient field must be square rank-2, got {shape:?}"
            )));
        }
        let m = shape[0];
        if m < 3 {
            return Err(Error::Config(format!(
                "coefficient grid needs at least 3 cells per side, got {m}"
            )));
        }
        let av = a.data();
        for (p, &v) in av.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "coefficient must be positive and finite, got {v} at cell {p}"
                )));
            }
        }
        let n = m * m;
        let harmonic = |p: f64, q: f64| 2.0 * p * q / (p + q);
        let mut sys = FvSystem {
            m,
            west: vec![0.0; n],
            east: vec![0.0; n],
            south: vec![0.0; n],
            north: vec![0.0; n],
            diag: vec![0.0; n],
        };
        for i in 0..m {
            for j in 0..m {
                let p = i * m + j;
                let ap = av[p];
                let mut diag = 0.0;
                // Axis 0 neighbors (i +- 1), axis 1 neighbors (j +- 1);
                // wall faces are half a cell away, hence the factor 2.
                if i > 0 {
                    sys.south[p] = harmonic(ap, av[p - m]);
                    diag += sys.south[p];
                } else {
                    diag += 2.0 * ap;
                }
                if i + 1 < m {
                    sys.north[p] = harmonic(ap, av[p + m]);
                    diag += sys.north[p];
                } else {
                    diag += 2.0 * ap;
                }
                if j > 0 {
                    sys.west[p] = harmonic(ap, av[p - 1]);
                    diag += sys.west[p];
                } else {
                    diag += 2.0 * ap;
                }
                if j + 1 < m {
                    sys.east[p] = harmonic(ap, av[p + 1]);
                    diag += sys.east[p];
                } else {
                    diag += 2.0 * ap;
                }
                sys.diag[p] = diag;
            }
        }
        Ok(sys)
    }

    /// y = A x for the stencil matrix (transmissibility units).
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let p = i * m + j;
                let mut acc = self.diag[p] * x[p];
                if i > 0 {
                    acc -= self.south[p] * x[p - m];
                }
                if i + 1 < m {
                    acc -= self.north[p] * x[p + m];
                }
                if j > 0 {
                    acc -= self.west[p] * x[p - 1];
                }
                if j + 1 < m {
                    acc -= self.east[p] * x[p + 1];
                }
                y[p] = acc;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves -div(a grad u) = 1 on the unit square, u = 0 on the walls.
///
/// `a` is an m-by-m cell-centered positive coefficient field; the result
/// is the m-by-m pressure field on the same cells. Conjugate gradient
/// runs until the residual drops below 1e-10 relative to the load, and
/// fails with a numerical error after 10*m^2 iterations.
pub fn darcy_solve(a: &Tensor) -> Result<Tensor> {
    let sys = FvSystem::new(a)?;
    let m = sys.m;
    let n = m * m;
    // Load: f = 1 integrated over a cell of area (1/m)^2.
    let cell = 1.0 / (m as f64);
    let b = vec![cell * cell; n];
    let b_norm = dot(&b, &b).sqrt();

    let mut u = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let max_iters = 10 * n;
    let mut converged = rr.sqrt() <= CG_TOL * b_norm;
    for _ in 0..max_iters {
        if converged {
            break;
        }
        sys.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap.is_finite() && pap > 0.0) {
            return Err(Error::Numerical(format!(
                "conjugate gradient broke down: p'Ap = {pap}"
            )));
        }
        let alpha = rr / pap;
        for k in 0..n {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_next = dot(&r, &r);
        if !rr_next.is_finite() {
            return Err(Error::Numerical(
                "conjugate gradient residual became non-finite".into(),
            ));
        }
        if rr_next.sqrt() <= CG_TOL * b_norm {
            converged = true;
            continue;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "conjugate gradient did not reach {CG_TOL:e} relative residual \
             in {max_iters} iterations on a {m}x{m} grid"
        )));
    }
    let out = Tensor::new(vec![m, m], u)?;
    out.check_finite("darcy solution")?;
    Ok(out)
}

/// Two-phase permeability: a thresholded Gaussian random field, 12 where
/// the field is non-negative and 3 where it is negative.
pub fn darcy_coefficient_sample(
    extents: &[usize],
    alpha: f64,
    tau: f64,
    seed: u64,
) -> Result<Tensor> {
    let field = grf_sample(extents, alpha, tau, seed)?;
    Ok(threshold_two_phase(&field))
}

/// Maps field >= 0 to 12 and field < 0 to 3.
pub fn threshold_two_phase(field: &Tensor) -> Tensor {
    let data = field
        .data()
        .iter()
        .map(|&v| if v >= 0.0 { 12.0 } else { 3.0 })
        .collect();
    Tensor::new(field.shape().to_vec(), data).expect("shape preserved")
}

/// Repeats each cell of a two-dimensional field `factor` times per axis.
fn inject_piecewise_constant(a: &Tensor, factor: usize) -> Tensor {
    let m = a.shape()[0];
    let mf = m * factor;
    let mut out = vec![0.0; mf * mf];
    for i in 0..mf {
        for j in 0..mf {
            out[i * mf + j] = a.data()[(i / factor) * m + (j / factor)];
        }
    }
    Tensor::new(vec![mf, mf], out).expect("sized above")
}

/// Averages each `factor` x `factor` block down to one cell.
fn block_average(u: &Tensor, factor: usize) -> Tensor {
    let mf = u.shape()[0];
    let m = mf / factor;
    let scale = 1.0 / ((factor * factor) as f64);
    let mut out = vec![0.0; m * m];
    for i in 0..mf {
        for j in 0..mf {
            out[(i / factor) * m + (j / factor)] += u.data()[i * mf + j] * scale;
        }
    }
    Tensor::new(vec![m, m], out).expect("sized above")
}

/// Generator configuration for the Darcy flow dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarcyConfig {
    /// Grid size per side.
    pub resolution: usize,
    /// Number of samples.
    pub count: usize,
    /// Base seed; sample i uses seed + i.
    pub seed: u64,
    /// Spectral decay exponent of the underlying random field.
    pub alpha: f64,
    /// Spectral scale of the underlying random field.
    pub tau: f64,
}

impl Default for DarcyConfig {
    fn default() -> Self {
        Self { resolution: 64, count: 32, seed: 0, alpha: 2.0, tau: 0.5 }
    }
}

/// Generates coefficient -> pressure pairs.
///
/// Each target is solved on a `REFINE`-times finer grid (the coefficient
/// injected as piecewise-constant, so it is the same physical medium) and
/// cell-averaged back to the sample resolution.
pub fn generate(cfg: &DarcyConfig, threads: usize) -> Result<PdeDataset> {
    if cfg.count == 0 {
        return Err(Error::Config("darcy sample count must be positive".into()));
    }
    if cfg.resolution < 4 {
        return Err(Error::Config(format!(
            "darcy resolution must be at least 4, got {}",
            cfg.resolution
        )));
    }
    let cfg_owned = cfg.clone();
    let samples = par_generate(cfg.count, threads, move |i| {
        let m = cfg_owned.resolution;
        let a = darcy_coefficient_sample(
            &[m, m],
            cfg_owned.alpha,
            cfg_owned.tau,
            cfg_owned.seed + i as u64,
        )?;
        let fine = darcy_solve(&inject_piecewise_constant(&a, REFINE))?;
        let u = block_average(&fine, REFINE);
        // Discrete maximum principle: the pressure is non-negative for
        // positive forcing (up to CG tolerance).
        if let Some(&bad) = u.data().iter().find(|v| **v < -1e-9) {
            return Err(Error::Numerical(format!(
                "darcy sample {i} violates the maximum principle: u = {bad}"
            )));
        }
        Ok(PdeSample {
            input: a.reshape(vec![1, m, m])?,
            target: u.reshape(vec![1, m, m])?,
            grid: GridSpec::unit(&[m, m]),
        })
    })?;
    let dataset = PdeDataset {
        name: format!("darcy_{}x{}", cfg.count, cfg.resolution),
        samples,
        gen_config: serde_json::json!({
            "family": "darcy",
            "resolution": cfg.resolution,
            "count": cfg.count,
            "seed": cfg.seed,
            "alpha": cfg.alpha,
            "tau": cfg.tau,
            "refine": REFINE,
        }),
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_coefficient_has_square_symmetry() {
        let m = 17;
        let a = Tensor::full(&[m, m], 1.0);
        let u = darcy_solve(&a).unwrap();
        for i in 0..m {
            for j in 0..m {
                let v = u.get(&[i, j]);
                // Mirrors and the transpose must agree: the coefficient,
                // load, and domain all share the square's symmetries.
                for w in [
                    u.get(&[m - 1 - i, j]),
                    u.get(&[i, m - 1 - j]),
                    u.get(&[j, i]),
                ] {
                    assert!((v - w).abs() < 1e-9, "asymmetry at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn maximum_principle_holds() {
        let a = darcy_coefficient_sample(&[24, 24], 2.0, 0.5, 7).unwrap();
        let u = darcy_solve(&a).unwrap();
        let mut max_v = f64::NEG_INFINITY;
        let mut argmax = (0, 0);
        for i in 0..24 {
            for j in 0..24 {
                let v = u.get(&[i, j]);
                assert!(v >= -1e-9, "negative pressure at ({i},{j}): {v}");
                if v > max_v {
                    max_v = v;
                    argmax = (i, j);
                }
            }
        }
        assert!(max_v > 0.0);
        let (i, j) = argmax;
        assert!(
            i > 0 && i < 23 && j > 0 && j < 23,
            "maximum on the boundary ring at {argmax:?}"
        );
    }

    #[test]
    fn center_value_matches_refined_solve() {
        // Odd grid: cell (16,16) of 33 is centered exactly at (0.5, 0.5).
        let coarse = darcy_solve(&Tensor::full(&[33, 33], 1.0)).unwrap();
        let center_coarse = coarse.get(&[16, 16]);
        // On the 4x grid the physical center is a cell corner; average
        // the four adjacent cells (second-order accurate at the corner).
        let fine = darcy_solve(&Tensor::full(&[132, 132], 1.0)).unwrap();
        let mut center_fine = 0.0;
        for i in [65, 66] {
            for j in [65, 66] {
                center_fine += fine.get(&[i, j]) / 4.0;
            }
        }
        let rel = (center_coarse - center_fine).abs() / center_fine.abs();
        assert!(rel < 1e-3, "center mismatch: {center_coarse} vs {center_fine}");
    }

    #[test]
    fn coefficient_is_two_phase() {
        let a = darcy_coefficient_sample(&[32, 32], 2.0, 0.5, 3).unwrap();
        assert!(a.data().iter().all(|&v| v == 3.0 || v == 12.0));
        let forced = threshold_two_phase(&Tensor::full(&[8, 8], 1.0));
        assert!(forced.data().iter().all(|&v| v == 12.0));
    }

    #[test]
    fn phase_fraction_is_balanced() {
        let mut total = 0.0;
        for seed in 0..64 {
            let a = darcy_coefficient_sample(&[32, 32], 2.0, 0.5, seed).unwrap();
            let high = a.data().iter().filter(|&&v| v == 12.0).count();
            total += high as f64 / a.numel() as f64;
        }
        let mean = total / 64.0;
        assert!((mean - 0.5).abs() < 0.1, "phase fraction {mean}");
    }

    #[test]
    fn rejects_non_positive_coefficient() {
        let mut a = Tensor::full(&[8, 8], 1.0);
        a.set(&[3, 3], 0.0);
        let err = darcy_solve(&a).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = DarcyConfig { resolution: 12, count: 4, ..Default::default() };
        let a = generate(&cfg, 1).unwrap();
        let b = generate(&cfg, 4).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.input.data(), sb.input.data());
            assert_eq!(sa.target.data(), sb.target.data());
        }
    }
}
