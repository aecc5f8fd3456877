//! Wave advection at unit speed on the periodic unit interval.
//!
//! The solution is known in closed form, `u(x, t) = u0(x - t)`, so no
//! numerical solver is involved: targets are exact pointwise evaluations
//! of the shifted initial condition. The initial condition is a square
//! wave of width `omega` and height `h` centered at `c`, plus a
//! semicircle bump of radius `h` on the same center.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{par_generate, GridSpec, PdeDataset, PdeSample};

/// Initial-condition parameters: center, square-wave width, height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvectionParams {
    pub c: f64,
    pub omega: f64,
    pub h: f64,
}

impl AdvectionParams {
    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!(
                "advection square-wave width must lie in (0, 1), got {}",
                self.omega
            )));
        }
        if !(self.c.is_finite() && self.h.is_finite()) {
            return Err(Error::Config(
                "advection parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the initial condition at `x`, extended periodically.
    fn eval(&self, x: f64) -> f64 {
        // Signed periodic distance to the center, in [-0.5, 0.5].
        let mut d = x - self.c;
        d -= d.round();
        let square = if d.abs() <= self.omega / 2.0 { self.h } else { 0.0 };
        let bump = (self.h * self.h - d * d).max(0.0).sqrt();
        square + bump
    }
}

/// Evaluates the exact advection solution on a uniform grid.
///
/// Returns `(u0, u_t)` where `u_t[i] = u0(x_i - t)` with periodic wrap;
/// grid points are `x_i = i / extents`.
pub fn advection_solution(
    params: AdvectionParams,
    t: f64,
    extents: usize,
) -> Result<(Tensor, Tensor)> {
    params.validate()?;
    if extents < 4 {
        return Err(Error::Config(format!(
            "advection grid needs at least 4 points, got {extents}"
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Config(format!(
            "advection time must be finite and non-negative, got {t}"
        )));
    }
    // Unit speed on a unit periodic domain: the solution has period 1 in
    // time, so reduce t first. This keeps whole-period shifts exact.
    let t_eff = t - t.floor();
    let m = extents;
    let mut u0 = vec![0.0; m];
    let mut ut = vec![0.0; m];
    for i in 0..m {
        let x = i as f64 / m as f64;
        u0[i] = params.eval(x);
        ut[i] = params.eval(x - t_eff);
    }
    Ok((Tensor::new(vec![m], u0)?, Tensor::new(vec![m], ut)?))
}

/// Generator configuration for the advection dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvectionConfig {
    /// Spatial grid size.
    pub resolution: usize,
    /// Number of samples.
    pub count: usize,
    /// Base seed; sample i uses seed + i.
    pub seed: u64,
    /// Target time for the learned map u0 -> u(., t).
    pub t: f64,
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        Self { resolution: 40, count: 32, seed: 0, t: 0.5 }
    }
}

/// Draws initial-condition parameters for one sample.
///
/// Ranges keep both the square wave and the bump inside the unit cell:
/// c in (0.3, 0.7), omega in (0.2, 0.4), h in (0.1, 0.3).
pub fn advection_params_sample(seed: u64) -> AdvectionParams {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let c = 0.3 + 0.4 * rng.random::<f64>();
    let omega = 0.2 + 0.2 * rng.random::<f64>();
    let h = 0.1 + 0.2 * rng.random::<f64>();
    AdvectionParams { c, omega, h }
}

/// Generates an advection dataset of exact (u0, u_t) pairs.
pub fn generate(cfg: &AdvectionConfig, threads: usize) -> Result<PdeDataset> {
    if cfg.count == 0 {
        return Err(Error::Config("advection sample count must be positive".into()));
    }
    let cfg_owned = cfg.clone();
    let samples = par_generate(cfg.count, threads, move |i| {
        let params = advection_params_sample(cfg_owned.seed + i as u64);
        let (u0, ut) = advection_solution(params, cfg_owned.t, cfg_owned.resolution)?;
        let m = cfg_owned.resolution;
        Ok(PdeSample {
            input: u0.reshape(vec![1, m])?,
            target: ut.reshape(vec![1, m])?,
            grid: GridSpec::unit(&[m]),
        })
    })?;
    let dataset = PdeDataset {
        name: format!("advection_{}x{}", cfg.count, cfg.resolution),
        samples,
        gen_config: serde_json::json!({
            "family": "advection",
            "resolution": cfg.resolution,
            "count": cfg.count,
            "seed": cfg.seed,
            "t": cfg.t,
        }),
    };
    dataset.validate()?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: AdvectionParams = AdvectionParams { c: 0.25, omega: 0.2, h: 0.2 };

    #[test]
    fn zero_time_is_identity() {
        let (u0, ut) = advection_solution(PARAMS, 0.0, 64).unwrap();
        assert_eq!(u0.data(), ut.data());
    }

    #[test]
    fn full_period_wraps_to_identity() {
        let (u0, ut) = advection_solution(PARAMS, 1.0, 63).unwrap();
        assert_eq!(u0.data(), ut.data());
    }

    #[test]
    fn half_period_matches_index_shift() {
        // t = 0.5 on a 64-point grid is a shift by exactly 32 cells, so
        // the target must equal the input rotated by 32 indices.
        let (u0, ut) = advection_solution(PARAMS, 0.5, 64).unwrap();
        for i in 0..64 {
            let j = (i + 64 - 32) % 64;
            assert_eq!(ut.data()[i], u0.data()[j], "index {i}");
        }
        // Support lands where expected: peak moved from 0.25 to 0.75.
        let argmax = ut
            .data()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 48);
    }

    #[test]
    fn square_wave_and_bump_shapes() {
        let (u0, _) = advection_solution(PARAMS, 0.0, 400).unwrap();
        // At the center both terms are live: h + h.
        assert!((u0.data()[100] - 0.4).abs() < 1e-12);
        // Far from the support the field vanishes.
        assert_eq!(u0.data()[300], 0.0);
        // Just outside the square wave but inside the bump: only the
        // semicircle term remains (omega/2 = 0.1 < h = 0.2).
        let x = 0.25 + 0.15;
        let expected = (0.2f64 * 0.2 - 0.15 * 0.15).max(0.0).sqrt();
        assert!((u0.data()[160] - expected).abs() < 1e-12, "x = {x}");
    }

    #[test]
    fn rejects_bad_width() {
        let bad = AdvectionParams { c: 0.5, omega: 1.5, h: 0.2 };
        let err = advection_solution(bad, 0.5, 64).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = AdvectionConfig { count: 6, ..Default::default() };
        let a = generate(&cfg, 1).unwrap();
        let b = generate(&cfg, 3).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.input.data(), sb.input.data());
            assert_eq!(sa.target.data(), sb.target.data());
        }
    }
}
