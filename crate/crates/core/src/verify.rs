//! Built-in verification suites: fast paths cross-checked against
//! independent oracles at runtime, not just in unit tests.
//!
//! Four suites run back to back — reverse-mode gradients against central
//! finite differences, the axis-contraction kernels against naive loops,
//! the truncated DFT against the O(n^2) definition, and the PDE solvers
//! against exact solutions and grid refinement. Each yields a one-line
//! verdict; a run is deterministic, so two invocations print the same
//! report word for word.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::autodiff::Tape;
use crate::blocks::{
    dft_truncated, forward_transform_m, idft_padded, mode_mix_r, Activation, Architecture,
    DftPlan, RInit,
};
use crate::data::advection::{advection_solution, AdvectionParams};
use crate::data::burgers::burgers_solve;
use crate::data::darcy::darcy_solve;
use crate::data::grf::grf_sample;
use crate::data::navier_stokes::{navier_stokes_solve, Forcing};
use crate::error::Result;
use crate::model::{ModelConfig, OperatorModel};
use crate::reference::{grads_agree, naive_contract_axis, naive_dft, naive_mode_mix};
use crate::tensor::Tensor;

/// Deliberate defects a suite must be able to catch; used only as test
/// fixtures to prove the checks have teeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of one parameter's reverse-mode gradient before the
    /// finite-difference comparison, imitating a backward rule with the
    /// wrong sign. The gradient suite must fail.
    GradientSign,
}

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// One line of evidence: worst deviations and instance counts.
    pub detail: String,
}

/// All suite outcomes in run order.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

/// Runs every suite and collects verdicts. Internal errors fail the
/// affected suite rather than aborting the report.
pub fn run_suites(fault: Fault) -> VerifyReport {
    let suites = vec![
        wrap("gradient", gradient_suite(fault)),
        wrap("transforms", transforms_suite()),
        wrap("dft", dft_suite()),
        wrap("solvers", solvers_suite()),
    ];
    VerifyReport { suites }
}

fn wrap(name: &'static str, outcome: Result<(bool, String)>) -> SuiteResult {
    match outcome {
        Ok((passed, detail)) => SuiteResult { name, passed, detail },
        Err(e) => SuiteResult {
            name,
            passed: false,
            detail: format!("aborted: {e}"),
        },
    }
}

// ---------------------------------------------------------------------------
// Gradient suite
// ---------------------------------------------------------------------------

/// Checks every trainable scalar of small 1D and 2D models, both
/// architectures, against central finite differences of a sum-of-squares
/// readout. Tolerance 1e-4 relative with a 1e-7 absolute floor.
///
/// The piecewise activation is measure-zero trouble for finite
/// differences: a pre-activation within the probe window of a kink
/// corrupts the quotient even when the derivative (and its subgradient
/// convention) is exactly right. So a scalar is accepted if analytic and
/// numeric agree under any of three probe inputs at any of three step
/// sizes; kink collisions are fragile to both, while a genuinely wrong
/// backward rule disagrees under all nine combinations.
fn gradient_suite(fault: Fault) -> Result<(bool, String)> {
    const INPUT_SEEDS: [u64; 3] = [19, 23, 29];
    const STEPS: [f64; 3] = [1e-5, 1e-6, 3e-7];
    let mut worst: f64 = 0.0;
    let mut scalars = 0usize;
    let mut failed = 0usize;
    for arch in [Architecture::Learnable, Architecture::Fourier] {
        for rank in [1usize, 2] {
            let dims = vec![8; rank];
            let mut model = OperatorModel::new(ModelConfig {
                arch,
                d_v: 2,
                modes: vec![3; rank],
                blocks: 2,
                train_dims: dims.clone(),
                in_channels: 1,
                out_channels: 1,
                pos_enc: true,
                activation: Activation::Relu,
                r_init: RInit::Random,
                seed: 7,
            })?;
            // The fresh init is a degenerate check point: zero biases
            // line pre-activations up exactly on the kink, where no
            // two-sided derivative exists. Nudge every scalar so the
            // rules are probed at a generic point.
            let mut noise = ChaCha20Rng::seed_from_u64(101);
            for (_, p) in model.store.iter_mut() {
                for v in p.value.data_mut() {
                    *v += 0.05 * (noise.random::<f64>() * 2.0 - 1.0);
                }
            }
            let ids: Vec<_> = model.store.iter().map(|(id, _)| id).collect();

            // One backward pass per probe input, gradients snapshotted.
            let mut probes: Vec<(Tensor, Vec<Vec<f64>>)> = Vec::new();
            for &s in &INPUT_SEEDS {
                let field = grf_sample(&dims, 2.5, 3.0, s)?;
                let mut shape = vec![1];
                shape.extend(&dims);
                let input = Tensor::new(shape, field.into_data())?;
                let mut tape = Tape::new();
                model.store.zero_grads();
                let pred = model.forward_taped(&mut tape, &input)?;
                let sq = tape.mul(pred, pred)?;
                let loss = tape.sum_all(sq)?;
                tape.backward(loss, &mut model.store)?;
                if fault == Fault::GradientSign {
                    for g in model.store.get_mut(ids[0]).grad.data_mut() {
                        *g = -*g;
                    }
                }
                let grads = ids
                    .iter()
                    .map(|&id| model.store.grad(id).data().to_vec())
                    .collect();
                probes.push((input, grads));
            }

            for (k, &id) in ids.iter().enumerate() {
                let x0 = model.store.value(id).data().to_vec();
                let mut fd = |i: usize, h: f64, input: &Tensor| -> f64 {
                    let mut eval = |v: f64| -> f64 {
                        model.store.get_mut(id).value.data_mut()[i] = v;
                        let out = model.forward(input).expect("forward during fd");
                        out.data().iter().map(|o| o * o).sum::<f64>()
                    };
                    let up = eval(x0[i] + h);
                    let dn = eval(x0[i] - h);
                    model.store.get_mut(id).value.data_mut()[i] = x0[i];
                    (up - dn) / (2.0 * h)
                };
                for i in 0..x0.len() {
                    scalars += 1;
                    let mut accepted = None;
                    'probe: for (input, grads) in &probes {
                        let a = grads[k][i];
                        for &h in &STEPS {
                            let n = fd(i, h, input);
                            if grads_agree(a, n, 1e-4, 1e-7) {
                                accepted = Some((a - n).abs() / f64::max(1.0, n.abs()));
                                break 'probe;
                            }
                        }
                    }
                    match accepted {
                        Some(dev) => worst = worst.max(dev),
                        None => failed += 1,
                    }
                }
            }
        }
    }
    let detail = format!(
        "{failed} of {scalars} scalar gradients off (worst rel dev {worst:.2e}; tol 1e-4 rel / 1e-7 abs)"
    );
    Ok((failed == 0, detail))
}

// ---------------------------------------------------------------------------
// Transform kernels suite
// ---------------------------------------------------------------------------

fn random_tensor(rng: &mut ChaCha20Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Tensor::new(shape.to_vec(), data).expect("random tensor")
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Contraction and per-mode mixing against naive loops: 50 random
/// instances per kernel, tolerance 1e-12 absolute (values are O(1)).
fn transforms_suite() -> Result<(bool, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(40);
    let mut worst_contract: f64 = 0.0;
    let mut worst_mix: f64 = 0.0;
    for _ in 0..50 {
        let rank = rng.random_range(1..=3usize);
        let c = rng.random_range(1..=4usize);
        let dims: Vec<usize> = (0..rank).map(|_| rng.random_range(3..=7usize)).collect();
        let ks: Vec<usize> = dims.iter().map(|&d| rng.random_range(2..=d)).collect();

        // Forward contraction M over every axis, then the inverse
        // direction N (same kernel, transposed shapes).
        let mut shape = vec![c];
        shape.extend(&dims);
        let v = random_tensor(&mut rng, &shape);
        let mats: Vec<Tensor> = dims
            .iter()
            .zip(&ks)
            .map(|(&d, &k)| random_tensor(&mut rng, &[d, k]))
            .collect();
        let fast = forward_transform_m(&v, &mats)?;
        let mut slow = v.clone();
        for (axis, m) in mats.iter().enumerate() {
            slow = naive_contract_axis(&slow, m, axis + 1);
        }
        worst_contract = worst_contract.max(max_abs_diff(&fast, &slow));

        // Per-mode channel mixing R on the compressed core.
        let mut zshape = vec![c];
        zshape.extend(&ks);
        let z = random_tensor(&mut rng, &zshape);
        let mut rshape = vec![c, c];
        rshape.extend(&ks);
        let r = random_tensor(&mut rng, &rshape);
        let fast = mode_mix_r(&z, &r)?;
        let slow = naive_mode_mix(&z, &r);
        worst_mix = worst_mix.max(max_abs_diff(&fast, &slow));
    }
    let passed = worst_contract <= 1e-12 && worst_mix <= 1e-12;
    let detail = format!(
        "50 instances: contraction max |diff| {worst_contract:.2e}, mode mix {worst_mix:.2e} (tol 1e-12)"
    );
    Ok((passed, detail))
}

// ---------------------------------------------------------------------------
// DFT suite
// ---------------------------------------------------------------------------

/// Truncated DFT against the direct O(n^2) sum on random instances, plus
/// full-mode round trips back to the input. Tolerance 1e-10.
fn dft_suite() -> Result<(bool, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(41);
    let mut worst_fwd: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    for _ in 0..50 {
        let rank = rng.random_range(1..=2usize);
        let c = rng.random_range(1..=3usize);
        let dims: Vec<usize> = (0..rank).map(|_| rng.random_range(4..=9usize)).collect();
        let modes: Vec<usize> = dims
            .iter()
            .map(|&d| {
                if rng.random::<f64>() < 0.3 {
                    d
                } else {
                    rng.random_range(1..=d.div_ceil(2))
                }
            })
            .collect();
        let mut shape = vec![c];
        shape.extend(&dims);
        let v = random_tensor(&mut rng, &shape);

        let plan = DftPlan::new(&dims, &modes)?;
        let (re, im) = dft_truncated(&v, &plan)?;
        let (ore, oim) = naive_dft(&v, &modes);
        worst_fwd = worst_fwd.max(max_abs_diff(&re, &ore).max(max_abs_diff(&im, &oim)));

        // Keeping every mode, inverse(forward) must reproduce the input.
        let full = DftPlan::new(&dims, &dims)?;
        let (re, im) = dft_truncated(&v, &full)?;
        let back = idft_padded(&re, &im, &full)?;
        worst_round = worst_round.max(max_abs_diff(&back, &v));
    }
    let passed = worst_fwd <= 1e-10 && worst_round <= 1e-10;
    let detail = format!(
        "50 instances: vs direct sum max |diff| {worst_fwd:.2e}, full round trip {worst_round:.2e} (tol 1e-10)"
    );
    Ok((passed, detail))
}

// ---------------------------------------------------------------------------
// Solver suite
// ---------------------------------------------------------------------------

fn rel_diff(a: &Tensor, b: &Tensor) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num / den).sqrt()
}

/// Exact-solution and refinement checks, one per solver family.
fn solvers_suite() -> Result<(bool, String)> {
    let mut detail = String::new();
    let mut passed = true;

    // Advection: a whole period returns the initial condition bit for bit.
    let params = AdvectionParams { c: 0.4, omega: 0.3, h: 0.2 };
    let (u0, u1) = advection_solution(params, 1.0, 48)?;
    let advection_ok = u0.data() == u1.data();
    passed &= advection_ok;
    let _ = write!(detail, "advection wrap {}", if advection_ok { "exact" } else { "BROKEN" });

    // Burgers: a band-limited pulse solved at 64 matches the same pulse
    // solved at 256 and strided down — spectral accuracy on smooth data.
    let sample = |m: usize| -> Tensor {
        let data: Vec<f64> = (0..m)
            .map(|i| {
                let x = i as f64 / m as f64;
                (std::f64::consts::TAU * x).sin()
                    + 0.5 * (2.0 * std::f64::consts::TAU * x + 1.0).sin()
            })
            .collect();
        Tensor::new(vec![m], data).expect("init field")
    };
    let coarse = burgers_solve(&sample(64), 1e-2, 0.5)?;
    let fine = burgers_solve(&sample(256), 1e-2, 0.5)?;
    let strided: Vec<f64> = fine.data().iter().step_by(4).copied().collect();
    let fine64 = Tensor::new(vec![64], strided)?;
    let burgers_err = rel_diff(&coarse, &fine64);
    passed &= burgers_err < 1e-6;
    let _ = write!(detail, "; burgers refinement rel {burgers_err:.2e} (tol 1e-6)");

    // Darcy: unit coefficient, cell-centered value at the domain center
    // against a 4x refined solve (odd grid keeps the center exact).
    let a = Tensor::new(vec![33, 33], vec![1.0; 33 * 33])?;
    let u = darcy_solve(&a)?;
    let a4 = Tensor::new(vec![132, 132], vec![1.0; 132 * 132])?;
    let u4 = darcy_solve(&a4)?;
    let center = u.data()[16 * 33 + 16];
    let refined = (u4.data()[65 * 132 + 65]
        + u4.data()[65 * 132 + 66]
        + u4.data()[66 * 132 + 65]
        + u4.data()[66 * 132 + 66])
        / 4.0;
    let darcy_err = ((center - refined) / refined).abs();
    passed &= darcy_err < 1e-3;
    let _ = write!(detail, "; darcy center rel {darcy_err:.2e} (tol 1e-3)");

    // Navier-Stokes: w = sin(x2) has no self-advection, so it must decay
    // at exactly exp(-nu t).
    let m = 32;
    let w0: Vec<f64> = (0..m * m)
        .map(|p| (std::f64::consts::TAU * (p % m) as f64 / m as f64).sin())
        .collect();
    let w0 = Tensor::new(vec![m, m], w0)?;
    let nu = 0.1;
    let sol = navier_stokes_solve(&w0, nu, &Forcing::Zero { domain: std::f64::consts::TAU }, &[0.5])?;
    let mut worst: f64 = 0.0;
    let factor = (-nu * 0.5f64).exp();
    for p in 0..m * m {
        let want = w0.data()[p] * factor;
        let got = sol.data()[p];
        worst = worst.max((got - want).abs() / factor);
    }
    passed &= worst < 1e-6;
    let _ = write!(detail, "; viscous decay rel {worst:.2e} (tol 1e-6)");

    Ok((passed, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes_every_suite() {
        let report = run_suites(Fault::None);
        for s in &report.suites {
            assert!(s.passed, "suite {} failed: {}", s.name, s.detail);
        }
        assert!(report.all_passed());
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let report = run_suites(Fault::GradientSign);
        let gradient = report.suites.iter().find(|s| s.name == "gradient").unwrap();
        assert!(!gradient.passed, "sign-flipped gradient went undetected");
        assert!(!report.all_passed());
    }

    #[test]
    fn verdicts_are_identical_across_runs() {
        let a = run_suites(Fault::None);
        let b = run_suites(Fault::None);
        for (x, y) in a.suites.iter().zip(&b.suites) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.passed, y.passed);
            assert_eq!(x.detail, y.detail);
        }
    }
}
