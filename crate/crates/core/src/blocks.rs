//! Operator blocks: a factorized learnable transform path and a truncated
//! DFT baseline path, plus the residual block update both share.
//!
//! A block maps a channel-major feature grid `v` of shape `(d_v, d1..dn)` to
//! another of the same shape:
//!
//! ```text
//! v_next = act( W.v + b + N(R.M(v)) )
//! ```
//!
//! where `W.v` mixes channels pointwise, and the kernel term `N(R.M(v))`
//! compresses each spatial axis to `k_a` modes (`M`), mixes channels per
//! mode (`R`), and expands back to the grid (`N`).
//!
//! * **Learnable path**: `M` contracts axis `a` with a trained `(d_a, k_a)`
//!   matrix, `N` with a trained `(k_a, d_a)` matrix, and `R` is a real
//!   per-mode mixing tensor. `M` and `N` are independent — nothing ties
//!   `N.M` to the identity.
//! * **Spectral path**: `M`/`N` are a fixed truncated discrete Fourier
//!   transform pair and `R` is complex. Only `R`, `W`, `b` train.
//!
//! Every forward exists in two flavors: a plain one on [`Tensor`] values for
//! inference, and a taped one on [`Var`] handles for training. Both call the
//! same kernels in the same order, so their outputs are bit-identical.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Which kernel path a model's blocks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Trained per-axis transform matrices with a real mixing tensor.
    Learnable,
    /// Fixed truncated-DFT transforms with a complex mixing tensor.
    Fourier,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Learnable => write!(f, "learnable"),
            Architecture::Fourier => write!(f, "fourier"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learnable" => Ok(Architecture::Learnable),
            "fourier" => Ok(Architecture::Fourier),
            other => Err(Error::Config(format!(
                "unknown architecture '{other}' (expected 'learnable' or 'fourier')"
            ))),
        }
    }
}

/// Pointwise nonlinearity applied at the end of a block update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(&self, t: &Tensor) -> Tensor {
        match self {
            Activation::Relu => tensor::relu(t),
            Activation::Identity => t.clone(),
        }
    }

    fn apply_taped(&self, tape: &mut Tape, v: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(v),
            Activation::Identity => Ok(v),
        }
    }
}

/// Validates a per-axis mode count against a grid extent: either keep the
/// full axis (`k == d`) or truncate to at most the non-redundant half
/// (`k <= ceil(d/2)`). Anything between would double-count frequencies whose
/// conjugate mirror is also kept.
pub fn validate_modes(dims: &[usize], modes: &[usize]) -> Result<()> {
    if dims.len() != modes.len() {
        return Err(Error::Config(format!(
            "modes {modes:?} must give one count per grid axis {dims:?}"
        )));
    }
    for (a, (&d, &k)) in dims.iter().zip(modes).enumerate() {
        if d == 0 || k == 0 {
            return Err(Error::Config(format!(
                "axis {a}: extents and mode counts must be positive (d={d}, k={k})"
            )));
        }
        if k != d && k > d.div_ceil(2) {
            return Err(Error::Config(format!(
                "axis {a}: mode count {k} must be <= ceil({d}/2) = {} or exactly {d}",
                d.div_ceil(2)
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Standalone transform ops (plain tensors; the oracle tests target these).
// ---------------------------------------------------------------------------

/// Forward factorized transform `M`: contracts spatial axis `a` of
/// `v: (c, d1..dn)` with `mats[a]: (d_a, k_a)` for every axis in order,
/// yielding `(c, k1..kn)`.
pub fn forward_transform_m(v: &Tensor, mats: &[Tensor]) -> Result<Tensor> {
    if v.rank() != mats.len() + 1 {
        return Err(Error::Shape(format!(
            "forward transform: input rank {} needs {} axis matrices, got {}",
            v.rank(),
            v.rank().saturating_sub(1),
            mats.len()
        )));
    }
    let mut z = v.clone();
    for (a, m) in mats.iter().enumerate() {
        z = tensor::contract_axis(&z, m, a + 1)?;
    }
    Ok(z)
}

/// Inverse factorized transform `N`: contracts spatial axis `a` of
/// `z: (c, k1..kn)` with `mats[a]: (k_a, d_a)` for every axis in order,
/// yielding `(c, d1..dn)`.
pub fn inverse_transform_n(z: &Tensor, mats: &[Tensor]) -> Result<Tensor> {
    forward_transform_m(z, mats)
}

/// Per-mode channel mixing `R` (re-exported kernel): for mode position `m`,
/// `out[j, m] = sum_i r[i, j, m] * z[i, m]`.
pub fn mode_mix_r(z: &Tensor, r: &Tensor) -> Result<Tensor> {
    tensor::mode_mix(z, r)
}

// ---------------------------------------------------------------------------
// Truncated DFT pair.
// ---------------------------------------------------------------------------

/// Precomputed trigonometric matrices for the truncated DFT pair on a fixed
/// grid/mode configuration. Building the plan validates the mode counts.
///
/// Conventions (per spatial axis of extent `d`, keeping `k` frequencies):
/// * forward, unnormalized: `X[f] = sum_x v[x] * exp(-2*pi*i*f*x/d)`,
///   `f = 0..k-1` (nonnegative frequencies only);
/// * inverse, `1/d`-normalized, zero-padding the dropped frequencies. The
///   last spatial axis reconstructs a real signal: dropped conjugate mirrors
///   are compensated by doubling bins whose mirror `d-f` lies outside the
///   kept range (`f != 0 && d-f >= k`). With `k == d` every weight is 1 and
///   the round trip is exact.
#[derive(Debug, Clone)]
pub struct DftPlan {
    dims: Vec<usize>,
    modes: Vec<usize>,
    /// Per axis, `(d, k)` with entry `[x, f] = cos(2*pi*f*x/d)`.
    fwd_cos: Vec<Tensor>,
    /// Per axis, `(d, k)` with entry `[x, f] = sin(2*pi*f*x/d)`.
    fwd_sin: Vec<Tensor>,
    /// Per axis, `(k, d)` with entry `[f, x] = cos(2*pi*f*x/d) / d`.
    inv_cos: Vec<Tensor>,
    /// Per axis, `(k, d)` with entry `[f, x] = sin(2*pi*f*x/d) / d`.
    inv_sin: Vec<Tensor>,
    /// Last axis only, `(k, d)`: `w_f * cos(2*pi*f*x/d) / d`.
    last_re: Tensor,
    /// Last axis only, `(k, d)`: `-w_f * sin(2*pi*f*x/d) / d`.
    last_im: Tensor,
}

impl DftPlan {
    pub fn new(dims: &[usize], modes: &[usize]) -> Result<Self> {
        validate_modes(dims, modes)?;
        if dims.is_empty() {
            return Err(Error::Config("dft plan needs at least one axis".into()));
        }
        let mut fwd_cos = Vec::new();
        let mut fwd_sin = Vec::new();
        let mut inv_cos = Vec::new();
        let mut inv_sin = Vec::new();
        for (&d, &k) in dims.iter().zip(modes) {
            let mut fc = Tensor::zeros(&[d, k]);
            let mut fs = Tensor::zeros(&[d, k]);
            let mut ic = Tensor::zeros(&[k, d]);
            let mut is = Tensor::zeros(&[k, d]);
            for f in 0..k {
                for x in 0..d {
                    let theta = 2.0 * PI * (f * x) as f64 / d as f64;
                    fc.set(&[x, f], theta.cos());
                    fs.set(&[x, f], theta.sin());
                    ic.set(&[f, x], theta.cos() / d as f64);
                    is.set(&[f, x], theta.sin() / d as f64);
                }
            }
            fwd_cos.push(fc);
            fwd_sin.push(fs);
            inv_cos.push(ic);
            inv_sin.push(is);
        }
        let (d, k) = (dims[dims.len() - 1], modes[modes.len() - 1]);
        let mut last_re = Tensor::zeros(&[k, d]);
        let mut last_im = Tensor::zeros(&[k, d]);
        for f in 0..k {
            let w = if f != 0 && d - f >= k { 2.0 } else { 1.0 };
            for x in 0..d {
                let theta = 2.0 * PI * (f * x) as f64 / d as f64;
                last_re.set(&[f, x], w * theta.cos() / d as f64);
                last_im.set(&[f, x], -w * theta.sin() / d as f64);
            }
        }
        Ok(DftPlan {
            dims: dims.to_vec(),
            modes: modes.to_vec(),
            fwd_cos,
            fwd_sin,
            inv_cos,
            inv_sin,
            last_re,
            last_im,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    fn check_input(&self, v: &Tensor) -> Result<()> {
        if v.rank() != self.dims.len() + 1 || v.shape()[1..] != self.dims[..] {
            return Err(Error::Shape(format!(
                "dft input {:?} does not match plan grid {:?} (+ channel axis)",
                v.shape(),
                self.dims
            )));
        }
        Ok(())
    }
}

/// Truncated forward DFT of a real tensor `(c, d1..dn)`, returning real and
/// imaginary parts shaped `(c, k1..kn)`.
pub fn dft_truncated(v: &Tensor, plan: &DftPlan) -> Result<(Tensor, Tensor)> {
    plan.check_input(v)?;
    // First axis: input is real, so re/im come straight from the matrices.
    let mut re = tensor::contract_axis(v, &plan.fwd_cos[0], 1)?;
    let mut im = tensor::scale(&tensor::contract_axis(v, &plan.fwd_sin[0], 1)?, -1.0);
    // Remaining axes: full complex contraction with exp(-i*theta).
    for a in 1..plan.dims.len() {
        let axis = a + 1;
        let re_c = tensor::contract_axis(&re, &plan.fwd_cos[a], axis)?;
        let re_s = tensor::contract_axis(&re, &plan.fwd_sin[a], axis)?;
        let im_c = tensor::contract_axis(&im, &plan.fwd_cos[a], axis)?;
        let im_s = tensor::contract_axis(&im, &plan.fwd_sin[a], axis)?;
        re = tensor::add(&re_c, &im_s)?;
        im = tensor::add(&im_c, &tensor::scale(&re_s, -1.0))?;
    }
    Ok((re, im))
}

/// Inverse of [`dft_truncated`]: zero-pads dropped frequencies, applies the
/// `1/d`-normalized inverse per axis, and reconstructs a real tensor
/// `(c, d1..dn)` along the last axis.
pub fn idft_padded(re: &Tensor, im: &Tensor, plan: &DftPlan) -> Result<Tensor> {
    let n = plan.dims.len();
    let expected: Vec<usize> = std::iter::once(re.shape()[0])
        .chain(plan.modes.iter().copied())
        .collect();
    if re.shape() != expected.as_slice() || im.shape() != expected.as_slice() {
        return Err(Error::Shape(format!(
            "idft input {:?}/{:?} does not match plan modes {:?} (+ channel axis)",
            re.shape(),
            im.shape(),
            plan.modes
        )));
    }
    let mut cur_re = re.clone();
    let mut cur_im = im.clone();
    // Non-last axes: complex inverse with exp(+i*theta)/d.
    for a in 0..n - 1 {
        let axis = a + 1;
        let re_c = tensor::contract_axis(&cur_re, &plan.inv_cos[a], axis)?;
        let re_s = tensor::contract_axis(&cur_re, &plan.inv_sin[a], axis)?;
        let im_c = tensor::contract_axis(&cur_im, &plan.inv_cos[a], axis)?;
        let im_s = tensor::contract_axis(&cur_im, &plan.inv_sin[a], axis)?;
        let new_re = tensor::add(&re_c, &tensor::scale(&im_s, -1.0))?;
        let new_im = tensor::add(&im_c, &re_s)?;
        cur_re = new_re;
        cur_im = new_im;
    }
    // Last axis: weighted real reconstruction.
    let out_re = tensor::contract_axis(&cur_re, &plan.last_re, n)?;
    let out_im = tensor::contract_axis(&cur_im, &plan.last_im, n)?;
    tensor::add(&out_re, &out_im)
}

/// Spectral convolution on plain tensors: `idft(R . dft(v))` with complex
/// per-mode mixing weights `r_re`/`r_im` shaped `(c, c, k1..kn)`.
pub fn spectral_conv(v: &Tensor, r_re: &Tensor, r_im: &Tensor, plan: &DftPlan) -> Result<Tensor> {
    let (z_re, z_im) = dft_truncated(v, plan)?;
    // (z_re + i z_im)(r_re + i r_im), mixed over input channels.
    let rr = tensor::mode_mix(&z_re, r_re)?;
    let ii = tensor::mode_mix(&z_im, r_im)?;
    let ri = tensor::mode_mix(&z_re, r_im)?;
    let ir = tensor::mode_mix(&z_im, r_re)?;
    let mixed_re = tensor::add(&rr, &tensor::scale(&ii, -1.0))?;
    let mixed_im = tensor::add(&ri, &ir)?;
    idft_padded(&mixed_re, &mixed_im, plan)
}

// ---------------------------------------------------------------------------
// Blocks over the parameter store (eval + taped flavors).
// ---------------------------------------------------------------------------

/// Parameter handles for one learnable-transform block.
#[derive(Debug, Clone)]
pub struct LearnableBlock {
    /// Per-axis forward matrices, `(d_a, k_a)`.
    pub l_f: Vec<ParamId>,
    /// Per-axis inverse matrices, `(k_a, d_a)`.
    pub l_b: Vec<ParamId>,
    /// Real per-mode mixing tensor, `(d_v, d_v, k1..kn)`.
    pub r: ParamId,
    /// Pointwise channel map, `(d_v, d_v)`.
    pub w: ParamId,
    /// Pointwise bias, `(d_v,)`.
    pub w_bias: ParamId,
}

/// Parameter handles for one spectral (truncated-DFT) block.
#[derive(Debug, Clone)]
pub struct SpectralBlock {
    /// Complex per-mode mixing tensor, real part, `(d_v, d_v, k1..kn)`.
    pub r_re: ParamId,
    /// Complex per-mode mixing tensor, imaginary part.
    pub r_im: ParamId,
    pub w: ParamId,
    pub w_bias: ParamId,
}

/// One operator block of either architecture.
#[derive(Debug, Clone)]
pub enum Block {
    Learnable(LearnableBlock),
    Spectral(SpectralBlock),
}

/// Samples a tensor with iid entries from `U(-bound, bound)`.
pub fn uniform_tensor<R: Rng>(rng: &mut R, shape: &[usize], bound: f64) -> Tensor {
    let numel: usize = shape.iter().product();
    let data = (0..numel)
        .map(|_| rng.random::<f64>() * 2.0 * bound - bound)
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape/data length match by construction")
}

/// How the per-mode mixing tensor starts out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RInit {
    /// `U(+-1/d_v^2)`: the kernel path starts near zero.
    #[default]
    Random,
    /// Identity channel map plus `U(+-1/d_v^2)` noise: retained modes pass
    /// through unchanged at start, so the transform matrices see useful
    /// gradients from the first step.
    Identity,
}

/// Mixing tensor `(d_v, d_v, k1..kn)` initialized per `r_init`; `diag` sets
/// the starting diagonal (1 for a pass-through map, 0 for e.g. the
/// imaginary half of a complex pair).
fn mixing_tensor<R: Rng>(
    rng: &mut R,
    d_v: usize,
    modes: &[usize],
    bound: f64,
    r_init: RInit,
    diag: f64,
) -> Tensor {
    let mut shape = vec![d_v, d_v];
    shape.extend_from_slice(modes);
    let mut t = uniform_tensor(rng, &shape, bound);
    if r_init == RInit::Identity {
        let volume: usize = modes.iter().product();
        let data = t.data_mut();
        for i in 0..d_v {
            let row = (i * d_v + i) * volume;
            for m in 0..volume {
                data[row + m] += diag;
            }
        }
    }
    t
}

impl Block {
    /// Registers a freshly initialized block's parameters under names
    /// prefixed `block{index}.`. Transform matrices use fan-in scaling
    /// `U(+-sqrt(1/fan_in))`; mixing tensors follow `r_init` — near zero
    /// (kernel path grows as training demands) or identity-plus-noise
    /// (retained modes pass through from the start).
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        arch: Architecture,
        index: usize,
        d_v: usize,
        dims: &[usize],
        modes: &[usize],
        r_init: RInit,
    ) -> Result<Block> {
        validate_modes(dims, modes)?;
        let r_bound = 1.0 / (d_v * d_v) as f64;
        let prefix = format!("block{index}");

        let block = match arch {
            Architecture::Learnable => {
                let mut l_f = Vec::new();
                let mut l_b = Vec::new();
                for (a, (&d, &k)) in dims.iter().zip(modes).enumerate() {
                    let fwd = uniform_tensor(rng, &[d, k], (1.0 / d as f64).sqrt());
                    let inv = uniform_tensor(rng, &[k, d], (1.0 / k as f64).sqrt());
                    l_f.push(store.add(format!("{prefix}.l_f{a}"), fwd));
                    l_b.push(store.add(format!("{prefix}.l_b{a}"), inv));
                }
                let r = store.add(
                    format!("{prefix}.r"),
                    mixing_tensor(rng, d_v, modes, r_bound, r_init, 1.0),
                );
                let w = store.add(
                    format!("{prefix}.w"),
                    uniform_tensor(rng, &[d_v, d_v], (1.0 / d_v as f64).sqrt()),
                );
                let w_bias = store.add(format!("{prefix}.w_bias"), Tensor::zeros(&[d_v]));
                Block::Learnable(LearnableBlock { l_f, l_b, r, w, w_bias })
            }
            Architecture::Fourier => {
                let r_re = store.add(
                    format!("{prefix}.r_re"),
                    mixing_tensor(rng, d_v, modes, r_bound, r_init, 1.0),
                );
                let r_im = store.add(
                    format!("{prefix}.r_im"),
                    mixing_tensor(rng, d_v, modes, r_bound, r_init, 0.0),
                );
                let w = store.add(
                    format!("{prefix}.w"),
                    uniform_tensor(rng, &[d_v, d_v], (1.0 / d_v as f64).sqrt()),
                );
                let w_bias = store.add(format!("{prefix}.w_bias"), Tensor::zeros(&[d_v]));
                Block::Spectral(SpectralBlock { r_re, r_im, w, w_bias })
            }
        };
        Ok(block)
    }

    /// Plain (inference) forward: `act(W.v + b + kernel(v))`.
    pub fn forward(
        &self,
        store: &ParamStore,
        plan: &DftPlan,
        v: &Tensor,
        act: Activation,
    ) -> Result<Tensor> {
        match self {
            Block::Learnable(p) => {
                let mats_f: Vec<Tensor> =
                    p.l_f.iter().map(|&id| store.value(id).clone()).collect();
                let mats_b: Vec<Tensor> =
                    p.l_b.iter().map(|&id| store.value(id).clone()).collect();
                let z = forward_transform_m(v, &mats_f)?;
                let mixed = tensor::mode_mix(&z, store.value(p.r))?;
                let kernel = inverse_transform_n(&mixed, &mats_b)?;
                let pointwise = tensor::contract_axis(v, store.value(p.w), 0)?;
                let biased = tensor::add_channel_bias(&pointwise, store.value(p.w_bias))?;
                let pre = tensor::add(&biased, &kernel)?;
                Ok(act.apply(&pre))
            }
            Block::Spectral(p) => {
                let kernel = spectral_conv(v, store.value(p.r_re), store.value(p.r_im), plan)?;
                let pointwise = tensor::contract_axis(v, store.value(p.w), 0)?;
                let biased = tensor::add_channel_bias(&pointwise, store.value(p.w_bias))?;
                let pre = tensor::add(&biased, &kernel)?;
                Ok(act.apply(&pre))
            }
        }
    }

    /// Taped (training) forward; mirrors [`Block::forward`] op for op.
    pub fn forward_taped(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        plan: &DftPlan,
        v: Var,
        act: Activation,
    ) -> Result<Var> {
        match self {
            Block::Learnable(p) => {
                let mut z = v;
                for (a, &id) in p.l_f.iter().enumerate() {
                    let m = tape.param(store, id);
                    z = tape.contract_axis(z, m, a + 1)?;
                }
                let r = tape.param(store, p.r);
                let mut mixed = tape.mode_mix(z, r)?;
                for (a, &id) in p.l_b.iter().enumerate() {
                    let m = tape.param(store, id);
                    mixed = tape.contract_axis(mixed, m, a + 1)?;
                }
                let w = tape.param(store, p.w);
                let w_bias = tape.param(store, p.w_bias);
                let pointwise = tape.contract_axis(v, w, 0)?;
                let biased = tape.add_channel_bias(pointwise, w_bias)?;
                let pre = tape.add(biased, mixed)?;
                act.apply_taped(tape, pre)
            }
            Block::Spectral(p) => {
                let kernel = spectral_conv_taped(tape, store, p, plan, v)?;
                let w = tape.param(store, p.w);
                let w_bias = tape.param(store, p.w_bias);
                let pointwise = tape.contract_axis(v, w, 0)?;
                let biased = tape.add_channel_bias(pointwise, w_bias)?;
                let pre = tape.add(biased, kernel)?;
                act.apply_taped(tape, pre)
            }
        }
    }

    /// Flat list of this block's parameter handles.
    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            Block::Learnable(p) => {
                let mut ids = p.l_f.clone();
                ids.extend_from_slice(&p.l_b);
                ids.push(p.r);
                ids.push(p.w);
                ids.push(p.w_bias);
                ids
            }
            Block::Spectral(p) => vec![p.r_re, p.r_im, p.w, p.w_bias],
        }
    }
}

/// Taped truncated forward DFT (plan matrices enter the tape as constants).
pub fn dft_truncated_taped(
    tape: &mut Tape,
    plan: &DftPlan,
    v: Var,
) -> Result<(Var, Var)> {
    let fc0 = tape.constant(plan.fwd_cos[0].clone());
    let fs0 = tape.constant(plan.fwd_sin[0].clone());
    let mut re = tape.contract_axis(v, fc0, 1)?;
    let im_pos = tape.contract_axis(v, fs0, 1)?;
    let mut im = tape.scale(im_pos, -1.0)?;
    for a in 1..plan.dims.len() {
        let axis = a + 1;
        let fc = tape.constant(plan.fwd_cos[a].clone());
        let fs = tape.constant(plan.fwd_sin[a].clone());
        let re_c = tape.contract_axis(re, fc, axis)?;
        let re_s = tape.contract_axis(re, fs, axis)?;
        let im_c = tape.contract_axis(im, fc, axis)?;
        let im_s = tape.contract_axis(im, fs, axis)?;
        re = tape.add(re_c, im_s)?;
        im = tape.sub(im_c, re_s)?;
    }
    Ok((re, im))
}

/// Taped inverse DFT; mirrors [`idft_padded`].
pub fn idft_padded_taped(
    tape: &mut Tape,
    plan: &DftPlan,
    re: Var,
    im: Var,
) -> Result<Var> {
    let n = plan.dims.len();
    let mut cur_re = re;
    let mut cur_im = im;
    for a in 0..n - 1 {
        let axis = a + 1;
        let ic = tape.constant(plan.inv_cos[a].clone());
        let is = tape.constant(plan.inv_sin[a].clone());
        let re_c = tape.contract_axis(cur_re, ic, axis)?;
        let re_s = tape.contract_axis(cur_re, is, axis)?;
        let im_c = tape.contract_axis(cur_im, ic, axis)?;
        let im_s = tape.contract_axis(cur_im, is, axis)?;
        cur_re = tape.sub(re_c, im_s)?;
        cur_im = tape.add(im_c, re_s)?;
    }
    let lr = tape.constant(plan.last_re.clone());
    let li = tape.constant(plan.last_im.clone());
    let out_re = tape.contract_axis(cur_re, lr, n)?;
    let out_im = tape.contract_axis(cur_im, li, n)?;
    tape.add(out_re, out_im)
}

fn spectral_conv_taped(
    tape: &mut Tape,
    store: &ParamStore,
    p: &SpectralBlock,
    plan: &DftPlan,
    v: Var,
) -> Result<Var> {
    let (z_re, z_im) = dft_truncated_taped(tape, plan, v)?;
    let r_re = tape.param(store, p.r_re);
    let r_im = tape.param(store, p.r_im);
    let rr = tape.mode_mix(z_re, r_re)?;
    let ii = tape.mode_mix(z_im, r_im)?;
    let ri = tape.mode_mix(z_re, r_im)?;
    let ir = tape.mode_mix(z_im, r_re)?;
    let mixed_re = tape.sub(rr, ii)?;
    let mixed_im = tape.add(ri, ir)?;
    idft_padded_taped(tape, plan, mixed_re, mixed_im)
}

// ---------------------------------------------------------------------------
// Parameter counting.
// ---------------------------------------------------------------------------

/// Trainable scalar counts for one block, biases excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockParamCount {
    /// Kernel-path parameters (transform matrices + mixing tensor).
    pub transform: usize,
    /// Pointwise channel map `W` (`d_v^2`), reported separately because it
    /// is identical across architectures.
    pub pointwise: usize,
}

/// Closed-form per-block parameter counts:
///
/// * learnable: `d_v^2 * prod(k) + 2 * sum(d_a * k_a)`
/// * fourier:   `2 * d_v^2 * prod(k)` (complex mixing tensor)
pub fn block_param_count(
    arch: Architecture,
    d_v: usize,
    dims: &[usize],
    modes: &[usize],
) -> BlockParamCount {
    let prod_k: usize = modes.iter().product();
    let transform = match arch {
        Architecture::Learnable => {
            let axis_mats: usize = dims.iter().zip(modes).map(|(&d, &k)| 2 * d * k).sum();
            d_v * d_v * prod_k + axis_mats
        }
        Architecture::Fourier => 2 * d_v * d_v * prod_k,
    };
    BlockParamCount {
        transform,
        pointwise: d_v * d_v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_matrices_make_m_a_noop() {
        let v = Tensor::new(vec![1, 4], vec![1., 2., 3., 4.]).unwrap();
        let mut eye = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            eye.set(&[i, i], 1.0);
        }
        let z = forward_transform_m(&v, &[eye]).unwrap();
        assert_eq!(z.data(), v.data());
    }

    #[test]
    fn all_ones_matrix_sums_the_axis() {
        // (2,1) and (3,1) all-ones matrices on a (1,2,3) constant-1 input:
        // each axis sums out, leaving the single entry 2*3 = 6.
        let v = Tensor::full(&[1, 2, 3], 1.0);
        let m0 = Tensor::full(&[2, 1], 1.0);
        let m1 = Tensor::full(&[3, 1], 1.0);
        let z = forward_transform_m(&v, &[m0, m1]).unwrap();
        assert_eq!(z.shape(), &[1, 1, 1]);
        assert_eq!(z.data(), &[6.0]);
    }

    #[test]
    fn fresh_inverse_is_not_tied_to_forward() {
        // With independent random init, N(M(v)) != v: the pair is not
        // constrained to reconstruct.
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let v = uniform_tensor(&mut rng, &[2, 8], 1.0);
        let m = uniform_tensor(&mut rng, &[8, 3], 0.5);
        let n = uniform_tensor(&mut rng, &[3, 8], 0.5);
        let z = forward_transform_m(&v, &[m]).unwrap();
        let back = inverse_transform_n(&z, &[n]).unwrap();
        let mut max_diff = 0.0f64;
        for (a, b) in v.data().iter().zip(back.data()) {
            max_diff = max_diff.max((a - b).abs());
        }
        assert!(max_diff > 1e-3, "round trip unexpectedly close: {max_diff}");
    }

    #[test]
    fn mode_validation_rejects_partial_overlap() {
        // d = 8: k may be 1..=4 or exactly 8.
        assert!(validate_modes(&[8], &[4]).is_ok());
        assert!(validate_modes(&[8], &[8]).is_ok());
        assert!(validate_modes(&[8], &[5]).is_err());
        assert!(validate_modes(&[8], &[7]).is_err());
        assert!(validate_modes(&[8], &[0]).is_err());
        // d = 7: ceil(7/2) = 4.
        assert!(validate_modes(&[7], &[4]).is_ok());
        assert!(validate_modes(&[7], &[5]).is_err());
    }

    #[test]
    fn dft_untruncated_round_trip_is_exact() {
        let plan = DftPlan::new(&[5, 4], &[5, 4]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let v = uniform_tensor(&mut rng, &[2, 5, 4], 2.0);
        let (re, im) = dft_truncated(&v, &plan).unwrap();
        let back = idft_padded(&re, &im, &plan).unwrap();
        for (a, b) in v.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dft_matches_naive_oracle() {
        let plan = DftPlan::new(&[6, 5], &[3, 2]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let v = uniform_tensor(&mut rng, &[2, 6, 5], 1.0);
        let (re, im) = dft_truncated(&v, &plan).unwrap();
        let (ore, oim) = crate::reference::naive_dft(&v, &[3, 2]);
        for (a, b) in re.data().iter().zip(ore.data()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in im.data().iter().zip(oim.data()) {
            assert!((a - b).abs() < 1e-10);
        }
        let back = idft_padded(&re, &im, &plan).unwrap();
        let oback = crate::reference::naive_idft(&ore, &oim, &[6, 5]);
        for (a, b) in back.data().iter().zip(oback.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_conv_matches_naive_oracle() {
        let plan = DftPlan::new(&[8], &[3]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let v = uniform_tensor(&mut rng, &[2, 8], 1.0);
        let r_re = uniform_tensor(&mut rng, &[2, 2, 3], 0.7);
        let r_im = uniform_tensor(&mut rng, &[2, 2, 3], 0.7);
        let fast = spectral_conv(&v, &r_re, &r_im, &plan).unwrap();
        let slow = crate::reference::naive_spectral_conv(&v, &r_re, &r_im, &[3]);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn taped_block_matches_plain_block_bit_for_bit() {
        for arch in [Architecture::Learnable, Architecture::Fourier] {
            let mut store = ParamStore::new();
            let mut rng = ChaCha20Rng::seed_from_u64(42);
            let dims = [6, 4];
            let modes = [3, 2];
            let block =
                Block::init(&mut store, &mut rng, arch, 0, 3, &dims, &modes, RInit::Random).unwrap();
            let plan = DftPlan::new(&dims, &modes).unwrap();
            let v = uniform_tensor(&mut rng, &[3, 6, 4], 1.0);

            let plain = block.forward(&store, &plan, &v, Activation::Relu).unwrap();
            let mut tape = Tape::new();
            let v_var = tape.constant(v.clone());
            let taped = block
                .forward_taped(&mut tape, &store, &plan, v_var, Activation::Relu)
                .unwrap();
            assert_eq!(tape.value(taped).data(), plain.data(), "{arch}");
        }
    }

    #[test]
    fn param_count_formulas_match_registered_parameters() {
        let dims = [9, 7];
        let modes = [4, 3];
        let d_v = 5;
        for arch in [Architecture::Learnable, Architecture::Fourier] {
            let mut store = ParamStore::new();
            let mut rng = ChaCha20Rng::seed_from_u64(0);
            let block =
                Block::init(&mut store, &mut rng, arch, 0, d_v, &dims, &modes, RInit::Random).unwrap();
            let counted = block_param_count(arch, d_v, &dims, &modes);
            let mut transform = 0;
            let mut pointwise = 0;
            for &id in &block.param_ids() {
                let p = store.get(id);
                if p.name.ends_with(".w") {
                    pointwise += p.value.numel();
                } else if !p.name.ends_with("_bias") {
                    transform += p.value.numel();
                }
            }
            assert_eq!(counted.transform, transform, "{arch}");
            assert_eq!(counted.pointwise, pointwise, "{arch}");
        }
        // Spot-check the closed forms themselves.
        let lc = block_param_count(Architecture::Learnable, 5, &dims, &modes);
        assert_eq!(lc.transform, 25 * 12 + 2 * (9 * 4 + 7 * 3));
        let fc = block_param_count(Architecture::Fourier, 5, &dims, &modes);
        assert_eq!(fc.transform, 2 * 25 * 12);
    }

    #[test]
    fn identity_mixing_init_starts_at_a_pass_through() {
        let d_v = 3;
        let modes = [4];
        let bound = 1.0 / (d_v * d_v) as f64;
        let mut store = ParamStore::new();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let block = Block::init(
            &mut store,
            &mut rng,
            Architecture::Fourier,
            0,
            d_v,
            &[8],
            &modes,
            RInit::Identity,
        )
        .unwrap();
        let Block::Spectral(p) = &block else {
            panic!("expected a spectral block")
        };
        let re = store.value(p.r_re);
        let im = store.value(p.r_im);
        for i in 0..d_v {
            for j in 0..d_v {
                for m in 0..modes[0] {
                    let at = (i * d_v + j) * modes[0] + m;
                    let center = if i == j { 1.0 } else { 0.0 };
                    assert!((re.data()[at] - center).abs() <= bound);
                    assert!(im.data()[at].abs() <= bound);
                }
            }
        }
    }
}
