//! Dense row-major f64 tensors and the small set of kernels everything else
//! is built from.
//!
//! Shapes are explicit `Vec<usize>` extents; a rank-0 tensor (empty shape,
//! one element) is a scalar. There is no broadcasting: binary pointwise ops
//! require identical shapes, and the only scalar-tensor op is `scale`.
//! Backward kernels live next to their forward counterparts so the autodiff
//! tape stays a thin dispatcher.

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that `data.len()` matches the shape product.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                numel
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    /// Constant tensor of the given shape.
    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// Rank-0 scalar.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consumes the tensor, returning its backing buffer.
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the same buffer under a new shape of equal size.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Row-major strides for this shape.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    /// Flat offset of a multi-index (debug-checked).
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        let strides = self.strides();
        for (axis, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[axis]);
            off += i * strides[axis];
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Largest absolute entry (0 for empty tensors).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of the flattened tensor.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Errors if any entry is NaN or infinite; `what` names the offender.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{what}: entry {i} of shape {:?} is {v}",
                    self.shape
                )));
            }
        }
        Ok(())
    }
}

/// Row-major strides for a shape.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for axis in (0..shape.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    strides
}

fn require_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!(
            "{op}: shapes {:?} and {:?} differ (no broadcasting)",
            a.shape, b.shape
        )));
    }
    Ok(())
}

/// Elementwise sum; shapes must match exactly.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("add", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

/// Elementwise product; shapes must match exactly.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("mul", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

/// Multiplies every entry by a scalar.
pub fn scale(a: &Tensor, c: f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().map(|x| x * c).collect(),
    }
}

/// max(x, 0) elementwise.
pub fn relu(a: &Tensor) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().map(|x| x.max(0.0)).collect(),
    }
}

/// Gradient of `relu`: passes `grad` where the *input* was strictly positive.
/// The subgradient at exactly zero is taken as zero.
pub fn relu_backward(input: &Tensor, grad: &Tensor) -> Tensor {
    Tensor {
        shape: input.shape.clone(),
        data: input
            .data
            .iter()
            .zip(&grad.data)
            .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
            .collect(),
    }
}

/// Elementwise square root. Inputs must be nonnegative.
pub fn sqrt(a: &Tensor) -> Result<Tensor> {
    let mut data = Vec::with_capacity(a.data.len());
    for &x in &a.data {
        if x < 0.0 {
            return Err(Error::NonFinite(format!("sqrt: negative input {x}")));
        }
        data.push(x.sqrt());
    }
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

/// Gradient of `sqrt`: g / (2*sqrt(x)), defined as 0 at x == 0.
pub fn sqrt_backward(input: &Tensor, grad: &Tensor) -> Tensor {
    Tensor {
        shape: input.shape.clone(),
        data: input
            .data
            .iter()
            .zip(&grad.data)
            .map(|(x, g)| if *x > 0.0 { g * 0.5 / x.sqrt() } else { 0.0 })
            .collect(),
    }
}

/// Adds a per-channel bias to a tensor whose leading axis is channels:
/// `out[c, s] = x[c, s] + b[c]` for every trailing position `s`.
pub fn add_channel_bias(x: &Tensor, b: &Tensor) -> Result<Tensor> {
    if b.rank() != 1 {
        return Err(Error::Shape(format!(
            "add_channel_bias: bias must be rank 1, got {:?}",
            b.shape
        )));
    }
    let channels = *x.shape.first().ok_or_else(|| {
        Error::Shape("add_channel_bias: input must have a channel axis".into())
    })?;
    if b.shape[0] != channels {
        return Err(Error::Shape(format!(
            "add_channel_bias: {} channels but bias length {}",
            channels, b.shape[0]
        )));
    }
    let span = x.numel() / channels;
    let mut data = x.data.clone();
    for c in 0..channels {
        let bias = b.data[c];
        for v in &mut data[c * span..(c + 1) * span] {
            *v += bias;
        }
    }
    Ok(Tensor {
        shape: x.shape.clone(),
        data,
    })
}

/// Gradient of `add_channel_bias` with respect to the bias: sums the
/// incoming gradient over every trailing position of each channel.
pub fn add_channel_bias_backward(grad: &Tensor) -> Tensor {
    let channels = grad.shape[0];
    let span = grad.numel() / channels;
    let data = (0..channels)
        .map(|c| grad.data[c * span..(c + 1) * span].iter().sum())
        .collect();
    Tensor {
        shape: vec![channels],
        data,
    }
}

/// Contracts one axis of `x` with a rank-2 matrix `w`:
/// `out[..., j, ...] = sum_i x[..., i, ...] * w[i, j]`,
/// replacing extent `d = x.shape[axis]` with `k = w.shape[1]`.
pub fn contract_axis(x: &Tensor, w: &Tensor, axis: usize) -> Result<Tensor> {
    if w.rank() != 2 {
        return Err(Error::Shape(format!(
            "contract_axis: weight must be rank 2, got {:?}",
            w.shape
        )));
    }
    if axis >= x.rank() {
        return Err(Error::Shape(format!(
            "contract_axis: axis {axis} out of range for shape {:?}",
            x.shape
        )));
    }
    let d = x.shape[axis];
    let k = w.shape[1];
    if w.shape[0] != d {
        return Err(Error::Shape(format!(
            "contract_axis: axis extent {d} != weight rows {} (weight {:?})",
            w.shape[0], w.shape
        )));
    }
    let outer: usize = x.shape[..axis].iter().product();
    let inner: usize = x.shape[axis + 1..].iter().product();

    let mut out_shape = x.shape.clone();
    out_shape[axis] = k;
    let mut out = vec![0.0; outer * k * inner];

    for o in 0..outer {
        let x_base = o * d * inner;
        let out_base = o * k * inner;
        for i in 0..d {
            let row = &x.data[x_base + i * inner..x_base + (i + 1) * inner];
            for j in 0..k {
                let wij = w.data[i * k + j];
                if wij == 0.0 {
                    continue;
                }
                let dst = &mut out[out_base + j * inner..out_base + (j + 1) * inner];
                for (dv, xv) in dst.iter_mut().zip(row) {
                    *dv += wij * xv;
                }
            }
        }
    }
    Ok(Tensor {
        shape: out_shape,
        data: out,
    })
}

/// Gradients of `contract_axis` with respect to the input and the weight.
///
/// `d_x[..., i, ...] = sum_j grad[..., j, ...] * w[i, j]`
/// `d_w[i, j] = sum over all outer/inner positions of x[..., i, ...] * grad[..., j, ...]`
pub fn contract_axis_backward(
    x: &Tensor,
    w: &Tensor,
    axis: usize,
    grad: &Tensor,
) -> (Tensor, Tensor) {
    let d = x.shape[axis];
    let k = w.shape[1];
    let outer: usize = x.shape[..axis].iter().product();
    let inner: usize = x.shape[axis + 1..].iter().product();

    let mut dx = vec![0.0; x.numel()];
    let mut dw = vec![0.0; d * k];

    for o in 0..outer {
        let x_base = o * d * inner;
        let g_base = o * k * inner;
        for i in 0..d {
            let x_row = &x.data[x_base + i * inner..x_base + (i + 1) * inner];
            let dx_row = &mut dx[x_base + i * inner..x_base + (i + 1) * inner];
            for j in 0..k {
                let g_row = &grad.data[g_base + j * inner..g_base + (j + 1) * inner];
                let wij = w.data[i * k + j];
                let mut acc = 0.0;
                for ((dxv, xv), gv) in dx_row.iter_mut().zip(x_row).zip(g_row) {
                    *dxv += wij * gv;
                    acc += xv * gv;
                }
                dw[i * k + j] += acc;
            }
        }
    }
    let dx = Tensor {
        shape: x.shape.clone(),
        data: dx,
    };
    let dw = Tensor {
        shape: w.shape.clone(),
        data: dw,
    };
    (dx, dw)
}

/// Per-mode channel mixing. `z` has shape `(c, m1..mn)` and `r` has shape
/// `(c, c, m1..mn)`; for every mode position `m`,
/// `out[j, m] = sum_i r[i, j, m] * z[i, m]`.
pub fn mode_mix(z: &Tensor, r: &Tensor) -> Result<Tensor> {
    let c = *z.shape.first().ok_or_else(|| {
        Error::Shape("mode_mix: input must have a channel axis".into())
    })?;
    let expected: Vec<usize> = [c, c]
        .iter()
        .chain(z.shape[1..].iter())
        .copied()
        .collect();
    if r.shape != expected {
        return Err(Error::Shape(format!(
            "mode_mix: weights {:?} do not match input {:?} (expected {:?})",
            r.shape, z.shape, expected
        )));
    }
    let modes = z.numel() / c;
    let mut out = vec![0.0; z.numel()];
    for i in 0..c {
        let z_row = &z.data[i * modes..(i + 1) * modes];
        for j in 0..c {
            let r_row = &r.data[(i * c + j) * modes..(i * c + j + 1) * modes];
            let dst = &mut out[j * modes..(j + 1) * modes];
            for ((dv, rv), zv) in dst.iter_mut().zip(r_row).zip(z_row) {
                *dv += rv * zv;
            }
        }
    }
    Ok(Tensor {
        shape: z.shape.clone(),
        data: out,
    })
}

/// Gradients of `mode_mix` with respect to the input and the weights.
///
/// `d_z[i, m] = sum_j r[i, j, m] * grad[j, m]`
/// `d_r[i, j, m] = z[i, m] * grad[j, m]`
pub fn mode_mix_backward(z: &Tensor, r: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let c = z.shape[0];
    let modes = z.numel() / c;
    let mut dz = vec![0.0; z.numel()];
    let mut dr = vec![0.0; r.numel()];
    for i in 0..c {
        let z_row = &z.data[i * modes..(i + 1) * modes];
        let dz_row = &mut dz[i * modes..(i + 1) * modes];
        for j in 0..c {
            let r_row = &r.data[(i * c + j) * modes..(i * c + j + 1) * modes];
            let dr_row = &mut dr[(i * c + j) * modes..(i * c + j + 1) * modes];
            let g_row = &grad.data[j * modes..(j + 1) * modes];
            for (((dzv, drv), (rv, zv)), gv) in dz_row
                .iter_mut()
                .zip(dr_row.iter_mut())
                .zip(r_row.iter().zip(z_row))
                .zip(g_row)
            {
                *dzv += rv * gv;
                *drv += zv * gv;
            }
        }
    }
    let dz = Tensor {
        shape: z.shape.clone(),
        data: dz,
    };
    let dr = Tensor {
        shape: r.shape.clone(),
        data: dr,
    };
    (dz, dr)
}

/// Sum of all entries.
pub fn sum_all(a: &Tensor) -> f64 {
    a.data.iter().sum()
}

/// Concatenates tensors along the leading (channel) axis; trailing
/// extents must agree.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat_channels: no inputs".into()))?;
    if first.rank() == 0 {
        return Err(Error::Shape(
            "concat_channels: inputs must have a channel axis".into(),
        ));
    }
    let tail = &first.shape[1..];
    let mut channels = 0;
    for p in parts {
        if p.rank() != first.rank() || &p.shape[1..] != tail {
            return Err(Error::Shape(format!(
                "concat_channels: trailing extents differ ({:?} vs {:?})",
                first.shape, p.shape
            )));
        }
        channels += p.shape[0];
    }
    let mut shape = vec![channels];
    shape.extend_from_slice(tail);
    let mut data = Vec::with_capacity(shape.iter().product());
    for p in parts {
        data.extend_from_slice(&p.data);
    }
    Ok(Tensor { shape, data })
}
