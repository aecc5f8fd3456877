//! Grid resampling: average pooling (downsample) and half-pixel
//! interpolation (upsample), both acting on the spatial axes of a
//! channel-major tensor `(c, d1..dn)`.
//!
//! Both directions preserve constants exactly and keep outputs inside the
//! bounds of the values they were computed from (results are clamped to
//! their stencil's min/max, which costs nothing and removes any chance of
//! an ulp excursion).

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Interpolation mode; arity is tied to the spatial rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// 1D: nearest neighbor, halves round toward the lower index.
    Nearest,
    /// 2D: separable linear weights.
    Bilinear,
    /// 3D: separable linear weights.
    Trilinear,
}

impl InterpMode {
    /// The mode used for a given spatial rank.
    pub fn for_rank(n: usize) -> Result<InterpMode> {
        match n {
            1 => Ok(InterpMode::Nearest),
            2 => Ok(InterpMode::Bilinear),
            3 => Ok(InterpMode::Trilinear),
            _ => Err(Error::Config(format!(
                "no interpolation mode for spatial rank {n} (supported: 1, 2, 3)"
            ))),
        }
    }

    fn expected_rank(&self) -> usize {
        match self {
            InterpMode::Nearest => 1,
            InterpMode::Bilinear => 2,
            InterpMode::Trilinear => 3,
        }
    }
}

/// Non-overlapping window means along each spatial axis; `factors[a]` must
/// divide the extent of spatial axis `a`. Factor 1 leaves an axis untouched.
pub fn avg_pool(x: &Tensor, factors: &[usize]) -> Result<Tensor> {
    let n = factors.len();
    if x.rank() != n + 1 {
        return Err(Error::Shape(format!(
            "avg_pool: input {:?} needs {} pooling factors, got {n}",
            x.shape(),
            x.rank().saturating_sub(1)
        )));
    }
    for (a, &f) in factors.iter().enumerate() {
        let d = x.shape()[a + 1];
        if f == 0 || d % f != 0 {
            return Err(Error::Config(format!(
                "avg_pool: extent {d} of axis {a} is not divisible by factor {f}"
            )));
        }
    }

    let out_shape: Vec<usize> = std::iter::once(x.shape()[0])
        .chain(x.shape()[1..].iter().zip(factors).map(|(&d, &f)| d / f))
        .collect();
    let window: usize = factors.iter().product();
    let in_strides = x.strides();
    let out_numel: usize = out_shape.iter().product();
    let mut out = Vec::with_capacity(out_numel);

    // Offsets of every cell inside one pooling window, in input coordinates.
    let mut window_offsets = Vec::with_capacity(window);
    let mut w_idx = vec![0usize; n];
    loop {
        let off: usize = w_idx
            .iter()
            .enumerate()
            .map(|(a, &i)| i * in_strides[a + 1])
            .sum();
        window_offsets.push(off);
        if n == 0 || !crate::reference::next_index(&mut w_idx, factors) {
            break;
        }
    }

    let mut out_idx = vec![0usize; out_shape.len()];
    loop {
        // Anchor of this window in the input.
        let mut base = out_idx[0] * in_strides[0];
        for a in 0..n {
            base += out_idx[a + 1] * factors[a] * in_strides[a + 1];
        }
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &off in &window_offsets {
            let v = x.data()[base + off];
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        out.push((sum / window as f64).clamp(lo, hi));
        if !crate::reference::next_index(&mut out_idx, &out_shape) {
            break;
        }
    }
    Tensor::new(out_shape, out)
}

/// Half-pixel source coordinate for output index `dst`, clamped to the grid.
fn src_coord(dst: usize, d_src: usize, d_dst: usize) -> f64 {
    let src = (dst as f64 + 0.5) * (d_src as f64 / d_dst as f64) - 0.5;
    src.clamp(0.0, (d_src - 1) as f64)
}

/// Resizes one spatial axis by nearest neighbor (halves round down).
fn nearest_axis(x: &Tensor, axis: usize, target: usize) -> Result<Tensor> {
    let d_src = x.shape()[axis];
    let mut picks = Vec::with_capacity(target);
    for dst in 0..target {
        let src = src_coord(dst, d_src, target);
        let idx = (src - 0.5).ceil() as isize;
        picks.push(idx.clamp(0, d_src as isize - 1) as usize);
    }
    // Selection is a contraction with a 0/1 matrix.
    let mut sel = Tensor::zeros(&[d_src, target]);
    for (dst, &src) in picks.iter().enumerate() {
        sel.set(&[src, dst], 1.0);
    }
    tensor::contract_axis(x, &sel, axis)
}

/// Resizes one spatial axis by linear interpolation with half-pixel mapping,
/// clamping each output to its two-point stencil's bounds.
fn linear_axis(x: &Tensor, axis: usize, target: usize) -> Result<Tensor> {
    let d_src = x.shape()[axis];
    let outer: usize = x.shape()[..axis].iter().product();
    let inner: usize = x.shape()[axis + 1..].iter().product();

    let stencil: Vec<(usize, usize, f64)> = (0..target)
        .map(|dst| {
            let src = src_coord(dst, d_src, target);
            let x0 = src.floor() as usize;
            let x1 = (x0 + 1).min(d_src - 1);
            (x0, x1, src - x0 as f64)
        })
        .collect();

    let mut out_shape = x.shape().to_vec();
    out_shape[axis] = target;
    let mut out = vec![0.0; outer * target * inner];
    for o in 0..outer {
        for (dst, &(x0, x1, w)) in stencil.iter().enumerate() {
            for i in 0..inner {
                let a = x.data()[o * d_src * inner + x0 * inner + i];
                let b = x.data()[o * d_src * inner + x1 * inner + i];
                let v = (1.0 - w) * a + w * b;
                out[o * target * inner + dst * inner + i] =
                    v.clamp(a.min(b), a.max(b));
            }
        }
    }
    Tensor::new(out_shape, out)
}

/// Resizes the spatial axes of `x: (c, d1..dn)` to `target` extents.
/// The mode's arity must match the spatial rank.
pub fn interpolate(x: &Tensor, target: &[usize], mode: InterpMode) -> Result<Tensor> {
    let n = x.rank().saturating_sub(1);
    if target.len() != n {
        return Err(Error::Shape(format!(
            "interpolate: input {:?} needs {n} target extents, got {:?}",
            x.shape(),
            target
        )));
    }
    if mode.expected_rank() != n {
        return Err(Error::Config(format!(
            "interpolate: mode {mode:?} applies to rank {}, input is rank {n}",
            mode.expected_rank()
        )));
    }
    if target.iter().any(|&t| t == 0) {
        return Err(Error::Config("interpolate: zero target extent".into()));
    }
    let mut cur = x.clone();
    for (a, &t) in target.iter().enumerate() {
        if cur.shape()[a + 1] == t {
            continue;
        }
        cur = match mode {
            InterpMode::Nearest => nearest_axis(&cur, a + 1, t)?,
            InterpMode::Bilinear | InterpMode::Trilinear => linear_axis(&cur, a + 1, t)?,
        };
    }
    Ok(cur)
}

/// 1D linear resize of a bare vector (no channel axis); the separable core
/// of bilinear/trilinear, exposed for direct checking.
pub fn interp_linear_1d(values: &[f64], target: usize) -> Result<Vec<f64>> {
    let x = Tensor::new(vec![1, values.len()], values.to_vec())?;
    let out = linear_axis(&x, 1, target)?;
    Ok(out.into_data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_window_means() {
        let x = Tensor::new(vec![1, 4], vec![1., 2., 3., 4.]).unwrap();
        let y = avg_pool(&x, &[2]).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[1.5, 3.5]);
    }

    #[test]
    fn pool_factor_one_is_identity() {
        let x = Tensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let y = avg_pool(&x, &[1]).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn pool_2d_matches_quadrant_means() {
        let x = Tensor::new(vec![1, 4, 4], (0..16).map(|v| v as f64).collect()).unwrap();
        let y = avg_pool(&x, &[2, 2]).unwrap();
        // Quadrant means by hand: rows {0,1} cols {0,1} -> (0+1+4+5)/4 = 2.5 etc.
        assert_eq!(y.data(), &[2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn pool_rejects_indivisible() {
        let x = Tensor::zeros(&[1, 5]);
        assert!(avg_pool(&x, &[2]).is_err());
    }

    #[test]
    fn nearest_upsample_hand_example() {
        let x = Tensor::new(vec![1, 2], vec![1., 2.]).unwrap();
        let y = interpolate(&x, &[4], InterpMode::Nearest).unwrap();
        assert_eq!(y.data(), &[1., 1., 2., 2.]);
    }

    #[test]
    fn linear_upsample_hand_example() {
        let y = interp_linear_1d(&[0., 1.], 4).unwrap();
        assert_eq!(y, vec![0., 0.25, 0.75, 1.]);
    }

    #[test]
    fn bilinear_preserves_constants() {
        let x = Tensor::full(&[2, 3, 3], 2.75);
        let y = interpolate(&x, &[9, 6], InterpMode::Bilinear).unwrap();
        assert!(y.data().iter().all(|&v| v == 2.75));
    }

    #[test]
    fn mode_arity_is_enforced() {
        let x1 = Tensor::zeros(&[1, 4]);
        let x2 = Tensor::zeros(&[1, 4, 4]);
        assert!(interpolate(&x1, &[8], InterpMode::Bilinear).is_err());
        assert!(interpolate(&x2, &[8, 8], InterpMode::Nearest).is_err());
        assert!(interpolate(&x2, &[8, 8], InterpMode::Bilinear).is_ok());
    }

    #[test]
    fn trilinear_output_within_input_bounds() {
        let data: Vec<f64> = (0..27).map(|v| ((v * 13 % 7) as f64) - 3.0).collect();
        let x = Tensor::new(vec![1, 3, 3, 3], data).unwrap();
        let y = interpolate(&x, &[6, 6, 6], InterpMode::Trilinear).unwrap();
        let lo = x.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(y.data().iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn downsample_via_interpolation_also_works() {
        // Interpolation is not restricted to upsampling.
        let x = Tensor::new(vec![1, 4], vec![0., 1., 2., 3.]).unwrap();
        let y = interpolate(&x, &[2], InterpMode::Nearest).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
    }
}
