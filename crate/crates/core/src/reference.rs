//! Slow, independently coded reference implementations used to cross-check
//! the production kernels.
//!
//! Everything here favors obviousness over speed: explicit multi-indices,
//! direct trigonometric summation, no shared helpers with the fast paths.
//! The `verify` subcommand and the test suite both compare against these.

use crate::tensor::Tensor;

/// Steps a multi-index through `shape` in row-major order.
/// Returns false when the index wraps back to all zeros.
pub fn next_index(index: &mut [usize], shape: &[usize]) -> bool {
    for axis in (0..shape.len()).rev() {
        index[axis] += 1;
        if index[axis] < shape[axis] {
            return true;
        }
        index[axis] = 0;
    }
    false
}

/// Dense loop version of a single-axis contraction:
/// `out[..., j, ...] = sum_i x[..., i, ...] * w[i, j]`.
pub fn naive_contract_axis(x: &Tensor, w: &Tensor, axis: usize) -> Tensor {
    let d = x.shape()[axis];
    let k = w.shape()[1];
    let mut out_shape = x.shape().to_vec();
    out_shape[axis] = k;
    let mut out = Tensor::zeros(&out_shape);

    let mut out_idx = vec![0usize; out_shape.len()];
    loop {
        let mut acc = 0.0;
        let mut x_idx = out_idx.clone();
        let j = out_idx[axis];
        for i in 0..d {
            x_idx[axis] = i;
            acc += x.get(&x_idx) * w.get(&[i, j]);
        }
        out.set(&out_idx, acc);
        if !next_index(&mut out_idx, &out_shape) {
            break;
        }
    }
    out
}

/// Dense loop version of per-mode channel mixing:
/// `out[j, m] = sum_i r[i, j, m] * z[i, m]`.
pub fn naive_mode_mix(z: &Tensor, r: &Tensor) -> Tensor {
    let c = z.shape()[0];
    let mode_shape = &z.shape()[1..];
    let mut out = Tensor::zeros(z.shape());

    let mut m = vec![0usize; mode_shape.len()];
    loop {
        for j in 0..c {
            let mut acc = 0.0;
            for i in 0..c {
                let mut r_idx = Vec::with_capacity(m.len() + 2);
                r_idx.push(i);
                r_idx.push(j);
                r_idx.extend_from_slice(&m);
                let mut z_idx = Vec::with_capacity(m.len() + 1);
                z_idx.push(i);
                z_idx.extend_from_slice(&m);
                acc += r.get(&r_idx) * z.get(&z_idx);
            }
            let mut out_idx = Vec::with_capacity(m.len() + 1);
            out_idx.push(j);
            out_idx.extend_from_slice(&m);
            out.set(&out_idx, acc);
        }
        if mode_shape.is_empty() || !next_index(&mut m, mode_shape) {
            break;
        }
    }
    out
}

/// Direct-summation truncated DFT of a real tensor `(channels, d1..dn)`:
///
/// `X[c, f] = sum_x v[c, x] * exp(-2*pi*i * sum_a f_a x_a / d_a)`
///
/// for every frequency tuple `f` with `f_a` in `0..modes[a]`. Returns the
/// real and imaginary parts, each shaped `(channels, k1..kn)`.
pub fn naive_dft(v: &Tensor, modes: &[usize]) -> (Tensor, Tensor) {
    let channels = v.shape()[0];
    let dims = &v.shape()[1..];
    let n = dims.len();
    assert_eq!(modes.len(), n);

    let mut out_shape = vec![channels];
    out_shape.extend_from_slice(modes);
    let mut re = Tensor::zeros(&out_shape);
    let mut im = Tensor::zeros(&out_shape);

    let mut f = vec![0usize; n];
    loop {
        for c in 0..channels {
            let mut acc_re = 0.0;
            let mut acc_im = 0.0;
            let mut x = vec![0usize; n];
            loop {
                let mut phase = 0.0;
                for a in 0..n {
                    phase += (f[a] * x[a]) as f64 / dims[a] as f64;
                }
                let theta = -2.0 * std::f64::consts::PI * phase;
                let mut v_idx = Vec::with_capacity(n + 1);
                v_idx.push(c);
                v_idx.extend_from_slice(&x);
                let value = v.get(&v_idx);
                acc_re += value * theta.cos();
                acc_im += value * theta.sin();
                if n == 0 || !next_index(&mut x, dims) {
                    break;
                }
            }
            let mut out_idx = Vec::with_capacity(n + 1);
            out_idx.push(c);
            out_idx.extend_from_slice(&f);
            re.set(&out_idx, acc_re);
            im.set(&out_idx, acc_im);
        }
        if n == 0 || !next_index(&mut f, modes) {
            break;
        }
    }
    (re, im)
}

/// Direct-summation inverse of [`naive_dft`]'s layout, reconstructing a real
/// tensor of spatial extents `dims`:
///
/// `u[c, x] = (1/prod d) * sum_f w(f_n) * Re(Z[c, f] * exp(+2*pi*i * sum_a f_a x_a / d_a))`
///
/// where the sum runs over the kept frequency tuples and `w(f_n) = 2` when
/// the last-axis mirror frequency `d_n - f_n` falls outside the kept range
/// (accounting for the dropped conjugate partner of a real signal), else 1.
pub fn naive_idft(re: &Tensor, im: &Tensor, dims: &[usize]) -> Tensor {
    let channels = re.shape()[0];
    let modes = &re.shape()[1..];
    let n = dims.len();
    assert_eq!(modes.len(), n);

    let norm: f64 = dims.iter().product::<usize>() as f64;
    let mut out_shape = vec![channels];
    out_shape.extend_from_slice(dims);
    let mut out = Tensor::zeros(&out_shape);

    let last = n - 1;
    let k_last = modes[last];
    let d_last = dims[last];

    let mut x = vec![0usize; n];
    loop {
        for c in 0..channels {
            let mut acc = 0.0;
            let mut f = vec![0usize; n];
            loop {
                let mut phase = 0.0;
                for a in 0..n {
                    phase += (f[a] * x[a]) as f64 / dims[a] as f64;
                }
                let theta = 2.0 * std::f64::consts::PI * phase;
                let weight = if f[last] != 0 && d_last - f[last] >= k_last {
                    2.0
                } else {
                    1.0
                };
                let mut z_idx = Vec::with_capacity(n + 1);
                z_idx.push(c);
                z_idx.extend_from_slice(&f);
                acc += weight
                    * (re.get(&z_idx) * theta.cos() - im.get(&z_idx) * theta.sin());
                if !next_index(&mut f, modes) {
                    break;
                }
            }
            let mut out_idx = Vec::with_capacity(n + 1);
            out_idx.push(c);
            out_idx.extend_from_slice(&x);
            out.set(&out_idx, acc / norm);
        }
        if !next_index(&mut x, dims) {
            break;
        }
    }
    out
}

/// Direct spectral convolution: truncated DFT, complex per-mode channel
/// mixing, inverse. Entirely built on the naive routines above so it shares
/// no code with the production spectral path.
///
/// Weight layout matches the production path: `r_re`/`r_im` are
/// `(c, c, k1..kn)` and mix channels per kept frequency.
pub fn naive_spectral_conv(v: &Tensor, r_re: &Tensor, r_im: &Tensor, modes: &[usize]) -> Tensor {
    let (z_re, z_im) = naive_dft(v, modes);
    // (a + ib)(p + iq) accumulated over input channels.
    let mixed_re_a = naive_mode_mix(&z_re, r_re);
    let mixed_re_b = naive_mode_mix(&z_im, r_im);
    let mixed_im_a = naive_mode_mix(&z_im, r_re);
    let mixed_im_b = naive_mode_mix(&z_re, r_im);
    let mut out_re = mixed_re_a;
    for (dst, sub) in out_re.data_mut().iter_mut().zip(mixed_re_b.data()) {
        *dst -= sub;
    }
    let mut out_im = mixed_im_a;
    for (dst, add) in out_im.data_mut().iter_mut().zip(mixed_im_b.data()) {
        *dst += add;
    }
    naive_idft(&out_re, &out_im, &v.shape()[1..])
}

/// Central-difference gradient of a scalar function of a flat vector:
/// `df/dx_i ~= (f(x + h e_i) - f(x - h e_i)) / (2h)`.
pub fn central_difference<F>(mut f: F, x0: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(x0.len());
    let mut x = x0.to_vec();
    for i in 0..x0.len() {
        x[i] = x0[i] + h;
        let plus = f(&x);
        x[i] = x0[i] - h;
        let minus = f(&x);
        x[i] = x0[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Whether two gradient values agree within a relative tolerance with an
/// absolute floor: `|a - b| <= max(rtol * max(|a|, |b|), atol)`.
pub fn grads_agree(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= f64::max(rtol * f64::max(a.abs(), b.abs()), atol)
}

/// Hand-stepped Adam recurrence over a fixed gradient sequence, returning the
/// parameter vector after every step. Written scalar-by-scalar from the
/// update equations, independent of the production optimizer.
pub fn scripted_adam(
    theta0: &[f64],
    grads: &[Vec<f64>],
    lrs: &[f64],
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Vec<Vec<f64>> {
    assert_eq!(grads.len(), lrs.len());
    let n = theta0.len();
    let mut theta = theta0.to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = Vec::with_capacity(grads.len());
    for (t, (g, lr)) in grads.iter().zip(lrs).enumerate() {
        let step = (t + 1) as i32;
        for i in 0..n {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - beta1.powi(step));
            let v_hat = v[i] / (1.0 - beta2.powi(step));
            theta[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        history.push(theta.clone());
    }
    history
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor;

    #[test]
    fn naive_contract_matches_fast_kernel() {
        let x = Tensor::new(vec![2, 3, 2], (0..12).map(|v| v as f64 * 0.5).collect()).unwrap();
        let w = Tensor::new(vec![3, 4], (0..12).map(|v| (v as f64).sin()).collect()).unwrap();
        let fast = tensor::contract_axis(&x, &w, 1).unwrap();
        let slow = naive_contract_axis(&x, &w, 1);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_dft_of_pure_cosine_concentrates() {
        // v[x] = cos(2*pi*2x/8): X[2] = 4, all other kept bins ~0.
        let d = 8;
        let data: Vec<f64> = (0..d)
            .map(|x| (2.0 * std::f64::consts::PI * 2.0 * x as f64 / d as f64).cos())
            .collect();
        let v = Tensor::new(vec![1, d], data).unwrap();
        let (re, im) = naive_dft(&v, &[4]);
        assert!((re.get(&[0, 2]) - 4.0).abs() < 1e-10);
        for f in [0usize, 1, 3] {
            assert!(re.get(&[0, f]).abs() < 1e-10);
        }
        assert!(im.max_abs() < 1e-10);
    }

    #[test]
    fn naive_round_trip_is_exact_when_untruncated() {
        let d = 6;
        let data: Vec<f64> = (0..2 * d).map(|v| ((v * 7 % 11) as f64) - 5.0).collect();
        let v = Tensor::new(vec![2, d], data).unwrap();
        let (re, im) = naive_dft(&v, &[d]);
        let back = naive_idft(&re, &im, &[d]);
        for (a, b) in v.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn naive_round_trip_recovers_bandlimited_signal() {
        // Signal with energy only in modes 0..3 of a 16-point grid.
        let d = 16;
        let data: Vec<f64> = (0..d)
            .map(|x| {
                let t = 2.0 * std::f64::consts::PI * x as f64 / d as f64;
                1.5 + (t).cos() - 2.0 * (2.0 * t).sin() + 0.5 * (2.0 * t).cos()
            })
            .collect();
        let v = Tensor::new(vec![1, d], data).unwrap();
        let (re, im) = naive_dft(&v, &[3]);
        let back = naive_idft(&re, &im, &[d]);
        for (a, b) in v.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn central_difference_matches_polynomial() {
        // f(x, y) = x^2 y + 3y, df/dx = 2xy, df/dy = x^2 + 3.
        let f = |p: &[f64]| p[0] * p[0] * p[1] + 3.0 * p[1];
        let g = central_difference(f, &[2.0, 5.0], 1e-5);
        assert!((g[0] - 20.0).abs() < 1e-6);
        assert!((g[1] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn fit_slope_recovers_line() {
        let x: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v + 1.0).collect();
        assert!((fit_slope(&x, &y) + 2.5).abs() < 1e-12);
    }
}
