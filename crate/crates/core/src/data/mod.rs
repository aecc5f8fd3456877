//! Dataset generation for the supported PDE families, random-field input
//! sampling, and the on-disk dataset container.
//!
//! Every generator produces a [`PdeDataset`] of `(input, target)` tensor
//! pairs, channel-major `(c, d1..dn)`, with the generating configuration
//! echoed alongside so a recorded seed regenerates identical bytes.

pub mod advection;
pub mod burgers;
pub mod container;
pub mod darcy;
pub mod grf;
pub mod navier_stokes;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spatial discretization of a sample: grid extents plus the physical length
/// of each axis (domains here are boxes starting at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extents: Vec<usize>,
    /// Physical length per axis (e.g. 1.0 for a unit domain, 2*pi for
    /// Kolmogorov flow).
    pub domain: Vec<f64>,
}

impl GridSpec {
    pub fn unit(extents: &[usize]) -> Self {
        GridSpec {
            extents: extents.to_vec(),
            domain: vec![1.0; extents.len()],
        }
    }

    pub fn rank(&self) -> usize {
        self.extents.len()
    }
}

/// One training pair: input field `a` and target field `u`, both
/// channel-major over the same grid.
#[derive(Debug, Clone)]
pub struct PdeSample {
    pub input: Tensor,
    pub target: Tensor,
    pub grid: GridSpec,
}

impl PdeSample {
    /// Checks finiteness and that both fields sit on the sample's grid.
    pub fn validate(&self) -> Result<()> {
        self.input.check_finite("sample input")?;
        self.target.check_finite("sample target")?;
        for (what, t) in [("input", &self.input), ("target", &self.target)] {
            if t.rank() != self.grid.rank() + 1 || t.shape()[1..] != self.grid.extents[..] {
                return Err(Error::Shape(format!(
                    "sample {what} {:?} does not sit on grid {:?} (+ channel axis)",
                    t.shape(),
                    self.grid.extents
                )));
            }
        }
        Ok(())
    }
}

/// A named collection of samples plus the configuration that generated it.
#[derive(Debug, Clone)]
pub struct PdeDataset {
    pub name: String,
    pub samples: Vec<PdeSample>,
    /// Generator echo: PDE family, physical parameters, seed, solver
    /// resolution. Opaque JSON so each family records what it needs.
    pub gen_config: serde_json::Value,
}

impl PdeDataset {
    /// Validates every sample and that all samples share shapes.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .samples
            .first()
            .ok_or_else(|| Error::Config("dataset has no samples".into()))?;
        for (i, s) in self.samples.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::Shape(format!("sample {i}: {e}")))?;
            if s.input.shape() != first.input.shape()
                || s.target.shape() != first.target.shape()
            {
                return Err(Error::Shape(format!(
                    "sample {i} shapes {:?}/{:?} differ from sample 0 {:?}/{:?}",
                    s.input.shape(),
                    s.target.shape(),
                    first.input.shape(),
                    first.target.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Spatial extents shared by every sample.
    pub fn extents(&self) -> &[usize] {
        &self.samples[0].grid.extents
    }

    pub fn in_channels(&self) -> usize {
        self.samples[0].input.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.samples[0].target.shape()[0]
    }

    /// Strided spatial subsampling (keep every `factors[a]`-th point along
    /// axis `a`); extents must be divisible by their factor. Used to derive
    /// coarse-resolution copies of a finely generated dataset.
    pub fn subsample(&self, factors: &[usize]) -> Result<PdeDataset> {
        let extents = self.extents();
        if factors.len() != extents.len() {
            return Err(Error::Config(format!(
                "subsample: {} factors for {} axes",
                factors.len(),
                extents.len()
            )));
        }
        for (a, (&d, &f)) in extents.iter().zip(factors).enumerate() {
            if f == 0 || d % f != 0 {
                return Err(Error::Config(format!(
                    "subsample: extent {d} of axis {a} not divisible by {f}"
                )));
            }
        }
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let grid = GridSpec {
                    extents: s
                        .grid
                        .extents
                        .iter()
                        .zip(factors)
                        .map(|(&d, &f)| d / f)
                        .collect(),
                    domain: s.grid.domain.clone(),
                };
                Ok(PdeSample {
                    input: stride_spatial(&s.input, factors)?,
                    target: stride_spatial(&s.target, factors)?,
                    grid,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PdeDataset {
            name: self.name.clone(),
            samples,
            gen_config: self.gen_config.clone(),
        })
    }
}

/// Runs `make_sample(i)` for `i in 0..count`, fanning out across up to
/// `threads` workers. Results land in index order and every sample's
/// randomness must derive from its index, so the output is identical for
/// any thread count.
pub fn par_generate<T, F>(count: usize, threads: usize, make_sample: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.clamp(1, count.max(1));
    if threads <= 1 {
        return (0..count).map(make_sample).collect();
    }
    let mut slots: Vec<Option<T>> = Vec::new();
    slots.resize_with(count, || None);
    let chunk_size = count.div_ceil(threads);
    let first_error: std::sync::Mutex<Option<Error>> = std::sync::Mutex::new(None);
    std::thread::scope(|scope| {
        for (t, chunk) in slots.chunks_mut(chunk_size).enumerate() {
            let make_sample = &make_sample;
            let first_error = &first_error;
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    match make_sample(t * chunk_size + j) {
                        Ok(sample) => *slot = Some(sample),
                        Err(e) => {
                            first_error.lock().expect("poisoned").get_or_insert(e);
                            return;
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("all slots filled when no worker errored"))
        .collect())
}

/// Keeps every `factors[a]`-th point along each spatial axis of a
/// channel-major tensor.
pub fn stride_spatial(x: &Tensor, factors: &[usize]) -> Result<Tensor> {
    let n = factors.len();
    if x.rank() != n + 1 {
        return Err(Error::Shape(format!(
            "stride: input {:?} needs {n} factors",
            x.shape()
        )));
    }
    let out_shape: Vec<usize> = std::iter::once(x.shape()[0])
        .chain(x.shape()[1..].iter().zip(factors).map(|(&d, &f)| d / f))
        .collect();
    let in_strides = x.strides();
    let mut out = Vec::with_capacity(out_shape.iter().product());
    let mut idx = vec![0usize; out_shape.len()];
    loop {
        let mut off = idx[0] * in_strides[0];
        for a in 0..n {
            off += idx[a + 1] * factors[a] * in_strides[a + 1];
        }
        out.push(x.data()[off]);
        if !crate::reference::next_index(&mut idx, &out_shape) {
            break;
        }
    }
    Tensor::new(out_shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> PdeDataset {
        let grid = GridSpec::unit(&[4]);
        let samples = (0..3)
            .map(|i| PdeSample {
                input: Tensor::new(vec![1, 4], vec![i as f64; 4]).unwrap(),
                target: Tensor::new(vec![1, 4], vec![i as f64 + 1.0; 4]).unwrap(),
                grid: grid.clone(),
            })
            .collect();
        PdeDataset {
            name: "tiny".into(),
            samples,
            gen_config: serde_json::json!({"family": "test"}),
        }
    }

    #[test]
    fn validate_accepts_consistent_dataset() {
        tiny_dataset().validate().unwrap();
    }

    #[test]
    fn validate_rejects_shape_drift() {
        let mut ds = tiny_dataset();
        ds.samples[1].input = Tensor::zeros(&[1, 5]);
        assert!(ds.validate().is_err());
    }

    #[test]
    fn validate_rejects_nan() {
        let mut ds = tiny_dataset();
        ds.samples[2].target.data_mut()[0] = f64::NAN;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn stride_keeps_every_other_point() {
        let x = Tensor::new(vec![1, 6], vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let y = stride_spatial(&x, &[2]).unwrap();
        assert_eq!(y.data(), &[0., 2., 4.]);
    }

    #[test]
    fn subsample_halves_extents() {
        let ds = tiny_dataset().subsample(&[2]).unwrap();
        assert_eq!(ds.extents(), &[2]);
        assert_eq!(ds.len(), 3);
        ds.validate().unwrap();
    }
}
