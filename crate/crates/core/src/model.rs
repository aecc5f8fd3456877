//! The full operator model: pointwise lifting `P`, a stack of transform
//! blocks, and a pointwise two-layer projection `Q`, plus the zero-shot
//! super-resolution path (average-pool in, interpolate the pre-Q features
//! out) and checkpoint I/O.
//!
//! Inputs are channel-major `(d_a, d1..dn)`. Normalized per-axis coordinate
//! channels (values in `[0, 1]`) are appended before `P` when positional
//! encoding is enabled, so `P` sees `d_a + n` channels.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::blocks::{
    block_param_count, uniform_tensor, Activation, Architecture, Block, BlockParamCount, DftPlan,
    RInit,
};
use crate::data::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::resample::{avg_pool, interpolate, InterpMode};
use crate::tensor::{self, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LNOC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a model's structure (not its weights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Architecture,
    /// Working channel width inside the block stack.
    pub d_v: usize,
    /// Retained modes per spatial axis.
    pub modes: Vec<usize>,
    /// Number of transform blocks (T).
    pub blocks: usize,
    /// Grid extents the model trains at; blocks are built for these.
    pub train_dims: Vec<usize>,
    /// Input channels before positional encoding.
    pub in_channels: usize,
    pub out_channels: usize,
    /// Append normalized coordinate channels before lifting.
    pub pos_enc: bool,
    pub activation: Activation,
    /// Starting point for the per-mode mixing tensors.
    #[serde(default)]
    pub r_init: RInit,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_v == 0 || self.blocks == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config(
                "d_v, blocks, in_channels, out_channels must all be positive".into(),
            ));
        }
        let n = self.train_dims.len();
        if n == 0 || n > 3 {
            return Err(Error::Config(format!(
                "spatial rank must be 1..=3, got {n}"
            )));
        }
        crate::blocks::validate_modes(&self.train_dims, &self.modes)?;
        Ok(())
    }

    fn lifted_channels(&self) -> usize {
        self.in_channels + if self.pos_enc { self.train_dims.len() } else { 0 }
    }
}

/// A trained (or trainable) operator model.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    blocks: Vec<Block>,
    plan: DftPlan,
    p_w: ParamId,
    p_b: ParamId,
    q1_w: ParamId,
    q1_b: ParamId,
    q2_w: ParamId,
    q2_b: ParamId,
}

impl OperatorModel {
    /// Builds a freshly initialized model. Parameter registration order is
    /// fixed (`p`, blocks in order, `q1`, `q2`), so a given config + seed
    /// always produces bit-identical weights.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();

        let c_in = config.lifted_channels();
        let d_v = config.d_v;
        let p_w = store.add(
            "p.w",
            uniform_tensor(&mut rng, &[c_in, d_v], (1.0 / c_in as f64).sqrt()),
        );
        let p_b = store.add("p.b", Tensor::zeros(&[d_v]));

        let mut blocks = Vec::with_capacity(config.blocks);
        for t in 0..config.blocks {
            blocks.push(Block::init(
                &mut store,
                &mut rng,
                config.arch,
                t,
                d_v,
                &config.train_dims,
                &config.modes,
                config.r_init,
            )?);
        }

        let hidden = 4 * d_v;
        let q1_w = store.add(
            "q1.w",
            uniform_tensor(&mut rng, &[d_v, hidden], (1.0 / d_v as f64).sqrt()),
        );
        let q1_b = store.add("q1.b", Tensor::zeros(&[hidden]));
        let q2_w = store.add(
            "q2.w",
            uniform_tensor(
                &mut rng,
                &[hidden, config.out_channels],
                (1.0 / hidden as f64).sqrt(),
            ),
        );
        let q2_b = store.add("q2.b", Tensor::zeros(&[config.out_channels]));

        let plan = DftPlan::new(&config.train_dims, &config.modes)?;
        Ok(OperatorModel {
            config,
            store,
            blocks,
            plan,
            p_w,
            p_b,
            q1_w,
            q1_b,
            q2_w,
            q2_b,
        })
    }

    /// Appends normalized coordinate channels (axis `a`'s channel holds
    /// `i / (d_a - 1)` at index `i`) when positional encoding is on.
    pub fn augment_input(&self, a: &Tensor) -> Result<Tensor> {
        if a.rank() != self.config.train_dims.len() + 1
            || a.shape()[0] != self.config.in_channels
        {
            return Err(Error::Shape(format!(
                "input {:?} does not match {} channels + rank-{} grid",
                a.shape(),
                self.config.in_channels,
                self.config.train_dims.len()
            )));
        }
        if !self.config.pos_enc {
            return Ok(a.clone());
        }
        let dims = &a.shape()[1..];
        let mut parts: Vec<Tensor> = vec![a.clone()];
        for (axis, &d) in dims.iter().enumerate() {
            let mut shape = vec![1usize];
            shape.extend_from_slice(dims);
            let mut coord = Tensor::zeros(&shape);
            let strides = coord.strides();
            for flat in 0..coord.numel() {
                let i = (flat / strides[axis + 1]) % d;
                let v = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
                coord.data_mut()[flat] = v;
            }
            parts.push(coord);
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        tensor::concat_channels(&refs)
    }

    fn check_train_dims(&self, a: &Tensor) -> Result<()> {
        if a.shape()[1..] != self.config.train_dims[..] {
            return Err(Error::Shape(format!(
                "input extents {:?} differ from train dims {:?}; \
                 use forward_superres for off-resolution inputs",
                &a.shape()[1..],
                self.config.train_dims
            )));
        }
        Ok(())
    }

    /// Pointwise affine map: contract the channel axis and add a bias.
    fn affine(&self, x: &Tensor, w: ParamId, b: ParamId) -> Result<Tensor> {
        let y = tensor::contract_axis(x, self.store.value(w), 0)?;
        tensor::add_channel_bias(&y, self.store.value(b))
    }

    /// Lifting + block stack: everything before the projection.
    fn features(&self, a: &Tensor) -> Result<Tensor> {
        let aug = self.augment_input(a)?;
        let mut v = self.affine(&aug, self.p_w, self.p_b)?;
        for block in &self.blocks {
            v = block.forward(&self.store, &self.plan, &v, self.config.activation)?;
        }
        Ok(v)
    }

    /// Two-layer pointwise projection.
    fn project(&self, v: &Tensor) -> Result<Tensor> {
        let h = self.affine(v, self.q1_w, self.q1_b)?;
        let h = tensor::relu(&h);
        self.affine(&h, self.q2_w, self.q2_b)
    }

    /// Full forward pass at the training resolution.
    pub fn forward(&self, a: &Tensor) -> Result<Tensor> {
        if a.rank() != self.config.train_dims.len() + 1 {
            return Err(Error::Shape(format!(
                "input {:?} has wrong rank for grid {:?}",
                a.shape(),
                self.config.train_dims
            )));
        }
        self.check_train_dims(a)?;
        let v = self.features(a)?;
        self.project(&v)
    }

    /// Forward at a finer grid: pool the input down to the training grid,
    /// run the block stack there, interpolate the pre-projection features
    /// back up, then project. Each target extent must be an integer
    /// multiple of its train extent. Ratio 1 on every axis routes through
    /// [`OperatorModel::forward`] and is bit-identical to it.
    pub fn forward_superres(&self, a: &Tensor) -> Result<Tensor> {
        let n = self.config.train_dims.len();
        if a.rank() != n + 1 || a.shape()[0] != self.config.in_channels {
            return Err(Error::Shape(format!(
                "input {:?} does not match {} channels + rank-{n} grid",
                a.shape(),
                self.config.in_channels
            )));
        }
        let target = &a.shape()[1..];
        let mut factors = Vec::with_capacity(n);
        for (axis, (&big, &small)) in target.iter().zip(&self.config.train_dims).enumerate() {
            if big % small != 0 {
                return Err(Error::Config(format!(
                    "axis {axis}: evaluation extent {big} is not an integer \
                     multiple of train extent {small}"
                )));
            }
            factors.push(big / small);
        }
        if factors.iter().all(|&f| f == 1) {
            return self.forward(a);
        }
        let pooled = avg_pool(a, &factors)?;
        let v = self.features(&pooled)?;
        let mode = InterpMode::for_rank(n)?;
        let up = interpolate(&v, target, mode)?;
        self.project(&up)
    }

    /// Taped forward at the training resolution, for training. Mirrors
    /// [`OperatorModel::forward`] op for op; the input enters the tape as a
    /// constant.
    pub fn forward_taped(&self, tape: &mut Tape, a: &Tensor) -> Result<Var> {
        self.check_train_dims(a)?;
        let aug = self.augment_input(a)?;
        let a_var = tape.constant(aug);

        let p_w = tape.param(&self.store, self.p_w);
        let p_b = tape.param(&self.store, self.p_b);
        let lifted = tape.contract_axis(a_var, p_w, 0)?;
        let mut v = tape.add_channel_bias(lifted, p_b)?;

        for block in &self.blocks {
            v = block.forward_taped(tape, &self.store, &self.plan, v, self.config.activation)?;
        }

        let q1_w = tape.param(&self.store, self.q1_w);
        let q1_b = tape.param(&self.store, self.q1_b);
        let h = tape.contract_axis(v, q1_w, 0)?;
        let h = tape.add_channel_bias(h, q1_b)?;
        let h = tape.relu(h)?;
        let q2_w = tape.param(&self.store, self.q2_w);
        let q2_b = tape.param(&self.store, self.q2_b);
        let out = tape.contract_axis(h, q2_w, 0)?;
        tape.add_channel_bias(out, q2_b)
    }

    /// Trainable-scalar accounting (biases folded into lifting/projection
    /// and block totals via `total`).
    pub fn param_counts(&self) -> ParamCounts {
        let per_block = block_param_count(
            self.config.arch,
            self.config.d_v,
            &self.config.train_dims,
            &self.config.modes,
        );
        let c_in = self.config.lifted_channels();
        let hidden = 4 * self.config.d_v;
        ParamCounts {
            arch: self.config.arch,
            per_block,
            block_count: self.config.blocks,
            lifting: c_in * self.config.d_v + self.config.d_v,
            projection: self.config.d_v * hidden
                + hidden
                + hidden * self.config.out_channels
                + self.config.out_channels,
            total: self.store.total_scalars(),
        }
    }

    // -- checkpoints ---------------------------------------------------

    /// Saves config + named weight tensors. Optimizer state is not
    /// persisted; a loaded model starts with fresh Adam moments.
    pub fn save(&self, path: &Path) -> Result<()> {
        let config_json = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Format(format!("config serialization: {e}")))?;
        let mut w = ByteWriter::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        w.bytes(&config_json);
        w.u32(self.store.len() as u32);
        for (_, p) in self.store.iter() {
            w.bytes(p.name.as_bytes());
            w.u32(p.value.rank() as u32);
            for &e in p.value.shape() {
                w.u64(e as u64);
            }
            w.f64s(p.value.data());
        }
        w.finish(path)
    }

    /// Loads a checkpoint: rebuilds the structure from the embedded config,
    /// then overwrites every parameter by name. The tensor table must cover
    /// the model's parameters exactly.
    pub fn load(path: &Path) -> Result<OperatorModel> {
        let (mut r, version) = ByteReader::open(path, CHECKPOINT_MAGIC)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let config_json = r.bytes("config")?;
        let config: ModelConfig = serde_json::from_slice(&config_json)
            .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let mut model = OperatorModel::new(config)?;

        let count = r.u32("tensor count")? as usize;
        if count != model.store.len() {
            return Err(Error::Format(format!(
                "checkpoint has {count} tensors, model needs {}",
                model.store.len()
            )));
        }
        for _ in 0..count {
            let name_bytes = r.bytes("tensor name")?;
            let name = String::from_utf8(name_bytes)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = r.u32(&format!("{name} rank"))? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64(&format!("{name} extent"))? as usize);
            }
            let numel: usize = shape.iter().product();
            let data = r.f64s(numel, &format!("{name} data"))?;
            let tensor = Tensor::new(shape, data)?;
            tensor.check_finite(&format!("checkpoint tensor {name}"))
                .map_err(|e| Error::Format(e.to_string()))?;

            let id = model
                .store
                .iter()
                .find(|(_, p)| p.name == name)
                .map(|(id, _)| id)
                .ok_or_else(|| {
                    Error::Format(format!("checkpoint tensor {name} has no matching parameter"))
                })?;
            if model.store.value(id).shape() != tensor.shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor {name} shape {:?} does not match model {:?}",
                    tensor.shape(),
                    model.store.value(id).shape()
                )));
            }
            model.store.get_mut(id).value = tensor;
        }
        r.expect_end()?;
        Ok(model)
    }
}

/// Parameter accounting for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamCounts {
    pub arch: Architecture,
    pub per_block: BlockParamCount,
    pub block_count: usize,
    /// Scalars in `P` (weight + bias).
    pub lifting: usize,
    /// Scalars in `Q` (both layers, weights + biases).
    pub projection: usize,
    /// Every trainable scalar in the model.
    pub total: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(arch: Architecture) -> ModelConfig {
        ModelConfig {
            arch,
            d_v: 3,
            modes: vec![3],
            blocks: 2,
            train_dims: vec![8],
            in_channels: 1,
            out_channels: 1,
            pos_enc: true,
            activation: Activation::Relu,
            r_init: RInit::Random,
            seed: 11,
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let a = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        let b = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        for ((_, pa), (_, pb)) in a.store.iter().zip(b.store.iter()) {
            assert_eq!(pa.value.data(), pb.value.data(), "{}", pa.name);
        }
    }

    #[test]
    fn coordinates_are_normalized_per_axis() {
        let model = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        let a = Tensor::zeros(&[1, 8]);
        let aug = model.augment_input(&a).unwrap();
        assert_eq!(aug.shape(), &[2, 8]);
        assert_eq!(aug.get(&[1, 0]), 0.0);
        assert_eq!(aug.get(&[1, 7]), 1.0);
        assert!((aug.get(&[1, 3]) - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_off_resolution_input() {
        let model = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        let err = model.forward(&Tensor::zeros(&[1, 16])).unwrap_err();
        assert!(err.to_string().contains("forward_superres"), "{err}");
    }

    #[test]
    fn taped_forward_matches_plain_bit_for_bit() {
        for arch in [Architecture::Learnable, Architecture::Fourier] {
            let model = OperatorModel::new(tiny_config(arch)).unwrap();
            let a = Tensor::new(vec![1, 8], (0..8).map(|v| (v as f64).sin()).collect()).unwrap();
            let plain = model.forward(&a).unwrap();
            let mut tape = Tape::new();
            let out = model.forward_taped(&mut tape, &a).unwrap();
            assert_eq!(tape.value(out).data(), plain.data());
        }
    }

    #[test]
    fn superres_ratio_one_is_bit_identical_to_forward() {
        let model = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        let a = Tensor::new(vec![1, 8], (0..8).map(|v| (v as f64).cos()).collect()).unwrap();
        assert_eq!(
            model.forward(&a).unwrap().data(),
            model.forward_superres(&a).unwrap().data()
        );
    }

    #[test]
    fn superres_rejects_non_integer_ratio() {
        let model = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        let err = model.forward_superres(&Tensor::zeros(&[1, 12])).unwrap_err();
        assert!(err.to_string().contains("12"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn superres_doubles_resolution() {
        let model = OperatorModel::new(tiny_config(Architecture::Fourier)).unwrap();
        let a = Tensor::new(vec![1, 16], (0..16).map(|v| (v as f64 * 0.3).sin()).collect())
            .unwrap();
        let u = model.forward_superres(&a).unwrap();
        assert_eq!(u.shape(), &[1, 16]);
    }

    #[test]
    fn zero_model_outputs_final_bias() {
        let mut model = OperatorModel::new(tiny_config(Architecture::Learnable)).unwrap();
        for (_, p) in model.store.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        let bias_value = 2.5;
        let q2_b_id = model
            .store
            .iter()
            .find(|(_, p)| p.name == "q2.b")
            .map(|(id, _)| id)
            .unwrap();
        model.store.get_mut(q2_b_id).value.data_mut().fill(bias_value);
        let a = Tensor::new(vec![1, 8], (0..8).map(|v| v as f64).collect()).unwrap();
        let u = model.forward(&a).unwrap();
        assert!(u.data().iter().all(|&v| v == bias_value));
    }

    #[test]
    fn param_total_matches_store() {
        for arch in [Architecture::Learnable, Architecture::Fourier] {
            let model = OperatorModel::new(tiny_config(arch)).unwrap();
            let counts = model.param_counts();
            let blocks_total: usize = model
                .store
                .iter()
                .filter(|(_, p)| p.name.starts_with("block"))
                .map(|(_, p)| p.value.numel())
                .sum();
            // Per-block formula excludes biases; the store includes them.
            let bias_total: usize = model
                .store
                .iter()
                .filter(|(_, p)| p.name.starts_with("block") && p.name.ends_with("_bias"))
                .map(|(_, p)| p.value.numel())
                .sum();
            assert_eq!(
                (counts.per_block.transform + counts.per_block.pointwise) * counts.block_count,
                blocks_total - bias_total
            );
            assert_eq!(counts.total, model.store.total_scalars());
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lnoc");
        let model = OperatorModel::new(tiny_config(Architecture::Fourier)).unwrap();
        let a = Tensor::new(vec![1, 8], (0..8).map(|v| (v as f64).sin()).collect()).unwrap();
        let before = model.forward(&a).unwrap();
        model.save(&path).unwrap();
        let loaded = OperatorModel::load(&path).unwrap();
        let after = loaded.forward(&a).unwrap();
        assert_eq!(before.data(), after.data());
        assert_eq!(loaded.config, model.config);
    }

    #[test]
    fn checkpoint_rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lnoc");
        std::fs::write(&path, b"LNOPxxxxxxxx").unwrap();
        assert!(OperatorModel::load(&path).is_err());
    }
}
