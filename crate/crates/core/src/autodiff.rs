//! Minimal reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! the op, its input node indices, and the forward value. [`Tape::backward`]
//! runs a single reverse sweep from a scalar loss, accumulating gradients
//! into the [`ParamStore`] entries that were leased onto the tape, then
//! clears the tape so the next batch starts fresh.
//!
//! Every op checks its forward value for NaN/inf and fails fast, so a
//! diverging run dies at the op that produced the first bad number instead
//! of at the loss.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Handle to a trainable tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// One trainable tensor plus its gradient and Adam state.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Adam first-moment estimate.
    pub m: Tensor,
    /// Adam second-moment estimate.
    pub v: Tensor,
    /// Number of optimizer steps applied (for bias correction).
    pub steps: u64,
}

/// Owns every trainable tensor of a model, in insertion order.
///
/// Iteration order is the registration order, which is deterministic for a
/// fixed model configuration; checkpoints and optimizer sweeps rely on that.
#[derive(Debug, Default, Clone)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable tensor under a unique name.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        let shape = value.shape().to_vec();
        self.params.push(Parameter {
            name,
            value,
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            steps: 0,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    /// All parameters in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Parameter)> {
        self.params
            .iter_mut()
            .enumerate()
            .map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar entries across all parameters.
    pub fn total_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Resets every gradient to zero (call once per optimizer step).
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    fn accumulate_grad(&mut self, id: ParamId, g: &Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.grad.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} does not match parameter {} {:?}",
                g.shape(),
                p.name,
                p.value.shape()
            )));
        }
        for (dst, src) in p.grad.data_mut().iter_mut().zip(g.data()) {
            *dst += src;
        }
        Ok(())
    }

    /// Euclidean norm of the concatenated gradient vector.
    pub fn grad_global_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.data().iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every gradient by `c` (used for gradient clipping).
    pub fn scale_grads(&mut self, c: f64) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g *= c;
            }
        }
    }
}

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    /// Constant or parameter snapshot; no inputs.
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sqrt(Var),
    AddChannelBias { x: Var, b: Var },
    ContractAxis { x: Var, w: Var, axis: usize },
    ModeMix { z: Var, r: Var },
    SumAll(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    /// Set when this leaf mirrors a trainable parameter.
    param: Option<ParamId>,
}

/// Records one forward pass and differentiates it in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, param: Option<ParamId>) -> Var {
        self.nodes.push(Node { value, op, param });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, value: Tensor, op: Op, what: &str) -> Result<Var> {
        value.check_finite(what)?;
        Ok(self.push(value, op, None))
    }

    /// Puts a non-trainable tensor on the tape.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, None)
    }

    /// Leases a parameter onto the tape; `backward` will route its gradient
    /// back into the store. The value is snapshotted at lease time.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Leaf, Some(id))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::add(self.value(a), self.value(b))?;
        self.push_checked(value, Op::Add(a, b), "add output")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::mul(self.value(a), self.value(b))?;
        self.push_checked(value, Op::Mul(a, b), "mul output")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = tensor::scale(self.value(a), c);
        self.push_checked(value, Op::Scale(a, c), "scale output")
    }

    /// `a - b`, recorded as `a + (-1) * b`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let neg = self.scale(b, -1.0)?;
        self.add(a, neg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = tensor::relu(self.value(a));
        self.push_checked(value, Op::Relu(a), "relu output")
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        let value = tensor::sqrt(self.value(a))?;
        self.push_checked(value, Op::Sqrt(a), "sqrt output")
    }

    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let value = tensor::add_channel_bias(self.value(x), self.value(b))?;
        self.push_checked(value, Op::AddChannelBias { x, b }, "bias output")
    }

    pub fn contract_axis(&mut self, x: Var, w: Var, axis: usize) -> Result<Var> {
        let value = tensor::contract_axis(self.value(x), self.value(w), axis)?;
        self.push_checked(value, Op::ContractAxis { x, w, axis }, "contraction output")
    }

    pub fn mode_mix(&mut self, z: Var, r: Var) -> Result<Var> {
        let value = tensor::mode_mix(self.value(z), self.value(r))?;
        self.push_checked(value, Op::ModeMix { z, r }, "mode mix output")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(tensor::sum_all(self.value(a)));
        self.push_checked(value, Op::SumAll(a), "sum output")
    }

    /// Reverse sweep from a scalar `loss`. Gradients of leased parameters are
    /// accumulated (`+=`) into the store; the tape is cleared afterwards, so
    /// each recorded forward pass can be differentiated exactly once.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward: loss must be a scalar, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn accumulate(slot: &mut Option<Tensor>, g: Tensor) -> Result<()> {
            match slot {
                Some(existing) => {
                    *existing = tensor::add(existing, &g)?;
                }
                None => *slot = Some(g),
            }
            Ok(())
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match self.nodes[idx].op {
                Op::Leaf => {
                    if let Some(id) = self.nodes[idx].param {
                        store.accumulate_grad(id, &g)?;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone())?;
                    accumulate(&mut grads[b.0], g)?;
                }
                Op::Mul(a, b) => {
                    let da = tensor::mul(&g, self.value(b))?;
                    let db = tensor::mul(&g, self.value(a))?;
                    accumulate(&mut grads[a.0], da)?;
                    accumulate(&mut grads[b.0], db)?;
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads[a.0], tensor::scale(&g, c))?;
                }
                Op::Relu(a) => {
                    let da = tensor::relu_backward(self.value(a), &g);
                    accumulate(&mut grads[a.0], da)?;
                }
                Op::Sqrt(a) => {
                    let da = tensor::sqrt_backward(self.value(a), &g);
                    accumulate(&mut grads[a.0], da)?;
                }
                Op::AddChannelBias { x, b } => {
                    let db = tensor::add_channel_bias_backward(&g);
                    accumulate(&mut grads[x.0], g)?;
                    accumulate(&mut grads[b.0], db)?;
                }
                Op::ContractAxis { x, w, axis } => {
                    let (dx, dw) =
                        tensor::contract_axis_backward(self.value(x), self.value(w), axis, &g);
                    accumulate(&mut grads[x.0], dx)?;
                    accumulate(&mut grads[w.0], dw)?;
                }
                Op::ModeMix { z, r } => {
                    let (dz, dr) = tensor::mode_mix_backward(self.value(z), self.value(r), &g);
                    accumulate(&mut grads[z.0], dz)?;
                    accumulate(&mut grads[r.0], dr)?;
                }
                Op::SumAll(a) => {
                    let da = Tensor::full(self.value(a).shape(), g.data()[0]);
                    accumulate(&mut grads[a.0], da)?;
                }
            }
        }

        self.nodes.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// d/dx sum(relu(x * w)) checked against the product rule by hand.
    #[test]
    fn backward_through_mul_and_relu() {
        let mut store = ParamStore::new();
        let w_id = store.add("w", Tensor::new(vec![3], vec![2.0, -1.0, 0.5]).unwrap());
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![3], vec![1.0, 4.0, -2.0]).unwrap());
        let w = tape.param(&store, w_id);
        let prod = tape.mul(x, w).unwrap(); // [2, -4, -1]
        let act = tape.relu(prod).unwrap(); // [2, 0, 0]
        let loss = tape.sum_all(act).unwrap();
        assert_eq!(tape.value(loss).data(), &[2.0]);
        tape.backward(loss, &mut store).unwrap();
        // dL/dw_i = x_i where x_i * w_i > 0, else 0.
        assert_eq!(store.grad(w_id).data(), &[1.0, 0.0, 0.0]);
        assert!(tape.is_empty());
    }

    /// Using the same parameter twice must accumulate both gradient paths.
    #[test]
    fn shared_parameter_accumulates() {
        let mut store = ParamStore::new();
        let w_id = store.add("w", Tensor::new(vec![2], vec![3.0, 5.0]).unwrap());
        let mut tape = Tape::new();
        let w1 = tape.param(&store, w_id);
        let w2 = tape.param(&store, w_id);
        let s = tape.add(w1, w2).unwrap();
        let loss = tape.sum_all(s).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(w_id).data(), &[2.0, 2.0]);
    }

    /// A node reused by two ops gets gradient contributions from both.
    #[test]
    fn reused_node_sums_paths() {
        let mut store = ParamStore::new();
        let w_id = store.add("w", Tensor::new(vec![1], vec![4.0]).unwrap());
        let mut tape = Tape::new();
        let w = tape.param(&store, w_id);
        let sq = tape.mul(w, w).unwrap(); // w^2
        let loss = tape.sum_all(sq).unwrap();
        tape.backward(loss, &mut store).unwrap();
        // d(w^2)/dw = 2w = 8
        assert_eq!(store.grad(w_id).data(), &[8.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[3]));
        assert!(tape.backward(x, &mut store).is_err());
    }

    #[test]
    fn forward_nan_is_caught_at_the_op() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::full(&[1], f64::MAX));
        let doubled = tape.scale(a, 2.0); // overflows to inf
        assert!(doubled.is_err());
    }

    #[test]
    fn grads_zeroed_between_steps() {
        let mut store = ParamStore::new();
        let w_id = store.add("w", Tensor::new(vec![1], vec![1.0]).unwrap());
        for _ in 0..2 {
            let mut tape = Tape::new();
            let w = tape.param(&store, w_id);
            let loss = tape.sum_all(w).unwrap();
            tape.backward(loss, &mut store).unwrap();
        }
        // Two backward passes without zero_grads accumulate.
        assert_eq!(store.grad(w_id).data(), &[2.0]);
        store.zero_grads();
        assert_eq!(store.grad(w_id).data(), &[0.0]);
    }
}
