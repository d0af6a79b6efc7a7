//! Recording tape for the residual energy network.
//!
//! Nodes are appended in forward order; [`Tape::backward`] consumes the tape
//! and walks the nodes in exact reverse.

use crate::error::{GradError, Result};
use crate::layers::{self, KernelShape};
use crate::params::{LayerParams, ParamId};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Conv {
        x: Var,
        kernel: ParamId,
        kshape: KernelShape,
        bias: Option<ParamId>,
        stride: usize,
    },
    Swish(Var),
    Add(Var, Var),
    SumPool(Var),
    Dense {
        x: Var,
        weight: ParamId,
        bias: ParamId,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: RealTensor<T>,
    op: Op,
    from_input: bool,
    from_params: bool,
}

/// Which gradients a backward pass should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wants {
    pub input: bool,
    pub params: bool,
}

impl Wants {
    pub const INPUT: Wants = Wants { input: true, params: false };
    pub const PARAMS: Wants = Wants { input: false, params: true };
    pub const BOTH: Wants = Wants { input: true, params: true };
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub input: Option<RealTensor<T>>,
    pub params: Option<LayerParams<T>>,
}

/// Single-use record of one forward evaluation.
pub struct Tape<'p, T> {
    params: &'p LayerParams<T>,
    nodes: Vec<Node<T>>,
    input: Option<Var>,
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p LayerParams<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            input: None,
        }
    }

    pub fn value(&self, v: Var) -> &RealTensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: RealTensor<T>, op: Op, from_input: bool, from_params: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            from_input,
            from_params,
        });
        Var(self.nodes.len() - 1)
    }

    fn flags(&self, v: Var) -> (bool, bool) {
        let n = &self.nodes[v.0];
        (n.from_input, n.from_params)
    }

    /// Registers the differentiable network input. Only one input per tape.
    pub fn input(&mut self, x: RealTensor<T>) -> Result<Var> {
        if self.input.is_some() {
            return Err(GradError::Parameter("tape already has an input".into()));
        }
        let v = self.push(x, Op::Input, true, false);
        self.input = Some(v);
        Ok(v)
    }

    pub fn conv2d(&mut self, x: Var, kernel: ParamId, bias: Option<ParamId>, stride: usize) -> Result<Var> {
        let k = self.params.get(kernel);
        if k.shape.len() != 4 {
            return Err(GradError::Shape(format!("{} is not a 4-D kernel", k.name)));
        }
        let kshape = KernelShape::new(k.shape[0], k.shape[1], k.shape[2], k.shape[3]);
        let b = bias.map(|id| self.params.get(id).data.as_slice());
        let y = layers::conv2d(self.value(x), &k.data, kshape, b, stride)?;
        let (fi, _) = self.flags(x);
        Ok(self.push(
            y,
            Op::Conv {
                x,
                kernel,
                kshape,
                bias,
                stride,
            },
            fi,
            true,
        ))
    }

    pub fn swish(&mut self, x: Var) -> Var {
        let y = layers::swish(self.value(x));
        let (fi, fp) = self.flags(x);
        self.push(y, Op::Swish(x), fi, fp)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        let (ia, pa) = self.flags(a);
        let (ib, pb) = self.flags(b);
        Ok(self.push(y, Op::Add(a, b), ia || ib, pa || pb))
    }

    pub fn global_sum_pool(&mut self, x: Var) -> Var {
        let y = layers::global_sum_pool(self.value(x));
        let (fi, fp) = self.flags(x);
        self.push(y, Op::SumPool(x), fi, fp)
    }

    pub fn dense(&mut self, x: Var, weight: ParamId, bias: ParamId) -> Result<Var> {
        let b = self.params.get(bias);
        if b.data.len() != 1 {
            return Err(GradError::Shape(format!("{} must hold one scalar", b.name)));
        }
        let y = layers::dense(self.value(x), &self.params.get(weight).data, b.data[0])?;
        let (fi, _) = self.flags(x);
        Ok(self.push(y, Op::Dense { x, weight, bias }, fi, true))
    }

    /// Backpropagates `seed` (same shape as `output`) and consumes the tape.
    pub fn backward(self, output: Var, seed: RealTensor<T>, wants: Wants) -> Result<Gradients<T>> {
        self.backward_traced(output, seed, wants, |_| {})
    }

    fn backward_traced(
        self,
        output: Var,
        seed: RealTensor<T>,
        wants: Wants,
        mut visit: impl FnMut(usize),
    ) -> Result<Gradients<T>> {
        self.value(output).check_same(&seed)?;
        let needs = |n: &Node<T>| (wants.input && n.from_input) || (wants.params && n.from_params);
        let mut grads: Vec<Option<RealTensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        let mut pgrads = wants.params.then(|| self.params.zeros_like());
        let mut input_grad = None;

        fn accumulate<T: Scalar>(slot: &mut Option<RealTensor<T>>, g: RealTensor<T>) -> Result<()> {
            match slot {
                Some(acc) => {
                    acc.check_same(&g)?;
                    for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                None => *slot = Some(g),
            }
            Ok(())
        }
        fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
            for (a, &b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }

        for i in (0..self.nodes.len()).rev() {
            visit(i);
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Input => {
                    if wants.input {
                        input_grad = Some(g);
                    }
                }
                Op::Conv {
                    x,
                    kernel,
                    kshape,
                    bias,
                    stride,
                } => {
                    let want_x = needs(&self.nodes[x.0]);
                    let cg = layers::conv2d_backward(
                        &self.nodes[x.0].value,
                        &self.params.get(kernel).data,
                        kshape,
                        bias.is_some(),
                        stride,
                        &g,
                        want_x,
                        wants.params,
                    )?;
                    if let Some(pg) = pgrads.as_mut() {
                        if let Some(dk) = cg.kernel {
                            add_into(&mut pg.get_mut(kernel).data, &dk);
                        }
                        if let (Some(id), Some(db)) = (bias, cg.bias) {
                            add_into(&mut pg.get_mut(id).data, &db);
                        }
                    }
                    if let Some(dx) = cg.input {
                        accumulate(&mut grads[x.0], dx)?;
                    }
                }
                Op::Swish(x) => {
                    if needs(&self.nodes[x.0]) {
                        let dx = layers::swish_backward(&self.nodes[x.0].value, &g)?;
                        accumulate(&mut grads[x.0], dx)?;
                    }
                }
                Op::Add(a, b) => {
                    if needs(&self.nodes[b.0]) {
                        accumulate(&mut grads[b.0], g.clone())?;
                    }
                    if needs(&self.nodes[a.0]) {
                        accumulate(&mut grads[a.0], g)?;
                    }
                }
                Op::SumPool(x) => {
                    if needs(&self.nodes[x.0]) {
                        let dx = layers::global_sum_pool_backward(self.nodes[x.0].value.shape(), &g)?;
                        accumulate(&mut grads[x.0], dx)?;
                    }
                }
                Op::Dense { x, weight, bias } => {
                    let (dx, dw, db) = layers::dense_backward(&self.nodes[x.0].value, &self.params.get(weight).data, &g)?;
                    if let Some(pg) = pgrads.as_mut() {
                        add_into(&mut pg.get_mut(weight).data, &dw);
                        pg.get_mut(bias).data[0] += db;
                    }
                    if needs(&self.nodes[x.0]) {
                        accumulate(&mut grads[x.0], dx)?;
                    }
                }
            }
        }
        if wants.input && input_grad.is_none() {
            if let Some(v) = self.input {
                input_grad = Some(RealTensor::zeros(self.nodes[v.0].value.shape()));
            }
        }
        Ok(Gradients {
            input: input_grad,
            params: pgrads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamTensor;

    fn small_params() -> (LayerParams<f64>, ParamId, ParamId, ParamId, ParamId) {
        let mut p = LayerParams::new();
        let mut k = ParamTensor::zeros("k", vec![2, 1, 3, 3]);
        for (i, v) in k.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.7).sin();
        }
        let k = p.push(k);
        let kb = p.push(ParamTensor::zeros("kb", vec![2]));
        let mut w = ParamTensor::zeros("w", vec![2]);
        w.data = vec![0.5, -1.5];
        let w = p.push(w);
        let wb = p.push(ParamTensor::zeros("wb", vec![1]));
        (p, k, kb, w, wb)
    }

    #[test]
    fn backward_visits_in_reverse_order() {
        let (p, k, kb, w, wb) = small_params();
        let mut tape = Tape::new(&p);
        let x = tape.input(RealTensor::full([1, 1, 4, 4], 0.3)).unwrap();
        let h = tape.conv2d(x, k, Some(kb), 1).unwrap();
        let h = tape.swish(h);
        let s = tape.global_sum_pool(h);
        let e = tape.dense(s, w, wb).unwrap();
        let n = tape.len();
        let mut order = Vec::new();
        tape.backward_traced(e, RealTensor::full([1, 1, 1, 1], 1.0), Wants::BOTH, |i| order.push(i))
            .unwrap();
        assert_eq!(order, (0..n).rev().collect::<Vec<_>>());
    }

    #[test]
    fn second_input_is_rejected() {
        let (p, ..) = small_params();
        let mut tape = Tape::new(&p);
        tape.input(RealTensor::zeros([1, 1, 2, 2])).unwrap();
        assert!(tape.input(RealTensor::zeros([1, 1, 2, 2])).is_err());
    }

    #[test]
    fn seed_shape_is_checked() {
        let (p, k, kb, w, wb) = small_params();
        let mut tape = Tape::new(&p);
        let x = tape.input(RealTensor::full([2, 1, 4, 4], 0.3)).unwrap();
        let h = tape.conv2d(x, k, Some(kb), 1).unwrap();
        let s = tape.global_sum_pool(h);
        let e = tape.dense(s, w, wb).unwrap();
        assert!(tape.backward(e, RealTensor::full([1, 1, 1, 1], 1.0), Wants::BOTH).is_err());
    }
}
