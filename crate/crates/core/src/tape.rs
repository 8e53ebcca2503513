//! Reverse-mode differentiation over a linear record of layer operations.
//!
//! A [`GradTape`] owns the values produced during a forward pass. Parameters
//! are borrowed, so recording a pass over a large network does not copy its
//! weights. [`GradTape::backward`] walks the record in reverse and returns a
//! gradient for every node that the scalar loss depends on.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::ops::{self, ConvGeometry};
use crate::tensor::{ConvSpec, FeatureMap, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param,
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        spec: ConvSpec,
        geo: ConvGeometry,
    },
    Depthwise {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        spec: ConvSpec,
        geo: ConvGeometry,
    },
    MaxPool {
        input: NodeId,
        argmax: Vec<usize>,
    },
    Relu {
        input: NodeId,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
    Concat {
        parts: Vec<NodeId>,
    },
    GlobalAvgPool {
        input: NodeId,
    },
    Softmax {
        input: NodeId,
    },
    SoftmaxCrossEntropy {
        logits: NodeId,
        target: usize,
        probs: Vec<f64>,
    },
    SumSquares {
        inputs: Vec<NodeId>,
        scale: f64,
    },
    Sum {
        inputs: Vec<NodeId>,
    },
    Scale {
        input: NodeId,
        factor: f64,
    },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Forward record of one computation.
#[derive(Default)]
pub struct GradTape<'p> {
    nodes: Vec<Node<'p>>,
}

impl<'p> GradTape<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Tensor>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node<'p>> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::contract(format!("node {} is not on this tape", id.0)))
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].needs_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Records a constant (no gradient is propagated into it).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Cow::Owned(value), Op::Input, false)
    }

    pub fn input_map(&mut self, map: FeatureMap) -> NodeId {
        self.input(map.into())
    }

    /// Records a borrowed learnable tensor.
    pub fn param(&mut self, value: &'p Tensor) -> NodeId {
        self.push(Cow::Borrowed(value), Op::Param, true)
    }

    pub fn param_owned(&mut self, value: Tensor) -> NodeId {
        self.push(Cow::Owned(value), Op::Param, true)
    }

    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId, bias: NodeId, spec: ConvSpec) -> Result<NodeId> {
        let (h, w, d) = self.node(input)?.value.dims3()?;
        let k = &self.node(kernel)?.value;
        let b = &self.node(bias)?.value;
        ops::check_conv_shapes(d, k, b.data(), &spec)?;
        let geo = ConvGeometry::new(h, w, &spec)?;
        let out = ops::conv2d_raw(self.value(input).data(), &geo, k.data(), b.data(), &spec);
        let value = Tensor::new(vec![geo.out_h, geo.out_w, spec.out_depth], out)?;
        let needs = self.needs(&[input, kernel, bias]);
        Ok(self.push(
            Cow::Owned(value),
            Op::Conv2d {
                input,
                kernel,
                bias,
                spec,
                geo,
            },
            needs,
        ))
    }

    pub fn depthwise_conv2d(&mut self, input: NodeId, kernel: NodeId, bias: NodeId) -> Result<NodeId> {
        let (h, w, d) = self.node(input)?.value.dims3()?;
        let k = &self.node(kernel)?.value;
        let b = &self.node(bias)?.value;
        let spec = ops::depthwise_spec(k)?;
        if spec.in_depth != d || b.len() != d {
            return Err(Error::contract(format!(
                "depthwise kernel depth {} vs input depth {d}",
                spec.in_depth
            )));
        }
        let geo = ConvGeometry::new(h, w, &spec)?;
        let out = ops::depthwise_raw(self.value(input).data(), &geo, k.data(), b.data(), &spec);
        let value = Tensor::new(vec![geo.out_h, geo.out_w, d], out)?;
        let needs = self.needs(&[input, kernel, bias]);
        Ok(self.push(
            Cow::Owned(value),
            Op::Depthwise {
                input,
                kernel,
                bias,
                spec,
                geo,
            },
            needs,
        ))
    }

    pub fn max_pool2d(&mut self, input: NodeId) -> Result<NodeId> {
        let (h, w, d) = self.node(input)?.value.dims3()?;
        let (out, argmax, oh, ow) = ops::max_pool_raw(self.value(input).data(), h, w, d);
        let value = Tensor::new(vec![oh, ow, d], out)?;
        let needs = self.needs(&[input]);
        Ok(self.push(Cow::Owned(value), Op::MaxPool { input, argmax }, needs))
    }

    pub fn relu(&mut self, input: NodeId) -> Result<NodeId> {
        let src = &self.node(input)?.value;
        let data = src.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let needs = self.needs(&[input]);
        Ok(self.push(Cow::Owned(value), Op::Relu { input }, needs))
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let a = &self.node(lhs)?.value;
        let b = &self.node(rhs)?.value;
        if a.shape() != b.shape() {
            return Err(Error::contract(format!(
                "cannot add shapes {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(a.shape().to_vec(), data)?;
        let needs = self.needs(&[lhs, rhs]);
        Ok(self.push(Cow::Owned(value), Op::Add { lhs, rhs }, needs))
    }

    /// Depth-wise concatenation of rank-3 maps with equal spatial size.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            dims.push(self.node(p)?.value.dims3()?);
        }
        let Some(&(h, w, _)) = dims.first() else {
            return Err(Error::contract("concatenation of zero maps"));
        };
        if dims.iter().any(|&(ph, pw, _)| ph != h || pw != w) {
            return Err(Error::contract("concatenated maps differ in spatial size"));
        }
        let depths: Vec<usize> = dims.iter().map(|d| d.2).collect();
        let slices: Vec<&[f64]> = parts.iter().map(|&p| self.value(p).data()).collect();
        let data = ops::concat_raw(&slices, &depths, h * w);
        let value = Tensor::new(vec![h, w, depths.iter().sum()], data)?;
        let needs = self.needs(parts);
        Ok(self.push(Cow::Owned(value), Op::Concat { parts: parts.to_vec() }, needs))
    }

    pub fn global_avg_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let (h, w, d) = self.node(input)?.value.dims3()?;
        let map = FeatureMap::from_raw(h, w, d, self.value(input).data().to_vec());
        let value = Tensor::new(vec![d], ops::global_avg_pool(&map))?;
        let needs = self.needs(&[input]);
        Ok(self.push(Cow::Owned(value), Op::GlobalAvgPool { input }, needs))
    }

    pub fn softmax(&mut self, input: NodeId) -> Result<NodeId> {
        let probs = ops::softmax(self.node(input)?.value.data())?;
        let value = Tensor::new(vec![probs.len()], probs)?;
        let needs = self.needs(&[input]);
        Ok(self.push(Cow::Owned(value), Op::Softmax { input }, needs))
    }

    /// Fused `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let scores = self.node(logits)?.value.data();
        if target >= scores.len() {
            return Err(Error::contract(format!(
                "target class {target} out of range for {} scores",
                scores.len()
            )));
        }
        let probs = ops::softmax(scores)?;
        let loss = ops::log_sum_exp(scores) - scores[target];
        let needs = self.needs(&[logits]);
        Ok(self.push(
            Cow::Owned(Tensor::scalar(loss)),
            Op::SoftmaxCrossEntropy { logits, target, probs },
            needs,
        ))
    }

    /// `scale · Σ_i Σ x_i²` over several tensors.
    pub fn sum_squares(&mut self, inputs: &[NodeId], scale: f64) -> Result<NodeId> {
        let mut total = 0.0;
        for &i in inputs {
            total += self.node(i)?.value.data().iter().map(|v| v * v).sum::<f64>();
        }
        let needs = self.needs(inputs);
        Ok(self.push(
            Cow::Owned(Tensor::scalar(scale * total)),
            Op::SumSquares {
                inputs: inputs.to_vec(),
                scale,
            },
            needs,
        ))
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        let mut total = 0.0;
        for &i in inputs {
            let v = &self.node(i)?.value;
            if v.len() != 1 {
                return Err(Error::contract("sum expects scalar nodes"));
            }
            total += v.data()[0];
        }
        let needs = self.needs(inputs);
        Ok(self.push(
            Cow::Owned(Tensor::scalar(total)),
            Op::Sum {
                inputs: inputs.to_vec(),
            },
            needs,
        ))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> Result<NodeId> {
        let src = &self.node(input)?.value;
        let data = src.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let needs = self.needs(&[input]);
        Ok(self.push(Cow::Owned(value), Op::Scale { input, factor }, needs))
    }

    /// Propagates `d loss / d node` for every node the loss depends on.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::contract("backward called on an empty tape"));
        }
        let root = self.node(loss)?;
        if root.value.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.filter(|_| self.nodes[i].needs_grad)
                    .map(|data| Tensor::new(self.nodes[i].value.shape().to_vec(), data).expect("gradient shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, output: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let wants = |id: NodeId| self.nodes[id.0].needs_grad;
        match op {
            Op::Input | Op::Param => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                spec,
                geo,
            } => {
                let (di, dk, db) = ops::conv2d_backward(
                    self.value(*input).data(),
                    geo,
                    self.value(*kernel).data(),
                    spec,
                    g,
                    wants(*input),
                );
                if let Some(di) = di {
                    accumulate(grads, *input, &di);
                }
                accumulate(grads, *kernel, &dk);
                accumulate(grads, *bias, &db);
            }
            Op::Depthwise {
                input,
                kernel,
                bias,
                spec,
                geo,
            } => {
                let (di, dk, db) = ops::depthwise_backward(
                    self.value(*input).data(),
                    geo,
                    self.value(*kernel).data(),
                    spec,
                    g,
                    wants(*input),
                );
                if let Some(di) = di {
                    accumulate(grads, *input, &di);
                }
                accumulate(grads, *kernel, &dk);
                accumulate(grads, *bias, &db);
            }
            Op::MaxPool { input, argmax } => {
                let mut di = vec![0.0; self.value(*input).len()];
                for (&src, &gv) in argmax.iter().zip(g) {
                    di[src] += gv;
                }
                accumulate(grads, *input, &di);
            }
            Op::Relu { input } => {
                let x = self.value(*input).data();
                let di: Vec<f64> = x
                    .iter()
                    .zip(g)
                    .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                accumulate(grads, *input, &di);
            }
            Op::Add { lhs, rhs } => {
                accumulate(grads, *lhs, g);
                accumulate(grads, *rhs, g);
            }
            Op::Concat { parts } => {
                let depths: Vec<usize> = parts.iter().map(|&p| self.value(p).shape()[2]).collect();
                let total: usize = depths.iter().sum();
                let pixels = g.len() / total;
                let mut offset = 0;
                for (&p, &d) in parts.iter().zip(&depths) {
                    let mut dp = Vec::with_capacity(pixels * d);
                    for px in 0..pixels {
                        dp.extend_from_slice(&g[px * total + offset..][..d]);
                    }
                    accumulate(grads, p, &dp);
                    offset += d;
                }
            }
            Op::GlobalAvgPool { input } => {
                let t = self.value(*input);
                let d = g.len();
                let n = (t.len() / d) as f64;
                let mut di = Vec::with_capacity(t.len());
                for _ in 0..t.len() / d {
                    di.extend(g.iter().map(|v| v / n));
                }
                accumulate(grads, *input, &di);
            }
            Op::Softmax { input } => {
                let probs = output.data();
                let dot: f64 = probs.iter().zip(g).map(|(a, b)| a * b).sum();
                let di: Vec<f64> = probs.iter().zip(g).map(|(pv, gv)| pv * (gv - dot)).collect();
                accumulate(grads, *input, &di);
            }
            Op::SoftmaxCrossEntropy { logits, target, probs } => {
                let mut di: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                di[*target] -= g[0];
                accumulate(grads, *logits, &di);
            }
            Op::SumSquares { inputs, scale } => {
                for &i in inputs {
                    let di: Vec<f64> = self.value(i).data().iter().map(|v| 2.0 * scale * v * g[0]).collect();
                    accumulate(grads, i, &di);
                }
            }
            Op::Sum { inputs } => {
                for &i in inputs {
                    accumulate(grads, i, g);
                }
            }
            Op::Scale { input, factor } => {
                let di: Vec<f64> = g.iter().map(|v| v * factor).collect();
                accumulate(grads, *input, &di);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, g: &[f64]) {
    match &mut grads[id.0] {
        Some(acc) => {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Result of [`GradTape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `id`, if the loss depends on it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}
