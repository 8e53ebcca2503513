//! The AggNet forward pass, written once over a small graph-builder trait so
//! that the same wiring drives eager inference and gradient recording.

use crate::error::{Error, Result};
use crate::ops::{self, ConvGeometry};
use crate::tape::{GradTape, NodeId};
use crate::tensor::{ConvSpec, FeatureMap, Tensor};

use super::config::{AggNetConfig, Variant, MIN_INPUT_SIZE};
use super::labels::GradingCurveLabel;
use super::params::{AggNetParams, ConvLayer, LayerSpecs, Layers, ModuleSpecs, MsEncParams};

pub(crate) trait Graph {
    type Var;
    type Param: Copy;

    fn conv(&mut self, x: &Self::Var, layer: &ConvLayer<Self::Param>, spec: ConvSpec) -> Result<Self::Var>;
    fn depthwise(&mut self, x: &Self::Var, layer: &ConvLayer<Self::Param>) -> Result<Self::Var>;
    fn max_pool(&mut self, x: &Self::Var) -> Result<Self::Var>;
    fn relu(&mut self, x: Self::Var) -> Result<Self::Var>;
    fn add(&mut self, a: Self::Var, b: Self::Var) -> Result<Self::Var>;
    fn concat(&mut self, parts: [Self::Var; 3]) -> Result<Self::Var>;
}

/// Value-only evaluation; intermediates are dropped as soon as possible.
pub(crate) struct Eager<'a>(std::marker::PhantomData<&'a Tensor>);

impl Eager<'_> {
    pub(crate) fn new() -> Self {
        Eager(std::marker::PhantomData)
    }
}

impl<'a> Graph for Eager<'a> {
    type Var = FeatureMap;
    type Param = &'a Tensor;

    fn conv(&mut self, x: &FeatureMap, layer: &ConvLayer<&Tensor>, spec: ConvSpec) -> Result<FeatureMap> {
        ops::check_conv_shapes(x.depth(), layer.kernel, layer.bias.data(), &spec)?;
        let geo = ConvGeometry::new(x.height(), x.width(), &spec)?;
        let out = ops::conv2d_raw(x.data(), &geo, layer.kernel.data(), layer.bias.data(), &spec);
        Ok(FeatureMap::from_raw(geo.out_h, geo.out_w, spec.out_depth, out))
    }

    fn depthwise(&mut self, x: &FeatureMap, layer: &ConvLayer<&Tensor>) -> Result<FeatureMap> {
        ops::depthwise_conv2d(x, layer.kernel, layer.bias.data())
    }

    fn max_pool(&mut self, x: &FeatureMap) -> Result<FeatureMap> {
        Ok(ops::max_pool2d(x))
    }

    fn relu(&mut self, mut x: FeatureMap) -> Result<FeatureMap> {
        x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(x)
    }

    fn add(&mut self, mut a: FeatureMap, b: FeatureMap) -> Result<FeatureMap> {
        if (a.height(), a.width(), a.depth()) != (b.height(), b.width(), b.depth()) {
            return Err(Error::contract("residual and pooled branches differ in shape"));
        }
        a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        Ok(a)
    }

    fn concat(&mut self, parts: [FeatureMap; 3]) -> Result<FeatureMap> {
        ops::concat_depth(&[&parts[0], &parts[1], &parts[2]])
    }
}

impl Graph for GradTape<'_> {
    type Var = NodeId;
    type Param = NodeId;

    fn conv(&mut self, x: &NodeId, layer: &ConvLayer<NodeId>, spec: ConvSpec) -> Result<NodeId> {
        self.conv2d(*x, layer.kernel, layer.bias, spec)
    }

    fn depthwise(&mut self, x: &NodeId, layer: &ConvLayer<NodeId>) -> Result<NodeId> {
        self.depthwise_conv2d(*x, layer.kernel, layer.bias)
    }

    fn max_pool(&mut self, x: &NodeId) -> Result<NodeId> {
        self.max_pool2d(*x)
    }

    fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        GradTape::relu(self, x)
    }

    fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        GradTape::add(self, a, b)
    }

    fn concat(&mut self, parts: [NodeId; 3]) -> Result<NodeId> {
        GradTape::concat(self, &parts)
    }
}

fn msenc<G: Graph>(g: &mut G, x: G::Var, p: &MsEncParams<G::Param>, specs: &ModuleSpecs) -> Result<G::Var> {
    let residual = g.conv(&x, &p.residual, specs.residual)?;
    let b0 = g.conv(&x, &p.branches[0], specs.branches[0])?;
    let b1 = g.conv(&x, &p.branches[1], specs.branches[1])?;
    let b2 = g.conv(&x, &p.branches[2], specs.branches[2])?;
    drop(x);
    let multi = g.concat([b0, b1, b2])?;
    let spatial = g.depthwise(&multi, &p.depthwise)?;
    drop(multi);
    let mixed = g.conv(&spatial, &p.pointwise, specs.pointwise)?;
    drop(spatial);
    let pooled = g.max_pool(&mixed)?;
    let sum = g.add(residual, pooled)?;
    g.relu(sum)
}

/// Stem → four msEnc modules → 1×1 head. Returns the pre-pooling class map.
fn trunk<G: Graph>(g: &mut G, image: G::Var, p: &Layers<G::Param>, specs: &LayerSpecs) -> Result<G::Var> {
    let x = g.conv(&image, &p.stem, specs.stem)?;
    drop(image);
    let mut x = g.relu(x)?;
    for (m, s) in p.modules.iter().zip(&specs.modules) {
        x = msenc(g, x, m, s)?;
    }
    g.conv(&x, &p.head, specs.head)
}

fn check_image(image_dims: (usize, usize, usize), cfg: &AggNetConfig) -> Result<()> {
    let (h, w, d) = image_dims;
    if d != cfg.input_channels {
        return Err(Error::contract(format!(
            "network expects {} input channels, got {d}",
            cfg.input_channels
        )));
    }
    if h < MIN_INPUT_SIZE || w < MIN_INPUT_SIZE {
        return Err(Error::InputTooSmall {
            height: h,
            width: w,
            min: MIN_INPUT_SIZE,
        });
    }
    Ok(())
}

fn borrowed(params: &AggNetParams) -> Layers<&Tensor> {
    params.map(|t, _| t)
}

/// Pre-pooling head map (`h/16 × w/16 × N`, ceil) for one image.
pub fn head_map(image: &FeatureMap, params: &AggNetParams, cfg: &AggNetConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    check_image((image.height(), image.width(), image.depth()), cfg)?;
    if !image.is_finite() {
        return Err(Error::NonFinite("network input"));
    }
    let specs = LayerSpecs::new(cfg);
    let p = borrowed(params);
    trunk(&mut Eager::new(), image.clone(), &p, &specs)
}

/// Raw class scores `s` (global average of the head map).
pub fn aggnet_scores(image: &FeatureMap, params: &AggNetParams, cfg: &AggNetConfig) -> Result<Vec<f64>> {
    Ok(ops::global_avg_pool(&head_map(image, params, cfg)?))
}

/// Class probabilities for one rectified image.
pub fn aggnet_forward(image: &FeatureMap, params: &AggNetParams, cfg: &AggNetConfig) -> Result<Vec<f64>> {
    ops::softmax(&aggnet_scores(image, params, cfg)?)
}

/// One msEnc module on its own.
pub fn msenc_forward(input: &FeatureMap, params: &MsEncParams, variant: Variant) -> Result<FeatureMap> {
    let shape_of = |l: &ConvLayer<Tensor>| l.kernel.shape().to_vec();
    let res = shape_of(&params.residual);
    let br = shape_of(&params.branches[0]);
    let pw = shape_of(&params.pointwise);
    if res.len() != 4 || br.len() != 4 || pw.len() != 4 {
        return Err(Error::contract("msEnc kernels must be rank 4"));
    }
    let (cin, d, b) = (res[2], res[3], br[3]);
    let specs = ModuleSpecs {
        residual: ConvSpec::same(3, cin, d).with_stride(2),
        branches: variant
            .dilations()
            .map(|dr| ConvSpec::same(3, cin, b).with_dilation(dr)),
        depthwise_shape: [3, 3, 3 * b],
        pointwise: ConvSpec::same(1, 3 * b, pw[3]),
    };
    let p = MsEncParams {
        residual: ConvLayer {
            kernel: &params.residual.kernel,
            bias: &params.residual.bias,
        },
        branches: std::array::from_fn(|i| ConvLayer {
            kernel: &params.branches[i].kernel,
            bias: &params.branches[i].bias,
        }),
        depthwise: ConvLayer {
            kernel: &params.depthwise.kernel,
            bias: &params.depthwise.bias,
        },
        pointwise: ConvLayer {
            kernel: &params.pointwise.kernel,
            bias: &params.pointwise.bias,
        },
    };
    msenc(&mut Eager::new(), input.clone(), &p, &specs)
}

/// Parameter nodes plus the logits node of a recorded forward pass.
pub struct RecordedForward {
    pub params: Layers<NodeId>,
    pub scores: NodeId,
}

/// Records the forward pass up to the raw scores on `tape`.
pub fn record_forward<'p>(
    tape: &mut GradTape<'p>,
    image: FeatureMap,
    params: &'p AggNetParams,
    cfg: &AggNetConfig,
) -> Result<RecordedForward> {
    let nodes = params.map(|t, _| tape.param(t));
    let scores = record_with_nodes(tape, image, &nodes, cfg)?;
    Ok(RecordedForward { params: nodes, scores })
}

/// Same as [`record_forward`] with parameter nodes already on the tape.
pub fn record_with_nodes(
    tape: &mut GradTape<'_>,
    image: FeatureMap,
    nodes: &Layers<NodeId>,
    cfg: &AggNetConfig,
) -> Result<NodeId> {
    cfg.validate()?;
    check_image((image.height(), image.width(), image.depth()), cfg)?;
    let specs = LayerSpecs::new(cfg);
    let input = tape.input_map(image);
    let map = trunk(tape, input, nodes, &specs)?;
    tape.global_avg_pool(map)
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict_class(probs: &[f64]) -> GradingCurveLabel {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    GradingCurveLabel::new(best)
}
