use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, Tensor};

use super::config::AggNetConfig;

/// Kernel and bias of one convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub kernel: T,
    pub bias: T,
}

/// Parameters of one multi-scale residual encoder module.
#[derive(Debug, Clone, PartialEq)]
pub struct MsEncParams<T = Tensor> {
    /// 3×3 stride-2 convolution producing the residual map.
    pub residual: ConvLayer<T>,
    /// 3×3 dilated convolutions, in increasing dilation order.
    pub branches: [ConvLayer<T>; 3],
    /// Depthwise half of the separable convolution, kernel `(3, 3, 3·branch)`.
    pub depthwise: ConvLayer<T>,
    /// Pointwise half, kernel `(1, 1, 3·branch, depth)`.
    pub pointwise: ConvLayer<T>,
}

/// All learnable tensors of the network, generic over the handle type so the
/// same layout serves owned tensors, tape nodes and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers<T> {
    pub stem: ConvLayer<T>,
    pub modules: [MsEncParams<T>; 4],
    pub head: ConvLayer<T>,
}

pub type AggNetParams = Layers<Tensor>;

/// Whether a tensor is a kernel (regularised) or a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Kernel,
    Bias,
}

impl<T> ConvLayer<T> {
    fn map<'a, U>(&'a self, f: &mut impl FnMut(&'a T, ParamKind) -> U) -> ConvLayer<U> {
        ConvLayer {
            kernel: f(&self.kernel, ParamKind::Kernel),
            bias: f(&self.bias, ParamKind::Bias),
        }
    }
}

impl<T> MsEncParams<T> {
    fn map<'a, U>(&'a self, f: &mut impl FnMut(&'a T, ParamKind) -> U) -> MsEncParams<U> {
        let residual = self.residual.map(f);
        let b0 = self.branches[0].map(f);
        let b1 = self.branches[1].map(f);
        let b2 = self.branches[2].map(f);
        let depthwise = self.depthwise.map(f);
        let pointwise = self.pointwise.map(f);
        MsEncParams {
            residual,
            branches: [b0, b1, b2],
            depthwise,
            pointwise,
        }
    }

    fn layers(&self) -> [&ConvLayer<T>; 6] {
        [
            &self.residual,
            &self.branches[0],
            &self.branches[1],
            &self.branches[2],
            &self.depthwise,
            &self.pointwise,
        ]
    }
}

impl<T> Layers<T> {
    /// Applies `f` to every tensor in declaration order.
    pub fn map<'a, U>(&'a self, mut f: impl FnMut(&'a T, ParamKind) -> U) -> Layers<U> {
        let stem = self.stem.map(&mut f);
        let m0 = self.modules[0].map(&mut f);
        let m1 = self.modules[1].map(&mut f);
        let m2 = self.modules[2].map(&mut f);
        let m3 = self.modules[3].map(&mut f);
        let head = self.head.map(&mut f);
        Layers {
            stem,
            modules: [m0, m1, m2, m3],
            head,
        }
    }

    fn conv_layers(&self) -> Vec<&ConvLayer<T>> {
        let mut out = vec![&self.stem];
        for m in &self.modules {
            out.extend(m.layers());
        }
        out.push(&self.head);
        out
    }

    /// Every tensor in declaration order: stem, modules (residual, three
    /// branches, depthwise, pointwise), head; kernel before bias.
    pub fn iter(&self) -> impl Iterator<Item = (&T, ParamKind)> {
        self.conv_layers()
            .into_iter()
            .flat_map(|l| [(&l.kernel, ParamKind::Kernel), (&l.bias, ParamKind::Bias)])
    }

    /// Mutable counterpart of [`Layers::iter`].
    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&mut T, ParamKind)> {
        let mut layers: Vec<&mut ConvLayer<T>> = vec![&mut self.stem];
        for m in &mut self.modules {
            layers.push(&mut m.residual);
            layers.extend(m.branches.iter_mut());
            layers.push(&mut m.depthwise);
            layers.push(&mut m.pointwise);
        }
        layers.push(&mut self.head);
        layers
            .into_iter()
            .flat_map(|l| [(&mut l.kernel, ParamKind::Kernel), (&mut l.bias, ParamKind::Bias)])
    }

    /// Rebuilds a layout from tensors in declaration order.
    pub fn from_ordered(values: Vec<T>) -> Result<Self> {
        if values.len() != TENSOR_COUNT {
            return Err(Error::contract(format!(
                "expected {TENSOR_COUNT} parameter tensors, got {}",
                values.len()
            )));
        }
        let mut it = values.into_iter();
        let mut layer = || ConvLayer {
            kernel: it.next().expect("counted"),
            bias: it.next().expect("counted"),
        };
        let stem = layer();
        let mut module = || MsEncParams {
            residual: layer(),
            branches: [layer(), layer(), layer()],
            depthwise: layer(),
            pointwise: layer(),
        };
        let modules = [module(), module(), module(), module()];
        let head = layer();
        Ok(Layers { stem, modules, head })
    }
}

impl<T: Clone> Layers<T> {
    pub fn to_vec(&self) -> Vec<T> {
        self.iter().map(|(t, _)| t.clone()).collect()
    }
}

pub const TENSOR_COUNT: usize = 2 + 4 * 12 + 2;

/// Convolution geometry of every layer for a given configuration.
#[derive(Debug, Clone)]
pub(crate) struct LayerSpecs {
    pub stem: ConvSpec,
    pub modules: [ModuleSpecs; 4],
    pub head: ConvSpec,
}

#[derive(Debug, Clone)]
pub(crate) struct ModuleSpecs {
    pub residual: ConvSpec,
    pub branches: [ConvSpec; 3],
    pub depthwise_shape: [usize; 3],
    pub pointwise: ConvSpec,
}

impl LayerSpecs {
    pub fn new(cfg: &AggNetConfig) -> Self {
        let dil = cfg.variant.dilations();
        let modules = std::array::from_fn(|i| {
            let cin = cfg.module_input_depth(i);
            let d = cfg.module_depths[i];
            let b = cfg.branch_depths[i];
            ModuleSpecs {
                residual: ConvSpec::same(3, cin, d).with_stride(2),
                branches: dil.map(|dr| ConvSpec::same(3, cin, b).with_dilation(dr)),
                depthwise_shape: [3, 3, 3 * b],
                pointwise: ConvSpec::same(1, 3 * b, d),
            }
        });
        Self {
            stem: ConvSpec::same(3, cfg.input_channels, cfg.stem_depth),
            modules,
            head: ConvSpec::same(1, cfg.module_depths[3], cfg.class_count),
        }
    }

    /// Shapes of every tensor, as a layout.
    pub fn shapes(&self) -> Layers<Vec<usize>> {
        let conv = |s: &ConvSpec| ConvLayer {
            kernel: s.kernel_shape(),
            bias: vec![s.out_depth],
        };
        Layers {
            stem: conv(&self.stem),
            modules: std::array::from_fn(|i| {
                let m = &self.modules[i];
                MsEncParams {
                    residual: conv(&m.residual),
                    branches: [conv(&m.branches[0]), conv(&m.branches[1]), conv(&m.branches[2])],
                    depthwise: ConvLayer {
                        kernel: m.depthwise_shape.to_vec(),
                        bias: vec![m.depthwise_shape[2]],
                    },
                    pointwise: conv(&m.pointwise),
                }
            }),
            head: conv(&self.head),
        }
    }
}

/// He-normal initialisation: i.i.d. `N(0, 2 / fan_in)`.
///
/// The fan-in is `k·k·in` for `(k, k, in, out)` kernels and `k·k` for
/// depthwise `(k, k, c)` kernels. Rank-1 shapes are biases and come back as
/// zeros.
pub fn he_init(shape: &[usize], rng: &mut impl rand::Rng) -> Tensor {
    let fan_in = match *shape {
        [k1, k2, cin, _] => k1 * k2 * cin,
        [k1, k2, _] => k1 * k2,
        [_] => return Tensor::zeros(shape.to_vec()),
        _ => shape.iter().take(shape.len().saturating_sub(1)).product(),
    };
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

impl AggNetParams {
    /// Fresh parameters for `cfg`, deterministic in `seed`.
    pub fn init(cfg: &AggNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(LayerSpecs::new(cfg).shapes().map(|shape, _| he_init(shape, &mut rng)))
    }

    pub fn zeros(cfg: &AggNetConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(LayerSpecs::new(cfg)
            .shapes()
            .map(|shape, _| Tensor::zeros(shape.clone())))
    }

    pub fn param_count(&self) -> usize {
        self.iter().map(|(t, _)| t.len()).sum()
    }

    /// Checks that every tensor has the shape `cfg` implies.
    pub fn check_shapes(&self, cfg: &AggNetConfig) -> Result<()> {
        let expected = LayerSpecs::new(cfg).shapes();
        for (i, ((t, _), (s, _))) in self.iter().zip(expected.iter()).enumerate() {
            if t.shape() != s.as_slice() {
                return Err(Error::contract(format!(
                    "parameter tensor {i} has shape {:?}, configuration implies {s:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Variant;

    #[test]
    fn he_variance_matches_fan_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        // (1, 1, 2, n) kernel: fan_in 2, variance 1
        let t = he_init(&[1, 1, 2, 500_000], &mut rng);
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn he_is_reproducible_and_biases_zero() {
        let a = he_init(&[3, 3, 4, 5], &mut ChaCha8Rng::seed_from_u64(7));
        let b = he_init(&[3, 3, 4, 5], &mut ChaCha8Rng::seed_from_u64(7));
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let bias = he_init(&[16], &mut ChaCha8Rng::seed_from_u64(7));
        assert!(bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variants_share_parameter_count() {
        for depths in [(32, [64, 128, 256, 256]), (4, [6, 8, 8, 10])] {
            let ms = AggNetConfig::new(Variant::Ms, 9).with_depths(depths.0, depths.1);
            let base = ms.clone().with_variant(Variant::Base);
            let a = AggNetParams::zeros(&ms).unwrap().param_count();
            let b = AggNetParams::zeros(&base).unwrap().param_count();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ordered_round_trip() {
        let cfg = AggNetConfig::new(Variant::Ms, 3).with_depths(4, [4, 4, 6, 6]);
        let p = AggNetParams::init(&cfg, 1).unwrap();
        let flat = p.to_vec();
        assert_eq!(flat.len(), TENSOR_COUNT);
        let back = AggNetParams::from_ordered(flat).unwrap();
        assert_eq!(back, p);
        back.check_shapes(&cfg).unwrap();
        assert!(back
            .check_shapes(&AggNetConfig::new(Variant::Ms, 4).with_depths(4, [4, 4, 6, 6]))
            .is_err());
    }
}
