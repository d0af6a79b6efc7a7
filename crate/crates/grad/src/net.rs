//! Residual energy network: 3x3 stem convolution, a stack of pre-activation
//! residual blocks, global sum pooling and a scalar dense head.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GradError, Result};
use crate::layers::{self, KernelShape};
use crate::params::{LayerParams, ParamId, ParamTensor};
use crate::scalar::Scalar;
use crate::tape::{Gradients, Tape, Var, Wants};
use crate::tensor::RealTensor;

/// Residual block flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Same channels and resolution; identity shortcut.
    Plain,
    /// Stride-2 first convolution, doubled channels, 1x1 stride-2 shortcut.
    Down,
}

/// Layer layout of an [`EnergyNet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub in_channels: usize,
    pub base_width: usize,
    pub blocks: Vec<BlockKind>,
}

impl Default for Architecture {
    /// 64-wide stem, blocks 64 -> 128 -> 128 -> 256.
    fn default() -> Self {
        Self::with_width(64)
    }
}

impl Architecture {
    pub fn with_width(base_width: usize) -> Self {
        Self {
            in_channels: 2,
            base_width,
            blocks: vec![BlockKind::Plain, BlockKind::Down, BlockKind::Plain, BlockKind::Down],
        }
    }

    pub fn downsamples(&self) -> u32 {
        self.blocks.iter().filter(|b| **b == BlockKind::Down).count() as u32
    }

    /// Channel count entering the dense head.
    pub fn feature_width(&self) -> usize {
        self.base_width << self.downsamples()
    }

    /// Compact text form, e.g. `in=2;width=64;blocks=PDPD`.
    pub fn descriptor(&self) -> String {
        let blocks: String = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockKind::Plain => 'P',
                BlockKind::Down => 'D',
            })
            .collect();
        format!("in={};width={};blocks={}", self.in_channels, self.base_width, blocks)
    }

    pub fn parse_descriptor(s: &str) -> Result<Self> {
        let bad = || GradError::Parameter(format!("malformed architecture descriptor {s:?}"));
        let mut in_channels = None;
        let mut width = None;
        let mut blocks = None;
        for part in s.split(';') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k {
                "in" => in_channels = Some(v.parse().map_err(|_| bad())?),
                "width" => width = Some(v.parse().map_err(|_| bad())?),
                "blocks" => {
                    blocks = Some(
                        v.chars()
                            .map(|c| match c {
                                'P' => Ok(BlockKind::Plain),
                                'D' => Ok(BlockKind::Down),
                                _ => Err(bad()),
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => return Err(bad()),
            }
        }
        let arch = Self {
            in_channels: in_channels.ok_or_else(bad)?,
            base_width: width.ok_or_else(bad)?,
            blocks: blocks.ok_or_else(bad)?,
        };
        if arch.in_channels == 0 || arch.base_width == 0 {
            return Err(bad());
        }
        Ok(arch)
    }
}

#[derive(Debug, Clone)]
struct BlockIds {
    kind: BlockKind,
    conv1: (ParamId, ParamId),
    conv2: (ParamId, ParamId),
    proj: Option<ParamId>,
}

#[derive(Debug, Clone)]
struct Layout {
    stem: (ParamId, ParamId),
    blocks: Vec<BlockIds>,
    head: (ParamId, ParamId),
}

fn build_layout<T: Scalar>(arch: &Architecture) -> (LayerParams<T>, Layout) {
    let mut p = LayerParams::new();
    let w = arch.base_width;
    let stem = (
        p.push(ParamTensor::zeros("stem.kernel", vec![w, arch.in_channels, 3, 3])),
        p.push(ParamTensor::zeros("stem.bias", vec![w])),
    );
    let mut ch = w;
    let mut blocks = Vec::new();
    for (i, &kind) in arch.blocks.iter().enumerate() {
        let out = match kind {
            BlockKind::Plain => ch,
            BlockKind::Down => ch * 2,
        };
        let conv1 = (
            p.push(ParamTensor::zeros(format!("block{i}.conv1.kernel"), vec![out, ch, 3, 3])),
            p.push(ParamTensor::zeros(format!("block{i}.conv1.bias"), vec![out])),
        );
        let conv2 = (
            p.push(ParamTensor::zeros(format!("block{i}.conv2.kernel"), vec![out, out, 3, 3])),
            p.push(ParamTensor::zeros(format!("block{i}.conv2.bias"), vec![out])),
        );
        let proj = (kind == BlockKind::Down)
            .then(|| p.push(ParamTensor::zeros(format!("block{i}.proj.kernel"), vec![out, ch, 1, 1])));
        blocks.push(BlockIds { kind, conv1, conv2, proj });
        ch = out;
    }
    let head = (
        p.push(ParamTensor::zeros("head.weight", vec![ch])),
        p.push(ParamTensor::zeros("head.bias", vec![1])),
    );
    (p, Layout { stem, blocks, head })
}

/// Parameters of one residual block, borrowed from a full parameter set.
#[derive(Debug, Clone, Copy)]
pub struct BlockParams<'a, T> {
    pub conv1_kernel: &'a ParamTensor<T>,
    pub conv1_bias: &'a ParamTensor<T>,
    pub conv2_kernel: &'a ParamTensor<T>,
    pub conv2_bias: &'a ParamTensor<T>,
    /// 1x1 projection for downsampling blocks.
    pub proj_kernel: Option<&'a ParamTensor<T>>,
}

fn kshape<T>(p: &ParamTensor<T>) -> Result<KernelShape> {
    match p.shape.as_slice() {
        &[o, i, kh, kw] => Ok(KernelShape::new(o, i, kh, kw)),
        _ => Err(GradError::Shape(format!("{} is not a 4-D kernel", p.name))),
    }
}

/// Tape-free residual block: `shortcut(x) + conv2(swish(conv1(swish(x))))`.
pub fn resblock<T: Scalar>(x: &RealTensor<T>, p: BlockParams<'_, T>, downsample: bool) -> Result<RealTensor<T>> {
    let stride = if downsample { 2 } else { 1 };
    let a = layers::swish(x);
    let a = layers::conv2d(&a, &p.conv1_kernel.data, kshape(p.conv1_kernel)?, Some(&p.conv1_bias.data), stride)?;
    let a = layers::swish(&a);
    let a = layers::conv2d(&a, &p.conv2_kernel.data, kshape(p.conv2_kernel)?, Some(&p.conv2_bias.data), 1)?;
    let shortcut = match (downsample, p.proj_kernel) {
        (false, _) => x.clone(),
        (true, Some(k)) => layers::conv2d(x, &k.data, kshape(k)?, None, 2)?,
        (true, None) => {
            return Err(GradError::Shape("downsampling block needs a projection kernel".into()))
        }
    };
    shortcut.add(&a)
}

/// Scalar-valued residual energy network `E(x)`.
#[derive(Debug, Clone)]
pub struct EnergyNet<T> {
    arch: Architecture,
    params: LayerParams<T>,
    layout: Layout,
}

impl<T: Scalar> EnergyNet<T> {
    /// All-zero network.
    pub fn zeros(arch: Architecture) -> Self {
        let (params, layout) = build_layout(&arch);
        Self { arch, params, layout }
    }

    /// Kernels drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        for t in net.params.tensors_mut() {
            if t.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = t.shape.iter().skip(1).product::<usize>().max(1);
            let fan_in = if t.shape.len() == 1 { t.shape[0] } else { fan_in };
            let scale = 1.0 / (fan_in as f64).sqrt();
            for v in &mut t.data {
                let z: f64 = StandardNormal.sample(rng);
                *v = T::from_f64_lossy(z * scale);
            }
        }
        net
    }

    /// Rebuilds a network from stored parameters, checking the layout.
    pub fn from_params(arch: Architecture, params: LayerParams<T>) -> Result<Self> {
        let (expected, layout) = build_layout::<T>(&arch);
        expected.check_layout(&params)?;
        Ok(Self { arch, params, layout })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &LayerParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut LayerParams<T> {
        &mut self.params
    }

    pub fn block_params(&self, i: usize) -> BlockParams<'_, T> {
        let b = &self.layout.blocks[i];
        BlockParams {
            conv1_kernel: self.params.get(b.conv1.0),
            conv1_bias: self.params.get(b.conv1.1),
            conv2_kernel: self.params.get(b.conv2.0),
            conv2_bias: self.params.get(b.conv2.1),
            proj_kernel: b.proj.map(|id| self.params.get(id)),
        }
    }

    pub fn check_input(&self, x: &RealTensor<T>) -> Result<()> {
        if x.channels() != self.arch.in_channels {
            return Err(GradError::Shape(format!(
                "energy input has {} channels, network expects {}",
                x.channels(),
                self.arch.in_channels
            )));
        }
        let m = 1usize << self.arch.downsamples();
        if x.height() % m != 0 || x.width() % m != 0 || x.height() == 0 || x.width() == 0 {
            return Err(GradError::Shape(format!(
                "spatial size {}x{} not divisible by {}",
                x.height(),
                x.width(),
                m
            )));
        }
        Ok(())
    }

    /// Globally pooled features feeding the dense head, `(b, f, 1, 1)`.
    pub fn pooled_features(&self, x: &RealTensor<T>) -> Result<RealTensor<T>> {
        self.check_input(x)?;
        let stem_k = self.params.get(self.layout.stem.0);
        let mut h = layers::conv2d(x, &stem_k.data, kshape(stem_k)?, Some(&self.params.get(self.layout.stem.1).data), 1)?;
        for (i, b) in self.layout.blocks.iter().enumerate() {
            h = resblock(&h, self.block_params(i), b.kind == BlockKind::Down)?;
        }
        Ok(layers::global_sum_pool(&layers::swish(&h)))
    }

    /// Energy of each batch item, evaluated without a tape.
    pub fn energy(&self, x: &RealTensor<T>) -> Result<Vec<T>> {
        let pooled = self.pooled_features(x)?;
        let (w, b) = self.layout.head;
        let e = layers::dense(&pooled, &self.params.get(w).data, self.params.get(b).data[0])?;
        Ok(e.into_data())
    }

    /// Records the forward pass on `tape`, returning the `(b, 1, 1, 1)` energy node.
    pub fn forward<'p>(&'p self, tape: &mut Tape<'p, T>, x: RealTensor<T>) -> Result<Var> {
        self.check_input(&x)?;
        let x = tape.input(x)?;
        let mut h = tape.conv2d(x, self.layout.stem.0, Some(self.layout.stem.1), 1)?;
        for b in &self.layout.blocks {
            let stride = if b.kind == BlockKind::Down { 2 } else { 1 };
            let a = tape.swish(h);
            let a = tape.conv2d(a, b.conv1.0, Some(b.conv1.1), stride)?;
            let a = tape.swish(a);
            let a = tape.conv2d(a, b.conv2.0, Some(b.conv2.1), 1)?;
            let shortcut = match b.proj {
                Some(k) => tape.conv2d(h, k, None, 2)?,
                None => h,
            };
            h = tape.add(shortcut, a)?;
        }
        let h = tape.swish(h);
        let pooled = tape.global_sum_pool(h);
        tape.dense(pooled, self.layout.head.0, self.layout.head.1)
    }

    /// Forward + backward with per-item weights on the energies.
    ///
    /// The returned gradients are those of `sum_b weights[b] * E(x_b)`.
    pub fn weighted_gradients(&self, x: &RealTensor<T>, weights: &[T], wants: Wants) -> Result<(Vec<T>, Gradients<T>)> {
        self.gradients_with(x, wants, |_| weights.to_vec())
    }

    /// Like [`EnergyNet::weighted_gradients`], with the weights computed from
    /// the forward energies (for losses that are nonlinear in `E`).
    pub fn gradients_with(
        &self,
        x: &RealTensor<T>,
        wants: Wants,
        weights: impl FnOnce(&[T]) -> Vec<T>,
    ) -> Result<(Vec<T>, Gradients<T>)> {
        let mut tape = Tape::new(&self.params);
        let e = self.forward(&mut tape, x.clone())?;
        let energies = tape.value(e).data().to_vec();
        let weights = weights(&energies);
        if weights.len() != x.batch() {
            return Err(GradError::Shape(format!(
                "{} weights for batch of {}",
                weights.len(),
                x.batch()
            )));
        }
        let seed = RealTensor::new([x.batch(), 1, 1, 1], weights)?;
        let grads = tape.backward(e, seed, wants)?;
        Ok((energies, grads))
    }

    /// Energies and `dE/dx` per batch item.
    pub fn grad_input(&self, x: &RealTensor<T>) -> Result<(Vec<T>, RealTensor<T>)> {
        let ones = vec![T::one(); x.batch()];
        let (e, g) = self.weighted_gradients(x, &ones, Wants::INPUT)?;
        Ok((e, g.input.expect("input gradient requested")))
    }

    /// Energies and `d(sum_b E(x_b))/dtheta`.
    pub fn grad_params(&self, x: &RealTensor<T>) -> Result<(Vec<T>, LayerParams<T>)> {
        let ones = vec![T::one(); x.batch()];
        let (e, g) = self.weighted_gradients(x, &ones, Wants::PARAMS)?;
        Ok((e, g.params.expect("parameter gradient requested")))
    }

    pub fn cast<U: Scalar>(&self) -> EnergyNet<U> {
        EnergyNet {
            arch: self.arch.clone(),
            params: self.params.cast(),
            layout: self.layout.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_architecture_widths() {
        let arch = Architecture::default();
        assert_eq!(arch.feature_width(), 256);
        let net = EnergyNet::<f32>::zeros(arch);
        let names: Vec<_> = net.params().tensors().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names.first(), Some(&"stem.kernel"));
        assert_eq!(net.params().find("block3.conv2.kernel").unwrap().shape, vec![256, 256, 3, 3]);
        assert_eq!(net.params().find("head.weight").unwrap().shape, vec![256]);
    }

    #[test]
    fn descriptor_round_trip() {
        let arch = Architecture::with_width(8);
        assert_eq!(Architecture::parse_descriptor(&arch.descriptor()).unwrap(), arch);
        assert!(Architecture::parse_descriptor("in=2;width=8;blocks=PX").is_err());
    }

    #[test]
    fn zero_network_has_zero_energy() {
        let net = EnergyNet::<f64>::zeros(Architecture::with_width(4));
        let x = RealTensor::from_fn([2, 2, 8, 8], |i| (i as f64).sin()).unwrap();
        assert_eq!(net.energy(&x).unwrap(), vec![0.0, 0.0]);
        let (_, g) = net.grad_input(&x).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indivisible_input_is_rejected() {
        let net = EnergyNet::<f64>::zeros(Architecture::with_width(4));
        let x = RealTensor::zeros([1, 2, 6, 8]);
        assert!(matches!(net.energy(&x), Err(GradError::Shape(_))));
        let x = RealTensor::zeros([1, 3, 8, 8]);
        assert!(matches!(net.energy(&x), Err(GradError::Shape(_))));
    }

    #[test]
    fn tape_and_straight_line_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = EnergyNet::<f64>::init(Architecture::with_width(4), &mut rng);
        let x = RealTensor::from_fn([3, 2, 8, 8], |i| (i as f64 * 0.31).cos()).unwrap();
        let direct = net.energy(&x).unwrap();
        let (taped, _) = net.grad_input(&x).unwrap();
        for (a, b) in direct.iter().zip(&taped) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert_eq!(net.energy(&x).unwrap(), direct);
    }
}
