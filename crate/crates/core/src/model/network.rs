//! Network assembly: stem, three downsampling entry modules, repeated
//! middle modules, a downsampling exit module, the tail and the head.
//! Forward and backward passes are written explicitly per stage; the
//! whole composition is verified against finite differences.

use super::descriptor::{ArchitectureDescriptor, ChannelPlan};
use super::layers::{
    global_avg_pool, global_avg_pool_backward, maxpool3x3s2, maxpool_backward, relu,
    relu_backward, BatchNorm2d, BnCache, Conv2d, DepthwiseConv2d, Linear, PoolCache, Scalar,
    SepCache, SeparableConv2d, TensorSlot,
};
use super::{ModelConfig, ModelError, Result};
use ndarray::{Array2, Array3, Array4, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub(super) fn separable_conv_raw<F: Scalar>(
    input: &Array4<F>,
    depthwise: &Array3<F>,
    pointwise: &Array4<F>,
    stride: usize,
) -> Array4<F> {
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let (c, kh, _) = depthwise.dim();
    let (oc, _, _, _) = pointwise.dim();
    let mut dw = DepthwiseConv2d::<F>::new("op.depthwise", c, kh, stride, &mut rng);
    dw.weight.assign(&depthwise.view().into_dyn());
    let mut pw = Conv2d::<F>::new("op.pointwise", c, oc, 1, 1, &mut rng);
    pw.weight.assign(&pointwise.view().into_dyn());
    pw.forward(&dw.forward(input))
}

struct Stem<F> {
    conv1: Conv2d<F>,
    bn1: BatchNorm2d<F>,
    conv2: Conv2d<F>,
    bn2: BatchNorm2d<F>,
}

struct StemCache<F> {
    x: Array4<F>,
    bn1: BnCache<F>,
    a1: Array4<F>,
    bn2: BnCache<F>,
    a2: Array4<F>,
}

impl<F: Scalar> Stem<F> {
    fn new(plan: &ChannelPlan, rng: &mut ChaCha20Rng) -> Self {
        Stem {
            conv1: Conv2d::new("stem.conv1", 3, plan.stem[0], 3, 2, rng),
            bn1: BatchNorm2d::new("stem.bn1", plan.stem[0]),
            conv2: Conv2d::new("stem.conv2", plan.stem[0], plan.stem[1], 3, 1, rng),
            bn2: BatchNorm2d::new("stem.bn2", plan.stem[1]),
        }
    }

    fn forward_eval(&self, x: &Array4<F>) -> Array4<F> {
        let a1 = relu(&self.bn1.forward_eval(&self.conv1.forward(x)));
        relu(&self.bn2.forward_eval(&self.conv2.forward(&a1)))
    }

    fn forward_train(&mut self, x: Array4<F>) -> (Array4<F>, StemCache<F>) {
        let z1 = self.conv1.forward(&x);
        let (h1, bn1) = self.bn1.forward_train(&z1);
        let a1 = relu(&h1);
        let z2 = self.conv2.forward(&a1);
        let (h2, bn2) = self.bn2.forward_train(&z2);
        let a2 = relu(&h2);
        (
            a2.clone(),
            StemCache {
                x,
                bn1,
                a1,
                bn2,
                a2,
            },
        )
    }

    fn backward(&mut self, cache: &StemCache<F>, grad_out: &Array4<F>) -> Array4<F> {
        let dh2 = relu_backward(grad_out, &cache.a2);
        let dz2 = self.bn2.backward(&cache.bn2, &dh2);
        let da1 = self.conv2.backward(&cache.a1, &dz2);
        let dh1 = relu_backward(&da1, &cache.a1);
        let dz1 = self.bn1.backward(&cache.bn1, &dh1);
        self.conv1.backward(&cache.x, &dz1)
    }

    fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        let mut s = self.conv1.slots();
        s.extend(self.bn1.slots());
        s.extend(self.conv2.slots());
        s.extend(self.bn2.slots());
        s
    }
}

/// Downsampling residual module (entry flow and exit flow): two separable
/// convolutions, 3x3/stride-2 max pooling, and a 1x1 stride-2 projection
/// shortcut. Entry module 1 skips the leading ReLU.
struct DownBlock<F> {
    pre_activate: bool,
    sep1: SeparableConv2d<F>,
    bn1: BatchNorm2d<F>,
    sep2: SeparableConv2d<F>,
    bn2: BatchNorm2d<F>,
    proj: Conv2d<F>,
    proj_bn: BatchNorm2d<F>,
}

struct DownCache<F> {
    x: Array4<F>,
    /// Post-pre-activation input; `None` when the block has no leading ReLU.
    a0: Option<Array4<F>>,
    sep1: SepCache<F>,
    bn1: BnCache<F>,
    a1: Array4<F>,
    sep2: SepCache<F>,
    bn2: BnCache<F>,
    pool: PoolCache,
    proj_bn: BnCache<F>,
}

impl<F: Scalar> DownBlock<F> {
    fn new(
        name: &str,
        in_c: usize,
        mid_c: usize,
        out_c: usize,
        pre_activate: bool,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        DownBlock {
            pre_activate,
            sep1: SeparableConv2d::new(&format!("{name}.sep1"), in_c, mid_c, 3, rng),
            bn1: BatchNorm2d::new(format!("{name}.bn1"), mid_c),
            sep2: SeparableConv2d::new(&format!("{name}.sep2"), mid_c, out_c, 3, rng),
            bn2: BatchNorm2d::new(format!("{name}.bn2"), out_c),
            proj: Conv2d::new(format!("{name}.proj"), in_c, out_c, 1, 2, rng),
            proj_bn: BatchNorm2d::new(format!("{name}.proj_bn"), out_c),
        }
    }

    fn forward_eval(&self, x: &Array4<F>) -> Array4<F> {
        let shortcut = self.proj_bn.forward_eval(&self.proj.forward(x));
        let a0 = if self.pre_activate { relu(x) } else { x.clone() };
        let a1 = relu(&self.bn1.forward_eval(&self.sep1.forward(&a0)));
        let h2 = self.bn2.forward_eval(&self.sep2.forward(&a1));
        let (pooled, _) = maxpool3x3s2(&h2);
        pooled + shortcut
    }

    fn forward_train(&mut self, x: Array4<F>) -> (Array4<F>, DownCache<F>) {
        let (proj_out, proj_bn) = {
            let p = self.proj.forward(&x);
            self.proj_bn.forward_train(&p)
        };
        let a0 = if self.pre_activate { Some(relu(&x)) } else { None };
        let main_in = a0.as_ref().unwrap_or(&x);
        let (p1, sep1) = self.sep1.forward_train(main_in);
        let (h1, bn1) = self.bn1.forward_train(&p1);
        let a1 = relu(&h1);
        let (p2, sep2) = self.sep2.forward_train(&a1);
        let (h2, bn2) = self.bn2.forward_train(&p2);
        let (pooled, pool) = maxpool3x3s2(&h2);
        let y = pooled + proj_out;
        (
            y,
            DownCache {
                x,
                a0,
                sep1,
                bn1,
                a1,
                sep2,
                bn2,
                pool,
                proj_bn,
            },
        )
    }

    fn backward(&mut self, cache: &DownCache<F>, grad_out: &Array4<F>) -> Array4<F> {
        // Main branch.
        let dh2 = maxpool_backward(grad_out, &cache.pool);
        let dp2 = self.bn2.backward(&cache.bn2, &dh2);
        let da1 = self.sep2.backward(&cache.a1, &cache.sep2, &dp2);
        let dh1 = relu_backward(&da1, &cache.a1);
        let dp1 = self.bn1.backward(&cache.bn1, &dh1);
        let main_in = cache.a0.as_ref().unwrap_or(&cache.x);
        let da0 = self.sep1.backward(main_in, &cache.sep1, &dp1);
        let dx_main = match &cache.a0 {
            Some(a0) => relu_backward(&da0, a0),
            None => da0,
        };
        // Shortcut branch.
        let dproj = self.proj_bn.backward(&cache.proj_bn, grad_out);
        let dx_short = self.proj.backward(&cache.x, &dproj);
        dx_main + dx_short
    }

    fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        let mut s = self.sep1.slots();
        s.extend(self.bn1.slots());
        s.extend(self.sep2.slots());
        s.extend(self.bn2.slots());
        s.extend(self.proj.slots());
        s.extend(self.proj_bn.slots());
        s
    }
}

/// Middle module: three pre-activated separable convolutions with an
/// identity shortcut.
struct MiddleBlock<F> {
    sep1: SeparableConv2d<F>,
    bn1: BatchNorm2d<F>,
    sep2: SeparableConv2d<F>,
    bn2: BatchNorm2d<F>,
    sep3: SeparableConv2d<F>,
    bn3: BatchNorm2d<F>,
}

struct MidCache<F> {
    a1: Array4<F>,
    sep1: SepCache<F>,
    bn1: BnCache<F>,
    a2: Array4<F>,
    sep2: SepCache<F>,
    bn2: BnCache<F>,
    a3: Array4<F>,
    sep3: SepCache<F>,
    bn3: BnCache<F>,
}

impl<F: Scalar> MiddleBlock<F> {
    fn new(name: &str, channels: usize, rng: &mut ChaCha20Rng) -> Self {
        MiddleBlock {
            sep1: SeparableConv2d::new(&format!("{name}.sep1"), channels, channels, 3, rng),
            bn1: BatchNorm2d::new(format!("{name}.bn1"), channels),
            sep2: SeparableConv2d::new(&format!("{name}.sep2"), channels, channels, 3, rng),
            bn2: BatchNorm2d::new(format!("{name}.bn2"), channels),
            sep3: SeparableConv2d::new(&format!("{name}.sep3"), channels, channels, 3, rng),
            bn3: BatchNorm2d::new(format!("{name}.bn3"), channels),
        }
    }

    fn forward_eval(&self, x: &Array4<F>) -> Array4<F> {
        let h1 = self.bn1.forward_eval(&self.sep1.forward(&relu(x)));
        let h2 = self.bn2.forward_eval(&self.sep2.forward(&relu(&h1)));
        let h3 = self.bn3.forward_eval(&self.sep3.forward(&relu(&h2)));
        h3 + x
    }

    fn forward_train(&mut self, x: Array4<F>) -> (Array4<F>, MidCache<F>) {
        let a1 = relu(&x);
        let (p1, sep1) = self.sep1.forward_train(&a1);
        let (h1, bn1) = self.bn1.forward_train(&p1);
        let a2 = relu(&h1);
        let (p2, sep2) = self.sep2.forward_train(&a2);
        let (h2, bn2) = self.bn2.forward_train(&p2);
        let a3 = relu(&h2);
        let (p3, sep3) = self.sep3.forward_train(&a3);
        let (h3, bn3) = self.bn3.forward_train(&p3);
        let y = h3 + &x;
        (
            y,
            MidCache {
                a1,
                sep1,
                bn1,
                a2,
                sep2,
                bn2,
                a3,
                sep3,
                bn3,
            },
        )
    }

    fn backward(&mut self, cache: &MidCache<F>, grad_out: &Array4<F>) -> Array4<F> {
        let dp3 = self.bn3.backward(&cache.bn3, grad_out);
        let da3 = self.sep3.backward(&cache.a3, &cache.sep3, &dp3);
        let dh2 = relu_backward(&da3, &cache.a3);
        let dp2 = self.bn2.backward(&cache.bn2, &dh2);
        let da2 = self.sep2.backward(&cache.a2, &cache.sep2, &dp2);
        let dh1 = relu_backward(&da2, &cache.a2);
        let dp1 = self.bn1.backward(&cache.bn1, &dh1);
        let da1 = self.sep1.backward(&cache.a1, &cache.sep1, &dp1);
        let dx_main = relu_backward(&da1, &cache.a1);
        dx_main + grad_out
    }

    fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        let mut s = self.sep1.slots();
        s.extend(self.bn1.slots());
        s.extend(self.sep2.slots());
        s.extend(self.bn2.slots());
        s.extend(self.sep3.slots());
        s.extend(self.bn3.slots());
        s
    }
}

/// Final feature module: two separable convolutions, no shortcut.
struct Tail<F> {
    sep1: SeparableConv2d<F>,
    bn1: BatchNorm2d<F>,
    sep2: SeparableConv2d<F>,
    bn2: BatchNorm2d<F>,
}

struct TailCache<F> {
    x: Array4<F>,
    sep1: SepCache<F>,
    bn1: BnCache<F>,
    a1: Array4<F>,
    sep2: SepCache<F>,
    bn2: BnCache<F>,
    a2: Array4<F>,
}

impl<F: Scalar> Tail<F> {
    fn new(plan: &ChannelPlan, rng: &mut ChaCha20Rng) -> Self {
        Tail {
            sep1: SeparableConv2d::new("tail.sep1", plan.exit_out, plan.tail[0], 3, rng),
            bn1: BatchNorm2d::new("tail.bn1", plan.tail[0]),
            sep2: SeparableConv2d::new("tail.sep2", plan.tail[0], plan.tail[1], 3, rng),
            bn2: BatchNorm2d::new("tail.bn2", plan.tail[1]),
        }
    }

    fn forward_eval(&self, x: &Array4<F>) -> Array4<F> {
        let a1 = relu(&self.bn1.forward_eval(&self.sep1.forward(x)));
        relu(&self.bn2.forward_eval(&self.sep2.forward(&a1)))
    }

    fn forward_train(&mut self, x: Array4<F>) -> (Array4<F>, TailCache<F>) {
        let (p1, sep1) = self.sep1.forward_train(&x);
        let (h1, bn1) = self.bn1.forward_train(&p1);
        let a1 = relu(&h1);
        let (p2, sep2) = self.sep2.forward_train(&a1);
        let (h2, bn2) = self.bn2.forward_train(&p2);
        let a2 = relu(&h2);
        (
            a2.clone(),
            TailCache {
                x,
                sep1,
                bn1,
                a1,
                sep2,
                bn2,
                a2,
            },
        )
    }

    fn backward(&mut self, cache: &TailCache<F>, grad_out: &Array4<F>) -> Array4<F> {
        let dh2 = relu_backward(grad_out, &cache.a2);
        let dp2 = self.bn2.backward(&cache.bn2, &dh2);
        let da1 = self.sep2.backward(&cache.a1, &cache.sep2, &dp2);
        let dh1 = relu_backward(&da1, &cache.a1);
        let dp1 = self.bn1.backward(&cache.bn1, &dh1);
        self.sep1.backward(&cache.x, &cache.sep1, &dp1)
    }

    fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        let mut s = self.sep1.slots();
        s.extend(self.bn1.slots());
        s.extend(self.sep2.slots());
        s.extend(self.bn2.slots());
        s
    }
}

/// Training-pass caches; feed to [`Network::backward`].
pub struct NetCache<F> {
    stem: StemCache<F>,
    entry: Vec<DownCache<F>>,
    middle: Vec<MidCache<F>>,
    exit: DownCache<F>,
    tail: TailCache<F>,
    feat_h: usize,
    feat_w: usize,
    pooled: Array2<F>,
}

/// The detector network. Immutable during inference; training mutation
/// (batch-norm statistics, gradient buffers) requires exclusive access.
pub struct Network<F> {
    pub config: ModelConfig,
    stem: Stem<F>,
    entry: Vec<DownBlock<F>>,
    middle: Vec<MiddleBlock<F>>,
    exit: DownBlock<F>,
    tail: Tail<F>,
    head: Linear<F>,
}

impl<F: Scalar> Network<F> {
    pub(super) fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let plan = ChannelPlan::of(config);
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let stem = Stem::new(&plan, &mut rng);
        let mut entry = Vec::new();
        let mut in_c = plan.stem[1];
        for (i, &out_c) in plan.entry.iter().enumerate() {
            entry.push(DownBlock::new(
                &format!("entry{}", i + 1),
                in_c,
                out_c,
                out_c,
                i > 0,
                &mut rng,
            ));
            in_c = out_c;
        }
        let middle = (0..config.middle_module_count)
            .map(|i| MiddleBlock::new(&format!("middle{}", i + 1), plan.middle, &mut rng))
            .collect();
        let exit = DownBlock::new("exit", plan.middle, plan.middle, plan.exit_out, true, &mut rng);
        let tail = Tail::new(&plan, &mut rng);
        let head = Linear::new("head", plan.tail[1], config.num_classes, &mut rng);
        Ok(Network {
            config: *config,
            stem,
            entry,
            middle,
            exit,
            tail,
            head,
        })
    }

    pub fn descriptor(&self) -> ArchitectureDescriptor {
        ArchitectureDescriptor::from_config(&self.config)
    }

    fn check_input(&self, x: &Array4<F>) -> Result<()> {
        let (_, c, h, w) = x.dim();
        if c != 3 || h != self.config.input_height || w != self.config.input_width {
            return Err(ModelError::ShapeMismatch {
                expected: format!("(N, 3, {}, {})", self.config.input_height, self.config.input_width),
                got: format!("{:?}", x.dim()),
            });
        }
        Ok(())
    }

    /// Inference-mode forward pass (running batch-norm statistics).
    pub fn forward(&self, x: &Array4<F>) -> Result<Array2<F>> {
        self.check_input(x)?;
        let mut h = self.stem.forward_eval(x);
        for block in &self.entry {
            h = block.forward_eval(&h);
        }
        for block in &self.middle {
            h = block.forward_eval(&h);
        }
        h = self.exit.forward_eval(&h);
        h = self.tail.forward_eval(&h);
        let pooled = global_avg_pool(&h);
        Ok(self.head.forward(&pooled))
    }

    /// Training-mode forward pass: batch statistics, caches for backward.
    pub fn forward_train(&mut self, x: Array4<F>) -> Result<(Array2<F>, NetCache<F>)> {
        self.check_input(&x)?;
        let (mut h, stem) = self.stem.forward_train(x);
        let mut entry_caches = Vec::with_capacity(self.entry.len());
        for block in &mut self.entry {
            let (next, cache) = block.forward_train(h);
            h = next;
            entry_caches.push(cache);
        }
        let mut middle_caches = Vec::with_capacity(self.middle.len());
        for block in &mut self.middle {
            let (next, cache) = block.forward_train(h);
            h = next;
            middle_caches.push(cache);
        }
        let (h, exit) = self.exit.forward_train(h);
        let (feat, tail) = self.tail.forward_train(h);
        let (_, _, feat_h, feat_w) = feat.dim();
        let pooled = global_avg_pool(&feat);
        let logits = self.head.forward(&pooled);
        Ok((
            logits,
            NetCache {
                stem,
                entry: entry_caches,
                middle: middle_caches,
                exit,
                tail,
                feat_h,
                feat_w,
                pooled,
            },
        ))
    }

    /// Accumulates parameter gradients from the loss gradient w.r.t. the
    /// logits. Call [`Network::zero_grads`] between steps.
    pub fn backward(&mut self, cache: &NetCache<F>, grad_logits: &Array2<F>) {
        let dpooled = self.head.backward(&cache.pooled, grad_logits);
        let mut grad = global_avg_pool_backward(&dpooled, cache.feat_h, cache.feat_w);
        grad = self.tail.backward(&cache.tail, &grad);
        grad = self.exit.backward(&cache.exit, &grad);
        for (block, bc) in self.middle.iter_mut().zip(&cache.middle).rev() {
            grad = block.backward(bc, &grad);
        }
        for (block, bc) in self.entry.iter_mut().zip(&cache.entry).rev() {
            grad = block.backward(bc, &grad);
        }
        self.stem.backward(&cache.stem, &grad);
    }

    pub(crate) fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        let mut s = self.stem.slots();
        for block in &mut self.entry {
            s.extend(block.slots());
        }
        for block in &mut self.middle {
            s.extend(block.slots());
        }
        s.extend(self.exit.slots());
        s.extend(self.tail.slots());
        s.extend(self.head.slots());
        s
    }

    /// Visits every trainable parameter as (name, value, grad).
    pub fn visit_trainable_mut(
        &mut self,
        f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>, ArrayViewD<'_, F>),
    ) {
        for slot in self.slots() {
            if let TensorSlot::Trainable { name, value, grad } = slot {
                f(&name, value.view_mut(), grad.view());
            }
        }
    }

    /// Visits every persistent tensor (parameters plus batch-norm
    /// statistics) as (name, value).
    pub fn visit_state_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<'_, F>)) {
        for slot in self.slots() {
            match slot {
                TensorSlot::Trainable { name, value, .. } => f(&name, value.view_mut()),
                TensorSlot::Buffer { name, value } => f(&name, value.view_mut()),
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for slot in self.slots() {
            if let TensorSlot::Trainable { grad, .. } = slot {
                grad.fill(F::zero());
            }
        }
    }

    /// Name of the first non-finite gradient entry, if any.
    pub fn first_non_finite_grad(&mut self) -> Option<String> {
        for slot in self.slots() {
            if let TensorSlot::Trainable { name, grad, .. } = slot {
                if grad.iter().any(|v| !v.is_finite()) {
                    return Some(name);
                }
            }
        }
        None
    }

    pub fn parameter_count(&mut self) -> usize {
        let mut total = 0;
        for slot in self.slots() {
            if let TensorSlot::Trainable { value, .. } = slot {
                total += value.len();
            }
        }
        total
    }

    /// Trainable parameter names and shapes in construction order.
    pub fn parameter_shapes(&mut self) -> Vec<(String, Vec<usize>)> {
        let mut shapes = Vec::new();
        for slot in self.slots() {
            if let TensorSlot::Trainable { name, value, .. } = slot {
                shapes.push((name, value.shape().to_vec()));
            }
        }
        shapes
    }

    /// Copies all persistent state from another network of the same config.
    pub fn copy_state_from(&mut self, other: &mut Network<F>) {
        let mut source: std::collections::HashMap<String, ndarray::ArrayD<F>> =
            std::collections::HashMap::new();
        other.visit_state_mut(&mut |name, value| {
            source.insert(name.to_string(), value.to_owned());
        });
        self.visit_state_mut(&mut |name, mut value| {
            if let Some(src) = source.get(name) {
                value.assign(src);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    #[test]
    fn seeded_builds_are_bit_identical() {
        let cfg = ModelConfig::tiny(99);
        let mut a = Network::<f32>::build(&cfg).unwrap();
        let mut b = Network::<f32>::build(&cfg).unwrap();
        let mut a_params = Vec::new();
        a.visit_state_mut(&mut |name, v| a_params.push((name.to_string(), v.to_owned())));
        let mut i = 0;
        b.visit_state_mut(&mut |name, v| {
            assert_eq!(a_params[i].0, name);
            assert_eq!(a_params[i].1, v.to_owned(), "{name} differs");
            i += 1;
        });
        assert!(i > 0);
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = Network::<f32>::build(&ModelConfig::tiny(1)).unwrap();
        let mut b = Network::<f32>::build(&ModelConfig::tiny(2)).unwrap();
        let mut wa = None;
        a.visit_state_mut(&mut |name, v| {
            if name == "stem.conv1.weight" {
                wa = Some(v.to_owned());
            }
        });
        let mut differs = false;
        b.visit_state_mut(&mut |name, v| {
            if name == "stem.conv1.weight" {
                differs = v.to_owned() != *wa.as_ref().unwrap();
            }
        });
        assert!(differs);
    }

    #[test]
    fn forward_shapes_and_purity() {
        let cfg = ModelConfig::tiny(3);
        let net = Network::<f32>::build(&cfg).unwrap();
        let mut x = Array4::<f32>::zeros((2, 3, 64, 128));
        x.index_axis_mut(ndarray::Axis(0), 0).fill(0.25);
        x.index_axis_mut(ndarray::Axis(0), 1).fill(0.25);
        let logits = net.forward(&x).unwrap();
        assert_eq!(logits.dim(), (2, 2));
        assert!(logits.iter().all(|v| v.is_finite()));
        // Identical rows in, identical logits out.
        assert_eq!(logits.row(0), logits.row(1));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let net = Network::<f32>::build(&ModelConfig::tiny(0)).unwrap();
        let x = Array4::<f32>::zeros((1, 3, 32, 128));
        assert!(matches!(
            net.forward(&x),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_scaling_still_has_two_outputs() {
        let cfg = ModelConfig {
            input_height: 32,
            input_width: 64,
            width_multiplier: 1.0 / 8.0,
            middle_module_count: 0,
            num_classes: 2,
            seed: 5,
        };
        let net = Network::<f32>::build(&cfg).unwrap();
        let x = Array4::<f32>::zeros((1, 3, 32, 64));
        assert_eq!(net.forward(&x).unwrap().dim(), (1, 2));
    }

    #[test]
    fn built_parameters_match_descriptor_shape_walk() {
        for cfg in [ModelConfig::tiny(0), ModelConfig::default()] {
            let mut net = Network::<f32>::build(&cfg).unwrap();
            let built = net.parameter_shapes();
            let walked = ArchitectureDescriptor::parameter_shapes(&cfg);
            assert_eq!(built, walked);
            assert_eq!(
                net.parameter_count(),
                ArchitectureDescriptor::parameter_count(&cfg)
            );
        }
    }
}
