//! Layer primitives with explicit forward/backward passes.
//!
//! Everything operates on NCHW tensors. Convolutions use SAME padding
//! (output size `ceil(in / stride)`, shortfall split low/high) so the
//! backbone's total downsampling is exactly 32. Backward methods
//! accumulate into the layer's `grad` buffers and return the gradient
//! with respect to their input.

use ndarray::{Array1, Array2, Array3, Array4, ArrayView3, Axis, Ix1, Ix2, Ix3, Ix4};
use ndarray::parallel::prelude::*;
use num_traits::NumCast;

/// Element type of every tensor in the network. `f32` is the production
/// type; `f64` exists for finite-difference verification.
pub trait Scalar: ndarray::NdFloat + std::iter::Sum + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn cast<F: Scalar>(x: f64) -> F {
    <F as NumCast>::from(x).expect("finite cast")
}

/// SAME-padding geometry: (pad_low, out_size) for one axis.
fn same_padding(in_size: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = in_size.div_ceil(stride);
    let needed = ((out - 1) * stride + kernel).saturating_sub(in_size);
    (needed / 2, out)
}

/// A view of one persistent tensor plus (for trainables) its gradient.
pub(crate) enum TensorSlot<'a, F> {
    Trainable {
        name: String,
        value: &'a mut ndarray::ArrayD<F>,
        grad: &'a mut ndarray::ArrayD<F>,
    },
    Buffer {
        name: String,
        value: &'a mut ndarray::ArrayD<F>,
    },
}

// ---------------------------------------------------------------------------
// dense convolution (no bias)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct Conv2d<F> {
    pub name: String,
    /// (out_c, in_c, kh, kw)
    pub weight: ndarray::ArrayD<F>,
    pub grad: ndarray::ArrayD<F>,
    pub stride: usize,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        name: impl Into<String>,
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let fan_in = in_c * kernel * kernel;
        let weight = init_uniform(&[out_c, in_c, kernel, kernel], fan_in, rng);
        let grad = ndarray::ArrayD::zeros(weight.raw_dim());
        Conv2d {
            name: name.into(),
            weight,
            grad,
            stride,
        }
    }

    fn weight4(&self) -> ndarray::ArrayView4<'_, F> {
        self.weight.view().into_dimensionality::<Ix4>().unwrap()
    }

    pub fn forward(&self, x: &Array4<F>) -> Array4<F> {
        let w = self.weight4();
        let (out_c, in_c, kh, kw) = w.dim();
        let (n, c, h, width) = x.dim();
        assert_eq!(c, in_c, "{}: channel mismatch", self.name);
        let (_, oh) = same_padding(h, kh, self.stride);
        let (_, ow) = same_padding(width, kw, self.stride);

        let w2 = w.into_shape_with_order((out_c, in_c * kh * kw)).unwrap();
        let mut out = Array4::<F>::zeros((n, out_c, oh, ow));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(x.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut on, xn)| {
                let cols = im2col(&xn, kh, kw, self.stride);
                let prod = w2.dot(&cols); // (out_c, oh*ow)
                on.assign(
                    &prod
                        .into_shape_with_order((out_c, oh, ow))
                        .unwrap(),
                );
            });
        out
    }

    /// Returns dx; accumulates dW.
    pub fn backward(&mut self, x: &Array4<F>, grad_out: &Array4<F>) -> Array4<F> {
        let w = self.weight4();
        let (out_c, in_c, kh, kw) = w.dim();
        let (n, _c, h, width) = x.dim();
        let (_, _, oh, ow) = grad_out.dim();
        let w2 = w.into_shape_with_order((out_c, in_c * kh * kw)).unwrap();

        let per_sample: Vec<(Array2<F>, Array3<F>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xn = x.index_axis(Axis(0), i);
                let gn = grad_out.index_axis(Axis(0), i);
                let g2 = gn.into_shape_with_order((out_c, oh * ow)).unwrap();
                let cols = im2col(&xn, kh, kw, self.stride);
                let dw = g2.dot(&cols.t()); // (out_c, in_c*kh*kw)
                let dcols = w2.t().dot(&g2); // (in_c*kh*kw, oh*ow)
                let dx = col2im(&dcols.view(), in_c, h, width, kh, kw, self.stride);
                (dw, dx)
            })
            .collect();

        let mut dx = Array4::<F>::zeros(x.raw_dim());
        let mut grad = self
            .grad
            .view_mut()
            .into_dimensionality::<Ix4>()
            .unwrap()
            .into_shape_with_order((out_c, in_c * kh * kw))
            .unwrap();
        for (i, (dw, dxi)) in per_sample.into_iter().enumerate() {
            grad += &dw;
            dx.index_axis_mut(Axis(0), i).assign(&dxi);
        }
        dx
    }

    pub fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        vec![TensorSlot::Trainable {
            name: format!("{}.weight", self.name),
            value: &mut self.weight,
            grad: &mut self.grad,
        }]
    }
}

fn init_uniform<F: Scalar>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut impl rand::Rng,
) -> ndarray::ArrayD<F> {
    let bound = (1.0 / fan_in as f64).sqrt();
    let mut t = ndarray::ArrayD::<F>::zeros(shape);
    for v in t.iter_mut() {
        let r: f64 = rng.random();
        *v = cast((2.0 * r - 1.0) * bound);
    }
    t
}

/// (C, H, W) -> (C*kh*kw, oh*ow) patch matrix under SAME padding.
fn im2col<F: Scalar>(x: &ArrayView3<'_, F>, kh: usize, kw: usize, stride: usize) -> Array2<F> {
    let (c, h, w) = x.dim();
    let (pad_h, oh) = same_padding(h, kh, stride);
    let (pad_w, ow) = same_padding(w, kw, stride);
    if kh == 1 && kw == 1 && stride == 1 {
        return x.into_shape_with_order((c, h * w)).unwrap().to_owned();
    }
    let mut cols = Array2::<F>::zeros((c * kh * kw, oh * ow));
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ci * kh + ki) * kw + kj;
                let mut row_view = cols.row_mut(row);
                for oy in 0..oh {
                    let y = (oy * stride + ki) as isize - pad_h as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let xx = (ox * stride + kj) as isize - pad_w as isize;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        row_view[oy * ow + ox] = x[(ci, y as usize, xx as usize)];
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add inverse of [`im2col`].
fn col2im<F: Scalar>(
    cols: &ndarray::ArrayView2<'_, F>,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
) -> Array3<F> {
    let (pad_h, oh) = same_padding(h, kh, stride);
    let (pad_w, ow) = same_padding(w, kw, stride);
    if kh == 1 && kw == 1 && stride == 1 {
        return cols
            .into_shape_with_order((c, h, w))
            .unwrap()
            .to_owned();
    }
    let mut out = Array3::<F>::zeros((c, h, w));
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ci * kh + ki) * kw + kj;
                let row_view = cols.row(row);
                for oy in 0..oh {
                    let y = (oy * stride + ki) as isize - pad_h as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let xx = (ox * stride + kj) as isize - pad_w as isize;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        out[(ci, y as usize, xx as usize)] =
                            out[(ci, y as usize, xx as usize)] + row_view[oy * ow + ox];
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// depthwise convolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct DepthwiseConv2d<F> {
    pub name: String,
    /// (c, kh, kw)
    pub weight: ndarray::ArrayD<F>,
    pub grad: ndarray::ArrayD<F>,
    pub stride: usize,
}

impl<F: Scalar> DepthwiseConv2d<F> {
    pub fn new(
        name: impl Into<String>,
        channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let fan_in = kernel * kernel;
        let weight = init_uniform(&[channels, kernel, kernel], fan_in, rng);
        let grad = ndarray::ArrayD::zeros(weight.raw_dim());
        DepthwiseConv2d {
            name: name.into(),
            weight,
            grad,
            stride,
        }
    }

    fn weight3(&self) -> ndarray::ArrayView3<'_, F> {
        self.weight.view().into_dimensionality::<Ix3>().unwrap()
    }

    pub fn forward(&self, x: &Array4<F>) -> Array4<F> {
        let w = self.weight3();
        let (c, kh, kw) = w.dim();
        let (n, xc, h, width) = x.dim();
        assert_eq!(xc, c, "{}: channel mismatch", self.name);
        let (pad_h, oh) = same_padding(h, kh, self.stride);
        let (pad_w, ow) = same_padding(width, kw, self.stride);
        let mut out = Array4::<F>::zeros((n, c, oh, ow));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(x.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut on, xn)| {
                for ci in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = F::zero();
                            for ki in 0..kh {
                                let y = (oy * self.stride + ki) as isize - pad_h as isize;
                                if y < 0 || y >= h as isize {
                                    continue;
                                }
                                for kj in 0..kw {
                                    let xx = (ox * self.stride + kj) as isize - pad_w as isize;
                                    if xx < 0 || xx >= width as isize {
                                        continue;
                                    }
                                    acc = acc + xn[(ci, y as usize, xx as usize)] * w[(ci, ki, kj)];
                                }
                            }
                            on[(ci, oy, ox)] = acc;
                        }
                    }
                }
            });
        out
    }

    pub fn backward(&mut self, x: &Array4<F>, grad_out: &Array4<F>) -> Array4<F> {
        let w = self.weight3();
        let (c, kh, kw) = w.dim();
        let (n, _, h, width) = x.dim();
        let (_, _, oh, ow) = grad_out.dim();
        let (pad_h, _) = same_padding(h, kh, self.stride);
        let (pad_w, _) = same_padding(width, kw, self.stride);

        let per_sample: Vec<(Array3<F>, Array3<F>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xn = x.index_axis(Axis(0), i);
                let gn = grad_out.index_axis(Axis(0), i);
                let mut dw = Array3::<F>::zeros((c, kh, kw));
                let mut dx = Array3::<F>::zeros((c, h, width));
                for ci in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = gn[(ci, oy, ox)];
                            if g == F::zero() {
                                continue;
                            }
                            for ki in 0..kh {
                                let y = (oy * self.stride + ki) as isize - pad_h as isize;
                                if y < 0 || y >= h as isize {
                                    continue;
                                }
                                for kj in 0..kw {
                                    let xx = (ox * self.stride + kj) as isize - pad_w as isize;
                                    if xx < 0 || xx >= width as isize {
                                        continue;
                                    }
                                    let (yu, xu) = (y as usize, xx as usize);
                                    dw[(ci, ki, kj)] = dw[(ci, ki, kj)] + g * xn[(ci, yu, xu)];
                                    dx[(ci, yu, xu)] = dx[(ci, yu, xu)] + g * w[(ci, ki, kj)];
                                }
                            }
                        }
                    }
                }
                (dw, dx)
            })
            .collect();

        let mut dx = Array4::<F>::zeros(x.raw_dim());
        let mut grad = self.grad.view_mut().into_dimensionality::<Ix3>().unwrap();
        for (i, (dw, dxi)) in per_sample.into_iter().enumerate() {
            grad += &dw;
            dx.index_axis_mut(Axis(0), i).assign(&dxi);
        }
        dx
    }

    pub fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        vec![TensorSlot::Trainable {
            name: format!("{}.weight", self.name),
            value: &mut self.weight,
            grad: &mut self.grad,
        }]
    }
}

// ---------------------------------------------------------------------------
// separable convolution = depthwise then pointwise
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct SeparableConv2d<F> {
    pub depthwise: DepthwiseConv2d<F>,
    pub pointwise: Conv2d<F>,
}

pub(crate) struct SepCache<F> {
    /// Depthwise output, i.e. the pointwise input.
    pub mid: Array4<F>,
}

impl<F: Scalar> SeparableConv2d<F> {
    pub fn new(
        name: &str,
        in_c: usize,
        out_c: usize,
        kernel: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        SeparableConv2d {
            depthwise: DepthwiseConv2d::new(format!("{name}.depthwise"), in_c, kernel, 1, rng),
            pointwise: Conv2d::new(format!("{name}.pointwise"), in_c, out_c, 1, 1, rng),
        }
    }

    pub fn forward(&self, x: &Array4<F>) -> Array4<F> {
        self.pointwise.forward(&self.depthwise.forward(x))
    }

    pub fn forward_train(&self, x: &Array4<F>) -> (Array4<F>, SepCache<F>) {
        let mid = self.depthwise.forward(x);
        let out = self.pointwise.forward(&mid);
        (out, SepCache { mid })
    }

    pub fn backward(&mut self, x: &Array4<F>, cache: &SepCache<F>, grad_out: &Array4<F>) -> Array4<F> {
        let dmid = self.pointwise.backward(&cache.mid, grad_out);
        self.depthwise.backward(x, &dmid)
    }

    pub fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        let mut slots = self.depthwise.slots();
        slots.extend(self.pointwise.slots());
        slots
    }
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct BatchNorm2d<F> {
    pub name: String,
    pub gamma: ndarray::ArrayD<F>,
    pub beta: ndarray::ArrayD<F>,
    pub dgamma: ndarray::ArrayD<F>,
    pub dbeta: ndarray::ArrayD<F>,
    pub running_mean: ndarray::ArrayD<F>,
    pub running_var: ndarray::ArrayD<F>,
    /// Number of batches folded into the running statistics. The first
    /// batch seeds them directly; afterwards they follow an EMA.
    pub num_batches: ndarray::ArrayD<F>,
    /// Fraction of the running statistic retained per batch.
    pub momentum: F,
    pub eps: F,
}

pub(crate) struct BnCache<F> {
    pub x_hat: Array4<F>,
    pub inv_std: Array1<F>,
}

impl<F: Scalar> BatchNorm2d<F> {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        BatchNorm2d {
            name: name.into(),
            gamma: ndarray::ArrayD::ones(vec![channels]),
            beta: ndarray::ArrayD::zeros(vec![channels]),
            dgamma: ndarray::ArrayD::zeros(vec![channels]),
            dbeta: ndarray::ArrayD::zeros(vec![channels]),
            running_mean: ndarray::ArrayD::zeros(vec![channels]),
            running_var: ndarray::ArrayD::ones(vec![channels]),
            num_batches: ndarray::ArrayD::zeros(vec![1]),
            momentum: cast(0.9),
            eps: cast(1e-5),
        }
    }

    fn view1(t: &ndarray::ArrayD<F>) -> ndarray::ArrayView1<'_, F> {
        t.view().into_dimensionality::<Ix1>().unwrap()
    }

    pub fn forward_eval(&self, x: &Array4<F>) -> Array4<F> {
        let gamma = Self::view1(&self.gamma);
        let beta = Self::view1(&self.beta);
        let mean = Self::view1(&self.running_mean);
        let var = Self::view1(&self.running_var);
        let mut out = x.clone();
        for (ci, mut chan) in out.axis_iter_mut(Axis(1)).enumerate() {
            let inv = (var[ci] + self.eps).sqrt().recip();
            let scale = gamma[ci] * inv;
            let shift = beta[ci] - mean[ci] * scale;
            chan.mapv_inplace(|v| v * scale + shift);
        }
        out
    }

    pub fn forward_train(&mut self, x: &Array4<F>) -> (Array4<F>, BnCache<F>) {
        let (n, c, h, w) = x.dim();
        let count = cast::<F>((n * h * w) as f64);
        let first_batch = self.num_batches[[0]] == F::zero();
        let mut out = Array4::<F>::zeros((n, c, h, w));
        let mut x_hat = Array4::<F>::zeros((n, c, h, w));
        let mut inv_std = Array1::<F>::zeros(c);
        for ci in 0..c {
            let chan = x.index_axis(Axis(1), ci);
            let mean = chan.iter().copied().sum::<F>() / count;
            let var = chan
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<F>()
                / count;
            let inv = (var + self.eps).sqrt().recip();
            inv_std[ci] = inv;
            let gamma = self.gamma[[ci]];
            let beta = self.beta[[ci]];
            let mut xh = x_hat.index_axis_mut(Axis(1), ci);
            let mut oc = out.index_axis_mut(Axis(1), ci);
            ndarray::Zip::from(&mut xh).and(&mut oc).and(&chan).for_each(|xh, oc, &v| {
                let normalized = (v - mean) * inv;
                *xh = normalized;
                *oc = normalized * gamma + beta;
            });
            if first_batch {
                self.running_mean[[ci]] = mean;
                self.running_var[[ci]] = var;
            } else {
                let keep = self.momentum;
                let take = F::one() - keep;
                self.running_mean[[ci]] = self.running_mean[[ci]] * keep + mean * take;
                self.running_var[[ci]] = self.running_var[[ci]] * keep + var * take;
            }
        }
        self.num_batches[[0]] = self.num_batches[[0]] + F::one();
        (out, BnCache { x_hat, inv_std })
    }

    pub fn backward(&mut self, cache: &BnCache<F>, grad_out: &Array4<F>) -> Array4<F> {
        let (n, c, h, w) = grad_out.dim();
        let count = cast::<F>((n * h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for ci in 0..c {
            let dy = grad_out.index_axis(Axis(1), ci);
            let xh = cache.x_hat.index_axis(Axis(1), ci);
            let sum_dy = dy.iter().copied().sum::<F>();
            let sum_dy_xhat = dy.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<F>();
            self.dbeta[[ci]] = self.dbeta[[ci]] + sum_dy;
            self.dgamma[[ci]] = self.dgamma[[ci]] + sum_dy_xhat;
            let gamma = self.gamma[[ci]];
            let inv = cache.inv_std[ci];
            let scale = gamma * inv / count;
            let mut dxc = dx.index_axis_mut(Axis(1), ci);
            ndarray::Zip::from(&mut dxc).and(&dy).and(&xh).for_each(|d, &g, &x| {
                *d = scale * (count * g - sum_dy - x * sum_dy_xhat);
            });
        }
        dx
    }

    pub fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        vec![
            TensorSlot::Trainable {
                name: format!("{}.gamma", self.name),
                value: &mut self.gamma,
                grad: &mut self.dgamma,
            },
            TensorSlot::Trainable {
                name: format!("{}.beta", self.name),
                value: &mut self.beta,
                grad: &mut self.dbeta,
            },
            TensorSlot::Buffer {
                name: format!("{}.running_mean", self.name),
                value: &mut self.running_mean,
            },
            TensorSlot::Buffer {
                name: format!("{}.running_var", self.name),
                value: &mut self.running_var,
            },
            TensorSlot::Buffer {
                name: format!("{}.num_batches", self.name),
                value: &mut self.num_batches,
            },
        ]
    }
}

// ---------------------------------------------------------------------------
// activations, pooling, head
// ---------------------------------------------------------------------------

pub(crate) fn relu<F: Scalar>(x: &Array4<F>) -> Array4<F> {
    x.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

/// `activated` is the ReLU *output*; positive entries pass gradient.
pub(crate) fn relu_backward<F: Scalar>(grad_out: &Array4<F>, activated: &Array4<F>) -> Array4<F> {
    let mut dx = grad_out.clone();
    ndarray::Zip::from(&mut dx).and(activated).for_each(|d, &a| {
        if a <= F::zero() {
            *d = F::zero();
        }
    });
    dx
}

pub(crate) struct PoolCache {
    /// Flattened input index (y * w + x) of each maximum, per (n, c, oy, ox).
    pub argmax: Vec<u32>,
    pub in_h: usize,
    pub in_w: usize,
}

/// 3x3 max pooling with stride 2 and SAME padding. Ties resolve to the
/// first candidate in row-major scan order.
pub(crate) fn maxpool3x3s2<F: Scalar>(x: &Array4<F>) -> (Array4<F>, PoolCache) {
    let (n, c, h, w) = x.dim();
    let (pad_h, oh) = same_padding(h, 3, 2);
    let (pad_w, ow) = same_padding(w, 3, 2);
    let mut out = Array4::<F>::zeros((n, c, oh, ow));
    let mut argmax = vec![0u32; n * c * oh * ow];
    for i in 0..n {
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = F::neg_infinity();
                    let mut best_idx = 0u32;
                    for ki in 0..3 {
                        let y = (oy * 2 + ki) as isize - pad_h as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kj in 0..3 {
                            let xx = (ox * 2 + kj) as isize - pad_w as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let v = x[(i, ci, y as usize, xx as usize)];
                            if v > best {
                                best = v;
                                best_idx = (y as usize * w + xx as usize) as u32;
                            }
                        }
                    }
                    out[(i, ci, oy, ox)] = best;
                    argmax[((i * c + ci) * oh + oy) * ow + ox] = best_idx;
                }
            }
        }
    }
    (
        out,
        PoolCache {
            argmax,
            in_h: h,
            in_w: w,
        },
    )
}

pub(crate) fn maxpool_backward<F: Scalar>(grad_out: &Array4<F>, cache: &PoolCache) -> Array4<F> {
    let (n, c, oh, ow) = grad_out.dim();
    let mut dx = Array4::<F>::zeros((n, c, cache.in_h, cache.in_w));
    for i in 0..n {
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let flat = cache.argmax[((i * c + ci) * oh + oy) * ow + ox] as usize;
                    let (y, x) = (flat / cache.in_w, flat % cache.in_w);
                    dx[(i, ci, y, x)] = dx[(i, ci, y, x)] + grad_out[(i, ci, oy, ox)];
                }
            }
        }
    }
    dx
}

pub(crate) fn global_avg_pool<F: Scalar>(x: &Array4<F>) -> Array2<F> {
    let (n, c, h, w) = x.dim();
    let count = cast::<F>((h * w) as f64);
    let mut out = Array2::<F>::zeros((n, c));
    for i in 0..n {
        for ci in 0..c {
            out[(i, ci)] = x
                .index_axis(Axis(0), i)
                .index_axis(Axis(0), ci)
                .iter()
                .copied()
                .sum::<F>()
                / count;
        }
    }
    out
}

pub(crate) fn global_avg_pool_backward<F: Scalar>(
    grad_out: &Array2<F>,
    h: usize,
    w: usize,
) -> Array4<F> {
    let (n, c) = grad_out.dim();
    let count = cast::<F>((h * w) as f64);
    let mut dx = Array4::<F>::zeros((n, c, h, w));
    for i in 0..n {
        for ci in 0..c {
            let g = grad_out[(i, ci)] / count;
            dx.index_axis_mut(Axis(0), i)
                .index_axis_mut(Axis(0), ci)
                .fill(g);
        }
    }
    dx
}

#[derive(Debug, Clone)]
pub(crate) struct Linear<F> {
    pub name: String,
    /// (in_features, out_features)
    pub weight: ndarray::ArrayD<F>,
    pub bias: ndarray::ArrayD<F>,
    pub dweight: ndarray::ArrayD<F>,
    pub dbias: ndarray::ArrayD<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn new(
        name: impl Into<String>,
        in_features: usize,
        out_features: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let weight = init_uniform(&[in_features, out_features], in_features, rng);
        Linear {
            name: name.into(),
            dweight: ndarray::ArrayD::zeros(weight.raw_dim()),
            weight,
            bias: ndarray::ArrayD::zeros(vec![out_features]),
            dbias: ndarray::ArrayD::zeros(vec![out_features]),
        }
    }

    fn weight2(&self) -> ndarray::ArrayView2<'_, F> {
        self.weight.view().into_dimensionality::<Ix2>().unwrap()
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let bias = self.bias.view().into_dimensionality::<Ix1>().unwrap();
        x.dot(&self.weight2()) + &bias
    }

    pub fn backward(&mut self, x: &Array2<F>, grad_out: &Array2<F>) -> Array2<F> {
        {
            let mut dw = self.dweight.view_mut().into_dimensionality::<Ix2>().unwrap();
            dw += &x.t().dot(grad_out);
            let mut db = self.dbias.view_mut().into_dimensionality::<Ix1>().unwrap();
            db += &grad_out.sum_axis(Axis(0));
        }
        grad_out.dot(&self.weight2().t())
    }

    pub fn slots(&mut self) -> Vec<TensorSlot<'_, F>> {
        vec![
            TensorSlot::Trainable {
                name: format!("{}.weight", self.name),
                value: &mut self.weight,
                grad: &mut self.dweight,
            },
            TensorSlot::Trainable {
                name: format!("{}.bias", self.name),
                value: &mut self.bias,
                grad: &mut self.dbias,
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(42)
    }

    fn random_x(n: usize, c: usize, h: usize, w: usize) -> Array4<f64> {
        let mut r = ChaCha20Rng::seed_from_u64(7);
        Array4::from_shape_fn((n, c, h, w), |_| rand::Rng::random::<f64>(&mut r) - 0.5)
    }

    /// Naive dense convolution, nested loops, SAME padding.
    fn naive_conv(x: &Array4<f64>, w: &Array4<f64>, stride: usize) -> Array4<f64> {
        let (n, c, h, width) = x.dim();
        let (oc, _ic, kh, kw) = w.dim();
        let (pad_h, oh) = same_padding(h, kh, stride);
        let (pad_w, ow) = same_padding(width, kw, stride);
        let mut out = Array4::<f64>::zeros((n, oc, oh, ow));
        for i in 0..n {
            for o in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for ki in 0..kh {
                                for kj in 0..kw {
                                    let y = (oy * stride + ki) as isize - pad_h as isize;
                                    let xx = (ox * stride + kj) as isize - pad_w as isize;
                                    if y < 0 || y >= h as isize || xx < 0 || xx >= width as isize {
                                        continue;
                                    }
                                    acc += x[(i, ci, y as usize, xx as usize)]
                                        * w[(o, ci, ki, kj)];
                                }
                            }
                        }
                        out[(i, o, oy, ox)] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_forward_matches_naive() {
        let mut r = rng();
        for &(c, oc, h, w, k, s) in
            &[(3usize, 4usize, 5usize, 7usize, 3usize, 1usize), (2, 3, 8, 6, 3, 2), (4, 2, 5, 5, 1, 2)]
        {
            let conv = Conv2d::<f64>::new("t", c, oc, k, s, &mut r);
            let x = random_x(2, c, h, w);
            let got = conv.forward(&x);
            let want = naive_conv(
                &x,
                &conv.weight.view().into_dimensionality::<Ix4>().unwrap().to_owned(),
                s,
            );
            let diff = (&got - &want).mapv(f64::abs);
            assert!(diff.iter().all(|&d| d < 1e-12), "c={c} oc={oc} k={k} s={s}");
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut r = rng();
        let mut conv = Conv2d::<f64>::new("t", 2, 3, 3, 2, &mut r);
        let x = random_x(2, 2, 6, 5);
        let y = conv.forward(&x);
        // Loss = sum(y * m) for a fixed random m, so dL/dy = m.
        let m = random_x(2, 3, y.dim().2, y.dim().3);
        let dx = conv.backward(&x, &m);

        let eps = 1e-6;
        let mut x_pert = x.clone();
        for idx in [(0, 0, 0, 0), (1, 1, 3, 2), (0, 1, 5, 4)] {
            x_pert[idx] = x[idx] + eps;
            let up = (conv.forward(&x_pert) * &m).sum();
            x_pert[idx] = x[idx] - eps;
            let down = (conv.forward(&x_pert) * &m).sum();
            x_pert[idx] = x[idx];
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - dx[idx]).abs() < 1e-8, "dx at {idx:?}: {fd} vs {}", dx[idx]);
        }

        let g = conv.grad.clone();
        for flat in [0usize, 10, 25] {
            let mut w_pert = conv.weight.clone();
            let base = w_pert.as_slice_mut().unwrap()[flat];
            w_pert.as_slice_mut().unwrap()[flat] = base + eps;
            std::mem::swap(&mut conv.weight, &mut w_pert);
            let up = (conv.forward(&x) * &m).sum();
            std::mem::swap(&mut conv.weight, &mut w_pert);
            w_pert.as_slice_mut().unwrap()[flat] = base - eps;
            std::mem::swap(&mut conv.weight, &mut w_pert);
            let down = (conv.forward(&x) * &m).sum();
            std::mem::swap(&mut conv.weight, &mut w_pert);
            let fd = (up - down) / (2.0 * eps);
            let analytic = g.as_slice().unwrap()[flat];
            assert!((fd - analytic).abs() < 1e-8, "dw[{flat}]: {fd} vs {analytic}");
        }
    }

    #[test]
    fn depthwise_matches_grouped_naive() {
        let mut r = rng();
        let dw = DepthwiseConv2d::<f64>::new("t", 3, 3, 1, &mut r);
        let x = random_x(2, 3, 6, 7);
        let got = dw.forward(&x);
        // Equivalent dense kernel: block-diagonal across channels.
        let wv = dw.weight.view().into_dimensionality::<Ix3>().unwrap();
        let mut dense = Array4::<f64>::zeros((3, 3, 3, 3));
        for c in 0..3 {
            for ki in 0..3 {
                for kj in 0..3 {
                    dense[(c, c, ki, kj)] = wv[(c, ki, kj)];
                }
            }
        }
        let want = naive_conv(&x, &dense, 1);
        let diff = (&got - &want).mapv(f64::abs);
        assert!(diff.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn batchnorm_train_normalizes_and_backward_matches_fd() {
        let mut bn = BatchNorm2d::<f64>::new("t", 2);
        let x = random_x(3, 2, 4, 4) * 3.0 + 1.5;
        let (y, cache) = bn.forward_train(&x);
        for c in 0..2 {
            let chan = y.index_axis(Axis(1), c);
            let mean: f64 = chan.iter().sum::<f64>() / chan.len() as f64;
            let var: f64 =
                chan.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / chan.len() as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-4);
        }

        let m = random_x(3, 2, 4, 4);
        let dx = bn.backward(&cache, &m);
        let eps = 1e-6;
        for idx in [(0, 0, 0, 0), (2, 1, 3, 3), (1, 0, 2, 1)] {
            let mut fresh = BatchNorm2d::<f64>::new("t", 2);
            let mut xp = x.clone();
            xp[idx] = x[idx] + eps;
            let (yu, _) = fresh.forward_train(&xp);
            let mut fresh2 = BatchNorm2d::<f64>::new("t", 2);
            xp[idx] = x[idx] - eps;
            let (yd, _) = fresh2.forward_train(&xp);
            let fd = ((&yu * &m).sum() - (&yd * &m).sum()) / (2.0 * eps);
            assert!(
                (fd - dx[idx]).abs() < 1e-6,
                "bn dx at {idx:?}: fd {fd} vs {}",
                dx[idx]
            );
        }
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let mut x = Array4::<f64>::zeros((1, 1, 4, 4));
        x[(0, 0, 1, 1)] = 5.0;
        x[(0, 0, 3, 3)] = 7.0;
        let (y, cache) = maxpool3x3s2(&x);
        assert_eq!(y.dim(), (1, 1, 2, 2));
        assert_eq!(y[(0, 0, 0, 0)], 5.0);
        assert_eq!(y[(0, 0, 1, 1)], 7.0);
        let mut dy = Array4::<f64>::zeros((1, 1, 2, 2));
        dy[(0, 0, 0, 0)] = 1.0;
        dy[(0, 0, 1, 1)] = 2.0;
        let dx = maxpool_backward(&dy, &cache);
        assert_eq!(dx[(0, 0, 1, 1)], 1.0);
        assert_eq!(dx[(0, 0, 3, 3)], 2.0);
        assert_eq!(dx.sum(), 3.0);
    }

    #[test]
    fn gap_is_mean_and_backward_spreads() {
        let x = random_x(2, 3, 4, 5);
        let y = global_avg_pool(&x);
        assert!((y[(0, 0)] - x.index_axis(Axis(0), 0).index_axis(Axis(0), 0).mean().unwrap()).abs() < 1e-12);
        let mut dy = Array2::<f64>::zeros((2, 3));
        dy[(1, 2)] = 20.0;
        let dx = global_avg_pool_backward(&dy, 4, 5);
        assert!((dx[(1, 2, 0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(dx[(0, 0, 0, 0)], 0.0);
    }

    #[test]
    fn linear_backward_matches_fd() {
        let mut r = rng();
        let mut lin = Linear::<f64>::new("t", 4, 3, &mut r);
        let x = Array2::from_shape_fn((2, 4), |_| rand::Rng::random::<f64>(&mut r) - 0.5);
        let y = lin.forward(&x);
        let m = Array2::from_shape_fn(y.dim(), |_| rand::Rng::random::<f64>(&mut r) - 0.5);
        let dx = lin.backward(&x, &m);
        let eps = 1e-6;
        let mut xp = x.clone();
        xp[(1, 2)] += eps;
        let up = (lin.forward(&xp) * &m).sum();
        xp[(1, 2)] -= 2.0 * eps;
        let down = (lin.forward(&xp) * &m).sum();
        let fd = (up - down) / (2.0 * eps);
        assert!((fd - dx[(1, 2)]).abs() < 1e-8);
    }
}
