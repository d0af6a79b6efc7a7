//! Straight-line layer kernels shared by the tape and the tape-free
//! evaluator. Every function here is pure.

use crate::error::{GradError, Result};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

/// Shape of a convolution kernel: `(out_ch, in_ch, kh, kw)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelShape {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
}

impl KernelShape {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Self {
        Self { out_ch, in_ch, kh, kw }
    }

    pub fn len(&self) -> usize {
        self.out_ch * self.in_ch * self.kh * self.kw
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn patch_len(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }
}

/// Output spatial size of a "same"-padded convolution: `ceil(n / stride)`.
pub fn conv_out_dim(n: usize, stride: usize) -> usize {
    n.div_ceil(stride)
}

struct ConvGeom {
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    pad_h: usize,
    pad_w: usize,
    stride: usize,
}

fn check_conv(x: &[usize; 4], k: &KernelShape, kernel_len: usize, stride: usize) -> Result<ConvGeom> {
    if kernel_len != k.len() {
        return Err(GradError::Shape(format!(
            "kernel buffer has {} entries, shape {:?} needs {}",
            kernel_len,
            k,
            k.len()
        )));
    }
    if x[1] != k.in_ch {
        return Err(GradError::Shape(format!(
            "conv2d: input has {} channels, kernel expects {}",
            x[1], k.in_ch
        )));
    }
    if !(stride == 1 || stride == 2) {
        return Err(GradError::Parameter(format!("conv2d: stride {stride} not in {{1, 2}}")));
    }
    if k.kh % 2 == 0 || k.kw % 2 == 0 {
        return Err(GradError::Shape(format!(
            "conv2d: kernel {}x{} must have odd extent",
            k.kh, k.kw
        )));
    }
    Ok(ConvGeom {
        h: x[2],
        w: x[3],
        ho: conv_out_dim(x[2], stride),
        wo: conv_out_dim(x[3], stride),
        pad_h: k.kh / 2,
        pad_w: k.kw / 2,
        stride,
    })
}

/// Unfolds one `(in_ch, h, w)` item into a `(in_ch*kh*kw, ho*wo)` matrix.
fn im2col<T: Scalar>(x: &[T], k: &KernelShape, g: &ConvGeom, cols: &mut [T]) {
    let plane = g.ho * g.wo;
    for ci in 0..k.in_ch {
        let src = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for dy in 0..k.kh {
            for dx in 0..k.kw {
                let row = (ci * k.kh + dy) * k.kw + dx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + dy) as isize - g.pad_h as isize;
                    let out_row = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy as usize >= g.h {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src_row = &src[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + dx) as isize - g.pad_w as isize;
                        *o = if ix < 0 || ix as usize >= g.w {
                            T::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: scatters-and-adds columns back into an image.
fn col2im<T: Scalar>(cols: &[T], k: &KernelShape, g: &ConvGeom, dx_item: &mut [T]) {
    let plane = g.ho * g.wo;
    for ci in 0..k.in_ch {
        let dst = &mut dx_item[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for dy in 0..k.kh {
            for dxk in 0..k.kw {
                let row = (ci * k.kh + dy) * k.kw + dxk;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + dy) as isize - g.pad_h as isize;
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let dst_row = &mut dst[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let src_row = &src[oy * g.wo..(oy + 1) * g.wo];
                    for (ox, &v) in src_row.iter().enumerate() {
                        let ix = (ox * g.stride + dxk) as isize - g.pad_w as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            dst_row[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Zero-padded "same" convolution (cross-correlation) with optional bias.
pub fn conv2d<T: Scalar>(
    x: &RealTensor<T>,
    kernel: &[T],
    kshape: KernelShape,
    bias: Option<&[T]>,
    stride: usize,
) -> Result<RealTensor<T>> {
    let g = check_conv(&x.shape(), &kshape, kernel.len(), stride)?;
    if let Some(b) = bias {
        if b.len() != kshape.out_ch {
            return Err(GradError::Shape(format!(
                "bias has {} entries, expected {}",
                b.len(),
                kshape.out_ch
            )));
        }
    }
    let batch = x.batch();
    let plane = g.ho * g.wo;
    let out_item = kshape.out_ch * plane;
    let mut out = vec![T::zero(); batch * out_item];
    let mut cols = vec![T::zero(); kshape.patch_len() * plane];
    for b in 0..batch {
        im2col(x.item(b), &kshape, &g, &mut cols);
        let o = &mut out[b * out_item..(b + 1) * out_item];
        if let Some(bias) = bias {
            for (co, &bv) in bias.iter().enumerate() {
                o[co * plane..(co + 1) * plane].fill(bv);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        T::gemm(
            false,
            false,
            kshape.out_ch,
            kshape.patch_len(),
            plane,
            T::one(),
            kernel,
            &cols,
            beta,
            o,
        );
    }
    Ok(RealTensor::from_parts(
        [batch, kshape.out_ch, g.ho, g.wo],
        out,
    ))
}

/// Gradients produced by [`conv2d_backward`].
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Option<RealTensor<T>>,
    pub kernel: Option<Vec<T>>,
    pub bias: Option<Vec<T>>,
}

/// Backward pass of [`conv2d`] given the upstream gradient `dout`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    x: &RealTensor<T>,
    kernel: &[T],
    kshape: KernelShape,
    has_bias: bool,
    stride: usize,
    dout: &RealTensor<T>,
    want_input: bool,
    want_params: bool,
) -> Result<ConvGrads<T>> {
    let g = check_conv(&x.shape(), &kshape, kernel.len(), stride)?;
    let expected = [x.batch(), kshape.out_ch, g.ho, g.wo];
    if dout.shape() != expected {
        return Err(GradError::Shape(format!(
            "conv2d backward: upstream {:?}, expected {:?}",
            dout.shape(),
            expected
        )));
    }
    let plane = g.ho * g.wo;
    let patch = kshape.patch_len();
    let mut cols = vec![T::zero(); patch * plane];
    let mut dx = want_input.then(|| vec![T::zero(); x.data().len()]);
    let mut dk = want_params.then(|| vec![T::zero(); kshape.len()]);
    let mut db = (want_params && has_bias).then(|| vec![T::zero(); kshape.out_ch]);
    for b in 0..x.batch() {
        let go = dout.item(b);
        if let Some(dk) = dk.as_mut() {
            im2col(x.item(b), &kshape, &g, &mut cols);
            // dK += dOut * cols^T
            T::gemm(false, true, kshape.out_ch, plane, patch, T::one(), go, &cols, T::one(), dk);
        }
        if let Some(db) = db.as_mut() {
            for (co, acc) in db.iter_mut().enumerate() {
                *acc += go[co * plane..(co + 1) * plane].iter().copied().sum::<T>();
            }
        }
        if let Some(dx) = dx.as_mut() {
            // dcols = K^T * dOut
            T::gemm(true, false, patch, kshape.out_ch, plane, T::one(), kernel, go, T::zero(), &mut cols);
            let n = x.item_len();
            col2im(&cols, &kshape, &g, &mut dx[b * n..(b + 1) * n]);
        }
    }
    Ok(ConvGrads {
        input: dx.map(|d| RealTensor::from_parts(x.shape(), d)),
        kernel: dk,
        bias: db,
    })
}

#[inline]
pub fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Elementwise `x * sigmoid(x)`.
pub fn swish<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    RealTensor::from_parts(
        x.shape(),
        x.data().iter().map(|&v| v * sigmoid(v)).collect(),
    )
}

/// `dx = dy * (s + x s (1 - s))` with `s = sigmoid(x)`.
pub fn swish_backward<T: Scalar>(x: &RealTensor<T>, dy: &RealTensor<T>) -> Result<RealTensor<T>> {
    x.check_same(dy)?;
    Ok(RealTensor::from_parts(
        x.shape(),
        x.data()
            .iter()
            .zip(dy.data())
            .map(|(&v, &g)| {
                let s = sigmoid(v);
                g * (s + v * s * (T::one() - s))
            })
            .collect(),
    ))
}

/// Sums each channel plane: `(b, c, h, w) -> (b, c, 1, 1)`.
pub fn global_sum_pool<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    let [b, c, h, w] = x.shape();
    let plane = h * w;
    let out = x
        .data()
        .chunks(plane.max(1))
        .take(b * c)
        .map(|p| p.iter().copied().sum())
        .collect();
    RealTensor::from_parts([b, c, 1, 1], out)
}

pub fn global_sum_pool_backward<T: Scalar>(input_shape: [usize; 4], dy: &RealTensor<T>) -> Result<RealTensor<T>> {
    let [b, c, h, w] = input_shape;
    if dy.shape() != [b, c, 1, 1] {
        return Err(GradError::Shape(format!(
            "pool backward: upstream {:?}, expected {:?}",
            dy.shape(),
            [b, c, 1, 1]
        )));
    }
    let mut out = Vec::with_capacity(b * c * h * w);
    for &g in dy.data() {
        out.extend(std::iter::repeat(g).take(h * w));
    }
    Ok(RealTensor::from_parts(input_shape, out))
}

/// Dense layer with scalar output: `(b, f, 1, 1) -> (b, 1, 1, 1)`.
pub fn dense<T: Scalar>(x: &RealTensor<T>, weight: &[T], bias: T) -> Result<RealTensor<T>> {
    if x.item_len() != weight.len() {
        return Err(GradError::Shape(format!(
            "dense: {} features, weight has {}",
            x.item_len(),
            weight.len()
        )));
    }
    let out = (0..x.batch())
        .map(|b| x.item(b).iter().zip(weight).map(|(&a, &w)| a * w).sum::<T>() + bias)
        .collect();
    Ok(RealTensor::from_parts([x.batch(), 1, 1, 1], out))
}

/// Returns `(dx, dweight, dbias)` for [`dense`].
pub fn dense_backward<T: Scalar>(
    x: &RealTensor<T>,
    weight: &[T],
    dy: &RealTensor<T>,
) -> Result<(RealTensor<T>, Vec<T>, T)> {
    if dy.shape() != [x.batch(), 1, 1, 1] {
        return Err(GradError::Shape(format!("dense backward: upstream {:?}", dy.shape())));
    }
    let f = x.item_len();
    let mut dx = Vec::with_capacity(x.data().len());
    let mut dw = vec![T::zero(); f];
    let mut dbias = T::zero();
    for b in 0..x.batch() {
        let g = dy.data()[b];
        dx.extend(weight.iter().map(|&w| w * g));
        for (acc, &a) in dw.iter_mut().zip(x.item(b)) {
            *acc += a * g;
        }
        dbias += g;
    }
    Ok((RealTensor::from_parts(x.shape(), dx), dw, dbias))
}
