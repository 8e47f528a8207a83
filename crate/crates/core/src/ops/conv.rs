//! Bias-free grouped 2-D convolution (cross-correlation).
//!
//! One kernel serves the three flavours used by the network: the dense stem
//! convolution, the depthwise convolution with a channel multiplier of two,
//! and grouped pointwise convolutions. The flavour-specific entry points only
//! add their own precondition checks.
//!
//! Channels are grouped contiguously: input group `i` is channels
//! `[i * C_in / g, (i + 1) * C_in / g)` and feeds only output group `i`. With
//! `groups == C_in` and `C_out == 2 * C_in`, input channel `c` therefore
//! produces output channels `2c` and `2c + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape4, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvGeometry {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 || groups == 0 {
            return Err(Error::Config(format!(
                "conv: channels, kernel, stride and groups must be positive \
                 (in={in_channels}, out={out_channels}, k={kernel}, s={stride}, g={groups})"
            )));
        }
        if in_channels % groups != 0 || out_channels % groups != 0 {
            return Err(Error::Config(format!(
                "conv: {in_channels} -> {out_channels} channels not divisible by {groups} groups"
            )));
        }
        Ok(ConvGeometry {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            groups,
        })
    }

    /// Depthwise 3x3, stride 1, padding 1, with channel multiplier 2.
    pub fn depthwise(channels: usize) -> Result<Self> {
        Self::new(channels, 2 * channels, 3, 1, 1, channels)
    }

    /// 1x1 stride-1 grouped convolution.
    pub fn pointwise(in_channels: usize, out_channels: usize, groups: usize) -> Result<Self> {
        Self::new(in_channels, out_channels, 1, 1, 0, groups)
    }

    pub fn in_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    pub fn out_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    /// Kernel tensor shape `(out, in / groups, k, k)`.
    pub fn weight_shape(&self) -> Shape4 {
        Shape4::new(self.out_channels, self.in_per_group(), self.kernel, self.kernel)
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().len()
    }

    /// Fan-in of one output unit, used for weight initialisation.
    pub fn fan_in(&self) -> usize {
        self.in_per_group() * self.kernel * self.kernel
    }

    pub fn output_extent(&self, input: usize) -> Result<usize> {
        let padded = input + 2 * self.padding;
        if padded < self.kernel {
            return Err(Error::Shape(format!(
                "conv: input extent {input} with padding {} smaller than kernel {}",
                self.padding, self.kernel
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    pub fn output_shape(&self, input: Shape4) -> Result<Shape4> {
        if input.c != self.in_channels {
            return Err(Error::Shape(format!(
                "conv: expected {} input channels, got {input}",
                self.in_channels
            )));
        }
        Ok(Shape4::new(
            input.n,
            self.out_channels,
            self.output_extent(input.h)?,
            self.output_extent(input.w)?,
        ))
    }

    fn check_weight<T: Scalar>(&self, weight: &Tensor4<T>) -> Result<()> {
        if weight.shape() != self.weight_shape() {
            return Err(Error::Shape(format!(
                "conv: kernel shape {} does not match geometry {}",
                weight.shape(),
                self.weight_shape()
            )));
        }
        Ok(())
    }
}

/// Output positions `o` in `[0, out_len)` whose input coordinate
/// `o * stride + offset - pad` lands inside `[0, in_len)`.
fn valid_range(out_len: usize, in_len: usize, offset: usize, stride: usize, pad: usize) -> (usize, usize) {
    let start = if pad > offset {
        (pad - offset).div_ceil(stride)
    } else {
        0
    };
    let end = if in_len + pad > offset {
        ((in_len - 1 + pad - offset) / stride + 1).min(out_len)
    } else {
        0
    };
    (start, end.max(start))
}

pub fn conv2d_forward<T: Scalar>(x: &Tensor4<T>, weight: &Tensor4<T>, geom: &ConvGeometry) -> Result<Tensor4<T>> {
    geom.check_weight(weight)?;
    let xs = x.shape();
    let ys = geom.output_shape(xs)?;
    let mut y = Tensor4::zeros(ys)?;
    let (ipg, opg, k) = (geom.in_per_group(), geom.out_per_group(), geom.kernel);
    let (s, p) = (geom.stride, geom.padding);
    let pointwise = k == 1 && s == 1 && p == 0;
    let w = weight.data();

    for n in 0..xs.n {
        for oc in 0..geom.out_channels {
            let g = oc / opg;
            let out = y.plane_mut(n, oc);
            for icg in 0..ipg {
                let inp = x.plane(n, g * ipg + icg);
                let wbase = (oc * ipg + icg) * k * k;
                if pointwise {
                    let wv = w[wbase];
                    for (o, &i) in out.iter_mut().zip(inp) {
                        *o += wv * i;
                    }
                    continue;
                }
                for ky in 0..k {
                    let (oy0, oy1) = valid_range(ys.h, xs.h, ky, s, p);
                    for kx in 0..k {
                        let wv = w[wbase + ky * k + kx];
                        let (ox0, ox1) = valid_range(ys.w, xs.w, kx, s, p);
                        for oy in oy0..oy1 {
                            let iy = oy * s + ky - p;
                            let orow = &mut out[oy * ys.w..(oy + 1) * ys.w];
                            let irow = &inp[iy * xs.w..(iy + 1) * xs.w];
                            for ox in ox0..ox1 {
                                orow[ox] += wv * irow[ox * s + kx - p];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Vector-Jacobian product of [`conv2d_forward`]: returns `(dx, dweight)`.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    geom: &ConvGeometry,
    dy: &Tensor4<T>,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    geom.check_weight(weight)?;
    let xs = x.shape();
    let ys = geom.output_shape(xs)?;
    if dy.shape() != ys {
        return Err(Error::Shape(format!(
            "conv backward: upstream gradient {} but output is {ys}",
            dy.shape()
        )));
    }
    let mut dx = x.zeros_like();
    let mut dw = weight.zeros_like();
    let (ipg, opg, k) = (geom.in_per_group(), geom.out_per_group(), geom.kernel);
    let (s, p) = (geom.stride, geom.padding);
    let pointwise = k == 1 && s == 1 && p == 0;
    let w = weight.data();

    for n in 0..xs.n {
        for oc in 0..geom.out_channels {
            let g = oc / opg;
            let gout = dy.plane(n, oc);
            for icg in 0..ipg {
                let ic = g * ipg + icg;
                let wbase = (oc * ipg + icg) * k * k;
                if pointwise {
                    let wv = w[wbase];
                    let inp = x.plane(n, ic);
                    let mut acc = T::ZERO;
                    for (&go, &i) in gout.iter().zip(inp) {
                        acc += go * i;
                    }
                    dw.data_mut()[wbase] += acc;
                    for (d, &go) in dx.plane_mut(n, ic).iter_mut().zip(gout) {
                        *d += wv * go;
                    }
                    continue;
                }
                for ky in 0..k {
                    let (oy0, oy1) = valid_range(ys.h, xs.h, ky, s, p);
                    for kx in 0..k {
                        let wi = wbase + ky * k + kx;
                        let wv = w[wi];
                        let (ox0, ox1) = valid_range(ys.w, xs.w, kx, s, p);
                        let mut acc = T::ZERO;
                        {
                            let inp = x.plane(n, ic);
                            for oy in oy0..oy1 {
                                let iy = oy * s + ky - p;
                                let grow = &gout[oy * ys.w..(oy + 1) * ys.w];
                                let irow = &inp[iy * xs.w..(iy + 1) * xs.w];
                                for ox in ox0..ox1 {
                                    acc += grow[ox] * irow[ox * s + kx - p];
                                }
                            }
                        }
                        dw.data_mut()[wi] += acc;
                        let dinp = dx.plane_mut(n, ic);
                        for oy in oy0..oy1 {
                            let iy = oy * s + ky - p;
                            let grow = &gout[oy * ys.w..(oy + 1) * ys.w];
                            let drow = &mut dinp[iy * xs.w..(iy + 1) * xs.w];
                            for ox in ox0..ox1 {
                                drow[ox * s + kx - p] += wv * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((dx, dw))
}

fn check_depthwise(x: Shape4, geom: &ConvGeometry) -> Result<()> {
    if geom.groups != x.c || geom.in_channels != x.c {
        return Err(Error::Config(format!(
            "depthwise conv: groups {} must equal input channels of {x}",
            geom.groups
        )));
    }
    if geom.out_channels != 2 * x.c {
        return Err(Error::Config(format!(
            "depthwise conv: expected {} output channels (multiplier 2), got {}",
            2 * x.c,
            geom.out_channels
        )));
    }
    if geom.kernel != 3 || geom.stride != 1 || geom.padding != 1 {
        return Err(Error::Config(
            "depthwise conv: requires k=3, stride 1, padding 1".to_string(),
        ));
    }
    Ok(())
}

fn check_pointwise(x: Shape4, geom: &ConvGeometry) -> Result<()> {
    if geom.kernel != 1 || geom.stride != 1 || geom.padding != 0 {
        return Err(Error::Config(
            "pointwise conv: requires k=1, stride 1, padding 0".to_string(),
        ));
    }
    if x.c % geom.groups != 0 {
        return Err(Error::Config(format!(
            "pointwise conv: {} input channels not divisible by {} groups",
            x.c, geom.groups
        )));
    }
    Ok(())
}

/// Depthwise convolution mapping `C` channels to `2C`.
pub fn depthwise_conv_forward<T: Scalar>(x: &Tensor4<T>, weight: &Tensor4<T>, geom: &ConvGeometry) -> Result<Tensor4<T>> {
    check_depthwise(x.shape(), geom)?;
    conv2d_forward(x, weight, geom)
}

pub fn depthwise_conv_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    geom: &ConvGeometry,
    dy: &Tensor4<T>,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    check_depthwise(x.shape(), geom)?;
    conv2d_backward(x, weight, geom, dy)
}

pub fn pointwise_group_conv_forward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    geom: &ConvGeometry,
) -> Result<Tensor4<T>> {
    check_pointwise(x.shape(), geom)?;
    conv2d_forward(x, weight, geom)
}

pub fn pointwise_group_conv_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    geom: &ConvGeometry,
    dy: &Tensor4<T>,
) -> Result<(Tensor4<T>, Tensor4<T>)> {
    check_pointwise(x.shape(), geom)?;
    conv2d_backward(x, weight, geom, dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: impl Into<Shape4>, rng: &mut ChaCha8Rng) -> Tensor4<f64> {
        let shape = shape.into();
        Tensor4::from_vec(shape, (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct quadruple loop over the textbook definition, groups = 1.
    fn naive_conv(x: &Tensor4<f64>, w: &Tensor4<f64>, stride: usize, pad: usize) -> Tensor4<f64> {
        let (xs, ws) = (x.shape(), w.shape());
        let oh = (xs.h + 2 * pad - ws.h) / stride + 1;
        let ow = (xs.w + 2 * pad - ws.w) / stride + 1;
        let mut y = Tensor4::zeros((xs.n, ws.n, oh, ow)).unwrap();
        for n in 0..xs.n {
            for o in 0..ws.n {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for c in 0..xs.c {
                            for ky in 0..ws.h {
                                for kx in 0..ws.w {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < xs.h && (ix as usize) < xs.w {
                                        acc += w.get(o, c, ky, kx) * x.get(n, c, iy as usize, ix as usize);
                                    }
                                }
                            }
                        }
                        y.set(n, o, oy, ox, acc);
                    }
                }
            }
        }
        y
    }

    #[test]
    fn stem_shapes() {
        let g = ConvGeometry::new(3, 64, 3, 2, 1, 1).unwrap();
        let x = Tensor4::<f32>::zeros((1, 3, 32, 32)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert_eq!(conv2d_forward(&x, &w, &g).unwrap().shape(), Shape4::new(1, 64, 16, 16));

        let g = ConvGeometry::new(1, 64, 3, 2, 1, 1).unwrap();
        let x = Tensor4::<f32>::zeros((1, 1, 28, 28)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert_eq!(conv2d_forward(&x, &w, &g).unwrap().shape(), Shape4::new(1, 64, 14, 14));
    }

    #[test]
    fn ones_kernel_sums_window() {
        let g = ConvGeometry::new(1, 1, 3, 1, 0, 1).unwrap();
        let x = Tensor4::<f32>::full((1, 1, 3, 3), 1.0).unwrap();
        let w = Tensor4::full(g.weight_shape(), 1.0).unwrap();
        let y = conv2d_forward(&x, &w, &g).unwrap();
        assert_eq!(y.shape(), Shape4::new(1, 1, 1, 1));
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(stride, pad) in &[(1, 0), (1, 1), (2, 1), (2, 0)] {
            let x = random((2, 4, 8, 8), &mut rng);
            let g = ConvGeometry::new(4, 3, 3, stride, pad, 1).unwrap();
            let w = random(g.weight_shape(), &mut rng);
            let fast = conv2d_forward(&x, &w, &g).unwrap();
            let slow = naive_conv(&x, &w, stride, pad);
            assert_eq!(fast.shape(), slow.shape());
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-12);
        }
    }

    #[test]
    fn channel_group_mismatch() {
        assert!(matches!(ConvGeometry::new(6, 8, 1, 1, 0, 4), Err(Error::Config(_))));
        let g = ConvGeometry::new(4, 4, 1, 1, 0, 1).unwrap();
        let x = Tensor4::<f32>::zeros((1, 3, 2, 2)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert!(matches!(conv2d_forward(&x, &w, &g), Err(Error::Shape(_))));
    }

    #[test]
    fn depthwise_doubles_channels() {
        let g = ConvGeometry::depthwise(64).unwrap();
        let x = Tensor4::<f32>::zeros((1, 64, 16, 16)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert_eq!(
            depthwise_conv_forward(&x, &w, &g).unwrap().shape(),
            Shape4::new(1, 128, 16, 16)
        );
    }

    #[test]
    fn depthwise_delta_kernel_copies_input() {
        let g = ConvGeometry::depthwise(1).unwrap();
        let mut w = Tensor4::<f64>::zeros(g.weight_shape()).unwrap();
        w.set(0, 0, 1, 1, 1.0);
        w.set(1, 0, 1, 1, 1.0);
        let x = Tensor4::from_vec((1, 1, 3, 3), (1..=9).map(f64::from).collect()).unwrap();
        let y = depthwise_conv_forward(&x, &w, &g).unwrap();
        assert_eq!(y.plane(0, 0), x.plane(0, 0));
        assert_eq!(y.plane(0, 1), x.plane(0, 0));
    }

    #[test]
    fn depthwise_channels_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ConvGeometry::depthwise(2).unwrap();
        let mut w = random(g.weight_shape(), &mut rng);
        for o in 0..2 {
            for i in 0..9 {
                w.data_mut()[o * 9 + i] = 0.0;
            }
        }
        let x = random((1, 2, 4, 4), &mut rng);
        let y = depthwise_conv_forward(&x, &w, &g).unwrap();
        assert!(y.plane(0, 0).iter().all(|&v| v == 0.0));
        assert!(y.plane(0, 1).iter().all(|&v| v == 0.0));
        assert!(y.plane(0, 2).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn depthwise_rejects_wrong_multiplier() {
        let g = ConvGeometry::new(4, 12, 3, 1, 1, 4).unwrap();
        let x = Tensor4::<f32>::zeros((1, 4, 4, 4)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert!(matches!(depthwise_conv_forward(&x, &w, &g), Err(Error::Config(_))));
    }

    #[test]
    fn pointwise_group_shapes_and_connectivity() {
        let g = ConvGeometry::pointwise(128, 64, 8).unwrap();
        assert_eq!(g.weight_shape(), Shape4::new(64, 16, 1, 1));
        let x = Tensor4::<f32>::zeros((1, 128, 16, 16)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert_eq!(
            pointwise_group_conv_forward(&x, &w, &g).unwrap().shape(),
            Shape4::new(1, 64, 16, 16)
        );

        let g = ConvGeometry::pointwise(512, 256, 8).unwrap();
        let x = Tensor4::<f32>::zeros((1, 512, 2, 2)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert_eq!(
            pointwise_group_conv_forward(&x, &w, &g).unwrap().shape(),
            Shape4::new(1, 256, 2, 2)
        );
    }

    #[test]
    fn pointwise_output_depends_only_on_own_group() {
        // Perturb one input channel; only outputs in the same group may move.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = ConvGeometry::pointwise(16, 8, 8).unwrap();
        let w = random(g.weight_shape(), &mut rng);
        let x = random((1, 16, 2, 2), &mut rng);
        let base = pointwise_group_conv_forward(&x, &w, &g).unwrap();
        for ic in 0..16 {
            let mut xp = x.clone();
            xp.plane_mut(0, ic)[0] += 1.0;
            let y = pointwise_group_conv_forward(&xp, &w, &g).unwrap();
            for oc in 0..8 {
                let changed = y.plane(0, oc) != base.plane(0, oc);
                assert_eq!(changed, oc == ic / 2, "ic={ic} oc={oc}");
            }
        }
    }

    #[test]
    fn pointwise_identity() {
        let g = ConvGeometry::pointwise(4, 4, 1).unwrap();
        let mut w = Tensor4::<f64>::zeros(g.weight_shape()).unwrap();
        for c in 0..4 {
            w.set(c, c, 0, 0, 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random((2, 4, 3, 3), &mut rng);
        assert_eq!(pointwise_group_conv_forward(&x, &w, &g).unwrap(), x);
    }

    #[test]
    fn pointwise_rejects_kernel() {
        let g = ConvGeometry::new(8, 8, 3, 1, 1, 8).unwrap();
        let x = Tensor4::<f32>::zeros((1, 8, 4, 4)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        assert!(matches!(pointwise_group_conv_forward(&x, &w, &g), Err(Error::Config(_))));
    }

    #[test]
    fn backward_rejects_bad_upstream() {
        let g = ConvGeometry::new(1, 1, 3, 1, 1, 1).unwrap();
        let x = Tensor4::<f64>::zeros((1, 1, 4, 4)).unwrap();
        let w = Tensor4::zeros(g.weight_shape()).unwrap();
        let dy = Tensor4::zeros((1, 1, 3, 3)).unwrap();
        assert!(matches!(conv2d_backward(&x, &w, &g, &dy), Err(Error::Shape(_))));
    }
}
