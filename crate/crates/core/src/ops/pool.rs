use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape4, Tensor4};

/// Max pooling with `-inf` padding and floor-mode output size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxPool {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl MaxPool {
    /// The 3x3, stride 2, padding 1 pool used between stages.
    pub const STAGE: MaxPool = MaxPool {
        kernel: 3,
        stride: 2,
        padding: 1,
    };

    pub fn output_extent(&self, input: usize) -> usize {
        (input + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn output_shape(&self, s: Shape4) -> Shape4 {
        Shape4::new(s.n, s.c, self.output_extent(s.h), self.output_extent(s.w))
    }

    /// Returns the pooled tensor and, for every output element, the flat index
    /// of the input element selected. Ties go to the first maximum in
    /// row-major window order, i.e. the lowest linear index.
    pub fn forward<T: Scalar>(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<usize>)> {
        let s = x.shape();
        if s.h + 2 * self.padding < self.kernel || s.w + 2 * self.padding < self.kernel {
            return Err(Error::Shape(format!("maxpool: input {s} smaller than window")));
        }
        let os = self.output_shape(s);
        let mut y = Tensor4::zeros(os)?;
        let mut argmax = vec![0usize; os.len()];
        let (k, st, p) = (self.kernel as isize, self.stride as isize, self.padding as isize);
        let mut out_i = 0;
        for n in 0..s.n {
            for c in 0..s.c {
                let base = (n * s.c + c) * s.plane();
                let plane = x.plane(n, c);
                for oy in 0..os.h as isize {
                    for ox in 0..os.w as isize {
                        let mut best = T::NEG_INFINITY;
                        let mut best_i = usize::MAX;
                        for ky in 0..k {
                            let iy = oy * st + ky - p;
                            if iy < 0 || iy >= s.h as isize {
                                continue;
                            }
                            for kx in 0..k {
                                let ix = ox * st + kx - p;
                                if ix < 0 || ix >= s.w as isize {
                                    continue;
                                }
                                let li = iy as usize * s.w + ix as usize;
                                let v = plane[li];
                                if best_i == usize::MAX || v > best {
                                    best = v;
                                    best_i = li;
                                }
                            }
                        }
                        if best_i == usize::MAX {
                            return Err(Error::Shape(format!(
                                "maxpool: window at ({oy},{ox}) covers only padding for {s}"
                            )));
                        }
                        y.data_mut()[out_i] = best;
                        argmax[out_i] = base + best_i;
                        out_i += 1;
                    }
                }
            }
        }
        Ok((y, argmax))
    }

    pub fn backward<T: Scalar>(&self, input: Shape4, argmax: &[usize], dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        if dy.shape() != self.output_shape(input) || argmax.len() != dy.len() {
            return Err(Error::Shape(format!(
                "maxpool backward: upstream {} does not match pooled {}",
                dy.shape(),
                self.output_shape(input)
            )));
        }
        let mut dx = Tensor4::zeros(input)?;
        let d = dx.data_mut();
        for (&i, &g) in argmax.iter().zip(dy.data()) {
            d[i] += g;
        }
        Ok(dx)
    }
}

/// Averages each channel over a spatial window that must cover the whole map.
/// Output is `(n, c, 1, 1)`.
pub fn global_avgpool<T: Scalar>(x: &Tensor4<T>, window: (usize, usize)) -> Result<Tensor4<T>> {
    let s = x.shape();
    if (s.h, s.w) != window {
        return Err(Error::Shape(format!(
            "avgpool: input {s} does not match the {}x{} window",
            window.0, window.1
        )));
    }
    let inv = T::ONE / T::from_usize(s.plane());
    let mut y = Tensor4::zeros((s.n, s.c, 1, 1))?;
    for n in 0..s.n {
        for c in 0..s.c {
            let v = x.plane(n, c).iter().copied().sum::<T>() * inv;
            y.set(n, c, 0, 0, v);
        }
    }
    Ok(y)
}

pub fn global_avgpool_backward<T: Scalar>(input: Shape4, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    if dy.shape() != Shape4::new(input.n, input.c, 1, 1) {
        return Err(Error::Shape(format!(
            "avgpool backward: upstream {} for input {input}",
            dy.shape()
        )));
    }
    let inv = T::ONE / T::from_usize(input.plane());
    let mut dx = Tensor4::zeros(input)?;
    for n in 0..input.n {
        for c in 0..input.c {
            let g = dy.get(n, c, 0, 0) * inv;
            dx.plane_mut(n, c).iter_mut().for_each(|v| *v = g);
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_pool_shapes() {
        let p = MaxPool::STAGE;
        let x = Tensor4::<f32>::zeros((1, 64, 16, 16)).unwrap();
        assert_eq!(p.forward(&x).unwrap().0.shape(), Shape4::new(1, 64, 8, 8));
        let x = Tensor4::<f32>::zeros((1, 128, 7, 7)).unwrap();
        assert_eq!(p.forward(&x).unwrap().0.shape(), Shape4::new(1, 128, 4, 4));
        let x = Tensor4::<f32>::zeros((1, 8, 1, 1)).unwrap();
        assert_eq!(p.forward(&x).unwrap().0.shape(), Shape4::new(1, 8, 1, 1));
    }

    #[test]
    fn constant_input_constant_output() {
        let x = Tensor4::<f32>::full((2, 3, 5, 5), 1.5).unwrap();
        let (y, _) = MaxPool::STAGE.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn ties_route_to_lowest_index() {
        let x = Tensor4::<f64>::full((1, 1, 2, 2), 1.0).unwrap();
        let (y, argmax) = MaxPool::STAGE.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape4::new(1, 1, 1, 1));
        assert_eq!(argmax, vec![0]);
        let dy = Tensor4::full((1, 1, 1, 1), 3.0).unwrap();
        let dx = MaxPool::STAGE.backward(x.shape(), &argmax, &dy).unwrap();
        assert_eq!(dx.data(), &[3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn avgpool_mean() {
        let x = Tensor4::from_vec((1, 1, 2, 2), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avgpool(&x, (2, 2)).unwrap().data(), &[2.5]);
        let c = Tensor4::<f64>::full((1, 10, 2, 2), 0.75).unwrap();
        assert!(global_avgpool(&c, (2, 2)).unwrap().data().iter().all(|&v| v == 0.75));
        let bad = Tensor4::<f64>::zeros((1, 10, 3, 3)).unwrap();
        assert!(matches!(global_avgpool(&bad, (2, 2)), Err(Error::Shape(_))));
    }
}
