//! Dense and single-channel 3×3 valid convolution layers with hand-written
//! backward passes. Weights are plain row-major buffers.

use rand::Rng;

use super::Scalar;

/// Fan-in scaled uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub(crate) fn init_uniform<T: Scalar, R: Rng>(rng: &mut R, n: usize, fan_in: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
}

/// `y = x W + b`, `W` stored `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn init<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: init_uniform(rng, inputs * outputs, inputs),
            bias: init_uniform(rng, outputs, inputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weight: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs] }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inputs);
        let mut y = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let row = &self.weight[i * self.outputs..(i + 1) * self.outputs];
            for (yj, &w) in y.iter_mut().zip(row) {
                *yj = *yj + xi * w;
            }
        }
        y
    }

    /// Accumulate parameter gradients into `grad`; return dL/dx when asked.
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Dense<T>, want_input_grad: bool) -> Option<Vec<T>> {
        for (gb, &d) in grad.bias.iter_mut().zip(dy) {
            *gb = *gb + d;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let row = &mut grad.weight[i * self.outputs..(i + 1) * self.outputs];
            for (g, &d) in row.iter_mut().zip(dy) {
                *g = *g + xi * d;
            }
        }
        want_input_grad.then(|| {
            (0..self.inputs)
                .map(|i| {
                    let row = &self.weight[i * self.outputs..(i + 1) * self.outputs];
                    row.iter().zip(dy).fold(T::zero(), |acc, (&w, &d)| acc + w * d)
                })
                .collect()
        })
    }
}

/// One-channel 3×3 convolution, stride 1, no padding, no dilation.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3<T> {
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
}

pub const KERNEL: usize = 3;

impl<T: Scalar> Conv3<T> {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        let fan_in = KERNEL * KERNEL;
        Conv3 { kernel: init_uniform(rng, fan_in, fan_in), bias: init_uniform(rng, 1, fan_in) }
    }

    pub fn zeros() -> Self {
        Conv3 { kernel: vec![T::zero(); KERNEL * KERNEL], bias: vec![T::zero()] }
    }

    /// `x` is `h × w`; output is `(h-2) × (w-2)`.
    pub fn forward(&self, x: &[T], h: usize, w: usize) -> Vec<T> {
        let (oh, ow) = (h - 2, w - 2);
        let mut y = vec![self.bias[0]; oh * ow];
        for i in 0..oh {
            let out = &mut y[i * ow..(i + 1) * ow];
            for u in 0..KERNEL {
                let src = &x[(i + u) * w..(i + u + 1) * w];
                for v in 0..KERNEL {
                    let k = self.kernel[u * KERNEL + v];
                    for (o, &s) in out.iter_mut().zip(&src[v..v + ow]) {
                        *o = *o + k * s;
                    }
                }
            }
        }
        y
    }

    pub fn backward(
        &self,
        x: &[T],
        h: usize,
        w: usize,
        dy: &[T],
        grad: &mut Conv3<T>,
        want_input_grad: bool,
    ) -> Option<Vec<T>> {
        let (oh, ow) = (h - 2, w - 2);
        grad.bias[0] = grad.bias[0] + dy.iter().fold(T::zero(), |a, &d| a + d);
        for i in 0..oh {
            let d_row = &dy[i * ow..(i + 1) * ow];
            for u in 0..KERNEL {
                let src = &x[(i + u) * w..(i + u + 1) * w];
                for v in 0..KERNEL {
                    let dot = d_row.iter().zip(&src[v..v + ow]).fold(T::zero(), |a, (&d, &s)| a + d * s);
                    grad.kernel[u * KERNEL + v] = grad.kernel[u * KERNEL + v] + dot;
                }
            }
        }
        want_input_grad.then(|| {
            let mut dx = vec![T::zero(); h * w];
            for i in 0..oh {
                let d_row = &dy[i * ow..(i + 1) * ow];
                for u in 0..KERNEL {
                    let dst = &mut dx[(i + u) * w..(i + u + 1) * w];
                    for v in 0..KERNEL {
                        let k = self.kernel[u * KERNEL + v];
                        for (o, &d) in dst[v..v + ow].iter_mut().zip(d_row) {
                            *o = *o + k * d;
                        }
                    }
                }
            }
            dx
        })
    }
}

pub(crate) fn relu<T: Scalar>(z: &[T]) -> Vec<T> {
    z.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// dL/dz from dL/da for `a = relu(z)`.
pub(crate) fn relu_backward<T: Scalar>(z: &[T], da: &[T]) -> Vec<T> {
    z.iter().zip(da).map(|(&v, &d)| if v > T::zero() { d } else { T::zero() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_matches_direct_definition() {
        let (h, w) = (5, 6);
        let x: Vec<f64> = (0..h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let conv = Conv3 { kernel: (0..9).map(|i| i as f64 - 4.0).collect(), bias: vec![0.5] };
        let y = conv.forward(&x, h, w);
        for i in 0..h - 2 {
            for j in 0..w - 2 {
                let mut s = 0.5;
                for u in 0..3 {
                    for v in 0..3 {
                        s += conv.kernel[u * 3 + v] * x[(i + u) * w + j + v];
                    }
                }
                assert!((y[i * (w - 2) + j] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_matches_direct_definition() {
        let d = Dense { inputs: 2, outputs: 3, weight: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], bias: vec![0.1, 0.2, 0.3] };
        assert_eq!(d.forward(&[1.0, -1.0]), vec![1.0 - 4.0 + 0.1, 2.0 - 5.0 + 0.2, 3.0 - 6.0 + 0.3]);
    }
}
