//! Network building blocks with explicit forward/backward passes.
//!
//! Batch tensors are channels-first: conv layers see [N, C, T, F], temporal
//! layers [N, T, H]. Every layer caches what its backward pass needs and
//! accumulates parameter gradients on `backward`.

use ndarray::{Array1, Array2, Array3, Array4, Axis};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn fan_in_uniform(rng: &mut ChaCha12Rng, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Callback over (name, shape, values) of every parameter tensor.
pub type ParamFn<'a> = dyn FnMut(&str, &[usize], &[f64]) + 'a;
/// Callback over (name, values, grads) of every parameter tensor.
pub type ParamMutFn<'a> = dyn FnMut(&str, &mut [f64], &mut [f64]) + 'a;

pub struct Conv2d {
    pub w: Array4<f64>, // [Cout, Cin, KT, KF]
    pub b: Array1<f64>,
    pub gw: Array4<f64>,
    pub gb: Array1<f64>,
    cache_x: Option<Array4<f64>>,
}

impl Conv2d {
    pub fn new(rng: &mut ChaCha12Rng, c_in: usize, c_out: usize, kt: usize, kf: usize) -> Self {
        assert!(kt % 2 == 1 && kf % 2 == 1, "odd kernels only");
        let fan_in = c_in * kt * kf;
        let w = Array4::from_shape_vec(
            (c_out, c_in, kt, kf),
            fan_in_uniform(rng, fan_in, c_out * fan_in),
        )
        .unwrap();
        let b = Array1::from_vec(fan_in_uniform(rng, fan_in, c_out));
        Conv2d {
            gw: Array4::zeros(w.raw_dim()),
            gb: Array1::zeros(b.raw_dim()),
            w,
            b,
            cache_x: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.w.shape()[0]
    }

    fn kernel(&self) -> (usize, usize) {
        (self.w.shape()[2], self.w.shape()[3])
    }

    /// Patch matrix for one sample, laid out [Cin*KT*KF, T*F] so each kernel
    /// offset fills contiguous frequency runs.
    fn im2col(x: &ndarray::ArrayView3<f64>, kt: usize, kf: usize) -> Array2<f64> {
        let (c_in, t_len, f_len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (pt, pf) = (kt as isize / 2, kf as isize / 2);
        let k = c_in * kt * kf;
        let mut col = Array2::<f64>::zeros((k, t_len * f_len));
        let x_slice = x.as_slice().expect("standard layout input");
        let col_slice = col.as_slice_mut().unwrap();
        for c in 0..c_in {
            for dt in 0..kt {
                for df in 0..kf {
                    let row = (c * kt + dt) * kf + df;
                    let shift = df as isize - pf;
                    // destination f range with a valid source f+shift
                    let f0 = (-shift).max(0) as usize;
                    let f1 = (f_len as isize - shift).min(f_len as isize) as usize;
                    if f0 >= f1 {
                        continue;
                    }
                    for t in 0..t_len {
                        let tt = t as isize + dt as isize - pt;
                        if tt < 0 || tt >= t_len as isize {
                            continue;
                        }
                        let src_base = (c * t_len + tt as usize) * f_len;
                        let dst_base = row * (t_len * f_len) + t * f_len;
                        let src = &x_slice
                            [(src_base as isize + f0 as isize + shift) as usize
                                ..(src_base as isize + f1 as isize + shift) as usize];
                        col_slice[dst_base + f0..dst_base + f1].copy_from_slice(src);
                    }
                }
            }
        }
        col
    }

    /// Scatter-add the patch-matrix gradient back onto the input.
    fn col2im(gcol: &Array2<f64>, c_in: usize, t_len: usize, f_len: usize, kt: usize, kf: usize) -> Array3<f64> {
        let (pt, pf) = (kt as isize / 2, kf as isize / 2);
        let mut gx = Array3::<f64>::zeros((c_in, t_len, f_len));
        let g_slice = gcol.as_slice().unwrap();
        let gx_slice = gx.as_slice_mut().unwrap();
        for c in 0..c_in {
            for dt in 0..kt {
                for df in 0..kf {
                    let row = (c * kt + dt) * kf + df;
                    let shift = df as isize - pf;
                    let f0 = (-shift).max(0) as usize;
                    let f1 = (f_len as isize - shift).min(f_len as isize) as usize;
                    if f0 >= f1 {
                        continue;
                    }
                    for t in 0..t_len {
                        let tt = t as isize + dt as isize - pt;
                        if tt < 0 || tt >= t_len as isize {
                            continue;
                        }
                        let dst_base = (c * t_len + tt as usize) * f_len;
                        let src_base = row * (t_len * f_len) + t * f_len;
                        let dst = (dst_base as isize + f0 as isize + shift) as usize;
                        for (g, s) in gx_slice[dst..dst + (f1 - f0)]
                            .iter_mut()
                            .zip(&g_slice[src_base + f0..src_base + f1])
                        {
                            *g += s;
                        }
                    }
                }
            }
        }
        gx
    }

    /// Same-padding convolution, [N, Cin, T, F] -> [N, Cout, T, F].
    pub fn forward(&mut self, x: Array4<f64>) -> Array4<f64> {
        let (n, _c_in, t_len, f_len) = x.dim();
        let (kt, kf) = self.kernel();
        let c_out = self.out_channels();
        let k = self.w.len() / c_out;
        let w_flat = self.w.view().into_shape_with_order((c_out, k)).unwrap();

        let outs: Vec<Array2<f64>> = {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let col = Self::im2col(&x.index_axis(Axis(0), i), kt, kf);
                    let mut out = w_flat.dot(&col); // [Cout, TF]
                    for (mut row, &b) in out.rows_mut().into_iter().zip(&self.b) {
                        row += b;
                    }
                    out
                })
                .collect()
        };
        let mut y = Array4::zeros((n, c_out, t_len, f_len));
        for (i, o) in outs.into_iter().enumerate() {
            y.index_axis_mut(Axis(0), i).assign(
                &o.into_shape_with_order((c_out, t_len, f_len)).unwrap(),
            );
        }
        self.cache_x = Some(x);
        y
    }

    /// Returns grad wrt input; accumulates gw/gb.
    pub fn backward(&mut self, gy: &Array4<f64>) -> Array4<f64> {
        let x = self.cache_x.take().expect("forward before backward");
        let (n, c_in, t_len, f_len) = x.dim();
        let (kt, kf) = self.kernel();
        let c_out = self.out_channels();
        let k = self.w.len() / c_out;
        let w_flat = self
            .w
            .view()
            .into_shape_with_order((c_out, k))
            .unwrap()
            .to_owned();

        use rayon::prelude::*;
        let per_sample: Vec<(Array2<f64>, Array1<f64>, Array3<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let col = Self::im2col(&x.index_axis(Axis(0), i), kt, kf);
                let gy_i = gy.index_axis(Axis(0), i); // [Cout, T, F]
                let gy_flat = gy_i.into_shape_with_order((c_out, t_len * f_len)).unwrap();
                let gw = gy_flat.dot(&col.t()); // [Cout, K]
                let gb = gy_flat.sum_axis(Axis(1));
                let gcol = w_flat.t().dot(&gy_flat); // [K, TF]
                let gx = Self::col2im(&gcol, c_in, t_len, f_len, kt, kf);
                (gw, gb, gx)
            })
            .collect();

        let mut gx_all = Array4::zeros((n, c_in, t_len, f_len));
        for (i, (gw, gb, gx)) in per_sample.into_iter().enumerate() {
            let gw4 = gw
                .into_shape_with_order(self.w.raw_dim())
                .unwrap();
            self.gw += &gw4;
            self.gb += &gb;
            gx_all.index_axis_mut(Axis(0), i).assign(&gx);
        }
        gx_all
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        f(
            &format!("{prefix}.w"),
            self.w.shape(),
            self.w.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.b"),
            self.b.shape(),
            self.b.as_slice().unwrap(),
        );
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        f(
            &format!("{prefix}.w"),
            self.w.as_slice_mut().unwrap(),
            self.gw.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.b"),
            self.b.as_slice_mut().unwrap(),
            self.gb.as_slice_mut().unwrap(),
        );
    }
}

pub struct BatchNorm2d {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub g_gamma: Array1<f64>,
    pub g_beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<(Array4<f64>, Array1<f64>)>, // (x_hat, inv_std)
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            g_gamma: Array1::zeros(channels),
            g_beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array4<f64>, training: bool) -> Array4<f64> {
        let (n, c, t_len, f_len) = x.dim();
        let count = (n * t_len * f_len) as f64;
        let mut y = Array4::zeros(x.raw_dim());
        if training {
            let mut x_hat = Array4::zeros(x.raw_dim());
            let mut inv_std = Array1::zeros(c);
            for ch in 0..c {
                let xc = x.index_axis(Axis(1), ch);
                let mean = xc.sum() / count;
                let var = xc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
                let istd = 1.0 / (var + self.eps).sqrt();
                inv_std[ch] = istd;
                let g = self.gamma[ch];
                let b = self.beta[ch];
                let mut xh = x_hat.index_axis_mut(Axis(1), ch);
                let mut yc = y.index_axis_mut(Axis(1), ch);
                ndarray::Zip::from(&mut xh).and(&mut yc).and(&xc).for_each(
                    |xh, yc, &xv| {
                        *xh = (xv - mean) * istd;
                        *yc = g * *xh + b;
                    },
                );
                self.running_mean[ch] =
                    (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
                self.running_var[ch] =
                    (1.0 - self.momentum) * self.running_var[ch] + self.momentum * var;
            }
            self.cache = Some((x_hat, inv_std));
        } else {
            for ch in 0..c {
                let mean = self.running_mean[ch];
                let istd = 1.0 / (self.running_var[ch] + self.eps).sqrt();
                let g = self.gamma[ch];
                let b = self.beta[ch];
                let xc = x.index_axis(Axis(1), ch);
                let mut yc = y.index_axis_mut(Axis(1), ch);
                ndarray::Zip::from(&mut yc).and(&xc).for_each(|yc, &xv| {
                    *yc = g * (xv - mean) * istd + b;
                });
            }
        }
        y
    }

    /// Training-mode backward (full batch-statistics Jacobian).
    pub fn backward(&mut self, gy: &Array4<f64>) -> Array4<f64> {
        let (x_hat, inv_std) = self.cache.take().expect("forward before backward");
        let (n, c, t_len, f_len) = x_hat.dim();
        let count = (n * t_len * f_len) as f64;
        let mut gx = Array4::zeros(x_hat.raw_dim());
        for ch in 0..c {
            let xh = x_hat.index_axis(Axis(1), ch);
            let gyc = gy.index_axis(Axis(1), ch);
            let sum_gy = gyc.sum();
            let sum_gy_xh = gyc.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>();
            self.g_beta[ch] += sum_gy;
            self.g_gamma[ch] += sum_gy_xh;
            let scale = self.gamma[ch] * inv_std[ch];
            let mean_gy = sum_gy / count;
            let mean_gy_xh = sum_gy_xh / count;
            let mut gxc = gx.index_axis_mut(Axis(1), ch);
            ndarray::Zip::from(&mut gxc).and(&gyc).and(&xh).for_each(|gx, &gy, &xh| {
                *gx = scale * (gy - mean_gy - xh * mean_gy_xh);
            });
        }
        gx
    }

    pub fn num_params(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        f(
            &format!("{prefix}.gamma"),
            self.gamma.shape(),
            self.gamma.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.beta"),
            self.beta.shape(),
            self.beta.as_slice().unwrap(),
        );
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        f(
            &format!("{prefix}.gamma"),
            self.gamma.as_slice_mut().unwrap(),
            self.g_gamma.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.beta"),
            self.beta.as_slice_mut().unwrap(),
            self.g_beta.as_slice_mut().unwrap(),
        );
    }

    /// Running statistics, serialized alongside parameters.
    pub fn for_each_state(&self, prefix: &str, f: &mut ParamFn) {
        f(
            &format!("{prefix}.running_mean"),
            self.running_mean.shape(),
            self.running_mean.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.running_var"),
            self.running_var.shape(),
            self.running_var.as_slice().unwrap(),
        );
    }

    pub fn for_each_state_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(
            &format!("{prefix}.running_mean"),
            self.running_mean.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.running_var"),
            self.running_var.as_slice_mut().unwrap(),
        );
    }
}

/// Sum of max- and average-pooling over non-overlapping windows along the
/// frequency axis; a trailing partial window is dropped (floor semantics).
pub struct FreqPoolSum {
    pub window: usize,
    cache: Option<(Array4<usize>, usize)>, // (argmax per output cell, input F)
}

impl FreqPoolSum {
    pub fn new(window: usize) -> Self {
        FreqPoolSum {
            window,
            cache: None,
        }
    }

    pub fn out_len(&self, f_in: usize) -> usize {
        f_in / self.window
    }

    pub fn forward(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let (n, c, t_len, f_in) = x.dim();
        let f_out = self.out_len(f_in);
        let m = self.window;
        let mut y = Array4::zeros((n, c, t_len, f_out));
        let mut argmax = Array4::<usize>::zeros((n, c, t_len, f_out));
        for i in 0..n {
            for ch in 0..c {
                for t in 0..t_len {
                    for fo in 0..f_out {
                        let base = fo * m;
                        let mut best = f64::NEG_INFINITY;
                        let mut best_j = base;
                        let mut sum = 0.0;
                        for j in base..base + m {
                            let v = x[[i, ch, t, j]];
                            sum += v;
                            if v > best {
                                best = v;
                                best_j = j;
                            }
                        }
                        y[[i, ch, t, fo]] = best + sum / m as f64;
                        argmax[[i, ch, t, fo]] = best_j;
                    }
                }
            }
        }
        self.cache = Some((argmax, f_in));
        y
    }

    pub fn backward(&mut self, gy: &Array4<f64>) -> Array4<f64> {
        let (argmax, f_in) = self.cache.take().expect("forward before backward");
        let (n, c, t_len, f_out) = gy.dim();
        let m = self.window;
        let mut gx = Array4::zeros((n, c, t_len, f_in));
        for i in 0..n {
            for ch in 0..c {
                for t in 0..t_len {
                    for fo in 0..f_out {
                        let g = gy[[i, ch, t, fo]];
                        gx[[i, ch, t, argmax[[i, ch, t, fo]]]] += g;
                        let base = fo * m;
                        let avg = g / m as f64;
                        for j in base..base + m {
                            gx[[i, ch, t, j]] += avg;
                        }
                    }
                }
            }
        }
        gx
    }
}

/// ELU activation; gradient is reconstructed from the cached output.
pub struct Elu {
    pub alpha: f64,
    cache_y: Option<Array4<f64>>,
}

impl Elu {
    pub fn new(alpha: f64) -> Self {
        Elu {
            alpha,
            cache_y: None,
        }
    }

    pub fn apply(alpha: f64, x: f64) -> f64 {
        if x >= 0.0 {
            x
        } else {
            alpha * (x.exp() - 1.0)
        }
    }

    pub fn forward(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let y = x.mapv(|v| Self::apply(self.alpha, v));
        self.cache_y = Some(y.clone());
        y
    }

    pub fn backward(&mut self, gy: &Array4<f64>) -> Array4<f64> {
        let y = self.cache_y.take().expect("forward before backward");
        let mut gx = gy.clone();
        ndarray::Zip::from(&mut gx).and(&y).for_each(|g, &yv| {
            if yv < 0.0 {
                *g *= yv + self.alpha;
            }
        });
        gx
    }
}

/// Per-frame linear map, [N, T, In] -> [N, T, Out].
pub struct Linear {
    pub w: Array2<f64>, // [Out, In]
    pub b: Array1<f64>,
    pub gw: Array2<f64>,
    pub gb: Array1<f64>,
    cache_x: Option<Array3<f64>>,
}

impl Linear {
    pub fn new(rng: &mut ChaCha12Rng, in_features: usize, out_features: usize) -> Self {
        let w = Array2::from_shape_vec(
            (out_features, in_features),
            fan_in_uniform(rng, in_features, out_features * in_features),
        )
        .unwrap();
        let b = Array1::from_vec(fan_in_uniform(rng, in_features, out_features));
        Linear {
            gw: Array2::zeros(w.raw_dim()),
            gb: Array1::zeros(b.raw_dim()),
            w,
            b,
            cache_x: None,
        }
    }

    pub fn forward(&mut self, x: Array3<f64>) -> Array3<f64> {
        let (n, t_len, in_f) = x.dim();
        let out_f = self.w.shape()[0];
        let flat = x.view().into_shape_with_order((n * t_len, in_f)).unwrap();
        let mut y = flat.dot(&self.w.t());
        for mut row in y.rows_mut() {
            row += &self.b;
        }
        self.cache_x = Some(x);
        y.into_shape_with_order((n, t_len, out_f)).unwrap()
    }

    pub fn backward(&mut self, gy: &Array3<f64>) -> Array3<f64> {
        let x = self.cache_x.take().expect("forward before backward");
        let (n, t_len, in_f) = x.dim();
        let out_f = self.w.shape()[0];
        let x_flat = x.view().into_shape_with_order((n * t_len, in_f)).unwrap();
        let gy_flat = gy.view().into_shape_with_order((n * t_len, out_f)).unwrap();
        self.gw += &gy_flat.t().dot(&x_flat);
        self.gb += &gy_flat.sum_axis(Axis(0));
        let gx = gy_flat.dot(&self.w);
        gx.into_shape_with_order((n, t_len, in_f)).unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        f(
            &format!("{prefix}.w"),
            self.w.shape(),
            self.w.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.b"),
            self.b.shape(),
            self.b.as_slice().unwrap(),
        );
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        f(
            &format!("{prefix}.w"),
            self.w.as_slice_mut().unwrap(),
            self.gw.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.b"),
            self.b.as_slice_mut().unwrap(),
            self.gb.as_slice_mut().unwrap(),
        );
    }
}

/// Final regression layer: maps the length-T framewise vector to one scalar.
pub struct UtteranceHead {
    pub w: Array1<f64>, // [T]
    pub b: f64,
    pub gw: Array1<f64>,
    pub gb: f64,
    cache_x: Option<Array2<f64>>,
}

impl UtteranceHead {
    pub fn new(rng: &mut ChaCha12Rng, num_frames: usize) -> Self {
        let w = Array1::from_vec(fan_in_uniform(rng, num_frames, num_frames));
        let b = fan_in_uniform(rng, num_frames, 1)[0];
        UtteranceHead {
            gw: Array1::zeros(w.raw_dim()),
            gb: 0.0,
            w,
            b,
        cache_x: None,
        }
    }

    /// [N, T] framewise predictions -> [N] utterance predictions.
    pub fn forward(&mut self, x: Array2<f64>) -> Array1<f64> {
        let y = x.dot(&self.w) + self.b;
        self.cache_x = Some(x);
        y
    }

    pub fn backward(&mut self, gy: &Array1<f64>) -> Array2<f64> {
        let x = self.cache_x.take().expect("forward before backward");
        let (n, t_len) = x.dim();
        for i in 0..n {
            let g = gy[i];
            self.gb += g;
            ndarray::Zip::from(&mut self.gw)
                .and(&x.row(i))
                .for_each(|gw, &xv| *gw += g * xv);
        }
        let mut gx = Array2::zeros((n, t_len));
        for i in 0..n {
            let g = gy[i];
            ndarray::Zip::from(&mut gx.row_mut(i))
                .and(&self.w)
                .for_each(|gx, &wv| *gx = g * wv);
        }
        gx
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + 1
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        f(
            &format!("{prefix}.w"),
            self.w.shape(),
            self.w.as_slice().unwrap(),
        );
        f(&format!("{prefix}.b"), &[1], std::slice::from_ref(&self.b));
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        f(
            &format!("{prefix}.w"),
            self.w.as_slice_mut().unwrap(),
            self.gw.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.b"),
            std::slice::from_mut(&mut self.b),
            std::slice::from_mut(&mut self.gb),
        );
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
