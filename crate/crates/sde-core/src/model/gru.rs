//! Bi-directional gated recurrent layers with tanh state activation.
//!
//! Gate layout follows the (reset, update, candidate) convention:
//!   r_t = sigmoid(W_ir x_t + b_ir + W_hr h_{t-1} + b_hr)
//!   z_t = sigmoid(W_iz x_t + b_iz + W_hz h_{t-1} + b_hz)
//!   n_t = tanh(W_in x_t + b_in + r_t (W_hn h_{t-1} + b_hn))
//!   h_t = (1 - z_t) n_t + z_t h_{t-1}

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand_chacha::ChaCha12Rng;

use super::layers::{fan_in_uniform, sigmoid, ParamFn, ParamMutFn};

pub struct GruDirection {
    pub w_ih: Array2<f64>, // [3H, In]
    pub w_hh: Array2<f64>, // [3H, H]
    pub b_ih: Array1<f64>,
    pub b_hh: Array1<f64>,
    pub gw_ih: Array2<f64>,
    pub gw_hh: Array2<f64>,
    pub gb_ih: Array1<f64>,
    pub gb_hh: Array1<f64>,
    cache: Option<StepCache>,
}

struct StepCache {
    x: Array3<f64>,       // [N, T, In]
    r: Array3<f64>,       // [N, T, H]
    z: Array3<f64>,       // [N, T, H]
    n: Array3<f64>,       // [N, T, H]
    gh_n: Array3<f64>,    // [N, T, H], the W_hn h_{t-1} + b_hn term
    h_prev: Array3<f64>,  // [N, T, H], state entering each step
}

impl GruDirection {
    pub fn new(rng: &mut ChaCha12Rng, input: usize, hidden: usize) -> Self {
        let w_ih = Array2::from_shape_vec(
            (3 * hidden, input),
            fan_in_uniform(rng, input, 3 * hidden * input),
        )
        .unwrap();
        let w_hh = Array2::from_shape_vec(
            (3 * hidden, hidden),
            fan_in_uniform(rng, hidden, 3 * hidden * hidden),
        )
        .unwrap();
        let b_ih = Array1::from_vec(fan_in_uniform(rng, input, 3 * hidden));
        let b_hh = Array1::from_vec(fan_in_uniform(rng, hidden, 3 * hidden));
        GruDirection {
            gw_ih: Array2::zeros(w_ih.raw_dim()),
            gw_hh: Array2::zeros(w_hh.raw_dim()),
            gb_ih: Array1::zeros(b_ih.raw_dim()),
            gb_hh: Array1::zeros(b_hh.raw_dim()),
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            cache: None,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    /// Forward over [N, T, In] in natural time order, returning [N, T, H].
    pub fn forward(&mut self, x: Array3<f64>) -> Array3<f64> {
        let (n, t_len, in_f) = x.dim();
        let h_dim = self.hidden();
        // Input projections for all steps at once.
        let x_flat = x.view().into_shape_with_order((n * t_len, in_f)).unwrap();
        let mut gi = x_flat.dot(&self.w_ih.t());
        for mut row in gi.rows_mut() {
            row += &self.b_ih;
        }
        let gi = gi.into_shape_with_order((n, t_len, 3 * h_dim)).unwrap();

        let mut h = Array2::<f64>::zeros((n, h_dim));
        let mut out = Array3::zeros((n, t_len, h_dim));
        let mut cr = Array3::zeros((n, t_len, h_dim));
        let mut cz = Array3::zeros((n, t_len, h_dim));
        let mut cn = Array3::zeros((n, t_len, h_dim));
        let mut cgh = Array3::zeros((n, t_len, h_dim));
        let mut chp = Array3::zeros((n, t_len, h_dim));
        for t in 0..t_len {
            chp.slice_mut(s![.., t, ..]).assign(&h);
            let mut gh = h.dot(&self.w_hh.t());
            for mut row in gh.rows_mut() {
                row += &self.b_hh;
            }
            for i in 0..n {
                for j in 0..h_dim {
                    let gir = gi[[i, t, j]];
                    let giz = gi[[i, t, h_dim + j]];
                    let gin = gi[[i, t, 2 * h_dim + j]];
                    let ghr = gh[[i, j]];
                    let ghz = gh[[i, h_dim + j]];
                    let ghn = gh[[i, 2 * h_dim + j]];
                    let r = sigmoid(gir + ghr);
                    let z = sigmoid(giz + ghz);
                    let cand = (gin + r * ghn).tanh();
                    let hp = h[[i, j]];
                    let hv = (1.0 - z) * cand + z * hp;
                    cr[[i, t, j]] = r;
                    cz[[i, t, j]] = z;
                    cn[[i, t, j]] = cand;
                    cgh[[i, t, j]] = ghn;
                    out[[i, t, j]] = hv;
                    h[[i, j]] = hv;
                }
            }
        }
        self.cache = Some(StepCache {
            x,
            r: cr,
            z: cz,
            n: cn,
            gh_n: cgh,
            h_prev: chp,
        });
        out
    }

    /// BPTT given the gradient on every output step; returns grad wrt input.
    pub fn backward(&mut self, gy: &Array3<f64>) -> Array3<f64> {
        let cache = self.cache.take().expect("forward before backward");
        let (n, t_len, in_f) = cache.x.dim();
        let h_dim = self.hidden();

        let mut dgi = Array3::<f64>::zeros((n, t_len, 3 * h_dim));
        let mut dh_next = Array2::<f64>::zeros((n, h_dim));
        for t in (0..t_len).rev() {
            // dgh for this step, [N, 3H].
            let mut dgh = Array2::<f64>::zeros((n, 3 * h_dim));
            for i in 0..n {
                for j in 0..h_dim {
                    let dh = gy[[i, t, j]] + dh_next[[i, j]];
                    let r = cache.r[[i, t, j]];
                    let z = cache.z[[i, t, j]];
                    let cand = cache.n[[i, t, j]];
                    let ghn = cache.gh_n[[i, t, j]];
                    let hp = cache.h_prev[[i, t, j]];

                    let dn = dh * (1.0 - z);
                    let dz = dh * (hp - cand);
                    let mut dhp = dh * z;

                    let dn_pre = dn * (1.0 - cand * cand);
                    let dr = dn_pre * ghn;
                    let dghn = dn_pre * r;
                    let dr_pre = dr * r * (1.0 - r);
                    let dz_pre = dz * z * (1.0 - z);

                    dgi[[i, t, j]] = dr_pre;
                    dgi[[i, t, h_dim + j]] = dz_pre;
                    dgi[[i, t, 2 * h_dim + j]] = dn_pre;
                    dgh[[i, j]] = dr_pre;
                    dgh[[i, h_dim + j]] = dz_pre;
                    dgh[[i, 2 * h_dim + j]] = dghn;
                    // Direct carry into h_{t-1}; the W_hh path is added below.
                    dh_next[[i, j]] = dhp;
                    dhp = 0.0;
                    let _ = dhp;
                }
            }
            let hp_t = cache.h_prev.slice(s![.., t, ..]);
            self.gw_hh += &dgh.t().dot(&hp_t);
            self.gb_hh += &dgh.sum_axis(Axis(0));
            dh_next += &dgh.dot(&self.w_hh);
        }

        let x_flat = cache
            .x
            .view()
            .into_shape_with_order((n * t_len, in_f))
            .unwrap();
        let dgi_flat = dgi
            .view()
            .into_shape_with_order((n * t_len, 3 * h_dim))
            .unwrap();
        self.gw_ih += &dgi_flat.t().dot(&x_flat);
        self.gb_ih += &dgi_flat.sum_axis(Axis(0));
        let gx = dgi_flat.dot(&self.w_ih);
        gx.into_shape_with_order((n, t_len, in_f)).unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.w_ih.len() + self.w_hh.len() + self.b_ih.len() + self.b_hh.len()
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        f(
            &format!("{prefix}.w_ih"),
            self.w_ih.shape(),
            self.w_ih.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.w_hh"),
            self.w_hh.shape(),
            self.w_hh.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.b_ih"),
            self.b_ih.shape(),
            self.b_ih.as_slice().unwrap(),
        );
        f(
            &format!("{prefix}.b_hh"),
            self.b_hh.shape(),
            self.b_hh.as_slice().unwrap(),
        );
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        f(
            &format!("{prefix}.w_ih"),
            self.w_ih.as_slice_mut().unwrap(),
            self.gw_ih.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.w_hh"),
            self.w_hh.as_slice_mut().unwrap(),
            self.gw_hh.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.b_ih"),
            self.b_ih.as_slice_mut().unwrap(),
            self.gb_ih.as_slice_mut().unwrap(),
        );
        f(
            &format!("{prefix}.b_hh"),
            self.b_hh.as_slice_mut().unwrap(),
            self.gb_hh.as_slice_mut().unwrap(),
        );
    }
}

fn reverse_time(x: &Array3<f64>) -> Array3<f64> {
    let mut rev = x.clone();
    rev.invert_axis(Axis(1));
    // Contiguous copy: downstream reshapes require standard layout.
    rev.as_standard_layout().into_owned()
}

/// Two independent directions; outputs are concatenated per frame to [N, T, 2H].
pub struct BiGru {
    pub forward_dir: GruDirection,
    pub backward_dir: GruDirection,
}

impl BiGru {
    pub fn new(rng: &mut ChaCha12Rng, input: usize, hidden: usize) -> Self {
        BiGru {
            forward_dir: GruDirection::new(rng, input, hidden),
            backward_dir: GruDirection::new(rng, input, hidden),
        }
    }

    pub fn forward(&mut self, x: Array3<f64>) -> Array3<f64> {
        let h_dim = self.forward_dir.hidden();
        let (n, t_len, _) = x.dim();
        let fwd = self.forward_dir.forward(x.clone());
        let bwd_rev = self.backward_dir.forward(reverse_time(&x));
        let bwd = reverse_time(&bwd_rev);
        let mut out = Array3::zeros((n, t_len, 2 * h_dim));
        out.slice_mut(s![.., .., ..h_dim]).assign(&fwd);
        out.slice_mut(s![.., .., h_dim..]).assign(&bwd);
        out
    }

    pub fn backward(&mut self, gy: &Array3<f64>) -> Array3<f64> {
        let h_dim = self.forward_dir.hidden();
        let g_fwd = gy.slice(s![.., .., ..h_dim]).to_owned();
        let g_bwd = reverse_time(&gy.slice(s![.., .., h_dim..]).to_owned());
        let gx_fwd = self.forward_dir.backward(&g_fwd);
        let gx_bwd = reverse_time(&self.backward_dir.backward(&g_bwd));
        gx_fwd + gx_bwd
    }

    pub fn num_params(&self) -> usize {
        self.forward_dir.num_params() + self.backward_dir.num_params()
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        self.forward_dir.for_each_param(&format!("{prefix}.fwd"), f);
        self.backward_dir.for_each_param(&format!("{prefix}.bwd"), f);
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        self.forward_dir
            .for_each_param_mut(&format!("{prefix}.fwd"), f);
        self.backward_dir
            .for_each_param_mut(&format!("{prefix}.bwd"), f);
    }
}
