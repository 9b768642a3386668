//! Learned time-frequency attention: two 3x3 conv blocks (16 then 64 filters
//! by default), a 1x1 projection, and a sigmoid, producing a map in (0,1)
//! multiplied element-wise onto the features. In spectrogram mode the map has
//! a single channel applied to the magnitude channel only.

use ndarray::{s, Array4, Axis};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, BatchNorm2d, Conv2d, Elu, ParamFn, ParamMutFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionMode {
    None,
    /// Single-channel map scaling only the magnitude channel.
    SpectrogramOnly,
    /// Per-channel map scaling the whole feature stack.
    AllChannels,
}

pub struct AttentionModule {
    pub mode: AttentionMode,
    conv1: Conv2d,
    bn1: BatchNorm2d,
    elu1: Elu,
    conv2: Conv2d,
    bn2: BatchNorm2d,
    elu2: Elu,
    conv_map: Conv2d,
    cache: Option<(Array4<f64>, Array4<f64>)>, // (x, map)
}

impl AttentionModule {
    pub fn new(
        rng: &mut ChaCha12Rng,
        mode: AttentionMode,
        in_channels: usize,
        filters: [usize; 2],
        elu_alpha: f64,
    ) -> Self {
        assert_ne!(mode, AttentionMode::None);
        let map_channels = match mode {
            AttentionMode::SpectrogramOnly => 1,
            _ => in_channels,
        };
        AttentionModule {
            mode,
            conv1: Conv2d::new(rng, in_channels, filters[0], 3, 3),
            bn1: BatchNorm2d::new(filters[0]),
            elu1: Elu::new(elu_alpha),
            conv2: Conv2d::new(rng, filters[0], filters[1], 3, 3),
            bn2: BatchNorm2d::new(filters[1]),
            elu2: Elu::new(elu_alpha),
            conv_map: Conv2d::new(rng, filters[1], map_channels, 1, 1),
            cache: None,
        }
    }

    /// Returns (gated features, attention map).
    pub fn forward(&mut self, x: Array4<f64>, training: bool) -> (Array4<f64>, Array4<f64>) {
        let h = self.conv1.forward(x.clone());
        let h = self.bn1.forward(&h, training);
        let h = self.elu1.forward(&h);
        let h = self.conv2.forward(h);
        let h = self.bn2.forward(&h, training);
        let h = self.elu2.forward(&h);
        let logits = self.conv_map.forward(h);
        let map = logits.mapv(sigmoid);

        let mut gated = x.clone();
        match self.mode {
            AttentionMode::SpectrogramOnly => {
                let m = map.index_axis(Axis(1), 0);
                let mut mag = gated.slice_mut(s![.., 0, .., ..]);
                mag *= &m;
            }
            _ => {
                gated *= &map;
            }
        }
        self.cache = Some((x, map.clone()));
        (gated, map)
    }

    /// Backward through both the gating product and the map network.
    pub fn backward(&mut self, g_gated: &Array4<f64>) -> Array4<f64> {
        let (x, map) = self.cache.take().expect("forward before backward");
        let map_channels = map.shape()[1];
        let (n, _c, t_len, f_len) = x.dim();

        // Split the product rule: direct path into x, map path into the nets.
        let mut gx = g_gated.clone();
        let mut g_map = Array4::<f64>::zeros((n, map_channels, t_len, f_len));
        match self.mode {
            AttentionMode::SpectrogramOnly => {
                let m = map.index_axis(Axis(1), 0);
                {
                    let mut gx0 = gx.slice_mut(s![.., 0, .., ..]);
                    gx0 *= &m;
                }
                let g0 = g_gated.slice(s![.., 0, .., ..]);
                let x0 = x.slice(s![.., 0, .., ..]);
                let mut gm = g_map.slice_mut(s![.., 0, .., ..]);
                ndarray::Zip::from(&mut gm)
                    .and(&g0)
                    .and(&x0)
                    .for_each(|gm, &g, &xv| *gm = g * xv);
            }
            _ => {
                gx *= &map;
                ndarray::Zip::from(&mut g_map)
                    .and(g_gated)
                    .and(&x)
                    .for_each(|gm, &g, &xv| *gm = g * xv);
            }
        }

        // Sigmoid backward, then the conv stack in reverse.
        let mut g_logits = g_map;
        ndarray::Zip::from(&mut g_logits)
            .and(&map)
            .for_each(|g, &m| *g *= m * (1.0 - m));
        let g = self.conv_map.backward(&g_logits);
        let g = self.elu2.backward(&g);
        let g = self.bn2.backward(&g);
        let g = self.conv2.backward(&g);
        let g = self.elu1.backward(&g);
        let g = self.bn1.backward(&g);
        let g_attn_in = self.conv1.backward(&g);
        gx + g_attn_in
    }

    pub fn num_params(&self) -> usize {
        self.conv1.num_params()
            + self.bn1.num_params()
            + self.conv2.num_params()
            + self.bn2.num_params()
            + self.conv_map.num_params()
    }

    pub fn for_each_param(&self, prefix: &str, f: &mut ParamFn) {
        self.conv1.for_each_param(&format!("{prefix}.conv1"), f);
        self.bn1.for_each_param(&format!("{prefix}.bn1"), f);
        self.conv2.for_each_param(&format!("{prefix}.conv2"), f);
        self.bn2.for_each_param(&format!("{prefix}.bn2"), f);
        self.conv_map.for_each_param(&format!("{prefix}.map"), f);
    }

    pub fn for_each_param_mut(&mut self, prefix: &str, f: &mut ParamMutFn) {
        self.conv1.for_each_param_mut(&format!("{prefix}.conv1"), f);
        self.bn1.for_each_param_mut(&format!("{prefix}.bn1"), f);
        self.conv2.for_each_param_mut(&format!("{prefix}.conv2"), f);
        self.bn2.for_each_param_mut(&format!("{prefix}.bn2"), f);
        self.conv_map.for_each_param_mut(&format!("{prefix}.map"), f);
    }

    pub fn for_each_state(&self, prefix: &str, f: &mut ParamFn) {
        self.bn1.for_each_state(&format!("{prefix}.bn1"), f);
        self.bn2.for_each_state(&format!("{prefix}.bn2"), f);
    }

    pub fn for_each_state_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.bn1.for_each_state_mut(&format!("{prefix}.bn1"), f);
        self.bn2.for_each_state_mut(&format!("{prefix}.bn2"), f);
    }
}
