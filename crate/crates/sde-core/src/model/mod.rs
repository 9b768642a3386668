//! The attention-CRNN distance regressor: optional time-frequency attention,
//! three conv blocks with frequency pooling, optional bi-directional
//! recurrent layers, and linear heads emitting frame-wise distances plus one
//! utterance-level distance.

mod attention;
mod checkpoint;
mod gru;
mod layers;

pub use attention::{AttentionMode, AttentionModule};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, TrainingState};
pub use gru::{BiGru, GruDirection};
pub use layers::{
    BatchNorm2d, Conv2d, Elu, FreqPoolSum, Linear, ParamFn, ParamMutFn, UtteranceHead,
};

use ndarray::{Array1, Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ChannelSubset, FeatureTensor};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// 3x1 kernels along the time axis.
    Time,
    /// 3x3 kernels.
    Square,
    /// 1x3 kernels along the frequency axis.
    Frequency,
}

impl KernelShape {
    pub fn dims(self) -> (usize, usize) {
        match self {
            KernelShape::Time => (3, 1),
            KernelShape::Square => (3, 3),
            KernelShape::Frequency => (1, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kernel_shape: KernelShape,
    pub num_recurrent_layers: usize,
    pub attention_mode: AttentionMode,
    pub input_channels: ChannelSubset,
    pub conv_filters: [usize; 3],
    pub freq_pool: [usize; 3],
    pub attention_filters: [usize; 2],
    /// Hidden units per recurrent direction.
    pub recurrent_width: usize,
    pub head_width: usize,
    pub elu_alpha: f64,
    /// Frame count the utterance head is built for.
    pub num_frames: usize,
    pub num_bins: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kernel_shape: KernelShape::Frequency,
            num_recurrent_layers: 2,
            attention_mode: AttentionMode::AllChannels,
            input_channels: ChannelSubset::All,
            conv_filters: [8, 32, 128],
            freq_pool: [8, 8, 2],
            attention_filters: [16, 64],
            recurrent_width: 128,
            head_width: 128,
            elu_alpha: 1.0,
            num_frames: 624,
            num_bins: 257,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Every width halved; used for desk-scale runs.
    pub fn at_half_width(mut self) -> Self {
        self.conv_filters = self.conv_filters.map(|f| (f / 2).max(1));
        self.attention_filters = self.attention_filters.map(|f| (f / 2).max(1));
        self.recurrent_width = (self.recurrent_width / 2).max(1);
        self.head_width = (self.head_width / 2).max(1);
        self
    }

    pub fn pooled_bins(&self) -> usize {
        self.freq_pool
            .iter()
            .fold(self.num_bins, |f, &m| f / m)
    }

    /// Width of the flattened conv output per frame.
    pub fn conv_flat_width(&self) -> usize {
        self.conv_filters[2] * self.pooled_bins()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_recurrent_layers > 2 {
            return Err(Error::InvalidConfig(format!(
                "num_recurrent_layers {} outside {{0,1,2}}",
                self.num_recurrent_layers
            )));
        }
        if self.pooled_bins() == 0 {
            return Err(Error::InvalidConfig(
                "frequency pooling collapses the spectrum to zero bins".into(),
            ));
        }
        if self.num_frames == 0 || self.num_bins == 0 {
            return Err(Error::InvalidConfig("empty input shape".into()));
        }
        if self.conv_filters.iter().any(|&f| f == 0)
            || self.recurrent_width == 0
            || self.head_width == 0
        {
            return Err(Error::InvalidConfig("zero-width layer".into()));
        }
        if self.attention_mode == AttentionMode::SpectrogramOnly
            && !self.input_channels.has_magnitude()
        {
            return Err(Error::InvalidConfig(
                "spectrogram attention needs the magnitude channel".into(),
            ));
        }
        Ok(())
    }
}

/// Frame-wise and utterance-level predictions for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePrediction {
    pub utterance: f64,
    pub framewise: Vec<f64>,
}

/// Batched predictions.
#[derive(Debug, Clone)]
pub struct BatchPrediction {
    pub utterance: Array1<f64>,
    pub framewise: Array2<f64>,
}

struct ConvBlock {
    conv: Conv2d,
    bn: BatchNorm2d,
    pool: FreqPoolSum,
    elu: Elu,
}

impl ConvBlock {
    fn forward(&mut self, x: Array4<f64>, training: bool) -> Array4<f64> {
        let h = self.conv.forward(x);
        let h = self.bn.forward(&h, training);
        let h = self.pool.forward(&h);
        self.elu.forward(&h)
    }

    fn backward(&mut self, gy: &Array4<f64>) -> Array4<f64> {
        let g = self.elu.backward(gy);
        let g = self.pool.backward(&g);
        let g = self.bn.backward(&g);
        self.conv.backward(&g)
    }
}

pub struct Model {
    pub config: ModelConfig,
    attention: Option<AttentionModule>,
    blocks: Vec<ConvBlock>,
    grus: Vec<BiGru>,
    fc_hidden: Linear,
    fc_frame: Linear,
    head: UtteranceHead,
    flat_dims: (usize, usize), // (channels, pooled bins)
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(config.init_seed, 0x30de1);
        let in_channels = config.input_channels.num_channels();

        let attention = match config.attention_mode {
            AttentionMode::None => None,
            mode => Some(AttentionModule::new(
                &mut rng,
                mode,
                in_channels,
                config.attention_filters,
                config.elu_alpha,
            )),
        };

        let (kt, kf) = config.kernel_shape.dims();
        let mut blocks = Vec::with_capacity(3);
        let mut c_prev = in_channels;
        for i in 0..3 {
            blocks.push(ConvBlock {
                conv: Conv2d::new(&mut rng, c_prev, config.conv_filters[i], kt, kf),
                bn: BatchNorm2d::new(config.conv_filters[i]),
                pool: FreqPoolSum::new(config.freq_pool[i]),
                elu: Elu::new(config.elu_alpha),
            });
            c_prev = config.conv_filters[i];
        }

        let conv_flat = config.conv_flat_width();
        let mut grus = Vec::with_capacity(config.num_recurrent_layers);
        let mut width = conv_flat;
        for _ in 0..config.num_recurrent_layers {
            grus.push(BiGru::new(&mut rng, width, config.recurrent_width));
            width = 2 * config.recurrent_width;
        }

        let fc_hidden = Linear::new(&mut rng, width, config.head_width);
        let fc_frame = Linear::new(&mut rng, config.head_width, 1);
        let head = UtteranceHead::new(&mut rng, config.num_frames);
        let flat_dims = (config.conv_filters[2], config.pooled_bins());
        Ok(Model {
            config,
            attention,
            blocks,
            grus,
            fc_hidden,
            fc_frame,
            head,
            flat_dims,
        })
    }

    fn check_input(&self, x: &Array4<f64>) -> Result<()> {
        let (_, c, t_len, f_len) = x.dim();
        if c != self.config.input_channels.num_channels() {
            return Err(Error::ShapeMismatch(format!(
                "input has {c} channels, model expects {}",
                self.config.input_channels.num_channels()
            )));
        }
        if t_len != self.config.num_frames {
            return Err(Error::ShapeMismatch(format!(
                "input has {t_len} frames, model was built for {}",
                self.config.num_frames
            )));
        }
        if f_len != self.config.num_bins {
            return Err(Error::ShapeMismatch(format!(
                "input has {f_len} bins, model expects {}",
                self.config.num_bins
            )));
        }
        Ok(())
    }

    /// Batched forward over [N, C, T, F]. Returns predictions and, when
    /// attention is enabled, the attention map [N, Cmap, T, F].
    pub fn forward(
        &mut self,
        x: Array4<f64>,
        training: bool,
    ) -> Result<(BatchPrediction, Option<Array4<f64>>)> {
        self.check_input(&x)?;
        let (n, _, t_len, _) = x.dim();
        let (mut h, map) = match &mut self.attention {
            Some(att) => {
                let (gated, map) = att.forward(x, training);
                (gated, Some(map))
            }
            None => (x, None),
        };
        for block in &mut self.blocks {
            h = block.forward(h, training);
        }
        // [N, C, T, F3] -> [N, T, C*F3]
        let (c3, f3) = self.flat_dims;
        let flat = h
            .permuted_axes([0, 2, 1, 3])
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((n, t_len, c3 * f3))
            .unwrap();
        let mut z = flat;
        for gru in &mut self.grus {
            z = gru.forward(z);
        }
        let z = self.fc_hidden.forward(z);
        let frame = self.fc_frame.forward(z); // [N, T, 1]
        let framewise = frame
            .into_shape_with_order((n, t_len))
            .unwrap();
        let utterance = self.head.forward(framewise.clone());
        Ok((
            BatchPrediction {
                utterance,
                framewise,
            },
            map,
        ))
    }

    /// Backward from gradients on the utterance and frame-wise outputs.
    pub fn backward(&mut self, g_utterance: &Array1<f64>, g_framewise: &Array2<f64>) {
        let (n, t_len) = g_framewise.dim();
        let g_frame_total = self.head.backward(g_utterance) + g_framewise;
        let g = g_frame_total
            .into_shape_with_order((n, t_len, 1))
            .unwrap();
        let g = self.fc_frame.backward(&g);
        let mut g = self.fc_hidden.backward(&g);
        for gru in self.grus.iter_mut().rev() {
            g = gru.backward(&g);
        }
        // [N, T, C*F3] -> [N, C, T, F3]
        let (c3, f3) = self.flat_dims;
        let g4 = g
            .into_shape_with_order((n, t_len, c3, f3))
            .unwrap()
            .permuted_axes([0, 2, 1, 3])
            .as_standard_layout()
            .to_owned();
        let mut g = g4;
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g);
        }
        if let Some(att) = &mut self.attention {
            att.backward(&g);
        }
    }

    /// Single-clip inference (eval mode, running batch-norm statistics).
    pub fn predict(
        &mut self,
        features: &FeatureTensor,
    ) -> Result<(DistancePrediction, Option<Array3<f64>>)> {
        if features.subset != self.config.input_channels {
            return Err(Error::ShapeMismatch(format!(
                "feature subset {:?} does not match model channels {:?}",
                features.subset, self.config.input_channels
            )));
        }
        let (t_len, f_len, c) = features.data.dim();
        // [T, F, C] -> [1, C, T, F]
        let x = features
            .data
            .view()
            .permuted_axes([2, 0, 1])
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((1, c, t_len, f_len))
            .unwrap();
        let (pred, map) = self.forward(x, false)?;
        Ok((
            DistancePrediction {
                utterance: pred.utterance[0],
                framewise: pred.framewise.row(0).to_vec(),
            },
            map.map(|m| m.index_axis(Axis(0), 0).to_owned()),
        ))
    }

    /// Swap the frame-count-bound utterance head (used when fine-tuning onto
    /// a corpus with a different clip duration).
    pub fn replace_head(&mut self, head: UtteranceHead, config: ModelConfig) {
        assert_eq!(head.w.len(), config.num_frames);
        self.head = head;
        self.config = config;
    }

    pub fn zero_grads(&mut self) {
        self.for_each_param_mut(&mut |_, _, g| {
            for v in g.iter_mut() {
                *v = 0.0;
            }
        });
    }

    pub fn num_params(&self) -> usize {
        let mut count = 0;
        self.for_each_param(&mut |_, _, values| count += values.len());
        count
    }

    /// Parameter counts per component: (attention, conv, recurrent, heads).
    pub fn param_breakdown(&self) -> (usize, usize, usize, usize) {
        let att = self.attention.as_ref().map(|a| a.num_params()).unwrap_or(0);
        let conv: usize = self
            .blocks
            .iter()
            .map(|b| b.conv.num_params() + b.bn.num_params())
            .sum();
        let rec: usize = self.grus.iter().map(|g| g.num_params()).sum();
        let heads =
            self.fc_hidden.num_params() + self.fc_frame.num_params() + self.head.num_params();
        (att, conv, rec, heads)
    }

    pub fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        if let Some(att) = &self.attention {
            att.for_each_param("attention", f);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.conv.for_each_param(&format!("block{i}.conv"), f);
            b.bn.for_each_param(&format!("block{i}.bn"), f);
        }
        for (i, g) in self.grus.iter().enumerate() {
            g.for_each_param(&format!("gru{i}"), f);
        }
        self.fc_hidden.for_each_param("fc_hidden", f);
        self.fc_frame.for_each_param("fc_frame", f);
        self.head.for_each_param("head", f);
    }

    pub fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64], &mut [f64])) {
        if let Some(att) = &mut self.attention {
            att.for_each_param_mut("attention", f);
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.conv.for_each_param_mut(&format!("block{i}.conv"), f);
            b.bn.for_each_param_mut(&format!("block{i}.bn"), f);
        }
        for (i, g) in self.grus.iter_mut().enumerate() {
            g.for_each_param_mut(&format!("gru{i}"), f);
        }
        self.fc_hidden.for_each_param_mut("fc_hidden", f);
        self.fc_frame.for_each_param_mut("fc_frame", f);
        self.head.for_each_param_mut("head", f);
    }

    /// Non-trainable state (batch-norm running statistics).
    pub fn for_each_state(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        if let Some(att) = &self.attention {
            att.for_each_state("attention", f);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.bn.for_each_state(&format!("block{i}.bn"), f);
        }
    }

    pub fn for_each_state_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(att) = &mut self.attention {
            att.for_each_state_mut("attention", f);
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.bn.for_each_state_mut(&format!("block{i}.bn"), f);
        }
    }
}
