//! Sequential dense network with activation capture, reverse-mode gradients
//! and an Adam optimiser.
//!
//! Weights are stored `in × out`, so a batch `X (n × in)` maps to
//! `act(X·W + b)`. Dropout is inverted: kept units are scaled by `1/(1-p)`
//! in training mode and inference is a plain pass. Dropout follows every
//! hidden layer and never the output layer.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Activation;
use crate::rng::SeededRng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub dropout: f64,
}

impl Layer {
    /// LeCun-normal weights (`std = 1/sqrt(fan_in)`), zero bias.
    pub fn lecun(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        dropout: f64,
        rng: &mut SeededRng,
    ) -> Self {
        let std = 1.0 / (in_dim as f64).sqrt();
        Self {
            weights: Matrix::gaussian(in_dim, out_dim, 0.0, std, rng),
            bias: vec![0.0; out_dim],
            activation,
            dropout,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// All gradient values, weights then bias, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.add_assign(&b.weights);
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub pre: Matrix,
    pub post: Matrix,
    /// Per-entry multiplier (0 or `1/(1-p)`), training mode only.
    pub mask: Option<Vec<f64>>,
    /// Activation before the mask was applied, kept only when masked.
    pub unmasked: Option<Matrix>,
}

impl LayerTrace {
    /// What the next layer sees.
    pub fn output(&self) -> &Matrix {
        &self.post
    }
}

/// Everything the backward pass needs from a forward pass.
///
/// For layers with a dropout mask, `post` already has the mask applied.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    pub layers: Vec<LayerTrace>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.layers
            .last()
            .map(LayerTrace::output)
            .unwrap_or(&self.input)
    }

    pub fn into_output(mut self) -> Matrix {
        match self.layers.pop() {
            Some(l) => l.post,
            None => self.input,
        }
    }

    /// Concatenated outputs of every hidden layer (all but the last).
    pub fn hidden_activations(&self) -> Result<Matrix> {
        let n = self.layers.len();
        if n < 2 {
            return Err(Error::Config(
                "network has no hidden layer to take activations from".into(),
            ));
        }
        let parts: Vec<&Matrix> = self.layers[..n - 1].iter().map(|l| &l.post).collect();
        Matrix::hcat(&parts)
    }
}

#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: Gradients,
    /// Gradient with respect to the network input.
    pub input_grad: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
struct AdamMoments {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    moments: Vec<AdamMoments>,
    pub step: u64,
}

impl AdamState {
    /// Fresh optimizer state shaped for `mlp`, independent of the one the
    /// network carries. For a second objective on the same parameters.
    pub fn for_mlp(mlp: &Mlp) -> Self {
        Self::for_layers(&mlp.layers)
    }

    fn for_layers(layers: &[Layer]) -> Self {
        Self {
            moments: layers
                .iter()
                .map(|l| {
                    let nw = l.weights.data().len();
                    let nb = l.bias.len();
                    AdamMoments {
                        m_w: vec![0.0; nw],
                        v_w: vec![0.0; nw],
                        m_b: vec![0.0; nb],
                        v_b: vec![0.0; nb],
                    }
                })
                .collect(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    adam: AdamState,
}

enum Top<'a> {
    Post(&'a Matrix),
    Pre(&'a Matrix),
    Zero,
}

impl Mlp {
    /// Builds a network over `dims = [in, h1, .., out]`. Hidden layers use
    /// `hidden` and get `dropout`; the last layer uses `output` and no dropout.
    pub fn new(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        dropout: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(
                "an MLP needs at least input and output dims".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {dims:?}")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!(
                "dropout rate {dropout} not in [0, 1)"
            )));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let last = i + 1 == n;
                Layer::lecun(
                    dims[i],
                    dims[i + 1],
                    if last { output } else { hidden },
                    if last { 0.0 } else { dropout },
                    rng,
                )
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape(
                    format!("layer {i} bias"),
                    l.out_dim(),
                    l.bias.len(),
                ));
            }
            if !(0.0..1.0).contains(&l.dropout) {
                return Err(Error::Config(format!(
                    "layer {i}: dropout {} not in [0, 1)",
                    l.dropout
                )));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    format!("layer {} input", i + 1),
                    pair[0].out_dim(),
                    pair[1].in_dim(),
                ));
            }
        }
        let adam = AdamState::for_layers(&layers);
        Ok(Self { layers, adam })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `[in, h1, .., out]`
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    /// Total width of the hidden layers.
    pub fn hidden_width(&self) -> usize {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.len())
            .sum()
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.step
    }

    pub fn set_dropout(&mut self, rate: f64) {
        let n = self.layers.len();
        for l in &mut self.layers[..n - 1] {
            l.dropout = rate;
        }
    }

    /// Sets every parameter to zero.
    pub fn zero_params(&mut self) {
        for l in &mut self.layers {
            l.weights.data_mut().fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| {
            l.bias
                .iter()
                .fold(m.max(l.weights.max_abs()), |m, b| m.max(b.abs()))
        })
    }

    /// SHA-256 over layer dims, activation tags, dropout and parameter bits.
    pub fn param_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for l in &self.layers {
            h.update((l.in_dim() as u64).to_le_bytes());
            h.update((l.out_dim() as u64).to_le_bytes());
            h.update([l.activation.tag()]);
            h.update(l.dropout.to_le_bytes());
            for w in l.weights.data() {
                h.update(w.to_le_bytes());
            }
            for b in &l.bias {
                h.update(b.to_le_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn forward(&self, batch: &Matrix, mode: Mode, rng: &mut SeededRng) -> Result<ForwardTrace> {
        match mode {
            Mode::Train => self.forward_impl(batch, Some(rng)),
            Mode::Infer => self.forward_impl(batch, None),
        }
    }

    /// Inference-mode forward pass that keeps the trace.
    pub fn trace(&self, batch: &Matrix) -> Result<ForwardTrace> {
        self.forward_impl(batch, None)
    }

    fn forward_impl(
        &self,
        batch: &Matrix,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "layer 0 input",
                self.input_dim(),
                batch.cols(),
            ));
        }
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = traces.last().map_or(batch, LayerTrace::output);
            let mut pre = input.matmul(&layer.weights);
            for row in 0..pre.rows() {
                for (z, b) in pre.row_mut(row).iter_mut().zip(&layer.bias) {
                    *z += b;
                }
            }
            let act = pre.map(|z| layer.activation.apply(z));
            let trace = match rng.as_deref_mut() {
                Some(rng) if layer.dropout > 0.0 => {
                    let keep = 1.0 - layer.dropout;
                    let scale = 1.0 / keep;
                    let mask: Vec<f64> = (0..act.data().len())
                        .map(|_| if rng.uniform() < keep { scale } else { 0.0 })
                        .collect();
                    let mut post = act.clone();
                    for (a, m) in post.data_mut().iter_mut().zip(&mask) {
                        *a *= m;
                    }
                    LayerTrace {
                        pre,
                        post,
                        mask: Some(mask),
                        unmasked: Some(act),
                    }
                }
                _ => LayerTrace {
                    pre,
                    post: act,
                    mask: None,
                    unmasked: None,
                },
            };
            traces.push(trace);
        }
        Ok(ForwardTrace {
            input: batch.clone(),
            layers: traces,
        })
    }

    /// Inference-mode output without keeping the trace.
    pub fn infer(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "layer 0 input",
                self.input_dim(),
                batch.cols(),
            ));
        }
        let mut x = std::borrow::Cow::Borrowed(batch);
        for layer in &self.layers {
            let mut z = x.matmul(&layer.weights);
            for row in 0..z.rows() {
                for (v, b) in z.row_mut(row).iter_mut().zip(&layer.bias) {
                    *v = layer.activation.apply(*v + b);
                }
            }
            x = std::borrow::Cow::Owned(z);
        }
        Ok(x.into_owned())
    }

    /// Gradients given `dL/d(output)`.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &Matrix) -> Result<Backward> {
        self.backward_impl(trace, Top::Post(output_grad), None, true)
    }

    /// Gradients given `dL/d(pre-activation of the output layer)`. Useful
    /// when the loss is written in logit space.
    pub fn backward_logits(&self, trace: &ForwardTrace, logit_grad: &Matrix) -> Result<Backward> {
        self.backward_impl(trace, Top::Pre(logit_grad), None, true)
    }

    /// Gradients given `dL/d(hidden activations)` (shaped like
    /// [`ForwardTrace::hidden_activations`]) plus an optional output gradient.
    pub fn backward_hidden(
        &self,
        trace: &ForwardTrace,
        output_grad: Option<&Matrix>,
        hidden_grad: &Matrix,
    ) -> Result<Backward> {
        let top = output_grad.map_or(Top::Zero, Top::Post);
        self.backward_impl(trace, top, Some(hidden_grad), true)
    }

    /// Only `dL/d(input)` given `dL/d(output)`; parameter gradients are not
    /// formed. For networks that are held fixed while something upstream
    /// trains.
    pub fn input_gradient(&self, trace: &ForwardTrace, output_grad: &Matrix) -> Result<Matrix> {
        Ok(self
            .backward_impl(trace, Top::Post(output_grad), None, false)?
            .input_grad)
    }

    /// [`Mlp::input_gradient`] for a gradient given on the output logits.
    pub fn input_gradient_logits(
        &self,
        trace: &ForwardTrace,
        logit_grad: &Matrix,
    ) -> Result<Matrix> {
        Ok(self
            .backward_impl(trace, Top::Pre(logit_grad), None, false)?
            .input_grad)
    }

    /// [`Mlp::backward_hidden`] without parameter gradients.
    pub fn input_gradient_hidden(
        &self,
        trace: &ForwardTrace,
        output_grad: Option<&Matrix>,
        hidden_grad: &Matrix,
    ) -> Result<Matrix> {
        let top = output_grad.map_or(Top::Zero, Top::Post);
        Ok(self
            .backward_impl(trace, top, Some(hidden_grad), false)?
            .input_grad)
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        if trace.layers.len() != self.layers.len() {
            return Err(Error::shape(
                "trace layer count",
                self.layers.len(),
                trace.layers.len(),
            ));
        }
        let rows = trace.input.rows();
        if trace.input.cols() != self.input_dim() {
            return Err(Error::shape(
                "trace input",
                self.input_dim(),
                trace.input.cols(),
            ));
        }
        for (i, (l, t)) in self.layers.iter().zip(&trace.layers).enumerate() {
            if t.pre.shape() != (rows, l.out_dim()) {
                return Err(Error::shape(
                    format!("trace layer {i}"),
                    format!("{rows}x{}", l.out_dim()),
                    format!("{}x{}", t.pre.rows(), t.pre.cols()),
                ));
            }
        }
        Ok(())
    }

    fn backward_impl(
        &self,
        trace: &ForwardTrace,
        top: Top<'_>,
        hidden_grad: Option<&Matrix>,
        params: bool,
    ) -> Result<Backward> {
        self.check_trace(trace)?;
        let n_layers = self.layers.len();
        let rows = trace.input.rows();
        let out_shape = (rows, self.output_dim());
        match top {
            Top::Post(g) | Top::Pre(g) if g.shape() != out_shape => {
                return Err(Error::shape(
                    "output gradient",
                    format!("{}x{}", out_shape.0, out_shape.1),
                    format!("{}x{}", g.rows(), g.cols()),
                ));
            }
            _ => {}
        }
        // column offsets of each hidden layer inside the concatenated activations
        let mut offsets = Vec::with_capacity(n_layers);
        if let Some(h) = hidden_grad {
            let width = self.hidden_width();
            if n_layers < 2 || h.shape() != (rows, width) {
                return Err(Error::shape(
                    "hidden activation gradient",
                    format!("{rows}x{width}"),
                    format!("{}x{}", h.rows(), h.cols()),
                ));
            }
            let mut off = 0;
            for l in &self.layers[..n_layers - 1] {
                offsets.push(off);
                off += l.out_dim();
            }
        }

        let mut grads = Vec::with_capacity(n_layers);
        // gradient w.r.t. the current layer's output (post-dropout)
        let mut upstream: Option<Matrix> = None;
        let mut input_grad = Matrix::zeros(rows, self.input_dim());

        for i in (0..n_layers).rev() {
            let layer = &self.layers[i];
            let t = &trace.layers[i];
            let is_top = i + 1 == n_layers;

            let pre_grad = if is_top {
                match top {
                    Top::Pre(g) => g.clone(),
                    Top::Post(g) => self.through_activation(layer, t, g.clone()),
                    Top::Zero => Matrix::zeros(rows, layer.out_dim()),
                }
            } else {
                let mut g = upstream
                    .take()
                    .unwrap_or_else(|| Matrix::zeros(rows, layer.out_dim()));
                if let Some(h) = hidden_grad {
                    g.add_assign(&h.column_block(offsets[i], layer.out_dim()));
                }
                self.through_activation(layer, t, g)
            };

            if params {
                let input = if i == 0 {
                    &trace.input
                } else {
                    trace.layers[i - 1].output()
                };
                let w_grad = input.t_matmul(&pre_grad);
                let mut b_grad = vec![0.0; layer.out_dim()];
                for row in pre_grad.iter_rows() {
                    for (b, g) in b_grad.iter_mut().zip(row) {
                        *b += g;
                    }
                }
                grads.push(LayerGrads {
                    weights: w_grad,
                    bias: b_grad,
                });
            }
            let down = pre_grad.matmul_t(&layer.weights);
            if i == 0 {
                input_grad = down;
            } else {
                upstream = Some(down);
            }
        }
        grads.reverse();
        Ok(Backward {
            grads: Gradients { layers: grads },
            input_grad,
        })
    }

    fn through_activation(&self, layer: &Layer, t: &LayerTrace, mut g: Matrix) -> Matrix {
        let data = g.data_mut();
        match &t.mask {
            Some(mask) => {
                let act = t.unmasked.as_ref().unwrap_or(&t.post);
                for (((gv, &m), &z), &a) in data
                    .iter_mut()
                    .zip(mask)
                    .zip(t.pre.data())
                    .zip(act.data())
                {
                    *gv *= m * layer.activation.derivative(z, a);
                }
            }
            None => {
                for ((gv, &z), &a) in data.iter_mut().zip(t.pre.data()).zip(t.post.data()) {
                    *gv *= layer.activation.derivative(z, a);
                }
            }
        }
        g
    }

    /// One Adam update (β1 = 0.9, β2 = 0.999, ε = 1e-8).
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        let mut state = std::mem::take(&mut self.adam);
        let out = self.adam_step_with(&mut state, grads, lr);
        self.adam = state;
        out
    }

    /// [`Mlp::adam_step`] with caller-held optimizer state.
    pub fn adam_step_with(&mut self, state: &mut AdamState, grads: &Gradients, lr: f64) -> Result<()> {
        if state.moments.len() != self.layers.len()
            || state
                .moments
                .iter()
                .zip(&self.layers)
                .any(|(m, l)| m.m_w.len() != l.weights.data().len() || m.m_b.len() != l.bias.len())
        {
            return Err(Error::shape(
                "optimizer state",
                format!("{} layers", self.layers.len()),
                format!("{} layers", state.moments.len()),
            ));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape(
                "gradient layer count",
                self.layers.len(),
                grads.layers.len(),
            ));
        }
        for (i, (l, g)) in self.layers.iter().zip(&grads.layers).enumerate() {
            if g.weights.shape() != l.weights.shape() || g.bias.len() != l.bias.len() {
                return Err(Error::shape(
                    format!("layer {i} gradient"),
                    format!("{}x{}", l.in_dim(), l.out_dim()),
                    format!("{}x{}", g.weights.rows(), g.weights.cols()),
                ));
            }
            if !g.weights.is_finite() || g.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {i}")));
            }
        }
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for ((l, g), mo) in self
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut state.moments)
        {
            adam_update(
                l.weights.data_mut(),
                g.weights.data(),
                &mut mo.m_w,
                &mut mo.v_w,
                lr,
                c1,
                c2,
            );
            adam_update(&mut l.bias, &g.bias, &mut mo.m_b, &mut mo.v_b, lr, c1, c2);
        }
        Ok(())
    }

    /// Clamps every weight and bias to `[-c, c]`.
    pub fn clip_weights(&mut self, c: f64) {
        assert!(c > 0.0, "clip bound must be positive");
        for l in &mut self.layers {
            l.weights
                .data_mut()
                .iter_mut()
                .for_each(|w| *w = w.clamp(-c, c));
            l.bias.iter_mut().for_each(|b| *b = b.clamp(-c, c));
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    c1: f64,
    c2: f64,
) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}
