//! Policy networks with hand-written forward and reverse passes.
//!
//! A template `(L, F)` builds `L` kernel-3, stride-1, same-padded 1-D
//! convolutions with `F` filters over the depth scan, flattens them, appends
//! the velocity and goal vectors, then applies `L` dense layers of width `F`
//! and the output head(s). ReLU everywhere except the heads.
//!
//! All parameters live in one flat `Vec<f64>`; every layer records offsets
//! into it. Gradients use the same layout, which keeps the optimizer and the
//! checkpoint format trivial.

mod adam;

pub use adam::{clip_grad_norm, Adam};

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{axpy, dot, sqrt, tanh};
use crate::rng::{self, tag};

pub const KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyTemplate {
    pub num_layers: usize,
    pub num_filters: usize,
}

impl PolicyTemplate {
    pub const fn new(num_layers: usize, num_filters: usize) -> Self {
        PolicyTemplate {
            num_layers,
            num_filters,
        }
    }

    /// Closed-form parameter count for this template.
    pub fn parameter_count(&self, input: &InputSpec, output: &OutputSpec) -> usize {
        let (l, f) = (self.num_layers, self.num_filters);
        let conv = (KERNEL * f + f) + (l - 1) * (KERNEL * f * f + f);
        let flat = input.n_rays * f + input.vel_len + input.pos_len;
        let dense = (flat * f + f) + (l - 1) * (f * f + f);
        let head = match *output {
            OutputSpec::Discrete { actions } => f * actions + actions,
            OutputSpec::Gaussian { action_dim } => (f * action_dim + action_dim) + (f + 1) + action_dim,
        };
        conv + dense + head
    }
}

impl core::fmt::Display for PolicyTemplate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}", self.num_layers, self.num_filters)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub n_rays: usize,
    pub vel_len: usize,
    pub pos_len: usize,
}

impl InputSpec {
    pub const fn new(n_rays: usize) -> Self {
        InputSpec {
            n_rays,
            vel_len: 3,
            pos_len: 3,
        }
    }

    pub fn len(&self) -> usize {
        self.n_rays + self.vel_len + self.pos_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutputSpec {
    /// One Q-value per action.
    Discrete { actions: usize },
    /// Tanh-squashed Gaussian mean, a value estimate, and a learnable
    /// state-independent log standard deviation.
    Gaussian { action_dim: usize },
}

impl OutputSpec {
    pub fn output_len(&self) -> usize {
        match *self {
            OutputSpec::Discrete { actions } => actions,
            OutputSpec::Gaussian { action_dim } => action_dim + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AblationMask {
    pub zero_depth: bool,
    pub zero_velocity: bool,
    pub zero_position: bool,
}

impl AblationMask {
    pub const NONE: AblationMask = AblationMask {
        zero_depth: false,
        zero_velocity: false,
        zero_position: false,
    };

    pub fn apply(&self, input: &mut [f64], spec: &InputSpec) {
        let (d, v) = (spec.n_rays, spec.n_rays + spec.vel_len);
        if self.zero_depth {
            input[..d].iter_mut().for_each(|x| *x = 0.0);
        }
        if self.zero_velocity {
            input[d..v].iter_mut().for_each(|x| *x = 0.0);
        }
        if self.zero_position {
            input[v..].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("template needs at least one layer and one filter")]
    EmptyTemplate,
    #[error("sizing error: {n_rays} rays is fewer than the kernel width {KERNEL}")]
    TooFewRays { n_rays: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("forward cache was produced by a different network shape")]
    CacheMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: &mut [f64]) {
        match self {
            Activation::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => x.iter_mut().for_each(|v| *v = tanh(*v)),
            Activation::Identity => {}
        }
    }

    /// Multiplies `g` by the derivative, expressed through the output `y`.
    #[inline]
    fn backprop(self, y: &[f64], g: &mut [f64]) {
        match self {
            Activation::Relu => g.iter_mut().zip(y).for_each(|(g, &y)| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => g.iter_mut().zip(y).for_each(|(g, &y)| *g *= 1.0 - y * y),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    /// Same-padded kernel-3 convolution over `len` positions. Weights are
    /// laid out `[k][in_ch][out_ch]`.
    Conv { len: usize, in_ch: usize, out_ch: usize },
    /// Weights laid out `[inputs][outputs]`.
    Dense { inputs: usize, outputs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub act: Activation,
    pub w: usize,
    pub b: usize,
}

impl Layer {
    fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv { in_ch, out_ch, .. } => KERNEL * in_ch * out_ch,
            LayerKind::Dense { inputs, outputs } => inputs * outputs,
        }
    }

    fn out_width(&self) -> usize {
        match self.kind {
            LayerKind::Conv { out_ch, .. } => out_ch,
            LayerKind::Dense { outputs, .. } => outputs,
        }
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv { in_ch, .. } => KERNEL * in_ch,
            LayerKind::Dense { inputs, .. } => inputs,
        }
    }

    fn output_len(&self) -> usize {
        match self.kind {
            LayerKind::Conv { len, out_ch, .. } => len * out_ch,
            LayerKind::Dense { outputs, .. } => outputs,
        }
    }

    fn forward(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        let w = &params[self.w..self.w + self.weight_len()];
        let b = &params[self.b..self.b + self.out_width()];
        match self.kind {
            LayerKind::Conv { len, in_ch, out_ch } => {
                for p in 0..len {
                    let out = &mut y[p * out_ch..(p + 1) * out_ch];
                    out.copy_from_slice(b);
                    for k in 0..KERNEL {
                        let Some(q) = (p + k).checked_sub(1).filter(|&q| q < len) else {
                            continue;
                        };
                        let xq = &x[q * in_ch..(q + 1) * in_ch];
                        let wk = &w[k * in_ch * out_ch..(k + 1) * in_ch * out_ch];
                        for (c, &xv) in xq.iter().enumerate() {
                            if xv != 0.0 {
                                axpy(xv, &wk[c * out_ch..(c + 1) * out_ch], out);
                            }
                        }
                    }
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                y.copy_from_slice(b);
                for (i, &xv) in x[..inputs].iter().enumerate() {
                    if xv != 0.0 {
                        axpy(xv, &w[i * outputs..(i + 1) * outputs], y);
                    }
                }
            }
        }
        self.act.apply(y);
    }

    /// `g` holds dL/dy on entry and is consumed. Accumulates parameter
    /// gradients into `grads`; writes dL/dx into `dx` when given.
    fn backward(&self, params: &[f64], x: &[f64], y: &[f64], g: &mut [f64], grads: &mut [f64], dx: Option<&mut [f64]>) {
        self.act.backprop(y, g);
        let wl = self.weight_len();
        let ow = self.out_width();
        let w = &params[self.w..self.w + wl];
        match self.kind {
            LayerKind::Conv { len, in_ch, out_ch } => {
                {
                    let gb = &mut grads[self.b..self.b + ow];
                    for p in 0..len {
                        axpy(1.0, &g[p * out_ch..(p + 1) * out_ch], gb);
                    }
                }
                {
                    let gw = &mut grads[self.w..self.w + wl];
                    for p in 0..len {
                        let gp = &g[p * out_ch..(p + 1) * out_ch];
                        for k in 0..KERNEL {
                            let Some(q) = (p + k).checked_sub(1).filter(|&q| q < len) else {
                                continue;
                            };
                            let xq = &x[q * in_ch..(q + 1) * in_ch];
                            let gwk = &mut gw[k * in_ch * out_ch..(k + 1) * in_ch * out_ch];
                            for (c, &xv) in xq.iter().enumerate() {
                                if xv != 0.0 {
                                    axpy(xv, gp, &mut gwk[c * out_ch..(c + 1) * out_ch]);
                                }
                            }
                        }
                    }
                }
                if let Some(dx) = dx {
                    dx.iter_mut().for_each(|v| *v = 0.0);
                    for p in 0..len {
                        let gp = &g[p * out_ch..(p + 1) * out_ch];
                        for k in 0..KERNEL {
                            let Some(q) = (p + k).checked_sub(1).filter(|&q| q < len) else {
                                continue;
                            };
                            let wk = &w[k * in_ch * out_ch..(k + 1) * in_ch * out_ch];
                            let dxq = &mut dx[q * in_ch..(q + 1) * in_ch];
                            for (c, d) in dxq.iter_mut().enumerate() {
                                *d += dot(&wk[c * out_ch..(c + 1) * out_ch], gp);
                            }
                        }
                    }
                }
            }
            LayerKind::Dense { inputs, outputs } => {
                axpy(1.0, g, &mut grads[self.b..self.b + ow]);
                let gw = &mut grads[self.w..self.w + wl];
                for (i, &xv) in x[..inputs].iter().enumerate() {
                    if xv != 0.0 {
                        axpy(xv, g, &mut gw[i * outputs..(i + 1) * outputs]);
                    }
                }
                if let Some(dx) = dx {
                    for (i, d) in dx[..inputs].iter_mut().enumerate() {
                        *d = dot(&w[i * outputs..(i + 1) * outputs], g);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub template: PolicyTemplate,
    pub input: InputSpec,
    pub output: OutputSpec,
    /// Convolutions followed by dense layers.
    pub trunk: Vec<Layer>,
    /// Heads reading the trunk output; their outputs are concatenated.
    pub heads: Vec<Layer>,
    /// Offset of the log-std vector for Gaussian policies.
    pub log_std: Option<usize>,
    pub params: Vec<f64>,
}

/// Activations retained by [`PolicyNetwork::forward_cached`] for the reverse pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Masked input.
    pub input: Vec<f64>,
    /// Input of the first dense layer: flattened conv features ‖ vel ‖ pos.
    dense_input: Vec<f64>,
    trunk_out: Vec<Vec<f64>>,
    head_out: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

pub const LOG_STD_INIT: f64 = -core::f64::consts::LN_2;

impl PolicyNetwork {
    /// Lays out the template and initializes weights and biases uniformly in
    /// `±1/sqrt(fan_in)` from `init_seed`.
    pub fn build(
        template: PolicyTemplate,
        input: InputSpec,
        output: OutputSpec,
        init_seed: u64,
    ) -> Result<Self, NnError> {
        let mut net = Self::layout(template, input, output)?;
        let mut r = rng::stream(init_seed, 0, tag::INIT);
        for layer in net.trunk.iter().chain(&net.heads) {
            let bound = 1.0 / sqrt(layer.fan_in() as f64);
            for v in &mut net.params[layer.w..layer.w + layer.weight_len()] {
                *v = r.random_range(-bound..bound);
            }
            for v in &mut net.params[layer.b..layer.b + layer.out_width()] {
                *v = r.random_range(-bound..bound);
            }
        }
        if let Some(off) = net.log_std {
            let n = net.action_dim();
            net.params[off..off + n].iter_mut().for_each(|v| *v = LOG_STD_INIT);
        }
        Ok(net)
    }

    /// Network of the given shape with every parameter zero.
    pub fn layout(template: PolicyTemplate, input: InputSpec, output: OutputSpec) -> Result<Self, NnError> {
        let (l, f) = (template.num_layers, template.num_filters);
        if l == 0 || f == 0 {
            return Err(NnError::EmptyTemplate);
        }
        if input.n_rays < KERNEL {
            return Err(NnError::TooFewRays { n_rays: input.n_rays });
        }
        let mut off = 0usize;
        let mut alloc_layer = |kind: LayerKind, act: Activation| {
            let mut layer = Layer { kind, act, w: off, b: 0 };
            off += layer.weight_len();
            layer.b = off;
            off += layer.out_width();
            layer
        };
        let mut trunk = Vec::with_capacity(2 * l);
        let n = input.n_rays;
        for i in 0..l {
            let in_ch = if i == 0 { 1 } else { f };
            trunk.push(alloc_layer(
                LayerKind::Conv {
                    len: n,
                    in_ch,
                    out_ch: f,
                },
                Activation::Relu,
            ));
        }
        for i in 0..l {
            let inputs = if i == 0 {
                n * f + input.vel_len + input.pos_len
            } else {
                f
            };
            trunk.push(alloc_layer(LayerKind::Dense { inputs, outputs: f }, Activation::Relu));
        }
        let heads = match output {
            OutputSpec::Discrete { actions } => vec![alloc_layer(
                LayerKind::Dense {
                    inputs: f,
                    outputs: actions,
                },
                Activation::Identity,
            )],
            OutputSpec::Gaussian { action_dim } => vec![
                alloc_layer(
                    LayerKind::Dense {
                        inputs: f,
                        outputs: action_dim,
                    },
                    Activation::Tanh,
                ),
                alloc_layer(LayerKind::Dense { inputs: f, outputs: 1 }, Activation::Identity),
            ],
        };
        let log_std = match output {
            OutputSpec::Gaussian { action_dim } => {
                let o = off;
                off += action_dim;
                Some(o)
            }
            OutputSpec::Discrete { .. } => None,
        };
        Ok(PolicyNetwork {
            template,
            input,
            output,
            trunk,
            heads,
            log_std,
            params: vec![0.0; off],
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn action_dim(&self) -> usize {
        match self.output {
            OutputSpec::Discrete { actions } => actions,
            OutputSpec::Gaussian { action_dim } => action_dim,
        }
    }

    /// Log standard deviations of a Gaussian policy.
    pub fn log_std(&self) -> &[f64] {
        match self.log_std {
            Some(o) => &self.params[o..o + self.action_dim()],
            None => &[],
        }
    }

    pub fn output_len(&self) -> usize {
        self.output.output_len()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        if input.len() != self.input.len() {
            return Err(NnError::Shape {
                expected: self.input.len(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64], mask: AblationMask) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_cached(input, mask)?.output)
    }

    pub fn forward_cached(&self, input: &[f64], mask: AblationMask) -> Result<ForwardCache, NnError> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        mask.apply(&mut x, &self.input);
        let n = self.input.n_rays;
        let l = self.template.num_layers;
        let mut trunk_out: Vec<Vec<f64>> = Vec::with_capacity(self.trunk.len());
        let mut dense_input = Vec::new();
        for (i, layer) in self.trunk.iter().enumerate() {
            let src: &[f64] = if i == 0 {
                &x[..n]
            } else if i == l {
                let conv = &trunk_out[l - 1];
                dense_input.reserve(conv.len() + x.len() - n);
                dense_input.extend_from_slice(conv);
                dense_input.extend_from_slice(&x[n..]);
                &dense_input
            } else {
                &trunk_out[i - 1]
            };
            let mut y = vec![0.0; layer.output_len()];
            layer.forward(&self.params, src, &mut y);
            trunk_out.push(y);
        }
        let feat = trunk_out.last().expect("non-empty trunk");
        let mut head_out = Vec::with_capacity(self.heads.len());
        let mut output = Vec::with_capacity(self.output_len());
        for h in &self.heads {
            let mut y = vec![0.0; h.output_len()];
            h.forward(&self.params, feat, &mut y);
            output.extend_from_slice(&y);
            head_out.push(y);
        }
        Ok(ForwardCache {
            input: x,
            dense_input,
            trunk_out,
            head_out,
            output,
        })
    }

    /// Accumulates `d(output · upstream)/dθ` into `grads` (same layout as
    /// `params`). The log-std entries are left untouched.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) -> Result<(), NnError> {
        if upstream.len() != self.output_len() {
            return Err(NnError::Shape {
                expected: self.output_len(),
                got: upstream.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(NnError::Shape {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        if cache.trunk_out.len() != self.trunk.len() || cache.head_out.len() != self.heads.len() {
            return Err(NnError::CacheMismatch);
        }
        let n = self.input.n_rays;
        let l = self.template.num_layers;
        let feat = cache.trunk_out.last().expect("non-empty trunk");
        let mut d_feat = vec![0.0; feat.len()];
        let mut scratch = vec![0.0; feat.len()];
        let mut off = 0;
        for (h, y) in self.heads.iter().zip(&cache.head_out) {
            let mut g = upstream[off..off + y.len()].to_vec();
            off += y.len();
            h.backward(&self.params, feat, y, &mut g, grads, Some(&mut scratch));
            axpy(1.0, &scratch, &mut d_feat);
        }
        let mut g = d_feat;
        for i in (0..self.trunk.len()).rev() {
            let layer = &self.trunk[i];
            let src: &[f64] = if i == 0 {
                &cache.input[..n]
            } else if i == l {
                &cache.dense_input
            } else {
                &cache.trunk_out[i - 1]
            };
            if i == 0 {
                layer.backward(&self.params, src, &cache.trunk_out[i], &mut g, grads, None);
            } else {
                let mut dx = vec![0.0; src.len()];
                layer.backward(&self.params, src, &cache.trunk_out[i], &mut g, grads, Some(&mut dx));
                if i == l {
                    dx.truncate(cache.trunk_out[l - 1].len());
                }
                g = dx;
            }
        }
        Ok(())
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISCRETE: OutputSpec = OutputSpec::Discrete { actions: 25 };

    fn random_input(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 1, 99);
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn layer_list_and_count_for_2x32() {
        let t = PolicyTemplate::new(2, 32);
        let input = InputSpec::new(32);
        let net = PolicyNetwork::build(t, input, DISCRETE, 1).unwrap();
        let widths: Vec<(bool, usize)> = net
            .trunk
            .iter()
            .chain(&net.heads)
            .map(|l| (matches!(l.kind, LayerKind::Conv { .. }), l.out_width()))
            .collect();
        assert_eq!(widths, vec![(true, 32), (true, 32), (false, 32), (false, 32), (false, 25)]);
        // 128 + 3104 + 32992 + 1056 + 825, worked by hand
        assert_eq!(net.parameter_count(), 38_105);
        assert_eq!(t.parameter_count(&input, &DISCRETE), 38_105);
    }

    #[test]
    fn count_formula_over_sweep_grid() {
        let input = InputSpec::new(32);
        for l in 2..=9 {
            for f in [32, 48, 64] {
                let t = PolicyTemplate::new(l, f);
                for out in [DISCRETE, OutputSpec::Gaussian { action_dim: 2 }] {
                    let net = PolicyNetwork::layout(t, input, out).unwrap();
                    assert_eq!(net.parameter_count(), t.parameter_count(&input, &out));
                }
            }
        }
    }

    #[test]
    fn sizing_errors() {
        assert_eq!(
            PolicyNetwork::build(PolicyTemplate::new(2, 8), InputSpec::new(2), DISCRETE, 0).unwrap_err(),
            NnError::TooFewRays { n_rays: 2 }
        );
        assert_eq!(
            PolicyNetwork::build(PolicyTemplate::new(0, 8), InputSpec::new(32), DISCRETE, 0).unwrap_err(),
            NnError::EmptyTemplate
        );
    }

    #[test]
    fn same_seed_same_weights() {
        let t = PolicyTemplate::new(3, 16);
        let a = PolicyNetwork::build(t, InputSpec::new(16), DISCRETE, 9).unwrap();
        let b = PolicyNetwork::build(t, InputSpec::new(16), DISCRETE, 9).unwrap();
        let c = PolicyNetwork::build(t, InputSpec::new(16), DISCRETE, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = PolicyNetwork::layout(PolicyTemplate::new(2, 4), InputSpec::new(8), DISCRETE).unwrap();
        let out = net.forward(&random_input(14, 1), AblationMask::NONE).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_equals_zeroed_input() {
        let net = PolicyNetwork::build(PolicyTemplate::new(2, 6), InputSpec::new(8), DISCRETE, 3).unwrap();
        let x = random_input(14, 2);
        for mask in [
            AblationMask { zero_depth: true, ..AblationMask::NONE },
            AblationMask { zero_velocity: true, ..AblationMask::NONE },
            AblationMask { zero_position: true, ..AblationMask::NONE },
        ] {
            let mut z = x.clone();
            mask.apply(&mut z, &net.input);
            assert_eq!(
                net.forward(&x, mask).unwrap(),
                net.forward(&z, AblationMask::NONE).unwrap()
            );
        }
        let mut z = x.clone();
        z[..8].iter_mut().for_each(|v| *v = 0.0);
        let m = AblationMask { zero_depth: true, ..AblationMask::NONE };
        assert_eq!(net.forward(&x, m).unwrap(), net.forward(&z, AblationMask::NONE).unwrap());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = PolicyNetwork::build(PolicyTemplate::new(1, 2), InputSpec::new(4), DISCRETE, 3).unwrap();
        assert_eq!(
            net.forward(&[0.0; 3], AblationMask::NONE).unwrap_err(),
            NnError::Shape { expected: 10, got: 3 }
        );
    }

    #[test]
    fn hand_evaluated_tiny_net() {
        // 1 conv (1 filter) over 3 rays, 1 dense of width 1, 1 action.
        let input = InputSpec {
            n_rays: 3,
            vel_len: 1,
            pos_len: 1,
        };
        let mut net = PolicyNetwork::layout(PolicyTemplate::new(1, 1), input, OutputSpec::Discrete { actions: 1 }).unwrap();
        // conv weights [k0, k1, k2], bias
        net.params[0..3].copy_from_slice(&[1.0, 2.0, -1.0]);
        net.params[3] = 0.5;
        // dense: inputs = 3 conv outputs + vel + pos, 1 output
        net.params[4..9].copy_from_slice(&[1.0, -1.0, 2.0, 0.5, 0.25]);
        net.params[9] = -0.1;
        // head
        net.params[10] = 3.0;
        net.params[11] = 1.0;
        let x = [1.0, 2.0, 3.0, 4.0, 8.0];
        // conv (same padding): p0 = 2*1 - 1*2 + 0.5 = 0.5
        //                      p1 = 1*1 + 2*2 - 1*3 + 0.5 = 2.5
        //                      p2 = 1*2 + 2*3 + 0.5 = 8.5
        // dense: 0.5 - 2.5 + 17 + 2 + 2 - 0.1 = 18.9
        // head: 3 * 18.9 + 1 = 57.7
        let out = net.forward(&x, AblationMask::NONE).unwrap();
        assert!((out[0] - 57.7).abs() < 1e-12);
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let input = InputSpec {
            n_rays: 3,
            vel_len: 1,
            pos_len: 1,
        };
        let mut net = PolicyNetwork::layout(PolicyTemplate::new(1, 1), input, OutputSpec::Discrete { actions: 2 }).unwrap();
        // make the trunk an identity-like positive path
        net.params[1] = 1.0; // center tap
        net.params[4..9].copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let x = [2.0, 0.0, 0.0, 0.0, 0.0];
        let cache = net.forward_cached(&x, AblationMask::NONE).unwrap();
        let mut grads = vec![0.0; net.parameter_count()];
        net.backward(&cache, &[0.7, -0.3], &mut grads).unwrap();
        let head = net.heads[0];
        // head input is the single trunk feature, 2.0
        assert!((grads[head.w] - 2.0 * 0.7).abs() < 1e-12);
        assert!((grads[head.w + 1] - 2.0 * -0.3).abs() < 1e-12);
        assert!((grads[head.b] - 0.7).abs() < 1e-12);
        assert!((grads[head.b + 1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let net = PolicyNetwork::build(PolicyTemplate::new(2, 4), InputSpec::new(6), DISCRETE, 4).unwrap();
        let cache = net.forward_cached(&random_input(12, 5), AblationMask::NONE).unwrap();
        let mut g = vec![0.0; net.parameter_count()];
        net.backward(&cache, &[0.0; 25], &mut g).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn argmax_tie_lowest() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
