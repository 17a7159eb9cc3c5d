//! A small feed-forward Q network: valid (unpadded) 2-D convolutions and
//! dense layers with optional ReLU, evaluated in batches.
//!
//! Activations are stored channel-last, `(batch, height, width, channels)`,
//! so a convolution is an im2col gather followed by one GEMM, and the
//! flattened output of the last convolution feeds a dense layer directly.
//! Parameters live in one flat vector, layer by layer, weights then biases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DqnError, StateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        relu: bool,
    },
    Dense {
        units: usize,
        relu: bool,
    },
}

impl LayerSpec {
    pub fn relu(&self) -> bool {
        match *self {
            LayerSpec::Conv { relu, .. } | LayerSpec::Dense { relu, .. } => relu,
        }
    }
}

/// Activation shape `(height, width, channels)`.
pub type Shape = (usize, usize, usize);

/// Input size plus layer stack. The last layer must produce one value per
/// channel of the band, i.e. `input.1` outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input: (usize, usize),
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerPlan {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    /// Weight matrix is `rows x cols`: filters x (kh*kw*c_in), or units x fan_in.
    rows: usize,
    cols: usize,
    offset: usize,
}

impl LayerPlan {
    fn weight_len(&self) -> usize {
        self.rows * self.cols
    }

    fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    fn in_len(&self) -> usize {
        self.input.0 * self.input.1 * self.input.2
    }
}

impl Architecture {
    /// Two strided convolutions over the time axis, then two dense layers.
    pub fn waterfall(rows: usize, cols: usize) -> Self {
        Self {
            input: (rows, cols),
            layers: vec![
                LayerSpec::Conv { filters: 8, kernel: (5, 3), stride: (2, 1), relu: true },
                LayerSpec::Conv { filters: 16, kernel: (3, 3), stride: (2, 1), relu: true },
                LayerSpec::Dense { units: 64, relu: true },
                LayerSpec::Dense { units: cols, relu: false },
            ],
        }
    }

    pub fn num_actions(&self) -> usize {
        self.input.1
    }

    fn plan(&self) -> Result<Vec<LayerPlan>, DqnError> {
        let bad = |msg: String| DqnError::Architecture(msg);
        if self.input.0 == 0 || self.input.1 == 0 {
            return Err(bad("empty input".into()));
        }
        if self.layers.is_empty() {
            return Err(bad("no layers".into()));
        }
        let mut shape: Shape = (self.input.0, self.input.1, 1);
        let mut offset = 0;
        let mut plans = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let (output, rows, cols) = match *spec {
                LayerSpec::Conv { filters, kernel: (kh, kw), stride: (sh, sw), .. } => {
                    if filters == 0 || kh == 0 || kw == 0 || sh == 0 || sw == 0 {
                        return Err(bad(format!("layer {i}: zero-sized convolution")));
                    }
                    if shape.0 < kh || shape.1 < kw {
                        return Err(bad(format!(
                            "layer {i}: kernel {kh}x{kw} larger than input {}x{}",
                            shape.0, shape.1
                        )));
                    }
                    let oh = (shape.0 - kh) / sh + 1;
                    let ow = (shape.1 - kw) / sw + 1;
                    ((oh, ow, filters), filters, kh * kw * shape.2)
                }
                LayerSpec::Dense { units, .. } => {
                    if units == 0 {
                        return Err(bad(format!("layer {i}: zero units")));
                    }
                    ((1, 1, units), units, shape.0 * shape.1 * shape.2)
                }
            };
            let plan = LayerPlan { spec: *spec, input: shape, output, rows, cols, offset };
            offset += plan.len();
            shape = output;
            plans.push(plan);
        }
        if shape != (1, 1, self.input.1) {
            return Err(bad(format!(
                "network ends in shape {shape:?}, expected {} action values",
                self.input.1
            )));
        }
        Ok(plans)
    }

    pub fn num_params(&self) -> Result<usize, DqnError> {
        Ok(self.plan()?.iter().map(LayerPlan::len).sum())
    }
}

/// Network weights plus the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworkParams {
    arch: Architecture,
    plans: Vec<LayerPlan>,
    weights: Vec<f64>,
}

impl QNetworkParams {
    /// All-zero parameters.
    pub fn zeros(arch: Architecture) -> Result<Self, DqnError> {
        let plans = arch.plan()?;
        let n = plans.iter().map(LayerPlan::len).sum();
        Ok(Self { arch, plans, weights: vec![0.0; n] })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self, DqnError> {
        let mut p = Self::zeros(arch)?;
        for plan in p.plans.clone() {
            let (fan_in, fan_out) = match plan.spec {
                LayerSpec::Conv { kernel: (kh, kw), filters, .. } => {
                    (plan.cols, filters * kh * kw)
                }
                LayerSpec::Dense { units, .. } => (plan.cols, units),
            };
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut p.weights[plan.offset..plan.offset + plan.weight_len()] {
                *w = rng.gen_range(-r..=r);
            }
        }
        Ok(p)
    }

    pub fn from_weights(arch: Architecture, weights: Vec<f64>) -> Result<Self, DqnError> {
        let plans = arch.plan()?;
        let n: usize = plans.iter().map(LayerPlan::len).sum();
        if weights.len() != n {
            return Err(DqnError::WeightCount { expected: n, found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(DqnError::NonFinite);
        }
        Ok(Self { arch, plans, weights })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn num_actions(&self) -> usize {
        self.arch.num_actions()
    }

    pub fn input_len(&self) -> usize {
        self.arch.input.0 * self.arch.input.1
    }

    /// Bias slice of the final layer.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let last = *self.plans.last().expect("validated non-empty");
        let start = last.offset + last.weight_len();
        &mut self.weights[start..start + last.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn check_state(&self, state: &StateMatrix) -> Result<(), DqnError> {
        if (state.rows(), state.cols()) != self.arch.input {
            return Err(DqnError::Shape {
                expected: self.arch.input,
                found: (state.rows(), state.cols()),
            });
        }
        Ok(())
    }

    /// `params -= lr * grad`
    pub fn sgd_update(&mut self, grad: &[f64], lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(grad) {
            *w -= lr * g;
        }
    }
}

/// Reusable buffers for batched forward and backward passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    batch: usize,
    input: Vec<f64>,
    /// Post-activation output of every layer.
    acts: Vec<Vec<f64>>,
    /// im2col matrices for convolution layers (empty for dense).
    cols: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    dcol: Vec<f64>,
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (isize, isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every caller passes slices whose extents cover the strided
    // m x k, k x n and m x n views (checked by the debug asserts).
    debug_assert!(a.len() >= (m - 1) * rsa as usize + (k.max(1) - 1) * csa as usize + 1 || k == 0);
    debug_assert!(c.len() >= (m - 1) * rsc as usize + (n - 1) * csc as usize + 1);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

fn im2col(input: &[f64], batch: usize, plan: &LayerPlan, col: &mut Vec<f64>) {
    let LayerSpec::Conv { kernel: (kh, kw), stride: (sh, sw), .. } = plan.spec else {
        unreachable!()
    };
    let (h, w, c) = plan.input;
    let (oh, ow, _) = plan.output;
    let seg = kw * c;
    let k = plan.cols;
    col.resize(batch * oh * ow * k, 0.0);
    let mut row = 0;
    for b in 0..batch {
        let base = b * h * w * c;
        for y in 0..oh {
            for x in 0..ow {
                let dst = &mut col[row * k..(row + 1) * k];
                for i in 0..kh {
                    let src = base + ((y * sh + i) * w + x * sw) * c;
                    dst[i * seg..(i + 1) * seg].copy_from_slice(&input[src..src + seg]);
                }
                row += 1;
            }
        }
    }
}

fn col2im_add(dcol: &[f64], batch: usize, plan: &LayerPlan, dinput: &mut [f64]) {
    let LayerSpec::Conv { kernel: (kh, kw), stride: (sh, sw), .. } = plan.spec else {
        unreachable!()
    };
    let (h, w, c) = plan.input;
    let (oh, ow, _) = plan.output;
    let seg = kw * c;
    let k = plan.cols;
    let mut row = 0;
    for b in 0..batch {
        let base = b * h * w * c;
        for y in 0..oh {
            for x in 0..ow {
                let src = &dcol[row * k..(row + 1) * k];
                for i in 0..kh {
                    let dst = base + ((y * sh + i) * w + x * sw) * c;
                    for (d, s) in dinput[dst..dst + seg].iter_mut().zip(&src[i * seg..(i + 1) * seg]) {
                        *d += s;
                    }
                }
                row += 1;
            }
        }
    }
}

impl QNetworkParams {
    /// Forward pass over `batch` inputs laid out back to back in `inputs`.
    /// Returns the `batch x N` action values (row-major).
    pub fn forward_batch<'w>(&self, inputs: &[f64], batch: usize, ws: &'w mut Workspace) -> &'w [f64] {
        assert_eq!(inputs.len(), batch * self.input_len(), "input batch size mismatch");
        ws.batch = batch;
        ws.input.clear();
        ws.input.extend_from_slice(inputs);
        ws.acts.resize(self.plans.len(), Vec::new());
        ws.cols.resize(self.plans.len(), Vec::new());
        for (li, plan) in self.plans.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(li);
            let input: &[f64] = if li == 0 { &ws.input } else { &done[li - 1] };
            let out = &mut rest[0];
            let w = &self.weights[plan.offset..plan.offset + plan.weight_len()];
            let bias = &self.weights[plan.offset + plan.weight_len()..plan.offset + plan.len()];
            let f = plan.rows;
            let (a, m): (&[f64], usize) = match plan.spec {
                LayerSpec::Conv { .. } => {
                    im2col(input, batch, plan, &mut ws.cols[li]);
                    (&ws.cols[li], batch * plan.output.0 * plan.output.1)
                }
                LayerSpec::Dense { .. } => (input, batch),
            };
            out.resize(m * f, 0.0);
            for r in out.chunks_exact_mut(f) {
                r.copy_from_slice(bias);
            }
            let k = plan.cols;
            gemm(m, k, f, a, (k as isize, 1), w, (1, k as isize), 1.0, out, (f as isize, 1));
            if plan.spec.relu() {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        ws.acts.last().expect("non-empty network")
    }

    /// Backward pass for the batch last run through `forward_batch` on `ws`.
    /// `d_out` is dLoss/dQ (`batch x N`); the parameter gradient is
    /// accumulated into `grad`.
    pub fn backward_batch(&self, ws: &mut Workspace, d_out: &[f64], grad: &mut [f64]) {
        let batch = ws.batch;
        assert_eq!(grad.len(), self.weights.len());
        ws.delta.clear();
        ws.delta.extend_from_slice(d_out);
        for li in (0..self.plans.len()).rev() {
            let plan = &self.plans[li];
            let out = &ws.acts[li];
            if plan.spec.relu() {
                for (d, &o) in ws.delta.iter_mut().zip(out.iter()) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let f = plan.rows;
            let k = plan.cols;
            let input: &[f64] = if li == 0 { &ws.input } else { &ws.acts[li - 1] };
            let (a, m): (&[f64], usize) = match plan.spec {
                LayerSpec::Conv { .. } => (&ws.cols[li], batch * plan.output.0 * plan.output.1),
                LayerSpec::Dense { .. } => (input, batch),
            };
            let (gw, gb) = grad[plan.offset..plan.offset + plan.len()].split_at_mut(plan.weight_len());
            // dW (f x k) += delta^T (f x m) * a (m x k)
            gemm(f, m, k, &ws.delta, (1, f as isize), a, (k as isize, 1), 1.0, gw, (k as isize, 1));
            for r in ws.delta.chunks_exact(f) {
                for (g, d) in gb.iter_mut().zip(r) {
                    *g += d;
                }
            }
            if li == 0 {
                break;
            }
            let w = &self.weights[plan.offset..plan.offset + plan.weight_len()];
            match plan.spec {
                LayerSpec::Conv { .. } => {
                    ws.dcol.resize(m * k, 0.0);
                    gemm(m, f, k, &ws.delta, (f as isize, 1), w, (k as isize, 1), 0.0, &mut ws.dcol, (k as isize, 1));
                    ws.delta_prev.clear();
                    ws.delta_prev.resize(batch * plan.in_len(), 0.0);
                    col2im_add(&ws.dcol, batch, plan, &mut ws.delta_prev);
                }
                LayerSpec::Dense { .. } => {
                    ws.delta_prev.resize(m * k, 0.0);
                    gemm(m, f, k, &ws.delta, (f as isize, 1), w, (k as isize, 1), 0.0, &mut ws.delta_prev, (k as isize, 1));
                }
            }
            debug_assert_eq!(ws.delta_prev.len(), batch * plan.in_len());
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
    }

    /// Action values for one state.
    pub fn forward(&self, state: &StateMatrix, ws: &mut Workspace) -> Result<Vec<f64>, DqnError> {
        self.check_state(state)?;
        Ok(self.forward_batch(state.as_slice(), 1, ws).to_vec())
    }
}
