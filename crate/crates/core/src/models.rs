//! Deep linear networks and feedforward ReLU networks with exact gradients,
//! flat parameter handling, likelihood losses, and the layer rescaling
//! transform.
//!
//! Parameter layout is per layer, contiguous: for each layer j = 1..=M the
//! weight matrix W_j (H_j x H_{j-1}, row-major) followed by the bias b_j
//! (H_j) when the model has biases. All arithmetic is f64.

use std::io::{Read, Write};
use std::path::Path;

use crate::datagen::{Dataset, Targets};
use crate::error::{Error, Result};
use crate::numerics::linalg::{axpy, dot, Matrix};
use crate::numerics::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Identity activations, no biases.
    Dln,
    /// ReLU activations on hidden layers, linear output, biases everywhere.
    ReluMlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

/// Architecture description: layer widths H_0..H_M plus likelihood settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub widths: Vec<usize>,
    pub has_bias: bool,
    pub noise_variance: f64,
    pub task: Task,
}

impl ModelSpec {
    pub fn new(
        kind: ModelKind,
        widths: Vec<usize>,
        has_bias: bool,
        noise_variance: f64,
        task: Task,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "model needs an input and an output width".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero layer width".into()));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(ModelSpec {
            kind,
            widths,
            has_bias,
            noise_variance,
            task,
        })
    }

    /// Biasless deep linear network for regression with unit noise variance.
    pub fn dln(widths: Vec<usize>) -> Result<Self> {
        Self::new(ModelKind::Dln, widths, false, 1.0, Task::Regression)
    }

    /// ReLU MLP with biases for regression with unit noise variance.
    pub fn relu_mlp(widths: Vec<usize>) -> Result<Self> {
        Self::new(ModelKind::ReluMlp, widths, true, 1.0, Task::Regression)
    }

    pub fn with_noise_variance(mut self, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        self.noise_variance = noise_variance;
        Ok(self)
    }

    /// Number of weight matrices.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        let weights: usize = (1..self.widths.len())
            .map(|j| self.widths[j] * self.widths[j - 1])
            .sum();
        let biases: usize = if self.has_bias {
            self.widths[1..].iter().sum()
        } else {
            0
        };
        weights + biases
    }

    /// Offset of W_j in the flat layout (layers are 1-based).
    pub fn weight_offset(&self, layer: usize) -> usize {
        debug_assert!((1..=self.depth()).contains(&layer));
        let mut off = 0;
        for j in 1..layer {
            off += self.widths[j] * self.widths[j - 1];
            if self.has_bias {
                off += self.widths[j];
            }
        }
        off
    }

    pub fn bias_offset(&self, layer: usize) -> usize {
        debug_assert!(self.has_bias);
        self.weight_offset(layer) + self.widths[layer] * self.widths[layer - 1]
    }
}

/// Flat parameter vector tied (by length) to a `ModelSpec`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(spec: &ModelSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector of length {} for a model with {} parameters",
                values.len(),
                spec.param_count()
            )));
        }
        Ok(ParamVector { values })
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        ParamVector {
            values: vec![0.0; spec.param_count()],
        }
    }

    /// Every entry i.i.d. standard normal (no fan-in scaling).
    pub fn init_gaussian(spec: &ModelSpec, rng: &mut Rng) -> Self {
        ParamVector {
            values: (0..spec.param_count())
                .map(|_| rng.standard_normal())
                .collect(),
        }
    }

    /// Assemble from per-layer weight matrices (biasless layout).
    pub fn from_matrices(spec: &ModelSpec, mats: &[Matrix]) -> Result<Self> {
        if spec.has_bias {
            return Err(Error::InvalidArgument(
                "from_matrices only supports biasless layouts".into(),
            ));
        }
        if mats.len() != spec.depth() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices for depth {}",
                mats.len(),
                spec.depth()
            )));
        }
        let mut values = Vec::with_capacity(spec.param_count());
        for (j, m) in mats.iter().enumerate() {
            if m.rows() != spec.widths[j + 1] || m.cols() != spec.widths[j] {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} expects {}x{}, got {}x{}",
                    j + 1,
                    spec.widths[j + 1],
                    spec.widths[j],
                    m.rows(),
                    m.cols()
                )));
            }
            values.extend_from_slice(m.data());
        }
        ParamVector::new(spec, values)
    }

    /// Split back into per-layer weight matrices (ignores biases).
    pub fn to_matrices(&self, spec: &ModelSpec) -> Vec<Matrix> {
        (1..=spec.depth())
            .map(|j| {
                let off = spec.weight_offset(j);
                let (r, c) = (spec.widths[j], spec.widths[j - 1]);
                Matrix::from_vec(r, c, self.values[off..off + r * c].to_vec()).unwrap()
            })
            .collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Four simultaneous dot products sharing the left operand's loads; the
/// backbone of the batch forward pass. Accumulation is lane-split into
/// [f64; 4] blocks so the compiler can keep whole SIMD registers per output.
#[inline]
fn dot4(x: &[f64], w0: &[f64], w1: &[f64], w2: &[f64], w3: &[f64]) -> [f64; 4] {
    let n = x.len();
    let chunks = n / 4;
    let mut a0 = [0.0f64; 4];
    let mut a1 = [0.0f64; 4];
    let mut a2 = [0.0f64; 4];
    let mut a3 = [0.0f64; 4];
    for c in 0..chunks {
        let i = c * 4;
        for l in 0..4 {
            let xv = x[i + l];
            a0[l] += xv * w0[i + l];
            a1[l] += xv * w1[i + l];
            a2[l] += xv * w2[i + l];
            a3[l] += xv * w3[i + l];
        }
    }
    let mut out = [
        (a0[0] + a0[1]) + (a0[2] + a0[3]),
        (a1[0] + a1[1]) + (a1[2] + a1[3]),
        (a2[0] + a2[1]) + (a2[2] + a2[3]),
        (a3[0] + a3[1]) + (a3[2] + a3[3]),
    ];
    for k in chunks * 4..n {
        let xv = x[k];
        out[0] += xv * w0[k];
        out[1] += xv * w1[k];
        out[2] += xv * w2[k];
        out[3] += xv * w3[k];
    }
    out
}

/// dst[k] += c0 w0[k] + c1 w1[k] + c2 w2[k] + c3 w3[k]
#[inline]
fn axpy4(dst: &mut [f64], c: [f64; 4], w0: &[f64], w1: &[f64], w2: &[f64], w3: &[f64]) {
    for k in 0..dst.len() {
        dst[k] += c[0] * w0[k] + c[1] * w1[k] + c[2] * w2[k] + c[3] * w3[k];
    }
}

fn weight<'a>(spec: &ModelSpec, w: &'a [f64], layer: usize) -> &'a [f64] {
    let off = spec.weight_offset(layer);
    &w[off..off + spec.widths[layer] * spec.widths[layer - 1]]
}

fn bias<'a>(spec: &ModelSpec, w: &'a [f64], layer: usize) -> Option<&'a [f64]> {
    if !spec.has_bias {
        return None;
    }
    let off = spec.bias_offset(layer);
    Some(&w[off..off + spec.widths[layer]])
}

/// Network output for one input vector.
pub fn forward(spec: &ModelSpec, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input of length {}, expected {}",
            x.len(),
            spec.input_dim()
        )));
    }
    let w = params.as_slice();
    let mut act = x.to_vec();
    for j in 1..=spec.depth() {
        let rows = spec.widths[j];
        let cols = spec.widths[j - 1];
        let wj = weight(spec, w, j);
        let bj = bias(spec, w, j);
        let mut next = vec![0.0; rows];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut v = dot(&wj[o * cols..(o + 1) * cols], &act);
            if let Some(b) = bj {
                v += b[o];
            }
            *slot = v;
        }
        if spec.kind == ModelKind::ReluMlp && j < spec.depth() {
            for v in &mut next {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        act = next;
    }
    Ok(act)
}

/// Collapsed single-matrix form W_M ... W_1 of a DLN; the oracle against
/// which the layered forward pass is checked.
pub fn collapsed_product(spec: &ModelSpec, params: &ParamVector) -> Result<Matrix> {
    if spec.kind != ModelKind::Dln {
        return Err(Error::InvalidArgument(
            "collapsed_product applies to DLNs".into(),
        ));
    }
    let mats = params.to_matrices(spec);
    let mut prod = mats[0].clone();
    for m in &mats[1..] {
        prod = m.matmul(&prod)?;
    }
    Ok(prod)
}

/// Post-activation values for a minibatch, layer by layer. `layers[j]` holds
/// the batch-major activations after layer j (layer 0 is the input).
struct ForwardPass {
    layers: Vec<Vec<f64>>,
}

fn forward_batch(
    spec: &ModelSpec,
    w: &[f64],
    data: &Dataset,
    batch: &[usize],
) -> ForwardPass {
    let b = batch.len();
    let in_dim = spec.input_dim();
    let mut layers = Vec::with_capacity(spec.depth() + 1);
    let mut act = vec![0.0; b * in_dim];
    for (row, &i) in batch.iter().enumerate() {
        act[row * in_dim..(row + 1) * in_dim].copy_from_slice(data.input(i));
    }
    layers.push(act);
    for j in 1..=spec.depth() {
        let rows = spec.widths[j];
        let cols = spec.widths[j - 1];
        let wj = weight(spec, w, j);
        let bj = bias(spec, w, j);
        let prev = layers.last().unwrap();
        let mut next = vec![0.0; b * rows];
        for row in 0..b {
            let src = &prev[row * cols..(row + 1) * cols];
            let dst = &mut next[row * rows..(row + 1) * rows];
            let mut o = 0;
            while o + 4 <= rows {
                let vals = dot4(
                    src,
                    &wj[o * cols..(o + 1) * cols],
                    &wj[(o + 1) * cols..(o + 2) * cols],
                    &wj[(o + 2) * cols..(o + 3) * cols],
                    &wj[(o + 3) * cols..(o + 4) * cols],
                );
                dst[o..o + 4].copy_from_slice(&vals);
                o += 4;
            }
            for oo in o..rows {
                dst[oo] = dot(&wj[oo * cols..(oo + 1) * cols], src);
            }
            if let Some(bv) = bj {
                for (slot, bo) in dst.iter_mut().zip(bv) {
                    *slot += bo;
                }
            }
        }
        if spec.kind == ModelKind::ReluMlp && j < spec.depth() {
            for v in &mut next {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        layers.push(next);
    }
    ForwardPass { layers }
}

fn batch_loss(
    spec: &ModelSpec,
    outputs: &[f64],
    data: &Dataset,
    batch: &[usize],
) -> f64 {
    let b = batch.len();
    let out_dim = spec.output_dim();
    match (&spec.task, &data.targets) {
        (Task::Regression, Targets::Regression(ys)) => {
            let mut sq = 0.0;
            for (row, &i) in batch.iter().enumerate() {
                let f = &outputs[row * out_dim..(row + 1) * out_dim];
                let y = &ys[i * out_dim..(i + 1) * out_dim];
                for (fo, yo) in f.iter().zip(y) {
                    let r = fo - yo;
                    sq += r * r;
                }
            }
            let s2 = spec.noise_variance;
            sq / (2.0 * s2 * b as f64)
                + 0.5 * out_dim as f64 * (2.0 * std::f64::consts::PI * s2).ln()
        }
        (Task::Classification, Targets::Classes(cs)) => {
            let mut ce = 0.0;
            for (row, &i) in batch.iter().enumerate() {
                let logits = &outputs[row * out_dim..(row + 1) * out_dim];
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max
                    + logits
                        .iter()
                        .map(|l| (l - max).exp())
                        .sum::<f64>()
                        .ln();
                ce += lse - logits[cs[i]];
            }
            ce / b as f64
        }
        _ => f64::NAN, // task/targets mismatch is caught by validate_batch
    }
}

fn validate_batch(spec: &ModelSpec, data: &Dataset, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if data.input_dim != spec.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset input dim {} vs model {}",
            data.input_dim,
            spec.input_dim()
        )));
    }
    let outputs_ok = match &data.targets {
        Targets::Regression(_) => {
            spec.task == Task::Regression && data.output_dim == spec.output_dim()
        }
        Targets::Classes(cs) => {
            spec.task == Task::Classification
                && cs.iter().all(|&c| c < spec.output_dim())
        }
    };
    if !outputs_ok {
        return Err(Error::DimensionMismatch(
            "dataset targets incompatible with model task/output width".into(),
        ));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= data.n) {
        return Err(Error::InvalidArgument(format!(
            "batch index {i} out of range for n = {}",
            data.n
        )));
    }
    Ok(())
}

/// Allocation-light loss path used by samplers; callers must have validated
/// shapes once up front.
pub(crate) fn nll_loss_raw(spec: &ModelSpec, w: &[f64], data: &Dataset, batch: &[usize]) -> f64 {
    let pass = forward_batch(spec, w, data, batch);
    batch_loss(spec, pass.layers.last().unwrap(), data, batch)
}

/// Averaged negative log likelihood of a minibatch.
///
/// Regression: (1/B) sum ||y - f||^2 / (2 sigma^2) + (H_M/2) log(2 pi sigma^2).
/// The constant is kept so reported losses are true NLLs; estimators only use
/// differences, where it cancels.
pub fn nll_loss(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &Dataset,
    batch: &[usize],
) -> Result<f64> {
    validate_batch(spec, data, batch)?;
    let pass = forward_batch(spec, params.as_slice(), data, batch);
    Ok(batch_loss(spec, pass.layers.last().unwrap(), data, batch))
}

/// Minibatch NLL and its exact gradient in one pass; the forward activations
/// computed for the gradient also produce the returned loss value.
pub fn nll_loss_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &Dataset,
    batch: &[usize],
    grad: &mut [f64],
) -> Result<f64> {
    validate_batch(spec, data, batch)?;
    if grad.len() != spec.param_count() {
        return Err(Error::DimensionMismatch(
            "gradient buffer length mismatch".into(),
        ));
    }
    Ok(nll_loss_grad_raw(spec, params.as_slice(), data, batch, grad))
}

/// Allocation-light loss+gradient path used by samplers; callers must have
/// validated shapes once up front.
pub(crate) fn nll_loss_grad_raw(
    spec: &ModelSpec,
    w: &[f64],
    data: &Dataset,
    batch: &[usize],
    grad: &mut [f64],
) -> f64 {
    let b = batch.len();
    let out_dim = spec.output_dim();
    let pass = forward_batch(spec, w, data, batch);
    let outputs = pass.layers.last().unwrap();
    let loss = batch_loss(spec, outputs, data, batch);

    // delta at the output layer: d(loss)/d(outputs)
    let mut delta = vec![0.0; b * out_dim];
    match (&spec.task, &data.targets) {
        (Task::Regression, Targets::Regression(ys)) => {
            let scale = 1.0 / (spec.noise_variance * b as f64);
            for (row, &i) in batch.iter().enumerate() {
                for o in 0..out_dim {
                    delta[row * out_dim + o] =
                        scale * (outputs[row * out_dim + o] - ys[i * out_dim + o]);
                }
            }
        }
        (Task::Classification, Targets::Classes(cs)) => {
            for (row, &i) in batch.iter().enumerate() {
                let logits = &outputs[row * out_dim..(row + 1) * out_dim];
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                for o in 0..out_dim {
                    let p = exps[o] / z;
                    delta[row * out_dim + o] =
                        (p - if o == cs[i] { 1.0 } else { 0.0 }) / b as f64;
                }
            }
        }
        _ => unreachable!("validated above"),
    }

    grad.fill(0.0);
    for j in (1..=spec.depth()).rev() {
        let rows = spec.widths[j];
        let cols = spec.widths[j - 1];
        let prev = &pass.layers[j - 1];
        let woff = spec.weight_offset(j);
        // dL/dW_j[o,k] = sum_b delta[b,o] * prev[b,k]; four batch rows are
        // fused per pass so each gradient row is streamed once per chunk.
        let mut row = 0;
        while row + 4 <= b {
            let d0 = &delta[row * rows..(row + 1) * rows];
            let d1 = &delta[(row + 1) * rows..(row + 2) * rows];
            let d2 = &delta[(row + 2) * rows..(row + 3) * rows];
            let d3 = &delta[(row + 3) * rows..(row + 4) * rows];
            let p0 = &prev[row * cols..(row + 1) * cols];
            let p1 = &prev[(row + 1) * cols..(row + 2) * cols];
            let p2 = &prev[(row + 2) * cols..(row + 3) * cols];
            let p3 = &prev[(row + 3) * cols..(row + 4) * cols];
            for o in 0..rows {
                let c = [d0[o], d1[o], d2[o], d3[o]];
                if c != [0.0; 4] {
                    axpy4(
                        &mut grad[woff + o * cols..woff + (o + 1) * cols],
                        c,
                        p0,
                        p1,
                        p2,
                        p3,
                    );
                }
            }
            row += 4;
        }
        for r in row..b {
            let drow = &delta[r * rows..(r + 1) * rows];
            let prow = &prev[r * cols..(r + 1) * cols];
            for (o, &d) in drow.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, prow, &mut grad[woff + o * cols..woff + (o + 1) * cols]);
                }
            }
        }
        if spec.has_bias {
            let boff = spec.bias_offset(j);
            for row in 0..b {
                for o in 0..rows {
                    grad[boff + o] += delta[row * rows + o];
                }
            }
        }
        if j > 1 {
            // delta_{j-1}[b,k] = (sum_o delta[b,o] W_j[o,k]) * act'(prev[b,k])
            let wj = weight(spec, w, j);
            let mut next_delta = vec![0.0; b * cols];
            for row in 0..b {
                let drow = &delta[row * rows..(row + 1) * rows];
                let dst = &mut next_delta[row * cols..(row + 1) * cols];
                let mut o = 0;
                while o + 4 <= rows {
                    let c = [drow[o], drow[o + 1], drow[o + 2], drow[o + 3]];
                    if c != [0.0; 4] {
                        axpy4(
                            dst,
                            c,
                            &wj[o * cols..(o + 1) * cols],
                            &wj[(o + 1) * cols..(o + 2) * cols],
                            &wj[(o + 2) * cols..(o + 3) * cols],
                            &wj[(o + 3) * cols..(o + 4) * cols],
                        );
                    }
                    o += 4;
                }
                for oo in o..rows {
                    if drow[oo] != 0.0 {
                        axpy(drow[oo], &wj[oo * cols..(oo + 1) * cols], dst);
                    }
                }
                if spec.kind == ModelKind::ReluMlp {
                    let prow = &prev[row * cols..(row + 1) * cols];
                    for (k, slot) in dst.iter_mut().enumerate() {
                        if prow[k] <= 0.0 {
                            *slot = 0.0;
                        }
                    }
                }
            }
            delta = next_delta;
        }
    }
    loss
}

/// Function-preserving rescale of adjacent MLP layers:
/// W_j <- W_j / alpha, b_j <- b_j / alpha, W_{j+1} <- alpha * W_{j+1}.
pub fn rescale_layers(
    spec: &ModelSpec,
    params: &ParamVector,
    layer: usize,
    alpha: f64,
) -> Result<ParamVector> {
    if spec.kind != ModelKind::ReluMlp {
        return Err(Error::InvalidArgument(
            "rescale_layers applies to ReLU MLPs".into(),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rescale factor must be positive, got {alpha}"
        )));
    }
    if layer < 1 || layer + 1 > spec.depth() {
        return Err(Error::InvalidArgument(format!(
            "rescale needs layers {layer} and {} to exist",
            layer + 1
        )));
    }
    let mut out = params.clone();
    let w = out.as_mut_slice();
    let woff = spec.weight_offset(layer);
    for v in &mut w[woff..woff + spec.widths[layer] * spec.widths[layer - 1]] {
        *v /= alpha;
    }
    if spec.has_bias {
        let boff = spec.bias_offset(layer);
        for v in &mut w[boff..boff + spec.widths[layer]] {
            *v /= alpha;
        }
    }
    let woff2 = spec.weight_offset(layer + 1);
    for v in &mut w[woff2..woff2 + spec.widths[layer + 1] * spec.widths[layer]] {
        *v *= alpha;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Checkpoint files
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"LLCKPT01";

/// Write a parameter checkpoint. Layout (all little-endian):
/// magic "LLCKPT01", endian tag u8 (1), float width u8 (8), kind u8,
/// task u8, has_bias u8, width count u32, widths u32 each, sigma^2 f64,
/// param count u64, then the flat f64 parameter array.
pub fn save_checkpoint(path: &Path, spec: &ModelSpec, params: &ParamVector) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch(
            "checkpoint params do not match spec".into(),
        ));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CHECKPOINT_MAGIC)?;
    f.write_all(&[1u8, 8u8])?;
    f.write_all(&[match spec.kind {
        ModelKind::Dln => 0u8,
        ModelKind::ReluMlp => 1u8,
    }])?;
    f.write_all(&[match spec.task {
        Task::Regression => 0u8,
        Task::Classification => 1u8,
    }])?;
    f.write_all(&[u8::from(spec.has_bias)])?;
    f.write_all(&(spec.widths.len() as u32).to_le_bytes())?;
    for &w in &spec.widths {
        f.write_all(&(w as u32).to_le_bytes())?;
    }
    f.write_all(&spec.noise_variance.to_le_bytes())?;
    f.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelSpec, ParamVector)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let mut head = [0u8; 5];
    f.read_exact(&mut head)?;
    if head[0] != 1 || head[1] != 8 {
        return Err(Error::Format(
            "unsupported endianness or float width".into(),
        ));
    }
    let kind = match head[2] {
        0 => ModelKind::Dln,
        1 => ModelKind::ReluMlp,
        k => return Err(Error::Format(format!("unknown model kind tag {k}"))),
    };
    let task = match head[3] {
        0 => Task::Regression,
        1 => Task::Classification,
        t => return Err(Error::Format(format!("unknown task tag {t}"))),
    };
    let has_bias = match head[4] {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("bad bias flag {b}"))),
    };
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let nwidths = u32::from_le_bytes(u32buf) as usize;
    if !(2..=10_000).contains(&nwidths) {
        return Err(Error::Format(format!("implausible width count {nwidths}")));
    }
    let mut widths = Vec::with_capacity(nwidths);
    for _ in 0..nwidths {
        f.read_exact(&mut u32buf)?;
        widths.push(u32::from_le_bytes(u32buf) as usize);
    }
    let mut f64buf = [0u8; 8];
    f.read_exact(&mut f64buf)?;
    let sigma2 = f64::from_le_bytes(f64buf);
    let spec = ModelSpec::new(kind, widths, has_bias, sigma2, task)?;
    f.read_exact(&mut f64buf)?;
    let count = u64::from_le_bytes(f64buf) as usize;
    if count != spec.param_count() {
        return Err(Error::Format(format!(
            "checkpoint stores {count} params, spec implies {}",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        f.read_exact(&mut f64buf)?;
        values.push(f64::from_le_bytes(f64buf));
    }
    Ok((spec, ParamVector { values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen;
    use approx::assert_relative_eq;

    fn dataset_from_rows(
        spec: &ModelSpec,
        xs: Vec<Vec<f64>>,
        ys: Vec<Vec<f64>>,
    ) -> Dataset {
        let n = xs.len();
        Dataset {
            inputs: xs.into_iter().flatten().collect(),
            targets: Targets::Regression(ys.into_iter().flatten().collect()),
            n,
            input_dim: spec.input_dim(),
            output_dim: spec.output_dim(),
        }
    }

    #[test]
    fn dln_identity_forward() {
        let spec = ModelSpec::dln(vec![3, 3, 3]).unwrap();
        let mats = vec![Matrix::identity(3), Matrix::identity(3)];
        let w = ParamVector::from_matrices(&spec, &mats).unwrap();
        let x = [0.5, -1.0, 2.0];
        assert_eq!(forward(&spec, &w, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn dln_hand_product() {
        // W1 = W2 = [[1,1],[0,1]]; product [[1,2],[0,1]]; x=(1,0) -> (1,0).
        let spec = ModelSpec::dln(vec![2, 2, 2]).unwrap();
        let m = Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        let w = ParamVector::from_matrices(&spec, &[m.clone(), m]).unwrap();
        let y = forward(&spec, &w, &[1.0, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
        let y2 = forward(&spec, &w, &[0.0, 1.0]).unwrap();
        assert_eq!(y2, vec![2.0, 1.0]);
        let prod = collapsed_product(&spec, &w).unwrap();
        assert_eq!(prod.data(), &[1.0, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn mlp_equals_dln_on_nonnegative_region() {
        let mut rng = Rng::seed_from_u64(3);
        let dln = ModelSpec::dln(vec![3, 4, 2]).unwrap();
        let mats: Vec<Matrix> = vec![
            Matrix::from_vec(4, 3, (0..12).map(|_| rng.uniform()).collect()).unwrap(),
            Matrix::from_vec(2, 4, (0..8).map(|_| rng.uniform()).collect()).unwrap(),
        ];
        let w_dln = ParamVector::from_matrices(&dln, &mats).unwrap();

        let mlp = ModelSpec::new(ModelKind::ReluMlp, vec![3, 4, 2], false, 1.0, Task::Regression)
            .unwrap();
        let w_mlp = ParamVector::new(&mlp, w_dln.as_slice().to_vec()).unwrap();

        let x = [0.3, 0.9, 0.1];
        let a = forward(&dln, &w_dln, &x).unwrap();
        let b = forward(&mlp, &w_mlp, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, max_relative = 1e-14);
        }
    }

    #[test]
    fn forward_rejects_bad_input_length() {
        let spec = ModelSpec::dln(vec![3, 2]).unwrap();
        let w = ParamVector::zeros(&spec);
        assert!(forward(&spec, &w, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn nll_at_true_parameter_is_the_constant() {
        let spec = ModelSpec::dln(vec![2, 3, 2]).unwrap();
        let mut rng = Rng::seed_from_u64(5);
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        let data = datagen::gen_realizable(&spec, &w, 50, &mut rng).unwrap();
        let batch: Vec<usize> = (0..data.n).collect();
        let loss = nll_loss(&spec, &w, &data, &batch).unwrap();
        let expected = 0.5 * 2.0 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(loss, expected, max_relative = 1e-12);
    }

    #[test]
    fn nll_single_unit_residual_adds_half() {
        let spec = ModelSpec::dln(vec![2, 2]).unwrap();
        let w = ParamVector::zeros(&spec);
        let data = dataset_from_rows(
            &spec,
            vec![vec![0.0, 0.0]],
            vec![vec![1.0, 0.0]],
        );
        let loss = nll_loss(&spec, &w, &data, &[0]).unwrap();
        let constant = 0.5 * 2.0 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(loss, constant + 0.5, max_relative = 1e-12);
    }

    #[test]
    fn classification_uniform_logits_give_log_k() {
        let spec = ModelSpec::new(
            ModelKind::ReluMlp,
            vec![3, 5],
            true,
            1.0,
            Task::Classification,
        )
        .unwrap();
        let w = ParamVector::zeros(&spec);
        let data = Dataset {
            inputs: vec![0.4, -0.3, 0.2],
            targets: Targets::Classes(vec![2]),
            n: 1,
            input_dim: 3,
            output_dim: 5,
        };
        let loss = nll_loss(&spec, &w, &data, &[0]).unwrap();
        assert_relative_eq!(loss, 5.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let spec = ModelSpec::dln(vec![2, 2]).unwrap();
        let w = ParamVector::zeros(&spec);
        let data = dataset_from_rows(&spec, vec![vec![0.0, 0.0]], vec![vec![0.0, 0.0]]);
        assert!(nll_loss(&spec, &w, &data, &[]).is_err());
    }

    #[test]
    fn gradient_zero_at_interpolating_parameter() {
        let spec = ModelSpec::dln(vec![2, 2, 1]).unwrap();
        let mut rng = Rng::seed_from_u64(9);
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        let data = datagen::gen_realizable(&spec, &w, 20, &mut rng).unwrap();
        let batch: Vec<usize> = (0..20).collect();
        let mut grad = vec![0.0; spec.param_count()];
        nll_loss_grad(&spec, &w, &data, &batch, &mut grad).unwrap();
        for g in grad {
            assert!(g.abs() < 1e-10, "grad entry {g}");
        }
    }

    #[test]
    fn gradient_hand_example_1_1_1() {
        // Single sample x=1, y=0: L = (w1 w2)^2/2 + const, so
        // dL/dw1 = w1 w2^2 and dL/dw2 = w1^2 w2.
        let spec = ModelSpec::dln(vec![1, 1, 1]).unwrap();
        let (w1, w2) = (0.7, -1.3);
        let w = ParamVector::new(&spec, vec![w1, w2]).unwrap();
        let data = dataset_from_rows(&spec, vec![vec![1.0]], vec![vec![0.0]]);
        let mut grad = vec![0.0; 2];
        nll_loss_grad(&spec, &w, &data, &[0], &mut grad).unwrap();
        assert_relative_eq!(grad[0], w1 * w2 * w2, max_relative = 1e-12);
        assert_relative_eq!(grad[1], w1 * w1 * w2, max_relative = 1e-12);
    }

    #[test]
    fn rescale_identity_and_roundtrip() {
        let spec = ModelSpec::relu_mlp(vec![2, 4, 2]).unwrap();
        let mut rng = Rng::seed_from_u64(21);
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        let same = rescale_layers(&spec, &w, 1, 1.0).unwrap();
        assert_eq!(same, w);
        let twice = rescale_layers(&spec, &w, 1, 2.0).unwrap();
        let back = rescale_layers(&spec, &twice, 1, 0.5).unwrap();
        for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(rescale_layers(&spec, &w, 1, 0.0).is_err());
        assert!(rescale_layers(&spec, &w, 2, 2.0).is_err());
    }

    #[test]
    fn rescale_preserves_forward_outputs() {
        let spec = ModelSpec::relu_mlp(vec![3, 8, 2]).unwrap();
        let mut rng = Rng::seed_from_u64(33);
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        let scaled = rescale_layers(&spec, &w, 1, 1e3).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
            let a = forward(&spec, &w, &x).unwrap();
            let b = forward(&spec, &scaled, &x).unwrap();
            let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-6 * scale, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = std::env::temp_dir().join("llc_core_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        let spec = ModelSpec::relu_mlp(vec![4, 7, 3]).unwrap();
        let mut rng = Rng::seed_from_u64(77);
        let w = ParamVector::init_gaussian(&spec, &mut rng);
        save_checkpoint(&path, &spec, &w).unwrap();
        let (spec2, w2) = load_checkpoint(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(w, w2);
        std::fs::remove_file(&path).unwrap();
    }
}
