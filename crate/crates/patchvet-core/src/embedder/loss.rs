//! The contrastive loss and its analytic gradients.
//!
//! For a batch of `N` triplets, each anchor `aᵢ` is scored against every
//! in-batch positive `pⱼ` and negative `nⱼ`:
//!
//! ```text
//! lᵢ = −log( e^{cos(aᵢ,pᵢ)/τ} / Σⱼ ( e^{cos(aᵢ,pⱼ)/τ} + e^{cos(aᵢ,nⱼ)/τ} ) )
//! ```
//!
//! The reported loss is the mean of the `lᵢ`. Exponentials are stabilized by
//! subtracting each row's maximum argument. With all similarities equal the
//! row softmax is uniform over `2N` terms, so `lᵢ = log(2N)` exactly.
//!
//! Gradients: writing `wᵢⱼ` for the softmax weight of a term in row `i`,
//! `∂L/∂s^p_ij = (w^p_ij − δᵢⱼ)/(Nτ)` and `∂L/∂s^n_ij = w^n_ij/(Nτ)`. The
//! cosine contributes `∂cos(u,v)/∂u = v/(‖u‖‖v‖) − cos·u/‖u‖²`, and the rest
//! is plain backpropagation through the recorded forward traces: dropout
//! mask, second projection, `tanh`, first projection, token mean.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::math;

use super::{EmbedderError, EmbeddingModel, ForwardTrace, TrainingBatch, TripletBatch, MIN_NORM};

/// Per-anchor losses and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub per_anchor: Vec<f64>,
    pub mean: f64,
}

/// Gradients of the mean loss, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub token_table: Matrix,
    pub proj_w1: Matrix,
    pub proj_b1: Vec<f64>,
    pub proj_w2: Matrix,
    pub proj_b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &EmbeddingModel) -> Self {
        let c = model.config();
        Gradients {
            token_table: Matrix::zeros(c.vocab_size, c.d_emb),
            proj_w1: Matrix::zeros(c.d_emb, c.d_hid),
            proj_b1: vec![0.0; c.d_hid],
            proj_w2: Matrix::zeros(c.d_hid, c.d_out),
            proj_b2: vec![0.0; c.d_out],
        }
    }

    /// Mutable views in the same order as
    /// [`EmbeddingModel::parameters_mut`].
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.token_table.as_mut_slice(),
            self.proj_w1.as_mut_slice(),
            &mut self.proj_b1,
            self.proj_w2.as_mut_slice(),
            &mut self.proj_b2,
        ]
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            self.token_table.as_slice(),
            self.proj_w1.as_slice(),
            &self.proj_b1,
            self.proj_w2.as_slice(),
            &self.proj_b2,
        ]
    }
}

/// Pairwise cosine data for one batch.
struct CosineTable {
    /// `s_p[i][j] = cos(aᵢ, pⱼ)`.
    s_p: Vec<Vec<f64>>,
    /// `s_n[i][j] = cos(aᵢ, nⱼ)`.
    s_n: Vec<Vec<f64>>,
    norms_a: Vec<f64>,
    norms_p: Vec<f64>,
    norms_n: Vec<f64>,
}

fn norms_of(vectors: &[&[f64]]) -> Result<Vec<f64>, EmbedderError> {
    let mut norms = Vec::with_capacity(vectors.len());
    for v in vectors {
        let n = linalg::norm(v);
        if n < MIN_NORM {
            return Err(EmbedderError::DegenerateVector);
        }
        norms.push(n);
    }
    Ok(norms)
}

fn cosine_table(
    anchors: &[&[f64]],
    positives: &[&[f64]],
    negatives: &[&[f64]],
) -> Result<CosineTable, EmbedderError> {
    let norms_a = norms_of(anchors)?;
    let norms_p = norms_of(positives)?;
    let norms_n = norms_of(negatives)?;
    let n = anchors.len();
    let mut s_p = vec![vec![0.0; n]; n];
    let mut s_n = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s_p[i][j] = linalg::dot(anchors[i], positives[j]) / (norms_a[i] * norms_p[j]);
            s_n[i][j] = linalg::dot(anchors[i], negatives[j]) / (norms_a[i] * norms_n[j]);
        }
    }
    Ok(CosineTable {
        s_p,
        s_n,
        norms_a,
        norms_p,
        norms_n,
    })
}

/// Softmax weights and per-anchor losses for one batch.
struct RowSoftmax {
    /// `w_p[i][j]`: weight of the positive term `j` in row `i`.
    w_p: Vec<Vec<f64>>,
    w_n: Vec<Vec<f64>>,
    losses: Vec<f64>,
}

fn row_softmax(table: &CosineTable, temperature: f64) -> RowSoftmax {
    let n = table.s_p.len();
    let mut w_p = vec![vec![0.0; n]; n];
    let mut w_n = vec![vec![0.0; n]; n];
    let mut losses = Vec::with_capacity(n);
    for i in 0..n {
        let mut max_arg = f64::NEG_INFINITY;
        for j in 0..n {
            max_arg = max_arg.max(table.s_p[i][j] / temperature);
            max_arg = max_arg.max(table.s_n[i][j] / temperature);
        }
        let mut z = 0.0;
        for j in 0..n {
            w_p[i][j] = math::exp(table.s_p[i][j] / temperature - max_arg);
            w_n[i][j] = math::exp(table.s_n[i][j] / temperature - max_arg);
            z += w_p[i][j] + w_n[i][j];
        }
        let inv_z = 1.0 / z;
        for j in 0..n {
            w_p[i][j] *= inv_z;
            w_n[i][j] *= inv_z;
        }
        // lᵢ = −sᵖᵢᵢ/τ + log Zᵢ with log Zᵢ = max + log Σ e^{arg−max}.
        losses.push(-table.s_p[i][i] / temperature + max_arg + math::ln(z));
    }
    RowSoftmax { w_p, w_n, losses }
}

/// Computes the per-anchor losses and their mean for a triplet batch.
pub fn contrastive_loss(
    batch: &TripletBatch,
    temperature: f64,
) -> Result<LossBreakdown, EmbedderError> {
    batch.validate()?;
    if !(temperature > 0.0) {
        return Err(EmbedderError::InvalidTemperature);
    }
    let anchors: Vec<&[f64]> = batch.anchors.iter().map(|v| v.values.as_slice()).collect();
    let positives: Vec<&[f64]> = batch.positives.iter().map(|v| v.values.as_slice()).collect();
    let negatives: Vec<&[f64]> = batch.negatives.iter().map(|v| v.values.as_slice()).collect();
    let table = cosine_table(&anchors, &positives, &negatives)?;
    let softmax = row_softmax(&table, temperature);
    let mean = softmax.losses.iter().sum::<f64>() / softmax.losses.len() as f64;
    Ok(LossBreakdown {
        per_anchor: softmax.losses,
        mean,
    })
}

/// `∂cos(u,v)/∂u` accumulated into `out` with weight `scale`.
fn add_cosine_grad(
    out: &mut [f64],
    u: &[f64],
    v: &[f64],
    cos_uv: f64,
    norm_u: f64,
    norm_v: f64,
    scale: f64,
) {
    let a = scale / (norm_u * norm_v);
    let b = scale * cos_uv / (norm_u * norm_u);
    for ((o, &vk), &uk) in out.iter_mut().zip(v).zip(u) {
        *o += a * vk - b * uk;
    }
}

/// Backpropagates one output-vector gradient through its forward trace.
fn backprop_trace(
    model: &EmbeddingModel,
    trace: &ForwardTrace,
    g_out: &[f64],
    grads: &mut Gradients,
) {
    // y = mask ⊙ z₂
    let g_z2: Vec<f64> = g_out
        .iter()
        .zip(&trace.dropout_mask)
        .map(|(g, m)| g * m)
        .collect();
    // z₂ = W₂ᵀ h + b₂
    grads.proj_w2.add_outer(&trace.hidden, &g_z2, 1.0);
    linalg::axpy(&mut grads.proj_b2, &g_z2, 1.0);
    let g_h = model.proj_w2().mul_vec(&g_z2);
    // h = tanh(z₁)
    let g_z1: Vec<f64> = g_h
        .iter()
        .zip(&trace.hidden)
        .map(|(g, h)| g * (1.0 - h * h))
        .collect();
    // z₁ = W₁ᵀ x + b₁
    grads.proj_w1.add_outer(&trace.mean_embedding, &g_z1, 1.0);
    linalg::axpy(&mut grads.proj_b1, &g_z1, 1.0);
    let g_x = model.proj_w1().mul_vec(&g_z1);
    // x = mean of token embeddings
    let inv_len = 1.0 / trace.tokens.len() as f64;
    for &t in &trace.tokens {
        linalg::axpy(grads.token_table.row_mut(t as usize), &g_x, inv_len);
    }
}

/// Analytic gradients of the mean contrastive loss with respect to every
/// model parameter, for the recorded dropout masks in `batch`. Also returns
/// the loss itself (computed from the same traces).
pub fn loss_gradient(
    model: &EmbeddingModel,
    batch: &TrainingBatch,
    temperature: f64,
) -> Result<(Gradients, LossBreakdown), EmbedderError> {
    if !(temperature > 0.0) {
        return Err(EmbedderError::InvalidTemperature);
    }
    let n = batch.len();
    if n == 0
        || batch.positive_traces.len() != n
        || batch.negative_traces.len() != n
    {
        return Err(EmbedderError::BatchShapeMismatch);
    }
    let anchors: Vec<&[f64]> = batch.anchor_traces.iter().map(|t| t.output.as_slice()).collect();
    let positives: Vec<&[f64]> = batch.positive_traces.iter().map(|t| t.output.as_slice()).collect();
    let negatives: Vec<&[f64]> = batch.negative_traces.iter().map(|t| t.output.as_slice()).collect();
    let table = cosine_table(&anchors, &positives, &negatives)?;
    let softmax = row_softmax(&table, temperature);
    let mean = softmax.losses.iter().sum::<f64>() / n as f64;

    let d_out = anchors[0].len();
    let mut g_anchor = vec![vec![0.0; d_out]; n];
    let mut g_positive = vec![vec![0.0; d_out]; n];
    let mut g_negative = vec![vec![0.0; d_out]; n];
    let inv_nt = 1.0 / (n as f64 * temperature);
    for i in 0..n {
        for j in 0..n {
            let dl_dsp = (softmax.w_p[i][j] - if i == j { 1.0 } else { 0.0 }) * inv_nt;
            let dl_dsn = softmax.w_n[i][j] * inv_nt;
            add_cosine_grad(
                &mut g_anchor[i],
                anchors[i],
                positives[j],
                table.s_p[i][j],
                table.norms_a[i],
                table.norms_p[j],
                dl_dsp,
            );
            add_cosine_grad(
                &mut g_positive[j],
                positives[j],
                anchors[i],
                table.s_p[i][j],
                table.norms_p[j],
                table.norms_a[i],
                dl_dsp,
            );
            add_cosine_grad(
                &mut g_anchor[i],
                anchors[i],
                negatives[j],
                table.s_n[i][j],
                table.norms_a[i],
                table.norms_n[j],
                dl_dsn,
            );
            add_cosine_grad(
                &mut g_negative[j],
                negatives[j],
                anchors[i],
                table.s_n[i][j],
                table.norms_n[j],
                table.norms_a[i],
                dl_dsn,
            );
        }
    }

    let mut grads = Gradients::zeros_like(model);
    for i in 0..n {
        backprop_trace(model, &batch.anchor_traces[i], &g_anchor[i], &mut grads);
        backprop_trace(model, &batch.positive_traces[i], &g_positive[i], &mut grads);
        backprop_trace(model, &batch.negative_traces[i], &g_negative[i], &mut grads);
    }
    Ok((
        grads,
        LossBreakdown {
            per_anchor: softmax.losses,
            mean,
        },
    ))
}
