//! Two-branch GCN with a negative-sample branch.
//!
//! Every hidden layer computes
//!
//! ```text
//! x ← ReLU(Â x W) − λ · ReLU(Â_neg x W_dpp)
//! ```
//!
//! followed by dropout in training mode. The classifier layer is a plain
//! propagation `Â x W` emitting logits. Gradients are derived by hand.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LinearOperator;
use crate::metrics::accuracy;
use crate::seed;
use crate::sparse::CsrMatrix;

/// Input feature matrix. Bag-of-words features are mostly zeros, so the
/// sparse form keeps the first layer cheap.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Array2<f64>),
    Sparse(CsrMatrix),
}

impl Features {
    pub fn nrows(&self) -> usize {
        match self {
            Features::Dense(x) => x.nrows(),
            Features::Sparse(x) => x.rows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Features::Dense(x) => x.ncols(),
            Features::Sparse(x) => x.cols(),
        }
    }

    fn dot(&self, w: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Features::Dense(x) => Ok(x.dot(w)),
            Features::Sparse(x) => x.mul_dense(w.view()),
        }
    }

    fn t_dot(&self, g: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Features::Dense(x) => Ok(x.t().dot(&g)),
            Features::Sparse(x) => x.transpose_mul_dense(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    /// Negative-branch weights; one per layer, the classifier's is unused.
    pub weights_dpp: Vec<Array2<f64>>,
    pub lambda: f64,
    pub dropout: f64,
}

impl ModelParams {
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        for (l, (w, wd)) in self.weights.iter().zip(&self.weights_dpp).enumerate() {
            let expect = (self.layer_dims[l], self.layer_dims[l + 1]);
            for m in [w, wd] {
                if m.dim() != expect {
                    return Err(Error::DimensionMismatch {
                        expected: expect.0 * expect.1,
                        actual: m.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

pub fn init_params(layer_dims: &[usize], lambda: f64, dropout: f64, seed: u64) -> Result<ModelParams> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidParameter("need at least input and output dims".into()));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("zero in layer dims {layer_dims:?}")));
    }
    let mut weights = Vec::new();
    let mut weights_dpp = Vec::new();
    for (l, pair) in layer_dims.windows(2).enumerate() {
        let mut rng = seed::stream(seed, "init-w", l as u64);
        weights.push(glorot(pair[0], pair[1], &mut rng));
        let mut rng = seed::stream(seed, "init-w-dpp", l as u64);
        weights_dpp.push(glorot(pair[0], pair[1], &mut rng));
    }
    let params = ModelParams {
        layer_dims: layer_dims.to_vec(),
        weights,
        weights_dpp,
        lambda,
        dropout,
    };
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to every hidden layer (post-dropout for the previous one).
    /// The first layer reads the feature matrix directly and has no entry.
    pub inputs: Vec<Array2<f64>>,
    /// `Â x W` before ReLU, per hidden layer.
    pub pre_pos: Vec<Array2<f64>>,
    /// `Â_neg x W_dpp` before ReLU; `None` when λ = 0.
    pub pre_neg: Vec<Option<Array2<f64>>>,
    /// Scaled keep masks, per hidden layer; `None` outside training.
    pub dropout_masks: Vec<Option<Array2<f64>>>,
    /// Last hidden representation before dropout.
    pub embeddings: Array2<f64>,
    pub logits: Array2<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|x| x.max(0.0))
}

fn check_ops(params: &ModelParams, x: &Features, pos: &LinearOperator, neg: &LinearOperator) -> Result<()> {
    params.validate()?;
    if x.ncols() != params.layer_dims[0] {
        return Err(Error::DimensionMismatch {
            expected: params.layer_dims[0],
            actual: x.ncols(),
        });
    }
    for dim in [pos.dim(), neg.dim()] {
        if dim != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: dim,
            });
        }
    }
    Ok(())
}

/// Runs the network. Dropout masks are drawn from `rng` only when it is
/// given (training mode).
pub fn forward(
    params: &ModelParams,
    x: &Features,
    pos: &LinearOperator,
    neg: &LinearOperator,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<ForwardTrace> {
    check_ops(params, x, pos, neg)?;
    let layers = params.num_layers();
    let use_neg = params.lambda != 0.0;
    let mut trace = ForwardTrace {
        inputs: Vec::new(),
        pre_pos: Vec::new(),
        pre_neg: Vec::new(),
        dropout_masks: Vec::new(),
        embeddings: Array2::zeros((0, 0)),
        logits: Array2::zeros((0, 0)),
    };
    let mut current: Option<Array2<f64>> = None;
    let times = |input: &Option<Array2<f64>>, w: &Array2<f64>| -> Result<Array2<f64>> {
        match input {
            None => x.dot(w),
            Some(h) => Ok(h.dot(w)),
        }
    };
    for l in 0..layers - 1 {
        let p = pos.apply_block(times(&current, &params.weights[l])?.view())?;
        let mut h = relu(&p);
        let pn = if use_neg {
            let pn = neg.apply_block(times(&current, &params.weights_dpp[l])?.view())?;
            h.scaled_add(-params.lambda, &relu(&pn));
            Some(pn)
        } else {
            None
        };
        trace.pre_pos.push(p);
        trace.pre_neg.push(pn);
        if l + 1 == layers - 1 {
            trace.embeddings = h.clone();
        }
        let mask = match rng.as_deref_mut() {
            Some(r) if params.dropout > 0.0 => {
                let keep = 1.0 / (1.0 - params.dropout);
                let m = Array2::from_shape_simple_fn(h.dim(), || {
                    if r.random::<f64>() < params.dropout {
                        0.0
                    } else {
                        keep
                    }
                });
                h *= &m;
                Some(m)
            }
            _ => None,
        };
        trace.dropout_masks.push(mask);
        trace.inputs.push(h.clone());
        current = Some(h);
    }
    trace.logits = pos.apply_block(times(&current, &params.weights[layers - 1])?.view())?;
    if layers == 1 {
        trace.embeddings = trace.logits.clone();
    }
    Ok(trace)
}

fn log_softmax_row(row: ndarray::ArrayView1<'_, f64>) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|&z| z - lse).collect()
}

/// Mean masked negative log-likelihood.
pub fn loss_cross_entropy(logits: &Array2<f64>, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let total: f64 = mask
        .iter()
        .map(|&i| -log_softmax_row(logits.row(i))[labels[i]])
        .sum();
    Ok(total / mask.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub weights_dpp: Vec<Array2<f64>>,
}

/// Exact gradients of [`loss_cross_entropy`] with respect to every weight.
pub fn backward(
    trace: &ForwardTrace,
    params: &ModelParams,
    x: &Features,
    pos: &LinearOperator,
    neg: &LinearOperator,
    labels: &[usize],
    mask: &[usize],
) -> Result<Gradients> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let layers = params.num_layers();
    let mut grads = Gradients {
        weights: params.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
        weights_dpp: params.weights_dpp.iter().map(|w| Array2::zeros(w.dim())).collect(),
    };

    let scale = 1.0 / mask.len() as f64;
    let mut d_logits = Array2::<f64>::zeros(trace.logits.dim());
    for &i in mask {
        let logp = log_softmax_row(trace.logits.row(i));
        let mut row = d_logits.row_mut(i);
        for (c, lp) in logp.iter().enumerate() {
            row[c] = lp.exp() * scale;
        }
        row[labels[i]] -= scale;
    }

    let input_t_dot = |l: usize, g: ArrayView2<'_, f64>| -> Result<Array2<f64>> {
        if l == 0 {
            x.t_dot(g)
        } else {
            Ok(trace.inputs[l - 1].t().dot(&g))
        }
    };

    // classifier layer
    let dh = pos.apply_transpose_block(d_logits.view())?;
    grads.weights[layers - 1] = input_t_dot(layers - 1, dh.view())?;
    if layers == 1 {
        return Ok(grads);
    }
    let mut d_input = dh.dot(&params.weights[layers - 1].t());

    for l in (0..layers - 1).rev() {
        if let Some(m) = &trace.dropout_masks[l] {
            d_input *= m;
        }
        let mut d_pos = d_input.clone();
        Zip::from(&mut d_pos)
            .and(&trace.pre_pos[l])
            .for_each(|g, &p| if p <= 0.0 { *g = 0.0 });
        let dh_pos = pos.apply_transpose_block(d_pos.view())?;
        grads.weights[l] = input_t_dot(l, dh_pos.view())?;

        let dh_neg = match &trace.pre_neg[l] {
            Some(pn) => {
                let mut d_neg = d_input.mapv(|g| -params.lambda * g);
                Zip::from(&mut d_neg)
                    .and(pn)
                    .for_each(|g, &p| if p <= 0.0 { *g = 0.0 });
                let dh = neg.apply_transpose_block(d_neg.view())?;
                grads.weights_dpp[l] = input_t_dot(l, dh.view())?;
                Some(dh)
            }
            None => None,
        };
        if l > 0 {
            d_input = dh_pos.dot(&params.weights[l].t());
            if let Some(dh) = dh_neg {
                d_input += &dh.dot(&params.weights_dpp[l].t());
            }
        }
    }
    Ok(grads)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64) -> AdamState {
        let zeros: Vec<Array2<f64>> = params
            .weights
            .iter()
            .chain(&params.weights_dpp)
            .map(|w| Array2::zeros(w.dim()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if state.m.len() != params.weights.len() + params.weights_dpp.len() {
        return Err(Error::DimensionMismatch {
            expected: params.weights.len() + params.weights_dpp.len(),
            actual: state.m.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    let targets = params.weights.iter_mut().chain(params.weights_dpp.iter_mut());
    let gs = grads.weights.iter().chain(&grads.weights_dpp);
    for (((w, g), m), v) in targets.zip(gs).zip(&mut state.m).zip(&mut state.v) {
        if w.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                actual: g.len(),
            });
        }
        Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    /// Weight layers, including the classifier.
    pub layers: usize,
    pub dropout: f64,
    pub lambda: f64,
    /// L2 penalty added to the gradients of the weights in use.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 0.01,
            hidden: 64,
            layers: 4,
            dropout: 0.5,
            lambda: 0.1,
            weight_decay: 5e-4,
        }
    }
}

impl TrainConfig {
    pub fn layer_dims(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(self.hidden, self.layers.saturating_sub(1)));
        dims.push(classes);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.layers == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter(
                "epochs, layers and hidden must be positive".into(),
            ));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("lr must be > 0 and weight_decay >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub best_epoch: usize,
}

/// Labels and the node masks used for fitting and model selection.
#[derive(Debug, Clone, Copy)]
pub struct Supervision<'a> {
    pub labels: &'a [usize],
    pub train: &'a [usize],
    pub val: &'a [usize],
}

/// Replaces the negative operator before the given epoch.
pub type Resampler<'a> = dyn FnMut(usize) -> Result<LinearOperator> + 'a;

/// Full-batch training; keeps the parameters of the epoch with the best
/// validation accuracy (earliest on ties).
pub fn train(
    x: &Features,
    pos: &LinearOperator,
    neg: &LinearOperator,
    sup: Supervision<'_>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(TrainedModel, History)> {
    train_with_resampling(x, pos, neg, sup, cfg, seed, None)
}

/// As [`train`], optionally swapping in fresh negatives every `every` epochs.
pub fn train_with_resampling(
    x: &Features,
    pos: &LinearOperator,
    neg: &LinearOperator,
    sup: Supervision<'_>,
    cfg: &TrainConfig,
    seed: u64,
    mut resample: Option<(usize, &mut Resampler<'_>)>,
) -> Result<(TrainedModel, History)> {
    cfg.validate()?;
    if sup.train.is_empty() || sup.val.is_empty() {
        return Err(Error::EmptyMask);
    }
    if sup.labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: sup.labels.len(),
        });
    }
    let classes = sup.labels.iter().max().map_or(0, |&c| c + 1);
    let dims = cfg.layer_dims(x.ncols(), classes);
    let mut params = init_params(&dims, cfg.lambda, cfg.dropout, seed)?;
    let mut adam = AdamState::new(&params, cfg.lr);
    let mut rng = seed::stream(seed, "dropout", 0);
    let mut history = History::default();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut neg_owned: Option<LinearOperator> = None;

    for epoch in 0..cfg.epochs {
        if let Some((every, f)) = resample.as_mut() {
            if *every > 0 && epoch > 0 && epoch % *every == 0 {
                neg_owned = Some(f(epoch)?);
            }
        }
        let neg_op = neg_owned.as_ref().unwrap_or(neg);

        let trace = forward(&params, x, pos, neg_op, Some(&mut rng))?;
        let loss = loss_cross_entropy(&trace.logits, sup.labels, sup.train)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let mut grads = backward(&trace, &params, x, pos, neg_op, sup.labels, sup.train)?;
        if cfg.weight_decay > 0.0 {
            let last = params.num_layers() - 1;
            for (g, w) in grads.weights.iter_mut().zip(&params.weights) {
                g.scaled_add(cfg.weight_decay, w);
            }
            if params.lambda != 0.0 {
                for (g, w) in grads.weights_dpp.iter_mut().zip(&params.weights_dpp).take(last) {
                    g.scaled_add(cfg.weight_decay, w);
                }
            }
        }
        adam_step(&mut params, &grads, &mut adam)?;

        let eval = forward(&params, x, pos, neg_op, None)?;
        let preds = argmax_rows(&eval.logits);
        let val_acc = accuracy(&preds, sup.labels, sup.val)?;
        let val_loss = loss_cross_entropy(&eval.logits, sup.labels, sup.val)?;
        history.train_loss.push(loss);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(val_acc);
        if best.as_ref().is_none_or(|(b, _, _)| val_acc > *b) {
            best = Some((val_acc, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    history.best_epoch = best_epoch;
    Ok((TrainedModel { params, best_epoch }, history))
}

/// Row-wise argmax, ties to the smallest column.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (c, &z) in row.iter().enumerate() {
                if z > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub logits: Array2<f64>,
    /// Last hidden-layer representation.
    pub embeddings: Array2<f64>,
}

pub fn predict(
    model: &TrainedModel,
    x: &Features,
    pos: &LinearOperator,
    neg: &LinearOperator,
) -> Result<Prediction> {
    let trace = forward(&model.params, x, pos, neg, None)?;
    Ok(Prediction {
        classes: argmax_rows(&trace.logits),
        logits: trace.logits,
        embeddings: trace.embeddings,
    })
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    layer_dims: Vec<usize>,
    lambda: f64,
    dropout: f64,
    best_epoch: usize,
    /// Row-major weight values per layer.
    weights: Vec<Vec<f64>>,
    weights_dpp: Vec<Vec<f64>>,
}

pub fn checkpoint_to_string(model: &TrainedModel) -> Result<String> {
    let flat = |ws: &[Array2<f64>]| ws.iter().map(|w| w.iter().copied().collect()).collect();
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        layer_dims: model.params.layer_dims.clone(),
        lambda: model.params.lambda,
        dropout: model.params.dropout,
        best_epoch: model.best_epoch,
        weights: flat(&model.params.weights),
        weights_dpp: flat(&model.params.weights_dpp),
    };
    Ok(serde_json::to_string(&ck)?)
}

pub fn checkpoint_from_str(text: &str) -> Result<TrainedModel> {
    let ck: Checkpoint = serde_json::from_str(text)?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(Error::Schema {
            field: "format_version".into(),
            message: format!("expected {CHECKPOINT_VERSION}, found {}", ck.format_version),
        });
    }
    let layers = ck.layer_dims.len().saturating_sub(1);
    let unflat = |field: &'static str, ws: Vec<Vec<f64>>| -> Result<Vec<Array2<f64>>> {
        if ws.len() != layers {
            return Err(Error::Schema {
                field: field.into(),
                message: format!("expected {layers} matrices, found {}", ws.len()),
            });
        }
        ws.into_iter()
            .enumerate()
            .map(|(l, v)| {
                Array2::from_shape_vec((ck.layer_dims[l], ck.layer_dims[l + 1]), v).map_err(|e| {
                    Error::Schema {
                        field: field.into(),
                        message: format!("layer {l}: {e}"),
                    }
                })
            })
            .collect()
    };
    let params = ModelParams {
        weights: unflat("weights", ck.weights)?,
        weights_dpp: unflat("weights_dpp", ck.weights_dpp)?,
        layer_dims: ck.layer_dims,
        lambda: ck.lambda,
        dropout: ck.dropout,
    };
    params.validate()?;
    Ok(TrainedModel {
        params,
        best_epoch: ck.best_epoch,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}
