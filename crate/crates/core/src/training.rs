//! Hybrid CNN → quantum layer → linear head model, loss, Nesterov SGD and
//! the epoch loop with early stopping.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{HeatmapSample, Label, GRID};
use crate::diagnostics::{AccuracySeries, EpochRecord};
use crate::encodings::{build_feature_map, build_two_local, FeatureMapName};
use crate::error::{Error, Result};
use crate::nn::{linear_backward, linear_forward, LayerStack, Linear, Mode, Tensor};
use crate::qnn::QuantumLayer;
use crate::separability::Matrix;

pub const N_CLASSES: usize = 3;

/// Architecture choices for [`HybridModel::build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub feature_map: FeatureMapName,
    pub n_qubits: usize,
    pub depth: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_true")]
    pub bias: bool,
}

fn default_dropout() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn new(feature_map: FeatureMapName, n_qubits: usize, depth: usize) -> Self {
        ModelSpec {
            feature_map,
            n_qubits,
            depth,
            dropout: default_dropout(),
            bias: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HybridModel {
    pub classical: LayerStack,
    pub quantum: QuantumLayer,
    pub head: Linear,
}

/// Everything one sample contributes to a batch step.
#[derive(Clone, Debug)]
pub struct SampleGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub scores: [f64; N_CLASSES],
}

impl HybridModel {
    pub fn new(classical: LayerStack, quantum: QuantumLayer, head: Linear) -> Result<Self> {
        let probe = classical.shape_chain(&[1, GRID, GRID])?;
        let out = &probe.last().expect("chain has an input row").shape;
        if out[..] != [quantum.n_inputs()] {
            return Err(Error::invalid(format!(
                "classical output {out:?} does not match quantum input arity {}",
                quantum.n_inputs()
            )));
        }
        if head.weight.shape() != [N_CLASSES, 1] {
            return Err(Error::invalid(format!(
                "head must map 1 → {N_CLASSES}, got weight shape {:?}",
                head.weight.shape()
            )));
        }
        Ok(HybridModel {
            classical,
            quantum,
            head,
        })
    }

    /// Seeded initialization. θ starts uniform in [−1, 1].
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let fmap = build_feature_map(&spec.feature_map.spec(), spec.n_qubits)?;
        let ansatz = build_two_local(spec.n_qubits, spec.depth)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classical = LayerStack::feature_extractor(&mut rng, spec.n_qubits, spec.dropout, spec.bias);
        let theta = (0..ansatz.n_params())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let quantum = QuantumLayer::with_parity(fmap, ansatz, theta)?;
        let head = Linear::init(&mut rng, 1, N_CLASSES, spec.bias);
        HybridModel::new(classical, quantum, head)
    }

    fn head_len(&self) -> usize {
        self.head.weight.len() + if self.head.use_bias { N_CLASSES } else { 0 }
    }

    /// Classical parameters, then θ, then the head.
    pub fn param_len(&self) -> usize {
        self.classical.param_len() + self.quantum.theta.len() + self.head_len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.classical.params();
        p.extend(&self.quantum.theta);
        p.extend(self.head.weight.data());
        if self.head.use_bias {
            p.extend(&self.head.bias);
        }
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_len() {
            return Err(Error::invalid(format!(
                "model has {} parameters, got {}",
                self.param_len(),
                flat.len()
            )));
        }
        let (c, rest) = flat.split_at(self.classical.param_len());
        let (t, h) = rest.split_at(self.quantum.theta.len());
        self.classical.set_params(c)?;
        self.quantum.theta.copy_from_slice(t);
        let (w, b) = h.split_at(self.head.weight.len());
        self.head.weight.data_mut().copy_from_slice(w);
        if self.head.use_bias {
            self.head.bias.copy_from_slice(b);
        }
        Ok(())
    }

    fn input(sample: &HeatmapSample) -> Result<Tensor> {
        if sample.bins != GRID {
            return Err(Error::invalid(format!(
                "model expects {GRID}×{GRID} heatmaps, got {}×{}",
                sample.bins, sample.bins
            )));
        }
        Tensor::new(vec![1, GRID, GRID], sample.grid.clone())
    }

    fn head_scores(&self, q: f64) -> Result<[f64; N_CLASSES]> {
        let s = linear_forward(&[q], &self.head.weight, &self.head.bias)?;
        Ok([s[0], s[1], s[2]])
    }

    /// Eval-mode class scores.
    pub fn scores(&self, sample: &HeatmapSample) -> Result<[f64; N_CLASSES]> {
        let z = self.classical.infer(&HybridModel::input(sample)?)?;
        let q = self.quantum.forward(z.data())?;
        self.head_scores(q)
    }

    pub fn predict(&self, sample: &HeatmapSample) -> Result<Label> {
        Label::from_index(argmax(&self.scores(sample)?))
    }

    /// Cross-entropy loss and its gradient for one sample, in the
    /// [`HybridModel::params`] layout.
    pub fn sample_grad<R: Rng + ?Sized>(
        &self,
        sample: &HeatmapSample,
        mode: Mode,
        rng: &mut R,
    ) -> Result<SampleGrad> {
        let (z, cache) = self.classical.forward(&HybridModel::input(sample)?, mode, rng)?;
        let qe = self.quantum.forward_with_grads(z.data())?;
        let scores = self.head_scores(qe.value)?;
        let (loss, g_scores) = cross_entropy(sample.label.index(), &scores)?;

        let (dw, db, dq) = linear_backward(&[qe.value], &self.head.weight, &g_scores);
        let dq = dq[0];
        let g_theta = qe.grad_theta.iter().map(|g| dq * g);
        let g_z: Vec<f64> = qe.grad_input.iter().map(|g| dq * g).collect();
        let (g_classical, _) = self
            .classical
            .backward(&cache, &Tensor::new(vec![g_z.len()], g_z)?)?;

        let mut grad = g_classical;
        grad.extend(g_theta);
        grad.extend(dw.data());
        if self.head.use_bias {
            grad.extend(db);
        }
        Ok(SampleGrad { loss, grad, scores })
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = self.classical.named_tensors();
        let t = &self.quantum.theta;
        out.push((
            "quantum.theta".into(),
            Tensor::new(vec![t.len()], t.clone()).expect("finite θ"),
        ));
        out.push(("head.weight".into(), self.head.weight.clone()));
        if self.head.use_bias {
            out.push((
                "head.bias".into(),
                Tensor::new(vec![N_CLASSES], self.head.bias.clone()).expect("finite bias"),
            ));
        }
        out
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Softmax cross-entropy against class `target`. Returns (loss, ŷ − y).
pub fn cross_entropy(target: usize, scores: &[f64]) -> Result<(f64, [f64; N_CLASSES])> {
    if scores.len() != N_CLASSES || target >= N_CLASSES {
        return Err(Error::invalid(format!(
            "cross entropy needs {N_CLASSES} scores and a class below {N_CLASSES}"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite scores {scores:?}")));
    }
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut grad = [0.0; N_CLASSES];
    for c in 0..N_CLASSES {
        grad[c] = exps[c] / total;
    }
    let loss = -grad[target].max(1e-12).ln();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Fill the `wall_ms` log column with measured times. Off by default so
    /// that logs are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-6,
            batch_size: 64,
            max_epochs: 500,
            patience: 100,
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.learning_rate, self.momentum, self.weight_decay]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid(
                "batch size, max epochs and patience must be positive",
            ));
        }
        if self.patience > self.max_epochs {
            return Err(Error::invalid(format!(
                "patience {} exceeds max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// One Nesterov step: `v ← μv − η(∇L(θ + μv) + 2λ(θ + μv))`, `θ ← θ + v`.
/// Leaves both vectors untouched when the gradient is not finite.
pub fn sgd_nesterov_step<F>(
    params: &mut [f64],
    velocities: &mut [f64],
    mut grad_fn: F,
    config: &TrainConfig,
) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if params.len() != velocities.len() {
        return Err(Error::invalid(format!(
            "{} parameters but {} velocities",
            params.len(),
            velocities.len()
        )));
    }
    let mu = config.momentum;
    let ahead: Vec<f64> = params.iter().zip(&*velocities).map(|(p, v)| p + mu * v).collect();
    let grad = grad_fn(&ahead)?;
    if grad.len() != params.len() {
        return Err(Error::invalid(format!(
            "gradient has {} entries for {} parameters",
            grad.len(),
            params.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
    }
    let next_v: Vec<f64> = (0..params.len())
        .map(|i| mu * velocities[i] - config.learning_rate * (grad[i] + 2.0 * config.weight_decay * ahead[i]))
        .collect();
    if let Some(i) = (0..params.len()).position(|i| !(params[i] + next_v[i]).is_finite()) {
        return Err(Error::Numeric(format!("update overflows at parameter {i}")));
    }
    velocities.copy_from_slice(&next_v);
    params.iter_mut().zip(&next_v).for_each(|(p, v)| *p += v);
    Ok(())
}

/// Fraction of argmax-correct predictions with dropout disabled.
pub fn evaluate(model: &HybridModel, dataset: &[HeatmapSample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let hits = dataset
        .par_iter()
        .map(|s| Ok(usize::from(model.predict(s)? == s.label)))
        .collect::<Result<Vec<usize>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / dataset.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub loss: f64,
    pub wall_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub val_accuracy: f64,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub epoch: usize,
    pub batch: usize,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub series: AccuracySeries,
    pub log: Vec<EpochLog>,
    pub best: Checkpoint,
    pub divergence: Option<Divergence>,
}

fn sample_rng(seed: u64, epoch: usize, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | position as u64);
    rng
}

/// Mean batch loss and gradient at `params`.
fn batch_grad(
    model: &HybridModel,
    params: &[f64],
    batch: &[&HeatmapSample],
    seed: u64,
    epoch: usize,
    offset: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut probe = model.clone();
    probe.set_params(params)?;
    let parts = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = sample_rng(seed, epoch, offset + i);
            probe.sample_grad(s, Mode::Train, &mut rng)
        })
        .collect::<Result<Vec<SampleGrad>>>()?;
    let n = parts.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for p in &parts {
        loss += p.loss;
        for (g, v) in grad.iter_mut().zip(&p.grad) {
            *g += v;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Trains in place and leaves `model` at the best checkpoint. A divergence
/// ends training early and is reported in the result.
pub fn train(
    model: &mut HybridModel,
    train_set: &[HeatmapSample],
    val_set: &[HeatmapSample],
    config: &TrainConfig,
) -> Result<TrainResult> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    // shape problems surface here rather than as a divergence
    model.scores(&train_set[0])?;
    model.scores(&val_set[0])?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = model.params();
    let mut velocities = vec![0.0; params.len()];
    let mut series = AccuracySeries::default();
    let mut log = Vec::new();
    let mut best = Checkpoint {
        epoch: 0,
        val_accuracy: f64::NEG_INFINITY,
        params: params.clone(),
    };
    let mut divergence = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    'epochs: for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&HeatmapSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let offset = b * config.batch_size;
            let mut batch_loss = 0.0;
            let step = sgd_nesterov_step(
                &mut params,
                &mut velocities,
                |ahead| {
                    let (l, g) = batch_grad(model, ahead, &batch, config.seed, epoch, offset)?;
                    batch_loss = l;
                    Ok(g)
                },
                config,
            );
            let failure = match step {
                Ok(()) if batch_loss.is_finite() => None,
                Ok(()) => Some(format!("loss {batch_loss}")),
                Err(e) => Some(e.to_string()),
            };
            if let Some(detail) = failure {
                divergence = Some(Divergence {
                    epoch,
                    batch: b,
                    detail,
                });
                break 'epochs;
            }
            loss_sum += batch_loss * batch.len() as f64;
        }
        model.set_params(&params)?;
        let accuracies = evaluate(model, train_set).and_then(|t| Ok((t, evaluate(model, val_set)?)));
        let (train_acc, val_acc) = match accuracies {
            Ok(a) => a,
            Err(e) => {
                divergence = Some(Divergence {
                    epoch,
                    batch: usize::MAX,
                    detail: e.to_string(),
                });
                break;
            }
        };
        series.push(train_acc, val_acc)?;
        log.push(EpochLog {
            epoch,
            train_acc,
            val_acc,
            loss: loss_sum / train_set.len() as f64,
            wall_ms: config
                .record_wall_time
                .then(|| started.elapsed().as_millis() as u64),
        });
        if val_acc > best.val_accuracy {
            best = Checkpoint {
                epoch,
                val_accuracy: val_acc,
                params: params.clone(),
            };
        }
        if epoch - best.epoch >= config.patience {
            break;
        }
    }
    model.set_params(&best.params)?;
    Ok(TrainResult {
        series,
        log,
        best,
        divergence,
    })
}

impl From<&EpochLog> for EpochRecord {
    fn from(l: &EpochLog) -> Self {
        EpochRecord {
            epoch: l.epoch,
            train_accuracy: l.train_acc,
            val_accuracy: l.val_acc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PostClassical,
    PostFeatureMap,
    PostQnn,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::PostClassical, Stage::PostFeatureMap, Stage::PostQnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::PostClassical => "post_classical",
            Stage::PostFeatureMap => "post_feature_map",
            Stage::PostQnn => "post_qnn",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown stage `{s}`; expected post_classical, post_feature_map or post_qnn"
                ))
            })
    }
}

/// Eval-mode representation of every sample at `stage`. The feature-map
/// stage is the real parts of the amplitudes followed by the imaginary parts.
pub fn capture_stage(model: &HybridModel, dataset: &[HeatmapSample], stage: Stage) -> Result<Matrix> {
    let rows = dataset
        .par_iter()
        .map(|s| {
            let z = model.classical.infer(&HybridModel::input(s)?)?.into_data();
            Ok(match stage {
                Stage::PostClassical => z,
                Stage::PostFeatureMap => {
                    let psi = model.quantum.feature_state(&z)?;
                    let amps = psi.amplitudes();
                    amps.iter().map(|a| a.re).chain(amps.iter().map(|a| a.im)).collect()
                }
                Stage::PostQnn => vec![model.quantum.forward(&z)?],
            })
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let cols = match stage {
        Stage::PostClassical => model.quantum.n_inputs(),
        Stage::PostFeatureMap => 2 << model.quantum.n_qubits(),
        Stage::PostQnn => 1,
    };
    Matrix::new(dataset.len(), cols, rows.concat())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Serialized model state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub version: u32,
    pub model: ModelSpec,
    pub epoch: usize,
    pub val_accuracy: f64,
    pub tensors: Vec<NamedTensor>,
}

impl CheckpointFile {
    pub const VERSION: u32 = 1;

    pub fn from_model(model: &HybridModel, spec: &ModelSpec, epoch: usize, val_accuracy: f64) -> Self {
        CheckpointFile {
            version: Self::VERSION,
            model: spec.clone(),
            epoch,
            val_accuracy,
            tensors: model
                .named_tensors()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    data: t.into_data(),
                })
                .collect(),
        }
    }

    /// Rebuilds the model described by the file.
    pub fn restore(&self) -> Result<HybridModel> {
        if self.version != Self::VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let mut model = HybridModel::build(&self.model, 0)?;
        let expected = model.named_tensors();
        if expected.len() != self.tensors.len() {
            return Err(Error::invalid("checkpoint tensor list does not match the model"));
        }
        let mut flat = Vec::with_capacity(model.param_len());
        for ((name, t), stored) in expected.iter().zip(&self.tensors) {
            if *name != stored.name || t.shape() != stored.shape.as_slice() {
                return Err(Error::invalid(format!(
                    "checkpoint tensor `{}` {:?} where `{name}` {:?} was expected",
                    stored.name,
                    stored.shape,
                    t.shape()
                )));
            }
            flat.extend(&stored.data);
        }
        // named tensor order is the flat parameter order
        model.set_params(&flat)?;
        Ok(model)
    }
}
