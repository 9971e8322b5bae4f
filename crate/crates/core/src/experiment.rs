//! Experiment configuration, single runs, depth and feature-map studies, and
//! plot-data emission.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{build_heatmap, load_pairs, read_heatmap_cache, split, synth_dataset, HeatmapSample, Label, GRID};
use crate::diagnostics::{gap_curve, AccuracySeries, EpochRecord, MetricReport};
use crate::encodings::FeatureMapName;
use crate::error::{Error, Result};
use crate::separability::{pca_fit, silhouette, Matrix};
use crate::training::{capture_stage, train, CheckpointFile, Divergence, EpochLog, HybridModel, ModelSpec, Stage, TrainConfig};

pub const ENV_PREFIX: &str = "QLAYERS_";

pub const RUN_ARTIFACTS: [&str; 6] = [
    "config.json",
    "epochs.csv",
    "metrics.json",
    "captures.csv",
    "separability.csv",
    "checkpoint.json",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Pairs,
    HeatmapCache,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Input file for `pairs` and `heatmap_cache`.
    pub path: Option<PathBuf>,
    pub n_pairs: usize,
    pub points_per_pair: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Synthetic,
            path: None,
            n_pairs: 600,
            points_per_pair: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub train_ratio: f64,
    pub n_qubits: usize,
    pub feature_map: FeatureMapName,
    pub ansatz_depth: usize,
    pub dropout: f64,
    pub bias: bool,
    pub slope_k: usize,
    pub threshold: f64,
    pub out: PathBuf,
    /// Training hyperparameters and the run seed.
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::default(),
            train_ratio: 0.8,
            n_qubits: 3,
            feature_map: FeatureMapName::PauliXyz1Rep,
            ansatz_depth: 2,
            dropout: 0.5,
            bias: true,
            slope_k: 5,
            threshold: 0.9,
            out: PathBuf::from("runs/default"),
            train: TrainConfig {
                max_epochs: 200,
                ..TrainConfig::default()
            },
        }
    }
}

fn flatten_keys(prefix: &str, v: &Value, out: &mut BTreeMap<String, Vec<String>>, path: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            path.push(k.clone());
            let name = format!("{prefix}{}", k.to_uppercase());
            if child.is_object() {
                flatten_keys(&format!("{name}_"), child, out, path);
            } else {
                out.insert(name, path.clone());
            }
            path.pop();
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&fs::read_to_string(path)?)
    }

    /// Applies `QLAYERS_*` overrides. Nested keys join with `_`, so
    /// `QLAYERS_DATASET_N_PAIRS` sets `dataset.n_pairs`. Values parse as
    /// JSON and fall back to plain strings.
    pub fn apply_env<I, K, V>(&self, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut json = serde_json::to_value(self)?;
        let mut keys = BTreeMap::new();
        flatten_keys(ENV_PREFIX, &json, &mut keys, &mut Vec::new());
        let mut changed = false;
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            if !k.starts_with(ENV_PREFIX) {
                continue;
            }
            let path = keys
                .get(k)
                .ok_or_else(|| Error::invalid(format!("unknown config override `{k}`")))?;
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            let mut slot = &mut json;
            for part in path {
                slot = slot.get_mut(part).expect("path comes from the same document");
            }
            *slot = value;
            changed = true;
        }
        if !changed {
            return Ok(self.clone());
        }
        serde_json::from_value(json).map_err(|e| Error::invalid(format!("bad config override: {e}")))
    }

    pub fn apply_process_env(&self) -> Result<Self> {
        self.apply_env(std::env::vars())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            feature_map: self.feature_map,
            n_qubits: self.n_qubits,
            depth: self.ansatz_depth,
            dropout: self.dropout,
            bias: self.bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.ansatz_depth) {
            return Err(Error::invalid(format!(
                "ansatz depth {} not in 1..=8",
                self.ansatz_depth
            )));
        }
        if !(1..=8).contains(&self.n_qubits) {
            return Err(Error::invalid(format!("n_qubits {} not in 1..=8", self.n_qubits)));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::invalid("train_ratio must be in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must be in [0, 1)"));
        }
        if self.slope_k < 2 {
            return Err(Error::invalid("slope_k must be at least 2"));
        }
        match self.dataset.kind {
            DatasetKind::Synthetic if self.dataset.n_pairs < 3 => {
                return Err(Error::invalid("synthetic dataset needs at least 3 pairs"));
            }
            DatasetKind::Pairs | DatasetKind::HeatmapCache if self.dataset.path.is_none() => {
                return Err(Error::invalid("dataset.path is required for file datasets"));
            }
            _ => {}
        }
        self.train.validate()
    }
}

/// Independent sub-seeds for the data, the split and the model.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<Vec<HeatmapSample>> {
    let d = &config.dataset;
    let pairs = match d.kind {
        DatasetKind::Synthetic => synth_dataset(d.n_pairs, d.points_per_pair, derive_seed(config.train.seed, 1))?,
        DatasetKind::Pairs => load_pairs(d.path.as_deref().expect("validated"))?,
        DatasetKind::HeatmapCache => {
            let f = File::open(d.path.as_deref().expect("validated"))?;
            return read_heatmap_cache(std::io::BufReader::new(f));
        }
    };
    pairs.iter().map(|p| build_heatmap(p, GRID)).collect()
}

/// Training and validation sets for a config.
pub fn prepare_data(config: &ExperimentConfig) -> Result<(Vec<HeatmapSample>, Vec<HeatmapSample>)> {
    let all = load_dataset(config)?;
    split(&all, |s| s.label, config.train_ratio, derive_seed(config.train.seed, 2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(flatten)]
    pub report: Option<MetricReport>,
    pub best_epoch: usize,
    pub best_val: f64,
    pub diverged: Option<Divergence>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub metrics: RunMetrics,
    pub log: Vec<EpochLog>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.metrics.diverged.is_some()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_epoch_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "train_acc", "val_acc", "loss", "wall_ms"])?;
    for l in log {
        w.write_record([
            l.epoch.to_string(),
            l.train_acc.to_string(),
            l.val_acc.to_string(),
            l.loss.to_string(),
            l.wall_ms.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_epoch_log(path: &Path) -> Result<Vec<EpochLog>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k)
                .ok_or_else(|| Error::data(Some(i as u64 + 2), "short epoch log row"))
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| Error::data(Some(i as u64 + 2), "bad number in epoch log"))
        };
        let wall = field(4)?;
        out.push(EpochLog {
            epoch: num(0)? as usize,
            train_acc: num(1)?,
            val_acc: num(2)?,
            loss: num(3)?,
            wall_ms: if wall.is_empty() {
                None
            } else {
                Some(wall.parse().map_err(|_| Error::data(Some(i as u64 + 2), "bad wall_ms"))?)
            },
        });
    }
    Ok(out)
}

pub fn series_from_log(log: &[EpochLog]) -> Result<AccuracySeries> {
    AccuracySeries::new(log.iter().map(EpochRecord::from).collect())
}

/// Separability of one stage under one labelling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: Stage,
    /// `fitted` for predicted labels, `train` for ground truth.
    pub labels: String,
    pub dim: usize,
    pub variance_ratios: Vec<f64>,
    pub zero_variance: bool,
    pub silhouette: Option<f64>,
}

pub const STAGE_HEADER: [&str; 8] = [
    "stage",
    "labels",
    "dim",
    "var_ratio_1",
    "var_ratio_2",
    "var_ratio_3",
    "zero_variance",
    "silhouette",
];

impl StageRow {
    fn record(&self) -> Vec<String> {
        let mut r = vec![self.stage.to_string(), self.labels.clone(), self.dim.to_string()];
        for i in 0..3 {
            r.push(self.variance_ratios.get(i).map(|v| v.to_string()).unwrap_or_default());
        }
        r.push(self.zero_variance.to_string());
        r.push(self.silhouette.map(|v| v.to_string()).unwrap_or_default());
        r
    }
}

/// PCA (up to 3 reported ratios) and silhouettes on the first
/// `min(d, 2)` components under fitted and true labels.
pub fn stage_separability(stage: Stage, data: &Matrix, fitted: &[usize], truth: &[usize]) -> Result<Vec<StageRow>> {
    let d = data.cols;
    let report = pca_fit(data, d.min(3))?;
    let sil_pca = pca_fit(data, d.min(2))?;
    let mut rows = Vec::new();
    for (name, labels) in [("fitted", fitted), ("train", truth)] {
        let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        let sil = if distinct >= 2 && data.rows >= 3 {
            Some(silhouette(&sil_pca.projected, labels)?.score)
        } else {
            None
        };
        rows.push(StageRow {
            stage,
            labels: name.to_string(),
            dim: d,
            variance_ratios: report.variance_ratios.clone(),
            zero_variance: report.zero_variance,
            silhouette: sil,
        });
    }
    Ok(rows)
}

pub fn read_stage_rows(path: &Path) -> Result<Vec<StageRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = Some(i as u64 + 2);
        let bad = || Error::data(line, "malformed separability row");
        let get = |k: usize| rec.get(k).ok_or_else(bad);
        let opt = |k: usize| -> Result<Option<f64>> {
            let s = get(k)?;
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        let mut ratios = Vec::new();
        for k in 3..6 {
            if let Some(v) = opt(k)? {
                ratios.push(v);
            }
        }
        out.push(StageRow {
            stage: get(0)?.parse()?,
            labels: get(1)?.to_string(),
            dim: get(2)?.parse().map_err(|_| bad())?,
            variance_ratios: ratios,
            zero_variance: get(6)? == "true",
            silhouette: opt(7)?,
        });
    }
    Ok(out)
}

/// Raw capture rows: stage, sample id, true and fitted class index, values.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptureRow {
    pub stage: Stage,
    pub sample: usize,
    pub truth: usize,
    pub fitted: usize,
    pub values: Vec<f64>,
}

pub fn read_captures(path: &Path) -> Result<Vec<CaptureRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || Error::data(Some(i as u64 + 2), "malformed capture row");
        let get = |k: usize| rec.get(k).ok_or_else(bad);
        let values = rec
            .iter()
            .skip(4)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?;
        out.push(CaptureRow {
            stage: get(0)?.parse()?,
            sample: get(1)?.parse().map_err(|_| bad())?,
            truth: get(2)?.parse().map_err(|_| bad())?,
            fitted: get(3)?.parse().map_err(|_| bad())?,
            values,
        });
    }
    Ok(out)
}

/// Trains one configuration and writes the six run artifacts into
/// `config.out`. A divergence still produces all artifacts.
pub fn run_single(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let dir = config.out.clone();
    create_dir(&dir)?;
    write_json(&dir.join("config.json"), config)?;

    let (train_set, val_set) = prepare_data(config)?;
    let spec = config.model_spec();
    let mut model = HybridModel::build(&spec, derive_seed(config.train.seed, 3))?;
    let result = train(&mut model, &train_set, &val_set, &config.train)?;

    write_epoch_log(&dir.join("epochs.csv"), &result.log)?;
    let report = if result.series.is_empty() {
        None
    } else {
        Some(MetricReport::compute(&result.series, config.slope_k, config.threshold)?)
    };
    let metrics = RunMetrics {
        report,
        best_epoch: result.best.epoch,
        best_val: if result.best.epoch == 0 { 0.0 } else { result.best.val_accuracy },
        diverged: result.divergence.clone(),
    };
    write_json(&dir.join("metrics.json"), &metrics)?;

    let truth: Vec<usize> = train_set.iter().map(|s| s.label.index()).collect();
    let fitted = train_set
        .iter()
        .map(|s| Ok(model.predict(s)?.index()))
        .collect::<Result<Vec<usize>>>()?;
    let width = 2 << config.n_qubits;
    let mut cap = csv_writer(&dir.join("captures.csv"))?;
    let mut header = vec!["stage".to_string(), "sample".into(), "true".into(), "fitted".into()];
    header.extend((0..width).map(|i| format!("v{i}")));
    cap.write_record(&header)?;
    let mut sep = csv_writer(&dir.join("separability.csv"))?;
    sep.write_record(STAGE_HEADER)?;
    for stage in Stage::ALL {
        let m = capture_stage(&model, &train_set, stage)?;
        for i in 0..m.rows {
            let mut rec = vec![stage.to_string(), i.to_string(), truth[i].to_string(), fitted[i].to_string()];
            rec.extend(m.row(i).iter().map(|v| v.to_string()));
            rec.resize(4 + width, String::new());
            cap.write_record(&rec)?;
        }
        for row in stage_separability(stage, &m, &fitted, &truth)? {
            sep.write_record(row.record())?;
        }
    }
    cap.flush()?;
    sep.flush()?;

    let ckpt = CheckpointFile::from_model(&model, &spec, result.best.epoch, metrics.best_val);
    write_json(&dir.join("checkpoint.json"), &ckpt)?;
    Ok(RunOutcome {
        dir,
        metrics,
        log: result.log,
    })
}

fn run_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))
}

/// Status of one study member.
#[derive(Clone, Debug)]
pub struct StudyRun {
    pub key: String,
    pub dir: PathBuf,
    pub result: std::result::Result<RunMetrics, String>,
}

fn read_metrics(dir: &Path) -> Result<RunMetrics> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("metrics.json"))?)?)
}

fn run_many(configs: Vec<(String, ExperimentConfig)>, workers: usize) -> Result<Vec<StudyRun>> {
    let pool = run_pool(workers.max(1))?;
    Ok(pool.install(|| {
        configs
            .into_par_iter()
            .map(|(key, cfg)| {
                // the summary reads metrics back from disk so it is a pure join
                let result = run_single(&cfg)
                    .and_then(|_| read_metrics(&cfg.out))
                    .map_err(|e| e.to_string());
                StudyRun {
                    key,
                    dir: cfg.out,
                    result,
                }
            })
            .collect()
    }))
}

fn summary_header(first: &str) -> Vec<String> {
    let mut h = vec![first.to_string(), "status".into()];
    h.extend(MetricReport::CSV_HEADER.iter().map(|s| s.to_string()));
    h
}

fn summary_record(key: &str, run: &StudyRun) -> Vec<String> {
    let mut r = vec![key.to_string()];
    let n = MetricReport::CSV_HEADER.len();
    match &run.result {
        Ok(m) => {
            r.push(if m.diverged.is_some() { "diverged".into() } else { "ok".into() });
            match &m.report {
                Some(rep) => r.extend(rep.csv_row()),
                None => r.extend(std::iter::repeat_n(String::new(), n)),
            }
        }
        Err(e) => {
            r.push(format!("error: {e}"));
            r.extend(std::iter::repeat_n(String::new(), n));
        }
    }
    r
}

/// One run per depth under `base.out/depth_<d>`, summarized in
/// `depth_summary.csv`.
pub fn run_depth_study(base: &ExperimentConfig, depths: &[usize], workers: usize) -> Result<Vec<StudyRun>> {
    if depths.len() < 2 {
        return Err(Error::invalid("a depth study needs at least two depths"));
    }
    let configs = depths
        .iter()
        .map(|&d| {
            let mut c = base.clone();
            c.ansatz_depth = d;
            c.out = base.out.join(format!("depth_{d}"));
            c.validate()?;
            Ok((d.to_string(), c))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&base.out)?;
    let runs = run_many(configs, workers)?;
    let mut w = csv_writer(&base.out.join("depth_summary.csv"))?;
    w.write_record(summary_header("depth"))?;
    for run in &runs {
        w.write_record(summary_record(&run.key, run))?;
    }
    w.flush()?;
    Ok(runs)
}

/// One run per feature map under `base.out/<name>`. Writes
/// `fmap_accuracy.csv` and one `fmap_<stage>.csv` per capture stage. All
/// names are checked before anything runs.
pub fn run_feature_map_study(base: &ExperimentConfig, names: &[String], workers: usize) -> Result<Vec<StudyRun>> {
    if names.is_empty() {
        return Err(Error::invalid("a feature-map study needs at least one map"));
    }
    let maps = names
        .iter()
        .map(|n| n.parse::<FeatureMapName>())
        .collect::<Result<Vec<_>>>()?;
    let configs = maps
        .iter()
        .map(|&m| {
            let mut c = base.clone();
            c.feature_map = m;
            c.out = base.out.join(m.as_str());
            c.validate()?;
            Ok((m.as_str().to_string(), c))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(&base.out)?;
    let runs = run_many(configs, workers)?;

    let mut acc = csv_writer(&base.out.join("fmap_accuracy.csv"))?;
    let mut header = summary_header("feature_map");
    header.insert(1, "title".into());
    acc.write_record(&header)?;
    for (run, m) in runs.iter().zip(&maps) {
        let mut rec = summary_record(&run.key, run);
        rec.insert(1, m.title().to_string());
        acc.write_record(&rec)?;
    }
    acc.flush()?;

    for stage in Stage::ALL {
        let mut w = csv_writer(&base.out.join(format!("fmap_{stage}.csv")))?;
        let mut h = vec!["feature_map"];
        h.extend(STAGE_HEADER.iter().skip(1));
        w.write_record(&h)?;
        for run in runs.iter().filter(|r| r.result.is_ok()) {
            for row in read_stage_rows(&run.dir.join("separability.csv"))? {
                if row.stage == stage {
                    let mut rec = row.record();
                    rec[0] = run.key.clone();
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
    }
    Ok(runs)
}

/// Writes `plots/accuracy.csv`, `plots/gap.csv` and one `plots/pca_<stage>.csv`
/// scatter per stage inside a finished run directory.
pub fn emit_plot_data(run_dir: &Path) -> Result<PathBuf> {
    let log = read_epoch_log(&run_dir.join("epochs.csv"))?;
    let captures = read_captures(&run_dir.join("captures.csv"))?;
    let plots = run_dir.join("plots");
    create_dir(&plots)?;

    let mut w = csv_writer(&plots.join("accuracy.csv"))?;
    w.write_record(["epoch", "train_acc", "val_acc"])?;
    for l in &log {
        w.write_record([l.epoch.to_string(), l.train_acc.to_string(), l.val_acc.to_string()])?;
    }
    w.flush()?;

    let series = series_from_log(&log)?;
    let mut w = csv_writer(&plots.join("gap.csv"))?;
    w.write_record(["epoch", "gap"])?;
    for (l, g) in log.iter().zip(gap_curve(&series)) {
        w.write_record([l.epoch.to_string(), g.to_string()])?;
    }
    w.flush()?;

    for stage in Stage::ALL {
        let rows: Vec<&CaptureRow> = captures.iter().filter(|c| c.stage == stage).collect();
        if rows.is_empty() {
            return Err(Error::data(None, format!("no captures for stage {stage}")));
        }
        let dim = rows[0].values.len();
        let m = Matrix::new(rows.len(), dim, rows.iter().flat_map(|r| r.values.clone()).collect())?;
        let k = dim.min(2);
        let p = pca_fit(&m, k)?;
        let mut w = csv_writer(&plots.join(format!("pca_{stage}.csv")))?;
        w.write_record(["pc1", "pc2", "fitted", "true"])?;
        for (i, r) in rows.iter().enumerate() {
            let pc2 = if k > 1 { p.projected.get(i, 1).to_string() } else { String::new() };
            w.write_record([
                p.projected.get(i, 0).to_string(),
                pc2,
                Label::from_index(r.fitted)?.to_string(),
                Label::from_index(r.truth)?.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(plots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let c = ExperimentConfig::default();
        assert_eq!(c.dataset.n_pairs, 600);
        assert_eq!(c.n_qubits, 3);
        assert_eq!(c.train.max_epochs, 200);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn json_round_trip_is_flat() {
        let c = ExperimentConfig::default();
        let v = serde_json::to_value(&c).unwrap();
        assert!(v.get("learning_rate").is_some());
        assert!(v.get("seed").is_some());
        assert_eq!(ExperimentConfig::from_json(&v.to_string()).unwrap(), c);
        let partial = ExperimentConfig::from_json(r#"{"seed": 9, "feature_map": "z_reps_2"}"#).unwrap();
        assert_eq!(partial.train.seed, 9);
        assert_eq!(partial.feature_map, FeatureMapName::ZReps2);
        assert!(ExperimentConfig::from_json(r#"{"feature_map": "z_reps_9"}"#).is_err());
    }

    #[test]
    fn env_overrides() {
        let c = ExperimentConfig::default()
            .apply_env([
                ("QLAYERS_SEED", "17"),
                ("QLAYERS_DATASET_N_PAIRS", "90"),
                ("QLAYERS_FEATURE_MAP", "zz_reps_3_full"),
                ("QLAYERS_OUT", "/tmp/x"),
                ("PATH", "/bin"),
            ])
            .unwrap();
        assert_eq!(c.train.seed, 17);
        assert_eq!(c.dataset.n_pairs, 90);
        assert_eq!(c.feature_map, FeatureMapName::ZzReps3Full);
        assert_eq!(c.out, PathBuf::from("/tmp/x"));
        assert!(ExperimentConfig::default().apply_env([("QLAYERS_NOPE", "1")]).is_err());
        assert!(ExperimentConfig::default().apply_env([("QLAYERS_N_QUBITS", "many")]).is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.ansatz_depth = 9;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.dataset.kind = DatasetKind::Pairs;
        assert!(c.validate().is_err());
    }

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(derive_seed(0, 1), derive_seed(0, 2));
        assert_ne!(derive_seed(0, 1), derive_seed(1, 1));
    }
}
