//! Accuracy-series diagnostics: generalization gap, early slope, overfitting
//! drop, epoch-to-epoch fluctuation and the stability ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

/// Per-epoch (train, validation) accuracies, epochs numbered from 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracySeries {
    records: Vec<EpochRecord>,
}

impl AccuracySeries {
    pub fn new(records: Vec<EpochRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.epoch != i + 1 {
                return Err(Error::invalid(format!(
                    "epoch numbers must run 1, 2, …; position {i} holds epoch {}",
                    r.epoch
                )));
            }
            for a in [r.train_accuracy, r.val_accuracy] {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::invalid(format!("accuracy {a} outside [0, 1]")));
                }
            }
        }
        Ok(AccuracySeries { records })
    }

    pub fn from_curves(train: &[f64], val: &[f64]) -> Result<Self> {
        if train.len() != val.len() {
            return Err(Error::invalid("train and validation curves differ in length"));
        }
        AccuracySeries::new(
            train
                .iter()
                .zip(val)
                .enumerate()
                .map(|(i, (&t, &v))| EpochRecord {
                    epoch: i + 1,
                    train_accuracy: t,
                    val_accuracy: v,
                })
                .collect(),
        )
    }

    pub fn push(&mut self, train_accuracy: f64, val_accuracy: f64) -> Result<()> {
        let mut records = std::mem::take(&mut self.records);
        records.push(EpochRecord {
            epoch: records.len() + 1,
            train_accuracy,
            val_accuracy,
        });
        *self = AccuracySeries::new(records)?;
        Ok(())
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn train(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_accuracy).collect()
    }

    pub fn val(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.val_accuracy).collect()
    }

    fn non_empty(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::invalid("accuracy series is empty"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curve {
    Train,
    Val,
}

/// Per-epoch `|A_train − A_val|`.
pub fn gap_curve(series: &AccuracySeries) -> Vec<f64> {
    series
        .records
        .iter()
        .map(|r| (r.train_accuracy - r.val_accuracy).abs())
        .collect()
}

/// (final gap, mean gap)
pub fn generalization_gap(series: &AccuracySeries) -> Result<(f64, f64)> {
    series.non_empty()?;
    let gaps = gap_curve(series);
    let last = *gaps.last().expect("non-empty");
    Ok((last, gaps.iter().sum::<f64>() / gaps.len() as f64))
}

/// `(A_val(k) − A_val(1)) / (k − 1)`
pub fn early_slope(series: &AccuracySeries, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid(format!("early slope needs k ≥ 2, got {k}")));
    }
    if series.len() < k {
        return Err(Error::invalid(format!(
            "early slope over {k} epochs needs at least {k} records, got {}",
            series.len()
        )));
    }
    let v = &series.records;
    Ok((v[k - 1].val_accuracy - v[0].val_accuracy) / (k - 1) as f64)
}

/// Peak validation accuracy minus final validation accuracy.
pub fn overfitting_drop(series: &AccuracySeries) -> Result<f64> {
    series.non_empty()?;
    let val = series.val();
    let peak = val.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(peak - val[val.len() - 1])
}

/// (μ_Δ, σ_Δ) of the absolute epoch-to-epoch changes; both average over the
/// T − 1 differences.
pub fn fluctuation(series: &AccuracySeries, which: Curve) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::invalid("fluctuation needs at least two epochs"));
    }
    let curve = match which {
        Curve::Train => series.train(),
        Curve::Val => series.val(),
    };
    let diffs: Vec<f64> = curve.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let n = diffs.len() as f64;
    let mu = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}

/// `val μ_Δ / train μ_Δ`; `None` when the training curve never moves.
pub fn stability_ratio(series: &AccuracySeries) -> Result<Option<f64>> {
    let (train_mu, _) = fluctuation(series, Curve::Train)?;
    let (val_mu, _) = fluctuation(series, Curve::Val)?;
    Ok(ratio(val_mu, train_mu))
}

pub fn ratio(val_mu: f64, train_mu: f64) -> Option<f64> {
    (train_mu > 0.0).then(|| val_mu / train_mu)
}

/// First epoch whose validation accuracy reaches `threshold`.
pub fn epoch_at_threshold(series: &AccuracySeries, threshold: f64) -> Option<usize> {
    series
        .records
        .iter()
        .find(|r| r.val_accuracy >= threshold)
        .map(|r| r.epoch)
}

/// Every series metric in one flat record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub epochs: usize,
    pub final_train: f64,
    pub final_val: f64,
    pub final_gap: f64,
    pub mean_gap: f64,
    pub early_slope_k: usize,
    pub early_slope: Option<f64>,
    pub overfitting_drop: f64,
    pub threshold: f64,
    pub epoch_at_threshold: Option<usize>,
    pub train_mu_delta: Option<f64>,
    pub train_sigma_delta: Option<f64>,
    pub val_mu_delta: Option<f64>,
    pub val_sigma_delta: Option<f64>,
    pub stability_ratio: Option<f64>,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 15] = [
        "epochs",
        "final_train",
        "final_val",
        "final_gap",
        "mean_gap",
        "early_slope_k",
        "early_slope",
        "overfitting_drop",
        "threshold",
        "epoch_at_threshold",
        "train_mu_delta",
        "train_sigma_delta",
        "val_mu_delta",
        "val_sigma_delta",
        "stability_ratio",
    ];

    /// Metrics that need more epochs than the series has are left absent.
    pub fn compute(series: &AccuracySeries, k: usize, threshold: f64) -> Result<Self> {
        let (final_gap, mean_gap) = generalization_gap(series)?;
        let last = series.records[series.len() - 1];
        let (train_fl, val_fl) = if series.len() >= 2 {
            (
                Some(fluctuation(series, Curve::Train)?),
                Some(fluctuation(series, Curve::Val)?),
            )
        } else {
            (None, None)
        };
        Ok(MetricReport {
            epochs: series.len(),
            final_train: last.train_accuracy,
            final_val: last.val_accuracy,
            final_gap,
            mean_gap,
            early_slope_k: k,
            early_slope: early_slope(series, k).ok(),
            overfitting_drop: overfitting_drop(series)?,
            threshold,
            epoch_at_threshold: epoch_at_threshold(series, threshold),
            train_mu_delta: train_fl.map(|f| f.0),
            train_sigma_delta: train_fl.map(|f| f.1),
            val_mu_delta: val_fl.map(|f| f.0),
            val_sigma_delta: val_fl.map(|f| f.1),
            stability_ratio: train_fl.zip(val_fl).and_then(|(t, v)| ratio(v.0, t.0)),
        })
    }

    /// Values in [`MetricReport::CSV_HEADER`] order; absent values are empty.
    pub fn csv_row(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        vec![
            self.epochs.to_string(),
            self.final_train.to_string(),
            self.final_val.to_string(),
            self.final_gap.to_string(),
            self.mean_gap.to_string(),
            self.early_slope_k.to_string(),
            opt(self.early_slope),
            self.overfitting_drop.to_string(),
            self.threshold.to_string(),
            opt(self.epoch_at_threshold),
            opt(self.train_mu_delta),
            opt(self.train_sigma_delta),
            opt(self.val_mu_delta),
            opt(self.val_sigma_delta),
            opt(self.stability_ratio),
        ]
    }
}
