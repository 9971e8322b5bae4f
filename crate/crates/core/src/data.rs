//! Bivariate pair samples, heatmap construction, file formats and the
//! synthetic cause-effect generator.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID: usize = 8;

/// Causal direction class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// X → Y
    Positive,
    /// Y → X
    Negative,
    None,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Positive, Label::Negative, Label::None];

    pub fn index(self) -> usize {
        match self {
            Label::Positive => 0,
            Label::Negative => 1,
            Label::None => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Label::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class index {i} out of range")))
    }

    /// Code used in pair tables: 1, −1, 0.
    pub fn code(self) -> i32 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
            Label::None => 0,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            0 => Some(Label::None),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::None => "none",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            "none" => Ok(Label::None),
            other => Err(Error::invalid(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub label: Label,
}

/// Normalized joint histogram; `grid[i * bins + j]` counts x-bin `i`, y-bin `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapSample {
    pub bins: usize,
    pub grid: Vec<f64>,
    pub label: Label,
}

impl HeatmapSample {
    pub fn transpose(&self) -> HeatmapSample {
        let b = self.bins;
        let mut grid = vec![0.0; b * b];
        for i in 0..b {
            for j in 0..b {
                grid[j * b + i] = self.grid[i * b + j];
            }
        }
        HeatmapSample {
            bins: b,
            grid,
            label: self.label,
        }
    }
}

fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width <= 0.0 {
                0
            } else {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Raw joint counts over equal-width bins spanning each axis' range.
pub fn histogram_counts(p: &PairSample, bins: usize) -> Result<Vec<u64>> {
    if p.x.is_empty() || p.y.is_empty() {
        return Err(Error::invalid("pair sample has no points"));
    }
    if p.x.len() != p.y.len() {
        return Err(Error::invalid(format!(
            "x has {} points but y has {}",
            p.x.len(),
            p.y.len()
        )));
    }
    if bins == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    if p.x.iter().chain(&p.y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("pair sample contains non-finite values"));
    }
    let (bx, by) = (bin_indices(&p.x, bins), bin_indices(&p.y, bins));
    let mut counts = vec![0u64; bins * bins];
    for (i, j) in bx.into_iter().zip(by) {
        counts[i * bins + j] += 1;
    }
    Ok(counts)
}

pub fn build_heatmap(p: &PairSample, bins: usize) -> Result<HeatmapSample> {
    let counts = histogram_counts(p, bins)?;
    let max = *counts.iter().max().expect("non-empty grid") as f64;
    Ok(HeatmapSample {
        bins,
        grid: counts.iter().map(|&c| c as f64 / max).collect(),
        label: p.label,
    })
}

fn parse_series(field: &str, line: Option<u64>, what: &str) -> Result<Vec<f64>> {
    field
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::data(line, format!("bad {what} value `{tok}`")))
        })
        .collect()
}

/// Reads a pair table: header `id,x,y,label`, series as space-separated
/// numbers, label coded 1 / −1 / 0.
pub fn load_pairs(path: &Path) -> Result<Vec<PairSample>> {
    read_pairs(File::open(path)?)
}

pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<PairSample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data(Some(1), e.to_string()))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::data(Some(1), format!("missing `{name}` column")))
    };
    let (ci, cx, cy, cl) = (col("id")?, col("x")?, col("y")?, col("label")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::data(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line());
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| Error::data(line, "record has too few fields"))
        };
        let x = parse_series(field(cx)?, line, "x")?;
        let y = parse_series(field(cy)?, line, "y")?;
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::data(
                line,
                format!("series lengths {} and {} must match and be ≥ 2", x.len(), y.len()),
            ));
        }
        let code: i32 = field(cl)?
            .trim()
            .parse()
            .map_err(|_| Error::data(line, format!("bad label `{}`", field(cl).unwrap_or(""))))?;
        let label = Label::from_code(code)
            .ok_or_else(|| Error::data(line, format!("label {code} is not one of 1, -1, 0")))?;
        out.push(PairSample {
            id: field(ci)?.to_string(),
            x,
            y,
            label,
        });
    }
    Ok(out)
}

fn join_series(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_pairs<W: Write>(writer: W, pairs: &[PairSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "x", "y", "label"])?;
    for p in pairs {
        w.write_record([
            p.id.clone(),
            join_series(&p.x),
            join_series(&p.y),
            p.label.code().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_pairs(path: &Path, pairs: &[PairSample]) -> Result<()> {
    write_pairs(BufWriter::new(File::create(path)?), pairs)
}

const CACHE_MAGIC: &[u8; 8] = b"QLHEATMP";
const CACHE_VERSION: u8 = 1;

/// Binary heatmap cache: magic, version byte, u64 LE count, then per record
/// 64 f64 LE values (row-major) and a label byte (class index).
pub fn write_heatmap_cache<W: Write>(mut w: W, maps: &[HeatmapSample]) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&[CACHE_VERSION])?;
    w.write_all(&(maps.len() as u64).to_le_bytes())?;
    for m in maps {
        if m.bins != GRID {
            return Err(Error::invalid(format!(
                "cache stores {GRID}×{GRID} grids, got {}×{}",
                m.bins, m.bins
            )));
        }
        for v in &m.grid {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[m.label.index() as u8])?;
    }
    Ok(())
}

pub fn read_heatmap_cache<R: Read>(r: R) -> Result<Vec<HeatmapSample>> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::data(None, "not a heatmap cache file"));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    if byte[0] != CACHE_VERSION {
        return Err(Error::data(None, format!("unsupported cache version {}", byte[0])));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word);
    let mut out = Vec::new();
    for _ in 0..count {
        let mut grid = Vec::with_capacity(GRID * GRID);
        for _ in 0..GRID * GRID {
            r.read_exact(&mut word)?;
            grid.push(f64::from_le_bytes(word));
        }
        r.read_exact(&mut byte)?;
        out.push(HeatmapSample {
            bins: GRID,
            grid,
            label: Label::from_index(byte[0] as usize)
                .map_err(|_| Error::data(None, format!("bad label byte {}", byte[0])))?,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
enum Mechanism {
    Quadratic { a: f64, c: f64 },
    Sine { freq: f64, phase: f64 },
    Tent { c: f64, slope: f64 },
}

impl Mechanism {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        match rng.random_range(0..3) {
            0 => Mechanism::Quadratic {
                a: sign * rng.random_range(0.8..1.5),
                c: rng.random_range(-0.3..0.3),
            },
            1 => Mechanism::Sine {
                freq: rng.random_range(2.5..5.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            },
            _ => Mechanism::Tent {
                c: rng.random_range(-0.4..0.4),
                slope: sign * rng.random_range(1.0..2.0),
            },
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Mechanism::Quadratic { a, c } => a * (x - c).powi(2),
            Mechanism::Sine { freq, phase } => (freq * x + phase).sin(),
            Mechanism::Tent { c, slope } => -slope * (x - c).abs(),
        }
    }
}

/// One synthetic pair with `n_samples` points. Positive pairs are
/// `Y = f(X) + ε`; negative pairs are the same draw with the axes swapped;
/// unlabeled pairs draw the effect from an independent cause.
pub fn synth_generate(n_samples: usize, label: Label, seed: u64) -> Result<PairSample> {
    if n_samples < 32 {
        return Err(Error::invalid(format!(
            "synthetic pairs need at least 32 points, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mech = Mechanism::draw(&mut rng);
    let noise_sd = rng.random_range(0.05..0.15);
    let noise = Normal::new(0.0, noise_sd).expect("valid sd");
    let cause: Vec<f64> = (0..n_samples).map(|_| rng.random_range(-1.0..1.0)).collect();
    let driver: Vec<f64> = match label {
        Label::None => (0..n_samples).map(|_| rng.random_range(-1.0..1.0)).collect(),
        _ => cause.clone(),
    };
    let effect: Vec<f64> = driver
        .iter()
        .map(|&d| mech.apply(d) + noise.sample(&mut rng))
        .collect();
    let (x, y) = match label {
        Label::Negative => (effect, cause),
        _ => (cause, effect),
    };
    Ok(PairSample {
        id: format!("synth-{seed}"),
        x,
        y,
        label,
    })
}

/// Balanced synthetic dataset; sample `i` has class `i mod 3`.
pub fn synth_dataset(n_pairs: usize, points_per_pair: usize, seed: u64) -> Result<Vec<PairSample>> {
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    (0..n_pairs)
        .map(|i| {
            let s = root.random::<u64>();
            let mut p = synth_generate(points_per_pair, Label::ALL[i % 3], s)?;
            p.id = format!("pair{i}");
            Ok(p)
        })
        .collect()
}

/// Label-stratified, seed-deterministic split. Returns (train, validation)
/// in original order.
pub fn split<T: Clone>(
    items: &[T],
    label_of: impl Fn(&T) -> Label,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; items.len()];
    for class in Label::ALL {
        let mut idx: Vec<usize> = (0..items.len())
            .filter(|&i| label_of(&items[i]) == class)
            .collect();
        if idx.is_empty() {
            return Err(Error::data(None, format!("no samples of class `{class}`")));
        }
        idx.shuffle(&mut rng);
        let n_train = (ratio * idx.len() as f64).round() as usize;
        for &i in &idx[..n_train] {
            in_train[i] = true;
        }
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (item, t) in items.iter().zip(in_train) {
        if t {
            train.push(item.clone());
        } else {
            val.push(item.clone());
        }
    }
    Ok((train, val))
}
