//! PCA and silhouette scores for captured representations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid(format!(
                "{rows}×{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// k × d, orthonormal rows.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    pub variance_ratios: Vec<f64>,
    /// n × k
    pub projected: Matrix,
    /// Set when the data has no variance at all; ratios are then all zero.
    pub zero_variance: bool,
}

impl PcaResult {
    /// Maps projected coordinates back to centered input space.
    pub fn back_project(&self) -> Matrix {
        let (n, k, d) = (self.projected.rows, self.components.rows, self.components.cols);
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for c in 0..k {
                let p = self.projected.get(i, c);
                for j in 0..d {
                    out[i * d + j] += p * self.components.get(c, j);
                }
            }
        }
        Matrix {
            rows: n,
            cols: d,
            data: out,
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors (as rows) sorted by descending
/// eigenvalue, each vector signed so its largest-magnitude entry is positive.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let d = a.rows;
    if a.cols != d {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    let mut m = a.data.clone();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| (0..d).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[p * d + q].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p * d + p], m[q * d + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = Vec::with_capacity(d * d);
    for &col in &order {
        let mut vec: Vec<f64> = (0..d).map(|r| v[r * d + col]).collect();
        let lead = vec
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.extend(vec);
    }
    Ok((values, Matrix::new(d, d, vectors)?))
}

pub fn pca_fit(data: &Matrix, k: usize) -> Result<PcaResult> {
    let (n, d) = (data.rows, data.cols);
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    if k == 0 || k > d {
        return Err(Error::invalid(format!(
            "component count {k} must be in 1..={d}"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| data.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<f64> = (0..n)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| data.get(i, j) - mean[j])
        .collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let row = &centered[i * d..(i + 1) * d];
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] /= (n - 1) as f64;
            cov[b * d + a] = cov[a * d + b];
        }
    }
    let (values, vectors) = symmetric_eigen(&Matrix::new(d, d, cov)?)?;
    let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let zero_variance = total <= 0.0;
    let variance_ratios = values[..k]
        .iter()
        .map(|v| if zero_variance { 0.0 } else { v / total })
        .collect();
    let components = Matrix::new(k, d, vectors.data[..k * d].to_vec())?;
    let mut projected = vec![0.0; n * k];
    for i in 0..n {
        for c in 0..k {
            projected[i * k + c] = (0..d)
                .map(|j| centered[i * d + j] * components.get(c, j))
                .sum();
        }
    }
    Ok(PcaResult {
        mean,
        components,
        explained_variance: values[..k].to_vec(),
        variance_ratios,
        projected: Matrix::new(n, k, projected)?,
        zero_variance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteResult {
    pub per_point: Vec<f64>,
    pub score: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean silhouette with Euclidean distances. Points alone in their cluster
/// score 0.
pub fn silhouette(points: &Matrix, labels: &[usize]) -> Result<SilhouetteResult> {
    let n = points.rows;
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    if n < 3 {
        return Err(Error::invalid("silhouette needs at least three points"));
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        clusters.entry(l).or_default().push(i);
    }
    if clusters.len() < 2 {
        return Err(Error::invalid("silhouette needs at least two clusters"));
    }
    let per_point: Vec<f64> = (0..n)
        .map(|i| {
            let own = &clusters[&labels[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let mean_to = |members: &[usize]| -> f64 {
                members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| distance(points.row(i), points.row(j)))
                    .sum::<f64>()
            };
            let a = mean_to(own) / (own.len() - 1) as f64;
            let b = clusters
                .iter()
                .filter(|(&l, _)| l != labels[i])
                .map(|(_, m)| mean_to(m) / m.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let score = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteResult { per_point, score })
}
