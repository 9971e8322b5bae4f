//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use qlayers::qsim::{GateKind, GateOp, ParamCircuit};

pub type Dense = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn one_qubit(kind: GateKind, angle: f64) -> [[Complex64; 2]; 2] {
    let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => [[c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(-r, 0.0)]],
        GateKind::RX => [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]],
        GateKind::RY => [[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]],
        GateKind::RZ => [[c(co, -si), c(0.0, 0.0)], [c(0.0, 0.0), c(co, si)]],
        _ => unreachable!("two-qubit kind"),
    }
}

fn bit(i: usize, q: usize) -> usize {
    (i >> q) & 1
}

/// Full `2^n × 2^n` matrix of one gate, built entry by entry.
pub fn dense_gate(n: usize, gate: &GateOp, angle: f64) -> Dense {
    let dim = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    let t = &gate.targets;
    for col in 0..dim {
        match gate.kind {
            GateKind::CX => {
                let row = if bit(col, t[0]) == 1 { col ^ (1 << t[1]) } else { col };
                m[row][col] = c(1.0, 0.0);
            }
            GateKind::RZZ => {
                let z = |q| 1.0 - 2.0 * bit(col, q) as f64;
                let phase = -angle / 2.0 * z(t[0]) * z(t[1]);
                m[col][col] = c(phase.cos(), phase.sin());
            }
            kind => {
                let u = one_qubit(kind, angle);
                for row in 0..dim {
                    if (row ^ col) & !(1 << t[0]) == 0 {
                        m[row][col] = u[bit(row, t[0])][bit(col, t[0])];
                    }
                }
            }
        }
    }
    m
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn unitary(circuit: &ParamCircuit, x: &[f64], theta: &[f64]) -> Dense {
    let dim = 1 << circuit.n_qubits();
    let mut u: Dense = (0..dim)
        .map(|i| (0..dim).map(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    for g in circuit.gates() {
        let a = g.angle.as_ref().map_or(0.0, |e| e.eval(x, theta));
        u = matmul(&dense_gate(circuit.n_qubits(), g, a), &u);
    }
    u
}

/// First column of the circuit unitary.
pub fn oracle_state(circuit: &ParamCircuit, x: &[f64], theta: &[f64]) -> Vec<Complex64> {
    unitary(circuit, x, theta).iter().map(|row| row[0]).collect()
}

pub fn oracle_parity(state: &[Complex64]) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * if k.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
        .sum()
}

/// Largest deviation of `U†U` from the identity.
pub fn unitarity_error(u: &Dense) -> f64 {
    let n = u.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: Complex64 = (0..n).map(|k| u[k][i].conj() * u[k][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - c(want, 0.0)).norm());
        }
    }
    worst
}

/// Textbook silhouette with every distance recomputed on demand.
pub fn brute_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |i: usize, j: usize| -> f64 {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let n = points.len();
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort();
    clusters.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
        let mut b = f64::INFINITY;
        for &cl in &clusters {
            if cl == labels[i] {
                continue;
            }
            let other: Vec<usize> = (0..n).filter(|&j| labels[j] == cl).collect();
            b = b.min(other.iter().map(|&j| dist(i, j)).sum::<f64>() / other.len() as f64);
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

pub fn central_diff(v: &[f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = v.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] -= 2.0 * h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}
