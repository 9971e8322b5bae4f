//! Dense statevector simulation of small parameterized circuits.
//!
//! Qubit ordering is little-endian: qubit `q` is bit `q` of the basis index,
//! so the amplitude of `|q_{n-1} ... q_1 q_0⟩` lives at `Σ q_k 2^k`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Simulations above this size are refused.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    RX,
    RY,
    RZ,
    RZZ,
    CX,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::RZZ | GateKind::CX => 2,
            _ => 1,
        }
    }

    pub fn is_parametric(self) -> bool {
        !matches!(self, GateKind::H | GateKind::CX)
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "H" => Ok(GateKind::H),
            "RX" => Ok(GateKind::RX),
            "RY" => Ok(GateKind::RY),
            "RZ" => Ok(GateKind::RZ),
            "RZZ" | "ZZ" => Ok(GateKind::RZZ),
            "CX" | "CNOT" => Ok(GateKind::CX),
            other => Err(Error::invalid(format!("unknown gate kind `{other}`"))),
        }
    }
}

/// One factor of a product term in an [`AngleExpr`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Input(usize),
    Param(usize),
    /// `π − x_i`
    PiMinusInput(usize),
}

impl Factor {
    fn value(self, inputs: &[f64], params: &[f64]) -> f64 {
        match self {
            Factor::Input(i) => inputs[i],
            Factor::Param(j) => params[j],
            Factor::PiMinusInput(i) => PI - inputs[i],
        }
    }
}

/// A gate angle `scale · Σ_terms Π_factors value`.
///
/// A term with no factors contributes 1, so constant angles are a single
/// empty term.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleExpr {
    pub scale: f64,
    pub terms: Vec<Vec<Factor>>,
}

impl AngleExpr {
    pub fn constant(value: f64) -> Self {
        AngleExpr {
            scale: value,
            terms: vec![vec![]],
        }
    }

    pub fn input(index: usize, scale: f64) -> Self {
        AngleExpr {
            scale,
            terms: vec![vec![Factor::Input(index)]],
        }
    }

    pub fn param(index: usize) -> Self {
        AngleExpr {
            scale: 1.0,
            terms: vec![vec![Factor::Param(index)]],
        }
    }

    /// `scale · Π_{i ∈ inputs} (π − x_i)`
    pub fn pi_minus_product(inputs: &[usize], scale: f64) -> Self {
        AngleExpr {
            scale,
            terms: vec![inputs.iter().map(|&i| Factor::PiMinusInput(i)).collect()],
        }
    }

    pub fn eval(&self, inputs: &[f64], params: &[f64]) -> f64 {
        self.scale
            * self
                .terms
                .iter()
                .map(|t| t.iter().map(|f| f.value(inputs, params)).product::<f64>())
                .sum::<f64>()
    }

    fn derivative(&self, inputs: &[f64], params: &[f64], wrt: impl Fn(Factor) -> f64) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            // product rule over the factors of this term
            for (k, &f) in term.iter().enumerate() {
                let d = wrt(f);
                if d == 0.0 {
                    continue;
                }
                let rest: f64 = term
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != k)
                    .map(|(_, g)| g.value(inputs, params))
                    .product();
                total += d * rest;
            }
        }
        self.scale * total
    }

    /// ∂angle/∂x_j
    pub fn d_input(&self, j: usize, inputs: &[f64], params: &[f64]) -> f64 {
        self.derivative(inputs, params, |f| match f {
            Factor::Input(i) if i == j => 1.0,
            Factor::PiMinusInput(i) if i == j => -1.0,
            _ => 0.0,
        })
    }

    /// ∂angle/∂θ_j
    pub fn d_param(&self, j: usize, inputs: &[f64], params: &[f64]) -> f64 {
        self.derivative(inputs, params, |f| match f {
            Factor::Param(i) if i == j => 1.0,
            _ => 0.0,
        })
    }

    pub fn references_input(&self, j: usize) -> bool {
        self.factors()
            .any(|f| matches!(f, Factor::Input(i) | Factor::PiMinusInput(i) if i == j))
    }

    pub fn references_param(&self, j: usize) -> bool {
        self.factors().any(|f| f == Factor::Param(j))
    }

    fn factors(&self) -> impl Iterator<Item = Factor> + '_ {
        self.terms.iter().flatten().copied()
    }

    fn check_arity(&self, n_inputs: usize, n_params: usize) -> Result<()> {
        for f in self.factors() {
            match f {
                Factor::Input(i) | Factor::PiMinusInput(i) if i >= n_inputs => {
                    return Err(Error::Index(format!(
                        "angle references input {i} but circuit declares {n_inputs}"
                    )))
                }
                Factor::Param(j) if j >= n_params => {
                    return Err(Error::Index(format!(
                        "angle references param {j} but circuit declares {n_params}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    /// For CX the first target is the control.
    pub targets: Vec<usize>,
    pub angle: Option<AngleExpr>,
}

impl GateOp {
    pub fn h(q: usize) -> Self {
        GateOp {
            kind: GateKind::H,
            targets: vec![q],
            angle: None,
        }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        GateOp {
            kind: GateKind::CX,
            targets: vec![control, target],
            angle: None,
        }
    }

    pub fn rotation(kind: GateKind, q: usize, angle: AngleExpr) -> Self {
        GateOp {
            kind,
            targets: vec![q],
            angle: Some(angle),
        }
    }

    pub fn rzz(a: usize, b: usize, angle: AngleExpr) -> Self {
        GateOp {
            kind: GateKind::RZZ,
            targets: vec![a, b],
            angle: Some(angle),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::invalid(format!(
                "{:?} takes {} target(s), got {}",
                self.kind,
                self.kind.arity(),
                self.targets.len()
            )));
        }
        if let Some(&q) = self.targets.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::Index(format!(
                "qubit {q} out of range for {n_qubits} qubit(s)"
            )));
        }
        if self.targets.len() == 2 && self.targets[0] == self.targets[1] {
            return Err(Error::invalid("two-qubit gate targets must be distinct"));
        }
        if self.kind.is_parametric() != self.angle.is_some() {
            return Err(Error::invalid(format!(
                "{:?} angle presence does not match gate kind",
                self.kind
            )));
        }
        Ok(())
    }
}

/// An ordered gate list over declared input and parameter arities.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    n_qubits: usize,
    n_inputs: usize,
    n_params: usize,
    gates: Vec<GateOp>,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, n_inputs: usize, n_params: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        Ok(ParamCircuit {
            n_qubits,
            n_inputs,
            n_params,
            gates: Vec::new(),
        })
    }

    pub fn push(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if let Some(angle) = &gate.angle {
            angle.check_arity(self.n_inputs, self.n_params)?;
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    /// Gates of `self` followed by gates of `next`; inputs come from `self`,
    /// parameters from `next`. Both halves must be param-free / input-free
    /// respectively.
    pub fn compose(&self, next: &ParamCircuit) -> Result<ParamCircuit> {
        if self.n_qubits != next.n_qubits {
            return Err(Error::invalid("composed circuits must share a qubit count"));
        }
        if self.n_params != 0 || next.n_inputs != 0 {
            return Err(Error::invalid(
                "compose expects an input-only circuit followed by a param-only circuit",
            ));
        }
        let mut out = ParamCircuit::new(self.n_qubits, self.n_inputs, next.n_params)?;
        out.gates = self.gates.iter().chain(&next.gates).cloned().collect();
        Ok(out)
    }

    pub fn check_arity(&self, inputs: &[f64], params: &[f64]) -> Result<()> {
        if inputs.len() != self.n_inputs || params.len() != self.n_params {
            return Err(Error::invalid(format!(
                "circuit expects {} inputs and {} params, got {} and {}",
                self.n_inputs,
                self.n_params,
                inputs.len(),
                params.len()
            )));
        }
        Ok(())
    }
}

/// Square complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        CMatrix { dim, data }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        CMatrix { dim: d, data }
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        let d = self.dim;
        assert_eq!(d, other.dim);
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    data[r * d + c] += a * other.data[k * d + c];
                }
            }
        }
        CMatrix { dim: d, data }
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Exact matrix of a gate kind. Two-qubit matrices are indexed with the
/// first target as the low bit.
pub fn gate_matrix(kind: GateKind, angle: Option<f64>) -> Result<CMatrix> {
    let theta = match (kind.is_parametric(), angle) {
        (true, Some(a)) if a.is_finite() => a,
        (true, Some(a)) => return Err(Error::invalid(format!("non-finite angle {a}"))),
        (true, None) => return Err(Error::invalid(format!("{kind:?} requires an angle"))),
        (false, _) => 0.0,
    };
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let m = |v: Vec<Complex64>| CMatrix {
        dim: if v.len() == 4 { 2 } else { 4 },
        data: v,
    };
    let r = |x: f64| Complex64::new(x, 0.0);
    let i = |x: f64| Complex64::new(0.0, x);
    Ok(match kind {
        GateKind::H => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            m(vec![r(h), r(h), r(h), r(-h)])
        }
        GateKind::RX => m(vec![r(c), i(-s), i(-s), r(c)]),
        GateKind::RY => m(vec![r(c), r(-s), r(s), r(c)]),
        GateKind::RZ => m(vec![
            Complex64::from_polar(1.0, -theta / 2.0),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, theta / 2.0),
        ]),
        GateKind::RZZ => {
            let even = Complex64::from_polar(1.0, -theta / 2.0);
            let odd = Complex64::from_polar(1.0, theta / 2.0);
            let mut out = CMatrix::identity(4);
            for (k, v) in [even, odd, odd, even].into_iter().enumerate() {
                out.data[k * 4 + k] = v;
            }
            out
        }
        GateKind::CX => {
            // control = low bit: |01⟩ (index 1) <-> |11⟩ (index 3)
            let mut out = CMatrix::identity(4);
            out.data[4 + 1] = ZERO;
            out.data[3 * 4 + 3] = ZERO;
            out.data[4 + 3] = ONE;
            out.data[3 * 4 + 1] = ONE;
            out
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes; the vector is normalized on the way in.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("amplitudes must have a finite non-zero norm"));
        }
        Ok(Statevector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn apply_single(&mut self, q: usize, m: &CMatrix) {
        let bit = 1usize << q;
        let (m00, m01, m10, m11) = (m.data[0], m.data[1], m.data[2], m.data[3]);
        for i0 in 0..self.amplitudes.len() {
            if i0 & bit != 0 {
                continue;
            }
            let i1 = i0 | bit;
            let (a, b) = (self.amplitudes[i0], self.amplitudes[i1]);
            self.amplitudes[i0] = m00 * a + m01 * b;
            self.amplitudes[i1] = m10 * a + m11 * b;
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amplitudes.swap(i, i | tb);
            }
        }
    }

    fn apply_rzz(&mut self, a: usize, b: usize, theta: f64) {
        let even = Complex64::from_polar(1.0, -theta / 2.0);
        let odd = Complex64::from_polar(1.0, theta / 2.0);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            let parity = ((i >> a) ^ (i >> b)) & 1;
            *amp *= if parity == 0 { even } else { odd };
        }
    }
}

/// Applies `gate` with its angle already evaluated to `angle_value`
/// (ignored for H and CX).
pub fn apply_gate(state: &mut Statevector, gate: &GateOp, angle_value: f64) -> Result<()> {
    gate.validate(state.n_qubits)?;
    let t = &gate.targets;
    match gate.kind {
        GateKind::CX => state.apply_cx(t[0], t[1]),
        GateKind::RZZ => {
            if !angle_value.is_finite() {
                return Err(Error::invalid(format!("non-finite angle {angle_value}")));
            }
            state.apply_rzz(t[0], t[1], angle_value)
        }
        kind => {
            let m = gate_matrix(kind, kind.is_parametric().then_some(angle_value))?;
            state.apply_single(t[0], &m);
        }
    }
    Ok(())
}

/// Runs `circuit` from `|0…0⟩`.
pub fn run_circuit(circuit: &ParamCircuit, inputs: &[f64], params: &[f64]) -> Result<Statevector> {
    circuit.check_arity(inputs, params)?;
    let mut state = Statevector::zero(circuit.n_qubits)?;
    for gate in &circuit.gates {
        let angle = gate.angle.as_ref().map_or(0.0, |a| a.eval(inputs, params));
        apply_gate(&mut state, gate, angle)?;
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            _ => Err(Error::invalid(format!("`{c}` is not a Pauli label"))),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// `coefficient · P_0 ⊗ … ⊗ P_{n-1}`; character `k` of the label acts on qubit `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliObservable {
    paulis: Vec<Pauli>,
    coefficient: f64,
}

impl PauliObservable {
    pub fn new(label: &str, coefficient: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::invalid("observable coefficient must be finite"));
        }
        let paulis = label
            .chars()
            .map(Pauli::try_from)
            .collect::<Result<Vec<_>>>()?;
        if paulis.is_empty() {
            return Err(Error::invalid("empty Pauli label"));
        }
        Ok(PauliObservable {
            paulis,
            coefficient,
        })
    }

    /// `Z^⊗n` with unit coefficient.
    pub fn parity(n_qubits: usize) -> Self {
        PauliObservable {
            paulis: vec![Pauli::Z; n_qubits],
            coefficient: 1.0,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.paulis.len()
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn paulis(&self) -> &[Pauli] {
        &self.paulis
    }

    pub fn label(&self) -> String {
        self.paulis.iter().map(|p| p.to_string()).collect()
    }
}

/// `coefficient · ⟨ψ|P|ψ⟩`, real part only.
pub fn expectation(state: &Statevector, obs: &PauliObservable) -> Result<f64> {
    if obs.paulis.len() != state.n_qubits {
        return Err(Error::invalid(format!(
            "observable acts on {} qubits, state has {}",
            obs.paulis.len(),
            state.n_qubits
        )));
    }
    let mut flip = 0usize;
    let mut y_mask = 0usize;
    let mut phase_mask = 0usize; // bits contributing (−1)^bit: Z and Y
    for (q, p) in obs.paulis.iter().enumerate() {
        match p {
            Pauli::I => {}
            Pauli::X => flip |= 1 << q,
            Pauli::Y => {
                flip |= 1 << q;
                y_mask |= 1 << q;
                phase_mask |= 1 << q;
            }
            Pauli::Z => phase_mask |= 1 << q,
        }
    }
    // Y|b⟩ = i(−1)^b |b⊕1⟩, so each Y adds a global factor i and a sign.
    let y_phase = match y_mask.count_ones() % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let amps = &state.amplitudes;
    let mut acc = ZERO;
    for (k, &a) in amps.iter().enumerate() {
        if a == ZERO {
            continue;
        }
        let sign = if (k & phase_mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += amps[k ^ flip].conj() * a * sign;
    }
    acc *= y_phase;
    Ok(obs.coefficient * acc.re)
}
