//! Feature-map circuits and the TwoLocal ansatz.
//!
//! Data rotations carry a factor 2 and multi-qubit terms use the product
//! map `φ_S(x) = Π_{i∈S} (π − x_i)`. Every feature-map repetition opens
//! with a Hadamard layer.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{AngleExpr, GateKind, GateOp, ParamCircuit, Pauli};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Z,
    ZZ,
    Pauli,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entanglement {
    Linear,
    Full,
    None,
}

impl FromStr for Entanglement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Entanglement::Linear),
            "full" => Ok(Entanglement::Full),
            "none" => Ok(Entanglement::None),
            other => Err(Error::invalid(format!("unknown entanglement `{other}`"))),
        }
    }
}

impl Entanglement {
    /// Qubit groups of size `k` on `n` qubits.
    fn groups(self, n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 || k > n {
            return Vec::new();
        }
        if k == 1 {
            return (0..n).map(|q| vec![q]).collect();
        }
        match self {
            Entanglement::None => Vec::new(),
            Entanglement::Linear => (0..=n - k).map(|s| (s..s + k).collect()).collect(),
            Entanglement::Full => combinations(n, k),
        }
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub family: Family,
    pub reps: usize,
    pub entanglement: Entanglement,
    /// Only read for the Pauli family.
    #[serde(default)]
    pub pauli_strings: Vec<String>,
}

impl FeatureMapSpec {
    pub fn z(reps: usize) -> Self {
        FeatureMapSpec {
            family: Family::Z,
            reps,
            entanglement: Entanglement::None,
            pauli_strings: Vec::new(),
        }
    }

    pub fn zz(reps: usize, entanglement: Entanglement) -> Self {
        FeatureMapSpec {
            family: Family::ZZ,
            reps,
            entanglement,
            pauli_strings: Vec::new(),
        }
    }

    pub fn pauli(strings: &[&str], reps: usize, entanglement: Entanglement) -> Self {
        FeatureMapSpec {
            family: Family::Pauli,
            reps,
            entanglement,
            pauli_strings: strings.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// The nine named feature maps, in a stable order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMapName {
    #[serde(rename = "zz_reps_2_linear")]
    ZzReps2Linear,
    #[serde(rename = "z_reps_2")]
    ZReps2,
    #[serde(rename = "pauli_z_yy_zxz_linear")]
    PauliZYyZxzLinear,
    #[serde(rename = "pauli_xyz_1_rep")]
    PauliXyz1Rep,
    #[serde(rename = "zz_reps_3_full")]
    ZzReps3Full,
    #[serde(rename = "zz_reps_1_linear")]
    ZzReps1Linear,
    #[serde(rename = "pauli_z_yy_zxz_rep_2")]
    PauliZYyZxzRep2,
    #[serde(rename = "z_reps_1")]
    ZReps1,
    #[serde(rename = "z_reps_3")]
    ZReps3,
}

impl FeatureMapName {
    pub const ALL: [FeatureMapName; 9] = [
        FeatureMapName::ZzReps2Linear,
        FeatureMapName::ZReps2,
        FeatureMapName::PauliZYyZxzLinear,
        FeatureMapName::PauliXyz1Rep,
        FeatureMapName::ZzReps3Full,
        FeatureMapName::ZzReps1Linear,
        FeatureMapName::PauliZYyZxzRep2,
        FeatureMapName::ZReps1,
        FeatureMapName::ZReps3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMapName::ZzReps2Linear => "zz_reps_2_linear",
            FeatureMapName::ZReps2 => "z_reps_2",
            FeatureMapName::PauliZYyZxzLinear => "pauli_z_yy_zxz_linear",
            FeatureMapName::PauliXyz1Rep => "pauli_xyz_1_rep",
            FeatureMapName::ZzReps3Full => "zz_reps_3_full",
            FeatureMapName::ZzReps1Linear => "zz_reps_1_linear",
            FeatureMapName::PauliZYyZxzRep2 => "pauli_z_yy_zxz_rep_2",
            FeatureMapName::ZReps1 => "z_reps_1",
            FeatureMapName::ZReps3 => "z_reps_3",
        }
    }

    /// Human-readable label used in the separability tables.
    pub fn title(self) -> &'static str {
        match self {
            FeatureMapName::ZzReps2Linear => "ZZ Feature Map Reps 2 Linear",
            FeatureMapName::ZReps2 => "Z Feature Map Reps 2",
            FeatureMapName::PauliZYyZxzLinear => "Pauli Z YY ZXZ Linear",
            FeatureMapName::PauliXyz1Rep => "Pauli XYZ 1 Rep",
            FeatureMapName::ZzReps3Full => "ZZ Feature Map Reps 3 Full",
            FeatureMapName::ZzReps1Linear => "ZZ Feature Map Reps 1 No Entanglement",
            FeatureMapName::PauliZYyZxzRep2 => "Pauli Z YY ZXZ Rep 2",
            FeatureMapName::ZReps1 => "Z Feature Map Reps 1",
            FeatureMapName::ZReps3 => "Z Feature Map Reps 3",
        }
    }

    pub fn spec(self) -> FeatureMapSpec {
        use Entanglement::*;
        match self {
            FeatureMapName::ZReps1 => FeatureMapSpec::z(1),
            FeatureMapName::ZReps2 => FeatureMapSpec::z(2),
            FeatureMapName::ZReps3 => FeatureMapSpec::z(3),
            // tabulated both as "linear" and "no entanglement"; unentangled by default
            FeatureMapName::ZzReps1Linear => FeatureMapSpec::zz(1, None),
            FeatureMapName::ZzReps2Linear => FeatureMapSpec::zz(2, Linear),
            FeatureMapName::ZzReps3Full => FeatureMapSpec::zz(3, Full),
            FeatureMapName::PauliXyz1Rep => FeatureMapSpec::pauli(&["X", "Y", "Z"], 1, Linear),
            FeatureMapName::PauliZYyZxzLinear => {
                FeatureMapSpec::pauli(&["Z", "YY", "ZXZ"], 1, Linear)
            }
            FeatureMapName::PauliZYyZxzRep2 => {
                FeatureMapSpec::pauli(&["Z", "YY", "ZXZ"], 2, Linear)
            }
        }
    }
}

impl fmt::Display for FeatureMapName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMapName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMapName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownFeatureMap {
                name: s.to_string(),
                valid: FeatureMapName::ALL
                    .iter()
                    .map(|n| n.as_str().to_string())
                    .collect(),
            })
    }
}

pub fn named_feature_map(name: &str, n_qubits: usize) -> Result<ParamCircuit> {
    build_feature_map(&name.parse::<FeatureMapName>()?.spec(), n_qubits)
}

pub fn build_feature_map(spec: &FeatureMapSpec, n_qubits: usize) -> Result<ParamCircuit> {
    if spec.reps == 0 {
        return Err(Error::invalid("feature map needs at least one repetition"));
    }
    let strings = match spec.family {
        Family::Pauli => {
            if spec.pauli_strings.is_empty() {
                return Err(Error::invalid("Pauli feature map needs at least one string"));
            }
            spec.pauli_strings
                .iter()
                .map(|s| parse_pauli_string(s))
                .collect::<Result<Vec<_>>>()?
        }
        _ => Vec::new(),
    };
    if spec.family == Family::ZZ && spec.entanglement != Entanglement::None && n_qubits < 2 {
        return Err(Error::invalid("entangled feature maps need at least two qubits"));
    }

    let mut circ = ParamCircuit::new(n_qubits, n_qubits, 0)?;
    for _ in 0..spec.reps {
        for q in 0..n_qubits {
            circ.push(GateOp::h(q))?;
        }
        match spec.family {
            Family::Z => z_layer(&mut circ)?,
            Family::ZZ => {
                z_layer(&mut circ)?;
                for pair in spec.entanglement.groups(n_qubits, 2) {
                    let (i, j) = (pair[0], pair[1]);
                    circ.push(GateOp::cx(i, j))?;
                    circ.push(GateOp::rotation(
                        GateKind::RZ,
                        j,
                        AngleExpr::pi_minus_product(&[i, j], 2.0),
                    ))?;
                    circ.push(GateOp::cx(i, j))?;
                }
            }
            Family::Pauli => {
                for paulis in &strings {
                    for support in spec.entanglement.groups(n_qubits, paulis.len()) {
                        pauli_evolution(&mut circ, paulis, &support)?;
                    }
                }
            }
        }
    }
    Ok(circ)
}

fn z_layer(circ: &mut ParamCircuit) -> Result<()> {
    for q in 0..circ.n_qubits() {
        circ.push(GateOp::rotation(GateKind::RZ, q, AngleExpr::input(q, 2.0)))?;
    }
    Ok(())
}

fn parse_pauli_string(s: &str) -> Result<Vec<Pauli>> {
    if s.is_empty() {
        return Err(Error::invalid("empty Pauli string"));
    }
    let paulis = s
        .chars()
        .map(Pauli::try_from)
        .collect::<Result<Vec<_>>>()?;
    if paulis.contains(&Pauli::I) {
        return Err(Error::invalid(format!(
            "Pauli string `{s}` must not contain identities"
        )));
    }
    Ok(paulis)
}

/// `exp(−i φ_S(x) P_S)` on `support`: rotate each factor into Z, collect
/// parity on the last qubit with a CX chain, RZ(2φ), then undo.
fn pauli_evolution(circ: &mut ParamCircuit, paulis: &[Pauli], support: &[usize]) -> Result<()> {
    let basis = |circ: &mut ParamCircuit, sign: f64| -> Result<()> {
        for (&p, &q) in paulis.iter().zip(support) {
            match p {
                Pauli::X => circ.push(GateOp::h(q))?,
                Pauli::Y => circ.push(GateOp::rotation(
                    GateKind::RX,
                    q,
                    AngleExpr::constant(sign * FRAC_PI_2),
                ))?,
                Pauli::Z | Pauli::I => {}
            }
        }
        Ok(())
    };
    basis(circ, 1.0)?;
    for w in support.windows(2) {
        circ.push(GateOp::cx(w[0], w[1]))?;
    }
    let last = *support.last().expect("non-empty support");
    let angle = if support.len() == 1 {
        AngleExpr::input(support[0], 2.0)
    } else {
        AngleExpr::pi_minus_product(support, 2.0)
    };
    circ.push(GateOp::rotation(GateKind::RZ, last, angle))?;
    for w in support.windows(2).rev() {
        circ.push(GateOp::cx(w[0], w[1]))?;
    }
    basis(circ, -1.0)
}

/// `depth` blocks of RY and RZ on every qubit followed by a linear CX chain.
///
/// Parameters are ordered layer-major; within layer `l` the RY angles come
/// first (`2ln + q`) and then the RZ angles (`2ln + n + q`).
pub fn build_two_local(n_qubits: usize, depth: usize) -> Result<ParamCircuit> {
    if depth == 0 {
        return Err(Error::invalid("ansatz depth must be at least 1"));
    }
    if n_qubits < 2 {
        return Err(Error::invalid("TwoLocal ansatz needs at least two qubits"));
    }
    let n = n_qubits;
    let mut circ = ParamCircuit::new(n, 0, 2 * depth * n)?;
    for layer in 0..depth {
        let base = 2 * layer * n;
        for q in 0..n {
            circ.push(GateOp::rotation(GateKind::RY, q, AngleExpr::param(base + q)))?;
        }
        for q in 0..n {
            circ.push(GateOp::rotation(GateKind::RZ, q, AngleExpr::param(base + n + q)))?;
        }
        for q in 0..n - 1 {
            circ.push(GateOp::cx(q, q + 1))?;
        }
    }
    Ok(circ)
}
