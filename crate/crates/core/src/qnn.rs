//! Estimator-style quantum layer with parameter-shift gradients.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::qsim::{apply_gate, expectation, run_circuit, ParamCircuit, PauliObservable, Statevector};

/// Feature map followed by a trainable ansatz, measured against one observable.
#[derive(Clone, Debug)]
pub struct QuantumLayer {
    feature_map: ParamCircuit,
    ansatz: ParamCircuit,
    observable: PauliObservable,
    circuit: ParamCircuit,
    pub theta: Vec<f64>,
}

/// Output value with both gradients from one set of shifted evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct QnnEval {
    pub value: f64,
    pub grad_theta: Vec<f64>,
    pub grad_input: Vec<f64>,
}

impl QuantumLayer {
    pub fn new(
        feature_map: ParamCircuit,
        ansatz: ParamCircuit,
        observable: PauliObservable,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if feature_map.n_qubits() != ansatz.n_qubits()
            || observable.n_qubits() != ansatz.n_qubits()
        {
            return Err(Error::invalid(format!(
                "qubit counts disagree: feature map {}, ansatz {}, observable {}",
                feature_map.n_qubits(),
                ansatz.n_qubits(),
                observable.n_qubits()
            )));
        }
        if theta.len() != ansatz.n_params() {
            return Err(Error::invalid(format!(
                "ansatz has {} parameters, got {}",
                ansatz.n_params(),
                theta.len()
            )));
        }
        let circuit = feature_map.compose(&ansatz)?;
        Ok(QuantumLayer {
            feature_map,
            ansatz,
            observable,
            circuit,
            theta,
        })
    }

    /// Layer measured with the global parity `Z^⊗n`.
    pub fn with_parity(feature_map: ParamCircuit, ansatz: ParamCircuit, theta: Vec<f64>) -> Result<Self> {
        let obs = PauliObservable::parity(ansatz.n_qubits());
        QuantumLayer::new(feature_map, ansatz, obs, theta)
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits()
    }

    pub fn n_inputs(&self) -> usize {
        self.circuit.n_inputs()
    }

    pub fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    pub fn feature_map(&self) -> &ParamCircuit {
        &self.feature_map
    }

    pub fn ansatz(&self) -> &ParamCircuit {
        &self.ansatz
    }

    pub fn observable(&self) -> &PauliObservable {
        &self.observable
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::invalid(format!(
                "quantum layer expects {} inputs, got {}",
                self.n_inputs(),
                x.len()
            )));
        }
        Ok(())
    }

    /// State after the feature map only.
    pub fn feature_state(&self, x: &[f64]) -> Result<Statevector> {
        self.check_input(x)?;
        run_circuit(&self.feature_map, x, &[])
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let state = run_circuit(&self.circuit, x, &self.theta)?;
        expectation(&state, &self.observable)
    }

    pub fn grad_theta(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x, true, false)?.grad_theta)
    }

    pub fn grad_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(x, false, true)?.grad_input)
    }

    /// Value and both gradients.
    pub fn forward_with_grads(&self, x: &[f64]) -> Result<QnnEval> {
        self.evaluate(x, true, true)
    }

    fn evaluate(&self, x: &[f64], want_theta: bool, want_input: bool) -> Result<QnnEval> {
        self.check_input(x)?;
        let gates = self.circuit.gates();
        let angles: Vec<f64> = gates
            .iter()
            .map(|g| g.angle.as_ref().map_or(0.0, |a| a.eval(x, &self.theta)))
            .collect();

        // prefix[k] is the state before gate k
        let mut prefix = Vec::with_capacity(gates.len() + 1);
        let mut state = Statevector::zero(self.n_qubits())?;
        for (g, &a) in gates.iter().zip(&angles) {
            prefix.push(state.clone());
            apply_gate(&mut state, g, a)?;
        }
        let value = expectation(&state, &self.observable)?;

        let run_shifted = |k: usize, shift: f64| -> Result<f64> {
            let mut s = prefix[k].clone();
            apply_gate(&mut s, &gates[k], angles[k] + shift)?;
            for (g, &a) in gates[k + 1..].iter().zip(&angles[k + 1..]) {
                apply_gate(&mut s, g, a)?;
            }
            expectation(&s, &self.observable)
        };

        let mut grad_theta = vec![0.0; if want_theta { self.n_params() } else { 0 }];
        let mut grad_input = vec![0.0; if want_input { self.n_inputs() } else { 0 }];
        for (k, gate) in gates.iter().enumerate() {
            let Some(expr) = &gate.angle else { continue };
            let theta_refs: Vec<usize> = (0..grad_theta.len())
                .filter(|&j| expr.references_param(j))
                .collect();
            let input_refs: Vec<usize> = (0..grad_input.len())
                .filter(|&j| expr.references_input(j))
                .collect();
            if theta_refs.is_empty() && input_refs.is_empty() {
                continue;
            }
            // generators are Pauli strings, so the two-point shift is exact
            let d_angle = 0.5 * (run_shifted(k, FRAC_PI_2)? - run_shifted(k, -FRAC_PI_2)?);
            for j in theta_refs {
                grad_theta[j] += d_angle * expr.d_param(j, x, &self.theta);
            }
            for j in input_refs {
                grad_input[j] += d_angle * expr.d_input(j, x, &self.theta);
            }
        }
        Ok(QnnEval {
            value,
            grad_theta,
            grad_input,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{build_two_local, named_feature_map};
    use crate::qsim::{GateKind, GateOp, AngleExpr};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layer(name: &str, n: usize, depth: usize, theta: Vec<f64>) -> QuantumLayer {
        QuantumLayer::with_parity(
            named_feature_map(name, n).unwrap(),
            build_two_local(n, depth).unwrap(),
            theta,
        )
        .unwrap()
    }

    #[test]
    fn identity_feature_map_zero_theta() {
        let fm = ParamCircuit::new(2, 2, 0).unwrap();
        let l = QuantumLayer::with_parity(fm, build_two_local(2, 1).unwrap(), vec![0.0; 4])
            .unwrap();
        assert_eq!(l.forward(&[0.4, -0.2]).unwrap(), 1.0);
    }

    #[test]
    fn rz_layer_gradient_vanishes_at_symmetric_point() {
        let l = layer("z_reps_1", 2, 1, vec![0.0; 4]);
        let obs_zz = l.observable().label();
        assert_eq!(obs_zz, "ZZ");
        let g = l.grad_theta(&[0.7, -1.3]).unwrap();
        assert_eq!(g.len(), 4);
        // RZ parameters are 2 and 3
        assert!(g[2].abs() < 1e-12 && g[3].abs() < 1e-12);
    }

    #[test]
    fn z_map_input_gradient_zero_at_zero_theta() {
        let l = layer("z_reps_1", 3, 2, vec![0.0; 12]);
        let g = l.grad_input(&[0.3, 1.1, -0.8]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
    }

    #[test]
    fn unused_input_has_exact_zero_gradient() {
        let mut fm = ParamCircuit::new(2, 3, 0).unwrap();
        fm.push(GateOp::h(0)).unwrap();
        fm.push(GateOp::rotation(GateKind::RY, 0, AngleExpr::input(0, 1.0)))
            .unwrap();
        fm.push(GateOp::rotation(GateKind::RX, 1, AngleExpr::input(1, 2.0)))
            .unwrap();
        let l = QuantumLayer::with_parity(fm, build_two_local(2, 1).unwrap(), vec![0.3; 4])
            .unwrap();
        let g = l.grad_input(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for name in ["pauli_xyz_1_rep", "zz_reps_2_linear", "pauli_z_yy_zxz_rep_2"] {
            let theta: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut l = layer(name, 3, 2, theta.clone());
            let eval = l.forward_with_grads(&x).unwrap();
            for j in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let fd = (l.forward(&xp).unwrap() - l.forward(&xm).unwrap()) / (2.0 * h);
                assert!((fd - eval.grad_input[j]).abs() < 1e-6, "{name} x{j}");
            }
            for j in 0..theta.len() {
                l.theta[j] = theta[j] + h;
                let fp = l.forward(&x).unwrap();
                l.theta[j] = theta[j] - h;
                let fm = l.forward(&x).unwrap();
                l.theta[j] = theta[j];
                assert!(((fp - fm) / (2.0 * h) - eval.grad_theta[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn arity_checks() {
        let l = layer("z_reps_1", 3, 1, vec![0.0; 6]);
        assert!(l.forward(&[0.0; 2]).is_err());
        assert!(QuantumLayer::with_parity(
            named_feature_map("z_reps_1", 3).unwrap(),
            build_two_local(3, 1).unwrap(),
            vec![0.0; 5]
        )
        .is_err());
        assert!(QuantumLayer::with_parity(
            named_feature_map("z_reps_1", 2).unwrap(),
            build_two_local(3, 1).unwrap(),
            vec![0.0; 6]
        )
        .is_err());
    }
}
