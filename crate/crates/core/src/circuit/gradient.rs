use std::f64::consts::{FRAC_PI_2, SQRT_2};

use super::{Circuit, GateKind, StateVector};
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::tensor::{C64, ZERO};

/// Scalar objectives of a circuit.
#[derive(Debug, Clone)]
pub enum CircuitObjective {
    /// `<0|U^dag H U|0>`.
    Energy(PauliSum),
    /// `|<0|U|input>|^2`.
    AllZeros(StateVector),
    /// Mean binary cross-entropy of `p = |<0|U|x_k>|^2` against the labels,
    /// with `p` clamped to `[epsilon, 1 - epsilon]`.
    Bce { inputs: Vec<StateVector>, labels: Vec<u8>, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Shifted circuit evaluations, two per rotation and four per `crx`.
    ParameterShift,
    /// One forward and one backward pass per input state.
    #[default]
    Adjoint,
}

impl std::str::FromStr for GradientMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parameter-shift" | "shift" => Ok(GradientMethod::ParameterShift),
            "adjoint" => Ok(GradientMethod::Adjoint),
            _ => Err(Error::invalid(format!("unknown gradient method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    /// Objective evaluations charged for this gradient. Both methods charge
    /// the parameter-shift count so that budgets compare across methods.
    pub evaluations: usize,
}

const CRX_SHIFT_NEAR: f64 = FRAC_PI_2;
const CRX_SHIFT_FAR: f64 = 3.0 * FRAC_PI_2;

fn crx_weights() -> (f64, f64) {
    let d = 4.0 * SQRT_2;
    ((SQRT_2 + 1.0) / d, (SQRT_2 - 1.0) / d)
}

/// Evaluations needed for one parameter-shift gradient.
pub fn shift_cost(c: &Circuit) -> usize {
    c.slots
        .iter()
        .map(|&g| if c.gates[g].kind == GateKind::Crx { 4 } else { 2 })
        .sum()
}

impl CircuitObjective {
    fn validate(&self, c: &Circuit) -> Result<()> {
        let n = c.num_qubits();
        match self {
            CircuitObjective::Energy(h) => {
                if h.num_qubits() != n {
                    return Err(Error::shape(format!(
                        "{}-qubit operator for a {n}-qubit circuit",
                        h.num_qubits()
                    )));
                }
            }
            CircuitObjective::AllZeros(s) => {
                if s.num_qubits() != n {
                    return Err(Error::shape("input width differs from the circuit"));
                }
            }
            CircuitObjective::Bce { inputs, labels, epsilon } => {
                if inputs.is_empty() || inputs.len() != labels.len() {
                    return Err(Error::shape(format!(
                        "{} inputs and {} labels",
                        inputs.len(),
                        labels.len()
                    )));
                }
                if inputs.iter().any(|s| s.num_qubits() != n) {
                    return Err(Error::shape("input width differs from the circuit"));
                }
                if labels.iter().any(|&y| y > 1) {
                    return Err(Error::invalid("labels must be 0 or 1"));
                }
                if !(*epsilon > 0.0 && *epsilon < 0.5) {
                    return Err(Error::invalid(format!("clamp epsilon {epsilon} outside (0, 0.5)")));
                }
            }
        }
        Ok(())
    }

    /// Quantities the objective is built from: the energy, or one
    /// all-zeros probability per input.
    fn raw(&self, c: &Circuit, params: &[f64]) -> Result<Vec<f64>> {
        match self {
            CircuitObjective::Energy(h) => Ok(vec![super::expectation(c, params, h)?]),
            CircuitObjective::AllZeros(s) => Ok(vec![super::prob_all_zeros(c, params, s)?]),
            CircuitObjective::Bce { inputs, .. } => inputs
                .iter()
                .map(|s| super::prob_all_zeros(c, params, s))
                .collect(),
        }
    }

    fn combine(&self, raw: &[f64]) -> f64 {
        match self {
            CircuitObjective::Bce { labels, epsilon, .. } => {
                let sum: f64 = raw
                    .iter()
                    .zip(labels)
                    .map(|(&p, &y)| {
                        let p = p.clamp(*epsilon, 1.0 - epsilon);
                        if y == 1 {
                            -p.ln()
                        } else {
                            -(1.0 - p).ln()
                        }
                    })
                    .sum();
                sum / raw.len() as f64
            }
            _ => raw[0],
        }
    }

    /// Derivative of the objective with respect to each raw quantity.
    fn chain(&self, raw: &[f64]) -> Vec<f64> {
        match self {
            CircuitObjective::Bce { labels, epsilon, .. } => {
                let m = raw.len() as f64;
                raw.iter()
                    .zip(labels)
                    .map(|(&p, &y)| {
                        if p <= *epsilon || p >= 1.0 - epsilon {
                            0.0
                        } else if y == 1 {
                            -1.0 / (p * m)
                        } else {
                            1.0 / ((1.0 - p) * m)
                        }
                    })
                    .collect()
            }
            _ => vec![1.0],
        }
    }
}

pub fn objective_value(c: &Circuit, params: &[f64], obj: &CircuitObjective) -> Result<f64> {
    obj.validate(c)?;
    let v = obj.combine(&obj.raw(c, params)?);
    if !v.is_finite() {
        return Err(Error::Numerical("objective is not finite".into()));
    }
    Ok(v)
}

pub fn gradient(
    c: &Circuit,
    params: &[f64],
    obj: &CircuitObjective,
    method: GradientMethod,
) -> Result<Gradient> {
    c.check_params(params)?;
    obj.validate(c)?;
    let values = match method {
        GradientMethod::ParameterShift => shift_gradient(c, params, obj)?,
        GradientMethod::Adjoint => adjoint_gradient(c, params, obj)?,
    };
    if values.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("gradient is not finite".into()));
    }
    Ok(Gradient { values, evaluations: shift_cost(c) })
}

fn shift_gradient(c: &Circuit, params: &[f64], obj: &CircuitObjective) -> Result<Vec<f64>> {
    let w = obj.chain(&obj.raw(c, params)?);
    let mut shifted = params.to_vec();
    let diff = |j: usize, s: f64, shifted: &mut Vec<f64>| -> Result<Vec<f64>> {
        shifted[j] = params[j] + s;
        let plus = obj.raw(c, shifted)?;
        shifted[j] = params[j] - s;
        let minus = obj.raw(c, shifted)?;
        shifted[j] = params[j];
        Ok(plus.iter().zip(&minus).map(|(a, b)| a - b).collect())
    };
    let (dp, dm) = crx_weights();
    let mut grad = Vec::with_capacity(params.len());
    for (j, &g) in c.slots.iter().enumerate() {
        let d: Vec<f64> = if c.gates[g].kind == GateKind::Crx {
            let near = diff(j, CRX_SHIFT_NEAR, &mut shifted)?;
            let far = diff(j, CRX_SHIFT_FAR, &mut shifted)?;
            near.iter().zip(&far).map(|(a, b)| dp * a - dm * b).collect()
        } else {
            diff(j, FRAC_PI_2, &mut shifted)?.iter().map(|a| a / 2.0).collect()
        };
        grad.push(d.iter().zip(&w).map(|(a, b)| a * b).sum());
    }
    Ok(grad)
}

fn adjoint_gradient(c: &Circuit, params: &[f64], obj: &CircuitObjective) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.len()];
    match obj {
        CircuitObjective::Energy(h) => {
            let input = StateVector::zero_state(c.n);
            adjoint_pass(c, params, &input, &mut grad, |s| StateVector {
                n: s.n,
                amps: h.apply(&s.amps),
            });
        }
        CircuitObjective::AllZeros(input) => {
            adjoint_pass(c, params, input, &mut grad, |s| project_zero(s, 1.0));
        }
        CircuitObjective::Bce { inputs, .. } => {
            let w = obj.chain(&obj.raw(c, params)?);
            for (input, &wk) in inputs.iter().zip(&w) {
                if wk != 0.0 {
                    adjoint_pass(c, params, input, &mut grad, |s| project_zero(s, wk));
                }
            }
        }
    }
    Ok(grad)
}

fn project_zero(s: &StateVector, w: f64) -> StateVector {
    let mut amps = vec![ZERO; s.amps.len()];
    amps[0] = s.amps[0] * w;
    StateVector { n: s.n, amps }
}

/// Accumulates `d/dtheta <psi|O|psi>` for `psi = U(theta) input` into `grad`.
/// With `d G / dtheta = -i/2 P G` the derivative is `Im <lambda|P psi>`,
/// where `lambda` is `O psi` pulled back through the later gates.
fn adjoint_pass(
    c: &Circuit,
    params: &[f64],
    input: &StateVector,
    grad: &mut [f64],
    observable: impl Fn(&StateVector) -> StateVector,
) {
    let angles = c.gate_angles(params);
    let mut psi = input.clone();
    for (g, &t) in c.gates.iter().zip(&angles) {
        psi.apply_gate(g, t);
    }
    let mut lambda = observable(&psi);
    let mut slot = c.slots.len();
    for (i, g) in c.gates.iter().enumerate().rev() {
        if let Some(p) = g.generator() {
            slot -= 1;
            let mut dpsi = psi.clone();
            dpsi.apply(&g.qubits, &p);
            let z: C64 = lambda.inner(&dpsi);
            grad[slot] += z.im;
        }
        let adj = g.adjoint_matrix(angles[i]);
        psi.apply(&g.qubits, &adj);
        lambda.apply(&g.qubits, &adj);
    }
}

/// Central differences with the given step.
pub fn finite_difference_gradient(
    c: &Circuit,
    params: &[f64],
    obj: &CircuitObjective,
    step: f64,
) -> Result<Vec<f64>> {
    c.check_params(params)?;
    let mut x = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for j in 0..params.len() {
        x[j] = params[j] + step;
        let fp = objective_value(c, &x, obj)?;
        x[j] = params[j] - step;
        let fm = objective_value(c, &x, obj)?;
        x[j] = params[j];
        grad.push((fp - fm) / (2.0 * step));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_circuit;
    use super::super::Gate;
    use super::*;
    use crate::pauli::Pauli;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * x.abs().max(y.abs()) + 1e-8)
    }

    fn random_hamiltonian(n: usize, rng: &mut ChaCha8Rng) -> PauliSum {
        let mut h = PauliSum::new(n);
        for _ in 0..6 {
            let a = rng.random_range(0..n);
            let b = (a + 1 + rng.random_range(0..n - 1)) % n;
            let ps = [Pauli::X, Pauli::Y, Pauli::Z];
            h.add(
                rng.random_range(-1.0..1.0),
                vec![(a, ps[rng.random_range(0..3)]), (b, ps[rng.random_range(0..3)])],
            )
            .unwrap();
        }
        h
    }

    fn objectives(n: usize, rng: &mut ChaCha8Rng) -> Vec<CircuitObjective> {
        let inputs: Vec<StateVector> = (0..5)
            .map(|_| StateVector::product_ry(&(0..n).map(|_| rng.random_range(0.0..3.0)).collect::<Vec<_>>()))
            .collect();
        vec![
            CircuitObjective::Energy(random_hamiltonian(n, rng)),
            CircuitObjective::AllZeros(inputs[0].clone()),
            CircuitObjective::Bce { inputs, labels: vec![0, 1, 1, 0, 1], epsilon: 1e-7 },
        ]
    }

    #[test]
    fn both_routes_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..6 {
            let n = 2 + trial % 3;
            let c = random_circuit(n, 14, &mut rng);
            let p = c.params();
            for obj in objectives(n, &mut rng) {
                let fd = finite_difference_gradient(&c, &p, &obj, 1e-6).unwrap();
                let ps = gradient(&c, &p, &obj, GradientMethod::ParameterShift).unwrap();
                let ad = gradient(&c, &p, &obj, GradientMethod::Adjoint).unwrap();
                assert!(close(&ps.values, &fd, 1e-5), "{:?}\n{:?}", ps.values, fd);
                assert!(close(&ad.values, &ps.values, 1e-9), "{:?}\n{:?}", ad.values, ps.values);
                assert_eq!(ps.evaluations, ad.evaluations);
            }
        }
    }

    #[test]
    fn crx_uses_four_shifts() {
        let mut c = Circuit::new(2);
        c.push(Gate::ry(0, 0.4)).unwrap();
        c.push(Gate::crx(0, 1, 1.1)).unwrap();
        assert_eq!(shift_cost(&c), 6);
        let mut h = PauliSum::new(2);
        h.add(1.0, vec![(1, Pauli::Z)]).unwrap();
        let obj = CircuitObjective::Energy(h);
        let p = c.params();
        let g = gradient(&c, &p, &obj, GradientMethod::ParameterShift).unwrap();
        // <Z_1> = 1 - sin^2(0.2) (1 - cos 1.1)
        let s2 = (0.2f64).sin().powi(2);
        let d_theta = -s2 * (1.1f64).sin();
        let d_ry = -(0.4f64).sin() * (1.0 - (1.1f64).cos()) / 2.0;
        assert!((g.values[1] - d_theta).abs() < 1e-12);
        assert!((g.values[0] - d_ry).abs() < 1e-12);
    }

    #[test]
    fn clamped_samples_have_zero_gradient() {
        let mut c = Circuit::new(1);
        c.push(Gate::ry(0, 0.0)).unwrap();
        let obj = CircuitObjective::Bce {
            inputs: vec![StateVector::zero_state(1)],
            labels: vec![1],
            epsilon: 1e-7,
        };
        // p = 1 is clamped, so the loss is flat there
        let g = gradient(&c, &[0.0], &obj, GradientMethod::Adjoint).unwrap();
        assert_eq!(g.values, vec![0.0]);
        assert!((objective_value(&c, &[0.0], &obj).unwrap() + (1.0f64 - 1e-7).ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_objectives() {
        let c = Circuit::new(2);
        assert!(objective_value(&c, &[], &CircuitObjective::Energy(PauliSum::new(3))).is_err());
        let bad = CircuitObjective::Bce { inputs: vec![StateVector::zero_state(2)], labels: vec![2], epsilon: 1e-7 };
        assert!(objective_value(&c, &[], &bad).is_err());
        let bad = CircuitObjective::Bce { inputs: vec![], labels: vec![], epsilon: 1e-7 };
        assert!(gradient(&c, &[], &bad, GradientMethod::Adjoint).is_err());
    }
}
