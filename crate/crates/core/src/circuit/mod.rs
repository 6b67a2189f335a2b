//! State-vector simulation of parametrized circuits.
//!
//! Qubit 0 is the most significant bit of an amplitude index. Parametrized
//! gates are `exp(-i theta P / 2)` with `P` one of `Z`, `Y`, `XX`, `YY`, `ZZ`,
//! or `|1><1| (x) X` for the controlled X rotation (control first).

mod gradient;
mod io;

use serde::{Deserialize, Serialize};

pub use gradient::{
    finite_difference_gradient, gradient, objective_value, shift_cost, CircuitObjective,
    Gradient, GradientMethod,
};
pub use io::{CircuitDocument, GateDocument};

use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::tensor::{DenseTensor, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    Rz,
    Ry,
    Crx,
    Xx,
    Yy,
    Zz,
    FixedUnitary,
}

impl GateKind {
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Rz | GateKind::Ry => Some(1),
            GateKind::Crx | GateKind::Xx | GateKind::Yy | GateKind::Zz => Some(2),
            GateKind::FixedUnitary => None,
        }
    }

    pub fn is_parametrized(self) -> bool {
        self != GateKind::FixedUnitary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    qubits: Vec<usize>,
    /// Stored angle; the value used at evaluation time comes from the
    /// parameter vector.
    param: f64,
    matrix: Option<DenseTensor>,
}

impl Gate {
    fn rotation(kind: GateKind, qubits: Vec<usize>, theta: f64) -> Gate {
        Gate { kind, qubits, param: theta, matrix: None }
    }

    pub fn rz(q: usize, theta: f64) -> Gate {
        Gate::rotation(GateKind::Rz, vec![q], theta)
    }

    pub fn ry(q: usize, theta: f64) -> Gate {
        Gate::rotation(GateKind::Ry, vec![q], theta)
    }

    pub fn crx(control: usize, target: usize, theta: f64) -> Gate {
        Gate::rotation(GateKind::Crx, vec![control, target], theta)
    }

    pub fn xx(a: usize, b: usize, theta: f64) -> Gate {
        Gate::rotation(GateKind::Xx, vec![a, b], theta)
    }

    pub fn yy(a: usize, b: usize, theta: f64) -> Gate {
        Gate::rotation(GateKind::Yy, vec![a, b], theta)
    }

    pub fn zz(a: usize, b: usize, theta: f64) -> Gate {
        Gate::rotation(GateKind::Zz, vec![a, b], theta)
    }

    /// A fixed unitary on one or two qubits.
    pub fn fixed(qubits: Vec<usize>, matrix: DenseTensor) -> Result<Gate> {
        let dim = match qubits.len() {
            1 => 2,
            2 => 4,
            k => return Err(Error::invalid(format!("fixed gates act on 1 or 2 qubits, got {k}"))),
        };
        if matrix.shape() != [dim, dim] {
            return Err(Error::shape(format!(
                "fixed gate on {} qubits needs a {dim}x{dim} matrix",
                qubits.len()
            )));
        }
        let dev = matrix.unitarity_error();
        if dev > crate::tensor::tol::UNITARY {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Gate { kind: GateKind::FixedUnitary, qubits, param: 0.0, matrix: Some(matrix) })
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn param(&self) -> Option<f64> {
        self.kind.is_parametrized().then_some(self.param)
    }

    pub fn fixed_matrix(&self) -> Option<&DenseTensor> {
        self.matrix.as_ref()
    }

    /// Gate matrix at angle `theta` (ignored for fixed gates).
    pub fn matrix(&self, theta: f64) -> DenseTensor {
        match self.kind {
            GateKind::FixedUnitary => self.matrix.clone().expect("fixed gate has a matrix"),
            _ => {
                let k = GateMatrix::rotation(self.kind, theta);
                match k {
                    GateMatrix::One(m) => DenseTensor::matrix(2, 2, m.to_vec()).unwrap(),
                    GateMatrix::Two(m) => DenseTensor::matrix(4, 4, m.to_vec()).unwrap(),
                }
            }
        }
    }

    fn gate_matrix(&self, theta: f64) -> GateMatrix {
        match self.kind {
            GateKind::FixedUnitary => GateMatrix::from_dense(self.matrix.as_ref().unwrap()),
            _ => GateMatrix::rotation(self.kind, theta),
        }
    }

    fn adjoint_matrix(&self, theta: f64) -> GateMatrix {
        match self.kind {
            GateKind::FixedUnitary => GateMatrix::from_dense(&self.matrix.as_ref().unwrap().adjoint()),
            _ => GateMatrix::rotation(self.kind, -theta),
        }
    }

    /// Generator `P` with `d/dtheta G = -i/2 P G`.
    fn generator(&self) -> Option<GateMatrix> {
        let (o, z, i) = (ONE, ZERO, C64::new(0.0, 1.0));
        let m = match self.kind {
            GateKind::Rz => GateMatrix::One([o, z, z, -o]),
            GateKind::Ry => GateMatrix::One([z, -i, i, z]),
            GateKind::Crx => {
                let mut m = [z; 16];
                m[2 * 4 + 3] = o;
                m[3 * 4 + 2] = o;
                GateMatrix::Two(m)
            }
            GateKind::Xx => GateMatrix::Two(pauli_pair([z, o, o, z], [z, o, o, z])),
            GateKind::Yy => GateMatrix::Two(pauli_pair([z, -i, i, z], [z, -i, i, z])),
            GateKind::Zz => GateMatrix::Two(pauli_pair([o, z, z, -o], [o, z, z, -o])),
            GateKind::FixedUnitary => return None,
        };
        Some(m)
    }
}

fn pauli_pair(a: [C64; 4], b: [C64; 4]) -> [C64; 16] {
    let mut m = [ZERO; 16];
    for r in 0..4 {
        for c in 0..4 {
            m[r * 4 + c] = a[(r >> 1) * 2 + (c >> 1)] * b[(r & 1) * 2 + (c & 1)];
        }
    }
    m
}

/// Small row-major gate matrices used by the simulator.
#[derive(Debug, Clone, Copy)]
enum GateMatrix {
    One([C64; 4]),
    Two([C64; 16]),
}

impl GateMatrix {
    fn rotation(kind: GateKind, theta: f64) -> GateMatrix {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let re = |x: f64| C64::new(x, 0.0);
        let im = |x: f64| C64::new(0.0, x);
        match kind {
            GateKind::Rz => GateMatrix::One([C64::new(c, -s), ZERO, ZERO, C64::new(c, s)]),
            GateKind::Ry => GateMatrix::One([re(c), re(-s), re(s), re(c)]),
            GateKind::Crx => {
                let mut m = [ZERO; 16];
                m[0] = ONE;
                m[5] = ONE;
                m[10] = re(c);
                m[11] = im(-s);
                m[14] = im(-s);
                m[15] = re(c);
                GateMatrix::Two(m)
            }
            GateKind::Xx | GateKind::Yy | GateKind::Zz => {
                // cos(t/2) I - i sin(t/2) P
                let p = match kind {
                    GateKind::Xx => pauli_pair([ZERO, ONE, ONE, ZERO], [ZERO, ONE, ONE, ZERO]),
                    GateKind::Yy => {
                        let y = [ZERO, im(-1.0), im(1.0), ZERO];
                        pauli_pair(y, y)
                    }
                    _ => pauli_pair([ONE, ZERO, ZERO, -ONE], [ONE, ZERO, ZERO, -ONE]),
                };
                let mut m = [ZERO; 16];
                for k in 0..16 {
                    m[k] = p[k] * im(-s);
                }
                for d in 0..4 {
                    m[d * 5] += re(c);
                }
                GateMatrix::Two(m)
            }
            GateKind::FixedUnitary => unreachable!("fixed gates have no rotation form"),
        }
    }

    fn from_dense(m: &DenseTensor) -> GateMatrix {
        match m.rows() {
            2 => GateMatrix::One(m.data().try_into().unwrap()),
            _ => GateMatrix::Two(m.data().try_into().unwrap()),
        }
    }
}

/// Amplitudes of an `n`-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero_state(n: usize) -> StateVector {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        StateVector { n, amps }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<StateVector> {
        if amps.len() != 1 << n {
            return Err(Error::shape(format!(
                "{} amplitudes for {n} qubits",
                amps.len()
            )));
        }
        Ok(StateVector { n, amps })
    }

    /// Product state with qubit `i` in `(cos(x_i / 2), sin(x_i / 2))`.
    pub fn product_ry(angles: &[f64]) -> StateVector {
        let mut amps = vec![ONE];
        for &x in angles {
            let (c, s) = ((x / 2.0).cos(), (x / 2.0).sin());
            amps = amps.iter().flat_map(|&a| [a * c, a * s]).collect();
        }
        StateVector { n: angles.len(), amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn apply(&mut self, qubits: &[usize], m: &GateMatrix) {
        match m {
            GateMatrix::One(u) => apply_one(&mut self.amps, self.n, qubits[0], u),
            GateMatrix::Two(u) => apply_two(&mut self.amps, self.n, qubits[0], qubits[1], u),
        }
    }

    /// Applies a 2x2 or 4x4 matrix to one or two qubits; the matrix need
    /// not be unitary.
    pub fn apply_matrix(&mut self, qubits: &[usize], m: &DenseTensor) -> Result<()> {
        let dim = 1usize << qubits.len();
        if qubits.is_empty() || qubits.len() > 2 || m.shape() != [dim, dim] {
            return Err(Error::shape(format!(
                "{:?} matrix on {} qubits",
                m.shape(),
                qubits.len()
            )));
        }
        if qubits.iter().any(|&q| q >= self.n) || (qubits.len() == 2 && qubits[0] == qubits[1]) {
            return Err(Error::invalid(format!("bad qubits {qubits:?}")));
        }
        self.apply(qubits, &GateMatrix::from_dense(m));
        Ok(())
    }

    /// Applies one gate at angle `theta`.
    pub fn apply_gate(&mut self, g: &Gate, theta: f64) {
        self.apply(&g.qubits, &g.gate_matrix(theta));
    }
}

fn apply_one(amps: &mut [C64], n: usize, q: usize, u: &[C64; 4]) {
    let bit = 1usize << (n - 1 - q);
    for b in 0..amps.len() {
        if b & bit == 0 {
            let (a0, a1) = (amps[b], amps[b | bit]);
            amps[b] = u[0] * a0 + u[1] * a1;
            amps[b | bit] = u[2] * a0 + u[3] * a1;
        }
    }
}

fn apply_two(amps: &mut [C64], n: usize, q0: usize, q1: usize, u: &[C64; 16]) {
    let b0 = 1usize << (n - 1 - q0);
    let b1 = 1usize << (n - 1 - q1);
    for b in 0..amps.len() {
        if b & (b0 | b1) == 0 {
            let idx = [b, b | b1, b | b0, b | b0 | b1];
            let a = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for r in 0..4 {
                amps[idx[r]] = u[r * 4] * a[0] + u[r * 4 + 1] * a[1] + u[r * 4 + 2] * a[2] + u[r * 4 + 3] * a[3];
            }
        }
    }
}

/// An ordered gate list on `n` qubits. Every parametrized gate owns one
/// slot of the parameter vector, in gate order.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
    slots: Vec<usize>,
}

impl Circuit {
    pub fn new(n: usize) -> Circuit {
        Circuit { n, gates: Vec::new(), slots: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        if let Some(a) = g.kind.arity() {
            if g.qubits.len() != a {
                return Err(Error::invalid(format!("{:?} needs {a} qubits", g.kind)));
            }
        }
        if g.qubits.iter().any(|&q| q >= self.n) {
            return Err(Error::invalid(format!(
                "gate on qubits {:?} in a {}-qubit circuit",
                g.qubits, self.n
            )));
        }
        if g.qubits.len() == 2 && g.qubits[0] == g.qubits[1] {
            return Err(Error::invalid("two-qubit gate on a repeated qubit"));
        }
        if !g.param.is_finite() {
            return Err(Error::invalid("non-finite gate angle"));
        }
        if g.kind.is_parametrized() {
            self.slots.push(self.gates.len());
        }
        self.gates.push(g);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.slots.len()
    }

    /// Gate position of every parameter slot.
    pub fn parameter_index(&self) -> &[usize] {
        &self.slots
    }

    /// Stored angles, one per slot.
    pub fn params(&self) -> Vec<f64> {
        self.slots.iter().map(|&g| self.gates[g].param).collect()
    }

    /// Copy with the stored angles replaced.
    pub fn with_params(&self, params: &[f64]) -> Result<Circuit> {
        self.check_params(params)?;
        let mut c = self.clone();
        for (&g, &p) in self.slots.iter().zip(params) {
            c.gates[g].param = p;
        }
        Ok(c)
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.slots.len() {
            return Err(Error::shape(format!(
                "circuit has {} parameters, got {}",
                self.slots.len(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Angle for every gate (0 for fixed gates).
    fn gate_angles(&self, params: &[f64]) -> Vec<f64> {
        let mut angles = vec![0.0; self.gates.len()];
        for (&g, &p) in self.slots.iter().zip(params) {
            angles[g] = p;
        }
        angles
    }

    /// Dense unitary of the whole circuit (small `n` only).
    pub fn unitary(&self, params: &[f64]) -> Result<DenseTensor> {
        self.check_params(params)?;
        if self.n > 12 {
            return Err(Error::TooLarge { what: "dense circuit unitary", n: self.n, cap: 12 });
        }
        let dim = 1 << self.n;
        let mut u = DenseTensor::zeros(&[dim, dim]);
        for col in 0..dim {
            let mut amps = vec![ZERO; dim];
            amps[col] = ONE;
            let out = run(self, params, &StateVector { n: self.n, amps })?;
            for (r, a) in out.amps.iter().enumerate() {
                *u.at_mut(r, col) = *a;
            }
        }
        Ok(u)
    }
}

/// Applies the circuit to `input`.
pub fn run(c: &Circuit, params: &[f64], input: &StateVector) -> Result<StateVector> {
    c.check_params(params)?;
    if input.n != c.n {
        return Err(Error::shape(format!(
            "{}-qubit input for a {}-qubit circuit",
            input.n, c.n
        )));
    }
    let angles = c.gate_angles(params);
    let mut s = input.clone();
    for (g, &t) in c.gates.iter().zip(&angles) {
        s.apply_gate(g, t);
    }
    Ok(s)
}

/// `<psi|H|psi>` with `psi` the circuit applied to `|0...0>`.
pub fn expectation(c: &Circuit, params: &[f64], h: &PauliSum) -> Result<f64> {
    if h.num_qubits() != c.n {
        return Err(Error::shape(format!(
            "{}-qubit operator for a {}-qubit circuit",
            h.num_qubits(),
            c.n
        )));
    }
    let psi = run(c, params, &StateVector::zero_state(c.n))?;
    Ok(h.expectation(&psi.amps))
}

/// Probability of reading all zeros after the circuit acts on `input`.
pub fn prob_all_zeros(c: &Circuit, params: &[f64], input: &StateVector) -> Result<f64> {
    let out = run(c, params, input)?;
    Ok(out.amps[0].norm_sqr())
}

/// `ry(x_i)` on qubit `i` of `|0...0>`.
pub fn encode_inputs(x: &[f64]) -> Result<StateVector> {
    if x.is_empty() {
        return Err(Error::invalid("empty feature vector"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature"));
    }
    Ok(StateVector::product_ry(x))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::pauli::Pauli;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Random circuit touching every gate kind.
    pub(crate) fn random_circuit(n: usize, gates: usize, rng: &mut ChaCha8Rng) -> Circuit {
        let mut c = Circuit::new(n);
        for k in 0..gates {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n);
            while n > 1 && b == a {
                b = rng.random_range(0..n);
            }
            let t = rng.random_range(-PI..PI);
            let kind = if n == 1 { k % 2 } else { k % 7 };
            let g = match kind {
                0 => Gate::rz(a, t),
                1 => Gate::ry(a, t),
                2 => Gate::crx(a, b, t),
                3 => Gate::xx(a, b, t),
                4 => Gate::yy(a, b, t),
                5 => Gate::zz(a, b, t),
                _ => Gate::fixed(vec![a, b], random_unitary(4, rng)).unwrap(),
            };
            c.push(g).unwrap();
        }
        c
    }

    pub(crate) fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> DenseTensor {
        let m = DenseTensor::from_fn(&[d, d], |_| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        crate::tensor::qr_decompose(&m).unwrap().0
    }

    fn embed(g: &Gate, theta: f64, n: usize) -> DenseTensor {
        // dense operator through basis-state action
        let dim = 1 << n;
        let mut u = DenseTensor::zeros(&[dim, dim]);
        for col in 0..dim {
            let mut s = StateVector { n, amps: vec![ZERO; dim] };
            s.amps[col] = ONE;
            s.apply_gate(g, theta);
            for r in 0..dim {
                *u.at_mut(r, col) = s.amps[r];
            }
        }
        u
    }

    #[test]
    fn gate_matrices_are_unitary_and_identity_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in [Gate::rz(0, 0.0), Gate::ry(0, 0.0), Gate::crx(0, 1, 0.0), Gate::xx(0, 1, 0.0), Gate::yy(0, 1, 0.0), Gate::zz(0, 1, 0.0)] {
            let m = g.matrix(0.0);
            assert!(m.max_abs_diff(&DenseTensor::identity(m.rows())) < 1e-12);
            let t = rng.random_range(-PI..PI);
            assert!(g.matrix(t).unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn rotations_match_matrix_exponentials() {
        let t = 0.731;
        let cases: Vec<(Gate, DenseTensor)> = vec![
            (Gate::rz(0, t), Pauli::Z.matrix()),
            (Gate::ry(0, t), Pauli::Y.matrix()),
            (Gate::xx(0, 1, t), Pauli::X.matrix().kron(&Pauli::X.matrix())),
            (Gate::yy(0, 1, t), Pauli::Y.matrix().kron(&Pauli::Y.matrix())),
            (Gate::zz(0, 1, t), Pauli::Z.matrix().kron(&Pauli::Z.matrix())),
        ];
        for (g, p) in cases {
            let e = crate::tensor::hermitian_expm(&p, C64::new(0.0, -t / 2.0)).unwrap();
            assert!(g.matrix(t).max_abs_diff(&e) < 1e-12, "{:?}", g.kind());
        }
        let p1 = DenseTensor::real_matrix(2, 2, &[0., 0., 0., 1.]).unwrap();
        let e = crate::tensor::hermitian_expm(&p1.kron(&Pauli::X.matrix()), C64::new(0.0, -t / 2.0)).unwrap();
        assert!(Gate::crx(0, 1, t).matrix(t).max_abs_diff(&e) < 1e-12);
    }

    #[test]
    fn generators_match_derivatives() {
        let t = -1.3;
        let h = 1e-6;
        for g in [Gate::rz(0, t), Gate::ry(0, t), Gate::crx(0, 1, t), Gate::xx(0, 1, t), Gate::yy(0, 1, t), Gate::zz(0, 1, t)] {
            let fd = g.matrix(t + h).sub(&g.matrix(t - h)).unwrap().scale(C64::new(0.5 / h, 0.0));
            let p = match g.generator().unwrap() {
                GateMatrix::One(m) => DenseTensor::matrix(2, 2, m.to_vec()).unwrap(),
                GateMatrix::Two(m) => DenseTensor::matrix(4, 4, m.to_vec()).unwrap(),
            };
            let an = p.matmul(&g.matrix(t)).unwrap().scale(C64::new(0.0, -0.5));
            assert!(fd.max_abs_diff(&an) < 1e-8, "{:?}", g.kind());
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(3);
        let s = StateVector::product_ry(&[0.3, 1.0, 2.0]);
        assert_eq!(run(&c, &[], &s).unwrap(), s);
    }

    #[test]
    fn ry_pi_flips_zero() {
        let mut c = Circuit::new(1);
        c.push(Gate::ry(0, 0.0)).unwrap();
        let out = run(&c, &[PI], &StateVector::zero_state(1)).unwrap();
        assert!(out.amps[0].norm() < 1e-15 && (out.amps[1].norm() - 1.0).abs() < 1e-15);
        assert!(prob_all_zeros(&c, &[PI], &StateVector::zero_state(1)).unwrap() < 1e-30);
    }

    #[test]
    fn run_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 6;
        let c = random_circuit(n, 30, &mut rng);
        let params = c.params();
        let mut u = DenseTensor::identity(1 << n);
        let angles = c.gate_angles(&params);
        for (g, &t) in c.gates().iter().zip(&angles) {
            u = embed(g, t, n).matmul(&u).unwrap();
        }
        let input = StateVector::product_ry(&[0.1, 0.5, 0.9, 1.3, 1.7, 2.1]);
        let expected = u.matmul(&DenseTensor::matrix(64, 1, input.amps.clone()).unwrap()).unwrap();
        let out = run(&c, &params, &input).unwrap();
        for (a, b) in out.amps.iter().zip(expected.data()) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn embedding_respects_qubit_order() {
        // crx with control on qubit 1 and target on qubit 0
        let g = Gate::crx(1, 0, PI);
        let mut s = StateVector::zero_state(2);
        s.amps = vec![ZERO, ONE, ZERO, ZERO]; // |01>
        s.apply_gate(&g, PI);
        assert!((s.amps[3].norm() - 1.0).abs() < 1e-12); // |11>
    }

    #[test]
    fn run_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_circuit(4, 20, &mut rng);
        let p = c.params();
        let a = StateVector::product_ry(&[0.2, 0.4, 0.6, 0.8]);
        let b = StateVector::product_ry(&[1.2, -0.4, 2.6, 0.1]);
        let (x, y) = (C64::new(0.3, -0.2), C64::new(-1.1, 0.5));
        let mix = StateVector { n: 4, amps: a.amps.iter().zip(&b.amps).map(|(u, v)| x * u + y * v).collect() };
        let lhs = run(&c, &p, &mix).unwrap();
        let (ra, rb) = (run(&c, &p, &a).unwrap(), run(&c, &p, &b).unwrap());
        for k in 0..16 {
            assert!((lhs.amps[k] - (x * ra.amps[k] + y * rb.amps[k])).norm() < 1e-10);
        }
    }

    #[test]
    fn expectation_examples() {
        let c = Circuit::new(4);
        let mut h = PauliSum::new(4);
        for q in 0..4 {
            h.add(1.0, vec![(q, Pauli::Z)]).unwrap();
        }
        assert_eq!(expectation(&c, &[], &h).unwrap(), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_circuit(4, 10, &mut rng);
        let mut id = PauliSum::new(4);
        id.add(1.7, vec![]).unwrap();
        assert!((expectation(&c, &c.params(), &id).unwrap() - 1.7).abs() < 1e-12);
        assert!(expectation(&c, &c.params(), &PauliSum::new(3)).is_err());
    }

    #[test]
    fn expectation_matches_dense_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        let c = random_circuit(n, 25, &mut rng);
        let mut h = PauliSum::new(n);
        h.add(0.7, vec![(0, Pauli::X), (3, Pauli::Y)]).unwrap();
        h.add(-1.1, vec![(2, Pauli::Z), (4, Pauli::Z)]).unwrap();
        h.add(0.4, vec![(1, Pauli::Y)]).unwrap();
        let u = c.unitary(&c.params()).unwrap();
        let psi = DenseTensor::matrix(32, 1, u.column(0)).unwrap();
        let e = psi.adjoint().matmul(&h.to_dense()).unwrap().matmul(&psi).unwrap().data()[0];
        assert!((expectation(&c, &c.params(), &h).unwrap() - e.re).abs() < 1e-9);
    }

    #[test]
    fn prob_all_zeros_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = random_circuit(3, 15, &mut rng);
        let input = StateVector::product_ry(&[0.4, 2.0, -1.0]);
        let u = c.unitary(&c.params()).unwrap();
        let amp: C64 = (0..8).map(|j| u.at(0, j) * input.amps[j]).sum();
        assert!((prob_all_zeros(&c, &c.params(), &input).unwrap() - amp.norm_sqr()).abs() < 1e-12);
        assert_eq!(prob_all_zeros(&Circuit::new(3), &[], &StateVector::zero_state(3)).unwrap(), 1.0);
    }

    #[test]
    fn encode_inputs_examples() {
        assert_eq!(encode_inputs(&[0.0; 3]).unwrap(), StateVector::zero_state(3));
        let s = encode_inputs(&[PI]).unwrap();
        assert!(s.amps[0].norm() < 1e-15 && (s.amps[1].norm() - 1.0).abs() < 1e-15);
        let x = [0.3, -1.2, 2.2, 0.9];
        let s = encode_inputs(&x).unwrap();
        let sites: Vec<Vec<C64>> = x
            .iter()
            .map(|v| vec![C64::new((v / 2.0).cos(), 0.0), C64::new((v / 2.0).sin(), 0.0)])
            .collect();
        let k = crate::mps::tests::kron_vectors(&sites);
        for (a, b) in s.amps.iter().zip(&k) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(encode_inputs(&[]).is_err());
    }

    #[test]
    fn push_rejects_bad_gates() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::ry(2, 0.0)).is_err());
        assert!(c.push(Gate::xx(1, 1, 0.0)).is_err());
        assert!(Gate::fixed(vec![0], DenseTensor::identity(4)).is_err());
        assert!(Gate::fixed(vec![0], DenseTensor::zeros(&[2, 2])).is_err());
        assert!(run(&c, &[1.0], &StateVector::zero_state(2)).is_err());
    }
}
