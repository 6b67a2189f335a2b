//! Approximate circuits for bond-4 MPS.
//!
//! A bond-4 site would need a three-qubit gate. Each one is replaced by two
//! nearest-neighbour gates, first on `(k+1, k+2)` and then on `(k, k+1)`,
//! followed by a final gate on `(n-2, n-1)`. The gates are fitted to the
//! target state one at a time: with every other gate fixed the overlap is
//! `tr(G E)` for an environment `E`, maximized over unitaries by the polar
//! factor of `E`. Each update can only raise the fidelity.

use serde::{Deserialize, Serialize};

use super::{kak_decompose, mps_to_staircase, Placement, StaircaseGate};
use crate::circuit::StateVector;
use crate::error::{Error, Result};
use crate::mps::{Mps, DENSE_CAP};
use crate::tensor::{polar_unitary, DenseTensor, ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCompilation {
    pub n: usize,
    /// Gates on `(k+1, k+2)` for `k = 0..n-2`, applied first.
    pub adjacent: Vec<StaircaseGate>,
    /// Gates on `(k, k+1)` for `k = 0..n-2`, then the final `(n-2, n-1)` gate.
    pub main: Vec<StaircaseGate>,
    pub fidelity: f64,
    /// Fidelity of the bond-2 truncation the fit starts from.
    pub truncation_fidelity: f64,
    /// Fidelity before the first sweep and after every sweep.
    pub trace: Vec<f64>,
}

impl ApproxCompilation {
    /// Adjacent gate `k` in sublayer `k + 1`, main gate `k` in `k + 2`,
    /// the final gate in sublayer `n`.
    pub fn placements(&self) -> Vec<Placement> {
        let mut out = Vec::with_capacity(self.adjacent.len() + self.main.len());
        for (k, g) in self.adjacent.iter().enumerate() {
            out.push(Placement { sublayer: k + 1, pair: k + 1, angles: g.angles });
        }
        for (k, g) in self.main.iter().enumerate() {
            let sublayer = if k + 1 == self.main.len() { self.n } else { k + 2 };
            out.push(Placement { sublayer, pair: g.qubits[0], angles: g.angles });
        }
        out
    }
}

struct Layout {
    qubits: Vec<[usize; 2]>,
    gates: Vec<DenseTensor>,
}

impl Layout {
    fn state(&self, n: usize) -> Result<StateVector> {
        let mut s = StateVector::zero_state(n);
        for (q, g) in self.qubits.iter().zip(&self.gates) {
            s.apply_matrix(q, g)?;
        }
        Ok(s)
    }
}

/// `E[b, a] = sum_rest R[b, rest] conj(L[a, rest])` for the pair `q`.
fn environment(r: &StateVector, l: &StateVector, q: [usize; 2]) -> DenseTensor {
    let n = r.num_qubits();
    let (b0, b1) = (1usize << (n - 1 - q[0]), 1usize << (n - 1 - q[1]));
    let (ra, la) = (r.amplitudes(), l.amplitudes());
    let mut e = vec![ZERO; 16];
    for base in 0..ra.len() {
        if base & (b0 | b1) != 0 {
            continue;
        }
        let idx = [base, base | b1, base | b0, base | b0 | b1];
        for b in 0..4 {
            for a in 0..4 {
                e[b * 4 + a] += ra[idx[b]] * la[idx[a]].conj();
            }
        }
    }
    DenseTensor::matrix(4, 4, e).expect("4x4")
}

/// Fits the two-diagonal layout to `s` (bond at most 4) for `iterations`
/// sweeps, starting from the compiled bond-2 truncation with identity
/// adjacent gates.
pub fn approx_compile_chi4(s: &Mps, iterations: usize) -> Result<ApproxCompilation> {
    let n = s.len();
    if n < 3 {
        return Err(Error::invalid("the bond-4 layout needs at least three qubits"));
    }
    if s.max_bond() > 4 {
        return Err(Error::BondTooLarge { found: s.max_bond(), max: 4 });
    }
    let amps = s.to_dense_capped(DENSE_CAP)?;
    let nrm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(nrm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let target = StateVector::from_amplitudes(n, amps.iter().map(|z| z / nrm).collect())?;

    let (t2, truncation_fidelity) = s.truncate(2)?;
    let stair = mps_to_staircase(&t2)?;
    let mut layout = Layout { qubits: Vec::new(), gates: Vec::new() };
    for k in 0..n - 2 {
        layout.qubits.push([k + 1, k + 2]);
        layout.gates.push(DenseTensor::identity(4));
        layout.qubits.push([k, k + 1]);
        layout.gates.push(stair.gates[k].unitary());
    }
    layout.qubits.push([n - 2, n - 1]);
    layout.gates.push(stair.gates[n - 2].unitary());

    let fid = |l: &Layout| -> Result<f64> { Ok(target.fidelity(&l.state(n)?)) };
    let mut trace = Vec::with_capacity(iterations + 1);
    trace.push(fid(&layout)?);
    let m = layout.gates.len();
    for _ in 0..iterations {
        // pulled-back targets: backs[i] = (G_{m-1} ... G_{i+1})^dag target
        let mut backs = vec![target.clone(); m];
        for i in (0..m - 1).rev() {
            let mut v = backs[i + 1].clone();
            v.apply_matrix(&layout.qubits[i + 1], &layout.gates[i + 1].adjoint())?;
            backs[i] = v;
        }
        let mut fwd = StateVector::zero_state(n);
        for i in 0..m {
            let e = environment(&fwd, &backs[i], layout.qubits[i]);
            layout.gates[i] = polar_unitary(&e)?;
            fwd.apply_matrix(&layout.qubits[i], &layout.gates[i])?;
        }
        trace.push(target.fidelity(&fwd));
    }
    let fidelity = *trace.last().expect("non-empty");
    if !fidelity.is_finite() {
        return Err(Error::Numerical("fit produced a non-finite fidelity".into()));
    }

    let gate = |i: usize| -> Result<StaircaseGate> {
        Ok(StaircaseGate { qubits: layout.qubits[i], angles: kak_decompose(&layout.gates[i])? })
    };
    let mut adjacent = Vec::with_capacity(n - 2);
    let mut main = Vec::with_capacity(n - 1);
    for k in 0..n - 2 {
        adjacent.push(gate(2 * k)?);
        main.push(gate(2 * k + 1)?);
    }
    main.push(gate(m - 1)?);
    Ok(ApproxCompilation { n, adjacent, main, fidelity, truncation_fidelity, trace })
}

#[cfg(test)]
mod tests {
    use super::super::{brickwall_circuit, min_depth, OffDiagonal};
    use super::*;
    use crate::circuit::run;
    use crate::mps::tests::random_raw_mps;

    #[test]
    fn zero_iterations_give_the_truncation() {
        let s = Mps::random_complex(6, 4, 2).unwrap();
        let a = approx_compile_chi4(&s, 0).unwrap();
        assert_eq!(a.trace.len(), 1);
        assert!((a.fidelity - a.truncation_fidelity).abs() < 1e-6);
    }

    #[test]
    fn fit_improves_monotonically() {
        for seed in 0..3 {
            let s = random_raw_mps(6, 4, 50 + seed);
            let a = approx_compile_chi4(&s, 30).unwrap();
            assert!(a.fidelity >= a.truncation_fidelity - 1e-12);
            for w in a.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{:?}", a.trace);
            }
            assert!(a.fidelity > a.truncation_fidelity);
        }
    }

    #[test]
    fn bond_two_input_stays_exact() {
        let s = random_raw_mps(5, 2, 9);
        let a = approx_compile_chi4(&s, 3).unwrap();
        assert!((a.truncation_fidelity - 1.0).abs() < 1e-10);
        assert!((a.fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn brickwall_reproduces_fitted_state() {
        let s = random_raw_mps(6, 4, 77);
        let a = approx_compile_chi4(&s, 10).unwrap();
        let p = a.placements();
        let depth = min_depth(&p);
        assert_eq!(depth, 4);
        let c = brickwall_circuit(6, depth, OffDiagonal::FullKak, &p).unwrap();
        let v = run(&c, &c.params(), &StateVector::zero_state(6)).unwrap();
        let d = s.to_dense().unwrap();
        let nrm = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let t = StateVector::from_amplitudes(6, d.iter().map(|z| z / nrm).collect()).unwrap();
        assert!((t.fidelity(&v) - a.fidelity).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            approx_compile_chi4(&Mps::random(8, 8, 1).unwrap(), 1),
            Err(Error::BondTooLarge { max: 4, .. })
        ));
        assert!(approx_compile_chi4(&Mps::random(2, 2, 1).unwrap(), 1).is_err());
    }
}
