//! Compiling MPS into circuits of two-qubit gates.
//!
//! A bond-2 MPS in right-canonical form is produced exactly by a staircase
//! of `n - 1` nearest-neighbour unitaries: the gate on `(k, k + 1)` reads the
//! incoming bond from qubit `k`, writes the physical index there and the
//! outgoing bond onto the fresh qubit `k + 1`. Every gate is stored through
//! its KAK angles so it maps onto a fixed parametrized block.

mod approx;
mod kak;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use approx::{approx_compile_chi4, ApproxCompilation};
pub use kak::{
    cnot, interaction_matrix, kak_decompose, kak_reconstruct, swap_gate, zyz_angles, zyz_matrix,
    KakAngles,
};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::mps::{dims, CanonicalForm, Mps};
use crate::tensor::{tol, DenseTensor, C64, ONE, ZERO};

/// Parameters in one KAK block: two ZYZ triples before, the interaction,
/// two ZYZ triples after.
pub const KAK_BLOCK_PARAMS: usize = 15;
/// Parameters in one `ry`-`crx` block.
pub const RY_CRX_BLOCK_PARAMS: usize = 4;

/// Completes an isometry (orthonormal columns) to a unitary. New columns
/// come from Gram-Schmidt on the canonical basis vectors in index order.
pub fn embed_isometry(v: &DenseTensor) -> Result<DenseTensor> {
    if v.rank() != 2 || v.rows() < v.cols() || v.cols() == 0 {
        return Err(Error::shape(format!("cannot embed a {:?} isometry", v.shape())));
    }
    let dev = v.isometry_error();
    if dev > tol::UNITARY {
        return Err(Error::NotIsometry(dev));
    }
    let d = v.rows();
    let mut cols: Vec<Vec<C64>> = (0..v.cols()).map(|j| v.column(j)).collect();
    // a basis vector whose residual exceeds this keeps the result well
    // conditioned; some vector always qualifies while 1/sqrt(d) > threshold
    let threshold = 1e-3;
    for e in 0..d {
        if cols.len() == d {
            break;
        }
        let mut w = vec![ZERO; d];
        w[e] = ONE;
        for _ in 0..2 {
            for c in &cols {
                let proj: C64 = c.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, ci) in w.iter_mut().zip(c) {
                    *wi -= proj * ci;
                }
            }
        }
        let nrm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > threshold {
            cols.push(w.into_iter().map(|z| z / nrm).collect());
        }
    }
    Ok(DenseTensor::from_fn(&[d, d], |ix| cols[ix[1]][ix[0]]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseGate {
    pub qubits: [usize; 2],
    pub angles: KakAngles,
}

impl StaircaseGate {
    pub fn unitary(&self) -> DenseTensor {
        kak_reconstruct(&self.angles)
    }
}

/// Exact circuit for a bond-2 MPS. The gates are applied in list order to
/// `|0...0>`; the single-qubit rotation that finishes the last site is
/// folded into the last gate. With `adjoint` set the list holds the
/// inverse circuit, mapping the state back to `|0...0>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledStaircase {
    pub n: usize,
    pub gates: Vec<StaircaseGate>,
    pub adjoint: bool,
}

/// Where a compiled gate sits in a brick wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub sublayer: usize,
    /// The gate acts on `(pair, pair + 1)`.
    pub pair: usize,
    pub angles: KakAngles,
}

/// Isometry `V[(s, b), a] = B[a, s, b]` with the outgoing bond padded to
/// `out_bond`.
fn site_isometry(b: &DenseTensor, out_bond: usize) -> Result<DenseTensor> {
    let (l, _, r) = dims(b);
    DenseTensor::from_fn(&[2 * out_bond, l], |ix| {
        let (s, bb) = (ix[0] / out_bond, ix[0] % out_bond);
        if bb < r {
            b.get(&[ix[1], s, bb])
        } else {
            ZERO
        }
    })
    .reshape(&[2 * out_bond, l])
}

pub fn mps_to_staircase(s: &Mps) -> Result<CompiledStaircase> {
    let n = s.len();
    if n < 2 {
        return Err(Error::invalid("a staircase needs at least two qubits"));
    }
    if s.max_bond() > 2 {
        return Err(Error::BondTooLarge { found: s.max_bond(), max: 2 });
    }
    let r = s.canonicalize(CanonicalForm::Right)?;
    let swap = swap_gate();
    let mut mats = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let v = site_isometry(r.tensor(k), 2)?;
        mats.push(embed_isometry(&v)?.matmul(&swap)?);
    }
    let w = embed_isometry(&site_isometry(r.tensor(n - 1), 1)?)?;
    let last = mats.pop().expect("n >= 2");
    mats.push(DenseTensor::identity(2).kron(&w).matmul(&last)?);
    let gates = mats
        .iter()
        .enumerate()
        .map(|(k, m)| Ok(StaircaseGate { qubits: [k, k + 1], angles: kak_decompose(m)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompiledStaircase { n, gates, adjoint: false })
}

impl CompiledStaircase {
    /// The inverse circuit: reversed order, every gate inverted.
    pub fn adjoint(&self) -> Result<CompiledStaircase> {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(|g| Ok(StaircaseGate { qubits: g.qubits, angles: kak_decompose(&g.unitary().adjoint())? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledStaircase { n: self.n, gates, adjoint: !self.adjoint })
    }

    /// Brick-wall slots. The forward staircase puts the gate on pair `k` in
    /// sublayer `k`; the inverse runs the diagonal the other way, shifted
    /// by one sublayer when needed to match parity.
    pub fn placements(&self) -> Vec<Placement> {
        let n = self.n;
        self.gates
            .iter()
            .map(|g| {
                let k = g.qubits[0];
                let sublayer = if self.adjoint { n - 2 - k + n % 2 } else { k };
                Placement { sublayer, pair: k, angles: g.angles }
            })
            .collect()
    }

    /// The staircase as a circuit of KAK blocks, in gate order.
    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.n);
        for g in &self.gates {
            push_kak_block(&mut c, g.qubits[0], &g.angles)?;
        }
        Ok(c)
    }
}

/// Smallest brick-wall depth that holds all placements.
pub fn min_depth(placements: &[Placement]) -> usize {
    placements.iter().map(|p| p.sublayer / 2 + 1).max().unwrap_or(0)
}

fn push_zyz(c: &mut Circuit, q: usize, a: &[f64; 3]) -> Result<()> {
    c.push(Gate::rz(q, a[0]))?;
    c.push(Gate::ry(q, a[1]))?;
    c.push(Gate::rz(q, a[2]))
}

/// Appends the 15-parameter block for `a` on `(q, q + 1)`. The global phase
/// is dropped.
pub fn push_kak_block(c: &mut Circuit, q: usize, a: &KakAngles) -> Result<()> {
    push_zyz(c, q, &a.pre_left)?;
    push_zyz(c, q + 1, &a.pre_right)?;
    c.push(Gate::xx(q, q + 1, 2.0 * a.interaction[0]))?;
    c.push(Gate::yy(q, q + 1, 2.0 * a.interaction[1]))?;
    c.push(Gate::zz(q, q + 1, 2.0 * a.interaction[2]))?;
    push_zyz(c, q, &a.post_left)?;
    push_zyz(c, q + 1, &a.post_right)
}

/// Appends `ry`, `ry`, `crx(q -> q+1)`, `crx(q+1 -> q)`, all at angle 0.
pub fn push_ry_crx_block(c: &mut Circuit, q: usize) -> Result<()> {
    c.push(Gate::ry(q, 0.0))?;
    c.push(Gate::ry(q + 1, 0.0))?;
    c.push(Gate::crx(q, q + 1, 0.0))?;
    c.push(Gate::crx(q + 1, q, 0.0))
}

/// Block used for brick-wall slots that carry no compiled gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffDiagonal {
    FullKak,
    RyCrx,
}

impl std::str::FromStr for OffDiagonal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-kak" => Ok(OffDiagonal::FullKak),
            "ry-crx" => Ok(OffDiagonal::RyCrx),
            _ => Err(Error::invalid(format!("unknown off-diagonal block {s:?}"))),
        }
    }
}

/// A brick wall of `depth` layers on `n` qubits. Each layer is a sublayer on
/// pairs `(0,1), (2,3), ...` followed by one on `(1,2), (3,4), ...`.
/// Placed slots get their compiled KAK block; the others get an
/// off-diagonal block at the identity.
pub fn brickwall_circuit(
    n: usize,
    depth: usize,
    kind: OffDiagonal,
    placements: &[Placement],
) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::invalid("a brick wall needs at least two qubits"));
    }
    if depth == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    let need = min_depth(placements);
    if depth < need {
        return Err(Error::invalid(format!(
            "depth {depth} cannot hold the compiled gates; at least {need} is needed"
        )));
    }
    let mut slots: BTreeMap<(usize, usize), &KakAngles> = BTreeMap::new();
    for p in placements {
        if p.pair + 1 >= n || p.pair % 2 != p.sublayer % 2 {
            return Err(Error::invalid(format!(
                "pair {} cannot sit in sublayer {}",
                p.pair, p.sublayer
            )));
        }
        if slots.insert((p.sublayer, p.pair), &p.angles).is_some() {
            return Err(Error::invalid(format!(
                "two gates placed at sublayer {}, pair {}",
                p.sublayer, p.pair
            )));
        }
    }
    let mut c = Circuit::new(n);
    for t in 0..2 * depth {
        for q in (t % 2..n - 1).step_by(2) {
            match (slots.get(&(t, q)), kind) {
                (Some(a), _) => push_kak_block(&mut c, q, a)?,
                (None, OffDiagonal::FullKak) => push_kak_block(&mut c, q, &KakAngles::identity())?,
                (None, OffDiagonal::RyCrx) => push_ry_crx_block(&mut c, q)?,
            }
        }
    }
    Ok(c)
}

/// Brick wall initialized from a compiled staircase.
pub fn init_brickwall(diag: &CompiledStaircase, depth: usize, kind: OffDiagonal) -> Result<Circuit> {
    brickwall_circuit(diag.n, depth, kind, &diag.placements())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{run, StateVector};
    use crate::mps::tests::random_raw_mps;
    use proptest::prelude::*;

    fn state_of(c: &Circuit) -> StateVector {
        run(c, &c.params(), &StateVector::zero_state(c.num_qubits())).unwrap()
    }

    fn fidelity_with(s: &Mps, v: &StateVector) -> f64 {
        let d = s.to_dense().unwrap();
        let ov: C64 = d.iter().zip(v.amplitudes()).map(|(a, b)| a.conj() * b).sum();
        ov.norm_sqr() / d.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    #[test]
    fn embed_isometry_examples() {
        let u = embed_isometry(&DenseTensor::identity(4)).unwrap();
        assert_eq!(u, DenseTensor::identity(4));
        let e0 = DenseTensor::matrix(4, 1, vec![ONE, ZERO, ZERO, ZERO]).unwrap();
        assert!(embed_isometry(&e0).unwrap().max_abs_diff(&DenseTensor::identity(4)) < 1e-15);
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let v = DenseTensor::matrix(4, 2, vec![h, ZERO, ZERO, h, h, ZERO, ZERO, -h]).unwrap();
        let u = embed_isometry(&v).unwrap();
        assert!(u.unitarity_error() < 1e-14);
        assert!(u.leading_columns(2).max_abs_diff(&v) < 1e-15);
        assert!(matches!(embed_isometry(&DenseTensor::zeros(&[4, 2])), Err(Error::NotIsometry(_))));
        assert!(embed_isometry(&DenseTensor::zeros(&[2, 4])).is_err());
    }

    #[test]
    fn staircase_reproduces_mps() {
        for n in 2..=8 {
            let s = random_raw_mps(n, 2, 100 + n as u64);
            let st = mps_to_staircase(&s).unwrap();
            assert_eq!(st.gates.len(), n - 1);
            let f = fidelity_with(&s, &state_of(&st.to_circuit().unwrap()));
            assert!(f > 1.0 - 1e-10, "n = {n}: {f}");
        }
    }

    #[test]
    fn product_state_compiles() {
        let s = Mps::product_state(&[0.3, 1.2, -0.7, 2.0]).unwrap();
        let st = mps_to_staircase(&s).unwrap();
        assert!(fidelity_with(&s, &state_of(&st.to_circuit().unwrap())) > 1.0 - 1e-12);
    }

    #[test]
    fn staircase_rejects_wide_bonds() {
        let s = Mps::random(6, 4, 1).unwrap();
        assert!(matches!(mps_to_staircase(&s), Err(Error::BondTooLarge { found: 4, max: 2 })));
        assert!(mps_to_staircase(&Mps::product_state(&[0.1]).unwrap()).is_err());
    }

    #[test]
    fn adjoint_maps_state_to_zero() {
        for n in [3, 4, 5] {
            let s = random_raw_mps(n, 2, 7 * n as u64);
            let st = mps_to_staircase(&s).unwrap().adjoint().unwrap();
            assert!(st.adjoint);
            let c = st.to_circuit().unwrap();
            let d = s.to_dense().unwrap();
            let nrm = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let input = StateVector::from_amplitudes(n, d.iter().map(|z| z / nrm).collect()).unwrap();
            let out = run(&c, &c.params(), &input).unwrap();
            assert!((out.amplitudes()[0].norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn brickwall_with_identity_padding_matches_staircase() {
        for n in [4, 5, 6] {
            let s = random_raw_mps(n, 2, 40 + n as u64);
            for st in [mps_to_staircase(&s).unwrap(), mps_to_staircase(&s).unwrap().adjoint().unwrap()] {
                let need = min_depth(&st.placements());
                let reference = state_of(&st.to_circuit().unwrap());
                for kind in [OffDiagonal::FullKak, OffDiagonal::RyCrx] {
                    for depth in [need, need + 2] {
                        let c = init_brickwall(&st, depth, kind).unwrap();
                        let v = state_of(&c);
                        let diff = v
                            .amplitudes()
                            .iter()
                            .zip(reference.amplitudes())
                            .map(|(a, b)| (a - b).norm())
                            .fold(0.0, f64::max);
                        assert!(diff < 1e-10);
                    }
                }
                assert!(init_brickwall(&st, need - 1, OffDiagonal::FullKak).is_err() || need == 1);
            }
        }
    }

    #[test]
    fn brickwall_parameter_counts() {
        let st = mps_to_staircase(&random_raw_mps(6, 2, 3)).unwrap();
        let c = init_brickwall(&st, 3, OffDiagonal::FullKak).unwrap();
        // 5 pairs per layer: 3 even and 2 odd
        assert_eq!(c.num_params(), 3 * 5 * KAK_BLOCK_PARAMS);
        let c = init_brickwall(&st, 3, OffDiagonal::RyCrx).unwrap();
        assert_eq!(c.num_params(), 5 * KAK_BLOCK_PARAMS + 10 * RY_CRX_BLOCK_PARAMS);
    }

    #[test]
    fn brickwall_rejects_bad_placements() {
        let a = KakAngles::identity();
        let bad = [Placement { sublayer: 1, pair: 0, angles: a }];
        assert!(brickwall_circuit(4, 2, OffDiagonal::FullKak, &bad).is_err());
        let dup = [Placement { sublayer: 0, pair: 0, angles: a }; 2];
        assert!(brickwall_circuit(4, 2, OffDiagonal::FullKak, &dup).is_err());
        assert!(brickwall_circuit(4, 0, OffDiagonal::FullKak, &[]).is_err());
        assert_eq!("ry-crx".parse::<OffDiagonal>().unwrap(), OffDiagonal::RyCrx);
        assert!("cz".parse::<OffDiagonal>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn staircase_is_exact(n in 2usize..=7, seed in any::<u64>()) {
            let s = random_raw_mps(n, 2, seed);
            let st = mps_to_staircase(&s).unwrap();
            prop_assert!(fidelity_with(&s, &state_of(&st.to_circuit().unwrap())) > 1.0 - 1e-10);
        }
    }
}
