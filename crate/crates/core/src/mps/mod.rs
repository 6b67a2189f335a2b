//! Matrix product states over qubits.
//!
//! Site tensors have axes `(left bond, physical, right bond)` with a
//! physical dimension of 2 and boundary bonds of dimension 1. Grouping
//! `(left, physical)` into rows gives the "left" matrix of a site, grouping
//! `(physical, right)` into columns gives its "right" matrix; both are plain
//! reshapes of the row-major storage.

mod dmrg;
mod io;
mod mpo;
mod tebd;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use dmrg::{dmrg_ground_state, DmrgResult};
pub use io::MpsDocument;
pub use mpo::Mpo;
pub use tebd::{tebd_imaginary, TwoSiteTerm};

use crate::error::{Error, Result};
use crate::tensor::{contract, qr_thin, scale_columns, svd_truncated, tol, DenseTensor, C64, ZERO};

/// Largest qubit count `to_dense` accepts by default.
pub const DENSE_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalForm {
    None,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    tensors: Vec<DenseTensor>,
    /// Orthogonality center when the state is in mixed-canonical form.
    center: Option<usize>,
}

impl Mps {
    /// Builds an MPS from site tensors, checking bond consistency.
    pub fn new(tensors: Vec<DenseTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::invalid("an MPS needs at least one site"));
        }
        let n = tensors.len();
        for (k, t) in tensors.iter().enumerate() {
            if t.rank() != 3 {
                return Err(Error::shape(format!("site {k} has rank {}", t.rank())));
            }
            if t.shape()[1] != 2 {
                return Err(Error::shape(format!("site {k} has physical dimension {}", t.shape()[1])));
            }
            if k + 1 < n && t.shape()[2] != tensors[k + 1].shape()[0] {
                return Err(Error::shape(format!(
                    "bond between sites {k} and {} mismatched: {} vs {}",
                    k + 1,
                    t.shape()[2],
                    tensors[k + 1].shape()[0]
                )));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors[n - 1].shape()[2] != 1 {
            return Err(Error::shape("boundary bonds must have dimension 1"));
        }
        Ok(Mps { tensors, center: None })
    }

    /// Product state with site `k` in `(cos a_k, sin a_k)`.
    pub fn product_state(angles: &[f64]) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("product state needs at least one qubit"));
        }
        let tensors = angles
            .iter()
            .map(|&a| {
                DenseTensor::new(vec![1, 2, 1], vec![C64::new(a.cos(), 0.0), C64::new(a.sin(), 0.0)])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut s = Mps::new(tensors)?;
        s.center = Some(0);
        Ok(s)
    }

    /// Product state from arbitrary (normalized) single-site vectors.
    pub fn from_site_vectors(vectors: &[[C64; 2]]) -> Result<Self> {
        let tensors = vectors
            .iter()
            .map(|v| DenseTensor::new(vec![1, 2, 1], v.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Mps::new(tensors)
    }

    /// Random state with real standard-normal entries, normalized and right
    /// canonical. Bonds are `min(chi, 2^(k+1), 2^(n-k-1))`.
    pub fn random(n: usize, chi: usize, seed: u64) -> Result<Self> {
        if n == 0 || chi == 0 {
            return Err(Error::invalid("random MPS needs n >= 1 and chi >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bonds = max_bonds(n, chi);
        let tensors = (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { bonds[k - 1] };
                let r = if k + 1 == n { 1 } else { bonds[k] };
                DenseTensor::from_fn(&[l, 2, r], |_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    C64::new(x, 0.0)
                })
            })
            .collect();
        Mps::new(tensors)?.canonicalize(CanonicalForm::Right)
    }

    /// Random state with complex standard-normal entries.
    pub fn random_complex(n: usize, chi: usize, seed: u64) -> Result<Self> {
        if n == 0 || chi == 0 {
            return Err(Error::invalid("random MPS needs n >= 1 and chi >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bonds = max_bonds(n, chi);
        let tensors = (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { bonds[k - 1] };
                let r = if k + 1 == n { 1 } else { bonds[k] };
                DenseTensor::from_fn(&[l, 2, r], |_| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    C64::new(a, b)
                })
            })
            .collect();
        Mps::new(tensors)?.canonicalize(CanonicalForm::Right)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn tensor(&self, k: usize) -> &DenseTensor {
        &self.tensors[k]
    }

    /// Dimensions of the `n - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn canonical_form(&self) -> CanonicalForm {
        match self.center {
            Some(c) if c + 1 == self.len() => CanonicalForm::Left,
            Some(0) => CanonicalForm::Right,
            _ => CanonicalForm::None,
        }
    }

    /// Deviation of site `k` from the left isometry condition.
    pub fn left_isometry_error(&self, k: usize) -> f64 {
        let t = &self.tensors[k];
        let (l, _, r) = dims(t);
        t.clone().reshape(&[l * 2, r]).unwrap().isometry_error()
    }

    /// Deviation of site `k` from the right isometry condition.
    pub fn right_isometry_error(&self, k: usize) -> f64 {
        let t = &self.tensors[k];
        let (l, _, r) = dims(t);
        t.clone().reshape(&[l, 2 * r]).unwrap().adjoint().isometry_error()
    }

    /// Returns the state in the requested canonical form, normalized.
    pub fn canonicalize(&self, form: CanonicalForm) -> Result<Mps> {
        let mut s = self.clone();
        let target = match form {
            CanonicalForm::Left => s.len() - 1,
            CanonicalForm::Right => 0,
            CanonicalForm::None => return Ok(s),
        };
        s.move_center(target);
        s.normalize_center()?;
        Ok(s)
    }

    /// Moves the orthogonality center to `target` with QR steps; the norm
    /// is left untouched.
    pub(crate) fn move_center(&mut self, target: usize) {
        let n = self.len();
        match self.center {
            None => {
                for k in 0..target {
                    self.left_qr_step(k);
                }
                for k in (target + 1..n).rev() {
                    self.right_qr_step(k);
                }
            }
            Some(c) if c <= target => {
                for k in c..target {
                    self.left_qr_step(k);
                }
            }
            Some(c) => {
                for k in (target + 1..=c).rev() {
                    self.right_qr_step(k);
                }
            }
        }
        self.center = Some(target);
    }

    /// Makes site `k` a left isometry, pushing the remainder into `k + 1`.
    fn left_qr_step(&mut self, k: usize) {
        let (l, _, r) = dims(&self.tensors[k]);
        let m = self.tensors[k].clone().reshape(&[l * 2, r]).unwrap();
        let (q, rr) = qr_thin(&m);
        let kdim = q.cols();
        self.tensors[k] = q.reshape(&[l, 2, kdim]).unwrap();
        let (_, _, r2) = dims(&self.tensors[k + 1]);
        let next = self.tensors[k + 1].clone().reshape(&[r, 2 * r2]).unwrap();
        self.tensors[k + 1] = rr.matmul(&next).unwrap().reshape(&[kdim, 2, r2]).unwrap();
    }

    /// Makes site `k` a right isometry, pushing the remainder into `k - 1`.
    fn right_qr_step(&mut self, k: usize) {
        let (l, _, r) = dims(&self.tensors[k]);
        let m = self.tensors[k].clone().reshape(&[l, 2 * r]).unwrap();
        let (q, rr) = qr_thin(&m.adjoint());
        let kdim = q.cols();
        self.tensors[k] = q.adjoint().reshape(&[kdim, 2, r]).unwrap();
        let (l0, _, _) = dims(&self.tensors[k - 1]);
        let prev = self.tensors[k - 1].clone().reshape(&[l0 * 2, l]).unwrap();
        self.tensors[k - 1] = prev.matmul(&rr.adjoint()).unwrap().reshape(&[l0, 2, kdim]).unwrap();
    }

    fn normalize_center(&mut self) -> Result<f64> {
        let c = self.center.expect("normalize needs a center");
        let nrm = self.tensors[c].norm();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        self.tensors[c] = self.tensors[c].scale(C64::new(1.0 / nrm, 0.0));
        Ok(nrm)
    }

    pub fn norm(&self) -> f64 {
        overlap_unchecked(self, self).re.max(0.0).sqrt()
    }

    /// Dense amplitude vector (qubit 0 most significant).
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        self.to_dense_capped(DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<Vec<C64>> {
        let n = self.len();
        if n > cap {
            return Err(Error::TooLarge { what: "dense MPS contraction", n, cap });
        }
        let mut acc = DenseTensor::new(vec![1, 1], vec![C64::new(1.0, 0.0)])?;
        for t in &self.tensors {
            let (l, _, r) = dims(t);
            let rows = acc.rows();
            let m = t.clone().reshape(&[l, 2 * r])?;
            acc = acc.matmul(&m)?.reshape(&[rows * 2, r])?;
        }
        Ok(acc.into_data())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.len() != other.len() {
            return Err(Error::shape(format!(
                "overlap of MPS with {} and {} sites",
                self.len(),
                other.len()
            )));
        }
        Ok(overlap_unchecked(self, other))
    }

    /// `<self| H |self>`, real part.
    pub fn expectation(&self, h: &Mpo) -> Result<f64> {
        Ok(self.expectation_complex(h)?.re)
    }

    pub fn expectation_complex(&self, h: &Mpo) -> Result<C64> {
        if self.len() != h.len() {
            return Err(Error::shape(format!(
                "MPS has {} sites but operator has {}",
                self.len(),
                h.len()
            )));
        }
        let mut env = DenseTensor::new(vec![1, 1, 1], vec![C64::new(1.0, 0.0)])?;
        for (a, w) in self.tensors.iter().zip(h.tensors()) {
            env = transfer_operator(&env, a, w, a)?;
        }
        Ok(env.data()[0])
    }

    /// Applies a 4x4 gate to sites `(site, site + 1)`, splits the result with
    /// a truncated SVD and renormalizes.
    pub fn apply_two_site_gate(
        &self,
        gate: &DenseTensor,
        site: usize,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<Mps> {
        let n = self.len();
        if site + 1 >= n {
            return Err(Error::invalid(format!("two-site gate at {site} on {n} sites")));
        }
        check_gate(gate)?;
        let mut s = self.clone();
        s.move_center(site);
        let theta = contract(&s.tensors[site], &s.tensors[site + 1], &[2], &[0])?;
        let (l, r) = (theta.shape()[0], theta.shape()[3]);
        let g = gate.clone().reshape(&[2, 2, 2, 2])?;
        let theta = contract(&g, &theta, &[2, 3], &[1, 2])?.permute(&[2, 0, 1, 3]);
        let m = theta.reshape(&[l * 2, 2 * r])?;
        let svd = svd_truncated(&m, chi_max, cutoff)?;
        let nrm = svd.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let s_norm: Vec<f64> = svd.s.iter().map(|x| x / nrm).collect();
        let k = s_norm.len();
        s.tensors[site] = scale_columns(&svd.u, &s_norm).reshape(&[l, 2, k])?;
        s.tensors[site + 1] = svd.v.reshape(&[k, 2, r])?;
        s.center = Some(site);
        Ok(s)
    }

    /// Applies a 4x4 gate to sites `i < j`, which need not be adjacent. The
    /// gate is spread over the sites in between as a small operator string
    /// and the touched region is recompressed to `chi_max`.
    pub fn apply_gate(
        &self,
        gate: &DenseTensor,
        i: usize,
        j: usize,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<Mps> {
        if i >= j || j >= self.len() {
            return Err(Error::invalid(format!("gate sites ({i}, {j}) on {} sites", self.len())));
        }
        if j == i + 1 {
            return self.apply_two_site_gate(gate, i, chi_max, cutoff);
        }
        check_gate(gate)?;
        // operator Schmidt decomposition: g = sum_k A_k (x) B_k
        let g = gate.clone().reshape(&[2, 2, 2, 2])?.permute(&[0, 2, 1, 3]).reshape(&[4, 4])?;
        let svd = svd_truncated(&g, 4, tol::SVD_CUTOFF)?;
        let kk = svd.s.len();
        let a = scale_columns(&svd.u, &svd.s);
        let mut ops = Vec::with_capacity(j - i + 1);
        ops.push(DenseTensor::from_fn(&[1, 2, 2, kk], |ix| a.at(ix[1] * 2 + ix[2], ix[3])));
        for _ in i + 1..j {
            ops.push(DenseTensor::from_fn(&[kk, 2, 2, kk], |ix| {
                if ix[0] == ix[3] && ix[1] == ix[2] {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }));
        }
        ops.push(DenseTensor::from_fn(&[kk, 2, 2, 1], |ix| svd.v.at(ix[0], ix[1] * 2 + ix[2])));

        let mut s = self.clone();
        s.move_center(i);
        for (off, w) in ops.iter().enumerate() {
            let k = i + off;
            s.tensors[k] = apply_site_operator(&s.tensors[k], w)?;
        }
        s.center = None;
        s.compress_region(i, j, chi_max, cutoff)?;
        Ok(s)
    }

    /// Recompresses sites `i..=j` assuming everything left of `i` is left
    /// canonical and everything right of `j` right canonical. Leaves the
    /// center at `i`, normalized.
    fn compress_region(&mut self, i: usize, j: usize, chi_max: usize, cutoff: f64) -> Result<()> {
        for k in i..j {
            self.left_qr_step(k);
        }
        for k in (i + 1..=j).rev() {
            self.right_svd_step(k, chi_max, cutoff)?;
        }
        self.center = Some(i);
        self.normalize_center()?;
        Ok(())
    }

    /// Truncating version of `right_qr_step`.
    fn right_svd_step(&mut self, k: usize, chi_max: usize, cutoff: f64) -> Result<()> {
        let (l, _, r) = dims(&self.tensors[k]);
        let m = self.tensors[k].clone().reshape(&[l, 2 * r])?;
        let svd = svd_truncated(&m, chi_max, cutoff)?;
        let kdim = svd.s.len();
        self.tensors[k] = svd.v.reshape(&[kdim, 2, r])?;
        let us = scale_columns(&svd.u, &svd.s);
        let (l0, _, _) = dims(&self.tensors[k - 1]);
        let prev = self.tensors[k - 1].clone().reshape(&[l0 * 2, l])?;
        self.tensors[k - 1] = prev.matmul(&us)?.reshape(&[l0, 2, kdim])?;
        Ok(())
    }

    /// Truncates every bond to `chi_max` and renormalizes. Returns the new
    /// state (right canonical) and the retained fidelity `|<new|old>|^2`.
    pub fn truncate(&self, chi_max: usize) -> Result<(Mps, f64)> {
        if chi_max < 1 {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        let orig = self.canonicalize(CanonicalForm::Left)?;
        let mut s = orig.clone();
        let n = s.len();
        for k in (1..n).rev() {
            s.right_svd_step(k, chi_max, 0.0)?;
        }
        s.center = Some(0);
        s.normalize_center()?;
        let fid = s.overlap(&orig)?.norm_sqr();
        Ok((s, fid.min(1.0)))
    }

    /// Scales every tensor so the state is unit-norm; keeps the center.
    pub fn normalized(&self) -> Result<Mps> {
        let nrm = self.norm();
        if !(nrm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let mut s = self.clone();
        let k = s.center.unwrap_or(0);
        s.tensors[k] = s.tensors[k].scale(C64::new(1.0 / nrm, 0.0));
        Ok(s)
    }

    /// The same state in a seeded random complex gauge: a Haar-like unitary
    /// `U` on every bond (`A_k -> A_k U`, `A_{k+1} -> U^dag A_{k+1}`) and a
    /// random global phase. Canonical forms and the center survive.
    pub fn randomize_gauge(&self, seed: u64) -> Result<Mps> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = || -> C64 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            C64::new(a, b)
        };
        let mut s = self.clone();
        for k in 0..s.len() - 1 {
            let r = s.tensors[k].shape()[2];
            let u = qr_thin(&DenseTensor::from_fn(&[r, r], |_| gauss())).0;
            let (a, b) = (&s.tensors[k], &s.tensors[k + 1]);
            let (l, _, _) = dims(a);
            let (_, _, rr) = dims(b);
            let a2 = DenseTensor::from_fn(&[l, 2, r], |ix| (0..r).map(|m| a.get(&[ix[0], ix[1], m]) * u.at(m, ix[2])).sum());
            let b2 = DenseTensor::from_fn(&[r, 2, rr], |ix| {
                (0..r).map(|m| u.at(m, ix[0]).conj() * b.get(&[m, ix[1], ix[2]])).sum()
            });
            s.tensors[k] = a2;
            s.tensors[k + 1] = b2;
        }
        let phase = gauss();
        let phase = if phase.norm() > 0.0 { phase / phase.norm() } else { C64::new(1.0, 0.0) };
        s.tensors[0] = s.tensors[0].scale(phase);
        Ok(s)
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<DenseTensor> {
        &mut self.tensors
    }

    pub(crate) fn set_center(&mut self, center: Option<usize>) {
        self.center = center;
    }
}

pub(crate) fn dims(t: &DenseTensor) -> (usize, usize, usize) {
    (t.shape()[0], t.shape()[1], t.shape()[2])
}

/// Largest useful bond dimensions for `n` qubits capped at `chi`.
pub fn max_bonds(n: usize, chi: usize) -> Vec<usize> {
    (0..n.saturating_sub(1))
        .map(|k| {
            let left = 1usize.checked_shl((k + 1).min(62) as u32).unwrap_or(usize::MAX);
            let right = 1usize.checked_shl((n - k - 1).min(62) as u32).unwrap_or(usize::MAX);
            chi.min(left).min(right)
        })
        .collect()
}

fn check_gate(g: &DenseTensor) -> Result<()> {
    if g.shape() != [4, 4] {
        return Err(Error::shape(format!("two-site gate must be 4x4, got {:?}", g.shape())));
    }
    Ok(())
}

/// `N[(l,wl), s, (r,wr)] = sum_t W[wl, s, t, wr] A[l, t, r]`.
pub(crate) fn apply_site_operator(a: &DenseTensor, w: &DenseTensor) -> Result<DenseTensor> {
    let (l, _, r) = dims(a);
    let (wl, wr) = (w.shape()[0], w.shape()[3]);
    contract(a, w, &[1], &[2])?.permute(&[0, 2, 3, 1, 4]).reshape(&[l * wl, 2, r * wr])
}

fn overlap_unchecked(a: &Mps, b: &Mps) -> C64 {
    let mut env = DenseTensor::new(vec![1, 1], vec![C64::new(1.0, 0.0)]).unwrap();
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        let t = contract(&env, tb, &[1], &[0]).unwrap();
        env = contract(&ta.conj(), &t, &[0, 1], &[0, 1]).unwrap();
    }
    env.data()[0]
}

/// One step of `<bra| W |ket>` from the left: `env` has axes
/// `(bra bond, operator bond, ket bond)`.
pub(crate) fn transfer_operator(
    env: &DenseTensor,
    bra: &DenseTensor,
    w: &DenseTensor,
    ket: &DenseTensor,
) -> Result<DenseTensor> {
    let t1 = contract(env, ket, &[2], &[0])?; // (a, w, t, rb)
    let t2 = contract(&t1, w, &[1, 2], &[0, 2])?; // (a, rb, s, rw)
    let t3 = contract(&bra.conj(), &t2, &[0, 1], &[0, 2])?; // (ra, rb, rw)
    Ok(t3.permute(&[0, 2, 1]))
}

/// Right-side analogue of `transfer_operator`; `env` has axes
/// `(bra bond, operator bond, ket bond)` on the right of the site.
pub(crate) fn transfer_operator_right(
    env: &DenseTensor,
    bra: &DenseTensor,
    w: &DenseTensor,
    ket: &DenseTensor,
) -> Result<DenseTensor> {
    let t1 = contract(ket, env, &[2], &[2])?; // (lb, t, a, w)
    let t2 = contract(&t1, w, &[1, 3], &[2, 3])?; // (lb, a, lw, s)
    let t3 = contract(&bra.conj(), &t2, &[1, 2], &[3, 1])?; // (la, lb, lw)
    Ok(t3.permute(&[0, 2, 1]))
}
