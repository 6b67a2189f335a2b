use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::tensor::{scale_columns, scale_rows, svd_truncated, DenseTensor, C64, ONE, ZERO};

/// Matrix product operator with site tensors `(left, out, in, right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mpo {
    tensors: Vec<DenseTensor>,
}

/// Relative singular-value cutoff used when compressing operators.
const COMPRESS_CUTOFF: f64 = 1e-13;

impl Mpo {
    pub fn new(tensors: Vec<DenseTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::invalid("an MPO needs at least one site"));
        }
        let n = tensors.len();
        for (k, t) in tensors.iter().enumerate() {
            if t.rank() != 4 || t.shape()[1] != 2 || t.shape()[2] != 2 {
                return Err(Error::shape(format!("MPO site {k} has shape {:?}", t.shape())));
            }
            if k + 1 < n && t.shape()[3] != tensors[k + 1].shape()[0] {
                return Err(Error::shape(format!("MPO bond after site {k} mismatched")));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors[n - 1].shape()[3] != 1 {
            return Err(Error::shape("MPO boundary bonds must have dimension 1"));
        }
        Ok(Mpo { tensors })
    }

    /// Exact operator form of a Pauli sum, compressed losslessly.
    pub fn from_pauli_sum(h: &PauliSum) -> Result<Self> {
        let mut m = Mpo::from_pauli_sum_uncompressed(h)?;
        m.compress();
        Ok(m)
    }

    /// One bond channel per term.
    pub fn from_pauli_sum_uncompressed(h: &PauliSum) -> Result<Self> {
        let n = h.num_qubits();
        if n == 0 {
            return Err(Error::invalid("operator on zero qubits"));
        }
        let terms = h.terms();
        if terms.is_empty() {
            return Mpo::new(vec![DenseTensor::zeros(&[1, 2, 2, 1]); n]);
        }
        let nt = terms.len();
        let mut tensors = Vec::with_capacity(n);
        for k in 0..n {
            let l = if k == 0 { 1 } else { nt };
            let r = if k + 1 == n { 1 } else { nt };
            let mut w = DenseTensor::zeros(&[l, 2, 2, r]);
            for (t, term) in terms.iter().enumerate() {
                let op = match term.op_on(k) {
                    Some(p) => p.matrix(),
                    None => DenseTensor::identity(2),
                };
                let c = if k == 0 { C64::new(term.coeff, 0.0) } else { ONE };
                let (li, ri) = (if k == 0 { 0 } else { t }, if k + 1 == n { 0 } else { t });
                for s in 0..2 {
                    for u in 0..2 {
                        let v = op.at(s, u) * c;
                        if v != ZERO {
                            let old = w.get(&[li, s, u, ri]);
                            w.set(&[li, s, u, ri], old + v);
                        }
                    }
                }
            }
            tensors.push(w);
        }
        Mpo::new(tensors)
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

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.shape()[3]).collect()
    }

    /// Removes numerically empty bond channels with a left and a right SVD
    /// sweep.
    pub fn compress(&mut self) {
        let n = self.len();
        for k in 0..n.saturating_sub(1) {
            let (l, r) = (self.tensors[k].shape()[0], self.tensors[k].shape()[3]);
            let m = self.tensors[k].clone().reshape(&[l * 4, r]).unwrap();
            let svd = svd_truncated(&m, usize::MAX, 0.0).unwrap();
            let keep = kept(&svd.s);
            let u = svd.u.leading_columns(keep);
            let sv = scale_rows(&svd.v.leading_rows(keep), &svd.s[..keep]);
            self.tensors[k] = u.reshape(&[l, 2, 2, keep]).unwrap();
            let r2 = self.tensors[k + 1].shape()[3];
            let next = self.tensors[k + 1].clone().reshape(&[r, 4 * r2]).unwrap();
            self.tensors[k + 1] = sv.matmul(&next).unwrap().reshape(&[keep, 2, 2, r2]).unwrap();
        }
        for k in (1..n).rev() {
            let (l, r) = (self.tensors[k].shape()[0], self.tensors[k].shape()[3]);
            let m = self.tensors[k].clone().reshape(&[l, 4 * r]).unwrap();
            let svd = svd_truncated(&m, usize::MAX, 0.0).unwrap();
            let keep = kept(&svd.s);
            let us = scale_columns(&svd.u.leading_columns(keep), &svd.s[..keep]);
            self.tensors[k] = svd.v.leading_rows(keep).reshape(&[keep, 2, 2, r]).unwrap();
            let l0 = self.tensors[k - 1].shape()[0];
            let prev = self.tensors[k - 1].clone().reshape(&[l0 * 4, l]).unwrap();
            self.tensors[k - 1] = prev.matmul(&us).unwrap().reshape(&[l0, 2, 2, keep]).unwrap();
        }
    }

    /// Dense `2^n x 2^n` matrix; `n` is capped at 12.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let n = self.len();
        if n > 12 {
            return Err(Error::TooLarge { what: "dense MPO", n, cap: 12 });
        }
        // acc axes: (out, in, bond)
        let mut acc = DenseTensor::new(vec![1, 1, 1], vec![ONE])?;
        for w in &self.tensors {
            let (d, b) = (acc.shape()[0], acc.shape()[2]);
            let r = w.shape()[3];
            let wm = w.clone().reshape(&[b, 4 * r])?;
            let next = acc.reshape(&[d * d, b])?.matmul(&wm)?; // (out, in, s, t, r)
            acc = next
                .reshape(&[d, d, 2, 2, r])?
                .permute(&[0, 2, 1, 3, 4])
                .reshape(&[d * 2, d * 2, r])?;
        }
        let d = acc.shape()[0];
        acc.reshape(&[d, d])
    }
}

fn kept(s: &[f64]) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > COMPRESS_CUTOFF * smax).count().max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::tests::tfim_dense_free;
    use crate::pauli::Pauli;

    #[test]
    fn dense_form_matches_pauli_sum() {
        let mut h = PauliSum::new(4);
        h.add(0.3, vec![(0, Pauli::X), (3, Pauli::Y)]).unwrap();
        h.add(-1.2, vec![(1, Pauli::Z), (2, Pauli::Z)]).unwrap();
        h.add(0.5, vec![]).unwrap();
        h.add(0.9, vec![(2, Pauli::Y)]).unwrap();
        let dense = h.to_dense();
        let raw = Mpo::from_pauli_sum_uncompressed(&h).unwrap();
        assert!(raw.to_dense().unwrap().max_abs_diff(&dense) < 1e-14);
        let c = Mpo::from_pauli_sum(&h).unwrap();
        let cd = c.to_dense().unwrap();
        assert!(cd.max_abs_diff(&dense) < 1e-12);
        assert!(cd.hermiticity_error() < 1e-12);
    }

    #[test]
    fn tfim_compresses_to_bond_three() {
        let h = tfim_dense_free(8, 1.0, 1.0);
        let m = Mpo::from_pauli_sum(&h).unwrap();
        assert!(m.bond_dims().iter().all(|&b| b == 3), "{:?}", m.bond_dims());
        assert!(m.to_dense().unwrap().max_abs_diff(&h.to_dense()) < 1e-12);
    }

    #[test]
    fn empty_sum_is_zero_operator() {
        let m = Mpo::from_pauli_sum(&PauliSum::new(3)).unwrap();
        assert!(m.to_dense().unwrap().norm() == 0.0);
    }

    #[test]
    fn single_site_operator() {
        let mut h = PauliSum::new(1);
        h.add(2.0, vec![(0, Pauli::X)]).unwrap();
        h.add(1.0, vec![]).unwrap();
        let m = Mpo::from_pauli_sum(&h).unwrap();
        assert!(m.to_dense().unwrap().max_abs_diff(&h.to_dense()) < 1e-14);
    }
}
