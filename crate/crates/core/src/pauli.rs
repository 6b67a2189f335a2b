//! Real-weighted sums of Pauli strings.
//!
//! Qubit 0 is the most significant bit of a computational-basis index, so
//! for `n` qubits qubit `q` corresponds to bit `n - 1 - q`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> DenseTensor {
        let d = match self {
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        DenseTensor::matrix(2, 2, d.to_vec()).unwrap()
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// One weighted Pauli string. An empty `ops` list is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    /// Sorted by qubit, at most one entry per qubit.
    pub ops: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, mut ops: Vec<(usize, Pauli)>) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::invalid("non-finite Pauli coefficient"));
        }
        ops.sort_by_key(|&(q, _)| q);
        if ops.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("repeated qubit in Pauli string"));
        }
        Ok(PauliTerm { coeff, ops })
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.ops.last().map(|&(q, _)| q)
    }

    pub fn op_on(&self, qubit: usize) -> Option<Pauli> {
        self.ops.iter().find(|&&(q, _)| q == qubit).map(|&(_, p)| p)
    }

    /// Bit masks (flip, phase, #Y) for applying the string to basis states.
    fn masks(&self, n: usize) -> (usize, usize, u32) {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut ny = 0u32;
        for &(q, p) in &self.ops {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    phase |= bit;
                    ny += 1;
                }
                Pauli::Z => phase |= bit,
            }
        }
        (flip, phase, ny)
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coeff)?;
        for &(q, p) in &self.ops {
            write!(f, " {}{}", p.symbol(), q)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<PauliTerm>,
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum { n, terms: Vec::new() }
    }

    pub fn from_terms(n: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        let mut s = PauliSum::new(n);
        for t in terms {
            s.push(t)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, term: PauliTerm) -> Result<()> {
        if let Some(q) = term.max_qubit() {
            if q >= self.n {
                return Err(Error::invalid(format!(
                    "qubit {q} out of range for {} qubits",
                    self.n
                )));
            }
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn add(&mut self, coeff: f64, ops: Vec<(usize, Pauli)>) -> Result<()> {
        self.push(PauliTerm::new(coeff, ops)?)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn scaled(&self, a: f64) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm { coeff: t.coeff * a, ops: t.ops.clone() })
                .collect(),
        }
    }

    /// Sum of the identity coefficients.
    pub fn constant(&self) -> f64 {
        self.terms.iter().filter(|t| t.ops.is_empty()).map(|t| t.coeff).sum()
    }

    /// `H |psi>` for a state on `num_qubits()` qubits.
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), 1usize << self.n, "state length");
        let mut out = vec![ZERO; psi.len()];
        for t in &self.terms {
            let (flip, phase, ny) = t.masks(self.n);
            let base = i_pow(ny) * t.coeff;
            for (b, &amp) in psi.iter().enumerate() {
                if amp == ZERO {
                    continue;
                }
                let sign = if (b & phase).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                out[b ^ flip] += base * sign * amp;
            }
        }
        out
    }

    /// `<psi| H |psi>` as a complex number; the imaginary part is rounding.
    pub fn expectation_complex(&self, psi: &[C64]) -> C64 {
        let hpsi = self.apply(psi);
        psi.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn expectation(&self, psi: &[C64]) -> f64 {
        self.expectation_complex(psi).re
    }

    /// Dense `2^n x 2^n` matrix.
    pub fn to_dense(&self) -> DenseTensor {
        let dim = 1usize << self.n;
        let mut m = DenseTensor::zeros(&[dim, dim]);
        for t in &self.terms {
            let (flip, phase, ny) = t.masks(self.n);
            let base = i_pow(ny) * t.coeff;
            for b in 0..dim {
                let sign = if (b & phase).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                *m.at_mut(b ^ flip, b) += base * sign;
            }
        }
        m
    }

    /// Value of a diagonal (Z/identity only) operator on basis state `b`.
    pub fn diagonal_value(&self, b: usize) -> Option<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            let (flip, phase, _) = t.masks(self.n);
            if flip != 0 {
                return None;
            }
            let sign = if (b & phase).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            acc += t.coeff * sign;
        }
        Some(acc)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}
