use super::Mps;
use crate::error::{Error, Result};
use crate::tensor::{hermitian_expm, tol, DenseTensor, C64};

/// A Hermitian 4x4 term acting on qubits `i < j`. Nearest-neighbour terms
/// have `j = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteTerm {
    pub i: usize,
    pub j: usize,
    pub h: DenseTensor,
}

impl TwoSiteTerm {
    pub fn new(i: usize, j: usize, h: DenseTensor) -> Result<Self> {
        if i >= j {
            return Err(Error::invalid(format!("two-site term needs i < j, got ({i}, {j})")));
        }
        if h.shape() != [4, 4] {
            return Err(Error::shape(format!("two-site term must be 4x4, got {:?}", h.shape())));
        }
        let dev = h.hermiticity_error();
        if dev > tol::HERMITIAN * h.norm().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(TwoSiteTerm { i, j, h })
    }

    pub fn is_nearest_neighbour(&self) -> bool {
        self.j == self.i + 1
    }
}

/// First-order Trotterized imaginary-time evolution. Each step applies
/// `exp(-dtau h)` for every even bond, then every odd bond, then every
/// longer-range term in input order, renormalizing after each gate.
pub fn tebd_imaginary(
    s: &Mps,
    terms: &[TwoSiteTerm],
    dtau: f64,
    steps: usize,
    chi_max: usize,
) -> Result<Mps> {
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::invalid(format!("dtau must be positive, got {dtau}")));
    }
    if chi_max < 1 {
        return Err(Error::invalid("chi_max must be at least 1"));
    }
    let n = s.len();
    let mut ordered: Vec<&TwoSiteTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        let dev = t.h.hermiticity_error();
        if t.h.shape() != [4, 4] || dev > tol::HERMITIAN * t.h.norm().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        if t.i >= t.j || t.j >= n {
            return Err(Error::invalid(format!("term on ({}, {}) for {n} sites", t.i, t.j)));
        }
    }
    ordered.extend(terms.iter().filter(|t| t.is_nearest_neighbour() && t.i % 2 == 0));
    ordered.extend(terms.iter().filter(|t| t.is_nearest_neighbour() && t.i % 2 == 1));
    ordered.extend(terms.iter().filter(|t| !t.is_nearest_neighbour()));
    let gates = ordered
        .iter()
        .map(|t| Ok((t.i, t.j, hermitian_expm(&t.h, C64::new(-dtau, 0.0))?)))
        .collect::<Result<Vec<_>>>()?;

    let mut state = s.clone();
    for _ in 0..steps {
        for (i, j, g) in &gates {
            state = state.apply_gate(g, *i, *j, chi_max, tol::SVD_CUTOFF)?;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::tests::tfim_dense_free;
    use crate::mps::Mpo;
    use crate::pauli::Pauli;
    use crate::tensor::hermitian_eig;

    fn zz_x_terms(n: usize, j: f64, g: f64) -> Vec<TwoSiteTerm> {
        let z = Pauli::Z.matrix();
        let x = Pauli::X.matrix();
        let id = DenseTensor::identity(2);
        (0..n - 1)
            .map(|i| {
                let mut h = z.kron(&z).scale(C64::new(-j, 0.0));
                // split single-site fields so each site is counted once
                let wl = if i == 0 { 1.0 } else { 0.5 };
                let wr = if i + 1 == n - 1 { 1.0 } else { 0.5 };
                h = h.add(&x.kron(&id).scale(C64::new(-g * wl, 0.0))).unwrap();
                h = h.add(&id.kron(&x).scale(C64::new(-g * wr, 0.0))).unwrap();
                TwoSiteTerm::new(i, i + 1, h).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_steps_is_identity() {
        let s = Mps::random_complex(4, 2, 1).unwrap();
        let out = tebd_imaginary(&s, &zz_x_terms(4, 1.0, 1.0), 1e-3, 0, 4).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = Mps::product_state(&[0.0; 3]).unwrap();
        let terms = zz_x_terms(3, 1.0, 1.0);
        assert!(tebd_imaginary(&s, &terms, 0.0, 1, 4).is_err());
        assert!(tebd_imaginary(&s, &terms, -1e-3, 1, 4).is_err());
        let bad = DenseTensor::from_fn(&[4, 4], |ix| C64::new((ix[0] * 4 + ix[1]) as f64, 0.0));
        assert!(TwoSiteTerm::new(0, 1, bad.clone()).is_err());
        let sneaky = TwoSiteTerm { i: 0, j: 1, h: bad };
        assert!(matches!(tebd_imaginary(&s, &[sneaky], 1e-3, 1, 4), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn tfim_converges_to_exact_ground_energy() {
        let n = 4;
        let h = tfim_dense_free(n, 1.0, 1.0);
        let exact = hermitian_eig(&h.to_dense()).unwrap().0[0];
        let mpo = Mpo::from_pauli_sum(&h).unwrap();
        let s0 = Mps::product_state(&[std::f64::consts::FRAC_PI_4; 4]).unwrap();
        let out = tebd_imaginary(&s0, &zz_x_terms(n, 1.0, 1.0), 1e-2, 500, 8).unwrap();
        let e = out.expectation(&mpo).unwrap();
        assert!((e - exact).abs() < 1e-4, "{e} vs {exact}");
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn energy_does_not_increase() {
        let n = 6;
        let h = tfim_dense_free(n, 1.0, 0.8);
        let mpo = Mpo::from_pauli_sum(&h).unwrap();
        let s0 = Mps::random(n, 2, 3).unwrap();
        let e0 = s0.expectation(&mpo).unwrap();
        let out = tebd_imaginary(&s0, &zz_x_terms(n, 1.0, 0.8), 1e-3, 30, 8).unwrap();
        assert!(out.expectation(&mpo).unwrap() <= e0 + 1e-6);
    }

    #[test]
    fn long_range_terms_are_applied() {
        // a single ZZ coupling between the ends favours parallel spins
        let z = Pauli::Z.matrix();
        let term = TwoSiteTerm::new(0, 3, z.kron(&z).scale(C64::new(-1.0, 0.0))).unwrap();
        let mut hs = crate::pauli::PauliSum::new(4);
        hs.add(-1.0, vec![(0, Pauli::Z), (3, Pauli::Z)]).unwrap();
        let mpo = Mpo::from_pauli_sum(&hs).unwrap();
        let s0 = Mps::product_state(&[std::f64::consts::FRAC_PI_4; 4]).unwrap();
        let out = tebd_imaginary(&s0, &[term], 1e-2, 400, 4).unwrap();
        assert!(out.expectation(&mpo).unwrap() < -0.99);
    }
}
