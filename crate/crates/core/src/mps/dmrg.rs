use super::{dims, transfer_operator, transfer_operator_right, CanonicalForm, Mpo, Mps};
use crate::error::{Error, Result};
use crate::tensor::{contract, hermitian_eig, scale_columns, scale_rows, svd_truncated, tol, DenseTensor, C64, ONE};

#[derive(Debug, Clone)]
pub struct DmrgResult {
    /// Normalized, left canonical.
    pub state: Mps,
    pub energy: f64,
    /// Energy of the state at the end of every full sweep.
    pub sweep_energies: Vec<f64>,
}

/// Two-site DMRG from a seeded random state. Each sweep goes left to right
/// and back; the local problem is solved with a dense eigensolver.
pub fn dmrg_ground_state(
    h: &Mpo,
    n: usize,
    chi_max: usize,
    sweeps: usize,
    seed: u64,
) -> Result<DmrgResult> {
    if n != h.len() {
        return Err(Error::shape(format!("operator has {} sites, expected {n}", h.len())));
    }
    if chi_max < 1 || sweeps < 1 {
        return Err(Error::invalid("dmrg needs chi_max >= 1 and sweeps >= 1"));
    }
    if n == 1 {
        return single_site(h);
    }
    let ws = h.tensors();
    let mut s = Mps::random(n, chi_max, seed)?;
    let unit = DenseTensor::new(vec![1, 1, 1], vec![ONE])?;

    // left[k]: environment of sites < k; right[k]: of sites >= k
    let mut left = vec![unit.clone(); n + 1];
    let mut right = vec![unit.clone(); n + 1];
    for k in (1..n).rev() {
        right[k] = transfer_operator_right(&right[k + 1], s.tensor(k), &ws[k], s.tensor(k))?;
    }

    let mut sweep_energies = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        for k in 0..n - 1 {
            let (u, sv) = local_update(&s, ws, &left[k], &right[k + 2], k, chi_max)?;
            let t = s.tensors_mut();
            t[k] = u;
            t[k + 1] = sv;
            left[k + 1] = transfer_operator(&left[k], s.tensor(k), &ws[k], s.tensor(k))?;
        }
        for k in (0..n - 1).rev() {
            let (us, v) = local_update_right(&s, ws, &left[k], &right[k + 2], k, chi_max)?;
            let t = s.tensors_mut();
            t[k] = us;
            t[k + 1] = v;
            right[k + 1] = transfer_operator_right(&right[k + 2], s.tensor(k + 1), &ws[k + 1], s.tensor(k + 1))?;
        }
        s.set_center(Some(0));
        let e = s.expectation(h)?;
        if !e.is_finite() {
            return Err(Error::Numerical("DMRG energy is not finite".into()));
        }
        sweep_energies.push(e);
    }
    let state = s.canonicalize(CanonicalForm::Left)?;
    let energy = state.expectation(h)?;
    Ok(DmrgResult { state, energy, sweep_energies })
}

/// Updates the pair `(k, k+1)` with the lowest eigenvector of the
/// effective Hamiltonian, truncated to `chi_max`. If truncation would raise
/// the energy above that of the current pair, the current pair is kept.
/// Returns the merged tensor `(a, s1, s2, b)` split as `(U, S, V)`.
fn optimize_pair(
    s: &Mps,
    ws: &[DenseTensor],
    l: &DenseTensor,
    r: &DenseTensor,
    k: usize,
    chi_max: usize,
) -> Result<(DenseTensor, Vec<f64>, DenseTensor)> {
    let (a, _, _) = dims(s.tensor(k));
    let (_, _, b) = dims(s.tensor(k + 1));
    let t = contract(l, &ws[k], &[1], &[0])?; // (a, a', s1, t1, w1)
    let t = contract(&t, &ws[k + 1], &[4], &[0])?; // (a, a', s1, t1, s2, t2, w2)
    let t = contract(&t, r, &[6], &[1])?; // (a, a', s1, t1, s2, t2, b, b')
    let dim = a * 4 * b;
    let heff = t.permute(&[0, 2, 4, 6, 1, 3, 5, 7]).reshape(&[dim, dim])?;
    let (_, vecs) = hermitian_eig(&heff)?;
    let theta = DenseTensor::new(vec![a, 2, 2, b], vecs.column(0))?;
    let (u, sv, v) = split(&theta, chi_max)?;

    let old = contract(s.tensor(k), s.tensor(k + 1), &[2], &[0])?;
    let e_old = rayleigh(&heff, old.data());
    let merged = contract(&scale_last(&u, &sv)?, &v, &[2], &[0])?;
    let e_new = rayleigh(&heff, merged.data());
    if e_new > e_old {
        return split(&old, usize::MAX);
    }
    Ok((u, sv, v))
}

fn rayleigh(h: &DenseTensor, x: &[C64]) -> f64 {
    let n = x.len();
    let mut num = 0.0;
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            acc += h.at(i, j) * x[j];
        }
        num += (x[i].conj() * acc).re;
    }
    num / x.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

fn scale_last(u: &DenseTensor, sv: &[f64]) -> Result<DenseTensor> {
    let (a, _, kdim) = dims(u);
    scale_columns(&u.clone().reshape(&[a * 2, kdim])?, sv).reshape(&[a, 2, kdim])
}

fn split(theta: &DenseTensor, chi_max: usize) -> Result<(DenseTensor, Vec<f64>, DenseTensor)> {
    let (a, b) = (theta.shape()[0], theta.shape()[3]);
    let m = theta.clone().reshape(&[a * 2, 2 * b])?;
    let svd = svd_truncated(&m, chi_max, tol::SVD_CUTOFF)?;
    let nrm = svd.s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s: Vec<f64> = svd.s.iter().map(|x| x / nrm).collect();
    let kdim = s.len();
    Ok((svd.u.reshape(&[a, 2, kdim])?, s, svd.v.reshape(&[kdim, 2, b])?))
}

/// Left-to-right update: `(A_k, S V)`.
fn local_update(
    s: &Mps,
    ws: &[DenseTensor],
    l: &DenseTensor,
    r: &DenseTensor,
    k: usize,
    chi_max: usize,
) -> Result<(DenseTensor, DenseTensor)> {
    let (u, sv, v) = optimize_pair(s, ws, l, r, k, chi_max)?;
    let (kdim, b) = (v.shape()[0], v.shape()[2]);
    let svm = scale_rows(&v.reshape(&[kdim, 2 * b])?, &sv).reshape(&[kdim, 2, b])?;
    Ok((u, svm))
}

/// Right-to-left update: `(U S, B_{k+1})`.
fn local_update_right(
    s: &Mps,
    ws: &[DenseTensor],
    l: &DenseTensor,
    r: &DenseTensor,
    k: usize,
    chi_max: usize,
) -> Result<(DenseTensor, DenseTensor)> {
    let (u, sv, v) = optimize_pair(s, ws, l, r, k, chi_max)?;
    Ok((scale_last(&u, &sv)?, v))
}

fn single_site(h: &Mpo) -> Result<DmrgResult> {
    let m = h.tensors()[0].clone().reshape(&[2, 2])?;
    let (vals, vecs) = hermitian_eig(&m)?;
    let v = vecs.column(0);
    let state = Mps::from_site_vectors(&[[v[0], v[1]]])?.canonicalize(CanonicalForm::Left)?;
    Ok(DmrgResult { state, energy: vals[0], sweep_energies: vec![vals[0]] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::tests::tfim_dense_free;
    use crate::pauli::{Pauli, PauliSum};

    #[test]
    fn sum_z_ground_state_is_all_ones() {
        let mut h = PauliSum::new(4);
        for q in 0..4 {
            h.add(1.0, vec![(q, Pauli::Z)]).unwrap();
        }
        let mpo = Mpo::from_pauli_sum(&h).unwrap();
        let r = dmrg_ground_state(&mpo, 4, 2, 2, 7).unwrap();
        assert!((r.energy + 4.0).abs() < 1e-10);
        let v = r.state.to_dense().unwrap();
        assert!((v[15].norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tfim_critical_matches_exact() {
        let n = 8;
        let h = tfim_dense_free(n, 1.0, 1.0);
        let exact = hermitian_eig(&h.to_dense()).unwrap().0[0];
        let mpo = Mpo::from_pauli_sum(&h).unwrap();
        let r = dmrg_ground_state(&mpo, n, 16, 10, 1).unwrap();
        assert!(((r.energy - exact) / exact).abs() < 1e-6, "{} vs {exact}", r.energy);
        assert_eq!(r.state.canonical_form(), CanonicalForm::Left);
        for k in 0..n {
            assert!(r.state.left_isometry_error(k) < 1e-10);
        }
        for w in r.sweep_energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{:?}", r.sweep_energies);
        }
    }

    #[test]
    fn sweep_energies_monotone_under_truncation() {
        let n = 8;
        let h = tfim_dense_free(n, 1.0, 1.0);
        let mpo = Mpo::from_pauli_sum(&h).unwrap();
        let r = dmrg_ground_state(&mpo, n, 2, 6, 4).unwrap();
        for w in r.sweep_energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{:?}", r.sweep_energies);
        }
    }

    #[test]
    fn same_seed_same_result() {
        let h = tfim_dense_free(5, 1.0, 0.5);
        let mpo = Mpo::from_pauli_sum(&h).unwrap();
        let a = dmrg_ground_state(&mpo, 5, 4, 2, 9).unwrap();
        let b = dmrg_ground_state(&mpo, 5, 4, 2, 9).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    }

    #[test]
    fn rejects_bad_arguments() {
        let mpo = Mpo::from_pauli_sum(&tfim_dense_free(3, 1.0, 1.0)).unwrap();
        assert!(dmrg_ground_state(&mpo, 4, 2, 1, 0).is_err());
        assert!(dmrg_ground_state(&mpo, 3, 0, 1, 0).is_err());
        assert!(dmrg_ground_state(&mpo, 3, 2, 0, 0).is_err());
    }
}
