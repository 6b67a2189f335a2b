//! Two-qubit KAK (Cartan) decomposition.
//!
//! Every `U` in U(4) factors as
//! `e^{i phi} (A1 (x) A0) exp(-i (kx XX + ky YY + kz ZZ)) (B1 (x) B0)`.
//! The magic basis turns local gates into real orthogonal matrices and makes
//! the interaction diagonal, so the factorization reduces to diagonalizing
//! the symmetric unitary `M = Up^T Up`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::{Error, Result};
use crate::pauli::Pauli;
use crate::tensor::{determinant, real_symmetric_eig, svd_truncated, tol, DenseTensor, C64, ONE, ZERO};

/// Largest reconstruction error accepted from [`kak_decompose`].
const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Slack on the Weyl chamber boundaries.
const CHAMBER_EPS: f64 = 1e-12;

/// Single-qubit gates are `rz(a[2]) ry(a[1]) rz(a[0])`, so `a[0]` acts
/// first. "Left" is the first qubit of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KakAngles {
    pub pre_left: [f64; 3],
    pub pre_right: [f64; 3],
    pub post_left: [f64; 3],
    pub post_right: [f64; 3],
    /// `(kx, ky, kz)` of `exp(-i (kx XX + ky YY + kz ZZ))`.
    pub interaction: [f64; 3],
    pub global_phase: f64,
}

impl KakAngles {
    pub fn identity() -> KakAngles {
        KakAngles {
            pre_left: [0.0; 3],
            pre_right: [0.0; 3],
            post_left: [0.0; 3],
            post_right: [0.0; 3],
            interaction: [0.0; 3],
            global_phase: 0.0,
        }
    }

    /// `pi/4 >= kx >= ky >= |kz|`, up to `eps`.
    pub fn in_weyl_chamber(&self, eps: f64) -> bool {
        let [x, y, z] = self.interaction;
        x <= FRAC_PI_4 + eps && x >= y - eps && y >= z.abs() - eps
    }
}

pub fn zyz_matrix(a: [f64; 3]) -> DenseTensor {
    let rz = |t: f64| Gate::rz(0, t).matrix(t);
    let ry = Gate::ry(0, a[1]).matrix(a[1]);
    rz(a[2]).matmul(&ry).unwrap().matmul(&rz(a[0])).unwrap()
}

/// `exp(-i (kx XX + ky YY + kz ZZ))`.
pub fn interaction_matrix(k: [f64; 3]) -> DenseTensor {
    let xx = Gate::xx(0, 1, 2.0 * k[0]).matrix(2.0 * k[0]);
    let yy = Gate::yy(0, 1, 2.0 * k[1]).matrix(2.0 * k[1]);
    let zz = Gate::zz(0, 1, 2.0 * k[2]).matrix(2.0 * k[2]);
    xx.matmul(&yy).unwrap().matmul(&zz).unwrap()
}

pub fn kak_reconstruct(a: &KakAngles) -> DenseTensor {
    let pre = zyz_matrix(a.pre_left).kron(&zyz_matrix(a.pre_right));
    let post = zyz_matrix(a.post_left).kron(&zyz_matrix(a.post_right));
    post.matmul(&interaction_matrix(a.interaction))
        .unwrap()
        .matmul(&pre)
        .unwrap()
        .scale(C64::from_polar(1.0, a.global_phase))
}

/// Columns `|Phi+>, i|Phi->, i|Psi+>, |Psi->`.
fn magic_basis() -> DenseTensor {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, FRAC_1_SQRT_2);
    #[rustfmt::skip]
    let data = vec![
        r,  i,    ZERO, ZERO,
        ZERO, ZERO, i,  r,
        ZERO, ZERO, i,  -r,
        r,  -i,   ZERO, ZERO,
    ];
    DenseTensor::matrix(4, 4, data).unwrap()
}

fn pauli(axis: usize) -> DenseTensor {
    [Pauli::X, Pauli::Y, Pauli::Z][axis].matrix()
}

/// Diagonal of `P (x) P` in the magic basis; each entry is +1 or -1.
fn magic_diagonal(axis: usize, b: &DenseTensor) -> [f64; 4] {
    let p = pauli(axis);
    let d = b.adjoint().matmul(&p.kron(&p)).unwrap().matmul(b).unwrap();
    [d.at(0, 0).re, d.at(1, 1).re, d.at(2, 2).re, d.at(3, 3).re]
}

/// Real orthogonal `P` (determinant +1) with `P^T M P` diagonal, for a
/// symmetric unitary `M`. Its real and imaginary parts commute, so a generic
/// real combination of them shares their eigenvectors.
fn diagonalize_symmetric_unitary(m: &DenseTensor) -> Result<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for c in [1.0, 0.618_033_988_7, 2.718_281_828, -1.414_213_562, 0.318_309_886, 5.0] {
        let s: Vec<f64> = m.data().iter().map(|z| z.re + c * z.im).collect();
        let (_, p) = real_symmetric_eig(&s, 4)?;
        let off = off_diagonal(m, &p);
        if best.as_ref().is_none_or(|(b, _)| off < *b) {
            best = Some((off, p));
        }
        if off < 1e-12 {
            break;
        }
    }
    let (off, mut p) = best.expect("at least one trial");
    if off > 1e-7 {
        return Err(Error::Numerical(format!(
            "could not diagonalize the magic-basis square (residual {off:.2e})"
        )));
    }
    let pc = DenseTensor::from_fn(&[4, 4], |ix| C64::new(p[ix[0] * 4 + ix[1]], 0.0));
    if determinant(&pc)?.re < 0.0 {
        for r in 0..4 {
            p[r * 4] = -p[r * 4];
        }
    }
    Ok(p)
}

fn conjugate_real(m: &DenseTensor, p: &[f64]) -> DenseTensor {
    // P^T M P
    DenseTensor::from_fn(&[4, 4], |ix| {
        let (i, j) = (ix[0], ix[1]);
        let mut acc = ZERO;
        for a in 0..4 {
            for b in 0..4 {
                acc += m.at(a, b) * (p[a * 4 + i] * p[b * 4 + j]);
            }
        }
        acc
    })
}

fn off_diagonal(m: &DenseTensor, p: &[f64]) -> f64 {
    let d = conjugate_real(m, p);
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                worst = worst.max(d.at(i, j).norm());
            }
        }
    }
    worst
}

/// Splits a 4x4 local unitary into `a (x) b`, both unitary.
fn factor_local(k: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    // realign K[(a b), (c d)] as R[(a c), (b d)], which has rank one
    let r = DenseTensor::from_fn(&[4, 4], |ix| {
        let (a, c) = (ix[0] >> 1, ix[0] & 1);
        let (b, d) = (ix[1] >> 1, ix[1] & 1);
        k.at(2 * a + b, 2 * c + d)
    });
    let svd = svd_truncated(&r, 1, 0.0)?;
    let s0 = svd.s[0].sqrt();
    let a = DenseTensor::from_fn(&[2, 2], |ix| svd.u.at(2 * ix[0] + ix[1], 0) * s0);
    let b = DenseTensor::from_fn(&[2, 2], |ix| svd.v.at(0, 2 * ix[0] + ix[1]) * s0);
    let scale = determinant(&a)?.norm().sqrt();
    if !(scale > 0.0) {
        return Err(Error::Numerical("local factor is singular".into()));
    }
    Ok((a.scale(C64::new(1.0 / scale, 0.0)), b.scale(C64::new(scale, 0.0))))
}

/// ZYZ angles of a 2x2 unitary, ignoring its global phase.
pub fn zyz_angles(w: &DenseTensor) -> [f64; 3] {
    let det = w.at(0, 0) * w.at(1, 1) - w.at(0, 1) * w.at(1, 0);
    let ph = C64::from_polar(1.0, -det.arg() / 2.0);
    // special unitary form [[a, -b*], [b, a*]]
    let (a, b) = (w.at(0, 0) * ph, w.at(1, 0) * ph);
    let gamma = 2.0 * b.norm().atan2(a.norm());
    let beta = b.arg() - a.arg();
    let delta = -a.arg() - b.arg();
    [delta, gamma, beta]
}

/// Tracks `U = K1 N(k) K2` while the interaction coefficients move into
/// the Weyl chamber. Scalar factors are dropped; the global phase is fixed
/// at the end.
struct Canonicalizer {
    k: [f64; 3],
    k1: DenseTensor,
    k2: DenseTensor,
}

impl Canonicalizer {
    /// `k[axis] -> k[axis] + pi/2`, compensated by `P (x) P` on the right.
    fn shift(&mut self, axis: usize, times: i64) {
        self.k[axis] += times as f64 * FRAC_PI_2;
        if times.rem_euclid(2) == 1 {
            let p = pauli(axis);
            self.k2 = p.kron(&p).matmul(&self.k2).unwrap();
        }
    }

    /// Negates two coefficients by conjugating with the third Pauli on
    /// the first qubit.
    fn flip(&mut self, a: usize, b: usize) {
        let c = 3 - a - b;
        let op = pauli(c).kron(&DenseTensor::identity(2));
        self.k1 = self.k1.matmul(&op).unwrap();
        self.k2 = op.matmul(&self.k2).unwrap();
        self.k[a] = -self.k[a];
        self.k[b] = -self.k[b];
    }

    /// Exchanges two coefficients by a quarter turn about the third axis on
    /// both qubits.
    fn swap(&mut self, a: usize, b: usize) {
        let c = 3 - a - b;
        let r = DenseTensor::identity(2)
            .scale(C64::new(FRAC_1_SQRT_2, 0.0))
            .add(&pauli(c).scale(C64::new(0.0, -FRAC_1_SQRT_2)))
            .unwrap();
        let rr = r.kron(&r);
        self.k1 = self.k1.matmul(&rr.adjoint()).unwrap();
        self.k2 = rr.matmul(&self.k2).unwrap();
        self.k.swap(a, b);
    }

    fn run(&mut self) {
        for axis in 0..3 {
            let mut m = -(self.k[axis] / FRAC_PI_2).round() as i64;
            let reduced = self.k[axis] + m as f64 * FRAC_PI_2;
            if reduced <= -FRAC_PI_4 + CHAMBER_EPS {
                m += 1;
            }
            self.shift(axis, m);
        }
        for (a, b) in [(0, 1), (1, 2), (0, 1)] {
            if self.k[b].abs() > self.k[a].abs() {
                self.swap(a, b);
            }
        }
        if self.k[0] < 0.0 {
            self.flip(0, 2);
        }
        if self.k[1] < 0.0 {
            self.flip(1, 2);
        }
        if self.k[2] < 0.0 && (self.k[0] - FRAC_PI_4).abs() < CHAMBER_EPS {
            self.flip(0, 2);
            self.shift(0, 1);
        }
    }
}

/// KAK decomposition with the interaction in the Weyl chamber
/// `pi/4 >= kx >= ky >= |kz|`. `kak_reconstruct` of the result equals `u`
/// including its global phase.
pub fn kak_decompose(u: &DenseTensor) -> Result<KakAngles> {
    if u.shape() != [4, 4] {
        return Err(Error::shape(format!("KAK needs a 4x4 matrix, got {:?}", u.shape())));
    }
    let dev = u.unitarity_error();
    if dev > tol::UNITARY {
        return Err(Error::NotUnitary(dev));
    }
    let det = determinant(u)?;
    let us = u.scale(C64::from_polar(1.0, -det.arg() / 4.0));
    let b = magic_basis();
    let up = b.adjoint().matmul(&us)?.matmul(&b)?;
    let m = up.transpose().matmul(&up)?;
    let p = diagonalize_symmetric_unitary(&m)?;
    let d = conjugate_real(&m, &p);

    let mut lam: Vec<f64> = (0..4).map(|j| d.at(j, j).arg() / 2.0).collect();
    // det(Up) = 1 forces sum(lam) to a multiple of pi; make it even so the
    // orthogonal factor below has determinant +1
    let turns = (lam.iter().sum::<f64>() / PI).round() as i64;
    if turns.rem_euclid(2) == 1 {
        lam[0] += PI;
    }
    let pm = DenseTensor::from_fn(&[4, 4], |ix| C64::new(p[ix[0] * 4 + ix[1]], 0.0));
    let ainv = DenseTensor::from_fn(&[4, 4], |ix| {
        if ix[0] == ix[1] {
            C64::from_polar(1.0, -lam[ix[0]])
        } else {
            ZERO
        }
    });
    let q = up.matmul(&pm)?.matmul(&ainv)?;
    let k1 = b.matmul(&q)?.matmul(&b.adjoint())?;
    let k2 = b.matmul(&pm.transpose())?.matmul(&b.adjoint())?;

    let mut k = [0.0; 3];
    for (axis, ka) in k.iter_mut().enumerate() {
        let dg = magic_diagonal(axis, &b);
        *ka = -(0..4).map(|j| lam[j] * dg[j]).sum::<f64>() / 4.0;
    }
    let mut canon = Canonicalizer { k, k1, k2 };
    canon.run();

    let (post_l, post_r) = factor_local(&canon.k1)?;
    let (pre_l, pre_r) = factor_local(&canon.k2)?;
    let mut angles = KakAngles {
        pre_left: zyz_angles(&pre_l),
        pre_right: zyz_angles(&pre_r),
        post_left: zyz_angles(&post_l),
        post_right: zyz_angles(&post_r),
        interaction: canon.k,
        global_phase: 0.0,
    };
    let r0 = kak_reconstruct(&angles);
    angles.global_phase = r0.adjoint().matmul(u)?.trace().arg();
    let err = kak_reconstruct(&angles).max_abs_diff(u);
    if !(err <= RECONSTRUCTION_TOL) {
        return Err(Error::Numerical(format!("KAK reconstruction error {err:.2e}")));
    }
    Ok(angles)
}

/// Reference matrices used in tests and docs.
pub fn cnot() -> DenseTensor {
    let mut m = DenseTensor::zeros(&[4, 4]);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        *m.at_mut(r, c) = ONE;
    }
    m
}

pub fn swap_gate() -> DenseTensor {
    let mut m = DenseTensor::zeros(&[4, 4]);
    for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        *m.at_mut(r, c) = ONE;
    }
    m
}
