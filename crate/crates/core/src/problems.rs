//! Problem instances: weighted MaxCut, the transverse-field Ising chain,
//! Pauli Hamiltonians read from text, PCA for classifier inputs, and exact
//! ground states to check against.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::StateVector;
use crate::error::{Error, Result};
use crate::mps::TwoSiteTerm;
use crate::pauli::{Pauli, PauliSum, PauliTerm};
use crate::tensor::{hermitian_eig, real_symmetric_eig, DenseTensor, C64};

/// Seed of the bundled six-vertex instance.
pub const DEFAULT_GRAPH_SEED: u64 = 2021;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u == v || u >= n || v >= n {
                return Err(Error::invalid(format!("bad edge ({u}, {v}) in a {n}-vertex graph")));
            }
            if !w.is_finite() {
                return Err(Error::invalid(format!("edge ({u}, {v}) has weight {w}")));
            }
        }
        Ok(WeightedGraph { n, edges })
    }

    /// The complete graph on six vertices with weights drawn uniformly from
    /// `[0, 1)` by a fixed seed.
    pub fn default_instance() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_GRAPH_SEED);
        let mut edges = Vec::new();
        for u in 0..6 {
            for v in u + 1..6 {
                edges.push((u, v, rng.random::<f64>()));
            }
        }
        WeightedGraph { n: 6, edges }
    }

    /// Parses `u v w` lines; `#` starts a comment. The vertex count is one
    /// more than the largest index unless `n` is given.
    pub fn parse(text: &str, name: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { path: name.to_string(), line: k + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `u v w`, got {line:?}")));
            }
            let u: usize = fields[0].parse().map_err(|_| err(format!("bad vertex {:?}", fields[0])))?;
            let v: usize = fields[1].parse().map_err(|_| err(format!("bad vertex {:?}", fields[1])))?;
            let w: f64 = fields[2].parse().map_err(|_| err(format!("bad weight {:?}", fields[2])))?;
            if u == v || !w.is_finite() {
                return Err(err("self-loop or non-finite weight".into()));
            }
            edges.push((u, v, w));
        }
        let inferred = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
        WeightedGraph::new(n.unwrap_or(inferred), edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WeightedGraph::parse(&text, &path.display().to_string(), None)
    }

    pub fn to_text(&self) -> String {
        self.edges.iter().map(|(u, v, w)| format!("{u} {v} {w:?}\n")).collect()
    }

    /// Total weight of edges whose endpoints differ in `bits`, where vertex
    /// `q` is bit `n - 1 - q` (vertex 0 is the most significant bit).
    pub fn cut_value(&self, bits: usize) -> f64 {
        let bit = |q: usize| (bits >> (self.n - 1 - q)) & 1;
        self.edges.iter().filter(|&&(u, v, _)| bit(u) != bit(v)).map(|e| e.2).sum()
    }
}

/// `H = sum w_uv (1 - Z_u Z_v)`. Its maximum eigenvalue is twice the
/// maximum cut, so the cut of a state is `<H> / 2`.
pub fn maxcut_hamiltonian(g: &WeightedGraph) -> PauliSum {
    let mut h = PauliSum::new(g.n);
    for &(u, v, w) in &g.edges {
        h.add(w, vec![]).expect("finite weight");
        h.add(-w, vec![(u, Pauli::Z), (v, Pauli::Z)]).expect("distinct vertices");
    }
    h
}

pub const BRUTE_FORCE_CAP: usize = 24;

/// Exhaustive maximum cut. Returns the smallest bitstring that attains the
/// maximum and its value.
pub fn brute_force_maxcut(g: &WeightedGraph) -> Result<(usize, f64)> {
    if g.n > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge { what: "brute-force maxcut", n: g.n, cap: BRUTE_FORCE_CAP });
    }
    let mut best = (0usize, g.cut_value(0));
    for b in 1..1usize << g.n {
        let c = g.cut_value(b);
        if c > best.1 {
            best = (b, c);
        }
    }
    Ok(best)
}

/// Bitstring of `bits` over `n` vertices, vertex 0 first.
pub fn bitstring(bits: usize, n: usize) -> String {
    (0..n).map(|q| if (bits >> (n - 1 - q)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// `H = -j sum Z_i Z_{i+1} - g sum X_i` on an open chain, both as a Pauli
/// sum and as nearest-neighbour terms. Each field is shared equally by the
/// bonds that touch its site.
pub fn tfim_hamiltonian(n: usize, j: f64, g: f64) -> Result<(PauliSum, Vec<TwoSiteTerm>)> {
    if n < 2 {
        return Err(Error::invalid("the chain needs at least two sites"));
    }
    if !j.is_finite() || !g.is_finite() {
        return Err(Error::invalid("non-finite coupling"));
    }
    let mut h = PauliSum::new(n);
    for i in 0..n - 1 {
        h.add(-j, vec![(i, Pauli::Z), (i + 1, Pauli::Z)])?;
    }
    for i in 0..n {
        h.add(-g, vec![(i, Pauli::X)])?;
    }
    let (z, x, id) = (Pauli::Z.matrix(), Pauli::X.matrix(), DenseTensor::identity(2));
    let bonds_at = |i: usize| if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
    let mut terms = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let mut t = z.kron(&z).scale(C64::new(-j, 0.0));
        t = t.add(&x.kron(&id).scale(C64::new(-g / bonds_at(i), 0.0)))?;
        t = t.add(&id.kron(&x).scale(C64::new(-g / bonds_at(i + 1), 0.0)))?;
        terms.push(TwoSiteTerm::new(i, i + 1, t)?);
    }
    Ok((h, terms))
}

/// The MaxCut operator as two-site terms for imaginary-time evolution,
/// multiplied by `sign`.
pub fn maxcut_terms(g: &WeightedGraph, sign: f64) -> Result<Vec<TwoSiteTerm>> {
    let z = Pauli::Z.matrix();
    let zz = z.kron(&z);
    let id = DenseTensor::identity(4);
    g.edges
        .iter()
        .map(|&(u, v, w)| {
            let (i, j) = (u.min(v), u.max(v));
            let h = id.sub(&zz)?.scale(C64::new(sign * w, 0.0));
            TwoSiteTerm::new(i, j, h)
        })
        .collect()
}

/// Parses `<coeff> [<P><q>]*` lines. Blank lines and `#` comments are
/// skipped; the qubit count is one more than the largest index (at least 1).
pub fn parse_pauli_hamiltonian(text: &str, name: &str) -> Result<PauliSum> {
    let mut terms = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: name.to_string(), line: k + 1, msg };
        let mut fields = line.split_whitespace();
        let ctok = fields.next().expect("non-empty line");
        if ctok.contains(['j', 'J', 'i', 'I']) && !ctok.eq_ignore_ascii_case("inf") {
            return Err(err(format!("complex coefficient {ctok:?} is not allowed")));
        }
        let coeff: f64 = ctok.parse().map_err(|_| err(format!("bad coefficient {ctok:?}")))?;
        if !coeff.is_finite() {
            return Err(err("non-finite coefficient".into()));
        }
        let mut ops = Vec::new();
        for f in fields {
            let mut chars = f.chars();
            let p = chars
                .next()
                .and_then(Pauli::from_symbol)
                .ok_or_else(|| err(format!("bad Pauli factor {f:?}")))?;
            let q: usize = chars.as_str().parse().map_err(|_| err(format!("bad qubit in {f:?}")))?;
            ops.push((q, p));
        }
        terms.push(PauliTerm::new(coeff, ops).map_err(|e| err(e.to_string()))?);
    }
    if terms.is_empty() {
        return Err(Error::Parse { path: name.to_string(), line: 0, msg: "empty operator".into() });
    }
    let n = terms.iter().filter_map(|t| t.max_qubit()).max().map_or(1, |q| q + 1);
    PauliSum::from_terms(n, terms)
}

pub fn load_pauli_hamiltonian(path: impl AsRef<Path>) -> Result<PauliSum> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pauli_hamiltonian(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Unit vectors, largest eigenvalue first.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Subtracted before projecting; zero for the uncentered variant.
    pub mean: Vec<f64>,
}

/// Principal components of the rows of `x` from the eigenvectors of
/// `X^T X`. With `center` the column means are removed first. Each
/// component's largest-magnitude entry is made positive.
pub fn pca_fit(x: &[Vec<f64>], center: bool) -> Result<PcaModel> {
    if x.len() < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::shape("samples have differing or zero length"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample value"));
    }
    let mean: Vec<f64> = if center {
        (0..d).map(|c| x.iter().map(|r| r[c]).sum::<f64>() / x.len() as f64).collect()
    } else {
        vec![0.0; d]
    };
    let mut sigma = vec![0.0; d * d];
    for r in x {
        let xc: Vec<f64> = r.iter().zip(&mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            for j in 0..d {
                sigma[i * d + j] += xc[i] * xc[j];
            }
        }
    }
    let (vals, vecs) = real_symmetric_eig(&sigma, d)?;
    let mut components = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for k in (0..d).rev() {
        let mut u: Vec<f64> = (0..d).map(|i| vecs[i * d + k]).collect();
        let lead = (0..d).fold(0, |b, i| if u[i].abs() > u[b].abs() { i } else { b });
        if u[lead] < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(u);
        eigenvalues.push(vals[k]);
    }
    Ok(PcaModel { components, eigenvalues, mean })
}

/// Inner products of the (centered) sample with the top `k` components.
pub fn pca_project(m: &PcaModel, x: &[f64], k: usize) -> Result<Vec<f64>> {
    if x.len() != m.mean.len() {
        return Err(Error::shape(format!("sample has {} values, model expects {}", x.len(), m.mean.len())));
    }
    if k > m.components.len() {
        return Err(Error::invalid(format!("{k} components requested, {} available", m.components.len())));
    }
    Ok(m.components[..k]
        .iter()
        .map(|u| u.iter().zip(x).zip(&m.mean).map(|((a, b), c)| a * (b - c)).sum())
        .collect())
}

pub const EXACT_CAP: usize = 14;
/// Above this size the ground state comes from Lanczos instead of a dense
/// eigensolver.
const DENSE_EXACT_CAP: usize = 8;

/// Smallest eigenvalue of `h` and a unit eigenvector.
pub fn exact_ground(h: &PauliSum) -> Result<(f64, StateVector)> {
    let n = h.num_qubits();
    if n > EXACT_CAP {
        return Err(Error::TooLarge { what: "exact diagonalization", n, cap: EXACT_CAP });
    }
    if n <= DENSE_EXACT_CAP {
        let (vals, vecs) = hermitian_eig(&h.to_dense())?;
        return Ok((vals[0], StateVector::from_amplitudes(n, vecs.column(0))?));
    }
    lanczos_ground(h)
}

/// Lanczos with full reorthogonalization from a seeded random start.
fn lanczos_ground(h: &PauliSum) -> Result<(f64, StateVector)> {
    let n = h.num_qubits();
    let dim = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    normalize(&mut v);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    let max_steps = dim.min(400);
    let mut last = f64::INFINITY;
    for step in 0..max_steps {
        let mut w = h.apply(&v);
        let a = dot(&v, &w).re;
        basis.push(v.clone());
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let p = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let bnext = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let k = alpha.len();
        if step % 10 == 9 || bnext < 1e-12 || k == max_steps {
            let (vals, _) = tridiagonal_eig(&alpha, &beta)?;
            if (vals[0] - last).abs() < 1e-13 * vals[0].abs().max(1.0) || bnext < 1e-12 {
                break;
            }
            last = vals[0];
        }
        beta.push(bnext);
        v = w.into_iter().map(|z| z / bnext).collect();
    }
    let k = alpha.len();
    let (vals, vecs) = tridiagonal_eig(&alpha, &beta[..k - 1])?;
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    for (i, b) in basis.iter().enumerate() {
        let c = vecs[i * k];
        psi.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
    }
    normalize(&mut psi);
    let residual = {
        let hp = h.apply(&psi);
        hp.iter().zip(&psi).map(|(a, b)| (a - b * vals[0]).norm_sqr()).sum::<f64>().sqrt()
    };
    if residual > 1e-6 {
        return Err(Error::Numerical(format!("Lanczos did not converge (residual {residual:.2e})")));
    }
    Ok((vals[0], StateVector::from_amplitudes(n, psi)?))
}

fn tridiagonal_eig(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = alpha.len();
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alpha[i];
        if i + 1 < k {
            t[i * k + i + 1] = beta[i];
            t[(i + 1) * k + i] = beta[i];
        }
    }
    real_symmetric_eig(&t, k)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= n);
}
