//! MPS binary classifier trained with two-site gradient sweeps.
//!
//! Each feature is lifted to `phi(x) = (cos x, sin x)` and a sample becomes
//! the product state of its lifted features. The decision function is
//! `f(x) = |<psi|phi(x)>|^2`, the classical counterpart of the all-zeros
//! probability of the compiled circuit acting on the encoded sample.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::StateVector;
use crate::error::{Error, Result};
use crate::mps::{max_bonds, CanonicalForm, Mps};
use crate::tensor::{svd_truncated, tol, DenseTensor, C64, ZERO};

pub fn feature_map(x: f64) -> Result<[f64; 2]> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("feature {x} is not finite")));
    }
    Ok([x.cos(), x.sin()])
}

/// The lifted sample as a state vector, qubit `i` carrying feature `i`.
pub fn feature_state(x: &[f64]) -> Result<StateVector> {
    if x.is_empty() {
        return Err(Error::invalid("empty feature vector"));
    }
    let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    crate::circuit::encode_inputs(&doubled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::shape(format!("{} samples but {} labels", samples.len(), labels.len())));
        }
        if let Some(first) = samples.first() {
            if first.is_empty() || samples.iter().any(|s| s.len() != first.len()) {
                return Err(Error::shape("samples must share a non-zero feature count"));
            }
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(LabeledDataset { samples, labels })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Applies `f` to every sample, keeping the labels.
    pub fn map_samples(&self, f: impl FnMut(&Vec<f64>) -> Result<Vec<f64>>) -> Result<Self> {
        let samples = self.samples.iter().map(f).collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(samples, self.labels.clone())
    }

    /// Comma- or whitespace-separated rows: features, then the label.
    /// Blank lines and `#` comments are skipped.
    pub fn parse_csv(text: &str, name: &str) -> Result<Self> {
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { path: name.to_string(), line: k + 1, msg };
            let fields: Vec<&str> =
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            if fields.len() < 2 {
                return Err(err("need at least one feature and a label".into()));
            }
            let (feats, label) = fields.split_at(fields.len() - 1);
            let y: u8 = match label[0] {
                "0" => 0,
                "1" => 1,
                other => return Err(err(format!("label {other:?} is not 0 or 1"))),
            };
            let x = feats
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| err(format!("bad feature in {line:?}")))?;
            if let Some(first) = samples.first() {
                if x.len() != Vec::len(first) {
                    return Err(err(format!("{} features, earlier rows have {}", x.len(), Vec::len(first))));
                }
            }
            samples.push(x);
            labels.push(y);
        }
        if samples.is_empty() {
            return Err(Error::Parse { path: name.to_string(), line: 0, msg: "no samples".into() });
        }
        LabeledDataset::new(samples, labels)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LabeledDataset::parse_csv(&text, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (x, y) in self.samples.iter().zip(&self.labels) {
            for v in x {
                out.push_str(&format!("{v:?},"));
            }
            out.push_str(&format!("{y}\n"));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Two Gaussian clusters in `[0, pi/2]^n` separated by the hyperplane
    /// `sum x = n (c0 + c1) / 2`. Class 1 sits around `c1 = 1.2` per
    /// feature, class 0 around `c0 = 0.35`; points closer than `0.05` to the
    /// plane (per feature) are redrawn, so the plane separates the classes
    /// with a margin. Classes alternate.
    pub fn synthetic_separable(n_features: usize, n_samples: usize, seed: u64) -> Result<Self> {
        if n_features == 0 || n_samples == 0 {
            return Err(Error::invalid("synthetic data needs features and samples"));
        }
        let (c0, c1, spread) = (0.35, 1.2, 0.2);
        let mid = 0.5 * (c0 + c1) * n_features as f64;
        let margin = 0.05 * n_features as f64;
        let normal = rand_distr::Normal::new(0.0, spread).expect("positive spread");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(n_samples);
        let mut labels = Vec::with_capacity(n_samples);
        for k in 0..n_samples {
            let y = (k % 2) as u8;
            let centre = if y == 1 { c1 } else { c0 };
            loop {
                let x: Vec<f64> = (0..n_features)
                    .map(|_| (centre + rng.sample(normal)).clamp(0.0, std::f64::consts::FRAC_PI_2))
                    .collect();
                let side = x.iter().sum::<f64>() - mid;
                if (y == 1 && side > margin) || (y == 0 && side < -margin) {
                    samples.push(x);
                    labels.push(y);
                    break;
                }
            }
        }
        LabeledDataset::new(samples, labels)
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Option<usize> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize)
}

/// Reads an IDX image file (magic `0x00000803`). Returns the images as rows
/// of pixel intensities scaled to `[0, 1]`.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if read_u32(&bytes, 0) != Some(0x803) {
        return Err(bad("not an IDX image file"));
    }
    let (count, rows, cols) = match (read_u32(&bytes, 4), read_u32(&bytes, 8), read_u32(&bytes, 12)) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(bad("truncated header")),
    };
    let size = rows * cols;
    if bytes.len() != 16 + count * size {
        return Err(bad("payload length does not match the header"));
    }
    Ok(bytes[16..].chunks(size.max(1)).take(count).map(|c| c.iter().map(|&p| p as f64 / 255.0).collect()).collect())
}

/// Reads an IDX label file (magic `0x00000801`).
pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if read_u32(&bytes, 0) != Some(0x801) {
        return Err(bad("not an IDX label file"));
    }
    let count = read_u32(&bytes, 4).ok_or_else(|| bad("truncated header"))?;
    if bytes.len() != 8 + count {
        return Err(bad("payload length does not match the header"));
    }
    Ok(bytes[8..].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Samples per sweep; `None` uses the whole dataset.
    pub batch_size: Option<usize>,
    pub chi_max: usize,
    pub seed: u64,
    /// Probabilities are clamped to `[epsilon, 1 - epsilon]` in the loss.
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { learning_rate: 0.05, epochs: 5, batch_size: None, chi_max: 2, seed: 0, epsilon: 1e-7 }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.chi_max < 1 {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::invalid("epsilon must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct MpsClassifier {
    state: Mps,
    pub config: TrainingConfig,
}

impl MpsClassifier {
    /// Every site starts as `delta_{lr} (1, 1) / sqrt 2` plus seeded noise
    /// of scale `1e-2`, i.e. close to the product of `|+>` states.
    pub fn new(n: usize, config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        if n < 2 {
            return Err(Error::invalid("the classifier needs at least two features"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bonds = max_bonds(n, config.chi_max);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let tensors = (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { bonds[k - 1] };
                let r = if k + 1 == n { 1 } else { bonds[k] };
                DenseTensor::from_fn(&[l, 2, r], |i| {
                    let base = if i[0] == i[2] { h } else { 0.0 };
                    C64::new(base + 1e-2 * rng.random_range(-1.0..1.0), 0.0)
                })
            })
            .collect();
        let state = Mps::new(tensors)?.canonicalize(CanonicalForm::Right)?;
        Ok(MpsClassifier { state, config })
    }

    /// Wraps an existing state; it is normalized and brought to right
    /// canonical form.
    pub fn from_state(state: &Mps, config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        if state.len() < 2 {
            return Err(Error::invalid("the classifier needs at least two features"));
        }
        Ok(MpsClassifier { state: state.canonicalize(CanonicalForm::Right)?, config })
    }

    pub fn state(&self) -> &Mps {
        &self.state
    }

    pub fn num_features(&self) -> usize {
        self.state.len()
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state.len() {
            return Err(Error::shape(format!("{} features, classifier has {}", x.len(), self.state.len())));
        }
        Ok(())
    }

    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        let phi = x.iter().map(|&v| feature_map(v)).collect::<Result<Vec<_>>>()?;
        let mut env = vec![C64::new(1.0, 0.0)];
        for (t, p) in self.state.tensors().iter().zip(&phi) {
            env = absorb_left(&env, t, p);
        }
        Ok(env[0].norm_sqr().min(1.0))
    }

    /// Label 1 when `f >= 0.5`.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(threshold(self.decision_function(x)?))
    }

    pub fn bce_loss(&self, data: &LabeledDataset, epsilon: f64) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        let p = data.samples().iter().map(|x| self.decision_function(x)).collect::<Result<Vec<_>>>()?;
        Ok(bce(&p, data.labels(), epsilon))
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        let mut hits = 0usize;
        for (x, &y) in data.samples().iter().zip(data.labels()) {
            hits += usize::from(self.predict(x)? == y);
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// One epoch: a left-to-right-to-left sweep per batch.
    pub fn train_sweep(&mut self, data: &LabeledDataset) -> Result<()> {
        self.train_epoch(data, 0)
    }

    fn train_epoch(&mut self, data: &LabeledDataset, epoch: usize) -> Result<()> {
        if data.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        if data.num_features() != self.state.len() {
            return Err(Error::shape(format!(
                "{} features, classifier has {}",
                data.num_features(),
                self.state.len()
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let batch = match self.config.batch_size {
            Some(b) if b < data.len() => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(1 + epoch as u64));
                order.shuffle(&mut rng);
                b
            }
            _ => data.len(),
        };
        for chunk in order.chunks(batch) {
            let phis = chunk
                .iter()
                .map(|&i| data.samples()[i].iter().map(|&v| feature_map(v)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<u8> = chunk.iter().map(|&i| data.labels()[i]).collect();
            self.sweep(&phis, &labels)?;
        }
        Ok(())
    }

    /// Trains for `config.epochs` epochs; the log holds the state before
    /// training and after every epoch.
    pub fn train(&mut self, data: &LabeledDataset) -> Result<Vec<EpochLog>> {
        let eps = self.config.epsilon;
        let mut log = vec![EpochLog { epoch: 0, loss: self.bce_loss(data, eps)?, accuracy: self.accuracy(data)? }];
        for epoch in 1..=self.config.epochs {
            self.train_epoch(data, epoch)?;
            log.push(EpochLog { epoch, loss: self.bce_loss(data, eps)?, accuracy: self.accuracy(data)? });
        }
        Ok(log)
    }

    fn sweep(&mut self, phis: &[Vec<[f64; 2]>], labels: &[u8]) -> Result<()> {
        let n = self.state.len();
        // left[j][k]: sample j contracted with sites < k; right[j][k]: sites >= k
        let unit = vec![C64::new(1.0, 0.0)];
        let mut left: Vec<Vec<Vec<C64>>> = vec![vec![unit.clone(); n + 1]; phis.len()];
        let mut right: Vec<Vec<Vec<C64>>> = vec![vec![unit; n + 1]; phis.len()];
        for (j, phi) in phis.iter().enumerate() {
            for k in (1..n).rev() {
                right[j][k] = absorb_right(&right[j][k + 1], self.state.tensor(k), &phi[k]);
            }
        }
        let bonds: Vec<(usize, bool)> =
            (0..n - 1).map(|k| (k, true)).chain((0..n - 1).rev().map(|k| (k, false))).collect();
        for (k, rightward) in bonds {
            let b = merge(self.state.tensor(k), self.state.tensor(k + 1))?;
            let envs: Vec<Vec<C64>> =
                (0..phis.len()).map(|j| bond_environment(&left[j][k], &phis[j][k], &phis[j][k + 1], &right[j][k + 2])).collect();
            let g = merged_gradient(&b, &envs, labels, self.config.epsilon);
            let stepped: Vec<C64> =
                b.data().iter().zip(&g).map(|(x, d)| x - d * self.config.learning_rate).collect();
            let (l, r) = (b.shape()[0], b.shape()[3]);
            let m = DenseTensor::new(vec![l * 2, 2 * r], stepped)?;
            let svd = svd_truncated(&m, self.config.chi_max, tol::SVD_CUTOFF)?;
            let kdim = svd.s.len();
            let nrm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::Numerical("classifier update produced a zero or non-finite state".into()));
            }
            let s: Vec<f64> = svd.s.iter().map(|v| v / nrm).collect();
            let (a, c) = if rightward {
                let sv = DenseTensor::from_fn(&[kdim, 2 * r], |i| svd.v.at(i[0], i[1]) * s[i[0]]);
                (svd.u.reshape(&[l, 2, kdim])?, sv.reshape(&[kdim, 2, r])?)
            } else {
                let us = DenseTensor::from_fn(&[l * 2, kdim], |i| svd.u.at(i[0], i[1]) * s[i[1]]);
                (us.reshape(&[l, 2, kdim])?, svd.v.reshape(&[kdim, 2, r])?)
            };
            let t = self.state.tensors_mut();
            t[k] = a;
            t[k + 1] = c;
            if rightward {
                self.state.set_center(Some(k + 1));
                for (j, phi) in phis.iter().enumerate() {
                    left[j][k + 1] = absorb_left(&left[j][k], self.state.tensor(k), &phi[k]);
                }
            } else {
                self.state.set_center(Some(k));
                for (j, phi) in phis.iter().enumerate() {
                    right[j][k + 1] = absorb_right(&right[j][k + 2], self.state.tensor(k + 1), &phi[k + 1]);
                }
            }
        }
        Ok(())
    }
}

pub fn threshold(f: f64) -> u8 {
    u8::from(f >= 0.5)
}

/// Mean binary cross-entropy with `p` clamped to `[epsilon, 1 - epsilon]`.
pub fn bce(p: &[f64], labels: &[u8], epsilon: f64) -> f64 {
    let total: f64 = p
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(epsilon, 1.0 - epsilon);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / p.len() as f64
}

/// `env'[r] = sum_{l,s} env[l] A[l,s,r] phi[s]`.
fn absorb_left(env: &[C64], a: &DenseTensor, phi: &[f64; 2]) -> Vec<C64> {
    let (l, r) = (a.shape()[0], a.shape()[2]);
    let d = a.data();
    let mut out = vec![ZERO; r];
    for li in 0..l {
        for s in 0..2 {
            let w = env[li] * phi[s];
            for (ri, o) in out.iter_mut().enumerate() {
                *o += w * d[(li * 2 + s) * r + ri];
            }
        }
    }
    out
}

/// `env'[l] = sum_{s,r} A[l,s,r] phi[s] env[r]`.
fn absorb_right(env: &[C64], a: &DenseTensor, phi: &[f64; 2]) -> Vec<C64> {
    let (l, r) = (a.shape()[0], a.shape()[2]);
    let d = a.data();
    (0..l)
        .map(|li| {
            (0..2)
                .map(|s| (0..r).map(|ri| d[(li * 2 + s) * r + ri] * env[ri]).sum::<C64>() * phi[s])
                .sum()
        })
        .collect()
}

/// `B[l, s1, s2, r] = sum_m A[l, s1, m] C[m, s2, r]`.
fn merge(a: &DenseTensor, c: &DenseTensor) -> Result<DenseTensor> {
    let (l, _, m) = (a.shape()[0], 2, a.shape()[2]);
    let r = c.shape()[2];
    let am = a.clone().reshape(&[l * 2, m])?;
    let cm = c.clone().reshape(&[m, 2 * r])?;
    am.matmul(&cm)?.reshape(&[l, 2, 2, r])
}

/// `T[l, s1, s2, r] = L[l] phi1[s1] phi2[s2] R[r]`, so `<phi|psi> = sum B T`.
fn bond_environment(lv: &[C64], p1: &[f64; 2], p2: &[f64; 2], rv: &[C64]) -> Vec<C64> {
    let mut t = Vec::with_capacity(lv.len() * 4 * rv.len());
    for &a in lv {
        for s1 in 0..2 {
            for s2 in 0..2 {
                let w = a * (p1[s1] * p2[s2]);
                t.extend(rv.iter().map(|&b| w * b));
            }
        }
    }
    t
}

/// Gradient of the clamped BCE with respect to the real and imaginary parts
/// of the merged tensor, packed as `dL/dRe + i dL/dIm`.
fn merged_gradient(b: &DenseTensor, envs: &[Vec<C64>], labels: &[u8], epsilon: f64) -> Vec<C64> {
    let m = envs.len() as f64;
    let mut g = vec![ZERO; b.data().len()];
    for (t, &y) in envs.iter().zip(labels) {
        let z: C64 = b.data().iter().zip(t).map(|(x, e)| x * e).sum();
        let p = z.norm_sqr();
        if p <= epsilon || p >= 1.0 - epsilon {
            continue;
        }
        let dl_dp = if y == 1 { -1.0 / p } else { 1.0 / (1.0 - p) } / m;
        // p = |sum B T|^2, dp/dRe B + i dp/dIm B = 2 z conj(T)
        let w = z * (2.0 * dl_dp);
        for (gi, e) in g.iter_mut().zip(t) {
            *gi += w * e.conj();
        }
    }
    g
}
