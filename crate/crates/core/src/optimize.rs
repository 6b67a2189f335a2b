//! Gradient-based minimizers with evaluation accounting.
//!
//! Every objective call costs one evaluation; a gradient costs whatever the
//! objective reports (for circuits, the parameter-shift count). Both
//! counters are kept and their sum is the `fevals` column of the log.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::{self, Circuit, CircuitObjective, GradientMethod};
use crate::error::{Error, Result};

pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    /// The gradient and the number of evaluations it cost.
    fn gradient(&mut self, x: &[f64]) -> Result<(Vec<f64>, usize)>;
}

/// Objective built from two closures; gradients are charged `gradient_cost`.
pub struct FnObjective<F, G> {
    pub f: F,
    pub g: G,
    pub gradient_cost: usize,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn gradient(&mut self, x: &[f64]) -> Result<(Vec<f64>, usize)> {
        Ok(((self.g)(x), self.gradient_cost))
    }
}

/// A circuit objective over the circuit's parameter vector.
pub struct CircuitProblem<'a> {
    pub circuit: &'a Circuit,
    pub objective: &'a CircuitObjective,
    pub method: GradientMethod,
}

impl Objective for CircuitProblem<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        circuit::objective_value(self.circuit, x, self.objective)
    }

    fn gradient(&mut self, x: &[f64]) -> Result<(Vec<f64>, usize)> {
        let g = circuit::gradient(self.circuit, x, self.objective, self.method)?;
        Ok((g.values, g.evaluations))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    GdDecay,
    Bfgs,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd-decay" | "gd" => Ok(OptimizerKind::GdDecay),
            "bfgs" => Ok(OptimizerKind::Bfgs),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::invalid(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Defaults to 0.05 for gradient descent and 0.001 for Adam; BFGS
    /// starts every line search at a unit step and ignores it.
    pub learning_rate: Option<f64>,
    /// `eta_t = eta_0 / (1 + decay * t)`.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the gradient norm is at most this.
    pub grad_tol: f64,
    /// Stop once an iteration changes the objective by at most this; 0
    /// disables the test.
    pub objective_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Fill the `seconds` column from a wall clock. Off by default so logs
    /// are reproducible bit for bit.
    pub record_time: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Bfgs,
            learning_rate: None,
            decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iterations: 500,
            grad_tol: 1e-9,
            objective_tol: 0.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            record_time: false,
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerConfig { kind, ..Default::default() }
    }

    pub fn eta0(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.kind {
            OptimizerKind::Adam => 0.001,
            _ => 0.05,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta0();
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {eta}")));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("Adam epsilon must be positive"));
        }
        if !(self.grad_tol >= 0.0) || !(self.objective_tol >= 0.0) || !(self.decay >= 0.0) {
            return Err(Error::invalid("tolerances and decay must be non-negative"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("line-search constants must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Objective plus gradient evaluations so far.
    pub fevals: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    GradientTolerance,
    ObjectiveTolerance,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
    pub objective_evals: usize,
    pub gradient_evals: usize,
    pub stop: StopReason,
}

impl RunLog {
    pub const CSV_HEADER: &'static str = "step,objective,grad_norm,fevals,seconds";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{},{}", e.step, e.objective, e.grad_norm, e.fevals, e.seconds);
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn final_objective(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.objective)
    }

    pub fn best_objective(&self) -> f64 {
        self.entries.iter().map(|e| e.objective).fold(f64::INFINITY, f64::min)
    }

    pub fn total_evals(&self) -> usize {
        self.objective_evals + self.gradient_evals
    }
}

struct Counter<'a> {
    obj: &'a mut dyn Objective,
    values: usize,
    grads: usize,
}

impl Counter<'_> {
    fn value(&mut self, x: &[f64], step: usize) -> Result<f64> {
        self.values += 1;
        let f = self.obj.value(x)?;
        if !f.is_finite() {
            return Err(non_finite(step, "objective", x));
        }
        Ok(f)
    }

    /// Like `value`, but a non-finite result is returned rather than
    /// raised; used for trial points of the line search.
    fn trial(&mut self, x: &[f64]) -> Result<f64> {
        self.values += 1;
        self.obj.value(x)
    }

    fn gradient(&mut self, x: &[f64], step: usize) -> Result<Vec<f64>> {
        let (g, cost) = self.obj.gradient(x)?;
        self.grads += cost;
        if g.len() != x.len() {
            return Err(Error::shape(format!("gradient of length {} for {} parameters", g.len(), x.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(step, "gradient", x));
        }
        Ok(g)
    }

    fn total(&self) -> usize {
        self.values + self.grads
    }
}

/// Bias-corrected Adam moments, for callers that drive their own loop
/// (mini-batches, for instance).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    /// One update of `x` along the gradient `g` with the rates in `cfg`.
    pub fn step(&mut self, x: &mut [f64], g: &[f64], cfg: &OptimizerConfig) {
        self.t += 1;
        let eta = cfg.eta0();
        let (b1c, b2c) = (1.0 - cfg.beta1.powi(self.t), 1.0 - cfg.beta2.powi(self.t));
        for i in 0..x.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            x[i] -= eta * (self.m[i] / b1c) / ((self.v[i] / b2c).sqrt() + cfg.epsilon);
        }
    }
}

fn non_finite(step: usize, what: &str, x: &[f64]) -> Error {
    Error::NonFinite { step, detail: format!("{what} at x = {x:?}") }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `obj` from `x0`. Returns the best parameters seen and the log
/// of every iteration, step 0 being the starting point.
pub fn minimize(obj: &mut dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<(Vec<f64>, RunLog)> {
    cfg.validate()?;
    let clock = Instant::now();
    let seconds = || if cfg.record_time { clock.elapsed().as_secs_f64() } else { 0.0 };
    let mut c = Counter { obj, values: 0, grads: 0 };
    let dim = x0.len();

    let mut x = x0.to_vec();
    let mut f = c.value(&x, 0)?;
    let mut g = c.gradient(&x, 0)?;
    let mut entries = vec![LogEntry { step: 0, objective: f, grad_norm: norm(&g), fevals: c.total(), seconds: seconds() }];
    let (mut best_x, mut best_f) = (x.clone(), f);

    // optimizer state
    let eta0 = cfg.eta0();
    let mut adam = AdamState::new(dim);
    let mut h: Vec<f64> = identity(dim);
    let mut h_scaled = false;

    let mut stop = StopReason::MaxIterations;
    if norm(&g) <= cfg.grad_tol {
        stop = StopReason::GradientTolerance;
    } else {
        for step in 1..=cfg.max_iterations {
            let t = step - 1;
            let f_prev = f;
            match cfg.kind {
                OptimizerKind::GdDecay => {
                    let eta = eta0 / (1.0 + cfg.decay * t as f64);
                    for (xi, gi) in x.iter_mut().zip(&g) {
                        *xi -= eta * gi;
                    }
                    f = c.value(&x, step)?;
                    g = c.gradient(&x, step)?;
                }
                OptimizerKind::Adam => {
                    adam.step(&mut x, &g, cfg);
                    f = c.value(&x, step)?;
                    g = c.gradient(&x, step)?;
                }
                OptimizerKind::Bfgs => {
                    let mut d = matvec(&h, &g, dim);
                    d.iter_mut().for_each(|a| *a = -*a);
                    let mut slope = dot(&g, &d);
                    if !(slope < 0.0) {
                        // lost positive definiteness; restart from steepest descent
                        h = identity(dim);
                        h_scaled = false;
                        d = g.iter().map(|a| -a).collect();
                        slope = dot(&g, &d);
                    }
                    let mut found = armijo(&mut c, &x, f, &d, slope, cfg)?;
                    if found.is_none() && h_scaled {
                        // a stale curvature model can produce useless directions; retry once
                        // along the gradient before giving up
                        h = identity(dim);
                        h_scaled = false;
                        d = g.iter().map(|a| -a).collect();
                        found = armijo(&mut c, &x, f, &d, dot(&g, &d), cfg)?;
                    }
                    let Some((x_new, f_new)) = found else {
                        stop = StopReason::LineSearch;
                        break;
                    };
                    let g_new = c.gradient(&x_new, step)?;
                    let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * norm(&s) * norm(&y) {
                        if !h_scaled {
                            let gamma = sy / dot(&y, &y);
                            h.iter_mut().for_each(|a| *a *= gamma);
                            h_scaled = true;
                        }
                        bfgs_update(&mut h, &s, &y, sy, dim);
                    }
                    x = x_new;
                    f = f_new;
                    g = g_new;
                }
            }
            let gn = norm(&g);
            entries.push(LogEntry { step, objective: f, grad_norm: gn, fevals: c.total(), seconds: seconds() });
            if f < best_f {
                best_f = f;
                best_x.clone_from(&x);
            }
            if gn <= cfg.grad_tol {
                stop = StopReason::GradientTolerance;
                break;
            }
            if cfg.objective_tol > 0.0 && (f - f_prev).abs() <= cfg.objective_tol {
                stop = StopReason::ObjectiveTolerance;
                break;
            }
        }
    }
    let log = RunLog { entries, objective_evals: c.values, gradient_evals: c.grads, stop };
    Ok((best_x, log))
}

/// Backtracking line search for `f(x + a d) <= f(x) + c a slope`. `None`
/// when no step down to machine precision satisfies it.
fn armijo(
    c: &mut Counter<'_>,
    x: &[f64],
    f: f64,
    d: &[f64],
    slope: f64,
    cfg: &OptimizerConfig,
) -> Result<Option<(Vec<f64>, f64)>> {
    let mut alpha = 1.0;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let ft = c.trial(&trial)?;
        if ft.is_finite() && ft <= f + cfg.armijo_c * alpha * slope {
            return Ok(Some((trial, ft)));
        }
        alpha *= cfg.backtrack;
    }
    Ok(None)
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn matvec(h: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&h[i * n..(i + 1) * n], v)).collect()
}

/// `H <- (I - r s y^T) H (I - r y s^T) + r s s^T` with `r = 1 / (s.y)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let r = 1.0 / sy;
    let hy = matvec(h, y, n);
    let yhy = dot(y, &hy);
    // expanded form: H - r (s hy^T + hy s^T) + (r^2 yHy + r) s s^T
    let coef = r * r * yhy + r;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + coef * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic() -> FnObjective<impl FnMut(&[f64]) -> f64, impl FnMut(&[f64]) -> Vec<f64>> {
        FnObjective {
            f: |x: &[f64]| x.iter().map(|a| a * a).sum(),
            g: |x: &[f64]| x.iter().map(|a| 2.0 * a).collect(),
            gradient_cost: 1,
        }
    }

    fn rosenbrock() -> FnObjective<impl FnMut(&[f64]) -> f64, impl FnMut(&[f64]) -> Vec<f64>> {
        FnObjective {
            f: |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            g: |x: &[f64]| {
                vec![
                    -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                    200.0 * (x[1] - x[0] * x[0]),
                ]
            },
            gradient_cost: 1,
        }
    }

    fn random_start(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn quadratic_converges_with_every_optimizer() {
        let x0 = random_start(1, 5);
        let configs = [
            OptimizerConfig { learning_rate: Some(0.2), grad_tol: 0.0, ..OptimizerConfig::new(OptimizerKind::GdDecay) },
            OptimizerConfig { grad_tol: 0.0, ..OptimizerConfig::new(OptimizerKind::Bfgs) },
            // heavy momentum makes Adam oscillate around the minimum; damp it
            OptimizerConfig { learning_rate: Some(0.05), beta1: 0.5, grad_tol: 0.0, ..OptimizerConfig::new(OptimizerKind::Adam) },
        ];
        for cfg in configs {
            let cfg = OptimizerConfig { max_iterations: 200, ..cfg };
            let (x, log) = minimize(&mut quadratic(), &x0, &cfg).unwrap();
            assert!(norm(&x) <= 1e-6, "{:?}: {}", cfg.kind, norm(&x));
            assert!(log.entries.len() <= 201);
        }
    }

    #[test]
    fn gd_is_monotone_on_the_quadratic() {
        let cfg = OptimizerConfig { learning_rate: Some(0.1), max_iterations: 100, ..OptimizerConfig::new(OptimizerKind::GdDecay) };
        let (_, log) = minimize(&mut quadratic(), &random_start(2, 4), &cfg).unwrap();
        for w in log.entries.windows(2) {
            assert!(w[1].objective <= w[0].objective);
        }
    }

    #[test]
    fn zero_gradient_stops_immediately() {
        for kind in [OptimizerKind::GdDecay, OptimizerKind::Bfgs, OptimizerKind::Adam] {
            let x0 = vec![0.0; 3];
            let (x, log) = minimize(&mut quadratic(), &x0, &OptimizerConfig::new(kind)).unwrap();
            assert_eq!(x, x0);
            assert_eq!(log.entries.len(), 1);
            assert_eq!(log.stop, StopReason::GradientTolerance);
        }
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let cfg = OptimizerConfig { grad_tol: 1e-12, max_iterations: 1000, ..OptimizerConfig::new(OptimizerKind::Bfgs) };
        let (x, log) = minimize(&mut rosenbrock(), &[-1.2, 1.0], &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?} after {}", log.entries.len());
    }

    #[test]
    fn bfgs_steps_satisfy_armijo() {
        let cfg = OptimizerConfig { max_iterations: 60, ..OptimizerConfig::new(OptimizerKind::Bfgs) };
        let (_, log) = minimize(&mut rosenbrock(), &[-1.2, 1.0], &cfg).unwrap();
        // sufficient decrease implies a strictly decreasing sequence
        for w in log.entries.windows(2) {
            assert!(w[1].objective < w[0].objective);
        }
    }

    #[test]
    fn evaluation_counter_is_exact() {
        use std::cell::Cell;
        for kind in [OptimizerKind::GdDecay, OptimizerKind::Bfgs, OptimizerKind::Adam] {
            let calls = Cell::new(0usize);
            let grads = Cell::new(0usize);
            let mut obj = FnObjective {
                f: |x: &[f64]| {
                    calls.set(calls.get() + 1);
                    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
                },
                g: |x: &[f64]| {
                    grads.set(grads.get() + 1);
                    vec![
                        -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                        200.0 * (x[1] - x[0] * x[0]),
                    ]
                },
                gradient_cost: 3,
            };
            let cfg = OptimizerConfig { max_iterations: 40, learning_rate: Some(1e-3), ..OptimizerConfig::new(kind) };
            let (_, log) = minimize(&mut obj, &[-1.2, 1.0], &cfg).unwrap();
            assert_eq!(log.objective_evals, calls.get());
            assert_eq!(log.gradient_evals, 3 * grads.get());
            assert_eq!(log.entries.last().unwrap().fevals, calls.get() + 3 * grads.get());
            for w in log.entries.windows(2) {
                assert!(w[1].step > w[0].step && w[1].fevals >= w[0].fevals);
            }
        }
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let cfg = OptimizerConfig { max_iterations: 50, ..OptimizerConfig::new(OptimizerKind::Bfgs) };
        let a = minimize(&mut rosenbrock(), &[-1.2, 1.0], &cfg).unwrap().1.to_csv();
        let b = minimize(&mut rosenbrock(), &[-1.2, 1.0], &cfg).unwrap().1.to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("step,objective,grad_norm,fevals,seconds\n"));
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let mut obj = FnObjective { f: |_: &[f64]| f64::NAN, g: |x: &[f64]| x.to_vec(), gradient_cost: 1 };
        assert!(matches!(
            minimize(&mut obj, &[1.0], &OptimizerConfig::default()),
            Err(Error::NonFinite { step: 0, .. })
        ));
        let mut obj = FnObjective {
            f: |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { x[0] },
            g: |_: &[f64]| vec![1.0],
            gradient_cost: 1,
        };
        let cfg = OptimizerConfig { learning_rate: Some(1.0), ..OptimizerConfig::new(OptimizerKind::GdDecay) };
        assert!(matches!(minimize(&mut obj, &[1.0], &cfg), Err(Error::NonFinite { step: 1, .. })));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            OptimizerConfig { learning_rate: Some(0.0), ..Default::default() },
            OptimizerConfig { beta1: 1.0, ..Default::default() },
            OptimizerConfig { grad_tol: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(minimize(&mut quadratic(), &[1.0], &cfg).is_err());
        }
        let parsed: OptimizerConfig = serde_json::from_str(r#"{"kind": "adam", "max_iterations": 7}"#).unwrap();
        assert_eq!(parsed.kind, OptimizerKind::Adam);
        assert_eq!(parsed.eta0(), 0.001);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"kind": "adam", "lr": 1}"#).is_err());
    }
}
