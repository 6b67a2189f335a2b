//! End-to-end comparisons of circuit initializations.
//!
//! Every experiment trains the same brick-wall circuit from three starting
//! points: angles compiled from a pretrained MPS, uniformly random angles,
//! and all-zero angles. The arms share topology and optimizer settings and
//! differ only in the initial parameter vector.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{gradient, objective_value, run, Circuit, CircuitObjective, GradientMethod, StateVector};
use crate::compiler::{approx_compile_chi4, brickwall_circuit, min_depth, mps_to_staircase, OffDiagonal, Placement};
use crate::error::{Error, Result};
use crate::mps::{dmrg_ground_state, tebd_imaginary, Mpo, Mps, DENSE_CAP};
use crate::mpsml::{feature_state, threshold, EpochLog, LabeledDataset, MpsClassifier, TrainingConfig};
use crate::optimize::{minimize, AdamState, CircuitProblem, LogEntry, OptimizerConfig, OptimizerKind, RunLog, StopReason};
use crate::pauli::PauliSum;
use crate::problems::{
    brute_force_maxcut, exact_ground, load_pauli_hamiltonian, maxcut_hamiltonian, maxcut_terms, pca_fit,
    pca_project, tfim_hamiltonian, WeightedGraph, BRUTE_FORCE_CAP, EXACT_CAP,
};

/// Energy runs count as converged within this distance of their best value.
pub const ENERGY_CONVERGENCE_TOL: f64 = 1e-6;
/// Classifier runs count as converged within this loss of their best value.
const GAUGE_SEED_MIX: u64 = 0x6a17_7e55;

pub const LOSS_CONVERGENCE_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Maxcut,
    HamiltonianFile,
    Tfim,
    Classify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ansatz {
    BrickwallKak,
    BrickwallRyCrx,
}

impl Ansatz {
    pub fn off_diagonal(self) -> OffDiagonal {
        match self {
            Ansatz::BrickwallKak => OffDiagonal::FullKak,
            Ansatz::BrickwallRyCrx => OffDiagonal::RyCrx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Mps,
    Random,
    Identity,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Mps => "mps",
            InitKind::Random => "random",
            InitKind::Identity => "identity",
        }
    }
}

/// Which sign of the cut operator `sum w (1 - Z Z)` is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutObjective {
    /// Minimize `-H`, i.e. look for the largest cut.
    MaximizeCut,
    /// Minimize `H` as written, whose ground states are the uncut partitions.
    MinimizeEq1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PretrainMethod {
    Tebd,
    Dmrg,
    Ml,
}

macro_rules! kebab_from_str {
    ($($t:ty),*) => {$(
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_string()))
                    .map_err(|_| Error::invalid(format!("unknown {} {s:?}", stringify!($t))))
            }
        }
    )*};
}
kebab_from_str!(ProblemKind, Ansatz, InitKind, CutObjective, PretrainMethod);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    /// `None` picks TEBD for MaxCut, DMRG for other energies, and the
    /// sweep trainer for classification.
    pub method: Option<PretrainMethod>,
    pub chi: usize,
    pub dtau: f64,
    pub steps: usize,
    pub sweeps: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: Option<usize>,
    /// Sweeps of the bond-4 fit when the MPS needs it.
    pub fit_iterations: usize,
    /// Compile energy-problem MPS from a seeded random complex gauge. The
    /// state is unchanged, but the compiled angles no longer sit on the
    /// symmetric set that a real MPS in real gauge produces, where the
    /// optimizer can stall at a saddle.
    pub random_gauge: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            method: None,
            chi: 2,
            dtau: 1e-3,
            steps: 30,
            sweeps: 4,
            epochs: 5,
            learning_rate: 0.05,
            batch_size: None,
            fit_iterations: 20,
            random_gauge: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    /// Size of the synthetic dataset used when no file is given.
    pub samples: usize,
    pub data_seed: u64,
    /// Circuit training epochs.
    pub epochs: usize,
    pub batch_size: Option<usize>,
    /// Remove the mean before PCA.
    pub pca_center: bool,
    pub epsilon: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings { samples: 100, data_seed: 0, epochs: 10, batch_size: Some(10), pca_center: true, epsilon: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// `None` uses ry-crx off-diagonal blocks for MaxCut and full KAK blocks
    /// otherwise.
    pub ansatz: Option<Ansatz>,
    pub depth: usize,
    pub n_qubits: Option<usize>,
    pub inits: Vec<InitKind>,
    pub seeds: Vec<u64>,
    pub objective: CutObjective,
    pub graph: Option<PathBuf>,
    pub hamiltonian: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub tfim_j: f64,
    pub tfim_g: f64,
    pub pretrain: PretrainConfig,
    pub optimizer: OptimizerConfig,
    pub gradient: GradientMethod,
    pub classifier: ClassifierSettings,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemKind::Maxcut,
            ansatz: None,
            depth: 6,
            n_qubits: None,
            inits: vec![InitKind::Mps, InitKind::Random, InitKind::Identity],
            seeds: vec![0],
            objective: CutObjective::MaximizeCut,
            graph: None,
            hamiltonian: None,
            dataset: None,
            tfim_j: 1.0,
            tfim_g: 1.0,
            pretrain: PretrainConfig::default(),
            optimizer: OptimizerConfig::default(),
            gradient: GradientMethod::Adjoint,
            classifier: ClassifierSettings::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn off_diagonal(&self) -> OffDiagonal {
        match self.ansatz {
            Some(a) => a.off_diagonal(),
            None if self.problem == ProblemKind::Maxcut => OffDiagonal::RyCrx,
            None => OffDiagonal::FullKak,
        }
    }

    pub fn pretrain_method(&self) -> PretrainMethod {
        self.pretrain.method.unwrap_or(match self.problem {
            ProblemKind::Maxcut => PretrainMethod::Tebd,
            ProblemKind::HamiltonianFile | ProblemKind::Tfim => PretrainMethod::Dmrg,
            ProblemKind::Classify => PretrainMethod::Ml,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("the seed list is empty"));
        }
        if self.inits.is_empty() {
            return Err(Error::invalid("no initializations selected"));
        }
        let mut sorted = self.inits.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.inits.len() {
            return Err(Error::invalid("an initialization is listed twice"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::invalid("a seed is listed twice"));
        }
        if !(1..=4).contains(&self.pretrain.chi) {
            return Err(Error::BondTooLarge { found: self.pretrain.chi, max: 4 });
        }
        self.optimizer.validate()?;
        let method = self.pretrain_method();
        match self.problem {
            ProblemKind::Classify => {
                if method != PretrainMethod::Ml {
                    return Err(Error::invalid("classification pretrains with the ml method"));
                }
                if self.pretrain.chi > 2 {
                    return Err(Error::BondTooLarge { found: self.pretrain.chi, max: 2 });
                }
                if self.n_qubits.is_none() {
                    return Err(Error::invalid("classification needs n_qubits"));
                }
                if !(self.classifier.epsilon > 0.0 && self.classifier.epsilon < 0.5) {
                    return Err(Error::invalid("epsilon must lie in (0, 0.5)"));
                }
                if self.classifier.batch_size == Some(0) {
                    return Err(Error::invalid("batch size must be positive"));
                }
            }
            _ => {
                if method == PretrainMethod::Ml {
                    return Err(Error::invalid("the ml method only applies to classification"));
                }
                if method == PretrainMethod::Tebd && (!(self.pretrain.dtau > 0.0) || !self.pretrain.dtau.is_finite()) {
                    return Err(Error::invalid("dtau must be positive"));
                }
            }
        }
        match self.problem {
            ProblemKind::HamiltonianFile if self.hamiltonian.is_none() => {
                Err(Error::invalid("hamiltonian-file problems need a hamiltonian path"))
            }
            ProblemKind::Tfim if self.n_qubits.is_none() => Err(Error::invalid("tfim needs n_qubits")),
            _ => Ok(()),
        }
    }
}

/// What the MPS stage produced for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub seed: u64,
    pub method: PretrainMethod,
    /// Energy of the MPS, or its training loss for classification.
    pub objective: f64,
    pub max_bond: usize,
    /// Fidelity between the compiled circuit state and the MPS.
    pub compile_fidelity: f64,
    /// Classifier accuracy on the training data.
    pub accuracy: Option<f64>,
    /// Largest gap between the MPS and circuit decision functions at step 0.
    pub parity_error: Option<f64>,
    /// Settings actually used by the sweep trainer.
    pub training: Option<TrainingConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub init: InitKind,
    pub seed: u64,
    pub log: RunLog,
    pub final_params: Vec<f64>,
    /// Training accuracy after every epoch (classification only).
    pub accuracy: Option<Vec<f64>>,
    /// Fingerprints of the circuit structure and the optimizer settings.
    pub topology: String,
    pub optimizer: String,
}

impl RunRecord {
    pub fn initial_objective(&self) -> f64 {
        self.log.entries[0].objective
    }

    pub fn final_objective(&self) -> f64 {
        self.log.final_objective()
    }

    pub fn best_objective(&self) -> f64 {
        self.log.best_objective()
    }

    /// Evaluations spent up to the first step within `tol` of this run's
    /// best objective.
    pub fn fevals_to_convergence(&self, tol: f64) -> usize {
        let best = self.best_objective();
        self.log.entries.iter().find(|e| e.objective <= best + tol).map_or(0, |e| e.fevals)
    }

    /// First epoch whose accuracy reaches `target`.
    pub fn epochs_to_accuracy(&self, target: f64) -> Option<usize> {
        self.accuracy.as_ref()?.iter().position(|&a| a >= target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(v: &[f64]) -> Stats {
        Stats {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub init: InitKind,
    pub runs: usize,
    pub final_objective: Stats,
    pub fevals_to_convergence: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub num_qubits: usize,
    /// The exact minimum of the minimized objective, when it is computable.
    pub reference: Option<f64>,
    pub convergence_tol: f64,
    pub pretraining: Vec<PretrainRecord>,
    pub runs: Vec<RunRecord>,
}

impl ComparisonReport {
    pub fn run(&self, init: InitKind, seed: u64) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.init == init && r.seed == seed)
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        self.config
            .inits
            .iter()
            .map(|&init| {
                let runs: Vec<&RunRecord> = self.runs.iter().filter(|r| r.init == init).collect();
                let finals: Vec<f64> = runs.iter().map(|r| r.final_objective()).collect();
                let fevals: Vec<f64> =
                    runs.iter().map(|r| r.fevals_to_convergence(self.convergence_tol) as f64).collect();
                Aggregate {
                    init,
                    runs: runs.len(),
                    final_objective: Stats::of(&finals),
                    fevals_to_convergence: Stats::of(&fevals),
                }
            })
            .collect()
    }

    /// Cut value of an objective in a MaxCut experiment.
    pub fn cut_value(&self, objective: f64) -> f64 {
        match self.config.objective {
            CutObjective::MaximizeCut => -objective / 2.0,
            CutObjective::MinimizeEq1 => objective / 2.0,
        }
    }
}

/// Dispatches on the problem kind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    match cfg.problem {
        ProblemKind::Classify => run_classifier_experiment(cfg),
        _ => run_energy_experiment(cfg),
    }
}

/// FNV-1a, used for stable fingerprints in reports.
fn fingerprint(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn topology_fingerprint(c: &Circuit) -> String {
    fingerprint(&c.with_params(&vec![0.0; c.num_params()]).expect("sizes match").to_json())
}

fn optimizer_fingerprint(cfg: &ExperimentConfig) -> String {
    let settings = serde_json::json!({
        "optimizer": cfg.optimizer,
        "gradient": cfg.gradient,
        "classifier": cfg.classifier,
    });
    fingerprint(&settings.to_string())
}

/// Starting angles for an arm. `Mps` keeps `compiled`, `Random` draws
/// uniformly from `[-pi, pi)`.
pub fn initial_params(init: InitKind, compiled: &[f64], seed: u64) -> Vec<f64> {
    match init {
        InitKind::Mps => compiled.to_vec(),
        InitKind::Identity => vec![0.0; compiled.len()],
        InitKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pi = std::f64::consts::PI;
            (0..compiled.len()).map(|_| rng.random_range(-pi..pi)).collect()
        }
    }
}

fn dense_normalized(s: &Mps) -> Result<StateVector> {
    let amps = s.to_dense_capped(DENSE_CAP)?;
    let nrm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(s.len(), amps.iter().map(|z| z / nrm).collect())
}

/// Compiles `s` (bond at most 4) into brick-wall placements.
pub fn compile_placements(s: &Mps, fit_iterations: usize) -> Result<Vec<Placement>> {
    if s.max_bond() <= 2 {
        Ok(mps_to_staircase(s)?.placements())
    } else {
        Ok(approx_compile_chi4(s, fit_iterations)?.placements())
    }
}

/// An energy problem resolved from a config.
#[derive(Debug, Clone)]
pub struct EnergyProblem {
    pub n: usize,
    /// The operator that is minimized.
    pub h: PauliSum,
    /// Its exact minimum, when small enough to compute.
    pub reference: Option<f64>,
    pub graph: Option<WeightedGraph>,
}

pub fn energy_problem(cfg: &ExperimentConfig) -> Result<EnergyProblem> {
    match cfg.problem {
        ProblemKind::Maxcut => {
            let g = match &cfg.graph {
                Some(p) => WeightedGraph::load(p)?,
                None => WeightedGraph::default_instance(),
            };
            if g.n < 2 {
                return Err(Error::invalid("the graph needs at least two vertices"));
            }
            let h = maxcut_hamiltonian(&g);
            let (h, reference) = match cfg.objective {
                CutObjective::MaximizeCut => {
                    let best = if g.n <= BRUTE_FORCE_CAP { Some(-2.0 * brute_force_maxcut(&g)?.1) } else { None };
                    (h.scaled(-1.0), best)
                }
                CutObjective::MinimizeEq1 => {
                    let best = if g.n <= BRUTE_FORCE_CAP { Some(2.0 * min_cut(&g)) } else { None };
                    (h, best)
                }
            };
            Ok(EnergyProblem { n: g.n, h, reference, graph: Some(g) })
        }
        ProblemKind::HamiltonianFile => {
            let path = cfg.hamiltonian.as_ref().ok_or_else(|| Error::invalid("no hamiltonian path"))?;
            let mut h = load_pauli_hamiltonian(path)?;
            if let Some(n) = cfg.n_qubits {
                if n < h.num_qubits() {
                    return Err(Error::invalid(format!("operator acts on {} qubits, n_qubits is {n}", h.num_qubits())));
                }
                h = PauliSum::from_terms(n, h.terms().to_vec())?;
            }
            energy_with_reference(h)
        }
        ProblemKind::Tfim => {
            let n = cfg.n_qubits.ok_or_else(|| Error::invalid("tfim needs n_qubits"))?;
            energy_with_reference(tfim_hamiltonian(n, cfg.tfim_j, cfg.tfim_g)?.0)
        }
        ProblemKind::Classify => Err(Error::invalid("classification is not an energy problem")),
    }
}

fn min_cut(g: &WeightedGraph) -> f64 {
    (0..1usize << g.n).map(|b| g.cut_value(b)).fold(f64::INFINITY, f64::min)
}

fn energy_with_reference(h: PauliSum) -> Result<EnergyProblem> {
    let n = h.num_qubits();
    if n < 2 {
        return Err(Error::invalid("circuits need at least two qubits"));
    }
    let reference = if n <= EXACT_CAP { Some(exact_ground(&h)?.0) } else { None };
    Ok(EnergyProblem { n, h, reference, graph: None })
}

/// Runs the configured TEBD or DMRG pretraining. The result is normalized.
pub fn pretrain_energy(cfg: &ExperimentConfig, p: &EnergyProblem, mpo: &Mpo, seed: u64) -> Result<Mps> {
    let pc = &cfg.pretrain;
    match cfg.pretrain_method() {
        PretrainMethod::Tebd => {
            let terms = match &p.graph {
                Some(g) => {
                    let sign = if cfg.objective == CutObjective::MaximizeCut { -1.0 } else { 1.0 };
                    maxcut_terms(g, sign)?
                }
                None if cfg.problem == ProblemKind::Tfim => {
                    tfim_hamiltonian(p.n, cfg.tfim_j, cfg.tfim_g)?.1
                }
                None => return Err(Error::invalid("tebd pretraining needs two-site terms (maxcut or tfim)")),
            };
            let plus = Mps::product_state(&vec![std::f64::consts::FRAC_PI_4; p.n])?;
            tebd_imaginary(&plus, &terms, pc.dtau, pc.steps, pc.chi)?.normalized()
        }
        PretrainMethod::Dmrg => Ok(dmrg_ground_state(mpo, p.n, pc.chi, pc.sweeps.max(1), seed)?.state),
        PretrainMethod::Ml => Err(Error::invalid("the ml method only applies to classification")),
    }
}

/// MPS pretraining, compilation and circuit training on an energy problem.
pub fn run_energy_experiment(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let p = energy_problem(cfg)?;
    let mpo = Mpo::from_pauli_sum(&p.h)?;
    let objective = CircuitObjective::Energy(p.h.clone());
    let opt_print = optimizer_fingerprint(cfg);
    let mut pretraining = Vec::new();
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let mut mps = pretrain_energy(cfg, &p, &mpo, seed)?;
        if cfg.pretrain.random_gauge {
            mps = mps.randomize_gauge(seed ^ GAUGE_SEED_MIX)?;
        }
        let placements = compile_placements(&mps, cfg.pretrain.fit_iterations)?;
        let need = min_depth(&placements);
        if cfg.depth < need {
            return Err(Error::invalid(format!(
                "depth {} cannot hold the compiled diagonal; at least {need} is needed",
                cfg.depth
            )));
        }
        let circuit = brickwall_circuit(p.n, cfg.depth, cfg.off_diagonal(), &placements)?;
        let compiled = circuit.params();
        let target = dense_normalized(&mps)?;
        let state = run(&circuit, &compiled, &StateVector::zero_state(p.n))?;
        pretraining.push(PretrainRecord {
            seed,
            method: cfg.pretrain_method(),
            objective: mps.expectation(&mpo)?,
            max_bond: mps.max_bond(),
            compile_fidelity: target.fidelity(&state),
            accuracy: None,
            parity_error: None,
            training: None,
        });
        let topology = topology_fingerprint(&circuit);
        for &init in &cfg.inits {
            let x0 = initial_params(init, &compiled, seed);
            let mut problem = CircuitProblem { circuit: &circuit, objective: &objective, method: cfg.gradient };
            let (x, log) = minimize(&mut problem, &x0, &cfg.optimizer)?;
            runs.push(RunRecord {
                init,
                seed,
                log,
                final_params: x,
                accuracy: None,
                topology: topology.clone(),
                optimizer: opt_print.clone(),
            });
        }
    }
    Ok(ComparisonReport {
        config: cfg.clone(),
        num_qubits: p.n,
        reference: p.reference,
        convergence_tol: ENERGY_CONVERGENCE_TOL,
        pretraining,
        runs,
    })
}

/// Loads or synthesizes the dataset and reduces it to `n` features.
pub fn classifier_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    let n = cfg.n_qubits.ok_or_else(|| Error::invalid("classification needs n_qubits"))?;
    let data = match &cfg.dataset {
        Some(p) => LabeledDataset::load_csv(p)?,
        None => LabeledDataset::synthetic_separable(n, cfg.classifier.samples, cfg.classifier.data_seed)?,
    };
    let d = data.num_features();
    if d < n {
        return Err(Error::shape(format!("dataset has {d} features but the circuit has {n} qubits")));
    }
    if d == n {
        return Ok(data);
    }
    let model = pca_fit(data.samples(), cfg.classifier.pca_center)?;
    data.map_samples(|x| pca_project(&model, x, n))
}

fn accuracy_of(c: &Circuit, params: &[f64], inputs: &[StateVector], labels: &[u8]) -> Result<f64> {
    let mut hits = 0usize;
    for (s, &y) in inputs.iter().zip(labels) {
        hits += usize::from(threshold(crate::circuit::prob_all_zeros(c, params, s)?) == y);
    }
    Ok(hits as f64 / labels.len() as f64)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Mini-batch Adam on the binary cross-entropy. One epoch is one pass over
/// the data; the log has an entry before training and after each epoch,
/// with the full-data loss and gradient norm. `fevals` counts training
/// evaluations only.
fn train_classifier_circuit(
    c: &Circuit,
    x0: &[f64],
    inputs: &[StateVector],
    labels: &[u8],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Vec<f64>, RunLog, Vec<f64>)> {
    let settings = &cfg.classifier;
    let opt = OptimizerConfig { kind: OptimizerKind::Adam, ..cfg.optimizer.clone() };
    let full = CircuitObjective::Bce { inputs: inputs.to_vec(), labels: labels.to_vec(), epsilon: settings.epsilon };
    let batch = settings.batch_size.unwrap_or(inputs.len()).min(inputs.len());
    let mut x = x0.to_vec();
    let mut adam = AdamState::new(x.len());
    let (mut fevals, mut grads) = (0usize, 0usize);
    let mut entries = Vec::with_capacity(settings.epochs + 1);
    let mut accuracy = Vec::with_capacity(settings.epochs + 1);
    let log_point = |x: &[f64], step: usize, fevals: usize| -> Result<(LogEntry, f64)> {
        let loss = objective_value(c, x, &full)?;
        let g = gradient(c, x, &full, cfg.gradient)?;
        let e = LogEntry { step, objective: loss, grad_norm: norm(&g.values), fevals, seconds: 0.0 };
        Ok((e, accuracy_of(c, x, inputs, labels)?))
    };
    let (e, a) = log_point(&x, 0, 0)?;
    entries.push(e);
    accuracy.push(a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_ba7c);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 1..=settings.epochs {
        if batch < inputs.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let obj = CircuitObjective::Bce {
                inputs: chunk.iter().map(|&i| inputs[i].clone()).collect(),
                labels: chunk.iter().map(|&i| labels[i]).collect(),
                epsilon: settings.epsilon,
            };
            let g = gradient(c, &x, &obj, cfg.gradient)?;
            fevals += g.evaluations;
            grads += g.evaluations;
            adam.step(&mut x, &g.values, &opt);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: epoch, detail: "parameters became non-finite".into() });
            }
        }
        let (e, a) = log_point(&x, epoch, fevals)?;
        entries.push(e);
        accuracy.push(a);
    }
    let log = RunLog { entries, objective_evals: 0, gradient_evals: grads, stop: StopReason::MaxIterations };
    Ok((x, log, accuracy))
}

/// Trains the MPS classifier of the ml pretraining stage.
pub fn pretrain_classifier(
    cfg: &ExperimentConfig,
    data: &LabeledDataset,
    seed: u64,
) -> Result<(MpsClassifier, Vec<EpochLog>)> {
    let training = TrainingConfig {
        learning_rate: cfg.pretrain.learning_rate,
        epochs: cfg.pretrain.epochs,
        batch_size: cfg.pretrain.batch_size,
        chi_max: cfg.pretrain.chi,
        seed,
        epsilon: cfg.classifier.epsilon,
    };
    let mut clf = MpsClassifier::new(data.num_features(), training)?;
    let log = clf.train(data)?;
    Ok((clf, log))
}

/// PCA, MPS classifier training, compilation of the inverse staircase and
/// circuit training with mini-batch Adam for every arm.
pub fn run_classifier_experiment(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    if cfg.problem != ProblemKind::Classify {
        return Err(Error::invalid("not a classification config"));
    }
    let n = cfg.n_qubits.ok_or_else(|| Error::invalid("classification needs n_qubits"))?;
    if n < 2 {
        return Err(Error::invalid("circuits need at least two qubits"));
    }
    let data = classifier_dataset(cfg)?;
    let inputs = data.samples().iter().map(|x| feature_state(x)).collect::<Result<Vec<_>>>()?;
    let opt_print = optimizer_fingerprint(cfg);
    let mut pretraining = Vec::new();
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let (clf, _) = pretrain_classifier(cfg, &data, seed)?;
        let training = clf.config.clone();
        let stair = mps_to_staircase(clf.state())?.adjoint()?;
        let placements = stair.placements();
        let need = min_depth(&placements);
        if cfg.depth < need {
            return Err(Error::invalid(format!(
                "depth {} cannot hold the compiled diagonal; at least {need} is needed",
                cfg.depth
            )));
        }
        let circuit = brickwall_circuit(n, cfg.depth, cfg.off_diagonal(), &placements)?;
        let compiled = circuit.params();
        let mut parity = 0.0f64;
        for (x, s) in data.samples().iter().zip(&inputs) {
            let f_mps = clf.decision_function(x)?;
            let f_circ = crate::circuit::prob_all_zeros(&circuit, &compiled, s)?;
            parity = parity.max((f_mps - f_circ).abs());
        }
        let target = dense_normalized(clf.state())?;
        let inverse = run(&circuit, &compiled, &target)?;
        pretraining.push(PretrainRecord {
            seed,
            method: PretrainMethod::Ml,
            objective: clf.bce_loss(&data, cfg.classifier.epsilon)?,
            max_bond: clf.state().max_bond(),
            compile_fidelity: inverse.fidelity(&StateVector::zero_state(n)),
            accuracy: Some(clf.accuracy(&data)?),
            parity_error: Some(parity),
            training: Some(training),
        });
        let topology = topology_fingerprint(&circuit);
        for &init in &cfg.inits {
            let x0 = initial_params(init, &compiled, seed);
            let (x, log, acc) = train_classifier_circuit(&circuit, &x0, &inputs, data.labels(), cfg, seed)?;
            runs.push(RunRecord {
                init,
                seed,
                log,
                final_params: x,
                accuracy: Some(acc),
                topology: topology.clone(),
                optimizer: opt_print.clone(),
            });
        }
    }
    Ok(ComparisonReport {
        config: cfg.clone(),
        num_qubits: n,
        reference: None,
        convergence_tol: LOSS_CONVERGENCE_TOL,
        pretraining,
        runs,
    })
}

#[derive(Serialize)]
struct RunSummary<'a> {
    init: InitKind,
    seed: u64,
    log_file: String,
    steps: usize,
    initial_objective: f64,
    final_objective: f64,
    best_objective: f64,
    fevals_to_convergence: usize,
    total_fevals: usize,
    stop: StopReason,
    accuracy: Option<&'a [f64]>,
    topology: &'a str,
    optimizer: &'a str,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: ExperimentConfig,
    num_qubits: usize,
    reference: Option<f64>,
    convergence_tol: f64,
    pretraining: &'a [PretrainRecord],
    runs: Vec<RunSummary<'a>>,
    aggregates: Vec<Aggregate>,
}

pub fn log_file_name(init: InitKind, seed: u64) -> String {
    format!("run-{}-seed{seed}.csv", init.name())
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const LONG_TABLE_FILE: &str = "long.csv";

/// Writes one log per run, `summary.json`, and the long table
/// `init,seed,step,objective`. Returns the paths written.
pub fn emit_report(r: &ComparisonReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if r.config.seeds.is_empty() || r.runs.is_empty() {
        return Err(Error::invalid("the report has no runs (empty seed list)"));
    }
    for run in &r.runs {
        if run.log.entries.is_empty() {
            return Err(Error::invalid(format!("run {} seed {} has an empty log", run.init.name(), run.seed)));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut long = String::from("init,seed,step,objective\n");
    let mut runs = Vec::with_capacity(r.runs.len());
    for run in &r.runs {
        let name = log_file_name(run.init, run.seed);
        let path = dir.join(&name);
        run.log.save_csv(&path)?;
        written.push(path);
        for e in &run.log.entries {
            let _ = writeln!(long, "{},{},{},{}", run.init.name(), run.seed, e.step, e.objective);
        }
        runs.push(RunSummary {
            init: run.init,
            seed: run.seed,
            log_file: name,
            steps: run.log.entries.len(),
            initial_objective: run.initial_objective(),
            final_objective: run.final_objective(),
            best_objective: run.best_objective(),
            fevals_to_convergence: run.fevals_to_convergence(r.convergence_tol),
            total_fevals: run.log.entries.last().map_or(0, |e| e.fevals),
            stop: run.log.stop,
            accuracy: run.accuracy.as_deref(),
            topology: &run.topology,
            optimizer: &run.optimizer,
        });
    }
    // the destination is not part of the experiment, so the same run writes
    // the same bytes wherever it goes
    let summary = Summary {
        config: ExperimentConfig { output_dir: None, ..r.config.clone() },
        num_qubits: r.num_qubits,
        reference: r.reference,
        convergence_tol: r.convergence_tol,
        pretraining: &r.pretraining,
        runs,
        aggregates: r.aggregates(),
    };
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    let path = dir.join(LONG_TABLE_FILE);
    std::fs::write(&path, long).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
