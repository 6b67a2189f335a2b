//! `mpsinit`: stage-wise front end for pretraining, compiling and training.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 unreadable or malformed files,
//! 4 numerical failure, 5 bond dimension beyond what the compiler handles.
//! Progress goes to stderr; results go to stdout and the requested files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpsinit::circuit::{run, Circuit, GradientMethod, StateVector};
use mpsinit::compiler::{approx_compile_chi4, brickwall_circuit, min_depth, mps_to_staircase, OffDiagonal};
use mpsinit::mps::{Mpo, Mps, DENSE_CAP};
use mpsinit::mpsml::LabeledDataset;
use mpsinit::optimize::{minimize, CircuitProblem, OptimizerConfig, OptimizerKind, RunLog};
use mpsinit::problems::{exact_ground, parse_pauli_hamiltonian, WeightedGraph};
use mpsinit::runner::{
    self, Ansatz, CutObjective, ExperimentConfig, InitKind, PretrainMethod, ProblemKind,
};
use mpsinit::circuit::CircuitObjective;
use mpsinit::{Error, Result};

#[derive(Parser)]
#[command(name = "mpsinit", version, about = "Pretrain an MPS, compile it into a circuit, and train the circuit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical MPS stage: TEBD, DMRG or the sweep classifier.
    Pretrain(PretrainCmd),
    /// Compile an MPS file into an identity-padded brick-wall circuit.
    Compile(CompileCmd),
    /// Optimize a circuit file on an energy problem.
    Train(TrainCmd),
    /// Run the classifier pipeline for every initialization.
    Classify(ClassifyCmd),
    /// Run a comparison experiment from a JSON config plus overrides.
    Experiment(ExperimentCmd),
    /// Print the exact minimum eigenvalue of a problem.
    Exact(ExactCmd),
    /// Pretty-print and validate any artifact file.
    Inspect(InspectCmd),
}

#[derive(Args, Default)]
struct ProblemArgs {
    /// maxcut, hamiltonian-file, tfim or classify; inferred from the input
    /// flags when omitted.
    #[arg(long)]
    problem: Option<ProblemKind>,
    /// Edge list `u v w`; the default 6-node instance when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Pauli-sum file, one `coeff P0 P1 ...` term per line.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    /// CSV of features with the 0/1 label last.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    tfim_j: Option<f64>,
    #[arg(long)]
    tfim_g: Option<f64>,
    /// maximize-cut or minimize-eq1.
    #[arg(long)]
    objective: Option<CutObjective>,
}

impl ProblemArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let inferred = if self.hamiltonian.is_some() {
            Some(ProblemKind::HamiltonianFile)
        } else if self.graph.is_some() {
            Some(ProblemKind::Maxcut)
        } else if self.dataset.is_some() {
            Some(ProblemKind::Classify)
        } else {
            None
        };
        if let Some(p) = self.problem.or(inferred) {
            cfg.problem = p;
        }
        set(&mut cfg.graph, self.graph.clone().map(Some));
        set(&mut cfg.hamiltonian, self.hamiltonian.clone().map(Some));
        set(&mut cfg.dataset, self.dataset.clone().map(Some));
        set(&mut cfg.n_qubits, self.n_qubits.map(Some));
        set(&mut cfg.tfim_j, self.tfim_j);
        set(&mut cfg.tfim_g, self.tfim_g);
        set(&mut cfg.objective, self.objective);
    }
}

#[derive(Args, Default)]
struct PretrainArgs {
    /// tebd, dmrg or ml; picked from the problem when omitted.
    #[arg(long)]
    method: Option<PretrainMethod>,
    #[arg(long)]
    chi: Option<usize>,
    #[arg(long)]
    dtau: Option<f64>,
    /// TEBD steps.
    #[arg(long)]
    steps: Option<usize>,
    /// DMRG sweeps.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Sweep-classifier epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Sweep-classifier learning rate.
    #[arg(long)]
    ml_learning_rate: Option<f64>,
    /// Sweep-classifier batch size; full batch when omitted.
    #[arg(long)]
    ml_batch_size: Option<usize>,
    /// Sweeps of the bond-4 compilation fit.
    #[arg(long)]
    fit_iterations: Option<usize>,
    /// Compile energy problems from the MPS's own real gauge instead of a
    /// seeded random complex one.
    #[arg(long)]
    keep_gauge: bool,
}

impl PretrainArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let p = &mut cfg.pretrain;
        set(&mut p.method, self.method.map(Some));
        set(&mut p.chi, self.chi);
        set(&mut p.dtau, self.dtau);
        set(&mut p.steps, self.steps);
        set(&mut p.sweeps, self.sweeps);
        set(&mut p.epochs, self.epochs);
        set(&mut p.learning_rate, self.ml_learning_rate);
        set(&mut p.batch_size, self.ml_batch_size.map(Some));
        set(&mut p.fit_iterations, self.fit_iterations);
        if self.keep_gauge {
            p.random_gauge = false;
        }
    }
}

#[derive(Args, Default)]
struct OptimizerArgs {
    /// gd-decay, bfgs or adam.
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    objective_tol: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// adjoint or parameter-shift.
    #[arg(long)]
    gradient: Option<GradientMethod>,
    /// Record wall-clock seconds in the logs (breaks bitwise reproducibility).
    #[arg(long)]
    record_time: bool,
}

impl OptimizerArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let o = &mut cfg.optimizer;
        set(&mut o.kind, self.optimizer);
        set(&mut o.learning_rate, self.learning_rate.map(Some));
        set(&mut o.decay, self.decay);
        set(&mut o.max_iterations, self.max_iterations);
        set(&mut o.grad_tol, self.grad_tol);
        set(&mut o.objective_tol, self.objective_tol);
        set(&mut o.beta1, self.beta1);
        set(&mut o.beta2, self.beta2);
        if self.record_time {
            o.record_time = true;
        }
        set(&mut cfg.gradient, self.gradient);
    }
}

#[derive(Args, Default)]
struct ClassifierArgs {
    /// Circuit training epochs.
    #[arg(long)]
    train_epochs: Option<usize>,
    /// Circuit mini-batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Size of the synthetic dataset used without `--dataset`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    /// Skip mean removal before PCA.
    #[arg(long)]
    no_pca_center: bool,
    /// Probability clamp of the cross-entropy.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ClassifierArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let c = &mut cfg.classifier;
        set(&mut c.epochs, self.train_epochs);
        set(&mut c.batch_size, self.batch_size.map(Some));
        set(&mut c.samples, self.samples);
        set(&mut c.data_seed, self.data_seed);
        if self.no_pca_center {
            c.pca_center = false;
        }
        set(&mut c.epsilon, self.epsilon);
    }
}

#[derive(Args)]
struct PretrainCmd {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    pretrain: PretrainArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the MPS.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompileCmd {
    #[arg(long)]
    mps: PathBuf,
    /// Brick-wall depth; must hold every compiled gate.
    #[arg(long)]
    depth: usize,
    /// brickwall-kak (default) or brickwall-ry-crx off-diagonal blocks.
    #[arg(long)]
    ansatz: Option<Ansatz>,
    /// Compile the inverse preparation, as used by the classifier.
    #[arg(long)]
    adjoint: bool,
    #[arg(long, default_value_t = 20)]
    fit_iterations: usize,
    /// Compile from the MPS's own gauge rather than a random complex gauge
    /// seeded by `--seed` (the inverse staircase always keeps it).
    #[arg(long)]
    keep_gauge: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// mps keeps the circuit's stored angles; random or identity replace them.
    #[arg(long, default_value = "mps")]
    init: InitKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run log CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the circuit with the trained angles.
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyCmd {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    n_qubits: usize,
    /// Defaults to the qubit count.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    ansatz: Option<Ansatz>,
    /// Comma-separated arms.
    #[arg(long, value_delimiter = ',')]
    inits: Option<Vec<InitKind>>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pretrain: PretrainArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Output directory for logs, summary.json and long.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentCmd {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    ansatz: Option<Ansatz>,
    #[arg(long, value_delimiter = ',')]
    inits: Option<Vec<InitKind>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pretrain: PretrainArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactCmd {
    #[command(flatten)]
    problem: ProblemArgs,
}

#[derive(Args)]
struct InspectCmd {
    path: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) => 3,
        Error::BondTooLarge { .. } => 5,
        Error::InvalidArgument(_) | Error::Shape(_) | Error::TooLarge { .. } => 2,
        _ => 4,
    }
}

/// Loads a file, reporting anything wrong with its content as a format error.
fn load<T>(path: &Path, f: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    f(path).map_err(|e| match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) => e,
        other => Error::Format(format!("{}: {other}", path.display())),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pretrain(c) => pretrain(c),
        Command::Compile(c) => compile(c),
        Command::Train(c) => train(c),
        Command::Classify(c) => classify(c),
        Command::Experiment(c) => experiment(c),
        Command::Exact(c) => exact(c),
        Command::Inspect(c) => inspect(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn pretrain(c: PretrainCmd) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    c.problem.apply(&mut cfg);
    c.pretrain.apply(&mut cfg);
    c.classifier.apply(&mut cfg);
    cfg.seeds = vec![c.seed];
    cfg.validate()?;
    let method = cfg.pretrain_method();
    let (mps, objective) = if cfg.problem == ProblemKind::Classify {
        let data = runner::classifier_dataset(&cfg)?;
        eprintln!("training the MPS classifier on {} samples for {} epochs", data.len(), cfg.pretrain.epochs);
        let (clf, log) = runner::pretrain_classifier(&cfg, &data, c.seed)?;
        for e in &log {
            eprintln!("epoch {} loss {:.6} accuracy {:.4}", e.epoch, e.loss, e.accuracy);
        }
        let loss = clf.bce_loss(&data, cfg.classifier.epsilon)?;
        println!("accuracy = {}", clf.accuracy(&data)?);
        (clf.state().clone(), loss)
    } else {
        let p = runner::energy_problem(&cfg)?;
        let mpo = Mpo::from_pauli_sum(&p.h)?;
        eprintln!("running {method:?} on {} qubits with chi {}", p.n, cfg.pretrain.chi);
        let mps = runner::pretrain_energy(&cfg, &p, &mpo, c.seed)?;
        let e = mps.expectation(&mpo)?;
        if let Some(r) = p.reference {
            eprintln!("exact minimum {r}, gap {:.3e}", e - r);
        }
        (mps, e)
    };
    mps.save(&c.out)?;
    println!("objective = {objective}");
    println!("max_bond = {}", mps.max_bond());
    Ok(())
}

fn dense_target(s: &Mps) -> Result<StateVector> {
    let amps = s.to_dense_capped(DENSE_CAP)?;
    let nrm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(nrm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    StateVector::from_amplitudes(s.len(), amps.iter().map(|z| z / nrm).collect())
}

fn compile(c: CompileCmd) -> Result<()> {
    let mut mps = load(&c.mps, |p| Mps::load(p))?;
    let n = mps.len();
    if n < 2 {
        return Err(Error::invalid("circuits need at least two qubits"));
    }
    let chi = mps.max_bond();
    if chi > 4 {
        return Err(Error::BondTooLarge { found: chi, max: 4 });
    }
    if c.adjoint && chi > 2 {
        return Err(Error::BondTooLarge { found: chi, max: 2 });
    }
    if !c.adjoint && !c.keep_gauge {
        mps = mps.randomize_gauge(c.seed)?;
    }
    let kind = c.ansatz.map_or(OffDiagonal::FullKak, Ansatz::off_diagonal);
    let mut truncation = None;
    let placements = if c.adjoint {
        mps_to_staircase(&mps)?.adjoint()?.placements()
    } else if chi <= 2 {
        mps_to_staircase(&mps)?.placements()
    } else {
        eprintln!("bond {chi}: fitting the two-diagonal layout for {} sweeps", c.fit_iterations);
        let a = approx_compile_chi4(&mps, c.fit_iterations)?;
        truncation = Some(a.truncation_fidelity);
        a.placements()
    };
    let need = min_depth(&placements);
    if c.depth < need {
        return Err(Error::invalid(format!(
            "depth {} is too shallow: the compiled gates occupy {need} brick-wall layers",
            c.depth
        )));
    }
    let circuit = brickwall_circuit(n, c.depth, kind, &placements)?;
    let target = dense_target(&mps)?;
    let params = circuit.params();
    let fidelity = if c.adjoint {
        run(&circuit, &params, &target)?.fidelity(&StateVector::zero_state(n))
    } else {
        run(&circuit, &params, &StateVector::zero_state(n))?.fidelity(&target)
    };
    circuit.save(&c.out)?;
    println!("fidelity = {fidelity}");
    if let Some(t) = truncation {
        println!("truncation_fidelity = {t}");
    }
    println!("depth = {}", c.depth);
    println!("parameters = {}", circuit.num_params());
    Ok(())
}

fn train(c: TrainCmd) -> Result<()> {
    let circuit = load(&c.circuit, |p| Circuit::load(p))?;
    let mut cfg = ExperimentConfig::default();
    c.problem.apply(&mut cfg);
    c.optimizer.apply(&mut cfg);
    cfg.validate()?;
    if cfg.problem == ProblemKind::Classify {
        return Err(Error::invalid("train handles energy problems; use classify for datasets"));
    }
    let p = runner::energy_problem(&cfg)?;
    if circuit.num_qubits() != p.n {
        return Err(Error::shape(format!(
            "circuit has {} qubits but the problem has {}",
            circuit.num_qubits(),
            p.n
        )));
    }
    let x0 = runner::initial_params(c.init, &circuit.params(), c.seed);
    let objective = CircuitObjective::Energy(p.h.clone());
    let mut problem = CircuitProblem { circuit: &circuit, objective: &objective, method: cfg.gradient };
    eprintln!("optimizing {} parameters with {:?}", x0.len(), cfg.optimizer.kind);
    let (x, log) = minimize(&mut problem, &x0, &cfg.optimizer)?;
    let trained = circuit.with_params(&x)?;
    log.save_csv(&c.out)?;
    if let Some(path) = &c.params_out {
        trained.save(path)?;
    }
    println!("initial = {}", log.entries[0].objective);
    println!("final = {}", log.final_objective());
    println!("fevals = {}", log.entries.last().map_or(0, |e| e.fevals));
    println!("stop = {:?}", log.stop);
    if let Some(r) = p.reference {
        println!("exact = {r}");
        println!("gap = {}", log.final_objective() - r);
    }
    if p.graph.is_some() {
        let sign = if cfg.objective == CutObjective::MaximizeCut { -1.0 } else { 1.0 };
        println!("cut = {}", sign * log.final_objective() / 2.0);
    }
    Ok(())
}

fn print_report(r: &runner::ComparisonReport, written: &[PathBuf]) {
    if let Some(reference) = r.reference {
        println!("reference = {reference}");
    }
    for p in &r.pretraining {
        println!(
            "pretrain seed {} objective {} compile_fidelity {}",
            p.seed, p.objective, p.compile_fidelity
        );
    }
    for run in &r.runs {
        let mut line = format!(
            "{} seed {} initial {} final {} fevals_to_convergence {}",
            run.init.name(),
            run.seed,
            run.initial_objective(),
            run.final_objective(),
            run.fevals_to_convergence(r.convergence_tol)
        );
        if let Some(acc) = &run.accuracy {
            let _ = write!(line, " accuracy {}", acc.last().copied().unwrap_or(f64::NAN));
        }
        println!("{line}");
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
}

fn classify(c: ClassifyCmd) -> Result<()> {
    let mut cfg = ExperimentConfig {
        problem: ProblemKind::Classify,
        n_qubits: Some(c.n_qubits),
        depth: c.depth.unwrap_or(c.n_qubits),
        dataset: c.dataset.clone(),
        ansatz: c.ansatz,
        optimizer: OptimizerConfig::new(OptimizerKind::Adam),
        ..Default::default()
    };
    set(&mut cfg.inits, c.inits.clone());
    set(&mut cfg.seeds, c.seeds.clone());
    c.pretrain.apply(&mut cfg);
    c.optimizer.apply(&mut cfg);
    c.classifier.apply(&mut cfg);
    cfg.output_dir = Some(c.out.clone());
    cfg.validate()?;
    eprintln!("classifier pipeline on {} qubits, depth {}", c.n_qubits, cfg.depth);
    let report = runner::run_classifier_experiment(&cfg)?;
    let written = runner::emit_report(&report, &c.out)?;
    print_report(&report, &written);
    Ok(())
}

fn experiment(c: ExperimentCmd) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    c.problem.apply(&mut cfg);
    set(&mut cfg.depth, c.depth);
    set(&mut cfg.ansatz, c.ansatz.map(Some));
    set(&mut cfg.inits, c.inits.clone());
    set(&mut cfg.seeds, c.seeds.clone());
    c.pretrain.apply(&mut cfg);
    c.optimizer.apply(&mut cfg);
    c.classifier.apply(&mut cfg);
    set(&mut cfg.output_dir, c.out.clone().map(Some));
    cfg.validate()?;
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Error::invalid("no output directory: pass --out or set output_dir"))?;
    eprintln!("running {:?} with {} arm(s) over {} seed(s)", cfg.problem, cfg.inits.len(), cfg.seeds.len());
    let report = runner::run_experiment(&cfg)?;
    let written = runner::emit_report(&report, &dir)?;
    print_report(&report, &written);
    Ok(())
}

fn exact(c: ExactCmd) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    c.problem.apply(&mut cfg);
    if cfg.problem == ProblemKind::Classify {
        return Err(Error::invalid("classification has no Hamiltonian"));
    }
    cfg.validate()?;
    let p = runner::energy_problem(&cfg)?;
    let (e, _) = exact_ground(&p.h)?;
    println!("{e}");
    if p.graph.is_some() {
        let cut = if cfg.objective == CutObjective::MaximizeCut { -e / 2.0 } else { e / 2.0 };
        eprintln!("optimal cut {cut}");
    }
    Ok(())
}

fn inspect(c: InspectCmd) -> Result<()> {
    let path = &c.path;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let out = describe(&text, &name).map_err(|e| match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Format(_) => e,
        other => Error::Format(format!("{name}: {other}")),
    })?;
    print!("{out}");
    Ok(())
}

/// Builds the whole description before anything is printed.
fn describe(text: &str, name: &str) -> Result<String> {
    let mut out = String::new();
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("{name}: {e}")))?;
        let has = |k: &str| value.get(k).is_some();
        if has("tensors") {
            let s = Mps::from_json(text)?;
            let _ = writeln!(out, "MPS on {} sites", s.len());
            let _ = writeln!(out, "bond dimensions {:?}", s.bond_dims());
            let _ = writeln!(out, "canonical form {:?}", s.canonical_form());
            let _ = writeln!(out, "norm {}", s.norm());
        } else if has("gates") {
            let circ = Circuit::from_json(text)?;
            let _ = writeln!(out, "circuit on {} qubits", circ.num_qubits());
            let _ = writeln!(out, "{} gates, {} parameters", circ.gates().len(), circ.num_params());
            let mut counts = std::collections::BTreeMap::new();
            for g in circ.gates() {
                *counts.entry(format!("{:?}", g.kind())).or_insert(0usize) += 1;
            }
            for (k, v) in counts {
                let _ = writeln!(out, "  {k}: {v}");
            }
        } else if has("runs") && has("aggregates") {
            let runs = value["runs"].as_array().ok_or_else(|| Error::Format(format!("{name}: runs is not a list")))?;
            ExperimentConfig::from_json(&value["config"].to_string())?;
            let _ = writeln!(out, "experiment summary with {} runs", runs.len());
            if let Some(r) = value.get("reference").and_then(|v| v.as_f64()) {
                let _ = writeln!(out, "reference {r}");
            }
            for r in runs {
                let _ = writeln!(
                    out,
                    "  {} seed {}: initial {} final {}",
                    r["init"].as_str().unwrap_or("?"),
                    r["seed"],
                    r["initial_objective"],
                    r["final_objective"]
                );
            }
        } else {
            let cfg = ExperimentConfig::from_json(text)?;
            cfg.validate()?;
            let _ = writeln!(out, "experiment config");
            out.push_str(&cfg.to_json());
            out.push('\n');
        }
        return Ok(out);
    }
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("");
    if first == RunLog::CSV_HEADER {
        let rows = csv_rows(text, name, 5)?;
        let mut prev = 0.0;
        for (k, r) in rows.iter().enumerate() {
            if r[3] < prev {
                return Err(Error::Parse { path: name.into(), line: k + 2, msg: "fevals decreased".into() });
            }
            prev = r[3];
        }
        let _ = writeln!(out, "run log with {} entries", rows.len());
        if let (Some(a), Some(b)) = (rows.first(), rows.last()) {
            let _ = writeln!(out, "objective {} -> {}", a[1], b[1]);
            let _ = writeln!(out, "fevals {}", b[3]);
        }
        return Ok(out);
    }
    if first == "init,seed,step,objective" {
        let mut n = 0usize;
        for (k, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let ok = f.len() == 4
                && f[0].parse::<InitKind>().is_ok()
                && f[1].parse::<u64>().is_ok()
                && f[2].parse::<usize>().is_ok()
                && f[3].parse::<f64>().is_ok();
            if !ok {
                return Err(Error::Parse { path: name.into(), line: k + 1, msg: "bad long-table row".into() });
            }
            n += 1;
        }
        let _ = writeln!(out, "long table with {n} rows");
        return Ok(out);
    }
    if let Ok(h) = parse_pauli_hamiltonian(text, name) {
        let _ = writeln!(out, "Pauli Hamiltonian on {} qubits with {} terms", h.num_qubits(), h.terms().len());
        let _ = writeln!(out, "constant {}", h.constant());
        return Ok(out);
    }
    if let Ok(g) = WeightedGraph::parse(text, name, None) {
        let total: f64 = g.edges.iter().map(|e| e.2).sum();
        let _ = writeln!(out, "graph with {} vertices and {} edges, total weight {total}", g.n, g.edges.len());
        return Ok(out);
    }
    if let Ok(d) = LabeledDataset::parse_csv(text, name) {
        let ones = d.labels().iter().filter(|&&y| y == 1).count();
        let _ = writeln!(out, "dataset with {} samples and {} features, {ones} positive", d.len(), d.num_features());
        return Ok(out);
    }
    Err(Error::Format(format!("{name}: not a recognized artifact")))
}

fn csv_rows(text: &str, name: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { path: name.into(), line: k + 1, msg: e.to_string() })?;
        if row.len() != width {
            return Err(Error::Parse { path: name.into(), line: k + 1, msg: format!("expected {width} fields") });
        }
        rows.push(row);
    }
    Ok(rows)
}
