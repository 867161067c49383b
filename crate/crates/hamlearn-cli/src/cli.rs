//! Argument parsing and command implementations for the `hamlearn` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use hamlearn::analysis::{kl_grid, AnalysisError, KL_BETAS, KL_EPSILONS};
use hamlearn::clusters::enumerate_clusters;
use hamlearn::derivatives::DerivativeEngine;
use hamlearn::hamiltonian::{build_dual_graph, greedy_coloring, parse_hamiltonian, HamiltonianError, HamiltonianSpec};
use hamlearn::mrf::{self, MrfError};
use hamlearn::qsim::{self, QsimError, DEFAULT_CAP};
use hamlearn::realtime::{self, DynamicsError};
use hamlearn::series::{build_all_series, truncation_order, ExpansionParameters, SeriesError};
use hamlearn::solver::{newton_learn, sample_size, LearnReport, SolverError, DEFAULT_SAMPLE_CONSTANT};

use crate::verify;

/// Order used when the regime is overridden and no `--order` is given.
pub const DEFAULT_OVERRIDE_ORDER: usize = 5;
/// Largest shot count drawn from the sample-size formula without an explicit `--shots`.
pub const MAX_FORMULA_SHOTS: u64 = 1_000_000_000;

#[derive(Debug, Parser)]
#[command(name = "hamlearn", version, about = "Learn local Hamiltonians from high-temperature Gibbs states")]
pub struct Cli {
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the truncated series of every term.
    Expand(ExpandArgs),
    /// Sample Pauli expectation estimates from the dense Gibbs state.
    Simulate(SimulateArgs),
    /// Learn coefficients.
    #[command(subcommand)]
    Learn(LearnMode),
    /// Draw exact samples from an MRF.
    SampleMrf(SampleMrfArgs),
    /// KL divergence of the two-qubit hard pair against its bound.
    Bounds(BoundsArgs),
    /// Run the oracle-equivalence suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Largest qubit count for dense simulation.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Truncation order; defaults to the one implied by `--epsilon`.
    #[arg(long)]
    pub order: Option<usize>,
    /// Also dump the enumerated clusters.
    #[arg(long)]
    pub list_clusters: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub shots: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Truncation order; defaults to the one implied by `--epsilon`.
    #[arg(long)]
    pub order: Option<usize>,
    /// Run outside the guaranteed regime; the report is marked non-guaranteed.
    #[arg(long = "override")]
    pub allow_override: bool,
    /// Use exact expectations from the dense oracle instead of sampling.
    #[arg(long, conflicts_with_all = ["shots", "seed"])]
    pub exact_expectations: bool,
    /// Shots per color class; defaults to the sample-size formula.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum LearnMode {
    /// From Gibbs-state expectations at the spec's β.
    Gibbs(LearnArgs),
    /// From short-time evolution of random product states.
    Dynamics {
        #[arg(long)]
        time: f64,
        #[command(flatten)]
        args: LearnArgs,
    },
    /// Classical MRF coefficients from samples.
    Mrf(MrfArgs),
}

#[derive(Debug, Args)]
pub struct MrfArgs {
    pub spec: PathBuf,
    /// Sample file, one row of ±1 spins per line.
    #[arg(long, conflicts_with_all = ["generate", "exact_conditionals"])]
    pub samples: Option<PathBuf>,
    /// Draw this many samples from the spec itself.
    #[arg(long, conflicts_with = "exact_conditionals")]
    pub generate: Option<usize>,
    /// Use enumerated conditionals instead of samples.
    #[arg(long)]
    pub exact_conditionals: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inverse temperature used by the estimator; defaults to the spec's.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleMrfArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only this suite (clusters, derivatives, series, analysis).
    #[arg(long)]
    pub suite: Option<String>,
    /// Test hook: perturb every computed derivative by this amount.
    #[arg(long, hide = true)]
    pub perturb_derivatives: Option<f64>,
}

/// Failures with their exit codes.
#[derive(Debug)]
pub enum CliError {
    VerifyFailed,
    Input(String),
    Regime(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Input(_) => 2,
            CliError::Regime(_) => 3,
            CliError::Numeric(_) => 5,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::VerifyFailed => "verification failed".into(),
            CliError::Input(m) => format!("input error: {m}"),
            CliError::Regime(m) => format!("regime error: {m}"),
            CliError::Numeric(m) => format!("numeric error: {m}"),
        }
    }
}

impl From<HamiltonianError> for CliError {
    fn from(e: HamiltonianError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MrfError> for CliError {
    fn from(e: MrfError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<QsimError> for CliError {
    fn from(e: QsimError) -> Self {
        match e {
            QsimError::Invariant(m) => CliError::Numeric(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::Regime(_) => CliError::Regime(format!("{e}; pass --override with --order to run anyway")),
            SeriesError::Invalid(m) => CliError::Input(m),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Regime { .. } => CliError::Regime(format!("{e}; pass --override to run anyway")),
            SolverError::Numeric(_) => CliError::Numeric(e.to_string()),
            SolverError::Invalid(m) => CliError::Input(m),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Regime { .. } => CliError::Regime(format!("{e}; pass --override to run anyway")),
            DynamicsError::Invalid(m) => CliError::Input(m),
            DynamicsError::Qsim(q) => q.into(),
            DynamicsError::Solver(s) => s.into(),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Successful outcome: exit 0, or 4 when the result carries no guarantee.
pub enum Outcome {
    Ok,
    NonGuaranteed,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_hamiltonian(path: &Path) -> Result<HamiltonianSpec, CliError> {
    parse_hamiltonian(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed {s}");
        s
    })
}

/// `--order` if given, else the order implied by `epsilon`. The flag says
/// whether the order is large enough for the tail bound.
fn choose_order(
    s: f64,
    epsilon: f64,
    order: Option<usize>,
    params: &ExpansionParameters,
    allow_override: bool,
) -> Result<(usize, bool), CliError> {
    if order == Some(0) {
        return Err(CliError::Input("--order must be positive".into()));
    }
    match (truncation_order(s, epsilon, params), order) {
        (Ok(m), None) => Ok((m, true)),
        (Ok(m), Some(o)) => Ok((o, o >= m)),
        (Err(SeriesError::Regime(_)), Some(o)) if allow_override => Ok((o, false)),
        (Err(SeriesError::Regime(_)), None) if allow_override => Ok((DEFAULT_OVERRIDE_ORDER, false)),
        (Err(e), _) => Err(e.into()),
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Expand(a) => expand(a),
        Command::Simulate(a) => simulate(a),
        Command::Learn(LearnMode::Gibbs(a)) => learn_gibbs(a),
        Command::Learn(LearnMode::Dynamics { time, args }) => learn_dynamics(time, args),
        Command::Learn(LearnMode::Mrf(a)) => learn_mrf(a),
        Command::SampleMrf(a) => sample_mrf(a),
        Command::Bounds(a) => bounds(a),
        Command::Verify(a) => {
            if verify::run(a.suite.as_deref(), a.perturb_derivatives)? {
                Ok(Outcome::Ok)
            } else {
                Err(CliError::VerifyFailed)
            }
        }
    }
}

fn expand(a: ExpandArgs) -> Result<Outcome, CliError> {
    let h = load_hamiltonian(&a.spec)?;
    let g = build_dual_graph(&h);
    let params = ExpansionParameters::new(g.max_degree);
    let m_hat = match a.order {
        Some(0) => return Err(CliError::Input("--order must be positive".into())),
        Some(m) => m,
        None => truncation_order(h.beta, a.epsilon, &params)?,
    };
    let ids: Vec<String> = h.terms.iter().map(|t| t.id.clone()).collect();
    let mut out = String::new();
    if a.list_clusters {
        for root in 0..h.len() {
            for w in 1..=m_hat as u32 + 1 {
                for c in enumerate_clusters(&g, root, w).map_err(|e| CliError::Input(e.to_string()))? {
                    let _ = writeln!(out, "cluster\t{}\t{}\t{}", ids[root], w, c.format_with(&ids));
                }
            }
        }
    }
    let engine = DerivativeEngine::new();
    for f in build_all_series(&h, &g, m_hat, &vec![0.0; h.len()], &engine) {
        out.push_str(&f.dump(&ids));
    }
    emit(&a.output, &out)?;
    Ok(Outcome::Ok)
}

fn simulate(a: SimulateArgs) -> Result<Outcome, CliError> {
    let h = load_hamiltonian(&a.spec)?;
    let seed = resolve_seed(a.seed);
    let coloring = greedy_coloring(&build_dual_graph(&h));
    let est = qsim::sample_pauli_estimates(&h, &coloring, a.shots, seed, a.common.cap)?;
    emit(&a.common.output, &est.to_text())?;
    Ok(Outcome::Ok)
}

fn finish(report: &LearnReport, output: &Option<PathBuf>) -> Result<Outcome, CliError> {
    emit(output, &report.to_text())?;
    if report.guaranteed {
        Ok(Outcome::Ok)
    } else {
        eprintln!("warning: result is outside the guaranteed regime");
        Ok(Outcome::NonGuaranteed)
    }
}

fn shots_for(a: &LearnArgs, beta: f64, degree: usize, m: usize) -> Result<u64, CliError> {
    if let Some(s) = a.shots {
        return Ok(s);
    }
    let s = sample_size(beta, a.epsilon, a.delta, degree, m, DEFAULT_SAMPLE_CONSTANT);
    if s > MAX_FORMULA_SHOTS {
        return Err(CliError::Input(format!("the sample-size formula asks for {s} shots per color; pass --shots")));
    }
    Ok(s)
}

fn learn_gibbs(a: LearnArgs) -> Result<Outcome, CliError> {
    let h = load_hamiltonian(&a.spec)?;
    let g = build_dual_graph(&h);
    let params = ExpansionParameters::new(g.max_degree);
    if h.beta <= 0.0 {
        return Err(CliError::Input("learning needs beta > 0".into()));
    }
    if h.beta > params.beta_c_newton && !a.allow_override {
        return Err(SolverError::Regime { beta: h.beta, threshold: params.beta_c_newton }.into());
    }
    let (m_hat, order_ok) = choose_order(h.beta, a.epsilon, a.order, &params, a.allow_override)?;
    let (shifts, shots, seed) = if a.exact_expectations {
        (qsim::exact_expectations(&h, a.common.cap)?, None, None)
    } else {
        let shots = shots_for(&a, h.beta, g.max_degree, h.len())?;
        let seed = resolve_seed(a.seed);
        let est = qsim::sample_pauli_estimates(&h, &greedy_coloring(&g), shots, seed, a.common.cap)?;
        (est.estimates, Some(shots), Some(seed))
    };
    let engine = DerivativeEngine::new();
    let fs = build_all_series(&h, &g, m_hat, &shifts, &engine);
    let mut report = newton_learn(&fs, h.beta, a.epsilon, &params, a.allow_override)?;
    report.guaranteed &= order_ok;
    report.shots = shots;
    report.seed = seed;
    finish(&report, &a.common.output)
}

fn learn_dynamics(t: f64, a: LearnArgs) -> Result<Outcome, CliError> {
    let h = load_hamiltonian(&a.spec)?;
    let g = build_dual_graph(&h);
    let params = ExpansionParameters::new(g.max_degree);
    let probes = realtime::choose_probes(&h);
    if t == 0.0 {
        return zero_time(&h, &probes, &a);
    }
    let spec = realtime::dynamics_spec(t, &params, a.allow_override)?;
    let te = spec.effective_time();
    let (m_hat, order_ok) = choose_order(te, a.epsilon, a.order, &params, a.allow_override)?;
    let v = realtime::amplified_unitary(&h, &spec, a.common.cap)?;
    let (shifts, shots, seed) = if a.exact_expectations {
        (realtime::exact_dynamics_values(&v, h.n_qubits, &probes), None, None)
    } else {
        let shots = shots_for(&a, te, g.max_degree, h.len())?;
        let seed = resolve_seed(a.seed);
        let est = realtime::sample_dynamics_estimates(&h, &probes, &greedy_coloring(&g), &v, shots, seed)?;
        (est.estimates, Some(shots), Some(seed))
    };
    let fs = realtime::build_all_dynamics_series(&h, &g, &probes, m_hat, &shifts);
    let guaranteed = order_ok && t <= spec.t_c;
    let mut report = realtime::learn_from_dynamics(&fs, te, a.epsilon, &params, guaranteed)?;
    report.shots = shots;
    report.seed = seed;
    finish(&report, &a.common.output)
}

/// No evolution means no signal: estimates are zero and the residual is the
/// size of the measured values.
fn zero_time(h: &HamiltonianSpec, probes: &[realtime::ProbePair], a: &LearnArgs) -> Result<Outcome, CliError> {
    let g = build_dual_graph(h);
    let params = ExpansionParameters::new(g.max_degree);
    let (values, shots, seed) = if a.exact_expectations {
        (vec![0.0; h.len()], None, None)
    } else {
        let shots = a.shots.ok_or_else(|| CliError::Input("t = 0 with sampling needs --shots".into()))?;
        let seed = resolve_seed(a.seed);
        let id = qsim::CMatrix::identity(1 << h.n_qubits, 1 << h.n_qubits);
        let est = realtime::sample_dynamics_estimates(h, probes, &greedy_coloring(&g), &id, shots, seed)?;
        (est.estimates, Some(shots), Some(seed))
    };
    let residual = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eprintln!("warning: t = 0 carries no information; estimates are zero, residual {residual:e}");
    let report = LearnReport {
        term_ids: h.terms.iter().map(|t| t.id.clone()).collect(),
        estimates: vec![0.0; h.len()],
        iterations_run: 0,
        residual_inf: residual,
        params,
        shots,
        seed,
        guaranteed: false,
    };
    finish(&report, &a.common.output)
}

fn load_mrf(path: &Path) -> Result<mrf::MrfSpec, CliError> {
    mrf::parse_mrf(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn learn_mrf(a: MrfArgs) -> Result<Outcome, CliError> {
    let spec = load_mrf(&a.spec)?;
    let beta = a.beta.unwrap_or(spec.beta);
    let mut out = String::new();
    let est = if a.exact_conditionals {
        let _ = writeln!(out, "samples\texact");
        mrf::learn_mrf_exact(&mrf::MrfSpec::new(spec.n_vertices, spec.edges.clone(), beta)?)?
    } else {
        let batch = match (&a.samples, a.generate) {
            (Some(p), None) => mrf::parse_samples(&read(p)?, spec.n_vertices)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            (None, Some(count)) => mrf::sample_mrf(&spec, count, resolve_seed(a.seed))?,
            _ => return Err(CliError::Input("give one of --samples, --generate or --exact-conditionals".into())),
        };
        let _ = writeln!(out, "samples\t{}", batch.len());
        let _ = writeln!(out, "seed\t{}", batch.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into()));
        mrf::learn_mrf(&spec, &batch, beta)?
    };
    out.push('\n');
    out.push_str(&mrf::estimates_to_text(&est));
    emit(&a.output, &out)?;
    if est.iter().any(|e| e.value.is_none()) {
        eprintln!("warning: some conditioning events have no samples");
        return Ok(Outcome::NonGuaranteed);
    }
    Ok(Outcome::Ok)
}

fn sample_mrf(a: SampleMrfArgs) -> Result<Outcome, CliError> {
    let spec = load_mrf(&a.spec)?;
    let batch = mrf::sample_mrf(&spec, a.count, resolve_seed(a.seed))?;
    emit(&a.output, &batch.to_text())?;
    Ok(Outcome::Ok)
}

fn bounds(a: BoundsArgs) -> Result<Outcome, CliError> {
    let betas = a.betas.unwrap_or_else(|| KL_BETAS.to_vec());
    let eps = a.epsilons.unwrap_or_else(|| KL_EPSILONS.to_vec());
    let rows = kl_grid(&betas, &eps)?;
    let mut out = String::from("beta\tepsilon\tkl\tbound\tpass\n");
    for r in &rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6e}\t{:.6e}\t{}",
            r.beta,
            r.epsilon,
            r.kl,
            r.bound,
            if r.holds() { "pass" } else { "fail" }
        );
    }
    print!("{out}");
    if rows.iter().all(|r| r.holds()) {
        Ok(Outcome::Ok)
    } else {
        Err(CliError::VerifyFailed)
    }
}
