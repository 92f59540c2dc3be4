use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::Rng;
use serde_json::{json, Value};

use qnet_bench::plot::{parse_csv, render_svg};
use qnet_bench::sweep::{to_csv, CSV_HEADER};
use qnet_bench::{run_sweep, RankTest, SweepConfig, SweepError, SweepKind};
use qnet_core::dynamics::{liouvillian, sample_trajectory, DensityOperator, Propagator};
use qnet_core::identify::{identify_topology, IdentifyConfig, SolveOptions};
use qnet_core::io::{
    many_body_from_json, outputs_from_csv, outputs_to_csv, read_matrix_json, trajectory_from_csv,
    trajectory_to_csv, write_matrix_json, BatchManifest, MatrixJson,
};
use qnet_core::linalg::{spectral_norm, DEFAULT_RTOL};
use qnet_core::netmodel::{assemble_hamiltonian, basis_density, erdos_renyi};
use qnet_core::partialinfo::{
    estimate_derivative_stacks, exact_derivative_stacks, extract_hamiltonian, observability_of_estimate,
    observability_rank, physical_decomposition, recombine, reconstruct_liouvillian, simulate_outputs,
    InitialStateBatch, OutputSelector,
};
use qnet_core::{Admissible, CMatrix, Error, Hermitian, SeededRng};

/// Topology identification for autonomous quantum networks.
#[derive(Parser)]
#[command(name = "qnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a trajectory (or a batch of diagonal outputs) from a Hamiltonian
    Simulate(SimulateArgs),
    /// Reconstruct the interaction Hamiltonian from a trajectory CSV
    Identify(IdentifyArgs),
    /// Run an Erdős–Rényi benchmark sweep
    Sweep {
        #[arg(value_enum)]
        kind: KindArg,
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Rank of the diagonal-output observability matrix
    Observability(ObservabilityArgs),
    /// Recover H from diagonal outputs over d² initial states
    PartialIdentify(PartialArgs),
    /// Write |k><j| as a combination of preparable states (0-based indices)
    Decompose(DecomposeArgs),
    /// Render a sweep CSV as SVG
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Solvability,
    Error,
}

impl From<KindArg> for SweepKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Solvability => SweepKind::Solvability,
            KindArg::Error => SweepKind::Error,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Hamiltonian as matrix JSON
    #[arg(long, group = "source")]
    hamiltonian: Option<PathBuf>,
    /// Many-body spec JSON (local terms plus couplings)
    #[arg(long, group = "source")]
    spec: Option<PathBuf>,
    /// Random Erdős–Rényi quantum walk on this many nodes
    #[arg(long, group = "source")]
    er: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    p_link: f64,
    /// Excited basis node (0-based); random for --er when omitted, else 0
    #[arg(long)]
    initial: Option<usize>,
    /// Initial density operator as matrix JSON
    #[arg(long, conflicts_with = "initial")]
    rho: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    /// Trajectory CSV to write
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
    /// Where to write the ground-truth interaction (adjacency) matrix
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Where to write the local Hamiltonian of a many-body spec
    #[arg(long)]
    h0_out: Option<PathBuf>,
    /// Instead of a trajectory, write diagonal outputs for the d² preparable states
    #[arg(long)]
    batch: bool,
    /// Sample spacing for --batch, centred on t = 0
    #[arg(long, default_value_t = 1e-2)]
    step: f64,
    /// Samples on each side of t = 0 for --batch; defaults to the
    /// minimum the derivative estimator accepts for order d²
    #[arg(long)]
    half: Option<usize>,
    /// Output directory for --batch
    #[arg(long, default_value = "batch")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    trajectory: PathBuf,
    /// Divisor of n_s: the trapezoid uses n_s / subsample panels
    #[arg(long, default_value_t = 1)]
    subsample: usize,
    #[arg(long, default_value_t = DEFAULT_RTOL)]
    rtol: f64,
    /// Also flag full-rank data as inconsistent above this relative residual
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    /// Known local Hamiltonian; only the interaction is reconstructed
    #[arg(long)]
    known_h0: Option<PathBuf>,
    /// Ground truth used to report the relative error
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d_min: Option<usize>,
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    p_link: Option<f64>,
    /// Repeatable
    #[arg(long)]
    tau: Vec<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Repeatable divisor of n_s
    #[arg(long)]
    subsample: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long, value_enum)]
    rank_test: Option<RankTest>,
    /// Extend the grid to d = 30
    #[arg(long)]
    extended: bool,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Record per-cell wall time (breaks byte-identical reruns)
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ObservabilityArgs {
    #[arg(long, group = "source")]
    hamiltonian: Option<PathBuf>,
    /// Check a full-information report after the fact
    #[arg(long, group = "source")]
    report: Option<PathBuf>,
    #[arg(long)]
    known_h0: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long, default_value_t = DEFAULT_RTOL)]
    rtol: f64,
}

#[derive(Args)]
struct PartialArgs {
    /// Use exact derivative stacks computed from this Hamiltonian
    #[arg(long, group = "source")]
    hamiltonian: Option<PathBuf>,
    /// Estimate derivative stacks from batch output files
    #[arg(long, group = "source")]
    manifest: Option<PathBuf>,
    /// Use the preparable batch instead of |k><j| for exact stacks
    #[arg(long)]
    physical: bool,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long, default_value_t = DEFAULT_RTOL)]
    rtol: f64,
    #[arg(long, default_value = "partial.json")]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    j: usize,
    /// Check linearity by propagating each term under this Hamiltonian
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    out: PathBuf,
}

/// Exit status 2 for bad input or configuration, 3 for numerical failure.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotObservable { .. } | Error::NotLiouvillian { .. } | Error::ZeroGroundTruth => {
                Failure::numerical(e.to_string())
            }
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::config(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn write_json(path: &Path, value: &Value) -> CliResult {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_hermitian(path: &Path) -> Result<Hermitian, Failure> {
    Ok(Hermitian::new(read_matrix_json(path)?)?)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut rng = SeededRng::new(a.seed).next_rng();
    let (h, truth, h0) = if let Some(p) = &a.hamiltonian {
        let h = read_hermitian(p)?;
        let mut off = h.matrix().clone();
        off.fill_diagonal(0.0.into());
        (h, Admissible::new(off)?, None)
    } else if let Some(p) = &a.spec {
        let spec = many_body_from_json(&fs::read_to_string(p)?)?;
        let (h0, hint) = assemble_hamiltonian(&spec)?;
        let total = &h0 + &hint;
        let truth = Admissible::new(hint.matrix().clone()).ok();
        if truth.is_none() {
            log::warn!("interaction Hamiltonian has a nonzero diagonal; no admissible ground truth written");
        }
        (total, truth.unwrap_or_else(|| Admissible::zeros(spec.dim)), Some(h0))
    } else if let Some(d) = a.er {
        let g = erdos_renyi(d, a.p_link, &mut rng)?;
        (g.to_hamiltonian(), g.to_admissible(), None)
    } else {
        return Err(Failure::config("one of --hamiltonian, --spec or --er is required"));
    };
    let d = h.dim();
    if let Some(p) = &a.truth_out {
        write_matrix_json(p, truth.matrix())?;
    }
    if let (Some(p), Some(h0)) = (&a.h0_out, &h0) {
        write_matrix_json(p, h0.matrix())?;
    }

    if a.batch {
        return simulate_batch(&h, &a);
    }
    let rho0 = if let Some(p) = &a.rho {
        DensityOperator::new(read_matrix_json(p)?)?
    } else {
        let k = match a.initial {
            Some(k) => k,
            None if a.er.is_some() => rng.random_range(0..d),
            None => 0,
        };
        basis_density(d, k)?
    };
    let traj = sample_trajectory(&h, &rho0, a.tau, a.dt, a.hbar)?;
    fs::write(&a.out, trajectory_to_csv(&traj))?;
    info!("wrote {} samples to {}", traj.steps() + 1, a.out.display());
    Ok(())
}

fn simulate_batch(h: &Hermitian, a: &SimulateArgs) -> CliResult {
    let d = h.dim();
    let batch = InitialStateBatch::physical(d)?;
    let half = a.half.unwrap_or(2 * (d * d).div_ceil(2));
    let samples = simulate_outputs(h, &batch, a.hbar, a.step, half)?;
    let times: Vec<f64> = (0..samples.len()).map(|i| (i as f64 - half as f64) * a.step).collect();
    fs::create_dir_all(&a.out_dir)?;
    let mut files = Vec::new();
    for l in 0..d * d {
        let ys: Vec<Vec<f64>> = samples.iter().map(|y| (0..d).map(|k| y[(k, l)].re).collect()).collect();
        let name = format!("batch_{l}.csv");
        fs::write(a.out_dir.join(&name), outputs_to_csv(&times, &ys))?;
        files.push(name);
    }
    let manifest = BatchManifest {
        dim: d,
        hbar: a.hbar,
        step: a.step,
        center: half,
        files,
        lambda0: MatrixJson::from_matrix(batch.matrix()),
    };
    write_json(&a.out_dir.join("manifest.json"), &serde_json::to_value(manifest)?)
}

fn identify(a: IdentifyArgs) -> CliResult {
    let traj = trajectory_from_csv(&fs::read_to_string(&a.trajectory)?)?;
    let known_h0 = a.known_h0.as_deref().map(read_hermitian).transpose()?;
    let truth = match &a.truth {
        Some(p) => Some(Admissible::new(read_matrix_json(p)?)?),
        None => None,
    };
    let cfg = IdentifyConfig {
        subsample: a.subsample,
        hbar: a.hbar,
        solve: SolveOptions {
            rtol: a.rtol,
            residual_tol: a.residual_tol,
        },
    };
    let r = identify_topology(&traj, &cfg, known_h0.as_ref(), truth.as_ref())?;
    let report = json!({
        "outcome": r.outcome,
        "trusted": r.trusted(),
        "solvability": r.solvability(),
        "estimate": MatrixJson::from_matrix(r.estimate.matrix()),
        "rank": r.rank,
        "required_rank": r.required_rank,
        "residual": r.residual,
        "epsilon": r.epsilon,
        "commutes_with_gram": r.commutes_with_gram,
        "sigma_max": r.sigma_max,
        "sigma_min_retained": r.sigma_min_retained,
        "sigma_max_discarded": r.sigma_max_discarded,
        "rank_tol": r.rank_tol,
        "notes": r.notes,
        "config": {
            "trajectory": a.trajectory,
            "subsample": a.subsample,
            "rtol": a.rtol,
            "residual_tol": a.residual_tol,
            "hbar": a.hbar,
            "known_h0": a.known_h0,
            "truth": a.truth,
        },
        "seed": Value::Null,
    });
    write_json(&a.out, &report)?;
    println!(
        "{} (rank {}/{}, residual {:.3e}{})",
        r.outcome,
        r.rank,
        r.required_rank,
        r.residual,
        r.epsilon.map(|e| format!(", eps {e:.3e}")).unwrap_or_default()
    );
    Ok(())
}

fn resolve_sweep_config(kind: SweepKind, a: &SweepArgs) -> Result<SweepConfig, Failure> {
    let mut cfg = SweepConfig::for_kind(kind);
    if a.extended {
        cfg = cfg.extended();
    }
    if let Some(p) = &a.config {
        let mut base = serde_json::to_value(&cfg)?;
        let overlay: Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        let Value::Object(fields) = overlay else {
            return Err(Failure::config("sweep config must be a JSON object"));
        };
        let known = base.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
        for (k, v) in fields {
            if !known.contains(&k) {
                return Err(Failure::config(format!("unknown config field {k:?}")));
            }
            base[&k] = v;
        }
        cfg = serde_json::from_value(base)?;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    set!(seed, d_min, d_max, p_link, dt, trials, rtol, hbar, rank_test, jobs);
    if !a.tau.is_empty() {
        cfg.tau = a.tau.clone();
    }
    if !a.subsample.is_empty() {
        cfg.subsample = a.subsample.clone();
    }
    cfg.timing |= a.timing;
    Ok(cfg)
}

fn sweep(kind: SweepKind, a: SweepArgs) -> CliResult {
    let cfg = resolve_sweep_config(kind, &a)?;
    if let Err(errs) = cfg.validate() {
        return Err(Failure::config(format!("invalid configuration:\n  {}", errs.join("\n  "))));
    }
    fs::create_dir_all(&a.out_dir)?;
    let csv_path = a.out_dir.join(format!("{}.csv", kind.name()));
    let mut csv = fs::File::create(&csv_path)?;
    writeln!(csv, "{CSV_HEADER}")?;
    let result = run_sweep(&cfg, kind, |r| {
        writeln!(csv, "{}", r.csv_line())?;
        csv.flush()
    });
    let result = match result {
        Ok(r) => r,
        Err(SweepError::Config(errs)) => {
            return Err(Failure::config(format!("invalid configuration:\n  {}", errs.join("\n  "))))
        }
        Err(e @ SweepError::Numerical { .. }) => {
            return Err(Failure::numerical(format!("{e}; partial results in {}", csv_path.display())))
        }
        Err(SweepError::Io(e)) => return Err(e.into()),
    };
    debug_assert_eq!(fs::read_to_string(&csv_path)?, to_csv(&result.records));
    let svg = render_svg(&result.records, kind).map_err(|e| Failure::numerical(e.to_string()));
    match svg {
        Ok(svg) => fs::write(a.out_dir.join(format!("{}.svg", kind.name())), svg)?,
        Err(e) => log::warn!("no plot written: {}", e.message),
    }
    write_json(&a.out_dir.join(format!("{}.json", kind.name())), &serde_json::to_value(&result)?)?;
    for c in &result.critical {
        println!(
            "tau={} n_tilde={}: last d with full solvability {}, zero from d = {}",
            c.tau,
            c.n_tilde,
            c.last_full.map_or("-".into(), |d| d.to_string()),
            c.zero_from.map_or("-".into(), |d| d.to_string())
        );
    }
    Ok(())
}

fn observability(a: ObservabilityArgs) -> CliResult {
    let rank = if let Some(p) = &a.hamiltonian {
        let h = read_hermitian(p)?;
        observability_rank(&OutputSelector::diagonal(h.dim())?, &liouvillian(&h, a.hbar)?, a.rtol)?
    } else if let Some(p) = &a.report {
        let report: Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        let est: MatrixJson = serde_json::from_value(report["estimate"].clone())?;
        let est = Admissible::new(est.to_matrix()?)?;
        let known_h0 = a.known_h0.as_deref().map(read_hermitian).transpose()?;
        observability_of_estimate(&est, known_h0.as_ref(), a.hbar, a.rtol)?
    } else {
        return Err(Failure::config("one of --hamiltonian or --report is required"));
    };
    println!(
        "{}",
        json!({"rank": rank.rank, "required": rank.required, "observable": rank.observable()})
    );
    Ok(())
}

fn partial_identify(a: PartialArgs) -> CliResult {
    let (stacks, batch, truth, mut extra) = if let Some(p) = &a.hamiltonian {
        let h = read_hermitian(p)?;
        let d = h.dim();
        let batch = if a.physical {
            InitialStateBatch::physical(d)?
        } else {
            InitialStateBatch::identity(d)
        };
        let l = liouvillian(&h, a.hbar)?;
        let stacks = exact_derivative_stacks(&OutputSelector::diagonal(d)?, &l, &batch, d * d)?;
        (stacks, batch, Some((h, l)), json!({"mode": "exact"}))
    } else if let Some(p) = &a.manifest {
        let manifest: BatchManifest = serde_json::from_str(&fs::read_to_string(p)?)?;
        let dir = p.parent().unwrap_or(Path::new("."));
        let d = manifest.dim;
        let mut series = Vec::new();
        for f in &manifest.files {
            series.push(outputs_from_csv(&fs::read_to_string(dir.join(f))?)?.1);
        }
        let n_samples = series.first().map_or(0, Vec::len);
        if series.len() != d * d || series.iter().any(|s| s.len() != n_samples) {
            return Err(Failure::config("batch files do not match the manifest"));
        }
        let samples: Vec<CMatrix> = (0..n_samples)
            .map(|i| CMatrix::from_fn(d, d * d, |k, l| series[l][i][k].into()))
            .collect();
        let est = estimate_derivative_stacks(&samples, manifest.center, manifest.step, d * d)?;
        let batch = InitialStateBatch::from_matrix(manifest.lambda0.to_matrix()?)?;
        let extra = json!({
            "mode": "estimated",
            "error_estimates": est.error_estimates,
            "warnings": est.warnings,
        });
        (est.stacks, batch, None, extra)
    } else {
        return Err(Failure::config("one of --hamiltonian or --manifest is required"));
    };
    let l_hat = reconstruct_liouvillian(&stacks, &batch, a.hbar, a.rtol)?;
    let h_hat = extract_hamiltonian(&l_hat)?;
    extra["hamiltonian"] = serde_json::to_value(MatrixJson::from_matrix(h_hat.matrix()))?;
    if let Some((h, l)) = truth {
        extra["liouvillian_error"] = json!(spectral_norm(&(l_hat.matrix() - l.matrix())));
        extra["hamiltonian_error"] = json!(spectral_norm(&(h_hat.matrix() - h.traceless().matrix())));
    }
    extra["config"] = json!({"hbar": a.hbar, "rtol": a.rtol, "physical": a.physical});
    write_json(&a.out, &extra)?;
    println!("recovered traceless Hamiltonian written to {}", a.out.display());
    Ok(())
}

fn decompose(a: DecomposeArgs) -> CliResult {
    let terms = physical_decomposition(a.d, a.k, a.j)?;
    let mut out = json!({
        "terms": terms.iter().map(|(s, c)| json!({
            "coefficient": [c.re, c.im],
            "state": MatrixJson::from_matrix(s.matrix()),
        })).collect::<Vec<_>>(),
    });
    let mut target = CMatrix::zeros(a.d, a.d);
    target[(a.k, a.j)] = 1.0.into();
    let sum = recombine(&terms).expect("at least one term");
    out["identity_error"] = json!((sum - &target).norm());
    if let Some(p) = &a.hamiltonian {
        let h = read_hermitian(p)?;
        let prop = Propagator::new(&h, a.hbar)?;
        let direct = prop.evolve_matrix(&target, a.t);
        let combined = terms
            .iter()
            .fold(CMatrix::zeros(a.d, a.d), |acc, (s, c)| acc + prop.evolve(s, a.t).matrix() * *c);
        out["linearity_error"] = json!(spectral_norm(&(direct - combined)));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult {
    let records = parse_csv(&fs::read_to_string(&a.csv)?).map_err(|e| Failure::config(e.to_string()))?;
    let svg = render_svg(&records, a.kind.into()).map_err(|e| Failure::config(e.to_string()))?;
    fs::write(&a.out, svg)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Identify(a) => identify(a),
        Command::Sweep { kind, args } => sweep(kind.into(), args),
        Command::Observability(a) => observability(a),
        Command::PartialIdentify(a) => partial_identify(a),
        Command::Decompose(a) => decompose(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
