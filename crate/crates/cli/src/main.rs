use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use l1ising::asymptotics::sample_complexity_for;
use l1ising::diagnostics::{ansatz1_check, haar_cumulant_check};
use l1ising::eos::{predict_metrics, solve, EosProblem, Mode};
use l1ising::estimators::{extract_neighborhood, fit, FitOptions};
use l1ising::harness::{
    run_comparison, run_experiment, run_scaling, write_csv, ExperimentCsvRow, ExperimentPlan, GraphFamily, ScalingGrid,
};
use l1ising::ising::{gen_grid2d, gen_rr_graph, metropolis_sample, SignMode, SpinDataset, DEFAULT_MAX_RESTARTS};
use l1ising::loss::Loss;
use l1ising::rng::{derive_rng, derive_seed, Purpose};
use l1ising::spectra::SpectralDensity;

#[derive(Parser)]
#[command(name = "l1ising", version, about = "Replica predictions and Monte-Carlo experiments for L1 Ising model selection")]
struct Cli {
    /// JSON experiment plan (experiment, compare and scaling only); unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the plan's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Covariance eigenvalue density rho(gamma) of a random regular graph.
    Spectrum {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0.4)]
        k0: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Solve the equations of state and predict selection metrics.
    Eos(EosArgs),
    /// Sample-complexity constants over a lambda grid for both losses.
    Complexity {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0.4)]
        k0: f64,
        #[arg(long, default_value_t = 0.05)]
        lambda_min: f64,
        /// Defaults to just below tanh(k0).
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Build a model and sample a spin dataset with Metropolis.
    Simulate(SimulateArgs),
    /// Fit one neighbourhood on a stored dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = LossArg::Linr)]
        loss: LossArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        center: usize,
    },
    /// Graph -> sample -> fit -> score over R trials.
    Experiment(PlanArgs),
    /// Theory and experiment side by side.
    Compare(PlanArgs),
    /// Precision and recall along M = c ln N.
    Scaling(PlanArgs),
    /// Trace-power cumulants of covariance eigenvectors.
    DiagHaar {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0.4)]
        k0: f64,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
    /// Subgradient margins of the sparse mean-estimate solution.
    DiagAnsatz {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0.4)]
        k0: f64,
        #[arg(long, default_value_t = 0.3)]
        lambda: f64,
        /// Use this chi instead of solving the equations of state.
        #[arg(long)]
        chi: Option<f64>,
        /// Sample size and spin count of the EOS solve that supplies chi.
        #[arg(long, default_value_t = 400)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Linr,
    Logr,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Linr => Loss::Quadratic,
            LossArg::Logr => Loss::Logistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphArg {
    Rr,
    Grid2d,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Uniform,
    RandomSign,
}

impl From<SignArg> for SignMode {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Uniform => SignMode::Uniform,
            SignArg::RandomSign => SignMode::RandomSign,
        }
    }
}

#[derive(Args)]
struct EosArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Linr)]
    loss: LossArg,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 400)]
    m: usize,
    #[arg(long, default_value_t = 0.3)]
    lambda: f64,
    #[arg(long, default_value_t = 0.4)]
    k0: f64,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = l1ising::eos::DEFAULT_T_MC)]
    tmc: usize,
    /// Exact neighbourhood expectations instead of T_MC sample averages.
    #[arg(long)]
    asymptotic: bool,
    /// Output file; defaults to eos.json under --out-dir, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = GraphArg::Rr)]
    graph: GraphArg,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Grid side (grid2d only).
    #[arg(long, default_value_t = 15)]
    l: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0.4)]
    k0: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Uniform)]
    sign_mode: SignArg,
    #[arg(long, default_value_t = 400)]
    m: usize,
    #[arg(long, default_value_t = l1ising::ising::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = l1ising::ising::DEFAULT_THIN)]
    thin: usize,
    /// Binary dataset path; a .json provenance sidecar and a .graph.json edge list are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export the samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Flags that build or override an experiment plan.
#[derive(Args, Default)]
struct PlanArgs {
    #[arg(long, value_enum)]
    graph: Option<GraphArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k0: Option<f64>,
    #[arg(long, value_enum)]
    sign_mode: Option<SignArg>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    losses: Option<Vec<LossArg>>,
    /// Constants c of M = round(c ln N) (scaling only).
    #[arg(long, value_delimiter = ',')]
    cs: Option<Vec<f64>>,
    /// Spin counts for the scaling sweep.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    tmc: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Theory from exact expectations instead of finite-size sample averages.
    #[arg(long)]
    asymptotic: bool,
}

fn build_plan(cli: &Cli, args: &PlanArgs) -> Result<ExperimentPlan> {
    let mut plan = match &cli.config {
        Some(path) => ExperimentPlan::load(path).with_context(|| format!("reading plan {}", path.display()))?,
        None => ExperimentPlan::rr(200, 3, 0.4, 0.3, 100, 0),
    };
    if let Some(g) = args.graph {
        match g {
            GraphArg::Rr => {
                plan.graph = GraphFamily::Rr;
                plan.l = None;
                plan.n = plan.n.or(Some(200));
            }
            GraphArg::Grid2d => {
                plan.graph = GraphFamily::Grid2d;
                plan.n = None;
                plan.d = 4;
                plan.sign_mode = SignMode::Uniform;
                plan.l = plan.l.or(Some(15));
            }
        }
    }
    if args.n.is_some() {
        plan.n = args.n;
    }
    if args.l.is_some() {
        plan.l = args.l;
    }
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                plan.$field = v;
            }
        };
    }
    set!(d, args.d);
    set!(k0, args.k0);
    set!(sign_mode, args.sign_mode.map(SignMode::from));
    set!(lambdas, args.lambdas.clone());
    set!(alphas, args.alphas.clone());
    set!(losses, args.losses.as_ref().map(|v| v.iter().map(|&l| Loss::from(l)).collect()));
    set!(trials, args.trials);
    set!(t_mc, args.tmc);
    set!(burn_in, args.burn_in);
    set!(thin, args.thin);
    set!(seed, cli.seed);
    if args.asymptotic {
        plan.theory_mode = Mode::Asymptotic;
    }
    if args.cs.is_some() || args.ns.is_some() {
        let old = plan.scaling.take().unwrap_or(ScalingGrid {
            cs: vec![15.0, 25.0],
            ns: vec![200, 400, 800, 1600],
        });
        plan.scaling = Some(ScalingGrid {
            cs: args.cs.clone().unwrap_or(old.cs),
            ns: args.ns.clone().unwrap_or(old.ns),
        });
    }
    if cli.out_dir.is_some() {
        plan.out_dir = cli.out_dir.clone();
    }
    plan.validate()?;
    Ok(plan)
}

/// File under the output directory, or None for stdout.
fn target(dir: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            Ok(Some(d.join(name)))
        }
        None => Ok(None),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_csv<T: Serialize>(rows: &[T], dir: Option<&Path>, name: &str) -> Result<()> {
    let path = target(dir, name)?;
    write_csv(rows, sink(path.as_deref())?)?;
    if let Some(p) = path {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(p) = path {
        info!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumRow {
    gamma: f64,
    rho: f64,
}

#[derive(Serialize)]
struct ComplexityRow {
    lambda: f64,
    c: f64,
    c0: f64,
    loss: &'static str,
}

#[derive(Serialize)]
struct HaarRow {
    k: usize,
    mean: f64,
    mean_se: f64,
    variance: f64,
    variance_se: f64,
    third_cumulant: f64,
    third_cumulant_se: f64,
    inverse_mean: f64,
    inverse_variance: f64,
    inverse_third_cumulant: f64,
    haar_mean: f64,
    haar_variance: f64,
    replicates: usize,
}

#[derive(Serialize)]
struct AnsatzRow {
    generation: usize,
    subgradient: f64,
    margin: f64,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let plan_command = matches!(cli.command, Command::Experiment(_) | Command::Compare(_) | Command::Scaling(_));
    if cli.config.is_some() && !plan_command {
        bail!("--config applies to the experiment, compare and scaling subcommands only");
    }
    let seed = cli.seed.unwrap_or(0);
    let dir = cli.out_dir.as_deref();

    match &cli.command {
        Command::Spectrum { d, k0, points } => {
            let density = SpectralDensity::build(*d, *k0)?;
            let rows: Vec<SpectrumRow> = density.curve(*points).into_iter().map(|(gamma, rho)| SpectrumRow { gamma, rho }).collect();
            emit_csv(&rows, dir, "spectrum.csv")?;
        }
        Command::Eos(a) => {
            let mut problem = EosProblem::new(a.loss.into(), a.m, a.n, a.lambda, a.d, a.k0)?;
            problem.t_mc = a.tmc;
            problem.seed = derive_seed(seed, Purpose::Theory, &[]);
            let mode = if a.asymptotic { Mode::Asymptotic } else { Mode::Finite };
            let sol = solve(&problem, mode)?;
            let metrics = predict_metrics(&sol, &problem);
            let out = json!({
                "loss": problem.loss,
                "mode": mode,
                "m": problem.m,
                "n": problem.n,
                "alpha": problem.alpha(),
                "lambda": problem.lambda,
                "d": problem.d,
                "k0": problem.k0,
                "t_mc": problem.t_mc,
                "master_seed": seed,
                "seed": problem.seed,
                "params": sol.params,
                "residuals": sol.residuals,
                "max_residual": sol.max_residual,
                "iterations": sol.iterations,
                "clamped": sol.clamped,
                "density": sol.density_kind,
                "metrics": metrics,
            });
            let path = match &a.out {
                Some(p) => Some(p.clone()),
                None => target(dir, "eos.json")?,
            };
            emit_json(&out, path.as_deref())?;
        }
        Command::Complexity {
            d,
            k0,
            lambda_min,
            lambda_max,
            points,
        } => {
            let hi = lambda_max.unwrap_or(k0.tanh() * 0.99);
            if !(hi > *lambda_min) || *points < 2 {
                bail!("need lambda_max > lambda_min and at least two points");
            }
            let mut rows = Vec::new();
            for loss in [Loss::Quadratic, Loss::Logistic] {
                for i in 0..*points {
                    let lambda = lambda_min + (hi - lambda_min) * i as f64 / (*points - 1) as f64;
                    let r = sample_complexity_for(loss, lambda, *k0, *d)?;
                    rows.push(ComplexityRow {
                        lambda,
                        c: r.c,
                        c0: r.c0,
                        loss: loss.short_name(),
                    });
                }
            }
            emit_csv(&rows, dir, "complexity.csv")?;
        }
        Command::Simulate(a) => simulate(a, seed, dir)?,
        Command::Fit {
            data,
            loss,
            lambda,
            center,
        } => {
            let dataset = SpinDataset::load(data).with_context(|| format!("loading {}", data.display()))?;
            let est = fit((*loss).into(), &dataset, *center, *lambda, &FitOptions::default())?;
            for w in &est.warnings {
                log::warn!("{w}");
            }
            let neighborhood = extract_neighborhood(&est);
            let out = json!({ "estimate": est, "neighborhood": neighborhood });
            emit_json(&out, target(dir, "fit.json")?.as_deref())?;
        }
        Command::Experiment(args) => {
            let plan = build_plan(&cli, args)?;
            let rows = run_experiment(&plan)?;
            let flat: Vec<ExperimentCsvRow> = rows.iter().map(ExperimentCsvRow::from).collect();
            emit_csv(&flat, plan.out_dir.as_deref(), "experiment.csv")?;
            if let Some(p) = target(plan.out_dir.as_deref(), "experiment.json")? {
                emit_json(&json!({ "plan": plan, "rows": rows }), Some(&p))?;
            }
        }
        Command::Compare(args) => {
            let plan = build_plan(&cli, args)?;
            let table = run_comparison(&plan)?;
            let rows: Vec<_> = table.theory.iter().chain(&table.experiment).cloned().collect();
            emit_csv(&rows, plan.out_dir.as_deref(), "comparison.csv")?;
            let summary = table.summary();
            eprint!("{summary}");
            if let Some(p) = target(plan.out_dir.as_deref(), "comparison.json")? {
                emit_json(&serde_json::to_value(&table)?, Some(&p))?;
                std::fs::write(p.with_file_name("summary.txt"), &summary)?;
            }
        }
        Command::Scaling(args) => {
            let mut plan = build_plan(&cli, args)?;
            if plan.scaling.is_none() {
                plan.scaling = Some(ScalingGrid {
                    cs: vec![15.0, 25.0],
                    ns: vec![200, 400, 800, 1600],
                });
                plan.validate()?;
            }
            let rows = run_scaling(&plan)?;
            emit_csv(&rows, plan.out_dir.as_deref(), "scaling.csv")?;
            if let Some(p) = target(plan.out_dir.as_deref(), "scaling.json")? {
                emit_json(&json!({ "plan": plan, "rows": rows }), Some(&p))?;
            }
        }
        Command::DiagHaar {
            n,
            d,
            k0,
            replicates,
            k_max,
        } => {
            let report = haar_cumulant_check(*n, *d, *k0, *replicates, *k_max, seed)?;
            let rows: Vec<HaarRow> = report
                .cumulants
                .iter()
                .map(|c| HaarRow {
                    k: c.k,
                    mean: c.mean,
                    mean_se: c.mean_se,
                    variance: c.variance,
                    variance_se: c.variance_se,
                    third_cumulant: c.third_cumulant,
                    third_cumulant_se: c.third_cumulant_se,
                    inverse_mean: c.inverse_mean,
                    inverse_variance: c.inverse_variance,
                    inverse_third_cumulant: c.inverse_third_cumulant,
                    haar_mean: c.haar_mean,
                    haar_variance: c.haar_variance,
                    replicates: c.replicates,
                })
                .collect();
            emit_csv(&rows, dir, "haar.csv")?;
            if let Some(p) = target(dir, "haar.json")? {
                emit_json(&serde_json::to_value(&report)?, Some(&p))?;
            }
        }
        Command::DiagAnsatz { d, k0, lambda, chi, m, n } => {
            let (chi, source) = match chi {
                Some(c) => (*c, "given".to_string()),
                None => {
                    let mut problem = EosProblem::new(Loss::Quadratic, *m, *n, *lambda, *d, *k0)?;
                    problem.seed = derive_seed(seed, Purpose::Theory, &[]);
                    let sol = solve(&problem, Mode::Asymptotic)?;
                    (sol.params.chi, format!("asymptotic linr EOS at M = {m}, N = {n}"))
                }
            };
            let report = ansatz1_check(*d, *k0, *lambda, chi)?;
            info!("chi = {chi} ({source}); J = {}; holds = {}", report.j, report.holds);
            let rows: Vec<AnsatzRow> = report
                .generations
                .iter()
                .map(|g| AnsatzRow {
                    generation: g.generation,
                    subgradient: g.subgradient,
                    margin: g.margin,
                })
                .collect();
            emit_csv(&rows, dir, "ansatz.csv")?;
            if let Some(p) = target(dir, "ansatz.json")? {
                emit_json(&json!({ "report": report, "chi_source": source }), Some(&p))?;
            }
        }
    }
    Ok(())
}

fn simulate(a: &SimulateArgs, seed: u64, dir: Option<&Path>) -> Result<()> {
    let model = match a.graph {
        GraphArg::Rr => {
            let mut rng = derive_rng(seed, Purpose::Graph, &[a.n as u64, 0]);
            gen_rr_graph(a.n, a.d, a.k0, a.sign_mode.into(), DEFAULT_MAX_RESTARTS, &mut rng)?
        }
        GraphArg::Grid2d => gen_grid2d(a.l, a.k0)?,
    };
    let sampling_seed = derive_seed(seed, Purpose::Sampling, &[model.n() as u64]);
    let mut rng = l1ising::rng::rng_from_seed(sampling_seed);
    let mut data = metropolis_sample(&model, a.m, a.burn_in, a.thin, &mut rng)?;
    data.provenance.seed = Some(sampling_seed);
    data.provenance.description = match a.graph {
        GraphArg::Rr => format!("rr graph N = {}, d = {}, K0 = {}, master seed {seed}", a.n, a.d, a.k0),
        GraphArg::Grid2d => format!("periodic {0}x{0} grid, K0 = {1}", a.l, a.k0),
    };
    let path = match &a.out {
        Some(p) => p.clone(),
        None => match target(dir, "dataset.isng")? {
            Some(p) => p,
            None => bail!("simulate needs --out or --out-dir"),
        },
    };
    data.save(&path)?;
    let graph_path = path.with_extension("graph.json");
    let edges: Vec<_> = model.edges().iter().map(|&(i, j, k)| json!([i, j, k])).collect();
    emit_json(&json!({ "n": model.n(), "edges": edges }), Some(&graph_path))?;
    info!("wrote {} ({} x {})", path.display(), data.m(), data.n());
    if let Some(csv_path) = &a.csv {
        data.write_csv(BufWriter::new(File::create(csv_path)?))?;
        info!("wrote {}", csv_path.display());
    }
    Ok(())
}
