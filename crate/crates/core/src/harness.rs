//! Experiment plans, theory/experiment sweeps and their reports.
//!
//! Seeds: every trial draws its graph, chain and center from streams keyed by
//! (master seed, purpose, N, trial). One chain per trial is sampled at the
//! largest M needed and its prefixes feed every α (or c) cell, so cells of a
//! sweep are paired comparisons. Running a plan restricted to a single cell
//! reproduces that cell bit-for-bit because Metropolis output is prefix-stable.
//! Theory cells use their own purpose tag and never touch experiment streams.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::sample_complexity_for;
use crate::eos::{predict_metrics, solve, EosProblem, Mode};
use crate::error::{Error, Result};
use crate::estimators::{fit, score, FitOptions};
use crate::ising::{gen_grid2d, gen_rr_graph, metropolis_sample, IsingModel, SignMode, DEFAULT_BURN_IN, DEFAULT_MAX_RESTARTS, DEFAULT_THIN};
use crate::loss::Loss;
use crate::metrics::SelectionMetrics;
use crate::rng::{derive_rng, derive_seed, Purpose};
use crate::spectra::SpectralDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    Rr,
    Grid2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingGrid {
    /// Constants c of M = round(c·ln N).
    pub cs: Vec<f64>,
    pub ns: Vec<usize>,
}

fn default_d() -> usize {
    3
}
fn default_losses() -> Vec<Loss> {
    vec![Loss::Quadratic, Loss::Logistic]
}
fn default_t_mc() -> usize {
    crate::eos::DEFAULT_T_MC
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}
fn default_thin() -> usize {
    DEFAULT_THIN
}
fn default_alphas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0]
}
fn default_theory_mode() -> Mode {
    Mode::Finite
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub graph: GraphFamily,
    /// Spin count for random regular graphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Side length for the periodic grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
    pub k0: f64,
    #[serde(default)]
    pub sign_mode: SignMode,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingGrid>,
    #[serde(default = "default_losses")]
    pub losses: Vec<Loss>,
    pub trials: usize,
    #[serde(default = "default_t_mc")]
    pub t_mc: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_theory_mode")]
    pub theory_mode: Mode,
}

impl ExperimentPlan {
    /// Random-regular plan with the defaults used throughout.
    pub fn rr(n: usize, d: usize, k0: f64, lambda: f64, trials: usize, seed: u64) -> Self {
        Self {
            graph: GraphFamily::Rr,
            n: Some(n),
            l: None,
            d,
            k0,
            sign_mode: SignMode::RandomSign,
            lambdas: vec![lambda],
            alphas: default_alphas(),
            scaling: None,
            losses: default_losses(),
            trials,
            t_mc: default_t_mc(),
            seed,
            out_dir: None,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
            theory_mode: Mode::Finite,
        }
    }

    pub fn grid2d(l: usize, k0: f64, lambda: f64, trials: usize, seed: u64) -> Self {
        Self {
            graph: GraphFamily::Grid2d,
            n: None,
            l: Some(l),
            d: 4,
            sign_mode: SignMode::Uniform,
            ..Self::rr(l * l, 4, k0, lambda, trials, seed)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Spin count of the plan's graph.
    pub fn spins(&self) -> Result<usize> {
        match self.graph {
            GraphFamily::Rr => self.n.ok_or_else(|| Error::Config("rr plans need 'n'".into())),
            GraphFamily::Grid2d => self
                .l
                .map(|l| l * l)
                .ok_or_else(|| Error::Config("grid2d plans need 'l'".into())),
        }
    }

    pub fn degree(&self) -> usize {
        match self.graph {
            GraphFamily::Rr => self.d,
            GraphFamily::Grid2d => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lambdas.is_empty() || self.losses.is_empty() {
            return bad("lambda and loss lists must be non-empty".into());
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad(format!("every lambda must be positive, got {:?}", self.lambdas));
        }
        if self.trials == 0 || self.t_mc == 0 {
            return bad("trials and t_mc must be at least 1".into());
        }
        if self.burn_in == 0 || self.thin == 0 {
            return bad("burn_in and thin must be at least 1".into());
        }
        if !self.k0.is_finite() || self.k0 == 0.0 {
            return bad(format!("k0 must be finite and nonzero, got {}", self.k0));
        }
        match self.graph {
            GraphFamily::Rr => {
                if self.l.is_some() {
                    return bad("'l' applies only to grid2d plans".into());
                }
            }
            GraphFamily::Grid2d => {
                if self.n.is_some() {
                    return bad("'n' applies only to rr plans; use 'l'".into());
                }
                if self.l.is_some_and(|l| l < 3) {
                    return bad("grid side must be at least 3".into());
                }
                if self.scaling.is_some() {
                    return bad("scaling sweeps need rr graphs".into());
                }
            }
        }
        if let Some(s) = &self.scaling {
            if s.cs.is_empty() || s.ns.is_empty() {
                return bad("scaling grids must be non-empty".into());
            }
            for &n in &s.ns {
                for &c in &s.cs {
                    if scaling_m(c, n) == 0 {
                        return bad(format!("c = {c}, N = {n} gives M = 0"));
                    }
                }
            }
        } else {
            let n = self.spins()?;
            if self.alphas.is_empty() {
                return bad("alpha grid must be non-empty".into());
            }
            for &a in &self.alphas {
                if !(a > 0.0) || alpha_m(a, n) == 0 {
                    return bad(format!("alpha = {a} gives no samples at N = {n}"));
                }
            }
        }
        Ok(())
    }

    fn build_model(&self, n: usize, trial: usize) -> Result<IsingModel> {
        match self.graph {
            GraphFamily::Rr => {
                let mut rng = derive_rng(self.seed, Purpose::Graph, &[n as u64, trial as u64]);
                gen_rr_graph(n, self.d, self.k0, self.sign_mode, DEFAULT_MAX_RESTARTS, &mut rng)
            }
            GraphFamily::Grid2d => gen_grid2d(self.l.unwrap_or(0), self.k0),
        }
    }
}

/// M = round(αN).
pub fn alpha_m(alpha: f64, n: usize) -> usize {
    (alpha * n as f64).round() as usize
}

/// M = round(c·ln N).
pub fn scaling_m(c: f64, n: usize) -> usize {
    (c * (n as f64).ln()).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Theory,
    Experiment,
}

/// One output line: a theory or experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub source: Source,
    pub alpha: f64,
    pub lambda: f64,
    pub loss: Loss,
    pub n: usize,
    pub m: usize,
    pub precision: Option<f64>,
    pub precision_se: Option<f64>,
    pub recall: Option<f64>,
    pub recall_se: Option<f64>,
    pub rss: Option<f64>,
    pub rss_se: Option<f64>,
    pub fpr: Option<f64>,
    pub trials: usize,
    pub precision_excluded: usize,
    /// Experiment: fits that hit the iteration cap and were dropped.
    pub failed: usize,
    /// Experiment: worst KKT residual of the accepted fits.
    pub max_kkt: Option<f64>,
    /// Theory: largest converged equation residual.
    pub max_residual: Option<f64>,
    pub master_seed: u64,
    pub cell_seed: u64,
    pub error: Option<String>,
}

impl CellRow {
    fn empty(source: Source, alpha: f64, lambda: f64, loss: Loss, n: usize, m: usize, master: u64, cell: u64) -> Self {
        Self {
            source,
            alpha,
            lambda,
            loss,
            n,
            m,
            precision: None,
            precision_se: None,
            recall: None,
            recall_se: None,
            rss: None,
            rss_se: None,
            fpr: None,
            trials: 0,
            precision_excluded: 0,
            failed: 0,
            max_kkt: None,
            max_residual: None,
            master_seed: master,
            cell_seed: cell,
            error: None,
        }
    }

    fn fill(&mut self, m: &SelectionMetrics) {
        self.precision = m.precision;
        self.precision_se = m.precision_se;
        self.recall = Some(m.recall);
        self.recall_se = Some(m.recall_se);
        self.rss = Some(m.rss);
        self.rss_se = Some(m.rss_se);
        self.fpr = m.fpr;
        self.trials = m.trials;
        self.precision_excluded = m.precision_excluded;
    }
}

/// Seed of one theory cell, keyed by its content so any cell can be rerun alone.
/// The loss is left out on purpose: both losses of a cell see the same
/// Monte-Carlo replicates, so their difference carries no sampling noise.
pub fn theory_seed(master: u64, lambda: f64, m: usize, n: usize) -> u64 {
    derive_seed(master, Purpose::Theory, &[lambda.to_bits(), m as u64, n as u64])
}

/// Root of the experiment streams of a plan at size N.
pub fn experiment_seed(master: u64, n: usize) -> u64 {
    derive_seed(master, Purpose::Sampling, &[n as u64])
}

fn theory_density(plan: &ExperimentPlan, n: usize) -> Result<SpectralDensity> {
    match plan.graph {
        GraphFamily::Rr => SpectralDensity::build(plan.d, plan.k0),
        GraphFamily::Grid2d => {
            let model = plan.build_model(n, 0)?;
            SpectralDensity::from_couplings(n, model.edges(), 4, plan.k0)
        }
    }
}

/// Predicted metrics for every (λ, α, loss) cell of the plan.
pub fn run_theory(plan: &ExperimentPlan) -> Result<Vec<CellRow>> {
    plan.validate()?;
    let n = plan.spins()?;
    let density = theory_density(plan, n)?;
    let d = plan.degree();
    let mut cells = Vec::new();
    for &loss in &plan.losses {
        for &lambda in &plan.lambdas {
            for &alpha in &plan.alphas {
                cells.push((loss, lambda, alpha));
            }
        }
    }
    let rows = cells
        .into_par_iter()
        .map(|(loss, lambda, alpha)| {
            let m = alpha_m(alpha, n);
            let seed = theory_seed(plan.seed, lambda, m, n);
            let mut row = CellRow::empty(Source::Theory, alpha, lambda, loss, n, m, plan.seed, seed);
            let outcome = EosProblem::with_density(loss, m, n, lambda, d, plan.k0.abs(), density.clone()).and_then(|mut p| {
                p.t_mc = plan.t_mc;
                p.seed = seed;
                let sol = solve(&p, plan.theory_mode)?;
                Ok((predict_metrics(&sol, &p), sol.max_residual))
            });
            match outcome {
                Ok((metrics, residual)) => {
                    row.fill(&metrics);
                    row.max_residual = Some(residual);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    Ok(rows)
}

/// Per-trial outcome of one fit.
#[derive(Debug, Clone)]
enum TrialFit {
    Ok(SelectionMetrics, f64),
    Failed,
}

/// Draws the graph, chain and center of one trial and fits every cell in
/// `sizes` (a list of M values, any order) for every (loss, λ).
fn run_trial(
    plan: &ExperimentPlan,
    n: usize,
    trial: usize,
    sizes: &[usize],
    opts: &FitOptions,
) -> Result<Vec<Vec<TrialFit>>> {
    let model = plan.build_model(n, trial)?;
    let root = experiment_seed(plan.seed, n);
    let m_max = sizes.iter().copied().max().unwrap_or(0);
    let mut rng = derive_rng(root, Purpose::Sampling, &[trial as u64]);
    let mut data = metropolis_sample(&model, m_max, plan.burn_in, plan.thin, &mut rng)?;
    data.provenance.seed = Some(root);
    let center = derive_rng(root, Purpose::Center, &[trial as u64]).random_range(0..n);
    let mut out = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let prefix = data.prefix(m)?;
        let mut fits = Vec::new();
        for &loss in &plan.losses {
            for &lambda in &plan.lambdas {
                fits.push(match fit(loss, &prefix, center, lambda, opts) {
                    Ok(est) => TrialFit::Ok(score(&est, &model, center)?, est.kkt_residual),
                    Err(Error::IterationCap { .. }) => TrialFit::Failed,
                    Err(e) => return Err(e),
                });
            }
        }
        out.push(fits);
    }
    Ok(out)
}

fn aggregate_cell(per_trial: &[Vec<Vec<TrialFit>>], size_idx: usize, fit_idx: usize, row: &mut CellRow) {
    let mut items = Vec::new();
    let mut worst: f64 = 0.0;
    for t in per_trial {
        match &t[size_idx][fit_idx] {
            TrialFit::Ok(m, kkt) => {
                items.push(*m);
                worst = worst.max(*kkt);
            }
            TrialFit::Failed => row.failed += 1,
        }
    }
    if items.is_empty() {
        row.error = Some("every fit failed".into());
        return;
    }
    row.fill(&SelectionMetrics::aggregate(&items));
    row.max_kkt = Some(worst);
}

/// Monte-Carlo experiment over R trials for every (λ, α, loss) cell.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<CellRow>> {
    plan.validate()?;
    let n = plan.spins()?;
    let sizes: Vec<usize> = plan.alphas.iter().map(|&a| alpha_m(a, n)).collect();
    let opts = FitOptions::default();
    let per_trial: Vec<Vec<Vec<TrialFit>>> = (0..plan.trials)
        .into_par_iter()
        .map(|t| run_trial(plan, n, t, &sizes, &opts))
        .collect::<Result<_>>()?;
    let root = experiment_seed(plan.seed, n);
    let mut rows = Vec::new();
    for (li, &loss) in plan.losses.iter().enumerate() {
        for (lj, &lambda) in plan.lambdas.iter().enumerate() {
            let fit_idx = li * plan.lambdas.len() + lj;
            for (ai, &alpha) in plan.alphas.iter().enumerate() {
                let mut row = CellRow::empty(Source::Experiment, alpha, lambda, loss, n, sizes[ai], plan.seed, root);
                aggregate_cell(&per_trial, ai, fit_idx, &mut row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Largest |theory − experiment| of one metric, with the cell where it occurs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGap {
    pub loss: Loss,
    pub metric: String,
    pub max_abs_gap: f64,
    pub alpha: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub plan: ExperimentPlan,
    pub theory: Vec<CellRow>,
    pub experiment: Vec<CellRow>,
    pub gaps: Vec<MetricGap>,
}

impl ComparisonTable {
    /// Theory and experiment rows of the same cell.
    pub fn pairs(&self) -> impl Iterator<Item = (&CellRow, &CellRow)> {
        self.theory.iter().filter_map(move |t| {
            self.experiment
                .iter()
                .find(|e| e.loss == t.loss && e.lambda == t.lambda && e.m == t.m)
                .map(|e| (t, e))
        })
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("max |theory - experiment| per metric\n");
        for g in &self.gaps {
            s.push_str(&format!(
                "  {:<5} {:<10} {:>10.5}  (alpha = {}, lambda = {})\n",
                g.loss.short_name(),
                g.metric,
                g.max_abs_gap,
                g.alpha,
                g.lambda
            ));
        }
        let failures: Vec<&CellRow> = self.theory.iter().chain(&self.experiment).filter(|r| r.error.is_some()).collect();
        for r in failures {
            s.push_str(&format!(
                "  failed {:?} cell {} alpha = {} lambda = {}: {}\n",
                r.source,
                r.loss.short_name(),
                r.alpha,
                r.lambda,
                r.error.as_deref().unwrap_or("")
            ));
        }
        s
    }
}

fn gaps(theory: &[CellRow], experiment: &[CellRow], losses: &[Loss]) -> Vec<MetricGap> {
    type Getter = fn(&CellRow) -> Option<f64>;
    let metrics: [(&str, Getter); 3] = [
        ("precision", |r| r.precision),
        ("recall", |r| r.recall),
        ("rss", |r| r.rss),
    ];
    let mut out = Vec::new();
    for &loss in losses {
        for (name, get) in metrics {
            let mut best: Option<MetricGap> = None;
            for t in theory.iter().filter(|r| r.loss == loss) {
                let Some(e) = experiment.iter().find(|e| e.loss == loss && e.lambda == t.lambda && e.m == t.m) else {
                    continue;
                };
                if let (Some(a), Some(b)) = (get(t), get(e)) {
                    let gap = (a - b).abs();
                    if best.as_ref().is_none_or(|g| gap > g.max_abs_gap) {
                        best = Some(MetricGap {
                            loss,
                            metric: name.to_string(),
                            max_abs_gap: gap,
                            alpha: t.alpha,
                            lambda: t.lambda,
                        });
                    }
                }
            }
            out.extend(best);
        }
    }
    out
}

/// Theory and experiment side by side for every cell of the plan.
pub fn run_comparison(plan: &ExperimentPlan) -> Result<ComparisonTable> {
    let theory = run_theory(plan)?;
    let experiment = run_experiment(plan)?;
    let gaps = gaps(&theory, &experiment, &plan.losses);
    Ok(ComparisonTable {
        plan: plan.clone(),
        theory,
        experiment,
        gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub c: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub precision: Option<f64>,
    pub precision_se: Option<f64>,
    pub recall: Option<f64>,
    pub recall_se: Option<f64>,
    /// Position of c relative to the critical constant c0: above, below or at.
    pub side: String,
    pub loss: Loss,
    pub lambda: f64,
    pub m: usize,
    pub c0: Option<f64>,
    pub rss: Option<f64>,
    pub rss_se: Option<f64>,
    pub trials: usize,
    pub precision_excluded: usize,
    pub failed: usize,
    pub master_seed: u64,
    pub cell_seed: u64,
    pub error: Option<String>,
}

/// Precision and recall along M = c·ln N for every (c, N, loss, λ).
pub fn run_scaling(plan: &ExperimentPlan) -> Result<Vec<ScalingRow>> {
    plan.validate()?;
    let grid = plan
        .scaling
        .as_ref()
        .ok_or_else(|| Error::Config("run_scaling needs a 'scaling' grid".into()))?;
    let opts = FitOptions::default();
    let mut rows = Vec::new();
    for &n in &grid.ns {
        let sizes: Vec<usize> = grid.cs.iter().map(|&c| scaling_m(c, n)).collect();
        let per_trial: Vec<Vec<Vec<TrialFit>>> = (0..plan.trials)
            .into_par_iter()
            .map(|t| run_trial(plan, n, t, &sizes, &opts))
            .collect::<Result<_>>()?;
        let root = experiment_seed(plan.seed, n);
        for (li, &loss) in plan.losses.iter().enumerate() {
            for (lj, &lambda) in plan.lambdas.iter().enumerate() {
                let c0 = sample_complexity_for(loss, lambda, plan.k0.abs(), plan.d).ok().map(|r| r.c0);
                for (ci, &c) in grid.cs.iter().enumerate() {
                    let mut cell = CellRow::empty(Source::Experiment, 0.0, lambda, loss, n, sizes[ci], plan.seed, root);
                    aggregate_cell(&per_trial, ci, li * plan.lambdas.len() + lj, &mut cell);
                    let side = match c0 {
                        Some(c0) if c > c0 => "above",
                        Some(c0) if c < c0 => "below",
                        Some(_) => "at",
                        None => "undefined",
                    };
                    rows.push(ScalingRow {
                        c,
                        n,
                        precision: cell.precision,
                        precision_se: cell.precision_se,
                        recall: cell.recall,
                        recall_se: cell.recall_se,
                        side: side.to_string(),
                        loss,
                        lambda,
                        m: sizes[ci],
                        c0,
                        rss: cell.rss,
                        rss_se: cell.rss_se,
                        trials: cell.trials,
                        precision_excluded: cell.precision_excluded,
                        failed: cell.failed,
                        master_seed: plan.seed,
                        cell_seed: root,
                        error: cell.error,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// CSV with a header row from any serialisable record type.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in rows {
        writer.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Experiment rows in the plain `alpha,lambda,loss,precision,...` layout.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentCsvRow {
    pub alpha: f64,
    pub lambda: f64,
    pub loss: &'static str,
    pub precision: Option<f64>,
    pub precision_se: Option<f64>,
    pub recall: Option<f64>,
    pub recall_se: Option<f64>,
    pub rss: Option<f64>,
    pub rss_se: Option<f64>,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub precision_excluded: usize,
    pub failed: usize,
    pub master_seed: u64,
    pub cell_seed: u64,
}

impl From<&CellRow> for ExperimentCsvRow {
    fn from(r: &CellRow) -> Self {
        Self {
            alpha: r.alpha,
            lambda: r.lambda,
            loss: r.loss.short_name(),
            precision: r.precision,
            precision_se: r.precision_se,
            recall: r.recall,
            recall_se: r.recall_se,
            rss: r.rss,
            rss_se: r.rss_se,
            m: r.m,
            n: r.n,
            trials: r.trials,
            precision_excluded: r.precision_excluded,
            failed: r.failed,
            master_seed: r.master_seed,
            cell_seed: r.cell_seed,
        }
    }
}
