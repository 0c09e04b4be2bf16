//! Active-set parts of the equations of state: the mean couplings on the
//! true neighbourhood and the α-free parts of E and F.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{ActiveTrialSet, EosProblem};
use crate::error::{Error, Result};
use crate::ising::NeighborhoodTable;
use crate::loss::Loss;
use crate::quadrature::{standard_normal_rule, GaussRule};
use crate::rng::{derive_rng, Purpose};
use crate::roots::decreasing_root;
use crate::special::soft_threshold;

const INNER_TOL: f64 = 1e-12;
const INNER_MAX_SWEEPS: usize = 100_000;
const NEWTON_MAX_STEPS: usize = 500;
const NEGLIGIBLE_DECREASE: f64 = 1e-13;

/// E/α, F/α and the mean active coupling at given (χ, Q).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActiveStats {
    pub e: f64,
    pub f: f64,
    pub jbar: f64,
}

pub(super) enum ActiveSet {
    LinrAsymptotic(LinrAsymptotic),
    LinrFinite(Vec<LinrTrial>),
    LogrAsymptotic(LogrAsymptotic),
    LogrFinite(Vec<LogrTrial>),
}

impl ActiveSet {
    pub(super) fn new(problem: &EosProblem, finite: bool) -> Result<Self> {
        let table = NeighborhoodTable::new(problem.d, problem.k0)?;
        Ok(match (problem.loss, finite) {
            (Loss::Quadratic, false) => Self::LinrAsymptotic(LinrAsymptotic {
                table,
                lambda: problem.lambda,
                j: 0.0,
                delta: 0.0,
            }),
            (Loss::Logistic, false) => Self::LogrAsymptotic(LogrAsymptotic::new(problem)?),
            (loss, true) => {
                let trials = (0..problem.t_mc)
                    .map(|t| TrialSamples::draw(&table, problem, t))
                    .collect::<Vec<_>>();
                match loss {
                    Loss::Quadratic => Self::LinrFinite(trials.into_iter().map(LinrTrial::new).collect()),
                    Loss::Logistic => Self::LogrFinite(trials.into_iter().map(LogrTrial::new).collect()),
                }
            }
        })
    }

    pub(super) fn update(&mut self, chi: f64, q: f64, lambda: f64) -> Result<ActiveStats> {
        match self {
            Self::LinrAsymptotic(a) => Ok(a.update(chi, q)),
            Self::LogrAsymptotic(a) => a.update(chi, q),
            Self::LinrFinite(trials) => {
                let stats = trials
                    .par_iter_mut()
                    .enumerate()
                    .map(|(t, tr)| tr.solve(chi, q, lambda).map_err(|reason| Error::InnerSolver { trial: t, reason }))
                    .collect::<Result<Vec<f64>>>()?;
                let delta = mean(&stats);
                let jbar = mean_coupling(trials.iter().map(|t| t.j.as_slice()));
                Ok(ActiveStats {
                    e: 1.0 / (1.0 + chi),
                    f: (delta + q) / (1.0 + chi).powi(2),
                    jbar,
                })
            }
            Self::LogrFinite(trials) => {
                let stats = trials
                    .par_iter_mut()
                    .enumerate()
                    .map(|(t, tr)| tr.solve(chi, q, lambda).map_err(|reason| Error::InnerSolver { trial: t, reason }))
                    .collect::<Result<Vec<(f64, f64)>>>()?;
                let e = stats.iter().map(|s| s.0).sum::<f64>() / stats.len() as f64;
                let f = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
                let jbar = mean_coupling(trials.iter().map(|t| t.j.as_slice()));
                Ok(ActiveStats { e, f, jbar })
            }
        }
    }

    pub(super) fn trials(&self, d: usize) -> ActiveTrialSet {
        match self {
            Self::LinrAsymptotic(a) => ActiveTrialSet {
                estimates: vec![vec![a.j; d]],
                deltas: vec![a.delta],
            },
            Self::LogrAsymptotic(a) => ActiveTrialSet {
                estimates: vec![vec![a.signed_j(); d]],
                deltas: vec![a.delta],
            },
            Self::LinrFinite(trials) => ActiveTrialSet {
                estimates: trials.iter().map(|t| t.j.clone()).collect(),
                deltas: trials.iter().map(|t| t.delta).collect(),
            },
            Self::LogrFinite(trials) => ActiveTrialSet {
                estimates: trials.iter().map(|t| t.j.clone()).collect(),
                deltas: trials.iter().map(|t| t.delta).collect(),
            },
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_coupling<'a>(it: impl Iterator<Item = &'a [f64]>) -> f64 {
    let (s, c) = it.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    s / c.max(1) as f64
}

pub(super) struct LinrAsymptotic {
    table: NeighborhoodTable,
    lambda: f64,
    j: f64,
    delta: f64,
}

impl LinrAsymptotic {
    fn update(&mut self, chi: f64, q: f64) -> ActiveStats {
        let t = self.table.k0().tanh();
        let d = self.table.d() as f64;
        let j = soft_threshold(t, self.lambda * (1.0 + chi)) / (1.0 + (d - 1.0) * t * t);
        let delta = self.table.expectation(|s0, s| {
            let field: f64 = s.iter().map(|&v| v as f64).sum::<f64>() * j;
            (s0 as f64 - field).powi(2)
        });
        self.j = j;
        self.delta = delta;
        ActiveStats {
            e: 1.0 / (1.0 + chi),
            f: (delta + q) / (1.0 + chi).powi(2),
            jbar: j,
        }
    }
}

pub(super) struct LogrAsymptotic {
    /// (m, P(m)) for m = s0·Σ s_j under |K0|.
    dist: Vec<(f64, f64)>,
    rule: GaussRule,
    sign: f64,
    lambda: f64,
    d: f64,
    j: f64,
    delta: f64,
}

impl LogrAsymptotic {
    fn new(problem: &EosProblem) -> Result<Self> {
        let table = NeighborhoodTable::new(problem.d, problem.k0.abs())?;
        Ok(Self {
            dist: table.aligned_distribution(),
            rule: standard_normal_rule(problem.hermite_order),
            sign: if problem.k0 < 0.0 { -1.0 } else { 1.0 },
            lambda: problem.lambda,
            d: problem.d as f64,
            j: 0.0,
            delta: 0.0,
        })
    }

    fn signed_j(&self) -> f64 {
        self.sign * self.j
    }

    /// Visit every (m, z) node with its weight and ŷ at coupling j.
    fn visit<F: FnMut(f64, f64, f64)>(&self, j: f64, chi: f64, q: f64, mut f: F) -> Result<()> {
        let sq = q.max(0.0).sqrt();
        for (state, &(m, p)) in self.dist.iter().enumerate() {
            for (&z, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let a = sq * z + j * m;
                let y = Loss::Logistic.prox(a, chi).ok_or(Error::ProxNewton { state, z })?;
                f(p * w, m, y);
            }
        }
        Ok(())
    }

    fn update(&mut self, chi: f64, q: f64) -> Result<ActiveStats> {
        let target = self.lambda * self.d;
        let mut failure = None;
        // Stationarity of the reduced problem: E[(1 − tanh ŷ)·m] = λd.
        let j = decreasing_root(
            |j| {
                let (mut v, mut dv) = (0.0, 0.0);
                if let Err(e) = self.visit(j, chi, q, |w, m, y| {
                    let t = y.tanh();
                    let l2 = 1.0 - t * t;
                    v += w * (1.0 - t) * m;
                    dv -= w * m * m * l2 / (1.0 + chi * l2);
                }) {
                    failure = Some(e);
                }
                (v - target, dv)
            },
            0.0,
            0.5,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let (mut e, mut f) = (0.0, 0.0);
        self.visit(j, chi, q, |w, _, y| {
            let t = y.tanh();
            let l2 = 1.0 - t * t;
            e += w * l2 / (1.0 + chi * l2);
            f += w * (1.0 - t) * (1.0 - t);
        })?;
        self.j = j;
        self.delta = f;
        Ok(ActiveStats {
            e,
            f,
            jbar: self.signed_j(),
        })
    }
}

/// Fixed Monte-Carlo draws for one replicate, stored in the aligned form
/// x_μ = s0·s_Ψ and z̃_μ = s0·z.
pub(super) struct TrialSamples {
    d: usize,
    x: Vec<f64>,
    z: Vec<f64>,
}

impl TrialSamples {
    fn draw(table: &NeighborhoodTable, problem: &EosProblem, t: usize) -> Self {
        let mut rng = derive_rng(problem.seed, Purpose::Theory, &[t as u64]);
        let d = problem.d;
        let m = problem.m;
        let mut x = Vec::with_capacity(m * d);
        let mut z = Vec::with_capacity(m);
        let mut row = vec![0i8; d];
        for _ in 0..m {
            let s0 = table.sample_into(&mut rng, &mut row) as f64;
            x.extend(row.iter().map(|&s| s0 * s as f64));
            let g: f64 = StandardNormal.sample(&mut rng);
            z.push(s0 * g);
        }
        Self { d, x, z }
    }

    fn m(&self) -> usize {
        self.z.len()
    }
}

pub(super) struct LinrTrial {
    d: usize,
    /// (1/M) Σ x xᵀ, row-major.
    gram: Vec<f64>,
    /// (1/M) Σ x, i.e. (1/M) Σ s0·s_Ψ.
    b_s: Vec<f64>,
    /// (1/M) Σ z̃·x, i.e. (1/M) Σ z·s_Ψ.
    b_z: Vec<f64>,
    j: Vec<f64>,
    delta: f64,
}

impl LinrTrial {
    fn new(s: TrialSamples) -> Self {
        let d = s.d;
        let m = s.m() as f64;
        let mut gram = vec![0.0; d * d];
        let mut b_s = vec![0.0; d];
        let mut b_z = vec![0.0; d];
        for (row, &z) in s.x.chunks_exact(d).zip(&s.z) {
            for k in 0..d {
                b_s[k] += row[k];
                b_z[k] += z * row[k];
                for l in 0..d {
                    gram[k * d + l] += row[k] * row[l];
                }
            }
        }
        gram.iter_mut().for_each(|v| *v /= m);
        b_s.iter_mut().for_each(|v| *v /= m);
        b_z.iter_mut().for_each(|v| *v /= m);
        Self {
            d,
            gram,
            b_s,
            b_z,
            j: vec![0.0; d],
            delta: 1.0,
        }
    }

    /// Minimise ½JᵀGJ − Jᵀ(b_s − √Q·b_z) + λ(1+χ)‖J‖₁ by cyclic coordinate
    /// descent; returns Δ = 1 − 2Jᵀb_s + JᵀGJ.
    fn solve(&mut self, chi: f64, q: f64, lambda: f64) -> std::result::Result<f64, String> {
        let d = self.d;
        let sq = q.max(0.0).sqrt();
        let tau = lambda * (1.0 + chi);
        let c: Vec<f64> = (0..d).map(|k| self.b_s[k] - sq * self.b_z[k]).collect();
        let mut converged = false;
        for _ in 0..INNER_MAX_SWEEPS {
            let mut max_change: f64 = 0.0;
            for k in 0..d {
                let gkk = self.gram[k * d + k];
                let off: f64 = (0..d)
                    .filter(|&l| l != k)
                    .map(|l| self.gram[k * d + l] * self.j[l])
                    .sum();
                let next = soft_threshold(c[k] - off, tau) / gkk;
                max_change = max_change.max((next - self.j[k]).abs());
                self.j[k] = next;
            }
            if max_change <= INNER_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(format!("coordinate descent did not settle within {INNER_MAX_SWEEPS} sweeps"));
        }
        let mut quad = 0.0;
        for k in 0..d {
            for l in 0..d {
                quad += self.j[k] * self.gram[k * d + l] * self.j[l];
            }
        }
        let lin: f64 = (0..d).map(|k| self.j[k] * self.b_s[k]).sum();
        self.delta = 1.0 - 2.0 * lin + quad;
        Ok(self.delta)
    }
}

pub(super) struct LogrTrial {
    s: TrialSamples,
    j: Vec<f64>,
    yhat: Vec<f64>,
    delta: f64,
}

struct Evaluation {
    objective: f64,
    yhat: Vec<f64>,
}

impl LogrTrial {
    fn new(s: TrialSamples) -> Self {
        let m = s.m();
        let d = s.d;
        Self {
            s,
            j: vec![0.0; d],
            yhat: vec![0.0; m],
            delta: 1.0,
        }
    }

    fn fields(&self, j: &[f64], sq: f64) -> impl Iterator<Item = f64> + '_ {
        let j = j.to_vec();
        self.s
            .x
            .chunks_exact(self.s.d)
            .zip(&self.s.z)
            .map(move |(row, &z)| sq * z + row.iter().zip(&j).map(|(a, b)| a * b).sum::<f64>())
    }

    /// (1/M) Σ env(a_μ) and the proximal outputs ŷ_μ.
    fn evaluate(&self, j: &[f64], chi: f64, sq: f64) -> std::result::Result<Evaluation, String> {
        let mut objective = 0.0;
        let mut yhat = Vec::with_capacity(self.yhat.len());
        for (mu, a) in self.fields(j, sq).enumerate() {
            let y = Loss::Logistic
                .prox_from(a, chi, self.yhat[mu])
                .ok_or_else(|| format!("proximal Newton failed at sample {mu}, field {a}"))?;
            objective += Loss::Logistic.envelope(a, chi, y);
            yhat.push(y);
        }
        Ok(Evaluation {
            objective: objective / self.s.m() as f64,
            yhat,
        })
    }

    /// Proximal Newton on (1/M) Σ env(√Q z̃ + Jᵀx) + λ‖J‖₁. Returns
    /// (mean ℓ''/(1+χℓ''), mean (1 − tanh ŷ)²).
    fn solve(&mut self, chi: f64, q: f64, lambda: f64) -> std::result::Result<(f64, f64), String> {
        let d = self.s.d;
        let m = self.s.m() as f64;
        let sq = q.max(0.0).sqrt();
        let l1 = |j: &[f64]| lambda * j.iter().map(|v| v.abs()).sum::<f64>();
        let mut current = self.evaluate(&self.j.clone(), chi, sq)?;
        self.yhat.clone_from(&current.yhat);
        let mut done = false;
        for _ in 0..NEWTON_MAX_STEPS {
            let mut grad = vec![0.0; d];
            let mut hess = vec![0.0; d * d];
            for (row, &y) in self.s.x.chunks_exact(d).zip(&self.yhat) {
                let t = y.tanh();
                let l2 = 1.0 - t * t;
                let w = l2 / (1.0 + chi * l2);
                for k in 0..d {
                    grad[k] += (t - 1.0) * row[k];
                    for l in 0..d {
                        hess[k * d + l] += w * row[k] * row[l];
                    }
                }
            }
            grad.iter_mut().for_each(|g| *g /= m);
            hess.iter_mut().for_each(|h| *h /= m);
            let mapping = (0..d)
                .map(|k| (self.j[k] - soft_threshold(self.j[k] - grad[k], lambda)).abs())
                .fold(0.0, f64::max);
            if mapping <= INNER_TOL {
                done = true;
                break;
            }
            // Minimise the local quadratic model over u = J + δ.
            let mut u = self.j.clone();
            for _ in 0..INNER_MAX_SWEEPS {
                let mut change: f64 = 0.0;
                for k in 0..d {
                    let hkk = hess[k * d + k];
                    let smooth: f64 = grad[k] + (0..d).map(|l| hess[k * d + l] * (u[l] - self.j[l])).sum::<f64>();
                    let next = soft_threshold(hkk * u[k] - smooth, lambda) / hkk;
                    change = change.max((next - u[k]).abs());
                    u[k] = next;
                }
                if change <= 1e-15 {
                    break;
                }
            }
            let delta: Vec<f64> = (0..d).map(|k| u[k] - self.j[k]).collect();
            let base = current.objective + l1(&self.j);
            let decrease = (0..d).map(|k| grad[k] * delta[k]).sum::<f64>() + l1(&u) - l1(&self.j);
            if decrease >= 0.0 {
                done = true;
                break;
            }
            if -decrease <= NEGLIGIBLE_DECREASE * (1.0 + base.abs()) {
                // Below the rounding noise of the objective: Armijo cannot
                // resolve the step, but the full Newton step is safe here.
                self.j = u;
                current = self.evaluate(&self.j, chi, sq)?;
                self.yhat.clone_from(&current.yhat);
                continue;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..d).map(|k| self.j[k] + step * delta[k]).collect();
                let eval = self.evaluate(&trial, chi, sq)?;
                if eval.objective + l1(&trial) <= base + 1e-4 * step * decrease {
                    self.j = trial;
                    current = eval;
                    self.yhat.clone_from(&current.yhat);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // No representable decrease left: the iterate is optimal to
                // working precision.
                done = true;
                break;
            }
        }
        if !done {
            return Err(format!("proximal Newton did not converge in {NEWTON_MAX_STEPS} steps"));
        }
        let (mut e, mut f) = (0.0, 0.0);
        for &y in &self.yhat {
            let t = y.tanh();
            let l2 = 1.0 - t * t;
            e += l2 / (1.0 + chi * l2);
            f += (1.0 - t) * (1.0 - t);
        }
        self.delta = f / m;
        Ok((e / m, f / m))
    }
}
