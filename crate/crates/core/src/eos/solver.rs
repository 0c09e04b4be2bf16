use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::active::{ActiveSet, ActiveStats};
use super::gamma::{gamma_fixed_point_from, SpectralTerms};
use super::{ActiveTrialSet, EosProblem, OrderParams, CLAMP_FLOOR};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::spectra::DensityKind;
use crate::special::{soft_threshold_second_moment, two_sided_tail};

const GAMMA_HEADROOM: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact expectations over the neighbourhood marginal (M → ∞ in the active set).
    Asymptotic,
    /// Sample averages over T_MC Monte-Carlo replicates of size M.
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClampEvent {
    pub iteration: usize,
    pub variable: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EosSolution {
    pub loss: Loss,
    pub mode: Mode,
    pub params: OrderParams,
    pub trials: ActiveTrialSet,
    pub iterations: usize,
    /// Mixed relative residual |x − g(x)|/max(1, |x|) of every equation at
    /// the returned point.
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
    /// Largest per-sweep change, one entry per outer iteration.
    pub history: Vec<f64>,
    pub clamped: Vec<ClampEvent>,
    pub density_kind: DensityKind,
    pub spectral: SpectralTerms,
}

#[inline]
fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / x.abs().max(1.0)
}

/// λM/√(HN).
fn threshold(problem: &EosProblem, h: f64) -> f64 {
    problem.lambda_m_over_sqrt_n() / h.sqrt()
}

fn r_target(problem: &EosProblem, h: f64, k: f64) -> f64 {
    h / (k * k) * soft_threshold_second_moment(threshold(problem, h))
}

fn eta_target(problem: &EosProblem, h: f64, k: f64) -> f64 {
    two_sided_tail(threshold(problem, h)) / k
}

fn q_target(x: &OrderParams, s: &SpectralTerms) -> f64 {
    x.f * x.gamma * x.gamma * s.w / (x.e * x.e * s.i2) + x.r * s.j2 / s.i2
}

fn h_target(x: &OrderParams, s: &SpectralTerms) -> f64 {
    x.f * s.j2 / s.i2 + x.r * x.e * x.e * s.w / (s.i1 * s.i1 * s.i2)
}

/// Every equation evaluated at `x` without damping.
fn residuals(
    problem: &EosProblem,
    active: &mut ActiveSet,
    x: &OrderParams,
) -> Result<(BTreeMap<String, f64>, SpectralTerms)> {
    let alpha = problem.alpha();
    let ActiveStats { e, f, jbar } = active.update(x.chi, x.q, problem.lambda)?;
    let s = SpectralTerms::at(&problem.density, x.gamma);
    let gamma_target = if x.e * x.eta == 0.0 { 0.0 } else { x.e * x.eta / s.i1 };
    let mut out = BTreeMap::new();
    out.insert("E".to_string(), rel(x.e, alpha * e));
    out.insert("F".to_string(), rel(x.f, alpha * f));
    out.insert("Jbar".to_string(), rel(x.jbar, jbar));
    out.insert("R".to_string(), rel(x.r, r_target(problem, x.h, x.k)));
    out.insert("Gamma".to_string(), rel(x.gamma, gamma_target));
    out.insert("K".to_string(), rel(x.k, x.e * s.j1 / s.i1));
    out.insert("chi".to_string(), rel(x.chi, x.gamma * s.j1 / x.e));
    out.insert("Q".to_string(), rel(x.q, q_target(x, &s)));
    out.insert("H".to_string(), rel(x.h, h_target(x, &s)));
    out.insert("eta".to_string(), rel(x.eta, eta_target(problem, x.h, x.k)));
    Ok((out, s))
}

pub fn solve(problem: &EosProblem, mode: Mode) -> Result<EosSolution> {
    problem.validate()?;
    let mut active = ActiveSet::new(problem, mode == Mode::Finite)?;
    let alpha = problem.alpha();
    let damp = problem.damp;
    let mut x = OrderParams::default();
    let mut history = Vec::new();
    let mut clamped = Vec::new();

    for iteration in 1..=problem.max_iter {
        let stats = active.update(x.chi, x.q, problem.lambda)?;
        let mut change: f64 = 0.0;
        let mut relax = |old: &mut f64, target: f64| {
            change = change.max(rel(*old, target));
            *old = (1.0 - damp) * target + damp * *old;
        };
        relax(&mut x.e, alpha * stats.e);
        relax(&mut x.f, alpha * stats.f);
        let r = r_target(problem, x.h, x.k);
        relax(&mut x.r, r);
        // Γ·I1(Γ) increases to ⟨1/γ⟩ as Γ → ∞, so larger Eη has no positive
        // root. Early iterates can land there; pull η back inside.
        let ceiling = GAMMA_HEADROOM * problem.density.moment(-1) / x.e;
        if x.eta >= ceiling {
            clamped.push(ClampEvent {
                iteration,
                variable: "eta".to_string(),
                value: x.eta,
            });
            x.eta = ceiling;
        }
        let gamma = gamma_fixed_point_from(x.e, x.eta, &problem.density, damp, x.gamma, 1e-15)?;
        let s = SpectralTerms::at(&problem.density, gamma);
        let k = x.e * s.j1 / s.i1;
        relax(&mut x.k, k);
        let chi = gamma * s.j1 / x.e;
        relax(&mut x.chi, chi);
        let mut y = x;
        y.gamma = gamma;
        let q = q_target(&y, &s);
        relax(&mut x.q, q);
        y.q = x.q;
        let h = h_target(&y, &s);
        relax(&mut x.h, h);
        let eta = eta_target(problem, x.h, x.k);
        relax(&mut x.eta, eta);
        change = change.max(rel(x.gamma, gamma)).max(rel(x.jbar, stats.jbar));
        x.gamma = gamma;
        x.jbar = stats.jbar;

        for (name, v) in [("Q", &mut x.q), ("H", &mut x.h)] {
            if *v < 0.0 || (name == "H" && *v == 0.0) {
                clamped.push(ClampEvent {
                    iteration,
                    variable: name.to_string(),
                    value: *v,
                });
                log::warn!("clamped {name} = {v:e} at iteration {iteration}");
                *v = CLAMP_FLOOR;
            }
        }
        history.push(change);
        if ![x.chi, x.q, x.e, x.f, x.r, x.eta, x.k, x.h, x.gamma, x.jbar]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::EosDivergence {
                iterations: iteration,
                residual: f64::NAN,
                history,
            });
        }
        if change <= problem.tol {
            let (res, spectral) = residuals(problem, &mut active, &x)?;
            let max_residual = res.values().copied().fold(0.0, f64::max);
            if max_residual <= problem.tol {
                return Ok(EosSolution {
                    loss: problem.loss,
                    mode,
                    params: x,
                    trials: active.trials(problem.d),
                    iterations: iteration,
                    residuals: res,
                    max_residual,
                    history,
                    clamped,
                    density_kind: problem.density.kind,
                    spectral,
                });
            }
        }
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::EosDivergence {
        iterations: problem.max_iter,
        residual,
        history,
    })
}

fn require_loss(problem: &EosProblem, loss: Loss) -> Result<()> {
    if problem.loss != loss {
        return Err(Error::Domain(format!(
            "this solver handles the {} loss, the problem uses {}",
            loss.short_name(),
            problem.loss.short_name()
        )));
    }
    Ok(())
}

pub fn solve_linr_asymptotic(problem: &EosProblem) -> Result<EosSolution> {
    require_loss(problem, Loss::Quadratic)?;
    solve(problem, Mode::Asymptotic)
}

pub fn solve_linr_finite(problem: &EosProblem) -> Result<EosSolution> {
    require_loss(problem, Loss::Quadratic)?;
    solve(problem, Mode::Finite)
}

pub fn solve_logr(problem: &EosProblem, finite_size: bool) -> Result<EosSolution> {
    require_loss(problem, Loss::Logistic)?;
    solve(problem, if finite_size { Mode::Finite } else { Mode::Asymptotic })
}
