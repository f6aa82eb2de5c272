//! Branching-process predictions for the multi-type mask model.
//!
//! Three quantities are computed from a [`DegreeModel`] and a [`MaskEnsemble`]:
//!
//! * the probability of emergence per seed type, from the extinction fixed
//!   point `Q = Γ(Q)` reached by iterating `Γ` from the zero vector and then
//!   `P = γ(Q)`;
//! * the reproduction number `R0 = G'(1) · ρ(T diag(m))`;
//! * the expected epidemic size per type, from `q1 = F(q1)` (infections flow
//!   into type `i`, so `F` uses `T_ji`) and `q0 = f(q1)`.
//!
//! Here `γ_i(s) = g(Σ_j m_j (1 - T_ij + T_ij s_j))` and `Γ_i` is the same with
//! the excess-degree PGF `G` in place of `g`.

use log::warn;

use crate::degree::DegreeModel;
use crate::ensemble::MaskEnsemble;
use crate::error::{Error, Result};
use crate::spectral;

/// `|R0 - 1|` below this is reported as critical and treated as subcritical.
pub const CRITICAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Max-norm change between iterates that ends a fixed-point iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting vector for the epidemic-size iteration; `None` means `0.5` in every entry.
    pub theta: Option<Vec<f64>>,
    pub spectral_tol: f64,
    pub spectral_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 1_000_000,
            theta: None,
            spectral_tol: spectral::DEFAULT_TOL,
            spectral_max_iter: spectral::DEFAULT_MAX_ITER,
        }
    }
}

/// Result of a fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Max-norm change of the last step.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Uses `T_ij`: offspring of an infected type-`i` node.
    Outward,
    /// Uses `T_ji`: infections arriving at a type-`i` node.
    Inward,
}

/// `Σ_j m_j (1 - T + T s_j)` with `T = T_ij` or `T_ji`. Lies in `[0, 1]` up to round-off.
fn mixed_argument(ens: &MaskEnsemble, s: &[f64], i: usize, dir: Direction) -> f64 {
    let m = ens.prevalence();
    let x: f64 = (0..ens.num_types())
        .map(|j| {
            let t = match dir {
                Direction::Outward => ens.t(i, j),
                Direction::Inward => ens.t(j, i),
            };
            m[j] * (1.0 - t + t * s[j])
        })
        .sum();
    x.clamp(0.0, 1.0)
}

fn check_inputs(ens: &MaskEnsemble, s: &[f64], i: usize) -> Result<()> {
    if i >= ens.num_types() {
        return Err(Error::IndexOutOfRange { index: i, types: ens.num_types() });
    }
    if s.len() != ens.num_types() {
        return Err(Error::Domain(format!("argument has {} entries, expected {}", s.len(), ens.num_types())));
    }
    if let Some(v) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("PGF argument entry {v} outside [0, 1]")));
    }
    Ok(())
}

/// `γ_i(s)`: PGF of the typed offspring of a type-`i` seed.
pub fn seed_generation_pgf(ens: &MaskEnsemble, model: &DegreeModel, s: &[f64], i: usize) -> Result<f64> {
    check_inputs(ens, s, i)?;
    model.pgf(mixed_argument(ens, s, i, Direction::Outward))
}

/// `Γ_i(s)`: PGF of the typed offspring of a later-generation type-`i` infective.
pub fn later_generation_pgf(ens: &MaskEnsemble, model: &DegreeModel, s: &[f64], i: usize) -> Result<f64> {
    check_inputs(ens, s, i)?;
    model.excess_pgf(mixed_argument(ens, s, i, Direction::Outward))
}

fn warn_if_not_regular(ens: &MaskEnsemble) {
    if ens.has_zero_transmissibility() {
        warn!("transmissibility matrix has zero entries; fixed-point uniqueness is not guaranteed");
    }
}

/// Iterates `s ← map(s)` until the max-norm step is below `tol`.
fn iterate<F>(solver: &'static str, start: Vec<f64>, tol: f64, max_iter: usize, nondecreasing: bool, mut map: F) -> Result<FixedPoint>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let mut cur = start;
    let mut next = vec![0.0; cur.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        map(&cur, &mut next)?;
        residual = 0.0;
        for (c, n) in cur.iter().zip(&next) {
            debug_assert!((0.0..=1.0).contains(n), "{solver}: iterate {n} left [0, 1]");
            debug_assert!(!nondecreasing || *n >= c - 1e-15, "{solver}: iterate decreased from {c} to {n}");
            residual = f64::max(residual, (n - c).abs());
        }
        std::mem::swap(&mut cur, &mut next);
        if residual < tol {
            return Ok(FixedPoint { values: cur, iterations: it, residual });
        }
    }
    Err(Error::NonConvergence { solver, iterations: max_iter, residual, last: cur })
}

/// Extinction probabilities `Q` of a lineage started by a later-generation
/// infective: the limit of `Γ` iterated from the zero vector.
pub fn extinction_fixed_point(ens: &MaskEnsemble, model: &DegreeModel, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    model.excess_factor()?;
    warn_if_not_regular(ens);
    let n = ens.num_types();
    iterate("extinction_fixed_point", vec![0.0; n], tol, max_iter, true, |s, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = model.excess_pgf(mixed_argument(ens, s, i, Direction::Outward))?;
        }
        Ok(())
    })
}

/// Probability of emergence per seed type, `1 - γ_i(Q)`, and for a uniformly
/// chosen seed node, `Σ m_i (1 - γ_i(Q))`.
pub fn emergence_probabilities(ens: &MaskEnsemble, model: &DegreeModel, extinction: &[f64]) -> Result<(Vec<f64>, f64)> {
    let pe = (0..ens.num_types())
        .map(|i| seed_generation_pgf(ens, model, extinction, i).map(|p| (1.0 - p).max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    let random = pe.iter().zip(ens.prevalence()).map(|(p, m)| p * m).sum();
    Ok((pe, random))
}

pub fn spectral_radius(a: &[f64], n: usize, tol: f64, max_iter: usize) -> Result<f64> {
    spectral::spectral_radius(a, n, tol, max_iter)
}

/// `R0 = G'(1) · ρ(T diag(m))`.
pub fn reproduction_number(ens: &MaskEnsemble, model: &DegreeModel) -> Result<f64> {
    reproduction_number_with(ens, model, spectral::DEFAULT_TOL, spectral::DEFAULT_MAX_ITER)
}

fn reproduction_number_with(ens: &MaskEnsemble, model: &DegreeModel, tol: f64, max_iter: usize) -> Result<f64> {
    let excess = model.excess_factor()?;
    Ok(excess * spectral::spectral_radius(&ens.tm_matrix(), ens.num_types(), tol, max_iter)?)
}

/// `R0 = G'(1) · Σ m_i T_ii`, valid only when `T` is the outer product of
/// mask efficiencies (the only non-zero eigenvalue of `T diag(m)`).
pub fn reproduction_number_rank_one(ens: &MaskEnsemble, model: &DegreeModel) -> Result<f64> {
    if !ens.is_rank_one() {
        return Err(Error::RankOneRequired);
    }
    let excess = model.excess_factor()?;
    let same_type: f64 = ens.prevalence().iter().enumerate().map(|(i, m)| m * ens.t(i, i)).sum();
    Ok(excess * same_type)
}

/// Non-infection probabilities for the epidemic-size computation.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeFixedPoint {
    /// Level-1 fixed point `q1 = F(q1)`.
    pub q1: FixedPoint,
    /// Root non-infection probabilities `q0 = f(q1)`.
    pub q0: Vec<f64>,
}

/// Iterates `F` from `theta` to `q1`, then applies `f` to get `q0`.
pub fn epidemic_size_fixed_point(
    ens: &MaskEnsemble,
    model: &DegreeModel,
    theta: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SizeFixedPoint> {
    model.excess_factor()?;
    let n = ens.num_types();
    if theta.len() != n {
        return Err(Error::Domain(format!("theta has {} entries, expected {n}", theta.len())));
    }
    if let Some(v) = theta.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Domain(format!("theta entry {v} outside (0, 1)")));
    }
    warn_if_not_regular(ens);
    let q1 = iterate("epidemic_size_fixed_point", theta.to_vec(), tol, max_iter, false, |s, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = model.excess_pgf(mixed_argument(ens, s, i, Direction::Inward))?;
        }
        Ok(())
    })?;
    let q0 = (0..n)
        .map(|i| model.pgf(mixed_argument(ens, &q1.values, i, Direction::Inward)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SizeFixedPoint { q1, q0 })
}

/// Iteration counts and residuals from [`summarize`]. Zero iterations means the
/// regime was classified subcritical from `R0` and no iteration ran.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub extinction_iterations: usize,
    pub extinction_residual: f64,
    pub size_iterations: usize,
    pub size_residual: f64,
    pub theta: Vec<f64>,
    pub critical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSummary {
    pub pe_by_seed_type: Vec<f64>,
    pub pe_random_seed: f64,
    pub extinction_probs: Vec<f64>,
    pub r0: f64,
    pub q1: Vec<f64>,
    pub q0: Vec<f64>,
    /// `1 - q0_i`: probability a type-`i` node is eventually infected, given emergence.
    pub individual_infection_prob: Vec<f64>,
    /// `m_i (1 - q0_i)`: fraction of the whole population that is infected and of type `i`.
    pub epidemic_size_by_type: Vec<f64>,
    pub total_epidemic_size: f64,
    pub diagnostics: SolverDiagnostics,
}

impl AnalyticSummary {
    pub fn is_supercritical(&self) -> bool {
        self.r0 > 1.0 + CRITICAL_BAND
    }
}

/// Runs every solver and collects the results.
///
/// `R0 <= 1 + CRITICAL_BAND` short-circuits to certain extinction: `Q`, `q0`
/// and `q1` are exactly one and PE and ES are exactly zero.
pub fn summarize(ens: &MaskEnsemble, model: &DegreeModel, opts: &SolverOptions) -> Result<AnalyticSummary> {
    let n = ens.num_types();
    let r0 = reproduction_number_with(ens, model, opts.spectral_tol, opts.spectral_max_iter)?;
    let theta = opts.theta.clone().unwrap_or_else(|| vec![0.5; n]);
    let critical = (r0 - 1.0).abs() < CRITICAL_BAND;
    let mut diagnostics = SolverDiagnostics {
        extinction_iterations: 0,
        extinction_residual: 0.0,
        size_iterations: 0,
        size_residual: 0.0,
        theta: theta.clone(),
        critical,
    };
    let (extinction, q1, q0) = if r0 <= 1.0 + CRITICAL_BAND {
        (vec![1.0; n], vec![1.0; n], vec![1.0; n])
    } else {
        let ext = extinction_fixed_point(ens, model, opts.tol, opts.max_iter)?;
        let size = epidemic_size_fixed_point(ens, model, &theta, opts.tol, opts.max_iter)?;
        diagnostics.extinction_iterations = ext.iterations;
        diagnostics.extinction_residual = ext.residual;
        diagnostics.size_iterations = size.q1.iterations;
        diagnostics.size_residual = size.q1.residual;
        (ext.values, size.q1.values, size.q0)
    };
    let (pe_by_seed_type, pe_random_seed) = emergence_probabilities(ens, model, &extinction)?;
    let individual: Vec<f64> = q0.iter().map(|q| (1.0 - q).max(0.0)).collect();
    let by_type: Vec<f64> = individual.iter().zip(ens.prevalence()).map(|(p, m)| p * m).collect();
    let total = by_type.iter().sum();
    Ok(AnalyticSummary {
        pe_by_seed_type,
        pe_random_seed,
        extinction_probs: extinction,
        r0,
        q1,
        q0,
        individual_infection_prob: individual,
        epidemic_size_by_type: by_type,
        total_epidemic_size: total,
        diagnostics,
    })
}
