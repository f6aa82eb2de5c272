//! Degree distributions for configuration-model networks.
//!
//! A [`DegreeModel`] exposes the generating function of the degree
//! distribution `g(x) = Σ p_k x^k`, the generating function of the excess
//! degree `G(x) = Σ k p_k / <k> x^(k-1)`, and the first two moments. These are
//! the only properties of the network the analytic solvers consume.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p_k = 1` for empirical distributions. Inputs inside it are
/// renormalized, inputs outside it are rejected.
pub const PMF_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeModel {
    Poisson { mean: f64 },
    Empirical(EmpiricalPmf),
}

/// A finite degree pmf with distinct degrees, normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPmf {
    degrees: Vec<u32>,
    probs: Vec<f64>,
    mean: f64,
    second_moment: f64,
}

impl EmpiricalPmf {
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl DegreeModel {
    pub fn poisson(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::validation("degree.mean", None, format!("Poisson mean must be positive and finite, got {mean}")));
        }
        Ok(DegreeModel::Poisson { mean })
    }

    /// Builds an empirical model from parallel arrays of degrees and probabilities.
    pub fn empirical(degrees: &[u32], probs: &[f64]) -> Result<Self> {
        if degrees.len() != probs.len() {
            return Err(Error::validation(
                "degree.probabilities",
                None,
                format!("{} degrees but {} probabilities", degrees.len(), probs.len()),
            ));
        }
        if degrees.is_empty() {
            return Err(Error::validation("degree.degrees", None, "empty pmf"));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::validation("degree.probabilities", Some(i), format!("probability must be >= 0, got {p}")));
            }
        }
        let mut seen = degrees.to_vec();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            let idx = degrees.iter().position(|&d| d == w[0]).unwrap_or(0);
            return Err(Error::validation("degree.degrees", Some(idx), format!("degree {} listed twice", w[0])));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::validation("degree.probabilities", None, format!("pmf sums to {total}, not 1")));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let mean = degrees.iter().zip(&probs).map(|(&k, &p)| k as f64 * p).sum();
        let second_moment = degrees.iter().zip(&probs).map(|(&k, &p)| (k as f64).powi(2) * p).sum();
        Ok(DegreeModel::Empirical(EmpiricalPmf {
            degrees: degrees.to_vec(),
            probs,
            mean,
            second_moment,
        }))
    }

    /// Generating function of the degree distribution.
    pub fn pgf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(match self {
            DegreeModel::Poisson { mean } => (mean * (x - 1.0)).exp(),
            DegreeModel::Empirical(pmf) => pmf
                .degrees
                .iter()
                .zip(&pmf.probs)
                .map(|(&k, &p)| p * powu(x, k))
                .sum(),
        })
    }

    /// Generating function of the excess degree. Identical to [`pgf`](Self::pgf)
    /// for Poisson models.
    pub fn excess_pgf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let (mean, _) = self.moments();
        if mean <= 0.0 {
            return Err(Error::DegenerateModel);
        }
        Ok(match self {
            DegreeModel::Poisson { mean } => (mean * (x - 1.0)).exp(),
            DegreeModel::Empirical(pmf) => pmf
                .degrees
                .iter()
                .zip(&pmf.probs)
                .filter(|(&k, _)| k > 0)
                .map(|(&k, &p)| k as f64 * p / mean * powu(x, k - 1))
                .sum(),
        })
    }

    /// `(<k>, <k^2>)`.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            DegreeModel::Poisson { mean } => (*mean, mean * mean + mean),
            DegreeModel::Empirical(pmf) => (pmf.mean, pmf.second_moment),
        }
    }

    pub fn mean_degree(&self) -> f64 {
        self.moments().0
    }

    /// Mean excess degree `(<k^2> - <k>) / <k>`, i.e. `G'(1)`.
    pub fn excess_factor(&self) -> Result<f64> {
        let (k1, k2) = self.moments();
        if k1 <= 0.0 {
            return Err(Error::DegenerateModel);
        }
        Ok((k2 - k1) / k1)
    }

    /// Draws a single degree. Prefer [`DegreeModel::sampler`] when drawing many.
    pub fn sample_degree<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sampler().sample(rng)
    }

    pub fn sampler(&self) -> DegreeSampler {
        match self {
            DegreeModel::Poisson { mean } if *mean <= POISSON_TABLE_MAX_MEAN => DegreeSampler::PoissonTable(PoissonTable::new(*mean)),
            DegreeModel::Poisson { mean } => {
                DegreeSampler::Poisson(Poisson::new(*mean).expect("mean validated at construction"))
            }
            DegreeModel::Empirical(pmf) => DegreeSampler::Alias {
                degrees: pmf.degrees.clone(),
                index: WeightedAliasIndex::new(pmf.probs.clone()).expect("pmf validated at construction"),
            },
        }
    }
}

/// Pre-built sampler for repeated degree draws.
pub enum DegreeSampler {
    PoissonTable(PoissonTable),
    Poisson(Poisson<f64>),
    Alias {
        degrees: Vec<u32>,
        index: WeightedAliasIndex<f64>,
    },
}

impl DegreeSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            DegreeSampler::PoissonTable(t) => t.sample(rng),
            DegreeSampler::Poisson(p) => p.sample(rng) as u32,
            DegreeSampler::Alias { degrees, index } => degrees[index.sample(rng)],
        }
    }
}

/// Above this mean e^{-mean} gets too small to start the table from.
const POISSON_TABLE_MAX_MEAN: f64 = 500.0;

/// Poisson sampling by inversion against a precomputed CDF. Uniforms beyond
/// the tabulated mass continue the recurrence one term at a time.
pub struct PoissonTable {
    mean: f64,
    cdf: Vec<f64>,
    last_pmf: f64,
}

impl PoissonTable {
    fn new(mean: f64) -> Self {
        let mut pmf = (-mean).exp();
        let mut acc = pmf;
        let mut cdf = vec![acc];
        let cap = (mean + 40.0 * mean.sqrt() + 50.0) as usize;
        let mut k = 0;
        while acc < 1.0 - 1e-15 && k < cap {
            k += 1;
            pmf *= mean / k as f64;
            acc += pmf;
            cdf.push(acc);
        }
        PoissonTable { mean, cdf, last_pmf: pmf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        if k < self.cdf.len() {
            return k as u32;
        }
        let (mut k, mut pmf, mut acc) = (self.cdf.len() - 1, self.last_pmf, self.cdf[self.cdf.len() - 1]);
        while acc <= u && pmf > 0.0 {
            k += 1;
            pmf *= self.mean / k as f64;
            acc += pmf;
        }
        k as u32
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("PGF argument {x} outside [0, 1]")))
    }
}

fn powu(x: f64, k: u32) -> f64 {
    if k <= i32::MAX as u32 {
        x.powi(k as i32)
    } else {
        x.powf(k as f64)
    }
}

/// Config-file form of a degree model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DegreeSpec {
    Poisson { mean: f64 },
    Empirical { degrees: Vec<u32>, probabilities: Vec<f64> },
}

impl DegreeSpec {
    pub fn build(&self) -> Result<DegreeModel> {
        match self {
            DegreeSpec::Poisson { mean } => DegreeModel::poisson(*mean),
            DegreeSpec::Empirical { degrees, probabilities } => DegreeModel::empirical(degrees, probabilities),
        }
    }
}
