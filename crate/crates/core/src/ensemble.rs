//! Mask types and the pairwise transmissibility matrix between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ m_i = 1`.
pub const PREVALENCE_TOLERANCE: f64 = 1e-12;

/// Mask efficiencies an ensemble was built from. `T_ij = eps_out[i] * eps_in[j] * baseline_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Efficiencies {
    pub eps_in: Vec<f64>,
    pub eps_out: Vec<f64>,
    pub baseline_t: f64,
}

/// Whether zero transmissibilities are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Positivity {
    /// Every `T_ij > 0`; the branching process is positive regular and the
    /// fixed points are unique.
    #[default]
    Strict,
    /// `T_ij = 0` allowed. Solvers log a warning since uniqueness may fail.
    Permissive,
}

/// `M` mask types: prevalences `m`, transmissibility matrix `T` (row = infector
/// type, column = susceptible type) and display labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskEnsemble {
    prevalence: Vec<f64>,
    transmissibility: Vec<f64>,
    labels: Vec<String>,
    efficiencies: Option<Efficiencies>,
    positivity: Positivity,
}

impl MaskEnsemble {
    pub fn from_efficiencies(
        eps_in: &[f64],
        eps_out: &[f64],
        baseline_t: f64,
        prevalence: &[f64],
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        Self::from_efficiencies_with(eps_in, eps_out, baseline_t, prevalence, labels, Positivity::Strict)
    }

    pub fn from_efficiencies_with(
        eps_in: &[f64],
        eps_out: &[f64],
        baseline_t: f64,
        prevalence: &[f64],
        labels: Option<Vec<String>>,
        positivity: Positivity,
    ) -> Result<Self> {
        let types = prevalence.len();
        check_len("eps_in", eps_in.len(), types)?;
        check_len("eps_out", eps_out.len(), types)?;
        check_unit_vec("eps_in", eps_in)?;
        check_unit_vec("eps_out", eps_out)?;
        if !(baseline_t > 0.0 && baseline_t <= 1.0) {
            return Err(Error::validation("baseline_T", None, format!("must lie in (0, 1], got {baseline_t}")));
        }
        let mut t = Vec::with_capacity(types * types);
        for &out in eps_out {
            for &inw in eps_in {
                t.push(out * inw * baseline_t);
            }
        }
        let mut ens = Self::assemble(t, prevalence, labels, positivity)?;
        ens.efficiencies = Some(Efficiencies {
            eps_in: eps_in.to_vec(),
            eps_out: eps_out.to_vec(),
            baseline_t,
        });
        Ok(ens)
    }

    /// General (not necessarily rank-one) transmissibility matrix given by rows.
    pub fn from_matrix(matrix: &[Vec<f64>], prevalence: &[f64], labels: Option<Vec<String>>) -> Result<Self> {
        Self::from_matrix_with(matrix, prevalence, labels, Positivity::Strict)
    }

    pub fn from_matrix_with(
        matrix: &[Vec<f64>],
        prevalence: &[f64],
        labels: Option<Vec<String>>,
        positivity: Positivity,
    ) -> Result<Self> {
        let types = prevalence.len();
        check_len("t_matrix", matrix.len(), types)?;
        let mut t = Vec::with_capacity(types * types);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != types {
                return Err(Error::validation("t_matrix", Some(i), format!("row has {} entries, expected {types}", row.len())));
            }
            t.extend_from_slice(row);
        }
        Self::assemble(t, prevalence, labels, positivity)
    }

    fn assemble(t: Vec<f64>, prevalence: &[f64], labels: Option<Vec<String>>, positivity: Positivity) -> Result<Self> {
        let types = prevalence.len();
        if types == 0 {
            return Err(Error::validation("m", None, "at least one mask type is required"));
        }
        if types > u8::MAX as usize {
            return Err(Error::validation("m", None, format!("at most {} mask types supported", u8::MAX)));
        }
        for (i, &p) in prevalence.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::validation("m", Some(i), format!("prevalence must be > 0, got {p}")));
            }
        }
        let total: f64 = prevalence.iter().sum();
        if (total - 1.0).abs() > PREVALENCE_TOLERANCE {
            return Err(Error::validation("m", None, format!("prevalences sum to {total}, not 1")));
        }
        for (idx, &v) in t.iter().enumerate() {
            let ok = match positivity {
                Positivity::Strict => v > 0.0 && v <= 1.0,
                Positivity::Permissive => (0.0..=1.0).contains(&v),
            };
            if !ok {
                let reason = match positivity {
                    Positivity::Strict => format!("entry ({}, {}) = {v} outside (0, 1]", idx / types, idx % types),
                    Positivity::Permissive => format!("entry ({}, {}) = {v} outside [0, 1]", idx / types, idx % types),
                };
                return Err(Error::validation("t_matrix", Some(idx), reason));
            }
        }
        let labels = match labels {
            Some(l) => {
                check_len("labels", l.len(), types)?;
                l
            }
            None => (1..=types).map(|i| format!("type-{i}")).collect(),
        };
        Ok(MaskEnsemble {
            prevalence: prevalence.iter().map(|p| p / total).collect(),
            transmissibility: t,
            labels,
            efficiencies: None,
            positivity,
        })
    }

    pub fn num_types(&self) -> usize {
        self.prevalence.len()
    }

    pub fn prevalence(&self) -> &[f64] {
        &self.prevalence
    }

    /// `T_ij`: probability a type-`i` infective eventually infects a type-`j` neighbour.
    #[inline]
    pub fn t(&self, i: usize, j: usize) -> f64 {
        self.transmissibility[i * self.num_types() + j]
    }

    /// Row-major `M x M` transmissibility matrix.
    pub fn t_flat(&self) -> &[f64] {
        &self.transmissibility
    }

    pub fn t_matrix(&self) -> Vec<Vec<f64>> {
        self.transmissibility.chunks(self.num_types()).map(<[f64]>::to_vec).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn efficiencies(&self) -> Option<&Efficiencies> {
        self.efficiencies.as_ref()
    }

    pub fn is_rank_one(&self) -> bool {
        self.efficiencies.is_some()
    }

    pub fn positivity(&self) -> Positivity {
        self.positivity
    }

    /// True when some `T_ij == 0`, which breaks positive regularity.
    pub fn has_zero_transmissibility(&self) -> bool {
        self.transmissibility.contains(&0.0)
    }

    /// `T · diag(m)`, row-major.
    pub fn tm_matrix(&self) -> Vec<f64> {
        let n = self.num_types();
        (0..n * n).map(|idx| self.transmissibility[idx] * self.prevalence[idx % n]).collect()
    }

    /// `Tᵀ · diag(m)`, row-major.
    pub fn ttm_matrix(&self) -> Vec<f64> {
        let n = self.num_types();
        (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                self.t(j, i) * self.prevalence[j]
            })
            .collect()
    }

    /// Reorders types so that new type `k` is old type `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.num_types();
        let mut check = order.to_vec();
        check.sort_unstable();
        if check != (0..n).collect::<Vec<_>>() {
            return Err(Error::validation("permutation", None, "not a permutation of the type indices"));
        }
        let prevalence: Vec<f64> = order.iter().map(|&o| self.prevalence[o]).collect();
        let labels = Some(order.iter().map(|&o| self.labels[o].clone()).collect());
        match &self.efficiencies {
            Some(e) => Self::from_efficiencies_with(
                &order.iter().map(|&o| e.eps_in[o]).collect::<Vec<_>>(),
                &order.iter().map(|&o| e.eps_out[o]).collect::<Vec<_>>(),
                e.baseline_t,
                &prevalence,
                labels,
                self.positivity,
            ),
            None => {
                let rows: Vec<Vec<f64>> = order
                    .iter()
                    .map(|&oi| order.iter().map(|&oj| self.t(oi, oj)).collect())
                    .collect();
                Self::from_matrix_with(&rows, &prevalence, labels, self.positivity)
            }
        }
    }
}

fn check_len(field: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::validation(field, None, format!("has {got} entries, expected {want}")));
    }
    Ok(())
}

fn check_unit_vec(field: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(i) => Err(Error::validation(field, Some(i), format!("{} outside [0, 1]", v[i]))),
        None => Ok(()),
    }
}

/// Config-file form of a mask ensemble: `m` plus exactly one of
/// (`eps_in`, `eps_out`, `baseline_T`) or `t_matrix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_in: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_out: Option<Vec<f64>>,
    #[serde(default, rename = "baseline_T", skip_serializing_if = "Option::is_none")]
    pub baseline_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub permissive: bool,
}

impl MaskSpec {
    pub fn build(&self) -> Result<MaskEnsemble> {
        let positivity = if self.permissive { Positivity::Permissive } else { Positivity::Strict };
        let eff = (&self.eps_in, &self.eps_out, self.baseline_t);
        match (eff, &self.t_matrix) {
            ((Some(ein), Some(eout), Some(t)), None) => {
                MaskEnsemble::from_efficiencies_with(ein, eout, t, &self.m, self.labels.clone(), positivity)
            }
            ((None, None, None), Some(rows)) => MaskEnsemble::from_matrix_with(rows, &self.m, self.labels.clone(), positivity),
            ((None, None, None), None) => Err(Error::Config(
                "masks: give either eps_in/eps_out/baseline_T or t_matrix".into(),
            )),
            (_, Some(_)) => Err(Error::Config("masks: eps_in/eps_out/baseline_T and t_matrix are mutually exclusive".into())),
            _ => Err(Error::Config("masks: eps_in, eps_out and baseline_T must all be given together".into())),
        }
    }
}
