//! Sweep runner: one CSV row per sweep point with analytic and Monte Carlo columns.
//!
//! Column order is fixed by the config: the sweep value, then analytic
//! columns (unless `sim_only`), then empirical columns (unless
//! `analytic_only`), then run metadata. Floats use 9 significant digits and
//! missing values are written as `NA`. Every sweep point reuses the master
//! seed, so points share common random numbers.

use std::io::Write;

use log::info;

use crate::analytic::{summarize, AnalyticSummary};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::sim::{monte_carlo_policies, Estimate, SeedPolicy, TrialAggregate};

/// First field of the row written when a run aborts part way.
pub const TRUNCATION_MARKER: &str = "#TRUNCATED";

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        "NA".to_string()
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "NA".into())
}

fn column_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Empirical results at one sweep point, one aggregate per seed policy.
#[derive(Debug, Clone)]
pub struct EmpiricalPoint {
    pub by_policy: Vec<(SeedPolicy, TrialAggregate)>,
    /// All policies' trials pooled; used for ES columns.
    pub pooled: TrialAggregate,
}

impl EmpiricalPoint {
    /// PE for seeds of type `i`: the fixed-type run when one exists, else the
    /// breakdown of uniformly seeded trials.
    pub fn pe_for_type(&self, i: usize) -> Option<Estimate> {
        self.by_policy
            .iter()
            .find(|(p, _)| *p == SeedPolicy::FixedType(i))
            .or_else(|| self.by_policy.iter().find(|(p, _)| *p == SeedPolicy::UniformNode))
            .and_then(|(_, agg)| agg.empirical_pe_by_seed_type[i])
    }

    pub fn pe_random(&self) -> Option<Estimate> {
        self.by_policy
            .iter()
            .find(|(p, _)| *p == SeedPolicy::UniformNode)
            .map(|(_, agg)| agg.empirical_pe_random)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub analytic: Option<AnalyticSummary>,
    pub empirical: Option<EmpiricalPoint>,
}

pub fn header(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let labels: Vec<String> = cfg.labels()?.iter().map(|l| column_label(l)).collect();
    let mut h = vec!["parameter".to_string(), "value".to_string()];
    if !cfg.flags.sim_only {
        h.push("r0".into());
        h.push("pe_random".into());
        h.extend(labels.iter().map(|l| format!("pe_{l}")));
        h.push("es_total".into());
        h.extend(labels.iter().map(|l| format!("es_{l}")));
        h.extend(labels.iter().map(|l| format!("indiv_{l}")));
        if cfg.flags.verbose {
            h.extend(["extinction_iterations", "extinction_residual", "size_iterations", "size_residual"].map(String::from));
        }
    }
    if !cfg.flags.analytic_only {
        for name in std::iter::once("random".to_string()).chain(labels.iter().cloned()) {
            h.push(format!("sim_pe_{name}"));
            h.push(format!("sim_pe_{name}_se"));
        }
        h.push("sim_es_total".into());
        h.push("sim_es_total_se".into());
        for prefix in ["sim_es", "sim_indiv"] {
            for l in &labels {
                h.push(format!("{prefix}_{l}"));
                h.push(format!("{prefix}_{l}_se"));
            }
        }
        h.extend(["sim_n_emerged", "sim_trials", "sim_redraws", "master_seed", "trials", "n_nodes"].map(String::from));
    }
    Ok(h)
}

pub fn row_fields(cfg: &ExperimentConfig, row: &SweepRow) -> Vec<String> {
    let mut f = vec![cfg.sweep.parameter.name().to_string(), format_float(row.value)];
    if let Some(a) = &row.analytic {
        f.push(format_float(a.r0));
        f.push(format_float(a.pe_random_seed));
        f.extend(a.pe_by_seed_type.iter().map(|&v| format_float(v)));
        f.push(format_float(a.total_epidemic_size));
        f.extend(a.epidemic_size_by_type.iter().map(|&v| format_float(v)));
        f.extend(a.individual_infection_prob.iter().map(|&v| format_float(v)));
        if cfg.flags.verbose {
            let d = &a.diagnostics;
            f.push(d.extinction_iterations.to_string());
            f.push(format_float(d.extinction_residual));
            f.push(d.size_iterations.to_string());
            f.push(format_float(d.size_residual));
        }
    }
    if let Some(e) = &row.empirical {
        let est = |e: Option<Estimate>| [format_opt(e.map(|x| x.mean)), format_opt(e.map(|x| x.se))];
        let types = e.pooled.num_types();
        f.extend(est(e.pe_random()));
        for i in 0..types {
            f.extend(est(e.pe_for_type(i)));
        }
        f.extend(est(e.pooled.mean_total_es_given_emergence));
        for per_type in [&e.pooled.mean_es_by_type_given_emergence, &e.pooled.individual_infection_prob] {
            for i in 0..types {
                f.extend(est(per_type.as_ref().map(|v| v[i])));
            }
        }
        f.push(e.pooled.n_emerged.to_string());
        f.push(e.pooled.trials.to_string());
        f.push(e.pooled.seed_redraws.to_string());
        f.push(cfg.simulation.master_seed.to_string());
        f.push(cfg.simulation.trials.to_string());
        f.push(cfg.simulation.n_nodes.to_string());
    }
    f
}

/// Computes one sweep point.
pub fn run_point(cfg: &ExperimentConfig, value: f64) -> Result<SweepRow> {
    let (model, ens) = cfg.point(value)?;
    let analytic = if cfg.flags.sim_only {
        None
    } else {
        Some(summarize(&ens, &model, &cfg.solver.options())?)
    };
    let empirical = if cfg.flags.analytic_only {
        None
    } else {
        let policies = cfg.simulation.policies(ens.labels())?;
        let aggs = monte_carlo_policies(&model, &ens, &cfg.simulation.monte_carlo(policies[0])?, &policies)?;
        let by_policy: Vec<_> = policies.into_iter().zip(aggs).collect();
        let pooled = TrialAggregate::pooled(by_policy.iter().map(|(_, a)| a)).expect("at least one policy");
        Some(EmpiricalPoint { by_policy, pooled })
    };
    Ok(SweepRow { value, analytic, empirical })
}

/// Runs the whole sweep, writing CSV to `out` row by row. On failure a
/// truncation marker row naming the error is written and flushed before the
/// error is returned.
pub fn run_experiment<W: Write>(cfg: &ExperimentConfig, mut out: W) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    writeln!(out, "{}", header(cfg)?.join(","))?;
    let mut rows = Vec::new();
    for value in cfg.sweep.points()? {
        match run_point(cfg, value) {
            Ok(row) => {
                writeln!(out, "{}", row_fields(cfg, &row).join(","))?;
                out.flush()?;
                info!("{}", console_line(cfg, &row));
                rows.push(row);
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                writeln!(out, "{TRUNCATION_MARKER},{msg}")?;
                out.flush()?;
                return Err(e);
            }
        }
    }
    Ok(rows)
}

/// Short human-readable summary of a row.
pub fn console_line(cfg: &ExperimentConfig, row: &SweepRow) -> String {
    let mut s = format!("{} = {:<8}", cfg.sweep.parameter.name(), row.value);
    if let Some(a) = &row.analytic {
        s += &format!(" R0 = {:.4}  PE(random) = {:.4}  ES = {:.4}", a.r0, a.pe_random_seed, a.total_epidemic_size);
    }
    if let Some(e) = &row.empirical {
        let pe = e.pe_random().map(|x| format!("{:.4}", x.mean)).unwrap_or_else(|| "NA".into());
        let es = e.pooled.mean_total_es_given_emergence.map(|x| format!("{:.4}", x.mean)).unwrap_or_else(|| "NA".into());
        s += &format!("  | sim PE(random) = {pe}  ES = {es}  ({} / {} emerged)", e.pooled.n_emerged, e.pooled.trials);
    }
    s
}

impl Error {
    /// Process exit code: 1 config, 2 solver non-convergence, 3 simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 2,
            Error::TypeMismatch { .. } | Error::SeedExhausted { .. } | Error::OracleTooLarge { .. } => 3,
            _ => 1,
        }
    }
}
