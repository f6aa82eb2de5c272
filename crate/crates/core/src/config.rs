//! Experiment configuration files and the built-in figure presets.
//!
//! Configs are TOML:
//!
//! ```toml
//! name = "fig2"
//! degree = { kind = "poisson", mean = 5.0 }
//!
//! [masks]
//! m = [0.3, 0.6, 0.1]
//! eps_in = [0.2, 0.5, 1.0]
//! eps_out = [0.3, 0.5, 1.0]
//! baseline_T = 0.6
//! labels = ["surgical", "cloth", "no-mask"]
//!
//! [sweep]
//! parameter = "mean_degree"
//! start = 1.0
//! stop = 10.0
//! step = 1.0
//!
//! [simulation]
//! n_nodes = 100000
//! trials = 1000
//! master_seed = 1
//! seed_policies = ["surgical", "cloth", "no-mask", "random"]
//! ```

use log::warn;
use serde::{Deserialize, Serialize};

use crate::analytic::SolverOptions;
use crate::degree::{DegreeModel, DegreeSpec};
use crate::ensemble::{MaskEnsemble, MaskSpec};
use crate::error::{Error, Result};
use crate::sim::{EmergenceThreshold, MonteCarloConfig, SeedPolicy};

/// Prevalences driven to zero by a sweep are raised to this floor.
pub const PREVALENCE_FLOOR: f64 = 1e-9;

pub const PAPER_NODES: usize = 1_000_000;
pub const PAPER_TRIALS: usize = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub flags: Flags,
    pub degree: DegreeSpec,
    pub masks: MaskSpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default)]
    pub analytic_only: bool,
    #[serde(default)]
    pub sim_only: bool,
    /// Adds solver iteration counts and residuals to the CSV.
    #[serde(default)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "mean_degree")]
    MeanDegree,
    #[serde(rename = "baseline_T")]
    BaselineT,
    /// Share `v` of the mask wearers using type 1: `m = [v(1-x), (1-v)(1-x), x]`
    /// with `x` the last prevalence of the base config (`m = [v, 1-v]` for two types).
    #[serde(rename = "mask_fraction")]
    MaskFraction,
    /// Prevalence of the last type; the others keep their base proportions.
    #[serde(rename = "no_mask_fraction")]
    NoMaskFraction,
    /// Prevalence of type 2 at fixed last prevalence `x`: `m = [1-x-v, v, x]`.
    #[serde(rename = "inout_split")]
    InoutSplit,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::MeanDegree => "mean_degree",
            SweepParameter::BaselineT => "baseline_T",
            SweepParameter::MaskFraction => "mask_fraction",
            SweepParameter::NoMaskFraction => "no_mask_fraction",
            SweepParameter::InoutSplit => "inout_split",
        }
    }
}

/// Either an explicit `values` list or `start`/`stop`/`step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl SweepSpec {
    pub fn range(parameter: SweepParameter, start: f64, stop: f64, step: f64) -> Self {
        SweepSpec { parameter, values: None, start: Some(start), stop: Some(stop), step: Some(step) }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(start), Some(stop), Some(step)) => {
                if step.is_nan() || step <= 0.0 || stop < start {
                    return Err(Error::Config(format!("sweep: bad range {start}..={stop} step {step}")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|k| round12(start + k as f64 * step)).collect())
            }
            _ => Err(Error::Config("sweep: give a non-empty `values` list or all of `start`, `stop`, `step`".into())),
        }
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Fraction,
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub n_nodes: usize,
    pub trials: usize,
    pub emergence_threshold: f64,
    pub threshold_mode: ThresholdMode,
    pub master_seed: u64,
    /// `"random"`, a type label, or a 1-based type index.
    pub seed_policies: Vec<String>,
    pub regenerate_network: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            n_nodes: 100_000,
            trials: 1_000,
            emergence_threshold: 0.05,
            threshold_mode: ThresholdMode::Fraction,
            master_seed: 1,
            seed_policies: vec!["random".into()],
            regenerate_network: true,
        }
    }
}

impl SimulationSpec {
    pub fn threshold(&self) -> Result<EmergenceThreshold> {
        match self.threshold_mode {
            ThresholdMode::Fraction => Ok(EmergenceThreshold::Fraction(self.emergence_threshold)),
            ThresholdMode::Count => {
                let c = self.emergence_threshold;
                if c < 1.0 || c.fract() != 0.0 {
                    return Err(Error::Config(format!("simulation.emergence_threshold: count mode needs a positive integer, got {c}")));
                }
                Ok(EmergenceThreshold::Count(c as usize))
            }
        }
    }

    pub fn policies(&self, labels: &[String]) -> Result<Vec<SeedPolicy>> {
        if self.seed_policies.is_empty() {
            return Err(Error::Config("simulation.seed_policies is empty".into()));
        }
        self.seed_policies.iter().map(|p| parse_policy(p, labels)).collect()
    }

    pub fn monte_carlo(&self, policy: SeedPolicy) -> Result<MonteCarloConfig> {
        Ok(MonteCarloConfig {
            n_nodes: self.n_nodes,
            trials: self.trials,
            seed_policy: policy,
            threshold: self.threshold()?,
            master_seed: self.master_seed,
            regenerate_network: self.regenerate_network,
        })
    }
}

fn parse_policy(s: &str, labels: &[String]) -> Result<SeedPolicy> {
    if s == "random" {
        return Ok(SeedPolicy::UniformNode);
    }
    if let Some(i) = labels.iter().position(|l| l == s) {
        return Ok(SeedPolicy::FixedType(i));
    }
    match s.parse::<usize>() {
        Ok(k) if (1..=labels.len()).contains(&k) => Ok(SeedPolicy::FixedType(k - 1)),
        _ => Err(Error::Config(format!("simulation.seed_policies: unknown policy {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSpec { tol: d.tol, max_iter: d.max_iter, theta: None }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_iter: self.max_iter, theta: self.theta.clone(), ..Default::default() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything that can be checked without running: both engines'
    /// inputs are built for every sweep point.
    pub fn validate(&self) -> Result<()> {
        if self.flags.analytic_only && self.flags.sim_only {
            return Err(Error::Config("flags: analytic_only and sim_only are mutually exclusive".into()));
        }
        let base = self.masks.build()?;
        self.degree.build()?;
        for v in self.sweep.points()? {
            self.point(v)?;
        }
        if !self.flags.analytic_only {
            if self.simulation.trials == 0 {
                return Err(Error::Config("simulation.trials must be at least 1".into()));
            }
            if self.simulation.n_nodes < 2 {
                return Err(Error::Config("simulation.n_nodes must be at least 2".into()));
            }
            self.simulation.threshold()?;
            self.simulation.policies(base.labels())?;
        }
        Ok(())
    }

    pub fn labels(&self) -> Result<Vec<String>> {
        Ok(self.masks.build()?.labels().to_vec())
    }

    /// Degree model and ensemble at sweep value `v`.
    pub fn point(&self, v: f64) -> Result<(DegreeModel, MaskEnsemble)> {
        let mut degree = self.degree.clone();
        let mut masks = self.masks.clone();
        let types = masks.m.len();
        let param = self.sweep.parameter.name();
        let in_unit = |v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("sweep {param}: value {v} outside [0, 1]")))
            }
        };
        match self.sweep.parameter {
            SweepParameter::MeanDegree => match &mut degree {
                DegreeSpec::Poisson { mean } => *mean = v,
                DegreeSpec::Empirical { .. } => {
                    return Err(Error::Config("sweep mean_degree needs a Poisson degree model".into()));
                }
            },
            SweepParameter::BaselineT => {
                if masks.baseline_t.is_none() {
                    return Err(Error::Config("sweep baseline_T needs masks given by efficiencies".into()));
                }
                masks.baseline_t = Some(v);
            }
            SweepParameter::MaskFraction => {
                in_unit(v)?;
                masks.m = match types {
                    2 => vec![v, 1.0 - v],
                    3 => {
                        let x = masks.m[2];
                        vec![v * (1.0 - x), (1.0 - v) * (1.0 - x), x]
                    }
                    _ => return Err(Error::Config(format!("sweep mask_fraction needs 2 or 3 types, got {types}"))),
                };
            }
            SweepParameter::NoMaskFraction => {
                in_unit(v)?;
                if types < 2 {
                    return Err(Error::Config("sweep no_mask_fraction needs at least 2 types".into()));
                }
                let rest: f64 = masks.m[..types - 1].iter().sum();
                let mut m: Vec<f64> = masks.m[..types - 1].iter().map(|p| p / rest * (1.0 - v)).collect();
                m.push(v);
                masks.m = m;
            }
            SweepParameter::InoutSplit => {
                in_unit(v)?;
                if types != 3 {
                    return Err(Error::Config(format!("sweep inout_split needs 3 types, got {types}")));
                }
                let x = masks.m[2];
                masks.m = vec![1.0 - x - v, v, x];
            }
        }
        masks.m = floor_prevalence(&masks.m, param, v)?;
        Ok((degree.build()?, masks.build()?))
    }
}

/// Raises entries below [`PREVALENCE_FLOOR`] to the floor and takes the excess
/// from the largest entry so the vector still sums to one.
fn floor_prevalence(m: &[f64], param: &str, v: f64) -> Result<Vec<f64>> {
    if m.iter().any(|p| *p < -1e-12) {
        return Err(Error::Config(format!("sweep {param} = {v} gives a negative prevalence {m:?}")));
    }
    let mut out: Vec<f64> = m.to_vec();
    let mut raised = 0.0;
    for p in out.iter_mut() {
        if *p < PREVALENCE_FLOOR {
            warn!("sweep {param} = {v}: prevalence {p} raised to {PREVALENCE_FLOOR}");
            raised += PREVALENCE_FLOOR - *p;
            *p = PREVALENCE_FLOOR;
        }
    }
    let (imax, _) = out.iter().enumerate().fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
    out[imax] -= raised;
    Ok(out)
}

const MASK_EPS_IN: [f64; 3] = [0.2, 0.5, 1.0];
const MASK_EPS_OUT: [f64; 3] = [0.3, 0.5, 1.0];

fn labels(names: &[&str]) -> Option<Vec<String>> {
    Some(names.iter().map(|s| s.to_string()).collect())
}

fn preset_config(name: &str, mean: f64, masks: MaskSpec, sweep: SweepSpec, policies: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        output: Some(format!("{name}.csv")),
        flags: Flags::default(),
        degree: DegreeSpec::Poisson { mean },
        masks,
        sweep,
        simulation: SimulationSpec {
            seed_policies: policies.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        },
        solver: SolverSpec::default(),
    }
}

fn three_type_masks(m: Vec<f64>, eps_in: [f64; 3], eps_out: [f64; 3], names: &[&str]) -> MaskSpec {
    MaskSpec {
        m,
        eps_in: Some(eps_in.to_vec()),
        eps_out: Some(eps_out.to_vec()),
        baseline_t: Some(0.6),
        labels: labels(names),
        ..Default::default()
    }
}

const FIG4_MEANS: [u32; 4] = [8, 10, 15, 20];
const FIG56_X: [u32; 3] = [10, 20, 40];

/// Names of the built-in presets.
pub fn list_presets() -> Vec<String> {
    let mut names = vec!["fig2".to_string(), "fig3".to_string()];
    names.extend(FIG4_MEANS.iter().map(|md| format!("fig4-md{md}")));
    names.extend(FIG56_X.iter().map(|x| format!("fig5-x{x}")));
    names.extend(FIG56_X.iter().map(|x| format!("fig6-x{x}")));
    names
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mask_labels = ["surgical", "cloth", "no-mask"];
    let all_seeds = ["surgical", "cloth", "no-mask", "random"];
    if name == "fig2" {
        let masks = three_type_masks(vec![0.3, 0.6, 0.1], MASK_EPS_IN, MASK_EPS_OUT, &mask_labels);
        return Some(preset_config(name, 5.0, masks, SweepSpec::range(SweepParameter::MeanDegree, 1.0, 10.0, 1.0), &all_seeds));
    }
    if name == "fig3" {
        let masks = three_type_masks(vec![0.3, 0.6, 0.1], MASK_EPS_IN, MASK_EPS_OUT, &mask_labels);
        return Some(preset_config(name, 5.0, masks, SweepSpec::range(SweepParameter::BaselineT, 0.1, 0.9, 0.1), &all_seeds));
    }
    if let Some(md) = name.strip_prefix("fig4-md").and_then(|s| s.parse::<u32>().ok()).filter(|md| FIG4_MEANS.contains(md)) {
        let masks = MaskSpec {
            m: vec![0.5, 0.5],
            eps_in: Some(vec![0.2, 0.5]),
            eps_out: Some(vec![0.3, 0.5]),
            baseline_t: Some(0.6),
            labels: labels(&["surgical", "cloth"]),
            ..Default::default()
        };
        let sweep = SweepSpec::range(SweepParameter::MaskFraction, 0.1, 0.9, 0.1);
        return Some(preset_config(name, md as f64, masks, sweep, &["surgical", "cloth", "random"]));
    }
    let fixed_x = |prefix: &str| {
        name.strip_prefix(prefix)
            .and_then(|s| s.parse::<u32>().ok())
            .filter(|x| FIG56_X.contains(x))
            .map(|x| x as f64 / 100.0)
    };
    if let Some(x) = fixed_x("fig5-x") {
        let masks = three_type_masks(vec![(1.0 - x) / 2.0, (1.0 - x) / 2.0, x], MASK_EPS_IN, MASK_EPS_OUT, &mask_labels);
        let sweep = SweepSpec::range(SweepParameter::MaskFraction, 0.1, 0.9, 0.1);
        return Some(preset_config(name, 10.0, masks, sweep, &all_seeds));
    }
    if let Some(x) = fixed_x("fig6-x") {
        let names = ["inward-good", "outward-good", "no-mask"];
        let masks = three_type_masks(vec![(1.0 - x) / 2.0, (1.0 - x) / 2.0, x], [0.3, 0.7, 1.0], [0.7, 0.3, 1.0], &names);
        let sweep = SweepSpec::range(SweepParameter::InoutSplit, 0.1, round12(0.9 - x), 0.1);
        return Some(preset_config(name, 10.0, masks, sweep, &["inward-good", "outward-good", "no-mask", "random"]));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_are_listed_and_valid() {
        let names = list_presets();
        assert!(names.contains(&"fig2".to_string()));
        assert_eq!(names.len(), 12);
        for n in &names {
            let cfg = preset(n).unwrap_or_else(|| panic!("missing preset {n}"));
            cfg.validate().unwrap();
            assert_eq!(&cfg.name, n);
        }
        assert!(preset("fig4-md9").is_none());
        assert!(preset("nope").is_none());
    }

    #[test]
    fn preset_round_trip() {
        for n in list_presets() {
            let cfg = preset(&n).unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn fig3_encodes_transmissibility_sweep() {
        let cfg = preset("fig3").unwrap();
        assert_eq!(cfg.degree, DegreeSpec::Poisson { mean: 5.0 });
        assert_eq!(cfg.sweep.parameter, SweepParameter::BaselineT);
        let pts = cfg.sweep.points().unwrap();
        assert_eq!(pts, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
    }

    #[test]
    fn fig5_encodes_unmasked_share() {
        let cfg = preset("fig5-x10").unwrap();
        assert_eq!(cfg.degree, DegreeSpec::Poisson { mean: 10.0 });
        for v in cfg.sweep.points().unwrap() {
            let (_, ens) = cfg.point(v).unwrap();
            let m = ens.prevalence();
            assert_abs_diff_eq!(m[2], 0.1, epsilon = 1e-15);
            assert_abs_diff_eq!(m[0] + m[1], 0.9, epsilon = 1e-12);
            assert_abs_diff_eq!(m[0], v * 0.9, epsilon = 1e-12);
        }
    }

    #[test]
    fn mask_fraction_two_types() {
        let cfg = preset("fig4-md10").unwrap();
        let (model, ens) = cfg.point(0.3).unwrap();
        assert_eq!(model.mean_degree(), 10.0);
        assert_abs_diff_eq!(ens.prevalence()[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(ens.prevalence()[1], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn inout_split_floors_vanishing_type() {
        let cfg = preset("fig6-x10").unwrap();
        let pts = cfg.sweep.points().unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(*pts.last().unwrap(), 0.8);
        // off-grid value that empties the first type
        let (_, ens) = cfg.point(0.9).unwrap();
        assert_eq!(ens.prevalence()[0], PREVALENCE_FLOOR);
        assert_abs_diff_eq!(ens.prevalence().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let (_, ens) = cfg.point(0.3).unwrap();
        assert_abs_diff_eq!(ens.prevalence()[0], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn no_mask_fraction_keeps_ratio() {
        let mut cfg = preset("fig2").unwrap();
        cfg.sweep = SweepSpec { parameter: SweepParameter::NoMaskFraction, values: Some(vec![0.4]), start: None, stop: None, step: None };
        let (_, ens) = cfg.point(0.4).unwrap();
        let m = ens.prevalence();
        assert_abs_diff_eq!(m[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(m[2], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn parse_errors_are_config_errors() {
        assert!(matches!(ExperimentConfig::from_toml("name = 3"), Err(Error::Config(_))));
        let mut cfg = preset("fig2").unwrap();
        cfg.masks.t_matrix = Some(vec![vec![0.5; 3]; 3]);
        assert!(matches!(ExperimentConfig::from_toml(&cfg.to_toml()), Err(Error::Config(_))));
        let mut cfg = preset("fig2").unwrap();
        cfg.simulation.seed_policies = vec!["hazmat".into()];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = preset("fig2").unwrap();
        cfg.degree = DegreeSpec::Empirical { degrees: vec![3], probabilities: vec![1.0] };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let text = preset("fig2").unwrap().to_toml().replace("trials = 1000", "trials = 1000\nbogus = 1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn policies_parse() {
        let labels: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let spec = SimulationSpec { seed_policies: vec!["random".into(), "b".into(), "1".into()], ..Default::default() };
        assert_eq!(spec.policies(&labels).unwrap(), vec![SeedPolicy::UniformNode, SeedPolicy::FixedType(1), SeedPolicy::FixedType(0)]);
        let count = SimulationSpec { threshold_mode: ThresholdMode::Count, emergence_threshold: 500.0, ..Default::default() };
        assert_eq!(count.threshold().unwrap(), EmergenceThreshold::Count(500));
    }

    #[test]
    fn hand_written_config_parses() {
        let text = r#"
name = "custom"
degree = { kind = "empirical", degrees = [1, 3], probabilities = [0.5, 0.5] }
masks = { m = [0.5, 0.5], t_matrix = [[0.9, 0.1], [0.1, 0.9]] }
[sweep]
parameter = "mask_fraction"
values = [0.2, 0.8]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.simulation, SimulationSpec::default());
        let (model, _) = cfg.point(0.2).unwrap();
        assert_eq!(model.moments(), (2.0, 5.0));
    }
}
