//! Stochastic SIR spread on contact networks and Monte Carlo aggregation.
//!
//! Each infected node makes one independent Bernoulli(`T_ij`) attempt along
//! every incident edge copy towards a susceptible neighbour. The two
//! directions of an edge are independent. Self-loops are skipped.

use std::collections::BTreeMap;

use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;

use crate::degree::DegreeModel;
use crate::ensemble::MaskEnsemble;
use crate::error::{Error, Result};
use crate::netgen::ContactNetwork;
use crate::rng::{substream, Purpose, SHARED_TRIAL};

/// Maximum number of network redraws when looking for a seed of a given type.
pub const MAX_SEED_REDRAWS: usize = 100;
/// Upper limit on enumerated directed draws in [`exhaustive_oracle`].
pub const ORACLE_MAX_DRAWS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmergenceThreshold {
    /// Final infected fraction of all nodes.
    Fraction(f64),
    /// Final infected count.
    Count(usize),
}

impl EmergenceThreshold {
    pub fn emerged(&self, infected: usize, n_nodes: usize) -> bool {
        match *self {
            EmergenceThreshold::Fraction(f) => infected as f64 / n_nodes as f64 >= f,
            EmergenceThreshold::Count(c) => infected >= c,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            EmergenceThreshold::Fraction(f) if !(f > 0.0 && f < 1.0) => {
                Err(Error::Config(format!("emergence threshold fraction {f} outside (0, 1)")))
            }
            EmergenceThreshold::Count(0) => Err(Error::Config("emergence threshold count must be positive".into())),
            _ => Ok(()),
        }
    }
}

impl Default for EmergenceThreshold {
    fn default() -> Self {
        EmergenceThreshold::Fraction(0.05)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutbreakResult {
    pub seed_node: usize,
    pub seed_type: usize,
    pub infected_count_by_type: Vec<usize>,
    pub total_infected: usize,
    pub emerged: bool,
    /// Trial index the outbreak's random streams were derived from.
    pub trial_seed: u64,
}

fn check_types(network: &ContactNetwork, ens: &MaskEnsemble) -> Result<()> {
    if network.num_types() != ens.num_types() {
        return Err(Error::TypeMismatch {
            network: network.num_types(),
            ensemble: ens.num_types(),
        });
    }
    Ok(())
}

/// Breadth-first spread from `seed_node`. Returns infected nodes in infection order.
pub fn spread<R: Rng + ?Sized>(network: &ContactNetwork, ens: &MaskEnsemble, seed_node: usize, rng: &mut R) -> Result<Vec<u32>> {
    check_types(network, ens)?;
    if seed_node >= network.num_nodes() {
        return Err(Error::Domain(format!("seed node {seed_node} out of range for {} nodes", network.num_nodes())));
    }
    let mut infected = vec![false; network.num_nodes()];
    let mut order = Vec::new();
    infected[seed_node] = true;
    order.push(seed_node as u32);
    let mut head = 0;
    while head < order.len() {
        let u = order[head] as usize;
        head += 1;
        let tu = network.node_type(u);
        for &v in network.neighbors(u) {
            let v = v as usize;
            if v == u || infected[v] {
                continue;
            }
            if rng.random::<f64>() < ens.t(tu, network.node_type(v)) {
                infected[v] = true;
                order.push(v as u32);
            }
        }
    }
    Ok(order)
}

pub fn run_outbreak<R: Rng + ?Sized>(
    network: &ContactNetwork,
    ens: &MaskEnsemble,
    seed_node: usize,
    rng: &mut R,
    threshold: EmergenceThreshold,
) -> Result<OutbreakResult> {
    let order = spread(network, ens, seed_node, rng)?;
    let mut by_type = vec![0; ens.num_types()];
    for &v in &order {
        by_type[network.node_type(v as usize)] += 1;
    }
    Ok(OutbreakResult {
        seed_node,
        seed_type: network.node_type(seed_node),
        infected_count_by_type: by_type,
        total_infected: order.len(),
        emerged: threshold.emerged(order.len(), network.num_nodes()),
        trial_seed: 0,
    })
}

/// Exact distribution of the final infected set, by enumerating every outcome
/// of every directed transmission draw. Sets are sorted node lists.
pub fn exhaustive_oracle(network: &ContactNetwork, ens: &MaskEnsemble, seed_node: usize) -> Result<BTreeMap<Vec<u32>, f64>> {
    check_types(network, ens)?;
    let n = network.num_nodes();
    if n > 64 {
        return Err(Error::Domain(format!("exhaustive oracle supports at most 64 nodes, got {n}")));
    }
    if seed_node >= n {
        return Err(Error::Domain(format!("seed node {seed_node} out of range for {n} nodes")));
    }
    let draws: Vec<(usize, usize, f64)> = network
        .edges()
        .filter(|(u, v)| u != v)
        .flat_map(|(u, v)| [(u as usize, v as usize), (v as usize, u as usize)])
        .map(|(a, b)| (a, b, ens.t(network.node_type(a), network.node_type(b))))
        .collect();
    if draws.len() > ORACLE_MAX_DRAWS {
        return Err(Error::OracleTooLarge { draws: draws.len(), limit: ORACLE_MAX_DRAWS });
    }
    let mut dist: BTreeMap<u64, f64> = BTreeMap::new();
    for outcome in 0u64..(1 << draws.len()) {
        let mut prob = 1.0;
        for (k, &(_, _, t)) in draws.iter().enumerate() {
            prob *= if outcome >> k & 1 == 1 { t } else { 1.0 - t };
        }
        if prob == 0.0 {
            continue;
        }
        let mut reached = 1u64 << seed_node;
        loop {
            let before = reached;
            for (k, &(a, b, _)) in draws.iter().enumerate() {
                if outcome >> k & 1 == 1 && reached >> a & 1 == 1 {
                    reached |= 1 << b;
                }
            }
            if reached == before {
                break;
            }
        }
        *dist.entry(reached).or_insert(0.0) += prob;
    }
    Ok(dist
        .into_iter()
        .map(|(mask, p)| ((0..n as u32).filter(|&i| mask >> i & 1 == 1).collect(), p))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Uniform node among those of the given (0-based) type.
    FixedType(usize),
    /// Uniform node; its type is then distributed per `m`.
    UniformNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub n_nodes: usize,
    pub trials: usize,
    pub seed_policy: SeedPolicy,
    pub threshold: EmergenceThreshold,
    pub master_seed: u64,
    /// Draw a fresh network for every trial. When false one network is shared.
    pub regenerate_network: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_nodes: 100_000,
            trials: 1_000,
            seed_policy: SeedPolicy::UniformNode,
            threshold: EmergenceThreshold::default(),
            master_seed: 1,
            regenerate_network: true,
        }
    }
}

/// One trial's raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub outbreak: OutbreakResult,
    /// Number of nodes of each type in the trial's network.
    pub type_counts: Vec<usize>,
    pub n_nodes: usize,
    pub redraws: usize,
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Binomial proportion `successes / trials`.
    fn proportion(successes: usize, trials: usize) -> Option<Self> {
        (trials > 0).then(|| {
            let p = successes as f64 / trials as f64;
            Estimate { mean: p, se: (p * (1.0 - p) / trials as f64).sqrt() }
        })
    }

    /// Sample mean and `s / sqrt(n)` with the `n - 1` sample variance; the
    /// error is NaN for a single sample.
    fn sample<I: Iterator<Item = f64> + Clone>(values: I) -> Option<Self> {
        let n = values.clone().count();
        if n == 0 {
            return None;
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Some(Estimate { mean, se })
    }
}

/// Monte Carlo estimates. ES entries are `None` when no trial emerged.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAggregate {
    pub trials: usize,
    pub n_emerged: usize,
    pub seed_redraws: usize,
    pub trials_by_seed_type: Vec<usize>,
    pub emerged_by_seed_type: Vec<usize>,
    /// Emergence frequency among trials whose seed had each type.
    pub empirical_pe_by_seed_type: Vec<Option<Estimate>>,
    /// Emergence frequency over all trials.
    pub empirical_pe_random: Estimate,
    /// Infected type-`i` nodes over all nodes, averaged over emerged trials.
    pub mean_es_by_type_given_emergence: Option<Vec<Estimate>>,
    pub mean_total_es_given_emergence: Option<Estimate>,
    /// Infected type-`i` nodes over type-`i` nodes, averaged over emerged trials.
    pub individual_infection_prob: Option<Vec<Estimate>>,
    records: Vec<TrialRecord>,
}

impl TrialAggregate {
    pub fn from_records(num_types: usize, records: Vec<TrialRecord>) -> Self {
        let trials = records.len();
        let mut by_seed = vec![0; num_types];
        let mut emerged_by_seed = vec![0; num_types];
        for r in &records {
            by_seed[r.outbreak.seed_type] += 1;
            emerged_by_seed[r.outbreak.seed_type] += r.outbreak.emerged as usize;
        }
        let emerged: Vec<&TrialRecord> = records.iter().filter(|r| r.outbreak.emerged).collect();
        let es_by_type = (!emerged.is_empty()).then(|| {
            (0..num_types)
                .map(|i| {
                    Estimate::sample(emerged.iter().map(move |r| r.outbreak.infected_count_by_type[i] as f64 / r.n_nodes as f64))
                        .expect("non-empty")
                })
                .collect()
        });
        let individual = (!emerged.is_empty()).then(|| {
            (0..num_types)
                .map(|i| {
                    let ratios = emerged
                        .iter()
                        .filter(move |r| r.type_counts[i] > 0)
                        .map(move |r| r.outbreak.infected_count_by_type[i] as f64 / r.type_counts[i] as f64);
                    Estimate::sample(ratios).unwrap_or(Estimate { mean: f64::NAN, se: f64::NAN })
                })
                .collect()
        });
        TrialAggregate {
            trials,
            n_emerged: emerged.len(),
            seed_redraws: records.iter().map(|r| r.redraws).sum(),
            empirical_pe_by_seed_type: by_seed
                .iter()
                .zip(&emerged_by_seed)
                .map(|(&t, &e)| Estimate::proportion(e, t))
                .collect(),
            empirical_pe_random: Estimate::proportion(emerged.len(), trials).unwrap_or(Estimate { mean: 0.0, se: 0.0 }),
            mean_es_by_type_given_emergence: es_by_type,
            mean_total_es_given_emergence: Estimate::sample(emerged.iter().map(|r| r.outbreak.total_infected as f64 / r.n_nodes as f64)),
            individual_infection_prob: individual,
            trials_by_seed_type: by_seed,
            emerged_by_seed_type: emerged_by_seed,
            records,
        }
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn num_types(&self) -> usize {
        self.trials_by_seed_type.len()
    }

    /// Pools the trials of several aggregates over the same ensemble.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a TrialAggregate>) -> Option<Self> {
        let parts: Vec<&TrialAggregate> = parts.into_iter().collect();
        let num_types = parts.first()?.num_types();
        Some(Self::from_records(num_types, parts.iter().flat_map(|p| p.records.iter().cloned()).collect()))
    }
}

/// Runs `config.trials` independent outbreaks on the current rayon pool.
///
/// Every trial derives its own streams from `(master_seed, trial index)` and
/// aggregation happens serially in trial order, so the result does not depend
/// on the number of threads.
pub fn monte_carlo(model: &DegreeModel, ens: &MaskEnsemble, config: &MonteCarloConfig) -> Result<TrialAggregate> {
    let mut aggs = monte_carlo_policies(model, ens, config, &[config.seed_policy])?;
    Ok(aggs.pop().expect("one policy"))
}

/// Like [`monte_carlo`] for several seed policies at once (`config.seed_policy`
/// is ignored). Trial `t` uses the same network under every policy, so each
/// network is generated once; results equal separate `monte_carlo` calls.
pub fn monte_carlo_policies(
    model: &DegreeModel,
    ens: &MaskEnsemble,
    config: &MonteCarloConfig,
    policies: &[SeedPolicy],
) -> Result<Vec<TrialAggregate>> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    config.threshold.validate()?;
    for policy in policies {
        if let SeedPolicy::FixedType(t) = *policy {
            if t >= ens.num_types() {
                return Err(Error::IndexOutOfRange { index: t, types: ens.num_types() });
            }
        }
    }
    let shared = if config.regenerate_network {
        None
    } else {
        Some(build_network(model, ens, config, SHARED_TRIAL, 0)?)
    };
    let per_trial = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let owned;
            let base = match &shared {
                Some(net) => net,
                None => {
                    owned = build_network(model, ens, config, trial, 0)?;
                    &owned
                }
            };
            policies
                .iter()
                .map(|&policy| run_trial(model, ens, config, policy, trial, base, shared.is_some()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_policy: Vec<Vec<TrialRecord>> = policies.iter().map(|_| Vec::with_capacity(config.trials)).collect();
    for records in per_trial {
        for (slot, record) in by_policy.iter_mut().zip(records) {
            slot.push(record);
        }
    }
    let aggs: Vec<TrialAggregate> = by_policy.into_iter().map(|r| TrialAggregate::from_records(ens.num_types(), r)).collect();
    for agg in &aggs {
        if agg.seed_redraws > 0 {
            warn!("{} network redraws were needed to find seeds of the requested type", agg.seed_redraws);
        }
    }
    Ok(aggs)
}

fn build_network(model: &DegreeModel, ens: &MaskEnsemble, config: &MonteCarloConfig, trial: u64, redraw: u8) -> Result<ContactNetwork> {
    let mut net = ContactNetwork::generate(model, config.n_nodes, &mut substream(config.master_seed, trial, redraw, Purpose::Network))?;
    net.assign_types(ens.prevalence(), &mut substream(config.master_seed, trial, redraw, Purpose::Types))?;
    Ok(net)
}

fn pick_seed<R: Rng>(net: &ContactNetwork, policy: SeedPolicy, rng: &mut R) -> Option<usize> {
    match policy {
        SeedPolicy::UniformNode => Some(rng.random_range(0..net.num_nodes())),
        SeedPolicy::FixedType(t) => {
            let count = net.node_types().iter().filter(|&&x| x as usize == t).count();
            if count == 0 {
                return None;
            }
            let k = rng.random_range(0..count);
            net.node_types().iter().enumerate().filter(|(_, &x)| x as usize == t).nth(k).map(|(i, _)| i)
        }
    }
}

/// One outbreak. `base` is the trial's first network draw; redraws (needed
/// only when a fixed seed type is absent) are generated here.
fn run_trial(
    model: &DegreeModel,
    ens: &MaskEnsemble,
    config: &MonteCarloConfig,
    policy: SeedPolicy,
    trial: u64,
    base: &ContactNetwork,
    shared: bool,
) -> Result<TrialRecord> {
    let master = config.master_seed;
    let mut owned;
    let mut redraws = 0;
    let (net, seed) = loop {
        let net = if redraws == 0 {
            base
        } else {
            owned = build_network(model, ens, config, trial, redraws as u8)?;
            &owned
        };
        if let Some(seed) = pick_seed(net, policy, &mut substream(master, trial, redraws as u8, Purpose::Seed)) {
            break (net, seed);
        }
        let SeedPolicy::FixedType(t) = policy else { unreachable!("uniform seeds always exist") };
        redraws += 1;
        debug!("trial {trial}: no node of type {t}, redraw {redraws}");
        if shared || redraws > MAX_SEED_REDRAWS {
            return Err(Error::SeedExhausted { type_index: t, redraws });
        }
    };
    let mut outbreak = run_outbreak(net, ens, seed, &mut substream(master, trial, 0, Purpose::Spread), config.threshold)?;
    outbreak.trial_seed = trial;
    Ok(TrialRecord {
        outbreak,
        type_counts: net.type_counts(),
        n_nodes: net.num_nodes(),
        redraws,
    })
}
