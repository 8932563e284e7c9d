//! Kiefer-Wolfowitz gradient estimation inside a simulated-annealing loop.
//!
//! Gradients are estimated per coordinate by central differences with a
//! decaying probe width `c_n`, steps are scaled by a decaying rate `a_n`, and
//! every proposal passes through a projection that keeps the constraint set
//! satisfied: box bounds, tied groups value-equal, masked keys absent. Tied
//! groups are perturbed jointly, so shared weights cost one estimate instead
//! of one per member. Acceptance follows the annealing rule
//! `min(1, exp(-(e_new - e_old) / (k·T)))` with geometric cooling, which lets
//! early iterations climb out of local minima; a descent-only mode (accept
//! iff the loss does not increase) is kept as the greedy baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::circuitry::{NetworkTopology, ParamKey, ParameterTable};
use crate::error::{Error, Result};
use crate::sampler::{self, EvalMetric, LossBackend};

/// Ties, masks, and box bounds enforced during optimization.
///
/// Tie groups partition a subset of the parameter keys into equivalence
/// classes that share one value (weight sharing). Masks name cut connections
/// that must carry no parameter at all. Bounds default to `[0, 1]`.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    ties: Vec<BTreeSet<ParamKey>>,
    masks: BTreeSet<ParamKey>,
    bounds: BTreeMap<ParamKey, (f64, f64)>,
}

impl ConstraintSet {
    pub fn new() -> ConstraintSet {
        ConstraintSet::default()
    }

    /// Register a tie group. Fails if it overlaps an existing group or a mask.
    pub fn add_tie_group<I: IntoIterator<Item = ParamKey>>(&mut self, keys: I) -> Result<()> {
        let group: BTreeSet<ParamKey> = keys.into_iter().collect();
        if group.is_empty() {
            return Err(Error::contract("tie group may not be empty"));
        }
        for key in &group {
            if self.masks.contains(key) {
                return Err(Error::contract(format!("masked key {key} cannot be tied")));
            }
            if self.ties.iter().any(|g| g.contains(key)) {
                return Err(Error::contract(format!(
                    "key {key} already belongs to a tie group"
                )));
            }
        }
        self.ties.push(group);
        Ok(())
    }

    /// Forbid a key (cut connection). Fails if the key is tied.
    pub fn add_mask(&mut self, key: ParamKey) -> Result<()> {
        if self.ties.iter().any(|g| g.contains(&key)) {
            return Err(Error::contract(format!("tied key {key} cannot be masked")));
        }
        self.masks.insert(key);
        Ok(())
    }

    /// Override the `[0, 1]` default interval for one key.
    pub fn set_bounds(&mut self, key: ParamKey, low: f64, high: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&low) || !(low..=1.0).contains(&high) {
            return Err(Error::contract(format!(
                "bounds [{low}, {high}] must satisfy 0 <= low <= high <= 1"
            )));
        }
        self.bounds.insert(key, (low, high));
        Ok(())
    }

    pub fn ties(&self) -> &[BTreeSet<ParamKey>] {
        &self.ties
    }

    pub fn masks(&self) -> &BTreeSet<ParamKey> {
        &self.masks
    }

    pub fn is_masked(&self, key: ParamKey) -> bool {
        self.masks.contains(&key)
    }

    pub fn bounds_of(&self, key: ParamKey) -> (f64, f64) {
        self.bounds.get(&key).copied().unwrap_or((0.0, 1.0))
    }

    pub(crate) fn explicit_bounds(&self) -> impl Iterator<Item = (ParamKey, (f64, f64))> + '_ {
        self.bounds.iter().map(|(&k, &b)| (k, b))
    }

    /// Members of the tie group containing `key`, or the singleton `[key]`.
    pub fn group_containing(&self, key: ParamKey) -> Vec<ParamKey> {
        self.ties
            .iter()
            .find(|g| g.contains(&key))
            .map(|g| g.iter().copied().collect())
            .unwrap_or_else(|| vec![key])
    }

    /// The free coordinates over `keys`: one entry per tie group plus one
    /// singleton per untied key, masked keys excluded. Deterministic order.
    pub fn free_groups(&self, keys: &BTreeSet<ParamKey>) -> Vec<Vec<ParamKey>> {
        let mut groups: Vec<Vec<ParamKey>> = Vec::new();
        let mut covered: BTreeSet<ParamKey> = BTreeSet::new();
        for group in &self.ties {
            let members: Vec<ParamKey> = group.iter().copied().filter(|k| keys.contains(k)).collect();
            if !members.is_empty() {
                covered.extend(members.iter().copied());
                groups.push(members);
            }
        }
        for &key in keys {
            if !covered.contains(&key) && !self.masks.contains(&key) {
                groups.push(vec![key]);
            }
        }
        groups.sort_by_key(|g| g[0]);
        groups
    }

    /// Project a table onto the feasible set: drop masked keys, copy each tie
    /// group's canonical value to all members, clip to bounds.
    pub fn project(&self, params: &mut ParameterTable) {
        for &key in &self.masks {
            params.remove(key);
        }
        for group in &self.ties {
            let canonical = group.iter().find_map(|&k| params.get(k));
            if let Some(v) = canonical {
                for &k in group {
                    if params.get(k).is_some() {
                        params.set(k, v);
                    }
                }
            }
        }
        let keys: Vec<ParamKey> = params.keys().collect();
        for key in keys {
            let (lo, hi) = self.bounds_of(key);
            let v = params.get(key).unwrap();
            params.set(key, v.clamp(lo, hi));
        }
    }

    /// Verify that a table satisfies every constraint.
    pub fn check(&self, params: &ParameterTable) -> Result<()> {
        for &key in &self.masks {
            if params.get(key).is_some_and(|v| v != 0.0) {
                return Err(Error::contract(format!("masked key {key} carries a value")));
            }
        }
        for group in &self.ties {
            let values: Vec<f64> = group.iter().filter_map(|&k| params.get(k)).collect();
            if values.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::contract(format!(
                    "tie group {:?} holds unequal values {values:?}",
                    group.iter().map(|k| k.to_string()).collect::<Vec<_>>()
                )));
            }
        }
        for key in params.keys() {
            let (lo, hi) = self.bounds_of(key);
            let v = params.get(key).unwrap();
            if v < lo || v > hi {
                return Err(Error::contract(format!(
                    "key {key} = {v} violates bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Well-formedness against a topology's key set: tie groups disjoint and
    /// drawn from the key set, masks outside it (cut edges do not exist).
    pub fn validate_against(&self, keys: &BTreeSet<ParamKey>) -> Result<()> {
        let mut seen: BTreeSet<ParamKey> = BTreeSet::new();
        for group in &self.ties {
            for key in group {
                if !keys.contains(key) {
                    return Err(Error::contract(format!(
                        "tie group references unknown key {key}"
                    )));
                }
                if !seen.insert(*key) {
                    return Err(Error::contract(format!(
                        "key {key} appears in more than one tie group"
                    )));
                }
                if self.masks.contains(key) {
                    return Err(Error::contract(format!("masked key {key} is tied")));
                }
            }
        }
        for key in &self.masks {
            if keys.contains(key) {
                return Err(Error::contract(format!(
                    "masked key {key} still exists in the topology"
                )));
            }
        }
        Ok(())
    }
}

/// Step-size schedules of the stochastic approximation:
/// `a_n = a0 / (n+1)^alpha`, `c_n = c0 / (n+1)^gamma`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct KwSchedule {
    pub a0: f64,
    pub c0: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for KwSchedule {
    fn default() -> Self {
        KwSchedule {
            a0: 0.5,
            c0: 0.05,
            alpha: 0.602,
            gamma: 0.101,
        }
    }
}

impl KwSchedule {
    pub fn a(&self, n: usize) -> f64 {
        self.a0 / ((n + 1) as f64).powf(self.alpha)
    }

    pub fn c(&self, n: usize) -> f64 {
        self.c0 / ((n + 1) as f64).powf(self.gamma)
    }
}

/// Geometric cooling: `T_t = t0 · beta^t`, with the paper's damping factor k.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub beta: f64,
    pub damping: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t0: 0.1,
            beta: 0.995,
            damping: 1.0,
        }
    }
}

impl AnnealSchedule {
    pub fn temperature(&self, t: usize) -> f64 {
        self.t0 * self.beta.powi(t as i32)
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    pub temperature: f64,
    pub accepted: bool,
    pub accuracy: Option<f64>,
}

/// Per-iteration training log; serializes to CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainingTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,loss,temperature,accepted,accuracy")?;
        for r in &self.records {
            let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.loss, r.temperature, r.accepted, acc
            )?;
        }
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.loss)
            .fold(None, |acc, l| Some(acc.map_or(l, |a: f64| a.min(l))))
    }
}

/// Acceptance rule of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptMode {
    /// Simulated annealing: uphill moves pass with probability
    /// `exp(-ΔE / (k·T))`.
    Anneal,
    /// Greedy: accept iff the loss does not increase.
    DescentOnly,
}

/// Knobs of [`train`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Iteration budget; must be at least 1.
    pub budget: usize,
    /// Coordinate groups probed per iteration (0 means all).
    pub subset: usize,
    pub mode: AcceptMode,
    pub backend: LossBackend,
    /// Uniform initialization range for every free group.
    pub init: (f64, f64),
    /// Evaluate the held-out metric every this many iterations (0 = never).
    pub eval_cadence: usize,
    pub eval_metric: EvalMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            budget: 2000,
            subset: 8,
            mode: AcceptMode::Anneal,
            backend: LossBackend::Exact,
            init: (0.05, 0.5),
            eval_cadence: 0,
            eval_metric: EvalMetric::Accuracy,
        }
    }
}

/// Central-difference gradient estimate over the listed coordinates.
///
/// Tied groups are perturbed jointly and produce one estimate, reported under
/// the group's smallest key; the value is the directional derivative along
/// the sum of the members' unit vectors. Perturbed values are clipped to
/// bounds before evaluation.
pub fn kw_gradient<F>(
    loss: F,
    params: &ParameterTable,
    constraints: &ConstraintSet,
    c_n: f64,
    coords: &[ParamKey],
) -> Result<Vec<(ParamKey, f64)>>
where
    F: Fn(&ParameterTable) -> f64 + Sync,
{
    if c_n <= 0.0 || !c_n.is_finite() {
        return Err(Error::contract(format!("probe width c = {c_n} must be positive")));
    }
    let mut groups: Vec<Vec<ParamKey>> = Vec::new();
    let mut seen: BTreeSet<ParamKey> = BTreeSet::new();
    for &key in coords {
        if constraints.is_masked(key) {
            return Err(Error::contract(format!("cannot differentiate masked key {key}")));
        }
        if params.get(key).is_none() {
            return Err(Error::contract(format!("unknown parameter key {key}")));
        }
        if seen.contains(&key) {
            continue;
        }
        let group = constraints.group_containing(key);
        seen.extend(group.iter().copied());
        groups.push(group);
    }

    let perturbed = |group: &[ParamKey], delta: f64| -> ParameterTable {
        let mut p = params.clone();
        for &key in group {
            let (lo, hi) = constraints.bounds_of(key);
            let v = p.get(key).unwrap();
            p.set(key, (v + delta).clamp(lo, hi));
        }
        p
    };

    let estimates: Vec<f64> = groups
        .par_iter()
        .map(|group| {
            let up = loss(&perturbed(group, c_n));
            let down = loss(&perturbed(group, -c_n));
            (up - down) / (2.0 * c_n)
        })
        .collect();

    Ok(groups
        .iter()
        .zip(estimates)
        .map(|(group, g)| (*group.iter().min().unwrap(), g))
        .collect())
}

/// Descend: `candidate = project(params - a_n · gradient)`.
///
/// Each gradient entry addresses a whole tie group through its representative
/// key; the projection restores bounds, tie equality, and mask absence.
pub fn propose(
    params: &ParameterTable,
    constraints: &ConstraintSet,
    gradient: &[(ParamKey, f64)],
    a_n: f64,
) -> ParameterTable {
    let mut candidate = params.clone();
    for &(key, g) in gradient {
        for member in constraints.group_containing(key) {
            if let Some(v) = candidate.get(member) {
                candidate.set(member, v - a_n * g);
            }
        }
    }
    constraints.project(&mut candidate);
    candidate
}

/// Annealing acceptance: accept with probability
/// `min(1, exp(-(e_new - e_old) / (k·T)))`; deterministic given the rng seed.
pub fn sa_accept<R: Rng>(e_old: f64, e_new: f64, temperature: f64, damping: f64, rng: &mut R) -> Result<bool> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::contract(format!("temperature {temperature} must be positive")));
    }
    if damping <= 0.0 || !damping.is_finite() {
        return Err(Error::contract(format!("damping factor {damping} must be positive")));
    }
    let p = (-(e_new - e_old) / (damping * temperature)).exp().min(1.0);
    Ok(rng.gen::<f64>() < p)
}

/// Run the stochastic search and return the best-so-far parameters with the
/// full trace.
///
/// Each iteration samples a coordinate subset, estimates the gradient there,
/// proposes a projected step, and lets the acceptance rule decide. All
/// constraints hold on every iterate. The best parameters by training loss
/// are returned rather than the final iterate, since annealing keeps moving
/// after it has visited a good point.
pub fn train<R: Rng>(
    topology: &NetworkTopology,
    dataset: &[(Vec<bool>, Vec<bool>)],
    eval_set: Option<&[(Vec<bool>, Vec<bool>)]>,
    kw: &KwSchedule,
    anneal: &AnnealSchedule,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(ParameterTable, TrainingTrace)> {
    if config.budget == 0 {
        return Err(Error::contract("iteration budget must be at least 1"));
    }
    if dataset.is_empty() {
        return Err(Error::contract("training dataset may not be empty"));
    }

    let constraints = topology.constraints();
    let loss = |p: &ParameterTable| -> f64 {
        sampler::network_loss(topology, p, dataset, config.backend)
            .expect("loss evaluation failed on a validated network")
    };

    let mut params = ParameterTable::random(topology, rng, config.init.0, config.init.1);
    constraints.project(&mut params);
    let keys = topology.parameter_keys();
    let groups = constraints.free_groups(&keys);
    let subset = if config.subset == 0 {
        groups.len()
    } else {
        config.subset.min(groups.len())
    };

    let mut current_loss = loss(&params);
    let mut best = (params.clone(), current_loss);
    let mut trace = TrainingTrace::default();

    for n in 0..config.budget {
        let picked = rand::seq::index::sample(rng, groups.len(), subset);
        let coords: Vec<ParamKey> = picked.iter().map(|gi| groups[gi][0]).collect();

        let mut gradient = kw_gradient(&loss, &params, constraints, kw.c(n), &coords)?;
        if config.mode == AcceptMode::Anneal {
            // Annealing samples a neighbor, not a pure gradient step: jitter
            // each selected coordinate by up to one step. Without this,
            // proposals at clipped boundary minima degenerate to the identity
            // and no amount of uphill acceptance can leave them.
            for (_, g) in &mut gradient {
                *g += rng.gen_range(-1.0..1.0);
            }
        }
        let candidate = propose(&params, constraints, &gradient, kw.a(n));
        debug_assert!(constraints.check(&candidate).is_ok(), "projection must restore constraints");

        let candidate_loss = loss(&candidate);
        let temperature = anneal.temperature(n);
        let accepted = match config.mode {
            AcceptMode::Anneal => {
                sa_accept(current_loss, candidate_loss, temperature, anneal.damping, rng)?
            }
            AcceptMode::DescentOnly => candidate_loss <= current_loss,
        };
        if accepted {
            params = candidate;
            current_loss = candidate_loss;
        }
        if current_loss < best.1 {
            best = (params.clone(), current_loss);
        }

        let accuracy = match eval_set {
            Some(eval) if config.eval_cadence > 0 && (n + 1) % config.eval_cadence == 0 => Some(
                sampler::evaluate_metric(topology, &params, eval, config.eval_metric, config.backend)?,
            ),
            _ => None,
        };
        trace.records.push(TraceRecord {
            iteration: n,
            loss: current_loss,
            temperature,
            accepted,
            accuracy,
        });
    }

    Ok((best.0, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(node: usize) -> ParamKey {
        ParamKey::Bias { node }
    }

    fn single_param_table(v: f64) -> ParameterTable {
        let mut t = ParameterTable::new();
        t.set(key(0), v);
        t
    }

    #[test]
    fn kw_gradient_on_hand_evaluated_quadratic() {
        // M(x) = -(x - 0.3)^2 at x = 0.5 with c = 0.1:
        // (M(0.6) - M(0.4)) / 0.2 = (-0.09 + 0.01) / 0.2 = -0.4.
        let params = single_param_table(0.5);
        let constraints = ConstraintSet::new();
        let loss = |p: &ParameterTable| -((p.get(key(0)).unwrap() - 0.3).powi(2));
        let grad = kw_gradient(loss, &params, &constraints, 0.1, &[key(0)]).unwrap();
        assert_eq!(grad.len(), 1);
        assert!((grad[0].1 - (-0.4)).abs() < 1e-12);
    }

    #[test]
    fn kw_gradient_of_constant_loss_is_zero() {
        let mut params = single_param_table(0.5);
        params.set(key(1), 0.2);
        let constraints = ConstraintSet::new();
        let grad = kw_gradient(|_| 7.25, &params, &constraints, 0.05, &[key(0), key(1)]).unwrap();
        for (_, g) in grad {
            assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn kw_gradient_rejects_masked_and_unknown_keys() {
        let params = single_param_table(0.5);
        let mut constraints = ConstraintSet::new();
        constraints.add_mask(key(9)).unwrap();
        assert!(kw_gradient(|_| 0.0, &params, &constraints, 0.1, &[key(9)]).is_err());
        let constraints = ConstraintSet::new();
        assert!(kw_gradient(|_| 0.0, &params, &constraints, 0.1, &[key(9)]).is_err());
    }

    #[test]
    fn tied_pair_gets_single_directional_estimate() {
        // f(x1, x2) = x1^2 + 2 x2^2 with x1 = x2 = 0.5 tied: derivative along
        // (e1 + e2) is 2 x1 + 4 x2 = 3 at x = 0.5; central difference is exact
        // up to the quadratic term: ((f(0.6,0.6) - f(0.4,0.4)) / 0.2) = 3.
        let mut params = ParameterTable::new();
        params.set(key(0), 0.5);
        params.set(key(1), 0.5);
        let mut constraints = ConstraintSet::new();
        constraints.add_tie_group([key(0), key(1)]).unwrap();
        let loss = |p: &ParameterTable| {
            let a = p.get(key(0)).unwrap();
            let b = p.get(key(1)).unwrap();
            a * a + 2.0 * b * b
        };
        let grad = kw_gradient(loss, &params, &constraints, 0.1, &[key(0), key(1)]).unwrap();
        assert_eq!(grad.len(), 1, "one estimate per tied group");
        assert!((grad[0].1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn propose_zero_gradient_keeps_params() {
        let params = single_param_table(0.42);
        let constraints = ConstraintSet::new();
        let cand = propose(&params, &constraints, &[(key(0), 0.0)], 0.5);
        assert_eq!(cand, params);
    }

    #[test]
    fn propose_descends_the_quadratic_to_its_optimum() {
        // loss(x) = (x - 0.3)^2 (the negated hand example): gradient estimate
        // at 0.5 with c = 0.1 is +0.4, and a = 0.5 lands exactly on 0.3.
        let params = single_param_table(0.5);
        let constraints = ConstraintSet::new();
        let loss = |p: &ParameterTable| (p.get(key(0)).unwrap() - 0.3).powi(2);
        let grad = kw_gradient(loss, &params, &constraints, 0.1, &[key(0)]).unwrap();
        assert!((grad[0].1 - 0.4).abs() < 1e-12);
        let cand = propose(&params, &constraints, &grad, 0.5);
        assert!((cand.get(key(0)).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn propose_clips_to_bounds() {
        let params = single_param_table(0.9);
        let constraints = ConstraintSet::new();
        // Gradient pushing the value to 0.9 + 0.3 = 1.2 clips to 1.0.
        let cand = propose(&params, &constraints, &[(key(0), -0.3)], 1.0);
        assert_eq!(cand.get(key(0)).unwrap(), 1.0);
    }

    #[test]
    fn propose_copies_tied_values() {
        let mut params = ParameterTable::new();
        params.set(key(0), 0.5);
        params.set(key(1), 0.5);
        let mut constraints = ConstraintSet::new();
        constraints.add_tie_group([key(0), key(1)]).unwrap();
        let cand = propose(&params, &constraints, &[(key(0), 0.2)], 1.0);
        assert_eq!(cand.get(key(0)), cand.get(key(1)));
        assert!((cand.get(key(0)).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn sa_accept_always_takes_downhill() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!(sa_accept(1.0, 0.5, 0.01, 1.0, &mut rng).unwrap());
            assert!(sa_accept(1.0, 1.0, 0.01, 1.0, &mut rng).unwrap());
        }
    }

    #[test]
    fn sa_accept_frequency_matches_exp_minus_one() {
        // Delta E = k*T gives acceptance probability exp(-1).
        let trials = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut accepted = 0usize;
        for _ in 0..trials {
            if sa_accept(0.0, 0.05, 0.05, 1.0, &mut rng).unwrap() {
                accepted += 1;
            }
        }
        let p = (-1.0f64).exp();
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = accepted as f64 / trials as f64;
        assert!(
            (freq - p).abs() < 4.0 * sigma,
            "frequency {freq} not within 4 sigma of {p}"
        );
    }

    #[test]
    fn sa_accept_vanishes_at_low_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut accepted = 0usize;
        let trials = 10_000usize;
        for _ in 0..trials {
            if sa_accept(0.0, 0.1, 1e-6, 1.0, &mut rng).unwrap() {
                accepted += 1;
            }
        }
        assert!((accepted as f64 / trials as f64) < 0.001);
    }

    #[test]
    fn sa_accept_rate_is_monotone_in_temperature() {
        let trials = 10_000usize;
        let mut rates = Vec::new();
        for &t in &[0.2, 0.1, 0.05] {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let accepted = (0..trials)
                .filter(|_| sa_accept(0.0, 0.1, t, 1.0, &mut rng).unwrap())
                .count();
            rates.push(accepted as f64 / trials as f64);
        }
        assert!(rates[0] >= rates[1] && rates[1] >= rates[2], "{rates:?}");
    }

    #[test]
    fn sa_accept_validates_preconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sa_accept(0.0, 0.1, 0.0, 1.0, &mut rng).is_err());
        assert!(sa_accept(0.0, 0.1, 0.1, 0.0, &mut rng).is_err());
    }

    fn xor_dataset() -> Vec<(Vec<bool>, Vec<bool>)> {
        vec![
            (vec![false, false], vec![false]),
            (vec![false, true], vec![true]),
            (vec![true, false], vec![true]),
            (vec![true, true], vec![false]),
        ]
    }

    #[test]
    fn train_rejects_zero_budget_and_empty_dataset() {
        let top = models::shallow(2, &[], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TrainConfig {
            budget: 0,
            ..TrainConfig::default()
        };
        assert!(train(&top, &xor_dataset(), None, &KwSchedule::default(), &AnnealSchedule::default(), &cfg, &mut rng).is_err());
        let cfg = TrainConfig::default();
        assert!(train(&top, &[], None, &KwSchedule::default(), &AnnealSchedule::default(), &cfg, &mut rng).is_err());
    }

    #[test]
    fn train_learns_xor_in_most_seeds() {
        // The exact solution (w = [1, 1], b = 0) must be found reliably.
        let top = models::shallow(2, &[], 1).unwrap();
        let dataset = xor_dataset();
        let cfg = TrainConfig {
            budget: 2000,
            subset: 3,
            ..TrainConfig::default()
        };
        let mut hits = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (params, _) = train(
                &top,
                &dataset,
                None,
                &KwSchedule::default(),
                &AnnealSchedule::default(),
                &cfg,
                &mut rng,
            )
            .unwrap();
            let loss = crate::sampler::network_loss(&top, &params, &dataset, LossBackend::Exact).unwrap();
            if loss < 1e-3 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "only {hits}/10 seeds reached loss < 1e-3");
    }

    #[test]
    fn traces_are_reproducible_and_constrained() {
        let top = models::hopfield(3).unwrap();
        let pattern = vec![true, false, true];
        let dataset = vec![(pattern.clone(), pattern.clone())];
        let cfg = TrainConfig {
            budget: 50,
            ..TrainConfig::default()
        };
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            train(
                &top,
                &dataset,
                None,
                &KwSchedule::default(),
                &AnnealSchedule::default(),
                &cfg,
                &mut rng,
            )
            .unwrap()
        };
        let (p1, t1) = run(5);
        let (p2, t2) = run(5);
        assert_eq!(t1, t2, "identical seeds must give bit-identical traces");
        assert_eq!(p1, p2);
        top.constraints().check(&p1).unwrap();
        let (_, t3) = run(6);
        assert_ne!(t1, t3);
    }

    #[test]
    fn kw_matches_five_point_stencil_on_network_loss() {
        // Independent reference: five-point central difference on the smooth
        // sin^2 loss of a small network.
        let top = models::shallow(2, &[2], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut params = ParameterTable::random(&top, &mut rng, 0.3, 0.7);
        top.constraints().project(&mut params);
        let dataset = xor_dataset();
        let loss = |p: &ParameterTable| {
            crate::sampler::network_loss(&top, p, &dataset, LossBackend::Exact).unwrap()
        };
        let c = 1e-4;
        for key in [ParamKey::Weight { from: 0, to: 2 }, ParamKey::Bias { node: 4 }] {
            let grad = kw_gradient(&loss, &params, top.constraints(), c, &[key]).unwrap()[0].1;
            let f = |delta: f64| {
                let mut p = params.clone();
                p.set(key, p.get(key).unwrap() + delta);
                loss(&p)
            };
            let h = 1e-3;
            let stencil = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
            let denom = stencil.abs().max(1e-8);
            assert!(
                ((grad - stencil) / denom).abs() < 1e-4,
                "kw {grad} vs stencil {stencil}"
            );
        }
    }
}
