//! Classical engine equivalent to the compiled circuits for basis inputs.
//!
//! All controls of a compiled network circuit act diagonally in the
//! computational basis, so for a basis-state input the joint measurement
//! distribution factorizes layer by layer: every neuron fires independently
//! with its closed-form activation probability given the realized bits of its
//! sources. This module exploits that twice, as a shot-based forward sampler
//! and as an exact enumerator that propagates a distribution over layer
//! bit-vectors. The exact path is the only backend usable past the
//! statevector qubit limit.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuitry::{self, NetworkTopology, ParameterTable};
use crate::error::{Error, Result};
use crate::statevector::State;

/// Widest layer the exact enumerator will expand (2^16 configurations).
pub const DEFAULT_ENUMERATION_LIMIT: usize = 16;

/// Entries below this absolute probability mass are pruned during layer
/// propagation. With at most 2^16 live entries the total dropped mass stays
/// below 1e-10, inside every exactness tolerance used here.
const PRUNE_MASS: f64 = 1e-15;

/// Sampled activations of one forward pass: per-layer bit vectors plus the
/// final output bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardTrace {
    pub layers: Vec<Vec<bool>>,
    pub output: Vec<bool>,
}

/// Exact joint distribution over the output bits; entry `y` is the
/// probability that output `j` reads bit `j` of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution {
    probs: Vec<f64>,
}

impl OutputDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn outputs(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }

    /// Marginal one-probability of each output bit.
    pub fn marginals(&self) -> Vec<f64> {
        let k = self.outputs();
        let mut m = vec![0.0; k];
        for (y, &p) in self.probs.iter().enumerate() {
            for (slot, mj) in m.iter_mut().enumerate() {
                if (y >> slot) & 1 == 1 {
                    *mj += p;
                }
            }
        }
        m
    }
}

/// Loss evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossBackend {
    /// Exact output marginals via hidden-state enumeration.
    Exact,
    /// Empirical marginals from seeded forward sampling.
    Shots { shots: u32, seed: u64 },
    /// Marginals read off the dense statevector of the compiled circuit.
    Statevector,
}

/// What a held-out evaluation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    /// Fraction of samples whose argmax output marginal hits the argmax
    /// target (ties resolve to the lowest index).
    Accuracy,
    /// Mean squared error per output bit, averaged over samples.
    ReconstructionMse,
}

// ---------------------------------------------------------------------------
// Evaluation plan
// ---------------------------------------------------------------------------

struct PlanNeuron {
    bias_half: f64,
    /// (input id, half-angle) for sources that are network inputs.
    inputs: Vec<(usize, f64)>,
    /// (global neuron index, half-angle) for sources that are neurons.
    pred: Vec<(usize, f64)>,
}

/// Parameters resolved into half-angles, laid out for fast evaluation.
struct Plan<'t> {
    top: &'t NetworkTopology,
    neurons: Vec<PlanNeuron>,
    /// Global neuron index range of each layer.
    layer_ranges: Vec<(usize, usize)>,
    /// Last layer index whose neurons read from this layer.
    last_ref: Vec<usize>,
}

impl<'t> Plan<'t> {
    fn build(top: &'t NetworkTopology, params: &ParameterTable) -> Result<Plan<'t>> {
        params.validate_for(top)?;
        let inputs = top.inputs();
        let mut neurons = Vec::with_capacity(top.n_neurons());
        let mut layer_ranges = Vec::with_capacity(top.layers().len());
        let mut start = 0usize;
        for layer in top.layers() {
            layer_ranges.push((start, start + layer.len()));
            start += layer.len();
            for spec in layer {
                let bias = params.bias(spec.id).expect("validated bias");
                let mut plan = PlanNeuron {
                    bias_half: circuitry::half_angle(bias),
                    inputs: Vec::new(),
                    pred: Vec::new(),
                };
                for &src in &spec.incoming {
                    let w = params.weight(src, spec.id).expect("validated weight");
                    let half = circuitry::half_angle(w);
                    if src < inputs {
                        plan.inputs.push((src, half));
                    } else {
                        plan.pred.push((src - inputs, half));
                    }
                }
                neurons.push(plan);
            }
        }
        let mut last_ref: Vec<usize> = (0..layer_ranges.len()).collect();
        for (li, layer) in top.layers().iter().enumerate() {
            for spec in layer {
                for &src in &spec.incoming {
                    if src >= inputs {
                        let src_layer = top
                            .layers()
                            .iter()
                            .position(|l| l.iter().any(|n| n.id == src))
                            .expect("validated source");
                        if li > last_ref[src_layer] {
                            last_ref[src_layer] = li;
                        }
                    }
                }
            }
        }
        Ok(Plan {
            top,
            neurons,
            layer_ranges,
            last_ref,
        })
    }

    /// Per-neuron constant half-angle for a fixed input pattern:
    /// bias plus contributions of active input edges.
    fn input_base(&self, input: &[bool]) -> Vec<f64> {
        self.neurons
            .iter()
            .map(|n| {
                let mut angle = n.bias_half;
                for &(src, half) in &n.inputs {
                    if input[src] {
                        angle += half;
                    }
                }
                angle
            })
            .collect()
    }

    fn check_input(&self, input: &[bool]) -> Result<()> {
        if input.len() != self.top.inputs() {
            return Err(Error::contract(format!(
                "{} input bits supplied but the topology has {} inputs",
                input.len(),
                self.top.inputs()
            )));
        }
        Ok(())
    }
}

fn activation(angle: f64) -> f64 {
    let s = angle.sin();
    s * s
}

// ---------------------------------------------------------------------------
// Forward sampling
// ---------------------------------------------------------------------------

/// Sample one forward pass: every neuron fires independently with its
/// activation probability given the realized bits of its sources.
/// Deterministic given the rng seed.
pub fn forward_sample<R: Rng>(
    top: &NetworkTopology,
    params: &ParameterTable,
    input: &[bool],
    rng: &mut R,
) -> Result<ForwardTrace> {
    let plan = Plan::build(top, params)?;
    plan.check_input(input)?;
    Ok(forward_sample_planned(&plan, input, rng))
}

fn forward_sample_planned<R: Rng>(plan: &Plan<'_>, input: &[bool], rng: &mut R) -> ForwardTrace {
    let base = plan.input_base(input);
    let mut fired = vec![false; plan.neurons.len()];
    let mut layers = Vec::with_capacity(plan.layer_ranges.len());
    for &(lo, hi) in &plan.layer_ranges {
        let mut bits = Vec::with_capacity(hi - lo);
        for g in lo..hi {
            let mut angle = base[g];
            for &(src, half) in &plan.neurons[g].pred {
                if fired[src] {
                    angle += half;
                }
            }
            let bit = rng.gen_bool(activation(angle));
            fired[g] = bit;
            bits.push(bit);
        }
        layers.push(bits);
    }
    let output = layers.last().cloned().unwrap_or_default();
    ForwardTrace { layers, output }
}

// ---------------------------------------------------------------------------
// Exact propagation
// ---------------------------------------------------------------------------

/// Distribution over the joint bits of the still-referenced layers.
struct LayerDistribution {
    /// (packed bits, probability), keyed deterministically.
    entries: BTreeMap<u64, f64>,
    /// Bit offset of each active layer inside the packed key.
    offsets: Vec<Option<u32>>,
}

/// Walk all layers before the output layer and return the distribution over
/// whatever the output layer reads.
fn propagate_hidden(plan: &Plan<'_>, base: &[f64], limit: usize) -> Result<LayerDistribution> {
    let n_layers = plan.layer_ranges.len();
    let mut dist = LayerDistribution {
        entries: BTreeMap::from([(0u64, 1.0f64)]),
        offsets: vec![None; n_layers],
    };
    for li in 0..n_layers.saturating_sub(1) {
        let (lo, hi) = plan.layer_ranges[li];
        let width = hi - lo;
        if width > limit {
            return Err(Error::EnumerationLimit { width, limit });
        }
        // Layers still needed after this one is processed.
        let mut new_offsets: Vec<Option<u32>> = vec![None; n_layers];
        let mut cursor = 0u32;
        for m in 0..=li {
            let keep = if m == li {
                plan.last_ref[li] > li
            } else {
                dist.offsets[m].is_some() && plan.last_ref[m] > li
            };
            if keep {
                new_offsets[m] = Some(cursor);
                let (mlo, mhi) = plan.layer_ranges[m];
                cursor += (mhi - mlo) as u32;
            }
        }
        if cursor as usize > limit {
            return Err(Error::EnumerationLimit {
                width: cursor as usize,
                limit,
            });
        }

        let mut next: BTreeMap<u64, f64> = BTreeMap::new();
        let mut probs = vec![0.0f64; width];
        for (&key, &q) in &dist.entries {
            for (slot, p) in probs.iter_mut().enumerate() {
                let g = lo + slot;
                let mut angle = base[g];
                for &(src, half) in &plan.neurons[g].pred {
                    let src_layer = layer_of(plan, src);
                    let off = dist.offsets[src_layer].expect("source layer active");
                    let src_slot = src - plan.layer_ranges[src_layer].0;
                    if (key >> (off + src_slot as u32)) & 1 == 1 {
                        angle += half;
                    }
                }
                *p = activation(angle);
            }
            // Repack the retained earlier layers into the new key layout.
            let mut retained = 0u64;
            for m in 0..li {
                if let (Some(old), Some(new)) = (dist.offsets[m], new_offsets[m]) {
                    let (mlo, mhi) = plan.layer_ranges[m];
                    let w = mhi - mlo;
                    let bits = (key >> old) & ((1u64 << w) - 1);
                    retained |= bits << new;
                }
            }
            let own_offset = new_offsets[li];
            for config in 0u64..(1u64 << width) {
                let mut q2 = q;
                for (slot, &p) in probs.iter().enumerate() {
                    q2 *= if (config >> slot) & 1 == 1 { p } else { 1.0 - p };
                    if q2 == 0.0 {
                        break;
                    }
                }
                if q2 < PRUNE_MASS {
                    continue;
                }
                let key2 = match own_offset {
                    Some(off) => retained | (config << off),
                    None => retained,
                };
                *next.entry(key2).or_insert(0.0) += q2;
            }
        }
        dist = LayerDistribution {
            entries: next,
            offsets: new_offsets,
        };
    }
    Ok(dist)
}

fn layer_of(plan: &Plan<'_>, global_neuron: usize) -> usize {
    plan.layer_ranges
        .iter()
        .position(|&(lo, hi)| global_neuron >= lo && global_neuron < hi)
        .expect("neuron index in range")
}

fn output_probs_for_entry(plan: &Plan<'_>, base: &[f64], dist: &LayerDistribution, key: u64) -> Vec<f64> {
    let (lo, hi) = *plan.layer_ranges.last().expect("at least one layer");
    (lo..hi)
        .map(|g| {
            let mut angle = base[g];
            for &(src, half) in &plan.neurons[g].pred {
                let src_layer = layer_of(plan, src);
                let off = dist.offsets[src_layer].expect("source layer active");
                let src_slot = src - plan.layer_ranges[src_layer].0;
                if (key >> (off + src_slot as u32)) & 1 == 1 {
                    angle += half;
                }
            }
            activation(angle)
        })
        .collect()
}

/// Exact one-probability of each output neuron for a basis input.
pub fn output_marginals(
    top: &NetworkTopology,
    params: &ParameterTable,
    input: &[bool],
) -> Result<Vec<f64>> {
    let plan = Plan::build(top, params)?;
    plan.check_input(input)?;
    output_marginals_planned(&plan, input, DEFAULT_ENUMERATION_LIMIT)
}

fn output_marginals_planned(plan: &Plan<'_>, input: &[bool], limit: usize) -> Result<Vec<f64>> {
    let base = plan.input_base(input);
    let dist = propagate_hidden(plan, &base, limit)?;
    let outputs = plan.layer_ranges.last().map(|&(lo, hi)| hi - lo).unwrap_or(0);
    let mut marginals = vec![0.0f64; outputs];
    for (&key, &q) in &dist.entries {
        let probs = output_probs_for_entry(plan, &base, &dist, key);
        for (m, p) in marginals.iter_mut().zip(probs) {
            *m += q * p;
        }
    }
    Ok(marginals)
}

/// Exact joint distribution over the output bits, by summing over all hidden
/// configurations weighted by their product-Bernoulli probabilities.
pub fn exact_output_distribution(
    top: &NetworkTopology,
    params: &ParameterTable,
    input: &[bool],
) -> Result<OutputDistribution> {
    exact_output_distribution_with_limit(top, params, input, DEFAULT_ENUMERATION_LIMIT)
}

/// As [`exact_output_distribution`] with an explicit enumeration limit.
pub fn exact_output_distribution_with_limit(
    top: &NetworkTopology,
    params: &ParameterTable,
    input: &[bool],
    limit: usize,
) -> Result<OutputDistribution> {
    let plan = Plan::build(top, params)?;
    plan.check_input(input)?;
    let outputs = top.outputs();
    if outputs > limit {
        return Err(Error::EnumerationLimit {
            width: outputs,
            limit,
        });
    }
    let base = plan.input_base(input);
    let dist = propagate_hidden(&plan, &base, limit)?;
    let mut table = vec![0.0f64; 1 << outputs];
    for (&key, &q) in &dist.entries {
        let probs = output_probs_for_entry(&plan, &base, &dist, key);
        for (y, slot) in table.iter_mut().enumerate() {
            let mut qy = q;
            for (j, &p) in probs.iter().enumerate() {
                qy *= if (y >> j) & 1 == 1 { p } else { 1.0 - p };
                if qy == 0.0 {
                    break;
                }
            }
            *slot += qy;
        }
    }
    Ok(OutputDistribution { probs: table })
}

// ---------------------------------------------------------------------------
// Loss and metrics
// ---------------------------------------------------------------------------

/// Output marginals under the chosen backend.
pub fn backend_marginals(
    top: &NetworkTopology,
    params: &ParameterTable,
    input: &[bool],
    backend: LossBackend,
) -> Result<Vec<f64>> {
    match backend {
        LossBackend::Exact => output_marginals(top, params, input),
        LossBackend::Statevector => {
            let circuit = circuitry::compile(top, params)?;
            let prepared = circuitry::prepare_input(&circuit, top, input)?;
            let mut state = State::new(prepared.n_qubits())?;
            state.apply_circuit(&prepared)?;
            state.one_probabilities(&top.output_qubits())
        }
        LossBackend::Shots { shots, seed } => {
            let plan = Plan::build(top, params)?;
            plan.check_input(input)?;
            let stream = seed ^ fingerprint(params) ^ fingerprint_bits(input);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let outputs = top.outputs();
            let mut ones = vec![0u64; outputs];
            for _ in 0..shots {
                let trace = forward_sample_planned(&plan, input, &mut rng);
                for (j, &bit) in trace.output.iter().enumerate() {
                    if bit {
                        ones[j] += 1;
                    }
                }
            }
            Ok(ones.iter().map(|&c| c as f64 / shots as f64).collect())
        }
    }
}

/// Mean over the dataset of `Σ_j (P(output_j = 1) - target_j)²`.
pub fn network_loss(
    top: &NetworkTopology,
    params: &ParameterTable,
    dataset: &[(Vec<bool>, Vec<bool>)],
    backend: LossBackend,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::contract("loss over an empty dataset is undefined"));
    }
    let per_sample = marginals_over(top, params, dataset, backend)?;
    let mut total = 0.0;
    for ((_, target), probs) in dataset.iter().zip(&per_sample) {
        if target.len() != probs.len() {
            return Err(Error::contract(format!(
                "target has {} bits but the network has {} outputs",
                target.len(),
                probs.len()
            )));
        }
        total += probs
            .iter()
            .zip(target)
            .map(|(&p, &t)| {
                let t = if t { 1.0 } else { 0.0 };
                (p - t) * (p - t)
            })
            .sum::<f64>();
    }
    Ok(total / dataset.len() as f64)
}

/// Evaluate a held-out metric under the chosen backend.
pub fn evaluate_metric(
    top: &NetworkTopology,
    params: &ParameterTable,
    dataset: &[(Vec<bool>, Vec<bool>)],
    metric: EvalMetric,
    backend: LossBackend,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot evaluate an empty dataset"));
    }
    let per_sample = marginals_over(top, params, dataset, backend)?;
    match metric {
        EvalMetric::Accuracy => {
            let mut correct = 0usize;
            for ((_, target), probs) in dataset.iter().zip(&per_sample) {
                if predicted_class(probs) == argmax_bits(target) {
                    correct += 1;
                }
            }
            Ok(correct as f64 / dataset.len() as f64)
        }
        EvalMetric::ReconstructionMse => {
            let mut total = 0.0;
            let mut bits = 0usize;
            for ((_, target), probs) in dataset.iter().zip(&per_sample) {
                for (&p, &t) in probs.iter().zip(target) {
                    let t = if t { 1.0 } else { 0.0 };
                    total += (p - t) * (p - t);
                }
                bits += target.len();
            }
            Ok(total / bits as f64)
        }
    }
}

/// Classification accuracy: argmax over output marginals, ties to the lowest
/// index.
pub fn classification_accuracy(
    top: &NetworkTopology,
    params: &ParameterTable,
    dataset: &[(Vec<bool>, Vec<bool>)],
    backend: LossBackend,
) -> Result<f64> {
    evaluate_metric(top, params, dataset, EvalMetric::Accuracy, backend)
}

/// Per-class confusion counts: `counts[actual][predicted]`.
pub fn confusion_counts(
    top: &NetworkTopology,
    params: &ParameterTable,
    dataset: &[(Vec<bool>, Vec<bool>)],
    backend: LossBackend,
) -> Result<Vec<Vec<u64>>> {
    let per_sample = marginals_over(top, params, dataset, backend)?;
    let classes = top.outputs().max(2);
    let mut counts = vec![vec![0u64; classes]; classes];
    for ((_, target), probs) in dataset.iter().zip(&per_sample) {
        counts[argmax_bits(target)][predicted_class(probs)] += 1;
    }
    Ok(counts)
}

/// Predicted class from output marginals: argmax with ties to the lowest
/// index; a single output neuron acts as a binary classifier thresholded at
/// one half.
fn predicted_class(probs: &[f64]) -> usize {
    if probs.len() == 1 {
        usize::from(probs[0] > 0.5)
    } else {
        argmax(probs)
    }
}

fn marginals_over(
    top: &NetworkTopology,
    params: &ParameterTable,
    dataset: &[(Vec<bool>, Vec<bool>)],
    backend: LossBackend,
) -> Result<Vec<Vec<f64>>> {
    // Statevector compiles once; the other backends share a plan per call.
    // Samples are independent, so they evaluate in parallel; results are
    // collected in dataset order to keep sums deterministic.
    match backend {
        LossBackend::Statevector => {
            let circuit = circuitry::compile(top, params)?;
            let outputs = top.output_qubits();
            dataset
                .par_iter()
                .map(|(input, _)| {
                    let prepared = circuitry::prepare_input(&circuit, top, input)?;
                    let mut state = State::new(prepared.n_qubits())?;
                    state.apply_circuit(&prepared)?;
                    state.one_probabilities(&outputs)
                })
                .collect()
        }
        LossBackend::Exact => {
            let plan = Plan::build(top, params)?;
            dataset
                .par_iter()
                .map(|(input, _)| {
                    plan.check_input(input)?;
                    output_marginals_planned(&plan, input, DEFAULT_ENUMERATION_LIMIT)
                })
                .collect()
        }
        LossBackend::Shots { shots, seed } => {
            let plan = Plan::build(top, params)?;
            let stamp = fingerprint(params);
            dataset
                .par_iter()
                .enumerate()
                .map(|(idx, (input, _))| {
                    plan.check_input(input)?;
                    let stream = mix(seed, mix(stamp, idx as u64));
                    let mut rng = ChaCha8Rng::seed_from_u64(stream);
                    let mut ones = vec![0u64; top.outputs()];
                    for _ in 0..shots {
                        let trace = forward_sample_planned(&plan, input, &mut rng);
                        for (j, &bit) in trace.output.iter().enumerate() {
                            if bit {
                                ones[j] += 1;
                            }
                        }
                    }
                    Ok(ones.iter().map(|&c| c as f64 / shots as f64).collect())
                })
                .collect()
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Class index of a target vector: the set bit of a one-hot vector, or the
/// bit value itself for single-output binary tasks.
fn argmax_bits(bits: &[bool]) -> usize {
    if bits.len() == 1 {
        usize::from(bits[0])
    } else {
        bits.iter().position(|&b| b).unwrap_or(0)
    }
}

/// FNV-1a over the parameter values; used to derive independent shot streams
/// for distinct parameter tables.
fn fingerprint(params: &ParameterTable) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |v: u64| {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for (&(from, to), &v) in params.weights() {
        eat(from as u64);
        eat(to as u64);
        eat(v.to_bits());
    }
    for (&node, &v) in params.biases() {
        eat(node as u64);
        eat(v.to_bits());
    }
    h
}

fn fingerprint_bits(bits: &[bool]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bits {
        h ^= b as u64 + 1;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the xor.
    let mut z = a ^ b.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuitry::{activation_probability, ParamKey};
    use crate::models;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_params(top: &NetworkTopology, v: f64) -> ParameterTable {
        let mut t = ParameterTable::new();
        for key in top.parameter_keys() {
            t.set(key, v);
        }
        t
    }

    #[test]
    fn all_zero_parameters_never_fire() {
        let top = models::shallow(3, &[2], 2).unwrap();
        let params = uniform_params(&top, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trace = forward_sample(&top, &params, &[true, true, true], &mut rng).unwrap();
        assert!(trace.layers.iter().flatten().all(|&b| !b));
    }

    #[test]
    fn bias_one_always_fires() {
        let top = models::shallow(1, &[], 1).unwrap();
        let mut params = uniform_params(&top, 0.0);
        params.set(ParamKey::Bias { node: 1 }, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let trace = forward_sample(&top, &params, &[false], &mut rng).unwrap();
            assert!(trace.output[0]);
        }
    }

    #[test]
    fn xor_neuron_is_deterministic_over_patterns() {
        let top = models::shallow(2, &[], 1).unwrap();
        let mut params = uniform_params(&top, 1.0);
        params.set(ParamKey::Bias { node: 2 }, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (bits, want) in [
            ([false, false], false),
            ([false, true], true),
            ([true, false], true),
            ([true, true], false),
        ] {
            let trace = forward_sample(&top, &params, &bits, &mut rng).unwrap();
            assert_eq!(trace.output[0], want, "pattern {bits:?}");
        }
    }

    #[test]
    fn forward_sample_is_seed_deterministic() {
        let top = models::shallow(3, &[3], 2).unwrap();
        let params = uniform_params(&top, 0.37);
        let input = [true, false, true];
        let a = forward_sample(&top, &params, &input, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = forward_sample(&top, &params, &input, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn direct_net_distribution_is_product_of_activations() {
        let top = models::shallow(2, &[], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
        let input = [true, false];
        let dist = exact_output_distribution(&top, &params, &input).unwrap();
        let m = output_marginals(&top, &params, &input).unwrap();
        for y in 0..4usize {
            let mut want = 1.0;
            for (j, &pj) in m.iter().enumerate() {
                want *= if (y >> j) & 1 == 1 { pj } else { 1.0 - pj };
            }
            assert!((dist.probs()[y] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fig4_marginal_from_single_active_input() {
        let top = models::shallow(2, &[], 1).unwrap();
        let mut params = uniform_params(&top, 0.0);
        params.set(ParamKey::Weight { from: 0, to: 2 }, 0.4);
        params.set(ParamKey::Weight { from: 1, to: 2 }, 0.6);
        let m = output_marginals(&top, &params, &[false, true]).unwrap();
        assert!((m[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn distribution_sums_to_one() {
        let top = models::shallow(3, &[4, 2], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
        let dist = exact_output_distribution(&top, &params, &[true, true, false]).unwrap();
        let sum: f64 = dist.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(dist.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        let top = models::shallow(2, &[17], 1).unwrap();
        let params = uniform_params(&top, 0.5);
        match output_marginals(&top, &params, &[false, true]) {
            Err(Error::EnumerationLimit { width, limit }) => {
                assert_eq!((width, limit), (17, 16));
            }
            other => panic!("expected EnumerationLimit, got {other:?}"),
        }
    }

    /// Independent oracle: the joint probability of a full basis state is the
    /// product of per-neuron Bernoulli terms conditioned on the bits the
    /// basis state itself assigns to their sources.
    fn classical_joint(top: &NetworkTopology, params: &ParameterTable, input: &[bool]) -> Vec<f64> {
        let total = top.total_qubits();
        let mut joint = vec![0.0f64; 1 << total];
        for (x, slot) in joint.iter_mut().enumerate() {
            let bit_of = |id: usize| (x >> top.qubit_of(id)) & 1 == 1;
            let mut ok = true;
            for (i, &b) in input.iter().enumerate() {
                if bit_of(i) != b {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let mut p = 1.0f64;
            for neuron in top.neurons() {
                let w: Vec<f64> = neuron
                    .incoming
                    .iter()
                    .map(|&s| params.weight(s, neuron.id).unwrap())
                    .collect();
                let a: Vec<bool> = neuron.incoming.iter().map(|&s| bit_of(s)).collect();
                let act = activation_probability(params.bias(neuron.id).unwrap(), &w, &a).unwrap();
                p *= if bit_of(neuron.id) { act } else { 1.0 - act };
            }
            *slot = p;
        }
        joint
    }

    #[test]
    fn statevector_joint_equals_classical_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let hidden = [rng.gen_range(1..=3)];
            let top = models::shallow(rng.gen_range(1..=3), &hidden, rng.gen_range(1..=2)).unwrap();
            let params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
            let input: Vec<bool> = (0..top.inputs()).map(|_| rng.gen_bool(0.5)).collect();

            let circuit = crate::circuitry::compile(&top, &params).unwrap();
            let prepared = crate::circuitry::prepare_input(&circuit, &top, &input).unwrap();
            let mut state = State::new(prepared.n_qubits()).unwrap();
            state.apply_circuit(&prepared).unwrap();
            let qubits: Vec<usize> = (0..top.total_qubits()).collect();
            let sv = state.marginal_distribution(&qubits).unwrap();

            let classical = classical_joint(&top, &params, &input);
            let tv: f64 = sv
                .iter()
                .zip(&classical)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 1e-9, "total variation {tv}");
        }
    }

    #[test]
    fn exact_marginals_match_statevector_with_skip_connections() {
        // Hand-built two-hidden-layer net where layer 2 reads layer 0, so the
        // propagation has to retain a joint over both layers.
        use crate::circuitry::{NetworkTopology, NeuronSpec};
        use crate::optimizer::ConstraintSet;
        let layers = vec![
            vec![
                NeuronSpec { id: 2, incoming: vec![0, 1], layer: 0 },
                NeuronSpec { id: 3, incoming: vec![1], layer: 0 },
            ],
            vec![NeuronSpec { id: 4, incoming: vec![2, 3], layer: 1 }],
            vec![NeuronSpec { id: 5, incoming: vec![2, 4, 0], layer: 2 }],
        ];
        let top = NetworkTopology::new(2, layers, ConstraintSet::new(), false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..5 {
            let params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
            let input = [rng.gen_bool(0.5), rng.gen_bool(0.5)];
            let exact = output_marginals(&top, &params, &input).unwrap();
            let sv = backend_marginals(&top, &params, &input, LossBackend::Statevector).unwrap();
            for (a, b) in exact.iter().zip(&sv) {
                assert!((a - b).abs() < 1e-9, "exact {a} vs statevector {b}");
            }
        }
    }

    #[test]
    fn perfect_network_has_zero_loss() {
        let top = models::shallow(2, &[], 1).unwrap();
        let mut params = uniform_params(&top, 1.0);
        params.set(ParamKey::Bias { node: 2 }, 0.0);
        let dataset = vec![
            (vec![false, false], vec![false]),
            (vec![false, true], vec![true]),
            (vec![true, false], vec![true]),
            (vec![true, true], vec![false]),
        ];
        let loss = network_loss(&top, &params, &dataset, LossBackend::Exact).unwrap();
        assert!(loss < 1e-12);
        let acc = classification_accuracy(&top, &params, &dataset, LossBackend::Exact).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn half_probability_output_gives_quarter_loss() {
        let top = models::shallow(1, &[], 1).unwrap();
        let mut params = uniform_params(&top, 0.0);
        params.set(ParamKey::Bias { node: 1 }, 0.5);
        let dataset = vec![(vec![false], vec![true])];
        let loss = network_loss(&top, &params, &dataset, LossBackend::Exact).unwrap();
        assert!((loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_output_accuracy_thresholds_at_half() {
        let top = models::shallow(1, &[], 1).unwrap();
        let mut params = uniform_params(&top, 0.0);
        params.set(ParamKey::Bias { node: 1 }, 0.3);
        // P(1) = 0.3 regardless of input: correct on target 0, wrong on 1.
        let dataset = vec![
            (vec![false], vec![false]),
            (vec![true], vec![true]),
        ];
        let acc = classification_accuracy(&top, &params, &dataset, LossBackend::Exact).unwrap();
        assert_eq!(acc, 0.5);
        let confusion = confusion_counts(&top, &params, &dataset, LossBackend::Exact).unwrap();
        assert_eq!(confusion[0][0], 1);
        assert_eq!(confusion[1][0], 1);
    }

    #[test]
    fn loss_rejects_empty_dataset() {
        let top = models::shallow(1, &[], 1).unwrap();
        let params = uniform_params(&top, 0.5);
        assert!(network_loss(&top, &params, &[], LossBackend::Exact).is_err());
    }

    #[test]
    fn shot_backend_is_deterministic_and_consistent() {
        let top = models::shallow(2, &[2], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ParameterTable::random(&top, &mut rng, 0.2, 0.8);
        let dataset = vec![(vec![true, false], vec![true])];
        let backend = LossBackend::Shots { shots: 20_000, seed: 7 };
        let a = network_loss(&top, &params, &dataset, backend).unwrap();
        let b = network_loss(&top, &params, &dataset, backend).unwrap();
        assert_eq!(a, b);
        let exact = network_loss(&top, &params, &dataset, LossBackend::Exact).unwrap();
        assert!((a - exact).abs() < 0.02, "shots {a} vs exact {exact}");
    }

    #[test]
    fn exact_distribution_matches_forward_sampling_chi_squared() {
        let top = models::shallow(2, &[2], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = ParameterTable::random(&top, &mut rng, 0.1, 0.9);
        let input = [true, false];
        let dist = exact_output_distribution(&top, &params, &input).unwrap();
        let plan = Plan::build(&top, &params).unwrap();
        let samples = 1_000_000usize;
        let mut counts = vec![0u64; dist.probs().len()];
        for _ in 0..samples {
            let trace = forward_sample_planned(&plan, &input, &mut rng);
            let y: usize = trace
                .output
                .iter()
                .enumerate()
                .map(|(j, &b)| if b { 1usize << j } else { 0 })
                .sum();
            counts[y] += 1;
        }
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (&c, &p) in counts.iter().zip(dist.probs()) {
            let expected = p * samples as f64;
            if expected > 5.0 {
                chi2 += (c as f64 - expected).powi(2) / expected;
                dof += 1;
            }
        }
        let dof = dof.saturating_sub(1).max(1) as f64;
        // Wilson-Hilferty upper bound at roughly the 0.999 quantile.
        let critical = dof * (1.0 - 2.0 / (9.0 * dof) + 3.09 * (2.0 / (9.0 * dof)).sqrt()).powi(3);
        assert!(chi2 < critical, "chi2 {chi2} exceeds critical {critical}");
    }
}
