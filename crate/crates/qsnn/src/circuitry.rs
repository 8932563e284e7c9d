//! Stochastic-perceptron math and the topology-to-circuit compiler.
//!
//! Weights and biases are probabilities in `[0, 1]`. A parameter `ω` maps to
//! the rotation angle `2·asin(√ω)`, so a lone rotation on `|0⟩` excites the
//! qubit with probability exactly `ω`, and simultaneously active inputs add
//! their half-angles `asin(√ω_i)`. Cumulative half-angles past `π/2` reduce
//! the activation again, which is what lets a single neuron realize XOR.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::ConstraintSet;
use crate::statevector::{Circuit, Gate};

/// Identifier of a network node. Inputs occupy `0..inputs`, neurons are
/// numbered consecutively after them in layer order.
pub type NodeId = usize;

/// Addresses one trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKey {
    /// Connection weight on the edge `from → to`.
    Weight { from: NodeId, to: NodeId },
    /// Bias of a neuron.
    Bias { node: NodeId },
}

impl std::fmt::Display for ParamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamKey::Weight { from, to } => write!(f, "w[{from}->{to}]"),
            ParamKey::Bias { node } => write!(f, "b[{node}]"),
        }
    }
}

/// Trainable state of a network: per-edge weights and per-neuron biases, all
/// probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterTable {
    weights: BTreeMap<(NodeId, NodeId), f64>,
    biases: BTreeMap<NodeId, f64>,
}

impl ParameterTable {
    pub fn new() -> ParameterTable {
        ParameterTable::default()
    }

    /// Uniform random parameters for `topology`, drawn in `[lo, hi]` per free
    /// group so tied parameters start equal.
    pub fn random<R: rand::Rng>(
        topology: &NetworkTopology,
        rng: &mut R,
        lo: f64,
        hi: f64,
    ) -> ParameterTable {
        let mut table = ParameterTable::new();
        for key in topology.parameter_keys() {
            table.set(key, 0.0);
        }
        for group in topology.constraints().free_groups(&topology.parameter_keys()) {
            let v = rng.gen_range(lo..=hi);
            for key in group {
                table.set(key, v);
            }
        }
        table
    }

    pub fn set(&mut self, key: ParamKey, value: f64) {
        match key {
            ParamKey::Weight { from, to } => {
                self.weights.insert((from, to), value);
            }
            ParamKey::Bias { node } => {
                self.biases.insert(node, value);
            }
        }
    }

    pub fn get(&self, key: ParamKey) -> Option<f64> {
        match key {
            ParamKey::Weight { from, to } => self.weights.get(&(from, to)).copied(),
            ParamKey::Bias { node } => self.biases.get(&node).copied(),
        }
    }

    pub fn weight(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.weights.get(&(from, to)).copied()
    }

    pub fn bias(&self, node: NodeId) -> Option<f64> {
        self.biases.get(&node).copied()
    }

    pub fn remove(&mut self, key: ParamKey) {
        match key {
            ParamKey::Weight { from, to } => {
                self.weights.remove(&(from, to));
            }
            ParamKey::Bias { node } => {
                self.biases.remove(&node);
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = ParamKey> + '_ {
        self.weights
            .keys()
            .map(|&(from, to)| ParamKey::Weight { from, to })
            .chain(self.biases.keys().map(|&node| ParamKey::Bias { node }))
    }

    pub fn key_set(&self) -> BTreeSet<ParamKey> {
        self.keys().collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty() && self.biases.is_empty()
    }

    pub fn weights(&self) -> &BTreeMap<(NodeId, NodeId), f64> {
        &self.weights
    }

    pub fn biases(&self) -> &BTreeMap<NodeId, f64> {
        &self.biases
    }

    /// Check that the key set matches `topology` exactly and every value is a
    /// probability.
    pub fn validate_for(&self, topology: &NetworkTopology) -> Result<()> {
        let expected = topology.parameter_keys();
        let actual = self.key_set();
        if expected != actual {
            let missing: Vec<String> = expected.difference(&actual).map(|k| k.to_string()).collect();
            let extra: Vec<String> = actual.difference(&expected).map(|k| k.to_string()).collect();
            return Err(Error::contract(format!(
                "parameter table does not match topology (missing: [{}], extra: [{}])",
                missing.join(", "),
                extra.join(", ")
            )));
        }
        for key in self.keys() {
            let v = self.get(key).unwrap();
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::contract(format!(
                    "parameter {key} = {v} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// One stochastic neuron: its node id, ordered incoming sources, and the
/// layer it sits in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub id: NodeId,
    pub incoming: Vec<NodeId>,
    pub layer: usize,
}

/// A layered network of stochastic neurons plus its constraint set.
///
/// Total qubits = inputs + neurons; exactly one qubit per node, no ancillas.
/// The qubit assignment is a bijection onto `0..total_qubits`.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    inputs: usize,
    layers: Vec<Vec<NeuronSpec>>,
    qubit_of: Vec<usize>,
    constraints: ConstraintSet,
    recurrent: bool,
}

impl NetworkTopology {
    /// Build a topology with the identity qubit assignment and validate it.
    pub fn new(
        inputs: usize,
        layers: Vec<Vec<NeuronSpec>>,
        constraints: ConstraintSet,
        recurrent: bool,
    ) -> Result<NetworkTopology> {
        let total = inputs + layers.iter().map(Vec::len).sum::<usize>();
        let topology = NetworkTopology {
            inputs,
            layers,
            qubit_of: (0..total).collect(),
            constraints,
            recurrent,
        };
        topology.validate()?;
        Ok(topology)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn layers(&self) -> &[Vec<NeuronSpec>] {
        &self.layers
    }

    pub fn recurrent(&self) -> bool {
        self.recurrent
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn n_neurons(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn total_qubits(&self) -> usize {
        self.inputs + self.n_neurons()
    }

    pub fn qubit_of(&self, id: NodeId) -> usize {
        self.qubit_of[id]
    }

    pub fn input_qubits(&self) -> Vec<usize> {
        (0..self.inputs).map(|id| self.qubit_of[id]).collect()
    }

    /// Neurons of the last layer, the network outputs.
    pub fn output_layer(&self) -> &[NeuronSpec] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outputs(&self) -> usize {
        self.output_layer().len()
    }

    pub fn output_qubits(&self) -> Vec<usize> {
        self.output_layer()
            .iter()
            .map(|n| self.qubit_of[n.id])
            .collect()
    }

    /// All neurons in layer order.
    pub fn neurons(&self) -> impl Iterator<Item = &NeuronSpec> {
        self.layers.iter().flatten()
    }

    /// Every weight and bias key this topology defines.
    pub fn parameter_keys(&self) -> BTreeSet<ParamKey> {
        let mut keys = BTreeSet::new();
        for neuron in self.neurons() {
            keys.insert(ParamKey::Bias { node: neuron.id });
            for &src in &neuron.incoming {
                keys.insert(ParamKey::Weight {
                    from: src,
                    to: neuron.id,
                });
            }
        }
        keys
    }

    /// Structural validation: bijective qubit map, consecutive neuron ids,
    /// feedforward sources, well-formed constraints over this key set.
    pub fn validate(&self) -> Result<()> {
        let total = self.total_qubits();
        if self.qubit_of.len() != total {
            return Err(Error::contract(format!(
                "qubit assignment covers {} nodes, expected {total}",
                self.qubit_of.len()
            )));
        }
        let mut seen = vec![false; total];
        for &q in &self.qubit_of {
            if q >= total || seen[q] {
                return Err(Error::contract(
                    "qubit assignment is not a bijection onto 0..total_qubits",
                ));
            }
            seen[q] = true;
        }

        let mut expected_id = self.inputs;
        let mut id_layer: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (li, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::contract(format!("layer {li} is empty")));
            }
            for neuron in layer {
                if neuron.id != expected_id {
                    return Err(Error::contract(format!(
                        "neuron ids must be consecutive in layer order; expected {expected_id}, found {}",
                        neuron.id
                    )));
                }
                if neuron.layer != li {
                    return Err(Error::contract(format!(
                        "neuron {} carries layer index {} but sits in layer {li}",
                        neuron.id, neuron.layer
                    )));
                }
                expected_id += 1;
                id_layer.insert(neuron.id, li);
            }
        }
        for neuron in self.neurons() {
            let mut seen_src = BTreeSet::new();
            for &src in &neuron.incoming {
                if !seen_src.insert(src) {
                    return Err(Error::contract(format!(
                        "neuron {} lists source {src} twice",
                        neuron.id
                    )));
                }
                let ok = if src < self.inputs {
                    true
                } else {
                    match id_layer.get(&src) {
                        Some(&src_layer) => src_layer < neuron.layer,
                        None => false,
                    }
                };
                if !ok {
                    return Err(Error::contract(format!(
                        "neuron {} has non-feedforward source {src}",
                        neuron.id
                    )));
                }
            }
        }

        self.constraints.validate_against(&self.parameter_keys())
    }
}

/// Map an activation probability to its rotation angle `2·asin(√ω)`.
pub fn weight_to_angle(omega: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&omega) || omega.is_nan() {
        return Err(Error::contract(format!(
            "weight {omega} is outside [0, 1]"
        )));
    }
    Ok(2.0 * omega.sqrt().asin())
}

/// Rotation half-angle `asin(√p)`, clamped against float drift.
pub(crate) fn half_angle(p: f64) -> f64 {
    p.clamp(0.0, 1.0).sqrt().asin()
}

/// Closed-form activation of one neuron: `sin²(asin(√b) + Σ_{a_i=1} asin(√ω_i))`.
pub fn activation_probability(bias: f64, weights: &[f64], active: &[bool]) -> Result<f64> {
    if weights.len() != active.len() {
        return Err(Error::contract(format!(
            "{} weights but {} input bits",
            weights.len(),
            active.len()
        )));
    }
    if !(0.0..=1.0).contains(&bias) || bias.is_nan() {
        return Err(Error::contract(format!("bias {bias} is outside [0, 1]")));
    }
    let mut angle = half_angle(bias);
    for (&w, &a) in weights.iter().zip(active) {
        if !(0.0..=1.0).contains(&w) || w.is_nan() {
            return Err(Error::contract(format!("weight {w} is outside [0, 1]")));
        }
        if a {
            angle += half_angle(w);
        }
    }
    Ok(angle.sin().powi(2))
}

/// Compile a parameterized topology into a gate circuit.
///
/// Per neuron, in layer order: one RX for the bias on the neuron's qubit,
/// then one CRX per incoming edge with the source qubit as control. Within a
/// layer the emitted gates commute: targets are distinct and controls act
/// diagonally.
pub fn compile(topology: &NetworkTopology, params: &ParameterTable) -> Result<Circuit> {
    params.validate_for(topology)?;
    let mut circuit = Circuit::new(topology.total_qubits());
    for neuron in topology.neurons() {
        let nq = topology.qubit_of(neuron.id);
        let bias = params.bias(neuron.id).expect("validated bias");
        circuit.push(Gate::rx(nq, weight_to_angle(bias)?))?;
        for &src in &neuron.incoming {
            let w = params.weight(src, neuron.id).expect("validated weight");
            circuit.push(Gate::crx(topology.qubit_of(src), nq, weight_to_angle(w)?)?)?;
        }
    }
    Ok(circuit)
}

/// Prepend X gates flipping the input qubits where `bits` is set.
pub fn prepare_input(circuit: &Circuit, topology: &NetworkTopology, bits: &[bool]) -> Result<Circuit> {
    if bits.len() != topology.inputs() {
        return Err(Error::contract(format!(
            "{} input bits supplied but the topology has {} inputs",
            bits.len(),
            topology.inputs()
        )));
    }
    let mut prepared = Circuit::new(circuit.n_qubits());
    for (id, &bit) in bits.iter().enumerate() {
        if bit {
            prepared.push(Gate::x(topology.qubit_of(id)))?;
        }
    }
    prepared.extend(circuit)?;
    Ok(prepared)
}

// ---------------------------------------------------------------------------
// Model document: the JSON file format for trained networks.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct WeightEntry {
    from: NodeId,
    to: NodeId,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BiasEntry {
    node: NodeId,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundEntry {
    key: ParamKey,
    low: f64,
    high: f64,
}

/// Serialized form of a topology plus its parameters.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    pub inputs: usize,
    pub recurrent: bool,
    pub layers: Vec<Vec<NeuronSpec>>,
    pub qubits: Vec<usize>,
    pub ties: Vec<Vec<ParamKey>>,
    pub masks: Vec<ParamKey>,
    #[serde(default)]
    bounds: Vec<BoundEntry>,
    weights: Vec<WeightEntry>,
    biases: Vec<BiasEntry>,
}

impl ModelDocument {
    pub fn from_model(topology: &NetworkTopology, params: &ParameterTable) -> ModelDocument {
        ModelDocument {
            inputs: topology.inputs,
            recurrent: topology.recurrent,
            layers: topology.layers.clone(),
            qubits: topology.qubit_of.clone(),
            ties: topology
                .constraints
                .ties()
                .iter()
                .map(|g| g.iter().copied().collect())
                .collect(),
            masks: topology.constraints.masks().iter().copied().collect(),
            bounds: topology
                .constraints
                .explicit_bounds()
                .map(|(key, (low, high))| BoundEntry { key, low, high })
                .collect(),
            weights: params
                .weights
                .iter()
                .map(|(&(from, to), &value)| WeightEntry { from, to, value })
                .collect(),
            biases: params
                .biases
                .iter()
                .map(|(&node, &value)| BiasEntry { node, value })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<(NetworkTopology, ParameterTable)> {
        let mut constraints = ConstraintSet::new();
        for group in self.ties {
            constraints.add_tie_group(group)?;
        }
        for key in self.masks {
            constraints.add_mask(key)?;
        }
        for b in self.bounds {
            constraints.set_bounds(b.key, b.low, b.high)?;
        }
        let total = self.inputs + self.layers.iter().map(Vec::len).sum::<usize>();
        if self.qubits.len() != total {
            return Err(Error::Document(format!(
                "qubit assignment covers {} nodes, expected {total}",
                self.qubits.len()
            )));
        }
        let topology = NetworkTopology {
            inputs: self.inputs,
            layers: self.layers,
            qubit_of: self.qubits,
            constraints,
            recurrent: self.recurrent,
        };
        topology.validate().map_err(doc_err)?;

        let mut params = ParameterTable::new();
        for w in self.weights {
            params.set(
                ParamKey::Weight {
                    from: w.from,
                    to: w.to,
                },
                w.value,
            );
        }
        for b in self.biases {
            params.set(ParamKey::Bias { node: b.node }, b.value);
        }
        params.validate_for(&topology).map_err(doc_err)?;
        Ok((topology, params))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<ModelDocument> {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }
}

fn doc_err(e: Error) -> Error {
    Error::Document(e.to_string())
}
