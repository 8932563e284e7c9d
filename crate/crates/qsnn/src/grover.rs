//! Generative sampling via amplitude amplification.
//!
//! A frozen trained network becomes a phase oracle by running its circuit,
//! applying Z on the marked output qubit, and uncomputing with the adjoint
//! circuit: basis inputs the network classifies positively pick up a phase of
//! `-1` (exactly for deterministic networks, partially for stochastic ones).
//! Rounds of oracle + diffusion over the input qubits then concentrate
//! probability mass on the inputs the classifier accepts, so sampling the
//! input register generates patterns that satisfy the learned property.

use rand::Rng;

use crate::circuitry::{self, NetworkTopology, ParameterTable};
use crate::error::{Error, Result};
use crate::statevector::{outcome_bitstring, Circuit, Gate, State};

/// A composed generative circuit:
/// `H^{⊗inputs} · [U_net · Z(out) · U_net† · Diffusion(inputs)]^iterations`.
#[derive(Debug, Clone)]
pub struct GenerativeCircuit {
    pub input_qubits: Vec<usize>,
    pub network: Circuit,
    pub marked_output: usize,
    pub iterations: usize,
    pub circuit: Circuit,
}

/// Sampling result: per-input-pattern counts plus the exact marginal table.
#[derive(Debug, Clone)]
pub struct GenerativeHistogram {
    pub counts: Vec<u64>,
    pub exact: Vec<f64>,
}

impl GenerativeHistogram {
    /// Emit CSV rows `pattern,count,probability` (pattern bit 0 = input 0).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pattern,count,probability")?;
        let k = self.exact.len().trailing_zeros() as usize;
        for (y, (&c, &p)) in self.counts.iter().zip(&self.exact).enumerate() {
            writeln!(out, "{},{},{}", outcome_bitstring(y, k), c, p)?;
        }
        Ok(())
    }
}

/// Wrap a network circuit as a phase oracle: `U_net · Z(output) · U_net†`.
///
/// The network circuit must not contain input-preparation gates; the oracle
/// acts on whatever input state it is given. For deterministic networks the
/// adjoint restores every non-input work qubit exactly, leaving only the
/// `(-1)^{f(x)}` phase on the inputs.
pub fn build_oracle(net: &Circuit, output_qubit: usize) -> Result<Circuit> {
    if output_qubit >= net.n_qubits() {
        return Err(Error::contract(format!(
            "output qubit {output_qubit} outside the {}-qubit network",
            net.n_qubits()
        )));
    }
    let mut oracle = Circuit::new(net.n_qubits());
    oracle.extend(net)?;
    oracle.push(Gate::z(output_qubit))?;
    oracle.extend(&net.adjoint())?;
    Ok(oracle)
}

/// Reflection about the uniform superposition of the input qubits, up to a
/// global phase: H on all inputs, X on all, MCZ over all, X, H.
pub fn diffusion(n_qubits: usize, input_qubits: &[usize]) -> Result<Circuit> {
    if input_qubits.is_empty() {
        return Err(Error::contract("diffusion needs at least one input qubit"));
    }
    let mut circuit = Circuit::new(n_qubits);
    for &q in input_qubits {
        circuit.push(Gate::h(q))?;
    }
    for &q in input_qubits {
        circuit.push(Gate::x(q))?;
    }
    let (&target, controls) = input_qubits.split_last().expect("nonempty");
    circuit.push(Gate::mcz(controls.to_vec(), target)?)?;
    for &q in input_qubits {
        circuit.push(Gate::x(q))?;
    }
    for &q in input_qubits {
        circuit.push(Gate::h(q))?;
    }
    Ok(circuit)
}

/// Compose the full generative circuit for a trained network.
///
/// `marked` selects the output qubit the oracle phases; a single-output
/// network defaults to its one output, a multi-output network must designate
/// one.
pub fn compose_generative(
    topology: &NetworkTopology,
    params: &ParameterTable,
    iterations: usize,
    marked: Option<usize>,
) -> Result<GenerativeCircuit> {
    let network = circuitry::compile(topology, params)?;
    let marked_output = match marked {
        Some(q) => q,
        None => {
            let outputs = topology.output_qubits();
            if outputs.len() != 1 {
                return Err(Error::contract(format!(
                    "network has {} outputs; designate one marked qubit",
                    outputs.len()
                )));
            }
            outputs[0]
        }
    };
    let input_qubits = topology.input_qubits();
    let oracle = build_oracle(&network, marked_output)?;
    let spread = diffusion(network.n_qubits(), &input_qubits)?;

    let mut circuit = Circuit::new(network.n_qubits());
    for &q in &input_qubits {
        circuit.push(Gate::h(q))?;
    }
    for _ in 0..iterations {
        circuit.extend(&oracle)?;
        circuit.extend(&spread)?;
    }
    Ok(GenerativeCircuit {
        input_qubits,
        network,
        marked_output,
        iterations,
        circuit,
    })
}

/// Run the generative circuit and sample the input register.
///
/// Returns shot counts per input pattern together with the exact marginal
/// table; deterministic given the rng seed.
pub fn generative_sample<R: Rng>(
    topology: &NetworkTopology,
    params: &ParameterTable,
    iterations: usize,
    marked: Option<usize>,
    shots: usize,
    rng: &mut R,
) -> Result<GenerativeHistogram> {
    let generative = compose_generative(topology, params, iterations, marked)?;
    let mut state = State::new(generative.circuit.n_qubits())?;
    state.apply_circuit(&generative.circuit)?;
    let exact = state.marginal_distribution(&generative.input_qubits)?;
    let counts = state.sample(&generative.input_qubits, shots, rng)?;
    Ok(GenerativeHistogram { counts, exact })
}

/// Deterministic-oracle optimum: `round(π / (4·asin(√(M/N))) - 1/2)` rounds
/// for `M` marked of `N` patterns.
pub fn optimal_iterations(marked: usize, total: usize) -> usize {
    assert!(marked >= 1 && marked <= total, "need 1 <= M <= N");
    let theta = ((marked as f64 / total as f64).sqrt()).asin();
    let raw = std::f64::consts::PI / (4.0 * theta) - 0.5;
    raw.round().max(0.0) as usize
}

/// Deterministic reference classifier: flips an output ancilla for every
/// listed pattern via multi-controlled X blocks. Returns the circuit over
/// `inputs + 1` qubits and its output qubit. Useful as a ground-truth oracle
/// whose marked count is known by construction.
pub fn pattern_marker_circuit(inputs: usize, patterns: &[Vec<bool>]) -> Result<(Circuit, usize)> {
    if inputs == 0 {
        return Err(Error::contract("need at least one input qubit"));
    }
    let output = inputs;
    let mut circuit = Circuit::new(inputs + 1);
    for pattern in patterns {
        if pattern.len() != inputs {
            return Err(Error::contract(format!(
                "pattern has {} bits, expected {inputs}",
                pattern.len()
            )));
        }
        for (q, &bit) in pattern.iter().enumerate() {
            if !bit {
                circuit.push(Gate::x(q))?;
            }
        }
        // Multi-controlled X on the output = H · MCZ · H.
        circuit.push(Gate::h(output))?;
        circuit.push(Gate::mcz((0..inputs).collect(), output)?)?;
        circuit.push(Gate::h(output))?;
        for (q, &bit) in pattern.iter().enumerate() {
            if !bit {
                circuit.push(Gate::x(q))?;
            }
        }
    }
    Ok((circuit, output))
}
