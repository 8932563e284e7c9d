//! Stochastic quantum perceptron networks.
//!
//! This crate models probabilistic neurons as parameterized quantum circuits:
//! each neuron is a qubit whose excitation probability is driven by an RX bias
//! rotation and one CRX rotation per incoming connection. Weights and biases
//! live in probability space `[0, 1]` and map to rotation angles through
//! `2·asin(√ω)`, which makes activation probabilities additive in rotation
//! half-angles.
//!
//! The crate is organized around two interchangeable execution backends:
//!
//! - [`statevector`] — an exact dense simulator over up to a configurable
//!   number of qubits (default 24), used to run the compiled circuits.
//! - [`sampler`] — a classical engine producing the same computational-basis
//!   statistics for basis-state inputs, either by layer-wise Bernoulli
//!   sampling or exact enumeration of hidden configurations. It is the only
//!   backend that scales past the statevector qubit limit.
//!
//! On top of these sit the network [`circuitry`] (probability-to-angle math
//! and the topology-to-circuit compiler), the [`optimizer`] (Kiefer-Wolfowitz
//! gradient estimates inside a simulated-annealing loop with tie/mask/bound
//! constraints), the [`models`] constructors (shallow, Hopfield, RBM,
//! autoencoder, CNN), [`datasets`] (k-means binarization, bars-and-stripes,
//! MNIST and UCI ingestion), and [`grover`] (wrapping a frozen network as a
//! phase oracle for generative sampling).

pub mod circuitry;
pub mod datasets;
pub mod error;
pub mod grover;
pub mod models;
pub mod optimizer;
pub mod sampler;
pub mod statevector;

pub use circuitry::{NetworkTopology, NeuronSpec, ParamKey, ParameterTable};
pub use error::{Error, Result};
pub use optimizer::ConstraintSet;
pub use statevector::{Circuit, Gate, GateKind, State};
