//! Constructors for the network topologies and the Hopfield recall loop.
//!
//! Each constructor emits a [`NetworkTopology`] with its constraint set
//! already attached: Hopfield nets tie symmetric weight pairs and mask the
//! diagonal, RBMs tie encoder and decoder weights, CNNs tie every kernel
//! offset across patch positions (the Toeplitz weight sharing) plus the
//! feature biases.

use rand::Rng;

use crate::circuitry::{NetworkTopology, NeuronSpec, ParamKey, ParameterTable};
use crate::error::{Error, Result};
use crate::optimizer::ConstraintSet;
use crate::sampler;

/// Fully connected feedforward network: `inputs` input qubits, the given
/// hidden layer widths, then `outputs` output neurons. No ties, no masks.
pub fn shallow(inputs: usize, hidden: &[usize], outputs: usize) -> Result<NetworkTopology> {
    if inputs == 0 || outputs == 0 || hidden.iter().any(|&w| w == 0) {
        return Err(Error::contract("layer sizes must be at least 1"));
    }
    let mut layers = Vec::new();
    let mut prev: Vec<usize> = (0..inputs).collect();
    let mut next_id = inputs;
    for (li, &width) in hidden.iter().chain(std::iter::once(&outputs)).enumerate() {
        let mut layer = Vec::with_capacity(width);
        for _ in 0..width {
            layer.push(NeuronSpec {
                id: next_id,
                incoming: prev.clone(),
                layer: li,
            });
            next_id += 1;
        }
        prev = layer.iter().map(|n| n.id).collect();
        layers.push(layer);
    }
    NetworkTopology::new(inputs, layers, ConstraintSet::new(), false)
}

/// Hopfield associative memory, unrolled one step: `n` input qubits feed `n`
/// output neurons. Output `j` reads every input except `j` (the diagonal is
/// masked), and symmetric weight pairs `(i→j, j→i)` are tied. The recurrent
/// flag marks that outputs feed back as inputs during recall.
pub fn hopfield(n: usize) -> Result<NetworkTopology> {
    if n < 2 {
        return Err(Error::contract("a Hopfield network needs at least 2 units"));
    }
    let mut layer = Vec::with_capacity(n);
    for j in 0..n {
        layer.push(NeuronSpec {
            id: n + j,
            incoming: (0..n).filter(|&i| i != j).collect(),
            layer: 0,
        });
    }
    let mut constraints = ConstraintSet::new();
    for i in 0..n {
        constraints.add_mask(ParamKey::Weight { from: i, to: n + i })?;
        for j in (i + 1)..n {
            constraints.add_tie_group([
                ParamKey::Weight { from: i, to: n + j },
                ParamKey::Weight { from: j, to: n + i },
            ])?;
        }
    }
    NetworkTopology::new(n, vec![layer], constraints, true)
}

/// Restricted Boltzmann machine unrolled to encoder/decoder form: `visible`
/// inputs, `hidden` latent neurons, and `visible` reconstruction neurons,
/// with each encoder weight `v_i → h_j` tied to its decoder mirror
/// `h_j → r_i`. The training target is input reconstruction.
pub fn rbm(visible: usize, hidden: usize) -> Result<NetworkTopology> {
    let top = autoencoder_raw(visible, hidden, true)?;
    Ok(top)
}

/// As [`rbm`] but with the weight sharing removed: separate encoder and
/// decoder weights double the free parameters and the model capacity.
pub fn autoencoder(visible: usize, hidden: usize) -> Result<NetworkTopology> {
    autoencoder_raw(visible, hidden, false)
}

fn autoencoder_raw(visible: usize, hidden: usize, tied: bool) -> Result<NetworkTopology> {
    if visible == 0 || hidden == 0 {
        return Err(Error::contract("layer sizes must be at least 1"));
    }
    let hidden_ids: Vec<usize> = (visible..visible + hidden).collect();
    let hidden_layer: Vec<NeuronSpec> = hidden_ids
        .iter()
        .map(|&id| NeuronSpec {
            id,
            incoming: (0..visible).collect(),
            layer: 0,
        })
        .collect();
    let recon_layer: Vec<NeuronSpec> = (0..visible)
        .map(|i| NeuronSpec {
            id: visible + hidden + i,
            incoming: hidden_ids.clone(),
            layer: 1,
        })
        .collect();
    let mut constraints = ConstraintSet::new();
    if tied {
        for i in 0..visible {
            for j in 0..hidden {
                constraints.add_tie_group([
                    ParamKey::Weight {
                        from: i,
                        to: visible + j,
                    },
                    ParamKey::Weight {
                        from: visible + j,
                        to: visible + hidden + i,
                    },
                ])?;
            }
        }
    }
    NetworkTopology::new(visible, vec![hidden_layer, recon_layer], constraints, false)
}

/// Convolutional network: one feature neuron per kernel position over the
/// `height × width` input grid, with all edges sharing a kernel offset tied
/// together and the feature biases tied across positions, followed by fully
/// connected layers.
pub fn cnn(
    height: usize,
    width: usize,
    kernel: (usize, usize),
    stride: usize,
    fc_hidden: &[usize],
    outputs: usize,
) -> Result<NetworkTopology> {
    let (kh, kw) = kernel;
    if height == 0 || width == 0 || outputs == 0 || fc_hidden.iter().any(|&w| w == 0) {
        return Err(Error::contract("layer sizes must be at least 1"));
    }
    if kh == 0 || kw == 0 || kh > height || kw > width {
        return Err(Error::contract(format!(
            "kernel {kh}x{kw} does not fit a {height}x{width} image"
        )));
    }
    if stride == 0 {
        return Err(Error::contract("stride must be at least 1"));
    }
    let pixels = height * width;
    let fh = (height - kh) / stride + 1;
    let fw = (width - kw) / stride + 1;
    let pixel_id = |r: usize, c: usize| r * width + c;
    let feature_id = |fy: usize, fx: usize| pixels + fy * fw + fx;

    let mut feature_layer = Vec::with_capacity(fh * fw);
    for fy in 0..fh {
        for fx in 0..fw {
            let mut incoming = Vec::with_capacity(kh * kw);
            for dy in 0..kh {
                for dx in 0..kw {
                    incoming.push(pixel_id(fy * stride + dy, fx * stride + dx));
                }
            }
            feature_layer.push(NeuronSpec {
                id: feature_id(fy, fx),
                incoming,
                layer: 0,
            });
        }
    }

    let mut constraints = ConstraintSet::new();
    for dy in 0..kh {
        for dx in 0..kw {
            let group: Vec<ParamKey> = (0..fh)
                .flat_map(|fy| {
                    (0..fw).map(move |fx| ParamKey::Weight {
                        from: pixel_id(fy * stride + dy, fx * stride + dx),
                        to: feature_id(fy, fx),
                    })
                })
                .collect();
            constraints.add_tie_group(group)?;
        }
    }
    constraints.add_tie_group(
        (0..fh * fw).map(|f| ParamKey::Bias { node: pixels + f }),
    )?;

    let mut layers = vec![feature_layer];
    let mut prev: Vec<usize> = (0..fh * fw).map(|f| pixels + f).collect();
    let mut next_id = pixels + fh * fw;
    for (li, &width) in fc_hidden.iter().chain(std::iter::once(&outputs)).enumerate() {
        let mut layer = Vec::with_capacity(width);
        for _ in 0..width {
            layer.push(NeuronSpec {
                id: next_id,
                incoming: prev.clone(),
                layer: li + 1,
            });
            next_id += 1;
        }
        prev = layer.iter().map(|n| n.id).collect();
        layers.push(layer);
    }
    NetworkTopology::new(pixels, layers, constraints, false)
}

/// Feedback rule of the recall loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallMode {
    /// Draw each next bit from its output marginal (the stochastic device).
    Sample,
    /// Threshold each marginal at 0.5 for deterministic trajectories.
    Argmax,
}

/// Iterated Hopfield recall: probe, per-iteration patterns, the marginals
/// that produced them, and whether a fixpoint was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct HopfieldTrajectory {
    pub patterns: Vec<Vec<bool>>,
    pub marginals: Vec<Vec<f64>>,
    pub converged: bool,
}

impl HopfieldTrajectory {
    /// Final pattern of the trajectory.
    pub fn last(&self) -> &[bool] {
        self.patterns.last().expect("trajectory holds the probe")
    }

    pub fn iterations(&self) -> usize {
        self.patterns.len() - 1
    }
}

/// Feed the probe through the network, feed the output back as input, and
/// iterate until two consecutive patterns agree or `max_iters` is exhausted.
pub fn hopfield_recall<R: Rng>(
    top: &NetworkTopology,
    params: &ParameterTable,
    probe: &[bool],
    max_iters: usize,
    mode: RecallMode,
    rng: &mut R,
) -> Result<HopfieldTrajectory> {
    if probe.len() != top.inputs() {
        return Err(Error::contract(format!(
            "probe has {} bits but the network has {} inputs",
            probe.len(),
            top.inputs()
        )));
    }
    if top.outputs() != top.inputs() {
        return Err(Error::contract(
            "recall needs matching input and output widths",
        ));
    }
    let mut trajectory = HopfieldTrajectory {
        patterns: vec![probe.to_vec()],
        marginals: Vec::new(),
        converged: false,
    };
    let mut current = probe.to_vec();
    for _ in 0..max_iters {
        let marginals = sampler::output_marginals(top, params, &current)?;
        let next: Vec<bool> = match mode {
            RecallMode::Sample => marginals.iter().map(|&p| rng.gen_bool(p)).collect(),
            RecallMode::Argmax => marginals.iter().map(|&p| p >= 0.5).collect(),
        };
        trajectory.marginals.push(marginals);
        trajectory.patterns.push(next.clone());
        if next == current {
            trajectory.converged = true;
            break;
        }
        current = next;
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuitry::activation_probability;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shallow_fig5_shape() {
        let top = shallow(4, &[3], 2).unwrap();
        assert_eq!(top.total_qubits(), 9);
        let keys = top.parameter_keys();
        let weights = keys.iter().filter(|k| matches!(k, ParamKey::Weight { .. })).count();
        let biases = keys.iter().filter(|k| matches!(k, ParamKey::Bias { .. })).count();
        assert_eq!((weights, biases), (18, 5));
        top.validate().unwrap();
    }

    #[test]
    fn shallow_single_perceptron() {
        let top = shallow(2, &[], 1).unwrap();
        assert_eq!(top.total_qubits(), 3);
        let weights = top
            .parameter_keys()
            .iter()
            .filter(|k| matches!(k, ParamKey::Weight { .. }))
            .count();
        assert_eq!(weights, 2);
    }

    #[test]
    fn shallow_iris_dimensions() {
        let top = shallow(12, &[5], 3).unwrap();
        assert_eq!(top.total_qubits(), 20);
    }

    #[test]
    fn shallow_rejects_zero_sizes() {
        assert!(shallow(0, &[1], 1).is_err());
        assert!(shallow(1, &[0], 1).is_err());
        assert!(shallow(1, &[], 0).is_err());
    }

    #[test]
    fn hopfield_structure() {
        let top = hopfield(4).unwrap();
        assert_eq!(top.total_qubits(), 8);
        assert!(top.recurrent());
        let weights = top
            .parameter_keys()
            .iter()
            .filter(|k| matches!(k, ParamKey::Weight { .. }))
            .count();
        assert_eq!(weights, 12);
        assert_eq!(top.constraints().ties().len(), 6);
        assert_eq!(top.constraints().masks().len(), 4);
        for i in 0..4 {
            assert!(top
                .constraints()
                .is_masked(ParamKey::Weight { from: i, to: 4 + i }));
        }
        top.validate().unwrap();

        let top = hopfield(9).unwrap();
        let weights = top
            .parameter_keys()
            .iter()
            .filter(|k| matches!(k, ParamKey::Weight { .. }))
            .count();
        assert_eq!(weights, 72);
        assert_eq!(top.constraints().ties().len(), 36);
    }

    #[test]
    fn hopfield_weight_matrix_is_symmetric_after_projection() {
        let n = 5;
        let top = hopfield(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
        top.constraints().check(&params).unwrap();
        for i in 0..n {
            assert_eq!(params.weight(i, n + i), None, "diagonal must be cut");
            for j in 0..n {
                if i != j {
                    assert_eq!(params.weight(i, n + j), params.weight(j, n + i));
                }
            }
        }
    }

    #[test]
    fn rbm_shape_and_ties() {
        let top = rbm(4, 2).unwrap();
        assert_eq!(top.total_qubits(), 10);
        let ties = top.constraints().ties();
        assert_eq!(ties.len(), 8);
        assert!(ties.iter().all(|g| g.len() == 2));
        top.validate().unwrap();

        let top = rbm(12, 2).unwrap();
        assert_eq!(top.total_qubits(), 26);
    }

    #[test]
    fn autoencoder_untied_and_same_shape() {
        let ae = autoencoder(12, 2).unwrap();
        let rb = rbm(12, 2).unwrap();
        assert_eq!(ae.total_qubits(), rb.total_qubits());
        assert!(ae.constraints().ties().is_empty());
        let ae_weights = ae
            .parameter_keys()
            .iter()
            .filter(|k| matches!(k, ParamKey::Weight { .. }))
            .count();
        assert_eq!(ae_weights, 48);
        let rb_groups = rb.constraints().free_groups(&rb.parameter_keys());
        let rb_weight_groups = rb_groups
            .iter()
            .filter(|g| matches!(g[0], ParamKey::Weight { .. }))
            .count();
        assert_eq!(rb_weight_groups, 24);
    }

    #[test]
    fn tied_groups_stay_equal_through_projection() {
        let top = rbm(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
        params.set(ParamKey::Weight { from: 0, to: 3 }, 0.9);
        top.constraints().project(&mut params);
        top.constraints().check(&params).unwrap();
    }

    #[test]
    fn cnn_bars_and_stripes_shape() {
        let top = cnn(3, 3, (2, 2), 1, &[2], 1).unwrap();
        assert_eq!(top.total_qubits(), 9 + 4 + 2 + 1);
        assert_eq!(top.layers()[0].len(), 4, "one feature neuron per patch");
        let ties = top.constraints().ties();
        let kernel_groups = ties
            .iter()
            .filter(|g| matches!(g.iter().next().unwrap(), ParamKey::Weight { .. }))
            .count();
        let bias_groups = ties
            .iter()
            .filter(|g| matches!(g.iter().next().unwrap(), ParamKey::Bias { .. }))
            .count();
        assert_eq!((kernel_groups, bias_groups), (4, 1));
        assert!(ties
            .iter()
            .filter(|g| matches!(g.iter().next().unwrap(), ParamKey::Weight { .. }))
            .all(|g| g.len() == 4));
        // Free coordinates, counted from the construction: 4 kernel ties +
        // 1 bias tie + 8 fc weights + 2 fc biases + 2 output weights + 1
        // output bias.
        let groups = top.constraints().free_groups(&top.parameter_keys());
        assert_eq!(groups.len(), 18);
        top.validate().unwrap();
    }

    #[test]
    fn cnn_rejects_oversized_kernel() {
        assert!(cnn(3, 3, (4, 2), 1, &[], 1).is_err());
        assert!(cnn(3, 3, (2, 2), 0, &[], 1).is_err());
    }

    #[test]
    fn cnn_features_are_shift_covariant() {
        // Tied kernels make feature activations permute under translation by
        // the stride: a pattern confined to the top rows, shifted down by
        // one, lights the lower feature row with identical probabilities.
        let top = cnn(3, 3, (2, 2), 1, &[], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ParameterTable::random(&top, &mut rng, 0.0, 1.0);
        let feature_prob = |input: &[bool], fy: usize, fx: usize| {
            let spec = &top.layers()[0][fy * 2 + fx];
            let w: Vec<f64> = spec
                .incoming
                .iter()
                .map(|&s| params.weight(s, spec.id).unwrap())
                .collect();
            let a: Vec<bool> = spec.incoming.iter().map(|&s| input[s]).collect();
            activation_probability(params.bias(spec.id).unwrap(), &w, &a).unwrap()
        };
        // Pattern in rows 0..2, then shifted down one row.
        let mut pattern = vec![false; 9];
        pattern[0] = true;
        pattern[4] = true;
        let mut shifted = vec![false; 9];
        shifted[3] = true;
        shifted[7] = true;
        for fx in 0..2 {
            let a = feature_prob(&pattern, 0, fx);
            let b = feature_prob(&shifted, 1, fx);
            assert!((a - b).abs() < 1e-15, "feature ({fx}): {a} vs {b}");
        }
    }

    #[test]
    fn recall_zero_iterations_returns_probe() {
        let top = hopfield(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ParameterTable::random(&top, &mut rng, 0.1, 0.9);
        let probe = vec![true, false, true];
        let t = hopfield_recall(&top, &params, &probe, 0, RecallMode::Argmax, &mut rng).unwrap();
        assert_eq!(t.patterns, vec![probe]);
        assert!(t.marginals.is_empty());
        assert!(!t.converged);
    }

    #[test]
    fn recall_reaches_trivial_fixpoint() {
        // All-zero parameters drive every output marginal to 0, so the
        // all-false pattern is a one-step fixpoint from any probe.
        let top = hopfield(3).unwrap();
        let mut params = ParameterTable::new();
        for key in top.parameter_keys() {
            params.set(key, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = hopfield_recall(&top, &params, &[true, true, true], 5, RecallMode::Argmax, &mut rng)
            .unwrap();
        assert!(t.converged);
        assert!(t.last().iter().all(|&b| !b));
        assert!(t.iterations() <= 2);
    }

    #[test]
    fn recall_sampling_is_seed_deterministic() {
        let top = hopfield(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ParameterTable::random(&top, &mut rng, 0.2, 0.8);
        let probe = vec![true, false, true, false];
        let a = hopfield_recall(&top, &params, &probe, 10, RecallMode::Sample, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = hopfield_recall(&top, &params, &probe, 10, RecallMode::Sample, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recall_rejects_bad_probe_or_topology() {
        let top = hopfield(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = ParameterTable::random(&top, &mut rng, 0.1, 0.9);
        assert!(hopfield_recall(&top, &params, &[true], 1, RecallMode::Argmax, &mut rng).is_err());

        let ff = shallow(3, &[], 2).unwrap();
        let p2 = ParameterTable::random(&ff, &mut rng, 0.1, 0.9);
        assert!(hopfield_recall(&ff, &p2, &[true, false, false], 1, RecallMode::Argmax, &mut rng).is_err());
    }
}
