//! Dataset assembly for experiment runs.

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qsnn::datasets::{
    self, bars_and_stripes_oriented, fit_encoder, load_uci, mnist_prepare, stratified_split, Split,
};
use qsnn::sampler::EvalMetric;

use crate::config::{DatasetConfig, ModelConfig};

pub type Samples = Vec<(Vec<bool>, Vec<bool>)>;

/// Train/eval splits plus task metadata derived from the config.
pub struct PreparedData {
    pub train: Samples,
    pub eval: Samples,
    pub metric: EvalMetric,
    /// Patterns a Hopfield run memorizes; empty otherwise.
    pub stored_patterns: Vec<Vec<bool>>,
}

/// Column-stripe patterns replicated over rows: the alternating pattern
/// starting at 1 and its complement.
pub fn stripe_patterns(side: usize) -> Vec<Vec<bool>> {
    let a: Vec<bool> = (0..side * side).map(|i| (i % side) % 2 == 0).collect();
    let b: Vec<bool> = a.iter().map(|&x| !x).collect();
    vec![a, b]
}

/// Every one-bit corruption of `pattern`.
pub fn one_bit_corruptions(pattern: &[bool]) -> Vec<Vec<bool>> {
    (0..pattern.len())
        .map(|i| {
            let mut p = pattern.to_vec();
            p[i] = !p[i];
            p
        })
        .collect()
}

/// Assemble the train and eval sets for one seed.
///
/// Splitting, encoder fitting, and any sampling derive from the run seed, so
/// every seed sees its own split; reconstruction models train against their
/// own inputs.
pub fn prepare(dataset: &DatasetConfig, model: &ModelConfig, seed: u64) -> anyhow::Result<PreparedData> {
    let mut data = prepare_raw(dataset, seed)?;
    if model.is_reconstruction() {
        for (bits, target) in data.train.iter_mut().chain(data.eval.iter_mut()) {
            *target = bits.clone();
        }
        data.metric = EvalMetric::ReconstructionMse;
    }
    Ok(data)
}

fn prepare_raw(dataset: &DatasetConfig, seed: u64) -> anyhow::Result<PreparedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    match dataset {
        DatasetConfig::Uci {
            name,
            path,
            test_fraction,
            encoding,
        } => {
            let raw = load_uci(*name, path).context("loading UCI data")?;
            let (train_raw, test_raw) = stratified_split(&raw, *test_fraction, &mut rng)?;
            let encoder = fit_encoder(&train_raw, &encoding.to_config(), &mut rng)?;
            let train = encoder.encode_dataset(&train_raw, Split::Train)?;
            let test = encoder.encode_dataset(&test_raw, Split::Test)?;
            Ok(PreparedData {
                train: train.samples,
                eval: test.samples,
                metric: EvalMetric::Accuracy,
                stored_patterns: Vec::new(),
            })
        }
        DatasetConfig::Mnist {
            images,
            labels,
            classes,
            train,
            test,
        } => {
            let (train_set, test_set) =
                mnist_prepare(images, labels, classes, *train, *test, &mut rng)?;
            Ok(PreparedData {
                train: train_set.samples,
                eval: test_set.samples,
                metric: EvalMetric::Accuracy,
                stored_patterns: Vec::new(),
            })
        }
        DatasetConfig::BarsAndStripes {
            side,
            orientation,
            oversample_positives,
        } => {
            let (pos, neg) = bars_and_stripes_oriented(*side, *orientation)?;
            let mut eval: Samples = Vec::with_capacity(pos.len() + neg.len());
            for p in &pos {
                eval.push((p.clone(), vec![true]));
            }
            for n in &neg {
                eval.push((n.clone(), vec![false]));
            }
            let mut train = eval.clone();
            for _ in 0..*oversample_positives {
                for p in &pos {
                    train.push((p.clone(), vec![true]));
                }
            }
            Ok(PreparedData {
                train,
                eval,
                metric: EvalMetric::Accuracy,
                stored_patterns: Vec::new(),
            })
        }
        DatasetConfig::OneDot { height, width } => {
            let bits = height * width;
            if bits > 20 {
                bail!("one_dot grids past 20 cells are not enumerable");
            }
            let all: Samples = (0..1usize << bits)
                .map(|x| {
                    let pattern: Vec<bool> = (0..bits).map(|i| (x >> i) & 1 == 1).collect();
                    let ones = pattern.iter().filter(|&&b| b).count();
                    (pattern, vec![ones == 1])
                })
                .collect();
            Ok(PreparedData {
                train: all.clone(),
                eval: all,
                metric: EvalMetric::Accuracy,
                stored_patterns: Vec::new(),
            })
        }
        DatasetConfig::Xor => {
            let all: Samples = vec![
                (vec![false, false], vec![false]),
                (vec![false, true], vec![true]),
                (vec![true, false], vec![true]),
                (vec![true, true], vec![false]),
            ];
            Ok(PreparedData {
                train: all.clone(),
                eval: all,
                metric: EvalMetric::Accuracy,
                stored_patterns: Vec::new(),
            })
        }
        DatasetConfig::HopfieldStripes {
            side,
            augment_corrupted,
        } => {
            let stored = stripe_patterns(*side);
            let mut train: Samples = stored.iter().map(|p| (p.clone(), p.clone())).collect();
            if *augment_corrupted {
                for pattern in &stored {
                    for probe in one_bit_corruptions(pattern) {
                        train.push((probe, pattern.clone()));
                    }
                }
            }
            let eval: Samples = stored.iter().map(|p| (p.clone(), p.clone())).collect();
            Ok(PreparedData {
                train,
                eval,
                metric: EvalMetric::ReconstructionMse,
                stored_patterns: stored,
            })
        }
    }
}

/// Encode a dataset without building a model (the `encode` subcommand).
pub fn encode_only(
    dataset: &DatasetConfig,
    seed: u64,
) -> anyhow::Result<(datasets::EncodedDataset, datasets::EncodedDataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    match dataset {
        DatasetConfig::Uci {
            name,
            path,
            test_fraction,
            encoding,
        } => {
            let raw = load_uci(*name, path)?;
            let (train_raw, test_raw) = stratified_split(&raw, *test_fraction, &mut rng)?;
            let encoder = fit_encoder(&train_raw, &encoding.to_config(), &mut rng)?;
            Ok((
                encoder.encode_dataset(&train_raw, Split::Train)?,
                encoder.encode_dataset(&test_raw, Split::Test)?,
            ))
        }
        DatasetConfig::Mnist {
            images,
            labels,
            classes,
            train,
            test,
        } => Ok(mnist_prepare(images, labels, classes, *train, *test, &mut rng)?),
        other => bail!("encode supports uci and mnist sources, got {other:?}"),
    }
}
