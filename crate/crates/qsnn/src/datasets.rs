//! Data ingestion and binary encoding.
//!
//! UCI-style numeric datasets are binarized per dimension: a 1-D k-means is
//! fitted on the training split only, and each value becomes the one-hot of
//! its nearest center, so a d-dimensional sample turns into `d·k` bits with
//! exactly `d` ones. Boolean features can bypass the clustering and pass
//! through as single bits (used for the zoo dataset, where only `legs` is
//! numeric). MNIST images are pooled to 5×5 and thresholded at the per-image
//! mean, giving 25 input bits.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Which split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Raw numeric dataset before encoding.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.first().map(Vec::len).unwrap_or(0)
    }
}

/// Binary-encoded samples with one-hot targets and the fitted encoder spec,
/// kept so test data can be encoded against training-split centers only.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EncodedDataset {
    pub samples: Vec<(Vec<bool>, Vec<bool>)>,
    pub split: Split,
    pub encoder: Encoder,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-dimension encoding rule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimEncoding {
    /// One-hot of the nearest center (ties resolve to the lower index).
    Centers(Vec<f64>),
    /// Pass a boolean feature through as one bit (nonzero reads 1).
    Identity,
}

impl DimEncoding {
    fn bits(&self) -> usize {
        match self {
            DimEncoding::Centers(c) => c.len(),
            DimEncoding::Identity => 1,
        }
    }
}

/// Fitted encoder: the raw dimensions used and their per-dimension rules.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Encoder {
    pub dims: Vec<(usize, DimEncoding)>,
}

impl Encoder {
    pub fn bits(&self) -> usize {
        self.dims.iter().map(|(_, e)| e.bits()).sum()
    }

    /// Encode one raw sample into its bit vector.
    pub fn encode_sample(&self, sample: &[f64]) -> Result<Vec<bool>> {
        let mut bits = Vec::with_capacity(self.bits());
        for (dim, encoding) in &self.dims {
            let v = *sample.get(*dim).ok_or_else(|| {
                Error::contract(format!("sample has no dimension {dim}"))
            })?;
            match encoding {
                DimEncoding::Centers(centers) => {
                    let hot = nearest_center(v, centers);
                    for i in 0..centers.len() {
                        bits.push(i == hot);
                    }
                }
                DimEncoding::Identity => bits.push(v != 0.0),
            }
        }
        Ok(bits)
    }

    /// Encode a raw split into samples with one-hot class targets.
    pub fn encode_dataset(&self, raw: &RawDataset, split: Split) -> Result<EncodedDataset> {
        let mut samples = Vec::with_capacity(raw.len());
        for (features, &label) in raw.features.iter().zip(&raw.labels) {
            let bits = self.encode_sample(features)?;
            samples.push((bits, one_hot(label, raw.n_classes)));
        }
        Ok(EncodedDataset {
            samples,
            split,
            encoder: self.clone(),
        })
    }
}

/// One-hot target vector.
pub fn one_hot(label: usize, classes: usize) -> Vec<bool> {
    (0..classes).map(|c| c == label).collect()
}

/// Index of the nearest center; ties go to the lower index.
fn nearest_center(v: f64, centers: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centers.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Encoding knobs for [`fit_encoder`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EncodingConfig {
    /// Cluster count per numeric dimension.
    pub k: usize,
    /// Raw dimension indices to keep (all when absent).
    #[serde(default)]
    pub feature_subset: Option<Vec<usize>>,
    /// Raw dimensions passed through as identity bits instead of clustering.
    #[serde(default)]
    pub identity_dims: Vec<usize>,
    /// Per-dimension overrides of `k`, keyed by raw dimension index.
    #[serde(default)]
    pub per_dim_k: BTreeMap<usize, usize>,
}

impl EncodingConfig {
    pub fn uniform(k: usize) -> EncodingConfig {
        EncodingConfig {
            k,
            feature_subset: None,
            identity_dims: Vec::new(),
            per_dim_k: BTreeMap::new(),
        }
    }
}

/// Fit per-dimension encoders on a training split.
pub fn fit_encoder<R: Rng>(
    train: &RawDataset,
    config: &EncodingConfig,
    rng: &mut R,
) -> Result<Encoder> {
    if train.is_empty() {
        return Err(Error::contract("cannot fit an encoder on an empty split"));
    }
    let dims: Vec<usize> = match &config.feature_subset {
        Some(subset) => subset.clone(),
        None => (0..train.dims()).collect(),
    };
    let mut encoders = Vec::with_capacity(dims.len());
    for dim in dims {
        if dim >= train.dims() {
            return Err(Error::contract(format!(
                "feature subset references dimension {dim} but the data has {}",
                train.dims()
            )));
        }
        if config.identity_dims.contains(&dim) {
            encoders.push((dim, DimEncoding::Identity));
            continue;
        }
        let k = config.per_dim_k.get(&dim).copied().unwrap_or(config.k);
        let values: Vec<f64> = train.features.iter().map(|f| f[dim]).collect();
        let centers = kmeans_1d(&values, k, rng)?;
        encoders.push((dim, DimEncoding::Centers(centers)));
    }
    Ok(Encoder { dims: encoders })
}

/// 1-D k-means: k-means++ seeding, then Lloyd iterations until the
/// assignment reaches a fixpoint or 100 rounds. Empty clusters are reseeded
/// to the point farthest from its current center. Centers return sorted.
pub fn kmeans_1d<R: Rng>(values: &[f64], k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::contract("k must be at least 1"));
    }
    if values.len() < k {
        return Err(Error::contract(format!(
            "{} values cannot seed {k} clusters",
            values.len()
        )));
    }

    // k-means++ seeding.
    let mut centers = Vec::with_capacity(k);
    centers.push(values[rng.gen_range(0..values.len())]);
    while centers.len() < k {
        let d2: Vec<f64> = values
            .iter()
            .map(|&v| {
                centers
                    .iter()
                    .map(|&c| (v - c) * (v - c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total == 0.0 {
            // All remaining mass sits on existing centers; any point works.
            centers.push(values[rng.gen_range(0..values.len())]);
            continue;
        }
        let mut pick = rng.gen_range(0.0..total);
        let mut chosen = values.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if pick < d {
                chosen = i;
                break;
            }
            pick -= d;
        }
        centers.push(values[chosen]);
    }

    let mut assignment = vec![usize::MAX; values.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let a = nearest_center(v, &centers);
            if assignment[i] != a {
                assignment[i] = a;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for (&v, &a) in values.iter().zip(&assignment) {
            sums[a] += v;
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            } else {
                // Reseed to the point farthest from its assigned center.
                let far = values
                    .iter()
                    .enumerate()
                    .max_by(|(i, &a), (j, &b)| {
                        let da = (a - centers[assignment[*i]]).abs();
                        let db = (b - centers[assignment[*j]]).abs();
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(_, &v)| v)
                    .unwrap_or(centers[c]);
                centers[c] = far;
            }
        }
    }
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(centers)
}

/// Within-cluster sum of squared distances for a fixed center set.
pub fn kmeans_sse(values: &[f64], centers: &[f64]) -> f64 {
    values
        .iter()
        .map(|&v| {
            let c = centers[nearest_center(v, centers)];
            (v - c) * (v - c)
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Bars and stripes
// ---------------------------------------------------------------------------

/// Which stripe families count as positive patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Patterns constant within each column (2^n patterns).
    Vertical,
    /// Patterns constant within each row (2^n patterns).
    Horizontal,
    /// Union of both, with the all-0 and all-1 overlap deduplicated
    /// (2^(n+1) - 2 patterns).
    Both,
}

/// Bars-and-stripes patterns over an `n × n` grid, vertical convention:
/// 2^n positive patterns (8 for n = 3) against all remaining bitmaps.
/// Bits are row-major, matching the CNN pixel layout.
pub fn bars_and_stripes(n: usize) -> Result<(Vec<Vec<bool>>, Vec<Vec<bool>>)> {
    bars_and_stripes_oriented(n, Orientation::Vertical)
}

/// As [`bars_and_stripes`] with an explicit orientation convention.
pub fn bars_and_stripes_oriented(
    n: usize,
    orientation: Orientation,
) -> Result<(Vec<Vec<bool>>, Vec<Vec<bool>>)> {
    if n < 2 {
        return Err(Error::contract("grid side must be at least 2"));
    }
    if n * n > 20 {
        return Err(Error::contract(
            "enumerating the negative class past a 4x4 grid is not supported",
        ));
    }
    let vertical = |mask: usize| -> Vec<bool> {
        (0..n * n).map(|i| (mask >> (i % n)) & 1 == 1).collect()
    };
    let horizontal = |mask: usize| -> Vec<bool> {
        (0..n * n).map(|i| (mask >> (i / n)) & 1 == 1).collect()
    };
    let mut positives: Vec<Vec<bool>> = Vec::new();
    match orientation {
        Orientation::Vertical => {
            positives.extend((0..1usize << n).map(vertical));
        }
        Orientation::Horizontal => {
            positives.extend((0..1usize << n).map(horizontal));
        }
        Orientation::Both => {
            positives.extend((0..1usize << n).map(vertical));
            for mask in 0..1usize << n {
                let p = horizontal(mask);
                if !positives.contains(&p) {
                    positives.push(p);
                }
            }
        }
    }
    let is_positive = |bits: &Vec<bool>| positives.contains(bits);
    let mut negatives = Vec::new();
    for x in 0..1usize << (n * n) {
        let bits: Vec<bool> = (0..n * n).map(|i| (x >> i) & 1 == 1).collect();
        if !is_positive(&bits) {
            negatives.push(bits);
        }
    }
    Ok((positives, negatives))
}

// ---------------------------------------------------------------------------
// UCI loading
// ---------------------------------------------------------------------------

/// Supported UCI datasets and their on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UciName {
    /// Headered CSV: 4 numeric columns, class name last.
    Iris,
    /// Headered CSV: 13 numeric columns, class label last.
    Wine,
    /// Classic headerless `zoo.data`: animal name, 16 features, type 1..7.
    Zoo,
}

impl UciName {
    /// Raw dimension index of the zoo `legs` feature, the only numeric one.
    pub const ZOO_LEGS_DIM: usize = 12;

    /// The boolean dimensions of the zoo dataset (all but `legs`).
    pub fn zoo_identity_dims() -> Vec<usize> {
        (0..16).filter(|&d| d != Self::ZOO_LEGS_DIM).collect()
    }
}

/// Load a UCI dataset from a local file. Class labels are mapped to indices
/// in order of first appearance.
pub fn load_uci(name: UciName, path: &Path) -> Result<RawDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let has_header = !matches!(name, UciName::Zoo);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_order: Vec<String> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        let fields: Vec<&str> = record.iter().collect();
        let (feature_fields, class_field) = match name {
            UciName::Iris | UciName::Wine => {
                let (head, tail) = fields.split_at(fields.len() - 1);
                (head.to_vec(), tail[0])
            }
            UciName::Zoo => {
                // Drop the leading animal name, class is last.
                let (head, tail) = fields[1..].split_at(fields.len() - 2);
                (head.to_vec(), tail[0])
            }
        };
        let row: Vec<f64> = feature_fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Document(format!("{}: non-numeric feature {f:?}", path.display()))
                })
            })
            .collect::<Result<_>>()?;
        let class = class_field.to_string();
        let next = class_ids.len();
        let id = *class_ids.entry(class.clone()).or_insert_with(|| {
            class_order.push(class);
            next
        });
        features.push(row);
        labels.push(id);
    }
    if features.is_empty() {
        return Err(Error::Document(format!("{}: no data rows", path.display())));
    }
    let dims = features[0].len();
    if features.iter().any(|f| f.len() != dims) {
        return Err(Error::Document(format!(
            "{}: inconsistent column counts",
            path.display()
        )));
    }
    Ok(RawDataset {
        features,
        labels,
        n_classes: class_ids.len(),
    })
}

/// Shuffled stratified split: within each class the rows are shuffled and
/// split so the per-class train fraction lands within one sample of the
/// global fraction.
pub fn stratified_split<R: Rng>(
    raw: &RawDataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(RawDataset, RawDataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::contract(format!(
            "test fraction {test_fraction} must lie in [0, 1)"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in raw.labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (_, mut rows) in by_class {
        rows.shuffle(rng);
        let n_test = ((rows.len() as f64) * test_fraction).round() as usize;
        let n_test = n_test.min(rows.len().saturating_sub(1));
        test_idx.extend_from_slice(&rows[..n_test]);
        train_idx.extend_from_slice(&rows[n_test..]);
    }
    train_idx.shuffle(rng);
    test_idx.shuffle(rng);
    let take = |idx: &[usize]| RawDataset {
        features: idx.iter().map(|&i| raw.features[i].clone()).collect(),
        labels: idx.iter().map(|&i| raw.labels[i]).collect(),
        n_classes: raw.n_classes,
    };
    Ok((take(&train_idx), take(&test_idx)))
}

// ---------------------------------------------------------------------------
// MNIST
// ---------------------------------------------------------------------------

/// Parsed IDX image file: 28×28 grayscale images.
struct IdxImages {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 16 {
        return Err(Error::Document(format!("{}: truncated IDX file", path.display())));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != 0x0000_0803 {
        return Err(Error::Document(format!(
            "{}: bad image magic {magic:#x}",
            path.display()
        )));
    }
    let count = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rows = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_be_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Document(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(IdxImages {
        rows,
        cols,
        data: bytes[16..expected].to_vec(),
    })
}

fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if bytes.len() < 8 {
        return Err(Error::Document(format!("{}: truncated IDX file", path.display())));
    }
    let magic = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if magic != 0x0000_0801 {
        return Err(Error::Document(format!(
            "{}: bad label magic {magic:#x}",
            path.display()
        )));
    }
    let count = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + count {
        return Err(Error::Document(format!("{}: truncated labels", path.display())));
    }
    Ok(bytes[8..8 + count].to_vec())
}

/// Pool one image to 5×5 by block means over the central crop and binarize
/// at the per-image mean of the pooled values.
pub fn binarize_image(pixels: &[u8], rows: usize, cols: usize) -> Vec<bool> {
    const GRID: usize = 5;
    let crop = (rows.min(cols) / GRID) * GRID;
    let r0 = (rows - crop) / 2;
    let c0 = (cols - crop) / 2;
    let block = crop / GRID;
    let mut pooled = [0.0f64; GRID * GRID];
    for by in 0..GRID {
        for bx in 0..GRID {
            let mut sum = 0.0;
            for dy in 0..block {
                for dx in 0..block {
                    let r = r0 + by * block + dy;
                    let c = c0 + bx * block + dx;
                    sum += pixels[r * cols + c] as f64;
                }
            }
            pooled[by * GRID + bx] = sum / (block * block) as f64;
        }
    }
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    pooled.iter().map(|&v| v > mean).collect()
}

/// Prepare an MNIST subset: keep the listed digit classes, draw seeded random
/// train/test subsets, and binarize each image to 25 bits.
pub fn mnist_prepare<R: Rng>(
    images_path: &Path,
    labels_path: &Path,
    classes: &[u8],
    n_train: usize,
    n_test: usize,
    rng: &mut R,
) -> Result<(EncodedDataset, EncodedDataset)> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    let per_image = images.rows * images.cols;
    let available = labels.len().min(images.data.len() / per_image);

    let class_index: BTreeMap<u8, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let mut kept: Vec<usize> = (0..available)
        .filter(|&i| class_index.contains_key(&labels[i]))
        .collect();
    if kept.len() < n_train + n_test {
        return Err(Error::contract(format!(
            "only {} samples of the requested classes, need {}",
            kept.len(),
            n_train + n_test
        )));
    }
    kept.shuffle(rng);

    let encoder = Encoder { dims: Vec::new() };
    let build = |idx: &[usize], split: Split| -> EncodedDataset {
        let samples = idx
            .iter()
            .map(|&i| {
                let pixels = &images.data[i * per_image..(i + 1) * per_image];
                let bits = binarize_image(pixels, images.rows, images.cols);
                let target = one_hot(class_index[&labels[i]], classes.len());
                (bits, target)
            })
            .collect();
        EncodedDataset {
            samples,
            split,
            encoder: encoder.clone(),
        }
    };
    let train = build(&kept[..n_train], Split::Train);
    let test = build(&kept[n_train..n_train + n_test], Split::Test);
    Ok((train, test))
}
