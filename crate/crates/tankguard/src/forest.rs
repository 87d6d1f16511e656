//! Random forest classifier, built from scratch.
//!
//! Bagging over seeded per-tree streams, Gini-impurity split selection
//! over a fresh random feature subset at every node, majority-vote
//! prediction, and stratified k-fold grid search over the hyperparameter
//! grid. Per-tree streams are derived from `(seed, tree index)`, so
//! parallel and serial training produce identical forests.

use std::cmp::Ordering;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::seeds;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("training set contains a single class; both references are required")]
    SingleClass,
    #[error("impurity is undefined for zero samples")]
    UndefinedImpurity,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("invalid hyperparameters: {0}")]
    BadHyperparams(String),
    #[error("stratified {k}-fold split impossible: class {class} has only {count} samples")]
    TooFewForFolds { class: u8, count: usize, k: usize },
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Tunable training parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperparams {
    pub n_trees: usize,
    /// `None` grows every tree to purity.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn at random for each split.
    pub features_per_split: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: 2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, feature_count: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::BadHyperparams("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::BadHyperparams(
                "min_samples_split must be >= 2".into(),
            ));
        }
        if self.features_per_split == 0 || self.features_per_split > feature_count {
            return Err(ForestError::BadHyperparams(format!(
                "features_per_split must be in 1..={feature_count}"
            )));
        }
        Ok(())
    }

    pub fn depth_label(&self) -> String {
        match self.max_depth {
            None => "none".to_string(),
            Some(d) => d.to_string(),
        }
    }
}

/// One node of a fitted decision tree.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        label: u8,
        /// (normal, anomalous) sample counts at fit time.
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        /// Samples with `feature <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn route(&self, features: &[f64]) -> u8 {
        match self {
            TreeNode::Leaf { label, .. } => *label,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if features[*feature] <= *threshold {
                    left.route(features)
                } else {
                    right.route(features)
                }
            }
        }
    }

    fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }
}

/// Trained ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

/// Gini impurity of a node, `1 - sum(f_i^2)`, over any class counts.
pub fn gini(class_counts: &[usize]) -> Result<f64, ForestError> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(ForestError::UndefinedImpurity);
    }
    let total = total as f64;
    let sum_sq: f64 = class_counts
        .iter()
        .map(|&c| {
            let f = c as f64 / total;
            f * f
        })
        .sum();
    Ok(1.0 - sum_sq)
}

fn gini2(counts: [usize; 2]) -> f64 {
    let total = (counts[0] + counts[1]) as f64;
    let f0 = counts[0] as f64 / total;
    let f1 = counts[1] as f64 / total;
    1.0 - f0 * f0 - f1 * f1
}

/// A candidate split and the size-weighted mean impurity it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub weighted_impurity: f64,
}

/// Best (feature, threshold) over the candidate features, minimizing the
/// size-weighted mean of child impurities. Thresholds are midpoints
/// between consecutive distinct sorted values. Returns `None` when no
/// split yields two non-empty children or none strictly improves on the
/// parent impurity. Ties keep the earliest feature in `feature_subset`
/// order, then the lowest threshold.
pub fn best_split(
    features: &[Vec<f64>],
    labels: &[u8],
    indices: &[usize],
    feature_subset: &[usize],
) -> Option<Split> {
    let total = indices.len();
    if total < 2 || feature_subset.is_empty() {
        return None;
    }
    let mut parent = [0usize; 2];
    for &i in indices {
        parent[labels[i] as usize] += 1;
    }
    let parent_impurity = gini2(parent);

    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(total);
    for &feature in feature_subset {
        column.clear();
        column.extend(indices.iter().map(|&i| (features[i][feature], labels[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = [0usize; 2];
        let mut right = parent;
        for j in 0..total - 1 {
            let (value, label) = column[j];
            left[label as usize] += 1;
            right[label as usize] -= 1;
            let next = column[j + 1].0;
            if next == value {
                continue;
            }
            let mut threshold = value + (next - value) / 2.0;
            if threshold >= next {
                // adjacent floats: keep the cut strictly below `next`
                threshold = value;
            }
            let n_left = (j + 1) as f64;
            let n_right = (total - j - 1) as f64;
            let weighted =
                (n_left * gini2(left) + n_right * gini2(right)) / total as f64;
            if best.is_none_or(|b| weighted < b.weighted_impurity) {
                best = Some(Split {
                    feature,
                    threshold,
                    weighted_impurity: weighted,
                });
            }
        }
    }
    best.filter(|b| b.weighted_impurity < parent_impurity)
}

fn majority_leaf(counts: [usize; 2]) -> TreeNode {
    // a tied leaf keeps the lower class index; undecided ensembles still
    // alarm through the vote-level tie rule
    let label = u8::from(counts[1] > counts[0]);
    TreeNode::Leaf { label, counts }
}

/// Grows one tree on a bootstrap sample.
///
/// Each node draws a fresh random subset of `features_per_split`
/// candidate features; growth stops at purity, `max_depth`, fewer than
/// `min_samples_split` samples, or when no split improves impurity.
pub fn grow_tree(
    features: &[Vec<f64>],
    labels: &[u8],
    bootstrap: &[usize],
    params: &Hyperparams,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let feature_count = features.first().map_or(0, Vec::len);
    grow_node(features, labels, bootstrap.to_vec(), params, rng, feature_count, 0)
}

fn grow_node(
    features: &[Vec<f64>],
    labels: &[u8],
    indices: Vec<usize>,
    params: &Hyperparams,
    rng: &mut ChaCha8Rng,
    feature_count: usize,
    depth: usize,
) -> TreeNode {
    let mut counts = [0usize; 2];
    for &i in &indices {
        counts[labels[i] as usize] += 1;
    }
    let pure = counts[0] == 0 || counts[1] == 0;
    let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
    if pure || depth_capped || indices.len() < params.min_samples_split {
        return majority_leaf(counts);
    }

    let subset = sample_features(rng, feature_count, params.features_per_split);
    let Some(split) = best_split(features, labels, &indices, &subset) else {
        return majority_leaf(counts);
    };

    let (left, right): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| features[i][split.feature] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow_node(features, labels, left, params, rng, feature_count, depth + 1)),
        right: Box::new(grow_node(features, labels, right, params, rng, feature_count, depth + 1)),
    }
}

/// Random feature subset, ascending so tie-breaking does not depend on
/// draw order.
fn sample_features(rng: &mut ChaCha8Rng, feature_count: usize, m: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..feature_count).collect();
    all.shuffle(rng);
    all.truncate(m);
    all.sort_unstable();
    all
}

pub(crate) fn bootstrap_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn check_classes(labels: &[u8]) -> Result<(), ForestError> {
    if labels.is_empty() {
        return Err(ForestError::EmptyTraining);
    }
    if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
        return Err(ForestError::SingleClass);
    }
    Ok(())
}

fn fit_matrix(
    features: &[Vec<f64>],
    labels: &[u8],
    params: &Hyperparams,
    seed: u64,
) -> Result<Forest, ForestError> {
    check_classes(labels)?;
    params.validate(features[0].len())?;
    let n = labels.len();
    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|tree_index| {
            let mut rng = seeds::stream(seed, &format!("tree:{tree_index}"));
            let bootstrap = bootstrap_indices(&mut rng, n);
            grow_tree(features, labels, &bootstrap, params, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        hyperparams: params.clone(),
        seed,
    })
}

/// Fits an ensemble: each tree gets its own bootstrap of the full
/// training set, drawn from a stream derived from `(seed, tree index)`.
pub fn fit_forest(
    training: &Dataset,
    params: &Hyperparams,
    seed: u64,
) -> Result<Forest, ForestError> {
    fit_matrix(&training.feature_rows(), &training.labels(), params, seed)
}

/// Majority vote over the ensemble; an exact tie is anomalous.
pub fn predict(forest: &Forest, features: &[f64]) -> u8 {
    let anomalous_votes = forest
        .trees
        .iter()
        .filter(|tree| tree.route(features) == 1)
        .count();
    u8::from(anomalous_votes * 2 >= forest.trees.len())
}

/// Mean validation accuracy of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub params: Hyperparams,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: Hyperparams,
    /// One entry per grid cell, in grid order.
    pub cells: Vec<GridCell>,
}

impl GridSearchResult {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "n_trees,max_depth,min_samples_split,features_per_split,mean_accuracy"
        )?;
        for cell in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{:.6}",
                cell.params.n_trees,
                cell.params.depth_label(),
                cell.params.min_samples_split,
                cell.params.features_per_split,
                cell.mean_accuracy,
            )?;
        }
        Ok(())
    }
}

/// Stratified fold assignment: each class is shuffled and dealt
/// round-robin, so fold class shares match the set's.
pub(crate) fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut seeds::stream(seed, &format!("folds:{class}")));
        for (position, index) in members.into_iter().enumerate() {
            folds[position % k].push(index);
        }
    }
    folds
}

/// Preference order between evaluated cells: higher mean accuracy, then
/// fewer trees, then shallower depth, then grid order.
pub(crate) fn prefer(
    a: (&GridCell, usize),
    b: (&GridCell, usize),
) -> Ordering {
    let depth = |cell: &GridCell| cell.params.max_depth.unwrap_or(usize::MAX);
    b.0.mean_accuracy
        .total_cmp(&a.0.mean_accuracy)
        .then_with(|| a.0.params.n_trees.cmp(&b.0.params.n_trees))
        .then_with(|| depth(a.0).cmp(&depth(b.0)))
        .then_with(|| a.1.cmp(&b.1))
}

/// Stratified k-fold cross-validation over every grid cell; returns the
/// winning cell and all per-cell mean accuracies.
pub fn grid_search(
    training: &Dataset,
    grid: &[Hyperparams],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult, ForestError> {
    if grid.is_empty() {
        return Err(ForestError::EmptyGrid);
    }
    if k < 2 {
        return Err(ForestError::BadHyperparams("fold count must be >= 2".into()));
    }
    let features = training.feature_rows();
    let labels = training.labels();
    check_classes(&labels)?;
    let feature_count = features[0].len();
    for params in grid {
        params.validate(feature_count)?;
    }
    for class in [0u8, 1u8] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < k {
            return Err(ForestError::TooFewForFolds { class, count, k });
        }
    }

    let folds = stratified_folds(&labels, k, seed);
    let cells: Vec<GridCell> = grid
        .par_iter()
        .enumerate()
        .map(|(cell_index, params)| {
            let mut accuracy_sum = 0.0;
            for (fold_index, fold) in folds.iter().enumerate() {
                let train_rows: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != fold_index)
                    .flat_map(|(_, f)| f.iter().copied())
                    .collect();
                let fold_features: Vec<Vec<f64>> =
                    train_rows.iter().map(|&i| features[i].clone()).collect();
                let fold_labels: Vec<u8> = train_rows.iter().map(|&i| labels[i]).collect();
                let forest = fit_matrix(
                    &fold_features,
                    &fold_labels,
                    params,
                    seeds::derive_seed(seed, &format!("cell:{cell_index}:fold:{fold_index}")),
                )
                .expect("fold retains both classes by stratification");
                let correct = fold
                    .iter()
                    .filter(|&&i| predict(&forest, &features[i]) == labels[i])
                    .count();
                accuracy_sum += correct as f64 / fold.len() as f64;
            }
            GridCell {
                params: params.clone(),
                mean_accuracy: accuracy_sum / k as f64,
            }
        })
        .collect();

    let best = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .min_by(|a, b| prefer(*a, *b))
        .map(|(c, _)| c.params.clone())
        .expect("grid is non-empty");
    Ok(GridSearchResult { best, cells })
}

impl Forest {
    /// Self-describing text format: header, then each tree's nodes in
    /// preorder (`S feature threshold` with the left subtree first, or
    /// `L label n0 n1`).
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "tankguard-forest v1")?;
        writeln!(out, "seed {}", self.seed)?;
        writeln!(out, "n_trees {}", self.hyperparams.n_trees)?;
        writeln!(out, "max_depth {}", self.hyperparams.depth_label())?;
        writeln!(out, "min_samples_split {}", self.hyperparams.min_samples_split)?;
        writeln!(out, "features_per_split {}", self.hyperparams.features_per_split)?;
        for (i, tree) in self.trees.iter().enumerate() {
            writeln!(out, "tree {i} nodes {}", tree.node_count())?;
            write_node(out, tree)?;
        }
        writeln!(out, "end")
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        let mut buffer = Vec::new();
        self.write_text(&mut buffer).map_err(|source| ForestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, buffer).map_err(|source| ForestError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ForestError> {
        let file = std::fs::File::open(path).map_err(|source| ForestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_text(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_text<R: BufRead>(reader: R, path: &str) -> Result<Self, ForestError> {
        let mut lines = Lines::new(reader, path)?;
        lines.expect_exact("tankguard-forest v1")?;
        let seed: u64 = lines.expect_field("seed")?;
        let n_trees: usize = lines.expect_field("n_trees")?;
        let max_depth = {
            let raw = lines.expect_raw_field("max_depth")?;
            if raw == "none" {
                None
            } else {
                Some(raw.parse().map_err(|_| lines.error(format!("bad max_depth `{raw}`")))?)
            }
        };
        let min_samples_split: usize = lines.expect_field("min_samples_split")?;
        let features_per_split: usize = lines.expect_field("features_per_split")?;

        let mut trees = Vec::with_capacity(n_trees);
        for expected in 0..n_trees {
            let header = lines.next_line()?;
            let mut parts = header.split_whitespace();
            if parts.next() != Some("tree") {
                return Err(lines.error(format!("expected `tree {expected}`, got `{header}`")));
            }
            let index: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| lines.error("missing tree index".to_string()))?;
            if index != expected {
                return Err(lines.error(format!("expected tree {expected}, got {index}")));
            }
            trees.push(read_node(&mut lines)?);
        }
        lines.expect_exact("end")?;
        Ok(Forest {
            trees,
            hyperparams: Hyperparams {
                n_trees,
                max_depth,
                min_samples_split,
                features_per_split,
            },
            seed,
        })
    }
}

fn write_node<W: Write>(out: &mut W, node: &TreeNode) -> std::io::Result<()> {
    match node {
        TreeNode::Leaf { label, counts } => writeln!(out, "L {label} {} {}", counts[0], counts[1]),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "S {feature} {threshold}")?;
            write_node(out, left)?;
            write_node(out, right)
        }
    }
}

fn read_node<R: BufRead>(lines: &mut Lines<R>) -> Result<TreeNode, ForestError> {
    let line = lines.next_line()?;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some("L") => {
            let mut field = || -> Result<usize, ForestError> {
                parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| lines.error(format!("bad leaf line `{line}`")))
            };
            let label = field()? as u8;
            let n0 = field()?;
            let n1 = field()?;
            if label > 1 {
                return Err(lines.error(format!("bad leaf label {label}")));
            }
            Ok(TreeNode::Leaf {
                label,
                counts: [n0, n1],
            })
        }
        Some("S") => {
            let feature: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| lines.error(format!("bad split line `{line}`")))?;
            let threshold: f64 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| lines.error(format!("bad split line `{line}`")))?;
            let left = read_node(lines)?;
            let right = read_node(lines)?;
            Ok(TreeNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(lines.error(format!("expected node record, got `{line}`"))),
    }
}

struct Lines<R> {
    reader: R,
    path: String,
    line: usize,
    buffer: String,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R, path: &str) -> Result<Self, ForestError> {
        Ok(Self {
            reader,
            path: path.to_string(),
            line: 0,
            buffer: String::new(),
        })
    }

    fn error(&self, detail: String) -> ForestError {
        ForestError::Parse {
            path: self.path.clone(),
            line: self.line,
            detail,
        }
    }

    fn next_line(&mut self) -> Result<String, ForestError> {
        self.buffer.clear();
        let read = self
            .reader
            .read_line(&mut self.buffer)
            .map_err(|source| ForestError::Io {
                path: self.path.clone(),
                source,
            })?;
        self.line += 1;
        if read == 0 {
            return Err(self.error("unexpected end of file".to_string()));
        }
        Ok(self.buffer.trim_end().to_string())
    }

    fn expect_exact(&mut self, expected: &str) -> Result<(), ForestError> {
        let line = self.next_line()?;
        if line != expected {
            return Err(self.error(format!("expected `{expected}`, got `{line}`")));
        }
        Ok(())
    }

    fn expect_raw_field(&mut self, key: &str) -> Result<String, ForestError> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .map(|rest| rest.trim().to_string())
            .filter(|rest| !rest.is_empty())
            .ok_or_else(|| self.error(format!("expected `{key} <value>`, got `{line}`")))
    }

    fn expect_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ForestError> {
        let raw = self.expect_raw_field(key)?;
        raw.parse()
            .map_err(|_| self.error(format!("bad value `{raw}` for {key}")))
    }
}
