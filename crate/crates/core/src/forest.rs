//! Bagged CART regression forest with impurity (SSE-reduction) importance.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::{split_indices, DesignMatrix, FeatureSchema, SplitMethod};
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Third,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Third => p / 3,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Disabling the bootstrap trains every tree on all rows.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidArgument("n_estimators must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be >= 1".into()));
        }
        if let MaxFeatures::Count(0) = self.max_features {
            return Err(Error::InvalidArgument("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

/// Tree node; children are indices into the owning tree's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root is node 0.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { .. } => return at,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value, .. } => value,
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        let mut stack = vec![(0usize, 0usize)];
        let mut max = 0;
        while let Some((at, d)) = stack.pop() {
            max = max.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[at] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }
}

/// Training rows sharing one feature vector, with multiplicity.
struct Group {
    row: usize,
    weight: f64,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

/// Collapses rows with bitwise-identical feature vectors. Splits depend on
/// feature values only, so trees grown on groups equal those grown on rows.
fn group_rows(y: &[f64], patterns: &Patterns, rows: &[usize]) -> Vec<Group> {
    let mut slot: Vec<usize> = vec![usize::MAX; patterns.count];
    let mut groups: Vec<Group> = Vec::new();
    for &r in rows {
        let v = y[r];
        let k = patterns.id[r];
        if slot[k] == usize::MAX {
            slot[k] = groups.len();
            groups.push(Group {
                row: r,
                weight: 0.0,
                sum: 0.0,
                sum_sq: 0.0,
                min: v,
                max: v,
            });
        }
        let g = &mut groups[slot[k]];
        g.weight += 1.0;
        g.sum += v;
        g.sum_sq += v * v;
        g.min = g.min.min(v);
        g.max = g.max.max(v);
    }
    groups
}

/// Distinct feature vectors of a design, numbered by first occurrence.
struct Patterns {
    id: Vec<usize>,
    count: usize,
}

impl Patterns {
    fn new(design: &DesignMatrix) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let id = (0..design.rows)
            .map(|r| {
                let key: Vec<u64> = design.row(r).iter().map(|v| v.to_bits()).collect();
                let next = index.len();
                *index.entry(key).or_insert(next)
            })
            .collect();
        Patterns {
            id,
            count: index.len(),
        }
    }
}

struct Pending {
    groups: Vec<usize>,
    depth: usize,
    slot: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(
    design: &DesignMatrix,
    groups: &[Group],
    members: &[usize],
    features: &[usize],
    binary: &[bool],
    min_leaf: f64,
    node_sse: f64,
) -> Option<BestSplit> {
    let (weight, total) = members
        .iter()
        .fold((0.0, 0.0), |(w, s), &g| (w + groups[g].weight, s + groups[g].sum));
    let parent = total * total / weight;
    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(members.len());
    for &f in features {
        if binary[f] {
            let (mut one_w, mut one_sum) = (0.0, 0.0);
            for &g in members {
                let g = &groups[g];
                if design.values[g.row * design.cols + f] == 1.0 {
                    one_w += g.weight;
                    one_sum += g.sum;
                }
            }
            let zero_w = weight - one_w;
            if one_w < min_leaf || zero_w < min_leaf {
                continue;
            }
            let zero_sum = total - one_sum;
            let gain = zero_sum * zero_sum / zero_w + one_sum * one_sum / one_w - parent;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5,
                    gain,
                });
            }
            continue;
        }
        sorted.clear();
        sorted.extend(
            members
                .iter()
                .map(|&g| (design.values[groups[g].row * design.cols + f], g)),
        );
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if sorted[0].0 == sorted[sorted.len() - 1].0 {
            continue;
        }
        let (mut left_w, mut left_sum) = (0.0, 0.0);
        for i in 0..sorted.len() - 1 {
            let g = &groups[sorted[i].1];
            left_w += g.weight;
            left_sum += g.sum;
            let right_w = weight - left_w;
            if sorted[i].0 == sorted[i + 1].0 || left_w < min_leaf || right_w < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / left_w + right_sum * right_sum / right_w - parent;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (sorted[i].0 + sorted[i + 1].0),
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 1e-12 * node_sse)
}

/// Greedy CART on `rows` (duplicates allowed). Returns the tree and the
/// per-feature SSE reduction it achieved.
pub fn fit_tree(
    design: &DesignMatrix,
    rows: &[usize],
    params: &ForestParams,
    rng: &mut StreamRng,
) -> Result<(Tree, Vec<f64>)> {
    grow_tree(design, &design.response_f64(), &Patterns::new(design), rows, params, rng)
}

fn grow_tree(
    design: &DesignMatrix,
    y: &[f64],
    patterns: &Patterns,
    rows: &[usize],
    params: &ForestParams,
    rng: &mut StreamRng,
) -> Result<(Tree, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("tree needs at least one row".into()));
    }
    let p = design.cols;
    let mtry = params.max_features.resolve(p);
    let min_leaf = params.min_samples_leaf as f64;
    let groups = group_rows(y, patterns, rows);
    // 0/1 columns have a single candidate threshold and need no sort
    let binary: Vec<bool> = (0..p)
        .map(|f| {
            groups
                .iter()
                .all(|g| matches!(design.values[g.row * p + f], v if v == 0.0 || v == 1.0))
        })
        .collect();
    let mut importance = vec![0.0; p];
    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { value: 0.0, n: 0 }];
    let mut stack = vec![Pending {
        groups: (0..groups.len()).collect(),
        depth: 0,
        slot: 0,
    }];
    let mut all_features: Vec<usize> = (0..p).collect();

    while let Some(Pending {
        groups: members,
        depth,
        slot,
    }) = stack.pop()
    {
        let (mut weight, mut sum, mut sum_sq) = (0.0, 0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &g in &members {
            let g = &groups[g];
            weight += g.weight;
            sum += g.sum;
            sum_sq += g.sum_sq;
            lo = lo.min(g.min);
            hi = hi.max(g.max);
        }
        let mean = sum / weight;
        let can_split = members.len() > 1
            && weight >= 2.0 * min_leaf
            && params.max_depth.is_none_or(|d| depth < d)
            && lo < hi;
        let split = if can_split {
            let features: Vec<usize> = if mtry >= p {
                all_features.clone()
            } else {
                for i in 0..mtry {
                    let j = rng.random_range(i..p);
                    all_features.swap(i, j);
                }
                let mut chosen = all_features[..mtry].to_vec();
                chosen.sort_unstable();
                chosen
            };
            let node_sse = (sum_sq - sum * mean).max(0.0);
            best_split(design, &groups, &members, &features, &binary, min_leaf, node_sse)
        } else {
            None
        };
        match split {
            None => {
                nodes[slot] = TreeNode::Leaf {
                    value: mean,
                    n: weight as usize,
                }
            }
            Some(best) => {
                importance[best.feature] += best.gain;
                let (left_groups, right_groups): (Vec<usize>, Vec<usize>) =
                    members.iter().partition(|&&g| {
                        design.values[groups[g].row * p + best.feature] <= best.threshold
                    });
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { value: 0.0, n: 0 });
                nodes.push(TreeNode::Leaf { value: 0.0, n: 0 });
                nodes[slot] = TreeNode::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    left,
                    right,
                };
                stack.push(Pending {
                    groups: right_groups,
                    depth: depth + 1,
                    slot: right,
                });
                stack.push(Pending {
                    groups: left_groups,
                    depth: depth + 1,
                    slot: left,
                });
            }
        }
    }
    Ok((Tree { nodes }, importance))
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub schema: Option<FeatureSchema>,
    /// Normalized SSE reduction per feature; all zero when no split occurred.
    pub importance: Vec<f64>,
    pub n_train: usize,
}

fn fit_one(
    design: &DesignMatrix,
    y: &[f64],
    patterns: &Patterns,
    params: &ForestParams,
    seed: u64,
    t: usize,
) -> Result<(Tree, Vec<f64>)> {
    let mut rng = rng::substream(seed, "tree", t as u64);
    let rows = if params.bootstrap {
        bootstrap_indices(design.rows, &mut rng)
    } else {
        (0..design.rows).collect()
    };
    grow_tree(design, y, patterns, &rows, params, &mut rng)
}

pub fn fit_forest(design: &DesignMatrix, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    params.validate()?;
    if design.rows == 0 || design.cols == 0 {
        return Err(Error::EmptyInput("forest needs a non-empty design".into()));
    }
    let y = design.response_f64();
    let patterns = Patterns::new(design);
    #[cfg(feature = "parallel")]
    let fitted: Vec<(Tree, Vec<f64>)> = {
        use rayon::prelude::*;
        (0..params.n_estimators)
            .into_par_iter()
            .map(|t| fit_one(design, &y, &patterns, params, seed, t))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let fitted: Vec<(Tree, Vec<f64>)> = (0..params.n_estimators)
        .map(|t| fit_one(design, &y, &patterns, params, seed, t))
        .collect::<Result<_>>()?;

    let mut importance = vec![0.0; design.cols];
    let mut trees = Vec::with_capacity(fitted.len());
    for (tree, gains) in fitted {
        for (acc, g) in importance.iter_mut().zip(gains) {
            *acc += g;
        }
        trees.push(tree);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        trees,
        params: params.clone(),
        seed,
        feature_names: design.column_names.clone(),
        schema: None,
        importance,
        n_train: design.rows,
    })
}

impl ForestModel {
    pub fn with_schema(mut self, schema: FeatureSchema) -> Self {
        self.schema = Some(schema);
        self
    }

    /// Importances as `(name, value)` sorted descending, ties by name order.
    pub fn ranked_importance(&self) -> Vec<(String, f64)> {
        let mut pairs: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .cloned()
            .zip(self.importance.iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs
    }
}

/// Mean of the per-tree predictions.
pub fn predict_forest(model: &ForestModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.feature_names.len() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_names.len(),
            actual: x.len(),
        });
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(x)).sum();
    Ok(sum / model.trees.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mae: f64,
    /// `None` when the test response is constant (SST = 0).
    pub r2: Option<f64>,
}

pub fn evaluate_predictions(predicted: &[f64], actual: &[f64]) -> Result<Evaluation> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("empty test set".into()));
    }
    let n = actual.len() as f64;
    let mae = predicted.iter().zip(actual).map(|(p, a)| (a - p).abs()).sum::<f64>() / n;
    let mean = actual.iter().sum::<f64>() / n;
    let sst: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (a - p).powi(2)).sum();
    Ok(Evaluation {
        mae,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

pub fn evaluate(model: &ForestModel, test: &DesignMatrix) -> Result<Evaluation> {
    let predicted = (0..test.rows)
        .map(|i| predict_forest(model, test.row(i)))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(&predicted, &test.response_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_trees: usize,
    pub mae: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub test_fraction: f64,
    pub split: SplitMethod,
    pub params: ForestParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: vec![1, 5, 10, 25, 50, 100],
            test_fraction: 0.25,
            split: SplitMethod::Random,
            params: ForestParams::default(),
        }
    }
}

/// MAE and R² on one fixed held-out split for each forest size. Returns the
/// rows and the largest forest.
pub fn estimator_sweep(
    design: &DesignMatrix,
    config: &SweepConfig,
    seed: u64,
) -> Result<(Vec<SweepRow>, ForestModel)> {
    let sizes = &config.sizes;
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::InvalidArgument(
            "sweep sizes must be positive and strictly ascending".into(),
        ));
    }
    let (train_idx, test_idx) = split_indices(design.rows, config.test_fraction, seed, config.split)?;
    let train = design.select_rows(&train_idx);
    let test = design.select_rows(&test_idx);
    let largest = fit_forest(
        &train,
        &ForestParams {
            n_estimators: *sizes.last().unwrap(),
            ..config.params.clone()
        },
        seed,
    )?;
    // per-tree predictions once, then running means
    let actual = test.response_f64();
    let mut running = vec![0.0; test.rows];
    let mut rows = Vec::with_capacity(sizes.len());
    let mut done = 0;
    for &k in sizes {
        for tree in &largest.trees[done..k] {
            for (acc, i) in running.iter_mut().zip(0..test.rows) {
                *acc += tree.predict(test.row(i));
            }
        }
        done = k;
        let predicted: Vec<f64> = running.iter().map(|s| s / k as f64).collect();
        let eval = evaluate_predictions(&predicted, &actual)?;
        rows.push(SweepRow {
            n_trees: k,
            mae: eval.mae,
            r2: eval.r2,
        });
    }
    Ok((rows, largest))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["n_trees", "mae", "r2"])?;
    for row in rows {
        writer.write_record([
            row.n_trees.to_string(),
            row.mae.to_string(),
            row.r2.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_importance_csv<W: Write>(model: &ForestModel, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["feature", "importance"])?;
    for (name, value) in model.ranked_importance() {
        writer.write_record([name, value.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: &[Vec<f64>], y: &[u64]) -> DesignMatrix {
        DesignMatrix::from_rows(rows, y.to_vec()).unwrap()
    }

    fn no_bootstrap(n: usize) -> ForestParams {
        ForestParams {
            n_estimators: n,
            bootstrap: false,
            ..ForestParams::default()
        }
    }

    #[test]
    fn pure_separation() {
        let d = design(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]], &[1, 1, 5, 5]);
        let mut rng = rng::substream(0, "t", 0);
        let (tree, imp) = fit_tree(&d, &[0, 1, 2, 3], &no_bootstrap(1), &mut rng).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        match tree.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((feature, threshold), (0, 0.5));
            }
            _ => panic!("expected split"),
        }
        assert_eq!(tree.predict(&[0.0]), 1.0);
        assert_eq!(tree.predict(&[1.0]), 5.0);
        assert_eq!(imp[0], 16.0);
    }

    #[test]
    fn constant_response_single_leaf() {
        let d = design(&[vec![0.0], vec![1.0], vec![2.0]], &[4, 4, 4]);
        let mut rng = rng::substream(0, "t", 0);
        let (tree, _) = fit_tree(&d, &[0, 1, 2], &no_bootstrap(1), &mut rng).unwrap();
        assert_eq!(tree.nodes, vec![TreeNode::Leaf { value: 4.0, n: 3 }]);
    }

    #[test]
    fn single_row_leaf() {
        let d = design(&[vec![0.3, 1.0]], &[7]);
        let mut rng = rng::substream(0, "t", 0);
        let (tree, _) = fit_tree(&d, &[0], &no_bootstrap(1), &mut rng).unwrap();
        assert_eq!(tree.nodes, vec![TreeNode::Leaf { value: 7.0, n: 1 }]);
    }

    #[test]
    fn tie_breaks_to_lowest_feature() {
        // two identical columns: the split must use feature 0
        let d = design(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[0, 3]);
        let mut rng = rng::substream(0, "t", 0);
        let (tree, _) = fit_tree(&d, &[0, 1], &no_bootstrap(1), &mut rng).unwrap();
        assert!(matches!(tree.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<u64> = (0..16).collect();
        let d = design(&rows, &y);
        let all: Vec<usize> = (0..16).collect();
        let mut rng = rng::substream(0, "t", 0);
        let params = ForestParams {
            max_depth: Some(2),
            ..no_bootstrap(1)
        };
        let (tree, _) = fit_tree(&d, &all, &params, &mut rng).unwrap();
        assert_eq!(tree.depth(), 2);
        let params = ForestParams {
            min_samples_leaf: 5,
            ..no_bootstrap(1)
        };
        let (tree, _) = fit_tree(&d, &all, &params, &mut rng).unwrap();
        for node in &tree.nodes {
            if let TreeNode::Leaf { n, .. } = node {
                assert!(*n >= 5);
            }
        }
    }

    #[test]
    fn single_tree_forest_equals_tree() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![f64::from(i % 5), f64::from(i % 3)]).collect();
        let y: Vec<u64> = (0..30).map(|i| (i % 5 + 2 * (i % 3)) as u64).collect();
        let d = design(&rows, &y);
        let forest = fit_forest(&d, &no_bootstrap(1), 3).unwrap();
        for i in 0..d.rows {
            assert_eq!(predict_forest(&forest, d.row(i)).unwrap(), forest.trees[0].predict(d.row(i)));
        }
    }

    #[test]
    fn constant_response_forest() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i)]).collect();
        let d = design(&rows, &[6; 20]);
        let forest = fit_forest(&d, &ForestParams { n_estimators: 7, ..Default::default() }, 1).unwrap();
        assert_eq!(predict_forest(&forest, &[3.5]).unwrap(), 6.0);
        assert!(forest.importance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forest_mean_of_trees() {
        let two = ForestModel {
            trees: vec![
                Tree { nodes: vec![TreeNode::Leaf { value: 2.0, n: 1 }] },
                Tree { nodes: vec![TreeNode::Leaf { value: 4.0, n: 1 }] },
            ],
            params: ForestParams::default(),
            seed: 0,
            feature_names: vec!["x".into()],
            schema: None,
            importance: vec![0.0],
            n_train: 1,
        };
        assert_eq!(predict_forest(&two, &[0.0]).unwrap(), 3.0);
        assert!(predict_forest(&two, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn evaluation_definitions() {
        let e = evaluate_predictions(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((e.mae, e.r2), (0.0, Some(1.0)));
        let e = evaluate_predictions(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.r2, Some(0.0));
        let e = evaluate_predictions(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(e.r2, None);
        assert_eq!(e.mae, 1.0);
    }

    #[test]
    fn invalid_params() {
        let d = design(&[vec![0.0]], &[1]);
        assert!(fit_forest(&d, &ForestParams { n_estimators: 0, ..Default::default() }, 0).is_err());
        assert!(fit_forest(&d, &ForestParams { min_samples_leaf: 0, ..Default::default() }, 0).is_err());
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::All.resolve(44), 44);
        assert_eq!(MaxFeatures::Third.resolve(44), 14);
        assert_eq!(MaxFeatures::Sqrt.resolve(44), 6);
        assert_eq!(MaxFeatures::Count(100).resolve(44), 44);
        assert_eq!(MaxFeatures::Third.resolve(2), 1);
    }
}
