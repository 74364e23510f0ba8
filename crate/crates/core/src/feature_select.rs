//! Feature ranking by accumulated Gini-impurity decrease of a CART tree.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use crate::data::Class;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `1 - sum_c p_c^2` over a nonempty label multiset.
pub fn gini<T: Real, L: Eq + Hash>(labels: &[L]) -> Result<T> {
    if labels.is_empty() {
        return Err(Error::Argument("Gini impurity of an empty node".into()));
    }
    let mut counts: HashMap<&L, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    Ok(gini_from_counts(&c))
}

fn gini_from_counts<T: Real>(counts: &[usize]) -> T {
    let total = T::from_count(counts.iter().sum());
    T::one() - counts.iter().map(|&c| (T::from_count(c) / total).powi(2)).sum::<T>()
}

/// Impurity and sample count of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStats<T> {
    pub impurity: T,
    pub num_samples: usize,
}

/// `I_parent - (n_left / n_parent * I_left + n_right / n_parent * I_right)`.
pub fn impurity_decrease<T: Real>(parent: NodeStats<T>, left: NodeStats<T>, right: NodeStats<T>) -> Result<T> {
    if parent.num_samples == 0 || left.num_samples + right.num_samples != parent.num_samples {
        return Err(Error::Structure(format!(
            "children hold {} + {} samples, parent {}",
            left.num_samples, right.num_samples, parent.num_samples
        )));
    }
    let n = T::from_count(parent.num_samples);
    Ok(parent.impurity
        - (T::from_count(left.num_samples) / n * left.impurity + T::from_count(right.num_samples) / n * right.impurity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2 }
    }
}

/// Internal-node split: rows with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub feature: usize,
    pub threshold: T,
    pub left: Box<TreeNode<T>>,
    pub right: Box<TreeNode<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<T> {
    /// `None` for leaves.
    pub split: Option<Split<T>>,
    pub impurity: T,
    pub num_samples: usize,
    /// Counts of `[Baseline, Stress]`.
    pub class_counts: [usize; 2],
    pub predicted_class: Class,
}

impl<T: Real> TreeNode<T> {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn stats(&self) -> NodeStats<T> {
        NodeStats { impurity: self.impurity, num_samples: self.num_samples }
    }

    pub fn depth(&self) -> usize {
        self.split.as_ref().map_or(0, |s| 1 + s.left.depth().max(s.right.depth()))
    }

    /// Impurity decrease achieved by this node's split, `None` for leaves.
    pub fn decrease(&self) -> Option<T> {
        let s = self.split.as_ref()?;
        impurity_decrease(self.stats(), s.left.stats(), s.right.stats()).ok()
    }

    /// One node per line, two-space indent per level:
    /// `f<idx> <= <threshold> | gini=<g> n=<count>` or
    /// `leaf class=<c> | gini=<g> n=<count>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize) {
        let indent = "  ".repeat(depth);
        match &self.split {
            Some(s) => {
                let _ = writeln!(out, "{indent}f{} <= {} | gini={} n={}", s.feature, s.threshold, self.impurity, self.num_samples);
                s.left.dump_into(out, depth + 1);
                s.right.dump_into(out, depth + 1);
            }
            None => {
                let _ = writeln!(out, "{indent}leaf class={} | gini={} n={}", self.predicted_class, self.impurity, self.num_samples);
            }
        }
    }

    /// Routes a row to its leaf's class.
    pub fn predict(&self, row: &[T]) -> Class {
        match &self.split {
            Some(s) if row[s.feature] <= s.threshold => s.left.predict(row),
            Some(s) => s.right.predict(row),
            None => self.predicted_class,
        }
    }
}

fn class_index(c: Class) -> usize {
    match c {
        Class::Baseline => 0,
        Class::Stress => 1,
    }
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    decrease: T,
}

/// Best `(feature, threshold)` over midpoints of consecutive distinct values.
/// Ties keep the lowest feature index, then the lowest threshold.
fn best_split<T: Real>(x: &[Vec<T>], y: &[Class], rows: &[usize], parent: NodeStats<T>) -> Option<Candidate<T>> {
    let total = count_classes(y, rows);
    let mut best: Option<Candidate<T>> = None;
    let mut order = rows.to_vec();
    let tie_slack = T::epsilon() * T::lit(16.0);
    for feature in 0..x[rows[0]].len() {
        order.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).expect("finite features"));
        let mut left = [0usize; 2];
        for k in 0..order.len() - 1 {
            left[class_index(y[order[k]])] += 1;
            let (lo, hi) = (x[order[k]][feature], x[order[k + 1]][feature]);
            if lo >= hi {
                continue;
            }
            let mid = (lo + hi) * T::lit(0.5);
            let threshold = if mid < hi { mid } else { lo };
            let right = [total[0] - left[0], total[1] - left[1]];
            let n_left = k + 1;
            let decrease = impurity_decrease(
                parent,
                NodeStats { impurity: gini_from_counts(&left), num_samples: n_left },
                NodeStats { impurity: gini_from_counts(&right), num_samples: order.len() - n_left },
            )
            .expect("counts partition the node");
            // Mathematically equal gains from different counts can differ in
            // the last bits; treat those as ties.
            if best.as_ref().is_none_or(|b| decrease > b.decrease + tie_slack) {
                best = Some(Candidate { feature, threshold, decrease });
            }
        }
    }
    best
}

fn count_classes(y: &[Class], rows: &[usize]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for &r in rows {
        c[class_index(y[r])] += 1;
    }
    c
}

fn grow<T: Real>(x: &[Vec<T>], y: &[Class], rows: &[usize], depth: usize, config: &TreeConfig) -> TreeNode<T> {
    let class_counts = count_classes(y, rows);
    let impurity = gini_from_counts(&class_counts);
    // Majority class, ties to Baseline.
    let predicted_class = if class_counts[1] > class_counts[0] { Class::Stress } else { Class::Baseline };
    let mut node = TreeNode { split: None, impurity, num_samples: rows.len(), class_counts, predicted_class };
    let pure = class_counts[0] == 0 || class_counts[1] == 0;
    let depth_ok = config.max_depth.is_none_or(|d| depth < d);
    if pure || !depth_ok || rows.len() < config.min_samples_split.max(2) {
        return node;
    }
    if let Some(c) = best_split(x, y, rows, node.stats()) {
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| x[r][c.feature] <= c.threshold);
        node.split = Some(Split {
            feature: c.feature,
            threshold: c.threshold,
            left: Box::new(grow(x, y, &left, depth + 1, config)),
            right: Box::new(grow(x, y, &right, depth + 1, config)),
        });
    }
    node
}

/// Greedy CART with the Gini criterion. Constant features or a single class
/// yield a single leaf.
pub fn fit_tree<T: Real>(x: &[Vec<T>], y: &[Class], config: &TreeConfig) -> Result<TreeNode<T>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Argument(format!("tree needs at least 2 rows, got {}", x.len())));
    }
    let width = x[0].len();
    if width == 0 {
        return Err(Error::Shape("rows have no features".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != width) {
        return Err(Error::Shape(format!("row {i} has {} features, expected {width}", x[i].len())));
    }
    if let Some(i) = x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data(format!("row {i} has a non-finite feature")));
    }
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(grow(x, y, &rows, 0, config))
}

/// Normalized importance scores and the induced feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking<T> {
    pub scores: Vec<T>,
    /// Descending score, ties by ascending index.
    pub order: Vec<usize>,
    pub selected: Vec<usize>,
}

impl<T: Real> FeatureRanking<T> {
    /// Copy of the ranking with the top `k` recorded as selected.
    pub fn with_selected(mut self, k: usize) -> Result<Self> {
        self.selected = select_top_k(&self, k)?;
        Ok(self)
    }
}

/// `score_f = sum over nodes splitting on f of (n_node / n_root) * decrease`,
/// normalized to sum to one when any split exists.
pub fn rank_features<T: Real>(tree: &TreeNode<T>, num_features: usize) -> Result<FeatureRanking<T>> {
    let mut scores = vec![T::zero(); num_features];
    let root_n = T::from_count(tree.num_samples.max(1));
    let mut stack = vec![tree];
    while let Some(node) = stack.pop() {
        if let Some(s) = &node.split {
            if s.feature >= num_features {
                return Err(Error::Index(format!("tree splits on feature {} of {num_features}", s.feature)));
            }
            let gain = node.decrease().unwrap_or_else(T::zero).max(T::zero());
            scores[s.feature] = scores[s.feature] + T::from_count(node.num_samples) / root_n * gain;
            stack.push(&s.left);
            stack.push(&s.right);
        }
    }
    let total: T = scores.iter().copied().sum();
    if total > T::zero() {
        scores.iter_mut().for_each(|s| *s = *s / total);
    }
    let mut order: Vec<usize> = (0..num_features).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b)));
    Ok(FeatureRanking { scores, order, selected: Vec::new() })
}

pub fn select_top_k<T: Real>(ranking: &FeatureRanking<T>, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > ranking.order.len() {
        return Err(Error::Argument(format!("cannot select {k} of {} features", ranking.order.len())));
    }
    Ok(ranking.order[..k].to_vec())
}
