//! Branch trees: Born weights, the branch-counting measure and per-branch
//! entropy bookkeeping.
//!
//! Each node carries the Born weight `lam` of its split relative to its
//! parent and the log of the product of weights along its path. A node's
//! relative entropy is `−λ ln λ`; summed over siblings this is the von
//! Neumann entropy of the split that created them. The rescaled entropy
//! starts at exactly zero when a branch is created and may only grow
//! afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Complex;
use crate::schmidt::{self, MeasurementModel};

/// Default cap on the number of leaves.
pub const DEFAULT_MAX_LEAVES: usize = 1 << 20;

/// Environment variable that overrides the leaf cap.
pub const MAX_LEAVES_ENV: &str = "MWI_MAX_LEAVES";

const WEIGHT_TOL: f64 = 1e-9;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct BranchNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// Outcome index chosen at the parent's split; `None` for the root.
    pub label: Option<usize>,
    pub lam: f64,
    pub log_weight: f64,
    pub rel_entropy: f64,
    pub rescaled_entropy: f64,
    pub children: Vec<NodeId>,
}

impl BranchNode {
    pub fn cum_weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BranchTree {
    nodes: Vec<BranchNode>,
    leaves: Vec<NodeId>,
    max_leaves: usize,
}

impl Default for BranchTree {
    fn default() -> Self {
        Self::new()
    }
}

/// Leaf cap from `MWI_MAX_LEAVES`, falling back to the default when unset
/// or unparsable.
pub fn max_leaves_from_env() -> usize {
    std::env::var(MAX_LEAVES_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(DEFAULT_MAX_LEAVES)
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Contract("empty outcome weight list".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Contract(format!("outcome weight {w} is negative or non-finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::Contract(format!(
            "outcome weights sum to {total}, expected 1 within {WEIGHT_TOL:e}"
        )));
    }
    Ok(())
}

impl BranchTree {
    /// A tree holding only the root, with the default leaf cap.
    pub fn new() -> Self {
        Self::with_max_leaves(DEFAULT_MAX_LEAVES)
    }

    pub fn with_max_leaves(max_leaves: usize) -> Self {
        let root = BranchNode {
            id: 0,
            parent: None,
            label: None,
            lam: 1.0,
            log_weight: 0.0,
            rel_entropy: 0.0,
            rescaled_entropy: 0.0,
            children: Vec::new(),
        };
        Self {
            nodes: vec![root],
            leaves: vec![0],
            max_leaves,
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn max_leaves(&self) -> usize {
        self.max_leaves
    }

    pub fn node(&self, id: NodeId) -> Option<&BranchNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> &[BranchNode] {
        &self.nodes
    }

    /// Current leaves in creation order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Splits `leaf` into one child per nonzero weight; child labels are the
    /// indices into `weights`. Returns the new children.
    pub fn branch_step(&mut self, leaf: NodeId, weights: &[f64]) -> Result<Vec<NodeId>> {
        check_weights(weights)?;
        if self.nodes.get(leaf).is_some_and(BranchNode::is_leaf) {
            let nonzero = weights.iter().filter(|&&w| w > 0.0).count();
            let new_count = self.leaves.len() - 1 + nonzero;
            if new_count > self.max_leaves {
                return Err(Error::Capacity {
                    what: "leaves",
                    requested: new_count as u128,
                    limit: self.max_leaves as u128,
                });
            }
        }
        let children = self.split_node(leaf, weights)?;
        let pos = self.leaves.iter().position(|&l| l == leaf).expect("leaf listed");
        self.leaves.splice(pos..=pos, children.iter().copied());
        Ok(children)
    }

    fn split_node(&mut self, leaf: NodeId, weights: &[f64]) -> Result<Vec<NodeId>> {
        let node = self
            .nodes
            .get(leaf)
            .ok_or_else(|| Error::Structure(format!("no node {leaf}")))?;
        if !node.is_leaf() {
            return Err(Error::Structure(format!("node {leaf} is not a leaf")));
        }
        let nonzero = weights.iter().filter(|&&w| w > 0.0).count();
        let base = node.log_weight;
        let mut children = Vec::with_capacity(nonzero);
        for (label, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            // Guard against 1 + ε from upstream normalisation.
            let lam = w.min(1.0);
            let id = self.nodes.len();
            self.nodes.push(BranchNode {
                id,
                parent: Some(leaf),
                label: Some(label),
                lam,
                log_weight: base + lam.ln(),
                rel_entropy: if lam < 1.0 { -lam * lam.ln() } else { 0.0 },
                rescaled_entropy: 0.0,
                children: Vec::new(),
            });
            children.push(id);
        }
        self.nodes[leaf].children = children.clone();
        Ok(children)
    }

    /// Splits every current leaf with the same weights.
    pub fn split_all(&mut self, weights: &[f64]) -> Result<()> {
        check_weights(weights)?;
        let nonzero = weights.iter().filter(|&&w| w > 0.0).count() as u128;
        let projected = self.leaves.len() as u128 * nonzero;
        if projected > self.max_leaves as u128 {
            return Err(Error::Capacity {
                what: "leaves",
                requested: projected,
                limit: self.max_leaves as u128,
            });
        }
        let mut leaves = Vec::with_capacity(projected as usize);
        for leaf in std::mem::take(&mut self.leaves) {
            leaves.extend(self.split_node(leaf, weights)?);
        }
        self.leaves = leaves;
        Ok(())
    }

    /// Outcome labels from the root down to `id`.
    pub fn path(&self, id: NodeId) -> Vec<usize> {
        let mut labels = Vec::new();
        let mut cur = self.nodes.get(id);
        while let Some(n) = cur {
            if let Some(l) = n.label {
                labels.push(l);
            }
            cur = n.parent.and_then(|p| self.nodes.get(p));
        }
        labels.reverse();
        labels
    }

    /// Born measure of an event: total path weight of matching leaves.
    pub fn born_measure(&self, predicate: impl Fn(&[usize]) -> bool) -> f64 {
        self.leaves
            .iter()
            .filter(|&&l| predicate(&self.path(l)))
            .map(|&l| self.nodes[l].cum_weight())
            .sum()
    }

    /// Counting measure of an event: matching leaves over all leaves.
    pub fn count_measure(&self, predicate: impl Fn(&[usize]) -> bool) -> Result<f64> {
        if self.leaves.is_empty() {
            return Err(Error::Structure("tree has no leaves".into()));
        }
        let hits = self.leaves.iter().filter(|&&l| predicate(&self.path(l))).count();
        Ok(hits as f64 / self.leaves.len() as f64)
    }

    /// Entropy −Σ λ ln λ of the split that produced `id`'s children.
    pub fn split_entropy(&self, id: NodeId) -> f64 {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| self.nodes[c].rel_entropy)
            .sum()
    }

    /// Records the rescaled entropy of a branch at a later epoch. Values may
    /// not decrease.
    pub fn record_rescaled_entropy(&mut self, id: NodeId, value: f64) -> Result<()> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| Error::Structure(format!("no node {id}")))?;
        if !value.is_finite() || value < node.rescaled_entropy {
            return Err(Error::Contract(format!(
                "rescaled entropy of node {id} may not decrease ({} -> {value})",
                node.rescaled_entropy
            )));
        }
        node.rescaled_entropy = value;
        Ok(())
    }

    pub fn entropy_ledger(&self) -> Vec<LedgerEntry> {
        self.nodes
            .iter()
            .map(|n| LedgerEntry {
                id: n.id,
                parent: n.parent,
                rel_entropy: n.rel_entropy,
                rescaled_entropy: n.rescaled_entropy,
                sibling_sum: n.parent.map_or(0.0, |p| self.split_entropy(p)),
            })
            .collect()
    }

    pub fn to_json(&self) -> TreeJson {
        TreeJson {
            root: self.root(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id,
                    parent: n.parent,
                    label: n.label,
                    lam: n.lam,
                    log_weight: n.log_weight,
                    s_i: n.rel_entropy,
                })
                .collect(),
        }
    }

    /// Runs a chain of measurement-like interactions: step `t` splits every
    /// leaf by that step's Born weights `|c_i|²`.
    pub fn grow_from_measurements(steps: &[(MeasurementModel, Vec<Complex>)]) -> Result<Self> {
        Self::grow_from_measurements_capped(steps, DEFAULT_MAX_LEAVES)
    }

    pub fn grow_from_measurements_capped(
        steps: &[(MeasurementModel, Vec<Complex>)],
        max_leaves: usize,
    ) -> Result<Self> {
        let mut tree = Self::with_max_leaves(max_leaves);
        for (model, amplitudes) in steps {
            let post = schmidt::apply_measurement(model, amplitudes)?;
            let c = model.normalized_amplitudes(amplitudes)?;
            let weights: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
            let total: f64 = weights.iter().sum();
            let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 && !model.conditional_state(&post, i)?.is_factorized(schmidt::RANK_THRESHOLD)? {
                    return Err(Error::Contract(format!("branch {i} is not a product state")));
                }
            }
            tree.split_all(&weights)?;
        }
        Ok(tree)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// S_i = −λ ln λ.
    pub rel_entropy: f64,
    pub rescaled_entropy: f64,
    /// Σ S_i over this node and its siblings.
    pub sibling_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub label: Option<usize>,
    pub lam: f64,
    pub log_weight: f64,
    #[serde(rename = "S_i")]
    pub s_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub root: NodeId,
    pub nodes: Vec<NodeJson>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn ten_splits(p: f64) -> BranchTree {
        let mut t = BranchTree::new();
        for _ in 0..10 {
            t.split_all(&[p, 1.0 - p]).unwrap();
        }
        t
    }

    #[test]
    fn trivial_split_keeps_weight() {
        let mut t = BranchTree::new();
        let kids = t.branch_step(0, &[1.0]).unwrap();
        assert_eq!(kids.len(), 1);
        assert_eq!(t.node(kids[0]).unwrap().cum_weight(), 1.0);
        assert_eq!(t.node(kids[0]).unwrap().rel_entropy, 0.0);
    }

    #[test]
    fn even_split() {
        let mut t = BranchTree::new();
        t.branch_step(0, &[0.5, 0.5]).unwrap();
        assert_eq!(t.leaf_count(), 2);
        for &l in t.leaves() {
            assert!((t.node(l).unwrap().cum_weight() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_weight_outcomes_are_dropped() {
        let mut t = BranchTree::new();
        let kids = t.branch_step(0, &[0.0, 0.4, 0.6]).unwrap();
        assert_eq!(kids.len(), 2);
        assert_eq!(t.node(kids[0]).unwrap().label, Some(1));
    }

    #[test]
    fn ten_binary_splits_make_1024_leaves() {
        let t = ten_splits(0.9);
        assert_eq!(t.leaf_count(), 1024);
        let total: f64 = t.leaves().iter().map(|&l| t.node(l).unwrap().cum_weight()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn born_vs_count_all_first() {
        let t = ten_splits(0.9);
        let all_first = |p: &[usize]| p.iter().all(|&x| x == 0);
        assert!((t.born_measure(all_first) - 0.9f64.powi(10)).abs() < 1e-12);
        assert!((t.born_measure(all_first) - 0.348_678_440_1).abs() < 1e-9);
        assert_eq!(t.count_measure(all_first).unwrap(), 1.0 / 1024.0);
        assert!((t.born_measure(|_| true) - 1.0).abs() < 1e-12);
        assert_eq!(t.count_measure(|_| true).unwrap(), 1.0);
    }

    #[test]
    fn five_of_ten_class() {
        let five = |p: &[usize]| p.iter().filter(|&&x| x == 0).count() == 5;
        let t = ten_splits(0.5);
        assert!((t.born_measure(five) - binomial(10, 5) / 1024.0).abs() < 1e-12);
        assert_eq!(t.count_measure(five).unwrap(), 252.0 / 1024.0);
    }

    #[test]
    fn step_errors() {
        let mut t = BranchTree::new();
        assert!(matches!(t.branch_step(0, &[0.5, 0.4]), Err(Error::Contract(_))));
        assert!(matches!(t.branch_step(0, &[1.5, -0.5]), Err(Error::Contract(_))));
        t.branch_step(0, &[0.5, 0.5]).unwrap();
        assert!(matches!(t.branch_step(0, &[1.0]), Err(Error::Structure(_))));
        assert!(matches!(t.branch_step(99, &[1.0]), Err(Error::Structure(_))));
    }

    #[test]
    fn leaf_cap() {
        let mut t = BranchTree::with_max_leaves(8);
        for _ in 0..3 {
            t.split_all(&[0.5, 0.5]).unwrap();
        }
        assert!(matches!(t.split_all(&[0.5, 0.5]), Err(Error::Capacity { .. })));
        assert_eq!(t.leaf_count(), 8);
    }

    #[test]
    fn ledger_values() {
        let mut t = BranchTree::new();
        let kids = t.branch_step(0, &[0.5, 0.5]).unwrap();
        let ledger = t.entropy_ledger();
        for &k in &kids {
            assert!((ledger[k].rel_entropy - 0.5 * 2f64.ln()).abs() < 1e-15);
            assert!((ledger[k].sibling_sum - 2f64.ln()).abs() < 1e-15);
            assert_eq!(ledger[k].rescaled_entropy, 0.0);
        }
        let kids = t.branch_step(kids[0], &[0.7, 0.3]).unwrap();
        assert!((t.entropy_ledger()[kids[0]].sibling_sum - 0.610_864_302_054_894_5).abs() < 1e-12);
    }

    #[test]
    fn rescaled_entropy_is_monotone() {
        let mut t = BranchTree::new();
        let kids = t.branch_step(0, &[0.5, 0.5]).unwrap();
        t.record_rescaled_entropy(kids[0], 0.1).unwrap();
        t.record_rescaled_entropy(kids[0], 0.2).unwrap();
        assert!(t.record_rescaled_entropy(kids[0], 0.15).is_err());
        assert_eq!(t.node(kids[1]).unwrap().rescaled_entropy, 0.0);
    }

    #[test]
    fn deep_tree_keeps_log_weight() {
        let mut t = BranchTree::new();
        let mut leaf = 0;
        for _ in 0..10_000 {
            leaf = t.branch_step(leaf, &[0.5, 0.5]).unwrap()[0];
        }
        let n = t.node(leaf).unwrap();
        assert_eq!(n.cum_weight(), 0.0);
        assert!((n.log_weight - 10_000.0 * 0.5f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn measurement_chain() {
        let c = |xs: &[f64]| xs.iter().map(|&x| Complex::new(x, 0.0)).collect::<Vec<_>>();
        let m = MeasurementModel::computational(2, 2).unwrap();
        let t = BranchTree::grow_from_measurements(&[(m.clone(), c(&[0.3f64.sqrt(), 0.7f64.sqrt()]))]).unwrap();
        let w: Vec<f64> = t.leaves().iter().map(|&l| t.node(l).unwrap().cum_weight()).collect();
        assert!((w[0] - 0.3).abs() < 1e-12 && (w[1] - 0.7).abs() < 1e-12);

        let t = BranchTree::grow_from_measurements(&[
            (m.clone(), c(&[0.3f64.sqrt(), 0.7f64.sqrt()])),
            (m.clone(), c(&[0.5f64.sqrt(), 0.5f64.sqrt()])),
        ])
        .unwrap();
        assert_eq!(t.leaf_count(), 4);
        assert!((t.born_measure(|p| p == [1, 0]) - 0.35).abs() < 1e-12);

        let t = BranchTree::grow_from_measurements(&[(m, c(&[1.0, 0.0]))]).unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.node(0).unwrap().children.len(), 1);
    }

    #[test]
    fn json_export_fields() {
        let mut t = BranchTree::new();
        t.branch_step(0, &[0.5, 0.5]).unwrap();
        let v = serde_json::to_value(t.to_json()).unwrap();
        let node = &v["nodes"][1];
        for key in ["id", "parent", "label", "lam", "log_weight", "S_i"] {
            assert!(node.get(key).is_some(), "missing {key}");
        }
    }
}
