//! Bagged depth-limited CART trees (Gini impurity).
//!
//! Each tree is grown on a bootstrap resample. At every split a random
//! `floor(sqrt(columns))` subset of columns is examined; among equal gains
//! the lowest column index wins, then the lowest threshold. Leaves store
//! the fraction of positive labels and the ensemble averages them.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::encode::Design;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { probability: f64 },
    Split { column: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { probability } => return probability,
                Node::Split { column, threshold, left, right } => {
                    at = if row[column] <= threshold { left } else { right };
                }
            }
        }
    }
}

pub fn fit_forest(x: &Design, y: &[bool], options: TreeOptions, seed: u64) -> Vec<Tree> {
    (0..options.n_trees)
        .map(|t| {
            let mut r = rng::substream(seed, t as u64);
            let sample: Vec<usize> = (0..x.rows).map(|_| r.random_range(0..x.rows)).collect();
            grow(x, y, sample, options, &mut r)
        })
        .collect()
}

struct Builder<'a> {
    x: &'a Design,
    y: &'a [bool],
    options: TreeOptions,
    mtry: usize,
    nodes: Vec<Node>,
}

fn grow(x: &Design, y: &[bool], sample: Vec<usize>, options: TreeOptions, r: &mut rng::Rng) -> Tree {
    let mtry = (libm::sqrt(x.cols as f64) as usize).clamp(1, x.cols.max(1));
    let mut b = Builder {
        x,
        y,
        options,
        mtry,
        nodes: Vec::new(),
    };
    b.build(sample, 0, r);
    Tree { nodes: b.nodes }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn build(&mut self, mut idx: Vec<usize>, depth: usize, r: &mut rng::Rng) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probability: if n == 0 { 0.5 } else { pos as f64 / n as f64 },
        });
        let min_leaf = self.options.min_leaf.max(1);
        if depth >= self.options.max_depth || n < 2 * min_leaf || pos == 0 || pos == n || self.x.cols == 0 {
            return at;
        }

        let mut columns: Vec<usize> = (0..self.x.cols).collect();
        rng::shuffle(&mut columns, r);
        columns.truncate(self.mtry);
        columns.sort_unstable();

        let parent = gini(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for &col in &columns {
            idx.sort_by(|&a, &b| self.x.data[a * self.x.cols + col].total_cmp(&self.x.data[b * self.x.cols + col]));
            let value = |k: usize| self.x.data[idx[k] * self.x.cols + col];
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.y[idx[k]] {
                    left_pos += 1;
                }
                let left_n = k + 1;
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let (lo, hi) = (value(k), value(k + 1));
                if lo == hi {
                    continue;
                }
                let weighted = (left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(pos - left_pos, right_n))
                    / n as f64;
                let gain = parent - weighted;
                let threshold = 0.5 * (lo + hi);
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, col, threshold));
                }
            }
        }
        let Some((gain, column, threshold)) = best else {
            return at;
        };
        if gain <= 1e-12 {
            return at;
        }
        let cols = self.x.cols;
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x.data[i * cols + column] <= threshold);
        let left = self.build(left_idx, depth + 1, r);
        let right = self.build(right_idx, depth + 1, r);
        self.nodes[at] = Node::Split {
            column,
            threshold,
            left,
            right,
        };
        at
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_split_separates_step_function() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let x = Design::from_rows(&rows);
        let forest = fit_forest(
            &x,
            &y,
            TreeOptions {
                n_trees: 1,
                max_depth: 1,
                min_leaf: 1,
            },
            3,
        );
        let t = &forest[0];
        assert!(t.predict(&[0.0]) < 0.2);
        assert!(t.predict(&[39.0]) > 0.8);
    }

    #[test]
    fn depth_zero_is_a_single_leaf() {
        let x = Design::from_rows(&[vec![0.0], vec![1.0]]);
        let forest = fit_forest(&x, &[false, true], TreeOptions { n_trees: 2, max_depth: 0, min_leaf: 1 }, 1);
        assert!(forest.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn min_leaf_is_respected() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
        let x = Design::from_rows(&rows);
        let forest = fit_forest(&x, &y, TreeOptions { n_trees: 3, max_depth: 6, min_leaf: 8 }, 5);
        for t in &forest {
            // every split leaves >= 8 bootstrap rows per side, so at most 3 leaves from 30
            let leaves = t.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count();
            assert!(leaves <= 3);
        }
    }
}
