use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Binary tree stored as a node array with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, x: &[T]) -> T {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Reserves a slot to be filled once children are known.
    pub(crate) fn push_placeholder(&mut self) -> usize {
        self.nodes.push(Node::Leaf { value: T::zero() });
        self.nodes.len() - 1
    }
}

/// Cut point between two consecutive distinct sorted values that keeps `lo`
/// left and `hi` right.
pub(crate) fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}
