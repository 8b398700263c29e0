use serde::{Deserialize, Serialize};

use super::kdtree::{squared_distance, KdTree};
use super::trajectory::Trajectory;
use crate::env::{ActionVec, StateVec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub state: StateVec,
    pub parent: Option<usize>,
    pub action_from_parent: Option<ActionVec>,
    /// Reward of the edge from the parent; 0 at the root.
    pub reward: f64,
    pub depth: usize,
    /// Discounted return accumulated from the root: `sum_{t<depth} g^t r_t`.
    pub cum_return: f64,
    pub in_goal: bool,
    /// The edge into this node ended the episode.
    pub done: bool,
}

impl TreeNode {
    fn expandable(&self, horizon: usize) -> bool {
        self.depth < horizon && !self.done
    }
}

/// Tree of valid transitions rooted at the start state.
///
/// Nodes are appended only, so parents always precede children. Normalized
/// states of nodes below the horizon are mirrored in a kd-tree for
/// nearest-neighbour queries.
#[derive(Clone, Debug)]
pub struct ExplorationTree {
    nodes: Vec<TreeNode>,
    normalized: Vec<Vec<f64>>,
    expandable: KdTree,
    horizon: usize,
    discount: f64,
}

impl ExplorationTree {
    pub fn new(root: StateVec, normalized_root: Vec<f64>, in_goal: bool, horizon: usize, discount: f64) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            normalized: Vec::new(),
            expandable: KdTree::new(normalized_root.len()),
            horizon,
            discount,
        };
        tree.push(
            TreeNode {
                state: root,
                parent: None,
                action_from_parent: None,
                reward: 0.0,
                depth: 0,
                cum_return: 0.0,
                in_goal,
                done: false,
            },
            normalized_root,
        );
        tree
    }

    fn push(&mut self, node: TreeNode, normalized: Vec<f64>) -> usize {
        let id = self.nodes.len();
        if node.expandable(self.horizon) {
            self.expandable.insert(id, &normalized);
        }
        self.nodes.push(node);
        self.normalized.push(normalized);
        id
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_child(
        &mut self,
        parent: usize,
        action: ActionVec,
        state: StateVec,
        normalized: Vec<f64>,
        reward: f64,
        in_goal: bool,
        done: bool,
    ) -> usize {
        let p = &self.nodes[parent];
        assert!(p.expandable(self.horizon), "parent cannot be expanded");
        let node = TreeNode {
            state,
            parent: Some(parent),
            action_from_parent: Some(action),
            reward,
            depth: p.depth + 1,
            cum_return: p.cum_return + self.discount.powi(p.depth as i32) * reward,
            in_goal,
            done,
        };
        self.push(node, normalized)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn normalized_state(&self, id: usize) -> &[f64] {
        &self.normalized[id]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Nearest expandable node (below the horizon and not terminal) to a
    /// normalized query, by Euclidean distance; ties go to the lowest index.
    pub fn nearest(&self, query: &[f64]) -> Result<usize> {
        self.expandable
            .nearest(query)
            .map(|(id, _)| id)
            .ok_or(Error::NoExpandableNode)
    }

    /// Reference linear scan with the same contract as [`Self::nearest`].
    pub fn nearest_linear(&self, query: &[f64]) -> Result<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (id, (node, point)) in self.nodes.iter().zip(&self.normalized).enumerate() {
            if !node.expandable(self.horizon) {
                continue;
            }
            let d2 = squared_distance(point, query);
            if best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, id));
            }
        }
        best.map(|(_, id)| id).ok_or(Error::NoExpandableNode)
    }

    /// Index of the node with the largest `cum_return` among `candidates`,
    /// lowest index on ties.
    pub fn argmax_return(&self, candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for id in candidates {
            if best.is_none_or(|b| self.nodes[id].cum_return > self.nodes[b].cum_return) {
                best = Some(id);
            }
        }
        best
    }

    /// Root-to-`leaf` path as a trajectory.
    pub fn extract_trajectory(&self, leaf: usize) -> Trajectory {
        let mut path = Vec::with_capacity(self.nodes[leaf].depth + 1);
        let mut cur = Some(leaf);
        while let Some(id) = cur {
            path.push(id);
            cur = self.nodes[id].parent;
        }
        path.reverse();
        let states = path.iter().map(|&i| self.nodes[i].state.clone()).collect();
        let actions = path[1..]
            .iter()
            .map(|&i| self.nodes[i].action_from_parent.clone().expect("non-root node"))
            .collect();
        let rewards = path[1..].iter().map(|&i| self.nodes[i].reward).collect();
        Trajectory {
            states,
            actions,
            rewards,
            successful: self.nodes[leaf].in_goal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn tree_with_points(points: &[Vec<f64>], horizon: usize) -> ExplorationTree {
        let mut tree = ExplorationTree::new(points[0].clone(), points[0].clone(), false, horizon, 0.99);
        for p in &points[1..] {
            tree.add_child(0, vec![0.0], p.clone(), p.clone(), -1.0, false, false);
        }
        tree
    }

    #[test]
    fn singleton_tree_returns_root() {
        let tree = tree_with_points(&[vec![0.3, 0.3]], 10);
        assert_eq!(tree.nearest(&[-1.0, 1.0]).unwrap(), 0);
        assert_eq!(tree.nearest_linear(&[-1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let tree = tree_with_points(&[vec![5.0, 5.0], vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], 10);
        assert_eq!(tree.nearest(&[0.0, 0.0]).unwrap(), 1);
        assert_eq!(tree.nearest_linear(&[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn kd_index_matches_linear_scan() {
        let mut rng = rng_from_seed(8);
        let mut pts: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        // duplicates and grid-aligned points stress the tie rule
        for i in 0..50 {
            pts.push(pts[i].clone());
            pts.push(vec![(i % 5) as f64 * 0.25, 0.0, 0.0]);
        }
        let tree = tree_with_points(&pts, 10);
        for q in 0..100 {
            let query: Vec<f64> = if q % 10 == 0 {
                vec![0.125, 0.0, 0.0]
            } else {
                (0..3).map(|_| rng.random_range(-1.2..1.2)).collect()
            };
            assert_eq!(tree.nearest(&query).unwrap(), tree.nearest_linear(&query).unwrap());
        }
    }

    #[test]
    fn nodes_at_horizon_are_not_expandable() {
        let mut tree = ExplorationTree::new(vec![0.0], vec![0.0], false, 1, 0.99);
        assert_eq!(tree.nearest(&[1.0]).unwrap(), 0);
        let c = tree.add_child(0, vec![1.0], vec![1.0], vec![1.0], -1.0, false, false);
        assert_eq!(tree.node(c).depth, 1);
        // the child sits at the horizon, so only the root is a candidate
        assert_eq!(tree.nearest(&[1.0]).unwrap(), 0);

        let capped = ExplorationTree::new(vec![0.0], vec![0.0], false, 0, 0.99);
        assert!(matches!(capped.nearest(&[0.0]), Err(Error::NoExpandableNode)));
        assert!(matches!(capped.nearest_linear(&[0.0]), Err(Error::NoExpandableNode)));
    }

    #[test]
    fn cumulative_return_is_discounted_prefix_sum() {
        let mut tree = ExplorationTree::new(vec![0.0], vec![0.0], false, 100, 0.9);
        let mut parent = 0;
        for i in 0..5 {
            parent = tree.add_child(parent, vec![0.0], vec![i as f64], vec![i as f64], -1.0, false, false);
        }
        let expected: f64 = (0..5).map(|t| -(0.9f64).powi(t)).sum();
        assert!((tree.node(parent).cum_return - expected).abs() < 1e-12);
        let traj = tree.extract_trajectory(parent);
        assert_eq!(traj.len(), 5);
        assert!((traj.discounted_return(0.9) - expected).abs() < 1e-12);
    }

    #[test]
    fn root_trajectory_is_empty() {
        let tree = ExplorationTree::new(vec![0.0], vec![0.0], true, 10, 0.99);
        let traj = tree.extract_trajectory(0);
        assert_eq!(traj.len(), 0);
        assert_eq!(traj.states.len(), 1);
        assert!(traj.successful);
    }
}
