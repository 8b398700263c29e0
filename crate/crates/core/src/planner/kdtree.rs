/// Incremental kd-tree over points identified by insertion ids.
///
/// Nearest-neighbour queries minimize `(squared distance, id)`
/// lexicographically, so ties resolve to the lowest id exactly as a linear
/// scan in id order would.
#[derive(Clone, Debug, Default)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    ids: Vec<usize>,
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn insert(&mut self, id: usize, point: &[f64]) {
        assert_eq!(point.len(), self.dim);
        let slot = self.ids.len();
        self.points.extend_from_slice(point);
        self.ids.push(id);
        self.left.push(None);
        self.right.push(None);
        if slot == 0 {
            return;
        }
        let mut node = 0;
        let mut depth = 0;
        loop {
            let axis = depth % self.dim;
            let go_left = point[axis] < self.points[node * self.dim + axis];
            let child = if go_left {
                &mut self.left[node]
            } else {
                &mut self.right[node]
            };
            match *child {
                Some(next) => {
                    node = next;
                    depth += 1;
                }
                None => {
                    *child = Some(slot);
                    return;
                }
            }
        }
    }

    /// `(id, squared distance)` of the nearest point.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        if self.ids.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        // (slot, depth, lower bound on squared distance of the subtree)
        let mut stack = vec![(0usize, 0usize, 0.0f64)];
        while let Some((node, depth, bound)) = stack.pop() {
            // `>` rather than `>=` keeps equidistant candidates reachable.
            if bound > best.0 {
                continue;
            }
            let d2 = squared_distance(self.point(node), query);
            let id = self.ids[node];
            if d2 < best.0 || (d2 == best.0 && id < best.1) {
                best = (d2, id);
            }
            let axis = depth % self.dim;
            let diff = query[axis] - self.points[node * self.dim + axis];
            let (near, far) = if diff < 0.0 {
                (self.left[node], self.right[node])
            } else {
                (self.right[node], self.left[node])
            };
            if let Some(f) = far {
                stack.push((f, depth + 1, diff * diff));
            }
            if let Some(n) = near {
                stack.push((n, depth + 1, bound));
            }
        }
        Some((best.1, best.0))
    }
}
