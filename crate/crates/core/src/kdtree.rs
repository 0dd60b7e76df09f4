//! Insert-only k-d tree for exact nearest-neighbour queries over a growing
//! point set.
//!
//! Ties between equidistant points resolve to the highest insertion index.
//! Re-inserting coordinates that are already present only updates the stored
//! index, so runs of identical points never deepen the tree.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    /// Most recent insertion index carrying these exact coordinates.
    index: usize,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    nodes: Vec<Node>,
    inserted: usize,
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            nodes: Vec::new(),
            inserted: 0,
        }
    }

    /// Number of insertions so far (duplicates included).
    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.inserted
    }

    #[inline]
    fn point(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    /// Inserts `p` and returns its insertion index.
    pub fn insert(&mut self, p: &[f64]) -> usize {
        assert_eq!(p.len(), self.dim, "point dimension mismatch");
        let index = self.inserted;
        self.inserted += 1;
        if self.nodes.is_empty() {
            self.push_node(p, index);
            return index;
        }
        let mut cur = 0usize;
        let mut depth = 0usize;
        loop {
            if self.point(cur) == p {
                self.nodes[cur].index = index;
                return index;
            }
            let axis = depth % self.dim;
            let go_left = p[axis] < self.point(cur)[axis];
            let next = if go_left {
                self.nodes[cur].left
            } else {
                self.nodes[cur].right
            };
            if next == NIL {
                let id = self.push_node(p, index);
                if go_left {
                    self.nodes[cur].left = id;
                } else {
                    self.nodes[cur].right = id;
                }
                return index;
            }
            cur = next as usize;
            depth += 1;
        }
    }

    fn push_node(&mut self, p: &[f64], index: usize) -> u32 {
        let id = self.nodes.len();
        self.coords.extend_from_slice(p);
        self.nodes.push(Node {
            index,
            left: NIL,
            right: NIL,
        });
        id as u32
    }

    /// Returns `(insertion index, squared distance)` of the nearest stored
    /// point, or `None` when the tree is empty.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut found = false;
        self.search(0, 0, q, &mut best, &mut found);
        Some(best)
    }

    fn search(
        &self,
        node: usize,
        depth: usize,
        q: &[f64],
        best: &mut (usize, f64),
        found: &mut bool,
    ) {
        let p = self.point(node);
        let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        let idx = self.nodes[node].index;
        if !*found || d2 < best.1 || (d2 == best.1 && idx > best.0) {
            *best = (idx, d2);
            *found = true;
        }
        let axis = depth % self.dim;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            (self.nodes[node].left, self.nodes[node].right)
        } else {
            (self.nodes[node].right, self.nodes[node].left)
        };
        if near != NIL {
            self.search(near as usize, depth + 1, q, best, found);
        }
        // Equality keeps the far side so ties can still resolve to a newer point.
        if far != NIL && delta * delta <= best.1 {
            self.search(far as usize, depth + 1, q, best, found);
        }
    }
}
