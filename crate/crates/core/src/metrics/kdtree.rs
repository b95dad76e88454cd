use nalgebra::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Static 3-D k-d tree for exact nearest-neighbour queries.
///
/// Ties in distance resolve to the smallest original index, so results match
/// a linear scan that keeps the first minimum.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> KdTree {
        let mut items: Vec<(u32, [f64; 3])> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u32, [p.x, p.y, p.z]))
            .collect();
        let mut nodes = Vec::new();
        if !items.is_empty() {
            build_node(&mut items, 0, &mut nodes);
        }
        KdTree {
            points: items.iter().map(|(_, p)| *p).collect(),
            ids: items.iter().map(|(i, _)| *i).collect(),
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, query: &Point3<f64>) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best = (f64::INFINITY, u32::MAX);
        self.search(0, &q, &mut best);
        Some((best.1 as usize, best.0))
    }

    fn search(&self, node: usize, q: &[f64; 3], best: &mut (f64, u32)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start as usize..end as usize {
                    let p = &self.points[k];
                    let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    let id = self.ids[k];
                    if d < best.0 || (d == best.0 && id < best.1) {
                        *best = (d, id);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, q, best);
                if diff * diff <= best.0 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

fn build_node(items: &mut [(u32, [f64; 3])], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let index = nodes.len() as u32;
    if items.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + items.len()) as u32,
        });
        return index;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (_, p) in items.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        a.1[axis].total_cmp(&b.1[axis]).then(a.0.cmp(&b.0))
    });
    let value = items[mid].1[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_items, right_items) = items.split_at_mut(mid);
    let left = build_node(left_items, offset, nodes);
    let right = build_node(right_items, offset + mid, nodes);
    nodes[index as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    index
}
