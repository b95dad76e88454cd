use nalgebra::Point3;

use super::{Aabb, GeometryError, Ray, TriangleMesh};

/// Leaves hold at most this many triangles.
pub const MAX_LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 16;

/// Node of a flattened BVH. Interior nodes store their two children at
/// `first` and `first + 1`; leaves store a range of the triangle permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    first: u32,
    count: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }

    /// Child node indices of an interior node.
    pub fn children(&self) -> Option<[usize; 2]> {
        (!self.is_leaf()).then(|| [self.first as usize, self.first as usize + 1])
    }

    /// Range into [`Bvh::order`] of a leaf.
    pub fn leaf_range(&self) -> Option<std::ops::Range<usize>> {
        self.is_leaf()
            .then(|| self.first as usize..(self.first + self.count) as usize)
    }
}

/// Bounding volume hierarchy over a [`TriangleMesh`], built with binned SAH.
/// Construction is deterministic and the structure is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
    scene_bounds: Aabb,
}

#[derive(Clone, Copy)]
struct Bin {
    bounds: Aabb,
    count: usize,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Bvh, GeometryError> {
        if mesh.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let n = mesh.len();
        let scene_bounds = mesh.bounds();
        let coord_scale = scene_bounds
            .min
            .coords
            .abs()
            .sup(&scene_bounds.max.coords.abs())
            .max();
        // Padding covers the widened barycentric test and slab rounding.
        let tri_bounds: Vec<Aabb> = (0..n)
            .map(|i| {
                let b = mesh.triangle_bounds(i);
                b.padded(1e-8 * b.extent().max() + 1e-12 * (1.0 + coord_scale))
            })
            .collect();
        let centroids: Vec<Point3<f64>> = tri_bounds.iter().map(Aabb::center).collect();

        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = vec![BvhNode {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        }];
        let mut pending = vec![(0usize, 0usize, n)];
        while let Some((node, start, end)) = pending.pop() {
            let bounds = order[start..end]
                .iter()
                .fold(Aabb::empty(), |acc, &t| acc.union(&tri_bounds[t as usize]));
            nodes[node].bounds = bounds;
            let count = end - start;
            if count <= MAX_LEAF_SIZE {
                nodes[node].first = start as u32;
                nodes[node].count = count as u32;
                continue;
            }
            let mid = split(&mut order[start..end], &tri_bounds, &centroids) + start;
            let left = nodes.len();
            nodes.push(BvhNode {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            nodes.push(BvhNode {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            nodes[node].first = left as u32;
            nodes[node].count = 0;
            pending.push((left + 1, mid, end));
            pending.push((left, start, mid));
        }
        Ok(Bvh {
            nodes,
            order,
            scene_bounds,
        })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle permutation referenced by leaf ranges.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn scene_bounds(&self) -> &Aabb {
        &self.scene_bounds
    }

    /// Deduplication tolerance scaled to the scene: `1e-6 * max(1, diagonal)`.
    pub fn dedup_epsilon(&self) -> f64 {
        super::DEFAULT_DEDUP_EPSILON * self.scene_bounds.diagonal().max(1.0)
    }

    /// Calls `visit` with every triangle whose leaf box the ray touches.
    pub fn traverse(&self, ray: &Ray, mut visit: impl FnMut(usize)) {
        let inv = ray.inv_direction();
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(index) = stack.pop() {
            let node = &self.nodes[index as usize];
            if !node.bounds.hit_by(ray, &inv) {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for &t in &self.order[start..start + node.count as usize] {
                    visit(t as usize);
                }
            } else {
                stack.push(node.first + 1);
                stack.push(node.first);
            }
        }
    }
}

/// Partitions `order` and returns the split position, always in `1..len`.
fn split(order: &mut [u32], tri_bounds: &[Aabb], centroids: &[Point3<f64>]) -> usize {
    let centroid_bounds = Aabb::from_points(order.iter().map(|&t| &centroids[t as usize]));
    let extent = centroid_bounds.extent();

    let mut best: Option<(f64, usize, usize)> = None;
    for axis in 0..3 {
        if extent[axis] <= 0.0 {
            continue;
        }
        let lo = centroid_bounds.min[axis];
        let scale = SAH_BINS as f64 / extent[axis];
        let bin_of = |t: u32| -> usize {
            (((centroids[t as usize][axis] - lo) * scale) as usize).min(SAH_BINS - 1)
        };
        let mut bins = [Bin {
            bounds: Aabb::empty(),
            count: 0,
        }; SAH_BINS];
        for &t in order.iter() {
            let b = &mut bins[bin_of(t)];
            b.bounds = b.bounds.union(&tri_bounds[t as usize]);
            b.count += 1;
        }
        let mut right_area = [0.0; SAH_BINS];
        let mut right_count = [0usize; SAH_BINS];
        let mut acc = Aabb::empty();
        let mut cnt = 0;
        for i in (1..SAH_BINS).rev() {
            acc = acc.union(&bins[i].bounds);
            cnt += bins[i].count;
            right_area[i] = if cnt > 0 { acc.surface_area() } else { 0.0 };
            right_count[i] = cnt;
        }
        let mut acc = Aabb::empty();
        let mut cnt = 0;
        for i in 0..SAH_BINS - 1 {
            acc = acc.union(&bins[i].bounds);
            cnt += bins[i].count;
            let rc = right_count[i + 1];
            if cnt == 0 || rc == 0 {
                continue;
            }
            let cost = cnt as f64 * acc.surface_area() + rc as f64 * right_area[i + 1];
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, i));
            }
        }
    }

    match best {
        Some((_, axis, split_bin)) => {
            let lo = centroid_bounds.min[axis];
            let scale = SAH_BINS as f64 / extent[axis];
            let goes_left = |t: &u32| {
                let b = (((centroids[*t as usize][axis] - lo) * scale) as usize).min(SAH_BINS - 1);
                b <= split_bin
            };
            stable_partition(order, goes_left)
        }
        None => {
            // All centroids coincide: split by index.
            order.len() / 2
        }
    }
}

fn stable_partition(order: &mut [u32], pred: impl Fn(&u32) -> bool) -> usize {
    let (left, right): (Vec<u32>, Vec<u32>) = order.iter().partition(|t| pred(t));
    let mid = left.len();
    order[..mid].copy_from_slice(&left);
    order[mid..].copy_from_slice(&right);
    mid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn assert_structure(bvh: &Bvh, n: usize) {
        let mut seen = vec![0usize; n];
        for node in bvh.nodes() {
            if let Some(range) = node.leaf_range() {
                assert!(range.len() <= MAX_LEAF_SIZE);
                for &t in &bvh.order()[range] {
                    seen[t as usize] += 1;
                }
            } else {
                let [l, r] = node.children().unwrap();
                assert!(node.bounds.contains(&bvh.nodes()[l].bounds));
                assert!(node.bounds.contains(&bvh.nodes()[r].bounds));
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "every triangle in exactly one leaf");
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let mesh = TriangleMesh::new(vec![], vec![]).unwrap();
        assert_eq!(Bvh::build(&mesh), Err(GeometryError::EmptyMesh));
    }

    #[test]
    fn single_triangle_is_one_leaf() {
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert_eq!(bvh.nodes()[0].leaf_range(), Some(0..1));
        assert_eq!(bvh.order(), &[0]);
    }

    #[test]
    fn cube_triangles_reachable_exactly_once() {
        let mesh = shapes::cube(Point3::new(0.0, 0.0, 2.0), 1.0);
        assert_eq!(mesh.len(), 12);
        let bvh = Bvh::build(&mesh).unwrap();
        assert_structure(&bvh, 12);
    }

    #[test]
    fn larger_meshes_keep_the_invariants() {
        let mesh = shapes::icosphere(Point3::origin(), 1.0, 3);
        let bvh = Bvh::build(&mesh).unwrap();
        assert_structure(&bvh, mesh.len());
        // Coincident centroids fall back to index splits.
        let tri = shapes::cube(Point3::origin(), 1.0);
        let stacked = (0..8).fold(tri.clone(), |acc, _| acc.merged(&tri));
        let bvh = Bvh::build(&stacked).unwrap();
        assert_structure(&bvh, stacked.len());
    }

    #[test]
    fn construction_is_deterministic() {
        let mesh = shapes::torus(Point3::origin(), 1.0, 0.3, 24, 12);
        assert_eq!(Bvh::build(&mesh).unwrap(), Bvh::build(&mesh).unwrap());
    }
}
