use super::distance::{closest_point_on_triangle, ray_triangle, RayHit};
use super::{Aabb, Point, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: children == None, triangles order[start..end]
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Bounding-volume hierarchy over a triangle list.
#[derive(Debug, Clone)]
pub(crate) struct Bvh {
    tris: Vec<[Point; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn new(tris: Vec<[Point; 3]>) -> Self {
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            let centroids: Vec<Point> = tris
                .iter()
                .map(|t| Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
                .collect();
            let n = tris.len();
            build(&tris, &centroids, &mut order, 0, n, &mut nodes);
        }
        Self { tris, order, nodes }
    }

    pub fn triangles(&self) -> &[[Point; 3]] {
        &self.tris
    }

    /// Minimum distance from `p` to any triangle, with the triangle id.
    pub fn closest(&self, p: &Point) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.distance_squared(p) > best.0 {
                continue;
            }
            match node.children {
                None => {
                    for &ti in &self.order[node.start..node.end] {
                        let t = &self.tris[ti];
                        let d2 = (closest_point_on_triangle(p, &t[0], &t[1], &t[2]) - p).norm_squared();
                        if d2 < best.0 || (d2 == best.0 && ti < best.1) {
                            best = (d2, ti);
                        }
                    }
                }
                Some((l, r)) => {
                    let dl = self.nodes[l].bounds.distance_squared(p);
                    let dr = self.nodes[r].bounds.distance_squared(p);
                    // nearer child popped first
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        Some((best.0.sqrt(), best.1))
    }

    /// Every crossing of the ray `origin + t·dir`, t > 0.
    pub fn ray_hits(&self, origin: &Point, dir: &Vec3, edge_eps: f64) -> Vec<RayHit> {
        let mut hits = Vec::new();
        if self.nodes.is_empty() {
            return hits;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !ray_box(origin, &inv, &node.bounds.expanded(edge_eps.max(1e-12))) {
                continue;
            }
            match node.children {
                None => {
                    for &ti in &self.order[node.start..node.end] {
                        if let Some(h) = ray_triangle(origin, dir, &self.tris[ti], edge_eps) {
                            hits.push(h);
                        }
                    }
                }
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        hits
    }
}

fn ray_box(origin: &Point, inv: &Vec3, b: &Aabb) -> bool {
    let mut tmin: f64 = 0.0;
    let mut tmax = f64::INFINITY;
    for i in 0..3 {
        let t1 = (b.min[i] - origin[i]) * inv[i];
        let t2 = (b.max[i] - origin[i]) * inv[i];
        // NaN (zero direction component on a slab boundary) keeps the box
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if lo.is_nan() || hi.is_nan() {
            if origin[i] < b.min[i] || origin[i] > b.max[i] {
                return false;
            }
            continue;
        }
        tmin = tmin.max(lo);
        tmax = tmax.min(hi);
    }
    tmin <= tmax
}

fn build(
    tris: &[[Point; 3]],
    centroids: &[Point],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let bounds = order[start..end]
        .iter()
        .flat_map(|&i| tris[i].iter())
        .fold(None::<Aabb>, |b, p| Some(b.map_or(Aabb::new(*p, *p), |b| b.including(p))))
        .unwrap();
    let id = nodes.len();
    nodes.push(Node { bounds, start, end, children: None });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let cb = Aabb::from_points(order[start..end].iter().map(|&i| &centroids[i])).unwrap();
    let ext = cb.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis])
    });
    let l = build(tris, centroids, order, start, mid, nodes);
    let r = build(tris, centroids, order, mid, end, nodes);
    nodes[id].children = Some((l, r));
    id
}
