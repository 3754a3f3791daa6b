use super::{Point, Vec3};

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance(p: &Point, tri: &[Point; 3]) -> f64 {
    (closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2]) - p).norm()
}

/// Ray/triangle crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    /// The crossing lies within `edge_eps` of an edge or vertex, or the ray
    /// is parallel to the triangle plane; parity along this ray is unreliable.
    pub grazing: bool,
}

/// Möller–Trumbore intersection of the ray `origin + t·dir` (t > 0).
///
/// Returns `None` for clean misses. Near-misses within `edge_eps`
/// (barycentric, scaled by edge length) come back as grazing hits.
pub fn ray_triangle(origin: &Point, dir: &Vec3, tri: &[Point; 3], edge_eps: f64) -> Option<RayHit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-12 * scale {
        // parallel: only matters if the ray actually lies in the plane
        let n = e1.cross(&e2);
        let off = n.dot(&(origin - tri[0]));
        if off.abs() <= edge_eps * n.norm() {
            let to_centroid = (tri[0].coords + tri[1].coords + tri[2].coords) / 3.0 - origin.coords;
            if to_centroid.dot(dir) > 0.0 {
                return Some(RayHit { t: to_centroid.norm(), grazing: true });
            }
        }
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(&pvec) * inv;
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    let t = e2.dot(&qvec) * inv;
    let w = 1.0 - u - v;
    let eps = edge_eps / e1.norm().min(e2.norm()).max(f64::MIN_POSITIVE);
    if u < -eps || v < -eps || w < -eps || t < -edge_eps {
        return None;
    }
    let grazing = u <= eps || v <= eps || w <= eps || t <= edge_eps;
    Some(RayHit { t, grazing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> [Point; 3] {
        [Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)]
    }

    #[test]
    fn closest_point_regions() {
        let t = tri();
        // face interior
        assert_eq!(point_triangle_distance(&Point::new(0.2, 0.2, 0.5), &t), 0.5);
        // vertex region
        let d = point_triangle_distance(&Point::new(-1.0, -1.0, 0.0), &t);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        // hypotenuse edge region
        let d = point_triangle_distance(&Point::new(1.0, 1.0, 0.0), &t);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ray_hits_and_grazes() {
        let t = tri();
        let up = Vec3::z();
        let hit = ray_triangle(&Point::new(0.2, 0.2, -1.0), &up, &t, 1e-9).unwrap();
        assert!(!hit.grazing && (hit.t - 1.0).abs() < 1e-15);
        assert!(ray_triangle(&Point::new(2.0, 2.0, -1.0), &up, &t, 1e-9).is_none());
        assert!(ray_triangle(&Point::new(0.5, 0.0, -1.0), &up, &t, 1e-9).unwrap().grazing);
        assert!(ray_triangle(&Point::new(0.2, 0.2, 1.0), &up, &t, 1e-9).is_none());
    }
}
