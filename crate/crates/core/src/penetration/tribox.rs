//! Triangle / axis-aligned box overlap via the separating axis theorem
//! (Akenine-Möller). Touching counts as overlap.

use crate::geometry::{Point, Vec3};

#[inline]
fn axis_test(a: f64, b: f64, fa: f64, fb: f64, v0: &Vec3, v_other: &Vec3, axis: usize, half: &Vec3) -> bool {
    // projects v0 and v_other on the edge-cross axis defined by (a, b) over
    // the two remaining components; returns true when separated
    let (i, j) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let sign = if axis == 1 { -1.0 } else { 1.0 };
    let p0 = sign * (a * v0[i] - b * v0[j]);
    let p1 = sign * (a * v_other[i] - b * v_other[j]);
    let (mn, mx) = if p0 < p1 { (p0, p1) } else { (p1, p0) };
    let rad = fa * half[i] + fb * half[j];
    mn > rad || mx < -rad
}

fn plane_box_overlap(normal: &Vec3, vert: &Vec3, half: &Vec3) -> bool {
    let mut vmin = Vec3::zeros();
    let mut vmax = Vec3::zeros();
    for q in 0..3 {
        if normal[q] > 0.0 {
            vmin[q] = -half[q] - vert[q];
            vmax[q] = half[q] - vert[q];
        } else {
            vmin[q] = half[q] - vert[q];
            vmax[q] = -half[q] - vert[q];
        }
    }
    if normal.dot(&vmin) > 0.0 {
        return false;
    }
    normal.dot(&vmax) >= 0.0
}

/// True when triangle `tri` intersects the closed box `center ± half`.
pub fn tri_box_overlap(center: &Point, half: &Vec3, tri: &[Point; 3]) -> bool {
    let v0 = tri[0] - center;
    let v1 = tri[1] - center;
    let v2 = tri[2] - center;
    let e0 = v1 - v0;
    let e1 = v2 - v1;
    let e2 = v0 - v2;

    // nine edge-cross axes
    let edges = [(e0, &v0, &v2), (e1, &v0, &v2), (e2, &v0, &v1)];
    for (e, pa, pb) in edges {
        let f = e.abs();
        // X axis: uses (y, z) components
        if axis_test(e.z, e.y, f.z, f.y, pa, pb, 0, half) {
            return false;
        }
        if axis_test(e.z, e.x, f.z, f.x, pa, pb, 1, half) {
            return false;
        }
        if axis_test(e.y, e.x, f.y, f.x, pa, pb, 2, half) {
            return false;
        }
    }

    // box face normals
    for q in 0..3 {
        let mn = v0[q].min(v1[q]).min(v2[q]);
        let mx = v0[q].max(v1[q]).max(v2[q]);
        if mn > half[q] || mx < -half[q] {
            return false;
        }
    }

    let normal = e0.cross(&e1);
    plane_box_overlap(&normal, &v0, half)
}
