//! Procedural meshes used by fixtures and tests.

use std::collections::HashMap;

use super::{Point, TriMesh};

/// Closed box with outward-facing triangles.
pub fn cuboid(min: Point, max: Point) -> TriMesh {
    let v = |x: bool, y: bool, z: bool| {
        Point::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh::new(vertices, faces, None).expect("valid cuboid")
}

/// Icosahedron refined `subdivisions` times and projected onto the sphere.
pub fn icosphere(center: Point, radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<[f64; 3]>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (pa, pb) = (verts[a as usize], verts[b as usize]);
                verts.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0, (pa[2] + pb[2]) / 2.0]);
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts
        .iter()
        .map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            Point::new(
                center.x + radius * v[0] / n,
                center.y + radius * v[1] / n,
                center.z + radius * v[2] / n,
            )
        })
        .collect();
    TriMesh::new(vertices, faces, None).expect("valid icosphere")
}

/// Upward-facing grid over `[x0,x1]×[y0,y1]` with `nx×ny` cells and
/// vertex heights from `height(x, y)`. Vertices are row-major in y then x.
pub fn height_grid(
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    height: impl Fn(f64, f64) -> f64,
) -> TriMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = y0 + (y1 - y0) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            vertices.push(Point::new(x, y, height(x, y)));
        }
    }
    let id = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut faces = Vec::with_capacity(nx * ny * 2);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces, None).expect("valid grid")
}

/// Table: tessellated top slab on four legs. `top` is the top surface height.
pub fn table(center_x: f64, center_y: f64, half_x: f64, half_y: f64, top: f64, cells: usize) -> TriMesh {
    let thickness = 0.03;
    let leg = 0.04;
    let top_grid = height_grid(
        center_x - half_x,
        center_y - half_y,
        center_x + half_x,
        center_y + half_y,
        cells,
        cells,
        |_, _| top,
    );
    let mut parts = vec![top_grid];
    // slab sides and underside as a box just below the top surface
    parts.push(cuboid(
        Point::new(center_x - half_x, center_y - half_y, top - thickness),
        Point::new(center_x + half_x, center_y + half_y, top - thickness * 0.5),
    ));
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
        let cx = center_x + sx * (half_x - leg);
        let cy = center_y + sy * (half_y - leg);
        parts.push(cuboid(
            Point::new(cx - leg / 2.0, cy - leg / 2.0, 0.0),
            Point::new(cx + leg / 2.0, cy + leg / 2.0, top - thickness),
        ));
    }
    TriMesh::merge(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_shapes_are_watertight() {
        assert!(cuboid(Point::origin(), Point::new(1.0, 2.0, 3.0)).is_watertight());
        let s = icosphere(Point::origin(), 1.0, 2);
        assert_eq!(s.face_count(), 320);
        assert!(s.is_watertight());
        assert!(!height_grid(0.0, 0.0, 1.0, 1.0, 2, 2, |_, _| 0.0).is_watertight());
    }

    #[test]
    fn cuboid_normals_point_out() {
        let c = cuboid(Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0));
        for f in 0..c.face_count() {
            let [a, b, d] = c.triangle(f);
            let centroid = (a.coords + b.coords + d.coords) / 3.0;
            assert!(c.face_normal(f).dot(&centroid) > 0.0, "face {f}");
        }
    }
}
