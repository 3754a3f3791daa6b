use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::PenetrationError;
use crate::geometry::{Aabb, Point, Vec3};

const MAGIC: &[u8; 4] = b"SGVX";
const VERSION: u32 = 1;

/// Largest grid the JSON debug dump will write.
pub const JSON_DUMP_MAX_CELLS: usize = 32 * 32 * 32;

/// Axis-aligned occupancy grid.
///
/// Cell `(i, j, k)` covers `[origin + (i,j,k)·s, origin + (i+1,j+1,k+1)·s)`;
/// a point maps to `floor((p - origin) / s)`. Bits are stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Point,
    voxel_size: f64,
    dims: [usize; 3],
    bits: Vec<u64>,
    filled: bool,
}

impl VoxelGrid {
    pub fn empty(origin: Point, voxel_size: f64, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            voxel_size,
            dims,
            bits: vec![0; n.div_ceil(64)],
            filled: false,
        }
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Whether the downward fill has been applied.
    pub fn is_filled(&self) -> bool {
        self.filled
    }

    pub(crate) fn set_filled(&mut self, filled: bool) {
        self.filled = filled;
    }

    /// Region covered by the grid.
    pub fn bounds(&self) -> Aabb {
        let s = self.voxel_size;
        let ext = Vec3::new(self.dims[0] as f64 * s, self.dims[1] as f64 * s, self.dims[2] as f64 * s);
        Aabb::new(self.origin, self.origin + ext)
    }

    #[inline]
    pub fn linear(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn unlinear(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        let idx = self.linear(i, j, k);
        self.bits[idx >> 6] >> (idx & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.linear(i, j, k);
        let mask = 1u64 << (idx & 63);
        if value {
            self.bits[idx >> 6] |= mask;
        } else {
            self.bits[idx >> 6] &= !mask;
        }
    }

    /// Signed cell coordinate containing `p` (may lie outside the grid).
    pub fn cell_coord(&self, p: &Point) -> [i64; 3] {
        let s = self.voxel_size;
        [
            ((p.x - self.origin.x) / s).floor() as i64,
            ((p.y - self.origin.y) / s).floor() as i64,
            ((p.z - self.origin.z) / s).floor() as i64,
        ]
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: &Point) -> Option<[usize; 3]> {
        let c = self.cell_coord(p);
        let inside = (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a]);
        inside.then(|| [c[0] as usize, c[1] as usize, c[2] as usize])
    }

    /// Occupancy at `p`; points outside the grid are free.
    pub fn occupied_at(&self, p: &Point) -> bool {
        self.cell_of(p).is_some_and(|[i, j, k]| self.get(i, j, k))
    }

    /// Lower corner of a cell, computed as `origin + index·s`.
    pub fn cell_min(&self, i: usize, j: usize, k: usize) -> Point {
        let s = self.voxel_size;
        Point::new(
            self.origin.x + i as f64 * s,
            self.origin.y + j as f64 * s,
            self.origin.z + k as f64 * s,
        )
    }

    pub fn cell_bounds(&self, i: usize, j: usize, k: usize) -> Aabb {
        let s = self.voxel_size;
        Aabb::new(
            self.cell_min(i, j, k),
            Point::new(
                self.origin.x + (i + 1) as f64 * s,
                self.origin.y + (j + 1) as f64 * s,
                self.origin.z + (k + 1) as f64 * s,
            ),
        )
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Coordinates of occupied cells in storage order.
    pub fn occupied_cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.cell_count();
        self.bits.iter().enumerate().flat_map(move |(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
            .filter(move |&idx| idx < n)
            .map(move |idx| self.unlinear(idx))
        })
    }

    /// Highest occupied `k` in column `(i, j)`.
    pub fn column_top(&self, i: usize, j: usize) -> Option<usize> {
        (0..self.dims[2]).rev().find(|&k| self.get(i, j, k))
    }

    /// Range of cell indices along `axis` whose closed extent touches
    /// `[lo, hi]`, clipped to the grid. `None` when nothing touches.
    pub fn touching_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let s = self.voxel_size;
        let o = self.origin[axis];
        let n = self.dims[axis] as i64;
        let a = (((lo - o) / s).floor() as i64 - 1).max(0);
        let b = (((hi - o) / s).floor() as i64 + 1).min(n - 1);
        let mut first = None;
        let mut last = None;
        for c in a..=b {
            let cmin = o + c as f64 * s;
            let cmax = o + (c + 1) as f64 * s;
            if cmin <= hi && cmax >= lo {
                first.get_or_insert(c as usize);
                last = Some(c as usize);
            }
        }
        Some((first?, last?))
    }

    /// Any occupied cell whose closed box overlaps `region`.
    pub fn any_occupied_in(&self, region: &Aabb) -> bool {
        let Some((i0, i1)) = self.touching_range(0, region.min.x, region.max.x) else {
            return false;
        };
        let Some((j0, j1)) = self.touching_range(1, region.min.y, region.max.y) else {
            return false;
        };
        let Some((k0, k1)) = self.touching_range(2, region.min.z, region.max.z) else {
            return false;
        };
        (k0..=k1).any(|k| (j0..=j1).any(|j| (i0..=i1).any(|i| self.get(i, j, k))))
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for c in [self.origin.x, self.origin.y, self.origin.z, self.voxel_size] {
            w.write_all(&c.to_le_bytes())?;
        }
        for d in self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&[self.filled as u8])?;
        let nbytes = self.cell_count().div_ceil(8);
        let mut bytes: Vec<u8> = self.bits.iter().flat_map(|w| w.to_le_bytes()).collect();
        bytes.truncate(nbytes);
        w.write_all(&bytes)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, PenetrationError> {
        let bad = |m: &str| PenetrationError::GridFormat(m.to_string());
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| bad(&e.to_string()))?;
        let header = 4 + 4 + 32 + 12 + 1;
        if buf.len() < header || &buf[..4] != MAGIC {
            return Err(bad("missing SGVX header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        if u32_at(4) != VERSION {
            return Err(bad("unsupported grid version"));
        }
        let origin = Point::new(f64_at(8), f64_at(16), f64_at(24));
        let voxel_size = f64_at(32);
        let dims = [u32_at(40) as usize, u32_at(44) as usize, u32_at(48) as usize];
        let filled = buf[52] != 0;
        if !(voxel_size > 0.0) {
            return Err(bad("voxel size must be positive"));
        }
        let mut grid = VoxelGrid::empty(origin, voxel_size, dims);
        let nbytes = grid.cell_count().div_ceil(8);
        let body = &buf[header..];
        if body.len() != nbytes {
            return Err(bad(&format!("expected {nbytes} occupancy bytes, found {}", body.len())));
        }
        for (bi, &b) in body.iter().enumerate() {
            grid.bits[bi / 8] |= (b as u64) << (8 * (bi % 8));
        }
        grid.filled = filled;
        Ok(grid)
    }

    /// Debug dump listing occupied cells; only for grids of at most 32³ cells.
    pub fn to_debug_json(&self) -> Result<GridDump, PenetrationError> {
        if self.cell_count() > JSON_DUMP_MAX_CELLS {
            return Err(PenetrationError::TooLargeForDump(self.cell_count()));
        }
        Ok(GridDump {
            origin: self.origin.into(),
            voxel_size: self.voxel_size,
            dims: self.dims,
            filled: self.filled,
            occupied: self.occupied_cells().collect(),
        })
    }
}

/// JSON debug form of a small grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDump {
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub filled: bool,
    pub occupied: Vec<[usize; 3]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_to_cell_mapping() {
        let g = VoxelGrid::empty(Point::new(-1.0, 0.0, 0.0), 0.5, [4, 2, 2]);
        assert_eq!(g.cell_of(&Point::new(-1.0, 0.0, 0.0)), Some([0, 0, 0]));
        assert_eq!(g.cell_of(&Point::new(-0.5, 0.49, 0.5)), Some([1, 0, 1]));
        assert_eq!(g.cell_of(&Point::new(1.0, 0.0, 0.0)), None);
        assert_eq!(g.cell_of(&Point::new(-1.01, 0.0, 0.0)), None);
    }

    #[test]
    fn binary_round_trip_odd_sizes() {
        let mut g = VoxelGrid::empty(Point::new(0.25, -3.0, 1.0), 0.05, [7, 5, 3]);
        for (i, j, k) in [(0, 0, 0), (6, 4, 2), (3, 2, 1), (5, 0, 2)] {
            g.set(i, j, k, true);
        }
        g.set_filled(true);
        let mut bytes = Vec::new();
        g.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 53 + (7 * 5 * 3usize).div_ceil(8));
        assert_eq!(VoxelGrid::read_binary(&bytes[..]).unwrap(), g);
        assert!(VoxelGrid::read_binary(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn debug_dump_limits() {
        let mut g = VoxelGrid::empty(Point::origin(), 1.0, [2, 2, 2]);
        g.set(1, 0, 1, true);
        let d = g.to_debug_json().unwrap();
        assert_eq!(d.occupied, vec![[1, 0, 1]]);
        let big = VoxelGrid::empty(Point::origin(), 1.0, [33, 32, 32]);
        assert!(big.to_debug_json().is_err());
    }

    #[test]
    fn touching_range_includes_boundary_neighbors() {
        let g = VoxelGrid::empty(Point::origin(), 1.0, [5, 5, 5]);
        assert_eq!(g.touching_range(0, 2.0, 2.0), Some((1, 2)));
        assert_eq!(g.touching_range(0, 2.2, 2.6), Some((2, 2)));
        assert_eq!(g.touching_range(0, -3.0, -2.0), None);
        assert_eq!(g.touching_range(0, -3.0, 0.0), Some((0, 0)));
    }
}
