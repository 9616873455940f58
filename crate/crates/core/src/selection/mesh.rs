//! Marching Cubes isosurface extraction and OBJ export.
//!
//! The 256-case triangle table is derived at first use rather than pasted in.
//! On every cube face the crossings are joined into segments that cut the
//! inside corners off; a face with two diagonal inside corners cuts each one
//! off separately, so neighbouring cells always agree on their shared face.
//! Segments are oriented consistently around each face, chain into closed
//! loops, and each loop is fanned into triangles whose normals point from
//! the dense side to the sparse side.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use super::NodeMask;
use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    /// Counter-clockwise when seen from the low-density side.
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Wavefront OBJ with `v` and `f` records only.
    pub fn to_obj(&self) -> String {
        let mut s = String::with_capacity(32 * (self.vertices.len() + self.triangles.len()));
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Corner offsets; corner `c` is bit `c` of the case index.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [3, 2],
    [0, 3],
    [4, 5],
    [5, 6],
    [7, 6],
    [4, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Face corners, counter-clockwise about the outward face normal.
const FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 4, 7, 3],
    [1, 2, 6, 5],
];

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("adjacent corners")
}

fn build_case(case: usize) -> Vec<[u8; 3]> {
    let inside = |c: usize| case >> c & 1 == 1;
    let mut next = [usize::MAX; 12];
    for face in FACES {
        for k in 0..4 {
            let (prev, c) = (face[(k + 3) % 4], face[k]);
            if !inside(prev) && inside(c) {
                let mut last = k;
                while inside(face[(last + 1) % 4]) {
                    last = (last + 1) % 4;
                }
                next[edge_between(prev, c)] = edge_between(face[last], face[(last + 1) % 4]);
            }
        }
    }
    let mut used = [false; 12];
    let mut tris = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || used[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        while !used[e] {
            used[e] = true;
            ring.push(e as u8);
            e = next[e];
        }
        for w in 1..ring.len() - 1 {
            tris.push([ring[0], ring[w], ring[w + 1]]);
        }
    }
    tris
}

fn case_table() -> &'static [Vec<[u8; 3]>] {
    static TABLE: OnceLock<Vec<Vec<[u8; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(build_case).collect())
}

/// Extracts the `rho0` isosurface from every cell with a corner in `mask`.
///
/// A node is inside when its value exceeds `rho0`. Vertices are shared
/// between cells through their grid edge and interpolated from the edge's
/// lower node, so the mesh is watertight wherever the processed cells are
/// contiguous. Zero-area triangles are dropped.
pub fn marching_cubes(field: &DensityField, rho0: f64, mask: &NodeMask) -> Result<TriangleMesh> {
    if !rho0.is_finite() {
        return Err(Error::invalid("iso level", "must be finite"));
    }
    if mask.grid != field.grid {
        return Err(Error::GridMismatch);
    }
    let grid = field.grid;
    let [nx, ny, nz] = grid.resolution;
    let table = case_table();
    let mut mesh = TriangleMesh::default();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                if !mask.touches_cell([i, j, k]) {
                    continue;
                }
                let node = |c: usize| grid.index(i + CORNERS[c][0], j + CORNERS[c][1], k + CORNERS[c][2]);
                let case = (0..8).fold(0usize, |acc, c| acc | (((field.value(node(c)) > rho0) as usize) << c));
                if case == 0 || case == 255 {
                    continue;
                }
                for tri in &table[case] {
                    let ids = tri.map(|e| {
                        let [a, b] = EDGES[e as usize];
                        // EDGES lists the lower corner first
                        let (lo, hi) = (node(a), node(b));
                        let axis = (0..3).find(|&ax| CORNERS[a][ax] != CORNERS[b][ax]).unwrap();
                        *edge_vertex.entry((lo, axis)).or_insert_with(|| {
                            let (va, vb) = (field.value(lo), field.value(hi));
                            let t = (rho0 - va) / (vb - va);
                            let (pa, pb) = (grid.position_of(lo), grid.position_of(hi));
                            mesh.vertices.push(pa + (pb - pa) * t);
                            (mesh.vertices.len() - 1) as u32
                        })
                    });
                    let [a, b, c] = ids.map(|v| mesh.vertices[v as usize]);
                    if (b - a).cross(&(c - a)).norm_squared() > 0.0 {
                        mesh.triangles.push(ids);
                    }
                }
            }
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridBox;

    #[test]
    fn edges_are_listed_lower_corner_first() {
        for [a, b] in EDGES {
            let d: Vec<isize> = (0..3).map(|x| CORNERS[b][x] as isize - CORNERS[a][x] as isize).collect();
            assert_eq!(d.iter().sum::<isize>(), 1);
            assert_eq!(d.iter().filter(|&&v| v != 0).count(), 1);
        }
    }

    #[test]
    fn table_uses_exactly_the_crossing_edges() {
        let table = case_table();
        assert!(table[0].is_empty() && table[255].is_empty());
        for (case, tris) in table.iter().enumerate() {
            let mut used: Vec<u8> = tris.iter().flatten().copied().collect();
            used.sort_unstable();
            used.dedup();
            let crossing: Vec<u8> = (0..12u8)
                .filter(|&e| {
                    let [a, b] = EDGES[e as usize];
                    (case >> a & 1) != (case >> b & 1)
                })
                .collect();
            assert_eq!(used, crossing, "case {case}");
        }
        // one corner: a single triangle; classic worst cases stay small
        assert_eq!(table[1].len(), 1);
        assert!(table.iter().all(|t| t.len() <= 12));
    }

    #[test]
    fn single_corner_normal_points_away_from_inside() {
        let g = GridBox::new(Vec3::zeros(), Vec3::repeat(1.0), [2; 3]).unwrap();
        let mut vals = vec![0f32; 8];
        vals[0] = 1.0;
        let f = DensityField::new(g, vals).unwrap();
        let m = marching_cubes(&f, 0.5, &NodeMask::full(g)).unwrap();
        assert_eq!(m.triangles.len(), 1);
        let [a, b, c] = m.triangles[0].map(|i| m.vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        assert!(n.x > 0.0 && n.y > 0.0 && n.z > 0.0);
    }

    #[test]
    fn trivial_fields_give_empty_meshes() {
        let g = GridBox::new(Vec3::zeros(), Vec3::repeat(1.0), [8; 3]).unwrap();
        let all = NodeMask::full(g);
        let constant = DensityField::from_fn(g, |_| 3.0).unwrap();
        assert!(marching_cubes(&constant, 3.0, &all).unwrap().is_empty());
        let ramp = DensityField::from_fn(g, |p| p.x).unwrap();
        assert!(marching_cubes(&ramp, 2.0, &all).unwrap().is_empty());
        assert!(marching_cubes(&ramp, 0.5, &NodeMask::empty(g)).unwrap().is_empty());
        assert!(marching_cubes(&ramp, f64::NAN, &all).is_err());
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let g = GridBox::new(Vec3::repeat(-1.0), Vec3::repeat(1.0), [24; 3]).unwrap();
        let c = Vec3::new(0.05, -0.02, 0.03);
        let f = DensityField::from_fn(g, |p| 1.0 / (1.0 + (p - c).norm_squared() * 9.0)).unwrap();
        let m = marching_cubes(&f, 0.4, &NodeMask::full(g)).unwrap();
        assert!(!m.is_empty());
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &m.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                // directed count: opposite traversals cancel on a coherent surface
                *edges.entry((a.min(b), a.max(b))).or_default() += if a < b { 1 } else { -1 };
            }
            let [a, b, cc] = t.map(|i| m.vertices[i as usize]);
            let n = (b - a).cross(&(cc - a));
            assert!(n.dot(&((a + b + cc) / 3.0 - c)) > 0.0);
        }
        assert!(edges.values().all(|&v| v == 0));
        let obj = m.to_obj();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), m.vertices.len());
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), m.triangles.len());
    }

    #[test]
    fn saddle_faces_stay_watertight() {
        // checkerboard-like corner values exercise every ambiguous face
        let g = GridBox::new(Vec3::zeros(), Vec3::repeat(1.0), [9; 3]).unwrap();
        let f = DensityField::from_fn(g, |p| {
            let s = (p.x * 23.0).sin() * (p.y * 17.0).sin() * (p.z * 29.0).cos();
            1.0 + s
        })
        .unwrap();
        let m = marching_cubes(&f, 1.0, &NodeMask::full(g)).unwrap();
        let mut count: HashMap<(u32, u32), i32> = HashMap::new();
        let on_boundary = |v: &Vec3| v.iter().any(|&x| x <= 1e-12 || x >= 1.0 - 1e-12);
        for t in &m.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for ((a, b), n) in count {
            let interior = !(on_boundary(&m.vertices[a as usize]) && on_boundary(&m.vertices[b as usize]));
            if interior {
                assert_eq!(n, 2);
            }
        }
    }
}
