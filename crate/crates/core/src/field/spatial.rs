use crate::geometry::Vec3;

/// Uniform bucket grid over a point set for radius and nearest-neighbour
/// queries. Points are stored per bucket in ascending index order.
#[derive(Debug, Clone)]
pub struct PointBuckets<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    order: Vec<u32>,
}

const MAX_DIM: usize = 512;

impl<'a> PointBuckets<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        if points.is_empty() {
            min = Vec3::zeros();
            max = Vec3::zeros();
        }
        let extent = (max - min).max().max(f64::MIN_POSITIVE);
        let mut cell = if cell > 0.0 && cell.is_finite() {
            cell.max(extent / MAX_DIM as f64)
        } else {
            extent
        };
        let budget = (8 * points.len()).max(4096);
        let dims_for = |cell: f64| [0, 1, 2].map(|a| (((max[a] - min[a]) / cell).floor() as usize + 1).min(MAX_DIM));
        while dims_for(cell).iter().product::<usize>() > budget {
            cell *= 1.25;
        }
        let dims = dims_for(cell);
        let mut b = PointBuckets {
            points,
            origin: min,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let ids: Vec<usize> = points.iter().map(|p| b.bucket_of(p)).collect();
        let nb = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; nb + 1];
        for &id in &ids {
            counts[id + 1] += 1;
        }
        for i in 0..nb {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &id) in ids.iter().enumerate() {
            order[fill[id] as usize] = i as u32;
            fill[id] += 1;
        }
        b.starts = counts;
        b.order = order;
        b
    }

    /// Buckets sized so that each holds a handful of points on average.
    pub fn auto(points: &'a [Vec3]) -> Self {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let ext = max - min;
        let volume: f64 = ext.iter().map(|e| e.max(ext.max() * 1e-3)).product();
        let cell = (4.0 * volume / points.len().max(1) as f64).cbrt();
        Self::new(points, cell)
    }

    fn cell_coord(&self, p: &Vec3, a: usize) -> usize {
        let g = ((p[a] - self.origin[a]) / self.cell).floor();
        (g.max(0.0) as usize).min(self.dims[a] - 1)
    }

    fn bucket_of(&self, p: &Vec3) -> usize {
        let [i, j, k] = [0, 1, 2].map(|a| self.cell_coord(p, a));
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    fn bucket(&self, i: usize, j: usize, k: usize) -> &[u32] {
        let id = i + self.dims[0] * (j + self.dims[1] * k);
        &self.order[self.starts[id] as usize..self.starts[id + 1] as usize]
    }

    /// Calls `f(index, squared distance)` for every point strictly within
    /// `radius` of `center`.
    pub fn for_each_within(&self, center: &Vec3, radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let lo = [0, 1, 2].map(|a| self.cell_coord(&(center.add_scalar(-radius)), a));
        let hi = [0, 1, 2].map(|a| self.cell_coord(&(center.add_scalar(radius)), a));
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    for &idx in self.bucket(i, j, k) {
                        let d2 = (self.points[idx as usize] - center).norm_squared();
                        if d2 < r2 {
                            f(idx as usize, d2);
                        }
                    }
                }
            }
        }
    }

    /// Distance from point `index` to its nearest other point, `None` for a
    /// single-point set.
    pub fn nearest_distance(&self, index: usize) -> Option<f64> {
        let p = self.points[index];
        let c = [0, 1, 2].map(|a| self.cell_coord(&p, a) as isize);
        let mut best = f64::INFINITY;
        let max_ring = *self.dims.iter().max().unwrap() as isize;
        for ring in 0..=max_ring {
            // points in ring r are at least (r - 1) cells away
            if best.is_finite() && best <= (ring - 1) as f64 * self.cell {
                break;
            }
            let range = |a: usize| {
                let lo = (c[a] - ring).max(0);
                let hi = (c[a] + ring).min(self.dims[a] as isize - 1);
                lo..=hi
            };
            for k in range(2) {
                for j in range(1) {
                    for i in range(0) {
                        let cheb = (i - c[0]).abs().max((j - c[1]).abs()).max((k - c[2]).abs());
                        if cheb != ring {
                            continue;
                        }
                        for &idx in self.bucket(i as usize, j as usize, k as usize) {
                            if idx as usize != index {
                                best = best.min((self.points[idx as usize] - p).norm());
                            }
                        }
                    }
                }
            }
        }
        best.is_finite().then_some(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scatter(n: usize, seed: u64) -> Vec<Vec3> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n).map(|_| Vec3::new(next(), next() * 2.0, next() * 0.5)).collect()
    }

    #[test]
    fn radius_query_matches_brute_force() {
        let pts = scatter(500, 3);
        let b = PointBuckets::new(&pts, 0.07);
        for c in pts.iter().take(50) {
            let mut got = Vec::new();
            b.for_each_within(c, 0.2, |i, _| got.push(i));
            got.sort_unstable();
            let expect: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - c).norm_squared() < 0.04).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = scatter(400, 9);
        let b = PointBuckets::auto(&pts);
        for i in 0..pts.len() {
            let expect = (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| (pts[j] - pts[i]).norm())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(b.nearest_distance(i), Some(expect));
        }
        let one = [Vec3::zeros()];
        assert_eq!(PointBuckets::auto(&one).nearest_distance(0), None);
    }
}
