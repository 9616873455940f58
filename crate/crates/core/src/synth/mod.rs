//! Synthetic ground-truth clouds and selection-quality metrics.
//!
//! The generators stand in for the study datasets: a half shell with
//! interior interferers, Plummer-sphere clusters and random-walk filaments.
//! Every generator is a pure function of its parameters and seed, drawn from
//! a ChaCha8 stream.

mod scripted;

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PointCloud;
use crate::geometry::Vec3;

pub use scripted::{gen_scripted_trace, place_under_surface, Placement, TraceKind};

/// Identifier of the pseudo-random generator, recorded in metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Plummer clusters are cut off at this many scale radii.
pub const PLUMMER_TRUNCATION: f64 = 2.5;

const PACKING_ATTEMPTS: usize = 10_000;
const SPINE_VERTICES: usize = 8;
const SPINE_STEP: f64 = 0.2;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A point cloud with one integer label per point. Label 0 marks noise;
/// structures are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub labels: Vec<u32>,
    pub description: String,
    /// Filament spines, `spines[l - 1]` for label `l`; empty for other kinds.
    pub spines: Vec<Vec<Vec3>>,
    pub seed: u64,
}

impl LabeledCloud {
    pub fn indices_with_label(&self, label: u32) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn label_set(&self) -> BTreeSet<u32> {
        self.labels.iter().copied().collect()
    }

    /// Applies `f` to every point and spine vertex.
    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> LabeledCloud {
        LabeledCloud {
            cloud: self.cloud.map_positions(&f),
            labels: self.labels.clone(),
            description: self.description.clone(),
            spines: self.spines.iter().map(|s| s.iter().map(&f).collect()).collect(),
            seed: self.seed,
        }
    }

    pub fn labels_csv(&self) -> String {
        let mut s = String::from("label\n");
        for l in &self.labels {
            let _ = writeln!(s, "{l}");
        }
        s
    }

    pub fn spines_json(&self) -> String {
        let doc = SpineDocument {
            rng: RNG_ALGORITHM.into(),
            seed: self.seed,
            spines: self.spines.iter().map(|s| s.iter().map(|p| [p.x, p.y, p.z]).collect()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("spines serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineDocument {
    pub rng: String,
    pub seed: u64,
    pub spines: Vec<Vec<[f64; 3]>>,
}

/// Reads a one-column labels file, with or without a header.
pub fn parse_labels_csv(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.parse::<u32>().is_err() && line.chars().any(char::is_alphabetic)) {
            continue;
        }
        let v = line.parse::<u32>().map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels_csv(&text)
}

pub(crate) fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

fn check_positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(what, "must be positive"))
    }
}

/// Half shell of radius `radius` about the origin, opening towards `-z`,
/// plus `noise_n` interferers uniform inside it.
pub fn gen_shell(n: usize, radius: f64, thickness: f64, noise_n: usize, seed: u64) -> Result<LabeledCloud> {
    if n == 0 {
        return Err(Error::invalid("shell", "needs at least one point"));
    }
    check_positive("shell radius", radius)?;
    if !(thickness >= 0.0) || thickness >= 2.0 * radius {
        return Err(Error::invalid("shell thickness", "must lie in [0, 2 radius)"));
    }
    let mut r = rng(seed);
    let (inner, outer) = (radius - 0.5 * thickness, radius + 0.5 * thickness);
    let mut positions = Vec::with_capacity(n + noise_n);
    let mut labels = Vec::with_capacity(n + noise_n);
    for _ in 0..n {
        let mut d = unit_vector(&mut r);
        d.z = d.z.abs();
        // volume-uniform radius across the shell
        let u: f64 = r.random();
        let rad = (inner.powi(3) + u * (outer.powi(3) - inner.powi(3))).cbrt();
        positions.push(d * rad);
        labels.push(1);
    }
    for _ in 0..noise_n {
        let mut d = unit_vector(&mut r);
        d.z = d.z.abs();
        let u: f64 = r.random();
        positions.push(d * inner * u.cbrt());
        labels.push(0);
    }
    Ok(LabeledCloud {
        cloud: PointCloud::new(positions),
        labels,
        description: format!("half shell r={radius} t={thickness}, {n} shell + {noise_n} noise points"),
        spines: Vec::new(),
        seed,
    })
}

/// Radius drawn from a Plummer sphere of scale `a`, truncated at
/// [`PLUMMER_TRUNCATION`] `a` by rejection.
fn plummer_radius(rng: &mut ChaCha8Rng, a: f64) -> f64 {
    loop {
        let m: f64 = rng.random();
        if m <= 0.0 {
            continue;
        }
        let x = (m.powf(-2.0 / 3.0) - 1.0).max(0.0);
        let r = a / x.sqrt();
        if r <= PLUMMER_TRUNCATION * a {
            return r;
        }
    }
}

/// Origin plus `k - 1` random centers at radius `[separation, outer]`,
/// pairwise at least `separation` apart.
fn place_centers(rng: &mut ChaCha8Rng, k: usize, separation: f64, outer: f64) -> Result<Vec<Vec3>> {
    let mut centers = vec![Vec3::zeros()];
    while centers.len() < k {
        let mut placed = false;
        for _ in 0..PACKING_ATTEMPTS {
            let c = unit_vector(rng) * rng.random_range(separation..=outer);
            if centers.iter().all(|o| (o - c).norm() >= separation) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Packing(PACKING_ATTEMPTS));
        }
    }
    Ok(centers)
}

/// `k` Plummer clusters of `per_cluster` points each. Cluster 1 sits at the
/// origin; the others are scattered around it with centers at least
/// `separation` apart.
pub fn gen_clusters(k: usize, per_cluster: usize, scale: f64, separation: f64, seed: u64) -> Result<LabeledCloud> {
    if k == 0 || per_cluster == 0 {
        return Err(Error::invalid("clusters", "need at least one cluster and one point"));
    }
    check_positive("cluster scale", scale)?;
    if k > 1 {
        check_positive("cluster separation", separation)?;
    }
    let mut r = rng(seed);
    let centers = place_centers(&mut r, k, separation, separation * (1.0 + (k as f64).cbrt()))?;
    let mut positions = Vec::with_capacity(k * per_cluster);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for (id, c) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            let rad = plummer_radius(&mut r, scale);
            positions.push(c + unit_vector(&mut r) * rad);
            labels.push(id as u32 + 1);
        }
    }
    Ok(LabeledCloud {
        cloud: PointCloud::new(positions),
        labels,
        description: format!("{k} Plummer clusters of {per_cluster} points, scale {scale}, separation {separation}"),
        spines: Vec::new(),
        seed,
    })
}

/// Random-walk spine with a persistent heading.
fn random_spine(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let start = Vec3::new(
        rng.random_range(-0.4..0.4),
        rng.random_range(-0.4..0.4),
        rng.random_range(-0.4..0.4),
    );
    let mut heading = unit_vector(rng);
    let mut spine = vec![start];
    for _ in 1..SPINE_VERTICES {
        heading = (heading + unit_vector(rng) * 0.5).normalize();
        spine.push(spine.last().unwrap() + heading * SPINE_STEP);
    }
    spine
}

/// `segments` filaments, each a random-walk spine with
/// `points_per_segment` points scattered around it. A point sits at a
/// uniform arc-length position, displaced perpendicular to its spine
/// segment by a distance drawn from `|N(0, thickness²)|`.
pub fn gen_filaments(segments: usize, points_per_segment: usize, thickness: f64, seed: u64) -> Result<LabeledCloud> {
    if segments == 0 {
        return Err(Error::invalid("filaments", "need at least one filament"));
    }
    if !(thickness >= 0.0) || !thickness.is_finite() {
        return Err(Error::invalid("filament thickness", "must be non-negative"));
    }
    let mut r = rng(seed);
    let mut positions = Vec::with_capacity(segments * points_per_segment);
    let mut labels = Vec::with_capacity(segments * points_per_segment);
    let mut spines = Vec::with_capacity(segments);
    for id in 0..segments {
        let spine = random_spine(&mut r);
        let lengths: Vec<f64> = spine.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = lengths.iter().sum();
        for _ in 0..points_per_segment {
            let mut s = r.random_range(0.0..total);
            let mut seg = 0;
            while seg + 1 < lengths.len() && s > lengths[seg] {
                s -= lengths[seg];
                seg += 1;
            }
            let (a, b) = (spine[seg], spine[seg + 1]);
            let dir = (b - a) / lengths[seg];
            let on_spine = a + dir * s.min(lengths[seg]);
            let helper = if dir.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let e1 = dir.cross(&helper).normalize();
            let e2 = dir.cross(&e1);
            let phi: f64 = r.random_range(0.0..TAU);
            let g: f64 = StandardNormal.sample(&mut r);
            let offset = (e1 * phi.cos() + e2 * phi.sin()) * (g.abs() * thickness);
            positions.push(on_spine + offset);
            labels.push(id as u32 + 1);
        }
        spines.push(spine);
    }
    Ok(LabeledCloud {
        cloud: PointCloud::new(positions),
        labels,
        description: format!("{segments} filaments of {points_per_segment} points, thickness {thickness}"),
        spines,
        seed,
    })
}

/// Distance from `p` to a polyline.
pub fn polyline_distance(p: &Vec3, spine: &[Vec3]) -> f64 {
    if spine.len() == 1 {
        return (p - spine[0]).norm();
    }
    spine
        .windows(2)
        .map(|w| {
            let ab = w[1] - w[0];
            let t = ((p - w[0]).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            (p - (w[0] + ab * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Scores a selection against the points carrying `truth_label`.
pub fn score(selected: &[usize], truth_label: u32, labeled: &LabeledCloud) -> Result<Metrics> {
    score_labels(selected, truth_label, &labeled.labels)
}

pub fn score_labels(selected: &[usize], truth_label: u32, labels: &[u32]) -> Result<Metrics> {
    if !labels.contains(&truth_label) {
        return Err(Error::UnknownLabel(truth_label));
    }
    let chosen: BTreeSet<usize> = selected.iter().copied().collect();
    if let Some(&bad) = chosen.iter().next_back().filter(|&&i| i >= labels.len()) {
        return Err(Error::invalid("selection", format!("index {bad} out of range")));
    }
    let truth = labels.iter().filter(|&&l| l == truth_label).count();
    let tp = chosen.iter().filter(|&&i| labels[i] == truth_label).count();
    let fp = chosen.len() - tp;
    let fn_ = truth - tp;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        jaccard: ratio(tp, tp + fp + fn_),
        tp,
        fp,
        fn_,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_radii_and_reproducibility() {
        let s = gen_shell(2000, 1.0, 0.1, 0, 4).unwrap();
        for p in &s.cloud.positions {
            let r = p.norm();
            assert!((0.95 - 1e-12..=1.05 + 1e-12).contains(&r));
            assert!(p.z >= 0.0);
        }
        let mean = s.cloud.positions.iter().map(|p| p.norm()).sum::<f64>() / 2000.0;
        assert!((mean - 1.0).abs() <= 0.1);
        assert_eq!(s, gen_shell(2000, 1.0, 0.1, 0, 4).unwrap());
        let noisy = gen_shell(100, 1.0, 0.1, 50, 4).unwrap();
        assert_eq!(noisy.indices_with_label(0).len(), 50);
        assert!(noisy.indices_with_label(0).iter().all(|&i| noisy.cloud.positions[i].norm() <= 0.95));
    }

    #[test]
    fn cluster_counts_and_separation() {
        let one = gen_clusters(1, 300, 0.1, 0.0, 1).unwrap();
        let mean = one.cloud.positions.iter().sum::<Vec3>() / 300.0;
        assert!(mean.norm() < 0.05);
        assert!(one.cloud.positions.iter().all(|p| p.norm() <= PLUMMER_TRUNCATION * 0.1 + 1e-12));

        let c = gen_clusters(5, 400, 0.05, 0.6, 11).unwrap();
        for l in 1..=5 {
            assert_eq!(c.indices_with_label(l).len(), 400);
        }
        let centroid = |l: u32| {
            let idx = c.indices_with_label(l);
            idx.iter().map(|&i| c.cloud.positions[i]).sum::<Vec3>() / idx.len() as f64
        };
        // centroids scatter by a fraction of the scale around the centers
        for a in 1..=5 {
            for b in a + 1..=5 {
                assert!((centroid(a) - centroid(b)).norm() >= 0.6 - 0.05);
            }
        }
        // a thin shell cannot hold thirty mutually separated centers
        assert!(matches!(place_centers(&mut rng(0), 30, 1.0, 1.2), Err(Error::Packing(_))));
    }

    #[test]
    fn filament_scatter() {
        let thin = gen_filaments(2, 500, 0.0, 3).unwrap();
        for (i, p) in thin.cloud.positions.iter().enumerate() {
            let spine = &thin.spines[thin.labels[i] as usize - 1];
            assert!(polyline_distance(p, spine) <= 1e-9);
        }
        let f = gen_filaments(3, 2000, 0.02, 3).unwrap();
        let near = f
            .cloud
            .positions
            .iter()
            .zip(&f.labels)
            .filter(|(p, &l)| polyline_distance(p, &f.spines[l as usize - 1]) <= 0.04)
            .count();
        assert!(near as f64 >= 0.95 * 6000.0, "{near}");
        assert_eq!(f, gen_filaments(3, 2000, 0.02, 3).unwrap());
        assert_ne!(f.cloud, gen_filaments(3, 2000, 0.02, 4).unwrap().cloud);
    }

    #[test]
    fn metric_identities() {
        let labels: Vec<u32> = (1..=20).map(|i| if i <= 10 { 1 } else { 2 }).collect();
        let truth: Vec<usize> = (0..10).collect();
        let m = score_labels(&truth, 1, &labels).unwrap();
        assert_eq!((m.f1, m.jaccard), (1.0, 1.0));
        let disjoint: Vec<usize> = (10..20).collect();
        assert_eq!(score_labels(&disjoint, 1, &labels).unwrap().f1, 0.0);
        let half: Vec<usize> = (5..15).collect();
        let m = score_labels(&half, 1, &labels).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
        assert_eq!(m.jaccard, 5.0 / 15.0);
        assert!(matches!(score_labels(&half, 7, &labels), Err(Error::UnknownLabel(7))));
        assert!(score_labels(&[99], 1, &labels).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let c = gen_clusters(2, 5, 0.1, 1.0, 0).unwrap();
        assert_eq!(parse_labels_csv(&c.labels_csv()).unwrap(), c.labels);
        assert_eq!(parse_labels_csv("1\n2\n").unwrap(), vec![1, 2]);
        assert!(parse_labels_csv("label\nx\n").is_err());
    }
}
