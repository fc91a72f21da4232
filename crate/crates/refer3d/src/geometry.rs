//! Point-cloud and box geometry: ball query, grid superpoints, 3D IoU/GIoU,
//! and conversions between boxes, superpoint masks, and point masks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::sigmoid_scalar;

/// Colored point cloud; positions in meters, colors in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>, colors: Vec<[f64; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Precondition("point cloud needs at least one point".into()));
        }
        if positions.len() != colors.len() {
            return Err(Error::Dimension(format!(
                "{} positions vs {} colors",
                positions.len(),
                colors.len()
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        Ok(PointCloud { positions, colors })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Disjoint grouping of points into superpoints with centroid per group.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointPartition {
    /// Superpoint id per point, ids dense in `[0, m)`.
    pub assignment: Vec<usize>,
    /// Centroid of each superpoint's member positions.
    pub centers: Vec<[f64; 3]>,
    /// Point indices per superpoint, each non-empty.
    pub members: Vec<Vec<usize>>,
}

impl SuperpointPartition {
    /// Rebuild members and centers from a stored assignment.
    pub fn from_assignment(cloud: &PointCloud, assignment: Vec<usize>) -> Result<Self> {
        if assignment.len() != cloud.len() {
            return Err(Error::Dimension(format!(
                "{} assignments for {} points",
                assignment.len(),
                cloud.len()
            )));
        }
        let m = match assignment.iter().max() {
            Some(&mx) => mx + 1,
            None => return Err(Error::Precondition("empty assignment".into())),
        };
        let mut members = vec![Vec::new(); m];
        for (p, &s) in assignment.iter().enumerate() {
            members[s].push(p);
        }
        if members.iter().any(|ms| ms.is_empty()) {
            return Err(Error::DataConsistency("superpoint ids are not dense".into()));
        }
        let centers = members
            .iter()
            .map(|ms| {
                let mut c = [0.0; 3];
                for &p in ms {
                    for a in 0..3 {
                        c[a] += cloud.positions[p][a];
                    }
                }
                for v in &mut c {
                    *v /= ms.len() as f64;
                }
                c
            })
            .collect();
        Ok(SuperpointPartition { assignment, centers, members })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Axis-aligned box as center plus positive size, both in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl Aabb {
    pub fn new(center: [f64; 3], size: [f64; 3]) -> Result<Self> {
        if size.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Precondition(format!("box size must be positive, got {size:?}")));
        }
        Ok(Aabb { center, size })
    }

    pub fn min(&self) -> [f64; 3] {
        [
            self.center[0] - self.size[0] / 2.0,
            self.center[1] - self.size[1] / 2.0,
            self.center[2] - self.size[2] / 2.0,
        ]
    }

    pub fn max(&self) -> [f64; 3] {
        [
            self.center[0] + self.size[0] / 2.0,
            self.center[1] + self.size[1] / 2.0,
            self.center[2] + self.size[2] / 2.0,
        ]
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Closed containment: boundary points count as inside.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let lo = self.min();
        let hi = self.max();
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }
}

/// Real-valued mask over superpoints with thresholded binary views.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointMask {
    /// Raw similarity logits, one per superpoint.
    pub logits: Vec<f64>,
}

impl SuperpointMask {
    pub fn new(logits: Vec<f64>) -> Self {
        SuperpointMask { logits }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&v| sigmoid_scalar(v)).collect()
    }

    /// Sigmoid of each logit thresholded at `tau`.
    pub fn binary(&self, tau: f64) -> Vec<bool> {
        self.logits.iter().map(|&v| sigmoid_scalar(v) >= tau).collect()
    }

    /// Raw logits thresholded at `tau` (no sigmoid).
    pub fn binary_raw(&self, tau: f64) -> Vec<bool> {
        self.logits.iter().map(|&v| v >= tau).collect()
    }
}

/// Neighbors of one superpoint center.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointNeighbors {
    /// Point indices, nearest first, padded to K by duplication.
    pub indices: Vec<usize>,
    /// `center - point` per listed neighbor.
    pub offsets: Vec<[f64; 3]>,
    /// Set when no point fell within the radius and the global nearest
    /// point was substituted.
    pub fallback: bool,
}

/// Ball-query result per superpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub neighbors: Vec<SuperpointNeighbors>,
    pub k: usize,
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// For each superpoint center, up to `k` points within radius `r`, nearest
/// first. Fewer than `k` qualifying points are padded by duplicating the
/// nearest qualifier; zero qualifying points substitute the globally nearest
/// point and set the fallback flag.
pub fn ball_query(
    partition: &SuperpointPartition,
    cloud: &PointCloud,
    k: usize,
    r: f64,
) -> Result<NeighborTable> {
    if k < 1 {
        return Err(Error::Precondition("ball query needs k >= 1".into()));
    }
    if !(r > 0.0) {
        return Err(Error::Precondition("ball query needs r > 0".into()));
    }
    if cloud.is_empty() {
        return Err(Error::Precondition("ball query over empty cloud".into()));
    }
    let r2 = r * r;
    let mut neighbors = Vec::with_capacity(partition.len());
    for &center in &partition.centers {
        let mut within: Vec<(f64, usize)> = Vec::new();
        let mut global_best = (f64::INFINITY, 0usize);
        for (i, &p) in cloud.positions.iter().enumerate() {
            let d2 = dist2(center, p);
            if d2 <= r2 {
                within.push((d2, i));
            }
            if d2 < global_best.0 {
                global_best = (d2, i);
            }
        }
        within.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        within.truncate(k);
        let fallback = within.is_empty();
        if fallback {
            within.push((global_best.0, global_best.1));
        }
        while within.len() < k {
            let first = within[0];
            within.push(first);
        }
        let indices: Vec<usize> = within.iter().map(|&(_, i)| i).collect();
        let offsets = indices
            .iter()
            .map(|&i| {
                let p = cloud.positions[i];
                [center[0] - p[0], center[1] - p[1], center[2] - p[2]]
            })
            .collect();
        neighbors.push(SuperpointNeighbors { indices, offsets, fallback });
    }
    Ok(NeighborTable { neighbors, k })
}

fn overlap_1d(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0)
}

/// Intersection volume over union volume, in `[0, 1]`.
pub fn box_iou_3d(a: &Aabb, b: &Aabb) -> f64 {
    let (alo, ahi) = (a.min(), a.max());
    let (blo, bhi) = (b.min(), b.max());
    let mut inter = 1.0;
    for axis in 0..3 {
        inter *= overlap_1d(alo[axis], ahi[axis], blo[axis], bhi[axis]);
    }
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Generalized IoU: IoU minus the fraction of the enclosing box not covered
/// by the union. In `(-1, 1]`, equal to IoU when the enclosure is tight.
pub fn giou_3d(a: &Aabb, b: &Aabb) -> f64 {
    giou_3d_grad(a, b).0
}

/// GIoU plus its gradient with respect to the first box's center and size.
pub fn giou_3d_grad(a: &Aabb, b: &Aabb) -> (f64, [f64; 3], [f64; 3]) {
    let (alo, ahi) = (a.min(), a.max());
    let (blo, bhi) = (b.min(), b.max());

    let mut inter_axis = [0.0; 3];
    let mut enc_axis = [0.0; 3];
    for ax in 0..3 {
        inter_axis[ax] = overlap_1d(alo[ax], ahi[ax], blo[ax], bhi[ax]);
        enc_axis[ax] = ahi[ax].max(bhi[ax]) - alo[ax].min(blo[ax]);
    }
    let inter: f64 = inter_axis.iter().product();
    let vol_a = a.volume();
    let vol_b = b.volume();
    let union = vol_a + vol_b - inter;
    let enc: f64 = enc_axis.iter().product();
    let giou = inter / union + union / enc - 1.0;

    // Chain rule through the three primitives: intersection, own volume,
    // enclosing volume. union = vol_a + vol_b - inter.
    let dg_dinter = 1.0 / union + inter / (union * union) - 1.0 / enc;
    let dg_dvola = -inter / (union * union) + 1.0 / enc;
    let dg_denc = -union / (enc * enc);

    let mut d_center = [0.0; 3];
    let mut d_size = [0.0; 3];
    for ax in 0..3 {
        let others_inter: f64 = (0..3).filter(|&o| o != ax).map(|o| inter_axis[o]).product();
        let others_enc: f64 = (0..3).filter(|&o| o != ax).map(|o| enc_axis[o]).product();
        let others_vol: f64 = (0..3).filter(|&o| o != ax).map(|o| a.size[o]).product();

        // d inter_axis / d (a_hi, a_lo): active only when a's face bounds
        // the overlap and the overlap is open.
        let (mut di_dhi, mut di_dlo) = (0.0, 0.0);
        if inter_axis[ax] > 0.0 {
            if ahi[ax] < bhi[ax] {
                di_dhi = 1.0;
            }
            if alo[ax] > blo[ax] {
                di_dlo = -1.0;
            }
        }
        // d enc_axis / d (a_hi, a_lo): active when a's face is the extreme.
        let de_dhi = if ahi[ax] > bhi[ax] { 1.0 } else { 0.0 };
        let de_dlo = if alo[ax] < blo[ax] { -1.0 } else { 0.0 };

        // a_lo = c - s/2, a_hi = c + s/2.
        let di_dc = di_dhi + di_dlo;
        let di_ds = 0.5 * (di_dhi - di_dlo);
        let de_dc = de_dhi + de_dlo;
        let de_ds = 0.5 * (de_dhi - de_dlo);

        d_center[ax] = dg_dinter * others_inter * di_dc + dg_denc * others_enc * de_dc;
        d_size[ax] =
            dg_dinter * others_inter * di_ds + dg_dvola * others_vol + dg_denc * others_enc * de_ds;
    }
    (giou, d_center, d_size)
}

/// Binary mask IoU. Both masks empty counts as a perfect match.
pub fn mask_iou(pred: &[bool], gt: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "mask_iou over {} vs {} entries",
            pred.len(),
            gt.len()
        )));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        if p && g {
            inter += 1;
        }
        if p || g {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Expand a binary superpoint mask to its member points.
pub fn superpoint_mask_to_point_mask(partition: &SuperpointPartition, spmask: &[bool]) -> Vec<bool> {
    partition.assignment.iter().map(|&s| spmask[s]).collect()
}

/// Bit per superpoint: set iff the superpoint's center lies in the closed box.
pub fn box_to_superpoint_mask(bx: &Aabb, partition: &SuperpointPartition) -> Vec<bool> {
    partition.centers.iter().map(|&c| bx.contains(c)).collect()
}

/// Bucket points by `floor(position / cell)`, drop empty buckets, densify
/// ids in lexicographic bucket order.
pub fn grid_superpoints(cloud: &PointCloud, cell: f64) -> Result<SuperpointPartition> {
    if !(cell > 0.0) {
        return Err(Error::Precondition("grid cell must be positive".into()));
    }
    let mut buckets: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, &p) in cloud.positions.iter().enumerate() {
        let key = [
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        ];
        buckets.entry(key).or_default().push(i);
    }
    let mut assignment = vec![0usize; cloud.len()];
    let mut members = Vec::with_capacity(buckets.len());
    for (s, (_, ms)) in buckets.into_iter().enumerate() {
        for &p in &ms {
            assignment[p] = s;
        }
        members.push(ms);
    }
    let centers = members
        .iter()
        .map(|ms| {
            let mut c = [0.0; 3];
            for &p in ms {
                for a in 0..3 {
                    c[a] += cloud.positions[p][a];
                }
            }
            for v in &mut c {
                *v /= ms.len() as f64;
            }
            c
        })
        .collect();
    Ok(SuperpointPartition { assignment, centers, members })
}
