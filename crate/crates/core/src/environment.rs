//! Voxelized obstacle world with Euclidean distance and distance-gradient
//! queries, plus a hallway-map builder for the corner experiments.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EnvironmentError {
    #[error("world contains no free voxel")]
    EmptyWorld,
    #[error("query point too close to the field boundary for a gradient")]
    Boundary,
}

/// Axis-aligned box, world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }
}

/// Corridor-system world description.
///
/// Each segment is an axis-aligned box of free space; everything else in
/// the bounding volume is wall. Consecutive segments must overlap so the
/// corridor system is connected.
#[derive(Debug, Clone)]
pub struct HallwaySpec {
    pub segments: Vec<Aabb>,
    /// Nominal corridor width, m (metadata; the boxes are authoritative).
    pub width: f64,
    /// Nominal corridor height, m.
    pub height: f64,
    /// Goal point, world frame.
    pub goal: Vector3<f64>,
    /// Start position, world frame.
    pub start: Vector3<f64>,
    /// Start heading, rad.
    pub start_yaw: f64,
}

impl HallwaySpec {
    /// Two corridors of the given width meeting at a 90 degree corner.
    /// The first leg runs along +x, the second along +y. Flight altitude
    /// is mid-height (world z points down, so cruising z is negative).
    pub fn corner(width: f64, height: f64, leg: f64) -> Self {
        let hw = width / 2.0;
        let z0 = -height;
        let z1 = 0.0;
        let leg_a = Aabb::new(
            Vector3::new(-1.0, -hw, z0),
            Vector3::new(leg + hw, hw, z1),
        );
        let leg_b = Aabb::new(
            Vector3::new(leg - hw, -hw, z0),
            Vector3::new(leg + hw, leg + 1.0, z1),
        );
        let cruise_z = -height / 2.0;
        Self {
            segments: vec![leg_a, leg_b],
            width,
            height,
            goal: Vector3::new(leg, leg + 0.5, cruise_z),
            start: Vector3::new(-0.5, 0.0, cruise_z),
            start_yaw: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), EnvironmentError> {
        if self.segments.is_empty() || !(self.width > 0.0) {
            return Err(EnvironmentError::EmptyWorld);
        }
        Ok(())
    }

    fn bounding(&self) -> Aabb {
        let mut b = self.segments[0];
        for s in &self.segments[1..] {
            b = b.union(s);
        }
        b
    }

    pub fn is_free(&self, p: &Vector3<f64>) -> bool {
        self.segments.iter().any(|s| s.contains(p))
    }
}

/// Dense voxel grid with occupancy and a Euclidean distance transform.
#[derive(Debug, Clone)]
pub struct DistanceField {
    /// World-frame corner of voxel (0, 0, 0), m.
    pub origin: Vector3<f64>,
    /// Voxel edge length, m.
    pub resolution: f64,
    /// Voxel counts per axis.
    pub dims: [usize; 3],
    /// True where the voxel is occupied.
    pub occupancy: Vec<bool>,
    /// Distance to the nearest occupied voxel center, m, capped at d_max.
    pub distance: Vec<f64>,
    /// Signed distance: equal to `distance` on free voxels, negative
    /// penetration depth (distance to the nearest free voxel) on occupied
    /// voxels. Used by the optimizer so gradients keep pushing iterates
    /// out of walls.
    pub signed: Vec<f64>,
    /// Free-space distance cap, m.
    pub d_max: f64,
}

impl DistanceField {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// World coordinates of a voxel center.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin
            + self.resolution
                * Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5)
    }

    /// Build a field from an occupancy grid (exact Euclidean transform on
    /// voxel centers).
    pub fn from_occupancy(
        origin: Vector3<f64>,
        resolution: f64,
        dims: [usize; 3],
        occupancy: Vec<bool>,
        d_max: f64,
    ) -> Result<Self, EnvironmentError> {
        assert!(resolution > 0.0);
        assert_eq!(occupancy.len(), dims[0] * dims[1] * dims[2]);
        if occupancy.iter().all(|&o| o) {
            return Err(EnvironmentError::EmptyWorld);
        }
        let distance: Vec<f64> = if occupancy.iter().any(|&o| o) {
            euclidean_distance_transform(&occupancy, dims)
                .into_iter()
                .map(|d2| (d2.sqrt() * resolution).min(d_max))
                .collect()
        } else {
            // No obstacle anywhere: distance saturates at the cap.
            vec![d_max; occupancy.len()]
        };
        // Penetration depth inside obstacles: transform of the complement.
        let inv: Vec<bool> = occupancy.iter().map(|&o| !o).collect();
        let depth: Vec<f64> = euclidean_distance_transform(&inv, dims)
            .into_iter()
            .map(|d2| (d2.sqrt() * resolution).min(d_max))
            .collect();
        let signed = distance
            .iter()
            .zip(depth.iter())
            .map(|(&d, &p)| d - p)
            .collect();
        Ok(Self {
            origin,
            resolution,
            dims,
            occupancy,
            distance,
            signed,
            d_max,
        })
    }

    /// Minimum distance to the occupied set at a world point, by trilinear
    /// interpolation of the voxel-center distances. Points outside the
    /// field are treated as colliding and return 0.
    pub fn min_distance(&self, p: &Vector3<f64>) -> f64 {
        let upper = self.upper_corner();
        for i in 0..3 {
            if p[i] < self.origin[i] || p[i] > upper[i] {
                return 0.0;
            }
        }
        self.trilinear(&self.distance, p)
    }

    fn upper_corner(&self) -> Vector3<f64> {
        self.origin
            + self.resolution
                * Vector3::new(
                    self.dims[0] as f64,
                    self.dims[1] as f64,
                    self.dims[2] as f64,
                )
    }

    /// Trilinear interpolation of per-voxel values at an in-bounds point.
    fn trilinear(&self, values: &[f64], p: &Vector3<f64>) -> f64 {
        // Continuous voxel-center coordinates.
        let mut idx = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let c = (p[a] - self.origin[a]) / self.resolution - 0.5;
            let c = c.clamp(0.0, (self.dims[a] - 1) as f64);
            let i0 = (c.floor() as usize).min(self.dims[a].saturating_sub(2));
            idx[a] = i0;
            frac[a] = (c - i0 as f64).clamp(0.0, 1.0);
        }
        let mut d = 0.0;
        for dz in 0..2usize {
            for dy in 0..2usize {
                for dx in 0..2usize {
                    let w = (if dx == 1 { frac[0] } else { 1.0 - frac[0] })
                        * (if dy == 1 { frac[1] } else { 1.0 - frac[1] })
                        * (if dz == 1 { frac[2] } else { 1.0 - frac[2] });
                    let i = (idx[0] + dx).min(self.dims[0] - 1);
                    let j = (idx[1] + dy).min(self.dims[1] - 1);
                    let k = (idx[2] + dz).min(self.dims[2] - 1);
                    d += w * values[self.index(i, j, k)];
                }
            }
        }
        d
    }

    /// Signed distance to the occupied set: positive in free space (same
    /// value as [`min_distance`](Self::min_distance)), negative inside
    /// obstacles. Outside the field it extends linearly downward from the
    /// nearest boundary point, so optimizer gradients always point back
    /// toward (and then out of) the walls.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let upper = self.upper_corner();
        let q = Vector3::new(
            p[0].clamp(self.origin[0], upper[0]),
            p[1].clamp(self.origin[1], upper[1]),
            p[2].clamp(self.origin[2], upper[2]),
        );
        let base = self.trilinear(&self.signed, &q);
        base - (p - q).norm()
    }

    /// Central-difference gradient of the signed distance. Total: defined
    /// inside obstacles and outside the field.
    pub fn signed_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let h = self.resolution / 2.0;
        let mut g = Vector3::zeros();
        for a in 0..3 {
            let mut pp = *p;
            let mut pm = *p;
            pp[a] += h;
            pm[a] -= h;
            g[a] = (self.signed_distance(&pp) - self.signed_distance(&pm)) / (2.0 * h);
        }
        g
    }

    /// Central-difference gradient of the interpolated distance.
    pub fn distance_gradient(
        &self,
        p: &Vector3<f64>,
    ) -> Result<Vector3<f64>, EnvironmentError> {
        let h = self.resolution / 2.0;
        let lower = self.origin
            + Vector3::from_element(self.resolution);
        let upper = self.origin
            + self.resolution
                * Vector3::new(
                    self.dims[0] as f64 - 1.0,
                    self.dims[1] as f64 - 1.0,
                    self.dims[2] as f64 - 1.0,
                );
        for i in 0..3 {
            if p[i] < lower[i] || p[i] > upper[i] {
                return Err(EnvironmentError::Boundary);
            }
        }
        let mut g = Vector3::zeros();
        for a in 0..3 {
            let mut pp = *p;
            let mut pm = *p;
            pp[a] += h;
            pm[a] -= h;
            g[a] = (self.min_distance(&pp) - self.min_distance(&pm)) / (2.0 * h);
        }
        Ok(g)
    }

    /// Gradient that degrades to zero instead of erroring near the field
    /// boundary; used by the optimizer.
    pub fn distance_gradient_or_zero(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.distance_gradient(p).unwrap_or_else(|_| Vector3::zeros())
    }
}

/// Build a distance field from a corridor system. Free space is the union
/// of the segment boxes; everything else inside the (padded) bounding
/// volume is occupied.
pub fn build_field(
    spec: &HallwaySpec,
    resolution: f64,
    d_max: f64,
) -> Result<DistanceField, EnvironmentError> {
    assert!(resolution > 0.0);
    spec.validate()?;
    let bb = spec.bounding();
    // One voxel of wall padding all around so distances stay bounded.
    let origin = bb.min - Vector3::from_element(resolution);
    let size = bb.max - bb.min + Vector3::from_element(2.0 * resolution);
    let dims = [
        (size[0] / resolution).ceil() as usize,
        (size[1] / resolution).ceil() as usize,
        (size[2] / resolution).ceil() as usize,
    ];
    let mut occupancy = vec![true; dims[0] * dims[1] * dims[2]];
    let mut any_free = false;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = origin
                    + resolution
                        * Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
                if spec.is_free(&c) {
                    occupancy[(k * dims[1] + j) * dims[0] + i] = false;
                    any_free = true;
                }
            }
        }
    }
    if !any_free {
        return Err(EnvironmentError::EmptyWorld);
    }
    DistanceField::from_occupancy(origin, resolution, dims, occupancy, d_max)
}

/// Exact squared Euclidean distance transform (in voxel units) by the
/// separable lower-envelope method, one pass per axis.
fn euclidean_distance_transform(occupancy: &[bool], dims: [usize; 3]) -> Vec<f64> {
    const INF: f64 = 1e20;
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);
    let mut d: Vec<f64> = occupancy
        .iter()
        .map(|&o| if o { 0.0 } else { INF })
        .collect();

    let mut line = vec![0.0; nx.max(ny).max(nz)];
    let mut out = vec![0.0; line.len()];

    // x pass
    for k in 0..nz {
        for j in 0..ny {
            let base = (k * ny + j) * nx;
            line[..nx].copy_from_slice(&d[base..base + nx]);
            dt_1d(&line[..nx], &mut out[..nx]);
            d[base..base + nx].copy_from_slice(&out[..nx]);
        }
    }
    // y pass
    for k in 0..nz {
        for i in 0..nx {
            for j in 0..ny {
                line[j] = d[(k * ny + j) * nx + i];
            }
            dt_1d(&line[..ny], &mut out[..ny]);
            for j in 0..ny {
                d[(k * ny + j) * nx + i] = out[j];
            }
        }
    }
    // z pass
    for j in 0..ny {
        for i in 0..nx {
            for k in 0..nz {
                line[k] = d[(k * ny + j) * nx + i];
            }
            dt_1d(&line[..nz], &mut out[..nz]);
            for k in 0..nz {
                d[(k * ny + j) * nx + i] = out[k];
            }
        }
    }
    d
}

/// One-dimensional squared distance transform (lower envelope of
/// parabolas rooted at `f`).
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut v = vec![0usize; n]; // parabola locations
    let mut z = vec![0f64; n + 1]; // envelope boundaries
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s > z[k] {
                break;
            }
            if k == 0 {
                break;
            }
            k -= 1;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        out[q] = dq * dq + f[v[k]];
    }
}
