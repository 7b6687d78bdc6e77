//! Equal-area viewing-sphere pixelization, geodesic distances, neighbor
//! sets and soft label targets.
//!
//! The viewing sphere is divided into `12 * nside^2` equal-area pixels on
//! isoLatitude rings. Pixel indices ("viewpoint labels") follow the ring
//! ordering and are stable across runs. All angles at the API surface are
//! degrees; radians appear only inside trigonometric kernels.

mod healpix;

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use healpix::{vec_angle, RingScheme};

/// First-order neighbor weight reproduced by the default soft-target unit.
const DEFAULT_NEIGHBOR_WEIGHT: f64 = 0.36;
/// Resolution at which the default unit is calibrated.
const DEFAULT_UNIT_NSIDE: u32 = 14;

/// sin/cos of an angle in degrees, exact at multiples of 90.
///
/// Exactness at the cardinal angles makes renders and labelings of
/// symmetry-related viewpoints bit-identical, which several fixtures rely
/// on.
pub(crate) fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        r.to_radians().sin_cos()
    }
}

/// A direction on the viewing sphere: azimuth (longitude-like) and
/// elevation (latitude-like), both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl SphericalDirection {
    /// Azimuth is normalized into [0, 360); elevation must be in [-90, 90].
    /// At the poles the azimuth is degenerate and canonicalized to 0.
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(Error::InvalidDirection(format!(
                "non-finite angles ({azimuth_deg}, {elevation_deg})"
            )));
        }
        if elevation_deg.abs() > 90.0 {
            return Err(Error::InvalidDirection(format!(
                "elevation {elevation_deg} outside [-90, 90]"
            )));
        }
        let azimuth_deg = if elevation_deg.abs() == 90.0 {
            0.0
        } else {
            azimuth_deg.rem_euclid(360.0)
        };
        Ok(SphericalDirection {
            azimuth_deg,
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    /// Unit vector with +z at elevation 90 and +x at (azimuth 0, elevation 0).
    pub fn to_unit(&self) -> [f64; 3] {
        let (sin_az, cos_az) = sin_cos_deg(self.azimuth_deg);
        let (sin_el, cos_el) = sin_cos_deg(self.elevation_deg);
        [cos_el * cos_az, cos_el * sin_az, sin_el]
    }

    /// Inverse of [`to_unit`](Self::to_unit); `v` need not be normalized.
    pub fn from_unit(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = if norm > 0.0 { v[2] / norm } else { 1.0 };
        let elevation_deg = z.clamp(-1.0, 1.0).asin().to_degrees();
        let azimuth_deg = if v[0] == 0.0 && v[1] == 0.0 {
            0.0
        } else {
            v[1].atan2(v[0]).to_degrees().rem_euclid(360.0)
        };
        SphericalDirection::new(azimuth_deg, elevation_deg.clamp(-90.0, 90.0))
            .expect("constructed in range")
    }
}

/// Great-circle angle between two directions, in degrees, in [0, 180].
/// Exactly symmetric in its arguments.
pub fn geodesic_distance_deg(a: SphericalDirection, b: SphericalDirection) -> f64 {
    vec_angle(a.to_unit(), b.to_unit()).to_degrees()
}

/// Index of a viewing-sphere region in [0, n_pixels).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ViewpointLabel(pub usize);

impl ViewpointLabel {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ViewpointLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A viewpoint label together with its order-n neighborhood (the label
/// itself is always a member).
#[derive(Debug, Clone)]
pub struct NeighborSet {
    center: ViewpointLabel,
    order: usize,
    members: BTreeSet<ViewpointLabel>,
}

impl NeighborSet {
    pub fn center(&self) -> ViewpointLabel {
        self.center
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn contains(&self, label: ViewpointLabel) -> bool {
        self.members.contains(&label)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ViewpointLabel> + '_ {
        self.members.iter().copied()
    }
}

/// Equal-area division of the viewing sphere into `12 * nside^2` labeled
/// regions. Every region has the same solid angle by construction.
#[derive(Debug, Clone)]
pub struct SpherePixelization {
    nside: u32,
    scheme: RingScheme,
    centers: Vec<SphericalDirection>,
}

impl SpherePixelization {
    pub fn new(nside: u32) -> Result<Self> {
        if nside == 0 {
            return Err(Error::InvalidArgument("nside must be >= 1".into()));
        }
        let scheme = RingScheme::new(nside);
        let centers = (0..scheme.npix())
            .map(|pix| {
                let (z, phi) = scheme.pix2ang(pix);
                let elevation = z.clamp(-1.0, 1.0).asin().to_degrees();
                let azimuth = phi.to_degrees().rem_euclid(360.0);
                SphericalDirection::new(azimuth, elevation).expect("center in range")
            })
            .collect();
        Ok(SpherePixelization {
            nside,
            scheme,
            centers,
        })
    }

    pub fn nside(&self) -> u32 {
        self.nside
    }

    pub fn n_pixels(&self) -> usize {
        self.scheme.npix() as usize
    }

    /// Solid angle of every region: 4*pi / n_pixels.
    pub fn pixel_solid_angle(&self) -> f64 {
        4.0 * std::f64::consts::PI / self.n_pixels() as f64
    }

    fn check_label(&self, label: ViewpointLabel) -> Result<()> {
        if label.index() >= self.n_pixels() {
            return Err(Error::LabelOutOfRange {
                label: label.index(),
                n_pixels: self.n_pixels(),
            });
        }
        Ok(())
    }

    /// The label of the region containing `d`. Total: every direction maps
    /// to exactly one label.
    pub fn label_of(&self, d: SphericalDirection) -> ViewpointLabel {
        let (sin_el, _) = sin_cos_deg(d.elevation_deg());
        let phi = d.azimuth_deg().to_radians();
        ViewpointLabel(self.scheme.ang2pix(sin_el, phi) as usize)
    }

    /// Center direction of the region with label `l`.
    pub fn center_of(&self, l: ViewpointLabel) -> Result<SphericalDirection> {
        self.check_label(l)?;
        Ok(self.centers[l.index()])
    }

    /// Order-n neighborhood of `l`: order 0 is {l}, order 1 adds the four
    /// edge-sharing regions, order k is the k-fold closure of order 1.
    pub fn neighbors(&self, l: ViewpointLabel, order: usize) -> Result<NeighborSet> {
        self.check_label(l)?;
        let mut members: BTreeSet<ViewpointLabel> = BTreeSet::new();
        members.insert(l);
        let mut frontier: Vec<u64> = vec![l.index() as u64];
        for _ in 0..order {
            let mut next = Vec::new();
            for pix in frontier {
                for nb in self.scheme.edge_neighbors(pix) {
                    if members.insert(ViewpointLabel(nb as usize)) {
                        next.push(nb);
                    }
                }
            }
            frontier = next;
        }
        Ok(NeighborSet {
            center: l,
            order,
            members,
        })
    }

    /// A direction uniform over the area of region `l`. Rejection sampling
    /// within the smallest spherical cap guaranteed to contain any region.
    pub fn random_direction_within<R: Rng + ?Sized>(
        &self,
        l: ViewpointLabel,
        rng: &mut R,
    ) -> Result<SphericalDirection> {
        self.check_label(l)?;
        let center = self.centers[l.index()].to_unit();
        // Orthonormal basis with e3 = center.
        let e3 = center;
        let seed = if e3[2].abs() < 0.9 {
            [0.0, 0.0, 1.0]
        } else {
            [1.0, 0.0, 0.0]
        };
        let e1 = normalize(cross(seed, e3));
        let e2 = cross(e3, e1);
        let cap = self.scheme.max_center_dist_rad() * (1.0 + 1e-9);
        let z_min = cap.cos();
        loop {
            let z: f64 = rng.gen_range(z_min..=1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).max(0.0).sqrt();
            let (lx, ly, lz) = (s * phi.cos(), s * phi.sin(), z);
            let p = [
                lx * e1[0] + ly * e2[0] + lz * e3[0],
                lx * e1[1] + ly * e2[1] + lz * e3[1],
                lx * e1[2] + ly * e2[2] + lz * e3[2],
            ];
            let d = SphericalDirection::from_unit(p);
            if self.label_of(d) == l {
                return Ok(d);
            }
        }
    }

    /// Soft label target: weight exp(-d(center(v), center(l_gt)) / unit_deg)
    /// for every v in the order-n neighborhood of l_gt, zero elsewhere. The
    /// ground-truth entry is exactly 1.
    pub fn soft_target(
        &self,
        l_gt: ViewpointLabel,
        order: usize,
        unit_deg: f64,
    ) -> Result<Vec<f64>> {
        if !(unit_deg > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "soft target unit must be positive, got {unit_deg}"
            )));
        }
        let hood = self.neighbors(l_gt, order)?;
        let gt_center = self.centers[l_gt.index()];
        let mut q = vec![0.0; self.n_pixels()];
        for v in hood.iter() {
            let d = geodesic_distance_deg(self.centers[v.index()], gt_center);
            q[v.index()] = (-d / unit_deg).exp();
        }
        q[l_gt.index()] = 1.0;
        Ok(q)
    }

    /// Unit (degrees) that makes the mean first-order neighbor weight equal
    /// `weight` on this pixelization.
    pub fn unit_for_neighbor_weight(&self, weight: f64) -> Result<f64> {
        if !(weight > 0.0 && weight < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "neighbor weight must be in (0, 1), got {weight}"
            )));
        }
        Ok(self.mean_neighbor_distance_deg() / (1.0 / weight).ln())
    }

    /// Mean geodesic distance between a region center and its four
    /// edge-sharing neighbors' centers, over all regions.
    pub fn mean_neighbor_distance_deg(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for l in 0..self.n_pixels() {
            let c = self.centers[l];
            for nb in self.scheme.edge_neighbors(l as u64) {
                sum += geodesic_distance_deg(c, self.centers[nb as usize]);
                count += 1;
            }
        }
        sum / count as f64
    }

    /// CSV of (label, azimuth_deg, elevation_deg), one row per label in
    /// label order, with a header line.
    pub fn export_centers_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "label,azimuth_deg,elevation_deg")?;
        for (label, c) in self.centers.iter().enumerate() {
            writeln!(w, "{},{},{}", label, c.azimuth_deg(), c.elevation_deg())?;
        }
        Ok(())
    }
}

/// Default soft-target unit (degrees): calibrated so that a first-order
/// neighbor at nside = 14 receives weight 0.36.
pub fn default_soft_target_unit_deg() -> f64 {
    static UNIT: OnceLock<f64> = OnceLock::new();
    *UNIT.get_or_init(|| {
        let p = SpherePixelization::new(DEFAULT_UNIT_NSIDE).expect("nside 14 valid");
        p.unit_for_neighbor_weight(DEFAULT_NEIGHBOR_WEIGHT)
            .expect("weight in range")
    })
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}
