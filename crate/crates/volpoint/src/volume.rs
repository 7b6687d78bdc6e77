//! 3D scalar fields: raw/header loading, procedural phantom synthesis,
//! trilinear sampling and gradient estimation.
//!
//! Volumes are centered at the world origin; the world extent of an axis is
//! `dim * spacing`. Samples outside the grid read as 0 (transparent), so
//! the trilinear interpolant fades to zero across the half-voxel border
//! band instead of clamping.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element type of a raw binary volume file (little-endian).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementType {
    U8,
    U16,
    F32,
}

impl ElementType {
    pub fn size_bytes(self) -> usize {
        match self {
            ElementType::U8 => 1,
            ElementType::U16 => 2,
            ElementType::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::U8 => "u8",
            ElementType::U16 => "u16",
            ElementType::F32 => "f32",
        }
    }
}

impl FromStr for ElementType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(ElementType::U8),
            "u16" => Ok(ElementType::U16),
            "f32" => Ok(ElementType::F32),
            other => Err(Error::parse("element type", format!("unknown: {other}"))),
        }
    }
}

/// A 3D scalar field with values normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    values: Vec<f64>,
}

impl VolumeGrid {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        values: Vec<f64>,
    ) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(Error::InvalidArgument(format!(
                "dims must be >= 2 per axis, got {dims:?}"
            )));
        }
        if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if values.len() != nx * ny * nz {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                nx * ny * nz,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "volume values must lie in [0, 1]".into(),
            ));
        }
        Ok(VolumeGrid {
            dims,
            spacing,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.0.min(self.spacing.1).min(self.spacing.2)
    }

    /// World extent per axis: dims * spacing.
    pub fn world_extent(&self) -> (f64, f64, f64) {
        (
            self.dims.0 as f64 * self.spacing.0,
            self.dims.1 as f64 * self.spacing.1,
            self.dims.2 as f64 * self.spacing.2,
        )
    }

    /// Half-diagonal of the world bounding box.
    pub fn half_diagonal(&self) -> f64 {
        let (ex, ey, ez) = self.world_extent();
        0.5 * (ex * ex + ey * ey + ez * ez).sqrt()
    }

    /// Radius of the viewing sphere: 1.5x the bounding-box half-diagonal,
    /// so the whole volume stays in frame at scale 1.
    pub fn viewing_sphere_radius(&self) -> f64 {
        1.5 * self.half_diagonal()
    }

    #[inline]
    pub fn voxel(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims.0 * (j + self.dims.1 * k)]
    }

    #[inline]
    fn voxel_or_zero(&self, i: i64, j: i64, k: i64) -> f64 {
        let (nx, ny, nz) = self.dims;
        if i < 0 || j < 0 || k < 0 || i >= nx as i64 || j >= ny as i64 || k >= nz as i64 {
            0.0
        } else {
            self.values[i as usize + nx * (j as usize + ny * k as usize)]
        }
    }

    /// World position of the center of voxel (i, j, k).
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 - (self.dims.0 as f64 - 1.0) / 2.0) * self.spacing.0,
            (j as f64 - (self.dims.1 as f64 - 1.0) / 2.0) * self.spacing.1,
            (k as f64 - (self.dims.2 as f64 - 1.0) / 2.0) * self.spacing.2,
        ]
    }

    /// Trilinear interpolation at a world point; zero outside the grid.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> f64 {
        let ux = p[0] / self.spacing.0 + (self.dims.0 as f64 - 1.0) / 2.0;
        let uy = p[1] / self.spacing.1 + (self.dims.1 as f64 - 1.0) / 2.0;
        let uz = p[2] / self.spacing.2 + (self.dims.2 as f64 - 1.0) / 2.0;
        let (fx, fy, fz) = (ux.floor(), uy.floor(), uz.floor());
        let (i0, j0, k0) = (fx as i64, fy as i64, fz as i64);
        let (wx, wy, wz) = (ux - fx, uy - fy, uz - fz);
        let mut acc = 0.0;
        for dk in 0..2i64 {
            let wk = if dk == 0 { 1.0 - wz } else { wz };
            for dj in 0..2i64 {
                let wj = if dj == 0 { 1.0 - wy } else { wy };
                for di in 0..2i64 {
                    let wi = if di == 0 { 1.0 - wx } else { wx };
                    let w = wi * wj * wk;
                    if w != 0.0 {
                        acc += w * self.voxel_or_zero(i0 + di, j0 + dj, k0 + dk);
                    }
                }
            }
        }
        acc
    }

    /// Central-difference gradient of the trilinear field with step equal
    /// to half the minimum spacing. Vectors with magnitude below 1e-8 are
    /// zeroed.
    pub fn gradient_at(&self, p: [f64; 3]) -> [f64; 3] {
        let h = 0.5 * self.min_spacing();
        let mut g = [0.0; 3];
        for axis in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[axis] += h;
            lo[axis] -= h;
            g[axis] = (self.sample_trilinear(hi) - self.sample_trilinear(lo)) / (2.0 * h);
        }
        let mag = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if mag < 1e-8 {
            [0.0; 3]
        } else {
            g
        }
    }

    /// Write the self-describing format: a text header line
    /// `nx ny nz sx sy sz element-type` followed by the binary payload.
    pub fn save_with_header(&self, path: &Path, elem: ElementType) -> Result<()> {
        let mut out = Vec::new();
        let (nx, ny, nz) = self.dims;
        let (sx, sy, sz) = self.spacing;
        writeln!(out, "{nx} {ny} {nz} {sx} {sy} {sz} {}", elem.name()).expect("write to vec");
        for &v in &self.values {
            match elem {
                ElementType::U8 => out.push((v * 255.0).round() as u8),
                ElementType::U16 => {
                    out.extend_from_slice(&(((v * 65535.0).round()) as u16).to_le_bytes())
                }
                ElementType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Read the self-describing format written by
    /// [`save_with_header`](Self::save_with_header).
    pub fn load_with_header(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(path.display().to_string(), "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                path.display().to_string(),
                format!("expected 7 header fields, got {}", fields.len()),
            ));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
        };
        let dims = (
            parse_usize(fields[0])?,
            parse_usize(fields[1])?,
            parse_usize(fields[2])?,
        );
        let spacing = (
            parse_f64(fields[3])?,
            parse_f64(fields[4])?,
            parse_f64(fields[5])?,
        );
        let elem: ElementType = fields[6].parse()?;
        decode_payload(&bytes[nl + 1..], dims, spacing, elem, path)
    }
}

/// Load a headerless raw binary volume. The file size must equal
/// `nx*ny*nz*element_size`; values are min-max normalized to [0, 1]
/// (a constant volume normalizes to all zeros).
pub fn load_raw(
    path: &Path,
    dims: (usize, usize, usize),
    elem: ElementType,
    spacing: (f64, f64, f64),
) -> Result<VolumeGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_payload(&bytes, dims, spacing, elem, path)
}

fn decode_payload(
    bytes: &[u8],
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    elem: ElementType,
    path: &Path,
) -> Result<VolumeGrid> {
    let count = dims.0 * dims.1 * dims.2;
    let expected = (count * elem.size_bytes()) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        });
    }
    let raw: Vec<f64> = match elem {
        ElementType::U8 => bytes.iter().map(|&b| f64::from(b)).collect(),
        ElementType::U16 => bytes
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_le_bytes([c[0], c[1]])))
            .collect(),
        ElementType::F32 => bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
    };
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if max > min {
        raw.iter().map(|&v| (v - min) / (max - min)).collect()
    } else {
        // Degenerate constant input: normalize to all zeros.
        vec![0.0; raw.len()]
    };
    VolumeGrid::new(dims, spacing, values)
}

/// Procedural phantom volumes, the desk-scale stand-ins for scanned data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    /// A handful of Gaussian blobs with no rotational symmetry.
    AsymmetricBlobs,
    /// Concentric spherical shells; deliberately spherically symmetric.
    NestedShells,
    /// An L-shaped block, tapered along one arm.
    LBlock,
    /// A cone with a torus handle on one side.
    ConeWithHandle,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] = [
        PhantomKind::AsymmetricBlobs,
        PhantomKind::NestedShells,
        PhantomKind::LBlock,
        PhantomKind::ConeWithHandle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::AsymmetricBlobs => "asymmetric-blobs",
            PhantomKind::NestedShells => "nested-shells",
            PhantomKind::LBlock => "l-block",
            PhantomKind::ConeWithHandle => "cone-with-handle",
        }
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymmetric-blobs" => Ok(PhantomKind::AsymmetricBlobs),
            "nested-shells" => Ok(PhantomKind::NestedShells),
            "l-block" => Ok(PhantomKind::LBlock),
            "cone-with-handle" => Ok(PhantomKind::ConeWithHandle),
            other => Err(Error::UnknownPhantom(other.to_string())),
        }
    }
}

impl std::fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Synthesize a phantom volume. Deterministic in (kind, dims, seed); unit
/// spacing; values min-max normalized so the full [0, 1] range is used.
pub fn synth_volume(
    kind: PhantomKind,
    dims: (usize, usize, usize),
    seed: u64,
) -> Result<VolumeGrid> {
    let (nx, ny, nz) = dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::InvalidArgument(format!(
            "dims must be >= 2 per axis, got {dims:?}"
        )));
    }
    let field: Box<dyn Fn([f64; 3]) -> f64> = match kind {
        PhantomKind::AsymmetricBlobs => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626c_6f62);
            let blobs: Vec<([f64; 3], f64, f64)> = (0..5)
                .map(|_| {
                    let c = [
                        rng.gen_range(-0.55..0.55),
                        rng.gen_range(-0.55..0.55),
                        rng.gen_range(-0.55..0.55),
                    ];
                    let sigma = rng.gen_range(0.10..0.28);
                    let amp = rng.gen_range(0.55..1.0);
                    (c, sigma, amp)
                })
                .collect();
            Box::new(move |q| {
                blobs
                    .iter()
                    .map(|&(c, sigma, amp)| {
                        let d2 = (q[0] - c[0]).powi(2)
                            + (q[1] - c[1]).powi(2)
                            + (q[2] - c[2]).powi(2);
                        amp * (-d2 / (2.0 * sigma * sigma)).exp()
                    })
                    .sum()
            })
        }
        PhantomKind::NestedShells => Box::new(|q| {
            let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            let shell = |rho: f64, w: f64, amp: f64| {
                let d = r - rho;
                amp * (-d * d / (2.0 * w * w)).exp()
            };
            shell(0.25, 0.06, 1.0) + shell(0.50, 0.07, 0.8) + shell(0.75, 0.08, 0.6)
        }),
        PhantomKind::LBlock => Box::new(|q| {
            // Two soft boxes forming an L; the vertical arm tapers in z
            // along y to remove the mirror symmetry.
            let soft_box = |q: [f64; 3], c: [f64; 3], h: [f64; 3]| {
                let d = (q[0] - c[0]).abs() - h[0];
                let d = d.max((q[1] - c[1]).abs() - h[1]);
                let d = d.max((q[2] - c[2]).abs() - h[2]);
                (0.5 - d / 0.12).clamp(0.0, 1.0)
            };
            let hz = 0.28 - 0.08 * q[1];
            let vertical = soft_box(q, [-0.32, 0.05, 0.0], [0.20, 0.55, hz]);
            let horizontal = soft_box(q, [0.12, -0.44, -0.05], [0.48, 0.16, 0.22]);
            vertical.max(horizontal)
        }),
        PhantomKind::ConeWithHandle => Box::new(|q| {
            // Cone along +z with apex at z = 0.62.
            let cone = if q[2] <= 0.62 && q[2] >= -0.52 {
                let rad = 0.48 * (0.62 - q[2]) / 1.14;
                let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
                (0.5 - (rho - rad) / 0.10).clamp(0.0, 1.0)
            } else {
                0.0
            };
            // Torus handle in the xz-plane on the +x side.
            let s = ((q[0] - 0.42).powi(2) + (q[2] - 0.02).powi(2)).sqrt();
            let torus_d = ((s - 0.24).powi(2) + q[1] * q[1]).sqrt() - 0.09;
            let handle = (0.5 - torus_d / 0.08).clamp(0.0, 1.0);
            cone.max(handle * 0.85)
        }),
    };
    let mut values = Vec::with_capacity(nx * ny * nz);
    // Normalized coordinates as exact integer ratios, so that mirrored
    // voxel positions negate exactly in floating point.
    let coord = |idx: usize, n: usize| (2 * idx as i64 - (n as i64 - 1)) as f64 / (n as f64 - 1.0);
    for k in 0..nz {
        let qz = coord(k, nz);
        for j in 0..ny {
            let qy = coord(j, ny);
            for i in 0..nx {
                let qx = coord(i, nx);
                values.push(field([qx, qy, qz]));
            }
        }
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if max > min { max - min } else { 1.0 };
    for v in &mut values {
        *v = (*v - min) / range;
    }
    VolumeGrid::new(dims, (1.0, 1.0, 1.0), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(bytes: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn constant_raw_normalizes_to_zero() {
        let f = write_temp(&[7u8; 8]);
        let v = load_raw(f.path(), (2, 2, 2), ElementType::U8, (1.0, 1.0, 1.0)).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn byte_volume_normalizes_by_255() {
        let bytes: Vec<u8> = vec![0, 17, 51, 85, 119, 170, 204, 255];
        let f = write_temp(&bytes);
        let v = load_raw(f.path(), (2, 2, 2), ElementType::U8, (1.0, 1.0, 1.0)).unwrap();
        for (i, &b) in bytes.iter().enumerate() {
            assert_eq!(v.values()[i], f64::from(b) / 255.0);
        }
    }

    #[test]
    fn truncated_raw_is_size_mismatch() {
        let f = write_temp(&[1u8; 7]);
        let err = load_raw(f.path(), (2, 2, 2), ElementType::U8, (1.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::SizeMismatch { .. }));
    }

    #[test]
    fn sample_at_voxel_center_returns_stored_value() {
        let v = synth_volume(PhantomKind::AsymmetricBlobs, (8, 8, 8), 3).unwrap();
        for (i, j, k) in [(0, 0, 0), (3, 4, 5), (7, 7, 7)] {
            let p = v.voxel_center(i, j, k);
            assert!((v.sample_trilinear(p) - v.voxel(i, j, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_midpoint_is_mean_of_adjacent_voxels() {
        let v = synth_volume(PhantomKind::AsymmetricBlobs, (8, 8, 8), 3).unwrap();
        let a = v.voxel_center(2, 3, 4);
        let b = v.voxel_center(3, 3, 4);
        let mid = [(a[0] + b[0]) / 2.0, a[1], a[2]];
        let expect = (v.voxel(2, 3, 4) + v.voxel(3, 3, 4)) / 2.0;
        assert!((v.sample_trilinear(mid) - expect).abs() < 1e-12);
    }

    #[test]
    fn sample_far_outside_is_zero() {
        let v = synth_volume(PhantomKind::NestedShells, (8, 8, 8), 0).unwrap();
        assert_eq!(v.sample_trilinear([100.0, 0.0, 0.0]), 0.0);
        assert_eq!(v.sample_trilinear([0.0, -50.0, 3.0]), 0.0);
    }

    #[test]
    fn gradient_of_constant_volume_is_zero() {
        let v = VolumeGrid::new((4, 4, 4), (1.0, 1.0, 1.0), vec![0.5; 64]).unwrap();
        assert_eq!(v.gradient_at([0.2, -0.3, 0.1]), [0.0; 3]);
    }

    #[test]
    fn gradient_of_linear_ramp_points_in_x() {
        let (nx, ny, nz) = (8, 8, 8);
        let mut values = Vec::new();
        for _k in 0..nz {
            for _j in 0..ny {
                for i in 0..nx {
                    values.push(i as f64 / (nx as f64 - 1.0));
                }
            }
        }
        let v = VolumeGrid::new((nx, ny, nz), (1.0, 1.0, 1.0), values).unwrap();
        let g = v.gradient_at([0.1, 0.2, -0.4]);
        let mag = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        assert!((g[0] / mag - 1.0).abs() < 1e-6);
        assert!((g[1] / mag).abs() < 1e-6);
        assert!((g[2] / mag).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_half_step_oracle_at_cell_centers() {
        // At cell centers both stencils stay inside one trilinear cell,
        // where the derivative is exact, so halving the step changes
        // nothing beyond roundoff.
        let v = synth_volume(PhantomKind::ConeWithHandle, (16, 16, 16), 9).unwrap();
        let h = 0.25 * v.min_spacing();
        for (i, j, k) in [(3, 4, 5), (8, 8, 8), (10, 2, 12)] {
            let c = v.voxel_center(i, j, k);
            let p = [c[0] + 0.5, c[1] + 0.5, c[2] + 0.5];
            let g = v.gradient_at(p);
            for axis in 0..3 {
                let mut hi = p;
                let mut lo = p;
                hi[axis] += h;
                lo[axis] -= h;
                let fd = (v.sample_trilinear(hi) - v.sample_trilinear(lo)) / (2.0 * h);
                if g == [0.0; 3] {
                    assert!(fd.abs() < 1e-8);
                } else {
                    assert!(
                        (g[axis] - fd).abs() < 1e-9,
                        "axis {axis}: {} vs {fd}",
                        g[axis]
                    );
                }
            }
        }
    }

    #[test]
    fn trilinear_shrinking_perturbations_converge() {
        let v = synth_volume(PhantomKind::AsymmetricBlobs, (12, 12, 12), 5).unwrap();
        let points = [[0.0, 0.0, 0.0], [1.5, -2.0, 3.0], [5.9, 5.9, 5.9]];
        for p in points {
            let base = v.sample_trilinear(p);
            let mut eps = 0.5;
            let mut gap = f64::INFINITY;
            for _ in 0..8 {
                let q = [p[0] + eps, p[1] + eps, p[2] + eps];
                gap = (v.sample_trilinear(q) - base).abs();
                eps *= 0.5;
            }
            assert!(gap < 1e-2, "gap {gap} at {p:?}");
        }
    }

    #[test]
    fn synth_is_deterministic() {
        for kind in PhantomKind::ALL {
            let a = synth_volume(kind, (16, 16, 16), 11).unwrap();
            let b = synth_volume(kind, (16, 16, 16), 11).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unknown_phantom_errors() {
        assert!(matches!(
            "banana".parse::<PhantomKind>(),
            Err(Error::UnknownPhantom(_))
        ));
    }

    #[test]
    fn nested_shells_invariant_under_quarter_turns() {
        let n = 16;
        let v = synth_volume(PhantomKind::NestedShells, (n, n, n), 0).unwrap();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    // (i, j) -> (j, n-1-i) is a quarter turn about z.
                    assert_eq!(v.voxel(i, j, k), v.voxel(j, n - 1 - i, k));
                }
            }
        }
    }

    #[test]
    fn header_round_trip_preserves_values() {
        let v = synth_volume(PhantomKind::LBlock, (8, 8, 8), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.vgrid");
        v.save_with_header(&path, ElementType::F32).unwrap();
        let loaded = VolumeGrid::load_with_header(&path).unwrap();
        assert_eq!(loaded.dims(), v.dims());
        assert_eq!(loaded.spacing(), v.spacing());
        for (a, b) in loaded.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn normalization_idempotent_for_prenormalized_input() {
        let v = synth_volume(PhantomKind::AsymmetricBlobs, (6, 6, 6), 7).unwrap();
        let mut bytes = Vec::new();
        for &x in v.values() {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
        let f = write_temp(&bytes);
        let reloaded = load_raw(f.path(), (6, 6, 6), ElementType::F32, (1.0, 1.0, 1.0)).unwrap();
        for (a, b) in reloaded.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
