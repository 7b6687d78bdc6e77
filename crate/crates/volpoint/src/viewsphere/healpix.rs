//! Ring-scheme equal-area isoLatitude pixelization internals.
//!
//! Works on (z, phi) pairs, z = cos(polar angle), phi = azimuth in radians.
//! Pixel indices follow the ring ordering: ring 1 starts at the north pole,
//! indices increase eastward within a ring, ring by ring towards the south
//! pole. Arbitrary `nside >= 1` is supported (no power-of-two restriction).

use std::f64::consts::{FRAC_PI_2, PI};

/// Ring index offset of the northernmost ring touching each base face.
const JRLL: [i64; 12] = [2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4];
/// Longitude offset (in units of pi/4) of each base face.
const JPLL: [i64; 12] = [1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7];

/// Face transition table indexed by [region][face]. Region encodes which
/// side of the face a coordinate fell off: 4 + dx + 3*dy with dx, dy in
/// {-1, 0, 1} along the face x (towards NE) and y (towards NW) axes.
/// -1 marks the missing diagonal neighbors of polar faces.
const FACEARRAY: [[i64; 12]; 9] = [
    [8, 9, 10, 11, -1, -1, -1, -1, 10, 11, 8, 9], // S
    [5, 6, 7, 4, 8, 9, 10, 11, 9, 10, 11, 8],     // SE
    [-1, -1, -1, -1, 5, 6, 7, 4, -1, -1, -1, -1], // E
    [4, 5, 6, 7, 11, 8, 9, 10, 11, 8, 9, 10],     // SW
    [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],       // center
    [1, 2, 3, 0, 0, 1, 2, 3, 5, 6, 7, 4],         // NE
    [-1, -1, -1, -1, 7, 4, 5, 6, -1, -1, -1, -1], // W
    [3, 0, 1, 2, 3, 0, 1, 2, 4, 5, 6, 7],         // N
    [2, 3, 0, 1, -1, -1, -1, -1, 6, 7, 4, 5],     // NW
];

/// Coordinate transform applied when crossing into a neighbor face,
/// indexed by [region][face / 4]. Bit 0: x -> nside-1-x, bit 1:
/// y -> nside-1-y, bit 2: swap x and y.
const SWAPARRAY: [[u8; 3]; 9] = [
    [0, 0, 3], // S
    [0, 0, 6], // SE
    [0, 0, 0], // E
    [0, 0, 5], // SW
    [0, 0, 0], // center
    [5, 0, 0], // NE
    [0, 0, 0], // W
    [6, 0, 0], // N
    [3, 0, 0], // NW
];

/// Edge-crossing offsets in face coordinates: SW, NW, NE, SE. These are the
/// four edge-sharing directions of the diamond-shaped pixels; the remaining
/// four compass directions only touch at corners.
const EDGE_OFFSETS: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone)]
pub(crate) struct RingScheme {
    nside: u64,
    npix: u64,
    ncap: u64,
}

impl RingScheme {
    pub fn new(nside: u32) -> Self {
        assert!(nside >= 1);
        let nside = u64::from(nside);
        RingScheme {
            nside,
            npix: 12 * nside * nside,
            ncap: 2 * nside * (nside - 1),
        }
    }

    pub fn npix(&self) -> u64 {
        self.npix
    }

    /// Pixel index containing the point (z, phi).
    pub fn ang2pix(&self, z: f64, phi: f64) -> u64 {
        let ns = self.nside as f64;
        let tt = (phi / FRAC_PI_2).rem_euclid(4.0);
        if z.abs() <= 2.0 / 3.0 {
            // Equatorial band: locate the pixel between the ascending and
            // descending edge lines.
            let nl4 = 4 * self.nside as i64;
            let temp1 = ns * (0.5 + tt);
            let temp2 = ns * z * 0.75;
            let jp = (temp1 - temp2) as i64;
            let jm = (temp1 + temp2) as i64;
            let ir = self.nside as i64 + 1 + jp - jm;
            let kshift = 1 - (ir & 1);
            let t1 = jp + jm - self.nside as i64 + kshift + 1 + 4 * nl4;
            let ip = ((t1 >> 1) % nl4) as u64;
            self.ncap + (ir as u64 - 1) * nl4 as u64 + ip
        } else {
            // Polar caps.
            let tp = tt.fract();
            let tmp = ns * (3.0 * (1.0 - z.abs())).sqrt();
            let jp = (tp * tmp) as i64;
            let jm = ((1.0 - tp) * tmp) as i64;
            let ir = (jp + jm + 1) as u64;
            let ip = ((tt * ir as f64) as i64).rem_euclid(4 * ir as i64) as u64;
            if z > 0.0 {
                2 * ir * (ir - 1) + ip
            } else {
                self.npix - 2 * ir * (ir + 1) + ip
            }
        }
    }

    /// Center of pixel `pix` as (z, phi).
    pub fn pix2ang(&self, pix: u64) -> (f64, f64) {
        debug_assert!(pix < self.npix);
        let fact2 = 4.0 / self.npix as f64;
        if pix < self.ncap {
            let iring = (1 + (1 + 2 * pix).isqrt()) >> 1;
            let iphi = (pix + 1) - 2 * iring * (iring - 1);
            let z = 1.0 - (iring * iring) as f64 * fact2;
            let phi = (iphi as f64 - 0.5) * FRAC_PI_2 / iring as f64;
            (z, phi)
        } else if pix < self.npix - self.ncap {
            let fact1 = (2 * self.nside) as f64 * fact2;
            let nl4 = 4 * self.nside;
            let ip = pix - self.ncap;
            let tmp = ip / nl4;
            let iring = tmp + self.nside;
            let iphi = ip - nl4 * tmp + 1;
            let fodd = if (iring + self.nside) & 1 == 1 { 1.0 } else { 0.5 };
            let z = (2.0 * self.nside as f64 - iring as f64) * fact1;
            let phi = (iphi as f64 - fodd) * PI / (2.0 * self.nside as f64);
            (z, phi)
        } else {
            let ip = self.npix - pix;
            let iring = (1 + (2 * ip - 1).isqrt()) >> 1;
            let iphi = 4 * iring + 1 - (ip - 2 * iring * (iring - 1));
            let z = (iring * iring) as f64 * fact2 - 1.0;
            let phi = (iphi as f64 - 0.5) * FRAC_PI_2 / iring as f64;
            (z, phi)
        }
    }

    /// The four edge-sharing neighbor pixels of `pix` (SW, NW, NE, SE in
    /// face coordinates). Every pixel has exactly four.
    pub fn edge_neighbors(&self, pix: u64) -> [u64; 4] {
        let (ix, iy, face) = self.ring2xyf(pix);
        let ns = self.nside as i64;
        let mut out = [0u64; 4];
        for (slot, &(dx, dy)) in EDGE_OFFSETS.iter().enumerate() {
            let mut x = ix + dx;
            let mut y = iy + dy;
            let mut region = 4i64;
            if x < 0 {
                x += ns;
                region -= 1;
            } else if x >= ns {
                x -= ns;
                region += 1;
            }
            if y < 0 {
                y += ns;
                region -= 3;
            } else if y >= ns {
                y -= ns;
                region += 3;
            }
            let nb_face = if region == 4 {
                face
            } else {
                let f = FACEARRAY[region as usize][face as usize];
                debug_assert!(f >= 0, "edge crossings always have a face");
                let bits = SWAPARRAY[region as usize][(face >> 2) as usize];
                if bits & 1 != 0 {
                    x = ns - 1 - x;
                }
                if bits & 2 != 0 {
                    y = ns - 1 - y;
                }
                if bits & 4 != 0 {
                    std::mem::swap(&mut x, &mut y);
                }
                f
            };
            out[slot] = self.xyf2ring(x, y, nb_face);
        }
        out
    }

    /// Maximum angular distance (radians) from any pixel center to a point
    /// of that pixel, over all pixels. Attained next to the polar corners.
    pub fn max_center_dist_rad(&self) -> f64 {
        let ns = self.nside as f64;
        let va = zphi_to_vec(2.0 / 3.0, PI / (4.0 * ns));
        let t1 = (1.0 - 1.0 / ns) * (1.0 - 1.0 / ns);
        let vb = zphi_to_vec(1.0 - t1 / 3.0, 0.0);
        vec_angle(va, vb)
    }

    /// Pixel index -> face coordinates (x towards NE, y towards NW, face 0-11).
    fn ring2xyf(&self, pix: u64) -> (i64, i64, i64) {
        debug_assert!(pix < self.npix);
        let ns = self.nside as i64;
        let nl2 = 2 * ns;
        let (mut iring, iphi, kshift, nr, face): (i64, i64, i64, i64, i64);
        if pix < self.ncap {
            iring = ((1 + (1 + 2 * pix).isqrt()) >> 1) as i64;
            iphi = (pix + 1) as i64 - 2 * iring * (iring - 1);
            kshift = 0;
            nr = iring;
            face = (iphi - 1) / nr;
        } else if pix < self.npix - self.ncap {
            let ip = (pix - self.ncap) as i64;
            let tmp = ip / (4 * ns);
            iring = tmp + ns;
            iphi = ip - tmp * 4 * ns + 1;
            kshift = (iring + ns) & 1;
            nr = ns;
            let ire = iring - ns + 1;
            let irm = nl2 + 2 - ire;
            let ifm = (iphi - ire / 2 + ns - 1) / ns;
            let ifp = (iphi - irm / 2 + ns - 1) / ns;
            face = if ifp == ifm {
                ifp | 4
            } else if ifp < ifm {
                ifp
            } else {
                ifm + 8
            };
        } else {
            let ip = (self.npix - pix) as i64;
            iring = ((1 + ((2 * ip - 1) as u64).isqrt()) >> 1) as i64;
            iphi = 4 * iring + 1 - (ip - 2 * iring * (iring - 1));
            kshift = 0;
            nr = iring;
            face = 8 + (iphi - 1) / nr;
            iring = 4 * ns - iring;
        }
        let irt = iring - JRLL[face as usize] * ns + 1;
        let mut ipt = 2 * iphi - JPLL[face as usize] * nr - kshift - 1;
        if ipt >= nl2 {
            ipt -= 8 * ns;
        }
        ((ipt - irt) >> 1, (-ipt - irt) >> 1, face)
    }

    /// Face coordinates -> pixel index.
    fn xyf2ring(&self, ix: i64, iy: i64, face: i64) -> u64 {
        let ns = self.nside as i64;
        let nl4 = 4 * ns;
        let jr = JRLL[face as usize] * ns - ix - iy - 1;
        let (n_before, ringpix, shifted) = self.ring_info(jr);
        let nr = ringpix / 4;
        let kshift = 1 - i64::from(shifted);
        let mut jp = (JPLL[face as usize] * nr + ix - iy + 1 + kshift) / 2;
        debug_assert!(jp <= 4 * nr);
        if jp < 1 {
            jp += nl4;
        }
        (n_before + jp - 1) as u64
    }

    /// (first pixel index, pixel count, shifted) for ring `ring` in 1..4*nside.
    fn ring_info(&self, ring: i64) -> (i64, i64, bool) {
        let ns = self.nside as i64;
        if ring < ns {
            (2 * ring * (ring - 1), 4 * ring, true)
        } else if ring < 3 * ns {
            (
                self.ncap as i64 + (ring - ns) * 4 * ns,
                4 * ns,
                (ring - ns) & 1 == 0,
            )
        } else {
            let nr = 4 * ns - ring;
            (self.npix as i64 - 2 * nr * (nr + 1), 4 * nr, true)
        }
    }
}

pub(crate) fn zphi_to_vec(z: f64, phi: f64) -> [f64; 3] {
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

pub(crate) fn vec_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cross_norm.atan2(dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pix_ang_round_trip_various_nside() {
        for nside in [1u32, 2, 3, 4, 7, 14] {
            let rs = RingScheme::new(nside);
            for pix in 0..rs.npix() {
                let (z, phi) = rs.pix2ang(pix);
                assert_eq!(rs.ang2pix(z, phi), pix, "nside={nside} pix={pix}");
            }
        }
    }

    #[test]
    fn ang2pix_covers_all_pixels() {
        let rs = RingScheme::new(2);
        let mut seen = vec![false; rs.npix() as usize];
        let n = 400;
        for i in 0..n {
            let z = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let phi = 2.0 * PI * j as f64 / n as f64;
                seen[rs.ang2pix(z, phi) as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn xyf_round_trip() {
        for nside in [1u32, 2, 3, 14] {
            let rs = RingScheme::new(nside);
            for pix in 0..rs.npix() {
                let (ix, iy, face) = rs.ring2xyf(pix);
                assert!((0..nside as i64).contains(&ix));
                assert!((0..nside as i64).contains(&iy));
                assert!((0..12).contains(&face));
                assert_eq!(rs.xyf2ring(ix, iy, face), pix);
            }
        }
    }

    #[test]
    fn edge_neighbors_are_mutual_and_distinct() {
        for nside in [1u32, 2, 3, 4, 14] {
            let rs = RingScheme::new(nside);
            for pix in 0..rs.npix() {
                let nbs = rs.edge_neighbors(pix);
                for (i, &nb) in nbs.iter().enumerate() {
                    assert!(nb < rs.npix());
                    assert_ne!(nb, pix);
                    for &other in &nbs[i + 1..] {
                        assert_ne!(nb, other, "nside={nside} pix={pix}");
                    }
                    assert!(
                        rs.edge_neighbors(nb).contains(&pix),
                        "nside={nside}: {pix} -> {nb} not mutual"
                    );
                }
            }
        }
    }

    #[test]
    fn neighbors_are_geometrically_close() {
        let rs = RingScheme::new(4);
        // Edge neighbors must lie within a couple of pixel diameters.
        let limit = 2.5 * rs.max_center_dist_rad();
        for pix in 0..rs.npix() {
            let (z, phi) = rs.pix2ang(pix);
            let c = zphi_to_vec(z, phi);
            for nb in rs.edge_neighbors(pix) {
                let (zn, pn) = rs.pix2ang(nb);
                let d = vec_angle(c, zphi_to_vec(zn, pn));
                assert!(d < limit, "pix {pix} nb {nb}: {d}");
            }
        }
    }
}
