//! Direct volume rendering: emission-absorption raycasting with Phong
//! shading, parallel/perspective projection, camera tilt, scale and
//! background blending.
//!
//! Rendering is deterministic: identical inputs produce bit-identical
//! images. Rows are rendered in parallel but written strictly by index, so
//! results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::{ColorTF, OpacityTF};
use crate::viewsphere::{sin_cos_deg, SphericalDirection, SpherePixelization, ViewpointLabel};
use crate::volume::VolumeGrid;

/// Accumulated-opacity threshold for early ray termination.
pub const EARLY_STOP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    Parallel,
    Perspective,
}

/// Full camera description for one render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// Viewpoint on the viewing sphere; the camera always looks at the
    /// volume center.
    pub direction: SphericalDirection,
    /// Roll about the view axis, degrees in [0, 360).
    pub tilt_deg: f64,
    pub projection: Projection,
    /// Zoom: the camera sits at distance viewing_radius / scale and the
    /// parallel half-window is viewing_radius / scale.
    pub scale: f64,
    pub image_size: (usize, usize),
    /// Vertical field of view, perspective only.
    pub fov_deg: f64,
    /// Viewing-sphere radius in world units.
    pub viewing_radius: f64,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "camera scale must be positive, got {}",
                self.scale
            )));
        }
        if self.projection == Projection::Perspective
            && !(self.fov_deg > 10.0 && self.fov_deg < 120.0)
        {
            return Err(Error::InvalidArgument(format!(
                "perspective fov must lie in (10, 120), got {}",
                self.fov_deg
            )));
        }
        if !(self.viewing_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "viewing radius must be positive".into(),
            ));
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err(Error::InvalidArgument(
                "image dimensions must be nonzero".into(),
            ));
        }
        Ok(())
    }

    /// Distance from the volume center to the camera.
    pub fn distance(&self) -> f64 {
        self.viewing_radius / self.scale
    }

    /// Orthonormal frame: (position, forward, right, up) with tilt applied.
    pub fn frame(&self) -> ([f64; 3], [f64; 3], [f64; 3], [f64; 3]) {
        let u = self.direction.to_unit();
        let d = self.distance();
        let pos = [u[0] * d, u[1] * d, u[2] * d];
        let forward = [-u[0], -u[1], -u[2]];
        let up_seed = if u[2].abs() < 0.999_999 {
            [0.0, 0.0, 1.0]
        } else {
            [1.0, 0.0, 0.0]
        };
        let right = normalize(cross(up_seed, forward));
        let up = cross(forward, right);
        let (s, c) = sin_cos_deg(self.tilt_deg);
        let right_t = [
            c * right[0] + s * up[0],
            c * right[1] + s * up[1],
            c * right[2] + s * up[2],
        ];
        let up_t = [
            -s * right[0] + c * up[0],
            -s * right[1] + c * up[1],
            -s * right[2] + c * up[2],
        ];
        (pos, forward, right_t, up_t)
    }
}

/// Optional overrides for [`make_camera`].
#[derive(Debug, Clone, Default)]
pub struct CameraOverrides {
    pub direction: Option<SphericalDirection>,
    pub tilt_deg: Option<f64>,
    pub projection: Option<Projection>,
    pub scale: Option<f64>,
    pub image_size: Option<(usize, usize)>,
    pub fov_deg: Option<f64>,
}

/// Camera at the center of region `l`: distance viewing_radius / scale,
/// tilt 0 and parallel projection unless overridden.
pub fn make_camera(
    p: &SpherePixelization,
    l: ViewpointLabel,
    viewing_radius: f64,
    overrides: &CameraOverrides,
) -> Result<Camera> {
    let center = p.center_of(l)?;
    let cam = Camera {
        direction: overrides.direction.unwrap_or(center),
        tilt_deg: overrides.tilt_deg.unwrap_or(0.0),
        projection: overrides.projection.unwrap_or(Projection::Parallel),
        scale: overrides.scale.unwrap_or(1.0),
        image_size: overrides.image_size.unwrap_or((256, 256)),
        fov_deg: overrides.fov_deg.unwrap_or(45.0),
        viewing_radius,
    };
    cam.validate()?;
    Ok(cam)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LightingMode {
    /// Environment (ambient) light only.
    EnvOnly,
    /// Environment light plus a headlight at the camera position.
    EnvHeadlight,
    /// Environment light, headlight and one scene light.
    EnvHeadlightScene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingConfig {
    pub mode: LightingMode,
    pub headlight_intensity: f64,
    pub scene_intensity: f64,
    pub scene_position: [f64; 3],
    /// Ambient reflection coefficient; fixed at 1 in the generation
    /// pipeline.
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl LightingConfig {
    pub fn env_only() -> Self {
        LightingConfig {
            mode: LightingMode::EnvOnly,
            headlight_intensity: 0.0,
            scene_intensity: 0.0,
            scene_position: [0.0, 0.0, 0.0],
            ambient: 1.0,
            diffuse: 0.5,
            specular: 0.75,
            shininess: 40.0,
        }
    }

    pub fn headlight(intensity: f64) -> Self {
        LightingConfig {
            mode: LightingMode::EnvHeadlight,
            headlight_intensity: intensity,
            ..LightingConfig::env_only()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.headlight_intensity < 0.0 || self.scene_intensity < 0.0 {
            return Err(Error::InvalidArgument(
                "light intensities must be non-negative".into(),
            ));
        }
        if !(self.shininess > 0.0) {
            return Err(Error::InvalidArgument(
                "shininess must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A complete render request: camera, lighting and background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderJob {
    pub camera: Camera,
    pub lighting: LightingConfig,
    pub background: [f64; 3],
}

/// 8-bit RGB image, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RenderedImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(RenderedImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn rgb_at(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Root-mean-square difference on the [0, 1] scale.
    pub fn rms_diff(&self, other: &RenderedImage) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len());
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| {
                let d = (f64::from(a) - f64::from(b)) / 255.0;
                d * d
            })
            .sum();
        (sum / self.pixels.len() as f64).sqrt()
    }

    /// The image rotated by 180 degrees.
    pub fn rotated_180(&self) -> RenderedImage {
        let mut pixels = vec![0u8; self.pixels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let src = (y * self.width + x) * 3;
                let dst = ((self.height - 1 - y) * self.width + (self.width - 1 - x)) * 3;
                pixels[dst..dst + 3].copy_from_slice(&self.pixels[src..src + 3]);
            }
        }
        RenderedImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Channels as f64 in [0, 1], planar [r-plane, g-plane, b-plane],
    /// the layout consumed by the classifier.
    pub fn to_planar_f64(&self) -> Vec<f64> {
        let n = self.width * self.height;
        let mut out = vec![0.0; n * 3];
        for i in 0..n {
            for c in 0..3 {
                out[c * n + i] = f64::from(self.pixels[i * 3 + c]) / 255.0;
            }
        }
        out
    }
}

/// Opacity correction for a step size differing from the reference:
/// alpha' = 1 - (1 - alpha)^(step / step_ref).
#[inline]
pub fn correct_opacity(alpha: f64, step: f64, step_ref: f64) -> f64 {
    if step == step_ref {
        alpha
    } else {
        1.0 - (1.0 - alpha).powf(step / step_ref)
    }
}

/// One shaded, opacity-corrected sample along a ray.
#[derive(Debug, Clone, Copy)]
pub struct RaySample {
    pub alpha: f64,
    pub rgb: [f64; 3],
}

/// March a ray and feed shaded samples to `visit`; stops when `visit`
/// returns false. `t0`/`t1` bound the volume intersection, `step` is the
/// world sampling step and `step_ref` the opacity-correction reference.
#[allow(clippy::too_many_arguments)]
pub fn march_ray(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    lighting: &LightingConfig,
    origin: [f64; 3],
    dir: [f64; 3],
    t0: f64,
    t1: f64,
    step: f64,
    step_ref: f64,
    visit: &mut dyn FnMut(RaySample) -> bool,
) {
    let n_steps = ((t1 - t0) / step).ceil() as usize;
    let view = [-dir[0], -dir[1], -dir[2]];
    for k in 0..n_steps {
        let t = t0 + (k as f64 + 0.5) * step;
        if t >= t1 {
            break;
        }
        let p = [
            origin[0] + t * dir[0],
            origin[1] + t * dir[1],
            origin[2] + t * dir[2],
        ];
        let s = volume.sample_trilinear(p);
        let alpha = otf.eval(s);
        if alpha <= 0.0 {
            continue;
        }
        let alpha = correct_opacity(alpha, step, step_ref);
        let rgb = shade(volume, lighting, p, ctf.eval(s), view);
        if !visit(RaySample { alpha, rgb }) {
            return;
        }
    }
}

/// Phong shading of one sample. The environment light contributes the
/// ambient term; headlight and scene light add diffuse and specular terms
/// using the volume-gradient normal, flipped towards the viewer.
fn shade(
    volume: &VolumeGrid,
    lighting: &LightingConfig,
    p: [f64; 3],
    base: [f64; 3],
    view: [f64; 3],
) -> [f64; 3] {
    let mut diffuse_sum = 0.0;
    let mut specular_sum = 0.0;
    if lighting.mode != LightingMode::EnvOnly {
        let g = volume.gradient_at(p);
        if g != [0.0; 3] {
            let mut n = normalize(g);
            if dot(n, view) < 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            let mut add_light = |l: [f64; 3], intensity: f64| {
                let ndl = dot(n, l);
                if ndl > 0.0 {
                    diffuse_sum += lighting.diffuse * intensity * ndl;
                    let r = [
                        2.0 * ndl * n[0] - l[0],
                        2.0 * ndl * n[1] - l[1],
                        2.0 * ndl * n[2] - l[2],
                    ];
                    let rdv = dot(r, view);
                    if rdv > 0.0 {
                        specular_sum +=
                            lighting.specular * intensity * rdv.powf(lighting.shininess);
                    }
                }
            };
            add_light(view, lighting.headlight_intensity);
            if lighting.mode == LightingMode::EnvHeadlightScene {
                let to_light = [
                    lighting.scene_position[0] - p[0],
                    lighting.scene_position[1] - p[1],
                    lighting.scene_position[2] - p[2],
                ];
                add_light(normalize(to_light), lighting.scene_intensity);
            }
        }
    }
    let lum = lighting.ambient + diffuse_sum;
    [
        (base[0] * lum + specular_sum).clamp(0.0, 1.0),
        (base[1] * lum + specular_sum).clamp(0.0, 1.0),
        (base[2] * lum + specular_sum).clamp(0.0, 1.0),
    ]
}

/// Front-to-back emission-absorption compositing with optional early
/// termination, then background blending.
pub fn composite_front_to_back(
    samples: &[RaySample],
    background: [f64; 3],
    early_stop: Option<f64>,
) -> [f64; 3] {
    let mut color = [0.0f64; 3];
    let mut acc = 0.0f64;
    for s in samples {
        let w = (1.0 - acc) * s.alpha;
        color[0] += w * s.rgb[0];
        color[1] += w * s.rgb[1];
        color[2] += w * s.rgb[2];
        acc += w;
        if let Some(stop) = early_stop {
            if acc >= stop {
                break;
            }
        }
    }
    [
        color[0] + (1.0 - acc) * background[0],
        color[1] + (1.0 - acc) * background[1],
        color[2] + (1.0 - acc) * background[2],
    ]
}

/// Back-to-front reference compositor (no early termination possible).
pub fn composite_back_to_front(samples: &[RaySample], background: [f64; 3]) -> [f64; 3] {
    let mut color = background;
    for s in samples.iter().rev() {
        for c in 0..3 {
            color[c] = s.alpha * s.rgb[c] + (1.0 - s.alpha) * color[c];
        }
    }
    color
}

/// Ray origin and direction for pixel (x, y); also returns the parametric
/// range of the volume-box intersection, if any.
pub fn pixel_ray(
    camera: &Camera,
    volume: &VolumeGrid,
    x: usize,
    y: usize,
) -> Option<([f64; 3], [f64; 3], f64, f64)> {
    let (w, h) = camera.image_size;
    let (pos, forward, right, up) = camera.frame();
    // Pixel-center coordinates, symmetric about the image center.
    let kx = (2 * x as i64 + 1 - w as i64) as f64;
    let ky = (h as i64 - 1 - 2 * y as i64) as f64;
    let aspect = w as f64 / h as f64;
    let (origin, dir) = match camera.projection {
        Projection::Parallel => {
            // Window sized to the bounding sphere (viewing_radius is 1.5x
            // the half-diagonal): the volume is exactly in frame at scale 1
            // and fills the image comparably to the perspective branch.
            let half_h = camera.viewing_radius / (1.5 * camera.scale);
            let px = kx * (half_h * aspect / w as f64);
            let py = ky * (half_h / h as f64);
            // Origin on the plane through the volume center: parallel rays
            // integrate the full line, independent of camera distance.
            let origin = [
                px * right[0] + py * up[0],
                px * right[1] + py * up[1],
                px * right[2] + py * up[2],
            ];
            (origin, forward)
        }
        Projection::Perspective => {
            let tan_half = (camera.fov_deg.to_radians() / 2.0).tan();
            let px = kx / w as f64 * tan_half * aspect;
            let py = ky / h as f64 * tan_half;
            let dir = normalize([
                forward[0] + px * right[0] + py * up[0],
                forward[1] + px * right[1] + py * up[1],
                forward[2] + px * right[2] + py * up[2],
            ]);
            (pos, dir)
        }
    };
    let (ex, ey, ez) = volume.world_extent();
    let half = [ex / 2.0, ey / 2.0, ez / 2.0];
    let unbounded_lo = match camera.projection {
        Projection::Parallel => f64::NEG_INFINITY,
        Projection::Perspective => 1e-9,
    };
    ray_box(origin, dir, half).and_then(|(t0, t1)| {
        let t0 = t0.max(unbounded_lo);
        if t1 <= t0 {
            None
        } else {
            Some((origin, dir, t0, t1))
        }
    })
}

fn ray_box(origin: [f64; 3], dir: [f64; 3], half: [f64; 3]) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for a in 0..3 {
        if dir[a].abs() < 1e-300 {
            if origin[a].abs() > half[a] {
                return None;
            }
        } else {
            let ta = (-half[a] - origin[a]) / dir[a];
            let tb = (half[a] - origin[a]) / dir[a];
            lo = lo.max(ta.min(tb));
            hi = hi.min(ta.max(tb));
        }
    }
    if lo < hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Render the volume through the transfer functions into an 8-bit image.
///
/// Rays march at a fixed world step equal to the minimum voxel spacing,
/// with opacity correction referenced to the same step, early termination
/// at accumulated opacity 0.999, and background blending of the remaining
/// transparency.
pub fn render(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    camera: &Camera,
    lighting: &LightingConfig,
    background: [f64; 3],
) -> Result<RenderedImage> {
    camera.validate()?;
    lighting.validate()?;
    let (w, h) = camera.image_size;
    let step = volume.min_spacing();
    let step_ref = volume.min_spacing();
    let rows: Vec<Vec<u8>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w * 3);
            for x in 0..w {
                let rgb = match pixel_ray(camera, volume, x, y) {
                    None => background,
                    Some((origin, dir, t0, t1)) => {
                        let mut color = [0.0f64; 3];
                        let mut acc = 0.0f64;
                        march_ray(
                            volume,
                            otf,
                            ctf,
                            lighting,
                            origin,
                            dir,
                            t0,
                            t1,
                            step,
                            step_ref,
                            &mut |s| {
                                let wgt = (1.0 - acc) * s.alpha;
                                color[0] += wgt * s.rgb[0];
                                color[1] += wgt * s.rgb[1];
                                color[2] += wgt * s.rgb[2];
                                acc += wgt;
                                acc < EARLY_STOP
                            },
                        );
                        [
                            color[0] + (1.0 - acc) * background[0],
                            color[1] + (1.0 - acc) * background[1],
                            color[2] + (1.0 - acc) * background[2],
                        ]
                    }
                };
                for c in rgb {
                    row.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
            row
        })
        .collect();
    let mut pixels = Vec::with_capacity(w * h * 3);
    for row in rows {
        pixels.extend_from_slice(&row);
    }
    RenderedImage::new(w, h, pixels)
}

/// Render with an explicit job record.
pub fn render_job(
    volume: &VolumeGrid,
    otf: &OpacityTF,
    ctf: &ColorTF,
    job: &RenderJob,
) -> Result<RenderedImage> {
    render(volume, otf, ctf, &job.camera, &job.lighting, job.background)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}
