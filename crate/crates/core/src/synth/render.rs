//! Direct-illumination renderer for a single convex object.

use std::f64::consts::PI;

use super::camera::Camera;
use super::scene::Scene;
use super::srgb::{byte_to_unit, to_ldr_byte};
use crate::brdf::{lobe_from_tan2, Rgb, WardBrdf};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Resolution of the hemisphere quadrature for the ambient term.
pub const AMBIENT_GRID: usize = 32;
const TABLE_NODES: usize = 256;

/// One rendered RGBD view.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub camera: Camera,
    /// Linear radiance, row-major `H×W×3`.
    pub hdr: Vec<f64>,
    /// Encoded 8-bit colour, row-major `H×W×3`.
    pub ldr: Vec<u8>,
    /// Camera-space depth; 0 where the primary ray misses the object.
    pub depth: Vec<f64>,
    pub f_bar: Rgb,
    pub b_bar: Rgb,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.camera.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.camera.intrinsics.height
    }

    pub fn ldr_pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width() + x) * 3;
        [0, 1, 2].map(|c| byte_to_unit(self.ldr[i + c]))
    }

    pub fn hdr_pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width() + x) * 3;
        [self.hdr[i], self.hdr[i + 1], self.hdr[i + 2]]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.depth[y * self.width() + x] > 0.0
    }

    /// Bilinear LDR lookup at continuous pixel coordinates (pixel centres at
    /// half-integers), clamped at the border.
    pub fn sample_ldr(&self, u: f64, v: f64) -> Rgb {
        let (w, h) = (self.width(), self.height());
        let x = (u - 0.5).clamp(0.0, (w - 1) as f64);
        let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let (p00, p10, p01, p11) =
            (self.ldr_pixel(x0, y0), self.ldr_pixel(x1, y0), self.ldr_pixel(x0, y1), self.ldr_pixel(x1, y1));
        [0, 1, 2].map(|c| {
            let top = p00[c] * (1.0 - fx) + p10[c] * fx;
            let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }
}

/// Directional albedo of the specular lobe `∫ lobe(ωi, ωo) cosθi dωi` as a
/// function of `cosθo`, integrated with the equal-solid-angle
/// `AMBIENT_GRID × AMBIENT_GRID` rule and tabulated on nodes uniform in
/// `sqrt(cosθo)`. The diffuse part integrates to `rho_d` exactly.
#[derive(Debug, Clone)]
pub struct AmbientResponse {
    rho_d: Rgb,
    rho_s: f64,
    table: Vec<f64>,
}

impl AmbientResponse {
    pub fn new(material: &WardBrdf) -> Self {
        let table = (0..=TABLE_NODES)
            .map(|k| {
                let s = k as f64 / TABLE_NODES as f64;
                specular_albedo(material.alpha, s * s, AMBIENT_GRID)
            })
            .collect();
        AmbientResponse { rho_d: material.rho_d, rho_s: material.rho_s, table }
    }

    /// `∫ f(ωi, ωo) cosθi dωi` per channel.
    pub fn albedo(&self, cos_o: f64) -> Rgb {
        let s = cos_o.clamp(0.0, 1.0).sqrt() * TABLE_NODES as f64;
        let k = (s.floor() as usize).min(TABLE_NODES - 1);
        let t = s - k as f64;
        let spec = self.table[k] * (1.0 - t) + self.table[k + 1] * t;
        self.rho_d.map(|d| d + self.rho_s * spec)
    }
}

/// Quadrature of the specular lobe's directional albedo at `cos_o`.
pub fn specular_albedo(alpha: f64, cos_o: f64, grid: usize) -> f64 {
    let wo = Vec3::new((1.0 - cos_o * cos_o).max(0.0).sqrt(), 0.0, cos_o);
    let cell = 2.0 * PI / (grid * grid) as f64;
    let mut acc = 0.0;
    for ti in 0..grid {
        let mu = (ti as f64 + 0.5) / grid as f64;
        let s = (1.0 - mu * mu).sqrt();
        for pi in 0..grid {
            let phi = (pi as f64 + 0.5) / grid as f64 * 2.0 * PI;
            let wi = Vec3::new(s * phi.cos(), s * phi.sin(), mu);
            acc += crate::brdf::specular_lobe(wi, wo, alpha) * mu;
        }
    }
    acc * cell
}

/// Outgoing radiance at a surface point with outward normal `n`, viewed from
/// direction `wo` (unit, towards the viewer).
pub fn shade(scene: &Scene, ambient: &AmbientResponse, point: Vec3, n: Vec3, wo: Vec3) -> Rgb {
    let cos_o = n.dot(wo);
    let mut out = ambient.albedo(cos_o);
    for c in 0..3 {
        out[c] *= scene.environment.ambient[c];
    }
    let m = &scene.material;
    for light in &scene.environment.lights {
        let wi = light.direction;
        let cos_i = n.dot(wi);
        if cos_i <= 0.0 || cos_o <= 0.0 {
            continue;
        }
        if !scene.shape.is_convex() && scene.shape.intersect(point + n * 1e-6, wi, 1e-6).is_some() {
            continue;
        }
        let h = wi + wo;
        let hn = h.dot(n);
        let tan2 = (h.norm_squared() - hn * hn).max(0.0) / (hn * hn);
        let spec = m.rho_s * lobe_from_tan2(tan2, cos_i, cos_o, m.alpha);
        for c in 0..3 {
            out[c] += (m.rho_d[c] / PI + spec) * light.radiance[c] * cos_i;
        }
    }
    out
}

/// Render one view of `scene`.
pub fn render_view(scene: &Scene, camera: &Camera) -> Result<Frame> {
    scene.validate()?;
    camera.intrinsics.validate()?;
    if scene.shape.contains(camera.pose.position) {
        return Err(Error::Geometry("camera is inside the shape".into()));
    }
    let ambient = AmbientResponse::new(&scene.material);
    render_with(scene, camera, &ambient)
}

/// Render with a precomputed ambient response (shared across the views of a scene).
pub fn render_with(scene: &Scene, camera: &Camera, ambient: &AmbientResponse) -> Result<Frame> {
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    let mut hdr = vec![0.0; w * h * 3];
    let mut depth = vec![0.0; w * h];
    let origin = camera.pose.position;
    let forward = camera.pose.forward();
    for y in 0..h {
        for x in 0..w {
            let dir = camera.ray(x as f64 + 0.5, y as f64 + 0.5);
            let i = y * w + x;
            let radiance = match scene.shape.intersect(origin, dir, 0.0) {
                Some(hit) => {
                    depth[i] = (hit.point - origin).dot(forward);
                    shade(scene, ambient, hit.point, hit.normal, -dir)
                }
                None => scene.environment.ambient,
            };
            hdr[i * 3..i * 3 + 3].copy_from_slice(&radiance);
        }
    }
    let ldr: Vec<u8> = hdr.iter().map(|&v| to_ldr_byte(v)).collect();
    let (mut fg, mut bg) = ([0.0; 3], [0.0; 3]);
    let (mut nf, mut nb) = (0usize, 0usize);
    for i in 0..w * h {
        let (acc, n) = if depth[i] > 0.0 { (&mut fg, &mut nf) } else { (&mut bg, &mut nb) };
        for c in 0..3 {
            acc[c] += byte_to_unit(ldr[i * 3 + c]);
        }
        *n += 1;
    }
    if nf == 0 {
        return Err(Error::DegenerateFrame("object not visible in view".into()));
    }
    if nb == 0 {
        return Err(Error::DegenerateFrame("object covers the whole view".into()));
    }
    Ok(Frame {
        camera: *camera,
        hdr,
        ldr,
        depth,
        f_bar: fg.map(|v| v / nf as f64),
        b_bar: bg.map(|v| v / nb as f64),
    })
}

/// Binary PPM (P6) of the LDR image.
pub fn write_ppm(path: &std::path::Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{width} {height}\n255\n")?;
    f.write_all(rgb)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::camera::{Intrinsics, Pose};
    use crate::synth::geometry::Shape;
    use crate::synth::scene::{DirectionalLight, Environment};

    fn camera(pos: Vec3, res: usize) -> Camera {
        Camera { pose: Pose::look_at(pos, Vec3::ZERO).unwrap(), intrinsics: Intrinsics::from_fov(res, res, 45.0) }
    }

    #[test]
    fn diffuse_sphere_under_uniform_light() {
        let ambient = [0.6, 0.5, 0.4];
        let scene = Scene {
            shape: Shape::Sphere { radius: 0.8 },
            material: WardBrdf::new([0.6, 0.3, 0.1], 0.0, 0.3).unwrap(),
            environment: Environment::uniform(ambient),
        };
        let f = render_view(&scene, &camera(Vec3::new(0.0, -3.0, 0.5), 32)).unwrap();
        let mut fg = 0;
        for y in 0..32 {
            for x in 0..32 {
                let p = f.hdr_pixel(x, y);
                if f.is_foreground(x, y) {
                    fg += 1;
                    for c in 0..3 {
                        assert!((p[c] - scene.material.rho_d[c] * ambient[c]).abs() < 1e-12);
                    }
                } else {
                    assert_eq!(p, ambient);
                }
            }
        }
        assert!(fg > 100);
    }

    #[test]
    fn camera_inside_is_rejected() {
        let scene = Scene {
            shape: Shape::Sphere { radius: 0.8 },
            material: WardBrdf::new([0.5; 3], 0.0, 0.3).unwrap(),
            environment: Environment::uniform([0.5; 3]),
        };
        let cam = Camera {
            pose: Pose::look_at(Vec3::new(0.0, 0.1, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap(),
            intrinsics: Intrinsics::from_fov(8, 8, 45.0),
        };
        assert!(matches!(render_view(&scene, &cam), Err(Error::Geometry(_))));
    }

    #[test]
    fn object_out_of_view_is_degenerate() {
        let scene = Scene {
            shape: Shape::Sphere { radius: 0.5 },
            material: WardBrdf::new([0.5; 3], 0.0, 0.3).unwrap(),
            environment: Environment::uniform([0.5; 3]),
        };
        let cam = Camera {
            pose: Pose::look_at(Vec3::new(0.0, -3.0, 0.0), Vec3::new(0.0, -6.0, 0.0)).unwrap(),
            intrinsics: Intrinsics::from_fov(8, 8, 45.0),
        };
        assert!(matches!(render_view(&scene, &cam), Err(Error::DegenerateFrame(_))));
    }

    #[test]
    fn ldr_and_statistics_follow_hdr() {
        let scene = Scene {
            shape: Shape::Box { half_extents: [0.4, 0.5, 0.3] },
            material: WardBrdf::new([0.3, 0.6, 0.2], 0.2, 0.2).unwrap(),
            environment: Environment {
                ambient: [0.3, 0.3, 0.35],
                lights: vec![DirectionalLight { direction: Vec3::new(0.3, -0.8, 0.5).normalized(), radiance: [1.0; 3] }],
            },
        };
        let f = render_view(&scene, &camera(Vec3::new(1.0, -2.5, 1.2), 24)).unwrap();
        for (b, v) in f.ldr.iter().zip(&f.hdr) {
            assert_eq!(*b, to_ldr_byte(*v));
        }
        let want_bg = scene.environment.ambient.map(|a| byte_to_unit(to_ldr_byte(a)));
        for c in 0..3 {
            assert!((f.b_bar[c] - want_bg[c]).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&f.f_bar[c]));
        }
        let again = render_view(&scene, &f.camera).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn ambient_table_interpolates_the_quadrature() {
        let m = WardBrdf::new([0.2; 3], 0.5, 0.15).unwrap();
        let table = AmbientResponse::new(&m);
        for cos_o in [0.05, 0.3, 0.55, 0.9, 0.999] {
            let want = 0.2 + 0.5 * specular_albedo(m.alpha, cos_o, AMBIENT_GRID);
            let got = table.albedo(cos_o)[0];
            assert!((got - want).abs() < 2e-3 * want, "{cos_o}: {got} vs {want}");
        }
    }
}
