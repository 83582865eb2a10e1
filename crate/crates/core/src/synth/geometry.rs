//! Procedural convex shapes: ray intersection, inside test and area-uniform
//! surface sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Shapes are centred at the origin, axis aligned, and fit in the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Sphere { radius: f64 },
    /// `(|x/a|^(2/e2) + |y/b|^(2/e2))^(e2/e1) + |z/c|^(2/e1) = 1`
    Superellipsoid { radii: [f64; 3], e1: f64, e2: f64 },
    Box { half_extents: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Superellipsoid { radii, e1, e2 } => {
                radii.iter().all(|&r| r > 0.0) && (0.1..=2.0).contains(&e1) && (0.1..=2.0).contains(&e2)
            }
            Shape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
        };
        if !ok {
            return Err(Error::Geometry(format!("invalid shape parameters {self:?}")));
        }
        if self.bounding_radius() > 1.0 + 1e-9 {
            return Err(Error::Geometry(format!("shape {self:?} does not fit in the unit ball")));
        }
        Ok(())
    }

    /// All supported parameter ranges give convex bodies.
    pub fn is_convex(&self) -> bool {
        match *self {
            Shape::Superellipsoid { e1, e2, .. } => e1 <= 2.0 && e2 <= 2.0,
            _ => true,
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Superellipsoid { radii, .. } | Shape::Box { half_extents: radii } => {
                Vec3::from_array(radii).norm()
            }
        }
    }

    /// Homogeneous degree-one gauge: `< 1` inside, `1` on the surface.
    pub fn gauge(&self, p: Vec3) -> f64 {
        match *self {
            Shape::Sphere { radius } => p.norm() / radius,
            Shape::Box { half_extents: h } => {
                (p.x.abs() / h[0]).max(p.y.abs() / h[1]).max(p.z.abs() / h[2])
            }
            Shape::Superellipsoid { radii, e1, e2 } => {
                superquadric(p, radii, e1, e2).0.powf(e1 / 2.0)
            }
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.gauge(p) < 1.0
    }

    /// Outward unit normal at a surface point.
    pub fn normal_at(&self, p: Vec3) -> Vec3 {
        match *self {
            Shape::Sphere { .. } => p.normalized(),
            Shape::Box { half_extents: h } => {
                let s = [p.x.abs() / h[0], p.y.abs() / h[1], p.z.abs() / h[2]];
                let axis = if s[0] >= s[1] && s[0] >= s[2] {
                    0
                } else if s[1] >= s[2] {
                    1
                } else {
                    2
                };
                let mut n = [0.0; 3];
                n[axis] = p[axis].signum();
                Vec3::from_array(n)
            }
            Shape::Superellipsoid { radii, e1, e2 } => superquadric(p, radii, e1, e2).1.normalized(),
        }
    }

    /// First intersection with `t > t_min` along `origin + t·dir`, `dir` unit.
    pub fn intersect(&self, origin: Vec3, dir: Vec3, t_min: f64) -> Option<Hit> {
        let t = match *self {
            Shape::Sphere { radius } => sphere_t(origin, dir, radius, t_min)?,
            Shape::Box { half_extents } => box_t(origin, dir, half_extents, t_min)?,
            Shape::Superellipsoid { .. } => self.gauge_t(origin, dir, t_min)?,
        };
        let point = origin + dir * t;
        Some(Hit { t, point, normal: self.normal_at(point) })
    }

    /// Newton iteration on the convex gauge along the ray, started at the
    /// bounding-sphere entry. From outside the body the iterates increase
    /// monotonically to the first root.
    fn gauge_t(&self, origin: Vec3, dir: Vec3, t_min: f64) -> Option<f64> {
        let rb = self.bounding_radius() * 1.0001;
        let (t0, t1) = sphere_span(origin, dir, rb)?;
        if t1 <= t_min {
            return None;
        }
        let mut t = t0.max(t_min);
        if self.gauge(origin + dir * t) < 1.0 {
            // Starting inside (only happens for origins inside the body).
            return None;
        }
        let Shape::Superellipsoid { radii, e1, e2 } = *self else {
            unreachable!("gauge marching is only used for superellipsoids")
        };
        for _ in 0..80 {
            let (f, grad) = superquadric(origin + dir * t, radii, e1, e2);
            let g = f.powf(e1 / 2.0) - 1.0;
            if g.abs() < 1e-12 {
                return Some(t);
            }
            let slope = e1 / 2.0 * f.powf(e1 / 2.0 - 1.0) * grad.dot(dir);
            if slope >= -1e-12 {
                return None;
            }
            t -= g / slope;
            if t > t1 {
                return None;
            }
        }
        // Tangent rays converge slowly; accept a close approach.
        let g = self.gauge(origin + dir * t) - 1.0;
        (g.abs() < 1e-6).then_some(t)
    }

    /// Area-uniform sample of the surface: point and outward normal.
    /// Area-uniform surface point and its outward normal. Draw many points
    /// through [`Shape::surface_sampler`] to avoid rebuilding the sampler.
    pub fn sample_surface<R: Rng>(&self, rng: &mut R) -> (Vec3, Vec3) {
        self.surface_sampler().sample(rng)
    }

    pub fn surface_sampler(&self) -> SurfaceSampler {
        let bound = match self {
            Shape::Superellipsoid { .. } => self.radial_area_bound(),
            _ => 0.0,
        };
        SurfaceSampler { shape: *self, bound }
    }

    fn radial_area_bound(&self) -> f64 {
        let mut best: f64 = 0.0;
        let n = 96;
        for i in 0..n {
            let mu = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            for j in 0..2 * n {
                let phi = (j as f64 + 0.5) / (2 * n) as f64 * std::f64::consts::TAU;
                let s = (1.0 - mu * mu).sqrt();
                let u = Vec3::new(s * phi.cos(), s * phi.sin(), mu);
                let r = 1.0 / self.gauge(u);
                let n = self.normal_at(u * r);
                best = best.max(r * r / n.dot(u));
            }
        }
        best * 1.5
    }
}

/// Area-uniform sampler over a shape's surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSampler {
    shape: Shape,
    bound: f64,
}

impl SurfaceSampler {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec3, Vec3) {
        match self.shape {
            Shape::Sphere { radius } => {
                let u = uniform_sphere(rng);
                (u * radius, u)
            }
            Shape::Box { half_extents: h } => {
                let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut axis = 2;
                for (k, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = k;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let mut p = [0.0; 3];
                for (k, v) in p.iter_mut().enumerate() {
                    *v = if k == axis { sign * h[k] } else { rng.gen_range(-h[k]..h[k]) };
                }
                let mut n = [0.0; 3];
                n[axis] = sign;
                (Vec3::from_array(p), Vec3::from_array(n))
            }
            Shape::Superellipsoid { .. } => {
                // Radial projection of a uniform direction has area density
                // proportional to r² / (n·u); rejection against its bound.
                loop {
                    let u = uniform_sphere(rng);
                    let r = 1.0 / self.shape.gauge(u);
                    let p = u * r;
                    let n = self.shape.normal_at(p);
                    let density = r * r / n.dot(u);
                    if rng.gen::<f64>() * self.bound <= density {
                        return (p, n);
                    }
                }
            }
        }
    }
}

/// Superquadric inside-outside function and its gradient.
fn superquadric(p: Vec3, radii: [f64; 3], e1: f64, e2: f64) -> (f64, Vec3) {
    let (x, y, z) = (p.x / radii[0], p.y / radii[1], p.z / radii[2]);
    let (pxy, pz) = (2.0 / e2, 2.0 / e1);
    let (ax, ay) = (x.abs().powf(pxy), y.abs().powf(pxy));
    let a = ax + ay;
    let ratio = e2 / e1;
    let az = z.abs().powf(pz);
    let f = a.powf(ratio) + az;
    let outer = if a > 0.0 { ratio * a.powf(ratio - 1.0) } else { 0.0 };
    let dx = if x != 0.0 { outer * pxy * ax / x } else { 0.0 };
    let dy = if y != 0.0 { outer * pxy * ay / y } else { 0.0 };
    let dz = if z != 0.0 { pz * az / z } else { 0.0 };
    (f, Vec3::new(dx / radii[0], dy / radii[1], dz / radii[2]))
}

fn sphere_span(origin: Vec3, dir: Vec3, radius: f64) -> Option<(f64, f64)> {
    let b = origin.dot(dir);
    let c = origin.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

fn sphere_t(origin: Vec3, dir: Vec3, radius: f64, t_min: f64) -> Option<f64> {
    let (t0, t1) = sphere_span(origin, dir, radius)?;
    if t0 > t_min {
        Some(t0)
    } else if t1 > t_min {
        Some(t1)
    } else {
        None
    }
}

fn box_t(origin: Vec3, dir: Vec3, h: [f64; 3], t_min: f64) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        let (o, d) = (origin[k], dir[k]);
        if d.abs() < 1e-300 {
            if o.abs() > h[k] {
                return None;
            }
            continue;
        }
        let (a, b) = ((-h[k] - o) / d, (h[k] - o) / d);
        t_near = t_near.max(a.min(b));
        t_far = t_far.min(a.max(b));
    }
    if t_near > t_far {
        return None;
    }
    if t_near > t_min {
        Some(t_near)
    } else if t_far > t_min {
        Some(t_far)
    } else {
        None
    }
}

pub fn uniform_sphere<R: Rng>(rng: &mut R) -> Vec3 {
    let mu: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - mu * mu).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shapes() -> Vec<Shape> {
        vec![
            Shape::Sphere { radius: 0.8 },
            Shape::Box { half_extents: [0.5, 0.3, 0.6] },
            Shape::Superellipsoid { radii: [0.6, 0.5, 0.55], e1: 0.5, e2: 0.8 },
            Shape::Superellipsoid { radii: [0.6, 0.4, 0.5], e1: 1.0, e2: 1.0 },
        ]
    }

    #[test]
    fn samples_lie_on_surface_with_outward_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in shapes() {
            let sampler = s.surface_sampler();
            for _ in 0..500 {
                let (p, n) = sampler.sample(&mut rng);
                assert!((s.gauge(p) - 1.0).abs() < 1e-9, "{s:?}");
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!(s.contains(p - n * 1e-4) && !s.contains(p + n * 1e-4), "{s:?} {p:?}");
            }
        }
    }

    #[test]
    fn rays_hit_surface_from_outside() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in shapes() {
            let sampler = s.surface_sampler();
            for _ in 0..500 {
                let origin = uniform_sphere(&mut rng) * 3.0;
                let (target, _) = sampler.sample(&mut rng);
                let dir = (target * 0.5 - origin).normalized();
                let hit = s.intersect(origin, dir, 1e-9).expect("ray aimed inside must hit");
                assert!((s.gauge(hit.point) - 1.0).abs() < 1e-6);
                assert!(hit.normal.dot(dir) < 0.0);
                // Nothing nearer: points before the hit are outside.
                assert!(!s.contains(origin + dir * (hit.t * 0.999)));
            }
            // Ray pointing away misses.
            assert!(s.intersect(Vec3::new(0.0, 0.0, 3.0), Vec3::Z, 0.0).is_none());
        }
    }

    #[test]
    fn unit_cube_sampling_is_area_uniform() {
        // Faces of a 1x2x3 box have areas in ratio 6:3:2.
        let s = Shape::Box { half_extents: [0.1, 0.2, 0.3] };
        let sampler = s.surface_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut counts = [0usize; 3];
        let n = 60_000;
        for _ in 0..n {
            let (_, nrm) = sampler.sample(&mut rng);
            let axis = (0..3).find(|&k| nrm[k] != 0.0).unwrap();
            counts[axis] += 1;
        }
        let want = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for k in 0..3 {
            assert!((counts[k] as f64 / n as f64 - want[k]).abs() < 0.01);
        }
    }

    #[test]
    fn superellipsoid_sampling_matches_area_by_latitude() {
        // e1 = e2 = 1 is an ellipsoid; for a sphere-like one check the
        // fraction of samples with z > 0 is one half and sphere radius
        // e1 = e2 = 1 with equal radii reduces to a sphere.
        let s = Shape::Superellipsoid { radii: [0.5, 0.5, 0.5], e1: 1.0, e2: 1.0 };
        let sampler = s.surface_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let mut upper = 0;
        let mut cap = 0;
        for _ in 0..n {
            let (p, _) = sampler.sample(&mut rng);
            upper += (p.z > 0.0) as usize;
            cap += (p.z > 0.25) as usize;
        }
        assert!((upper as f64 / n as f64 - 0.5).abs() < 0.01);
        // Archimedes: cap above z = r/2 has a quarter of the area.
        assert!((cap as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn oversized_shape_rejected() {
        assert!(Shape::Sphere { radius: 1.2 }.validate().is_err());
        assert!(Shape::Box { half_extents: [0.7, 0.7, 0.7] }.validate().is_err());
        assert!(Shape::Sphere { radius: 0.9 }.validate().is_ok());
    }
}
