//! Linear sRGB ⇄ CIE L*a*b* under the D65 white point.

use std::sync::OnceLock;

use super::Rgb;
use crate::math::{Mat3, Vec3};

/// Rec. 709 luminance weights for linear RGB.
pub const LUMINANCE_WEIGHTS: Rgb = [0.2126, 0.7152, 0.0722];

const RGB_TO_XYZ: Mat3 = Mat3([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
]);

const DELTA: f64 = 6.0 / 29.0;

fn xyz_to_rgb() -> &'static Mat3 {
    static INV: OnceLock<Mat3> = OnceLock::new();
    INV.get_or_init(|| RGB_TO_XYZ.inverse().expect("sRGB matrix is invertible"))
}

/// White point taken as the image of RGB (1,1,1), so white maps to L = 100 exactly.
fn white() -> Vec3 {
    RGB_TO_XYZ.mul_vec(Vec3::new(1.0, 1.0, 1.0))
}

pub fn luminance(rgb: &Rgb) -> f64 {
    rgb.iter().zip(LUMINANCE_WEIGHTS).map(|(c, w)| c * w).sum()
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_prime(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        1.0 / (3.0 * t.cbrt().powi(2))
    } else {
        1.0 / (3.0 * DELTA * DELTA)
    }
}

fn lab_f_inv(f: f64) -> f64 {
    if f > DELTA {
        f * f * f
    } else {
        3.0 * DELTA * DELTA * (f - 4.0 / 29.0)
    }
}

pub fn rgb_to_lab(rgb: &Rgb) -> [f64; 3] {
    let xyz = RGB_TO_XYZ.mul_vec(Vec3::from_array(*rgb));
    let w = white();
    let (fx, fy, fz) = (lab_f(xyz.x / w.x), lab_f(xyz.y / w.y), lab_f(xyz.z / w.z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Jacobian `d(L,a,b)/d(r,g,b)`, row-major.
pub fn rgb_to_lab_jacobian(rgb: &Rgb) -> [[f64; 3]; 3] {
    let xyz = RGB_TO_XYZ.mul_vec(Vec3::from_array(*rgb));
    let w = white();
    let d = [
        lab_f_prime(xyz.x / w.x) / w.x,
        lab_f_prime(xyz.y / w.y) / w.y,
        lab_f_prime(xyz.z / w.z) / w.z,
    ];
    // df_k/drgb_j = d_k * M[k][j]
    let m = RGB_TO_XYZ.0;
    let df = |k: usize, j: usize| d[k] * m[k][j];
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        jac[0][j] = 116.0 * df(1, j);
        jac[1][j] = 500.0 * (df(0, j) - df(1, j));
        jac[2][j] = 200.0 * (df(1, j) - df(2, j));
    }
    jac
}

/// Inverse of [`rgb_to_lab`]. Out-of-gamut Lab values produce RGB outside
/// `[0,1]` rather than being clipped.
pub fn lab_to_rgb(lab: &[f64; 3]) -> Rgb {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let w = white();
    let xyz = Vec3::new(w.x * lab_f_inv(fx), w.y * lab_f_inv(fy), w.z * lab_f_inv(fz));
    xyz_to_rgb().mul_vec(xyz).to_array()
}

/// Jacobian `d(r,g,b)/d(L,a,b)`, row-major.
pub(crate) fn lab_to_rgb_jacobian(lab: &[f64; 3]) -> [[f64; 3]; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let w = white();
    let inv_prime = |f: f64| if f > DELTA { 3.0 * f * f } else { 3.0 * DELTA * DELTA };
    let (gx, gy, gz) = (w.x * inv_prime(fx), w.y * inv_prime(fy), w.z * inv_prime(fz));
    // d(fx,fy,fz)/d(L,a,b)
    let dfdlab = [
        [1.0 / 116.0, 1.0 / 500.0, 0.0],
        [1.0 / 116.0, 0.0, 0.0],
        [1.0 / 116.0, 0.0, -1.0 / 200.0],
    ];
    let dxyz = [gx, gy, gz];
    let minv = xyz_to_rgb().0;
    let mut jac = [[0.0; 3]; 3];
    for (r, row) in jac.iter_mut().enumerate() {
        for (l, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| minv[r][k] * dxyz[k] * dfdlab[k][l]).sum();
        }
    }
    jac
}
