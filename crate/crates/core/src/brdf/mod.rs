//! Isotropic Ward reflectance: evaluation, the perceptual (L, a, b, c, d)
//! coordinates, CIE Lab conversion and the BRDF distance metrics.

mod color;
mod distance;
mod perceptual;
mod ward;

pub use color::{lab_to_rgb, luminance, rgb_to_lab, rgb_to_lab_jacobian, LUMINANCE_WEIGHTS};
pub use distance::{brdf_distance, CubeRootQuadrature, Metric, CUBE_ROOT_EPS, LAMBDA_G};
pub use perceptual::{
    from_perceptual, from_perceptual_jacobian, to_perceptual,
    FromPerceptual, PerceptualBrdf,
};
pub use ward::{
    eval_ward, lobe_from_tan2, specular_lobe, specular_lobe_grad, Direction, WardBrdf, GRAZING_CLAMP,
    GRAZING_REJECT,
};

/// Linear RGB triple.
pub type Rgb = [f64; 3];

/// The five regressed quantities, in the order the networks emit them.
pub type ParamVec = [f64; 5];
