use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brdf::WardBrdf;
use crate::error::{Error, Result};
use crate::grouplet::{NodeBatch, OBS_FEATURES};
use crate::math::Vec3;
use crate::nn::{read_checkpoint, Module};
use crate::synth::render::write_ppm;
use crate::synth::{render_view, Camera, DirectionalLight, Environment, Intrinsics, Pose, Scene, Shape};
use crate::training::model::{Architecture, BatchInput, ModelKind, TrainedModel};

/// Reference size and per-scene inference time for each model.
pub struct ReferenceFigure {
    pub model: ModelKind,
    pub bytes: usize,
    pub millis: f64,
}

pub const REFERENCE_SIZES: [ReferenceFigure; 3] = [
    ReferenceFigure { model: ModelKind::HemiCnn, bytes: 56_000, millis: 16.0 },
    ReferenceFigure { model: ModelKind::GroupletFast, bytes: 339_000, millis: 5.0 },
    ReferenceFigure { model: ModelKind::GroupletSlow, bytes: 339_000, millis: 90.0 },
];

pub const TIMING_WARMUP: usize = 10;
pub const TIMING_RUNS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub architecture: Architecture,
    /// Counted from the loaded tensors.
    pub param_count: usize,
    /// From the layer widths alone.
    pub expected_param_count: usize,
    pub counts_match: bool,
    pub checkpoint_bytes: usize,
    pub header_bytes: usize,
    pub weight_bytes: usize,
    pub inference_size: usize,
    pub timing_runs: usize,
    pub mean_forward_ms: f64,
    pub reference_bytes: usize,
    pub reference_ms: f64,
    pub size_note: String,
}

fn reference_figure(model: ModelKind) -> &'static ReferenceFigure {
    REFERENCE_SIZES.iter().find(|p| p.model == model).expect("every model has a reference figure")
}

/// Random input with the shape of one prediction at the preset size.
fn timing_input(arch: &Architecture, rng: &mut ChaCha8Rng) -> BatchInput<f32> {
    match arch {
        Architecture::HemiCnn(c) => {
            let n = c.voxels;
            let data = (0..n * c.resolution * c.resolution * 3).map(|_| rng.gen::<f32>()).collect();
            BatchInput::Images { data, groups: vec![n] }
        }
        Architecture::Grouplet(c) => {
            let n = c.nodes;
            let mut b = NodeBatch::new(c.observations);
            b.observations = (0..n * c.observations * OBS_FEATURES).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            b.normals = (0..n)
                .flat_map(|_| {
                    let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0).normalized();
                    v.to_array().map(|x| x as f32)
                })
                .collect();
            b.groups = vec![n];
            BatchInput::Nodes(b)
        }
    }
}

/// Parameter count, on-disk size and single-scene forward time (32-bit) of
/// the checkpoint at `path`.
pub fn model_report(path: &Path) -> Result<ModelReport> {
    let raw = read_checkpoint(path)?;
    let checkpoint_bytes = std::fs::metadata(path)?.len() as usize;
    let model = TrainedModel::<f32>::load(path)?;
    let arch = model.network.architecture();
    let param_count = model.network.num_params();
    let expected_param_count = arch.param_count();
    if raw.num_params() != param_count {
        return Err(Error::Checkpoint("stored tensor sizes disagree with the architecture".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let input = timing_input(&arch, &mut rng);
    for _ in 0..TIMING_WARMUP {
        model.network.forward(&input)?;
    }
    let start = Instant::now();
    for _ in 0..TIMING_RUNS {
        std::hint::black_box(model.network.forward(&input)?);
    }
    let mean_forward_ms = start.elapsed().as_secs_f64() * 1e3 / TIMING_RUNS as f64;
    let reference = reference_figure(model.meta.model);
    let weight_bytes = 4 * param_count;
    let size_note = format!(
        "reference size {} bytes vs {} bytes of 32-bit weights here ({} parameters); the reference figure does not follow from the stated layer widths and is left unreconciled",
        reference.bytes, weight_bytes, param_count
    );
    Ok(ModelReport {
        model: model.meta.model,
        architecture: arch,
        param_count,
        expected_param_count,
        counts_match: param_count == expected_param_count,
        checkpoint_bytes,
        header_bytes: raw.header_bytes,
        weight_bytes,
        inference_size: arch.inference_size(),
        timing_runs: TIMING_RUNS,
        mean_forward_ms,
        reference_bytes: reference.bytes,
        reference_ms: reference.millis,
        size_note,
    })
}

/// Novel viewing and lighting condition for a rendered comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderRequest {
    pub environment: Environment,
    pub camera_position: [f64; 3],
    pub resolution: usize,
    pub vertical_fov_deg: f64,
}

impl Default for RenderRequest {
    fn default() -> Self {
        RenderRequest {
            environment: Environment {
                ambient: [0.15, 0.15, 0.17],
                lights: vec![DirectionalLight {
                    direction: Vec3::new(-0.4, 0.7, 0.6).normalized(),
                    radiance: [1.1, 1.05, 1.0],
                }],
            },
            camera_position: [0.6, 0.9, 2.8],
            resolution: 128,
            vertical_fov_deg: 45.0,
        }
    }
}

impl RenderRequest {
    fn camera(&self) -> Result<Camera> {
        if self.resolution < 2 {
            return Err(Error::Config("render resolution must be at least 2".into()));
        }
        let intrinsics = Intrinsics::from_fov(self.resolution, self.resolution, self.vertical_fov_deg);
        intrinsics.validate()?;
        Ok(Camera { pose: Pose::look_at(Vec3::from_array(self.camera_position), Vec3::ZERO)?, intrinsics })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderComparison {
    pub image: PathBuf,
    pub width: usize,
    pub height: usize,
    pub truth: WardBrdf,
    pub prediction: WardBrdf,
    /// Mean absolute LDR difference over foreground pixels, per object.
    pub shape_ldr_error: f64,
    pub sphere_ldr_error: f64,
}

fn ldr_error(a: &crate::synth::Frame, b: &crate::synth::Frame) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..a.depth.len() {
        if a.depth[i] > 0.0 {
            for c in 0..3 {
                sum += (a.ldr[i * 3 + c] as f64 - b.ldr[i * 3 + c] as f64).abs() / 255.0;
            }
            n += 3;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub const REFERENCE_SPHERE: Shape = Shape::Sphere { radius: 0.8 };

/// Renders `shape` and a reference sphere with the true and predicted
/// materials and writes a 2×2 PPM: truth on the left, prediction on the right,
/// the shape on top and the sphere below.
pub fn render_comparison(
    truth: &WardBrdf,
    prediction: &WardBrdf,
    shape: &Shape,
    req: &RenderRequest,
    out: &Path,
) -> Result<RenderComparison> {
    req.environment.validate()?;
    let camera = req.camera()?;
    let prediction = prediction.clamped();
    let render = |shape: &Shape, material: &WardBrdf| {
        render_view(&Scene { shape: *shape, material: *material, environment: req.environment.clone() }, &camera)
    };
    let rows = [
        (render(shape, truth)?, render(shape, &prediction)?),
        (render(&REFERENCE_SPHERE, truth)?, render(&REFERENCE_SPHERE, &prediction)?),
    ];
    let r = req.resolution;
    let (width, height) = (2 * r, 2 * r);
    let mut rgb = vec![0u8; width * height * 3];
    for (row, (left, right)) in rows.iter().enumerate() {
        for y in 0..r {
            for (col, frame) in [left, right].into_iter().enumerate() {
                let dst = ((row * r + y) * width + col * r) * 3;
                rgb[dst..dst + r * 3].copy_from_slice(&frame.ldr[y * r * 3..(y + 1) * r * 3]);
            }
        }
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_ppm(out, width, height, &rgb)?;
    Ok(RenderComparison {
        image: out.to_path_buf(),
        width,
        height,
        truth: *truth,
        prediction,
        shape_ldr_error: ldr_error(&rows[0].0, &rows[0].1),
        sphere_ldr_error: ldr_error(&rows[1].0, &rows[1].1),
    })
}
