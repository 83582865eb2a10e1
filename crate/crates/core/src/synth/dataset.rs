//! Seeded on-disk dataset of rendered scenes and their voxel observations.
//!
//! Layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/scenes/<id>/meta.json
//! <root>/scenes/<id>/frames.f32   per frame: camera position (3), camera-to-world
//!                                 rotation row-major (9), f_bar (3), b_bar (3)
//! <root>/scenes/<id>/voxels.f32   per voxel: position (3), normal (3), count (1),
//!                                 then count × [colour (3), view dir (3), frame id (1)]
//! ```
//!
//! Float arrays are little-endian IEEE-754 binary32.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{Camera, Intrinsics, Pose};
use super::geometry::{uniform_sphere, Shape};
use super::render::{render_with, write_ppm, AmbientResponse, Frame};
use super::scene::{DirectionalLight, Environment, Scene};
use super::voxels::{extract_voxel_samples, Observation, VoxelSample};
use crate::brdf::{luminance, Rgb, WardBrdf};
use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

pub const FORMAT_VERSION: u32 = 1;
pub const FRAME_FLOATS: usize = 18;
pub const VOXEL_HEADER_FLOATS: usize = 7;
pub const OBSERVATION_FLOATS: usize = 7;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// Ranges the scene sampler draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingRanges {
    pub alpha: [f64; 2],
    /// Ambient radiance (grey level before tinting).
    pub ambient: [f64; 2],
    /// Per-channel multiplicative tint, `1 ± ambient_tint`.
    pub ambient_tint: f64,
    pub lights: [usize; 2],
    pub light_radiance: [f64; 2],
    pub orbit_radius: [f64; 2],
    /// Range of `sin(elevation)` for camera placement.
    pub elevation_sin: [f64; 2],
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            alpha: [0.03, 1.0],
            ambient: [0.2, 0.45],
            ambient_tint: 0.1,
            lights: [1, 4],
            light_radiance: [0.3, 1.5],
            orbit_radius: [2.6, 3.2],
            elevation_sin: [-0.8, 0.8],
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let ok = ordered(self.alpha)
            && self.alpha[0] > 0.0
            && self.alpha[1] <= 1.0
            && ordered(self.ambient)
            && self.ambient[0] >= 0.0
            && (0.0..1.0).contains(&self.ambient_tint)
            && self.lights[0] <= self.lights[1]
            && self.lights[1] <= 4
            && ordered(self.light_radiance)
            && self.light_radiance[0] >= 0.0
            && ordered(self.orbit_radius)
            && self.orbit_radius[0] > 1.2
            && ordered(self.elevation_sin)
            && self.elevation_sin[0] >= -1.0
            && self.elevation_sin[1] <= 1.0;
        if !ok {
            return Err(Error::Config(format!("invalid sampling ranges {self:?}")));
        }
        if self.ambient[1] <= 0.0 && self.lights[0] == 0 {
            return Err(Error::Config("sampling ranges allow unlit scenes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub scenes: usize,
    pub views: usize,
    pub voxels: usize,
    pub width: usize,
    pub height: usize,
    pub vertical_fov_deg: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub ranges: SamplingRanges,
    /// Also write every rendered frame as a PPM image.
    pub dump_frames: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            scenes: 300,
            views: 40,
            voxels: 400,
            width: 64,
            height: 64,
            vertical_fov_deg: 45.0,
            train_fraction: 0.92,
            seed: 0,
            ranges: SamplingRanges::default(),
            dump_frames: false,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.views == 0 || self.voxels == 0 || self.width < 2 || self.height < 2 {
            return Err(Error::Config("scenes, views, voxels and resolution must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::Config(format!("train fraction {} outside [0,1]", self.train_fraction)));
        }
        if !(1.0..170.0).contains(&self.vertical_fov_deg) {
            return Err(Error::Config("field of view out of range".into()));
        }
        self.ranges.validate()
    }

    /// Training scene count: `floor(scenes · train_fraction)`; the remainder validates.
    pub fn train_count(&self) -> usize {
        ((self.scenes as f64 * self.train_fraction) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub index: usize,
    pub split: Split,
    pub material: WardBrdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub config: DatasetConfig,
    pub n_train: usize,
    pub n_validation: usize,
    /// Set for datasets derived by re-rendering with scaled illumination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illumination_scale_range: Option<[f64; 2]>,
    pub scenes: Vec<SceneEntry>,
}

/// Everything needed to regenerate one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene: Scene,
    pub cameras: Vec<Camera>,
    pub voxel_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub id: String,
    pub spec: SceneSpec,
    pub illumination_scale: f64,
    pub views: usize,
    pub voxel_count: usize,
    pub dropped_voxels: usize,
    pub observation_count: usize,
    pub frames_f32_len: usize,
    pub voxels_f32_len: usize,
    pub frame_layout: String,
    pub voxel_layout: String,
}

/// Per-view statistics kept on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub pose: Pose,
    pub f_bar: Rgb,
    pub b_bar: Rgb,
}

/// A scene loaded back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub meta: SceneMeta,
    pub frames: Vec<FrameStats>,
    pub voxels: Vec<VoxelSample>,
}

impl SceneRecord {
    pub fn material(&self) -> &WardBrdf {
        &self.meta.spec.scene.material
    }

    /// Copy restricted to observations from the first `views` frames.
    pub fn truncated(&self, views: usize) -> SceneRecord {
        SceneRecord {
            meta: self.meta.clone(),
            frames: self.frames.iter().take(views).copied().collect(),
            voxels: self.voxels.iter().filter_map(|v| v.truncated(views)).collect(),
        }
    }
}

/// Stream seed for item `index` under a global seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE5_E9B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_range<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Material with `luminance(rho_d) + rho_s ≤ 1`.
pub fn sample_material<R: Rng>(rng: &mut R, ranges: &SamplingRanges) -> WardBrdf {
    let rho_d: Rgb = [rng.gen(), rng.gen(), rng.gen()];
    let budget = (1.0 - luminance(&rho_d)).max(0.0);
    let rho_s = rng.gen::<f64>() * budget;
    WardBrdf { rho_d, rho_s, alpha: sample_range(rng, ranges.alpha) }
}

pub fn sample_shape<R: Rng>(rng: &mut R) -> Shape {
    let fit = |mut r: [f64; 3]| {
        let n = Vec3::from_array(r).norm();
        if n > 0.95 {
            r = r.map(|v| v * 0.95 / n);
        }
        r
    };
    match rng.gen_range(0..3) {
        0 => Shape::Sphere { radius: rng.gen_range(0.55..0.95) },
        1 => Shape::Box { half_extents: fit([0; 3].map(|_| rng.gen_range(0.3..0.6))) },
        _ => Shape::Superellipsoid {
            radii: fit([0; 3].map(|_| rng.gen_range(0.4..0.7))),
            e1: rng.gen_range(0.4..1.0),
            e2: rng.gen_range(0.4..1.0),
        },
    }
}

pub fn sample_environment<R: Rng>(rng: &mut R, ranges: &SamplingRanges) -> Environment {
    let level = sample_range(rng, ranges.ambient);
    let t = ranges.ambient_tint;
    let ambient = [0; 3].map(|_| level * rng.gen_range(1.0 - t..=1.0 + t));
    let count = rng.gen_range(ranges.lights[0]..=ranges.lights[1]);
    let lights = (0..count)
        .map(|_| {
            let direction = uniform_sphere(rng);
            let power = sample_range(rng, ranges.light_radiance);
            let radiance = [0; 3].map(|_| power * rng.gen_range(0.9..=1.1));
            DirectionalLight { direction, radiance }
        })
        .collect();
    Environment { ambient, lights }
}

fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let axis = uniform_sphere(rng);
    Mat3::rotation(axis, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Cameras on a randomly oriented orbit: golden-angle azimuth steps so every
/// prefix of the sequence is spread around the object.
pub fn sample_cameras<R: Rng>(rng: &mut R, cfg: &DatasetConfig) -> Result<Vec<Camera>> {
    let intrinsics = Intrinsics::from_fov(cfg.width, cfg.height, cfg.vertical_fov_deg);
    let frame = random_rotation(rng);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..cfg.views)
        .map(|k| {
            let radius = sample_range(rng, cfg.ranges.orbit_radius);
            let s = sample_range(rng, cfg.ranges.elevation_sin);
            let c = (1.0 - s * s).sqrt();
            let az = phase + k as f64 * GOLDEN_ANGLE;
            let local = Vec3::new(c * az.cos(), c * az.sin(), s);
            let pose = Pose::look_at(frame.mul_vec(local) * radius, Vec3::ZERO)?;
            Ok(Camera { pose, intrinsics })
        })
        .collect()
}

pub fn sample_scene_spec(cfg: &DatasetConfig, index: usize) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index as u64));
    let shape = sample_shape(&mut rng);
    let material = sample_material(&mut rng, &cfg.ranges);
    let environment = sample_environment(&mut rng, &cfg.ranges);
    let cameras = sample_cameras(&mut rng, cfg)?;
    Ok(SceneSpec { scene: Scene { shape, material, environment }, cameras, voxel_seed: rng.gen() })
}

/// Render every view of a scene and extract its voxel samples.
pub fn build_scene(spec: &SceneSpec, voxels: usize) -> Result<(Vec<Frame>, Vec<VoxelSample>)> {
    spec.scene.validate()?;
    let ambient = AmbientResponse::new(&spec.scene.material);
    let frames = spec
        .cameras
        .iter()
        .map(|cam| {
            if spec.scene.shape.contains(cam.pose.position) {
                return Err(Error::Geometry("camera is inside the shape".into()));
            }
            render_with(&spec.scene, cam, &ambient)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = extract_voxel_samples(&spec.scene, &frames, voxels, spec.voxel_seed)?;
    Ok((frames, samples))
}

pub fn scene_id(index: usize) -> String {
    format!("{index:05}")
}

fn write_f32(path: &Path, values: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f32(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Dataset(format!("{} is not a whole number of floats", path.display())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn encode_frames(frames: &[Frame]) -> Vec<f32> {
    let mut out = Vec::with_capacity(frames.len() * FRAME_FLOATS);
    for f in frames {
        let pose = &f.camera.pose;
        out.extend(pose.position.to_array().map(|v| v as f32));
        for row in pose.rotation.0 {
            out.extend(row.map(|v| v as f32));
        }
        out.extend(f.f_bar.map(|v| v as f32));
        out.extend(f.b_bar.map(|v| v as f32));
    }
    out
}

fn encode_voxels(voxels: &[VoxelSample]) -> Vec<f32> {
    let mut out = Vec::new();
    for v in voxels {
        out.extend(v.position.to_array().map(|x| x as f32));
        out.extend(v.normal.to_array().map(|x| x as f32));
        out.push(v.observations.len() as f32);
        for o in &v.observations {
            out.extend(o.color.map(|x| x as f32));
            out.extend(o.view_dir.to_array().map(|x| x as f32));
            out.push(o.frame_id as f32);
        }
    }
    out
}

fn decode_frames(data: &[f32]) -> Result<Vec<FrameStats>> {
    if data.len() % FRAME_FLOATS != 0 {
        return Err(Error::Dataset("frames.f32 length is not a multiple of the record size".into()));
    }
    Ok(data
        .chunks_exact(FRAME_FLOATS)
        .map(|r| {
            let r: Vec<f64> = r.iter().map(|&v| v as f64).collect();
            let rotation = Mat3([[r[3], r[4], r[5]], [r[6], r[7], r[8]], [r[9], r[10], r[11]]]);
            FrameStats {
                pose: Pose { rotation, position: Vec3::new(r[0], r[1], r[2]) },
                f_bar: [r[12], r[13], r[14]],
                b_bar: [r[15], r[16], r[17]],
            }
        })
        .collect())
}

fn decode_voxels(data: &[f32], frames: &[FrameStats]) -> Result<Vec<VoxelSample>> {
    let bad = || Error::Dataset("truncated or malformed voxels.f32".into());
    let mut voxels = Vec::new();
    let mut i = 0;
    let v3 = |s: &[f32]| Vec3::new(s[0] as f64, s[1] as f64, s[2] as f64);
    while i < data.len() {
        let head = data.get(i..i + VOXEL_HEADER_FLOATS).ok_or_else(bad)?;
        let count = head[6] as usize;
        i += VOXEL_HEADER_FLOATS;
        let body = data.get(i..i + count * OBSERVATION_FLOATS).ok_or_else(bad)?;
        let observations = body
            .chunks_exact(OBSERVATION_FLOATS)
            .map(|o| {
                let frame_id = o[6] as u32;
                let stats = frames.get(frame_id as usize).ok_or_else(bad)?;
                Ok(Observation {
                    color: [o[0] as f64, o[1] as f64, o[2] as f64],
                    view_dir: v3(&o[3..6]),
                    frame_id,
                    f_bar: stats.f_bar,
                    b_bar: stats.b_bar,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        i += count * OBSERVATION_FLOATS;
        voxels.push(VoxelSample { position: v3(&head[0..3]), normal: v3(&head[3..6]), observations });
    }
    Ok(voxels)
}

/// Render and write one scene directory; returns its metadata.
fn write_scene(root: &Path, id: &str, spec: &SceneSpec, cfg: &DatasetConfig, scale: f64) -> Result<SceneMeta> {
    let (frames, voxels) = build_scene(spec, cfg.voxels)?;
    let dir = root.join("scenes").join(id);
    fs::create_dir_all(&dir)?;
    let frame_data = encode_frames(&frames);
    let voxel_data = encode_voxels(&voxels);
    write_f32(&dir.join("frames.f32"), &frame_data)?;
    write_f32(&dir.join("voxels.f32"), &voxel_data)?;
    if cfg.dump_frames {
        let fdir = dir.join("frames");
        fs::create_dir_all(&fdir)?;
        for (k, f) in frames.iter().enumerate() {
            write_ppm(&fdir.join(format!("{k:03}.ppm")), f.width(), f.height(), &f.ldr)?;
        }
    }
    let meta = SceneMeta {
        id: id.to_string(),
        spec: spec.clone(),
        illumination_scale: scale,
        views: frames.len(),
        voxel_count: voxels.len(),
        dropped_voxels: cfg.voxels - voxels.len(),
        observation_count: voxels.iter().map(|v| v.observations.len()).sum(),
        frames_f32_len: frame_data.len(),
        voxels_f32_len: voxel_data.len(),
        frame_layout: "position[3] rotation_row_major[9] f_bar[3] b_bar[3]".into(),
        voxel_layout: "position[3] normal[3] count[1] then count x (color[3] view_dir[3] frame_id[1])".into(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
    Ok(meta)
}

fn prepare_root(root: &Path) -> Result<()> {
    fs::create_dir_all(root.join("scenes")).map_err(|e| {
        Error::Dataset(format!("cannot create dataset directory {}: {e}", root.display()))
    })
}

/// Generate a dataset under `root`. Output bytes depend only on `cfg`.
pub fn generate_dataset(cfg: &DatasetConfig, root: &Path) -> Result<Manifest> {
    cfg.validate()?;
    prepare_root(root)?;
    let n_train = cfg.train_count();
    let scenes = (0..cfg.scenes)
        .into_par_iter()
        .map(|index| {
            let spec = sample_scene_spec(cfg, index)?;
            let id = scene_id(index);
            write_scene(root, &id, &spec, cfg, 1.0)?;
            let split = if index < n_train { Split::Train } else { Split::Validation };
            Ok(SceneEntry { id, index, split, material: spec.scene.material })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        n_train,
        n_validation: cfg.scenes - n_train,
        illumination_scale_range: None,
        scenes,
    };
    fs::write(root.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Re-render the validation scenes of `src` with every light scaled by a
/// per-scene factor drawn from `scale_range`. Shapes, materials, cameras and
/// voxel positions are unchanged.
pub fn generate_perturbed_split(src: &Dataset, root: &Path, scale_range: [f64; 2], seed: u64) -> Result<Manifest> {
    if !(scale_range[0] > 0.0 && scale_range[0] <= scale_range[1]) {
        return Err(Error::Config(format!("invalid illumination scale range {scale_range:?}")));
    }
    prepare_root(root)?;
    let entries: Vec<&SceneEntry> = src.entries(Split::Validation).collect();
    let cfg = &src.manifest.config;
    let scenes = entries
        .par_iter()
        .map(|entry| {
            let meta = src.load_meta(entry)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, entry.index as u64));
            let scale = sample_range(&mut rng, scale_range);
            let mut spec = meta.spec.clone();
            spec.scene.environment = spec.scene.environment.scaled(scale);
            write_scene(root, &entry.id, &spec, cfg, scale * meta.illumination_scale)?;
            Ok((*entry).clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        seed,
        config: cfg.clone(),
        n_train: 0,
        n_validation: scenes.len(),
        illumination_scale_range: Some(scale_range),
        scenes,
    };
    fs::write(root.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Read-only handle on a generated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Dataset> {
        let path = root.join("manifest.json");
        let bytes = fs::read(&path)
            .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Dataset(format!("unsupported format version {}", manifest.format_version)));
        }
        Ok(Dataset { root: root.to_path_buf(), manifest })
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &SceneEntry> {
        self.manifest.scenes.iter().filter(move |e| e.split == split)
    }

    pub fn load_meta(&self, entry: &SceneEntry) -> Result<SceneMeta> {
        let path = self.root.join("scenes").join(&entry.id).join("meta.json");
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn load_scene(&self, entry: &SceneEntry) -> Result<SceneRecord> {
        let dir = self.root.join("scenes").join(&entry.id);
        let meta = self.load_meta(entry)?;
        let frame_data = read_f32(&dir.join("frames.f32"))?;
        let voxel_data = read_f32(&dir.join("voxels.f32"))?;
        if frame_data.len() != meta.frames_f32_len || voxel_data.len() != meta.voxels_f32_len {
            return Err(Error::Dataset(format!("array lengths for scene {} disagree with meta.json", entry.id)));
        }
        let frames = decode_frames(&frame_data)?;
        let voxels = decode_voxels(&voxel_data, &frames)?;
        if voxels.len() != meta.voxel_count {
            return Err(Error::Dataset(format!("scene {} voxel count mismatch", entry.id)));
        }
        Ok(SceneRecord { meta, frames, voxels })
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<SceneRecord>> {
        let entries: Vec<_> = self.entries(split).collect();
        entries.par_iter().map(|e| self.load_scene(e)).collect()
    }
}
