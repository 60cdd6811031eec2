//! Scene description files (TOML). See `docs/scene-format.md` for the
//! schema. Unknown keys are rejected and every error carries the line and
//! column it refers to.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Point3, Similarity3, Translation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::ply::load_gaussians;
use super::pnm::read_pfm;
use crate::camera::CameraModel;
use crate::direct_light::{EnvMap, Light};
use crate::error::{Error, Result};
use crate::gsmath::GaussianPrimitive;
use crate::image::Image;
use crate::math::{Rgb, Vec3};
use crate::pipeline::{Passes, RenderConfig};
use crate::radiance_cache::ProbeParams;
use crate::scene::{cuboid, quad, MeshMaterial, Scene, Triangle, DEFAULT_F0};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub camera: CameraDesc,
    #[serde(default)]
    pub render: RenderSettings,
    #[serde(default)]
    pub gaussians: Vec<GaussianModelDesc>,
    #[serde(default)]
    pub meshes: Vec<MeshDesc>,
    #[serde(default)]
    pub lights: Vec<LightDesc>,
    /// Directory that relative asset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDesc {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    #[serde(default = "y_up")]
    pub up: [f64; 3],
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    /// `[width, height]` in pixels.
    pub resolution: [usize; 2],
}

fn y_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassToggles {
    pub direct: bool,
    pub indirect: bool,
    pub glossy: bool,
    pub emission: bool,
}

impl Default for PassToggles {
    fn default() -> Self {
        PassToggles { direct: true, indirect: true, glossy: true, emission: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSettings {
    pub seed: u64,
    pub frames: usize,
    pub bias_scale: f64,
    pub probe_spacing: usize,
    pub film_reuse: bool,
    /// Output path prefix, relative to the working directory.
    pub output: String,
    /// Frames accumulated for a converged service request.
    pub converged_frames: usize,
    pub passes: PassToggles,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            seed: 0,
            frames: 1,
            bias_scale: 1.0,
            probe_spacing: ProbeParams::default().spacing,
            film_reuse: true,
            output: "out/frame".into(),
            converged_frames: 16,
            passes: PassToggles::default(),
        }
    }
}

/// Uniform scale; a per-axis array is accepted only to reject it with a
/// clear message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scale {
    Uniform(f64),
    PerAxis([f64; 3]),
}

/// Scale, then rotate about `axis` by `angle_deg`, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Transform {
    pub translation: [f64; 3],
    pub axis: [f64; 3],
    pub angle_deg: f64,
    pub scale: Scale,
}

impl Default for Transform {
    fn default() -> Self {
        Transform { translation: [0.0; 3], axis: y_up(), angle_deg: 0.0, scale: Scale::Uniform(1.0) }
    }
}

impl Transform {
    pub fn similarity(&self) -> std::result::Result<Similarity3<f64>, String> {
        let s = match self.scale {
            Scale::Uniform(s) => s,
            Scale::PerAxis([a, b, c]) if a == b && b == c => a,
            Scale::PerAxis(_) => return Err("non-uniform scale is not supported".into()),
        };
        if !(s > 0.0 && s.is_finite()) {
            return Err(format!("scale {s} must be positive and finite"));
        }
        let axis = Vec3::from(self.axis);
        let rotation = if self.angle_deg == 0.0 {
            UnitQuaternion::identity()
        } else {
            let axis = Unit::try_new(axis, 1e-12).ok_or("rotation axis must be nonzero")?;
            UnitQuaternion::from_axis_angle(&axis, self.angle_deg.to_radians())
        };
        let t = Vec3::from(self.translation);
        if !t.iter().chain([self.angle_deg].iter()).all(|v| v.is_finite()) {
            return Err("transform values must be finite".into());
        }
        Ok(Similarity3::from_parts(Translation3::from(t), rotation, s))
    }
}

/// Applies a similarity: centers move, orientations and normals rotate,
/// standard deviations scale.
pub fn transform_gaussian(g: &GaussianPrimitive, t: &Similarity3<f64>) -> GaussianPrimitive {
    let r = t.isometry.rotation;
    GaussianPrimitive {
        center: t.transform_point(&Point3::from(g.center)).coords,
        scale: g.scale * t.scaling(),
        rotation: r * g.rotation,
        normal: r * g.normal,
        ..*g
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub albedo: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roughness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianModelDesc {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub material: MaterialOverride,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialDesc {
    pub albedo: [f64; 3],
    pub roughness: f64,
    pub emission: [f64; 3],
    pub f0: f64,
}

impl Default for MaterialDesc {
    fn default() -> Self {
        let m = MeshMaterial::default();
        MaterialDesc { albedo: m.albedo.into(), roughness: m.roughness, emission: m.emission.into(), f0: DEFAULT_F0 }
    }
}

impl From<&MaterialDesc> for MeshMaterial {
    fn from(m: &MaterialDesc) -> Self {
        MeshMaterial { albedo: m.albedo.into(), roughness: m.roughness, emission: m.emission.into(), f0: m.f0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeDesc {
    /// Parallelogram `corner + a*u + b*v`; front face along `u x v`.
    Quad { corner: [f64; 3], u: [f64; 3], v: [f64; 3] },
    Box { min: [f64; 3], max: [f64; 3] },
    Triangles { vertices: Vec<[f64; 3]>, indices: Vec<[usize; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDesc {
    pub id: String,
    pub shape: ShapeDesc,
    #[serde(default)]
    pub material: MaterialDesc,
    #[serde(default)]
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LightDesc {
    /// `direction` is the direction light travels; normalized on load.
    Directional { id: String, direction: [f64; 3], radiance: [f64; 3] },
    Area {
        id: String,
        corner: [f64; 3],
        edge_u: [f64; 3],
        edge_v: [f64; 3],
        radiance: [f64; 3],
        #[serde(default)]
        two_sided: bool,
    },
    /// Constant `radiance`, or a latitude-longitude float map scaled by
    /// `intensity`.
    Environment {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radiance: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<PathBuf>,
        #[serde(default = "one")]
        intensity: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl LightDesc {
    pub fn id(&self) -> &str {
        match self {
            LightDesc::Directional { id, .. } | LightDesc::Area { id, .. } | LightDesc::Environment { id, .. } => id,
        }
    }
}

/// Loaded Gaussian models and environment maps keyed by resolved path, so
/// rebuilding after an edit does not touch the disk again.
#[derive(Debug, Default, Clone)]
pub struct AssetCache {
    models: HashMap<PathBuf, Arc<Vec<GaussianPrimitive>>>,
    maps: HashMap<PathBuf, Arc<Image<Rgb>>>,
}

impl AssetCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn model(&mut self, path: &Path) -> Result<Arc<Vec<GaussianPrimitive>>> {
        if let Some(m) = self.models.get(path) {
            return Ok(m.clone());
        }
        let m = Arc::new(load_gaussians(path)?);
        self.models.insert(path.to_path_buf(), m.clone());
        Ok(m)
    }

    pub fn map(&mut self, path: &Path) -> Result<Arc<Image<Rgb>>> {
        if let Some(m) = self.maps.get(path) {
            return Ok(m.clone());
        }
        let m = Arc::new(read_pfm(path)?);
        self.maps.insert(path.to_path_buf(), m.clone());
        Ok(m)
    }
}

/// Location of a semantic error inside the document.
#[derive(Debug, Clone, PartialEq)]
enum Seg {
    Key(&'static str),
    Index(usize),
}

type Issue = (Vec<Seg>, String);

fn issue(path: Vec<Seg>, msg: impl Into<String>) -> Issue {
    (path, msg.into())
}

fn color_ok(c: &[f64; 3]) -> bool {
    c.iter().all(|v| v.is_finite() && *v >= 0.0)
}

fn vec_ok(c: &[f64; 3]) -> bool {
    c.iter().all(|v| v.is_finite())
}

impl SceneDescription {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn camera(&self) -> Result<CameraModel> {
        let c = &self.camera;
        CameraModel::look_at(
            c.position.into(),
            c.look_at.into(),
            c.up.into(),
            c.fov_y,
            c.resolution[0],
            c.resolution[1],
        )
    }

    pub fn render_config(&self) -> RenderConfig {
        let r = &self.render;
        let p = r.passes;
        RenderConfig {
            seed: r.seed,
            passes: Passes { direct: p.direct, indirect: p.indirect, glossy: p.glossy, emission: p.emission },
            film_reuse: r.film_reuse,
            bias_scale: r.bias_scale,
            probes: ProbeParams { spacing: r.probe_spacing, ..Default::default() },
            ..Default::default()
        }
    }

    /// Ids of every Gaussian model and mesh, in document order.
    pub fn object_ids(&self) -> impl Iterator<Item = &str> {
        self.gaussians.iter().map(|g| g.id.as_str()).chain(self.meshes.iter().map(|m| m.id.as_str()))
    }

    fn issues(&self) -> Vec<Issue> {
        use Seg::{Index as I, Key as K};
        let mut out = Vec::new();
        if let Err(e) = self.camera() {
            out.push(issue(vec![K("camera")], e.to_string()));
        }
        let r = &self.render;
        if r.frames == 0 {
            out.push(issue(vec![K("render"), K("frames")], "frames must be at least 1"));
        }
        if !(r.bias_scale > 0.0 && r.bias_scale <= 1.0) {
            out.push(issue(vec![K("render"), K("bias_scale")], "bias_scale must lie in (0, 1]"));
        }
        if r.probe_spacing == 0 {
            out.push(issue(vec![K("render"), K("probe_spacing")], "probe_spacing must be positive"));
        }
        if r.converged_frames == 0 {
            out.push(issue(vec![K("render"), K("converged_frames")], "converged_frames must be at least 1"));
        }

        let mut seen = HashSet::new();
        let ids = self
            .gaussians
            .iter()
            .enumerate()
            .map(|(i, g)| ("gaussians", i, g.id.as_str()))
            .chain(self.meshes.iter().enumerate().map(|(i, m)| ("meshes", i, m.id.as_str())))
            .chain(self.lights.iter().enumerate().map(|(i, l)| ("lights", i, l.id())));
        for (kind, i, id) in ids {
            if id.is_empty() {
                out.push(issue(vec![K(kind), I(i), K("id")], "id must not be empty"));
            } else if !seen.insert(id) {
                out.push(issue(vec![K(kind), I(i), K("id")], format!("duplicate id `{id}`")));
            }
        }

        for (i, g) in self.gaussians.iter().enumerate() {
            let at = |k| vec![K("gaussians"), I(i), K(k)];
            if !self.resolve(&g.path).is_file() {
                out.push(issue(at("path"), format!("file not found: {}", self.resolve(&g.path).display())));
            }
            if let Err(e) = g.transform.similarity() {
                out.push(issue(at("transform"), e));
            }
            let m = &g.material;
            if m.albedo.is_some_and(|a| !color_ok(&a)) || m.emission.is_some_and(|e| !color_ok(&e)) {
                out.push(issue(at("material"), "colors must be finite and non-negative"));
            }
            if m.roughness.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
                out.push(issue(at("material"), "roughness must lie in [0, 1]"));
            }
        }

        for (i, m) in self.meshes.iter().enumerate() {
            let at = |k| vec![K("meshes"), I(i), K(k)];
            if let Err(e) = m.transform.similarity() {
                out.push(issue(at("transform"), e));
            } else if let Err(e) = self.mesh_triangles(m, 0) {
                out.push(issue(at("shape"), e.to_string()));
            }
            let mat = &m.material;
            if !color_ok(&mat.albedo) || !color_ok(&mat.emission) {
                out.push(issue(at("material"), "colors must be finite and non-negative"));
            }
            if !(0.0..=1.0).contains(&mat.roughness) || !(0.0..=1.0).contains(&mat.f0) {
                out.push(issue(at("material"), "roughness and f0 must lie in [0, 1]"));
            }
        }

        for (i, l) in self.lights.iter().enumerate() {
            let at = vec![K("lights"), I(i)];
            if let LightDesc::Environment { radiance, map, .. } = l {
                match (radiance, map) {
                    (Some(_), Some(_)) | (None, None) => {
                        out.push(issue(at.clone(), "environment needs exactly one of `radiance` or `map`"));
                        continue;
                    }
                    (None, Some(p)) if !self.resolve(p).is_file() => {
                        out.push(issue(at.clone(), format!("file not found: {}", self.resolve(p).display())));
                        continue;
                    }
                    _ => {}
                }
            }
            if let Err(e) = self.light(l, &mut AssetCache::new()).and_then(|l| l.validate()) {
                out.push(issue(at, e.to_string()));
            }
        }
        out
    }

    /// Semantic checks on an already parsed description.
    pub fn validate(&self) -> Result<()> {
        match self.issues().into_iter().next() {
            None => Ok(()),
            Some((path, msg)) => Err(Error::Scene(format!("{}: {msg}", path_string(&path)))),
        }
    }

    fn mesh_triangles(&self, m: &MeshDesc, object: u32) -> Result<Vec<Triangle>> {
        let t = m.transform.similarity().map_err(Error::Scene)?;
        let material = MeshMaterial::from(&m.material);
        let tris = match &m.shape {
            ShapeDesc::Quad { corner, u, v } => quad((*corner).into(), (*u).into(), (*v).into(), material, object)?.to_vec(),
            ShapeDesc::Box { min, max } => {
                if !(0..3).all(|k| min[k] < max[k]) {
                    return Err(Error::Scene("box min must be below max on every axis".into()));
                }
                cuboid((*min).into(), (*max).into(), material, object)?
            }
            ShapeDesc::Triangles { vertices, indices } => {
                let mut out = Vec::with_capacity(indices.len());
                for (k, tri) in indices.iter().enumerate() {
                    let v = |j: usize| {
                        vertices
                            .get(tri[j])
                            .map(|p| Vec3::from(*p))
                            .ok_or_else(|| Error::Scene(format!("triangle {k} index {} out of range", tri[j])))
                    };
                    out.push(Triangle::new(v(0)?, v(1)?, v(2)?, material, object)?);
                }
                out
            }
        };
        if tris.iter().any(|tr| tr.vertices.iter().any(|v| !vec_ok(&(*v).into()))) {
            return Err(Error::Scene("non-finite vertex".into()));
        }
        tris.iter()
            .map(|tr| {
                let [a, b, c] = tr.vertices.map(|p| t.transform_point(&Point3::from(p)).coords);
                Triangle::new(a, b, c, material, object)
            })
            .collect()
    }

    fn light(&self, l: &LightDesc, cache: &mut AssetCache) -> Result<Light> {
        Ok(match l {
            LightDesc::Directional { direction, radiance, .. } => {
                let d = Vec3::from(*direction);
                if !(d.norm() > 1e-12) || !vec_ok(direction) {
                    return Err(Error::invalid("light", "direction must be nonzero"));
                }
                Light::Directional { direction: d.normalize(), radiance: (*radiance).into() }
            }
            LightDesc::Area { corner, edge_u, edge_v, radiance, two_sided, .. } => Light::Area {
                corner: (*corner).into(),
                edge_u: (*edge_u).into(),
                edge_v: (*edge_v).into(),
                radiance: (*radiance).into(),
                two_sided: *two_sided,
            },
            LightDesc::Environment { radiance, map, intensity, .. } => {
                if !(*intensity >= 0.0 && intensity.is_finite()) {
                    return Err(Error::invalid("light", "intensity must be finite and non-negative"));
                }
                match (radiance, map) {
                    (Some(c), None) => Light::Environment(EnvMap::Constant(Rgb::from(*c) * *intensity)),
                    (None, Some(p)) => {
                        let img = cache.map(&self.resolve(p))?;
                        Light::Environment(EnvMap::Equirect {
                            width: img.width,
                            height: img.height,
                            texels: img.data.iter().map(|c| c * *intensity).collect(),
                        })
                    }
                    _ => return Err(Error::invalid("light", "environment needs exactly one of `radiance` or `map`")),
                }
            }
        })
    }

    /// Runtime scene. Mesh `object` indices follow the order of `meshes`.
    pub fn build(&self, cache: &mut AssetCache) -> Result<Scene> {
        self.validate()?;
        let mut scene = Scene::new();
        for g in &self.gaussians {
            let t = g.transform.similarity().map_err(Error::Scene)?;
            let model = cache.model(&self.resolve(&g.path))?;
            scene.gaussians.extend(model.iter().map(|p| {
                let mut q = transform_gaussian(p, &t);
                if let Some(a) = g.material.albedo {
                    q.albedo = a.into();
                }
                if let Some(r) = g.material.roughness {
                    q.roughness = r;
                }
                if let Some(e) = g.material.emission {
                    q.emission = e.into();
                }
                q
            }));
        }
        for (i, m) in self.meshes.iter().enumerate() {
            scene.triangles.extend(self.mesh_triangles(m, i as u32)?);
        }
        for l in &self.lights {
            scene.lights.push(self.light(l, cache)?);
        }
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene descriptions always serialize")
    }
}

fn path_string(path: &[Seg]) -> String {
    let mut s = String::new();
    for seg in path {
        match seg {
            Seg::Key(k) => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(k);
            }
            Seg::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

/// 1-based line and column of byte `offset` in `src`.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Byte span of the deepest node of `path` that exists in the document.
fn locate(src: &str, path: &[Seg]) -> usize {
    let Ok(doc) = toml::de::DeTable::parse(src) else { return 0 };
    let span = doc.span();
    let root = toml::de::DeValue::Table(doc.into_inner());
    let mut node = &root;
    let mut start = span.start;
    for seg in path {
        let next = match seg {
            Seg::Key(k) => node.get(*k),
            Seg::Index(i) => node.get(*i),
        };
        match next {
            Some(v) => {
                start = v.span().start;
                node = v.get_ref();
            }
            None => break,
        }
    }
    start
}

/// Parses scene text; `path` names the file in errors and anchors relative
/// asset paths.
pub fn parse_scene(src: &str, path: &Path) -> Result<SceneDescription> {
    let err = |offset: usize, message: String| {
        let (line, column) = line_col(src, offset);
        Error::SceneParse { path: path.to_path_buf(), line, column, message }
    };
    let mut desc: SceneDescription =
        toml::from_str(src).map_err(|e| err(e.span().map_or(0, |s| s.start), e.message().trim().to_string()))?;
    desc.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some((p, msg)) = desc.issues().into_iter().next() {
        return Err(err(locate(src, &p), format!("{}: {msg}", path_string(&p))));
    }
    Ok(desc)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneDescription> {
    let path = path.as_ref();
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&src, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::ply::save_gaussians;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[camera]
position = [0.0, 1.0, -3.0]
look_at = [0.0, 0.0, 0.0]
fov_y = 50.0
resolution = [32, 24]
"#;

    fn parse(src: &str) -> Result<SceneDescription> {
        parse_scene(src, Path::new("scene.toml"))
    }

    fn parse_err(src: &str) -> (usize, usize, String) {
        match parse(src).unwrap_err() {
            Error::SceneParse { line, column, message, .. } => (line, column, message),
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn minimal_scene_parses() {
        let d = parse(MINIMAL).unwrap();
        assert_eq!(d.camera.resolution, [32, 24]);
        assert_eq!(d.camera.up, [0.0, 1.0, 0.0]);
        assert_eq!(d.render, RenderSettings::default());
        let cam = d.camera().unwrap();
        assert_eq!((cam.width, cam.height), (32, 24));
        assert!(d.build(&mut AssetCache::new()).unwrap().triangles.is_empty());
    }

    #[test]
    fn missing_camera_is_named() {
        let (_, _, msg) = parse_err("[render]\nseed = 3\n");
        assert!(msg.contains("camera"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let src = format!("{MINIMAL}\n[render]\nseed = 1\nsede = 2\n");
        let (line, column, msg) = parse_err(&src);
        assert!(msg.contains("sede"), "{msg}");
        assert_eq!((line, column), (10, 1));
        let src = format!("{MINIMAL}\n[[lights]]\ntype = \"directional\"\nid = \"sun\"\ndirection = [0, -1, 0]\nradiance = [1, 1, 1]\ncolour = 3\n");
        assert!(parse_err(&src).2.contains("colour"));
        let src = format!("{MINIMAL}\n[[meshes]]\nid = \"m\"\nshape = {{ type = \"quad\", corner = [0,0,0], u = [1,0,0], v = [0,1,0], w = 1 }}\n");
        assert!(parse_err(&src).2.contains('w'));
    }

    #[test]
    fn duplicate_ids_are_rejected_at_the_second() {
        let src = format!(
            "{MINIMAL}\n[[meshes]]\nid = \"a\"\nshape = {{ type = \"box\", min = [0,0,0], max = [1,1,1] }}\n\n[[lights]]\ntype = \"directional\"\nid = \"a\"\ndirection = [0, -1, 0]\nradiance = [1, 1, 1]\n"
        );
        let (line, column, msg) = parse_err(&src);
        assert!(msg.contains("duplicate id `a`"), "{msg}");
        assert!(msg.contains("lights[0].id"), "{msg}");
        assert_eq!((line, column), (14, 6));
    }

    #[test]
    fn semantic_errors() {
        let bad_fov = MINIMAL.replace("50.0", "180.0");
        assert!(parse_err(&bad_fov).2.contains("camera"));
        let missing = format!("{MINIMAL}\n[[gaussians]]\nid = \"g\"\npath = \"nope.ply\"\n");
        let (line, _, msg) = parse_err(&missing);
        assert!(msg.contains("not found"));
        assert_eq!(line, 10);
        let frames = format!("{MINIMAL}\n[render]\nframes = 0\n");
        assert!(parse_err(&frames).2.contains("frames"));
        let aniso = format!(
            "{MINIMAL}\n[[meshes]]\nid = \"m\"\nshape = {{ type = \"box\", min = [0,0,0], max = [1,1,1] }}\ntransform = {{ scale = [1.0, 2.0, 1.0] }}\n"
        );
        assert!(parse_err(&aniso).2.contains("non-uniform"));
        let env = format!("{MINIMAL}\n[[lights]]\ntype = \"environment\"\nid = \"sky\"\n");
        assert!(parse_err(&env).2.contains("exactly one"));
        let degenerate = format!(
            "{MINIMAL}\n[[meshes]]\nid = \"m\"\nshape = {{ type = \"quad\", corner = [0,0,0], u = [1,0,0], v = [2,0,0] }}\n"
        );
        assert!(parse_err(&degenerate).2.contains("degenerate"));
    }

    #[test]
    fn builds_models_meshes_and_lights() {
        let dir = tempfile::tempdir().unwrap();
        let model = vec![
            GaussianPrimitive::isotropic(Vec3::new(1.0, 0.0, 0.0), 0.1, 0.5),
            GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, 1.0), 0.2, 0.9),
        ];
        save_gaussians(dir.path().join("m.ply"), &model).unwrap();
        let src = format!(
            r#"{MINIMAL}
[[gaussians]]
id = "model"
path = "m.ply"
transform = {{ translation = [0.0, 1.0, 0.0], axis = [0.0, 1.0, 0.0], angle_deg = 90.0, scale = 2.0 }}
material = {{ albedo = [0.1, 0.2, 0.3] }}

[[meshes]]
id = "floor"
shape = {{ type = "quad", corner = [-1.0, 0.0, -1.0], u = [0.0, 0.0, 2.0], v = [2.0, 0.0, 0.0] }}
material = {{ albedo = [0.8, 0.8, 0.8], roughness = 0.3 }}

[[meshes]]
id = "tri"
shape = {{ type = "triangles", vertices = [[0,0,0],[1,0,0],[0,1,0]], indices = [[0,1,2]] }}

[[lights]]
type = "directional"
id = "sun"
direction = [0.0, -2.0, 0.0]
radiance = [3.0, 3.0, 3.0]

[[lights]]
type = "environment"
id = "sky"
radiance = [0.1, 0.2, 0.3]
intensity = 2.0
"#
        );
        let path = dir.path().join("scene.toml");
        fs::write(&path, &src).unwrap();
        let d = load_scene(&path).unwrap();
        let s = d.build(&mut AssetCache::new()).unwrap();
        assert_eq!(s.gaussians.len(), 2);
        // Rotating +x by 90 degrees about +y gives -z.
        assert_relative_eq!(s.gaussians[0].center, Vec3::new(0.0, 1.0, -2.0), epsilon = 1e-6);
        assert_relative_eq!(s.gaussians[1].scale, Vec3::repeat(0.4), epsilon = 1e-6);
        assert_eq!(s.gaussians[0].albedo, Rgb::new(0.1, 0.2, 0.3));
        assert_eq!(s.triangles.len(), 3);
        assert_eq!(s.triangles[2].object, 1);
        assert_eq!(s.triangles[0].material.roughness, 0.3);
        assert!(matches!(s.lights[0], Light::Directional { direction, .. } if direction == -Vec3::y()));
        assert!(matches!(&s.lights[1], Light::Environment(EnvMap::Constant(c)) if *c == Rgb::new(0.2, 0.4, 0.6)));
        // Serialized form parses back to the same description.
        let again = parse_scene(&d.to_toml(), &path).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn environment_map_from_float_map() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_vec(2, 1, vec![Rgb::new(1.0, 0.0, 0.0), Rgb::new(0.0, 1.0, 0.0)]);
        crate::io::pnm::write_pfm(dir.path().join("sky.pfm"), &img).unwrap();
        let src = format!("{MINIMAL}\n[[lights]]\ntype = \"environment\"\nid = \"sky\"\nmap = \"sky.pfm\"\nintensity = 0.5\n");
        let d = parse_scene(&src, &dir.path().join("s.toml")).unwrap();
        let s = d.build(&mut AssetCache::new()).unwrap();
        match &s.lights[0] {
            Light::Environment(EnvMap::Equirect { width, height, texels }) => {
                assert_eq!((*width, *height), (2, 1));
                assert_eq!(texels[1], Rgb::new(0.0, 0.5, 0.0));
            }
            l => panic!("{l:?}"),
        }
    }

    proptest! {
        #[test]
        fn transform_round_trip(
            t in prop::array::uniform3(-10.0f64..10.0),
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in -360.0f64..360.0,
            s in 0.1f64..10.0,
            c in prop::array::uniform3(-5.0f64..5.0),
        ) {
            prop_assume!(Vec3::from(axis).norm() > 1e-3);
            let tr = Transform { translation: t, axis, angle_deg: angle, scale: Scale::Uniform(s) };
            let sim = tr.similarity().unwrap();
            let g = GaussianPrimitive::isotropic(Vec3::from(c), 0.3, 0.5);
            let back = transform_gaussian(&transform_gaussian(&g, &sim), &sim.inverse());
            prop_assert!((back.center - g.center).norm() < 1e-6);
            prop_assert!((back.scale - g.scale).norm() < 1e-9);
            prop_assert!(back.rotation.angle_to(&g.rotation) < 1e-6);
        }
    }
}
