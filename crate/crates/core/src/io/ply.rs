//! Binary little-endian PLY point clouds in the 3D Gaussian splatting
//! layout.
//!
//! Required vertex properties: `x y z`, `scale_0..2` (log space),
//! `rot_0..3` (quaternion `w x y z`, unnormalized) and `opacity` (logit).
//! Material comes from `albedo_0..2`, `roughness`, `normal_0..2` when
//! present, otherwise from the SH DC color `f_dc_0..2`. `emission_0..2` is
//! optional.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use nalgebra::{Quaternion, UnitQuaternion};

use crate::error::{Error, Result};
use crate::gsmath::{default_normal, GaussianPrimitive};
use crate::math::{Rgb, Vec3};

/// Zeroth-order real SH basis constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const DEFAULT_ROUGHNESS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => LittleEndian::read_i16(b) as f64,
            Scalar::U16 => LittleEndian::read_u16(b) as f64,
            Scalar::I32 => LittleEndian::read_i32(b) as f64,
            Scalar::U32 => LittleEndian::read_u32(b) as f64,
            Scalar::F32 => LittleEndian::read_f32(b) as f64,
            Scalar::F64 => LittleEndian::read_f64(b),
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, Scalar)>,
    /// Holds a list property; its byte size is unknown.
    has_list: bool,
}

#[derive(Debug)]
struct Header {
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let err = |offset: usize, reason: String| Error::PlyHeader { path: path.to_path_buf(), offset, reason };
    let mut offset = 0;
    let mut elements: Vec<Element> = Vec::new();
    let mut line_no = 0;
    let mut format_seen = false;
    loop {
        let Some(len) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(err(offset, "header ends before `end_header`".into()));
        };
        let raw = &bytes[offset..offset + len];
        let line = std::str::from_utf8(raw)
            .map_err(|_| err(offset, "header is not valid text".into()))?
            .trim_end_matches('\r');
        let words: Vec<&str> = line.split_whitespace().collect();
        let start = offset;
        offset += len + 1;
        line_no += 1;
        if line_no == 1 {
            if line != "ply" {
                return Err(err(start, "missing `ply` magic".into()));
            }
            continue;
        }
        match words.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, version] => {
                if *fmt != "binary_little_endian" {
                    return Err(err(start, format!("unsupported format `{fmt}`")));
                }
                if *version != "1.0" {
                    return Err(err(start, format!("unsupported version `{version}`")));
                }
                format_seen = true;
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| err(start, format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new(), has_list: false });
            }
            ["property", "list", _, _, _] => {
                let e = elements
                    .last_mut()
                    .ok_or_else(|| err(start, "property before any element".into()))?;
                e.has_list = true;
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| err(start, format!("unknown property type `{ty}`")))?;
                let e = elements
                    .last_mut()
                    .ok_or_else(|| err(start, "property before any element".into()))?;
                e.properties.push((name.to_string(), ty));
            }
            ["end_header"] => {
                if !format_seen {
                    return Err(err(start, "`end_header` before the format line".into()));
                }
                break;
            }
            _ => return Err(err(start, format!("unrecognized header line `{line}`"))),
        }
    }
    Ok(Header { elements, body_offset: offset })
}

/// Parses a PLY file held in memory; `path` is only used in errors.
pub fn parse_gaussians(bytes: &[u8], path: &Path) -> Result<Vec<GaussianPrimitive>> {
    let header = parse_header(bytes, path)?;
    let mut offset = header.body_offset;
    let mut vertex = None;
    for e in &header.elements {
        if e.name == "vertex" {
            vertex = Some(e);
            break;
        }
        if e.has_list {
            return Err(Error::PlyHeader {
                path: path.to_path_buf(),
                offset: header.body_offset,
                reason: format!("list element `{}` precedes the vertex element", e.name),
            });
        }
        offset += e.count * e.properties.iter().map(|p| p.1.size()).sum::<usize>();
    }
    let vertex = vertex.ok_or_else(|| Error::PlyHeader {
        path: path.to_path_buf(),
        offset: header.body_offset,
        reason: "no vertex element".into(),
    })?;
    if vertex.has_list {
        return Err(Error::PlyHeader {
            path: path.to_path_buf(),
            offset: header.body_offset,
            reason: "vertex element has a list property".into(),
        });
    }

    let index = |name: &str| vertex.properties.iter().position(|p| p.0 == name);
    let require = |name: &str| {
        index(name).ok_or_else(|| Error::PlyMissingProperty { path: path.to_path_buf(), property: name.to_string() })
    };
    let req = |names: &[&str]| names.iter().map(|n| require(n)).collect::<Result<Vec<_>>>();
    let pos = req(&["x", "y", "z"])?;
    let scale = req(&["scale_0", "scale_1", "scale_2"])?;
    let rot = req(&["rot_0", "rot_1", "rot_2", "rot_3"])?;
    let opacity = require("opacity")?;
    let material = if index("albedo_0").is_some() || index("roughness").is_some() || index("normal_0").is_some() {
        Some((
            req(&["albedo_0", "albedo_1", "albedo_2"])?,
            require("roughness")?,
            req(&["normal_0", "normal_1", "normal_2"])?,
        ))
    } else {
        None
    };
    let dc = match material {
        Some(_) => None,
        None => Some(req(&["f_dc_0", "f_dc_1", "f_dc_2"])?),
    };
    let emission = ["emission_0", "emission_1", "emission_2"].map(index);
    let emission = emission.iter().all(Option::is_some).then(|| emission.map(Option::unwrap));

    let mut offsets = Vec::with_capacity(vertex.properties.len());
    let mut stride = 0;
    for (_, ty) in &vertex.properties {
        offsets.push(stride);
        stride += ty.size();
    }
    let expected = vertex.count * stride;
    let found = bytes.len().saturating_sub(offset);
    if found < expected {
        return Err(Error::PlyTruncated { path: path.to_path_buf(), expected, found });
    }

    let mut out = Vec::with_capacity(vertex.count);
    for v in 0..vertex.count {
        let base = offset + v * stride;
        let get = |i: usize| vertex.properties[i].1.read(&bytes[base + offsets[i]..]);
        let v3 = |ix: &[usize]| Vec3::new(get(ix[0]), get(ix[1]), get(ix[2]));
        let center = v3(&pos);
        let s = v3(&scale).map(f64::exp);
        let q = Quaternion::new(get(rot[0]), get(rot[1]), get(rot[2]), get(rot[3]));
        if !(q.norm() > 0.0) {
            return Err(Error::invalid("gaussian", format!("vertex {v}: zero rotation quaternion")));
        }
        let rotation = UnitQuaternion::from_quaternion(q);
        let mut g = GaussianPrimitive::new(center, s, rotation, logistic(get(opacity)));
        match (&material, &dc) {
            (Some((albedo, roughness, normal)), _) => {
                g.albedo = v3(albedo);
                g.roughness = get(*roughness);
                let n = v3(normal);
                g.normal = if n.norm() > 1e-12 { n.normalize() } else { default_normal(&s, &rotation, None) };
            }
            (None, Some(dc)) => {
                g.albedo = dc_to_albedo(&v3(dc));
                g.roughness = DEFAULT_ROUGHNESS;
            }
            (None, None) => unreachable!(),
        }
        if let Some(e) = &emission {
            g.emission = v3(e);
        }
        out.push(g);
    }
    Ok(out)
}

pub fn load_gaussians(path: impl AsRef<Path>) -> Result<Vec<GaussianPrimitive>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_gaussians(&bytes, path)
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

const WRITTEN: [&str; 21] = [
    "x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity", "albedo_0",
    "albedo_1", "albedo_2", "roughness", "normal_0", "normal_1", "normal_2", "emission_0", "emission_1", "emission_2",
];

/// Serializes Gaussians with material fields as 32-bit floats. Opacity is
/// clamped just below 1 so its logit stays finite.
pub fn encode_gaussians(gaussians: &[GaussianPrimitive]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", gaussians.len());
    for name in WRITTEN {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");
    out.extend_from_slice(header.as_bytes());
    for g in gaussians {
        let q = g.rotation.quaternion();
        let values = [
            g.center.x,
            g.center.y,
            g.center.z,
            g.scale.x.ln(),
            g.scale.y.ln(),
            g.scale.z.ln(),
            q.w,
            q.i,
            q.j,
            q.k,
            logit(g.opacity.clamp(1e-6, 1.0 - 1e-6)),
            g.albedo.x,
            g.albedo.y,
            g.albedo.z,
            g.roughness,
            g.normal.x,
            g.normal.y,
            g.normal.z,
            g.emission.x,
            g.emission.y,
            g.emission.z,
        ];
        for v in values {
            out.write_f32::<LittleEndian>(v as f32).expect("writing to a Vec cannot fail");
        }
    }
    out
}

pub fn save_gaussians(path: impl AsRef<Path>, gaussians: &[GaussianPrimitive]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_gaussians(gaussians)).map_err(|e| Error::io(path, e))
}

/// Albedo from the SH DC term, as the loader computes it.
pub fn dc_to_albedo(dc: &Rgb) -> Rgb {
    dc.map(|c| (0.5 + SH_C0 * c).clamp(0.0, 1.0))
}
