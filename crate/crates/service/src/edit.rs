//! Partial updates of a scene description.
//!
//! A patch is a JSON object whose keys are fields of the targeted entity.
//! Keys are applied one at a time and the whole description is validated
//! after each, so an error names the offending field.

use gsgi_core::io::{CameraDesc, GaussianModelDesc, LightDesc, MeshDesc, SceneDescription};
use gsgi_core::session::Change;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EditError {
    #[error("no {kind} with id `{id}`")]
    NotFound { kind: &'static str, id: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("{0}")]
    BadBody(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Edit {
    Light { id: String, patch: Value },
    Object { id: String, patch: Value },
    Material { id: String, patch: Value },
    Camera { patch: Value },
}

impl Edit {
    pub fn change(&self) -> Change {
        match self {
            Edit::Light { .. } => Change::Lighting,
            Edit::Object { .. } => Change::Geometry,
            Edit::Material { .. } => Change::Material,
            Edit::Camera { .. } => Change::Camera,
        }
    }
}

/// Keys that identify an entity and cannot be patched.
const FIXED: [&str; 2] = ["id", "type"];

fn patch_object(patch: &Value) -> Result<&Map<String, Value>, EditError> {
    patch.as_object().ok_or_else(|| EditError::BadBody("patch body must be a JSON object".into()))
}

/// Merges `patch` into `entity` key by key. `store` writes a candidate back
/// into a copy of the description, which must then validate.
fn merge<T, F>(desc: &SceneDescription, entity: &T, patch: &Value, store: F) -> Result<(SceneDescription, T), EditError>
where
    T: Serialize + DeserializeOwned + Clone,
    F: Fn(&mut SceneDescription, T),
{
    let mut current = serde_json::to_value(entity).expect("scene entities serialize");
    let mut out = desc.clone();
    let mut value: Option<T> = None;
    for (key, v) in patch_object(patch)? {
        let invalid = |message: String| EditError::Invalid { field: key.clone(), message };
        if FIXED.contains(&key.as_str()) {
            if current.get(key) != Some(v) {
                return Err(invalid("cannot be changed".into()));
            }
            continue;
        }
        let mut candidate = current.clone();
        let fields = candidate.as_object_mut().expect("entities are objects");
        if v.is_null() {
            fields.remove(key);
        } else {
            fields.insert(key.clone(), v.clone());
        }
        let parsed: T = serde_json::from_value(candidate.clone()).map_err(|e| invalid(e.to_string()))?;
        let mut next = out.clone();
        store(&mut next, parsed.clone());
        next.validate().map_err(|e| invalid(e.to_string()))?;
        out = next;
        current = candidate;
        value = Some(parsed);
    }
    let value = match value {
        Some(v) => v,
        None => serde_json::from_value(current).expect("unchanged entity parses"),
    };
    Ok((out, value))
}

fn light_index(desc: &SceneDescription, id: &str) -> Result<usize, EditError> {
    desc.lights
        .iter()
        .position(|l| l.id() == id)
        .ok_or_else(|| EditError::NotFound { kind: "light", id: id.into() })
}

enum Object {
    Gaussians(usize),
    Mesh(usize),
}

fn object_index(desc: &SceneDescription, id: &str) -> Result<Object, EditError> {
    if let Some(i) = desc.gaussians.iter().position(|g| g.id == id) {
        return Ok(Object::Gaussians(i));
    }
    if let Some(i) = desc.meshes.iter().position(|m| m.id == id) {
        return Ok(Object::Mesh(i));
    }
    Err(EditError::NotFound { kind: "object", id: id.into() })
}

/// `position` is accepted as an alias of `translation`.
fn transform_patch(patch: &Value) -> Result<Value, EditError> {
    let mut out = Map::new();
    for (k, v) in patch_object(patch)? {
        let key = if k == "position" { "translation" } else { k.as_str() };
        out.insert(key.to_string(), v.clone());
    }
    Ok(Value::Object(out))
}

fn entity_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("scene entities serialize")
}

/// Applies `edit` to a copy of `desc`; returns the new description and the
/// updated entity.
pub fn apply(desc: &SceneDescription, edit: &Edit) -> Result<(SceneDescription, Value), EditError> {
    match edit {
        Edit::Light { id, patch } => {
            let i = light_index(desc, id)?;
            let (d, l) = merge(desc, &desc.lights[i], patch, |d, l: LightDesc| d.lights[i] = l)?;
            Ok((d, entity_json(&l)))
        }
        Edit::Object { id, patch } => {
            let patch = transform_patch(patch)?;
            match object_index(desc, id)? {
                Object::Gaussians(i) => {
                    let (d, _) = merge(desc, &desc.gaussians[i].transform, &patch, |d, t| d.gaussians[i].transform = t)?;
                    let e = entity_json::<GaussianModelDesc>(&d.gaussians[i]);
                    Ok((d, e))
                }
                Object::Mesh(i) => {
                    let (d, _) = merge(desc, &desc.meshes[i].transform, &patch, |d, t| d.meshes[i].transform = t)?;
                    let e = entity_json::<MeshDesc>(&d.meshes[i]);
                    Ok((d, e))
                }
            }
        }
        Edit::Material { id, patch } => match object_index(desc, id)? {
            Object::Gaussians(i) => {
                let (d, m) = merge(desc, &desc.gaussians[i].material, patch, |d, m| d.gaussians[i].material = m)?;
                Ok((d, entity_json(&m)))
            }
            Object::Mesh(i) => {
                let (d, m) = merge(desc, &desc.meshes[i].material, patch, |d, m| d.meshes[i].material = m)?;
                Ok((d, entity_json(&m)))
            }
        },
        Edit::Camera { patch } => {
            let (d, c) = merge(desc, &desc.camera, patch, |d, c: CameraDesc| d.camera = c)?;
            Ok((d, entity_json(&c)))
        }
    }
}
