//! JSON file formats. Every document carries a `format` tag; numbers are
//! written in shortest round-trip form, so save then load is bit-exact.
//! Rotations are unit quaternions `[w, x, y, z]`.

use gravview_core::kinematics::{Joint, Skeleton};
use gravview_core::rotmath::{Quaternion, Rotation3, Vector3};
use gravview_core::motion::MotionSequence;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::synth::SynthConfig;

pub const MOTION_FORMAT: &str = "gvmotion/1";
pub const CAMERA_FORMAT: &str = "gvcamera/1";
pub const OBSERVATIONS_FORMAT: &str = "gvobs/1";
pub const SYNTH_FORMAT: &str = "gvsynth/1";
pub const METRICS_FORMAT: &str = "gvmetrics/1";
pub const IK_REQUEST_FORMAT: &str = "gvik/1";
pub const IK_RESULT_FORMAT: &str = "gvikresult/1";

pub const QUAT_NORM_TOL: f64 = 1e-6;
pub const CAMERA_CONSISTENCY_TOL: f64 = 1e-6;

pub type Quat = [f64; 4];
pub type Point = [f64; 3];

pub fn quat_of(r: &Rotation3<f64>) -> Quat {
    r.to_quaternion().to_array()
}

pub fn rotation_of(q: &Quat) -> Rotation3<f64> {
    Rotation3::from_quaternion(Quaternion::from_array(*q))
}

pub fn point_of(v: Vector3<f64>) -> Point {
    v.to_array()
}

pub fn vector_of(p: &Point) -> Vector3<f64> {
    Vector3::from_array(*p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub stationary: Vec<usize>,
}

/// A bundled skeleton by name (`smpl24`) or an inline joint list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SkeletonRef {
    Named(String),
    Inline(SkeletonSpec),
}

impl Default for SkeletonRef {
    fn default() -> Self {
        SkeletonRef::Named("smpl24".into())
    }
}

impl SkeletonRef {
    pub fn resolve(&self) -> Result<Skeleton<f64>, String> {
        match self {
            SkeletonRef::Named(name) if name == "smpl24" => Ok(Skeleton::smpl24()),
            SkeletonRef::Named(name) => Err(format!("unknown skeleton `{name}` (bundled: smpl24)")),
            SkeletonRef::Inline(spec) => {
                let joints = spec
                    .joints
                    .iter()
                    .map(|j| Joint { name: j.name.clone(), parent: j.parent, offset: vector_of(&j.offset) })
                    .collect();
                Skeleton::new(spec.name.clone(), joints, spec.stationary.clone()).map_err(|e| e.to_string())
            }
        }
    }

    pub fn inline(skel: &Skeleton<f64>) -> Self {
        SkeletonRef::Inline(SkeletonSpec {
            name: skel.name.clone(),
            joints: skel
                .joints()
                .iter()
                .map(|j| JointSpec { name: j.name.clone(), parent: j.parent, offset: point_of(j.offset) })
                .collect(),
            stationary: skel.stationary_joints().to_vec(),
        })
    }
}

/// Parses JSON. A truncated document is reported with the last track whose
/// key appears before the cut.
pub fn parse_json(text: &str, source_name: &str, tracks: &[&str]) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let mut detail = e.to_string();
        if e.is_eof() {
            let last = tracks.iter().filter_map(|t| text.rfind(&format!("\"{t}\"")).map(|p| (p, *t))).max();
            if let Some((_, track)) = last {
                detail = format!("file ends inside track `{track}` ({detail})");
            }
        }
        CliError::Parse {
            source_name: source_name.to_string(),
            location: format!("line {}, column {}", e.line(), e.column()),
            detail,
        }
    })
}

/// Parses JSON and checks the format tag.
pub fn parse_document(text: &str, source_name: &str, expected_format: &str, tracks: &[&str]) -> Result<Value, CliError> {
    let value = parse_json(text, source_name, tracks)?;
    check_format(&value, source_name, expected_format)?;
    Ok(value)
}

pub fn document_format(value: &Value) -> Option<&str> {
    value.get("format").and_then(Value::as_str)
}

fn check_format(value: &Value, source_name: &str, expected: &str) -> Result<(), CliError> {
    if !value.is_object() {
        return Err(CliError::invalid(source_name, "top level is not a JSON object"));
    }
    match value.get("format") {
        None => Err(CliError::MissingTrack { source_name: source_name.to_string(), track: "format".into() }),
        Some(Value::String(s)) if s == expected => Ok(()),
        Some(other) => Err(CliError::VersionUnsupported {
            source_name: source_name.to_string(),
            found: other.as_str().map_or_else(|| other.to_string(), str::to_string),
            expected: expected.to_string(),
        }),
    }
}

/// Field-by-field decoding with track-level error messages.
struct Doc<'a> {
    source: &'a str,
    map: Map<String, Value>,
}

impl<'a> Doc<'a> {
    fn new(value: Value, source: &'a str) -> Result<Self, CliError> {
        match value {
            Value::Object(map) => Ok(Self { source, map }),
            _ => Err(CliError::invalid(source, "top level is not a JSON object")),
        }
    }

    fn decode<T: DeserializeOwned>(&self, key: &str, v: Value) -> Result<T, CliError> {
        serde_path_to_error::deserialize(v).map_err(|e| {
            let path = e.path().to_string();
            let location = if path == "." { key.to_string() } else { format!("{key}.{path}") };
            CliError::Parse { source_name: self.source.to_string(), location, detail: e.into_inner().to_string() }
        })
    }

    fn required<T: DeserializeOwned>(&mut self, key: &str) -> Result<T, CliError> {
        match self.map.remove(key) {
            Some(v) => self.decode(key, v),
            None => Err(CliError::MissingTrack { source_name: self.source.to_string(), track: key.to_string() }),
        }
    }

    fn optional<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.remove(key) {
            Some(Value::Null) | None => Ok(None),
            Some(v) => self.decode(key, v).map(Some),
        }
    }

    fn raw(&mut self, key: &str) -> Result<Value, CliError> {
        self.map
            .remove(key)
            .ok_or_else(|| CliError::MissingTrack { source_name: self.source.to_string(), track: key.to_string() })
    }
}

fn check_frames(source: &str, track: &str, expected: usize, got: usize) -> Result<(), CliError> {
    if expected == got {
        Ok(())
    } else {
        Err(CliError::TruncatedTrack { source_name: source.to_string(), track: track.to_string(), expected, got })
    }
}

fn check_quats<'q>(source: &str, track: &str, frames: impl Iterator<Item = (usize, &'q [Quat])>) -> Result<(), CliError> {
    for (frame, qs) in frames {
        for q in qs {
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > QUAT_NORM_TOL {
                return Err(CliError::NormViolation { source_name: source.to_string(), track: track.to_string(), frame, norm });
            }
        }
    }
    Ok(())
}

fn check_finite<'p>(source: &str, track: &str, values: impl Iterator<Item = &'p f64>) -> Result<(), CliError> {
    if values.into_iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CliError::invalid(source, format!("track `{track}` has a non-finite value")))
    }
}

fn check_fps(source: &str, fps: f64) -> Result<(), CliError> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(CliError::invalid(source, format!("fps must be positive, got {fps}")))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionFile {
    pub format: String,
    pub fps: f64,
    pub skeleton: SkeletonRef,
    pub frames: usize,
    pub root_orientation: Vec<Quat>,
    pub root_translation: Vec<Point>,
    pub local_rotations: Vec<Vec<Quat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_positions: Option<Vec<Vec<Point>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary_probs: Option<Vec<Vec<f64>>>,
}

pub const MOTION_TRACKS: [&str; 9] =
    ["format", "fps", "skeleton", "frames", "root_orientation", "root_translation", "local_rotations", "joint_positions", "stationary_probs"];

impl MotionFile {
    pub fn from_motion(motion: &MotionSequence<f64>, skeleton: SkeletonRef) -> Self {
        Self {
            format: MOTION_FORMAT.into(),
            fps: motion.fps,
            skeleton,
            frames: motion.len(),
            root_orientation: motion.root_orientation.iter().map(quat_of).collect(),
            root_translation: motion.root_translation.iter().map(|v| point_of(*v)).collect(),
            local_rotations: motion.local_rotations.iter().map(|f| f.iter().map(quat_of).collect()).collect(),
            joint_positions: motion
                .joint_positions
                .as_ref()
                .map(|jp| jp.iter().map(|f| f.iter().map(|v| point_of(*v)).collect()).collect()),
            stationary_probs: motion.stationary_probs.clone(),
        }
    }

    pub fn to_motion(&self) -> MotionSequence<f64> {
        MotionSequence {
            fps: self.fps,
            root_orientation: self.root_orientation.iter().map(rotation_of).collect(),
            root_translation: self.root_translation.iter().map(vector_of).collect(),
            local_rotations: self.local_rotations.iter().map(|f| f.iter().map(rotation_of).collect()).collect(),
            joint_positions: self
                .joint_positions
                .as_ref()
                .map(|jp| jp.iter().map(|f| f.iter().map(vector_of).collect()).collect()),
            stationary_probs: self.stationary_probs.clone(),
        }
    }

    pub fn skeleton(&self, source: &str) -> Result<Skeleton<f64>, CliError> {
        self.skeleton.resolve().map_err(|e| CliError::invalid(source, e))
    }

    pub fn from_json_str(text: &str, source: &str) -> Result<Self, CliError> {
        Self::from_value(parse_document(text, source, MOTION_FORMAT, &MOTION_TRACKS)?, source)
    }

    pub fn from_value(value: Value, source: &str) -> Result<Self, CliError> {
        check_format(&value, source, MOTION_FORMAT)?;
        let mut doc = Doc::new(value, source)?;
        let out = Self {
            format: doc.required("format")?,
            fps: doc.required("fps")?,
            skeleton: doc.required("skeleton")?,
            frames: doc.required("frames")?,
            root_orientation: doc.required("root_orientation")?,
            root_translation: doc.required("root_translation")?,
            local_rotations: doc.required("local_rotations")?,
            joint_positions: doc.optional("joint_positions")?,
            stationary_probs: doc.optional("stationary_probs")?,
        };
        out.validate(source)?;
        Ok(out)
    }

    pub fn validate(&self, source: &str) -> Result<(), CliError> {
        check_fps(source, self.fps)?;
        let n = self.frames;
        let skel = self.skeleton(source)?;
        check_frames(source, "root_orientation", n, self.root_orientation.len())?;
        check_frames(source, "root_translation", n, self.root_translation.len())?;
        check_frames(source, "local_rotations", n, self.local_rotations.len())?;
        check_quats(source, "root_orientation", self.root_orientation.iter().enumerate().map(|(t, q)| (t, std::slice::from_ref(q))))?;
        check_quats(source, "local_rotations", self.local_rotations.iter().enumerate().map(|(t, f)| (t, f.as_slice())))?;
        check_finite(source, "root_translation", self.root_translation.iter().flatten())?;
        for (t, f) in self.local_rotations.iter().enumerate() {
            if f.len() != skel.len() - 1 {
                return Err(CliError::invalid(
                    source,
                    format!("local_rotations frame {t} has {} joints, skeleton needs {}", f.len(), skel.len() - 1),
                ));
            }
        }
        if let Some(jp) = &self.joint_positions {
            check_frames(source, "joint_positions", n, jp.len())?;
            check_finite(source, "joint_positions", jp.iter().flatten().flatten())?;
            if let Some((t, f)) = jp.iter().enumerate().find(|(_, f)| f.len() != skel.len()) {
                return Err(CliError::invalid(source, format!("joint_positions frame {t} has {} joints, skeleton has {}", f.len(), skel.len())));
            }
        }
        if let Some(sp) = &self.stationary_probs {
            check_frames(source, "stationary_probs", n, sp.len())?;
            let k = skel.stationary_joints().len();
            for (t, f) in sp.iter().enumerate() {
                if f.len() != k {
                    return Err(CliError::invalid(source, format!("stationary_probs frame {t} has {} values, skeleton has {k} candidates", f.len())));
                }
                if let Some(p) = f.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(CliError::invalid(source, format!("stationary_probs frame {t}: {p} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self, source: &str) -> Result<String, CliError> {
        self.validate(source)?;
        Ok(to_json(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub px: f64,
    pub py: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { f: 1000.0, px: 640.0, py: 360.0, width: 1280, height: 720 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraFile {
    pub format: String,
    pub fps: f64,
    pub intrinsics: CameraIntrinsics,
    /// Unit gravity direction in frame-0 camera coordinates.
    pub gravity_cam0: Point,
    pub frames: usize,
    /// World → camera rotation per frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world_to_camera: Option<Vec<Quat>>,
    /// Camera t−1 → camera t rotation `R_w2cᵗ·(R_w2cᵗ⁻¹)ᵀ`; entry 0 is the
    /// identity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative: Option<Vec<Quat>>,
}

pub const CAMERA_TRACKS: [&str; 7] = ["format", "fps", "intrinsics", "gravity_cam0", "frames", "world_to_camera", "relative"];

impl CameraFile {
    pub fn from_json_str(text: &str, source: &str) -> Result<Self, CliError> {
        Self::from_value(parse_document(text, source, CAMERA_FORMAT, &CAMERA_TRACKS)?, source)
    }

    pub fn from_value(value: Value, source: &str) -> Result<Self, CliError> {
        check_format(&value, source, CAMERA_FORMAT)?;
        let mut doc = Doc::new(value, source)?;
        let out = Self {
            format: doc.required("format")?,
            fps: doc.required("fps")?,
            intrinsics: doc.required("intrinsics")?,
            gravity_cam0: doc.required("gravity_cam0")?,
            frames: doc.required("frames")?,
            world_to_camera: doc.optional("world_to_camera")?,
            relative: doc.optional("relative")?,
        };
        out.validate(source)?;
        Ok(out)
    }

    pub fn validate(&self, source: &str) -> Result<(), CliError> {
        check_fps(source, self.fps)?;
        let g = vector_of(&self.gravity_cam0);
        if !g.is_finite() || g.norm() == 0.0 {
            return Err(CliError::invalid(source, "gravity_cam0 must be a finite nonzero vector"));
        }
        if self.world_to_camera.is_none() && self.relative.is_none() {
            return Err(CliError::MissingTrack { source_name: source.to_string(), track: "relative".into() });
        }
        for (track, q) in [("world_to_camera", &self.world_to_camera), ("relative", &self.relative)] {
            if let Some(q) = q {
                check_frames(source, track, self.frames, q.len())?;
                check_quats(source, track, q.iter().enumerate().map(|(t, q)| (t, std::slice::from_ref(q))))?;
            }
        }
        if let (Some(abs), Some(rel)) = (&self.world_to_camera, &self.relative) {
            for t in 1..self.frames {
                let implied = rotation_of(&abs[t]) * rotation_of(&abs[t - 1]).inverse();
                let angle = implied.geodesic_angle(&rotation_of(&rel[t]));
                if angle.is_nan() || angle > CAMERA_CONSISTENCY_TOL {
                    return Err(CliError::invalid(
                        source,
                        format!("frame {t}: relative rotation disagrees with world_to_camera by {angle:e} rad"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `R_Δ` per frame, from the relative track when present.
    pub fn relative_rotations(&self) -> Vec<Rotation3<f64>> {
        match (&self.relative, &self.world_to_camera) {
            (Some(rel), _) => rel.iter().enumerate().map(|(t, q)| if t == 0 { Rotation3::identity() } else { rotation_of(q) }).collect(),
            (None, Some(abs)) => (0..abs.len())
                .map(|t| if t == 0 { Rotation3::identity() } else { rotation_of(&abs[t]) * rotation_of(&abs[t - 1]).inverse() })
                .collect(),
            (None, None) => Vec::new(),
        }
    }

    pub fn to_json_string(&self, source: &str) -> Result<String, CliError> {
        self.validate(source)?;
        Ok(to_json(self))
    }
}

/// Per-frame network outputs (or their synthetic stand-ins).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationsFile {
    pub format: String,
    pub fps: f64,
    pub skeleton: SkeletonRef,
    pub frames: usize,
    pub gamma_gv: Vec<Quat>,
    pub gamma_c: Vec<Quat>,
    /// Root displacement t → t+1 in the body frame, meters.
    pub v_root: Vec<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_rotations: Option<Vec<Vec<Quat>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary_probs: Option<Vec<Vec<f64>>>,
    /// Projected joints, pixels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keypoints_px: Option<Vec<Vec<[f64; 2]>>>,
}

pub const OBSERVATION_TRACKS: [&str; 10] =
    ["format", "fps", "skeleton", "frames", "gamma_gv", "gamma_c", "v_root", "local_rotations", "stationary_probs", "keypoints_px"];

impl ObservationsFile {
    pub fn from_json_str(text: &str, source: &str) -> Result<Self, CliError> {
        Self::from_value(parse_document(text, source, OBSERVATIONS_FORMAT, &OBSERVATION_TRACKS)?, source)
    }

    pub fn from_value(value: Value, source: &str) -> Result<Self, CliError> {
        check_format(&value, source, OBSERVATIONS_FORMAT)?;
        let mut doc = Doc::new(value, source)?;
        let out = Self {
            format: doc.required("format")?,
            fps: doc.required("fps")?,
            skeleton: doc.required("skeleton")?,
            frames: doc.required("frames")?,
            gamma_gv: doc.required("gamma_gv")?,
            gamma_c: doc.required("gamma_c")?,
            v_root: doc.required("v_root")?,
            local_rotations: doc.optional("local_rotations")?,
            stationary_probs: doc.optional("stationary_probs")?,
            keypoints_px: doc.optional("keypoints_px")?,
        };
        out.validate(source)?;
        Ok(out)
    }

    pub fn validate(&self, source: &str) -> Result<(), CliError> {
        check_fps(source, self.fps)?;
        let n = self.frames;
        let skel = self.skeleton.resolve().map_err(|e| CliError::invalid(source, e))?;
        check_frames(source, "gamma_gv", n, self.gamma_gv.len())?;
        check_frames(source, "gamma_c", n, self.gamma_c.len())?;
        check_frames(source, "v_root", n, self.v_root.len())?;
        for (track, q) in [("gamma_gv", &self.gamma_gv), ("gamma_c", &self.gamma_c)] {
            check_quats(source, track, q.iter().enumerate().map(|(t, q)| (t, std::slice::from_ref(q))))?;
        }
        check_finite(source, "v_root", self.v_root.iter().flatten())?;
        if let Some(lr) = &self.local_rotations {
            check_frames(source, "local_rotations", n, lr.len())?;
            check_quats(source, "local_rotations", lr.iter().enumerate().map(|(t, f)| (t, f.as_slice())))?;
            if let Some((t, f)) = lr.iter().enumerate().find(|(_, f)| f.len() != skel.len() - 1) {
                return Err(CliError::invalid(source, format!("local_rotations frame {t} has {} joints, skeleton needs {}", f.len(), skel.len() - 1)));
            }
        }
        if let Some(sp) = &self.stationary_probs {
            check_frames(source, "stationary_probs", n, sp.len())?;
            if sp.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(CliError::invalid(source, "stationary_probs outside [0, 1]"));
            }
        }
        if let Some(kp) = &self.keypoints_px {
            check_frames(source, "keypoints_px", n, kp.len())?;
            check_finite(source, "keypoints_px", kp.iter().flatten().flatten())?;
        }
        Ok(())
    }

    pub fn to_json_string(&self, source: &str) -> Result<String, CliError> {
        self.validate(source)?;
        Ok(to_json(self))
    }
}

/// Ground truth, camera and observations of one synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthBundle {
    pub format: String,
    pub seed: u64,
    pub config: SynthConfig,
    /// Ground-truth world motion (y up).
    pub motion: MotionFile,
    /// Camera as observed; its relative track carries any injected noise.
    pub camera: CameraFile,
    /// Exact world → camera rotations.
    pub camera_truth: Vec<Quat>,
    /// Camera centers in world coordinates.
    pub camera_position: Vec<Point>,
    pub observations: ObservationsFile,
    /// Ground-truth foot contact per frame, `[left, right]`.
    pub contact: Vec<[bool; 2]>,
}

pub const SYNTH_TRACKS: [&str; 9] =
    ["format", "seed", "config", "motion", "camera", "camera_truth", "camera_position", "observations", "contact"];

impl SynthBundle {
    pub fn from_json_str(text: &str, source: &str) -> Result<Self, CliError> {
        Self::from_value(parse_document(text, source, SYNTH_FORMAT, &SYNTH_TRACKS)?, source)
    }

    pub fn from_value(value: Value, source: &str) -> Result<Self, CliError> {
        check_format(&value, source, SYNTH_FORMAT)?;
        let mut doc = Doc::new(value, source)?;
        let format = doc.required("format")?;
        let seed = doc.required("seed")?;
        let config = doc.required("config")?;
        let motion = MotionFile::from_value(doc.raw("motion")?, &format!("{source}#motion"))?;
        let camera = CameraFile::from_value(doc.raw("camera")?, &format!("{source}#camera"))?;
        let camera_truth: Vec<Quat> = doc.required("camera_truth")?;
        let camera_position: Vec<Point> = doc.required("camera_position")?;
        let observations = ObservationsFile::from_value(doc.raw("observations")?, &format!("{source}#observations"))?;
        let contact: Vec<[bool; 2]> = doc.required("contact")?;
        let out = Self { format, seed, config, motion, camera, camera_truth, camera_position, observations, contact };
        out.validate(source)?;
        Ok(out)
    }

    pub fn validate(&self, source: &str) -> Result<(), CliError> {
        let n = self.motion.frames;
        check_frames(source, "camera_truth", n, self.camera_truth.len())?;
        check_frames(source, "camera_position", n, self.camera_position.len())?;
        check_frames(source, "contact", n, self.contact.len())?;
        check_frames(source, "camera", n, self.camera.frames)?;
        check_frames(source, "observations", n, self.observations.frames)?;
        check_quats(source, "camera_truth", self.camera_truth.iter().enumerate().map(|(t, q)| (t, std::slice::from_ref(q))))?;
        Ok(())
    }

    pub fn to_json_string(&self, source: &str) -> Result<String, CliError> {
        self.motion.validate(source)?;
        self.camera.validate(source)?;
        self.observations.validate(source)?;
        self.validate(source)?;
        Ok(to_json(self))
    }
}
