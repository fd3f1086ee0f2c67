//! Subcommand implementations over in-memory documents.

use gravview_core::kinematics::{ccd_ik_solve, postprocess_motion, FramePose, IkOptions, PostprocessParams};
use gravview_core::metrics::{evaluate, EvalInputs, MetricsReport};
use gravview_core::motion::MotionSequence;
use gravview_core::trajectory::{recover_global_trajectory, TrajectoryInputs};
use gravview_core::{Rotation, Vec3};
use gravview_seqmodel::toy::{encoder_checksums, Checksums};
use gravview_seqmodel::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::formats::{
    document_format, parse_document, parse_json, point_of, quat_of, rotation_of, vector_of, CameraFile, MotionFile,
    ObservationsFile, Point, Quat, SkeletonRef, SynthBundle, IK_REQUEST_FORMAT, IK_RESULT_FORMAT, METRICS_FORMAT,
    MOTION_TRACKS, OBSERVATION_TRACKS, SYNTH_FORMAT, SYNTH_TRACKS,
};

/// Joints scored for foot sliding: left ankle, right ankle, left foot,
/// right foot.
pub const EVAL_FEET: [usize; 4] = [7, 8, 10, 11];
/// Contact side (0 left, 1 right) of each entry of [`EVAL_FEET`].
const EVAL_FEET_SIDE: [usize; 4] = [0, 1, 0, 1];

/// Observations plus camera, either from a synthetic bundle or from a pair
/// of files.
pub fn load_recover_inputs(
    input: &str,
    input_name: &str,
    camera: Option<(&str, &str)>,
) -> Result<(ObservationsFile, CameraFile), CliError> {
    let tracks: Vec<&str> = OBSERVATION_TRACKS.iter().chain(&SYNTH_TRACKS).copied().collect();
    let value = parse_json(input, input_name, &tracks)?;
    let camera = camera.map(|(text, name)| CameraFile::from_json_str(text, name)).transpose()?;
    if document_format(&value) == Some(SYNTH_FORMAT) {
        let bundle = SynthBundle::from_value(value, input_name)?;
        return Ok((bundle.observations, camera.unwrap_or(bundle.camera)));
    }
    let obs = ObservationsFile::from_value(value, input_name)?;
    let camera = camera
        .ok_or_else(|| CliError::Validation(format!("{input_name}: observations need a camera file (--camera)")))?;
    Ok((obs, camera))
}

/// Rolls out the world trajectory and poses the body along it. The output
/// lives in the first frame's gravity-view system: y points down along
/// gravity and the origin is the first root position.
pub fn recover(obs: &ObservationsFile, camera: &CameraFile) -> Result<MotionFile, CliError> {
    if camera.frames != obs.frames {
        return Err(CliError::Validation(format!(
            "observations have {} frames but the camera has {}",
            obs.frames, camera.frames
        )));
    }
    let rots = |q: &[Quat]| q.iter().map(rotation_of).collect::<Vec<_>>();
    let inputs = TrajectoryInputs {
        gamma_gv: rots(&obs.gamma_gv),
        gamma_c: rots(&obs.gamma_c),
        v_root: obs.v_root.iter().map(vector_of).collect(),
        r_delta: camera.relative_rotations(),
        fps: obs.fps,
    };
    let world = recover_global_trajectory(&inputs).map_err(|e| CliError::Validation(format!("trajectory: {e}")))?;
    let skel = obs.skeleton.resolve().map_err(CliError::Validation)?;
    let local = match &obs.local_rotations {
        Some(lr) => lr.iter().map(|f| rots(f)).collect(),
        None => vec![vec![Rotation::identity(); skel.len() - 1]; obs.frames],
    };
    let motion = MotionSequence {
        fps: obs.fps,
        root_orientation: world.gamma_w,
        root_translation: world.tau_w,
        local_rotations: local,
        joint_positions: None,
        stationary_probs: obs.stationary_probs.clone(),
    }
    .with_joint_positions(&skel)
    .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(MotionFile::from_motion(&motion, obs.skeleton.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub contact_threshold: f64,
    pub ik_iters: usize,
    pub ik_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { contact_threshold: 0.5, ik_iters: 50, ik_tol: 1e-3 }
    }
}

/// Foot-contact refinement: translation drift removal, stationary joint
/// smoothing and per-frame IK.
pub fn refine(motion: &MotionFile, opts: &RefineOptions, source: &str) -> Result<MotionFile, CliError> {
    let skel = motion.skeleton(source)?;
    if motion.stationary_probs.is_none() {
        return Err(CliError::MissingTrack { source_name: source.to_string(), track: "stationary_probs".into() });
    }
    if !(0.0..1.0).contains(&opts.contact_threshold) {
        return Err(CliError::Validation(format!("contact threshold must lie in [0, 1), got {}", opts.contact_threshold)));
    }
    let params = PostprocessParams {
        contact_threshold: opts.contact_threshold,
        ik: IkOptions { max_iter: opts.ik_iters, tol: opts.ik_tol, ..IkOptions::default() },
    };
    let out = postprocess_motion(&motion.to_motion(), &skel, &params).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(MotionFile::from_motion(&out, motion.skeleton.clone()))
}

/// Ground truth for evaluation: a synthetic bundle (with contact labels)
/// or a plain motion file.
pub struct Reference {
    pub motion: MotionFile,
    pub contact: Option<Vec<[bool; 2]>>,
}

pub fn load_reference(text: &str, name: &str) -> Result<Reference, CliError> {
    let tracks: Vec<&str> = MOTION_TRACKS.iter().chain(&SYNTH_TRACKS).copied().collect();
    let value = parse_json(text, name, &tracks)?;
    if document_format(&value) == Some(SYNTH_FORMAT) {
        let b = SynthBundle::from_value(value, name)?;
        Ok(Reference { motion: b.motion, contact: Some(b.contact) })
    } else {
        Ok(Reference { motion: MotionFile::from_value(value, name)?, contact: None })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub format: String,
    pub frames: usize,
    pub fps: f64,
    pub segment_len: usize,
    pub pa_mpjpe_mm: Option<f64>,
    pub mpjpe_mm: Option<f64>,
    pub accel_m_s2: Option<f64>,
    pub wa_mpjpe_100_mm: Option<f64>,
    pub w_mpjpe_100_mm: Option<f64>,
    pub rte_percent: Option<f64>,
    pub jitter_m_s3: Option<f64>,
    pub foot_sliding_mm: Option<f64>,
}

impl MetricsFile {
    fn new(frames: usize, fps: f64, r: MetricsReport) -> Self {
        Self {
            format: METRICS_FORMAT.into(),
            frames,
            fps,
            segment_len: r.segment_len,
            pa_mpjpe_mm: r.pa_mpjpe_mm,
            mpjpe_mm: r.mpjpe_mm,
            accel_m_s2: r.accel_m_s2,
            wa_mpjpe_100_mm: r.wa_mpjpe_100_mm,
            w_mpjpe_100_mm: r.w_mpjpe_100_mm,
            rte_percent: r.rte_percent,
            jitter_m_s3: r.jitter_m_s3,
            foot_sliding_mm: r.foot_sliding_mm,
        }
    }
}

fn joints_of(m: &MotionFile, source: &str) -> Result<Vec<Vec<Vec3>>, CliError> {
    match &m.joint_positions {
        Some(jp) => Ok(jp.iter().map(|f| f.iter().map(vector_of).collect()).collect()),
        None => m.to_motion().compute_joint_positions(&m.skeleton(source)?).map_err(|e| CliError::invalid(source, e.to_string())),
    }
}

pub fn eval(pred: &MotionFile, reference: &Reference, segment_len: usize) -> Result<MetricsFile, CliError> {
    if pred.frames != reference.motion.frames {
        return Err(CliError::Validation(format!(
            "prediction has {} frames but the reference has {}",
            pred.frames, reference.motion.frames
        )));
    }
    let p = joints_of(pred, "prediction")?;
    let g = joints_of(&reference.motion, "reference")?;
    if let Some(j) = EVAL_FEET.iter().find(|&&j| p.first().is_some_and(|f| j >= f.len())) {
        return Err(CliError::Validation(format!("skeleton has no joint {j} for foot sliding")));
    }
    let mask: Option<Vec<Vec<bool>>> =
        reference.contact.as_ref().map(|c| c.iter().map(|f| EVAL_FEET_SIDE.iter().map(|&s| f[s]).collect()).collect());
    let report = evaluate(&EvalInputs {
        pred: &p,
        gt: &g,
        fps: pred.fps,
        segment_len,
        feet: &EVAL_FEET,
        contact: mask.as_deref(),
    })
    .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(MetricsFile::new(pred.frames, pred.fps, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttendDemo {
    pub format: String,
    pub frames: usize,
    pub param_seed: u64,
    pub input_seed: u64,
    pub config: ModelConfig,
    pub checksums: Checksums,
}

/// Encoder output checksums of a seeded model on seeded tokens.
pub fn attend_demo(frames: usize, param_seed: u64, input_seed: u64, train_len: Option<usize>) -> Result<AttendDemo, CliError> {
    let mut config = ModelConfig::desk();
    if let Some(l) = train_len {
        config.train_len = l;
    }
    let checksums =
        encoder_checksums(&config, frames, param_seed, input_seed).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(AttendDemo { format: "gvattend/1".into(), frames, param_seed, input_seed, config, checksums })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkTarget {
    pub joint: usize,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub max_step: f64,
    pub include_root: bool,
}

impl Default for IkSettings {
    fn default() -> Self {
        let d = IkOptions::<f64>::default();
        Self { max_iter: d.max_iter, tol: d.tol, max_step: d.max_step, include_root: d.include_root }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IkRequest {
    pub format: String,
    #[serde(default)]
    pub skeleton: SkeletonRef,
    #[serde(default)]
    pub root_orientation: Option<Quat>,
    #[serde(default)]
    pub root_translation: Option<Point>,
    #[serde(default)]
    pub local_rotations: Option<Vec<Quat>>,
    pub targets: Vec<IkTarget>,
    #[serde(default)]
    pub options: IkSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkResult {
    pub format: String,
    pub iterations: usize,
    pub initial_error: f64,
    pub final_error: f64,
    pub error_history: Vec<f64>,
    pub root_orientation: Quat,
    pub root_translation: Point,
    pub local_rotations: Vec<Quat>,
    pub joint_positions: Vec<Point>,
}

pub fn parse_ik_request(text: &str, name: &str) -> Result<IkRequest, CliError> {
    let value = parse_document(text, name, IK_REQUEST_FORMAT, &["targets", "local_rotations"])?;
    serde_path_to_error::deserialize(value).map_err(|e| CliError::Parse {
        source_name: name.to_string(),
        location: e.path().to_string(),
        detail: e.into_inner().to_string(),
    })
}

pub fn ik_solve(req: &IkRequest, name: &str) -> Result<IkResult, CliError> {
    let skel = req.skeleton.resolve().map_err(|e| CliError::invalid(name, e))?;
    let theta = match &req.local_rotations {
        Some(q) if q.len() != skel.len() - 1 => {
            return Err(CliError::invalid(name, format!("local_rotations has {} entries, skeleton needs {}", q.len(), skel.len() - 1)))
        }
        Some(q) => q.iter().map(rotation_of).collect(),
        None => vec![Rotation::identity(); skel.len() - 1],
    };
    let pose = FramePose {
        root_rot: req.root_orientation.as_ref().map_or_else(Rotation::identity, rotation_of),
        root_pos: req.root_translation.as_ref().map_or_else(Vec3::zeros, vector_of),
        theta,
    };
    let targets: Vec<(usize, Vec3)> = req.targets.iter().map(|t| (t.joint, vector_of(&t.position))).collect();
    let o = &req.options;
    let opts = IkOptions { max_iter: o.max_iter, tol: o.tol, max_step: o.max_step, include_root: o.include_root };
    let report = ccd_ik_solve(&skel, &pose, &targets, &opts).map_err(|e| CliError::invalid(name, e.to_string()))?;
    let joints = report.pose.joint_positions(&skel).map_err(|e| CliError::invalid(name, e.to_string()))?;
    Ok(IkResult {
        format: IK_RESULT_FORMAT.into(),
        iterations: report.iterations,
        initial_error: report.initial_error,
        final_error: report.final_error,
        error_history: report.error_history,
        root_orientation: quat_of(&report.pose.root_rot),
        root_translation: point_of(report.pose.root_pos),
        local_rotations: report.pose.theta.iter().map(quat_of).collect(),
        joint_positions: joints.into_iter().map(point_of).collect(),
    })
}
