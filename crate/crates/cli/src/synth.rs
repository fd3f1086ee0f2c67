//! Seeded synthetic walking sequences with a moving camera.
//!
//! The world is y-up with gravity `(0, −1, 0)`. The root follows a smooth
//! random path at constant speed. Feet are planted at alternating arc
//! lengths and the legs are solved analytically, so a planted foot stays
//! fixed up to rounding. Every observation track is exact unless noise is
//! requested.

use std::f64::consts::PI;

use gravview_core::gv::world_to_gv;
use gravview_core::kinematics::forward_kinematics;
use gravview_core::motion::MotionSequence;
use gravview_core::{Rotation, Skeleton, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::formats::{
    point_of, quat_of, CameraFile, CameraIntrinsics, MotionFile, ObservationsFile, SkeletonRef, SynthBundle,
    CAMERA_FORMAT, MOTION_FORMAT, OBSERVATIONS_FORMAT, SYNTH_FORMAT,
};

pub const GRAVITY_W: Vec3 = Vec3::new(0.0, -1.0, 0.0);

/// Joint indices of one leg: hip, knee, ankle, foot.
const LEGS: [[usize; 4]; 2] = [[1, 4, 7, 10], [2, 5, 8, 11]];
const SHOULDERS: [usize; 2] = [16, 17];
/// Stationary candidates of the bundled skeleton, in order.
const CANDIDATE_SIDE: [Option<usize>; 6] = [Some(0), Some(1), Some(0), Some(1), None, None];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraMode {
    Static,
    Orbit,
    Handheld,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Largest tilt error injected into each relative camera rotation.
    pub r_delta_tilt_deg: f64,
    /// Largest yaw error (about gravity) injected into each relative rotation.
    pub r_delta_yaw_deg: f64,
    /// Standard deviation of 2D keypoint jitter, pixels.
    pub keypoint_px: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { r_delta_tilt_deg: 0.0, r_delta_yaw_deg: 0.0, keypoint_px: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub radius: f64,
    pub period_s: f64,
    pub height: f64,
    pub roll_deg: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self { radius: 4.0, period_s: 12.0, height: 1.6, roll_deg: 3.0 }
    }
}

/// A camera that follows the subject with rotational shake, an
/// Ornstein-Uhlenbeck process on the rotation vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandheldConfig {
    pub distance: f64,
    pub height: f64,
    /// Shake step per frame, degrees.
    pub sigma_deg: f64,
    /// Fraction of the shake removed each frame.
    pub reversion: f64,
}

impl Default for HandheldConfig {
    fn default() -> Self {
        Self { distance: 4.0, height: 1.5, sigma_deg: 0.4, reversion: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub frames: usize,
    pub fps: f64,
    pub camera_mode: CameraMode,
    /// Meters per second.
    pub walk_speed: f64,
    /// Distance between consecutive foot plants, meters.
    pub step_length: f64,
    pub pelvis_height: f64,
    /// Amplitude of heading changes along the path, radians.
    pub turn: f64,
    pub swing_clearance: f64,
    pub noise: NoiseConfig,
    pub orbit: OrbitConfig,
    pub handheld: HandheldConfig,
    pub intrinsics: CameraIntrinsics,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames: 300,
            fps: 30.0,
            camera_mode: CameraMode::Orbit,
            walk_speed: 1.0,
            step_length: 0.5,
            pelvis_height: 0.78,
            turn: 0.6,
            swing_clearance: 0.06,
            noise: NoiseConfig::default(),
            orbit: OrbitConfig::default(),
            handheld: HandheldConfig::default(),
            intrinsics: CameraIntrinsics::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::BadConfig(m));
        if self.frames < 2 {
            return bad(format!("frames must be at least 2, got {}", self.frames));
        }
        let positive = [
            ("fps", self.fps),
            ("walk_speed", self.walk_speed),
            ("step_length", self.step_length),
            ("pelvis_height", self.pelvis_height),
            ("orbit.radius", self.orbit.radius),
            ("orbit.period_s", self.orbit.period_s),
            ("handheld.distance", self.handheld.distance),
            ("intrinsics.f", self.intrinsics.f),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return bad(format!("{name} must be positive, got {v}"));
        }
        let nonneg = [
            ("turn", self.turn),
            ("swing_clearance", self.swing_clearance),
            ("noise.r_delta_tilt_deg", self.noise.r_delta_tilt_deg),
            ("noise.r_delta_yaw_deg", self.noise.r_delta_yaw_deg),
            ("noise.keypoint_px", self.noise.keypoint_px),
            ("handheld.sigma_deg", self.handheld.sigma_deg),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return bad(format!("{name} must be non-negative, got {v}"));
        }
        if !(0.0..=1.0).contains(&self.handheld.reversion) {
            return bad(format!("handheld.reversion must lie in [0, 1], got {}", self.handheld.reversion));
        }
        if self.walk_speed / self.fps > self.step_length / 4.0 {
            return bad("walk_speed is too fast for step_length at this fps".into());
        }
        Ok(())
    }
}

/// Rotation of a level camera looking along `(sin yaw, 0, cos yaw)`,
/// pitched down by `pitch` and rolled by `roll` about its optical axis.
pub fn look_rotation(yaw: f64, pitch: f64, roll: f64) -> Rotation {
    let level = Rotation::from_matrix_unchecked(gravview_core::Mat3::from_rows([
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]));
    Rotation::about_z(roll) * Rotation::about_x(pitch) * level * Rotation::about_y(-yaw)
}

/// World → camera rotation of a camera at `eye` looking at `target`.
pub fn look_at(eye: Vec3, target: Vec3, roll: f64) -> Rotation {
    let d = target - eye;
    let yaw = d.x.atan2(d.z);
    let pitch = (eye.y - target.y).atan2((d.x * d.x + d.z * d.z).sqrt());
    look_rotation(yaw, pitch, roll)
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn forward(heading: f64) -> Vec3 {
    Vec3::new(heading.sin(), 0.0, heading.cos())
}

/// Arc-length parameterized ground path with a sinusoidal heading.
struct WalkPath {
    heading0: f64,
    waves: [(f64, f64, f64); 2],
    s_min: f64,
    ds: f64,
    points: Vec<Vec3>,
}

impl WalkPath {
    fn random(rng: &mut ChaCha8Rng, turn: f64, s_min: f64, s_max: f64) -> Self {
        let heading0 = rng.random_range(-PI..PI);
        let waves = [
            (turn * rng.random_range(0.5..1.0), rng.random_range(2.0..5.0), rng.random_range(0.0..2.0 * PI)),
            (turn * rng.random_range(0.2..0.5), rng.random_range(0.8..2.0), rng.random_range(0.0..2.0 * PI)),
        ];
        let ds = 0.01;
        let mut path = Self { heading0, waves, s_min, ds, points: Vec::new() };
        let n = ((s_max - s_min) / ds).ceil() as usize + 2;
        let mut p = Vec3::zeros();
        path.points.push(p);
        for i in 0..n {
            let s = s_min + i as f64 * ds;
            p += forward(path.heading(s + 0.5 * ds)) * ds;
            path.points.push(p);
        }
        let origin = path.position(0.0);
        for q in &mut path.points {
            *q -= origin;
        }
        path
    }

    fn heading(&self, s: f64) -> f64 {
        self.heading0 + self.waves.iter().map(|(a, l, phi)| a * (s / l + phi).sin()).sum::<f64>()
    }

    /// Cubic Hermite interpolation between grid points.
    fn position(&self, s: f64) -> Vec3 {
        let x = (s - self.s_min) / self.ds;
        let i = (x.floor().max(0.0) as usize).min(self.points.len() - 2);
        let u = x - i as f64;
        let (s0, s1) = (self.s_min + i as f64 * self.ds, self.s_min + (i + 1) as f64 * self.ds);
        let (m0, m1) = (forward(self.heading(s0)) * self.ds, forward(self.heading(s1)) * self.ds);
        let (u2, u3) = (u * u, u * u * u);
        self.points[i] * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + self.points[i + 1] * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2)
    }
}

/// One frame of the walker.
struct BodyPose {
    root_rot: Rotation,
    root_pos: Vec3,
    theta: Vec<Rotation>,
    stance: [bool; 2],
}

struct Walker<'a> {
    cfg: &'a SynthConfig,
    skel: Skeleton,
    path: WalkPath,
    /// Rest position of each foot joint relative to the root.
    foot_rest: [Vec3; 2],
}

impl<'a> Walker<'a> {
    fn new(cfg: &'a SynthConfig, path: WalkPath) -> Self {
        let skel = Skeleton::smpl24();
        let foot_rest = LEGS.map(|leg| leg.iter().map(|&j| skel.joints()[j].offset).sum::<Vec3>());
        Self { cfg, skel, path, foot_rest }
    }

    /// Arc length of the plant with index `k` of foot `side`.
    fn plant_s(&self, side: usize, k: f64) -> f64 {
        (2.0 * k + side as f64) * self.cfg.step_length
    }

    fn plant(&self, side: usize, k: f64) -> (Vec3, f64) {
        let s = self.plant_s(side, k);
        let h = self.path.heading(s);
        let rest = self.foot_rest[side];
        let p = self.path.position(s) + Rotation::about_y(h).apply(Vec3::new(rest.x, 0.0, rest.z));
        (p, h)
    }

    /// Foot joint position, foot heading and whether the foot is planted.
    fn foot(&self, side: usize, s: f64) -> (Vec3, f64, bool) {
        let l = self.cfg.step_length;
        let x = (s / l - side as f64) / 2.0;
        let near = x.round();
        if (s - self.plant_s(side, near)).abs() <= 0.6 * l {
            let (p, h) = self.plant(side, near);
            return (p, h, true);
        }
        let k = x.floor();
        let (a, ha) = self.plant(side, k);
        let (b, hb) = self.plant(side, k + 1.0);
        let u = (s - self.plant_s(side, k) - 0.6 * l) / (0.8 * l);
        let w = smoothstep(u);
        let mut p = a * (1.0 - w) + b * w;
        p.y = self.cfg.swing_clearance * (PI * u.clamp(0.0, 1.0)).sin().powi(2);
        (p, ha + (hb - ha) * w, false)
    }

    fn pose(&self, s: f64) -> Result<BodyPose, CliError> {
        let heading = self.path.heading(s);
        let root_rot = Rotation::about_y(heading);
        let bob = 0.01 * (2.0 * PI * s / self.cfg.step_length).cos();
        let mut root_pos = self.path.position(s);
        root_pos.y = self.cfg.pelvis_height + bob;
        let mut theta = vec![Rotation::identity(); self.skel.len() - 1];
        let mut stance = [false; 2];
        for (side, slot) in stance.iter_mut().enumerate() {
            let (foot, foot_heading, planted) = self.foot(side, s);
            *slot = planted;
            self.solve_leg(side, &root_rot, root_pos, foot, foot_heading, &mut theta)?;
        }
        let swing = 0.3 * (PI * s / self.cfg.step_length).cos();
        theta[SHOULDERS[0] - 1] = Rotation::about_x(swing) * Rotation::about_z(-1.2);
        theta[SHOULDERS[1] - 1] = Rotation::about_x(-swing) * Rotation::about_z(1.2);
        Ok(BodyPose { root_rot, root_pos, theta, stance })
    }

    /// Places the foot joint of `side` at `foot` with the foot flat and
    /// facing `foot_heading`. The knee bends about its local x axis and the
    /// hip takes the smallest rotation carrying the bent leg onto the
    /// ankle target.
    fn solve_leg(
        &self,
        side: usize,
        root_rot: &Rotation,
        root_pos: Vec3,
        foot: Vec3,
        foot_heading: f64,
        theta: &mut [Rotation],
    ) -> Result<(), CliError> {
        let [hip, knee, ankle, toe] = LEGS[side];
        let off = |j: usize| self.skel.joints()[j].offset;
        let foot_rot = Rotation::about_y(foot_heading);
        let ankle_target = foot - foot_rot.apply(off(toe));
        let hip_pos = root_pos + root_rot.apply(off(hip));
        let d = root_rot.inverse().apply(ankle_target - hip_pos);
        let (k, a) = (off(knee), off(ankle));

        let target = (d.norm_squared() - k.norm_squared() - a.norm_squared()) / 2.0 - k.x * a.x;
        let p = k.y * a.y + k.z * a.z;
        let q = k.z * a.y - k.y * a.z;
        let r = (p * p + q * q).sqrt();
        if target.is_nan() || target.abs() > r {
            return Err(CliError::BadConfig(format!(
                "leg cannot reach its foot target ({:.3} m); reduce step_length or pelvis_height",
                d.norm()
            )));
        }
        let bend = q.atan2(p) + (target / r).acos();
        let knee_rot = Rotation::about_x(bend);

        let v = k + knee_rot.apply(a);
        let (u, w) = (v.normalized(), d.normalized());
        let axis = u.cross(w);
        let hip_rot = if axis.norm() < 1e-15 {
            Rotation::identity()
        } else {
            Rotation::from_axis_angle(axis.normalized() * axis.norm().atan2(u.dot(w)))
        };
        theta[hip - 1] = hip_rot;
        theta[knee - 1] = knee_rot;
        theta[ankle - 1] = (*root_rot * hip_rot * knee_rot).inverse() * foot_rot;
        Ok(())
    }
}

fn camera_track(cfg: &SynthConfig, rng: &mut ChaCha8Rng, roots: &[Vec3]) -> (Vec<Rotation>, Vec<Vec3>) {
    let n = cfg.frames;
    let aim = |p: Vec3| Vec3::new(p.x, 0.9, p.z);
    match cfg.camera_mode {
        CameraMode::Static => {
            let center = roots[..n].iter().copied().sum::<Vec3>() / n as f64;
            let extent = roots[..n].iter().map(|p| (*p - center).horizontal().norm()).fold(0.0, f64::max);
            let dir = rng.random_range(-PI..PI);
            let eye = aim(center) + forward(dir) * (extent + 4.0) + Vec3::new(0.0, 0.6, 0.0);
            let roll = rng.random_range(-3.0..3.0_f64).to_radians();
            let r = look_at(eye, aim(center), roll);
            (vec![r; n], vec![eye; n])
        }
        CameraMode::Orbit => {
            let o = cfg.orbit;
            let phi0 = rng.random_range(-PI..PI);
            let roll_phase = rng.random_range(0.0..2.0 * PI);
            (0..n)
                .map(|t| {
                    let time = t as f64 / cfg.fps;
                    let phi = phi0 + 2.0 * PI * time / o.period_s;
                    let mut eye = roots[t] + forward(phi) * o.radius;
                    eye.y = o.height;
                    let roll = o.roll_deg.to_radians() * (2.0 * PI * time / (0.37 * o.period_s) + roll_phase).sin();
                    (look_at(eye, aim(roots[t]), roll), eye)
                })
                .unzip()
        }
        CameraMode::Handheld => {
            let h = cfg.handheld;
            let dir = rng.random_range(-PI..PI);
            let normal = Normal::new(0.0, h.sigma_deg.to_radians()).expect("finite sigma");
            let mut shake = Vec3::zeros();
            (0..n)
                .map(|t| {
                    if t > 0 {
                        let kick = Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
                        shake = shake * (1.0 - h.reversion) + kick;
                    }
                    let mut eye = roots[t] + forward(dir) * h.distance;
                    eye.y = h.height;
                    (Rotation::from_axis_angle(shake) * look_at(eye, aim(roots[t]), 0.0), eye)
                })
                .unzip()
        }
    }
}

/// Relative rotation with a random tilt (about an axis perpendicular to
/// gravity) and a random yaw (about gravity) applied on the left.
fn perturb(r: &Rotation, gravity_c: Vec3, noise: &NoiseConfig, rng: &mut ChaCha8Rng) -> Rotation {
    if noise.r_delta_tilt_deg == 0.0 && noise.r_delta_yaw_deg == 0.0 {
        return *r;
    }
    let g = gravity_c.normalized();
    let mut axis = Vec3::zeros();
    while axis.norm() < 1e-3 {
        let probe = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        axis = g.cross(probe);
    }
    let uniform = |rng: &mut ChaCha8Rng, max_deg: f64| if max_deg > 0.0 { rng.random_range(-max_deg..max_deg).to_radians() } else { 0.0 };
    let tilt = uniform(rng, noise.r_delta_tilt_deg);
    let yaw = uniform(rng, noise.r_delta_yaw_deg);
    Rotation::from_axis_angle(axis.normalized() * tilt) * Rotation::from_axis_angle(g * yaw) * *r
}

fn project(k: &CameraIntrinsics, r_w2c: &Rotation, eye: Vec3, p: Vec3) -> [f64; 2] {
    let c = r_w2c.apply(p - eye);
    let z = c.z.max(1e-3);
    [k.f * c.x / z + k.px, k.f * c.y / z + k.py]
}

/// Generates one sequence.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SynthBundle, CliError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.frames;
    let s_of = |t: usize| cfg.walk_speed * t as f64 / cfg.fps;
    let l = cfg.step_length;
    let path = WalkPath::random(&mut rng, cfg.turn, -4.0 * l, s_of(n) + 4.0 * l);
    let walker = Walker::new(cfg, path);
    let skel = &walker.skel;

    let poses = (0..=n).map(|t| walker.pose(s_of(t))).collect::<Result<Vec<_>, _>>()?;
    let joints: Vec<Vec<Vec3>> = poses[..n]
        .iter()
        .map(|p| forward_kinematics(skel, &p.root_rot, p.root_pos, &p.theta).expect("skeleton shapes match"))
        .collect();
    // A foot counts as in contact once it has been planted for a whole frame.
    let contact: Vec<[bool; 2]> = (0..n)
        .map(|t| {
            let s_prev = cfg.walk_speed * (t as f64 - 1.0) / cfg.fps;
            [0, 1].map(|side| poses[t].stance[side] && walker.foot(side, s_prev).2)
        })
        .collect();
    let probs: Vec<Vec<f64>> = contact
        .iter()
        .map(|c| CANDIDATE_SIDE.iter().map(|side| side.map_or(0.0, |s| if c[s] { 1.0 } else { 0.0 })).collect())
        .collect();

    let roots: Vec<Vec3> = poses.iter().map(|p| p.root_pos).collect();
    let (r_w2c, eyes) = camera_track(cfg, &mut rng, &roots);

    let gamma_w: Vec<Rotation> = poses[..n].iter().map(|p| p.root_rot).collect();
    let gamma_c: Vec<Rotation> = (0..n).map(|t| r_w2c[t] * gamma_w[t]).collect();
    let gamma_gv = (0..n)
        .map(|t| world_to_gv(&r_w2c[t], GRAVITY_W).map(|g| g * gamma_w[t]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::BadConfig(format!("camera looks straight along gravity: {e}")))?;
    let v_root: Vec<Vec3> = (0..n).map(|t| gamma_w[t].inverse().apply(roots[t + 1] - roots[t])).collect();

    let exact_rel = |t: usize| if t == 0 { Rotation::identity() } else { r_w2c[t] * r_w2c[t - 1].inverse() };
    let static_cam = cfg.camera_mode == CameraMode::Static;
    let relative: Vec<Rotation> = (0..n)
        .map(|t| {
            if t == 0 || static_cam && cfg.noise.r_delta_tilt_deg == 0.0 && cfg.noise.r_delta_yaw_deg == 0.0 {
                return Rotation::identity();
            }
            perturb(&exact_rel(t), r_w2c[t].apply(GRAVITY_W), &cfg.noise, &mut rng)
        })
        .collect();

    let jitter = Normal::new(0.0, cfg.noise.keypoint_px).expect("finite jitter");
    let keypoints: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|t| {
            joints[t]
                .iter()
                .map(|p| {
                    let [u, v] = project(&cfg.intrinsics, &r_w2c[t], eyes[t], *p);
                    if cfg.noise.keypoint_px > 0.0 {
                        [u + jitter.sample(&mut rng), v + jitter.sample(&mut rng)]
                    } else {
                        [u, v]
                    }
                })
                .collect()
        })
        .collect();

    let local: Vec<Vec<Rotation>> = poses[..n].iter().map(|p| p.theta.clone()).collect();
    let motion = MotionSequence {
        fps: cfg.fps,
        root_orientation: gamma_w.clone(),
        root_translation: roots[..n].to_vec(),
        local_rotations: local.clone(),
        joint_positions: Some(joints),
        stationary_probs: Some(probs.clone()),
    };
    let quats = |rs: &[Rotation]| rs.iter().map(quat_of).collect::<Vec<_>>();
    let camera = CameraFile {
        format: CAMERA_FORMAT.into(),
        fps: cfg.fps,
        intrinsics: cfg.intrinsics,
        gravity_cam0: point_of(r_w2c[0].apply(GRAVITY_W)),
        frames: n,
        world_to_camera: None,
        relative: Some(quats(&relative)),
    };
    let observations = ObservationsFile {
        format: OBSERVATIONS_FORMAT.into(),
        fps: cfg.fps,
        skeleton: SkeletonRef::default(),
        frames: n,
        gamma_gv: quats(&gamma_gv),
        gamma_c: quats(&gamma_c),
        v_root: v_root.iter().map(|v| point_of(*v)).collect(),
        local_rotations: Some(local.iter().map(|f| quats(f)).collect()),
        stationary_probs: Some(probs),
        keypoints_px: Some(keypoints),
    };
    let mut motion_file = MotionFile::from_motion(&motion, SkeletonRef::default());
    motion_file.format = MOTION_FORMAT.into();
    Ok(SynthBundle {
        format: SYNTH_FORMAT.into(),
        seed,
        config: *cfg,
        motion: motion_file,
        camera,
        camera_truth: quats(&r_w2c),
        camera_position: eyes.iter().map(|p| point_of(*p)).collect(),
        observations,
        contact,
    })
}
