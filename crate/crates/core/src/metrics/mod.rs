//! Camera-space and world-grounded motion metrics.
//!
//! Joint sequences are `frames × joints` positions in meters. Joint 0 is the
//! root. Millimetre metrics scale by 1000.

mod align;

use thiserror::Error;

pub use align::{fit_similarity, symmetric_eigen, umeyama_align, Similarity};

use crate::rotmath::Vector3;
use crate::scalar::Real;

/// Frames above the per-foot minimum height within this band count as contact.
pub const CONTACT_HEIGHT_M: f64 = 0.03;
pub const DEFAULT_SEGMENT_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("point configuration is degenerate (rank-deficient covariance)")]
    DegenerateConfiguration,
    #[error("sequence too short: need at least {needed} frames, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("ground-truth path length is zero")]
    ZeroPathLength,
    #[error("no contact frames")]
    NoContactFrames,
}

pub type JointSeq<T> = [Vec<Vector3<T>>];

fn mm<T: Real>(x: T) -> T {
    x * T::lit(1000.0)
}

fn check_same_shape<T: Real>(pred: &JointSeq<T>, gt: &JointSeq<T>) -> Result<(), MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::ShapeMismatch { what: "frames", expected: gt.len(), got: pred.len() });
    }
    for (p, g) in pred.iter().zip(gt) {
        if p.len() != g.len() {
            return Err(MetricsError::ShapeMismatch { what: "joints per frame", expected: g.len(), got: p.len() });
        }
    }
    Ok(())
}

fn need_frames(needed: usize, got: usize) -> Result<(), MetricsError> {
    if got < needed {
        Err(MetricsError::TooShort { needed, got })
    } else {
        Ok(())
    }
}

fn mean<T: Real>(values: impl Iterator<Item = T>) -> T {
    let (sum, n) = values.fold((T::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        T::zero()
    } else {
        sum / T::from_usize_lossy(n)
    }
}

/// Mean joint error after subtracting each frame's root, mm.
pub fn mpjpe<T: Real>(pred: &JointSeq<T>, gt: &JointSeq<T>) -> Result<T, MetricsError> {
    check_same_shape(pred, gt)?;
    let errs = pred.iter().zip(gt).flat_map(|(p, g)| {
        let (pr, gr) = (p[0], g[0]);
        p.iter().zip(g).map(move |(a, b)| ((*a - pr) - (*b - gr)).norm())
    });
    Ok(mm(mean(errs)))
}

/// Mean joint error after a per-frame similarity alignment, mm.
pub fn pa_mpjpe<T: Real>(pred: &JointSeq<T>, gt: &JointSeq<T>) -> Result<T, MetricsError> {
    check_same_shape(pred, gt)?;
    let mut errs = Vec::new();
    for (p, g) in pred.iter().zip(gt) {
        let s = fit_similarity(p, g, true);
        errs.extend(p.iter().zip(g).map(|(a, b)| (s.apply(*a) - *b).norm()));
    }
    Ok(mm(mean(errs.into_iter())))
}

fn second_difference<T: Real>(seq: &JointSeq<T>, t: usize, j: usize) -> Vector3<T> {
    seq[t + 1][j] - seq[t][j] * T::two() + seq[t - 1][j]
}

fn third_difference<T: Real>(seq: &JointSeq<T>, t: usize, j: usize) -> Vector3<T> {
    let three = T::lit(3.0);
    seq[t + 3][j] - seq[t + 2][j] * three + seq[t + 1][j] * three - seq[t][j]
}

/// Mean norm of the difference of second finite differences, m/s².
pub fn accel_error<T: Real>(pred: &JointSeq<T>, gt: &JointSeq<T>, fps: T) -> Result<T, MetricsError> {
    check_same_shape(pred, gt)?;
    need_frames(3, pred.len())?;
    let joints = pred[0].len();
    let errs = (1..pred.len() - 1)
        .flat_map(|t| (0..joints).map(move |j| (t, j)))
        .map(|(t, j)| (second_difference(pred, t, j) - second_difference(gt, t, j)).norm());
    Ok(mean(errs) * fps * fps)
}

/// Mean norm of the third finite difference, m/s³.
pub fn jitter<T: Real>(joints: &JointSeq<T>, fps: T) -> Result<T, MetricsError> {
    need_frames(4, joints.len())?;
    let n = joints[0].len();
    let vals = (0..joints.len() - 3)
        .flat_map(|t| (0..n).map(move |j| (t, j)))
        .map(|(t, j)| third_difference(joints, t, j).norm());
    Ok(mean(vals) * fps * fps * fps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Rigid fit on the whole segment (WA-MPJPE).
    Whole,
    /// Rigid fit on the segment's first two frames (W-MPJPE).
    FirstTwo,
}

/// `(start, end)` of consecutive segments; a tail shorter than two frames
/// is dropped.
pub fn segments(len: usize, segment_len: usize) -> Vec<(usize, usize)> {
    let segment_len = segment_len.max(2);
    (0..len)
        .step_by(segment_len)
        .map(|s| (s, (s + segment_len).min(len)))
        .filter(|(s, e)| e - s >= 2)
        .collect()
}

/// Segment-wise world MPJPE, mm, pooled over all frames of all segments.
pub fn segmented_world_mpjpe<T: Real>(
    pred: &JointSeq<T>,
    gt: &JointSeq<T>,
    segment_len: usize,
    mode: AlignMode,
) -> Result<T, MetricsError> {
    check_same_shape(pred, gt)?;
    need_frames(2, pred.len())?;
    let mut errs = Vec::new();
    for (s, e) in segments(pred.len(), segment_len) {
        let fit_end = match mode {
            AlignMode::Whole => e,
            AlignMode::FirstTwo => s + 2,
        };
        let p: Vec<Vector3<T>> = pred[s..fit_end].iter().flatten().copied().collect();
        let g: Vec<Vector3<T>> = gt[s..fit_end].iter().flatten().copied().collect();
        let fit = fit_similarity(&p, &g, false);
        for t in s..e {
            errs.extend(pred[t].iter().zip(&gt[t]).map(|(a, b)| (fit.apply(*a) - *b).norm()));
        }
    }
    Ok(mm(mean(errs.into_iter())))
}

/// Root translation error: mean error after a rigid fit of the whole root
/// track, as a percentage of the ground-truth path length.
pub fn rte<T: Real>(pred_root: &[Vector3<T>], gt_root: &[Vector3<T>]) -> Result<T, MetricsError> {
    if pred_root.len() != gt_root.len() {
        return Err(MetricsError::ShapeMismatch { what: "frames", expected: gt_root.len(), got: pred_root.len() });
    }
    need_frames(2, gt_root.len())?;
    let path: T = gt_root.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if path <= T::zero() {
        return Err(MetricsError::ZeroPathLength);
    }
    let fit = fit_similarity(pred_root, gt_root, false);
    let err = mean(pred_root.iter().zip(gt_root).map(|(p, g)| (fit.apply(*p) - *g).norm()));
    Ok(err / path * T::lit(100.0))
}

/// Where foot contact comes from.
pub enum ContactSource<'a, T> {
    /// `frames × feet` ground-truth contact flags.
    Mask(&'a [Vec<bool>]),
    /// Ground-truth foot positions (y up); contact while a foot is within
    /// [`CONTACT_HEIGHT_M`] of its lowest height in the sequence.
    Heights(&'a JointSeq<T>),
}

/// Contact mask derived from foot heights.
pub fn contact_from_heights<T: Real>(feet: &JointSeq<T>) -> Vec<Vec<bool>> {
    let n = feet.first().map_or(0, Vec::len);
    let floor: Vec<T> = (0..n).map(|k| feet.iter().map(|f| f[k].y).fold(T::infinity(), T::min)).collect();
    feet.iter()
        .map(|f| f.iter().zip(&floor).map(|(p, m)| p.y - *m < T::lit(CONTACT_HEIGHT_M)).collect())
        .collect()
}

/// Mean horizontal (xz) displacement of predicted feet between consecutive
/// frames in which the foot is in ground-truth contact, mm.
pub fn foot_sliding<T: Real>(pred_feet: &JointSeq<T>, contact: ContactSource<'_, T>) -> Result<T, MetricsError> {
    let mask = match contact {
        ContactSource::Mask(m) => m.to_vec(),
        ContactSource::Heights(gt) => {
            check_same_shape(pred_feet, gt)?;
            contact_from_heights(gt)
        }
    };
    if mask.len() != pred_feet.len() {
        return Err(MetricsError::ShapeMismatch { what: "contact frames", expected: pred_feet.len(), got: mask.len() });
    }
    let mut disp = Vec::new();
    for t in 1..pred_feet.len() {
        for k in 0..pred_feet[t].len() {
            if mask[t][k] && mask[t - 1][k] {
                disp.push((pred_feet[t][k] - pred_feet[t - 1][k]).horizontal().norm());
            }
        }
    }
    if disp.is_empty() {
        return Err(MetricsError::NoContactFrames);
    }
    Ok(mm(mean(disp.into_iter())))
}

/// Every metric for one sequence. `None` marks a metric whose
/// precondition failed (for example no contact frames).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub pa_mpjpe_mm: Option<f64>,
    pub mpjpe_mm: Option<f64>,
    pub accel_m_s2: Option<f64>,
    pub wa_mpjpe_100_mm: Option<f64>,
    pub w_mpjpe_100_mm: Option<f64>,
    pub rte_percent: Option<f64>,
    pub jitter_m_s3: Option<f64>,
    pub foot_sliding_mm: Option<f64>,
    pub segment_len: usize,
}

pub struct EvalInputs<'a, T> {
    pub pred: &'a JointSeq<T>,
    pub gt: &'a JointSeq<T>,
    pub fps: T,
    pub segment_len: usize,
    /// Indices of the joints evaluated for foot sliding.
    pub feet: &'a [usize],
    /// `frames × feet` contact flags; heights are used when absent.
    pub contact: Option<&'a [Vec<bool>]>,
}

/// Computes the full report.
///
/// Prediction and ground truth may live in different world gauges, so the
/// camera-style metrics (MPJPE, PA-MPJPE, Accel) are taken after one rigid
/// alignment of the whole predicted sequence. World metrics apply their
/// own segment or trajectory alignment.
pub fn evaluate<T: Real>(inputs: &EvalInputs<'_, T>) -> Result<MetricsReport, MetricsError> {
    let (pred, gt) = (inputs.pred, inputs.gt);
    check_same_shape(pred, gt)?;
    need_frames(2, pred.len())?;
    let all_p: Vec<Vector3<T>> = pred.iter().flatten().copied().collect();
    let all_g: Vec<Vector3<T>> = gt.iter().flatten().copied().collect();
    let fit = fit_similarity(&all_p, &all_g, false);
    let aligned: Vec<Vec<Vector3<T>>> = pred.iter().map(|f| f.iter().map(|p| fit.apply(*p)).collect()).collect();

    let f = |r: Result<T, MetricsError>| r.ok().map(|v| v.as_f64());
    let pred_root: Vec<Vector3<T>> = pred.iter().map(|f| f[0]).collect();
    let gt_root: Vec<Vector3<T>> = gt.iter().map(|f| f[0]).collect();
    let pick = |seq: &JointSeq<T>| -> Vec<Vec<Vector3<T>>> {
        seq.iter().map(|f| inputs.feet.iter().map(|&k| f[k]).collect()).collect()
    };
    let pred_feet = pick(pred);
    let gt_feet = pick(gt);
    let foot = match inputs.contact {
        Some(mask) => foot_sliding(&pred_feet, ContactSource::Mask(mask)),
        None => foot_sliding(&pred_feet, ContactSource::Heights(&gt_feet)),
    };
    Ok(MetricsReport {
        pa_mpjpe_mm: f(pa_mpjpe(&aligned, gt)),
        mpjpe_mm: f(mpjpe(&aligned, gt)),
        accel_m_s2: f(accel_error(&aligned, gt, inputs.fps)),
        wa_mpjpe_100_mm: f(segmented_world_mpjpe(pred, gt, inputs.segment_len, AlignMode::Whole)),
        w_mpjpe_100_mm: f(segmented_world_mpjpe(pred, gt, inputs.segment_len, AlignMode::FirstTwo)),
        rte_percent: f(rte(&pred_root, &gt_root)),
        jitter_m_s3: f(jitter(pred, inputs.fps)),
        foot_sliding_mm: f(foot),
        segment_len: inputs.segment_len,
    })
}
