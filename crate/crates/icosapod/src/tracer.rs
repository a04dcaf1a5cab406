//! Numerical tracing of the one-parameter line-symmetric self-motion of a
//! pod: pseudo-arclength continuation in the space of lines (c, u) with the
//! gauges |u| = 1 and c . u = 0, a Gauss-Newton corrector over all leg
//! conditions at once, residual monitoring, and CSV export.

use nalgebra::{DMatrix, DVector, Vector3};
use std::io::{self, Write};
use thiserror::Error;

use crate::legspace::Leg;
use crate::study::{line_to_halfturn, sphere_residual, LineR3, StudyPoint};

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Every emitted sample keeps all leg residuals below this.
    pub tol_trace: f64,
    pub step_init: f64,
    pub step_max: f64,
    pub step_min: f64,
    pub max_corrector: usize,
    /// Record the half-turn images of the platform points per sample.
    pub record_images: bool,
    /// +1.0 or -1.0: which way along the initial tangent to go.
    pub direction: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            tol_trace: 1e-9,
            step_init: 1e-3,
            step_max: 5e-2,
            step_min: 1e-10,
            max_corrector: 8,
            record_images: true,
            direction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Returned to the start line after at least 10 steps.
    Closed,
    StepLimit,
    /// The constraint Jacobian's corank left 1; the motion changes character.
    CorankChange,
}

#[derive(Debug, Clone)]
pub struct MotionSample {
    /// Accumulated chordal arclength in (c, u).
    pub s: f64,
    pub line: LineR3,
    pub sigma: StudyPoint,
    /// Per-leg sphere residuals at sigma.
    pub residuals: Vec<f64>,
    /// Half-turn images of the platform points, one per leg.
    pub platform_images: Option<Vec<Vector3<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<MotionSample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn max_residual(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.residuals.iter())
            .fold(0.0, |a, r| a.max(r.abs()))
    }

    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("start violates the leg conditions (residual {0:.3e})")]
    StartResidual(f64),
    #[error("constraint Jacobian at the start has corank {corank}, need exactly 1")]
    RankDeficientStart { corank: usize },
    #[error("corrector diverged after {} good samples", trajectory.samples.len())]
    CorrectorDivergence { trajectory: Trajectory },
    #[error("trajectory has {have} samples, need at least {want}")]
    TooShort { have: usize, want: usize },
}

/// Image of p under the half-turn about the (not necessarily unit) line (c, u).
fn halfturn_image(c: &Vector3<f64>, u: &Vector3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    let w = p - c;
    let n2 = u.norm_squared();
    let s = w.dot(u);
    2.0 * c + (2.0 * s / n2) * u - p
}

/// Leg conditions followed by the two gauge rows.
fn residual_vec(legs: &[Leg], q: &DVector<f64>) -> DVector<f64> {
    let c = Vector3::new(q[0], q[1], q[2]);
    let u = Vector3::new(q[3], q[4], q[5]);
    let mut r = DVector::zeros(legs.len() + 2);
    for (i, leg) in legs.iter().enumerate() {
        let e = halfturn_image(&c, &u, &leg.a) - leg.b;
        r[i] = e.norm_squared() - leg.d2;
    }
    r[legs.len()] = u.norm_squared() - 1.0;
    r[legs.len() + 1] = c.dot(&u);
    r
}

fn jacobian(legs: &[Leg], q: &DVector<f64>) -> DMatrix<f64> {
    let c = Vector3::new(q[0], q[1], q[2]);
    let u = Vector3::new(q[3], q[4], q[5]);
    let n2 = u.norm_squared();
    let mut j = DMatrix::zeros(legs.len() + 2, 6);
    for (i, leg) in legs.iter().enumerate() {
        let w = leg.a - c;
        let s = w.dot(&u);
        let e = halfturn_image(&c, &u, &leg.a) - leg.b;
        let eu = e.dot(&u);
        let dc = 4.0 * e - (4.0 / n2) * eu * u;
        let du = (4.0 / n2) * (eu * w + s * e) - (8.0 * s * eu / (n2 * n2)) * u;
        for k in 0..3 {
            j[(i, k)] = dc[k];
            j[(i, 3 + k)] = du[k];
        }
    }
    for k in 0..3 {
        j[(legs.len(), 3 + k)] = 2.0 * u[k];
        j[(legs.len() + 1, k)] = u[k];
        j[(legs.len() + 1, 3 + k)] = c[k];
    }
    j
}

/// (corank, unit kernel direction) of the constraint Jacobian.
fn tangent_and_corank(legs: &[Leg], q: &DVector<f64>) -> (usize, DVector<f64>) {
    let j = jacobian(legs, q);
    let svd = j.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s)).max(1e-300);
    let provided = sv.len();
    let vanished = (0..provided).filter(|&i| sv[i] <= 1e-6 * smax).count();
    // fewer than 6 rows leaves 6 - provided directions unconstrained outright
    let corank = vanished + 6usize.saturating_sub(provided);
    let t = vt.row(vt.nrows() - 1).transpose();
    (corank, t)
}

fn correct(
    legs: &[Leg],
    q: &mut DVector<f64>,
    opts: &TraceOptions,
) -> Option<usize> {
    for iter in 0..=opts.max_corrector {
        let r = residual_vec(legs, q);
        if r.amax() < opts.tol_trace {
            return Some(iter);
        }
        if iter == opts.max_corrector {
            break;
        }
        let j = jacobian(legs, q);
        // minimal-norm Gauss-Newton step: orthogonal to the kernel, so the
        // corrector cannot slide along the curve
        let delta = j.svd(true, true).solve(&(-&r), 1e-12).ok()?;
        if !delta.iter().all(|d| d.is_finite()) {
            return None;
        }
        *q += delta;
    }
    None
}

fn emit(legs: &[Leg], q: &DVector<f64>, s: f64, opts: &TraceOptions) -> MotionSample {
    let c = Vector3::new(q[0], q[1], q[2]);
    let u = Vector3::new(q[3], q[4], q[5]);
    let line = LineR3::new(c, u).expect("gauged direction is unit");
    let sigma = line_to_halfturn(&line);
    let residuals: Vec<f64> =
        legs.iter().map(|l| sphere_residual(&sigma, &l.a, &l.b, l.d2)).collect();
    let platform_images = if opts.record_images {
        Some(legs.iter().map(|l| halfturn_image(&c, &u, &l.a)).collect())
    } else {
        None
    };
    MotionSample { s, line, sigma, residuals, platform_images }
}

/// Pseudo-arclength continuation of the self-motion through `start`.
/// Stops at the step count, on closure (back at the start line after at
/// least 10 steps), or when the constraint corank leaves 1.
pub fn trace(
    legs: &[Leg],
    start: &LineR3,
    steps: usize,
    opts: &TraceOptions,
) -> Result<Trajectory, TraceError> {
    let mut q = DVector::zeros(6);
    for k in 0..3 {
        q[k] = start.c()[k];
        q[3 + k] = start.u()[k];
    }
    let r0 = residual_vec(legs, &q).amax();
    if r0 >= 1e-8 {
        return Err(TraceError::StartResidual(r0));
    }
    if correct(legs, &mut q, opts).is_none() {
        return Err(TraceError::StartResidual(r0));
    }
    let (corank, mut tangent) = tangent_and_corank(legs, &q);
    if corank != 1 {
        return Err(TraceError::RankDeficientStart { corank });
    }
    tangent *= opts.direction;

    let start_line = LineR3::new(
        Vector3::new(q[0], q[1], q[2]),
        Vector3::new(q[3], q[4], q[5]),
    )
    .expect("unit direction");
    let mut samples = vec![emit(legs, &q, 0.0, opts)];
    let mut s = 0.0;
    let mut h = opts.step_init;

    for _ in 0..steps {
        let mut accepted: Option<(DVector<f64>, usize)> = None;
        while h >= opts.step_min {
            let mut trial = &q + &tangent * h;
            match correct(legs, &mut trial, opts) {
                Some(iters) => {
                    // reject steps that moved further than the cap allows
                    if (&trial - &q).norm() <= 2.0 * opts.step_max {
                        accepted = Some((trial, iters));
                        break;
                    }
                    h *= 0.5;
                }
                None => h *= 0.5,
            }
        }
        let Some((new_q, iters)) = accepted else {
            return Err(TraceError::CorrectorDivergence {
                trajectory: Trajectory { samples, termination: Termination::StepLimit },
            });
        };
        let (corank, mut new_tangent) = tangent_and_corank(legs, &new_q);
        if corank != 1 {
            return Ok(Trajectory { samples, termination: Termination::CorankChange });
        }
        if new_tangent.dot(&tangent) < 0.0 {
            new_tangent = -new_tangent;
        }
        s += (&new_q - &q).norm();
        q = new_q;
        tangent = new_tangent;
        samples.push(emit(legs, &q, s, opts));
        if iters <= 3 {
            h = (h * 1.5).min(opts.step_max);
        } else if iters >= 6 {
            h *= 0.5;
        }
        if samples.len() > 10 {
            let d_start = samples.last().unwrap().line.distance(&start_line);
            if d_start < 1e-6 {
                return Ok(Trajectory { samples, termination: Termination::Closed });
            }
            // funnel into the start instead of stepping over it
            if d_start < 2.0 * h {
                h = (0.5 * d_start).max(10.0 * opts.step_min);
            }
        }
    }
    Ok(Trajectory { samples, termination: Termination::StepLimit })
}

/// k poses spread over the trajectory, even in arclength; the first is the
/// start pose.
pub fn sample_poses(traj: &Trajectory, k: usize) -> Result<Vec<StudyPoint>, TraceError> {
    let n = traj.samples.len();
    if n < k || k == 0 {
        return Err(TraceError::TooShort { have: n, want: k.max(1) });
    }
    let total = traj.length();
    // on a closed loop the two endpoints are the same pose, so spread
    // periodically; on an open arc include both ends
    let denom = if traj.termination == Termination::Closed { k } else { k.max(2) - 1 };
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    for j in 0..k {
        let target = if k == 1 { 0.0 } else { total * j as f64 / denom as f64 };
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for (i, sm) in traj.samples.iter().enumerate() {
            let gap = (sm.s - target).abs();
            if gap < best_gap && !picked.contains(&i) {
                best = i;
                best_gap = gap;
            }
        }
        picked.push(best);
    }
    picked.sort_unstable();
    Ok(picked.iter().map(|&i| traj.samples[i].sigma.clone()).collect())
}

/// Writes `s,c1,c2,c3,u1,u2,u3` plus three image columns per platform point,
/// all floats with 17 significant digits so a reader recovers them bit-exactly.
pub fn export_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let n_img = traj
        .samples
        .first()
        .and_then(|s| s.platform_images.as_ref().map(|v| v.len()))
        .unwrap_or(0);
    write!(w, "s,c1,c2,c3,u1,u2,u3")?;
    for i in 1..=n_img {
        write!(w, ",p{i}_x,p{i}_y,p{i}_z")?;
    }
    writeln!(w)?;
    for sm in &traj.samples {
        write!(w, "{:.16e}", sm.s)?;
        for v in [sm.line.c(), sm.line.u()] {
            for k in 0..3 {
                write!(w, ",{:.16e}", v[k])?;
            }
        }
        if let Some(images) = &sm.platform_images {
            for p in images {
                for k in 0..3 {
                    write!(w, ",{:.16e}", p[k])?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{example_legs, example_line};

    #[test]
    fn one_leg_motion_is_underdetermined() {
        let legs = &example_legs()[..1];
        let err = trace(legs, &example_line(), 10, &TraceOptions::default()).unwrap_err();
        assert!(matches!(err, TraceError::RankDeficientStart { corank } if corank > 1));
    }

    #[test]
    fn wrong_start_is_rejected() {
        let legs = example_legs();
        let line = LineR3::new(
            Vector3::new(0.3, 0.1, -0.2),
            Vector3::new(0.0, 1.0, 0.5),
        )
        .unwrap();
        assert!(matches!(
            trace(&legs, &line, 10, &TraceOptions::default()),
            Err(TraceError::StartResidual(_))
        ));
    }

    #[test]
    fn example_legs_trace_with_tiny_residuals() {
        let legs = example_legs();
        let traj = trace(&legs, &example_line(), 220, &TraceOptions::default()).unwrap();
        assert!(traj.samples.len() >= 200 || traj.termination == Termination::Closed);
        assert!(traj.max_residual() < 1e-9, "max residual {:.3e}", traj.max_residual());
        let mut prev_s = -1.0;
        for pair in traj.samples.windows(2) {
            assert!(pair[1].s > pair[0].s);
            assert!(pair[0].line.distance(&pair[1].line) <= 2.0 * 5e-2 + 1e-9);
            assert!(pair[1].s > prev_s);
            prev_s = pair[1].s;
        }
        for sm in &traj.samples {
            assert!(crate::study::is_involution_point(&sm.sigma, 1e-8));
        }
        // swap-paired legs keep equal residuals along the motion
        for sm in &traj.samples {
            for k in 0..3 {
                assert!((sm.residuals[k] - sm.residuals[k + 3]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversal_traverses_the_same_curve() {
        let legs = example_legs();
        let fwd = trace(&legs, &example_line(), 60, &TraceOptions::default()).unwrap();
        let bwd = trace(
            &legs,
            &example_line(),
            60,
            &TraceOptions { direction: -1.0, ..TraceOptions::default() },
        )
        .unwrap();
        // same 1-dimensional solution set: the union of both runs stays on
        // the curve; end lines differ since the arcs extend opposite ways
        assert!(fwd.max_residual() < 1e-9 && bwd.max_residual() < 1e-9);
        let d_start = fwd.samples[0].line.distance(&bwd.samples[0].line);
        assert!(d_start < 1e-9);
        if fwd.termination == Termination::StepLimit
            && bwd.termination == Termination::StepLimit
        {
            let d_end = fwd
                .samples
                .last()
                .unwrap()
                .line
                .distance(&bwd.samples.last().unwrap().line);
            assert!(d_end > 1e-3, "opposite directions separated only {d_end:.3e}");
        }
    }

    #[test]
    fn pose_sampling_spreads_and_guards() {
        let legs = example_legs();
        let traj = trace(&legs, &example_line(), 120, &TraceOptions::default()).unwrap();
        assert!(matches!(
            sample_poses(&traj, traj.samples.len() + 1),
            Err(TraceError::TooShort { .. })
        ));
        let one = sample_poses(&traj, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].coords().iter().zip(traj.samples[0].sigma.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)) < 1e-12);
        let seven = sample_poses(&traj, 7).unwrap();
        assert_eq!(seven.len(), 7);
        // seven poses of an icosapod motion span a 6-dimensional projective space
        let rows = DMatrix::from_fn(7, 17, |i, j| {
            let c = seven[i].coords();
            let norm: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c[j] / norm
        });
        let sv = rows.svd(false, false).singular_values;
        assert!(sv[6] / sv[0] > 1e-8, "rank ratio {:.3e}", sv[6] / sv[0]);
    }

    #[test]
    fn csv_shape_and_empty() {
        let legs = example_legs();
        let traj = trace(&legs, &example_line(), 2, &TraceOptions::default()).unwrap();
        let mut buf = Vec::new();
        export_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), traj.samples.len() + 1);
        assert!(lines[0].starts_with("s,c1,c2,c3,u1,u2,u3,p1_x"));
        assert_eq!(lines[0].split(',').count(), 7 + 3 * legs.len());

        let empty = Trajectory { samples: vec![], termination: Termination::StepLimit };
        let mut buf = Vec::new();
        export_csv(&empty, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,c1,c2,c3,u1,u2,u3\n");
    }
}
