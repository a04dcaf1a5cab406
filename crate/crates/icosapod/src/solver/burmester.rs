//! The seven-pose sphere system: point pairs (a, b) whose distance is the
//! same in all seven given poses.
//!
//! Subtracting the first pose's sphere condition from the other six leaves
//! six bilinear equations in (a, b); their solution set has at most 20
//! points, attained for generic poses.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use super::poly::{Poly, PolySystem};
use super::track::{track_total_degree, TrackOptions};
use super::SolverError;
use crate::study::StudyPoint;

#[derive(Debug, Clone)]
pub struct BurmesterSolution {
    pub a: Vector3<Complex64>,
    pub b: Vector3<Complex64>,
    /// Squared distance, evaluated in the first pose.
    pub d2: Complex64,
    pub real: bool,
    pub multiplicity: usize,
    pub conjugate: Option<usize>,
}

/// Solves the seven-pose system; poses must have h != 0 and span a
/// six-dimensional projective subspace.
pub fn solve_burmester(
    poses: &[StudyPoint; 7],
    seed: u64,
    opts: &TrackOptions,
) -> Result<Vec<BurmesterSolution>, SolverError> {
    for p in poses {
        let scale = p.coords().iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        if p.h.abs() < 1e-12 * scale.max(1e-300) {
            return Err(SolverError::DegeneratePoses);
        }
    }
    let mat = DMatrix::from_fn(7, 17, |i, j| {
        let c = poses[i].coords();
        let n: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c[j] / n
    });
    let sv = mat.svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smin < 1e-8 * smax {
        return Err(SolverError::DegeneratePoses);
    }

    let norm: Vec<StudyPoint> = poses.iter().map(|p| p.scaled(1.0 / p.h)).collect();
    // variables (a1, a2, a3, b1, b2, b3)
    let mut polys = Vec::new();
    for k in 1..7 {
        let mut p = Poly::constant(6, Complex64::new(norm[k].r - norm[0].r, 0.0));
        let dx = norm[k].x - norm[0].x;
        let dy = norm[k].y - norm[0].y;
        let dm = norm[k].m - norm[0].m;
        for j in 0..3 {
            let mut e = vec![0u32; 6];
            e[j] = 1;
            p.add_term(e, Complex64::new(-2.0 * dx[j], 0.0));
        }
        for i in 0..3 {
            let mut e = vec![0u32; 6];
            e[3 + i] = 1;
            p.add_term(e, Complex64::new(-2.0 * dy[i], 0.0));
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut e = vec![0u32; 6];
                e[j] += 1;
                e[3 + i] += 1;
                p.add_term(e, Complex64::new(-2.0 * dm[(i, j)], 0.0));
            }
        }
        polys.push(p);
    }
    let sys = PolySystem::new(polys)?;

    let mut report = None;
    for attempt in 0..=opts.max_retries {
        let sub = seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let r = track_total_degree(&sys, sub, opts)?;
        if r.failed_fraction() <= 0.10 {
            report = Some(r);
            break;
        }
    }
    let report = report.ok_or(SolverError::TrackingLost(opts.max_retries))?;

    let sigma1 = |a: &Vector3<Complex64>| -> Vector3<Complex64> {
        Vector3::from_fn(|i, _| {
            (0..3)
                .map(|j| a[j] * norm[0].m[(i, j)])
                .sum::<Complex64>()
                + Complex64::new(norm[0].y[i], 0.0)
        })
    };
    let out = report
        .clusters
        .iter()
        .map(|cl| {
            let a = Vector3::new(
                cl.representative[0],
                cl.representative[1],
                cl.representative[2],
            );
            let b = Vector3::new(
                cl.representative[3],
                cl.representative[4],
                cl.representative[5],
            );
            let diff = sigma1(&a) - b;
            let d2 = diff.iter().map(|c| c * c).sum::<Complex64>();
            let real = cl
                .representative
                .iter()
                .all(|c| c.im.abs() < opts.tol_real * (1.0 + c.norm()));
            BurmesterSolution {
                a,
                b,
                d2,
                real,
                multiplicity: cl.multiplicity,
                conjugate: cl.conjugate,
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::embed_isometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng) -> StudyPoint {
        let rot = nalgebra::Rotation3::from_euler_angles(
            rng.gen::<f64>() * 3.0,
            rng.gen::<f64>() * 3.0,
            rng.gen::<f64>() * 3.0,
        );
        let t = nalgebra::Vector3::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
        embed_isometry(rot.matrix(), &t).unwrap()
    }

    #[test]
    fn identical_poses_rejected() {
        let p = StudyPoint::IDENTITY;
        let poses = [
            p.clone(),
            p.clone(),
            p.clone(),
            p.clone(),
            p.clone(),
            p.clone(),
            p,
        ];
        assert_eq!(
            solve_burmester(&poses, 1, &TrackOptions::default()).unwrap_err(),
            SolverError::DegeneratePoses
        );
    }

    #[test]
    fn random_poses_give_twenty() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let poses: [StudyPoint; 7] = std::array::from_fn(|_| random_pose(&mut rng));
        let sols = solve_burmester(&poses, 6, &TrackOptions::default()).unwrap();
        let mult: usize = sols.iter().map(|s| s.multiplicity).sum();
        assert_eq!(mult, 20);
        let real: usize = sols.iter().filter(|s| s.real).map(|s| s.multiplicity).sum();
        assert_eq!(real % 2, 0, "real count is even by conjugation");
        for s in &sols {
            if !s.real {
                assert!(s.conjugate.is_some());
            }
        }
        // every real solution really is at fixed distance in all seven poses
        for s in sols.iter().filter(|s| s.real) {
            let a = s.a.map(|c| c.re);
            let b = s.b.map(|c| c.re);
            for p in &poses {
                let r = crate::study::sphere_residual(p, &a, &b, s.d2.re);
                assert!(r.abs() < 1e-6, "sphere residual {r:.3e}");
            }
        }
    }
}
