//! Total-degree homotopy tracking with an RK4 predictor on the Davidenko
//! system and a Newton corrector.
//!
//! Every solve runs twice with independent path constants. A genuinely
//! zero-dimensional solution set gives the same endpoints both times; points
//! smeared along a positive-dimensional component follow the path constant,
//! and a bidirectional mismatch of singular endpoints is reported as such.
//! The second pass doubles as insurance against isolated path loss: its
//! unmatched regular endpoints are merged into the result.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cluster::{
    canonical_cmp, dist, group_endpoints, is_real_after_scaling, pair_conjugates,
    SolutionCluster,
};
use super::poly::PolySystem;
use super::SolverError;

#[derive(Debug, Clone)]
pub struct TrackOptions {
    /// Corrector and backward-residual target (relative).
    pub tol_track: f64,
    /// Max imaginary part accepted as real, after canonical scaling.
    pub tol_real: f64,
    /// Endpoint merge distance.
    pub tol_cluster: f64,
    /// Per-path step budget.
    pub max_steps: usize,
    /// Norm beyond which a path is declared divergent.
    pub infinity: f64,
    /// Whole-solve restarts granted to the callers on excessive path failure.
    pub max_retries: usize,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            tol_track: 1e-10,
            tol_real: 1e-8,
            tol_cluster: 1e-6,
            max_steps: 5_000,
            infinity: 1e8,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackReport {
    pub clusters: Vec<SolutionCluster>,
    pub paths_total: usize,
    pub paths_failed: usize,
    pub paths_infinite: usize,
}

impl TrackReport {
    pub fn multiplicity_sum(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }

    pub fn failed_fraction(&self) -> f64 {
        self.paths_failed as f64 / self.paths_total.max(1) as f64
    }
}

enum PathEnd {
    Finite(Vec<Complex64>),
    Infinite,
    Failed,
}

/// Start-system value g_i = x_i^{d_i} - 1 and its diagonal Jacobian.
fn start_eval(degs: &[u32], x: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(
        degs.len(),
        degs.iter().zip(x.iter()).map(|(&d, xi)| xi.powu(d) - Complex64::new(1.0, 0.0)),
    )
}

fn start_jac(degs: &[u32], x: &DVector<Complex64>) -> DMatrix<Complex64> {
    let n = degs.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(degs[i] as f64, 0.0) * x[i].powu(degs[i] - 1)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

struct Homotopy<'a> {
    sys: &'a PolySystem,
    gamma: Complex64,
}

impl Homotopy<'_> {
    fn h(&self, x: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let xs = x.as_slice();
        let f = self.sys.eval(xs);
        let g = start_eval(self.sys.degrees(), x);
        f * Complex64::new(t, 0.0) + g * (self.gamma * (1.0 - t))
    }

    fn h_x(&self, x: &DVector<Complex64>, t: f64) -> DMatrix<Complex64> {
        let jf = self.sys.jacobian(x.as_slice());
        let jg = start_jac(self.sys.degrees(), x);
        jf * Complex64::new(t, 0.0) + jg * (self.gamma * (1.0 - t))
    }

    /// dH/dt = F - gamma G, independent of t.
    fn h_t(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let f = self.sys.eval(x.as_slice());
        let g = start_eval(self.sys.degrees(), x);
        f - g * self.gamma
    }

    /// Davidenko velocity dx/dt = -H_x^{-1} H_t.
    fn velocity(&self, x: &DVector<Complex64>, t: f64) -> Option<DVector<Complex64>> {
        self.h_x(x, t).lu().solve(&(-self.h_t(x)))
    }
}

/// Newton refinement on the target system, keeping the best residual seen.
fn polish(sys: &PolySystem, x0: &DVector<Complex64>, iters: usize) -> (DVector<Complex64>, f64) {
    let mut x = x0.clone();
    let mut best = x.clone();
    let mut best_r = sys.rel_residual(x.as_slice());
    for _ in 0..iters {
        let f = sys.eval(x.as_slice());
        let delta = match sys.jacobian(x.as_slice()).lu().solve(&(-f)) {
            Some(d) => d,
            None => break,
        };
        x += &delta;
        let r = sys.rel_residual(x.as_slice());
        if r < best_r {
            best_r = r;
            best.copy_from(&x);
        }
        if delta.norm() < 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    (best, best_r)
}

/// A path that stops short of t = 1 is divergent rather than merely lost when
/// its norm is outright huge, or large and still growing late in the homotopy
/// (deficient systems shed excess paths toward infinity slowly).
fn classify_stall(x: &DVector<Complex64>, norm_late: f64) -> PathEnd {
    let n = x.norm();
    let grew = norm_late.is_finite() && n > 4.0 * norm_late;
    if n > 1e5 || (n > 1e3 && grew) {
        PathEnd::Infinite
    } else {
        PathEnd::Failed
    }
}

fn track_one(
    sys: &PolySystem,
    gamma: Complex64,
    start: DVector<Complex64>,
    opts: &TrackOptions,
) -> PathEnd {
    let hom = Homotopy { sys, gamma };
    let mut x = start;
    let mut t = 0.0_f64;
    let mut dt = 0.02_f64;
    let mut steps = 0;
    // norm when t first crossed 0.9, for the divergence test at a stall
    let mut norm_late = f64::NAN;
    loop {
        if t >= 1.0 - 1e-14 {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return classify_stall(&x, norm_late);
        }
        if x.norm() > opts.infinity {
            return PathEnd::Infinite;
        }
        let h = dt.min(1.0 - t);
        // RK4 predictor on the Davidenko system
        let pred = (|| {
            let k1 = hom.velocity(&x, t)?;
            let k2 = hom.velocity(&(&x + &k1 * Complex64::new(h / 2.0, 0.0)), t + h / 2.0)?;
            let k3 = hom.velocity(&(&x + &k2 * Complex64::new(h / 2.0, 0.0)), t + h / 2.0)?;
            let k4 = hom.velocity(&(&x + &k3 * Complex64::new(h, 0.0)), t + h)?;
            Some(&x + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                * Complex64::new(h / 6.0, 0.0))
        })();
        let accepted = pred.and_then(|mut xp| {
            let t2 = t + h;
            // a corrector that walks far off a large-norm prediction has left
            // this path's track (typically onto a finite root while the true
            // path escapes to infinity); reject the step instead of following
            // it. Small-norm wandering stays allowed: positive-dimensional
            // sets are detected by letting paths scatter across them.
            let cap = if xp.norm() > 100.0 { 0.25 * (1.0 + xp.norm()) } else { f64::INFINITY };
            let mut moved = 0.0;
            for it in 0..3 {
                let hv = hom.h(&xp, t2);
                let delta = hom.h_x(&xp, t2).lu().solve(&(-hv))?;
                moved += delta.norm();
                if moved > cap {
                    return None;
                }
                xp += &delta;
                if delta.norm() <= 1e-10 * (1.0 + xp.norm()) {
                    return Some((xp, it == 0));
                }
            }
            None
        });
        match accepted {
            Some((xp, easy)) => {
                if t < 0.9 && t + h >= 0.9 {
                    norm_late = xp.norm();
                }
                x = xp;
                t += h;
                if easy {
                    dt = (dt * 1.5).min(0.05);
                }
            }
            None => {
                dt *= 0.5;
                if dt < 1e-10 {
                    // near the end a stalled path may still sit next to a
                    // singular but genuine solution; let the endgame decide
                    if t >= 0.999 {
                        break;
                    }
                    return classify_stall(&x, norm_late);
                }
            }
        }
    }
    if x.norm() > opts.infinity {
        return PathEnd::Infinite;
    }
    let (xf, r) = polish(sys, &x, 40);
    // Newton is a local refinement; a large-norm endpoint it relocates
    // wholesale was a divergent path caught by a finite basin, not a solution.
    // Small-norm endpoints may slide along a positive-dimensional set, which
    // the scatter detector downstream must get to see.
    if x.norm() > 100.0 && (&xf - &x).norm() > 0.25 * (1.0 + x.norm()) {
        return classify_stall(&x, norm_late);
    }
    if xf.norm() > opts.infinity {
        PathEnd::Infinite
    } else if r < f64::max(1e-8, opts.tol_track) {
        PathEnd::Finite(xf.as_slice().to_vec())
    } else {
        PathEnd::Failed
    }
}

/// Jacobian scale so that condition = scale / sigma_min is meaningful even
/// for 1x1 systems.
fn jacobian_condition(sys: &PolySystem, x: &[Complex64]) -> f64 {
    let xmax = x.iter().fold(1.0_f64, |a, c| a.max(c.norm()));
    let scale = sys
        .polys()
        .iter()
        .zip(sys.degrees())
        .map(|(p, &d)| p.coeff_norm() * xmax.powi(d as i32 - 1))
        .fold(0.0, f64::max);
    let sv = sys.jacobian(x).svd(false, false).singular_values;
    let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if smin < 1e-300 {
        f64::INFINITY
    } else {
        scale / smin
    }
}

struct Pass {
    clusters: Vec<SolutionCluster>,
    failed: usize,
    infinite: usize,
    total: usize,
}

fn run_pass(sys: &PolySystem, gamma: Complex64, opts: &TrackOptions) -> Pass {
    let degs = sys.degrees().to_vec();
    let total = sys.total_paths();
    let starts: Vec<DVector<Complex64>> = (0..total)
        .map(|p| {
            let mut digits = p;
            DVector::from_iterator(
                degs.len(),
                degs.iter().map(|&d| {
                    let k = digits % d as usize;
                    digits /= d as usize;
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64)
                }),
            )
        })
        .collect();
    let ends: Vec<PathEnd> = starts
        .into_par_iter()
        .map(|s| track_one(sys, gamma, s, opts))
        .collect();
    let mut finite: Vec<Vec<Complex64>> = Vec::new();
    let mut failed = 0;
    let mut infinite = 0;
    for e in ends {
        match e {
            PathEnd::Finite(x) => finite.push(x),
            PathEnd::Infinite => infinite += 1,
            PathEnd::Failed => failed += 1,
        }
    }
    let groups = group_endpoints(&finite, opts.tol_cluster);
    let mut clusters: Vec<SolutionCluster> = groups
        .into_iter()
        .map(|members| {
            let rep = members
                .iter()
                .map(|&i| &finite[i])
                .min_by(|a, b| {
                    sys.rel_residual(a).partial_cmp(&sys.rel_residual(b)).unwrap()
                })
                .unwrap()
                .clone();
            SolutionCluster {
                residual: sys.rel_residual(&rep),
                condition: jacobian_condition(sys, &rep),
                real: is_real_after_scaling(&rep, opts.tol_real),
                multiplicity: members.len(),
                conjugate: None,
                representative: rep,
            }
        })
        .collect();
    clusters.sort_by(|a, b| canonical_cmp(&a.representative, &b.representative));
    Pass { clusters, failed, infinite, total }
}

/// Tracks all product-of-degrees paths of the total-degree homotopy
/// (1 - t) gamma (x_i^{d_i} - 1) + t F(x), twice with independent gammas,
/// and merges the endpoint clusters.
pub fn track_total_degree(
    sys: &PolySystem,
    seed: u64,
    opts: &TrackOptions,
) -> Result<TrackReport, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = || Complex64::from_polar(1.0, rng.gen::<f64>() * 2.0 * std::f64::consts::PI);
    let p1 = run_pass(sys, gamma(), opts);
    let p2 = run_pass(sys, gamma(), opts);

    let match_tol = (10.0 * opts.tol_cluster).max(1e-6);
    let matches = |a: &SolutionCluster, b: &SolutionCluster| {
        let scale = 1.0
            + a.representative.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        // polished endpoints of an isolated root agree to roughly
        // condition * eps; points strewn along a positive-dimensional set
        // differ by far more than the cap
        let tol = match_tol.max(1e-13 * a.condition.max(b.condition)).min(1e-3);
        dist(&a.representative, &b.representative) <= tol * scale
    };
    let unmatched = |from: &[SolutionCluster], against: &[SolutionCluster]| -> Vec<usize> {
        from.iter()
            .enumerate()
            .filter(|(_, c)| !against.iter().any(|o| matches(c, o)))
            .map(|(i, _)| i)
            .collect()
    };
    let new1 = unmatched(&p1.clusters, &p2.clusters);
    let new2 = unmatched(&p2.clusters, &p1.clusters);
    // Positive-dimensional sets strand each pass's endpoints at gamma-dependent
    // spots, so most singular clusters find no partner; isolated-but-ill-
    // conditioned roots reproduce across passes except for stray path losses.
    let stranded_majority = |cs: &[SolutionCluster], new: &[usize]| {
        let suspect: Vec<usize> =
            (0..cs.len()).filter(|&i| cs[i].condition > 1e8).collect();
        let lost = suspect.iter().filter(|i| new.contains(i)).count();
        !suspect.is_empty() && 2 * lost > suspect.len()
    };
    if stranded_majority(&p1.clusters, &new1) && stranded_majority(&p2.clusters, &new2) {
        return Err(SolverError::PositiveDimensional);
    }

    // pass 1 is authoritative; adopt pass-2 clusters it lost, and let a
    // matched pass-2 cluster restore multiplicity dropped to a failed path
    let mut clusters = p1.clusters;
    for c in clusters.iter_mut() {
        if let Some(o) = p2.clusters.iter().find(|o| matches(c, o)) {
            c.multiplicity = c.multiplicity.max(o.multiplicity);
        }
    }
    for &i in &new2 {
        clusters.push(p2.clusters[i].clone());
    }
    clusters.sort_by(|a, b| canonical_cmp(&a.representative, &b.representative));
    pair_conjugates(&mut clusters, opts.tol_cluster.max(1e-7));
    Ok(TrackReport {
        clusters,
        paths_total: p1.total + p2.total,
        paths_failed: p1.failed + p2.failed,
        paths_infinite: p1.infinite + p2.infinite,
    })
}
