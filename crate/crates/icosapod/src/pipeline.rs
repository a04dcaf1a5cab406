//! End-to-end icosapod construction: from a 4-space of symmetric matrices
//! containing E and a seed line to the 20 legs, plus the randomized survey
//! over spans of rank-2 points and the 20-real-finite-legs diagnostic.

use nalgebra::{DMatrix, Matrix4, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::legspace::{
    dual_complement, leg_from_dual, lift_into, p_e, sym_coords, Leg, LegSpaceError,
    LinearSubspace, Side, Vec11,
};
use crate::solver::{canonical_unit, SolverError, TrackOptions};
use crate::spectra::{borel_from_space, compute_type, SpectraError, SpectraType, Sym4Space};
use crate::study::{line_to_halfturn, sphere_residual, LineR3, StudyError, StudyPoint};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("the chosen seed line gives a negative squared leg length; resample it")]
    ResampleSeedLine,
    #[error("seed line is degenerate for this space")]
    DegenerateSeedLine,
    #[error("duality chain lost the expected dimensions")]
    DualityMismatch,
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    LegSpace(#[from] LegSpaceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Study(#[from] StudyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LegCounts {
    pub real_finite: usize,
    pub at_infinity: usize,
    pub complex: usize,
}

/// Where a pod came from: enough to rebuild it deterministically.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub basis: [Matrix4<f64>; 4],
    pub seed_line: LineR3,
    pub seed: u64,
    pub node_multiplicities: Vec<usize>,
    /// Fiber coordinate of each real node's lift; None for complex nodes.
    pub lifts: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct Pod {
    /// Real finite legs only; closed under the (a, b) swap.
    pub legs: Vec<Leg>,
    pub provenance: Provenance,
    pub counts: LegCounts,
}

impl Pod {
    pub fn seed_pose(&self) -> StudyPoint {
        line_to_halfturn(&self.provenance.seed_line)
    }

    pub fn max_residual_at(&self, pose: &StudyPoint) -> f64 {
        self.legs
            .iter()
            .map(|leg| sphere_residual(pose, &leg.a, &leg.b, leg.d2).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct DaggerReport {
    pub exactly_twenty_real_finite: bool,
    pub simple_nodes: bool,
    pub base_collinear: bool,
    pub platform_collinear: bool,
    pub reasons: Vec<String>,
}

impl DaggerReport {
    pub fn pass(&self) -> bool {
        self.exactly_twenty_real_finite
            && self.simple_nodes
            && !self.base_collinear
            && !self.platform_collinear
    }
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub node_count: usize,
    pub node_multiplicities: Vec<usize>,
    pub spectra_type: SpectraType,
    pub counts: LegCounts,
    /// Largest sphere residual of any real finite leg at the seed pose.
    pub max_seed_residual: f64,
    pub dagger: DaggerReport,
}

fn unit_l() -> Vec11 {
    let mut v = Vec11::zeros();
    v[0] = 1.0;
    v
}

/// The 4-dimensional dual subspace through p_e whose projection along the
/// fiber direction is the space's subspace and which annihilates sigma0.
fn lift_target(
    space: &Sym4Space,
    sigma0: &StudyPoint,
) -> Result<LinearSubspace, PipelineError> {
    let gamma = borel_from_space(space)?;
    let mut spanning: Vec<Vec11> = gamma.basis().to_vec();
    spanning.push(unit_l());
    let preimage = LinearSubspace::from_spanning(Side::Dual, &spanning)?;
    if preimage.dim() != 5 {
        return Err(PipelineError::DualityMismatch);
    }
    let u = dual_complement(&preimage)?;
    let s0 = sym_coords(sigma0, 1e-8)?;
    let lambda = match u.join(&s0) {
        Ok(l) => l,
        Err(_) => return Err(PipelineError::DegenerateSeedLine),
    };
    if lambda.dim() != 7 {
        return Err(PipelineError::DegenerateSeedLine);
    }
    let gamma_tilde = dual_complement(&lambda)?;
    if gamma_tilde.dim() != 4 {
        return Err(PipelineError::DualityMismatch);
    }
    // sanity: p_e must lie inside, and the fiber projection must return gamma
    if !gamma_tilde.contains(&p_e().coords(), 1e-8) {
        return Err(PipelineError::DualityMismatch);
    }
    for v in gamma_tilde.basis() {
        let mut proj = *v;
        proj[0] = 0.0;
        if !preimage.contains(&proj, 1e-8) {
            return Err(PipelineError::DualityMismatch);
        }
    }
    Ok(gamma_tilde)
}

/// Builds the pod determined by the space and the seed line. The seed line's
/// half-turn is a configuration of the result by construction, so every real
/// finite leg's sphere condition vanishes there.
pub fn build_pod(
    space: &Sym4Space,
    seed_line: &LineR3,
    seed: u64,
    opts: &TrackOptions,
) -> Result<(Pod, BuildReport), PipelineError> {
    if space.e_coefficients().is_none() {
        return Err(PipelineError::Spectra(SpectraError::MissingE));
    }
    let sigma0 = line_to_halfturn(seed_line);
    let gamma_tilde = lift_target(space, &sigma0)?;
    let (ty, nodes) = compute_type(space, seed, opts)?;

    let mut legs: Vec<Leg> = Vec::new();
    let mut counts = LegCounts::default();
    let mut lifts: Vec<Option<f64>> = Vec::new();
    for node in &nodes {
        if !node.real {
            counts.complex += 2 * node.multiplicity;
            lifts.push(None);
            continue;
        }
        let rep = canonical_unit(node.point.as_slice());
        let t = nalgebra::Vector4::from_fn(|i, _| rep[i].re);
        let z = space.matrix_at(&t);
        let lifted = lift_into(&gamma_tilde, &z)?;
        lifts.push(Some(lifted.l));
        match leg_from_dual(&lifted, 1e-10) {
            Ok(leg) => {
                if leg.has_negative_length(0.0) {
                    return Err(PipelineError::ResampleSeedLine);
                }
                counts.real_finite += 2 * node.multiplicity;
                legs.push(leg.swapped());
                legs.push(leg);
            }
            Err(LegSpaceError::LegAtInfinity) => counts.at_infinity += 2 * node.multiplicity,
            Err(LegSpaceError::ComplexLeg) => counts.complex += 2 * node.multiplicity,
            Err(e) => return Err(e.into()),
        }
    }

    let node_multiplicities: Vec<usize> = nodes.iter().map(|n| n.multiplicity).collect();
    let pod = Pod {
        legs,
        provenance: Provenance {
            basis: *space.basis(),
            seed_line: LineR3::new(*seed_line.c(), *seed_line.u()).expect("canonical line"),
            seed,
            node_multiplicities: node_multiplicities.clone(),
            lifts,
        },
        counts,
    };
    let max_seed_residual = pod.max_residual_at(&sigma0);
    let dagger = check_dagger(&pod);
    let report = BuildReport {
        node_count: nodes.len(),
        node_multiplicities,
        spectra_type: ty,
        counts,
        max_seed_residual,
        dagger,
    };
    Ok((pod, report))
}

/// build_pod with randomly drawn seed lines, retrying on seed-line-specific
/// failures. Returns the line that worked.
pub fn build_pod_resampling(
    space: &Sym4Space,
    seed: u64,
    opts: &TrackOptions,
    max_tries: usize,
) -> Result<(Pod, BuildReport), PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = PipelineError::ResampleSeedLine;
    for _ in 0..max_tries {
        let draw =
            |r: &mut ChaCha8Rng| Vector3::from_fn(|_, _| StandardNormal.sample(r));
        let Some(line) = LineR3::new(draw(&mut rng), draw(&mut rng)) else {
            continue;
        };
        match build_pod(space, &line, seed, opts) {
            Ok(out) => return Ok(out),
            Err(e @ (PipelineError::ResampleSeedLine | PipelineError::DegenerateSeedLine)) => {
                last = e;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// The 20-real-finite-legs diagnostic: leg count, node simplicity, and the
/// collinearity degeneracies of the two point sets.
pub fn check_dagger(pod: &Pod) -> DaggerReport {
    let mut reasons = Vec::new();
    let exactly_twenty_real_finite = pod.counts.real_finite == 20 && pod.legs.len() == 20;
    if !exactly_twenty_real_finite {
        reasons.push(format!(
            "{} real finite legs ({} at infinity, {} complex)",
            pod.counts.real_finite, pod.counts.at_infinity, pod.counts.complex
        ));
    }
    let simple_nodes = pod.provenance.node_multiplicities.iter().all(|&m| m == 1);
    if !simple_nodes {
        reasons.push("node multiplicities exceed 1".into());
    }
    let platform: Vec<Vector3<f64>> = pod.legs.iter().map(|l| l.a).collect();
    let base: Vec<Vector3<f64>> = pod.legs.iter().map(|l| l.b).collect();
    let platform_collinear = collinear(&platform);
    let base_collinear = collinear(&base);
    if platform_collinear {
        reasons.push("platform points are collinear".into());
    }
    if base_collinear {
        reasons.push("base points are collinear".into());
    }
    DaggerReport {
        exactly_twenty_real_finite,
        simple_nodes,
        base_collinear,
        platform_collinear,
        reasons,
    }
}

fn collinear(points: &[Vector3<f64>]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let n = points.len();
    let mean = points.iter().sum::<Vector3<f64>>() / n as f64;
    let m = DMatrix::from_fn(n, 3, |i, j| points[i][j] - mean[j]);
    let sv = m.svd(false, false).singular_values;
    let scale = points.iter().map(|p| p.norm()).fold(1.0, f64::max);
    sv[1] <= 1e-8 * sv[0].max(scale)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

/// Draws a random 4-space spanned by E and three symmetrized standard normal
/// matrices.
pub fn random_space_with_e(rng: &mut ChaCha8Rng) -> Sym4Space {
    let draw = |r: &mut ChaCha8Rng| {
        let m = Matrix4::from_fn(|_, _| StandardNormal.sample(r));
        0.5 * (m + m.transpose())
    };
    let basis = [crate::legspace::e_matrix(), draw(rng), draw(rng), draw(rng)];
    Sym4Space::new(basis).expect("random Gaussian spaces are full rank almost surely")
}

/// The survey's sampling distribution: a 4-space spanned by E and three
/// random real rank-2 matrices. A real rank-2 symmetric matrix factors as
/// a*b' + b*a' with either both vectors real or a conjugate pair; both
/// smooth kinds are drawn with equal probability, with Gaussian factors.
/// Such spans are secant to the rank-2 variety; spans of purely Gaussian
/// matrices rarely meet its real locus often enough to be interesting,
/// deflating the real-point counts.
pub fn random_secant_space(rng: &mut ChaCha8Rng) -> Sym4Space {
    let draw = |r: &mut ChaCha8Rng| {
        let u = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(r));
        let v = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(r));
        let coin: f64 = StandardNormal.sample(r);
        if coin > 0.0 {
            // (a, b) = (u, v): product of two real linear forms
            u * v.transpose() + v * u.transpose()
        } else {
            // (a, b) = (u + iv, u - iv): semidefinite, complex preimage
            u * u.transpose() + v * v.transpose()
        }
    };
    let basis = [crate::legspace::e_matrix(), draw(rng), draw(rng), draw(rng)];
    Sym4Space::new(basis).expect("random secant spans are full rank almost surely")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyResult {
    pub samples: usize,
    pub seed: u64,
    /// Count of real rank-2 points per sample -> frequency.
    pub real_points_hist: BTreeMap<usize, usize>,
    /// Count of real factor points (2(a-b)) per sample -> frequency.
    pub real_preimage_hist: BTreeMap<usize, usize>,
    pub degenerate: usize,
}

/// Per-sample streams are derived from (seed, index), so the result does not
/// depend on the parallel schedule.
pub fn stats_survey(samples: usize, seed: u64, opts: &TrackOptions) -> SurveyResult {
    let outcomes: Vec<Option<(usize, usize)>> = (0..samples)
        .into_par_iter()
        .map(|idx| {
            let s = sample_seed(seed, idx);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let space = random_secant_space(&mut rng);
            match compute_type(&space, splitmix64(s), opts) {
                Ok((ty, _)) => Some((ty.a, 2 * (ty.a - ty.b))),
                Err(_) => None,
            }
        })
        .collect();
    let mut real_points_hist = BTreeMap::new();
    let mut real_preimage_hist = BTreeMap::new();
    let mut degenerate = 0;
    for o in outcomes {
        match o {
            Some((a, pre)) => {
                *real_points_hist.entry(a).or_insert(0) += 1;
                *real_preimage_hist.entry(pre).or_insert(0) += 1;
            }
            None => degenerate += 1,
        }
    }
    SurveyResult { samples, seed, real_points_hist, real_preimage_hist, degenerate }
}
