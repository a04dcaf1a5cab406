//! Acceptance gate: one test per release criterion, each printing a
//! `[PASS] ...` line with the measured numbers. Criteria with wall-clock
//! bounds take a shared lock so they never time each other's load.

use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use nalgebra::{Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use icosapod::fixture::{example_legs, example_line, example_space, verify_example};
use icosapod::legspace::{
    alpha_inverse, dual_complement, e_matrix, LinearSubspace, Side, Vec11,
};
use icosapod::pipeline::{
    build_pod_resampling, random_secant_space, random_space_with_e, sample_seed,
    stats_survey,
};
use icosapod::solver::{solve_burmester, solve_symmetroid_nodes, TrackOptions};
use icosapod::spectra::{compute_type, Sym4Space};
use icosapod::study::{
    is_involution_point, line_to_halfturn, sphere_residual, LineR3, StudyPoint,
};
use icosapod::tracer::{sample_poses, trace, TraceOptions, Trajectory};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn sym_gauss(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let g = Matrix4::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
    0.5 * (g + g.transpose())
}

fn gauss3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| StandardNormal.sample(rng))
}

fn random_line(rng: &mut ChaCha8Rng) -> LineR3 {
    loop {
        if let Some(line) = LineR3::new(gauss3(rng), gauss3(rng)) {
            return line;
        }
    }
}

/// sin of the principal angle between the complex lines spanned by a and b;
/// scale invariant and accurate down to machine precision.
fn proj_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let coef = inner / nb;
    let mut res = 0.0;
    let mut na = 0.0;
    for (x, y) in a.iter().zip(b) {
        res += (x - coef * y).norm_sqr();
        na += x.norm_sqr();
    }
    (res / na).sqrt()
}

fn flat_real(m: &Matrix4<f64>) -> Vec<Complex64> {
    m.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn flat_at(basis: &[Matrix4<f64>; 4], t: &Vector4<Complex64>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); 16];
    for (j, b) in basis.iter().enumerate() {
        for (k, &v) in b.iter().enumerate() {
            out[k] += t[j] * v;
        }
    }
    out
}

fn trace_example_pod(seed: u64) -> (icosapod::pipeline::Pod, Trajectory) {
    let opts = TrackOptions::default();
    let space = example_space();
    let (pod, _) = build_pod_resampling(&space, seed, &opts, 32)
        .expect("example space must build");
    // tight corrector tolerance: downstream the samples feed a root solve whose
    // solutions are compared against the pod legs, and pose error is amplified
    // by the solutions' sensitivity, so samples must sit on the motion curve
    // essentially to machine precision
    let topts =
        TraceOptions { step_max: 2.5e-2, tol_trace: 1e-13, ..TraceOptions::default() };
    let traj = trace(&pod.legs, &pod.provenance.seed_line, 2000, &topts)
        .expect("example pod must trace");
    (pod, traj)
}

#[test]
fn c1_worked_example_exact() {
    let _g = gate();
    let t0 = Instant::now();
    let check = verify_example();
    let dt = t0.elapsed();
    assert!(check.pass(1e-12), "relative errors {:?}", check.rel_errors);
    assert!(check.exact_match, "rational recomputation differs from the recorded values");
    assert!(dt.as_secs_f64() < 1.0, "took {dt:?}, bound is 1 s");
    let worst = check.rel_errors.iter().cloned().fold(0.0, f64::max);
    println!("[PASS] c1 worked example: exact rational match, max rel err {worst:.2e}, {dt:?}");
}

#[test]
fn c2_example_motion_trace() {
    let _g = gate();
    let t0 = Instant::now();
    let legs = example_legs();
    let line = example_line();
    let opts = TraceOptions { step_max: 1e-2, ..TraceOptions::default() };
    let traj = trace(&legs, &line, 2000, &opts).expect("example legs must trace");
    assert!(traj.samples.len() >= 200, "only {} samples", traj.samples.len());
    let mut worst = 0.0_f64;
    for sm in &traj.samples {
        assert!(is_involution_point(&sm.sigma, 1e-9), "off the involution slice at s = {}", sm.s);
        for leg in &legs {
            let r = sphere_residual(&sm.sigma, &leg.a, &leg.b, leg.d2).abs();
            worst = worst.max(r);
            assert!(r < 1e-9, "residual {r:.3e} at s = {}", sm.s);
        }
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "took {dt:?}, bound is 10 s");
    println!(
        "[PASS] c2 example motion: {} samples, max residual {worst:.2e}, all on the involution slice, {dt:?}",
        traj.samples.len()
    );
}

#[test]
fn c3_node_count_robustness() {
    let _g = gate();
    let opts = TrackOptions::default();
    let mut full_count = 0;
    let mut worst_instance = 0.0_f64;
    for i in 0..100 {
        let seed = sample_seed(300, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_space_with_e(&mut rng);
        let t0 = Instant::now();
        let solved = solve_symmetroid_nodes(space.basis(), seed, &opts);
        let dt = t0.elapsed().as_secs_f64();
        worst_instance = worst_instance.max(dt);
        assert!(dt < 1.0, "instance {i} took {dt:.3} s, bound is 1 s");
        let Ok(nodes) = solved else { continue };
        for n in &nodes {
            assert!(n.sigma_ratio < 1e-8, "instance {i}: sigma3/sigma1 = {:.3e}", n.sigma_ratio);
        }
        if nodes.iter().map(|n| n.multiplicity).sum::<usize>() == 10 {
            full_count += 1;
        }
    }
    assert!(full_count >= 95, "only {full_count}/100 instances found all 10 nodes");
    println!(
        "[PASS] c3 node count: {full_count}/100 instances with multiplicity sum 10, slowest {worst_instance:.3} s"
    );
}

#[test]
fn c4_planted_node_recovery() {
    let _g = gate();
    let opts = TrackOptions::default();
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let seed = sample_seed(400, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let b = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let plant = a * b.transpose() + b * a.transpose();
        let basis = [e_matrix(), plant, sym_gauss(&mut rng), sym_gauss(&mut rng)];
        let nodes = solve_symmetroid_nodes(&basis, seed, &opts)
            .unwrap_or_else(|e| panic!("fixture {i} failed to solve: {e}"));
        let target = flat_real(&plant);
        let best = nodes
            .iter()
            .map(|n| proj_gap(&flat_at(&basis, &n.point), &target))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "fixture {i}: planted matrix missed by {best:.3e}");
        worst = worst.max(best);
    }
    println!("[PASS] c4 planted nodes: 50/50 recovered, worst projective gap {worst:.2e}");
}

#[test]
fn c5_survey_histograms() {
    let _g = gate();
    let t0 = Instant::now();
    let res = stats_survey(1000, 17, &TrackOptions::default());
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 1200.0, "took {dt:?}, bound is 20 min");
    let hist = &res.real_points_hist;
    for &k in hist.keys() {
        assert_eq!(k % 2, 0, "odd real-node bin {k}");
    }
    let (&mode, _) = hist.iter().max_by_key(|&(_, &v)| v).expect("empty histogram");
    assert!(mode == 6 || mode == 8, "real-node mode {mode} outside {{6, 8}}");
    let bin2 = *hist.get(&2).unwrap_or(&0);
    assert!(
        (bin2 as f64) < 0.01 * res.samples as f64,
        "bin 2 holds {bin2} of {} samples",
        res.samples
    );
    for &k in res.real_preimage_hist.keys() {
        assert_eq!(k % 4, 0, "real-preimage bin {k} not a multiple of 4");
        assert_ne!(k, 20, "real-preimage bin 20 must be absent");
    }
    println!(
        "[PASS] c5 survey: nodes {:?}, preimages {:?}, mode {mode}, bin2 {bin2}, {} degenerate, {dt:?}",
        hist, res.real_preimage_hist, res.degenerate
    );
}

#[test]
fn c6_twenty_real_legs() {
    let _g = gate();
    let (pod, traj) = trace_example_pod(11);
    assert_eq!(pod.counts.real_finite, 20, "counts: {:?}", pod.counts);
    assert_eq!(pod.legs.len(), 20);
    assert!(traj.samples.len() >= 100, "only {} samples", traj.samples.len());
    let mut worst = 0.0_f64;
    for sm in &traj.samples {
        for leg in &pod.legs {
            let r = sphere_residual(&sm.sigma, &leg.a, &leg.b, leg.d2).abs();
            worst = worst.max(r);
            assert!(r < 1e-8, "residual {r:.3e} at s = {}", sm.s);
        }
    }
    // base and platform points agree as multisets: greedy-match within 1e-8
    let mut base: Vec<Vector3<f64>> = pod.legs.iter().map(|l| l.b).collect();
    for leg in &pod.legs {
        let (idx, gap) = base
            .iter()
            .enumerate()
            .map(|(i, b)| (i, (b - leg.a).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("base pool exhausted");
        assert!(gap < 1e-8, "platform point {} unmatched, nearest base at {gap:.3e}", leg.a);
        base.swap_remove(idx);
    }
    println!(
        "[PASS] c6 icosapod: 20 real finite legs, {} samples, max residual {worst:.2e}, point multisets agree",
        traj.samples.len()
    );
}

#[test]
fn c7_burmester_closure() {
    let _g = gate();
    let opts = TrackOptions::default();
    let (pod, traj) = trace_example_pod(11);
    let poses: [StudyPoint; 7] = sample_poses(&traj, 7)
        .expect("trajectory long enough for 7 poses")
        .try_into()
        .map_err(|_| "pose count")
        .unwrap();
    let sols = solve_burmester(&poses, 23, &opts).expect("traced poses must solve");
    let total: usize = sols.iter().map(|s| s.multiplicity).sum();
    assert_eq!(total, 20, "multiplicity total {total}");
    // componentwise comparison, relative on each component: the squared leg
    // length is two orders of magnitude larger than the point coordinates, so
    // a shared absolute scale would measure nothing but that size difference
    let mut worst = 0.0_f64;
    for leg in &pod.legs {
        let gap = sols
            .iter()
            .map(|s| {
                let da = (0..3)
                    .map(|k| (s.a[k] - leg.a[k]).norm() / (1.0 + leg.a[k].abs()))
                    .fold(0.0, f64::max);
                let db = (0..3)
                    .map(|k| (s.b[k] - leg.b[k]).norm() / (1.0 + leg.b[k].abs()))
                    .fold(0.0, f64::max);
                let dd = (s.d2 - leg.d2).norm() / (1.0 + leg.d2.abs());
                da.max(db).max(dd)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(gap < 1e-8, "leg at {} unmatched, nearest solution {gap:.3e}", leg.a);
        worst = worst.max(gap);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(700, 1));
    let random_poses: [StudyPoint; 7] =
        std::array::from_fn(|_| line_to_halfturn(&random_line(&mut rng)));
    let free = solve_burmester(&random_poses, 29, &opts).expect("generic poses must solve");
    let free_total: usize = free.iter().map(|s| s.multiplicity).sum();
    assert_eq!(free_total, 20, "multiplicity total {free_total} on random poses");
    let real_count: usize = free.iter().filter(|s| s.real).map(|s| s.multiplicity).sum();
    assert_eq!(real_count % 2, 0, "odd real count {real_count} on random poses");
    println!(
        "[PASS] c7 seven-pose closure: 20/20 legs matched (worst gap {worst:.2e}); random poses give 20 with {real_count} real"
    );
}

#[test]
fn c8_structural_identities() {
    let _g = gate();
    let opts = TrackOptions::default();
    let tol = 1e-10;

    // double complement returns the original subspace, both sides, all dims
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(800, 0));
    let mut complement_checks = 0;
    for side in [Side::Primal, Side::Dual] {
        for dim in [1usize, 3, 5, 8, 10] {
            for _ in 0..2 {
                let vs: Vec<Vec11> = (0..dim)
                    .map(|_| Vec11::from_fn(|_, _| StandardNormal.sample(&mut rng)))
                    .collect();
                let v = LinearSubspace::from_spanning(side, &vs).expect("generic span");
                let ddc = dual_complement(&dual_complement(&v).expect("complement"))
                    .expect("double complement");
                assert_eq!(ddc.dim(), v.dim());
                for b in v.basis() {
                    assert!(ddc.contains(b, tol), "double complement lost a vector, dim {dim}");
                }
                complement_checks += 1;
            }
        }
    }

    // factorization round trip; real factors exactly for signature (1, 1)
    let mut factor_checks = 0;
    while factor_checks < 20 {
        let u = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let v = Vector4::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let indefinite = factor_checks % 2 == 0;
        let z: Matrix4<f64> = if indefinite {
            u * v.transpose() + v * u.transpose()
        } else {
            u * u.transpose() + v * v.transpose()
        };
        let eig = z.symmetric_eigenvalues();
        let mut mags: Vec<f64> = eig.iter().map(|e| e.abs()).collect();
        mags.sort_by(f64::total_cmp);
        if mags[2] < 1e-3 * mags[3] {
            continue; // nearly rank 1, redraw
        }
        let pair = alpha_inverse(&z, tol).expect("rank-2 input");
        assert_eq!(pair.real, indefinite, "reality flag disagrees with the signature");
        let pos = eig.iter().filter(|&&e| e > tol).count();
        let neg = eig.iter().filter(|&&e| e < -tol).count();
        assert_eq!((pos.min(neg) == 1), pair.real, "signature (1,1) must mean real factors");
        if pair.real {
            assert!(pair.a.iter().chain(pair.b.iter()).all(|c| c.im.abs() < tol));
        } else {
            let conj_gap: f64 =
                (0..4).map(|k| (pair.a[k] - pair.b[k].conj()).norm()).sum();
            assert!(conj_gap < tol * 10.0, "factors not conjugate: {conj_gap:.3e}");
        }
        let mut rebuilt = vec![Complex64::new(0.0, 0.0); 16];
        for r in 0..4 {
            for c in 0..4 {
                rebuilt[4 * r + c] = pair.a[r] * pair.b[c] + pair.b[r] * pair.a[c];
            }
        }
        let gap = proj_gap(&rebuilt, &flat_real(&z));
        assert!(gap < tol, "round trip drifted by {gap:.3e}");
        factor_checks += 1;
    }

    // every build carries exactly twice (a - b) real legs
    let mut built = 0;
    let mut attempts = 0;
    while built < 50 {
        attempts += 1;
        assert!(attempts <= 70, "only {built} of 50 builds succeeded in 70 attempts");
        let seed = sample_seed(800, 100 + attempts);
        let mut srng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_secant_space(&mut srng);
        let Ok((pod, report)) = build_pod_resampling(&space, seed, &opts, 16) else {
            continue;
        };
        let ty = report.spectra_type;
        assert_eq!(
            pod.counts.real_finite + pod.counts.at_infinity,
            2 * (ty.a - ty.b),
            "type ({}, {}) vs counts {:?}",
            ty.a,
            ty.b,
            pod.counts
        );
        assert_eq!(pod.counts.complex, 2 * (10 - ty.a + ty.b));
        built += 1;
    }

    // congruence by any invertible matrix leaves the type unchanged
    let mut congruences = 0;
    let mut tries = 0;
    while congruences < 20 {
        tries += 1;
        assert!(tries <= 35, "only {congruences} of 20 congruence pairs solved in 35 tries");
        let seed = sample_seed(800, 200 + tries);
        let mut srng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_space_with_e(&mut srng);
        let Ok((ty, _)) = compute_type(&space, seed, &opts) else { continue };
        let g = loop {
            let g = Matrix4::<f64>::from_fn(|_, _| StandardNormal.sample(&mut srng));
            if g.determinant().abs() > 0.1 {
                break g;
            }
        };
        let moved = Sym4Space::new(space.basis().map(|b| g * b * g.transpose()))
            .expect("congruence keeps the span full rank");
        let Ok((ty2, _)) = compute_type(&moved, seed ^ 0x5bf0_3635, &opts) else {
            continue;
        };
        assert_eq!(ty, ty2, "type changed under congruence");
        congruences += 1;
    }

    println!(
        "[PASS] c8 structure: {complement_checks} double complements, {factor_checks} factor round trips, \
         {built} builds at twice (a - b), {congruences} congruence pairs type-stable"
    );
}
