//! Rank-2 points of a quartic symmetroid det(t1 B1 + ... + t4 B4) = 0.
//!
//! The gradient system is sliced to three random complex combinations of the
//! four partials plus a random affine chart (27 paths), endpoints are
//! filtered against the full gradient and a rank-2 test, then sharpened by
//! Gauss-Newton on the sixteen 3x3 minors. The minors vanish to first order
//! at a rank-2 point, so this polish stays well conditioned even where the
//! determinant's own Hessian is nearly flat (matrices close to rank 1).
//!
//! Everything runs on two independent chart slices. Isolated rank-2 points
//! are chart-independent; a positive-dimensional rank-2 locus leaves each
//! slice with points the other cannot match, which is the degeneracy signal.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cluster::{canonical_unit, proj_dist};
use super::poly::{det_poly, Poly, PolySystem};
use super::track::{track_total_degree, TrackOptions};
use super::SolverError;

/// A rank-2 point of the symmetroid, projectively canonicalized in the
/// caller's basis coordinates.
#[derive(Debug, Clone)]
pub struct NodeSolution {
    pub point: Vector4<Complex64>,
    pub multiplicity: usize,
    /// Relative residual of the full gradient.
    pub residual: f64,
    /// Condition of the minors Jacobian at the point.
    pub condition: f64,
    /// sigma3/sigma1 of the matrix at the point; < 1e-8 for every reported node.
    pub sigma_ratio: f64,
    pub real: bool,
    /// For real nodes: whether +-M(t) is positive semidefinite.
    pub psd: Option<bool>,
    pub conjugate: Option<usize>,
}

const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

fn sym(m: &Matrix4<f64>) -> Matrix4<f64> {
    0.5 * (m + m.transpose())
}

/// Frobenius orthonormalization; returns the new matrices and the coefficient
/// rows w with obasis[j] = sum_i w[j][i] basis[i].
fn orthonormalize(
    basis: &[Matrix4<f64>; 4],
) -> Result<(Vec<Matrix4<f64>>, [[f64; 4]; 4]), SolverError> {
    let scale = basis.iter().map(|b| b.norm()).fold(0.0, f64::max).max(1e-300);
    let mut obasis: Vec<Matrix4<f64>> = Vec::new();
    let mut w = [[0.0_f64; 4]; 4];
    for j in 0..4 {
        let mut m = sym(&basis[j]);
        let mut row = [0.0_f64; 4];
        row[j] = 1.0;
        for k in 0..obasis.len() {
            let c = m.dot(&obasis[k]);
            m -= obasis[k] * c;
            for i in 0..4 {
                row[i] -= w[k][i] * c;
            }
        }
        let n = m.norm();
        if n < 1e-10 * scale {
            return Err(SolverError::DegenerateSpace);
        }
        obasis.push(m / n);
        for i in 0..4 {
            w[j][i] = row[i] / n;
        }
    }
    Ok((obasis, w))
}

fn matrix_at(obasis: &[Matrix4<f64>], x: &[Complex64]) -> Matrix4<Complex64> {
    let mut m = Matrix4::from_element(Complex64::new(0.0, 0.0));
    for (xj, b) in x.iter().zip(obasis.iter()) {
        for r in 0..4 {
            for c in 0..4 {
                m[(r, c)] += xj * b[(r, c)];
            }
        }
    }
    m
}

fn singular_ratios(m: &Matrix4<Complex64>) -> (f64, f64) {
    let dm = DMatrix::from_fn(4, 4, |i, j| m[(i, j)]);
    let sv = dm.svd(false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = s[0].max(1e-300);
    (s[2] / top, s[3] / top)
}

fn det3(s: &Matrix3<Complex64>) -> Complex64 {
    s[(0, 0)] * (s[(1, 1)] * s[(2, 2)] - s[(1, 2)] * s[(2, 1)])
        - s[(0, 1)] * (s[(1, 0)] * s[(2, 2)] - s[(1, 2)] * s[(2, 0)])
        + s[(0, 2)] * (s[(1, 0)] * s[(2, 1)] - s[(1, 1)] * s[(2, 0)])
}

/// Cofactor matrix: cof[p][q] = d det3 / d s_pq.
fn cof3(s: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    let e = |r: usize, c: usize| s[(r, c)];
    Matrix3::new(
        e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1),
        -(e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0)),
        e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0),
        -(e(0, 1) * e(2, 2) - e(0, 2) * e(2, 1)),
        e(0, 0) * e(2, 2) - e(0, 2) * e(2, 0),
        -(e(0, 0) * e(2, 1) - e(0, 1) * e(2, 0)),
        e(0, 1) * e(1, 2) - e(0, 2) * e(1, 1),
        -(e(0, 0) * e(1, 2) - e(0, 2) * e(1, 0)),
        e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
    )
}

fn submatrix(m: &Matrix4<Complex64>, rows: &[usize; 3], cols: &[usize; 3]) -> Matrix3<Complex64> {
    Matrix3::from_fn(|i, j| m[(rows[i], cols[j])])
}

/// Gauss-Newton on the 16 order-3 minors plus the chart equation; returns the
/// sharpened point and the minors-Jacobian condition there.
fn minors_polish(
    obasis: &[Matrix4<f64>],
    chart: &[Complex64; 4],
    x0: &[Complex64; 4],
) -> ([Complex64; 4], f64) {
    let mut x = *x0;
    let mut best = x;
    let mut best_norm = f64::INFINITY;
    let mut condition = f64::INFINITY;
    for _ in 0..60 {
        let m = matrix_at(obasis, &x);
        let mut f = DVector::from_element(17, Complex64::new(0.0, 0.0));
        let mut jac = DMatrix::from_element(17, 4, Complex64::new(0.0, 0.0));
        for (r, (ri, ci)) in TRIPLES
            .iter()
            .flat_map(|ri| TRIPLES.iter().map(move |ci| (ri, ci)))
            .enumerate()
        {
            let s = submatrix(&m, ri, ci);
            f[r] = det3(&s);
            let cof = cof3(&s);
            for j in 0..4 {
                let mut d = Complex64::new(0.0, 0.0);
                for p in 0..3 {
                    for q in 0..3 {
                        d += cof[(p, q)] * obasis[j][(ri[p], ci[q])];
                    }
                }
                jac[(r, j)] = d;
            }
        }
        f[16] = x.iter().zip(chart.iter()).map(|(xi, ci)| xi * ci).sum::<Complex64>()
            - Complex64::new(1.0, 0.0);
        for j in 0..4 {
            jac[(16, j)] = chart[j];
        }
        let fnorm = f.norm();
        if fnorm < best_norm {
            best_norm = fnorm;
            best = x;
        }
        let svd = jac.svd(true, true);
        let sv = &svd.singular_values;
        let smax = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
        let smin = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
        condition = if smin < 1e-300 { f64::INFINITY } else { smax / smin };
        let delta = match svd.solve(&(-f), 1e-14) {
            Ok(d) => d,
            Err(_) => break,
        };
        for j in 0..4 {
            x[j] += delta[j];
        }
        let xn: f64 = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if delta.norm() < 1e-15 * (1.0 + xn) {
            let m2 = matrix_at(obasis, &x);
            let mut fin = 0.0;
            for ri in &TRIPLES {
                for ci in &TRIPLES {
                    fin += det3(&submatrix(&m2, ri, ci)).norm_sqr();
                }
            }
            if fin.sqrt() < best_norm {
                best = x;
            }
            break;
        }
    }
    (best, condition)
}

struct SliceNode {
    x: [Complex64; 4], // orthonormal-basis coordinates
    multiplicity: usize,
    residual: f64,
    condition: f64,
    sigma_ratio: f64,
}

fn grad_rel(partials: &[Poly], x: &[Complex64]) -> f64 {
    let xmax = x.iter().fold(1.0_f64, |a, c| a.max(c.norm()));
    partials
        .iter()
        .map(|p| {
            p.eval(x).norm() / (p.coeff_norm() * xmax.powi(p.degree() as i32)).max(1e-300)
        })
        .fold(0.0, f64::max)
}

fn solve_slice(
    partials: &[Poly],
    obasis: &[Matrix4<f64>],
    rng: &mut ChaCha8Rng,
    opts: &TrackOptions,
) -> Result<Option<Vec<SliceNode>>, SolverError> {
    let cpx = |r: &mut ChaCha8Rng| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5);
    let combos: Vec<Poly> = (0..3)
        .map(|_| {
            let mut p = Poly::zero(4);
            for partial in partials {
                p = p.add(&partial.scale(cpx(rng)));
            }
            p
        })
        .collect();
    let mut chart = [Complex64::new(0.0, 0.0); 4];
    for c in &mut chart {
        *c = cpx(rng);
    }
    let cn: f64 = chart.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut chart {
        *c /= cn;
    }
    let mut chart_poly = Poly::constant(4, Complex64::new(-1.0, 0.0));
    for (i, c) in chart.iter().enumerate() {
        let mut e = vec![0u32; 4];
        e[i] = 1;
        chart_poly.add_term(e, *c);
    }
    let mut polys = combos;
    polys.push(chart_poly);
    let sys = PolySystem::new(polys)?;
    let subseed = rng.gen::<u64>();
    let report = track_total_degree(&sys, subseed, opts).map_err(|e| match e {
        SolverError::PositiveDimensional => SolverError::DegenerateSpace,
        other => other,
    })?;
    let debug = std::env::var_os("NODES_DEBUG").is_some();
    if debug {
        eprintln!(
            "slice: {} clusters, {}/{} failed, {} infinite",
            report.clusters.len(),
            report.paths_failed,
            report.paths_total,
            report.paths_infinite
        );
    }
    if report.failed_fraction() > 0.10 {
        return Ok(None); // caller retries with a fresh chart
    }
    let mut nodes: Vec<SliceNode> = Vec::new();
    for cl in &report.clusters {
        let pre_grad = grad_rel(partials, &cl.representative);
        if pre_grad > 1e-4 {
            if debug {
                eprintln!("  drop pre-grad {pre_grad:.2e}");
            }
            continue;
        }
        let x4: [Complex64; 4] = [
            cl.representative[0],
            cl.representative[1],
            cl.representative[2],
            cl.representative[3],
        ];
        let (r3, _) = singular_ratios(&matrix_at(obasis, &x4));
        if r3 > 1e-2 {
            if debug {
                eprintln!("  drop pre-sigma {r3:.2e} (grad {pre_grad:.2e})");
            }
            continue;
        }
        let (x, condition) = minors_polish(obasis, &chart, &x4);
        let residual = grad_rel(partials, &x);
        let (s3, _) = singular_ratios(&matrix_at(obasis, &x));
        if residual > 1e-8 || s3 > 1e-8 {
            if debug {
                eprintln!("  drop post-polish grad {residual:.2e} sigma {s3:.2e} cond {condition:.2e}");
            }
            continue;
        }
        if debug {
            eprintln!("  keep grad {residual:.2e} sigma {s3:.2e} cond {condition:.2e}");
        }
        // a node's count is geometric: distinct polished points count once,
        // however many path endpoints sharpen onto them; collided nodes then
        // show up as fewer than 10 points and fail the genericity gate
        let candidate =
            SliceNode { x, multiplicity: 1, residual, condition, sigma_ratio: s3 };
        if let Some(existing) =
            nodes.iter_mut().find(|n| proj_dist(&n.x, &candidate.x) < 1e-7)
        {
            if candidate.residual < existing.residual {
                *existing = candidate;
            }
        } else {
            nodes.push(candidate);
        }
    }
    if debug {
        eprintln!("slice merged to {} distinct nodes", nodes.len());
        for n in &nodes {
            eprintln!(
                "  node mult {} [{:.6} {:.6} {:.6} {:.6}]",
                n.multiplicity,
                n.x[0], n.x[1], n.x[2], n.x[3]
            );
        }
    }
    Ok(Some(nodes))
}

/// Finds the rank-2 points of span(basis). Generic spaces yield 10 of them
/// counted with multiplicity; a positive-dimensional rank-2 locus (for
/// example the diagonal space) is refused.
pub fn solve_symmetroid_nodes(
    basis: &[Matrix4<f64>; 4],
    seed: u64,
    opts: &TrackOptions,
) -> Result<Vec<NodeSolution>, SolverError> {
    let (obasis, w) = orthonormalize(basis)?;
    let entries: Vec<Vec<Poly>> = (0..4)
        .map(|p| {
            (0..4)
                .map(|q| {
                    let mut lin = Poly::zero(4);
                    for (j, b) in obasis.iter().enumerate() {
                        let mut e = vec![0u32; 4];
                        e[j] = 1;
                        lin.add_term(e, Complex64::new(b[(p, q)], 0.0));
                    }
                    lin
                })
                .collect()
        })
        .collect();
    let det = det_poly(&entries);
    if std::env::var_os("NODES_DEBUG").is_some() {
        eprintln!("det coeff norm {:.3e}", det.coeff_norm());
    }
    if det.coeff_norm() < 1e-12 {
        return Err(SolverError::DegenerateSpace);
    }
    let partials: Vec<Poly> = (0..4).map(|i| det.partial(i)).collect();

    let mut slices: Option<(Vec<SliceNode>, Vec<SliceNode>)> = None;
    for attempt in 0..=opts.max_retries {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let a = solve_slice(&partials, &obasis, &mut rng, opts)?;
        let b = solve_slice(&partials, &obasis, &mut rng, opts)?;
        if let (Some(a), Some(b)) = (a, b) {
            slices = Some((a, b));
            break;
        }
    }
    let (s1, s2) = slices.ok_or(SolverError::TrackingLost(opts.max_retries))?;

    let matched_in = |n: &SliceNode, other: &[SliceNode]| -> Option<usize> {
        other
            .iter()
            .enumerate()
            .filter(|(_, o)| proj_dist(&n.x, &o.x) < 1e-6)
            .map(|(i, _)| i)
            .next()
    };
    let new1: Vec<&SliceNode> = s1.iter().filter(|n| matched_in(n, &s2).is_none()).collect();
    let new2: Vec<&SliceNode> = s2.iter().filter(|n| matched_in(n, &s1).is_none()).collect();
    if !new1.is_empty() && !new2.is_empty() {
        return Err(SolverError::DegenerateSpace);
    }
    let mut merged: Vec<SliceNode> = s1;
    for n in &mut merged {
        if let Some(i) = matched_in(n, &s2) {
            n.multiplicity = n.multiplicity.max(s2[i].multiplicity);
        }
    }
    for n in s2 {
        if matched_in(&n, &merged).is_none() {
            merged.push(n);
        }
    }

    let mut out: Vec<NodeSolution> = merged
        .into_iter()
        .map(|n| {
            // back to the caller's basis: t_i = sum_j w[j][i] x_j
            let t: Vec<Complex64> = (0..4)
                .map(|i| (0..4).map(|j| n.x[j] * w[j][i]).sum())
                .collect();
            let canon = canonical_unit(&t);
            let real = canon.iter().all(|c| c.im.abs() < opts.tol_real);
            let psd = if real {
                let tr: Vec<f64> = canon.iter().map(|c| c.re).collect();
                let mut m = Matrix4::zeros();
                for (ti, b) in tr.iter().zip(basis.iter()) {
                    m += sym(b) * *ti;
                }
                let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
                let flip = if eig.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                let top = eig.iter().fold(0.0_f64, |a, &e| a.max(e.abs())).max(1e-300);
                Some(eig.iter().all(|&e| flip * e > -1e-8 * top))
            } else {
                None
            };
            NodeSolution {
                point: Vector4::from_iterator(canon.iter().copied()),
                multiplicity: n.multiplicity,
                residual: n.residual,
                condition: n.condition,
                sigma_ratio: n.sigma_ratio,
                real,
                psd,
                conjugate: None,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        super::cluster::canonical_cmp(a.point.as_slice(), b.point.as_slice())
    });
    for i in 0..out.len() {
        if out[i].real || out[i].conjugate.is_some() {
            continue;
        }
        let conj: Vec<Complex64> = out[i].point.iter().map(|c| c.conj()).collect();
        let partner = (0..out.len()).find(|&j| {
            j != i
                && !out[j].real
                && out[j].conjugate.is_none()
                && proj_dist(&conj, out[j].point.as_slice()) < 1e-6
        });
        if let Some(j) = partner {
            out[i].conjugate = Some(j);
            out[j].conjugate = Some(i);
        }
    }
    Ok(out)
}
