//! Endpoint clustering, canonical scaling, reality flags, conjugate pairing.

use num_complex::Complex64;

/// One merged endpoint cluster from a homotopy run.
#[derive(Debug, Clone)]
pub struct SolutionCluster {
    pub representative: Vec<Complex64>,
    /// Number of paths that landed here; equals the local multiplicity when
    /// the tracked system has its full Bezout count of solutions.
    pub multiplicity: usize,
    /// Relative backward residual at the representative.
    pub residual: f64,
    /// Jacobian condition estimate at the representative.
    pub condition: f64,
    pub real: bool,
    /// Index of the conjugate-partner cluster, for non-real clusters of
    /// real-coefficient systems.
    pub conjugate: Option<usize>,
}

/// Scales to unit norm and rotates the largest-magnitude coordinate onto the
/// positive real axis: the phase-invariant canonical form used for reality
/// tests and projective comparison.
pub fn canonical_unit(rep: &[Complex64]) -> Vec<Complex64> {
    let norm: f64 = rep.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return rep.to_vec();
    }
    let mut k = 0;
    for (i, c) in rep.iter().enumerate() {
        if c.norm() > rep[k].norm() {
            k = i;
        }
    }
    let phase = rep[k] / rep[k].norm();
    rep.iter().map(|c| c * phase.conj() / norm).collect()
}

pub fn is_real_after_scaling(rep: &[Complex64], tol_real: f64) -> bool {
    canonical_unit(rep).iter().all(|c| c.im.abs() < tol_real)
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Projective distance: chordal distance of the unit representatives after
/// the optimal phase alignment. Computed by direct subtraction, so nearby
/// points resolve to machine precision (an angle formula would lose half the
/// digits to cancellation).
pub fn proj_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let inner: Complex64 =
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>() / (na * nb);
    let phase = if inner.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { inner / inner.norm() };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x * phase / na - y / nb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Groups points lying within `tol * (1 + |x|)` of each other (transitively).
/// Returns, per group, the member indices.
pub fn group_endpoints(points: &[Vec<Complex64>], tol: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0
                + points[i].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().min(
                    points[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
                );
            if dist(&points[i], &points[j]) <= tol * scale {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Lexicographic order on (re, im) coordinate pairs; total and deterministic.
pub fn canonical_cmp(a: &[Complex64], b: &[Complex64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Fills in `conjugate` links by direct coordinate conjugation; meaningful
/// for real-coefficient systems, where the solution set is conjugation-closed.
pub fn pair_conjugates(clusters: &mut [SolutionCluster], tol: f64) {
    for c in clusters.iter_mut() {
        c.conjugate = None;
    }
    for i in 0..clusters.len() {
        if clusters[i].real || clusters[i].conjugate.is_some() {
            continue;
        }
        let conj: Vec<Complex64> =
            clusters[i].representative.iter().map(|c| c.conj()).collect();
        let scale =
            1.0 + conj.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut best: Option<(usize, f64)> = None;
        for (j, other) in clusters.iter().enumerate() {
            if j == i || other.real || other.conjugate.is_some() {
                continue;
            }
            let d = dist(&conj, &other.representative);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            if d <= tol * scale {
                clusters[i].conjugate = Some(j);
                clusters[j].conjugate = Some(i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_form_kills_phase() {
        let v = vec![c(0.6, 0.0), c(-0.8, 0.0)];
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated: Vec<Complex64> = v.iter().map(|x| x * phase).collect();
        assert!(is_real_after_scaling(&rotated, 1e-12));
        let genuinely_complex = vec![c(1.0, 0.0), c(0.0, 0.5)];
        assert!(!is_real_after_scaling(&genuinely_complex, 1e-8));
    }

    #[test]
    fn projective_distance_basics() {
        let a = vec![c(1.0, 0.0), c(2.0, 0.0)];
        let b: Vec<Complex64> = a.iter().map(|x| x * c(0.0, -3.0)).collect();
        assert!(proj_dist(&a, &b) < 1e-15);
        let e0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let e1 = vec![c(0.0, 0.0), c(1.0, 0.0)];
        assert!((proj_dist(&e0, &e1) - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grouping_is_transitive() {
        let pts = vec![
            vec![c(0.0, 0.0)],
            vec![c(0.9e-6, 0.0)],
            vec![c(1.8e-6, 0.0)],
            vec![c(1.0, 0.0)],
        ];
        let groups = group_endpoints(&pts, 1e-6);
        assert_eq!(groups.len(), 2);
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        assert!(sizes.contains(&3) && sizes.contains(&1));
    }

    #[test]
    fn conjugate_links() {
        let mk = |re: f64, im: f64| SolutionCluster {
            representative: vec![c(re, im)],
            multiplicity: 1,
            residual: 0.0,
            condition: 1.0,
            real: im == 0.0,
            conjugate: None,
        };
        let mut cl = vec![mk(1.0, 0.0), mk(0.5, 2.0), mk(0.5, -2.0)];
        pair_conjugates(&mut cl, 1e-8);
        assert_eq!(cl[0].conjugate, None);
        assert_eq!(cl[1].conjugate, Some(2));
        assert_eq!(cl[2].conjugate, Some(1));
    }
}
