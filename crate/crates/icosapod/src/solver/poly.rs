//! Sparse multivariate polynomials over C and square systems thereof.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

use super::SolverError;

/// A polynomial as a map from exponent tuples to coefficients. The BTreeMap
/// keeps term order canonical, so evaluation is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Poly {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Complex64) -> Poly {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn variable(nvars: usize, i: usize) -> Poly {
        assert!(i < nvars);
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Complex64) {
        assert_eq!(exps.len(), self.nvars);
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                if c.re != 0.0 || c.im != 0.0 {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s.re == 0.0 && s.im == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Sum of coefficient magnitudes; the natural residual scale.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &ei) in x.iter().zip(e.iter()) {
                if ei > 0 {
                    t *= xi.powu(ei);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn partial(&self, i: usize) -> Poly {
        assert!(i < self.nvars);
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[i] -= 1;
            out.add_term(d, c * Complex64::new(e[i] as f64, 0.0));
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, k: Complex64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * k);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// A square polynomial system with precomputed Jacobian entries.
#[derive(Debug, Clone)]
pub struct PolySystem {
    nvars: usize,
    polys: Vec<Poly>,
    jac: Vec<Vec<Poly>>,
    degrees: Vec<u32>,
}

impl PolySystem {
    pub fn new(polys: Vec<Poly>) -> Result<PolySystem, SolverError> {
        if polys.is_empty() {
            return Err(SolverError::MalformedSystem);
        }
        let nvars = polys[0].nvars();
        if polys.len() != nvars || polys.iter().any(|p| p.nvars() != nvars) {
            return Err(SolverError::MalformedSystem);
        }
        let degrees: Vec<u32> = polys.iter().map(|p| p.degree()).collect();
        if degrees.iter().any(|&d| d == 0) {
            return Err(SolverError::MalformedSystem);
        }
        let jac = polys
            .iter()
            .map(|p| (0..nvars).map(|i| p.partial(i)).collect())
            .collect();
        Ok(PolySystem { nvars, polys, jac, degrees })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn total_paths(&self) -> usize {
        self.degrees.iter().map(|&d| d as usize).product()
    }

    pub fn eval(&self, x: &[Complex64]) -> DVector<Complex64> {
        DVector::from_iterator(self.polys.len(), self.polys.iter().map(|p| p.eval(x)))
    }

    pub fn jacobian(&self, x: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.nvars, self.nvars, |i, j| self.jac[i][j].eval(x))
    }

    /// Largest per-equation residual relative to coefficient size and the
    /// argument's magnitude raised to the equation degree.
    pub fn rel_residual(&self, x: &[Complex64]) -> f64 {
        let xmax = x.iter().fold(1.0_f64, |a, c| a.max(c.norm()));
        self.polys
            .iter()
            .zip(self.degrees.iter())
            .map(|(p, &d)| p.eval(x).norm() / (p.coeff_norm() * xmax.powi(d as i32)).max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Determinant of a square matrix of polynomials by cofactor expansion.
pub fn det_poly(entries: &[Vec<Poly>]) -> Poly {
    let n = entries.len();
    assert!(n > 0 && entries.iter().all(|r| r.len() == n));
    if n == 1 {
        return entries[0][0].clone();
    }
    let nv = entries[0][0].nvars();
    let mut acc = Poly::zero(nv);
    for (col, pivot) in entries[0].iter().enumerate() {
        if pivot.is_zero() {
            continue;
        }
        let minor: Vec<Vec<Poly>> = entries[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != col)
                    .map(|(_, p)| p.clone())
                    .collect()
            })
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc.add(&pivot.mul(&det_poly(&minor)).scale(Complex64::new(sign, 0.0)));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn eval_and_partial() {
        // x^2 y + 3
        let x = Poly::variable(2, 0);
        let y = Poly::variable(2, 1);
        let p = x.mul(&x).mul(&y).add(&Poly::constant(2, c(3.0)));
        assert_eq!(p.degree(), 3);
        let at = [c(2.0), c(5.0)];
        assert_eq!(p.eval(&at), c(23.0));
        let px = p.partial(0); // 2xy
        assert_eq!(px.eval(&at), c(20.0));
        let py = p.partial(1); // x^2
        assert_eq!(py.eval(&at), c(4.0));
        assert!(p.partial(0).partial(1).partial(0).partial(1).is_zero());
    }

    #[test]
    fn term_cancellation() {
        let x = Poly::variable(1, 0);
        let diff = x.add(&x.scale(c(-1.0)));
        assert!(diff.is_zero());
        assert_eq!(diff.degree(), 0);
    }

    #[test]
    fn determinant_of_diagonal() {
        // det diag(t0..t3) = t0 t1 t2 t3
        let entries: Vec<Vec<Poly>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| if i == j { Poly::variable(4, i) } else { Poly::zero(4) })
                    .collect()
            })
            .collect();
        let d = det_poly(&entries);
        assert_eq!(d.degree(), 4);
        let at = [c(2.0), c(3.0), c(5.0), c(7.0)];
        assert_eq!(d.eval(&at), c(210.0));
    }

    #[test]
    fn determinant_antisymmetry() {
        let mut entries: Vec<Vec<Poly>> = (0..3)
            .map(|i| (0..3).map(|j| Poly::variable(9, 3 * i + j)).collect())
            .collect();
        let d1 = det_poly(&entries);
        entries.swap(0, 1);
        let d2 = det_poly(&entries);
        assert!(d1.add(&d2).is_zero());
    }

    #[test]
    fn system_validation() {
        let x = Poly::variable(2, 0);
        let y = Poly::variable(2, 1);
        assert!(PolySystem::new(vec![x.clone()]).is_err());
        assert!(PolySystem::new(vec![x.clone(), Poly::constant(2, c(1.0))]).is_err());
        let sys = PolySystem::new(vec![x.mul(&x), y.clone()]).unwrap();
        assert_eq!(sys.total_paths(), 2);
        assert_eq!(sys.degrees(), &[2, 1]);
    }

    #[test]
    fn relative_residual_scales() {
        let x = Poly::variable(1, 0);
        let p = x.mul(&x).add(&Poly::constant(1, c(-1.0))); // x^2 - 1
        let sys = PolySystem::new(vec![p]).unwrap();
        assert!(sys.rel_residual(&[c(1.0)]) < 1e-15);
        let big = sys.rel_residual(&[c(1e6)]);
        assert!(big < 1.0 && big > 0.1, "residual should normalize by |x|^deg: {big}");
    }
}
