//! Compiled-in worked example: six legs with exact rational coordinates, the
//! line whose half-turn is a configuration of them, and their exact squared
//! lengths in that configuration. Also derives the type-(10,0) matrix space
//! spanned by E and the three rank-2 matrices of the independent legs.

use nalgebra::{Matrix4, Vector3, Vector4};
use num::rational::BigRational;
use num::ToPrimitive;
use std::str::FromStr;

use crate::legspace::{alpha, Leg};
use crate::spectra::Sym4Space;
use crate::study::LineR3;

fn rat(s: &str) -> BigRational {
    BigRational::from_str(s).expect("literal rational")
}

fn rvec(x: &str, y: &str, z: &str) -> [BigRational; 3] {
    [rat(x), rat(y), rat(z)]
}

fn dot(a: &[BigRational; 3], b: &[BigRational; 3]) -> BigRational {
    &(&a[0] * &b[0]) + &(&(&a[1] * &b[1]) + &(&a[2] * &b[2]))
}

fn sub(a: &[BigRational; 3], b: &[BigRational; 3]) -> [BigRational; 3] {
    [&a[0] - &b[0], &a[1] - &b[1], &a[2] - &b[2]]
}

fn to_f64(v: &[BigRational; 3]) -> Vector3<f64> {
    Vector3::new(
        v[0].to_f64().unwrap(),
        v[1].to_f64().unwrap(),
        v[2].to_f64().unwrap(),
    )
}

/// One leg of the example with exact data.
#[derive(Debug, Clone)]
pub struct ExactLeg {
    pub a: [BigRational; 3],
    pub b: [BigRational; 3],
    pub d2: BigRational,
}

impl ExactLeg {
    pub fn to_f64(&self) -> Leg {
        Leg { a: to_f64(&self.a), b: to_f64(&self.b), d2: self.d2.to_f64().unwrap() }
    }
}

fn platform_points() -> [[BigRational; 3]; 3] {
    [
        rvec("-36411/267844", "-1608/177793", "504/25399"),
        rvec("-47/368", "-12/1771", "21/1265"),
        rvec("-15185/112462", "-120/149303", "48/3047"),
    ]
}

fn base_points() -> [[BigRational; 3]; 3] {
    [
        rvec("-19493/142100", "-2088/94325", "-24/9625"),
        rvec("-269/5000", "39/1000", "17/500"),
        rvec("-1863/14645", "-106851/1555400", "2509/222200"),
    ]
}

/// The recorded squared leg lengths; legs k and k+3 share theirs.
pub fn example_lengths() -> [BigRational; 3] {
    [
        rat("1081643179736912972309543483891375692/276669953748621822688942197018838171875"),
        rat("219482305781081742844809989061/29002829339836395492656900000000"),
        rat("4185335506762812187908674782558830797/636621874987061375644008358435317156000"),
    ]
}

/// Anchor point and direction of the example's seed line, exact.
pub fn example_line_exact() -> ([BigRational; 3], [BigRational; 3]) {
    (
        rvec("-1/10", "0", "0"),
        rvec("1", "7003716944/10000000000", "8/10"),
    )
}

/// The six example legs: three independent ones and their swaps.
pub fn example_legs_exact() -> [ExactLeg; 6] {
    let p = platform_points();
    let q = base_points();
    let d = example_lengths();
    [
        ExactLeg { a: p[0].clone(), b: q[0].clone(), d2: d[0].clone() },
        ExactLeg { a: p[1].clone(), b: q[1].clone(), d2: d[1].clone() },
        ExactLeg { a: p[2].clone(), b: q[2].clone(), d2: d[2].clone() },
        ExactLeg { a: q[0].clone(), b: p[0].clone(), d2: d[0].clone() },
        ExactLeg { a: q[1].clone(), b: p[1].clone(), d2: d[1].clone() },
        ExactLeg { a: q[2].clone(), b: p[2].clone(), d2: d[2].clone() },
    ]
}

pub fn example_legs() -> [Leg; 6] {
    example_legs_exact().map(|l| l.to_f64())
}

pub fn example_line() -> LineR3 {
    let (c, u) = example_line_exact();
    LineR3::new(to_f64(&c), to_f64(&u)).expect("nonzero direction")
}

/// Image of a point under the half-turn about the line, in exact arithmetic.
pub fn halfturn_image_exact(
    p: &[BigRational; 3],
    line: &([BigRational; 3], [BigRational; 3]),
) -> [BigRational; 3] {
    let (c, u) = line;
    let w = sub(p, c);
    let t = dot(&w, u) / dot(u, u);
    // reflection through the line: 2 (c + t u) - p
    let two = rat("2");
    [
        &(&two * &(&c[0] + &(&t * &u[0]))) - &p[0],
        &(&two * &(&c[1] + &(&t * &u[1]))) - &p[1],
        &(&two * &(&c[2] + &(&t * &u[2]))) - &p[2],
    ]
}

/// Exact squared distance between the half-turn image of `a` and `b`.
pub fn exact_squared_length(leg: &ExactLeg) -> BigRational {
    let img = halfturn_image_exact(&leg.a, &example_line_exact());
    let diff = sub(&img, &leg.b);
    dot(&diff, &diff)
}

#[derive(Debug, Clone)]
pub struct ExampleCheck {
    /// Relative error of each recomputed squared length vs the recorded one.
    pub rel_errors: [f64; 6],
    /// Whether the rational recomputation matches the recorded values exactly.
    pub exact_match: bool,
}

impl ExampleCheck {
    pub fn pass(&self, tol: f64) -> bool {
        self.rel_errors.iter().all(|&e| e < tol)
    }
}

/// Recomputes all six squared lengths in rational arithmetic and compares
/// them with the recorded values.
pub fn verify_example() -> ExampleCheck {
    let legs = example_legs_exact();
    let mut rel_errors = [0.0; 6];
    let mut exact_match = true;
    for (i, leg) in legs.iter().enumerate() {
        let computed = exact_squared_length(leg);
        let err = (&computed - &leg.d2) / &leg.d2;
        if !num::Zero::is_zero(&err) {
            exact_match = false;
        }
        rel_errors[i] = err.to_f64().unwrap_or(f64::INFINITY).abs();
    }
    ExampleCheck { rel_errors, exact_match }
}

fn homog(v: &Vector3<f64>) -> Vector4<f64> {
    Vector4::new(1.0, v[0], v[1], v[2])
}

/// The 4-space spanned by E and the rank-2 matrices of the three independent
/// example legs. Its spectrahedron has type (10, 0), so a pod built from it
/// carries 20 real finite legs.
pub fn example_space() -> Sym4Space {
    let legs = example_legs();
    let z = |leg: &Leg| alpha(&homog(&leg.a), &homog(&leg.b)).z_matrix();
    Sym4Space::new([
        crate::legspace::e_matrix(),
        z(&legs[0]),
        z(&legs[1]),
        z(&legs[2]),
    ])
    .expect("example legs are independent")
}

/// Basis matrices of `example_space`, for serialization.
pub fn example_space_basis() -> [Matrix4<f64>; 4] {
    *example_space().basis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::{line_to_halfturn, sphere_residual};

    #[test]
    fn recorded_lengths_recompute_exactly() {
        let check = verify_example();
        assert!(check.exact_match, "rel errors: {:?}", check.rel_errors);
        assert!(check.pass(1e-12));
    }

    #[test]
    fn swapped_legs_share_lengths() {
        let legs = example_legs_exact();
        for k in 0..3 {
            assert_eq!(
                exact_squared_length(&legs[k]),
                exact_squared_length(&legs[k + 3])
            );
        }
    }

    #[test]
    fn float_legs_satisfy_sphere_conditions() {
        let sigma = line_to_halfturn(&example_line());
        for leg in example_legs() {
            let res = sphere_residual(&sigma, &leg.a, &leg.b, leg.d2).abs();
            assert!(res < 1e-12, "residual {res}");
        }
    }

    #[test]
    fn space_is_wellformed() {
        let space = example_space();
        let coeff = space.e_coefficients().expect("E is a basis vector");
        assert!((coeff - Vector4::new(1.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
        for b in &space.basis()[1..] {
            // rank-2 basis matrices: two near-zero singular values
            let sv = b.svd(false, false).singular_values;
            let mut s: Vec<f64> = sv.iter().copied().collect();
            s.sort_by(|x, y| y.partial_cmp(x).unwrap());
            assert!(s[2] / s[0] < 1e-12, "basis matrix rank exceeds 2");
        }
    }
}
