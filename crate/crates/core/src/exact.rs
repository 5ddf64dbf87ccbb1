//! Rational re-check of Möbius verdicts that land near the sign boundary.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::monotonicity::{MonotonicityReport, Notion, Witness};
use crate::poset::ZetaMobius;
use crate::Direction;

pub type Rational = BigRational;

/// Verdicts with `|worst_value|` below this many tolerances are re-run exactly.
pub const BOUNDARY_FACTOR: f64 = 100.0;

/// Parses `"p/q"`, integers, and plain or exponent decimals exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::InvalidParameter(format!("not a rational number: `{s}`"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(digits);
    if scale >= 0 {
        r *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

fn to_rational(x: i64) -> Rational {
    Rational::from_integer(BigInt::from(x))
}

/// `C^{-1} P C` or `(C^T)^{-1} P C^T` in exact arithmetic.
pub fn mobius_transform_exact(p: &[Vec<Rational>], zm: &ZetaMobius, dir: Direction) -> Result<Vec<Vec<Rational>>> {
    let m = zm.len();
    if p.len() != m || p.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch {
            what: "rational matrix",
            expected: m,
            found: p.len(),
        });
    }
    let (left, right): (DMatrix<i64>, DMatrix<i64>) = match dir {
        Direction::Down => (zm.mobius().clone(), zm.zeta().clone()),
        Direction::Up => (zm.mobius().transpose(), zm.zeta().transpose()),
    };
    let mul_right = |a: &[Vec<Rational>]| -> Vec<Vec<Rational>> {
        a.iter()
            .map(|row| {
                (0..m)
                    .map(|j| {
                        let mut acc = Rational::zero();
                        for (k, x) in row.iter().enumerate() {
                            let c = right[(k, j)];
                            if c != 0 && !x.is_zero() {
                                acc += x * to_rational(c);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    };
    let pc = mul_right(p);
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Rational::zero();
                    for (k, row) in pc.iter().enumerate() {
                        let c = left[(i, k)];
                        if c != 0 {
                            acc += &row[j] * to_rational(c);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect())
}

/// Replaces a near-boundary Möbius verdict by the exact one.
///
/// Reports away from the boundary, and reports for other notions, are
/// returned unchanged.
pub fn refine(report: MonotonicityReport, p: &[Vec<Rational>], zm: &ZetaMobius) -> Result<MonotonicityReport> {
    let dir = match report.notion {
        Notion::MobiusDown => Direction::Down,
        Notion::MobiusUp => Direction::Up,
        _ => return Ok(report),
    };
    if report.worst_value.abs() >= BOUNDARY_FACTOR * report.tolerance_used {
        return Ok(report);
    }
    let t = mobius_transform_exact(p, zm, dir)?;
    let mut worst = (t[0][0].clone(), 0, 0);
    for (i, row) in t.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if *x < worst.0 {
                worst = (x.clone(), i, j);
            }
        }
    }
    let worst_value = worst.0.to_f64().unwrap_or(f64::NAN);
    Ok(MonotonicityReport {
        verdict: !worst.0.is_negative(),
        worst_value,
        witness: Witness::Entry { row: worst.1, col: worst.2 },
        near_zero: 0,
        exact: true,
        ..report
    })
}
