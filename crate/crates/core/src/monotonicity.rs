//! Monotonicity notions for kernels and functions on a poset, each decided
//! numerically and reported with a witness.
//!
//! * Möbius monotone kernels: `C^{-1} P C >= 0` (down), `(C^T)^{-1} P C^T >= 0` (up).
//! * Möbius monotone functions: `f (C^T)^{-1} >= 0` (down), `f C^{-1} >= 0` (up).
//! * Strong stochastic monotonicity: `P(e_i, A) <= P(e_j, A)` for every up-set
//!   `A` and `e_i <= e_j`, checked by enumerating up-sets.
//! * Weak monotonicity: `P` maps the cone `{delta : delta C^T >= 0, delta 1 = 0}`
//!   (up) or `{delta : delta C >= 0, delta 1 = 0}` (down) into itself, decided
//!   by one linear program per principal up-set (down-set).

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::chain::{diff_down, diff_up, Chain};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::poset::{UpSetVisitor, ZetaMobius};
use crate::Direction;

/// Default cap on the number of up-sets enumerated by the strong check.
pub const DEFAULT_UP_SET_CAP: usize = 1 << 20;
/// Default cap on the state count for the LP-based weak check.
pub const DEFAULT_LP_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Notion {
    MobiusDown,
    MobiusUp,
    WeakDown,
    WeakUp,
    StrongStochastic,
    FunctionMobiusDown,
    FunctionMobiusUp,
}

impl Notion {
    pub fn as_str(self) -> &'static str {
        match self {
            Notion::MobiusDown => "mobius_down",
            Notion::MobiusUp => "mobius_up",
            Notion::WeakDown => "weak_down",
            Notion::WeakUp => "weak_up",
            Notion::StrongStochastic => "strong_stochastic",
            Notion::FunctionMobiusDown => "function_mobius_down",
            Notion::FunctionMobiusUp => "function_mobius_up",
        }
    }

    fn mobius(dir: Direction) -> Notion {
        match dir {
            Direction::Down => Notion::MobiusDown,
            Direction::Up => Notion::MobiusUp,
        }
    }
}

impl std::fmt::Display for Notion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the worst value was attained.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    None,
    /// Entry of a transformed matrix.
    Entry { row: usize, col: usize },
    /// Entry of a transformed vector.
    Index(usize),
    /// `P(lower, A) - P(upper, A)` is largest for this up-set `A`.
    UpSet {
        lower: usize,
        upper: usize,
        up_set: Vec<usize>,
    },
    /// Minimizing direction of the LP for principal set `set_index`.
    Lp { set_index: usize, delta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub notion: Notion,
    pub verdict: bool,
    /// Most negative entry (or LP minimum, or smallest up-set margin).
    pub worst_value: f64,
    pub witness: Witness,
    pub tolerance_used: f64,
    /// Entries in `(-tolerance, 0)`, treated as zero.
    pub near_zero: usize,
    /// Transformed vector, for the function notions.
    pub transformed: Option<Vec<f64>>,
    /// Verdict confirmed in rational arithmetic.
    pub exact: bool,
}

impl MonotonicityReport {
    fn from_values<I>(notion: Notion, tol: f64, values: I) -> MonotonicityReport
    where
        I: IntoIterator<Item = (f64, Witness)>,
    {
        let mut worst = f64::INFINITY;
        let mut witness = Witness::None;
        let mut near_zero = 0;
        for (v, w) in values {
            if v < 0.0 && v >= -tol {
                near_zero += 1;
            }
            if v < worst || v.is_nan() {
                worst = v;
                witness = w;
            }
        }
        if worst == f64::INFINITY {
            worst = 0.0;
        }
        MonotonicityReport {
            notion,
            verdict: worst >= -tol,
            worst_value: worst,
            witness,
            tolerance_used: tol,
            near_zero,
            transformed: None,
            exact: false,
        }
    }
}

fn check_dims(c: &Chain, zm: &ZetaMobius) -> Result<()> {
    if c.len() != zm.len() {
        return Err(Error::DimensionMismatch {
            what: "zeta matrix",
            expected: c.len(),
            found: zm.len(),
        });
    }
    Ok(())
}

/// `C^{-1} P C` (down) or `(C^T)^{-1} P C^T` (up).
pub fn mobius_transform(p: &DMatrix<f64>, zm: &ZetaMobius, dir: Direction) -> DMatrix<f64> {
    let c = zm.zeta_f64();
    let c_inv = zm.mobius_f64();
    match dir {
        Direction::Down => c_inv * p * c,
        Direction::Up => c_inv.transpose() * p * c.transpose(),
    }
}

/// Möbius monotonicity of a kernel in the given direction.
pub fn mobius_monotone(c: &Chain, zm: &ZetaMobius, dir: Direction, tol: f64) -> Result<MonotonicityReport> {
    check_dims(c, zm)?;
    let t = mobius_transform(c.matrix(), zm, dir);
    let m = t.nrows();
    let values = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (t[(i, j)], Witness::Entry { row: i, col: j }));
    Ok(MonotonicityReport::from_values(Notion::mobius(dir), tol, values))
}

pub fn mobius_monotone_down(c: &Chain, zm: &ZetaMobius, tol: f64) -> Result<MonotonicityReport> {
    mobius_monotone(c, zm, Direction::Down, tol)
}

pub fn mobius_monotone_up(c: &Chain, zm: &ZetaMobius, tol: f64) -> Result<MonotonicityReport> {
    mobius_monotone(c, zm, Direction::Up, tol)
}

/// Möbius monotonicity of a function: down means `f (C^T)^{-1} >= 0`, up
/// means `f C^{-1} >= 0`.
pub fn function_mobius_monotone(
    f: &DVector<f64>,
    zm: &ZetaMobius,
    dir: Direction,
    tol: f64,
) -> Result<MonotonicityReport> {
    let (t, notion) = match dir {
        Direction::Down => (diff_up(f, zm)?, Notion::FunctionMobiusDown),
        Direction::Up => (diff_down(f, zm)?, Notion::FunctionMobiusUp),
    };
    let mut report = MonotonicityReport::from_values(notion, tol, t.iter().enumerate().map(|(i, &v)| (v, Witness::Index(i))));
    report.transformed = Some(t.iter().copied().collect());
    Ok(report)
}

/// Strong stochastic monotonicity over all up-sets. Only cover pairs are
/// compared; the inequality for other comparable pairs follows by chaining.
pub fn strong_stochastic_monotone(c: &Chain, cap: usize, tol: f64) -> Result<MonotonicityReport> {
    struct Scan<'a> {
        p: &'a DMatrix<f64>,
        covers: Vec<(usize, usize)>,
        /// `P(., A)` for the current partial up-set, one entry per depth.
        mass: Vec<Vec<f64>>,
        worst: f64,
        witness: Witness,
        near_zero: usize,
        tol: f64,
    }
    impl UpSetVisitor for Scan<'_> {
        fn include(&mut self, k: usize) {
            let mut next = self.mass.last().cloned().unwrap_or_default();
            for (r, x) in next.iter_mut().enumerate() {
                *x += self.p[(r, k)];
            }
            self.mass.push(next);
        }
        fn exclude(&mut self, _k: usize) {
            self.mass.pop();
        }
        fn leaf(&mut self, members: &[bool]) {
            let mass = self.mass.last().expect("base level");
            for &(lo, hi) in &self.covers {
                let margin = mass[hi] - mass[lo];
                if margin < 0.0 && margin >= -self.tol {
                    self.near_zero += 1;
                }
                if margin < self.worst {
                    self.worst = margin;
                    self.witness = Witness::UpSet {
                        lower: lo,
                        upper: hi,
                        up_set: members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
                    };
                }
            }
        }
    }
    let mut scan = Scan {
        p: c.matrix(),
        covers: c.poset().covers(),
        mass: vec![vec![0.0; c.len()]],
        worst: f64::INFINITY,
        witness: Witness::None,
        near_zero: 0,
        tol,
    };
    c.poset().visit_up_sets(cap, &mut scan)?;
    let worst = if scan.worst.is_finite() { scan.worst } else { 0.0 };
    Ok(MonotonicityReport {
        notion: Notion::StrongStochastic,
        verdict: worst >= -tol,
        worst_value: worst,
        witness: scan.witness,
        tolerance_used: tol,
        near_zero: scan.near_zero,
        transformed: None,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct WeakOptions {
    pub lp_cap: usize,
    pub tol: f64,
    pub exec: Exec,
}

impl Default for WeakOptions {
    fn default() -> Self {
        WeakOptions {
            lp_cap: DEFAULT_LP_CAP,
            tol: crate::Tolerances::default().mono,
            exec: Exec::default(),
        }
    }
}

/// Weak monotonicity, one LP per principal set. For the up case and state
/// `e_i`: minimize `delta P 1_{e_i up}` over `delta C^T >= 0`, `delta 1 = 0`,
/// `delta` in `[-1, 1]^M`. The cone is homogeneous, so the box only
/// normalizes and the sign of each minimum decides the verdict.
pub fn weak_monotone(c: &Chain, zm: &ZetaMobius, dir: Direction, opts: WeakOptions) -> Result<MonotonicityReport> {
    check_dims(c, zm)?;
    let m = c.len();
    if m > opts.lp_cap {
        return Err(Error::UpSetExplosion { cap: opts.lp_cap });
    }
    let cz = zm.zeta_f64();
    // Column i of `cone` is the indicator of the i-th principal set.
    let cone = match dir {
        Direction::Down => cz.clone(),
        Direction::Up => cz.transpose(),
    };
    let objective = c.matrix() * &cone;
    let results = opts.exec.try_map(m, |i| -> Result<(f64, Vec<f64>)> {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..m).map(|k| lp.add_var(objective[(k, i)], (-1.0, 1.0))).collect();
        for l in 0..m {
            let mut expr = LinearExpr::empty();
            for (k, &v) in vars.iter().enumerate() {
                if cone[(k, l)] != 0.0 {
                    expr.add(v, cone[(k, l)]);
                }
            }
            lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
        }
        let mut total = LinearExpr::empty();
        for &v in &vars {
            total.add(v, 1.0);
        }
        lp.add_constraint(total, ComparisonOp::Eq, 0.0);
        let sol = lp.solve().map_err(|e| Error::LpFailure(format!("set {i}: {e}")))?;
        Ok((sol.objective(), vars.iter().map(|&v| *sol.var_value(v)).collect()))
    })?;
    let notion = match dir {
        Direction::Down => Notion::WeakDown,
        Direction::Up => Notion::WeakUp,
    };
    Ok(MonotonicityReport::from_values(
        notion,
        opts.tol,
        results
            .into_iter()
            .enumerate()
            .map(|(i, (v, delta))| (v, Witness::Lp { set_index: i, delta })),
    ))
}

/// Every notion for one kernel, in a fixed order.
pub fn check_all(c: &Chain, zm: &ZetaMobius, tol: f64, exec: Exec) -> Result<Vec<MonotonicityReport>> {
    let mut out = vec![
        mobius_monotone(c, zm, Direction::Down, tol)?,
        mobius_monotone(c, zm, Direction::Up, tol)?,
    ];
    let weak = WeakOptions {
        tol,
        exec,
        ..WeakOptions::default()
    };
    for dir in [Direction::Down, Direction::Up] {
        match weak_monotone(c, zm, dir, weak) {
            Ok(r) => out.push(r),
            Err(Error::UpSetExplosion { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    match strong_stochastic_monotone(c, DEFAULT_UP_SET_CAP, tol) {
        Ok(r) => out.push(r),
        Err(Error::UpSetExplosion { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}
