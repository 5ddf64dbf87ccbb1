//! Availability chain of an unreliable network.
//!
//! The state is the set `D ⊆ J` of nodes that are down, encoded as a cube
//! bitmask. A group `I` of working nodes breaks down at rate
//! `psi(D ∪ I) / psi(D)` and a group `H` of broken nodes is repaired at rate
//! `phi(D) / phi(D \ H)`. The stationary law is proportional to
//! `psi(D) / phi(D)` and the process is reversible.
//!
//! The continuous-time generator is turned into a discrete-time kernel by
//! uniformization, `P = I + Q / Lambda_u`, which keeps the stationary law.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chain::{vec_mat, Chain, StationaryLaw};
use crate::convergence::{absorption_tail, separation_curve, sst_bound_check, AbsorptionLaw, SeparationCurve, SstReport};
use crate::dual::{build_ssd, DualChain, SsdOptions};
use crate::error::{Error, Result};
use crate::monotonicity::{mobius_monotone, MonotonicityReport};
use crate::poset::Poset;
use crate::{Direction, Tolerances};

/// Largest node count accepted by the pipeline.
pub const MAX_NODES: usize = 14;
pub const DEFAULT_MULTIPLIER: f64 = 1.05;

/// Parametric rate functions on subsets.
#[derive(Debug, Clone, PartialEq)]
pub enum RateFamily {
    /// `c^{|D|}`.
    Power { c: f64 },
    /// `prod_{i in D} w_i`.
    Product { weights: Vec<f64> },
}

impl RateFamily {
    fn eval(&self, mask: u32) -> Option<f64> {
        match self {
            RateFamily::Power { c } => Some(c.powi(mask.count_ones() as i32)),
            RateFamily::Product { weights } => {
                // Bits beyond the weight vector have no value.
                if weights.len() < 32 && mask >> weights.len() != 0 {
                    return None;
                }
                let mut v = 1.0;
                for (i, w) in weights.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        v *= w;
                    }
                }
                Some(v)
            }
        }
    }
}

/// A subset function given by a table keyed by bitmask, a family, or both;
/// table entries take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateSource {
    pub table: BTreeMap<u32, f64>,
    pub family: Option<RateFamily>,
}

impl RateSource {
    pub fn family(f: RateFamily) -> RateSource {
        RateSource {
            table: BTreeMap::new(),
            family: Some(f),
        }
    }

    pub fn table(values: impl IntoIterator<Item = (u32, f64)>) -> RateSource {
        RateSource {
            table: values.into_iter().collect(),
            family: None,
        }
    }
}

/// Dense `psi` and `phi` over all `2^d` subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunctions {
    d: usize,
    psi: Vec<f64>,
    phi: Vec<f64>,
}

impl RateFunctions {
    pub fn new(d: usize, psi: &RateSource, phi: &RateSource) -> Result<RateFunctions> {
        if d == 0 || d > MAX_NODES {
            return Err(Error::DimensionTooLarge {
                what: "node count",
                value: d,
                max: MAX_NODES,
            });
        }
        let dense = |src: &RateSource, function: &'static str| -> Result<Vec<f64>> {
            if let Some((&mask, _)) = src.table.iter().find(|(&mask, _)| mask >> d != 0) {
                return Err(Error::InvalidParameter(format!("{function} has subset mask {mask} outside {d} nodes")));
            }
            (0..1u32 << d)
                .map(|mask| {
                    let v = src
                        .table
                        .get(&mask)
                        .copied()
                        .or_else(|| src.family.as_ref().and_then(|f| f.eval(mask)))
                        .ok_or(Error::MissingSubsetValue {
                            function,
                            mask: mask as usize,
                        })?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "{function}({mask}) = {v} is not positive"
                        )));
                    }
                    Ok(v)
                })
                .collect()
        };
        Ok(RateFunctions {
            d,
            psi: dense(psi, "psi")?,
            phi: dense(phi, "phi")?,
        })
    }

    /// `psi(D) = prod_{i in D} a_i`, `phi(D) = prod_{i in D} b_i`: with
    /// single-node moves node `i` fails at rate `a_i` and is repaired at `b_i`.
    pub fn product_form(a: &[f64], b: &[f64]) -> Result<RateFunctions> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "repair weights",
                expected: a.len(),
                found: b.len(),
            });
        }
        RateFunctions::new(
            a.len(),
            &RateSource::family(RateFamily::Product { weights: a.to_vec() }),
            &RateSource::family(RateFamily::Product { weights: b.to_vec() }),
        )
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn psi(&self, mask: u32) -> f64 {
        self.psi[mask as usize]
    }

    pub fn phi(&self, mask: u32) -> f64 {
        self.phi[mask as usize]
    }
}

/// Which group moves the generator allows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MoveSet {
    /// Any non-empty group fails or is repaired at once.
    #[default]
    All,
    /// One node at a time.
    SingleNode,
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub q: DMatrix<f64>,
    pub poset: Arc<Poset>,
}

/// Uniformized kernel and its rate.
#[derive(Debug, Clone)]
pub struct Uniformized {
    pub chain: Chain,
    /// One discrete step corresponds to `1 / lambda_u` time units.
    pub lambda_u: f64,
}

pub fn availability_generator(r: &RateFunctions) -> Result<Generator> {
    availability_generator_with(r, MoveSet::All)
}

pub fn availability_generator_with(r: &RateFunctions, moves: MoveSet) -> Result<Generator> {
    let poset = Arc::new(Poset::cube(r.d)?);
    let m = poset.len();
    let full = (1u32 << r.d) - 1;
    let mut q = DMatrix::<f64>::zeros(m, m);
    let allowed = |group: u32| moves == MoveSet::All || group.count_ones() == 1;
    for k in 0..m {
        let down = poset.mask(k).expect("cube poset");
        // Non-empty subsets of the working nodes, then of the broken ones.
        let up = full & !down;
        let mut group = up;
        while group != 0 {
            if allowed(group) {
                let target = poset.index_of_mask(down | group).expect("cube state");
                q[(k, target)] += r.psi(down | group) / r.psi(down);
            }
            group = (group - 1) & up;
        }
        let mut group = down;
        while group != 0 {
            if allowed(group) {
                let target = poset.index_of_mask(down & !group).expect("cube state");
                q[(k, target)] += r.phi(down) / r.phi(down & !group);
            }
            group = (group - 1) & down;
        }
        q[(k, k)] = -q.row(k).sum();
    }
    Ok(Generator { q, poset })
}

/// `P = I + Q / Lambda_u` with `Lambda_u = multiplier * max_D |Q(D, D)|`.
pub fn uniformize(g: &Generator, multiplier: f64) -> Result<Uniformized> {
    if !(multiplier >= 1.0 && multiplier.is_finite()) {
        return Err(Error::InvalidParameter(format!("multiplier {multiplier} must be at least 1")));
    }
    let rate = (0..g.q.nrows()).map(|i| g.q[(i, i)].abs()).fold(0.0, f64::max);
    if rate == 0.0 {
        return Err(Error::ZeroGenerator);
    }
    let lambda_u = multiplier * rate;
    let m = g.q.nrows();
    let mut p = DMatrix::identity(m, m) + &g.q / lambda_u;
    // The diagonal can come out as -1e-17 when multiplier = 1.
    for i in 0..m {
        if p[(i, i)] < 0.0 && p[(i, i)] > -1e-12 {
            p[(i, i)] = 0.0;
        }
    }
    Ok(Uniformized {
        chain: Chain::new(Arc::clone(&g.poset), p, None)?,
        lambda_u,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub multiplier: f64,
    pub moves: MoveSet,
    pub direction: Direction,
    pub horizon: usize,
    pub tol: Tolerances,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            multiplier: DEFAULT_MULTIPLIER,
            moves: MoveSet::All,
            direction: Direction::Down,
            horizon: crate::convergence::DEFAULT_HORIZON,
            tol: Tolerances::default(),
        }
    }
}

/// Everything the pipeline computed, up to the stage where it stopped.
#[derive(Debug, Clone)]
pub struct AvailabilityReport {
    pub d: usize,
    pub options: PipelineOptions,
    pub generator: Generator,
    pub lambda_u: f64,
    pub chain: Chain,
    pub stationary: StationaryLaw,
    /// `|pi Q|_inf`.
    pub generator_residual: f64,
    /// Möbius checks of the kernel and of its time reversal.
    pub monotonicity: [MonotonicityReport; 2],
    /// Name of the stage that ended the run early, if any.
    pub stopped_at: Option<&'static str>,
    pub dual: Option<DualChain>,
    pub separation: Option<SeparationCurve>,
    pub absorption: Option<AbsorptionLaw>,
    pub sst: Option<SstReport>,
}

/// generator → uniformize → stationary → monotonicity → dual → curves.
///
/// The chain starts with every node up (`D = ∅`) in the down case and with
/// every node down in the up case. A failed monotonicity check is not an
/// error: the report is returned with `stopped_at = Some("monotonicity")`.
pub fn availability_pipeline(r: &RateFunctions, opts: PipelineOptions) -> Result<AvailabilityReport> {
    let generator = availability_generator_with(r, opts.moves).map_err(|e| e.at_stage("generator"))?;
    let Uniformized { chain, lambda_u } =
        uniformize(&generator, opts.multiplier).map_err(|e| e.at_stage("uniformize"))?;
    let start = match opts.direction {
        Direction::Down => 0,
        Direction::Up => chain.len() - 1,
    };
    let chain = chain.with_point_mass(start);
    let stationary = chain.stationary_with(&opts.tol).map_err(|e| e.at_stage("stationary"))?;
    let generator_residual = vec_mat(&stationary.pi, &generator.q).amax();

    let zm = chain.poset().zeta_mobius().map_err(|e| e.at_stage("monotonicity"))?;
    let monotonicity = (|| {
        let rev = chain.reverse(&stationary)?;
        Ok::<_, Error>([
            mobius_monotone(&chain, &zm, opts.direction, opts.tol.mono)?,
            mobius_monotone(&rev, &zm, opts.direction, opts.tol.mono)?,
        ])
    })()
    .map_err(|e| e.at_stage("monotonicity"))?;

    let mut report = AvailabilityReport {
        d: r.d(),
        options: opts,
        generator,
        lambda_u,
        chain,
        stationary,
        generator_residual,
        monotonicity,
        stopped_at: None,
        dual: None,
        separation: None,
        absorption: None,
        sst: None,
    };
    if !report.monotonicity.iter().all(|m| m.verdict) {
        report.stopped_at = Some("monotonicity");
        return Ok(report);
    }

    let ssd_opts = SsdOptions {
        tol: opts.tol,
        force: false,
    };
    let dual = build_ssd(&report.chain, &report.stationary, &zm, opts.direction, ssd_opts)
        .map_err(|e| e.at_stage("dual"))?;
    let separation =
        separation_curve(&report.chain, &report.stationary, opts.horizon).map_err(|e| e.at_stage("convergence"))?;
    let absorption = absorption_tail(&dual, opts.horizon).map_err(|e| e.at_stage("convergence"))?;
    report.sst = Some(sst_bound_check(&separation, &absorption, opts.tol.identity));
    report.dual = Some(dual);
    report.separation = Some(separation);
    report.absorption = Some(absorption);
    Ok(report)
}
