//! Command dispatch: read a spec, run one analysis, render the artifact.

use std::path::{Path, PathBuf};

use ssdual::availability::{availability_pipeline, MoveSet, PipelineOptions, DEFAULT_MULTIPLIER};
use ssdual::convergence::{
    absorption_tail, cube_eigenvalues, cube_separation_formula_curve, separation_curve, simulate_absorption,
    sst_bound_check, AbsorptionLaw, SeparationCurve, SimulationOptions, DEFAULT_HORIZON,
};
use ssdual::cube::{sweep, SweepOutcome};
use ssdual::dual::{build_ssd, DualChain, SsdOptions};
use ssdual::exact::refine;
use ssdual::monotonicity::{check_all, mobius_monotone, MonotonicityReport, Witness};
use ssdual::spectrum::eigenvalues;
use ssdual::{Chain, Direction, ErrorKind, Exec, Poset, Tolerances};

use crate::emit::{float, Doc, Table};
use crate::error::{CliError, Result};
use crate::spec::{read_spec, ChainModel, SpecFile};

/// Horizon used by `simulate` when none is given.
pub const DEFAULT_SIMULATION_HORIZON: usize = 50;
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Every monotonicity notion.
    Check,
    /// The strong stationary dual, written as a spec file.
    Dual,
    /// Separation curve next to the dual's absorption tail.
    Sep,
    /// Eigenvalues.
    Eig,
    /// Generate and analyze a walk from a [cube] stanza.
    Cube,
    /// The availability pipeline.
    Avail,
    /// Admissibility over a parameter grid.
    Sweep,
    /// Monte Carlo absorption times.
    Simulate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Dual => "dual",
            Command::Sep => "sep",
            Command::Eig => "eig",
            Command::Cube => "cube",
            Command::Avail => "avail",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
        }
    }

    /// File extension of the artifact.
    pub fn extension(self) -> &'static str {
        match self {
            Command::Sep | Command::Sweep | Command::Simulate => "csv",
            _ => "toml",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    /// Directory for the artifact when `output` is not given.
    pub output_dir: Option<PathBuf>,
    pub tol: Tolerances,
    pub horizon: Option<usize>,
    pub seed: u64,
    pub samples: usize,
    pub exact: bool,
    pub multiplier: Option<f64>,
    pub direction: Direction,
}

impl RunConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            command,
            input: input.into(),
            output: None,
            output_dir: None,
            tol: Tolerances::default(),
            horizon: None,
            seed: 0,
            samples: DEFAULT_SAMPLES,
            exact: false,
            multiplier: None,
            direction: Direction::Down,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("--tolerance-row", self.tol.row), ("--tolerance-mono", self.tol.mono)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Usage(format!("{name} must be positive, got {t}")));
            }
        }
        if self.command == Command::Simulate && self.samples == 0 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        if let Some(m) = self.multiplier {
            if !(m.is_finite() && m >= 1.0) {
                return Err(CliError::Usage(format!("--multiplier must be at least 1, got {m}")));
            }
        }
        Ok(())
    }

    /// Where the artifact goes; `None` means stdout.
    pub fn destination(&self) -> Option<PathBuf> {
        self.output.clone().or_else(|| {
            self.output_dir.as_ref().map(|dir| {
                let stem = self.input.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
                dir.join(format!("{stem}.{}.{}", self.command.as_str(), self.command.extension()))
            })
        })
    }

    fn header(&self, model: &str) -> Vec<String> {
        let mut params = format!("direction={}", self.direction);
        match self.command {
            Command::Sep | Command::Cube | Command::Avail => {
                params += &format!(" horizon={}", self.horizon.unwrap_or(DEFAULT_HORIZON))
            }
            Command::Simulate => {
                params += &format!(
                    " horizon={} seed={} samples={}",
                    self.horizon.unwrap_or(DEFAULT_SIMULATION_HORIZON),
                    self.seed,
                    self.samples
                )
            }
            _ => {}
        }
        if self.exact {
            params += " exact=true";
        }
        vec![
            format!("ssdual {}", self.command.as_str()),
            format!("input: {}", self.input.display()),
            format!("model: {model}"),
            format!("parameters: {params}"),
            format!(
                "tolerances: row={:e} identity={:e} mono={:e}",
                self.tol.row, self.tol.identity, self.tol.mono
            ),
        ]
    }
}

/// The rendered artifact, plus the failure that cut the analysis short, if
/// any. A partial artifact is still written before the failure is reported.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub failure: Option<CliError>,
}

impl From<String> for Outcome {
    fn from(text: String) -> Outcome {
        Outcome { text, failure: None }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let spec = read_spec(&cfg.input)?;
    run_spec(cfg, &spec)
}

pub fn run_spec(cfg: &RunConfig, spec: &SpecFile) -> Result<Outcome> {
    match cfg.command {
        Command::Check => check(cfg, spec).map(Outcome::from),
        Command::Dual => dual(cfg, spec).map(Outcome::from),
        Command::Sep => sep(cfg, spec),
        Command::Eig => eig(cfg, spec).map(Outcome::from),
        Command::Cube => cube(cfg, spec),
        Command::Avail => avail(cfg, spec),
        Command::Sweep => sweep_grid(cfg, spec).map(Outcome::from),
        Command::Simulate => simulate(cfg, spec).map(Outcome::from),
    }
}

/// Runs and writes the artifact; returns where it went (`None`: stdout).
pub fn execute(cfg: &RunConfig) -> Result<(Option<PathBuf>, Option<CliError>)> {
    let outcome = run(cfg)?;
    let dest = cfg.destination();
    match &dest {
        Some(path) => write_file(path, &outcome.text)?,
        None => print!("{}", outcome.text),
    }
    Ok((dest, outcome.failure))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(err)?;
    }
    std::fs::write(path, text).map_err(err)
}

// ---------------------------------------------------------------------------

fn labels(poset: &Poset) -> Vec<String> {
    (0..poset.len()).map(|i| poset.label(i).into_owned()).collect()
}

/// Starts the chain at the extremal state of `dir` when the spec gave no
/// initial law.
fn with_start(chain: Chain, dir: Direction) -> Result<(Chain, bool)> {
    if chain.initial().is_some() {
        return Ok((chain, false));
    }
    let poset = chain.poset();
    let ext = match dir {
        Direction::Down => poset.minimal(),
        Direction::Up => poset.maximal(),
    };
    match ext.as_slice() {
        [only] => {
            let i = *only;
            Ok((chain.with_point_mass(i), true))
        }
        _ => Err(CliError::field(
            "chain",
            format!("no initial law given and no unique {} state to start from", match dir {
                Direction::Down => "minimal",
                Direction::Up => "maximal",
            }),
        )),
    }
}

fn point_mass(chain: &Chain) -> Option<usize> {
    let nu = chain.initial()?;
    let i = nu.iter().position(|&x| x == 1.0)?;
    nu.iter().enumerate().all(|(j, &x)| j == i || x == 0.0).then_some(i)
}

fn build_dual(chain: &Chain, cfg: &RunConfig) -> Result<DualChain> {
    let pi = chain.stationary()?;
    let zm = chain.poset().zeta_mobius()?;
    Ok(build_ssd(chain, &pi, &zm, cfg.direction, SsdOptions { tol: cfg.tol, force: false })?)
}

fn is_precondition(e: &CliError) -> bool {
    e.kind() == ErrorKind::Precondition
}

fn witness_fields(doc: &mut Doc, poset: &Poset, w: &Witness) {
    let l = |i: usize| poset.label(i).into_owned();
    match w {
        Witness::None => doc.str("witness_kind", "none"),
        Witness::Entry { row, col } => {
            doc.str("witness_kind", "entry");
            doc.str_list("witness", [l(*row), l(*col)]);
        }
        Witness::Index(i) => {
            doc.str("witness_kind", "index");
            doc.str_list("witness", [l(*i)]);
        }
        Witness::UpSet { lower, upper, up_set } => {
            doc.str("witness_kind", "up-set");
            doc.str_list("witness", [l(*lower), l(*upper)]);
            doc.str_list("up_set", up_set.iter().map(|&i| l(i)));
        }
        Witness::Lp { set_index, delta } => {
            doc.str("witness_kind", "lp");
            doc.str_list("witness", [l(*set_index)]);
            doc.float_list("delta", delta.iter().copied());
        }
    }
}

fn report_fields(doc: &mut Doc, poset: &Poset, r: &MonotonicityReport) {
    doc.str("notion", r.notion.as_str());
    doc.bool("verdict", r.verdict);
    doc.float("worst_value", r.worst_value);
    doc.float("tolerance", r.tolerance_used);
    doc.int("near_zero", r.near_zero as i64);
    doc.bool("exact", r.exact);
    witness_fields(doc, poset, &r.witness);
}

fn check(cfg: &RunConfig, spec: &SpecFile) -> Result<String> {
    let model = spec.chain_model(&cfg.tol)?;
    let chain = &model.chain;
    let poset = chain.poset();
    let zm = poset.zeta_mobius()?;
    let mut reports = check_all(chain, &zm, cfg.tol.mono, Exec::default())?;
    if cfg.exact {
        if let Some(exact) = &model.exact {
            for r in reports.iter_mut() {
                *r = refine(r.clone(), exact, &zm)?;
            }
        }
    }
    let mut doc = Doc::new();
    for line in cfg.header(&model.description) {
        doc.comment(&line);
    }
    doc.comment("vectors follow the order of `states`");
    doc.table("model");
    doc.int("states", poset.len() as i64);
    doc.str_list("labels", labels(poset));
    match chain.stationary() {
        Ok(pi) => {
            doc.bool("ergodic", true);
            doc.float_list("stationary", pi.pi.iter().copied());
        }
        Err(e) => {
            doc.bool("ergodic", false);
            doc.str("stationary_error", &e.to_string());
        }
    }
    for r in &reports {
        doc.array_table("report");
        report_fields(&mut doc, poset, r);
    }
    Ok(doc.finish())
}

/// Writes `[poset]` so that the enumeration of the re-parsed poset matches
/// this one; returns the enumeration index of each file row.
fn write_poset(doc: &mut Doc, poset: &Poset) -> Vec<usize> {
    doc.table("poset");
    if let Some(d) = poset.cube_dim() {
        doc.int("cube", d as i64);
        (0..poset.len()).map(|mask| poset.index_of_mask(mask as u32).unwrap()).collect()
    } else {
        doc.str_list("labels", labels(poset));
        let covers: Vec<(String, String)> = poset
            .covers()
            .into_iter()
            .map(|(a, b)| (poset.label(a).into_owned(), poset.label(b).into_owned()))
            .collect();
        doc.pair_list("covers", &covers);
        (0..poset.len()).collect()
    }
}

fn dual(cfg: &RunConfig, spec: &SpecFile) -> Result<String> {
    let model = spec.chain_model(&cfg.tol)?;
    let (chain, defaulted) = with_start(model.chain, cfg.direction)?;
    let d = build_dual(&chain, cfg)?;
    let poset = chain.poset();
    let mut doc = Doc::new();
    for line in cfg.header(&model.description) {
        doc.comment(&line);
    }
    doc.comment("strong stationary dual; this file is itself a chain spec");
    if defaulted {
        doc.comment(&format!("initial law: point mass at the extremal state of the {} case", cfg.direction));
    }
    let order = write_poset(&mut doc, poset);
    doc.table("chain");
    doc.matrix("matrix", order.iter().map(|&i| order.iter().map(|&j| d.p_star[(i, j)]).collect()));
    doc.float_list("initial", order.iter().map(|&i| d.nu_star[i]));
    doc.table("meta");
    doc.str("command", "dual");
    doc.str("direction", d.direction.as_str());
    doc.str("absorbing_state", &poset.label(d.absorbing_index));
    doc.bool("upper_triangular", d.is_upper_triangular(cfg.tol.row));
    doc.float("clamped", d.clamped);
    doc.float("residual_initial", d.residuals.initial);
    doc.float("residual_intertwining", d.residuals.intertwining);
    doc.float("residual_row_sum", d.residuals.row_sum);
    doc.float("min_nu_star", d.residuals.min_nu_star);
    doc.float("min_p_star", d.residuals.min_p_star);
    doc.float_list("link_h", order.iter().map(|&i| d.link.h[i]));
    doc.matrix("link", order.iter().map(|&i| order.iter().map(|&j| d.link.lambda[(i, j)]).collect()));
    Ok(doc.finish())
}

/// Separation curve, absorption tail (when the dual exists) and the
/// closed-form curve (unmodified walks started at the extremal state).
struct Curves {
    s: SeparationCurve,
    law: Option<AbsorptionLaw>,
    formula: Option<Vec<f64>>,
    notes: Vec<String>,
    failure: Option<CliError>,
}

fn curves(model: &ChainModel, cfg: &RunConfig, horizon: usize) -> Result<Curves> {
    let (chain, defaulted) = with_start(model.chain.clone(), cfg.direction)?;
    let mut notes = Vec::new();
    if defaulted {
        notes.push(format!("initial law: point mass at the extremal state of the {} case", cfg.direction));
    }
    let pi = chain.stationary()?;
    let s = separation_curve(&chain, &pi, horizon)?;
    let (law, failure) = match build_dual(&chain, cfg) {
        Ok(d) => (Some(absorption_tail(&d, horizon)?), None),
        Err(e) if is_precondition(&e) => {
            notes.push(format!("dual unavailable: {e}"));
            (None, Some(e))
        }
        Err(e) => return Err(e),
    };
    let start = match cfg.direction {
        Direction::Down => 0,
        Direction::Up => chain.len() - 1,
    };
    let formula = match (&model.walk, point_mass(&chain)) {
        (Some(w), Some(i)) if i == start => {
            // The up case is the down case of the complemented walk.
            let (a, b) = match cfg.direction {
                Direction::Down => (&w.alpha, &w.beta),
                Direction::Up => (&w.beta, &w.alpha),
            };
            match cube_separation_formula_curve(a, b, horizon) {
                Ok(f) => Some(f),
                Err(e) => {
                    notes.push(format!("closed form unavailable: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    if let Some(law) = &law {
        let r = sst_bound_check(&s, law, cfg.tol.identity);
        notes.push(format!(
            "mean absorption time {}; max s(n) - P(T > n) {}; equality {}",
            float(law.mean),
            float(r.max_violation),
            r.equality
        ));
    }
    Ok(Curves {
        s,
        law,
        formula,
        notes,
        failure,
    })
}

fn opt(v: Option<f64>) -> String {
    float(v.unwrap_or(f64::NAN))
}

fn sep(cfg: &RunConfig, spec: &SpecFile) -> Result<Outcome> {
    let model = spec.chain_model(&cfg.tol)?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let c = curves(&model, cfg, horizon)?;
    let mut t = Table::new(&["n", "s", "tail", "formula"]);
    for line in cfg.header(&model.description) {
        t.comment(line);
    }
    for note in &c.notes {
        t.comment(note.clone());
    }
    for n in 0..=horizon {
        t.row(vec![
            n.to_string(),
            float(c.s.values[n]),
            opt(c.law.as_ref().map(|l| l.tail[n])),
            opt(c.formula.as_ref().map(|f| f[n])),
        ]);
    }
    Ok(Outcome {
        text: t.finish(),
        failure: c.failure,
    })
}

/// Eigenvalues sorted by real part, descending, and where they came from.
fn spectrum(model: &ChainModel, cfg: &RunConfig) -> Result<(&'static str, Vec<f64>, Option<Vec<f64>>)> {
    if let Some(w) = &model.walk {
        return Ok(("closed-form", cube_eigenvalues(&w.alpha, &w.beta)?, None));
    }
    if let Ok((chain, _)) = with_start(model.chain.clone(), cfg.direction) {
        if let Ok(d) = build_dual(&chain, cfg) {
            if d.is_upper_triangular(cfg.tol.row) {
                let mut v: Vec<f64> = d.p_star.diagonal().iter().copied().collect();
                v.sort_by(|a, b| b.total_cmp(a));
                return Ok(("dual-diagonal", v, None));
            }
        }
    }
    let mut v = eigenvalues(model.chain.matrix());
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(("eigensolver", v.iter().map(|z| z.re).collect(), Some(v.iter().map(|z| z.im).collect())))
}

fn eig(cfg: &RunConfig, spec: &SpecFile) -> Result<String> {
    let model = spec.chain_model(&cfg.tol)?;
    let (source, re, im) = spectrum(&model, cfg)?;
    let mut doc = Doc::new();
    for line in cfg.header(&model.description) {
        doc.comment(&line);
    }
    doc.table("eigenvalues");
    doc.str("source", source);
    doc.int("count", re.len() as i64);
    doc.float_list("values", re);
    if let Some(im) = im {
        doc.float_list("imaginary", im);
    }
    Ok(doc.finish())
}

fn curve_table(doc: &mut Doc, c: &Curves, horizon: usize) {
    doc.table("curve");
    doc.int_list("n", (0..=horizon as i64).collect::<Vec<_>>());
    doc.float_list("s", c.s.values.iter().copied());
    if let Some(law) = &c.law {
        doc.float_list("tail", law.tail.iter().copied());
    }
    if let Some(f) = &c.formula {
        doc.float_list("formula", f.iter().copied());
    }
}

fn cube(cfg: &RunConfig, spec: &SpecFile) -> Result<Outcome> {
    let stanza = spec
        .cube
        .as_ref()
        .ok_or_else(|| CliError::Schema("the cube command needs a [cube] stanza".into()))?;
    let model = spec.chain_model(&cfg.tol)?;
    let chain = &model.chain;
    let zm = chain.poset().zeta_mobius()?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let mut doc = Doc::new();
    for line in cfg.header(&model.description) {
        doc.comment(&line);
    }
    let alpha: Vec<f64> = stanza.alpha.iter().map(|x| x.value("cube.alpha")).collect::<Result<_>>()?;
    let beta: Vec<f64> = stanza.beta.iter().map(|x| x.value("cube.beta")).collect::<Result<_>>()?;
    let total: f64 = alpha.iter().chain(&beta).sum();
    doc.table("cube");
    doc.int("d", stanza.d as i64);
    doc.float_list("alpha", alpha);
    doc.float_list("beta", beta);
    doc.float("total_rate", total);
    doc.bool("admissible", total <= 1.0 + 1e-12);
    for dir in [Direction::Down, Direction::Up] {
        let mut r = mobius_monotone(chain, &zm, dir, cfg.tol.mono)?;
        if cfg.exact {
            if let Some(exact) = &model.exact {
                r = refine(r, exact, &zm)?;
            }
        }
        doc.array_table("monotonicity");
        report_fields(&mut doc, chain.poset(), &r);
    }
    let (source, re, im) = spectrum(&model, cfg)?;
    doc.table("eigenvalues");
    doc.str("source", source);
    doc.float_list("values", re);
    if let Some(im) = im {
        doc.float_list("imaginary", im);
    }
    let c = curves(&model, cfg, horizon)?;
    for note in &c.notes {
        doc.comment(note);
    }
    if let Some(law) = &c.law {
        doc.table("absorption");
        doc.float("mean", law.mean);
    }
    curve_table(&mut doc, &c, horizon);
    Ok(Outcome {
        text: doc.finish(),
        failure: c.failure,
    })
}

fn avail(cfg: &RunConfig, spec: &SpecFile) -> Result<Outcome> {
    let (r, moves, spec_multiplier) = spec.rate_functions()?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let opts = PipelineOptions {
        multiplier: cfg.multiplier.or(spec_multiplier).unwrap_or(DEFAULT_MULTIPLIER),
        moves,
        direction: cfg.direction,
        horizon,
        tol: cfg.tol,
    };
    let report = availability_pipeline(&r, opts)?;
    let poset = report.chain.poset();
    let mut doc = Doc::new();
    for line in cfg.header(&format!("availability chain on {} nodes", report.d)) {
        doc.comment(&line);
    }
    doc.comment("vectors follow the order of `labels`; label position i is 1 when node i is down");
    doc.table("availability");
    doc.int("d", report.d as i64);
    doc.str(
        "moves",
        match opts.moves {
            MoveSet::All => "all",
            MoveSet::SingleNode => "single-node",
        },
    );
    doc.float("multiplier", opts.multiplier);
    doc.float("lambda_u", report.lambda_u);
    doc.float("generator_residual", report.generator_residual);
    doc.str("stopped_at", report.stopped_at.unwrap_or(""));
    doc.table("stationary");
    doc.str_list("labels", labels(poset));
    doc.float_list("pi", report.stationary.pi.iter().copied());
    let names = ["kernel", "reversal"];
    for (name, m) in names.iter().zip(&report.monotonicity) {
        doc.array_table("monotonicity");
        doc.str("of", name);
        report_fields(&mut doc, poset, m);
    }
    if let (Some(law), Some(sst)) = (&report.absorption, &report.sst) {
        doc.table("absorption");
        doc.float("mean", law.mean);
        doc.float("max_violation", sst.max_violation);
        doc.float("max_gap", sst.max_gap);
        doc.bool("equality", sst.equality);
    }
    if let (Some(s), Some(law)) = (&report.separation, &report.absorption) {
        doc.table("curve");
        doc.int_list("n", (0..=horizon as i64).collect::<Vec<_>>());
        doc.float_list("s", s.values.iter().copied());
        doc.float_list("tail", law.tail.iter().copied());
    }
    let failure = report.stopped_at.map(|stage| {
        let worst = report
            .monotonicity
            .iter()
            .find(|m| !m.verdict)
            .cloned()
            .expect("the pipeline stops only on a failed check");
        CliError::Core(ssdual::Error::PreconditionFailed {
            reason: format!(
                "availability pipeline stopped at stage `{stage}`: the uniformized chain is not {}-Möbius monotone (try a larger --multiplier)",
                opts.direction
            ),
            report: Box::new(worst),
        })
    });
    Ok(Outcome {
        text: doc.finish(),
        failure,
    })
}

fn sweep_grid(cfg: &RunConfig, spec: &SpecFile) -> Result<String> {
    let grid = spec.sweep_grid(cfg.tol)?;
    let points = sweep(&grid, Exec::default())?;
    let mut t = Table::new(&[
        "alpha",
        "beta",
        "kappa",
        "status",
        "mobius_down",
        "mobius_up",
        "worst_down",
        "worst_up",
        "triangular_dual",
        "note",
    ]);
    for line in cfg.header(&format!("uniform walks on {{0,1}}^{} with symmetry-axis moves", grid.d)) {
        t.comment(line);
    }
    for p in points {
        let mut row = vec![float(p.alpha), float(p.beta), float(p.kappa)];
        match p.outcome {
            SweepOutcome::Evaluated {
                mobius_down,
                mobius_up,
                worst_down,
                worst_up,
                triangular_dual,
            } => row.extend([
                "evaluated".into(),
                mobius_down.to_string(),
                mobius_up.to_string(),
                float(worst_down),
                float(worst_up),
                triangular_dual.map_or("".into(), |b| b.to_string()),
                String::new(),
            ]),
            SweepOutcome::Invalid(reason) => row.extend([
                "invalid".into(),
                String::new(),
                String::new(),
                float(f64::NAN),
                float(f64::NAN),
                String::new(),
                reason,
            ]),
        }
        t.row(row);
    }
    Ok(t.finish())
}

fn simulate(cfg: &RunConfig, spec: &SpecFile) -> Result<String> {
    let model = spec.chain_model(&cfg.tol)?;
    let (chain, defaulted) = with_start(model.chain, cfg.direction)?;
    let d = build_dual(&chain, cfg)?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_SIMULATION_HORIZON);
    let law = absorption_tail(&d, horizon)?;
    let opts = SimulationOptions {
        samples: cfg.samples,
        seed: cfg.seed,
        horizon,
        exec: Exec::default(),
    };
    let emp = simulate_absorption(&d, &opts)?;
    let mut t = Table::new(&["n", "tail", "empirical", "band_lo", "band_hi"]);
    for line in cfg.header(&model.description) {
        t.comment(line);
    }
    if defaulted {
        t.comment(format!("initial law: point mass at the extremal state of the {} case", cfg.direction));
    }
    t.comment(format!(
        "empirical mean {} (standard error {}), analytic mean {}, censored {}",
        float(emp.mean),
        float(emp.std_error),
        float(law.mean),
        emp.censored
    ));
    t.comment(match emp.envelopes(&law.tail) {
        None => "analytic tail inside the 99% bands at every n".to_string(),
        Some(n) => format!("analytic tail outside the 99% band first at n = {n}"),
    });
    for n in 0..=horizon {
        t.row(vec![
            n.to_string(),
            float(law.tail[n]),
            float(emp.tail[n]),
            float(emp.band_lo[n]),
            float(emp.band_hi[n]),
        ]);
    }
    Ok(t.finish())
}
