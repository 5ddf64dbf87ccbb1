//! Spec files: one TOML schema for posets, chains, cube walks, availability
//! models and sweep grids.
//!
//! ```toml
//! [poset]                  # labels + covers, or cube = d, or linear = m
//! labels = ["a", "b", "c"]
//! covers = [["a", "b"], ["b", "c"]]
//!
//! [chain]
//! matrix = [["1/2", "1/2", 0], [0.25, 0.5, 0.25], [0, "1/2", "1/2"]]
//! initial_state = "a"      # or initial = [...]
//! ```
//!
//! Rows and columns follow the label list, or the bitmask value for cubes
//! (bit `i - 1` holds `e_i`, labels read `e_1 e_2 ... e_d`). Numbers are
//! decimals or exact `"p/q"` strings. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use num_traits::{One, ToPrimitive, Zero};
use serde::Deserialize;
use ssdual::availability::{MoveSet, RateFamily, RateFunctions, RateSource};
use ssdual::cube::{apply_moves, nearest_neighbor_walk, power_chain, symmetry_axis_moves, CubeWalkParams, SweepGrid};
use ssdual::exact::{parse_rational, Rational};
use ssdual::{Chain, DMatrix, DVector, Poset, RowViolation, Tolerances};

use crate::emit::{self, Doc};
use crate::error::{BadRow, CliError, Result};

/// A number as written in the file: kept verbatim so that exact mode and
/// re-serialization see the original text.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn exact(&self, field: &str) -> Result<Rational> {
        let text = match self {
            Number::Int(i) => i.to_string(),
            // Shortest round-trip form: `0.1` is read as 1/10.
            Number::Float(x) if x.is_finite() => x.to_string(),
            Number::Float(x) => return Err(CliError::field(field, format!("{x} is not finite"))),
            Number::Text(s) => s.clone(),
        };
        parse_rational(&text).map_err(|e| CliError::field(field, e.to_string()))
    }

    pub fn value(&self, field: &str) -> Result<f64> {
        match self {
            Number::Int(i) => Ok(*i as f64),
            Number::Float(x) => Ok(*x),
            Number::Text(_) => {
                let r = self.exact(field)?;
                r.to_f64().ok_or_else(|| CliError::field(field, "out of range"))
            }
        }
    }

    fn write(&self) -> String {
        match self {
            Number::Int(i) => i.to_string(),
            Number::Float(x) => emit::float(*x),
            Number::Text(s) => format!("\"{s}\""),
        }
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Number {
        Number::Float(x)
    }
}

fn values(xs: &[Number], field: &str) -> Result<Vec<f64>> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| x.value(&format!("{field}[{i}]")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub poset: Option<PosetSpec>,
    pub chain: Option<ChainSpec>,
    pub cube: Option<CubeSpec>,
    pub availability: Option<AvailabilitySpec>,
    pub sweep: Option<SweepSpec>,
    /// Free-form annotations (written by `dual`); ignored by the analyses.
    pub meta: Option<toml::Table>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetSpec {
    pub labels: Option<Vec<String>>,
    /// Generating pairs `[lower, upper]`; covers suffice, extra pairs are
    /// harmless.
    pub covers: Option<Vec<(String, String)>>,
    pub cube: Option<usize>,
    pub linear: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub matrix: Option<Vec<Vec<Number>>>,
    pub initial: Option<Vec<Number>>,
    pub initial_state: Option<String>,
}

/// Nearest-neighbour walk on `{0,1}^d`, optionally modified.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeSpec {
    pub d: usize,
    pub alpha: Vec<Number>,
    pub beta: Vec<Number>,
    /// Mass moved on each symmetry-axis row.
    pub kappa: Option<Number>,
    /// Replace the walk by its `power`-step kernel.
    pub power: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilitySpec {
    pub d: usize,
    pub psi: RateSpec,
    pub phi: RateSpec,
    /// `"all"` (default) or `"single-node"`.
    pub moves: Option<String>,
    pub multiplier: Option<Number>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    /// `"power"` (`c^|D|`) or `"product"` (`prod w_i`).
    pub family: Option<String>,
    pub c: Option<Number>,
    pub weights: Option<Vec<Number>>,
    /// Subset values keyed by cube label; these override the family.
    pub table: Option<BTreeMap<String, Number>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub d: usize,
    pub alpha: Vec<Number>,
    pub beta: Vec<Number>,
    pub kappa: Vec<Number>,
}

pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let spec: SpecFile = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string().trim_end().to_string()))?;
    spec.check_structure()?;
    Ok(spec)
}

pub fn read_spec(path: &Path) -> Result<SpecFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

/// A chain ready for analysis.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub chain: Chain,
    /// Exact entries in enumeration order.
    pub exact: Option<Vec<Vec<Rational>>>,
    /// Set when the chain is an unmodified nearest-neighbour walk, so the
    /// closed forms apply.
    pub walk: Option<CubeWalkParams>,
    pub description: String,
}

impl SpecFile {
    fn check_structure(&self) -> Result<()> {
        let has_matrix = self.chain.as_ref().is_some_and(|c| c.matrix.is_some());
        let generators = [self.cube.is_some(), self.availability.is_some()];
        if has_matrix && generators.iter().any(|&g| g) {
            return Err(CliError::Schema(
                "ambiguous model: both chain.matrix and a generator stanza ([cube] or [availability])".into(),
            ));
        }
        if generators.iter().all(|&g| g) {
            return Err(CliError::Schema("ambiguous model: both [cube] and [availability]".into()));
        }
        if let Some(p) = &self.poset {
            let forms = [p.labels.is_some(), p.cube.is_some(), p.linear.is_some()];
            if forms.iter().filter(|&&f| f).count() != 1 {
                return Err(CliError::field("poset", "give exactly one of `labels`, `cube`, `linear`"));
            }
            if p.covers.is_some() && p.labels.is_none() {
                return Err(CliError::field("poset.covers", "only allowed together with `labels`"));
            }
            let generated = self.cube.as_ref().map(|c| c.d).or(self.availability.as_ref().map(|a| a.d));
            if let Some(d) = generated {
                if p.cube != Some(d) {
                    return Err(CliError::field("poset", format!("conflicts with the generator stanza on {{0,1}}^{d}")));
                }
            }
        }
        if let Some(c) = &self.chain {
            if c.initial.is_some() && c.initial_state.is_some() {
                return Err(CliError::field("chain", "give `initial` or `initial_state`, not both"));
            }
        }
        Ok(())
    }

    pub fn poset(&self) -> Result<Option<Poset>> {
        let Some(p) = &self.poset else {
            return Ok(None);
        };
        let poset = if let Some(d) = p.cube {
            Poset::cube(d)
        } else if let Some(m) = p.linear {
            Poset::linear(m)
        } else {
            let labels = p.labels.as_deref().unwrap_or_default();
            Poset::build(labels, p.covers.as_deref().unwrap_or_default())
        };
        poset.map(Some).map_err(|e| CliError::field("poset", e.to_string()))
    }

    /// The chain described by `[poset]` + `[chain].matrix`, or by `[cube]`.
    pub fn chain_model(&self, tol: &Tolerances) -> Result<ChainModel> {
        let matrix = self.chain.as_ref().and_then(|c| c.matrix.as_ref());
        let mut model = match (matrix, &self.cube) {
            (Some(rows), _) => {
                let poset = self.poset()?.ok_or_else(|| CliError::field("poset", "missing; chain.matrix needs it"))?;
                matrix_model(Arc::new(poset), rows, tol)?
            }
            (None, Some(cube)) => cube_model(cube)?,
            (None, None) => {
                return Err(CliError::Schema(
                    "no chain: expected [poset] with chain.matrix, or a [cube] stanza".into(),
                ))
            }
        };
        if let Some(c) = &self.chain {
            let poset = Arc::clone(model.chain.poset());
            if let Some(nu) = &c.initial {
                let v = values(nu, "chain.initial")?;
                if v.len() != poset.len() {
                    return Err(CliError::field(
                        "chain.initial",
                        format!("expected {} entries, found {}", poset.len(), v.len()),
                    ));
                }
                let nu = DVector::from_fn(poset.len(), |i, _| v[poset.input_position(i)]);
                model.chain = model.chain.with_initial(nu).map_err(|e| CliError::field("chain.initial", e.to_string()))?;
            } else if let Some(label) = &c.initial_state {
                let i = poset.index_of(label).map_err(|e| CliError::field("chain.initial_state", e.to_string()))?;
                model.chain = model.chain.with_point_mass(i);
            }
        }
        Ok(model)
    }

    pub fn rate_functions(&self) -> Result<(RateFunctions, MoveSet, Option<f64>)> {
        let a = self
            .availability
            .as_ref()
            .ok_or_else(|| CliError::Schema("missing [availability] stanza".into()))?;
        let psi = rate_source(&a.psi, a.d, "availability.psi")?;
        let phi = rate_source(&a.phi, a.d, "availability.phi")?;
        let r = RateFunctions::new(a.d, &psi, &phi).map_err(|e| CliError::field("availability", e.to_string()))?;
        let moves = match a.moves.as_deref() {
            None | Some("all") => MoveSet::All,
            Some("single-node") => MoveSet::SingleNode,
            Some(other) => {
                return Err(CliError::field(
                    "availability.moves",
                    format!("unknown move set `{other}` (expected \"all\" or \"single-node\")"),
                ))
            }
        };
        let multiplier = a.multiplier.as_ref().map(|m| m.value("availability.multiplier")).transpose()?;
        Ok((r, moves, multiplier))
    }

    pub fn sweep_grid(&self, tol: Tolerances) -> Result<SweepGrid> {
        let s = self.sweep.as_ref().ok_or_else(|| CliError::Schema("missing [sweep] stanza".into()))?;
        Ok(SweepGrid {
            d: s.d,
            alpha: values(&s.alpha, "sweep.alpha")?,
            beta: values(&s.beta, "sweep.beta")?,
            kappa: values(&s.kappa, "sweep.kappa")?,
            tol,
        })
    }

    /// Writes the spec back out; parsing the result gives an equal spec.
    pub fn to_toml(&self) -> String {
        let mut doc = Doc::new();
        let nums = |xs: &[Number]| format!("[{}]", xs.iter().map(Number::write).collect::<Vec<_>>().join(", "));
        let lines = |doc: &mut Doc, name: &str, items: Vec<(String, String)>| {
            doc.table(name);
            for (k, v) in items {
                doc.raw(&k, &v);
            }
        };
        if let Some(p) = &self.poset {
            doc.table("poset");
            if let Some(l) = &p.labels {
                doc.str_list("labels", l);
            }
            if let Some(c) = &p.covers {
                doc.pair_list("covers", c);
            }
            if let Some(d) = p.cube {
                doc.int("cube", d as i64);
            }
            if let Some(m) = p.linear {
                doc.int("linear", m as i64);
            }
        }
        if let Some(c) = &self.chain {
            let mut items = Vec::new();
            if let Some(rows) = &c.matrix {
                let body: Vec<String> = rows.iter().map(|r| format!("    {},", nums(r))).collect();
                items.push(("matrix".into(), format!("[\n{}\n]", body.join("\n"))));
            }
            if let Some(nu) = &c.initial {
                items.push(("initial".into(), nums(nu)));
            }
            if let Some(s) = &c.initial_state {
                items.push(("initial_state".into(), quoted(s)));
            }
            lines(&mut doc, "chain", items);
        }
        if let Some(c) = &self.cube {
            let mut items = vec![
                ("d".into(), c.d.to_string()),
                ("alpha".into(), nums(&c.alpha)),
                ("beta".into(), nums(&c.beta)),
            ];
            if let Some(k) = &c.kappa {
                items.push(("kappa".into(), k.write()));
            }
            if let Some(p) = c.power {
                items.push(("power".into(), p.to_string()));
            }
            lines(&mut doc, "cube", items);
        }
        if let Some(a) = &self.availability {
            let mut items = vec![("d".into(), a.d.to_string())];
            if let Some(m) = &a.moves {
                items.push(("moves".into(), quoted(m)));
            }
            if let Some(m) = &a.multiplier {
                items.push(("multiplier".into(), m.write()));
            }
            lines(&mut doc, "availability", items);
            for (name, r) in [("psi", &a.psi), ("phi", &a.phi)] {
                let mut items = Vec::new();
                if let Some(f) = &r.family {
                    items.push(("family".into(), quoted(f)));
                }
                if let Some(c) = &r.c {
                    items.push(("c".into(), c.write()));
                }
                if let Some(w) = &r.weights {
                    items.push(("weights".into(), nums(w)));
                }
                if let Some(t) = &r.table {
                    let body: Vec<String> = t.iter().map(|(k, v)| format!("{} = {}", quoted(k), v.write())).collect();
                    items.push(("table".into(), format!("{{ {} }}", body.join(", "))));
                }
                lines(&mut doc, &format!("availability.{name}"), items);
            }
        }
        if let Some(s) = &self.sweep {
            lines(
                &mut doc,
                "sweep",
                vec![
                    ("d".into(), s.d.to_string()),
                    ("alpha".into(), nums(&s.alpha)),
                    ("beta".into(), nums(&s.beta)),
                    ("kappa".into(), nums(&s.kappa)),
                ],
            );
        }
        let mut out = doc.finish();
        if let Some(meta) = &self.meta {
            let mut wrapper = toml::Table::new();
            wrapper.insert("meta".into(), toml::Value::Table(meta.clone()));
            out.push('\n');
            out.push_str(&toml::to_string(&wrapper).expect("meta table serializes"));
        }
        out
    }
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// File position of enumerated state `i` in the matrix rows.
fn file_row(poset: &Poset, i: usize) -> usize {
    poset.input_position(i)
}

fn matrix_model(poset: Arc<Poset>, rows: &[Vec<Number>], tol: &Tolerances) -> Result<ChainModel> {
    let m = poset.len();
    if rows.len() != m {
        return Err(CliError::field(
            "chain.matrix",
            format!("expected {m} rows for {m} states, found {}", rows.len()),
        ));
    }
    let mut exact = vec![vec![Rational::zero(); m]; m];
    let mut p = DMatrix::zeros(m, m);
    for i in 0..m {
        let fi = file_row(&poset, i);
        let row = &rows[fi];
        if row.len() != m {
            return Err(CliError::field(
                format!("chain.matrix[{fi}]"),
                format!("expected {m} entries, found {}", row.len()),
            ));
        }
        for j in 0..m {
            let field = format!("chain.matrix[{fi}][{}]", file_row(&poset, j));
            let x = &row[file_row(&poset, j)];
            exact[i][j] = x.exact(&field)?;
            p[(i, j)] = x.value(&field)?;
        }
    }
    let chain = Chain::validate(Arc::clone(&poset), p, None, tol.row).map_err(|e| match e {
        ssdual::Error::NotStochastic(v) => CliError::Rows(
            v.iter()
                .map(|rv| {
                    let i = match rv {
                        RowViolation::BadEntry { row, .. } | RowViolation::RowSum { row, .. } => *row,
                    };
                    let fi = file_row(&poset, i);
                    let state = poset.label(i).into_owned();
                    let message = match rv {
                        RowViolation::RowSum { sum, .. } => format!("row {fi} (state `{state}`) sums to {sum}"),
                        RowViolation::BadEntry { col, value, .. } => format!(
                            "row {fi} (state `{state}`): entry in column {} is {value}",
                            file_row(&poset, *col)
                        ),
                    };
                    BadRow { row: fi, state, message }
                })
                .collect(),
        ),
        other => CliError::Core(other),
    })?;
    Ok(ChainModel {
        chain,
        exact: Some(exact),
        walk: None,
        description: format!("dense chain on {m} states"),
    })
}

fn cube_model(c: &CubeSpec) -> Result<ChainModel> {
    for (name, v) in [("cube.alpha", &c.alpha), ("cube.beta", &c.beta)] {
        if v.len() != c.d {
            return Err(CliError::field(name, format!("expected {} rates, found {}", c.d, v.len())));
        }
    }
    let params = CubeWalkParams::new(values(&c.alpha, "cube.alpha")?, values(&c.beta, "cube.beta")?)
        .map_err(|e| CliError::field("cube", e.to_string()))?;
    let mut chain = nearest_neighbor_walk(&params)?;
    let mut description = format!("nearest-neighbour walk on {{0,1}}^{}", c.d);
    let mut modified = false;
    if let Some(k) = &c.kappa {
        let kappa = k.value("cube.kappa")?;
        chain = apply_moves(&chain, &symmetry_axis_moves(chain.poset(), kappa)?)?;
        description.push_str(&format!(" with symmetry-axis moves (kappa = {kappa})"));
        modified = true;
    }
    if let Some(k) = c.power {
        chain = power_chain(&chain, k).map_err(|e| CliError::field("cube.power", e.to_string()))?;
        description.push_str(&format!(", {k}-step kernel"));
        modified = true;
    }
    let exact = if modified { None } else { Some(exact_walk(c, chain.poset())?) };
    Ok(ChainModel {
        chain,
        exact,
        walk: (!modified).then_some(params),
        description,
    })
}

/// The walk's kernel in rational arithmetic, in enumeration order.
fn exact_walk(c: &CubeSpec, poset: &Poset) -> Result<Vec<Vec<Rational>>> {
    let alpha: Vec<Rational> = c.alpha.iter().map(|x| x.exact("cube.alpha")).collect::<Result<_>>()?;
    let beta: Vec<Rational> = c.beta.iter().map(|x| x.exact("cube.beta")).collect::<Result<_>>()?;
    let m = poset.len();
    let mut p = vec![vec![Rational::zero(); m]; m];
    for (i, row) in p.iter_mut().enumerate() {
        let mask = poset.mask(i).expect("cube poset");
        let mut stay = Rational::one();
        for k in 0..c.d {
            let (rate, target) = if mask >> k & 1 == 0 {
                (&alpha[k], mask | 1 << k)
            } else {
                (&beta[k], mask & !(1 << k))
            };
            row[poset.index_of_mask(target).expect("cube poset")] = rate.clone();
            stay -= rate;
        }
        row[i] = stay;
    }
    Ok(p)
}

fn rate_source(r: &RateSpec, d: usize, field: &str) -> Result<RateSource> {
    let family = match r.family.as_deref() {
        None => None,
        Some("power") => {
            let c = r.c.as_ref().ok_or_else(|| CliError::field(field, "family \"power\" needs `c`"))?;
            Some(RateFamily::Power {
                c: c.value(&format!("{field}.c"))?,
            })
        }
        Some("product") => {
            let w = r.weights.as_ref().ok_or_else(|| CliError::field(field, "family \"product\" needs `weights`"))?;
            if w.len() != d {
                return Err(CliError::field(
                    format!("{field}.weights"),
                    format!("expected {d} weights, found {}", w.len()),
                ));
            }
            Some(RateFamily::Product {
                weights: values(w, &format!("{field}.weights"))?,
            })
        }
        Some(other) => {
            return Err(CliError::field(
                format!("{field}.family"),
                format!("unknown family `{other}` (expected \"power\" or \"product\")"),
            ))
        }
    };
    let mut table = BTreeMap::new();
    for (key, v) in r.table.iter().flatten() {
        let mask = subset_mask(key, d).ok_or_else(|| {
            CliError::field(format!("{field}.table"), format!("`{key}` is not a subset label of length {d}"))
        })?;
        table.insert(mask, v.value(&format!("{field}.table.{key}"))?);
    }
    if family.is_none() && table.is_empty() {
        return Err(CliError::field(field, "needs a `family` or a `table`"));
    }
    Ok(RateSource { table, family })
}

/// `"0110"` → bitmask with bit `i - 1` set for each `1` at position `i`.
fn subset_mask(label: &str, d: usize) -> Option<u32> {
    if label.len() != d {
        return None;
    }
    label.chars().enumerate().try_fold(0u32, |acc, (i, c)| match c {
        '0' => Some(acc),
        '1' => Some(acc | 1 << i),
        _ => None,
    })
}
