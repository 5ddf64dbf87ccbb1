//! Output writers: a small TOML emitter for reports and spec files, and
//! comma-separated tables with a commented header.
//!
//! Floats are always written with 17 significant digits, so every value
//! read back parses to the same `f64`.

use std::fmt::Write as _;

/// `x` with 17 significant digits, in a form valid in both TOML and CSV.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => write!(out, "\\u{:04X}", c as u32).unwrap(),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Line-oriented TOML document builder.
#[derive(Debug, Default)]
pub struct Doc {
    out: String,
}

impl Doc {
    pub fn new() -> Doc {
        Doc::default()
    }

    pub fn comment(&mut self, text: &str) {
        for line in text.lines() {
            writeln!(self.out, "# {line}").unwrap();
        }
    }

    pub fn table(&mut self, name: &str) {
        self.gap();
        writeln!(self.out, "[{name}]").unwrap();
    }

    pub fn array_table(&mut self, name: &str) {
        self.gap();
        writeln!(self.out, "[[{name}]]").unwrap();
    }

    fn gap(&mut self) {
        if !self.out.is_empty() && !self.out.ends_with("\n\n") {
            self.out.push('\n');
        }
    }

    pub fn str(&mut self, key: &str, value: &str) {
        writeln!(self.out, "{key} = {}", quote(value)).unwrap();
    }

    /// `key = value` with `value` already in TOML syntax.
    pub fn raw(&mut self, key: &str, value: &str) {
        writeln!(self.out, "{key} = {value}").unwrap();
    }

    pub fn bool(&mut self, key: &str, value: bool) {
        writeln!(self.out, "{key} = {value}").unwrap();
    }

    pub fn int(&mut self, key: &str, value: i64) {
        writeln!(self.out, "{key} = {value}").unwrap();
    }

    pub fn float(&mut self, key: &str, value: f64) {
        writeln!(self.out, "{key} = {}", float(value)).unwrap();
    }

    pub fn float_list(&mut self, key: &str, values: impl IntoIterator<Item = f64>) {
        let items: Vec<String> = values.into_iter().map(float).collect();
        writeln!(self.out, "{key} = [{}]", items.join(", ")).unwrap();
    }

    pub fn int_list(&mut self, key: &str, values: impl IntoIterator<Item = i64>) {
        let items: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
        writeln!(self.out, "{key} = [{}]", items.join(", ")).unwrap();
    }

    pub fn str_list<S: AsRef<str>>(&mut self, key: &str, values: impl IntoIterator<Item = S>) {
        let items: Vec<String> = values.into_iter().map(|v| quote(v.as_ref())).collect();
        writeln!(self.out, "{key} = [{}]", items.join(", ")).unwrap();
    }

    /// Pairs of strings, as used for cover relations.
    pub fn pair_list(&mut self, key: &str, values: &[(String, String)]) {
        if values.is_empty() {
            writeln!(self.out, "{key} = []").unwrap();
            return;
        }
        writeln!(self.out, "{key} = [").unwrap();
        for (a, b) in values {
            writeln!(self.out, "    [{}, {}],", quote(a), quote(b)).unwrap();
        }
        writeln!(self.out, "]").unwrap();
    }

    /// Dense matrix, one row per line.
    pub fn matrix(&mut self, key: &str, rows: impl IntoIterator<Item = Vec<f64>>) {
        writeln!(self.out, "{key} = [").unwrap();
        for row in rows {
            let items: Vec<String> = row.into_iter().map(float).collect();
            writeln!(self.out, "    [{}],", items.join(", ")).unwrap();
        }
        writeln!(self.out, "]").unwrap();
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// A plot-ready table: `#` header lines, then comma-separated rows under a
/// column-name line.
#[derive(Debug)]
pub struct Table {
    header: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Table {
        Table {
            header: Vec::new(),
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.header.push(line.into());
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn finish(self) -> String {
        let mut out = String::new();
        for line in &self.header {
            writeln!(out, "# {line}").unwrap();
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).unwrap();
        for row in &self.rows {
            w.write_record(row).unwrap();
        }
        out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
        out
    }
}
