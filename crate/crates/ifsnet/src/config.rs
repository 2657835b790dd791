//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [space]   dim = 2            box = "a1 b1 a2 b2"
//! [system]  mode = ifs | fuzzy-ifs | gifs | fuzzy-gifs    arity = 1
//! [map.k]   x = <expr>  y = <expr>  lipschitz = <number>
//! [grey.k]  expr = <expr in t>   or repeated   piece = <start> : <value or expr>
//! [net]     kind = uniform | aleatory   n   samples   seed
//! [run]     iterations | delta theta diameter   tol   initial   initial_fuzzy
//!           backend = ram | file | direct   table_path   budget   file_budget
//!           chunk_records
//! [output]  path   invert
//! ```
//!
//! `#` starts a comment. Map expressions use `x1, y1, …, xm, ym` (and `x, y`
//! when the arity is 1); grey maps use `t`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ifsnet_core::expr::{Expression, Piece, PiecewiseMap};
use ifsnet_core::systems::{map_variables, validate_system, Issue, MapSpec, ValidationReport};
use ifsnet_core::{Domain, GreyMap, Point, SystemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ifs,
    FuzzyIfs,
    Gifs,
    FuzzyGifs,
}

impl Mode {
    pub fn is_fuzzy(self) -> bool {
        matches!(self, Mode::FuzzyIfs | Mode::FuzzyGifs)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ifs => "ifs",
            Mode::FuzzyIfs => "fuzzy-ifs",
            Mode::Gifs => "gifs",
            Mode::FuzzyGifs => "fuzzy-gifs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetConfig {
    /// `n` may be left out when the resolution is planned from `delta`.
    Uniform { n: Option<u32> },
    Aleatory { n: u32, samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Plan { delta: f64, theta: f64, diameter: Option<f64> },
    Direct { iterations: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Ram,
    File,
    Direct,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Ram => "ram",
            Backend::File => "file",
            Backend::Direct => "direct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ram" => Some(Backend::Ram),
            "file" => Some(Backend::File),
            "direct" => Some(Backend::Direct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// The net point nearest the box center.
    Center,
    Crisp(Vec<Point>),
    Fuzzy(Vec<(Point, f64)>),
}

pub const DEFAULT_BUDGET: u64 = 100_000_000;
pub const DEFAULT_FILE_BUDGET: u64 = 4_000_000_000;
pub const DEFAULT_CHUNK_RECORDS: u64 = 16_000_000;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub system: SystemSpec,
    pub net: NetConfig,
    pub resolution: Resolution,
    pub tol: f64,
    pub initial: Initial,
    pub backend: Backend,
    pub table_path: Option<PathBuf>,
    pub budget: u64,
    pub file_budget: u64,
    pub chunk_records: u64,
    pub output: Option<PathBuf>,
    pub invert: bool,
    pub validation: ValidationReport,
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    // Relative paths in the file are relative to the file itself.
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut config.output, &mut config.table_path].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(config)
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Result<Option<&Entry>, ConfigError> {
        let mut found = self.entries.iter().filter(|e| e.key == key);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(ConfigError::at(dup.line, format!("duplicate key '{key}'")));
        }
        Ok(first)
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn check_keys(&self, name: &str, allowed: &[&str]) -> Result<(), ConfigError> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(ConfigError::at(e.line, format!("unknown key '{}' in [{name}]", e.key)));
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, ConfigError> {
    e.value
        .trim()
        .parse()
        .map_err(|_| ConfigError::at(e.line, format!("{} must be {what}, got '{}'", e.key, e.value)))
}

// Integers accept scientific notation (`1e8`) as long as the value is integral.
fn parse_count(e: &Entry) -> Result<u64, ConfigError> {
    if let Ok(v) = e.value.trim().parse::<u64>() {
        return Ok(v);
    }
    match e.value.trim().parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(ConfigError::at(
            e.line,
            format!("{} must be a nonnegative integer, got '{}'", e.key, e.value),
        )),
    }
}

fn parse_u32(e: &Entry) -> Result<u32, ConfigError> {
    let v = parse_count(e)?;
    u32::try_from(v).map_err(|_| ConfigError::at(e.line, format!("{} is too large", e.key)))
}

fn parse_f64(e: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(e, "a number")?;
    if !v.is_finite() {
        return Err(ConfigError::at(e.line, format!("{} must be finite", e.key)));
    }
    Ok(v)
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(ConfigError::at(e.line, format!("{} must be true or false, got '{other}'", e.key))),
    }
}

fn parse_numbers(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    e.value
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ConfigError::at(e.line, format!("'{s}' is not a number")))
        })
        .collect()
}

fn parse_point(e: &Entry, text: &str, dim: usize) -> Result<Point, ConfigError> {
    let nums: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| ConfigError::at(e.line, format!("'{s}' is not a number"))))
        .collect::<Result<_, _>>()?;
    if nums.len() != dim {
        return Err(ConfigError::at(
            e.line,
            format!("point '{}' needs {dim} coordinate(s)", text.trim()),
        ));
    }
    let mut p = [0.0; 2];
    p[..dim].copy_from_slice(&nums);
    Ok(p)
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('"') && s.ends_with('"')) || (s.starts_with('\'') && s.ends_with('\''))) {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "section header must end with ']'"))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(ConfigError::at(line, format!("duplicate section [{name}]")));
            }
            sections.insert(
                name.clone(),
                Section {
                    line,
                    entries: Vec::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, "expected 'key = value' or '[section]'"))?;
        let name = current
            .as_ref()
            .ok_or_else(|| ConfigError::at(line, "key outside of any section"))?;
        sections.get_mut(name).expect("inserted").entries.push(Entry {
            line,
            key: key.trim().to_string(),
            value: unquote(value).to_string(),
        });
    }
    Ok(sections)
}

fn indexed_sections<'a>(
    sections: &'a BTreeMap<String, Section>,
    prefix: &str,
) -> Result<BTreeMap<usize, &'a Section>, ConfigError> {
    let mut out = BTreeMap::new();
    for (name, s) in sections {
        if let Some(k) = name.strip_prefix(prefix) {
            let idx: usize = k
                .parse()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| ConfigError::at(s.line, format!("section [{name}] needs an index 1, 2, …")))?;
            out.insert(idx, s);
        }
    }
    Ok(out)
}

fn require<'a>(sections: &'a BTreeMap<String, Section>, name: &str) -> Result<&'a Section, ConfigError> {
    sections
        .get(name)
        .ok_or_else(|| ConfigError::general(format!("missing section [{name}]")))
}

fn parse_grey(s: &Section, idx: usize) -> Result<GreyMap, ConfigError> {
    s.check_keys(&format!("grey.{idx}"), &["expr", "piece"])?;
    let expr = s.get("expr")?;
    let pieces: Vec<&Entry> = s.all("piece").collect();
    match (expr, pieces.is_empty()) {
        (Some(e), true) => GreyMap::parse(&e.value).map_err(|err| ConfigError::at(e.line, err.to_string())),
        (None, false) => {
            let mut intervals = Vec::new();
            for p in pieces {
                let (start, value) = p
                    .value
                    .split_once(':')
                    .ok_or_else(|| ConfigError::at(p.line, "piece must be '<start> : <value>'"))?;
                let start: f64 = start
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::at(p.line, format!("bad breakpoint '{}'", start.trim())))?;
                let expr = Expression::parse(value.trim(), &["t"]).map_err(|err| ConfigError::at(p.line, err.to_string()))?;
                let piece = if expr.is_constant() {
                    Piece::Const(expr.evaluate(&[0.0]).map_err(|err| ConfigError::at(p.line, err.to_string()))?)
                } else {
                    Piece::Expr(expr)
                };
                intervals.push((start, piece));
            }
            PiecewiseMap::new(intervals)
                .map(GreyMap::Piecewise)
                .map_err(|err| ConfigError::at(s.line, err.to_string()))
        }
        (Some(e), false) => Err(ConfigError::at(e.line, "use either 'expr' or 'piece' lines, not both")),
        (None, true) => Err(ConfigError::at(s.line, "grey map needs 'expr' or 'piece' lines")),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let sections = split_sections(text)?;
    for (name, s) in &sections {
        let known = matches!(name.as_str(), "space" | "system" | "net" | "run" | "output")
            || name.starts_with("map.")
            || name.starts_with("grey.");
        if !known {
            return Err(ConfigError::at(s.line, format!("unknown section [{name}]")));
        }
    }

    // [space]
    let space = require(&sections, "space")?;
    space.check_keys("space", &["dim", "box"])?;
    let dim = match space.get("dim")? {
        Some(e) => parse_count(e)? as usize,
        None => 2,
    };
    if dim != 1 && dim != 2 {
        return Err(ConfigError::at(space.line, format!("dim must be 1 or 2, got {dim}")));
    }
    let box_entry = space
        .get("box")?
        .ok_or_else(|| ConfigError::at(space.line, "[space] needs 'box'"))?;
    let b = parse_numbers(box_entry)?;
    if b.len() != 2 * dim {
        return Err(ConfigError::at(box_entry.line, format!("box needs {} numbers", 2 * dim)));
    }
    let intervals: Vec<(f64, f64)> = b.chunks(2).map(|c| (c[0], c[1])).collect();
    let domain = Domain::new(&intervals).map_err(|e| ConfigError::at(box_entry.line, e.to_string()))?;

    // [system]
    let system = require(&sections, "system")?;
    system.check_keys("system", &["mode", "arity", "maps"])?;
    let mode_entry = system
        .get("mode")?
        .ok_or_else(|| ConfigError::at(system.line, "[system] needs 'mode'"))?;
    let mode = match mode_entry.value.as_str() {
        "ifs" => Mode::Ifs,
        "fuzzy-ifs" => Mode::FuzzyIfs,
        "gifs" => Mode::Gifs,
        "fuzzy-gifs" => Mode::FuzzyGifs,
        other => {
            return Err(ConfigError::at(
                mode_entry.line,
                format!("mode must be ifs, fuzzy-ifs, gifs or fuzzy-gifs, got '{other}'"),
            ))
        }
    };
    let arity = match system.get("arity")? {
        Some(e) => parse_count(e)? as usize,
        None => 1,
    };
    if arity == 0 {
        return Err(ConfigError::at(system.line, "arity must be at least 1"));
    }
    if matches!(mode, Mode::Ifs | Mode::FuzzyIfs) && arity != 1 {
        return Err(ConfigError::at(
            system.line,
            format!("mode {} needs arity 1; use gifs or fuzzy-gifs", mode.as_str()),
        ));
    }

    // [map.k]
    let map_sections = indexed_sections(&sections, "map.")?;
    if map_sections.is_empty() {
        return Err(ConfigError::general("no [map.k] sections"));
    }
    let count = map_sections.len();
    if let Some(e) = system.get("maps")? {
        let declared = parse_count(e)? as usize;
        if declared != count {
            return Err(ConfigError::at(e.line, format!("maps = {declared} but {count} [map.k] sections found")));
        }
    }
    let vars = map_variables(dim, arity);
    let table: Vec<(&str, usize)> = vars.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    let coord_keys: &[&str] = if dim == 1 { &["x"] } else { &["x", "y"] };
    let mut maps = Vec::with_capacity(count);
    for (expect, (&idx, s)) in (1..).zip(&map_sections) {
        if idx != expect {
            return Err(ConfigError::at(s.line, format!("map sections must be numbered 1..{count}")));
        }
        let mut allowed = coord_keys.to_vec();
        allowed.push("lipschitz");
        s.check_keys(&format!("map.{idx}"), &allowed)?;
        let mut exprs = Vec::new();
        for key in coord_keys {
            let e = s
                .get(key)?
                .ok_or_else(|| ConfigError::at(s.line, format!("[map.{idx}] needs '{key}'")))?;
            exprs.push(
                Expression::parse_with_aliases(&e.value, &table, dim * arity)
                    .map_err(|err| ConfigError::at(e.line, err.to_string()))?,
            );
        }
        let mut map = MapSpec::from_expressions(dim, arity, exprs).map_err(|err| ConfigError::at(s.line, err.to_string()))?;
        if let Some(e) = s.get("lipschitz")? {
            map = map.with_lipschitz(parse_f64(e)?);
        }
        maps.push(map);
    }

    // [grey.k]
    let grey_sections = indexed_sections(&sections, "grey.")?;
    let grey = if mode.is_fuzzy() {
        let mut greys = Vec::with_capacity(count);
        for idx in 1..=count {
            let s = grey_sections
                .get(&idx)
                .ok_or_else(|| ConfigError::general(format!("fuzzy mode needs [grey.{idx}]")))?;
            greys.push(parse_grey(s, idx)?);
        }
        if let Some((&idx, s)) = grey_sections.iter().find(|(&i, _)| i > count) {
            return Err(ConfigError::at(s.line, format!("[grey.{idx}] has no matching map")));
        }
        Some(greys)
    } else {
        if let Some(s) = grey_sections.values().next() {
            return Err(ConfigError::at(s.line, format!("grey maps need a fuzzy mode, not {}", mode.as_str())));
        }
        None
    };

    let spec = SystemSpec::new(domain, arity, maps, grey).map_err(|e| ConfigError::general(e.to_string()))?;

    // [run]
    let run = require(&sections, "run")?;
    run.check_keys(
        "run",
        &[
            "iterations",
            "delta",
            "theta",
            "diameter",
            "tol",
            "initial",
            "initial_fuzzy",
            "backend",
            "table_path",
            "budget",
            "file_budget",
            "chunk_records",
        ],
    )?;
    let resolution = match (run.get("delta")?, run.get("iterations")?) {
        (Some(d), None) => {
            let delta = parse_f64(d)?;
            let theta = match run.get("theta")? {
                Some(e) => parse_f64(e)?,
                None => 0.5,
            };
            let diameter = run.get("diameter")?.map(parse_f64).transpose()?;
            Resolution::Plan { delta, theta, diameter }
        }
        (None, Some(e)) => {
            for key in ["theta", "diameter"] {
                if let Some(x) = run.get(key)? {
                    return Err(ConfigError::at(x.line, format!("'{key}' only applies together with 'delta'")));
                }
            }
            Resolution::Direct {
                iterations: parse_u32(e)?,
            }
        }
        (Some(d), Some(_)) => {
            return Err(ConfigError::at(d.line, "give either 'delta' or 'iterations', not both"));
        }
        (None, None) => {
            return Err(ConfigError::at(run.line, "[run] needs 'delta' or 'iterations'"));
        }
    };
    let tol = match run.get("tol")? {
        Some(e) => {
            let v = parse_f64(e)?;
            if v < 0.0 {
                return Err(ConfigError::at(e.line, "tol must be nonnegative"));
            }
            v
        }
        None => 0.0,
    };
    let initial = match (run.get("initial")?, run.get("initial_fuzzy")?) {
        (Some(e), None) => Initial::Crisp(
            e.value
                .split(';')
                .map(|p| parse_point(e, p, dim))
                .collect::<Result<_, _>>()?,
        ),
        (None, Some(e)) => {
            if !mode.is_fuzzy() {
                return Err(ConfigError::at(e.line, "initial_fuzzy needs a fuzzy mode"));
            }
            let mut pts = Vec::new();
            for item in e.value.split(';') {
                let (p, m) = item
                    .split_once(':')
                    .ok_or_else(|| ConfigError::at(e.line, "initial_fuzzy entries are '<point> : <membership>'"))?;
                let m: f64 = m
                    .trim()
                    .parse()
                    .ok()
                    .filter(|v: &f64| (0.0..=1.0).contains(v))
                    .ok_or_else(|| ConfigError::at(e.line, format!("membership '{}' must lie in [0, 1]", m.trim())))?;
                pts.push((parse_point(e, p, dim)?, m));
            }
            Initial::Fuzzy(pts)
        }
        (Some(e), Some(_)) => {
            return Err(ConfigError::at(e.line, "give either 'initial' or 'initial_fuzzy', not both"));
        }
        (None, None) => Initial::Center,
    };
    let backend = match run.get("backend")? {
        Some(e) => Backend::parse(&e.value)
            .ok_or_else(|| ConfigError::at(e.line, format!("backend must be ram, file or direct, got '{}'", e.value)))?,
        None => Backend::Ram,
    };
    let table_path = run.get("table_path")?.map(|e| PathBuf::from(&e.value));
    let budget = run.get("budget")?.map(parse_count).transpose()?.unwrap_or(DEFAULT_BUDGET);
    let file_budget = run
        .get("file_budget")?
        .map(parse_count)
        .transpose()?
        .unwrap_or(DEFAULT_FILE_BUDGET);
    let chunk_records = run
        .get("chunk_records")?
        .map(parse_count)
        .transpose()?
        .unwrap_or(DEFAULT_CHUNK_RECORDS);
    if chunk_records == 0 {
        return Err(ConfigError::general("chunk_records must be positive"));
    }

    // [net]
    let empty = Section::default();
    let net_section = sections.get("net").unwrap_or(&empty);
    net_section.check_keys("net", &["kind", "n", "samples", "seed"])?;
    let n = net_section.get("n")?.map(parse_u32).transpose()?;
    let kind = net_section.get("kind")?.map(|e| (e.line, e.value.as_str()));
    let net = match kind {
        None | Some((_, "uniform")) => {
            for key in ["samples", "seed"] {
                if let Some(e) = net_section.get(key)? {
                    return Err(ConfigError::at(e.line, format!("'{key}' only applies to aleatory nets")));
                }
            }
            NetConfig::Uniform { n }
        }
        Some((_, "aleatory")) => {
            let n = n.ok_or_else(|| ConfigError::at(net_section.line, "aleatory nets need 'n'"))?;
            let samples = net_section
                .get("samples")?
                .ok_or_else(|| ConfigError::at(net_section.line, "aleatory nets need 'samples'"))?;
            let seed = net_section.get("seed")?.map(parse_count).transpose()?.unwrap_or(0);
            NetConfig::Aleatory {
                n,
                samples: parse_count(samples)?,
                seed,
            }
        }
        Some((line, other)) => {
            return Err(ConfigError::at(line, format!("net kind must be uniform or aleatory, got '{other}'")));
        }
    };
    if let (NetConfig::Uniform { n: None }, Resolution::Direct { .. }) = (net, resolution) {
        return Err(ConfigError {
            line: sections.get("net").map(|s| s.line),
            message: "[net] needs 'n' when iterations are given directly".to_string(),
        });
    }

    // [output]
    let (output, invert) = match sections.get("output") {
        Some(s) => {
            s.check_keys("output", &["path", "invert"])?;
            (
                s.get("path")?.map(|e| PathBuf::from(&e.value)),
                s.get("invert")?.map(parse_bool).transpose()?.unwrap_or(false),
            )
        }
        None => (None, false),
    };

    // A contraction constant of 1 or more is reported when planning, so
    // that it is distinguishable from a malformed file.
    let validation = validate_system(&spec);
    let list: Vec<String> = validation
        .errors()
        .filter(|i| !matches!(i, Issue::NotContractive { .. }))
        .map(|i| i.to_string())
        .collect();
    if !list.is_empty() {
        return Err(ConfigError::general(format!("system is not admissible:\n  {}", list.join("\n  "))));
    }

    Ok(RunConfig {
        mode,
        system: spec,
        net,
        resolution,
        tol,
        initial,
        backend,
        table_path,
        budget,
        file_budget,
        chunk_records,
        output,
        invert,
        validation,
    })
}
