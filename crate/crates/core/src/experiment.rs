//! Config-driven experiment runner: parsing, presets, CSV and summary output.
//!
//! Config files are `key = value` lines grouped under `[section]` headers;
//! `#` starts a comment. Every problem in a file is reported in one
//! [`Error::Config`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::entangle::{check_bulk_region, reduced_fidelity, region_entropy, topological_entropy};
use crate::error::{Error, Result};
use crate::evolve::{
    time_grid, trajectory, KrylovParams, KrylovStats, Propagator, PropagatorMode, TimeSeries,
    DEFAULT_KRYLOV_DIM, DEFAULT_KRYLOV_TOL, DEFAULT_RECURRENCE_THRESHOLD,
};
use crate::hamiltonian::{build_hamiltonian, Couplings, PauliBasis, QuenchKind, QuenchSpec};
use crate::lattice::{EdgeLattice, Region, DEFAULT_MAX_SPINS};
use crate::stabilizer::{enumerate_group, ground_state, sector_state, SectorLabel};
use crate::state::StateVector;

/// Environment variable naming the root directory for relative output paths.
pub const OUTPUT_ROOT_ENV: &str = "TORIC_QUENCH_OUTPUT";

pub const PRESETS: [&str; 3] = ["fig1", "fig2", "fig3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Measure {
    Overlap,
    STopo,
    Fidelity,
    BlockEntropy,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Overlap => "overlap",
            Measure::STopo => "s_topo",
            Measure::Fidelity => "fidelity",
            Measure::BlockEntropy => "block_entropy",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "overlap" => Some(Measure::Overlap),
            "s_topo" => Some(Measure::STopo),
            "fidelity" => Some(Measure::Fidelity),
            "block_entropy" => Some(Measure::BlockEntropy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegionChoice {
    /// The `(m-1) x (n-1)` plaquette block at the origin.
    Bulk,
    Edges(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityScope {
    Largest,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Auto,
    Dense,
    Krylov,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub lattices: Vec<(usize, usize)>,
    pub max_spins: usize,
    pub quench: QuenchSpec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub measures: Vec<Measure>,
    pub average_after: f64,
    pub fidelity_on: FidelityScope,
    pub region: RegionChoice,
    pub sector_pair: ((u8, u8), (u8, u8)),
    pub recurrence_threshold: f64,
    pub mode: ModeChoice,
    pub krylov: KrylovParams<f64>,
    /// Output directory as written in the config (resolved at run time).
    pub output_dir: PathBuf,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("output", &["name", "dir"]),
    ("lattice", &["sizes", "max_spins"]),
    (
        "quench",
        &["hamiltonian", "basis", "h", "j", "j1", "j2", "couplings", "disorder_width", "disorder_seed"],
    ),
    ("time", &["t_max", "dt"]),
    ("measure", &["list", "average_after", "fidelity_on", "region", "sector_pair", "recurrence_threshold"]),
    ("evolve", &["mode", "krylov_dim", "krylov_tol"]),
];

/// A `section.key = value` assignment applied after the file is read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub section: String,
    pub key: String,
    pub value: String,
}

impl Override {
    pub fn new(section: &str, key: &str, value: impl ToString) -> Self {
        Override { section: section.into(), key: key.into(), value: value.to_string() }
    }
}

struct Raw {
    values: BTreeMap<(String, String), (usize, String)>,
    used: BTreeSet<(String, String)>,
    errors: Vec<String>,
}

impl Raw {
    fn parse(text: &str, overrides: &[Override]) -> Raw {
        let mut raw = Raw { values: BTreeMap::new(), used: BTreeSet::new(), errors: Vec::new() };
        let mut section: Option<String> = None;
        // Keys under an unknown header are covered by that header's error.
        let mut in_unknown = false;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                in_unknown = !SCHEMA.iter().any(|(s, _)| *s == name);
                if in_unknown {
                    raw.errors.push(format!("line {lineno}: unknown section [{name}]"));
                    section = None;
                } else {
                    section = Some(name.to_string());
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                raw.errors.push(format!("line {lineno}: expected `key = value`, got `{line}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = &section else {
                if !in_unknown {
                    raw.errors.push(format!("line {lineno}: key `{key}` outside a section"));
                }
                continue;
            };
            raw.insert(sec, key, value, lineno);
        }
        for o in overrides {
            if !SCHEMA.iter().any(|(s, _)| *s == o.section) {
                raw.errors.push(format!("override: unknown section [{}]", o.section));
                continue;
            }
            raw.values.remove(&(o.section.clone(), o.key.clone()));
            raw.insert(&o.section, &o.key, &o.value, 0);
        }
        raw
    }

    fn insert(&mut self, section: &str, key: &str, value: &str, lineno: usize) {
        let known = SCHEMA.iter().find(|(s, _)| *s == section).map(|(_, k)| k.contains(&key)).unwrap_or(false);
        let at = if lineno == 0 { "override".to_string() } else { format!("line {lineno}") };
        if !known {
            self.errors.push(format!("{at}: unknown key `{key}` in [{section}]"));
            return;
        }
        let k = (section.to_string(), key.to_string());
        if self.values.contains_key(&k) {
            self.errors.push(format!("{at}: duplicate key `{section}.{key}`"));
            return;
        }
        self.values.insert(k, (lineno, value.to_string()));
    }

    fn get(&mut self, section: &str, key: &str) -> Option<String> {
        let k = (section.to_string(), key.to_string());
        let v = self.values.get(&k).map(|(_, v)| v.clone());
        if v.is_some() {
            self.used.insert(k);
        }
        v
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.values.contains_key(&(section.to_string(), key.to_string()))
    }

    fn parsed<V>(&mut self, section: &str, key: &str, what: &str, f: impl Fn(&str) -> Option<V>) -> Option<V> {
        let v = self.get(section, key)?;
        match f(&v) {
            Some(x) => Some(x),
            None => {
                self.errors.push(format!("{section}.{key}: expected {what}, got `{v}`"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str) -> Option<f64> {
        self.parsed(section, key, "a finite number", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn require_float(&mut self, section: &str, key: &str, context: &str) -> Option<f64> {
        if !self.has(section, key) {
            self.errors.push(format!("{section}.{key}: required for {context}"));
            return None;
        }
        self.float(section, key)
    }
}

fn parse_size(s: &str) -> Option<(usize, usize)> {
    let (m, n) = s.trim().split_once(['x', 'X'])?;
    Some((m.trim().parse().ok()?, n.trim().parse().ok()?))
}

fn parse_sector(s: &str) -> Option<(u8, u8)> {
    let b = s.trim().as_bytes();
    match b {
        [i @ (b'0' | b'1'), j @ (b'0' | b'1')] => Some((i - b'0', j - b'0')),
        _ => None,
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    pub fn parse_with(text: &str, overrides: &[Override]) -> Result<Self> {
        let mut raw = Raw::parse(text, overrides);
        let cfg = Self::resolve(&mut raw);
        // Keys that are valid in general but meaningless for this run.
        let unused: Vec<String> = raw
            .values
            .iter()
            .filter(|(k, _)| !raw.used.contains(*k))
            .map(|((s, k), (line, _))| match line {
                0 => format!("override: key `{s}.{k}` does not apply to this configuration"),
                l => format!("line {l}: key `{s}.{k}` does not apply to this configuration"),
            })
            .collect();
        raw.errors.extend(unused);
        if raw.errors.is_empty() {
            Ok(cfg.expect("no errors implies a resolved config"))
        } else {
            Err(Error::Config(raw.errors))
        }
    }

    pub fn from_file(path: &Path, overrides: &[Override]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::parse_with(&text, overrides)
    }

    fn resolve(raw: &mut Raw) -> Option<Self> {
        let name = raw.get("output", "name").unwrap_or_else(|| "run".to_string());
        let output_dir = PathBuf::from(raw.get("output", "dir").unwrap_or_else(|| name.clone()));

        let lattices = match raw.get("lattice", "sizes") {
            None => {
                raw.errors.push("lattice.sizes: missing (e.g. `sizes = 2x2, 2x3`)".into());
                None
            }
            Some(v) => {
                let parts = split_list(&v);
                let parsed: Vec<Option<(usize, usize)>> = parts.iter().map(|p| parse_size(p)).collect();
                if parts.is_empty() || parsed.iter().any(Option::is_none) {
                    raw.errors.push(format!("lattice.sizes: expected a list like `2x2, 2x3`, got `{v}`"));
                    None
                } else {
                    let sizes: Vec<(usize, usize)> = parsed.into_iter().flatten().collect();
                    if let Some(&(m, n)) = sizes.iter().find(|(m, n)| *m < 2 || *n < 2) {
                        raw.errors.push(format!("lattice.sizes: {m}x{n} is too small (both sides must be at least 2)"));
                        None
                    } else {
                        Some(sizes)
                    }
                }
            }
        };
        let max_spins = raw
            .parsed("lattice", "max_spins", "a spin count", |s| s.parse::<usize>().ok())
            .unwrap_or(DEFAULT_MAX_SPINS);

        let quench = Self::resolve_quench(raw);

        let t_max = raw.float("time", "t_max").unwrap_or(20.0);
        let dt = raw.float("time", "dt").unwrap_or(0.05);
        if !(dt > 0.0) {
            raw.errors.push(format!("time.dt: must be positive, got {dt}"));
        }
        if !(t_max > 0.0) {
            raw.errors.push(format!("time.t_max: must be positive, got {t_max}"));
        }

        let measures = match raw.get("measure", "list") {
            None => vec![Measure::Overlap, Measure::STopo],
            Some(v) => {
                let mut out = BTreeSet::new();
                for item in split_list(&v) {
                    match Measure::parse(item) {
                        Some(m) => {
                            out.insert(m);
                        }
                        None => raw.errors.push(format!(
                            "measure.list: unknown measure `{item}` (expected overlap, s_topo, fidelity, block_entropy)"
                        )),
                    }
                }
                if out.is_empty() {
                    raw.errors.push("measure.list: no measures given".into());
                }
                out.into_iter().collect()
            }
        };
        let average_after = raw.float("measure", "average_after").unwrap_or(1.0);
        let fidelity_on = raw
            .parsed("measure", "fidelity_on", "`largest` or `all`", |s| match s {
                "largest" => Some(FidelityScope::Largest),
                "all" => Some(FidelityScope::All),
                _ => None,
            })
            .unwrap_or(FidelityScope::Largest);
        let region = raw
            .parsed("measure", "region", "`bulk` or a list of edge indices", |s| {
                if s == "bulk" {
                    return Some(RegionChoice::Bulk);
                }
                let edges: Option<Vec<usize>> = split_list(s).iter().map(|e| e.parse().ok()).collect();
                edges.filter(|e| !e.is_empty()).map(RegionChoice::Edges)
            })
            .unwrap_or(RegionChoice::Bulk);
        let sector_pair = raw
            .parsed("measure", "sector_pair", "two sector labels like `00, 10`", |s| match split_list(s)[..] {
                [a, b] => Some((parse_sector(a)?, parse_sector(b)?)),
                _ => None,
            })
            .unwrap_or(((0, 0), (1, 0)));
        let recurrence_threshold = raw
            .parsed("measure", "recurrence_threshold", "a number in (0, 1]", |s| {
                s.parse::<f64>().ok().filter(|x| *x > 0.0 && *x <= 1.0)
            })
            .unwrap_or(DEFAULT_RECURRENCE_THRESHOLD);

        let mode = raw
            .parsed("evolve", "mode", "`auto`, `dense` or `krylov`", |s| match s {
                "auto" => Some(ModeChoice::Auto),
                "dense" => Some(ModeChoice::Dense),
                "krylov" => Some(ModeChoice::Krylov),
                _ => None,
            })
            .unwrap_or(ModeChoice::Auto);
        let krylov_dim = raw
            .parsed("evolve", "krylov_dim", "an integer of at least 2", |s| {
                s.parse::<usize>().ok().filter(|d| *d >= 2)
            })
            .unwrap_or(DEFAULT_KRYLOV_DIM);
        let krylov_tol = raw
            .parsed("evolve", "krylov_tol", "a positive number", |s| {
                s.parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite())
            })
            .unwrap_or(DEFAULT_KRYLOV_TOL);

        Some(ExperimentConfig {
            name,
            lattices: lattices?,
            max_spins,
            quench: quench?,
            t_max,
            dt,
            measures,
            average_after,
            fidelity_on,
            region,
            sector_pair,
            recurrence_threshold,
            mode,
            krylov: KrylovParams { dim: krylov_dim, tol: krylov_tol },
            output_dir,
        })
    }

    fn resolve_quench(raw: &mut Raw) -> Option<QuenchSpec<f64>> {
        let Some(name) = raw.get("quench", "hamiltonian") else {
            raw.errors.push("quench.hamiltonian: missing (one of H0..H5)".into());
            return None;
        };
        let kind = match name.parse::<QuenchKind>() {
            Ok(k) => k,
            Err(_) => {
                raw.errors.push(format!("quench.hamiltonian: unknown Hamiltonian `{name}` (expected H0..H5)"));
                return None;
            }
        };
        let ctx = kind.to_string();
        match kind {
            QuenchKind::H0 => Some(QuenchSpec::H0),
            QuenchKind::H1 | QuenchKind::H2 => {
                let basis = raw
                    .parsed("quench", "basis", "`x` or `z`", |s| s.parse::<PauliBasis>().ok())
                    .unwrap_or(PauliBasis::Z);
                let key = if kind == QuenchKind::H1 { "h" } else { "j" };
                let couplings = if raw.has("quench", "couplings") {
                    if raw.has("quench", key) {
                        raw.errors.push(format!("quench.{key}: conflicts with quench.couplings"));
                    }
                    let list = raw.parsed("quench", "couplings", "a list of numbers", |s| {
                        split_list(s)
                            .iter()
                            .map(|x| x.parse::<f64>().ok().filter(|v| v.is_finite()))
                            .collect::<Option<Vec<f64>>>()
                    })?;
                    Couplings::Explicit(list)
                } else {
                    let value = raw.require_float("quench", key, &ctx)?;
                    match raw.float("quench", "disorder_width") {
                        Some(width) => {
                            let seed = raw
                                .parsed("quench", "disorder_seed", "an unsigned integer", |s| s.parse::<u64>().ok())
                                .unwrap_or(0);
                            Couplings::Disordered { mean: value, width, seed }
                        }
                        None => Couplings::Uniform(value),
                    }
                };
                Some(match kind {
                    QuenchKind::H1 => QuenchSpec::H1 { basis, h: couplings },
                    _ => QuenchSpec::H2 { basis, j: couplings },
                })
            }
            QuenchKind::H3 | QuenchKind::H5 => {
                let j1 = raw.require_float("quench", "j1", &ctx);
                let j2 = raw.require_float("quench", "j2", &ctx);
                let (j1, j2) = (j1?, j2?);
                Some(if kind == QuenchKind::H3 { QuenchSpec::H3 { j1, j2 } } else { QuenchSpec::H5 { j1, j2 } })
            }
            QuenchKind::H4 => Some(QuenchSpec::H4 { h: raw.require_float("quench", "h", &ctx)? }),
        }
    }

    /// Parameter columns appended to every CSV row.
    fn params(&self) -> Vec<(String, String)> {
        let f = |x: f64| format!("{x:.16e}");
        let mut out = vec![("hamiltonian".to_string(), self.quench.kind().to_string())];
        let couplings = |out: &mut Vec<(String, String)>, key: &str, c: &Couplings<f64>| match c {
            Couplings::Uniform(v) => out.push((key.into(), f(*v))),
            Couplings::Explicit(_) => out.push((key.into(), "explicit".into())),
            Couplings::Disordered { mean, width, seed } => {
                out.push((key.into(), f(*mean)));
                out.push(("disorder_width".into(), f(*width)));
                out.push(("disorder_seed".into(), seed.to_string()));
            }
        };
        match &self.quench {
            QuenchSpec::H0 => {}
            QuenchSpec::H1 { basis, h } => {
                out.push(("basis".into(), basis.to_string()));
                couplings(&mut out, "h", h);
            }
            QuenchSpec::H2 { basis, j } => {
                out.push(("basis".into(), basis.to_string()));
                couplings(&mut out, "j", j);
            }
            QuenchSpec::H3 { j1, j2 } | QuenchSpec::H5 { j1, j2 } => {
                out.push(("j1".into(), f(*j1)));
                out.push(("j2".into(), f(*j2)));
            }
            QuenchSpec::H4 { h } => out.push(("h".into(), f(*h))),
        }
        out
    }

    /// Fully resolved configuration in the input format.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[output]\nname = {}\ndir = {}", self.name, self.output_dir.display());
        let sizes: Vec<String> = self.lattices.iter().map(|(m, n)| format!("{m}x{n}")).collect();
        let _ = writeln!(s, "\n[lattice]\nsizes = {}\nmax_spins = {}", sizes.join(", "), self.max_spins);
        let _ = writeln!(s, "\n[quench]");
        // Explicit couplings are written as a list below instead.
        for (k, v) in self.params().into_iter().filter(|(_, v)| v != "explicit") {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let QuenchSpec::H1 { h: Couplings::Explicit(v), .. } | QuenchSpec::H2 { j: Couplings::Explicit(v), .. } =
            &self.quench
        {
            let list: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(s, "couplings = {}", list.join(", "));
        }
        let _ = writeln!(s, "\n[time]\nt_max = {:.16e}\ndt = {:.16e}", self.t_max, self.dt);
        let list: Vec<&str> = self.measures.iter().map(|m| m.name()).collect();
        let region = match &self.region {
            RegionChoice::Bulk => "bulk".to_string(),
            RegionChoice::Edges(e) => e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "),
        };
        let ((a, b), (c, d)) = self.sector_pair;
        let _ = writeln!(
            s,
            "\n[measure]\nlist = {}\naverage_after = {:.16e}\nfidelity_on = {}\nregion = {}\nsector_pair = {a}{b}, {c}{d}\nrecurrence_threshold = {:.16e}",
            list.join(", "),
            self.average_after,
            match self.fidelity_on {
                FidelityScope::Largest => "largest",
                FidelityScope::All => "all",
            },
            region,
            self.recurrence_threshold
        );
        let mode = match self.mode {
            ModeChoice::Auto => "auto",
            ModeChoice::Dense => "dense",
            ModeChoice::Krylov => "krylov",
        };
        let _ = writeln!(
            s,
            "\n[evolve]\nmode = {mode}\nkrylov_dim = {}\nkrylov_tol = {:.16e}",
            self.krylov.dim, self.krylov.tol
        );
        s
    }

    /// Checks lattice sizes against the spin limit.
    pub fn check_sizes(&self) -> Result<()> {
        for &(m, n) in &self.lattices {
            EdgeLattice::with_max_spins(m, n, self.max_spins)?;
        }
        Ok(())
    }

    fn wants(&self, m: Measure) -> bool {
        self.measures.contains(&m)
    }
}

/// Config text for a named preset. `fig3` yields two runs.
pub fn preset_texts(name: &str) -> Result<Vec<(String, String)>> {
    let common = "[time]\nt_max = 20\ndt = 0.05\n\n[measure]\nlist = overlap, s_topo, fidelity\naverage_after = 1\nfidelity_on = largest\nregion = bulk\nsector_pair = 00, 10\n";
    let fig3 = |sub: &str, j: &str| {
        format!(
            "[output]\nname = fig3-{sub}\ndir = fig3/{sub}\n\n[lattice]\nsizes = 2x2, 2x3\n\n[quench]\nhamiltonian = H5\nj1 = {j}\nj2 = {j}\n\n{common}"
        )
    };
    match name {
        "fig1" => Ok(vec![(
            String::new(),
            format!("[output]\nname = fig1\ndir = fig1\n\n[lattice]\nsizes = 2x2, 2x3\n\n[quench]\nhamiltonian = H3\nj1 = 0.33\nj2 = 1\n\n{common}"),
        )]),
        "fig2" => Ok(vec![(
            String::new(),
            format!("[output]\nname = fig2\ndir = fig2\n\n[lattice]\nsizes = 2x2, 2x3, 3x3\n\n[quench]\nhamiltonian = H4\nh = 0.34\n\n{common}"),
        )]),
        "fig3" => Ok(vec![("weak".into(), fig3("weak", "0.033")), ("strong".into(), fig3("strong", "3.3"))]),
        other => Err(Error::Config(vec![format!("unknown preset `{other}` (expected fig1, fig2 or fig3)")])),
    }
}

pub fn preset(name: &str, overrides: &[Override]) -> Result<Vec<ExperimentConfig>> {
    preset_texts(name)?.iter().map(|(_, text)| ExperimentConfig::parse_with(text, overrides)).collect()
}

/// Output directory: `--out` wins, then the config's `dir` under the
/// `TORIC_QUENCH_OUTPUT` root when that is set and `dir` is relative.
pub fn resolve_output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if cfg.output_dir.is_relative() => PathBuf::from(root).join(&cfg.output_dir),
            _ => cfg.output_dir.clone(),
        },
    }
}

#[derive(Debug, Clone)]
pub struct LatticeReport {
    pub rows: usize,
    pub cols: usize,
    pub num_spins: usize,
    pub mode: PropagatorMode,
    pub series: BTreeMap<Measure, TimeSeries<f64>>,
    /// Region used for fidelity and block entropy, when either ran.
    pub region: Option<Region>,
    pub krylov: KrylovStats,
    pub seconds: f64,
}

impl LatticeReport {
    pub fn label(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn min_overlap(&self) -> Option<f64> {
        self.series.get(&Measure::Overlap).map(TimeSeries::min)
    }

    pub fn recurrence(&self, threshold: f64) -> Option<f64> {
        self.series
            .get(&Measure::Overlap)
            .and_then(|s| crate::evolve::recurrence_period(s, threshold))
    }

    pub fn mean_s_topo(&self, after: f64) -> Option<f64> {
        self.series.get(&Measure::STopo).and_then(|s| s.mean_after(after))
    }

    pub fn min_fidelity(&self) -> Option<f64> {
        self.series.get(&Measure::Fidelity).map(TimeSeries::min)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub lattices: Vec<LatticeReport>,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub seconds: f64,
}

impl RunReport {
    pub fn lattice(&self, m: usize, n: usize) -> Option<&LatticeReport> {
        self.lattices.iter().find(|l| l.rows == m && l.cols == n)
    }
}

fn select_propagator(cfg: &ExperimentConfig, h: &crate::hamiltonian::HamiltonianOp<f64>) -> Result<Propagator<f64>> {
    match cfg.mode {
        ModeChoice::Auto => Propagator::auto(h, cfg.krylov),
        ModeChoice::Dense => Propagator::dense(h),
        ModeChoice::Krylov => Propagator::krylov(cfg.krylov),
    }
}

/// Runs every configured measure on one lattice without touching the filesystem.
pub fn simulate_lattice(cfg: &ExperimentConfig, m: usize, n: usize, with_fidelity: bool) -> Result<LatticeReport> {
    let start = Instant::now();
    let lat = EdgeLattice::with_max_spins(m, n, cfg.max_spins)?;
    let grp = enumerate_group(&lat)?;
    let h = build_hamiltonian(&cfg.quench, &lat)?;
    let prop = select_propagator(cfg, &h)?;
    let times = time_grid(cfg.t_max, cfg.dt)?;
    let psi0: StateVector<f64> = ground_state(&lat, &grp)?;

    let fidelity = with_fidelity && cfg.wants(Measure::Fidelity);
    let needs_region = fidelity || cfg.wants(Measure::BlockEntropy);
    let region = if needs_region {
        let r = match &cfg.region {
            RegionChoice::Bulk => lat.bulk_region(),
            RegionChoice::Edges(e) => lat.region(e.iter().copied())?,
        };
        if fidelity {
            check_bulk_region(&lat, &grp, &r)?;
        }
        Some(r)
    } else {
        None
    };
    let lw = if cfg.wants(Measure::STopo) { Some(lat.levin_wen_regions()?) } else { None };

    let mut overlap = Vec::new();
    let mut stopo = Vec::new();
    let mut block = Vec::new();
    let mut fid = Vec::new();

    let ((i0, j0), (i1, j1)) = cfg.sector_pair;
    let sectors = if fidelity {
        Some((
            sector_state(&lat, &grp, &SectorLabel::pure(i0, j0))?,
            sector_state(&lat, &grp, &SectorLabel::pure(i1, j1))?,
        ))
    } else {
        None
    };

    let mut main = trajectory(&prop, &h, &psi0, &times)?;
    let mut pair = match &sectors {
        Some((a, b)) => Some((trajectory(&prop, &h, a, &times)?, trajectory(&prop, &h, b, &times)?)),
        None => None,
    };
    for item in main.by_ref() {
        let (_, psi) = item?;
        if cfg.wants(Measure::Overlap) {
            overlap.push(psi0.overlap(&psi)?);
        }
        if let Some(lw) = &lw {
            stopo.push(topological_entropy(&psi, lw)?);
        }
        if cfg.wants(Measure::BlockEntropy) {
            block.push(region_entropy(&psi, region.as_ref().expect("region resolved"))?);
        }
        if let Some((ta, tb)) = pair.as_mut() {
            let (_, a) = ta.next().expect("same grid")?;
            let (_, b) = tb.next().expect("same grid")?;
            fid.push(reduced_fidelity(&a, &b, region.as_ref().expect("region resolved"))?);
        }
    }
    let mut krylov = main.stats();
    if let Some((ta, tb)) = &pair {
        for s in [ta.stats(), tb.stats()] {
            krylov.steps += s.steps;
            krylov.matvecs += s.matvecs;
            krylov.max_norm_drift = krylov.max_norm_drift.max(s.max_norm_drift);
            krylov.max_error_estimate = krylov.max_error_estimate.max(s.max_error_estimate);
        }
    }

    let mut series = BTreeMap::new();
    for (measure, values) in [
        (Measure::Overlap, overlap),
        (Measure::STopo, stopo),
        (Measure::BlockEntropy, block),
        (Measure::Fidelity, fid),
    ] {
        if !values.is_empty() {
            series.insert(measure, TimeSeries::new(times.clone(), values)?);
        }
    }
    Ok(LatticeReport {
        rows: m,
        cols: n,
        num_spins: lat.num_spins(),
        mode: prop.mode(),
        series,
        region,
        krylov,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn fidelity_lattices(cfg: &ExperimentConfig) -> Vec<bool> {
    match cfg.fidelity_on {
        FidelityScope::All => vec![true; cfg.lattices.len()],
        FidelityScope::Largest => {
            let largest = cfg.lattices.iter().map(|(m, n)| m * n).max().unwrap_or(0);
            let last = cfg.lattices.iter().rposition(|(m, n)| m * n == largest);
            (0..cfg.lattices.len()).map(|i| Some(i) == last).collect()
        }
    }
}

/// Simulates every lattice (in parallel) and returns the reports in config order.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<LatticeReport>> {
    cfg.check_sizes()?;
    time_grid(cfg.t_max, cfg.dt)?;
    let flags = fidelity_lattices(cfg);
    cfg.lattices
        .par_iter()
        .zip(flags.par_iter())
        .map(|(&(m, n), &f)| simulate_lattice(cfg, m, n, f))
        .collect()
}

fn csv_for(cfg: &ExperimentConfig, report: &LatticeReport, measure: Measure, series: &TimeSeries<f64>) -> String {
    let params = cfg.params();
    let mut s = String::new();
    let names: Vec<&str> = params.iter().map(|(k, _)| k.as_str()).collect();
    let _ = writeln!(s, "t,{},lattice,{}", measure.name(), names.join(","));
    let values: Vec<&str> = params.iter().map(|(_, v)| v.as_str()).collect();
    let tail = format!("{},{}", report.label(), values.join(","));
    for (t, v) in series.times().iter().zip(series.values()) {
        let _ = writeln!(s, "{t:.16e},{v:.16e},{tail}");
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.16e}"))
}

fn summary_for(cfg: &ExperimentConfig, reports: &[LatticeReport], seconds: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} summary\n\n# resolved configuration\n{}", cfg.name, cfg.resolved());
    let _ = writeln!(s, "# results (mean_s_topo averages samples with t > average_after)");
    for r in reports {
        let _ = writeln!(s, "\n[lattice {}]", r.label());
        let _ = writeln!(s, "spins = {}", r.num_spins);
        let _ = writeln!(
            s,
            "propagator = {}",
            match r.mode {
                PropagatorMode::Dense => "dense",
                PropagatorMode::Krylov => "krylov",
            }
        );
        if r.series.contains_key(&Measure::Overlap) {
            let _ = writeln!(s, "min_overlap = {}", fmt_opt(r.min_overlap()));
            let _ = writeln!(s, "recurrence_period = {}", fmt_opt(r.recurrence(cfg.recurrence_threshold)));
        }
        if r.series.contains_key(&Measure::STopo) {
            let _ = writeln!(s, "mean_s_topo = {}", fmt_opt(r.mean_s_topo(cfg.average_after)));
        }
        if r.series.contains_key(&Measure::Fidelity) {
            let _ = writeln!(s, "min_fidelity = {}", fmt_opt(r.min_fidelity()));
        }
        if let Some(b) = r.series.get(&Measure::BlockEntropy) {
            let _ = writeln!(s, "mean_block_entropy = {}", fmt_opt(b.mean_after(cfg.average_after)));
        }
        if let Some(region) = &r.region {
            let edges: Vec<String> = region.edges().iter().map(|e| e.to_string()).collect();
            let _ = writeln!(s, "region = {}", edges.join(", "));
        }
        if r.mode == PropagatorMode::Krylov {
            let _ = writeln!(s, "krylov_steps = {}", r.krylov.steps);
            let _ = writeln!(s, "krylov_matvecs = {}", r.krylov.matvecs);
            let _ = writeln!(s, "krylov_max_norm_drift = {:.3e}", r.krylov.max_norm_drift);
            let _ = writeln!(s, "krylov_max_error_estimate = {:.3e}", r.krylov.max_error_estimate);
        }
        let _ = writeln!(s, "wall_seconds = {:.3}", r.seconds);
    }
    let _ = writeln!(s, "\ntotal_wall_seconds = {seconds:.3}");
    s
}

/// Simulates, then writes one CSV per (measure, lattice) and `summary.txt` last.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let reports = simulate(cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for r in &reports {
        for (measure, series) in &r.series {
            let path = out_dir.join(format!("{}_{}.csv", measure.name(), r.label()));
            fs::write(&path, csv_for(cfg, r, *measure, series))?;
            files.push(path);
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let summary = out_dir.join("summary.txt");
    fs::write(&summary, summary_for(cfg, &reports, seconds))?;
    files.push(summary);
    Ok(RunReport { config: cfg.clone(), lattices: reports, output_dir: out_dir.to_path_buf(), files, seconds })
}
