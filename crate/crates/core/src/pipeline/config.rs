//! Flat `[section] key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::{LinearSolverSpec, SolverMethod};
use crate::fom::{FomConfig, Forcing, InitialCondition};
use crate::io::Fingerprint;
use crate::mesh::{DomainKind, DomainSpec};
use crate::recovery::Method;
use crate::supremizer::GsInner;

/// A mode count: a fixed number or the full snapshot rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeCount {
    Rank,
    Fixed(usize),
}

impl ModeCount {
    pub fn resolve(self, rank: usize) -> usize {
        match self {
            ModeCount::Rank => rank,
            ModeCount::Fixed(k) => k.min(rank),
        }
    }

    fn parse(v: &str) -> Option<Self> {
        if v.eq_ignore_ascii_case("rank") {
            Some(ModeCount::Rank)
        } else {
            v.parse().ok().filter(|&k| k > 0).map(ModeCount::Fixed)
        }
    }

    fn text(self) -> String {
        match self {
            ModeCount::Rank => "rank".into(),
            ModeCount::Fixed(k) => k.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    ConvM,
    ConvR,
    MerVsPpe,
}

impl Study {
    pub const ALL: [Study; 3] = [Study::ConvM, Study::ConvR, Study::MerVsPpe];

    pub fn name(self) -> &'static str {
        match self {
            Study::ConvM => "CONV_M",
            Study::ConvR => "CONV_R",
            Study::MerVsPpe => "MER_VS_PPE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Study::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub domain: DomainSpec,
    pub fom: FomConfig,
    pub r: ModeCount,
    pub m: ModeCount,
    pub m_sweep: Vec<usize>,
    pub r_sweep: Vec<usize>,
    pub gs_inner: GsInner,
    pub fe_inf_sup: bool,
    pub methods: Vec<Method>,
    pub study: Option<Study>,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::offset_annulus(1),
            fom: FomConfig::desk(),
            r: ModeCount::Rank,
            m: ModeCount::Fixed(12),
            m_sweep: vec![2, 4, 6, 8, 10, 12],
            r_sweep: vec![5, 10, 15, 20, 25],
            gs_inner: GsInner::L2,
            fe_inf_sup: true,
            methods: vec![Method::Mer, Method::Ppe],
            study: None,
            out: PathBuf::from("out"),
            seed: 20240101,
        }
    }
}

fn bad(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config(format!("{file}:{line}: {}", msg.into()))
}

fn list(v: &str) -> Option<Vec<usize>> {
    v.split(',').map(|s| s.trim().parse::<usize>().ok().filter(|&k| k > 0)).collect()
}

fn flag(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Config(format!("config file {} not found", path.display())));
        }
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut seen = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = no + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| bad(file, line, format!("expected key = value, got `{body}`")))?;
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim());
            let full = format!("{section}.{k}");
            if seen.insert(full.clone(), line).is_some() {
                return Err(bad(file, line, format!("duplicate key `{full}`")));
            }
            let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(file, line, format!("`{full}` expects a number")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| bad(file, line, format!("`{full}` expects an integer")));
            match full.as_str() {
                "mesh.kind" => {
                    cfg.domain.kind = match v.to_ascii_lowercase().as_str() {
                        "offset_annulus" => DomainKind::OffsetAnnulus,
                        "unit_square" => DomainKind::UnitSquare,
                        _ => return Err(bad(file, line, format!("unknown mesh kind `{v}`"))),
                    }
                }
                "mesh.file" => cfg.domain.kind = DomainKind::File(PathBuf::from(v)),
                "mesh.refinement" => cfg.domain.refinement = int(v)?,
                "mesh.r1" => cfg.domain.r1 = num(v)?,
                "mesh.r2" => cfg.domain.r2 = num(v)?,
                "mesh.c1" => cfg.domain.c1 = num(v)?,
                "mesh.c2" => cfg.domain.c2 = num(v)?,
                "fom.nu" => cfg.fom.nu = num(v)?,
                "fom.dt" => cfg.fom.dt = num(v)?,
                "fom.t_start" => cfg.fom.t_start = num(v)?,
                "fom.t_snapshot_start" => cfg.fom.t_snapshot_start = num(v)?,
                "fom.t_end" => cfg.fom.t_end = num(v)?,
                "fom.stride" => cfg.fom.stride = int(v)?,
                "fom.forcing" => {
                    cfg.fom.forcing = match v.to_ascii_lowercase().as_str() {
                        "rotational" => Forcing::Rotational,
                        "zero" => Forcing::Zero,
                        _ => return Err(bad(file, line, format!("unknown forcing `{v}`"))),
                    }
                }
                "fom.initial" => {
                    if !v.eq_ignore_ascii_case("rest") {
                        return Err(bad(file, line, "only `rest` initial conditions can be configured"));
                    }
                    cfg.fom.initial = InitialCondition::Rest;
                }
                "fom.solver" => {
                    cfg.fom.solver = LinearSolverSpec {
                        method: match v.to_ascii_lowercase().as_str() {
                            "sparse_lu" => SolverMethod::SparseLu,
                            "cg" => SolverMethod::Cg,
                            _ => return Err(bad(file, line, format!("unknown solver `{v}`"))),
                        },
                        ..cfg.fom.solver
                    }
                }
                "pod.r" => cfg.r = ModeCount::parse(v).ok_or_else(|| bad(file, line, "`pod.r` expects a positive integer or `rank`"))?,
                "pod.m" => cfg.m = ModeCount::parse(v).ok_or_else(|| bad(file, line, "`pod.m` expects a positive integer or `rank`"))?,
                "pod.m_sweep" => cfg.m_sweep = list(v).ok_or_else(|| bad(file, line, "`pod.m_sweep` expects positive integers"))?,
                "pod.r_sweep" => cfg.r_sweep = list(v).ok_or_else(|| bad(file, line, "`pod.r_sweep` expects positive integers"))?,
                "supremizer.inner" => cfg.gs_inner = GsInner::parse(v).ok_or_else(|| bad(file, line, format!("unknown inner product `{v}`")))?,
                "supremizer.fe_inf_sup" => cfg.fe_inf_sup = flag(v).ok_or_else(|| bad(file, line, "expected true or false"))?,
                "recovery.methods" => {
                    cfg.methods = v
                        .split(',')
                        .map(|s| Method::parse(s).ok_or_else(|| bad(file, line, format!("unknown method `{}`", s.trim()))))
                        .collect::<Result<Vec<_>>>()?;
                }
                "study.which" => cfg.study = Some(Study::parse(v).ok_or_else(|| bad(file, line, format!("unknown study `{v}`")))?),
                "output.dir" => cfg.out = PathBuf::from(v),
                "run.seed" => cfg.seed = v.parse().map_err(|_| bad(file, line, "`run.seed` expects an unsigned integer"))?,
                _ => return Err(bad(file, line, format!("unknown key `{full}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fom.validate()?;
        for (name, sweep) in [("m_sweep", &self.m_sweep), ("r_sweep", &self.r_sweep)] {
            if sweep.is_empty() || sweep.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("{name} must be a non-empty strictly increasing list")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one recovery method is required".into()));
        }
        Ok(())
    }

    fn domain_text(&self) -> String {
        let kind = match &self.domain.kind {
            DomainKind::OffsetAnnulus => "kind=offset_annulus".to_string(),
            DomainKind::UnitSquare => "kind=unit_square".to_string(),
            DomainKind::File(p) => format!("file={}", p.display()),
        };
        let d = &self.domain;
        format!("{kind}\nrefinement={}\nr1={:?}\nr2={:?}\nc1={:?}\nc2={:?}\n", d.refinement, d.r1, d.r2, d.c1, d.c2)
    }

    fn fom_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in crate::fom::config_echo(&self.fom) {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Canonical text of every setting, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[mesh]\n{}", self.domain_text());
        let _ = writeln!(s, "[fom]\n{}", self.fom_text());
        let _ = writeln!(
            s,
            "[pod]\nr={}\nm={}\nm_sweep={}\nr_sweep={}\n",
            self.r.text(),
            self.m.text(),
            join(&self.m_sweep),
            join(&self.r_sweep)
        );
        let _ = writeln!(s, "[supremizer]\ninner={}\nfe_inf_sup={}\n", self.gs_inner.name(), self.fe_inf_sup);
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let _ = writeln!(s, "[recovery]\nmethods={}\n", methods.join(","));
        let _ = writeln!(s, "[run]\nseed={}", self.seed);
        s
    }

    /// Key of the snapshot stage: mesh and full-order settings.
    pub fn fom_key(&self) -> String {
        Fingerprint::new().bytes(self.domain_text().as_bytes()).bytes(self.fom_text().as_bytes()).finish()
    }

    /// Key of the supremizer stage on top of the snapshot stage.
    pub fn supremizer_key(&self) -> String {
        Fingerprint::new().bytes(self.fom_key().as_bytes()).bytes(self.gs_inner.name().as_bytes()).finish()
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
}
