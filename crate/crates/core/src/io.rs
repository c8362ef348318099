//! Run configuration and on-disk artifacts.
//!
//! Every artifact starts with `#`-prefixed header lines carrying the schema
//! version, the config hash, the seed and the kernel-derived constants.
//! Diagnostics and event logs are text; snapshots are a text header followed
//! by `3N` little-endian `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{total_proposal_rate, EngineConfig, EventRecord, InitialCondition};
use crate::error::{Error, Result};
use crate::estimators::{DiagnosticParams, DiagnosticsRecord, EstimatorReport};
use crate::geometry::Velocity;
use crate::kernel::{BetaForm, KernelSpec, BETA_CONVENTION};
use crate::weakform::EmpiricalFlow;

/// Bumped whenever the layout of any artifact changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "KACSIM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "kacsim-out";

pub const DIAGNOSTICS_COLUMNS: [&str; 16] = [
    "t",
    "m2",
    "m4",
    "entropy",
    "entropy_err",
    "fisher",
    "fisher_err",
    "pairwise_a",
    "pairwise_a_err",
    "w2",
    "w2_err",
    "chaos_cov",
    "chaos_cov_err",
    "weak_residual",
    "n",
    "k_entropy",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum BenchmarkSelector {
    MaxwellRate,
    Equilibrium,
    EpsSchedule,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum InitChoice {
    StandardGaussian,
    TwoBump,
    ScaleMixture,
}

/// Everything a run needs. Missing keys take the defaults below; unknown
/// keys are an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n: usize,
    pub gamma: f64,
    pub nu: f64,
    pub eps: f64,
    pub t_final: f64,
    pub seed: u64,
    pub snapshot_every: f64,
    pub replicas: usize,
    pub event_log: bool,
    pub audit_every: u64,
    /// Empty means `$KACSIM_OUTPUT_DIR`, else `kacsim-out`.
    pub output_dir: PathBuf,
    pub benchmark: BenchmarkSelector,
    pub eps_schedule: Vec<f64>,
    pub chaos_n: Vec<usize>,
    pub chaos_t: f64,
    /// Bump width for the weak-form residual column; 0 disables it.
    pub residual_bump_width: f64,
    pub beta: BetaForm,
    pub init: InitialCondition,
    pub diagnostics: DiagnosticParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 1024,
            gamma: -1.0,
            nu: 0.25,
            eps: 0.05,
            t_final: 4.0,
            seed: 0,
            snapshot_every: 0.5,
            replicas: 1,
            event_log: false,
            audit_every: 0,
            output_dir: PathBuf::new(),
            benchmark: BenchmarkSelector::All,
            eps_schedule: vec![0.2, 0.1, 0.05],
            chaos_n: vec![128, 512, 2048],
            chaos_t: 1.0,
            residual_bump_width: 0.0,
            beta: BetaForm::PowerLaw,
            init: InitialCondition::standard_gaussian(),
            diagnostics: DiagnosticParams::default(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ConfigOverrides {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Particle count; a comma-separated list sets the chaos-study sizes.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshot_every: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Switch to the uniform cutoff kernel with this constant.
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitChoice>,
    /// Keep the initial sample as drawn instead of normalizing it.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub event_log: bool,
    #[arg(long, value_enum)]
    pub benchmark: Option<BenchmarkSelector>,
    #[arg(long, value_delimiter = ',')]
    pub eps_schedule: Vec<f64>,
    #[arg(long)]
    pub chaos_t: Option<f64>,
    /// Width of the Gaussian bump for the weak-form residual column.
    #[arg(long)]
    pub residual_bump_width: Option<f64>,
}

impl RunConfig {
    /// Reads `path` (TOML) or starts from defaults, applies `overrides`,
    /// resolves the output directory and validates.
    pub fn load(overrides: &ConfigOverrides) -> Result<RunConfig> {
        let mut c = match &overrides.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        c.apply(overrides);
        if c.output_dir.as_os_str().is_empty() {
            c.output_dir = std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &o.$f { self.$f = v.clone(); })*};
        }
        set!(
            gamma,
            nu,
            eps,
            t_final,
            seed,
            snapshot_every,
            replicas,
            output_dir,
            benchmark,
            chaos_t,
            residual_bump_width
        );
        match o.n.len() {
            0 => {}
            1 => self.n = o.n[0],
            _ => self.chaos_n = o.n.clone(),
        }
        if !o.eps_schedule.is_empty() {
            self.eps_schedule = o.eps_schedule.clone();
        }
        if let Some(b) = o.beta0 {
            self.beta = BetaForm::CutoffUniform { beta0: b };
        }
        if let Some(i) = o.init {
            let normalize = self.init.normalize;
            self.init = match i {
                InitChoice::StandardGaussian => InitialCondition::standard_gaussian(),
                InitChoice::TwoBump => InitialCondition::two_bump(2.4, 0.5),
                InitChoice::ScaleMixture => InitialCondition::scale_mixture(0.8, 0.5, 3.0),
            }
            .normalized(normalize);
        }
        if o.no_normalize {
            self.init.normalize = false;
        }
        if o.event_log {
            self.event_log = true;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps = {} must be > 0: only the regularized system (bounded jump rate) is simulated",
                self.eps
            )));
        }
        self.kernel()?;
        if self.seed > i64::MAX as u64 || self.diagnostics.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seeds must be at most {} to fit a TOML integer", i64::MAX)));
        }
        if !(self.snapshot_every > 0.0) {
            return Err(Error::Config(format!("snapshot_every = {} must be > 0", self.snapshot_every)));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if self.eps_schedule.iter().any(|&e| !(e > 0.0)) || self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("eps_schedule must be positive and strictly decreasing".into()));
        }
        if self.chaos_n.iter().any(|&n| n < 2) {
            return Err(Error::Config("chaos_n entries must be at least 2".into()));
        }
        if !(self.chaos_t >= 0.0) {
            return Err(Error::Config(format!("chaos_t = {} must be >= 0", self.chaos_t)));
        }
        if !(self.residual_bump_width >= 0.0) {
            return Err(Error::Config("residual_bump_width must be >= 0".into()));
        }
        self.init.validate()?;
        self.engine_config()?.validate()
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.gamma, self.nu, self.eps, self.beta)
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        let mut c = EngineConfig::new(self.n, self.kernel()?, self.t_final, self.seed).with_init(self.init.clone());
        if self.t_final > 0.0 {
            c = c.with_snapshot_every(self.snapshot_every);
        } else {
            c.snapshot_times = vec![0.0];
        }
        c.event_log = self.event_log;
        c.audit_every = self.audit_every;
        Ok(c)
    }

    /// SHA-256 of the canonical TOML form with the output directory blanked,
    /// so that moving a run does not change its identity.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }
}

/// The identification block at the top of every artifact.
#[derive(Clone, Debug, PartialEq)]
pub struct ArtifactHeader {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub b: f64,
    pub b_eps: f64,
    pub proposal_rate: f64,
}

impl ArtifactHeader {
    pub fn new(kind: &str, config_hash: &str, engine: &EngineConfig) -> Self {
        ArtifactHeader {
            kind: kind.to_string(),
            config_hash: config_hash.to_string(),
            seed: engine.seed,
            b: engine.kernel.derived.b,
            b_eps: engine.kernel.derived.b_eps,
            proposal_rate: total_proposal_rate(engine),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "# kacsim {} schema {}\n# config_hash {}\n# seed {}\n# beta_convention {}\n# b {:e}\n# b_eps {:e}\n# proposal_rate {:e}\n",
            self.kind, SCHEMA_VERSION, self.config_hash, self.seed, BETA_CONVENTION, self.b, self.b_eps, self.proposal_rate
        )
    }

    /// Parses the header lines of `text`, checking kind and schema version.
    pub fn parse(kind: &str, lines: &[String], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.display().to_string(),
            reason,
        };
        let field = |key: &str| -> Result<String> {
            lines
                .iter()
                .find_map(|l| {
                    l.strip_prefix("# ")
                        .and_then(|r| r.strip_prefix(key))
                        .and_then(|r| r.strip_prefix(' '))
                })
                .map(str::to_string)
                .ok_or_else(|| bad(format!("missing header field {key}")))
        };
        let first = lines.first().ok_or_else(|| bad("empty file".into()))?;
        let want = format!("# kacsim {kind} schema {SCHEMA_VERSION}");
        if first != &want {
            return Err(bad(format!("expected '{want}', found '{first}'")));
        }
        let num = |key: &str| -> Result<f64> { field(key)?.parse().map_err(|_| bad(format!("bad number in {key}"))) };
        Ok(ArtifactHeader {
            kind: kind.to_string(),
            config_hash: field("config_hash")?,
            seed: field("seed")?.parse().map_err(|_| bad("bad seed".into()))?,
            b: num("b")?,
            b_eps: num("b_eps")?,
            proposal_rate: num("proposal_rate")?,
        })
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:e}")
}

fn report_cells(r: Option<&EstimatorReport>) -> [String; 2] {
    match r {
        Some(r) => [num(r.value), num(r.std_error)],
        None => ["NA".into(), "NA".into()],
    }
}

/// One line per record in the fixed column order of [`DIAGNOSTICS_COLUMNS`].
pub fn render_diagnostics(records: &[DiagnosticsRecord], header: &ArtifactHeader) -> Result<String> {
    if records.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidInput("diagnostics records must be sorted by time".into()));
    }
    let mut out = header.render();
    out.push_str(&DIAGNOSTICS_COLUMNS.join("\t"));
    out.push('\n');
    for r in records {
        let mut cells = vec![num(r.t), num(r.m2), num(r.m4)];
        cells.extend(report_cells(Some(&r.entropy)));
        cells.extend(report_cells(Some(&r.fisher)));
        cells.extend(report_cells(Some(&r.pairwise_a_moment)));
        cells.extend(report_cells(r.w2_to_reference.as_ref()));
        cells.extend(report_cells(r.chaos_cov.as_ref()));
        cells.push(r.weak_residual.map_or("NA".into(), num));
        cells.push(r.entropy.n_samples.to_string());
        cells.push(r.entropy.parameters.get("k").map_or("NA".into(), |k| k.to_string()));
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    Ok(out)
}

pub fn emit_diagnostics(records: &[DiagnosticsRecord], header: &ArtifactHeader, path: &Path) -> Result<()> {
    write_text(path, &render_diagnostics(records, header)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_event_log(events: &[EventRecord], header: &ArtifactHeader, path: &Path) -> Result<()> {
    let mut out = header.render();
    out.push_str("t,i,j,theta,phi,accepted\n");
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(e.t),
            e.i,
            e.j,
            num(e.theta),
            num(e.phi),
            e.accepted as u8
        );
    }
    write_text(path, &out)
}

/// A snapshot read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub header: ArtifactHeader,
    pub t: f64,
    pub velocities: Vec<Velocity>,
}

pub fn write_snapshot(path: &Path, header: &ArtifactHeader, t: f64, vs: &[Velocity]) -> Result<()> {
    let mut out = header.render().into_bytes();
    let _ = write!(out, "# t {}\n# n {}\n# end_header\n", num(t), vs.len());
    for v in vs {
        for x in [v.x, v.y, v.z] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: "header not terminated".into(),
            });
        }
        let line = line.trim_end_matches('\n').to_string();
        if line == "# end_header" {
            break;
        }
        lines.push(line);
    }
    let header = ArtifactHeader::parse("snapshot", &lines, path)?;
    let bad = |reason: &str| Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let get = |key: &str| lines.iter().find_map(|l| l.strip_prefix(&format!("# {key} ")).map(str::to_string));
    let t: f64 = get("t").and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad t"))?;
    let n: usize = get("n").and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad n"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 24 * n {
        return Err(bad(&format!("expected {} payload bytes, found {}", 24 * n, bytes.len())));
    }
    let x: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let velocities = x.chunks_exact(3).map(|c| Velocity::new(c[0], c[1], c[2])).collect();
    Ok(Snapshot { header, t, velocities })
}

pub fn snapshot_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("snapshot_{index:04}.bin"))
}

/// Reads `snapshot_0000.bin, snapshot_0001.bin, ...` from `dir` into a flow.
pub fn read_flow(dir: &Path) -> Result<(ArtifactHeader, EmpiricalFlow)> {
    let mut times = Vec::new();
    let mut snaps = Vec::new();
    let mut header = None;
    for k in 0.. {
        let p = snapshot_path(dir, k);
        if !p.exists() {
            break;
        }
        let s = read_snapshot(&p)?;
        if let Some(h) = &header {
            if *h != s.header {
                return Err(Error::Format {
                    path: p.display().to_string(),
                    reason: "snapshot headers disagree within one run".into(),
                });
            }
        }
        header = Some(s.header);
        times.push(s.t);
        snaps.push(s.velocities);
    }
    let header = header.ok_or_else(|| Error::InvalidInput(format!("no snapshots in {}", dir.display())))?;
    Ok((header, EmpiricalFlow::new(times, snaps)?))
}
