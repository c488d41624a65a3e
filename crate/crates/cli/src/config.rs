//! Run configuration: command-line flags, `key=value` files and the merge of
//! the two.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};

use bilevel_ptp::models::ModelKind;
use bilevel_ptp::solver::Limits;

use crate::CliError;

/// Environment variable that replaces the configured output directory.
pub const OUT_DIR_ENV: &str = "BPTP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "bptp-out";
pub const DEFAULT_PHASE_SECONDS: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InstanceFormat {
    Chao,
    Solomon,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Heuristic warm start, then branch-and-cut.
    #[default]
    Solve,
    /// Branch-and-cut against exhaustive enumeration.
    Verify,
    /// Complete LP relaxations of the aggregated and disaggregated margin models.
    LpCompare,
    /// Only the three-phase heuristic.
    HeuristicOnly,
}

/// Capacity rule applied after loading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CapacityChoice {
    /// Item budgets of `ceil(n / carriers) + 2`.
    Budget,
    /// Route duration limits from the instance file.
    Duration,
}

/// Ascending margins strictly inside `(0, 1)`, written `0.2,0.5` or `{0.2,0.5}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginSet(pub Vec<f64>);

impl FromStr for MarginSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
        let values = inner
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad margin {t:?}")))
            .collect::<Result<Vec<f64>, String>>()?;
        if values.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
            return Err(format!("margins must lie strictly between 0 and 1: {s}"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("margins must be strictly ascending: {s}"));
        }
        Ok(MarginSet(values))
    }
}

impl fmt::Display for MarginSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bilevel_ptp::report::margin_label(&self.0))
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: bilevel_ptp::Error| e.to_string())
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number of seconds, got {s:?}")),
    }
}

/// Every setting of a run, each optional so that a config file and flags
/// can be layered.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Instance file.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Instance file format; `.json` files default to json.
    #[arg(long, value_enum)]
    pub format: Option<InstanceFormat>,
    /// BPFM, BPFM_Z, BPMD, BPMD_D, BPMD_Z or BPMD_D_Z.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ModelKind>,
    /// Margin set, e.g. `0.2,0.5`.
    #[arg(long)]
    pub margins: Option<MarginSet>,
    /// Number of carriers for Solomon files.
    #[arg(long)]
    pub carriers: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Seed for regenerated item prices.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Branch-and-cut time limit in seconds.
    #[arg(long, value_parser = parse_seconds)]
    pub time_limit: Option<f64>,
    /// Branch-and-cut node limit.
    #[arg(long)]
    pub node_limit: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub capacity: Option<CapacityChoice>,
    /// Keep only the first customers.
    #[arg(long)]
    pub customers: Option<usize>,
    /// Time limit per heuristic phase in seconds.
    #[arg(long, value_parser = parse_seconds)]
    pub phase_time: Option<f64>,
    /// Margin that fixes every compensation for BPFM kinds when the instance
    /// carries none.
    #[arg(long)]
    pub fixed_margin: Option<f64>,
}

impl RunOptions {
    /// Reads a `key=value` file. Keys are the long flag names; blank lines and
    /// lines starting with `#` are skipped. A relative `instance` path is
    /// resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut opts = RunOptions::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), idx + 1)))?;
            opts.set(key.trim(), value.trim())
                .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        }
        if let Some(inst) = opts.instance.as_mut() {
            if inst.is_relative() {
                if let Some(dir) = path.parent() {
                    *inst = dir.join(&*inst);
                }
            }
        }
        Ok(opts)
    }

    /// Sets one option from its flag name and textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad number {v:?}"))
        }
        fn choice<T: ValueEnum>(v: &str) -> Result<T, String> {
            T::from_str(v, true)
        }
        match key.replace('_', "-").as_str() {
            "instance" => self.instance = Some(PathBuf::from(value)),
            "format" => self.format = Some(choice(value)?),
            "kind" => self.kind = Some(parse_kind(value)?),
            "margins" => self.margins = Some(value.parse()?),
            "carriers" => self.carriers = Some(num(value)?),
            "mode" => self.mode = Some(choice(value)?),
            "seed" => self.seed = Some(num(value)?),
            "time-limit" => self.time_limit = Some(parse_seconds(value)?),
            "node-limit" => self.node_limit = Some(num(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "capacity" => self.capacity = Some(choice(value)?),
            "customers" => self.customers = Some(num(value)?),
            "phase-time" => self.phase_time = Some(parse_seconds(value)?),
            "fixed-margin" => self.fixed_margin = Some(num(value)?),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// `self` with every option set in `over` replaced.
    pub fn overridden_by(self, over: RunOptions) -> RunOptions {
        RunOptions {
            instance: over.instance.or(self.instance),
            format: over.format.or(self.format),
            kind: over.kind.or(self.kind),
            margins: over.margins.or(self.margins),
            carriers: over.carriers.or(self.carriers),
            mode: over.mode.or(self.mode),
            seed: over.seed.or(self.seed),
            time_limit: over.time_limit.or(self.time_limit),
            node_limit: over.node_limit.or(self.node_limit),
            out: over.out.or(self.out),
            capacity: over.capacity.or(self.capacity),
            customers: over.customers.or(self.customers),
            phase_time: over.phase_time.or(self.phase_time),
            fixed_margin: over.fixed_margin.or(self.fixed_margin),
        }
    }

    /// Fills defaults and checks the combination. `env_out` is the value of
    /// [`OUT_DIR_ENV`]; an explicit `--out` flag still wins over it when
    /// `out_from_flag` is set.
    pub fn resolve(self, env_out: Option<PathBuf>, out_from_flag: bool) -> Result<RunConfig, CliError> {
        let instance = self.instance.ok_or_else(|| CliError::Usage("no instance given".into()))?;
        let format = match self.format {
            Some(f) => f,
            None if instance.extension().is_some_and(|e| e == "json") => InstanceFormat::Json,
            None => return Err(CliError::Usage(format!("cannot infer the format of {}", instance.display()))),
        };
        if format == InstanceFormat::Solomon && self.carriers.is_none() {
            return Err(CliError::Usage("solomon instances need --carriers".into()));
        }
        if self.carriers == Some(0) {
            return Err(CliError::Usage("--carriers must be positive".into()));
        }
        if let Some(m) = self.fixed_margin {
            if !(m > 0.0 && m < 1.0) {
                return Err(CliError::Usage(format!("--fixed-margin must lie strictly between 0 and 1, got {m}")));
            }
        }
        let out = match (out_from_flag, env_out) {
            (false, Some(env)) => env,
            _ => self.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        };
        Ok(RunConfig {
            instance,
            format,
            kind: self.kind.unwrap_or(ModelKind::Bpmd),
            margins: self.margins.map(|m| m.0),
            carriers: self.carriers,
            capacity: self.capacity,
            customers: self.customers,
            seed: self.seed,
            fixed_margin: self.fixed_margin,
            limits: Limits {
                time_seconds: self.time_limit,
                nodes: self.node_limit,
            },
            phase_seconds: self.phase_time.unwrap_or(DEFAULT_PHASE_SECONDS),
            mode: self.mode.unwrap_or_default(),
            out,
        })
    }
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub instance: PathBuf,
    pub format: InstanceFormat,
    pub kind: ModelKind,
    /// Replaces the instance's margin set.
    pub margins: Option<Vec<f64>>,
    pub carriers: Option<usize>,
    pub capacity: Option<CapacityChoice>,
    pub customers: Option<usize>,
    /// Regenerates prices with this seed.
    pub seed: Option<u64>,
    pub fixed_margin: Option<f64>,
    pub limits: Limits,
    pub phase_seconds: f64,
    pub mode: Mode,
    pub out: PathBuf,
}

impl RunConfig {
    /// Config with defaults for `instance`.
    pub fn new(instance: impl Into<PathBuf>) -> Result<Self, CliError> {
        RunOptions {
            instance: Some(instance.into()),
            ..RunOptions::default()
        }
        .resolve(None, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_sets_parse_with_or_without_braces() {
        assert_eq!("0.2,0.5".parse::<MarginSet>().unwrap().0, vec![0.2, 0.5]);
        assert_eq!("{0.5, 0.7, 0.9}".parse::<MarginSet>().unwrap().0, vec![0.5, 0.7, 0.9]);
        assert!("0.5,0.2".parse::<MarginSet>().is_err());
        assert!("0.2,1.0".parse::<MarginSet>().is_err());
        assert!("0.2,x".parse::<MarginSet>().is_err());
        assert_eq!(MarginSet(vec![0.2, 0.5]).to_string(), "{0.2,0.5}");
    }

    #[test]
    fn config_file_keys_match_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "# comment\ninstance = inst.json\nkind=bpmd-d\nmargins={0.2,0.5}\nmode=lp-compare\ntime_limit=5\nphase-time=2\n",
        )
        .unwrap();
        let opts = RunOptions::from_file(&path).unwrap();
        assert_eq!(opts.instance, Some(dir.path().join("inst.json")));
        assert_eq!(opts.kind, Some(ModelKind::BpmdD));
        assert_eq!(opts.mode, Some(Mode::LpCompare));
        let cfg = opts.resolve(None, false).unwrap();
        assert_eq!(cfg.format, InstanceFormat::Json);
        assert_eq!(cfg.limits.time_seconds, Some(5.0));
        assert_eq!(cfg.phase_seconds, 2.0);
        assert_eq!(cfg.margins, Some(vec![0.2, 0.5]));
    }

    #[test]
    fn bad_config_lines_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        fs::write(&path, "instance=a.json\ncolour=blue\n").unwrap();
        let err = RunOptions::from_file(&path).unwrap_err();
        assert!(matches!(err, CliError::Usage(ref m) if m.contains(":2:")), "{err}");
        fs::write(&path, "no equals sign\n").unwrap();
        assert!(matches!(RunOptions::from_file(&path), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_override_file_and_environment_overrides_file() {
        let file = RunOptions {
            instance: Some("a.json".into()),
            out: Some("from-file".into()),
            kind: Some(ModelKind::BpmdZ),
            ..RunOptions::default()
        };
        let flags = RunOptions {
            kind: Some(ModelKind::Bpfm),
            ..RunOptions::default()
        };
        let merged = file.clone().overridden_by(flags);
        assert_eq!(merged.kind, Some(ModelKind::Bpfm));
        let cfg = merged.clone().resolve(Some("from-env".into()), false).unwrap();
        assert_eq!(cfg.out, PathBuf::from("from-env"));
        let with_flag = merged.overridden_by(RunOptions { out: Some("from-flag".into()), ..RunOptions::default() });
        assert_eq!(with_flag.resolve(Some("from-env".into()), true).unwrap().out, PathBuf::from("from-flag"));
    }

    #[test]
    fn missing_pieces_are_rejected() {
        assert!(matches!(RunOptions::default().resolve(None, false), Err(CliError::Usage(_))));
        let no_format = RunOptions { instance: Some("p1.2.k.txt".into()), ..RunOptions::default() };
        assert!(matches!(no_format.resolve(None, false), Err(CliError::Usage(_))));
        let solomon = RunOptions {
            instance: Some("r101.txt".into()),
            format: Some(InstanceFormat::Solomon),
            ..RunOptions::default()
        };
        assert!(matches!(solomon.clone().resolve(None, false), Err(CliError::Usage(_))));
        let zero = RunOptions { carriers: Some(0), ..solomon };
        assert!(matches!(zero.resolve(None, false), Err(CliError::Usage(_))));
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::new("x.json").unwrap();
        assert_eq!(cfg.kind, ModelKind::Bpmd);
        assert_eq!(cfg.mode, Mode::Solve);
        assert_eq!(cfg.phase_seconds, DEFAULT_PHASE_SECONDS);
        assert_eq!(cfg.out, PathBuf::from(DEFAULT_OUT_DIR));
        assert_eq!(cfg.limits, Limits::default());
    }
}
