//! TOML scenario files for `simulate` and `compare`.
//!
//! ```toml
//! kernels = ["g2", "g3"]     # or a single string
//! targets = ["f1", "f5"]
//! snr = [5, 15]
//! n = [100, 200]
//! reps = 400
//! seed = 1
//! horizon = 100
//! a = "auto"                 # or a number
//! M = 11
//! B = 0.5
//! c_pen = 1.5
//! alpha = "auto"             # or a number
//! alpha_range = [1, 7]
//! ```

use std::fmt;
use std::str::FromStr;

use lapdeconv::select::{AlphaMode, EstimatorConfig};
use lapdeconv::simulate::{KernelKind, ScaleSetting, Scenario, SnrVariance, TargetKind};
use lapdeconv::ZMode;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{CliError, CliResult};

/// A number, or the word `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr {
    Auto,
    Value(f64),
}

impl FromStr for AutoOr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AutoOr::Auto);
        }
        s.parse::<f64>()
            .map(AutoOr::Value)
            .map_err(|_| format!("expected a number or `auto`, got `{s}`"))
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for AutoOr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AutoOr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(AutoOr::Value(v)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A fully resolved scenario file: every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub kernels: Vec<String>,
    pub targets: Vec<String>,
    pub snr: Vec<f64>,
    pub n: Vec<usize>,
    pub horizon: f64,
    pub reps: usize,
    pub seed: u64,
    pub a: AutoOr,
    #[serde(rename = "M")]
    pub size: usize,
    #[serde(rename = "B")]
    pub b: f64,
    pub c_pen: f64,
    pub alpha: AutoOr,
    pub alpha_range: [usize; 2],
    pub z_mode: ZMode,
    pub snr_variance: SnrVariance,
    pub sigma: Option<f64>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            kernels: vec![],
            targets: vec![],
            snr: vec![],
            n: vec![100],
            horizon: 100.0,
            reps: 400,
            seed: 1,
            a: AutoOr::Auto,
            size: 11,
            b: 0.5,
            c_pen: 1.5,
            alpha: AutoOr::Auto,
            alpha_range: [1, 7],
            z_mode: ZMode::Truncate,
            snr_variance: SnrVariance::TimeAveraged,
            sigma: None,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "kernel",
    "kernels",
    "target",
    "targets",
    "snr",
    "n",
    "horizon",
    "reps",
    "seed",
    "a",
    "M",
    "B",
    "c_pen",
    "alpha",
    "alpha_range",
    "z_mode",
    "snr_variance",
    "sigma",
];

struct Collector {
    problems: Vec<String>,
}

impl Collector {
    fn push(&mut self, key: &str, msg: impl fmt::Display) {
        self.problems.push(format!("{key}: {msg}"));
    }
}

fn list<'a>(v: &'a toml::Value) -> Vec<&'a toml::Value> {
    match v {
        toml::Value::Array(items) => items.iter().collect(),
        other => vec![other],
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &toml::Value) -> Option<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Some(*i as usize),
        _ => None,
    }
}

fn as_auto_or(v: &toml::Value) -> Option<AutoOr> {
    match v {
        toml::Value::String(s) => s.parse().ok(),
        other => as_f64(other).map(AutoOr::Value),
    }
}

impl ScenarioFile {
    /// Parses and validates a scenario, reporting every problem at once.
    pub fn parse(text: &str) -> CliResult<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::Validation(format!("scenario is not valid TOML: {e}"))
        })?;
        let mut c = Collector {
            problems: Vec::new(),
        };
        let mut out = ScenarioFile::default();
        for key in table.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                c.push(key, "unknown key");
            }
        }
        let strings = |c: &mut Collector, key: &str, v: &toml::Value| -> Vec<String> {
            list(v)
                .into_iter()
                .filter_map(|x| match x {
                    toml::Value::String(s) => Some(s.clone()),
                    other => {
                        c.push(key, format!("expected a string, got {other}"));
                        None
                    }
                })
                .collect()
        };
        for (key, dst) in [("kernel", 0), ("kernels", 0), ("target", 1), ("targets", 1)] {
            if let Some(v) = table.get(key) {
                let s = strings(&mut c, key, v);
                if dst == 0 {
                    out.kernels.extend(s);
                } else {
                    out.targets.extend(s);
                }
            }
        }
        if let Some(v) = table.get("snr") {
            for x in list(v) {
                match as_f64(x) {
                    Some(f) => out.snr.push(f),
                    None => c.push("snr", format!("expected a number, got {x}")),
                }
            }
        }
        if let Some(v) = table.get("n") {
            out.n.clear();
            for x in list(v) {
                match as_usize(x) {
                    Some(n) => out.n.push(n),
                    None => c.push("n", format!("expected a nonnegative integer, got {x}")),
                }
            }
        }
        macro_rules! scalar {
            ($key:literal, $conv:ident, $field:expr, $what:literal) => {
                if let Some(v) = table.get($key) {
                    match $conv(v) {
                        Some(x) => $field = x,
                        None => c.push($key, format!(concat!("expected ", $what, ", got {}"), v)),
                    }
                }
            };
        }
        scalar!("horizon", as_f64, out.horizon, "a number");
        scalar!("reps", as_usize, out.reps, "a nonnegative integer");
        scalar!("M", as_usize, out.size, "a positive integer");
        scalar!("B", as_f64, out.b, "a number");
        scalar!("c_pen", as_f64, out.c_pen, "a number");
        scalar!("a", as_auto_or, out.a, "a number or \"auto\"");
        scalar!("alpha", as_auto_or, out.alpha, "a number or \"auto\"");
        if let Some(v) = table.get("seed") {
            match v {
                toml::Value::Integer(i) if *i >= 0 => out.seed = *i as u64,
                other => c.push(
                    "seed",
                    format!("expected a nonnegative integer, got {other}"),
                ),
            }
        }
        if let Some(v) = table.get("sigma") {
            match as_f64(v) {
                Some(s) => out.sigma = Some(s),
                None => c.push("sigma", format!("expected a number, got {v}")),
            }
        }
        if let Some(v) = table.get("alpha_range") {
            let r: Vec<Option<usize>> = list(v).into_iter().map(as_usize).collect();
            match r.as_slice() {
                [Some(lo), Some(hi)] => out.alpha_range = [*lo, *hi],
                _ => c.push("alpha_range", "expected two integers [m_lo, m_hi]"),
            }
        }
        if let Some(v) = table.get("z_mode") {
            match v.as_str() {
                Some("truncate") => out.z_mode = ZMode::Truncate,
                Some("refit") => out.z_mode = ZMode::Refit,
                _ => c.push(
                    "z_mode",
                    format!("expected \"truncate\" or \"refit\", got {v}"),
                ),
            }
        }
        if let Some(v) = table.get("snr_variance") {
            match v.as_str() {
                Some("time_averaged") => out.snr_variance = SnrVariance::TimeAveraged,
                Some("literal") => out.snr_variance = SnrVariance::Literal,
                _ => c.push(
                    "snr_variance",
                    format!("expected \"time_averaged\" or \"literal\", got {v}"),
                ),
            }
        }
        out.check(&mut c);
        if c.problems.is_empty() {
            Ok(out)
        } else {
            Err(CliError::Validation(format!(
                "invalid scenario ({} problem{}):\n  {}",
                c.problems.len(),
                if c.problems.len() == 1 { "" } else { "s" },
                c.problems.join("\n  ")
            )))
        }
    }

    /// Re-validates after command-line overrides.
    pub fn validate(&self) -> CliResult<()> {
        let mut c = Collector {
            problems: Vec::new(),
        };
        self.check(&mut c);
        if c.problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(format!(
                "invalid scenario:\n  {}",
                c.problems.join("\n  ")
            )))
        }
    }

    fn check(&self, c: &mut Collector) {
        if self.kernels.is_empty() {
            c.push("kernels", "at least one kernel is required");
        }
        for k in &self.kernels {
            if KernelKind::parse(k).is_none() {
                c.push(
                    "kernels",
                    format!("unknown kernel `{k}` (expected g2, g3, g1_surrogate or exp(<rate>))"),
                );
            }
        }
        if self.targets.is_empty() {
            c.push("targets", "at least one target is required");
        }
        for t in &self.targets {
            if TargetKind::parse(t).is_none() {
                c.push(
                    "targets",
                    format!("unknown target `{t}` (expected f1 to f5)"),
                );
            }
        }
        if self.snr.is_empty() && self.sigma.is_none() {
            c.push("snr", "at least one SNR is required");
        }
        for s in &self.snr {
            if !(*s > 0.0) || !s.is_finite() {
                c.push("snr", format!("must be positive, got {s}"));
            }
        }
        if self.n.is_empty() {
            c.push("n", "at least one sample size is required");
        }
        for n in &self.n {
            if *n < 2 {
                c.push("n", format!("must be at least 2, got {n}"));
            }
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            c.push("horizon", format!("must be positive, got {}", self.horizon));
        }
        if self.reps < 1 {
            c.push("reps", format!("must be at least 1, got {}", self.reps));
        }
        if self.size < 1 {
            c.push("M", format!("must be at least 1, got {}", self.size));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            c.push("B", format!("must be positive, got {}", self.b));
        }
        if !(self.c_pen > 0.0) || !self.c_pen.is_finite() {
            c.push("c_pen", format!("must be positive, got {}", self.c_pen));
        }
        if let AutoOr::Value(a) = self.a {
            if !(a > 0.0) || !a.is_finite() {
                c.push("a", format!("must be positive or \"auto\", got {a}"));
            }
        }
        if let AutoOr::Value(a) = self.alpha {
            if !a.is_finite() {
                c.push("alpha", format!("must be finite, got {a}"));
            }
        }
        let [lo, hi] = self.alpha_range;
        if lo < 1 || hi <= lo {
            c.push(
                "alpha_range",
                format!("needs 1 <= m_lo < m_hi, got [{lo}, {hi}]"),
            );
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                c.push("sigma", format!("must be nonnegative, got {s}"));
            }
        }
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            size: self.size,
            b: self.b,
            c_pen: self.c_pen,
            alpha: match self.alpha {
                AutoOr::Auto => AlphaMode::Auto {
                    m_lo: self.alpha_range[0],
                    m_hi: self.alpha_range[1],
                },
                AutoOr::Value(v) => AlphaMode::Fixed { value: v },
            },
            z_mode: self.z_mode,
        }
    }

    /// One scenario per cell, ordered by kernel, SNR, n, then target.
    pub fn cells(&self) -> Vec<Scenario> {
        let snrs: Vec<f64> = if self.snr.is_empty() {
            vec![f64::NAN]
        } else {
            self.snr.clone()
        };
        let mut out = Vec::new();
        for k in &self.kernels {
            for &snr in &snrs {
                for &n in &self.n {
                    for t in &self.targets {
                        out.push(Scenario {
                            kernel: KernelKind::parse(k).expect("validated kernel"),
                            target: TargetKind::parse(t).expect("validated target"),
                            n,
                            horizon: self.horizon,
                            snr,
                            reps: self.reps,
                            seed: self.seed,
                            a: match self.a {
                                AutoOr::Auto => ScaleSetting::Auto,
                                AutoOr::Value(a) => ScaleSetting::Fixed(a),
                            },
                            estimator: self.estimator(),
                            snr_variance: self.snr_variance,
                            sigma: self.sigma,
                        });
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_and_lists() {
        let s = ScenarioFile::parse(
            "kernel = \"g2\"\ntargets = [\"f1\", \"f5\"]\nsnr = 5\nn = [100, 200]\nreps = 3\n",
        )
        .unwrap();
        assert_eq!(s.kernels, vec!["g2"]);
        assert_eq!(s.targets, vec!["f1", "f5"]);
        assert_eq!(s.snr, vec![5.0]);
        assert_eq!(s.n, vec![100, 200]);
        assert_eq!(s.cells().len(), 4);
        assert_eq!(s.size, 11);
        assert_eq!(s.a, AutoOr::Auto);
    }

    #[test]
    fn lists_every_problem() {
        let err =
            ScenarioFile::parse("kernel = \"g9\"\ntarget = \"f1\"\nsnr = -1\nreps = 0\nfoo = 1\n")
                .unwrap_err();
        let msg = err.to_string();
        for needle in ["g9", "snr", "reps", "foo"] {
            assert!(msg.contains(needle), "{msg}");
        }
        assert!(msg.contains("4 problems"), "{msg}");
    }

    #[test]
    fn auto_or_round_trips() {
        for v in [AutoOr::Auto, AutoOr::Value(0.25)] {
            let s = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<AutoOr>(&s).unwrap(), v);
            assert_eq!(v.to_string().parse::<AutoOr>().unwrap(), v);
        }
        assert!("fast".parse::<AutoOr>().is_err());
    }

    #[test]
    fn resolved_file_round_trips_through_json() {
        let s = ScenarioFile::parse(
            "kernels = [\"g3\"]\ntargets = \"f2\"\nsnr = [5, 8]\na = 0.3\nalpha = 4\n",
        )
        .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioFile>(&json).unwrap(), s);
    }
}
