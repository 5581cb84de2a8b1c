//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use codedfft::cost::Regime;
use codedfft::DftPlan;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config field `{key}`: {msg}")]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    fn new(key: &str, msg: impl Into<String>) -> Self {
        Self { key: key.into(), msg: msg.into() }
    }
}

/// β for a sweep point: a constant, or `1/K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSpec {
    Value(f64),
    PerK,
}

impl BetaSpec {
    pub fn resolve(self, k: usize) -> f64 {
        match self {
            BetaSpec::Value(b) => b,
            BetaSpec::PerK => 1.0 / k as f64,
        }
    }
}

impl fmt::Display for BetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaSpec::Value(b) => write!(f, "{b}"),
            BetaSpec::PerK => f.write_str("1/K"),
        }
    }
}

/// Grid for `sweep`. Absent axes fall back to the base config's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub k: Option<Vec<usize>>,
    /// P − K.
    pub redundancy: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<BetaSpec>>,
    /// N per K; K without an entry use the base N.
    pub n: BTreeMap<usize, usize>,
    /// Also move data and check against the oracle (slow for big N).
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub faults: Option<PathBuf>,
    pub regime: Regime,
    /// `None` = auto.
    pub segments: Option<usize>,
    pub sweep: SweepSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 16,
            n1: None,
            n2: None,
            k: 2,
            p: 3,
            alpha: 1.0,
            beta: 1.0,
            seed: 0,
            faults: None,
            regime: Regime::MinRounds,
            segments: None,
            sweep: SweepSpec::default(),
        }
    }
}

fn int<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::new(key, format!("expected a non-negative integer, got `{v}`")))
}

fn real(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        _ => Err(ConfigError::new(key, format!("expected a finite real ≥ 0, got `{v}`"))),
    }
}

fn items(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Comma list of integers and inclusive ranges `a..b`.
fn int_list(key: &str, v: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = Vec::new();
    for item in items(v) {
        match item.split_once("..") {
            Some((a, b)) => out.extend(int::<usize>(key, a.trim())?..=int::<usize>(key, b.trim())?),
            None => out.push(int(key, item)?),
        }
    }
    Ok(out)
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parse config text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::new(line, "expected `key = value`"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides, then recheck.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self, ConfigError> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::new(o, "override must be `key=value`"))?;
            self.set(key.trim(), value.trim())?;
        }
        self.check()?;
        Ok(self)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let opt_int = |v: &str| if v.is_empty() { Ok(None) } else { int(key, v).map(Some) };
        match key {
            "N" => self.n = int(key, v)?,
            "N1" => self.n1 = opt_int(v)?,
            "N2" => self.n2 = opt_int(v)?,
            "K" => self.k = int(key, v)?,
            "P" => self.p = int(key, v)?,
            "alpha" => self.alpha = real(key, v)?,
            "beta" => self.beta = real(key, v)?,
            "seed" => self.seed = int(key, v)?,
            "faults" => self.faults = (!v.is_empty()).then(|| PathBuf::from(v)),
            "regime" => {
                self.regime = match v {
                    "min-rounds" => Regime::MinRounds,
                    "min-bandwidth" => Regime::MinBandwidth,
                    _ => return Err(ConfigError::new(key, format!("expected min-rounds or min-bandwidth, got `{v}`"))),
                }
            }
            "segments" => {
                self.segments = match v {
                    "auto" => None,
                    _ => match int(key, v)? {
                        0 => return Err(ConfigError::new(key, "must be ≥ 1 or `auto`")),
                        s => Some(s),
                    },
                }
            }
            "sweep.K" => self.sweep.k = Some(int_list(key, v)?),
            "sweep.redundancy" => self.sweep.redundancy = Some(int_list(key, v)?),
            "sweep.alpha" => self.sweep.alpha = Some(items(v).map(|x| real(key, x)).collect::<Result<_, _>>()?),
            "sweep.beta" => {
                self.sweep.beta = Some(
                    items(v)
                        .map(|x| if x == "1/K" { Ok(BetaSpec::PerK) } else { real(key, x).map(BetaSpec::Value) })
                        .collect::<Result<_, _>>()?,
                )
            }
            "sweep.N" => {
                self.sweep.n = items(v)
                    .map(|x| {
                        let (k, n) = x.split_once(':').ok_or_else(|| ConfigError::new(key, format!("expected K:N pairs, got `{x}`")))?;
                        Ok((int(key, k.trim())?, int(key, n.trim())?))
                    })
                    .collect::<Result<_, _>>()?
            }
            "sweep.verify" => {
                self.sweep.verify = v.parse().map_err(|_| ConfigError::new(key, format!("expected true or false, got `{v}`")))?
            }
            _ => return Err(ConfigError::new(key, "unknown key")),
        }
        Ok(())
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.n1.is_some() != self.n2.is_some() {
            return Err(ConfigError::new(if self.n1.is_some() { "N2" } else { "N1" }, "N1 and N2 go together"));
        }
        if self.k == 0 {
            return Err(ConfigError::new("K", "must be ≥ 1"));
        }
        if self.p <= self.k {
            return Err(ConfigError::new("P", format!("must exceed K = {}", self.k)));
        }
        Ok(())
    }

    /// The plan for the base config: explicit N1×N2, or the square split.
    pub fn plan(&self) -> Result<DftPlan, codedfft::Error> {
        plan_for(self.n, self.n1.zip(self.n2), self.k, self.p)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "N = {}", self.n);
        let _ = writeln!(s, "N1 = {}", opt(self.n1));
        let _ = writeln!(s, "N2 = {}", opt(self.n2));
        let _ = writeln!(s, "K = {}", self.k);
        let _ = writeln!(s, "P = {}", self.p);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "faults = {}", self.faults.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        let regime = match self.regime {
            Regime::MinRounds => "min-rounds",
            Regime::MinBandwidth => "min-bandwidth",
        };
        let _ = writeln!(s, "regime = {regime}");
        let _ = writeln!(s, "segments = {}", self.segments.map_or("auto".to_string(), |v| v.to_string()));
        let sw = &self.sweep;
        if let Some(k) = &sw.k {
            let _ = writeln!(s, "sweep.K = {}", join(k));
        }
        if let Some(r) = &sw.redundancy {
            let _ = writeln!(s, "sweep.redundancy = {}", join(r));
        }
        if let Some(a) = &sw.alpha {
            let _ = writeln!(s, "sweep.alpha = {}", join(a));
        }
        if let Some(b) = &sw.beta {
            let _ = writeln!(s, "sweep.beta = {}", join(b));
        }
        if !sw.n.is_empty() {
            let pairs: Vec<String> = sw.n.iter().map(|(k, n)| format!("{k}:{n}")).collect();
            let _ = writeln!(s, "sweep.N = {}", pairs.join(", "));
        }
        if sw.verify {
            let _ = writeln!(s, "sweep.verify = true");
        }
        s
    }
}

pub(crate) fn plan_for(n: usize, split: Option<(usize, usize)>, k: usize, p: usize) -> Result<DftPlan, codedfft::Error> {
    match split {
        Some((n1, n2)) => DftPlan::new(n, n1, n2, k, p),
        None => DftPlan::square(n, k, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "# demo\nN = 64\nK = 4\nP = 6 # two parity nodes\nbeta = 0.25\nsegments = 4\nsweep.K = 16, 64\nsweep.redundancy = 1..4\nsweep.beta = 1/K, 0.5\nsweep.N = 16:8192\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!((c.n, c.k, c.p, c.beta, c.segments), (64, 4, 6, 0.25, Some(4)));
        assert_eq!(c.sweep.redundancy, Some(vec![1, 2, 3, 4]));
        assert_eq!(c.sweep.beta, Some(vec![BetaSpec::PerK, BetaSpec::Value(0.5)]));
        assert_eq!(ExperimentConfig::parse(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_field() {
        for (text, key) in [
            ("K = x", "K"),
            ("alpha = -1", "alpha"),
            ("regime = fast", "regime"),
            ("bogus = 1", "bogus"),
            ("K = 4\nP = 4", "P"),
            ("N1 = 4", "N2"),
        ] {
            assert_eq!(ExperimentConfig::parse(text).unwrap_err().key, key, "{text}");
        }
    }

    #[test]
    fn overrides_apply_last() {
        let c = ExperimentConfig::default().with_overrides(&["K=4", "P=5", "N = 64"]).unwrap();
        assert_eq!((c.n, c.k, c.p), (64, 4, 5));
        assert!(ExperimentConfig::default().with_overrides(&["K"]).is_err());
    }

    #[test]
    fn empty_sweep_axis_is_kept() {
        let c = ExperimentConfig::parse("sweep.K =").unwrap();
        assert_eq!(c.sweep.k, Some(vec![]));
        assert_eq!(ExperimentConfig::parse(&c.serialize()).unwrap(), c);
    }
}
