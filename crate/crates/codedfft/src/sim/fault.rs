//! Announced faults: erasures (a node's output of a stage is lost) and
//! stragglers (a node finishes a stage late).
//!
//! Text form, one record per line, `#` starts a comment:
//!
//! ```text
//! rowfft,2,erasure
//! colfft,0,straggler,3.5
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::NodeId;
use crate::Error;

/// Stage labels shared by the pipelines, the ledger and the fault format.
pub mod stages {
    pub const REARRANGE: &str = "rearrange";
    pub const ROWFFT: &str = "rowfft";
    pub const TRANSPOSE: &str = "transpose";
    pub const TWIDDLE: &str = "twiddle";
    pub const ENCODE2: &str = "encode2";
    pub const COLFFT: &str = "colfft";

    pub const ALL: [&str; 6] = [REARRANGE, ROWFFT, TRANSPOSE, TWIDDLE, ENCODE2, COLFFT];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaultKind {
    Erasure,
    Straggler { delay: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fault {
    pub stage: String,
    pub node: NodeId,
    pub kind: FaultKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaultScenario {
    pub faults: Vec<Fault>,
}

impl FaultScenario {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn erase(mut self, stage: &str, node: usize) -> Self {
        self.faults.push(Fault { stage: stage.into(), node: NodeId(node), kind: FaultKind::Erasure });
        self
    }

    pub fn straggle(mut self, stage: &str, node: usize, delay: f64) -> Self {
        self.faults.push(Fault { stage: stage.into(), node: NodeId(node), kind: FaultKind::Straggler { delay } });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    /// Distinct nodes erased at `stage`, ascending.
    pub fn erased_at(&self, stage: &str) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.faults.iter().filter(|f| f.stage == stage && f.kind == FaultKind::Erasure).map(|f| f.node).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn any_erasure(&self) -> bool {
        self.faults.iter().any(|f| f.kind == FaultKind::Erasure)
    }

    /// Total straggler delay of `node` at `stage`.
    pub fn delay(&self, stage: &str, node: NodeId) -> f64 {
        self.faults
            .iter()
            .filter(|f| f.stage == stage && f.node == node)
            .map(|f| match f.kind {
                FaultKind::Straggler { delay } => delay,
                FaultKind::Erasure => 0.0,
            })
            .sum()
    }

    /// Largest node index mentioned, if any.
    pub fn max_node(&self) -> Option<usize> {
        self.faults.iter().map(|f| f.node.0).max()
    }
}

impl FromStr for FaultScenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self, Error> {
        let mut faults = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::InvalidArgument(format!("fault line {}: {msg}: '{}'", lineno + 1, raw.trim()));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(bad("expected stage,node,kind[,delay]"));
            }
            let stage = fields[0];
            if !stages::ALL.contains(&stage) {
                return Err(bad("unknown stage"));
            }
            let node = fields[1].parse::<usize>().map_err(|_| bad("node must be a non-negative integer"))?;
            let kind = match (fields[2], fields.len()) {
                ("erasure", 3) => FaultKind::Erasure,
                ("straggler", 4) => {
                    let delay = fields[3].parse::<f64>().map_err(|_| bad("delay must be a number"))?;
                    if delay < 0.0 || !delay.is_finite() {
                        return Err(bad("delay must be finite and ≥ 0"));
                    }
                    FaultKind::Straggler { delay }
                }
                ("straggler", _) => return Err(bad("straggler needs exactly one delay field")),
                ("erasure", _) => return Err(bad("erasure takes no delay")),
                _ => return Err(bad("kind must be 'erasure' or 'straggler'")),
            };
            faults.push(Fault { stage: stage.to_string(), node: NodeId(node), kind });
        }
        Ok(Self { faults })
    }
}

impl fmt::Display for FaultScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fault in &self.faults {
            match fault.kind {
                FaultKind::Erasure => writeln!(f, "{},{},erasure", fault.stage, fault.node.0)?,
                FaultKind::Straggler { delay } => writeln!(f, "{},{},straggler,{}", fault.stage, fault.node.0, delay)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_records() {
        let f: FaultScenario = "# header\nrowfft, 2, erasure\n\ncolfft,0,straggler,3.5  # slow\nrowfft,2,erasure\n".parse().unwrap();
        assert_eq!(f.faults.len(), 3);
        assert_eq!(f.erased_at("rowfft"), alloc::vec![NodeId(2)]);
        assert_eq!(f.delay("colfft", NodeId(0)), 3.5);
        assert_eq!(f.delay("colfft", NodeId(1)), 0.0);
        let back: FaultScenario = f.to_string().parse().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn parse_rejects_garbage() {
        for bad in [
            "rowfft,1",
            "nowhere,1,erasure",
            "rowfft,-1,erasure",
            "rowfft,1,crash",
            "rowfft,1,straggler",
            "rowfft,1,straggler,-2",
            "rowfft,1,erasure,3",
        ] {
            assert!(bad.parse::<FaultScenario>().is_err(), "{bad}");
        }
    }
}
