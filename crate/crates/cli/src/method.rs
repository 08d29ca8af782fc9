//! Method names in the `family_param_memory` convention: `gauss_4_3`,
//! `prev_3_5`, `fact_5_5`, and the `svrg` baseline.

use std::fmt;
use std::str::FromStr;

use blockbfgs::sketch::{default_l, default_q};
use blockbfgs::{SketchStrategy, Strategy};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Svrg,
    Gauss { q: usize, memory: usize },
    Prev { l: usize, memory: usize },
    Fact { q: usize, memory: usize },
}

/// A method name as typed, before bare family names are resolved against the data dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodName {
    family: Family,
    param: Option<usize>,
    memory: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Svrg,
    Gauss,
    Prev,
    Fact,
}

/// Fallbacks for bare family names (`gauss`, `prev`, `fact`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MethodDefaults {
    pub q: Option<usize>,
    pub l: Option<usize>,
    pub memory: Option<usize>,
}

pub const DEFAULT_MEMORY: usize = 5;

impl FromStr for MethodName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            CliError::Config(format!(
                "unknown method `{s}` (expected svrg, gauss[_q_M], prev[_L_M] or fact[_q_M])"
            ))
        };
        let mut parts = s.trim().split('_');
        let family = match parts.next().map(str::to_ascii_lowercase).as_deref() {
            Some("svrg") => Family::Svrg,
            Some("gauss") => Family::Gauss,
            Some("prev") => Family::Prev,
            Some("fact") => Family::Fact,
            _ => return Err(bad()),
        };
        let rest: Vec<&str> = parts.collect();
        let (param, memory) = match (family, rest.as_slice()) {
            (_, []) => (None, None),
            (Family::Svrg, _) => return Err(bad()),
            (_, [p, m]) => (
                Some(p.parse::<usize>().map_err(|_| bad())?),
                Some(m.parse::<usize>().map_err(|_| bad())?),
            ),
            _ => return Err(bad()),
        };
        if param == Some(0) {
            return Err(bad());
        }
        Ok(MethodName { family, param, memory })
    }
}

impl MethodName {
    pub fn svrg() -> Self {
        MethodName {
            family: Family::Svrg,
            param: None,
            memory: None,
        }
    }

    /// Fills in missing parameters: explicit name > `defaults` > dimension-based defaults.
    pub fn resolve(&self, dim: usize, defaults: &MethodDefaults) -> MethodSpec {
        let memory = self.memory.or(defaults.memory).unwrap_or(DEFAULT_MEMORY);
        match self.family {
            Family::Svrg => MethodSpec::Svrg,
            Family::Gauss => MethodSpec::Gauss {
                q: self.param.or(defaults.q).unwrap_or_else(|| default_q(dim)),
                memory,
            },
            Family::Prev => MethodSpec::Prev {
                l: self.param.or(defaults.l).unwrap_or_else(|| default_l(dim)),
                memory,
            },
            Family::Fact => MethodSpec::Fact {
                q: self.param.or(defaults.q).unwrap_or_else(|| default_q(dim)),
                memory,
            },
        }
    }
}

impl MethodSpec {
    pub fn strategy(&self) -> Strategy {
        match *self {
            MethodSpec::Svrg => Strategy::Identity,
            MethodSpec::Gauss { q, .. } => Strategy::Sketched(SketchStrategy::Gaussian { q }),
            MethodSpec::Prev { l, .. } => Strategy::Sketched(SketchStrategy::PrevDirections { l }),
            MethodSpec::Fact { q, .. } => Strategy::Sketched(SketchStrategy::SelfConditioning { q }),
        }
    }

    pub fn memory(&self) -> usize {
        match *self {
            MethodSpec::Svrg => 0,
            MethodSpec::Gauss { memory, .. } | MethodSpec::Prev { memory, .. } | MethodSpec::Fact { memory, .. } => {
                memory
            }
        }
    }

    /// Label used for CSV file names and the `method` column.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MethodSpec::Svrg => write!(f, "svrg"),
            MethodSpec::Gauss { q, memory } => write!(f, "gauss_{q}_{memory}"),
            MethodSpec::Prev { l, memory } => write!(f, "prev_{l}_{memory}"),
            MethodSpec::Fact { q, memory } => write!(f, "fact_{q}_{memory}"),
        }
    }
}
