//! JSON problem files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::{Point, Real};

use super::{HeadDomain, NeckSpec, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HeadFile {
    UnitDisk,
    Curve { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckFile {
    /// Arc-length position of the window centre; on the unit disk, the angle.
    pub angle_or_s: f64,
    pub epsilon: f64,
    pub length: f64,
}

/// On-disk form of a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub head: HeadFile,
    pub necks: Vec<NeckFile>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Builds the spec. The head is constructed but not validated.
    pub fn to_spec<T: Real>(&self) -> Result<ProblemSpec<T>> {
        let head = match &self.head {
            HeadFile::UnitDisk => HeadDomain::unit_disk(),
            HeadFile::Curve { points } => {
                let pts: Vec<Point<T>> = points
                    .iter()
                    .map(|p| Point::new(T::lit(p[0]), T::lit(p[1])))
                    .collect();
                HeadDomain::from_points(&pts)?
            }
        };
        let necks = self
            .necks
            .iter()
            .map(|n| NeckSpec::new(T::lit(n.angle_or_s), T::lit(n.epsilon), T::lit(n.length)))
            .collect();
        Ok(ProblemSpec::new(head, necks))
    }

    /// Curve heads are written as 1024 arc-length samples.
    pub fn from_spec<T: Real>(spec: &ProblemSpec<T>) -> Self {
        let head = if spec.head.is_unit_disk() {
            HeadFile::UnitDisk
        } else {
            HeadFile::Curve {
                points: spec
                    .head
                    .polyline(1024)
                    .into_iter()
                    .map(|p| [p.x.as_f64(), p.y.as_f64()])
                    .collect(),
            }
        };
        let necks = spec
            .necks
            .iter()
            .map(|n| NeckFile {
                angle_or_s: n.s.as_f64(),
                epsilon: n.epsilon.as_f64(),
                length: n.length.as_f64(),
            })
            .collect();
        Self { head, necks }
    }
}
