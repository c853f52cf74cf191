//! Empirical verification of the geometric and analytic lemmas behind the
//! trace and lifting estimates.
//!
//! Every "bounded by a constant" statement is turned into a number: the
//! worst ratio between both sides over a set or a probe family. The numbers
//! are meaningful through their behaviour under refinement, not in absolute
//! terms.

pub mod catalog;
pub mod checks;
pub mod hardy;

use serde::{Deserialize, Serialize};

use crate::mesh::{MeshFamily, PolytopalMesh, Side};
use crate::space::DegreeConfig;

pub use catalog::{PairSets, PartitionCheck, SetCatalog};
pub use checks::*;
pub use hardy::{check_hardy, hardy_ratio, random_sequences, HardyReport, HARDY_CONSTANT};

/// An empirical constant: the maximum of a ratio over `probes` samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub lemma: String,
    pub value: f64,
    pub probes: usize,
}

impl Constant {
    pub fn new(lemma: impl Into<String>, value: f64, probes: usize) -> Self {
        Constant { lemma: lemma.into(), value, probes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub dim: usize,
    pub n: usize,
    pub family: MeshFamily,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub side: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub degrees: Option<DegreeConfig>,
    pub h: f64,
    pub rho_qu: f64,
}

impl MeshParams {
    pub fn describe(
        mesh: &PolytopalMesh,
        n: usize,
        family: MeshFamily,
        side: Option<Side>,
        degrees: Option<DegreeConfig>,
    ) -> Self {
        let stats = mesh.stats();
        MeshParams { dim: mesh.dim, n, family, side: side.map(|s| s.name()), degrees, h: stats.h, rho_qu: stats.rho_qu }
    }
}

/// One line of lemma-check output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub mesh: MeshParams,
    pub constant: f64,
    pub probes: usize,
}

impl LemmaReport {
    pub fn new(c: &Constant, mesh: MeshParams) -> Self {
        LemmaReport { lemma: c.lemma.clone(), mesh, constant: c.value, probes: c.probes }
    }
}
