//! Searches over auxiliary PMFs: two-description cross-sections with
//! `D_12 = 0`, and the separation experiments built on them.

mod cross;
mod l2;
mod local;
mod multi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cross::{
    cross_section, cross_section_ec, cross_section_zb, separation_zb, CrossScheme, CrossSection,
    ScanRow, SeparationReport,
};
pub use l2::{eval_theta, EcGrid, L2Eval, L2Point};
pub use local::{local_search, local_search_model, project_simplex, PmfSpace};
pub use multi::{build_l4_cms, separation_l3, separation_l4, L3Report, L4Report};

/// Alphabet sizes of the searched auxiliaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxAlphabets {
    /// `V_12`.
    pub shared: usize,
    /// `U_1` and `U_2`.
    pub private: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Sweeps per local search.
    pub max_iters: usize,
    pub step_init: f64,
    pub step_shrink: f64,
    /// Smallest step before a local search stops.
    pub tol: f64,
    pub alphabets: AuxAlphabets,
    /// Resolution of the exhaustive EC grid; 0 disables it.
    pub ec_grid: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            restarts: 256,
            max_iters: 2000,
            step_init: 0.1,
            step_shrink: 0.5,
            tol: 1e-8,
            alphabets: AuxAlphabets {
                shared: 3,
                private: 2,
            },
            ec_grid: 32,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return bad("tol must be positive");
        }
        if !(self.step_init > 0.0) || !self.step_init.is_finite() {
            return bad("step_init must be positive");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if self.alphabets.shared == 0 || self.alphabets.private == 0 {
            return bad("alphabet sizes must be at least 1");
        }
        if self.ec_grid > 64 {
            return bad("ec_grid above 64 is not supported");
        }
        Ok(())
    }
}
