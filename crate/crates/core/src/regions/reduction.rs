//! CMS models whose only non-constant shared variable is `V_L`, viewed as
//! VKG models.

use std::collections::BTreeMap;

use super::{AuxModel, RegionScalar, Scheme};
use crate::error::{Error, Result};
use crate::lattice::DescriptionSet;

/// Comparison of the three forms of the sum-rate bound over one subset.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionRow<T> {
    pub set: DescriptionSet,
    /// `β(S) + |S|·α_L({L})`.
    pub cms_formula: T,
    /// `min Σ_{l∈S} R_l` over the CMS allocation program.
    pub cms_lp: T,
    /// Sum-rate bound of the reduced VKG model.
    pub vkg: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionCheck<T> {
    pub rows: Vec<ReductionRow<T>>,
    /// Largest `|cms_formula − vkg|`.
    pub max_discrepancy: T,
    /// Largest `|cms_lp − cms_formula|`.
    pub max_lp_gap: T,
}

impl<T: RegionScalar> AuxModel<T> {
    /// The VKG model with `V_L` carried over. Fails when a shared variable
    /// for a strict subset carries information.
    pub fn reduce_cms_to_vkg(&self) -> Result<AuxModel<T>> {
        if !self.scheme().uses_allocation() {
            return Err(Error::Scheme(format!(
                "{} model is not a CMS model",
                self.scheme()
            )));
        }
        let strict = self.nonconstant_strict_shared();
        if let Some(s) = strict.first() {
            return Err(Error::Scheme(format!(
                "shared variable for {s} is not constant"
            )));
        }
        let full = self.full_set();
        let v = self.shared_var(full).expect("V_L always materialized");
        let map: BTreeMap<DescriptionSet, usize> = [(full, v)].into_iter().collect();
        Ok(self.relabel(Scheme::VKG, map))
    }

    /// Evaluates both constraint systems on the same table for every `S`.
    pub fn check_reduction(&self) -> Result<ReductionCheck<T>> {
        let vkg = self.reduce_cms_to_vkg()?;
        let full = self.full_set();
        let q = super::family(self.l(), vec![full]);
        let h = self.entropies();
        let alpha = self.alpha_with(&h, self.l(), &q)?;
        let constraints = self.region_constraints()?;
        let mut rows = Vec::new();
        let mut max_discrepancy = T::zero();
        let mut max_lp_gap = T::zero();
        for s in full.nonempty_subsets() {
            let n = T::from_usize(s.len()).expect("small count");
            let cms_formula = self.beta_with(&h, s)? + n * alpha;
            let weights: Vec<T> = (1..=self.l())
                .map(|l| if s.contains(l) { T::one() } else { T::zero() })
                .collect();
            let cms_lp = self
                .min_rates_impl(Some(&constraints), &weights, None, &[], false)?
                .objective;
            let v = vkg.vkg_rhs_with(&h, s)?;
            max_discrepancy = max_discrepancy.max((cms_formula - v).abs());
            max_lp_gap = max_lp_gap.max((cms_lp - cms_formula).abs());
            rows.push(ReductionRow {
                set: s,
                cms_formula,
                cms_lp,
                vkg: v,
            });
        }
        Ok(ReductionCheck {
            rows,
            max_discrepancy,
            max_lp_gap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{JointDistribution, VariableSpec};
    use crate::regions::{Role, RoleKind};

    fn set(l: usize, m: &[usize]) -> DescriptionSet {
        DescriptionSet::new(l, m).unwrap()
    }

    #[test]
    fn degenerate_model_reduces_exactly() {
        let joint =
            JointDistribution::new(vec![VariableSpec::new("X", 2)], vec![0.5, 0.5]).unwrap();
        let m = AuxModel::new(3, Scheme::CMS, joint, "X", &[]).unwrap();
        let c = m.check_reduction().unwrap();
        assert_eq!(c.rows.len(), 7);
        assert!(c.max_discrepancy < 1e-12 && c.max_lp_gap < 1e-12);
        assert_eq!(m.reduce_cms_to_vkg().unwrap().scheme(), Scheme::VKG);
    }

    #[test]
    fn informative_strict_shared_is_rejected() {
        let vars = vec![VariableSpec::new("X", 2), VariableSpec::new("V12", 2)];
        let joint = JointDistribution::new(vars, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let m = AuxModel::new(
            3,
            Scheme::CMS,
            joint,
            "X",
            &[Role::new("V12", RoleKind::Shared, set(3, &[1, 2]))],
        )
        .unwrap();
        assert!(matches!(m.reduce_cms_to_vkg(), Err(Error::Scheme(_))));
    }
}
