//! Entropy bounds on rate sums: `α_W(Q)` and `β(S)` for CMS, the per-subset
//! VKG sum-rate bound, and the classic two-description ZB bounds.

use serde::Serialize;

use super::{AuxModel, Entropies, RegionScalar};
use crate::error::{Error, Result};
use crate::lattice::{self, DescriptionSet, SubsetFamily};
use crate::probability::VarSet;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConstraintKind {
    /// `Σ_{K∈Q} R″_K ≥ α_W(Q)`.
    Shared { width: usize, family: SubsetFamily },
    /// `Σ_{l∈S} R′_l ≥ β(S)`.
    Private { set: DescriptionSet },
    /// `Σ_{l∈S} R_l ≥ vkg_rhs(S)`.
    Sum { set: DescriptionSet },
}

/// One lower-bound constraint together with its evaluated bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RateConstraint<T> {
    pub kind: ConstraintKind,
    pub bound: T,
}

impl<T: Scalar> AuxModel<T> {
    fn check_set(&self, s: DescriptionSet) -> Result<()> {
        if s.l() != self.l {
            return Err(Error::InvalidSet(format!("{s} is not over L={}", self.l)));
        }
        Ok(())
    }

    pub(crate) fn alpha_with(&self, h: &Entropies<'_, T>, w: usize, q: &SubsetFamily) -> Result<T> {
        if w < 2 || w > self.l {
            return Err(Error::Width { w, l: self.l });
        }
        if let Some(bad) = q.iter().find(|s| s.len() != w || s.l() != self.l) {
            return Err(Error::InvalidSet(format!("{bad} does not have width {w}")));
        }
        if q.is_empty() {
            return Ok(T::zero());
        }
        let mut total = T::zero();
        for s in q.iter() {
            let above = lattice::tier_above_containing(self.l, w, s)?;
            let v_s = self.v_set(&[s]);
            total = total + h.hc(v_s, self.v_set(above.sets()));
        }
        let all_above = lattice::tier_above(self.l, w)?;
        let cond = self.v_set(all_above.sets()).union(self.source_set());
        total = total - h.hc(self.v_set(q.sets()), cond);
        Ok(total)
    }

    /// `α_W(Q) = Σ_{S∈Q} H(V_S | {V}_{I_{W+}(S)}) − H({V}_Q | {V}_{I_{W+}}, X)`.
    pub fn alpha(&self, w: usize, q: &SubsetFamily) -> Result<T> {
        self.alpha_with(&self.entropies(), w, q)
    }

    pub(crate) fn beta_with(&self, h: &Entropies<'_, T>, s: DescriptionSet) -> Result<T> {
        self.check_set(s)?;
        if s.is_empty() {
            return Ok(T::zero());
        }
        let mut total = T::zero();
        for k in s.nonempty_subsets() {
            let lower: Vec<DescriptionSet> = k
                .nonempty_subsets()
                .into_iter()
                .filter(|&x| x != k)
                .collect();
            let j = lattice::sharing_sets(self.l, k)?;
            let cond = self.u_set(&lower).union(self.v_set(j.sets()));
            total = total + h.hc(VarSet::single(self.layer_var(k)), cond);
        }
        let cond = self.all_shared().union(self.source_set());
        total = total - h.hc(self.u_set(&s.nonempty_subsets()), cond);
        Ok(total)
    }

    /// `β(S) = Σ_{K⊆S} H(U_K | {U}_{2^K−φ−{K}}, {V}_{J(K)}) − H({U}_{2^S−φ} | {V}_{I_{1+}}, X)`.
    pub fn beta(&self, s: DescriptionSet) -> Result<T> {
        self.beta_with(&self.entropies(), s)
    }

    /// Shared variables other than `V_L` that are not constant.
    pub(crate) fn nonconstant_strict_shared(&self) -> Vec<DescriptionSet> {
        let full = self.full_set();
        self.shared_vars()
            .iter()
            .filter(|(s, &v)| **s != full && !self.is_constant(v))
            .map(|(s, _)| *s)
            .collect()
    }

    pub(crate) fn vkg_rhs_with(&self, h: &Entropies<'_, T>, s: DescriptionSet) -> Result<T> {
        self.check_set(s)?;
        if s.is_empty() {
            return Err(Error::InvalidSet("S must be nonempty".into()));
        }
        let strict = self.nonconstant_strict_shared();
        if !strict.is_empty() {
            return Err(Error::Scheme(format!(
                "VKG bound needs a single shared variable; {} more are non-constant",
                strict.len()
            )));
        }
        let v = self.v_set(&[self.full_set()]);
        let x = self.source_set();
        let n = T::from_usize(s.len()).expect("small count");
        let i_xv = h.h(x) + h.h(v) - h.h(x.union(v));
        let subsets = s.nonempty_subsets();
        let mut total = n * i_xv - h.hc(self.u_set(&subsets), x.union(v));
        let last_cond = if self.vkg_last_term_conditions_on_shared() {
            v
        } else {
            VarSet::EMPTY
        };
        for k in &subsets {
            let lower: Vec<DescriptionSet> = k
                .nonempty_subsets()
                .into_iter()
                .filter(|x| x != k)
                .collect();
            total = total
                + h.hc(
                    VarSet::single(self.layer_var(*k)),
                    self.u_set(&lower).union(last_cond),
                );
        }
        Ok(total)
    }

    /// VKG bound `|S|·I(X;V_L) − H({U}_{2^S−φ} | X, V_L) + Σ_{K⊆S} H(U_K | {U}_{2^K−φ−K}, V_L)`.
    ///
    /// Valid for VKG and EC models, and for CMS/ZB models whose shared
    /// variables other than `V_L` are all constant.
    pub fn vkg_rhs(&self, s: DescriptionSet) -> Result<T> {
        self.vkg_rhs_with(&self.entropies(), s)
    }

    /// Classic ZB bounds for two descriptions:
    /// `[I(X;V U_1), I(X;V U_2), 2I(X;V) + I(U_1;U_2|V) + I(X;U_1 U_2 U_12|V)]`.
    pub fn zb_bounds(&self) -> Result<[T; 3]> {
        if self.l != 2 {
            return Err(Error::Scheme("ZB bounds need L=2".into()));
        }
        let j = self.joint();
        let x = self.source_set();
        let full = self.full_set();
        let v = self.v_set(&[full]);
        let u1 = VarSet::single(self.layer_var(DescriptionSet::singleton(2, 1)?));
        let u2 = VarSet::single(self.layer_var(DescriptionSet::singleton(2, 2)?));
        let u12 = VarSet::single(self.layer_var(full));
        let e = VarSet::EMPTY;
        let r1 = j.mutual_information_of(x, v.union(u1), e);
        let r2 = j.mutual_information_of(x, v.union(u2), e);
        let two = T::lit(2.0);
        let sum = two * j.mutual_information_of(x, v, e)
            + j.mutual_information_of(u1, u2, v)
            + j.mutual_information_of(x, u1.union(u2).union(u12), v);
        Ok([r1, r2, sum])
    }
}

impl<T: RegionScalar> AuxModel<T> {
    /// Full CMS constraint family: `α_W(Q)` for `W ∈ {2..L}` and every
    /// nonempty `Q ⊆ I_W`, then `β(S)` for every nonempty `S`.
    pub fn cms_constraints(&self) -> Result<Vec<RateConstraint<T>>> {
        let h = self.entropies();
        let mut out = Vec::new();
        for w in 2..=self.l {
            let tier = lattice::tier(self.l, w)?;
            for q in tier.subfamilies()? {
                if q.is_empty() {
                    continue;
                }
                let bound = self.alpha_with(&h, w, &q)?;
                out.push(RateConstraint {
                    kind: ConstraintKind::Shared {
                        width: w,
                        family: q,
                    },
                    bound,
                });
            }
        }
        for s in self.full_set().nonempty_subsets() {
            let bound = self.beta_with(&h, s)?;
            out.push(RateConstraint {
                kind: ConstraintKind::Private { set: s },
                bound,
            });
        }
        Ok(out)
    }

    /// VKG constraint family: one sum-rate bound per nonempty `S`.
    pub fn vkg_constraints(&self) -> Result<Vec<RateConstraint<T>>> {
        let h = self.entropies();
        self.full_set()
            .nonempty_subsets()
            .into_iter()
            .map(|s| {
                Ok(RateConstraint {
                    kind: ConstraintKind::Sum { set: s },
                    bound: self.vkg_rhs_with(&h, s)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{JointDistribution, VariableSpec};
    use crate::regions::{Role, RoleKind, Scheme};
    use approx::assert_abs_diff_eq;

    fn set(l: usize, m: &[usize]) -> DescriptionSet {
        DescriptionSet::new(l, m).unwrap()
    }

    /// Builds a joint over (X, extra...) where each extra is a deterministic
    /// function of X or an independent fair bit.
    fn table(names: &[&str], f: impl Fn(usize, &[usize]) -> f64) -> JointDistribution<f64> {
        let vars: Vec<VariableSpec> = names.iter().map(|n| VariableSpec::new(*n, 2)).collect();
        let n = names.len();
        let probs = (0..1usize << n)
            .map(|idx| {
                let digits: Vec<usize> = (0..n).map(|i| (idx >> (n - 1 - i)) & 1).collect();
                f(digits[0], &digits)
            })
            .collect();
        JointDistribution::new(vars, probs).unwrap()
    }

    #[test]
    fn alpha_examples() {
        // L=3, V_12 = X, everything else constant.
        let joint = table(&["X", "V12"], |x, d| if d[1] == x { 0.5 } else { 0.0 });
        let m = AuxModel::new(
            3,
            Scheme::CMS,
            joint,
            "X",
            &[Role::new("V12", RoleKind::Shared, set(3, &[1, 2]))],
        )
        .unwrap();
        let q = SubsetFamily::from_sets(3, [set(3, &[1, 2])]).unwrap();
        assert_abs_diff_eq!(m.alpha(2, &q).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(m.alpha(2, &SubsetFamily::empty(3).unwrap()).unwrap(), 0.0);
        let q13 = SubsetFamily::from_sets(3, [set(3, &[1, 3])]).unwrap();
        assert_abs_diff_eq!(m.alpha(2, &q13).unwrap(), 0.0, epsilon = 1e-15);
        let wrong = SubsetFamily::from_sets(3, [set(3, &[1, 2, 3])]).unwrap();
        assert!(m.alpha(2, &wrong).is_err());
        assert!(m.alpha(1, &SubsetFamily::empty(3).unwrap()).is_err());
    }

    #[test]
    fn all_constant_bounds_vanish() {
        let joint = table(&["X"], |_, _| 0.5);
        let m = AuxModel::new(3, Scheme::CMS, joint, "X", &[]).unwrap();
        for c in m.cms_constraints().unwrap() {
            assert_abs_diff_eq!(c.bound, 0.0, epsilon = 1e-15);
        }
        assert_eq!(m.beta(DescriptionSet::empty(3).unwrap()).unwrap(), 0.0);
        for s in m.full_set().nonempty_subsets() {
            assert_abs_diff_eq!(m.vkg_rhs(s).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn beta_two_copies() {
        let joint = table(&["X", "U1", "U2"], |x, d| {
            if d[1] == x && d[2] == x {
                0.5
            } else {
                0.0
            }
        });
        let m = AuxModel::new(
            2,
            Scheme::CMS,
            joint,
            "X",
            &[
                Role::new("U1", RoleKind::Private, set(2, &[1])),
                Role::new("U2", RoleKind::Private, set(2, &[2])),
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(m.beta(set(2, &[1, 2])).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.beta(set(2, &[1])).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vkg_rhs_examples() {
        // V constant, U1 = X xor bern(0.11).
        let e = 0.11;
        let vars = vec![VariableSpec::new("X", 2), VariableSpec::new("U1", 2)];
        let joint = JointDistribution::new(
            vars,
            vec![0.5 * (1.0 - e), 0.5 * e, 0.5 * e, 0.5 * (1.0 - e)],
        )
        .unwrap();
        let m = AuxModel::new(
            2,
            Scheme::EC,
            joint,
            "X",
            &[Role::new("U1", RoleKind::Private, set(2, &[1]))],
        )
        .unwrap();
        let h = crate::probability::binary_entropy(e);
        assert_abs_diff_eq!(m.vkg_rhs(set(2, &[1])).unwrap(), 1.0 - h, epsilon = 1e-12);

        // V_L = X, all U constant.
        let joint = table(&["X", "V"], |x, d| if d[1] == x { 0.5 } else { 0.0 });
        let m = AuxModel::new(
            2,
            Scheme::VKG,
            joint,
            "X",
            &[Role::new("V", RoleKind::Shared, set(2, &[1, 2]))],
        )
        .unwrap();
        assert_abs_diff_eq!(m.vkg_rhs(set(2, &[1, 2])).unwrap(), 2.0, epsilon = 1e-12);
        assert!(m.vkg_rhs(DescriptionSet::empty(2).unwrap()).is_err());
    }

    #[test]
    fn vkg_rhs_rejects_strict_shared() {
        let joint = table(&["X", "V12"], |x, d| if d[1] == x { 0.5 } else { 0.0 });
        let m = AuxModel::new(
            3,
            Scheme::CMS,
            joint,
            "X",
            &[Role::new("V12", RoleKind::Shared, set(3, &[1, 2]))],
        )
        .unwrap();
        assert!(matches!(m.vkg_rhs(set(3, &[1])), Err(Error::Scheme(_))));
    }

    #[test]
    fn constraint_counts() {
        let joint = table(&["X"], |_, _| 0.5);
        let m3 = AuxModel::new(3, Scheme::CMS, joint.clone(), "X", &[]).unwrap();
        // W=2: 2^3-1, W=3: 1, beta: 7
        assert_eq!(m3.cms_constraints().unwrap().len(), 7 + 1 + 7);
        let m4 = AuxModel::new(4, Scheme::CMS, joint, "X", &[]).unwrap();
        assert_eq!(m4.cms_constraints().unwrap().len(), 63 + 15 + 1 + 15);
        assert_eq!(m4.vkg_constraints().unwrap().len(), 15);
    }
}
