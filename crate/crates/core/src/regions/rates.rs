//! Rate allocations, constraint checks and minimum-rate linear programs.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::bounds::{ConstraintKind, RateConstraint};
use super::decoders::{DistortionSpec, DistortionVector};
use super::{AuxModel, RegionScalar};
use crate::error::{Error, Result};
use crate::lattice::{self, DescriptionSet};
use crate::lp::{LinearProgram, Relation};
use crate::scalar::{LpScalar, Scalar};

/// Private rates `R′_l` and shared rates `R″_S`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateAllocation<T> {
    pub l: usize,
    /// `private[l-1] = R′_l`.
    pub private: Vec<T>,
    pub shared: BTreeMap<DescriptionSet, T>,
}

impl<T: Scalar> RateAllocation<T> {
    pub fn zero(l: usize) -> Self {
        Self {
            l,
            private: vec![T::zero(); l],
            shared: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.private.len() != self.l {
            return Err(Error::Dimension(format!(
                "{} private rates for L={}",
                self.private.len(),
                self.l
            )));
        }
        let full = DescriptionSet::full(self.l)?;
        let j = lattice::sharing_sets(self.l, full)?;
        for (s, r) in &self.shared {
            if !j.contains(*s) {
                return Err(Error::InvalidSet(format!(
                    "{s} cannot carry a shared message"
                )));
            }
            if !r.is_finite() || *r < T::zero() {
                return Err(Error::InvalidArgument(format!("shared rate {r} for {s}")));
            }
        }
        if self
            .private
            .iter()
            .any(|r| !r.is_finite() || *r < T::zero())
        {
            return Err(Error::InvalidArgument(
                "private rates must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Adds `delta` to every entry, including every shared slot in `J(L)`.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        let full = DescriptionSet::full(self.l)?;
        let mut out = self.clone();
        for r in &mut out.private {
            *r = *r + delta;
        }
        for s in lattice::sharing_sets(self.l, full)?.iter() {
            let e = out.shared.entry(s).or_insert(T::zero());
            *e = *e + delta;
        }
        Ok(out)
    }
}

impl<T: Scalar> Serialize for RateAllocation<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let private: BTreeMap<String, f64> = self
            .private
            .iter()
            .enumerate()
            .map(|(i, r)| ((i + 1).to_string(), r.as_f64()))
            .collect();
        let shared: BTreeMap<String, f64> = self
            .shared
            .iter()
            .map(|(s, r)| (s.key(), r.as_f64()))
            .collect();
        let mut map = ser.serialize_map(Some(2))?;
        map.serialize_entry("private", &private)?;
        map.serialize_entry("shared", &shared)?;
        map.end()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateVector<T> {
    pub rates: Vec<T>,
}

impl<T: Scalar> RateVector<T> {
    pub fn new(rates: Vec<T>) -> Self {
        Self { rates }
    }

    pub fn sum(&self) -> T {
        self.rates.iter().copied().sum()
    }
}

impl<T: Scalar> Serialize for RateVector<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<f64> = self.rates.iter().map(|r| r.as_f64()).collect();
        v.serialize(ser)
    }
}

/// Extra linear condition on the description rates, `coeffs · R  rel  rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `R_l = R′_l + Σ_{K∈J({l})} R″_K`.
pub fn description_rates<T: Scalar>(alloc: &RateAllocation<T>) -> Result<RateVector<T>> {
    alloc.validate()?;
    let mut rates = alloc.private.clone();
    for (s, &r) in &alloc.shared {
        for l in s.members() {
            rates[l - 1] = rates[l - 1] + r;
        }
    }
    Ok(RateVector { rates })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<T> {
    pub kind: ConstraintKind,
    pub bound: T,
    pub value: T,
    /// `value − bound`; negative for a violation.
    pub slack: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityReport<T> {
    pub feasible: bool,
    pub violations: Vec<Violation<T>>,
    /// Smallest slack over all constraints (0 when there are none).
    pub min_slack: T,
}

/// Result of a minimum weighted-rate program.
#[derive(Clone, Debug, PartialEq)]
pub struct MinRates<T> {
    pub rates: RateVector<T>,
    pub allocation: Option<RateAllocation<T>>,
    pub distortions: Option<DistortionVector<T>>,
    pub objective: T,
}

/// A rate LP with `f64` data, solvable in any [`LpScalar`].
struct RateLp {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl RateLp {
    fn solve_in<S: LpScalar>(
        &self,
        conv: impl Fn(f64) -> S,
        back: impl Fn(&S) -> f64,
    ) -> Result<Vec<f64>> {
        let mut lp = LinearProgram::new(self.objective.iter().map(|&c| conv(c)).collect());
        for (coeffs, rel, rhs) in &self.rows {
            lp.add(coeffs.iter().map(|&c| conv(c)).collect(), *rel, conv(*rhs));
        }
        Ok(lp.solve()?.x.iter().map(back).collect())
    }
}

fn to_big(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite LP data")
}

fn from_big(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

impl<T: RegionScalar> AuxModel<T> {
    /// Shared-message slots `J(L)` in canonical order.
    fn shared_slots(&self) -> Vec<DescriptionSet> {
        lattice::sharing_sets(self.l(), self.full_set())
            .expect("valid L")
            .sets()
            .to_vec()
    }

    fn check_weights(&self, weights: &[T]) -> Result<()> {
        if weights.len() != self.l() {
            return Err(Error::Dimension(format!(
                "{} weights for L={}",
                weights.len(),
                self.l()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidArgument(
                "weights must be finite and >= 0".into(),
            ));
        }
        if weights.iter().all(|w| *w == T::zero()) {
            return Err(Error::InvalidArgument(
                "weights must not all be zero".into(),
            ));
        }
        Ok(())
    }

    /// Constraints of this model's scheme: VKG sum bounds for EC/VKG, the
    /// α/β families for ZB/CMS.
    pub fn region_constraints(&self) -> Result<Vec<RateConstraint<T>>> {
        if self.scheme().uses_allocation() {
            self.cms_constraints()
        } else {
            self.vkg_constraints()
        }
    }

    /// Builds the LP. Variables are `R_1..R_L` for EC/VKG and
    /// `R′_1..R′_L, R″_S (S ∈ J(L))` for ZB/CMS. `extra` rows act on `R`.
    fn rate_lp(
        &self,
        constraints: &[RateConstraint<T>],
        weights: &[f64],
        extra: &[RateRow<T>],
    ) -> Result<RateLp> {
        let l = self.l();
        let f = |x: T| x.as_f64();
        if self.scheme().uses_allocation() {
            let slots = self.shared_slots();
            let n = l + slots.len();
            // R_l as a row over the allocation variables.
            let r_row = |coeffs: &[f64]| {
                let mut row = vec![0.0; n];
                row[..l].copy_from_slice(coeffs);
                for (j, s) in slots.iter().enumerate() {
                    row[l + j] = s.members().iter().map(|&m| coeffs[m - 1]).sum();
                }
                row
            };
            let objective = r_row(weights);
            let mut rows = Vec::with_capacity(constraints.len() + extra.len());
            for c in constraints {
                let mut row = vec![0.0; n];
                match &c.kind {
                    ConstraintKind::Shared { family, .. } => {
                        for s in family.iter() {
                            let j = slots.iter().position(|&t| t == s).expect("slot in J(L)");
                            row[l + j] = 1.0;
                        }
                    }
                    ConstraintKind::Private { set } => {
                        for m in set.members() {
                            row[m - 1] = 1.0;
                        }
                    }
                    ConstraintKind::Sum { .. } => unreachable!("sum bounds only in VKG programs"),
                }
                rows.push((row, Relation::Ge, f(c.bound)));
            }
            for e in extra {
                let coeffs: Vec<f64> = e.coeffs.iter().map(|&c| f(c)).collect();
                rows.push((r_row(&coeffs), e.relation, f(e.rhs)));
            }
            Ok(RateLp { objective, rows })
        } else {
            let mut rows = Vec::with_capacity(constraints.len() + extra.len());
            for c in constraints {
                let ConstraintKind::Sum { set } = &c.kind else {
                    unreachable!("VKG programs only hold sum bounds")
                };
                let mut row = vec![0.0; l];
                for m in set.members() {
                    row[m - 1] = 1.0;
                }
                rows.push((row, Relation::Ge, f(c.bound)));
            }
            for e in extra {
                rows.push((
                    e.coeffs.iter().map(|&c| f(c)).collect(),
                    e.relation,
                    f(e.rhs),
                ));
            }
            Ok(RateLp {
                objective: weights.to_vec(),
                rows,
            })
        }
    }

    fn unpack(&self, x: &[f64], weights: &[T]) -> (RateVector<T>, Option<RateAllocation<T>>, T) {
        let l = self.l();
        let (rates, alloc) = if self.scheme().uses_allocation() {
            let slots = self.shared_slots();
            let alloc = RateAllocation {
                l,
                private: x[..l].iter().map(|&v| T::lit(v)).collect(),
                shared: slots
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| (s, T::lit(x[l + j])))
                    .collect(),
            };
            (
                description_rates(&alloc).expect("LP allocation is valid"),
                Some(alloc),
            )
        } else {
            (
                RateVector {
                    rates: x.iter().map(|&v| T::lit(v)).collect(),
                },
                None,
            )
        };
        let objective = rates.rates.iter().zip(weights).map(|(&r, &w)| r * w).sum();
        (rates, alloc, objective)
    }

    pub(crate) fn min_rates_impl(
        &self,
        constraints: Option<&[RateConstraint<T>]>,
        weights: &[T],
        dspec: Option<&DistortionSpec>,
        extra: &[RateRow<T>],
        exact: bool,
    ) -> Result<MinRates<T>> {
        self.check_weights(weights)?;
        for e in extra {
            if e.coeffs.len() != self.l() {
                return Err(Error::Dimension(
                    "extra rate row must have L coefficients".into(),
                ));
            }
        }
        let w: Vec<f64> = weights.iter().map(|w| w.as_f64()).collect();
        let owned;
        let constraints = match constraints {
            Some(c) => c,
            None => {
                owned = self.region_constraints()?;
                &owned
            }
        };
        let lp = self.rate_lp(constraints, &w, extra)?;
        let x = if exact {
            lp.solve_in(to_big, from_big)?
        } else {
            lp.solve_in(T::lit, |v: &T| v.as_f64())?
        };
        let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
        let (rates, allocation, objective) = self.unpack(&x, weights);
        let distortions = match dspec {
            Some(d) => Some(self.synthesize_decoders(d)?.1),
            None => None,
        };
        Ok(MinRates {
            rates,
            allocation,
            distortions,
            objective,
        })
    }

    /// Minimizes `Σ w_l R_l` over the scheme's rate region for this model.
    pub fn min_rates(&self, weights: &[T], dspec: Option<&DistortionSpec>) -> Result<MinRates<T>> {
        self.min_rates_impl(None, weights, dspec, &[], false)
    }

    /// [`min_rates`](Self::min_rates) with additional linear conditions on `R`.
    pub fn min_rates_with(
        &self,
        weights: &[T],
        dspec: Option<&DistortionSpec>,
        extra: &[RateRow<T>],
    ) -> Result<MinRates<T>> {
        self.min_rates_impl(None, weights, dspec, extra, false)
    }

    /// Same program solved in exact rational arithmetic over the (rounded)
    /// constraint values.
    pub fn min_rates_exact(
        &self,
        weights: &[T],
        dspec: Option<&DistortionSpec>,
        extra: &[RateRow<T>],
    ) -> Result<MinRates<T>> {
        self.min_rates_impl(None, weights, dspec, extra, true)
    }

    /// Closed-form minimum sum rate for two descriptions.
    pub fn sum_rate_l2(&self) -> Result<T> {
        if self.l() != 2 {
            return Err(Error::Scheme("closed-form sum rate needs L=2".into()));
        }
        let h = self.entropies();
        let full = self.full_set();
        let s1 = DescriptionSet::singleton(2, 1)?;
        let s2 = DescriptionSet::singleton(2, 2)?;
        let z = T::zero();
        if self.scheme().uses_allocation() {
            let q = super::family(2, vec![full]);
            let a = self.alpha_with(&h, 2, &q)?.max(z);
            let b1 = self.beta_with(&h, s1)?.max(z);
            let b2 = self.beta_with(&h, s2)?.max(z);
            let b12 = self.beta_with(&h, full)?;
            Ok(T::lit(2.0) * a + (b1 + b2).max(b12))
        } else {
            let v1 = self.vkg_rhs_with(&h, s1)?.max(z);
            let v2 = self.vkg_rhs_with(&h, s2)?.max(z);
            let v12 = self.vkg_rhs_with(&h, full)?;
            Ok((v1 + v2).max(v12))
        }
    }

    /// Checks an allocation against every α and β constraint.
    pub fn allocation_feasible(&self, alloc: &RateAllocation<T>) -> Result<FeasibilityReport<T>> {
        if !self.scheme().uses_allocation() {
            return Err(Error::Scheme(format!(
                "{} models have no rate allocation",
                self.scheme()
            )));
        }
        if alloc.l != self.l() {
            return Err(Error::Dimension(format!(
                "allocation for L={} on L={} model",
                alloc.l,
                self.l()
            )));
        }
        alloc.validate()?;
        let tol = T::boundary_tol();
        let mut violations = Vec::new();
        let mut min_slack: Option<T> = None;
        for c in self.cms_constraints()? {
            let value = match &c.kind {
                ConstraintKind::Shared { family, .. } => family
                    .iter()
                    .map(|s| alloc.shared.get(&s).copied().unwrap_or(T::zero()))
                    .sum(),
                ConstraintKind::Private { set } => {
                    set.members().iter().map(|&m| alloc.private[m - 1]).sum()
                }
                ConstraintKind::Sum { .. } => unreachable!(),
            };
            let slack = value - c.bound;
            min_slack = Some(min_slack.map_or(slack, |m: T| m.min(slack)));
            if slack < -tol {
                violations.push(Violation {
                    kind: c.kind,
                    bound: c.bound,
                    value,
                    slack,
                });
            }
        }
        Ok(FeasibilityReport {
            feasible: violations.is_empty(),
            violations,
            min_slack: min_slack.unwrap_or(T::zero()),
        })
    }

    /// Whether `(rates, distortions)` lies in the closure of the region
    /// this model certifies, with tolerance on the boundary.
    pub fn membership(
        &self,
        rates: &[T],
        distortions: &DistortionVector<T>,
        dspec: &DistortionSpec,
    ) -> Result<bool> {
        if rates.len() != self.l() {
            return Err(Error::Dimension(format!(
                "{} rates for L={}",
                rates.len(),
                self.l()
            )));
        }
        let tol = T::boundary_tol();
        let (_, achieved) = self.synthesize_decoders(dspec)?;
        for k in dspec.subsets() {
            let target = distortions.get(k).ok_or_else(|| {
                Error::Dimension(format!("no target distortion for constrained subset {k}"))
            })?;
            if achieved.get(k).expect("decoder per constrained subset") > target + tol {
                return Ok(false);
            }
        }
        if rates.iter().any(|r| *r < -tol) {
            return Ok(false);
        }
        if !self.scheme().uses_allocation() {
            for c in self.vkg_constraints()? {
                let ConstraintKind::Sum { set } = c.kind else {
                    unreachable!()
                };
                let total: T = set.members().iter().map(|&m| rates[m - 1]).sum();
                if total < c.bound - tol {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        let caps: Vec<RateRow<T>> = (0..self.l())
            .map(|i| {
                let mut coeffs = vec![T::zero(); self.l()];
                coeffs[i] = T::one();
                RateRow {
                    coeffs,
                    relation: Relation::Le,
                    rhs: rates[i] + tol,
                }
            })
            .collect();
        let ones = vec![T::one(); self.l()];
        match self.min_rates_with(&ones, None, &caps) {
            Ok(_) => Ok(true),
            Err(Error::Infeasible(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}
