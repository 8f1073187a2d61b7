//! Auxiliary-variable models and the VKG / CMS achievable-region evaluators.
//!
//! An [`AuxModel`] binds the variables of a joint PMF to their roles: the
//! source `X`, shared variables `V_S` (one per multi-description subset for
//! CMS, the single `V_L` for VKG), and layer variables `U_K` for every
//! nonempty `K` (base layer when `|K| = 1`, refinement otherwise). Roles the
//! caller leaves out are materialized as alphabet-1 constants so every
//! formula is total.

mod bounds;
mod decoders;
mod rates;
mod reduction;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, DescriptionSet, SubsetFamily};
use crate::probability::{JointDistribution, VarSet};
use crate::scalar::{LpScalar, Scalar};

pub use bounds::{ConstraintKind, RateConstraint};
pub use decoders::{Decoder, DecoderTable, DistortionMeasure, DistortionSpec, DistortionVector};
pub use rates::{
    description_rates, FeasibilityReport, MinRates, RateAllocation, RateRow, RateVector, Violation,
};
pub use reduction::{ReductionCheck, ReductionRow};

/// Largest `L` for which region constraints are enumerated.
pub const MAX_MODEL_L: usize = 5;

/// Scalar usable by every evaluator: entropy calculus plus the simplex.
pub trait RegionScalar: Scalar + LpScalar {}
impl<T: Scalar + LpScalar> RegionScalar for T {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// El Gamal–Cover: two descriptions, no shared variable.
    EC,
    /// Zhang–Berger: two descriptions, one shared variable `V_12`.
    ZB,
    /// Venkataramani–Kramer–Goyal: a single shared variable `V_L`.
    VKG,
    /// Combinatorial message sharing: a shared variable per subset in `J(L)`.
    CMS,
}

impl Scheme {
    /// Whether rates are computed through the shared/private allocation LP.
    pub fn uses_allocation(self) -> bool {
        matches!(self, Scheme::ZB | Scheme::CMS)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleKind {
    Shared,
    Private,
    Refinement,
}

/// Binding of a named variable to a description subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Role {
    pub name: String,
    pub kind: RoleKind,
    pub subset: DescriptionSet,
}

impl Role {
    pub fn new(name: impl Into<String>, kind: RoleKind, subset: DescriptionSet) -> Self {
        Self {
            name: name.into(),
            kind,
            subset,
        }
    }
}

/// A scheme-tagged auxiliary model over a joint PMF.
#[derive(Clone, Debug)]
pub struct AuxModel<T: Scalar> {
    l: usize,
    scheme: Scheme,
    joint: JointDistribution<T>,
    source: usize,
    shared: BTreeMap<DescriptionSet, usize>,
    layers: BTreeMap<DescriptionSet, usize>,
    vkg_last_term_conditions_on_shared: bool,
}

impl<T: Scalar> AuxModel<T> {
    /// Builds and validates a model. `roles` lists the declared shared,
    /// private and refinement variables; missing ones become constants.
    pub fn new(
        l: usize,
        scheme: Scheme,
        joint: JointDistribution<T>,
        source: &str,
        roles: &[Role],
    ) -> Result<Self> {
        if !(2..=MAX_MODEL_L).contains(&l) {
            return Err(Error::DescriptionCount(l, MAX_MODEL_L));
        }
        let source_ix = joint.index_of(source)?;
        let full = DescriptionSet::full(l)?;
        let mut used = vec![false; joint.num_vars()];
        used[source_ix] = true;
        let mut shared = BTreeMap::new();
        let mut layers = BTreeMap::new();
        for role in roles {
            let ix = joint.index_of(&role.name)?;
            if used[ix] {
                return Err(Error::InvalidModel(format!(
                    "variable `{}` bound to more than one role",
                    role.name
                )));
            }
            used[ix] = true;
            let s = role.subset;
            if s.l() != l {
                return Err(Error::InvalidModel(format!(
                    "role `{}` subset {s} is not over L={l}",
                    role.name
                )));
            }
            let ok_size = match role.kind {
                RoleKind::Shared | RoleKind::Refinement => s.len() >= 2,
                RoleKind::Private => s.len() == 1,
            };
            if !ok_size {
                return Err(Error::InvalidModel(format!(
                    "role `{}` of kind {:?} cannot index subset {s}",
                    role.name, role.kind
                )));
            }
            let target = if role.kind == RoleKind::Shared {
                &mut shared
            } else {
                &mut layers
            };
            if target.insert(s, ix).is_some() {
                return Err(Error::InvalidModel(format!(
                    "two {:?} roles for subset {s}",
                    role.kind
                )));
            }
        }
        match scheme {
            Scheme::VKG => {
                if shared.len() != 1 || !shared.contains_key(&full) {
                    return Err(Error::InvalidModel(
                        "VKG model must declare exactly one shared variable, for the full set"
                            .into(),
                    ));
                }
            }
            Scheme::EC => {
                if l != 2 || !shared.is_empty() {
                    return Err(Error::InvalidModel(
                        "EC model must have L=2 and no shared variable".into(),
                    ));
                }
            }
            Scheme::ZB => {
                if l != 2 || shared.len() != 1 || !shared.contains_key(&full) {
                    return Err(Error::InvalidModel(
                        "ZB model must have L=2 and exactly the shared variable V_12".into(),
                    ));
                }
            }
            Scheme::CMS => {}
        }

        let mut joint = joint;
        let shared_index: Vec<DescriptionSet> = match scheme {
            Scheme::CMS => lattice::sharing_sets(l, full)?.sets().to_vec(),
            _ => vec![full],
        };
        for s in shared_index {
            if !shared.contains_key(&s) {
                let name = format!("V_{}", s.label());
                joint = joint.with_constant(&name).map_err(|_| {
                    Error::InvalidModel(format!(
                        "cannot materialize constant `{name}`: name already used"
                    ))
                })?;
                shared.insert(s, joint.num_vars() - 1);
            }
        }
        for k in full.nonempty_subsets() {
            if !layers.contains_key(&k) {
                let name = format!("U_{}", k.label());
                joint = joint.with_constant(&name).map_err(|_| {
                    Error::InvalidModel(format!(
                        "cannot materialize constant `{name}`: name already used"
                    ))
                })?;
                layers.insert(k, joint.num_vars() - 1);
            }
        }
        Ok(Self {
            l,
            scheme,
            joint,
            source: source_ix,
            shared,
            layers,
            vkg_last_term_conditions_on_shared: true,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn joint(&self) -> &JointDistribution<T> {
        &self.joint
    }

    pub fn full_set(&self) -> DescriptionSet {
        DescriptionSet::full(self.l).expect("model L validated")
    }

    pub fn source_var(&self) -> usize {
        self.source
    }

    pub fn source_name(&self) -> &str {
        &self.joint.vars()[self.source].name
    }

    pub fn source_set(&self) -> VarSet {
        VarSet::single(self.source)
    }

    pub fn vkg_last_term_conditions_on_shared(&self) -> bool {
        self.vkg_last_term_conditions_on_shared
    }

    /// Selects whether the final sum of the VKG sum-rate bound conditions on
    /// `V_L` (default) or follows the unconditioned form.
    pub fn set_vkg_last_term_conditions_on_shared(&mut self, on: bool) {
        self.vkg_last_term_conditions_on_shared = on;
    }

    /// Variable position of `V_S`, or `None` when the scheme has no such
    /// shared variable (it then behaves as a constant).
    pub fn shared_var(&self, s: DescriptionSet) -> Option<usize> {
        self.shared.get(&s).copied()
    }

    /// Variable position of `U_K` for nonempty `K`.
    pub fn layer_var(&self, k: DescriptionSet) -> usize {
        self.layers[&k]
    }

    pub fn shared_vars(&self) -> &BTreeMap<DescriptionSet, usize> {
        &self.shared
    }

    pub fn layer_vars(&self) -> &BTreeMap<DescriptionSet, usize> {
        &self.layers
    }

    /// `{V}_family` as a variable set; absent members are constants.
    pub fn v_set<'a>(&self, family: impl IntoIterator<Item = &'a DescriptionSet>) -> VarSet {
        family
            .into_iter()
            .filter_map(|s| self.shared_var(*s))
            .fold(VarSet::EMPTY, |acc, i| acc.with(i))
    }

    /// `{U}_sets` as a variable set.
    pub fn u_set<'a>(&self, sets: impl IntoIterator<Item = &'a DescriptionSet>) -> VarSet {
        sets.into_iter()
            .fold(VarSet::EMPTY, |acc, k| acc.with(self.layer_var(*k)))
    }

    /// All shared variables of the model.
    pub fn all_shared(&self) -> VarSet {
        self.shared
            .values()
            .fold(VarSet::EMPTY, |acc, &i| acc.with(i))
    }

    /// Whether variable `var` carries no information (alphabet 1 or point mass).
    pub fn is_constant(&self, var: usize) -> bool {
        self.joint.alphabet(var) == 1 || self.joint.entropy_of(VarSet::single(var)) <= T::norm_tol()
    }

    /// Declared-equivalent role list, including materialized constants.
    pub fn roles(&self) -> Vec<Role> {
        let name = |i: usize| self.joint.vars()[i].name.clone();
        let mut out: Vec<Role> = self
            .shared
            .iter()
            .map(|(s, &i)| Role::new(name(i), RoleKind::Shared, *s))
            .collect();
        for (k, &i) in &self.layers {
            let kind = if k.len() == 1 {
                RoleKind::Private
            } else {
                RoleKind::Refinement
            };
            out.push(Role::new(name(i), kind, *k));
        }
        out
    }

    /// Same roles over a new probability table for the same variables.
    pub fn with_probs(&self, probs: Vec<T>) -> Result<Self> {
        let joint = self.joint.with_probs(probs)?;
        Ok(Self {
            joint,
            ..self.clone()
        })
    }

    pub(crate) fn with_probs_unchecked(&self, probs: Vec<T>) -> Self {
        Self {
            joint: self.joint.with_probs_unchecked(probs),
            ..self.clone()
        }
    }

    /// Relabels the scheme without touching the joint. Used to view one
    /// table under another scheme's constraint system.
    pub fn relabel(&self, scheme: Scheme, shared_map: BTreeMap<DescriptionSet, usize>) -> Self {
        Self {
            scheme,
            shared: shared_map,
            ..self.clone()
        }
    }

    /// Decoder conditioning variables for subset `k`: `{V}_{J(K)} ∪ {U}_{2^K−φ}`.
    /// For VKG-style models `J(K)` only ever meets `V_L`.
    pub fn decoder_inputs(&self, k: DescriptionSet) -> Result<VarSet> {
        let j = lattice::sharing_sets(self.l, k)?;
        Ok(self
            .v_set(j.sets())
            .union(self.u_set(&k.nonempty_subsets())))
    }

    pub(crate) fn entropies(&self) -> Entropies<'_, T> {
        Entropies::new(&self.joint)
    }
}

/// Memoized entropies over one joint distribution.
pub(crate) struct Entropies<'a, T: Scalar> {
    joint: &'a JointDistribution<T>,
    cache: RefCell<HashMap<VarSet, T>>,
}

impl<'a, T: Scalar> Entropies<'a, T> {
    pub(crate) fn new(joint: &'a JointDistribution<T>) -> Self {
        Self {
            joint,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub(crate) fn h(&self, set: VarSet) -> T {
        let set = VarSet::from_indices(set.indices().filter(|&i| self.joint.alphabet(i) > 1));
        if set.is_empty() {
            return T::zero();
        }
        if let Some(&v) = self.cache.borrow().get(&set) {
            return v;
        }
        let v = self.joint.entropy_of(set);
        self.cache.borrow_mut().insert(set, v);
        v
    }

    /// `H(a | b)`.
    pub(crate) fn hc(&self, a: VarSet, b: VarSet) -> T {
        self.h(a.union(b)) - self.h(b)
    }
}

/// Canonical family helper used across the evaluators.
pub(crate) fn family(l: usize, sets: Vec<DescriptionSet>) -> SubsetFamily {
    SubsetFamily::from_sets(l, sets).expect("sets share L")
}
