//! Dense joint PMFs over named finite-alphabet variables, with exact
//! marginalization and entropy calculus in bits.
//!
//! Storage is a flat mixed-radix array with the last-listed variable varying
//! fastest. Variable subsets are addressed either by name or, on hot paths,
//! by a [`VarSet`] bitmask over variable positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Most variables a distribution may carry (width of [`VarSet`]).
pub const MAX_VARS: usize = 128;

/// A named variable with its alphabet size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(rename = "alphabet")]
    pub alphabet_size: usize,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, alphabet_size: usize) -> Self {
        Self {
            name: name.into(),
            alphabet_size,
        }
    }
}

/// Set of variable positions within one distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarSet(pub u128);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn single(i: usize) -> Self {
        VarSet(1u128 << i)
    }

    pub fn from_indices(ix: impl IntoIterator<Item = usize>) -> Self {
        VarSet(ix.into_iter().fold(0u128, |m, i| m | (1u128 << i)))
    }

    pub fn with(self, i: usize) -> Self {
        VarSet(self.0 | (1u128 << i))
    }

    pub fn union(self, o: VarSet) -> Self {
        VarSet(self.0 | o.0)
    }

    pub fn minus(self, o: VarSet) -> Self {
        VarSet(self.0 & !o.0)
    }

    pub fn intersects(self, o: VarSet) -> bool {
        self.0 & o.0 != 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1u128 << i) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        })
    }
}

/// On-disk form: `{"variables": [{"name": .., "alphabet": k}], "probs": [..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionFile {
    pub variables: Vec<VariableSpec>,
    pub probs: Vec<f64>,
}

/// A joint PMF over an ordered list of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution<T: Scalar> {
    vars: Vec<VariableSpec>,
    strides: Vec<usize>,
    probs: Vec<T>,
}

fn strides_of(vars: &[VariableSpec]) -> Vec<usize> {
    let mut strides = vec![1usize; vars.len()];
    for i in (0..vars.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * vars[i + 1].alphabet_size;
    }
    strides
}

impl<T: Scalar> JointDistribution<T> {
    /// Validates and wraps a PMF. Distributions whose total mass is off by
    /// more than the scalar's normalization tolerance are rejected.
    pub fn new(vars: Vec<VariableSpec>, probs: Vec<T>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::EmptySet);
        }
        if vars.len() > MAX_VARS {
            return Err(Error::Limit(format!(
                "{} variables exceeds {MAX_VARS}",
                vars.len()
            )));
        }
        for (i, v) in vars.iter().enumerate() {
            if v.alphabet_size == 0 {
                return Err(Error::InvalidModel(format!(
                    "variable `{}` has empty alphabet",
                    v.name
                )));
            }
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
        }
        let size = vars
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.alphabet_size))
            .ok_or_else(|| Error::Limit("table size overflows".into()))?;
        if probs.len() != size {
            return Err(Error::Dimension(format!(
                "probability table has {} entries, variables imply {size}",
                probs.len()
            )));
        }
        for (idx, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < T::zero() {
                return Err(Error::BadProbability {
                    idx,
                    value: p.as_f64(),
                });
            }
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::norm_tol() {
            return Err(Error::NotNormalized(total.as_f64()));
        }
        let strides = strides_of(&vars);
        Ok(Self {
            vars,
            strides,
            probs,
        })
    }

    pub fn from_file(file: &DistributionFile) -> Result<Self> {
        let probs = file.probs.iter().map(|&p| T::lit(p)).collect();
        Self::new(file.variables.clone(), probs)
    }

    pub fn to_file(&self) -> DistributionFile {
        DistributionFile {
            variables: self.vars.clone(),
            probs: self.probs.iter().map(|p| p.as_f64()).collect(),
        }
    }

    pub fn vars(&self) -> &[VariableSpec] {
        &self.vars
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn alphabet(&self, var: usize) -> usize {
        self.vars[var].alphabet_size
    }

    pub fn stride(&self, var: usize) -> usize {
        self.strides[var]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn var_set<S: AsRef<str>>(&self, names: &[S]) -> Result<VarSet> {
        names
            .iter()
            .try_fold(VarSet::EMPTY, |s, n| Ok(s.with(self.index_of(n.as_ref())?)))
    }

    pub fn all_vars(&self) -> VarSet {
        VarSet::from_indices(0..self.vars.len())
    }

    /// Symbol of variable `var` in flat cell `idx`.
    #[inline]
    pub fn digit(&self, idx: usize, var: usize) -> usize {
        (idx / self.strides[var]) % self.vars[var].alphabet_size
    }

    /// Replaces the probability table, revalidating it.
    pub fn with_probs(&self, probs: Vec<T>) -> Result<Self> {
        Self::new(self.vars.clone(), probs)
    }

    /// Same as [`with_probs`](Self::with_probs) without validation; callers
    /// guarantee the table is a PMF of the right size.
    pub(crate) fn with_probs_unchecked(&self, probs: Vec<T>) -> Self {
        debug_assert_eq!(probs.len(), self.probs.len());
        Self {
            vars: self.vars.clone(),
            strides: self.strides.clone(),
            probs,
        }
    }

    /// Appends an alphabet-1 variable. The table is unchanged.
    pub fn with_constant(&self, name: &str) -> Result<Self> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(Error::DuplicateVariable(name.to_string()));
        }
        let mut vars = self.vars.clone();
        vars.push(VariableSpec::new(name, 1));
        Self::new(vars, self.probs.clone())
    }

    pub fn cast<U: Scalar>(&self) -> Result<JointDistribution<U>> {
        JointDistribution::new(
            self.vars.clone(),
            self.probs.iter().map(|p| U::lit(p.as_f64())).collect(),
        )
    }

    /// Flat marginal table over `set`, canonical order, last variable fastest.
    pub fn marginal_table(&self, set: VarSet) -> Vec<T> {
        let kept: Vec<usize> = set
            .indices()
            .filter(|&i| i < self.vars.len() && self.vars[i].alphabet_size > 1)
            .collect();
        let mut out_strides = vec![1usize; kept.len()];
        for j in (0..kept.len().saturating_sub(1)).rev() {
            out_strides[j] = out_strides[j + 1] * self.vars[kept[j + 1]].alphabet_size;
        }
        let out_len = kept
            .first()
            .map(|&k| out_strides[0] * self.vars[k].alphabet_size)
            .unwrap_or(1);
        let mut out = vec![T::zero(); out_len];
        if kept.is_empty() {
            out[0] = self.probs.iter().copied().sum();
            return out;
        }
        // Per-variable output stride (0 when marginalized out).
        let mut step = vec![0usize; self.vars.len()];
        for (j, &k) in kept.iter().enumerate() {
            step[k] = out_strides[j];
        }
        // Variables after the last kept one never move the output cell, so
        // they are summed in contiguous blocks.
        let last = *kept.last().expect("nonempty");
        let block = self.strides[last];
        let mut digits = vec![0usize; last + 1];
        let mut m = 0usize;
        for chunk in self.probs.chunks(block) {
            let s: T = chunk.iter().copied().sum();
            out[m] = out[m] + s;
            for v in (0..=last).rev() {
                digits[v] += 1;
                m += step[v];
                if digits[v] < self.vars[v].alphabet_size {
                    break;
                }
                m -= step[v] * digits[v];
                digits[v] = 0;
            }
        }
        out
    }

    /// Exact marginal over the named variables, keeping their original order.
    pub fn marginalize<S: AsRef<str>>(&self, keep: &[S]) -> Result<JointDistribution<T>> {
        if keep.is_empty() {
            return Err(Error::EmptySet);
        }
        let set = self.var_set(keep)?;
        Ok(self.marginalize_set(set))
    }

    pub fn marginalize_set(&self, set: VarSet) -> JointDistribution<T> {
        let vars: Vec<VariableSpec> = set
            .indices()
            .filter(|&i| i < self.vars.len())
            .map(|i| self.vars[i].clone())
            .collect();
        let probs = self.marginal_table(set);
        let strides = strides_of(&vars);
        JointDistribution {
            vars,
            strides,
            probs,
        }
    }

    /// `H(set)` in bits.
    pub fn entropy_of(&self, set: VarSet) -> T {
        if set.is_empty() {
            return T::zero();
        }
        entropy_bits(&self.marginal_table(set))
    }

    /// `H(a | b) = H(a ∪ b) − H(b)` in bits.
    pub fn cond_entropy_of(&self, a: VarSet, b: VarSet) -> T {
        let h = self.entropy_of(a.union(b)) - self.entropy_of(b);
        if h < T::zero() && h > -T::norm_tol() {
            T::zero()
        } else {
            h
        }
    }

    /// `I(a; b | given)` in bits, clamped to zero when marginally negative.
    pub fn mutual_information_of(&self, a: VarSet, b: VarSet, given: VarSet) -> T {
        let i = self.cond_entropy_of(a, given) - self.cond_entropy_of(a, b.union(given));
        if i < T::zero() && i > -T::norm_tol() {
            T::zero()
        } else {
            i
        }
    }

    pub fn entropy<S: AsRef<str>>(&self, a: &[S]) -> Result<T> {
        if a.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(self.entropy_of(self.var_set(a)?))
    }

    pub fn conditional_entropy<S: AsRef<str>>(&self, a: &[S], b: &[S]) -> Result<T> {
        if a.is_empty() {
            return Err(Error::EmptySet);
        }
        let sa = self.var_set(a)?;
        let sb = self.var_set(b)?;
        if sa.intersects(sb) {
            return Err(Error::Overlap("conditioned and conditioning sets".into()));
        }
        Ok(self.cond_entropy_of(sa, sb))
    }

    pub fn mutual_information<S: AsRef<str>>(
        &self,
        a: &[S],
        b: &[S],
        given: Option<&[S]>,
    ) -> Result<T> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet);
        }
        let sa = self.var_set(a)?;
        let sb = self.var_set(b)?;
        let sg = match given {
            Some(g) => self.var_set(g)?,
            None => VarSet::EMPTY,
        };
        if sa.intersects(sb) || sa.intersects(sg) || sb.intersects(sg) {
            return Err(Error::Overlap("mutual information arguments".into()));
        }
        Ok(self.mutual_information_of(sa, sb, sg))
    }
}

/// `−Σ p log₂ p` over a table, with `0 log 0 = 0`.
pub fn entropy_bits<T: Scalar>(table: &[T]) -> T {
    table
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| -p * p.log2())
        .sum()
}

/// Binary entropy `h₂(p)` in bits.
pub fn binary_entropy<T: Scalar>(p: T) -> T {
    entropy_bits(&[p, T::one() - p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bits(names: &[&str]) -> Vec<VariableSpec> {
        names.iter().map(|n| VariableSpec::new(*n, 2)).collect()
    }

    /// X ~ bern(1/2), U = X xor bern(e).
    fn noisy_copy(e: f64) -> JointDistribution<f64> {
        JointDistribution::new(
            bits(&["X", "U"]),
            vec![0.5 * (1.0 - e), 0.5 * e, 0.5 * e, 0.5 * (1.0 - e)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            JointDistribution::new(bits(&["X"]), vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            JointDistribution::new(bits(&["X"]), vec![1.5, -0.5]),
            Err(Error::BadProbability { .. })
        ));
        assert!(matches!(
            JointDistribution::new(bits(&["X", "X"]), vec![0.25; 4]),
            Err(Error::DuplicateVariable(_))
        ));
        assert!(matches!(
            JointDistribution::new(bits(&["X"]), vec![1.0]),
            Err(Error::Dimension(_))
        ));
        // off by 1e-11 is outside the 1e-12 tolerance
        assert!(JointDistribution::new(bits(&["X"]), vec![0.5, 0.5 + 1e-11]).is_err());
    }

    #[test]
    fn marginalize_examples() {
        let d = noisy_copy(0.25);
        let same = d.marginalize(&["X", "U"]).unwrap();
        assert_eq!(same, d);
        let u = d.marginalize(&["U"]).unwrap();
        assert_abs_diff_eq!(u.probs()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u.probs()[1], 0.5, epsilon = 1e-15);
        let two = JointDistribution::new(bits(&["A", "B"]), vec![0.25; 4]).unwrap();
        assert_eq!(two.marginalize(&["B"]).unwrap().probs(), &[0.5, 0.5]);
        assert!(d.marginalize::<&str>(&[]).is_err());
        assert!(matches!(
            d.marginalize(&["Z"]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn entropy_examples() {
        let fair = JointDistribution::new(bits(&["X"]), vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(fair.entropy(&["X"]).unwrap(), 1.0, epsilon = 1e-15);
        let point = JointDistribution::new(bits(&["X"]), vec![1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(&["X"]).unwrap(), 0.0);
        let b = JointDistribution::new(bits(&["X"]), vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(
            b.entropy(&["X"]).unwrap(),
            0.811_278_124_459_132_9,
            epsilon = 1e-12
        );
    }

    #[test]
    fn conditional_and_mutual() {
        let d = noisy_copy(0.11);
        let h = binary_entropy(0.11);
        assert_abs_diff_eq!(
            d.conditional_entropy(&["X"], &["U"]).unwrap(),
            h,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(h, 0.4999, epsilon = 1e-4);
        assert_abs_diff_eq!(
            d.mutual_information(&["X"], &["U"], None).unwrap(),
            1.0 - h,
            epsilon = 1e-12
        );
        assert!(d.conditional_entropy(&["X"], &["X"]).is_err());
        let i_self = d.cond_entropy_of(VarSet::single(0), VarSet::single(0));
        assert_eq!(i_self, 0.0);
        let x = VarSet::single(0);
        assert_abs_diff_eq!(
            d.mutual_information_of(x, x, VarSet::EMPTY),
            1.0,
            epsilon = 1e-15
        );
        let indep = JointDistribution::new(bits(&["A", "B"]), vec![0.1, 0.3, 0.15, 0.45]).unwrap();
        assert_abs_diff_eq!(
            indep.mutual_information(&["A"], &["B"], None).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            indep.conditional_entropy(&["A"], &["B"]).unwrap(),
            indep.entropy(&["A"]).unwrap(),
            epsilon = 1e-12
        );
        assert!(d.mutual_information(&["X"], &["X"], None).is_err());
    }

    #[test]
    fn constants_do_not_change_entropy() {
        let d = noisy_copy(0.2).with_constant("C").unwrap();
        assert_eq!(d.num_vars(), 3);
        assert_eq!(d.entropy(&["C"]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            d.entropy(&["X", "C"]).unwrap(),
            d.entropy(&["X"]).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn works_in_f32() {
        let d: JointDistribution<f32> = noisy_copy(0.11).cast().unwrap();
        let i = d.mutual_information(&["X"], &["U"], None).unwrap();
        assert!((i - 0.5001).abs() < 1e-3);
    }

    #[test]
    fn json_roundtrip() {
        let d = noisy_copy(0.3);
        let s = serde_json::to_string(&d.to_file()).unwrap();
        assert!(s.contains("\"alphabet\":2"));
        let back: DistributionFile = serde_json::from_str(&s).unwrap();
        assert_eq!(JointDistribution::<f64>::from_file(&back).unwrap(), d);
    }
}
