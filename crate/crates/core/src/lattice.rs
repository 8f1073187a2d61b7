//! Description subsets of `{1..L}` and the families of them that index the
//! shared and refinement layers.
//!
//! Sets are bitmasks (bit `i-1` set when description `i` is a member), so
//! `L` is capped at [`MAX_L`]. Families are always kept in canonical order:
//! by cardinality, then lexicographically on the sorted member list.

use std::cmp::Ordering;
use std::fmt;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported description count.
pub const MAX_L: usize = 8;

fn check_l(l: usize) -> Result<()> {
    if (1..=MAX_L).contains(&l) {
        Ok(())
    } else {
        Err(Error::DescriptionCount(l, MAX_L))
    }
}

/// A subset of the descriptions `{1..L}`. The empty set is representable.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DescriptionSet {
    mask: u16,
    l: u8,
}

impl DescriptionSet {
    pub fn new(l: usize, members: &[usize]) -> Result<Self> {
        check_l(l)?;
        let mut mask = 0u16;
        for &m in members {
            if m == 0 || m > l {
                return Err(Error::InvalidSet(format!("member {m} outside 1..={l}")));
            }
            mask |= 1 << (m - 1);
        }
        Ok(Self { mask, l: l as u8 })
    }

    pub fn from_mask(l: usize, mask: u16) -> Result<Self> {
        check_l(l)?;
        if (mask as u32) >> l != 0 {
            return Err(Error::InvalidSet(format!(
                "mask {mask:#b} has members outside 1..={l}"
            )));
        }
        Ok(Self { mask, l: l as u8 })
    }

    pub fn empty(l: usize) -> Result<Self> {
        Self::from_mask(l, 0)
    }

    pub fn full(l: usize) -> Result<Self> {
        check_l(l)?;
        Ok(Self {
            mask: ((1u32 << l) - 1) as u16,
            l: l as u8,
        })
    }

    pub fn singleton(l: usize, member: usize) -> Result<Self> {
        Self::new(l, &[member])
    }

    #[inline]
    pub fn mask(self) -> u16 {
        self.mask
    }

    #[inline]
    pub fn l(self) -> usize {
        self.l as usize
    }

    #[inline]
    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    #[inline]
    pub fn contains(self, member: usize) -> bool {
        member >= 1 && member <= self.l() && self.mask & (1 << (member - 1)) != 0
    }

    #[inline]
    pub fn is_subset_of(self, other: Self) -> bool {
        self.mask & !other.mask == 0
    }

    #[inline]
    pub fn intersects(self, other: Self) -> bool {
        self.mask & other.mask != 0
    }

    pub fn union(self, other: Self) -> Self {
        Self {
            mask: self.mask | other.mask,
            l: self.l,
        }
    }

    pub fn intersection(self, other: Self) -> Self {
        Self {
            mask: self.mask & other.mask,
            l: self.l,
        }
    }

    /// Sorted member list.
    pub fn members(self) -> Vec<usize> {
        (1..=self.l()).filter(|&i| self.contains(i)).collect()
    }

    /// Every subset of `self`, the empty set included, in canonical order.
    pub fn subsets(self) -> Vec<DescriptionSet> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub = 0u16;
        loop {
            out.push(Self {
                mask: sub,
                l: self.l,
            });
            if sub == self.mask {
                break;
            }
            sub = sub.wrapping_sub(self.mask) & self.mask;
        }
        out.sort();
        out
    }

    /// Every nonempty subset of `self` in canonical order.
    pub fn nonempty_subsets(self) -> Vec<DescriptionSet> {
        let mut v = self.subsets();
        v.retain(|s| !s.is_empty());
        v
    }

    /// Compact label used in variable names, e.g. `"13"` for `{1,3}`.
    /// Members above 9 are comma separated.
    pub fn label(self) -> String {
        let m = self.members();
        if m.iter().all(|&x| x < 10) {
            m.iter().map(|x| x.to_string()).collect()
        } else {
            m.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    /// JSON-array rendering used as an object key, e.g. `"[1,3]"`.
    pub fn key(self) -> String {
        let m: Vec<String> = self.members().iter().map(|x| x.to_string()).collect();
        format!("[{}]", m.join(","))
    }

    /// Parses the `"[1,3]"` key form.
    pub fn parse_key(l: usize, key: &str) -> Result<Self> {
        let members: Vec<usize> = serde_json::from_str(key)
            .map_err(|e| Error::Parse(format!("subset key `{key}`: {e}")))?;
        Self::new(l, &members)
    }
}

impl Ord for DescriptionSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.l
            .cmp(&other.l)
            .then(self.len().cmp(&other.len()))
            .then_with(|| self.members().cmp(&other.members()))
    }
}

impl PartialOrd for DescriptionSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for DescriptionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for DescriptionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for DescriptionSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let members = self.members();
        let mut seq = serializer.serialize_seq(Some(members.len()))?;
        for m in members {
            seq.serialize_element(&m)?;
        }
        seq.end()
    }
}

/// A duplicate-free family of description sets over a common `L`, in
/// canonical order.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct SubsetFamily {
    #[serde(skip)]
    l: usize,
    sets: Vec<DescriptionSet>,
}

impl SubsetFamily {
    pub fn empty(l: usize) -> Result<Self> {
        check_l(l)?;
        Ok(Self {
            l,
            sets: Vec::new(),
        })
    }

    pub fn from_sets(l: usize, sets: impl IntoIterator<Item = DescriptionSet>) -> Result<Self> {
        check_l(l)?;
        let mut sets: Vec<DescriptionSet> = sets.into_iter().collect();
        if let Some(bad) = sets.iter().find(|s| s.l() != l) {
            return Err(Error::InvalidSet(format!(
                "{bad} has L={} not {l}",
                bad.l()
            )));
        }
        sets.sort();
        sets.dedup();
        Ok(Self { l, sets })
    }

    fn filtered(l: usize, keep: impl Fn(DescriptionSet) -> bool) -> Result<Self> {
        check_l(l)?;
        let mut sets: Vec<DescriptionSet> = (1u16..(1u32 << l) as u16)
            .map(|mask| DescriptionSet { mask, l: l as u8 })
            .filter(|s| keep(*s))
            .collect();
        sets.sort();
        Ok(Self { l, sets })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[DescriptionSet] {
        &self.sets
    }

    pub fn iter(&self) -> impl Iterator<Item = DescriptionSet> + '_ {
        self.sets.iter().copied()
    }

    pub fn contains(&self, s: DescriptionSet) -> bool {
        self.sets.binary_search(&s).is_ok()
    }

    pub fn is_subfamily_of(&self, other: &SubsetFamily) -> bool {
        self.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &SubsetFamily) -> Result<SubsetFamily> {
        Self::from_sets(self.l, self.iter().chain(other.iter()))
    }

    /// All subfamilies, the empty one first. Only sensible for small families.
    pub fn subfamilies(&self) -> Result<Vec<SubsetFamily>> {
        if self.sets.len() > 20 {
            return Err(Error::Limit(format!(
                "family of {} sets has too many subfamilies to enumerate",
                self.sets.len()
            )));
        }
        Ok((0u32..1 << self.sets.len())
            .map(|bits| SubsetFamily {
                l: self.l,
                sets: self
                    .sets
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits & (1 << i) != 0)
                    .map(|(_, s)| *s)
                    .collect(),
            })
            .collect())
    }
}

impl<'a> IntoIterator for &'a SubsetFamily {
    type Item = &'a DescriptionSet;
    type IntoIter = std::slice::Iter<'a, DescriptionSet>;

    fn into_iter(self) -> Self::IntoIter {
        self.sets.iter()
    }
}

/// All `2^L - 1` nonempty subsets of `{1..L}`.
pub fn nonempty_subsets(l: usize) -> Result<SubsetFamily> {
    SubsetFamily::filtered(l, |_| true)
}

fn check_w(l: usize, w: usize) -> Result<()> {
    check_l(l)?;
    if w == 0 || w > l {
        return Err(Error::Width { w, l });
    }
    Ok(())
}

/// `I_W`: subsets of cardinality exactly `w`.
pub fn tier(l: usize, w: usize) -> Result<SubsetFamily> {
    check_w(l, w)?;
    SubsetFamily::filtered(l, |s| s.len() == w)
}

/// `I_{W+}`: subsets of cardinality strictly greater than `w`.
pub fn tier_above(l: usize, w: usize) -> Result<SubsetFamily> {
    check_w(l, w)?;
    SubsetFamily::filtered(l, |s| s.len() > w)
}

fn check_b(l: usize, w: usize, b: DescriptionSet) -> Result<()> {
    check_w(l, w)?;
    if b.l() != l {
        return Err(Error::InvalidSet(format!("{b} has L={} not {l}", b.l())));
    }
    if b.is_empty() {
        return Err(Error::InvalidSet("B must be nonempty".into()));
    }
    if b.len() > w {
        return Err(Error::InvalidSet(format!("|B|={} exceeds W={w}", b.len())));
    }
    Ok(())
}

/// `I_W(B)`: members of `I_W` containing `b`.
pub fn tier_containing(l: usize, w: usize, b: DescriptionSet) -> Result<SubsetFamily> {
    check_b(l, w, b)?;
    SubsetFamily::filtered(l, |s| s.len() == w && b.is_subset_of(s))
}

/// `I_{W+}(B)`: members of `I_{W+}` containing `b`.
pub fn tier_above_containing(l: usize, w: usize, b: DescriptionSet) -> Result<SubsetFamily> {
    check_b(l, w, b)?;
    SubsetFamily::filtered(l, |s| s.len() > w && b.is_subset_of(s))
}

/// `J(K)`: subsets of size at least two that meet `k`. These index the shared
/// codewords visible to a decoder holding the descriptions in `k`.
pub fn sharing_sets(l: usize, k: DescriptionSet) -> Result<SubsetFamily> {
    check_l(l)?;
    if k.l() != l {
        return Err(Error::InvalidSet(format!("{k} has L={} not {l}", k.l())));
    }
    if k.is_empty() {
        return Err(Error::InvalidSet("K must be nonempty".into()));
    }
    SubsetFamily::filtered(l, |s| s.len() > 1 && s.intersects(k))
}
