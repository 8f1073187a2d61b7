//! Distortion measures and MAP decoder synthesis.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::AuxModel;
use crate::error::{Error, Result};
use crate::lattice::DescriptionSet;
use crate::scalar::Scalar;

/// Distortion matrix `d[x][x̂]` over a reconstruction alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionMeasure {
    pub alphabet: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl DistortionMeasure {
    /// Hamming distortion with equal source and reconstruction alphabets.
    pub fn hamming(k: usize) -> Self {
        let matrix = (0..k)
            .map(|x| (0..k).map(|y| if x == y { 0.0 } else { 1.0 }).collect())
            .collect();
        Self {
            alphabet: k,
            matrix,
        }
    }

    pub fn validate(&self, source_alphabet: usize) -> Result<()> {
        if self.alphabet == 0 {
            return Err(Error::Dimension(
                "reconstruction alphabet must be nonempty".into(),
            ));
        }
        if self.matrix.len() != source_alphabet {
            return Err(Error::Dimension(format!(
                "distortion matrix has {} rows, source alphabet is {source_alphabet}",
                self.matrix.len()
            )));
        }
        for row in &self.matrix {
            if row.len() != self.alphabet {
                return Err(Error::Dimension(format!(
                    "distortion row has {} entries, reconstruction alphabet is {}",
                    row.len(),
                    self.alphabet
                )));
            }
            if row.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(Error::InvalidArgument(
                    "distortion entries must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Largest distortion a constant reconstruction can guarantee: `min_x̂ max_x d(x, x̂)`.
    pub fn max_distortion(&self) -> f64 {
        (0..self.alphabet)
            .map(|y| self.matrix.iter().map(|r| r[y]).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Measures for the constrained subsets; absent subsets are unconstrained.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DistortionSpec {
    pub measures: BTreeMap<DescriptionSet, DistortionMeasure>,
}

impl DistortionSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Hamming measure on every listed subset.
    pub fn hamming(source_alphabet: usize, subsets: &[DescriptionSet]) -> Self {
        let measures = subsets
            .iter()
            .map(|&k| (k, DistortionMeasure::hamming(source_alphabet)))
            .collect();
        Self { measures }
    }

    pub fn with(mut self, k: DescriptionSet, m: DistortionMeasure) -> Self {
        self.measures.insert(k, m);
        self
    }

    pub fn get(&self, k: DescriptionSet) -> Option<&DistortionMeasure> {
        self.measures.get(&k)
    }

    pub fn subsets(&self) -> impl Iterator<Item = DescriptionSet> + '_ {
        self.measures.keys().copied()
    }

    /// Parses the `{"[1]": {...}, "[1,2]": {...}}` form.
    pub fn from_json_map(l: usize, map: &BTreeMap<String, DistortionMeasure>) -> Result<Self> {
        let mut measures = BTreeMap::new();
        for (key, m) in map {
            let k = DescriptionSet::parse_key(l, key)?;
            if k.is_empty() {
                return Err(Error::InvalidSet(
                    "distortion subset must be nonempty".into(),
                ));
            }
            measures.insert(k, m.clone());
        }
        Ok(Self { measures })
    }

    pub fn to_json_map(&self) -> BTreeMap<String, DistortionMeasure> {
        self.measures
            .iter()
            .map(|(k, m)| (k.key(), m.clone()))
            .collect()
    }
}

/// Achieved expected distortion per constrained subset.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DistortionVector<T> {
    pub values: BTreeMap<DescriptionSet, T>,
}

impl<T: Scalar> DistortionVector<T> {
    pub fn get(&self, k: DescriptionSet) -> Option<T> {
        self.values.get(&k).copied()
    }

    pub fn to_f64(&self) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .map(|(k, v)| (k.key(), v.as_f64()))
            .collect()
    }
}

impl<T: Scalar> Serialize for DistortionVector<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.values.len()))?;
        for (k, v) in &self.values {
            map.serialize_entry(&k.key(), &v.as_f64())?;
        }
        map.end()
    }
}

/// Decoder for one subset: a lookup from the joint value of the
/// conditioning variables (mixed radix, last input fastest) to a symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub subset: DescriptionSet,
    /// Variable positions of the inputs, ascending.
    pub inputs: Vec<usize>,
    pub radices: Vec<usize>,
    pub table: Vec<usize>,
}

impl Decoder {
    pub fn cell_of(&self, symbols: &[usize]) -> usize {
        symbols
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&s, &r)| acc * r + s)
    }

    /// Reconstruction for input symbols given in `inputs` order.
    pub fn apply(&self, symbols: &[usize]) -> usize {
        self.table[self.cell_of(symbols)]
    }

    fn cell_in_joint<T: Scalar>(&self, model: &AuxModel<T>, idx: usize) -> usize {
        let j = model.joint();
        self.inputs
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&v, &r)| acc * r + j.digit(idx, v))
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct DecoderTable {
    pub decoders: BTreeMap<DescriptionSet, Decoder>,
}

impl DecoderTable {
    pub fn get(&self, k: DescriptionSet) -> Option<&Decoder> {
        self.decoders.get(&k)
    }
}

impl<T: Scalar> AuxModel<T> {
    fn check_measure(&self, k: DescriptionSet, m: &DistortionMeasure) -> Result<()> {
        if k.l() != self.l() || k.is_empty() {
            return Err(Error::Dimension(format!(
                "distortion subset {k} is not valid for L={}",
                self.l()
            )));
        }
        m.validate(self.joint().alphabet(self.source_var()))
    }

    /// `P(cell, x)` over the decoder inputs of `k`, flattened as `cell * |X| + x`.
    fn cell_source_table(&self, inputs: &[usize], radices: &[usize]) -> Vec<T> {
        let j = self.joint();
        let nx = j.alphabet(self.source_var());
        let cells: usize = radices.iter().product();
        let mut out = vec![T::zero(); cells * nx];
        for (idx, &p) in j.probs().iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            let cell = inputs
                .iter()
                .zip(radices)
                .fold(0, |acc, (&v, &r)| acc * r + j.digit(idx, v));
            let x = j.digit(idx, self.source_var());
            out[cell * nx + x] = out[cell * nx + x] + p;
        }
        out
    }

    fn decoder_shape(&self, k: DescriptionSet) -> Result<(Vec<usize>, Vec<usize>)> {
        let inputs: Vec<usize> = self.decoder_inputs(k)?.indices().collect();
        let radices = inputs.iter().map(|&v| self.joint().alphabet(v)).collect();
        Ok((inputs, radices))
    }

    /// MAP-style decoders minimizing expected distortion cell by cell, and
    /// the distortions they achieve.
    pub fn synthesize_decoders(
        &self,
        dspec: &DistortionSpec,
    ) -> Result<(DecoderTable, DistortionVector<T>)> {
        let nx = self.joint().alphabet(self.source_var());
        let mut table = DecoderTable::default();
        let mut dist = DistortionVector::default();
        for (&k, m) in &dspec.measures {
            self.check_measure(k, m)?;
            let (inputs, radices) = self.decoder_shape(k)?;
            let pcx = self.cell_source_table(&inputs, &radices);
            let cells = pcx.len() / nx;
            let d: Vec<Vec<T>> = m
                .matrix
                .iter()
                .map(|r| r.iter().map(|&v| T::lit(v)).collect())
                .collect();
            let mut map = vec![0usize; cells];
            let mut total = T::zero();
            for (c, slot) in map.iter_mut().enumerate() {
                let px = &pcx[c * nx..(c + 1) * nx];
                if px.iter().all(|&p| p == T::zero()) {
                    continue;
                }
                let mut best = 0usize;
                let mut best_cost = T::infinity();
                for y in 0..m.alphabet {
                    let cost: T = (0..nx).map(|x| px[x] * d[x][y]).sum();
                    if cost < best_cost {
                        best_cost = cost;
                        best = y;
                    }
                }
                *slot = best;
                total = total + best_cost;
            }
            table.decoders.insert(
                k,
                Decoder {
                    subset: k,
                    inputs,
                    radices,
                    table: map,
                },
            );
            dist.values.insert(k, total);
        }
        Ok((table, dist))
    }

    /// Expected distortion of an arbitrary decoder for subset `k`.
    pub fn decoder_distortion(&self, dec: &Decoder, m: &DistortionMeasure) -> Result<T> {
        self.check_measure(dec.subset, m)?;
        let (inputs, radices) = self.decoder_shape(dec.subset)?;
        if inputs != dec.inputs || radices != dec.radices {
            return Err(Error::Dimension(format!(
                "decoder inputs do not match subset {}",
                dec.subset
            )));
        }
        let cells: usize = radices.iter().product();
        if dec.table.len() != cells || dec.table.iter().any(|&y| y >= m.alphabet) {
            return Err(Error::Dimension("decoder table has the wrong shape".into()));
        }
        let j = self.joint();
        let mut total = T::zero();
        for (idx, &p) in j.probs().iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            let y = dec.table[dec.cell_in_joint(self, idx)];
            total = total + p * T::lit(m.matrix[j.digit(idx, self.source_var())][y]);
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{JointDistribution, VariableSpec};
    use crate::regions::{Role, RoleKind, Scheme};
    use approx::assert_abs_diff_eq;

    fn bsc_model(e: f64) -> AuxModel<f64> {
        let vars = vec![VariableSpec::new("X", 2), VariableSpec::new("U1", 2)];
        let joint = JointDistribution::new(
            vars,
            vec![0.5 * (1.0 - e), 0.5 * e, 0.5 * e, 0.5 * (1.0 - e)],
        )
        .unwrap();
        let s1 = DescriptionSet::new(2, &[1]).unwrap();
        AuxModel::new(
            2,
            Scheme::EC,
            joint,
            "X",
            &[Role::new("U1", RoleKind::Private, s1)],
        )
        .unwrap()
    }

    #[test]
    fn map_decoder_on_noisy_copy() {
        let m = bsc_model(0.2);
        let s1 = DescriptionSet::new(2, &[1]).unwrap();
        let s2 = DescriptionSet::new(2, &[2]).unwrap();
        let spec = DistortionSpec::hamming(2, &[s1, s2]);
        let (dec, d) = m.synthesize_decoders(&spec).unwrap();
        assert_abs_diff_eq!(d.get(s1).unwrap(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.get(s2).unwrap(), 0.5, epsilon = 1e-12);
        let d1 = dec.get(s1).unwrap();
        assert_eq!(d1.table, vec![0, 1]);
        // U2 is constant, so the decoder for {2} is a single cell; tie goes to 0.
        assert_eq!(dec.get(s2).unwrap().table, vec![0]);
        let exact = bsc_model(0.0);
        let (_, d) = exact.synthesize_decoders(&spec).unwrap();
        assert_abs_diff_eq!(d.get(s1).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn alternative_decoder_is_worse() {
        let m = bsc_model(0.2);
        let s1 = DescriptionSet::new(2, &[1]).unwrap();
        let meas = DistortionMeasure::hamming(2);
        let (dec, _) = m
            .synthesize_decoders(&DistortionSpec::new().with(s1, meas.clone()))
            .unwrap();
        let mut flipped = dec.get(s1).unwrap().clone();
        flipped.table = vec![1, 0];
        assert_abs_diff_eq!(
            m.decoder_distortion(&flipped, &meas).unwrap(),
            0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn dimension_errors() {
        let m = bsc_model(0.2);
        let s1 = DescriptionSet::new(2, &[1]).unwrap();
        let bad = DistortionMeasure {
            alphabet: 2,
            matrix: vec![vec![0.0, 1.0]],
        };
        assert!(matches!(
            m.synthesize_decoders(&DistortionSpec::new().with(s1, bad)),
            Err(Error::Dimension(_))
        ));
        let neg = DistortionMeasure {
            alphabet: 2,
            matrix: vec![vec![0.0, -1.0], vec![1.0, 0.0]],
        };
        assert!(m
            .synthesize_decoders(&DistortionSpec::new().with(s1, neg))
            .is_err());
    }

    #[test]
    fn json_map_round_trip() {
        let s12 = DescriptionSet::new(2, &[1, 2]).unwrap();
        let spec = DistortionSpec::hamming(2, &[s12]);
        let map = spec.to_json_map();
        assert!(map.contains_key("[1,2]"));
        assert_eq!(DistortionSpec::from_json_map(2, &map).unwrap(), spec);
        assert_eq!(DistortionMeasure::hamming(2).max_distortion(), 1.0);
    }
}
