//! Finite-blocklength Monte Carlo check of the layered random code:
//! codebook generation, typicality encoding and per-letter decoding.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{self, DescriptionSet};
use crate::probability::VarSet;
use crate::regions::{AuxModel, DecoderTable, DistortionSpec, RateAllocation};

pub const MAX_SIM_L: usize = 3;
pub const MAX_BLOCKLENGTH: usize = 12;
pub const MAX_CODEBOOK: usize = 4096;
/// Codebooks with more stored symbols than this are regenerated on demand.
const STORE_LIMIT: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BookKind {
    Shared,
    Base,
    Refinement,
}

/// One codebook: `size` codewords for every index tuple of `cond`.
#[derive(Clone, Debug)]
pub struct Codebook {
    pub name: String,
    pub kind: BookKind,
    /// Joint variable position.
    pub var: usize,
    /// Conditioning codebooks (positions in the suite).
    pub cond: Vec<usize>,
    pub size: usize,
    /// `log2(size) / n`.
    pub rate: f64,
    alphabet: usize,
    /// Cumulative `P(var | cond vars)`, one row per conditioning cell.
    cdf: Vec<Vec<f64>>,
    words: Option<Vec<u8>>,
}

#[derive(Clone, Debug)]
pub struct CodebookSuite {
    pub n: usize,
    pub books: Vec<Codebook>,
    seed: u64,
    source: usize,
    /// Typicality variables (source first is not required; ascending order).
    typ_vars: Vec<usize>,
    typ_radices: Vec<usize>,
    typ_table: Vec<f64>,
    book_of_var: BTreeMap<usize, usize>,
}

fn codebook_size(n: usize, rate: f64) -> Result<usize> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rate {rate} is not a valid rate"
        )));
    }
    let bits = (n as f64 * rate - 1e-9).ceil().max(0.0);
    if bits > MAX_CODEBOOK.ilog2() as f64 {
        return Err(Error::Limit(format!(
            "codebook of 2^{bits} words exceeds {MAX_CODEBOOK}"
        )));
    }
    Ok(1usize << bits as u32)
}

fn mixed_radix(digits: impl Iterator<Item = (usize, usize)>) -> usize {
    digits.fold(0, |acc, (d, r)| acc * r + d)
}

impl CodebookSuite {
    /// Names in generation order.
    pub fn order(&self) -> Vec<String> {
        self.books.iter().map(|b| b.name.clone()).collect()
    }

    pub fn rates(&self) -> BTreeMap<String, f64> {
        self.books
            .iter()
            .map(|b| (b.name.clone(), b.rate))
            .collect()
    }

    fn sub_rank(&self, b: usize, indices: &[usize]) -> usize {
        mixed_radix(
            self.books[b]
                .cond
                .iter()
                .map(|&c| (indices[c], self.books[c].size)),
        )
    }

    /// Codeword `idx` of book `b` given the codewords of its conditioning books.
    fn draw(&self, b: usize, sub: usize, idx: usize, cond_words: &[&[u8]]) -> Vec<u8> {
        let book = &self.books[b];
        if book.alphabet == 1 {
            return vec![0; self.n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b as u64);
        rng.set_word_pos(((sub * book.size + idx) as u128) * self.n as u128 * 2);
        let radices: Vec<usize> = book.cond.iter().map(|&c| self.books[c].alphabet).collect();
        (0..self.n)
            .map(|t| {
                let cell = mixed_radix(
                    cond_words
                        .iter()
                        .zip(&radices)
                        .map(|(w, &r)| (w[t] as usize, r)),
                );
                let u: f64 = rng.gen();
                let row = &book.cdf[cell];
                row.iter().position(|&c| u < c).unwrap_or(row.len() - 1) as u8
            })
            .collect()
    }

    fn word(&self, b: usize, indices: &[usize], words: &[Vec<u8>]) -> Vec<u8> {
        let book = &self.books[b];
        let sub = self.sub_rank(b, indices);
        let idx = indices[b];
        if let Some(stored) = &book.words {
            let at = (sub * book.size + idx) * self.n;
            return stored[at..at + self.n].to_vec();
        }
        let cond: Vec<&[u8]> = book.cond.iter().map(|&c| words[c].as_slice()).collect();
        self.draw(b, sub, idx, &cond)
    }

    /// Codewords of every book for a full index tuple.
    pub fn codewords(&self, indices: &[usize]) -> Result<Vec<Vec<u8>>> {
        if indices.len() != self.books.len() {
            return Err(Error::Dimension(format!(
                "{} indices for {} codebooks",
                indices.len(),
                self.books.len()
            )));
        }
        let mut words: Vec<Vec<u8>> = Vec::with_capacity(self.books.len());
        for (b, book) in self.books.iter().enumerate() {
            if indices[b] >= book.size {
                return Err(Error::InvalidArgument(format!(
                    "index {} out of range for {}",
                    indices[b], book.name
                )));
            }
            let w = self.word(b, indices, &words);
            words.push(w);
        }
        Ok(words)
    }

    /// Largest per-cell deviation between the joint type of `x` and the
    /// codewords and the model PMF over the source and all auxiliaries.
    pub fn type_deviation(&self, x: &[u8], words: &[Vec<u8>]) -> f64 {
        let cells = self.typ_table.len();
        let mut counts = vec![0usize; cells];
        for t in 0..self.n {
            let cell = mixed_radix(self.typ_vars.iter().zip(&self.typ_radices).map(|(&v, &r)| {
                let s = if v == self.source {
                    x[t]
                } else {
                    words[self.book_of_var[&v]][t]
                };
                (s as usize, r)
            }));
            counts[cell] += 1;
        }
        counts
            .iter()
            .zip(&self.typ_table)
            .map(|(&c, &p)| (c as f64 / self.n as f64 - p).abs())
            .fold(0.0, f64::max)
    }
}

/// Conditional CDF rows of `var` given `cond` (joint positions).
fn conditional_cdf(model: &AuxModel<f64>, var: usize, cond: &[usize]) -> Vec<Vec<f64>> {
    let j = model.joint();
    let k = j.alphabet(var);
    let radices: Vec<usize> = cond.iter().map(|&c| j.alphabet(c)).collect();
    let cells: usize = radices.iter().product();
    let mut table = vec![vec![0.0; k]; cells];
    for (idx, &p) in j.probs().iter().enumerate() {
        let cell = mixed_radix(
            cond.iter()
                .zip(&radices)
                .map(|(&c, &r)| (j.digit(idx, c), r)),
        );
        table[cell][j.digit(idx, var)] += p;
    }
    let marginal: Vec<f64> = (0..k)
        .map(|s| table.iter().map(|row| row[s]).sum())
        .collect();
    table
        .into_iter()
        .map(|row| {
            // Unreachable conditioning cells fall back to the marginal.
            let row = if row.iter().sum::<f64>() > 0.0 {
                row
            } else {
                marginal.clone()
            };
            let total: f64 = row.iter().sum();
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = row
                .iter()
                .map(|p| {
                    acc += p / total;
                    acc
                })
                .collect();
            *cdf.last_mut().expect("alphabet >= 1") = 1.0;
            cdf
        })
        .collect()
}

/// Layered codebooks in generation order: shared variables from the
/// widest subset down, then base layers `U_l`, then refinements by size.
/// Refinement codebooks hold one codeword per conditioning tuple.
pub fn generate_codebooks(
    model: &AuxModel<f64>,
    alloc: &RateAllocation<f64>,
    n: usize,
    seed: u64,
) -> Result<CodebookSuite> {
    let l = model.l();
    if l > MAX_SIM_L {
        return Err(Error::Limit(format!(
            "simulation supports L <= {MAX_SIM_L}"
        )));
    }
    if n == 0 || n > MAX_BLOCKLENGTH {
        return Err(Error::Limit(format!(
            "blocklength must lie in 1..={MAX_BLOCKLENGTH}"
        )));
    }
    if alloc.l != l {
        return Err(Error::Dimension(format!(
            "allocation for L={} on an L={l} model",
            alloc.l
        )));
    }
    alloc.validate()?;
    let full = model.full_set();
    let j = model.joint();

    let mut shared: Vec<DescriptionSet> = model.shared_vars().keys().copied().collect();
    shared.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let mut layers: Vec<DescriptionSet> = full.nonempty_subsets();
    layers.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));

    let mut specs: Vec<(DescriptionSet, BookKind, usize, f64)> = Vec::new();
    for s in &shared {
        let rate = alloc.shared.get(s).copied().unwrap_or(0.0);
        specs.push((
            *s,
            BookKind::Shared,
            model.shared_var(*s).expect("listed"),
            rate,
        ));
    }
    for k in &layers {
        let (kind, rate) = if k.len() == 1 {
            (BookKind::Base, alloc.private[k.members()[0] - 1])
        } else {
            (BookKind::Refinement, 0.0)
        };
        specs.push((*k, kind, model.layer_var(*k), rate));
    }

    let position = |kind_shared: bool, s: DescriptionSet| {
        specs
            .iter()
            .position(|(t, k, _, _)| *t == s && ((*k == BookKind::Shared) == kind_shared))
    };
    let mut books: Vec<Codebook> = Vec::with_capacity(specs.len());
    let mut stored_cells = Vec::with_capacity(specs.len());
    for (s, kind, var, rate) in &specs {
        let cond: Vec<usize> = match kind {
            BookKind::Shared => shared
                .iter()
                .filter(|t| t.len() > s.len() && s.is_subset_of(**t))
                .map(|t| position(true, *t).expect("listed"))
                .collect(),
            BookKind::Base | BookKind::Refinement => {
                let j_k = lattice::sharing_sets(l, *s)?;
                let mut c: Vec<usize> = j_k.iter().filter_map(|t| position(true, t)).collect();
                c.extend(
                    s.nonempty_subsets()
                        .into_iter()
                        .filter(|t| t != s)
                        .map(|t| position(false, t).expect("layer")),
                );
                c
            }
        };
        let alphabet = j.alphabet(*var);
        let size = if alphabet == 1 {
            1
        } else {
            codebook_size(n, *rate)?
        };
        let cond_vars: Vec<usize> = cond.iter().map(|&c: &usize| specs[c].2).collect();
        let subs: usize = cond.iter().map(|&c| books[c].size).product();
        stored_cells.push(subs.saturating_mul(size).saturating_mul(n));
        books.push(Codebook {
            name: j.vars()[*var].name.clone(),
            kind: *kind,
            var: *var,
            cond,
            size,
            rate: (size as f64).log2() / n as f64,
            alphabet,
            cdf: conditional_cdf(model, *var, &cond_vars),
            words: None,
        });
    }

    let mut typ = VarSet::single(model.source_var());
    for b in &books {
        typ = typ.with(b.var);
    }
    let typ_vars: Vec<usize> = typ.indices().collect();
    let typ_radices: Vec<usize> = typ_vars.iter().map(|&v| j.alphabet(v)).collect();
    let typ_table = j.marginal_table(typ);
    let book_of_var = books.iter().enumerate().map(|(i, b)| (b.var, i)).collect();
    let mut suite = CodebookSuite {
        n,
        books,
        seed,
        source: model.source_var(),
        typ_vars,
        typ_radices,
        typ_table,
        book_of_var,
    };

    // Store codebooks that are unconditioned or conditioned only on stored
    // unconditioned books, when their total size is moderate.
    for b in 0..suite.books.len() {
        let book = &suite.books[b];
        let eligible = book.kind != BookKind::Refinement
            && stored_cells[b] <= STORE_LIMIT
            && book
                .cond
                .iter()
                .all(|&c| suite.books[c].words.is_some() && suite.books[c].cond.is_empty());
        if !eligible {
            continue;
        }
        let radices: Vec<usize> = book.cond.iter().map(|&c| suite.books[c].size).collect();
        let subs: usize = radices.iter().product();
        let mut words = Vec::with_capacity(stored_cells[b]);
        let mut digits = vec![0usize; radices.len()];
        for sub in 0..subs {
            let mut rem = sub;
            for i in (0..radices.len()).rev() {
                digits[i] = rem % radices[i];
                rem /= radices[i];
            }
            let cond: Vec<&[u8]> = book
                .cond
                .iter()
                .zip(&digits)
                .map(|(&c, &d)| &suite.books[c].words.as_ref().expect("stored")[d * n..(d + 1) * n])
                .collect();
            for idx in 0..book.size {
                words.extend(suite.draw(b, sub, idx, &cond));
            }
        }
        suite.books[b].words = Some(words);
    }
    Ok(suite)
}

/// First index tuple, in lexicographic order over the non-refinement
/// codebooks, whose joint type with `x` is within `epsilon` per cell of the
/// model PMF. Prunes on partial types.
pub fn encode(x: &[u8], suite: &CodebookSuite, epsilon: f64) -> Result<Option<Vec<usize>>> {
    if x.len() != suite.n {
        return Err(Error::Dimension(format!(
            "source block of {} for n={}",
            x.len(),
            suite.n
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let free: Vec<usize> = (0..suite.books.len())
        .filter(|&b| suite.books[b].kind != BookKind::Refinement)
        .collect();
    let fixed: Vec<usize> = (0..suite.books.len())
        .filter(|&b| suite.books[b].kind == BookKind::Refinement)
        .collect();

    // Partial checks: after the first `d` free books, every marginal cell may
    // deviate by at most `epsilon` times the number of joint cells it covers.
    let mut partial = Vec::with_capacity(free.len() + 1);
    for d in 0..=free.len() {
        let mut known = VarSet::single(suite.source);
        for &b in &free[..d] {
            known = known.with(suite.books[b].var);
        }
        let pos: Vec<usize> = suite
            .typ_vars
            .iter()
            .enumerate()
            .filter(|(_, v)| known.contains(**v))
            .map(|(i, _)| i)
            .collect();
        let radices: Vec<usize> = pos.iter().map(|&i| suite.typ_radices[i]).collect();
        let cells: usize = radices.iter().product();
        let mut table = vec![0.0; cells];
        let mut digits = vec![0usize; suite.typ_vars.len()];
        for &p in &suite.typ_table {
            table[mixed_radix(pos.iter().zip(&radices).map(|(&i, &r)| (digits[i], r)))] += p;
            for i in (0..digits.len()).rev() {
                digits[i] += 1;
                if digits[i] < suite.typ_radices[i] {
                    break;
                }
                digits[i] = 0;
            }
        }
        let slack = epsilon * (suite.typ_table.len() / cells) as f64;
        partial.push((pos, radices, table, slack));
    }
    let ok = |d: usize, words: &[Vec<u8>]| -> bool {
        let (pos, radices, table, slack) = &partial[d];
        let mut counts = vec![0usize; table.len()];
        for t in 0..suite.n {
            let cell = mixed_radix(pos.iter().zip(radices).map(|(&i, &r)| {
                let v = suite.typ_vars[i];
                let s = if v == suite.source {
                    x[t]
                } else {
                    words[suite.book_of_var[&v]][t]
                };
                (s as usize, r)
            }));
            counts[cell] += 1;
        }
        counts
            .iter()
            .zip(table)
            .all(|(&c, &p)| (c as f64 / suite.n as f64 - p).abs() <= slack + 1e-12)
    };

    let mut indices = vec![0usize; suite.books.len()];
    let mut words = vec![Vec::new(); suite.books.len()];
    if !ok(0, &words) {
        return Ok(None);
    }
    fn dfs(
        d: usize,
        suite: &CodebookSuite,
        free: &[usize],
        fixed: &[usize],
        indices: &mut Vec<usize>,
        words: &mut Vec<Vec<u8>>,
        x: &[u8],
        epsilon: f64,
        ok: &dyn Fn(usize, &[Vec<u8>]) -> bool,
    ) -> bool {
        if d == free.len() {
            for &b in fixed {
                indices[b] = 0;
                words[b] = suite.word(b, indices, words);
            }
            return suite.type_deviation(x, words) <= epsilon + 1e-12;
        }
        let b = free[d];
        for idx in 0..suite.books[b].size {
            indices[b] = idx;
            words[b] = suite.word(b, indices, words);
            if ok(d + 1, words) && dfs(d + 1, suite, free, fixed, indices, words, x, epsilon, ok) {
                return true;
            }
        }
        false
    }
    if dfs(
        0,
        suite,
        &free,
        &fixed,
        &mut indices,
        &mut words,
        x,
        epsilon,
        &ok,
    ) {
        Ok(Some(indices))
    } else {
        Ok(None)
    }
}

/// Per-letter reconstruction of subset `s` from the codewords at `indices`.
pub fn decode_subset(
    suite: &CodebookSuite,
    indices: &[usize],
    s: DescriptionSet,
    decoders: &DecoderTable,
) -> Result<Vec<usize>> {
    let dec = decoders
        .get(s)
        .ok_or_else(|| Error::InvalidArgument(format!("no decoder for {s}")))?;
    let words = suite.codewords(indices)?;
    let inputs: Vec<usize> = dec
        .inputs
        .iter()
        .map(|v| {
            suite.book_of_var.get(v).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("decoder input {v} has no codebook index"))
            })
        })
        .collect::<Result<_>>()?;
    Ok((0..suite.n)
        .map(|t| {
            let symbols: Vec<usize> = inputs.iter().map(|&b| words[b][t] as usize).collect();
            dec.apply(&symbols)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub success: bool,
    /// Per-subset distortion of this trial (empty on failure).
    pub distortions: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub n: usize,
    pub trials: usize,
    pub encode_failures: usize,
    pub failure_rate: f64,
    /// Mean over successful trials; `None` when every trial failed.
    pub empirical_distortions: BTreeMap<String, Option<f64>>,
    pub analytic_distortions: BTreeMap<String, f64>,
    /// Effective codebook rates after rounding to whole codeword counts.
    pub effective_rates: BTreeMap<String, f64>,
    pub generation_order: Vec<String>,
    pub seed: u64,
    pub epsilon: f64,
    #[serde(skip)]
    pub per_trial: Vec<TrialRecord>,
}

/// Independent trials, each with fresh codebooks and an i.i.d. source block.
/// Trial `t` draws from stream `t` of the master seed.
pub fn run_trials(
    model: &AuxModel<f64>,
    alloc: &RateAllocation<f64>,
    dspec: &DistortionSpec,
    n: usize,
    trials: usize,
    epsilon: f64,
    seed: u64,
) -> Result<SimReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let (decoders, analytic) = model.synthesize_decoders(dspec)?;
    let probe = generate_codebooks(model, alloc, n, seed)?;
    let src = model.source_var();
    let px = model.joint().marginal_table(VarSet::single(src));
    let measures: Vec<(DescriptionSet, &crate::regions::DistortionMeasure)> =
        dspec.measures.iter().map(|(k, m)| (*k, m)).collect();

    let records: Vec<Result<TrialRecord>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let book_seed = rng.next_u64();
            let suite = generate_codebooks(model, alloc, n, book_seed)?;
            let x: Vec<u8> = (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    px.iter()
                        .position(|p| {
                            acc += p;
                            u < acc
                        })
                        .unwrap_or(px.len() - 1) as u8
                })
                .collect();
            let mut distortions = BTreeMap::new();
            let found = encode(&x, &suite, epsilon)?;
            if let Some(ix) = &found {
                let words = suite.codewords(ix)?;
                if suite.type_deviation(&x, &words) > epsilon + 1e-12 {
                    return Err(Error::InvalidModel(
                        "encoder returned an atypical tuple".into(),
                    ));
                }
                for (k, m) in &measures {
                    let y = decode_subset(&suite, ix, *k, &decoders)?;
                    let d: f64 = x
                        .iter()
                        .zip(&y)
                        .map(|(&a, &b)| m.matrix[a as usize][b])
                        .sum();
                    distortions.insert(k.key(), d / n as f64);
                }
            }
            Ok(TrialRecord {
                trial,
                success: found.is_some(),
                distortions,
            })
        })
        .collect();
    let per_trial: Vec<TrialRecord> = records.into_iter().collect::<Result<_>>()?;

    let successes = per_trial.iter().filter(|r| r.success).count();
    let mut empirical = BTreeMap::new();
    for (k, _) in &measures {
        let key = k.key();
        let mean = (successes > 0).then(|| {
            per_trial
                .iter()
                .filter_map(|r| r.distortions.get(&key))
                .sum::<f64>()
                / successes as f64
        });
        empirical.insert(key, mean);
    }
    Ok(SimReport {
        n,
        trials,
        encode_failures: trials - successes,
        failure_rate: (trials - successes) as f64 / trials as f64,
        empirical_distortions: empirical,
        analytic_distortions: analytic.values.iter().map(|(k, v)| (k.key(), *v)).collect(),
        effective_rates: probe.rates(),
        generation_order: probe.order(),
        seed,
        epsilon,
        per_trial,
    })
}
