//! Index-based translation dictionaries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A training or induced dictionary: `(source index, target index)` pairs
/// into fixed vocabularies.
///
/// Pairs form a multiset. A source may appear with several targets (union
/// retrieval) and the same pair may appear twice, in which case it carries
/// twice the weight in the Procrustes objective.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    pairs: Vec<(usize, usize)>,
}

impl Dictionary {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Dictionary { pairs }
    }

    /// `(i, i)` for `i in 0..n`.
    pub fn identity(n: usize) -> Self {
        Dictionary::new((0..n).map(|i| (i, i)).collect())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<(usize, usize)> {
        self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, src: usize, tgt: usize) {
        self.pairs.push((src, tgt));
    }

    pub fn source_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|&(s, _)| s)
    }

    pub fn target_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|&(_, t)| t)
    }

    /// First target listed for `src`, i.e. its forward translation when the
    /// dictionary was produced by forward or union retrieval.
    pub fn first_target(&self, src: usize) -> Option<usize> {
        self.pairs.iter().find(|&&(s, _)| s == src).map(|&(_, t)| t)
    }

    pub fn distinct_targets(&self) -> usize {
        self.target_indices().collect::<BTreeSet<_>>().len()
    }

    /// Checks every index against the vocabulary sizes.
    pub fn validate(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        for &(src, tgt) in &self.pairs {
            if src >= src_len || tgt >= tgt_len {
                return Err(Error::PairOutOfRange {
                    src,
                    tgt,
                    src_len,
                    tgt_len,
                });
            }
        }
        Ok(())
    }

    /// Keeps only pairs whose indices fall below the given bounds.
    pub fn restricted(&self, src_len: usize, tgt_len: usize) -> Dictionary {
        Dictionary::new(
            self.pairs
                .iter()
                .copied()
                .filter(|&(s, t)| s < src_len && t < tgt_len)
                .collect(),
        )
    }
}

impl FromIterator<(usize, usize)> for Dictionary {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Dictionary::new(iter.into_iter().collect())
    }
}
