//! Sources, antichains and the redundancy lattice order.
//!
//! A source is a nonempty set of predictor indices. An antichain is a
//! nonempty collection of sources none of which contains another. Predictors
//! here are whatever the caller groups together, typically all supplemental
//! measurements of one landmark.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::IndexSet;

/// Nonempty set of predictor (or factor) indices.
pub type SourceSet = IndexSet;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Antichain(Vec<SourceSet>);

impl Antichain {
    /// Checks pairwise incomparability. Duplicate sources collapse to one.
    pub fn new(sources: Vec<SourceSet>) -> Result<Self> {
        let mut sources = sources;
        sources.sort();
        sources.dedup();
        if sources.is_empty() {
            return Err(Error::InvalidAntichain("no sources".into()));
        }
        if sources.iter().any(IndexSet::is_empty) {
            return Err(Error::InvalidAntichain("empty source".into()));
        }
        for (i, a) in sources.iter().enumerate() {
            for b in &sources[i + 1..] {
                if a.is_subset(b) {
                    return Err(Error::InvalidAntichain(format!("{a} ⊂ {b}")));
                }
                if b.is_subset(a) {
                    return Err(Error::InvalidAntichain(format!("{b} ⊂ {a}")));
                }
            }
        }
        Ok(Antichain(sources))
    }

    pub fn singleton(source: SourceSet) -> Result<Self> {
        Self::new(vec![source])
    }

    pub fn sources(&self) -> &[SourceSet] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ⪯ other`: every source of `other` contains some source of `self`.
    pub fn leq(&self, other: &Antichain) -> bool {
        other
            .0
            .iter()
            .all(|j| self.0.iter().any(|jp| jp.is_subset(j)))
    }

    /// True when every source of `self` is also a source of `other`.
    pub fn is_subcollection(&self, other: &Antichain) -> bool {
        self.0.iter().all(|s| other.0.contains(s))
    }
}

impl std::fmt::Display for Antichain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

pub fn validate_antichain(sources: Vec<SourceSet>) -> Result<Antichain> {
    Antichain::new(sources)
}

pub fn antichain_leq(a: &Antichain, b: &Antichain) -> bool {
    a.leq(b)
}

/// All nonempty antichains of nonempty subsets of `{1, …, n}`.
///
/// The counts are `D(n) − 2` (1, 4, 18, 166 for n = 1..4): the Dedekind
/// number minus the empty antichain and the antichain holding only the empty
/// source.
pub fn enumerate_antichains(n: usize) -> Result<Vec<Antichain>> {
    if !(1..=4).contains(&n) {
        return Err(Error::UnsupportedPredictorCount(n));
    }
    let subsets: Vec<u32> = (1u32..(1 << n)).collect();
    let mut out = Vec::new();
    for family in 1u64..(1u64 << subsets.len()) {
        let members: Vec<u32> = subsets
            .iter()
            .enumerate()
            .filter(|(k, _)| family >> k & 1 == 1)
            .map(|(_, &s)| s)
            .collect();
        let incomparable = members.iter().enumerate().all(|(i, &a)| {
            members[i + 1..]
                .iter()
                .all(|&b| a & b != a && a & b != b)
        });
        if incomparable {
            let sources = members
                .iter()
                .map(|&m| IndexSet::new((0..n).filter(|k| m >> k & 1 == 1).map(|k| k + 1).collect()))
                .collect();
            out.push(Antichain::new(sources)?);
        }
    }
    out.sort();
    Ok(out)
}

/// Bivariate decomposition `I({1,2}) = R + U1 + U2 + S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateAtoms {
    pub redundancy: f64,
    pub unique: [f64; 2],
    pub synergy: f64,
}

/// Möbius inversion of a redundancy function over the four antichains on
/// predictors `{1, 2}`.
pub fn bivariate_atoms(values: &BTreeMap<Antichain, f64>) -> Result<BivariateAtoms> {
    let get = |sources: Vec<SourceSet>| -> Result<f64> {
        let key = Antichain::new(sources)?;
        values
            .get(&key)
            .copied()
            .ok_or_else(|| Error::MissingAtom(key.to_string()))
    };
    let r = get(vec![[1].into(), [2].into()])?;
    let i1 = get(vec![[1].into()])?;
    let i2 = get(vec![[2].into()])?;
    let i12 = get(vec![[1, 2].into()])?;
    let u1 = i1 - r;
    let u2 = i2 - r;
    Ok(BivariateAtoms {
        redundancy: r,
        unique: [u1, u2],
        synergy: i12 - u1 - u2 - r,
    })
}
