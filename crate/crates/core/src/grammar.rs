//! Theka definitions, the pulse-count pair patterns they admit, and
//! classification of a dominant pair into a tala.
//!
//! A theka is a cyclic sequence of bols. Some bols are mandatorily stressed
//! (the sam and tali boundaries that carry a bayan stroke); these are the
//! strokes that survive bayan-band thresholding. Walking the stressed
//! positions around consecutive avarts gives the gaps, in pulses, between
//! consecutive bayan strokes, and consecutive gaps form the pairs the
//! co-occurrence matrix is expected to peak on.
//!
//! * **basic** patterns stress only the mandatory bols, plus the full-cycle
//!   pair `(P, P)` that appears when all but one stress per avart is missed.
//! * **extended** patterns additionally stress every subset of the other
//!   bols that have a bayan component.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cooccurrence::{CooccurrenceMatrix, DominantPattern, MAX_PULSES};
use crate::error::{Result, TalaError};

/// Environment variable naming an alternative theka file.
pub const THEKA_PATH_ENV: &str = "TALA_THEKA_PATH";

const BUILTIN_THEKAS: &str = include_str!("../data/thekas.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bol {
    pub name: String,
    #[serde(rename = "bayan", default, skip_serializing_if = "is_false")]
    pub has_bayan: bool,
    #[serde(rename = "rest", default, skip_serializing_if = "is_false")]
    pub is_rest: bool,
    #[serde(rename = "stressed", default, skip_serializing_if = "is_false")]
    pub mandatory_stressed: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theka {
    #[serde(rename = "name")]
    pub tala_name: String,
    /// Matras per avart; rupak and bhajani put two pulses in each.
    pub matras: u32,
    /// Whether the tala takes part in classification.
    #[serde(default = "default_true")]
    pub detectable: bool,
    pub vibhaga_boundaries: Vec<usize>,
    pub bols: Vec<Bol>,
}

impl Theka {
    pub fn pulses_per_avart(&self) -> usize {
        self.bols.len()
    }

    /// Matras per pulse, e.g. 0.5 for rupak.
    pub fn matras_per_pulse(&self) -> f64 {
        f64::from(self.matras) / self.pulses_per_avart() as f64
    }

    pub fn mandatory_positions(&self) -> Vec<usize> {
        self.bols.iter().enumerate().filter(|(_, b)| b.mandatory_stressed).map(|(i, _)| i).collect()
    }

    /// Bayan-component bols that may, but need not, be stressed.
    pub fn optional_positions(&self) -> Vec<usize> {
        self.bols
            .iter()
            .enumerate()
            .filter(|(_, b)| b.has_bayan && !b.mandatory_stressed && !b.is_rest)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn rest_count(&self) -> usize {
        self.bols.iter().filter(|b| b.is_rest).count()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TalaError::InvalidTheka(format!("{}: {msg}", self.tala_name)));
        if self.tala_name.trim().is_empty() {
            return Err(TalaError::InvalidTheka("theka with an empty name".into()));
        }
        if self.bols.is_empty() {
            return bad("no bols".into());
        }
        if self.matras == 0 {
            return bad("matra count must be positive".into());
        }
        for (i, b) in self.bols.iter().enumerate() {
            if b.is_rest && b.mandatory_stressed {
                return bad(format!("bol {i} is a rest and cannot be stressed"));
            }
            if b.mandatory_stressed && !b.has_bayan {
                return bad(format!("stressed bol {i} ({}) has no bayan component", b.name));
            }
        }
        if self.mandatory_positions().is_empty() {
            return bad("no stressed bol in the avart".into());
        }
        if let Some(&v) = self.vibhaga_boundaries.iter().find(|&&v| v >= self.bols.len()) {
            return bad(format!("vibhaga boundary {v} is past the end of the avart"));
        }
        Ok(())
    }
}

/// Gaps between consecutive stressed positions around one avart; they sum
/// to the avart length.
pub fn stress_gaps(stressed: &[usize], pulses_per_avart: usize) -> Vec<usize> {
    let mut s = stressed.to_vec();
    s.sort_unstable();
    s.dedup();
    match s.len() {
        0 => Vec::new(),
        1 => vec![pulses_per_avart],
        n => (0..n).map(|i| if i + 1 < n { s[i + 1] - s[i] } else { s[0] + pulses_per_avart - s[n - 1] }).collect(),
    }
}

/// Consecutive gap pairs met while walking the stresses across avart
/// boundaries.
fn walk_pairs(stressed: &[usize], pulses_per_avart: usize) -> impl Iterator<Item = (u8, u8)> {
    let gaps = stress_gaps(stressed, pulses_per_avart);
    let n = gaps.len();
    (0..n).filter_map(move |i| {
        let (a, b) = (gaps[i], gaps[(i + 1) % n]);
        (a <= MAX_PULSES && b <= MAX_PULSES).then_some((a as u8, b as u8))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Basic,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulsePattern {
    pub tala_name: String,
    pub pairs: BTreeSet<(u8, u8)>,
    pub provenance: Provenance,
}

impl PulsePattern {
    pub fn contains(&self, pair: (u8, u8)) -> bool {
        self.pairs.contains(&pair)
    }
}

pub fn basic_patterns(theka: &Theka) -> PulsePattern {
    let p = theka.pulses_per_avart();
    let mut pairs: BTreeSet<(u8, u8)> = walk_pairs(&theka.mandatory_positions(), p).collect();
    if p <= MAX_PULSES {
        pairs.insert((p as u8, p as u8));
    }
    PulsePattern { tala_name: theka.tala_name.clone(), pairs, provenance: Provenance::Basic }
}

pub fn extended_patterns(theka: &Theka) -> PulsePattern {
    let p = theka.pulses_per_avart();
    let mandatory = theka.mandatory_positions();
    let optional = theka.optional_positions();
    let mut pairs = basic_patterns(theka).pairs;
    for mask in 0u64..(1u64 << optional.len()) {
        let mut stressed = mandatory.clone();
        stressed.extend(optional.iter().enumerate().filter(|(bit, _)| mask >> bit & 1 == 1).map(|(_, &pos)| pos));
        pairs.extend(walk_pairs(&stressed, p));
    }
    PulsePattern { tala_name: theka.tala_name.clone(), pairs, provenance: Provenance::Extended }
}

/// [`extended_patterns`] with the optional stresses chosen independently in
/// each of the two avarts walked, so that pairs straddling an avart whose
/// optional stresses differ from its neighbour's are included. Choosing the
/// same subset twice gives back every pair of [`extended_patterns`].
pub fn varied_extended_patterns(theka: &Theka) -> PulsePattern {
    let p = theka.pulses_per_avart();
    let mandatory = theka.mandatory_positions();
    let optional = theka.optional_positions();
    let with = |mask: u64, offset: usize| {
        mandatory
            .iter()
            .copied()
            .chain(optional.iter().enumerate().filter(move |(bit, _)| mask >> bit & 1 == 1).map(|(_, &pos)| pos))
            .map(move |pos| pos + offset)
    };
    let mut pairs = basic_patterns(theka).pairs;
    let subsets = 1u64 << optional.len();
    for first in 0..subsets {
        for second in 0..subsets {
            let stressed: Vec<usize> = with(first, 0).chain(with(second, p)).collect();
            pairs.extend(walk_pairs(&stressed, 2 * p));
        }
    }
    PulsePattern { tala_name: theka.tala_name.clone(), pairs, provenance: Provenance::Extended }
}

/// Both pattern sets of one tala, in grammar order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TalaPatterns {
    pub tala_name: String,
    pub basic: PulsePattern,
    pub extended: PulsePattern,
}

impl TalaPatterns {
    pub fn from_theka(theka: &Theka) -> Self {
        Self { tala_name: theka.tala_name.clone(), basic: basic_patterns(theka), extended: varied_extended_patterns(theka) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    pub thekas: Vec<Theka>,
}

impl Grammar {
    /// The bundled dadra, kaharba, rupak, bhajani, jhaptal and tintal thekas.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_THEKAS).expect("bundled theka file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grammar: Grammar = serde_json::from_str(text).map_err(|e| TalaError::InvalidTheka(e.to_string()))?;
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TalaError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Loads `path` if given, else the file named by [`THEKA_PATH_ENV`],
    /// else the bundled grammar.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(THEKA_PATH_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::builtin()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thekas.is_empty() {
            return Err(TalaError::InvalidTheka("grammar contains no thekas".into()));
        }
        let mut names = BTreeSet::new();
        for t in &self.thekas {
            t.validate()?;
            if !names.insert(t.tala_name.as_str()) {
                return Err(TalaError::InvalidTheka(format!("duplicate tala {}", t.tala_name)));
            }
        }
        Ok(())
    }

    pub fn theka(&self, name: &str) -> Option<&Theka> {
        self.thekas.iter().find(|t| t.tala_name == name)
    }

    /// Pattern sets of every detectable tala, in file order.
    pub fn patterns(&self) -> Vec<TalaPatterns> {
        self.thekas.iter().filter(|t| t.detectable).map(TalaPatterns::from_theka).collect()
    }

    pub fn detectable_names(&self) -> Vec<String> {
        self.thekas.iter().filter(|t| t.detectable).map(|t| t.tala_name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub tala_name: String,
    pub provenance: Provenance,
    pub matched_pair: (u8, u8),
    /// Matrix transitions covered by the matched pattern set, when ranked
    /// against a matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TalaDetection {
    /// `None` when no tala matched.
    pub tala_name: Option<String>,
    /// Dominant pair that was classified; absent when analysis stopped
    /// before classification.
    pub query: Option<(u8, u8)>,
    pub matched_pair: Option<(u8, u8)>,
    /// Matched without using the +-1 tolerance.
    pub exact: bool,
    /// Every tala matching at the deciding stage, best first.
    pub candidates: Vec<Candidate>,
}

impl TalaDetection {
    pub fn none(query: (u8, u8)) -> Self {
        Self { query: Some(query), ..Self::undetermined() }
    }

    /// No classification was attempted.
    pub fn undetermined() -> Self {
        Self { tala_name: None, query: None, matched_pair: None, exact: false, candidates: Vec::new() }
    }

    pub fn is_none(&self) -> bool {
        self.tala_name.is_none()
    }
}

/// Closest pair of `set` to `query` within +-1 on both components.
fn nearest_within_one(set: &BTreeSet<(u8, u8)>, query: (u8, u8)) -> Option<(u8, u8)> {
    set.iter()
        .filter(|&&(a, b)| a.abs_diff(query.0) <= 1 && b.abs_diff(query.1) <= 1)
        .min_by_key(|&&(a, b)| (a.abs_diff(query.0) + b.abs_diff(query.1), (a, b)))
        .copied()
}

/// Exact match first, then +-1 tolerance. Talas matching at the same stage
/// are ranked basic before extended, then in grammar order.
pub fn classify(pattern: &DominantPattern, grammars: &[TalaPatterns]) -> TalaDetection {
    classify_inner(pattern, grammars, None)
}

/// Like [`classify`], but talas tied on stage and provenance are ordered by
/// how many of the matrix's transitions fall in their matched pattern set,
/// and only then by grammar order.
///
/// With optional stresses, large extended sets (rupak's in particular)
/// share many pairs with other talas. A single shared arg-max cell says
/// little; the rest of the matrix usually sits on pairs only the true tala
/// can produce.
pub fn classify_with_matrix(pattern: &DominantPattern, matrix: &CooccurrenceMatrix, grammars: &[TalaPatterns]) -> TalaDetection {
    classify_inner(pattern, grammars, Some(matrix))
}

fn support(set: &PulsePattern, matrix: &CooccurrenceMatrix) -> u32 {
    set.pairs.iter().map(|&(a, b)| matrix.get(a, b)).sum()
}

fn classify_inner(pattern: &DominantPattern, grammars: &[TalaPatterns], matrix: Option<&CooccurrenceMatrix>) -> TalaDetection {
    let query = (pattern.pcmax_1, pattern.pcmax_2);
    let mut detection = TalaDetection::none(query);

    let exact: Vec<Candidate> = grammars
        .iter()
        .filter_map(|g| {
            let provenance = if g.basic.contains(query) {
                Provenance::Basic
            } else if g.extended.contains(query) {
                Provenance::Extended
            } else {
                return None;
            };
            Some(Candidate { tala_name: g.tala_name.clone(), provenance, matched_pair: query, support: None })
        })
        .collect();

    let (mut candidates, is_exact) = if exact.is_empty() {
        let tolerant = grammars
            .iter()
            .filter_map(|g| {
                nearest_within_one(&g.basic.pairs, query)
                    .map(|pair| (Provenance::Basic, pair))
                    .or_else(|| nearest_within_one(&g.extended.pairs, query).map(|pair| (Provenance::Extended, pair)))
                    .map(|(provenance, matched_pair)| Candidate { tala_name: g.tala_name.clone(), provenance, matched_pair, support: None })
            })
            .collect();
        (tolerant, false)
    } else {
        (exact, true)
    };
    if let Some(m) = matrix {
        for c in &mut candidates {
            let g = grammars.iter().find(|g| g.tala_name == c.tala_name).expect("candidate comes from grammars");
            c.support = Some(support(if c.provenance == Provenance::Basic { &g.basic } else { &g.extended }, m));
        }
    }
    // Stable sort keeps grammar order among equal keys.
    candidates.sort_by_key(|c| (c.provenance, std::cmp::Reverse(c.support.unwrap_or(0))));
    if let Some(top) = candidates.first() {
        detection.tala_name = Some(top.tala_name.clone());
        detection.matched_pair = Some(top.matched_pair);
        detection.exact = is_exact;
    }
    detection.candidates = candidates;
    detection
}
