//! Ranking representations and the penalized Kendall-tau distance.
//!
//! A ranking assigns each of `n` items to one of `l` ordered stages. Several
//! items may share a stage (a bucket order), and in a [`PartialRanking`] some
//! items may carry no stage at all. Stages are dense integers `1..=l`.
//!
//! The distance between two rankings counts, over all unordered item pairs,
//! the discordant pairs at weight 1 and the pairs tied in exactly one of the
//! two rankings at weight `p`. Pairs touching an unobserved item are dropped.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ordered set of item labels. Position in the list is the item index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ItemSet {
    labels: Vec<String>,
}

impl ItemSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::domain("item set must contain at least one item"));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::domain(format!("duplicate item label {label:?}")));
            }
        }
        Ok(ItemSet { labels })
    }

    /// Items named `item1`, `item2`, ...
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| format!("item{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for ItemSet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        ItemSet::new(labels)
    }
}

impl From<ItemSet> for Vec<String> {
    fn from(items: ItemSet) -> Self {
        items.labels
    }
}

/// Stages `1..=l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct StageDomain {
    l: u8,
}

impl StageDomain {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 || l > u8::MAX as usize {
            return Err(Error::domain(format!(
                "number of stages must be in 1..={}, got {l}",
                u8::MAX
            )));
        }
        Ok(StageDomain { l: l as u8 })
    }

    pub fn l(self) -> usize {
        self.l as usize
    }

    pub fn contains(self, stage: u8) -> bool {
        (1..=self.l).contains(&stage)
    }
}

impl TryFrom<usize> for StageDomain {
    type Error = Error;

    fn try_from(l: usize) -> Result<Self> {
        StageDomain::new(l)
    }
}

impl From<StageDomain> for usize {
    fn from(d: StageDomain) -> Self {
        d.l()
    }
}

/// Read access shared by partial and complete rankings.
pub trait StageVector {
    fn len(&self) -> usize;

    /// Stage of item `i`, or `None` when the item is unobserved.
    fn stage(&self, i: usize) -> Option<u8>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl StageVector for [u8] {
    fn len(&self) -> usize {
        <[u8]>::len(self)
    }

    fn stage(&self, i: usize) -> Option<u8> {
        Some(self[i])
    }
}

impl StageVector for [Option<u8>] {
    fn len(&self) -> usize {
        <[Option<u8>]>::len(self)
    }

    fn stage(&self, i: usize) -> Option<u8> {
        self[i]
    }
}

/// One respondent's stage assignment, with unobserved items as `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialRanking {
    stages: Vec<Option<u8>>,
    domain: StageDomain,
}

impl PartialRanking {
    pub fn new(stages: Vec<Option<u8>>, domain: StageDomain) -> Result<Self> {
        if let Some(bad) = stages.iter().flatten().find(|&&s| !domain.contains(s)) {
            return Err(Error::domain(format!(
                "stage {bad} outside 1..={}",
                domain.l()
            )));
        }
        if stages.iter().all(Option::is_none) {
            return Err(Error::domain("partial ranking has no observed items"));
        }
        Ok(PartialRanking { stages, domain })
    }

    pub fn stages(&self) -> &[Option<u8>] {
        &self.stages
    }

    pub fn domain(&self) -> StageDomain {
        self.domain
    }

    /// Indices of the observed items, ascending.
    pub fn observed(&self) -> Vec<usize> {
        self.stages
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|_| i))
            .collect()
    }

    pub fn observed_count(&self) -> usize {
        self.stages.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.stages.iter().all(Option::is_some)
    }

    /// The complete ranking, if nothing is missing.
    pub fn to_central(&self) -> Option<CentralRanking> {
        let stages = self.stages.iter().copied().collect::<Option<Vec<u8>>>()?;
        Some(CentralRanking {
            stages,
            domain: self.domain,
        })
    }

    /// Observed stages of the given items, in the given order.
    pub(crate) fn observed_stages(&self, observed: &[usize]) -> Vec<u8> {
        observed.iter().map(|&i| self.stages[i].unwrap_or(0)).collect()
    }
}

impl StageVector for PartialRanking {
    fn len(&self) -> usize {
        self.stages.len()
    }

    fn stage(&self, i: usize) -> Option<u8> {
        self.stages[i]
    }
}

/// A complete stage assignment for every item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CentralRanking {
    stages: Vec<u8>,
    domain: StageDomain,
}

impl CentralRanking {
    pub fn new(stages: Vec<u8>, domain: StageDomain) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::domain("ranking must cover at least one item"));
        }
        if let Some(bad) = stages.iter().find(|&&s| !domain.contains(s)) {
            return Err(Error::domain(format!(
                "stage {bad} outside 1..={}",
                domain.l()
            )));
        }
        Ok(CentralRanking { stages, domain })
    }

    pub(crate) fn from_raw(stages: Vec<u8>, domain: StageDomain) -> Self {
        debug_assert!(stages.iter().all(|&s| domain.contains(s)));
        CentralRanking { stages, domain }
    }

    pub fn stages(&self) -> &[u8] {
        &self.stages
    }

    pub fn domain(&self) -> StageDomain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.stages.len()
    }

    /// Sizes of the non-empty buckets in stage order.
    ///
    /// Two centers with the same composition are related by an item
    /// permutation followed by an order-preserving relabeling of stages, so
    /// every distance-derived quantity (the partition function in particular)
    /// depends on the center only through this value and `l`.
    pub fn composition(&self) -> Vec<u8> {
        composition_of(&self.stages, self.domain.l())
    }

    /// Size of each bucket `1..=l`, including empty ones.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.domain.l()];
        for &s in &self.stages {
            sizes[s as usize - 1] += 1;
        }
        sizes
    }

    /// Item indices ordered by stage, ties broken by index.
    pub fn stage_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.stages.len()).collect();
        order.sort_by_key(|&i| (self.stages[i], i));
        order
    }

    pub fn as_partial(&self) -> PartialRanking {
        PartialRanking {
            stages: self.stages.iter().map(|&s| Some(s)).collect(),
            domain: self.domain,
        }
    }
}

impl StageVector for CentralRanking {
    fn len(&self) -> usize {
        self.stages.len()
    }

    fn stage(&self, i: usize) -> Option<u8> {
        Some(self.stages[i])
    }
}

impl fmt::Display for CentralRanking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, s) in self.stages.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "]")
    }
}

pub(crate) fn composition_of(stages: &[u8], l: usize) -> Vec<u8> {
    let mut sizes = vec![0u8; l];
    for &s in stages {
        sizes[s as usize - 1] += 1;
    }
    sizes.retain(|&c| c > 0);
    sizes
}

/// Penalty weight for pairs tied in exactly one ranking.
///
/// Restricted to `[0.5, 1]`: below 0.5 the distance stops satisfying the
/// triangle inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DistanceConfig {
    p: f64,
}

impl DistanceConfig {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&p) {
            return Err(Error::domain(format!("penalty p must lie in [0.5, 1], got {p}")));
        }
        Ok(DistanceConfig { p })
    }

    pub fn p(self) -> f64 {
        self.p
    }
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig { p: 0.5 }
    }
}

impl TryFrom<f64> for DistanceConfig {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        DistanceConfig::new(p)
    }
}

impl From<DistanceConfig> for f64 {
    fn from(c: DistanceConfig) -> Self {
        c.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    Concordant,
    Discordant,
    /// Tied in both rankings.
    TiedBoth,
    /// Tied in exactly one ranking.
    TiedOne,
    /// At least one of the four stages is missing.
    Dropped,
}

pub fn classify_pair<X, Y>(x: &X, y: &Y, i: usize, j: usize) -> Result<PairClass>
where
    X: StageVector + ?Sized,
    Y: StageVector + ?Sized,
{
    check_same_len(x, y)?;
    if i >= x.len() || j >= x.len() {
        return Err(Error::domain(format!(
            "pair ({i}, {j}) out of range for {} items",
            x.len()
        )));
    }
    if i == j {
        return Err(Error::domain("pair must consist of two distinct items"));
    }
    Ok(classify_unchecked(x, y, i, j))
}

#[inline]
fn classify_unchecked<X, Y>(x: &X, y: &Y, i: usize, j: usize) -> PairClass
where
    X: StageVector + ?Sized,
    Y: StageVector + ?Sized,
{
    match (x.stage(i), x.stage(j), y.stage(i), y.stage(j)) {
        (Some(xi), Some(xj), Some(yi), Some(yj)) => classify_stages(xi, xj, yi, yj),
        _ => PairClass::Dropped,
    }
}

#[inline]
pub(crate) fn classify_stages(xi: u8, xj: u8, yi: u8, yj: u8) -> PairClass {
    let a = xi.cmp(&xj);
    let b = yi.cmp(&yj);
    use std::cmp::Ordering::Equal;
    match (a == Equal, b == Equal) {
        (true, true) => PairClass::TiedBoth,
        (true, false) | (false, true) => PairClass::TiedOne,
        (false, false) if a != b => PairClass::Discordant,
        _ => PairClass::Concordant,
    }
}

/// Counts of each pair class over all unordered pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTally {
    pub concordant: usize,
    pub discordant: usize,
    pub tied_both: usize,
    pub tied_one: usize,
    pub dropped: usize,
}

impl PairTally {
    pub fn distance(&self, cfg: DistanceConfig) -> f64 {
        self.discordant as f64 + cfg.p * self.tied_one as f64
    }

    pub fn total(&self) -> usize {
        self.concordant + self.discordant + self.tied_both + self.tied_one + self.dropped
    }
}

pub fn pair_tally<X, Y>(x: &X, y: &Y) -> Result<PairTally>
where
    X: StageVector + ?Sized,
    Y: StageVector + ?Sized,
{
    check_same_len(x, y)?;
    let n = x.len();
    let mut tally = PairTally::default();
    for i in 0..n {
        for j in i + 1..n {
            match classify_unchecked(x, y, i, j) {
                PairClass::Concordant => tally.concordant += 1,
                PairClass::Discordant => tally.discordant += 1,
                PairClass::TiedBoth => tally.tied_both += 1,
                PairClass::TiedOne => tally.tied_one += 1,
                PairClass::Dropped => tally.dropped += 1,
            }
        }
    }
    Ok(tally)
}

/// `|discordant| + p * |tied in exactly one|`, dropping pairs with a missing stage.
pub fn kendall_tau_partial<X, Y>(x: &X, y: &Y, cfg: DistanceConfig) -> Result<f64>
where
    X: StageVector + ?Sized,
    Y: StageVector + ?Sized,
{
    Ok(pair_tally(x, y)?.distance(cfg))
}

/// Discordant and tied-in-one counts between two complete stage vectors.
#[inline]
pub(crate) fn complete_counts(x: &[u8], y: &[u8]) -> (u32, u32) {
    let n = x.len();
    let (mut discordant, mut tied_one) = (0u32, 0u32);
    for i in 0..n {
        let (xi, yi) = (x[i], y[i]);
        for j in i + 1..n {
            let a = xi as i16 - x[j] as i16;
            let b = yi as i16 - y[j] as i16;
            if (a == 0) != (b == 0) {
                tied_one += 1;
            } else if (a < 0 && b > 0) || (a > 0 && b < 0) {
                discordant += 1;
            }
        }
    }
    (discordant, tied_one)
}

fn check_same_len<X, Y>(x: &X, y: &Y) -> Result<()>
where
    X: StageVector + ?Sized,
    Y: StageVector + ?Sized,
{
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "rankings cover different numbers of items: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}
