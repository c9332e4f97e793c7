//! The Mallows model over the bucket-order space `{1..l}^n`.
//!
//! `f(x) = exp(-d_p(x, center) / lambda) / psi(lambda)` where `psi` sums the
//! numerator over every ranking in the space. The space is enumerated
//! exactly; [`PartitionCache`] memoizes the work per structural class of the
//! center so that repeated evaluations at new `lambda` values cost a few
//! hundred exponentials instead of a pass over `l^n` rankings.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rankings::{complete_counts, composition_of, CentralRanking, DistanceConfig, StageDomain};

/// Default upper bound on `l^n` for anything that enumerates the space.
pub const DEFAULT_GUARD: u64 = 1 << 24;

/// Number of rankings in `{1..l}^n`, saturating at `u128::MAX`.
pub fn space_size(n: usize, l: usize) -> u128 {
    let mut size: u128 = 1;
    for _ in 0..n {
        size = size.saturating_mul(l as u128);
    }
    size
}

pub fn check_guard(n: usize, l: usize, guard: u64) -> Result<u64> {
    let size = space_size(n, l);
    if size > guard as u128 {
        return Err(Error::Capacity { n, l, size, guard });
    }
    Ok(size as u64)
}

/// Every ranking in `{1..l}^n`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct RankingSpace {
    domain: StageDomain,
    next: Option<Vec<u8>>,
    remaining: u64,
}

pub fn enumerate_space(n: usize, domain: StageDomain, guard: u64) -> Result<RankingSpace> {
    if n == 0 {
        return Err(Error::domain("ranking space needs at least one item"));
    }
    let remaining = check_guard(n, domain.l(), guard)?;
    Ok(RankingSpace {
        domain,
        next: Some(vec![1; n]),
        remaining,
    })
}

impl Iterator for RankingSpace {
    type Item = CentralRanking;

    fn next(&mut self) -> Option<CentralRanking> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let l = self.domain.l() as u8;
        let mut k = succ.len();
        let mut carried_out = true;
        while k > 0 {
            k -= 1;
            if succ[k] < l {
                succ[k] += 1;
                carried_out = false;
                break;
            }
            succ[k] = 1;
        }
        if !carried_out {
            self.next = Some(succ);
        }
        self.remaining -= 1;
        Some(CentralRanking::from_raw(current, self.domain))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.remaining as usize;
        (r, Some(r))
    }
}

impl ExactSizeIterator for RankingSpace {}

#[derive(Debug, Clone, PartialEq)]
pub struct MallowsParams {
    pub center: CentralRanking,
    pub lambda: f64,
}

impl MallowsParams {
    pub fn new(center: CentralRanking, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(MallowsParams { center, lambda })
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "spread lambda must be a positive finite number, got {lambda}"
        )));
    }
    Ok(())
}

/// Rankings of the space grouped by their (discordant, tied-in-one) counts
/// against the canonical center of one structural class.
#[derive(Debug)]
struct ClassTable {
    n: usize,
    l: usize,
    composition: Vec<u8>,
    levels: Vec<Level>,
    members: OnceLock<Members>,
}

#[derive(Debug, Clone, Copy)]
struct Level {
    discordant: u32,
    tied_one: u32,
    count: u64,
}

impl Level {
    fn distance(&self, cfg: DistanceConfig) -> f64 {
        self.discordant as f64 + cfg.p() * self.tied_one as f64
    }
}

/// Space codes bucketed by level; `codes[offsets[k]..offsets[k + 1]]` are the members of level `k`.
#[derive(Debug)]
struct Members {
    offsets: Vec<usize>,
    codes: Vec<u32>,
}

impl ClassTable {
    fn build(composition: &[u8], l: usize) -> Self {
        let canonical = canonical_center(composition);
        let n = canonical.len();
        let pairs = n * (n - 1) / 2;
        let width = pairs + 1;
        let mut counts = vec![0u64; width * width];
        for_each_code(n, l, |_, x| {
            let (d, e) = complete_counts(x, &canonical);
            counts[d as usize * width + e as usize] += 1;
        });
        let levels = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &count)| Level {
                discordant: (k / width) as u32,
                tied_one: (k % width) as u32,
                count,
            })
            .collect();
        ClassTable {
            n,
            l,
            composition: composition.to_vec(),
            levels,
            members: OnceLock::new(),
        }
    }

    fn log_psi(&self, lambda: f64, cfg: DistanceConfig) -> f64 {
        log_sum_exp(
            self.levels
                .iter()
                .map(|lv| (lv.count as f64).ln() - lv.distance(cfg) / lambda),
        )
    }

    fn members(&self) -> &Members {
        self.members.get_or_init(|| {
            let canonical = canonical_center(&self.composition);
            let width = self.n * (self.n - 1) / 2 + 1;
            let mut level_of_key = vec![usize::MAX; width * width];
            let mut offsets = Vec::with_capacity(self.levels.len() + 1);
            let mut total = 0usize;
            for (k, lv) in self.levels.iter().enumerate() {
                level_of_key[lv.discordant as usize * width + lv.tied_one as usize] = k;
                offsets.push(total);
                total += lv.count as usize;
            }
            offsets.push(total);
            let mut cursor = offsets.clone();
            let mut codes = vec![0u32; total];
            for_each_code(self.n, self.l, |code, x| {
                let (d, e) = complete_counts(x, &canonical);
                let k = level_of_key[d as usize * width + e as usize];
                codes[cursor[k]] = code as u32;
                cursor[k] += 1;
            });
            Members { offsets, codes }
        })
    }
}

fn canonical_center(composition: &[u8]) -> Vec<u8> {
    composition
        .iter()
        .enumerate()
        .flat_map(|(k, &size)| std::iter::repeat_n(k as u8 + 1, size as usize))
        .collect()
}

/// Visits every stage vector of `{1..l}^n` in lexicographic order with its code.
fn for_each_code(n: usize, l: usize, mut visit: impl FnMut(u64, &[u8])) {
    let total = space_size(n, l) as u64;
    let mut x = vec![1u8; n];
    for code in 0..total {
        visit(code, &x);
        let mut k = n;
        while k > 0 {
            k -= 1;
            if (x[k] as usize) < l {
                x[k] += 1;
                break;
            }
            x[k] = 1;
        }
    }
}

fn decode(mut code: u64, n: usize, l: usize, out: &mut [u8]) {
    for k in (0..n).rev() {
        out[k] = (code % l as u64) as u8 + 1;
        code /= l as u64;
    }
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ClassKey {
    l: usize,
    composition: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PsiKey {
    class: ClassKey,
    p_bits: u64,
    lambda_bits: u64,
}

const MAX_CACHED_VALUES: usize = 1 << 20;

/// Memoized partition functions, shareable between threads.
///
/// Entries are keyed by `l` and the composition of the center (the sizes of
/// its non-empty buckets in stage order) so that every center of the same
/// structural class shares one entry. Values are keyed on the exact bit
/// patterns of `p` and `lambda`, so a cached value is always identical to a
/// fresh computation and sharing a cache never changes results.
#[derive(Debug)]
pub struct PartitionCache {
    guard: u64,
    tables: RwLock<HashMap<ClassKey, Arc<ClassTable>>>,
    values: RwLock<HashMap<PsiKey, f64>>,
}

impl Default for PartitionCache {
    fn default() -> Self {
        Self::new()
    }
}

impl PartitionCache {
    pub fn new() -> Self {
        Self::with_guard(DEFAULT_GUARD)
    }

    pub fn with_guard(guard: u64) -> Self {
        PartitionCache {
            guard,
            tables: RwLock::new(HashMap::new()),
            values: RwLock::new(HashMap::new()),
        }
    }

    pub fn guard(&self) -> u64 {
        self.guard
    }

    /// Number of memoized partition-function values.
    pub fn len(&self) -> usize {
        self.values.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn table(&self, composition: &[u8], l: usize) -> Result<Arc<ClassTable>> {
        let n: usize = composition.iter().map(|&c| c as usize).sum();
        check_guard(n, l, self.guard)?;
        if n > 1 && space_size(n, l) > u32::MAX as u128 {
            return Err(Error::Capacity {
                n,
                l,
                size: space_size(n, l),
                guard: u32::MAX as u64,
            });
        }
        let key = ClassKey {
            l,
            composition: composition.to_vec(),
        };
        if let Some(t) = self.tables.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(ClassTable::build(composition, l));
        let mut tables = self.tables.write().expect("cache lock poisoned");
        Ok(Arc::clone(tables.entry(key).or_insert(built)))
    }

    /// `ln psi` for a center given by its complete stage vector over `{1..l}`.
    ///
    /// The stage vector may be a restriction of a larger center to a subset
    /// of items; the space is then `{1..l}^len`.
    pub(crate) fn log_psi_for_stages(
        &self,
        stages: &[u8],
        l: usize,
        lambda: f64,
        cfg: DistanceConfig,
    ) -> Result<f64> {
        check_lambda(lambda)?;
        let composition = composition_of(stages, l);
        let key = PsiKey {
            class: ClassKey { l, composition },
            p_bits: cfg.p().to_bits(),
            lambda_bits: lambda.to_bits(),
        };
        if let Some(&v) = self.values.read().expect("cache lock poisoned").get(&key) {
            return Ok(v);
        }
        let table = self.table(&key.class.composition, l)?;
        let value = table.log_psi(lambda, cfg);
        let mut values = self.values.write().expect("cache lock poisoned");
        if values.len() >= MAX_CACHED_VALUES {
            values.clear();
        }
        values.insert(key, value);
        Ok(value)
    }
}

/// `ln psi(lambda)`.
pub fn log_partition_function(
    params: &MallowsParams,
    cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<f64> {
    let center = &params.center;
    cache.log_psi_for_stages(center.stages(), center.domain().l(), params.lambda, cfg)
}

/// `psi(lambda) = sum over {1..l}^n of exp(-d_p(x, center) / lambda)`.
pub fn partition_function(
    params: &MallowsParams,
    cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<f64> {
    Ok(log_partition_function(params, cfg, cache)?.exp())
}

pub fn log_pmf(
    x: &CentralRanking,
    params: &MallowsParams,
    cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<f64> {
    let center = &params.center;
    if x.n() != center.n() || x.domain() != center.domain() {
        return Err(Error::domain(
            "ranking and center must share the item count and stage domain",
        ));
    }
    let log_psi = log_partition_function(params, cfg, cache)?;
    let (d, e) = complete_counts(x.stages(), center.stages());
    let distance = d as f64 + cfg.p() * e as f64;
    Ok(-distance / params.lambda - log_psi)
}

/// Exact i.i.d. draws from the model.
///
/// A draw first picks a distance level by inverting the cumulative level
/// mass, then a uniform member of that level; members are stored for the
/// canonical center of the class and mapped onto the actual center's items.
pub fn sample<R: Rng + ?Sized>(
    params: &MallowsParams,
    cfg: DistanceConfig,
    cache: &PartitionCache,
    rng: &mut R,
    count: usize,
) -> Result<Vec<CentralRanking>> {
    let sampler = Sampler::new(params, cfg, cache)?;
    Ok((0..count).map(|_| sampler.draw(rng)).collect())
}

/// A prepared exact sampler for one `(center, lambda)`.
pub(crate) struct Sampler {
    table: Arc<ClassTable>,
    cdf: Vec<f64>,
    order: Vec<usize>,
    domain: StageDomain,
}

impl Sampler {
    pub(crate) fn new(
        params: &MallowsParams,
        cfg: DistanceConfig,
        cache: &PartitionCache,
    ) -> Result<Self> {
        check_lambda(params.lambda)?;
        let center = &params.center;
        let l = center.domain().l();
        let table = cache.table(&center.composition(), l)?;
        let log_w: Vec<f64> = table
            .levels
            .iter()
            .map(|lv| (lv.count as f64).ln() - lv.distance(cfg) / params.lambda)
            .collect();
        let norm = log_sum_exp(log_w.iter().copied());
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = log_w
            .iter()
            .map(|w| {
                acc += (w - norm).exp();
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = f64::INFINITY;
        }
        table.members();
        Ok(Sampler {
            table,
            cdf,
            order: center.stage_order(),
            domain: center.domain(),
        })
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CentralRanking {
        let u: f64 = rng.random();
        let level = self.cdf.partition_point(|&c| c <= u);
        let members = self.table.members();
        let (lo, hi) = (members.offsets[level], members.offsets[level + 1]);
        let code = members.codes[rng.random_range(lo..hi)];
        let n = self.table.n;
        let mut canonical = vec![0u8; n];
        decode(code as u64, n, self.table.l, &mut canonical);
        let mut stages = vec![0u8; n];
        for (k, &item) in self.order.iter().enumerate() {
            stages[item] = canonical[k];
        }
        CentralRanking::from_raw(stages, self.domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankings::kendall_tau_partial;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dom(l: usize) -> StageDomain {
        StageDomain::new(l).unwrap()
    }

    fn center(stages: &[u8], l: usize) -> CentralRanking {
        CentralRanking::new(stages.to_vec(), dom(l)).unwrap()
    }

    /// Direct sum over the space with the reference distance.
    fn naive_psi(c: &CentralRanking, lambda: f64, cfg: DistanceConfig) -> f64 {
        let n = c.n();
        let l = c.domain().l();
        let mut total = 0.0;
        let mut x = vec![1u8; n];
        loop {
            total += (-kendall_tau_partial(x.as_slice(), c.stages(), cfg).unwrap() / lambda).exp();
            let mut k = n;
            loop {
                if k == 0 {
                    return total;
                }
                k -= 1;
                if (x[k] as usize) < l {
                    x[k] += 1;
                    break;
                }
                x[k] = 1;
            }
        }
    }

    #[test]
    fn enumeration_sizes_and_order() {
        let all: Vec<_> = enumerate_space(1, dom(2), DEFAULT_GUARD).unwrap().collect();
        assert_eq!(all, vec![center(&[1], 2), center(&[2], 2)]);
        assert_eq!(enumerate_space(2, dom(3), DEFAULT_GUARD).unwrap().count(), 9);
        let space = enumerate_space(8, dom(4), DEFAULT_GUARD).unwrap();
        assert_eq!(space.len(), 65_536);
        let v: Vec<_> = enumerate_space(3, dom(2), DEFAULT_GUARD).unwrap().collect();
        assert!(v.windows(2).all(|w| w[0].stages() < w[1].stages()));
    }

    #[test]
    fn enumeration_guard() {
        match enumerate_space(5, dom(4), 1000) {
            Err(Error::Capacity { size, guard, .. }) => {
                assert_eq!(size, 1024);
                assert_eq!(guard, 1000);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn psi_examples() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        for lambda in [0.1, 1.0, 7.0] {
            let p = MallowsParams::new(center(&[2], 2), lambda).unwrap();
            assert!((partition_function(&p, cfg, &cache).unwrap() - 2.0).abs() < 1e-15);
        }
        let p = MallowsParams::new(center(&[1, 2], 2), 1.0).unwrap();
        let expected = 1.0 + 2.0 * (-0.5f64).exp() + (-1.0f64).exp();
        let got = partition_function(&p, cfg, &cache).unwrap();
        assert!((got - expected).abs() / expected < 1e-14);

        let p = MallowsParams::new(center(&[1, 2, 2], 3), 1e9).unwrap();
        assert!((partition_function(&p, cfg, &cache).unwrap() - 27.0).abs() < 1e-6);
    }

    #[test]
    fn psi_rejects_bad_lambda() {
        assert!(MallowsParams::new(center(&[1, 2], 2), 0.0).is_err());
        assert!(MallowsParams::new(center(&[1, 2], 2), -1.0).is_err());
        let cache = PartitionCache::new();
        let bad = MallowsParams {
            center: center(&[1, 2], 2),
            lambda: 0.0,
        };
        assert!(partition_function(&bad, DistanceConfig::default(), &cache).is_err());
    }

    #[test]
    fn psi_depends_on_bucket_order_not_just_sizes() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let a = MallowsParams::new(center(&[1, 2, 2, 3], 3), 1.0).unwrap();
        let b = MallowsParams::new(center(&[1, 1, 2, 3], 3), 1.0).unwrap();
        let pa = partition_function(&a, cfg, &cache).unwrap();
        let pb = partition_function(&b, cfg, &cache).unwrap();
        assert!((pa - naive_psi(&a.center, 1.0, cfg)).abs() < 1e-12);
        assert!((pb - naive_psi(&b.center, 1.0, cfg)).abs() < 1e-12);
        assert!((pa - pb).abs() > 0.1);
    }

    #[test]
    fn cache_matches_fresh_computation() {
        let shared = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let c = center(&[3, 1, 2, 2, 1], 3);
        for lambda in [0.3, 1.0, 3.0, 0.3] {
            let p = MallowsParams::new(c.clone(), lambda).unwrap();
            let cached = log_partition_function(&p, cfg, &shared).unwrap();
            let fresh = log_partition_function(&p, cfg, &PartitionCache::new()).unwrap();
            assert_eq!(cached.to_bits(), fresh.to_bits());
            let naive = naive_psi(&c, lambda, cfg).ln();
            assert!((cached - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
        assert_eq!(shared.len(), 3);
    }

    #[test]
    fn modal_log_pmf_and_normalization() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let p = MallowsParams::new(center(&[1, 3, 2], 3), 0.7).unwrap();
        let modal = log_pmf(&p.center, &p, cfg, &cache).unwrap();
        let log_psi = log_partition_function(&p, cfg, &cache).unwrap();
        assert_eq!(modal, -log_psi);
        let total: f64 = enumerate_space(3, dom(3), DEFAULT_GUARD)
            .unwrap()
            .map(|x| log_pmf(&x, &p, cfg, &cache).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_limit() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let p = MallowsParams::new(center(&[1, 2], 2), 1e6).unwrap();
        for x in enumerate_space(2, dom(2), DEFAULT_GUARD).unwrap() {
            let lp = log_pmf(&x, &p, cfg, &cache).unwrap();
            assert!((lp - 0.25f64.ln()).abs() < 1e-3);
        }
    }

    #[test]
    fn concentrated_sampling() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let p = MallowsParams::new(center(&[2, 1, 3], 3), 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = sample(&p, cfg, &cache, &mut rng, 100).unwrap();
        assert!(draws.iter().filter(|d| **d == p.center).count() >= 99);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let p = MallowsParams::new(center(&[1, 2, 2, 4], 4), 1.3).unwrap();
        let a = sample(&p, cfg, &cache, &mut ChaCha8Rng::seed_from_u64(3), 50).unwrap();
        let b = sample(&p, cfg, &PartitionCache::new(), &mut ChaCha8Rng::seed_from_u64(3), 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_limit_sampling_frequencies() {
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let p = MallowsParams::new(center(&[1, 2], 2), 1e6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = sample(&p, cfg, &cache, &mut rng, 100_000).unwrap();
        for x in enumerate_space(2, dom(2), DEFAULT_GUARD).unwrap() {
            let freq = draws.iter().filter(|d| **d == x).count() as f64 / 1e5;
            assert!((freq - 0.25).abs() < 0.01, "{x}: {freq}");
        }
    }

    #[test]
    fn sampled_draws_follow_the_actual_center() {
        // A center whose items are not in stage order exercises the item mapping.
        let cache = PartitionCache::new();
        let cfg = DistanceConfig::default();
        let p = MallowsParams::new(center(&[3, 1, 2, 1], 3), 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = sample(&p, cfg, &cache, &mut rng, 200).unwrap();
        let at_zero = draws
            .iter()
            .filter(|d| kendall_tau_partial(*d, &p.center, cfg).unwrap() == 0.0)
            .count();
        assert!(at_zero >= 190);
    }
}
