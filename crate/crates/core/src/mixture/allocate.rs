use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::registry::{self, ResourceClass};
use super::{CellMap, Category, CorpusStats, MixtureError, MixturePlan};

type Key = (String, Category);

/// Exact (pre-rounding) allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct Shares {
    pub stage: u8,
    /// min(budget, supply); the targets sum to exactly this.
    pub total: u64,
    pub targets: BTreeMap<(String, Category), BigRational>,
}

impl Shares {
    pub fn language_share(&self, lang: &str) -> BigRational {
        self.targets
            .iter()
            .filter(|((l, _), _)| l == lang)
            .map(|(_, v)| v.clone())
            .sum()
    }
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Max-min-fair split of `total` over `avail`: every party gets
/// `min(avail_i, c)` for the one water level `c` that uses up
/// `min(total, Σ avail)`.
pub fn water_fill(avail: &[u64], total: u64) -> Vec<BigRational> {
    let supply: u128 = avail.iter().map(|&a| a as u128).sum();
    let mut remaining = rat(total.min(u64::try_from(supply).unwrap_or(u64::MAX)));
    let mut order: Vec<usize> = (0..avail.len()).collect();
    order.sort_by_key(|&i| avail[i]);
    let mut out = vec![BigRational::zero(); avail.len()];
    for (pos, &i) in order.iter().enumerate() {
        let open = rat((avail.len() - pos) as u64);
        let a = rat(avail[i]);
        if &a * &open <= remaining {
            remaining -= &a;
            out[i] = a;
        } else {
            let level = &remaining / &open;
            for &j in &order[pos..] {
                out[j] = level.clone();
            }
            break;
        }
    }
    out
}

fn check_inputs(stats: &CorpusStats, budget: u64) -> Result<u64, MixtureError> {
    if budget == 0 {
        return Err(MixtureError::ZeroBudget);
    }
    let supply = stats.total();
    if supply == 0 {
        return Err(MixtureError::NoSupply);
    }
    Ok(budget.min(supply))
}

/// Stage-1 exact shares: water-filling over language totals, then a split
/// within each language proportional to category availability.
pub fn stage1_shares(stats: &CorpusStats, budget: u64) -> Result<Shares, MixtureError> {
    let total = check_inputs(stats, budget)?;
    let langs: Vec<&String> = stats.tokens.keys().collect();
    let avail: Vec<u64> = langs.iter().map(|l| stats.language_total(l)).collect();
    let levels = water_fill(&avail, total);
    let mut targets = BTreeMap::new();
    for ((lang, a), s) in langs.iter().zip(&avail).zip(levels) {
        for (&cat, &n) in &stats.tokens[*lang] {
            let t = if *a == 0 { BigRational::zero() } else { &s * rat(n) / rat(*a) };
            targets.insert(((*lang).clone(), cat), t);
        }
    }
    Ok(Shares { stage: 1, total, targets })
}

fn boost_ratio(name: &'static str, value: f64) -> Result<BigRational, MixtureError> {
    if !value.is_finite() || value < 1.0 {
        return Err(MixtureError::InvalidBoost { name, value });
    }
    BigRational::from_float(value).ok_or(MixtureError::InvalidBoost { name, value })
}

/// Stage-2 exact shares: stage-1 shares scaled by the boosts, then fitted to
/// availability by proportional filling with caps. Cells that would exceed
/// their availability are pinned to it and the rest is refilled until no
/// cell overflows.
pub fn stage2_shares(
    stats: &CorpusStats,
    budget: u64,
    low_boost: f64,
    textbook_boost: f64,
) -> Result<Shares, MixtureError> {
    let low = boost_ratio("low_boost", low_boost)?;
    let textbook = boost_ratio("textbook_boost", textbook_boost)?;
    let base = stage1_shares(stats, budget)?;

    let mut weights = BTreeMap::new();
    for ((lang, cat), share) in &base.targets {
        let class = registry::classify_resource(lang)
            .map_err(|e| MixtureError::UnknownLanguage(e.0))?;
        let mut w = share.clone();
        if class == ResourceClass::Low {
            w *= &low;
        }
        if *cat == Category::Textbook {
            w *= &textbook;
        }
        weights.insert((lang.clone(), *cat), w);
    }

    let mut targets: BTreeMap<(String, Category), BigRational> =
        weights.keys().map(|k| (k.clone(), BigRational::zero())).collect();
    let mut open: Vec<&Key> = weights
        .iter()
        .filter(|(_, w)| !w.is_zero())
        .map(|(k, _)| k)
        .collect();
    let mut remaining = rat(base.total);
    while !open.is_empty() {
        let mass: BigRational = open.iter().map(|k| weights[*k].clone()).sum();
        let scale = &remaining / mass;
        let (full, free): (Vec<&Key>, Vec<&Key>) = open
            .into_iter()
            .partition(|k| &scale * &weights[*k] > rat(stats.get(&k.0, k.1)));
        if full.is_empty() {
            for k in free {
                targets.insert(k.clone(), &scale * &weights[k]);
            }
            break;
        }
        for k in full {
            let cap = rat(stats.get(&k.0, k.1));
            remaining -= &cap;
            targets.insert(k.clone(), cap);
        }
        open = free;
    }
    Ok(Shares { stage: 2, total: base.total, targets })
}

/// Largest-remainder rounding of `targets` to integers summing to `total`,
/// each at most its cap. Larger fractional parts round up first; ties go to
/// the earlier item.
fn largest_remainder(targets: &[(BigRational, u64)], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = targets
        .iter()
        .map(|(t, cap)| t.floor().to_integer().to_u64().unwrap_or(0).min(*cap))
        .collect();
    let mut deficit = total.saturating_sub(out.iter().sum());
    let fracs: Vec<BigRational> = targets.iter().map(|(t, _)| t.fract()).collect();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| match fracs[b].cmp(&fracs[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    while deficit > 0 {
        let before = deficit;
        for &i in &order {
            if deficit == 0 {
                break;
            }
            if out[i] < targets[i].1 {
                out[i] += 1;
                deficit -= 1;
            }
        }
        assert!(deficit < before, "rounding targets exceed the caps");
    }
    out
}

/// Rounds exact shares to whole tokens in two levels: language totals
/// first, then each language's total over its categories. Languages and
/// categories are visited in code order, which breaks remainder ties.
pub fn round_plan(shares: &Shares, stats: &CorpusStats) -> (BTreeMap<String, u64>, CellMap) {
    let mut by_lang: BTreeMap<&str, Vec<(Category, BigRational)>> = BTreeMap::new();
    for ((lang, cat), t) in &shares.targets {
        by_lang.entry(lang).or_default().push((*cat, t.clone()));
    }
    let lang_targets: Vec<(BigRational, u64)> = by_lang
        .iter()
        .map(|(lang, cells)| (cells.iter().map(|(_, t)| t.clone()).sum(), stats.language_total(lang)))
        .collect();
    let lang_totals = largest_remainder(&lang_targets, shares.total);

    let mut totals = BTreeMap::new();
    let mut cells = CellMap::new();
    for ((lang, parts), lang_total) in by_lang.iter().zip(lang_totals) {
        let cell_targets: Vec<(BigRational, u64)> =
            parts.iter().map(|(cat, t)| (t.clone(), stats.get(lang, *cat))).collect();
        let rounded = largest_remainder(&cell_targets, lang_total);
        cells.insert(
            (*lang).to_owned(),
            parts.iter().map(|(cat, _)| *cat).zip(rounded).collect(),
        );
        totals.insert((*lang).to_owned(), lang_total);
    }
    (totals, cells)
}

fn into_plan(shares: &Shares, stats: &CorpusStats, budget: u64) -> MixturePlan {
    let (language_totals, allocations) = round_plan(shares, stats);
    MixturePlan {
        stage: shares.stage,
        unit: stats.unit,
        budget,
        total: shares.total,
        low_boost: None,
        textbook_boost: None,
        language_totals,
        allocations,
    }
}

pub fn stage1_allocation(stats: &CorpusStats, budget: u64) -> Result<MixturePlan, MixtureError> {
    let shares = stage1_shares(stats, budget)?;
    Ok(into_plan(&shares, stats, budget))
}

pub fn stage2_allocation(
    stats: &CorpusStats,
    budget: u64,
    low_boost: f64,
    textbook_boost: f64,
) -> Result<MixturePlan, MixtureError> {
    let shares = stage2_shares(stats, budget, low_boost, textbook_boost)?;
    let mut plan = into_plan(&shares, stats, budget);
    plan.low_boost = Some(low_boost);
    plan.textbook_boost = Some(textbook_boost);
    Ok(plan)
}
