//! One-to-one device–RIS association.
//!
//! The main algorithm is device-proposing deferred acceptance over a rate
//! matrix. Exhaustive, greedy and random baselines share the same
//! [`Association`] type so that every scheme is scored by one evaluator.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Preference utilities `R[l][k]` in bits/s/Hz, rows are panels.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    rows: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("rate matrix must be a non-empty L×K table".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("rates must be finite and nonnegative".into()));
        }
        Ok(Self { rows })
    }

    pub fn from_fn(num_ris: usize, num_devices: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(
            (0..num_ris)
                .map(|l| (0..num_devices).map(|k| f(l, k)).collect())
                .collect(),
        )
    }

    pub fn num_ris(&self) -> usize {
        self.rows.len()
    }

    pub fn num_devices(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.rows[l][k]
    }
}

/// Sorted preference lists; ties go to the lower index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceLists {
    /// For each device, panels from most to least preferred.
    pub device_prefs: Vec<Vec<usize>>,
    /// For each panel, devices from most to least preferred.
    pub ris_prefs: Vec<Vec<usize>>,
}

fn sorted_desc(values: impl Iterator<Item = f64>) -> Vec<usize> {
    let v: Vec<f64> = values.collect();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // Stable sort keeps lower indices first among equal rates.
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx
}

pub fn build_preferences(rates: &RateMatrix) -> PreferenceLists {
    let (l_count, k_count) = (rates.num_ris(), rates.num_devices());
    PreferenceLists {
        device_prefs: (0..k_count)
            .map(|k| sorted_desc((0..l_count).map(|l| rates.get(l, k))))
            .collect(),
        ris_prefs: (0..l_count)
            .map(|l| sorted_desc((0..k_count).map(|k| rates.get(l, k))))
            .collect(),
    }
}

/// Partial one-to-one map between `K` devices and `L` panels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Association {
    ris_of: Vec<Option<usize>>,
    device_of: Vec<Option<usize>>,
}

impl Association {
    pub fn empty(num_devices: usize, num_ris: usize) -> Self {
        Self {
            ris_of: vec![None; num_devices],
            device_of: vec![None; num_ris],
        }
    }

    /// Builds an association from `(device, ris)` pairs.
    pub fn from_pairs(num_devices: usize, num_ris: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(num_devices, num_ris);
        for &(k, l) in pairs {
            if k >= num_devices || l >= num_ris {
                return Err(Error::InvalidAssociation(format!("pair ({k}, {l}) out of range")));
            }
            if a.ris_of[k].is_some() || a.device_of[l].is_some() {
                return Err(Error::InvalidAssociation(format!(
                    "pair ({k}, {l}) reuses a device or panel"
                )));
            }
            a.ris_of[k] = Some(l);
            a.device_of[l] = Some(k);
        }
        Ok(a)
    }

    /// Builds an association from each device's panel.
    pub fn from_ris_of(num_ris: usize, ris_of: &[Option<usize>]) -> Result<Self> {
        let pairs: Vec<_> = ris_of
            .iter()
            .enumerate()
            .filter_map(|(k, l)| l.map(|l| (k, l)))
            .collect();
        Self::from_pairs(ris_of.len(), num_ris, &pairs)
    }

    pub fn num_devices(&self) -> usize {
        self.ris_of.len()
    }

    pub fn num_ris(&self) -> usize {
        self.device_of.len()
    }

    pub fn ris_of(&self, k: usize) -> Option<usize> {
        self.ris_of[k]
    }

    pub fn device_of(&self, l: usize) -> Option<usize> {
        self.device_of[l]
    }

    /// `(device, ris)` pairs in ascending device order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ris_of.iter().enumerate().filter_map(|(k, l)| l.map(|l| (k, l)))
    }

    pub fn matched_count(&self) -> usize {
        self.ris_of.iter().flatten().count()
    }

    /// Devices without a panel.
    pub fn unmatched(&self) -> Vec<usize> {
        (0..self.ris_of.len()).filter(|&k| self.ris_of[k].is_none()).collect()
    }

    /// Binary `K×L` assignment matrix Υ.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.ris_of
            .iter()
            .map(|l| (0..self.device_of.len()).map(|j| u8::from(*l == Some(j))).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingOutcome {
    pub association: Association,
    pub proposals: usize,
}

/// Device-proposing deferred acceptance. Panels keep the proposer they rank
/// highest; ties in the rate matrix resolve to the lower device index.
pub fn deferred_acceptance(prefs: &PreferenceLists) -> MatchingOutcome {
    let k_count = prefs.device_prefs.len();
    let l_count = prefs.ris_prefs.len();
    let mut rank = vec![vec![usize::MAX; k_count]; l_count];
    for (l, list) in prefs.ris_prefs.iter().enumerate() {
        for (r, &k) in list.iter().enumerate() {
            rank[l][k] = r;
        }
    }
    let mut next = vec![0usize; k_count];
    let mut holder: Vec<Option<usize>> = vec![None; l_count];
    let mut free: std::collections::VecDeque<usize> = (0..k_count).collect();
    let mut proposals = 0;
    while let Some(k) = free.pop_front() {
        let Some(&l) = prefs.device_prefs[k].get(next[k]) else {
            continue;
        };
        next[k] += 1;
        proposals += 1;
        match holder[l] {
            None => holder[l] = Some(k),
            Some(current) if rank[l][k] < rank[l][current] => {
                holder[l] = Some(k);
                free.push_back(current);
            }
            Some(_) => free.push_front(k),
        }
    }
    let mut association = Association::empty(k_count, l_count);
    for (l, k) in holder.iter().enumerate() {
        if let Some(k) = *k {
            association.ris_of[k] = Some(l);
            association.device_of[l] = Some(k);
        }
    }
    MatchingOutcome { association, proposals }
}

/// Builds preferences from `rates` and runs deferred acceptance.
pub fn stable_match(rates: &RateMatrix) -> MatchingOutcome {
    deferred_acceptance(&build_preferences(rates))
}

/// `Ok(None)` when stable, otherwise the first blocking `(device, ris)` pair.
/// A pair blocks when both sides strictly prefer each other by rate; being
/// unmatched is worse than any partner.
pub fn is_stable(assoc: &Association, rates: &RateMatrix) -> Result<Option<(usize, usize)>> {
    if assoc.num_devices() != rates.num_devices() || assoc.num_ris() != rates.num_ris() {
        return Err(Error::InvalidAssociation(format!(
            "association is {}x{}, rate matrix is {}x{}",
            assoc.num_devices(),
            assoc.num_ris(),
            rates.num_devices(),
            rates.num_ris()
        )));
    }
    for k in 0..rates.num_devices() {
        let mine = assoc.ris_of(k).map(|l| rates.get(l, k));
        for l in 0..rates.num_ris() {
            let device_wants = mine.is_none_or(|v| rates.get(l, k) > v);
            let ris_wants = assoc
                .device_of(l)
                .is_none_or(|other| rates.get(l, k) > rates.get(l, other));
            if device_wants && ris_wants && assoc.ris_of(k) != Some(l) {
                return Ok(Some((k, l)));
            }
        }
    }
    Ok(None)
}

/// Largest `min(K, L)` exhaustive search accepts.
pub const EXHAUSTIVE_LIMIT: usize = 9;

/// Scores every maximal one-to-one matching and returns the best one
/// together with its score. Ties keep the first candidate in lexicographic
/// order.
pub fn exhaustive_search<F>(num_devices: usize, num_ris: usize, mut evaluate: F) -> Result<(Association, f64)>
where
    F: FnMut(&Association) -> f64,
{
    let size = num_devices.min(num_ris);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(size));
    }
    // Injective map from the smaller side into the larger one.
    let devices_small = num_devices <= num_ris;
    let (small, large) = if devices_small {
        (num_devices, num_ris)
    } else {
        (num_ris, num_devices)
    };
    let mut best: Option<(Association, f64)> = None;
    let mut chosen = Vec::with_capacity(small);
    let mut used = vec![false; large];
    let mut visit = |chosen: &[usize]| {
        let pairs: Vec<(usize, usize)> = chosen
            .iter()
            .enumerate()
            .map(|(i, &j)| if devices_small { (i, j) } else { (j, i) })
            .collect();
        let assoc = Association::from_pairs(num_devices, num_ris, &pairs).expect("injective by construction");
        let score = evaluate(&assoc);
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((assoc, score));
        }
    };
    enumerate_injections(small, &mut used, &mut chosen, &mut visit);
    Ok(best.expect("at least one candidate"))
}

fn enumerate_injections(small: usize, used: &mut [bool], chosen: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if chosen.len() == small {
        visit(chosen);
        return;
    }
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            chosen.push(j);
            enumerate_injections(small, used, chosen, visit);
            chosen.pop();
            used[j] = false;
        }
    }
}

/// Every maximal one-to-one matching between `K` devices and `L` panels.
pub fn all_matchings(num_devices: usize, num_ris: usize) -> Vec<Association> {
    let mut out = Vec::new();
    let _ = exhaustive_search(num_devices, num_ris, |a| {
        out.push(a.clone());
        0.0
    });
    out
}

/// Greedy baseline: each unmatched device proposes to its best panel that
/// is still free; a panel with several proposers accepts one uniformly at
/// random. Rejected devices retry on the remaining free panels.
pub fn greedy_association<R: Rng + ?Sized>(rates: &RateMatrix, rng: &mut R) -> Association {
    let prefs = build_preferences(rates);
    let (k_count, l_count) = (rates.num_devices(), rates.num_ris());
    let mut assoc = Association::empty(k_count, l_count);
    loop {
        let mut proposers: Vec<Vec<usize>> = vec![Vec::new(); l_count];
        let mut any = false;
        for k in 0..k_count {
            if assoc.ris_of[k].is_some() {
                continue;
            }
            if let Some(&l) = prefs.device_prefs[k].iter().find(|&&l| assoc.device_of[l].is_none()) {
                proposers[l].push(k);
                any = true;
            }
        }
        if !any {
            return assoc;
        }
        for (l, group) in proposers.iter().enumerate() {
            if let Some(&k) = group.choose(rng) {
                assoc.ris_of[k] = Some(l);
                assoc.device_of[l] = Some(k);
            }
        }
    }
}

/// Uniformly random maximal one-to-one matching.
pub fn random_association<R: Rng + ?Sized>(num_devices: usize, num_ris: usize, rng: &mut R) -> Association {
    let mut assoc = Association::empty(num_devices, num_ris);
    if num_devices <= num_ris {
        let mut panels: Vec<usize> = (0..num_ris).collect();
        panels.shuffle(rng);
        for (k, &l) in panels.iter().take(num_devices).enumerate() {
            assoc.ris_of[k] = Some(l);
            assoc.device_of[l] = Some(k);
        }
    } else {
        let mut devices: Vec<usize> = (0..num_devices).collect();
        devices.shuffle(rng);
        for (l, &k) in devices.iter().take(num_ris).enumerate() {
            assoc.ris_of[k] = Some(l);
            assoc.device_of[l] = Some(k);
        }
    }
    assoc
}
