//! Graphical representation: Poisson event substrates, activity
//! reconstruction, infection evolution through typed arrows, and
//! infection-path queries.
//!
//! A timeline holds one sorted tick array per stream: two recovery streams
//! and two switch streams per site, four typed arrow streams per directed
//! neighbor slot. Streams are keyed individually by the master seed, so
//! coupled processes can share them while adding private extras.

use std::io::Write;
use std::sync::Arc;

use crate::error::{CpsError, Result};
use crate::lattice::Lattice;
use crate::rates::{Activity, RateSet, Variant};
use crate::rng::{streams, StreamRng};
use crate::sites::{Configuration, SiteSet};
use crate::timegrid::{sample_poisson_ticks, ticks_from_time, time_from_ticks, validate_horizon};

/// Arrow types in stream order.
pub const ARROW_TYPES: [(Activity, Activity); 4] = [
    (Activity::Active, Activity::Active),
    (Activity::Active, Activity::Dormant),
    (Activity::Dormant, Activity::Active),
    (Activity::Dormant, Activity::Dormant),
];

pub fn arrow_type_label(idx: usize) -> &'static str {
    ["aa", "ad", "da", "dd"][idx]
}

/// Total order on simultaneous events: site events before arrow events, then
/// by entity index, then by stream kind. Ties in time are measure zero in the
/// model; the order makes their resolution deterministic.
#[inline]
pub(crate) fn order_key(class: u8, entity: u64, kind: u8) -> u64 {
    ((class as u64) << 62) | (entity << 8) | kind as u64
}

/// One merged event: sorting key plus the caller's stream table index.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MergedEvent {
    pub ticks: u64,
    pub order: u64,
    pub stream: u32,
    pub pos: u32,
}

/// Merges per-stream sorted tick arrays into one tie-break-ordered event
/// list. `streams[i]` carries the ticks and the order-key base of stream `i`
/// (the base already encodes class, entity and kind).
pub(crate) fn merge_events(streams_in: &[(&[u64], u64)]) -> Vec<MergedEvent> {
    let total: usize = streams_in.iter().map(|(t, _)| t.len()).sum();
    let mut out = Vec::with_capacity(total);
    for (i, (ticks, key)) in streams_in.iter().enumerate() {
        for (pos, &t) in ticks.iter().enumerate() {
            out.push(MergedEvent {
                ticks: t,
                order: *key,
                stream: i as u32,
                pos: pos as u32,
            });
        }
    }
    out.sort_unstable_by_key(|e| (e.ticks, e.order));
    out
}

/// Site-level stream kinds used in order keys.
pub(crate) const KIND_REC_A: u8 = 0;
pub(crate) const KIND_REC_D: u8 = 1;
pub(crate) const KIND_SW_AD: u8 = 2;
pub(crate) const KIND_SW_DA: u8 = 3;
pub(crate) const KIND_ARROW_BASE: u8 = 4;

/// Realized Poisson events over a finite horizon.
#[derive(Clone, Debug)]
pub struct EventTimeline {
    pub(crate) lattice: Arc<Lattice>,
    pub(crate) rates: RateSet,
    pub(crate) horizon_ticks: u64,
    pub(crate) seed: u64,
    pub(crate) rec_a: Vec<Vec<u64>>,
    pub(crate) rec_d: Vec<Vec<u64>>,
    pub(crate) sw_ad: Vec<Vec<u64>>,
    pub(crate) sw_da: Vec<Vec<u64>>,
    /// Indexed `[arrow type][slot]`.
    pub(crate) arrows: [Vec<Vec<u64>>; 4],
}

/// Source/target of an infection-path query: from `(source, 0)` to
/// `(target, time)`.
#[derive(Clone, Copy, Debug)]
pub struct PathQuery {
    pub source: usize,
    pub target: usize,
    pub time: f64,
}

/// Samples the independent Poisson streams of the construction.
///
/// Deterministic in `(lattice, rates, horizon, seed)`. Requires the plain
/// variant with finite rates and symmetric switching; the blocking and
/// infection-dormancy variants are served by the direct simulator.
pub fn sample_timeline(
    lattice: &Arc<Lattice>,
    rates: &RateSet,
    horizon: f64,
    seed: u64,
) -> Result<EventTimeline> {
    rates.validate()?;
    if rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "event timelines cover the plain variant only".to_string(),
        ));
    }
    let delta_d = rates.finite_delta_d()?;
    let (sigma, rho) = rates.symmetric_switching()?;
    let horizon_ticks = validate_horizon(horizon)?;

    let n = lattice.n_sites();
    let site_stream = |kind: u64, rate: f64| -> Vec<Vec<u64>> {
        (0..n)
            .map(|site| {
                let mut rng = StreamRng::from_key(seed, &[kind, site as u64]);
                sample_poisson_ticks(&mut rng, rate, horizon_ticks)
            })
            .collect()
    };
    let rec_a = site_stream(streams::REC_A, rates.delta_a);
    let rec_d = site_stream(streams::REC_D, delta_d);
    let sw_ad = site_stream(streams::SW_AD, sigma);
    let sw_da = site_stream(streams::SW_DA, rho);

    let arrow_kinds = [
        streams::ARROW_AA,
        streams::ARROW_AD,
        streams::ARROW_DA,
        streams::ARROW_DD,
    ];
    let lambdas = [
        rates.lambda_aa,
        rates.lambda_ad,
        rates.lambda_da,
        rates.lambda_dd,
    ];
    let n_slots = lattice.n_slots();
    let arrows = std::array::from_fn(|ti| {
        (0..n_slots)
            .map(|slot| {
                if lattice.slot_source(slot).is_none() {
                    return Vec::new();
                }
                let mut rng = StreamRng::from_key(seed, &[arrow_kinds[ti], slot as u64]);
                sample_poisson_ticks(&mut rng, lambdas[ti], horizon_ticks)
            })
            .collect()
    });

    Ok(EventTimeline {
        lattice: Arc::clone(lattice),
        rates: rates.clone(),
        horizon_ticks,
        seed,
        rec_a,
        rec_d,
        sw_ad,
        sw_da,
        arrows,
    })
}

impl EventTimeline {
    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn rates(&self) -> &RateSet {
        &self.rates
    }

    pub fn horizon(&self) -> f64 {
        time_from_ticks(self.horizon_ticks)
    }

    pub fn horizon_ticks(&self) -> u64 {
        self.horizon_ticks
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_events(&self) -> usize {
        let site: usize = [&self.rec_a, &self.rec_d, &self.sw_ad, &self.sw_da]
            .iter()
            .map(|v| v.iter().map(Vec::len).sum::<usize>())
            .sum();
        let arrows: usize = self
            .arrows
            .iter()
            .map(|per_slot| per_slot.iter().map(Vec::len).sum::<usize>())
            .sum();
        site + arrows
    }

    /// Event-by-event equality (streams, horizon and lattice shape).
    pub fn events_eq(&self, other: &EventTimeline) -> bool {
        self.horizon_ticks == other.horizon_ticks
            && self.lattice.n_sites() == other.lattice.n_sites()
            && self.rec_a == other.rec_a
            && self.rec_d == other.rec_d
            && self.sw_ad == other.sw_ad
            && self.sw_da == other.sw_da
            && self.arrows == other.arrows
    }

    /// Activity of `site` at `time`, right-continuous: active iff no switch
    /// happened and the site started active, or the last switch up to and
    /// including `time` points dormant-to-active.
    pub fn activity_at(&self, a0: &SiteSet, site: usize, time: f64) -> bool {
        self.activity_at_ticks(a0, site, ticks_from_time(time))
    }

    pub(crate) fn activity_at_ticks(&self, a0: &SiteSet, site: usize, t: u64) -> bool {
        let last_ad = last_le(&self.sw_ad[site], t);
        let last_da = last_le(&self.sw_da[site], t);
        match (last_ad, last_da) {
            (None, None) => a0.contains(site),
            (Some(_), None) => false,
            (None, Some(_)) => true,
            // Equal ticks resolve sigma before rho, leaving the site active.
            (Some(ad), Some(da)) => da >= ad,
        }
    }

    /// Evolves `(X, A)` forward and returns right-continuous snapshots at the
    /// requested times.
    pub fn evolve(
        &self,
        x0: &SiteSet,
        a0: &SiteSet,
        sample_times: &[f64],
    ) -> Result<Vec<Configuration>> {
        let ticks: Vec<u64> = sample_times.iter().map(|&t| ticks_from_time(t)).collect();
        self.evolve_ticks(x0, a0, &ticks)
    }

    pub(crate) fn evolve_ticks(
        &self,
        x0: &SiteSet,
        a0: &SiteSet,
        sample_ticks: &[u64],
    ) -> Result<Vec<Configuration>> {
        for w in sample_ticks.windows(2) {
            if w[0] > w[1] {
                return Err(CpsError::precondition("sample times must be sorted"));
            }
        }
        if let Some(&last) = sample_ticks.last() {
            if last > self.horizon_ticks {
                return Err(CpsError::precondition(
                    "sample times must lie within the horizon",
                ));
            }
        }

        let n = self.lattice.n_sites();
        let mut table: Vec<(&[u64], u64)> = Vec::with_capacity(4 * n + 4 * self.lattice.n_slots());
        let mut meta: Vec<StreamMeta> = Vec::with_capacity(table.capacity());
        for site in 0..n {
            let e = site as u64;
            table.push((&self.rec_a[site], order_key(0, e, KIND_REC_A)));
            meta.push(StreamMeta::RecA(site));
            table.push((&self.rec_d[site], order_key(0, e, KIND_REC_D)));
            meta.push(StreamMeta::RecD(site));
            table.push((&self.sw_ad[site], order_key(0, e, KIND_SW_AD)));
            meta.push(StreamMeta::SwAd(site));
            table.push((&self.sw_da[site], order_key(0, e, KIND_SW_DA)));
            meta.push(StreamMeta::SwDa(site));
        }
        for (ti, per_slot) in self.arrows.iter().enumerate() {
            for (slot, ticks) in per_slot.iter().enumerate() {
                if ticks.is_empty() {
                    continue;
                }
                table.push((ticks, order_key(1, slot as u64, KIND_ARROW_BASE + ti as u8)));
                meta.push(StreamMeta::Arrow { type_idx: ti, slot });
            }
        }
        let events = merge_events(&table);

        let mut x = x0.clone();
        let mut a = a0.clone();
        let mut out = Vec::with_capacity(sample_ticks.len());
        let mut si = 0;
        for ev in &events {
            while si < sample_ticks.len() && sample_ticks[si] < ev.ticks {
                out.push(Configuration::new(x.clone(), a.clone()));
                si += 1;
            }
            if si >= sample_ticks.len() {
                break;
            }
            self.apply_plain_event(&meta[ev.stream as usize], &mut x, &mut a);
        }
        while si < sample_ticks.len() {
            out.push(Configuration::new(x.clone(), a.clone()));
            si += 1;
        }
        Ok(out)
    }

    fn apply_plain_event(&self, meta: &StreamMeta, x: &mut SiteSet, a: &mut SiteSet) {
        match *meta {
            StreamMeta::RecA(site) => {
                if a.contains(site) {
                    x.remove(site);
                }
            }
            StreamMeta::RecD(site) => {
                if !a.contains(site) {
                    x.remove(site);
                }
            }
            StreamMeta::SwAd(site) => {
                a.remove(site);
            }
            StreamMeta::SwDa(site) => {
                a.insert(site);
            }
            StreamMeta::Arrow { type_idx, slot } => {
                let from = match self.lattice.slot_source(slot) {
                    Some(f) => f,
                    None => return,
                };
                let to = self.lattice.slot_target(slot);
                let (src_act, dst_act) = ARROW_TYPES[type_idx];
                if x.contains(from)
                    && (a.contains(from) == (src_act == Activity::Active))
                    && (a.contains(to) == (dst_act == Activity::Active))
                {
                    x.insert(to);
                }
            }
        }
    }

    /// Whether an infection path runs from `(query.source, 0)` to
    /// `(query.target, query.time)`.
    ///
    /// Searches witness paths directly: a site reached at time `e` stays
    /// usable until its first effective recovery after `e`; matching arrows
    /// inside that window extend the path. Membership agrees with [`evolve`]
    /// at every query time.
    pub fn infection_path_exists(&self, a0: &SiteSet, query: &PathQuery) -> Result<bool> {
        if query.time < 0.0 || ticks_from_time(query.time.max(0.0)) > self.horizon_ticks {
            return Err(CpsError::precondition(
                "path query time must lie within the horizon",
            ));
        }
        let t_query = ticks_from_time(query.time);
        let mut explored: Vec<Vec<(u64, u64)>> = vec![Vec::new(); self.lattice.n_sites()];
        let mut stack: Vec<(usize, u64)> = vec![(query.source, 0)];
        while let Some((site, entry)) = stack.pop() {
            if explored[site].iter().any(|&(a, b)| a <= entry && entry < b) {
                continue;
            }
            let death = self.first_effective_recovery_after(a0, site, entry);
            explored[site].push((entry, death));
            if site == query.target && entry <= t_query && t_query < death {
                return Ok(true);
            }
            for &slot in self.lattice.out_slots(site) {
                let slot = slot as usize;
                let to = self.lattice.slot_target(slot);
                for (ti, &(src_act, dst_act)) in ARROW_TYPES.iter().enumerate() {
                    let ticks = &self.arrows[ti][slot];
                    let start = ticks.partition_point(|&u| u <= entry);
                    for &u in &ticks[start..] {
                        if u >= death || u > t_query {
                            break;
                        }
                        if self.activity_at_ticks(a0, site, u) == (src_act == Activity::Active)
                            && self.activity_at_ticks(a0, to, u) == (dst_act == Activity::Active)
                        {
                            stack.push((to, u));
                        }
                    }
                }
            }
        }
        Ok(false)
    }

    /// First recovery event after `entry` that is effective under the
    /// activity trajectory, or `u64::MAX`.
    fn first_effective_recovery_after(&self, a0: &SiteSet, site: usize, entry: u64) -> u64 {
        let ra = &self.rec_a[site];
        let rd = &self.rec_d[site];
        let mut ia = ra.partition_point(|&u| u <= entry);
        let mut id = rd.partition_point(|&u| u <= entry);
        loop {
            let next_a = ra.get(ia).copied();
            let next_d = rd.get(id).copied();
            // Recoveries on one site never share a tick with each other in
            // sampled timelines; take the earlier candidate.
            let (tick, is_a) = match (next_a, next_d) {
                (None, None) => return u64::MAX,
                (Some(u), None) => (u, true),
                (None, Some(u)) => (u, false),
                (Some(ua), Some(ud)) => {
                    if ua <= ud {
                        (ua, true)
                    } else {
                        (ud, false)
                    }
                }
            };
            let active = self.activity_at_ticks(a0, site, tick);
            if active == is_a {
                return tick;
            }
            if is_a {
                ia += 1;
            } else {
                id += 1;
            }
        }
    }

    /// Writes the merged event list, one event per line: `t s <site> <kind>`
    /// for site events, `t e <from> <to> <type>` for arrows. Byte output is a
    /// pure function of the timeline.
    pub fn write_events(&self, w: &mut impl Write) -> std::io::Result<()> {
        let n = self.lattice.n_sites();
        let mut table: Vec<(&[u64], u64)> = Vec::new();
        let mut meta: Vec<StreamMeta> = Vec::new();
        for site in 0..n {
            let e = site as u64;
            table.push((&self.rec_a[site], order_key(0, e, KIND_REC_A)));
            meta.push(StreamMeta::RecA(site));
            table.push((&self.rec_d[site], order_key(0, e, KIND_REC_D)));
            meta.push(StreamMeta::RecD(site));
            table.push((&self.sw_ad[site], order_key(0, e, KIND_SW_AD)));
            meta.push(StreamMeta::SwAd(site));
            table.push((&self.sw_da[site], order_key(0, e, KIND_SW_DA)));
            meta.push(StreamMeta::SwDa(site));
        }
        for (ti, per_slot) in self.arrows.iter().enumerate() {
            for (slot, ticks) in per_slot.iter().enumerate() {
                if !ticks.is_empty() {
                    table.push((ticks, order_key(1, slot as u64, KIND_ARROW_BASE + ti as u8)));
                    meta.push(StreamMeta::Arrow { type_idx: ti, slot });
                }
            }
        }
        for ev in merge_events(&table) {
            let t = time_from_ticks(ev.ticks);
            match meta[ev.stream as usize] {
                StreamMeta::RecA(site) => writeln!(w, "{t} s {site} delta_a")?,
                StreamMeta::RecD(site) => writeln!(w, "{t} s {site} delta_d")?,
                StreamMeta::SwAd(site) => writeln!(w, "{t} s {site} sigma")?,
                StreamMeta::SwDa(site) => writeln!(w, "{t} s {site} rho")?,
                StreamMeta::Arrow { type_idx, slot } => {
                    let from = self.lattice.slot_source(slot).unwrap();
                    let to = self.lattice.slot_target(slot);
                    writeln!(w, "{t} e {from} {to} {}", arrow_type_label(type_idx))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum StreamMeta {
    RecA(usize),
    RecD(usize),
    SwAd(usize),
    SwDa(usize),
    Arrow { type_idx: usize, slot: usize },
}

fn last_le(ticks: &[u64], t: u64) -> Option<u64> {
    let idx = ticks.partition_point(|&u| u <= t);
    if idx == 0 {
        None
    } else {
        Some(ticks[idx - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::rates::{preset, BaseRates, Preset};

    fn cp_rates(lambda: f64, delta: f64, sigma: f64, rho: f64) -> RateSet {
        preset(
            Preset::Cp,
            &BaseRates {
                lambda,
                delta_a: delta,
                delta_d: None,
                sigma,
                rho,
            },
        )
        .unwrap()
    }

    fn ring(n: usize) -> Arc<Lattice> {
        Arc::new(LatticeSpec::ring(n).compile().unwrap())
    }

    #[test]
    fn zero_rates_give_empty_timeline() {
        let lat = ring(4);
        let rates = cp_rates(0.0, 0.0, 0.0, 0.0);
        let tl = sample_timeline(&lat, &rates, 10.0, 1).unwrap();
        assert_eq!(tl.total_events(), 0);
    }

    #[test]
    fn deterministic_in_seed() {
        let lat = ring(6);
        let rates = cp_rates(1.5, 0.7, 1.0, 2.0);
        let a = sample_timeline(&lat, &rates, 20.0, 42).unwrap();
        let b = sample_timeline(&lat, &rates, 20.0, 42).unwrap();
        assert!(a.events_eq(&b));
        let c = sample_timeline(&lat, &rates, 20.0, 43).unwrap();
        assert!(!a.events_eq(&c));
    }

    #[test]
    fn rejects_bad_inputs() {
        let lat = ring(4);
        let rates = cp_rates(1.0, 1.0, 1.0, 1.0);
        assert!(sample_timeline(&lat, &rates, 0.0, 1).is_err());
        let cpb = preset(
            Preset::Cpb,
            &BaseRates {
                lambda: 2.0,
                delta_a: 1.0,
                delta_d: None,
                sigma: 1.0,
                rho: 1.0,
            },
        )
        .unwrap();
        assert!(sample_timeline(&lat, &cpb, 5.0, 1).is_err());
    }

    #[test]
    fn activity_rules() {
        let lat = ring(3);
        let rates = cp_rates(0.0, 0.0, 0.0, 0.0);
        let mut tl = sample_timeline(&lat, &rates, 10.0, 1).unwrap();
        let a0 = SiteSet::from_sites(3, [0]);
        // No switches: initial activity persists.
        assert!(tl.activity_at(&a0, 0, 5.0));
        assert!(!tl.activity_at(&a0, 1, 5.0));
        // Last switch wins.
        tl.sw_ad[0] = vec![ticks_from_time(1.0)];
        tl.sw_da[0] = vec![ticks_from_time(2.0)];
        assert!(!tl.activity_at(&a0, 0, 1.5));
        assert!(tl.activity_at(&a0, 0, 2.0));
        assert!(tl.activity_at(&a0, 0, 9.0));
    }

    #[test]
    fn activity_stationary_fraction() {
        // sigma = rho = 1 from a fixed start: P(active at t scaled large)
        // approaches 1/2; over 10^4 seeds the average is within 3 sigma.
        let lat = ring(1);
        let rates = cp_rates(0.0, 0.0, 1.0, 1.0);
        let n = 10_000;
        let mut active = 0usize;
        for seed in 0..n {
            let tl = sample_timeline(&lat, &rates, 100.0, seed as u64).unwrap();
            let a0 = SiteSet::empty(1);
            if tl.activity_at(&a0, 0, 100.0) {
                active += 1;
            }
        }
        let frac = active as f64 / n as f64;
        let tol = 3.0 * 0.5 / (n as f64).sqrt();
        assert!((frac - 0.5).abs() < tol, "frac {frac}");
    }

    #[test]
    fn evolve_single_events() {
        let lat = ring(3);
        let rates = cp_rates(0.0, 0.0, 0.0, 0.0);
        let base = sample_timeline(&lat, &rates, 10.0, 1).unwrap();

        // Recovery of an infected active site.
        let mut tl = base.clone();
        tl.rec_a[0] = vec![ticks_from_time(1.0)];
        let x0 = SiteSet::from_sites(3, [0]);
        let a0 = SiteSet::from_sites(3, [0, 1, 2]);
        let snaps = tl.evolve(&x0, &a0, &[0.5, 2.0]).unwrap();
        assert!(snaps[0].infected.contains(0));
        assert!(!snaps[1].infected.contains(0));

        // Recovery mark of the wrong type at a dormant site does nothing.
        let mut tl = base.clone();
        tl.rec_a[0] = vec![ticks_from_time(1.0)];
        let snaps = tl.evolve(&x0, &SiteSet::empty(3), &[2.0]).unwrap();
        assert!(snaps[0].infected.contains(0));

        // Matching arrow transmits.
        let mut tl = base.clone();
        // Slot for arrow from 0 into 1: target 1, offset -1 (index of offset
        // +1 maps 1+1=2... locate the slot whose source is 0 and target 1).
        let slot = (0..tl.lattice.n_slots())
            .find(|&s| tl.lattice.slot_source(s) == Some(0) && tl.lattice.slot_target(s) == 1)
            .unwrap();
        tl.arrows[0][slot] = vec![ticks_from_time(1.0)];
        let snaps = tl.evolve(&x0, &a0, &[2.0]).unwrap();
        assert!(snaps[0].infected.contains(1));
        // Mismatched type does not transmit.
        let mut tl2 = base.clone();
        tl2.arrows[1][slot] = vec![ticks_from_time(1.0)];
        let snaps = tl2.evolve(&x0, &a0, &[2.0]).unwrap();
        assert!(!snaps[0].infected.contains(1));
    }

    #[test]
    fn evolve_monotone_and_additive() {
        let lat = ring(8);
        let rates = cp_rates(2.0, 1.0, 1.0, 1.0);
        for seed in 0..50 {
            let tl = sample_timeline(&lat, &rates, 8.0, seed).unwrap();
            let a0 = SiteSet::from_sites(8, (0..8).filter(|i| i % 2 == 0));
            let i1 = SiteSet::from_sites(8, [0]);
            let i2 = SiteSet::from_sites(8, [3, 4]);
            let times = [1.0, 3.0, 8.0];
            let s1 = tl.evolve(&i1, &a0, &times).unwrap();
            let s2 = tl.evolve(&i2, &a0, &times).unwrap();
            let su = tl.evolve(&i1.union(&i2), &a0, &times).unwrap();
            for k in 0..times.len() {
                // Attractivity and additivity on the shared substrate.
                assert!(s1[k].infected.is_subset_of(&su[k].infected));
                assert!(s2[k].infected.is_subset_of(&su[k].infected));
                assert_eq!(s1[k].infected.union(&s2[k].infected), su[k].infected);
                // Activity ignores the infection start.
                assert_eq!(s1[k].active, s2[k].active);
            }
        }
    }

    #[test]
    fn path_examples() {
        let lat = ring(3);
        let rates = cp_rates(0.0, 0.0, 0.0, 0.0);
        let base = sample_timeline(&lat, &rates, 10.0, 1).unwrap();
        let a0 = SiteSet::from_sites(3, [0, 1, 2]);

        // Source equals target with no recovery events.
        let q = PathQuery {
            source: 0,
            target: 0,
            time: 10.0,
        };
        assert!(base.infection_path_exists(&a0, &q).unwrap());

        // Recovery before the only outgoing arrow breaks the path.
        let mut tl = base.clone();
        tl.rec_a[0] = vec![ticks_from_time(1.0)];
        let slot = (0..tl.lattice.n_slots())
            .find(|&s| tl.lattice.slot_source(s) == Some(0) && tl.lattice.slot_target(s) == 1)
            .unwrap();
        tl.arrows[0][slot] = vec![ticks_from_time(2.0)];
        let q = PathQuery {
            source: 0,
            target: 1,
            time: 10.0,
        };
        assert!(!tl.infection_path_exists(&a0, &q).unwrap());
        // Arrow before the recovery connects.
        tl.arrows[0][slot] = vec![ticks_from_time(0.5)];
        assert!(tl.infection_path_exists(&a0, &q).unwrap());
    }

    #[test]
    fn path_agrees_with_evolve() {
        let lat = ring(7);
        let rates = RateSet::plain(1.5, 0.8, 0.6, 0.4, 0.9, 0.5, 1.0, 1.2);
        for seed in 0..1000 {
            let tl = sample_timeline(&lat, &rates, 6.0, seed).unwrap();
            let a0 =
                SiteSet::from_sites(7, (0..7).filter(|i| (seed as usize + i).is_multiple_of(2)));
            let source = (seed % 7) as usize;
            let x0 = SiteSet::from_sites(7, [source]);
            let t = 1.0 + (seed % 5) as f64;
            let snap = &tl.evolve(&x0, &a0, &[t]).unwrap()[0];
            for target in 0..7 {
                let q = PathQuery {
                    source,
                    target,
                    time: t,
                };
                assert_eq!(
                    tl.infection_path_exists(&a0, &q).unwrap(),
                    snap.infected.contains(target),
                    "seed {seed} target {target}"
                );
            }
        }
    }

    #[test]
    fn export_is_reproducible() {
        let lat = ring(4);
        let rates = cp_rates(1.0, 0.5, 1.0, 1.0);
        let tl = sample_timeline(&lat, &rates, 5.0, 9).unwrap();
        let mut a = Vec::new();
        tl.write_events(&mut a).unwrap();
        let mut b = Vec::new();
        sample_timeline(&lat, &rates, 5.0, 9)
            .unwrap()
            .write_events(&mut b)
            .unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut last_t = 0.0;
        for line in text.lines() {
            let t: f64 = line.split_whitespace().next().unwrap().parse().unwrap();
            assert!(t >= last_t);
            last_t = t;
        }
    }
}
