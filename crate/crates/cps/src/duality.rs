//! Time reversal of event timelines and pathwise verification of the duality
//! relation.
//!
//! Reversing a timeline over `[0, t]` reflects every event time, turns each
//! arrow around while exchanging its endpoint types (`ad` and `da` swap, `aa`
//! and `dd` stay), keeps recovery kinds, and rebuilds switch events so the
//! reversed activity trajectory satisfies `A_rev(s) = A(t - s)` off the jump
//! set. The dual process evolves on the reversed timeline like a switching
//! process with the cross infection rates exchanged.

use crate::error::{CpsError, Result};
use crate::graphical::EventTimeline;
use crate::rng::StreamRng;
use crate::sites::SiteSet;
use crate::timegrid::ticks_from_time;

/// A reversed substrate plus the activity state it starts from (the forward
/// activity at the pivot time, recomputed here rather than trusted from the
/// caller).
#[derive(Clone, Debug)]
pub struct ReversedTimeline {
    pub timeline: EventTimeline,
    pub initial_activity: SiteSet,
}

/// Reverses `timeline` around `t`, reconstructing the terminal activity from
/// `a0`. Requires a symmetric neighborhood so every arrow has a reverse slot.
pub fn reverse_timeline(
    timeline: &EventTimeline,
    t: f64,
    a0: &SiteSet,
) -> Result<ReversedTimeline> {
    let t_ticks = ticks_from_time(t.max(0.0));
    if !(t > 0.0) || t_ticks > timeline.horizon_ticks {
        return Err(CpsError::precondition(
            "reversal pivot must lie in (0, horizon]",
        ));
    }
    if !timeline.lattice.symmetric_neighborhood() {
        return Err(CpsError::Unsupported(
            "timeline reversal needs a symmetric neighborhood".to_string(),
        ));
    }
    let n = timeline.lattice.n_sites();

    // Switch streams: walk each site's forward switch sequence, track the
    // piecewise activity, and emit a reversed event at each reflected jump
    // whose direction restores the forward pre-jump state. Events exactly at
    // the pivot fold into the terminal state instead of reflecting to time 0.
    let mut rev_sw_ad: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut rev_sw_da: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut terminal = SiteSet::empty(n);
    for site in 0..n {
        let ad = &timeline.sw_ad[site];
        let da = &timeline.sw_da[site];
        let mut ia = 0;
        let mut id = 0;
        let mut state = a0.contains(site);
        while ia < ad.len() || id < da.len() {
            // Equal ticks apply sigma before rho, as in the forward sweep.
            let take_ad = match (ad.get(ia), da.get(id)) {
                (Some(&ta), Some(&td)) => ta <= td,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!(),
            };
            let (tick, to_active) = if take_ad {
                ia += 1;
                (ad[ia - 1], false)
            } else {
                id += 1;
                (da[id - 1], true)
            };
            if tick > t_ticks {
                break;
            }
            let pre = state;
            state = to_active;
            if tick < t_ticks {
                let rev = t_ticks - tick;
                if pre {
                    rev_sw_da[site].push(rev);
                } else {
                    rev_sw_ad[site].push(rev);
                }
            }
        }
        if state {
            terminal.insert(site);
        }
        rev_sw_ad[site].reverse();
        rev_sw_da[site].reverse();
    }

    let reflect = |ticks: &[u64]| -> Vec<u64> {
        let mut out: Vec<u64> = ticks
            .iter()
            .copied()
            .filter(|&u| u < t_ticks)
            .map(|u| t_ticks - u)
            .collect();
        out.reverse();
        out
    };

    let rev_rec_a: Vec<Vec<u64>> = timeline.rec_a.iter().map(|v| reflect(v)).collect();
    let rev_rec_d: Vec<Vec<u64>> = timeline.rec_d.iter().map(|v| reflect(v)).collect();

    // Arrows: type indices are (aa, ad, da, dd); turning an arrow around
    // exchanges the endpoint types, so ad and da trade places.
    let n_slots = timeline.lattice.n_slots();
    let type_swap = [0usize, 2, 1, 3];
    let mut rev_arrows: [Vec<Vec<u64>>; 4] = std::array::from_fn(|_| vec![Vec::new(); n_slots]);
    for (ti, per_slot) in timeline.arrows.iter().enumerate() {
        for (slot, ticks) in per_slot.iter().enumerate() {
            if ticks.is_empty() {
                continue;
            }
            let rslot = timeline.lattice.reversed_slot(slot)?;
            rev_arrows[type_swap[ti]][rslot] = reflect(ticks);
        }
    }

    let timeline = EventTimeline {
        lattice: timeline.lattice.clone(),
        rates: timeline.rates.swap_ad_da(),
        horizon_ticks: t_ticks,
        seed: timeline.seed,
        rec_a: rev_rec_a,
        rec_d: rev_rec_d,
        sw_ad: rev_sw_ad,
        sw_da: rev_sw_da,
        arrows: rev_arrows,
    };
    Ok(ReversedTimeline {
        timeline,
        initial_activity: terminal,
    })
}

/// Evaluates the three intersection indicators of the duality relation on one
/// shared substrate and reports whether they agree at every grid time.
///
/// The indicators are: the forward process from `(i_set, a0)` hitting `j_set`
/// at `t`; the forward state at `s` meeting the dual state evolved for
/// duration `t - s` from `(j_set, A_t)`; and `i_set` meeting the dual state
/// evolved for the full duration `t`.
pub fn check_duality_relation(
    timeline: &EventTimeline,
    i_set: &SiteSet,
    a0: &SiteSet,
    j_set: &SiteSet,
    t: f64,
    s_grid: &[f64],
) -> Result<bool> {
    let t_ticks = ticks_from_time(t.max(0.0));
    if !(t > 0.0) || t_ticks > timeline.horizon_ticks {
        return Err(CpsError::precondition(
            "duality pivot must lie in (0, horizon]",
        ));
    }
    if s_grid
        .iter()
        .any(|&s| s < 0.0 || ticks_from_time(s.max(0.0)) > t_ticks)
    {
        return Err(CpsError::precondition("grid times must lie in [0, t]"));
    }

    let mut s_ticks: Vec<u64> = s_grid.iter().map(|&s| ticks_from_time(s)).collect();
    s_ticks.sort_unstable();
    s_ticks.dedup();

    let mut fwd_ticks = s_ticks.clone();
    if fwd_ticks.last() != Some(&t_ticks) {
        fwd_ticks.push(t_ticks);
    }
    let fwd = timeline.evolve_ticks(i_set, a0, &fwd_ticks)?;
    let at_t = fwd.last().unwrap();

    let reversed = reverse_timeline(timeline, t, a0)?;
    debug_assert_eq!(reversed.initial_activity, at_t.active);

    let mut dual_ticks: Vec<u64> = s_ticks.iter().map(|&s| t_ticks - s).collect();
    if dual_ticks.last() != Some(&t_ticks) {
        dual_ticks.push(t_ticks);
    }
    dual_ticks.sort_unstable();
    dual_ticks.dedup();
    let dual = reversed
        .timeline
        .evolve_ticks(j_set, &reversed.initial_activity, &dual_ticks)?;
    let dual_at = |ticks: u64| -> &SiteSet {
        let idx = dual_ticks.iter().position(|&d| d == ticks).unwrap();
        &dual[idx].infected
    };

    let e1 = at_t.infected.intersects(j_set);
    let e3 = i_set.intersects(dual_at(t_ticks));
    if e1 != e3 {
        return Ok(false);
    }
    for (k, &s) in s_ticks.iter().enumerate() {
        let e2 = fwd[k].infected.intersects(dual_at(t_ticks - s));
        if e2 != e1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Randomized pathwise duality suite: returns the number of instances run,
/// failing on the first violation.
pub fn run_duality_suite(instances: u32, seed: u64) -> Result<u32> {
    use crate::lattice::LatticeSpec;
    use crate::rates::RateSet;

    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[crate::rng::streams::SCRATCH, 70, inst as u64]);
        let n = 3 + rng.below(18) as usize;
        let lattice = std::sync::Arc::new(LatticeSpec::ring(n).compile().unwrap());
        let rates = RateSet::plain(
            2.5 * rng.f64_half_open(),
            2.5 * rng.f64_half_open(),
            2.5 * rng.f64_half_open(),
            2.5 * rng.f64_half_open(),
            1.5 * rng.f64_half_open(),
            1.5 * rng.f64_half_open(),
            0.25 + 1.5 * rng.f64_half_open(),
            0.25 + 1.5 * rng.f64_half_open(),
        );
        let t = 1.0 + 3.0 * rng.f64_half_open();
        let timeline = crate::graphical::sample_timeline(&lattice, &rates, t, rng.next_u64())?;
        let i_set = SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(0.3)));
        let j_set = SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(0.3)));
        let a0 = SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(0.5)));
        let s_grid: Vec<f64> = (0..5).map(|_| t * rng.f64_half_open()).collect();
        if !check_duality_relation(&timeline, &i_set, &a0, &j_set, t, &s_grid)? {
            return Err(CpsError::CouplingViolation {
                relation: "duality-relation",
                time: t,
                detail: format!("indicator mismatch on instance {inst} (n={n})"),
            });
        }
    }
    Ok(instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphical::sample_timeline;
    use crate::lattice::LatticeSpec;
    use crate::rates::RateSet;
    use crate::timegrid::ticks_from_time;
    use std::sync::Arc;

    fn zero_timeline(n: usize, horizon: f64) -> EventTimeline {
        let lattice = Arc::new(LatticeSpec::ring(n).compile().unwrap());
        let rates = RateSet::plain(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        sample_timeline(&lattice, &rates, horizon, 1).unwrap()
    }

    #[test]
    fn empty_timeline_reverses_empty() {
        let tl = zero_timeline(4, 5.0);
        let rev = reverse_timeline(&tl, 5.0, &SiteSet::from_sites(4, [0, 2])).unwrap();
        assert_eq!(rev.timeline.total_events(), 0);
        assert_eq!(rev.initial_activity, SiteSet::from_sites(4, [0, 2]));
    }

    #[test]
    fn single_arrow_reversal() {
        let mut tl = zero_timeline(4, 5.0);
        let slot = (0..tl.lattice.n_slots())
            .find(|&s| tl.lattice.slot_source(s) == Some(0) && tl.lattice.slot_target(s) == 1)
            .unwrap();
        let rslot = tl.lattice.reversed_slot(slot).unwrap();
        let tick = ticks_from_time(2.0);

        // aa stays aa, endpoints swap, time reflects.
        tl.arrows[0][slot] = vec![tick];
        let rev = reverse_timeline(&tl, 5.0, &SiteSet::empty(4)).unwrap();
        assert_eq!(rev.timeline.arrows[0][rslot], vec![ticks_from_time(3.0)]);
        assert_eq!(rev.timeline.arrows[1][rslot], Vec::<u64>::new());

        // ad becomes da.
        let mut tl2 = zero_timeline(4, 5.0);
        tl2.arrows[1][slot] = vec![tick];
        let rev = reverse_timeline(&tl2, 5.0, &SiteSet::empty(4)).unwrap();
        assert_eq!(rev.timeline.arrows[2][rslot], vec![ticks_from_time(3.0)]);
        assert!(rev.timeline.arrows[1][rslot].is_empty());
    }

    #[test]
    fn reversal_is_involution() {
        let lattice = Arc::new(LatticeSpec::ring(6).compile().unwrap());
        let rates = RateSet::plain(1.2, 0.8, 0.5, 0.3, 0.9, 0.4, 1.0, 1.3);
        for seed in 0..20 {
            let tl = sample_timeline(&lattice, &rates, 7.0, seed).unwrap();
            let a0 =
                SiteSet::from_sites(6, (0..6).filter(|i| (i + seed as usize).is_multiple_of(2)));
            let rev = reverse_timeline(&tl, 7.0, &a0).unwrap();
            let back = reverse_timeline(&rev.timeline, 7.0, &rev.initial_activity).unwrap();
            assert!(back.timeline.events_eq(&tl), "seed {seed}");
            assert_eq!(back.initial_activity, a0);
        }
    }

    #[test]
    fn reversed_activity_mirrors_forward() {
        let lattice = Arc::new(LatticeSpec::ring(5).compile().unwrap());
        let rates = RateSet::plain(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.5, 0.8);
        let t = 6.0;
        for seed in 0..20 {
            let tl = sample_timeline(&lattice, &rates, t, seed).unwrap();
            let a0 = SiteSet::from_sites(5, [0, 3]);
            let rev = reverse_timeline(&tl, t, &a0).unwrap();
            for site in 0..5 {
                for k in 1..40 {
                    // Probe off the jump set.
                    let s = t * k as f64 / 40.0 + 1e-7;
                    if s >= t {
                        continue;
                    }
                    let fwd = tl.activity_at(&a0, site, t - s);
                    let dual = rev.timeline.activity_at(&rev.initial_activity, site, s);
                    assert_eq!(fwd, dual, "seed {seed} site {site} s {s}");
                }
            }
        }
    }

    #[test]
    fn relation_trivial_cases() {
        // Intersecting start with no events: all indicators true.
        let tl = zero_timeline(4, 5.0);
        let i = SiteSet::from_sites(4, [1]);
        let j = SiteSet::from_sites(4, [1, 2]);
        let a0 = SiteSet::full(4);
        assert!(check_duality_relation(&tl, &i, &a0, &j, 5.0, &[0.0, 2.5, 5.0]).unwrap());

        // Empty initial infection: all indicators false, hence equal.
        let empty = SiteSet::empty(4);
        assert!(check_duality_relation(&tl, &empty, &a0, &j, 5.0, &[1.0]).unwrap());
    }

    #[test]
    fn relation_holds_on_random_instances() {
        assert_eq!(run_duality_suite(150, 99).unwrap(), 150);
    }
}
