//! Shared-randomness couplings between process variants, statistical
//! stochastic-domination tests at the closed-form bound rates, and
//! switching-speed scaling-limit diagnostics.
//!
//! The pathwise couplings evolve both processes in lockstep over one merged
//! event sequence and assert their containment after every event; a single
//! violation is an error, never a statistic.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{simulate_direct, Extinction, Trajectory};
use crate::error::{CpsError, Result};
use crate::graphical::{merge_events, order_key, EventTimeline, ARROW_TYPES};
use crate::lattice::Lattice;
use crate::rates::{alpha, param_dominates, Activity, RateSet, Variant};
use crate::rng::{streams, StreamRng};
use crate::sites::{Configuration, SiteSet};
use crate::stats::{mean_se, normal_quantile};
use crate::timegrid::{
    mark_to_unit, sample_marked_poisson_ticks, sample_poisson_ticks, ticks_from_time,
    time_from_ticks, validate_horizon,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CouplingRelation {
    Monotone,
    DominatingCp,
    CpsOverCpb,
    CpidOverCpd,
    CpreeSwitchMonotone,
}

/// Which stream families were shared and which were private to one side;
/// counts are realized event counts.
#[derive(Clone, Debug, Default)]
pub struct StreamAudit {
    pub shared: Vec<(String, usize)>,
    pub lower_private: Vec<(String, usize)>,
    pub upper_private: Vec<(String, usize)>,
}

impl StreamAudit {
    pub fn lower_private_events(&self) -> usize {
        self.lower_private.iter().map(|(_, c)| c).sum()
    }

    pub fn upper_private_events(&self) -> usize {
        self.upper_private.iter().map(|(_, c)| c).sum()
    }
}

/// Two trajectories produced from one shared substrate. `lower` is the
/// pathwise-contained process.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub lower: Trajectory,
    pub upper: Trajectory,
    pub relation: CouplingRelation,
    pub audit: StreamAudit,
}

// ---------------------------------------------------------------------------
// lockstep plumbing

struct CStream {
    ticks: Vec<u64>,
    marks: Option<Vec<u64>>,
    key: u64,
    sem: Sem,
}

#[derive(Clone, Copy, Debug)]
enum Sem {
    /// Switch applied to the activity sets selected by `mask`.
    SwAd(u8, usize),
    SwDa(u8, usize),
    /// Recovery mark of the active kind for the processes in `mask`.
    RecActive(u8, usize),
    /// Recovery mark of the dormant kind.
    RecDormant(u8, usize),
    /// Recovery effective regardless of activity.
    RecAlways(u8, usize),
    /// Typed arrow for the processes in `mask`.
    Arrow(u8, usize, usize),
    /// Arrow carrying an acceptance mark (rate-`lambda_max` master stream).
    ArrowMarked(usize),
    /// Type-free arrow (environment variant: types never block).
    ArrowUntyped(u8, usize),
    /// Diagonal arrow: infects a dormant healthy target and activates it.
    ArrowDiagonal(u8, usize),
}

fn site_poisson(seed: u64, kind: u64, site: usize, rate: f64, horizon: u64) -> Vec<u64> {
    let mut rng = StreamRng::from_key(seed, &[kind, site as u64]);
    sample_poisson_ticks(&mut rng, rate, horizon)
}

fn slot_poisson(seed: u64, kind: u64, slot: usize, rate: f64, horizon: u64) -> Vec<u64> {
    let mut rng = StreamRng::from_key(seed, &[kind, slot as u64]);
    sample_poisson_ticks(&mut rng, rate, horizon)
}

fn slot_marked(seed: u64, kind: u64, slot: usize, rate: f64, horizon: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rng = StreamRng::from_key(seed, &[kind, slot as u64]);
    sample_marked_poisson_ticks(&mut rng, rate, horizon)
}

struct TrackedTraj {
    infected: Vec<usize>,
    active: Vec<usize>,
    snaps: Vec<Configuration>,
    ext: Option<f64>,
}

impl TrackedTraj {
    fn new(x0: &SiteSet) -> Self {
        TrackedTraj {
            infected: Vec::new(),
            active: Vec::new(),
            snaps: Vec::new(),
            ext: if x0.is_empty() { Some(0.0) } else { None },
        }
    }

    fn on_event(&mut self, time: f64, x: &SiteSet) {
        if self.ext.is_none() && x.is_empty() {
            self.ext = Some(time);
        }
    }

    fn snapshot(&mut self, x: &SiteSet, a: &SiteSet) {
        self.infected.push(x.len());
        self.active.push(a.len());
        self.snaps.push(Configuration::new(x.clone(), a.clone()));
    }

    fn finish(self, sample_times: &[f64], horizon: f64) -> Trajectory {
        Trajectory {
            sample_times: sample_times.to_vec(),
            infected_counts: self.infected,
            active_counts: self.active,
            snapshots: Some(self.snaps),
            extinction: match self.ext {
                Some(t) => Extinction::Extinct(t),
                None => Extinction::Censored(horizon),
            },
        }
    }
}

fn violation(relation: &'static str, ticks: u64, detail: String) -> CpsError {
    CpsError::CouplingViolation {
        relation,
        time: time_from_ticks(ticks),
        detail,
    }
}

fn validate_samples(sample_times: &[f64], horizon: f64) -> Result<Vec<u64>> {
    for w in sample_times.windows(2) {
        if w[0] > w[1] {
            return Err(CpsError::precondition("sample times must be sorted"));
        }
    }
    if sample_times.iter().any(|&t| t < 0.0 || t > horizon) {
        return Err(CpsError::precondition(
            "sample times must lie in [0, horizon]",
        ));
    }
    Ok(sample_times.iter().map(|&t| ticks_from_time(t)).collect())
}

const LOWER: u8 = 0b01;
const UPPER: u8 = 0b10;
const BOTH: u8 = 0b11;

/// Lockstep state of two processes over one merged event sequence. The
/// infection containment `x[0] ⊆ x[1]` — and, with separate activity sets,
/// the ordering picked by `activity_order` — is asserted after every event.
struct Lockstep {
    x: [SiteSet; 2],
    a: [SiteSet; 2],
    shared_activity: bool,
    /// Which side must hold the larger active set (when not shared):
    /// +1 means `a[1] ⊇ a[0]`, -1 means `a[0] ⊇ a[1]`, 0 disables the check.
    activity_order: i8,
    relation: &'static str,
    /// Type-dependent acceptance rates and the master rate for marked
    /// arrow streams.
    marked: Option<(RateSet, f64)>,
}

impl Lockstep {
    fn check(&self, ticks: u64) -> Result<()> {
        if !self.x[0].is_subset_of(&self.x[1]) {
            return Err(violation(
                self.relation,
                ticks,
                "lower infected set escaped the upper one".into(),
            ));
        }
        match self.activity_order {
            1 => {
                if !self.a[0].is_subset_of(&self.a[1]) {
                    return Err(violation(
                        self.relation,
                        ticks,
                        "activity containment failed".into(),
                    ));
                }
            }
            -1 if !self.a[1].is_subset_of(&self.a[0]) => {
                return Err(violation(
                    self.relation,
                    ticks,
                    "activity containment failed".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    #[inline]
    fn active(&self, proc_idx: usize, site: usize) -> bool {
        if self.shared_activity {
            self.a[0].contains(site)
        } else {
            self.a[proc_idx].contains(site)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_lockstep(
    lattice: &Lattice,
    cstreams: &[CStream],
    mut state: Lockstep,
    sample_ticks: &[u64],
    horizon: f64,
    sample_times: &[f64],
    relation: CouplingRelation,
    audit: StreamAudit,
) -> Result<CoupledPair> {
    let refs: Vec<(&[u64], u64)> = cstreams
        .iter()
        .map(|s| (s.ticks.as_slice(), s.key))
        .collect();
    let events = merge_events(&refs);

    let mut lower = TrackedTraj::new(&state.x[0]);
    let mut upper = TrackedTraj::new(&state.x[1]);
    let mut si = 0usize;

    let snapshot_both = |state: &Lockstep, lower: &mut TrackedTraj, upper: &mut TrackedTraj| {
        let (a_lo, a_up) = if state.shared_activity {
            (&state.a[0], &state.a[0])
        } else {
            (&state.a[0], &state.a[1])
        };
        lower.snapshot(&state.x[0], a_lo);
        upper.snapshot(&state.x[1], a_up);
    };

    for ev in &events {
        while si < sample_ticks.len() && sample_ticks[si] < ev.ticks {
            snapshot_both(&state, &mut lower, &mut upper);
            si += 1;
        }
        let s = &cstreams[ev.stream as usize];
        let t_ev = time_from_ticks(ev.ticks);
        match s.sem {
            Sem::SwAd(mask, site) => {
                if state.shared_activity {
                    if mask != 0 {
                        state.a[0].remove(site);
                    }
                } else {
                    for p in 0..2 {
                        if mask & (1 << p) != 0 {
                            state.a[p].remove(site);
                        }
                    }
                }
            }
            Sem::SwDa(mask, site) => {
                if state.shared_activity {
                    if mask != 0 {
                        state.a[0].insert(site);
                    }
                } else {
                    for p in 0..2 {
                        if mask & (1 << p) != 0 {
                            state.a[p].insert(site);
                        }
                    }
                }
            }
            Sem::RecActive(mask, site) => {
                for p in 0..2 {
                    if mask & (1 << p) != 0 && state.active(p, site) {
                        state.x[p].remove(site);
                    }
                }
            }
            Sem::RecDormant(mask, site) => {
                for p in 0..2 {
                    if mask & (1 << p) != 0 && !state.active(p, site) {
                        state.x[p].remove(site);
                    }
                }
            }
            Sem::RecAlways(mask, site) => {
                for p in 0..2 {
                    if mask & (1 << p) != 0 {
                        state.x[p].remove(site);
                    }
                }
            }
            Sem::Arrow(mask, type_idx, slot) => {
                let from = lattice.slot_source(slot).unwrap();
                let to = lattice.slot_target(slot);
                let (src_act, dst_act) = ARROW_TYPES[type_idx];
                for p in 0..2 {
                    if mask & (1 << p) == 0 {
                        continue;
                    }
                    if state.x[p].contains(from)
                        && state.active(p, from) == (src_act == Activity::Active)
                        && state.active(p, to) == (dst_act == Activity::Active)
                    {
                        state.x[p].insert(to);
                    }
                }
            }
            Sem::ArrowMarked(slot) => {
                let from = lattice.slot_source(slot).unwrap();
                let to = lattice.slot_target(slot);
                // Upper process (basic contact process) takes every event.
                if state.x[1].contains(from) {
                    state.x[1].insert(to);
                }
                // Lower process accepts the event with probability
                // lambda(type)/lambda_max, using the attached mark.
                if state.x[0].contains(from) {
                    let (rates, l_max) = state.marked.as_ref().expect("marked arrows need rates");
                    let mark = s.marks.as_ref().expect("marked stream")[ev.pos as usize];
                    let src = if state.active(0, from) {
                        Activity::Active
                    } else {
                        Activity::Dormant
                    };
                    let dst = if state.active(0, to) {
                        Activity::Active
                    } else {
                        Activity::Dormant
                    };
                    let type_rate = rates.lambda(src, dst);
                    if *l_max > 0.0 && mark_to_unit(mark) < type_rate / l_max {
                        state.x[0].insert(to);
                    }
                }
            }
            Sem::ArrowUntyped(mask, slot) => {
                let from = lattice.slot_source(slot).unwrap();
                let to = lattice.slot_target(slot);
                for p in 0..2 {
                    if mask & (1 << p) != 0 && state.x[p].contains(from) {
                        state.x[p].insert(to);
                    }
                }
            }
            Sem::ArrowDiagonal(mask, slot) => {
                let from = lattice.slot_source(slot).unwrap();
                let to = lattice.slot_target(slot);
                for p in 0..2 {
                    if mask & (1 << p) == 0 {
                        continue;
                    }
                    if state.x[p].contains(from)
                        && state.active(p, from)
                        && !state.active(p, to)
                        && !state.x[p].contains(to)
                    {
                        state.x[p].insert(to);
                        state.a[if state.shared_activity { 0 } else { p }].insert(to);
                    }
                }
            }
        }
        lower.on_event(t_ev, &state.x[0]);
        upper.on_event(t_ev, &state.x[1]);
        state.check(ev.ticks)?;
    }
    while si < sample_ticks.len() {
        snapshot_both(&state, &mut lower, &mut upper);
        si += 1;
    }

    Ok(CoupledPair {
        lower: lower.finish(sample_times, horizon),
        upper: upper.finish(sample_times, horizon),
        relation,
        audit,
    })
}

// ---------------------------------------------------------------------------
// monotone coupling

/// Couples a rate-dominated pair on shared streams: common switching and
/// base events, private extra arrows for the upper process and private extra
/// recoveries for the lower one. Asserts `X_lower ⊆ X_upper` at every event.
#[allow(clippy::too_many_arguments)]
pub fn couple_monotone(
    lattice: &Arc<Lattice>,
    lower_rates: &RateSet,
    upper_rates: &RateSet,
    x0_lower: &SiteSet,
    x0_upper: &SiteSet,
    a0: &SiteSet,
    horizon: f64,
    seed: u64,
    sample_times: &[f64],
) -> Result<CoupledPair> {
    if lower_rates.variant != Variant::Plain || upper_rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "monotone coupling covers the plain variant".to_string(),
        ));
    }
    if !param_dominates(lower_rates, upper_rates)? {
        return Err(CpsError::precondition(
            "upper rates do not dominate lower rates",
        ));
    }
    if !x0_lower.is_subset_of(x0_upper) {
        return Err(CpsError::precondition("initial infections must be nested"));
    }
    let (sigma, rho) = lower_rates.symmetric_switching()?;
    let dd_lower = lower_rates.finite_delta_d()?;
    let dd_upper = upper_rates.finite_delta_d()?;
    let horizon_ticks = validate_horizon(horizon)?;
    let sample_ticks = validate_samples(sample_times, horizon)?;

    let n = lattice.n_sites();
    let mut cs: Vec<CStream> = Vec::new();
    let mut audit = StreamAudit::default();
    let mut shared = [0usize; 4]; // switch, rec, arrows, -
    let mut lower_extra = 0usize;
    let mut upper_extra = 0usize;

    for site in 0..n {
        let e = site as u64;
        let t = site_poisson(seed, streams::SW_AD, site, sigma, horizon_ticks);
        shared[0] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 2),
            sem: Sem::SwAd(BOTH, site),
        });
        let t = site_poisson(seed, streams::SW_DA, site, rho, horizon_ticks);
        shared[0] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 3),
            sem: Sem::SwDa(BOTH, site),
        });
        // Base recoveries at the upper (smaller) rates hit both processes.
        let t = site_poisson(
            seed,
            streams::REC_A,
            site,
            upper_rates.delta_a,
            horizon_ticks,
        );
        shared[1] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 0),
            sem: Sem::RecActive(BOTH, site),
        });
        let t = site_poisson(seed, streams::REC_D, site, dd_upper, horizon_ticks);
        shared[1] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 1),
            sem: Sem::RecDormant(BOTH, site),
        });
        // Rate-difference recoveries thin only the lower process.
        let t = site_poisson(
            seed,
            streams::EXTRA_REC_A,
            site,
            lower_rates.delta_a - upper_rates.delta_a,
            horizon_ticks,
        );
        lower_extra += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 4),
            sem: Sem::RecActive(LOWER, site),
        });
        let t = site_poisson(
            seed,
            streams::EXTRA_REC_D,
            site,
            dd_lower - dd_upper,
            horizon_ticks,
        );
        lower_extra += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 5),
            sem: Sem::RecDormant(LOWER, site),
        });
    }

    let arrow_kinds = [
        streams::ARROW_AA,
        streams::ARROW_AD,
        streams::ARROW_DA,
        streams::ARROW_DD,
    ];
    let extra_kinds = [
        streams::EXTRA_ARROW_AA,
        streams::EXTRA_ARROW_AD,
        streams::EXTRA_ARROW_DA,
        streams::EXTRA_ARROW_DD,
    ];
    let lower_lambdas = [
        lower_rates.lambda_aa,
        lower_rates.lambda_ad,
        lower_rates.lambda_da,
        lower_rates.lambda_dd,
    ];
    let upper_lambdas = [
        upper_rates.lambda_aa,
        upper_rates.lambda_ad,
        upper_rates.lambda_da,
        upper_rates.lambda_dd,
    ];
    for slot in 0..lattice.n_slots() {
        if lattice.slot_source(slot).is_none() {
            continue;
        }
        let e = slot as u64;
        for ti in 0..4 {
            let t = slot_poisson(
                seed,
                arrow_kinds[ti],
                slot,
                lower_lambdas[ti],
                horizon_ticks,
            );
            shared[2] += t.len();
            cs.push(CStream {
                ticks: t,
                marks: None,
                key: order_key(1, e, 4 + ti as u8),
                sem: Sem::Arrow(BOTH, ti, slot),
            });
            let t = slot_poisson(
                seed,
                extra_kinds[ti],
                slot,
                upper_lambdas[ti] - lower_lambdas[ti],
                horizon_ticks,
            );
            upper_extra += t.len();
            cs.push(CStream {
                ticks: t,
                marks: None,
                key: order_key(1, e, 8 + ti as u8),
                sem: Sem::Arrow(UPPER, ti, slot),
            });
        }
    }

    audit.shared = vec![
        ("switch".into(), shared[0]),
        ("recovery".into(), shared[1]),
        ("arrows".into(), shared[2]),
    ];
    audit.lower_private = vec![("extra_recovery".into(), lower_extra)];
    audit.upper_private = vec![("extra_arrows".into(), upper_extra)];

    let state = Lockstep {
        x: [x0_lower.clone(), x0_upper.clone()],
        a: [a0.clone(), a0.clone()],
        shared_activity: true,
        activity_order: 0,
        relation: "monotone",
        marked: None,
    };
    run_lockstep(
        lattice,
        &cs,
        state,
        &sample_ticks,
        horizon,
        sample_times,
        CouplingRelation::Monotone,
        audit,
    )
}

/// Set equality `X^{I1} ∪ X^{I2} = X^{I1 ∪ I2}` at every sample time on one
/// timeline.
pub fn check_additivity(
    timeline: &EventTimeline,
    i1: &SiteSet,
    i2: &SiteSet,
    a0: &SiteSet,
    sample_times: &[f64],
) -> Result<bool> {
    let s1 = timeline.evolve(i1, a0, sample_times)?;
    let s2 = timeline.evolve(i2, a0, sample_times)?;
    let su = timeline.evolve(&i1.union(i2), a0, sample_times)?;
    Ok(s1
        .iter()
        .zip(&s2)
        .zip(&su)
        .all(|((c1, c2), cu)| c1.infected.union(&c2.infected) == cu.infected))
}

/// Pathwise dominating coupling at the trivial recovery rate
/// `min(delta_a, delta_d)`: the basic process recovers only on a stream the
/// switching process always honors, and sees every arrow of a
/// rate-`lambda_max` master stream of which the switching process keeps a
/// type-dependent thinning. Asserts `X_cps ⊆ Z_cp` at every event.
#[allow(clippy::too_many_arguments)]
pub fn couple_trivial_dominating(
    lattice: &Arc<Lattice>,
    cps_rates: &RateSet,
    a0: &SiteSet,
    x0: &SiteSet,
    horizon: f64,
    seed: u64,
    sample_times: &[f64],
) -> Result<CoupledPair> {
    if cps_rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "dominating coupling covers the plain variant".to_string(),
        ));
    }
    let (sigma, rho) = cps_rates.symmetric_switching()?;
    let delta_d = cps_rates.finite_delta_d()?;
    let delta_min = cps_rates.delta_a.min(delta_d);
    let lambda_max = cps_rates.lambda_max();
    let horizon_ticks = validate_horizon(horizon)?;
    let sample_ticks = validate_samples(sample_times, horizon)?;

    let n = lattice.n_sites();
    let mut cs: Vec<CStream> = Vec::new();
    let mut counts = [0usize; 4]; // shared rec, shared arrows, cps switch, cps extra rec

    for site in 0..n {
        let e = site as u64;
        let t = site_poisson(seed, streams::SW_AD, site, sigma, horizon_ticks);
        counts[2] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 2),
            sem: Sem::SwAd(LOWER, site),
        });
        let t = site_poisson(seed, streams::SW_DA, site, rho, horizon_ticks);
        counts[2] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 3),
            sem: Sem::SwDa(LOWER, site),
        });
        // Shared minimum-rate recoveries: the basic process recovers, the
        // switching process recovers whatever its activity.
        let t = site_poisson(seed, streams::REC_SHARED, site, delta_min, horizon_ticks);
        counts[0] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 0),
            sem: Sem::RecAlways(BOTH, site),
        });
        let t = site_poisson(
            seed,
            streams::EXTRA_REC_A,
            site,
            cps_rates.delta_a - delta_min,
            horizon_ticks,
        );
        counts[3] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 4),
            sem: Sem::RecActive(LOWER, site),
        });
        let t = site_poisson(
            seed,
            streams::EXTRA_REC_D,
            site,
            delta_d - delta_min,
            horizon_ticks,
        );
        counts[3] += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 5),
            sem: Sem::RecDormant(LOWER, site),
        });
    }
    for slot in 0..lattice.n_slots() {
        if lattice.slot_source(slot).is_none() || lambda_max <= 0.0 {
            continue;
        }
        let (ticks, marks) =
            slot_marked(seed, streams::ARROW_MARKED, slot, lambda_max, horizon_ticks);
        counts[1] += ticks.len();
        cs.push(CStream {
            ticks,
            marks: Some(marks),
            key: order_key(1, slot as u64, 4),
            sem: Sem::ArrowMarked(slot),
        });
    }

    let audit = StreamAudit {
        shared: vec![
            ("recovery_min".into(), counts[0]),
            ("arrows_master".into(), counts[1]),
        ],
        lower_private: vec![
            ("switch".into(), counts[2]),
            ("extra_recovery".into(), counts[3]),
        ],
        upper_private: vec![],
    };

    let state = Lockstep {
        x: [x0.clone(), x0.clone()],
        a: [a0.clone(), a0.clone()],
        shared_activity: true,
        activity_order: 0,
        relation: "trivial-dominating",
        marked: Some((cps_rates.clone(), lambda_max)),
    };
    run_lockstep(
        lattice,
        &cs,
        state,
        &sample_ticks,
        horizon,
        sample_times,
        CouplingRelation::DominatingCp,
        audit,
    )
}

/// Couples the blocking process under the full switching process: shared
/// switching, shared active-recovery and shared active-active arrows; the
/// blocking side additionally recovers whenever an infected site turns
/// dormant. Asserts `Y_cpb ⊆ X_cps`.
#[allow(clippy::too_many_arguments)]
pub fn couple_cps_over_cpb(
    lattice: &Arc<Lattice>,
    cps_rates: &RateSet,
    a0: &SiteSet,
    x0: &SiteSet,
    horizon: f64,
    seed: u64,
    sample_times: &[f64],
) -> Result<CoupledPair> {
    if cps_rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "the blocking coupling drives both processes from plain streams".to_string(),
        ));
    }
    if cps_rates.delta_a != 1.0 {
        return Err(CpsError::precondition(
            "the blocking comparison normalises delta_a to 1",
        ));
    }
    if !x0.is_subset_of(a0) {
        return Err(CpsError::precondition(
            "blocking process needs initially active infections",
        ));
    }
    let (sigma, rho) = cps_rates.symmetric_switching()?;
    let delta_d = cps_rates.finite_delta_d()?;
    let horizon_ticks = validate_horizon(horizon)?;
    let sample_ticks = validate_samples(sample_times, horizon)?;

    let n = lattice.n_sites();
    let mut cs: Vec<CStream> = Vec::new();
    let mut shared_count = 0usize;
    let mut cps_only = 0usize;

    for site in 0..n {
        let e = site as u64;
        // sigma events switch both and structurally recover the blocking side;
        // the CpbSwitch semantic is encoded with a dedicated stream pair.
        let t = site_poisson(seed, streams::SW_AD, site, sigma, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t.clone(),
            marks: None,
            key: order_key(0, e, 2),
            sem: Sem::SwAd(BOTH, site),
        });
        // Structural recovery of the blocking process on the same ticks,
        // ordered right after the switch.
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 6),
            sem: Sem::RecAlways(LOWER, site),
        });
        let t = site_poisson(seed, streams::SW_DA, site, rho, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 3),
            sem: Sem::SwDa(BOTH, site),
        });
        let t = site_poisson(seed, streams::REC_A, site, 1.0, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 0),
            sem: Sem::RecActive(BOTH, site),
        });
        let t = site_poisson(seed, streams::REC_D, site, delta_d, horizon_ticks);
        cps_only += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 1),
            sem: Sem::RecDormant(UPPER, site),
        });
    }
    let arrow_kinds = [
        streams::ARROW_AA,
        streams::ARROW_AD,
        streams::ARROW_DA,
        streams::ARROW_DD,
    ];
    let lambdas = [
        cps_rates.lambda_aa,
        cps_rates.lambda_ad,
        cps_rates.lambda_da,
        cps_rates.lambda_dd,
    ];
    for slot in 0..lattice.n_slots() {
        if lattice.slot_source(slot).is_none() {
            continue;
        }
        let e = slot as u64;
        for ti in 0..4 {
            let t = slot_poisson(seed, arrow_kinds[ti], slot, lambdas[ti], horizon_ticks);
            let mask = if ti == 0 { BOTH } else { UPPER };
            if ti == 0 {
                shared_count += t.len();
            } else {
                cps_only += t.len();
            }
            cs.push(CStream {
                ticks: t,
                marks: None,
                key: order_key(1, e, 4 + ti as u8),
                sem: Sem::Arrow(mask, ti, slot),
            });
        }
    }

    let audit = StreamAudit {
        shared: vec![("switch+delta_a+arrows_aa".into(), shared_count)],
        lower_private: vec![],
        upper_private: vec![("delta_d+cross_arrows".into(), cps_only)],
    };

    let state = Lockstep {
        x: [x0.clone(), x0.clone()],
        a: [a0.clone(), a0.clone()],
        shared_activity: true,
        activity_order: 0,
        relation: "cps-over-cpb",
        marked: None,
    };
    run_lockstep(
        lattice,
        &cs,
        state,
        &sample_ticks,
        horizon,
        sample_times,
        CouplingRelation::CpsOverCpb,
        audit,
    )
}

/// Couples the infection-dormancy process over the host-dormancy process on
/// shared streams and asserts both containments: active sets and infected
/// sets.
#[allow(clippy::too_many_arguments)]
pub fn couple_cpid_over_cpd(
    lattice: &Arc<Lattice>,
    lambda: f64,
    delta_a: f64,
    delta_d: f64,
    sigma: f64,
    rho: f64,
    a0: &SiteSet,
    x0: &SiteSet,
    horizon: f64,
    seed: u64,
    sample_times: &[f64],
) -> Result<CoupledPair> {
    for (name, v) in [
        ("lambda", lambda),
        ("delta_a", delta_a),
        ("delta_d", delta_d),
        ("sigma", sigma),
        ("rho", rho),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(CpsError::invalid(format!("{name} must be >= 0, got {v}")));
        }
    }
    let horizon_ticks = validate_horizon(horizon)?;
    let sample_ticks = validate_samples(sample_times, horizon)?;

    let n = lattice.n_sites();
    let mut cs: Vec<CStream> = Vec::new();
    let mut shared_count = 0usize;
    let mut cpid_only = 0usize;

    for site in 0..n {
        let e = site as u64;
        let t = site_poisson(seed, streams::SW_AD, site, sigma, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 2),
            sem: Sem::SwAd(BOTH, site),
        });
        let t = site_poisson(seed, streams::SW_DA, site, rho, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 3),
            sem: Sem::SwDa(BOTH, site),
        });
        let t = site_poisson(seed, streams::REC_A, site, delta_a, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 0),
            sem: Sem::RecActive(BOTH, site),
        });
        let t = site_poisson(seed, streams::REC_D, site, delta_d, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 1),
            sem: Sem::RecDormant(BOTH, site),
        });
    }
    for slot in 0..lattice.n_slots() {
        if lattice.slot_source(slot).is_none() {
            continue;
        }
        let e = slot as u64;
        let t = slot_poisson(seed, streams::ARROW_AA, slot, lambda, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(1, e, 4),
            sem: Sem::Arrow(BOTH, 0, slot),
        });
        // Diagonal arrows reach dormant targets; only the infection-dormancy
        // process uses them.
        let t = slot_poisson(seed, streams::ARROW_AD, slot, lambda, horizon_ticks);
        cpid_only += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(1, e, 5),
            sem: Sem::ArrowDiagonal(UPPER, slot),
        });
    }

    let audit = StreamAudit {
        shared: vec![("switch+recovery+arrows_aa".into(), shared_count)],
        lower_private: vec![],
        upper_private: vec![("diagonal_arrows".into(), cpid_only)],
    };

    let state = Lockstep {
        x: [x0.clone(), x0.clone()],
        a: [a0.clone(), a0.clone()],
        shared_activity: false,
        activity_order: 1,
        relation: "cpid-over-cpd",
        marked: None,
    };
    run_lockstep(
        lattice,
        &cs,
        state,
        &sample_ticks,
        horizon,
        sample_times,
        CouplingRelation::CpidOverCpd,
        audit,
    )
}

/// Couples two environment processes with ordered switching rates
/// (`sigma1 <= sigma2`, `rho1 >= rho2`, `delta_d <= delta_a`): process 1
/// keeps the larger active set and the smaller infected set.
#[allow(clippy::too_many_arguments)]
pub fn couple_cpree_switch_monotone(
    lattice: &Arc<Lattice>,
    switching1: (f64, f64),
    switching2: (f64, f64),
    delta_a: f64,
    delta_d: f64,
    lambda: f64,
    a0: &SiteSet,
    x0: &SiteSet,
    horizon: f64,
    seed: u64,
    sample_times: &[f64],
) -> Result<CoupledPair> {
    let (sigma1, rho1) = switching1;
    let (sigma2, rho2) = switching2;
    if !(sigma1 <= sigma2 && rho1 >= rho2) {
        return Err(CpsError::precondition(
            "need sigma1 <= sigma2 and rho1 >= rho2",
        ));
    }
    if !(delta_d <= delta_a) {
        return Err(CpsError::precondition("need delta_d <= delta_a"));
    }
    for (name, v) in [
        ("sigma1", sigma1),
        ("sigma2", sigma2),
        ("rho1", rho1),
        ("rho2", rho2),
        ("delta_a", delta_a),
        ("delta_d", delta_d),
        ("lambda", lambda),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(CpsError::invalid(format!("{name} must be >= 0, got {v}")));
        }
    }
    let horizon_ticks = validate_horizon(horizon)?;
    let sample_ticks = validate_samples(sample_times, horizon)?;

    let n = lattice.n_sites();
    let mut cs: Vec<CStream> = Vec::new();
    let mut shared_count = 0usize;
    let mut p1_only = 0usize;
    let mut p2_only = 0usize;

    // Process 1 is the lockstep "lower" (smaller infected set) and holds the
    // larger active set, so the activity check runs reversed.
    for site in 0..n {
        let e = site as u64;
        let t = site_poisson(seed, streams::SW_AD, site, sigma1, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 2),
            sem: Sem::SwAd(BOTH, site),
        });
        let t = site_poisson(
            seed,
            streams::EXTRA_SW_AD,
            site,
            sigma2 - sigma1,
            horizon_ticks,
        );
        p2_only += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 6),
            sem: Sem::SwAd(UPPER, site),
        });
        let t = site_poisson(seed, streams::SW_DA, site, rho2, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 3),
            sem: Sem::SwDa(BOTH, site),
        });
        let t = site_poisson(seed, streams::EXTRA_SW_DA, site, rho1 - rho2, horizon_ticks);
        p1_only += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 7),
            sem: Sem::SwDa(LOWER, site),
        });
        // Dormant-rate recoveries fire for both regardless of type; the
        // active surcharge fires per process when that process is active.
        let t = site_poisson(seed, streams::REC_SHARED, site, delta_d, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 0),
            sem: Sem::RecAlways(BOTH, site),
        });
        let t = site_poisson(
            seed,
            streams::EXTRA_REC_A,
            site,
            delta_a - delta_d,
            horizon_ticks,
        );
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(0, e, 4),
            sem: Sem::RecActive(BOTH, site),
        });
    }
    for slot in 0..lattice.n_slots() {
        if lattice.slot_source(slot).is_none() {
            continue;
        }
        let t = slot_poisson(seed, streams::ARROW_AA, slot, lambda, horizon_ticks);
        shared_count += t.len();
        cs.push(CStream {
            ticks: t,
            marks: None,
            key: order_key(1, slot as u64, 4),
            sem: Sem::ArrowUntyped(BOTH, slot),
        });
    }

    let audit = StreamAudit {
        shared: vec![("switch_base+recovery+arrows".into(), shared_count)],
        lower_private: vec![("rho_increment".into(), p1_only)],
        upper_private: vec![("sigma_increment".into(), p2_only)],
    };

    let state = Lockstep {
        x: [x0.clone(), x0.clone()],
        a: [a0.clone(), a0.clone()],
        shared_activity: false,
        activity_order: -1,
        relation: "cpree-switch-monotone",
        marked: None,
    };
    run_lockstep(
        lattice,
        &cs,
        state,
        &sample_ticks,
        horizon,
        sample_times,
        CouplingRelation::CpreeSwitchMonotone,
        audit,
    )
}

// ---------------------------------------------------------------------------
// statistical domination tests

/// How initial activities are drawn.
#[derive(Clone, Debug)]
pub enum ActivityInit {
    Fixed(SiteSet),
    /// Product-Bernoulli at the stationary activity probability.
    Stationary,
}

/// One simulated process in a statistical comparison.
#[derive(Clone, Debug)]
pub struct ProcessSpec {
    pub lattice: Arc<Lattice>,
    pub rates: RateSet,
    pub x0: SiteSet,
    pub activity: ActivityInit,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Functional {
    /// Probability that the infection is gone by the evaluation time.
    ExtinctionProb,
    /// Number of infected sites at the evaluation time.
    InfectedCountAt,
}

impl Functional {
    pub fn label(self) -> &'static str {
        match self {
            Functional::ExtinctionProb => "extinction_prob",
            Functional::InfectedCountAt => "infected_count_at_t",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DominationReport {
    pub scenario: String,
    pub functional: Functional,
    pub estimate_dominated: f64,
    pub estimate_dominating: f64,
    pub se_dominated: f64,
    pub se_dominating: f64,
    pub confidence: f64,
    pub margin: f64,
    pub passes: bool,
    pub replicas: u32,
}

fn draw_activity(spec: &ProcessSpec, sub_seed: u64) -> Result<SiteSet> {
    let n = spec.lattice.n_sites();
    let mut a0 = match &spec.activity {
        ActivityInit::Fixed(set) => set.clone(),
        ActivityInit::Stationary => {
            let a = alpha(&spec.rates)?;
            let mut rng = StreamRng::from_key(sub_seed, &[streams::INIT_ACTIVITY]);
            SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(a)))
        }
    };
    if spec.rates.variant == Variant::Cpb {
        for site in spec.x0.iter() {
            a0.insert(site);
        }
    }
    Ok(a0)
}

fn run_functional(
    spec: &ProcessSpec,
    functional: Functional,
    t: f64,
    sub_seed: u64,
) -> Result<f64> {
    let a0 = draw_activity(spec, sub_seed)?;
    let traj = simulate_direct(
        &spec.lattice,
        &spec.rates,
        &spec.x0,
        &a0,
        t,
        sub_seed,
        &[t],
        false,
    )?;
    Ok(match functional {
        Functional::ExtinctionProb => (traj.infected_counts[0] == 0) as u8 as f64,
        Functional::InfectedCountAt => traj.infected_counts[0] as f64,
    })
}

/// One-sided comparison of a functional between a process expected to be
/// dominated and one expected to dominate. Passes when the ordering holds or
/// the gap stays within the one-sided confidence band.
#[allow(clippy::too_many_arguments)]
pub fn test_domination_stat(
    scenario: &str,
    dominated: &ProcessSpec,
    dominating: &ProcessSpec,
    functional: Functional,
    t: f64,
    replicas: u32,
    confidence: f64,
    seed: u64,
) -> Result<DominationReport> {
    if !(0.5 < confidence && confidence < 1.0) {
        return Err(CpsError::precondition("confidence must lie in (0.5, 1)"));
    }
    let needed = (10.0 / (1.0 - confidence)).ceil() as u32;
    if replicas < needed {
        return Err(CpsError::precondition(format!(
            "need at least {needed} replicas for confidence {confidence}"
        )));
    }
    let run_side = |spec: &ProcessSpec, side: u64| -> Result<Vec<f64>> {
        (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut key = StreamRng::from_key(seed, &[streams::REPLICA, side, r as u64]);
                run_functional(spec, functional, t, key.next_u64())
            })
            .collect()
    };
    let vals_a = run_side(dominated, 0)?;
    let vals_b = run_side(dominating, 1)?;
    let (mean_a, se_a) = mean_se(&vals_a);
    let (mean_b, se_b) = mean_se(&vals_b);
    let z = normal_quantile(confidence);
    let se_diff = (se_a * se_a + se_b * se_b).sqrt();
    let margin = z * se_diff;
    let passes = match functional {
        Functional::InfectedCountAt => mean_b - mean_a >= -margin,
        Functional::ExtinctionProb => mean_a - mean_b >= -margin,
    };
    Ok(DominationReport {
        scenario: scenario.to_string(),
        functional,
        estimate_dominated: mean_a,
        estimate_dominating: mean_b,
        se_dominated: se_a,
        se_dominating: se_b,
        confidence,
        margin,
        passes,
        replicas,
    })
}

/// CSV export: `scenario,functional,estimate_A,estimate_B,ci,verdict`.
pub fn write_domination_csv(
    reports: &[DominationReport],
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "scenario,functional,estimate_A,estimate_B,ci,verdict")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.scenario,
            r.functional.label(),
            r.estimate_dominated,
            r.estimate_dominating,
            r.margin,
            if r.passes { "pass" } else { "fail" }
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// switching-speed scaling limits

#[derive(Clone, Copy, Debug)]
pub struct TvEstimate {
    pub k: u32,
    pub tv: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

const MAX_WINDOW: usize = 6;

fn window_code(config: &Configuration, window: &[usize]) -> u16 {
    let mut code = 0u16;
    for (i, &site) in window.iter().enumerate() {
        code |= (config.site_state(site).code() as u16) << (2 * i);
    }
    code
}

fn infection_bits(code4: u16, w: usize) -> u16 {
    let mut bits = 0u16;
    for i in 0..w {
        if (code4 >> (2 * i)) & 0b10 != 0 {
            bits |= 1 << i;
        }
    }
    bits
}

/// Empirical total-variation distance between the window law of the process
/// with switching rates scaled by each `k` and the product of the effective
/// fast-limit process law with stationary activities.
#[allow(clippy::too_many_arguments)]
pub fn fast_switch_convergence(
    lattice: &Arc<Lattice>,
    rates: &RateSet,
    x0: &SiteSet,
    window: &[usize],
    k_list: &[u32],
    t: f64,
    replicas: u32,
    seed: u64,
) -> Result<Vec<TvEstimate>> {
    if window.is_empty() || window.len() > MAX_WINDOW {
        return Err(CpsError::precondition(format!(
            "window must have 1..={MAX_WINDOW} sites"
        )));
    }
    if rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "fast limit covers the plain variant".to_string(),
        ));
    }
    let a = alpha(rates)?;
    let (lambda_star, delta_star) = crate::rates::effective_fast_rates(rates)?;
    let w = window.len();

    // Effective-limit side: a basic contact process; activity is frozen and
    // irrelevant because all its rates are type independent.
    let cp_rates = RateSet::plain(
        lambda_star,
        lambda_star,
        lambda_star,
        lambda_star,
        delta_star,
        delta_star,
        0.0,
        0.0,
    );
    let cp_bits: Vec<u16> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut key = StreamRng::from_key(seed, &[streams::REPLICA, 1_000_000, r as u64]);
            let sub = key.next_u64();
            let traj = simulate_direct(
                lattice,
                &cp_rates,
                x0,
                &SiteSet::empty(lattice.n_sites()),
                t,
                sub,
                &[t],
                true,
            )?;
            let snap = &traj.snapshots.as_ref().unwrap()[0];
            Ok(infection_bits(window_code(snap, window), w))
        })
        .collect::<Result<Vec<u16>>>()?;

    // Product reference pmf over the 4^w window states, from an infection
    // pmf over the 2^w patterns and the stationary activity law.
    let prod_pmf = |cp_pmf: &[f64]| -> Vec<f64> {
        let mut pmf = vec![0.0f64; 1 << (2 * w)];
        for (code, p) in pmf.iter_mut().enumerate() {
            let code = code as u16;
            let bits = infection_bits(code, w);
            let mut weight = cp_pmf[bits as usize];
            for i in 0..w {
                let active = (code >> (2 * i)) & 1 == 1;
                weight *= if active { a } else { 1.0 - a };
            }
            *p = weight;
        }
        pmf
    };

    let mut out = Vec::with_capacity(k_list.len());
    for (ki, &k) in k_list.iter().enumerate() {
        if k == 0 {
            return Err(CpsError::precondition("k must be positive"));
        }
        let mut scaled = rates.clone();
        scaled.sigma0 *= k as f64;
        scaled.sigma1 *= k as f64;
        scaled.rho0 *= k as f64;
        scaled.rho1 *= k as f64;
        let codes: Vec<u16> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut key =
                    StreamRng::from_key(seed, &[streams::REPLICA, 2_000_000 + ki as u64, r as u64]);
                let sub = key.next_u64();
                let mut init = StreamRng::from_key(sub, &[streams::INIT_ACTIVITY]);
                let n = lattice.n_sites();
                let a0 = SiteSet::from_sites(n, (0..n).filter(|_| init.bernoulli(a)));
                let traj = simulate_direct(lattice, &scaled, x0, &a0, t, sub, &[t], true)?;
                let snap = &traj.snapshots.as_ref().unwrap()[0];
                Ok(window_code(snap, window))
            })
            .collect::<Result<Vec<u16>>>()?;

        let tv_of = |codes: &[u16], cp_bits: &[u16]| -> f64 {
            let mut pmf = vec![0.0f64; 1 << (2 * w)];
            for &c in codes {
                pmf[c as usize] += 1.0 / codes.len() as f64;
            }
            let mut cp_pmf = vec![0.0f64; 1 << w];
            for &b in cp_bits {
                cp_pmf[b as usize] += 1.0 / cp_bits.len() as f64;
            }
            let reference = prod_pmf(&cp_pmf);
            0.5 * pmf
                .iter()
                .zip(&reference)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
        };
        let tv = tv_of(&codes, &cp_bits);

        // Percentile bootstrap over replicas of both samples.
        let mut boot = StreamRng::from_key(seed, &[streams::SCRATCH, 3_000_000 + ki as u64]);
        let mut tvs = Vec::with_capacity(200);
        for _ in 0..200 {
            let resample = |src: &[u16], rng: &mut StreamRng| -> Vec<u16> {
                (0..src.len())
                    .map(|_| src[rng.below(src.len() as u64) as usize])
                    .collect()
            };
            let c = resample(&codes, &mut boot);
            let b = resample(&cp_bits, &mut boot);
            tvs.push(tv_of(&c, &b));
        }
        tvs.sort_by(f64::total_cmp);
        out.push(TvEstimate {
            k,
            tv,
            ci_lo: tvs[4],
            ci_hi: tvs[194],
        });
    }
    Ok(out)
}

/// Thinning coupling toward the static-environment process: every replica
/// shares one substrate, each `k` keeps a nested `1/k` fraction of its switch
/// events, and the static process keeps none. Returns the empirical window
/// total-variation distance per `k`.
#[allow(clippy::too_many_arguments)]
pub fn slow_switch_convergence(
    lattice: &Arc<Lattice>,
    rates: &RateSet,
    x0: &SiteSet,
    activity: &ActivityInit,
    window: &[usize],
    k_list: &[u32],
    t: f64,
    replicas: u32,
    seed: u64,
) -> Result<Vec<TvEstimate>> {
    if window.is_empty() || window.len() > MAX_WINDOW {
        return Err(CpsError::precondition(format!(
            "window must have 1..={MAX_WINDOW} sites"
        )));
    }
    if rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "slow limit covers the plain variant".to_string(),
        ));
    }
    let (sigma, rho) = rates.symmetric_switching()?;
    let delta_d = rates.finite_delta_d()?;
    if k_list.contains(&0) {
        return Err(CpsError::precondition("k must be positive"));
    }
    let horizon_ticks = validate_horizon(t)?;
    let n = lattice.n_sites();
    let w = window.len();
    let n_proc = k_list.len() + 1; // last entry: the static process

    let per_replica: Vec<Vec<u16>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut key = StreamRng::from_key(seed, &[streams::REPLICA, 3, r as u64]);
            let sub = key.next_u64();
            let a0 = match activity {
                ActivityInit::Fixed(set) => set.clone(),
                ActivityInit::Stationary => {
                    let a = alpha(rates)?;
                    let mut init = StreamRng::from_key(sub, &[streams::INIT_ACTIVITY]);
                    SiteSet::from_sites(n, (0..n).filter(|_| init.bernoulli(a)))
                }
            };

            // Substrate: marked switch streams, plain recoveries and arrows.
            enum S {
                SwAd(usize),
                SwDa(usize),
                RecA(usize),
                RecD(usize),
                Arrow(usize, usize),
            }
            type Row = (Vec<u64>, Option<Vec<u64>>, u64, S);
            let mut table: Vec<Row> = Vec::new();
            for site in 0..n {
                let e = site as u64;
                let mut rng = StreamRng::from_key(sub, &[streams::SW_AD_MARKED, e]);
                let (ticks, marks) = sample_marked_poisson_ticks(&mut rng, sigma, horizon_ticks);
                table.push((ticks, Some(marks), order_key(0, e, 2), S::SwAd(site)));
                let mut rng = StreamRng::from_key(sub, &[streams::SW_DA_MARKED, e]);
                let (ticks, marks) = sample_marked_poisson_ticks(&mut rng, rho, horizon_ticks);
                table.push((ticks, Some(marks), order_key(0, e, 3), S::SwDa(site)));
                table.push((
                    site_poisson(sub, streams::REC_A, site, rates.delta_a, horizon_ticks),
                    None,
                    order_key(0, e, 0),
                    S::RecA(site),
                ));
                table.push((
                    site_poisson(sub, streams::REC_D, site, delta_d, horizon_ticks),
                    None,
                    order_key(0, e, 1),
                    S::RecD(site),
                ));
            }
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
            for slot in 0..lattice.n_slots() {
                if lattice.slot_source(slot).is_none() {
                    continue;
                }
                for ti in 0..4 {
                    table.push((
                        slot_poisson(sub, arrow_kinds[ti], slot, lambdas[ti], horizon_ticks),
                        None,
                        order_key(1, slot as u64, 4 + ti as u8),
                        S::Arrow(ti, slot),
                    ));
                }
            }
            let refs: Vec<(&[u64], u64)> = table
                .iter()
                .map(|(t, _, k, _)| (t.as_slice(), *k))
                .collect();
            let events = merge_events(&refs);

            let mut xs: Vec<SiteSet> = (0..n_proc).map(|_| x0.clone()).collect();
            let mut activities: Vec<SiteSet> = (0..n_proc).map(|_| a0.clone()).collect();
            let keep = |p: usize, mark: u64| -> bool {
                if p == n_proc - 1 {
                    false
                } else {
                    mark_to_unit(mark) < 1.0 / k_list[p] as f64
                }
            };
            for ev in &events {
                let (_, marks, _, sem) = &table[ev.stream as usize];
                match sem {
                    S::SwAd(site) => {
                        let mark = marks.as_ref().unwrap()[ev.pos as usize];
                        for p in 0..n_proc {
                            if keep(p, mark) {
                                activities[p].remove(*site);
                            }
                        }
                    }
                    S::SwDa(site) => {
                        let mark = marks.as_ref().unwrap()[ev.pos as usize];
                        for p in 0..n_proc {
                            if keep(p, mark) {
                                activities[p].insert(*site);
                            }
                        }
                    }
                    S::RecA(site) => {
                        for p in 0..n_proc {
                            if activities[p].contains(*site) {
                                xs[p].remove(*site);
                            }
                        }
                    }
                    S::RecD(site) => {
                        for p in 0..n_proc {
                            if !activities[p].contains(*site) {
                                xs[p].remove(*site);
                            }
                        }
                    }
                    S::Arrow(ti, slot) => {
                        let from = lattice.slot_source(*slot).unwrap();
                        let to = lattice.slot_target(*slot);
                        let (src_act, dst_act) = ARROW_TYPES[*ti];
                        for p in 0..n_proc {
                            if xs[p].contains(from)
                                && activities[p].contains(from) == (src_act == Activity::Active)
                                && activities[p].contains(to) == (dst_act == Activity::Active)
                            {
                                xs[p].insert(to);
                            }
                        }
                    }
                }
            }
            Ok((0..n_proc)
                .map(|p| {
                    window_code(
                        &Configuration::new(xs[p].clone(), activities[p].clone()),
                        window,
                    )
                })
                .collect::<Vec<u16>>())
        })
        .collect::<Result<Vec<Vec<u16>>>>()?;

    let tv_between = |ids: &[usize], p: usize| -> f64 {
        let mut pmf_k = vec![0.0f64; 1 << (2 * w)];
        let mut pmf_s = vec![0.0f64; 1 << (2 * w)];
        for &i in ids {
            pmf_k[per_replica[i][p] as usize] += 1.0 / ids.len() as f64;
            pmf_s[per_replica[i][n_proc - 1] as usize] += 1.0 / ids.len() as f64;
        }
        0.5 * pmf_k
            .iter()
            .zip(&pmf_s)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    };

    let all: Vec<usize> = (0..replicas as usize).collect();
    let mut out = Vec::with_capacity(k_list.len());
    for (p, &k) in k_list.iter().enumerate() {
        let tv = tv_between(&all, p);
        let mut boot = StreamRng::from_key(seed, &[streams::SCRATCH, 4_000_000 + p as u64]);
        let mut tvs = Vec::with_capacity(200);
        for _ in 0..200 {
            let ids: Vec<usize> = (0..all.len())
                .map(|_| boot.below(all.len() as u64) as usize)
                .collect();
            tvs.push(tv_between(&ids, p));
        }
        tvs.sort_by(f64::total_cmp);
        out.push(TvEstimate {
            k,
            tv,
            ci_lo: tvs[4],
            ci_hi: tvs[194],
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// randomized pathwise suites

/// Draws plain rates with all entries in sensible test ranges.
fn random_plain_rates(rng: &mut StreamRng) -> RateSet {
    RateSet::plain(
        2.0 * rng.f64_half_open(),
        2.0 * rng.f64_half_open(),
        2.0 * rng.f64_half_open(),
        2.0 * rng.f64_half_open(),
        1.5 * rng.f64_half_open(),
        1.5 * rng.f64_half_open(),
        0.2 + 1.5 * rng.f64_half_open(),
        0.2 + 1.5 * rng.f64_half_open(),
    )
}

fn random_sets(rng: &mut StreamRng, n: usize) -> (SiteSet, SiteSet) {
    let x0 = SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(0.25)));
    let a0 = SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(0.5)));
    (x0, a0)
}

/// Monotonicity and attractivity containments on random instances.
pub fn run_monotone_suite(instances: u32, seed: u64) -> Result<u32> {
    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[streams::SCRATCH, 80, inst as u64]);
        let n = 4 + rng.below(14) as usize;
        let lattice = Arc::new(crate::lattice::LatticeSpec::ring(n).compile().unwrap());
        let lower = random_plain_rates(&mut rng);
        let mut upper = lower.clone();
        upper.lambda_aa += 1.5 * rng.f64_half_open();
        upper.lambda_ad += 1.5 * rng.f64_half_open();
        upper.lambda_da += 1.5 * rng.f64_half_open();
        upper.lambda_dd += 1.5 * rng.f64_half_open();
        upper.delta_a *= rng.f64_half_open();
        upper.delta_d =
            crate::rates::DormantRecovery::Finite(lower.finite_delta_d()? * rng.f64_half_open());
        let (x0_lower, a0) = random_sets(&mut rng, n);
        let mut x0_upper = x0_lower.clone();
        for site in 0..n {
            if rng.bernoulli(0.15) {
                x0_upper.insert(site);
            }
        }
        let horizon = 2.0 + 4.0 * rng.f64_half_open();
        let times: Vec<f64> = (1..=4)
            .map(|i| (horizon * i as f64 / 4.0).min(horizon))
            .collect();
        couple_monotone(
            &lattice,
            &lower,
            &upper,
            &x0_lower,
            &x0_upper,
            &a0,
            horizon,
            rng.next_u64(),
            &times,
        )?;
    }
    Ok(instances)
}

/// Additivity set equality on random instances.
pub fn run_additivity_suite(instances: u32, seed: u64) -> Result<u32> {
    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[streams::SCRATCH, 81, inst as u64]);
        let n = 4 + rng.below(17) as usize;
        let lattice = Arc::new(crate::lattice::LatticeSpec::ring(n).compile().unwrap());
        let rates = random_plain_rates(&mut rng);
        let horizon = 2.0 + 4.0 * rng.f64_half_open();
        let timeline =
            crate::graphical::sample_timeline(&lattice, &rates, horizon, rng.next_u64())?;
        let (i1, a0) = random_sets(&mut rng, n);
        let (i2, _) = random_sets(&mut rng, n);
        let times: Vec<f64> = (1..=4)
            .map(|i| (horizon * i as f64 / 4.0).min(horizon))
            .collect();
        if !check_additivity(&timeline, &i1, &i2, &a0, &times)? {
            return Err(violation(
                "additivity",
                ticks_from_time(horizon),
                format!("set equality failed on instance {inst} (n={n})"),
            ));
        }
    }
    Ok(instances)
}

/// Trivial dominating-contact-process containment on random instances.
pub fn run_trivial_dominating_suite(instances: u32, seed: u64) -> Result<u32> {
    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[streams::SCRATCH, 82, inst as u64]);
        let n = 4 + rng.below(14) as usize;
        let lattice = Arc::new(crate::lattice::LatticeSpec::ring(n).compile().unwrap());
        let rates = random_plain_rates(&mut rng);
        let (x0, a0) = random_sets(&mut rng, n);
        let horizon = 2.0 + 3.0 * rng.f64_half_open();
        let times: Vec<f64> = (1..=3)
            .map(|i| (horizon * i as f64 / 3.0).min(horizon))
            .collect();
        couple_trivial_dominating(&lattice, &rates, &a0, &x0, horizon, rng.next_u64(), &times)?;
    }
    Ok(instances)
}

/// Blocking-process-under-switching-process containment on random instances.
pub fn run_cpb_suite(instances: u32, seed: u64) -> Result<u32> {
    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[streams::SCRATCH, 83, inst as u64]);
        let n = 4 + rng.below(14) as usize;
        let lattice = Arc::new(crate::lattice::LatticeSpec::ring(n).compile().unwrap());
        let mut rates = random_plain_rates(&mut rng);
        rates.delta_a = 1.0;
        let (x0_raw, mut a0) = random_sets(&mut rng, n);
        for site in x0_raw.iter() {
            a0.insert(site);
        }
        let horizon = 2.0 + 3.0 * rng.f64_half_open();
        let times: Vec<f64> = (1..=3)
            .map(|i| (horizon * i as f64 / 3.0).min(horizon))
            .collect();
        couple_cps_over_cpb(
            &lattice,
            &rates,
            &a0,
            &x0_raw,
            horizon,
            rng.next_u64(),
            &times,
        )?;
    }
    Ok(instances)
}

/// Infection-dormancy over host-dormancy double containment on random
/// instances.
pub fn run_cpid_suite(instances: u32, seed: u64) -> Result<u32> {
    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[streams::SCRATCH, 84, inst as u64]);
        let n = 4 + rng.below(14) as usize;
        let lattice = Arc::new(crate::lattice::LatticeSpec::ring(n).compile().unwrap());
        let lambda = 3.0 * rng.f64_half_open();
        let delta_a = 0.2 + 1.3 * rng.f64_half_open();
        let delta_d = delta_a * rng.f64_half_open();
        let sigma = 0.2 + 1.5 * rng.f64_half_open();
        let rho = 0.2 + 1.5 * rng.f64_half_open();
        let (x0, a0) = random_sets(&mut rng, n);
        let horizon = 2.0 + 3.0 * rng.f64_half_open();
        let times: Vec<f64> = (1..=3)
            .map(|i| (horizon * i as f64 / 3.0).min(horizon))
            .collect();
        couple_cpid_over_cpd(
            &lattice,
            lambda,
            delta_a,
            delta_d,
            sigma,
            rho,
            &a0,
            &x0,
            horizon,
            rng.next_u64(),
            &times,
        )?;
    }
    Ok(instances)
}

/// Switching-rate monotonicity for the environment process on random
/// instances.
pub fn run_cpree_suite(instances: u32, seed: u64) -> Result<u32> {
    for inst in 0..instances {
        let mut rng = StreamRng::from_key(seed, &[streams::SCRATCH, 85, inst as u64]);
        let n = 4 + rng.below(14) as usize;
        let lattice = Arc::new(crate::lattice::LatticeSpec::ring(n).compile().unwrap());
        let sigma1 = 1.5 * rng.f64_half_open();
        let sigma2 = sigma1 + 1.5 * rng.f64_half_open();
        let rho2 = 1.5 * rng.f64_half_open();
        let rho1 = rho2 + 1.5 * rng.f64_half_open();
        let delta_d = 1.2 * rng.f64_half_open();
        let delta_a = delta_d + 1.2 * rng.f64_half_open();
        let lambda = 2.5 * rng.f64_half_open();
        let (x0, a0) = random_sets(&mut rng, n);
        let horizon = 2.0 + 3.0 * rng.f64_half_open();
        let times: Vec<f64> = (1..=3)
            .map(|i| (horizon * i as f64 / 3.0).min(horizon))
            .collect();
        couple_cpree_switch_monotone(
            &lattice,
            (sigma1, rho1),
            (sigma2, rho2),
            delta_a,
            delta_d,
            lambda,
            &a0,
            &x0,
            horizon,
            rng.next_u64(),
            &times,
        )?;
    }
    Ok(instances)
}
