//! Direct continuous-time Markov chain simulation from the flip rates,
//! including the variants the graphical backend excludes: blocking (instant
//! dormant recovery) and infection dormancy (diagonal arrows).

use std::io::Write;
use std::sync::Arc;

use crate::error::{CpsError, Result};
use crate::lattice::Lattice;
use crate::rates::{RateSet, Variant};
use crate::rng::{streams, StreamRng};
use crate::sites::{Configuration, SiteSet};

/// Horizon-censored extinction marker.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Extinction {
    /// The infected set became empty at this event time.
    Extinct(f64),
    /// Still infected at the horizon.
    Censored(f64),
}

impl Extinction {
    pub fn time(self) -> Option<f64> {
        match self {
            Extinction::Extinct(t) => Some(t),
            Extinction::Censored(_) => None,
        }
    }

    /// Whether the infection was still alive at `t`.
    pub fn survives_past(self, t: f64) -> bool {
        match self {
            Extinction::Extinct(te) => te > t,
            Extinction::Censored(_) => true,
        }
    }
}

/// Sampled trajectory: per-time summary counts, optional full snapshots, and
/// the extinction marker.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub infected_counts: Vec<usize>,
    pub active_counts: Vec<usize>,
    pub snapshots: Option<Vec<Configuration>>,
    pub extinction: Extinction,
}

/// First exact event time at which the infected set became empty, else the
/// censoring horizon.
pub fn extinction_time(trajectory: &Trajectory) -> Extinction {
    trajectory.extinction
}

/// Exact-in-distribution sample of the process.
///
/// Deterministic in `(lattice, rates, x0, a0, horizon, seed)`. Snapshots are
/// taken right-continuously at `sample_times`; once the infection dies the
/// activity background is advanced by its exact two-state transition law
/// instead of event by event.
#[allow(clippy::too_many_arguments)]
pub fn simulate_direct(
    lattice: &Arc<Lattice>,
    rates: &RateSet,
    x0: &SiteSet,
    a0: &SiteSet,
    horizon: f64,
    seed: u64,
    sample_times: &[f64],
    record_full: bool,
) -> Result<Trajectory> {
    rates.validate()?;
    if !(horizon > 0.0) {
        return Err(CpsError::precondition("horizon must be > 0"));
    }
    let n = lattice.n_sites();
    if x0.n_sites() != n || a0.n_sites() != n {
        return Err(CpsError::precondition(
            "initial sets must match the lattice size",
        ));
    }
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
    if rates.variant == Variant::Cpb && !x0.is_subset_of(a0) {
        return Err(CpsError::precondition(
            "blocking variant requires infected sites to start active",
        ));
    }
    if rates.variant == Variant::Cpid && (rates.lambda_da != 0.0 || rates.lambda_dd != 0.0) {
        return Err(CpsError::precondition(
            "infection-dormancy variant has no dormant infectors",
        ));
    }

    let mut sim = Sim::new(lattice, rates, x0.clone(), a0.clone(), seed);
    let mut rec = Recorder::new(sample_times, record_full);

    let mut extinction = if x0.is_empty() { Some(0.0) } else { None };
    let mut t = 0.0f64;

    if extinction.is_none() {
        loop {
            let total = sim.tree.total();
            let dt = sim.rng.exp(total);
            let t_next = t + dt;
            rec.flush_until(t_next.min(horizon), &sim.x, &sim.a, t);
            if t_next > horizon || !t_next.is_finite() {
                break;
            }
            t = t_next;
            sim.step();
            if sim.x.is_empty() {
                extinction = Some(t);
                break;
            }
        }
    }

    match extinction {
        None => {
            rec.flush_remaining(&sim.x, &sim.a);
        }
        Some(te) => {
            // Infection is absorbed; advance activity alone by its exact
            // transition law at each remaining sample time.
            let q = rates.sigma0 + rates.rho0;
            let alpha0 = if q > 0.0 { rates.rho0 / q } else { 0.0 };
            let mut prev = te;
            while let Some(s) = rec.next_pending() {
                if q > 0.0 && s > prev {
                    let decay = (-q * (s - prev)).exp();
                    for site in 0..n {
                        let p_active = if sim.a.contains(site) {
                            alpha0 + (1.0 - alpha0) * decay
                        } else {
                            alpha0 * (1.0 - decay)
                        };
                        if sim.rng.bernoulli(p_active) {
                            sim.a.insert(site);
                        } else {
                            sim.a.remove(site);
                        }
                    }
                }
                prev = s.max(prev);
                rec.push(&sim.x, &sim.a);
            }
        }
    }

    Ok(Trajectory {
        sample_times: sample_times.to_vec(),
        infected_counts: rec.infected,
        active_counts: rec.active,
        snapshots: rec.snapshots,
        extinction: match extinction {
            Some(te) => Extinction::Extinct(te),
            None => Extinction::Censored(horizon),
        },
    })
}

struct Recorder<'a> {
    times: &'a [f64],
    next: usize,
    infected: Vec<usize>,
    active: Vec<usize>,
    snapshots: Option<Vec<Configuration>>,
}

impl<'a> Recorder<'a> {
    fn new(times: &'a [f64], record_full: bool) -> Self {
        Recorder {
            times,
            next: 0,
            infected: Vec::with_capacity(times.len()),
            active: Vec::with_capacity(times.len()),
            snapshots: if record_full {
                Some(Vec::with_capacity(times.len()))
            } else {
                None
            },
        }
    }

    /// Emits snapshots for all pending sample times strictly before
    /// `t_next`, i.e. the state at those times is the current one.
    fn flush_until(&mut self, t_next: f64, x: &SiteSet, a: &SiteSet, _now: f64) {
        while self.next < self.times.len() && self.times[self.next] < t_next {
            self.push_inner(x, a);
        }
    }

    fn flush_remaining(&mut self, x: &SiteSet, a: &SiteSet) {
        while self.next < self.times.len() {
            self.push_inner(x, a);
        }
    }

    fn next_pending(&self) -> Option<f64> {
        self.times.get(self.next).copied()
    }

    fn push(&mut self, x: &SiteSet, a: &SiteSet) {
        self.push_inner(x, a);
    }

    fn push_inner(&mut self, x: &SiteSet, a: &SiteSet) {
        self.infected.push(x.len());
        self.active.push(a.len());
        if let Some(s) = self.snapshots.as_mut() {
            s.push(Configuration::new(x.clone(), a.clone()));
        }
        self.next += 1;
    }
}

/// Binary sum tree over per-site exit rates.
struct RateTree {
    cap: usize,
    tree: Vec<f64>,
}

impl RateTree {
    fn new(n: usize) -> Self {
        let cap = n.next_power_of_two().max(1);
        RateTree {
            cap,
            tree: vec![0.0; 2 * cap],
        }
    }

    #[inline]
    fn set(&mut self, i: usize, v: f64) {
        let mut idx = self.cap + i;
        self.tree[idx] = v;
        idx >>= 1;
        while idx >= 1 {
            self.tree[idx] = self.tree[2 * idx] + self.tree[2 * idx + 1];
            if idx == 1 {
                break;
            }
            idx >>= 1;
        }
    }

    #[inline]
    fn total(&self) -> f64 {
        self.tree[1]
    }

    /// Leaf index with cumulative weight containing `r` in `[0, total)`.
    fn pick(&self, mut r: f64) -> usize {
        let mut idx = 1;
        while idx < self.cap {
            let left = self.tree[2 * idx];
            if r < left {
                idx *= 2;
            } else {
                r -= left;
                idx = 2 * idx + 1;
            }
        }
        let mut leaf = idx - self.cap;
        // Rounding can land on a zero-rate leaf; move to the next live one.
        while self.tree[self.cap + leaf] <= 0.0 && leaf + 1 < self.cap {
            leaf += 1;
        }
        leaf
    }
}

struct Sim<'a> {
    lattice: &'a Lattice,
    rates: &'a RateSet,
    x: SiteSet,
    a: SiteSet,
    n1a: Vec<u32>,
    n1d: Vec<u32>,
    tree: RateTree,
    rng: StreamRng,
}

impl<'a> Sim<'a> {
    fn new(
        lattice: &'a Arc<Lattice>,
        rates: &'a RateSet,
        x: SiteSet,
        a: SiteSet,
        seed: u64,
    ) -> Self {
        let n = lattice.n_sites();
        let mut sim = Sim {
            lattice,
            rates,
            x,
            a,
            n1a: vec![0; n],
            n1d: vec![0; n],
            tree: RateTree::new(n),
            rng: StreamRng::from_key(seed, &[streams::DYNAMICS]),
        };
        for src in sim.x.iter().collect::<Vec<_>>() {
            let active = sim.a.contains(src);
            for &slot in sim.lattice.out_slots(src) {
                let tgt = sim.lattice.slot_target(slot as usize);
                if active {
                    sim.n1a[tgt] += 1;
                } else {
                    sim.n1d[tgt] += 1;
                }
            }
        }
        for site in 0..n {
            let r = sim.site_rate(site);
            sim.tree.set(site, r);
        }
        sim
    }

    #[inline]
    fn switch_rate(&self, site: usize, infected: bool, active: bool) -> f64 {
        let _ = site;
        match (infected, active) {
            (false, true) => self.rates.sigma0,
            (false, false) => self.rates.rho0,
            (true, true) => self.rates.sigma1,
            (true, false) => self.rates.rho1,
        }
    }

    #[inline]
    fn recovery_rate(&self, active: bool) -> f64 {
        if active {
            self.rates.delta_a
        } else {
            // Unreachable for the blocking variant: dormant infected sites
            // do not exist there.
            self.rates.delta_d.finite().unwrap_or(0.0)
        }
    }

    #[inline]
    fn pressure(&self, site: usize, active: bool) -> f64 {
        match self.rates.variant {
            Variant::Plain | Variant::Cpid => {
                let (la, ld) = if active {
                    (self.rates.lambda_aa, self.rates.lambda_da)
                } else {
                    (self.rates.lambda_ad, self.rates.lambda_dd)
                };
                la * self.n1a[site] as f64 + ld * self.n1d[site] as f64
            }
            Variant::Cpb => {
                if active {
                    self.rates.lambda_aa * self.n1a[site] as f64
                } else {
                    0.0
                }
            }
        }
    }

    fn site_rate(&self, site: usize) -> f64 {
        let infected = self.x.contains(site);
        let active = self.a.contains(site);
        let mut r = self.switch_rate(site, infected, active);
        if infected {
            r += self.recovery_rate(active);
        } else {
            r += self.pressure(site, active);
        }
        r
    }

    fn step(&mut self) {
        let total = self.tree.total();
        let site = self.tree.pick(self.rng.f64_half_open() * total);
        let infected = self.x.contains(site);
        let active = self.a.contains(site);
        let sw = self.switch_rate(site, infected, active);
        let u = self.rng.f64_half_open() * self.tree.tree[self.tree.cap + site];
        if u < sw {
            self.apply_switch(site, infected, active);
        } else if infected {
            self.apply_recovery(site, active);
        } else {
            self.apply_infection(site);
        }
    }

    fn apply_switch(&mut self, site: usize, infected: bool, active: bool) {
        if active {
            self.a.remove(site);
        } else {
            self.a.insert(site);
        }
        if infected {
            if self.rates.variant == Variant::Cpb {
                // Switching away from active recovers the site on the spot;
                // the dormant infected state is never entered.
                debug_assert!(active);
                self.x.remove(site);
                self.bump_neighbors(site, active, None);
            } else {
                self.bump_neighbors(site, active, Some(!active));
            }
        }
        self.refresh(site);
    }

    fn apply_recovery(&mut self, site: usize, active: bool) {
        self.x.remove(site);
        self.bump_neighbors(site, active, None);
        self.refresh(site);
    }

    fn apply_infection(&mut self, site: usize) {
        self.x.insert(site);
        let active = if self.rates.variant == Variant::Cpid {
            // Diagonal arrows land the target in the active state.
            self.a.insert(site);
            true
        } else {
            self.a.contains(site)
        };
        self.bump_neighbors_add(site, active);
        self.refresh(site);
    }

    /// Removes `site`'s old infector contribution (`was_active`) and, if
    /// `now_active` is given, re-adds it with the new type.
    fn bump_neighbors(&mut self, site: usize, was_active: bool, now_active: Option<bool>) {
        for &slot in self.lattice.out_slots(site) {
            let tgt = self.lattice.slot_target(slot as usize);
            if was_active {
                self.n1a[tgt] -= 1;
            } else {
                self.n1d[tgt] -= 1;
            }
            if let Some(now) = now_active {
                if now {
                    self.n1a[tgt] += 1;
                } else {
                    self.n1d[tgt] += 1;
                }
            }
            let r = self.site_rate(tgt);
            self.tree.set(tgt, r);
        }
    }

    fn bump_neighbors_add(&mut self, site: usize, active: bool) {
        for &slot in self.lattice.out_slots(site) {
            let tgt = self.lattice.slot_target(slot as usize);
            if active {
                self.n1a[tgt] += 1;
            } else {
                self.n1d[tgt] += 1;
            }
            let r = self.site_rate(tgt);
            self.tree.set(tgt, r);
        }
    }

    fn refresh(&mut self, site: usize) {
        let r = self.site_rate(site);
        self.tree.set(site, r);
    }
}

/// Writes `time,infected_count,active_count` rows.
pub fn write_trajectory_csv(traj: &Trajectory, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "time,infected_count,active_count")?;
    for i in 0..traj.sample_times.len() {
        writeln!(
            w,
            "{},{},{}",
            traj.sample_times[i], traj.infected_counts[i], traj.active_counts[i]
        )?;
    }
    Ok(())
}

/// Writes one line per snapshot: the time, a comma, then run-length-encoded
/// site states (`count*label`, space separated).
pub fn write_states_rle(traj: &Trajectory, w: &mut impl Write) -> Result<()> {
    let snaps = traj.snapshots.as_ref().ok_or_else(|| {
        CpsError::precondition("state dump needs a trajectory with full snapshots")
    })?;
    for (i, snap) in snaps.iter().enumerate() {
        write!(w, "{},", traj.sample_times[i])?;
        let n = snap.n_sites();
        let mut site = 0;
        let mut first = true;
        while site < n {
            let label = snap.site_state(site).label();
            let mut run = 1;
            while site + run < n && snap.site_state(site + run).label() == label {
                run += 1;
            }
            if !first {
                write!(w, " ")?;
            }
            write!(w, "{run}*{label}")?;
            first = false;
            site += run;
        }
        writeln!(w)?;
    }
    Ok(())
}
