//! Monte Carlo experiment harnesses: survival-ratio sweeps over infection
//! rates, bisection bracketing of the critical rate, and infected-density
//! diagnostics from the all-infected start.
//!
//! Sweeps share one event substrate across the whole rate grid: arrows come
//! from a master stream at the top grid rate and each grid value keeps a
//! nested thinning, so survival is pathwise monotone in the rate and the
//! reported ratios are exactly monotone, not just statistically.

use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::simulate_direct;
use crate::error::{CpsError, Result};
use crate::lattice::{Lattice, LatticeSpec};
use crate::rates::{alpha, RateSet, Variant};
use crate::rng::{streams, StreamRng};
use crate::sites::SiteSet;
use crate::stats::{binomial_ci_half, normal_quantile};

/// Tabulated survival ratios per infection rate and horizon.
#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub lambda_grid: Vec<f64>,
    pub horizons: Vec<f64>,
    /// `[lambda][horizon]` counts of replicas still infected.
    pub survival_counts: Vec<Vec<u32>>,
    pub replicas: u32,
    pub seed: u64,
    pub lattice: LatticeSpec,
    pub template: RateSet,
    pub common_random_numbers: bool,
}

impl SweepResult {
    pub fn ratio(&self, lambda_idx: usize, horizon_idx: usize) -> f64 {
        self.survival_counts[lambda_idx][horizon_idx] as f64 / self.replicas as f64
    }

    /// CSV mirror: `L,short,moderate,long` for three horizons, otherwise a
    /// generic `L,T<h>` header.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        if self.horizons.len() == 3 {
            writeln!(w, "L,short,moderate,long")?;
        } else {
            let names: Vec<String> = self.horizons.iter().map(|h| format!("T{h}")).collect();
            writeln!(w, "L,{}", names.join(","))?;
        }
        for (li, lambda) in self.lambda_grid.iter().enumerate() {
            let ratios: Vec<String> = (0..self.horizons.len())
                .map(|hi| format!("{}", self.ratio(li, hi)))
                .collect();
            writeln!(w, "{lambda},{}", ratios.join(","))?;
        }
        Ok(())
    }

    /// Full-config sidecar for reproducibility.
    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("sweep metadata serializes")
    }
}

/// Which infection-rate entries a sweep drives: every nonzero entry of the
/// template is replaced by the grid value, zero entries stay zero.
#[derive(Clone, Copy, Debug)]
struct LambdaMask {
    aa: bool,
    ad: bool,
    da: bool,
    dd: bool,
}

impl LambdaMask {
    fn from_template(template: &RateSet) -> Result<LambdaMask> {
        let mask = LambdaMask {
            aa: template.lambda_aa > 0.0,
            ad: template.lambda_ad > 0.0,
            da: template.lambda_da > 0.0,
            dd: template.lambda_dd > 0.0,
        };
        if !(mask.aa || mask.ad || mask.da || mask.dd) {
            return Err(CpsError::precondition(
                "sweep template needs at least one nonzero infection rate",
            ));
        }
        Ok(mask)
    }

    fn active_types(&self) -> Vec<usize> {
        let flags = [self.aa, self.ad, self.da, self.dd];
        (0..4).filter(|&i| flags[i]).collect()
    }
}

struct SweepPlan {
    lattice: Arc<Lattice>,
    template: RateSet,
    mask: LambdaMask,
    sigma: f64,
    rho: f64,
    delta_d: f64,
    alpha: f64,
    lambda_ref: f64,
    origin: usize,
}

fn plan_sweep(lattice: &Arc<Lattice>, template: &RateSet, lambda_ref: f64) -> Result<SweepPlan> {
    template.validate()?;
    if template.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "survival sweeps drive the plain variant".to_string(),
        ));
    }
    let (sigma, rho) = template.symmetric_switching()?;
    let delta_d = template.finite_delta_d()?;
    let a = alpha(template)?;
    if !(lambda_ref >= 0.0) || !lambda_ref.is_finite() {
        return Err(CpsError::precondition("invalid top grid rate"));
    }
    Ok(SweepPlan {
        lattice: Arc::clone(lattice),
        template: template.clone(),
        mask: LambdaMask::from_template(template)?,
        sigma,
        rho,
        delta_d,
        alpha: a,
        lambda_ref,
        origin: 0,
    })
}

#[derive(Clone, Copy)]
enum LazyKind {
    SwAd(usize),
    SwDa(usize),
    RecA(usize),
    RecD(usize),
    Arrow(usize, usize),
}

struct LazyStream {
    rng: StreamRng,
    rate: f64,
    next: f64,
    kind: LazyKind,
    mark: u64,
    marked: bool,
}

impl LazyStream {
    fn new(rng: StreamRng, rate: f64, kind: LazyKind, marked: bool) -> Self {
        let mut s = LazyStream {
            rng,
            rate,
            next: 0.0,
            kind,
            mark: 0,
            marked,
        };
        s.advance();
        s
    }

    fn advance(&mut self) {
        self.next += self.rng.exp(self.rate);
        if self.marked {
            self.mark = self.rng.next_u64();
        }
    }
}

/// Extinction times for each grid rate from one shared substrate.
fn sweep_replica(plan: &SweepPlan, grid: &[f64], horizon: f64, sub_seed: u64) -> Vec<Option<f64>> {
    let lattice = &plan.lattice;
    let n = lattice.n_sites();
    let mut init = StreamRng::from_key(sub_seed, &[streams::INIT_ACTIVITY]);
    let mut a = SiteSet::from_sites(n, (0..n).filter(|_| init.bernoulli(plan.alpha)));

    let mut sts: Vec<LazyStream> = Vec::with_capacity(4 * n + lattice.n_slots());
    for site in 0..n {
        sts.push(LazyStream::new(
            StreamRng::from_key(sub_seed, &[streams::SW_AD, site as u64]),
            plan.sigma,
            LazyKind::SwAd(site),
            false,
        ));
        sts.push(LazyStream::new(
            StreamRng::from_key(sub_seed, &[streams::SW_DA, site as u64]),
            plan.rho,
            LazyKind::SwDa(site),
            false,
        ));
        sts.push(LazyStream::new(
            StreamRng::from_key(sub_seed, &[streams::REC_A, site as u64]),
            plan.template.delta_a,
            LazyKind::RecA(site),
            false,
        ));
        sts.push(LazyStream::new(
            StreamRng::from_key(sub_seed, &[streams::REC_D, site as u64]),
            plan.delta_d,
            LazyKind::RecD(site),
            false,
        ));
    }
    if plan.lambda_ref > 0.0 {
        for ti in plan.mask.active_types() {
            for slot in 0..lattice.n_slots() {
                if lattice.slot_source(slot).is_none() {
                    continue;
                }
                sts.push(LazyStream::new(
                    StreamRng::from_key(sub_seed, &[streams::ARROW_MARKED, ti as u64, slot as u64]),
                    plan.lambda_ref,
                    LazyKind::Arrow(ti, slot),
                    true,
                ));
            }
        }
    }

    let mut heap: BinaryHeap<std::cmp::Reverse<(u64, u32)>> = BinaryHeap::with_capacity(sts.len());
    for (i, s) in sts.iter().enumerate() {
        if s.next <= horizon {
            heap.push(std::cmp::Reverse((s.next.to_bits(), i as u32)));
        }
    }

    let n_lambda = grid.len();
    let top = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut xs: Vec<SiteSet> = (0..n_lambda)
        .map(|_| SiteSet::from_sites(n, [plan.origin]))
        .collect();
    let mut ext: Vec<Option<f64>> = vec![None; n_lambda];

    use crate::graphical::ARROW_TYPES;
    use crate::rates::Activity;

    while let Some(std::cmp::Reverse((bits, idx))) = heap.pop() {
        let t = f64::from_bits(bits);
        let idx = idx as usize;
        let (kind, mark) = (sts[idx].kind, sts[idx].mark);
        match kind {
            LazyKind::SwAd(site) => {
                a.remove(site);
            }
            LazyKind::SwDa(site) => {
                a.insert(site);
            }
            LazyKind::RecA(site) => {
                if a.contains(site) {
                    for li in 0..n_lambda {
                        if ext[li].is_none() && xs[li].remove(site) && xs[li].is_empty() {
                            ext[li] = Some(t);
                        }
                    }
                }
            }
            LazyKind::RecD(site) => {
                if !a.contains(site) {
                    for li in 0..n_lambda {
                        if ext[li].is_none() && xs[li].remove(site) && xs[li].is_empty() {
                            ext[li] = Some(t);
                        }
                    }
                }
            }
            LazyKind::Arrow(ti, slot) => {
                let from = lattice.slot_source(slot).unwrap();
                let to = lattice.slot_target(slot);
                let (src_act, dst_act) = ARROW_TYPES[ti];
                if a.contains(from) == (src_act == Activity::Active)
                    && a.contains(to) == (dst_act == Activity::Active)
                {
                    let u = crate::timegrid::mark_to_unit(mark);
                    for li in 0..n_lambda {
                        if ext[li].is_none()
                            && u < grid[li] / plan.lambda_ref
                            && xs[li].contains(from)
                        {
                            xs[li].insert(to);
                        }
                    }
                }
            }
        }
        if ext[top].is_some() {
            debug_assert!(ext.iter().all(Option::is_some));
            break;
        }
        sts[idx].advance();
        if sts[idx].next <= horizon {
            heap.push(std::cmp::Reverse((sts[idx].next.to_bits(), idx as u32)));
        }
    }
    ext
}

/// Survival ratios for each `(lambda, horizon)` pair: single origin
/// infection, stationary activity start, shared randomness across the grid.
pub fn survival_sweep(
    lattice: &Arc<Lattice>,
    template: &RateSet,
    lambda_grid: &[f64],
    horizons: &[f64],
    replicas: u32,
    seed: u64,
) -> Result<SweepResult> {
    if lambda_grid.is_empty() {
        return Err(CpsError::precondition("rate grid must be nonempty"));
    }
    if lambda_grid.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(CpsError::precondition("grid rates must be finite and >= 0"));
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] > w[1]) {
        return Err(CpsError::precondition(
            "horizons must be sorted and nonempty",
        ));
    }
    if horizons[0] <= 0.0 {
        return Err(CpsError::precondition("horizons must be positive"));
    }
    let lambda_ref = lambda_grid.iter().copied().fold(0.0f64, f64::max);
    let plan = plan_sweep(lattice, template, lambda_ref)?;
    let max_h = *horizons.last().unwrap();

    let per_replica: Vec<Vec<Option<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let sub = crate::rng::replica_seed(seed, r as u64);
            sweep_replica(&plan, lambda_grid, max_h, sub)
        })
        .collect();

    let mut counts = vec![vec![0u32; horizons.len()]; lambda_grid.len()];
    for ext in &per_replica {
        for (li, e) in ext.iter().enumerate() {
            for (hi, &h) in horizons.iter().enumerate() {
                let survived = e.is_none_or(|te| te > h);
                if survived {
                    counts[li][hi] += 1;
                }
            }
        }
    }

    Ok(SweepResult {
        lambda_grid: lambda_grid.to_vec(),
        horizons: horizons.to_vec(),
        survival_counts: counts,
        replicas,
        seed,
        lattice: lattice.spec().clone(),
        template: template.clone(),
        common_random_numbers: true,
    })
}

/// Final bisection bracket with endpoint survival ratios and their binomial
/// confidence half-widths.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalBracket {
    pub lo: f64,
    pub hi: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub ci_half_lo: f64,
    pub ci_half_hi: f64,
    pub iterations: u32,
}

/// Bisection on the survival ratio at one horizon. The endpoint ratios must
/// straddle the threshold; every evaluation reuses the same replica streams
/// (thinned at the fixed top rate), so the ratio is exactly monotone along
/// the bisection.
#[allow(clippy::too_many_arguments)]
pub fn estimate_critical(
    lattice: &Arc<Lattice>,
    template: &RateSet,
    bracket: (f64, f64),
    ratio_threshold: f64,
    horizon: f64,
    replicas: u32,
    max_iters: u32,
    width_tol: f64,
    seed: u64,
) -> Result<CriticalBracket> {
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo) {
        return Err(CpsError::precondition("bracket must satisfy 0 <= lo < hi"));
    }
    if !(0.0 < ratio_threshold && ratio_threshold < 1.0) {
        return Err(CpsError::precondition("threshold must lie in (0, 1)"));
    }
    let plan = plan_sweep(lattice, template, hi)?;

    let ratio_at = |lambda: f64| -> f64 {
        let survived: u32 = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let sub = crate::rng::replica_seed(seed, r as u64);
                let ext = sweep_replica(&plan, &[lambda], horizon, sub);
                ext[0].map_or(1u32, |te| (te > horizon) as u32)
            })
            .sum();
        survived as f64 / replicas as f64
    };

    let mut ratio_lo = ratio_at(lo);
    let mut ratio_hi = ratio_at(hi);
    if !(ratio_lo < ratio_threshold && ratio_hi > ratio_threshold) {
        return Err(CpsError::precondition(format!(
            "bracket does not straddle the threshold: ratio({lo}) = {ratio_lo}, \
             ratio({hi}) = {ratio_hi}, threshold {ratio_threshold}"
        )));
    }

    let mut iterations = 0;
    while hi - lo > width_tol && iterations < max_iters {
        let mid = 0.5 * (lo + hi);
        let r = ratio_at(mid);
        if r >= ratio_threshold {
            hi = mid;
            ratio_hi = r;
        } else {
            lo = mid;
            ratio_lo = r;
        }
        iterations += 1;
    }

    let half = |ratio: f64| {
        binomial_ci_half(
            (ratio * replicas as f64).round() as u64,
            replicas as u64,
            0.95,
        )
    };
    Ok(CriticalBracket {
        lo,
        hi,
        ratio_lo,
        ratio_hi,
        ci_half_lo: half(ratio_lo),
        ci_half_hi: half(ratio_hi),
        iterations,
    })
}

/// Estimated infected density at the origin from the all-infected,
/// stationary-activity start.
#[derive(Clone, Debug, Serialize)]
pub struct DensityCurve {
    pub times: Vec<f64>,
    pub density: Vec<f64>,
    pub ci_half: Vec<f64>,
}

pub fn density_from_full(
    lattice: &Arc<Lattice>,
    rates: &RateSet,
    times: &[f64],
    replicas: u32,
    seed: u64,
) -> Result<DensityCurve> {
    rates.validate()?;
    if rates.variant != Variant::Plain {
        return Err(CpsError::Unsupported(
            "density diagnostics cover the plain variant".to_string(),
        ));
    }
    let a = alpha(rates)?;
    if times.is_empty() || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(CpsError::precondition("times must be sorted and nonempty"));
    }
    let horizon = times.last().copied().unwrap().max(1e-9);
    let n = lattice.n_sites();

    let hits: Vec<Vec<bool>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let sub = crate::rng::replica_seed(seed, r as u64);
            let mut init = StreamRng::from_key(sub, &[streams::INIT_ACTIVITY]);
            let a0 = SiteSet::from_sites(n, (0..n).filter(|_| init.bernoulli(a)));
            let traj = simulate_direct(
                lattice,
                rates,
                &SiteSet::full(n),
                &a0,
                horizon,
                sub,
                times,
                true,
            )?;
            Ok(traj
                .snapshots
                .unwrap()
                .iter()
                .map(|snap| snap.infected.contains(0))
                .collect())
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;

    let z = normal_quantile(0.975);
    let mut density = Vec::with_capacity(times.len());
    let mut ci_half = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let hits_t = hits.iter().filter(|h| h[ti]).count() as f64;
        let p = hits_t / replicas as f64;
        density.push(p);
        ci_half.push(z * (p * (1.0 - p) / replicas as f64).sqrt());
    }
    Ok(DensityCurve {
        times: times.to_vec(),
        density,
        ci_half,
    })
}
