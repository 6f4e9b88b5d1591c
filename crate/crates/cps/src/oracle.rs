//! Exact transient distributions for tiny lattices: the brute-force ground
//! truth behind every distributional claim in the test suites.
//!
//! States are encoded base-4 (one digit per site over the four site states),
//! or base-3 for the blocking variant whose dormant-infected state is
//! unreachable. The generator is stored sparsely by row; transients come
//! from uniformization with a hard truncation-error budget.

use std::sync::Arc;

use crate::error::{CpsError, Result};
use crate::lattice::Lattice;
use crate::rates::{Activity, RateSet, Variant};
use crate::sites::{Configuration, SiteSet, SiteState};

/// Hard cap on the exactly-solvable lattice size.
pub const MAX_ORACLE_SITES: usize = 8;

/// Exact generator of the chosen variant on a small lattice.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    lattice: Arc<Lattice>,
    rates: RateSet,
    base: usize,
    n_sites: usize,
    n_states: usize,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

/// Decoded view of one encoded state.
#[derive(Clone, Copy)]
pub struct StateView<'a> {
    mat: &'a GeneratorMatrix,
    state: usize,
}

impl<'a> StateView<'a> {
    #[inline]
    pub fn site(&self, site: usize) -> SiteState {
        self.mat.site_state(self.state, site)
    }

    pub fn n_sites(&self) -> usize {
        self.mat.n_sites
    }

    pub fn infected_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mat.n_sites).filter(move |&i| self.site(i).infected)
    }
}

pub fn generator_matrix(lattice: &Arc<Lattice>, rates: &RateSet) -> Result<GeneratorMatrix> {
    rates.validate()?;
    let n_sites = lattice.n_sites();
    if n_sites > MAX_ORACLE_SITES {
        return Err(CpsError::precondition(format!(
            "exact solver is capped at {MAX_ORACLE_SITES} sites, lattice has {n_sites}"
        )));
    }
    if rates.variant == Variant::Cpid && (rates.lambda_da != 0.0 || rates.lambda_dd != 0.0) {
        return Err(CpsError::precondition(
            "infection-dormancy variant has no dormant infectors",
        ));
    }
    let base: usize = if rates.variant == Variant::Cpb { 3 } else { 4 };
    let n_states = base.pow(n_sites as u32);

    let mut row_ptr = Vec::with_capacity(n_states + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = vec![0.0; n_states];
    row_ptr.push(0u32);

    let mut digits = vec![0u8; n_sites];
    let pow: Vec<usize> = (0..n_sites).map(|i| base.pow(i as u32)).collect();
    let delta_d = rates.delta_d.finite();

    for state in 0..n_states {
        decode(state, base, &mut digits);
        let mut row_sum = 0.0;
        for site in 0..n_sites {
            let d = digits[site];
            let (infected, active) = interpret(base, d);

            // Infected neighbor counts over the incoming offsets.
            let mut n1a = 0u32;
            let mut n1d = 0u32;
            for &slot in lattice.in_slots(site) {
                let src = lattice.slot_source(slot as usize).unwrap();
                let (s_inf, s_act) = interpret(base, digits[src]);
                if s_inf {
                    if s_act {
                        n1a += 1;
                    } else {
                        n1d += 1;
                    }
                }
            }

            let mut push = |target_digit: u8, rate: f64| {
                if rate <= 0.0 {
                    return;
                }
                let to =
                    (state as i64 + (target_digit as i64 - d as i64) * pow[site] as i64) as usize;
                cols.push(to as u32);
                vals.push(rate);
                row_sum += rate;
            };

            match rates.variant {
                Variant::Plain | Variant::Cpid => {
                    let diagonal = rates.variant == Variant::Cpid;
                    match (infected, active) {
                        (false, false) => {
                            push(code(base, false, true), rates.rho0);
                            let rate = rates.lambda_ad * n1a as f64 + rates.lambda_dd * n1d as f64;
                            // Diagonal arrows land the target active.
                            push(code(base, true, diagonal), rate);
                        }
                        (false, true) => {
                            push(code(base, false, false), rates.sigma0);
                            let rate = rates.lambda_aa * n1a as f64 + rates.lambda_da * n1d as f64;
                            push(code(base, true, true), rate);
                        }
                        (true, false) => {
                            push(code(base, true, true), rates.rho1);
                            push(code(base, false, false), delta_d.unwrap_or(0.0));
                        }
                        (true, true) => {
                            push(code(base, true, false), rates.sigma1);
                            push(code(base, false, true), rates.delta_a);
                        }
                    }
                }
                Variant::Cpb => match (infected, active) {
                    (false, false) => {
                        push(code(base, false, true), rates.rho0);
                    }
                    (false, true) => {
                        push(code(base, false, false), rates.sigma0);
                        push(code(base, true, true), rates.lambda_aa * n1a as f64);
                    }
                    (true, true) => {
                        // Switching away from active recovers instantly.
                        push(code(base, false, false), rates.sigma1);
                        push(code(base, false, true), rates.delta_a);
                    }
                    (true, false) => unreachable!("blocking variant has no dormant infected"),
                },
            }
        }
        diag[state] = -row_sum;
        row_ptr.push(cols.len() as u32);
    }

    Ok(GeneratorMatrix {
        lattice: Arc::clone(lattice),
        rates: rates.clone(),
        base,
        n_sites,
        n_states,
        row_ptr,
        cols,
        vals,
        diag,
    })
}

fn decode(state: usize, base: usize, digits: &mut [u8]) {
    let mut rem = state;
    for d in digits.iter_mut() {
        *d = (rem % base) as u8;
        rem /= base;
    }
}

/// `(infected, active)` of a digit.
#[inline]
fn interpret(base: usize, digit: u8) -> (bool, bool) {
    if base == 4 {
        (digit >= 2, digit & 1 == 1)
    } else {
        (digit == 2, digit != 0)
    }
}

/// Digit for `(infected, active)`.
#[inline]
fn code(base: usize, infected: bool, active: bool) -> u8 {
    if base == 4 {
        (infected as u8) * 2 + active as u8
    } else if infected {
        debug_assert!(active);
        2
    } else {
        active as u8
    }
}

impl GeneratorMatrix {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn rates(&self) -> &RateSet {
        &self.rates
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    #[inline]
    pub fn site_state(&self, state: usize, site: usize) -> SiteState {
        let digit = (state / self.base.pow(site as u32)) % self.base;
        let (infected, active) = interpret(self.base, digit as u8);
        SiteState {
            infected,
            activity: if active {
                Activity::Active
            } else {
                Activity::Dormant
            },
        }
    }

    pub fn encode(&self, config: &Configuration) -> Result<usize> {
        if config.n_sites() != self.n_sites {
            return Err(CpsError::precondition("configuration size mismatch"));
        }
        let mut state = 0usize;
        for site in (0..self.n_sites).rev() {
            let s = config.site_state(site);
            if self.base == 3 && s.infected && s.activity == Activity::Dormant {
                return Err(CpsError::precondition(
                    "blocking variant cannot encode dormant infected sites",
                ));
            }
            state = state * self.base
                + code(self.base, s.infected, s.activity == Activity::Active) as usize;
        }
        Ok(state)
    }

    pub fn point_mass(&self, config: &Configuration) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.n_states];
        v[self.encode(config)?] = 1.0;
        Ok(v)
    }

    /// Initial law with deterministic infections `x0` and product-Bernoulli
    /// activities. Infected sites of the blocking variant are forced active.
    pub fn product_activity_initial(&self, x0: &SiteSet, alpha: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CpsError::precondition("alpha must lie in [0,1]"));
        }
        let mut v = vec![0.0; self.n_states];
        for state in 0..self.n_states {
            let mut w = 1.0;
            for site in 0..self.n_sites {
                let s = self.site_state(state, site);
                if s.infected != x0.contains(site) {
                    w = 0.0;
                    break;
                }
                let p_active = if s.infected && self.base == 3 {
                    1.0
                } else {
                    alpha
                };
                w *= if s.activity == Activity::Active {
                    p_active
                } else {
                    1.0 - p_active
                };
                if w == 0.0 {
                    break;
                }
            }
            v[state] = w;
        }
        Ok(v)
    }

    /// Row-vector product `out = dist * Q`.
    fn apply_generator(&self, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n_states {
            let p = dist[i];
            if p == 0.0 {
                continue;
            }
            out[i] += p * self.diag[i];
            let lo = self.row_ptr[i] as usize;
            let hi = self.row_ptr[i + 1] as usize;
            for k in lo..hi {
                out[self.cols[k] as usize] += p * self.vals[k];
            }
        }
    }

    /// Distribution at time `t` via uniformization; truncation error below
    /// 1e-12.
    pub fn transient_distribution(&self, initial: &[f64], t: f64) -> Result<Vec<f64>> {
        if initial.len() != self.n_states {
            return Err(CpsError::precondition(format!(
                "initial vector has length {}, expected {}",
                initial.len(),
                self.n_states
            )));
        }
        let sum: f64 = initial.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || initial.iter().any(|&p| p < -1e-15) {
            return Err(CpsError::precondition(
                "initial vector must be a probability distribution",
            ));
        }
        if t < 0.0 {
            return Err(CpsError::precondition("time must be nonnegative"));
        }
        let lambda = self.diag.iter().fold(0.0f64, |acc, &d| acc.max(-d));
        if t == 0.0 || lambda == 0.0 {
            return Ok(initial.to_vec());
        }

        // Keep each uniformized chunk small enough that the Poisson weights
        // stay well inside the normal range.
        let chunks = ((lambda * t) / 200.0).ceil().max(1.0) as usize;
        let dt = t / chunks as f64;
        let tol = 1e-13 / chunks as f64;

        let mut dist = initial.to_vec();
        let mut v = vec![0.0; self.n_states];
        let mut qv = vec![0.0; self.n_states];
        for _ in 0..chunks {
            let a = lambda * dt;
            let mut weight = (-a).exp();
            let mut cum = weight;
            v.copy_from_slice(&dist);
            let mut acc: Vec<f64> = v.iter().map(|&x| x * weight).collect();
            let mut k = 0usize;
            while cum < 1.0 - tol {
                // v <- v * P with P = I + Q / lambda.
                self.apply_generator(&v, &mut qv);
                for j in 0..self.n_states {
                    v[j] += qv[j] / lambda;
                }
                k += 1;
                weight *= a / k as f64;
                cum += weight;
                for j in 0..self.n_states {
                    acc[j] += weight * v[j];
                }
                if k > 100_000 {
                    return Err(CpsError::precondition("uniformization failed to converge"));
                }
            }
            dist = acc;
        }
        Ok(dist)
    }

    /// Probability mass of the states satisfying the predicate.
    pub fn exact_marginal(&self, dist: &[f64], pred: impl Fn(StateView<'_>) -> bool) -> f64 {
        dist.iter()
            .enumerate()
            .filter(|&(state, _)| pred(StateView { mat: self, state }))
            .map(|(_, &p)| p)
            .sum()
    }

    /// Dense copy of the generator; intended for small cross-checks.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n_states;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = self.diag[i];
            for k in self.row_ptr[i] as usize..self.row_ptr[i + 1] as usize {
                q[i * n + self.cols[k] as usize] += self.vals[k];
            }
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::rates::{preset, BaseRates, Preset};

    fn ring(n: usize) -> Arc<Lattice> {
        Arc::new(LatticeSpec::ring(n).compile().unwrap())
    }

    fn single_site() -> Arc<Lattice> {
        // One site with free boundary: no neighbors at all.
        Arc::new(LatticeSpec::free_box(vec![1]).compile().unwrap())
    }

    fn cp(lambda: f64, delta: f64, sigma: f64, rho: f64) -> RateSet {
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

    /// Dense matrix exponential (scaling and squaring with a Taylor series):
    /// the independent reference path for uniformization.
    fn dense_expm_transient(q: &[f64], n: usize, initial: &[f64], t: f64) -> Vec<f64> {
        let norm: f64 = (0..n)
            .map(|i| (0..n).map(|j| (q[i * n + j] * t).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
        let scale = (2.0f64).powi(squarings as i32);
        let mut m: Vec<f64> = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        // Taylor series of exp(Q t / 2^s).
        let mut term: Vec<f64> = m.clone();
        let mut k = 1.0;
        loop {
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for l in 0..n {
                    let v = term[i * n + l];
                    if v == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        next[i * n + j] += v * q[l * n + j] * t / scale / k;
                    }
                }
            }
            let max = next.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            for (mi, ni) in m.iter_mut().zip(&next) {
                *mi += ni;
            }
            term = next;
            k += 1.0;
            if max < 1e-18 || k > 200.0 {
                break;
            }
        }
        for _ in 0..squarings {
            let mut sq = vec![0.0; n * n];
            for i in 0..n {
                for l in 0..n {
                    let v = m[i * n + l];
                    if v == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        sq[i * n + j] += v * m[l * n + j];
                    }
                }
            }
            m = sq;
        }
        (0..n)
            .map(|j| (0..n).map(|i| initial[i] * m[i * n + j]).sum())
            .collect()
    }

    #[test]
    fn single_site_matrix_shape() {
        let lat = single_site();
        let rates = cp(2.0, 1.0, 1.0, 1.0);
        let q = generator_matrix(&lat, &rates).unwrap();
        assert_eq!(q.n_states(), 4);
        let dense = q.to_dense();
        // No neighbors: no infection terms anywhere.
        let healthy_dormant = 0usize;
        let infected_active = 3usize;
        assert_eq!(dense[healthy_dormant * 4 + 2], 0.0);
        assert_eq!(dense[healthy_dormant * 4 + 3], 0.0);
        // Recovery and switching present.
        assert_eq!(dense[infected_active * 4 + 1], 1.0);
        assert_eq!(dense[infected_active * 4 + 2], 1.0);
    }

    #[test]
    fn rows_sum_to_zero() {
        let lat = ring(3);
        for rates in [
            RateSet::plain(1.3, 0.4, 0.9, 0.1, 0.8, 0.3, 1.1, 0.7),
            preset(
                Preset::Cpid,
                &BaseRates {
                    lambda: 2.0,
                    delta_a: 1.0,
                    delta_d: Some(0.2),
                    sigma: 1.0,
                    rho: 1.0,
                },
            )
            .unwrap(),
            preset(
                Preset::Cpb,
                &BaseRates {
                    lambda: 2.0,
                    delta_a: 1.0,
                    delta_d: None,
                    sigma: 1.0,
                    rho: 0.5,
                },
            )
            .unwrap(),
        ] {
            let q = generator_matrix(&lat, &rates).unwrap();
            let n = q.n_states();
            let dense = q.to_dense();
            for i in 0..n {
                let row: f64 = (0..n).map(|j| dense[i * n + j]).sum();
                assert!(row.abs() < 1e-12, "row {i} sums to {row}");
                for j in 0..n {
                    if i != j {
                        assert!(dense[i * n + j] >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn two_site_infection_entry() {
        // Infected active neighbor infects a healthy active site at the
        // active-active rate (doubled here: both ring-of-2 offsets).
        let lat = ring(2);
        let rates = cp(1.5, 1.0, 1.0, 1.0);
        let q = generator_matrix(&lat, &rates).unwrap();
        let from = q
            .encode(&Configuration::new(
                SiteSet::from_sites(2, [0]),
                SiteSet::from_sites(2, [0, 1]),
            ))
            .unwrap();
        let to = q
            .encode(&Configuration::new(
                SiteSet::from_sites(2, [0, 1]),
                SiteSet::from_sites(2, [0, 1]),
            ))
            .unwrap();
        let dense = q.to_dense();
        assert!((dense[from * q.n_states() + to] - 3.0).abs() < 1e-12);

        // Unique-neighbor check on a 3-ring: exactly lambda.
        let lat3 = ring(3);
        let q3 = generator_matrix(&lat3, &rates).unwrap();
        let from = q3
            .encode(&Configuration::new(
                SiteSet::from_sites(3, [0]),
                SiteSet::full(3),
            ))
            .unwrap();
        let to = q3
            .encode(&Configuration::new(
                SiteSet::from_sites(3, [0, 1]),
                SiteSet::full(3),
            ))
            .unwrap();
        assert!((q3.to_dense()[from * q3.n_states() + to] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn transient_identity_cases() {
        let lat = ring(2);
        let rates = cp(1.0, 1.0, 1.0, 1.0);
        let q = generator_matrix(&lat, &rates).unwrap();
        let init = q
            .point_mass(&Configuration::new(
                SiteSet::from_sites(2, [0]),
                SiteSet::from_sites(2, [1]),
            ))
            .unwrap();
        let at0 = q.transient_distribution(&init, 0.0).unwrap();
        assert_eq!(at0, init);

        let frozen = generator_matrix(&lat, &cp(0.0, 0.0, 0.0, 0.0)).unwrap();
        let later = frozen.transient_distribution(&init, 5.0).unwrap();
        assert_eq!(later, init);

        assert!(q.transient_distribution(&[0.5; 4], 1.0).is_err());
    }

    #[test]
    fn transient_sums_to_one() {
        let lat = ring(3);
        let rates = RateSet::plain(2.0, 0.5, 0.3, 0.1, 1.0, 0.4, 1.0, 2.0);
        let q = generator_matrix(&lat, &rates).unwrap();
        let init = q
            .product_activity_initial(&SiteSet::from_sites(3, [0]), 2.0 / 3.0)
            .unwrap();
        for t in [0.1, 1.0, 5.0] {
            let dist = q.transient_distribution(&init, t).unwrap();
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-10, "sum {sum} at t {t}");
            assert!(dist.iter().all(|&p| p >= -1e-12));
        }
    }

    #[test]
    fn uniformization_matches_dense_expm() {
        let lat = ring(2);
        let rates = RateSet::plain(1.7, 0.6, 0.2, 0.9, 0.8, 0.35, 1.2, 0.4);
        let q = generator_matrix(&lat, &rates).unwrap();
        let init = q
            .product_activity_initial(&SiteSet::from_sites(2, [0]), 0.25)
            .unwrap();
        for t in [0.3, 1.0, 2.5] {
            let uni = q.transient_distribution(&init, t).unwrap();
            let dense = dense_expm_transient(&q.to_dense(), q.n_states(), &init, t);
            let max_diff = uni
                .iter()
                .zip(&dense)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_diff < 1e-8, "max diff {max_diff} at t {t}");
        }
    }

    #[test]
    fn activity_marginal_stationary_exact() {
        let lat = ring(3);
        let rates = cp(2.0, 1.0, 3.0, 1.0);
        let alpha = crate::rates::alpha(&rates).unwrap();
        let q = generator_matrix(&lat, &rates).unwrap();
        let init = q
            .product_activity_initial(&SiteSet::from_sites(3, [0]), alpha)
            .unwrap();
        for t in [0.5, 2.0] {
            let dist = q.transient_distribution(&init, t).unwrap();
            let p_active = q.exact_marginal(&dist, |s| s.site(0).activity == Activity::Active);
            assert!((p_active - alpha).abs() < 1e-10, "p {p_active}");
        }
        let total = q.exact_marginal(&q.transient_distribution(&init, 1.0).unwrap(), |_| true);
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn all_healthy_is_absorbing_monotone() {
        let lat = ring(3);
        let rates = cp(1.2, 0.8, 1.0, 1.0);
        let q = generator_matrix(&lat, &rates).unwrap();
        let init = q
            .product_activity_initial(&SiteSet::from_sites(3, [0]), 0.5)
            .unwrap();
        let mut last = 0.0;
        for k in 0..8 {
            let dist = q.transient_distribution(&init, 0.5 * k as f64).unwrap();
            let p_empty = q.exact_marginal(&dist, |s| s.infected_iter().count() == 0);
            assert!(p_empty >= last - 1e-10, "p_empty regressed at step {k}");
            last = p_empty;
        }
    }

    #[test]
    fn rejects_oversized_lattice() {
        let lat = ring(9);
        let rates = cp(1.0, 1.0, 1.0, 1.0);
        assert!(generator_matrix(&lat, &rates).is_err());
    }

    #[test]
    fn cpb_uses_reduced_state_space() {
        let lat = ring(3);
        let rates = preset(
            Preset::Cpb,
            &BaseRates {
                lambda: 2.0,
                delta_a: 1.0,
                delta_d: None,
                sigma: 1.0,
                rho: 0.5,
            },
        )
        .unwrap();
        let q = generator_matrix(&lat, &rates).unwrap();
        assert_eq!(q.n_states(), 27);
    }
}
