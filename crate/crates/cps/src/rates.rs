//! Rate parameters, named model presets, closed-form bound computations and
//! the parameter partial order behind the monotone couplings.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CpsError, Result};

/// Activity type of a site.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Active,
    Dormant,
}

/// Recovery rate of dormant infected sites. `Instant` encodes the blocking
/// variant where a dormant infection vanishes the moment it appears; it never
/// enters rate arithmetic.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum DormantRecovery {
    Finite(f64),
    Instant,
}

impl DormantRecovery {
    pub fn finite(self) -> Option<f64> {
        match self {
            DormantRecovery::Finite(v) => Some(v),
            DormantRecovery::Instant => None,
        }
    }

    pub fn is_instant(self) -> bool {
        matches!(self, DormantRecovery::Instant)
    }
}

impl Serialize for DormantRecovery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DormantRecovery::Finite(v) => s.serialize_f64(*v),
            DormantRecovery::Instant => s.serialize_str("instant"),
        }
    }
}

impl<'de> Deserialize<'de> for DormantRecovery {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(DormantRecovery::Finite(v)),
            Repr::Text(t) if t == "instant" => Ok(DormantRecovery::Instant),
            Repr::Text(t) => Err(D::Error::custom(format!(
                "expected a rate or \"instant\", got \"{t}\""
            ))),
        }
    }
}

/// Model variant. `Plain` covers the switching process and every special case
/// expressible through rates alone; `Cpb` adds instant dormant recovery and
/// blocked dormant targets; `Cpid` makes infections land targets in the
/// active state through diagonal arrows.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Cpb,
    Cpid,
}

/// Full parameter vector: four per-pair infection rates, two recovery rates,
/// four switching rates and the variant flag.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RateSet {
    pub lambda_aa: f64,
    pub lambda_ad: f64,
    pub lambda_da: f64,
    pub lambda_dd: f64,
    pub delta_a: f64,
    pub delta_d: DormantRecovery,
    /// Healthy-site switch rates (active to dormant, dormant to active).
    pub sigma0: f64,
    pub rho0: f64,
    /// Infected-site switch rates.
    pub sigma1: f64,
    pub rho1: f64,
    pub variant: Variant,
}

impl RateSet {
    /// Symmetric-switching rate set of the plain variant.
    #[allow(clippy::too_many_arguments)]
    pub fn plain(
        lambda_aa: f64,
        lambda_ad: f64,
        lambda_da: f64,
        lambda_dd: f64,
        delta_a: f64,
        delta_d: f64,
        sigma: f64,
        rho: f64,
    ) -> Self {
        RateSet {
            lambda_aa,
            lambda_ad,
            lambda_da,
            lambda_dd,
            delta_a,
            delta_d: DormantRecovery::Finite(delta_d),
            sigma0: sigma,
            rho0: rho,
            sigma1: sigma,
            rho1: rho,
            variant: Variant::Plain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_aa", self.lambda_aa),
            ("lambda_ad", self.lambda_ad),
            ("lambda_da", self.lambda_da),
            ("lambda_dd", self.lambda_dd),
            ("delta_a", self.delta_a),
            ("sigma0", self.sigma0),
            ("rho0", self.rho0),
            ("sigma1", self.sigma1),
            ("rho1", self.rho1),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(CpsError::invalid(format!(
                    "{name} must be a finite rate >= 0, got {v}"
                )));
            }
        }
        match self.delta_d {
            DormantRecovery::Finite(v) => {
                if !v.is_finite() || v < 0.0 {
                    return Err(CpsError::invalid(format!(
                        "delta_d must be a finite rate >= 0, got {v}"
                    )));
                }
            }
            DormantRecovery::Instant => {
                if self.variant != Variant::Cpb {
                    return Err(CpsError::invalid(
                        "instant delta_d is only allowed for the cpb variant",
                    ));
                }
            }
        }
        if self.variant == Variant::Cpb && !self.delta_d.is_instant() {
            return Err(CpsError::invalid("cpb variant requires delta_d = instant"));
        }
        Ok(())
    }

    pub fn is_symmetric_switching(&self) -> bool {
        self.sigma0 == self.sigma1 && self.rho0 == self.rho1
    }

    /// `(sigma, rho)` under symmetric switching.
    pub fn symmetric_switching(&self) -> Result<(f64, f64)> {
        if !self.is_symmetric_switching() {
            return Err(CpsError::precondition(
                "operation requires sigma0 = sigma1 and rho0 = rho1",
            ));
        }
        Ok((self.sigma0, self.rho0))
    }

    pub fn finite_delta_d(&self) -> Result<f64> {
        self.delta_d
            .finite()
            .ok_or_else(|| CpsError::precondition("operation rejects instant delta_d"))
    }

    /// Infection rate from an infector of type `src` to a target of type `dst`.
    #[inline]
    pub fn lambda(&self, src: Activity, dst: Activity) -> f64 {
        use Activity::*;
        match (src, dst) {
            (Active, Active) => self.lambda_aa,
            (Active, Dormant) => self.lambda_ad,
            (Dormant, Active) => self.lambda_da,
            (Dormant, Dormant) => self.lambda_dd,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_aa
            .max(self.lambda_ad)
            .max(self.lambda_da)
            .max(self.lambda_dd)
    }

    /// Same parameters with the cross infection rates exchanged (the dual
    /// process law).
    pub fn swap_ad_da(&self) -> RateSet {
        let mut out = self.clone();
        out.lambda_ad = self.lambda_da;
        out.lambda_da = self.lambda_ad;
        out
    }
}

/// Stationary activity probability `alpha = rho / (sigma + rho)`.
pub fn alpha(rates: &RateSet) -> Result<f64> {
    rates.validate()?;
    let (sigma, rho) = rates.symmetric_switching()?;
    if sigma + rho <= 0.0 {
        return Err(CpsError::precondition("alpha needs sigma + rho > 0"));
    }
    Ok(rho / (sigma + rho))
}

/// Effective rates of the fast-switching limit.
pub fn effective_fast_rates(rates: &RateSet) -> Result<(f64, f64)> {
    if rates.variant != Variant::Plain {
        return Err(CpsError::precondition(
            "fast-switching rates are defined for the plain variant",
        ));
    }
    let a = alpha(rates)?;
    let delta_d = rates.finite_delta_d()?;
    let lambda_star = a * a * rates.lambda_aa
        + a * (1.0 - a) * (rates.lambda_ad + rates.lambda_da)
        + (1.0 - a) * (1.0 - a) * rates.lambda_dd;
    let delta_star = a * rates.delta_a + (1.0 - a) * delta_d;
    Ok((lambda_star, delta_star))
}

/// Largest homogeneous rate extractable from `k` paired Poisson streams whose
/// intensity is modulated by a two-state chain: rate `lambda0` while the chain
/// sits in state 0, `lambda1` in state 1, jumping to 0 at rate `sigma` and to
/// 1 at rate `rho`.
///
/// The closed form is stated for `lambda1 >= lambda0`; the opposite ordering
/// is the same modulated system with the state labels exchanged, so the
/// arguments are swapped pairwise first. This makes
/// `lambda_bar(l0, l1, s, r, k) == lambda_bar(l1, l0, r, s, k)` an identity.
pub fn lambda_bar(lambda0: f64, lambda1: f64, sigma: f64, rho: f64, k: usize) -> Result<f64> {
    for (name, v) in [
        ("lambda0", lambda0),
        ("lambda1", lambda1),
        ("sigma", sigma),
        ("rho", rho),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(CpsError::invalid(format!(
                "{name} must be a finite rate >= 0, got {v}"
            )));
        }
    }
    if k == 0 {
        return Err(CpsError::invalid("k must be a positive integer"));
    }
    if sigma + rho <= 0.0 {
        return Err(CpsError::precondition("lambda_bar needs sigma + rho > 0"));
    }
    let (lo, hi, s, r) = if lambda1 >= lambda0 {
        (lambda0, lambda1, sigma, rho)
    } else {
        (lambda1, lambda0, rho, sigma)
    };
    let kf = k as f64;
    let gap = hi - lo;
    let sk = s / kf;
    let rk = r / kf;
    let root = ((gap - rk - sk).powi(2) + 4.0 * sk * gap).sqrt();
    let value = 0.5 * (hi + lo + rk + sk - root);
    // The analytic value sits in [min, max]; clamp rounding drift away.
    Ok(value.clamp(lo.min(hi), lo.max(hi)))
}

/// Rates of the basic contact process dominating the switching process:
/// the largest infection rate and the modulated-recovery bound `delta_bar`.
pub fn dominating_cp_rates(rates: &RateSet) -> Result<(f64, f64)> {
    rates.validate()?;
    let (sigma, rho) = rates.symmetric_switching()?;
    let delta_d = rates.finite_delta_d()?;
    let delta_bar = lambda_bar(delta_d, rates.delta_a, sigma, rho, 1)?;
    Ok((rates.lambda_max(), delta_bar))
}

/// Which arrows the dominated-process bound groups by: arrows leaving a site
/// or arrows entering it. Neither choice dominates the other in general.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrowOrientation {
    Outgoing,
    Incoming,
}

/// Rates of the basic contact process dominated by the switching process.
pub fn dominated_cp_rates(
    rates: &RateSet,
    neighborhood_size: usize,
    orientation: ArrowOrientation,
) -> Result<(f64, f64)> {
    rates.validate()?;
    let (sigma, rho) = rates.symmetric_switching()?;
    let delta_d = rates.finite_delta_d()?;
    if neighborhood_size == 0 {
        return Err(CpsError::invalid("neighborhood size must be positive"));
    }
    let (lambda_a, lambda_d) = match orientation {
        ArrowOrientation::Outgoing => (
            rates.lambda_aa.min(rates.lambda_ad),
            rates.lambda_da.min(rates.lambda_dd),
        ),
        ArrowOrientation::Incoming => (
            rates.lambda_aa.min(rates.lambda_da),
            rates.lambda_ad.min(rates.lambda_dd),
        ),
    };
    let lb = lambda_bar(lambda_d, lambda_a, sigma, rho, neighborhood_size)?;
    Ok((lb, rates.delta_a.max(delta_d)))
}

/// Parameter partial order behind the monotone coupling: every infection rate
/// of `upper` at least that of `lower`, every recovery rate at most.
///
/// Both sides must share switching rates and variant; the coupling runs the
/// two processes on one activity background.
pub fn param_dominates(lower: &RateSet, upper: &RateSet) -> Result<bool> {
    lower.validate()?;
    upper.validate()?;
    if lower.sigma0 != upper.sigma0
        || lower.sigma1 != upper.sigma1
        || lower.rho0 != upper.rho0
        || lower.rho1 != upper.rho1
    {
        return Err(CpsError::precondition(
            "param_dominates requires identical switching rates",
        ));
    }
    if lower.variant != upper.variant {
        return Err(CpsError::precondition(
            "param_dominates requires identical variants",
        ));
    }
    let lambdas_ok = upper.lambda_aa >= lower.lambda_aa
        && upper.lambda_ad >= lower.lambda_ad
        && upper.lambda_da >= lower.lambda_da
        && upper.lambda_dd >= lower.lambda_dd;
    let delta_a_ok = upper.delta_a <= lower.delta_a;
    let delta_d_ok = match (upper.delta_d, lower.delta_d) {
        (DormantRecovery::Finite(u), DormantRecovery::Finite(l)) => u <= l,
        (DormantRecovery::Instant, DormantRecovery::Instant) => true,
        (DormantRecovery::Finite(_), DormantRecovery::Instant) => true,
        (DormantRecovery::Instant, DormantRecovery::Finite(_)) => false,
    };
    Ok(lambdas_ok && delta_a_ok && delta_d_ok)
}

/// All closed-form comparison rates for one parameter set.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct EffectiveRates {
    pub alpha: f64,
    pub lambda_star: f64,
    pub delta_star: f64,
    pub lambda_max: f64,
    pub delta_bar: f64,
    pub lambda_bar_outgoing: f64,
    pub lambda_bar_incoming: f64,
    pub delta_max: f64,
}

impl EffectiveRates {
    pub fn compute(rates: &RateSet, neighborhood_size: usize) -> Result<EffectiveRates> {
        let a = alpha(rates)?;
        let (lambda_star, delta_star) = effective_fast_rates(rates)?;
        let (lambda_max, delta_bar) = dominating_cp_rates(rates)?;
        let (lb_out, delta_max) =
            dominated_cp_rates(rates, neighborhood_size, ArrowOrientation::Outgoing)?;
        let (lb_in, _) = dominated_cp_rates(rates, neighborhood_size, ArrowOrientation::Incoming)?;
        let out = EffectiveRates {
            alpha: a,
            lambda_star,
            delta_star,
            lambda_max,
            delta_bar,
            lambda_bar_outgoing: lb_out,
            lambda_bar_incoming: lb_in,
            delta_max,
        };
        debug_assert!(out.delta_bar <= out.delta_star + 1e-12);
        debug_assert!(out.delta_star <= out.delta_max + 1e-12);
        Ok(out)
    }
}

/// Named special cases of the model.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Basic contact process: type-independent rates.
    Cp,
    /// Host dormancy, microbial flavor: dormant sites neither infect, get
    /// infected, nor recover.
    CpdMicrobial,
    /// Host dormancy, distancing flavor: dormant sites still recover at the
    /// active rate.
    CpdSocial,
    /// Randomly evolving environment: type-independent infection, type
    /// dependent recovery.
    Cpree,
    /// Blocking: dormant sites block infection, dormant infections vanish.
    Cpb,
    /// Infection dormancy: the infection itself switches; new infections are
    /// always active.
    Cpid,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Preset> {
        match name {
            "cp" => Ok(Preset::Cp),
            "cpd_microbial" => Ok(Preset::CpdMicrobial),
            "cpd_social" => Ok(Preset::CpdSocial),
            "cpree" => Ok(Preset::Cpree),
            "cpb" => Ok(Preset::Cpb),
            "cpid" => Ok(Preset::Cpid),
            other => Err(CpsError::invalid(format!("unknown preset \"{other}\""))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cp => "cp",
            Preset::CpdMicrobial => "cpd_microbial",
            Preset::CpdSocial => "cpd_social",
            Preset::Cpree => "cpree",
            Preset::Cpb => "cpb",
            Preset::Cpid => "cpid",
        }
    }
}

/// Base rates a preset is built from. `delta_d` is only consulted by presets
/// that leave it free (`cp`, `cpree`, `cpid`).
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct BaseRates {
    pub lambda: f64,
    pub delta_a: f64,
    pub delta_d: Option<f64>,
    pub sigma: f64,
    pub rho: f64,
}

pub fn preset(which: Preset, base: &BaseRates) -> Result<RateSet> {
    let mk =
        |laa: f64, lad: f64, lda: f64, ldd: f64, da: f64, dd: DormantRecovery, variant| RateSet {
            lambda_aa: laa,
            lambda_ad: lad,
            lambda_da: lda,
            lambda_dd: ldd,
            delta_a: da,
            delta_d: dd,
            sigma0: base.sigma,
            rho0: base.rho,
            sigma1: base.sigma,
            rho1: base.rho,
            variant,
        };
    let l = base.lambda;
    let rates = match which {
        Preset::Cp => {
            let dd = base.delta_d.unwrap_or(base.delta_a);
            mk(
                l,
                l,
                l,
                l,
                base.delta_a,
                DormantRecovery::Finite(dd),
                Variant::Plain,
            )
        }
        Preset::CpdMicrobial => mk(
            l,
            0.0,
            0.0,
            0.0,
            base.delta_a,
            DormantRecovery::Finite(0.0),
            Variant::Plain,
        ),
        Preset::CpdSocial => mk(
            l,
            0.0,
            0.0,
            0.0,
            base.delta_a,
            DormantRecovery::Finite(base.delta_a),
            Variant::Plain,
        ),
        Preset::Cpree => {
            let dd = base
                .delta_d
                .ok_or_else(|| CpsError::invalid("cpree preset needs an explicit delta_d"))?;
            mk(
                l,
                l,
                l,
                l,
                base.delta_a,
                DormantRecovery::Finite(dd),
                Variant::Plain,
            )
        }
        Preset::Cpb => {
            // The blocking process is normalised to active recovery rate 1.
            mk(
                l,
                0.0,
                0.0,
                0.0,
                1.0,
                DormantRecovery::Instant,
                Variant::Cpb,
            )
        }
        Preset::Cpid => {
            let dd = base
                .delta_d
                .ok_or_else(|| CpsError::invalid("cpid preset needs an explicit delta_d"))?;
            if dd > base.delta_a {
                return Err(CpsError::invalid(
                    "cpid assumes dormant infections recover no faster than active ones",
                ));
            }
            // Diagonal arrows: targets of either type get infected at the
            // active-source rate and land active.
            mk(
                l,
                l,
                0.0,
                0.0,
                base.delta_a,
                DormantRecovery::Finite(dd),
                Variant::Cpid,
            )
        }
    };
    rates.validate()?;
    Ok(rates)
}
