//! Site sets and configurations.

use crate::rates::Activity;

/// Dense bitset over the sites of a fixed lattice.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SiteSet {
    blocks: Vec<u64>,
    n_sites: usize,
    count: usize,
}

impl SiteSet {
    pub fn empty(n_sites: usize) -> Self {
        SiteSet {
            blocks: vec![0; n_sites.div_ceil(64)],
            n_sites,
            count: 0,
        }
    }

    pub fn full(n_sites: usize) -> Self {
        let mut s = SiteSet::empty(n_sites);
        for i in 0..n_sites {
            s.insert(i);
        }
        s
    }

    pub fn from_sites(n_sites: usize, sites: impl IntoIterator<Item = usize>) -> Self {
        let mut s = SiteSet::empty(n_sites);
        for x in sites {
            s.insert(x);
        }
        s
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn contains(&self, site: usize) -> bool {
        debug_assert!(site < self.n_sites);
        self.blocks[site >> 6] & (1u64 << (site & 63)) != 0
    }

    /// Returns true if the site was newly inserted.
    #[inline]
    pub fn insert(&mut self, site: usize) -> bool {
        debug_assert!(site < self.n_sites);
        let b = &mut self.blocks[site >> 6];
        let mask = 1u64 << (site & 63);
        if *b & mask == 0 {
            *b |= mask;
            self.count += 1;
            true
        } else {
            false
        }
    }

    /// Returns true if the site was present.
    #[inline]
    pub fn remove(&mut self, site: usize) -> bool {
        debug_assert!(site < self.n_sites);
        let b = &mut self.blocks[site >> 6];
        let mask = 1u64 << (site & 63);
        if *b & mask != 0 {
            *b &= !mask;
            self.count -= 1;
            true
        } else {
            false
        }
    }

    pub fn is_subset_of(&self, other: &SiteSet) -> bool {
        debug_assert_eq!(self.n_sites, other.n_sites);
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        debug_assert_eq!(self.n_sites, other.n_sites);
        let blocks: Vec<u64> = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a | b)
            .collect();
        let count = blocks.iter().map(|b| b.count_ones() as usize).sum();
        SiteSet {
            blocks,
            n_sites: self.n_sites,
            count,
        }
    }

    pub fn intersects(&self, other: &SiteSet) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().flat_map(|(bi, &block)| {
            let mut b = block;
            std::iter::from_fn(move || {
                if b == 0 {
                    None
                } else {
                    let bit = b.trailing_zeros() as usize;
                    b &= b - 1;
                    Some(bi * 64 + bit)
                }
            })
        })
    }
}

impl std::fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// State of a single site: infection bit plus activity type.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SiteState {
    pub infected: bool,
    pub activity: Activity,
}

impl SiteState {
    pub const HEALTHY_DORMANT: SiteState = SiteState {
        infected: false,
        activity: Activity::Dormant,
    };
    pub const HEALTHY_ACTIVE: SiteState = SiteState {
        infected: false,
        activity: Activity::Active,
    };
    pub const INFECTED_DORMANT: SiteState = SiteState {
        infected: true,
        activity: Activity::Dormant,
    };
    pub const INFECTED_ACTIVE: SiteState = SiteState {
        infected: true,
        activity: Activity::Active,
    };

    /// Base-4 code: infection bit in the high position, activity in the low.
    #[inline]
    pub fn code(self) -> u8 {
        (self.infected as u8) * 2 + (self.activity == Activity::Active) as u8
    }

    #[inline]
    pub fn from_code(code: u8) -> SiteState {
        SiteState {
            infected: code >= 2,
            activity: if code & 1 == 1 {
                Activity::Active
            } else {
                Activity::Dormant
            },
        }
    }

    /// Short label used by exports and renders: `0a`, `0d`, `1a`, `1d`.
    pub fn label(self) -> &'static str {
        match (self.infected, self.activity) {
            (false, Activity::Active) => "0a",
            (false, Activity::Dormant) => "0d",
            (true, Activity::Active) => "1a",
            (true, Activity::Dormant) => "1d",
        }
    }
}

/// Pair of infected and active site sets over one lattice.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Configuration {
    pub infected: SiteSet,
    pub active: SiteSet,
}

impl Configuration {
    pub fn new(infected: SiteSet, active: SiteSet) -> Self {
        assert_eq!(infected.n_sites(), active.n_sites());
        Configuration { infected, active }
    }

    pub fn empty(n_sites: usize) -> Self {
        Configuration {
            infected: SiteSet::empty(n_sites),
            active: SiteSet::empty(n_sites),
        }
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.infected.n_sites()
    }

    #[inline]
    pub fn site_state(&self, site: usize) -> SiteState {
        SiteState {
            infected: self.infected.contains(site),
            activity: if self.active.contains(site) {
                Activity::Active
            } else {
                Activity::Dormant
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_remove_count() {
        let mut s = SiteSet::empty(130);
        assert!(s.insert(0));
        assert!(s.insert(129));
        assert!(!s.insert(0));
        assert_eq!(s.len(), 2);
        assert!(s.remove(0));
        assert!(!s.remove(0));
        assert_eq!(s.len(), 1);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![129]);
    }

    #[test]
    fn subset_and_union() {
        let a = SiteSet::from_sites(10, [1, 3]);
        let b = SiteSet::from_sites(10, [1, 3, 7]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        let u = a.union(&b);
        assert_eq!(u.len(), 3);
        assert!(u.intersects(&a));
    }

    #[test]
    fn state_codes_roundtrip() {
        for code in 0..4u8 {
            assert_eq!(SiteState::from_code(code).code(), code);
        }
        assert_eq!(SiteState::HEALTHY_DORMANT.code(), 0);
        assert_eq!(SiteState::INFECTED_ACTIVE.code(), 3);
    }
}
