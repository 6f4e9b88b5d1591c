//! Finite d-dimensional lattices with an explicit neighborhood offset list.

use serde::{Deserialize, Serialize};

use crate::error::{CpsError, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Free,
}

/// Declarative lattice description: side lengths, boundary rule and the
/// neighborhood offsets. Offsets are directed: site `x + z` infects `x` for
/// each offset `z`, matching per-pair infection rates.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sides: Vec<usize>,
    pub boundary: Boundary,
    pub offsets: Vec<Vec<i64>>,
}

impl LatticeSpec {
    /// One-dimensional periodic ring with nearest-neighbor offsets.
    pub fn ring(len: usize) -> Self {
        LatticeSpec {
            sides: vec![len],
            boundary: Boundary::Periodic,
            offsets: Self::nearest_neighbor_offsets(1),
        }
    }

    /// Periodic box with nearest-neighbor offsets.
    pub fn torus(sides: Vec<usize>) -> Self {
        let d = sides.len();
        LatticeSpec {
            sides,
            boundary: Boundary::Periodic,
            offsets: Self::nearest_neighbor_offsets(d),
        }
    }

    /// Free-boundary box with nearest-neighbor offsets.
    pub fn free_box(sides: Vec<usize>) -> Self {
        let d = sides.len();
        LatticeSpec {
            sides,
            boundary: Boundary::Free,
            offsets: Self::nearest_neighbor_offsets(d),
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<Vec<i64>>) -> Self {
        self.offsets = offsets;
        self
    }

    /// The 2d nearest-neighbor offsets `±e_i`.
    pub fn nearest_neighbor_offsets(d: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for sign in [1i64, -1] {
                let mut z = vec![0i64; d];
                z[axis] = sign;
                out.push(z);
            }
        }
        out
    }

    pub fn dimension(&self) -> usize {
        self.sides.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sides.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sides.is_empty() {
            return Err(CpsError::InvalidLattice("no dimensions given".into()));
        }
        if self.sides.contains(&0) {
            return Err(CpsError::InvalidLattice(
                "side lengths must be positive".into(),
            ));
        }
        if self.offsets.is_empty() {
            return Err(CpsError::InvalidLattice(
                "neighborhood must be nonempty".into(),
            ));
        }
        for z in &self.offsets {
            if z.len() != self.dimension() {
                return Err(CpsError::InvalidLattice(format!(
                    "offset {z:?} has wrong dimension, expected {}",
                    self.dimension()
                )));
            }
            if z.iter().all(|&c| c == 0) {
                return Err(CpsError::InvalidLattice(
                    "neighborhood must exclude the zero vector".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<Lattice> {
        self.validate()?;
        Ok(Lattice::new(self.clone()))
    }
}

/// Compiled lattice: site indexing plus the directed arrow-slot table.
///
/// Slot `x * K + k` is the directed edge from `x + z_k` into `x`, when that
/// source exists under the boundary rule. Per-pair infection streams and the
/// generator's neighbor counts both run over these slots.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    n_sites: usize,
    n_offsets: usize,
    slot_from: Vec<Option<u32>>,
    out_slots: Vec<Vec<u32>>,
    in_slots: Vec<Vec<u32>>,
    /// `neg_offset[k] = k'` with `z_{k'} = -z_k` when the neighborhood is
    /// symmetric; `None` otherwise.
    neg_offset: Option<Vec<usize>>,
}

impl Lattice {
    fn new(spec: LatticeSpec) -> Self {
        let n_sites = spec.n_sites();
        let n_offsets = spec.offsets.len();
        let mut slot_from = vec![None; n_sites * n_offsets];
        let mut out_slots = vec![Vec::new(); n_sites];
        let mut in_slots = vec![Vec::new(); n_sites];

        for site in 0..n_sites {
            for (k, z) in spec.offsets.iter().enumerate() {
                if let Some(src) = apply_offset(&spec, site, z) {
                    let slot = (site * n_offsets + k) as u32;
                    slot_from[slot as usize] = Some(src as u32);
                    out_slots[src].push(slot);
                    in_slots[site].push(slot);
                }
            }
        }

        let neg_offset = {
            let mut map = Vec::with_capacity(n_offsets);
            let mut ok = true;
            for z in &spec.offsets {
                let neg: Vec<i64> = z.iter().map(|c| -c).collect();
                match spec.offsets.iter().position(|w| *w == neg) {
                    Some(k) => map.push(k),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                Some(map)
            } else {
                None
            }
        };

        Lattice {
            spec,
            n_sites,
            n_offsets,
            slot_from,
            out_slots,
            in_slots,
            neg_offset,
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn n_offsets(&self) -> usize {
        self.n_offsets
    }

    pub fn n_slots(&self) -> usize {
        self.n_sites * self.n_offsets
    }

    /// Source site of a slot, if the slot is valid under the boundary rule.
    #[inline]
    pub fn slot_source(&self, slot: usize) -> Option<usize> {
        self.slot_from[slot].map(|s| s as usize)
    }

    /// Target site of a slot.
    #[inline]
    pub fn slot_target(&self, slot: usize) -> usize {
        slot / self.n_offsets
    }

    /// Slots whose source is `site` (arrows out of `site`).
    #[inline]
    pub fn out_slots(&self, site: usize) -> &[u32] {
        &self.out_slots[site]
    }

    /// Valid slots targeting `site` (arrows into `site`).
    #[inline]
    pub fn in_slots(&self, site: usize) -> &[u32] {
        &self.in_slots[site]
    }

    /// Sites that can infect `site` (its `x + N` neighborhood).
    pub fn infectors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        self.in_slots[site]
            .iter()
            .map(move |&s| self.slot_from[s as usize].unwrap() as usize)
    }

    pub fn symmetric_neighborhood(&self) -> bool {
        self.neg_offset.is_some()
    }

    /// Slot carrying the reversed arrow of `slot`; requires a symmetric
    /// neighborhood.
    pub fn reversed_slot(&self, slot: usize) -> Result<usize> {
        let neg = self.neg_offset.as_ref().ok_or_else(|| {
            CpsError::Unsupported("arrow reversal needs a symmetric neighborhood".to_string())
        })?;
        let k = slot % self.n_offsets;
        let src = self.slot_from[slot]
            .ok_or_else(|| CpsError::InvalidLattice(format!("slot {slot} has no source")))?
            as usize;
        Ok(src * self.n_offsets + neg[k])
    }

    pub fn site_coords(&self, site: usize) -> Vec<usize> {
        let mut rem = site;
        let mut coords = vec![0usize; self.spec.sides.len()];
        for (i, &side) in self.spec.sides.iter().enumerate().rev() {
            coords[i] = rem % side;
            rem /= side;
        }
        coords
    }
}

fn apply_offset(spec: &LatticeSpec, site: usize, z: &[i64]) -> Option<usize> {
    let mut rem = site;
    let d = spec.sides.len();
    let mut coords = vec![0i64; d];
    for i in (0..d).rev() {
        coords[i] = (rem % spec.sides[i]) as i64;
        rem /= spec.sides[i];
    }
    let mut idx: usize = 0;
    for i in 0..d {
        let side = spec.sides[i] as i64;
        let mut c = coords[i] + z[i];
        match spec.boundary {
            Boundary::Periodic => {
                c = c.rem_euclid(side);
            }
            Boundary::Free => {
                if c < 0 || c >= side {
                    return None;
                }
            }
        }
        idx = idx * spec.sides[i] + c as usize;
    }
    Some(idx)
}
