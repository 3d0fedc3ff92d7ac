//! Body/boundary fusion by seeded region expansion.
//!
//! Every 4-connected Body component becomes a seed. All seeds then grow
//! simultaneously, one geodesic step per round, into Boundary pixels only.
//! A Boundary pixel belongs to the first front that reaches it; fronts
//! arriving in the same round resolve to the lowest seed id. Growth stops
//! after `max_radius` rounds and whatever Boundary is left unclaimed reverts
//! to background.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Calibration, ClassMask, Label};
use crate::shape::Fragment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const N8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl Connectivity {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &N4,
            Connectivity::Eight => &N8,
        }
    }

    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::invalid(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[inline]
pub(crate) fn neighbors(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    conn: Connectivity,
) -> impl Iterator<Item = (usize, usize)> {
    conn.offsets().iter().filter_map(move |&(dx, dy)| {
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < width && ny < height).then_some((nx, ny))
    })
}

/// Connected Body components. Component `i` carries seed id `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet {
    pub width: usize,
    pub height: usize,
    pub connectivity: Connectivity,
    pub components: Vec<Vec<(usize, usize)>>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Per-pixel fragment ids, 0 for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
    instance_count: u32,
}

impl InstanceMap {
    /// Validates that ids lie in `[0, instance_count]` and every positive id is used.
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || ids.len() != width * height {
            return Err(Error::invalid(format!(
                "instance map {width}x{height} with {} ids",
                ids.len()
            )));
        }
        let count = ids.iter().copied().max().unwrap_or(0);
        let mut used = vec![false; count as usize + 1];
        for &id in &ids {
            used[id as usize] = true;
        }
        if let Some(gap) = used.iter().skip(1).position(|&u| !u) {
            return Err(Error::invalid(format!(
                "instance id {} unused below maximum {count}",
                gap + 1
            )));
        }
        Ok(Self {
            width,
            height,
            ids,
            instance_count: count,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn instance_count(&self) -> u32 {
        self.instance_count
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.width + x]
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Pixel coordinates of every instance, indexed by `id - 1`.
    pub fn pixel_lists(&self) -> Vec<Vec<(usize, usize)>> {
        let mut lists = vec![Vec::new(); self.instance_count as usize];
        for (i, &id) in self.ids.iter().enumerate() {
            if id > 0 {
                lists[id as usize - 1].push((i % self.width, i / self.width));
            }
        }
        lists
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub max_radius: u32,
    pub step_connectivity: Connectivity,
    pub seed_connectivity: Connectivity,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            max_radius: 10,
            step_connectivity: Connectivity::Eight,
            seed_connectivity: Connectivity::Four,
        }
    }
}

pub fn extract_seeds(mask: &ClassMask, connectivity: Connectivity) -> SeedSet {
    let (w, h) = mask.dims();
    let mut visited = vec![false; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if visited[y * w + x] || mask.get(x, y) != Label::Body {
                continue;
            }
            let mut comp = Vec::new();
            visited[y * w + x] = true;
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                comp.push((cx, cy));
                for (nx, ny) in neighbors(cx, cy, w, h, connectivity) {
                    let i = ny * w + nx;
                    if !visited[i] && mask.get(nx, ny) == Label::Body {
                        visited[i] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            comp.sort_by_key(|&(px, py)| (py, px));
            components.push(comp);
        }
    }
    SeedSet {
        width: w,
        height: h,
        connectivity,
        components,
    }
}

pub fn expand_regions(mask: &ClassMask, seeds: &SeedSet, cfg: &ExpansionConfig) -> Result<InstanceMap> {
    let (w, h) = mask.dims();
    if (seeds.width, seeds.height) != (w, h) {
        return Err(Error::invalid("seed set does not match mask dimensions"));
    }
    if seeds.len() > u32::MAX as usize {
        return Err(Error::invalid("too many seeds"));
    }
    let mut ids = vec![0u32; w * h];
    let mut frontier = Vec::new();
    for (k, comp) in seeds.components.iter().enumerate() {
        let id = k as u32 + 1;
        for &(x, y) in comp {
            if mask.get(x, y) != Label::Body {
                return Err(Error::invalid(format!(
                    "seed pixel ({x}, {y}) is not Body"
                )));
            }
            ids[y * w + x] = id;
            frontier.push((x, y));
        }
    }

    // One round per geodesic step. Candidates collect the minimum arriving
    // id and are committed only after the whole round, so scan order never
    // affects the result.
    let mut next = Vec::new();
    for _ in 0..cfg.max_radius {
        if frontier.is_empty() {
            break;
        }
        next.clear();
        for &(x, y) in &frontier {
            let owner = ids[y * w + x];
            for (nx, ny) in neighbors(x, y, w, h, cfg.step_connectivity) {
                let i = ny * w + nx;
                if mask.get(nx, ny) != Label::Boundary {
                    continue;
                }
                let cur = ids[i];
                if cur == 0 {
                    ids[i] = owner | PENDING;
                    next.push((nx, ny));
                } else if cur & PENDING != 0 && owner < cur & !PENDING {
                    ids[i] = owner | PENDING;
                }
            }
        }
        for &(x, y) in &next {
            ids[y * w + x] &= !PENDING;
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    InstanceMap::new(w, h, ids)
}

const PENDING: u32 = 1 << 31;

/// Drops fragments whose equivalent diameter is at most `min_diameter_px`
/// pixels, clears them from the map and renumbers the survivors 1..n in
/// their original id order.
pub fn filter_fine(
    instances: &InstanceMap,
    fragments: &[Fragment],
    min_diameter_px: f64,
    cal: &Calibration,
) -> Result<(InstanceMap, Vec<Fragment>)> {
    if !(min_diameter_px >= 0.0) {
        return Err(Error::invalid(format!(
            "fine-particle threshold must be nonnegative, got {min_diameter_px}"
        )));
    }
    let mut remap = vec![0u32; instances.instance_count() as usize + 1];
    let mut kept = Vec::new();
    let mut sorted: Vec<&Fragment> = fragments.iter().collect();
    sorted.sort_by_key(|f| f.id);
    for f in sorted {
        if f.id == 0 || f.id > instances.instance_count() {
            return Err(Error::invalid(format!(
                "fragment id {} not present in instance map",
                f.id
            )));
        }
        let d_px = f.d / cal.cm_per_pixel();
        if d_px > min_diameter_px {
            let new_id = kept.len() as u32 + 1;
            remap[f.id as usize] = new_id;
            kept.push(Fragment { id: new_id, ..f.clone() });
        }
    }
    let ids = instances.ids().iter().map(|&id| remap[id as usize]).collect();
    Ok((InstanceMap::new(instances.width(), instances.height(), ids)?, kept))
}
