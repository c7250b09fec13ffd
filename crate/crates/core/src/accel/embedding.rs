//! Ordinal min-max encoding of accelerator configs into [0,1]^13, the
//! inverse snap-decode, and best-first enumeration of nearest configs.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::accel::space::{AccelSpace, AcceleratorConfig, MemConfig, MemType};
use crate::error::{Error, Result};

pub const ACCEL_EMBED_DIM: usize = 13;

/// 13 reals in [0,1], one per hyperparameter (kernel parallelism occupies
/// two tied coordinates; memory type and configuration are nested).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelEmbedding(pub [f64; ACCEL_EMBED_DIM]);

impl AccelEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn ordinal(set: &[u32], value: u32) -> Result<usize> {
    set.iter()
        .position(|&v| v == value)
        .ok_or_else(|| Error::Validation(format!("value {value} not in set {set:?}")))
}

fn norm(i: usize, len: usize) -> f64 {
    if len <= 1 {
        0.0
    } else {
        i as f64 / (len - 1) as f64
    }
}

/// Snap a coordinate to the nearest ordinal index; ties take the smaller
/// index.
fn snap(x: f64, len: usize) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..len.max(1) {
        let d = (x - norm(i, len)).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Encode a valid config; errors if it is outside the space.
pub fn encode(space: &AccelSpace, c: &AcceleratorConfig) -> Result<AccelEmbedding> {
    space.validate(c)?;
    let k_ord = ordinal(&space.p_k, c.p_kx)?;
    let t_ord = space
        .mem
        .iter()
        .position(|(t, _)| *t == c.mem_type)
        .unwrap();
    let cfgs = &space.mem[t_ord].1;
    let c_ord = cfgs.iter().position(|m| *m == c.mem_config).unwrap();
    Ok(AccelEmbedding([
        norm(ordinal(&space.p_ib, c.p_ib)?, space.p_ib.len()),
        norm(ordinal(&space.p_if, c.p_if)?, space.p_if.len()),
        norm(ordinal(&space.p_ix, c.p_ix)?, space.p_ix.len()),
        norm(ordinal(&space.p_iy, c.p_iy)?, space.p_iy.len()),
        norm(ordinal(&space.p_of, c.p_of)?, space.p_of.len()),
        norm(k_ord, space.p_k.len()),
        norm(k_ord, space.p_k.len()),
        norm(ordinal(&space.batch, c.batch)?, space.batch.len()),
        norm(ordinal(&space.act_buf_mb, c.act_buf_mb)?, space.act_buf_mb.len()),
        norm(ordinal(&space.wgt_buf_mb, c.wgt_buf_mb)?, space.wgt_buf_mb.len()),
        norm(ordinal(&space.mask_buf_mb, c.mask_buf_mb)?, space.mask_buf_mb.len()),
        norm(t_ord, space.mem.len()),
        norm(c_ord, cfgs.len()),
    ]))
}

/// Decode an arbitrary vector to the nearest valid config. Coordinates
/// outside [0,1] are clamped; the flag reports whether clamping happened.
pub fn decode(space: &AccelSpace, x: &[f64]) -> Result<(AcceleratorConfig, bool)> {
    if x.len() != ACCEL_EMBED_DIM {
        return Err(Error::Parameter(format!(
            "accelerator embedding must have {ACCEL_EMBED_DIM} coordinates, got {}",
            x.len()
        )));
    }
    let mut clamped = false;
    let v: Vec<f64> = x
        .iter()
        .map(|&c| {
            if !(0.0..=1.0).contains(&c) {
                clamped = true;
            }
            c.clamp(0.0, 1.0)
        })
        .collect();

    // Kernel coordinates are tied: pick the ordinal minimizing the summed
    // squared error of both coordinates, i.e. snap their mean.
    let k_len = space.p_k.len();
    let k_ord = snap((v[5] + v[6]) / 2.0, k_len);

    // Memory type and configuration minimize the joint 2-coordinate error.
    let mut best_mem = (0usize, 0usize);
    let mut best_d = f64::INFINITY;
    for (ti, (_, cfgs)) in space.mem.iter().enumerate() {
        let dt = v[11] - norm(ti, space.mem.len());
        for ci in 0..cfgs.len() {
            let dc = v[12] - norm(ci, cfgs.len());
            let d = dt * dt + dc * dc;
            if d < best_d {
                best_d = d;
                best_mem = (ti, ci);
            }
        }
    }
    let (mem_type, mem_config) = {
        let (t, cfgs) = &space.mem[best_mem.0];
        (*t, cfgs[best_mem.1])
    };

    let k = space.p_k[k_ord];
    let c = AcceleratorConfig {
        p_ib: space.p_ib[snap(v[0], space.p_ib.len())],
        p_if: space.p_if[snap(v[1], space.p_if.len())],
        p_ix: space.p_ix[snap(v[2], space.p_ix.len())],
        p_iy: space.p_iy[snap(v[3], space.p_iy.len())],
        p_of: space.p_of[snap(v[4], space.p_of.len())],
        p_kx: k,
        p_ky: k,
        batch: space.batch[snap(v[7], space.batch.len())],
        act_buf_mb: space.act_buf_mb[snap(v[8], space.act_buf_mb.len())],
        wgt_buf_mb: space.wgt_buf_mb[snap(v[9], space.wgt_buf_mb.len())],
        mask_buf_mb: space.mask_buf_mb[snap(v[10], space.mask_buf_mb.len())],
        mem_type,
        mem_config,
    };
    Ok((c, clamped))
}

/// Composite choice dimension for best-first nearest enumeration.
struct Dim {
    /// (cost, ordinal rank for tie-breaking, payload index) sorted by cost
    /// then ordinal.
    choices: Vec<(f64, usize)>,
}

fn scalar_dim(x: f64, len: usize) -> Dim {
    let mut choices: Vec<(f64, usize)> = (0..len)
        .map(|i| {
            let d = x - norm(i, len);
            (d * d, i)
        })
        .collect();
    choices.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Dim { choices }
}

struct HeapEntry {
    cost: f64,
    ordinals: Vec<usize>,
    ranks: Vec<usize>,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: reverse so the smallest cost pops first,
        // ties resolved by the lexicographically smaller ordinal tuple.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap()
            .then_with(|| other.ordinals.cmp(&self.ordinals))
    }
}

/// Yields configs of `space` in nondecreasing squared distance from a query
/// vector; ties break lexicographically on the ordinal tuple.
pub struct NearestConfigIter<'a> {
    space: &'a AccelSpace,
    dims: Vec<Dim>,
    mem_choices: Vec<(MemType, MemConfig)>,
    heap: BinaryHeap<HeapEntry>,
    seen: BTreeSet<Vec<usize>>,
}

impl<'a> NearestConfigIter<'a> {
    pub fn new(space: &'a AccelSpace, x: &[f64]) -> Result<Self> {
        if x.len() != ACCEL_EMBED_DIM {
            return Err(Error::Parameter(format!(
                "query must have {ACCEL_EMBED_DIM} coordinates"
            )));
        }
        let v: Vec<f64> = x.iter().map(|&c| c.clamp(0.0, 1.0)).collect();
        let mut dims = Vec::new();
        // nine independent scalar dims
        dims.push(scalar_dim(v[0], space.p_ib.len()));
        dims.push(scalar_dim(v[1], space.p_if.len()));
        dims.push(scalar_dim(v[2], space.p_ix.len()));
        dims.push(scalar_dim(v[3], space.p_iy.len()));
        dims.push(scalar_dim(v[4], space.p_of.len()));
        dims.push(scalar_dim(v[7], space.batch.len()));
        dims.push(scalar_dim(v[8], space.act_buf_mb.len()));
        dims.push(scalar_dim(v[9], space.wgt_buf_mb.len()));
        dims.push(scalar_dim(v[10], space.mask_buf_mb.len()));
        // tied kernel pair
        let k_len = space.p_k.len();
        let mut k_choices: Vec<(f64, usize)> = (0..k_len)
            .map(|i| {
                let e = norm(i, k_len);
                let d5 = v[5] - e;
                let d6 = v[6] - e;
                (d5 * d5 + d6 * d6, i)
            })
            .collect();
        k_choices.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        dims.push(Dim { choices: k_choices });
        // nested memory choice
        let mem_choices = space.mem_choices();
        let mut m_choices = Vec::new();
        let mut flat = 0usize;
        for (ti, (_, cfgs)) in space.mem.iter().enumerate() {
            let dt = v[11] - norm(ti, space.mem.len());
            for ci in 0..cfgs.len() {
                let dc = v[12] - norm(ci, cfgs.len());
                m_choices.push((dt * dt + dc * dc, flat));
                flat += 1;
            }
        }
        m_choices.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        dims.push(Dim { choices: m_choices });

        for d in &dims {
            if d.choices.is_empty() {
                return Err(Error::Parameter("space has an empty value set".into()));
            }
        }

        let ranks = vec![0usize; dims.len()];
        let first = Self::entry(&dims, &ranks);
        let mut heap = BinaryHeap::new();
        let mut seen = BTreeSet::new();
        seen.insert(ranks);
        heap.push(first);
        Ok(NearestConfigIter {
            space,
            dims,
            mem_choices,
            heap,
            seen,
        })
    }

    fn entry(dims: &[Dim], ranks: &[usize]) -> HeapEntry {
        let mut cost = 0.0;
        let mut ordinals = Vec::with_capacity(ranks.len());
        for (d, &r) in dims.iter().zip(ranks) {
            cost += d.choices[r].0;
            ordinals.push(d.choices[r].1);
        }
        HeapEntry {
            cost,
            ordinals,
            ranks: ranks.to_vec(),
        }
    }

    fn config_from(&self, ordinals: &[usize]) -> AcceleratorConfig {
        let s = self.space;
        let k = s.p_k[ordinals[9]];
        let (mem_type, mem_config) = self.mem_choices[ordinals[10]];
        AcceleratorConfig {
            p_ib: s.p_ib[ordinals[0]],
            p_if: s.p_if[ordinals[1]],
            p_ix: s.p_ix[ordinals[2]],
            p_iy: s.p_iy[ordinals[3]],
            p_of: s.p_of[ordinals[4]],
            p_kx: k,
            p_ky: k,
            batch: s.batch[ordinals[5]],
            act_buf_mb: s.act_buf_mb[ordinals[6]],
            wgt_buf_mb: s.wgt_buf_mb[ordinals[7]],
            mask_buf_mb: s.mask_buf_mb[ordinals[8]],
            mem_type,
            mem_config,
        }
    }
}

impl Iterator for NearestConfigIter<'_> {
    /// (config, squared distance)
    type Item = (AcceleratorConfig, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let top = self.heap.pop()?;
        for i in 0..self.dims.len() {
            if top.ranks[i] + 1 < self.dims[i].choices.len() {
                let mut ranks = top.ranks.clone();
                ranks[i] += 1;
                if self.seen.insert(ranks.clone()) {
                    self.heap.push(Self::entry(&self.dims, &ranks));
                }
            }
        }
        let config = self.config_from(&top.ordinals);
        Some((config, top.cost))
    }
}
