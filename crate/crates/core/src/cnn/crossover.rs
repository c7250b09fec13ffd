//! Hierarchical crossover between neighboring graphs.
//!
//! Two parents with stack size `s` define, at every stack depth, a local
//! module space: the union of the modules the parents use at that depth.
//! Children are built at a finer stack size `s_new` (a divisor of `s`) by
//! choosing one module from the local space for each new stack slot; the
//! head comes from the union of the parents' heads.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cnn::graph::{ComputationalGraph, GraphModule};
use crate::error::{Error, Result};

/// The child design space induced by one crossover.
#[derive(Debug, Clone)]
pub struct CrossoverSpace {
    /// Per stack depth of the parents, the local module choices.
    pub local_spaces: Vec<Vec<GraphModule>>,
    /// Head module choices.
    pub heads: Vec<GraphModule>,
    /// New (finer) stack size.
    pub stack_size: usize,
    /// New stack slots per parent depth (= s / s_new).
    pub slots_per_depth: usize,
}

impl CrossoverSpace {
    /// Number of distinct children: product over every new stack slot of its
    /// local-space size, times the number of head choices.
    pub fn count(&self) -> u128 {
        let mut total: u128 = self.heads.len() as u128;
        for space in &self.local_spaces {
            let choices = space.len() as u128;
            for _ in 0..self.slots_per_depth {
                total = total.saturating_mul(choices);
            }
        }
        total
    }

    fn build(&self, slot_choices: &[usize], head_choice: usize) -> ComputationalGraph {
        let mut modules = Vec::new();
        let mut slot = 0;
        for space in &self.local_spaces {
            for _ in 0..self.slots_per_depth {
                let m = &space[slot_choices[slot]];
                for _ in 0..self.stack_size {
                    modules.push(m.clone());
                }
                slot += 1;
            }
        }
        modules.push(self.heads[head_choice].clone());
        ComputationalGraph::new(modules, self.stack_size)
    }

    /// Enumerate children in deterministic mixed-radix order, up to `limit`.
    pub fn enumerate(&self, limit: usize) -> Vec<ComputationalGraph> {
        let slots = self.local_spaces.len() * self.slots_per_depth;
        let radix: Vec<usize> = (0..slots)
            .map(|s| self.local_spaces[s / self.slots_per_depth].len())
            .collect();
        let mut out = Vec::new();
        let mut digits = vec![0usize; slots];
        'outer: loop {
            for h in 0..self.heads.len() {
                if out.len() >= limit {
                    break 'outer;
                }
                out.push(self.build(&digits, h));
            }
            // increment mixed-radix counter
            let mut i = 0;
            loop {
                if i == slots {
                    break 'outer;
                }
                digits[i] += 1;
                if digits[i] < radix[i] {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
        out
    }

    /// Sample one child uniformly over slot and head choices.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> ComputationalGraph {
        let slots = self.local_spaces.len() * self.slots_per_depth;
        let choices: Vec<usize> = (0..slots)
            .map(|s| rng.gen_range(0..self.local_spaces[s / self.slots_per_depth].len()))
            .collect();
        let head = rng.gen_range(0..self.heads.len());
        self.build(&choices, head)
    }
}

/// Cross two parents sharing stack size `s` into the child space at `s_new`.
pub fn crossover(
    best: &ComputationalGraph,
    neighbor: &ComputationalGraph,
    s_new: usize,
) -> Result<CrossoverSpace> {
    if best.stack_size != neighbor.stack_size {
        return Err(Error::Parameter(format!(
            "parents have different stack sizes ({} vs {})",
            best.stack_size, neighbor.stack_size
        )));
    }
    let s = best.stack_size;
    if s_new == 0 || s % s_new != 0 {
        return Err(Error::Parameter(format!(
            "new stack size {s_new} must divide parent stack size {s}"
        )));
    }
    let a = best.stack_modules();
    let b = neighbor.stack_modules();
    let depths = a.len().max(b.len());
    let mut local_spaces = Vec::with_capacity(depths);
    for d in 0..depths {
        let mut space: Vec<GraphModule> = Vec::new();
        if let Some(m) = a.get(d) {
            space.push((*m).clone());
        }
        if let Some(m) = b.get(d) {
            if !space.contains(m) {
                space.push((*m).clone());
            }
        }
        local_spaces.push(space);
    }
    let mut heads = Vec::new();
    if let Some(h) = best.head() {
        heads.push(h.clone());
    }
    if let Some(h) = neighbor.head() {
        if !heads.contains(h) {
            heads.push(h.clone());
        }
    }
    Ok(CrossoverSpace {
        local_spaces,
        heads,
        stack_size: s_new,
        slots_per_depth: s / s_new,
    })
}

/// Convenience: sample `n` distinct-ish children (duplicates allowed when the
/// space is smaller than `n`).
pub fn sample_children<R: Rng>(
    space: &CrossoverSpace,
    n: usize,
    rng: &mut R,
) -> Vec<ComputationalGraph> {
    if space.count() <= n as u128 {
        let mut all = space.enumerate(n.max(1).saturating_mul(4));
        all.shuffle(rng);
        all.truncate(n);
        return all;
    }
    (0..n).map(|_| space.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::block::{BlockCatalog, BlockKind, CatalogConfig};
    use crate::cnn::graph::{GraphLimits, GraphModule};

    fn cat() -> BlockCatalog {
        BlockCatalog::build(&CatalogConfig::default())
    }

    fn one_conv_module(cat: &BlockCatalog, channels: u32) -> GraphModule {
        let c = cat
            .find(BlockKind::Conv, |b| {
                b.param("channels") == Some(channels) && b.param("kernel") == Some(3)
            })
            .unwrap();
        GraphModule::sequential(cat.input(), vec![c], cat.output())
    }

    fn head(cat: &BlockCatalog, units: u32) -> GraphModule {
        let d = cat
            .find(BlockKind::Dense, |b| b.param("hidden-units") == Some(units))
            .unwrap();
        GraphModule::sequential(
            cat.input(),
            vec![cat.find(BlockKind::Flatten, |_| true).unwrap(), d],
            cat.output(),
        )
    }

    fn stacked(cat: &BlockCatalog, modules: &[GraphModule], s: usize, h: GraphModule) -> ComputationalGraph {
        let mut all = Vec::new();
        for m in modules {
            for _ in 0..s {
                all.push(m.clone());
            }
        }
        all.push(h);
        ComputationalGraph::new(all, s)
    }

    #[test]
    fn identical_parents_restack_only() {
        let cat = cat();
        let m = one_conv_module(&cat, 8);
        let g = stacked(&cat, &[m.clone()], 4, head(&cat, 84));
        let space = crossover(&g, &g, 2).unwrap();
        assert_eq!(space.count(), 1);
        let children = space.enumerate(10);
        assert_eq!(children.len(), 1);
        let child = &children[0];
        assert_eq!(child.stack_size, 2);
        assert_eq!(child.conv_modules().len(), 4);
        assert!(child.conv_modules().iter().all(|x| x == &m));
        child.validate(&GraphLimits::default()).unwrap();
    }

    #[test]
    fn union_spaces_per_depth() {
        let cat = cat();
        let a = one_conv_module(&cat, 8);
        let b = one_conv_module(&cat, 16);
        let c = one_conv_module(&cat, 32);
        let d = one_conv_module(&cat, 64);
        // parents: stacks [A, B] and [C, D] at s = 2, crossed at s_new = 1
        let g1 = stacked(&cat, &[a.clone(), b.clone()], 2, head(&cat, 84));
        let g2 = stacked(&cat, &[c.clone(), d.clone()], 2, head(&cat, 84));
        let space = crossover(&g1, &g2, 1).unwrap();
        assert_eq!(space.local_spaces.len(), 2);
        assert_eq!(space.local_spaces[0], vec![a, c]);
        assert_eq!(space.local_spaces[1], vec![b, d]);
        assert_eq!(space.slots_per_depth, 2);
        // |A ∪ C|^2 * |B ∪ D|^2 * heads
        assert_eq!(space.count(), 2 * 2 * 2 * 2);
    }

    #[test]
    fn enumerated_count_matches_formula() {
        let cat = cat();
        let a = one_conv_module(&cat, 8);
        let c = one_conv_module(&cat, 16);
        let g1 = stacked(&cat, &[a.clone()], 2, head(&cat, 84));
        let g2 = stacked(&cat, &[c.clone()], 2, head(&cat, 120));
        let space = crossover(&g1, &g2, 1).unwrap();
        // 2 modules at depth 1, two slots, 2 heads -> 2^2 * 2 = 8
        assert_eq!(space.count(), 8);
        let children = space.enumerate(usize::MAX);
        assert_eq!(children.len(), 8);
        for ch in &children {
            ch.validate(&GraphLimits::default()).unwrap();
            assert_eq!(ch.stack_size, 1);
        }
    }

    #[test]
    fn nondivisor_stack_size_rejected() {
        let cat = cat();
        let g = stacked(&cat, &[one_conv_module(&cat, 8)], 4, head(&cat, 84));
        assert!(crossover(&g, &g, 3).is_err());
    }
}
