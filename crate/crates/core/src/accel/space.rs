//! The 13-hyperparameter accelerator design space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Main memory technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MemType {
    #[serde(rename = "RRAM")]
    Rram,
    #[serde(rename = "DRAM")]
    Dram,
    #[serde(rename = "HBM")]
    Hbm,
}

impl MemType {
    pub const ALL: [MemType; 3] = [MemType::Rram, MemType::Dram, MemType::Hbm];

    pub fn name(self) -> &'static str {
        match self {
            MemType::Rram => "RRAM",
            MemType::Dram => "DRAM",
            MemType::Hbm => "HBM",
        }
    }
}

/// (banks, ranks, channels) of the main memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemConfig {
    pub banks: u32,
    pub ranks: u32,
    pub channels: u32,
}

impl MemConfig {
    pub const fn new(banks: u32, ranks: u32, channels: u32) -> Self {
        MemConfig {
            banks,
            ranks,
            channels,
        }
    }
}

/// One accelerator design point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AcceleratorConfig {
    /// Parallel batch lanes.
    pub p_ib: u32,
    /// Multipliers per MAC unit (1 or 16).
    pub p_if: u32,
    /// Parallel output-pixel columns.
    pub p_ix: u32,
    /// Parallel output-pixel rows.
    pub p_iy: u32,
    /// Parallel output channels per PE.
    pub p_of: u32,
    /// Kernel-dimension parallelism; x and y are kept equal.
    pub p_kx: u32,
    pub p_ky: u32,
    /// Inference batch size.
    pub batch: u32,
    pub act_buf_mb: u32,
    pub wgt_buf_mb: u32,
    pub mask_buf_mb: u32,
    pub mem_type: MemType,
    pub mem_config: MemConfig,
}

impl AcceleratorConfig {
    pub fn pe_count(&self) -> u64 {
        self.p_ib as u64 * self.p_ix as u64 * self.p_iy as u64
    }

    pub fn mac_units_per_pe(&self) -> u64 {
        self.p_of as u64 * self.p_kx as u64 * self.p_ky as u64
    }

    pub fn multipliers_per_mac(&self) -> u64 {
        self.p_if as u64
    }
}

/// Permissible value sets, one list per hyperparameter. Defaults reproduce
/// the full 2.28e8-point space; restricting lists yields subspaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AccelSpace {
    pub p_ib: Vec<u32>,
    pub p_if: Vec<u32>,
    pub p_ix: Vec<u32>,
    pub p_iy: Vec<u32>,
    pub p_of: Vec<u32>,
    pub p_k: Vec<u32>,
    pub batch: Vec<u32>,
    pub act_buf_mb: Vec<u32>,
    pub wgt_buf_mb: Vec<u32>,
    pub mask_buf_mb: Vec<u32>,
    pub mem: Vec<(MemType, Vec<MemConfig>)>,
}

/// Buffer sizes: 1 MB, then 2..24 MB in steps of 2 (13 values).
fn buffer_sizes() -> Vec<u32> {
    let mut v = vec![1];
    v.extend((1..=12).map(|i| i * 2));
    v
}

impl Default for AccelSpace {
    fn default() -> Self {
        AccelSpace {
            p_ib: vec![1, 2, 4],
            p_if: vec![1, 16],
            p_ix: (1..=8).collect(),
            p_iy: (1..=8).collect(),
            p_of: vec![1, 2, 4, 8],
            p_k: vec![1, 3, 5, 7],
            batch: vec![1, 64, 128, 256, 512],
            act_buf_mb: buffer_sizes(),
            wgt_buf_mb: buffer_sizes(),
            mask_buf_mb: vec![1, 2, 3, 4],
            mem: vec![
                (
                    MemType::Rram,
                    vec![
                        MemConfig::new(16, 2, 2),
                        MemConfig::new(8, 2, 4),
                        MemConfig::new(4, 2, 8),
                        MemConfig::new(2, 2, 16),
                        MemConfig::new(32, 2, 1),
                        MemConfig::new(1, 2, 32),
                    ],
                ),
                (
                    MemType::Dram,
                    vec![
                        MemConfig::new(16, 2, 2),
                        MemConfig::new(8, 2, 4),
                        MemConfig::new(32, 2, 1),
                        MemConfig::new(16, 4, 1),
                    ],
                ),
                (MemType::Hbm, vec![MemConfig::new(32, 1, 4)]),
            ],
        }
    }
}

impl AccelSpace {
    /// Total number of valid design points: the product of the independent
    /// set sizes, with memory configurations nested under memory type.
    pub fn cardinality(&self) -> u128 {
        let mem: u128 = self.mem.iter().map(|(_, cfgs)| cfgs.len() as u128).sum();
        self.p_ib.len() as u128
            * self.p_if.len() as u128
            * self.p_ix.len() as u128
            * self.p_iy.len() as u128
            * self.p_of.len() as u128
            * self.p_k.len() as u128
            * self.batch.len() as u128
            * self.act_buf_mb.len() as u128
            * self.wgt_buf_mb.len() as u128
            * self.mask_buf_mb.len() as u128
            * mem
    }

    pub fn validate(&self, c: &AcceleratorConfig) -> Result<()> {
        if c.p_kx != c.p_ky {
            return Err(Error::Validation(format!(
                "p_kx ({}) must equal p_ky ({})",
                c.p_kx, c.p_ky
            )));
        }
        let checks: [(&str, u32, &Vec<u32>); 10] = [
            ("p_ib", c.p_ib, &self.p_ib),
            ("p_if", c.p_if, &self.p_if),
            ("p_ix", c.p_ix, &self.p_ix),
            ("p_iy", c.p_iy, &self.p_iy),
            ("p_of", c.p_of, &self.p_of),
            ("p_k", c.p_kx, &self.p_k),
            ("batch", c.batch, &self.batch),
            ("act_buf_mb", c.act_buf_mb, &self.act_buf_mb),
            ("wgt_buf_mb", c.wgt_buf_mb, &self.wgt_buf_mb),
            ("mask_buf_mb", c.mask_buf_mb, &self.mask_buf_mb),
        ];
        for (name, value, set) in checks {
            if !set.contains(&value) {
                return Err(Error::Validation(format!(
                    "{name} = {value} is not in the permissible set {set:?}"
                )));
            }
        }
        let cfgs = self
            .mem
            .iter()
            .find(|(t, _)| *t == c.mem_type)
            .map(|(_, cfgs)| cfgs)
            .ok_or_else(|| {
                Error::Validation(format!("memory type {:?} not in space", c.mem_type))
            })?;
        if !cfgs.contains(&c.mem_config) {
            return Err(Error::Validation(format!(
                "memory configuration {:?} invalid for {:?}",
                c.mem_config, c.mem_type
            )));
        }
        Ok(())
    }

    /// Streaming enumeration in ordinal order. Intended for restricted
    /// subspaces; the full space has 2.28e8 points.
    pub fn enumerate(&self) -> impl Iterator<Item = AcceleratorConfig> + '_ {
        self.p_ib.iter().flat_map(move |&p_ib| {
            self.p_if.iter().flat_map(move |&p_if| {
                self.p_ix.iter().flat_map(move |&p_ix| {
                    self.p_iy.iter().flat_map(move |&p_iy| {
                        self.p_of.iter().flat_map(move |&p_of| {
                            self.p_k.iter().flat_map(move |&p_k| {
                                self.batch.iter().flat_map(move |&batch| {
                                    self.act_buf_mb.iter().flat_map(move |&act| {
                                        self.wgt_buf_mb.iter().flat_map(move |&wgt| {
                                            self.mask_buf_mb.iter().flat_map(move |&mask| {
                                                self.mem.iter().flat_map(move |(mt, cfgs)| {
                                                    cfgs.iter().map(move |&mc| AcceleratorConfig {
                                                        p_ib,
                                                        p_if,
                                                        p_ix,
                                                        p_iy,
                                                        p_of,
                                                        p_kx: p_k,
                                                        p_ky: p_k,
                                                        batch,
                                                        act_buf_mb: act,
                                                        wgt_buf_mb: wgt,
                                                        mask_buf_mb: mask,
                                                        mem_type: *mt,
                                                        mem_config: mc,
                                                    })
                                                })
                                            })
                                        })
                                    })
                                })
                            })
                        })
                    })
                })
            })
        })
    }

    /// Uniform random valid config.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> AcceleratorConfig {
        let pick = |set: &[u32], rng: &mut R| set[rng.gen_range(0..set.len())];
        let mem_flat: Vec<(MemType, MemConfig)> = self
            .mem
            .iter()
            .flat_map(|(t, cfgs)| cfgs.iter().map(move |&c| (*t, c)))
            .collect();
        let (mem_type, mem_config) = mem_flat[rng.gen_range(0..mem_flat.len())];
        let k = pick(&self.p_k, rng);
        AcceleratorConfig {
            p_ib: pick(&self.p_ib, rng),
            p_if: pick(&self.p_if, rng),
            p_ix: pick(&self.p_ix, rng),
            p_iy: pick(&self.p_iy, rng),
            p_of: pick(&self.p_of, rng),
            p_kx: k,
            p_ky: k,
            batch: pick(&self.batch, rng),
            act_buf_mb: pick(&self.act_buf_mb, rng),
            wgt_buf_mb: pick(&self.wgt_buf_mb, rng),
            mask_buf_mb: pick(&self.mask_buf_mb, rng),
            mem_type,
            mem_config,
        }
    }

    pub(crate) fn mem_choices(&self) -> Vec<(MemType, MemConfig)> {
        self.mem
            .iter()
            .flat_map(|(t, cfgs)| cfgs.iter().map(move |&c| (*t, c)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_cardinality_matches_closed_form() {
        let space = AccelSpace::default();
        assert_eq!(space.cardinality(), 228_433_920);
    }

    #[test]
    fn single_memory_restriction_scales() {
        let mut space = AccelSpace::default();
        space.mem = vec![(MemType::Hbm, vec![MemConfig::new(32, 1, 4)])];
        assert_eq!(space.cardinality(), 228_433_920 / 11);
    }

    #[test]
    fn batch_restriction_scales() {
        let mut space = AccelSpace::default();
        space.batch = vec![1];
        assert_eq!(space.cardinality(), 228_433_920 / 5);
    }

    #[test]
    fn enumeration_count_matches_on_reduced_space() {
        let mut space = AccelSpace::default();
        space.act_buf_mb = vec![1];
        space.wgt_buf_mb = vec![1];
        space.mask_buf_mb = vec![1];
        space.batch = vec![64];
        space.p_ix = vec![2];
        space.p_iy = vec![4];
        let count = space.enumerate().count();
        assert_eq!(count as u128, space.cardinality());
        for c in space.enumerate() {
            space.validate(&c).unwrap();
        }
    }

    #[test]
    fn sampled_configs_are_valid() {
        let space = AccelSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let c = space.sample(&mut rng);
            space.validate(&c).unwrap();
        }
    }

    #[test]
    fn kernel_mismatch_rejected() {
        let space = AccelSpace::default();
        let mut c = space.sample(&mut ChaCha8Rng::seed_from_u64(0));
        c.p_kx = 3;
        c.p_ky = 5;
        assert!(space.validate(&c).is_err());
    }
}
