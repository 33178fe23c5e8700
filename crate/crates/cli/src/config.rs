use anyhow::{bail, Result};
use fgbench::pool::PoolConfig;

/// Parameters shared by the pipeline stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub k_prime: usize,
    pub k_dprime: usize,
    pub rrf_constant: usize,
    pub seed: u64,
    pub ks: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pool = PoolConfig::default();
        Self {
            k_prime: pool.k_prime,
            k_dprime: pool.k_dprime,
            rrf_constant: pool.rrf_constant,
            seed: 0,
            ks: fgbench::eval::DEFAULT_KS.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        if self.k_prime == 0 || self.k_dprime == 0 {
            bail!("--k-prime and --k-dprime must be at least 1");
        }
        if self.ks.is_empty() || self.ks[0] == 0 || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            bail!("--ks must be positive and strictly ascending, got {:?}", self.ks);
        }
        Ok(())
    }

    pub fn pool(&self) -> PoolConfig {
        PoolConfig {
            k_prime: self.k_prime,
            k_dprime: self.k_dprime,
            rrf_constant: self.rrf_constant,
        }
    }
}
