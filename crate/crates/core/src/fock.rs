//! Particle configurations and their integer configuration indices.
//!
//! A configuration with `M` particles at sorted offset sites `n_1 <= .. <= n_M`
//! has index `c = sum_{m<M} N^m + sum_i n_i N^(i-1)`. The first sum is the
//! sector threshold, so every `M`-particle index exceeds every
//! `(M-1)`-particle index and the vacuum is `c = 0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::scalar::Real;

/// Sorted multiset of occupied offset sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    sites: Vec<usize>,
}

impl Configuration {
    pub fn vacuum() -> Self {
        Self { sites: Vec::new() }
    }

    pub fn one(site: usize) -> Self {
        Self { sites: vec![site] }
    }

    /// Two-particle configuration; the sites are sorted.
    pub fn two(a: usize, b: usize) -> Self {
        Self { sites: vec![a.min(b), a.max(b)] }
    }

    /// Builds a configuration from arbitrary order sites (sorted internally)
    /// and checks every site lies on the lattice.
    pub fn from_sites(mut sites: Vec<usize>, n_sites: usize) -> Result<Self> {
        if let Some(&bad) = sites.iter().find(|&&s| s >= n_sites) {
            return Err(Error::InvalidConfiguration(format!("site {bad} outside [0, {n_sites})")));
        }
        sites.sort_unstable();
        Ok(Self { sites })
    }

    pub fn particle_count(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn is_vacuum(&self) -> bool {
        self.sites.is_empty()
    }

    /// `(prod over distinct sites of occupancy!)^(-1/2)`.
    pub fn normalization_constant<T: Real>(&self) -> T {
        let mut prod: u64 = 1;
        let mut run = 1u64;
        for w in self.sites.windows(2) {
            if w[0] == w[1] {
                run += 1;
                prod *= run;
            } else {
                run = 1;
            }
        }
        T::from_u64(prod).expect("small factorial").sqrt().recip()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.sites.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// Integer configuration index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigIndex(pub u64);

impl ConfigIndex {
    pub const VACUUM: ConfigIndex = ConfigIndex(0);

    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for ConfigIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `N^m` with overflow detection.
fn checked_pow(n: usize, m: usize) -> Result<u64> {
    (n as u64).checked_pow(m as u32).ok_or(Error::Capacity { n, m })
}

/// Encodes a sorted configuration on an `n_sites` lattice.
pub fn encode_sites(cfg: &Configuration, n_sites: usize) -> Result<ConfigIndex> {
    let m = cfg.particle_count();
    // the largest index of the M sector is below sum_{j<=M} N^j, which must fit
    checked_pow(n_sites, m)?;
    let mut threshold: u64 = 0;
    for j in 0..m {
        threshold = threshold
            .checked_add(checked_pow(n_sites, j)?)
            .ok_or(Error::Capacity { n: n_sites, m })?;
    }
    let mut digits: u64 = 0;
    for (i, &site) in cfg.sites().iter().enumerate() {
        if site >= n_sites {
            return Err(Error::InvalidConfiguration(format!("site {site} outside [0, {n_sites})")));
        }
        let term = (site as u64)
            .checked_mul(checked_pow(n_sites, i)?)
            .ok_or(Error::Capacity { n: n_sites, m })?;
        digits = digits.checked_add(term).ok_or(Error::Capacity { n: n_sites, m })?;
    }
    threshold
        .checked_add(digits)
        .map(ConfigIndex)
        .ok_or(Error::Capacity { n: n_sites, m })
}

/// Index of the one-particle configuration at `site`.
#[inline]
pub fn one_particle_index(site: usize) -> ConfigIndex {
    ConfigIndex(1 + site as u64)
}

/// Index of the two-particle configuration `(i, j)`, `i <= j`, on `n` sites.
#[inline]
pub fn pair_index(i: usize, j: usize, n: usize) -> ConfigIndex {
    debug_assert!(i <= j);
    let n = n as u64;
    ConfigIndex(1 + n + i as u64 + j as u64 * n)
}

/// Decodes an index produced by [`encode_sites`].
pub fn decode_sites(c: ConfigIndex, n_sites: usize, m_max: usize) -> Result<Configuration> {
    let n = n_sites as u64;
    let mut rest = c.0;
    let mut m = 0usize;
    loop {
        if m > m_max {
            return Err(Error::MalformedIndex(c.0));
        }
        let block = match checked_pow(n_sites, m) {
            Ok(b) => b,
            Err(_) => return Err(Error::MalformedIndex(c.0)),
        };
        if rest < block {
            break;
        }
        rest -= block;
        m += 1;
    }
    let mut sites = Vec::with_capacity(m);
    for _ in 0..m {
        sites.push((rest % n) as usize);
        rest /= n;
    }
    if sites.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::MalformedIndex(c.0));
    }
    Ok(Configuration { sites })
}

/// Encodes `cfg` for a spec.
pub fn encode<T: Real>(cfg: &Configuration, spec: &LatticeSpec<T>) -> Result<ConfigIndex> {
    if cfg.particle_count() > spec.m_max() {
        return Err(Error::InvalidConfiguration(format!(
            "{} particles exceed the truncation M_max = {}",
            cfg.particle_count(),
            spec.m_max()
        )));
    }
    encode_sites(cfg, spec.n_sites())
}

/// Decodes `c` for a spec.
pub fn decode<T: Real>(c: ConfigIndex, spec: &LatticeSpec<T>) -> Result<Configuration> {
    decode_sites(c, spec.n_sites(), spec.m_max())
}

/// Dense ranks of the sorted configurations of one sector, lexicographic in
/// the sorted sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectorIndexer {
    particles: usize,
    n_sites: usize,
}

impl SectorIndexer {
    pub fn new(particles: usize, n_sites: usize) -> Result<Self> {
        if particles > 2 {
            return Err(Error::UnsupportedSector(particles));
        }
        Ok(Self { particles, n_sites })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dimension(&self) -> usize {
        match self.particles {
            0 => 1,
            1 => self.n_sites,
            _ => self.n_sites * (self.n_sites + 1) / 2,
        }
    }

    pub fn rank(&self, cfg: &Configuration) -> Result<usize> {
        if cfg.particle_count() != self.particles {
            return Err(Error::InvalidConfiguration(format!(
                "expected {} particles, got {}",
                self.particles,
                cfg.particle_count()
            )));
        }
        let n = self.n_sites;
        Ok(match cfg.sites() {
            [] => 0,
            [i] => *i,
            [i, j] => pair_rank(*i, *j, n),
            _ => unreachable!(),
        })
    }

    pub fn unrank(&self, rank: usize) -> Result<Configuration> {
        if rank >= self.dimension() {
            return Err(Error::InvalidConfiguration(format!("rank {rank} outside sector")));
        }
        Ok(match self.particles {
            0 => Configuration::vacuum(),
            1 => Configuration::one(rank),
            _ => {
                let (i, j) = pair_unrank(rank, self.n_sites);
                Configuration::two(i, j)
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.dimension()).map(move |r| self.unrank(r).expect("rank in range"))
    }
}

/// Builds the sector indexer for `particles` on `spec`.
pub fn enumerate_sector<T: Real>(particles: usize, spec: &LatticeSpec<T>) -> Result<SectorIndexer> {
    SectorIndexer::new(particles, spec.n_sites())
}

/// Lexicographic rank of the ordered pair `i <= j`.
#[inline]
pub fn pair_rank(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Inverse of [`pair_rank`].
pub fn pair_unrank(mut rank: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - i;
        if rank < row {
            return (i, i + rank);
        }
        rank -= row;
        i += 1;
    }
}
