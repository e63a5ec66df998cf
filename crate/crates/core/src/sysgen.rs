//! Dense overdetermined test systems.
//!
//! Row `i` of a generated matrix has i.i.d. `N(μᵢ, σᵢ)` entries with
//! `μᵢ ~ U(mu_range)` and `σᵢ ~ U(sigma_range)`. Smaller systems are
//! top-left crops of one large "mother" matrix, each with its own exact
//! solution. Normal variates come from `rand_distr`'s ziggurat sampler over
//! [`Prng`], so every byte is a pure function of the seeds and sizes.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{norm, DenseMatrix};
use crate::sampling::Prng;
use crate::solvers::cgls;

const MATRIX_STREAM: usize = 1;
const SOLUTION_STREAM: usize = 2;
const NOISE_STREAM: usize = 3;

/// Normal-equation residual target for stored least-squares references.
pub const LS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub m_max: usize,
    pub n_max: usize,
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            m_max: 4000,
            n_max: 500,
            mu_range: (-5.0, 5.0),
            sigma_range: (1.0, 20.0),
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn new(m_max: usize, n_max: usize, seed: u64) -> Self {
        Self {
            m_max,
            n_max,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::invalid("cols", "must be at least 1"));
        }
        if self.m_max < self.n_max {
            return Err(Error::invalid(
                "rows",
                format!("{} rows < {} columns; system must be overdetermined", self.m_max, self.n_max),
            ));
        }
        let (lo, hi) = self.mu_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("mu-range", "need finite lo <= hi"));
        }
        let (lo, hi) = self.sigma_range;
        if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("sigma-range", "need 0 < lo <= hi"));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise-std", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    /// exact solution of a consistent system
    pub x_star: Option<Vec<f64>>,
    /// least-squares solution
    pub x_ls: Option<Vec<f64>>,
    pub consistent: bool,
}

impl LinearSystem {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension {
                context: "right-hand side",
                expected: a.rows(),
                found: b.len(),
            });
        }
        Ok(Self {
            a,
            b,
            x_star: None,
            x_ls: None,
            consistent: false,
        })
    }

    /// `b = A·x_star`
    pub fn consistent_from(a: DenseMatrix, x_star: Vec<f64>) -> Result<Self> {
        let b = a.mul_vec(&x_star)?;
        Ok(Self {
            a,
            b,
            x_star: Some(x_star),
            x_ls: None,
            consistent: true,
        })
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// What the error is measured against: `x_star` when present, else `x_ls`.
    pub fn reference(&self) -> Option<&[f64]> {
        self.x_star.as_deref().or(self.x_ls.as_deref())
    }

    /// ‖A·x_star − b‖_∞ / ‖b‖_∞
    pub fn consistency_residual(&self) -> Option<f64> {
        let xs = self.x_star.as_ref()?;
        let ax = self.a.mul_vec(xs).ok()?;
        let num = ax.iter().zip(&self.b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let den = self.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Some(if den == 0.0 { num } else { num / den })
    }

    /// ‖Aᵀ(A·x_ls − b)‖ / ‖Aᵀb‖
    pub fn normal_residual(&self) -> Option<f64> {
        let xl = self.x_ls.as_ref()?;
        let num = cgls::normal_residual(&self.a, &self.b, xl).ok()?;
        let den = norm(&self.a.tr_mul_vec(&self.b).ok()?);
        Some(if den == 0.0 { num } else { num / den })
    }
}

fn uniform(rng: &mut Prng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Stream seed for the solution of an `m × n` crop.
fn solution_seed(seed: u64, m: usize, n: usize) -> u64 {
    // splitmix64 over the three inputs
    let mut z = seed ^ (m as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (n as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn solution_for(cfg: &GeneratorConfig, m: usize, n: usize) -> Vec<f64> {
    let mut rng = Prng::worker(solution_seed(cfg.seed, m, n), SOLUTION_STREAM);
    let mu = uniform(&mut rng, cfg.mu_range);
    let sigma = uniform(&mut rng, cfg.sigma_range);
    let dist = Normal::new(mu, sigma).expect("validated sigma");
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

/// The largest system of a family; every smaller one is cropped from it.
pub fn generate_mother(cfg: &GeneratorConfig) -> Result<LinearSystem> {
    cfg.validate()?;
    let (m, n) = (cfg.m_max, cfg.n_max);
    let mut rng = Prng::worker(cfg.seed, MATRIX_STREAM);
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m {
        let mu = uniform(&mut rng, cfg.mu_range);
        let sigma = uniform(&mut rng, cfg.sigma_range);
        let dist = Normal::new(mu, sigma).expect("validated sigma");
        data.extend((0..n).map(|_| dist.sample(&mut rng)));
    }
    let a = DenseMatrix::from_vec(m, n, data)?;
    LinearSystem::consistent_from(a, solution_for(cfg, m, n))
}

/// Top-left `m × n` block of `mother` with a fresh exact solution drawn from
/// `(cfg.seed, m, n)`.
pub fn crop(mother: &LinearSystem, m: usize, n: usize, cfg: &GeneratorConfig) -> Result<LinearSystem> {
    if m < n {
        return Err(Error::invalid(
            "rows",
            format!("crop {m}x{n} is underdetermined"),
        ));
    }
    let a = mother.a.top_left(m, n)?;
    LinearSystem::consistent_from(a, solution_for(cfg, m, n))
}

/// Convenience: mother matrix of `cfg` cropped to `m × n`.
pub fn generate(cfg: &GeneratorConfig, m: usize, n: usize) -> Result<LinearSystem> {
    let mother = generate_mother(cfg)?;
    if (m, n) == (cfg.m_max, cfg.n_max) {
        return Ok(mother);
    }
    crop(&mother, m, n, cfg)
}

/// `b ← b + ξ`, `ξᵢ ~ N(0, 1)`; stores the least-squares solution.
pub fn make_inconsistent(sys: &LinearSystem, noise_seed: u64) -> Result<LinearSystem> {
    make_inconsistent_scaled(sys, noise_seed, 1.0)
}

pub fn make_inconsistent_scaled(sys: &LinearSystem, noise_seed: u64, noise_std: f64) -> Result<LinearSystem> {
    if !sys.consistent {
        return Err(Error::invalid("system", "already inconsistent"));
    }
    if !(noise_std > 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise-std", "must be positive"));
    }
    let mut rng = Prng::worker(noise_seed, NOISE_STREAM);
    let b: Vec<f64> = sys
        .b
        .iter()
        .map(|bi| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            bi + noise_std * xi
        })
        .collect();
    let max_it = 50 * sys.cols() + 1000;
    let x_ls = cgls::cgls_solve(&sys.a, &b, LS_TOLERANCE, max_it)?;
    Ok(LinearSystem {
        a: sys.a.clone(),
        b,
        x_star: None,
        x_ls: Some(x_ls),
        consistent: false,
    })
}

// ---------------------------------------------------------------------------
// binary file format
//
//   0   "KZSYS"            magic
//   5   b'1'               version
//   6   u64 LE             m
//   14  u64 LE             n
//   22  u32 LE             flags: 1 consistent, 2 has x_star, 4 has x_ls
//   26  f64 LE × m·n       A, row-major
//       f64 LE × m         b
//       f64 LE × n         x_star, if flagged
//       f64 LE × n         x_ls, if flagged

const MAGIC: &[u8; 5] = b"KZSYS";
const VERSION: u8 = b'1';
const FLAG_CONSISTENT: u32 = 1;
const FLAG_X_STAR: u32 = 2;
const FLAG_X_LS: u32 = 4;

pub fn encode_system(sys: &LinearSystem) -> Vec<u8> {
    let (m, n) = (sys.rows(), sys.cols());
    let mut flags = 0;
    if sys.consistent {
        flags |= FLAG_CONSISTENT;
    }
    if sys.x_star.is_some() {
        flags |= FLAG_X_STAR;
    }
    if sys.x_ls.is_some() {
        flags |= FLAG_X_LS;
    }
    let mut out = Vec::with_capacity(26 + 8 * (m * n + m + 2 * n));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    let floats = sys
        .a
        .data()
        .iter()
        .chain(&sys.b)
        .chain(sys.x_star.iter().flatten())
        .chain(sys.x_ls.iter().flatten());
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < len {
            return Err(Error::Parse {
                offset: self.buf.len() as u64,
                reason: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn floats(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| Error::Parse {
                offset: self.pos as u64,
                reason: format!("{what} length overflows"),
            })?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_system(buf: &[u8]) -> Result<LinearSystem> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(5, "magic")?;
    if magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: "bad magic".to_string(),
        });
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::UnsupportedVersion { found: version });
    }
    let dims_at = r.pos as u64;
    let m = r.u64("rows")? as usize;
    let n = r.u64("cols")? as usize;
    let flags = u32::from_le_bytes(r.take(4, "flags")?.try_into().unwrap());
    if m == 0 || n == 0 || m.checked_mul(n).is_none() {
        return Err(Error::Parse {
            offset: dims_at,
            reason: format!("invalid dimensions {m}x{n}"),
        });
    }
    if flags & !(FLAG_CONSISTENT | FLAG_X_STAR | FLAG_X_LS) != 0 {
        return Err(Error::Parse {
            offset: 22,
            reason: format!("unknown flag bits {flags:#x}"),
        });
    }
    let a = DenseMatrix::from_vec(m, n, r.floats(m * n, "matrix")?)?;
    let b = r.floats(m, "rhs")?;
    let x_star = if flags & FLAG_X_STAR != 0 {
        Some(r.floats(n, "x_star")?)
    } else {
        None
    };
    let x_ls = if flags & FLAG_X_LS != 0 {
        Some(r.floats(n, "x_ls")?)
    } else {
        None
    };
    if r.pos != buf.len() {
        return Err(Error::Parse {
            offset: r.pos as u64,
            reason: format!("{} trailing bytes", buf.len() - r.pos),
        });
    }
    Ok(LinearSystem {
        a,
        b,
        x_star,
        x_ls,
        consistent: flags & FLAG_CONSISTENT != 0,
    })
}

pub fn save_system(sys: &LinearSystem, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_system(sys))?;
    Ok(())
}

pub fn load_system(path: impl AsRef<Path>) -> Result<LinearSystem> {
    decode_system(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig::new(200, 50, 7)
    }

    #[test]
    fn mother_is_deterministic_and_consistent() {
        let a = generate_mother(&small()).unwrap();
        let b = generate_mother(&small()).unwrap();
        assert_eq!(encode_system(&a), encode_system(&b));
        assert!(a.consistency_residual().unwrap() < 1e-10);
        assert!(a.consistent);
    }

    #[test]
    fn mother_has_full_column_rank() {
        let sys = generate_mother(&small()).unwrap();
        let x = cgls::cgls_solve(&sys.a, &sys.b, 1e-12, 2000).unwrap();
        let xs = sys.x_star.as_ref().unwrap();
        let rel = crate::linalg::dist_sq(&x, xs).sqrt() / norm(xs);
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn crop_properties() {
        let cfg = small();
        let mother = generate_mother(&cfg).unwrap();
        let full = crop(&mother, 200, 50, &cfg).unwrap();
        assert_eq!(full, mother);

        let c100 = crop(&mother, 100, 50, &cfg).unwrap();
        let c150 = crop(&mother, 150, 50, &cfg).unwrap();
        for i in 0..100 {
            assert_eq!(c100.a.row(i), mother.a.row(i));
            assert_eq!(c100.a.row(i), c150.a.row(i));
        }
        assert!(c100.consistency_residual().unwrap() < 1e-10);
        assert!(c150.consistency_residual().unwrap() < 1e-10);
        assert_ne!(c100.x_star, c150.x_star);

        assert!(crop(&mother, 40, 50, &cfg).is_err());
        assert!(crop(&mother, 300, 50, &cfg).is_err());
    }

    #[test]
    fn inconsistent_noise() {
        let sys = generate(&GeneratorConfig::new(2000, 20, 3), 2000, 20).unwrap();
        let n1 = make_inconsistent(&sys, 5).unwrap();
        let n2 = make_inconsistent(&sys, 5).unwrap();
        assert_eq!(n1.b, n2.b);
        assert!(!n1.consistent && n1.x_star.is_none());
        let var = n1
            .b
            .iter()
            .zip(&sys.b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            / 2000.0;
        assert!((0.9..=1.1).contains(&var), "variance {var}");
        assert!(n1.normal_residual().unwrap() < 1e-8);
        assert!(make_inconsistent(&n1, 1).is_err());
    }

    #[test]
    fn file_round_trip() {
        let sys = make_inconsistent(&generate_mother(&GeneratorConfig::new(30, 4, 1)).unwrap(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        save_system(&sys, &p).unwrap();
        let back = load_system(&p).unwrap();
        assert_eq!(encode_system(&back), encode_system(&sys));
        assert_eq!(back, sys);
    }

    #[test]
    fn malformed_files() {
        let bytes = encode_system(&generate_mother(&GeneratorConfig::new(10, 3, 1)).unwrap());
        for cut in [0, 3, 6, 20, 26, bytes.len() - 1] {
            match decode_system(&bytes[..cut]) {
                Err(Error::Parse { .. }) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
        let mut v2 = bytes.clone();
        v2[5] = b'2';
        assert!(matches!(decode_system(&v2), Err(Error::UnsupportedVersion { found: b'2' })));
        let mut junk = bytes.clone();
        junk[0] = b'X';
        assert!(matches!(decode_system(&junk), Err(Error::Parse { offset: 0, .. })));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(decode_system(&extra), Err(Error::Parse { .. })));
    }
}
