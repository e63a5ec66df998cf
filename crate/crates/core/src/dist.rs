//! Message-passing solvers on a simulated network.
//!
//! Each rank is an OS thread that owns a contiguous row block of `A` and a
//! full copy of `x`. Ranks only talk through a [`Transport`]; the in-process
//! [`SimNetwork`] carries messages over channels and can add per-message
//! latency. After every outer iteration the ranks sum their local iterates
//! with a recursive-doubling allreduce, so every rank ends up holding the
//! same `x` bit for bit.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, DenseMatrix, RowNormCache};
use crate::sampling::{worker_rows, Prng, RowSampler};
use crate::solvers::{
    finish_report, resolve_alphas, step_scale, Diagnostics, Execution, Finished, Mode, Monitor,
    Outcome, SamplingScheme, SolverConfig, Variant,
};
use crate::sysgen::LinearSystem;

/// Point-to-point messaging between the ranks of one job.
pub trait Transport {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;
    fn send(&mut self, to: usize, data: &[f64]) -> Result<()>;
    fn recv(&mut self, from: usize) -> Result<Vec<f64>>;
    fn messages_sent(&self) -> usize;

    /// Elementwise sum of `buf` over all ranks, left in `buf` on every rank.
    fn allreduce_sum(&mut self, buf: &mut [f64]) -> Result<()> {
        hypercube_allreduce(self, buf)
    }

    fn barrier(&mut self) -> Result<()> {
        self.allreduce_sum(&mut [0.0])
    }
}

/// Recursive doubling over the largest power of two `p ≤ size`. Ranks
/// `p..size` first hand their data to rank `r − p` and get the result back
/// at the end. Each pairwise exchange adds the two operands in the same
/// commutative way on both sides, so all ranks agree exactly.
///
/// Messages per rank: `log2(size)` when `size` is a power of two, otherwise
/// at most `log2(p) + 1`.
pub fn hypercube_allreduce<T: Transport + ?Sized>(t: &mut T, buf: &mut [f64]) -> Result<()> {
    let (r, size) = (t.rank(), t.size());
    if size == 1 {
        return Ok(());
    }
    let p = 1usize << (usize::BITS - 1 - size.leading_zeros());
    if r >= p {
        t.send(r - p, buf)?;
        let got = t.recv(r - p)?;
        copy_checked(buf, &got)?;
        return Ok(());
    }
    if r + p < size {
        let got = t.recv(r + p)?;
        add_checked(buf, &got)?;
    }
    let mut mask = 1;
    while mask < p {
        let partner = r ^ mask;
        t.send(partner, buf)?;
        let got = t.recv(partner)?;
        add_checked(buf, &got)?;
        mask <<= 1;
    }
    if r + p < size {
        t.send(r + p, buf)?;
    }
    Ok(())
}

fn add_checked(buf: &mut [f64], got: &[f64]) -> Result<()> {
    if got.len() != buf.len() {
        return Err(Error::Protocol(format!(
            "allreduce expected {} values, received {}",
            buf.len(),
            got.len()
        )));
    }
    for (b, g) in buf.iter_mut().zip(got) {
        *b += g;
    }
    Ok(())
}

fn copy_checked(buf: &mut [f64], got: &[f64]) -> Result<()> {
    if got.len() != buf.len() {
        return Err(Error::Protocol(format!(
            "allreduce expected {} values, received {}",
            buf.len(),
            got.len()
        )));
    }
    buf.copy_from_slice(got);
    Ok(())
}

/// Fixed delay per message; ranks `r` and `s` share a node when
/// `r / ranks_per_node == s / ranks_per_node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    pub ranks_per_node: usize,
    pub intra: Duration,
    pub inter: Duration,
}

impl LatencyModel {
    pub fn delay(&self, from: usize, to: usize) -> Duration {
        let per = self.ranks_per_node.max(1);
        if from / per == to / per {
            self.intra
        } else {
            self.inter
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub latency: Option<LatencyModel>,
    /// keep a per-iteration fingerprint of `x` on every rank
    pub record_fingerprints: bool,
}

/// In-process network: one channel per ordered pair of ranks.
pub struct SimNetwork;

impl SimNetwork {
    pub fn endpoints(size: usize, latency: Option<LatencyModel>) -> Vec<SimEndpoint> {
        // senders[from][to], receivers[to][from]
        let mut senders: Vec<Vec<Option<Sender<Vec<f64>>>>> =
            (0..size).map(|_| (0..size).map(|_| None).collect()).collect();
        let mut receivers: Vec<Vec<Option<Receiver<Vec<f64>>>>> =
            (0..size).map(|_| (0..size).map(|_| None).collect()).collect();
        for from in 0..size {
            for to in 0..size {
                let (tx, rx) = channel();
                senders[from][to] = Some(tx);
                receivers[to][from] = Some(rx);
            }
        }
        senders
            .into_iter()
            .zip(receivers)
            .enumerate()
            .map(|(rank, (tx, rx))| SimEndpoint {
                rank,
                size,
                tx: tx.into_iter().map(Option::unwrap).collect(),
                rx: rx.into_iter().map(Option::unwrap).collect(),
                latency,
                sent: 0,
            })
            .collect()
    }
}

pub struct SimEndpoint {
    rank: usize,
    size: usize,
    tx: Vec<Sender<Vec<f64>>>,
    rx: Vec<Receiver<Vec<f64>>>,
    latency: Option<LatencyModel>,
    sent: usize,
}

impl SimEndpoint {
    fn check_peer(&self, peer: usize) -> Result<()> {
        if peer >= self.size || peer == self.rank {
            return Err(Error::Protocol(format!(
                "rank {} cannot address rank {peer} of {}",
                self.rank, self.size
            )));
        }
        Ok(())
    }
}

impl Transport for SimEndpoint {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn send(&mut self, to: usize, data: &[f64]) -> Result<()> {
        self.check_peer(to)?;
        if let Some(l) = self.latency {
            std::thread::sleep(l.delay(self.rank, to));
        }
        self.tx[to]
            .send(data.to_vec())
            .map_err(|_| Error::Protocol(format!("rank {to} hung up")))?;
        self.sent += 1;
        Ok(())
    }

    fn recv(&mut self, from: usize) -> Result<Vec<f64>> {
        self.check_peer(from)?;
        self.rx[from]
            .recv()
            .map_err(|_| Error::Protocol(format!("rank {from} hung up")))
    }

    fn messages_sent(&self) -> usize {
        self.sent
    }
}

/// The rows one rank owns, with their norms and sampler.
#[derive(Debug, Clone)]
pub struct DistPartition {
    pub lo: usize,
    pub hi: usize,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub cache: RowNormCache,
    pub sampler: RowSampler,
}

impl DistPartition {
    /// Rows `⌊r·m/np⌋ ..= ⌊(r+1)·m/np⌋ − 1` of `sys`.
    pub fn new(sys: &LinearSystem, rank: usize, size: usize) -> Result<Self> {
        let (lo, hi) = worker_rows(rank, size, sys.rows())?;
        let a = sys.a.row_block(lo, hi)?;
        let cache = RowNormCache::new(&a)?;
        let sampler = RowSampler::from_weights(cache.sq_norms(), lo)?;
        Ok(Self {
            lo,
            hi,
            b: sys.b[lo..=hi].to_vec(),
            a,
            cache,
            sampler,
        })
    }

    pub fn rows(&self) -> usize {
        self.hi - self.lo + 1
    }

    /// Draw a global row index and return the local one.
    fn sample(&self, rng: &mut Prng) -> usize {
        self.sampler.sample(rng) - self.lo
    }

    fn scale(&self, local: usize, x: &[f64], alpha: f64) -> f64 {
        step_scale(alpha, self.b[local], dot_unchecked(self.a.row(local), x), self.cache.sq_norm(local))
    }

    /// One plain projection of `x` on local row `local`.
    fn project(&self, x: &mut [f64], local: usize, alpha: f64) {
        let s = self.scale(local, x, alpha);
        for (xj, aj) in x.iter_mut().zip(self.a.row(local)) {
            *xj += s * aj;
        }
    }

    /// Projection of `x` on local row `local`, folded with the division by
    /// `np` that precedes the allreduce.
    fn project_folded(&self, x: &mut [f64], local: usize, alpha: f64, np: f64) {
        let s = self.scale(local, x, alpha);
        for (xj, aj) in x.iter_mut().zip(self.a.row(local)) {
            *xj = (*xj + s * aj) / np;
        }
    }
}

fn fingerprint(x: &[f64]) -> u64 {
    // FNV-1a over the bit patterns
    x.iter().fold(0xcbf2_9ce4_8422_2325, |h, v| {
        (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

struct RankResult {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
    error_evaluations: usize,
    fixed: bool,
    messages: usize,
    fingerprints: Vec<u64>,
}

#[allow(clippy::too_many_arguments)]
fn rank_loop<T: Transport>(
    mut net: T,
    sys: &LinearSystem,
    cfg: &SolverConfig,
    mode: Mode<'_>,
    part: &DistPartition,
    alpha: f64,
    steps: usize,
    record: bool,
) -> Result<RankResult> {
    let np = net.size() as f64;
    let mut monitor = Monitor::without_trace(sys.reference(), cfg, mode)?;
    let mut rng = Prng::worker(cfg.base_seed, net.rank());
    let mut x = vec![0.0; sys.cols()];
    let mut fingerprints = Vec::new();
    let mut k = 0;
    while !monitor.should_stop(k, &x) {
        for _ in 1..steps {
            let i = part.sample(&mut rng);
            part.project(&mut x, i, alpha);
        }
        let i = part.sample(&mut rng);
        part.project_folded(&mut x, i, alpha, np);
        net.allreduce_sum(&mut x)?;
        if record {
            fingerprints.push(fingerprint(&x));
        }
        k += 1;
    }
    Ok(RankResult {
        x,
        iterations: k,
        converged: monitor.converged,
        error_evaluations: monitor.error_evaluations,
        fixed: monitor.is_fixed(),
        messages: net.messages_sent(),
        fingerprints,
    })
}

/// RKA or RKAB with `cfg.q` simulated ranks. The sampling scheme is always
/// the distributed one: rank `r` only sees its own rows.
///
/// Every rank evaluates the stopping rule on its own copy of `x`; since the
/// copies are identical the decisions agree without extra messages.
pub fn run_distributed(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    mode: Mode<'_>,
    opts: SimOptions,
) -> Result<Outcome> {
    let cfg = &SolverConfig {
        scheme: SamplingScheme::Distributed,
        ..cfg.clone()
    };
    cfg.validate()?;
    let steps = match cfg.variant {
        Variant::Rka => 1,
        Variant::Rkab => cfg.rkab_steps(),
        v => {
            return Err(Error::Unsupported(format!(
                "{v} has no message-passing implementation"
            )))
        }
    };
    if matches!(mode, Mode::Trace { .. }) {
        return Err(Error::Unsupported(
            "traces are recorded with the sequential solvers".to_string(),
        ));
    }
    let np = cfg.q;
    let parts = (0..np)
        .map(|r| DistPartition::new(sys, r, np))
        .collect::<Result<Vec<_>>>()?;
    let alphas = resolve_alphas(sys, cfg)?;

    let start = Instant::now();
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = SimNetwork::endpoints(np, opts.latency)
            .into_iter()
            .enumerate()
            .map(|(r, ep)| {
                let (part, alpha) = (&parts[r], alphas[r]);
                scope.spawn(move || {
                    rank_loop(ep, sys, cfg, mode, part, alpha, steps, opts.record_fingerprints)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let elapsed = start.elapsed();

    let lead = &results[0];
    let report = finish_report(
        Finished {
            sys,
            cfg,
            exec: Execution::Distributed(opts),
            alphas: &alphas,
            iterations: lead.iterations,
            converged: lead.converged,
            elapsed,
            error_evaluations: lead.error_evaluations,
            fixed: lead.fixed,
        },
        &lead.x,
    );
    let rank_fingerprints = opts.record_fingerprints.then(|| {
        (0..lead.iterations)
            .map(|k| results.iter().map(|r| r.fingerprints[k]).collect())
            .collect()
    });
    Ok(Outcome {
        report,
        x: lead.x.clone(),
        trace: Vec::new(),
        diagnostics: Diagnostics {
            messages_per_rank: Some(results.iter().map(|r| r.messages).collect()),
            rank_fingerprints,
            ..Diagnostics::default()
        },
    })
}

pub fn solve_rka_dist(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>, opts: SimOptions) -> Result<Outcome> {
    let cfg = SolverConfig {
        variant: Variant::Rka,
        ..cfg.clone()
    };
    run_distributed(sys, &cfg, mode, opts)
}

pub fn solve_rkab_dist(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>, opts: SimOptions) -> Result<Outcome> {
    let cfg = SolverConfig {
        variant: Variant::Rkab,
        ..cfg.clone()
    };
    run_distributed(sys, &cfg, mode, opts)
}
