//! Seeded randomness: the generator, Haar sampling, and deterministic
//! parallel Monte-Carlo accumulation.
//!
//! The generator is ChaCha with 8 rounds. A `u64` seed is expanded into the
//! 256-bit key by `SeedableRng::seed_from_u64`; independent streams are the
//! ChaCha stream ids. ChaCha is a counter-mode cipher, so identical seeds and
//! identical call sequences give identical output on every platform.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// The matrix groups the library samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupTag {
    SO,
    SU,
    O,
    U,
    /// Only meaningful together with the permutation representation.
    SymmetricGroup,
}

impl GroupTag {
    pub fn is_real(self) -> bool {
        matches!(self, GroupTag::SO | GroupTag::O)
    }

    /// The special group a full group is lifted from.
    pub fn special(self) -> GroupTag {
        match self {
            GroupTag::O => GroupTag::SO,
            GroupTag::U => GroupTag::SU,
            g => g,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupTag::SO => "SO",
            GroupTag::SU => "SU",
            GroupTag::O => "O",
            GroupTag::U => "U",
            GroupTag::SymmetricGroup => "Sym",
        }
    }
}

impl std::str::FromStr for GroupTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SO" => Ok(GroupTag::SO),
            "SU" => Ok(GroupTag::SU),
            "O" => Ok(GroupTag::O),
            "U" => Ok(GroupTag::U),
            "SYM" | "S" | "SYMMETRIC" => Ok(GroupTag::SymmetricGroup),
            other => Err(Error::Parse(format!("unknown group `{other}`"))),
        }
    }
}

impl std::fmt::Display for GroupTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Stream `stream` of the generator keyed by `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard complex Gaussian, `E|z|^2 = 1`.
    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        C64::new(self.normal() * s, self.normal() * s)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Ginibre matrix: i.i.d. real or complex standard Gaussian entries.
pub fn ginibre(dim: usize, real: bool, rng: &mut Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| {
        if real {
            C64::new(rng.normal(), 0.0)
        } else {
            rng.complex_normal()
        }
    })
}

/// Exact Haar sample from `group` acting on `C^dim`.
///
/// O and U are drawn by QR of a Ginibre matrix with each column of Q multiplied
/// by the phase of the matching diagonal entry of R. SO negates the last
/// column of an O sample with determinant -1; SU divides a U sample by the
/// principal `dim`-th root of its determinant.
pub fn haar_sample(group: GroupTag, dim: usize, rng: &mut Rng) -> Result<ComplexMatrix> {
    if dim == 0 {
        return Err(Error::Domain("Haar sampling needs dim >= 1".into()));
    }
    if group == GroupTag::SymmetricGroup {
        return Err(Error::Domain("Haar sampling is defined for SO, SU, O and U only".into()));
    }
    let real = group.is_real();
    let g = ginibre(dim, real, rng).to_nalgebra();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = ComplexMatrix::from_nalgebra(&q);
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() == 0.0 { C64::new(1.0, 0.0) } else { d / d.norm() };
        for row in 0..dim {
            out[(row, c)] *= phase;
        }
    }
    if real {
        // Rounding can leave ~1e-17 imaginary parts from the complex QR.
        for z in out.data_mut() {
            z.im = 0.0;
        }
    }
    match group {
        GroupTag::SO => {
            if out.det()?.re < 0.0 {
                for row in 0..dim {
                    out[(row, dim - 1)] = -out[(row, dim - 1)];
                }
            }
        }
        GroupTag::SU => {
            let det = out.det()?;
            let root = C64::from_polar(1.0, det.arg() / dim as f64);
            out = out.scale(root.inv());
        }
        _ => {}
    }
    Ok(out)
}

/// Samples per chunk in [`mc_accumulate`].
pub const MC_CHUNK: usize = 1024;

/// Monte-Carlo accumulation that is reproducible regardless of thread count.
///
/// Samples are split into chunks of [`MC_CHUNK`]; chunk `i` draws from
/// `Rng::stream(seed, i)` and the chunk accumulators are merged in chunk
/// order.
pub fn mc_accumulate<A, I, S, M>(samples: usize, seed: u64, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &mut Rng) + Sync,
    M: Fn(&mut A, A),
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = Rng::stream(seed, chunk as u64);
            let mut acc = init();
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            for _ in 0..count {
                step(&mut acc, &mut rng);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Running mean and standard error of a scalar statistic.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScalarStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ScalarStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: ScalarStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return f64::INFINITY;
        }
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}
