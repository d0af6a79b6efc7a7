//! k-space undersampling patterns.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::mri::fft::centered_freq;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    /// Every R-th phase-encoding column (plus an optional centred ACS band).
    Cartesian1d,
    /// Uniformly random pixel subset of density 1/R.
    Random2d,
    /// Poisson-disc dart throwing calibrated to density 1/R.
    Poisson2d,
}

impl MaskKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cartesian1d" => Ok(Self::Cartesian1d),
            "random2d" => Ok(Self::Random2d),
            "poisson2d" => Ok(Self::Poisson2d),
            _ => Err(Error::Parameter(format!("unknown mask kind {s:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cartesian1d => "cartesian1d",
            Self::Random2d => "random2d",
            Self::Poisson2d => "poisson2d",
        }
    }
}

/// Binary sampling pattern; `true` marks an acquired k-space location.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    pattern: Vec<bool>,
    pub kind: MaskKind,
    pub accel: u32,
    pub seed: u64,
}

/// Options for [`generate_mask`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub accel: u32,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Fully sampled centre columns (Cartesian only).
    pub acs_lines: usize,
}

impl SamplingMask {
    pub fn from_pattern(height: usize, width: usize, pattern: Vec<bool>) -> Result<Self> {
        if pattern.len() != height * width {
            return shape_err(format!("mask has {} entries for {height}x{width}", pattern.len()));
        }
        let count = pattern.iter().filter(|&&b| b).count().max(1);
        let accel = ((height * width) as f64 / count as f64).round() as u32;
        Ok(Self {
            height,
            width,
            pattern,
            kind: MaskKind::Random2d,
            accel,
            seed: 0,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pattern: vec![true; height * width],
            kind: MaskKind::Random2d,
            accel: 1,
            seed: 0,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pattern(&self) -> &[bool] {
        &self.pattern
    }

    pub fn is_sampled(&self, i: usize) -> bool {
        self.pattern[i]
    }

    pub fn count(&self) -> usize {
        self.pattern.iter().filter(|&&b| b).count()
    }

    /// Fraction of sampled locations `|Omega| / (H W)`.
    pub fn density(&self) -> f64 {
        self.count() as f64 / self.pattern.len().max(1) as f64
    }

    pub fn check_dims(&self, height: usize, width: usize) -> Result<()> {
        if (self.height, self.width) != (height, width) {
            return shape_err(format!(
                "mask {}x{} vs data {}x{}",
                self.height, self.width, height, width
            ));
        }
        Ok(())
    }
}

/// Builds a deterministic (per seed) sampling pattern.
pub fn generate_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    let MaskSpec {
        kind,
        accel,
        height: h,
        width: w,
        seed,
        acs_lines,
    } = *spec;
    if accel < 1 {
        return Err(Error::Parameter("acceleration must be >= 1".into()));
    }
    if h == 0 || w == 0 {
        return Err(Error::Parameter("mask dimensions must be positive".into()));
    }
    let r = accel as usize;
    let pattern = if accel == 1 {
        vec![true; h * w]
    } else {
        match kind {
            MaskKind::Cartesian1d => {
                if r > w {
                    return Err(Error::Parameter(format!(
                        "acceleration {r} exceeds {w} phase-encoding lines"
                    )));
                }
                let half = acs_lines as i64 / 2;
                let lo = -half;
                let hi = acs_lines as i64 - half;
                let cols: Vec<bool> = (0..w)
                    .map(|x| {
                        let k = centered_freq(x, w);
                        k.rem_euclid(r as i64) == 0 || (k >= lo && k < hi)
                    })
                    .collect();
                (0..h * w).map(|i| cols[i % w]).collect()
            }
            MaskKind::Random2d => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let target = target_count(h * w, r);
                let mut pattern = vec![false; h * w];
                for i in rand::seq::index::sample(&mut rng, h * w, target) {
                    pattern[i] = true;
                }
                pattern
            }
            MaskKind::Poisson2d => poisson_disc(h, w, r, seed),
        }
    };
    Ok(SamplingMask {
        height: h,
        width: w,
        pattern,
        kind,
        accel,
        seed,
    })
}

fn target_count(n: usize, r: usize) -> usize {
    ((n as f64 / r as f64).round() as usize).clamp(1, n)
}

/// Random sequential dart throwing on the pixel lattice with minimum
/// separation `radius`.
fn dart_throw(h: usize, w: usize, radius: f64, order: &[usize]) -> Vec<bool> {
    let mut taken = vec![false; h * w];
    let reach = radius.ceil() as i64;
    let r2 = radius * radius;
    for &i in order {
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        let mut ok = true;
        'scan: for dy in -reach..=reach {
            let yy = y + dy;
            if yy < 0 || yy >= h as i64 {
                continue;
            }
            for dx in -reach..=reach {
                let xx = x + dx;
                if xx < 0 || xx >= w as i64 || (dx == 0 && dy == 0) {
                    continue;
                }
                if ((dx * dx + dy * dy) as f64) < r2 && taken[yy as usize * w + xx as usize] {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if ok {
            taken[i] = true;
        }
    }
    taken
}

/// Radius bisected until the dart-throwing density is within 5% of `1/r`,
/// then thinned or grown at random to the exact target count.
fn poisson_disc(h: usize, w: usize, r: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..h * w).collect();
    order.shuffle(&mut rng);
    let target = target_count(h * w, r);
    let count = |p: &[bool]| p.iter().filter(|&&b| b).count();
    // density falls as the radius grows
    let (mut lo, mut hi) = (0.0_f64, (r as f64).sqrt() * 2.0 + 1.0);
    let mut best = dart_throw(h, w, lo, &order);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let p = dart_throw(h, w, mid, &order);
        let c = count(&p);
        let close = (c as f64 - target as f64).abs() <= 0.05 * target as f64;
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (c as i64 - target as i64).abs() < (count(&best) as i64 - target as i64).abs() {
            best = p;
        }
        if close {
            break;
        }
    }
    let mut on: Vec<usize> = (0..h * w).filter(|&i| best[i]).collect();
    let mut off: Vec<usize> = (0..h * w).filter(|&i| !best[i]).collect();
    on.shuffle(&mut rng);
    off.shuffle(&mut rng);
    let c = on.len();
    if c > target {
        for &i in &on[..c - target] {
            best[i] = false;
        }
    } else {
        for &i in &off[..target - c] {
            best[i] = true;
        }
    }
    best
}
