//! Replay buffer of past negative samples.

use kiebm_grad::{RealTensor, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};

/// Fixed-capacity store of `(channels, h, w)` samples with uniform random
/// eviction once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    item_shape: Option<[usize; 3]>,
    samples: Vec<Vec<T>>,
    rng: ChaCha8Rng,
}

/// Negative-chain initialisation drawn by [`ReplayBuffer::init_negatives`].
#[derive(Debug, Clone)]
pub struct NegativeInit<T> {
    pub batch: RealTensor<T>,
    pub from_buffer: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Parameter("replay buffer capacity must be > 0".into()));
        }
        Ok(Self {
            capacity,
            item_shape: None,
            samples: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn check_item(&mut self, shape: [usize; 4]) -> Result<()> {
        let item = [shape[1], shape[2], shape[3]];
        match self.item_shape {
            None => {
                self.item_shape = Some(item);
                Ok(())
            }
            Some(s) if s == item => Ok(()),
            Some(s) => shape_err(format!("buffer holds {s:?} samples, got {item:?}")),
        }
    }

    /// Stores every item of `batch`.
    pub fn push(&mut self, batch: &RealTensor<T>) -> Result<()> {
        self.check_item(batch.shape())?;
        for b in 0..batch.batch() {
            let item = batch.item(b).to_vec();
            if self.samples.len() < self.capacity {
                self.samples.push(item);
            } else {
                let i = self.rng.gen_range(0..self.capacity);
                self.samples[i] = item;
            }
        }
        Ok(())
    }

    /// Draws `n` chain starts: each from the buffer with probability
    /// `buffer_fraction` (when non-empty), otherwise uniform noise on `range`.
    pub fn init_negatives(
        &mut self,
        n: usize,
        item_shape: [usize; 3],
        buffer_fraction: f64,
        range: (f64, f64),
    ) -> Result<NegativeInit<T>> {
        if let Some(s) = self.item_shape {
            if s != item_shape {
                return shape_err(format!("buffer holds {s:?} samples, requested {item_shape:?}"));
            }
        }
        let len = item_shape.iter().product::<usize>();
        let mut data = Vec::with_capacity(n * len);
        let mut from_buffer = 0;
        for _ in 0..n {
            let use_buffer = !self.samples.is_empty() && self.rng.gen_bool(buffer_fraction.clamp(0.0, 1.0));
            if use_buffer {
                let i = self.rng.gen_range(0..self.samples.len());
                data.extend_from_slice(&self.samples[i]);
                from_buffer += 1;
            } else {
                for _ in 0..len {
                    data.push(T::from_f64_lossy(self.rng.gen_range(range.0..range.1)));
                }
            }
        }
        let [c, h, w] = item_shape;
        Ok(NegativeInit {
            batch: RealTensor::new([n, c, h, w], data)?,
            from_buffer,
        })
    }
}
