use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LoadClass;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const PILOT_DRAWS: usize = 1000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedDraw<T: Real> {
    /// `count × T`, one bus per row, in p.u.
    pub values: DMatrix<T>,
    pub pilot_acceptance: f64,
    pub proposals: usize,
}

/// Rows i.i.d. from `exp(ξ)`, `ξ ~ N(μ, Σ_T)` conditioned on every entry
/// lying in `[p_min, p_max]`, by rejection.
///
/// Row `i` uses its own ChaCha stream derived from one `u64` taken from
/// `rng`, so results do not depend on the order rows are produced in.
pub fn sample_truncated_loads<T: Real>(class: &LoadClass<T>, count: usize, rng: &mut dyn RngCore) -> Result<DMatrix<T>> {
    Ok(sample_truncated_with_stats(class, count, rng)?.values)
}

pub fn sample_truncated_with_stats<T: Real>(
    class: &LoadClass<T>,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<TruncatedDraw<T>> {
    let sampler = Gaussian::new(class)?;
    let base = rng.next_u64();
    let lo = class.p_min.ln();
    let hi = class.p_max.ln();
    let inside = |x: &DVector<T>| x.iter().all(|v| *v >= lo && *v <= hi);

    let mut pilot = stream(base, u64::MAX);
    let hits = (0..PILOT_DRAWS).filter(|_| inside(&sampler.draw(&mut pilot))).count();
    let rate = hits as f64 / PILOT_DRAWS as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::AcceptanceTooLow {
            rate,
            threshold: MIN_ACCEPTANCE,
        });
    }
    let cap = ((100.0 / rate).ceil() as usize).max(10_000);

    let t = class.horizon();
    let mut values = DMatrix::zeros(count, t);
    let mut proposals = 0;
    for row in 0..count {
        let mut r = stream(base, row as u64);
        let mut tries = 0;
        let x = loop {
            let x = sampler.draw(&mut r);
            tries += 1;
            if inside(&x) {
                break x;
            }
            if tries >= cap {
                return Err(Error::AcceptanceTooLow {
                    rate: 1.0 / tries as f64,
                    threshold: MIN_ACCEPTANCE,
                });
            }
        };
        proposals += tries;
        for j in 0..t {
            // exp can round just outside the box
            values[(row, j)] = x[j].exp().max(class.p_min).min(class.p_max);
        }
    }
    Ok(TruncatedDraw {
        values,
        pilot_acceptance: rate,
        proposals,
    })
}

fn stream(base: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(id);
    r
}

struct Gaussian<T: Real> {
    mu: DVector<T>,
    l: DMatrix<T>,
}

impl<T: Real> Gaussian<T> {
    fn new(class: &LoadClass<T>) -> Result<Self> {
        let chol = class.sigma_t.clone().cholesky().ok_or_else(|| Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        Ok(Self {
            mu: class.mu.clone(),
            l: chol.l(),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<T> {
        let z = DVector::from_fn(self.mu.len(), |_, _| {
            let x: f64 = StandardNormal.sample(rng);
            T::lit(x)
        });
        &self.mu + &self.l * z
    }
}
