use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Ticks per second; one tick is 1 ms.
pub const TICKS_PER_SECOND: f64 = 1000.0;

/// Spike ticks of a Bernoulli-per-tick Poisson train.
///
/// Each tick in `0..ticks` independently carries a spike with probability
/// `rate_hz / 1000`. The gaps are sampled directly from the matching
/// geometric law, which is the same process.
pub fn poisson_train(rate_hz: f64, ticks: u64, seed: u64) -> Result<Vec<u64>> {
    if !(0.0..=TICKS_PER_SECOND).contains(&rate_hz) {
        return Err(Error::Domain(format!(
            "rate {rate_hz} Hz outside [0, 1000]: at most one spike per 1 ms tick"
        )));
    }
    let p = rate_hz / TICKS_PER_SECOND;
    if p == 0.0 {
        return Ok(Vec::new());
    }
    if p == 1.0 {
        return Ok((0..ticks).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_q = (1.0 - p).ln();
    let mut out = Vec::with_capacity((ticks as f64 * p * 1.1) as usize + 4);
    // t is the tick of the previous spike plus one
    let mut t: u64 = 0;
    loop {
        // failures before the next success
        let u: f64 = rng.gen::<f64>();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (ticks - t) as f64 {
            break;
        }
        let tick = t + skip as u64;
        out.push(tick);
        t = tick + 1;
        if t >= ticks {
            break;
        }
    }
    Ok(out)
}
