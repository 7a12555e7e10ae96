use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::SequenceModel;

/// Draw an index from `softmax(logits / temperature)`.
pub fn sample_softmax<R: Rng + ?Sized>(logits: &[f32], temperature: f32, rng: &mut R) -> Result<usize> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    if logits.is_empty() {
        return Err(Error::InvalidArgument("no logits".into()));
    }
    let t = f64::from(temperature);
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let w: Vec<f64> = logits.iter().map(|&l| ((l as f64 - max) / t).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in w.iter().enumerate() {
        if target < *w {
            return Ok(i);
        }
        target -= w;
    }
    // roundoff: fall back to the last nonzero weight
    Ok(w.iter().rposition(|&w| w > 0.0).unwrap_or(0))
}

/// Autoregressive sampling. The context is the trailing `window` bytes of
/// prompt plus output; an empty prompt starts from a single space.
pub fn generate<M: SequenceModel + ?Sized>(
    model: &M,
    prompt: &[u8],
    len: usize,
    temperature: f32,
    window: usize,
    seed: u64,
) -> Result<Vec<u8>> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if window == 0 {
        return Err(Error::InvalidArgument("context window must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = if prompt.is_empty() { vec![b' '] } else { prompt.to_vec() };
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let ctx = &text[text.len().saturating_sub(window)..];
        let logits = model.forward(ctx)?;
        let last = logits.last().ok_or(Error::EmptySequence)?;
        let b = sample_softmax(last, temperature, &mut rng)? as u8;
        out.push(b);
        text.push(b);
    }
    Ok(out)
}
