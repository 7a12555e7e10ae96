use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Raw bytes split into a training head and a contiguous validation tail.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: Vec<u8>,
    pub val: Vec<u8>,
}

pub fn load_corpus(path: &Path, val_fraction: f64) -> Result<Corpus> {
    let bytes = std::fs::read(path).map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))?;
    Corpus::from_bytes(bytes, val_fraction)
}

impl Corpus {
    pub fn from_bytes(mut bytes: Vec<u8>, val_fraction: f64) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::Corpus("empty corpus".into()));
        }
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::Corpus(format!("validation fraction must be in (0, 1), got {val_fraction}")));
        }
        let n_val = ((bytes.len() as f64 * val_fraction).round() as usize).clamp(1, bytes.len() - 1);
        let val = bytes.split_off(bytes.len() - n_val);
        Ok(Corpus { train: bytes, val })
    }

    /// Uniform random window of `len` bytes from the training split.
    pub fn sample_train<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<&[u8]> {
        sample_window(&self.train, len, rng)
    }
}

/// Uniform random window of `len` bytes lying entirely inside `data`.
pub fn sample_window<'a, R: Rng + ?Sized>(data: &'a [u8], len: usize, rng: &mut R) -> Result<&'a [u8]> {
    if len == 0 || data.len() < len {
        return Err(Error::Corpus(format!("split of {} bytes cannot hold a window of {len}", data.len())));
    }
    let start = rng.random_range(0..=data.len() - len);
    Ok(&data[start..start + len])
}

/// Windows of `n_inp + 1` bytes with stride `n_inp`: every byte after the
/// first is a prediction target exactly once.
pub fn eval_windows(data: &[u8], n_inp: usize) -> Vec<&[u8]> {
    if n_inp == 0 || data.len() < n_inp + 1 {
        return Vec::new();
    }
    (0..=(data.len() - n_inp - 1) / n_inp)
        .map(|k| &data[k * n_inp..k * n_inp + n_inp + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tail_split() {
        let c = Corpus::from_bytes((0..100).collect(), 0.1).unwrap();
        assert_eq!(c.train.len(), 90);
        assert_eq!(c.val, (90..100).collect::<Vec<u8>>());
    }

    #[test]
    fn empty_rejected() {
        assert!(Corpus::from_bytes(Vec::new(), 0.1).is_err());
    }

    #[test]
    fn windows_stay_inside() {
        let data: Vec<u8> = (0..50).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let w = sample_window(&data, 9, &mut rng).unwrap();
            assert_eq!(w.len(), 9);
            assert_eq!(w[8] - w[0], 8);
        }
        assert!(sample_window(&data, 51, &mut rng).is_err());
    }

    #[test]
    fn eval_windows_cover_targets_once() {
        let data: Vec<u8> = (0..20).collect();
        let w = eval_windows(&data, 4);
        assert_eq!(w.len(), 4);
        let targets: Vec<u8> = w.iter().flat_map(|w| w[1..].to_vec()).collect();
        assert_eq!(targets, (1..17).collect::<Vec<u8>>());
    }
}
