use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Uniformly random unlabeled id.
pub fn select_random<R: Rng + ?Sized>(labeled: &[bool], rng: &mut R) -> Result<usize> {
    let ids: Vec<usize> = (0..labeled.len()).filter(|&i| !labeled[i]).collect();
    ids.choose(rng).copied().ok_or(Error::NoneUnlabeled)
}

/// Most uncertain unlabeled id; exact ties are broken uniformly with `rng`.
pub fn select_uncertain<R: Rng + ?Sized>(
    u: &[f64],
    labeled: &[bool],
    rng: &mut R,
) -> Result<usize> {
    if u.len() != labeled.len() {
        return Err(Error::dims(labeled.len(), u.len()));
    }
    let best = (0..u.len())
        .filter(|&i| !labeled[i])
        .map(|i| u[i])
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        })
        .ok_or(Error::NoneUnlabeled)?;
    let tied: Vec<usize> = (0..u.len())
        .filter(|&i| !labeled[i] && u[i] == best)
        .collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    Ok(*tied.choose(rng).expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;

    #[test]
    fn random_singleton_and_reproducible() {
        let mut rng = stream_rng(1, &[]);
        let mut mask = vec![true; 5];
        mask[2] = false;
        assert_eq!(select_random(&mask, &mut rng).unwrap(), 2);
        let draw = |seed| {
            let mut rng = stream_rng(seed, &[]);
            (0..20)
                .map(|_| select_random(&[false; 10], &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert!(select_random(&[true; 3], &mut rng).is_err());
    }

    #[test]
    fn random_is_uniform() {
        let mut rng = stream_rng(77, &[]);
        let mut counts = [0usize; 10];
        let n = 10_000;
        for _ in 0..n {
            counts[select_random(&[false; 10], &mut rng).unwrap()] += 1;
        }
        // binomial(n, 0.1): sigma = sqrt(n p (1 - p)) = 30
        let sigma = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 5.0 * sigma, "{counts:?}");
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0)
            .sum();
        // 9 degrees of freedom, 0.999 quantile is 27.88
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn uncertain_argmax() {
        let mut rng = stream_rng(3, &[]);
        assert_eq!(
            select_uncertain(&[0.1, 0.9, 0.3], &[false; 3], &mut rng).unwrap(),
            1
        );
        assert_eq!(
            select_uncertain(&[0.1, 0.9, 0.3], &[false, true, false], &mut rng).unwrap(),
            2
        );
        assert!(select_uncertain(&[0.1], &[true], &mut rng).is_err());
    }

    #[test]
    fn uncertain_ties_are_spread() {
        let mut rng = stream_rng(4, &[]);
        let mut seen = [false; 4];
        for _ in 0..200 {
            seen[select_uncertain(&[0.5; 4], &[false; 4], &mut rng).unwrap()] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
