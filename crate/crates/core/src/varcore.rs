//! Scalar recurrences for value and exponentially weighted variance
//! estimation, the direct-summation oracle, and trajectory replay.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Running value / weighted standard deviation estimate for one
/// state-action pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwEstimate {
    pub q: f64,
    pub sigma: f64,
    pub n: u64,
}

impl EwEstimate {
    pub fn new(q: f64, sigma: f64) -> Self {
        Self { q, sigma, n: 0 }
    }

    /// Folds one observed return into the estimate.
    pub fn observe(&mut self, g: f64, alpha: f64) -> Result<()> {
        *self = sigma_update(*self, g, alpha)?;
        Ok(())
    }
}

impl Default for EwEstimate {
    fn default() -> Self {
        Self::new(0.0, 0.0)
    }
}

/// An ordered sequence of returns together with the step size used to
/// estimate from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSequence {
    returns: Vec<f64>,
    alpha: f64,
}

impl ReturnSequence {
    pub fn new(returns: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { returns, alpha })
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// `q + alpha * (g - q)`.
pub fn q_update(q: f64, g: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(q + alpha * (g - q))
}

/// One step of the weighted-variance recurrence:
///
/// `sigma' = sqrt((1 - a) * (sigma^2 + (q' - q)^2) + a * (g - q')^2)`
///
/// where `q'` is the value after [`q_update`]. The radicand is clamped at
/// zero so the result is never negative or NaN.
pub fn sigma_update(est: EwEstimate, g: f64, alpha: f64) -> Result<EwEstimate> {
    if !est.q.is_finite() {
        return Err(Error::NonFinite("q"));
    }
    if !est.sigma.is_finite() {
        return Err(Error::NonFinite("sigma"));
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("return"));
    }
    let q_next = q_update(est.q, g, alpha)?;
    let shift = q_next - est.q;
    let resid = g - q_next;
    let radicand = (1.0 - alpha) * (est.sigma * est.sigma + shift * shift) + alpha * resid * resid;
    Ok(EwEstimate {
        q: q_next,
        sigma: radicand.max(0.0).sqrt(),
        n: est.n + 1,
    })
}

/// Weighted standard deviation by direct summation over the whole sequence,
/// with `Q_n` obtained by folding [`q_update`] from `Q_0 = 0`.
pub fn sigma_oracle(seq: &ReturnSequence) -> Result<f64> {
    let returns = seq.returns();
    if returns.is_empty() {
        return Err(Error::EmptySequence);
    }
    let alpha = seq.alpha();
    let mut q = 0.0;
    for &g in returns {
        if !g.is_finite() {
            return Err(Error::NonFinite("return"));
        }
        q = q_update(q, g, alpha)?;
    }
    let n = returns.len();
    let decay = 1.0 - alpha;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &g) in returns.iter().enumerate() {
        let w = decay.powi((n - 1 - i) as i32);
        num += w * (g - q) * (g - q);
        den += w;
    }
    Ok((num / den).sqrt())
}

/// `(q, sigma)` after each prefix of the sequence, starting from `q = 0`,
/// `sigma = 0`.
pub fn replay_sequence(seq: &ReturnSequence) -> Result<Vec<(f64, f64)>> {
    let mut est = EwEstimate::default();
    seq.returns()
        .iter()
        .map(|&g| {
            est = sigma_update(est, g, seq.alpha())?;
            Ok((est.q, est.sigma))
        })
        .collect()
}

/// Reads one return per line. Blank lines and a leading non-numeric header
/// line are skipped.
pub fn read_returns_csv<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<returns>", e))?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(Error::Format(format!(
                    "line {}: not a number: {field:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Writes `index,q,sigma` rows; `index` is the 1-based visit count.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "index,q,sigma")?;
    for (i, (q, s)) in traj.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, q, s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fold(returns: &[f64], alpha: f64) -> EwEstimate {
        returns.iter().fold(EwEstimate::default(), |e, &g| {
            sigma_update(e, g, alpha).unwrap()
        })
    }

    // Independent closed form for the value after n returns.
    fn q_closed_form(q0: f64, returns: &[f64], alpha: f64) -> f64 {
        let n = returns.len();
        let mut q = (1.0 - alpha).powi(n as i32) * q0;
        for (i, g) in returns.iter().enumerate() {
            q += alpha * (1.0 - alpha).powi((n - 1 - i) as i32) * g;
        }
        q
    }

    #[test]
    fn q_update_examples() {
        assert_eq!(q_update(0.0, 1.0, 0.1).unwrap(), 0.1);
        assert_eq!(q_update(2.5, 2.5, 0.3).unwrap(), 2.5);
        let mut q = 0.0;
        for _ in 0..200 {
            q = q_update(q, 1.0, 0.1).unwrap();
        }
        assert!((q - 1.0).abs() < 1e-6);
    }

    #[test]
    fn q_update_rejects_bad_alpha() {
        for a in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(q_update(0.0, 1.0, a), Err(Error::InvalidAlpha(_))));
        }
        assert!(q_update(0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn sigma_update_examples() {
        let e = sigma_update(
            EwEstimate {
                q: 5.0,
                sigma: 0.0,
                n: 7,
            },
            5.0,
            0.1,
        )
        .unwrap();
        assert_eq!(
            e,
            EwEstimate {
                q: 5.0,
                sigma: 0.0,
                n: 8
            }
        );

        let e = sigma_update(EwEstimate::default(), 1.0, 0.1).unwrap();
        assert!((e.q - 0.1).abs() < 1e-15);
        assert!((e.sigma - 0.3).abs() < 1e-15);
        assert_eq!(e.n, 1);
    }

    #[test]
    fn sigma_update_rejects_non_finite() {
        let e = EwEstimate::default();
        assert!(sigma_update(e, f64::NAN, 0.1).is_err());
        assert!(sigma_update(e, f64::INFINITY, 0.1).is_err());
        assert!(sigma_update(EwEstimate::new(f64::NAN, 0.0), 1.0, 0.1).is_err());
        assert!(sigma_update(EwEstimate::new(0.0, f64::INFINITY), 1.0, 0.1).is_err());
    }

    #[test]
    fn alternating_sequence_matches_oracle() {
        let returns: Vec<f64> = (0..300).map(|i| (i % 2) as f64).map(|x| 1.0 - x).collect();
        let est = fold(&returns, 0.1);
        let oracle = sigma_oracle(&ReturnSequence::new(returns, 0.1).unwrap()).unwrap();
        assert!(
            (est.sigma - oracle).abs() <= 1e-3 * oracle,
            "{} vs {}",
            est.sigma,
            oracle
        );
    }

    #[test]
    fn oracle_examples() {
        let s = sigma_oracle(&ReturnSequence::new(vec![1.0], 0.1).unwrap()).unwrap();
        assert!((s - 0.9).abs() < 1e-15);

        let g = 3.0;
        let s = sigma_oracle(&ReturnSequence::new(vec![g; 200], 0.1).unwrap()).unwrap();
        assert!(s <= g * 1e-8, "{s}");

        assert!(matches!(
            sigma_oracle(&ReturnSequence::new(vec![], 0.1).unwrap()),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn random_sequence_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let returns: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let est = fold(&returns, 0.3);
        let oracle = sigma_oracle(&ReturnSequence::new(returns, 0.3).unwrap()).unwrap();
        assert!((est.sigma - oracle).abs() <= 1e-3 * oracle);
    }

    #[test]
    fn oracle_is_order_sensitive() {
        let a = ReturnSequence::new(vec![0.0, 0.0, 0.0, 10.0], 0.5).unwrap();
        let b = ReturnSequence::new(vec![10.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        let (sa, sb) = (sigma_oracle(&a).unwrap(), sigma_oracle(&b).unwrap());
        assert!((sa - sb).abs() > 0.1, "{sa} {sb}");
    }

    #[test]
    fn recurrence_bias_decays_with_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alpha = 0.05;
        let returns: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let err = |n: usize| {
            let est = fold(&returns[..n], alpha);
            let seq = ReturnSequence::new(returns[..n].to_vec(), alpha).unwrap();
            (est.sigma - sigma_oracle(&seq).unwrap()).abs()
        };
        let (e50, e100, e200, e300) = (err(50), err(100), err(200), err(300));
        assert!(
            e50 > e100 && e100 > e200 && e200 > e300,
            "{e50} {e100} {e200} {e300}"
        );
        assert!(e100 > 1e-3, "{e100}");
        assert!(e200 < 1e-4, "{e200}");
    }

    #[test]
    fn replay_examples() {
        let empty = ReturnSequence::new(vec![], 0.1).unwrap();
        assert!(replay_sequence(&empty).unwrap().is_empty());

        let one = replay_sequence(&ReturnSequence::new(vec![1.0], 0.1).unwrap()).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].0 - 0.1).abs() < 1e-15 && (one[0].1 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn replay_sigma_settles_after_ramp() {
        let mut returns: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        returns.extend(std::iter::repeat_n(5.0, 100));
        let traj = replay_sequence(&ReturnSequence::new(returns, 0.1).unwrap()).unwrap();
        // the first return equals Q_0, so only later entries carry spread
        assert_eq!(traj[0].1, 0.0);
        assert!(traj[1..].iter().all(|&(_, s)| s > 0.0));
        let ramp_end = traj[50].1;
        let settled = traj.last().unwrap().1;
        assert!(ramp_end > settled, "{ramp_end} vs {settled}");
        assert!(traj[10..=50].iter().all(|&(_, s)| s > settled));
    }

    #[test]
    fn csv_round_trip() {
        let input = "return\n1.0\n\n-0.5\n2\n";
        let returns = read_returns_csv(input.as_bytes()).unwrap();
        assert_eq!(returns, vec![1.0, -0.5, 2.0]);
        assert!(read_returns_csv("1\nx\n".as_bytes()).is_err());

        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[(0.1, 0.3)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,q,sigma\n1,0.1,0.3\n"
        );
    }

    proptest! {
        #[test]
        fn sigma_never_negative(
            q in -1e6f64..1e6, sigma in 0f64..1e6, g in -1e6f64..1e6, alpha in 1e-6f64..=1.0
        ) {
            let e = sigma_update(EwEstimate::new(q, sigma), g, alpha).unwrap();
            prop_assert!(e.sigma >= 0.0);
            prop_assert!(!e.sigma.is_nan());
        }

        #[test]
        fn q_matches_closed_form(
            q0 in -10f64..10.0,
            returns in proptest::collection::vec(-10f64..10.0, 0..300),
            alpha in 0.01f64..=1.0,
        ) {
            let mut est = EwEstimate::new(q0, 0.0);
            for &g in &returns {
                est.observe(g, alpha).unwrap();
            }
            prop_assert_eq!(est.n, returns.len() as u64);
            prop_assert!((est.q - q_closed_form(q0, &returns, alpha)).abs() <= 1e-9);
        }

        #[test]
        fn recurrence_converges_to_oracle(
            returns in proptest::collection::vec(-1f64..=1.0, 100..400),
            alpha_idx in 0usize..3,
        ) {
            let alpha: f64 = [0.05, 0.1, 0.3][alpha_idx];
            // the recurrence is only unbiased once (1 - alpha)^n is negligible
            prop_assume!((1.0 - alpha).powi(returns.len() as i32) <= 1e-3);
            let est = fold(&returns, alpha);
            let oracle = sigma_oracle(&ReturnSequence::new(returns, alpha).unwrap()).unwrap();
            prop_assert!((est.sigma - oracle).abs() <= f64::max(1e-3, 1e-3 * oracle));
        }
    }
}
