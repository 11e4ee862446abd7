use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::varcore::{sigma_update, EwEstimate};

/// Per state-action value, weighted standard deviation and visit count.
#[derive(Debug, Clone, PartialEq)]
pub struct QSigmaTable {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    sigma: Vec<f64>,
    visits: Vec<u64>,
}

impl QSigmaTable {
    /// All values start at zero, all standard deviations at `sigma0`.
    pub fn new(num_states: usize, num_actions: usize, sigma0: f64) -> Self {
        assert!(sigma0 >= 0.0, "prior sigma must be nonnegative");
        let len = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            q: vec![0.0; len],
            sigma: vec![sigma0; len],
            visits: vec![0; len],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn offset(&self, s: usize) -> usize {
        assert!(s < self.num_states, "state {s} out of range");
        s * self.num_actions
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        let o = self.offset(s);
        &self.q[o..o + self.num_actions]
    }

    pub fn sigma_row(&self, s: usize) -> &[f64] {
        let o = self.offset(s);
        &self.sigma[o..o + self.num_actions]
    }

    pub fn visits_row(&self, s: usize) -> &[u64] {
        let o = self.offset(s);
        &self.visits[o..o + self.num_actions]
    }

    pub fn max_q(&self, s: usize) -> f64 {
        self.q_row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn estimate(&self, s: usize, a: usize) -> EwEstimate {
        let i = self.offset(s) + a;
        EwEstimate {
            q: self.q[i],
            sigma: self.sigma[i],
            n: self.visits[i],
        }
    }

    /// Overwrites one cell.
    pub fn set(&mut self, s: usize, a: usize, q: f64, sigma: f64) {
        assert!(sigma >= 0.0);
        let i = self.offset(s) + a;
        self.q[i] = q;
        self.sigma[i] = sigma;
    }

    /// Folds return `g` into cell `(s, a)` with the joint value / sigma
    /// recurrence.
    pub fn update(&mut self, s: usize, a: usize, g: f64, alpha: f64) -> Result<()> {
        if a >= self.num_actions {
            return Err(Error::OutOfRange {
                index: a,
                len: self.num_actions,
            });
        }
        if s >= self.num_states {
            return Err(Error::OutOfRange {
                index: s,
                len: self.num_states,
            });
        }
        let next = sigma_update(self.estimate(s, a), g, alpha)?;
        let i = s * self.num_actions + a;
        self.q[i] = next.q;
        self.sigma[i] = next.sigma;
        self.visits[i] = next.n;
        Ok(())
    }

    /// `state,action,q,sigma,visits` rows, one per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "state,action,q,sigma,visits")?;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let i = s * self.num_actions + a;
                writeln!(
                    w,
                    "{s},{a},{},{},{}",
                    self.q[i], self.sigma[i], self.visits[i]
                )?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<table>", e))?;
            if lineno == 0 {
                if line.trim() != "state,action,q,sigma,visits" {
                    return Err(Error::Format(format!("unexpected table header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("line {}: {line:?}", lineno + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let s: usize = f[0].parse().map_err(|_| bad())?;
            let a: usize = f[1].parse().map_err(|_| bad())?;
            let q: f64 = f[2].parse().map_err(|_| bad())?;
            let sigma: f64 = f[3].parse().map_err(|_| bad())?;
            let visits: u64 = f[4].parse().map_err(|_| bad())?;
            if sigma < 0.0 {
                return Err(bad());
            }
            rows.push((s, a, q, sigma, visits));
        }
        let num_states = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let num_actions = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != num_states * num_actions {
            return Err(Error::Format("table dump is not a full grid".into()));
        }
        let mut table = Self::new(num_states, num_actions, 0.0);
        for (s, a, q, sigma, visits) in rows {
            let i = s * num_actions + a;
            table.q[i] = q;
            table.sigma[i] = sigma;
            table.visits[i] = visits;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varcore::{replay_sequence, ReturnSequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_cell_update() {
        let mut t = QSigmaTable::new(2, 2, 0.0);
        t.update(1, 0, 1.0, 0.1).unwrap();
        let e = t.estimate(1, 0);
        assert!((e.q - 0.1).abs() < 1e-15 && (e.sigma - 0.3).abs() < 1e-15);
        assert_eq!(e.n, 1);
        assert_eq!(t.estimate(0, 0), EwEstimate::default());
    }

    #[test]
    fn update_at_current_value_only_counts() {
        let mut t = QSigmaTable::new(1, 2, 0.0);
        t.set(0, 1, 4.0, 0.0);
        t.update(0, 1, 4.0, 0.3).unwrap();
        assert_eq!(
            t.estimate(0, 1),
            EwEstimate {
                q: 4.0,
                sigma: 0.0,
                n: 1
            }
        );
    }

    #[test]
    fn matches_sequence_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g: Vec<f64> = (0..300).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut t = QSigmaTable::new(3, 3, 0.0);
        for &x in &g {
            t.update(2, 1, x, 0.1).unwrap();
        }
        let traj = replay_sequence(&ReturnSequence::new(g, 0.1).unwrap()).unwrap();
        let (q, s) = *traj.last().unwrap();
        let e = t.estimate(2, 1);
        assert_eq!((e.q, e.sigma, e.n), (q, s, 300));
    }

    #[test]
    fn rejects_bad_indices() {
        let mut t = QSigmaTable::new(2, 2, 0.0);
        assert!(t.update(0, 2, 1.0, 0.1).is_err());
        assert!(t.update(2, 0, 1.0, 0.1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = QSigmaTable::new(3, 2, 5000.0);
        t.update(1, 1, 2.5, 0.1).unwrap();
        t.update(2, 0, -1.0 / 3.0, 0.1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("state,action,q,sigma,visits\n0,0,0,5000,0\n"));
        assert_eq!(QSigmaTable::read_csv(buf.as_slice()).unwrap(), t);
    }
}
