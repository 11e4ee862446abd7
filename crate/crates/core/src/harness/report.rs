use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::Summary;

pub const SEED_HEADER: &str = "eval_point,seed,return,exploration_rate";
pub const AGGREGATE_HEADER: &str = "eval_point,mean,q1,median,q3";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Mean return over the evaluation episodes.
    pub ret: f64,
    /// Fraction of non-greedy training actions since the previous point.
    pub exploration_rate: f64,
}

/// Cross-seed aggregate at one evaluation point. Quartiles interpolate
/// linearly between order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub eval_point: u64,
    pub seeds: Vec<SeedResult>,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl EvalReport {
    pub fn from_seeds(eval_point: u64, seeds: Vec<SeedResult>) -> Self {
        let returns: Vec<f64> = seeds.iter().map(|s| s.ret).collect();
        let s = Summary::of(&returns);
        Self {
            eval_point,
            seeds,
            mean: s.mean,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
        }
    }

    pub fn returns(&self) -> Vec<f64> {
        self.seeds.iter().map(|s| s.ret).collect()
    }
}

/// Per-seed rows under [`SEED_HEADER`], then aggregate rows under
/// [`AGGREGATE_HEADER`]. Both headers are always present.
pub fn write_reports<W: Write>(mut w: W, reports: &[EvalReport]) -> std::io::Result<()> {
    writeln!(w, "{SEED_HEADER}")?;
    for r in reports {
        for s in &r.seeds {
            writeln!(
                w,
                "{},{},{},{}",
                r.eval_point, s.seed, s.ret, s.exploration_rate
            )?;
        }
    }
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.eval_point, r.mean, r.q1, r.median, r.q3
        )?;
    }
    w.flush()
}

pub fn emit_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_reports(BufWriter::new(f), reports).map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_reports`]. Aggregate rows must agree with the
/// per-seed rows to 1e-9.
pub fn read_reports<R: BufRead>(reader: R) -> Result<Vec<EvalReport>> {
    let bad = |line: usize, m: &str| Error::Format(format!("line {line}: {m}"));
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == SEED_HEADER => {}
        Some((_, Err(e))) => return Err(Error::io("reports", e)),
        _ => return Err(bad(1, "missing per-seed header")),
    }
    let mut reports: Vec<EvalReport> = Vec::new();
    let mut aggregates = Vec::new();
    let mut in_aggregates = false;
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io("reports", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == AGGREGATE_HEADER {
            in_aggregates = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let num = |j: usize| -> Result<f64> {
            cells
                .get(j)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad(i + 1, "bad number"))
        };
        let point: u64 = cells[0].parse().map_err(|_| bad(i + 1, "bad eval point"))?;
        if in_aggregates {
            if cells.len() != 5 {
                return Err(bad(i + 1, "expected 5 aggregate columns"));
            }
            aggregates.push((i + 1, point, [num(1)?, num(2)?, num(3)?, num(4)?]));
        } else {
            if cells.len() != 4 {
                return Err(bad(i + 1, "expected 4 per-seed columns"));
            }
            let seed = cells[1].parse().map_err(|_| bad(i + 1, "bad seed"))?;
            let row = SeedResult {
                seed,
                ret: num(2)?,
                exploration_rate: num(3)?,
            };
            match reports.last_mut() {
                Some(r) if r.eval_point == point => r.seeds.push(row),
                _ => reports.push(EvalReport {
                    eval_point: point,
                    seeds: vec![row],
                    mean: 0.0,
                    q1: 0.0,
                    median: 0.0,
                    q3: 0.0,
                }),
            }
        }
    }
    if aggregates.len() != reports.len() {
        return Err(Error::Format(format!(
            "{} aggregate rows for {} evaluation points",
            aggregates.len(),
            reports.len()
        )));
    }
    for (r, (line, point, [mean, q1, median, q3])) in reports.iter_mut().zip(aggregates) {
        if point != r.eval_point {
            return Err(bad(line, "aggregate rows out of step with per-seed rows"));
        }
        let fresh = EvalReport::from_seeds(point, std::mem::take(&mut r.seeds));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        if !(close(mean, fresh.mean)
            && close(q1, fresh.q1)
            && close(median, fresh.median)
            && close(q3, fresh.q3))
        {
            return Err(bad(line, "aggregates disagree with per-seed rows"));
        }
        *r = EvalReport {
            mean,
            q1,
            median,
            q3,
            ..fresh
        };
    }
    Ok(reports)
}

pub fn read_csv(path: &Path) -> Result<Vec<EvalReport>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_reports(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(point: u64, rets: &[f64]) -> EvalReport {
        let seeds = rets
            .iter()
            .enumerate()
            .map(|(i, &r)| SeedResult {
                seed: i as u64,
                ret: r,
                exploration_rate: 0.1 * i as f64,
            })
            .collect();
        EvalReport::from_seeds(point, seeds)
    }

    fn text(reports: &[EvalReport]) -> String {
        let mut buf = Vec::new();
        write_reports(&mut buf, reports).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(text(&[]), format!("{SEED_HEADER}\n{AGGREGATE_HEADER}\n"));
        assert_eq!(read_reports(text(&[]).as_bytes()).unwrap(), vec![]);
    }

    #[test]
    fn single_seed_single_point() {
        let t = text(&[report(200, &[17.5])]);
        assert_eq!(
            t,
            format!("{SEED_HEADER}\n200,0,17.5,0\n{AGGREGATE_HEADER}\n200,17.5,17.5,17.5,17.5\n")
        );
    }

    #[test]
    fn round_trip() {
        let reports = vec![
            report(200, &[1.0 / 3.0, 500.0, 9.25]),
            report(400, &[0.1, 0.2, 1e-17]),
        ];
        assert_eq!(read_reports(text(&reports).as_bytes()).unwrap(), reports);
    }

    #[test]
    fn quartiles_are_ordered() {
        let r = report(1, &[5.0, 1.0, 4.0, 2.0, 3.0]);
        assert!(r.q1 <= r.median && r.median <= r.q3);
        assert_eq!((r.q1, r.median, r.q3, r.mean), (2.0, 3.0, 4.0, 3.0));
    }

    #[test]
    fn rejects_inconsistent_files() {
        let t = text(&[report(200, &[1.0, 2.0])]).replace("200,1.5,", "200,1.6,");
        assert!(matches!(read_reports(t.as_bytes()), Err(Error::Format(_))));
        assert!(read_reports("eval_point,seed\n".as_bytes()).is_err());
        let missing = format!("{SEED_HEADER}\n200,0,1,0\n");
        assert!(read_reports(missing.as_bytes()).is_err());
    }
}
