use std::cmp::Ordering;
use std::fmt;

use super::report::EvalReport;
use crate::error::{Error, Result};

/// Per-method view of one report stream against a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub name: String,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    /// `mean - mean of the first stream` at each point.
    pub mean_diff: Vec<f64>,
    /// First point where the cross-seed mean reaches the threshold.
    pub to_threshold: Option<u64>,
    /// `to_threshold / to_threshold of the first stream`.
    pub ratio: Option<f64>,
    /// Per seed, first point where that seed's return reaches the threshold.
    pub seed_to_threshold: Vec<Option<u64>>,
    /// Median of `seed_to_threshold`, with unreached seeds ranked last.
    /// `None` when the median itself falls on an unreached seed.
    pub median_seed_to_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub points: Vec<u64>,
    pub threshold: f64,
    pub methods: Vec<MethodRow>,
}

/// Median of a censored sample: `None` entries count as larger than any
/// value.
pub fn censored_median(xs: &[Option<u64>]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| match (a, b) {
        (Some(a), Some(b)) => a.cmp(b),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].map(|x| x as f64)
    } else {
        Some((v[n / 2 - 1]? as f64 + v[n / 2]? as f64) / 2.0)
    }
}

fn first_reaching(
    points: &[u64],
    values: impl Iterator<Item = f64>,
    threshold: f64,
) -> Option<u64> {
    points
        .iter()
        .zip(values)
        .find(|(_, v)| *v >= threshold)
        .map(|(p, _)| *p)
}

/// Lines named report streams up on their common grid. The first stream is
/// the reference for differences and ratios.
pub fn compare(runs: &[(String, Vec<EvalReport>)], threshold: f64) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two report streams".into(),
        ));
    }
    let points: Vec<u64> = runs[0].1.iter().map(|r| r.eval_point).collect();
    for (_, reports) in runs {
        if !reports
            .iter()
            .map(|r| r.eval_point)
            .eq(points.iter().copied())
        {
            return Err(Error::MismatchedGrids);
        }
    }
    let mut methods: Vec<MethodRow> = Vec::with_capacity(runs.len());
    for (name, reports) in runs {
        let mean: Vec<f64> = reports.iter().map(|r| r.mean).collect();
        let median = reports.iter().map(|r| r.median).collect();
        let to_threshold = first_reaching(&points, mean.iter().copied(), threshold);
        let num_seeds = reports.first().map_or(0, |r| r.seeds.len());
        let seed_to_threshold: Vec<Option<u64>> = (0..num_seeds)
            .map(|k| {
                first_reaching(
                    &points,
                    reports
                        .iter()
                        .map(|r| r.seeds.get(k).map_or(f64::NAN, |s| s.ret)),
                    threshold,
                )
            })
            .collect();
        let (mean_diff, ratio) = match methods.first() {
            None => (vec![0.0; points.len()], to_threshold.map(|_| 1.0)),
            Some(first) => (
                mean.iter().zip(&first.mean).map(|(a, b)| a - b).collect(),
                match (to_threshold, first.to_threshold) {
                    (Some(a), Some(b)) => Some(a as f64 / b as f64),
                    _ => None,
                },
            ),
        };
        methods.push(MethodRow {
            name: name.clone(),
            mean,
            median,
            mean_diff,
            to_threshold,
            ratio,
            median_seed_to_threshold: censored_median(&seed_to_threshold),
            seed_to_threshold,
        });
    }
    Ok(Comparison {
        points,
        threshold,
        methods,
    })
}

fn opt<T: fmt::Display>(x: &Option<T>) -> String {
    x.as_ref()
        .map_or_else(|| "never".to_string(), |v| v.to_string())
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eval_point")?;
        for m in &self.methods {
            write!(f, ",{0}_mean,{0}_median,{0}_mean_diff", m.name)?;
        }
        writeln!(f)?;
        for (i, p) in self.points.iter().enumerate() {
            write!(f, "{p}")?;
            for m in &self.methods {
                write!(f, ",{},{},{}", m.mean[i], m.median[i], m.mean_diff[i])?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "threshold {}", self.threshold)?;
        writeln!(
            f,
            "method,first_point_mean,ratio_to_first,median_over_seeds,per_seed"
        )?;
        for m in &self.methods {
            let per_seed: Vec<String> = m.seed_to_threshold.iter().map(opt).collect();
            writeln!(
                f,
                "{},{},{},{},{}",
                m.name,
                opt(&m.to_threshold),
                opt(&m.ratio),
                opt(&m.median_seed_to_threshold),
                per_seed.join(" ")
            )?;
        }
        Ok(())
    }
}
