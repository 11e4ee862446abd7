use crate::error::{Error, Result};

/// Human-normalized score in percent: `100 (agent - random) / (human - random)`.
pub fn normalized_score(agent: f64, random: f64, human: f64) -> Result<f64> {
    if human == random {
        return Err(Error::DegenerateReference(human));
    }
    Ok(100.0 * (agent - random) / (human - random))
}

/// One row of the bundled Atari raw-score table.
#[derive(Debug, Clone, PartialEq)]
pub struct AtariRow {
    pub game: String,
    pub random: f64,
    pub human: f64,
    pub ddqn: f64,
    pub vdqn: f64,
    pub tddqn: f64,
}

impl AtariRow {
    /// Raw score of a method by name (`ddqn`, `vdqn`/`v-dqn`, `tddqn`/`td-dqn`).
    pub fn method(&self, name: &str) -> Option<f64> {
        match name.to_ascii_lowercase().replace('-', "").as_str() {
            "ddqn" => Some(self.ddqn),
            "vdqn" => Some(self.vdqn),
            "tddqn" => Some(self.tddqn),
            _ => None,
        }
    }
}

pub const METHODS: [&str; 3] = ["ddqn", "vdqn", "tddqn"];

const ATARI_CSV: &str = include_str!("../../data/atari_scores.csv");

/// Random, human and agent raw scores for 55 Atari games.
pub fn atari_table() -> Vec<AtariRow> {
    ATARI_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            let f = |i: usize| {
                c[i].parse::<f64>()
                    .expect("bundled score table is well formed")
            };
            AtariRow {
                game: c[0].to_string(),
                random: f(1),
                human: f(2),
                ddqn: f(3),
                vdqn: f(4),
                tddqn: f(5),
            }
        })
        .collect()
}

/// Case-insensitive game lookup.
pub fn atari_game(name: &str) -> Option<AtariRow> {
    atari_table()
        .into_iter()
        .find(|r| r.game.eq_ignore_ascii_case(name))
}
