//! Plain-text MDP dump.
//!
//! ```text
//! small-mdp 1
//! states <n>
//! actions <m>
//! criterion average            | criterion discounted <gamma>
//! r <s> <a> <reward>           one line per (s, a)
//! p <s> <a> <s'> <probability> one line per nonzero entry
//! ```
//!
//! Lines starting with `#` are comments. Floats are written in shortest
//! round-trip form so a dump reloads bit-exactly.

use std::fmt::Write as _;

use super::{Criterion, SmallMdp};
use crate::error::{Error, Result};

const HEADER: &str = "small-mdp 1";

impl SmallMdp {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "states {}", self.num_states);
        let _ = writeln!(out, "actions {}", self.num_actions);
        match self.criterion {
            Criterion::Average => {
                let _ = writeln!(out, "criterion average");
            }
            Criterion::Discounted(g) => {
                let _ = writeln!(out, "criterion discounted {g:?}");
            }
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let _ = writeln!(out, "r {s} {a} {:?}", self.reward(s, a));
            }
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for (next, &p) in self.row(s, a).iter().enumerate() {
                    if p != 0.0 {
                        let _ = writeln!(out, "p {s} {a} {next} {p:?}");
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse(format!("line {}: {msg}", line + 1));
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next_line = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));

        let (i, header) = next_line("header")?;
        if header != HEADER {
            return Err(bad(i, "unknown header"));
        }
        let mut count = |key: &str| -> Result<usize> {
            let (i, l) = next_line(key)?;
            l.strip_prefix(key)
                .and_then(|rest| rest.trim().parse().ok())
                .ok_or_else(|| bad(i, &format!("expected `{key} <count>`")))
        };
        let n = count("states")?;
        let m = count("actions")?;
        let (i, crit) = next_line("criterion")?;
        let criterion = match crit.split_whitespace().collect::<Vec<_>>()[..] {
            ["criterion", "average"] => Criterion::Average,
            ["criterion", "discounted", g] => Criterion::Discounted(g.parse().map_err(|_| bad(i, "bad discount"))?),
            _ => return Err(bad(i, "bad criterion")),
        };
        let mut rewards = vec![0.0; n * m];
        let mut transitions = vec![0.0; n * m * n];
        for (i, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let idx = |k: usize, limit: usize| -> Result<usize> {
                parts
                    .get(k)
                    .and_then(|t| t.parse::<usize>().ok())
                    .filter(|&v| v < limit)
                    .ok_or_else(|| bad(i, "index missing or out of range"))
            };
            let val = |k: usize| -> Result<f64> {
                parts
                    .get(k)
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| bad(i, "bad number"))
            };
            match parts.first() {
                Some(&"r") if parts.len() == 4 => {
                    rewards[idx(1, n)? * m + idx(2, m)?] = val(3)?;
                }
                Some(&"p") if parts.len() == 5 => {
                    transitions[(idx(1, n)? * m + idx(2, m)?) * n + idx(3, n)?] = val(4)?;
                }
                _ => return Err(bad(i, "unrecognized record")),
            }
        }
        SmallMdp::new(n, m, transitions, rewards, criterion)
    }
}
