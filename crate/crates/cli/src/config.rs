//! Sweep configuration: flat `key = value` lines, `#` comments, comma lists.
//!
//! ```text
//! # scaling curve
//! family = c1
//! alpha = 0.2
//! two_beta2 = 0.5
//! state = heisenberg-cap
//! n = 1, 10, 100
//! ```
//!
//! `n` has no default, so a file without it describes an empty grid.

use std::fmt;

use dephimetry::Family;

use crate::setup::{parse_family, Point, StateKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub family: Vec<Family>,
    pub state: Vec<StateKind>,
    pub n: Vec<usize>,
    pub alpha: Vec<f64>,
    pub two_beta2: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            family: vec![Family::C1],
            state: vec![StateKind::HeisenbergCap],
            n: Vec::new(),
            alpha: vec![0.0],
            two_beta2: vec![0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(str::trim)
        .map(|item| {
            if item.is_empty() {
                Err("empty list item".to_string())
            } else {
                parse(item)
            }
        })
        .collect()
}

fn number<T: std::str::FromStr>(item: &str) -> Result<T, String> {
    item.parse().map_err(|_| format!("invalid number {item:?}"))
}

pub fn parse(text: &str) -> Result<SweepConfig, ParseError> {
    let mut cfg = SweepConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ParseError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got {content:?}")))?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(err(format!("duplicate key {key:?}")));
        }
        match key {
            "family" => cfg.family = list(value, parse_family).map_err(err)?,
            "state" => cfg.state = list(value, str::parse).map_err(err)?,
            "n" => cfg.n = list(value, number).map_err(err)?,
            "alpha" => cfg.alpha = list(value, number).map_err(err)?,
            "two_beta2" => cfg.two_beta2 = list(value, number).map_err(err)?,
            other => {
                return Err(err(format!(
                    "unknown key {other:?} (expected n, alpha, two_beta2, family or state)"
                )))
            }
        }
        seen.push(key.to_string());
    }
    Ok(cfg)
}

impl SweepConfig {
    /// Grid points in family × state × n × alpha × two_beta2 order.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for &family in &self.family {
            for &state in &self.state {
                for &n in &self.n {
                    for &alpha in &self.alpha {
                        for &two_beta2 in &self.two_beta2 {
                            out.push(Point {
                                family,
                                state,
                                n,
                                alpha,
                                two_beta2,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
