//! Text formats for games and strategies.
//!
//! Game file: line 1 holds n; the next n lines hold n whitespace-separated
//! decimals each. Strategy file: one line of n decimals. Values are written
//! with the shortest representation that parses back to the same double, so
//! write/read round-trips are exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::game::{Game, Strategy};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Strategy files must sum to 1 within this window before renormalization.
pub const STRATEGY_SUM_TOL: f64 = 1e-9;

fn parse_err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

/// Numbered non-blank lines (1-based as they appear in the file).
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

pub fn parse_game(text: &str) -> Result<Game> {
    let lines = content_lines(text);
    let Some(&(header_line, header)) = lines.first() else {
        return Err(parse_err(1, 1, "empty game file"));
    };
    let n: usize = header
        .parse()
        .map_err(|_| parse_err(header_line, 1, format!("expected dimension, got {header:?}")))?;
    if n == 0 {
        return Err(parse_err(header_line, 1, "dimension must be at least 1"));
    }
    let rows = &lines[1..];
    if rows.len() != n {
        return Err(parse_err(
            rows.last().map(|&(l, _)| l).unwrap_or(header_line),
            1,
            format!("expected {n} payoff rows, found {}", rows.len()),
        ));
    }
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (row_idx, &(line_no, line)) in rows.iter().enumerate() {
        let mut row = Vec::with_capacity(n);
        for (col_idx, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(line_no, col_idx + 1, format!("invalid number {tok:?}"))
            })?;
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(parse_err(
                    line_no,
                    col_idx + 1,
                    format!("payoff {v} outside (0, 1]"),
                ));
            }
            row.push(v);
        }
        if row.len() != n {
            return Err(parse_err(
                line_no,
                row.len().min(n),
                format!("row {} has {} entries, expected {n}", row_idx + 1, row.len()),
            ));
        }
        data.push(row);
    }
    Game::new(Matrix::from_rows(&data)?)
}

pub fn read_game(path: impl AsRef<Path>) -> Result<Game> {
    parse_game(&std::fs::read_to_string(path)?)
}

pub fn game_to_string(g: &Game) -> String {
    let mut out = String::new();
    let n = g.n();
    let _ = writeln!(out, "{n}");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{}", g.c().get(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_game(g: &Game, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, game_to_string(g))?;
    Ok(())
}

pub fn parse_strategy(text: &str) -> Result<Strategy> {
    let lines = content_lines(text);
    let Some(&(line_no, line)) = lines.first() else {
        return Err(parse_err(1, 1, "empty strategy file"));
    };
    if lines.len() > 1 {
        return Err(parse_err(
            lines[1].0,
            1,
            "strategy file must hold a single line",
        ));
    }
    let mut x = Vec::new();
    for (col_idx, tok) in line.split_whitespace().enumerate() {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(line_no, col_idx + 1, format!("invalid number {tok:?}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(parse_err(
                line_no,
                col_idx + 1,
                format!("strategy mass {v} must be finite and nonnegative"),
            ));
        }
        x.push(v);
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > STRATEGY_SUM_TOL {
        return Err(parse_err(
            line_no,
            1,
            format!("strategy mass sums to {sum}, outside 1 ± {STRATEGY_SUM_TOL:e}"),
        ));
    }
    Strategy::new(x)
}

pub fn read_strategy(path: impl AsRef<Path>) -> Result<Strategy> {
    parse_strategy(&std::fs::read_to_string(path)?)
}

pub fn strategy_to_string(s: &Strategy) -> String {
    let parts: Vec<String> = s.coords().iter().map(|v| format!("{v}")).collect();
    format!("{}\n", parts.join(" "))
}
