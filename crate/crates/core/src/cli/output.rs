//! Report formatting.

use std::fmt::Write;

use serde_json::Value;

use crate::cuts::{FeasibilityReport, RateRegion};
use crate::nodes::NodeSet;

/// `x` rounded to 9 significant digits.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

pub struct Report {
    pub text: String,
    pub json: Value,
    pub csv: Option<String>,
    pub exit: i32,
}

pub fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Subsets are quoted in CSV since they contain commas.
fn set_cell(s: NodeSet) -> String {
    format!("\"{s}\"")
}

pub fn feasibility_text(title: &str, r: &FeasibilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{title}: {}", if r.feasible { "feasible" } else { "infeasible" });
    let _ = writeln!(s, "epsilon: {}", sig9(r.epsilon));
    let _ = writeln!(s, "min margin: {}", sig9(r.min_margin()));
    let _ = writeln!(s, "{:<12} {:>14} {:>14} {:>14}  {:<16} ok", "S", "lhs", "rhs", "margin", "binding");
    for c in &r.constraints {
        let binding = c.binding.map(|b| format!("W={} b={}", b.w, b.receiver + 1)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{:<12} {:>14} {:>14} {:>14}  {:<16} {}",
            c.subset.to_string(),
            sig9(c.lhs),
            sig9(c.rhs),
            sig9(c.margin),
            binding,
            if c.satisfied { "yes" } else { "NO" }
        );
    }
    s
}

pub fn feasibility_csv(r: &FeasibilityReport) -> String {
    let rows: Vec<Vec<String>> = r
        .constraints
        .iter()
        .map(|c| {
            vec![
                set_cell(c.subset),
                sig9(c.lhs),
                sig9(c.rhs),
                sig9(c.margin),
                c.binding.map(|b| set_cell(b.w)).unwrap_or_default(),
                c.binding.map(|b| (b.receiver + 1).to_string()).unwrap_or_default(),
                c.satisfied.to_string(),
            ]
        })
        .collect();
    csv_rows(&["subset", "lhs", "rhs", "margin", "binding_w", "binding_receiver", "satisfied"], &rows)
}

pub fn region_text(r: &RateRegion) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>14}  binding", "S", "R_S <");
    for c in &r.constraints {
        let _ = writeln!(s, "{:<12} {:>14}  W={} b={}", c.support.to_string(), sig9(c.rhs), c.binding.w, c.binding.receiver + 1);
    }
    s
}

pub fn region_csv(r: &RateRegion) -> String {
    let rows: Vec<Vec<String>> = r
        .constraints
        .iter()
        .map(|c| vec![set_cell(c.support), sig9(c.rhs), set_cell(c.binding.w), (c.binding.receiver + 1).to_string()])
        .collect();
    csv_rows(&["subset", "rhs", "binding_w", "binding_receiver"], &rows)
}

/// Boundary of `{R_i ≤ a, R_j ≤ b, R_i + R_j ≤ c}` in the nonnegative
/// quadrant, counter-clockwise from the origin.
pub fn pentagon(a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let x_max = a.min(c);
    let y_max = b.min(c);
    let mut pts = vec![(0.0, 0.0), (x_max, 0.0), (x_max, (c - x_max).min(y_max).max(0.0)), ((c - y_max).min(x_max).max(0.0), y_max), (0.0, y_max)];
    pts.dedup();
    pts
}

pub fn kv_csv(pairs: &[(&str, String)]) -> String {
    let rows: Vec<Vec<String>> = pairs.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    csv_rows(&["key", "value"], &rows)
}

pub fn kv_text(pairs: &[(&str, String)]) -> String {
    let w = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    pairs.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits() {
        assert_eq!(sig9(0.5310040371), "0.531004037");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(123456789012.0), "123456789000");
        assert_eq!(sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn pentagon_shapes() {
        assert_eq!(pentagon(1.0, 1.0, 1.5), vec![(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 1.0)]);
        assert_eq!(pentagon(1.0, 2.0, 5.0), vec![(0.0, 0.0), (1.0, 0.0), (1.0, 2.0), (0.0, 2.0)]);
    }
}
