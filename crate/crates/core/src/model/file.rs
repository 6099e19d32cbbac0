//! Plain-text system description files.
//!
//! ```text
//! # logistic growth
//! name = logistic
//! dim = 1
//! A.1 =
//!   -5
//! D =
//!   5
//! g.const = 0
//! g.cos = 1 0.7 1 0     # component amplitude omega phase, repeatable
//! y0 = 0.1
//! T = 2
//! n = 1000
//! ```
//!
//! Matrix blocks (`A.i`, `D`) take `dim` rows on the following lines; a
//! first row may also be written inline after the `=`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Forcing, IvpSpec, QuadraticSystem, Sinusoid};
use crate::error::{Error, Result};

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_numbers(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(syntax(line, format!("non-finite number `{t}`"))),
            Err(_) => Err(syntax(line, format!("cannot parse `{t}` as a number"))),
        })
        .collect()
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

pub fn parse_system_file(text: &str) -> Result<IvpSpec> {
    let lines: Vec<Line> = text
        .lines()
        .enumerate()
        .map(|(i, raw)| Line {
            number: i + 1,
            text: raw.split('#').next().unwrap_or("").trim(),
        })
        .filter(|l| !l.text.is_empty())
        .collect();

    let mut name = String::from("custom");
    let mut dim: Option<usize> = None;
    let mut scalars: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    let mut matrices: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cos_terms = Vec::new();

    let mut idx = 0;
    while idx < lines.len() {
        let line = &lines[idx];
        idx += 1;
        let (key, value) = line
            .text
            .split_once('=')
            .ok_or_else(|| syntax(line.number, format!("expected `key = value`, found `{}`", line.text)))?;
        let key = key.trim();
        let value = value.trim();

        let is_matrix = key == "D" || key.starts_with("A.");
        if is_matrix {
            let d = dim.ok_or_else(|| syntax(line.number, "`dim` must precede matrix blocks"))?;
            if key.starts_with("A.") {
                match key[2..].parse::<usize>() {
                    Ok(i) if (1..=d).contains(&i) => {}
                    _ => return Err(syntax(line.number, format!("bad slice name `{key}`"))),
                }
            }
            if matrices.contains_key(key) {
                return Err(syntax(line.number, format!("duplicate `{key}`")));
            }
            let mut rows: Vec<Vec<f64>> = Vec::new();
            if !value.is_empty() {
                rows.push(parse_numbers(value, line.number)?);
            }
            while rows.len() < d {
                match lines.get(idx) {
                    Some(next) if !next.text.contains('=') => {
                        rows.push(parse_numbers(next.text, next.number)?);
                        idx += 1;
                    }
                    _ => {
                        return Err(Error::invalid(format!(
                            "`{key}` has {} rows, expected {d}",
                            rows.len()
                        )))
                    }
                }
            }
            if let Some(bad) = rows.iter().find(|r| r.len() != d) {
                return Err(Error::invalid(format!(
                    "`{key}` row has {} entries, expected {d}",
                    bad.len()
                )));
            }
            matrices.insert(key.to_string(), rows.concat());
            continue;
        }

        match key {
            "name" => name = value.to_string(),
            "dim" => {
                let d: usize = value
                    .parse()
                    .map_err(|_| syntax(line.number, format!("bad dimension `{value}`")))?;
                if dim.replace(d).is_some() {
                    return Err(syntax(line.number, "duplicate `dim`"));
                }
            }
            "g.cos" => {
                let v = parse_numbers(value, line.number)?;
                if v.len() != 4 {
                    return Err(syntax(
                        line.number,
                        "g.cos expects `component amplitude omega phase`",
                    ));
                }
                if v[0] < 1.0 || v[0].fract() != 0.0 {
                    return Err(syntax(line.number, "g.cos component must be a positive integer"));
                }
                cos_terms.push(Sinusoid {
                    component: v[0] as usize - 1,
                    amplitude: v[1],
                    omega: v[2],
                    phase: v[3],
                });
            }
            "g.const" | "y0" | "T" | "n" => {
                let v = parse_numbers(value, line.number)?;
                if scalars.insert(key.to_string(), (line.number, v)).is_some() {
                    return Err(syntax(line.number, format!("duplicate `{key}`")));
                }
            }
            other => return Err(syntax(line.number, format!("unknown key `{other}`"))),
        }
    }

    let d = dim.ok_or_else(|| syntax(0, "missing `dim`"))?;
    let take = |key: &str| -> Result<(usize, Vec<f64>)> {
        scalars
            .get(key)
            .cloned()
            .ok_or_else(|| syntax(0, format!("missing `{key}`")))
    };
    let single = |key: &str| -> Result<f64> {
        let (line, v) = take(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(syntax(line, format!("`{key}` expects one value"))),
        }
    };
    let vector = |key: &str| -> Result<Vec<f64>> {
        let (_, v) = take(key)?;
        if v.len() != d {
            return Err(Error::invalid(format!("`{key}` has {} values, expected {d}", v.len())));
        }
        Ok(v)
    };

    let slices = (1..=d)
        .map(|i| {
            matrices
                .get(&format!("A.{i}"))
                .cloned()
                .ok_or_else(|| syntax(0, format!("missing `A.{i}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let d_mat = matrices.get("D").cloned().ok_or_else(|| syntax(0, "missing `D`"))?;
    let forcing = Forcing {
        constant: vector("g.const")?,
        terms: cos_terms,
    };
    let horizon = single("T")?;
    let n = single("n")?;
    if n < 1.0 || n.fract() != 0.0 {
        return Err(Error::invalid(format!("n must be a positive integer, got {n}")));
    }
    let system = QuadraticSystem::new(name, slices, d_mat, forcing)?;
    IvpSpec::new(system, vector("y0")?, horizon, n as usize)
}

fn push_row(out: &mut String, values: &[f64]) {
    let row: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "  {}", row.join(" "));
}

/// Inverse of [`parse_system_file`]; numbers are written in shortest
/// round-trip form.
pub fn serialize_system(spec: &IvpSpec) -> String {
    let sys = &spec.system;
    let d = sys.dim();
    let mut out = String::new();
    let _ = writeln!(out, "name = {}", sys.name());
    let _ = writeln!(out, "dim = {d}");
    for (i, a) in sys.a_slices().iter().enumerate() {
        let _ = writeln!(out, "A.{} =", i + 1);
        for row in a.rows() {
            push_row(&mut out, &row);
        }
    }
    out.push_str("D =\n");
    for row in sys.linear().chunks(d) {
        push_row(&mut out, row);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "g.const = {}", fmt(&sys.forcing().constant));
    for s in &sys.forcing().terms {
        let _ = writeln!(
            out,
            "g.cos = {} {:?} {:?} {:?}",
            s.component + 1,
            s.amplitude,
            s.omega,
            s.phase
        );
    }
    let _ = writeln!(out, "y0 = {}", fmt(&spec.y0));
    let _ = writeln!(out, "T = {:?}", spec.horizon);
    let _ = writeln!(out, "n = {}", spec.steps);
    out
}
