//! CSV output helpers and the printf-`%.17g`-style float formatter used by
//! every file this crate writes.

use ndarray::{Array2, ArrayView2};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Format a double the way C's `printf("%.17g", x)` does: 17 significant
/// digits, fixed or scientific by exponent range, trailing zeros stripped.
/// 17 digits guarantee exact round-trips through `str::parse::<f64>()`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf".into() } else { "inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let neg = x < 0.0;
    let s = format!("{:.16e}", x.abs());
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 17);

    let body = if exp < -4 || exp >= 17 {
        let trimmed = digits.trim_end_matches('0');
        let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
        let mant = if trimmed.len() == 1 {
            trimmed.to_string()
        } else {
            format!("{}.{}", &trimmed[..1], &trimmed[1..])
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else if exp >= 0 {
        let point = (exp + 1) as usize;
        let int_part = &digits[..point];
        let frac = digits[point..].trim_end_matches('0');
        if frac.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = format!("{zeros}{digits}");
        let frac = frac.trim_end_matches('0');
        format!("0.{frac}")
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Write a dense matrix as plain comma-separated rows at full precision.
pub fn write_matrix_csv<W: Write>(mut w: W, m: ArrayView2<'_, f64>) -> Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| fmt_g17(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Read a dense matrix written by [`write_matrix_csv`], with line/field
/// positions in every parse diagnostic.
pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (li, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (fi, tok) in line.split(',').enumerate() {
            let v: f64 = tok.trim().parse().map_err(|e: std::num::ParseFloatError| Error::Csv {
                line: li + 1,
                field: fi + 1,
                message: e.to_string(),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Csv {
                    line: li + 1,
                    field: row.len(),
                    message: format!(
                        "row has {} fields, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            line: 1,
            field: 1,
            message: "empty matrix file".into(),
        });
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nr, nc), flat).map_err(|e| Error::Internal(e.to_string()))
}
