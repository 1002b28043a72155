//! Text formats: 17-significant-digit floats, `key = value` records and
//! two-column CSV.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Decimal scientific notation with 17 significant digits; parses back to
/// the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .map_err(|_| Error::Parse(format!("'{t}' is not a number")))
}

/// Comma-separated floats; an empty string is an empty list.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

/// Parses `key = value` lines. `#` starts a comment, blank lines are
/// skipped, and a repeated key is an error.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", lineno + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

/// Writes rows as CSV with the given header. Every value uses [`fmt_f64`]
/// and lines end in `\n`.
pub fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Reads a numeric CSV with a header line, returning the header and rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = parse_f64_list(line)
            .map_err(|e| Error::Parse(format!("data row {}: {e}", i + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "data row {} has {} fields, header has {}",
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn float_text_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back = parse_f64(&fmt_f64(x)).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_f64(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# header\na = 1\n\n b=two # trailing\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two");
        assert!(parse_key_values("a = 1\na = 2").is_err());
        assert!(parse_key_values("novalue").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let text = write_csv(&["x_r", "x_s"], vec![vec![0.1, 0.2], vec![-1.5, 3.0]]);
        assert!(text.starts_with("x_r,x_s\n"));
        let (h, rows) = read_csv(&text).unwrap();
        assert_eq!(h, vec!["x_r", "x_s"]);
        assert_eq!(rows, vec![vec![0.1, 0.2], vec![-1.5, 3.0]]);
        assert!(read_csv("a,b\n1,2,3\n").is_err());
        assert!(read_csv("a,b\n1,x\n").is_err());
    }
}
