//! The frozen result-row CSV schema.
//!
//! Header is exactly `source,alpha,beta,omega,value,stderr`; the collapse
//! variant appends `,subtracted,norm1,norm2`. Queue indices are 1-based.
//! Floats print with 17 significant digits so parsing them back is lossless,
//! and rows sort by (source, alpha, beta, omega).

use crate::error::CliError;

pub const HEADER: &str = "source,alpha,beta,omega,value,stderr";
pub const COLLAPSE_HEADER: &str = "source,alpha,beta,omega,value,stderr,subtracted,norm1,norm2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Oracle,
    Sim,
    Theory0,
    Theory1,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Oracle => "oracle",
            Source::Sim => "sim",
            Source::Theory0 => "theory0",
            Source::Theory1 => "theory1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle" => Some(Source::Oracle),
            "sim" => Some(Source::Sim),
            "theory0" => Some(Source::Theory0),
            "theory1" => Some(Source::Theory1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub source: Source,
    /// 1-based queue indices.
    pub alpha: usize,
    pub beta: usize,
    pub omega: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Extra columns emitted by `collapse`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseCols {
    /// `value - rho_a rho_b / omega`.
    pub subtracted: f64,
    /// Subtracted value over the coupling `deltaL[beta -> alpha]`; empty
    /// when the coupling is zero.
    pub norm1: Option<f64>,
    /// Subtracted value over the first-order coefficient; empty when the
    /// coupling is zero.
    pub norm2: Option<f64>,
}

/// 17 significant digits: enough for a lossless f64 round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.source, a.alpha, a.beta)
            .cmp(&(b.source, b.alpha, b.beta))
            .then(a.omega.total_cmp(&b.omega))
    });
}

pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.source.as_str(),
            r.alpha,
            r.beta,
            fmt_float(r.omega),
            fmt_float(r.value),
            fmt_opt(r.stderr),
        ));
    }
    out
}

pub fn write_collapse_csv(rows: &[(ResultRow, CollapseCols)]) -> String {
    let mut out = String::from(COLLAPSE_HEADER);
    out.push('\n');
    for (r, c) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.source.as_str(),
            r.alpha,
            r.beta,
            fmt_float(r.omega),
            fmt_float(r.value),
            fmt_opt(r.stderr),
            fmt_float(c.subtracted),
            fmt_opt(c.norm1),
            fmt_opt(c.norm2),
        ));
    }
    out
}

/// Parse a result CSV; the collapse columns, if present, are ignored.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, CliError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CliError::Csv {
        line: 1,
        message: "empty file".into(),
    })?;
    if header != HEADER && header != COLLAPSE_HEADER {
        return Err(CliError::Csv {
            line: 1,
            message: format!("unexpected header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 6 {
            return Err(CliError::Csv {
                line: line_no,
                message: format!("{} fields, expected at least 6", fields.len()),
            });
        }
        let bad = |message: String| CliError::Csv { line: line_no, message };
        let source = Source::parse(fields[0])
            .ok_or_else(|| bad(format!("unknown source `{}`", fields[0])))?;
        let alpha: usize =
            fields[1].parse().map_err(|_| bad(format!("bad alpha `{}`", fields[1])))?;
        let beta: usize =
            fields[2].parse().map_err(|_| bad(format!("bad beta `{}`", fields[2])))?;
        let omega: f64 =
            fields[3].parse().map_err(|_| bad(format!("bad omega `{}`", fields[3])))?;
        let value: f64 =
            fields[4].parse().map_err(|_| bad(format!("bad value `{}`", fields[4])))?;
        let stderr = if fields[5].is_empty() {
            None
        } else {
            Some(fields[5].parse().map_err(|_| bad(format!("bad stderr `{}`", fields[5])))?)
        };
        rows.push(ResultRow { source, alpha, beta, omega, value, stderr });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut rows = vec![
            ResultRow {
                source: Source::Sim,
                alpha: 2,
                beta: 1,
                omega: 0.1 + 1e-17,
                value: 1.0 / 3.0,
                stderr: Some(0.2e-3),
            },
            ResultRow {
                source: Source::Theory0,
                alpha: 1,
                beta: 1,
                omega: 7.25,
                value: -1.2345678901234567e-8,
                stderr: None,
            },
        ];
        sort_rows(&mut rows);
        let text = write_csv(&rows);
        let back = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.source, b.source);
            assert_eq!(a.omega.to_bits(), b.omega.to_bits());
            assert_eq!(a.value.to_bits(), b.value.to_bits());
            assert_eq!(a.stderr.map(f64::to_bits), b.stderr.map(f64::to_bits));
        }
    }

    #[test]
    fn sorting_is_by_source_pair_omega() {
        let mut rows = vec![
            row(Source::Theory1, 1, 2, 1.0),
            row(Source::Oracle, 2, 1, 0.1),
            row(Source::Oracle, 1, 2, 2.0),
            row(Source::Oracle, 1, 2, 0.5),
        ];
        sort_rows(&mut rows);
        assert_eq!(rows[0].omega, 0.5);
        assert_eq!(rows[1].omega, 2.0);
        assert_eq!((rows[2].alpha, rows[2].beta), (2, 1));
        assert_eq!(rows[3].source, Source::Theory1);
    }

    fn row(source: Source, alpha: usize, beta: usize, omega: f64) -> ResultRow {
        ResultRow { source, alpha, beta, omega, value: 0.0, stderr: None }
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(parse_csv("a,b,c\n").is_err());
    }
}
