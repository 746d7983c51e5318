use serde::{Deserialize, Serialize};

use crate::approx::ApproxReport;
use crate::error::Result;
use crate::network::Network;

/// Columns of the per-edge results table.
pub const RESULT_COLUMNS: [&str; 10] = [
    "edge", "tail", "head", "K", "f_lin", "f_approx", "f_rp", "loading", "bound", "xi",
];

/// One edge of a solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub edge: usize,
    pub tail: usize,
    pub head: usize,
    pub coupling: f64,
    pub f_lin: f64,
    pub f_approx: f64,
    pub f_rp: f64,
    /// `|f_rp| / K`.
    pub loading: f64,
    /// Per-line bound on `|f_rp - f_lin|`.
    pub bound: f64,
    /// `f_rp - f_lin`.
    pub xi: f64,
}

pub fn records_from_report(net: &Network, report: &ApproxReport) -> Vec<ResultRecord> {
    net.edges()
        .iter()
        .enumerate()
        .map(|(i, e)| ResultRecord {
            edge: i,
            tail: e.tail,
            head: e.head,
            coupling: e.coupling,
            f_lin: report.f_lin[i],
            f_approx: report.f_approx[i],
            f_rp: report.f_rp[i],
            loading: report.f_rp[i].abs() / e.coupling,
            bound: report.per_line[i],
            xi: report.f_rp[i] - report.f_lin[i],
        })
        .collect()
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with `# key=value` comment lines, a header row and data rows.
pub fn write_csv<I>(metadata: &[(String, String)], header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write_results_csv(
    metadata: &[(String, String)],
    records: &[ResultRecord],
) -> Result<String> {
    write_csv(
        metadata,
        &RESULT_COLUMNS,
        records.iter().map(|r| {
            let mut row = vec![r.edge.to_string(), r.tail.to_string(), r.head.to_string()];
            row.extend(
                [
                    r.coupling, r.f_lin, r.f_approx, r.f_rp, r.loading, r.bound, r.xi,
                ]
                .into_iter()
                .map(format_float),
            );
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only() {
        let text = write_results_csv(&[], &[]).unwrap();
        assert_eq!(text, format!("{}\n", RESULT_COLUMNS.join(",")));
    }

    #[test]
    fn one_row() {
        let r = ResultRecord {
            edge: 0,
            tail: 0,
            head: 1,
            coupling: 10.0,
            f_lin: 0.5,
            f_approx: 0.5,
            f_rp: 0.5,
            loading: 0.05,
            bound: 0.0,
            xi: 0.0,
        };
        let meta = vec![("seed".to_string(), "7".to_string())];
        let text = write_results_csv(&meta, &[r]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=7");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("0,0,1,1.0000000000000000e1,5.0000000000000000e-1,"));
        let loading: f64 = lines[2].split(',').nth(7).unwrap().parse().unwrap();
        assert_eq!(loading, 0.05);
    }

    #[test]
    fn floats_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, 6.02e23] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
        assert!(!format_float(1234.5).contains(' '));
    }
}
