//! File emission: the record CSV schema, JSON arrays, and a single-panel
//! SVG line plot of a sweep table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{HarnessError, RunRecord, SweepRow, SweepTable};

pub const CSV_HEADER: &str = "algo,n,d,s,delta,epsilon,rep,seed,queries,correct,wall_time_ms";

fn require_non_empty<T>(items: &[T]) -> Result<(), HarnessError> {
    if items.is_empty() {
        Err(HarnessError::Config(
            "refusing to emit an empty dataset".into(),
        ))
    } else {
        Ok(())
    }
}

/// Renders records in the fixed CSV schema. Everything except
/// `wall_time_ms` is deterministic given the run seed.
pub fn records_csv_string(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algo, r.n, r.d, r.s, r.delta, r.epsilon, r.rep, r.seed, r.queries, r.correct,
            r.wall_time_ms
        )
        .expect("string write");
    }
    out
}

pub fn emit_records_csv(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    require_non_empty(records)?;
    fs::write(path, records_csv_string(records))?;
    Ok(())
}

pub fn emit_records_json(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    require_non_empty(records)?;
    let text = serde_json::to_string_pretty(records).expect("records serialize");
    fs::write(path, text)?;
    Ok(())
}

/// Aggregate table as CSV: `axis,algo,mean_queries,reps,correct`.
pub fn table_csv_string(table: &SweepTable) -> String {
    let mut out = format!("{},algo,mean_queries,reps,correct\n", table.axis_label);
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.axis, row.algo, row.mean_queries, row.reps, row.correct
        )
        .expect("string write");
    }
    out
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 45.0;
const SERIES_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

/// Writes a line plot of mean queries against the sweep axis: one polyline
/// per algorithm, log-scaled y axis.
pub fn emit_table_svg(table: &SweepTable, path: &Path) -> Result<(), HarnessError> {
    require_non_empty(&table.rows)?;
    fs::write(path, table_svg_string(table))?;
    Ok(())
}

fn table_svg_string(table: &SweepTable) -> String {
    let mut algos: Vec<_> = table.rows.iter().map(|r| r.algo).collect();
    algos.dedup();
    algos.sort();
    algos.dedup();

    let xs: Vec<f64> = table.rows.iter().map(|r| r.axis).collect();
    let (xmin, xmax) = bounds(&xs);
    let ys: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.mean_queries.max(1.0).log10())
        .collect();
    let (mut ymin, mut ymax) = bounds(&ys);
    ymin = ymin.floor();
    ymax = ymax.ceil().max(ymin + 1.0);

    let x_of = |x: f64| {
        if xmax > xmin {
            MARGIN_L + (x - xmin) / (xmax - xmin) * (PLOT_W - MARGIN_L - MARGIN_R)
        } else {
            (MARGIN_L + PLOT_W - MARGIN_R) / 2.0
        }
    };
    let y_of = |logy: f64| PLOT_H - MARGIN_B - (logy - ymin) / (ymax - ymin) * (PLOT_H - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{PLOT_W}" height="{PLOT_H}" fill="white"/>"#
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = MARGIN_L,
        r = PLOT_W - MARGIN_R,
        t = MARGIN_T,
        b = PLOT_H - MARGIN_B,
    );
    // Log-scale y ticks at integer decades.
    let mut decade = ymin;
    while decade <= ymax + 1e-9 {
        let y = y_of(decade);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#cccccc"/><text x="{tx}" y="{ty:.2}" font-size="11" text-anchor="end">1e{decade:.0}</text>"##,
            x0 = MARGIN_L,
            x1 = PLOT_W - MARGIN_R,
            tx = MARGIN_L - 6.0,
            ty = y + 4.0,
        );
        decade += 1.0;
    }
    // X ticks at the observed axis values.
    let mut seen_x: Vec<f64> = xs.clone();
    seen_x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seen_x.dedup();
    for &x in &seen_x {
        let px = x_of(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{ty}" font-size="11" text-anchor="middle">{x}</text>"#,
            b = PLOT_H - MARGIN_B,
            b2 = PLOT_H - MARGIN_B + 5.0,
            ty = PLOT_H - MARGIN_B + 18.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{cx}" y="{cy}" font-size="12" text-anchor="middle">{label}</text>"#,
        cx = (MARGIN_L + PLOT_W - MARGIN_R) / 2.0,
        cy = PLOT_H - 8.0,
        label = table.axis_label,
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{cy}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {cy})">mean queries</text>"#,
        cy = (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
    );

    for (idx, algo) in algos.iter().enumerate() {
        let mut series: Vec<&SweepRow> = table.rows.iter().filter(|r| r.algo == *algo).collect();
        series.sort_by(|a, b| a.axis.partial_cmp(&b.axis).unwrap());
        let points: Vec<String> = series
            .iter()
            .map(|r| {
                format!(
                    "{:.2},{:.2}",
                    x_of(r.axis),
                    y_of(r.mean_queries.max(1.0).log10())
                )
            })
            .collect();
        let color = SERIES_COLORS[idx % SERIES_COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{algo}</text>"#,
            x = PLOT_W - MARGIN_R - 60.0,
            y = MARGIN_T + 16.0 * (idx as f64 + 1.0),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(xs: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        min = min.min(x);
        max = max.max(x);
    }
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::AlgoId;

    fn record(rep: u32) -> RunRecord {
        RunRecord {
            algo: AlgoId::Paper,
            n: 2,
            d: 10,
            s: 3,
            delta: 0.1,
            epsilon: 0.0,
            rep,
            seed: 99,
            queries: 1234,
            correct: true,
            wall_time_ms: 5,
        }
    }

    #[test]
    fn csv_single_record_is_two_lines() {
        let text = records_csv_string(&[record(0)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "paper,2,10,3,0.1,0,0,99,1234,true,5");
    }

    #[test]
    fn empty_emission_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(emit_records_csv(&[], &path).is_err());
        assert!(!path.exists());
        let table = SweepTable {
            axis_label: "s/d".into(),
            rows: vec![],
        };
        assert!(emit_table_svg(&table, &dir.path().join("out.svg")).is_err());
    }

    #[test]
    fn json_roundtrips_field_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        emit_records_json(&[record(0), record(1)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 2);
        assert_eq!(parsed[0]["algo"], "paper");
        assert_eq!(parsed[1]["rep"], 1);
    }

    #[test]
    fn svg_has_one_polyline_per_algorithm() {
        let rows: Vec<SweepRow> = (1..=5)
            .flat_map(|s| {
                [AlgoId::Paper, AlgoId::Borda].map(|algo| SweepRow {
                    axis: s as f64 / 5.0,
                    algo,
                    mean_queries: 1000.0 * s as f64,
                    reps: 20,
                    correct: 20,
                })
            })
            .collect();
        let table = SweepTable {
            axis_label: "s/d".into(),
            rows,
        };
        let svg = table_svg_string(&table);
        assert_eq!(svg.matches("<polyline").count(), 2);
        // Five points per polyline.
        for line in svg.lines().filter(|l| l.contains("<polyline")) {
            let pts = line.split("points=\"").nth(1).unwrap();
            let pts = pts.split('"').next().unwrap();
            assert_eq!(pts.split(' ').count(), 5);
        }
        assert!(svg.contains("1e3"));
    }
}
