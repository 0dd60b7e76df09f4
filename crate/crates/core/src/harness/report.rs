use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{mean, sem, std_dev};
use super::{HarnessError, RunRecord};

/// One performance checkpoint of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: String,
    pub seed: u64,
    pub student_type: usize,
    pub episode: u64,
    pub perf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Csv,
    Table,
    Svg,
}

impl FromStr for OutputMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "csv" => Ok(OutputMode::Csv),
            "table" => Ok(OutputMode::Table),
            "svg" | "svg-lines" => Ok(OutputMode::Svg),
            other => Err(HarnessError::InvalidConfig(format!(
                "output mode `{other}`"
            ))),
        }
    }
}

fn rows_of(records: &[RunRecord]) -> impl Iterator<Item = ResultRow> + '_ {
    records.iter().flat_map(|r| {
        r.perf_curve.iter().map(move |&(episode, perf)| ResultRow {
            condition: r.condition.to_string(),
            seed: r.seed,
            student_type: r.student_type,
            episode,
            perf,
        })
    })
}

/// Long-format results: `condition,seed,student_type,episode,perf`.
pub fn write_results<W: Write>(out: W, records: &[RunRecord]) -> Result<(), HarnessError> {
    write_rows(out, rows_of(records))
}

fn write_rows<W: Write>(
    out: W,
    rows: impl IntoIterator<Item = ResultRow>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    condition: String,
    seed: u64,
    student_type: usize,
    final_perf: f64,
    j_s: f64,
    selected: Option<usize>,
    curriculum_len: usize,
    pretrain_uniform_fraction: Option<f64>,
    in_support_fraction: Option<f64>,
    emancipation_episode: Option<u64>,
}

/// One row per run with the final performance and sampling diagnostics.
pub fn write_summary<W: Write>(out: W, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let d = &r.diagnostics;
        w.serialize(SummaryRow {
            condition: r.condition.to_string(),
            seed: r.seed,
            student_type: r.student_type,
            final_perf: r.final_perf,
            j_s: r.j_s,
            selected: d.selected,
            curriculum_len: d.curriculum_len,
            pretrain_uniform_fraction: d.pretrain_uniform_fraction,
            in_support_fraction: d.in_support_fraction,
            emancipation_episode: d.emancipation_episode,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rows = Vec::new();
    for (i, row) in csv::Reader::from_reader(input).deserialize().enumerate() {
        rows.push(row.map_err(|e: csv::Error| HarnessError::Malformed {
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Performance at each run's last checkpoint, grouped by condition and
/// ordered by seed.
pub fn final_performances(rows: &[ResultRow]) -> BTreeMap<String, Vec<f64>> {
    let mut last: BTreeMap<(&str, u64), (u64, f64)> = BTreeMap::new();
    for r in rows {
        let e = last
            .entry((&r.condition, r.seed))
            .or_insert((r.episode, r.perf));
        if r.episode >= e.0 {
            *e = (r.episode, r.perf);
        }
    }
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((cond, _), (_, perf)) in last {
        out.entry(cond.to_string()).or_default().push(perf);
    }
    out
}

/// Mean ± standard deviation of final performance per condition, best first.
pub fn render_table(rows: &[ResultRow]) -> String {
    let finals = final_performances(rows);
    let mut lines: Vec<(String, f64, f64, usize)> = finals
        .into_iter()
        .map(|(c, v)| (c, mean(&v), std_dev(&v), v.len()))
        .collect();
    lines.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let width = lines.iter().map(|l| l.0.len()).max().unwrap_or(0).max(9);
    let mut s = format!(
        "{:<width$}  {:>16}  {:>5}\n",
        "condition", "final perf", "n"
    );
    for (c, m, sd, n) in lines {
        let cell = format!("{m:.1} ± {sd:.1}");
        let _ = writeln!(s, "{c:<width$}  {cell:>16}  {n:>5}");
    }
    s
}

const PALETTE: [&str; 11] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#000000",
];

/// Mean performance curves with standard-error bands, one per condition.
pub fn render_svg(rows: &[ResultRow]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (60.0, 170.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_ep = rows.iter().map(|r| r.episode).max().unwrap_or(1).max(1) as f64;
    let x = |e: f64| left + pw * e / max_ep;
    let y = |p: f64| top + ph * (1.0 - p.clamp(0.0, 100.0) / 100.0);

    let mut curves: BTreeMap<&str, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        curves
            .entry(&r.condition)
            .or_default()
            .entry(r.episode)
            .or_default()
            .push(r.perf);
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for i in 0..=5 {
        let p = i as f64 * 20.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.1}" x2="{x2:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{tx:.1}" y="{ty:.1}" text-anchor="end">{p}</text>"##,
            yy = y(p),
            x2 = left + pw,
            tx = left - 6.0,
            ty = y(p) + 4.0
        );
        let e = max_ep * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{tx:.1}" y="{ty:.1}" text-anchor="middle">{label}</text>"#,
            tx = x(e),
            ty = top + ph + 18.0,
            label = format_episode(e)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{cx:.1}" y="{cy:.1}" text-anchor="middle">episodes</text>"#,
        cx = left + pw / 2.0,
        cy = h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {cy:.1}) rotate(-90)" text-anchor="middle">performance (% unlocked)</text>"#,
        cy = top + ph / 2.0
    );

    for (i, (cond, points)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stats: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|(&e, v)| (e as f64, mean(v), sem(v)))
            .collect();
        let upper = stats
            .iter()
            .map(|&(e, m, se)| format!("{:.1},{:.1}", x(e), y(m + se)));
        let lower = stats
            .iter()
            .rev()
            .map(|&(e, m, se)| format!("{:.1},{:.1}", x(e), y(m - se)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = stats
            .iter()
            .map(|&(e, m, _)| format!("{:.1},{:.1}", x(e), y(m)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{lx2}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{tx}" y="{ty}">{cond}</text>"#,
            lx2 = lx + 20.0,
            tx = lx + 26.0,
            ty = ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_episode(e: f64) -> String {
    if e >= 1000.0 {
        format!("{}k", (e / 1000.0).round())
    } else {
        format!("{}", e.round())
    }
}

/// Renders merged results in the requested mode.
pub fn emit_outputs(rows: &[ResultRow], mode: OutputMode) -> Result<String, HarnessError> {
    match mode {
        OutputMode::Csv => {
            let mut sorted = rows.to_vec();
            sorted.sort_by(|a, b| {
                (&a.condition, a.seed, a.episode).cmp(&(&b.condition, b.seed, b.episode))
            });
            let mut buf = Vec::new();
            write_rows(&mut buf, sorted)?;
            Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
        }
        OutputMode::Table => Ok(render_table(rows)),
        OutputMode::Svg => Ok(render_svg(rows)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: &str, seed: u64, episode: u64, perf: f64) -> ResultRow {
        ResultRow {
            condition: c.into(),
            seed,
            student_type: 0,
            episode,
            perf,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("random", 1, 2000, 3.5), row("again_r", 2, 4000, 99.25)];
        let mut buf = Vec::new();
        write_rows(&mut buf, rows.clone()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("condition,seed,student_type,episode,perf\n"));
        assert_eq!(read_results(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn finals_take_last_checkpoint() {
        let rows = vec![
            row("a", 1, 4000, 20.0),
            row("a", 1, 2000, 10.0),
            row("a", 2, 4000, 30.0),
            row("b", 1, 4000, 5.0),
        ];
        let f = final_performances(&rows);
        assert_eq!(f["a"], vec![20.0, 30.0]);
        assert_eq!(f["b"], vec![5.0]);
    }

    #[test]
    fn table_lists_every_condition() {
        let rows = vec![
            row("a", 1, 10, 20.0),
            row("a", 2, 10, 40.0),
            row("b", 1, 10, 5.0),
        ];
        let t = render_table(&rows);
        assert!(t.contains("30.0 ± 14.1"));
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(1).unwrap().starts_with('a'));
    }

    #[test]
    fn svg_has_one_curve_per_condition() {
        let rows = vec![
            row("a", 1, 2000, 20.0),
            row("a", 1, 4000, 40.0),
            row("b", 1, 4000, 5.0),
        ];
        let svg = render_svg(&rows);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">4k<"));
    }
}
