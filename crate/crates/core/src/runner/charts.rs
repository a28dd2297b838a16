//! Static SVG grouped-bar charts.
//!
//! Every bar carries `data-algorithm`, `data-group` and `data-value`
//! attributes so values can be read back out of the file. Input preference
//! ratios are drawn as dashed lines with class `input-pr`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::report::MetricsRow;
use crate::error::{Error, Result};
use crate::metrics::Scope;

const WIDTH_MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const PLOT_HEIGHT: f64 = 240.0;
const MARGIN_BOTTOM: f64 = 48.0;
const BAR_WIDTH: f64 = 22.0;
const CLUSTER_GAP: f64 = 30.0;
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f",
    "#bab0ac",
];

/// Filesystem-safe form of a label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// One cluster of bars: a user group and its per-algorithm values.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub group: String,
    pub input_pr: f64,
    pub values: Vec<Option<f64>>,
}

/// Data for the charts of one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryChart {
    pub category: String,
    pub algorithms: Vec<String>,
    pub pr: Vec<Cluster>,
    pub bd: Vec<Cluster>,
}

#[derive(Default)]
struct Acc {
    input: f64,
    pr: f64,
    n: usize,
    bd: f64,
    n_bd: usize,
}

/// Fold-averaged group and general cells, one entry per category.
pub fn chart_data(rows: &[MetricsRow]) -> Vec<CategoryChart> {
    let mut algorithms: Vec<String> = Vec::new();
    let mut categories: Vec<String> = Vec::new();
    let mut groups: Vec<(Scope, String)> = Vec::new();
    let mut acc: BTreeMap<(String, String, String), Acc> = BTreeMap::new();
    for r in rows {
        if r.scope == Scope::Extreme {
            continue;
        }
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm.clone());
        }
        if !categories.contains(&r.category) {
            categories.push(r.category.clone());
        }
        let g = (r.scope, r.group.clone());
        if !groups.contains(&g) {
            groups.push(g);
        }
        let a = acc
            .entry((r.category.clone(), r.group.clone(), r.algorithm.clone()))
            .or_default();
        a.input += r.pr_input;
        a.pr += r.pr_output;
        a.n += 1;
        if let Some(bd) = r.bias_disparity {
            a.bd += bd;
            a.n_bd += 1;
        }
    }
    // group clusters first, the general population last
    groups.sort_by_key(|(s, _)| *s);

    categories
        .into_iter()
        .map(|category| {
            let mut pr = Vec::new();
            let mut bd = Vec::new();
            for (_, group) in &groups {
                let cells: Vec<Option<&Acc>> = algorithms
                    .iter()
                    .map(|alg| acc.get(&(category.clone(), group.clone(), alg.clone())))
                    .collect();
                let Some(first) = cells.iter().flatten().next() else {
                    continue;
                };
                let input_pr = first.input / first.n as f64;
                pr.push(Cluster {
                    group: group.clone(),
                    input_pr,
                    values: cells.iter().map(|c| c.map(|a| a.pr / a.n as f64)).collect(),
                });
                bd.push(Cluster {
                    group: group.clone(),
                    input_pr,
                    values: cells
                        .iter()
                        .map(|c| c.filter(|a| a.n_bd > 0).map(|a| a.bd / a.n_bd as f64))
                        .collect(),
                });
            }
            CategoryChart {
                category,
                algorithms: algorithms.clone(),
                pr,
                bd,
            }
        })
        .collect()
}

struct Frame {
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        MARGIN_TOP + (self.y_max - v) / (self.y_max - self.y_min) * PLOT_HEIGHT
    }
}

fn cluster_width(n_alg: usize) -> f64 {
    n_alg as f64 * BAR_WIDTH + CLUSTER_GAP
}

/// Vertical position of value `v` in a PR chart.
pub fn pr_chart_y(v: f64) -> f64 {
    Frame { y_min: 0.0, y_max: 1.0 }.y(v)
}

fn render(title: &str, y_label: &str, chart: &CategoryChart, clusters: &[Cluster], frame: &Frame, input_lines: bool) -> String {
    let n_alg = chart.algorithms.len();
    let cw = cluster_width(n_alg);
    let width = WIDTH_MARGIN_LEFT + clusters.len() as f64 * cw + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, esc(title));
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        esc(title)
    );

    // axes and ticks
    let x0 = WIDTH_MARGIN_LEFT;
    let x1 = width - MARGIN_RIGHT;
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{:.2}" stroke="black"/>"#,
        frame.y(frame.y_max),
        frame.y(frame.y_min)
    );
    let zero = frame.y(0.0);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{zero:.2}" x2="{x1:.2}" y2="{zero:.2}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = frame.y_min + (frame.y_max - frame.y_min) * k as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        esc(y_label)
    );

    for (ci, cluster) in clusters.iter().enumerate() {
        let cx = x0 + CLUSTER_GAP / 2.0 + ci as f64 * cw;
        for (ai, value) in cluster.values.iter().enumerate() {
            let Some(v) = value else { continue };
            let bx = cx + ai as f64 * BAR_WIDTH;
            let (top, bottom) = if *v >= 0.0 { (frame.y(*v), zero) } else { (zero, frame.y(*v)) };
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{bx:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" data-algorithm="{}" data-group="{}" data-value="{v}"/>"#,
                BAR_WIDTH - 2.0,
                bottom - top,
                PALETTE[ai % PALETTE.len()],
                esc(&chart.algorithms[ai]),
                esc(&cluster.group)
            );
            let ty = if *v >= 0.0 { top - 3.0 } else { bottom + 10.0 };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{ty:.2}" text-anchor="middle" font-size="8">{v:.3}</text>"#,
                bx + (BAR_WIDTH - 2.0) / 2.0
            );
        }
        if input_lines {
            let y = frame.y(cluster.input_pr);
            let _ = writeln!(
                s,
                r#"<line class="input-pr" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="1.5" stroke-dasharray="6,4" data-group="{}" data-input-pr="{}"/>"#,
                cx - 4.0,
                cx + n_alg as f64 * BAR_WIDTH + 2.0,
                esc(&cluster.group),
                cluster.input_pr
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            cx + n_alg as f64 * BAR_WIDTH / 2.0,
            MARGIN_TOP + PLOT_HEIGHT + 20.0,
            esc(&cluster.group)
        );
    }

    // legend
    for (ai, alg) in chart.algorithms.iter().enumerate() {
        let ly = MARGIN_TOP + ai as f64 * 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{ly:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 + 12.0,
            PALETTE[ai % PALETTE.len()],
            x1 + 26.0,
            ly + 9.0,
            esc(alg)
        );
    }
    if input_lines {
        let ly = MARGIN_TOP + chart.algorithms.len() as f64 * 16.0 + 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="black" stroke-dasharray="6,4"/><text x="{:.2}" y="{:.2}">input PR</text>"#,
            x1 + 10.0,
            x1 + 24.0,
            x1 + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_pr_chart(chart: &CategoryChart) -> String {
    render(
        &format!("Output preference ratio for {}", chart.category),
        "preference ratio",
        chart,
        &chart.pr,
        &Frame { y_min: 0.0, y_max: 1.0 },
        true,
    )
}

pub fn render_bd_chart(chart: &CategoryChart) -> String {
    let vals = chart.bd.iter().flat_map(|c| c.values.iter().flatten().copied());
    let (lo, hi) = vals.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let pad = ((hi - lo) * 0.1).max(0.05);
    render(
        &format!("Bias disparity for {}", chart.category),
        "bias disparity",
        chart,
        &chart.bd,
        &Frame {
            y_min: if lo < 0.0 { lo - pad } else { 0.0 },
            y_max: hi + pad,
        },
        false,
    )
}

/// Writes `pr_<category>.svg` and `bd_<category>.svg` for each category.
pub fn write_charts(rows: &[MetricsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for chart in chart_data(rows) {
        for (prefix, body) in [("pr", render_pr_chart(&chart)), ("bd", render_bd_chart(&chart))] {
            let p = dir.join(format!("{prefix}_{}.svg", slug(&chart.category)));
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, fold: usize, scope: Scope, group: &str, cat: &str, pr_in: f64, pr_out: f64, bd: Option<f64>) -> MetricsRow {
        MetricsRow {
            experiment: "t".into(),
            algorithm: alg.into(),
            fold,
            scope,
            group: group.into(),
            category: cat.into(),
            pr_input: pr_in,
            pr_output: pr_out,
            bias_input: 1.0,
            bias_output: 1.0,
            bias_disparity: bd,
        }
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Sci-Fi"), "Sci-Fi");
        assert_eq!(slug("Children's"), "Children_s");
        assert_eq!(slug("a/b c"), "a_b_c");
    }

    #[test]
    fn fold_means_and_cluster_order() {
        let rows = vec![
            row("A", 0, Scope::General, "ALL", "Action", 0.6, 0.7, Some(0.1)),
            row("A", 0, Scope::Group, "M", "Action", 0.675, 0.8, Some(0.2)),
            row("A", 1, Scope::Group, "M", "Action", 0.675, 0.6, None),
            row("A", 0, Scope::Extreme, "zero-Action", "Action", 0.0, 0.3, None),
        ];
        let data = chart_data(&rows);
        assert_eq!(data.len(), 1);
        let c = &data[0];
        assert_eq!(c.pr.iter().map(|x| x.group.as_str()).collect::<Vec<_>>(), ["M", "ALL"]);
        assert!((c.pr[0].values[0].unwrap() - 0.7).abs() < 1e-12);
        assert!((c.bd[0].values[0].unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(c.pr[0].input_pr, 0.675);
    }

    #[test]
    fn labels_are_escaped() {
        let rows = vec![row("<A&B>", 0, Scope::Group, "\"g\"", "Action", 0.5, 0.5, Some(0.0))];
        let svg = render_pr_chart(&chart_data(&rows)[0]);
        assert!(svg.contains("data-algorithm=\"&lt;A&amp;B&gt;\""));
        assert!(svg.contains("data-group=\"&quot;g&quot;\""));
        assert!(!svg.contains("<A&B>"));
    }

    #[test]
    fn negative_bd_bars_hang_below_zero() {
        let rows = vec![
            row("A", 0, Scope::Group, "F", "Action", 0.3, 0.1, Some(-0.6)),
            row("B", 0, Scope::Group, "F", "Action", 0.3, 0.5, Some(0.4)),
        ];
        let svg = render_bd_chart(&chart_data(&rows)[0]);
        assert!(svg.contains("data-value=\"-0.6\""));
        assert!(svg.contains(">-0.600<"));
        assert!(!svg.contains("input-pr\""));
    }
}
