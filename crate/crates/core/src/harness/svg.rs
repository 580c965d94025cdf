use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::ExperimentReport;
use crate::error::{Error, Result};
use crate::rankstats::nearest_rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKey {
    Condition,
    Item,
    ConditionItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub metric: String,
    pub group: GroupKey,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
    /// Restricts and orders the groups; all groups in first-seen order otherwise.
    pub groups: Option<Vec<String>>,
}

impl PlotSpec {
    pub fn new(metric: &str, group: GroupKey) -> Self {
        PlotSpec {
            metric: metric.to_string(),
            group,
            title: metric.to_string(),
            x_label: match group {
                GroupKey::Condition => "condition".into(),
                GroupKey::Item => "item".into(),
                GroupKey::ConditionItem => "condition / item".into(),
            },
            y_label: metric.to_string(),
            width: 800,
            height: 500,
            groups: None,
        }
    }
}

/// Five-number summary with nearest-rank quartiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub label: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

impl BoxStats {
    pub fn from_values(label: &str, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("group '{label}' has no values")));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(BoxStats {
            label: label.to_string(),
            min: v[0],
            q1: nearest_rank(&v, 25),
            median: nearest_rank(&v, 50),
            q3: nearest_rank(&v, 75),
            max: v[v.len() - 1],
            n: v.len(),
        })
    }
}

/// Plot-area geometry and the value-to-pixel map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Frame {
    fn new(width: u32, height: u32, lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Frame {
            left: 80.0,
            right: width as f64 - 20.0,
            top: 40.0,
            bottom: height as f64 - 90.0,
            lo,
            hi,
        }
    }

    pub fn y(&self, v: f64) -> f64 {
        self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn collect_groups(report: &ExperimentReport, spec: &PlotSpec) -> Result<Vec<BoxStats>> {
    let mut order: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut seen_metric = false;
    for r in report.metric_values(&spec.metric) {
        seen_metric = true;
        if !r.value.is_finite() {
            continue;
        }
        let key = match spec.group {
            GroupKey::Condition => r.condition.clone(),
            GroupKey::Item => r.item.clone(),
            GroupKey::ConditionItem => format!("{} {}", r.condition, r.item),
        };
        match order.iter().position(|k| *k == key) {
            Some(i) => values[i].push(r.value),
            None => {
                order.push(key);
                values.push(vec![r.value]);
            }
        }
    }
    if !seen_metric {
        return Err(Error::InvalidArgument(format!("unknown metric '{}'", spec.metric)));
    }
    let wanted: Vec<String> = spec.groups.clone().unwrap_or_else(|| order.clone());
    if wanted.is_empty() {
        return Err(Error::InvalidArgument(format!("no finite values for '{}'", spec.metric)));
    }
    wanted
        .iter()
        .map(|g| {
            let vals = order.iter().position(|k| k == g).map_or(&[][..], |i| &values[i][..]);
            BoxStats::from_values(g, vals)
        })
        .collect()
}

pub fn frame_for(boxes: &[BoxStats], width: u32, height: u32) -> Frame {
    let lo = boxes.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
    let hi = boxes.iter().map(|b| b.max).fold(f64::NEG_INFINITY, f64::max);
    Frame::new(width, height, lo, hi)
}

/// SVG 1.1 document with one box per group: quartile box, median line,
/// whiskers at min and max.
pub fn render_boxplot_svg(report: &ExperimentReport, spec: &PlotSpec) -> Result<String> {
    if spec.width < 200 || spec.height < 200 {
        return Err(Error::InvalidArgument("plot must be at least 200x200".into()));
    }
    let boxes = collect_groups(report, spec)?;
    let f = frame_for(&boxes, spec.width, spec.height);
    let (w, h) = (spec.width, spec.height);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w as f64 / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}" stroke="black"/><line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}" stroke="black"/>"#,
        l = f.left,
        t = f.top,
        b = f.bottom,
        r = f.right
    );
    for k in 0..=4 {
        let v = f.lo + (f.hi - f.lo) * k as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            f.left - 5.0,
            f.left,
            f.left - 8.0,
            y + 4.0
        );
    }
    let slot = (f.right - f.left) / boxes.len() as f64;
    let half = (slot * 0.3).min(30.0);
    for (i, b) in boxes.iter().enumerate() {
        let cx = f.left + slot * (i as f64 + 0.5);
        let (ymin, yq1, ymed, yq3, ymax) = (f.y(b.min), f.y(b.q1), f.y(b.median), f.y(b.q3), f.y(b.max));
        let _ = writeln!(s, r#"<g data-group="{}" data-n="{}">"#, escape(&b.label), b.n);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{ymax:.2}" x2="{cx:.2}" y2="{yq3:.2}" stroke="black"/><line x1="{cx:.2}" y1="{yq1:.2}" x2="{cx:.2}" y2="{ymin:.2}" stroke="black"/>"#
        );
        for y in [ymin, ymax] {
            let _ = writeln!(
                s,
                r#"<line class="whisker" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
                cx - half / 2.0,
                cx + half / 2.0
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{yq3:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            2.0 * half,
            yq1 - yq3
        );
        let _ = writeln!(
            s,
            r#"<line class="median" x1="{:.2}" y1="{ymed:.2}" x2="{:.2}" y2="{ymed:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            cx + half
        );
        let ly = f.bottom + 14.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-35 {cx:.2} {ly:.2})">{}</text>"#,
            escape(&b.label)
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (f.left + f.right) / 2.0,
        h - 8,
        escape(&spec.x_label)
    );
    let my = (f.top + f.bottom) / 2.0;
    let _ = writeln!(
        s,
        r#"<text x="18" y="{my:.2}" text-anchor="middle" transform="rotate(-90 18 {my:.2})">{}</text>"#,
        escape(&spec.y_label)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders first, so nothing is written when the plot is invalid.
pub fn emit_boxplot_svg(report: &ExperimentReport, spec: &PlotSpec, path: &Path) -> Result<()> {
    let svg = render_boxplot_svg(report, spec)?;
    std::fs::write(path, svg)?;
    Ok(())
}
