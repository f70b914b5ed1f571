//! Frame-level ROC evaluation and report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::detector::ScoreRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// From `(0, 0)` at threshold `+∞` to `(1, 1)` at the lowest score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Evaluation(format!(
            "need both classes, got {pos} abnormal and {neg} normal frames"
        )));
    }
    Ok((pos, neg))
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores contain NaN".into()));
    }
    Ok(())
}

/// `(tpr, fpr)` when frames scoring at or above `threshold` are flagged.
pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<(f64, f64)> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if s >= threshold {
            if l {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // consume the whole tie group so it moves as one step
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    points.dedup_by(|b, a| a.fpr == b.fpr && a.tpr == b.tpr);
    let auc = trapezoid(&points);
    Ok(RocCurve { points, auc })
}

fn trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Scores and boolean labels of the labelled rows (label −1 is dropped).
pub fn labelled(records: &[ScoreRecord]) -> (Vec<f64>, Vec<bool>) {
    records
        .iter()
        .filter(|r| r.label >= 0)
        .map(|r| (r.score, r.label == 1))
        .unzip()
}

const PALETTE: [&str; 6] = ["#1f4fd8", "#d62728", "#000000", "#2ca02c", "#ff7f0e", "#9467bd"];

const VIEW_W: f64 = 640.0;
const VIEW_H: f64 = 480.0;
const PLOT_X: f64 = 70.0;
const PLOT_Y: f64 = 30.0;
const PLOT_SIDE: f64 = 380.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn roc_csv(curves: &[(String, RocCurve)]) -> String {
    let mut out = String::from("name,threshold,fpr,tpr\n");
    for (name, curve) in curves {
        for p in &curve.points {
            let _ = writeln!(out, "{name},{},{},{}", p.threshold, p.fpr, p.tpr);
        }
    }
    out
}

pub fn roc_svg(curves: &[(String, RocCurve)]) -> String {
    let px = |fpr: f64| PLOT_X + fpr * PLOT_SIDE;
    let py = |tpr: f64| PLOT_Y + (1.0 - tpr) * PLOT_SIDE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEW_W} {VIEW_H}" width="{VIEW_W}" height="{VIEW_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{VIEW_W}" height="{VIEW_H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PLOT_X}" y="{PLOT_Y}" width="{PLOT_SIDE}" height="{PLOT_SIDE}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#,
            px(v),
            py(0.0),
            px(v),
            py(0.0) + 5.0,
            px(v),
            py(0.0) + 19.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            px(0.0) - 5.0,
            py(v),
            px(0.0),
            py(v),
            px(0.0) - 8.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">False positive rate</text>"#,
        PLOT_X + PLOT_SIDE / 2.0,
        PLOT_Y + PLOT_SIDE + 40.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">True positive rate</text>"#,
        PLOT_Y + PLOT_SIDE / 2.0,
        PLOT_Y + PLOT_SIDE / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888888" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for (k, (name, curve)) in curves.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = PLOT_Y + 10.0 + 20.0 * k as f64;
        let lx = PLOT_X + PLOT_SIDE + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{} (AUC {:.4})</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            xml_escape(name),
            curve.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the ROC CSV and SVG for one or more named curves.
pub fn emit_reports(curves: &[(String, RocCurve)], out_csv: &Path, out_svg: &Path) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::Evaluation("no ROC curves to report".into()));
    }
    fs::write(out_csv, roc_csv(curves)).map_err(|e| Error::io(out_csv, e))?;
    fs::write(out_svg, roc_svg(curves)).map_err(|e| Error::io(out_svg, e))
}
