//! Box plots of execution-time samples, as deterministic SVG plus CSV.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("no plan has at least two episodes")]
    EmptyReport,
}

/// Five-number summary with 1.5 IQR fences.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Extreme samples inside the fences.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(samples: &[f64]) -> BoxStats {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|x| (lo_fence..=hi_fence).contains(x)).collect();
    BoxStats {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(median),
        whisker_high: inside.last().copied().unwrap_or(median),
        outliers: s.iter().copied().filter(|x| !(lo_fence..=hi_fence).contains(x)).collect(),
    }
}

/// Orders `P2` before `P10`: by length of the digit suffix, then text.
pub fn plan_order(a: &str, b: &str) -> std::cmp::Ordering {
    let split = |s: &str| {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        (s[..s.len() - digits].to_string(), digits, s.to_string())
    };
    split(a).cmp(&split(b))
}

pub struct PlotOutput {
    pub svg: String,
    pub csv: String,
    /// Plans skipped for having fewer than two samples.
    pub skipped: Vec<String>,
}

/// One box per plan with at least two samples, ordered by plan id. `header`
/// lines are embedded as comments in both outputs.
pub fn box_plot(plans: &[(String, Vec<f64>)], header: &[String]) -> Result<PlotOutput, PlotError> {
    let mut plans: Vec<&(String, Vec<f64>)> = plans.iter().collect();
    plans.sort_by(|a, b| plan_order(&a.0, &b.0));

    let mut csv = String::new();
    for h in header {
        let _ = writeln!(csv, "# {h}");
    }
    csv.push_str("plan_id,episode,execution_time_s,note\n");
    let mut skipped = Vec::new();
    let mut drawn = Vec::new();
    for (id, samples) in &plans {
        if samples.len() < 2 {
            let _ = writeln!(csv, "{id},,,skipped: fewer than two episodes");
            skipped.push(id.clone());
            continue;
        }
        for (i, x) in samples.iter().enumerate() {
            let _ = writeln!(csv, "{id},{i},{x},");
        }
        drawn.push((id.as_str(), box_stats(samples)));
    }
    if drawn.is_empty() {
        return Err(PlotError::EmptyReport);
    }

    let lo = drawn.iter().map(|(_, b)| b.outliers.iter().fold(b.whisker_low, |m, &x| m.min(x))).fold(f64::INFINITY, f64::min);
    let hi = drawn.iter().map(|(_, b)| b.outliers.iter().fold(b.whisker_high, |m, &x| m.max(x))).fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    let (lo, hi) = (lo - pad, hi + pad);

    let (left, top, plot_h, slot) = (70.0, 30.0, 300.0, 90.0);
    let width = left + slot * drawn.len() as f64 + 20.0;
    let height = top + plot_h + 50.0;
    let y = |v: f64| top + plot_h * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#);
    for h in header {
        let _ = writeln!(svg, "<!-- {} -->", h.replace("--", "- -"));
    }
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + plot_h);
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{yy:.2}" x2="{left}" y2="{yy:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, left - 8.0, yy + 4.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.2}" transform="rotate(-90 15 {:.2})" text-anchor="middle">execution time [s]</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (i, (id, b)) in drawn.iter().enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        let (x0, x1) = (cx - 25.0, cx + 25.0);
        let _ = writeln!(svg, r#"<g id="box-{id}">"#);
        let _ = writeln!(svg, r#"<line x1="{cx}" y1="{:.2}" x2="{cx}" y2="{:.2}" stroke="black"/>"#, y(b.whisker_high), y(b.q3));
        let _ = writeln!(svg, r#"<line x1="{cx}" y1="{:.2}" x2="{cx}" y2="{:.2}" stroke="black"/>"#, y(b.q1), y(b.whisker_low));
        for w in [b.whisker_low, b.whisker_high] {
            let _ = writeln!(svg, r#"<line x1="{}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="black"/>"#, cx - 10.0, y(w), cx + 10.0, y(w));
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{:.2}" width="50" height="{:.2}" fill="lightsteelblue" stroke="black"/>"#,
            y(b.q3),
            y(b.q1) - y(b.q3)
        );
        let _ = writeln!(svg, r#"<line x1="{x0}" y1="{:.2}" x2="{x1}" y2="{:.2}" stroke="black" stroke-width="2"/>"#, y(b.median), y(b.median));
        for o in &b.outliers {
            let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{:.2}" r="3" fill="none" stroke="black"/>"#, y(*o));
        }
        let _ = writeln!(svg, r#"<text x="{cx}" y="{:.2}" text-anchor="middle">{id}</text>"#, top + plot_h + 20.0);
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(PlotOutput { svg, csv, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_and_outliers() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 4.0));
    }

    #[test]
    fn one_box_per_plan_in_id_order() {
        let plans: Vec<(String, Vec<f64>)> =
            ["P10", "P2", "P1"].iter().map(|id| (id.to_string(), vec![1.0, 2.0, 3.0])).collect();
        let out = box_plot(&plans, &[]).unwrap();
        assert_eq!(out.svg.matches("<g id=\"box-").count(), 3);
        let p1 = out.svg.find("box-P1\"").unwrap();
        let p2 = out.svg.find("box-P2\"").unwrap();
        let p10 = out.svg.find("box-P10\"").unwrap();
        assert!(p1 < p2 && p2 < p10);
    }

    #[test]
    fn degenerate_and_short_plans() {
        let plans = vec![("P1".to_string(), vec![5.0; 4]), ("P2".to_string(), vec![7.0])];
        let out = box_plot(&plans, &["seed 1".into()]).unwrap();
        assert_eq!(out.skipped, vec!["P2".to_string()]);
        assert!(out.csv.contains("P2,,,skipped"));
        assert!(out.svg.contains("<!-- seed 1 -->"));
        assert!(!out.svg.contains("NaN"));
        assert_eq!(box_plot(&[("P1".into(), vec![1.0])], &[]).err(), Some(PlotError::EmptyReport));
    }
}
