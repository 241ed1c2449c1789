use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::metrics::{quantile, variability_interval};
use super::run::{CurvePoint, LearningCurve, Strategy};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, e.into())
}

/// Writes `repetition,effort,voc,dice` rows for one curve.
pub fn write_curve_csv(curve: &LearningCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["repetition", "effort", "voc", "dice"])
        .map_err(csv_err(path))?;
    for (rep, points) in curve.repetitions.iter().enumerate() {
        for p in points {
            w.write_record([
                rep.to_string(),
                p.effort.to_string(),
                p.voc.to_string(),
                p.dice.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: impl AsRef<Path>, strategy: Strategy) -> Result<LearningCurve> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut reps: Vec<Vec<CurvePoint>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad =
            |what: &str| Error::Parse(format!("{}: row {}: bad {what}", path.display(), line + 2));
        if rec.len() != 4 {
            return Err(bad("column count"));
        }
        let rep: usize = rec[0].parse().map_err(|_| bad("repetition"))?;
        let point = CurvePoint {
            effort: rec[1].parse().map_err(|_| bad("effort"))?,
            voc: rec[2].parse().map_err(|_| bad("voc"))?,
            dice: rec[3].parse().map_err(|_| bad("dice"))?,
        };
        if rep >= reps.len() {
            reps.resize_with(rep + 1, Vec::new);
        }
        reps[rep].push(point);
    }
    Ok(LearningCurve {
        label: strategy.name().to_string(),
        strategy,
        repetitions: reps,
    })
}

/// Aggregate statistics of the final point of each repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSummary {
    pub label: String,
    pub repetitions: usize,
    pub mean_effort: f64,
    pub mean_voc: f64,
    pub mean_dice: f64,
    pub voc_variability: f64,
    pub dice_variability: f64,
}

pub fn summarize(curve: &LearningCurve) -> Result<CurveSummary> {
    let finals = curve.final_points();
    if finals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = finals.len() as f64;
    let mean = |f: fn(&CurvePoint) -> f64| finals.iter().map(f).sum::<f64>() / n;
    Ok(CurveSummary {
        label: curve.label.clone(),
        repetitions: finals.len(),
        mean_effort: mean(|p| p.effort as f64),
        mean_voc: mean(|p| p.voc),
        mean_dice: mean(|p| p.dice),
        voc_variability: variability_interval(&curve.final_voc())?,
        dice_variability: variability_interval(&curve.final_dice())?,
    })
}

pub fn write_summary_csv(curves: &[LearningCurve], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "strategy",
        "repetitions",
        "mean_final_effort",
        "mean_final_voc",
        "mean_final_dice",
        "voc_variability",
        "dice_variability",
    ])
    .map_err(csv_err(path))?;
    for c in curves {
        let s = summarize(c)?;
        w.write_record([
            s.label,
            s.repetitions.to_string(),
            s.mean_effort.to_string(),
            s.mean_voc.to_string(),
            s.mean_dice.to_string(),
            s.voc_variability.to_string(),
            s.dice_variability.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean VOC at one effort level with the central 80% band over repetitions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub effort: u64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Mean VOC per effort level over repetitions, carrying each repetition's
/// last value forward so every level averages the same number of runs.
pub fn mean_curve(curve: &LearningCurve) -> Vec<BandPoint> {
    let mut efforts: Vec<u64> = curve
        .repetitions
        .iter()
        .flatten()
        .map(|p| p.effort)
        .collect();
    efforts.sort_unstable();
    efforts.dedup();
    efforts
        .into_iter()
        .filter_map(|e| {
            let mut vals: Vec<f64> = curve
                .repetitions
                .iter()
                .filter_map(|r| r.iter().take_while(|p| p.effort <= e).last().map(|p| p.voc))
                .collect();
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(f64::total_cmp);
            Some(BandPoint {
                effort: e,
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                lo: quantile(&vals, 0.1),
                hi: quantile(&vals, 0.9),
            })
        })
        .collect()
}

const COLORS: [&str; 6] = [
    "#7f7f7f", "#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static SVG line chart of mean VOC against annotation effort.
pub fn render_svg(curves: &[LearningCurve]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 60.0, 120.0, 20.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let means: Vec<Vec<BandPoint>> = curves.iter().map(mean_curve).collect();
    let max_effort = means
        .iter()
        .flatten()
        .map(|p| p.effort)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let x = |e: f64| ml + pw * e / max_effort;
    let y = |v: f64| mt + ph * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            ml - 6.0,
            y(v) + 4.0
        );
        let e = max_effort * v;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{e:.0}</text>"#,
            x(e),
            mt + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">annotation effort</text>"#,
        ml + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">mean VOC</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );
    for (i, (curve, pts)) in curves.iter().zip(&means).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let xy = |e: u64, v: f64| format!("{:.2},{:.2}", x(e as f64), y(v));
        let band: Vec<String> = pts
            .iter()
            .map(|p| xy(p.effort, p.hi))
            .chain(pts.iter().rev().map(|p| xy(p.effort, p.lo)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon fill="{color}" fill-opacity="0.15" stroke="none" points="{}"/>"#,
            band.join(" ")
        );
        let path: Vec<String> = pts.iter().map(|p| xy(p.effort, p.mean)).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let ly = mt + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            ml + pw + 10.0,
            ml + pw + 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            ml + pw + 36.0,
            ly + 4.0,
            escape(&curve.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(curves: &[LearningCurve], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(curves)).map_err(|e| Error::io(path, e))
}

/// Writes every curve CSV, the summary and the chart into `dir`.
pub fn write_report(curves: &[LearningCurve], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for c in curves {
        write_curve_csv(c, dir.join(format!("curve_{}.csv", c.label)))?;
    }
    write_summary_csv(curves, dir.join("summary.csv"))?;
    write_svg(curves, dir.join("learning_curves.svg"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> LearningCurve {
        let pt = |effort, voc| CurvePoint {
            effort,
            voc,
            dice: voc,
        };
        LearningCurve {
            label: "pCUs".into(),
            strategy: Strategy::PCUs,
            repetitions: vec![
                vec![pt(0, 0.1), pt(2, 0.5), pt(4, 0.7)],
                vec![pt(0, 0.2), pt(2, 0.3)],
            ],
        }
    }

    #[test]
    fn curve_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_curve_csv(&curve(), &path).unwrap();
        assert_eq!(read_curve_csv(&path, Strategy::PCUs).unwrap(), curve());
    }

    #[test]
    fn mean_curve_carries_last_value() {
        let m = mean_curve(&curve());
        assert_eq!(m.len(), 3);
        assert!((m[0].mean - 0.15).abs() < 1e-12);
        assert!((m[2].mean - 0.5).abs() < 1e-12);
        assert!(m.iter().all(|p| p.lo <= p.mean && p.mean <= p.hi));
    }

    #[test]
    fn summary_uses_final_points() {
        let s = summarize(&curve()).unwrap();
        assert_eq!(s.repetitions, 2);
        assert!((s.mean_voc - 0.5).abs() < 1e-12);
        assert!((s.mean_effort - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svg_is_static() {
        let svg = render_svg(&[curve()]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("<script"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "repetition,effort,voc,dice\n0,x,0.1,0.1\n").unwrap();
        assert!(matches!(
            read_curve_csv(&path, Strategy::Rs),
            Err(Error::Parse(_))
        ));
    }
}
