//! Table serialization (CSV, JSON) and SVG heatmap rendering.
//!
//! Numbers are printed with 17 significant digits so a parsed file
//! recovers every f64 bit-exactly and reruns are byte-comparable.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::experiments::ExperimentRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Run metadata embedded in JSON output. `timestamp` is `None` under
/// `--no-timestamp`, which also zeroes the wallclock column so reruns
/// with the same seed are byte-identical.
#[derive(Debug, Clone)]
pub struct OutputMeta {
    pub command: String,
    pub seed: u64,
    pub replicates: u64,
    pub version: String,
    pub timestamp: Option<String>,
}

impl OutputMeta {
    pub fn deterministic(&self) -> bool {
        self.timestamp.is_none()
    }
}

pub fn version_string() -> String {
    format!("dfmc-{}", env!("CARGO_PKG_VERSION"))
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn rows_to_csv(rows: &[ExperimentRow], meta: &OutputMeta) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidParam("refusing to write an empty table".into()));
    }
    let first = &rows[0];
    let has_opt = rows.iter().any(|r| r.df_opt.is_some());
    let mut header: Vec<String> = first.params.iter().map(|(k, _)| k.clone()).collect();
    header.push("df".into());
    header.push("se".into());
    if has_opt {
        header.push("df_opt".into());
        header.push("se_opt".into());
    }
    header.push("oracle".into());
    header.push("z_vs_oracle".into());
    for (k, _) in &first.extras {
        header.push(k.clone());
    }
    header.push("wallclock_s".into());

    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        if row.params.len() != first.params.len() || row.extras.len() != first.extras.len() {
            return Err(Error::InvalidParam(
                "rows have inconsistent columns".into(),
            ));
        }
        let mut fields: Vec<String> = row.params.iter().map(|(_, v)| fmt(*v)).collect();
        fields.push(fmt(row.df.value));
        fields.push(fmt(row.df.std_error));
        if has_opt {
            let (dv, sv) = row
                .df_opt
                .map(|e| (e.value, e.std_error))
                .unwrap_or((f64::NAN, f64::NAN));
            fields.push(fmt(dv));
            fields.push(fmt(sv));
        }
        fields.push(fmt(row.oracle.unwrap_or(f64::NAN)));
        fields.push(fmt(row.z_vs_oracle().unwrap_or(f64::NAN)));
        for (_, v) in &row.extras {
            fields.push(fmt(*v));
        }
        let wall = if meta.deterministic() { 0.0 } else { row.wallclock_s };
        fields.push(fmt(wall));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn rows_to_json(rows: &[ExperimentRow], meta: &OutputMeta) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidParam("refusing to write an empty table".into()));
    }
    let mut meta_obj = Map::new();
    meta_obj.insert("command".into(), json!(meta.command));
    meta_obj.insert("seed".into(), json!(meta.seed));
    meta_obj.insert("replicates".into(), json!(meta.replicates));
    meta_obj.insert("version".into(), json!(meta.version));
    if let Some(ts) = &meta.timestamp {
        meta_obj.insert("timestamp".into(), json!(ts));
    }
    let rows_json: Vec<Value> = rows
        .iter()
        .map(|row| {
            let mut obj = Map::new();
            let mut params = Map::new();
            for (k, v) in &row.params {
                params.insert(k.clone(), json!(v));
            }
            obj.insert("params".into(), Value::Object(params));
            obj.insert("df".into(), json!(row.df.value));
            obj.insert("se".into(), json!(row.df.std_error));
            obj.insert("estimator".into(), json!(row.df.estimator.label()));
            if let Some(opt) = row.df_opt {
                obj.insert("df_opt".into(), json!(opt.value));
                obj.insert("se_opt".into(), json!(opt.std_error));
            }
            if let Some(oracle) = row.oracle {
                obj.insert("oracle".into(), json!(oracle));
                obj.insert("z_vs_oracle".into(), json!(row.z_vs_oracle()));
            }
            if !row.extras.is_empty() {
                let mut extras = Map::new();
                for (k, v) in &row.extras {
                    extras.insert(k.clone(), to_json_number(*v));
                }
                obj.insert("extras".into(), Value::Object(extras));
            }
            let wall = if meta.deterministic() { 0.0 } else { row.wallclock_s };
            obj.insert("wallclock_s".into(), json!(wall));
            Value::Object(obj)
        })
        .collect();
    let doc = json!({ "meta": Value::Object(meta_obj), "rows": rows_json });
    Ok(format!("{:#}\n", doc))
}

/// JSON has no NaN literal; encode it as null.
fn to_json_number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Writes rows to `path` in the chosen format. The file appears only on
/// success: content goes to a sibling temp file first and is renamed in.
pub fn write_rows(
    rows: &[ExperimentRow],
    format: OutputFormat,
    path: &Path,
    meta: &OutputMeta,
) -> Result<()> {
    let content = match format {
        OutputFormat::Csv => rows_to_csv(rows, meta)?,
        OutputFormat::Json => rows_to_json(rows, meta)?,
    };
    write_atomic(path, &content)
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    if let Err(e) = fs::write(&tmp, content) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG heatmap
// ---------------------------------------------------------------------------

const CELL: f64 = 14.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_BOTTOM: f64 = 46.0;
const MARGIN_TOP: f64 = 18.0;
const LEGEND_GAP: f64 = 24.0;
const LEGEND_WIDTH: f64 = 18.0;
const LEGEND_TEXT: f64 = 64.0;

/// Renders heatmap rows (params mu1, mu2) as a colored-cell SVG with a
/// linear color scale and a tick-labeled legend. Pure text, no assets.
pub fn heatmap_svg(rows: &[ExperimentRow]) -> Result<String> {
    let mut mu1s: Vec<f64> = Vec::new();
    let mut mu2s: Vec<f64> = Vec::new();
    let mut cells = std::collections::HashMap::new();
    for row in rows {
        let get = |name: &str| -> Result<f64> {
            row.params
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParam(format!("heatmap rows need a {name} column")))
        };
        let (a, b) = (get("mu1")?, get("mu2")?);
        if !mu1s.iter().any(|&x| x.to_bits() == a.to_bits()) {
            mu1s.push(a);
        }
        if !mu2s.iter().any(|&x| x.to_bits() == b.to_bits()) {
            mu2s.push(b);
        }
        if cells.insert((a.to_bits(), b.to_bits()), row.df.value).is_some() {
            return Err(Error::IncompleteGrid {
                expected: rows.len(),
                got: rows.len(),
            });
        }
    }
    mu1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mu2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if mu1s.len() * mu2s.len() != rows.len() {
        return Err(Error::IncompleteGrid {
            expected: mu1s.len() * mu2s.len(),
            got: rows.len(),
        });
    }

    let values: Vec<f64> = rows.iter().map(|r| r.df.value).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let scale = |v: f64| -> f64 {
        if span > 0.0 {
            (v - min) / span
        } else {
            0.0
        }
    };

    let grid_w = CELL * mu1s.len() as f64;
    let grid_h = CELL * mu2s.len() as f64;
    let width = MARGIN_LEFT + grid_w + LEGEND_GAP + LEGEND_WIDTH + LEGEND_TEXT;
    let height = MARGIN_TOP + grid_h + MARGIN_BOTTOM;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    for (i, &m1) in mu1s.iter().enumerate() {
        for (j, &m2) in mu2s.iter().enumerate() {
            let v = cells[&(m1.to_bits(), m2.to_bits())];
            let x = MARGIN_LEFT + i as f64 * CELL;
            // larger mu2 at the top
            let y = MARGIN_TOP + (mu2s.len() - 1 - j) as f64 * CELL;
            svg.push_str(&format!(
                "<rect class=\"cell\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" fill=\"{}\"/>\n",
                color(scale(v))
            ));
        }
    }

    // axis labels and end ticks
    let label = |v: f64| format!("{v:.4}");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">\u{3bc}\u{2081}</text>\n",
        MARGIN_LEFT + grid_w / 2.0,
        MARGIN_TOP + grid_h + 34.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">\u{3bc}\u{2082}</text>\n",
        16.0,
        MARGIN_TOP + grid_h / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        MARGIN_LEFT + CELL / 2.0,
        MARGIN_TOP + grid_h + 14.0,
        label(mu1s[0])
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        MARGIN_LEFT + grid_w - CELL / 2.0,
        MARGIN_TOP + grid_h + 14.0,
        label(*mu1s.last().unwrap())
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
        MARGIN_LEFT - 4.0,
        MARGIN_TOP + grid_h - CELL / 2.0 + 4.0,
        label(mu2s[0])
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
        MARGIN_LEFT - 4.0,
        MARGIN_TOP + CELL / 2.0 + 4.0,
        label(*mu2s.last().unwrap())
    ));

    // color legend with numeric ticks at min, mid, max
    let lx = MARGIN_LEFT + grid_w + LEGEND_GAP;
    let strips = 32usize;
    let strip_h = grid_h / strips as f64;
    for s in 0..strips {
        let t = if strips > 1 {
            1.0 - s as f64 / (strips - 1) as f64
        } else {
            0.0
        };
        let y = MARGIN_TOP + s as f64 * strip_h;
        svg.push_str(&format!(
            "<rect class=\"legend\" x=\"{lx:.1}\" y=\"{y:.1}\" width=\"{LEGEND_WIDTH:.1}\" height=\"{:.2}\" fill=\"{}\"/>\n",
            strip_h + 0.5,
            color(if span > 0.0 { t } else { 0.0 })
        ));
    }
    for (t, v) in [(0.0f64, min), (0.5, min + span / 2.0), (1.0, max)] {
        let y = MARGIN_TOP + (1.0 - t) * grid_h;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            lx + LEGEND_WIDTH,
            lx + LEGEND_WIDTH + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" font-family=\"sans-serif\">{}</text>\n",
            lx + LEGEND_WIDTH + 6.0,
            y + 3.5,
            label(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{lx:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\">DF</text>\n",
        MARGIN_TOP - 5.0
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_heatmap_svg(rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let svg = heatmap_svg(rows)?;
    write_atomic(path, &svg)
}

/// Three-anchor linear color map (dark violet, teal, yellow).
fn color(t: f64) -> String {
    const ANCHORS: [(f64, f64, f64); 3] = [
        (68.0, 1.0, 84.0),
        (33.0, 144.0, 140.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0);
    let (a, b, frac) = if t <= 0.5 {
        (ANCHORS[0], ANCHORS[1], t * 2.0)
    } else {
        (ANCHORS[1], ANCHORS[2], (t - 0.5) * 2.0)
    };
    let lerp = |x: f64, y: f64| (x + (y - x) * frac).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{DfEstimate, EstimatorKind};

    fn meta(ts: Option<&str>) -> OutputMeta {
        OutputMeta {
            command: "test".into(),
            seed: 7,
            replicates: 100,
            version: version_string(),
            timestamp: ts.map(|s| s.to_string()),
        }
    }

    fn row(params: Vec<(&str, f64)>, df: f64, se: f64, oracle: Option<f64>) -> ExperimentRow {
        ExperimentRow {
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            df: DfEstimate {
                value: df,
                std_error: se,
                replicates: 100,
                estimator: EstimatorKind::Covariance,
            },
            df_opt: None,
            oracle,
            extras: Vec::new(),
            wallclock_s: 1.5,
        }
    }

    #[test]
    fn csv_has_header_and_data_lines() {
        let rows = vec![
            row(vec![("mu1", 0.0), ("mu2", 1.0)], 1.5, 0.01, Some(1.49)),
            row(vec![("mu1", 0.0), ("mu2", 2.0)], 1.7, 0.01, None),
            row(vec![("mu1", 0.0), ("mu2", 3.0)], 2.0, 0.02, Some(2.01)),
        ];
        let csv = rows_to_csv(&rows, &meta(None)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "mu1,mu2,df,se,oracle,z_vs_oracle,wallclock_s");
    }

    #[test]
    fn csv_round_trips_every_f64_bit() {
        let vals = [
            std::f64::consts::PI,
            1.0 / 3.0,
            -2.2250738585072014e-308,
            5641.234567890123,
        ];
        for &v in &vals {
            let rows = vec![row(vec![("x", v)], v, v.abs() / 7.0, None)];
            let csv = rows_to_csv(&rows, &meta(None)).unwrap();
            let data = csv.lines().nth(1).unwrap();
            let fields: Vec<f64> = data.split(',').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields[0].to_bits(), v.to_bits());
            assert_eq!(fields[1].to_bits(), v.to_bits());
            assert_eq!(fields[2].to_bits(), (v.abs() / 7.0).to_bits());
        }
    }

    #[test]
    fn deterministic_meta_zeroes_wallclock_and_drops_timestamp() {
        let rows = vec![row(vec![("k", 1.0)], 3.0, 0.1, None)];
        let a = rows_to_csv(&rows, &meta(None)).unwrap();
        let b = rows_to_csv(&rows, &meta(None)).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("0.0000000000000000e0"));
        let json = rows_to_json(&rows, &meta(None)).unwrap();
        assert!(!json.contains("timestamp"));
        let with_ts = rows_to_json(&rows, &meta(Some("2020-01-01T00:00:00Z"))).unwrap();
        assert!(with_ts.contains("timestamp"));
    }

    #[test]
    fn json_schema_fields_present() {
        let rows = vec![row(vec![("sigma", 0.1)], 7.9, 0.03, Some(7.97))];
        let json = rows_to_json(&rows, &meta(None)).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["meta"]["seed"], 7);
        assert_eq!(doc["meta"]["replicates"], 100);
        assert!(doc["meta"]["version"].as_str().unwrap().starts_with("dfmc-"));
        let r = &doc["rows"][0];
        assert!(r["params"]["sigma"].is_number());
        assert!(r["df"].is_number());
        assert!(r["se"].is_number());
        assert!(r["oracle"].is_number());
        assert_eq!(r["estimator"], "cov");
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(rows_to_csv(&[], &meta(None)).is_err());
    }

    #[test]
    fn svg_cell_count_matches_grid() {
        let mut rows = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                rows.push(row(
                    vec![("mu1", i as f64), ("mu2", j as f64)],
                    (i + j) as f64,
                    0.01,
                    None,
                ));
            }
        }
        let svg = heatmap_svg(&rows).unwrap();
        assert_eq!(svg.matches("class=\"cell\"").count(), 9);
        assert!(svg.contains("\u{3bc}\u{2081}"));
        assert!(svg.contains("\u{3bc}\u{2082}"));
    }

    #[test]
    fn svg_constant_rows_single_color() {
        let mut rows = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                rows.push(row(
                    vec![("mu1", i as f64), ("mu2", j as f64)],
                    5.0,
                    0.01,
                    None,
                ));
            }
        }
        let svg = heatmap_svg(&rows).unwrap();
        let fills: std::collections::HashSet<&str> = svg
            .lines()
            .filter(|l| l.contains("class=\"cell\""))
            .map(|l| l.split("fill=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(fills.len(), 1);
        // legend ticks all equal
        assert_eq!(svg.matches(">5.0000<").count(), 3);
    }

    #[test]
    fn svg_incomplete_grid_rejected() {
        let rows = vec![
            row(vec![("mu1", 0.0), ("mu2", 0.0)], 1.0, 0.1, None),
            row(vec![("mu1", 1.0), ("mu2", 1.0)], 1.0, 0.1, None),
        ];
        assert!(matches!(heatmap_svg(&rows), Err(Error::IncompleteGrid { .. })));
    }
}
