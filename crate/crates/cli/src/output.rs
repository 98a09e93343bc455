use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::NamedTempFile;

use dressed_cavity::SweepPoint;

use crate::Failure;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to twelve significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // drops the sign of -0.0
        "0".into()
    } else {
        format!("{r}")
    }
}

/// Rounds every float in a JSON tree. Object keys are already sorted.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| Value::from(round_sig(x) + 0.0)).unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

pub fn render_json(record: &BTreeMap<String, Value>) -> String {
    let v = canonical(Value::Object(record.clone().into_iter().collect()));
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub const SWEEP_HEADER: &str = "pi,k,p_g,p_s1,p_s2,p_oprime2,script_c,concurrence";

pub fn render_sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for p in points {
        let s = &p.split;
        let row = [p.pi, p.k, s.p_g, s.p_s1, s.p_s2, s.p_oprime2, p.script_c, p.concurrence];
        let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Grid heatmap: one cell per point, `Π` to the right and `K` upwards,
/// shaded from blue (minimum) to red (maximum).
pub fn render_svg(points: &[SweepPoint], value: impl Fn(&SweepPoint) -> f64, title: &str) -> String {
    let mut pis: Vec<f64> = points.iter().map(|p| p.pi).collect();
    let mut ks: Vec<f64> = points.iter().map(|p| p.k).collect();
    for v in [&mut pis, &mut ks] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let (lo, hi) = points
        .iter()
        .map(&value)
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = 8;
    let (w, h) = (pis.len() * cell, ks.len() * cell);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#,
        h + 20,
        h + 20
    );
    let _ = writeln!(s, r#"<title>{title}: min {} max {}</title>"#, fmt_num(lo), fmt_num(hi));
    for p in points {
        let i = pis.iter().position(|&x| x == p.pi).unwrap_or(0);
        let j = ks.iter().position(|&x| x == p.k).unwrap_or(0);
        let t = ((value(p) - lo) / span).clamp(0.0, 1.0);
        let (r, b) = ((255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8);
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({r},0,{b})"/>"#,
            i * cell,
            (ks.len() - 1 - j) * cell
        );
    }
    let _ = writeln!(s, r#"<text x="2" y="{}" font-size="12">{title}</text>"#, h + 14);
    s.push_str("</svg>\n");
    s
}

/// Files written together: nothing lands on disk unless every file in the
/// batch was staged.
#[derive(Default)]
pub struct Batch {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Batch {
    pub fn stage(&mut self, path: &Path, contents: &str) -> Result<(), Failure> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let io = |e: std::io::Error| Failure::Io(format!("cannot write {}: {e}", path.display()));
        let mut tmp = NamedTempFile::new_in(&dir).map_err(io)?;
        tmp.write_all(contents.as_bytes()).map_err(io)?;
        tmp.flush().map_err(io)?;
        self.staged.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> Result<(), Failure> {
        for (tmp, path) in self.staged {
            tmp.persist(&path).map_err(|e| Failure::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(123456.7890123456), "123456.789012");
    }

    #[test]
    fn canonical_json_is_stable() {
        let mut rec = BTreeMap::new();
        rec.insert("b".to_string(), Value::from(2.0 / 3.0));
        rec.insert("a".to_string(), Value::from("x"));
        let once = render_json(&rec);
        let reparsed: BTreeMap<String, Value> = serde_json::from_str(&once).unwrap();
        assert_eq!(render_json(&reparsed), once);
        assert!(once.find("\"a\"").unwrap() < once.find("\"b\"").unwrap());
    }
}
