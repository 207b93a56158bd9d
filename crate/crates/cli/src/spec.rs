//! Manifold specifications: a line-oriented `key = value` format with one
//! `X<i> = expr` line per horizontal field, and a JSON mirror.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use srgeo_core::flows::ChartBox;
use srgeo_core::measure::{frame_inverse_polys, VolumeForm};
use srgeo_core::{build_privileged_frame, Frame, MetricExtension, VectorField};

use crate::error::{CliError, Context, ParseError, ParseErrorKind, Result};
use crate::expr::{parse_expr, Expr};

#[derive(Clone, Debug, PartialEq)]
pub enum MetricMode {
    FrameOrthonormal,
    /// Frame-orthonormal metric with frame vector `i` rescaled to length `1/s_i`.
    Scaled(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldSpec {
    pub name: String,
    pub dim: usize,
    pub horizontal: Vec<Expr>,
    pub chart_box: Vec<(f64, f64)>,
    pub volume: Expr,
    pub metric: MetricMode,
    pub r_max: f64,
}

fn perr(line: usize, col: usize, kind: ParseErrorKind, msg: impl Into<String>) -> CliError {
    CliError::Parse(ParseError { line, col, kind, msg: msg.into() })
}

fn parse_box(value: &str, line: usize, col: usize) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(|part| {
            let (lo, hi) = part.trim().split_once("..").ok_or_else(|| perr(line, col, ParseErrorKind::Syntax, "chart_box entries look like lo..hi"))?;
            let lo: f64 = lo.trim().parse().map_err(|_| perr(line, col, ParseErrorKind::Syntax, format!("bad number '{lo}'")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| perr(line, col, ParseErrorKind::Syntax, format!("bad number '{hi}'")))?;
            if !(lo < hi) {
                return Err(perr(line, col, ParseErrorKind::Syntax, "chart_box needs lo < hi"));
            }
            Ok((lo, hi))
        })
        .collect()
}

fn parse_metric(value: &str, line: usize, col: usize) -> Result<MetricMode> {
    let v = value.trim();
    if v == "frame_orthonormal" {
        return Ok(MetricMode::FrameOrthonormal);
    }
    if let Some(inner) = v.strip_prefix("scaled(").and_then(|s| s.strip_suffix(')')) {
        let scales = inner
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| perr(line, col, ParseErrorKind::Syntax, format!("bad scale '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(MetricMode::Scaled(scales));
    }
    Err(perr(line, col, ParseErrorKind::Syntax, format!("unknown metric '{v}'; use frame_orthonormal or scaled(s1, ..., sn)")))
}

impl ManifoldSpec {
    /// Parses the text format, or the JSON mirror when the text starts with
    /// `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Self::from_json(text);
        }
        let mut name = None;
        let mut dim = None;
        let mut chart_box = None;
        let mut volume = None;
        let mut metric = MetricMode::FrameOrthonormal;
        let mut r_max = None;
        let mut fields: Vec<(usize, usize, Expr)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let eq = content.find('=').ok_or_else(|| perr(line, 1, ParseErrorKind::Syntax, "expected 'key = value'"))?;
            let key = content[..eq].trim();
            let value = &content[eq + 1..];
            let vcol = content[..eq + 1].chars().count() + 1 + (value.len() - value.trim_start().len());
            let value_t = value.trim();
            match key {
                "name" => name = Some(value_t.to_string()),
                "dim" => dim = Some(value_t.parse::<usize>().map_err(|_| perr(line, vcol, ParseErrorKind::Syntax, "dim must be a positive integer"))?),
                "chart_box" => chart_box = Some(parse_box(value_t, line, vcol)?),
                "volume" => volume = Some(parse_expr(value_t, line, vcol)?),
                "metric" => metric = parse_metric(value_t, line, vcol)?,
                "r_max" => r_max = Some(value_t.parse::<f64>().map_err(|_| perr(line, vcol, ParseErrorKind::Syntax, "r_max must be a number"))?),
                k if k.starts_with('X') => {
                    let idx: usize = k[1..].parse().map_err(|_| perr(line, 1, ParseErrorKind::Syntax, format!("bad field name '{k}'")))?;
                    fields.push((idx, line, parse_expr(value_t, line, vcol)?));
                }
                k => return Err(perr(line, 1, ParseErrorKind::Syntax, format!("unknown key '{k}'"))),
            }
        }
        let dim = dim.ok_or_else(|| perr(1, 1, ParseErrorKind::Syntax, "missing 'dim'"))?;
        for (pos, (idx, line, _)) in fields.iter().enumerate() {
            if *idx != pos + 1 {
                return Err(perr(*line, 1, ParseErrorKind::Syntax, format!("fields must be numbered X1, X2, ... in order; found X{idx}")));
            }
        }
        let spec = ManifoldSpec {
            name: name.unwrap_or_else(|| "unnamed".into()),
            dim,
            horizontal: fields.into_iter().map(|(_, _, e)| e).collect(),
            chart_box: chart_box.unwrap_or_else(|| vec![(-10.0, 10.0); dim]),
            volume: volume.unwrap_or(Expr::Num(1.0)),
            metric,
            r_max: r_max.unwrap_or(0.5),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(CliError::Invalid("dim must be positive".into()));
        }
        if self.horizontal.is_empty() {
            return Err(CliError::Invalid("at least one horizontal field".into()));
        }
        let mismatch = |msg: String| CliError::Parse(ParseError { line: 0, col: 0, kind: ParseErrorKind::DimensionMismatch, msg });
        for (i, e) in self.horizontal.iter().enumerate() {
            if e.max_index() > n {
                return Err(mismatch(format!("X{} uses index {} but dim = {n}", i + 1, e.max_index())));
            }
            e.to_field(n).map_err(|err| CliError::Invalid(format!("X{}: {err}", i + 1)))?;
        }
        if self.volume.max_index() > n {
            return Err(mismatch(format!("volume uses index {} but dim = {n}", self.volume.max_index())));
        }
        self.volume.to_poly(n).map_err(|err| CliError::Invalid(format!("volume: {err}")))?;
        if self.chart_box.len() != n {
            return Err(mismatch(format!("chart_box has {} intervals for dim = {n}", self.chart_box.len())));
        }
        if let MetricMode::Scaled(s) = &self.metric {
            if s.len() != n || s.iter().any(|v| !(*v > 0.0)) {
                return Err(CliError::Invalid(format!("scaled metric needs {n} positive scales")));
            }
        }
        if !(self.r_max > 0.0) {
            return Err(CliError::Invalid("r_max must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form; `parse(emit(s)) == s`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("dim = {}\n", self.dim));
        let boxes: Vec<String> = self.chart_box.iter().map(|(lo, hi)| format!("{lo}..{hi}")).collect();
        out.push_str(&format!("chart_box = {}\n", boxes.join(", ")));
        out.push_str(&format!("volume = {}\n", self.volume));
        match &self.metric {
            MetricMode::FrameOrthonormal => out.push_str("metric = frame_orthonormal\n"),
            MetricMode::Scaled(s) => {
                let s: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("metric = scaled({})\n", s.join(", ")));
            }
        }
        out.push_str(&format!("r_max = {}\n", self.r_max));
        for (i, e) in self.horizontal.iter().enumerate() {
            out.push_str(&format!("X{} = {e}\n", i + 1));
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.emit().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: SpecJson = serde_json::from_str(text)?;
        let parse_at = |s: &str, what: &str| parse_expr(s, 0, 1).map_err(|e| CliError::Invalid(format!("{what}: {e}")));
        let spec = ManifoldSpec {
            name: j.name,
            dim: j.dim,
            horizontal: j.horizontal.iter().enumerate().map(|(i, s)| parse_at(s, &format!("X{}", i + 1))).collect::<Result<_>>()?,
            chart_box: j.chart_box.unwrap_or_else(|| vec![[-10.0, 10.0]; j.dim]).into_iter().map(|[a, b]| (a, b)).collect(),
            volume: match j.volume {
                Some(v) => parse_at(&v, "volume")?,
                None => Expr::Num(1.0),
            },
            metric: match j.metric.as_deref() {
                None => MetricMode::FrameOrthonormal,
                Some(m) => parse_metric(m, 0, 1)?,
            },
            r_max: j.r_max.unwrap_or(0.5),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let metric = self.emit().lines().find_map(|l| l.strip_prefix("metric = ").map(str::to_string));
        let j = SpecJson {
            name: self.name.clone(),
            dim: self.dim,
            horizontal: self.horizontal.iter().map(|e| e.to_string()).collect(),
            chart_box: Some(self.chart_box.iter().map(|&(a, b)| [a, b]).collect()),
            volume: Some(self.volume.to_string()),
            metric,
            r_max: Some(self.r_max),
        };
        serde_json::to_string_pretty(&j).expect("serializable")
    }

    pub fn horizontal_fields(&self) -> Vec<VectorField<f64>> {
        self.horizontal.iter().map(|e| e.to_field(self.dim).expect("validated")).collect()
    }

    pub fn volume_form(&self) -> VolumeForm {
        VolumeForm::new(self.volume.to_poly(self.dim).expect("validated"))
    }

    pub fn chart(&self) -> ChartBox {
        ChartBox { lo: self.chart_box.iter().map(|b| b.0).collect(), hi: self.chart_box.iter().map(|b| b.1).collect() }
    }

    /// Privileged frame at `base`, carrying the spec's metric extension.
    pub fn frame_at(&self, base: &[f64]) -> Result<Frame> {
        let mut frame = build_privileged_frame(&self.horizontal_fields(), &MetricExtension::FrameOrthonormal, base).context("building the privileged frame")?;
        if let MetricMode::Scaled(s) = &self.metric {
            let inv = frame_inverse_polys(&frame).context("inverting the frame")?;
            frame.metric = MetricExtension::scaled_frame(&inv, s);
        }
        Ok(frame)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    name: String,
    dim: usize,
    horizontal: Vec<String>,
    #[serde(default)]
    chart_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    volume: Option<String>,
    #[serde(default)]
    metric: Option<String>,
    #[serde(default)]
    r_max: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEIS: &str = "name = h\ndim = 3\n# comment\nX1 = d1 - 0.5*x2*d3\nX2 = d2 + 0.5*x1*d3\n";

    #[test]
    fn parses_and_round_trips() {
        let s = ManifoldSpec::parse(HEIS).unwrap();
        assert_eq!(s.horizontal.len(), 2);
        assert_eq!(ManifoldSpec::parse(&s.emit()).unwrap(), s);
        assert_eq!(ManifoldSpec::parse(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn empty_horizontal_list_is_rejected() {
        let e = ManifoldSpec::parse("name = a\ndim = 2\n").unwrap_err();
        assert!(e.to_string().contains("at least one horizontal field"));
    }

    #[test]
    fn errors_point_at_the_offending_line() {
        let e = ManifoldSpec::parse("dim = 3\nX1 = d1 + x2/2\n").unwrap_err();
        match e {
            CliError::Parse(p) => assert_eq!((p.line, p.col, p.kind), (2, 13, ParseErrorKind::NonPolynomial)),
            other => panic!("{other}"),
        }
        let e = ManifoldSpec::parse("dim = 2\nX1 = d1 + x3*d2\n").unwrap_err();
        assert!(matches!(e, CliError::Parse(ParseError { kind: ParseErrorKind::DimensionMismatch, .. })));
    }

    #[test]
    fn hash_tracks_the_chart_box() {
        let a = ManifoldSpec::parse(HEIS).unwrap();
        let mut b = a.clone();
        b.chart_box[0].1 = 5.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ManifoldSpec::parse(HEIS).unwrap().hash());
    }
}
