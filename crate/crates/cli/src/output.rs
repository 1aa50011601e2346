//! Result rows and their CSV and JSON encodings.

use std::f64::consts::{LN_10, LN_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use mrd::Error;

/// Display base for logarithmic quantities. Internal values are nats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    E,
    Ten,
}

impl LogBase {
    pub fn display(self, nats: f64) -> f64 {
        match self {
            LogBase::Two => nats / LN_2,
            LogBase::E => nats,
            LogBase::Ten => nats / LN_10,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Two => "bits",
            LogBase::E => "nats",
            LogBase::Ten => "dits",
        }
    }
}

impl FromStr for LogBase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            "10" => Ok(LogBase::Ten),
            _ => Err(format!("log base must be 2, e or 10, got '{s}'")),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Two => "2",
            LogBase::E => "e",
            LogBase::Ten => "10",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub const COLUMNS: [&str; 11] = [
    "family",
    "d",
    "n",
    "p",
    "q",
    "alpha",
    "class",
    "kind",
    "value_nats",
    "value_display",
    "status",
];

/// One output line. Missing parameters are empty in CSV and null in JSON;
/// +∞ is written as `inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub family: String,
    pub d: usize,
    pub n: usize,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: String,
    pub class: String,
    pub kind: String,
    #[serde(with = "ext_f64")]
    pub value_nats: f64,
    #[serde(with = "ext_f64")]
    pub value_display: f64,
    pub status: String,
}

/// Finite values as numbers, `inf` and `NaN` as strings.
mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(t) => t.parse().map_err(|_| serde::de::Error::custom(format!("bad number '{t}'"))),
        }
    }
}

impl Row {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        family: impl Into<String>,
        d: usize,
        n: usize,
        p: Option<f64>,
        q: Option<f64>,
        alpha: impl Into<String>,
        class: impl Into<String>,
        kind: impl Into<String>,
        value_nats: f64,
        status: impl Into<String>,
        base: LogBase,
    ) -> Self {
        Self {
            family: family.into(),
            d,
            n,
            p,
            q,
            alpha: alpha.into(),
            class: class.into(),
            kind: kind.into(),
            value_nats,
            value_display: base.display(value_nats),
            status: status.into(),
        }
    }

    fn alpha_key(&self) -> f64 {
        self.alpha.parse::<f64>().unwrap_or(f64::INFINITY)
    }

    fn family_code(&self) -> &str {
        self.family.split([':', '/']).next().unwrap_or("")
    }

    /// Canonical order: family code, d, n, p, q, α, family, class, kind.
    pub fn sort(rows: &mut [Row]) {
        let key = |o: Option<f64>| o.unwrap_or(f64::NEG_INFINITY);
        rows.sort_by(|a, b| {
            a.family_code()
                .cmp(b.family_code())
                .then(a.d.cmp(&b.d))
                .then(a.n.cmp(&b.n))
                .then(key(a.p).total_cmp(&key(b.p)))
                .then(key(a.q).total_cmp(&key(b.q)))
                .then(a.alpha_key().total_cmp(&b.alpha_key()))
                .then(a.family.cmp(&b.family))
                .then(a.class.cmp(&b.class))
                .then(a.kind.cmp(&b.kind))
        });
    }
}

pub fn to_csv(rows: &[Row]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(COLUMNS).map_err(|e| Error::Parse(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>, Error> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|x| x.map_err(|e| Error::Parse(e.to_string()))).collect()
}

pub fn to_json(rows: &[Row]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

pub fn parse_json(text: &str) -> Result<Vec<Row>, Error> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(rows: &[Row], format: Format) -> Result<String, Error> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => Ok(to_json(rows) + "\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Row> {
        vec![
            Row::new("phi/phi-perp", 2, 1, None, None, "2", "PPT", "upper", 3f64.ln(), "converged", LogBase::Two),
            Row::new("iso:1/iso:0.25", 2, 1, Some(1.0), Some(0.25), "inf", "ALL", "exact", f64::INFINITY, "closedform", LogBase::E),
        ]
    }

    #[test]
    fn bits_are_nats_over_ln2() {
        let r = &sample()[0];
        assert_eq!(r.value_display, r.value_nats / LN_2);
        assert!((r.value_display - 3f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let rows = sample();
        let text = to_csv(&rows).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn json_round_trip() {
        let rows = sample();
        let text = to_json(&rows);
        assert!(text.contains("\"inf\""));
        assert!(text.find("\"family\"").unwrap() < text.find("\"status\"").unwrap());
        assert_eq!(parse_json(&text).unwrap(), rows);
    }

    #[test]
    fn empty_csv_has_header() {
        assert_eq!(to_csv(&[]).unwrap().trim(), COLUMNS.join(","));
    }

    #[test]
    fn canonical_sort() {
        let mut rows = sample();
        rows.reverse();
        rows.push(Row::new("iso:1/iso:0.25", 2, 1, Some(1.0), Some(0.25), "0.5", "ALL", "exact", 0.1, "closedform", LogBase::E));
        Row::sort(&mut rows);
        assert_eq!(rows[0].alpha, "0.5");
        assert_eq!(rows[1].alpha, "inf");
        assert_eq!(rows[2].family, "phi/phi-perp");
    }
}
