//! Nearest-rank percentiles over token counts.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::report::render_table;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PercentilePoint {
    /// 1..=100
    P(u8),
    Max,
}

impl fmt::Display for PercentilePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PercentilePoint::P(p) => write!(f, "P{p}"),
            PercentilePoint::Max => f.write_str("Max"),
        }
    }
}

impl Serialize for PercentilePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PercentilePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for PercentilePoint {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("max") {
            return Ok(PercentilePoint::Max);
        }
        let digits = t.strip_prefix(['P', 'p']).unwrap_or(t);
        match digits.parse::<u8>() {
            Ok(p) if (1..=100).contains(&p) => Ok(PercentilePoint::P(p)),
            _ => Err(EvalError::Percentile(format!("bad percentile point {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PercentileSpec {
    pub points: Vec<PercentilePoint>,
}

impl Default for PercentileSpec {
    fn default() -> Self {
        use PercentilePoint::*;
        Self {
            points: vec![P(50), P(75), P(80), P(85), P(90), P(95), P(99), Max],
        }
    }
}

impl PercentileSpec {
    pub fn new(points: Vec<PercentilePoint>) -> Result<Self, EvalError> {
        if points.is_empty() {
            return Err(EvalError::Percentile("no percentile points".into()));
        }
        if let Some(PercentilePoint::P(p)) = points.iter().find(|p| matches!(p, PercentilePoint::P(0) | PercentilePoint::P(101..)))
        {
            return Err(EvalError::Percentile(format!("P{p} outside (0,100]")));
        }
        Ok(Self { points })
    }
}

/// Value at 1-based position ⌈p·n/100⌉ of the sorted list; `Max` is the last.
pub fn token_percentiles(values: &[u64], spec: &PercentileSpec) -> Result<BTreeMap<PercentilePoint, u64>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Percentile("no values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Ok(spec
        .points
        .iter()
        .map(|&point| {
            let rank = match point {
                PercentilePoint::P(p) => (p as usize * n).div_ceil(100).max(1),
                PercentilePoint::Max => n,
            };
            (point, sorted[rank - 1])
        })
        .collect())
}

/// Percentile rows per named field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileTable {
    pub spec: PercentileSpec,
    pub rows: Vec<(String, BTreeMap<PercentilePoint, u64>)>,
}

fn thousands(v: u64) -> String {
    let digits = v.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl PercentileTable {
    pub fn build(spec: PercentileSpec, fields: &[(String, Vec<u64>)]) -> Result<Self, EvalError> {
        let rows = fields
            .iter()
            .map(|(name, values)| {
                token_percentiles(values, &spec)
                    .map(|r| (name.clone(), r))
                    .map_err(|e| EvalError::Percentile(format!("{name}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { spec, rows })
    }

    pub fn to_text(&self) -> String {
        let mut header = vec!["Field".to_string()];
        header.extend(self.spec.points.iter().map(|p| p.to_string()));
        let mut rows = vec![header];
        for (name, values) in &self.rows {
            let mut row = vec![name.clone()];
            row.extend(self.spec.points.iter().map(|p| thousands(values[p])));
            rows.push(row);
        }
        render_table(&rows)
    }

    /// One JSON object per field, point names as keys.
    pub fn to_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|(name, values)| {
                let mut obj = serde_json::Map::new();
                obj.insert("field".into(), name.clone().into());
                for p in &self.spec.points {
                    obj.insert(p.to_string(), values[p].into());
                }
                serde_json::Value::Object(obj).to_string() + "\n"
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // smallest value whose cumulative count reaches p% of n
    fn oracle(values: &[u64], p: u8) -> u64 {
        let mut v = values.to_vec();
        v.sort();
        let n = v.len() as u64;
        *v.iter()
            .find(|&&x| 100 * v.iter().filter(|&&y| y <= x).count() as u64 >= p as u64 * n)
            .unwrap()
    }

    #[test]
    fn examples() {
        let r = token_percentiles(&[4, 1, 3, 2], &PercentileSpec::default()).unwrap();
        assert_eq!(r[&PercentilePoint::P(50)], 2);
        assert_eq!(r[&PercentilePoint::P(75)], 3);
        assert_eq!(r[&PercentilePoint::Max], 4);
        assert!(token_percentiles(&[], &PercentileSpec::default()).is_err());
        let same = token_percentiles(&[7; 9], &PercentileSpec::default()).unwrap();
        assert!(same.values().all(|&v| v == 7));
        assert!(PercentileSpec::new(vec![PercentilePoint::P(0)]).is_err());
        assert_eq!("p95".parse::<PercentilePoint>().unwrap(), PercentilePoint::P(95));
        assert_eq!(thousands(2_700_242), "2,700,242");
        assert_eq!(thousands(976), "976");
    }

    #[test]
    fn table_layout() {
        let t = PercentileTable::build(PercentileSpec::default(), &[("Input Text".into(), (1..=20_000).collect())]).unwrap();
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        let head: Vec<&str> = lines[0].split('|').map(str::trim).collect();
        assert_eq!(head, ["Field", "P50", "P75", "P80", "P85", "P90", "P95", "P99", "Max"]);
        let row: Vec<&str> = lines[2].split('|').map(str::trim).collect();
        assert_eq!(row, ["Input Text", "10,000", "15,000", "16,000", "17,000", "18,000", "19,000", "19,800", "20,000"]);
        let json: serde_json::Value = serde_json::from_str(t.to_jsonl().trim()).unwrap();
        assert_eq!((json["field"].as_str(), json["P99"].as_u64(), json["Max"].as_u64()), (Some("Input Text"), Some(19_800), Some(20_000)));
    }

    proptest! {
        #[test]
        fn matches_oracle(values in proptest::collection::vec(0u64..1000, 1..200)) {
            let r = token_percentiles(&values, &PercentileSpec::default()).unwrap();
            for (point, v) in r {
                let expect = match point {
                    PercentilePoint::P(p) => oracle(&values, p),
                    PercentilePoint::Max => *values.iter().max().unwrap(),
                };
                prop_assert_eq!(v, expect);
            }
        }
    }
}
