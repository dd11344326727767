//! Opinion vectors as CSV `node_id,value`.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fj::OpinionVector;
use crate::graph::IdMap;

/// `x -> scale * x + offset`, applied when source opinions leave `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub scale: f64,
    pub offset: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        scale: 1.0,
        offset: 0.0,
    };

    /// The map sending `[lo, hi]` onto `[0, 1]`.
    pub fn unit_interval(lo: f64, hi: f64) -> Self {
        if hi > lo {
            let scale = 1.0 / (hi - lo);
            Self {
                scale,
                offset: -lo * scale,
            }
        } else {
            // degenerate range: every value maps to 0.5
            Self {
                scale: 0.0,
                offset: 0.5,
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (self.scale * x + self.offset).clamp(0.0, 1.0)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

impl fmt::Display for AffineMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x -> {} * x + {}", self.scale, self.offset)
    }
}

/// Opinions read from CSV, ordered by internal id.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedOpinions {
    pub values: OpinionVector,
    pub map: AffineMap,
}

fn read_rows(text: &str) -> Result<Vec<(usize, i64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let id: i64 = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad node id `{}`", &record[0]),
        })?;
        let value: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad value `{}`", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: "value is not finite".into(),
            });
        }
        rows.push((line, id, value));
    }
    Ok(rows)
}

/// The node ids listed in a `node_id,value` CSV.
pub fn read_csv_ids(text: &str) -> Result<IdMap> {
    Ok(IdMap::from_ids(read_rows(text)?.into_iter().map(|(_, id, _)| id)))
}

/// Read `node_id,value` rows into internal-id order without range checks.
///
/// Every node of `ids` must appear exactly once.
pub fn read_value_csv(text: &str, ids: &IdMap) -> Result<Vec<f64>> {
    let mut raw: Vec<Option<f64>> = vec![None; ids.len()];
    for (_, id, value) in read_rows(text)? {
        let internal = ids
            .internal(id)
            .ok_or_else(|| Error::validation(format!("node {id} is not in the graph")))?;
        if raw[internal].replace(value).is_some() {
            return Err(Error::validation(format!("node {id} listed twice")));
        }
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::validation(format!("node {} has no value", ids.original(i)))))
        .collect()
}

/// Read `node_id,value` rows keyed by original node ids.
///
/// Every node of `ids` must appear exactly once. Values outside `[0, 1]` are
/// rescaled onto it when `rescale` is set and rejected otherwise.
pub fn read_opinion_csv(text: &str, ids: &IdMap, rescale: bool) -> Result<LoadedOpinions> {
    let values = read_value_csv(text, ids)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let map = if values.is_empty() || (lo >= 0.0 && hi <= 1.0) {
        AffineMap::IDENTITY
    } else if rescale {
        AffineMap::unit_interval(lo, hi)
    } else {
        return Err(Error::validation(format!(
            "opinions span [{lo}, {hi}], outside [0, 1]"
        )));
    };
    let values = if map.is_identity() {
        values
    } else {
        values.into_iter().map(|x| map.apply(x)).collect()
    };
    Ok(LoadedOpinions {
        values: OpinionVector::innate(values)?,
        map,
    })
}

/// Write `node_id,value` rows using original ids.
pub fn write_opinion_csv(values: &OpinionVector, ids: &IdMap) -> String {
    let mut out = String::from("node_id,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", ids.original(i), v);
    }
    out
}
