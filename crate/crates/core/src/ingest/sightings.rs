use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::IngestError;

/// One raw record: who saw what, where and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sighting {
    pub observer_id: String,
    pub species_id: String,
    pub date: NaiveDate,
    /// Projected easting in meters.
    pub x: f64,
    /// Projected northing in meters.
    pub y: f64,
    /// Expert-approved evidence (photo, circumstantial).
    pub validated: bool,
    /// Living adult; only these count as positive detections.
    pub countable: bool,
}

/// Header names of the sightings CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub observer: String,
    pub species: String,
    pub date: String,
    pub x: String,
    pub y: String,
    pub validated: String,
    pub countable: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            observer: "observer".into(),
            species: "species".into(),
            date: "date".into(),
            x: "x".into(),
            y: "y".into(),
            validated: "validated".into(),
            countable: "countable".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based line in the source file (header is line 1).
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedSightings {
    pub sightings: Vec<Sighting>,
    pub errors: Vec<RowError>,
}

struct ColumnIndex {
    observer: usize,
    species: usize,
    date: usize,
    x: usize,
    y: usize,
    validated: usize,
    countable: usize,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self, IngestError> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        Ok(Self {
            observer: find(&map.observer)?,
            species: find(&map.species)?,
            date: find(&map.date)?,
            x: find(&map.x)?,
            y: find(&map.y)?,
            validated: find(&map.validated)?,
            countable: find(&map.countable)?,
        })
    }
}

fn parse_flag(raw: &str) -> Result<bool, String> {
    match raw.trim() {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(format!("expected 0/1 flag, got `{other}`")),
    }
}

fn parse_coord(raw: &str, what: &str) -> Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("unparseable {what} coordinate `{}`", raw.trim()))?;
    if !v.is_finite() {
        return Err(format!("non-finite {what} coordinate"));
    }
    Ok(v)
}

fn parse_row(rec: &csv::StringRecord, idx: &ColumnIndex) -> Result<Sighting, String> {
    let field = |i: usize| rec.get(i).unwrap_or("");
    let observer_id = field(idx.observer).trim().to_string();
    if observer_id.is_empty() {
        return Err("empty observer id".into());
    }
    let species_id = field(idx.species).trim().to_string();
    if species_id.is_empty() {
        return Err("empty species id".into());
    }
    let date = NaiveDate::parse_from_str(field(idx.date).trim(), "%Y-%m-%d")
        .map_err(|e| format!("invalid date `{}`: {e}", field(idx.date).trim()))?;
    Ok(Sighting {
        observer_id,
        species_id,
        date,
        x: parse_coord(field(idx.x), "x")?,
        y: parse_coord(field(idx.y), "y")?,
        validated: parse_flag(field(idx.validated))?,
        countable: parse_flag(field(idx.countable))?,
    })
}

/// Parses a delimited sightings file with a header row.
///
/// A missing column is fatal. Rows that fail to parse are reported in
/// [`ParsedSightings::errors`] with their line number and do not produce a
/// sighting.
pub fn parse_sightings<R: Read>(reader: R, map: &ColumnMap) -> Result<ParsedSightings, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = ColumnIndex::resolve(&headers, map)?;

    let mut out = ParsedSightings::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        match rec {
            Ok(rec) => match parse_row(&rec, &idx) {
                Ok(s) => out.sightings.push(s),
                Err(message) => out.errors.push(RowError { line, message }),
            },
            Err(e) => out.errors.push(RowError {
                line,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "observer,species,date,x,y,validated,countable\n";

    #[test]
    fn two_valid_rows() {
        let data = format!("{HEADER}o1,A,2015-06-01,100,200,0,1\no2,B,2016-07-02,150.5,-3,1,0\n");
        let parsed = parse_sightings(data.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(parsed.sightings.len(), 2);
        assert!(parsed.errors.is_empty());
        assert!(parsed.sightings[1].validated);
        assert!(!parsed.sightings[1].countable);
    }

    #[test]
    fn invalid_calendar_date_is_a_row_error() {
        let data = format!("{HEADER}o1,A,2025-13-40,100,200,0,1\n");
        let parsed = parse_sightings(data.as_bytes(), &ColumnMap::default()).unwrap();
        assert!(parsed.sightings.is_empty());
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 2);
    }

    #[test]
    fn empty_body() {
        let parsed = parse_sightings(HEADER.as_bytes(), &ColumnMap::default()).unwrap();
        assert!(parsed.sightings.is_empty());
        assert!(parsed.errors.is_empty());
    }

    #[test]
    fn missing_column_is_fatal() {
        let data = "observer,species,date,x,y,validated\n";
        let err = parse_sightings(data.as_bytes(), &ColumnMap::default()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "countable"));
    }

    #[test]
    fn custom_mapping_and_bad_coordinate() {
        let map = ColumnMap {
            observer: "user".into(),
            ..ColumnMap::default()
        };
        let data = "user,species,date,x,y,validated,countable\nu,A,2015-01-01,abc,1,0,1\nu,A,2015-01-01,1,1,0,1\n";
        let parsed = parse_sightings(data.as_bytes(), &map).unwrap();
        assert_eq!(parsed.sightings.len(), 1);
        assert_eq!(parsed.errors.len(), 1);
    }

    #[test]
    fn empty_ids_rejected() {
        let data = format!("{HEADER},A,2015-06-01,1,2,0,1\no,,2015-06-01,1,2,0,1\n");
        let parsed = parse_sightings(data.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(parsed.errors.len(), 2);
    }
}
