//! CSV forms of the prepared tables.
//!
//! visits: `site,year,week,observer_token,ll_class,y`;
//! presence: `site,year,a` (every site-year);
//! sites: `site_id,lon,lat,<covariates...>` plus a JSON sidecar with covariate metadata;
//! sightings: `observer,species,date,x,y,validated,countable`, the default column map.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ConfirmedPresence, CovariateInfo, ListLengthClass, Sighting, SiteTable, Visit};
use crate::IngestError;

#[derive(Serialize, Deserialize)]
struct VisitRow {
    site: usize,
    year: i32,
    week: u8,
    observer_token: String,
    ll_class: ListLengthClass,
    y: u8,
}

pub fn write_visits<W: Write>(w: W, visits: &[Visit]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    if visits.is_empty() {
        wtr.write_record(["site", "year", "week", "observer_token", "ll_class", "y"])?;
    }
    for v in visits {
        wtr.serialize(VisitRow {
            site: v.site,
            year: v.year,
            week: v.week,
            observer_token: v.observer.clone(),
            ll_class: v.list_length,
            y: v.y as u8,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_visits<R: Read>(r: R) -> Result<Vec<Visit>, IngestError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: VisitRow = row?;
        if !(1..=53).contains(&row.week) || row.y > 1 {
            return Err(IngestError::Contract(format!(
                "visit row with week {} and y {}",
                row.week, row.y
            )));
        }
        out.push(Visit {
            site: row.site,
            year: row.year,
            week: row.week,
            observer: row.observer_token,
            list_length: row.ll_class,
            y: row.y == 1,
        });
    }
    Ok(out)
}

/// Writes sightings under the default column names.
pub fn write_sightings<W: Write>(w: W, sightings: &[Sighting]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["observer", "species", "date", "x", "y", "validated", "countable"])?;
    for s in sightings {
        wtr.write_record([
            s.observer_id.clone(),
            s.species_id.clone(),
            s.date.format("%Y-%m-%d").to_string(),
            s.x.to_string(),
            s.y.to_string(),
            (s.validated as u8).to_string(),
            (s.countable as u8).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a covariates file in the layout [`super::load_site_covariates`] reads.
pub fn write_covariates<W: Write>(w: W, sites: &SiteTable) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["site_id".to_string()];
    header.extend(sites.info.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    for s in 0..sites.n_sites() {
        let mut rec = vec![s.to_string()];
        rec.extend(sites.row(s).iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PresenceRow {
    site: usize,
    year: i32,
    a: u8,
}

pub fn write_presence<W: Write>(w: W, a: &ConfirmedPresence) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    if a.n_sites * a.n_years == 0 {
        wtr.write_record(["site", "year", "a"])?;
    }
    for s in 0..a.n_sites {
        for t in 0..a.n_years {
            wtr.serialize(PresenceRow {
                site: s,
                year: a.first_year + t as i32,
                a: a.get_idx(s, t) as u8,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_presence<R: Read>(
    r: R,
    n_sites: usize,
    first_year: i32,
    n_years: usize,
) -> Result<ConfirmedPresence, IngestError> {
    let mut a = ConfirmedPresence::new(n_sites, n_years, first_year);
    let mut rdr = csv::Reader::from_reader(r);
    for row in rdr.deserialize() {
        let row: PresenceRow = row?;
        if row.a == 1 {
            a.set(row.site, row.year)?;
        }
    }
    Ok(a)
}

#[derive(Serialize, Deserialize)]
struct SiteMeta {
    info: Vec<CovariateInfo>,
    reference_class: Option<String>,
}

pub fn write_sites<W: Write, M: Write>(w: W, meta: M, sites: &SiteTable) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["site_id".to_string(), "lon".into(), "lat".into()];
    header.extend(sites.info.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    for s in 0..sites.n_sites() {
        let mut rec = vec![s.to_string(), sites.lon[s].to_string(), sites.lat[s].to_string()];
        rec.extend(sites.row(s).iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    serde_json::to_writer_pretty(
        meta,
        &SiteMeta {
            info: sites.info.clone(),
            reference_class: sites.reference_class.clone(),
        },
    )
    .map_err(|e| IngestError::Io(e.into()))?;
    Ok(())
}

pub fn read_sites<R: Read, M: Read>(r: R, meta: M) -> Result<SiteTable, IngestError> {
    let meta: SiteMeta = serde_json::from_reader(meta).map_err(|e| IngestError::Io(e.into()))?;
    let k = meta.info.len();
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() != 3 + k {
        return Err(IngestError::Covariates(format!(
            "sites file has {} columns, metadata lists {k} covariates",
            headers.len()
        )));
    }
    let (mut lon, mut lat, mut cov) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64, IngestError> {
            rec.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| IngestError::Covariates(format!("sites row {}: bad column {j}", i + 2)))
        };
        if num(0)? as usize != i {
            return Err(IngestError::Covariates(format!("sites row {} out of order", i + 2)));
        }
        lon.push(num(1)?);
        lat.push(num(2)?);
        for j in 0..k {
            cov.push(num(3 + j)?);
        }
    }
    let mut t = SiteTable::new(lon, lat, cov, meta.info)?;
    t.reference_class = meta.reference_class;
    Ok(t)
}
