//! Plot-ready CSV forms of the posterior summaries.

use std::io::Write;

use super::{
    ClassDetection, CovariateEffect, CovariateSupport, ObserverDetection, PhenologyCurve, SiteSummary,
    SlopeSummary, Summary, TrendSeries, INTERVAL_LABELS, MAP_LABELS,
};
use crate::ingest::{CovariateKind, SiteTable};
use crate::PosteriorError;

fn header(lead: &[&str], labels: &[&str]) -> Vec<String> {
    lead.iter()
        .copied()
        .chain(["mean", "sd"])
        .chain(labels.iter().copied())
        .map(String::from)
        .collect()
}

/// Column names of every file, keyed by the file stem.
pub fn occupancy_map_header() -> Vec<String> {
    header(&["site_id", "lon", "lat"], &MAP_LABELS)
}

pub fn trend_header() -> Vec<String> {
    header(&["region", "year"], &INTERVAL_LABELS)
}

pub fn phenology_header() -> Vec<String> {
    let mut h = header(&["week"], &INTERVAL_LABELS);
    h.push("is_peak".into());
    h
}

pub fn observers_header() -> Vec<String> {
    vec!["observer_token".into(), "mean_detection".into()]
}

pub fn list_length_header() -> Vec<String> {
    header(&["ll_class"], &INTERVAL_LABELS)
}

pub fn covariate_effects_header() -> Vec<String> {
    header(&["covariate", "kind", "value", "original_value"], &INTERVAL_LABELS)
}

pub fn trend_slopes_header() -> Vec<String> {
    ["site_id", "lon", "lat", "mean", "sd", "p_positive"]
        .map(String::from)
        .to_vec()
}

pub fn covariate_support_header() -> Vec<String> {
    vec!["covariate".into(), "p_positive".into()]
}

fn stats(s: &Summary) -> impl Iterator<Item = String> + '_ {
    [s.mean, s.sd]
        .into_iter()
        .chain(s.quantiles.iter().copied())
        .map(|v| v.to_string())
}

fn finish<W: Write>(mut wtr: csv::Writer<W>) -> Result<(), PosteriorError> {
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_occupancy_map<W: Write>(w: W, sites: &SiteTable, map: &[SiteSummary]) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(occupancy_map_header())?;
    for r in map {
        let mut rec = vec![r.site.to_string(), sites.lon[r.site].to_string(), sites.lat[r.site].to_string()];
        rec.extend(stats(&r.summary));
        wtr.write_record(&rec)?;
    }
    finish(wtr)
}

pub fn write_trend<W: Write>(w: W, trend: &TrendSeries) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(trend_header())?;
    for (year, s) in trend.years.iter().zip(&trend.summaries) {
        let mut rec = vec![trend.region.clone(), year.to_string()];
        rec.extend(stats(s));
        wtr.write_record(&rec)?;
    }
    finish(wtr)
}

pub fn write_phenology<W: Write>(w: W, curve: &PhenologyCurve) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(phenology_header())?;
    for (i, s) in curve.weeks.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(stats(s));
        rec.push(((i + 1 == curve.peak_week) as u8).to_string());
        wtr.write_record(&rec)?;
    }
    finish(wtr)
}

pub fn write_observers<W: Write>(w: W, observers: &[ObserverDetection]) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(observers_header())?;
    for o in observers {
        wtr.write_record([o.observer.clone(), o.mean.to_string()])?;
    }
    finish(wtr)
}

pub fn write_list_length<W: Write>(w: W, classes: &[ClassDetection]) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(list_length_header())?;
    for c in classes {
        let mut rec = vec![c.class.label().to_string()];
        rec.extend(stats(&c.summary));
        wtr.write_record(&rec)?;
    }
    finish(wtr)
}

pub fn write_covariate_effects<W: Write>(w: W, effects: &[CovariateEffect]) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(covariate_effects_header())?;
    for e in effects {
        let kind = match e.kind {
            CovariateKind::Compositional => "compositional",
            CovariateKind::Continuous => "continuous",
        };
        for p in &e.points {
            let mut rec = vec![
                e.covariate.clone(),
                kind.to_string(),
                p.value.to_string(),
                p.original_value.to_string(),
            ];
            rec.extend(stats(&p.summary));
            wtr.write_record(&rec)?;
        }
    }
    finish(wtr)
}

pub fn write_trend_slopes<W: Write>(w: W, sites: &SiteTable, slopes: &[SlopeSummary]) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(trend_slopes_header())?;
    for s in slopes {
        wtr.write_record([
            s.site.to_string(),
            sites.lon[s.site].to_string(),
            sites.lat[s.site].to_string(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.p_positive.to_string(),
        ])?;
    }
    finish(wtr)
}

pub fn write_covariate_support<W: Write>(w: W, support: &[CovariateSupport]) -> Result<(), PosteriorError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(covariate_support_header())?;
    for s in support {
        wtr.write_record([s.covariate.clone(), s.p_positive.to_string()])?;
    }
    finish(wtr)
}
