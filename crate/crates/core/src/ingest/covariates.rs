use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::IngestError;

const RANGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    /// Land-cover fraction; the classes of one cell sum to at most 1.
    Compositional,
    /// Any other covariate pre-scaled to `[0, 1]`.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateInfo {
    pub name: String,
    pub kind: CovariateKind,
    /// Original-scale value mapped to 0.
    pub original_min: f64,
    /// Original-scale value mapped to 1.
    pub original_max: f64,
}

impl CovariateInfo {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Continuous,
            original_min: 0.0,
            original_max: 1.0,
        }
    }

    pub fn back_transform(&self, scaled: f64) -> f64 {
        self.original_min + scaled * (self.original_max - self.original_min)
    }
}

/// How to interpret the columns of a covariates file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovariateOptions {
    /// Columns to ignore.
    pub drop: Vec<String>,
    /// Columns that are land-cover fractions.
    pub compositional: Vec<String>,
    /// Dominant land-cover class left out of the design; dropped if present.
    pub reference_class: Option<String>,
    /// Original `[min, max]` per column for back-transformation.
    pub scales: BTreeMap<String, [f64; 2]>,
}

/// Per-site coordinates and occupancy covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteTable {
    pub lon: Vec<f64>,
    pub lat: Vec<f64>,
    /// Row-major `S × K`.
    pub covariates: Vec<f64>,
    pub info: Vec<CovariateInfo>,
    pub reference_class: Option<String>,
}

impl SiteTable {
    pub fn new(
        lon: Vec<f64>,
        lat: Vec<f64>,
        covariates: Vec<f64>,
        info: Vec<CovariateInfo>,
    ) -> Result<Self, IngestError> {
        if lon.len() != lat.len() || covariates.len() != lon.len() * info.len() {
            return Err(IngestError::Covariates("inconsistent site table dimensions".into()));
        }
        if lon.iter().chain(&lat).any(|c| !(c.abs() <= 1.0 + RANGE_TOLERANCE)) {
            return Err(IngestError::Covariates("scaled coordinates outside [-1, 1]".into()));
        }
        if covariates
            .iter()
            .any(|v| !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(v))
        {
            return Err(IngestError::Covariates("covariate outside [0, 1]".into()));
        }
        Ok(Self {
            lon,
            lat,
            covariates,
            info,
            reference_class: None,
        })
    }

    /// Sites for every grid cell, no covariates.
    pub fn from_grid(grid: &GridSpec) -> Self {
        let (lon, lat) = (0..grid.n_cells()).map(|s| grid.scaled_centroid(s)).unzip();
        Self {
            lon,
            lat,
            covariates: Vec::new(),
            info: Vec::new(),
            reference_class: None,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.lon.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.info.len()
    }

    pub fn row(&self, site: usize) -> &[f64] {
        let k = self.n_covariates();
        &self.covariates[site * k..(site + 1) * k]
    }

    pub fn means(&self) -> Vec<f64> {
        let k = self.n_covariates();
        let mut m = vec![0.0; k];
        if self.n_sites() == 0 {
            return m;
        }
        for s in 0..self.n_sites() {
            for (mj, v) in m.iter_mut().zip(self.row(s)) {
                *mj += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n_sites() as f64);
        m
    }
}

/// Reads `site_id,cov_1,...,cov_K` for every cell of `grid`.
///
/// Values must lie in `[0, 1]`; values within `1e-9` of the range are
/// clamped, anything further out is an error. A missing or duplicate site
/// row is fatal.
pub fn load_site_covariates<R: Read>(
    reader: R,
    grid: &GridSpec,
    opts: &CovariateOptions,
) -> Result<SiteTable, IngestError> {
    let n_sites = grid.n_cells();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let site_col = headers
        .iter()
        .position(|h| h.trim() == "site_id")
        .ok_or_else(|| IngestError::MissingColumn("site_id".into()))?;

    let keep: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| {
            let h = h.trim();
            *i != site_col
                && !opts.drop.iter().any(|d| d == h)
                && opts.reference_class.as_deref() != Some(h)
        })
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let k = keep.len();

    let mut values = vec![f64::NAN; n_sites * k];
    let mut seen = vec![false; n_sites];
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row_no + 2;
        let raw_id = rec.get(site_col).unwrap_or("").trim();
        let site: usize = raw_id
            .parse()
            .map_err(|_| IngestError::Covariates(format!("line {line}: bad site id `{raw_id}`")))?;
        if site >= n_sites {
            return Err(IngestError::Covariates(format!(
                "line {line}: site {site} outside grid of {n_sites} cells"
            )));
        }
        if std::mem::replace(&mut seen[site], true) {
            return Err(IngestError::Covariates(format!("line {line}: duplicate site {site}")));
        }
        for (j, (col, name)) in keep.iter().enumerate() {
            let raw = rec.get(*col).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                IngestError::Covariates(format!("line {line}: `{name}` value `{raw}` is not a number"))
            })?;
            if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v) {
                return Err(IngestError::Covariates(format!(
                    "line {line}: `{name}` value {v} outside [0, 1]"
                )));
            }
            values[site * k + j] = v.clamp(0.0, 1.0);
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(IngestError::Covariates(format!("missing row for site {missing}")));
    }

    let info = keep
        .iter()
        .map(|(_, name)| {
            let kind = if opts.compositional.iter().any(|c| c == name) {
                CovariateKind::Compositional
            } else {
                CovariateKind::Continuous
            };
            let [lo, hi] = opts.scales.get(name).copied().unwrap_or([0.0, 1.0]);
            CovariateInfo {
                name: name.clone(),
                kind,
                original_min: lo,
                original_max: hi,
            }
        })
        .collect();
    let mut table = SiteTable::from_grid(grid);
    table.covariates = values;
    table.info = info;
    table.reference_class = opts.reference_class.clone();
    Ok(table)
}
