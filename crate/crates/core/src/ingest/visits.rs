use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GridSpec, Sighting, StudyWindow};
use crate::IngestError;

/// Categorised list length, the detection-effort covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ListLengthClass {
    #[serde(rename = "L1")]
    L1,
    #[serde(rename = "L2_3")]
    L2To3,
    #[serde(rename = "L4plus")]
    L4Plus,
}

impl ListLengthClass {
    pub const ALL: [ListLengthClass; 3] = [Self::L1, Self::L2To3, Self::L4Plus];

    pub fn index(self) -> usize {
        match self {
            Self::L1 => 0,
            Self::L2To3 => 1,
            Self::L4Plus => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::L1 => "L1",
            Self::L2To3 => "L2_3",
            Self::L4Plus => "L4plus",
        }
    }

    /// Indicator row of the detection design with `L1` as reference.
    pub fn design_row(self) -> [f64; 2] {
        match self {
            Self::L1 => [0.0, 0.0],
            Self::L2To3 => [1.0, 0.0],
            Self::L4Plus => [0.0, 1.0],
        }
    }
}

impl std::str::FromStr for ListLengthClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "L1" => Ok(Self::L1),
            "L2_3" => Ok(Self::L2To3),
            "L4plus" => Ok(Self::L4Plus),
            other => Err(format!("unknown list-length class `{other}`")),
        }
    }
}

/// Upper bounds of the two lower list-length classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListLengthCuts {
    pub single_max: u32,
    pub mid_max: u32,
}

impl Default for ListLengthCuts {
    fn default() -> Self {
        Self {
            single_max: 1,
            mid_max: 3,
        }
    }
}

impl ListLengthCuts {
    pub fn categorize(&self, count: u32) -> Result<ListLengthClass, IngestError> {
        if count == 0 {
            return Err(IngestError::Contract("list length must be at least 1".into()));
        }
        Ok(if count <= self.single_max {
            ListLengthClass::L1
        } else if count <= self.mid_max {
            ListLengthClass::L2To3
        } else {
            ListLengthClass::L4Plus
        })
    }
}

/// 1 species, 2-3 species, more than 3 species.
pub fn categorize_list_length(count: u32) -> Result<ListLengthClass, IngestError> {
    ListLengthCuts::default().categorize(count)
}

/// A pseudo-visit: one observer on one day in one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub site: usize,
    pub year: i32,
    /// 1..=53
    pub week: u8,
    /// Anonymised observer token.
    pub observer: String,
    pub list_length: ListLengthClass,
    pub y: bool,
}

/// `floor((day_of_year - 1) / 7) + 1`, always in 1..=53.
pub fn week_of_year(date: NaiveDate) -> u8 {
    ((date.ordinal() - 1) / 7 + 1) as u8
}

/// Stable opaque token for an observer id (first 16 hex digits of SHA-256).
pub fn observer_token(observer_id: &str) -> String {
    let digest = Sha256::digest(observer_id.as_bytes());
    hex::encode(&digest[..8])
}

/// Maps a calendar year to `[-0.5, 0.5]`.
pub fn scale_year(t: i32, t_min: i32, t_max: i32) -> Result<f64, IngestError> {
    if t_min >= t_max {
        return Err(IngestError::Contract(format!(
            "year range must satisfy t_min < t_max, got {t_min}..{t_max}"
        )));
    }
    if t < t_min || t > t_max {
        return Err(IngestError::Contract(format!(
            "year {t} outside {t_min}..={t_max}"
        )));
    }
    Ok((t - t_min) as f64 / (t_max - t_min) as f64 - 0.5)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObserverStreams {
    pub proficient: BTreeSet<String>,
    pub other: BTreeSet<String>,
}

/// Splits observers by their total sighting count over the whole window.
pub fn split_observer_streams(
    sightings: &[Sighting],
    threshold: usize,
) -> Result<ObserverStreams, IngestError> {
    if threshold == 0 {
        return Err(IngestError::InvalidConfig(
            "proficiency threshold must be at least 1".into(),
        ));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sightings {
        *counts.entry(s.observer_id.as_str()).or_default() += 1;
    }
    let mut streams = ObserverStreams::default();
    for (obs, n) in counts {
        if n >= threshold {
            streams.proficient.insert(obs.to_string());
        } else {
            streams.other.insert(obs.to_string());
        }
    }
    Ok(streams)
}

/// Groups proficient observers' sightings into pseudo-visits.
///
/// Every `(observer, date, site)` group with at least one sighting is a
/// visit; its list length is the number of distinct species in the group and
/// `y = 1` iff the focal species was recorded as a countable individual.
/// Output is ordered by site, date and observer token.
pub fn derive_visits(
    sightings: &[Sighting],
    focal_species: &str,
    proficient: &BTreeSet<String>,
    grid: &GridSpec,
    cuts: &ListLengthCuts,
) -> Result<Vec<Visit>, IngestError> {
    if proficient.is_empty() {
        return Err(IngestError::InvalidConfig(
            "no proficient observers; cannot derive visits".into(),
        ));
    }
    struct Group<'a> {
        species: BTreeSet<&'a str>,
        detected: bool,
    }
    let mut groups: BTreeMap<(usize, NaiveDate, String), Group> = BTreeMap::new();
    let mut tokens: HashMap<&str, String> = HashMap::new();
    for s in sightings {
        if !proficient.contains(&s.observer_id) {
            continue;
        }
        let site = grid.assign(s.x, s.y)?;
        let token = tokens
            .entry(s.observer_id.as_str())
            .or_insert_with(|| observer_token(&s.observer_id))
            .clone();
        let g = groups.entry((site, s.date, token)).or_insert_with(|| Group {
            species: BTreeSet::new(),
            detected: false,
        });
        g.species.insert(s.species_id.as_str());
        if s.species_id == focal_species && s.countable {
            g.detected = true;
        }
    }
    groups
        .into_iter()
        .map(|((site, date, observer), g)| {
            Ok(Visit {
                site,
                year: date.year(),
                week: week_of_year(date),
                observer,
                list_length: cuts.categorize(g.species.len() as u32)?,
                y: g.detected,
            })
        })
        .collect()
}

/// Binary `S × T` matrix flagging site-years with established presence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfirmedPresence {
    pub n_sites: usize,
    pub n_years: usize,
    pub first_year: i32,
    a: Vec<bool>,
}

impl ConfirmedPresence {
    pub fn new(n_sites: usize, n_years: usize, first_year: i32) -> Self {
        Self {
            n_sites,
            n_years,
            first_year,
            a: vec![false; n_sites * n_years],
        }
    }

    fn slot(&self, site: usize, year: i32) -> Option<usize> {
        let t = year - self.first_year;
        if site >= self.n_sites || t < 0 || t as usize >= self.n_years {
            return None;
        }
        Some(site * self.n_years + t as usize)
    }

    pub fn get(&self, site: usize, year: i32) -> bool {
        self.slot(site, year).map(|i| self.a[i]).unwrap_or(false)
    }

    pub fn get_idx(&self, site: usize, year_idx: usize) -> bool {
        self.a[site * self.n_years + year_idx]
    }

    pub fn set(&mut self, site: usize, year: i32) -> Result<(), IngestError> {
        let i = self
            .slot(site, year)
            .ok_or_else(|| IngestError::Contract(format!("({site}, {year}) outside presence matrix")))?;
        self.a[i] = true;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.a.iter().filter(|&&v| v).count()
    }
}

/// Builds `a[s,t]` from proficient visits and trusted records.
///
/// A cell is confirmed when a proficient visit detected the species, when any
/// observer contributed a validated record of it (any life stage), or when a
/// proficient observer recorded it in a non-countable stage.
pub fn build_confirmed_presence(
    visits: &[Visit],
    sightings: &[Sighting],
    focal_species: &str,
    proficient: &BTreeSet<String>,
    grid: &GridSpec,
    window: &StudyWindow,
) -> Result<ConfirmedPresence, IngestError> {
    let mut a = ConfirmedPresence::new(grid.n_cells(), window.n_years(), window.first_year());
    for v in visits.iter().filter(|v| v.y) {
        a.set(v.site, v.year)?;
    }
    for s in sightings {
        if s.species_id != focal_species {
            continue;
        }
        if s.validated || proficient.contains(&s.observer_id) {
            let site = grid.assign(s.x, s.y)?;
            a.set(site, s.date.year())?;
        }
    }
    Ok(a)
}
