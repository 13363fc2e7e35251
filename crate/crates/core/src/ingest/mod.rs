//! Raw sightings to model inputs.
//!
//! A raw [`Sighting`] is one record from an opportunistic portal. Grouping
//! sightings by observer, day and grid cell yields pseudo-visits ([`Visit`]);
//! together with a confirmed-presence matrix ([`ConfirmedPresence`]) and a
//! scaled [`SiteTable`] they are everything the occupancy model consumes.

mod covariates;
mod grid;
pub mod io;
mod sightings;
mod visits;

pub use covariates::{load_site_covariates, CovariateInfo, CovariateKind, CovariateOptions, SiteTable};
pub use grid::GridSpec;
pub use sightings::{parse_sightings, ColumnMap, ParsedSightings, RowError, Sighting};
pub use visits::{
    build_confirmed_presence, categorize_list_length, derive_visits, observer_token, scale_year,
    split_observer_streams, week_of_year, ConfirmedPresence, ListLengthClass, ListLengthCuts,
    ObserverStreams, Visit,
};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Inclusive calendar window of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, crate::IngestError> {
        if end < start {
            return Err(crate::IngestError::InvalidConfig(format!(
                "study window ends ({end}) before it starts ({start})"
            )));
        }
        Ok(Self { start, end })
    }

    /// Whole calendar years `first..=last`.
    pub fn years(first: i32, last: i32) -> Result<Self, crate::IngestError> {
        let start = NaiveDate::from_ymd_opt(first, 1, 1)
            .ok_or_else(|| crate::IngestError::InvalidConfig(format!("bad year {first}")))?;
        let end = NaiveDate::from_ymd_opt(last, 12, 31)
            .ok_or_else(|| crate::IngestError::InvalidConfig(format!("bad year {last}")))?;
        Self::new(start, end)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn first_year(&self) -> i32 {
        self.start.year()
    }

    pub fn last_year(&self) -> i32 {
        self.end.year()
    }

    pub fn n_years(&self) -> usize {
        (self.last_year() - self.first_year() + 1) as usize
    }
}
