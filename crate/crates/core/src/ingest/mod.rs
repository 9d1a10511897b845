//! County table ingestion: parsing, validation, imputation, outcome rates,
//! standardization and collinearity screening.

mod correlation;
mod features;
mod impute;
mod load;

pub use correlation::{correlation_matrix, screen_collinear, CorrelationScreenResult, DroppedColumn};
pub use features::{predictor_table, standardize_features, FeatureTable, RawTable};
pub use impute::{impute_missing, ImputationEntry, ImputationLog, ImputationMethod};
pub use load::{load_county_table, parse_county_table, write_county_table, Issue, LoadedTable, Severity, HEADER};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("wrong header: expected `{expected}`, found `{found}`")]
    WrongHeader { expected: String, found: String },
    #[error("no data rows")]
    NoDataRows,
    #[error("field `{field}` is missing in every record, cannot impute")]
    CannotImpute { field: String },
    #[error("record {fips} still has a missing `{field}`")]
    MissingValue { fips: String, field: String },
    #[error("need at least 2 rows to standardize, got {n}")]
    TooFewRows { n: usize },
    #[error("no columns left after dropping zero-variance columns")]
    NoColumns,
}

/// Building America climate zones, in their fixed ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClimateZone {
    HotHumid,
    MixedHumid,
    HotDry,
    MixedDry,
    Cold,
    VeryCold,
    Subarctic,
    Marine,
}

impl ClimateZone {
    pub const ALL: [ClimateZone; 8] = [
        ClimateZone::HotHumid,
        ClimateZone::MixedHumid,
        ClimateZone::HotDry,
        ClimateZone::MixedDry,
        ClimateZone::Cold,
        ClimateZone::VeryCold,
        ClimateZone::Subarctic,
        ClimateZone::Marine,
    ];

    /// 1-based ordinal code.
    pub fn ordinal(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ClimateZone::HotHumid => "hot-humid",
            ClimateZone::MixedHumid => "mixed-humid",
            ClimateZone::HotDry => "hot-dry",
            ClimateZone::MixedDry => "mixed-dry",
            ClimateZone::Cold => "cold",
            ClimateZone::VeryCold => "very-cold",
            ClimateZone::Subarctic => "subarctic",
            ClimateZone::Marine => "marine",
        }
    }
}

impl fmt::Display for ClimateZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClimateZone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClimateZone::ALL
            .into_iter()
            .find(|z| z.name() == s)
            .ok_or_else(|| format!("unknown climate zone `{s}`"))
    }
}

/// Numeric predictor fields that may be missing in the input and get imputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericField {
    Longitude,
    Latitude,
    PctRural,
    IcuBedsPer10k,
    PctSmokers,
    PctObesity,
    PctUninsured,
    PctDiabetes,
    PctElderly,
    PctNonwhite,
    PctPoverty,
    PopDensity,
}

impl NumericField {
    pub const ALL: [NumericField; 12] = [
        NumericField::Longitude,
        NumericField::Latitude,
        NumericField::PctRural,
        NumericField::IcuBedsPer10k,
        NumericField::PctSmokers,
        NumericField::PctObesity,
        NumericField::PctUninsured,
        NumericField::PctDiabetes,
        NumericField::PctElderly,
        NumericField::PctNonwhite,
        NumericField::PctPoverty,
        NumericField::PopDensity,
    ];

    /// Column name in the input header.
    pub fn name(self) -> &'static str {
        match self {
            NumericField::Longitude => "longitude",
            NumericField::Latitude => "latitude",
            NumericField::PctRural => "pct_rural",
            NumericField::IcuBedsPer10k => "icu_beds_per_10k",
            NumericField::PctSmokers => "pct_smokers",
            NumericField::PctObesity => "pct_obesity",
            NumericField::PctUninsured => "pct_uninsured",
            NumericField::PctDiabetes => "pct_diabetes",
            NumericField::PctElderly => "pct_elderly",
            NumericField::PctNonwhite => "pct_nonwhite",
            NumericField::PctPoverty => "pct_poverty",
            NumericField::PopDensity => "pop_density",
        }
    }

    pub fn is_percent(self) -> bool {
        !matches!(
            self,
            NumericField::Longitude
                | NumericField::Latitude
                | NumericField::IcuBedsPer10k
                | NumericField::PopDensity
        )
    }
}

/// One county as read from the input table. Predictor fields are `None` when missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyRecord {
    pub fips: String,
    pub county_name: String,
    pub state: String,
    pub population: u64,
    pub positive_cases: u64,
    pub deaths: u64,
    pub longitude: Option<f64>,
    pub latitude: Option<f64>,
    pub pct_rural: Option<f64>,
    pub climate_zone: Option<ClimateZone>,
    pub icu_beds_per_10k: Option<f64>,
    pub pct_smokers: Option<f64>,
    pub pct_obesity: Option<f64>,
    pub pct_uninsured: Option<f64>,
    pub pct_diabetes: Option<f64>,
    pub pct_elderly: Option<f64>,
    pub pct_nonwhite: Option<f64>,
    pub pct_poverty: Option<f64>,
    pub pop_density: Option<f64>,
}

impl CountyRecord {
    pub fn numeric(&self, field: NumericField) -> Option<f64> {
        match field {
            NumericField::Longitude => self.longitude,
            NumericField::Latitude => self.latitude,
            NumericField::PctRural => self.pct_rural,
            NumericField::IcuBedsPer10k => self.icu_beds_per_10k,
            NumericField::PctSmokers => self.pct_smokers,
            NumericField::PctObesity => self.pct_obesity,
            NumericField::PctUninsured => self.pct_uninsured,
            NumericField::PctDiabetes => self.pct_diabetes,
            NumericField::PctElderly => self.pct_elderly,
            NumericField::PctNonwhite => self.pct_nonwhite,
            NumericField::PctPoverty => self.pct_poverty,
            NumericField::PopDensity => self.pop_density,
        }
    }

    pub fn numeric_mut(&mut self, field: NumericField) -> &mut Option<f64> {
        match field {
            NumericField::Longitude => &mut self.longitude,
            NumericField::Latitude => &mut self.latitude,
            NumericField::PctRural => &mut self.pct_rural,
            NumericField::IcuBedsPer10k => &mut self.icu_beds_per_10k,
            NumericField::PctSmokers => &mut self.pct_smokers,
            NumericField::PctObesity => &mut self.pct_obesity,
            NumericField::PctUninsured => &mut self.pct_uninsured,
            NumericField::PctDiabetes => &mut self.pct_diabetes,
            NumericField::PctElderly => &mut self.pct_elderly,
            NumericField::PctNonwhite => &mut self.pct_nonwhite,
            NumericField::PctPoverty => &mut self.pct_poverty,
            NumericField::PopDensity => &mut self.pop_density,
        }
    }

    pub fn has_missing(&self) -> bool {
        self.climate_zone.is_none() || NumericField::ALL.iter().any(|&f| self.numeric(f).is_none())
    }
}

/// Cumulative positive and death counts per head of population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRates {
    pub positive_rate: f64,
    pub death_rate: f64,
}

/// Population must be positive; the loader rejects rows that violate this.
pub fn compute_rates(record: &CountyRecord) -> TargetRates {
    debug_assert!(record.population > 0);
    let pop = record.population as f64;
    TargetRates {
        positive_rate: record.positive_cases as f64 / pop,
        death_rate: record.deaths as f64 / pop,
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn record(fips: &str, state: &str) -> CountyRecord {
        CountyRecord {
            fips: fips.to_string(),
            county_name: format!("County {fips}"),
            state: state.to_string(),
            population: 10_000,
            positive_cases: 100,
            deaths: 1,
            longitude: Some(-95.0),
            latitude: Some(30.0),
            pct_rural: Some(50.0),
            climate_zone: Some(ClimateZone::HotHumid),
            icu_beds_per_10k: Some(2.0),
            pct_smokers: Some(15.0),
            pct_obesity: Some(30.0),
            pct_uninsured: Some(10.0),
            pct_diabetes: Some(9.0),
            pct_elderly: Some(18.0),
            pct_nonwhite: Some(20.0),
            pct_poverty: Some(14.0),
            pop_density: Some(80.0),
        }
    }
}
