use super::{ClimateZone, CountyRecord, IngestError, NumericField};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ImputationMethod {
    StateMean,
    /// The state had no value for the field at all.
    DatasetFallback,
    NearestNeighbor { source_fips: String },
    /// No same-state county had a known zone.
    ModalFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationEntry {
    pub fips: String,
    pub field: String,
    pub value: String,
    #[serde(flatten)]
    pub method: ImputationMethod,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationLog {
    pub entries: Vec<ImputationEntry>,
}

impl ImputationLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Imputed-value count per field name.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.field.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Fills every missing predictor. Numeric fields take the mean of the
/// non-missing values in the same state (dataset mean when the state has
/// none). Climate zone takes the zone of the nearest same-state county on
/// (latitude, longitude), after coordinates have been filled.
pub fn impute_missing(
    records: &[CountyRecord],
) -> Result<(Vec<CountyRecord>, ImputationLog), IngestError> {
    let mut out = records.to_vec();
    let mut log = ImputationLog::default();

    for field in NumericField::ALL {
        let mut by_state: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        let mut total = (0.0, 0usize);
        for r in records {
            if let Some(v) = r.numeric(field) {
                let e = by_state.entry(r.state.as_str()).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
                total.0 += v;
                total.1 += 1;
            }
        }
        let needs = records.iter().any(|r| r.numeric(field).is_none());
        if !needs {
            continue;
        }
        if total.1 == 0 {
            return Err(IngestError::CannotImpute { field: field.name().to_string() });
        }
        let dataset_mean = total.0 / total.1 as f64;
        for r in out.iter_mut().filter(|r| r.numeric(field).is_none()) {
            let (value, method) = match by_state.get(r.state.as_str()) {
                Some(&(s, c)) => (s / c as f64, ImputationMethod::StateMean),
                None => (dataset_mean, ImputationMethod::DatasetFallback),
            };
            *r.numeric_mut(field) = Some(value);
            log.entries.push(ImputationEntry {
                fips: r.fips.clone(),
                field: field.name().to_string(),
                value: value.to_string(),
                method,
            });
        }
    }

    if out.iter().any(|r| r.climate_zone.is_none()) {
        let known: Vec<(usize, ClimateZone)> = out
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.climate_zone.map(|z| (i, z)))
            .collect();
        if known.is_empty() {
            return Err(IngestError::CannotImpute { field: "climate_zone".into() });
        }
        let modal = modal_zone(known.iter().map(|&(_, z)| z));
        let mut fills = Vec::new();
        for (i, r) in out.iter().enumerate().filter(|(_, r)| r.climate_zone.is_none()) {
            let (lat, lon) = (r.latitude.unwrap_or(0.0), r.longitude.unwrap_or(0.0));
            let nearest = known
                .iter()
                .filter(|&&(j, _)| out[j].state == r.state)
                .map(|&(j, z)| {
                    let o = &out[j];
                    let d = (o.latitude.unwrap_or(0.0) - lat).powi(2)
                        + (o.longitude.unwrap_or(0.0) - lon).powi(2);
                    (d, &o.fips, z)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            let (zone, method) = match nearest {
                Some((_, fips, z)) => {
                    (z, ImputationMethod::NearestNeighbor { source_fips: fips.clone() })
                }
                None => (modal, ImputationMethod::ModalFallback),
            };
            fills.push((i, zone));
            log.entries.push(ImputationEntry {
                fips: r.fips.clone(),
                field: "climate_zone".into(),
                value: zone.to_string(),
                method,
            });
        }
        for (i, z) in fills {
            out[i].climate_zone = Some(z);
        }
    }
    Ok((out, log))
}

/// Most frequent zone; ties go to the lower ordinal.
fn modal_zone(zones: impl Iterator<Item = ClimateZone>) -> ClimateZone {
    let mut counts = [0usize; 8];
    for z in zones {
        counts[z.ordinal() as usize - 1] += 1;
    }
    let best = (0..8).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap_or(0);
    ClimateZone::ALL[best]
}
