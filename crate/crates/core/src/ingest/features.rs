use super::{ClimateZone, CountyRecord, IngestError, NumericField};
use crate::matrix::{mean, sample_sd, Matrix};
use serde::{Deserialize, Serialize};

/// Unstandardized predictor matrix with column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub values: Matrix,
    pub row_keys: Vec<String>,
}

/// Z-scored predictor matrix plus the statistics needed to transform new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub column_names: Vec<String>,
    pub values: Matrix,
    pub col_means: Vec<f64>,
    pub col_sds: Vec<f64>,
    pub row_keys: Vec<String>,
    /// Zero-variance columns removed during standardization.
    pub dropped_constant: Vec<String>,
}

impl FeatureTable {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn transform_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.col_means.iter().zip(&self.col_sds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.col_means.iter().zip(&self.col_sds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Keeps only the named columns, in the given order.
    pub fn retain_columns(&self, names: &[String]) -> FeatureTable {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_names.iter().position(|c| c == n).expect("known column"))
            .collect();
        FeatureTable {
            column_names: names.to_vec(),
            values: self.values.select_cols(&idx),
            col_means: idx.iter().map(|&j| self.col_means[j]).collect(),
            col_sds: idx.iter().map(|&j| self.col_sds[j]).collect(),
            row_keys: self.row_keys.clone(),
            dropped_constant: self.dropped_constant.clone(),
        }
    }

    /// Unstandardized values of every row.
    pub fn raw_values(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self.values.iter_rows().map(|r| self.inverse_row(r)).collect();
        Matrix::from_rows(&rows)
    }
}

/// Assembles the predictor columns in input-header order. Climate zone is an
/// ordinal 1–8 column, or eight indicator columns when `climate_one_hot`.
pub fn predictor_table(records: &[CountyRecord], climate_one_hot: bool) -> Result<RawTable, IngestError> {
    let mut names: Vec<String> = Vec::new();
    for field in NumericField::ALL {
        names.push(field.name().to_string());
        if field == NumericField::PctRural {
            if climate_one_hot {
                names.extend(ClimateZone::ALL.iter().map(|z| format!("climate_{}", z.name().replace('-', "_"))));
            } else {
                names.push("climate_zone".to_string());
            }
        }
    }
    let mut values = Matrix::zeros(0, 0);
    let mut row = Vec::with_capacity(names.len());
    for r in records {
        row.clear();
        for field in NumericField::ALL {
            let v = r.numeric(field).ok_or_else(|| IngestError::MissingValue {
                fips: r.fips.clone(),
                field: field.name().to_string(),
            })?;
            row.push(v);
            if field == NumericField::PctRural {
                let zone = r.climate_zone.ok_or_else(|| IngestError::MissingValue {
                    fips: r.fips.clone(),
                    field: "climate_zone".into(),
                })?;
                if climate_one_hot {
                    row.extend(ClimateZone::ALL.iter().map(|&z| if z == zone { 1.0 } else { 0.0 }));
                } else {
                    row.push(f64::from(zone.ordinal()));
                }
            }
        }
        values.push_row(&row);
    }
    if values.rows() == 0 {
        values = Matrix::zeros(0, names.len());
    }
    Ok(RawTable {
        column_names: names,
        values,
        row_keys: records.iter().map(|r| r.fips.clone()).collect(),
    })
}

/// Z-scores each column with the sample standard deviation; zero-variance
/// columns are dropped and listed in `dropped_constant`.
pub fn standardize_features(raw: &RawTable) -> Result<FeatureTable, IngestError> {
    let n = raw.values.rows();
    if n < 2 {
        return Err(IngestError::TooFewRows { n });
    }
    let mut keep = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..raw.values.cols() {
        let col = raw.values.column(j);
        let m = mean(&col);
        let sd = sample_sd(&col);
        if sd > 0.0 && sd.is_finite() {
            keep.push(j);
            means.push(m);
            sds.push(sd);
        } else {
            dropped.push(raw.column_names[j].clone());
        }
    }
    if keep.is_empty() {
        return Err(IngestError::NoColumns);
    }
    let mut values = raw.values.select_cols(&keep);
    for i in 0..n {
        for (k, v) in values.row_mut(i).iter_mut().enumerate() {
            *v = (*v - means[k]) / sds[k];
        }
    }
    Ok(FeatureTable {
        column_names: keep.iter().map(|&j| raw.column_names[j].clone()).collect(),
        values,
        col_means: means,
        col_sds: sds,
        row_keys: raw.row_keys.clone(),
        dropped_constant: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::record;
    use super::*;
    use proptest::prelude::*;

    fn raw(cols: &[&str], rows: &[&[f64]]) -> RawTable {
        RawTable {
            column_names: cols.iter().map(|s| s.to_string()).collect(),
            values: Matrix::from_rows(rows),
            row_keys: (0..rows.len()).map(|i| i.to_string()).collect(),
        }
    }

    #[test]
    fn two_value_column() {
        let t = standardize_features(&raw(&["a"], &[&[0.0], &[2.0]])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t.values.get(0, 0) + h).abs() < 1e-15);
        assert!((t.values.get(1, 0) - h).abs() < 1e-15);
    }

    #[test]
    fn constant_column_dropped() {
        let t = standardize_features(&raw(&["c", "x"], &[&[5.0, 1.0], &[5.0, 2.0], &[5.0, 4.0]])).unwrap();
        assert_eq!(t.column_names, vec!["x"]);
        assert_eq!(t.dropped_constant, vec!["c"]);
    }

    #[test]
    fn single_row_is_fatal() {
        assert!(matches!(
            standardize_features(&raw(&["a"], &[&[1.0]])),
            Err(IngestError::TooFewRows { n: 1 })
        ));
    }

    #[test]
    fn predictor_columns_ordinal_and_one_hot() {
        let mut a = record("00001", "TX");
        a.climate_zone = Some(ClimateZone::Cold);
        let t = predictor_table(&[a.clone()], false).unwrap();
        assert_eq!(t.column_names.len(), 13);
        assert_eq!(t.column_names[3], "climate_zone");
        assert_eq!(t.values.get(0, 3), 5.0);
        let t = predictor_table(&[a], true).unwrap();
        assert_eq!(t.column_names.len(), 20);
        assert_eq!(t.column_names[3 + 4], "climate_cold");
        assert_eq!(t.values.row(0)[3..11], [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn predictor_table_rejects_missing() {
        let mut a = record("00001", "TX");
        a.pct_elderly = None;
        assert!(matches!(predictor_table(&[a], false), Err(IngestError::MissingValue { .. })));
    }

    proptest! {
        #[test]
        fn standardized_moments_and_round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 3..40)
        ) {
            let names = ["a", "b", "c"];
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let table = raw(&names, &refs);
            let t = standardize_features(&table).unwrap();
            for j in 0..t.p() {
                let col = t.values.column(j);
                prop_assert!(mean(&col).abs() < 1e-9);
                prop_assert!((sample_sd(&col) - 1.0).abs() < 1e-9);
            }
            if t.p() == 3 {
                for (i, r) in rows.iter().enumerate() {
                    let back = t.inverse_row(t.values.row(i));
                    for (x, y) in back.iter().zip(r) {
                        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
                    }
                    let z = t.transform_row(r);
                    for (x, y) in z.iter().zip(t.values.row(i)) {
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
