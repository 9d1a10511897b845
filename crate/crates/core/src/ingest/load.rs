use super::{ClimateZone, CountyRecord, IngestError, NumericField};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

pub const HEADER: [&str; 19] = [
    "fips",
    "county",
    "state",
    "population",
    "positive_cases",
    "deaths",
    "longitude",
    "latitude",
    "pct_rural",
    "climate_zone",
    "icu_beds_per_10k",
    "pct_smokers",
    "pct_obesity",
    "pct_uninsured",
    "pct_diabetes",
    "pct_elderly",
    "pct_nonwhite",
    "pct_poverty",
    "pop_density",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Rejected,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    /// 1-based line in the input file (the header is line 1).
    pub line: u64,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadedTable {
    pub records: Vec<CountyRecord>,
    pub issues: Vec<Issue>,
}

impl LoadedTable {
    pub fn rejected(&self) -> usize {
        self.issues.iter().filter(|i| i.severity == Severity::Rejected).count()
    }
}

pub fn load_county_table(path: &Path) -> Result<LoadedTable, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_county_table(file)
}

/// Parses the canonical county CSV. Row-level defects are logged and the row
/// is skipped; structural defects (header, no rows) are fatal.
pub fn parse_county_table<R: Read>(reader: R) -> Result<LoadedTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::Csv(e.to_string()))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(IngestError::WrongHeader {
            expected: HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    let mut data_rows = 0usize;
    for row in rdr.records() {
        let row = row.map_err(|e| IngestError::Csv(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        data_rows += 1;
        let mut warnings = Vec::new();
        match parse_row(&row, &mut warnings) {
            Ok(rec) => {
                if !seen.insert(rec.fips.clone()) {
                    issues.push(Issue {
                        line,
                        severity: Severity::Rejected,
                        message: format!("duplicate fips {}", rec.fips),
                    });
                    continue;
                }
                issues.extend(warnings.into_iter().map(|message| Issue {
                    line,
                    severity: Severity::Warning,
                    message,
                }));
                records.push(rec);
            }
            Err(message) => issues.push(Issue { line, severity: Severity::Rejected, message }),
        }
    }
    if data_rows == 0 {
        return Err(IngestError::NoDataRows);
    }
    Ok(LoadedTable { records, issues })
}

/// Writes records in the canonical layout; missing values become `NA`.
pub fn write_county_table<W: std::io::Write>(records: &[CountyRecord], w: W) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| IngestError::Csv(e.to_string());
    out.write_record(HEADER).map_err(err)?;
    let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for r in records {
        let mut row = vec![
            r.fips.clone(),
            r.county_name.clone(),
            r.state.clone(),
            r.population.to_string(),
            r.positive_cases.to_string(),
            r.deaths.to_string(),
            num(r.longitude),
            num(r.latitude),
            num(r.pct_rural),
            r.climate_zone.map_or_else(|| "NA".to_string(), |z| z.name().to_string()),
        ];
        row.extend(
            [
                r.icu_beds_per_10k,
                r.pct_smokers,
                r.pct_obesity,
                r.pct_uninsured,
                r.pct_diabetes,
                r.pct_elderly,
                r.pct_nonwhite,
                r.pct_poverty,
                r.pop_density,
            ]
            .map(num),
        );
        out.write_record(&row).map_err(err)?;
    }
    out.flush().map_err(|e| IngestError::Csv(e.to_string()))
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s == "NA"
}

fn parse_fips(s: &str) -> Result<String, String> {
    if s.is_empty() || s.len() > 5 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("invalid fips `{s}`"));
    }
    Ok(format!("{s:0>5}"))
}

fn parse_count(name: &str, s: &str) -> Result<u64, String> {
    s.parse::<u64>().map_err(|_| format!("invalid {name} `{s}`"))
}

fn parse_opt(name: &str, s: &str) -> Result<Option<f64>, String> {
    if is_missing(s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("invalid {name} `{s}`")),
    }
}

fn parse_row(row: &csv::StringRecord, warnings: &mut Vec<String>) -> Result<CountyRecord, String> {
    if row.len() != HEADER.len() {
        return Err(format!("expected {} fields, found {}", HEADER.len(), row.len()));
    }
    let fips = parse_fips(&row[0])?;
    let state = row[2].to_string();
    if state.len() != 2 {
        return Err(format!("invalid state `{state}`"));
    }
    let population = parse_count("population", &row[3])?;
    let positive_cases = parse_count("positive_cases", &row[4])?;
    let deaths = parse_count("deaths", &row[5])?;
    if population == 0 {
        return Err("invariant violated: population > 0".into());
    }
    if deaths > positive_cases {
        return Err(format!("invariant violated: deaths ≤ cases ({deaths} > {positive_cases})"));
    }
    if positive_cases > population {
        return Err(format!(
            "invariant violated: cases ≤ population ({positive_cases} > {population})"
        ));
    }
    let climate_zone = if is_missing(&row[9]) { None } else { Some(row[9].parse::<ClimateZone>()?) };

    let mut rec = CountyRecord {
        fips,
        county_name: row[1].to_string(),
        state,
        population,
        positive_cases,
        deaths,
        longitude: None,
        latitude: None,
        pct_rural: None,
        climate_zone,
        icu_beds_per_10k: None,
        pct_smokers: None,
        pct_obesity: None,
        pct_uninsured: None,
        pct_diabetes: None,
        pct_elderly: None,
        pct_nonwhite: None,
        pct_poverty: None,
        pop_density: None,
    };
    for field in NumericField::ALL {
        let col = HEADER.iter().position(|h| *h == field.name()).expect("field in header");
        let v = parse_opt(field.name(), &row[col])?;
        if let Some(v) = v {
            if field.is_percent() {
                if !(0.0..=100.0).contains(&v) {
                    return Err(format!("{} = {v} outside [0,100]", field.name()));
                }
                if v > 0.0 && v < 1.0 {
                    warnings.push(format!("{} = {v} looks like a fraction; kept as percent", field.name()));
                }
            } else if matches!(field, NumericField::IcuBedsPer10k | NumericField::PopDensity) && v < 0.0 {
                return Err(format!("{} = {v} is negative", field.name()));
            }
        }
        *rec.numeric_mut(field) = v;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&str]) -> String {
        let mut s = HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    const GOOD: &str = "48201,Harris,TX,4713325,200000,3000,-95.4,29.8,1.2,hot-humid,3.1,14.0,30.1,22.0,10.2,10.0,70.0,16.0,2600.0";

    #[test]
    fn parses_good_row() {
        let t = parse_county_table(table(&[GOOD]).as_bytes()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert!(t.issues.is_empty());
        let r = &t.records[0];
        assert_eq!(r.fips, "48201");
        assert_eq!(r.climate_zone, Some(ClimateZone::HotHumid));
        assert_eq!(r.pop_density, Some(2600.0));
    }

    #[test]
    fn header_only_is_fatal() {
        let err = parse_county_table(table(&[]).as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::NoDataRows));
        assert_eq!(err.to_string(), "no data rows");
    }

    #[test]
    fn wrong_header_is_fatal() {
        let err = parse_county_table("fips,county\n1,a".as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::WrongHeader { .. }));
    }

    #[test]
    fn deaths_above_cases_rejected() {
        let row = "00001,A,TX,1000,3,5,-95,30,1,hot-humid,1,1,1,1,1,1,1,1,1";
        let t = parse_county_table(table(&[row, GOOD]).as_bytes()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.rejected(), 1);
        assert_eq!(t.issues[0].line, 2);
        assert!(t.issues[0].message.contains("deaths ≤ cases"));
    }

    #[test]
    fn zero_population_rejected() {
        let row = "00001,A,TX,0,0,0,-95,30,1,hot-humid,1,1,1,1,1,1,1,1,1";
        let t = parse_county_table(table(&[row]).as_bytes()).unwrap();
        assert!(t.records.is_empty());
        assert!(t.issues[0].message.contains("population > 0"));
    }

    #[test]
    fn missing_markers_and_padding() {
        let row = "1001,Autauga,AL,55000,2000,30,-86.6,32.5,42,NA,,NA,33,9,12,15,25,15,93";
        let t = parse_county_table(table(&[row]).as_bytes()).unwrap();
        let r = &t.records[0];
        assert_eq!(r.fips, "01001");
        assert_eq!(r.climate_zone, None);
        assert_eq!(r.icu_beds_per_10k, None);
        assert_eq!(r.pct_smokers, None);
        assert!(r.has_missing());
    }

    #[test]
    fn fraction_percent_warns_out_of_range_rejects() {
        let frac = "00001,A,TX,1000,3,1,-95,30,0.5,hot-humid,1,1,1,1,1,1,1,1,1";
        let bad = "00002,B,TX,1000,3,1,-95,30,101,hot-humid,1,1,1,1,1,1,1,1,1";
        let t = parse_county_table(table(&[frac, bad]).as_bytes()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].pct_rural, Some(0.5));
        assert_eq!(t.issues.len(), 2);
        assert_eq!(t.issues[0].severity, Severity::Warning);
        assert_eq!(t.issues[1].severity, Severity::Rejected);
    }

    #[test]
    fn duplicate_fips_and_bad_width_rejected() {
        let short = "00003,C,TX,1000";
        let t = parse_county_table(table(&[GOOD, GOOD, short]).as_bytes()).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.rejected(), 2);
        assert!(t.issues[0].message.contains("duplicate"));
        assert!(t.issues[1].message.contains("expected 19 fields"));
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = load_county_table(Path::new("/nonexistent/counties.csv")).unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }
}
