//! Seeded county-shaped tables for tests and demos. Risk is driven mostly by
//! longitude and population density, with three well separated rate tiers.

use crate::ingest::{ClimateZone, CountyRecord};
use crate::rng::rng_for;
use rand::Rng;

const STATES: [(&str, u32, f64, f64, ClimateZone); 12] = [
    ("WA", 53, -120.5, 47.4, ClimateZone::Marine),
    ("CA", 6, -119.5, 37.2, ClimateZone::HotDry),
    ("AZ", 4, -111.7, 34.3, ClimateZone::HotDry),
    ("CO", 8, -105.5, 39.0, ClimateZone::Cold),
    ("MN", 27, -94.3, 46.3, ClimateZone::VeryCold),
    ("TX", 48, -99.3, 31.5, ClimateZone::HotHumid),
    ("IL", 17, -89.2, 40.0, ClimateZone::Cold),
    ("GA", 13, -83.4, 32.7, ClimateZone::HotHumid),
    ("OH", 39, -82.8, 40.3, ClimateZone::Cold),
    ("VA", 51, -78.8, 37.5, ClimateZone::MixedHumid),
    ("NY", 36, -75.5, 42.9, ClimateZone::Cold),
    ("NJ", 34, -74.5, 40.1, ClimateZone::MixedHumid),
];

fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `n` counties; about `missing_rate` of predictor cells are left empty.
pub fn synthetic_counties(n: usize, seed: u64, missing_rate: f64) -> Vec<CountyRecord> {
    let mut rng = rng_for(seed, 0x5157, 0);
    let mut per_state = [0u32; STATES.len()];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = if i < STATES.len() { i } else { rng.gen_range(0..STATES.len()) };
        per_state[s] += 1;
        let (code, num, lon0, lat0, zone) = STATES[s];
        let lon = lon0 + rng.gen_range(-3.0..3.0);
        let lat = lat0 + rng.gen_range(-2.0..2.0);
        let log_density = 3.6 + 1.3 * normal(&mut rng);
        let density = log_density.exp();
        let area = rng.gen_range(300.0..2500.0);
        let population = (density * area).max(800.0).round() as u64;
        let pct_nonwhite = (18.0 + 12.0 * normal(&mut rng)).clamp(0.5, 95.0);
        let pct_elderly = (18.0 + 4.0 * normal(&mut rng) - 0.8 * (log_density - 3.6)).clamp(5.0, 40.0);
        let pct_poverty = (14.0 + 5.0 * normal(&mut rng)).clamp(2.0, 45.0);
        let risk = 0.9 * (lon + 95.0) / 13.0 + 0.8 * (log_density - 3.6) / 1.3 + 0.25 * (pct_nonwhite - 18.0) / 12.0
            + 0.35 * normal(&mut rng);
        let (pos, death) = if risk > 0.9 {
            (0.089 + 0.009 * normal(&mut rng), 0.0019 + 0.0003 * normal(&mut rng))
        } else if risk > -0.5 {
            (0.066 + 0.006 * normal(&mut rng), 0.0012 + 0.0002 * normal(&mut rng))
        } else {
            (0.035 + 0.006 * normal(&mut rng), 0.0006 + 0.00015 * normal(&mut rng))
        };
        let positive_cases = (pos.max(0.002) * population as f64).round() as u64;
        let deaths = ((death.max(0.0) * population as f64).round() as u64).min(positive_cases);
        let icu = (2.0 + 1.5 * normal(&mut rng) + 0.3 * log_density).max(0.0);
        let smokers = (17.0 + 3.0 * normal(&mut rng)).clamp(5.0, 40.0);
        let obesity = (32.0 + 4.0 * normal(&mut rng)).clamp(10.0, 55.0);
        let uninsured = (10.0 + 4.0 * normal(&mut rng)).clamp(1.0, 35.0);
        let diabetes = (11.0 + 2.5 * normal(&mut rng)).clamp(3.0, 25.0);
        let mut pick = |v: f64| if rng.gen::<f64>() < missing_rate { None } else { Some(v) };
        let rec = CountyRecord {
            fips: format!("{num:02}{:03}", 2 * per_state[s] - 1),
            county_name: format!("{code} County {}", per_state[s]),
            state: code.to_string(),
            population,
            positive_cases,
            deaths,
            longitude: pick(lon),
            latitude: pick(lat),
            pct_rural: pick((95.0 - 14.0 * (log_density - 1.0)).clamp(0.0, 100.0)),
            climate_zone: None,
            icu_beds_per_10k: pick(icu),
            pct_smokers: pick(smokers),
            pct_obesity: pick(obesity),
            pct_uninsured: pick(uninsured),
            pct_diabetes: pick(diabetes),
            pct_elderly: pick(pct_elderly),
            pct_nonwhite: pick(pct_nonwhite),
            pct_poverty: pick(pct_poverty),
            pop_density: pick(density),
        };
        let climate_zone = if rng.gen::<f64>() < missing_rate { None } else { Some(zone) };
        out.push(CountyRecord { climate_zone, ..rec });
    }
    out
}
