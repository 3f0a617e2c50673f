//! Readers for the cell-count and housing input files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_records;

/// Column `count` of nonnegative integers.
pub fn read_counts(path: &Path) -> Result<Vec<f64>> {
    let (header, records) = read_records(path)?;
    if header != ["count"] {
        return Err(Error::data(format!("{}: expected a single column 'count'", path.display())));
    }
    let counts = records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            rec[0].parse::<u64>().map(|c| c as f64).map_err(|_| {
                Error::data(format!("{}:{}: '{}' is not a nonnegative integer count", path.display(), k + 2, &rec[0]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if counts.len() < 2 {
        return Err(Error::data(format!("{}: need at least two counts", path.display())));
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct House {
    pub id: String,
    pub year_built: f64,
    pub size_sqft: f64,
    pub rooms: f64,
}

/// Columns `house,year_built,size_sqft,rooms`.
pub fn read_housing_features(path: &Path) -> Result<Vec<House>> {
    let (header, records) = read_records(path)?;
    if header != ["house", "year_built", "size_sqft", "rooms"] {
        return Err(Error::data(format!(
            "{}: expected columns house,year_built,size_sqft,rooms",
            path.display()
        )));
    }
    records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let num = |i: usize| {
                rec[i].parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0).ok_or_else(|| {
                    Error::data(format!("{}:{}: '{}' is not a positive number", path.display(), k + 2, &rec[i]))
                })
            };
            Ok(House {
                id: rec[0].to_string(),
                year_built: num(1)?,
                size_sqft: num(2)?,
                rooms: num(3)?,
            })
        })
        .collect()
}

/// Price per house and epoch plus the epoch years.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    pub years: Vec<f64>,
    pub ids: Vec<String>,
    /// `prices[house][epoch]`.
    pub prices: Vec<Vec<f64>>,
}

/// Columns `house,p<year>,...`.
pub fn read_housing_prices(path: &Path) -> Result<PriceSeries> {
    let (header, records) = read_records(path)?;
    let bad_header = || Error::data(format!("{}: expected columns house,p<year>,...", path.display()));
    if header.len() < 2 || header[0] != "house" {
        return Err(bad_header());
    }
    let years = header[1..]
        .iter()
        .map(|c| c.strip_prefix('p').and_then(|y| y.parse::<u32>().ok()).map(f64::from).ok_or_else(bad_header))
        .collect::<Result<Vec<_>>>()?;
    let mut ids = Vec::new();
    let mut prices = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        ids.push(rec[0].to_string());
        let row = (1..header.len())
            .map(|i| {
                rec[i].parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0).ok_or_else(|| {
                    Error::data(format!("{}:{}: '{}' is not a positive price", path.display(), k + 2, &rec[i]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        prices.push(row);
    }
    Ok(PriceSeries { years, ids, prices })
}
