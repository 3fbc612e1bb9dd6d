//! Point cloud files.
//!
//! Points: CSV with header, either `id,x1,..,xk,mass` (Euclidean distances) or
//! `id,mass` together with a square distance-matrix CSV. Optional dominating function
//! table: CSV rows `point_id,radius,lambda`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{DominatingFunction, Geometry, LambdaTable, MetricMeasureSpace, SpaceError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CloudOptions {
    pub distance_matrix: Option<PathBuf>,
    pub lambda_table: Option<PathBuf>,
}

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> SpaceError {
    SpaceError::ParseError(format!("{}: {msg}", path.display()))
}

fn number(path: &Path, line: usize, field: &str) -> Result<f64, SpaceError> {
    field.trim().parse::<f64>().map_err(|_| parse_err(path, format!("line {line}: not a number: {field:?}")))
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<std::fs::File>, SpaceError> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e))
}

pub fn load_point_cloud(path: &Path, opts: &CloudOptions) -> Result<MetricMeasureSpace, SpaceError> {
    let mut rdr = reader(path, true)?;
    let width = rdr.headers().map_err(|e| parse_err(path, e))?.len();
    if width < 2 {
        return Err(parse_err(path, "expected at least the columns id,mass"));
    }
    let mut labels = Vec::new();
    let mut coords = Vec::new();
    let mut mass = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        if rec.len() != width {
            return Err(parse_err(path, format!("line {}: expected {width} fields", i + 2)));
        }
        labels.push(rec[0].to_string());
        for f in rec.iter().skip(1).take(width - 2) {
            coords.push(number(path, i + 2, f)?);
        }
        let m = number(path, i + 2, &rec[width - 1])?;
        if m < 0.0 {
            return Err(SpaceError::NegativeMass { index: i, mass: m });
        }
        mass.push(m);
    }
    if mass.is_empty() {
        return Err(SpaceError::Empty);
    }
    let lambda = match &opts.lambda_table {
        Some(p) => Some(load_lambda_table(p, &labels)?),
        None => None,
    };
    let dim = width - 2;
    match (&opts.distance_matrix, dim) {
        (Some(p), _) => {
            let dist = load_matrix(p, mass.len())?;
            MetricMeasureSpace::from_matrix(labels, Geometry::Explicit, dist, mass, lambda)
        }
        (None, 0) => Err(parse_err(path, "no coordinates and no distance matrix")),
        (None, _) => Ok(MetricMeasureSpace::euclidean(dim, coords, mass, lambda)?.with_labels(labels)),
    }
}

fn load_matrix(path: &Path, n: usize) -> Result<Vec<f64>, SpaceError> {
    let mut rdr = reader(path, false)?;
    let mut out = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| number(path, i + 1, f)).collect();
        match parsed {
            Ok(v) => {
                if v.len() != n {
                    return Err(parse_err(path, format!("row {} has {} entries, expected {n}", i + 1, v.len())));
                }
                out.extend(v);
                rows += 1;
            }
            Err(e) if i == 0 => {
                let _ = e;
            }
            Err(e) => return Err(e),
        }
    }
    if rows != n {
        return Err(parse_err(path, format!("{rows} rows, expected {n}")));
    }
    Ok(out)
}

fn load_lambda_table(path: &Path, labels: &[String]) -> Result<DominatingFunction, SpaceError> {
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut rdr = reader(path, true)?;
    let mut rows = vec![Vec::new(); labels.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        if rec.len() != 3 {
            return Err(parse_err(path, format!("line {}: expected point_id,radius,lambda", i + 2)));
        }
        let x = *index
            .get(&rec[0])
            .ok_or_else(|| parse_err(path, format!("line {}: unknown point {:?}", i + 2, &rec[0])))?;
        rows[x].push((number(path, i + 2, &rec[1])?, number(path, i + 2, &rec[2])?));
    }
    LambdaTable::new(rows)
        .map(DominatingFunction::Table)
        .ok_or_else(|| parse_err(path, "lambda table must be positive and non-decreasing in the radius"))
}
