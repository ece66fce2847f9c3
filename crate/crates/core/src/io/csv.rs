//! CSV readers and writers for dispersion data, cavity tables and result
//! tables. Numbers are written with 12 significant digits.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dispersion::{CavityTable, DispersionPoint, HBAR_C_MEV_NM};
use crate::model::Branch;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("file has no data rows")]
    Empty,
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("no {0} points; fitting needs both branches")]
    MissingBranch(Branch),
    #[error("invalid cavity table: {0}")]
    Table(String),
}

/// Round to 12 significant digits and print the shortest representation
/// of the rounded value.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn round_significant(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

fn open(path: &Path) -> Result<std::fs::File, CsvError> {
    std::fs::File::open(path).map_err(|source| CsvError::Io { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<std::fs::File, CsvError> {
    std::fs::File::create(path).map_err(|source| CsvError::Io { path: path.to_path_buf(), source })
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn row_number(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

fn number(record: &csv::StringRecord, index: usize, name: &str, row: u64) -> Result<Option<f64>, CsvError> {
    let raw = record.get(index).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(CsvError::Row { row, message: format!("`{name}` is not a finite number: {raw:?}") }),
    }
}

/// Read `theta_deg,energy_mev,branch` (an optional `k_per_nm` column may
/// replace or accompany the angle).
pub fn read_dispersion_csv<R: Read>(reader: R) -> Result<Vec<DispersionPoint>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let theta_col = column(&headers, "theta_deg");
    let k_col = column(&headers, "k_per_nm");
    if theta_col.is_none() && k_col.is_none() {
        return Err(CsvError::MissingColumn("theta_deg"));
    }
    let energy_col = column(&headers, "energy_mev").ok_or(CsvError::MissingColumn("energy_mev"))?;
    let branch_col = column(&headers, "branch").ok_or(CsvError::MissingColumn("branch"))?;

    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_number(&record, i as u64 + 2);
        let theta_int = theta_col.map(|c| number(&record, c, "theta_deg", row)).transpose()?.flatten();
        let k = k_col.map(|c| number(&record, c, "k_per_nm", row)).transpose()?.flatten();
        if theta_int.is_none() && k.is_none() {
            return Err(CsvError::Row { row, message: "needs theta_deg or k_per_nm".into() });
        }
        if let Some(t) = theta_int {
            if !(t > 0.0 && t < 90.0) {
                return Err(CsvError::Row { row, message: format!("theta_deg = {t} outside (0, 90)") });
            }
        }
        if let Some(k) = k {
            if k < 0.0 {
                return Err(CsvError::Row { row, message: format!("k_per_nm = {k} is negative") });
            }
        }
        let energy = number(&record, energy_col, "energy_mev", row)?
            .ok_or_else(|| CsvError::Row { row, message: "missing energy_mev".into() })?;
        let raw_branch = record.get(branch_col).unwrap_or("").trim();
        let branch: Branch =
            raw_branch.parse().map_err(|_| CsvError::Row { row, message: format!("unknown branch {raw_branch:?}") })?;
        points.push(DispersionPoint { theta_int, k, energy, branch });
    }
    if points.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok(points)
}

pub fn load_dispersion_csv(path: &Path) -> Result<Vec<DispersionPoint>, CsvError> {
    read_dispersion_csv(open(path)?)
}

pub fn require_both_branches(points: &[DispersionPoint]) -> Result<(), CsvError> {
    for b in Branch::BOTH {
        if !points.iter().any(|p| p.branch == b) {
            return Err(CsvError::MissingBranch(b));
        }
    }
    Ok(())
}

pub fn write_dispersion_csv<W: Write>(writer: W, points: &[DispersionPoint]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["theta_deg", "k_per_nm", "energy_mev", "branch"])?;
    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    for p in points {
        w.write_record([opt(p.theta_int), opt(p.k), format_number(p.energy), p.branch.label().to_string()])?;
    }
    w.flush().map_err(|source| CsvError::Io { path: PathBuf::new(), source })?;
    Ok(())
}

pub fn save_dispersion_csv(path: &Path, points: &[DispersionPoint]) -> Result<(), CsvError> {
    write_dispersion_csv(create(path)?, points)
}

/// Cavity dispersion from `k_per_nm,energy_mev` or `theta_deg,energy_mev`.
/// Angle-resolved bare-cavity energies are mapped to wavevectors through
/// `k = E n_prop sin θ / ħc`, which is already self-consistent because the
/// measured energy is the cavity energy at that wavevector.
pub fn read_cavity_table<R: Read>(reader: R, n_prop: f64) -> Result<CavityTable, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let energy_col = column(&headers, "energy_mev").ok_or(CsvError::MissingColumn("energy_mev"))?;
    let (abscissa_col, is_angle) = match (column(&headers, "k_per_nm"), column(&headers, "theta_deg")) {
        (Some(c), _) => (c, false),
        (None, Some(c)) => (c, true),
        (None, None) => return Err(CsvError::MissingColumn("k_per_nm")),
    };
    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_number(&record, i as u64 + 2);
        let name = if is_angle { "theta_deg" } else { "k_per_nm" };
        let x = number(&record, abscissa_col, name, row)?
            .ok_or_else(|| CsvError::Row { row, message: format!("missing {name}") })?;
        let e = number(&record, energy_col, "energy_mev", row)?
            .ok_or_else(|| CsvError::Row { row, message: "missing energy_mev".into() })?;
        let k = if is_angle {
            if !(x > 0.0 && x < 90.0) {
                return Err(CsvError::Row { row, message: format!("theta_deg = {x} outside (0, 90)") });
            }
            e * n_prop * x.to_radians().sin() / HBAR_C_MEV_NM
        } else {
            x
        };
        points.push((k, e));
    }
    if points.is_empty() {
        return Err(CsvError::Empty);
    }
    CavityTable::new(&points).map_err(|e| CsvError::Table(e.to_string()))
}

pub fn load_cavity_table(path: &Path, n_prop: f64) -> Result<CavityTable, CsvError> {
    read_cavity_table(open(path)?, n_prop)
}

/// Numeric table with a header row.
pub fn write_table<W: Write>(writer: W, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| format_number(x)))?;
    }
    w.flush().map_err(|source| CsvError::Io { path: PathBuf::new(), source })?;
    Ok(())
}

pub fn save_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CsvError> {
    write_table(create(path)?, header, rows)
}

/// Table whose first column is text.
pub fn save_labeled_table(path: &Path, header: &[&str], rows: &[(String, Vec<f64>)]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for (label, values) in rows {
        let mut record = vec![label.clone()];
        record.extend(values.iter().map(|&x| format_number(x)));
        w.write_record(&record)?;
    }
    w.flush().map_err(|source| CsvError::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{dispersion_curve, Domain, SystemParams};
    use crate::model::HamiltonianVariant;

    #[test]
    fn two_rows() {
        let text = "theta_deg,energy_mev,branch\n60,140.5,LP\n60,172.25,UP\n";
        let points = read_dispersion_csv(text.as_bytes()).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0], DispersionPoint { theta_int: Some(60.0), k: None, energy: 140.5, branch: Branch::Lower });
        assert_eq!(points[1].branch, Branch::Upper);
        require_both_branches(&points).unwrap();
        assert!(matches!(require_both_branches(&points[..1]), Err(CsvError::MissingBranch(Branch::Upper))));
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let text = "theta_deg,energy_mev,branch\n60,140.5,LP\n61,150.0,X\n";
        match read_dispersion_csv(text.as_bytes()) {
            Err(CsvError::Row { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("X"));
            }
            other => panic!("{other:?}"),
        }
        let text = "theta_deg,energy_mev,branch\n60,abc,LP\n";
        assert!(matches!(read_dispersion_csv(text.as_bytes()), Err(CsvError::Row { row: 2, .. })));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            read_dispersion_csv("theta_deg,branch\n60,LP\n".as_bytes()),
            Err(CsvError::MissingColumn("energy_mev"))
        ));
        assert!(matches!(read_dispersion_csv("energy_mev,branch\n".as_bytes()), Err(CsvError::MissingColumn(_))));
        assert!(matches!(read_dispersion_csv("theta_deg,energy_mev,branch\n".as_bytes()), Err(CsvError::Empty)));
        assert!(matches!(read_dispersion_csv("".as_bytes()), Err(CsvError::MissingColumn(_))));
    }

    #[test]
    fn computed_curve_roundtrips() {
        let p = SystemParams::reference(16.5, 60.0).unwrap();
        let grid: Vec<f64> = (0..25).map(|i| 45.0 + 1.3 * i as f64).collect();
        let curve = dispersion_curve(&p, HamiltonianVariant::Full, Domain::Angle, &grid).unwrap();
        let mut buf = Vec::new();
        write_dispersion_csv(&mut buf, &curve.points).unwrap();
        let back = read_dispersion_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), curve.points.len());
        for (a, b) in curve.points.iter().zip(&back) {
            assert_eq!(a.branch, b.branch);
            assert!((a.energy - b.energy).abs() < 1e-9);
            assert!((a.theta_int.unwrap() - b.theta_int.unwrap()).abs() < 1e-9);
            assert!((a.k.unwrap() - b.k.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(152.0), "152");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-2.5e-7), "-0.00000025");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn cavity_tables() {
        let text = "k_per_nm,energy_mev\n0,76\n0.001,90\n0.002,120\n0.003,150\n";
        let t = read_cavity_table(text.as_bytes(), 3.3).unwrap();
        assert_eq!(t.points().len(), 4);
        let text = "theta_deg,energy_mev\n10,77\n30,87\n50,118\n60,152\n";
        let t = read_cavity_table(text.as_bytes(), 3.3).unwrap();
        let (k0, e0) = t.points()[3];
        assert_eq!(e0, 152.0);
        assert!((k0 - 152.0 * 3.3 * 60f64.to_radians().sin() / HBAR_C_MEV_NM).abs() < 1e-15);
        assert!(read_cavity_table("k_per_nm,energy_mev\n0,76\n0.001,90\n".as_bytes(), 3.3).is_err());
    }
}
