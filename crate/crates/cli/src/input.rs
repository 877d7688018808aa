use std::fs::File;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Named numeric columns read from a CSV file with a header row.
pub struct Table {
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let records = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(Self { headers, records })
    }

    /// Parses one column. Rows are numbered from 1 after the header.
    pub fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let j = self.headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!(
                "column '{name}' not found; available: {}",
                self.headers.join(", ")
            ))
        })?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let row = i + 1;
                let raw = rec.get(j).unwrap_or("");
                if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                    return Err(CliError::Data(format!(
                        "missing value at row {row}, column '{name}'"
                    )));
                }
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::Data(format!(
                            "non-numeric value '{raw}' at row {row}, column '{name}'"
                        ))
                    })
            })
            .collect()
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| format!("cannot parse '{}' in '{s}'", p.trim()))
        })
        .collect()
}

pub fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = parse_list(s)?;
    v.try_into()
        .map_err(|_| format!("expected three comma-separated integers, got '{s}'"))
}

pub fn parse_quad(s: &str) -> Result<[usize; 4], String> {
    let v: Vec<usize> = parse_list(s)?;
    v.try_into()
        .map_err(|_| format!("expected four comma-separated integers, got '{s}'"))
}

/// `name:p1,p2` innovation family, e.g. `gamma:2,1` or `uniform:-1,1`.
pub fn parse_family(s: &str) -> Result<pmm_core::mcbench::InnovationSpec, String> {
    use pmm_core::mcbench::{Family, InnovationSpec};
    let (name, params) = s.split_once(':').unwrap_or((s, ""));
    let p: Vec<f64> = if params.is_empty() {
        Vec::new()
    } else {
        parse_list(params)?
    };
    let arity = |k: usize| {
        if p.len() == k {
            Ok(())
        } else {
            Err(format!("family '{name}' takes {k} parameter(s), got {}", p.len()))
        }
    };
    let family = match name.to_ascii_lowercase().as_str() {
        "gaussian" | "normal" if p.is_empty() => Family::Gaussian { sd: 1.0 },
        "gaussian" | "normal" => arity(1).map(|_| Family::Gaussian { sd: p[0] })?,
        "gamma" => arity(2).map(|_| Family::Gamma { shape: p[0], rate: p[1] })?,
        "lognormal" => arity(2).map(|_| Family::Lognormal { meanlog: p[0], sdlog: p[1] })?,
        "chisq" => arity(1).map(|_| Family::ChiSq { df: p[0] })?,
        "uniform" => arity(2).map(|_| Family::Uniform { lower: p[0], upper: p[1] })?,
        "beta" => arity(2).map(|_| Family::Beta { alpha: p[0], beta: p[1] })?,
        "laplace" => arity(1).map(|_| Family::Laplace { scale: p[0] })?,
        "triangular" => arity(2).map(|_| Family::Triangular { lower: p[0], upper: p[1] })?,
        other => return Err(format!("unknown innovation family '{other}'")),
    };
    let spec = InnovationSpec::new(family);
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}
