use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{cost, CostConfig, CostError, CostReport, ShapeSpec, Variant};

/// One row of the scaling table. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRecord {
    pub variant: Variant,
    pub h: u64,
    pub w: u64,
    pub d: u64,
    pub c: u64,
    pub flops: u128,
    pub affinity_elements: u128,
    pub affinity_bytes: u128,
}

pub const CSV_HEADER: &str = "variant,h,w,d,c,flops,affinity_elements,affinity_bytes";

impl From<&CostReport> for TableRecord {
    fn from(r: &CostReport) -> Self {
        Self {
            variant: r.variant,
            h: r.shape.h,
            w: r.shape.w,
            d: r.shape.d,
            c: r.shape.c,
            flops: r.flops,
            affinity_elements: r.affinity_elements,
            affinity_bytes: r.affinity_bytes,
        }
    }
}

/// One report per size per variant, sizes outermost, variants in
/// [`Variant::ALL`] order.
pub fn scaling_table(sizes: &[ShapeSpec], cfg: &CostConfig) -> Result<Vec<CostReport>, CostError> {
    if sizes.is_empty() {
        return Err(CostError::EmptySweep);
    }
    sizes
        .iter()
        .flat_map(|s| Variant::ALL.iter().map(move |&v| cost(v, s, cfg)))
        .collect()
}

fn io_err(e: impl std::fmt::Display) -> CostError {
    CostError::Io(e.to_string())
}

pub fn write_csv(records: &[TableRecord], out: impl Write) -> Result<(), CostError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(io_err)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_csv(input: impl Read) -> Result<Vec<TableRecord>, CostError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(io_err)?
        .iter()
        .map(String::from)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(CostError::Io(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|rec| rec.map_err(io_err)).collect()
}

pub fn write_json(records: &[TableRecord], out: impl Write) -> Result<(), CostError> {
    serde_json::to_writer_pretty(out, records).map_err(io_err)
}

pub fn read_json(input: impl Read) -> Result<Vec<TableRecord>, CostError> {
    serde_json::from_reader(input).map_err(io_err)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_size_gives_four_rows() {
        let t = scaling_table(&[ShapeSpec::cube(4).unwrap()], &CostConfig::default()).unwrap();
        let names: Vec<_> = t.iter().map(|r| r.variant.as_str()).collect();
        assert_eq!(names, ["sa", "naive", "da", "fa"]);
        assert!(matches!(
            scaling_table(&[], &CostConfig::default()),
            Err(CostError::EmptySweep)
        ));
    }

    #[test]
    fn csv_has_fixed_header() {
        let t = scaling_table(&[ShapeSpec::reference()], &CostConfig::default()).unwrap();
        let recs: Vec<TableRecord> = t.iter().map(TableRecord::from).collect();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("naive,32,32,32,64,"));
        assert_eq!(read_csv(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(5)).collect();
        assert!((loglog_slope(&xs, &ys) - 5.0).abs() < 1e-12);
    }
}
