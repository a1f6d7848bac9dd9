use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{check_dates, Panel, SeriesMeta};
use crate::date::YearMonth;
use crate::error::{Error, Result};

/// Read a manifest CSV with header `id,group,tcode,start_date,source` and an
/// optional trailing `end_date` column.
pub fn load_manifest<R: Read>(reader: R) -> Result<Vec<SeriesMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<SeriesMeta> = Vec::new();
    for rec in rdr.deserialize() {
        let meta: SeriesMeta = rec?;
        if !(1..=9).contains(&meta.group) {
            return Err(Error::invalid(format!(
                "series {}: group {} outside 1..=9",
                meta.id, meta.group
            )));
        }
        if out.iter().any(|m| m.id == meta.id) {
            return Err(Error::invalid(format!("duplicate manifest id {}", meta.id)));
        }
        out.push(meta);
    }
    if out.is_empty() {
        return Err(Error::invalid("empty manifest"));
    }
    Ok(out)
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "NA" || s == "NaN"
}

/// Parse a data CSV (first column `date` as `YYYY-MM`, one column per
/// manifest id) into a panel. Cells dated before a series' start date are
/// treated as missing.
pub fn load_panel<R: Read>(manifest: &[SeriesMeta], raw: R) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("date") {
        return Err(Error::invalid("first CSV column must be `date`"));
    }
    let cols: Vec<usize> = manifest
        .iter()
        .map(|m| {
            headers
                .iter()
                .position(|h| h == m.id)
                .ok_or_else(|| Error::MissingSeries(m.id.clone()))
        })
        .collect::<Result<_>>()?;

    let mut dates: Vec<YearMonth> = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let raw_date = rec.get(0).unwrap_or("");
        let date: YearMonth = raw_date.parse()?;
        for (m, &c) in manifest.iter().zip(&cols) {
            let cell = rec.get(c).unwrap_or("");
            let v = if is_missing_token(cell) {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| Error::BadValue {
                    series: m.id.clone(),
                    date: date.to_string(),
                    value: cell.to_string(),
                })?
            };
            data.push(if date < m.start_date { f64::NAN } else { v });
        }
        dates.push(date);
    }
    check_dates(&dates)?;
    let values = DMatrix::from_row_slice(dates.len(), manifest.len(), &data);
    Panel::new(dates, values, manifest.to_vec())
}

/// Write a panel in the data-CSV layout; missing cells are left empty.
pub fn write_panel_csv<W: Write>(p: &Panel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(p.meta.iter().map(|m| m.id.clone()));
    w.write_record(&header)?;
    for (t, d) in p.dates.iter().enumerate() {
        let mut row = vec![d.to_string()];
        for j in 0..p.n_series() {
            row.push(if p.mask[(t, j)] {
                format!("{}", p.values[(t, j)])
            } else {
                String::new()
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a manifest CSV.
pub fn write_manifest_csv<W: Write>(meta: &[SeriesMeta], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_end = meta.iter().any(|m| m.end_date.is_some());
    let mut header = vec!["id", "group", "tcode", "start_date", "source"];
    if with_end {
        header.push("end_date");
    }
    w.write_record(&header)?;
    for m in meta {
        let mut row = vec![
            m.id.clone(),
            m.group.to_string(),
            m.tcode.code().to_string(),
            m.start_date.to_string(),
            m.source.clone(),
        ];
        if with_end {
            row.push(m.end_date.map(|d| d.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::TransformCode;

    const MANIFEST: &str = "id,group,tcode,start_date,source\nA,1,5,1998-01,ONS\nB,6,2,1998-01,BoE\n";

    #[test]
    fn manifest_parses() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].tcode, TransformCode::LogDiff);
        assert_eq!(m[1].group, 6);
        assert_eq!(m[1].end_date, None);
    }

    #[test]
    fn manifest_with_end_dates() {
        let s = "id,group,tcode,start_date,source,end_date\nA,1,5,1998-01,ONS,2020-09\nB,6,2,1998-01,BoE,\n";
        let m = load_manifest(s.as_bytes()).unwrap();
        assert_eq!(m[0].end_date.unwrap().to_string(), "2020-09");
        assert_eq!(m[1].end_date, None);
    }

    #[test]
    fn manifest_rejects_bad_code() {
        let s = "id,group,tcode,start_date,source\nA,1,3,1998-01,ONS\n";
        assert!(load_manifest(s.as_bytes()).is_err());
    }

    #[test]
    fn blank_cell_is_missing() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        let csv = "date,A,B\n1998-01,1.0,2.0\n1998-02,,3.0\n1998-03,1.5,4.0\n";
        let p = load_panel(&m, csv.as_bytes()).unwrap();
        assert_eq!(p.observed_count(), 5);
        assert!(!p.mask[(1, 0)]);
    }

    #[test]
    fn na_tokens_and_extra_columns() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        let csv = "date,B,X,A\n1998-01,NA,9,1\n1998-02,NaN,9,2\n";
        let p = load_panel(&m, csv.as_bytes()).unwrap();
        assert_eq!(p.column(0), vec![1.0, 2.0]);
        assert_eq!(p.observed_count(), 2);
    }

    #[test]
    fn missing_series_errors() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        let err = load_panel(&m, "date,A\n1998-01,1\n1998-02,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing series"));
        assert!(err.to_string().contains('B'));
    }

    #[test]
    fn date_errors() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        let gap = load_panel(&m, "date,A,B\n1998-01,1,1\n1998-03,1,1\n".as_bytes()).unwrap_err();
        assert!(gap.to_string().contains("non-consecutive months"), "{gap}");
        let dup = load_panel(&m, "date,A,B\n1998-01,1,1\n1998-01,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(dup, Error::DuplicateDate(_)));
        let bad = load_panel(&m, "date,A,B\nJan98,1,1\n1998-02,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(bad, Error::BadDate { .. }));
    }

    #[test]
    fn non_numeric_is_hard_error() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        let err = load_panel(&m, "date,A,B\n1998-01,1,x\n1998-02,1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::BadValue { .. }));
    }

    #[test]
    fn pre_start_cells_masked() {
        let s = "id,group,tcode,start_date,source\nA,1,1,1998-02,ONS\n";
        let m = load_manifest(s.as_bytes()).unwrap();
        let p = load_panel(&m, "date,A\n1998-01,1\n1998-02,2\n1998-03,3\n".as_bytes()).unwrap();
        assert!(!p.mask[(0, 0)]);
        assert_eq!(p.observed_count(), 2);
    }

    #[test]
    fn load_is_pure_and_round_trips() {
        let m = load_manifest(MANIFEST.as_bytes()).unwrap();
        let csv = "date,A,B\n1998-01,1.25,2\n1998-02,,3.5\n1998-03,1.5,-4\n";
        let p1 = load_panel(&m, csv.as_bytes()).unwrap();
        let p2 = load_panel(&m, csv.as_bytes()).unwrap();
        assert_eq!(p1.mask, p2.mask);
        assert_eq!(p1.dates, p2.dates);
        let mut buf = Vec::new();
        write_panel_csv(&p1, &mut buf).unwrap();
        let p3 = load_panel(&m, buf.as_slice()).unwrap();
        assert_eq!(p1.mask, p3.mask);
        for t in 0..3 {
            for j in 0..2 {
                if p1.mask[(t, j)] {
                    assert_eq!(p1.values[(t, j)].to_bits(), p3.values[(t, j)].to_bits());
                }
            }
        }
    }
}
