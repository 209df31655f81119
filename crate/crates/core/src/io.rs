//! CSV formats: trajectories (`t,N,lambda`), count series (column `N`) and result tables.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simulate::Trajectory;

/// Format like C's `%.17g`: 17 significant digits, trailing zeros stripped.
pub fn fmt_g17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(format!("{x:.decimals$}"))
    } else {
        let m = strip_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Write `t,N,lambda` rows, `t` starting at 1.
pub fn write_trajectory_csv<F: Real, W: Write>(traj: &Trajectory<F>, out: W) -> Result<()> {
    write_paths_csv(&traj.counts, &traj.intensities, out)
}

pub fn write_paths_csv<F: Real, W: Write>(counts: &[u64], intensities: &[F], out: W) -> Result<()> {
    if counts.len() != intensities.len() {
        return Err(Error::domain("count and intensity paths differ in length"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "N", "lambda"])?;
    for (t, (&n, &l)) in counts.iter().zip(intensities).enumerate() {
        w.write_record([
            (t + 1).to_string(),
            n.to_string(),
            fmt_g17(l.to_f64_lossy()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trajectory CSV back into `(counts, intensities)`.
pub fn read_trajectory_csv<F: Real, R: Read>(input: R) -> Result<(Vec<u64>, Vec<F>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let n_col = column(&headers, "N")?;
    let l_col = column(&headers, "lambda")?;
    let mut counts = Vec::new();
    let mut intensities = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        counts.push(parse_count(&rec[n_col], i)?);
        let l: f64 = rec[l_col]
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("row {}: bad lambda {:?}", i + 1, &rec[l_col])))?;
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::Input(format!("row {}: negative lambda", i + 1)));
        }
        intensities.push(F::lit(l));
    }
    Ok((counts, intensities))
}

/// Read the `N` column of a CSV (a bare count series or a trajectory file).
pub fn read_counts_csv<R: Read>(input: R) -> Result<Vec<u64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let n_col = column(&headers, "N")?;
    rdr.records()
        .enumerate()
        .map(|(i, rec)| parse_count(&rec?[n_col], i))
        .collect()
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Input(format!("CSV has no column named {name:?}")))
}

fn parse_count(field: &str, row: usize) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Input(format!("row {}: bad count {field:?}", row + 1)))
}

/// Write a numeric table with the given header; floats use [`fmt_g17`].
pub fn write_table_csv<W: Write>(header: &[&str], rows: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::domain("row width differs from header"));
        }
        w.write_record(row.iter().map(|&v| {
            if v.fract() == 0.0 && v.abs() < 1e15 {
                format!("{}", v as i64)
            } else {
                fmt_g17(v)
            }
        }))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntensitySpec;
    use crate::simulate::simulate;
    use proptest::prelude::*;

    #[test]
    fn g17_format() {
        assert_eq!(fmt_g17(2.7), "2.7000000000000002");
        assert_eq!(fmt_g17(3.0), "3");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(0.0), "0");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = fmt_g17(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let spec = IntensitySpec::<f64>::linear(1.0, 0.3, 0.4).unwrap();
        let tr = simulate(&spec, 3.0, 500, 10, 5).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,N,lambda\n1,"));
        assert_eq!(text.lines().count(), 501);
        let (counts, lambdas) = read_trajectory_csv::<f64, _>(&buf[..]).unwrap();
        assert_eq!(counts, tr.counts);
        assert_eq!(lambdas, tr.intensities);
        assert_eq!(read_counts_csv(&buf[..]).unwrap(), tr.counts);
    }

    #[test]
    fn count_column_only() {
        let data = "N\n3\n0\n5\n";
        assert_eq!(read_counts_csv(data.as_bytes()).unwrap(), vec![3, 0, 5]);
        assert!(read_counts_csv("x\n1\n".as_bytes()).is_err());
        assert!(read_counts_csv("N\n-1\n".as_bytes()).is_err());
    }
}
