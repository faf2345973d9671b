//! `measurements.csv`: header `z_1,...,z_n,b`, one sensing vector and its
//! measurement per row. Complex files interleave `re_k,im_k` pairs.

use std::io::Read;

use liftfeas::{Complex, DMatrix, DVector, Field};

/// Scalars that can be read from one (real) or two (complex) CSV columns.
pub trait CsvScalar: Field {
    const COLUMNS: usize;
    fn from_columns(cols: &[f64]) -> Self;
}

impl CsvScalar for f64 {
    const COLUMNS: usize = 1;
    fn from_columns(cols: &[f64]) -> Self {
        cols[0]
    }
}

impl CsvScalar for Complex<f64> {
    const COLUMNS: usize = 2;
    fn from_columns(cols: &[f64]) -> Self {
        Complex::new(cols[0], cols[1])
    }
}

pub struct Measurements<T: Field> {
    /// `n x m`, one sensing vector per column.
    pub vectors: DMatrix<T>,
    pub values: DVector<f64>,
}

fn parse_cell(s: &str, row: usize, col: usize) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("row {row}, column {col}: `{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("row {row}, column {col}: non-finite value"));
    }
    Ok(v)
}

pub fn read<T: CsvScalar, R: Read>(source: R, n: usize) -> Result<Measurements<T>, String> {
    if n == 0 {
        return Err("n must be at least 1".into());
    }
    let width = T::COLUMNS * n + 1;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = rdr.headers().map_err(|e| format!("cannot read header: {e}"))?;
    if header.len() != width {
        return Err(format!(
            "header has {} columns, expected {width} for n={n} ({} field)",
            header.len(),
            T::SCALAR
        ));
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        let nums = rec
            .iter()
            .enumerate()
            .map(|(col, s)| parse_cell(s, row, col + 1))
            .collect::<Result<Vec<f64>, String>>()?;
        coords.extend(nums[..width - 1].chunks(T::COLUMNS).map(T::from_columns));
        values.push(nums[width - 1]);
    }
    if values.is_empty() {
        return Err("no measurement rows".into());
    }
    Ok(Measurements {
        vectors: DMatrix::from_vec(n, values.len(), coords),
        values: DVector::from_vec(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_real_rows() {
        let text = "z_1,z_2,b\n1,0,1\n0.5, -2 ,4.25\n";
        let m = read::<f64, _>(text.as_bytes(), 2).unwrap();
        assert_eq!(m.vectors.shape(), (2, 2));
        assert_eq!(m.vectors[(1, 1)], -2.0);
        assert_eq!(m.values.as_slice(), &[1.0, 4.25]);
    }

    #[test]
    fn reads_interleaved_complex_rows() {
        let text = "re_1,im_1,re_2,im_2,b\n1,2,3,4,30\n";
        let m = read::<Complex<f64>, _>(text.as_bytes(), 2).unwrap();
        assert_eq!(m.vectors[(0, 0)], Complex::new(1.0, 2.0));
        assert_eq!(m.vectors[(1, 0)], Complex::new(3.0, 4.0));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read::<f64, _>("z_1,b\n1,2\n".as_bytes(), 2).is_err());
        assert!(read::<f64, _>("z_1,z_2,b\n1,x,2\n".as_bytes(), 2).is_err());
        assert!(read::<f64, _>("z_1,z_2,b\n1,2\n".as_bytes(), 2).is_err());
        assert!(read::<f64, _>("z_1,z_2,b\n1,NaN,2\n".as_bytes(), 2).is_err());
        assert!(read::<f64, _>("z_1,z_2,b\n".as_bytes(), 2).is_err());
    }
}
