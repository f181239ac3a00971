//! Row-major JSON encoding for `DMatrix<f64>`: `{"rows": r, "cols": c, "data": [..]}`.
//!
//! Floats go through serde_json with `float_roundtrip`, so every value reads back bit-exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct RowMajor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut data = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        data.extend(m.row(r).iter().copied());
    }
    RowMajor {
        rows: m.nrows(),
        cols: m.ncols(),
        data,
    }
    .serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let raw = RowMajor::deserialize(d)?;
    if raw.rows * raw.cols != raw.data.len() {
        return Err(serde::de::Error::custom(format!(
            "matrix {}x{} carries {} values",
            raw.rows,
            raw.cols,
            raw.data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(raw.rows, raw.cols, &raw.data))
}
