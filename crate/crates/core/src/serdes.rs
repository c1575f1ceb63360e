//! Serde helpers for complex-valued payloads.
//!
//! Complex scalars travel as `[re, im]` pairs and complex matrices as nested
//! row-major arrays of such pairs, so JSON files stay language-neutral.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn complex_to_pair(z: &Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn pair_to_complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// `Vec<Complex64>` <-> `[[re, im], ...]`
pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vec<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(complex_to_pair).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(pair_to_complex).collect())
    }
}

/// `Complex64` <-> `[re, im]`
pub mod complex_num {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        complex_to_pair(z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let pair: [f64; 2] = <[f64; 2]>::deserialize(d)?;
        Ok(pair_to_complex(pair))
    }
}

/// `DMatrix<Complex64>` <-> row-major `[[[re, im], ...], ...]`
pub mod complex_mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| complex_to_pair(&m[(i, j)])).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged complex matrix"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| {
            pair_to_complex(rows[i][j])
        }))
    }
}

/// `DMatrix<f64>` <-> row-major `[[x, ...], ...]`
pub mod real_mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}
