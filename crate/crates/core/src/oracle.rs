//! Explicit-matrix reference for the level map: builds the 0/1 superset
//! matrix and takes its polar factor through a dense SVD. Only feasible for
//! small item counts; used to check [`crate::coefficients`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::Level;

/// Largest item count the dense oracle accepts.
pub const ORACLE_MAX_ITEMS: usize = 12;

const OVERLAP_TOLERANCE: f64 = 1e-9;

fn guard(n: usize, i: usize) -> Result<()> {
    if n > ORACLE_MAX_ITEMS {
        return Err(Error::OracleTooLarge {
            n,
            max: ORACLE_MAX_ITEMS,
        });
    }
    if i + 1 > n {
        return Err(Error::LevelOutOfRange { n, level: i + 1 });
    }
    Ok(())
}

/// Superset map from level `i` to `i + 1`: entry `(r, α)` is 1 iff `α ⊂ r`.
/// Rows and columns follow rank order.
pub fn ideal_matrix(n: usize, i: usize) -> Result<DMatrix<f64>> {
    guard(n, i)?;
    let cols: Vec<u32> = Level::new(n, i)?.masks();
    let rows: Vec<u32> = Level::new(n, i + 1)?.masks();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        if cols[c] & !rows[r] == 0 {
            1.0
        } else {
            0.0
        }
    }))
}

/// Closest matrix with orthonormal columns (Frobenius norm) to `m`, and the
/// per-overlap coefficients read off it. `m` must be the ideal matrix for
/// `(n, i)` or anything with the same shape and ordering.
pub fn closest_unitary_oracle(n: usize, i: usize, m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    guard(n, i)?;
    let cols: Vec<u32> = Level::new(n, i)?.masks();
    let rows: Vec<u32> = Level::new(n, i + 1)?.masks();
    if m.nrows() != rows.len() || m.ncols() != cols.len() {
        return Err(Error::Domain(format!(
            "matrix is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            rows.len(),
            cols.len()
        )));
    }
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Domain("svd returned no left vectors".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Domain("svd returned no right vectors".into()))?;
    let polar = u * v_t;

    let mut a: Vec<Option<f64>> = vec![None; i + 1];
    let mut worst = vec![0.0f64; i + 1];
    for (c, &alpha) in cols.iter().enumerate() {
        for (r, &row) in rows.iter().enumerate() {
            let k = (alpha & row).count_ones() as usize;
            let entry = polar[(r, c)];
            match a[k] {
                None => a[k] = Some(entry),
                Some(first) => worst[k] = worst[k].max((entry - first).abs()),
            }
        }
    }
    for (k, &dev) in worst.iter().enumerate() {
        if dev > OVERLAP_TOLERANCE {
            return Err(Error::OracleInconsistent {
                overlap: k,
                deviation: dev,
            });
        }
    }
    let a = a
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.ok_or(Error::OracleInconsistent {
                overlap: k,
                deviation: f64::NAN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((polar, a))
}

/// Dense matrix with entry `a[|r ∩ α|]`, rows and columns in rank order.
pub fn structured_matrix(n: usize, i: usize, a: &[f64]) -> Result<DMatrix<f64>> {
    guard(n, i)?;
    let cols: Vec<u32> = Level::new(n, i)?.masks();
    let rows: Vec<u32> = Level::new(n, i + 1)?.masks();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        a[(rows[r] & cols[c]).count_ones() as usize]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_item_ideal_pattern() {
        let m = ideal_matrix(3, 1).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(m, expect);
    }

    #[test]
    fn two_items_from_empty_set() {
        let m = ideal_matrix(2, 0).unwrap();
        assert_eq!(m, DMatrix::from_column_slice(2, 1, &[1.0, 1.0]));
        let (_, a) = closest_unitary_oracle(2, 0, &m).unwrap();
        assert!((a[0] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn column_sums() {
        for n in 1..=8 {
            for i in 0..n {
                let m = ideal_matrix(n, i).unwrap();
                for c in 0..m.ncols() {
                    assert_eq!(m.column(c).sum(), (n - i) as f64);
                }
            }
        }
    }

    #[test]
    fn three_item_polar_factor() {
        let m = ideal_matrix(3, 1).unwrap();
        let (u, a) = closest_unitary_oracle(3, 1, &m).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, 2.0, -1.0, 2.0, -1.0, 2.0, -1.0, 2.0, 2.0]) / 3.0;
        assert!((u - expect).abs().max() < 1e-12);
        assert!((a[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((a[0] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn size_guard() {
        assert!(matches!(ideal_matrix(13, 2), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn inconsistent_input_is_fatal() {
        let mut m = ideal_matrix(4, 1).unwrap();
        m[(0, 0)] = 0.3;
        assert!(matches!(
            closest_unitary_oracle(4, 1, &m),
            Err(Error::OracleInconsistent { .. })
        ));
    }
}
