//! Linear algebra over jets and `f64`.
//!
//! Jet-valued systems are solved by Gauss–Jordan elimination with pivoting on
//! the value part (a jet is invertible exactly when its value part is
//! nonzero). Plain `f64` systems go through nalgebra.

use crate::error::{Error, Result};
use crate::jet::Jet;
use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-12;

/// Solve `A X = B` for jet matrices (`B` given column-wise). Consumes copies.
pub fn jet_solve(a: &[Vec<Jet>], b: &[Vec<Jet>], context: &str) -> Result<Vec<Vec<Jet>>> {
    let n = a.len();
    assert!(n > 0 && a.iter().all(|row| row.len() == n), "A must be square");
    assert!(b.iter().all(|col| col.len() == n), "B columns must match A");
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut rhs: Vec<Vec<Jet>> = b.to_vec();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |s, j| s.max(j.value().abs()))
        .max(1.0);

    for col in 0..n {
        // Pivot on the largest value part in this column.
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[r][col].value().abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_abs <= PIVOT_TOL * scale {
            return Err(Error::Singular {
                context: context.to_string(),
                pivot: pivot_abs,
            });
        }
        m.swap(col, pivot_row);
        for colv in rhs.iter_mut() {
            colv.swap(col, pivot_row);
        }
        let inv = m[col][col].recip().map_err(|_| Error::Singular {
            context: context.to_string(),
            pivot: 0.0,
        })?;
        for j in 0..n {
            m[col][j] = m[col][j].mul(&inv);
        }
        for colv in rhs.iter_mut() {
            colv[col] = colv[col].mul(&inv);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r][col].clone();
            if factor.max_abs_coeff() == 0.0 {
                continue;
            }
            for j in 0..n {
                let t = factor.mul(&m[col][j]);
                m[r][j] = m[r][j].sub(&t);
            }
            for colv in rhs.iter_mut() {
                let t = factor.mul(&colv[col]);
                colv[r] = colv[r].sub(&t);
            }
        }
    }
    Ok(rhs)
}

/// Invert a square jet matrix.
pub fn jet_inverse(a: &[Vec<Jet>], context: &str) -> Result<Vec<Vec<Jet>>> {
    let n = a.len();
    let proto = &a[0][0];
    let (dim, order) = (proto.dim(), proto.order());
    // Identity columns.
    let cols: Vec<Vec<Jet>> = (0..n)
        .map(|c| {
            (0..n)
                .map(|r| Jet::constant(dim, order, if r == c { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let solved_cols = jet_solve(a, &cols, context)?;
    // Transpose columns back into rows.
    Ok((0..n)
        .map(|r| (0..n).map(|c| solved_cols[c][r].clone()).collect())
        .collect())
}

/// Least-squares solution of an overdetermined jet system `M x = b` via the
/// normal equations `(MᵀM) x = Mᵀ b`. Rows of `m` are equations.
pub fn jet_least_squares(m: &[Vec<Jet>], b: &[Jet], context: &str) -> Result<Vec<Jet>> {
    let rows = m.len();
    assert_eq!(b.len(), rows);
    assert!(rows > 0);
    let cols = m[0].len();
    let proto = &m[0][0];
    let (dim, order) = (proto.dim(), proto.order());
    let zero = || Jet::constant(dim, order, 0.0);
    let mut mtm = vec![vec![zero(); cols]; cols];
    let mut mtb = vec![zero(); cols];
    for r in 0..rows {
        for i in 0..cols {
            for j in 0..cols {
                let t = m[r][i].mul(&m[r][j]);
                mtm[i][j] = mtm[i][j].add(&t);
            }
            let t = m[r][i].mul(&b[r]);
            mtb[i] = mtb[i].add(&t);
        }
    }
    let sol = jet_solve(&mtm, &[mtb], context)?;
    Ok(sol.into_iter().next().unwrap())
}

/// Solve a dense `f64` system.
pub fn solve_f64(a: DMatrix<f64>, b: DVector<f64>, context: &str) -> Result<Vec<f64>> {
    let lu = a.lu();
    match lu.solve(&b) {
        Some(x) => Ok(x.iter().copied().collect()),
        None => Err(Error::Singular {
            context: context.to_string(),
            pivot: 0.0,
        }),
    }
}

/// Invert a dense `f64` matrix.
pub fn invert_f64(a: DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    a.try_inverse().ok_or(Error::Singular {
        context: format!("{context} ({n}x{n} matrix)"),
        pivot: 0.0,
    })
}

/// Eigenvalues of a real matrix as `(re, im)` pairs, sorted by real part then
/// imaginary part for deterministic output.
pub fn eigenvalues(a: DMatrix<f64>) -> Vec<(f64, f64)> {
    let ev = a.complex_eigenvalues();
    let mut out: Vec<(f64, f64)> = ev.iter().map(|z| (z.re, z.im)).collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet_c(v: f64) -> Jet {
        Jet::constant(2, 2, v)
    }

    #[test]
    fn jet_matrix_inverse_round_trips() {
        // A = [[1 + u1, u2], [u2, 2]] at the point (0.3, -0.4).
        let u1 = Jet::variable(2, 2, 0, 0.3);
        let u2 = Jet::variable(2, 2, 1, -0.4);
        let one = jet_c(1.0);
        let a = vec![
            vec![one.add(&u1), u2.clone()],
            vec![u2.clone(), jet_c(2.0)],
        ];
        let inv = jet_inverse(&a, "test").unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = jet_c(0.0);
                for k in 0..2 {
                    s = s.add(&a[i][k].mul(&inv[k][j]));
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - expect).abs() < 1e-13);
                assert!(s.nilpotent().max_abs_coeff() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_value_part_is_detected() {
        // Value parts are [[0,0],[0,0]] even though higher coefficients vary.
        let u1 = Jet::variable(2, 2, 0, 0.0);
        let a = vec![vec![u1.clone(), u1.clone()], vec![u1.clone(), u1]];
        match jet_solve(&a, &[vec![jet_c(1.0), jet_c(0.0)]], "test") {
            Err(Error::Singular { .. }) => {}
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        // Consistent overdetermined system: x = (u1, 3).
        let u1 = Jet::variable(2, 2, 0, 0.7);
        let m = vec![
            vec![jet_c(1.0), jet_c(0.0)],
            vec![jet_c(0.0), jet_c(1.0)],
            vec![jet_c(1.0), jet_c(1.0)],
        ];
        let b = vec![u1.clone(), jet_c(3.0), u1.add(&jet_c(3.0))];
        let x = jet_least_squares(&m, &b, "test").unwrap();
        assert!((x[0].value() - 0.7).abs() < 1e-13);
        assert!((x[0].d1(0) - 1.0).abs() < 1e-13);
        assert!((x[1].value() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn eigenvalues_are_sorted() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ev = eigenvalues(a);
        assert!((ev[0].1 - -1.0).abs() < 1e-12);
        assert!((ev[1].1 - 1.0).abs() < 1e-12);
    }
}
