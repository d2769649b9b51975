//! Small dense symmetric eigensolver (cyclic Jacobi). Used for the
//! desk-size exact diagonalizations that back Temple-inequality checks.

/// Dense symmetric matrix in row-major order.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        let m = SymMatrix { n, data };
        for i in 0..n {
            for j in 0..n {
                let d = (m.get(i, j) - m.get(j, i)).abs();
                assert!(d < 1e-12, "matrix must be symmetric");
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.data[i * n + j] * x[j];
            }
            y[i] = s;
        }
        y
    }

    /// All eigenvalues in ascending order, by cyclic Jacobi rotations.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.data.clone();
        let off = |a: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
            s
        };
        let mut sweeps = 0;
        while off(&a) > 1e-26 * (1.0 + off(&self.data)) && sweeps < 100 {
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
            sweeps += 1;
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_by_two_closed_form() {
        let m = SymMatrix::from_rows(&[vec![0.1, 0.05], vec![0.05, 1.0]]);
        let ev = m.eigenvalues();
        // closed form: (tr +- sqrt(tr^2 - 4 det)) / 2
        let disc = (1.1f64 * 1.1 - 4.0 * (0.1 * 1.0 - 0.05 * 0.05)).sqrt();
        assert_relative_eq!(ev[0], (1.1 - disc) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(ev[1], (1.1 + disc) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn matches_nalgebra_on_random_matrices() {
        use rand::Rng;
        let mut rng = crate::rng::substream(3, crate::rng::Stream::CellBound, 0);
        for _ in 0..50 {
            let n = 8;
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = rng.gen_range(-1.0..1.0);
                    rows[i][j] = v;
                    rows[j][i] = v;
                }
            }
            let mine = SymMatrix::from_rows(&rows).eigenvalues();
            let mut flat = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    flat[(i, j)] = rows[i][j];
                }
            }
            let mut theirs: Vec<f64> = flat.symmetric_eigen().eigenvalues.iter().copied().collect();
            theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (x, y) in mine.iter().zip(&theirs) {
                assert_relative_eq!(x, y, max_relative = 1e-9, epsilon = 1e-11);
            }
        }
    }
}
