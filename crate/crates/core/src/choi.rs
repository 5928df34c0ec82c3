//! Raw Choi-operator algebra.
//!
//! Convention: a linear map `N` from an `a`-dimensional input to a
//! `b`-dimensional output has Choi operator `C = sum_ij |i><j| (x) N(|i><j|)`,
//! input factor first. The functions here take plain matrices and dimensions
//! and make no CPTP assumptions, so they also serve the linear extension of
//! supermaps to arbitrary operators.

use crate::qmat::{eigh, CMatrix, C64, ZERO};

/// Choi operator of `rho -> sum_k K rho K^dag`.
pub fn from_kraus(kraus: &[CMatrix]) -> CMatrix {
    let (dout, din) = kraus[0].shape();
    let n = din * dout;
    let mut out = CMatrix::zeros(n, n);
    for k in kraus {
        assert_eq!(k.shape(), (dout, din), "Kraus operators must share a shape");
        // (1 (x) K)|I>> has entry K[o, i] at index (i, o).
        let v: Vec<C64> = (0..n).map(|idx| k[(idx % dout, idx / dout)]).collect();
        for r in 0..n {
            if v[r] == ZERO {
                continue;
            }
            for s in 0..n {
                out[(r, s)] += v[r] * v[s].conj();
            }
        }
    }
    out
}

/// Choi operator of an arbitrary linear map given by its action on operators.
pub fn from_linear_map(din: usize, dout: usize, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let n = din * dout;
    let mut out = CMatrix::zeros(n, n);
    for i in 0..din {
        for j in 0..din {
            let img = f(&CMatrix::unit(din, din, i, j));
            assert_eq!(img.shape(), (dout, dout), "map output has the wrong shape");
            for o in 0..dout {
                for p in 0..dout {
                    out[(i * dout + o, j * dout + p)] = img[(o, p)];
                }
            }
        }
    }
    out
}

/// `N(rho) = Tr_in[(rho^T (x) 1) C]`.
pub fn apply(choi: &CMatrix, din: usize, dout: usize, rho: &CMatrix) -> CMatrix {
    assert_eq!(choi.nrows(), din * dout, "Choi shape mismatch");
    assert_eq!(rho.shape(), (din, din), "input operator shape mismatch");
    let mut out = CMatrix::zeros(dout, dout);
    for a in 0..din {
        for b in 0..din {
            let w = rho[(a, b)];
            if w == ZERO {
                continue;
            }
            for o in 0..dout {
                for p in 0..dout {
                    out[(o, p)] += w * choi[(a * dout + o, b * dout + p)];
                }
            }
        }
    }
    out
}

/// Adjoint map: `Tr[Y N(rho)] = Tr[N^dag(Y) rho]`.
pub fn apply_dual(choi: &CMatrix, din: usize, dout: usize, y: &CMatrix) -> CMatrix {
    assert_eq!(choi.nrows(), din * dout, "Choi shape mismatch");
    assert_eq!(y.shape(), (dout, dout), "output operator shape mismatch");
    CMatrix::from_fn(din, din, |b, a| {
        let mut acc = ZERO;
        for o in 0..dout {
            for p in 0..dout {
                acc += y[(p, o)] * choi[(a * dout + o, b * dout + p)];
            }
        }
        acc
    })
}

/// Choi of `second o first`, with `first: a -> b` and `second: b -> c`.
pub fn compose(first: &CMatrix, a: usize, b: usize, second: &CMatrix, c: usize) -> CMatrix {
    assert_eq!(first.nrows(), a * b, "first Choi shape mismatch");
    assert_eq!(second.nrows(), b * c, "second Choi shape mismatch");
    let mut out = CMatrix::zeros(a * c, a * c);
    for i in 0..a {
        for j in 0..a {
            for m in 0..b {
                for n in 0..b {
                    let w = first[(i * b + m, j * b + n)];
                    if w == ZERO {
                        continue;
                    }
                    for o in 0..c {
                        for p in 0..c {
                            out[(i * c + o, j * c + p)] += w * second[(m * c + o, n * c + p)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Choi of `N1 (x) N2` with factor order `(in1 in2)(out1 out2)`.
pub fn tensor(c1: &CMatrix, a1: usize, b1: usize, c2: &CMatrix, a2: usize, b2: usize) -> CMatrix {
    let joint = crate::qmat::kron(c1, c2);
    crate::qmat::permute_factors(&joint, &[a1, b1, a2, b2], &[0, 2, 1, 3])
}

/// Applies a map on the leading `din`-dimensional factor of an operator on `din * rest`.
pub fn apply_on_first(choi: &CMatrix, din: usize, dout: usize, rho: &CMatrix, rest: usize) -> CMatrix {
    assert_eq!(rho.shape(), (din * rest, din * rest), "operator shape mismatch");
    let mut out = CMatrix::zeros(dout * rest, dout * rest);
    for a in 0..din {
        for b in 0..din {
            for r in 0..rest {
                for s in 0..rest {
                    let w = rho[(a * rest + r, b * rest + s)];
                    if w == ZERO {
                        continue;
                    }
                    for o in 0..dout {
                        for p in 0..dout {
                            out[(o * rest + r, p * rest + s)] += w * choi[(a * dout + o, b * dout + p)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Kraus operators from the eigendecomposition of a PSD Choi operator.
/// Eigenvalues at or below `rel_tol * max eigenvalue` are dropped.
pub fn kraus_from_choi(choi: &CMatrix, din: usize, dout: usize, rel_tol: f64) -> Vec<CMatrix> {
    let (vals, vecs) = eigh(choi);
    let top = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    vals.iter()
        .enumerate()
        .rev()
        .filter(|(_, &v)| v > rel_tol * top && v > 0.0)
        .map(|(k, &v)| {
            let s = v.sqrt();
            CMatrix::from_fn(dout, din, |o, i| vecs[(i * dout + o, k)] * s)
        })
        .collect()
}

/// Choi of the discarding map `Tr: d -> 1`.
pub fn trace_map(d: usize) -> CMatrix {
    CMatrix::identity(d)
}

/// Choi of the identity map on dimension `d`.
pub fn identity(d: usize) -> CMatrix {
    CMatrix::max_entangled(d)
}
