//! Closed-form co-isometries for the CNOT, SWAP and identity prior families,
//! and circuit realizations of their zero-noise limits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channels::{prior_gamma, Channel};
use crate::error::{Error, Result};
use crate::qmat::{re, CMatrix, SystemDims};
use crate::supermaps::TeethRealization;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cnot,
    Swap,
    Identity,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Cnot, Family::Swap, Family::Identity];

    /// The two-qubit unitary `U` of the prior `rho -> D_p(U (rho (x) |0><0|) U^dag)`.
    pub fn unitary(self) -> CMatrix {
        match self {
            Family::Cnot => CMatrix::from_real(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]),
            Family::Swap => CMatrix::from_real(4, 4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]),
            Family::Identity => CMatrix::identity(4),
        }
    }

    /// The prior channel `X -> Z A` with depolarizing strength `p`.
    pub fn prior(self, p: f64) -> Result<Channel> {
        prior_gamma(p, &self.unitary())
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Cnot => "cnot",
            Family::Swap => "swap",
            Family::Identity => "identity",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnot" => Ok(Family::Cnot),
            "swap" => Ok(Family::Swap),
            "identity" | "id" => Ok(Family::Identity),
            other => Err(Error::Parse(format!("unknown family `{other}` (expected cnot, swap or identity)"))),
        }
    }
}

/// Rotation angle of a closed-form co-isometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleFamily {
    pub family: Family,
    pub p: f64,
    pub theta: f64,
}

impl AngleFamily {
    pub fn new(family: Family, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::OutOfRange { what: "noise parameter p", value: p });
        }
        let r = (8.0 - 7.0 * p).sqrt();
        let (s, c) = match family {
            Family::Cnot => {
                let s = (r - p.sqrt()) / (2.0 * (2.0 - p).sqrt());
                (s, (1.0 - s * s).max(0.0).sqrt())
            }
            Family::Swap => {
                let c = (r - p.sqrt()) / (2.0 * (2.0 - p).sqrt());
                ((1.0 - c * c).max(0.0).sqrt(), c)
            }
            Family::Identity => {
                let s = ((p.sqrt() + r) / (2.0 * (4.0 - 3.0 * p).sqrt())).sqrt();
                (s, (1.0 - s * s).max(0.0).sqrt())
            }
        };
        Ok(Self { family, p, theta: s.atan2(c) })
    }

    pub fn sin(&self) -> f64 {
        self.theta.sin()
    }

    pub fn cos(&self) -> f64 {
        self.theta.cos()
    }
}

/// The closed-form unitary `V` for `family` at noise `p`.
///
/// Rows are indexed by `(X_r, Z_r, A_r)` and columns by `(X, Z, R)`, each a qubit.
pub fn analytical_v(family: Family, p: f64) -> Result<(CMatrix, AngleFamily)> {
    let angle = AngleFamily::new(family, p)?;
    let (s, c) = (angle.sin(), angle.cos());
    let mut v = CMatrix::zeros(8, 8);
    let entries: Vec<(usize, usize, f64)> = match family {
        Family::Cnot => {
            let mut e: Vec<_> = [0, 1, 3, 4, 6, 7].iter().map(|&k| (k, k, 1.0)).collect();
            e.extend([(2, 2, c), (2, 5, -s), (5, 2, s), (5, 5, c)]);
            e
        }
        Family::Swap => vec![
            (0, 4, -1.0),
            (1, 5, 1.0),
            (2, 7, 1.0),
            (3, 3, c),
            (3, 6, -s),
            (4, 0, 1.0),
            (5, 1, 1.0),
            (6, 3, s),
            (6, 6, c),
            (7, 2, 1.0),
        ],
        Family::Identity => vec![
            (0, 1, 1.0),
            (1, 3, s),
            (1, 4, c),
            (2, 0, 1.0),
            (3, 2, 1.0),
            (4, 6, 1.0),
            (5, 5, 1.0),
            (6, 7, 1.0),
            (7, 3, c),
            (7, 4, -s),
        ],
    };
    for (i, j, x) in entries {
        v[(i, j)] = re(x);
    }
    Ok((v, angle))
}

/// Circuit realization of the zero-noise retrodiction supermap for `family`:
/// an isometry `U_L: X_r -> X M1` and a unitary `U_R: Z M1 -> Z_r A_r M2`, with `M2` discarded.
pub fn circuit_realization(family: Family) -> TeethRealization {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let a = (2.0 + 2f64.sqrt()).sqrt() / 2.0;
    let b = (2.0 - 2f64.sqrt()).sqrt() / 2.0;
    let c1 = (2.0 / (2.0 + 2f64.sqrt())).sqrt();
    let c2 = (2f64.sqrt() / (2.0 + 2f64.sqrt())).sqrt();
    // (coefficient, x, m1, x_r)
    let left: Vec<(f64, usize, usize, usize)> = match family {
        Family::Cnot => vec![(h, 0, 0, 0), (h, 1, 1, 0), (h, 0, 2, 1), (h, 1, 0, 1)],
        Family::Swap => vec![(h, 0, 0, 0), (h, 1, 1, 0), (h, 0, 2, 1), (h, 1, 3, 1)],
        Family::Identity => vec![(a, 0, 0, 0), (b, 1, 1, 0), (b, 0, 2, 1), (a, 1, 3, 1)],
    };
    // (coefficient, z_r, a_r, m2, z, m1)
    let right: Vec<(f64, usize, usize, usize, usize, usize)> = match family {
        Family::Cnot => vec![
            (1.0, 0, 0, 0, 0, 0),
            (1.0, 1, 0, 1, 0, 1),
            (1.0, 1, 1, 0, 0, 2),
            (1.0, 0, 1, 1, 0, 3),
            (-1.0, 1, 1, 1, 1, 0),
            (-1.0, 0, 0, 1, 1, 1),
            (1.0, 0, 1, 0, 1, 2),
            (1.0, 1, 0, 0, 1, 3),
        ],
        Family::Swap => vec![
            (1.0, 0, 0, 0, 0, 0),
            (1.0, 0, 0, 1, 0, 1),
            (1.0, 0, 1, 0, 0, 2),
            (1.0, 0, 1, 1, 0, 3),
            (1.0, 1, 1, 0, 1, 0),
            (1.0, 1, 0, 0, 1, 1),
            (-1.0, 1, 1, 1, 1, 2),
            (-1.0, 1, 0, 1, 1, 3),
        ],
        Family::Identity => vec![
            (1.0, 0, 1, 1, 0, 1),
            (1.0, 1, 1, 0, 1, 2),
            (b, 1, 0, 1, 0, 0),
            (b, 0, 0, 0, 1, 1),
            (b, 0, 0, 1, 1, 3),
            (b, 1, 0, 0, 0, 2),
            (a, 0, 0, 0, 0, 0),
            (-a, 1, 0, 1, 1, 1),
            (a, 1, 0, 0, 1, 3),
            (-a, 0, 0, 1, 0, 2),
            (c1, 0, 1, 0, 0, 3),
            (c1, 1, 1, 1, 1, 0),
            (c2, 0, 1, 0, 1, 0),
            (-c2, 1, 1, 1, 0, 3),
        ],
    };
    let mut u_left = CMatrix::zeros(8, 2);
    for (coef, x, m1, xr) in left {
        u_left[(x * 4 + m1, xr)] += re(coef);
    }
    let mut u_right = CMatrix::zeros(8, 8);
    for (coef, zr, ar, m2, z, m1) in right {
        u_right[(zr * 4 + ar * 2 + m2, z * 4 + m1)] += re(coef);
    }
    TeethRealization::without_initial_ancilla(
        u_left,
        u_right,
        [
            SystemDims::single("Xr", 2),
            SystemDims::single("X", 2),
            SystemDims::single("Z", 2),
            SystemDims::qubits(&["Zr", "Ar"]),
        ],
        SystemDims::single("M1", 4),
        SystemDims::single("M2", 2),
    )
}
