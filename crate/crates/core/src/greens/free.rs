//! Green's function of the unbounded uniform lattice, used to subtract the
//! coincidence (self-interaction) part of the correlations.

use std::collections::HashMap;

use super::GreenAccess;
use crate::quadrature::adaptive_gauss_legendre;
use crate::C64;

/// Offsets |m|, |n| up to this bound are tabulated.
const REACH: i64 = 4;

#[derive(Clone, Debug)]
pub struct FreeLattice {
    table: HashMap<(i64, i64), C64>,
}

/// Decaying root of z + 1/z = β and the factor 1/(1/z − z).
fn decaying_root(beta: C64) -> (C64, C64) {
    let s = (beta * beta - 4.0).sqrt();
    let (p, m) = (beta + s, beta - s);
    let big = if p.norm() >= m.norm() { p / 2.0 } else { m / 2.0 };
    let z = 1.0 / big;
    (z, 1.0 / (big - z))
}

impl FreeLattice {
    /// `k2` = εω², `h` the spacing; sources carry the same 1/cell-measure weight
    /// as the bounded solves.
    pub fn new(k2: C64, h: f64, one_dimensional: bool) -> Self {
        let mut table = HashMap::new();
        let kh2 = k2 * h * h;
        if one_dimensional {
            let (z, amp) = decaying_root(C64::new(2.0, 0.0) - kh2);
            for m in 0..=REACH {
                table.insert((m, 0), h * amp * z.powi(m as i32));
            }
        } else {
            for m in 0..=REACH {
                for n in 0..=m {
                    let f = |phi: f64| {
                        let (z, amp) = decaying_root(C64::new(4.0 - 2.0 * phi.cos(), 0.0) - kh2);
                        amp * z.powi(m as i32) * (n as f64 * phi).cos()
                    };
                    let v = adaptive_gauss_legendre(&f, 0.0, std::f64::consts::PI, 1e-13) / std::f64::consts::PI;
                    table.insert((m, n), v);
                    table.insert((n, m), v);
                }
            }
        }
        Self { table }
    }

    pub fn at_offset(&self, dm: i64, dn: i64) -> C64 {
        let key = (dm.abs(), dn.abs());
        *self
            .table
            .get(&key)
            .unwrap_or_else(|| panic!("free-lattice offset {key:?} beyond tabulated reach {REACH}"))
    }
}

impl GreenAccess for FreeLattice {
    fn g(&self, a: (i64, i64), b: (i64, i64)) -> C64 {
        self.at_offset(a.0 - b.0, a.1 - b.1)
    }
}

/// G − G_free: removes the coincidence singularity without changing the
/// closed-surface integral.
pub struct Subtracted<'a, A: GreenAccess> {
    pub inner: &'a A,
    pub free: &'a FreeLattice,
}

impl<A: GreenAccess> GreenAccess for Subtracted<'_, A> {
    fn g(&self, a: (i64, i64), b: (i64, i64)) -> C64 {
        self.inner.g(a, b) - self.free.g(a, b)
    }
}
