//! Bracketed scalar root finding for increasing constraint functions.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BracketSettings {
    pub lo: f64,
    pub hi: f64,
    /// Exclusive lower limit on admissible arguments.
    pub floor: f64,
    pub max_doublings: usize,
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

fn step_down(lo: f64, width: f64, floor: f64) -> f64 {
    if lo - width > floor {
        lo - width
    } else {
        0.5 * (lo + floor)
    }
}

/// Root of a continuous `phi` that is negative far left and positive far
/// right. Expands `[lo, hi]` geometrically, then bisects down to adjacent
/// floats and returns the endpoint with the smaller `|phi|` (left on ties).
///
/// With `monotone_start = Some(p)`, a value `phi(p)` in `[0, tol]` accepts
/// `p` outright and a negative one makes `p` the lower bracket, so the
/// returned root never falls below `p` in that case.
pub fn solve_increasing(
    mut phi: impl FnMut(f64) -> f64,
    settings: &BracketSettings,
    monotone_start: Option<f64>,
) -> Result<Root> {
    let mut evaluations = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = phi(x);
        if v.is_nan() {
            Err(Error::NonFinite {
                what: "constraint function",
                step: 0,
            })
        } else {
            Ok(v)
        }
    };

    let mut lo = if settings.lo > settings.floor {
        settings.lo
    } else {
        settings.floor + 1e-3 * settings.floor.abs().max(1.0)
    };
    let mut hi = settings.hi.max(lo);
    let mut lower_known = None;

    if let Some(p) = monotone_start {
        let fp = eval(p)?;
        if (0.0..=settings.tol).contains(&fp) {
            return Ok(Root {
                x: p,
                value: fp,
                evaluations,
            });
        }
        if fp < 0.0 {
            lo = p;
            lower_known = Some(fp);
            hi = hi.max(p + 1.0);
        }
    }

    let mut width = (hi - lo).max(1.0);
    let mut flo = match lower_known {
        Some(v) => v,
        None => eval(lo)?,
    };
    let mut k = 0;
    while flo >= 0.0 {
        if flo == 0.0 {
            return Ok(Root {
                x: lo,
                value: 0.0,
                evaluations,
            });
        }
        k += 1;
        if k > settings.max_doublings {
            return Err(Error::NoRoot {
                step: 0,
                lo,
                hi,
                doublings: k - 1,
            });
        }
        hi = lo;
        lo = step_down(lo, width, settings.floor);
        width *= 2.0;
        flo = eval(lo)?;
    }

    let mut fhi = eval(hi)?;
    let mut width = (hi - lo).max(1.0);
    let mut k = 0;
    while fhi <= 0.0 {
        if fhi == 0.0 {
            return Ok(Root {
                x: hi,
                value: 0.0,
                evaluations,
            });
        }
        k += 1;
        if k > settings.max_doublings || !hi.is_finite() {
            return Err(Error::NoRoot {
                step: 0,
                lo,
                hi,
                doublings: k - 1,
            });
        }
        lo = hi;
        flo = fhi;
        hi += width;
        width *= 2.0;
        fhi = eval(hi)?;
    }

    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval(mid)?;
        if fm == 0.0 {
            return Ok(Root {
                x: mid,
                value: 0.0,
                evaluations,
            });
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let (x, value) = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    Ok(Root {
        x,
        value,
        evaluations,
    })
}
