//! A circle obtained from an irrational rotation by opening each orbit point
//! `Rⁿ(0)` into a closed interval.
//!
//! Coordinates live on `[0, 1)`. The rotation circle is compressed by the
//! factor `1 − Λ` (with `Λ` the total inserted length) and the interval for
//! orbit index `n` is placed where `Rⁿ(0)` used to be. The induced map sends
//! the interval of index `n` affinely onto the interval of index `n + 1` and
//! acts as the rotation on the remaining Cantor part.
//!
//! Only indices `|n| ≤ window` are inserted. Interval lengths decay fast
//! enough that the intervals past the window lie below float resolution; the
//! map collapses the last interval of the window onto the next orbit point.

use serde::{Deserialize, Serialize};

use crate::suspension::SuspensionError;

/// Orbit points in `[0, 1)` for indices `−window..=window`, at most this many
/// on each side.
pub const MAX_WINDOW: i64 = 1 << 21;

/// How the inserted lengths decay with `|n|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    /// `ℓ_n = L·2^{−|n|}`
    Geometric,
    /// `ℓ_n = L/(1 + |n|)³`
    InverseCube,
}

impl Decay {
    pub fn length(self, base: f64, n: i64) -> f64 {
        let k = n.unsigned_abs();
        match self {
            Decay::Geometric => base * 0.5f64.powi(k.min(2000) as i32),
            Decay::InverseCube => {
                let d = 1.0 + k as f64;
                base / (d * d * d)
            }
        }
    }

    /// Ratio `ℓ_{n+1}/ℓ_n`.
    fn forward_ratio(self, n: i64) -> f64 {
        match self {
            Decay::Geometric => {
                if n >= 0 {
                    0.5
                } else {
                    2.0
                }
            }
            Decay::InverseCube => {
                let a = 1.0 + n.unsigned_abs() as f64;
                let b = 1.0 + (n + 1).unsigned_abs() as f64;
                (a / b).powi(3)
            }
        }
    }
}

/// `x + n·alpha mod 1`, with the product split exactly into head and tail.
pub fn rotate(x: f64, n: i64, alpha: f64) -> f64 {
    let nf = n as f64;
    let head = nf * alpha;
    let tail = nf.mul_add(alpha, -head);
    reduce_unit((x + (head - head.floor())) + tail)
}

pub(crate) fn reduce_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Where a coordinate sits on the split circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    /// On the Cantor part, at rotation coordinate `theta`.
    Gap { theta: f64 },
    /// Inside the inserted interval of orbit index `index`.
    Inside { index: i64, offset: f64, length: f64 },
}

#[derive(Clone, Debug)]
pub struct SplitCircle {
    alpha: f64,
    base_length: f64,
    decay: Decay,
    window: i64,
    scale: f64,
    total: f64,
    pos: Vec<f64>,
    index: Vec<i64>,
    start: Vec<f64>,
    end: Vec<f64>,
    below: Vec<f64>,
    slot: Vec<u32>,
}

impl SplitCircle {
    pub fn new(alpha: f64, base_length: f64, decay: Decay, window: i64) -> Result<Self, SuspensionError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SuspensionError::InvalidParameter(format!(
                "rotation number must lie in (0,1), got {alpha}"
            )));
        }
        if !(base_length > 0.0 && base_length.is_finite()) {
            return Err(SuspensionError::InvalidParameter(format!(
                "interval length must be positive, got {base_length}"
            )));
        }
        if !(1..=MAX_WINDOW).contains(&window) {
            return Err(SuspensionError::InvalidParameter(format!(
                "insertion window must be in 1..={MAX_WINDOW}, got {window}"
            )));
        }
        let count = (2 * window + 1) as usize;
        let mut entries: Vec<(f64, i64)> = (-window..=window).map(|n| (rotate(0.0, n, alpha), n)).collect();
        // smallest lengths first keeps the total accurate
        let mut total = 0.0;
        for k in (0..=window).rev() {
            total += decay.length(base_length, k);
            if k > 0 {
                total += decay.length(base_length, -k);
            }
        }
        if total >= 0.5 {
            return Err(SuspensionError::InsertionOverflow { total });
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SuspensionError::InvalidParameter(format!(
                    "orbit points {} and {} coincide; alpha is effectively rational",
                    w[0].1, w[1].1
                )));
            }
        }
        let scale = 1.0 - total;
        let mut pos = Vec::with_capacity(count);
        let mut index = Vec::with_capacity(count);
        let mut start = Vec::with_capacity(count);
        let mut end = Vec::with_capacity(count);
        let mut below = Vec::with_capacity(count);
        let mut slot = vec![0u32; count];
        let mut acc = 0.0;
        for (k, (x, n)) in entries.into_iter().enumerate() {
            let len = decay.length(base_length, n);
            let s = scale * x + acc;
            pos.push(x);
            index.push(n);
            start.push(s);
            end.push(s + len);
            below.push(acc);
            slot[(n + window) as usize] = k as u32;
            acc += len;
        }
        for k in 0..count {
            let next = if k + 1 < count { start[k + 1] } else { 1.0 };
            if end[k] > next {
                return Err(SuspensionError::InvalidParameter(format!(
                    "interval {} overlaps its neighbour",
                    index[k]
                )));
            }
        }
        Ok(SplitCircle {
            alpha,
            base_length,
            decay,
            window,
            scale,
            total,
            pos,
            index,
            start,
            end,
            below,
            slot,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    pub fn base_length(&self) -> f64 {
        self.base_length
    }

    /// Total inserted length `Λ`.
    pub fn inserted_length(&self) -> f64 {
        self.total
    }

    /// Nominal length of the interval for orbit index `n`.
    pub fn nominal_length(&self, n: i64) -> f64 {
        self.decay.length(self.base_length, n)
    }

    fn entry(&self, n: i64) -> Option<usize> {
        if n.abs() > self.window {
            None
        } else {
            Some(self.slot[(n + self.window) as usize] as usize)
        }
    }

    /// Endpoints of the inserted interval of index `n`, if inserted.
    pub fn interval(&self, n: i64) -> Option<(f64, f64)> {
        self.entry(n).map(|k| (self.start[k], self.end[k]))
    }

    /// Rotation coordinate of the orbit point `Rⁿ(0)`.
    pub fn orbit_point(&self, n: i64) -> f64 {
        match self.entry(n) {
            Some(k) => self.pos[k],
            None => rotate(0.0, n, self.alpha),
        }
    }

    /// Inserted intervals as `(index, start, end)` in circle order.
    pub fn intervals(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        (0..self.pos.len()).map(move |k| (self.index[k], self.start[k], self.end[k]))
    }

    /// Embeds a rotation coordinate. Orbit points land on the left endpoint
    /// of their interval.
    pub fn lift(&self, theta: f64) -> f64 {
        let theta = reduce_unit(theta);
        let k = self.pos.partition_point(|&x| x < theta);
        let below = if k < self.pos.len() { self.below[k] } else { self.total };
        reduce_unit(self.scale * theta + below)
    }

    pub fn locate(&self, y: f64) -> Location {
        let y = reduce_unit(y);
        let k = self.start.partition_point(|&s| s <= y);
        if k == 0 {
            return Location::Gap { theta: y / self.scale };
        }
        let j = k - 1;
        if y <= self.end[j] {
            Location::Inside {
                index: self.index[j],
                offset: y - self.start[j],
                length: self.end[j] - self.start[j],
            }
        } else {
            let consumed = self.below[j] + (self.end[j] - self.start[j]);
            Location::Gap {
                theta: ((y - consumed) / self.scale).clamp(self.pos[j], 1.0),
            }
        }
    }

    /// Rotation coordinate of `y`, collapsing each interval to its orbit point.
    pub fn project(&self, y: f64) -> f64 {
        match self.locate(y) {
            Location::Gap { theta } => reduce_unit(theta),
            Location::Inside { index, .. } => self.orbit_point(index),
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        self.shift(y, 1)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        self.shift(y, -1)
    }

    fn shift(&self, y: f64, dir: i64) -> f64 {
        let y = reduce_unit(y);
        match self.locate(y) {
            Location::Gap { theta } => self.lift(rotate(theta, dir, self.alpha)),
            Location::Inside { index, offset, .. } => {
                let k = self.entry(index).expect("located intervals are inserted");
                let target = index + dir;
                let Some(t) = self.entry(target) else {
                    return self.lift(rotate(0.0, target, self.alpha));
                };
                if y == self.start[k] {
                    return self.start[t];
                }
                if y == self.end[k] {
                    return self.end[t];
                }
                let ratio = if dir > 0 {
                    self.decay.forward_ratio(index)
                } else {
                    1.0 / self.decay.forward_ratio(target)
                };
                (self.start[t] + offset * ratio).min(self.end[t])
            }
        }
    }
}
