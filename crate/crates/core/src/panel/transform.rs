use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Panel;
use crate::error::{Error, Result};

/// Stationarity transformation codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformCode {
    /// 1: level.
    Level,
    /// 2: first difference.
    Diff,
    /// 4: log level.
    Log,
    /// 5: first difference of logs.
    LogDiff,
    /// 6: second difference of logs.
    LogDiff2,
    /// 7: first difference of the percentage change.
    PctChangeDiff,
}

impl TransformCode {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => Self::Level,
            2 => Self::Diff,
            4 => Self::Log,
            5 => Self::LogDiff,
            6 => Self::LogDiff2,
            7 => Self::PctChangeDiff,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Level => 1,
            Self::Diff => 2,
            Self::Log => 4,
            Self::LogDiff => 5,
            Self::LogDiff2 => 6,
            Self::PctChangeDiff => 7,
        }
    }

    /// Number of leading observations lost.
    pub fn order(self) -> usize {
        match self {
            Self::Level | Self::Log => 0,
            Self::Diff | Self::LogDiff => 1,
            Self::LogDiff2 | Self::PctChangeDiff => 2,
        }
    }

    pub fn uses_log(self) -> bool {
        matches!(self, Self::Log | Self::LogDiff | Self::LogDiff2)
    }

    fn needs_positive(self) -> bool {
        self.uses_log() || self == Self::PctChangeDiff
    }

    /// Transformed value at `t` from the window `x[t-order..=t]`.
    fn at(self, w: &[f64]) -> f64 {
        let n = w.len();
        match self {
            Self::Level => w[n - 1],
            Self::Diff => w[n - 1] - w[n - 2],
            Self::Log => w[n - 1].ln(),
            Self::LogDiff => w[n - 1].ln() - w[n - 2].ln(),
            Self::LogDiff2 => (w[n - 1].ln() - w[n - 2].ln()) - (w[n - 2].ln() - w[n - 3].ln()),
            Self::PctChangeDiff => (w[n - 1] / w[n - 2] - 1.0) - (w[n - 2] / w[n - 3] - 1.0),
        }
    }
}

impl Serialize for TransformCode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for TransformCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = u8::deserialize(d)?;
        TransformCode::from_code(c)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown transform code {c}")))
    }
}

/// Apply a transform code to a fully observed sequence.
///
/// The output is shorter than the input by [`TransformCode::order`].
pub fn apply_transform(x: &[f64], code: TransformCode) -> Result<Vec<f64>> {
    let d = code.order();
    if x.len() <= d {
        return Err(Error::TooShort {
            needed: d,
            got: x.len(),
        });
    }
    if code.needs_positive() {
        if let Some(row) = x.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::NonPositive {
                series: String::from("<sequence>"),
                row,
            });
        }
    }
    Ok(x.windows(d + 1).map(|w| code.at(w)).collect())
}

/// Transform every series by its manifest code, then trim the leading rows
/// lost to the deepest differencing so the panel stays rectangular.
///
/// A transformed cell is observed only when every input it needs is observed.
pub fn transform_panel(p: &Panel) -> Result<Panel> {
    let t_len = p.n_periods();
    let max_d = p.meta.iter().map(|m| m.tcode.order()).max().unwrap_or(0);
    if t_len < max_d + 2 {
        return Err(Error::TooShort {
            needed: max_d + 1,
            got: t_len,
        });
    }
    let out_rows = t_len - max_d;
    let mut values = DMatrix::from_element(out_rows, p.n_series(), f64::NAN);
    for (j, meta) in p.meta.iter().enumerate() {
        let code = meta.tcode;
        let d = code.order();
        if code.needs_positive() {
            for t in 0..t_len {
                if p.mask[(t, j)] && !(p.values[(t, j)] > 0.0) {
                    return Err(Error::NonPositive {
                        series: meta.id.clone(),
                        row: t,
                    });
                }
            }
        }
        let col: Vec<f64> = p.values.column(j).iter().copied().collect();
        let mask: Vec<bool> = p.mask.column(j).iter().copied().collect();
        for t in max_d..t_len {
            let lo = t - d;
            if mask[lo..=t].iter().all(|&m| m) {
                values[(t - max_d, j)] = code.at(&col[lo..=t]);
            }
        }
    }
    Panel::new(p.dates[max_d..].to_vec(), values, p.meta.clone())
}
