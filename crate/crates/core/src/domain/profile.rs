//! Closed-form scalar profiles over position or time.
//!
//! Initial fields `rho0(x)`, `v0(x)`, inflow data `rho_in(t)`, `v_in(t)` and the
//! braking curve are all described by a [`Profile`]. Each variant has a textual
//! preset form, `name(key=value, ...)`, that [`Profile::from_str`] parses and
//! `Display` reproduces exactly (floats are printed round-trip safe).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `offset + slope * s`, unbounded.
    Affine {
        offset: f64,
        slope: f64,
    },
    /// `from` before `start`, `to` after `end`, linear in between.
    Ramp {
        from: f64,
        to: f64,
        start: f64,
        end: f64,
    },
    /// `base + amp * sin(2 pi s / wavelength + phase)`.
    Sine {
        base: f64,
        amp: f64,
        wavelength: f64,
        phase: f64,
    },
    /// `peak` on `[start, end]`, `base` outside, linear flanks of width `ramp`.
    Plateau {
        base: f64,
        peak: f64,
        start: f64,
        end: f64,
        ramp: f64,
    },
    /// Half-cosine transition from `from` at `start` to `to` at `end`, held
    /// constant outside. C1 at both ends.
    CosineEase {
        from: f64,
        to: f64,
        start: f64,
        end: f64,
    },
    /// Piecewise-linear through `(s, value)` knots, constant beyond the ends.
    Table {
        points: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("malformed preset `{0}`: expected name(key=value, ...)")]
    Malformed(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{preset}`: unknown parameter `{key}`")]
    UnknownParameter { preset: String, key: String },
    #[error("preset `{preset}`: missing parameter `{key}`")]
    MissingParameter { preset: String, key: String },
    #[error("preset `{preset}`: parameter `{key}` is not a finite number")]
    BadNumber { preset: String, key: String },
    #[error("preset `{preset}`: {reason}")]
    Invalid { preset: String, reason: String },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    /// Profile of `offset + scale * self(s)`; every variant is closed under this.
    pub fn map_values(&self, offset: f64, scale: f64) -> Profile {
        let m = |v: f64| offset + scale * v;
        match self.clone() {
            Profile::Constant { value } => Profile::Constant { value: m(value) },
            Profile::Affine { offset: o, slope } => Profile::Affine {
                offset: m(o),
                slope: scale * slope,
            },
            Profile::Ramp {
                from,
                to,
                start,
                end,
            } => Profile::Ramp {
                from: m(from),
                to: m(to),
                start,
                end,
            },
            Profile::Sine {
                base,
                amp,
                wavelength,
                phase,
            } => Profile::Sine {
                base: m(base),
                amp: scale * amp,
                wavelength,
                phase,
            },
            Profile::Plateau {
                base,
                peak,
                start,
                end,
                ramp,
            } => Profile::Plateau {
                base: m(base),
                peak: m(peak),
                start,
                end,
                ramp,
            },
            Profile::CosineEase {
                from,
                to,
                start,
                end,
            } => Profile::CosineEase {
                from: m(from),
                to: m(to),
                start,
                end,
            },
            Profile::Table { points } => Profile::Table {
                points: points.into_iter().map(|(s, v)| (s, m(v))).collect(),
            },
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Affine { offset, slope } => offset + slope * s,
            Profile::Ramp {
                from,
                to,
                start,
                end,
            } => {
                if s <= *start {
                    *from
                } else if s >= *end {
                    *to
                } else {
                    from + (to - from) * (s - start) / (end - start)
                }
            }
            Profile::Sine {
                base,
                amp,
                wavelength,
                phase,
            } => base + amp * (2.0 * PI * s / wavelength + phase).sin(),
            Profile::Plateau {
                base,
                peak,
                start,
                end,
                ramp,
            } => {
                if s >= *start && s <= *end {
                    *peak
                } else if *ramp > 0.0 && s < *start && s > start - ramp {
                    base + (peak - base) * (s - (start - ramp)) / ramp
                } else if *ramp > 0.0 && s > *end && s < end + ramp {
                    peak + (base - peak) * (s - end) / ramp
                } else {
                    *base
                }
            }
            Profile::CosineEase {
                from,
                to,
                start,
                end,
            } => {
                if s <= *start {
                    *from
                } else if s >= *end {
                    *to
                } else {
                    let phase = (s - start) / (end - start);
                    to + (from - to) * 0.5 * (1.0 + (PI * phase).cos())
                }
            }
            Profile::Table { points } => table_eval(points, s),
        }
    }

    /// Samples at each abscissa.
    pub fn sample(&self, at: &[f64]) -> Vec<f64> {
        at.iter().map(|&s| self.eval(s)).collect()
    }

    pub fn preset_name(&self) -> &'static str {
        match self {
            Profile::Constant { .. } => "constant",
            Profile::Affine { .. } => "affine",
            Profile::Ramp { .. } => "ramp",
            Profile::Sine { .. } => "sine_density",
            Profile::Plateau { .. } => "plateau",
            Profile::CosineEase { .. } => "cosine_ease",
            Profile::Table { .. } => "table",
        }
    }

    fn check(&self) -> Result<(), String> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            Profile::Constant { value } if !value.is_finite() => Err("value must be finite".into()),
            Profile::Ramp { start, end, .. } | Profile::CosineEase { start, end, .. }
                if !(end > start) =>
            {
                Err("end must exceed start".into())
            }
            Profile::Sine { wavelength, .. } if !(*wavelength > 0.0) => {
                Err("wavelength must be positive".into())
            }
            Profile::Plateau {
                start, end, ramp, ..
            } if !(end >= start) || !(*ramp >= 0.0) => {
                Err("plateau needs end >= start and ramp >= 0".into())
            }
            Profile::Table { points } => {
                if points.is_empty() {
                    return Err("table needs at least one point".into());
                }
                if points.iter().any(|(s, v)| !s.is_finite() || !v.is_finite()) {
                    return Err("table entries must be finite".into());
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err("table abscissae must be strictly increasing".into());
                }
                Ok(())
            }
            Profile::Affine { offset, slope } if !finite(&[*offset, *slope]) => {
                Err("parameters must be finite".into())
            }
            _ => Ok(()),
        }
    }
}

fn table_eval(points: &[(f64, f64)], s: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if s <= first.0 {
        return first.1;
    }
    if s >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= s);
    let (s0, v0) = points[k - 1];
    let (s1, v1) = points[k];
    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant { value } => write!(f, "constant(value={value:?})"),
            Profile::Affine { offset, slope } => {
                write!(f, "affine(offset={offset:?}, slope={slope:?})")
            }
            Profile::Ramp {
                from,
                to,
                start,
                end,
            } => write!(
                f,
                "ramp(from={from:?}, to={to:?}, start={start:?}, end={end:?})"
            ),
            Profile::Sine {
                base,
                amp,
                wavelength,
                phase,
            } => write!(
                f,
                "sine_density(base={base:?}, amp={amp:?}, wavelength={wavelength:?}, phase={phase:?})"
            ),
            Profile::Plateau {
                base,
                peak,
                start,
                end,
                ramp,
            } => write!(
                f,
                "plateau(base={base:?}, peak={peak:?}, start={start:?}, end={end:?}, ramp={ramp:?})"
            ),
            Profile::CosineEase {
                from,
                to,
                start,
                end,
            } => write!(
                f,
                "cosine_ease(from={from:?}, to={to:?}, start={start:?}, end={end:?})"
            ),
            Profile::Table { points } => {
                write!(f, "table(")?;
                for (i, (s, v)) in points.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{s:?}:{v:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for Profile {
    type Err = ProfileError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim();
        if let Ok(value) = text.parse::<f64>() {
            let p = Profile::Constant { value };
            return p
                .check()
                .map(|_| p)
                .map_err(|reason| ProfileError::Invalid {
                    preset: "constant".into(),
                    reason,
                });
        }
        let open = text
            .find('(')
            .ok_or_else(|| ProfileError::Malformed(text.to_string()))?;
        if !text.ends_with(')') {
            return Err(ProfileError::Malformed(text.to_string()));
        }
        let name = text[..open].trim();
        let body = &text[open + 1..text.len() - 1];

        if name == "table" {
            let mut points = Vec::new();
            for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (s, v) = item
                    .split_once(':')
                    .ok_or_else(|| ProfileError::Malformed(text.to_string()))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| ProfileError::BadNumber {
                            preset: "table".into(),
                            key: item.to_string(),
                        })
                };
                points.push((parse(s)?, parse(v)?));
            }
            let p = Profile::Table { points };
            return p
                .check()
                .map(|_| p)
                .map_err(|reason| ProfileError::Invalid {
                    preset: "table".into(),
                    reason,
                });
        }

        let mut params = Params::parse(name, body)?;
        let profile = match name {
            "constant" => Profile::Constant {
                value: params.take("value")?,
            },
            "affine" | "linear" => Profile::Affine {
                offset: params.take("offset")?,
                slope: params.take("slope")?,
            },
            "ramp" => Profile::Ramp {
                from: params.take("from")?,
                to: params.take("to")?,
                start: params.take("start")?,
                end: params.take("end")?,
            },
            "sine_density" | "sine" => Profile::Sine {
                base: params.take("base")?,
                amp: params.take("amp")?,
                wavelength: params.take("wavelength")?,
                phase: params.take_or("phase", 0.0),
            },
            "plateau" => Profile::Plateau {
                base: params.take("base")?,
                peak: params.take("peak")?,
                start: params.take("start")?,
                end: params.take("end")?,
                ramp: params.take_or("ramp", 0.0),
            },
            "cosine_ease" => Profile::CosineEase {
                from: params.take("from")?,
                to: params.take("to")?,
                start: params.take("start")?,
                end: params.take("end")?,
            },
            other => return Err(ProfileError::UnknownPreset(other.to_string())),
        };
        params.finish()?;
        profile.check().map_err(|reason| ProfileError::Invalid {
            preset: name.to_string(),
            reason,
        })?;
        Ok(profile)
    }
}

struct Params {
    preset: String,
    entries: Vec<(String, f64)>,
}

impl Params {
    fn parse(preset: &str, body: &str) -> Result<Self, ProfileError> {
        let mut entries = Vec::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ProfileError::Malformed(format!("{preset}({body})")))?;
            let key = k.trim().to_string();
            let value = v
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ProfileError::BadNumber {
                    preset: preset.to_string(),
                    key: key.clone(),
                })?;
            entries.push((key, value));
        }
        Ok(Params {
            preset: preset.to_string(),
            entries,
        })
    }

    fn take(&mut self, key: &str) -> Result<f64, ProfileError> {
        match self.entries.iter().position(|(k, _)| k == key) {
            Some(i) => Ok(self.entries.remove(i).1),
            None => Err(ProfileError::MissingParameter {
                preset: self.preset.clone(),
                key: key.to_string(),
            }),
        }
    }

    fn take_or(&mut self, key: &str, default: f64) -> f64 {
        self.take(key).unwrap_or(default)
    }

    fn finish(self) -> Result<(), ProfileError> {
        match self.entries.into_iter().next() {
            Some((key, _)) => Err(ProfileError::UnknownParameter {
                preset: self.preset,
                key,
            }),
            None => Ok(()),
        }
    }
}
