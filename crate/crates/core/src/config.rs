//! Plain-text market configuration.
//!
//! Line-oriented grammar; `#` starts a comment anywhere on a line:
//!
//! ```text
//! [market]
//! rate = 0.05
//! maturity = 1.0
//! volatility = 1.0
//! strike = 0.0            # optional, defaults to 0
//!
//! [dividend_density]      # lines "t_start value", t strictly increasing from 0
//! 0.0 0.0
//!
//! [weighting_density]
//! 0.0 1.0
//! ```
//!
//! All three sections are required; unknown sections and unknown keys are
//! rejected, and every numeric field is range-checked before use.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::strategy::{MarketSpec, PiecewiseConstant, StrategyError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [market]")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("missing key `{0}` in [market]")]
    MissingKey(&'static str),
    #[error("invalid market: {0}")]
    Market(#[from] StrategyError),
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Market,
    Dividend,
    Weighting,
}

/// Parses the market grammar above.
pub fn parse_market<T: Scalar>(text: &str) -> Result<MarketSpec<T>, ConfigError> {
    let mut section = Section::None;
    let mut seen = [false; 3];
    let mut rate: Option<T> = None;
    let mut maturity: Option<T> = None;
    let mut volatility: Option<T> = None;
    let mut strike: Option<T> = None;
    let mut dividend: Vec<(T, T)> = Vec::new();
    let mut weighting: Vec<(T, T)> = Vec::new();

    let parse_num = |s: &str, line: usize| -> Result<T, ConfigError> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(T::of)
            .ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("expected a finite number, got `{s}`"),
            })
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "market" => Section::Market,
                "dividend_density" => Section::Dividend,
                "weighting_density" => Section::Weighting,
                other => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: other.to_string(),
                    })
                }
            };
            let slot = match section {
                Section::Market => 0,
                Section::Dividend => 1,
                Section::Weighting => 2,
                Section::None => unreachable!(),
            };
            if seen[slot] {
                return Err(ConfigError::Syntax {
                    line,
                    reason: format!("section [{}] given twice", name.trim()),
                });
            }
            seen[slot] = true;
            continue;
        }
        match section {
            Section::None => {
                return Err(ConfigError::Syntax {
                    line,
                    reason: "content before the first section header".into(),
                })
            }
            Section::Market => {
                let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                    line,
                    reason: "expected `key = value`".into(),
                })?;
                let key = key.trim();
                let value = parse_num(value.trim(), line)?;
                let slot = match key {
                    "rate" => &mut rate,
                    "maturity" => &mut maturity,
                    "volatility" => &mut volatility,
                    "strike" => &mut strike,
                    other => {
                        return Err(ConfigError::UnknownKey {
                            line,
                            key: other.to_string(),
                        })
                    }
                };
                if slot.is_some() {
                    return Err(ConfigError::DuplicateKey {
                        line,
                        key: key.to_string(),
                    });
                }
                *slot = Some(value);
            }
            Section::Dividend | Section::Weighting => {
                let mut parts = body.split_whitespace();
                let (t, v) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(t), Some(v), None) => (parse_num(t, line)?, parse_num(v, line)?),
                    _ => {
                        return Err(ConfigError::Syntax {
                            line,
                            reason: "expected `t_start value`".into(),
                        })
                    }
                };
                if section == Section::Dividend {
                    dividend.push((t, v));
                } else {
                    weighting.push((t, v));
                }
            }
        }
    }

    if !seen[0] {
        return Err(ConfigError::MissingSection("market"));
    }
    if !seen[1] {
        return Err(ConfigError::MissingSection("dividend_density"));
    }
    if !seen[2] {
        return Err(ConfigError::MissingSection("weighting_density"));
    }
    let maturity = maturity.ok_or(ConfigError::MissingKey("maturity"))?;
    let market = MarketSpec {
        rate: rate.ok_or(ConfigError::MissingKey("rate"))?,
        maturity,
        volatility: volatility.ok_or(ConfigError::MissingKey("volatility"))?,
        dividend_density: PiecewiseConstant::new(&dividend, maturity, "dividend")?,
        weighting_density: PiecewiseConstant::new(&weighting, maturity, "weighting")?,
        strike: strike.unwrap_or_else(T::zero),
    };
    market.validate()?;
    Ok(market)
}
