//! Architecture token strings and their numeric feature encodings.
//!
//! An architecture is written as a fixed-width string: one depth symbol followed by
//! `max_layers` pairs of `(heads, mlp_ratio)` digits, optionally followed by a single
//! embed-dim digit. Layer digits are `1..=3`; `0` marks padding and may only fill a
//! trailing block whose length is implied by the depth symbol.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Variance at or below which a column counts as constant.
pub const CONSTANT_COLUMN_TOL: f64 = 1e-12;

/// Highest non-padding layer code.
const MAX_LAYER_CODE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpaceSchema {
    pub max_layers: usize,
    /// Depth symbols in increasing order; the i-th symbol has ordinal `i + 1`.
    pub depth_symbols: Vec<char>,
    #[serde(default)]
    pub includes_embed_column: bool,
}

impl Default for SearchSpaceSchema {
    fn default() -> Self {
        SearchSpaceSchema {
            max_layers: 12,
            depth_symbols: vec!['j', 'k', 'l'],
            includes_embed_column: false,
        }
    }
}

impl SearchSpaceSchema {
    pub fn validate(&self) -> Result<()> {
        if self.max_layers == 0 {
            return Err(Error::config("schema.max_layers", "must be at least 1"));
        }
        if self.depth_symbols.is_empty() {
            return Err(Error::config("schema.depth_symbols", "must not be empty"));
        }
        for (i, c) in self.depth_symbols.iter().enumerate() {
            if !c.is_ascii_alphabetic() {
                return Err(Error::config(
                    "schema.depth_symbols",
                    format!("symbol {c:?} is not an ASCII letter"),
                ));
            }
            if self.depth_symbols[..i].contains(c) {
                return Err(Error::config(
                    "schema.depth_symbols",
                    format!("duplicate symbol {c:?}"),
                ));
            }
        }
        if self.depth_symbols.len() > self.max_layers {
            return Err(Error::config(
                "schema.depth_symbols",
                "more depth symbols than layers",
            ));
        }
        Ok(())
    }

    /// Characters in a well-formed token string.
    pub fn text_len(&self) -> usize {
        1 + 2 * self.max_layers + usize::from(self.includes_embed_column)
    }

    /// 1-based ordinal of a depth symbol.
    pub fn ordinal(&self, symbol: char) -> Option<usize> {
        self.depth_symbols
            .iter()
            .position(|&c| c == symbol)
            .map(|i| i + 1)
    }

    /// Active (non-padding) layers for a depth ordinal. The deepest symbol uses every layer
    /// and each shallower symbol drops one more.
    pub fn active_layers(&self, ordinal: usize) -> usize {
        self.max_layers - (self.depth_symbols.len() - ordinal)
    }

    /// Number of distinct valid architectures, saturating at `u128::MAX`.
    pub fn space_size(&self) -> u128 {
        let per_layer = u128::from(MAX_LAYER_CODE) * u128::from(MAX_LAYER_CODE);
        (1..=self.depth_symbols.len())
            .map(|o| {
                let active = self.active_layers(o) as u32;
                per_layer.checked_pow(active).unwrap_or(u128::MAX)
            })
            .fold(0u128, |acc, v| acc.saturating_add(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawArchitecture {
    pub depth: char,
    /// `(heads, mlp)` codes, `max_layers` long; padding is `(0, 0)`.
    pub layers: Vec<(u8, u8)>,
    pub embed: Option<u8>,
}

impl RawArchitecture {
    pub fn active_layers(&self) -> usize {
        self.layers.iter().take_while(|&&(h, _)| h != 0).count()
    }
}

pub fn parse_architecture(text: &str, schema: &SearchSpaceSchema) -> Result<RawArchitecture> {
    let bytes = text.as_bytes();
    let expected = schema.text_len();
    if let Some(pos) = bytes.iter().position(|b| !b.is_ascii()) {
        return Err(Error::Parse {
            position: pos,
            message: "non-ASCII character".into(),
        });
    }
    if bytes.len() != expected {
        return Err(Error::Parse {
            position: bytes.len().min(expected),
            message: format!("expected {expected} characters, found {}", bytes.len()),
        });
    }
    let depth = bytes[0] as char;
    let ordinal = schema
        .ordinal(depth)
        .ok_or_else(|| Error::Domain(format!("unknown depth symbol {depth:?}")))?;

    let digit = |pos: usize| -> Result<u8> {
        let b = bytes[pos];
        if !b.is_ascii_digit() {
            return Err(Error::Parse {
                position: pos,
                message: format!("expected digit, found {:?}", b as char),
            });
        }
        Ok(b - b'0')
    };

    let mut layers = Vec::with_capacity(schema.max_layers);
    for i in 0..schema.max_layers {
        let pos = 1 + 2 * i;
        let heads = digit(pos)?;
        let mlp = digit(pos + 1)?;
        for (p, code) in [(pos, heads), (pos + 1, mlp)] {
            if code > MAX_LAYER_CODE {
                return Err(Error::Domain(format!(
                    "digit {code} at position {p} is outside 0..={MAX_LAYER_CODE}"
                )));
            }
        }
        layers.push((heads, mlp));
    }
    let embed = if schema.includes_embed_column {
        Some(digit(expected - 1)?)
    } else {
        None
    };

    let mut seen_padding = false;
    for (i, &(h, m)) in layers.iter().enumerate() {
        match (h == 0, m == 0) {
            (true, true) => seen_padding = true,
            (false, false) if seen_padding => {
                return Err(Error::Structure(format!(
                    "layer {} follows padding; padding must be a trailing block",
                    i + 1
                )))
            }
            (false, false) => {}
            _ => {
                return Err(Error::Structure(format!(
                    "layer {} is half padded ({h}, {m})",
                    i + 1
                )))
            }
        }
    }

    let arch = RawArchitecture {
        depth,
        layers,
        embed,
    };
    let active = arch.active_layers();
    let implied = schema.active_layers(ordinal);
    if active != implied {
        return Err(Error::Structure(format!(
            "depth {depth:?} implies {implied} active layers, found {active}"
        )));
    }
    Ok(arch)
}

/// Inverse of [`parse_architecture`].
pub fn format_architecture(arch: &RawArchitecture) -> String {
    let mut s = String::with_capacity(2 + 2 * arch.layers.len());
    s.push(arch.depth);
    for &(h, m) in &arch.layers {
        s.push((b'0' + h) as char);
        s.push((b'0' + m) as char);
    }
    if let Some(e) = arch.embed {
        s.push((b'0' + e) as char);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Ordinal,
    OneHot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub column_names: Vec<String>,
}

pub fn column_names(schema: &SearchSpaceSchema, encoding: Encoding) -> Vec<String> {
    let mut names = Vec::new();
    match encoding {
        Encoding::Ordinal => {
            names.push("depth".to_string());
            for i in 1..=schema.max_layers {
                names.push(format!("layer{i}_heads"));
                names.push(format!("layer{i}_mlp"));
            }
        }
        Encoding::OneHot => {
            for c in &schema.depth_symbols {
                names.push(format!("depth={c}"));
            }
            for i in 1..=schema.max_layers {
                for part in ["heads", "mlp"] {
                    for code in 0..=MAX_LAYER_CODE {
                        names.push(format!("layer{i}_{part}={code}"));
                    }
                }
            }
        }
    }
    names
}

/// Ordinal encoding with padding mapped to the neutral middle code and every value
/// centred onto `{-1, 0, 1}`. The embed-dim token is never encoded.
pub fn encode_ordinal<T: Scalar>(
    arch: &RawArchitecture,
    schema: &SearchSpaceSchema,
) -> FeatureVector<T> {
    FeatureVector {
        values: ordinal_values(arch, schema),
        column_names: column_names(schema, Encoding::Ordinal),
    }
}

fn ordinal_values<T: Scalar>(arch: &RawArchitecture, schema: &SearchSpaceSchema) -> Vec<T> {
    let k = schema.depth_symbols.len();
    let ordinal = schema.ordinal(arch.depth).unwrap_or(1);
    // Centre the ordinal and stretch onto [-1, 1]; for three symbols this is `ordinal - 2`.
    let depth = if k == 1 {
        T::zero()
    } else {
        T::lit((2.0 * ordinal as f64 - (k as f64 + 1.0)) / (k as f64 - 1.0))
    };
    let layer = |code: u8| {
        let code = if code == 0 { 2 } else { code };
        T::lit(f64::from(code) - 2.0)
    };
    let mut values = Vec::with_capacity(1 + 2 * arch.layers.len());
    values.push(depth);
    for &(h, m) in &arch.layers {
        values.push(layer(h));
        values.push(layer(m));
    }
    values
}

/// One indicator block per categorical position: `k` columns for depth, four per layer code
/// (padding included).
pub fn encode_onehot<T: Scalar>(
    arch: &RawArchitecture,
    schema: &SearchSpaceSchema,
) -> FeatureVector<T> {
    FeatureVector {
        values: onehot_values(arch, schema),
        column_names: column_names(schema, Encoding::OneHot),
    }
}

fn onehot_values<T: Scalar>(arch: &RawArchitecture, schema: &SearchSpaceSchema) -> Vec<T> {
    let k = schema.depth_symbols.len();
    let block = usize::from(MAX_LAYER_CODE) + 1;
    let mut values = vec![T::zero(); k + 2 * block * arch.layers.len()];
    if let Some(o) = schema.ordinal(arch.depth) {
        values[o - 1] = T::one();
    }
    for (i, &(h, m)) in arch.layers.iter().enumerate() {
        let base = k + 2 * block * i;
        values[base + usize::from(h)] = T::one();
        values[base + block + usize::from(m)] = T::one();
    }
    values
}

/// Encodes a batch into a row-per-architecture matrix plus column names.
pub fn encode_batch<T: Scalar>(
    archs: &[RawArchitecture],
    schema: &SearchSpaceSchema,
    encoding: Encoding,
) -> (Matrix<T>, Vec<String>) {
    let names = column_names(schema, encoding);
    let mut data = Vec::with_capacity(archs.len() * names.len());
    for a in archs {
        match encoding {
            Encoding::Ordinal => data.extend(ordinal_values::<T>(a, schema)),
            Encoding::OneHot => data.extend(onehot_values::<T>(a, schema)),
        }
    }
    let m = Matrix::from_vec(archs.len(), names.len(), data).expect("encoded widths agree");
    (m, names)
}

/// Columns retained after constant-column removal, applied identically at predict time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMask {
    pub source_width: usize,
    pub kept: Vec<usize>,
    pub kept_names: Vec<String>,
    pub dropped_names: Vec<String>,
}

impl ColumnMask {
    pub fn apply<T: Scalar>(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.source_width {
            return Err(Error::Shape {
                context: "column mask",
                expected: self.source_width,
                got: x.cols(),
            });
        }
        Ok(x.select_columns(&self.kept))
    }
}

pub fn drop_constant_columns<T: Scalar>(
    x: &Matrix<T>,
    names: &[String],
) -> Result<(Matrix<T>, ColumnMask)> {
    if x.rows() == 0 {
        return Err(Error::Data(
            "cannot screen columns of an empty dataset".into(),
        ));
    }
    if names.len() != x.cols() {
        return Err(Error::Shape {
            context: "column names",
            expected: x.cols(),
            got: names.len(),
        });
    }
    let tol = T::lit(CONSTANT_COLUMN_TOL);
    let n = x.rows();
    let mut kept = Vec::new();
    let mut kept_names = Vec::new();
    let mut dropped_names = Vec::new();
    for j in 0..x.cols() {
        let col = x.column(j);
        let var = if n < 2 {
            T::zero()
        } else {
            let mean = col.iter().copied().sum::<T>() / T::from_count(n);
            col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::from_count(n - 1)
        };
        if var > tol {
            kept.push(j);
            kept_names.push(names[j].clone());
        } else {
            dropped_names.push(names[j].clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Data("every feature column is constant".into()));
    }
    let mask = ColumnMask {
        source_width: x.cols(),
        kept,
        kept_names,
        dropped_names,
    };
    Ok((mask.apply(x)?, mask))
}
