//! Model serialization.
//!
//! The container is versioned JSON with explicit shapes, so weights from an
//! externally trained model can be transcribed in by hand. Layout:
//!
//! ```json
//! {
//!   "format": "sigkin-mlp",
//!   "version": 1,
//!   "input_dim": 22, "hidden_dim": 12, "head_dim": 6,
//!   "dropout_rate": 0.3,
//!   "w_hidden": [[...22 floats...] x12],
//!   "b_hidden": [...12...],
//!   "heads": [{"name": "theta", "w": [[...12...] x6], "b": [...6...]}, ...],
//!   "scalers": {"input_min": [...22...], ...},
//!   "trained_epochs": 3, "seed": 7
//! }
//! ```
//!
//! Window layout: (x, y) pairs of points i-5 .. i+5; target layout:
//! theta 1..6, omega 1..6, tau 1..6. Floats round-trip exactly, so a
//! loaded model reproduces forward outputs bit for bit.

use serde::{Deserialize, Serialize};

use super::{HEAD_DIM, HIDDEN_DIM, INPUT_DIM, MLPModel, N_HEADS, ScalerSet};
use crate::error::{Error, Result};

const FORMAT: &str = "sigkin-mlp";
const VERSION: u32 = 1;
const HEAD_NAMES: [&str; N_HEADS] = ["theta", "omega", "tau"];

#[derive(Serialize, Deserialize)]
struct HeadFile {
    name: String,
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    head_dim: usize,
    dropout_rate: f64,
    w_hidden: Vec<Vec<f64>>,
    b_hidden: Vec<f64>,
    heads: Vec<HeadFile>,
    scalers: ScalerSet,
    trained_epochs: u32,
    seed: u64,
}

fn to_rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).map(|c| c.to_vec()).collect()
}

fn from_rows(
    rows: &[Vec<f64>],
    want_rows: usize,
    want_cols: usize,
    what: &str,
) -> Result<Vec<f64>> {
    if rows.len() != want_rows {
        return Err(Error::Shape {
            what: what.into(),
            expected: format!("{want_rows} rows"),
            got: format!("{}", rows.len()),
        });
    }
    let mut flat = Vec::with_capacity(want_rows * want_cols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != want_cols {
            return Err(Error::Shape {
                what: format!("{what} row {i}"),
                expected: format!("{want_cols} columns"),
                got: format!("{}", row.len()),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

pub fn save_model(model: &MLPModel) -> Result<Vec<u8>> {
    model.validate()?;
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        input_dim: INPUT_DIM,
        hidden_dim: HIDDEN_DIM,
        head_dim: HEAD_DIM,
        dropout_rate: model.dropout_rate,
        w_hidden: to_rows(&model.w_hidden, INPUT_DIM),
        b_hidden: model.b_hidden.clone(),
        heads: (0..N_HEADS)
            .map(|h| HeadFile {
                name: HEAD_NAMES[h].into(),
                w: to_rows(&model.w_heads[h], HIDDEN_DIM),
                b: model.b_heads[h].clone(),
            })
            .collect(),
        scalers: model.scalers.clone(),
        trained_epochs: model.trained_epochs,
        seed: model.seed,
    };
    let mut bytes = serde_json::to_vec_pretty(&file)
        .map_err(|e| Error::ModelLoad(format!("serialize: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn load_model(bytes: &[u8]) -> Result<MLPModel> {
    let file: ModelFile =
        serde_json::from_slice(bytes).map_err(|e| Error::ModelLoad(format!("{e}")))?;
    if file.format != FORMAT {
        return Err(Error::ModelLoad(format!(
            "unknown format '{}'",
            file.format
        )));
    }
    if file.version != VERSION {
        return Err(Error::ModelLoad(format!(
            "unsupported version {} (this build reads {VERSION})",
            file.version
        )));
    }
    if file.input_dim != INPUT_DIM || file.hidden_dim != HIDDEN_DIM || file.head_dim != HEAD_DIM {
        return Err(Error::Shape {
            what: "model dimensions".into(),
            expected: format!("{INPUT_DIM}/{HIDDEN_DIM}/{HEAD_DIM}"),
            got: format!("{}/{}/{}", file.input_dim, file.hidden_dim, file.head_dim),
        });
    }
    if file.heads.len() != N_HEADS {
        return Err(Error::Shape {
            what: "model heads".into(),
            expected: format!("{N_HEADS}"),
            got: format!("{}", file.heads.len()),
        });
    }
    for (h, head) in file.heads.iter().enumerate() {
        if head.name != HEAD_NAMES[h] {
            return Err(Error::ModelLoad(format!(
                "head {h} must be '{}', got '{}'",
                HEAD_NAMES[h], head.name
            )));
        }
    }
    let mut w_heads: [Vec<f64>; N_HEADS] = Default::default();
    for (h, slot) in w_heads.iter_mut().enumerate() {
        *slot = from_rows(
            &file.heads[h].w,
            HEAD_DIM,
            HIDDEN_DIM,
            &format!("{} head weights", HEAD_NAMES[h]),
        )?;
    }
    let model = MLPModel {
        w_hidden: from_rows(&file.w_hidden, HIDDEN_DIM, INPUT_DIM, "w_hidden")?,
        b_hidden: file.b_hidden,
        w_heads,
        b_heads: std::array::from_fn(|h| file.heads[h].b.clone()),
        dropout_rate: file.dropout_rate,
        scalers: file.scalers,
        trained_epochs: file.trained_epochs,
        seed: file.seed,
    };
    model.validate()?;
    Ok(model)
}
