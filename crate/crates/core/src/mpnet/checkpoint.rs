//! Model checkpoints.
//!
//! Plain CSV rows without a header, in this order:
//!
//! ```text
//! mpnet-checkpoint,1
//! antennas,<N>
//! atoms,<A>
//! init,<nominal|xavier>
//! rule,<sc1|sc2|fixed>,<fixed depth or 0>,<max depth>
//! adam,<learning_rate>,<decay>,<decay_interval>,<beta1>,<beta2>,<eps>
//! adam_step,<updates applied>
//! w,<column>,re_0,im_0,...,re_{N-1},im_{N-1}     (A rows)
//! m,<column>,...                                   (A rows, first moment)
//! v,<column>,...                                   (A rows, second moment)
//! ```

use std::path::Path;

use num_complex::Complex64;

use super::{AdamConfig, AdamState, InitTag, MpNetModel};
use crate::error::{Error, Result};
use crate::estimators::{StopCriterion, StoppingRule};
use crate::io::{parse_complex, parse_f64, push_complex, write_atomic};
use crate::linalg::ComplexMatrix;

pub const CHECKPOINT_MAGIC: &str = "mpnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn to_bytes(model: &MpNetModel, adam: &AdamState) -> Result<Vec<u8>> {
    let (n, a) = (model.n_antennas(), model.n_atoms());
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_writer(Vec::new());
    let rule = model.rule();
    let (kind, depth) = match rule.criterion {
        StopCriterion::FixedDepth { depth } => ("fixed", depth),
        StopCriterion::Sc1 => ("sc1", 0),
        StopCriterion::Sc2 => ("sc2", 0),
    };
    let c = adam.config;
    let mut rows: Vec<Vec<String>> = vec![
        vec![CHECKPOINT_MAGIC.into(), CHECKPOINT_VERSION.to_string()],
        vec!["antennas".into(), n.to_string()],
        vec!["atoms".into(), a.to_string()],
        vec!["init".into(), model.init().as_str().into()],
        vec![
            "rule".into(),
            kind.into(),
            depth.to_string(),
            rule.max_depth.to_string(),
        ],
        vec![
            "adam".into(),
            c.learning_rate.to_string(),
            c.decay.to_string(),
            c.decay_interval.to_string(),
            c.beta1.to_string(),
            c.beta2.to_string(),
            c.eps.to_string(),
        ],
        vec!["adam_step".into(), adam.step_count().to_string()],
    ];
    for (tag, data) in [
        ("w", model.weights().as_slice()),
        ("m", adam.first_moment()),
        ("v", adam.second_moment()),
    ] {
        for (j, col) in data.chunks_exact(n).enumerate() {
            let mut rec = vec![tag.to_string(), j.to_string()];
            push_complex(&mut rec, col);
            rows.push(rec);
        }
    }
    for r in rows {
        w.write_record(&r)
            .map_err(|e| Error::format("<checkpoint>", e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::format("<checkpoint>", e.to_string()))
}

pub fn save_checkpoint(path: &Path, model: &MpNetModel, adam: &AdamState) -> Result<()> {
    write_atomic(path, &to_bytes(model, adam)?)
}

struct Rows<'p> {
    path: &'p Path,
    rows: std::vec::IntoIter<csv::StringRecord>,
}

impl Rows<'_> {
    fn expect(&mut self, tag: &str, fields: usize) -> Result<Vec<String>> {
        let rec = self
            .rows
            .next()
            .ok_or_else(|| Error::format(self.path, format!("missing {tag} row")))?;
        if rec.get(0) != Some(tag) || rec.len() != fields + 1 {
            return Err(Error::format(
                self.path,
                format!(
                    "expected {tag} with {fields} fields, found {:?}",
                    rec.iter().collect::<Vec<_>>()
                ),
            ));
        }
        Ok(rec.iter().skip(1).map(str::to_string).collect())
    }

    fn usize_field(&self, s: &str) -> Result<usize> {
        s.parse()
            .map_err(|_| Error::format(self.path, format!("not a count: {s:?}")))
    }

    fn matrix(&mut self, tag: &str, n: usize, a: usize) -> Result<Vec<Complex64>> {
        let mut data = Vec::with_capacity(n * a);
        for j in 0..a {
            let f = self.expect(tag, 1 + 2 * n)?;
            if self.usize_field(&f[0])? != j {
                return Err(Error::format(
                    self.path,
                    format!("{tag} rows out of order at {j}"),
                ));
            }
            let refs: Vec<&str> = f[1..].iter().map(String::as_str).collect();
            data.extend(parse_complex(self.path, &refs)?);
        }
        Ok(data)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(MpNetModel, AdamState)> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let records = r
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows = Rows {
        path,
        rows: records.into_iter(),
    };
    let magic = rows.expect(CHECKPOINT_MAGIC, 1)?;
    if magic[0] != CHECKPOINT_VERSION.to_string() {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint version {}", magic[0]),
        ));
    }
    let f = rows.expect("antennas", 1)?;
    let n = rows.usize_field(&f[0])?;
    let f = rows.expect("atoms", 1)?;
    let a = rows.usize_field(&f[0])?;
    let init = match rows.expect("init", 1)?[0].as_str() {
        "nominal" => InitTag::Nominal,
        "xavier" => InitTag::Xavier,
        other => return Err(Error::format(path, format!("unknown init {other:?}"))),
    };
    let rule_f = rows.expect("rule", 3)?;
    let max_depth = rows.usize_field(&rule_f[2])?;
    let criterion = match rule_f[0].as_str() {
        "fixed" => StopCriterion::FixedDepth {
            depth: rows.usize_field(&rule_f[1])?,
        },
        "sc1" => StopCriterion::Sc1,
        "sc2" => StopCriterion::Sc2,
        other => return Err(Error::format(path, format!("unknown rule {other:?}"))),
    };
    let af = rows.expect("adam", 6)?;
    let config = AdamConfig {
        learning_rate: parse_f64(path, &af[0])?,
        decay: parse_f64(path, &af[1])?,
        decay_interval: af[2]
            .parse()
            .map_err(|_| Error::format(path, "bad decay interval"))?,
        beta1: parse_f64(path, &af[3])?,
        beta2: parse_f64(path, &af[4])?,
        eps: parse_f64(path, &af[5])?,
    };
    let step: u64 = rows.expect("adam_step", 1)?[0]
        .parse()
        .map_err(|_| Error::format(path, "bad adam step"))?;
    let w = rows.matrix("w", n, a)?;
    let m = rows.matrix("m", n, a)?;
    let v = rows.matrix("v", n, a)?;
    if rows.rows.next().is_some() {
        return Err(Error::format(path, "trailing rows"));
    }
    let model = MpNetModel::new(
        ComplexMatrix::from_col_major(n, a, w)?,
        init,
        StoppingRule {
            criterion,
            max_depth,
        },
    )?;
    let adam = AdamState::from_parts(config, m, v, step)?;
    Ok((model, adam))
}
