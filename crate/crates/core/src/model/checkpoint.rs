//! Text checkpoint holding every parameter block bit-exactly.
//!
//! ```text
//! ccbie-checkpoint 1
//! seed 7
//! config model.d = 64
//! ...
//! block users 943 64
//! 3fb1c2...  (one row per line, IEEE-754 bits in hex)
//! end
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::params::{CcbieParams, Mlp, BLOCK_NAMES};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const MAGIC: &str = "ccbie-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: CcbieParams,
    pub config: TrainConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            writeln!(w, "{MAGIC} {VERSION}")?;
            writeln!(w, "seed {}", self.seed)?;
            for (k, v) in self.config.to_pairs() {
                writeln!(w, "config {k} = {v}")?;
            }
            for (name, block) in BLOCK_NAMES.iter().zip(self.params.blocks()) {
                writeln!(w, "block {name} {} {}", block.rows(), block.cols())?;
                for row in block.row_iter() {
                    let line: Vec<String> =
                        row.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                    writeln!(w, "{}", line.join(" "))?;
                }
            }
            writeln!(w, "end")?;
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let err = |detail: String| Error::Format {
            path: path.to_path_buf(),
            detail,
        };
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != format!("{MAGIC} {VERSION}") {
            return Err(err(format!("unsupported header '{header}'")));
        }

        let mut seed = None;
        let mut config = TrainConfig::default();
        let mut blocks = Vec::new();
        while let Some(line) = lines.next() {
            if line == "end" {
                break;
            }
            if let Some(rest) = line.strip_prefix("seed ") {
                seed = Some(rest.parse().map_err(|_| err(format!("bad seed '{rest}'")))?);
            } else if let Some(rest) = line.strip_prefix("config ") {
                let (k, v) = rest
                    .split_once(" = ")
                    .ok_or_else(|| err(format!("bad config line '{line}'")))?;
                config.set(k, v)?;
            } else if let Some(rest) = line.strip_prefix("block ") {
                let parts: Vec<_> = rest.split(' ').collect();
                let dims = (parts.len() == 3)
                    .then(|| Some((parts[1].parse::<usize>().ok()?, parts[2].parse::<usize>().ok()?)))
                    .flatten()
                    .ok_or_else(|| err(format!("bad block header '{line}'")))?;
                let name = parts[0];
                if BLOCK_NAMES.get(blocks.len()) != Some(&name) {
                    return Err(err(format!("unexpected block '{name}'")));
                }
                let (rows, cols) = dims;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let row = lines
                        .next()
                        .ok_or_else(|| err(format!("block {name} truncated")))?;
                    for hex in row.split_whitespace() {
                        let bits = u64::from_str_radix(hex, 16)
                            .map_err(|_| err(format!("bad value '{hex}' in block {name}")))?;
                        data.push(f64::from_bits(bits));
                    }
                }
                blocks.push(
                    DenseMatrix::from_vec(rows, cols, data)
                        .map_err(|_| err(format!("block {name} has the wrong number of values")))?,
                );
            } else {
                return Err(err(format!("unexpected line '{line}'")));
            }
        }
        if blocks.len() != BLOCK_NAMES.len() {
            return Err(err(format!("expected {} blocks, found {}", BLOCK_NAMES.len(), blocks.len())));
        }
        let mut it = blocks.into_iter();
        let mut next = || it.next().expect("count checked above");
        let params = CcbieParams {
            users: next(),
            items: next(),
            clusters: next(),
            item_mlp: Mlp {
                w1: next(),
                b1: next(),
                w2: next(),
                b2: next(),
            },
            user_mlp: Mlp {
                w1: next(),
                b1: next(),
                w2: next(),
                b2: next(),
            },
        };
        Ok(Self {
            params,
            config,
            seed: seed.ok_or_else(|| err("missing seed line".into()))?,
        })
    }
}
