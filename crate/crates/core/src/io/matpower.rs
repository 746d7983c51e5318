use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::{Edge, Network};

/// The 30-bus test case as distributed with MATPOWER.
pub const CASE30_TEXT: &str = include_str!("../../data/case30.m");

/// Bus type marking an isolated bus.
const ISOLATED: i64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: i64,
    pub bus_type: i64,
    /// Real power demand (MW).
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gen {
    pub bus: i64,
    /// Real power output (MW).
    pub pg: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: i64,
    pub to: i64,
    /// Series reactance (per unit).
    pub x: f64,
}

/// The subset of a MATPOWER case needed for lossless real power flow.
/// Out-of-service branches are dropped during parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct MatpowerCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Gen>,
    pub branches: Vec<Branch>,
    pub dropped_branches: usize,
}

impl MatpowerCase {
    /// Per-unit injections `p = (sum Pg - Pd) / baseMVA`, with the imbalance
    /// removed at the first in-service generator, then scaled by `p_f`.
    /// Couplings are `K = 1/x`.
    pub fn to_network(&self, p_f: f64) -> Result<Network> {
        let active: Vec<&Bus> = self
            .buses
            .iter()
            .filter(|b| b.bus_type != ISOLATED)
            .collect();
        let index: HashMap<i64, usize> =
            active.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let mut p: Vec<f64> = active.iter().map(|b| -b.pd / self.base_mva).collect();
        let mut first = None;
        for g in self.gens.iter().filter(|g| g.in_service) {
            if let Some(&n) = index.get(&g.bus) {
                p[n] += g.pg / self.base_mva;
                first.get_or_insert(n);
            }
        }
        let slack = first
            .ok_or_else(|| Error::InvalidNetwork("case has no in-service generator".into()))?;
        rebalance(&mut p, slack);
        p.iter_mut().for_each(|v| *v *= p_f);
        rebalance(&mut p, slack);

        let mut edges = Vec::with_capacity(self.branches.len());
        for (i, br) in self.branches.iter().enumerate() {
            if !(br.x > 0.0) {
                return Err(Error::NonpositiveReactance { branch: i, x: br.x });
            }
            match (index.get(&br.from), index.get(&br.to)) {
                (Some(&t), Some(&h)) => edges.push(Edge::new(t, h, 1.0 / br.x)),
                _ => continue,
            }
        }
        let labels = active.iter().map(|b| b.id.to_string()).collect();
        Network::new(labels, edges, p)
    }
}

fn rebalance(p: &mut [f64], slack: usize) {
    let sum: f64 = p.iter().sum();
    p[slack] -= sum;
}

/// The embedded 30-bus case.
pub fn case30() -> MatpowerCase {
    parse_matpower(CASE30_TEXT).expect("embedded case parses")
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

struct Block {
    name: String,
    line: usize,
    rows: Vec<Row>,
}

/// Parses the `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch` entries of
/// a MATPOWER case file. Other fields are ignored.
pub fn parse_matpower(text: &str) -> Result<MatpowerCase> {
    let mut name = String::new();
    let mut scalars: HashMap<String, (usize, String)> = HashMap::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut open: Option<Block> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let code = raw.split('%').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        if let Some(block) = open.as_mut() {
            let (body, closed) = match code.find(']') {
                Some(pos) => (&code[..pos], true),
                None => (code, false),
            };
            if block_is_numeric(&block.name) {
                for row in body.split(';') {
                    let row = row.trim();
                    if row.is_empty() {
                        continue;
                    }
                    block.rows.push(Row {
                        line,
                        values: parse_row(row, line)?,
                    });
                }
            }
            if closed {
                blocks.push(open.take().expect("block is open"));
            }
            continue;
        }
        if let Some(rest) = code.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some(rest) = code.strip_prefix("mpc.") else {
            continue;
        };
        let Some((field, value)) = rest.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected assignment, found `{code}`"),
            });
        };
        let field = field.trim().to_string();
        let value = value.trim();
        if let Some(after) = value.strip_prefix('[') {
            let mut block = Block {
                name: field,
                line,
                rows: Vec::new(),
            };
            let (body, closed) = match after.find(']') {
                Some(pos) => (&after[..pos], true),
                None => (after, false),
            };
            if block_is_numeric(&block.name) {
                for row in body.split(';').map(str::trim).filter(|r| !r.is_empty()) {
                    block.rows.push(Row {
                        line,
                        values: parse_row(row, line)?,
                    });
                }
            }
            if closed {
                blocks.push(block);
            } else {
                open = Some(block);
            }
        } else {
            scalars.insert(
                field,
                (line, value.trim_end_matches(';').trim().to_string()),
            );
        }
    }
    if let Some(block) = open {
        return Err(Error::Parse {
            line: block.line,
            message: format!("matrix `mpc.{}` is not closed", block.name),
        });
    }

    let (line, base) = scalars
        .get("baseMVA")
        .ok_or_else(|| Error::MissingBlock("mpc.baseMVA".into()))?;
    let base_mva: f64 = base.parse().map_err(|_| Error::Parse {
        line: *line,
        message: format!("baseMVA `{base}` is not a number"),
    })?;
    if !(base_mva > 0.0 && base_mva.is_finite()) {
        return Err(Error::Parse {
            line: *line,
            message: format!("baseMVA must be positive, got {base_mva}"),
        });
    }
    let find = |n: &str| {
        blocks
            .iter()
            .find(|b| b.name == n)
            .ok_or_else(|| Error::MissingBlock(format!("mpc.{n}")))
    };
    let (bus_block, gen_block, branch_block) = (find("bus")?, find("gen")?, find("branch")?);

    let buses: Vec<Bus> = bus_block
        .rows
        .iter()
        .map(|r| {
            require_columns(r, 3, "bus")?;
            Ok(Bus {
                id: integer(r, 0)?,
                bus_type: integer(r, 1)?,
                pd: r.values[2],
            })
        })
        .collect::<Result<_>>()?;
    let mut known = HashMap::new();
    for (b, r) in buses.iter().zip(&bus_block.rows) {
        if known.insert(b.id, ()).is_some() {
            return Err(Error::Parse {
                line: r.line,
                message: format!("duplicate bus id {}", b.id),
            });
        }
    }
    let check_bus = |bus: i64, line: usize| {
        if known.contains_key(&bus) {
            Ok(bus)
        } else {
            Err(Error::UnknownBus { bus, line })
        }
    };

    let gens = gen_block
        .rows
        .iter()
        .map(|r| {
            require_columns(r, 2, "gen")?;
            Ok(Gen {
                bus: check_bus(integer(r, 0)?, r.line)?,
                pg: r.values[1],
                in_service: r.values.get(7).is_none_or(|&s| s > 0.0),
            })
        })
        .collect::<Result<_>>()?;

    let mut branches = Vec::new();
    let mut dropped_branches = 0;
    for r in &branch_block.rows {
        require_columns(r, 4, "branch")?;
        let from = check_bus(integer(r, 0)?, r.line)?;
        let to = check_bus(integer(r, 1)?, r.line)?;
        if r.values.get(10).is_some_and(|&s| s == 0.0) {
            dropped_branches += 1;
            continue;
        }
        branches.push(Branch {
            from,
            to,
            x: r.values[3],
        });
    }

    Ok(MatpowerCase {
        name,
        base_mva,
        buses,
        gens,
        branches,
        dropped_branches,
    })
}

fn block_is_numeric(name: &str) -> bool {
    matches!(name, "bus" | "gen" | "branch")
}

fn parse_row(row: &str, line: usize) -> Result<Vec<f64>> {
    row.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{t}` is not a number"),
            })
        })
        .collect()
}

fn require_columns(r: &Row, n: usize, block: &str) -> Result<()> {
    if r.values.len() < n {
        return Err(Error::Parse {
            line: r.line,
            message: format!(
                "{block} row has {} columns, need at least {n}",
                r.values.len()
            ),
        });
    }
    Ok(())
}

fn integer(r: &Row, col: usize) -> Result<i64> {
    let v = r.values[col];
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Parse {
            line: r.line,
            message: format!("column {} must be an integer, got {v}", col + 1),
        });
    }
    Ok(v as i64)
}
