//! Per-chain draw files.
//!
//! One CSV per chain: seven sampler-statistic columns followed by one column
//! per unconstrained coordinate. Floats are written in shortest round-trip
//! form, so reading a file back reproduces the draws bit for bit.

use std::io::{Read, Write};

use super::{ChainDraws, TransitionStats};
use crate::SamplerError;

pub const STAT_COLUMNS: [&str; 7] = [
    "lp__",
    "accept_stat__",
    "stepsize__",
    "treedepth__",
    "n_leapfrog__",
    "divergent__",
    "energy__",
];

pub fn write_draws<W: Write>(w: W, names: &[String], chain: &ChainDraws) -> Result<(), SamplerError> {
    let mut wtr = csv::Writer::from_writer(w);
    let header: Vec<&str> = STAT_COLUMNS
        .iter()
        .copied()
        .chain(names.iter().map(|s| s.as_str()))
        .collect();
    wtr.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..chain.n_draws() {
        let s = &chain.stats[i];
        row.clear();
        row.push(chain.lp[i].to_string());
        row.push(s.accept_stat.to_string());
        row.push(chain.step_size.to_string());
        row.push(s.tree_depth.to_string());
        row.push(s.n_leapfrog.to_string());
        row.push((s.divergent as u8).to_string());
        row.push(s.energy.to_string());
        row.extend(chain.draw(i).iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a draw file; returns the parameter names and the chain.
///
/// The adapted metric is not stored in the file, so `inv_metric` comes back
/// empty.
pub fn read_draws<R: Read>(r: R) -> Result<(Vec<String>, ChainDraws), SamplerError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < STAT_COLUMNS.len() || header.iter().zip(STAT_COLUMNS).any(|(a, b)| a != b) {
        return Err(SamplerError::Format(format!(
            "expected leading columns {}",
            STAT_COLUMNS.join(",")
        )));
    }
    let names: Vec<String> = header.iter().skip(STAT_COLUMNS.len()).map(String::from).collect();
    let mut chain = ChainDraws {
        positions: Vec::new(),
        lp: Vec::new(),
        stats: Vec::new(),
        step_size: 0.0,
        inv_metric: Vec::new(),
        warmup_divergences: 0,
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| SamplerError::Format(format!("line {}: bad value in column {}", line + 2, col + 1));
        let f = |col: usize| -> Result<f64, SamplerError> { rec[col].parse().map_err(|_| bad(col)) };
        let u = |col: usize| -> Result<usize, SamplerError> { rec[col].parse().map_err(|_| bad(col)) };
        chain.lp.push(f(0)?);
        chain.step_size = f(2)?;
        chain.stats.push(TransitionStats {
            accept_stat: f(1)?,
            tree_depth: u(3)?,
            n_leapfrog: u(4)?,
            divergent: u(5)? != 0,
            energy: f(6)?,
        });
        for col in STAT_COLUMNS.len()..rec.len() {
            chain.positions.push(f(col)?);
        }
    }
    Ok((names, chain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let chain = ChainDraws {
            positions: vec![0.1, -1.0 / 3.0, 2e-300, 7.5],
            lp: vec![-1.25, -0.1 - 0.2],
            stats: vec![
                TransitionStats {
                    accept_stat: 0.91,
                    tree_depth: 3,
                    n_leapfrog: 7,
                    divergent: false,
                    energy: 2.0 / 3.0,
                },
                TransitionStats {
                    accept_stat: 0.4,
                    tree_depth: 1,
                    n_leapfrog: 1,
                    divergent: true,
                    energy: 1.5,
                },
            ],
            step_size: 0.123456789,
            inv_metric: Vec::new(),
            warmup_divergences: 0,
        };
        let names = vec!["a".to_string(), "b[1]".to_string()];
        let mut buf = Vec::new();
        write_draws(&mut buf, &names, &chain).unwrap();
        let (n2, c2) = read_draws(buf.as_slice()).unwrap();
        assert_eq!(n2, names);
        assert_eq!(c2, chain);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_draws("x,y\n1,2\n".as_bytes()).is_err());
    }
}
