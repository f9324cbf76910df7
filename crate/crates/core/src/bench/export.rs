use std::fs;
use std::path::Path;

use super::{RunRecord, Summary};
use crate::error::{Error, Result};
use crate::io::write_atomic;

const RECORD_HEADER: [&str; 13] = [
    "n", "k_matrices", "snr", "seed", "sim_index", "algorithm", "alpha", "iterations", "converged", "final_cost", "final_pi",
    "pi_trace", "cost_trace",
];

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(vs: &[f64]) -> String {
    vs.iter().map(|v| f(*v)).collect::<Vec<_>>().join(";")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_f64).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Deterministic part of the records: everything except wall-clock time.
pub fn records_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.k_matrices.to_string(),
            f(r.snr),
            r.seed.to_string(),
            r.sim_index.to_string(),
            r.algorithm.to_string(),
            r.alpha.map(f).unwrap_or_default(),
            r.iterations.to_string(),
            r.converged.to_string(),
            f(r.final_cost),
            f(r.final_pi),
            join(&r.pi_trace),
            join(&r.cost_trace),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

fn timings_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sim_index", "algorithm", "alpha", "wall_time_s"]).map_err(csv_err)?;
    for r in records {
        w.write_record([r.sim_index.to_string(), r.algorithm.to_string(), r.alpha.map(f).unwrap_or_default(), f(r.wall_time_s)])
            .map_err(csv_err)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn plot_name(alg: &str, alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("{alg}_alpha_{a}.dat"),
        None => format!("{alg}.dat"),
    }
}

/// One file per cell with the mean index after each iteration; finished runs carry their last value.
pub fn write_plots(dir: &Path, summary: &Summary, records: &[RunRecord]) -> Result<()> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    for cell in &summary.cells {
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == cell.algorithm && r.alpha == cell.alpha).collect();
        let len = rs.iter().map(|r| r.pi_trace.len()).max().unwrap_or(0);
        let mut out = String::from("# iteration mean_pi\n");
        for it in 0..len {
            let mean = rs.iter().map(|r| r.pi_trace[it.min(r.pi_trace.len() - 1)]).sum::<f64>() / rs.len() as f64;
            out.push_str(&format!("{it} {}\n", f(mean)));
        }
        write_atomic(&plots.join(plot_name(cell.algorithm.name(), cell.alpha)), out.as_bytes())?;
    }
    Ok(())
}

/// Writes `records.csv`, `timings.csv`, `summary.json` and `plots/*.dat` under `dir`.
pub fn export(dir: &Path, records: &[RunRecord], summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("records.csv"), records_csv(records)?.as_bytes())?;
    write_atomic(&dir.join("timings.csv"), timings_csv(records)?.as_bytes())?;
    let js = serde_json::to_string_pretty(summary).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&dir.join("summary.json"), js.as_bytes())?;
    write_plots(dir, summary, records)
}

/// Reads back `records.csv` and `timings.csv` written by [`export`].
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let text = crate::io::read_to_string(&dir.join("records.csv"))?;
    let times = crate::io::read_to_string(&dir.join("timings.csv"))?;
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut td = csv::Reader::from_reader(times.as_bytes());
    let mut out = Vec::new();
    for (row, trow) in rd.records().zip(td.records()) {
        let row = row.map_err(csv_err)?;
        let trow = trow.map_err(csv_err)?;
        let get = |i: usize| row.get(i).ok_or_else(|| Error::Parse("short record row".into()));
        let int = |i: usize| -> Result<u64> { get(i)?.parse().map_err(|_| Error::Parse(format!("bad integer in column {i}"))) };
        let alpha = get(6)?;
        out.push(RunRecord {
            n: int(0)? as usize,
            k_matrices: int(1)? as usize,
            snr: parse_f64(get(2)?)?,
            seed: int(3)?,
            sim_index: int(4)?,
            algorithm: get(5)?.parse()?,
            alpha: if alpha.is_empty() { None } else { Some(parse_f64(alpha)?) },
            iterations: int(7)? as usize,
            converged: get(8)?.parse().map_err(|_| Error::Parse("bad boolean".into()))?,
            wall_time_s: parse_f64(trow.get(3).ok_or_else(|| Error::Parse("short timing row".into()))?)?,
            final_cost: parse_f64(get(9)?)?,
            final_pi: parse_f64(get(10)?)?,
            pi_trace: parse_list(get(11)?)?,
            cost_trace: parse_list(get(12)?)?,
        });
    }
    Ok(out)
}
