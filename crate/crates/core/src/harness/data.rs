use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution as _, Gamma};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::config::Distribution;
use crate::error::{Error, Result};
use crate::statistics::Dataset;

/// Draws `n` records of `dim` coordinates from a synthetic distribution.
pub fn generate_dataset(dist: &Distribution, n: usize, dim: usize, seed: u64) -> Result<Dataset> {
    dist.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let values = match *dist {
        Distribution::Uniform => (0..n * dim).map(|_| rng.random::<f64>()).collect(),
        Distribution::Beta { mean } => {
            let a = Gamma::new(mean / 2.0, 1.0).map_err(|e| Error::config(e.to_string()))?;
            let b = Gamma::new((1.0 - mean) / 2.0, 1.0).map_err(|e| Error::config(e.to_string()))?;
            (0..n * dim)
                .map(|_| loop {
                    let x: f64 = a.sample(&mut rng);
                    let y: f64 = b.sample(&mut rng);
                    let s = x + y;
                    if s > 0.0 && s.is_finite() {
                        break (x / s).clamp(0.0, 1.0);
                    }
                })
                .collect()
        }
        Distribution::Correlated { rho } => {
            let w = spread_for_correlation(rho.abs());
            let mut v = Vec::with_capacity(n * dim);
            for _ in 0..n {
                let x: f64 = rng.random();
                v.push(x);
                for _ in 1..dim {
                    let y = if w.is_infinite() {
                        rng.random::<f64>()
                    } else {
                        (x + w * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0)
                    };
                    v.push(if rho < 0.0 { 1.0 - y } else { y });
                }
            }
            v
        }
        Distribution::TwoPoint { p } => {
            let ones = (p * n as f64).round() as usize;
            (0..n)
                .flat_map(|i| std::iter::repeat_n(if i < ones { 1.0 } else { 0.0 }, dim))
                .collect()
        }
        Distribution::Csv { ref path } => {
            let data = load_csv(path, false)?;
            return data.leading_columns(dim);
        }
    };
    Dataset::from_flat(dim, values)
}

const SPREAD_SAMPLES: usize = 50_000;
const SPREAD_GRID: usize = 241;

/// `(w, rho(w))` on a geometric grid of `w` in `[1e-3, 1e3]`, with `rho`
/// forced non-increasing.
fn spread_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x5EED_C0DE);
        let xs: Vec<f64> = (0..SPREAD_SAMPLES).map(|_| rng.random()).collect();
        let us: Vec<f64> = (0..SPREAD_SAMPLES).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let mut table = Vec::with_capacity(SPREAD_GRID + 1);
        table.push((0.0, 1.0));
        let mut prev = 1.0;
        for g in 0..SPREAD_GRID {
            let w = 10f64.powf(-3.0 + 6.0 * g as f64 / (SPREAD_GRID - 1) as f64);
            let ys: Vec<f64> = xs.iter().zip(&us).map(|(x, u)| (x + w * u).clamp(0.0, 1.0)).collect();
            let rho = pearson(&xs, &ys).min(prev);
            table.push((w, rho));
            prev = rho;
        }
        table
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Perturbation half-width giving correlation `rho ∈ [0, 1]`; infinite
/// (independent columns) for `rho` below the table's reach.
pub fn spread_for_correlation(rho: f64) -> f64 {
    let table = spread_table();
    if rho >= 1.0 {
        return 0.0;
    }
    if rho <= 0.0 {
        return f64::INFINITY;
    }
    for pair in table.windows(2) {
        let ((w0, r0), (w1, r1)) = (pair[0], pair[1]);
        if rho <= r0 && rho >= r1 {
            if r0 == r1 {
                return w0;
            }
            return w0 + (w1 - w0) * (r0 - rho) / (r0 - r1);
        }
    }
    f64::INFINITY
}

/// Reads a CSV dataset: optional header row, one record per line, comma
/// separated finite reals. Cells outside `[0, 1]` are an error naming the
/// cell unless `clip_input` is set, in which case they are clipped.
pub fn load_csv(path: &Path, clip_input: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file, clip_input)
}

pub fn parse_csv<R: std::io::Read>(reader: R, clip_input: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut dim = None;
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("record {}: {e}", i + 1)))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 && rec.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        match dim {
            None => dim = Some(rec.len()),
            Some(d) if d != rec.len() => {
                return Err(Error::data(format!(
                    "line {line}: expected {d} columns, found {}",
                    rec.len()
                )))
            }
            _ => {}
        }
        for (j, cell) in rec.iter().enumerate() {
            let col = j + 1;
            let v: f64 = cell.parse().map_err(|_| {
                Error::data(format!("line {line}, column {col}: cannot parse `{cell}` as a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::data(format!("line {line}, column {col}: value `{cell}` is not finite")));
            }
            if !(0.0..=1.0).contains(&v) {
                if !clip_input {
                    return Err(Error::data(format!(
                        "line {line}, column {col}: value {v} outside [0, 1] (use clipping to accept)"
                    )));
                }
                values.push(v.clamp(0.0, 1.0));
            } else {
                values.push(v);
            }
        }
    }
    let dim = dim.ok_or_else(|| Error::data("no records in input"))?;
    Dataset::from_flat(dim, values)
}

/// Writes one record per line with shortest round-trip formatting.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(e.to_string()))?;
    for rec in data.records() {
        w.write_record(rec.iter().map(|v| v.to_string()))
            .map_err(|e| Error::data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
