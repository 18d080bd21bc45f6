//! CSV and gnuplot output.
//!
//! `results.csv`: `algorithm,tau,budget,run,seed,performance`
//!
//! `iterations.csv`: `algorithm,tau,budget,run,iteration,samples,loss,alpha_norm,omega,objective,w_1..w_M,n_1..n_M`
//! where `w` are the proportions (or BTT fractions) and `n` the samples used
//! per task, task 1 being the target.
//!
//! `aggregate.csv`: `algorithm,tau,budget,runs,mean,std`
//!
//! Reals are written with at most 9 significant digits in plain decimal
//! notation; lines end with LF.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::Algorithm;
use super::run::{IterationRecord, ResultTable, RunRecord};
use super::stats::mean;
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const PERFORMANCE_PLOT_FILE: &str = "performance.dat";
pub const WEIGHTS_PLOT_FILE: &str = "weights.dat";

/// `v` rounded to 9 significant digits, printed without exponent.
pub fn fmt_real(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn num_tasks(rt: &ResultTable) -> usize {
    rt.rows
        .iter()
        .flat_map(|r| r.iterations.first())
        .map(|it| it.weights.len())
        .next()
        .unwrap_or(0)
}

pub fn results_csv(rt: &ResultTable) -> String {
    let mut s = String::from("algorithm,tau,budget,run,seed,performance\n");
    for r in &rt.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.algorithm,
            fmt_real(r.tau),
            r.budget,
            r.run_id,
            r.seed,
            fmt_real(r.performance)
        );
    }
    s
}

pub fn iterations_csv(rt: &ResultTable) -> String {
    let m = num_tasks(rt);
    let mut s = String::from("algorithm,tau,budget,run,iteration,samples,loss,alpha_norm,omega,objective");
    for i in 1..=m {
        let _ = write!(s, ",w_{i}");
    }
    for i in 1..=m {
        let _ = write!(s, ",n_{i}");
    }
    s.push('\n');
    for r in &rt.rows {
        for it in &r.iterations {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.algorithm,
                fmt_real(r.tau),
                r.budget,
                r.run_id,
                it.iteration,
                it.samples,
                fmt_real(it.loss),
                fmt_real(it.alpha_norm),
                fmt_real(it.omega),
                fmt_real(it.objective)
            );
            for w in &it.weights {
                let _ = write!(s, ",{}", fmt_real(*w));
            }
            for n in &it.counts {
                let _ = write!(s, ",{n}");
            }
            s.push('\n');
        }
    }
    s
}

pub fn aggregate_csv(rt: &ResultTable) -> String {
    let mut s = String::from("algorithm,tau,budget,runs,mean,std\n");
    for a in rt.aggregate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            a.algorithm,
            fmt_real(a.tau),
            a.budget,
            a.runs,
            fmt_real(a.mean),
            fmt_real(a.std)
        );
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the three CSV files into `dir`, creating it if needed.
pub fn emit_csv(rt: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write(dir, RESULTS_FILE, &results_csv(rt))?,
        write(dir, ITERATIONS_FILE, &iterations_csv(rt))?,
        write(dir, AGGREGATE_FILE, &aggregate_csv(rt))?,
    ])
}

struct Fields<'a> {
    line: usize,
    file: &'a str,
    it: std::str::Split<'a, char>,
}

impl<'a> Fields<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.it
            .next()
            .ok_or_else(|| Error::Parse(format!("{}:{}: missing field", self.file, self.line)))
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T> {
        let raw = self.next()?;
        raw.parse()
            .map_err(|_| Error::Parse(format!("{}:{}: bad value {raw:?}", self.file, self.line)))
    }

    fn algorithm(&mut self) -> Result<Algorithm> {
        let raw = self.next()?;
        Algorithm::parse(raw).ok_or_else(|| Error::Parse(format!("{}:{}: unknown algorithm {raw:?}", self.file, self.line)))
    }
}

fn data_lines<'a>(text: &'a str, file: &'a str, header: &str) -> Result<impl Iterator<Item = Fields<'a>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with(header) => {}
        _ => return Err(Error::Parse(format!("{file}: missing header"))),
    }
    Ok(lines.enumerate().map(move |(i, l)| Fields {
        line: i + 2,
        file,
        it: l.split(','),
    }))
}

/// Rebuilds a table from the text of `results.csv` and `iterations.csv`.
pub fn parse_csv(results: &str, iterations: &str) -> Result<ResultTable> {
    let m = iterations
        .lines()
        .next()
        .map_or(0, |h| h.split(',').filter(|c| c.starts_with("w_")).count());

    let mut rows = Vec::new();
    for mut f in data_lines(results, RESULTS_FILE, "algorithm,tau,budget,run,seed,performance")? {
        rows.push(RunRecord {
            algorithm: f.algorithm()?,
            tau: f.parse()?,
            budget: f.parse()?,
            run_id: f.parse()?,
            seed: f.parse()?,
            performance: f.parse()?,
            iterations: Vec::new(),
        });
    }
    let table = ResultTable::new(rows);
    let mut rows = table.rows;

    for mut f in data_lines(iterations, ITERATIONS_FILE, "algorithm,tau,budget,run,iteration")? {
        let line = f.line;
        let (algorithm, tau, budget, run_id): (Algorithm, f64, usize, usize) =
            (f.algorithm()?, f.parse()?, f.parse()?, f.parse()?);
        let mut rec = IterationRecord {
            iteration: f.parse()?,
            samples: f.parse()?,
            loss: f.parse()?,
            alpha_norm: f.parse()?,
            omega: f.parse()?,
            objective: f.parse()?,
            weights: Vec::with_capacity(m),
            counts: Vec::with_capacity(m),
        };
        for _ in 0..m {
            rec.weights.push(f.parse()?);
        }
        for _ in 0..m {
            rec.counts.push(f.parse()?);
        }
        let row = rows
            .iter_mut()
            .find(|r| r.algorithm == algorithm && r.tau == tau && r.budget == budget && r.run_id == run_id)
            .ok_or_else(|| Error::Parse(format!("{ITERATIONS_FILE}:{line}: no matching run")))?;
        row.iterations.push(rec);
    }
    Ok(ResultTable { rows })
}

pub fn read_csv(dir: &Path) -> Result<ResultTable> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    };
    parse_csv(&read(RESULTS_FILE)?, &read(ITERATIONS_FILE)?)
}

/// One gnuplot block per (algorithm, tau): `budget mean std`.
pub fn performance_plot_data(rt: &ResultTable) -> String {
    let mut s = String::new();
    let agg = rt.aggregate();
    let mut i = 0;
    while i < agg.len() {
        let (a, tau) = (agg[i].algorithm, agg[i].tau);
        if !s.is_empty() {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {a} tau={}", fmt_real(tau));
        s.push_str("# budget mean std\n");
        while i < agg.len() && agg[i].algorithm == a && agg[i].tau == tau {
            let _ = writeln!(s, "{} {} {}", agg[i].budget, fmt_real(agg[i].mean), fmt_real(agg[i].std));
            i += 1;
        }
    }
    s
}

/// Mean `λ` (or `β`) per iteration for the adaptive algorithms, one block
/// per (algorithm, tau, budget), one column per task.
pub fn weights_plot_data(rt: &ResultTable) -> String {
    let mut s = String::new();
    let m = num_tasks(rt);
    let mut i = 0;
    let rows = &rt.rows;
    while i < rows.len() {
        let r = &rows[i];
        let j = rows[i..]
            .iter()
            .position(|x| x.algorithm != r.algorithm || x.tau != r.tau || x.budget != r.budget)
            .map_or(rows.len(), |p| i + p);
        if matches!(r.algorithm, Algorithm::Bat | Algorithm::BatPlusTarget | Algorithm::Btt) {
            if !s.is_empty() {
                s.push_str("\n\n");
            }
            let _ = writeln!(s, "# {} tau={} budget={}", r.algorithm, fmt_real(r.tau), r.budget);
            s.push_str("# iteration");
            for t in 1..=m {
                let _ = write!(s, " w_{t}");
            }
            s.push('\n');
            let iters = r.iterations.len();
            for k in 0..iters {
                let _ = write!(s, "{}", k + 1);
                for t in 0..m {
                    let vals: Vec<f64> = rows[i..j]
                        .iter()
                        .filter_map(|x| x.iterations.get(k).map(|it| it.weights[t]))
                        .collect();
                    let _ = write!(s, " {}", fmt_real(mean(&vals)));
                }
                s.push('\n');
            }
        }
        i = j;
    }
    s
}

pub fn emit_plot_data(rt: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write(dir, PERFORMANCE_PLOT_FILE, &performance_plot_data(rt))?,
        write(dir, WEIGHTS_PLOT_FILE, &weights_plot_data(rt))?,
    ])
}
