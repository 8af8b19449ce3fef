//! Per-seed results CSV and the statistics report built from it.
//!
//! Results: header `method,seed,balanced_accuracy`, one row per (method,
//! seed); a failed fit is written as `NaN`.
//!
//! Report (CSV):
//!
//! ```text
//! #adapt-stats,1
//! #q,<fdr level>
//! #friedman,<chi2>,<p>              (or #friedman,undefined)
//! #within_1pp,<fraction>            (or #within_1pp,undefined)
//! #method,<name>,<n>,<mean>,<std>   (one per method, input order)
//! a,b,n,statistic,p,p_adjusted,d,reject,note
//! <one row per method pair>
//! ```
//!
//! Untestable pairs leave the numeric columns empty and explain why in
//! `note`. All numbers use shortest round-trip formatting, so parsing a
//! rendered report gives back the same values bit for bit.

use chanadapt::stats::{
    bh_correct, cohens_d, friedman, wilcoxon_signed_rank, within_1pp_fraction, Friedman,
};
use chanadapt::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    pub balanced_accuracy: f64,
}

pub const RESULTS_HEADER: &str = "method,seed,balanced_accuracy";

pub fn render_results(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.method, r.seed, r.balanced_accuracy));
    }
    out
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(format!("expected header `{RESULTS_HEADER}`")),
    }
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 || f[0].is_empty() {
                return Err(format!("line {}: expected method,seed,balanced_accuracy", i + 1));
            }
            Ok(ResultRow {
                method: f[0].to_string(),
                seed: f[1].trim().parse().map_err(|_| format!("line {}: bad seed {:?}", i + 1, f[1]))?,
                balanced_accuracy: f[2]
                    .trim()
                    .parse()
                    .map_err(|_| format!("line {}: bad accuracy {:?}", i + 1, f[2]))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    /// Seeds with a finite score.
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single seed).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Tested {
        n: usize,
        statistic: f64,
        p: f64,
        p_adjusted: f64,
        d: Option<f64>,
        reject: bool,
    },
    Undefined(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub outcome: PairOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub q: f64,
    pub methods: Vec<MethodSummary>,
    pub friedman: Option<Friedman>,
    pub within_1pp: Option<f64>,
    pub pairs: Vec<PairRow>,
}

/// Methods in first-appearance order and seeds in ascending order, with a
/// `method × seed` score table (NaN where missing).
fn score_table(rows: &[ResultRow]) -> (Vec<String>, Vec<u64>, DMatrix<f64>) {
    let mut methods: Vec<String> = Vec::new();
    let mut seeds: Vec<u64> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        if !seeds.contains(&r.seed) {
            seeds.push(r.seed);
        }
    }
    seeds.sort_unstable();
    let mut table = DMatrix::from_element(methods.len(), seeds.len(), f64::NAN);
    for r in rows {
        let i = methods.iter().position(|m| *m == r.method).unwrap();
        let j = seeds.iter().position(|s| *s == r.seed).unwrap();
        table[(i, j)] = r.balanced_accuracy;
    }
    (methods, seeds, table)
}

/// Pairwise Wilcoxon tests with BH correction over the testable pairs,
/// Cohen's d, a Friedman test over seeds where every method has a score,
/// and the within-1pp fraction with seeds as conditions.
pub fn build_report(rows: &[ResultRow], q: f64) -> Result<StatsReport, String> {
    if !(q > 0.0 && q < 1.0) {
        return Err(format!("q {q} outside (0, 1)"));
    }
    let (methods, _, table) = score_table(rows);
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let vals: Vec<f64> = table.row(i).iter().copied().filter(|v| v.is_finite()).collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let std = if n < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            MethodSummary {
                method: m.clone(),
                n,
                mean,
                std,
            }
        })
        .collect();

    let mut pairs = Vec::new();
    let mut tested = Vec::new();
    for i in 0..methods.len() {
        for j in i + 1..methods.len() {
            let (a, b): (Vec<f64>, Vec<f64>) = table
                .row(i)
                .iter()
                .zip(table.row(j).iter())
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| (*x, *y))
                .unzip();
            let outcome = match wilcoxon_signed_rank(&a, &b) {
                Ok(w) => {
                    tested.push((pairs.len(), w.p_value));
                    PairOutcome::Tested {
                        n: w.n,
                        statistic: w.statistic,
                        p: w.p_value,
                        p_adjusted: f64::NAN,
                        d: cohens_d(&a, &b).ok(),
                        reject: false,
                    }
                }
                Err(e) => PairOutcome::Undefined(e.to_string()),
            };
            pairs.push(PairRow {
                a: methods[i].clone(),
                b: methods[j].clone(),
                outcome,
            });
        }
    }
    let ps: Vec<f64> = tested.iter().map(|(_, p)| *p).collect();
    let bh = bh_correct(&ps, q).map_err(|e| e.to_string())?;
    for (k, (idx, _)) in tested.iter().enumerate() {
        if let PairOutcome::Tested {
            p_adjusted, reject, ..
        } = &mut pairs[*idx].outcome
        {
            *p_adjusted = bh.adjusted[k];
            *reject = bh.reject[k];
        }
    }

    let complete: Vec<usize> = (0..table.ncols())
        .filter(|&j| table.column(j).iter().all(|v| v.is_finite()))
        .collect();
    let blocks = DMatrix::from_fn(complete.len(), methods.len(), |b, m| table[(m, complete[b])]);
    let friedman = friedman(&blocks).ok();
    let within_1pp = if table.is_empty() { None } else { within_1pp_fraction(&table).ok() };
    Ok(StatsReport {
        q,
        methods: summaries,
        friedman,
        within_1pp,
        pairs,
    })
}

pub const PAIR_HEADER: &str = "a,b,n,statistic,p,p_adjusted,d,reject,note";

pub fn render_report(r: &StatsReport) -> String {
    let mut out = format!("#adapt-stats,1\n#q,{}\n", r.q);
    match &r.friedman {
        Some(f) => out.push_str(&format!("#friedman,{},{}\n", f.statistic, f.p_value)),
        None => out.push_str("#friedman,undefined\n"),
    }
    match r.within_1pp {
        Some(w) => out.push_str(&format!("#within_1pp,{w}\n")),
        None => out.push_str("#within_1pp,undefined\n"),
    }
    for m in &r.methods {
        out.push_str(&format!("#method,{},{},{},{}\n", m.method, m.n, m.mean, m.std));
    }
    out.push_str(PAIR_HEADER);
    out.push('\n');
    for p in &r.pairs {
        match &p.outcome {
            PairOutcome::Tested {
                n,
                statistic,
                p: pv,
                p_adjusted,
                d,
                reject,
            } => {
                let d = d.map(|d| d.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{n},{statistic},{pv},{p_adjusted},{d},{reject},\n",
                    p.a, p.b
                ));
            }
            PairOutcome::Undefined(note) => {
                out.push_str(&format!("{},{},,,,,,false,{note}\n", p.a, p.b));
            }
        }
    }
    out
}

fn num(s: &str, what: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("bad {what} {s:?}"))
}

pub fn parse_report(text: &str) -> Result<StatsReport, String> {
    let mut lines = text.lines();
    if lines.next() != Some("#adapt-stats,1") {
        return Err("missing `#adapt-stats,1` line".into());
    }
    let mut q = None;
    let mut friedman_v = None;
    let mut within = None;
    let mut methods = Vec::new();
    let mut pairs = Vec::new();
    let mut in_pairs = false;
    for line in lines {
        if in_pairs {
            let f: Vec<&str> = line.splitn(9, ',').collect();
            if f.len() != 9 {
                return Err(format!("bad pair row {line:?}"));
            }
            let outcome = if f[3].is_empty() {
                PairOutcome::Undefined(f[8].to_string())
            } else {
                PairOutcome::Tested {
                    n: f[2].parse().map_err(|_| format!("bad n {:?}", f[2]))?,
                    statistic: num(f[3], "statistic")?,
                    p: num(f[4], "p")?,
                    p_adjusted: num(f[5], "adjusted p")?,
                    d: if f[6].is_empty() { None } else { Some(num(f[6], "d")?) },
                    reject: f[7].parse().map_err(|_| format!("bad reject {:?}", f[7]))?,
                }
            };
            pairs.push(PairRow {
                a: f[0].to_string(),
                b: f[1].to_string(),
                outcome,
            });
            continue;
        }
        if line == PAIR_HEADER {
            in_pairs = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        match f[0] {
            "#q" if f.len() == 2 => q = Some(num(f[1], "q")?),
            "#friedman" if f.len() == 2 && f[1] == "undefined" => friedman_v = Some(None),
            "#friedman" if f.len() == 3 => {
                friedman_v = Some(Some(Friedman {
                    statistic: num(f[1], "chi2")?,
                    p_value: num(f[2], "p")?,
                }))
            }
            "#within_1pp" if f.len() == 2 => {
                within = Some(if f[1] == "undefined" { None } else { Some(num(f[1], "fraction")?) })
            }
            "#method" if f.len() == 5 => methods.push(MethodSummary {
                method: f[1].to_string(),
                n: f[2].parse().map_err(|_| format!("bad n {:?}", f[2]))?,
                mean: num(f[3], "mean")?,
                std: num(f[4], "std")?,
            }),
            _ => return Err(format!("unexpected line {line:?}")),
        }
    }
    if !in_pairs {
        return Err("missing pair table header".into());
    }
    Ok(StatsReport {
        q: q.ok_or("missing #q")?,
        methods,
        friedman: friedman_v.ok_or("missing #friedman")?,
        within_1pp: within.ok_or("missing #within_1pp")?,
        pairs,
    })
}

fn fmt_opt(v: Option<f64>, width: usize) -> String {
    match v {
        Some(v) => format!("{v:>width$.6}"),
        None => format!("{:>width$}", "-"),
    }
}

/// Human-readable summary with aligned columns.
pub fn render_table(r: &StatsReport) -> String {
    let name_w = r
        .methods
        .iter()
        .map(|m| m.method.len())
        .chain(r.pairs.iter().flat_map(|p| [p.a.len(), p.b.len()]))
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = format!("{:<name_w$} {:>4} {:>10} {:>10}\n", "method", "n", "mean", "std");
    for m in &r.methods {
        out.push_str(&format!("{:<name_w$} {:>4} {:>10.6} {:>10.6}\n", m.method, m.n, m.mean, m.std));
    }
    match &r.friedman {
        Some(f) => out.push_str(&format!("friedman chi2={:.6} p={:.6e}\n", f.statistic, f.p_value)),
        None => out.push_str("friedman undefined\n"),
    }
    match r.within_1pp {
        Some(w) => out.push_str(&format!("within_1pp={w:.6}\n")),
        None => out.push_str("within_1pp undefined\n"),
    }
    out.push_str(&format!(
        "{:<name_w$} {:<name_w$} {:>4} {:>10} {:>12} {:>12} {:>10} {:>6}\n",
        "a", "b", "n", "W", "p", "p_adj", "d", "reject"
    ));
    for p in &r.pairs {
        match &p.outcome {
            PairOutcome::Tested {
                n,
                statistic,
                p: pv,
                p_adjusted,
                d,
                reject,
            } => out.push_str(&format!(
                "{:<name_w$} {:<name_w$} {n:>4} {statistic:>10.1} {pv:>12.6} {p_adjusted:>12.6} {} {:>6}\n",
                p.a,
                p.b,
                fmt_opt(*d, 10),
                if *reject { "yes" } else { "no" }
            )),
            PairOutcome::Undefined(note) => {
                out.push_str(&format!("{:<name_w$} {:<name_w$} {note}\n", p.a, p.b))
            }
        }
    }
    out
}
