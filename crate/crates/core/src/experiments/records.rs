//! Per-instance records, their text form and aggregation into rows.

use std::fmt::Write as _;
use std::str::FromStr;

use super::stats::Summary;
use super::SweepRow;
use crate::error::{Error, Result};
use crate::lattice::choose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Quantum runs on binary problems with solution `{1..L}`.
    Csp,
    /// Backtracking on binary problems with a random planted solution.
    BacktrackForced,
    /// Backtracking on binary problems with no planted solution.
    BacktrackUnforced,
    /// Quantum runs on random 3-SAT.
    Sat,
}

impl Family {
    pub fn tag(self) -> u64 {
        match self {
            Family::Csp => 1,
            Family::BacktrackForced => 2,
            Family::BacktrackUnforced => 3,
            Family::Sat => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Family::Csp => "csp",
            Family::BacktrackForced => "backtrack",
            Family::BacktrackUnforced => "unforced",
            Family::Sat => "sat",
        }
    }

    /// Families aggregated into the same row.
    fn group(self) -> u8 {
        match self {
            Family::Csp => 0,
            Family::BacktrackForced | Family::BacktrackUnforced => 1,
            Family::Sat => 2,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Family::Csp,
            Family::BacktrackForced,
            Family::BacktrackUnforced,
            Family::Sat,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown record family {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceRecord {
    pub family: Family,
    /// Item count; `2n` for 3-SAT.
    pub n: usize,
    pub l: usize,
    pub param: f64,
    pub m: usize,
    pub index: u64,
    /// Solutions at level `L`; for backtracking, 1 if one was found.
    pub n_soln: u64,
    pub found: bool,
    pub cost: Option<u64>,
    pub rejections: u64,
    pub norm_deviation: f64,
    /// `p_soln` of each try.
    pub p: Vec<f64>,
}

const RAW_HEADER: &str = "family,N,L,param,m,index,n_soln,found,cost,rejections,norm_dev,p";

/// One line per instance. Floats are written in shortest round-trip form.
pub fn records_to_text(records: &[InstanceRecord]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    for r in records {
        let cost = r.cost.map(|c| c.to_string()).unwrap_or_default();
        let p: Vec<String> = r.p.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(
            out,
            "{},{},{},{:?},{},{},{},{},{},{},{:?},{}",
            r.family.name(),
            r.n,
            r.l,
            r.param,
            r.m,
            r.index,
            r.n_soln,
            r.found,
            cost,
            r.rejections,
            r.norm_deviation,
            p.join(";")
        );
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<InstanceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RAW_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {RAW_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(err(format!("expected 12 fields, found {}", fields.len())));
        }
        fn num<T: FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
            s.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {what} {s:?}"),
            })
        }
        let p = if fields[11].is_empty() {
            Vec::new()
        } else {
            fields[11]
                .split(';')
                .map(|v| num::<f64>(v, "p", line_no))
                .collect::<Result<_>>()?
        };
        out.push(InstanceRecord {
            family: fields[0]
                .parse()
                .map_err(|_| err(format!("bad family {:?}", fields[0])))?,
            n: num(fields[1], "N", line_no)?,
            l: num(fields[2], "L", line_no)?,
            param: num(fields[3], "param", line_no)?,
            m: num(fields[4], "m", line_no)?,
            index: num(fields[5], "index", line_no)?,
            n_soln: num(fields[6], "n_soln", line_no)?,
            found: num(fields[7], "found", line_no)?,
            cost: if fields[8].is_empty() {
                None
            } else {
                Some(num(fields[8], "cost", line_no)?)
            },
            rejections: num(fields[9], "rejections", line_no)?,
            norm_deviation: num(fields[10], "norm_dev", line_no)?,
            p,
        });
    }
    Ok(out)
}

fn row_of(records: &[&InstanceRecord]) -> SweepRow {
    let first = records[0];
    let (n, l) = (first.n, first.l);
    let quantum: Vec<&InstanceRecord> = records.iter().copied().filter(|r| !r.p.is_empty()).collect();
    let mut inv_p = Vec::new();
    let mut zero_p = 0;
    let mut p_means = Vec::new();
    let mut inv_mean_p = Vec::new();
    let mut n_soln = Vec::new();
    let mut p_rand = Vec::new();
    let mut ratio_sets = Vec::new();
    let mut ratio_assign = Vec::new();
    let sets = choose(n as i64, l as i64) as f64;
    let assignments = 2f64.powi(l as i32);
    for r in &quantum {
        let mean_p = r.p.iter().sum::<f64>() / r.p.len() as f64;
        let positive: Vec<f64> = r.p.iter().copied().filter(|&p| p > 0.0).collect();
        if positive.is_empty() {
            zero_p += 1;
        } else {
            inv_p.push(positive.iter().map(|p| p.recip()).sum::<f64>() / positive.len() as f64);
            inv_mean_p.push(mean_p.recip());
        }
        p_means.push(mean_p);
        n_soln.push(r.n_soln as f64);
        if r.n_soln > 0 {
            p_rand.push(r.n_soln as f64 / sets);
            ratio_sets.push(mean_p * sets / r.n_soln as f64);
            if r.family == Family::Sat {
                ratio_assign.push(mean_p * assignments / r.n_soln as f64);
            }
        }
    }
    let costs = |family: Family| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.family == family)
            .filter_map(|r| r.cost.map(|c| c as f64))
            .collect()
    };
    let unforced: Vec<&&InstanceRecord> = records
        .iter()
        .filter(|r| r.family == Family::BacktrackUnforced)
        .collect();
    let soluble_fraction = if unforced.is_empty() {
        f64::NAN
    } else {
        unforced.iter().filter(|r| r.found).count() as f64 / unforced.len() as f64
    };
    let instances = records.iter().filter(|r| r.family != Family::BacktrackUnforced).count();
    SweepRow {
        family: first.family,
        n,
        l,
        param: first.param,
        m: first.m,
        instances,
        inv_p: Summary::of(&inv_p),
        zero_p,
        p: Summary::of(&p_means),
        inv_mean_p: Summary::of(&inv_mean_p),
        n_soln: Summary::of(&n_soln),
        p_rand_sets: Summary::of(&p_rand),
        ratio_sets: Summary::of(&ratio_sets),
        ratio_assign: Summary::of(&ratio_assign),
        cost: Summary::of(&costs(Family::BacktrackForced)),
        cost_unforced: Summary::of(&costs(Family::BacktrackUnforced)),
        soluble_fraction,
        rejections: records.iter().map(|r| r.rejections).sum(),
        max_norm_deviation: records.iter().fold(0.0, |m, r| r.norm_deviation.max(m)),
    }
}

/// Groups records by point in order of first appearance and summarizes each.
pub fn aggregate(records: &[InstanceRecord]) -> Vec<SweepRow> {
    type Key = (u8, usize, usize, u64, usize);
    let mut groups: Vec<(Key, Vec<&InstanceRecord>)> = Vec::new();
    for r in records {
        let key = (r.family.group(), r.n, r.l, r.param.to_bits(), r.m);
        match groups.iter_mut().rev().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups.iter().map(|(_, members)| row_of(members)).collect()
}
