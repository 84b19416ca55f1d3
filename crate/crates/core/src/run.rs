//! Per-run logs shared by every method, with a plain-text form.
//!
//! ```text
//! key=value header lines
//! [periods]
//! index,start,end,strategies,processed,scores,main_views
//! [selections]
//! agent,frames            (frames space separated)
//! [summary]               (optional)
//! frames
//! [delivered]             (optional)
//! frames
//! [comm]
//! bucket,kind,size,count,delivered_msgs,delivered_bytes
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ffagent::Strategy;
use crate::netsim::{BucketStats, CommReport, MessageKind};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing field `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// Strategy each agent used during this period.
    pub strategies: Vec<Strategy>,
    pub processed: Vec<usize>,
    /// Post-consensus importance scores (distributed runs).
    pub scores: Option<Vec<f32>>,
    /// Main views chosen at the end of the period (centralized runs).
    pub main_views: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: String,
    pub num_views: usize,
    pub length: usize,
    pub period: usize,
    pub periods: Vec<PeriodRecord>,
    /// Selected frame indices per agent, ascending.
    pub selections: Vec<Vec<usize>>,
    /// Controller summary, when the method produces one.
    pub summary: Option<Vec<usize>>,
    /// Frames that reached the controller, when there is one.
    pub delivered: Option<Vec<usize>>,
    pub comm: CommReport,
}

impl RunReport {
    pub fn new(method: impl Into<String>, num_views: usize, length: usize, period: usize) -> Self {
        Self {
            method: method.into(),
            num_views,
            length,
            period,
            periods: Vec::new(),
            selections: vec![Vec::new(); num_views],
            summary: None,
            delivered: None,
            comm: CommReport::default(),
        }
    }

    pub fn total_processed(&self) -> usize {
        self.selections.iter().map(Vec::len).sum()
    }

    /// Processed frames over all raw frames of all views.
    pub fn processing_rate(&self) -> f64 {
        let denom = self.num_views * self.length;
        if denom == 0 {
            return 0.0;
        }
        self.total_processed() as f64 / denom as f64
    }

    /// Union of every agent's selected frames, ascending.
    pub fn selected_union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.selections.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Per-period processed counts agree with the selection lists.
    pub fn is_consistent(&self) -> bool {
        let from_periods: usize = self.periods.iter().flat_map(|p| p.processed.iter()).sum();
        let per_agent_ok = (0..self.num_views).all(|n| {
            let counted: usize = self.periods.iter().map(|p| p.processed.get(n).copied().unwrap_or(0)).sum();
            counted == self.selections[n].len()
        });
        let sorted = self
            .selections
            .iter()
            .all(|s| s.windows(2).all(|w| w[0] < w[1]) && s.iter().all(|&f| f < self.length));
        from_periods == self.total_processed() && per_agent_ok && sorted
    }

    /// Text form; `extra` lines are written into the header after the
    /// standard keys.
    pub fn to_text(&self, extra: &[(String, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method={}", self.method);
        let _ = writeln!(out, "num_views={}", self.num_views);
        let _ = writeln!(out, "length={}", self.length);
        let _ = writeln!(out, "period={}", self.period);
        for (k, v) in extra {
            let _ = writeln!(out, "{k}={v}");
        }
        out.push_str("[periods]\nindex,start,end,strategies,processed,scores,main_views\n");
        for p in &self.periods {
            let strategies = join(p.strategies.iter().map(|s| s.code()), "|");
            let processed = join(p.processed.iter(), "|");
            let scores = p.scores.as_ref().map_or(String::new(), |s| join(s.iter().map(|x| format!("{x:?}")), "|"));
            let main = p.main_views.as_ref().map_or(String::new(), |m| join(m.iter(), "|"));
            let _ = writeln!(out, "{},{},{},{strategies},{processed},{scores},{main}", p.index, p.start, p.end);
        }
        out.push_str("[selections]\nagent,frames\n");
        for (n, s) in self.selections.iter().enumerate() {
            let _ = writeln!(out, "{n},{}", join(s.iter(), " "));
        }
        if let Some(summary) = &self.summary {
            let _ = writeln!(out, "[summary]\n{}", join(summary.iter(), " "));
        }
        if let Some(delivered) = &self.delivered {
            let _ = writeln!(out, "[delivered]\n{}", join(delivered.iter(), " "));
        }
        out.push_str("[comm]\nbucket,kind,size,count,delivered_msgs,delivered_bytes\n");
        for (name, b) in [("p2p", &self.comm.p2p), ("central", &self.comm.central)] {
            let _ = writeln!(out, "{name},total,0,{},{},{}", b.attempted_msgs, b.delivered_msgs, b.delivered_bytes);
            for (&(kind, size), &count) in &b.sizes {
                let _ = writeln!(out, "{name},{},{size},{count},,", kind.name());
            }
        }
        out
    }

    /// Parses [`RunReport::to_text`] output. Returns the report and any
    /// header keys beyond the standard ones.
    pub fn from_text(text: &str) -> Result<(Self, BTreeMap<String, String>), ReportError> {
        let mut header = BTreeMap::new();
        let mut section = "";
        let mut periods = Vec::new();
        let mut selections: Vec<Vec<usize>> = Vec::new();
        let mut summary = None;
        let mut delivered = None;
        let mut comm = CommReport::default();
        let mut skip_columns = false;
        for (ln, line) in text.lines().enumerate() {
            let err = |reason: String| ReportError::Parse { line: ln + 1, reason };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name {
                    "periods" => "periods",
                    "selections" => "selections",
                    "summary" => "summary",
                    "delivered" => "delivered",
                    "comm" => "comm",
                    other => return Err(err(format!("unknown section `{other}`"))),
                };
                skip_columns = !matches!(section, "summary" | "delivered");
                continue;
            }
            if skip_columns {
                skip_columns = false;
                continue;
            }
            match section {
                "" => {
                    let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
                    header.insert(k.to_string(), v.to_string());
                }
                "periods" => {
                    let f: Vec<&str> = line.split(',').collect();
                    if f.len() != 7 {
                        return Err(err(format!("expected 7 columns, got {}", f.len())));
                    }
                    let strategies = split(f[3], '|', &err)?
                        .into_iter()
                        .map(|c: u8| Strategy::from_code(c).ok_or_else(|| err(format!("bad strategy {c}"))))
                        .collect::<Result<_, _>>()?;
                    periods.push(PeriodRecord {
                        index: num(f[0], &err)?,
                        start: num(f[1], &err)?,
                        end: num(f[2], &err)?,
                        strategies,
                        processed: split(f[4], '|', &err)?,
                        scores: (!f[5].is_empty()).then(|| split(f[5], '|', &err)).transpose()?,
                        main_views: (!f[6].is_empty()).then(|| split(f[6], '|', &err)).transpose()?,
                    });
                }
                "selections" => {
                    let (_, frames) = line.split_once(',').ok_or_else(|| err("expected agent,frames".into()))?;
                    selections.push(split(frames, ' ', &err)?);
                }
                "summary" => summary = Some(split(line, ' ', &err)?),
                "delivered" => delivered = Some(split(line, ' ', &err)?),
                "comm" => {
                    let f: Vec<&str> = line.split(',').collect();
                    if f.len() != 6 {
                        return Err(err(format!("expected 6 columns, got {}", f.len())));
                    }
                    let bucket: &mut BucketStats = match f[0] {
                        "p2p" => &mut comm.p2p,
                        "central" => &mut comm.central,
                        other => return Err(err(format!("unknown bucket `{other}`"))),
                    };
                    if f[1] == "total" {
                        bucket.attempted_msgs = num(f[3], &err)?;
                        bucket.delivered_msgs = num(f[4], &err)?;
                        bucket.delivered_bytes = num(f[5], &err)?;
                    } else {
                        let kind = MessageKind::from_name(f[1]).ok_or_else(|| err(format!("unknown kind `{}`", f[1])))?;
                        let size: usize = num(f[2], &err)?;
                        let count: u64 = num(f[3], &err)?;
                        bucket.sizes.insert((kind, size), count);
                    }
                }
                _ => unreachable!(),
            }
        }
        comm.p2p.attempted_bytes = comm.p2p.histogram_bytes();
        comm.central.attempted_bytes = comm.central.histogram_bytes();
        let mut take = |key: &'static str| -> Result<String, ReportError> {
            header.remove(key).ok_or(ReportError::Missing(key))
        };
        let method = take("method")?;
        let parse_usize = |v: String, key: &'static str| {
            v.parse::<usize>().map_err(|_| ReportError::Parse { line: 0, reason: format!("bad `{key}`") })
        };
        let num_views = parse_usize(take("num_views")?, "num_views")?;
        let length = parse_usize(take("length")?, "length")?;
        let period = parse_usize(take("period")?, "period")?;
        let report = RunReport { method, num_views, length, period, periods, selections, summary, delivered, comm };
        Ok((report, header))
    }
}

fn join<T: std::fmt::Display>(items: impl Iterator<Item = T>, sep: &str) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn num<T: std::str::FromStr>(s: &str, err: &impl Fn(String) -> ReportError) -> Result<T, ReportError> {
    s.parse().map_err(|_| err(format!("cannot parse `{s}`")))
}

fn split<T: std::str::FromStr>(
    s: &str,
    sep: char,
    err: &impl Fn(String) -> ReportError,
) -> Result<Vec<T>, ReportError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(sep).map(|x| num(x, err)).collect()
}
