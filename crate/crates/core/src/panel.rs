//! Option panels: one row per quoted European call.
//!
//! Files are CSV with header `date,S,K,r,tau,mid` and an optional
//! `option_id` column. Quotes outside the maturity window or with
//! non-positive prices are dropped at ingestion and counted in an
//! [`IngestLog`]; malformed rows are errors.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use ndarray::Array2;

use crate::skr::{SkInputs, SkrError};

pub const MIN_TAU: f64 = 7.0 / 365.0;
pub const MAX_TAU: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum PanelError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing column {0:?}")]
    Header(String),
    #[error("panel is empty")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Skr(#[from] SkrError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub date: NaiveDate,
    pub s: f64,
    pub k: f64,
    pub r: f64,
    pub tau: f64,
    pub mid: f64,
    pub option_id: Option<String>,
}

impl OptionQuote {
    pub fn m(&self) -> f64 {
        self.k / self.s
    }

    /// Network target C/K.
    pub fn target(&self) -> f64 {
        self.mid / self.k
    }

    pub fn features(&self) -> [f64; 3] {
        [self.m(), self.tau, self.r]
    }

    pub fn inputs(&self) -> Result<SkInputs, SkrError> {
        SkInputs::new(self.s, self.k, self.r, self.tau)
    }

    /// Identity across days: the explicit id when present, otherwise strike
    /// and expiry date (quote date plus τ in calendar days).
    pub fn match_key(&self) -> String {
        match &self.option_id {
            Some(id) => id.clone(),
            None => {
                let days = (self.tau * 365.0).round() as i64;
                let expiry = self.date + chrono::Duration::days(days);
                format!("{}@{}", self.k, expiry)
            }
        }
    }
}

/// Rows seen and dropped (by reason) during ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestLog {
    pub rows: usize,
    pub kept: usize,
    pub dropped_maturity: usize,
    pub dropped_price: usize,
}

impl std::fmt::Display for IngestLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rows={} kept={} dropped_maturity={} dropped_price={}",
            self.rows, self.kept, self.dropped_maturity, self.dropped_price
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptionPanel {
    pub quotes: Vec<OptionQuote>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, PanelError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| PanelError::Header(name.into()))
}

impl OptionPanel {
    pub fn new(quotes: Vec<OptionQuote>) -> Self {
        OptionPanel { quotes }
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn read_csv<R: Read>(r: R) -> Result<(OptionPanel, IngestLog), PanelError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let cols: Vec<usize> = ["date", "S", "K", "r", "tau", "mid"]
            .iter()
            .map(|n| column(&headers, n))
            .collect::<Result<_, _>>()?;
        let id_col = column(&headers, "option_id").ok();
        let mut log = IngestLog::default();
        let mut quotes = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            log.rows += 1;
            let field = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
            let date = NaiveDate::parse_from_str(field(cols[0]), "%Y-%m-%d").map_err(|e| PanelError::Parse {
                line,
                msg: format!("date {:?}: {e}", field(cols[0])),
            })?;
            let mut v = [0.0f64; 5];
            for (slot, &c) in v.iter_mut().zip(&cols[1..]) {
                *slot = field(c).parse().map_err(|_| PanelError::Parse {
                    line,
                    msg: format!("{} {:?} is not a number", &headers[c], field(c)),
                })?;
            }
            let [s, k, r, tau, mid] = v;
            if !(s > 0.0 && k > 0.0 && r.is_finite()) {
                return Err(PanelError::Parse {
                    line,
                    msg: format!("invalid S={s} K={k} r={r}"),
                });
            }
            if !(MIN_TAU..=MAX_TAU).contains(&tau) {
                log.dropped_maturity += 1;
                continue;
            }
            if !(mid > 0.0 && mid.is_finite()) {
                log.dropped_price += 1;
                continue;
            }
            let option_id = id_col.map(|c| field(c).to_string()).filter(|s| !s.is_empty());
            quotes.push(OptionQuote {
                date,
                s,
                k,
                r,
                tau,
                mid,
                option_id,
            });
        }
        log.kept = quotes.len();
        Ok((OptionPanel { quotes }, log))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PanelError> {
        let with_id = self.quotes.iter().any(|q| q.option_id.is_some());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["date", "S", "K", "r", "tau", "mid"];
        if with_id {
            header.push("option_id");
        }
        out.write_record(&header)?;
        for q in &self.quotes {
            let mut rec = vec![
                q.date.to_string(),
                q.s.to_string(),
                q.k.to_string(),
                q.r.to_string(),
                q.tau.to_string(),
                q.mid.to_string(),
            ];
            if with_id {
                rec.push(q.option_id.clone().unwrap_or_default());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `n × 3` matrix of (m, τ, r).
    pub fn features(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), 3), |(i, j)| self.quotes[i].features()[j])
    }

    pub fn targets(&self) -> Vec<f64> {
        self.quotes.iter().map(OptionQuote::target).collect()
    }

    /// Distinct quote dates in ascending order.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut d: Vec<NaiveDate> = self.quotes.iter().map(|q| q.date).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Quotes with `from <= date < to`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> OptionPanel {
        OptionPanel {
            quotes: self.quotes.iter().filter(|q| q.date >= from && q.date < to).cloned().collect(),
        }
    }

    pub fn by_date(&self) -> BTreeMap<NaiveDate, Vec<&OptionQuote>> {
        let mut out: BTreeMap<NaiveDate, Vec<&OptionQuote>> = BTreeMap::new();
        for q in &self.quotes {
            out.entry(q.date).or_default().push(q);
        }
        out
    }

    pub fn median_r(&self) -> Result<f64, PanelError> {
        if self.is_empty() {
            return Err(PanelError::Empty);
        }
        let mut r: Vec<f64> = self.quotes.iter().map(|q| q.r).collect();
        r.sort_by(f64::total_cmp);
        let n = r.len();
        Ok(if n % 2 == 1 { r[n / 2] } else { 0.5 * (r[n / 2 - 1] + r[n / 2]) })
    }
}
