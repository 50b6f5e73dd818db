use chrono::{Datelike, Months, NaiveDate};

use super::EvalError;
use crate::panel::OptionPanel;

/// Half-open date window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Window {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d < self.end
    }

    pub fn select(&self, panel: &OptionPanel) -> OptionPanel {
        panel.between(self.start, self.end)
    }
}

/// Three training months followed by two one-month test windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollingPeriod {
    pub index: usize,
    pub train: Window,
    pub test1: Window,
    pub test2: Window,
}

fn month_start(d: NaiveDate) -> NaiveDate {
    d.with_day(1).expect("first of month exists")
}

fn add_months(d: NaiveDate, n: u32) -> NaiveDate {
    d.checked_add_months(Months::new(n)).expect("date in range")
}

/// Every period whose five months lie inside the span of `dates` and whose
/// three windows each hold at least one date. Train starts step by one
/// calendar month from the month of the first date.
pub fn build_schedule(dates: &[NaiveDate]) -> Result<Vec<RollingPeriod>, EvalError> {
    if dates.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::Unsorted);
    }
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Err(EvalError::ShortSpan { months: 0 });
    };
    let months = (last.year() - first.year()) * 12 + last.month() as i32 - first.month() as i32 + 1;
    if months < 5 {
        return Err(EvalError::ShortSpan { months });
    }
    let has_date = |w: &Window| {
        let i = dates.partition_point(|d| *d < w.start);
        i < dates.len() && dates[i] < w.end
    };
    let base = month_start(first);
    let mut out = Vec::new();
    for k in 0..=(months - 5) as u32 {
        let s = add_months(base, k);
        let train = Window {
            start: s,
            end: add_months(s, 3),
        };
        let test1 = Window {
            start: train.end,
            end: add_months(s, 4),
        };
        let test2 = Window {
            start: test1.end,
            end: add_months(s, 5),
        };
        if [train, test1, test2].iter().all(has_date) {
            out.push(RollingPeriod {
                index: out.len(),
                train,
                test1,
                test2,
            });
        }
    }
    Ok(out)
}
