//! "Nice" tick and bin arithmetic.
//!
//! The numeric routines follow the step selection used by d3-array's
//! `ticks`/`tickIncrement` and d3-scale's linear `nice`, which is what
//! Vega-Lite renderers use for axes: a step of 1, 2, or 5 times a power of
//! ten, with promotion thresholds at sqrt(50), sqrt(10), and sqrt(2). The
//! temporal routines follow d3-scale's time ticks: a fixed ladder of
//! calendar intervals, with multi-year steps chosen by the numeric rule.
//! Visual axis ticks are recomputed here rather than read back from a
//! renderer, so the audio module can announce the same values.

use chrono::{Datelike, NaiveDate, NaiveDateTime};

use crate::value::instant_from_millis;

const E10: f64 = 7.0710678118654755; // sqrt(50)
const E5: f64 = 3.1622776601683795; // sqrt(10)
const E2: f64 = std::f64::consts::SQRT_2;

/// A nice step, kept as an integer ratio so multiples stay exact:
/// the step is `num / den`, with one of the two equal to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    num: f64,
    den: f64,
}

impl Step {
    pub fn size(self) -> f64 {
        self.num / self.den
    }

    fn multiple(self, i: f64) -> f64 {
        if self.den == 1.0 {
            i * self.num
        } else {
            i / self.den
        }
    }

    fn index_floor(self, x: f64) -> f64 {
        if self.den == 1.0 {
            (x / self.num).floor()
        } else {
            (x * self.den).floor()
        }
    }

    fn index_ceil(self, x: f64) -> f64 {
        if self.den == 1.0 {
            (x / self.num).ceil()
        } else {
            (x * self.den).ceil()
        }
    }

    fn from_power(factor: f64, power: i32) -> Step {
        if power >= 0 {
            Step {
                num: factor * 10f64.powi(power),
                den: 1.0,
            }
        } else {
            Step {
                num: 1.0,
                den: 10f64.powi(-power) / factor,
            }
        }
    }
}

/// The step d3 would choose for about `count` ticks over `[start, stop]`.
pub fn tick_step(start: f64, stop: f64, count: usize) -> Option<Step> {
    let span = stop - start;
    if !(span > 0.0) || count == 0 || !span.is_finite() {
        return None;
    }
    let step = span / count as f64;
    let power = step.log10().floor() as i32;
    let error = step / 10f64.powi(power);
    let factor = if error >= E10 {
        10.0
    } else if error >= E5 {
        5.0
    } else if error >= E2 {
        2.0
    } else {
        1.0
    };
    Some(Step::from_power(factor, power))
}

/// Roughly `count` nice values covering `[start, stop]`.
pub fn ticks(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if start == stop {
        return vec![start];
    }
    let (lo, hi) = if start < stop { (start, stop) } else { (stop, start) };
    let Some(step) = tick_step(lo, hi, count) else {
        return Vec::new();
    };
    let i0 = step.index_ceil(lo);
    let i1 = step.index_floor(hi);
    let mut out = Vec::new();
    let mut i = i0;
    while i <= i1 {
        out.push(step.multiple(i));
        i += 1.0;
    }
    out
}

/// Extends `[start, stop]` outward to nice boundaries (d3 linear `nice`).
pub fn nice(start: f64, stop: f64, count: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (start, stop);
    let mut previous: Option<Step> = None;
    for _ in 0..10 {
        let Some(step) = tick_step(lo, hi, count) else {
            break;
        };
        if previous == Some(step) {
            break;
        }
        lo = step.multiple(step.index_floor(lo));
        hi = step.multiple(step.index_ceil(hi));
        previous = Some(step);
    }
    (lo, hi)
}

/// Contiguous intervals. Each is half-open except the last, which is closed
/// when `closed_top` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct Bins {
    pub edges: Vec<f64>,
    pub closed_top: bool,
}

impl Bins {
    pub fn len(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        let n = self.len();
        self.edges
            .windows(2)
            .enumerate()
            .map(move |(i, w)| (w[0], w[1], self.closed_top && i + 1 == n))
    }

    /// Index of the bin containing `x`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let n = self.len();
        for (i, (lo, hi, closed)) in self.intervals().enumerate() {
            if x >= lo && (x < hi || (closed && x == hi)) {
                return Some(i);
            }
            if i + 1 == n {
                break;
            }
        }
        None
    }

    fn from_step(lo: f64, hi: f64, step: Step, domain_closed: bool) -> Bins {
        let first = step.index_floor(lo);
        let mut last = step.index_ceil(hi);
        if last <= first {
            last = first + 1.0;
        }
        // A closed domain whose max sits exactly on an edge gets a closed top bin.
        let closed_top = domain_closed && step.multiple(last) == hi && hi > lo;
        let mut edges = Vec::new();
        let mut i = first;
        while i <= last {
            edges.push(step.multiple(i));
            i += 1.0;
        }
        Bins { edges, closed_top }
    }
}

/// About `count` nice, equal-width bins covering the closed domain `[lo, hi]`.
pub fn nice_bins(lo: f64, hi: f64, count: usize) -> Bins {
    match tick_step(lo, hi, count) {
        Some(step) => Bins::from_step(lo, hi, step, true),
        None => unit_bin(lo),
    }
}

/// The widest nice bins that still split the domain into at least
/// `min_count` intervals. `domain_closed` says whether `hi` itself is in
/// the domain.
pub fn nice_bins_at_least(lo: f64, hi: f64, min_count: usize, domain_closed: bool) -> Bins {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return unit_bin(lo);
    }
    let mut power = span.log10().ceil() as i32;
    loop {
        for factor in [5.0, 2.0, 1.0] {
            let step = Step::from_power(factor, power);
            if step.size() > span {
                continue;
            }
            let bins = Bins::from_step(lo, hi, step, domain_closed);
            if bins.len() >= min_count {
                return bins;
            }
        }
        power -= 1;
        if power < -300 {
            return unit_bin(lo);
        }
    }
}

/// `count` equal-width bins over `[lo, hi]`, top bin closed.
pub fn equal_width_bins(lo: f64, hi: f64, count: u32) -> Bins {
    if !(hi > lo) {
        return Bins {
            edges: vec![lo, lo],
            closed_top: true,
        };
    }
    let n = count.max(1);
    let width = (hi - lo) / n as f64;
    let mut edges: Vec<f64> = (0..n).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    Bins { edges, closed_top: true }
}

fn unit_bin(lo: f64) -> Bins {
    let base = lo.floor();
    Bins {
        edges: vec![base, base + 1.0],
        closed_top: false,
    }
}

// ---------------------------------------------------------------------------
// Time

const SECOND: f64 = 1000.0;
const MINUTE: f64 = 60.0 * SECOND;
const HOUR: f64 = 60.0 * MINUTE;
const DAY: f64 = 24.0 * HOUR;
const WEEK: f64 = 7.0 * DAY;
const MONTH: f64 = 30.0 * DAY;
const YEAR: f64 = 365.0 * DAY;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeInterval {
    /// Fixed-length steps in milliseconds, aligned to the epoch.
    Fixed(f64),
    Day(u32),
    Week,
    Month(u32),
    Year(u32),
}

impl TimeInterval {
    fn approx_ms(self) -> f64 {
        match self {
            TimeInterval::Fixed(ms) => ms,
            TimeInterval::Day(n) => DAY * n as f64,
            TimeInterval::Week => WEEK,
            TimeInterval::Month(n) => MONTH * n as f64,
            TimeInterval::Year(n) => YEAR * n as f64,
        }
    }

    /// Largest boundary at or before `ms`.
    fn floor(self, ms: f64) -> f64 {
        let Some(dt) = instant_from_millis(ms) else {
            return ms;
        };
        let date = dt.date();
        let boundary = match self {
            TimeInterval::Fixed(step) => return (ms / step).floor() * step,
            TimeInterval::Day(n) => {
                let days = (ms / DAY).floor();
                return (days / n as f64).floor() * n as f64 * DAY;
            }
            TimeInterval::Week => {
                let back = date.weekday().num_days_from_sunday() as i64;
                date - chrono::Duration::days(back)
            }
            TimeInterval::Month(n) => {
                let m0 = date.month0() / n * n;
                NaiveDate::from_ymd_opt(date.year(), m0 + 1, 1).expect("valid month")
            }
            TimeInterval::Year(n) => {
                let y = date.year().div_euclid(n as i32) * n as i32;
                NaiveDate::from_ymd_opt(y, 1, 1).expect("valid year")
            }
        };
        to_ms(boundary.and_hms_opt(0, 0, 0).expect("midnight"))
    }

    fn next(self, boundary_ms: f64) -> f64 {
        let Some(dt) = instant_from_millis(boundary_ms) else {
            return boundary_ms + self.approx_ms();
        };
        let date = dt.date();
        let next = match self {
            TimeInterval::Fixed(step) => return boundary_ms + step,
            TimeInterval::Day(n) => return boundary_ms + DAY * n as f64,
            TimeInterval::Week => return boundary_ms + WEEK,
            TimeInterval::Month(n) => {
                let total = date.year() * 12 + date.month0() as i32 + n as i32;
                NaiveDate::from_ymd_opt(total.div_euclid(12), total.rem_euclid(12) as u32 + 1, 1)
            }
            TimeInterval::Year(n) => NaiveDate::from_ymd_opt(date.year() + n as i32, 1, 1),
        };
        match next {
            Some(d) => to_ms(d.and_hms_opt(0, 0, 0).expect("midnight")),
            None => boundary_ms + self.approx_ms(),
        }
    }

    /// Label precision suited to the interval.
    pub fn label(self, dt: NaiveDateTime) -> String {
        match self {
            TimeInterval::Year(_) => dt.format("%Y").to_string(),
            TimeInterval::Month(_) => dt.format("%b %Y").to_string(),
            TimeInterval::Day(_) | TimeInterval::Week => dt.format("%Y-%m-%d").to_string(),
            TimeInterval::Fixed(ms) if ms >= HOUR => dt.format("%Y-%m-%d %H:%M").to_string(),
            TimeInterval::Fixed(_) => dt.format("%Y-%m-%d %H:%M:%S").to_string(),
        }
    }
}

fn to_ms(dt: NaiveDateTime) -> f64 {
    dt.and_utc().timestamp_millis() as f64
}

const LADDER: [TimeInterval; 17] = [
    TimeInterval::Fixed(SECOND),
    TimeInterval::Fixed(5.0 * SECOND),
    TimeInterval::Fixed(15.0 * SECOND),
    TimeInterval::Fixed(30.0 * SECOND),
    TimeInterval::Fixed(MINUTE),
    TimeInterval::Fixed(5.0 * MINUTE),
    TimeInterval::Fixed(15.0 * MINUTE),
    TimeInterval::Fixed(30.0 * MINUTE),
    TimeInterval::Fixed(HOUR),
    TimeInterval::Fixed(3.0 * HOUR),
    TimeInterval::Fixed(6.0 * HOUR),
    TimeInterval::Fixed(12.0 * HOUR),
    TimeInterval::Day(1),
    TimeInterval::Day(2),
    TimeInterval::Week,
    TimeInterval::Month(1),
    TimeInterval::Month(3),
];

/// The calendar interval d3 would tick at for about `count` ticks.
pub fn time_interval(lo_ms: f64, hi_ms: f64, count: usize) -> TimeInterval {
    let target = (hi_ms - lo_ms).abs() / count.max(1) as f64;
    if target >= YEAR {
        let step = tick_step(lo_ms / YEAR, hi_ms / YEAR, count)
            .map(|s| s.size().round().max(1.0) as u32)
            .unwrap_or(1);
        return TimeInterval::Year(step);
    }
    // Past the ladder's end but under a year: single years.
    let i = LADDER.iter().position(|iv| iv.approx_ms() > target).unwrap_or(LADDER.len());
    if i == LADDER.len() {
        return if target / LADDER[i - 1].approx_ms() < YEAR / target {
            LADDER[i - 1]
        } else {
            TimeInterval::Year(1)
        };
    }
    if i == 0 {
        return LADDER[0];
    }
    let (below, above) = (LADDER[i - 1], LADDER[i]);
    if target / below.approx_ms() < above.approx_ms() / target {
        below
    } else {
        above
    }
}

/// Calendar-aligned ticks within `[lo_ms, hi_ms]`.
pub fn time_ticks(lo_ms: f64, hi_ms: f64, count: usize) -> (TimeInterval, Vec<f64>) {
    let interval = time_interval(lo_ms, hi_ms, count);
    let mut out = Vec::new();
    let mut t = interval.floor(lo_ms);
    while t <= hi_ms {
        if t >= lo_ms {
            out.push(t);
        }
        t = interval.next(t);
    }
    (interval, out)
}

fn time_bins_with(lo_ms: f64, hi_ms: f64, interval: TimeInterval, domain_closed: bool) -> Bins {
    let mut edges = vec![interval.floor(lo_ms)];
    while *edges.last().expect("nonempty") < hi_ms {
        let next = interval.next(*edges.last().expect("nonempty"));
        edges.push(next);
    }
    if edges.len() == 1 {
        edges.push(interval.next(edges[0]));
    }
    let closed_top = domain_closed && *edges.last().expect("nonempty") == hi_ms;
    Bins { edges, closed_top }
}

/// Extends `[lo_ms, hi_ms]` outward to boundaries of the interval d3 would
/// pick for about `count` ticks.
pub fn time_nice(lo_ms: f64, hi_ms: f64, count: usize) -> (f64, f64) {
    let interval = time_interval(lo_ms, hi_ms, count);
    let lo = interval.floor(lo_ms);
    let mut hi = interval.floor(hi_ms);
    if hi < hi_ms {
        hi = interval.next(hi);
    }
    (lo, hi)
}

/// Calendar-aligned bins covering the closed domain `[lo_ms, hi_ms]`.
pub fn time_bins(lo_ms: f64, hi_ms: f64, count: usize) -> (TimeInterval, Bins) {
    let interval = time_interval(lo_ms, hi_ms, count);
    (interval, time_bins_with(lo_ms, hi_ms, interval, true))
}

/// The coarsest calendar bins giving at least `min_count` intervals.
pub fn time_bins_at_least(lo_ms: f64, hi_ms: f64, min_count: usize, domain_closed: bool) -> (TimeInterval, Bins) {
    let mut candidates: Vec<TimeInterval> = Vec::new();
    let span_years = ((hi_ms - lo_ms) / YEAR).ceil().max(1.0);
    let mut power = span_years.log10().ceil() as i32;
    while power >= 0 {
        for f in [5u32, 2, 1] {
            let years = f * 10u32.pow(power as u32);
            if years as f64 <= span_years * 2.0 {
                candidates.push(TimeInterval::Year(years));
            }
        }
        power -= 1;
    }
    candidates.extend(LADDER.iter().rev().copied());
    for interval in candidates {
        let bins = time_bins_with(lo_ms, hi_ms, interval, domain_closed);
        if bins.len() >= min_count {
            return (interval, bins);
        }
    }
    let interval = LADDER[0];
    (interval, time_bins_with(lo_ms, hi_ms, interval, domain_closed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{parse_instant, Value};

    #[test]
    fn d3_tick_steps() {
        assert_eq!(ticks(0.0, 100.0, 5), vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        assert_eq!(ticks(0.0, 1.0, 10).len(), 11);
        assert_eq!(ticks(0.0, 1.0, 10)[3], 0.3);
        assert_eq!(ticks(1955.0, 2005.0, 10), (0..11).map(|i| 1955.0 + 5.0 * i as f64).collect::<Vec<_>>());
        assert_eq!(ticks(-10.0, 10.0, 5), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn nice_domain() {
        assert_eq!(nice(0.0, 96.0, 5), (0.0, 100.0));
        assert_eq!(nice(1.3, 8.7, 10), (1.0, 9.0));
    }

    #[test]
    fn five_bins_over_zero_to_hundred() {
        let b = nice_bins(0.0, 100.0, 5);
        assert_eq!(b.edges, vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        assert!(b.closed_top);
        assert_eq!(b.index_of(100.0), Some(4));
        assert_eq!(b.index_of(20.0), Some(1));
    }

    #[test]
    fn rebin_fifty_to_seventy_into_fives() {
        let b = nice_bins_at_least(50.0, 70.0, 4, false);
        assert_eq!(b.edges, vec![50.0, 55.0, 60.0, 65.0, 70.0]);
        assert!(!b.closed_top);
        let b = nice_bins_at_least(0.0, 100.0, 4, true);
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn equal_width() {
        let b = equal_width_bins(0.0, 10.0, 4);
        assert_eq!(b.edges, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(b.index_of(10.0), Some(3));
    }

    #[test]
    fn year_ticks() {
        let lo = parse_instant(&Value::Number(1955.0)).unwrap().and_utc().timestamp_millis() as f64;
        let hi = parse_instant(&Value::Number(2005.0)).unwrap().and_utc().timestamp_millis() as f64;
        let (iv, t) = time_ticks(lo, hi, 10);
        assert_eq!(iv, TimeInterval::Year(5));
        assert_eq!(t.len(), 11);
        let (_, bins) = time_bins(lo, hi, 5);
        assert_eq!(bins.len(), 6);
    }

    #[test]
    fn month_ticks_for_a_year() {
        let lo = parse_instant(&Value::from("2012-01-01")).unwrap().and_utc().timestamp_millis() as f64;
        let hi = parse_instant(&Value::from("2012-12-31")).unwrap().and_utc().timestamp_millis() as f64;
        let (iv, t) = time_ticks(lo, hi, 5);
        assert_eq!(iv, TimeInterval::Month(3));
        assert_eq!(t.len(), 4);
    }
}
