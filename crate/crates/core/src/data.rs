//! CSV ingestion and alignment of prices and LLM-derived signal scores.
//!
//! Two input files are supported:
//!
//! - `prices.csv` with header `date,ticker,close[,<indicator>...]`
//! - `signals.csv` with header `date,ticker,sentiment,risk`
//!
//! [`align`] turns the parsed records into a dense [`MarketFrame`] and a
//! [`SignalFrame`] sharing the same date and ticker axes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Score assigned to a ticker-day with no signal row.
pub const NEUTRAL_SCORE: u8 = 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required column `{0}` in header")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("non-positive close price at line {line}")]
    NonPositivePrice { line: u64 },
    #[error("duplicate row for ({date}, {ticker})")]
    DuplicateKey { date: NaiveDate, ticker: String },
    #[error("score out of range 1..5 at line {line}")]
    ScoreOutOfRange { line: u64 },
    #[error("no common dates and tickers between prices and signals")]
    EmptyIntersection,
    #[error("benchmark file must contain exactly one ticker, found {0}")]
    BenchmarkTickers(usize),
    #[error("benchmark has no price on or before {0}")]
    BenchmarkGap(NaiveDate),
    #[error("frame shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub ticker: String,
    pub close: f64,
    /// Values in the order of [`Prices::indicator_names`].
    pub indicators: Vec<f64>,
}

/// Parsed content of a prices file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Prices {
    pub indicator_names: Vec<String>,
    pub records: Vec<PriceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalRecord {
    pub date: NaiveDate,
    pub sentiment: u8,
    pub risk: u8,
    ticker_id: u32,
}

/// Signal rows keep their ticker in a side table so records stay `Copy`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signals {
    tickers: Vec<String>,
    pub records: Vec<SignalRecord>,
}

impl Signals {
    pub fn push(&mut self, date: NaiveDate, ticker: &str, sentiment: u8, risk: u8) {
        let ticker_id = match self.tickers.iter().position(|t| t == ticker) {
            Some(i) => i,
            None => {
                self.tickers.push(ticker.to_string());
                self.tickers.len() - 1
            }
        } as u32;
        self.records.push(SignalRecord {
            date,
            sentiment,
            risk,
            ticker_id,
        });
    }

    pub fn ticker(&self, record: &SignalRecord) -> &str {
        &self.tickers[record.ticker_id as usize]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// What to do with price gaps after the first aligned date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Carry the last observed close (and indicators) forward.
    #[default]
    ForwardFill,
    /// Drop any ticker with a gap anywhere in the aligned range.
    DropIncomplete,
}

/// Dense date × ticker prices and indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketFrame {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    indicator_names: Vec<String>,
    // row-major [date][ticker]
    close: Vec<f64>,
    // row-major [date][ticker][indicator]
    indicators: Vec<f64>,
}

impl MarketFrame {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        indicator_names: Vec<String>,
        close: Vec<f64>,
        indicators: Vec<f64>,
    ) -> Result<Self> {
        let (d, m, k) = (dates.len(), tickers.len(), indicator_names.len());
        if close.len() != d * m || indicators.len() != d * m * k {
            return Err(DataError::Shape(format!(
                "expected {d}x{m} closes and {d}x{m}x{k} indicators"
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DataError::Shape("dates must be strictly increasing".into()));
        }
        if let Some(c) = close.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(DataError::Shape(format!("close {c} is not positive")));
        }
        Ok(Self {
            dates,
            tickers,
            indicator_names,
            close,
            indicators,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn indicator_names(&self) -> &[String] {
        &self.indicator_names
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.indicator_names.len()
    }

    pub fn close(&self, day: usize, ticker: usize) -> f64 {
        self.close[day * self.tickers.len() + ticker]
    }

    pub fn close_row(&self, day: usize) -> &[f64] {
        let m = self.tickers.len();
        &self.close[day * m..(day + 1) * m]
    }

    /// All indicators of one day, `[ticker][indicator]` flattened.
    pub fn indicator_row(&self, day: usize) -> &[f64] {
        let w = self.tickers.len() * self.indicator_names.len();
        &self.indicators[day * w..(day + 1) * w]
    }

    /// Inclusive date-range restriction.
    pub fn restrict(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Self> {
        let (lo, hi) = date_window(&self.dates, start, end)?;
        let m = self.tickers.len();
        let w = m * self.indicator_names.len();
        Self::new(
            self.dates[lo..hi].to_vec(),
            self.tickers.clone(),
            self.indicator_names.clone(),
            self.close[lo * m..hi * m].to_vec(),
            self.indicators[lo * w..hi * w].to_vec(),
        )
    }

    /// Flatten back into records, one per date × ticker.
    pub fn to_prices(&self) -> Prices {
        let k = self.indicator_names.len();
        let mut records = Vec::with_capacity(self.close.len());
        for (d, date) in self.dates.iter().enumerate() {
            let ind = self.indicator_row(d);
            for (j, ticker) in self.tickers.iter().enumerate() {
                records.push(PriceRecord {
                    date: *date,
                    ticker: ticker.clone(),
                    close: self.close(d, j),
                    indicators: ind[j * k..(j + 1) * k].to_vec(),
                });
            }
        }
        Prices {
            indicator_names: self.indicator_names.clone(),
            records,
        }
    }
}

/// Dense date × ticker sentiment and risk scores mirroring a [`MarketFrame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalFrame {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    sentiment: Vec<u8>,
    risk: Vec<u8>,
}

impl SignalFrame {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        sentiment: Vec<u8>,
        risk: Vec<u8>,
    ) -> Result<Self> {
        let n = dates.len() * tickers.len();
        if sentiment.len() != n || risk.len() != n {
            return Err(DataError::Shape(format!("expected {n} scores per matrix")));
        }
        if sentiment.iter().chain(&risk).any(|s| !(1..=5).contains(s)) {
            return Err(DataError::Shape("scores must lie in 1..5".into()));
        }
        Ok(Self {
            dates,
            tickers,
            sentiment,
            risk,
        })
    }

    /// All-neutral scores over the axes of `market`.
    pub fn neutral(market: &MarketFrame) -> Self {
        let n = market.n_dates() * market.n_tickers();
        Self {
            dates: market.dates.clone(),
            tickers: market.tickers.clone(),
            sentiment: vec![NEUTRAL_SCORE; n],
            risk: vec![NEUTRAL_SCORE; n],
        }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn sentiment_row(&self, day: usize) -> &[u8] {
        let m = self.tickers.len();
        &self.sentiment[day * m..(day + 1) * m]
    }

    pub fn risk_row(&self, day: usize) -> &[u8] {
        let m = self.tickers.len();
        &self.risk[day * m..(day + 1) * m]
    }

    pub fn restrict(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Self> {
        let (lo, hi) = date_window(&self.dates, start, end)?;
        let m = self.tickers.len();
        Self::new(
            self.dates[lo..hi].to_vec(),
            self.tickers.clone(),
            self.sentiment[lo * m..hi * m].to_vec(),
            self.risk[lo * m..hi * m].to_vec(),
        )
    }

    pub fn to_signals(&self) -> Signals {
        let mut out = Signals::default();
        for (d, date) in self.dates.iter().enumerate() {
            for (j, ticker) in self.tickers.iter().enumerate() {
                out.push(*date, ticker, self.sentiment_row(d)[j], self.risk_row(d)[j]);
            }
        }
        out
    }

    pub fn matches(&self, market: &MarketFrame) -> bool {
        self.dates == market.dates && self.tickers == market.tickers
    }
}

fn date_window(
    dates: &[NaiveDate],
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<(usize, usize)> {
    let lo = start.map_or(0, |s| dates.partition_point(|d| *d < s));
    let hi = end.map_or(dates.len(), |e| dates.partition_point(|d| *d <= e));
    if lo >= hi {
        return Err(DataError::EmptyIntersection);
    }
    Ok((lo, hi))
}

/// Non-fatal findings from [`align`]; the CLI prints each as a `WARN:` line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignReport {
    pub dropped_tickers: Vec<String>,
    pub neutral_filled: usize,
    pub forward_filled: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Aligned {
    pub market: MarketFrame,
    pub signals: SignalFrame,
    pub report: AlignReport,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_prices(path: impl AsRef<Path>) -> Result<Prices> {
    parse_prices_from(open(path.as_ref())?)
}

pub fn parse_signals(path: impl AsRef<Path>) -> Result<Signals> {
    parse_signals_from(open(path.as_ref())?)
}

fn reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io {
            path: PathBuf::new(),
            source,
        },
        other => DataError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| DataError::MalformedRow {
        line,
        reason: format!("date `{s}`: {e}"),
    })
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64> {
    s.parse::<f64>().map_err(|_| DataError::MalformedRow {
        line,
        reason: format!("{what} `{s}` is not a number"),
    })
}

pub fn parse_prices_from<R: Read>(rdr: R) -> Result<Prices> {
    let mut rdr = reader(rdr);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let (di, ti, ci) = (
        column(&headers, "date")?,
        column(&headers, "ticker")?,
        column(&headers, "close")?,
    );
    let ind_cols: Vec<usize> = (0..headers.len())
        .filter(|i| ![di, ti, ci].contains(i))
        .collect();
    let indicator_names = ind_cols.iter().map(|&i| headers[i].to_string()).collect();

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let date = parse_date(&row[di], line)?;
        let ticker = row[ti].to_string();
        if ticker.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty ticker".into(),
            });
        }
        let close = parse_f64(&row[ci], "close", line)?;
        if !close.is_finite() || close <= 0.0 {
            return Err(DataError::NonPositivePrice { line });
        }
        let indicators = ind_cols
            .iter()
            .map(|&i| parse_f64(&row[i], &headers[i], line))
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert((date, ticker.clone())) {
            return Err(DataError::DuplicateKey { date, ticker });
        }
        records.push(PriceRecord {
            date,
            ticker,
            close,
            indicators,
        });
    }
    Ok(Prices {
        indicator_names,
        records,
    })
}

fn parse_score(s: &str, line: u64) -> Result<u8> {
    let v: i64 = s.parse().map_err(|_| DataError::MalformedRow {
        line,
        reason: format!("score `{s}` is not an integer"),
    })?;
    if !(1..=5).contains(&v) {
        return Err(DataError::ScoreOutOfRange { line });
    }
    Ok(v as u8)
}

pub fn parse_signals_from<R: Read>(rdr: R) -> Result<Signals> {
    let mut rdr = reader(rdr);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols = ["date", "ticker", "sentiment", "risk"]
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Signals::default();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let date = parse_date(&row[cols[0]], line)?;
        let sentiment = parse_score(&row[cols[2]], line)?;
        let risk = parse_score(&row[cols[3]], line)?;
        out.push(date, &row[cols[1]], sentiment, risk);
    }
    Ok(out)
}

/// Align prices and signals onto shared date and ticker axes.
///
/// Tickers are the (sorted) intersection of both files. Dates are the union
/// of price dates for those tickers, restricted to the span covered by both
/// files. Price gaps follow `policy`; a ticker without a price on the first
/// aligned date is dropped. Signal gaps become [`NEUTRAL_SCORE`], and
/// duplicate signal rows resolve to the last one.
pub fn align(prices: &Prices, signals: &Signals, policy: FillPolicy) -> Result<Aligned> {
    let price_tickers: BTreeSet<&str> = prices.records.iter().map(|r| r.ticker.as_str()).collect();
    let signal_tickers: BTreeSet<&str> = signals.tickers.iter().map(String::as_str).collect();
    let common: Vec<&str> = price_tickers
        .intersection(&signal_tickers)
        .copied()
        .collect();
    if common.is_empty() || signals.is_empty() {
        return Err(DataError::EmptyIntersection);
    }
    let common_set: HashSet<&str> = common.iter().copied().collect();

    let mut by_ticker: HashMap<&str, BTreeMap<NaiveDate, &PriceRecord>> = HashMap::new();
    for r in prices
        .records
        .iter()
        .filter(|r| common_set.contains(r.ticker.as_str()))
    {
        by_ticker
            .entry(r.ticker.as_str())
            .or_default()
            .insert(r.date, r);
    }
    let price_dates: BTreeSet<NaiveDate> =
        by_ticker.values().flat_map(|m| m.keys().copied()).collect();
    let (smin, smax) = signals
        .records
        .iter()
        .filter(|r| common_set.contains(signals.ticker(r)))
        .fold((NaiveDate::MAX, NaiveDate::MIN), |(lo, hi), r| {
            (lo.min(r.date), hi.max(r.date))
        });
    let dates: Vec<NaiveDate> = price_dates.range(smin..=smax).copied().collect();
    if dates.is_empty() {
        return Err(DataError::EmptyIntersection);
    }

    let mut report = AlignReport::default();
    let k = prices.indicator_names.len();
    let mut kept: Vec<(&str, Vec<&PriceRecord>)> = Vec::new();
    for ticker in &common {
        let series = &by_ticker[ticker];
        let Some(mut last) = series.range(..=dates[0]).next_back().map(|(_, r)| *r) else {
            report.dropped_tickers.push(ticker.to_string());
            report.warnings.push(format!(
                "ticker {ticker} has no price on {}; dropped",
                dates[0]
            ));
            continue;
        };
        let mut filled = 0;
        let mut column = Vec::with_capacity(dates.len());
        for d in &dates {
            match series.get(d) {
                Some(r) => last = r,
                None => filled += 1,
            }
            column.push(last);
        }
        if filled > 0 {
            if policy == FillPolicy::DropIncomplete {
                report.dropped_tickers.push(ticker.to_string());
                report.warnings.push(format!(
                    "ticker {ticker} has {filled} missing prices; dropped"
                ));
                continue;
            }
            report.forward_filled += filled;
            report.warnings.push(format!(
                "ticker {ticker}: forward-filled {filled} missing prices"
            ));
        }
        kept.push((ticker, column));
    }
    if kept.is_empty() {
        return Err(DataError::EmptyIntersection);
    }

    let (n, m) = (dates.len(), kept.len());
    let mut close = vec![0.0; n * m];
    let mut indicators = vec![0.0; n * m * k];
    for (j, (_, column)) in kept.iter().enumerate() {
        for (d, r) in column.iter().enumerate() {
            close[d * m + j] = r.close;
            indicators[(d * m + j) * k..(d * m + j + 1) * k].copy_from_slice(&r.indicators);
        }
    }
    let tickers: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();

    let day_of: HashMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let col_of: HashMap<&str, usize> = tickers
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut sentiment = vec![0u8; n * m];
    let mut risk = vec![0u8; n * m];
    let mut duplicates = BTreeSet::new();
    for r in &signals.records {
        let (Some(&d), Some(&j)) = (day_of.get(&r.date), col_of.get(signals.ticker(r))) else {
            continue;
        };
        if sentiment[d * m + j] != 0 {
            duplicates.insert((r.date, j));
        }
        sentiment[d * m + j] = r.sentiment;
        risk[d * m + j] = r.risk;
    }
    for (date, j) in duplicates {
        report.warnings.push(format!(
            "duplicate signal rows for ({date}, {}); last row wins",
            tickers[j]
        ));
    }
    for (s, r) in sentiment.iter_mut().zip(risk.iter_mut()) {
        if *s == 0 {
            *s = NEUTRAL_SCORE;
            *r = NEUTRAL_SCORE;
            report.neutral_filled += 1;
        }
    }

    let market = MarketFrame::new(
        dates.clone(),
        tickers.clone(),
        prices.indicator_names.clone(),
        close,
        indicators,
    )?;
    let signals = SignalFrame::new(dates, tickers, sentiment, risk)?;
    Ok(Aligned {
        market,
        signals,
        report,
    })
}

/// Closes of a single-ticker benchmark file on `dates`, forward-filled.
pub fn benchmark_closes(prices: &Prices, dates: &[NaiveDate]) -> Result<Vec<f64>> {
    let tickers: BTreeSet<&str> = prices.records.iter().map(|r| r.ticker.as_str()).collect();
    if tickers.len() != 1 {
        return Err(DataError::BenchmarkTickers(tickers.len()));
    }
    let series: BTreeMap<NaiveDate, f64> =
        prices.records.iter().map(|r| (r.date, r.close)).collect();
    dates
        .iter()
        .map(|d| {
            series
                .range(..=*d)
                .next_back()
                .map(|(_, c)| *c)
                .ok_or(DataError::BenchmarkGap(*d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn prices(csv: &str) -> Result<Prices> {
        parse_prices_from(csv.as_bytes())
    }

    fn signals(csv: &str) -> Result<Signals> {
        parse_signals_from(csv.as_bytes())
    }

    #[test]
    fn single_price_row() {
        let p = prices("date,ticker,close\n2020-01-02,AAPL,75.0\n").unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.records[0].close, 75.0);
        assert_eq!(p.records[0].ticker, "AAPL");
        assert!(p.indicator_names.is_empty());
    }

    #[test]
    fn indicators_are_kept_in_header_order() {
        let p = prices("date,ticker,macd,close,rsi\n2020-01-02,AAPL,0.5,75.0,61\n").unwrap();
        assert_eq!(p.indicator_names, ["macd", "rsi"]);
        assert_eq!(p.records[0].indicators, [0.5, 61.0]);
    }

    #[test]
    fn price_errors() {
        assert!(matches!(
            prices("date,ticker,close\n2020-01-02,AAPL,-1.0\n"),
            Err(DataError::NonPositivePrice { line: 2 })
        ));
        assert!(matches!(
            prices("date,ticker,close\n2020-01-02,AAPL,1\n2020-01-02,AAPL,2\n"),
            Err(DataError::DuplicateKey { .. })
        ));
        assert!(
            matches!(prices("date,ticker\n2020-01-02,AAPL\n"), Err(DataError::MissingColumn(c)) if c == "close")
        );
        assert!(matches!(
            prices("date,ticker,close\n2020-01-02,AAPL,1\n2020-13-02,AAPL,2\n"),
            Err(DataError::MalformedRow { line: 3, .. })
        ));
        assert!(matches!(
            prices("date,ticker,close\n2020-01-02,AAPL\n"),
            Err(DataError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn signal_rows() {
        let s = signals("date,ticker,sentiment,risk\n2020-01-02,AAPL,4,2\n").unwrap();
        assert_eq!(s.records[0].sentiment, 4);
        assert_eq!(s.records[0].risk, 2);
        assert_eq!(s.ticker(&s.records[0]), "AAPL");
        assert!(matches!(
            signals("date,ticker,sentiment,risk\n2020-01-02,AAPL,6,2\n"),
            Err(DataError::ScoreOutOfRange { line: 2 })
        ));
        assert!(matches!(
            signals("date,ticker,sentiment,risk\n2020-01-02,AAPL,x,2\n"),
            Err(DataError::MalformedRow { .. })
        ));
        assert!(signals("date,ticker,sentiment,risk\n").unwrap().is_empty());
    }

    #[test]
    fn missing_signal_is_neutral() {
        let p =
            prices("date,ticker,close\n2020-01-02,AAPL,1\n2020-01-03,AAPL,2\n2020-01-06,AAPL,3\n")
                .unwrap();
        let s = signals("date,ticker,sentiment,risk\n2020-01-02,AAPL,5,1\n2020-01-06,AAPL,4,2\n")
            .unwrap();
        let a = align(&p, &s, FillPolicy::ForwardFill).unwrap();
        assert_eq!(a.signals.sentiment_row(1), [3]);
        assert_eq!(a.signals.risk_row(1), [3]);
        assert_eq!(a.signals.sentiment_row(2), [4]);
        assert_eq!(a.report.neutral_filled, 1);
    }

    #[test]
    fn price_gap_is_forward_filled() {
        let p = prices(
            "date,ticker,close,rsi\n2020-01-02,A,10,1\n2020-01-03,A,11,2\n2020-01-02,B,5,3\n2020-01-03,B,6,4\n2020-01-06,B,7,5\n",
        )
        .unwrap();
        let s =
            signals("date,ticker,sentiment,risk\n2020-01-02,A,3,3\n2020-01-06,B,3,3\n").unwrap();
        let a = align(&p, &s, FillPolicy::ForwardFill).unwrap();
        assert_eq!(
            a.market.dates(),
            [d("2020-01-02"), d("2020-01-03"), d("2020-01-06")]
        );
        assert_eq!(a.market.close(2, 0), a.market.close(1, 0));
        assert_eq!(a.market.indicator_row(2), [2.0, 5.0]);
        assert_eq!(a.report.forward_filled, 1);

        let strict = align(&p, &s, FillPolicy::DropIncomplete).unwrap();
        assert_eq!(strict.market.tickers(), ["B"]);
    }

    #[test]
    fn leading_gap_drops_ticker() {
        let p = prices("date,ticker,close\n2020-01-02,A,10\n2020-01-03,A,11\n2020-01-03,B,6\n")
            .unwrap();
        let s =
            signals("date,ticker,sentiment,risk\n2020-01-02,A,3,3\n2020-01-03,B,3,3\n").unwrap();
        let a = align(&p, &s, FillPolicy::ForwardFill).unwrap();
        assert_eq!(a.market.tickers(), ["A"]);
        assert_eq!(a.report.dropped_tickers, ["B"]);
        assert_eq!(a.report.warnings.len(), 1);
    }

    #[test]
    fn disjoint_tickers_fail() {
        let p = prices("date,ticker,close\n2020-01-02,A,10\n").unwrap();
        let s = signals("date,ticker,sentiment,risk\n2020-01-02,B,3,3\n").unwrap();
        assert!(matches!(
            align(&p, &s, FillPolicy::ForwardFill),
            Err(DataError::EmptyIntersection)
        ));
    }

    #[test]
    fn duplicate_signals_last_wins() {
        let p = prices("date,ticker,close\n2020-01-02,A,10\n").unwrap();
        let s =
            signals("date,ticker,sentiment,risk\n2020-01-02,A,1,1\n2020-01-02,A,5,2\n").unwrap();
        let a = align(&p, &s, FillPolicy::ForwardFill).unwrap();
        assert_eq!(a.signals.sentiment_row(0), [5]);
        assert_eq!(a.signals.risk_row(0), [2]);
        assert!(a.report.warnings[0].contains("duplicate"));
    }

    #[test]
    fn dates_clip_to_signal_span() {
        let p = prices("date,ticker,close\n2020-01-01,A,9\n2020-01-02,A,10\n2020-01-03,A,11\n")
            .unwrap();
        let s = signals("date,ticker,sentiment,risk\n2020-01-02,A,4,4\n").unwrap();
        let a = align(&p, &s, FillPolicy::ForwardFill).unwrap();
        assert_eq!(a.market.dates(), [d("2020-01-02")]);
    }

    #[test]
    fn restrict_and_benchmark() {
        let p = prices("date,ticker,close\n2020-01-02,A,10\n2020-01-03,A,11\n2020-01-06,A,12\n")
            .unwrap();
        let s =
            signals("date,ticker,sentiment,risk\n2020-01-02,A,3,3\n2020-01-06,A,3,3\n").unwrap();
        let a = align(&p, &s, FillPolicy::ForwardFill).unwrap();
        let r = a.market.restrict(Some(d("2020-01-03")), None).unwrap();
        assert_eq!(r.close_row(0), [11.0]);
        assert!(a.market.restrict(Some(d("2021-01-01")), None).is_err());

        let b = prices("date,ticker,close\n2020-01-02,IDX,100\n2020-01-06,IDX,103\n").unwrap();
        assert_eq!(
            benchmark_closes(&b, a.market.dates()).unwrap(),
            [100.0, 100.0, 103.0]
        );
        assert!(matches!(
            benchmark_closes(&b, &[d("2019-01-01")]),
            Err(DataError::BenchmarkGap(_))
        ));
        assert!(matches!(benchmark_closes(&p.clone(), &[]), Ok(v) if v.is_empty()));
    }
}
