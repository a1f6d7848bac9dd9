//! Relative-MSE tables with Diebold-Mariano stars.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dm::{dm_test, stars};
use super::poos::ForecastRecord;
use crate::date::YearMonth;
use crate::error::{Error, Result};

/// Origins `start..=end` (open-ended when `end` is `None`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub name: String,
    pub start: YearMonth,
    pub end: Option<YearMonth>,
}

impl Window {
    pub fn new(name: &str, start: (i32, u32), end: Option<(i32, u32)>) -> Self {
        let ym = |(y, m): (i32, u32)| YearMonth::new(y, m).expect("valid month");
        Window {
            name: name.to_string(),
            start: ym(start),
            end: end.map(ym),
        }
    }

    pub fn contains(&self, d: YearMonth) -> bool {
        d >= self.start && self.end.is_none_or(|e| d <= e)
    }
}

/// The five reporting windows.
pub fn standard_windows() -> Vec<Window> {
    vec![
        Window::new("All Sample (2008-2020)", (2008, 1), Some((2020, 12))),
        Window::new("Restricted Sample (2011-2020)", (2011, 1), Some((2020, 12))),
        Window::new("Covid Sample (from 2020m1)", (2020, 1), None),
        Window::new("Quiet(er) Period (2011-2019)", (2011, 1), Some((2019, 12))),
        Window::new("Pre-Covid (2008-2019)", (2008, 1), Some((2019, 12))),
    ]
}

/// The 2008-2010 origins, which together with the quiet and Covid windows
/// tile the full sample.
pub fn great_recession_window() -> Window {
    Window::new("Great Recession (2008-2010)", (2008, 1), Some((2010, 12)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub window: String,
    pub target: String,
    pub h: usize,
    pub model: String,
    /// Origins evaluated.
    pub n: usize,
    /// `None` when the model failed at some origin of the window or no
    /// origin is available.
    pub relative_mse: Option<f64>,
    pub dm_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
}

impl EvalCell {
    pub fn formatted(&self) -> String {
        match self.relative_mse {
            Some(r) => format!("{r:.2}{}", self.stars),
            None => "NA".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub benchmark: String,
    pub windows: Vec<Window>,
    pub targets: Vec<String>,
    pub horizons: Vec<usize>,
    pub models: Vec<String>,
    pub cells: Vec<EvalCell>,
}

/// `"1.30***"`: the ratio to two decimals followed by the significance stars.
pub fn format_cell(ratio: f64, p_value: Option<f64>) -> String {
    format!("{ratio:.2}{}", p_value.map_or("", stars))
}

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    it.filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

/// Relative MSE of every model against `benchmark` for each window, target
/// and horizon, with a DM test on the squared-error differential.
pub fn build_eval_table(records: &[ForecastRecord], windows: &[Window], benchmark: &str) -> Result<EvalTable> {
    let targets = first_seen(records.iter().map(|r| r.target.as_str()));
    let models = {
        let mut m = first_seen(records.iter().map(|r| r.model.as_str()));
        if let Some(i) = m.iter().position(|n| n == benchmark) {
            let b = m.remove(i);
            m.insert(0, b);
        }
        m
    };
    let mut horizons: Vec<usize> = records.iter().map(|r| r.h).collect::<BTreeSet<_>>().into_iter().collect();
    horizons.sort_unstable();

    let mut by_key: HashMap<(&str, usize, &str), Vec<&ForecastRecord>> = HashMap::new();
    for r in records.iter().filter(|r| r.realized.is_some()) {
        by_key.entry((r.target.as_str(), r.h, r.model.as_str())).or_default().push(r);
    }

    let mut cells = Vec::new();
    for w in windows {
        for target in &targets {
            for &h in &horizons {
                let has_any = models.iter().any(|m| by_key.contains_key(&(target.as_str(), h, m.as_str())));
                if !has_any {
                    continue;
                }
                let bench = by_key
                    .get(&(target.as_str(), h, benchmark))
                    .ok_or_else(|| Error::MissingBenchmark {
                        benchmark: benchmark.to_string(),
                        target: target.clone(),
                        h,
                    })?;
                let bench: HashMap<YearMonth, &ForecastRecord> =
                    bench.iter().filter(|r| w.contains(r.origin)).map(|r| (r.origin, *r)).collect();
                for model in &models {
                    let Some(recs) = by_key.get(&(target.as_str(), h, model.as_str())) else {
                        continue;
                    };
                    let mut recs: Vec<&ForecastRecord> = recs.iter().copied().filter(|r| w.contains(r.origin)).collect();
                    recs.sort_by_key(|r| r.origin);
                    cells.push(cell(w, target, h, model, model == benchmark, &recs, &bench)?);
                }
            }
        }
    }
    Ok(EvalTable {
        benchmark: benchmark.to_string(),
        windows: windows.to_vec(),
        targets,
        horizons,
        models,
        cells,
    })
}

fn cell(
    w: &Window,
    target: &str,
    h: usize,
    model: &str,
    is_benchmark: bool,
    recs: &[&ForecastRecord],
    bench: &HashMap<YearMonth, &ForecastRecord>,
) -> Result<EvalCell> {
    let mut out = EvalCell {
        window: w.name.clone(),
        target: target.to_string(),
        h,
        model: model.to_string(),
        n: 0,
        relative_mse: None,
        dm_stat: None,
        p_value: None,
        stars: String::new(),
    };
    let mut d = Vec::with_capacity(recs.len());
    let (mut sse_m, mut sse_b) = (0.0, 0.0);
    for r in recs {
        let b = bench.get(&r.origin);
        let (Some(f), Some(b)) = (r.forecast, b.and_then(|b| b.forecast)) else {
            return Ok(out);
        };
        let y = r.realized.expect("filtered on realized");
        let (em, eb) = ((y - f).powi(2), (y - b).powi(2));
        sse_m += em;
        sse_b += eb;
        d.push(em - eb);
    }
    out.n = d.len();
    if d.is_empty() {
        return Ok(out);
    }
    if is_benchmark {
        out.relative_mse = Some(1.0);
        out.dm_stat = Some(0.0);
        out.p_value = Some(1.0);
        return Ok(out);
    }
    if !(sse_b > 0.0) {
        return Ok(out);
    }
    out.relative_mse = Some(sse_m / sse_b);
    if let Ok(dm) = dm_test(&d, h) {
        out.dm_stat = Some(dm.statistic);
        out.p_value = Some(dm.p_value);
        out.stars = stars(dm.p_value).to_string();
    }
    Ok(out)
}

impl EvalTable {
    pub fn get(&self, window: &str, target: &str, h: usize, model: &str) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.window == window && c.target == target && c.h == h && c.model == model)
    }

    /// One block per window: models down, target x horizon across.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let cols: Vec<(&str, usize)> = self
            .targets
            .iter()
            .flat_map(|t| self.horizons.iter().map(move |&h| (t.as_str(), h)))
            .collect();
        let name_w = self.models.iter().map(|m| m.len()).max().unwrap_or(5).max(5);
        let col_w = cols.iter().map(|(t, _)| t.len()).max().unwrap_or(0).clamp(8, 14);
        for w in &self.windows {
            let _ = writeln!(s, "{}", w.name);
            let _ = writeln!(s, "Relative MSE vs {}; ***, **, * = DM test at 1%, 5%, 10%", self.benchmark);
            let _ = write!(s, "{:name_w$}", "");
            for (t, _) in &cols {
                let _ = write!(s, " {t:>col_w$}");
            }
            let _ = write!(s, "\n{:name_w$}", "");
            for (_, h) in &cols {
                let _ = write!(s, " {:>col_w$}", format!("h={h}"));
            }
            s.push('\n');
            for m in &self.models {
                let _ = write!(s, "{m:name_w$}");
                for (t, h) in &cols {
                    let v = self.get(&w.name, t, *h, m).map_or_else(|| "-".to_string(), EvalCell::formatted);
                    let _ = write!(s, " {v:>col_w$}");
                }
                s.push('\n');
            }
            s.push('\n');
        }
        s
    }

    /// Long format, one row per cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window", "target", "h", "model", "n", "relative_mse", "dm_stat", "p_value", "cell"])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"));
        for c in &self.cells {
            w.write_record([
                c.window.clone(),
                c.target.clone(),
                c.h.to_string(),
                c.model.clone(),
                c.n.to_string(),
                opt(c.relative_mse),
                opt(c.dm_stat),
                opt(c.p_value),
                c.formatted(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Plot-ready forecast and realized series for origins from `from` on:
/// `target,h,model,origin,target_date,forecast,realized`.
pub fn write_forecast_series<W: Write>(records: &[ForecastRecord], from: YearMonth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["target", "h", "model", "origin", "target_date", "forecast", "realized"])?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"));
    for r in records.iter().filter(|r| r.origin >= from) {
        w.write_record([
            r.target.clone(),
            r.h.to_string(),
            r.model.clone(),
            r.origin.to_string(),
            r.origin.add_months(r.h as i32).to_string(),
            opt(r.forecast),
            opt(r.realized),
        ])?;
    }
    w.flush()?;
    Ok(())
}
