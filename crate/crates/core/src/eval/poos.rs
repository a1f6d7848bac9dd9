//! Expanding-window pseudo-out-of-sample backtests.
//!
//! At every origin `t` the factors and designs are rebuilt from rows `<= t`
//! only. A direct `h`-step model trains on the rows `s <= t - h` whose
//! target is known by `t` and forecasts from row `t`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use log::{debug, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::registry::{AlphaSearch, Estimator, ModelSpec};
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::factors::extract_factors;
use crate::features::{assemble_design, build_target, period_change, DesignInputs, DesignMatrix, Recipe, TargetSeries};
use crate::linalg::{column_moments, scale_columns, select_cols, select_rows};
use crate::mrf::{fit_mrf, MrfConfig};
use crate::nn::{nn_forecast, nn_tune, MlpConfig, NnPlan};
use crate::panel::{balance_panel_em, transform_panel, BalanceReport, EmOptions, Panel};
use crate::rng::{derive_seed, str_key};
use crate::shrinkage::{
    ar_bic_direct, ardi_bic, enet_cd, enet_tune, krr_fit, krr_predict, krr_tune, ArdiGrid, EnetConfig, ALPHA_GRID,
};
use crate::trees::{boost_tune, fit_boost, fit_forest, BoostConfig, ForestConfig};

/// Level series of one forecast target, aligned with the panel dates.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetData {
    pub id: String,
    pub use_log: bool,
    /// `NaN` where unobserved or past the target's end date.
    pub levels: Vec<f64>,
}

/// Balanced predictor panel plus target levels on a common monthly index.
#[derive(Clone, Debug, PartialEq)]
pub struct PoosData {
    pub dates: Vec<YearMonth>,
    /// `T x N` transformed, balanced predictors.
    pub x: DMatrix<f64>,
    pub x_names: Vec<String>,
    pub targets: Vec<TargetData>,
    /// Columns entering the `X` and MARX blocks; factors always use all columns.
    pub x_block: Vec<bool>,
}

impl PoosData {
    pub fn new(dates: Vec<YearMonth>, x: DMatrix<f64>, x_names: Vec<String>, targets: Vec<TargetData>) -> Result<Self> {
        if x.nrows() != dates.len() || x.ncols() != x_names.len() {
            return Err(Error::Dimension(format!(
                "X is {}x{} for {} dates and {} names",
                x.nrows(),
                x.ncols(),
                dates.len(),
                x_names.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("predictor panel must be balanced"));
        }
        crate::panel::check_dates(&dates)?;
        if let Some(t) = targets.iter().find(|t| t.levels.len() != dates.len()) {
            return Err(Error::Dimension(format!("target {} has {} levels", t.id, t.levels.len())));
        }
        let x_block = vec![true; x_names.len()];
        Ok(PoosData {
            dates,
            x,
            x_names,
            targets,
            x_block,
        })
    }

    /// Transform a raw panel, fill any gaps by EM, and pull the raw levels
    /// of `target_ids`. `use_log` defaults to whether the series' code takes
    /// logs; `log_override` replaces it per target.
    pub fn from_raw(
        raw: &Panel,
        target_ids: &[String],
        log_override: &BTreeMap<String, bool>,
        em: EmOptions,
    ) -> Result<(Self, Option<BalanceReport>)> {
        let tp = transform_panel(raw)?;
        let offset = raw.n_periods() - tp.n_periods();
        let (tp, report) = if tp.is_balanced() {
            (tp, None)
        } else {
            let k = em.k.min(tp.n_periods().min(tp.n_series()) - 1).max(1);
            let (b, r) = balance_panel_em(&tp, EmOptions { k, ..em })?;
            (b, Some(r))
        };
        let mut targets = Vec::with_capacity(target_ids.len());
        for id in target_ids {
            let j = raw.column_index(id).ok_or_else(|| Error::MissingSeries(id.clone()))?;
            let meta = &raw.meta[j];
            let levels = (offset..raw.n_periods())
                .map(|t| {
                    let past_end = meta.end_date.is_some_and(|e| raw.dates[t] > e);
                    if raw.mask[(t, j)] && !past_end {
                        raw.values[(t, j)]
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            targets.push(TargetData {
                id: id.clone(),
                use_log: log_override.get(id).copied().unwrap_or(meta.tcode.uses_log()),
                levels,
            });
        }
        let names = tp.meta.iter().map(|m| m.id.clone()).collect();
        Ok((PoosData::new(tp.dates.clone(), tp.values, names, targets)?, report))
    }

    /// Keep the named series out of the `X` and MARX blocks.
    pub fn exclude_from_x_block(&mut self, ids: &[String]) -> Result<()> {
        for id in ids {
            let j = self
                .x_names
                .iter()
                .position(|n| n == id)
                .ok_or_else(|| Error::MissingSeries(id.clone()))?;
            self.x_block[j] = false;
        }
        if !self.x_block.iter().any(|&b| b) {
            return Err(Error::invalid("X block would be empty"));
        }
        Ok(())
    }

    pub fn date_index(&self, d: YearMonth) -> Option<usize> {
        let off = d.months_since(*self.dates.first()?);
        (off >= 0 && (off as usize) < self.dates.len()).then_some(off as usize)
    }
}

/// Model-size knobs. Defaults follow the reference configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub cv_folds: usize,
    pub forest_trees: usize,
    pub mrf_trees: usize,
    pub mrf_block_size: usize,
    pub nn_ensemble: usize,
    pub nn_epochs: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            cv_folds: 5,
            forest_trees: 500,
            mrf_trees: 500,
            mrf_block_size: 12,
            nn_ensemble: 5,
            nn_epochs: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub targets: Vec<String>,
    pub horizons: Vec<usize>,
    pub models: Vec<ModelSpec>,
    pub poos_start: YearMonth,
    /// Hyperparameters are re-tuned every this many origins.
    pub retune_every: usize,
    pub seed: u64,
    /// Factors extracted at each origin.
    pub n_factors: usize,
    pub settings: ModelSettings,
}

impl ExperimentPlan {
    pub fn new(targets: Vec<String>, models: Vec<ModelSpec>) -> Self {
        ExperimentPlan {
            targets,
            horizons: vec![1, 2, 3],
            models,
            poos_start: YearMonth::new(2008, 1).expect("valid month"),
            retune_every: 1,
            seed: 0,
            n_factors: 8,
            settings: ModelSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() || self.models.is_empty() || self.horizons.is_empty() {
            return Err(Error::invalid("plan needs targets, models and horizons"));
        }
        if let Some(h) = self.horizons.iter().find(|h| !(1..=3).contains(*h)) {
            return Err(Error::invalid(format!("horizon {h} outside 1..=3")));
        }
        if self.retune_every == 0 || self.n_factors == 0 || self.settings.cv_folds < 2 {
            return Err(Error::invalid("retune_every and n_factors must be positive, cv_folds at least 2"));
        }
        let mut seen = HashSet::new();
        for m in &self.models {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::invalid(format!("model {} listed twice", m.name)));
            }
        }
        let mut seen = HashSet::new();
        for t in &self.targets {
            if !seen.insert(t.as_str()) {
                return Err(Error::invalid(format!("target {t} listed twice")));
            }
        }
        Ok(())
    }
}

/// One forecast. `forecast` is `None` when the model failed; the reason is
/// kept in `error` but not written to the records file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub target: String,
    pub model: String,
    pub h: usize,
    pub origin: YearMonth,
    pub forecast: Option<f64>,
    pub realized: Option<f64>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Hyper {
    Enet { alpha: f64, lambda: f64 },
    Krr { sigma: f64, lambda: f64 },
    Boost { eta: f64, steps: usize },
    Nn { lr: f64, l1: f64 },
}

/// Data known at one origin, shared by all targets and models.
struct OriginData {
    t: usize,
    x: DMatrix<f64>,
    factors: Option<DMatrix<f64>>,
}

impl OriginData {
    fn block(&self, keep: &[usize]) -> DMatrix<f64> {
        if keep.len() == self.x.ncols() {
            self.x.clone()
        } else {
            select_cols(&self.x, keep)
        }
    }
}

/// Training set and forecast row for one (origin, target, h, model).
struct Problem {
    names: Vec<String>,
    z: DMatrix<f64>,
    y: Vec<f64>,
    z_next: DMatrix<f64>,
}

struct TargetCtx {
    id: String,
    change: Vec<f64>,
    by_h: HashMap<usize, TargetSeries>,
}

struct Runner<'a> {
    plan: &'a ExperimentPlan,
    data: &'a PoosData,
    first: usize,
    targets: Vec<TargetCtx>,
    need_factors: bool,
    block_cols: Vec<usize>,
    block_names: Vec<String>,
}

impl<'a> Runner<'a> {
    fn new(plan: &'a ExperimentPlan, data: &'a PoosData) -> Result<Self> {
        plan.validate()?;
        let first = data.date_index(plan.poos_start).ok_or_else(|| {
            Error::invalid(format!("POOS start {} outside the sample", plan.poos_start))
        })?;
        let mut targets = Vec::new();
        for id in &plan.targets {
            let td = data
                .targets
                .iter()
                .find(|t| &t.id == id)
                .ok_or_else(|| Error::MissingSeries(id.clone()))?;
            let mut by_h = HashMap::new();
            for &h in &plan.horizons {
                by_h.insert(h, build_target(id, &td.levels, h, td.use_log)?);
            }
            targets.push(TargetCtx {
                id: id.clone(),
                change: period_change(&td.levels, td.use_log),
                by_h,
            });
        }
        let need_factors = plan.models.iter().any(|m| m.features.include_factors());
        let block_cols: Vec<usize> = (0..data.x_names.len()).filter(|&j| data.x_block[j]).collect();
        let block_names = block_cols.iter().map(|&j| data.x_names[j].clone()).collect();
        Ok(Runner {
            plan,
            data,
            first,
            targets,
            need_factors,
            block_cols,
            block_names,
        })
    }

    fn anchor(&self, t: usize) -> usize {
        let n = self.plan.retune_every;
        self.first + (t - self.first) / n * n
    }

    fn origin_data(&self, t: usize) -> Result<OriginData> {
        let x = self.data.x.rows(0, t + 1).into_owned();
        let factors = if self.need_factors {
            let k = self.plan.n_factors.min(x.ncols()).min(x.nrows());
            let (means, sds) = column_moments(&x);
            Some(extract_factors(&scale_columns(&x, &means, &sds), k)?.factors)
        } else {
            None
        };
        Ok(OriginData { t, x, factors })
    }

    fn design(&self, od: &OriginData, target: usize, model: &ModelSpec) -> Result<DesignMatrix> {
        let mut fs = model.features;
        if let Some(f) = &od.factors {
            fs.k = fs.k.min(f.ncols());
        }
        let x = od.block(&self.block_cols);
        let inputs = DesignInputs {
            y: &self.targets[target].change[..=od.t],
            factors: od.factors.as_ref(),
            x: &x,
            x_names: &self.block_names,
        };
        let origins: Vec<usize> = (0..=od.t).collect();
        let d = assemble_design(&fs, &inputs, &origins)?;
        let keep: Vec<usize> = (0..d.rows.len())
            .filter(|&i| d.values.row(i).iter().all(|v| v.is_finite()))
            .collect();
        Ok(DesignMatrix {
            rows: keep.iter().map(|&i| d.rows[i]).collect(),
            values: select_rows(&d.values, &keep),
            names: d.names,
        })
    }

    fn problem(&self, design: &DesignMatrix, target: usize, h: usize, t: usize) -> Result<Problem> {
        let ts = &self.targets[target].by_h[&h];
        let mut train = Vec::new();
        let mut y = Vec::new();
        for (i, &s) in design.rows.iter().enumerate() {
            if s + h > t {
                break;
            }
            if let Some(v) = ts.values[s] {
                train.push(i);
                y.push(v);
            }
        }
        let next = design
            .row_of(t)
            .ok_or_else(|| Error::invalid(format!("inputs unavailable at origin {}", self.data.dates[t])))?;
        if train.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: train.len(),
            });
        }
        Ok(Problem {
            names: design.names.clone(),
            z: select_rows(&design.values, &train),
            y,
            z_next: select_rows(&design.values, &[next]),
        })
    }

    fn seed(&self, target: usize, h: usize, model: &ModelSpec, t: usize, tag: u64) -> u64 {
        derive_seed(
            self.plan.seed,
            &[str_key(&self.targets[target].id), h as u64, str_key(&model.name), t as u64, tag],
        )
    }

    fn mlp_config(&self, seed: u64) -> MlpConfig {
        MlpConfig {
            seed,
            ensemble: self.plan.settings.nn_ensemble,
            epochs_max: self.plan.settings.nn_epochs,
            ..MlpConfig::default()
        }
    }

    fn tune(&self, model: &ModelSpec, p: &Problem, seed: u64) -> Result<Hyper> {
        let folds = self.plan.settings.cv_folds;
        Ok(match &model.estimator {
            Estimator::ElasticNet(search) => {
                let alphas: &[f64] = match search {
                    AlphaSearch::Lasso => &[1.0],
                    AlphaSearch::Ridge => &[0.0],
                    AlphaSearch::Grid => &ALPHA_GRID,
                };
                let c = enet_tune(&p.z, &p.y, alphas, folds, seed)?.config;
                Hyper::Enet {
                    alpha: c.alpha,
                    lambda: c.lambda,
                }
            }
            Estimator::KernelRidge => {
                let (zs, yc, _) = krr_inputs(&p.z, &p.y);
                let k = krr_tune(&zs, &yc, folds, seed)?;
                Hyper::Krr {
                    sigma: k.sigma,
                    lambda: k.lambda,
                }
            }
            Estimator::Boosting => {
                let c = boost_tune(&p.z, &p.y, folds, seed, &BoostConfig::new(0.1, 100))?.config;
                Hyper::Boost {
                    eta: c.eta,
                    steps: c.n_steps,
                }
            }
            Estimator::NeuralNet => {
                let plan = NnPlan {
                    folds: Some(folds),
                    ..Default::default()
                };
                let r = nn_tune(&p.z, &p.y, &self.mlp_config(seed), &plan)?;
                Hyper::Nn { lr: r.lr, l1: r.l1 }
            }
            _ => return Err(Error::invalid(format!("{} has no hyperparameters", model.name))),
        })
    }

    fn forecast(&self, model: &ModelSpec, p: &Problem, hyper: Option<Hyper>, seed: u64) -> Result<f64> {
        let row: Vec<f64> = p.z_next.row(0).iter().copied().collect();
        let settings = &self.plan.settings;
        let value = match (&model.estimator, hyper) {
            (Estimator::RandomWalk, _) => 0.0,
            (Estimator::ArBic, _) => {
                let fit = ar_bic_direct(&p.z, &p.names, &p.y, model.features.py)?;
                fit.fit.predict_row(&row)
            }
            (Estimator::ArdiBic, _) => {
                let k = p.names.iter().filter(|n| n.ends_with("_l0") && n.starts_with('F')).count();
                let design = DesignMatrix {
                    rows: (0..p.y.len()).collect(),
                    names: p.names.clone(),
                    values: p.z.clone(),
                };
                let grid = ArdiGrid {
                    py_max: model.features.py,
                    pf_max: model.features.pf,
                    k_max: k,
                };
                ardi_bic(&design, &p.y, grid)?.predict_row(&row)
            }
            (Estimator::ElasticNet(_), Some(Hyper::Enet { alpha, lambda })) => {
                enet_cd(&p.z, &p.y, &p.names, &EnetConfig::new(alpha, lambda))?.predict_row(&row)
            }
            (Estimator::KernelRidge, Some(Hyper::Krr { sigma, lambda })) => {
                let (zs, yc, (means, sds, ybar)) = krr_inputs(&p.z, &p.y);
                let fit = krr_fit(&zs, &yc, sigma, lambda)?;
                krr_predict(&fit, &scale_columns(&p.z_next, &means, &sds))?[0] + ybar
            }
            (Estimator::RandomForest, _) => {
                let cfg = ForestConfig {
                    n_trees: settings.forest_trees,
                    ..ForestConfig::default()
                };
                fit_forest(&p.z, &p.y, &cfg, seed)?.predict_row(&row)
            }
            (Estimator::Boosting, Some(Hyper::Boost { eta, steps })) => {
                fit_boost(&p.z, &p.y, &BoostConfig::new(eta, steps))?.predict_row(&row)
            }
            (Estimator::Mrf { linear_part }, _) => {
                let cols: Vec<usize> = linear_part
                    .iter()
                    .map(|c| {
                        p.names
                            .iter()
                            .position(|n| n == c)
                            .ok_or_else(|| Error::invalid(format!("linear part column {c} not in design")))
                    })
                    .collect::<Result<_>>()?;
                let cfg = MrfConfig {
                    n_trees: settings.mrf_trees,
                    block_size: settings.mrf_block_size,
                    seed,
                    ..MrfConfig::new(linear_part.clone())
                };
                let model = fit_mrf(&p.y, &p.z, &select_cols(&p.z, &cols), &cfg)?;
                model.predict(&p.z_next, &select_cols(&p.z_next, &cols))?[0]
            }
            (Estimator::NeuralNet, Some(Hyper::Nn { lr, l1 })) => {
                let plan = NnPlan {
                    grid: vec![(lr, l1)],
                    ..Default::default()
                };
                nn_forecast(&p.z, &p.y, &p.z_next, &self.mlp_config(seed), &plan)?.predictions[0]
            }
            _ => return Err(Error::invalid(format!("{} is missing its hyperparameters", model.name))),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Solver(format!("{} produced a non-finite forecast", model.name)))
        }
    }

    /// Hyperparameters of every tuned (target, h, model) at origin `a`.
    fn tune_at(&self, a: usize) -> Vec<((usize, usize, usize), std::result::Result<Hyper, String>)> {
        let od = match self.origin_data(a) {
            Ok(od) => od,
            Err(e) => {
                let msg = e.to_string();
                return self
                    .tuned_keys()
                    .into_iter()
                    .map(|k| (k, Err(msg.clone())))
                    .collect();
            }
        };
        self.tuned_keys()
            .into_iter()
            .map(|(ti, h, mi)| {
                let model = &self.plan.models[mi];
                let r = self
                    .design(&od, ti, model)
                    .and_then(|d| self.problem(&d, ti, h, a))
                    .and_then(|p| self.tune(model, &p, self.seed(ti, h, model, a, 0x7475)))
                    .map_err(|e| e.to_string());
                ((ti, h, mi), r)
            })
            .collect()
    }

    fn tuned_keys(&self) -> Vec<(usize, usize, usize)> {
        let mut keys = Vec::new();
        for ti in 0..self.targets.len() {
            for &h in &self.plan.horizons {
                for (mi, m) in self.plan.models.iter().enumerate() {
                    if m.estimator.is_tuned() {
                        keys.push((ti, h, mi));
                    }
                }
            }
        }
        keys
    }

    fn run_origin(
        &self,
        t: usize,
        tuned: &HashMap<(usize, usize, usize, usize), std::result::Result<Hyper, String>>,
    ) -> Vec<ForecastRecord> {
        debug!("origin {}", self.data.dates[t]);
        let od = self.origin_data(t);
        let mut out = Vec::new();
        for ti in 0..self.targets.len() {
            let mut designs: HashMap<Recipe, Result<DesignMatrix>> = HashMap::new();
            for &h in &self.plan.horizons {
                let Some(realized) = self.targets[ti].by_h[&h].values[t] else {
                    continue;
                };
                for (mi, model) in self.plan.models.iter().enumerate() {
                    let result = (|| -> Result<f64> {
                        let od = od.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                        let design = designs
                            .entry(model.features.recipe)
                            .or_insert_with(|| self.design(od, ti, model));
                        let design = design.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                        let p = self.problem(design, ti, h, t)?;
                        let hyper = if !model.estimator.is_tuned() {
                            None
                        } else if self.plan.retune_every == 1 {
                            Some(self.tune(model, &p, self.seed(ti, h, model, t, 0x7475))?)
                        } else {
                            let key = (ti, h, mi, self.anchor(t));
                            match tuned.get(&key) {
                                Some(Ok(hy)) => Some(*hy),
                                Some(Err(e)) => return Err(Error::invalid(format!("tuning failed: {e}"))),
                                None => return Err(Error::invalid("no tuning anchor")),
                            }
                        };
                        self.forecast(model, &p, hyper, self.seed(ti, h, model, t, 0))
                    })();
                    let (forecast, error) = match result {
                        Ok(v) => (Some(v), None),
                        Err(e) => {
                            warn!(
                                "{} failed for {} h={} at {}: {e}",
                                model.name, self.targets[ti].id, h, self.data.dates[t]
                            );
                            (None, Some(e.to_string()))
                        }
                    };
                    out.push(ForecastRecord {
                        target: self.targets[ti].id.clone(),
                        model: model.name.clone(),
                        h,
                        origin: self.data.dates[t],
                        forecast,
                        realized: Some(realized),
                        error,
                    });
                }
            }
        }
        out
    }

    fn run(&self, origins: &[usize]) -> Vec<ForecastRecord> {
        let mut tuned = HashMap::new();
        if self.plan.retune_every > 1 && self.plan.models.iter().any(|m| m.estimator.is_tuned()) {
            let mut anchors: Vec<usize> = origins.iter().map(|&t| self.anchor(t)).collect();
            anchors.dedup();
            let results: Vec<_> = anchors.par_iter().map(|&a| (a, self.tune_at(a))).collect();
            for (a, rs) in results {
                for ((ti, h, mi), r) in rs {
                    tuned.insert((ti, h, mi, a), r);
                }
            }
        }
        let per_origin: Vec<Vec<ForecastRecord>> = origins.par_iter().map(|&t| self.run_origin(t, &tuned)).collect();
        let mut records: Vec<ForecastRecord> = per_origin.into_iter().flatten().collect();
        let target_pos: HashMap<&str, usize> = self.plan.targets.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let model_pos: HashMap<&str, usize> =
            self.plan.models.iter().enumerate().map(|(i, m)| (m.name.as_str(), i)).collect();
        records.sort_by_key(|r| (target_pos[r.target.as_str()], r.h, model_pos[r.model.as_str()]));
        records
    }
}

fn krr_inputs(z: &DMatrix<f64>, y: &[f64]) -> (DMatrix<f64>, Vec<f64>, (Vec<f64>, Vec<f64>, f64)) {
    let (means, sds) = column_moments(z);
    let zs = scale_columns(z, &means, &sds);
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let yc = y.iter().map(|v| v - ybar).collect();
    (zs, yc, (means, sds, ybar))
}

/// Run every origin from the plan's start to the end of the sample.
/// Model failures become records without a forecast.
pub fn run_poos(plan: &ExperimentPlan, data: &PoosData) -> Result<Vec<ForecastRecord>> {
    let runner = Runner::new(plan, data)?;
    let origins: Vec<usize> = (runner.first..data.dates.len()).collect();
    Ok(runner.run(&origins))
}

/// Run only the given origins; each gives the same records as in a full run.
pub fn run_poos_origins(plan: &ExperimentPlan, data: &PoosData, origins: &[YearMonth]) -> Result<Vec<ForecastRecord>> {
    let runner = Runner::new(plan, data)?;
    let mut idx = Vec::with_capacity(origins.len());
    for d in origins {
        match data.date_index(*d) {
            Some(t) if t >= runner.first => idx.push(t),
            _ => return Err(Error::invalid(format!("origin {d} outside the evaluation period"))),
        }
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(runner.run(&idx))
}

/// The design a model sees at one origin (all rows up to the origin).
pub fn origin_design(
    plan: &ExperimentPlan,
    data: &PoosData,
    target: &str,
    model: &str,
    origin: YearMonth,
) -> Result<DesignMatrix> {
    let runner = Runner::new(plan, data)?;
    let t = data
        .date_index(origin)
        .ok_or_else(|| Error::invalid(format!("origin {origin} outside the sample")))?;
    let ti = runner
        .targets
        .iter()
        .position(|c| c.id == target)
        .ok_or_else(|| Error::MissingSeries(target.to_string()))?;
    let spec = plan
        .models
        .iter()
        .find(|m| m.name == model)
        .ok_or_else(|| Error::invalid(format!("unknown model {model}")))?;
    runner.design(&runner.origin_data(t)?, ti, spec)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == "NA" || s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::invalid(format!("bad number {s:?} in records")))
}

/// Records CSV: `target,model,h,origin,forecast,realized`, `NA` for missing.
pub fn write_records<W: Write>(records: &[ForecastRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["target", "model", "h", "origin", "forecast", "realized"])?;
    for r in records {
        w.write_record([
            r.target.clone(),
            r.model.clone(),
            r.h.to_string(),
            r.origin.to_string(),
            fmt_opt(r.forecast),
            fmt_opt(r.realized),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<ForecastRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.to_string()).collect();
    if header != ["target", "model", "h", "origin", "forecast", "realized"] {
        return Err(Error::invalid(format!("unexpected records header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(ForecastRecord {
            target: rec[0].to_string(),
            model: rec[1].to_string(),
            h: rec[2]
                .parse()
                .map_err(|_| Error::invalid(format!("bad horizon {:?}", &rec[2])))?,
            origin: rec[3].parse()?,
            forecast: parse_opt(&rec[4])?,
            realized: parse_opt(&rec[5])?,
            error: None,
        });
    }
    Ok(out)
}
