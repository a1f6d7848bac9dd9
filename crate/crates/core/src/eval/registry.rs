//! The forecasting models compared in a backtest.

use serde::{Deserialize, Serialize};

use crate::features::{FeatureSet, Recipe};

/// Which elastic-net mixing parameters are searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaSearch {
    Lasso,
    Ridge,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    /// Direct AR with the lag order chosen by BIC.
    ArBic,
    /// Zero change.
    RandomWalk,
    /// AR plus factors, `(P_y, P_f, k)` chosen by BIC.
    ArdiBic,
    ElasticNet(AlphaSearch),
    KernelRidge,
    RandomForest,
    Boosting,
    /// Macroeconomic random forest with the named design columns as linear part.
    Mrf { linear_part: Vec<String> },
    NeuralNet,
}

impl Estimator {
    /// Whether hyperparameters are picked by cross-validation.
    pub fn is_tuned(&self) -> bool {
        matches!(
            self,
            Estimator::ElasticNet(_) | Estimator::KernelRidge | Estimator::Boosting | Estimator::NeuralNet
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub estimator: Estimator,
    pub features: FeatureSet,
}

impl ModelSpec {
    fn new(name: &str, estimator: Estimator, recipe: Recipe) -> Self {
        ModelSpec {
            name: name.to_string(),
            estimator,
            features: FeatureSet::new(recipe),
        }
    }
}

pub const BENCHMARK: &str = "AR,BIC";

fn y_lags(p: usize) -> Vec<String> {
    (0..p).map(|l| format!("y_l{l}")).collect()
}

fn fa_part(k: usize) -> Vec<String> {
    let mut v = y_lags(2);
    v.extend((1..=k).map(|j| format!("F{j}_l0")));
    v
}

/// All twenty models in reporting order.
pub fn model_registry() -> Vec<ModelSpec> {
    use Estimator::*;
    use Recipe::*;
    let mrf = |part: Vec<String>| Mrf { linear_part: part };
    vec![
        ModelSpec::new(BENCHMARK, ArBic, YLags),
        ModelSpec::new("RW", RandomWalk, Empty),
        ModelSpec::new("ARDI,BIC", ArdiBic, YFactors),
        ModelSpec::new("LASSO", ElasticNet(AlphaSearch::Lasso), YFactorsX),
        ModelSpec::new("LASSO+MARX", ElasticNet(AlphaSearch::Lasso), YFactorsXMarx),
        ModelSpec::new("RIDGE", ElasticNet(AlphaSearch::Ridge), YFactorsX),
        ModelSpec::new("RIDGE+MARX", ElasticNet(AlphaSearch::Ridge), YFactorsXMarx),
        ModelSpec::new("E-NET", ElasticNet(AlphaSearch::Grid), YFactorsX),
        ModelSpec::new("E-NET+MARX", ElasticNet(AlphaSearch::Grid), YFactorsXMarx),
        ModelSpec::new("KRR", KernelRidge, YFactors),
        ModelSpec::new("RF", RandomForest, YFactorsX),
        ModelSpec::new("RF+MARX", RandomForest, YFactorsXMarx),
        ModelSpec::new("Boosting", Boosting, YFactorsX),
        ModelSpec::new("Boosting+MARX", Boosting, YFactorsXMarx),
        ModelSpec::new("ARRF(2)", mrf(y_lags(2)), YFactorsXMarx),
        ModelSpec::new("ARRF(6)", mrf(y_lags(6)), YFactorsXMarx),
        ModelSpec::new("FA-ARRF(2,2)", mrf(fa_part(2)), YFactorsXMarx),
        ModelSpec::new("FA-ARRF(2,4)", mrf(fa_part(4)), YFactorsXMarx),
        ModelSpec::new("NN-ARDI", NeuralNet, YFactorsX),
        ModelSpec::new("NN-ARDI+MARX", NeuralNet, YFactorsXMarx),
    ]
}

/// Registry entries by name, in the order given.
pub fn select_models(names: &[&str]) -> Option<Vec<ModelSpec>> {
    let all = model_registry();
    names
        .iter()
        .map(|n| all.iter().find(|m| m.name == n.trim()).cloned())
        .collect()
}
