//! End-to-end experiment pipeline: generate, decompose, select, evaluate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    gen_sinusoid, gen_synthetic_block, simulate_rcs_gcm, GcmParams, SinusoidParams,
    SyntheticBlockParams,
};
use crate::decomp::{
    btud_fit, estimate_beta, hooi, posterior_stats, self_consistency_check, validate_ranks,
    BtudOptions, ConsistencyReport, FitReport, HooiOptions, TuckerModel,
};
use crate::error::{Error, Result};
use crate::linalg::SvdResult;
use crate::select::{
    btud_pvalues, optimize_sigma, rank_components_by_core, select_features, svd_select, td_pvalues,
    CoreFilter, SelectionResult, SigmaFit, SigmaOptions, SvdMethod, DEFAULT_THRESHOLD,
};
use crate::tensor::{Matrix, Mode, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SyntheticBlock,
    Sinusoid,
    RcsGcm,
    Custom,
}

impl ExperimentKind {
    /// Upper bounds on `(L1, L2, L3)` for the named experiments.
    pub fn rank_caps(self) -> Option<[usize; 3]> {
        match self {
            ExperimentKind::SyntheticBlock => Some([10, 5, 5]),
            ExperimentKind::Sinusoid => Some([10, 2, 1]),
            ExperimentKind::RcsGcm | ExperimentKind::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Hooi,
    Btud,
    HooiThenCheck,
}

/// Which mode-1 components enter the statistic. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ComponentRule {
    Fixed {
        components: Vec<usize>,
    },
    /// The `count` mode-1 components with the largest `|G|` over the listed
    /// mode-2 and mode-3 indices (empty lists mean all).
    ByCore {
        #[serde(default)]
        mode2: Vec<usize>,
        #[serde(default)]
        mode3: Vec<usize>,
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Posterior means scaled by posterior variances.
    Btud,
    /// Factor entries scaled by an optimized σ.
    Td,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub components: ComponentRule,
    pub threshold: f64,
    pub method: Method,
    pub sigma: SigmaOptions,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            components: ComponentRule::Fixed {
                components: vec![1],
            },
            threshold: DEFAULT_THRESHOLD,
            method: Method::Btud,
            sigma: SigmaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HooiSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub factor_tol: Option<f64>,
}

impl Default for HooiSettings {
    fn default() -> Self {
        let d = HooiOptions::default();
        Self {
            max_iter: d.max_iter,
            tol: d.tol,
            factor_tol: d.factor_tol,
        }
    }
}

impl From<HooiSettings> for HooiOptions {
    fn from(s: HooiSettings) -> Self {
        HooiOptions {
            max_iter: s.max_iter,
            tol: s.tol,
            factor_tol: s.factor_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BtudSettings {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for BtudSettings {
    fn default() -> Self {
        let d = BtudOptions::default();
        Self {
            max_sweeps: d.max_sweeps,
            tol: d.tol,
        }
    }
}

/// Full description of a run. Serialized as JSON for the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub synthetic: SyntheticBlockParams,
    pub sinusoid: SinusoidParams,
    pub gcm: GcmParams,
    /// Tucker ranks for tensor data.
    pub ranks: [usize; 3],
    pub solver: Solver,
    pub hooi: HooiSettings,
    pub btud: BtudSettings,
    /// Also run the alternating-regression solver from the HOOI result and
    /// record how many sweeps it needs (`hooi-then-check` only).
    pub verify_with_btud: bool,
    pub consistency_tol: f64,
    pub alpha: f64,
    pub selection: SelectionConfig,
    pub ensembles: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(ExperimentKind::SyntheticBlock)
    }
}

impl ExperimentConfig {
    /// Settings of the named benchmark runs.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            synthetic: SyntheticBlockParams::default(),
            sinusoid: SinusoidParams::default(),
            gcm: GcmParams::default(),
            ranks: [10, 5, 5],
            solver: Solver::HooiThenCheck,
            hooi: HooiSettings::default(),
            btud: BtudSettings::default(),
            verify_with_btud: false,
            consistency_tol: 1e-6,
            alpha: 0.0,
            selection: SelectionConfig::default(),
            ensembles: 1,
            seed: 0,
        };
        match kind {
            ExperimentKind::SyntheticBlock => ExperimentConfig {
                hooi: HooiSettings {
                    max_iter: 20_000,
                    tol: 1e-8,
                    factor_tol: Some(1e-8),
                },
                verify_with_btud: true,
                ensembles: 100,
                ..base
            },
            ExperimentKind::Sinusoid => ExperimentConfig {
                ranks: [10, 2, 1],
                selection: SelectionConfig {
                    components: ComponentRule::Fixed {
                        components: vec![1, 2],
                    },
                    ..SelectionConfig::default()
                },
                ensembles: 100,
                ..base
            },
            ExperimentKind::RcsGcm | ExperimentKind::Custom => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensembles == 0 {
            return Err(Error::arg("ensembles must be at least 1"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::arg("alpha must be non-negative"));
        }
        if !(self.selection.threshold > 0.0 && self.selection.threshold < 1.0) {
            return Err(Error::arg("threshold must lie in (0, 1)"));
        }
        if !(self.consistency_tol > 0.0) {
            return Err(Error::arg("consistency_tol must be positive"));
        }
        if let Some(caps) = self.experiment.rank_caps() {
            for (m, (r, c)) in self.ranks.iter().zip(caps).enumerate() {
                if *r > c {
                    return Err(Error::arg(format!(
                        "rank {r} for mode {} exceeds the cap {c} of this experiment",
                        m + 1
                    )));
                }
            }
        }
        match &self.selection.components {
            ComponentRule::Fixed { components } => {
                if components.is_empty() || components.contains(&0) {
                    return Err(Error::arg("components are 1-based and must be non-empty"));
                }
            }
            ComponentRule::ByCore {
                mode2,
                mode3,
                count,
            } => {
                if *count == 0 || mode2.contains(&0) || mode3.contains(&0) {
                    return Err(Error::arg(
                        "by-core rule needs count >= 1 and 1-based indices",
                    ));
                }
            }
        }
        match self.experiment {
            ExperimentKind::SyntheticBlock => self.synthetic.validate(),
            ExperimentKind::Sinusoid => self.sinusoid.validate(),
            ExperimentKind::RcsGcm => self.gcm.validate(),
            ExperimentKind::Custom => Ok(()),
        }
    }

    /// Seed of ensemble member `index`.
    pub fn member_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

/// Input data of one run.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Tensor(Tensor3),
    Matrix(Matrix),
}

impl Data {
    /// Number of features (mode-1 size).
    pub fn features(&self) -> usize {
        match self {
            Data::Tensor(t) => t.dims().0,
            Data::Matrix(m) => m.rows(),
        }
    }
}

/// Generates the data (and truth mask where defined) for `seed`.
pub fn generate(config: &ExperimentConfig, seed: u64) -> Result<(Data, Option<Vec<bool>>)> {
    match config.experiment {
        ExperimentKind::SyntheticBlock => {
            let p = SyntheticBlockParams {
                seed,
                ..config.synthetic.clone()
            };
            let (t, truth) = gen_synthetic_block(&p)?;
            Ok((Data::Tensor(t), Some(truth)))
        }
        ExperimentKind::Sinusoid => {
            let p = SinusoidParams {
                seed,
                ..config.sinusoid.clone()
            };
            let (x, truth) = gen_sinusoid(&p)?;
            Ok((Data::Matrix(x), Some(truth)))
        }
        ExperimentKind::RcsGcm => {
            let p = GcmParams {
                seed,
                ..config.gcm.clone()
            };
            Ok((Data::Matrix(simulate_rcs_gcm(&p)?), None))
        }
        ExperimentKind::Custom => Err(Error::arg("custom experiments take their data from a file")),
    }
}

/// Result of fitting a Tucker model according to the configured solver.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub model: TuckerModel,
    pub report: FitReport,
    pub consistency: Option<ConsistencyReport>,
    /// Sweeps the alternating-regression solver needed when started from HOOI.
    pub btud_sweeps_from_hooi: Option<usize>,
}

pub fn decompose(t: &Tensor3, config: &ExperimentConfig) -> Result<Decomposition> {
    let ranks = (config.ranks[0], config.ranks[1], config.ranks[2]);
    validate_ranks(t.dims(), ranks)?;
    let (model, mut report) = hooi(t, ranks, config.hooi.into())?;
    let btud_opts = BtudOptions {
        max_sweeps: config.btud.max_sweeps,
        tol: config.btud.tol,
        consistency_tol: config.consistency_tol,
    };
    match config.solver {
        Solver::Hooi => Ok(Decomposition {
            model,
            report,
            consistency: None,
            btud_sweeps_from_hooi: None,
        }),
        Solver::Btud => {
            let (fitted, _, btud_report) = btud_fit(t, &model, config.alpha, btud_opts)?;
            Ok(Decomposition {
                model: fitted,
                btud_sweeps_from_hooi: Some(btud_report.sweeps),
                report: btud_report,
                consistency: None,
            })
        }
        Solver::HooiThenCheck => {
            let beta = estimate_beta(t, &model)?;
            let check =
                self_consistency_check(t, &model, config.alpha, beta, config.consistency_tol)?;
            report.record_consistency(&check);
            let sweeps = if config.verify_with_btud {
                Some(btud_fit(t, &model, config.alpha, btud_opts)?.2.sweeps)
            } else {
                None
            };
            Ok(Decomposition {
                model,
                report,
                consistency: Some(check),
                btud_sweeps_from_hooi: sweeps,
            })
        }
    }
}

/// 0-based mode-1 components chosen by `rule`.
pub fn resolve_components(
    rule: &ComponentRule,
    core: Option<&Tensor3>,
    available: usize,
) -> Result<Vec<usize>> {
    let out: Vec<usize> = match rule {
        ComponentRule::Fixed { components } => {
            components.iter().map(|c| c.wrapping_sub(1)).collect()
        }
        ComponentRule::ByCore {
            mode2,
            mode3,
            count,
        } => {
            let core =
                core.ok_or_else(|| Error::arg("the by-core rule needs a tensor decomposition"))?;
            let filter = CoreFilter {
                mode2: mode2.iter().map(|c| c.wrapping_sub(1)).collect(),
                mode3: mode3.iter().map(|c| c.wrapping_sub(1)).collect(),
            };
            let ranked = rank_components_by_core(core, &filter)?;
            ranked.into_iter().take(*count).map(|(l, _)| l).collect()
        }
    };
    if let Some(bad) = out.iter().find(|&&c| c >= available) {
        return Err(Error::arg(format!(
            "component {} requested but only {available} are available",
            bad.wrapping_add(1)
        )));
    }
    Ok(out)
}

/// P-values from a fitted tensor model.
pub fn select_from_model(
    t: &Tensor3,
    model: &TuckerModel,
    config: &ExperimentConfig,
) -> Result<(SelectionResult, Option<SigmaFit>)> {
    let components = resolve_components(
        &config.selection.components,
        Some(model.core()),
        model.ranks().0,
    )?;
    match config.selection.method {
        Method::Btud => {
            let beta = estimate_beta(t, model)?;
            let (mean, cov) = posterior_stats(t, model, Mode::One, config.alpha, beta)?;
            let stats = btud_pvalues(&mean, &cov, &components)?;
            Ok((select_features(stats, config.selection.threshold)?, None))
        }
        Method::Td => {
            let u = model.factor(Mode::One);
            let fit = optimize_sigma(u, &components, &config.selection.sigma)?;
            let stats = td_pvalues(u, &fit.sigma, &components)?;
            Ok((
                select_features(stats, config.selection.threshold)?,
                Some(fit),
            ))
        }
    }
}

/// Counts against a truth mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub fp: f64,
    pub tp: f64,
}

impl Confusion {
    pub fn total(&self) -> f64 {
        self.tn + self.fn_ + self.fp + self.tp
    }
}

pub fn confusion(selected: &[bool], truth: &[bool]) -> Result<Confusion> {
    if selected.len() != truth.len() {
        return Err(Error::dim(format!(
            "{} selection flags against {} truth labels",
            selected.len(),
            truth.len()
        )));
    }
    let mut c = Confusion {
        tn: 0.0,
        fn_: 0.0,
        fp: 0.0,
        tp: 0.0,
    };
    for (&s, &t) in selected.iter().zip(truth) {
        match (s, t) {
            (true, true) => c.tp += 1.0,
            (true, false) => c.fp += 1.0,
            (false, true) => c.fn_ += 1.0,
            (false, false) => c.tn += 1.0,
        }
    }
    Ok(c)
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct MemberOutcome {
    pub index: usize,
    pub seed: u64,
    pub selection: SelectionResult,
    pub confusion: Option<Confusion>,
    pub decomposition: Option<Decomposition>,
    pub svd: Option<SvdResult>,
    pub sigma: Option<SigmaFit>,
    pub beta: Option<f64>,
}

/// Decomposition and selection on given data.
pub fn analyze(
    data: &Data,
    truth: Option<&[bool]>,
    config: &ExperimentConfig,
    index: usize,
    seed: u64,
) -> Result<MemberOutcome> {
    let (selection, decomposition, svd, sigma, beta) = match data {
        Data::Tensor(t) => {
            let dec = decompose(t, config)?;
            let (selection, sigma) = select_from_model(t, &dec.model, config)?;
            let beta = estimate_beta(t, &dec.model)?;
            (selection, Some(dec), None, sigma, Some(beta))
        }
        Data::Matrix(x) => {
            let limit = x.rows().min(x.cols());
            let components = resolve_components(&config.selection.components, None, limit)?;
            let method = match config.selection.method {
                Method::Btud => SvdMethod::Btud,
                Method::Td => SvdMethod::Td,
            };
            let sel = svd_select(
                x,
                &components,
                method,
                config.selection.threshold,
                &config.selection.sigma,
            )?;
            (sel.result, None, Some(sel.svd), sel.sigma, sel.beta)
        }
    };
    let confusion = truth
        .map(|t| confusion(&selection.selected, t))
        .transpose()?;
    Ok(MemberOutcome {
        index,
        seed,
        selection,
        confusion,
        decomposition,
        svd,
        sigma,
        beta,
    })
}

/// Generate plus [`analyze`] for ensemble member `index`.
pub fn run_member(config: &ExperimentConfig, index: usize) -> Result<MemberOutcome> {
    let seed = config.member_seed(index);
    let (data, truth) = generate(config, seed)?;
    analyze(&data, truth.as_deref(), config, index, seed)
}

/// Per-member row of an ensemble summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub index: usize,
    pub seed: u64,
    pub selected: usize,
    pub confusion: Option<Confusion>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub self_consistent: Option<bool>,
    pub max_mode_deviation: Option<f64>,
    pub btud_sweeps_from_hooi: Option<usize>,
}

impl MemberRow {
    pub fn from_outcome(o: &MemberOutcome) -> Self {
        let dec = o.decomposition.as_ref();
        MemberRow {
            index: o.index,
            seed: o.seed,
            selected: o.selection.selected_count(),
            confusion: o.confusion,
            converged: dec.map(|d| d.report.converged),
            iterations: dec.map(|d| d.report.sweeps),
            self_consistent: dec.and_then(|d| d.consistency.as_ref().map(|c| c.self_consistent)),
            max_mode_deviation: dec.and_then(|d| d.report.max_mode_deviation),
            btud_sweeps_from_hooi: dec.and_then(|d| d.btud_sweeps_from_hooi),
        }
    }
}

/// Ensemble means and standard deviations of the confusion counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub ensembles: usize,
    pub mean: Option<Confusion>,
    pub sd: Option<Confusion>,
    pub mean_selected: f64,
    pub rows: Vec<MemberRow>,
}

impl ConfusionReport {
    pub fn from_rows(rows: Vec<MemberRow>) -> Self {
        let n = rows.len() as f64;
        let mean_selected = rows.iter().map(|r| r.selected as f64).sum::<f64>() / n;
        let all: Option<Vec<Confusion>> = rows.iter().map(|r| r.confusion).collect();
        let (mean, sd) = match all {
            Some(c) if !c.is_empty() => {
                let field = |f: fn(&Confusion) -> f64| -> (f64, f64) {
                    let m = c.iter().map(f).sum::<f64>() / n;
                    let v = if c.len() > 1 {
                        c.iter().map(|x| (f(x) - m).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    (m, v.sqrt())
                };
                let (tn, tn_sd) = field(|x| x.tn);
                let (fn_, fn_sd) = field(|x| x.fn_);
                let (fp, fp_sd) = field(|x| x.fp);
                let (tp, tp_sd) = field(|x| x.tp);
                (
                    Some(Confusion { tn, fn_, fp, tp }),
                    Some(Confusion {
                        tn: tn_sd,
                        fn_: fn_sd,
                        fp: fp_sd,
                        tp: tp_sd,
                    }),
                )
            }
            _ => (None, None),
        };
        ConfusionReport {
            ensembles: rows.len(),
            mean,
            sd,
            mean_selected,
            rows,
        }
    }
}

/// Outcome of [`run_ensemble`]: the members that finished, in index order,
/// and the first failure (by member index) if any.
#[derive(Debug)]
pub struct EnsembleRun {
    pub members: Vec<MemberOutcome>,
    pub failure: Option<(usize, Error)>,
}

impl EnsembleRun {
    pub fn report(&self) -> ConfusionReport {
        ConfusionReport::from_rows(self.members.iter().map(MemberRow::from_outcome).collect())
    }
}

/// Index of the first member that failed, with its error.
pub type MemberFailure = (usize, Error);

/// Runs all members concurrently; results are ordered by member index and
/// do not depend on the thread count. `inspect` sees each finished member
/// and returns what is kept of it.
pub fn run_ensemble_with<T, F>(
    config: &ExperimentConfig,
    inspect: F,
) -> Result<(Vec<T>, Option<MemberFailure>)>
where
    T: Send,
    F: Fn(MemberOutcome) -> T + Sync,
{
    config.validate()?;
    let results: Vec<Result<T>> = (0..config.ensembles)
        .into_par_iter()
        .map(|i| run_member(config, i).map(&inspect))
        .collect();
    let mut kept = Vec::new();
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => kept.push(v),
            Err(e) => {
                if failure.is_none() {
                    failure = Some((i, e));
                }
            }
        }
    }
    Ok((kept, failure))
}

pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleRun> {
    let (members, failure) = run_ensemble_with(config, |m| m)?;
    Ok(EnsembleRun { members, failure })
}

/// Two-sided Welch P-values showing whether the leading mode-2 and mode-3
/// loadings separate the planted half from the rest: `(u_1j, u_1k, u_1j u_1k)`.
pub fn coincidence_pvalues(model: &TuckerModel) -> Result<[f64; 3]> {
    let u2 = model.factor(Mode::Two).row(0);
    let u3 = model.factor(Mode::Three).row(0);
    let (m, k) = (u2.len(), u3.len());
    let halves = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let h = v.len() / 2;
        (v[..h].to_vec(), v[h..].to_vec())
    };
    let (a2, b2) = halves(u2);
    let (a3, b3) = halves(u3);
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for kk in 0..k {
        for j in 0..m {
            let v = u2[j] * u3[kk];
            if j < m / 2 && kk < k / 2 {
                inside.push(v)
            } else {
                outside.push(v)
            }
        }
    }
    Ok([
        crate::stats::welch_t_test(&a2, &b2)?.1,
        crate::stats::welch_t_test(&a3, &b3)?.1,
        crate::stats::welch_t_test(&inside, &outside)?.1,
    ])
}
