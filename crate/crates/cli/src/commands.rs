use std::fmt::Write as _;
use std::path::Path;

use btud::datagen::{read_truth_csv, write_truth_csv};
use btud::decomp::{estimate_beta, ConsistencyReport, FitReport, ModelFile};
use btud::experiment::{
    analyze, confusion, decompose, generate, run_ensemble_with, ConfusionReport, Data,
    ExperimentConfig, MemberRow,
};
use btud::linalg::svd;
use btud::select::{read_selection_mask, write_selection_csv, SelectionResult, SigmaFit};
use btud::tensor::{fmt_f64, read_data, write_matrix, write_tensor, DataFile};
use btud::{Matrix, Mode};
use serde::Serialize;

use crate::args::{
    DecomposeArgs, EnsembleArgs, EvaluateArgs, GenerateArgs, ReportArgs, SelectArgs,
};
use crate::config::resolve;
use crate::output::{read_file, Failure, Outputs};

/// Settings shared by every subcommand.
pub struct Globals<'a> {
    pub seed: Option<u64>,
    pub out: &'a Outputs,
}

fn load_data(path: &Path) -> Result<DataFile, Failure> {
    let bytes = read_file(path)?;
    read_data(bytes.as_slice()).map_err(|e| Failure::from(e).at(path))
}

fn load_model(path: &Path) -> Result<ModelFile, Failure> {
    let bytes = read_file(path)?;
    let text =
        String::from_utf8(bytes).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    ModelFile::from_json(&text).map_err(|e| {
        // a model file that does not describe a valid model is unreadable input
        let f = Failure::from(e);
        Failure::io(f.message).at(path)
    })
}

fn load_mask(path: &Path) -> Result<Vec<bool>, Failure> {
    read_selection_mask(read_file(path)?.as_slice()).map_err(|e| Failure::from(e).at(path))
}

fn load_truth(path: &Path) -> Result<Vec<bool>, Failure> {
    read_truth_csv(read_file(path)?.as_slice()).map_err(|e| Failure::from(e).at(path))
}

fn into_data(file: DataFile) -> Data {
    match file {
        DataFile::Tensor(t) => Data::Tensor(t),
        DataFile::Matrix(m) => Data::Matrix(m),
    }
}

pub fn generate_cmd(args: &GenerateArgs, g: &Globals) -> Result<(), Failure> {
    let config = resolve(&args.config, g.seed)?;
    let seed = config.member_seed(0);
    let (data, truth) = generate(&config, seed)?;
    match &data {
        Data::Tensor(t) => g.out.write_with("data.txt", |w| write_tensor(w, t))?,
        Data::Matrix(m) => g.out.write_with("data.txt", |w| write_matrix(w, m))?,
    };
    if let Some(truth) = &truth {
        g.out
            .write_with("truth.csv", |w| write_truth_csv(w, truth))?;
    }
    g.out.write_json("config.json", &config)?;
    println!("seed {seed}");
    Ok(())
}

#[derive(Serialize)]
struct FitSummary<'a> {
    report: &'a FitReport,
    consistency: Option<&'a ConsistencyReport>,
    btud_sweeps_from_hooi: Option<usize>,
    beta: f64,
}

pub fn decompose_cmd(args: &DecomposeArgs, g: &Globals) -> Result<(), Failure> {
    let config = resolve(&args.config, g.seed)?;
    let t =
        match load_data(&args.data)? {
            DataFile::Tensor(t) => t,
            DataFile::Matrix(_) => return Err(Failure::usage(
                "decompose needs a T3 tensor; matrix data is handled by `select` through its SVD",
            )),
        };
    let dec = decompose(&t, &config)?;
    let beta = estimate_beta(&t, &dec.model)?;
    let file = ModelFile {
        model: dec.model.clone(),
        alpha: config.alpha,
        beta: Some(beta),
        report: Some(dec.report.clone()),
    };
    g.out
        .write("model.json", (file.to_json()? + "\n").as_bytes())?;
    g.out.write_json(
        "fit.json",
        &FitSummary {
            report: &dec.report,
            consistency: dec.consistency.as_ref(),
            btud_sweeps_from_hooi: dec.btud_sweeps_from_hooi,
            beta,
        },
    )?;
    println!(
        "converged {} after {} iterations, residual {:.6e}",
        dec.report.converged,
        dec.report.sweeps,
        dec.report.final_residual().unwrap_or(f64::NAN)
    );
    if let Some(c) = &dec.consistency {
        println!(
            "self-consistent {} (max mode deviation {:.3e}, core deviation {:.3e})",
            c.self_consistent,
            c.max_mode_deviation(),
            c.core_deviation
        );
    }
    if let Some(s) = dec.btud_sweeps_from_hooi {
        println!("alternating fit from this solution: {s} sweep(s)");
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectionSummary<'a> {
    features: usize,
    selected: usize,
    threshold: f64,
    dof: usize,
    sigma: Option<&'a SigmaFit>,
    beta: Option<f64>,
    config: &'a ExperimentConfig,
}

fn write_selection(
    g: &Globals,
    result: &SelectionResult,
    sigma: Option<&SigmaFit>,
    beta: Option<f64>,
    config: &ExperimentConfig,
) -> Result<(), Failure> {
    g.out
        .write_with("selection.csv", |w| write_selection_csv(w, result))?;
    g.out.write_json(
        "selection.json",
        &SelectionSummary {
            features: result.len(),
            selected: result.selected_count(),
            threshold: result.threshold,
            dof: result.dof,
            sigma,
            beta,
            config,
        },
    )?;
    println!(
        "selected {} of {} features",
        result.selected_count(),
        result.len()
    );
    Ok(())
}

pub fn select_cmd(args: &SelectArgs, g: &Globals) -> Result<(), Failure> {
    let config = resolve(&args.config, g.seed)?;
    let data = into_data(load_data(&args.data)?);
    match (&data, &args.model) {
        (Data::Tensor(t), Some(path)) => {
            let file = load_model(path)?;
            if file.model.dims() != t.dims() {
                return Err(Failure::usage(format!(
                    "model dims {:?} do not match data dims {:?}",
                    file.model.dims(),
                    t.dims()
                )));
            }
            let (result, sigma) = btud::experiment::select_from_model(t, &file.model, &config)?;
            let beta = estimate_beta(t, &file.model)?;
            write_selection(g, &result, sigma.as_ref(), Some(beta), &config)
        }
        (Data::Matrix(_), Some(_)) => Err(Failure::usage("--model applies to tensor data only")),
        _ => {
            let o = analyze(&data, None, &config, 0, config.seed)?;
            write_selection(g, &o.selection, o.sigma.as_ref(), o.beta, &config)
        }
    }
}

pub fn evaluate_cmd(args: &EvaluateArgs, g: &Globals) -> Result<(), Failure> {
    let selected = load_mask(&args.selection)?;
    let truth = load_truth(&args.truth)?;
    let c = confusion(&selected, &truth)?;
    g.out.write_json("confusion.json", &c)?;
    println!("tp {} fp {} fn {} tn {}", c.tp, c.fp, c.fn_, c.tn);
    Ok(())
}

#[derive(Serialize)]
struct EnsembleSummary<'a> {
    config: &'a ExperimentConfig,
    report: &'a ConfusionReport,
    /// First failing member and its error, when the run was cut short.
    failure: Option<(usize, String)>,
}

fn members_csv(rows: &[MemberRow]) -> String {
    let mut s = String::from(
        "member,seed,selected,tn,fn,fp,tp,converged,iterations,self_consistent,max_mode_deviation,btud_sweeps\n",
    );
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        let c = r.confusion;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index + 1,
            r.seed,
            r.selected,
            opt(c.map(|c| c.tn.to_string())),
            opt(c.map(|c| c.fn_.to_string())),
            opt(c.map(|c| c.fp.to_string())),
            opt(c.map(|c| c.tp.to_string())),
            opt(r.converged.map(|b| u8::from(b).to_string())),
            opt(r.iterations.map(|n| n.to_string())),
            opt(r.self_consistent.map(|b| u8::from(b).to_string())),
            opt(r.max_mode_deviation.map(fmt_f64)),
            opt(r.btud_sweeps_from_hooi.map(|n| n.to_string())),
        );
    }
    s
}

pub fn ensemble_cmd(args: &EnsembleArgs, g: &Globals) -> Result<(), Failure> {
    let mut config = resolve(&args.config, g.seed)?;
    if let Some(n) = args.ensembles {
        config.ensembles = n;
        config.validate()?;
    }
    let (rows, failure) = run_ensemble_with(&config, |o| MemberRow::from_outcome(&o))?;
    let report = ConfusionReport::from_rows(rows);
    g.out
        .write("members.csv", members_csv(&report.rows).as_bytes())?;
    g.out.write_json(
        "ensemble.json",
        &EnsembleSummary {
            config: &config,
            report: &report,
            failure: failure.as_ref().map(|(i, e)| (i + 1, e.to_string())),
        },
    )?;
    if let Some(m) = &report.mean {
        println!(
            "{} members: mean tp {:.2} fp {:.2} fn {:.2} tn {:.2}",
            report.ensembles, m.tp, m.fp, m.fn_, m.tn
        );
    } else {
        println!(
            "{} members: mean selected {:.2}",
            report.ensembles, report.mean_selected
        );
    }
    match failure {
        Some((i, e)) => {
            let f = Failure::from(e);
            Err(Failure {
                message: format!("member {} failed: {}", i + 1, f.message),
                ..f
            })
        }
        None => Ok(()),
    }
}

/// CSV with a 1-based index column followed by one column per component.
fn loadings_csv(index: &str, u: &Matrix, extra: &[(&str, &dyn Fn(usize) -> String)]) -> String {
    // `u` holds components as rows
    let mut s = String::from(index);
    for l in 0..u.rows() {
        let _ = write!(s, ",u{}", l + 1);
    }
    for (name, _) in extra {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for i in 0..u.cols() {
        let _ = write!(s, "{}", i + 1);
        for l in 0..u.rows() {
            let _ = write!(s, ",{}", fmt_f64(u[(l, i)]));
        }
        for (_, f) in extra {
            let _ = write!(s, ",{}", f(i));
        }
        s.push('\n');
    }
    s
}

fn index_list(mask: &[bool], want: bool) -> String {
    let mut s = String::from("feature_index\n");
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m == want) {
        let _ = writeln!(s, "{}", i + 1);
    }
    s
}

pub fn report_cmd(args: &ReportArgs, g: &Globals) -> Result<(), Failure> {
    let data = load_data(&args.data)?;
    let mask = load_mask(&args.selection)?;
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    let features = match &data {
        DataFile::Tensor(t) => t.dims().0,
        DataFile::Matrix(m) => m.rows(),
    };
    for (name, len) in [
        ("selection", Some(mask.len())),
        ("truth", truth.as_ref().map(Vec::len)),
    ] {
        if let Some(len) = len.filter(|&n| n != features) {
            return Err(Failure::usage(format!(
                "data has {features} features but the {name} file has {len}"
            )));
        }
    }
    let flag = |v: &[bool], i: usize| u8::from(v[i]).to_string();
    let sel_col = |i: usize| flag(&mask, i);
    let truth_col = |i: usize| flag(truth.as_deref().unwrap_or(&[]), i);
    let mut extra: Vec<(&str, &dyn Fn(usize) -> String)> = vec![("selected", &sel_col)];
    if truth.is_some() {
        extra.push(("truth", &truth_col));
    }

    match &data {
        DataFile::Tensor(t) => {
            let path = args
                .model
                .as_deref()
                .ok_or_else(|| Failure::usage("tensor data needs --model from `decompose`"))?;
            let file = load_model(path)?;
            if file.model.dims() != t.dims() {
                return Err(Failure::usage("model and data dimensions differ"));
            }
            let m = &file.model;
            g.out.write(
                "u1i.csv",
                loadings_csv("i", m.factor(Mode::One), &extra).as_bytes(),
            )?;
            g.out.write(
                "u2j.csv",
                loadings_csv("j", m.factor(Mode::Two), &[]).as_bytes(),
            )?;
            g.out.write(
                "u3k.csv",
                loadings_csv("k", m.factor(Mode::Three), &[]).as_bytes(),
            )?;
            let (l1, l2, l3) = m.ranks();
            let mut core = String::from("l1,l2,l3,value\n");
            for c in 0..l3 {
                for b in 0..l2 {
                    for a in 0..l1 {
                        let _ = writeln!(
                            core,
                            "{},{},{},{}",
                            a + 1,
                            b + 1,
                            c + 1,
                            fmt_f64(m.core().get(a, b, c))
                        );
                    }
                }
            }
            g.out.write("core.csv", core.as_bytes())?;
        }
        DataFile::Matrix(x) => {
            if args.model.is_some() {
                return Err(Failure::usage("--model applies to tensor data only"));
            }
            let count = args.components.clamp(1, x.rows().min(x.cols()));
            let dec = svd(x, Some(count))?;
            g.out.write(
                "u_li.csv",
                loadings_csv("i", &dec.u.transpose(), &extra).as_bytes(),
            )?;
            g.out.write(
                "u_lj.csv",
                loadings_csv("j", &dec.v.transpose(), &[]).as_bytes(),
            )?;
            let mut sv = String::from("component,singular_value\n");
            for (l, s) in dec.s.iter().enumerate() {
                let _ = writeln!(sv, "{},{}", l + 1, fmt_f64(*s));
            }
            g.out.write("singular_values.csv", sv.as_bytes())?;
        }
    }
    g.out
        .write("selected_rows.csv", index_list(&mask, true).as_bytes())?;
    g.out
        .write("unselected_rows.csv", index_list(&mask, false).as_bytes())?;
    Ok(())
}
