use std::path::{Path, PathBuf};

use anyhow::Result;
use dht_core::bc::{bc_diff_region, bc_equal_region};
use dht_core::dmc::{dmc_exponents, dmc_no_uep, dmc_optimize, DmcReport, DmcScheme};
use dht_core::gaussian::{
    default_budget, linspace, mac_gauss_achievable, mac_gauss_separate, mac_gauss_upper, mac_ortho_gauss_optimal,
    p2p_gauss_optimal, power_sweep, GaussianSpec,
};
use dht_core::mac::{mac_exponents, mac_optimize, MacReport};
use dht_core::problem::ExponentReport;
use dht_core::repro::{exponent_curves, grid, regime_table, TableSettings};
use dht_core::search::SearchBudget;
use dht_core::simcode::{estimate_errors, mu_guideline, SchemeConfig};
use serde_json::json;

use crate::docs::{load, BcAux, BcDoc, DmcAuxDoc, DmcDoc, InputError, MacAuxDoc, MacDoc, SimulateDoc};
use crate::table::{num, opt, write_csv, write_json, Provenance};

/// How a command that produced its artifact ended.
pub enum Status {
    Done,
    /// The artifact was written, but the given auxiliary violates a rate
    /// condition.
    Infeasible(String),
}

fn input_check(flag: &str, ok: bool, want: &str) -> Result<(), InputError> {
    if ok {
        Ok(())
    } else {
        Err(InputError(format!("--{flag} must be {want}")))
    }
}

pub struct Budget {
    pub seed: u64,
    pub starts: Option<usize>,
    pub evals: Option<usize>,
}

impl Budget {
    pub fn resolve(&self, base: SearchBudget) -> SearchBudget {
        SearchBudget::new(self.starts.unwrap_or(base.starts), self.evals.unwrap_or(base.evals_per_start), self.seed)
    }
}

fn budget_fields(prov: Provenance, b: &SearchBudget) -> Provenance {
    prov.with("seed", b.seed).with("starts", b.starts).with("evals", b.evals_per_start)
}

fn report_json(r: &ExponentReport, tol: f64) -> serde_json::Value {
    json!({
        "theta": r.theta,
        "components": r.components,
        "active": r.active,
        "active_set": r.active_set(tol),
        "feasible": r.feasible,
    })
}

fn dmc_rates(r: &DmcReport, scheme: DmcScheme) -> serde_json::Value {
    let channel = match scheme {
        DmcScheme::Uep => r.channel_rate,
        DmcScheme::NoUep => r.channel_rate_no_uep,
    };
    json!({ "source_rate": r.source_rate, "channel_rate": channel })
}

pub fn dmc(input: &Path, output: Option<&Path>, scheme: DmcScheme, budget: &Budget, tol: f64) -> Result<Status> {
    let doc: DmcDoc = load(input)?;
    let (prob, aux) = doc.resolve().map_err(|e| e.at(input))?;
    let scheme_name = match scheme {
        DmcScheme::Uep => "uep",
        DmcScheme::NoUep => "no_uep",
    };
    let (report, aux, search) = match aux {
        Some(aux) => (dmc_exponents(&prob, &aux)?, aux, serde_json::Value::Null),
        None => {
            let b = budget.resolve(SearchBudget::default());
            let opt = match scheme {
                DmcScheme::Uep => dmc_optimize(&prob, &b)?,
                DmcScheme::NoUep => dmc_no_uep(&prob, &b)?,
            };
            let search = json!({ "seed": b.seed, "starts": b.starts, "evals": b.evals_per_start, "evaluations": opt.evaluations });
            (opt.report, opt.aux, search)
        }
    };
    let exp = match scheme {
        DmcScheme::Uep => report.exponent_report(),
        DmcScheme::NoUep => report.no_uep_report(),
    };
    let doc = json!({
        "scheme": scheme_name,
        "report": report_json(&exp, tol),
        "rates": dmc_rates(&report, scheme),
        "aux": DmcAuxDoc::of(&aux),
        "search": search,
    });
    write_json(output, &doc)?;
    Ok(if exp.feasible { Status::Done } else { Status::Infeasible("auxiliary violates the rate condition".into()) })
}

fn mac_rows(report: &MacReport) -> Vec<Vec<String>> {
    report
        .components
        .iter()
        .map(|(c, v)| vec![c.name().to_string(), num(v.divergence), num(v.offset), num(v.value)])
        .collect()
}

pub fn mac(input: &Path, output: Option<&Path>, csv: Option<&Path>, budget: &Budget, tol: f64) -> Result<Status> {
    let doc: MacDoc = load(input)?;
    doc.problem.validate().map_err(|e| InputError(format!("field `problem`: {e}")).at(input))?;
    let prob = &doc.problem;
    let mut prov = Provenance::new("mac");
    let (report, aux, search) = match &doc.aux {
        Some(a) => {
            let aux = a.build(prob).map_err(|e| e.at(input))?;
            (mac_exponents(prob, &aux)?, aux, serde_json::Value::Null)
        }
        None => {
            let b = budget.resolve(SearchBudget::default());
            prov = budget_fields(prov, &b);
            let opt = mac_optimize(prob, (doc.s_sizes[0], doc.s_sizes[1]), doc.maps.clone(), &b)?;
            let search = json!({ "seed": b.seed, "starts": b.starts, "evals": b.evals_per_start, "evaluations": opt.evaluations });
            (opt.report, opt.aux, search)
        }
    };
    let exp = report.exponent_report();
    let conditions: Vec<_> = report.rate_conditions.iter().map(|(l, r)| json!({ "left": l, "right": r })).collect();
    write_json(
        output,
        &json!({ "report": report_json(&exp, tol), "rate_conditions": conditions, "aux": MacAuxDoc::of(&aux), "search": search }),
    )?;
    if let Some(path) = csv {
        write_csv(Some(path), &prov, &["component", "divergence", "offset", "value"], &mac_rows(&report))?;
    }
    Ok(if exp.feasible { Status::Done } else { Status::Infeasible("auxiliary violates a rate condition".into()) })
}

pub fn bc(input: &Path, output: Option<&Path>, csv: Option<&Path>) -> Result<Status> {
    let doc: BcDoc = load(input)?;
    let (prob, labeling, aux) = doc.resolve().map_err(|e| e.at(input))?;
    let region = match &aux {
        BcAux::Equal(a) => bc_equal_region(&prob, labeling, a)?,
        BcAux::Different(a) => bc_diff_region(&prob, labeling, a)?,
    };
    let vertices = region.pareto_vertices();
    write_json(
        output,
        &json!({
            "case": region.case,
            "caps": [region.cap(0), region.cap(1)],
            "sum_cap": region.sum_cap(),
            "marton_penalty": region.marton_penalty,
            "constraints": region.constraints,
            "components": region.components,
            "pareto_vertices": vertices,
        }),
    )?;
    if let Some(path) = csv {
        let rows: Vec<Vec<String>> = vertices.iter().map(|&(a, b)| vec![num(a), num(b)]).collect();
        write_csv(Some(path), &Provenance::new("bc"), &["theta1", "theta2"], &rows)?;
    }
    Ok(Status::Done)
}

pub fn gauss(input: &Path, output: Option<&Path>, budget: &Budget) -> Result<Status> {
    let spec: GaussianSpec = load(input)?;
    let b = budget.resolve(default_budget());
    let hybrid = mac_gauss_achievable(&spec, &b)?;
    let separate = mac_gauss_separate(&spec)?;
    write_json(
        output,
        &json!({
            "spec": spec,
            "p2p_optimal": p2p_gauss_optimal(&spec)?,
            "orthogonal_optimal": mac_ortho_gauss_optimal(&spec)?,
            "mac": {
                "upper": mac_gauss_upper(&spec)?,
                "hybrid": hybrid,
                "separate": separate,
            },
            "search": { "seed": b.seed, "starts": b.starts, "evals": b.evals_per_start },
        }),
    )?;
    Ok(Status::Done)
}

pub struct SimulateArgs {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub n: Vec<usize>,
    pub mu: Option<f64>,
    pub mu60: f64,
    pub trials: u64,
    pub seed: u64,
    pub rate_margin: Option<f64>,
    pub no_uep: bool,
}

pub fn simulate(a: &SimulateArgs) -> Result<Status> {
    let doc: SimulateDoc = load(&a.input)?;
    let (prob, aux) = doc.resolve().map_err(|e| e.at(&a.input))?;
    input_check("trials", a.trials > 0, "positive")?;
    input_check("n", a.n.iter().all(|&n| n > 0), "a list of positive blocklengths")?;
    let rows: Vec<Vec<String>> = a
        .n
        .iter()
        .map(|&n| {
            let mu = a.mu.unwrap_or_else(|| mu_guideline(n, a.mu60));
            let run = || -> dht_core::Result<_> {
                let mut cfg = SchemeConfig::new(&prob, &aux, n, mu, a.seed)?;
                if let Some(m) = a.rate_margin {
                    cfg = cfg.with_rate_margin(m);
                }
                if a.no_uep {
                    cfg = cfg.without_uep();
                }
                estimate_errors(&cfg, a.trials)
            };
            match run() {
                Ok(r) => vec![
                    n.to_string(),
                    num(mu),
                    a.trials.to_string(),
                    num(r.alpha_hat),
                    num(r.beta_hat),
                    opt(r.exponent_hat),
                    num(r.beta_radius()),
                    String::new(),
                ],
                Err(e) => vec![n.to_string(), num(mu), a.trials.to_string(), String::new(), String::new(), String::new(), String::new(), e.to_string()],
            }
        })
        .collect();
    let mut prov = Provenance::new("simulate").with("seed", a.seed).with("trials", a.trials).with("uep", !a.no_uep);
    prov = match a.mu {
        Some(mu) => prov.with("mu", mu),
        None => prov.with("mu60", a.mu60),
    };
    if let Some(m) = a.rate_margin {
        prov = prov.with("rate_margin", m);
    }
    write_csv(
        a.output.as_deref(),
        &prov,
        &["n", "mu", "trials", "alpha_hat", "beta_hat", "exponent_hat", "ci_radius", "error"],
        &rows,
    )?;
    Ok(Status::Done)
}

pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

pub fn repro_fig3(output: Option<&Path>, sweep: &Sweep, labels: bool, budget: &Budget) -> Result<Status> {
    input_check("step", sweep.step > 0.0, "positive")?;
    let b = budget.resolve(SearchBudget::default());
    let rs = grid(sweep.lo, sweep.hi, sweep.step);
    let rows: Vec<Vec<String>> = exponent_curves(&rs, &b, labels)
        .into_iter()
        .map(|p| vec![num(p.r), num(p.theta_uep), num(p.theta_no_uep), p.label, p.error.unwrap_or_default()])
        .collect();
    let prov = budget_fields(Provenance::new("repro-fig3"), &b)
        .with("lo", sweep.lo)
        .with("hi", sweep.hi)
        .with("step", sweep.step)
        .with("labels", labels);
    write_csv(output, &prov, &["r", "theta_uep", "theta_nouep", "active_label", "error"], &rows)?;
    Ok(Status::Done)
}

pub fn repro_table1(output: Option<&Path>, sweep: &Sweep, resolution: f64, tol: f64, budget: &Budget) -> Result<Status> {
    input_check("step", sweep.step > 0.0, "positive")?;
    input_check("resolution", resolution > 0.0, "positive")?;
    let b = budget.resolve(SearchBudget::default());
    let set = TableSettings { lo: sweep.lo, hi: sweep.hi, step: sweep.step, resolution, tol, budget: b.clone() };
    let table = regime_table(&set)?;
    let scheme = |s: DmcScheme| match s {
        DmcScheme::Uep => "uep",
        DmcScheme::NoUep => "no_uep",
    };
    let rows: Vec<Vec<String>> = table
        .uep
        .iter()
        .chain(&table.no_uep)
        .map(|bd| vec![scheme(bd.scheme).to_string(), num(bd.r), bd.below.clone(), bd.above.clone()])
        .collect();
    let prov = budget_fields(Provenance::new("repro-table1"), &b)
        .with("lo", sweep.lo)
        .with("hi", sweep.hi)
        .with("step", sweep.step)
        .with("resolution", resolution)
        .with("tol", tol);
    write_csv(output, &prov, &["scheme", "r", "below", "above"], &rows)?;
    Ok(Status::Done)
}

pub fn repro_fig7(input: Option<&Path>, output: Option<&Path>, lo: f64, hi: f64, points: usize, budget: &Budget) -> Result<Status> {
    let base = match input {
        Some(p) => load::<GaussianSpec>(p)?,
        None => GaussianSpec::fig7(0.0),
    };
    input_check("lo", lo >= 0.0 && lo <= hi, "nonnegative and at most --hi")?;
    let b = budget.resolve(default_budget());
    let rows: Vec<Vec<String>> = power_sweep(&base, &linspace(lo, hi, points), &b)?
        .iter()
        .map(|p| vec![num(p.power), num(p.hybrid), num(p.separate), num(p.upper), num(p.upper - p.hybrid)])
        .collect();
    let prov = budget_fields(Provenance::new("repro-fig7"), &b)
        .with("rho", base.rho)
        .with("sigma0_sq", base.sigma0_sq)
        .with("sigmay_sq", base.sigmay_sq)
        .with("sigma_sq", base.sigma_sq)
        .with("lo", lo)
        .with("hi", hi)
        .with("points", points);
    write_csv(output, &prov, &["P", "achievable_hybrid", "achievable_separate", "upper", "gap"], &rows)?;
    Ok(Status::Done)
}
