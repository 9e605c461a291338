use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use sbo_core::dynamics::{conserved_quantities, evolve};
use sbo_core::gibbs::{
    decay_ratio, fernique_tail, partition_estimate, sample_free, sample_gibbs, sample_rng,
    tightness_check, weight_moment, GibbsConfig, TailFit,
};
use sbo_core::illposed::scaling_fit;
use sbo_core::invariance::run_invariance;
use sbo_core::resonance::{dirichlet_search, multiplier_sup, resonant_set, Region};
use sbo_core::spectral::sobolev_norm;
use sbo_core::stats::linear_fit;
use sbo_core::{RealSpectralField, SpectralField, SpectralPair};

use crate::artifact::{emit_binary, emit_record, emit_table, ArtifactRecord, RunMeta, Table};
use crate::checkpoint;
use crate::config::{ExperimentConfig, InitialData};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    GibbsSample,
    Invariance,
    MeasureChecks,
    Resonance,
    Illposed,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::GibbsSample => "gibbs-sample",
            Command::Invariance => "invariance",
            Command::MeasureChecks => "measure-checks",
            Command::Resonance => "resonance",
            Command::Illposed => "illposed",
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    meta: RunMeta,
    command: Command,
    records: Vec<ArtifactRecord>,
}

impl Ctx<'_> {
    fn core<T>(&self, r: sbo_core::Result<T>) -> Result<T, CliError> {
        r.map_err(|source| CliError::Runtime {
            command: self.command.name(),
            seed: self.cfg.run.seed,
            source,
        })
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        let r = emit_table(self.dir, name, t, self.cfg.run.format, &self.meta)?;
        self.records.push(r);
        Ok(())
    }

    fn record(&mut self, name: &str, v: &impl Serialize) -> Result<(), CliError> {
        let r = emit_record(self.dir, name, v, &self.meta)?;
        self.records.push(r);
        Ok(())
    }
}

/// Uniform coefficients on `[-1/2, 1/2]²` from stream 0 of `seed`, with each
/// component rescaled to `amplitude` in L² of the coefficients.
pub fn random_initial(n_max: usize, seed: u64, amplitude: f64) -> sbo_core::Result<SpectralPair> {
    let mut rng = sample_rng(seed, 0);
    let mut draw = |k: usize| -> Vec<Complex64> {
        (0..k)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    };
    let u = SpectralField::from_coeffs(n_max, draw(2 * n_max + 1))?;
    let v = RealSpectralField::from_half(n_max, &draw(n_max + 1))?;
    let (nu, nv) = (sobolev_norm(&u, 0.0), sobolev_norm(v.as_field(), 0.0));
    SpectralPair::new(u.scale(amplitude / nu), v.scale(amplitude / nv))
}

pub fn initial_state(cfg: &ExperimentConfig) -> Result<SpectralPair, CliError> {
    let n = cfg.gibbs.n_max;
    let wrap = |source| CliError::Runtime {
        command: "simulate",
        seed: cfg.run.seed,
        source,
    };
    match cfg.simulate.initial {
        InitialData::Zero => SpectralPair::zeros(n).map_err(wrap),
        InitialData::Random => random_initial(n, cfg.run.seed, cfg.simulate.amplitude).map_err(wrap),
        InitialData::Gibbs => {
            let g = cfg.gibbs_config()?;
            sample_free(&g, &mut sample_rng(g.seed, 0)).map_err(wrap)
        }
    }
}

/// Runs one command and writes its artifacts into `dir`.
pub fn run(command: Command, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<ArtifactRecord>, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut ctx = Ctx {
        cfg,
        dir,
        meta: RunMeta {
            command: command.name().to_string(),
            config: cfg.echo(),
        },
        command,
        records: Vec::new(),
    };
    match command {
        Command::Simulate => simulate(&mut ctx)?,
        Command::GibbsSample => gibbs_sample(&mut ctx)?,
        Command::Invariance => invariance(&mut ctx)?,
        Command::MeasureChecks => measure_checks(&mut ctx)?,
        Command::Resonance => resonance(&mut ctx)?,
        Command::Illposed => illposed(&mut ctx)?,
    }
    let manifest = crate::artifact::emit_manifest(dir, &ctx.records, &ctx.meta)?;
    ctx.records.push(manifest);
    Ok(ctx.records)
}

fn simulate(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let params = cfg.params()?;
    let state = initial_state(cfg)?;
    let ig = &cfg.integrator;
    let (times, states) = if ig.t_final == 0.0 {
        (vec![0.0], vec![state])
    } else {
        let tr = ctx.core(evolve(&state, ig.t_final, ig.dt, &params, ig.record_every))?;
        (tr.times, tr.states)
    };
    let mut series = Table::new(&["t", "E1", "E2", "E3", "H"]);
    for (t, s) in times.iter().zip(&states) {
        let c = ctx.core(conserved_quantities(s, &params))?;
        series.push(vec![(*t).into(), c.e1.into(), c.e2.into(), c.e3.into(), c.h.into()]);
    }
    ctx.table("conservation", &series)?;
    let last = states.last().expect("at least the initial state");
    let mut modes = Table::new(&["n", "u_re", "u_im", "v_re", "v_im"]);
    for ((n, u), (_, v)) in last.u.modes().zip(last.v.as_field().modes()) {
        modes.push(vec![n.into(), u.re.into(), u.im.into(), v.re.into(), v.im.into()]);
    }
    ctx.table("final_state", &modes)
}

#[derive(Serialize)]
struct EnsembleSummary {
    samples: usize,
    effective_sample_size: f64,
    degenerate: bool,
    max_log_weight: f64,
    partition_log_mean: f64,
    partition_rel_std_err: f64,
    box_volume: f64,
}

fn gibbs_sample(ctx: &mut Ctx) -> Result<(), CliError> {
    let g = ctx.cfg.gibbs_config()?;
    let ens = ctx.core(sample_gibbs(&g))?;
    let bytes = checkpoint::encode(&ens, &ctx.meta.config);
    let rec = emit_binary(ctx.dir, "ensemble.ckpt", &bytes)?;
    ctx.records.push(rec);
    let weights = ens.weights();
    let mut t = Table::new(&["index", "log_weight", "weight", "l2_u", "mean_v"]);
    for (i, (s, w)) in ens.samples.iter().zip(&weights).enumerate() {
        t.push(vec![
            i.into(),
            s.log_weight.into(),
            (*w).into(),
            sobolev_norm(&s.state.u, 0.0).into(),
            s.state.v.coeff(0).re.into(),
        ]);
    }
    ctx.table("weights", &t)?;
    let part = ctx.core(partition_estimate(&g))?;
    let summary = EnsembleSummary {
        samples: ens.samples.len(),
        effective_sample_size: ens.effective_sample_size(),
        degenerate: ens.degenerate(),
        max_log_weight: ens.log_weights().into_iter().fold(f64::NEG_INFINITY, f64::max),
        partition_log_mean: part.normalized.log_mean,
        partition_rel_std_err: part.normalized.rel_std_err,
        box_volume: part.box_volume,
    };
    ctx.record("ensemble_summary", &summary)
}

fn invariance(ctx: &mut Ctx) -> Result<(), CliError> {
    let g = ctx.cfg.gibbs_config()?;
    let ig = &ctx.cfg.integrator;
    let iv = &ctx.cfg.invariance;
    let run = ctx.core(run_invariance(&g, ig.t_final, ig.dt))?;
    let report = run.report(iv.threshold);
    let ks = ctx.core(run.distribution_test(&iv.ks_observable, iv.ks_bins, iv.ks_permutations, g.seed))?;
    let mut t = Table::new(&[
        "observable",
        "mean_initial",
        "std_err_initial",
        "mean_final",
        "std_err_final",
        "z",
        "pass",
    ]);
    for o in &report.observables {
        t.push(vec![
            o.name.as_str().into(),
            o.mean_initial.into(),
            o.std_err_initial.into(),
            o.mean_final.into(),
            o.std_err_final.into(),
            o.z.into(),
            o.pass.into(),
        ]);
    }
    ctx.table("observables", &t)?;
    ctx.record("invariance_report", &report)?;
    ctx.record("ks_test", &ks)
}

fn tail_rows(t: &mut Table, pts: &mut Table, n: usize, kind: &str, f: &TailFit) {
    t.push(vec![
        n.into(),
        kind.into(),
        f.rate.into(),
        f.fit.r_squared.into(),
        f.levels.len().into(),
        f.dropped.len().into(),
    ]);
    for (k, p) in f.levels.iter().zip(&f.exceedance) {
        pts.push(vec![n.into(), kind.into(), (*k).into(), (*p).into()]);
    }
}

fn measure_checks(ctx: &mut Ctx) -> Result<(), CliError> {
    let base = ctx.cfg.gibbs_config()?;
    let m = ctx.cfg.measure.clone();
    let grid = m.grid();
    let mut fits = Table::new(&["n_max", "kind", "rate", "r_squared", "points", "dropped"]);
    let mut pts = Table::new(&["n_max", "kind", "K", "exceedance"]);
    for &n in &m.n_max_list {
        let c = GibbsConfig {
            n_max: n,
            ensemble_size: m.tail_samples,
            ..base
        };
        let f = ctx.core(fernique_tail(&c, c.s1, c.s2, &grid))?;
        tail_rows(&mut fits, &mut pts, n, "fernique", &f);
        let f = ctx.core(tightness_check(&c, &grid))?;
        tail_rows(&mut fits, &mut pts, n, "tightness", &f);
    }
    ctx.table("tail_fits", &fits)?;
    ctx.table("tail_points", &pts)?;

    let mut d = Table::new(&["M", "delta", "median", "p95", "trials"]);
    for &k in &m.decay_log2_m {
        let s = ctx.core(decay_ratio(1 << k, m.decay_delta, base.seed, m.decay_trials))?;
        d.push(vec![s.m.into(), s.delta.into(), s.median.into(), s.p95.into(), s.trials.into()]);
    }
    ctx.table("decay", &d)?;

    let mut w = Table::new(&["r", "log_mean", "rel_std_err", "draws"]);
    for &r in &m.moment_orders {
        let e = ctx.core(weight_moment(&base, r))?;
        w.push(vec![r.into(), e.log_mean.into(), e.rel_std_err.into(), e.draws.into()]);
    }
    ctx.table("weight_moments", &w)
}

fn region_label(r: Region) -> &'static str {
    match r {
        Region::A => "A",
        Region::AComplement => "A^c",
    }
}

#[derive(Serialize)]
struct DirichletSummary {
    gamma: f64,
    c_gamma: f64,
    rational_denominator: Option<i64>,
    candidates: usize,
    verified: usize,
}

fn resonance(ctx: &mut Ctx) -> Result<(), CliError> {
    let r = ctx.cfg.resonance.clone();
    let set = ctx.core(resonant_set(r.set_cap, r.gamma))?;
    let mut t = Table::new(&["n", "n1", "n2", "R", "Q", "in_A", "boundary"]);
    for x in &set {
        t.push(vec![
            x.n.into(),
            x.n1.into(),
            x.n2.into(),
            x.r.into(),
            x.q.into(),
            x.in_a.into(),
            x.boundary.into(),
        ]);
    }
    if !t.rows.is_empty() {
        ctx.table("resonant_set", &t)?;
    }

    let mut sups = Table::new(&["s", "region", "cap", "value", "n", "n1", "n2"]);
    let mut slopes = Table::new(&["s", "region", "slope", "r_squared"]);
    for &s in &r.s_values {
        for region in [Region::AComplement, Region::A] {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for &cap in &r.caps {
                let m = ctx.core(multiplier_sup(s, r.gamma, cap, region, r.b))?;
                sups.push(vec![
                    s.into(),
                    region_label(region).into(),
                    cap.into(),
                    m.value.into(),
                    m.n.into(),
                    m.n1.into(),
                    m.n2.into(),
                ]);
                x.push((cap as f64).ln());
                y.push(m.value.ln());
            }
            if let Some(f) = linear_fit(&x, &y) {
                slopes.push(vec![s.into(), region_label(region).into(), f.slope.into(), f.r_squared.into()]);
            }
        }
    }
    ctx.table("multiplier_sup", &sups)?;
    if !slopes.rows.is_empty() {
        ctx.table("multiplier_slopes", &slopes)?;
    }

    if r.dirichlet_gamma.abs() != 1.0 {
        let rep = ctx.core(dirichlet_search(r.dirichlet_gamma, r.dirichlet_cap))?;
        let mut d = Table::new(&["N", "n1", "Q_abs", "scan_min", "verified"]);
        for c in &rep.candidates {
            d.push(vec![c.n.into(), c.n1.into(), c.q_abs.into(), c.scan_min.into(), c.verified.into()]);
        }
        if !d.rows.is_empty() {
            ctx.table("dirichlet", &d)?;
        }
        ctx.record(
            "dirichlet_summary",
            &DirichletSummary {
                gamma: rep.gamma,
                c_gamma: rep.c_gamma,
                rational_denominator: rep.rational_denominator,
                candidates: rep.candidates.len(),
                verified: rep.candidates.iter().filter(|c| c.verified).count(),
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScalingSummary {
    s: f64,
    gamma: f64,
    beta: f64,
    t: f64,
    slope: f64,
    intercept: f64,
    residual: f64,
    r_squared: f64,
    refused: Vec<i64>,
}

fn illposed(ctx: &mut Ctx) -> Result<(), CliError> {
    let ip = ctx.cfg.illposed.clone();
    let fit = ctx.core(scaling_fit(ip.s, ip.gamma, ip.beta, ip.t, &ip.n_list))?;
    let mut t = Table::new(&["N", "norm", "family", "Q"]);
    for r in &fit.rows {
        t.push(vec![r.n.into(), r.norm.into(), r.family.label().into(), r.q.into()]);
    }
    ctx.table("scaling", &t)?;
    ctx.record(
        "scaling_fit",
        &ScalingSummary {
            s: ip.s,
            gamma: ip.gamma,
            beta: ip.beta,
            t: ip.t,
            slope: fit.slope,
            intercept: fit.intercept,
            residual: fit.residual,
            r_squared: fit.fit.r_squared,
            refused: fit.refused,
        },
    )
}
