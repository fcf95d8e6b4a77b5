//! Subcommand bodies. Each returns its tables and plot data; file output
//! happens in the caller.

use crate::config::{Command, GameChoice, RunConfig};
use crate::output::{read_plot, write_csv_to, write_plot_to, Cell, PlotData, Series, Table};
use std::fmt;
use wind::experiments::{self, ExperimentResult, ExperimentSpec, GameSource, InitKind};
use wind::{
    avg_l1, bon_closed_form_operator, bon_exact_operator, duality_gap, fixed_point_residual,
    iterative_bon, win_rate, wind_exact_solve, PreferenceGame, SolverConfig, TabularPolicy, Trace,
};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<wind::Error> for CliError {
    fn from(e: wind::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        match e {
            crate::config::ConfigError::Io(m) => CliError::Io(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub trace: Option<Table>,
    pub summary: Option<Table>,
    pub plot: Option<PlotData>,
    /// Human-readable report for stdout.
    pub report: String,
    /// False when a selftest check failed.
    pub ok: bool,
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Artifacts, CliError> {
    match cmd {
        Command::Ibon => ibon(cfg),
        Command::WindExact => wind_exact(cfg),
        Command::WindSample => wind_sample(cfg),
        Command::SweepBeta => sweep_beta(cfg),
        Command::BoundCheck => bound_check(cfg),
        Command::NashGap => nash_gap(cfg),
        Command::Selftest => selftest(),
    }
}

fn game_source(cfg: &RunConfig) -> GameSource {
    match cfg.game {
        GameChoice::Demo => GameSource::Explicit(PreferenceGame::two_response_demo()),
        GameChoice::Random => GameSource::Generated {
            num_prompts: cfg.num_prompts,
            num_responses: cfg.num_responses,
        },
    }
}

fn spec_for(cfg: &RunConfig, base: ExperimentSpec) -> Result<ExperimentSpec, CliError> {
    Ok(ExperimentSpec {
        game: game_source(cfg),
        seeds: cfg.seeds(),
        iters: cfg.iters,
        eta: cfg.eta,
        n: cfg.n,
        init: if cfg.dirichlet_init {
            InitKind::Dirichlet
        } else {
            InitKind::UniformRef
        },
        mode: cfg.bon_mode()?,
        top_mass: cfg.top_mass,
        loss: cfg.loss,
        nce_p: cfg.nce_p,
        judge_delta: cfg.delta,
        inner_steps: cfg.inner_steps,
        inner_lr: cfg.inner_lr,
        ..base
    })
}

fn run(spec: &ExperimentSpec) -> Result<Vec<ExperimentResult>, CliError> {
    Ok(experiments::run_all_seeds(spec)?)
}

fn cfg_game(cfg: &RunConfig) -> Result<PreferenceGame, CliError> {
    let spec = spec_for(cfg, ExperimentSpec::no_mixing())?;
    Ok(experiments::generate_game(&spec, cfg.seed)?)
}

fn trace_table(
    trace: &Trace,
    iter_name: &str,
    extra: &[(&str, Cell)],
    prefix: &[(&str, Cell)],
) -> Table {
    let mut cols: Vec<String> = prefix.iter().map(|(n, _)| n.to_string()).collect();
    cols.push(iter_name.into());
    cols.extend(trace.columns().iter().cloned());
    cols.extend(extra.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(cols);
    for (it, vals) in trace.rows() {
        let mut row: Vec<Cell> = prefix.iter().map(|(_, c)| c.clone()).collect();
        row.push(Cell::Int(*it));
        row.extend(vals.iter().map(|v| Cell::Float(*v)));
        row.extend(extra.iter().map(|(_, c)| c.clone()));
        t.push(row);
    }
    t
}

fn append(into: &mut Option<Table>, t: Table) {
    match into {
        Some(acc) => acc.rows.extend(t.rows),
        None => *into = Some(t),
    }
}

fn summary_table(results: &[ExperimentResult], columns: &[&str]) -> Table {
    let mut t = Table::new(columns.iter().copied());
    for r in results {
        for row in &r.summary.rows {
            t.push(
                columns
                    .iter()
                    .map(|c| match r.summary.columns.iter().position(|n| n == c) {
                        Some(k) => integral_cell(c, row[k]),
                        None if *c == "seed" => Cell::Int(r.seed),
                        None => panic!("summary has no column `{c}`"),
                    })
                    .collect(),
            );
        }
    }
    t
}

fn integral_cell(column: &str, v: f64) -> Cell {
    match column {
        "seed" | "M" | "iter" | "round" | "pass" | "converged" | "iters_used" => {
            Cell::Int(v as u64)
        }
        _ => Cell::Float(v),
    }
}

fn ibon(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let spec = spec_for(cfg, ExperimentSpec::no_mixing())?;
    let results = run(&spec)?;
    let first = results[0].trace("distances").expect("distances trace");
    let trace = trace_table(first, "iter", &[], &[]);
    let mut plot = PlotData {
        title: format!(
            "no-mixing distance to the limit policy, seed {}",
            results[0].seed
        ),
        log_y: true,
        series: Vec::new(),
    };
    for (name, col) in [("ibon", "d_l1_ibon"), ("wind", "d_l1_wind")] {
        let mut s = Series::new(name, "iter", col);
        s.points = first
            .iters()
            .into_iter()
            .map(Cell::Int)
            .zip(first.column(col).unwrap())
            .collect();
        plot.series.push(s);
    }
    let summary = summary_table(&results, &["seed", "d_l1_ibon_final", "d_l1_wind_final"]);
    let mut report = String::new();
    for r in &results {
        let row = &r.summary.rows[0];
        report += &format!(
            "seed {}: d_l1 ibon {:.3e}, wind {:.3e}\n",
            r.seed, row[1], row[2]
        );
    }
    Ok(Artifacts {
        trace: Some(trace),
        summary: Some(summary),
        plot: Some(plot),
        report,
        ok: true,
    })
}

fn sweep_beta(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let spec = ExperimentSpec {
        grid: cfg.grid.clone(),
        ..spec_for(cfg, ExperimentSpec::beta_sweep())?
    };
    let results = run(&spec)?;
    let summary = summary_table(&results, &["beta", "d_l1_final", "seed"]);
    let mut trace = None;
    let mut plot = PlotData {
        title: "distance between iterative best-of-n and WIND after T steps".into(),
        log_y: false,
        series: Vec::new(),
    };
    for r in &results {
        for (beta, (_, t)) in spec.grid.iter().zip(&r.traces) {
            append(
                &mut trace,
                trace_table(
                    t,
                    "iter",
                    &[("seed", Cell::Int(r.seed))],
                    &[("beta", Cell::Float(*beta))],
                ),
            );
        }
        let mut s = Series::new(format!("seed={}", r.seed), "beta", "d_l1_final");
        s.points = r
            .summary
            .rows
            .iter()
            .map(|row| (Cell::Float(row[0]), row[1]))
            .collect();
        plot.series.push(s);
    }
    let report = summary
        .rows
        .iter()
        .map(|r| format!("beta {} seed {}: d_l1 {}\n", r[0], r[2], r[1]))
        .collect();
    Ok(Artifacts {
        trace,
        summary: Some(summary),
        plot: Some(plot),
        report,
        ok: true,
    })
}

fn bound_check(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let spec = ExperimentSpec {
        grid: cfg.grid.clone(),
        game: GameSource::Generated {
            num_prompts: cfg.num_prompts,
            num_responses: cfg.num_responses,
        },
        ..spec_for(cfg, ExperimentSpec::bound_check())?
    };
    let results = run(&spec)?;
    let summary = summary_table(&results, &["beta", "measured", "bound", "pass", "seed"]);
    let mut trace = None;
    let mut plot = PlotData {
        title: "measured distance against the equilibrium-gap bound".into(),
        log_y: true,
        series: Vec::new(),
    };
    for r in &results {
        for (beta, (_, t)) in spec.grid.iter().zip(&r.traces) {
            append(
                &mut trace,
                trace_table(
                    t,
                    "iter",
                    &[("seed", Cell::Int(r.seed))],
                    &[("beta", Cell::Float(*beta))],
                ),
            );
        }
        for (name, k) in [("measured", 1), ("bound", 2)] {
            let mut s = Series::new(format!("{name} seed={}", r.seed), "beta", name);
            s.points = r
                .summary
                .rows
                .iter()
                .map(|row| (Cell::Float(row[0]), row[k]))
                .collect();
            plot.series.push(s);
        }
    }
    let all_pass = summary.column("pass").unwrap().iter().all(|p| *p == 1.0);
    let report = format!(
        "{} of {} cells within the bound\n",
        summary
            .column("pass")
            .unwrap()
            .iter()
            .filter(|p| **p == 1.0)
            .count(),
        summary.rows.len()
    ) + if all_pass { "" } else { "bound violated\n" };
    Ok(Artifacts {
        trace,
        summary: Some(summary),
        plot: Some(plot),
        report,
        ok: all_pass,
    })
}

fn wind_sample(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let spec = ExperimentSpec {
        grid: vec![cfg.beta],
        batch_sizes: vec![cfg.batch_size],
        ..spec_for(cfg, ExperimentSpec::sampled_convergence())?
    };
    if !(cfg.beta > 0.0) {
        return Err(CliError::Validation(
            "invalid `beta`: sampled WIND needs beta > 0".into(),
        ));
    }
    let results = run(&spec)?;
    let summary = summary_table(&results, &["M", "kl_final", "d_l1_final", "seed"]);
    let mut trace = None;
    let mut plot = PlotData {
        title: format!("sampled WIND, M = {}", cfg.batch_size),
        log_y: true,
        series: Vec::new(),
    };
    for r in &results {
        let (_, t) = &r.traces[0];
        append(
            &mut trace,
            trace_table(t, "round", &[("seed", Cell::Int(r.seed))], &[]),
        );
        for col in ["kl_to_star", "d_l1_to_star"] {
            let mut s = Series::new(format!("{col} seed={}", r.seed), "round", col);
            s.points = t
                .iters()
                .into_iter()
                .map(Cell::Int)
                .zip(t.column(col).unwrap())
                .collect();
            plot.series.push(s);
        }
    }
    let report = summary
        .rows
        .iter()
        .map(|r| format!("seed {}: KL {} d_l1 {}\n", r[3], r[1], r[2]))
        .collect();
    Ok(Artifacts {
        trace,
        summary: Some(summary),
        plot: Some(plot),
        report,
        ok: true,
    })
}

fn exact_cfg(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        beta: cfg.beta,
        eta: cfg.eta,
        n: cfg.n,
        iters: cfg.iters,
        tol_residual: cfg.tol,
        ..Default::default()
    }
}

fn format_policy(pi: &TabularPolicy) -> String {
    let mut s = String::new();
    for (x, row) in pi.to_rows().iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        s += &format!("policy[{x}] = ({})\n", vals.join(", "));
    }
    s
}

fn wind_exact(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let game = cfg_game(cfg)?;
    let pi_ref = TabularPolicy::uniform(game.num_prompts(), game.num_responses());
    let (report, trace) = wind_exact_solve(&game, &pi_ref, &pi_ref, &exact_cfg(cfg), None)?;
    let mut summary = Table::new(["residual", "duality_gap", "iters_used", "converged"]);
    summary.push(vec![
        Cell::Float(report.residual),
        Cell::Float(report.duality_gap),
        Cell::from(report.iters_used),
        Cell::Int(u64::from(report.converged)),
    ]);
    let mut s = Series::new("residual", "iter", "residual");
    s.points = trace
        .iters()
        .into_iter()
        .map(Cell::Int)
        .zip(trace.column("residual").unwrap())
        .collect();
    let mut text = String::new();
    if game.num_prompts() <= 8 && game.num_responses() <= 8 {
        text += &format_policy(&report.policy);
    }
    text += &format!(
        "residual = {:e}\nduality_gap = {:e}\niters = {}\n",
        report.residual, report.duality_gap, report.iters_used
    );
    if !report.converged {
        text += &format!(
            "warning: residual above tol = {:e} after T steps\n",
            cfg.tol
        );
    }
    Ok(Artifacts {
        trace: Some(trace_table(&trace, "iter", &[], &[])),
        summary: Some(summary),
        plot: Some(PlotData {
            title: "exact WIND fixed-point residual".into(),
            log_y: true,
            series: vec![s],
        }),
        report: text,
        ok: true,
    })
}

fn nash_gap(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let game = cfg_game(cfg)?;
    let (nx, ny) = (game.num_prompts(), game.num_responses());
    let pi_ref = TabularPolicy::uniform(nx, ny);
    let beta = cfg.beta;
    let (wind_report, _) = wind_exact_solve(&game, &pi_ref, &pi_ref, &exact_cfg(cfg), None)?;
    let preset = SolverConfig {
        iters: cfg.iters,
        ..SolverConfig::with_mixing_preset(beta, cfg.eta, cfg.n)?
    };
    let (ibon, ibon_trace) = iterative_bon(&pi_ref, &game, &preset, true, cfg.bon_mode()?, None)?;
    let mut summary = Table::new(["policy", "duality_gap", "residual", "win_rate_vs_ref"]);
    let mut text = String::new();
    for (name, pi) in [
        ("reference", &pi_ref),
        ("wind", &wind_report.policy),
        ("ibon", &ibon),
    ] {
        let gap = duality_gap(pi, &game, &pi_ref, beta)?;
        let res = fixed_point_residual(pi, &game, &pi_ref, beta)?;
        let wr = win_rate(pi, &pi_ref, &game)?;
        text += &format!("{name}: duality_gap {gap:e} residual {res:e} win_rate_vs_ref {wr:.6}\n");
        summary.push(vec![
            Cell::from(name),
            Cell::Float(gap),
            Cell::Float(res),
            Cell::Float(wr),
        ]);
    }
    text += &format!(
        "d_l1(wind, ibon) = {:e}\n",
        avg_l1(&wind_report.policy, &ibon, game.rho())?
    );
    Ok(Artifacts {
        trace: Some(trace_table(&ibon_trace, "iter", &[], &[])),
        summary: Some(summary),
        plot: None,
        report: text,
        ok: true,
    })
}

fn check_row(t: &mut Table, report: &mut String, name: &str, value: f64, pass: bool) {
    *report += &format!("{} {name}: {value:e}\n", if pass { "ok  " } else { "FAIL" });
    t.push(vec![
        Cell::from(name),
        Cell::Int(u64::from(pass)),
        Cell::Float(value),
    ]);
}

/// CSV and plot bytes parse back to the same header and bits.
fn schema_round_trip(table: &Table, plot: Option<&PlotData>) -> Result<bool, CliError> {
    let mut buf = Vec::new();
    write_csv_to(table, &mut buf)?;
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Io(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut ok = header == table.columns;
    for (rec, row) in rdr.records().zip(&table.rows) {
        let rec = rec.map_err(|e| CliError::Io(e.to_string()))?;
        for (field, cell) in rec.iter().zip(row) {
            ok &= match cell {
                Cell::Float(v) => field
                    .parse::<f64>()
                    .map(|p| p.to_bits() == v.to_bits())
                    .unwrap_or(false),
                other => field == other.to_string(),
            };
        }
    }
    if let Some(plot) = plot {
        let mut pbuf = Vec::new();
        write_plot_to(plot, &mut pbuf)?;
        let back = read_plot(&String::from_utf8_lossy(&pbuf));
        ok &= back.len() == plot.series.len();
        for ((name, pts), s) in back.iter().zip(&plot.series) {
            ok &= *name == s.name && pts.len() == s.points.len();
            ok &= pts
                .iter()
                .zip(&s.points)
                .all(|((_, y), (_, y0))| y.to_bits() == y0.to_bits());
        }
    }
    Ok(ok)
}

fn selftest() -> Result<Artifacts, CliError> {
    let mut t = Table::new(["check", "pass", "value"]);
    let mut report = String::new();

    // analytic fixed point on the demo game
    let demo = PreferenceGame::two_response_demo();
    let uref = TabularPolicy::uniform(1, 2);
    let cfg = SolverConfig {
        beta: 1.0,
        eta: 1.0,
        ..Default::default()
    };
    let (rep, _) = wind_exact_solve(&demo, &uref, &uref, &cfg, None)?;
    let sigma = 1.0 / (1.0 + (-0.5f64).exp());
    let err = (rep.policy.prob(0, 0) - sigma).abs();
    check_row(
        &mut t,
        &mut report,
        "demo_fixed_point",
        err,
        err < 1e-9 && rep.residual <= 1e-10,
    );

    // best-of-n closed form against a direct evaluation; n = 1 is the identity
    let g =
        PreferenceGame::with_uniform_rho(&[vec![0.3, -1.2, 2.0, 0.7], vec![1.0, 0.0, -0.5, 0.25]])?;
    let pi = TabularPolicy::from_probs(&[vec![0.1, 0.2, 0.3, 0.4], vec![0.25, 0.25, 0.4, 0.1]])?;
    let mut worst = avg_l1(&bon_exact_operator(&pi, &g, 1)?, &pi, g.rho())?;
    for n in 2..=4 {
        let a = bon_closed_form_operator(&pi, &g, n)?;
        for x in 0..2 {
            let p = pi.row(x);
            let geq = g.pref_geq_times_dense(x, &p);
            let w: Vec<f64> = p
                .iter()
                .zip(&geq)
                .map(|(pi, f)| pi * f.powi(n as i32 - 1))
                .collect();
            let z: f64 = w.iter().sum();
            for (y, wy) in w.iter().enumerate() {
                worst = worst.max((a.prob(x, y) - wy / z).abs());
            }
            let e = bon_exact_operator(&pi, &g, n)?;
            worst = worst.max((e.row(x).iter().sum::<f64>() - 1.0).abs());
        }
    }
    check_row(&mut t, &mut report, "bon_closed_form", worst, worst < 1e-12);

    // no-mixing iterates approach the limit policy
    let limit = experiments::limit_policy_oracle(&g, &TabularPolicy::uniform(2, 4))?;
    let nm = SolverConfig {
        iters: 40,
        ..SolverConfig::no_mixing(2)?
    };
    let (_, tr) = iterative_bon(
        &TabularPolicy::uniform(2, 4),
        &g,
        &nm,
        false,
        wind::BonMode::ClosedForm,
        Some(&limit),
    )?;
    let d = tr.column("d_l1").unwrap();
    let monotone = d.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    check_row(
        &mut t,
        &mut report,
        "no_mixing_limit",
        *d.last().unwrap(),
        monotone && *d.last().unwrap() < 1e-3,
    );

    // equilibrium gap bound on the designed game
    let bspec = ExperimentSpec {
        seeds: vec![0],
        grid: vec![0.01],
        iters: 2000,
        ..ExperimentSpec::bound_check()
    };
    let br = experiments::run_bound_check(&bspec, 0)?;
    let row = &br.summary.rows[0];
    check_row(&mut t, &mut report, "gap_bound", row[1], row[3] == 1.0);

    // sampled regression target has the right conditional mean
    let sg = PreferenceGame::with_uniform_rho(&[vec![0.5, -0.3, 1.1]])?;
    let theta = wind::sampled::ParamPolicy::tabular(1, 3, vec![0.2, -0.1, 0.4])?;
    let theta_ref = wind::sampled::ParamPolicy::tabular(1, 3, vec![0.0; 3])?;
    let pp = wind::sampled::ProxyParams::new(0.5, 1.0, theta.clone(), theta_ref)?;
    let judge = wind::sampled::Judge::exact(&sg);
    let table = wind::sampled::conditional_mean_oracle(&sg, &pp, &judge)?;
    let batch = wind::sampled::SampleBatch::exhaustive(&theta, &sg, &judge, 0.5)?;
    let mut num = [0.0; 3];
    let mut den = [0.0; 3];
    for s in &batch.samples {
        num[s.y] += s.weight * pp.target(s.x, s.y, s.judged);
        den[s.y] += s.weight;
    }
    let cm = (0..3)
        .map(|y| (num[y] / den[y] - table[y]).abs())
        .fold(0.0, f64::max);
    check_row(&mut t, &mut report, "conditional_mean", cm, cm < 1e-12);

    // every schema survives a CSV round trip
    let mut quick = RunConfig::defaults(Command::Ibon);
    quick.num_prompts = 3;
    quick.num_responses = 5;
    quick.iters = 5;
    let mut schemas_ok = true;
    let mut schemas = 0.0;
    let mut arts = vec![ibon(&quick)?];
    quick.grid = vec![0.05, 0.1];
    quick.eta = 1.0;
    quick.num_seeds = 2;
    arts.push(sweep_beta(&quick)?);
    quick.num_prompts = 2;
    quick.num_responses = 3;
    quick.grid = vec![0.01];
    quick.iters = 50;
    arts.push(bound_check(&quick)?);
    quick.beta = 1.0;
    quick.batch_size = 64;
    quick.iters = 3;
    quick.inner_steps = 20;
    quick.num_seeds = 1;
    arts.push(wind_sample(&quick)?);
    let demo_cfg = RunConfig {
        beta: 1.0,
        iters: 100,
        ..RunConfig::defaults(Command::WindExact)
    };
    arts.push(wind_exact(&demo_cfg)?);
    arts.push(nash_gap(&demo_cfg)?);
    for a in &arts {
        for table in [&a.trace, &a.summary].into_iter().flatten() {
            schemas_ok &= schema_round_trip(table, a.plot.as_ref())?;
            schemas += 1.0;
        }
    }
    let expected: [&[&str]; 3] = [
        &["iter", "d_l1_ibon", "d_l1_wind"],
        &["beta", "d_l1_final", "seed"],
        &["round", "kl_to_star", "d_l1_to_star", "seed"],
    ];
    schemas_ok &= arts[0].trace.as_ref().unwrap().columns == expected[0];
    schemas_ok &= arts[1].summary.as_ref().unwrap().columns == expected[1];
    schemas_ok &= arts[3].trace.as_ref().unwrap().columns == expected[2];
    check_row(&mut t, &mut report, "csv_schemas", schemas, schemas_ok);

    let ok = t.column("pass").unwrap().iter().all(|p| *p == 1.0);
    Ok(Artifacts {
        trace: None,
        summary: Some(t),
        plot: None,
        report,
        ok,
    })
}
