use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use dualtraj::discretize::{self, read_trajectory_csv, write_trajectory_csv};
use dualtraj::integrate::{self, IntegratorOptions, RkMethod};
use dualtraj::{
    classify as classify_sys, parse_system_file, Anchor, registry, ClassifyConfig, CompareConfig, Error, IvpSpec, Params,
    SolveConfig, SolveReport, SolveStatus, Trajectory,
};

use crate::plot::{self, Scale};
use crate::{AnchorArg, ClassifyArgs, Common, CompareArgs, IntegrateArgs, IntegrateMethod, SolveArgs, SolverFlags, Start};

/// Six significant digits.
fn g6(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Divergence(_) | Error::Diverged { .. } | Error::MinStepReached { .. }) => 3,
        Some(Error::NonConvergence { .. }) => 2,
        _ => 1,
    }
}

fn status_code(s: SolveStatus) -> u8 {
    s.exit_code() as u8
}

fn setup(common: &Common) -> Result<IvpSpec> {
    if let Some(t) = common.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let spec = load_spec(common)?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(spec)
}

fn load_spec(common: &Common) -> Result<IvpSpec> {
    let params: Params = common.params.iter().cloned().collect();
    let base = if dualtraj::model::SYSTEM_NAMES.contains(&common.system.as_str()) {
        registry(&common.system, &params)?
    } else if Path::new(&common.system).is_file() {
        if !params.is_empty() {
            bail!("--param only applies to built-in systems");
        }
        let text = fs::read_to_string(&common.system).with_context(|| format!("reading {}", common.system))?;
        parse_system_file(&text).with_context(|| format!("parsing {}", common.system))?
    } else {
        return Err(Error::UnknownSystem(common.system.clone()).into());
    };
    let y0 = common.y0.clone().unwrap_or_else(|| base.y0.clone());
    Ok(IvpSpec::new(
        base.system,
        y0,
        common.horizon.unwrap_or(base.horizon),
        common.n.unwrap_or(base.steps),
    )?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_trajectory(spec: &IvpSpec, y: &Trajectory, path: &Path) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(spec, y, &mut buf)?;
    let text = String::from_utf8(buf)?;
    write_file(path, &text)?;
    Ok(text)
}

/// Renders `svg_name` from CSV files already on disk.
fn plot_files(out: &Path, csvs: &[(&str, &str)], svg_name: &str, title: &str, scale: Scale) -> Result<()> {
    let texts = csvs
        .iter()
        .map(|(label, name)| {
            let p = out.join(name);
            fs::read_to_string(&p)
                .with_context(|| format!("reading {}", p.display()))
                .map(|t| (*label, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<(&str, &str)> = texts.iter().map(|(l, t)| (*l, t.as_str())).collect();
    write_file(&out.join(svg_name), &plot::plot_csv(&inputs, title, scale)?)
}

pub fn integrate(args: &IntegrateArgs) -> Result<u8> {
    let spec = setup(&args.common)?;
    let (traj, stats) = match args.method {
        IntegrateMethod::ModifiedEuler => (integrate::modified_euler(&spec)?, None),
        m => {
            let method = if m == IntegrateMethod::Rk45 { RkMethod::Rk45 } else { RkMethod::Rk23 };
            let opts = IntegratorOptions {
                rtol: args.tol.rtol,
                atol: args.tol.atol,
                max_step: None,
            };
            let out = integrate::integrate(&spec, method, &opts)?;
            (integrate::resample(&out, &spec.grid())?, Some(out.stats))
        }
    };
    let p = discretize::objective(&spec, &traj)?;
    let out = &args.common.out;
    write_trajectory(&spec, &traj, &out.join("trajectory.csv"))?;
    plot_files(
        out,
        &[("", "trajectory.csv")],
        "trajectory.svg",
        &format!("{} ({})", spec.system.name(), method_name(args.method)),
        Scale::Linear,
    )?;
    println!("system     {}", spec.system.name());
    println!("method     {}", method_name(args.method));
    println!("grid       n = {}, T = {}", spec.steps, g6(spec.horizon));
    if let Some(s) = stats {
        println!("steps      {} accepted, {} rejected, {} evaluations", s.accepted, s.rejected, s.rhs_evals);
    }
    println!("P          {}", g6(p));
    Ok(0)
}

fn method_name(m: IntegrateMethod) -> &'static str {
    match m {
        IntegrateMethod::Rk45 => "rk45",
        IntegrateMethod::Rk23 => "rk23",
        IntegrateMethod::ModifiedEuler => "modified-euler",
    }
}

fn solve_config(flags: &SolverFlags, seed: u64) -> Result<SolveConfig> {
    let mut cfg = SolveConfig {
        method: flags.method,
        seed,
        finish_unperturbed: !flags.no_unperturbed_finish,
        anchor: match flags.anchor {
            AnchorArg::Start => Anchor::Start,
            AnchorArg::Origin => Anchor::Origin,
        },
        ..Default::default()
    };
    if let Some(v) = flags.rho0 {
        cfg.rho0 = v;
        // a starting ρ below the default floor means a fixed-ρ run
        if flags.rho_min.is_none() && v < cfg.rho_min {
            cfg.rho_min = v;
        }
    }
    if let Some(v) = flags.rho_shrink {
        cfg.rho_shrink = v;
    }
    if let Some(v) = flags.rho_min {
        cfg.rho_min = v;
    }
    if let Some(v) = flags.tol {
        cfg.inner_tol = v;
    }
    if let Some(v) = flags.max_iter {
        cfg.max_inner = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SolveFile<'a> {
    system: &'a str,
    n: usize,
    horizon: f64,
    start: String,
    p_start: f64,
    solve: &'a SolveReport,
}

fn write_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("writing {}", path.display()))?);
    writeln!(w, "step,objective")?;
    for (i, p) in history.iter().enumerate() {
        writeln!(w, "{},{p:.16e}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}

fn print_report(rep: &SolveReport) {
    println!("method     {}", rep.method);
    println!("status     {}", rep.status);
    println!("P          {}", g6(rep.objective));
    println!("rho        {}", g6(rep.final_rho));
    println!("Pi_rho     {}", g6(rep.perturbed_objective));
    println!("|grad P|   {}", g6(rep.grad_norm));
    println!(
        "iterations {} phases, {} inner, {} newton, {} canonical",
        rep.iterations.outer, rep.iterations.inner, rep.iterations.newton_steps, rep.iterations.canonical_steps
    );
    match &rep.certificate {
        Some(c) => println!(
            "certificate {} (min eig {}, gap {})",
            c.verdict,
            g6(c.min_eig),
            g6(c.gap)
        ),
        None => println!("certificate none (not a critical point)"),
    }
    println!("time       {} s", g6(rep.wallclock));
}

pub fn solve(args: &SolveArgs) -> Result<u8> {
    let spec = setup(&args.common)?;
    let cfg = solve_config(&args.solver, args.common.seed)?;
    let start = match &args.start {
        Start::Zero => None,
        Start::Rk45 => {
            let out = integrate::rk45(&spec, integrate::DEFAULT_RTOL, integrate::DEFAULT_ATOL)?;
            Some(integrate::resample(&out, &spec.grid())?)
        }
        Start::File(p) => {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(read_trajectory_csv(&spec, BufReader::new(f)).with_context(|| format!("reading {}", p.display()))?)
        }
    };
    let p_start = match &start {
        Some(y) => discretize::objective(&spec, y)?,
        None => discretize::objective(&spec, &Trajectory::zeros(&spec))?,
    };
    let (rep, code) = match dualtraj::solve(&spec, &cfg, start.as_ref()) {
        Ok(rep) => {
            let code = status_code(rep.status);
            (rep, code)
        }
        Err(Error::Divergence(rep)) => (*rep, 3),
        Err(e) => return Err(e.into()),
    };

    let out = &args.common.out;
    write_trajectory(&spec, &rep.final_y, &out.join("trajectory.csv"))?;
    write_history(&out.join("history.csv"), &rep.history)?;
    let file = SolveFile {
        system: spec.system.name(),
        n: spec.steps,
        horizon: spec.horizon,
        start: match &args.start {
            Start::Zero => "zero".into(),
            Start::Rk45 => "rk45".into(),
            Start::File(p) => format!("file:{}", p.display()),
        },
        p_start,
        solve: &rep,
    };
    write_file(&out.join("report.toml"), &toml::to_string(&file)?)?;
    if !args.no_plot {
        let name = spec.system.name();
        plot_files(out, &[("", "trajectory.csv")], "trajectory.svg", &format!("{name} ({})", rep.method), Scale::Linear)?;
        plot_files(out, &[("", "history.csv")], "history.svg", &format!("{name}: objective per step"), Scale::Log)?;
    }
    println!("system     {}", spec.system.name());
    println!("P(start)   {}", g6(p_start));
    print_report(&rep);
    if code == 3 {
        eprintln!("error: solver diverged");
    }
    Ok(code)
}

pub fn classify(args: &ClassifyArgs) -> Result<u8> {
    let spec = setup(&args.common)?;
    let cfg = ClassifyConfig {
        tol: args.tol,
        budget: args.budget,
        seed: args.common.seed,
    };
    let v = classify_sys(&spec.system, &cfg)?;
    println!("{}: {} ({})", spec.system.name(), v.kind, v.kind.prognosis());
    println!("mu_star    {}", g6(v.mu_star));
    println!("nu_star    {}", g6(v.nu_star));
    let w: Vec<String> = v.witness_s.iter().map(|x| g6(*x)).collect();
    println!("witness    [{}]", w.join(", "));
    if v.structural_zero {
        println!("note       positive definiteness is structurally impossible");
    }
    if let Some(c) = &v.caveat {
        println!("caveat     {c}");
    }
    if let Some(path) = &args.samples {
        let d = spec.dim();
        let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("writing {}", path.display()))?);
        let header: Vec<String> = (1..=d)
            .map(|i| format!("s{i}"))
            .chain((1..=d).map(|i| format!("lambda{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for e in &v.evidence {
            let row: Vec<String> = e.s.iter().chain(&e.eigenvalues).map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct CompareFile<'a> {
    system: &'a str,
    n: usize,
    horizon: f64,
    compare: &'a dualtraj::CompareReport,
}

pub fn compare(args: &CompareArgs) -> Result<u8> {
    let spec = setup(&args.common)?;
    let cfg = CompareConfig {
        integrator: IntegratorOptions {
            rtol: args.tol.rtol,
            atol: args.tol.atol,
            max_step: None,
        },
        solve: solve_config(&args.solver, args.common.seed)?,
        classify: ClassifyConfig {
            seed: args.common.seed,
            ..Default::default()
        },
        skip_rk23: args.no_rk23,
    };
    let rep = dualtraj::compare(&spec, &cfg)?;

    let out = &args.common.out;
    write_trajectory(&spec, &rep.rk45, &out.join("rk45.csv"))?;
    write_trajectory(&spec, &rep.cd.final_y, &out.join("cd.csv"))?;
    if let Some(rk23) = &rep.rk23 {
        write_trajectory(&spec, rk23, &out.join("rk23.csv"))?;
        let grid = spec.grid();
        let mut text = String::from("t,separation\n");
        for (k, s) in rep.divergence_curve.iter().enumerate() {
            text.push_str(&format!("{:.16e},{s:.16e}\n", grid.node(k)));
        }
        write_file(&out.join("divergence.csv"), &text)?;
    }
    let file = CompareFile {
        system: spec.system.name(),
        n: spec.steps,
        horizon: spec.horizon,
        compare: &rep,
    };
    write_file(&out.join("compare.toml"), &toml::to_string(&file)?)?;
    if !args.no_plot {
        let name = spec.system.name();
        plot_files(
            out,
            &[("rk45", "rk45.csv"), ("cd", "cd.csv")],
            "trajectories.svg",
            &format!("{name}: rk45 and dual solve"),
            Scale::Linear,
        )?;
        if rep.rk23.is_some() {
            plot_files(
                out,
                &[("", "divergence.csv")],
                "divergence.svg",
                &format!("{name}: |rk45 - rk23|"),
                Scale::Log,
            )?;
        }
    }

    println!("system     {}", spec.system.name());
    println!("P(rk45)    {}", g6(rep.p_rk45));
    if let Some(p) = rep.p_rk23 {
        println!("P(rk23)    {}", g6(p));
    }
    println!("P(cd)      {}", g6(rep.p_cd));
    println!("winner     {}", rep.winner);
    println!("verdict    {} ({})", rep.verdict.kind, rep.verdict.kind.prognosis());
    if let Some(max) = rep.divergence_curve.iter().copied().reduce(f64::max) {
        println!("max |rk45 - rk23| {}", g6(max));
    }
    Ok(status_code(rep.cd.status))
}
