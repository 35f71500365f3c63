use obm_stopping::grid::{self, GridMethod};
use obm_stopping::mc::{simulate_paths, write_paths_csv};
use obm_stopping::value::{
    assemble_with, check_grid, interface_fit_candidate, one_sided_candidate, stop_everywhere,
};
use obm_stopping::{
    estimate_value, interface_fit_report, verify, Discount, McConfig, Region, Reward, Sampler,
    Solver, Structure,
};
use rayon::prelude::*;

use crate::cli::{
    BubbleArgs, Candidate, Command, FigureArgs, FigureId, Format, Model, OracleArgs, OracleMethod,
    ProblemArgs, RewardKind, SamplerKind, SimulateArgs, SolveArgs, SweepArgs, VerifyArgs,
};
use crate::error::{CliError, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFICATION};
use crate::output::{num, Sink};
use crate::report::*;

pub fn run(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Classify(a) => classify(a),
        Command::Sweep(a) => sweep(a),
        Command::Bubble(a) => bubble(a),
        Command::Oracle(a) => oracle(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Figure(a) => figure(a),
    }
}

struct Problem {
    model: Model,
    reward: Reward,
    r: Discount,
    solver: Solver,
}

impl Problem {
    fn from_args(p: &ProblemArgs) -> Result<Self, CliError> {
        let model = p.model.resolve()?;
        Ok(Problem {
            reward: model.reward(p.reward)?,
            r: Discount::new(p.r).map_err(CliError::usage)?,
            solver: Solver::new(p.tol.tolerances()?),
            model,
        })
    }

    fn out(&self, p: &ProblemArgs) -> ProblemOut {
        ProblemOut::new(&self.model, Some(self.r.value()), Some(p.reward))
    }
}

fn sbm_view(model: &Model, region: &Region) -> Option<SbmOut> {
    model.beta.map(|b| {
        let skew = region.map_increasing(|x| b.scale_inv(x));
        SbmOut {
            beta: b.beta(),
            zero_in_stopping_set: skew.contains(0.0),
            stopping_region: skew,
        }
    })
}

fn regime_out(regime: &obm_stopping::Regime) -> RegimeOut {
    RegimeOut {
        tag: regime.tag,
        thresholds: regime.thresholds.clone(),
    }
}

fn solve(a: SolveArgs) -> Result<u8, CliError> {
    let pa = &a.problem;
    let p = Problem::from_args(pa)?;
    let sol = p.solver.solve(p.model.params, p.r, p.reward)?;
    let v = assemble_with(&p.solver, p.model.params, p.r, p.reward)?;
    let verification = verify(&v, &check_grid(&v, a.grid_points));
    let code = if verification.pass {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    };
    let report = SolveReport {
        command: "solve",
        schema_version: SCHEMA_VERSION,
        problem: p.out(pa),
        regime: regime_out(&sol.regime),
        continuation_region: sol.stopping.complement(),
        continuation_pieces: v.pieces.clone(),
        bubble: match sol.structure {
            Structure::Bubble(b) => Some(b),
            Structure::OneSided { .. } => None,
        },
        verification,
        sbm: sbm_view(&p.model, &sol.stopping),
        stopping_region: sol.stopping,
    };
    Sink::open(pa.out.as_deref())?.json(&report)?;
    Ok(code)
}

fn classify(a: ProblemArgs) -> Result<u8, CliError> {
    let p = Problem::from_args(&a)?;
    let sol = p.solver.solve(p.model.params, p.r, p.reward)?;
    let report = ClassifyReport {
        command: "classify",
        schema_version: SCHEMA_VERSION,
        problem: p.out(&a),
        regime: regime_out(&sol.regime),
        sbm: sbm_view(&p.model, &sol.stopping),
        stopping_region: sol.stopping,
    };
    Sink::open(a.out.as_deref())?.json(&report)?;
    Ok(EXIT_OK)
}

fn sweep_rates(a: &SweepArgs) -> Result<Vec<f64>, CliError> {
    let (lo, hi) = (a.r_min, a.r_max);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(CliError::Usage(format!(
            "need 0 < r-min <= r-max, got [{lo}, {hi}]"
        )));
    }
    match (a.r_step, a.r_count) {
        (Some(step), None) => {
            if !(step > 0.0) {
                return Err(CliError::Usage("r-step must be positive".into()));
            }
            let n = ((hi - lo) / step * (1.0 + 1e-12)).floor() as usize + 1;
            if n > 1_000_000 {
                return Err(CliError::Usage(format!("{n} rates is too many")));
            }
            Ok((0..n).map(|k| lo + step * k as f64).collect())
        }
        (None, count) => {
            let n = count.unwrap_or(101);
            match n {
                0 => Err(CliError::Usage("r-count must be positive".into())),
                1 => Ok(vec![lo]),
                _ => Ok((0..n)
                    .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                    .collect()),
            }
        }
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    }
}

fn sweep(a: SweepArgs) -> Result<u8, CliError> {
    let model = a.model.resolve()?;
    let reward = model.reward(a.reward)?;
    let solver = Solver::new(a.tol.tolerances()?);
    let rates = sweep_rates(&a)?;

    let mut rows: Vec<SweepRow> = rates
        .par_iter()
        .map(|&r| {
            let res = Discount::new(r).and_then(|d| solver.classify(model.params, d, reward));
            match res {
                Ok(regime) => SweepRow {
                    r,
                    regime: format!("{:?}", regime.tag),
                    thresholds: regime.thresholds,
                    error: None,
                },
                Err(e) => SweepRow {
                    r,
                    regime: "Error".into(),
                    thresholds: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let (s1, s2) = (model.params.sigma1(), model.params.sigma2());
    let has_r0 = reward == Reward::QuadraticPlus && s2 * s2 > 2.0 * s1 * s1 * (1.0 + 1e-12);
    let r0 = if has_r0 {
        Some(solver.find_r0(model.params)?)
    } else {
        None
    };
    if let Some(r0) = r0.filter(|&r0| r0 >= a.r_min && r0 <= a.r_max) {
        let thresholds = solver
            .bubble(model.params, Discount::new(r0)?)
            .ok()
            .flatten()
            .map(|b| vec![b.c1, b.c2, b.c3])
            .unwrap_or_default();
        let at = rows.partition_point(|row| row.r <= r0);
        rows.insert(
            at,
            SweepRow {
                r: r0,
                regime: "CriticalRate".into(),
                thresholds,
                error: None,
            },
        );
    }

    let failed = rows.iter().any(|row| row.error.is_some());
    for row in rows.iter().filter(|row| row.error.is_some()) {
        eprintln!("r = {}: {}", row.r, row.error.as_deref().unwrap_or(""));
    }
    let sink = Sink::open(a.out.as_deref())?;
    match a.format {
        Format::Json => sink.json(&SweepReport {
            command: "sweep",
            schema_version: SCHEMA_VERSION,
            problem: ProblemOut::new(&model, None, Some(a.reward)),
            r0,
            rows,
        })?,
        Format::Csv => sink.with(|w| {
            writeln!(w, "r,regime,c1,c2,c3")?;
            for row in &rows {
                let t = |i: usize| num(row.thresholds.get(i).copied());
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    num(Some(row.r)),
                    row.regime,
                    t(0),
                    t(1),
                    t(2)
                )?;
            }
            Ok(())
        })?,
    }
    Ok(if failed { EXIT_NUMERIC } else { EXIT_OK })
}

fn bubble(a: BubbleArgs) -> Result<u8, CliError> {
    let model = a.model.resolve()?;
    let solver = Solver::new(a.tol.tolerances()?);
    let (r, r0, found) = if a.find_r0 {
        let r0 = solver.find_r0(model.params)?;
        // At r0 the bubble is degenerate and may not resolve.
        let b = solver
            .bubble(model.params, Discount::new(r0)?)
            .ok()
            .flatten();
        (r0, Some(r0), b)
    } else {
        let r = a.r.expect("clap requires --r without --find-r0");
        let d = Discount::new(r).map_err(CliError::usage)?;
        (r, None, solver.bubble(model.params, d)?)
    };
    let report = BubbleReport {
        command: "bubble",
        schema_version: SCHEMA_VERSION,
        problem: ProblemOut::new(&model, Some(r), Some(RewardKind::Quad)),
        r0,
        stopping_region: found.map(|b| b.stopping_region()),
        bubble: found,
    };
    Sink::open(a.out.as_deref())?.json(&report)?;
    Ok(EXIT_OK)
}

fn oracle(a: OracleArgs) -> Result<u8, CliError> {
    let pa = &a.problem;
    let p = Problem::from_args(pa)?;
    let analytic = match p.solver.solve(p.model.params, p.r, p.reward) {
        Ok(sol) => Some(sol.stopping),
        Err(e) => {
            eprintln!("analytic solution unavailable: {e}");
            None
        }
    };
    let c_max = analytic
        .as_ref()
        .and_then(|reg| reg.boundaries().into_iter().reduce(f64::max))
        .unwrap_or(1.0);
    let xmax = a.xmax.unwrap_or((3.0 * c_max + 3.0).max(5.0));
    let n = a.n.unwrap_or(((xmax - a.xmin) / 1e-3).ceil() as usize + 1);
    let gm = grid::build_chain(p.model.params, a.xmin, xmax, n).map_err(CliError::usage)?;
    let method = match a.method {
        OracleMethod::Policy => GridMethod::default(),
        OracleMethod::Sor => GridMethod::ValueIteration {
            omega: a.omega,
            max_iter: 1_000_000,
            tol: 1e-13,
        },
    };
    let gs = grid::solve_stopping_with(&gm, p.reward, p.r, method)?;
    Sink::open(pa.out.as_deref())?.with(|w| gs.write_csv(&gm, p.reward, w))?;

    if let Some(path) = &a.summary {
        let region = grid::extract_region(&gs.stop, &gm.xs);
        let grid_boundaries = grid::interior_boundaries(&region, &gm.xs);
        let analytic_boundaries = analytic.map(|reg| reg.boundaries()).unwrap_or_default();
        let max_boundary_deviation =
            (grid_boundaries.len() == analytic_boundaries.len()).then(|| {
                grid_boundaries
                    .iter()
                    .zip(&analytic_boundaries)
                    .map(|(g, c)| (g - c).abs())
                    .fold(0.0, f64::max)
            });
        let summary = OracleSummary {
            command: "oracle",
            schema_version: SCHEMA_VERSION,
            problem: p.out(pa),
            h: gm.h,
            nodes: gm.len(),
            iterations: gs.iterations,
            stopping_region: region,
            grid_boundaries,
            analytic_boundaries,
            max_boundary_deviation,
        };
        Sink::open(Some(path))?.json(&summary)?;
    }
    Ok(EXIT_OK)
}

/// Rows above which a path dump is refused.
const MAX_DUMP_ROWS: f64 = 5e6;

fn simulate(a: SimulateArgs) -> Result<u8, CliError> {
    let pa = &a.problem;
    let p = Problem::from_args(pa)?;
    let mut cfg = McConfig::for_rate(p.r);
    cfg.n_paths = a.n_paths;
    cfg.dt = a.dt;
    cfg.seed = a.seed;
    cfg.skip_tol = a.skip_tol;
    cfg.horizon = a.horizon.unwrap_or(cfg.horizon);
    cfg.sampler = match a.sampler {
        SamplerKind::Exact => Sampler::ExactSbm,
        SamplerKind::Euler => Sampler::Euler,
    };
    cfg.validate().map_err(CliError::usage)?;

    if a.dump_paths {
        let rows = cfg.n_paths as f64 * (cfg.horizon / cfg.dt + 1.0);
        if rows > MAX_DUMP_ROWS {
            return Err(CliError::Usage(format!(
                "path dump would have {rows:.0} rows; lower --n-paths or --horizon"
            )));
        }
        let paths = simulate_paths(a.x0, p.model.params, &cfg)?;
        Sink::open(pa.out.as_deref())?.with(|w| write_paths_csv(&paths, w))?;
        return Ok(EXIT_OK);
    }

    let v = assemble_with(&p.solver, p.model.params, p.r, p.reward)?;
    let est = estimate_value(a.x0, &v.region, p.model.params, p.r, p.reward, &cfg)?;
    let analytic_value = v.value(a.x0);
    let within_tolerance = (est.mean - analytic_value).abs() <= 3.0 * est.stderr + 5e-3;
    let report = SimulateReport {
        command: "simulate",
        schema_version: SCHEMA_VERSION,
        problem: p.out(pa),
        x0: a.x0,
        sampler: cfg.sampler,
        seed: cfg.seed,
        dt: cfg.dt,
        horizon: cfg.horizon,
        estimate: est,
        analytic_value,
        within_tolerance,
    };
    Sink::open(pa.out.as_deref())?.json(&report)?;
    Ok(if within_tolerance {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    })
}

fn verify_cmd(a: VerifyArgs) -> Result<u8, CliError> {
    let pa = &a.problem;
    let p = Problem::from_args(pa)?;
    let (params, r, reward) = (p.model.params, p.r, p.reward);
    let mut interface_fit = None;
    let v = match a.candidate {
        Candidate::Solution => assemble_with(&p.solver, params, r, reward)?,
        Candidate::Threshold => {
            let c = a.threshold.expect("clap requires --threshold");
            one_sided_candidate(params, r, reward, c).map_err(CliError::usage)?
        }
        Candidate::StopEverywhere => stop_everywhere(params, r, reward),
        Candidate::InterfaceFit => {
            if reward != Reward::QuadraticPlus {
                return Err(CliError::Usage(
                    "the interface-fit candidate is defined for --reward quad".into(),
                ));
            }
            interface_fit = Some(interface_fit_report(params, r));
            interface_fit_candidate(params, r)
        }
    };
    let verification = verify(&v, &check_grid(&v, a.grid_points));
    let code = if verification.pass {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    };
    let report = VerifyReport {
        command: "verify",
        schema_version: SCHEMA_VERSION,
        problem: p.out(pa),
        candidate: a.candidate,
        stopping_region: v.region.clone(),
        verification,
        interface_fit,
    };
    Sink::open(pa.out.as_deref())?.json(&report)?;
    Ok(code)
}

/// `(x, y)` rows; at a jump the point is repeated with the left and right
/// limits.
fn figure_rows(id: FigureId) -> Vec<(f64, f64)> {
    match id {
        FigureId::Fig1 => {
            let (r, s1, s2) = (1.5, 1.0, 2.0);
            let f = |x: f64, s: f64| r * (1.0 + x) * (1.0 + x) - s * s;
            let mut rows = Vec::with_capacity(402);
            for k in -200..=200 {
                let x = k as f64 / 100.0;
                match k {
                    ..0 => rows.push((x, f(x, s1))),
                    0 => rows.extend([(x, f(x, s1)), (x, f(x, s2))]),
                    _ => rows.push((x, f(x, s2))),
                }
            }
            rows
        }
        FigureId::Fig3 => {
            let beta = obm_stopping::SkewParams::new(0.75).expect("valid index");
            let g = Reward::Skew(obm_stopping::BaseReward::LinearPlus, beta);
            (-300..=200)
                .map(|k| {
                    let x = k as f64 / 100.0;
                    (x, g.value(x))
                })
                .collect()
        }
    }
}

fn figure(a: FigureArgs) -> Result<u8, CliError> {
    let rows = figure_rows(a.id);
    let header = match a.id {
        FigureId::Fig1 => "x,r_times_1px_sq_minus_sigma_sq",
        FigureId::Fig3 => "x,g",
    };
    Sink::open(a.out.as_deref())?.with(|w| {
        writeln!(w, "{header}")?;
        for (x, y) in rows {
            writeln!(w, "{},{}", num(Some(x)), num(Some(y)))?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}
