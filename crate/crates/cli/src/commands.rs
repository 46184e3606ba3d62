//! Command implementations. Each returns human-readable text, a JSON
//! document and an exit code; the binary decides where they go.

use std::fmt::Write as _;

use hopmp_core::dynamics::{integrate_state, integrate_strict};
use hopmp_core::model::Problem;
use hopmp_core::pmp::{self, CertificationReport, Multiplier, Tolerances, Verdict};
use hopmp_core::symbolic::enumerate_brackets;
use hopmp_core::trajectory::{embed, process_distance, project, SpaceTimeProcess, DEFAULT_W0_MIN};

use crate::formats::{
    to_json, BracketRow, InputError, MultiplierFile, ProblemFile, ProcessFile, ReportFile, SpaceTimeFile,
    StrictFile,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IMPULSIVE: i32 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    pub depth: usize,
    pub substeps: usize,
    pub samples: usize,
    pub tolerances: Tolerances,
    pub w0_min: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            depth: 3,
            substeps: hopmp_core::dynamics::DEFAULT_SUBSTEPS,
            samples: 64,
            tolerances: Tolerances::default(),
            w0_min: DEFAULT_W0_MIN,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),

    #[error(transparent)]
    Core(#[from] hopmp_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(hopmp_core::Error::ImpulsiveProcess { .. }) => EXIT_IMPULSIVE,
            _ => EXIT_INPUT,
        }
    }

    /// Message for stderr; impulsive cells are named `I0`, `I1`, ...
    pub fn message(&self) -> String {
        match self {
            CliError::Core(hopmp_core::Error::ImpulsiveProcess { cells, w0_min }) => format!(
                "no strict-sense projection: w0 < {w0_min:e} on cells {}",
                cells.iter().map(|c| format!("I{c}")).collect::<Vec<_>>().join(", ")
            ),
            other => other.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub text: String,
    pub json: String,
    pub exit_code: i32,
    /// Process document for `--out`.
    pub process: Option<ProcessFile>,
    /// Report document for `--report`.
    pub report: Option<ReportFile>,
}

impl Output {
    fn new(text: String, json: String) -> Self {
        Output {
            text,
            json,
            exit_code: EXIT_OK,
            process: None,
            report: None,
        }
    }
}

/// Fixed-precision rendering with trailing zeros trimmed; `-0` prints as `0`.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn fmt_vec(v: &[f64]) -> String {
    format!("({})", v.iter().map(|&c| fmt_num(c)).collect::<Vec<_>>().join(", "))
}

pub enum Loaded {
    Strict(hopmp_core::trajectory::StrictProcess),
    SpaceTime(SpaceTimeProcess),
}

pub fn load_process(problem: &Problem, file: &ProcessFile, substeps: usize) -> Result<Loaded, CliError> {
    let (sys, x0) = (&problem.system, &problem.initial_state);
    Ok(match file {
        ProcessFile::Strict(f) => Loaded::Strict(integrate_strict(sys, f.cells()?, x0, substeps)?),
        ProcessFile::Spacetime(f) => Loaded::SpaceTime(integrate_state(sys, f.cells()?, x0, substeps)?),
    })
}

/// Space-time form of any process file; strict processes are embedded.
pub fn load_spacetime(problem: &Problem, file: &ProcessFile, substeps: usize) -> Result<SpaceTimeProcess, CliError> {
    Ok(match load_process(problem, file, substeps)? {
        Loaded::Strict(sp) => embed(&sp),
        Loaded::SpaceTime(ep) => ep,
    })
}

pub fn cmd_brackets(file: &ProblemFile, opts: &Options) -> Result<Output, CliError> {
    let problem = file.to_problem()?;
    let sys = &problem.system;
    let mut rows = Vec::new();
    for tree in enumerate_brackets(sys.m(), opts.depth) {
        let field = tree.realize(sys.controls())?;
        if field.is_zero() {
            continue;
        }
        rows.push(BracketRow {
            bracket: tree.to_string(),
            degree: tree.degree(),
            components: field.components().iter().map(|c| c.to_string()).collect(),
        });
    }
    let mut text = String::new();
    for r in &rows {
        writeln!(text, "{} = ({})", r.bracket, r.components.join(",")).unwrap();
    }
    if opts.depth > 1 && rows.iter().all(|r| r.degree == 1) {
        text.push_str("no nonzero brackets beyond depth 1\n");
    }
    Ok(Output::new(text, to_json(&rows)))
}

fn on_target_line(problem: &Problem, t: f64, x: &[f64], tol: f64) -> Result<String, CliError> {
    Ok(format!(
        "endpoint: t = {}, x = {}\non target: {}\n",
        fmt_num(t),
        fmt_vec(x),
        problem.target.contains(t, x, tol)?
    ))
}

pub fn cmd_simulate(file: &ProblemFile, process: &ProcessFile, opts: &Options) -> Result<Output, CliError> {
    let problem = file.to_problem()?;
    let tol = opts.tolerances.target;
    let (text, out) = match load_process(&problem, process, opts.substeps)? {
        Loaded::Strict(sp) => {
            let (t, x) = sp.endpoint();
            let text = on_target_line(&problem, t, x, tol)?;
            (text, ProcessFile::Strict(StrictFile::from_process(&sp)))
        }
        Loaded::SpaceTime(ep) => {
            let (t, y) = ep.endpoint();
            let mut text = format!("pseudo-time horizon: S = {}\n", fmt_num(ep.horizon()));
            text += &on_target_line(&problem, t, y, tol)?;
            (text, ProcessFile::Spacetime(SpaceTimeFile::from_process(&ep)))
        }
    };
    let mut o = Output::new(text, to_json(&out));
    o.process = Some(out);
    Ok(o)
}

pub fn cmd_embed(file: &ProblemFile, process: &ProcessFile, opts: &Options) -> Result<Output, CliError> {
    let problem = file.to_problem()?;
    let Loaded::Strict(sp) = load_process(&problem, process, opts.substeps)? else {
        return Err(InputError::Invalid("embed expects a strict process (kind = \"strict\")".into()).into());
    };
    let ep = embed(&sp);
    let back = project(&ep, opts.w0_min)?;
    let dist = process_distance(&sp.graph(), &back.graph())?;
    let text = format!(
        "T = {} -> S = {}, {} cells\nround-trip distance: {:e}\n",
        fmt_num(sp.horizon()),
        fmt_num(ep.horizon()),
        ep.cells().len(),
        dist
    );
    let out = ProcessFile::Spacetime(SpaceTimeFile::from_process(&ep));
    let mut o = Output::new(text, to_json(&out));
    o.process = Some(out);
    Ok(o)
}

pub fn cmd_project(file: &ProblemFile, process: &ProcessFile, opts: &Options) -> Result<Output, CliError> {
    let problem = file.to_problem()?;
    let Loaded::SpaceTime(ep) = load_process(&problem, process, opts.substeps)? else {
        return Err(InputError::Invalid("project expects a space-time process (kind = \"spacetime\")".into()).into());
    };
    let sp = project(&ep, opts.w0_min)?;
    let (t, x) = sp.endpoint();
    let mut text = format!("S = {} -> T = {}, {} cells\n", fmt_num(ep.horizon()), fmt_num(t), sp.cells().len());
    text += &on_target_line(&problem, t, x, opts.tolerances.target)?;
    let out = ProcessFile::Strict(StrictFile::from_process(&sp));
    let mut o = Output::new(text, to_json(&out));
    o.process = Some(out);
    Ok(o)
}

fn report_text(rep: &CertificationReport) -> String {
    let mut t = String::new();
    if !rep.conditions.is_empty() {
        writeln!(t, "{:<10} {:<5} {:>12} {:>10} {:>12}  detail", "condition", "pass", "residual", "tol", "worst s")
            .unwrap();
        for c in &rep.conditions {
            writeln!(
                t,
                "{:<10} {:<5} {:>12.3e} {:>10.1e} {:>12}  {}",
                c.id.to_string(),
                if c.pass { "yes" } else { "NO" },
                c.residual,
                c.tolerance,
                c.worst_s.map(fmt_num).unwrap_or_else(|| "-".into()),
                c.detail.as_deref().unwrap_or("")
            )
            .unwrap();
        }
    }
    let verdict = match &rep.verdict {
        Verdict::Feasible => "FEASIBLE".to_string(),
        Verdict::Infeasible => "INFEASIBLE".to_string(),
        Verdict::Checked { pass } => format!("CHECKED ({})", if *pass { "all conditions pass" } else { "failed" }),
    };
    writeln!(t, "verdict: {verdict}").unwrap();
    if let Some(k) = &rep.killing_bracket {
        writeln!(t, "killing bracket: {k}").unwrap();
    }
    if let Some(w) = &rep.witness {
        writeln!(
            t,
            "witness: p0 = {}, lambda = {}, p(S) = {}, mu = {}, nu = {}",
            fmt_num(w.p0),
            fmt_num(w.lambda),
            fmt_vec(&w.p_final),
            fmt_vec(&w.mu),
            fmt_vec(&w.nu)
        )
        .unwrap();
    }
    if let Some(d) = rep.lineality_dimension {
        writeln!(t, "lineality dimension: {d}").unwrap();
    }
    writeln!(t, "brackets: {}", rep.brackets.join(", ")).unwrap();
    let m = &rep.metadata;
    write!(
        t,
        "grid: {} cells x {} substeps ({} nodes), bracket depth {}",
        m.cells, m.substeps, m.nodes, m.bracket_depth
    )
    .unwrap();
    if let Some(s) = m.control_samples {
        write!(t, ", {s} control samples").unwrap();
    }
    if let Some(r) = m.lp_rows {
        write!(t, ", {r} LP rows").unwrap();
    }
    t.push('\n');
    if !m.rescaled_cells.is_empty() {
        let names: Vec<String> = m.rescaled_cells.iter().map(|c| format!("I{c}")).collect();
        writeln!(t, "rescaled cells (w0 + |w| != 1): {}", names.join(", ")).unwrap();
    }
    t
}

fn report_output(command: &str, rep: CertificationReport, opts: &Options, exit_code: i32) -> Output {
    let file = ReportFile {
        tool: "hopmp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        tolerances: opts.tolerances,
        report: rep,
    };
    let mut o = Output::new(report_text(&file.report), to_json(&file));
    o.exit_code = exit_code;
    o.report = Some(file);
    o
}

pub fn cmd_check(
    file: &ProblemFile,
    process: &ProcessFile,
    multiplier: &MultiplierFile,
    opts: &Options,
) -> Result<Output, CliError> {
    let problem = file.to_problem()?;
    let ep = load_spacetime(&problem, process, opts.substeps)?;
    let (p0, lambda, p_final) = multiplier.values()?;
    let mult = Multiplier::from_terminal(&problem.system, &ep, p0, lambda, &p_final)?;
    let trees = enumerate_brackets(problem.system.m(), opts.depth);
    let rep = pmp::check_conditions(&problem, &ep, &mult, &trees, &opts.tolerances)?;
    let code = if rep.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok(report_output("check", rep, opts, code))
}

pub fn cmd_certify(file: &ProblemFile, process: &ProcessFile, opts: &Options) -> Result<Output, CliError> {
    let problem = file.to_problem()?;
    let ep = load_spacetime(&problem, process, opts.substeps)?;
    let rep = pmp::certify(&problem, &ep, opts.depth, opts.samples, &opts.tolerances)?;
    let code = match rep.verdict {
        Verdict::Infeasible => EXIT_INFEASIBLE,
        _ => EXIT_OK,
    };
    Ok(report_output("certify", rep, opts, code))
}
