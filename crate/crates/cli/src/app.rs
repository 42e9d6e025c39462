use std::fmt::Display;
use std::fs;
use std::path::Path;

use clap::ValueEnum;
use dgflow::dg::{
    run_flow, FlowResult, Method, Scheme, StepController, StepMode, StepOptions, StopCriteria,
    Termination, DEFAULT_TAU_MAX, DEFAULT_TAU_MIN,
};
use dgflow::grid::convolve_reflect;
use dgflow::io::{self, fixtures, Scaling};
use dgflow::{FunctionalModel, ImageGrid, Kernel, Mask};

use crate::args::{
    CompareArgs, FixtureArgs, FlowArgs, InitArg, ModelArg, ModelArgs, RunArgs, ScalingArg,
    SchemeArg,
};

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub msg: String,
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.msg)
    }
}

type Staged<T> = Result<T, Failure>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Staged<T>;
}

impl<T, E: Display> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Staged<T> {
        self.map_err(|e| Failure {
            stage,
            msg: e.to_string(),
        })
    }
}

/// Prefixes I/O failures with the path involved.
fn at<T>(path: &Path, r: dgflow::Result<T>) -> Result<T, String> {
    r.map_err(|e| match e {
        dgflow::Error::Io(io) => format!("{}: {io}", path.display()),
        e => e.to_string(),
    })
}

fn fail<T>(stage: &'static str, msg: impl Into<String>) -> Staged<T> {
    Err(Failure {
        stage,
        msg: msg.into(),
    })
}

/// Per-model defaults.
struct Defaults {
    alpha: f64,
    beta: f64,
    scheme: SchemeArg,
    tau: f64,
    adaptive: bool,
    scaling: ScalingArg,
}

fn defaults(kind: ModelArg, p: f64) -> Defaults {
    let dg = |alpha, beta| Defaults {
        alpha,
        beta,
        scheme: SchemeArg::Gonzalez,
        tau: 2.5,
        adaptive: false,
        scaling: ScalingArg::Unit,
    };
    let ia = |alpha, beta, scaling| Defaults {
        alpha,
        beta,
        scheme: SchemeArg::ItohAbe,
        tau: 1.0,
        adaptive: true,
        scaling,
    };
    match kind {
        ModelArg::Denoise | ModelArg::Deblur => dg(0.05, 0.001),
        ModelArg::Inpaint => ia(1e-4, 0.01, ScalingArg::Unit),
        ModelArg::DenoiseColor => ia(100.0, 1.0, ScalingArg::Byte),
        ModelArg::Tvp => ia(if p < 0.5 { 0.5 } else { 0.05 }, 0.001, ScalingArg::Unit),
    }
}

fn scaling(s: ScalingArg) -> Scaling {
    match s {
        ScalingArg::Unit => Scaling::Unit,
        ScalingArg::Byte => Scaling::Byte,
    }
}

fn range(s: Scaling) -> f64 {
    match s {
        Scaling::Unit => 1.0,
        Scaling::Byte => 255.0,
    }
}

pub struct Problem {
    pub model: FunctionalModel,
    pub x0: Vec<f64>,
    pub scaling: Scaling,
    pub defaults_scheme: SchemeArg,
    pub defaults_tau: f64,
    pub defaults_adaptive: bool,
}

fn parse_kernel(spec: &str) -> Staged<Kernel> {
    if let Some(n) = spec
        .strip_prefix("box")
        .and_then(|n| n.parse::<usize>().ok())
    {
        return Kernel::box_blur(n).stage("read-kernel");
    }
    at(Path::new(spec), io::read_kernel(spec)).stage("read-kernel")
}

fn scaled(u: ImageGrid, factor: f64) -> ImageGrid {
    let data = u.as_slice().iter().map(|v| v * factor).collect();
    u.with_data(data).expect("same shape")
}

pub fn build_problem(kind: ModelArg, m: &ModelArgs) -> Staged<Problem> {
    match (kind, m.mask.is_some()) {
        (ModelArg::Inpaint, false) => return fail("config", "inpaint requires --mask"),
        (k, true) if k != ModelArg::Inpaint => {
            return fail("config", "--mask is only valid for inpaint")
        }
        _ => {}
    }
    match (kind, m.kernel.is_some()) {
        (ModelArg::Deblur, false) => return fail("config", "deblur requires --kernel"),
        (k, true) if k != ModelArg::Deblur => {
            return fail("config", "--kernel is only valid for deblur")
        }
        _ => {}
    }
    if m.p.is_some() && kind != ModelArg::Tvp {
        return fail("config", "--p is only valid for tvp");
    }
    if m.size == 0 {
        return fail("config", "--size must be positive");
    }
    let p = m.p.unwrap_or(0.8);
    let d = defaults(kind, p);
    let sc = scaling(m.scaling.unwrap_or(d.scaling));
    let (alpha, beta) = (m.alpha.unwrap_or(d.alpha), m.beta.unwrap_or(d.beta));

    let kernel = m.kernel.as_deref().map(parse_kernel).transpose()?;
    let mask = match &m.mask {
        Some(path) => Some(at(path, io::read_mask(path)).stage("read-mask")?),
        None => None,
    };

    let mut data = match &m.input {
        Some(path) => at(path, io::read_image(path, sc)).stage("read-input")?,
        None => {
            let n = m.size;
            let base = match kind {
                ModelArg::DenoiseColor => fixtures::color_shapes(n, n),
                ModelArg::Deblur => {
                    convolve_reflect(&fixtures::shapes(n, n), kernel.as_ref().expect("checked"))
                        .stage("read-input")?
                }
                ModelArg::Inpaint => paint(fixtures::shapes(n, n), mask.as_ref().expect("checked"))
                    .stage("read-input")?,
                _ => fixtures::shapes(n, n),
            };
            scaled(base, range(sc))
        }
    };
    if m.sigma != 0.0 {
        let noise = io::synth_noise(data.nx(), data.ny(), data.channels(), m.sigma, m.seed)
            .stage("noise")?;
        data = fixtures::add(&data, &noise);
    }
    let x0 = match m.init {
        InitArg::Data => data.as_slice().to_vec(),
        InitArg::Random => {
            let r = io::random_image(
                data.nx(),
                data.ny(),
                data.channels(),
                m.seed.wrapping_add(1),
            )
            .stage("init")?;
            scaled(r, range(sc)).into_vec()
        }
    };
    let model = match kind {
        ModelArg::Denoise => FunctionalModel::denoise(data, alpha, beta),
        ModelArg::Deblur => FunctionalModel::deblur(data, kernel.expect("checked"), alpha, beta),
        ModelArg::Inpaint => FunctionalModel::inpaint(data, mask.expect("checked"), alpha, beta),
        ModelArg::DenoiseColor => FunctionalModel::multichannel(data, alpha, beta),
        ModelArg::Tvp => FunctionalModel::tvp(data, alpha, beta, p),
    }
    .stage("model")?;
    Ok(Problem {
        model,
        x0,
        scaling: sc,
        defaults_scheme: d.scheme,
        defaults_tau: d.tau,
        defaults_adaptive: d.adaptive,
    })
}

/// Paints masked pixels white, the way the built-in inpainting image is made.
fn paint(u: ImageGrid, mask: &Mask) -> dgflow::Result<ImageGrid> {
    if mask.shape() != (u.nx(), u.ny()) {
        return Err(dgflow::Error::Shape(format!(
            "mask is {:?}, image is {:?}",
            mask.shape(),
            (u.nx(), u.ny())
        )));
    }
    let data = u
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(&v, &m)| if m { 1.0 } else { v })
        .collect();
    u.with_data(data)
}

/// A fully resolved method choice.
#[derive(Clone, Copy, Debug)]
pub struct MethodSpec {
    pub scheme: SchemeArg,
    pub tau: f64,
    pub adaptive: bool,
}

impl MethodSpec {
    fn method(&self, flow: &FlowArgs) -> Method {
        match self.scheme {
            SchemeArg::Gonzalez => Method::Dg(Scheme::Gonzalez),
            SchemeArg::Meanvalue => Method::Dg(Scheme::MeanValue {
                order: flow.quadrature_order,
            }),
            SchemeArg::ItohAbe => Method::Dg(Scheme::ItohAbe),
            SchemeArg::Euler => Method::Euler,
            SchemeArg::Lagged => Method::Lagged {
                fixed_point: flow.fixed_point,
            },
        }
    }

    fn controller(&self, flow: &FlowArgs) -> Staged<StepController> {
        if self.adaptive {
            StepController::new(
                StepMode::Adaptive,
                self.tau,
                flow.tau_min.unwrap_or(DEFAULT_TAU_MIN.min(self.tau)),
                flow.tau_max.unwrap_or(DEFAULT_TAU_MAX.max(self.tau)),
            )
        } else {
            StepController::fixed(self.tau)
        }
        .stage("config")
    }

    fn name(&self) -> String {
        self.scheme
            .to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

/// Parses `scheme[:tau][:adaptive]`.
pub fn parse_run(spec: &str, default_tau: f64) -> Staged<MethodSpec> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    let scheme = SchemeArg::from_str(name, true)
        .or_else(|e| fail("config", format!("bad run {spec:?}: {e}")))?;
    let mut out = MethodSpec {
        scheme,
        tau: default_tau,
        adaptive: false,
    };
    for part in parts {
        if part == "adaptive" {
            out.adaptive = true;
        } else {
            out.tau = part
                .parse()
                .or_else(|_| fail("config", format!("bad step size in run {spec:?}")))?;
        }
    }
    Ok(out)
}

fn execute(problem: &Problem, spec: &MethodSpec, flow: &FlowArgs) -> Staged<FlowResult> {
    let ctl = spec.controller(flow)?;
    let mut opts = StepOptions::with_tol(flow.tol);
    opts.cg_tol = opts.cg_tol.min(flow.tol);
    let stepper = spec.method(flow).stepper(&problem.model, &opts);
    let stop = StopCriteria {
        max_steps: flow.max_steps,
        grad_tol: flow.grad_tol,
        energy_stall_eps: flow.stall_eps,
    };
    Ok(run_flow(
        &problem.model,
        &*stepper,
        ctl,
        stop,
        &problem.x0,
        flow.record_time,
    ))
}

fn summary_line(r: &FlowResult) -> String {
    let last = r.trace.last().expect("trace has step 0");
    format!(
        "final_energy={} steps={} grad_norm={}",
        last.energy, last.step, last.grad_norm
    )
}

/// Exit status for a finished flow.
pub fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::GradTol => 0,
        Termination::MaxSteps | Termination::Stalled => 2,
        Termination::Failed => 1,
    }
}

pub fn run(kind: ModelArg, args: &RunArgs) -> Staged<i32> {
    let problem = build_problem(kind, &args.model)?;
    let spec = MethodSpec {
        scheme: args.flow.scheme.unwrap_or(problem.defaults_scheme),
        tau: args.flow.tau.unwrap_or(problem.defaults_tau),
        adaptive: args.flow.adaptive.unwrap_or(problem.defaults_adaptive),
    };
    let result = execute(&problem, &spec, &args.flow)?;
    if let Some(path) = &args.trace {
        at(path, io::write_trace(path, &result.trace)).stage("write-trace")?;
    }
    if let Some(e) = result.error {
        return fail("flow", e.to_string());
    }
    if let Some(path) = &args.output {
        let img = problem
            .model
            .state(result.state.clone())
            .stage("write-output")?;
        at(
            path,
            io::write_image(path, &img, args.model.maxval, problem.scaling),
        )
        .stage("write-output")?;
    }
    println!("{}", summary_line(&result));
    Ok(exit_code(result.termination))
}

pub fn compare(args: &CompareArgs) -> Staged<i32> {
    if args.runs.len() < 2 {
        return fail("config", "compare needs at least two --run entries");
    }
    let problem = build_problem(args.model, &args.problem)?;
    let default_tau = args.flow.tau.unwrap_or(problem.defaults_tau);
    let specs = args
        .runs
        .iter()
        .map(|s| parse_run(s, default_tau))
        .collect::<Staged<Vec<_>>>()?;
    fs::create_dir_all(&args.out_dir).stage("write-trace")?;
    // Every stepper is deterministic, so running them concurrently does not
    // change any result.
    let results = dgflow::par::map_jobs(&specs, |s| execute(&problem, s, &args.flow));

    let mut summary =
        String::from("run,scheme,tau,adaptive,termination,steps,final_energy,grad_norm\n");
    let mut code = 0;
    for (k, (spec, result)) in specs.iter().zip(results).enumerate() {
        let result = result?;
        let file = args.out_dir.join(format!("{k:02}-{}.csv", spec.name()));
        at(&file, io::write_trace(&file, &result.trace)).stage("write-trace")?;
        if let Some(e) = &result.error {
            return fail("flow", format!("run {k} ({}): {e}", spec.name()));
        }
        let last = result.trace.last().expect("trace has step 0");
        summary.push_str(&format!(
            "{k},{},{},{},{:?},{},{},{}\n",
            spec.name(),
            spec.tau,
            spec.adaptive,
            result.termination,
            last.step,
            last.energy,
            last.grad_norm
        ));
        println!("run={k} scheme={} {}", spec.name(), summary_line(&result));
        code = code.max(exit_code(result.termination));
    }
    fs::write(args.out_dir.join("summary.csv"), summary).stage("write-trace")?;
    Ok(code)
}

pub fn fixture(args: &FixtureArgs) -> Staged<i32> {
    if args.size == 0 {
        return fail("config", "--size must be positive");
    }
    let n = args.size;
    let mut img = if args.color {
        fixtures::color_shapes(n, n)
    } else {
        fixtures::shapes(n, n)
    };
    if let Some(path) = &args.mask {
        if args.color {
            return fail("config", "--mask applies to grayscale fixtures only");
        }
        let mask = fixtures::scratch_mask(n, n);
        write_mask(path, &mask)?;
        img = paint(img, &mask).stage("fixture")?;
    }
    if args.sigma != 0.0 {
        let noise = io::synth_noise(n, n, img.channels(), args.sigma, args.seed).stage("noise")?;
        img = fixtures::add(&img, &noise);
    }
    at(
        &args.output,
        io::write_image(&args.output, &img, args.maxval, Scaling::Unit),
    )
    .stage("write-output")?;
    Ok(0)
}

fn write_mask(path: &Path, mask: &Mask) -> Staged<()> {
    at(path, io::write_mask(path, mask)).stage("write-output")
}
