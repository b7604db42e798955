use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use needlet_core::correlation::{
    analytic_covariance, check_theorem_hypothesis, denominator_lower_bound_check, gt_decay_exponent, lemma_scale_sweep,
    scaled_bound, theorem_constants, theorem_decay_check, DenominatorReport, LemmaScaleReport, DEFAULT_LEMMA_SAMPLES,
};
use needlet_core::frame::{build_grid, default_j_range, write_grid_csv};
use needlet_core::kernel::{localization_check, LocalizationReport, DEFAULT_EPS_TAIL, DEFAULT_THETA_SAMPLES};
use needlet_core::legendre::cos_angle;
use needlet_core::numeric::linspace;
use needlet_core::spectrum::{
    verify_derivative_decay, verify_envelope, DerivativeDecayReport, EnvelopeReport, SpectrumFamily,
    DEFAULT_ENVELOPE_RATIO_CAP, DEFAULT_GROWTH_TOLERANCE,
};
use needlet_core::{
    analytic_correlation, estimate_frame_bounds, monte_carlo_correlation, CorrelationQuery, DecayReport, KernelSpec,
};

use crate::config::{
    CorrelationConfig, Defaults, FrameConfig, KernelConfig, RunConfig, SimulateConfig, VerifyConfig, THETA_MIN,
};
use crate::CliError;

/// What a command produced, before it is routed to files and streams.
#[derive(Debug, Default)]
pub struct Outcome {
    /// CSV table, if the command emits one.
    pub table: Option<String>,
    /// JSON report, if the command emits one.
    pub report: Option<String>,
    pub exit_code: u8,
}

pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config {
        RunConfig::Kernel(c) => kernel(c),
        RunConfig::Correlation(c) => correlation(config, c),
        RunConfig::Simulate(c) => simulate(c),
        RunConfig::Verify(c) => verify(config, c),
        RunConfig::Frame(c) => frame(c),
    }
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<String, CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Shortest round-trip form, switching to exponent notation for extreme magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig,
    defaults: Defaults,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize>(config: &RunConfig, body: T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope { config, defaults: Defaults::current(), body })?;
    s.push('\n');
    Ok(s)
}

fn positive_scales(ts: &[f64]) -> Result<(), CliError> {
    if ts.is_empty() {
        return Err(CliError::Config("at least one scale t is required".into()));
    }
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(CliError::Config(format!("scale t must be positive, got {t}")));
    }
    Ok(())
}

pub fn parse_theta_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Config(format!("theta grid '{spec}' is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !(start >= 0.0) || !(stop <= PI + 1e-9) || start > stop {
        return Err(CliError::Config(format!("theta grid '{spec}' must satisfy 0 <= start <= stop <= pi, count >= 1")));
    }
    Ok(linspace(start, stop, count).into_iter().map(|th| th.clamp(THETA_MIN, PI)).collect())
}

fn kernel(c: &KernelConfig) -> Result<Outcome, CliError> {
    let profile = c.profile.build()?;
    positive_scales(&c.t)?;
    let thetas = parse_theta_grid(&c.theta)?;
    let mut table = Table::new(&["t", "theta", "value"])?;
    for &t in &c.t {
        let spec = KernelSpec::new(profile, t, c.eps_tail)?;
        for &theta in &thetas {
            table.row(&[num(t), num(theta), num(spec.eval(theta.cos())?)])?;
        }
    }
    Ok(Outcome { table: Some(table.finish()?), ..Default::default() })
}

fn geometry(cos_gamma: &[f64], distance: &[f64]) -> Result<Vec<f64>, CliError> {
    let mut out = cos_gamma.to_vec();
    for &d in distance {
        if !(0.0..=PI).contains(&d) {
            return Err(CliError::Config(format!("distance {d} outside [0, pi]")));
        }
        out.push(d.cos());
    }
    if out.is_empty() {
        return Err(CliError::Config("give --cos-gamma or --distance".into()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitBody {
    reports: Vec<DecayReport>,
}

fn correlation(run: &RunConfig, c: &CorrelationConfig) -> Result<Outcome, CliError> {
    let profile = c.profile.build()?;
    let spectrum = c.spectrum.build()?;
    positive_scales(&c.t)?;
    let cosines = geometry(&c.cos_gamma, &c.distance)?;
    if c.fit {
        check_theorem_hypothesis(profile.r(), spectrum.alpha())?;
    }
    let (exponent, n) = theorem_constants(profile.r(), spectrum.alpha());
    let mut table =
        Table::new(&["t", "cos_gamma", "covariance", "correlation", "predicted_exponent", "n", "bound_constant"])?;
    for &t in &c.t {
        for &x in &cosines {
            let q = CorrelationQuery::new(&profile, &spectrum, t, x)?;
            let cov = analytic_covariance(&q)?;
            let cor = analytic_correlation(&q)?;
            let bound = scaled_bound(cor, q.distance(), t, exponent, n);
            table.row(&[num(t), num(q.cos_gamma), num(cov), num(cor), num(exponent), n.to_string(), num(bound)])?;
        }
    }
    let report = if c.fit {
        let fit_cosines: Vec<f64> = cosines.iter().copied().filter(|x| x.clamp(-1.0, 1.0).acos() >= 0.1).collect();
        if fit_cosines.is_empty() {
            return Err(CliError::Config("--fit needs at least one separation d >= 0.1".into()));
        }
        let reports = fit_cosines
            .iter()
            .map(|&x| theorem_decay_check(&profile, &spectrum, x, &c.t))
            .collect::<Result<Vec<_>, _>>()?;
        Some(to_json(run, FitBody { reports })?)
    } else {
        None
    };
    Ok(Outcome { table: Some(table.finish()?), report, exit_code: 0 })
}

fn parse_pair(s: &str) -> Result<((f64, f64), (f64, f64)), CliError> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("pair '{s}' is not theta_x:phi_x:theta_y:phi_y")))?;
    if v.len() != 4 {
        return Err(CliError::Config(format!("pair '{s}' needs four numbers")));
    }
    Ok(((v[0], v[1]), (v[2], v[3])))
}

/// Estimates beyond this many standard errors indicate a defect, not chance.
pub const Z_ALARM: f64 = 5.0;

fn simulate(c: &SimulateConfig) -> Result<Outcome, CliError> {
    let profile = c.profile.build()?;
    let spectrum = c.spectrum.build()?;
    positive_scales(&c.t)?;
    let mut pairs = Vec::new();
    for &d in &c.distance {
        if !(0.0..=PI).contains(&d) {
            return Err(CliError::Config(format!("distance {d} outside [0, pi]")));
        }
        pairs.push(((FRAC_PI_2, 0.0), (FRAC_PI_2, d)));
    }
    for p in &c.pair {
        pairs.push(parse_pair(p)?);
    }
    if pairs.is_empty() {
        return Err(CliError::Config("give --distance or --pair".into()));
    }
    let pool = match c.threads {
        Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut table = Table::new(&[
        "t",
        "theta_x",
        "phi_x",
        "theta_y",
        "phi_y",
        "cos_gamma",
        "replicas",
        "seed",
        "estimate",
        "stderr",
        "analytic",
        "z",
    ])?;
    let mut alarm = false;
    for &t in &c.t {
        for &(x, y) in &pairs {
            let mc = pool.install(|| monte_carlo_correlation(&profile, &spectrum, t, x, y, c.replicas, c.seed))?;
            let cos = cos_angle(x, y);
            let exact = analytic_correlation(&CorrelationQuery::new(&profile, &spectrum, t, cos)?)?;
            let diff = mc.estimate - exact;
            let z = if mc.stderr > 0.0 {
                diff / mc.stderr
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
            alarm |= !(z.abs() <= Z_ALARM);
            table.row(&[
                num(t),
                num(x.0),
                num(x.1),
                num(y.0),
                num(y.1),
                num(cos),
                c.replicas.to_string(),
                c.seed.to_string(),
                num(mc.estimate),
                num(mc.stderr),
                num(exact),
                num(z),
            ])?;
        }
    }
    Ok(Outcome { table: Some(table.finish()?), report: None, exit_code: if alarm { 1 } else { 0 } })
}

#[derive(Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
enum Check {
    Lemma { status: Status, report: LemmaScaleReport },
    Denominator { status: Status, report: DenominatorReport },
    Localization { status: Status, report: LocalizationReport },
    Envelope { status: Status, report: EnvelopeReport },
    DegreeBalance { status: Status, balance: f64 },
    DerivativeDecay { status: Status, report: DerivativeDecayReport },
}

impl Check {
    fn status(&self) -> Status {
        match self {
            Check::Lemma { status, .. }
            | Check::Denominator { status, .. }
            | Check::Localization { status, .. }
            | Check::Envelope { status, .. }
            | Check::DegreeBalance { status, .. }
            | Check::DerivativeDecay { status, .. } => *status,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

impl From<bool> for Status {
    fn from(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Serialize)]
struct VerifyBody {
    status: Status,
    checks: Vec<Check>,
}

fn verify(run: &RunConfig, c: &VerifyConfig) -> Result<Outcome, CliError> {
    let profile = c.profile.build()?;
    let spectrum = c.spectrum.build()?;
    let mu = c.lemma_mu.unwrap_or_else(|| gt_decay_exponent(&profile, &spectrum));
    if !(mu + 2.0 > 0.0) {
        return Err(CliError::Config(format!("the lemma requires mu + 2 > 0, got mu = {mu}")));
    }
    for ts in [&c.lemma_t, &c.denominator_t, &c.localization_t] {
        positive_scales(ts)?;
    }

    let mut checks = Vec::new();
    let lemma = lemma_scale_sweep(&profile, &spectrum, mu, &c.lemma_t, DEFAULT_LEMMA_SAMPLES)?;
    checks.push(Check::Lemma { status: lemma.pass.into(), report: lemma });
    let denom = denominator_lower_bound_check(&profile, &spectrum, &c.denominator_t)?;
    checks.push(Check::Denominator { status: denom.pass.into(), report: denom });
    let loc =
        localization_check(&profile, &c.localization_t, c.localization_n, DEFAULT_THETA_SAMPLES, DEFAULT_EPS_TAIL)?;
    checks.push(Check::Localization { status: loc.pass.into(), report: loc });
    let env = verify_envelope(&spectrum, c.envelope_lmax, DEFAULT_ENVELOPE_RATIO_CAP)?;
    checks.push(Check::Envelope { status: env.pass.into(), report: env });
    if let (Some(balance), SpectrumFamily::RationalLog { .. }) = (spectrum.degree_balance(), spectrum.family()) {
        checks.push(Check::DegreeBalance { status: (balance.abs() < 1e-12).into(), balance });
    }
    let deriv = verify_derivative_decay(
        &spectrum,
        c.derivative_kmax,
        c.derivative_lmin,
        c.derivative_lmax,
        DEFAULT_GROWTH_TOLERANCE,
    )?;
    checks.push(Check::DerivativeDecay { status: deriv.pass.into(), report: deriv });

    let status: Status = checks.iter().all(|ch| ch.status() == Status::Pass).into();
    let exit_code = if status == Status::Pass { 0 } else { 1 };
    Ok(Outcome { table: None, report: Some(to_json(run, VerifyBody { status, checks })?), exit_code })
}

fn frame(c: &FrameConfig) -> Result<Outcome, CliError> {
    let profile = c.profile.build()?;
    if c.a.is_empty() || c.band_limit.is_empty() || c.oversample.is_empty() {
        return Err(CliError::Config("--a, --band-limit and --oversample need at least one value".into()));
    }
    let mut table =
        Table::new(&["a", "oversample", "band_limit", "j_min", "j_max", "a_hat", "b_hat", "ratio", "ill_conditioned"])?;
    let mut ill = false;
    let mut first_j_min = None;
    for &a in &c.a {
        for &l in &c.band_limit {
            let j_min = match c.j_min {
                Some(j) => j,
                None => *default_j_range(&profile, a, l)?.start(),
            };
            first_j_min.get_or_insert(j_min);
            for &os in &c.oversample {
                let est = estimate_frame_bounds(&profile, a, j_min..=c.j_max, l, os)?;
                ill |= est.ill_conditioned;
                table.row(&[
                    num(a),
                    num(os),
                    l.to_string(),
                    est.j_min.to_string(),
                    est.j_max.to_string(),
                    num(est.a_hat),
                    num(est.b_hat),
                    num(est.ratio),
                    est.ill_conditioned.to_string(),
                ])?;
            }
        }
    }
    if let Some(path) = &c.export_grid {
        let j = c.export_j.or(first_j_min).unwrap_or(c.j_max);
        let grid = build_grid(c.a[0], j, c.oversample[0])?;
        let file = std::fs::File::create(path)?;
        write_grid_csv(&grid, std::io::BufWriter::new(file))?;
    }
    Ok(Outcome { table: Some(table.finish()?), report: None, exit_code: if ill { 3 } else { 0 } })
}
