//! Reproducible experiment runner: validates experiment descriptors,
//! dispatches to the analysis modules, and writes CSV/JSON artifacts whose
//! headers embed the fully-resolved descriptor and its content hash.

use crate::adaptive::{
    self, protocol3_distribution, run_protocol1, NoiseSpec, ProtocolConfig,
};
use crate::channel::reduce_angle;
use crate::covariant::{
    average_error_exact, error_quadratic_form, optimal_state, outcome_density, phi_grid,
    spectrum_from_profile, ErrorKernel, ProfileFunction,
};
use crate::error::{PhaseLabError, Result};
use crate::noisy::{noisy_average_error, noisy_limiting_density, PoissonMixture};
use crate::qfi;
use crate::stats::{ks_distance, scaling_exponent, trapezoid, EmpiricalSample};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Experiment command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Qfi,
    Covariant,
    NoisyCovariant,
    Adaptive,
    LimitDist,
    Scaling,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Qfi => "qfi",
            CommandKind::Covariant => "covariant",
            CommandKind::NoisyCovariant => "noisy-covariant",
            CommandKind::Adaptive => "adaptive",
            CommandKind::LimitDist => "limit-dist",
            CommandKind::Scaling => "scaling",
        }
    }
}

/// Key-value parameters; unknown keys are rejected at parse time.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_exponent: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    /// Output artifact path. Accepted in configs but excluded from the
    /// canonical serialization, so where a file lands never changes the
    /// descriptor hash or the artifact contents.
    #[serde(skip_serializing)]
    #[serde(default)]
    pub out: Option<String>,
}

/// A command plus its parameters; hashing and header echo use the resolved
/// form with all defaults filled in.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDescriptor {
    pub command: CommandKind,
    #[serde(default)]
    pub parameters: Params,
}

impl ExperimentDescriptor {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serialization is infallible")
    }

    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Fill command-specific defaults and validate choice parameters.
    pub fn resolved(&self) -> Result<ExperimentDescriptor> {
        let mut p = self.parameters.clone();
        p.seed = Some(p.seed.unwrap_or(0));
        match self.command {
            CommandKind::Qfi => {
                p.p = Some(p.p.unwrap_or(0.5));
                p.theta = Some(p.theta.unwrap_or(0.3));
                p.n = Some(p.n.unwrap_or(10));
            }
            CommandKind::Covariant => {
                p.profile = Some(p.profile.unwrap_or_else(|| "sine".into()));
                p.kernel = Some(p.kernel.unwrap_or_else(|| "half-angle".into()));
                p.n = Some(p.n.unwrap_or(10));
                p.bins = Some(p.bins.unwrap_or(512));
                parse_kernel(p.kernel.as_deref().unwrap())?;
            }
            CommandKind::NoisyCovariant => {
                p.profile = Some(p.profile.unwrap_or_else(|| "sine".into()));
                p.kernel = Some(p.kernel.unwrap_or_else(|| "half-angle".into()));
                p.n = Some(p.n.unwrap_or(100));
                p.epsilon = Some(p.epsilon.unwrap_or(1.0));
                p.bins = Some(p.bins.unwrap_or(257));
                p.window = Some(p.window.unwrap_or(60.0));
                parse_kernel(p.kernel.as_deref().unwrap())?;
            }
            CommandKind::Adaptive => {
                p.epsilon = Some(p.epsilon.unwrap_or(0.0));
                p.n_exponent = Some(p.n_exponent.unwrap_or(6));
                p.trials = Some(p.trials.unwrap_or(1000));
                let grid = p.theta_grid.get_or_insert_with(|| "uniform".into());
                if grid != "uniform" && grid != "on-grid" {
                    return Err(PhaseLabError::InvalidParameter(format!(
                        "theta_grid must be 'uniform' or 'on-grid', got '{grid}'"
                    )));
                }
            }
            CommandKind::LimitDist => {
                p.epsilon = Some(p.epsilon.unwrap_or(1.0));
                p.n_exponent = Some(p.n_exponent.unwrap_or(10));
                p.trials = Some(p.trials.unwrap_or(100_000));
                p.bins = Some(p.bins.unwrap_or(200));
                p.window = Some(p.window.unwrap_or(12.0 * PI));
            }
            CommandKind::Scaling => {
                let q = p.quantity.get_or_insert_with(|| "covariant-sine".into());
                match q.as_str() {
                    "rld-schedule" | "rld-constant" | "covariant-sine"
                    | "covariant-uniform" => {}
                    other => {
                        return Err(PhaseLabError::InvalidParameter(format!(
                            "quantity must be one of rld-schedule, rld-constant, \
                             covariant-sine, covariant-uniform; got '{other}'"
                        )))
                    }
                }
                p.n_min = Some(p.n_min.unwrap_or(16));
                p.n_max = Some(p.n_max.unwrap_or(4096));
                p.epsilon = Some(p.epsilon.unwrap_or(1.0));
                p.p = Some(p.p.unwrap_or(0.1));
                if p.n_min.unwrap() < 2 || p.n_max.unwrap() < 2 * p.n_min.unwrap() {
                    return Err(PhaseLabError::InvalidParameter(
                        "need 2 <= n_min and n_max >= 2 n_min".into(),
                    ));
                }
            }
        }
        Ok(ExperimentDescriptor {
            command: self.command,
            parameters: p,
        })
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_kernel(name: &str) -> Result<ErrorKernel> {
    match name {
        "half-angle" => Ok(ErrorKernel::HalfAngle),
        "full-angle" => Ok(ErrorKernel::FullAngle),
        other => Err(PhaseLabError::InvalidParameter(format!(
            "kernel must be 'half-angle' or 'full-angle', got '{other}'"
        ))),
    }
}

fn parse_profile(name: &str) -> Result<ProfileFunction> {
    match name {
        "uniform" => Ok(ProfileFunction::Uniform),
        "sine" => Ok(ProfileFunction::Sine),
        path => ProfileFunction::from_file(Path::new(path)),
    }
}

/// Round-trip-safe formatting: 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a CSV with the provenance header: artifact version, resolved
/// descriptor, content hash, then the column line and rows.
pub fn write_csv(
    path: &Path,
    descriptor: &ExperimentDescriptor,
    columns: &str,
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# phaselab {ARTIFACT_VERSION}\n"));
    out.push_str(&format!("# descriptor: {}\n", descriptor.canonical_json()));
    out.push_str(&format!("# descriptor-sha256: {}\n", descriptor.content_hash()));
    out.push_str(columns);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

fn provenance(descriptor: &ExperimentDescriptor) -> serde_json::Value {
    serde_json::json!({
        "artifact_version": ARTIFACT_VERSION,
        "descriptor": descriptor,
        "descriptor_sha256": descriptor.content_hash(),
    })
}

/// Run a descriptor: writes any artifact files and returns the JSON summary.
pub fn run(descriptor: &ExperimentDescriptor) -> Result<serde_json::Value> {
    let resolved = descriptor.resolved()?;
    let mut summary = match resolved.command {
        CommandKind::Qfi => run_qfi(&resolved)?,
        CommandKind::Covariant => run_covariant(&resolved)?,
        CommandKind::NoisyCovariant => run_noisy_covariant(&resolved)?,
        CommandKind::Adaptive => run_adaptive(&resolved)?,
        CommandKind::LimitDist => run_limit_dist(&resolved)?,
        CommandKind::Scaling => run_scaling(&resolved)?,
    };
    if let serde_json::Value::Object(map) = &mut summary {
        if let serde_json::Value::Object(prov) = provenance(&resolved) {
            for (k, v) in prov {
                map.insert(k, v);
            }
        }
    }
    Ok(summary)
}

/// Exit code for an error: 2 for validation problems, 3 for numerical
/// contract violations.
pub fn exit_code_for(err: &PhaseLabError) -> i32 {
    match err {
        PhaseLabError::InvalidParameter(_)
        | PhaseLabError::InvalidState(_)
        | PhaseLabError::DimensionMismatch { .. }
        | PhaseLabError::NotDirichlet { .. }
        | PhaseLabError::Io(_)
        | PhaseLabError::Serde(_) => 2,
        PhaseLabError::NonHermitian { .. }
        | PhaseLabError::SupportViolation { .. }
        | PhaseLabError::RldDivergence
        | PhaseLabError::NumericalContract(_) => 3,
    }
}

fn run_qfi(d: &ExperimentDescriptor) -> Result<serde_json::Value> {
    let p = d.parameters.p.unwrap();
    let theta = d.parameters.theta.unwrap();
    let n = d.parameters.n.unwrap();
    let params = crate::channel::ChannelParams::new(theta, p)?;
    let rld_closed = qfi::rld_channel_qfi_closed(p)?;
    let rld_numeric = qfi::rld_channel_qfi_numeric(params)?;
    let sld_sequential = qfi::sequential_sld_qfi(p, n)?;
    let ghz_sld = qfi::sld_qfi(&qfi::ghz_family_point(params, n)?)?;
    let summary = serde_json::json!({
        "p": p,
        "n": n,
        "rld_closed": rld_closed,
        "rld_numeric": rld_numeric,
        "n_use_rld_bound": qfi::n_use_rld_bound(p, n)?,
        "sld_sequential": sld_sequential,
        "sld_ghz": ghz_sld,
    });
    if let Some(out) = &d.parameters.out {
        write_json(Path::new(out), d, &summary)?;
    }
    Ok(summary)
}

fn write_json(
    path: &Path,
    descriptor: &ExperimentDescriptor,
    summary: &serde_json::Value,
) -> Result<()> {
    let mut doc = provenance(descriptor);
    if let (serde_json::Value::Object(map), serde_json::Value::Object(extra)) =
        (&mut doc, summary.clone())
    {
        for (k, v) in extra {
            map.insert(k, v);
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(serde_json::to_string_pretty(&doc)?.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

fn run_covariant(d: &ExperimentDescriptor) -> Result<serde_json::Value> {
    let n = d.parameters.n.unwrap();
    let kernel = parse_kernel(d.parameters.kernel.as_deref().unwrap())?;
    let profile = parse_profile(d.parameters.profile.as_deref().unwrap())?;
    let (spectrum, _) = spectrum_from_profile(&profile, n)?;
    let error = error_quadratic_form(&spectrum, kernel);
    let error_quadrature = average_error_exact(&spectrum, kernel);
    let (_, min_error) = optimal_state(n)?;

    if let Some(out) = &d.parameters.out {
        let grid = phi_grid(d.parameters.bins.unwrap());
        let curve = outcome_density(&spectrum, &grid)?;
        let rows: Vec<Vec<String>> = grid
            .iter()
            .zip(curve.density())
            .map(|(&x, &v)| vec![format_value(x), format_value(v)])
            .collect();
        write_csv(Path::new(out), d, "x,density", &rows)?;
    }
    Ok(serde_json::json!({
        "n": n,
        "average_error": error,
        "average_error_quadrature": error_quadrature,
        "min_error_optimal_state": min_error,
    }))
}

fn run_noisy_covariant(d: &ExperimentDescriptor) -> Result<serde_json::Value> {
    let n = d.parameters.n.unwrap();
    let epsilon = d.parameters.epsilon.unwrap();
    let kernel = parse_kernel(d.parameters.kernel.as_deref().unwrap())?;
    let profile = parse_profile(d.parameters.profile.as_deref().unwrap())?;
    let mix = PoissonMixture::new(epsilon)?;
    let error = noisy_average_error(&profile, &mix, n, kernel)?;

    if let Some(out) = &d.parameters.out {
        let grid = crate::covariant::t_grid(
            d.parameters.window.unwrap(),
            d.parameters.bins.unwrap(),
        );
        let curve = noisy_limiting_density(&profile, &mix, &grid)?;
        let rows: Vec<Vec<String>> = grid
            .iter()
            .zip(curve.density())
            .map(|(&x, &v)| vec![format_value(x), format_value(v)])
            .collect();
        write_csv(Path::new(out), d, "x,density", &rows)?;
    }
    Ok(serde_json::json!({
        "n": n,
        "epsilon": epsilon,
        "poisson_k_max": mix.k_max(),
        "poisson_mass": mix.mass(),
        "finite_n_error": error.finite_n,
        "asymptotic_error": error.asymptotic,
    }))
}

fn run_adaptive(d: &ExperimentDescriptor) -> Result<serde_json::Value> {
    use rand::{Rng, SeedableRng};
    let n_exp = d.parameters.n_exponent.unwrap();
    let epsilon = d.parameters.epsilon.unwrap();
    let trials = d.parameters.trials.unwrap();
    let seed = d.parameters.seed.unwrap();
    let on_grid = d.parameters.theta_grid.as_deref() == Some("on-grid");
    let fixed_theta = d.parameters.theta;
    let n = (1u64 << (n_exp + 1)) - 1;
    let grid_size = 1u64 << (n_exp + 1);

    let mut rows = Vec::with_capacity(trials);
    let mut exact = 0usize;
    let mut sq_sum = 0.0;
    for trial in 0..trials as u64 {
        // The theta draw shares the trial's RNG stream so runs stay
        // reproducible regardless of scheduling.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let theta = match fixed_theta {
            Some(t) => t,
            None if on_grid => {
                let ell = rng.gen_range(0..grid_size);
                reduce_angle(2.0 * PI * ell as f64 / grid_size as f64)
            }
            None => PI * (2.0 * rng.gen::<f64>() - 1.0),
        };
        let cfg = ProtocolConfig::new(n_exp, theta, NoiseSpec::Schedule(epsilon))?;
        let t = run_protocol1(&cfg, seed, trial);
        let err = reduce_angle(t.estimate - theta);
        if err.abs() < 1e-9 {
            exact += 1;
        }
        sq_sum += err * err;
        rows.push(vec![
            trial.to_string(),
            format_value(theta),
            format_value(t.estimate),
            t.bits.iter().map(|b| char::from(b'0' + b)).collect(),
            t.flips.iter().map(|b| char::from(b'0' + b)).collect(),
        ]);
    }
    if let Some(out) = &d.parameters.out {
        write_csv(Path::new(out), d, "trial,theta,estimate,bits,flips", &rows)?;
    }
    let mse = sq_sum / trials as f64;
    Ok(serde_json::json!({
        "N": n_exp,
        "n_uses": n,
        "epsilon": epsilon,
        "trials": trials,
        "recovery_rate": exact as f64 / trials as f64,
        "mean_square_error": mse,
        "n_times_mse": n as f64 * mse,
        "asymptote": adaptive::average_error_asymptote(epsilon)?,
    }))
}

fn run_limit_dist(d: &ExperimentDescriptor) -> Result<serde_json::Value> {
    let n_exp = d.parameters.n_exponent.unwrap();
    let epsilon = d.parameters.epsilon.unwrap();
    let trials = d.parameters.trials.unwrap();
    let bins = d.parameters.bins.unwrap();
    let window = d.parameters.window.unwrap();
    let seed = d.parameters.seed.unwrap();

    let errors0 = adaptive::rescaled_errors(0.0, n_exp, trials, seed)?;
    let errors1 = adaptive::rescaled_errors(epsilon, n_exp, trials, seed.wrapping_add(1))?;
    let curve0 = crate::stats::histogram(&errors0, bins, -window, window)?;
    let curve1 = crate::stats::histogram(&errors1, bins, -window, window)?;

    if let Some(out) = &d.parameters.out {
        let rows: Vec<Vec<String>> = curve0
            .grid()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                vec![
                    format_value(x),
                    format_value(curve0.density()[i]),
                    format_value(curve1.density()[i]),
                ]
            })
            .collect();
        write_csv(Path::new(out), d, "x,density_eps0,density_eps1", &rows)?;
    }

    let in_window = |e: &[f64]| e.iter().filter(|v| v.abs() <= window).count() as f64;
    let tail_beyond_2pi =
        |e: &[f64]| e.iter().filter(|v| v.abs() > 2.0 * PI).count() as f64 / e.len() as f64;
    let sample1 = EmpiricalSample::new(
        errors1.iter().copied().filter(|v| v.abs() <= window).collect(),
    )?;
    let ks = ks_distance(&sample1, &curve0.cdf())?;
    Ok(serde_json::json!({
        "N": n_exp,
        "epsilon": epsilon,
        "trials": trials,
        "bins": bins,
        "window": window,
        "mass_in_window_eps0": in_window(&errors0) / trials as f64,
        "mass_in_window_eps1": in_window(&errors1) / trials as f64,
        "tail_mass_2pi_eps0": tail_beyond_2pi(&errors0),
        "tail_mass_2pi_eps1": tail_beyond_2pi(&errors1),
        "ks_eps1_vs_eps0": ks,
        "histogram_mass_eps0": trapezoid(curve0.grid(), curve0.density()),
        "histogram_mass_eps1": trapezoid(curve1.grid(), curve1.density()),
    }))
}

fn run_scaling(d: &ExperimentDescriptor) -> Result<serde_json::Value> {
    let quantity = d.parameters.quantity.as_deref().unwrap();
    let n_min = d.parameters.n_min.unwrap();
    let n_max = d.parameters.n_max.unwrap();
    let epsilon = d.parameters.epsilon.unwrap();
    let p_const = d.parameters.p.unwrap();

    let mut ns = Vec::new();
    let mut n = n_min;
    while n <= n_max {
        ns.push(n);
        n *= 2;
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in &ns {
        let value = match quantity {
            "rld-schedule" => qfi::n_use_rld_bound(epsilon / n as f64, n)?,
            "rld-constant" => qfi::n_use_rld_bound(p_const, n)?,
            "covariant-sine" => {
                let (s, _) = spectrum_from_profile(&ProfileFunction::Sine, n)?;
                error_quadratic_form(&s, ErrorKernel::HalfAngle)
            }
            "covariant-uniform" => {
                let (s, _) = spectrum_from_profile(&ProfileFunction::Uniform, n)?;
                error_quadratic_form(&s, ErrorKernel::HalfAngle)
            }
            _ => unreachable!("validated in resolved()"),
        };
        points.push((n as f64, value));
    }
    if let Some(out) = &d.parameters.out {
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|&(n, v)| vec![format!("{}", n as u64), format_value(v)])
            .collect();
        write_csv(Path::new(out), d, "n,value", &rows)?;
    }
    let fit = scaling_exponent(&points)?;
    Ok(serde_json::json!({
        "quantity": quantity,
        "n_values": ns,
        "points": points.iter().map(|&(_, v)| v).collect::<Vec<_>>(),
        "exponent": fit.exponent,
        "prefactor": fit.prefactor,
        "r_squared": fit.r_squared,
    }))
}

/// Exact-outcome oracle distribution for the adaptive protocol; exposed so
/// the CLI can cross-check the sampler on demand.
pub fn protocol_distribution_check(theta: f64, n_exponent: usize) -> Vec<f64> {
    protocol3_distribution(theta, n_exponent)
}
