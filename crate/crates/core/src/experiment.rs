//! Seeded Monte Carlo experiments on the 30-bus case and on rings, emitted
//! as plot-ready CSV.
//!
//! Sample `i` draws from its own ChaCha8 stream, so the output does not
//! depend on how samples are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{
    compare_max_loading, error_bounds, gradient_step, improved_approximation, optimal_step,
};
use crate::error::{Error, Result};
use crate::graph::{cycle_basis, k_norm, BasisKind};
use crate::io::{format_float, parse_matpower, sha256_hex, write_csv, CASE30_TEXT};
use crate::linear::solve_linear;
use crate::network::Network;
use crate::solver::{solve_base, Classification};

/// Draws per sample before giving up.
pub const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Per-edge error of the linear and improved approximations against `p_f`.
    Fig1ApproxError,
    /// Tightness of the two error bounds over random injections.
    Fig2BoundTightness,
    /// Error of one projected gradient step against the step size.
    Fig3GradientStep,
    /// How often the linear flow underestimates the maximum loading on rings.
    Fig4RingMaxload,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        Self::Fig1ApproxError,
        Self::Fig2BoundTightness,
        Self::Fig3GradientStep,
        Self::Fig4RingMaxload,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1ApproxError => "fig1-approx-error",
            Self::Fig2BoundTightness => "fig2-bound-tightness",
            Self::Fig3GradientStep => "fig3-gradient-step",
            Self::Fig4RingMaxload => "fig4-ring-maxload",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s || id.name().split('-').next() == Some(s))
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|id| id.name()).collect();
                format!(
                    "unknown experiment `{s}`, expected one of {}",
                    names.join(", ")
                )
            })
    }
}

/// Parses `1.5`, `1,2,5` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_pf_spec(s: &str) -> std::result::Result<Vec<f64>, String> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{t}` is not a finite number"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (number(a)?, number(b)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| format!("`{n}` is not a point count"))?;
            match n {
                0 => return Err("point count must be at least 1".into()),
                1 => vec![a],
                _ => (0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect(),
            }
        }
        [_] => s
            .split(',')
            .map(number)
            .collect::<std::result::Result<_, _>>()?,
        _ => return Err(format!("`{s}` is neither a list nor start:stop:count")),
    };
    if values.iter().any(|&v| v < 0.0) {
        return Err("scaling factors must be nonnegative".into());
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub samples: usize,
    pub seed: u64,
    pub pf: Vec<f64>,
    pub ring_sizes: Vec<usize>,
    pub basis: BasisKind,
    /// Half-width of the uniform injection distribution before centering.
    pub scale: f64,
    /// Grid points on `[0, 2]` for the step size scan.
    pub gamma_points: usize,
    /// MATPOWER text for the case experiments; the embedded 30-bus case if
    /// absent.
    pub case_text: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        let pf = match experiment {
            ExperimentId::Fig3GradientStep => vec![1.0, 1.028, 5.0, 10.0, 15.0, 20.0],
            _ => (1..=20).map(f64::from).collect(),
        };
        Self {
            experiment,
            samples: 10_000,
            seed: 1,
            pf,
            ring_sizes: (3..=20).collect(),
            basis: BasisKind::Minimal,
            scale: 1.0,
            gamma_points: 201,
            case_text: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::InvalidNetwork(format!(
                "invalid experiment config: {m}"
            )))
        };
        if self.samples == 0 {
            return bad("sample count must be at least 1");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        if self.ring_sizes.iter().any(|&n| n < 3) {
            return bad("rings need at least 3 nodes");
        }
        if self.gamma_points < 2 {
            return bad("need at least 2 step sizes");
        }
        if self.pf.is_empty() {
            return bad("no scaling factors");
        }
        Ok(())
    }

    fn case_text(&self) -> &str {
        self.case_text.as_deref().unwrap_or(CASE30_TEXT)
    }
}

/// One CSV file. `suffix` is empty for the main output and names the
/// companion file otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOutput {
    pub suffix: &'static str,
    pub text: String,
}

impl CsvOutput {
    /// `out.csv` with suffix `hist` becomes `out.hist.csv`.
    pub fn path_for(&self, base: &std::path::Path) -> std::path::PathBuf {
        if self.suffix.is_empty() {
            return base.to_path_buf();
        }
        let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
        let name = match base.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{stem}.{}.{ext}", self.suffix),
            None => format!("{stem}.{}", self.suffix),
        };
        base.with_file_name(name)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CsvOutput>> {
    config.validate()?;
    let mut meta = vec![
        (
            "experiment".to_string(),
            config.experiment.name().to_string(),
        ),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("seed".to_string(), config.seed.to_string()),
    ];
    match config.experiment {
        ExperimentId::Fig1ApproxError => fig1(config, meta),
        ExperimentId::Fig2BoundTightness => fig2(config, meta),
        ExperimentId::Fig3GradientStep => fig3(config, meta),
        ExperimentId::Fig4RingMaxload => {
            meta.push(("samples".into(), config.samples.to_string()));
            meta.push(("scale".into(), config.scale.to_string()));
            fig4(config, meta)
        }
    }
}

fn case_meta(
    config: &ExperimentConfig,
    meta: &mut Vec<(String, String)>,
) -> Result<crate::io::MatpowerCase> {
    let text = config.case_text();
    let case = parse_matpower(text)?;
    meta.push(("case".into(), case.name.clone()));
    meta.push(("case_sha256".into(), sha256_hex(text)));
    meta.push(("basis".into(), config.basis.to_string()));
    Ok(case)
}

fn pf_list(pf: &[f64]) -> String {
    pf.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Nonlinear flow with winding vector zero, if it is an interior solution.
fn interior_flow(net: &Network) -> Result<Option<Vec<f64>>> {
    let base = solve_base(net)?;
    Ok(match base.classification {
        Classification::InteriorSolution => base.flows,
        _ => None,
    })
}

fn skip_reason(net: &Network) -> Result<Option<String>> {
    let base = solve_base(net)?;
    Ok(match base.classification {
        Classification::InteriorSolution => None,
        other => Some(other.to_string()),
    })
}

/// Independent stream for sample `index` of experiment `tag`, group `group`.
pub fn sample_rng(seed: u64, tag: u64, group: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) | (group << 40) | index);
    rng
}

/// Uniform on `[-scale, scale]` per node, shifted to zero mean.
pub fn balanced_injections<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
    let mean = p.iter().sum::<f64>() / n as f64;
    p.iter_mut().for_each(|v| *v -= mean);
    p
}

/// Draws until `accept` returns a value, counting rejections.
fn sample_until<T>(
    rng: &mut ChaCha8Rng,
    base: &Network,
    scale: f64,
    mut accept: impl FnMut(&Network) -> Result<Option<T>>,
) -> Result<(T, usize)> {
    for attempt in 0..MAX_ATTEMPTS {
        let net = base.with_injections(balanced_injections(rng, base.node_count(), scale))?;
        match accept(&net) {
            Ok(Some(v)) => return Ok((v, attempt)),
            Ok(None) | Err(Error::DomainViolation { .. }) | Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numeric(format!(
        "no valid injection vector in {MAX_ATTEMPTS} draws"
    )))
}

fn fig1(config: &ExperimentConfig, mut meta: Vec<(String, String)>) -> Result<Vec<CsvOutput>> {
    let case = case_meta(config, &mut meta)?;
    meta.push(("pf".into(), pf_list(&config.pf)));
    let mut rows = Vec::new();
    for &pf in &config.pf {
        let net = case.to_network(pf)?;
        let basis = cycle_basis(&net, config.basis);
        let Some(f_rp) = interior_flow(&net)? else {
            let reason = skip_reason(&net)?.unwrap_or_default();
            meta.push((format!("skipped_pf_{pf}"), reason));
            continue;
        };
        let f_lin = solve_linear(&net)?.flows;
        let f_approx = match improved_approximation(&net, &basis, &f_lin) {
            Ok(f) => f,
            Err(Error::DomainViolation { .. }) => {
                meta.push((
                    format!("skipped_pf_{pf}"),
                    "linear flow exceeds limits".into(),
                ));
                continue;
            }
            Err(e) => return Err(e),
        };
        for (e, edge) in net.edges().iter().enumerate() {
            rows.push(vec![
                format_float(pf),
                e.to_string(),
                format_float(edge.coupling),
                format_float(f_rp[e]),
                format_float(f_lin[e]),
                format_float(f_approx[e]),
                format_float((f_rp[e] - f_lin[e]).abs()),
                format_float((f_rp[e] - f_approx[e]).abs()),
            ]);
        }
    }
    let header = [
        "pf",
        "edge",
        "K",
        "f_rp",
        "f_lin",
        "f_approx",
        "err_lin",
        "err_approx",
    ];
    Ok(vec![CsvOutput {
        suffix: "",
        text: write_csv(&meta, &header, rows)?,
    }])
}

/// Bins of `log10(ratio)` for the bound histogram.
pub const HISTOGRAM_BINS: usize = 60;
pub const HISTOGRAM_DECADES: f64 = 3.0;

fn histogram_bin(ratio: f64) -> usize {
    let x = ratio.log10().max(0.0) / HISTOGRAM_DECADES * HISTOGRAM_BINS as f64;
    (x as usize).min(HISTOGRAM_BINS - 1)
}

fn fig2(config: &ExperimentConfig, mut meta: Vec<(String, String)>) -> Result<Vec<CsvOutput>> {
    let case = case_meta(config, &mut meta)?;
    let base = case.to_network(1.0)?;
    let tag = ExperimentId::Fig2BoundTightness.tag();
    let results: Vec<Result<([f64; 3], usize)>> = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, tag, 0, i as u64);
            sample_until(&mut rng, &base, config.scale, |net| {
                let Some(f_rp) = interior_flow(net)? else {
                    return Ok(None);
                };
                let f_lin = solve_linear(net)?.flows;
                let bounds = error_bounds(net, &f_lin)?;
                let xi: Vec<f64> = f_rp.iter().zip(&f_lin).map(|(a, b)| a - b).collect();
                Ok(Some([k_norm(net, &xi), bounds.simple, bounds.projected]))
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(config.samples);
    let mut hist = vec![[0usize; 2]; HISTOGRAM_BINS];
    let mut rejected = 0;
    for (i, r) in results.into_iter().enumerate() {
        let ([xi, simple, projected], rej) = r?;
        rejected += rej;
        let (rs, rp) = (simple / xi, projected / xi);
        hist[histogram_bin(rs)][0] += 1;
        hist[histogram_bin(rp)][1] += 1;
        rows.push(vec![
            i.to_string(),
            format_float(xi),
            format_float(simple),
            format_float(projected),
            format_float(rs),
            format_float(rp),
        ]);
    }
    meta.push(("samples".into(), config.samples.to_string()));
    meta.push(("scale".into(), config.scale.to_string()));
    meta.push(("rejected".into(), rejected.to_string()));
    let header = [
        "sample",
        "xi_norm",
        "bound_simple",
        "bound_projected",
        "ratio_simple",
        "ratio_projected",
    ];
    let hist_rows = hist.iter().enumerate().map(|(b, [s, p])| {
        let width = HISTOGRAM_DECADES / HISTOGRAM_BINS as f64;
        vec![
            format_float(10f64.powf(b as f64 * width)),
            format_float(10f64.powf((b + 1) as f64 * width)),
            s.to_string(),
            p.to_string(),
        ]
    });
    Ok(vec![
        CsvOutput {
            suffix: "",
            text: write_csv(&meta, &header, rows)?,
        },
        CsvOutput {
            suffix: "hist",
            text: write_csv(
                &meta,
                &["ratio_lo", "ratio_hi", "count_simple", "count_projected"],
                hist_rows,
            )?,
        },
    ])
}

fn fig3(config: &ExperimentConfig, mut meta: Vec<(String, String)>) -> Result<Vec<CsvOutput>> {
    let case = case_meta(config, &mut meta)?;
    meta.push(("pf".into(), pf_list(&config.pf)));
    let mut rows = Vec::new();
    for &pf in &config.pf {
        let net = case.to_network(pf)?;
        let Some(f_rp) = interior_flow(&net)? else {
            let reason = skip_reason(&net)?.unwrap_or_default();
            meta.push((format!("skipped_pf_{pf}"), reason));
            continue;
        };
        let f_lin = solve_linear(&net)?.flows;
        if let Err(Error::DomainViolation { .. }) = crate::approx::projected_gradient(&net, &f_lin)
        {
            meta.push((
                format!("skipped_pf_{pf}"),
                "linear flow exceeds limits".into(),
            ));
            continue;
        }
        let error_at = |gamma: f64| -> Result<f64> {
            let f = gradient_step(&net, &f_lin, gamma)?;
            let d: Vec<f64> = f.iter().zip(&f_rp).map(|(a, b)| a - b).collect();
            Ok(k_norm(&net, &d))
        };
        let n = config.gamma_points;
        for i in 0..n {
            let gamma = 2.0 * i as f64 / (n - 1) as f64;
            rows.push(vec![
                format_float(pf),
                "grid".into(),
                format_float(gamma),
                format_float(error_at(gamma)?),
            ]);
        }
        let best = optimal_step(&net, &f_lin, &f_rp, 0.0, 2.0)?;
        rows.push(vec![
            format_float(pf),
            "optimal".into(),
            format_float(best.gamma),
            format_float(best.error),
        ]);
    }
    Ok(vec![CsvOutput {
        suffix: "",
        text: write_csv(&meta, &["pf", "kind", "gamma", "error"], rows)?,
    }])
}

fn fig4(config: &ExperimentConfig, mut meta: Vec<(String, String)>) -> Result<Vec<CsvOutput>> {
    meta.push((
        "threshold".into(),
        crate::approx::UNDERESTIMATION_THRESHOLD.to_string(),
    ));
    let tag = ExperimentId::Fig4RingMaxload.tag();
    let mut rows = Vec::new();
    for &n in &config.ring_sizes {
        let ring = Network::ring(n, 1.0, vec![0.0; n])?;
        let results: Vec<Result<(bool, usize)>> = (0..config.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = sample_rng(config.seed, tag, n as u64, i as u64);
                sample_until(&mut rng, &ring, config.scale, |net| {
                    let Some(f_rp) = interior_flow(net)? else {
                        return Ok(None);
                    };
                    let f_lin = solve_linear(net)?.flows;
                    Ok(Some(compare_max_loading(net, &f_rp, &f_lin).underestimated))
                })
            })
            .collect();
        let (mut count, mut rejected) = (0usize, 0usize);
        for r in results {
            let (under, rej) = r?;
            count += usize::from(under);
            rejected += rej;
        }
        rows.push(vec![
            n.to_string(),
            config.samples.to_string(),
            count.to_string(),
            format_float(count as f64 / config.samples as f64),
            rejected.to_string(),
        ]);
    }
    let header = ["N", "samples", "underestimated", "frequency", "rejected"];
    Ok(vec![CsvOutput {
        suffix: "",
        text: write_csv(&meta, &header, rows)?,
    }])
}
