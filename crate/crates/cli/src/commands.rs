use std::fs;
use std::path::Path;
use std::time::Instant;

use pauligeo::geometry::{self, GeodesicReport};
use pauligeo::lie;
use pauligeo::linalg::{self, c, CMatrix};
use pauligeo::plateau::{
    self, AnsatzSpec, LossTask, MomentSource, TwoDesignStatus, VarianceReport,
};
use pauligeo::sampling::{self, HaarGroup, RngStream};
use pauligeo::HermitianCoeffs;
use serde::Serialize;

use crate::config::{
    read_json, ConfigError, ConfigResult, DlaConfig, GeodesicConfig, Probe, SourceSpec, TwirlConfig,
    VarianceConfig,
};
use crate::Common;

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Config(format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> ConfigResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}

fn base_dir(config: &Path) -> &Path {
    config.parent().unwrap_or(Path::new("."))
}

#[derive(Serialize)]
struct DenseOut {
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

impl DenseOut {
    fn new(m: &CMatrix) -> Self {
        let (r, k) = (m.nrows(), m.ncols());
        DenseOut {
            real: (0..r).map(|i| (0..k).map(|j| m[(i, j)].re).collect()).collect(),
            imag: (0..r).map(|i| (0..k).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

#[derive(Serialize)]
struct DlaOut {
    n: usize,
    generators: Vec<String>,
    dim: usize,
    center_dim: usize,
    simple_ideal_dims: Vec<usize>,
    exact_path: bool,
    decomposition_method: &'static str,
    closure_defect: f64,
    full_special_unitary: bool,
    basis: Vec<String>,
}

pub fn dla(opts: &Common) -> ConfigResult<String> {
    let cfg: DlaConfig = read_json(&opts.config)?;
    let gens = cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let start = Instant::now();
    let (basis, _, report) = lie::analyze(&gens, cfg.max_dim(), seed)?;
    let out = DlaOut {
        n: report.n,
        generators: report.generators,
        dim: report.dim,
        center_dim: report.center_dim,
        simple_ideal_dims: report.simple_ideal_dims.clone(),
        exact_path: report.exact_path,
        decomposition_method: report.decomposition_method,
        closure_defect: basis.closure_defect(),
        full_special_unitary: basis.is_full_special_unitary(),
        basis: basis.elements().iter().map(HermitianCoeffs::to_text).collect(),
    };
    write_json(&opts.out, "dla.json", &out)?;
    Ok(format!(
        "dim {} center {} simple ideals {:?} ({:.3}s)",
        out.dim,
        out.center_dim,
        out.simple_ideal_dims,
        start.elapsed().as_secs_f64()
    ))
}

#[derive(Serialize)]
struct GeodesicOut {
    #[serde(flatten)]
    report: GeodesicReport,
    support: Vec<String>,
    seed: u64,
}

pub fn geodesic(opts: &Common) -> ConfigResult<String> {
    let cfg: GeodesicConfig = read_json(&opts.config)?;
    let (metric, target) = cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let result = geometry::pauli_geodesic(&metric, &target, cfg.grid)?;
    let probe = geometry::minimality_probe(&metric, &target, cfg.grid, cfg.perturbed_paths, &RngStream::new(seed))?;
    let support = geometry::stabilizer_support(&target);
    let out = GeodesicOut {
        report: GeodesicReport {
            n: cfg.n,
            scheme: metric.scheme(),
            target: target.to_text(),
            commuting_support: support.commuting,
            length: result.length,
            numeric_length: result.numeric_length,
            el_residual: result.el_residual,
            grid: cfg.grid,
            minimality_margin: probe.margin,
            perturbed_paths: probe.paths,
        },
        support: support.support.iter().map(|p| p.to_string()).collect(),
        seed,
    };
    write_json(&opts.out, "geodesic.json", &out)?;
    if cfg.write_curve {
        write_json(&opts.out, "geodesic_curve.json", &result.curve.to_records())?;
    }
    Ok(format!(
        "length {} (quadrature {}), residual {:.3e}, margin {:.3e}",
        fmt_f64(result.length),
        fmt_f64(result.numeric_length),
        result.el_residual,
        probe.margin
    ))
}

pub const VARIANCE_COLUMNS: [&str; 17] = [
    "n",
    "layers",
    "samples",
    "mean",
    "variance",
    "variance_se",
    "theoretical",
    "gap",
    "ideal_dims",
    "rho_purities",
    "observable_purities",
    "rho_in_algebra",
    "observable_in_algebra",
    "two_design_distance",
    "two_design_noise",
    "evaluator",
    "error",
];

#[derive(Serialize)]
struct PointOut {
    n: usize,
    layers: usize,
    report: Option<VarianceReport>,
    error: Option<String>,
}

fn join<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(";")
}

fn csv_row(p: &PointOut, samples: usize) -> Vec<String> {
    let mut row = vec![p.n.to_string(), p.layers.to_string(), samples.to_string()];
    let blank = String::new;
    match &p.report {
        Some(r) => {
            row.push(fmt_f64(r.mean));
            row.push(fmt_f64(r.variance));
            row.push(fmt_f64(r.variance_std_error));
            match &r.theory {
                Some(t) => {
                    row.push(fmt_f64(t.variance));
                    row.push(r.gap().map(fmt_f64).unwrap_or_default());
                    row.push(join(&t.ideals, |i| i.dim.to_string()));
                    row.push(join(&t.ideals, |i| fmt_f64(i.rho_purity)));
                    row.push(join(&t.ideals, |i| fmt_f64(i.observable_purity)));
                    row.push(t.rho_in_algebra.to_string());
                    row.push(t.observable_in_algebra.to_string());
                }
                None => row.extend(std::iter::repeat_with(blank).take(7)),
            }
            match &r.two_design {
                TwoDesignStatus::Unchecked => {
                    row.push("unchecked".into());
                    row.push(blank());
                }
                TwoDesignStatus::Measured(d) => {
                    row.push(fmt_f64(d.distance));
                    row.push(fmt_f64(d.noise_floor));
                }
            }
            row.push(r.evaluator.into());
        }
        None => row.extend(std::iter::repeat_with(blank).take(13)),
    }
    row.push(p.error.clone().unwrap_or_default());
    row
}

pub fn variance(opts: &Common) -> ConfigResult<String> {
    let cfg: VarianceConfig = read_json(&opts.config)?;
    let points = cfg.validate(base_dir(&opts.config))?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let samples = opts.samples.unwrap_or(cfg.samples);
    if samples < plateau::MIN_SAMPLES {
        return Err(ConfigError::Config(format!("samples must be at least {}", plateau::MIN_SAMPLES)));
    }
    let mut prepared = Vec::with_capacity(points.len());
    for p in &points {
        let ansatz = AnsatzSpec::new(p.generators.clone(), p.layers, &p.periods)?;
        let task = LossTask::with_pauli_observable(p.rho.clone(), &p.observable)?;
        prepared.push((p, ansatz, task));
    }
    let mut theory_cache: Vec<(usize, Result<lie::IdealDecomposition, String>)> = Vec::new();
    let mut outs = Vec::with_capacity(points.len());
    for (p, ansatz, task) in &prepared {
        let mut errors = Vec::new();
        let report = plateau::estimate_variance(ansatz, task, samples, seed).map(|mut r| {
            if !theory_cache.iter().any(|(n, _)| *n == p.n) {
                let traceless: Vec<HermitianCoeffs> = p
                    .generators
                    .iter()
                    .map(HermitianCoeffs::traceless_part)
                    .filter(|g| !g.is_empty())
                    .collect();
                let max_dim = cfg.max_dim.unwrap_or((1usize << (2 * p.n)) - 1);
                let dec = lie::analyze(&traceless, max_dim, seed).map(|(_, d, _)| d).map_err(|e| e.to_string());
                theory_cache.push((p.n, dec));
            }
            match &theory_cache.iter().find(|(n, _)| *n == p.n).expect("cached above").1 {
                Ok(dec) => match plateau::theoretical_variance(dec, task) {
                    Ok(t) => r.theory = Some(t),
                    Err(e) => errors.push(format!("theory: {e}")),
                },
                Err(e) => errors.push(format!("theory: {e}")),
            }
            if let Some(td) = &cfg.two_design {
                match plateau::two_design_distance(ansatz, td.samples, &[plateau::zero_state_probe(p.n)], seed) {
                    Ok(d) => r.two_design = TwoDesignStatus::Measured(d),
                    Err(e) => errors.push(format!("two-design: {e}")),
                }
            }
            r
        });
        let report = match report {
            Ok(r) => Some(r),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        outs.push(PointOut {
            n: p.n,
            layers: p.layers,
            report,
            error: (!errors.is_empty()).then(|| errors.join("; ")),
        });
    }
    write_json(&opts.out, "variance.json", &outs)?;
    let path = opts.out.join("variance.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| io_err(&path, e))?;
    w.write_record(VARIANCE_COLUMNS).map_err(|e| io_err(&path, e))?;
    for p in &outs {
        w.write_record(csv_row(p, samples)).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    let failed = outs.iter().filter(|p| p.error.is_some()).count();
    Ok(format!("{} sweep points, {} with errors", outs.len(), failed))
}

#[derive(Serialize)]
struct InvarianceOut {
    probe: Probe,
    passed: bool,
    means: [f64; 4],
    std_errors: [f64; 4],
    max_gap_sigmas: f64,
}

#[derive(Serialize)]
struct TwirlOut {
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
    source: &'static str,
    mean: DenseOut,
    std_error: Vec<Vec<f64>>,
    /// For first moments under Haar measure: the exact twirl `Tr(M) I / N`
    /// and the largest deviation from it in standard errors.
    haar_first_moment_sigmas: Option<f64>,
    invariance: Vec<InvarianceOut>,
}

pub fn twirl(opts: &Common) -> ConfigResult<String> {
    let cfg: TwirlConfig = read_json(&opts.config)?;
    let (ansatz, matrix) = cfg.validate(base_dir(&opts.config))?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let samples = opts.samples.unwrap_or(cfg.samples);
    let (source, label) = match (&cfg.source, &ansatz) {
        (SourceSpec::Haar, _) => (
            MomentSource::Haar {
                n: cfg.n,
                group: HaarGroup::Unitary,
            },
            "haar",
        ),
        (SourceSpec::HaarSpecial, _) => (
            MomentSource::Haar {
                n: cfg.n,
                group: HaarGroup::SpecialUnitary,
            },
            "haar_special",
        ),
        (SourceSpec::Ensemble(_), Some(a)) => (MomentSource::Ensemble(a), "ensemble"),
        (SourceSpec::Ensemble(_), None) => unreachable!("validated ensembles carry an ansatz"),
    };
    let est = plateau::moment_operator(source, cfg.k, &matrix, samples, seed)?;
    let haar_first_moment_sigmas = (cfg.k == 1 && label != "ensemble").then(|| {
        let d = matrix.nrows();
        let target = CMatrix::identity(d, d) * (linalg::trace(&matrix) / c(d as f64, 0.0));
        est.max_sigmas_from(&target)
    });
    let mut invariance = Vec::new();
    if let Some(inv) = &cfg.invariance {
        let dim = 1usize << cfg.n;
        let root = RngStream::new(seed).substream(1);
        let group = if inv.special {
            HaarGroup::SpecialUnitary
        } else {
            HaarGroup::Unitary
        };
        let w = group.sample(dim, &root.substream(0));
        let a = sampling::haar_unitary(dim, &root.substream(1));
        for (i, &probe) in inv.probes.iter().enumerate() {
            let stream = root.substream(2 + i as u64);
            let r = match probe {
                Probe::Constant => sampling::invariance_test(|_| 1.0, &w, group, inv.samples, &stream),
                Probe::ReTrace => sampling::invariance_test(|u| linalg::trace(u).re, &w, group, inv.samples, &stream),
                Probe::AbsU11 => sampling::invariance_test(|u| u[(0, 0)].norm_sqr(), &w, group, inv.samples, &stream),
                Probe::ReTraceRandom => {
                    sampling::invariance_test(|u| linalg::trace(&(&a * u)).re, &w, group, inv.samples, &stream)
                }
            };
            invariance.push(InvarianceOut {
                probe,
                passed: r.passed,
                means: r.means,
                std_errors: r.std_errors,
                max_gap_sigmas: r.max_gap_sigmas,
            });
        }
    }
    let out = TwirlOut {
        n: cfg.n,
        k: cfg.k,
        samples,
        seed,
        source: label,
        mean: DenseOut::new(&est.mean),
        std_error: (0..est.std_error.nrows())
            .map(|r| (0..est.std_error.ncols()).map(|col| est.std_error[(r, col)]).collect())
            .collect(),
        haar_first_moment_sigmas,
        invariance,
    };
    write_json(&opts.out, "twirl.json", &out)?;
    let verdicts = out.invariance.iter().filter(|v| v.passed).count();
    Ok(format!(
        "moment operator {}x{}, invariance {}/{} passed",
        est.mean.nrows(),
        est.mean.ncols(),
        verdicts,
        out.invariance.len()
    ))
}
