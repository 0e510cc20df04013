//! Command-line front end: one verb per analysis capability, deterministic
//! CSV/JSON artifacts, exit codes 2 (input/schema), 3 (numerical failure),
//! 4 (precondition violation).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use num_complex::Complex64;

use sssa::dae::{
    example_ch3, example_ch4, omib_linear, companion2, LinearDae, OmibParams, OutputMap,
};
use sssa::delay::{
    delay_independent_band, delay_spectrum, omib_pr_delay_lti, stability_map, DelayLti, MapKind,
};
use sssa::error::{Error, Result};
use sssa::fractional::{
    assemble_closed_loop, foc_block, fopss_block, fractional_stability, ora_realize, FocKind,
    OraSpec,
};
use sssa::integrator::{
    gco_scores, linearize, max_step_estimate, select_delayed, simulate, toy_multimachine,
    DdaeModel, DelaySelection, EventKind, ItmConfig, JacBlock, NonlinearOmib, SimEvent,
};
use sssa::io;
use sssa::participation::{
    classical_pf, compute_jordan_chains, generalized_pf, jordan_pf, output_pf,
};
use sssa::pencil::{MatrixPencil, MoebiusCoeffs};

#[derive(Parser)]
#[command(
    name = "sssa",
    version,
    about = "Small-signal stability analysis of linear and linearized DAE systems"
)]
struct Cli {
    /// Output path; verbs with several artifacts derive sibling paths from
    /// it. Single-artifact verbs print to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for pencil regularity probing.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// General numerical tolerance override (verb-specific meaning).
    #[arg(long, allow_negative_numbers = true, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    verb: Verb,
}

/// Shared model-source flags.
#[derive(Args, Clone)]
struct ModelSource {
    /// Built-in model name (with --builtin) or a JSON model file path.
    #[arg(long)]
    model: Option<String>,
    /// Interpret --model as a built-in name:
    /// example_ch3 | example_ch4 | omib_linear | toy_multimachine.
    #[arg(long)]
    builtin: bool,
    /// Matrix Market file with E (paired with --a).
    #[arg(long)]
    e: Option<PathBuf>,
    /// Matrix Market file with A (paired with --e).
    #[arg(long)]
    a: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Eigenvalues of a pencil or model (CSV: re,im,zeta,fn_hz,kind).
    Eig {
        #[command(flatten)]
        source: ModelSource,
        /// Reduce a DAE model to its state matrix before the eigensolve.
        #[arg(long)]
        reduce: bool,
    },
    /// Apply a Moebius spectral transform; writes the transformed pencil
    /// as a Matrix Market pair <out>.E.mtx / <out>.A.mtx.
    Transform {
        #[command(flatten)]
        source: ModelSource,
        /// prime | invert | shift-invert | cayley | generalized-cayley
        #[arg(long)]
        kind: String,
        /// Shift sigma (shift-invert, cayley, generalized-cayley).
        #[arg(long, allow_negative_numbers = true)]
        sigma: Option<f64>,
        /// Secondary parameter nu (generalized-cayley).
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
    },
    /// Participation factors (CSV: variable,eig_id,re,im,abs).
    Pf {
        #[command(flatten)]
        source: ModelSource,
        /// classical | generalized | jordan
        #[arg(long, default_value = "generalized")]
        kind: String,
        /// Defective eigenvalue (jordan kind; real part).
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        /// Imaginary part of the defective eigenvalue (jordan kind).
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        lambda_im: f64,
        /// Chain length (jordan kind).
        #[arg(long)]
        beta: Option<usize>,
        /// states | algebraic | rates (DAE models only).
        #[arg(long, default_value = "states")]
        output: String,
        /// Magnitude floor; entries below it are omitted (0 = all).
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        floor: f64,
    },
    /// Oustaloup recursive approximation of s^gamma: Bode CSV plus a
    /// realization dump at <out>.model.json.
    Ora {
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        omega_b: f64,
        #[arg(long, allow_negative_numbers = true)]
        omega_h: f64,
        /// Approximation order (defaults to one cell per decade, min 4).
        #[arg(long)]
        n: Option<usize>,
        /// Emit the semi-implicit (sparse, singular-E) realization.
        #[arg(long)]
        semi_implicit: bool,
        /// Frequency points of the Bode sweep.
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Fractional closed-loop stability of the built-in 7x7 plant
    /// (CSV with arg_rad,threshold_rad,stable columns).
    FocStab {
        /// foi | fopi | fo-lead-lag | fopss
        #[arg(long)]
        controller: String,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        kp: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        ki: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        k: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t2: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        kw: Option<f64>,
    },
    /// Delay stability map of the OMIB PR loop over a (tau, gain) grid;
    /// CSV tau_s,gain,metric plus a JSON sidecar at <out>.json.
    DelayMap {
        /// sigma | zeta
        #[arg(long, default_value = "sigma")]
        metric: String,
        /// Delay-free total damping c = c1 + eps*Kp (sets Kp = c*Omega_b).
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        c: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        tau_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.3)]
        tau_max: f64,
        #[arg(long, default_value_t = 50)]
        tau_points: usize,
        #[arg(long, allow_negative_numbers = true, default_value_t = -1500.0)]
        gain_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1500.0)]
        gain_max: f64,
        #[arg(long, default_value_t = 50)]
        gain_points: usize,
        #[arg(long, default_value_t = 12)]
        n_c: usize,
    },
    /// Delay-independent gain band of the PR loop (JSON).
    DelayDis {
        /// Delay-free damping coefficient c.
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        /// Retarded-gain scaling epsilon (1/Omega_b for the OMIB loop).
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
    },
    /// Chebyshev characteristic roots of a retarded linear system
    /// (CSV: re,im,zeta,fn_hz,kind).
    ChebEig {
        /// Matrix Market file with the delay-free matrix A0.
        #[arg(long)]
        a0: Option<PathBuf>,
        /// Delayed terms as <path>:<tau>, repeatable.
        #[arg(long)]
        delay: Vec<String>,
        /// Built-in OMIB PR loop instead of files: requires --kp/--kr/--tau.
        #[arg(long)]
        omib_pr: bool,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        kp: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        kr: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        tau: f64,
        #[arg(long, default_value_t = 12)]
        n_c: usize,
    },
    /// GCO delayability scores of every structurally nonzero Jacobian
    /// element (CSV: block,row,col,score).
    Gco {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
        fn_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 2.0)]
        fn_max: f64,
    },
    /// Integrate a built-in nonlinear model; trajectory CSV plus stats
    /// JSON at <out>.stats.json.
    Simulate {
        /// toy_multimachine | omib
        #[arg(long, default_value = "toy_multimachine")]
        model: String,
        #[arg(long, allow_negative_numbers = true)]
        h: f64,
        #[arg(long, allow_negative_numbers = true)]
        t_end: f64,
        /// Delay every Jacobian element scoring below this GCO threshold.
        #[arg(long, allow_negative_numbers = true)]
        gco_max: Option<f64>,
        /// JSON file with explicit selection entries [["Fx", row, col], ...].
        #[arg(long)]
        delay_selection: Option<PathBuf>,
        /// Also run undelayed and record the max trajectory mismatch.
        #[arg(long)]
        compare_undelayed: bool,
        /// Events as <time>:<param>=<value> (parameter patch) or
        /// <time>:state<idx>=<value> (state patch), repeatable.
        #[arg(long)]
        event: Vec<String>,
    },
    /// Maximum one-step-delay step estimate over an h grid (JSON).
    Hmax {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, allow_negative_numbers = true)]
        gco_max: Option<f64>,
        #[arg(long)]
        delay_selection: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.01)]
        eta_max: f64,
        /// Comma-separated ascending step grid in seconds.
        #[arg(long, default_value = "0.005,0.01,0.02,0.05,0.1")]
        h_grid: String,
        #[arg(long, default_value_t = 14)]
        n_c: usize,
        /// Number of rightmost nonzero modes tracked (default: all).
        #[arg(long)]
        modes: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Write to --out or stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_out<'a>(out: &'a Option<PathBuf>, verb: &str) -> Result<&'a Path> {
    out.as_deref().ok_or_else(|| {
        Error::InvalidInput(format!("{verb} produces several artifacts; --out is required"))
    })
}

fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// A loaded analysis subject.
enum Loaded {
    Pencil(MatrixPencil),
    Dae(LinearDae),
}

impl Loaded {
    fn pencil(self) -> Result<MatrixPencil> {
        match self {
            Loaded::Pencil(p) => Ok(p),
            Loaded::Dae(dae) => dae.augment_pencil_explicit(),
        }
    }
    fn dae(self) -> Result<LinearDae> {
        match self {
            Loaded::Dae(d) => Ok(d),
            Loaded::Pencil(_) => Err(Error::InvalidInput(
                "this operation needs a DAE model (JSON schema or the \
                 toy_multimachine builtin), not a bare pencil"
                    .into(),
            )),
        }
    }
}

fn load_source(source: &ModelSource) -> Result<Loaded> {
    match (&source.model, &source.e, &source.a) {
        (Some(name), None, None) if source.builtin => match name.as_str() {
            "example_ch3" => Ok(Loaded::Pencil(example_ch3())),
            "example_ch4" => Ok(Loaded::Pencil(example_ch4().pencil)),
            "omib_linear" => {
                let lin = omib_linear(&OmibParams::default())?;
                Ok(Loaded::Pencil(MatrixPencil::new(
                    Array2::eye(2),
                    companion2(lin.d, lin.b),
                )?))
            }
            "toy_multimachine" => {
                let model = toy_multimachine();
                let (x, y) = model.initial()?;
                Ok(Loaded::Dae(linearize(&model, &x, &y)?))
            }
            other => Err(Error::InvalidInput(format!(
                "unknown builtin '{other}' (expected example_ch3, example_ch4, \
                 omib_linear, or toy_multimachine)"
            ))),
        },
        (Some(path), None, None) => {
            let file = io::load_model(Path::new(path))?;
            if file.lhs.is_some() {
                Ok(Loaded::Pencil(file.to_pencil()?))
            } else {
                Ok(Loaded::Dae(file.to_dae()?))
            }
        }
        (None, Some(e), Some(a)) => Ok(Loaded::Pencil(io::load_pencil(e, a)?)),
        _ => Err(Error::InvalidInput(
            "specify either --model [--builtin] or a Matrix Market pair --e/--a".into(),
        )),
    }
}

fn parse_selection_file(path: &Path) -> Result<DelaySelection> {
    let text = fs::read_to_string(path)?;
    let raw: Vec<(String, usize, usize)> =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!(
            "delay selection file: {e} (expected [[\"Fx\", row, col], ...])"
        )))?;
    let mut entries = Vec::with_capacity(raw.len());
    for (block, r, c) in raw {
        let b = match block.as_str() {
            "Fx" | "fx" => JacBlock::Fx,
            "Fy" | "fy" => JacBlock::Fy,
            "Gx" | "gx" => JacBlock::Gx,
            "Gy" | "gy" => JacBlock::Gy,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown Jacobian block '{other}' in selection file"
                )))
            }
        };
        entries.push((b, r, c));
    }
    DelaySelection::from_entries(&entries)
}

fn parse_events(specs: &[String]) -> Result<Vec<SimEvent>> {
    let mut events = Vec::with_capacity(specs.len());
    for spec in specs {
        let parse = || -> Option<SimEvent> {
            let (time, rest) = spec.split_once(':')?;
            let time: f64 = time.parse().ok()?;
            let (target, value) = rest.split_once('=')?;
            let value: f64 = value.parse().ok()?;
            let kind = if let Some(idx) = target.strip_prefix("state") {
                EventKind::SetState(idx.parse().ok()?, value)
            } else {
                EventKind::SetParam(target.to_string(), value)
            };
            Some(SimEvent { time, kind })
        };
        events.push(parse().ok_or_else(|| {
            Error::InvalidInput(format!(
                "bad event '{spec}' (expected <time>:<param>=<value> or \
                 <time>:state<idx>=<value>)"
            ))
        })?);
    }
    Ok(events)
}

fn resolve_selection(
    dae: &LinearDae,
    gco_max: Option<f64>,
    file: &Option<PathBuf>,
    fn_range: (f64, f64),
) -> Result<DelaySelection> {
    match (gco_max, file) {
        (None, None) => Ok(DelaySelection::empty()),
        (Some(_), Some(_)) => Err(Error::InvalidInput(
            "--gco-max and --delay-selection are mutually exclusive".into(),
        )),
        (None, Some(path)) => parse_selection_file(path),
        (Some(thr), None) => {
            let table = gco_scores(dae, fn_range)?;
            if table.no_relevant_modes {
                return Err(Error::Precondition(
                    "no oscillatory modes inside the GCO frequency band; \
                     cannot rank delayable elements"
                        .into(),
                ));
            }
            Ok(select_delayed(&table, thr)?.0)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.verb {
        Verb::Eig { source, reduce } => {
            let loaded = load_source(source)?;
            let pencil = if *reduce {
                let a_s = loaded.dae()?.reduce_state_matrix().map_err(|e| match e {
                    // The CLI contract classifies a singular g_y during
                    // reduction as a numerical failure of the eigensolve.
                    Error::Precondition(msg) => Error::Numerical(msg),
                    other => other,
                })?;
                MatrixPencil::new(Array2::eye(a_s.nrows()), a_s)?
            } else {
                loaded.pencil()?
            };
            if !pencil.is_regular(pencil.r() + 1, cli.seed)? {
                return Err(Error::NonRegular(
                    "pencil determinant vanished at every probe shift".into(),
                ));
            }
            let sol = pencil.eigen(false)?;
            emit(&cli.out, &io::eig_csv(&sol))
        }

        Verb::Transform { source, kind, sigma, nu } => {
            let pencil = load_source(source)?.pencil()?;
            let need_sigma = || {
                sigma.ok_or_else(|| {
                    Error::InvalidInput(format!("--sigma is required for kind '{kind}'"))
                })
            };
            let coeffs = match kind.as_str() {
                "prime" => MoebiusCoeffs::prime(),
                "invert" => MoebiusCoeffs::invert(),
                "shift-invert" => MoebiusCoeffs::shift_invert(need_sigma()?),
                "cayley" => MoebiusCoeffs::cayley(need_sigma()?),
                "generalized-cayley" => MoebiusCoeffs::generalized_cayley(
                    need_sigma()?,
                    nu.ok_or_else(|| {
                        Error::InvalidInput("--nu is required for generalized-cayley".into())
                    })?,
                ),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown transform kind '{other}'"
                    )))
                }
            };
            let mapped = pencil.moebius_transform(&coeffs)?;
            let base = require_out(&cli.out, "transform")?;
            fs::write(sibling(base, ".E.mtx"), io::write_matrix_market(&mapped.e))?;
            fs::write(sibling(base, ".A.mtx"), io::write_matrix_market(&mapped.a))?;
            Ok(())
        }

        Verb::Pf { source, kind, lambda, lambda_im, beta, output, floor } => {
            let loaded = load_source(source)?;
            // For DAE models the output map selects whose participation is
            // reported; bare pencils report state participation directly.
            let (pencil, out_map) = match loaded {
                Loaded::Pencil(p) => (p, None),
                Loaded::Dae(dae) => {
                    let (n, m) = (dae.n(), dae.m());
                    let map = match output.as_str() {
                        "states" => None,
                        "algebraic" => Some(OutputMap {
                            hx: Array2::zeros((m, n)),
                            hy: Array2::eye(m),
                            output_names: dae.alg_names.clone(),
                        }),
                        "rates" => Some(OutputMap {
                            hx: dae.fx.clone(),
                            hy: dae.fy.clone(),
                            output_names: dae
                                .state_names
                                .iter()
                                .map(|s| format!("d{s}"))
                                .collect(),
                        }),
                        other => {
                            return Err(Error::InvalidInput(format!(
                                "unknown output kind '{other}'"
                            )))
                        }
                    };
                    let c = map
                        .as_ref()
                        .map(|m_| {
                            let c = dae.output_matrix(m_)?;
                            // Pad with zero algebraic columns to match the
                            // augmented pencil dimension.
                            let mut wide = Array2::zeros((c.nrows(), n + m));
                            wide.slice_mut(ndarray::s![.., ..n]).assign(&c);
                            Ok::<_, Error>((wide, m_.output_names.clone()))
                        })
                        .transpose()?;
                    (dae.augment_pencil_explicit()?, c)
                }
            };
            let pf = match kind.as_str() {
                "classical" => {
                    let is_identity = pencil
                        .e
                        .indexed_iter()
                        .all(|((r, c), &v)| v == if r == c { 1.0 } else { 0.0 });
                    if !is_identity {
                        return Err(Error::Precondition(
                            "classical PFs require an explicit (E = I) system; \
                             use kind=generalized"
                                .into(),
                        ));
                    }
                    classical_pf(&pencil.a)?
                }
                "generalized" => {
                    let sol = pencil.eigen(true)?;
                    generalized_pf(&pencil, &sol)?
                }
                "jordan" => {
                    let lam = Complex64::new(
                        lambda.ok_or_else(|| {
                            Error::InvalidInput("--lambda is required for kind=jordan".into())
                        })?,
                        *lambda_im,
                    );
                    let b = beta.ok_or_else(|| {
                        Error::InvalidInput("--beta is required for kind=jordan".into())
                    })?;
                    let chains = compute_jordan_chains(&pencil, lam, b)?;
                    jordan_pf(&pencil, &chains)?
                }
                other => {
                    return Err(Error::InvalidInput(format!("unknown PF kind '{other}'")))
                }
            };
            let pf = match &out_map {
                None => pf,
                Some((c, names)) => {
                    let mut mapped = output_pf(&pf, c)?;
                    mapped.row_labels = names.clone();
                    mapped
                }
            };
            emit(&cli.out, &io::pf_csv(&pf, *floor))
        }

        Verb::Ora { gamma, omega_b, omega_h, n, semi_implicit, points } => {
            let order = n.unwrap_or_else(|| sssa::fractional::suggest_order(*omega_b, *omega_h));
            let spec = OraSpec::new(*gamma, *omega_b, *omega_h, order)?;
            let real = ora_realize(&spec, *semi_implicit);
            let lo = omega_b.log10() - 2.0;
            let hi = omega_h.log10() + 2.0;
            let mut bode = Vec::with_capacity(*points);
            for i in 0..*points {
                let w = 10f64.powf(lo + (hi - lo) * i as f64 / (*points - 1).max(1) as f64);
                bode.push((w, real.frequency_response(w)?));
            }
            let base = require_out(&cli.out, "ora")?;
            fs::write(base, io::bode_csv(&bode))?;
            fs::write(sibling(base, ".model.json"), realization_json(&real)?)?;
            Ok(())
        }

        Verb::FocStab { controller, gamma, kp, ki, k, t1, t2, kw } => {
            let need = |opt: &Option<f64>, name: &str| {
                opt.ok_or_else(|| {
                    Error::InvalidInput(format!("--{name} is required for this controller"))
                })
            };
            let block = match controller.as_str() {
                "foi" => foc_block(FocKind::Foi { ki: need(ki, "ki")? })?,
                "fopi" => foc_block(FocKind::Fopi {
                    kp: need(kp, "kp")?,
                    ki: need(ki, "ki")?,
                })?,
                "fo-lead-lag" => foc_block(FocKind::FoLeadLag {
                    k: need(k, "k")?,
                    t1: need(t1, "t1")?,
                    t2: need(t2, "t2")?,
                })?,
                "fopss" => fopss_block(need(kw, "kw")?, need(t1, "t1")?, need(t2, "t2")?)?,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown controller '{other}' (foi, fopi, fo-lead-lag, fopss)"
                    )))
                }
            };
            let plant = example_ch4();
            let cl = assemble_closed_loop(
                &plant.pencil.e,
                &plant.pencil.a,
                &plant.b,
                &plant.c,
                &plant.d,
                &block,
                *gamma,
            )?;
            let rep = fractional_stability(&cl)?;
            emit(&cli.out, &io::foc_stab_csv(&rep))
        }

        Verb::DelayMap {
            metric,
            c,
            tau_min,
            tau_max,
            tau_points,
            gain_min,
            gain_max,
            gain_points,
            n_c,
        } => {
            let kind = match metric.as_str() {
                "sigma" => MapKind::Sigma,
                "zeta" => MapKind::Zeta,
                other => {
                    return Err(Error::InvalidInput(format!("unknown metric '{other}'")))
                }
            };
            if *tau_points < 2 || *gain_points < 2 {
                return Err(Error::InvalidInput("map axes need at least 2 points".into()));
            }
            let omib = omib_linear(&OmibParams::default())?;
            let kp = *c * omib.omega_b;
            let axis = |lo: f64, hi: f64, count: usize| -> Vec<f64> {
                (0..count)
                    .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                    .collect()
            };
            let tau_axis = axis(*tau_min, *tau_max, *tau_points);
            let gain_axis = axis(*gain_min, *gain_max, *gain_points);
            let map = stability_map(
                |tau, gain| omib_pr_delay_lti(&omib, kp, gain, tau),
                &tau_axis,
                &gain_axis,
                *n_c,
                kind,
            )?;
            let base = require_out(&cli.out, "delay-map")?;
            fs::write(base, io::map_csv(&map))?;
            fs::write(sibling(base, ".json"), io::map_sidecar_json(&map))?;
            Ok(())
        }

        Verb::DelayDis { c, eps } => {
            let ((lo, hi), kind) = delay_independent_band(*c, *eps);
            let json = serde_json::json!({
                "lower": lo,
                "upper": hi,
                "kind": format!("{kind:?}").to_lowercase(),
            });
            emit(
                &cli.out,
                &format!("{}\n", serde_json::to_string_pretty(&json).expect("json")),
            )
        }

        Verb::ChebEig { a0, delay, omib_pr, kp, kr, tau, n_c } => {
            let sys = if *omib_pr {
                let omib = omib_linear(&OmibParams::default())?;
                omib_pr_delay_lti(&omib, *kp, *kr, *tau)?
            } else {
                let a0_path = a0.as_ref().ok_or_else(|| {
                    Error::InvalidInput("--a0 is required unless --omib-pr is set".into())
                })?;
                let a0 = io::load_matrix(a0_path)?;
                let mut delayed = Vec::with_capacity(delay.len());
                for spec in delay {
                    let (path, tau) = spec.rsplit_once(':').ok_or_else(|| {
                        Error::InvalidInput(format!("bad --delay '{spec}' (expected path:tau)"))
                    })?;
                    let tau: f64 = tau.parse().map_err(|e| {
                        Error::InvalidInput(format!("bad delay in '{spec}': {e}"))
                    })?;
                    delayed.push((io::load_matrix(Path::new(path))?, tau));
                }
                DelayLti::new(a0, delayed)?
            };
            let roots = delay_spectrum(&sys, *n_c)?;
            emit(&cli.out, &io::spectrum_csv(&roots))
        }

        Verb::Gco { source, fn_min, fn_max } => {
            let dae = load_source(source)?.dae()?;
            let table = gco_scores(&dae, (*fn_min, *fn_max))?;
            if table.no_relevant_modes {
                eprintln!(
                    "warning: no oscillatory modes in [{fn_min}, {fn_max}] Hz; empty score table"
                );
            }
            emit(&cli.out, &io::gco_csv(&table))
        }

        Verb::Simulate {
            model,
            h,
            t_end,
            gco_max,
            delay_selection,
            compare_undelayed,
            event,
        } => {
            let events = parse_events(event)?;
            let cfg = ItmConfig::new(*h)?;
            if let Some(tol) = cli.tol {
                // --tol overrides the Newton tolerance here.
                let mut cfg2 = cfg;
                cfg2.newton_tol = tol;
                return run_simulation(
                    cli, model, cfg2, *t_end, gco_max, delay_selection, *compare_undelayed,
                    &events,
                );
            }
            run_simulation(
                cli, model, cfg, *t_end, gco_max, delay_selection, *compare_undelayed, &events,
            )
        }

        Verb::Hmax { source, gco_max, delay_selection, eta_max, h_grid, n_c, modes } => {
            let dae = load_source(source)?.dae()?;
            let sel = resolve_selection(&dae, *gco_max, delay_selection, (0.1, 2.0))?;
            let grid: Vec<f64> = h_grid
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad --h-grid: {e}")))?;
            let rep = max_step_estimate(&dae, &sel, *eta_max, &grid, *n_c, *modes)?;
            let json = serde_json::json!({
                "h_max": rep.h_max,
                "etas": rep.etas,
                "monotone": rep.monotone,
                "selection_len": sel.len(),
            });
            emit(
                &cli.out,
                &format!("{}\n", serde_json::to_string_pretty(&json).expect("json")),
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_simulation(
    cli: &Cli,
    model_name: &str,
    cfg: ItmConfig,
    t_end: f64,
    gco_max: &Option<f64>,
    delay_selection: &Option<PathBuf>,
    compare_undelayed: bool,
    events: &[SimEvent],
) -> Result<()> {
    // Build the model twice: once for the linearization-based selection,
    // once (mutable) for the run.
    let run_one = |sel: DelaySelection| -> Result<(sssa::integrator::Trajectory, sssa::integrator::SimStats, Vec<String>, Vec<String>)> {
        match model_name {
            "toy_multimachine" => {
                let mut m = toy_multimachine();
                let names = (m.state_names(), m.alg_names());
                let (traj, stats) = simulate(&mut m, sel, cfg, t_end, events)?;
                Ok((traj, stats, names.0, names.1))
            }
            "omib" => {
                let mut m = NonlinearOmib::new(OmibParams::default())?;
                let names = (m.state_names(), m.alg_names());
                let (traj, stats) = simulate(&mut m, sel, cfg, t_end, events)?;
                Ok((traj, stats, names.0, names.1))
            }
            other => Err(Error::InvalidInput(format!(
                "unknown simulation model '{other}' (toy_multimachine, omib)"
            ))),
        }
    };
    let sel = {
        let dae = match model_name {
            "toy_multimachine" => {
                let m = toy_multimachine();
                let (x, y) = m.initial()?;
                linearize(&m, &x, &y)?
            }
            "omib" => {
                let m = NonlinearOmib::new(OmibParams::default())?;
                let (x, y) = m.initial()?;
                linearize(&m, &x, &y)?
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown simulation model '{other}'"
                )))
            }
        };
        resolve_selection(&dae, *gco_max, delay_selection, (0.1, 2.0))?
    };
    let (traj, stats, state_names, alg_names) = run_one(sel)?;
    let max_mismatch = if compare_undelayed {
        let (base, _, _, _) = run_one(DelaySelection::empty())?;
        let mut worst = 0.0f64;
        for ((i, j), v) in traj.states.indexed_iter() {
            worst = worst.max((v - base.states[[i, j]]).abs());
        }
        Some(worst)
    } else {
        None
    };
    let base = require_out(&cli.out, "simulate")?;
    fs::write(base, io::trajectory_csv(&traj, &state_names, &alg_names))?;
    fs::write(
        sibling(base, ".stats.json"),
        io::stats_json(&stats, max_mismatch),
    )?;
    Ok(())
}

/// Realization dump: the state-space part in the JSON model schema plus the
/// input/output vectors and ladder data.
fn realization_json(real: &sssa::fractional::OraRealization) -> Result<String> {
    use sssa::fractional::OraForm;
    let triplets = |mat: &Array2<f64>| -> Vec<(usize, usize, f64)> {
        let mut v: Vec<(usize, usize, f64)> = mat
            .indexed_iter()
            .filter(|(_, &x)| x != 0.0)
            .map(|((r, c), &x)| (r, c, x))
            .collect();
        v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        v
    };
    let json = match &real.form {
        OraForm::Explicit { a, b, c, feedthrough } => serde_json::json!({
            "model": { "n": a.nrows(), "m": 0, "fx": triplets(a), "fy": [], "gx": [], "gy": [] },
            "b": b.to_vec(),
            "c": c.to_vec(),
            "feedthrough": feedthrough,
            "zeros": real.zeros,
            "poles": real.poles,
            "hf_gain": real.hf_gain,
        }),
        OraForm::SemiImplicit { e, a, b } => serde_json::json!({
            "model": {
                "n": a.nrows(), "m": 0, "fx": triplets(a), "fy": [], "gx": [], "gy": [],
                "lhs": { "T": triplets(e), "R": [] }
            },
            "b": b.to_vec(),
            "zeros": real.zeros,
            "poles": real.poles,
            "hf_gain": real.hf_gain,
        }),
    };
    Ok(format!(
        "{}\n",
        serde_json::to_string_pretty(&json).expect("realization json")
    ))
}
