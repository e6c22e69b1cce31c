//! Argument definitions and subcommand bodies for the `twhaar` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use twisted_haar::geometry::{
    raw_shard, tube_sigma, verify_partition, Case, PartitionWindow,
};
use twisted_haar::grid::{parse_tgs1, random_signal};
use twisted_haar::martingale::{cond_expect, lp_ratio_report, mart_diff, square_fn_dyadic};
use twisted_haar::nilpotent::comparability_check;
use twisted_haar::shear::verify_unimodular;
use twisted_haar::tensor::ScaleWindow;
use twisted_haar::{
    AnySignal, Dyadic, Euclid, GridSignal, HaarCoefficients, Law, NilCoefficients, NilShape, NilSystem, RootDyadic,
    Scalar, ScalePair, ShearKind, ShearMap, TorusGrid,
};

use crate::config::{parse_list, parse_triple, Mode, RunConfig};
use crate::{figures, suite};

#[derive(Debug, Parser)]
#[command(name = "twhaar", version, about = "Twisted dyadic Haar systems, martingale filtrations and Heisenberg shard geometry")]
pub struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `exact` or `float`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Output directory for reports and generated files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded signals in TGS1 format.
    #[command(subcommand)]
    Signal(SignalCmd),
    /// Euclidean twisted Haar systems.
    #[command(subcommand)]
    Haar(HaarCmd),
    /// Conditional expectations, martingale differences and square functions.
    #[command(subcommand)]
    Mart(MartCmd),
    /// Unimodular shear certificates.
    #[command(subcommand)]
    Shear(ShearCmd),
    /// Stacked tiles and raw projected shards.
    #[command(subcommand)]
    Shards(ShardsCmd),
    /// Analytic shards and Haar systems on the quotient nilpotent model.
    #[command(subcommand)]
    Nil(NilCmd),
    /// Run every verification check; exit 1 if any fails.
    VerifyAll,
    /// Emit plot data (CSV and SVG).
    Figures,
}

#[derive(Debug, Args)]
pub struct SignalSource {
    /// TGS1 input; a seeded uniform signal on the configured grid when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SignalCmd {
    Gen {
        #[arg(long)]
        grid: Option<String>,
        /// uniform, sign or sparse.
        #[arg(long, default_value = "uniform")]
        law: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum HaarCmd {
    Analyze {
        #[command(flatten)]
        src: SignalSource,
        /// 1, 2, 3 or all.
        #[arg(long, default_value = "all")]
        system: String,
        /// `lo..hi,lo..hi` in grid levels; the full window by default.
        #[arg(long)]
        window: Option<String>,
    },
    Synthesize {
        /// THC1 coefficient file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    Frame {
        #[command(flatten)]
        src: SignalSource,
        #[arg(long)]
        window: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MartCmd {
    Expect {
        #[command(flatten)]
        src: SignalSource,
        #[arg(long)]
        system: u8,
        /// Grid levels `k1,k2`.
        #[arg(long, allow_hyphen_values = true)]
        k: String,
    },
    Diff {
        #[command(flatten)]
        src: SignalSource,
        #[arg(long)]
        system: u8,
        #[arg(long, allow_hyphen_values = true)]
        k: String,
    },
    Square {
        #[command(flatten)]
        src: SignalSource,
        #[arg(long)]
        system: u8,
    },
    LpReport {
        #[arg(long, default_value = "1,2,3")]
        systems: String,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// CSV destination; `<out>/report.csv` by default.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ShearCmd {
    Verify {
        /// T2, T3, Theta or Identity.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Args)]
pub struct ShardArgs {
    #[arg(long)]
    pub case: u8,
    /// Scales `j1,j2,j3`.
    #[arg(long, allow_hyphen_values = true)]
    pub j: String,
    #[arg(long)]
    pub kappa: Option<i32>,
    /// `zero` or `staircase:SEED`.
    #[arg(long)]
    pub profile: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum ShardsCmd {
    Build {
        #[command(flatten)]
        shard: ShardArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    VerifyPartition {
        #[command(flatten)]
        shard: ShardArgs,
        /// `s0,s1:a0,a1:b0,b1`: spatial interval for every axis and the central box in the
        /// regime's natural frame, integer endpoints.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long)]
        broken_lattice: bool,
    },
    TubeSigma {
        #[command(flatten)]
        shard: ShardArgs,
        #[arg(long)]
        sigma_max: Option<i32>,
    },
}

#[derive(Debug, Args)]
pub struct NilArgs {
    #[arg(long = "type", default_value_t = 1)]
    pub type_k: u8,
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub kappa: Option<i32>,
    /// Number of parabolic levels below the root.
    #[arg(long)]
    pub levels: Option<u32>,
    /// Scales `j1,j2,j3` (the root has scale 0).
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<String>,
    #[command(flatten)]
    pub src: SignalSource,
}

#[derive(Debug, Subcommand)]
pub enum NilCmd {
    Haar(NilArgs),
    Expect(NilArgs),
    Diff(NilArgs),
    Frame(NilArgs),
    Square(NilArgs),
    Compare {
        #[arg(long)]
        case: u8,
        #[arg(long, allow_hyphen_values = true)]
        j: String,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        kappa: Option<i32>,
    },
}

/// A subcommand either completes its checks or reports that some failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Defaults, then the config file, then global flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = &cli.mode {
        cfg.mode = m.parse()?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Signal(SignalCmd::Gen { grid, law, output }) => {
            let grid = TorusGrid::parse_spec(grid.as_deref().unwrap_or(&cfg.grid))?;
            let sig = random_signal(&grid, cfg.seed, law.parse::<Law>()?);
            let text = match cfg.mode {
                Mode::Exact => sig.to_tgs1(),
                Mode::Float => sig.to_float().to_tgs1(),
            };
            emit(output.as_deref(), &text)?;
            Ok(Outcome::Pass)
        }
        Command::Haar(cmd) => haar(&cfg, cmd),
        Command::Mart(cmd) => mart(&cfg, cmd),
        Command::Shear(ShearCmd::Verify { kind, grid }) => {
            let grid = TorusGrid::parse_spec(grid)?;
            let kind: ShearKind = kind.parse()?;
            let map = ShearMap::new(kind, &grid)?;
            let r = verify_unimodular(map.matrix(), Some(&grid));
            println!("kind={kind} grid={grid} {r}");
            Ok(Outcome::from_bool(r.accepted))
        }
        Command::Shards(cmd) => shards(&cfg, cmd),
        Command::Nil(cmd) => nil(&cfg, cmd),
        Command::VerifyAll => verify_all(&cfg),
        Command::Figures => {
            for f in figures::write_all(&cfg, &cfg.out.join("figures"))? {
                println!("{}", f.display());
            }
            Ok(Outcome::Pass)
        }
    }
}

/// Runs the suite and writes `report.csv` and `summary.txt` into the output directory.
pub fn verify_all(cfg: &RunConfig) -> Result<Outcome> {
    let report = suite::run_all(cfg);
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let summary = report.summary(cfg);
    write_file(&cfg.out.join("report.csv"), &report.to_csv())?;
    write_file(&cfg.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(Outcome::from_bool(report.passed()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to a file when given one, to stdout otherwise.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_signal(cfg: &RunConfig, src: &SignalSource, grid: &TorusGrid) -> Result<AnySignal> {
    let sig = match &src.input {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_tgs1(&text)?
        }
        None => AnySignal::Exact(random_signal(grid, cfg.seed, Law::Uniform)),
    };
    if sig.grid() != grid {
        bail!("signal grid {} does not match {}", sig.grid(), grid);
    }
    match (cfg.mode, sig) {
        (Mode::Float, AnySignal::Exact(s)) => Ok(AnySignal::Float(s.to_float())),
        (Mode::Exact, AnySignal::Float(_)) => bail!("a float signal cannot be processed in exact mode"),
        (_, s) => Ok(s),
    }
}

/// Calls a generic body with the signal at its own scalar type.
macro_rules! with_signal {
    ($sig:expr, |$f:ident| $body:expr) => {
        match $sig {
            AnySignal::Exact($f) => $body,
            AnySignal::Float($f) => $body,
        }
    };
}

fn window_arg(spec: Option<&str>, full: ScaleWindow) -> Result<ScaleWindow> {
    let Some(s) = spec else { return Ok(full) };
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part.split_once("..").ok_or_else(|| anyhow!("window part `{part}` is not `lo..hi`"))?;
        lo.push(a.trim().parse()?);
        hi.push(b.trim().parse()?);
    }
    Ok(ScaleWindow { lo, hi })
}

fn haar(cfg: &RunConfig, cmd: &HaarCmd) -> Result<Outcome> {
    match cmd {
        HaarCmd::Analyze { src, system, window } => {
            let e = Euclid::new(&cfg.euclid_grid()?)?;
            let w = window_arg(window.as_deref(), e.full_window())?;
            let systems: Vec<u8> = if system == "all" { vec![1, 2, 3] } else { parse_list(system)? };
            let sig = load_signal(cfg, src, e.grid())?;
            for i in systems {
                let (text, energy) = with_signal!(&sig, |f| {
                    let c = e.analyze(f, i, &w)?;
                    (c.to_thc1(&e), c.energy().to_f64())
                });
                let path = cfg.out.join(format!("coeffs_system{i}.thc1"));
                write_file(&path, &text)?;
                println!("system {i}: energy {energy} -> {}", path.display());
            }
            Ok(Outcome::Pass)
        }
        HaarCmd::Synthesize { input, output } => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let out = match cfg.mode {
                Mode::Exact => {
                    let (e, c) = HaarCoefficients::<RootDyadic>::from_thc1(&text)?;
                    e.synthesize(&c)?.to_tgs1()
                }
                Mode::Float => {
                    let (e, c) = HaarCoefficients::<f64>::from_thc1(&text)?;
                    e.synthesize(&c)?.to_tgs1()
                }
            };
            emit(output.as_deref(), &out)?;
            Ok(Outcome::Pass)
        }
        HaarCmd::Frame { src, window } => {
            let e = Euclid::new(&cfg.euclid_grid()?)?;
            let w = window_arg(window.as_deref(), e.full_window())?;
            let sig = load_signal(cfg, src, e.grid())?;
            with_signal!(&sig, |f| frame_report(e.frame_apply(f, &w)?, f))
        }
    }
}

fn frame_report<S: Scalar>(r: twisted_haar::FrameResult<S>, f: &GridSignal<S>) -> Result<Outcome> {
    let c = f.centered();
    let norm = c.norm_sq();
    let three = S::from_dyadic(Dyadic::from_int(3));
    let exact_ratio = if S::EXACT { r.energy == three * norm } else { (r.energy.to_f64() / norm.to_f64() - 3.0).abs() < 1e-9 };
    let recon = r.reconstruction.as_ref().map(|g| g.sub(&c).map(|d| d.norm_sq().to_f64()));
    let recon_err = recon.transpose()?;
    let per: Vec<String> = r.per_system.iter().map(|e| e.to_f64().to_string()).collect();
    println!("energy per system: {}", per.join(" "));
    println!("frame ratio: {}", if exact_ratio && S::EXACT { "3".to_string() } else { (r.energy.to_f64() / norm.to_f64()).to_string() });
    match recon_err {
        Some(err) => println!("reconstruction error (squared L2): {err}"),
        None => println!("reconstruction: triple sum not divisible by 3 in the exact ring"),
    }
    if !r.full_window {
        println!("partial window: no frame identity claimed");
        return Ok(Outcome::Pass);
    }
    let recon_ok = recon_err.is_some_and(|e| if S::EXACT { e == 0.0 } else { e < 1e-18 });
    Ok(Outcome::from_bool(exact_ratio && recon_ok))
}

fn mart(cfg: &RunConfig, cmd: &MartCmd) -> Result<Outcome> {
    let e = || -> Result<Euclid> { Ok(Euclid::new(&cfg.euclid_grid()?)?) };
    match cmd {
        MartCmd::Expect { src, system, k } | MartCmd::Diff { src, system, k } => {
            let e = e()?;
            let k: ScalePair = k.parse()?;
            let sig = load_signal(cfg, src, e.grid())?;
            let expect = matches!(cmd, MartCmd::Expect { .. });
            let text = with_signal!(&sig, |f| {
                let g = if expect { cond_expect(&e, f, k, *system)? } else { mart_diff(&e, f, k, *system)? };
                g.to_tgs1()
            });
            let name = if expect { "expect" } else { "diff" };
            let path = cfg.out.join(format!("mart_{name}_system{system}.tgs1"));
            write_file(&path, &text)?;
            println!("{}", path.display());
            Ok(Outcome::Pass)
        }
        MartCmd::Square { src, system } => {
            let e = e()?;
            let sig = load_signal(cfg, src, e.grid())?;
            let s = with_signal!(&sig, |f| square_fn_dyadic(&e, f, *system, &e.full_window())?);
            let path = cfg.out.join(format!("square_system{system}.tgs1"));
            write_file(&path, &s.to_tgs1())?;
            println!("{}", path.display());
            Ok(Outcome::Pass)
        }
        MartCmd::LpReport { systems, p, trials, report } => {
            let systems: Vec<u8> = parse_list(systems)?;
            let ps: Vec<f64> = match p {
                Some(p) => parse_list(p)?,
                None => cfg.lp_exponents.clone(),
            };
            let r = lp_ratio_report(&cfg.euclid_grid()?, &systems, &ps, trials.unwrap_or(cfg.lp_trials), cfg.seed)?;
            let path = report.clone().unwrap_or_else(|| cfg.out.join("report.csv"));
            write_file(&path, &r.to_csv())?;
            for s in &r.summaries {
                println!("system {} p={}: min {:.6} median {:.6} max {:.6}", s.system, s.p, s.min, s.median, s.max);
            }
            println!("max transfer deviation {:.3e}, exact squared transfer {}", r.max_transfer_deviation(), r.exact_transfer);
            Ok(Outcome::from_bool(r.exact_transfer && r.max_transfer_deviation() <= suite::LP_TRANSFER_TOL))
        }
    }
}

fn shard_inputs(cfg: &RunConfig, a: &ShardArgs) -> Result<(Case, [i32; 3], [twisted_haar::geometry::FactorSpec; 3])> {
    let mut local = cfg.clone();
    if let Some(k) = a.kappa {
        local.kappa = k;
    }
    let profile = a.profile.clone().unwrap_or_else(|| cfg.profile.clone());
    let specs = local.factor_specs_with(&profile)?;
    for s in &specs {
        for w in s.check(cfg.strict)? {
            eprintln!("warning: {w}");
        }
    }
    Ok((Case::from_id(a.case)?, parse_triple(&a.j)?, specs))
}

fn partition_window(s: &str) -> Result<PartitionWindow> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("window must be `s0,s1:a0,a1:b0,b1`");
    }
    let iv = |p: &str| -> Result<twisted_haar::geometry::Interval> {
        let v: Vec<i64> = parse_list(p)?;
        match v.as_slice() {
            [a, b] if a < b => Ok(twisted_haar::geometry::Interval::new(Dyadic::from_int(*a), Dyadic::from_int(*b))),
            _ => bail!("bad interval `{p}`"),
        }
    };
    let s = iv(parts[0])?;
    Ok(PartitionWindow { spatial: [s, s, s], central: (iv(parts[1])?, iv(parts[2])?) })
}

fn shards(cfg: &RunConfig, cmd: &ShardsCmd) -> Result<Outcome> {
    match cmd {
        ShardsCmd::Build { shard, output } => {
            let (case, j, specs) = shard_inputs(cfg, shard)?;
            let s = raw_shard(case, &specs, j)?;
            let region = s.region();
            let path = output.clone().unwrap_or_else(|| cfg.out.join("region.fbr"));
            write_file(&path, &region.to_fbr1())?;
            println!(
                "case {} j={j:?} swapped={} translates={} volume={} -> {}",
                case.id(),
                s.swapped,
                s.translates,
                region.volume(),
                path.display()
            );
            Ok(Outcome::Pass)
        }
        ShardsCmd::VerifyPartition { shard, window, broken_lattice } => {
            let (case, j, specs) = shard_inputs(cfg, shard)?;
            let w = window.as_deref().map(partition_window).transpose()?;
            let r = verify_partition(case, &specs, j, w.as_ref(), *broken_lattice)?;
            let mut csv = String::from("case,j1,j2,j3,cells,spatial_min,spatial_max,central_min,central_max,status\n");
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                case.id(),
                j[0],
                j[1],
                j[2],
                r.cells_checked,
                r.spatial_multiplicity.0,
                r.spatial_multiplicity.1,
                r.central_multiplicity.0,
                r.central_multiplicity.1,
                if r.pass() { "PASS" } else { "FAIL" }
            );
            write_file(&cfg.out.join("partition.csv"), &csv)?;
            print!("{csv}");
            for f in r.failures.iter().take(5) {
                eprintln!("{f}");
            }
            Ok(Outcome::from_bool(r.pass()))
        }
        ShardsCmd::TubeSigma { shard, sigma_max } => {
            let (case, j, specs) = shard_inputs(cfg, shard)?;
            let s = raw_shard(case, &specs, j)?;
            let r = tube_sigma(&s, sigma_max.unwrap_or(cfg.sigma_max));
            let mut csv = String::from("case,j1,j2,j3,sigma,sigma_inner,sigma_outer\n");
            let outcome = match &r {
                Ok(r) => {
                    let _ = writeln!(csv, "{},{},{},{},{},{},{}", case.id(), j[0], j[1], j[2], r.sigma, r.sigma_inner, r.sigma_outer);
                    Outcome::Pass
                }
                Err(e) => {
                    eprintln!("{e}");
                    Outcome::Fail
                }
            };
            write_file(&cfg.out.join("tube_sigma.csv"), &csv)?;
            print!("{csv}");
            Ok(outcome)
        }
    }
}

fn nil_shape(cfg: &RunConfig, dims: Option<&str>, kappa: Option<i32>, levels: Option<u32>) -> Result<NilShape> {
    let dims = match dims {
        Some(d) => parse_triple(d)?,
        None => cfg.nil_dims,
    };
    Ok(NilShape::new(dims, levels.unwrap_or(cfg.nil_levels), 0, kappa.unwrap_or(cfg.nil_kappa)))
}

fn nil_levels_arg(shape: &NilShape, j: Option<&str>) -> Result<Option<[i32; 3]>> {
    j.map(|j| Ok(parse_triple::<i32>(j)?.map(|x| shape.level_of(x)))).transpose()
}

fn nil(cfg: &RunConfig, cmd: &NilCmd) -> Result<Outcome> {
    if let NilCmd::Compare { case, j, dims, kappa } = cmd {
        let j: [i32; 3] = parse_triple(j)?;
        let mut local = cfg.clone();
        if let Some(k) = kappa {
            local.kappa = *k;
        }
        let dims = match dims {
            Some(d) => parse_triple(d)?,
            None => cfg.nil_dims,
        };
        let case = Case::from_id(*case)?;
        let specs = local.factor_specs_with("zero")?;
        let shape = NilShape::new(dims, 1, j.iter().copied().max().unwrap_or(0), local.kappa);
        let raw = raw_shard(case, &specs, j)?;
        let analytic = shape.origin_shard(case.id(), j.map(|x| shape.level_of(x)));
        let c = comparability_check(&raw, &analytic, &shape)?;
        let (cin, cout) = c.constants();
        let csv = format!(
            "case,j1,j2,j3,kappa,c_in,c_out\n{},{},{},{},{},{},{}\n",
            case.id(),
            j[0],
            j[1],
            j[2],
            local.kappa,
            cin.to_f64(),
            cout.to_f64()
        );
        write_file(&cfg.out.join("compare.csv"), &csv)?;
        print!("{csv}");
        return Ok(Outcome::Pass);
    }
    let (NilCmd::Haar(a) | NilCmd::Expect(a) | NilCmd::Diff(a) | NilCmd::Frame(a) | NilCmd::Square(a)) = cmd else {
        unreachable!("compare handled above")
    };
    let shape = nil_shape(cfg, a.dims.as_deref(), a.kappa, a.levels)?;
    let sys = NilSystem::new(shape)?;
    let sig = load_signal(cfg, &a.src, sys.grid())?;
    let levels = nil_levels_arg(&shape, a.j.as_deref())?;
    let k = a.type_k;
    let need = || levels.ok_or_else(|| anyhow!("--j is required"));
    match cmd {
        NilCmd::Haar(_) => {
            let w = match levels {
                Some(l) => ScaleWindow { lo: l.to_vec(), hi: l.to_vec() },
                None => sys.full_window(),
            };
            let text = match &sig {
                AnySignal::Exact(f) => sys.analyze(f, k, &w)?.to_thc1(&sys),
                AnySignal::Float(f) => sys.analyze(f, k, &w)?.to_thc1(&sys),
            };
            let path = cfg.out.join(format!("nil_type{k}.thc1"));
            write_file(&path, &text)?;
            println!("{}", path.display());
            // Round trip through the file format as a sanity check on the written output.
            if cfg.mode == Mode::Exact {
                NilCoefficients::<RootDyadic>::from_thc1(&text)?;
            }
            Ok(Outcome::Pass)
        }
        NilCmd::Expect(_) | NilCmd::Diff(_) => {
            let l = need()?;
            let expect = matches!(cmd, NilCmd::Expect(_));
            let text = with_signal!(&sig, |f| {
                let g = if expect { sys.cond_expect(f, l, k)? } else { sys.mart_diff(f, l, k)? };
                g.to_tgs1()
            });
            let path = cfg.out.join(format!("nil_{}_type{k}.tgs1", if expect { "expect" } else { "diff" }));
            write_file(&path, &text)?;
            println!("{}", path.display());
            Ok(Outcome::Pass)
        }
        NilCmd::Frame(_) => with_signal!(&sig, |f| frame_report(sys.frame(f, &sys.full_window())?, f)),
        NilCmd::Square(_) => {
            let s = with_signal!(&sig, |f| sys.square_fn(f, k, &sys.full_window())?);
            let path = cfg.out.join(format!("nil_square_type{k}.tgs1"));
            write_file(&path, &s.to_tgs1())?;
            println!("{}", path.display());
            Ok(Outcome::Pass)
        }
        NilCmd::Compare { .. } => unreachable!(),
    }
}
