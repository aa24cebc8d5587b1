use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use refsim::config::{config_from_log_header, SimConfig};
use refsim::cpu::{format_trace, generate_trace, trace_mpki, TraceSpec};
use refsim::dram::{retention_audit_text, verify_command_log_text};
use refsim::experiment::{
    gen_mixes_from, gen_workload_mixes, mixes_text, parse_schemes, Experiment, Matrix, Mix, Scheme, Sweep,
    SweepPoint, CATEGORIES,
};
use refsim::sim::{run_single, stats_csv};
use refsim::{Error, Result};

#[derive(Parser)]
#[command(name = "refsim", version, about = "Cycle-level DRAM refresh simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one configuration, verify its logs and write outputs.
    Run {
        config: Option<PathBuf>,
        #[command(flatten)]
        over: Overrides,
        /// Output directory (default: the config's output_dir, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every mix under every scheme; writes matrix.csv, summary.csv, mixes.txt.
    Matrix {
        config: Option<PathBuf>,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        mixes: MixArgs,
        /// Comma-separated schemes (`noref` or policy names).
        #[arg(long, default_value = "refab,refpb,elastic,darp,sarp_pb,dsarp")]
        schemes: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Mean WS per scheme along one axis; writes sweep.csv and matrix-<point>.csv.
    Sweep {
        config: Option<PathBuf>,
        #[command(flatten)]
        over: Overrides,
        #[command(flatten)]
        mixes: MixArgs,
        /// density, tfaw, subarrays, retention, intensity or policy.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; `tfaw` takes `faw/rrd` pairs. Defaults to
        /// the standard series of the axis.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value = "refpb,sarp_pb")]
        schemes: String,
        /// Scheme the gains are relative to.
        #[arg(long, default_value = "refpb")]
        reference: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a synthetic trace.
    GenTrace {
        #[arg(long, default_value_t = 20.0)]
        mpki: f64,
        #[arg(long, default_value_t = 64 << 20)]
        footprint_bytes: u64,
        #[arg(long, default_value_t = 0.5)]
        bank_locality: f64,
        #[arg(long, default_value_t = 0.3)]
        write_fraction: f64,
        #[arg(long, default_value_t = 50_000)]
        len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print workload mixes.
    GenMixes {
        #[command(flatten)]
        mixes: MixArgs,
    },
    /// Replay a command log against the timing rules.
    Verify {
        log: PathBuf,
        /// Configuration of the run (default: the log's header).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a refresh log against retention deadlines.
    Audit {
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// End of the audited window (default: sim_cycles).
        #[arg(long)]
        end: Option<u64>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    density: Option<u32>,
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long, default_value_t = 1)]
    mix_seed: u64,
    #[arg(long, default_value_t = 4)]
    per_category: usize,
    #[arg(long, default_value_t = 8)]
    cores: u32,
    /// Comma-separated intensive percentages.
    #[arg(long)]
    categories: Option<String>,
}

impl MixArgs {
    fn categories(&self) -> Result<Vec<u32>> {
        match &self.categories {
            None => Ok(CATEGORIES.to_vec()),
            Some(s) => s
                .split(',')
                .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("bad category `{v}`"))))
                .collect(),
        }
    }

    fn mixes(&self) -> Result<Vec<Mix>> {
        let cats = self.categories()?;
        if cats == CATEGORIES {
            gen_workload_mixes(self.mix_seed, self.per_category, self.cores)
        } else {
            let pool = refsim::cpu::default_pool(refsim::config::DEFAULT_TRACE_LEN);
            gen_mixes_from(&pool, self.mix_seed, self.per_category, self.cores, &cats)
        }
    }
}

fn load_config(path: Option<&Path>, over: &Overrides) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(p) = &over.policy {
        cfg.apply("policy", p)?;
    }
    if let Some(d) = over.density {
        cfg.apply("density_gbit", &d.to_string())?;
    }
    if let Some(c) = over.cycles {
        cfg.apply("sim_cycles", &c.to_string())?;
    }
    if let Some(s) = over.seed {
        cfg.apply("seed", &s.to_string())?;
    }
    for kv in &over.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.apply(k, v)?;
    }
    Ok(cfg)
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(d) = path.parent() {
        if !d.as_os_str().is_empty() {
            std::fs::create_dir_all(d).map_err(|e| Error::Io {
                path: d.to_path_buf(),
                source: e,
            })?;
        }
    }
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn log_config(text: &str, explicit: Option<&Path>) -> Result<SimConfig> {
    match explicit {
        Some(p) => SimConfig::load(p),
        None => config_from_log_header(text)
            .unwrap_or_else(|| Err(Error::Config("log has no configuration header; pass --config".into()))),
    }
}

fn default_values(axis: &str) -> &'static str {
    match axis {
        "density" => "8,16,32",
        "tfaw" => "5/1,10/2,15/3,20/4,25/5,30/6",
        "subarrays" => "1,2,4,8,16,32,64",
        "retention" => "32,64",
        _ => "",
    }
}

fn report_failures(m: &Matrix) -> bool {
    if !m.failures.is_empty() {
        eprint!("{}", m.failures_text());
    }
    m.failures.is_empty()
}

/// Ok(true) when every run and check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Run { config, over, out } => {
            let cfg = load_config(config.as_deref(), &over)?;
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "out".into());
            let res = run_single(&cfg)?;
            refsim::sim::write_outputs(&cfg, &res, &dir)?;
            print!("{}", stats_csv(&cfg, &res.stats));
            if let Some(e) = res.stats.energy_per_access() {
                println!("energy_per_access_nj,{e:.6}");
            }
            println!("outputs in {}", dir.display());
            Ok(true)
        }
        Cmd::Matrix {
            config,
            over,
            mixes,
            schemes,
            out,
        } => {
            let base = load_config(config.as_deref(), &over)?;
            let mixes = mixes.mixes()?;
            let schemes = parse_schemes(&schemes)?;
            let m = Experiment::new(true).run_matrix(&base, &mixes, &schemes)?;
            write(&out.join("mixes.txt"), &mixes_text(&mixes))?;
            write(&out.join("matrix.csv"), &m.to_csv())?;
            let summary = m.summary_csv();
            write(&out.join("summary.csv"), &summary)?;
            print!("{summary}");
            Ok(report_failures(&m))
        }
        Cmd::Sweep {
            config,
            over,
            mixes,
            axis,
            values,
            schemes,
            reference,
            out,
        } => {
            let base = load_config(config.as_deref(), &over)?;
            let reference: Scheme = reference.parse()?;
            let mut schemes = parse_schemes(&schemes)?;
            if axis == "policy" {
                schemes = parse_schemes(values.as_deref().unwrap_or(
                    "refab,refpb,elastic,darp,sarp_ab,sarp_pb,dsarp,fgr2x,fgr4x",
                ))?;
            }
            if !schemes.contains(&reference) {
                schemes.insert(0, reference);
            }
            let mixes = mixes.mixes()?;
            let exp = Experiment::new(true);
            let sweep = match axis.as_str() {
                "policy" | "intensity" => {
                    let m = exp.run_matrix(&base, &mixes, &schemes)?;
                    let mut points = Vec::new();
                    if axis == "intensity" {
                        let mut cats: Vec<u32> = mixes.iter().map(|m| m.intensive_pct).collect();
                        cats.dedup();
                        for c in cats {
                            points.push((format!("intensity={c}"), m.category(c)));
                        }
                    }
                    points.push(("all".to_string(), m));
                    Sweep { points }
                }
                _ => {
                    let v = values.as_deref().unwrap_or(default_values(&axis));
                    let points = SweepPoint::parse_list(&axis, v)?;
                    exp.run_sweep(&base, &mixes, &points, &schemes)?
                }
            };
            write(&out.join("mixes.txt"), &mixes_text(&mixes))?;
            for (label, m) in &sweep.points {
                let name = label.replace(['=', '/'], "_");
                write(&out.join(format!("matrix-{name}.csv")), &m.to_csv())?;
            }
            let csv = sweep.to_csv(reference);
            write(&out.join("sweep.csv"), &csv)?;
            print!("{csv}");
            Ok(sweep.points.iter().all(|(_, m)| report_failures(m)))
        }
        Cmd::GenTrace {
            mpki,
            footprint_bytes,
            bank_locality,
            write_fraction,
            len,
            seed,
            out,
        } => {
            let spec = TraceSpec {
                mpki,
                footprint_bytes,
                bank_locality,
                write_fraction,
                len,
                seed,
            };
            let t = generate_trace(&spec)?;
            let body = format!("# {spec}\n# mpki {:.3}\n{}", trace_mpki(&t), format_trace(&t));
            match out {
                Some(p) => write(&p, &body)?,
                None => print!("{body}"),
            }
            Ok(true)
        }
        Cmd::GenMixes { mixes } => {
            for m in mixes.mixes()? {
                println!("{} {}", m.name, m.intensive_pct);
                for e in &m.members {
                    println!("  {} {}", e.name, e.spec);
                }
            }
            Ok(true)
        }
        Cmd::Verify { log, config } => {
            let text = read(&log)?;
            let cfg = log_config(&text, config.as_deref())?;
            let v = verify_command_log_text(&text, &cfg.timing()?, &cfg.org, cfg.sarp_active());
            for x in v.iter().take(50) {
                println!("{x}");
            }
            println!("{} violation(s)", v.len());
            Ok(v.is_empty())
        }
        Cmd::Audit { log, config, end } => {
            let text = read(&log)?;
            let cfg = log_config(&text, config.as_deref())?;
            if cfg.no_refresh {
                println!("refresh disabled in this run; nothing to audit");
                return Ok(true);
            }
            let end = end.unwrap_or(cfg.sim_cycles);
            let v = retention_audit_text(&text, &cfg.org, &cfg.timing()?, cfg.policy.refresh_mode(), 0, end)
                .map_err(|(line, msg)| Error::Parse {
                    source_name: log.display().to_string(),
                    line,
                    msg,
                })?;
            for x in v.iter().take(50) {
                println!("{x}");
            }
            println!("{} violation(s)", v.len());
            Ok(v.is_empty())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
