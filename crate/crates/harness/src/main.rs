use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lle_harness::config::{read_config_file, ExperimentConfig};
use lle_harness::runners;
use lle_toolkit::boundary;
use lle_toolkit::io;
use lle_toolkit::lle_core::MatrixMeta;
use lle_toolkit::spectral::{self, EigOptions, Ordering};

#[derive(Parser)]
#[command(name = "lle", version, about = "Boundary-aware locally linear embedding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a point cloud and write cloud.csv.
    Sample(Common),
    /// Assemble W (or the alpha kernel with --alpha) and write W.csv.
    Build(Common),
    /// Leading eigenvalues of a saved or freshly built matrix.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Load this matrix instead of building one.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Order by modulus instead of real part.
        #[arg(long)]
        modulus: bool,
    },
    /// Eigenvectors of W or of the clipped matrix.
    Eigenfunctions(Common),
    /// Boundary indicator, labels and profile.
    Indicator(Common),
    /// Write the clipped matrix and its index map.
    Clip(Common),
    /// Pointwise convergence sweep on a flat manifold.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Sample counts; defaults to n/4, n/2, n.
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        /// Bandwidths; defaults to the configured eps.
        #[arg(long, value_delimiter = ',')]
        epss: Vec<f64>,
    },
    /// Complex spectrum on a structureless Gaussian cloud.
    Nullcase(Common),
    /// Tabulate the analytic coefficients.
    SigmaTable {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Grid points on [0, 1.25] in units of eps.
        #[arg(long, default_value_t = 126)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value = "sigma_table.csv")]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifold: Option<String>,
    /// Sample count (raw draws for rejection samplers).
    #[arg(long)]
    n: Option<usize>,
    /// Ambient dimension of the Gaussian cloud.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    /// Fixed regularizer; implies --c-rule fixed.
    #[arg(long)]
    c: Option<f64>,
    /// 'paper' (n eps^(d+3)) or 'fixed'.
    #[arg(long)]
    c_rule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_eigs: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Clip depth as a fraction of eps.
    #[arg(long)]
    tstar_clip: Option<f64>,
    /// Use the clipped matrix.
    #[arg(long)]
    clip: bool,
    #[arg(long)]
    threshold: Option<f64>,
    /// constant, coordinate, squared-radius or trig.
    #[arg(long)]
    f_test: Option<String>,
    /// Divide the preset sample count.
    #[arg(long)]
    scale: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut layers = Vec::new();
        if let Some(path) = &self.config {
            layers.push(read_config_file(path)?);
        }
        let mut cli = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                cli.push((k.to_string(), v));
            }
        };
        put("manifold", self.manifold.clone());
        put("n", self.n.map(|v| v.to_string()));
        put("p", self.p.map(|v| v.to_string()));
        put("eps", self.eps.map(|v| v.to_string()));
        put("knn", self.knn.map(|v| v.to_string()));
        put("c_rule", self.c_rule.clone());
        put("c", self.c.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("k_eigs", self.k_eigs.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|v| v.display().to_string()));
        put("tstar_clip", self.tstar_clip.map(|v| v.to_string()));
        put("clip", self.clip.then(|| "true".to_string()));
        put("threshold", self.threshold.map(|v| v.to_string()));
        put("f_test", self.f_test.clone());
        put("scale", self.scale.map(|v| v.to_string()));
        layers.push(cli);
        ExperimentConfig::resolve(&layers)
    }
}

fn meta_for(cfg: &ExperimentConfig, prep: &runners::Prepared, n: usize) -> MatrixMeta {
    let mut meta = MatrixMeta {
        n,
        ..prep.lle.meta.clone()
    };
    if let Some(a) = cfg.alpha {
        meta.scheme = format!("{}+alpha{a}", meta.scheme);
    }
    meta
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sample(common) => {
            let cfg = common.resolve()?;
            let cloud = runners::sample_cloud(&cfg)?;
            let path = cfg.output_dir.join("cloud.csv");
            io::write_cloud(&cloud, &path)?;
            println!("{} points -> {}", cloud.n(), path.display());
        }
        Command::Build(common) => {
            let cfg = common.resolve()?;
            let prep = runners::prepare(&cfg)?;
            let w = runners::operator_matrix(&cfg, &prep)?;
            let path = cfg.output_dir.join("W.csv");
            io::save_matrix(&w, &meta_for(&cfg, &prep, w.n_rows()), &path)?;
            println!("{} x {}, {} entries -> {}", w.n_rows(), w.n_cols(), w.nnz(), path.display());
        }
        Command::Spectrum {
            common,
            matrix,
            modulus,
        } => {
            let cfg = common.resolve()?;
            let w = match matrix {
                Some(path) => io::load_matrix(&path)?.0,
                None => runners::operator_matrix(&cfg, &runners::prepare(&cfg)?)?,
            };
            let ordering = if modulus {
                Ordering::ByModulusDesc
            } else {
                Ordering::ByRealDesc
            };
            let k = cfg.eigen_count.min(w.n_rows());
            let s = spectral::eig(&w, &EigOptions::top(k, ordering))?;
            io::write_spectrum(&s, &cfg.output_dir.join("spectrum.csv"))?;
            io::write_eigenvectors(&s, &cfg.output_dir.join("eigenvectors.csv"))?;
            for z in &s.eigenvalues {
                println!("{:.12} {:+.12}i", z.re, z.im);
            }
        }
        Command::Eigenfunctions(common) => {
            let run = runners::run_eigenfunctions(&common.resolve()?)?;
            println!("{} rows, method {:?}", run.summary.retained, run.summary.method);
            for z in &run.spectrum.eigenvalues {
                println!("{:.12} {:+.12}i", z.re, z.im);
            }
        }
        Command::Indicator(common) => {
            let run = runners::run_indicator(&common.resolve()?)?;
            println!("{}", serde_json::to_string_pretty(&run.summary)?);
        }
        Command::Clip(common) => {
            let cfg = common.resolve()?;
            let prep = runners::prepare(&cfg)?;
            let w = runners::operator_matrix(&cfg, &prep)?;
            let (regions, depth) = runners::regions_for(&cfg, &prep)?;
            let clipped = boundary::clip(&w, &regions)?;
            let path = cfg.output_dir.join("W_r.csv");
            io::save_matrix(
                &clipped.matrix,
                &meta_for(&cfg, &prep, clipped.kept.len()),
                &path,
            )?;
            let mut map = String::from("new,old\n");
            for (i, k) in clipped.kept.iter().enumerate() {
                map.push_str(&format!("{i},{k}\n"));
            }
            std::fs::write(cfg.output_dir.join("kept.csv"), map)?;
            println!(
                "kept {} of {} points (clip depth {depth:.3e}) -> {}",
                clipped.kept.len(),
                w.n_rows(),
                path.display()
            );
        }
        Command::Convergence { common, ns, epss } => {
            let cfg = common.resolve()?;
            let eps0 = cfg.bandwidth()?;
            let n0 = cfg.scaled_n();
            let ns = if ns.is_empty() {
                vec![n0 / 4, n0 / 2, n0]
            } else {
                ns
            };
            let epss = if epss.is_empty() { vec![eps0] } else { epss };
            let sweep: Vec<(usize, f64)> = ns
                .iter()
                .flat_map(|&n| epss.iter().map(move |&e| (n, e)))
                .collect();
            if sweep.iter().any(|&(n, _)| n == 0) {
                bail!("empty sample count in sweep");
            }
            for r in runners::run_convergence(&cfg, &sweep)? {
                println!(
                    "n={} eps={} interior {:.4} (target {:.4}, err {:.4}) boundary err {:.4}",
                    r.n, r.eps, r.interior_mean, r.interior_target, r.interior_err, r.boundary_err
                );
            }
        }
        Command::Nullcase(common) => {
            let mut common = common;
            if common.manifold.is_none() && common.config.is_none() {
                common.manifold = Some("gaussian".into());
            }
            let run = runners::run_null_case(&common.resolve()?)?;
            println!("{}", serde_json::to_string_pretty(&run.summary)?);
        }
        Command::SigmaTable {
            d,
            eps,
            points,
            density,
            out,
        } => {
            if points < 2 {
                bail!("need at least two grid points");
            }
            let ratios: Vec<f64> = (0..points)
                .map(|i| 1.25 * i as f64 / (points - 1) as f64)
                .collect();
            let rows = runners::sigma_table(d, eps, &ratios, density)?;
            runners::write_sigma_table(&rows, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("{} rows -> {}", rows.len(), out.display());
        }
    }
    Ok(())
}
