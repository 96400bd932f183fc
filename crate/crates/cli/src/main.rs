use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clothground::kv::KeyValues;
use clothground::synth::{self, SceneSpec, SceneTruth};
use clothground::terrain::{self, DtmParams};
use clothground::{Label, LabelMask};
use clothground_cli::config::ConfigError;
use clothground_cli::stages;
use clothground_cli::{run_pipeline, CliError, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "clothground",
    version,
    about = "Ground extraction from LiDAR point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge scans listed in a pose file into one cloud.
    Merge {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Flag statistical outliers.
    Denoise {
        #[command(flatten)]
        io: InOut,
        #[command(flatten)]
        sor: SorArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Separate ground from non-ground with the cloth simulation filter.
    Filter {
        #[command(flatten)]
        io: InOut,
        #[command(flatten)]
        csf: CsfArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the settled cloth particles to this file.
        #[arg(long, value_name = "FILE")]
        debug_cloth: Option<PathBuf>,
    },
    /// Interpolate a DTM grid (ESRI ASCII) from ground points.
    Dtm {
        #[command(flatten)]
        io: InOut,
        #[command(flatten)]
        dtm: DtmArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write a triangle mesh of the grid.
        #[arg(long, value_name = "FILE")]
        mesh: Option<PathBuf>,
    },
    /// Lowest ground elevation along a cut line.
    Profile {
        #[command(flatten)]
        io: InOut,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Class counts and percentages of a labelled cloud.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Write the table here as well as to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic forest scene with true labels.
    Synth {
        /// Scene description as key = value text.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare predicted labels with true labels.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
    },
    /// Run every stage and write all artifacts to the output directory.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct InOut {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Default)]
struct SorArgs {
    #[arg(long)]
    sor_k: Option<usize>,
    #[arg(long)]
    sor_sigma: Option<f64>,
}

#[derive(Args, Default)]
struct CsfArgs {
    #[arg(long)]
    csf_gr: Option<f64>,
    #[arg(long)]
    csf_dt: Option<f64>,
    #[arg(long)]
    csf_rigidness: Option<u8>,
    #[arg(long, value_name = "BOOL")]
    csf_steep_slope: Option<bool>,
    #[arg(long)]
    csf_threshold: Option<f64>,
    #[arg(long)]
    csf_max_iter: Option<usize>,
    /// Permit a grid resolution finer than 0.1 m.
    #[arg(long)]
    csf_allow_fine_grid: bool,
}

#[derive(Args, Default)]
struct DtmArgs {
    #[arg(long)]
    dtm_cell: Option<f64>,
}

#[derive(Args, Default)]
struct ProfileArgs {
    /// Cut line as "x1,y1,x2,y2".
    #[arg(long, value_name = "X1,Y1,X2,Y2")]
    profile_cut: Option<String>,
    #[arg(long)]
    profile_halfwidth: Option<f64>,
    #[arg(long)]
    profile_bin: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Pose list (`path tx ty tz qw qx qy qz` per line) to merge instead of --input.
    #[arg(long)]
    poses: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    sor: SorArgs,
    #[command(flatten)]
    csf: CsfArgs,
    #[command(flatten)]
    dtm: DtmArgs,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    skip_denoise: bool,
    #[arg(long)]
    skip_normals: bool,
    #[arg(long)]
    skip_dtm: bool,
    #[arg(long)]
    skip_mesh: bool,
    #[arg(long)]
    skip_profile: bool,
    #[arg(long)]
    skip_report: bool,
    /// Write the settled cloth as cloth.ply.
    #[arg(long)]
    debug_cloth: bool,
}

fn put<T: std::fmt::Display>(kv: &mut KeyValues, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.insert(key, v);
    }
}

fn flag(kv: &mut KeyValues, key: &str, on: bool) {
    if on {
        kv.insert(key, true);
    }
}

impl SorArgs {
    fn overrides(&self, kv: &mut KeyValues) {
        put(kv, "sor_k", &self.sor_k);
        put(kv, "sor_sigma", &self.sor_sigma);
    }
}

impl CsfArgs {
    fn overrides(&self, kv: &mut KeyValues) {
        put(kv, "csf_gr", &self.csf_gr);
        put(kv, "csf_dt", &self.csf_dt);
        put(kv, "csf_rigidness", &self.csf_rigidness);
        put(kv, "csf_steep_slope", &self.csf_steep_slope);
        put(kv, "csf_threshold", &self.csf_threshold);
        put(kv, "csf_max_iter", &self.csf_max_iter);
        flag(kv, "csf_allow_fine_grid", self.csf_allow_fine_grid);
    }
}

impl DtmArgs {
    fn overrides(&self, kv: &mut KeyValues) {
        put(kv, "dtm_cell", &self.dtm_cell);
    }
}

impl ProfileArgs {
    fn overrides(&self, kv: &mut KeyValues) {
        put(kv, "profile_cut", &self.profile_cut);
        put(kv, "profile_halfwidth", &self.profile_halfwidth);
        put(kv, "profile_bin", &self.profile_bin);
    }
}

impl PipelineArgs {
    fn overrides(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put(&mut kv, "input", &path(&self.input));
        put(&mut kv, "poses", &path(&self.poses));
        put(&mut kv, "output_dir", &path(&self.output_dir));
        self.sor.overrides(&mut kv);
        self.csf.overrides(&mut kv);
        self.dtm.overrides(&mut kv);
        self.profile.overrides(&mut kv);
        put(&mut kv, "seed", &self.seed);
        flag(&mut kv, "skip_denoise", self.skip_denoise);
        flag(&mut kv, "skip_normals", self.skip_normals);
        flag(&mut kv, "skip_dtm", self.skip_dtm);
        flag(&mut kv, "skip_mesh", self.skip_mesh);
        flag(&mut kv, "skip_profile", self.skip_profile);
        flag(&mut kv, "skip_report", self.skip_report);
        flag(&mut kv, "debug_cloth", self.debug_cloth);
        kv
    }
}

fn read_kv(path: &Path) -> Result<KeyValues, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::Unreadable(format!("{}: {e}", path.display())))?;
    KeyValues::parse(&text)
        .map_err(|e| ConfigError::Unreadable(format!("{}: {e}", path.display())).into())
}

/// Config file (if any) overridden by flags.
fn resolve(config: &Option<PathBuf>, flags: KeyValues) -> Result<PipelineConfig, CliError> {
    let file = match config {
        Some(p) => read_kv(p)?,
        None => KeyValues::default(),
    };
    let cfg = PipelineConfig::resolve(&[&file, &flags])?;
    Ok(cfg)
}

fn labelled(path: &Path) -> Result<(clothground::PointCloud, LabelMask), CliError> {
    let loaded = stages::load(path)?;
    let labels = loaded.labels.ok_or_else(|| {
        CliError::stage("load")(clothground::Error::MalformedHeader(format!(
            "{} has no classification field",
            path.display()
        )))
    })?;
    Ok((loaded.cloud, labels))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Merge { poses, output } => {
            let merged = stages::merge(&poses)?;
            stages::save("merge", &merged, None, &output)
        }
        Command::Denoise { io, sor, config } => {
            let mut kv = KeyValues::default();
            sor.overrides(&mut kv);
            let cfg = resolve(&config, kv)?;
            let cloud = stages::load(&io.input)?.cloud;
            let mask = stages::denoise(&cloud, &cfg.sor)?;
            stages::save("denoise", &cloud, Some(&mask), &io.output)
        }
        Command::Filter {
            io,
            csf,
            config,
            debug_cloth,
        } => {
            let mut kv = KeyValues::default();
            csf.overrides(&mut kv);
            let cfg = resolve(&config, kv)?;
            let loaded = stages::load(&io.input)?;
            let prior = loaded
                .labels
                .unwrap_or_else(|| LabelMask::filled(loaded.cloud.len(), Label::Unlabeled));
            let (labels, result) = stages::filter(&loaded.cloud, &prior, &cfg.csf)?;
            stages::save("filter", &loaded.cloud, Some(&labels), &io.output)?;
            if let Some(path) = debug_cloth {
                stages::save("filter", &result.cloth.particles_cloud(), None, &path)?;
            }
            Ok(())
        }
        Command::Dtm {
            io,
            dtm,
            config,
            mesh,
        } => {
            let mut kv = KeyValues::default();
            dtm.overrides(&mut kv);
            let cfg = resolve(&config, kv)?;
            let ground = stages::ground_of(&stages::load(&io.input)?);
            let params = DtmParams {
                idw_power: cfg.dtm_power,
                ..DtmParams::with_cell_size(cfg.dtm_cell)
            };
            let raster = terrain::build_dtm(&ground, &params).map_err(CliError::stage("dtm"))?;
            stages::write_text("dtm", &io.output, &raster.to_esri_ascii())?;
            if let Some(path) = mesh {
                let m = terrain::dtm_to_mesh(&raster).map_err(CliError::stage("mesh"))?;
                stages::write_text("mesh", &path, &m.to_ply())?;
            }
            Ok(())
        }
        Command::Profile {
            io,
            profile,
            config,
        } => {
            let mut kv = KeyValues::default();
            profile.overrides(&mut kv);
            let cfg = resolve(&config, kv)?;
            let cut = cfg.profile_cut.ok_or_else(|| ConfigError::OutOfRange {
                key: "profile_cut".into(),
                reason: "a cut line is required".into(),
            })?;
            let ground = stages::ground_of(&stages::load(&io.input)?);
            let p = terrain::extract_profile(&ground, cut, cfg.profile_halfwidth, cfg.profile_bin)
                .map_err(CliError::stage("profile"))?;
            stages::write_text("profile", &io.output, &p.to_text())
        }
        Command::Report { input, output } => {
            let (cloud, labels) = labelled(&input)?;
            let r = terrain::report(cloud.len(), &labels).map_err(CliError::stage("report"))?;
            print!("{}", r.to_table());
            match output {
                Some(path) => stages::write_text("report", &path, &r.to_table()),
                None => Ok(()),
            }
        }
        Command::Synth {
            config,
            seed,
            output,
        } => {
            let kv = match &config {
                Some(p) => read_kv(p)?,
                None => KeyValues::default(),
            };
            let mut spec = SceneSpec::from_key_values(&kv).map_err(CliError::stage("synth"))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let scene = synth::generate_scene(&spec).map_err(CliError::stage("synth"))?;
            log::info!("synth: points={} seed={}", scene.cloud.len(), spec.seed);
            stages::save("synth", &scene.cloud, Some(&scene.truth), &output)
        }
        Command::Eval { truth, predicted } => {
            let (cloud, truth) = labelled(&truth)?;
            let (_, predicted) = labelled(&predicted)?;
            let m = synth::evaluate(&SceneTruth { cloud, truth }, &predicted)
                .map_err(CliError::stage("eval"))?;
            println!("type1={}", m.type1);
            println!("type2={}", m.type2);
            println!("total={}", m.total);
            println!("ground_total={}", m.ground_total);
            println!("non_ground_total={}", m.non_ground_total);
            Ok(())
        }
        Command::Pipeline(args) => {
            let cfg = resolve(&args.config, args.overrides())?;
            let outcome = run_pipeline(&cfg)?;
            if let Some(r) = outcome.report {
                print!("{}", r.to_table());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
