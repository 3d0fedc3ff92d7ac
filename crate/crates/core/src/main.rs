use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use fragscan::config::{PipelineConfig, CONFIG_ENV};
use fragscan::io::{self, SectionAssignment};
use fragscan::kernels::{render_table, run_selftest};
use fragscan::pipeline::{analyze_sections, image_statistics, postprocess, ReferenceData};
use fragscan::raster::{extract_tile, plan_tiles, rescale_bilinear, stitch, TileLayout};
use fragscan::segeval::{confusion, metrics};
use fragscan::synth::{generate_synthetic_scene, RandomSceneParams, SyntheticSceneSpec};
use fragscan::{measure, plot, Fragment};

#[derive(Parser, Debug)]
#[command(name = "fragscan", version, about = "Rock fragment segmentation post-processing and size statistics")]
struct Cli {
    /// Key-value config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Per-key config overrides; each takes precedence over the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    cm_per_pixel: Option<String>,
    #[arg(long, global = true)]
    window: Option<String>,
    #[arg(long, global = true)]
    stride: Option<String>,
    #[arg(long, global = true)]
    se_half: Option<String>,
    #[arg(long, global = true)]
    max_radius: Option<String>,
    #[arg(long, global = true)]
    step_connectivity: Option<String>,
    #[arg(long, global = true)]
    seed_connectivity: Option<String>,
    #[arg(long, global = true)]
    min_diameter_px: Option<String>,
    #[arg(long, global = true)]
    count_bin_cm: Option<String>,
    #[arg(long, global = true)]
    volume_bin_cm: Option<String>,
    #[arg(long, global = true)]
    fine_cm: Option<String>,
    #[arg(long, global = true)]
    coarse_cm: Option<String>,
    #[arg(long, global = true)]
    section_map: Option<String>,
    #[arg(long, global = true)]
    include_border_fragments: Option<String>,
    #[arg(long, global = true)]
    carafe_sigma: Option<String>,
    #[arg(long, global = true)]
    carafe_k_up: Option<String>,
    #[arg(long, global = true)]
    carafe_k_encoder: Option<String>,
    #[arg(long, global = true)]
    carafe_c_m: Option<String>,
    #[arg(long, global = true)]
    carafe_normalizer: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all: [(&'static str, &Option<String>); 19] = [
            ("cm_per_pixel", &self.cm_per_pixel),
            ("window", &self.window),
            ("stride", &self.stride),
            ("se_half", &self.se_half),
            ("max_radius", &self.max_radius),
            ("step_connectivity", &self.step_connectivity),
            ("seed_connectivity", &self.seed_connectivity),
            ("min_diameter_px", &self.min_diameter_px),
            ("count_bin_cm", &self.count_bin_cm),
            ("volume_bin_cm", &self.volume_bin_cm),
            ("fine_cm", &self.fine_cm),
            ("coarse_cm", &self.coarse_cm),
            ("section_map", &self.section_map),
            ("include_border_fragments", &self.include_border_fragments),
            ("carafe_sigma", &self.carafe_sigma),
            ("carafe_k_up", &self.carafe_k_up),
            ("carafe_k_encoder", &self.carafe_k_encoder),
            ("carafe_c_m", &self.carafe_c_m),
            ("carafe_normalizer", &self.carafe_normalizer),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TileKind {
    Gray,
    Mask,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut an image into reflect-padded sliding-window tiles.
    Tile {
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = TileKind::Gray)]
        kind: TileKind,
        /// Bilinear rescale before tiling, e.g. 4096x3072 (gray images only).
        #[arg(long)]
        rescale: Option<String>,
    },
    /// Reassemble tile masks into one class mask.
    Stitch {
        tiles: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Turn class masks into instance maps and fragment tables.
    Postprocess {
        #[arg(required = true)]
        masks: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Measure every instance of an instance map.
    Measure {
        instances: PathBuf,
        #[arg(long)]
        image_id: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Per-image size distributions and characteristic diameters.
    Psd {
        #[arg(required = true)]
        fragments: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Section statistics and segregation fits.
    Sections {
        fragments: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Use tabulated section means instead of fragment tables; with no
        /// value the bundled table is used.
        #[arg(long, num_args = 0..=1, default_missing_value = "bundled")]
        reference: Option<String>,
    },
    /// Compare a predicted class mask against ground truth.
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the operator implementations with their reference loops.
    KernelsSelftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic body/boundary mask with known fragments.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// JSON scene description; overrides the random options.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1024)]
        width: usize,
        #[arg(long, default_value_t = 1024)]
        height: usize,
        #[arg(long, default_value_t = 30)]
        count: usize,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<fragscan::Error> for Failure {
    fn from(e: fragscan::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let usage = |e: fragscan::Error| Failure::Usage(e.to_string());
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p).map_err(usage)?,
        None => PipelineConfig::default(),
    };
    for (k, v) in cli.overrides.pairs() {
        cfg.set(k, v).map_err(usage)?;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || Failure::Usage(format!("expected WIDTHxHEIGHT, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

fn tile_name(origin: (usize, usize)) -> String {
    format!("tile_{}_{}.png", origin.0, origin.1)
}

fn cmd_tile(cfg: &PipelineConfig, input: &Path, out_dir: &Path, kind: TileKind, rescale: Option<&str>) -> CliResult {
    let target = rescale.map(parse_size).transpose()?;
    if kind == TileKind::Mask && target.is_some() {
        return Err(Failure::Usage("class masks cannot be rescaled".into()));
    }
    ensure_dir(out_dir)?;
    let layout = match kind {
        TileKind::Gray => {
            let mut img = io::read_gray(input)?;
            if let Some((w, h)) = target {
                img = rescale_bilinear(&img, w, h)?;
            }
            let layout = plan_tiles(img.width(), img.height(), cfg.window, cfg.stride)?;
            layout.tile_origins.par_iter().try_for_each(|&o| -> fragscan::Result<()> {
                io::write_gray(&extract_tile(&img, o, cfg.window)?, &out_dir.join(tile_name(o)))
            })?;
            layout
        }
        TileKind::Mask => {
            let mask = io::read_class_mask(input)?;
            let layout = plan_tiles(mask.width(), mask.height(), cfg.window, cfg.stride)?;
            layout.tile_origins.par_iter().try_for_each(|&o| -> fragscan::Result<()> {
                io::write_class_mask(&extract_tile(&mask, o, cfg.window)?, &out_dir.join(tile_name(o)))
            })?;
            layout
        }
    };
    io::write_json(&layout, &out_dir.join("layout.json"))?;
    println!("{} tiles ({}x{}) written to {}", layout.len(), layout.tiles_x, layout.tiles_y, out_dir.display());
    Ok(())
}

fn cmd_stitch(tiles: &Path, layout: Option<&Path>, output: &Path) -> CliResult {
    let layout_path = layout.map(Path::to_path_buf).unwrap_or_else(|| tiles.join("layout.json"));
    let layout: TileLayout = io::read_json(&layout_path)?;
    for &o in &layout.tile_origins {
        if !tiles.join(tile_name(o)).is_file() {
            return Err(fragscan::Error::MissingTile(o.0, o.1).into());
        }
    }
    let masks = layout
        .tile_origins
        .par_iter()
        .map(|&o| io::read_class_mask(&tiles.join(tile_name(o))).map(|m| (o, m)))
        .collect::<fragscan::Result<Vec<_>>>()?;
    let mask = stitch(&masks, &layout, layout.image_size)?;
    io::write_class_mask(&mask, output)?;
    println!("stitched {} tiles into {}x{}", masks.len(), mask.width(), mask.height());
    Ok(())
}

fn cmd_postprocess(cfg: &PipelineConfig, masks: &[PathBuf], out_dir: &Path) -> CliResult {
    ensure_dir(out_dir)?;
    let counts = masks
        .par_iter()
        .map(|path| -> fragscan::Result<(String, usize)> {
            let id = stem(path);
            let mask = io::read_class_mask(path)?;
            let out = postprocess(&mask, cfg)?;
            io::write_instance_map(&out.instances, &out_dir.join(format!("{id}_instances.png")))?;
            io::write_fragments_csv(&id, &out.fragments, &out_dir.join(format!("{id}_fragments.csv")))?;
            Ok((id, out.fragments.len()))
        })
        .collect::<fragscan::Result<Vec<_>>>()?;
    for (id, n) in counts {
        println!("{id}: {n} fragments");
    }
    Ok(())
}

fn cmd_measure(cfg: &PipelineConfig, instances: &Path, image_id: Option<&str>, output: Option<&Path>) -> CliResult {
    let map = io::read_instance_map(instances)?;
    let fragments = measure(&map, &cfg.calibration()?);
    let id = image_id.map(str::to_string).unwrap_or_else(|| stem(instances));
    match output {
        Some(p) => io::write_fragments_csv(&id, &fragments, p)?,
        None => print!("{}", io::fragments_to_csv(&id, &fragments)?),
    }
    Ok(())
}

fn read_fragment_tables(paths: &[PathBuf]) -> CliResult<BTreeMap<String, Vec<Fragment>>> {
    let mut images: BTreeMap<String, Vec<Fragment>> = BTreeMap::new();
    for p in paths {
        let rows = io::read_fragments_csv(p)?;
        if rows.is_empty() {
            // header-only table: an image with no fragments
            images.entry(stem(p).trim_end_matches("_fragments").to_string()).or_default();
        }
        for (id, f) in rows {
            images.entry(id).or_default().push(f);
        }
    }
    Ok(images)
}

fn cmd_psd(cfg: &PipelineConfig, tables: &[PathBuf], out_dir: &Path) -> CliResult {
    let images = read_fragment_tables(tables)?;
    ensure_dir(out_dir)?;
    let images: Vec<_> = images.into_iter().collect();
    let lines = images
        .par_iter()
        .map(|(id, frags)| -> fragscan::Result<String> {
            let frags: Vec<Fragment> = frags
                .iter()
                .filter(|f| cfg.include_border_fragments || !f.touches_border)
                .cloned()
                .collect();
            let st = image_statistics(id, &frags, cfg)?;
            io::write_json(&st, &out_dir.join(format!("{id}_psd.json")))?;
            for (dist, tag) in [(&st.count_distribution, "count"), (&st.volume_distribution, "volume")] {
                let svg = plot::distribution_svg(dist, &format!("{id} ({tag})"));
                let path = out_dir.join(format!("{id}_{tag}.svg"));
                fs::write(&path, svg).map_err(|source| fragscan::Error::Io { path, source })?;
            }
            let c = st.characteristic;
            Ok(format!(
                "{id}: n={} d10={} d50={} d90={} <{}cm={} >{}cm={}",
                frags.len(),
                io::fmt_sig(c.d10),
                io::fmt_sig(c.d50),
                io::fmt_sig(c.d90),
                cfg.fine_cm,
                io::fmt_sig(st.count_summary.share_below),
                cfg.coarse_cm,
                io::fmt_sig(st.count_summary.share_above),
            ))
        })
        .collect::<fragscan::Result<Vec<_>>>()?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn print_fits(seg: &fragscan::SegregationReport) {
    for (name, fit) in ["d10", "d50", "d90"].iter().zip(seg.fits.iter()) {
        println!(
            "{name}/{name}': slope {} intercept {}",
            io::fmt_sig(fit.slope),
            io::fmt_sig(fit.intercept)
        );
    }
}

fn cmd_sections(cfg: &PipelineConfig, tables: &[PathBuf], out_dir: &Path, reference: Option<&str>) -> CliResult {
    if let Some(r) = reference {
        let data = if r == "bundled" {
            ReferenceData::bundled()
        } else {
            io::read_json(Path::new(r))?
        };
        let seg = data.segregation()?;
        ensure_dir(out_dir)?;
        io::write_json(&seg, &out_dir.join("segregation.json"))?;
        write_text(&out_dir.join("segregation.svg"), &plot::segregation_svg(&seg))?;
        print_fits(&seg);
        return Ok(());
    }
    if tables.is_empty() {
        return Err(Failure::Usage("sections needs fragment tables or --reference".into()));
    }
    let map_path = cfg
        .section_map
        .as_ref()
        .ok_or_else(|| Failure::Usage("sections needs --section-map".into()))?;
    let section_map: Vec<SectionAssignment> = io::read_section_map(map_path)?;
    let images = read_fragment_tables(tables)?;
    let analysis = analyze_sections(&images, &section_map, cfg)?;
    ensure_dir(out_dir)?;
    io::write_json(&analysis.sections, &out_dir.join("sections.json"))?;
    io::write_json(&analysis.segregation, &out_dir.join("segregation.json"))?;
    io::write_json(&analysis.images, &out_dir.join("images.json"))?;
    write_text(&out_dir.join("sections.svg"), &plot::sections_svg(&analysis.sections))?;
    write_text(&out_dir.join("segregation.svg"), &plot::segregation_svg(&analysis.segregation))?;
    write_text(
        &out_dir.join("overall_volume.svg"),
        &plot::distribution_svg(&analysis.overall_distribution, "all sections (volume)"),
    )?;
    for st in &analysis.images {
        write_text(
            &out_dir.join(format!("{}_volume.svg", st.image_id)),
            &plot::distribution_svg(&st.volume_distribution, &format!("{} (volume)", st.image_id)),
        )?;
    }
    for s in &analysis.sections {
        println!(
            "{} [{}-{}]: d10={} d50={} d90={}",
            s.section_id,
            s.depth_range.0,
            s.depth_range.1,
            io::fmt_sig(s.mean.d10),
            io::fmt_sig(s.mean.d50),
            io::fmt_sig(s.mean.d90)
        );
    }
    print_fits(&analysis.segregation);
    Ok(())
}

fn cmd_eval(pred: &Path, truth: &Path, output: Option<&Path>) -> CliResult {
    let p = io::read_class_mask(pred)?;
    let t = io::read_class_mask(truth)?;
    let report = metrics(&confusion(&p, &t)?);
    if let Some(path) = output {
        io::write_json(&report, path)?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_selftest(seed: u64, cases: usize, json: Option<&Path>) -> CliResult {
    if cases == 0 {
        return Err(Failure::Usage("--cases must be positive".into()));
    }
    let rows = run_selftest(seed, cases);
    print!("{}", render_table(&rows));
    if let Some(p) = json {
        io::write_json(&rows, p)?;
    }
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Data("kernel self-test failed".into()))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    cfg: &PipelineConfig,
    output: &Path,
    truth: Option<&Path>,
    spec: Option<&Path>,
    seed: u64,
    width: usize,
    height: usize,
    count: usize,
) -> CliResult {
    let spec = match spec {
        Some(p) => io::read_json::<SyntheticSceneSpec>(p)?,
        None => {
            let params = RandomSceneParams {
                width,
                height,
                count,
                cm_per_pixel: cfg.cm_per_pixel,
                ..Default::default()
            };
            SyntheticSceneSpec::random(&params, seed)?
        }
    };
    let (mask, frags) = generate_synthetic_scene(&spec)?;
    io::write_class_mask(&mask, output)?;
    if let Some(t) = truth {
        io::write_fragments_csv(&stem(output), &frags, t)?;
    }
    println!("{} ellipses on {}x{}", frags.len(), spec.width, spec.height);
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Tile { input, out_dir, kind, rescale } => cmd_tile(&cfg, input, out_dir, *kind, rescale.as_deref()),
        Command::Stitch { tiles, layout, output } => cmd_stitch(tiles, layout.as_deref(), output),
        Command::Postprocess { masks, out_dir } => cmd_postprocess(&cfg, masks, out_dir),
        Command::Measure { instances, image_id, output } => {
            cmd_measure(&cfg, instances, image_id.as_deref(), output.as_deref())
        }
        Command::Psd { fragments, out_dir } => cmd_psd(&cfg, fragments, out_dir),
        Command::Sections { fragments, out_dir, reference } => {
            cmd_sections(&cfg, fragments, out_dir, reference.as_deref())
        }
        Command::Eval { pred, truth, output } => cmd_eval(pred, truth, output.as_deref()),
        Command::KernelsSelftest { seed, cases, json } => cmd_selftest(*seed, *cases, json.as_deref()),
        Command::Synth { output, truth, spec, seed, width, height, count } => cmd_synth(
            &cfg,
            output,
            truth.as_deref(),
            spec.as_deref(),
            *seed,
            *width,
            *height,
            *count,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
