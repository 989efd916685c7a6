use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use motionpilot::crsf::{
    encode_rc_frame, microseconds_to_ticks, ChannelSet, CrsfParser, Packet, CHANNEL_COUNT,
};
use motionpilot::mapping::{
    calibrate_neutral, ControllerState, MappingConfig, MappingPipeline, TiltOffsets,
};
use motionpilot::session::{
    self, AutoPilot, ReplayInput, ServeOptions, Session, SessionConfig, SessionRecord,
};
use motionpilot::ueq;

#[derive(Parser)]
#[command(
    name = "motionpilot",
    version,
    about = "Motion-controller drone pipeline tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the live session service.
    Serve {
        /// Session config (TOML) used for new sessions.
        #[arg(long, env = "MOTIONPILOT_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "MOTIONPILOT_BIND", default_value = "127.0.0.1:7878")]
        bind: String,
        /// Directory of extra course files offered to clients.
        #[arg(long)]
        course_dir: Option<PathBuf>,
        /// Directory where finished session records are written.
        #[arg(long)]
        record_dir: Option<PathBuf>,
    },
    /// Fly a course exercise with the built-in autopilot and save the record.
    Run {
        #[arg(long, env = "MOTIONPILOT_CONFIG")]
        config: Option<PathBuf>,
        /// Exercise to fly; overrides the config.
        #[arg(long)]
        exercise: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a recorded session, check it matches, and print its summary.
    Replay {
        record: PathBuf,
        /// Playback speed relative to real time; 0 runs unpaced.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
    },
    /// CRSF frame tools.
    Crsf {
        #[command(subcommand)]
        command: CrsfCommand,
    },
    /// Controller mapping tools.
    Map {
        #[command(subcommand)]
        command: MapCommand,
    },
    /// UEQ-S questionnaire tools.
    Ueq {
        #[command(subcommand)]
        command: UeqCommand,
    },
}

#[derive(Subcommand)]
enum CrsfCommand {
    /// Decode every frame in a capture file.
    Inspect {
        file: PathBuf,
        /// The file holds hex text instead of raw bytes.
        #[arg(long)]
        hex: bool,
    },
    /// Encode an RC channels frame and print it as hex.
    Gen {
        /// Comma-separated values for channels 1.. (others stay centered).
        #[arg(long, value_delimiter = ',', required = true)]
        channels: Vec<u16>,
        /// Values are microseconds rather than ticks.
        #[arg(long)]
        us: bool,
        /// Also write the raw frame to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MapCommand {
    /// Map a CSV of controller samples to channels.
    Simulate {
        /// Columns: timestamp_ms,trigger,tilt_pitch,tilt_roll,thumbstick_x,arm_button
        #[arg(long)]
        input: PathBuf,
        /// Mapping config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the first N samples as the neutral pose.
        #[arg(long)]
        calibrate: Option<usize>,
    },
}

#[derive(Subcommand)]
enum UeqCommand {
    /// Score responses from a `participant,i1..i8` CSV.
    Score {
        csv: PathBuf,
        /// Answers are on the raw 1..7 scale.
        #[arg(long)]
        recode: bool,
        /// Also print per-item scores.
        #[arg(long)]
        items: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve {
            config,
            bind,
            course_dir,
            record_dir,
        } => serve(config, &bind, course_dir, record_dir),
        Command::Run {
            config,
            exercise,
            out,
        } => fly(config, exercise, out),
        Command::Replay { record, speed } => replay(&record, speed),
        Command::Crsf { command } => match command {
            CrsfCommand::Inspect { file, hex } => crsf_inspect(&file, hex),
            CrsfCommand::Gen { channels, us, out } => crsf_gen(&channels, us, out),
        },
        Command::Map { command } => match command {
            MapCommand::Simulate {
                input,
                config,
                calibrate,
            } => map_simulate(&input, config, calibrate),
        },
        Command::Ueq { command } => match command {
            UeqCommand::Score { csv, recode, items } => ueq_score(&csv, recode, items),
        },
    }
}

fn load_config(path: Option<PathBuf>) -> Result<SessionConfig> {
    match path {
        Some(p) => SessionConfig::load(&p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SessionConfig::default()),
    }
}

fn serve(
    config: Option<PathBuf>,
    bind: &str,
    course_dir: Option<PathBuf>,
    record_dir: Option<PathBuf>,
) -> Result<()> {
    let base_config = load_config(config)?;
    if let Some(dir) = &record_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        session::serve(
            listener,
            ServeOptions {
                base_config,
                course_dir,
                record_dir,
            },
        )
        .await?;
        Ok(())
    })
}

fn fly(config: Option<PathBuf>, exercise: Option<String>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if exercise.is_some() {
        cfg.course.exercise = exercise;
    }
    let name = cfg
        .course
        .exercise
        .clone()
        .context("no exercise given (use --exercise or course.exercise)")?;
    let course = cfg.course.load()?;
    let mut pilot = AutoPilot::new(&cfg, &course, course.exercise(&name)?)?;
    let record = session::run_session(cfg, &mut pilot, &mut ())?;
    if let Some(path) = out {
        record
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", record.summary());
    Ok(())
}

fn replay(path: &Path, speed: f64) -> Result<()> {
    if !(speed >= 0.0 && speed.is_finite()) {
        bail!("--speed must be a non-negative number");
    }
    let record =
        SessionRecord::load(path).with_context(|| format!("reading {}", path.display()))?;
    let mut session = Session::with_course(
        record.header.config.clone(),
        record.header.course.clone(),
        record.header.started_at_unix_ms,
    )?;
    let mut source = ReplayInput::new(&record);
    let pace = (speed > 0.0)
        .then(|| Duration::from_secs_f64(session.sample_period_ms() as f64 / 1000.0 / speed));
    while session.run_period(&mut source, &mut ()).is_none() {
        if let Some(period) = pace {
            std::thread::sleep(period);
        }
    }
    let again = session.into_record();
    if let Some(t) = record.first_divergence(&again) {
        bail!("replay diverged from the record at t = {t} ms");
    }
    println!("{}", record.summary());
    Ok(())
}

fn crsf_inspect(path: &Path, hex_text: bool) -> Result<()> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let bytes = if hex_text {
        let text: String = String::from_utf8(raw)?.split_whitespace().collect();
        hex::decode(text).context("invalid hex")?
    } else {
        raw
    };
    let mut parser = CrsfParser::new();
    let mut out = std::io::stdout().lock();
    for (i, frame) in parser.feed(&bytes).into_iter().enumerate() {
        match frame.decode() {
            Ok(Packet::RcChannels(set)) => {
                let values: Vec<String> = set.values().iter().map(u16::to_string).collect();
                writeln!(out, "{i:>4} rc_channels {}", values.join(","))?;
            }
            Ok(Packet::LinkStatistics(s)) => writeln!(
                out,
                "{i:>4} link_statistics rssi={}dBm lq={}% snr={}dB rate={}Hz",
                s.uplink_rssi_dbm, s.link_quality, s.uplink_snr_db, s.active_packet_rate_hz
            )?,
            Err(e) => writeln!(
                out,
                "{i:>4} undecodable type 0x{:02x}: {e}",
                frame.frame_type
            )?,
        }
    }
    let s = parser.stats();
    writeln!(
        out,
        "frames={} crc_errors={} resyncs={} skipped_unknown={} trailing_bytes={}",
        s.frames,
        s.crc_error_count,
        s.resyncs,
        s.skipped_unknown,
        parser.pending()
    )?;
    Ok(())
}

fn crsf_gen(values: &[u16], us: bool, out: Option<PathBuf>) -> Result<()> {
    if values.len() > CHANNEL_COUNT {
        bail!("at most {CHANNEL_COUNT} channel values");
    }
    let mut set = ChannelSet::centered();
    for (i, &v) in values.iter().enumerate() {
        let ticks = if us { microseconds_to_ticks(v)? } else { v };
        set.set(i, ticks)?;
    }
    let frame = encode_rc_frame(&set);
    if let Some(path) = out {
        std::fs::write(&path, frame).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", hex::encode(frame));
    Ok(())
}

fn read_controller_csv(path: &Path) -> Result<Vec<ControllerState>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ControllerCsvRow>().enumerate() {
        let row = row.with_context(|| format!("row {}", i + 1))?;
        out.push(ControllerState {
            trigger: row.trigger,
            tilt_pitch: row.tilt_pitch,
            tilt_roll: row.tilt_roll,
            thumbstick_x: row.thumbstick_x,
            arm_button: row.arm_button != 0,
            timestamp_ms: row.timestamp_ms,
        });
    }
    Ok(out)
}

#[derive(serde::Deserialize)]
struct ControllerCsvRow {
    timestamp_ms: u64,
    trigger: f64,
    tilt_pitch: f64,
    tilt_roll: f64,
    thumbstick_x: f64,
    arm_button: u8,
}

fn map_simulate(input: &Path, config: Option<PathBuf>, calibrate: Option<usize>) -> Result<()> {
    let cfg = match config {
        Some(p) => {
            let text =
                std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            MappingConfig::from_toml_str(&text)?
        }
        None => MappingConfig::default(),
    };
    let samples = read_controller_csv(input)?;
    let offsets = match calibrate {
        Some(n) => calibrate_neutral(
            samples
                .get(..n)
                .context("not enough samples to calibrate")?,
        )?,
        None => TiltOffsets::default(),
    };
    let mut pipeline = MappingPipeline::new(cfg, offsets);
    let mut out = std::io::stdout().lock();
    let header: Vec<String> = (1..=CHANNEL_COUNT).map(|i| format!("ch{i}")).collect();
    writeln!(out, "timestamp_ms,arm,{}", header.join(","))?;
    for s in &samples {
        let set = pipeline.update(s, true);
        let values: Vec<String> = set.values().iter().map(u16::to_string).collect();
        let arm = serde_json::to_value(pipeline.arming().mode)?;
        writeln!(
            out,
            "{},{},{}",
            s.timestamp_ms,
            arm.as_str().unwrap_or_default(),
            values.join(",")
        )?;
    }
    Ok(())
}

fn ueq_score(path: &Path, recode: bool, items: bool) -> Result<()> {
    let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let responses = ueq::read_csv(file, recode)?;
    let scales = ueq::score(&responses)?;
    print!("{}", ueq::render_table(&scales));
    if items {
        for (i, s) in ueq::item_scores(&responses)?.iter().enumerate() {
            println!("item {}  {s}", i + 1);
        }
    }
    Ok(())
}
