use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use zkss::envelope::generate_rsa_keypair;
use zkss::simulator::{
    load_artifacts, run_game, verify_report, write_artifacts, AdversaryScript, Checklist, DisclosureOrder,
    GameConfig, GameReport, KeyRing,
};
use zkss::KeyPair;

#[derive(Parser)]
#[command(name = "zkss", version, about = "ZK Secret Santa protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one seeded game and write its artifacts.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Deploy without the signature commitment step.
        #[arg(long)]
        no_commit_step: bool,
        #[arg(long, value_name = "SCRIPT")]
        attack: Option<AdversaryScript>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Use plain random field elements instead of RSA keys as randomness.
        #[arg(long)]
        no_envelopes: bool,
        #[arg(long, default_value = "endgame-aware")]
        disclosure_order: DisclosureOrder,
        #[arg(long, default_value_t = zkss::smt::DEFAULT_DEPTH)]
        depth: usize,
    },
    /// Re-check a report against the artifacts next to it.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
    /// Key material.
    Keys {
        #[command(subcommand)]
        command: KeysCommand,
    },
}

#[derive(Subcommand)]
enum KeysCommand {
    /// Derive a participant's signing key and RSA key from a seed.
    Gen {
        #[arg(long)]
        seed: u64,
    },
}

fn print_checks(checks: &Checklist) {
    for (name, value) in checks.lines() {
        let status = match value {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("check {name:<16} {status}");
    }
}

fn print_summary(report: &GameReport) {
    println!("event      {}", report.event_id.to_hex());
    println!("phase      {:?}", report.final_phase);
    if let Some(reason) = &report.stalled {
        println!("stalled    {reason}");
    }
    println!("receipts   {} accepted, reverted {:?}", report.receipts.accepted, report.receipts.reverted);
    if let Some(attack) = &report.attack {
        println!(
            "attack     {} launched={} succeeded={} adversary_slots={} receipts={:?}",
            attack.script, attack.launched, attack.succeeded, attack.adversary_slots, attack.receipts
        );
        if let Some(note) = &attack.note {
            println!("attack     {note}");
        }
    }
    println!("violation  {}", report.protocol_violation);
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    n: usize,
    seed: u64,
    no_commit_step: bool,
    attack: Option<AdversaryScript>,
    out: Option<PathBuf>,
    no_envelopes: bool,
    disclosure_order: DisclosureOrder,
    depth: usize,
) -> Result<bool, String> {
    let mut config = GameConfig::new(n, seed)
        .with_commitment_step(!no_commit_step)
        .with_envelopes(!no_envelopes)
        .with_disclosure_order(disclosure_order);
    config.adversary = attack;
    config.depth = depth;
    let run = run_game(&config).map_err(|e| e.to_string())?;
    let out = out.unwrap_or_else(|| PathBuf::from(format!("zkss-out-{seed}")));
    write_artifacts(&out, &run).map_err(|e| e.to_string())?;

    print_summary(&run.report);
    print_checks(&run.report.checks);
    let t = run.report.timing;
    eprintln!(
        "timing     keygen {:?}, setup {:?}, commit {:?}, determine {:?}, disclose {:?}, total {:?}",
        t.keygen,
        t.setup,
        t.commit,
        t.determine,
        t.disclose,
        t.total()
    );
    println!("artifacts  {}", out.display());
    Ok(run.report.checks.all_pass() && run.report.stalled.is_none())
}

fn verify(report_path: &Path) -> Result<bool, String> {
    let text = std::fs::read_to_string(report_path).map_err(|e| format!("{}: {e}", report_path.display()))?;
    let report = GameReport::from_json(&text).map_err(|e| format!("{}: {e}", report_path.display()))?;
    let dir = report_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let artifacts = load_artifacts(dir).map_err(|e| e.to_string())?;
    let keys = KeyRing::from_truth(&report.ground_truth);
    let checks = verify_report(&report, &artifacts, &keys);
    print_checks(&checks);
    let consistent = checks == report.checks;
    if !consistent {
        println!("recorded checks differ from recomputed checks");
    }
    Ok(consistent && checks.all_pass())
}

fn keys_gen(seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let key = KeyPair::generate(&mut rng);
    let rsa_seed: [u8; 32] = rng.gen();
    let rsa = generate_rsa_keypair(rsa_seed);
    let out = json!({
        "seed": seed,
        "secretKey": format!("0x{}", hex::encode(key.secret_bytes())),
        "address": key.address(),
        "rsaSeed": format!("0x{}", hex::encode(rsa_seed)),
        "rsaPublicKey": rsa.public_key(),
        "randomness": rsa.public_key().anchor(),
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            n,
            seed,
            no_commit_step,
            attack,
            out,
            no_envelopes,
            disclosure_order,
            depth,
        } => simulate(n, seed, no_commit_step, attack, out, no_envelopes, disclosure_order, depth),
        Command::Verify { report } => verify(&report),
        Command::Keys {
            command: KeysCommand::Gen { seed },
        } => {
            keys_gen(seed);
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
