use std::fs;
use std::process::Command;

use shadowbench::agents::{AgentConfig, AgentKind};
use shadowbench::cli::config::{load_config, parse_config, ExperimentConfig, Overrides};
use shadowbench::cli::run::{cmd_run, Manifest};
use shadowbench::engine::GameId;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowbench"))
}

#[test]
fn four_agents_give_sixteen_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        games: vec![GameId::Zenpuzzle],
        levels: Default::default(),
        roster: vec![
            AgentConfig::simple("r", AgentKind::Random),
            AgentConfig::simple("o", AgentKind::Osla),
            AgentConfig::simple("m", AgentKind::Mcs),
            AgentConfig::mcts("t", "MIN_D_MOV"),
        ],
        budget_cap: 40,
        playthroughs: 5,
        base_seed: 3,
        output_dir: dir.path().to_path_buf(),
    };
    let m = cmd_run(&cfg, 0).unwrap();
    assert_eq!(m.games.len(), 1);
    assert_eq!(m.games[0].logs.len(), 16 * 5);
    let on_disk = fs::read_dir(dir.path().join("zenpuzzle")).unwrap().count();
    assert_eq!(on_disk, 80);
    assert_eq!(Manifest::read(dir.path()).unwrap(), Some(m));
}

#[test]
fn config_file_overrides_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        r#"
profile = "desk"
games = ["zenpuzzle"]
playthroughs = 2
budget_cap = 50

[[roster]]
label = "r"
kind = "random"

[[roster]]
label = "h"
kind = "mcts"
policy = "MIN_D_NPC"
"#,
    )
    .unwrap();
    let cfg = load_config(Some(&path), &Overrides { seed: Some(9), ..Overrides::default() }).unwrap();
    assert_eq!(cfg.games, vec![GameId::Zenpuzzle]);
    assert_eq!((cfg.playthroughs, cfg.budget_cap, cfg.base_seed), (2, 50, 9));
    assert_eq!(cfg.roster[1].rollout_depth, 10);
    assert!(parse_config("games = [\"pacman\"]", &Overrides::default()).is_err());
    assert!(parse_config("colour = 1", &Overrides::default()).is_err());
}

#[test]
fn binary_lists_policies() {
    let out = bin().arg("policies").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 15);
    assert_eq!(text.lines().nth(12), Some("12\t((MIN_D_MOV * MIN_D_NPC) + (1 / SUM_D_NPC))"));
}

#[test]
fn binary_rejects_unknown_game() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "games = [\"pacman\"]\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pacman"));
}

#[test]
fn binary_rejects_missing_log_dir() {
    let out = bin().args(["report", "/nonexistent/logs"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_report_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        format!(
            "games = [\"zenpuzzle\"]\nplaythroughs = 2\nbudget_cap = 30\noutput_dir = {:?}\n\n\
             [[roster]]\nlabel = \"r\"\nkind = \"random\"\n\n[[roster]]\nlabel = \"o\"\nkind = \"osla\"\n",
            logs.to_str().unwrap()
        ),
    )
    .unwrap();
    let ok = |cmd: &mut Command| {
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    assert!(ok(bin().args(["run", "--jobs", "1", "--config"]).arg(&path)).contains("wrote 8 logs"));
    ok(bin().arg("report").arg(&logs));
    let report = logs.join("report");
    assert!(report.join("zenpuzzle/ap.csv").is_file());
    assert!(report.join("report.json").is_file());
    assert!(ok(bin().arg("plot").arg(&report)).contains("SVG"));
    let svgs = fs::read_dir(report.join("zenpuzzle"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert!(svgs > 0);
}
