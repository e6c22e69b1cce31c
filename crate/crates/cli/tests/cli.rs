use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("twhaar-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn twhaar(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twhaar")).args(args).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "grid = 0,2;0,2\nframe_signals = 2\nmart_signals = 1\nlp_trials = 2\nnil_levels = 1\nnil_signals = 1\n";

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p
}

#[test]
fn verify_all_writes_reports_and_exit_codes() {
    let dir = scratch("verify");
    let cfg = small_config(&dir, "");
    let o = twhaar(&["verify-all", "--config", cfg.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("check,criterion,status,value,detail\n"));
    assert!(csv.contains("frame.euclid.energy,2,PASS,frame_ratio=3"));
    assert!(dir.join("summary.txt").exists());

    let broken = scratch("broken");
    let cfg = small_config(&broken, "inject_broken_lattice = true\n");
    let o = twhaar(&["verify-all", "--config", cfg.to_str().unwrap()], &broken);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL partition.case1"));
    assert!(std::fs::read_to_string(broken.join("summary.txt")).unwrap().contains("failing checks: partition.case1"));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = scratch("usage");
    assert_eq!(twhaar(&[], &dir).status.code(), Some(2));
    assert_eq!(twhaar(&["verify-all", "--mode", "fuzzy"], &dir).status.code(), Some(2));
    let cfg = small_config(&dir, "colour = red\n");
    assert_eq!(twhaar(&["verify-all", "--config", cfg.to_str().unwrap()], &dir).status.code(), Some(2));
    assert_eq!(twhaar(&["shear", "verify", "--kind", "T9", "--grid", "0,2;0,2"], &dir).status.code(), Some(2));
}

#[test]
fn signal_haar_round_trip() {
    let dir = scratch("haar");
    let sig = dir.join("f.tgs1");
    let o = twhaar(&["signal", "gen", "--grid", "0,4;0,4", "--output", sig.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(0));
    let o = twhaar(&["haar", "analyze", "--input", sig.to_str().unwrap(), "--system", "2"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let coeffs = dir.join("coeffs_system2.thc1");
    let back = dir.join("back.tgs1");
    let o = twhaar(&["haar", "synthesize", "--input", coeffs.to_str().unwrap(), "--output", back.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(back).unwrap().starts_with("TGS1"));
    let o = twhaar(&["haar", "frame", "--input", sig.to_str().unwrap()], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("frame ratio: 3\n"));
    let o = twhaar(&["haar", "frame", "--input", sig.to_str().unwrap(), "--mode", "float"], &dir);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn mart_and_shear_commands() {
    let dir = scratch("mart");
    let o = twhaar(&["mart", "diff", "--system", "3", "--k", "1,-1"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("mart_diff_system3.tgs1").exists());
    let o = twhaar(&["mart", "lp-report", "--systems", "1,3", "--p", "1.5,4", "--trials", "3"], &dir);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("system,p,trial,ratio\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    let o = twhaar(&["shear", "verify", "--kind", "Theta", "--grid", "0,2;0,2;0,2"], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("determinant=1 bijective=yes"));
}

#[test]
fn shard_commands() {
    let dir = scratch("shards");
    let o = twhaar(&["shards", "build", "--case", "3", "--j", "0,0,1", "--profile", "zero"], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(dir.join("region.fbr")).unwrap().starts_with("FBR1"));
    let o = twhaar(&["shards", "verify-partition", "--case", "1", "--j", "1,0,-1"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = twhaar(&["shards", "verify-partition", "--case", "1", "--j", "1,0,-1", "--broken-lattice"], &dir);
    assert_eq!(o.status.code(), Some(1));
    let o = twhaar(&["shards", "verify-partition", "--case", "2", "--j", "2,0,1", "--window", "-1,1:-32,32:-8,8"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = twhaar(&["shards", "tube-sigma", "--case", "2", "--j", "2,0,1"], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("2,2,0,1,"));
    let o = twhaar(&["shards", "build", "--case", "2", "--j", "1,0,-1"], &dir);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nil_commands_and_figures() {
    let dir = scratch("nil");
    let o = twhaar(&["nil", "frame", "--levels", "1"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("frame ratio: 3\n"));
    let o = twhaar(&["nil", "diff", "--type", "3", "--levels", "1", "--j", "0,1,0"], &dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = twhaar(&["nil", "haar", "--type", "2", "--levels", "1"], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(dir.join("nil_type2.thc1")).unwrap().starts_with("THC1\ntype: 2\n"));
    let o = twhaar(&["nil", "compare", "--case", "1", "--j", "1,0,-1"], &dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("case,j1,j2,j3,kappa,c_in,c_out\n1,1,0,-1,0,"));
    let o = twhaar(&["figures"], &dir);
    assert_eq!(o.status.code(), Some(0));
    for f in ["euclid_system2.csv", "euclid_system2.svg", "shard_case3.csv", "stacked_tile.svg", "type3_grid.csv"] {
        assert!(dir.join("figures").join(f).exists(), "{f}");
    }
}
