use std::process::Command;

fn hcmr(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hcmr")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn costs_row_one() {
    let (code, out, _) = hcmr(&["--mode", "costs", "--tuples", "9,3,18,72,2"]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        "K,P,Q,N,r,scheme,L_int,L_cro,L_tot,meter_int,meter_cro,delta\n\
         9,3,18,72,2,Unc,288,864,1152,288,864,0\n\
         9,3,18,72,2,Cod,18,486,504,18,486,0\n\
         9,3,18,72,2,Hyb,864,216,1080,864,216,0\n"
    );
}

#[test]
fn default_costs_flag_rejections_and_anomalies() {
    let (code, out, _) = hcmr(&["--mode", "costs", "--no-meter"]);
    assert_eq!(code, 1);
    assert!(out.contains("# rejected 20,4,20,380,2 scheme=Hyb"));
    assert!(out.contains("# anomaly row=5 tuple=(20,4,20,380,2) scheme=Hyb metric=L_int published=608 formula=6080 status=typo-suspect"));
    let (code, _, _) = hcmr(&["--mode", "costs", "--no-meter", "--warn-rejected"]);
    assert_eq!(code, 0);
}

#[test]
fn verify_exit_status_follows_faults() {
    let (code, out, _) = hcmr(&["--mode", "shuffle-verify", "--tuples", "2,2,2,2,1;9,3,18,72,2"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("# summary checks=12 failed=0 rejected=0"), "{out}");
    let (code, out, _) = hcmr(&["--mode", "shuffle-verify", "--tuples", "9,3,18,72,2", "--fault-inject"]);
    assert_eq!(code, 1);
    assert!(out.contains("decode mismatch"));
}

#[test]
fn config_file_with_overrides_and_out_file() {
    let dir = std::env::temp_dir().join(format!("hcmr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let conf = dir.join("run.conf");
    std::fs::write(&conf, "mode=locality\ntuples=4,2,2,8\ntrials=2\nseeds=7\nbudget=2\n").unwrap();
    let out_a = dir.join("a.csv");
    let out_b = dir.join("b.csv");
    for out in [&out_a, &out_b] {
        let (code, stdout, stderr) = hcmr(&["--config", conf.to_str().unwrap(), "--lambda", "0.9", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{stderr}");
        assert!(stdout.is_empty());
    }
    let a = std::fs::read(&out_a).unwrap();
    assert_eq!(a, std::fs::read(&out_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("4,2,2,8,random,2,"));
    assert!(text.contains("# trials=2 lambda=0.9"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_arguments_fail() {
    let (code, _, err) = hcmr(&["--mode", "locality", "--trials", "0", "--tuples", "4,2,2,8"]);
    assert_ne!(code, 0);
    assert!(err.contains("trials"), "{err}");
    let (code, _, _) = hcmr(&["--mode", "bogus"]);
    assert_ne!(code, 0);
    let (code, _, _) = hcmr(&["--budget", "0"]);
    assert_ne!(code, 0);
}

#[test]
fn table_format() {
    let (code, out, _) = hcmr(&["--tuples", "16,4,16,240,2", "--format", "table"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].trim_start().starts_with("K  P"));
    assert!(lines[1].starts_with("--"));
    assert!(lines[4].contains("Hyb"));
}
