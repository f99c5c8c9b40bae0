use std::ffi::{c_char, CStr, CString};
use std::ptr;

use shadowbench_ffi::*;

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe { shb_last_error(ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { shb_last_error(buf.as_mut_ptr(), buf.len(), &mut needed) }, ShbStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn render(policy: *const ShbPolicy) -> String {
    let mut needed = 0usize;
    assert_eq!(
        unsafe { shb_policy_render(policy, ptr::null_mut(), 0, &mut needed) },
        ShbStatus::BufferTooSmall
    );
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { shb_policy_render(policy, buf.as_mut_ptr(), buf.len(), &mut needed) },
        ShbStatus::Ok
    );
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn reference_policy_evaluates_and_prunes() {
    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { shb_policy_reference(&mut policy) }, ShbStatus::Ok);
    let ctx = ShbNodeContext {
        max_r: -4.0,
        features: ShbFeatures {
            min_d_mov: 2.0,
            min_d_npc: 3.0,
            sum_d_npc: 10.0,
            n_npc: 2,
            min_d_portal: 0.0,
        },
        ..ShbNodeContext::default()
    };
    let mut value = 0.0;
    assert_eq!(unsafe { shb_policy_eval(policy, &ctx, &mut value) }, ShbStatus::Ok);
    assert!((value - 6.4).abs() < 1e-12);

    let mut n = 0usize;
    assert_eq!(unsafe { shb_policy_pruning_count(policy, &mut n) }, ShbStatus::Ok);
    assert_eq!(n, 15);
    let mut first = ptr::null_mut();
    assert_eq!(unsafe { shb_policy_pruning(policy, 0, &mut first) }, ShbStatus::Ok);
    assert_eq!(render(first), "(1 / SUM_D_NPC)");
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { shb_policy_pruning(policy, 15, &mut none) }, ShbStatus::InvalidArgument);
    assert!(none.is_null());
    unsafe {
        shb_policy_free(first);
        shb_policy_free(policy);
    }
}

#[test]
fn parse_errors_set_the_message() {
    let text = CString::new("MAX_R +").unwrap();
    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { shb_policy_parse(text.as_ptr(), &mut policy) }, ShbStatus::Parse);
    assert!(policy.is_null());
    assert!(last_error().contains("offset"), "{}", last_error());
    assert_eq!(unsafe { shb_policy_parse(ptr::null(), &mut policy) }, ShbStatus::NullPointer);
}

#[test]
fn game_and_agent_round_trip() {
    let name = CString::new("aliens").unwrap();
    let mut game = ptr::null_mut();
    assert_eq!(unsafe { shb_game_load(name.as_ptr(), 0, 3, &mut game) }, ShbStatus::Ok);
    let mut n = 0u32;
    assert_eq!(unsafe { shb_game_num_actions(game, &mut n) }, ShbStatus::Ok);
    assert_eq!(n, 3);

    let mut agent = ptr::null_mut();
    assert_eq!(
        unsafe { shb_agent_new(ShbAgentKind::Osla, ptr::null(), 0, f64::NAN, 1, &mut agent) },
        ShbStatus::Ok
    );
    let mut d = ShbDecision::default();
    let (mut p, mut v) = ([0.0; 3], [0.0; 3]);
    assert_eq!(
        unsafe { shb_agent_decide(agent, game, 700, &mut d, p.as_mut_ptr(), v.as_mut_ptr(), 3) },
        ShbStatus::Ok
    );
    assert_eq!((d.n_actions, d.calls), (3, 3));
    assert_eq!(d.b, 3.0 / 700.0);
    assert_eq!(p, [1.0 / 3.0; 3]);
    assert!(v.iter().all(|x| x.is_finite()));

    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { shb_agent_decide(agent, game, 700, &mut d, small.as_mut_ptr(), small.as_mut_ptr(), 2) },
        ShbStatus::BufferTooSmall
    );

    let mut tick = 0u32;
    assert_eq!(unsafe { shb_game_step(game, d.a_star) }, ShbStatus::Ok);
    assert_eq!(unsafe { shb_game_info(game, ptr::null_mut(), ptr::null_mut(), &mut tick) }, ShbStatus::Ok);
    assert_eq!(tick, 1);
    assert_eq!(unsafe { shb_game_step(game, 7) }, ShbStatus::InvalidArgument);

    let mut buf = [0 as c_char; 8];
    assert_eq!(
        unsafe { shb_game_action_name(game, 2, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) },
        ShbStatus::Ok
    );
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "USE");

    let mut f = ShbFeatures::default();
    assert_eq!(unsafe { shb_game_features(game, &mut f) }, ShbStatus::Ok);
    assert!(f.n_npc > 0);
    unsafe {
        shb_agent_free(agent);
        shb_game_free(game);
    }
}

#[test]
fn unknown_game_and_bad_agent() {
    let name = CString::new("pacman").unwrap();
    let mut game = ptr::null_mut();
    assert_eq!(unsafe { shb_game_load(name.as_ptr(), 0, 0, &mut game) }, ShbStatus::InvalidArgument);
    assert!(last_error().contains("pacman"));
    let mut agent = ptr::null_mut();
    assert_eq!(
        unsafe { shb_agent_new(ShbAgentKind::Mcts, ptr::null(), 0, f64::NAN, 0, &mut agent) },
        ShbStatus::Agent
    );
    assert!(agent.is_null());
}

#[test]
fn kl_matches_the_hand_value() {
    let (p, q) = ([0.5, 0.5], [0.9, 0.1]);
    let mut out = 0.0;
    assert_eq!(unsafe { shb_sym_kl(p.as_ptr(), q.as_ptr(), 2, &mut out) }, ShbStatus::Ok);
    assert!((out - 0.4394).abs() < 1e-3);
}

#[test]
fn playthrough_log_through_the_boundary() {
    let name = CString::new("zenpuzzle").unwrap();
    let mut needed = 0usize;
    let run = |buf: *mut c_char, len: usize, needed: &mut usize| unsafe {
        shb_run_playthrough(
            name.as_ptr(),
            0,
            ShbAgentKind::Random,
            ptr::null(),
            ShbAgentKind::Osla,
            ptr::null(),
            700,
            11,
            buf,
            len,
            needed,
        )
    };
    assert_eq!(run(ptr::null_mut(), 0, &mut needed), ShbStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(run(buf.as_mut_ptr(), buf.len(), &mut needed), ShbStatus::Ok);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert!(text.starts_with(r#"{"type":"header","game":"zenpuzzle""#));
    assert!(text.trim_end().lines().last().unwrap().starts_with(r#"{"type":"outcome""#));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/shadowbench.h")).unwrap();
    for f in [
        "shb_last_error",
        "shb_policy_parse",
        "shb_policy_eval",
        "shb_policy_pruning",
        "shb_game_load",
        "shb_game_step",
        "shb_agent_new",
        "shb_agent_decide",
        "shb_sym_kl",
        "shb_run_playthrough",
    ] {
        assert!(header.contains(&format!(" {f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct ShbGame ShbGame;"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let src = std::env::temp_dir().join(format!("shb_header_{}.c", std::process::id()));
    std::fs::write(&src, "#include \"shadowbench.h\"\nint main(void) { return SHB_STATUS_OK; }\n").unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = std::process::Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I", include])
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
    let _ = std::fs::remove_file(src);
}
