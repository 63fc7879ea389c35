mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use specmask::audio_io::{read_wav, write_wav_channels, SampleFormat};
use specmask::dataset::Split;
use specmask::imaging::MaskImage;
use specmask::spectral::{StftParams, TfMask};

fn specmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmask"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_two() {
    let o = specmask(&["transmogrify"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(specmask(&["denoise", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn help_lists_flags_with_defaults() {
    let o = specmask(&["denoise", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for needle in [
        "--stft-window <STFT_WINDOW>",
        "[default: 128]",
        "[default: 64]",
        "[default: 1024]",
        "--k-mad",
        "[default: 3]",
        "--min-region",
        "[default: 20]",
        "--morph-radius",
        "[default: 2]",
        "--threshold-db",
        "--jobs",
    ] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let o = specmask(&["enhance", "--help"]);
    assert!(stdout(&o).contains("[default: 200]"));
}

#[test]
fn runtime_errors_are_machine_parseable() {
    let o = specmask(&["spectrogram", "/nonexistent/in.wav", "-o", "/tmp/never.png"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).lines().any(|l| l.starts_with("error[io_error]: ")),
        "{}",
        stderr(&o)
    );

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.wav");
    write_clip(&input, uniform(1000, 1), 8000);
    let o = specmask(&["enhance", s(&input), "--gain=-3", "-o", s(&dir.path().join("y.wav"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[invalid_gain]"));
}

#[test]
fn denoise_with_mask_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = d.join("in.wav");
    write_clip(&input, uniform(8000, 2), 8000);
    let p = StftParams::default();
    let mask = TfMask::from_fn(1024, p.n_frames(8000), 1, |k, _| u8::from(k.min(1024 - k) < 100));
    write_mask(&d.join("m.png"), &mask);

    let run = |out: &Path| {
        let o = specmask(&["denoise", s(&input), "--mask", s(&d.join("m.png")), "-o", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run(&d.join("a.wav"));
    let b = run(&d.join("b.wav"));
    assert_eq!(a, b);
    let y = read_wav(d.join("a.wav")).unwrap().remove(0);
    assert_eq!(y.len(), 8000);

    let o = specmask(&["denoise", s(&input), "-o", s(&d.join("c.wav"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[invalid_argument]"));
}

#[test]
fn denoise_with_baseline_and_oracle_providers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sr = 8000;
    let clean = chirp(8000, sr, 500.0, 3000.0, 0.5);
    let (noisy, _) = mix_at_snr(&clean, &gaussian(8000, 3), 0.0);
    let (clean_wav, noisy_wav) = (d.join("clean.wav"), d.join("noisy.wav"));
    write_clip(&clean_wav, clean, sr);
    write_clip(&noisy_wav, noisy, sr);
    for args in [
        vec!["--provider", "baseline", "--k-mad", "2.5"],
        vec!["--provider", "oracle", "--clean", s(&clean_wav)],
    ] {
        let out = d.join("out.wav");
        let mut argv = vec!["-v", "denoise", s(&noisy_wav), "-o", s(&out)];
        argv.extend(args.iter().copied());
        let o = specmask(&argv);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("stft: window=128 hop=64 dft=1024"));
        assert!(energy(&read_wav(&out).unwrap()[0].samples) > 0.0);
    }
    let o = specmask(&[
        "denoise",
        s(&noisy_wav),
        "-o",
        s(&d.join("o.wav")),
        "--provider",
        "oracle",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn enhance_scales_by_gain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_clip(
        &d.join("in.wav"),
        uniform(500, 4).iter().map(|v| v * 0.001).collect(),
        8000,
    );
    let o = specmask(&[
        "enhance",
        s(&d.join("in.wav")),
        "--gain",
        "200",
        "-o",
        s(&d.join("loud.wav")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let x = read_wav(d.join("in.wav")).unwrap().remove(0);
    let y = read_wav(d.join("loud.wav")).unwrap().remove(0);
    for (a, b) in x.samples.iter().zip(&y.samples) {
        assert_eq!(*b, (a * 200.0) as f32 as f64);
    }
}

#[test]
fn stereo_spectrogram_segment_separate_and_noise() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sr = 8000;
    let l = clip(chirp(8000, sr, 400.0, 2000.0, 0.5), sr);
    let r = clip(tone(8000, sr, 1000.0, 0.5), sr);
    write_wav_channels(&[&l, &r], d.join("st.wav"), SampleFormat::Float32).unwrap();

    let o = specmask(&["spectrogram", s(&d.join("st.wav")), "-o", s(&d.join("img.png"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for side in ["L", "R"] {
        let img = MaskImage::load(d.join(format!("img_{side}.png"))).unwrap();
        assert_eq!((img.rows, img.cols), (1024, StftParams::default().n_frames(8000)));
    }

    let o = specmask(&[
        "segment",
        s(&d.join("st.wav")),
        "-o",
        s(&d.join("seg.png")),
        "--overlay",
        s(&d.join("ov.png")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.join("seg_L.png").is_file() && d.join("seg_R.png").is_file());
    assert!(d.join("ov_R.png").is_file());

    let p = StftParams::default();
    let two = TfMask::from_fn(1024, p.n_frames(8000), 2, |k, _| match k.min(1024 - k) {
        0..=40 => 1,
        100..=160 => 2,
        _ => 0,
    });
    write_mask(&d.join("two.png"), &two);
    let o = specmask(&[
        "separate",
        s(&d.join("st.wav")),
        "--mask",
        s(&d.join("two.png")),
        "--sources",
        "2",
        "-o",
        s(&d.join("parts")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(files_under(&d.join("parts")).len(), 4);

    let o = specmask(&[
        "estimate-noise",
        s(&d.join("st.wav")),
        s(&d.join("st.wav")),
        "-o",
        s(&d.join("noise.wav")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let noise = read_wav(d.join("noise.wav")).unwrap();
    assert_eq!(noise.len(), 2);
    assert!(noise.iter().all(|c| c.samples.iter().all(|v| *v == 0.0)));
}

fn toy_dataset(root: &Path) {
    empty_tree(root);
    let p = StftParams::default();
    for (split, ids) in [
        (Split::Training, &["a", "b", "c"][..]),
        (Split::Validation, &["d"][..]),
        (Split::Test, &["e"][..]),
    ] {
        for (i, id) in ids.iter().enumerate() {
            let x = uniform(2000, i as u64);
            write_clip(
                &split_dir(root, split, "raw_audios").join(format!("{id}.wav")),
                x.clone(),
                8000,
            );
            write_clip(
                &split_dir(root, split, "denoised_audios").join(format!("{id}.wav")),
                x,
                8000,
            );
            write_mask(
                &split_dir(root, split, "masks").join(format!("{id}_mask.png")),
                &TfMask::filled(1024, p.n_frames(2000), 1, 1),
            );
        }
    }
}

#[test]
fn scan_eval_and_batch_over_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    toy_dataset(&root);

    let o = specmask(&["scan", "--root", s(&root)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "training\t3\nvalidation\t1\ntest\t1\n");

    let json = dir.path().join("report.jsonl");
    let o = specmask(&[
        "eval",
        "--root",
        s(&root),
        "--split",
        "training",
        "--provider",
        "import",
        "--json",
        s(&json),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    let header = table.lines().nth(1).unwrap();
    assert_eq!(
        header.split_whitespace().collect::<Vec<_>>(),
        ["clip", "F1", "IoU", "Dice", "SDR"]
    );
    let mean: Vec<&str> = table
        .lines()
        .find(|l| l.starts_with("mean"))
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(&mean[1..4], ["100.00", "100.00", "100.00"]);
    assert_eq!(std::fs::read_to_string(&json).unwrap().lines().count(), 4);

    let out = dir.path().join("batch");
    let o = specmask(&[
        "--jobs",
        "2",
        "denoise",
        "--root",
        s(&root),
        "--split",
        "training",
        "--out-dir",
        s(&out),
        "--provider",
        "baseline",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("succeeded\t3\nfailed\t0\n"));
    assert_eq!(files_under(&out).len(), 9);

    let o = specmask(&["eval", "--root", s(&root), "--split", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}
