mod common;

use common::*;
use ergomon::frame::JOINT_COLUMNS;
use ergomon::ingest::{read_frames, LineDecoder};
use ergomon::Error;
use ergomon_core::dynamics::ExternalWrench;
use ergomon_core::model::JointConfiguration;

fn two_frames() -> String {
    let model = subject_model(70.0, 1.75);
    let cfg = JointConfiguration::static_pose([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    let frames = synth_trial(&model, 2, |_| cfg, |_, _| ExternalWrench::none(), false);
    frames_csv(&frames)
}

#[test]
fn empty_input_is_rejected() {
    for text in ["", "# only a comment\n\n"] {
        assert!(matches!(
            read_frames(text.as_bytes(), RATE),
            Err(Error::Input(_))
        ));
    }
    let header = two_frames().lines().next().unwrap().to_string();
    let err = read_frames(header.as_bytes(), RATE).unwrap_err();
    assert!(err.to_string().contains("no samples"), "{err}");
}

#[test]
fn two_frames_round_trip() {
    let text = two_frames();
    let r = read_frames(text.as_bytes(), RATE).unwrap();
    assert_eq!(r.frames.len(), 2);
    assert!(!r.resampled);
    assert_eq!(r.frames[1].q[6], 0.7);
    assert_eq!(frames_csv(&r.frames), text);
    let with_comments = format!("# recorded today\n\n{}", text.replace('\n', "\n\n"));
    assert_eq!(
        read_frames(with_comments.as_bytes(), RATE).unwrap().frames,
        r.frames
    );
}

#[test]
fn out_of_order_timestamp_names_the_line() {
    let mut lines: Vec<String> = two_frames().lines().map(String::from).collect();
    lines.push(lines[1].clone());
    let text = format!("# c\n{}\n", lines.join("\n"));
    match read_frames(text.as_bytes(), RATE) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 5);
            assert!(message.contains("does not increase"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_row_names_the_line() {
    let text = two_frames().replacen("0.7", "seven", 1);
    assert!(matches!(
        read_frames(text.as_bytes(), RATE),
        Err(Error::Parse { line: 2, .. })
    ));
    let short = format!("{}\n0.5,1,2\n", two_frames().trim_end());
    assert!(matches!(
        read_frames(short.as_bytes(), RATE),
        Err(Error::Parse { line: 4, .. })
    ));
}

#[test]
fn missing_cells_are_interpolated_and_long_gaps_reported() {
    let model = subject_model(70.0, 1.75);
    let frames = synth_trial(
        &model,
        40,
        |t| JointConfiguration::static_pose([0.0, 0.0, 0.0, t, 0.0, 0.0, 0.0]),
        |_, _| ExternalWrench::none(),
        false,
    );
    let text = frames_csv(&frames);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|c| *c == JOINT_COLUMNS[3]).unwrap();
    let blank = |lines: std::ops::Range<usize>| -> String {
        text.lines()
            .enumerate()
            .map(|(i, l)| {
                if lines.contains(&i) {
                    let mut cells: Vec<&str> = l.split(',').collect();
                    cells[col] = if i % 2 == 0 { "" } else { "nan" };
                    cells.join(",")
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let short = read_frames(blank(5..7).as_bytes(), RATE).unwrap();
    assert!(short.resampled);
    assert!(short.gaps.is_empty());
    assert_eq!(short.frames.len(), 40);
    for f in &short.frames {
        assert_close(f.q[3], f.timestamp, 1e-9, "interpolated back angle");
    }
    let long = read_frames(blank(10..20).as_bytes(), RATE).unwrap();
    assert_eq!(long.gaps.len(), 1);
    assert_eq!(long.gaps[0].channel, JOINT_COLUMNS[3]);
    assert!(long.gaps[0].periods > 5.0);
}

#[test]
fn stream_decoder_skips_bad_records() {
    let text = two_frames();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.insert(2, "0.01,not,a,frame");
    lines.push(lines[1]);
    let mut dec = LineDecoder::new();
    let frames: Vec<_> = lines
        .iter()
        .filter_map(|l| dec.decode(l).unwrap())
        .collect();
    assert_eq!(frames.len(), 2);
    assert_eq!(dec.skipped(), 2);
    assert!(dec.last_problem().unwrap().contains("does not increase"));
    assert!(LineDecoder::new().decode("t,q_ankle,bogus").is_err());
}
