//! Reference depth backend: serves the synthetic oracle over the external
//! backend protocol on stdin/stdout.
//!
//! ```text
//! augpipe-depth-oracle [--blur-radius N] [--variant TAG] [--fault KIND]
//! ```
//!
//! `--fault` makes the backend misbehave for integration testing:
//! `wrong-size` (drop one sample from frame 1), `bad-version` (answer the
//! handshake with version 2), `error` (reply ERROR to frame 1), `hang`
//! (never answer frame 1).

use std::io::{self, BufReader, BufWriter};
use std::process::ExitCode;

use augpipe_core::depthio::protocol::{read_message, write_message, Message, PROTOCOL_VERSION};
use augpipe_core::depthio::{synthetic_depth_oracle, DepthMap};
use augpipe_core::imagecore::RgbImage;

#[derive(Clone, Copy, PartialEq)]
enum Fault {
    None,
    WrongSize,
    BadVersion,
    Error,
    Hang,
}

fn main() -> ExitCode {
    let mut blur_radius = 1usize;
    let mut variant = String::from("synthetic-oracle");
    let mut fault = Fault::None;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let value = args.next();
        match (a.as_str(), value.as_deref()) {
            ("--blur-radius", Some(v)) => match v.parse() {
                Ok(r) => blur_radius = r,
                Err(_) => return usage(),
            },
            ("--variant", Some(v)) => variant = v.to_string(),
            ("--fault", Some("wrong-size")) => fault = Fault::WrongSize,
            ("--fault", Some("bad-version")) => fault = Fault::BadVersion,
            ("--fault", Some("error")) => fault = Fault::Error,
            ("--fault", Some("hang")) => fault = Fault::Hang,
            _ => return usage(),
        }
    }
    match run(blur_radius, &variant, fault) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("augpipe-depth-oracle: {e}");
            ExitCode::FAILURE
        }
    }
}

fn usage() -> ExitCode {
    eprintln!("usage: augpipe-depth-oracle [--blur-radius N] [--variant TAG] [--fault wrong-size|bad-version|error|hang]");
    ExitCode::from(2)
}

fn run(blur_radius: usize, variant: &str, fault: Fault) -> augpipe_core::Result<()> {
    if fault == Fault::None {
        return augpipe_core::depthio::protocol::serve(io::stdin().lock(), io::stdout().lock(), variant, |img| {
            Ok(synthetic_depth_oracle(img, blur_radius))
        });
    }
    let mut input = BufReader::new(io::stdin().lock());
    let mut output = BufWriter::new(io::stdout().lock());
    if read_message(&mut input)?.is_none() {
        return Ok(());
    }
    let version = if fault == Fault::BadVersion { PROTOCOL_VERSION + 1 } else { PROTOCOL_VERSION };
    write_message(
        &mut output,
        &Message::Hello {
            version,
            model_variant: variant.to_string(),
        },
    )?;
    while let Some(msg) = read_message(&mut input)? {
        let Message::Frame { id, width, height, rgb8 } = msg else {
            continue;
        };
        if id == 1 {
            match fault {
                Fault::Hang => loop {
                    std::thread::sleep(std::time::Duration::from_secs(3600));
                },
                Fault::Error => {
                    write_message(&mut output, &Message::Error("simulated failure".into()))?;
                    continue;
                }
                _ => {}
            }
        }
        let img = RgbImage::new(width as usize, height as usize, rgb8.iter().map(|&b| f32::from(b) / 255.0).collect())?;
        let depth: DepthMap = synthetic_depth_oracle(&img, blur_radius);
        let mut reply = Message::depth(id, &depth)?;
        if let (Fault::WrongSize, 1, Message::Depth { samples, .. }) = (fault, id, &mut reply) {
            samples.pop();
        }
        write_message(&mut output, &reply)?;
    }
    Ok(())
}
