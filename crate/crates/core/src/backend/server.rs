//! Backend side of the wire protocol, for writing backends in Rust.

use std::io::{self, BufRead, Write};

use crate::backend::rle::RleMask;
use crate::backend::wire::{WireBody, WireMessage, WirePoint};
use crate::mask::{Mask2D, Mask3D};

pub struct InitRequest {
    pub volume_path: String,
    pub shape: [usize; 3],
    pub spacing: [f32; 3],
    pub datatype: String,
}

/// A model behind the wire. Errors are sent back as `kind = "error"` replies.
pub trait WireHandler {
    fn init(&mut self, request: InitRequest) -> Result<(), String>;
    fn add_points(&mut self, slice: usize, points: &[WirePoint]) -> Result<Mask2D, String>;
    fn propagate(&mut self) -> Result<Mask3D, String>;
    fn close(&mut self) -> Result<(), String> {
        Ok(())
    }
}

/// Compute the reply to one request.
pub fn dispatch<H: WireHandler + ?Sized>(handler: &mut H, request: WireMessage) -> WireMessage {
    let id = request.id;
    let body = match request.body {
        WireBody::Init {
            volume_path,
            shape,
            spacing,
            datatype,
        } => handler
            .init(InitRequest {
                volume_path,
                shape,
                spacing,
                datatype,
            })
            .map(|_| WireBody::Ok),
        WireBody::AddPoints { slice, points } => handler
            .add_points(slice, &points)
            .map(|m| WireBody::mask2d(RleMask::from_mask2d(&m))),
        WireBody::Propagate => handler.propagate().map(|m| WireBody::mask3d(RleMask::from_mask3d(&m))),
        WireBody::Close => handler.close().map(|_| WireBody::Ok),
        other => Err(format!("`{}` is not a request kind", other.kind())),
    };
    WireMessage::new(id, body.unwrap_or_else(|message| WireBody::Error { message }))
}

/// Answer requests line by line until `close` or end of input.
pub fn serve<H: WireHandler + ?Sized>(handler: &mut H, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request = match WireMessage::parse(&line) {
            Ok(m) => m,
            Err(e) => {
                // No id to echo; answer with id 0 so the client sees a mismatch.
                let reply = WireMessage::new(
                    0,
                    WireBody::Error {
                        message: format!("unparseable request: {}", e),
                    },
                );
                writeln!(output, "{}", reply.to_line())?;
                output.flush()?;
                continue;
            }
        };
        let closing = matches!(request.body, WireBody::Close);
        let reply = dispatch(handler, request);
        writeln!(output, "{}", reply.to_line())?;
        output.flush()?;
        if closing {
            break;
        }
    }
    Ok(())
}
