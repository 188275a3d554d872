//! Client/server protocol: request grammar, response lines, framing, and the
//! QR codec that carries responses as images.

pub mod frame;
pub mod message;
pub mod qr;

pub use frame::{
    frame_png, frame_response, read_line_limited, read_response, read_text_line, response_png, FrameError, Line,
    ResponseMode, MAX_LINE_BYTES,
};
pub use message::{
    parse_request, parse_response, serialize_response, GetPassRequest, RequestError, Response, ResponseError,
    ACK_LINE, GETPASS,
};
