//! Byte-level transports. Stdio uses `Content-Length` framed messages; TCP
//! uses one JSON document per line, one thread per connection.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use super::protocol::Server;

/// Largest accepted frame; bigger ones close the connection.
pub const MAX_FRAME_BYTES: usize = 64 * 1024 * 1024;

/// Reads one framed message. `Ok(None)` at a clean end of stream.
pub fn read_frame<R: BufRead>(reader: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut length = None;
    let mut line = String::new();
    let mut saw_header = false;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return if saw_header {
                Err(io::Error::new(io::ErrorKind::UnexpectedEof, "stream ended inside a header"))
            } else {
                Ok(None)
            };
        }
        let header = line.trim_end_matches(['\r', '\n']);
        if header.is_empty() {
            if saw_header {
                break;
            }
            continue;
        }
        saw_header = true;
        if let Some((name, value)) = header.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                let n: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad Content-Length"))?;
                length = Some(n);
            }
        }
    }
    let n = length.ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "missing Content-Length"))?;
    if n > MAX_FRAME_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0; n];
    reader.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_frame<W: Write>(writer: &mut W, body: &[u8]) -> io::Result<()> {
    write!(writer, "Content-Length: {}\r\n\r\n", body.len())?;
    writer.write_all(body)?;
    writer.flush()
}

/// Serves framed messages until the reader ends or a transport fault.
pub fn serve_framed<R: BufRead, W: Write>(server: &Server, mut reader: R, mut writer: W) -> io::Result<()> {
    while let Some(body) = read_frame(&mut reader)? {
        let text = String::from_utf8_lossy(&body);
        if let Some(reply) = server.handle_text(&text) {
            write_frame(&mut writer, reply.as_bytes())?;
        }
    }
    Ok(())
}

pub fn serve_stdio(server: &Server) -> io::Result<()> {
    serve_framed(server, io::stdin().lock(), io::stdout().lock())
}

/// Serves newline-delimited messages. Blank lines are skipped.
pub fn serve_lines<R: BufRead, W: Write>(server: &Server, reader: R, mut writer: W) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(mut reply) = server.handle_text(&line) {
            reply.push('\n');
            writer.write_all(reply.as_bytes())?;
            writer.flush()?;
        }
    }
    Ok(())
}

fn serve_connection(server: &Server, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_lines(server, reader, stream)
}

/// Accepts connections forever, one thread each.
pub fn serve_tcp(server: Arc<Server>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let server = Arc::clone(&server);
        std::thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = serve_connection(&server, stream) {
                tracing::debug!(?peer, "connection closed: {e}");
            }
        });
    }
    Ok(())
}
