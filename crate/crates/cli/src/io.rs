use std::path::Path;

use clap::ValueEnum;
use lmstego::key::Session;
use lmstego::{BitMessage, CoverText, Error, Result};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverFormat {
    /// Detokenized words.
    Text,
    /// One token id per line.
    Ids,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitsFormat {
    /// Hex when the length is a whole number of bytes, else a bit string.
    Auto,
    Hex,
    Bits,
    Raw,
}

/// A path to an existing file, read as a 0/1 string if it is one and as
/// raw bytes otherwise; anything else is parsed as hex.
pub fn read_message_bits(arg: &str) -> Result<BitMessage> {
    let path = Path::new(arg);
    if path.is_file() {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes).map(str::trim).unwrap_or("");
        if !text.is_empty() && text.bytes().all(|b| b == b'0' || b == b'1') {
            return BitMessage::from_bit_str(text);
        }
        return Ok(BitMessage::from_bytes(&bytes));
    }
    let digits = arg.trim().trim_start_matches("0x");
    let bytes = hex::decode(digits).map_err(|e| {
        Error::Config(format!("--message-bits {arg:?} is neither a file nor hex: {e}"))
    })?;
    Ok(BitMessage::from_bytes(&bytes))
}

pub fn render(session: &Session, cover: &CoverText, format: CoverFormat) -> Result<String> {
    Ok(match format {
        CoverFormat::Text => session.render_cover(cover)? + "\n",
        CoverFormat::Ids => cover.to_id_lines(),
    })
}

pub fn read_cover(session: &Session, path: &Path, format: CoverFormat) -> Result<CoverText> {
    let text = std::fs::read_to_string(path)?;
    match format {
        CoverFormat::Text => session.parse_cover(&text),
        CoverFormat::Ids => session.parse_cover_ids(&text),
    }
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn write_bits(out: Option<&Path>, message: &BitMessage, format: BitsFormat) -> Result<()> {
    let format = match format {
        BitsFormat::Auto if message.len().is_multiple_of(8) => BitsFormat::Hex,
        BitsFormat::Auto => BitsFormat::Bits,
        f => f,
    };
    if format == BitsFormat::Raw {
        let bytes = message.to_bytes();
        return match out {
            Some(path) => Ok(std::fs::write(path, bytes)?),
            None => {
                use std::io::Write;
                Ok(std::io::stdout().write_all(&bytes)?)
            }
        };
    }
    let text = match format {
        BitsFormat::Hex => hex::encode(message.to_bytes()),
        _ => message.to_bit_string(),
    };
    write_output(out, &(text + "\n"))
}
