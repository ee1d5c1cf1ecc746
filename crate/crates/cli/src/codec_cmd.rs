use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use sysaware_core::system_sim::{read_signal, write_signal};
use sysaware_core::tree_codec::{decode, Bitstream, Encoded, TreeCodec};

use crate::{stage, write_file, CliError};

pub fn encode_file(input: &Path, output: &Path, nu: f64, q_bits: u8, depth: Option<u8>) -> Result<Encoded, CliError> {
    let f = File::open(input).map_err(stage("open input signal"))?;
    let w = read_signal(BufReader::new(f)).map_err(stage("read input signal"))?;
    let enc = TreeCodec::new(depth, q_bits).encode(&w, nu).map_err(stage("encode"))?;
    write_file(output, enc.bitstream.as_bytes())?;
    Ok(enc)
}

pub fn decode_file(input: &Path, output: &Path) -> Result<Vec<f64>, CliError> {
    let bytes = fs::read(input).map_err(stage("read bitstream"))?;
    let signal = decode(&Bitstream::from_bytes(bytes)).map_err(stage("decode"))?;
    let mut text = Vec::new();
    write_signal(&signal, &mut text).map_err(stage("format reconstruction"))?;
    write_file(output, &text)?;
    Ok(signal)
}
