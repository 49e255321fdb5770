//! Network weights on disk.
//!
//! A text header describes the architecture, one item per line:
//!
//! ```text
//! xaifuzz-weights 1
//! input 1 28 28
//! head classifier 10
//! layer conv2d 1 6 5 1
//! layer relu
//! ...
//! end
//! ```
//!
//! followed by the parameters of every parameterised layer in order, weights
//! then biases, as little-endian `f32`.

use std::fmt::Write as _;
use std::path::Path;

use xaifuzz_core::nn::{Head, Layer, Network, NnError, Param};
use xaifuzz_core::Tensor;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "xaifuzz-weights";

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header line {line}: {reason}")]
    Header { line: usize, reason: String },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("expected {expected} bytes of parameters, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Network(#[from] NnError),
}

fn layer_line(l: &Layer) -> String {
    match *l {
        Layer::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
        } => format!("conv2d {in_channels} {out_channels} {kernel} {stride}"),
        Layer::Relu => "relu".into(),
        Layer::MaxPool { size } => format!("maxpool {size}"),
        Layer::Dense { inputs, outputs } => format!("dense {inputs} {outputs}"),
        Layer::Tanh => "tanh".into(),
        Layer::Softmax => "softmax".into(),
    }
}

pub fn encode(net: &Network) -> Vec<u8> {
    let mut header = format!("{MAGIC} {FORMAT_VERSION}\n");
    let s = net.input_shape();
    writeln!(header, "input {} {} {}", s[0], s[1], s[2]).unwrap();
    match net.head() {
        Head::Classifier { classes } => writeln!(header, "head classifier {classes}").unwrap(),
        Head::Regression => writeln!(header, "head regression").unwrap(),
    }
    for l in net.layers() {
        writeln!(header, "layer {}", layer_line(l)).unwrap();
    }
    header.push_str("end\n");
    let mut out = header.into_bytes();
    for p in net.params().iter().flatten() {
        for v in p.weight.data().iter().chain(p.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn nums(line: usize, fields: &[&str], n: usize) -> Result<Vec<usize>, WeightsError> {
    if fields.len() != n {
        return Err(WeightsError::Header {
            line,
            reason: format!("expected {n} numbers"),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse().map_err(|_| WeightsError::Header {
                line,
                reason: format!("not a number: {f}"),
            })
        })
        .collect()
}

fn parse_layer(line: usize, fields: &[&str]) -> Result<Layer, WeightsError> {
    let bad = || WeightsError::Header {
        line,
        reason: "unknown layer".into(),
    };
    let (kind, rest) = fields.split_first().ok_or_else(bad)?;
    Ok(match *kind {
        "conv2d" => {
            let v = nums(line, rest, 4)?;
            Layer::Conv2d {
                in_channels: v[0],
                out_channels: v[1],
                kernel: v[2],
                stride: v[3],
            }
        }
        "relu" => Layer::Relu,
        "maxpool" => Layer::MaxPool {
            size: nums(line, rest, 1)?[0],
        },
        "dense" => {
            let v = nums(line, rest, 2)?;
            Layer::Dense {
                inputs: v[0],
                outputs: v[1],
            }
        }
        "tanh" => Layer::Tanh,
        "softmax" => Layer::Softmax,
        _ => return Err(bad()),
    })
}

pub fn decode(bytes: &[u8]) -> Result<Network, WeightsError> {
    let mut input = None;
    let mut head = None;
    let mut layers = Vec::new();
    let mut pos = 0;
    let mut line_no = 0;
    loop {
        line_no += 1;
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(WeightsError::Header {
                line: line_no,
                reason: "header is not terminated by `end`".into(),
            });
        };
        let line = std::str::from_utf8(&bytes[pos..pos + len]).map_err(|_| WeightsError::Header {
            line: line_no,
            reason: "not utf-8".into(),
        })?;
        pos += len + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |reason: &str| WeightsError::Header {
            line: line_no,
            reason: reason.into(),
        };
        match fields.as_slice() {
            [MAGIC, v] if line_no == 1 => {
                let v: u32 = v.parse().map_err(|_| bad("bad version"))?;
                if v != FORMAT_VERSION {
                    return Err(WeightsError::Version(v));
                }
            }
            _ if line_no == 1 => return Err(bad("missing magic")),
            ["input", rest @ ..] => {
                let v = nums(line_no, rest, 3)?;
                input = Some([v[0], v[1], v[2]]);
            }
            ["head", "classifier", n] => {
                head = Some(Head::Classifier {
                    classes: nums(line_no, &[n], 1)?[0],
                })
            }
            ["head", "regression"] => head = Some(Head::Regression),
            ["layer", rest @ ..] => layers.push(parse_layer(line_no, rest)?),
            ["end"] => break,
            _ => return Err(bad("unrecognised line")),
        }
    }
    let input = input.ok_or(WeightsError::Header {
        line: line_no,
        reason: "missing input shape".into(),
    })?;
    let head = head.ok_or(WeightsError::Header {
        line: line_no,
        reason: "missing head".into(),
    })?;
    let mut net = Network::zeroed(input, layers, head)?;
    let body = &bytes[pos..];
    let expected = net.parameter_count() * 4;
    if body.len() != expected {
        return Err(WeightsError::Truncated {
            expected,
            found: body.len(),
        });
    }
    let mut floats = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut take = |shape: &[usize]| {
        let n: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), floats.by_ref().take(n).collect())
    };
    let mut params = Vec::new();
    for p in net.params().iter().flatten() {
        params.push(Param {
            weight: take(p.weight.shape()).map_err(NnError::from)?,
            bias: take(p.bias.shape()).map_err(NnError::from)?,
        });
    }
    net.set_params(params)?;
    Ok(net)
}

pub fn save(net: &Network, path: &Path) -> Result<(), WeightsError> {
    Ok(std::fs::write(path, encode(net))?)
}

pub fn load(path: &Path) -> Result<Network, WeightsError> {
    decode(&std::fs::read(path)?)
}
