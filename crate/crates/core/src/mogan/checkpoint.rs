//! Plain-text model persistence.
//!
//! One record per line, whitespace separated. Floats are written in Rust's
//! shortest round-trip form, so a reload is bit-exact.
//!
//! ```text
//! mogan-checkpoint 1
//! config <key> <value>         (repeated)
//! meta <key> <value>           (classes, width, tau, target_fpr, ...)
//! vector <name> <values...>    (deltas, std_mean, std_std)
//! net <name> <layer count>
//! layer <kind> <fields...>
//! tensor <dims comma separated> <values...>
//! latent standard_normal <dim> | latent fitted <classes>
//! class_latent <mean...> | <var...>
//! projection <latent dim> <embed dim>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::detector::{Calibration, FaultDetector};
use super::latent::{ClassLatent, LatentSource, LatentStats, Projection};
use super::nets::{DiscriminatorNet, GeneratorNet};
use super::train::{TrainConfig, TrainHistory, TrainedModel};
use crate::dataio::Standardizer;
use crate::ndcore::{AdamConfig, Layer, LayerKind, Network, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "mogan-checkpoint";

fn floats(out: &mut String, xs: &[f64]) {
    for x in xs {
        let _ = write!(out, " {x:?}");
    }
}

fn join_usize(xs: &[usize], sep: &str) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(sep)
}

fn write_network(out: &mut String, name: &str, net: &Network) {
    let _ = writeln!(out, "net {name} {}", net.layers().len());
    for layer in net.layers() {
        let _ = match *layer.kind() {
            LayerKind::Dense { inputs, outputs } => writeln!(out, "layer dense {inputs} {outputs}"),
            LayerKind::PRelu { channels } => writeln!(out, "layer prelu {channels}"),
            LayerKind::InstanceNorm { eps } => writeln!(out, "layer instance_norm {eps:?}"),
            LayerKind::ConvTranspose1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => writeln!(
                out,
                "layer conv_transpose1d {in_channels} {out_channels} {kernel} {stride} {padding}"
            ),
            LayerKind::SoftmaxHead { classes } => writeln!(out, "layer softmax_head {classes}"),
        };
        for p in layer.params() {
            out.push_str("tensor ");
            out.push_str(&join_usize(p.shape(), ","));
            floats(out, p.data());
            out.push('\n');
        }
    }
}

fn config_lines(cfg: &TrainConfig) -> Vec<(&'static str, String)> {
    vec![
        ("epochs", cfg.epochs.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("latent_dim", cfg.latent_dim.to_string()),
        ("pi", format!("{:?}", cfg.pi)),
        ("stats_refresh", cfg.stats_refresh.to_string()),
        ("lr", format!("{:?}", cfg.adam.lr)),
        ("beta1", format!("{:?}", cfg.adam.beta1)),
        ("beta2", format!("{:?}", cfg.adam.beta2)),
        ("adam_eps", format!("{:?}", cfg.adam.eps)),
        ("density_weight", format!("{:?}", cfg.density_weight)),
        ("density_quantile", format!("{:?}", cfg.density_quantile)),
        ("pretrain_epochs", cfg.pretrain_epochs.to_string()),
        ("val_frac", format!("{:?}", cfg.val_frac)),
        ("target_fpr", format!("{:?}", cfg.target_fpr)),
        ("generator_hidden", join_usize(&cfg.generator_hidden, ",")),
        ("discriminator_hidden", join_usize(&cfg.discriminator_hidden, ",")),
        ("audit_samples", cfg.audit_samples.to_string()),
        ("select_best", cfg.select_best.to_string()),
        ("seed", cfg.seed.to_string()),
    ]
}

/// Serializes a trained model. The training history is not included.
pub fn write_checkpoint(model: &TrainedModel) -> String {
    let mut out = format!("{MAGIC} {CHECKPOINT_VERSION}\n");
    for (k, v) in config_lines(&model.config) {
        let _ = writeln!(out, "config {k} {}", if v.is_empty() { "-" } else { &v });
    }
    let det = &model.detector;
    let gen = &model.generator;
    let _ = writeln!(out, "meta classes {}", det.disc.n_classes());
    let _ = writeln!(out, "meta width {}", det.disc.width());
    let _ = writeln!(out, "meta latent_dim {}", gen.latent_dim());
    let _ = writeln!(out, "meta tau {:?}", det.tau);
    let _ = writeln!(out, "meta target_fpr {:?}", det.target_fpr);
    let _ = writeln!(out, "meta achieved_fpr {:?}", model.calibration.achieved_fpr);
    let _ = writeln!(out, "meta flagged {}", model.calibration.flagged);
    out.push_str("vector deltas");
    floats(&mut out, &model.deltas);
    out.push('\n');
    if let Some(s) = &det.standardizer {
        out.push_str("vector std_mean");
        floats(&mut out, &s.mean);
        out.push_str("\nvector std_std");
        floats(&mut out, &s.std);
        out.push('\n');
    }
    write_network(&mut out, "generator", gen.network());
    write_network(&mut out, "disc_body", det.disc.body());
    write_network(&mut out, "disc_head", det.disc.head());
    match &model.latent {
        LatentSource::StandardNormal { dim } => {
            let _ = writeln!(out, "latent standard_normal {dim}");
        }
        LatentSource::Fitted(stats) => {
            let _ = writeln!(out, "latent fitted {}", stats.n_classes());
            for c in stats.classes() {
                out.push_str("class_latent");
                floats(&mut out, &c.mean);
                out.push_str(" |");
                floats(&mut out, &c.var);
                out.push('\n');
            }
        }
    }
    let p = &model.projection;
    let _ = writeln!(out, "projection {} {}", p.latent_dim(), p.embed_dim());
    out.push_str("tensor ");
    out.push_str(&join_usize(&[p.latent_dim(), p.embed_dim()], ","));
    floats(&mut out, p.weights());
    out.push_str("\nend\n");
    out
}

pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}

struct Reader<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    fn line_no(&self) -> usize {
        self.lines.get(self.pos).map_or_else(|| self.lines.last().map_or(1, |l| l.0), |l| l.0)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no(),
            message: msg.into(),
        }
    }

    fn peek(&self) -> Option<&[&'a str]> {
        self.lines.get(self.pos).map(|l| l.1.as_slice())
    }

    /// Next line, which must start with `tag`; returns the remaining tokens.
    fn expect(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        match self.peek() {
            Some(t) if t[0] == tag => {
                let rest = t[1..].to_vec();
                self.pos += 1;
                Ok(rest)
            }
            Some(t) => Err(self.err(format!("expected `{tag}`, found `{}`", t[0]))),
            None => Err(self.err(format!("expected `{tag}`, found end of input"))),
        }
    }

    fn parse<T: FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }

    fn parse_all<T: FromStr>(&self, toks: &[&str]) -> Result<Vec<T>> {
        toks.iter().map(|t| self.parse(t)).collect()
    }

    /// Parses with the line number of the line just consumed.
    fn back<T>(&mut self, f: impl FnOnce(&Self) -> Result<T>) -> Result<T> {
        self.pos -= 1;
        let r = f(self);
        self.pos += 1;
        r
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let toks = self.expect("tensor")?;
        self.back(|r| {
            let dims_tok = toks.first().ok_or_else(|| r.err("tensor without shape"))?;
            let shape: Vec<usize> = r.parse_all(&dims_tok.split(',').collect::<Vec<_>>())?;
            let data: Vec<f64> = r.parse_all(&toks[1..])?;
            Tensor::new(shape, data).map_err(|e| r.err(e.to_string()))
        })
    }

    fn network(&mut self, name: &str) -> Result<Network> {
        let toks = self.expect("net")?;
        let count: usize = self.back(|r| {
            if toks.len() != 2 || toks[0] != name {
                return Err(r.err(format!("expected network `{name}`")));
            }
            r.parse(toks[1])
        })?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let toks = self.expect("layer")?;
            let kind = self.back(|r| {
                let nums = |n: usize| -> Result<Vec<usize>> {
                    if toks.len() != n + 1 {
                        return Err(r.err(format!("layer `{}` takes {n} fields", toks[0])));
                    }
                    r.parse_all(&toks[1..])
                };
                Ok(match toks.first().copied() {
                    Some("dense") => {
                        let v = nums(2)?;
                        LayerKind::Dense { inputs: v[0], outputs: v[1] }
                    }
                    Some("prelu") => LayerKind::PRelu { channels: nums(1)?[0] },
                    Some("instance_norm") => LayerKind::InstanceNorm {
                        eps: r.parse(toks.get(1).ok_or_else(|| r.err("missing eps"))?)?,
                    },
                    Some("conv_transpose1d") => {
                        let v = nums(5)?;
                        LayerKind::ConvTranspose1d {
                            in_channels: v[0],
                            out_channels: v[1],
                            kernel: v[2],
                            stride: v[3],
                            padding: v[4],
                        }
                    }
                    Some("softmax_head") => LayerKind::SoftmaxHead { classes: nums(1)?[0] },
                    other => return Err(r.err(format!("unknown layer kind {other:?}"))),
                })
            })?;
            let params = (0..kind.param_shapes().len()).map(|_| self.tensor()).collect::<Result<Vec<_>>>()?;
            layers.push(self.back(|r| Layer::from_parts(kind, params).map_err(|e| r.err(e.to_string())))?);
        }
        Ok(Network::new(layers))
    }
}

fn parse_config(pairs: &[(String, String)]) -> std::result::Result<TrainConfig, String> {
    let mut cfg = TrainConfig::default();
    let mut adam = AdamConfig::default();
    fn num<T: FromStr>(k: &str, v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("bad value `{v}` for config `{k}`"))
    }
    fn list(k: &str, v: &str) -> std::result::Result<Vec<usize>, String> {
        if v == "-" {
            return Ok(Vec::new());
        }
        v.split(',').map(|x| num(k, x)).collect()
    }
    for (k, v) in pairs {
        match k.as_str() {
            "epochs" => cfg.epochs = num(k, v)?,
            "batch_size" => cfg.batch_size = num(k, v)?,
            "latent_dim" => cfg.latent_dim = num(k, v)?,
            "pi" => cfg.pi = num(k, v)?,
            "stats_refresh" => cfg.stats_refresh = num(k, v)?,
            "lr" => adam.lr = num(k, v)?,
            "beta1" => adam.beta1 = num(k, v)?,
            "beta2" => adam.beta2 = num(k, v)?,
            "adam_eps" => adam.eps = num(k, v)?,
            "density_weight" => cfg.density_weight = num(k, v)?,
            "density_quantile" => cfg.density_quantile = num(k, v)?,
            "pretrain_epochs" => cfg.pretrain_epochs = num(k, v)?,
            "val_frac" => cfg.val_frac = num(k, v)?,
            "target_fpr" => cfg.target_fpr = num(k, v)?,
            "generator_hidden" => cfg.generator_hidden = list(k, v)?,
            "discriminator_hidden" => cfg.discriminator_hidden = list(k, v)?,
            "audit_samples" => cfg.audit_samples = num(k, v)?,
            "select_best" => cfg.select_best = num(k, v)?,
            "seed" => cfg.seed = num(k, v)?,
            other => return Err(format!("unknown config key `{other}`")),
        }
    }
    cfg.adam = adam;
    Ok(cfg)
}

pub fn parse_checkpoint(text: &str) -> Result<TrainedModel> {
    let mut r = Reader::new(text);
    let head = r.expect(MAGIC)?;
    let version: u32 = r.back(|r| r.parse(head.first().copied().unwrap_or("")))?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let mut pairs = Vec::new();
    while r.peek().is_some_and(|t| t[0] == "config") {
        let t = r.expect("config")?;
        if t.len() != 2 {
            return Err(r.back(|r| Ok(r.err("config lines hold one key and one value")))?);
        }
        pairs.push((t[0].to_string(), t[1].to_string()));
    }
    let config = parse_config(&pairs).map_err(|m| r.err(m))?;
    let mut meta = std::collections::HashMap::new();
    while r.peek().is_some_and(|t| t[0] == "meta") {
        let t = r.expect("meta")?;
        if t.len() != 2 {
            return Err(r.back(|r| Ok(r.err("meta lines hold one key and one value")))?);
        }
        meta.insert(t[0], t[1]);
    }
    let get = |r: &Reader, k: &str| -> Result<&str> { meta.get(k).copied().ok_or_else(|| r.err(format!("missing meta `{k}`"))) };
    let classes: usize = r.parse(get(&r, "classes")?)?;
    let width: usize = r.parse(get(&r, "width")?)?;
    let latent_dim: usize = r.parse(get(&r, "latent_dim")?)?;
    let tau: f64 = r.parse(get(&r, "tau")?)?;
    let target_fpr: f64 = r.parse(get(&r, "target_fpr")?)?;
    let achieved_fpr: f64 = r.parse(get(&r, "achieved_fpr")?)?;
    let flagged: bool = r.parse(get(&r, "flagged")?)?;

    let mut vectors = std::collections::HashMap::new();
    while r.peek().is_some_and(|t| t[0] == "vector") {
        let t = r.expect("vector")?;
        let vals: Vec<f64> = r.back(|r| r.parse_all(&t[1..]))?;
        vectors.insert(t[0].to_string(), vals);
    }
    let deltas = vectors.remove("deltas").ok_or_else(|| r.err("missing vector `deltas`"))?;
    let standardizer = match (vectors.remove("std_mean"), vectors.remove("std_std")) {
        (Some(mean), Some(std)) if mean.len() == width && std.len() == width => Some(Standardizer { mean, std }),
        (None, None) => None,
        _ => return Err(r.err("standardizer vectors are incomplete or the wrong length")),
    };

    let gen_net = r.network("generator")?;
    let body = r.network("disc_body")?;
    let head = r.network("disc_head")?;
    let generator = GeneratorNet::from_network(gen_net, latent_dim, classes, width).map_err(|e| r.err(e.to_string()))?;
    let disc = DiscriminatorNet::from_parts(body, head, classes, width).map_err(|e| r.err(e.to_string()))?;

    let lt = r.expect("latent")?;
    let latent = match lt.as_slice() {
        ["standard_normal", dim] => LatentSource::StandardNormal { dim: r.back(|r| r.parse(dim))? },
        ["fitted", n] => {
            let n: usize = r.back(|r| r.parse(n))?;
            let mut stats = Vec::with_capacity(n);
            for _ in 0..n {
                let t = r.expect("class_latent")?;
                let c = r.back(|r| {
                    let bar = t.iter().position(|&x| x == "|").ok_or_else(|| r.err("class_latent needs `|`"))?;
                    Ok(ClassLatent {
                        mean: r.parse_all(&t[..bar])?,
                        var: r.parse_all(&t[bar + 1..])?,
                    })
                })?;
                stats.push(c);
            }
            LatentSource::Fitted(LatentStats::from_parts(stats).map_err(|e| r.err(e.to_string()))?)
        }
        _ => return Err(r.back(|r| Ok(r.err("bad latent record")))?),
    };
    let pt = r.expect("projection")?;
    let (pl, pe): (usize, usize) = r.back(|r| {
        if pt.len() != 2 {
            return Err(r.err("projection needs two dimensions"));
        }
        Ok((r.parse(pt[0])?, r.parse(pt[1])?))
    })?;
    let weights = r.tensor()?.into_data();
    let projection = Projection::from_parts(pl, pe, weights).map_err(|e| r.err(e.to_string()))?;
    r.expect("end")?;

    let detector = FaultDetector::new(disc, standardizer, tau, target_fpr).map_err(|e| r.err(e.to_string()))?;
    Ok(TrainedModel {
        detector,
        generator,
        latent,
        projection,
        deltas,
        calibration: Calibration {
            tau,
            target_fpr,
            achieved_fpr,
            flagged,
        },
        history: TrainHistory::default(),
        config,
    })
}
