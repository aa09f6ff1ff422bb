//! Planted synthetic streams.
//!
//! A scenario is a run of contiguous epochs. Inside an epoch every Gaussian
//! source moves on a straight line from `from` to `to` and emits a fixed
//! number of points per second; uniform noise fills the rest of the rate.
//! Point `k` carries timestamp `k / v`.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cellspace::StreamPoint;
use crate::error::{Error, Result};

pub const NOISE_LABEL: &str = "noise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub label: String,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub sigma: f64,
    /// Points per second.
    pub rate: f64,
}

impl Source {
    pub fn fixed(label: &str, at: &[f64], sigma: f64, rate: f64) -> Self {
        Self::moving(label, at, at, sigma, rate)
    }

    pub fn moving(label: &str, from: &[f64], to: &[f64], sigma: f64, rate: f64) -> Self {
        Source {
            label: label.to_string(),
            from: from.to_vec(),
            to: to.to_vec(),
            sigma,
            rate,
        }
    }

    fn center(&self, frac: f64) -> impl Iterator<Item = f64> + '_ {
        self.from.iter().zip(&self.to).map(move |(a, b)| a + (b - a) * frac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub start: f64,
    pub end: f64,
    pub sources: Vec<Source>,
    /// Uniform noise rate, points per second.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedScenario {
    pub name: String,
    pub dim: usize,
    pub v: f64,
    /// Noise box, per dimension.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub epochs: Vec<Epoch>,
}

impl PlantedScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(format!("{}: {m}", self.name)));
        if self.dim == 0 || self.lo.len() != self.dim || self.hi.len() != self.dim {
            return bad("noise box does not match the dimension".into());
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return bad("empty noise box".into());
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("rate v = {} must be > 0", self.v));
        }
        if self.epochs.is_empty() {
            return bad("no epochs".into());
        }
        let mut t = 0.0;
        for (i, e) in self.epochs.iter().enumerate() {
            if e.start != t || !(e.end > e.start) {
                return bad(format!("epoch {i} spans [{}, {}), expected to start at {t}", e.start, e.end));
            }
            t = e.end;
            let total: f64 = e.noise + e.sources.iter().map(|s| s.rate).sum::<f64>();
            if (total - self.v).abs() > 1e-9 * self.v {
                return bad(format!("epoch {i} rates sum to {total}, not v = {}", self.v));
            }
            if e.noise < 0.0 {
                return bad(format!("epoch {i} has negative noise rate"));
            }
            for s in &e.sources {
                if s.from.len() != self.dim || s.to.len() != self.dim {
                    return bad(format!("source {} has the wrong dimension", s.label));
                }
                if !(s.sigma > 0.0) || s.rate < 0.0 {
                    return bad(format!("source {} needs sigma > 0 and rate >= 0", s.label));
                }
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.end)
    }

    pub fn len(&self) -> usize {
        (self.duration() * self.v).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The stream, deterministic in `seed`.
    pub fn generate(&self, seed: u64) -> Result<Vec<StreamPoint>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(self.len());
        let mut epoch = 0;
        let mut pick = self.picker(epoch)?;
        for k in 0..self.len() {
            let t = k as f64 / self.v;
            while t >= self.epochs[epoch].end && epoch + 1 < self.epochs.len() {
                epoch += 1;
                pick = self.picker(epoch)?;
            }
            let e = &self.epochs[epoch];
            let which = pick.sample(&mut rng);
            let point = match e.sources.get(which) {
                Some(s) => {
                    let frac = (t - e.start) / (e.end - e.start);
                    let g = Normal::new(0.0, s.sigma).expect("validated sigma");
                    let coords = s.center(frac).map(|c| c + g.sample(&mut rng)).collect();
                    StreamPoint::labeled(coords, t, &s.label)
                }
                None => {
                    let coords = self
                        .lo
                        .iter()
                        .zip(&self.hi)
                        .map(|(&l, &h)| rng.random_range(l..h))
                        .collect();
                    StreamPoint::labeled(coords, t, NOISE_LABEL)
                }
            };
            out.push(point);
        }
        Ok(out)
    }

    /// Source index by rate share; the index past the sources is noise.
    fn picker(&self, epoch: usize) -> Result<WeightedIndex<f64>> {
        let e = &self.epochs[epoch];
        let weights: Vec<f64> = e.sources.iter().map(|s| s.rate).chain([e.noise]).collect();
        WeightedIndex::new(weights).map_err(|err| Error::Scenario(format!("epoch {epoch}: {err}")))
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "sds" => Ok(sds()),
            "hds" => Ok(hds()),
            _ => Err(Error::Scenario(format!("unknown scenario {name:?}; built-ins are sds, hds"))),
        }
    }
}

pub const BUILTINS: [&str; 2] = ["sds", "hds"];

/// Planted times of the `sds` narrative, in seconds.
pub const SDS_MERGE: f64 = 9.0;
pub const SDS_EMERGE: f64 = 11.0;
pub const SDS_FADE: f64 = 11.5;
pub const SDS_SPLIT: f64 = 15.0;

/// 2-D evolution over 20 s at 1000 points/s.
///
/// `a` and `b` start 20 apart and close in to 3 apart by [`SDS_MERGE`], then
/// coincide at 10 s. `c` appears at [`SDS_EMERGE`]; `a` and `b` go silent at
/// [`SDS_FADE`] and their cells decay away over the next few seconds. From
/// [`SDS_SPLIT`] the halves `c1`, `c2` of `c` drift apart.
pub fn sds() -> PlantedScenario {
    const V: f64 = 1000.0;
    const NOISE: f64 = 20.0;
    const SIGMA: f64 = 1.5;
    let half = (V - NOISE) / 2.0;
    let y = 10.0;
    let c = [15.0, 25.0];
    let epoch = |start: f64, end: f64, sources: Vec<Source>| Epoch {
        start,
        end,
        noise: V - sources.iter().map(|s| s.rate).sum::<f64>(),
        sources,
    };
    // `b` mirrors `a` around x = 15
    let pair = |from: f64, to: f64, rate: f64| {
        vec![
            Source::moving("a", &[15.0 - from, y], &[15.0 - to, y], SIGMA, rate),
            Source::moving("b", &[15.0 + from, y], &[15.0 + to, y], SIGMA, rate),
        ]
    };
    let mut overlap = pair(0.0, 0.0, half / 2.0);
    overlap.push(Source::fixed("c", &c, SIGMA, half));
    PlantedScenario {
        name: "sds".into(),
        dim: 2,
        v: V,
        lo: vec![0.0, 0.0],
        hi: vec![30.0, 30.0],
        epochs: vec![
            epoch(0.0, SDS_MERGE, pair(10.0, 1.5, half)),
            epoch(SDS_MERGE, 10.0, pair(1.5, 0.0, half)),
            epoch(10.0, SDS_EMERGE, pair(0.0, 0.0, half)),
            epoch(SDS_EMERGE, SDS_FADE, overlap),
            epoch(SDS_FADE, SDS_SPLIT, vec![Source::fixed("c", &c, SIGMA, V - NOISE)]),
            epoch(
                SDS_SPLIT,
                20.0,
                vec![
                    Source::moving("c1", &c, &[5.0, 25.0], SIGMA, half),
                    Source::moving("c2", &c, &[25.0, 25.0], SIGMA, half),
                ],
            ),
        ],
    }
}

/// Ten Gaussian sources in 20 dimensions, fixed centers drawn uniformly in
/// the unit-100 cube, equal shares, 1% noise, 20 s at 1000 points/s.
pub fn hds() -> PlantedScenario {
    const V: f64 = 1000.0;
    const D: usize = 20;
    const K: usize = 10;
    let noise = V * 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(0x68_64_73);
    let sources = (0..K)
        .map(|i| {
            let at: Vec<f64> = (0..D).map(|_| rng.random_range(0.0..100.0)).collect();
            Source::fixed(&format!("s{i}"), &at, 2.0, (V - noise) / K as f64)
        })
        .collect();
    PlantedScenario {
        name: "hds".into(),
        dim: D,
        v: V,
        lo: vec![0.0; D],
        hi: vec![100.0; D],
        epochs: vec![Epoch {
            start: 0.0,
            end: 20.0,
            sources,
            noise,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTINS {
            PlantedScenario::builtin(name).unwrap().validate().unwrap();
        }
        assert!(PlantedScenario::builtin("nope").is_err());
    }

    #[test]
    fn sds_shape() {
        let s = sds();
        assert_eq!(s.len(), 20_000);
        let pts = s.generate(7).unwrap();
        assert_eq!(pts.len(), 20_000);
        assert_eq!(pts[1].t, 1e-3);
        assert!(pts.windows(2).all(|w| w[0].t < w[1].t));
        assert!(pts.iter().all(|p| p.coords.len() == 2 && p.label.is_some()));
    }

    #[test]
    fn seeded_determinism() {
        let s = sds();
        assert_eq!(s.generate(7).unwrap(), s.generate(7).unwrap());
        assert_ne!(s.generate(7).unwrap(), s.generate(8).unwrap());
    }

    #[test]
    fn labels_follow_epochs() {
        let pts = sds().generate(1).unwrap();
        let has = |lo: f64, hi: f64, label: &str| {
            pts.iter().any(|p| p.t >= lo && p.t < hi && p.label.as_deref() == Some(label))
        };
        assert!(has(0.0, 9.0, "a") && has(0.0, 9.0, "b") && !has(0.0, 11.0, "c"));
        assert!(has(11.0, 11.5, "c") && has(11.0, 11.5, "a") && !has(11.5, 20.0, "a"));
        assert!(has(15.0, 20.0, "c1") && !has(0.0, 15.0, "c1"));
    }

    #[test]
    fn rates_must_sum_to_v() {
        let mut s = sds();
        s.epochs[0].noise += 1.0;
        assert!(matches!(s.validate(), Err(Error::Scenario(_))));
        let mut s = sds();
        s.epochs[1].start = 8.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn moving_center_interpolates() {
        let s = Source::moving("x", &[0.0, 0.0], &[10.0, -4.0], 1.0, 1.0);
        let c: Vec<f64> = s.center(0.25).collect();
        assert_eq!(c, vec![2.5, -1.0]);
    }
}
