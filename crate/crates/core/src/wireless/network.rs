use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consts::{FORMAT_VERSION, PATHLOSS_EXPONENT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Adhoc,
    Multicell,
}

/// Static placement of `m` transmitters and `n` receivers with the
/// transmitter-to-receiver pairing and the resulting path-loss gains.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub kind: TopologyKind,
    pub tx_pos: Vec<[f64; 2]>,
    pub rx_pos: Vec<[f64; 2]>,
    /// `pairing[i]` is the receiver serving transmitter `i`.
    pub pairing: Vec<usize>,
    pub(crate) pathloss: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    version: u32,
    kind: TopologyKind,
    m: usize,
    n: usize,
    tx_pos: Vec<[f64; 2]>,
    rx_pos: Vec<[f64; 2]>,
    pairing: Vec<usize>,
}

impl NetworkModel {
    pub fn new(
        kind: TopologyKind,
        tx_pos: Vec<[f64; 2]>,
        rx_pos: Vec<[f64; 2]>,
        pairing: Vec<usize>,
    ) -> Result<Self> {
        let m = tx_pos.len();
        if pairing.len() != m {
            return Err(Error::Generation(format!(
                "{} pairings for {m} transmitters",
                pairing.len()
            )));
        }
        if let Some(&bad) = pairing.iter().find(|&&r| r >= rx_pos.len()) {
            return Err(Error::Generation(format!("pairing refers to missing receiver {bad}")));
        }
        let mut pathloss = Vec::with_capacity(m * m);
        for t in &tx_pos {
            for &r in &pairing {
                let rx = rx_pos[r];
                let d = ((t[0] - rx[0]).powi(2) + (t[1] - rx[1]).powi(2)).sqrt();
                let g = d.powf(-PATHLOSS_EXPONENT);
                if !g.is_finite() {
                    return Err(Error::Generation("transmitter coincides with a receiver".into()));
                }
                pathloss.push(g);
            }
        }
        Ok(Self {
            kind,
            tx_pos,
            rx_pos,
            pairing,
            pathloss,
        })
    }

    pub fn m(&self) -> usize {
        self.tx_pos.len()
    }

    pub fn n(&self) -> usize {
        self.rx_pos.len()
    }

    /// `h^p_{ij}`: gain from transmitter `i` to the receiver serving `j`.
    pub fn pathloss(&self, i: usize, j: usize) -> f64 {
        self.pathloss[i * self.m() + j]
    }

    pub fn pathloss_entries(&self) -> &[f64] {
        &self.pathloss
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TopologyFile {
            version: FORMAT_VERSION,
            kind: self.kind,
            m: self.m(),
            n: self.n(),
            tx_pos: self.tx_pos.clone(),
            rx_pos: self.rx_pos.clone(),
            pairing: self.pairing.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported topology version {}", file.version)));
        }
        if file.m != file.tx_pos.len() || file.n != file.rx_pos.len() {
            return Err(Error::Format("declared sizes disagree with positions".into()));
        }
        Self::new(file.kind, file.tx_pos, file.rx_pos, file.pairing)
    }
}

/// Ad-hoc pairs. Transmitters fall uniformly in `[-s, s]²` with
/// `s = m_base·sqrt(m/m_base)/density`; each receiver falls uniformly in a box
/// of half-width `m_base/4` around its transmitter. With `density = 1` and
/// `m_base = m` this is the `[-m, m]²` drop.
pub fn generate_adhoc<R: Rng + ?Sized>(
    m: usize,
    rng: &mut R,
    density: f64,
    size_ref: usize,
) -> Result<NetworkModel> {
    if m < 2 {
        return Err(Error::Generation(format!("need at least 2 pairs, got {m}")));
    }
    if !(density > 0.0 && density.is_finite()) || size_ref == 0 {
        return Err(Error::Generation(format!(
            "density factor must be positive and size_ref nonzero (got {density}, {size_ref})"
        )));
    }
    let half = adhoc_half_width(m, density, size_ref);
    let offset = size_ref as f64 / 4.0;
    let mut tx = Vec::with_capacity(m);
    let mut rx = Vec::with_capacity(m);
    for _ in 0..m {
        let t = [rng.random_range(-half..half), rng.random_range(-half..half)];
        let r = [
            t[0] + rng.random_range(-offset..offset),
            t[1] + rng.random_range(-offset..offset),
        ];
        tx.push(t);
        rx.push(r);
    }
    NetworkModel::new(TopologyKind::Adhoc, tx, rx, (0..m).collect())
}

pub(crate) fn adhoc_half_width(m: usize, density: f64, size_ref: usize) -> f64 {
    let base = size_ref as f64;
    base * (m as f64 / base).sqrt() / density
}

/// Multi-cell uplink: `n` base stations at the centres of a near-square grid
/// over `[-m, m]²`, with `m/n` users dropped uniformly inside each cell.
pub fn generate_multicell<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<NetworkModel> {
    if n == 0 || m == 0 || !m.is_multiple_of(n) {
        return Err(Error::Generation(format!("{n} cells do not evenly divide {m} users")));
    }
    let half = m as f64;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (w, h) = (2.0 * half / cols as f64, 2.0 * half / rows as f64);
    let per_cell = m / n;
    let mut rx = Vec::with_capacity(n);
    let mut tx = Vec::with_capacity(m);
    let mut pairing = Vec::with_capacity(m);
    for cell in 0..n {
        let (cx, cy) = ((cell % cols) as f64, (cell / cols) as f64);
        let x0 = -half + cx * w;
        let y0 = -half + cy * h;
        rx.push([x0 + w / 2.0, y0 + h / 2.0]);
        for _ in 0..per_cell {
            tx.push([rng.random_range(x0..x0 + w), rng.random_range(y0..y0 + h)]);
            pairing.push(cell);
        }
    }
    NetworkModel::new(TopologyKind::Multicell, tx, rx, pairing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn adhoc_geometry() {
        let mut rng = stream(1, Stream::Topology);
        let net = generate_adhoc(50, &mut rng, 1.0, 50).unwrap();
        assert_eq!((net.m(), net.n()), (50, 50));
        for (t, r) in net.tx_pos.iter().zip(&net.rx_pos) {
            assert!(t.iter().all(|c| c.abs() <= 50.0));
            assert!((t[0] - r[0]).abs() <= 12.5 && (t[1] - r[1]).abs() <= 12.5);
        }
        for i in 0..50 {
            for j in 0..50 {
                let (t, r) = (net.tx_pos[i], net.rx_pos[net.pairing[j]]);
                let d = ((t[0] - r[0]).powi(2) + (t[1] - r[1]).powi(2)).sqrt();
                assert_eq!(net.pathloss(i, j), d.powf(-2.2));
            }
        }
        assert!((adhoc_half_width(75, 1.0, 50) - 61.237_243_569_579_45).abs() < 1e-9);
        assert!(generate_adhoc(1, &mut rng, 1.0, 1).is_err());
        assert!(generate_adhoc(5, &mut rng, 0.0, 5).is_err());
    }

    #[test]
    fn adhoc_is_deterministic() {
        let a = generate_adhoc(30, &mut stream(9, Stream::Topology), 1.0, 30).unwrap();
        let b = generate_adhoc(30, &mut stream(9, Stream::Topology), 1.0, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multicell_pairing() {
        let mut rng = stream(2, Stream::Topology);
        let net = generate_multicell(50, 5, &mut rng).unwrap();
        assert_eq!(net.n(), 5);
        for cell in 0..5 {
            assert_eq!(net.pairing.iter().filter(|&&r| r == cell).count(), 10);
        }
        let single = generate_multicell(8, 1, &mut rng).unwrap();
        assert!(single.pairing.iter().all(|&r| r == 0));
        let one_each = generate_multicell(9, 9, &mut rng).unwrap();
        let mut seen = one_each.pairing.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..9).collect::<Vec<_>>());
        assert!(generate_multicell(10, 3, &mut rng).is_err());
    }

    #[test]
    fn topology_file_roundtrip() {
        let net = generate_adhoc(12, &mut stream(3, Stream::Topology), 1.0, 12).unwrap();
        let back = NetworkModel::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
        let bad = net.to_json().unwrap().replace("\"version\": 1", "\"version\": 7");
        assert!(NetworkModel::from_json(&bad).is_err());
    }
}
