//! Direct nested-loop evaluation of the transition field of an integer
//! series, for comparison with the library's transform.

#![allow(dead_code)]

pub struct OracleGraph {
    pub bins: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

fn quantile(sorted: &[f64], k: usize, q: usize) -> f64 {
    let n = sorted.len();
    let whole = k * (n - 1) / q;
    let part = k * (n - 1) - whole * q;
    if part == 0 {
        return sorted[whole];
    }
    let f = part as f64 / q as f64;
    sorted[whole] + f * (sorted[whole + 1] - sorted[whole])
}

pub fn oracle(series: &[i64], q: usize) -> OracleGraph {
    let n = series.len();
    let values: Vec<f64> = series.iter().map(|&v| v as f64).collect();
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max = sorted[n - 1];

    let mut cuts: Vec<f64> = Vec::new();
    for k in 1..q {
        let c = quantile(&sorted, k, q);
        if c < max && !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    let q_eff = cuts.len() + 1;

    let mut bins = vec![0usize; n];
    for t in 0..n {
        for c in &cuts {
            if *c < values[t] {
                bins[t] += 1;
            }
        }
    }

    let mut w = vec![vec![0.0f64; q_eff]; q_eff];
    for i in 0..q_eff {
        let mut row_total = 0usize;
        for t in 0..n - 1 {
            if bins[t] == i {
                row_total += 1;
            }
        }
        if row_total == 0 {
            w[i][i] = 1.0;
            continue;
        }
        for j in 0..q_eff {
            let mut c = 0usize;
            for t in 0..n - 1 {
                if bins[t] == i && bins[t + 1] == j {
                    c += 1;
                }
            }
            w[i][j] = c as f64 / row_total as f64;
        }
    }

    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let m = w[bins[a]][bins[b]];
            if m > 0.0 {
                edges.push((a, b));
                weights.push(m);
            }
        }
    }
    OracleGraph { bins, edges, weights }
}

/// Compares the library's field and graph for `series` (integer RSSI
/// values) against [`oracle`]: bins and edge lists exactly, weights to
/// 1e-12, node features against direct scaling.
pub fn compare(series: &[i64], q: usize) -> Result<(), String> {
    use rssi_gat::trace::{normalize, RssiTrace, TraceSchema};

    let schema = TraceSchema::with_length(series.len());
    let samples: Vec<f64> = series.iter().map(|&v| v as f64).collect();
    let trace = RssiTrace::new("oracle", samples, &schema).map_err(|e| e.to_string())?;
    let expected = oracle(series, q);

    let features: Vec<f64> = normalize(&trace, &schema);
    let field = rssi_gat::mtf::mtf(&features, q).map_err(|e| e.to_string())?;
    if field.bins() != expected.bins.as_slice() {
        return Err(format!("bins {:?} != oracle {:?}", field.bins(), expected.bins));
    }
    let graph = rssi_gat::mtf::transform::<f64>(&trace, &schema, Some(q)).map_err(|e| e.to_string())?;
    if graph.edges != expected.edges {
        return Err(format!("{} edges, oracle has {}", graph.edges.len(), expected.edges.len()));
    }
    for (k, (w, o)) in graph.edge_weights.iter().zip(&expected.weights).enumerate() {
        if (w - o).abs() > 1e-12 {
            return Err(format!("edge {k} weight {w} vs oracle {o}"));
        }
    }
    for (t, (&f, &v)) in graph.node_features.iter().zip(series).enumerate() {
        if (f - v as f64 / 128.0).abs() > 1e-15 {
            return Err(format!("feature {t}: {f} for value {v}"));
        }
    }
    Ok(())
}

/// Seeded series of length 3 to 50 with integer values; small value
/// ranges make ties and constant stretches common.
pub fn random_series(rng: &mut impl rand::Rng) -> Vec<i64> {
    let n = rng.gen_range(3..=50);
    let lo = rng.gen_range(0..=120);
    let span = [0, 1, 2, 5, 20, 128 - lo][rng.gen_range(0..6)].min(128 - lo);
    (0..n).map(|_| lo + rng.gen_range(0..=span)).collect()
}

pub fn bin_choices(n: usize) -> [usize; 3] {
    [2, 4, n]
}
