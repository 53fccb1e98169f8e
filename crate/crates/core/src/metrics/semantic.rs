use rayon::prelude::*;
use serde::Serialize;

use crate::volume::Volume;
use crate::{Error, Result};

const BLOCK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemanticScores {
    pub jaccard: f64,
    pub dsc: f64,
}

/// Jaccard `|A∩B| / |A∪B|` and Dice `2|A∩B| / (|A| + |B|)` of two binary masks.
/// Two empty masks agree perfectly and score (1, 1).
pub fn semantic_metrics(pred: &Volume<u8>, gt: &Volume<u8>) -> Result<SemanticScores> {
    pred.ensure_same_dims(gt)?;
    let (a, b, inter, bad) = pred
        .as_slice()
        .par_chunks(BLOCK)
        .zip(gt.as_slice().par_chunks(BLOCK))
        .map(|(p, g)| {
            let mut c = (0u64, 0u64, 0u64, false);
            for (&x, &y) in p.iter().zip(g) {
                c.3 |= x > 1 || y > 1;
                c.0 += u64::from(x);
                c.1 += u64::from(y);
                c.2 += u64::from(x & y);
            }
            c
        })
        .reduce(
            || (0, 0, 0, false),
            |l, r| (l.0 + r.0, l.1 + r.1, l.2 + r.2, l.3 || r.3),
        );
    if bad {
        return Err(Error::Domain(
            "semantic masks must hold only 0 and 1".into(),
        ));
    }
    if a + b == 0 {
        return Ok(SemanticScores {
            jaccard: 1.0,
            dsc: 1.0,
        });
    }
    Ok(SemanticScores {
        jaccard: inter as f64 / (a + b - inter) as f64,
        dsc: 2.0 * inter as f64 / (a + b) as f64,
    })
}
