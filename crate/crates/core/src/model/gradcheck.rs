use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encode::{AttentionMask, EncodedInput};

use super::forward::{compute_loss, forward, sample_gradient};
use super::params::{ModelConfig, ModelParams};
use super::ModelError;

pub const FD_STEP: f64 = 1e-5;
pub const MIN_COORDS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub max_relative_error: f64,
}

/// A random input of `len` tokens over `vocab` ids with random labels. The
/// mask is open, or a random symmetric one with the diagonal kept when
/// `random_mask` is set.
pub fn probe_input(vocab: usize, len: usize, seed: u64, random_mask: bool) -> EncodedInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = AttentionMask::diagonal(len);
    for i in 0..len {
        for j in 0..i {
            let on = !random_mask || rng.gen_bool(0.5);
            mask.set(i, j, on);
            mask.set(j, i, on);
        }
    }
    EncodedInput {
        ids: (0..len).map(|_| rng.gen_range(0..vocab as u32)).collect(),
        positions: (0..len as u32).collect(),
        mask,
        n_code: len.saturating_sub(2),
        dfg_alignment: vec![],
        edges: vec![],
        labels: [rng.gen(), rng.gen(), rng.gen()],
    }
}

/// `|a − n| / max(|a|, |n|)`, or 0 when both are below 1e-10.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    if analytic.abs() < 1e-10 && numeric.abs() < 1e-10 {
        0.0
    } else {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs())
    }
}

/// Compares the analytic gradient of the loss against central differences
/// on `coords` randomly chosen coordinates of every parameter group (all of
/// them if the group is smaller). Embedding coordinates are drawn from the
/// rows the input actually touches. Dropout is off.
pub fn check_gradients(
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    input: &EncodedInput,
    labels: &[bool; 3],
    coords: usize,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    let mut input = input.clone();
    input.labels = *labels;
    let mut analytic = ModelParams::zeros(cfg);
    let (_, g) = sample_gradient(params, cfg, &input, None)?;
    g.accumulate_into(&mut analytic);

    let loss_at = |p: &ModelParams<f64>| -> Result<f64, ModelError> {
        let out = forward(p, cfg, &input, None)?;
        Ok(compute_loss(&out.probs, labels))
    };

    let d = cfg.d_model;
    let rows_to_coords = |rows: &[u32]| -> Vec<usize> {
        let mut rows: Vec<usize> = rows.iter().map(|&r| r as usize).collect();
        rows.sort_unstable();
        rows.dedup();
        rows.iter().flat_map(|r| r * d..(r + 1) * d).collect()
    };
    let eligible_emb = [rows_to_coords(&input.ids), rows_to_coords(&input.positions)];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let names: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.len()))
        .collect();
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    let mut groups = Vec::new();
    for (gi, (name, len)) in names.iter().enumerate() {
        let eligible: Vec<usize> = match gi {
            0 | 1 => eligible_emb[gi].clone(),
            _ => (0..*len).collect(),
        };
        let picks: Vec<usize> = if eligible.len() <= coords {
            eligible
        } else {
            sample_indices(&mut rng, eligible.len(), coords)
                .into_iter()
                .map(|k| eligible[k])
                .collect()
        };
        let mut worst: f64 = 0.0;
        for &idx in &picks {
            let orig = params.tensors()[gi].1[idx];
            work.tensors_mut()[gi][idx] = orig + FD_STEP;
            let up = loss_at(&work)?;
            work.tensors_mut()[gi][idx] = orig - FD_STEP;
            let down = loss_at(&work)?;
            work.tensors_mut()[gi][idx] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(grads[gi][idx], numeric));
        }
        groups.push(GroupCheck {
            name: name.clone(),
            checked: picks.len(),
            max_relative_error: worst,
        });
    }
    let max_relative_error = groups.iter().map(|g| g.max_relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        groups,
        max_relative_error,
    })
}
