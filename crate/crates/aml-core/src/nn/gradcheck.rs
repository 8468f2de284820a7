use super::{ParamId, ParamStore};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Compares the gradients currently stored in `store` against central finite
/// differences of `loss_fn`, over at most `max_coords` sampled trainable
/// coordinates, and returns the maximum relative error.
///
/// The caller runs its own forward+backward to populate the gradients first;
/// `loss_fn` must evaluate the loss without touching them.
///
/// Coordinates sitting on an activation kink (the one-sided slopes
/// disagree, e.g. a pre-activation at exactly zero) have no two-sided
/// derivative to compare against and are excluded.
pub fn grad_check<F>(
    mut loss_fn: F,
    store: &mut ParamStore,
    h: f64,
    max_coords: usize,
    seed: u64,
) -> f64
where
    F: FnMut(&mut ParamStore) -> f64,
{
    let analytic: Vec<(ParamId, Vec<f64>)> = store
        .iter()
        .filter(|(_, t)| t.trainable)
        .map(|(id, t)| (id, t.grad.data().to_vec()))
        .collect();

    let mut coords: Vec<(ParamId, usize)> = Vec::new();
    for (id, grads) in &analytic {
        for k in 0..grads.len() {
            coords.push((*id, k));
        }
    }
    if coords.len() > max_coords {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = sample(&mut rng, coords.len(), max_coords);
        let mut chosen: Vec<(ParamId, usize)> = picked.into_iter().map(|i| coords[i]).collect();
        chosen.sort_by_key(|&(id, k)| (id.0, k));
        coords = chosen;
    }

    let base = loss_fn(store);
    let mut max_err = 0.0f64;
    for (id, k) in coords {
        let old = store.get(id).value.data()[k];
        store.get_mut(id).value.data_mut()[k] = old + h;
        let plus = loss_fn(store);
        store.get_mut(id).value.data_mut()[k] = old - h;
        let minus = loss_fn(store);
        store.get_mut(id).value.data_mut()[k] = old;

        let right = (plus - base) / h;
        let left = (base - minus) / h;
        let slope_scale = right.abs().max(left.abs()).max(1e-3);
        if (right - left).abs() > 0.05 * slope_scale {
            continue;
        }

        let fd = (plus - minus) / (2.0 * h);
        let ad = analytic
            .iter()
            .find(|(pid, _)| *pid == id)
            .map(|(_, g)| g[k])
            .unwrap_or(0.0);
        let denom = fd.abs().max(ad.abs()).max(1e-3);
        let err = (fd - ad).abs() / denom;
        if err > max_err {
            max_err = err;
        }
    }
    max_err
}
