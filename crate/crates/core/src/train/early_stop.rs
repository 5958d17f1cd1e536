/// Whether training should stop: true iff none of the last `patience` epochs
/// improved the best-so-far loss by more than `min_delta`.
///
/// The first epoch always counts as an improvement. With a constant loss and
/// patience 100 this fires right after epoch 101.
pub fn early_stop_check(history: &[f64], patience: usize, min_delta: f64) -> bool {
    if history.is_empty() {
        return false;
    }
    let mut best = f64::INFINITY;
    let mut last_improvement = 0;
    for (i, &loss) in history.iter().enumerate() {
        if loss < best - min_delta || (i == 0 && best.is_infinite()) {
            best = best.min(loss);
            last_improvement = i;
        }
    }
    history.len() - 1 - last_improvement >= patience
}
