/**
 * Pure derivation of display values from a snapshot.
 *
 * Nothing here alters measured values; the only computation on top of the
 * wire data is the g-to-ml conversion using the density the snapshot
 * itself publishes, and the gauge fractions against the published targets.
 */
const clamp01 = (x) => Math.max(0, Math.min(1, x));
export function durationGauge(snapshot) {
    const target = snapshot.targets.min_duration_s;
    const value = snapshot.episode_active ? snapshot.running_duration_s : 0;
    return {
        value,
        target,
        fraction: clamp01(target > 0 ? value / target : 0),
        status: !snapshot.episode_active ? "idle" : value >= target ? "met" : "below-target",
    };
}
export function amountGauge(snapshot) {
    const [lo, hi] = snapshot.targets.amount_ml_range;
    const value = snapshot.episode_active
        ? snapshot.running_amount_g / snapshot.density_g_per_ml
        : 0;
    let status = "idle";
    if (snapshot.episode_active) {
        status = value < lo ? "below-range" : value > hi ? "above-range" : "in-range";
    }
    return { value, target: hi, fraction: clamp01(hi > 0 ? value / hi : 0), status };
}
/** Session sanitizer total (ml) over completed episodes, excluding rows
 * flagged NegativeAmount (they are displayed, but never summed). */
export function sessionTotalMl(snapshot) {
    return snapshot.completed_episodes
        .filter((e) => !e.quality.includes("NegativeAmount"))
        .reduce((sum, e) => sum + e.amount_ml, 0);
}
export function buildView(snapshot) {
    const index = snapshot.current_step.index;
    return {
        sessionId: snapshot.session_id,
        seq: snapshot.seq,
        episodeActive: snapshot.episode_active,
        durationGauge: durationGauge(snapshot),
        amountGauge: amountGauge(snapshot),
        fillLevelFraction: clamp01(snapshot.fill_level_fraction),
        steps: snapshot.steps.map((name, i) => ({
            name,
            current: i === index,
            done: i < index,
        })),
        history: snapshot.completed_episodes.map((e) => ({
            start: e.start,
            durationS: e.duration_s,
            amountMl: e.amount_ml,
            flags: e.quality,
            flagged: e.quality.length > 0,
            caseRef: e.case_ref,
        })),
        sessionTotalMl: sessionTotalMl(snapshot),
        refillCount: snapshot.refill_count,
        lastUpdate: snapshot.last_update,
    };
}
