/**
 * Snapshot wire schema (susbp.live/1) as consumed by the dashboard.
 *
 * Parsing picks exactly the fields the dashboard knows; unknown fields are
 * ignored, and a version mismatch raises so the UI can refuse to render a
 * partial or misinterpreted view.
 */
export const SUPPORTED_SCHEMA = "susbp.live/1";
export class SchemaVersionError extends Error {
    constructor(found) {
        super(`incompatible snapshot schema: expected ${SUPPORTED_SCHEMA}, got ${String(found)}`);
        this.name = "SchemaVersionError";
    }
}
function asNumber(value, fallback = 0) {
    return typeof value === "number" && Number.isFinite(value) ? value : fallback;
}
function asString(value, fallback = "") {
    return typeof value === "string" ? value : fallback;
}
/** Validate and narrow a raw JSON object to the known snapshot fields. */
export function parseSnapshot(raw) {
    const obj = raw;
    if (!obj || typeof obj !== "object" || obj.schema !== SUPPORTED_SCHEMA) {
        throw new SchemaVersionError(obj ? obj.schema : raw);
    }
    const targetsRaw = (obj.targets ?? {});
    const range = Array.isArray(targetsRaw.amount_ml_range)
        ? targetsRaw.amount_ml_range
        : [3, 5];
    const stepRaw = (obj.current_step ?? {});
    const episodes = Array.isArray(obj.completed_episodes)
        ? obj.completed_episodes
        : [];
    return {
        schema: SUPPORTED_SCHEMA,
        session_id: asString(obj.session_id),
        seq: asNumber(obj.seq),
        steps: Array.isArray(obj.steps) ? obj.steps.map((s) => String(s)) : [],
        current_step: {
            index: asNumber(stepRaw.index),
            name: stepRaw.name == null ? null : String(stepRaw.name),
        },
        episode_active: obj.episode_active === true,
        running_duration_s: asNumber(obj.running_duration_s),
        running_amount_g: asNumber(obj.running_amount_g),
        running_amount_ml: asNumber(obj.running_amount_ml),
        fill_level_fraction: asNumber(obj.fill_level_fraction, 1),
        completed_episodes: episodes.map((e) => ({
            start: asString(e.start),
            end: asString(e.end),
            duration_s: asNumber(e.duration_s),
            amount_g: asNumber(e.amount_g),
            amount_ml: asNumber(e.amount_ml),
            quality: Array.isArray(e.quality) ? e.quality.map((q) => String(q)) : [],
            case_ref: e.case_ref == null ? null : String(e.case_ref),
        })),
        targets: {
            min_duration_s: asNumber(targetsRaw.min_duration_s, 30),
            amount_ml_range: [asNumber(range[0], 3), asNumber(range[1], 5)],
        },
        density_g_per_ml: asNumber(obj.density_g_per_ml, 0.85),
        last_update: obj.last_update == null ? null : String(obj.last_update),
        refill_count: asNumber(obj.refill_count),
    };
}
