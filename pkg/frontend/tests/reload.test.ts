import { describe, expect, it } from "vitest";
import { parseSnapshot } from "../src/schema.js";
import { buildView } from "../src/view.js";
import { render } from "../src/render.js";
import fixture from "./fixtures/session.json";

describe("reload reproducibility", () => {
  it("a page reload (GET /state) reproduces the identical view", () => {
    // live path: the last snapshot that arrived over the event stream
    const streamed = fixture.snapshots[fixture.snapshots.length - 1];
    const liveView = buildView(parseSnapshot(streamed));
    // reload path: the one-shot /state answer
    const reloadedView = buildView(parseSnapshot(fixture.final_state));
    expect(reloadedView).toEqual(liveView);
    expect(render(reloadedView)).toBe(render(liveView));
  });

  it("the dashboard is stateless beyond the last snapshot", () => {
    // rendering depends only on the snapshot: same input, same output,
    // regardless of what was rendered before
    const early = buildView(parseSnapshot(fixture.snapshots[0]));
    const late = buildView(parseSnapshot(fixture.final_state));
    const againEarly = buildView(parseSnapshot(fixture.snapshots[0]));
    expect(againEarly).toEqual(early);
    expect(render(againEarly)).toBe(render(early));
    expect(late.history.length).toBeGreaterThan(early.history.length);
  });
});

describe("rendered markup", () => {
  it("shows history rows, flags, and the session total", () => {
    const view = buildView(parseSnapshot(fixture.final_state));
    const html = render(view);
    expect(html).toContain(`session total ${view.sessionTotalMl.toFixed(2)} ml`);
    const rowCount = (html.match(/<tr class=/g) ?? []).length;
    expect(rowCount).toBe(fixture.expected.episode_count);
    expect(html).toContain('class="flagged"');
    expect(html).toContain("NegativeAmount");
  });

  it("highlights the current procedure step", () => {
    const snapshot = parseSnapshot(fixture.final_state);
    const html = render(buildView(snapshot));
    const highlighted = html.match(/<li class="step current">([^<]+)<\/li>/);
    expect(highlighted?.[1]).toBe(snapshot.steps[snapshot.current_step.index]);
  });
});
