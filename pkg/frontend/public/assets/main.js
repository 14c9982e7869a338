/** Dashboard entry point: wires the snapshot stream to the DOM. */
import { SnapshotStream } from "./sse.js";
import { buildView } from "./view.js";
import { render, renderBanner, renderIncompatible } from "./render.js";
const root = document.getElementById("dashboard");
const banner = document.getElementById("banner");
if (root && banner) {
    let lastUpdate = null;
    const stream = new SnapshotStream({
        endpoint: "",
        makeSource: (url) => new EventSource(url),
        fetchState: async (url) => {
            const response = await fetch(url);
            if (!response.ok)
                throw new Error(`state fetch failed: ${response.status}`);
            return response.json();
        },
        onSnapshot: (snapshot) => {
            const view = buildView(snapshot);
            lastUpdate = view.lastUpdate;
            root.innerHTML = render(view);
        },
        onStatus: (status) => {
            if (status.state === "incompatible") {
                root.innerHTML = renderIncompatible(status.detail ?? "schema mismatch");
                banner.innerHTML = "";
                return;
            }
            banner.innerHTML = renderBanner(status.state, status.detail ?? "", lastUpdate);
        },
    });
    stream.connect();
}
