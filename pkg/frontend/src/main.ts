/** Console shell: tab bar plus one mounted view at a time. */

import { ApiClient } from "./api.js";
import { DocsView } from "./docs_view.js";
import { MonitorView } from "./monitor_view.js";
import { QueryView } from "./query_view.js";
import { RestoreView } from "./restore_view.js";

type ViewName = "query" | "monitor" | "restore" | "docs";
const VIEWS: ViewName[] = ["query", "monitor", "restore", "docs"];

function boot(): void {
  const api = new ApiClient();
  const nav = document.getElementById("nav") as HTMLElement;
  const host = document.getElementById("view") as HTMLElement;
  let activeMonitor: MonitorView | null = null;

  async function show(name: ViewName): Promise<void> {
    activeMonitor?.unmount();
    activeMonitor = null;
    host.textContent = "";
    for (const b of nav.querySelectorAll("button")) {
      b.classList.toggle("active", b.dataset.view === name);
    }
    if (name === "query") await new QueryView(host, api).mount();
    else if (name === "monitor") {
      activeMonitor = new MonitorView(host, api);
      activeMonitor.mount();
    } else if (name === "restore") await new RestoreView(host, api).mount();
    else await new DocsView(host, api).mount();
  }

  for (const name of VIEWS) {
    const b = document.createElement("button");
    b.textContent = name;
    b.dataset.view = name;
    b.addEventListener("click", () => {
      location.hash = name;
      void show(name);
    });
    nav.append(b);
  }

  const fromHash = (location.hash.replace(/^#/, "") || "query") as ViewName;
  void show(VIEWS.includes(fromHash) ? fromHash : "query");

  void api.health().then((h) => {
    const badge = document.getElementById("health");
    if (badge) badge.textContent = `${h.status} v${h.store_version}`;
  });
}

document.addEventListener("DOMContentLoaded", boot);
