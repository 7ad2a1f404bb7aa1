import { ApiClient } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { FilterScreen } from "./filterScreen.js";
import { LabelScreen } from "./labelScreen.js";
import { VerdictStore } from "./state.js";
import { STAGE_FILTER, STAGE_LABEL } from "./types.js";

const TABS = [
  { id: "filter", label: "Filter relations" },
  { id: "label", label: "Label sentences" },
  { id: "dashboard", label: "Dashboard" },
] as const;

export function boot(root: HTMLElement = document.body): void {
  const api = new ApiClient("");
  const store = new VerdictStore();

  const bar = document.createElement("div");
  bar.className = "top-bar";
  const annotatorInput = document.createElement("input");
  annotatorInput.className = "annotator";
  annotatorInput.placeholder = "annotator id";
  annotatorInput.value = window.localStorage.getItem("kitgi:annotator") ?? "";
  annotatorInput.addEventListener("change", () => {
    window.localStorage.setItem("kitgi:annotator", annotatorInput.value.trim());
  });
  bar.appendChild(annotatorInput);

  const panel = document.createElement("div");
  panel.className = "panel";
  let dashboard: Dashboard | null = null;

  const open = (tab: (typeof TABS)[number]["id"]) => {
    dashboard?.stop();
    dashboard = null;
    panel.innerHTML = "";
    const annotator = annotatorInput.value.trim();
    if (tab !== "dashboard" && !annotator) {
      panel.innerHTML = '<div class="empty">enter an annotator id first</div>';
      return;
    }
    if (tab === "filter") {
      void new FilterScreen(panel, api, store, annotator).start();
    } else if (tab === "label") {
      void new LabelScreen(panel, api, annotator).loadNext();
    } else {
      dashboard = new Dashboard(panel, api);
      dashboard.start();
    }
  };

  for (const tab of TABS) {
    const button = document.createElement("button");
    button.className = `tab tab-${tab.id}`;
    button.textContent = tab.label;
    button.addEventListener("click", () => open(tab.id));
    bar.appendChild(button);
  }

  root.appendChild(bar);
  root.appendChild(panel);
  open("dashboard");
}

if (typeof document !== "undefined" && document.getElementById("kitgi-app")) {
  boot(document.getElementById("kitgi-app")!);
}

export { ApiClient, Dashboard, FilterScreen, LabelScreen, VerdictStore, STAGE_FILTER, STAGE_LABEL };
