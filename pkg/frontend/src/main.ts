// Console bootstrap: session form on top, scan and HBT panels below.

import { Client } from "./api.js";
import { BannerArea, HbtPanel, ScanPanel, reportError } from "./panels.js";
import { Store } from "./state.js";

export interface ConsoleApp {
  store: Store;
  client: Client;
  scanPanel: ScanPanel;
  hbtPanel: HbtPanel;
  createSession: (profile: string, seed: number, demoFast: boolean) => Promise<void>;
}

export function buildConsole(doc: Document, root: HTMLElement, baseUrl = ""): ConsoleApp {
  const client = new Client(baseUrl);
  const store = new Store();

  const header = doc.createElement("header");
  const title = doc.createElement("h1");
  title.textContent = "photonbench operator console";
  header.appendChild(title);

  const form = doc.createElement("div");
  form.className = "controls";
  const profileSelect = doc.createElement("select");
  profileSelect.id = "profile-select";
  for (const name of ["reference", "lowcost"]) {
    const opt = doc.createElement("option");
    opt.value = name;
    opt.textContent = name;
    profileSelect.appendChild(opt);
  }
  const seedInput = doc.createElement("input");
  seedInput.id = "seed-input";
  seedInput.type = "number";
  seedInput.value = "1";
  const demoFast = doc.createElement("input");
  demoFast.id = "demo-fast";
  demoFast.type = "checkbox";
  demoFast.checked = true;
  const createButton = doc.createElement("button");
  createButton.id = "create-session";
  createButton.textContent = "new session";
  const sessionLabel = doc.createElement("span");
  sessionLabel.id = "session-label";
  sessionLabel.textContent = "no session";

  const profileLabel = doc.createElement("label");
  profileLabel.textContent = "profile ";
  profileLabel.appendChild(profileSelect);
  const seedLabel = doc.createElement("label");
  seedLabel.textContent = "seed ";
  seedLabel.appendChild(seedInput);
  const demoLabel = doc.createElement("label");
  demoLabel.textContent = "demo-fast ";
  demoLabel.appendChild(demoFast);
  for (const node of [profileLabel, seedLabel, demoLabel, createButton, sessionLabel]) {
    form.appendChild(node);
  }
  header.appendChild(form);
  root.appendChild(header);

  const banners = new BannerArea(doc, store);
  root.appendChild(banners.root);

  const main = doc.createElement("main");
  const scanPanel = new ScanPanel(doc, client, store);
  const hbtPanel = new HbtPanel(doc, client, store);
  main.appendChild(scanPanel.root);
  main.appendChild(hbtPanel.root);
  root.appendChild(main);

  async function createSession(profile: string, seed: number, fast: boolean): Promise<void> {
    try {
      const session = await client.createSession({ profile, seed, demo_fast: fast });
      store.update({ session, scan: null, histogram: null, fit: null, selected: null });
      sessionLabel.textContent = `session ${session.id} (${session.profile}, ` +
        `${session.n_emitters} emitters)`;
    } catch (err) {
      reportError(store, err);
    }
  }

  createButton.addEventListener("click", () =>
    void createSession(profileSelect.value, Number(seedInput.value) || 0, demoFast.checked),
  );

  return { store, client, scanPanel, hbtPanel, createSession };
}

declare const window: (Window & typeof globalThis) | undefined;

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const rootElement = document.getElementById("app");
  if (rootElement) buildConsole(document, rootElement, "");
}
