// Entry point: join an existing session (?session=<id>) or create one from
// the setup form, then mount the console.

import { SessionApi } from "./api.js";
import { mountConsole } from "./ui.js";

function serverBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("server") ?? window.location.origin;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const api = new SessionApi(serverBase());
  const params = new URLSearchParams(window.location.search);
  const existing = params.get("session");
  if (existing) {
    await mountConsole(root, api, existing);
    return;
  }

  const form = document.createElement("form");
  form.innerHTML = `
    <h1>Start a session</h1>
    <label>Theme <input name="theme" required placeholder="Discussion theme"></label>
    <label>Experts (one per line, "Name | expertise")
      <textarea name="experts" rows="3"></textarea></label>
    <label>Setting note <input name="setting_note" placeholder="e.g. breakout group 2"></label>
    <button type="submit">Create session</button>
  `;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const experts = String(data.get("experts") ?? "")
      .split("\n")
      .map((line) => line.trim())
      .filter(Boolean)
      .map((line) => {
        const [name, expertise = ""] = line.split("|").map((part) => part.trim());
        return { name, expertise };
      });
    const { session_id } = await api.createSession(
      String(data.get("theme") ?? ""),
      experts,
      String(data.get("setting_note") ?? ""),
    );
    const next = new URL(window.location.href);
    next.searchParams.set("session", session_id);
    window.location.assign(next.toString());
  });
  root.replaceChildren(form);
}

void boot();
