/**
 * DOM wiring for the predictive keyboard page.
 *
 * Keybindings: Tab accepts the top suggestion, digit keys 2..9 accept
 * lower ranks while the suggestion bar is visible. Suggestions refresh
 * on word boundaries only.
 */

import { HttpService } from "./api.js";
import { Session } from "./session.js";

const service = new HttpService();
const session = new Session(service, { k: 5 });

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const editor = el<HTMLTextAreaElement>("editor");
const bar = el<HTMLDivElement>("suggestions");
const banner = el<HTMLDivElement>("banner");
const modelSelect = el<HTMLSelectElement>("model");
const kInput = el<HTMLInputElement>("k");
const frequentInput = el<HTMLInputElement>("frequent-limit");
const resetButton = el<HTMLButtonElement>("reset");

function render(): void {
  editor.value = session.text;
  banner.hidden = !session.serviceDown;
  bar.replaceChildren(
    ...session.suggestions.map((cand, i) => {
      const button = document.createElement("button");
      button.className = "suggestion";
      const key = i === 0 ? "Tab" : String(i + 1);
      button.textContent = `${cand.word} [${key}]`;
      button.title = `p=${cand.probability.toFixed(4)}`;
      button.addEventListener("click", () => {
        void session.onAccept(i + 1).then(render);
        editor.focus();
      });
      return button;
    }),
  );
  el("keys-pressed").textContent = String(session.keysPressed);
  el("keys-saved").textContent = String(session.keysSaved);
  el("words-accepted").textContent = String(session.wordsAccepted);
  el("running-kd").textContent = (100 * session.runningKd).toFixed(1) + "%";
}

editor.addEventListener("keydown", (ev: KeyboardEvent) => {
  if (ev.key === "Tab" && session.suggestions.length > 0) {
    ev.preventDefault();
    void session.onAccept(1).then(render);
    return;
  }
  if (
    ev.key >= "2" &&
    ev.key <= "9" &&
    session.suggestions.length >= Number(ev.key)
  ) {
    ev.preventDefault();
    void session.onAccept(Number(ev.key)).then(render);
    return;
  }
  if (ev.key.length === 1 && !ev.ctrlKey && !ev.metaKey && !ev.altKey) {
    ev.preventDefault(); // session text is the single source of truth
    void session.onKeystroke(ev.key).then(render);
  }
});

modelSelect.addEventListener("change", () => {
  void session
    .onSettingsChange({ model: modelSelect.value || undefined })
    .then(render);
});
kInput.addEventListener("change", () => {
  const k = Math.min(Math.max(Number(kInput.value) || 5, 1), 9);
  kInput.value = String(k);
  void session.onSettingsChange({ k }).then(render);
});
frequentInput.addEventListener("change", () => {
  const raw = Number(frequentInput.value);
  const limit = Number.isFinite(raw) && raw >= 1 ? Math.floor(raw) : undefined;
  void session.onSettingsChange({ frequentLimit: limit }).then(render);
});
resetButton.addEventListener("click", () => {
  session.reset();
  render();
  editor.focus();
});

async function boot(): Promise<void> {
  try {
    const info = await service.info();
    modelSelect.replaceChildren(
      ...info.models.map((m) => {
        const option = document.createElement("option");
        option.value = m.name;
        const detail = m.type === "ngram" ? `${m.n}-gram` : m.cell ?? m.type;
        option.textContent = `${m.name} (${detail})`;
        return option;
      }),
    );
    if (info.models.length > 0) {
      session.settings.model = info.models[0].name;
    }
  } catch {
    banner.hidden = false;
  }
  await session.refreshSuggestions();
  render();
  editor.focus();
}

void boot();
