// Facilitator console: live transcript tail, persona cards, reflection
// panels, staged question review, and the running question list. All state
// flows through SessionStore; DOM handlers only call the API and stage
// local inputs, then rendering reacts to store updates.

import { ApiRequestError, SessionApi } from "./api.js";
import { subscribeEvents, type EventSubscription } from "./sse.js";
import { SessionStore, type UiSessionView } from "./store.js";
import type { PersonaCard, Question } from "./types.js";

const DEMOGRAPHIC_LABELS: [keyof PersonaCard["demographics"], string][] = [
  ["age", "Age"],
  ["gender", "Gender"],
  ["income", "Income"],
  ["education", "Education"],
  ["profession", "Profession"],
  ["political_leaning", "Political leaning"],
  ["sustainability_interest", "Sustainability interest"],
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export interface ConsoleHandle {
  store: SessionStore;
  subscription: EventSubscription;
  refresh(): Promise<void>;
  dispose(): void;
}

export async function mountConsole(
  root: HTMLElement,
  api: SessionApi,
  sessionId: string,
): Promise<ConsoleHandle> {
  const store = new SessionStore(sessionId);
  root.replaceChildren();

  const toast = el("div", { class: "toast", hidden: "hidden" });
  const header = el("header");
  const title = el("h1", {}, "Deliberation console");
  const theme = el("p", { class: "theme" });
  header.append(title, theme);

  const transcriptSection = el("section", { class: "transcript" });
  transcriptSection.append(el("h2", {}, "Transcript"));
  const transcriptTail = el("ol", { class: "transcript-tail", "data-role": "transcript" });
  const entryForm = el("form", { class: "entry", "data-role": "entry-form" });
  const speakerInput = el("input", {
    name: "speaker",
    placeholder: "Speaker",
    value: "Facilitator",
  });
  const textInput = el("input", { name: "text", placeholder: "Add a transcript line" });
  const entrySubmit = el("button", { type: "submit", "data-action": "add-segment" }, "Add");
  entrySubmit.disabled = true;
  entryForm.append(speakerInput, textInput, entrySubmit);
  transcriptSection.append(transcriptTail, entryForm);

  const personasSection = el("section", { class: "personas" });
  const generateButton = el(
    "button",
    { "data-action": "generate-stakeholders" },
    "Generate stakeholder bios",
  );
  personasSection.append(el("h2", {}, "Missing stakeholders"), generateButton);
  const cardsHost = el("div", { class: "cards", "data-role": "cards" });
  personasSection.append(cardsHost);

  const detailSection = el("section", { class: "detail", "data-role": "detail" });
  const questionsSection = el("section", { class: "questions" });
  questionsSection.append(el("h2", {}, "Question list"));
  const questionListHost = el("ol", { "data-role": "question-list" });
  questionsSection.append(questionListHost);

  root.append(toast, header, transcriptSection, personasSection, detailSection, questionsSection);

  function showError(message: string): void {
    toast.textContent = message;
    toast.removeAttribute("hidden");
  }

  async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
    try {
      return await work();
    } catch (err) {
      showError(err instanceof ApiRequestError ? `${err.code}: ${err.message}` : String(err));
      return undefined;
    }
  }

  textInput.addEventListener("input", () => {
    entrySubmit.disabled = textInput.value.trim() === "";
  });
  entryForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = textInput.value.trim();
    if (!text) return;
    const speaker = speakerInput.value.trim() || "Facilitator";
    textInput.value = "";
    entrySubmit.disabled = true;
    void guard(() => api.appendSegment(sessionId, speaker, text));
  });

  generateButton.addEventListener("click", () => {
    generateButton.disabled = true;
    void guard(() => api.generateStakeholders(sessionId)).finally(() => {
      generateButton.disabled = false;
    });
  });

  function selectPersona(personaId: string): void {
    store.selectPersona(personaId);
    const cached = store.current().reflections[personaId];
    if (!cached) {
      // First reveal fetches the reflection; re-clicks reuse the cache and
      // only "Regenerate" forces a new server call.
      void guard(() => api.generateReflection(sessionId, personaId));
    }
  }

  function renderTranscript(view: UiSessionView): void {
    transcriptTail.replaceChildren(
      ...view.transcript.slice(-12).map((segment) =>
        el("li", { "data-seq": String(segment.seq) }, `${segment.speaker}: ${segment.text}`),
      ),
    );
  }

  function renderCards(view: UiSessionView): void {
    cardsHost.replaceChildren();
    const batches = new Map<number, PersonaCard[]>();
    for (const persona of view.personas) {
      const group = batches.get(persona.batch) ?? [];
      group.push(persona);
      batches.set(persona.batch, group);
    }
    for (const [batch, group] of [...batches.entries()].sort((a, b) => b[0] - a[0])) {
      const superseded = group.every((p) => p.superseded);
      const section = el("div", {
        class: superseded ? "batch superseded" : "batch",
        "data-batch": String(batch),
      });
      if (superseded) {
        section.append(el("p", { class: "superseded-note" }, `Earlier batch ${batch} (superseded)`));
      }
      for (const persona of group) {
        const card = el("article", {
          class: persona.id === view.selectedPersonaId ? "card selected" : "card",
          "data-role": "persona-card",
          "data-persona-id": persona.id,
        });
        card.append(el("h3", {}, persona.name));
        const chips = el("ul", { class: "chips" });
        for (const [key, label] of DEMOGRAPHIC_LABELS) {
          chips.append(
            el("li", { class: "chip", "data-chip": key }, `${label}: ${persona.demographics[key]}`),
          );
        }
        card.append(chips, el("p", { class: "description" }, persona.description));
        card.addEventListener("click", () => selectPersona(persona.id));
        section.append(card);
      }
      cardsHost.append(section);
    }
  }

  function renderDetail(view: UiSessionView): void {
    detailSection.replaceChildren();
    const personaId = view.selectedPersonaId;
    if (!personaId) return;
    const persona = view.personas.find((p) => p.id === personaId);
    if (!persona) return;
    detailSection.append(el("h2", {}, `Perspective: ${persona.name}`));

    const reflection = view.reflections[personaId];
    if (!reflection) {
      detailSection.append(el("p", { class: "loading" }, "Generating reflection..."));
      return;
    }

    const disagree = el("div", { class: "panel", "data-role": "disagree-panel" });
    disagree.append(el("h3", {}, "Points of disagreement"), el("p", {}, reflection.disagree_explanation));
    const missing = el("div", { class: "panel", "data-role": "missing-panel" });
    missing.append(el("h3", {}, "Missing perspectives"), el("p", {}, reflection.missing_perspectives));
    // Agreement stays behind a disclosure; the live protocol surfaces only
    // disagreements and missing perspectives by default.
    const agree = el("details", { "data-role": "agree-disclosure" });
    agree.append(el("summary", {}, "What they agree with"), el("p", {}, reflection.agree_explanation));
    detailSection.append(disagree, missing, agree);

    const regenerate = el("button", { "data-action": "regenerate-reflection" }, "Regenerate reflection");
    regenerate.addEventListener("click", () => {
      void guard(() => api.generateReflection(sessionId, personaId));
    });
    const generateQuestion = el(
      "button",
      { "data-action": "generate-question" },
      "Generate panel question",
    );
    generateQuestion.addEventListener("click", () => {
      generateQuestion.disabled = true;
      void guard(() => api.generateQuestion(sessionId, personaId)).finally(() => {
        generateQuestion.disabled = false;
      });
    });
    detailSection.append(regenerate, generateQuestion);

    if (view.stagedQuestion && view.stagedQuestion.persona_id === personaId) {
      detailSection.append(renderStagedQuestion(view.stagedQuestion));
    }
  }

  function renderStagedQuestion(question: Question): HTMLElement {
    const panel = el("div", { class: "staged", "data-role": "staged-question" });
    panel.append(el("h3", {}, "Staged question"));
    panel.append(el("p", { class: "question-text" }, question.question));
    panel.append(el("p", { class: "explanation" }, question.explanation));
    const expert = el("p", { class: "expert" }, `For: ${question.expert}`);
    if (!question.expert_resolved) {
      expert.append(el("span", { class: "badge warn", "data-role": "unresolved-badge" }, "not on roster"));
    }
    panel.append(expert);
    const accept = el("button", { "data-action": "accept-question" }, "Accept into list");
    accept.addEventListener("click", () => {
      void guard(() => api.acceptQuestion(sessionId, question)).then((result) => {
        if (result) store.discardStagedQuestion();
      });
    });
    const discard = el("button", { "data-action": "discard-question" }, "Discard");
    discard.addEventListener("click", () => store.discardStagedQuestion());
    panel.append(accept, discard);
    return panel;
  }

  function renderQuestionList(view: UiSessionView): void {
    questionListHost.replaceChildren(
      ...view.questionList.map((question) => {
        const item = el("li", { "data-role": "question-item" });
        item.append(el("span", {}, question.question));
        if (question.expert) {
          item.append(el("span", { class: "target" }, ` -> ${question.expert}`));
          if (!question.expert_resolved) {
            item.append(el("span", { class: "badge warn" }, "not on roster"));
          }
        }
        if (question.persona_id === null) {
          item.append(el("span", { class: "badge" }, "facilitator"));
        }
        return item;
      }),
    );
  }

  store.subscribe((view) => {
    theme.textContent = view.theme;
    if (view.lastError) {
      showError(`${view.lastError.code}: ${view.lastError.message}`);
    }
    renderTranscript(view);
    renderCards(view);
    renderDetail(view);
    renderQuestionList(view);
  });

  async function refresh(): Promise<void> {
    const snapshot = await api.getSession(sessionId);
    store.loadSnapshot(snapshot);
  }

  await refresh();
  const subscription = subscribeEvents(
    api.baseUrl,
    sessionId,
    (event) => store.dispatch(event),
    () => showError("event stream interrupted; refresh to reconnect"),
  );

  return {
    store,
    subscription,
    refresh,
    dispose() {
      subscription.close();
    },
  };
}
