// Client-side session view. The view is a pure function of the server
// snapshot, the ordered event stream, and local staged inputs (selection,
// staged question): reconnecting and replaying snapshot + events must
// reconstruct an identical view.

import type {
  PersonaCard,
  Question,
  Reflection,
  SessionEvent,
  SessionState,
  TranscriptSegment,
} from "./types.js";

export interface UiSessionView {
  sessionId: string;
  theme: string;
  experts: { name: string; expertise: string }[];
  transcript: TranscriptSegment[];
  personas: PersonaCard[];
  reflections: Record<string, Reflection>;
  selectedPersonaId: string | null;
  stagedQuestion: Question | null;
  questionList: Question[];
  lastDuplicate: boolean;
  lastError: { code: string; message: string } | null;
  lastEventSeq: number;
}

export function emptyView(sessionId: string): UiSessionView {
  return {
    sessionId,
    theme: "",
    experts: [],
    transcript: [],
    personas: [],
    reflections: {},
    selectedPersonaId: null,
    stagedQuestion: null,
    questionList: [],
    lastDuplicate: false,
    lastError: null,
    lastEventSeq: 0,
  };
}

export function viewFromSnapshot(state: SessionState): UiSessionView {
  return {
    ...emptyView(state.session_id),
    theme: state.context.theme,
    experts: state.context.experts,
    transcript: [...state.transcript],
    personas: [...state.stakeholders],
    reflections: { ...state.reflections },
    questionList: [...state.question_list],
  };
}

export function applyEvent(view: UiSessionView, event: SessionEvent): UiSessionView {
  const next: UiSessionView = { ...view, lastEventSeq: event.seq };
  switch (event.kind) {
    case "SegmentAdded": {
      const segment = event.payload.segment as TranscriptSegment;
      // Replaying a snapshot that already contains this segment is normal
      // after reconnect; drop duplicates by seq.
      if (!view.transcript.some((s) => s.seq === segment.seq)) {
        next.transcript = [...view.transcript, segment];
      }
      return next;
    }
    case "StakeholdersReady": {
      const incoming = event.payload.stakeholders as PersonaCard[];
      const batch = event.payload.batch as number;
      const known = new Set(view.personas.map((p) => p.id));
      const retained = view.personas.map((p) =>
        p.batch < batch ? { ...p, superseded: true } : p,
      );
      next.personas = [...retained, ...incoming.filter((p) => !known.has(p.id))];
      return next;
    }
    case "ReflectionReady": {
      const personaId = event.payload.persona_id as string;
      next.reflections = {
        ...view.reflections,
        [personaId]: event.payload.reflection as Reflection,
      };
      return next;
    }
    case "QuestionReady": {
      next.stagedQuestion = event.payload.question as Question;
      return next;
    }
    case "QuestionListChanged": {
      next.questionList = [...(event.payload.question_list as Question[])];
      next.lastDuplicate = Boolean(event.payload.duplicate);
      return next;
    }
    case "Error": {
      next.lastError = {
        code: String(event.payload.code ?? "Error"),
        message: String(event.payload.message ?? "unknown error"),
      };
      return next;
    }
    default:
      return next;
  }
}

export type Listener = (view: UiSessionView) => void;

export class SessionStore {
  private view: UiSessionView;
  private listeners: Listener[] = [];

  constructor(sessionId: string) {
    this.view = emptyView(sessionId);
  }

  current(): UiSessionView {
    return this.view;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.view);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private commit(view: UiSessionView): void {
    this.view = view;
    for (const listener of this.listeners) listener(view);
  }

  loadSnapshot(state: SessionState): void {
    // Preserve staged inputs across reconnects; everything else comes from
    // the server snapshot.
    const fresh = viewFromSnapshot(state);
    fresh.selectedPersonaId = this.view.selectedPersonaId;
    fresh.stagedQuestion = this.view.stagedQuestion;
    this.commit(fresh);
  }

  dispatch(event: SessionEvent): void {
    this.commit(applyEvent(this.view, event));
  }

  selectPersona(personaId: string | null): void {
    this.commit({ ...this.view, selectedPersonaId: personaId });
  }

  stageQuestion(question: Question | null): void {
    this.commit({ ...this.view, stagedQuestion: question });
  }

  discardStagedQuestion(): void {
    this.stageQuestion(null);
  }

  clearError(): void {
    this.commit({ ...this.view, lastError: null });
  }
}
