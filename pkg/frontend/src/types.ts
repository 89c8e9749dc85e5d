// Wire types mirroring the session service's JSON payloads.

export interface ExpertProfile {
  name: string;
  expertise: string;
}

export interface AssemblyContext {
  theme: string;
  experts: ExpertProfile[];
  setting_note: string;
}

export interface TranscriptSegment {
  seq: number;
  ts: number;
  speaker: string;
  text: string;
}

export interface Demographics {
  age: number;
  gender: string;
  income: string;
  education: string;
  profession: string;
  political_leaning: string;
  sustainability_interest: string;
}

export interface PersonaCard {
  id: string;
  name: string;
  description: string;
  demographics: Demographics;
  batch: number;
  superseded: boolean;
}

export interface Reflection {
  persona_id: string | null;
  agree_explanation: string;
  disagree_explanation: string;
  missing_perspectives: string;
}

export interface Question {
  persona_id: string | null;
  question: string;
  explanation: string;
  expert: string;
  expert_resolved: boolean;
}

export interface SessionState {
  session_id: string;
  context: AssemblyContext;
  transcript: TranscriptSegment[];
  stakeholders: PersonaCard[];
  reflections: Record<string, Reflection>;
  question_list: Question[];
  created_at: string;
  updated_at: string;
}

export type EventKind =
  | "SegmentAdded"
  | "StakeholdersReady"
  | "ReflectionReady"
  | "QuestionReady"
  | "QuestionListChanged"
  | "Error";

export interface SessionEvent {
  kind: EventKind;
  payload: Record<string, unknown>;
  seq: number;
}

export interface ApiError {
  code: string;
  message: string;
  details: unknown;
}
