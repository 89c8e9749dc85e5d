// Thin typed client over the session service HTTP API. The console uses
// exactly these endpoints plus the event stream; nothing else.

import type { PersonaCard, Question, SessionState } from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details: unknown,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiRequestError> {
  let code = "HttpError";
  let message = `${response.status} ${response.statusText}`;
  let details: unknown = null;
  try {
    const body = await response.json();
    code = body.code ?? code;
    message = body.message ?? message;
    details = body.details ?? null;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiRequestError(response.status, code, message, details);
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    throw await parseError(response);
  }
  return (await response.json()) as T;
}

export class SessionApi {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  createSession(theme: string, experts: { name: string; expertise: string }[], settingNote: string) {
    return request<{ session_id: string }>(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify({ theme, experts, setting_note: settingNote }),
    });
  }

  getSession(sessionId: string) {
    return request<SessionState>(`${this.baseUrl}/sessions/${sessionId}`);
  }

  appendSegment(sessionId: string, speaker: string, text: string, timestamp?: number) {
    return request<{ seq: number }>(`${this.baseUrl}/sessions/${sessionId}/transcript`, {
      method: "POST",
      body: JSON.stringify({ speaker, text, timestamp }),
    });
  }

  generateStakeholders(sessionId: string) {
    return request<{ stakeholders: PersonaCard[] }>(
      `${this.baseUrl}/sessions/${sessionId}/stakeholders`,
      { method: "POST" },
    );
  }

  generateReflection(sessionId: string, personaId: string) {
    return request<Record<string, unknown>>(
      `${this.baseUrl}/sessions/${sessionId}/stakeholders/${personaId}/reflection`,
      { method: "POST" },
    );
  }

  generateQuestion(sessionId: string, personaId: string) {
    return request<Question>(
      `${this.baseUrl}/sessions/${sessionId}/stakeholders/${personaId}/question`,
      { method: "POST" },
    );
  }

  acceptQuestion(sessionId: string, question: Question) {
    return request<{ question_list: Question[]; duplicate: boolean }>(
      `${this.baseUrl}/sessions/${sessionId}/questions`,
      { method: "POST", body: JSON.stringify(question) },
    );
  }
}
