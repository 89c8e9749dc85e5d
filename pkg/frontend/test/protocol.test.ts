// Full facilitation protocol against the real mock-backed server, driven
// through the same api/sse/store modules the console uses.

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { subscribeEvents } from "../src/sse.js";
import { applyEvent, viewFromSnapshot, type UiSessionView } from "../src/store.js";
import type { SessionEvent } from "../src/types.js";
import { CONTEXT_BODY, startServer, TRANSCRIPT_LINES, type TestServer } from "./server.js";

let server: TestServer;

beforeAll(async () => {
  server = await startServer();
}, 40_000);

afterAll(async () => {
  await server?.stop();
});

function waitFor<T>(check: () => T | undefined, timeoutMs = 10_000): Promise<T> {
  return new Promise((resolve, reject) => {
    const started = Date.now();
    const poll = () => {
      const value = check();
      if (value !== undefined) return resolve(value);
      if (Date.now() - started > timeoutMs) return reject(new Error("timed out waiting"));
      setTimeout(poll, 50);
    };
    poll();
  });
}

describe("facilitation protocol", () => {
  it("runs generate -> select -> question -> accept; server list gains the question", async () => {
    const api = new SessionApi(server.base);
    const { session_id } = await api.createSession(
      CONTEXT_BODY.theme,
      CONTEXT_BODY.experts,
      CONTEXT_BODY.setting_note,
    );

    const events: SessionEvent[] = [];
    const subscription = subscribeEvents(server.base, session_id, (e) => events.push(e));

    for (const line of TRANSCRIPT_LINES.slice(0, 5)) {
      await api.appendSegment(session_id, line.speaker, line.text, line.ts);
    }
    const { stakeholders } = await api.generateStakeholders(session_id);
    expect(stakeholders).toHaveLength(3);
    const interests = stakeholders.map((p) => p.demographics.sustainability_interest);
    expect(interests).toContain("Low");

    const personaId = stakeholders[0].id;
    await api.generateReflection(session_id, personaId);
    const staged = await api.generateQuestion(session_id, personaId);
    expect(staged.expert_resolved).toBe(true);
    expect(CONTEXT_BODY.experts.map((e: { name: string }) => e.name)).toContain(staged.expert);

    // Staging does not touch the server-side list.
    let state = await api.getSession(session_id);
    expect(state.question_list).toHaveLength(0);

    const accepted = await api.acceptQuestion(session_id, staged);
    expect(accepted.duplicate).toBe(false);
    state = await api.getSession(session_id);
    expect(state.question_list.map((q) => q.question)).toContain(staged.question);

    // The event stream saw the whole story, in order, gap-free.
    await waitFor(() =>
      events.some((e) => e.kind === "QuestionListChanged") ? true : undefined,
    );
    const kinds = events.map((e) => e.kind);
    expect(kinds.slice(0, 5)).toEqual(Array(5).fill("SegmentAdded"));
    expect(kinds).toContain("StakeholdersReady");
    expect(kinds).toContain("ReflectionReady");
    expect(kinds).toContain("QuestionReady");
    expect(kinds[kinds.length - 1]).toBe("QuestionListChanged");
    expect(events.map((e) => e.seq)).toEqual(events.map((_, i) => i + 1));

    subscription.close();
  }, 30_000);

  it("reconstructs an identical view from snapshot + event replay", async () => {
    const api = new SessionApi(server.base);
    const { session_id } = await api.createSession(
      CONTEXT_BODY.theme,
      CONTEXT_BODY.experts,
      CONTEXT_BODY.setting_note,
    );

    // Live client: empty view fed purely by events.
    const liveEvents: SessionEvent[] = [];
    const live = subscribeEvents(server.base, session_id, (e) => liveEvents.push(e));

    for (const line of TRANSCRIPT_LINES.slice(0, 3)) {
      await api.appendSegment(session_id, line.speaker, line.text, line.ts);
    }
    const { stakeholders } = await api.generateStakeholders(session_id);
    await api.generateReflection(session_id, stakeholders[0].id);

    await waitFor(() => (liveEvents.length >= 5 ? true : undefined));
    live.close();

    let liveView = viewFromSnapshot(await api.getSession(session_id));
    // Seed the "continuous" client from the session's very beginning.
    liveView = { ...liveView, transcript: [], personas: [], reflections: {} } as UiSessionView;
    for (const e of liveEvents) liveView = applyEvent(liveView, e);

    // Refreshing client: snapshot + replay of the same events.
    let refreshed = viewFromSnapshot(await api.getSession(session_id));
    for (const e of liveEvents) refreshed = applyEvent(refreshed, e);

    expect(refreshed.transcript).toEqual(liveView.transcript);
    expect(refreshed.personas).toEqual(liveView.personas);
    expect(refreshed.reflections).toEqual(liveView.reflections);
    expect(refreshed.questionList).toEqual(liveView.questionList);
  }, 30_000);

  it("surfaces question-before-reflection as a typed API error", async () => {
    const api = new SessionApi(server.base);
    const { session_id } = await api.createSession(CONTEXT_BODY.theme, CONTEXT_BODY.experts, "");
    const { stakeholders } = await api.generateStakeholders(session_id);
    await expect(api.generateQuestion(session_id, stakeholders[0].id)).rejects.toMatchObject({
      status: 409,
      code: "ReflectionMissing",
    });
  }, 30_000);
});
