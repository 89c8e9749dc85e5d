// Session event subscription. Browsers get native EventSource; environments
// without it (tests, older embeds) fall back to a fetch-stream parser over
// the same text/event-stream endpoint.

import type { SessionEvent } from "./types.js";

export interface EventSubscription {
  close(): void;
}

export type EventHandler = (event: SessionEvent) => void;

export function subscribeEvents(
  baseUrl: string,
  sessionId: string,
  onEvent: EventHandler,
  onError: (err: unknown) => void = () => {},
): EventSubscription {
  const url = `${baseUrl.replace(/\/$/, "")}/sessions/${sessionId}/events`;
  if (typeof EventSource !== "undefined") {
    const source = new EventSource(url);
    source.onmessage = (message) => onEvent(JSON.parse(message.data));
    for (const kind of [
      "SegmentAdded",
      "StakeholdersReady",
      "ReflectionReady",
      "QuestionReady",
      "QuestionListChanged",
      "Error",
    ]) {
      source.addEventListener(kind, (message) =>
        onEvent(JSON.parse((message as MessageEvent).data)),
      );
    }
    source.onerror = (err) => onError(err);
    return { close: () => source.close() };
  }
  return fetchStreamSubscription(url, onEvent, onError);
}

function fetchStreamSubscription(
  url: string,
  onEvent: EventHandler,
  onError: (err: unknown) => void,
): EventSubscription {
  const controller = new AbortController();
  let closed = false;

  (async () => {
    try {
      const response = await fetch(url, {
        signal: controller.signal,
        headers: { Accept: "text/event-stream" },
      });
      if (!response.ok || !response.body) {
        throw new Error(`event stream failed: ${response.status}`);
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let boundary = buffer.indexOf("\n\n");
        while (boundary !== -1) {
          const frame = buffer.slice(0, boundary);
          buffer = buffer.slice(boundary + 2);
          for (const line of frame.split("\n")) {
            if (line.startsWith("data: ")) {
              onEvent(JSON.parse(line.slice("data: ".length)));
            }
          }
          boundary = buffer.indexOf("\n\n");
        }
      }
    } catch (err) {
      if (!closed) onError(err);
    }
  })();

  return {
    close() {
      closed = true;
      controller.abort();
    },
  };
}
