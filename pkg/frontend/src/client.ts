/**
 * Thin HTTP client for the task service.  All intelligence stays server-side;
 * this module only posts utterances and collects the events the server emits.
 */
import { ServerEvent } from "./events";

export interface SessionClient {
  readonly sessionId: string;
  send(text: string): Promise<ServerEvent[]>;
  /** Replay every event recorded so far via the SSE endpoint. */
  history(): Promise<ServerEvent[]>;
}

export interface ClientOptions {
  baseUrl: string;
  fetchImpl?: typeof fetch;
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    const body = await response.text();
    throw new Error(`${response.status} ${response.statusText}: ${body}`);
  }
  return response;
}

/** Parse the `data: <json>` lines of a server-sent-event stream body. */
export function parseEventStream(body: string): ServerEvent[] {
  const events: ServerEvent[] = [];
  for (const chunk of body.split("\n\n")) {
    const line = chunk.trim();
    if (line.startsWith("data: ")) {
      events.push(JSON.parse(line.slice("data: ".length)) as ServerEvent);
    }
  }
  return events;
}

export async function createSession(options: ClientOptions): Promise<SessionClient> {
  const doFetch = options.fetchImpl ?? fetch;
  const base = options.baseUrl.replace(/\/$/, "");
  const created = await expectOk(await doFetch(`${base}/sessions`, { method: "POST" }));
  const sessionId: string = (await created.json()).id;

  let inFlight: Promise<unknown> = Promise.resolve();

  return {
    sessionId,
    async send(text: string): Promise<ServerEvent[]> {
      // serialize sends: one utterance outstanding at a time
      const request = inFlight.then(async () => {
        const response = await expectOk(
          await doFetch(`${base}/sessions/${sessionId}/utterance`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ text }),
          })
        );
        return ((await response.json()) as { events: ServerEvent[] }).events;
      });
      inFlight = request.catch(() => undefined);
      return request;
    },
    async history(): Promise<ServerEvent[]> {
      const response = await expectOk(
        await doFetch(`${base}/sessions/${sessionId}/events`)
      );
      return parseEventStream(await response.text());
    },
  };
}
