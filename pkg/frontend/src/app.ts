/**
 * Browser bootstrap: a chat box wired to the session endpoints.  The DOM is
 * rewritten from the view model after every event batch, so the page content
 * is a pure function of the event log plus the human turns.
 */
import { createSession, SessionClient } from "./client";
import { applyEvent, applyHumanTurn, initialView, renderText, ViewState } from "./events";

const SERVICE_URL = (window as { CONVOPLAN_URL?: string }).CONVOPLAN_URL
  ?? "http://127.0.0.1:8777";

function renderInto(root: HTMLElement, view: ViewState): void {
  root.textContent = renderText(view);
}

export async function mount(root: HTMLElement): Promise<void> {
  let view = initialView();
  const log = document.createElement("pre");
  log.className = "transcript";
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "instruction…";
  root.append(log, input);

  let client: SessionClient;
  try {
    client = await createSession({ baseUrl: SERVICE_URL });
  } catch (err) {
    log.textContent = `service unreachable: ${err}`;
    input.disabled = true;
    return;
  }
  view = { ...view, connection: "connected" };

  input.addEventListener("keydown", async (key) => {
    if (key.key !== "Enter" || !input.value.trim() || input.disabled) return;
    const text = input.value.trim();
    input.value = "";
    input.disabled = true; // gate input while an utterance is in flight
    view = applyHumanTurn(view, text);
    renderInto(log, view);
    try {
      for (const event of await client.send(text)) {
        view = applyEvent(view, event);
      }
    } catch (err) {
      view = applyEvent(view, { kind: "error", state: "idle", text: String(err) });
    }
    renderInto(log, view);
    input.disabled = false;
    input.focus();
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void mount(document.getElementById("app") as HTMLElement);
}
