// Assembles the study interface for one session: condition-driven tabs,
// the chat or search surface, the document viewer, the quarter-width
// notepad, heartbeats, and the phase gate poll.

import type { StudyApi, SessionInfo } from "./api";
import { ChatPanel } from "./chat";
import { followCitation } from "./citation";
import { Notepad } from "./notepad";
import { SearchPanel } from "./search";
import { hasChatTab, hasSearchBar, tabsFor, type TabName } from "./state";
import { PhaseGate } from "./timing";
import { DocumentViewer } from "./viewer";

export interface AppConfig {
  doc?: string;
  pages?: number;
  heartbeatMs?: number;
  timingPollMs?: number;
  highlightMs?: number;
}

export interface AppHandles {
  setTab: (tab: TabName) => void;
  activeTab: () => TabName;
  chat: ChatPanel | null;
  search: SearchPanel | null;
  viewer: DocumentViewer;
  notepad: Notepad;
  gate: PhaseGate;
  showToast: (text: string) => void;
  dispose: () => void;
}

const TAB_LABELS: Record<TabName, string> = {
  objectives: "Objectives",
  chat: "Chat",
  document: "Document",
};

export function buildApp(
  root: HTMLElement,
  api: StudyApi,
  session: SessionInfo,
  config: AppConfig = {},
): AppHandles {
  const heartbeatMs = config.heartbeatMs ?? 10_000;
  const timingPollMs = config.timingPollMs ?? 5_000;
  const tabs = tabsFor(session.condition);
  root.replaceChildren();
  root.className = "app";

  // header: tab strip plus the phase-gated Next button
  const header = document.createElement("header");
  const tabStrip = document.createElement("nav");
  tabStrip.setAttribute("role", "tablist");
  const tabButtons = new Map<TabName, HTMLButtonElement>();
  for (const tab of tabs) {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "tab";
    button.dataset.tab = tab;
    button.textContent = TAB_LABELS[tab];
    button.addEventListener("click", () => setTab(tab));
    tabStrip.appendChild(button);
    tabButtons.set(tab, button);
  }
  const nextButton = document.createElement("button");
  nextButton.type = "button";
  nextButton.className = "next-button";
  nextButton.textContent = "Next";
  header.append(tabStrip, nextButton);

  const toast = document.createElement("div");
  toast.className = "toast";
  toast.hidden = true;
  let toastTimer: ReturnType<typeof setTimeout> | null = null;
  const showToast = (text: string) => {
    toast.textContent = text;
    toast.hidden = false;
    if (toastTimer !== null) clearTimeout(toastTimer);
    toastTimer = setTimeout(() => {
      toast.hidden = true;
    }, 3000);
  };

  // panels: one wrapper per tab, toggled by hidden
  const viewer = new DocumentViewer(api, config.highlightMs);
  if (config.doc) viewer.openDocument(config.doc, config.pages ?? 1);

  const panels = document.createElement("div");
  panels.className = "panels";
  const wrappers = new Map<TabName, HTMLElement>();

  const objectives = document.createElement("section");
  objectives.className = "objectives";
  objectives.innerHTML =
    "<h2>Study objectives</h2><p>Work through the assigned chapter. Use the " +
    "tools in the other tabs to find and understand the material, and keep " +
    "notes as you go. The Next button unlocks once enough time has passed.</p>";
  wrappers.set("objectives", objectives);

  let chat: ChatPanel | null = null;
  if (hasChatTab(session.condition)) {
    chat = new ChatPanel(api, session.session_id, {
      onCitation: (docId, blockIds) =>
        void followCitation(
          { api, sessionId: session.session_id, viewer, setTab, showToast },
          docId,
          blockIds,
        ),
      onStreamClosed: () => gate.streamClosed(),
    });
    const wrapper = document.createElement("section");
    wrapper.className = "chat-tab";
    wrapper.appendChild(chat.element);
    wrappers.set("chat", wrapper);
  }

  let search: SearchPanel | null = null;
  const documentWrapper = document.createElement("section");
  documentWrapper.className = "document-tab";
  if (hasSearchBar(session.condition)) {
    search = new SearchPanel(api, session.session_id, viewer);
    documentWrapper.appendChild(search.element);
  }
  documentWrapper.appendChild(viewer.element);
  wrappers.set("document", documentWrapper);

  for (const tab of tabs) panels.appendChild(wrappers.get(tab)!);

  const notepad = new Notepad((text) => api.putNotes(session.session_id, text));

  const layout = document.createElement("main");
  layout.className = "layout";
  layout.append(panels, notepad.element);
  root.append(header, toast, layout);
  void api.getNotes(session.session_id).then((text) => notepad.setDraft(text));

  let active: TabName = tabs[0];
  function setTab(tab: TabName): void {
    if (!wrappers.has(tab)) return;
    active = tab;
    for (const [name, wrapper] of wrappers) {
      wrapper.hidden = name !== tab;
      tabButtons.get(name)?.setAttribute("aria-selected", String(name === tab));
    }
    void api
      .logEvent(session.session_id, { type: "tab_switch", tab })
      .catch(() => undefined);
  }
  setTab(active);

  // the gate advances between study phases; a running stream defers it
  const gate = new PhaseGate(
    nextButton,
    () => {
      void notepad.flush();
      stopTimers();
      const done = document.createElement("section");
      done.className = "phase-complete";
      done.innerHTML = "<h2>Section complete</h2><p>Continue to the next part of the study.</p>";
      root.replaceChildren(done);
    },
    () => chat?.isStreaming ?? false,
  );

  const heartbeatTimer = setInterval(() => {
    void api.heartbeat(session.session_id).catch(() => undefined);
  }, heartbeatMs);
  const timingTimer = setInterval(() => {
    void api
      .timing(session.session_id)
      .then((timing) => gate.apply(timing))
      .catch(() => undefined);
  }, timingPollMs);

  function stopTimers(): void {
    clearInterval(heartbeatTimer);
    clearInterval(timingTimer);
    if (toastTimer !== null) clearTimeout(toastTimer);
  }

  return {
    setTab,
    activeTab: () => active,
    chat,
    search,
    viewer,
    notepad,
    gate,
    showToast,
    dispose: stopTimers,
  };
}
