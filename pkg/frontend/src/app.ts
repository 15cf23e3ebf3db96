/** DOM wiring: renders the file list, annotated-program editor, and VC panel
 * from `App` state and translates user events into state transitions. */

import { Api } from "./api.js";
import { preserveCursor } from "./diff.js";
import { renderHighlights } from "./highlight.js";
import { App } from "./state.js";
import type { Span } from "./api.js";

const PAGE = `
  <aside class="files-pane">
    <h2>Examples</h2>
    <ul class="file-list"></ul>
  </aside>
  <main class="editor-pane">
    <div class="toolbar">
      <button class="refresh-vcs" type="button">Generate VCs</button>
      <button class="verify-all" type="button">Verify all</button>
      <span class="toolbar-sep"></span>
      <button class="insert" data-template="invariant [ ]" type="button">invariant</button>
      <button class="insert" data-template="{dbx }" type="button">dbx</button>
      <button class="insert" data-template="solution" type="button">solution</button>
    </div>
    <div class="editor">
      <pre class="highlights" aria-hidden="true"></pre>
      <textarea class="source" spellcheck="false"></textarea>
    </div>
    <ul class="diagnostics"></ul>
  </main>
  <section class="vc-pane">
    <h2>Verification conditions</h2>
    <div class="vc-list"></div>
  </section>
  <div class="toast" hidden></div>
`;

export interface Mounted {
  app: App;
  /** Resolves once the example list has been fetched and rendered. */
  ready: Promise<void>;
}

export function mountApp(container: HTMLElement, api: Api): Mounted {
  container.classList.add("hhl-app");
  container.innerHTML = PAGE;
  const doc = container.ownerDocument;
  const query = <T extends Element>(selector: string): T => {
    const el = container.querySelector(selector);
    if (!el) throw new Error(`missing element: ${selector}`);
    return el as T;
  };

  const fileList = query<HTMLUListElement>(".file-list");
  const refreshButton = query<HTMLButtonElement>(".refresh-vcs");
  const verifyAllButton = query<HTMLButtonElement>(".verify-all");
  const textarea = query<HTMLTextAreaElement>(".source");
  const overlay = query<HTMLPreElement>(".highlights");
  const diagnosticsList = query<HTMLUListElement>(".diagnostics");
  const vcList = query<HTMLDivElement>(".vc-list");
  const toast = query<HTMLDivElement>(".toast");

  const app = new App(api);
  let hoveredSpans: Span[] = [];
  let toastTimer: ReturnType<typeof setTimeout> | null = null;

  function showToast(message: string): void {
    toast.textContent = message;
    toast.hidden = false;
    if (toastTimer !== null) clearTimeout(toastTimer);
    toastTimer = setTimeout(() => {
      toast.hidden = true;
    }, 4000);
  }

  function messageOf(e: unknown): string {
    return e instanceof Error ? e.message : String(e);
  }

  function renderOverlay(): void {
    overlay.innerHTML = renderHighlights(app.state.source, hoveredSpans);
  }

  function renderDiagnostics(): void {
    diagnosticsList.textContent = "";
    for (const error of app.state.diagnostics) {
      const item = doc.createElement("li");
      item.className = "diagnostic";
      item.textContent = error.span
        ? `bytes ${error.span[0]}–${error.span[1]}: ${error.message}`
        : error.message;
      diagnosticsList.appendChild(item);
    }
  }

  function renderCards(): void {
    vcList.textContent = "";
    for (const vc of app.state.vcs) {
      const card = doc.createElement("article");
      card.className = "vc-card";
      card.dataset.id = vc.id;

      const header = doc.createElement("header");
      const label = doc.createElement("span");
      label.className = "vc-label";
      label.textContent = vc.label === "" ? "ε" : vc.label;
      const badge = doc.createElement("span");
      badge.className = `badge ${vc.badge}`;
      badge.textContent = vc.badge;
      header.append(label, badge);

      const formula = doc.createElement("code");
      formula.className = "vc-formula";
      formula.textContent = vc.formula;

      const origin = doc.createElement("div");
      origin.className = "vc-origin";
      origin.textContent = vc.origin;

      const footer = doc.createElement("footer");
      const solver = doc.createElement("select");
      solver.className = "vc-solver";
      for (const name of ["z3", "wolfram"]) {
        const option = doc.createElement("option");
        option.value = name;
        option.textContent = name;
        solver.appendChild(option);
      }
      solver.value = vc.solver;
      const verifyButton = doc.createElement("button");
      verifyButton.type = "button";
      verifyButton.className = "vc-verify";
      verifyButton.textContent = "verify";
      verifyButton.disabled = app.state.dirty;
      const detail = doc.createElement("span");
      detail.className = "vc-detail";
      detail.textContent = vc.detail;
      footer.append(solver, verifyButton, detail);

      card.append(header, formula, origin, footer);

      card.addEventListener("mouseenter", () => {
        hoveredSpans = app.decorationsFor(vc.id);
        renderOverlay();
      });
      card.addEventListener("mouseleave", () => {
        hoveredSpans = [];
        renderOverlay();
      });
      verifyButton.addEventListener("click", () => {
        void app.verify([vc.id]);
      });
      solver.addEventListener("change", () => {
        const before = textarea.value;
        const caret = textarea.selectionStart;
        app
          .chooseSolver(vc.id, solver.value)
          .then(() => {
            const position = preserveCursor(before, app.state.source, caret);
            textarea.setSelectionRange(position, position);
          })
          .catch((e) => showToast(messageOf(e)));
      });

      vcList.appendChild(card);
    }
  }

  function render(): void {
    if (textarea.value !== app.state.source) textarea.value = app.state.source;
    const verifyDisabled = app.state.dirty || app.state.vcs.length === 0;
    verifyAllButton.disabled = verifyDisabled;
    container.classList.toggle("busy", app.state.busy);
    renderOverlay();
    renderDiagnostics();
    renderCards();
  }

  app.onChange = render;
  app.onError = showToast;

  refreshButton.addEventListener("click", () => {
    app.refreshVcs().catch((e) => showToast(messageOf(e)));
  });
  verifyAllButton.addEventListener("click", () => {
    void app.verify(null);
  });
  textarea.addEventListener("input", () => {
    app.editSource(textarea.value);
  });
  textarea.addEventListener("scroll", () => {
    overlay.scrollTop = textarea.scrollTop;
    overlay.scrollLeft = textarea.scrollLeft;
  });
  for (const button of Array.from(container.querySelectorAll<HTMLButtonElement>(".insert"))) {
    button.addEventListener("click", () => {
      const template = button.dataset.template ?? "";
      const start = textarea.selectionStart;
      const end = textarea.selectionEnd;
      const value = textarea.value;
      textarea.value = value.slice(0, start) + template + value.slice(end);
      const caret = start + template.length;
      textarea.setSelectionRange(caret, caret);
      app.editSource(textarea.value);
      textarea.focus();
    });
  }

  const ready = app
    .examples()
    .then((files) => {
      fileList.textContent = "";
      for (const file of files) {
        const item = doc.createElement("li");
        const button = doc.createElement("button");
        button.type = "button";
        button.className = "file";
        button.dataset.name = file.name;
        button.textContent = file.name;
        button.addEventListener("click", () => {
          app.loadExample(file.name).catch((e) => showToast(messageOf(e)));
        });
        item.appendChild(button);
        fileList.appendChild(item);
      }
    })
    .catch((e) => showToast(messageOf(e)));

  render();
  return { app, ready };
}
