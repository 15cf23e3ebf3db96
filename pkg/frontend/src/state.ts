/** Application state and transitions, independent of the DOM.
 *
 * Invariants maintained here:
 *  - `dirty` means the VC list is stale relative to the editor text; all
 *    verify actions are no-ops until a refresh completes.
 *  - Editing invalidates every result badge.
 *  - At most one /verify batch is in flight; further requests are queued
 *    and run in order.
 *  - Hover decorations are exactly the spans served for the VC.
 */

import { Api, ApiError } from "./api.js";
import type { DocError, ExampleFile, ResultRecord, Span, VcRecord, VerifyOutcome } from "./api.js";

export type Badge = "unchecked" | "proved" | "unproved" | "timeout" | "error";

export interface VcView {
  id: string;
  formula: string;
  label: string;
  origin: string;
  spans: Span[];
  solver: string;
  badge: Badge;
  /** Inline per-VC message: countermodel, solver detail, or request error. */
  detail: string;
}

export interface AppState {
  source: string;
  dirty: boolean;
  diagnostics: DocError[];
  vcs: VcView[];
  busy: boolean;
}

export function badgeFor(result: ResultRecord | null): Badge {
  if (result === null) return "unchecked";
  switch (result.result) {
    case "Proved":
      return "proved";
    case "Unproved":
      return "unproved";
    case "Timeout":
      return "timeout";
    default:
      return "error";
  }
}

function describe(result: ResultRecord): string {
  const parts: string[] = [];
  if (result.model) {
    const bindings = Object.entries(result.model)
      .map(([name, value]) => `${name} = ${value}`)
      .join(", ");
    parts.push(`counterexample: ${bindings}`);
  }
  if (result.detail) parts.push(result.detail);
  return parts.join("; ");
}

function toView(record: VcRecord): VcView {
  return {
    id: record.id,
    formula: record.formula,
    label: record.label,
    origin: record.origin.text,
    spans: record.spans,
    solver: record.solver,
    badge: badgeFor(record.result),
    detail: record.result ? describe(record.result) : "",
  };
}

export class App {
  state: AppState = { source: "", dirty: true, diagnostics: [], vcs: [], busy: false };
  /** Called after every state change; the UI layer re-renders from it. */
  onChange: () => void = () => {};
  /** Called with a human-readable message for non-document failures. */
  onError: (message: string) => void = () => {};

  private examplesCache: ExampleFile[] | null = null;
  private verifyChain: Promise<void> = Promise.resolve();
  private pendingBatches = 0;

  constructor(readonly api: Api) {}

  private emit(): void {
    this.onChange();
  }

  async examples(): Promise<ExampleFile[]> {
    if (this.examplesCache === null) {
      this.examplesCache = (await this.api.examples()).examples;
    }
    return this.examplesCache;
  }

  async loadExample(name: string): Promise<void> {
    const files = await this.examples();
    const file = files.find((f) => f.name === name);
    if (!file) throw new Error(`unknown example: ${name}`);
    this.state.source = file.source;
    this.state.dirty = true;
    this.state.vcs = [];
    this.state.diagnostics = [];
    this.emit();
    await this.refreshVcs();
  }

  /** Record an editor keystroke: the VC list is now stale. */
  editSource(text: string): void {
    this.state.source = text;
    this.state.dirty = true;
    for (const vc of this.state.vcs) {
      vc.badge = "unchecked";
      vc.detail = "";
    }
    this.emit();
  }

  async refreshVcs(): Promise<void> {
    const response = await this.api.vcs(this.state.source);
    this.state.vcs = response.vcs.map(toView);
    this.state.diagnostics = response.errors;
    this.state.dirty = false;
    this.emit();
  }

  /** Verify the given VC ids (null = all). Batches are serialized: when one
   * is already in flight the new batch waits for it. Disabled while dirty. */
  verify(ids: string[] | null = null): Promise<void> {
    if (this.state.dirty || this.state.vcs.length === 0) return this.verifyChain;
    this.pendingBatches += 1;
    this.state.busy = true;
    this.emit();
    this.verifyChain = this.verifyChain
      .then(() => this.runVerify(ids))
      .finally(() => {
        this.pendingBatches -= 1;
        if (this.pendingBatches === 0) {
          this.state.busy = false;
          this.emit();
        }
      });
    return this.verifyChain;
  }

  private async runVerify(ids: string[] | null): Promise<void> {
    if (this.state.dirty) return; // the document changed while this batch was queued
    const sourceAtStart = this.state.source;
    const stale = () => this.state.dirty || this.state.source !== sourceAtStart;
    let outcomes: VerifyOutcome[];
    try {
      outcomes = (await this.api.verify(sourceAtStart, ids)).results;
    } catch (e) {
      if (stale()) return;
      if (e instanceof ApiError && Array.isArray(e.detail)) {
        this.state.diagnostics = e.detail as DocError[];
        this.emit();
        return;
      }
      this.onError(e instanceof Error ? e.message : String(e));
      return;
    }
    if (stale()) return; // results describe a document the editor no longer shows
    const byId = new Map(this.state.vcs.map((vc) => [vc.id, vc]));
    for (const outcome of outcomes) {
      const vc = byId.get(outcome.id);
      if (!vc) continue;
      if ("error" in outcome) {
        vc.badge = "error";
        vc.detail = outcome.error;
      } else {
        vc.badge = badgeFor(outcome);
        vc.detail = describe(outcome);
      }
    }
    this.emit();
  }

  /** Ask the server to bind a solver to one VC; the editor text is replaced
   * by the rewritten document and the VC list refreshed against it. */
  async chooseSolver(vcId: string, solver: string): Promise<void> {
    const response = await this.api.setSolver(this.state.source, vcId, solver);
    this.state.source = response.source;
    this.state.dirty = true;
    this.emit();
    await this.refreshVcs();
  }

  /** The highlight decorations for a VC: exactly the spans the server sent. */
  decorationsFor(vcId: string): Span[] {
    const vc = this.state.vcs.find((v) => v.id === vcId);
    return vc ? vc.spans : [];
  }
}
