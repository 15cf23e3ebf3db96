/** End-to-end flow against the real verification service.
 *
 * The service is spawned as a child process (the installed console script)
 * and the UI is mounted in jsdom, talking to it over real HTTP with the
 * environment's fetch. This exercises the full loop: example loading, VC
 * generation, hover spans, solver runs, and hint rewriting — everything a
 * browser session would do, minus pixel rendering.
 */

import { spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { mountApp } from "../src/app.js";
import { mergeSpans } from "../src/highlight.js";
import type { Mounted } from "../src/app.js";
import type { VcRecord } from "../src/api.js";

const PORT = 8971;
const BASE = `http://127.0.0.1:${PORT}`;
const EXAMPLE = "ode_skip_exec.hhl";

let service: ChildProcess;
let mounted: Mounted;
let served: VcRecord[];

function q<T extends Element>(selector: string): T {
  const el = document.querySelector(selector);
  if (!el) throw new Error(`missing element: ${selector}`);
  return el as T;
}

function qa<T extends Element>(selector: string): T[] {
  return Array.from(document.querySelectorAll(selector)) as T[];
}

async function until(condition: () => boolean, tries = 600): Promise<void> {
  for (let i = 0; i < tries && !condition(); i++) {
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  expect(condition()).toBe(true);
}

function byteSlice(source: string, start: number, end: number): string {
  return Buffer.from(source, "utf8").subarray(start, end).toString("utf8");
}

beforeAll(async () => {
  service = spawn("hhlverify-service", ["--port", String(PORT)], {
    stdio: "ignore",
  });
  let up = false;
  for (let i = 0; i < 100 && !up; i++) {
    try {
      up = (await fetch(`${BASE}/examples`)).ok;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 300));
    }
  }
  if (!up) throw new Error("verification service did not come up");

  document.body.innerHTML = "<div id='app'></div>";
  mounted = mountApp(document.getElementById("app") as HTMLElement, new Api(BASE));
  await mounted.ready;
});

afterAll(() => {
  service?.kill();
});

describe("end-to-end UI flow", () => {
  it("loads the ODE example into the editor and shows its four VC cards", async () => {
    q<HTMLButtonElement>(`button.file[data-name='${EXAMPLE}']`).click();
    await until(() => qa(".vc-card").length === 4);
    const labels = qa<HTMLElement>(".vc-card .vc-label").map((el) => el.textContent);
    expect([...labels].sort()).toEqual(["exec", "init", "maintain", "skip"]);
    expect(q<HTMLTextAreaElement>(".source").value).toContain("_dot");

    // ground truth for the later span checks, fetched independently
    const source = q<HTMLTextAreaElement>(".source").value;
    const response = await fetch(`${BASE}/vcs`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ source }),
    });
    served = (await response.json()).vcs as VcRecord[];
    expect(served).toHaveLength(4);
    // cards appear in exactly the order the server sent
    expect(qa<HTMLElement>(".vc-card").map((c) => c.dataset.id)).toEqual(
      served.map((record) => record.id),
    );
  });

  it("hover on each card highlights exactly the served spans", () => {
    const source = q<HTMLTextAreaElement>(".source").value;
    for (const record of served) {
      const card = q<HTMLElement>(`.vc-card[data-id='${record.id}']`);
      card.dispatchEvent(new MouseEvent("mouseenter"));
      expect(mounted.app.decorationsFor(record.id)).toEqual(record.spans);
      const marks = Array.from(document.querySelectorAll(".highlights mark"));
      const expected = mergeSpans(record.spans).map(([s, e]) => byteSlice(source, s, e));
      expect(marks.map((m) => m.textContent)).toEqual(expected);
      card.dispatchEvent(new MouseEvent("mouseleave"));
      expect(document.querySelectorAll(".highlights mark")).toHaveLength(0);
    }
  });

  it("verify-all turns every badge proved", async () => {
    q<HTMLButtonElement>(".verify-all").click();
    await until(() => qa(".badge.proved").length === 4);
    expect(qa(".badge").map((b) => b.textContent)).toEqual([
      "proved",
      "proved",
      "proved",
      "proved",
    ]);
  });

  it("selecting wolfram on the init VC rewrites the editor text with the hint", async () => {
    const initCard = qa<HTMLElement>(".vc-card").find(
      (c) => c.querySelector(".vc-label")?.textContent === "init",
    ) as HTMLElement;
    const select = initCard.querySelector(".vc-solver") as HTMLSelectElement;
    select.value = "wolfram";
    select.dispatchEvent(new Event("change"));
    await until(() => q<HTMLTextAreaElement>(".source").value.includes("{{init: wolfram}}"));
    // after the automatic refresh the regenerated VC carries the binding
    await until(() => {
      const card = qa<HTMLElement>(".vc-card").find(
        (c) => c.querySelector(".vc-label")?.textContent === "init",
      );
      const solver = card?.querySelector(".vc-solver") as HTMLSelectElement | null;
      return solver?.value === "wolfram";
    });
  });
});
