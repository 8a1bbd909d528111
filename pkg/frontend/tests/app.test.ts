// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { AnnotationApp } from "../src/app.js";
import { AnnotationClient } from "../src/api.js";
import { MockService, makeItems } from "./mockserver.js";

function mount(service: MockService): { app: AnnotationApp; root: HTMLElement } {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app")!;
  const app = new AnnotationApp(root, new AnnotationClient("", service.fetch), service.sessionId);
  app.attachKeyboard(document);
  return { app, root };
}

function pressKey(key: string): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key }));
}

async function settle(): Promise<void> {
  for (let i = 0; i < 8; i++) await Promise.resolve();
}

async function waitFor(condition: () => boolean, ms = 3000): Promise<void> {
  const started = Date.now();
  while (!condition()) {
    if (Date.now() - started > ms) throw new Error("waitFor timed out");
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

describe("AnnotationApp", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders the pair with the edit highlighted and badges", async () => {
    const service = new MockService(makeItems(2), 2);
    const { app, root } = mount(service);
    await app.start();
    expect(root.querySelector(".type-badge")!.textContent).toBe("negation");
    expect(root.querySelector(".origin-label-badge")!.textContent).toContain("1");
    expect(root.querySelector("mark.diff-inserted")!.textContent).toBe("not");
    expect(root.querySelectorAll("button[data-label]")).toHaveLength(2);
  });

  it("identical payload renders identically", async () => {
    const service = new MockService(makeItems(1), 1);
    const { app, root } = mount(service);
    await app.start();
    const first = root.innerHTML;
    await app.loadNext();
    expect(root.innerHTML).toBe(first);
  });

  it("keyboard and button submissions produce identical requests", async () => {
    const keyboardService = new MockService(makeItems(1), 1);
    const keyboard = mount(keyboardService);
    await keyboard.app.start();
    pressKey("1");
    await waitFor(() => keyboardService.labeled.size === 1);
    await settle();

    const buttonService = new MockService(makeItems(1), 1);
    const button = mount(buttonService);
    await button.app.start();
    (button.root.querySelector('button[data-label="1"]') as HTMLButtonElement).click();
    await waitFor(() => buttonService.labeled.size === 1);
    await settle();

    const posts = (requests: string[]) => requests.filter((r) => r.startsWith("POST"));
    expect(posts(keyboardService.requests)).toEqual(posts(buttonService.requests));
  });

  it("labels a 10-item queue end-to-end with keyboard shortcuts", async () => {
    const service = new MockService(makeItems(10), 10);
    const { root } = mount(service);
    const { bootstrap } = await import("../src/app.js");
    void bootstrap; // controller already mounted above
    const app = new AnnotationApp(root, new AnnotationClient("", service.fetch), service.sessionId);
    app.attachKeyboard(document);
    await app.start();

    const submitted: Array<[string, number]> = [];
    for (let i = 0; i < 10; i++) {
      const itemId = root.querySelector(".annotation")!.getAttribute("data-item-id")!;
      const label = i % 3 === 0 ? 1 : 0;
      submitted.push([itemId, label]);
      pressKey(String(label));
      await waitFor(() => service.labeled.size === i + 1);
      await waitFor(
        () =>
          root.querySelector(".annotation")?.getAttribute("data-item-id") !== itemId ||
          root.querySelector(".completed") !== null,
      );
    }

    // completion screen: no label controls, an export link
    expect(root.querySelector(".completed")).not.toBeNull();
    expect(root.querySelectorAll("button[data-label]")).toHaveLength(0);
    expect(root.querySelector("a.export-link")).not.toBeNull();

    // export equals the submitted labels
    const exported = service
      .exportText()
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line) as { id: string; label: number });
    expect(exported.map((r) => [r.id, r.label])).toEqual(submitted);

    // no oracle or policy label ever reached a client payload
    const payloads = service.requests.filter((r) => r.includes("/next"));
    expect(payloads.length).toBeGreaterThan(0);
    for (const request of service.requests) {
      expect(request).not.toContain("oracle");
      expect(request).not.toContain("policy");
    }
  }, 20000);

  it("double submit is a no-op", async () => {
    const service = new MockService(makeItems(3), 3);
    const { app } = mount(service);
    await app.start();
    const [first, second] = [app.submit(1), app.submit(1)];
    await Promise.all([first, second]);
    await settle();
    expect(service.labeled.size).toBe(1);
  });

  it("rejected labels keep the view and show a banner", async () => {
    const service = new MockService(makeItems(2), 2);
    const broken = new MockService(makeItems(2), 2);
    broken.fetch = async (input, init) => {
      const url = String(input);
      if (url.endsWith("/labels")) {
        return new Response(JSON.stringify({ code: "validation_error", message: "nope" }), {
          status: 400,
          headers: { "content-type": "application/json" },
        });
      }
      return service.fetch(input, init);
    };
    const { app, root } = mount(broken);
    await app.start();
    pressKey("0");
    await waitFor(() => root.querySelector(".error-banner") !== null);
    expect(root.textContent).toContain("validation_error");
  });

  it("page reload reconstructs the same view from server state", async () => {
    const service = new MockService(makeItems(4), 4);
    const first = mount(service);
    await first.app.start();
    pressKey("1");
    await waitFor(() => service.labeled.size === 1);
    await waitFor(() => first.root.innerHTML.includes("1/4"));
    const before = first.root.innerHTML;

    const second = mount(service); // fresh "page load", same session
    await second.app.start();
    expect(second.root.innerHTML).toBe(before);
  });
});
