/**
 * Annotation session controller.
 *
 * Stateless beyond the session id: every render is reconstructed from
 * server state, so a reload lands exactly where the annotator left off.
 * Keyboard keys 0/1 and the two buttons submit through the same path;
 * double submissions are a no-op because the server is idempotent and
 * an in-flight guard drops repeats.
 */

import { AnnotationClient, ApiError, ItemPayload } from "./api.js";
import { buildView, renderDone, renderError, renderItem } from "./view.js";

export class AnnotationApp {
  private current: ItemPayload | null = null;
  private submitting = false;

  constructor(
    private root: HTMLElement,
    private client: AnnotationClient,
    private sessionId: string,
  ) {
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      const label = target.getAttribute("data-label");
      if (label !== null) void this.submit(Number(label) as 0 | 1);
      if (target.getAttribute("data-action") === "retry") void this.loadNext();
    });
  }

  handleKey(key: string): void {
    if (key === "0") void this.submit(0);
    if (key === "1") void this.submit(1);
  }

  attachKeyboard(target: Pick<Document, "addEventListener">): void {
    target.addEventListener("keydown", (event) => this.handleKey((event as KeyboardEvent).key));
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    try {
      const next = await this.client.next(this.sessionId);
      if (next.status === "ok") {
        this.current = next.item;
        const progress = await this.client.progress(this.sessionId);
        this.root.innerHTML = renderItem(buildView(next.item), progress);
      } else {
        this.current = null;
        const progress = await this.client.progress(this.sessionId);
        this.root.innerHTML = renderDone(progress, this.client.exportUrl(this.sessionId));
      }
    } catch (error) {
      this.current = null;
      this.root.innerHTML = renderError(describe(error));
    }
  }

  async submit(label: 0 | 1): Promise<void> {
    if (this.current === null || this.submitting) return;
    const itemId = this.current.item_id;
    this.submitting = true;
    try {
      await this.client.submit(this.sessionId, itemId, label);
      await this.loadNext();
    } catch (error) {
      this.root.innerHTML = renderError(describe(error));
    } finally {
      this.submitting = false;
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}

export function bootstrap(doc: Document, baseUrl?: string): AnnotationApp | null {
  const params = new URLSearchParams(doc.location.search);
  const sessionId = params.get("session");
  const root = doc.getElementById("app");
  if (!sessionId || !root) return null;
  const service = baseUrl ?? params.get("service") ?? "";
  const app = new AnnotationApp(root, new AnnotationClient(service), sessionId);
  app.attachKeyboard(doc);
  void app.start();
  return app;
}
