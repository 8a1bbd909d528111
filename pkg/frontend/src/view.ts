/** Pure view construction: payload -> AnnotationView -> HTML. */

import { DiffSpan, tokenDiff } from "./diff.js";
import { ItemPayload, Progress } from "./api.js";

export interface AnnotationView {
  item_id: string;
  original_text: string;
  counterfactual_text: string;
  diff_spans: DiffSpan[];
  type_badge: string;
  origin_label_badge: 0 | 1;
}

export function buildView(item: ItemPayload): AnnotationView {
  return {
    item_id: item.item_id,
    original_text: item.original_text,
    counterfactual_text: item.counterfactual_text,
    diff_spans: tokenDiff(item.original_text, item.counterfactual_text),
    type_badge: item.type,
    origin_label_badge: item.origin_label as 0 | 1,
  };
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function highlight(text: string, spans: DiffSpan[], side: DiffSpan["side"]): string {
  const own = spans
    .filter((s) => s.side === side)
    .sort((a, b) => a.start - b.start);
  let html = "";
  let cursor = 0;
  for (const span of own) {
    html += escapeHtml(text.slice(cursor, span.start));
    html += `<mark class="diff-${span.kind}">${escapeHtml(text.slice(span.start, span.end))}</mark>`;
    cursor = span.end;
  }
  html += escapeHtml(text.slice(cursor));
  return html;
}

export function renderItem(view: AnnotationView, progress: Progress): string {
  const pct = progress.budget > 0 ? Math.round((100 * progress.labeled) / progress.budget) : 0;
  return `
  <div class="annotation" data-item-id="${escapeHtml(view.item_id)}">
    <div class="badges">
      <span class="badge type-badge">${escapeHtml(view.type_badge)}</span>
      <span class="badge origin-label-badge">original label: ${view.origin_label_badge}</span>
    </div>
    <p class="sentence original">${highlight(view.original_text, view.diff_spans, "original")}</p>
    <p class="sentence counterfactual">${highlight(view.counterfactual_text, view.diff_spans, "counterfactual")}</p>
    <div class="controls">
      <button type="button" data-label="0" title="shortcut: 0">label 0 (negative)</button>
      <button type="button" data-label="1" title="shortcut: 1">label 1 (positive)</button>
    </div>
    <div class="progress">
      <div class="progress-bar" style="width: ${pct}%"></div>
      <span class="progress-text">${progress.labeled}/${progress.budget}</span>
    </div>
  </div>`;
}

export function renderDone(progress: Progress, exportUrl: string): string {
  return `
  <div class="completed">
    <p>Session ${escapeHtml(progress.state)}: ${progress.labeled}/${progress.budget} labels submitted.</p>
    <a class="export-link" href="${escapeHtml(exportUrl)}">download labeled items</a>
  </div>`;
}

export function renderError(message: string): string {
  return `
  <div class="error-banner">
    <p>${escapeHtml(message)}</p>
    <button type="button" data-action="retry">retry</button>
  </div>`;
}
