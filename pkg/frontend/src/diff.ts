/**
 * Token-level diff between the original and counterfactual sentences.
 *
 * Longest-common-subsequence over whitespace tokens; each maximal
 * unmatched region becomes character spans into the displayed strings
 * so the edit can be highlighted for the annotator.
 */

export type SpanKind = "inserted" | "deleted" | "replaced";

export interface DiffSpan {
  kind: SpanKind;
  side: "original" | "counterfactual";
  start: number;
  end: number;
}

interface Token {
  text: string;
  start: number;
  end: number;
}

function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  const re = /\S+/g;
  let match: RegExpExecArray | null;
  while ((match = re.exec(text)) !== null) {
    tokens.push({ text: match[0], start: match.index, end: match.index + match[0].length });
  }
  return tokens;
}

function lcsTable(a: Token[], b: Token[]): number[][] {
  const table: number[][] = Array.from({ length: a.length + 1 }, () =>
    new Array<number>(b.length + 1).fill(0),
  );
  for (let i = a.length - 1; i >= 0; i--) {
    for (let j = b.length - 1; j >= 0; j--) {
      table[i][j] =
        a[i].text === b[j].text
          ? table[i + 1][j + 1] + 1
          : Math.max(table[i + 1][j], table[i][j + 1]);
    }
  }
  return table;
}

function spanOver(tokens: Token[], from: number, to: number): { start: number; end: number } {
  return { start: tokens[from].start, end: tokens[to - 1].end };
}

/** Diff spans for a (original, counterfactual) pair. */
export function tokenDiff(original: string, counterfactual: string): DiffSpan[] {
  const a = tokenize(original);
  const b = tokenize(counterfactual);
  const table = lcsTable(a, b);
  const spans: DiffSpan[] = [];
  let i = 0;
  let j = 0;
  while (i < a.length || j < b.length) {
    if (i < a.length && j < b.length && a[i].text === b[j].text) {
      i++;
      j++;
      continue;
    }
    const i0 = i;
    const j0 = j;
    while (i < a.length || j < b.length) {
      if (i < a.length && j < b.length && a[i].text === b[j].text) break;
      if (i < a.length && (j >= b.length || table[i + 1][j] >= table[i][j + 1])) i++;
      else j++;
    }
    const deleted = i > i0;
    const inserted = j > j0;
    if (deleted && inserted) {
      spans.push({ kind: "replaced", side: "original", ...spanOver(a, i0, i) });
      spans.push({ kind: "replaced", side: "counterfactual", ...spanOver(b, j0, j) });
    } else if (deleted) {
      spans.push({ kind: "deleted", side: "original", ...spanOver(a, i0, i) });
    } else if (inserted) {
      spans.push({ kind: "inserted", side: "counterfactual", ...spanOver(b, j0, j) });
    }
  }
  return spans;
}
