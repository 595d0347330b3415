import { el } from "./dom.js";
import type { QueuePage, QueueRow } from "./types.js";

// The server owns the ordering: the table renders rows exactly as delivered
// and a header click just changes the sort parameter for the next fetch, so
// what the user sees is the server's order by construction.

export interface SortState {
  key: string;
  descending: boolean;
}

// Fresh queue views land on newest-first, same as the server's default.
export const DEFAULT_SORT: SortState = { key: "request_id", descending: true };

export const STATUS_OPTIONS = [
  "Saved",
  "Submitted",
  "Cancelled",
  "Under Review",
  "Rejected",
  "Pending",
  "Approved",
  "Completed",
] as const;

export const RECORD_KIND_OPTIONS = ["New", "Assigned", "Suspended"] as const;

/** Sort string for GET /queue: a leading "-" means descending. */
export function sortParam(state: SortState): string {
  return (state.descending ? "-" : "") + state.key;
}

/** Clicking the active column flips its direction; a new column starts
 * ascending. */
export function nextSort(current: SortState, clickedKey: string): SortState {
  if (current.key === clickedKey) {
    return { key: clickedKey, descending: !current.descending };
  }
  return { key: clickedKey, descending: false };
}

export interface QueueHandlers {
  onSort(next: SortState): void;
  onOpen(requestId: number): void;
}

export function renderQueueTable(
  page: QueuePage,
  sort: SortState,
  handlers: QueueHandlers,
): HTMLTableElement {
  const headRow = el("tr");
  for (const column of page.columns) {
    const active = column.key === sort.key;
    const th = el(
      "th",
      {
        class: active ? "sortable sorted" : "sortable",
        "data-key": column.key,
        onclick: () => handlers.onSort(nextSort(sort, column.key)),
      },
      column.label,
    );
    if (active) {
      th.append(el("span", { class: "sort-arrow" }, sort.descending ? " ▼" : " ▲"));
    }
    headRow.append(th);
  }

  const tbody = el("tbody");
  if (page.rows.length === 0) {
    tbody.append(
      el("tr", {}, el("td", { class: "empty", colspan: String(page.columns.length) }, "No requests match.")),
    );
  }
  for (const row of page.rows) {
    const tr = el("tr", {
      class: "queue-row",
      onclick: () => handlers.onOpen(row.request_id),
    });
    for (const column of page.columns) {
      const value = row[column.key as keyof QueueRow];
      const cell = el("td", { "data-key": column.key }, String(value ?? ""));
      if (column.key === "status") {
        cell.className = "status status-" + String(value).toLowerCase().replace(/\s+/g, "-");
      }
      tr.append(cell);
    }
    tbody.append(tr);
  }

  return el("table", { class: "queue-table" }, el("thead", {}, headRow), tbody);
}

export function renderPager(
  page: QueuePage,
  onPage: (page: number) => void,
): HTMLElement {
  const prev = el(
    "button",
    { class: "pager-btn", disabled: page.page <= 1, onclick: () => onPage(page.page - 1) },
    "‹ Prev",
  );
  const next = el(
    "button",
    {
      class: "pager-btn",
      disabled: page.page >= page.total_pages,
      onclick: () => onPage(page.page + 1),
    },
    "Next ›",
  );
  const label = el(
    "span",
    { class: "pager-label" },
    `Page ${page.page} of ${page.total_pages} · ${page.total_rows} requests`,
  );
  return el("div", { class: "pager" }, prev, label, next);
}
