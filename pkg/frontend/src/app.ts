import { ApiClient, ApiError } from "./api.js";
import { clearChildren, el, option } from "./dom.js";
import { EditBuffer, renderObjectForm } from "./form.js";
import {
  DEFAULT_SORT,
  RECORD_KIND_OPTIONS,
  STATUS_OPTIONS,
  renderPager,
  renderQueueTable,
  sortParam,
} from "./queue.js";
import type { SortState } from "./queue.js";
import type {
  ClassOfService,
  EditSpec,
  PackagePolicy,
  PepRecord,
  RequestDetail,
  UserInfo,
  Workspace,
} from "./types.js";

const TOKEN_KEY = "policydesk.token";

// Which transition buttons make sense per status.  The server is the
// authority — anything it refuses comes back as a banner — this map only
// keeps obviously-dead buttons off terminal requests.
const ACTIONS_BY_STATUS: Record<string, string[]> = {
  Saved: ["submit", "cancel"],
  Submitted: ["cancel", "reject"],
  "Under Review": ["pend", "approve", "reject"],
  Pending: ["review"],
  Approved: ["complete"],
  Cancelled: [],
  Rejected: [],
  Completed: [],
};

interface QueueFilters {
  sort: SortState;
  status: string;
  kind: string;
  page: number;
}

export function startApp(root: HTMLElement, client: ApiClient): void {
  void new App(root, client).boot();
}

class App {
  private user: UserInfo | null = null;
  private workspaces: Workspace[] = [];
  private filters: QueueFilters = { sort: { ...DEFAULT_SORT }, status: "", kind: "", page: 1 };

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  async boot(): Promise<void> {
    const saved = this.storedToken();
    if (saved) {
      this.client.setToken(saved);
      try {
        const session = await this.client.session();
        if (session.restricted) {
          // Verification was never finished; keep the account gated.
          this.showVerification(session.verification_questions ?? []);
        } else {
          this.enter(session.user, session.workspaces);
        }
        return;
      } catch {
        this.client.setToken(null);
        this.storeToken(null);
      }
    }
    this.showLogin();
  }

  // -- shared chrome ---------------------------------------------------------

  private screen(title: string, ...content: HTMLElement[]): void {
    clearChildren(this.root);
    const bar = el("header", { class: "topbar" }, el("span", { class: "brand" }, "policydesk"));
    if (this.user) {
      bar.append(
        el("span", { class: "who" }, `${this.user.email} · ${this.user.role}`),
        el("button", { class: "linkish", onclick: () => void this.doLogout() }, "Sign out"),
      );
    }
    this.root.append(bar, el("h2", { class: "screen-title" }, title), ...content);
  }

  private errorBanner(err: unknown): HTMLElement {
    let text: string;
    let detail = "";
    if (err instanceof ApiError) {
      text = `${err.code}: ${err.message}`;
      if (Object.keys(err.details).length > 0) {
        detail = JSON.stringify(err.details, null, 2);
      }
    } else {
      text = String(err);
    }
    const banner = el("div", { class: "error-banner" }, text);
    if (detail) banner.append(el("pre", { class: "error-detail" }, detail));
    return banner;
  }

  private async doLogout(): Promise<void> {
    try {
      await this.client.logout();
    } catch {
      // token may already be stale; signing out locally is enough
    }
    this.user = null;
    this.workspaces = [];
    this.storeToken(null);
    this.showLogin();
  }

  private storedToken(): string | null {
    try {
      return window.sessionStorage.getItem(TOKEN_KEY);
    } catch {
      return null;
    }
  }

  private storeToken(token: string | null): void {
    try {
      if (token) window.sessionStorage.setItem(TOKEN_KEY, token);
      else window.sessionStorage.removeItem(TOKEN_KEY);
    } catch {
      // storage blocked (private mode?); sessions just won't survive reload
    }
  }

  // -- login and first-use verification -------------------------------------

  showLogin(notice?: string): void {
    this.user = null;
    const email = el("input", { class: "form-input", type: "email", name: "email", autocomplete: "username" });
    const secret = el("input", { class: "form-input", type: "password", name: "secret", autocomplete: "current-password" });
    const slot = el("div", { class: "banner-slot" });
    if (notice) slot.append(el("div", { class: "notice-banner" }, notice));

    const form = el("form", { class: "login-form" });
    form.append(
      el("label", { class: "form-label" }, "Email", email),
      el("label", { class: "form-label" }, "Secret", secret),
      el("button", { class: "primary", type: "submit" }, "Sign in"),
      slot,
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void (async () => {
        clearChildren(slot);
        try {
          const res = await this.client.login(email.value.trim(), secret.value);
          this.storeToken(res.token);
          if (res.restricted) {
            this.showVerification(res.verification_questions ?? []);
          } else {
            this.enter(res.user, res.workspaces);
          }
        } catch (err) {
          slot.append(this.errorBanner(err));
        }
      })();
    });
    this.screen("Sign in", form);
  }

  /** First customer login lands here and nothing else is reachable until the
   * off-line verification answers are on file. */
  showVerification(questions: string[]): void {
    const inputs = questions.map(() => el("input", { class: "form-input", type: "text" }));
    const slot = el("div", { class: "banner-slot" });
    const form = el("form", { class: "login-form", "data-screen": "verification" });
    form.append(
      el(
        "p",
        { class: "hint" },
        "Before anything else, set your off-line verification answers. Support uses these to confirm it's really you.",
      ),
    );
    questions.forEach((question, i) => {
      form.append(el("label", { class: "form-label" }, question, inputs[i]));
    });
    form.append(el("button", { class: "primary", type: "submit" }, "Save answers"), slot);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void (async () => {
        clearChildren(slot);
        try {
          await this.client.setVerification(inputs.map((input) => input.value));
          // The session is unrestricted now; pull workspaces and move on.
          const session = await this.client.session();
          this.enter(session.user, session.workspaces);
        } catch (err) {
          slot.append(this.errorBanner(err));
        }
      })();
    });
    this.screen("Account verification", form);
  }

  private enter(user: UserInfo, workspaces: Workspace[]): void {
    this.user = user;
    this.workspaces = workspaces;
    if (user.role === "Customer") {
      this.showWorkspaces();
    } else {
      void this.showQueue();
    }
  }

  // -- ops: queue and request detail -----------------------------------------

  async showQueue(): Promise<void> {
    const f = this.filters;
    const slot = el("div", { class: "banner-slot" });
    const tableHost = el("div", { class: "table-host" });

    const statusSelect = el("select", { class: "filter" }, option("", "All statuses"));
    for (const status of STATUS_OPTIONS) statusSelect.append(option(status));
    statusSelect.value = f.status;
    statusSelect.addEventListener("change", () => {
      f.status = statusSelect.value;
      f.page = 1;
      void this.showQueue();
    });

    const kindSelect = el("select", { class: "filter" }, option("", "All records"));
    for (const kind of RECORD_KIND_OPTIONS) kindSelect.append(option(kind));
    kindSelect.value = f.kind;
    kindSelect.addEventListener("change", () => {
      f.kind = kindSelect.value;
      f.page = 1;
      void this.showQueue();
    });

    const refresh = el("button", { class: "filter", onclick: () => void this.showQueue() }, "Refresh");
    const controls = el("div", { class: "queue-controls" }, statusSelect, kindSelect, refresh);

    this.screen("Work queue", controls, slot, tableHost);

    try {
      const page = await this.client.queueView({
        sort: sortParam(f.sort),
        status: f.status,
        kind: f.kind,
        page: f.page,
      });
      tableHost.append(
        renderQueueTable(page, f.sort, {
          onSort: (next) => {
            f.sort = next;
            f.page = 1;
            void this.showQueue();
          },
          onOpen: (requestId) => void this.showDetail(requestId),
        }),
        renderPager(page, (target) => {
          f.page = target;
          void this.showQueue();
        }),
      );
    } catch (err) {
      slot.append(this.errorBanner(err));
    }
  }

  async showDetail(requestId: number): Promise<void> {
    const slot = el("div", { class: "banner-slot" });
    const host = el("div", { class: "detail-host" });
    const back = el("button", { class: "linkish", onclick: () => void this.showQueue() }, "‹ Back to queue");
    this.screen(`Request #${requestId}`, back, slot, host);

    let detail: RequestDetail;
    try {
      detail = await this.client.requestDetail(requestId);
    } catch (err) {
      slot.append(this.errorBanner(err));
      return;
    }
    const req = detail.request;

    const facts = el("dl", { class: "facts" });
    const fact = (label: string, value: string) => {
      facts.append(el("dt", {}, label), el("dd", {}, value));
    };
    fact("Status", req.status + (req.suspended ? " (suspended)" : ""));
    fact("Class of service", req.class_of_service);
    fact("Requested at", detail.requested_at);
    fact("Customer", req.customer_id);
    fact("Product", req.product_id);
    fact("Package", req.package_id);
    fact("Created by", req.created_by);
    fact("Assigned to", req.assigned_to || "—");
    if (req.start_date) fact("Started", req.start_date);
    if (req.end_date) fact("Finished", req.end_date);
    host.append(facts);

    const run = (work: () => Promise<unknown>) => {
      void (async () => {
        clearChildren(slot);
        try {
          await work();
          await this.showDetail(requestId);
        } catch (err) {
          slot.append(this.errorBanner(err));
        }
      })();
    };

    const actions = el("div", { class: "actions" });
    if (!req.assigned_to && req.status === "Submitted" && !req.suspended) {
      actions.append(
        el(
          "button",
          { class: "primary", onclick: () => run(() => this.client.assignRequest(requestId, this.user!.user_id)) },
          "Assign to me",
        ),
      );
    }
    for (const action of ACTIONS_BY_STATUS[req.status] ?? []) {
      actions.append(
        el(
          "button",
          { class: "action", onclick: () => run(() => this.client.transitionRequest(requestId, action)) },
          action,
        ),
      );
    }
    if (this.user?.role === "OpsAdmin" && !["Cancelled", "Rejected", "Completed"].includes(req.status)) {
      actions.append(
        el(
          "button",
          { class: "action", onclick: () => run(() => this.client.suspendRequest(requestId, req.suspended)) },
          req.suspended ? "resume" : "suspend",
        ),
      );
    }
    host.append(actions);

    for (const item of detail.work_items) {
      const panel = el("section", { class: "work-item" });
      panel.append(
        el("h3", {}, `${item.target_kind} ${item.target_id}`),
        el("span", { class: "badge" }, item.item_status),
      );
      const table = el("table", { class: "values-table" });
      for (const [column, value] of Object.entries(item.proposed_values)) {
        table.append(el("tr", {}, el("td", { class: "col-name" }, column), el("td", {}, value)));
      }
      panel.append(table);
      host.append(panel);
    }

    for (const policy of detail.policies) {
      const panel = el("section", { class: "policy-panel" });
      panel.append(el("h3", {}, policy.policy_name), el("span", { class: "object-id" }, policy.object.object_id));
      const table = el("table", { class: "values-table" });
      const entries = Object.entries(policy.object.values);
      if (entries.length === 0) {
        table.append(el("tr", {}, el("td", { class: "empty" }, "no values yet")));
      }
      for (const [column, value] of entries) {
        table.append(el("tr", {}, el("td", { class: "col-name" }, column), el("td", {}, value)));
      }
      panel.append(table);
      host.append(panel);
    }
  }

  // -- customers: workspaces and change-request form -------------------------

  showWorkspaces(): void {
    const list = el("div", { class: "workspace-list" });
    if (this.workspaces.length === 0) {
      list.append(el("p", { class: "hint" }, "No products are shared with this account yet."));
    }
    for (const workspace of this.workspaces) {
      const card = el(
        "button",
        { class: "workspace-card", onclick: () => void this.showPackages(workspace) },
        el("strong", {}, workspace.product_name),
        el("span", {}, workspace.customer_name),
        el("span", { class: "badge" }, workspace.privilege),
      );
      list.append(card);
    }
    this.screen("Your products", list);
  }

  async showPackages(workspace: Workspace): Promise<void> {
    const slot = el("div", { class: "banner-slot" });
    const host = el("div", { class: "package-list" });
    const back = el("button", { class: "linkish", onclick: () => this.showWorkspaces() }, "‹ All products");
    this.screen(`${workspace.product_name} — ${workspace.customer_name}`, back, slot, host);

    try {
      const view = await this.client.customerView(workspace.customer_id);
      const subs = view.subscriptions.filter((s) => s.product_id === workspace.product_id);
      if (subs.length === 0) {
        host.append(el("p", { class: "hint" }, "No subscription for this product yet."));
      }
      for (const sub of subs) {
        for (const packageId of sub.package_ids) {
          const peps = view.peps.filter((p) => p.package_id === packageId);
          host.append(
            el(
              "button",
              { class: "workspace-card", onclick: () => void this.showPackageForm(workspace, packageId) },
              el("strong", {}, packageId),
              el("span", {}, `${peps.length} enforcement point${peps.length === 1 ? "" : "s"}`),
            ),
          );
        }
      }
    } catch (err) {
      slot.append(this.errorBanner(err));
    }
  }

  async showPackageForm(workspace: Workspace, packageId: string): Promise<void> {
    const slot = el("div", { class: "banner-slot" });
    const host = el("div", { class: "form-host" });
    const back = el(
      "button",
      { class: "linkish", onclick: () => void this.showPackages(workspace) },
      "‹ Packages",
    );
    const readOnly = workspace.privilege !== "ReadWrite";
    this.screen(`Package ${packageId}`, back, slot, host);
    if (readOnly) {
      host.append(el("p", { class: "hint" }, "Read-only access: values are shown but cannot be changed."));
    }

    try {
      const view = await this.client.packageView(packageId);
      const buffers: { spec: Omit<EditSpec, "values">; buffer: EditBuffer }[] = [];
      const formOpts = {
        readOnly,
        uploadFile: (file: File) => this.client.uploadFile(file).then((r) => r.token),
        onError: (err: unknown) => {
          clearChildren(slot);
          slot.append(this.errorBanner(err));
        },
      };

      for (const policy of view.policies as PackagePolicy[]) {
        const buffer = new EditBuffer(policy.object);
        buffers.push({
          spec: { target_kind: "customer_policy", target_id: policy.customer_policy_id },
          buffer,
        });
        host.append(renderObjectForm(policy.policy_name, policy.object, buffer, formOpts));
      }
      for (const pep of view.peps as PepRecord[]) {
        if (!pep.object) continue;
        const buffer = new EditBuffer(pep.object);
        buffers.push({ spec: { target_kind: "pep", target_id: pep.pep_id }, buffer });
        host.append(renderObjectForm(`Enforcement point ${pep.pep_id}`, pep.object, buffer, formOpts));
      }

      if (readOnly) return;

      const cosSelect = el("select", { class: "filter" });
      for (const cos of ["Standard", "Expedited", "Emergency"]) cosSelect.append(option(cos));
      const draftBox = el("input", { type: "checkbox" });
      const submit = el("button", { class: "primary" }, "File change request");
      submit.addEventListener("click", () => {
        void (async () => {
          clearChildren(slot);
          const edits: EditSpec[] = buffers
            .filter((b) => b.buffer.dirty)
            .map((b) => ({ ...b.spec, values: b.buffer.values() }));
          if (edits.length === 0) {
            slot.append(el("div", { class: "notice-banner" }, "Nothing changed yet."));
            return;
          }
          try {
            const filed = await this.client.submitRequest({
              package_id: packageId,
              class_of_service: cosSelect.value as ClassOfService,
              edits,
              draft: draftBox.checked,
            });
            clearChildren(host);
            host.append(
              el(
                "div",
                { class: "success-banner" },
                `Request #${filed.request_id} ${filed.status === "Saved" ? "saved as draft" : "filed"} — status ${filed.status}.`,
              ),
              el(
                "button",
                { class: "linkish", onclick: () => void this.showPackageForm(workspace, packageId) },
                "Make another change",
              ),
            );
          } catch (err) {
            slot.append(this.errorBanner(err));
          }
        })();
      });
      host.append(
        el(
          "div",
          { class: "submit-row" },
          el("label", { class: "form-label" }, "Class of service", cosSelect),
          el("label", { class: "checkbox-label" }, draftBox, " save as draft"),
          submit,
        ),
      );
    } catch (err) {
      slot.append(this.errorBanner(err));
    }
  }
}
