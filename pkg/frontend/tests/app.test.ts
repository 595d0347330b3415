import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { startApp } from "../src/app.js";
import type { QueueRow } from "../src/types.js";

// Drives the real app against a scripted backend: the fake answers exactly
// like the HTTP service, including the queue honouring the sort parameter,
// so these tests check the UI stays consistent with what the server returns.

const QUESTIONS = [
  "What month and year did your service start? (YYYY/MM)",
  "What is the postal code on file for your account?",
];

const SERVER_COLUMNS = [
  { key: "request_id", label: "Request Id" },
  { key: "class_of_service", label: "Class Of Service" },
  { key: "request_time", label: "Request Time" },
  { key: "customer", label: "Customer ID-Name" },
  { key: "product", label: "Product" },
  { key: "status", label: "Status" },
  { key: "assigned_to", label: "Assigned to" },
];

function makeRow(id: number, status: string): QueueRow {
  return {
    request_id: id,
    class_of_service: "Standard",
    request_time: `2026-03-10T0${id % 10}:00:00`,
    customer: "CUS-1-Acme Networks",
    product: "SecureNet Shield",
    status,
    assigned_to: "",
  };
}

const ROWS = [makeRow(1, "Submitted"), makeRow(2, "Approved"), makeRow(3, "Pending")];

const OPS_USER = {
  user_id: "omar@netops.example",
  email: "omar@netops.example",
  role: "Ops",
  name: "Omar",
  phone: "",
  verification_set: true,
  active: true,
};

const CAROL_USER = {
  user_id: "carol@acme.example",
  email: "carol@acme.example",
  role: "Customer",
  name: "Carol",
  phone: "",
  verification_set: false,
  active: true,
};

const CAROL_WORKSPACES = [
  {
    customer_id: "CUS-1",
    customer_name: "Acme Networks",
    product_id: "PRD-1",
    product_name: "SecureNet Shield",
    privilege: "ReadWrite",
  },
];

interface Backend {
  fetch: (url: string, init?: RequestInit) => Promise<Response>;
  queueCalls: URLSearchParams[];
  verificationBodies: unknown[];
  verified: boolean;
}

function makeBackend(): Backend {
  const state: Backend = {
    queueCalls: [],
    verificationBodies: [],
    verified: false,
    fetch: async (url, init) => {
      const method = (init?.method ?? "GET").toUpperCase();
      const parsed = new URL(url);
      const path = parsed.pathname;

      const json = (body: unknown, status = 200) =>
        new Response(JSON.stringify(body), {
          status,
          headers: { "Content-Type": "application/json" },
        });
      const fail = (status: number, code: string, message: string) =>
        json({ error: { code, message, details: {} } }, status);

      if (method === "POST" && path === "/login") {
        const body = JSON.parse(String(init?.body ?? "{}"));
        if (body.email === OPS_USER.email) {
          return json({ token: "tok-ops", user: OPS_USER, restricted: false, workspaces: [] });
        }
        if (body.email === CAROL_USER.email) {
          if (state.verified) {
            return json({
              token: "tok-carol",
              user: { ...CAROL_USER, verification_set: true },
              restricted: false,
              workspaces: CAROL_WORKSPACES,
            });
          }
          return json({
            token: "tok-carol",
            user: CAROL_USER,
            restricted: true,
            workspaces: [],
            verification_questions: QUESTIONS,
          });
        }
        return fail(401, "LoginFailed", "bad credentials");
      }

      const auth = ((init?.headers ?? {}) as Record<string, string>)["Authorization"] ?? "";
      if (!auth.startsWith("Bearer ")) {
        return fail(401, "AuthenticationRequired", "send Authorization: Bearer <token>");
      }
      const restricted = auth === "Bearer tok-carol" && !state.verified;

      if (method === "POST" && path === "/verification") {
        const body = JSON.parse(String(init?.body ?? "{}"));
        state.verificationBodies.push(body);
        const answers: string[] = body.answers ?? [];
        if (answers.length !== QUESTIONS.length || answers.some((a) => !a.trim())) {
          return fail(400, "AnswerEmpty", "both verification answers are required");
        }
        state.verified = true;
        return json({ ok: true });
      }
      if (method === "GET" && path === "/session") {
        // like the real server, a restricted session may still ask who it is
        const isCarol = auth === "Bearer tok-carol";
        if (restricted) {
          return json({
            user: CAROL_USER,
            restricted: true,
            workspaces: [],
            verification_questions: QUESTIONS,
          });
        }
        return json({
          user: isCarol ? { ...CAROL_USER, verification_set: true } : OPS_USER,
          restricted: false,
          workspaces: isCarol ? CAROL_WORKSPACES : [],
        });
      }
      if (restricted) {
        return fail(403, "VerificationRequired", "off-line verification must be set first");
      }

      if (method === "GET" && path === "/queue") {
        state.queueCalls.push(parsed.searchParams);
        // order exactly as the server would for the requested sort
        const sort = parsed.searchParams.get("sort") ?? "-request_id";
        const descending = sort.startsWith("-");
        const key = (descending ? sort.slice(1) : sort) as keyof QueueRow;
        const rows = [...ROWS].sort((a, b) => {
          const left = a[key];
          const right = b[key];
          const cmp = left < right ? -1 : left > right ? 1 : 0;
          return descending ? -cmp : cmp;
        });
        return json({
          columns: SERVER_COLUMNS,
          rows,
          page: 1,
          page_size: 25,
          total_rows: rows.length,
          total_pages: 1,
        });
      }

      if (method === "POST" && path === "/logout") return json({ ok: true });

      return fail(404, "UnknownEntity", `no route ${method} ${path}`);
    },
  };
  return state;
}

function mount(backend: Backend): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app")!;
  startApp(root, new ApiClient("http://api.test", backend.fetch));
  return root;
}

function fillLogin(root: HTMLElement, email: string): void {
  const emailInput = root.querySelector('input[name="email"]') as HTMLInputElement;
  const secretInput = root.querySelector('input[name="secret"]') as HTMLInputElement;
  emailInput.value = email;
  secretInput.value = "whatever";
  root
    .querySelector("form")!
    .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

async function waitForText(root: HTMLElement, text: string): Promise<void> {
  await vi.waitFor(() => {
    expect(root.textContent).toContain(text);
  });
}

beforeEach(() => {
  window.sessionStorage.clear();
  window.localStorage.clear();
});

describe("ops queue flow", () => {
  it("lands on the queue sorted newest-first and renders the server's columns", async () => {
    const backend = makeBackend();
    const root = mount(backend);
    await waitForText(root, "Sign in");

    fillLogin(root, OPS_USER.email);
    await waitForText(root, "Work queue");
    await vi.waitFor(() => expect(root.querySelector(".queue-table")).not.toBeNull());

    // the first fetch asked for the default order
    expect(backend.queueCalls[0].get("sort")).toBe("-request_id");

    const headers = [...root.querySelectorAll("th")].map((th) => th.childNodes[0].textContent);
    expect(headers).toEqual(SERVER_COLUMNS.map((c) => c.label));

    const ids = [...root.querySelectorAll("td[data-key=request_id]")].map((td) => td.textContent);
    expect(ids).toEqual(["3", "2", "1"]);
  });

  it("round-trips a header click through the server and shows its new order", async () => {
    const backend = makeBackend();
    const root = mount(backend);
    await waitForText(root, "Sign in");
    fillLogin(root, OPS_USER.email);
    await vi.waitFor(() => expect(root.querySelector(".queue-table")).not.toBeNull());

    (root.querySelector("th[data-key=status]") as HTMLElement).click();
    await vi.waitFor(() => {
      expect(backend.queueCalls.at(-1)?.get("sort")).toBe("status");
    });
    await vi.waitFor(() => {
      const statuses = [...root.querySelectorAll("td[data-key=status]")].map(
        (td) => td.textContent,
      );
      expect(statuses).toEqual(["Approved", "Pending", "Submitted"]);
    });

    // same header again flips to descending
    (root.querySelector("th[data-key=status]") as HTMLElement).click();
    await vi.waitFor(() => {
      expect(backend.queueCalls.at(-1)?.get("sort")).toBe("-status");
    });
    await vi.waitFor(() => {
      const statuses = [...root.querySelectorAll("td[data-key=status]")].map(
        (td) => td.textContent,
      );
      expect(statuses).toEqual(["Submitted", "Pending", "Approved"]);
    });
  });
});

describe("first-login verification gate", () => {
  it("sends a fresh customer to the verification screen, not the app", async () => {
    const backend = makeBackend();
    const root = mount(backend);
    await waitForText(root, "Sign in");

    fillLogin(root, CAROL_USER.email);
    await waitForText(root, "Account verification");
    expect(root.textContent).toContain(QUESTIONS[0]);
    expect(root.textContent).toContain(QUESTIONS[1]);
    // nothing from the signed-in app has leaked through the gate
    expect(root.textContent).not.toContain("Your products");
    expect(root.querySelector(".queue-table")).toBeNull();
  });

  it("rejects empty answers with the server's error and stays gated", async () => {
    const backend = makeBackend();
    const root = mount(backend);
    await waitForText(root, "Sign in");
    fillLogin(root, CAROL_USER.email);
    await waitForText(root, "Account verification");

    const form = root.querySelector('form[data-screen="verification"]')!;
    form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    await waitForText(root, "AnswerEmpty");
    expect(root.textContent).toContain("Account verification");
  });

  it("unlocks the workspace screen once answers are on file", async () => {
    const backend = makeBackend();
    const root = mount(backend);
    await waitForText(root, "Sign in");
    fillLogin(root, CAROL_USER.email);
    await waitForText(root, "Account verification");

    const inputs = [
      ...root.querySelectorAll('form[data-screen="verification"] input'),
    ] as HTMLInputElement[];
    inputs[0].value = "2019/03";
    inputs[1].value = "94105";
    root
      .querySelector('form[data-screen="verification"]')!
      .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));

    await waitForText(root, "Your products");
    expect(backend.verificationBodies.at(-1)).toEqual({ answers: ["2019/03", "94105"] });
    expect(root.textContent).toContain("SecureNet Shield");
    expect(root.textContent).toContain("ReadWrite");
  });

  it("keeps a reloaded restricted session gated too", async () => {
    const backend = makeBackend();
    // simulate an earlier restricted login whose token survived in storage
    window.sessionStorage.setItem("policydesk.token", "tok-carol");
    const root = mount(backend);
    await waitForText(root, "Account verification");
    expect(root.querySelector(".queue-table")).toBeNull();
  });
});
