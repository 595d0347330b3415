import { ApiClient } from "./api.js";
import { startApp } from "./app.js";

// The API runs as its own process, so the page needs to know where it lives:
// ?api=http://host:port wins, then the last value used, then the port the
// README's config example listens on.

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) {
    try {
      window.localStorage.setItem("policydesk.api", fromQuery);
    } catch {
      // remembering the choice is best-effort
    }
    return fromQuery;
  }
  try {
    const remembered = window.localStorage.getItem("policydesk.api");
    if (remembered) return remembered;
  } catch {
    // fall through to the default
  }
  return `${window.location.protocol}//${window.location.hostname}:8420`;
}

const root = document.getElementById("app");
if (root) {
  startApp(root, new ApiClient(apiBase()));
}
