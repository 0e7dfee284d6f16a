import { ReviewApi } from "./api";
import { mountApp } from "./app";
import "./style.css";

// API base URL: ?api=http://host:port overrides; default is same-origin,
// which works when the bundle is served by `thma serve --ui`.
const base = new URLSearchParams(window.location.search).get("api") ?? "";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
const app = mountApp(new ReviewApi(base), root);
void app.refresh();
