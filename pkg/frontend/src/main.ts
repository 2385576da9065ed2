import { WikiApi } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}
const app = new App(new WikiApi(""), root);

function navigate(): void {
  void app.route(window.location.hash || "#/");
}

window.addEventListener("hashchange", navigate);
navigate();
