import { ApiClient } from "./api.js";
import { DomView } from "./dom.js";
import { SessionFlow } from "./flow.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
const view = new DomView(root);
const flow = new SessionFlow(new ApiClient(""), view);
flow.run().catch((err) => {
  view.onScreen({ kind: "error", message: String(err) });
});
