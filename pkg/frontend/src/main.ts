import { ApiClient } from "./api.js";
import { createApp } from "./app.js";
import { SessionMachine } from "./session.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("page has no #app element");
}

const machine = new SessionMachine(new ApiClient(""));
const saved = window.localStorage.getItem("annotator");
if (saved) {
  machine.annotator = saved;
}
createApp(root, machine);

const field = document.getElementById("annotator") as HTMLInputElement | null;
if (field) {
  field.value = machine.annotator;
  field.addEventListener("input", () => {
    window.localStorage.setItem("annotator", machine.annotator);
  });
}

void machine.refresh();
