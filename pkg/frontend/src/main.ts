import { setup } from "./app";

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", () => {
    setup(document);
  });
} else {
  setup(document);
}
