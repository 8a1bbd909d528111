import { bootstrap } from "./app.js";

const app = bootstrap(document);
if (!app) {
  const root = document.getElementById("app");
  if (root) {
    root.innerHTML =
      "<p>Pass <code>?session=&lt;id&gt;</code> (and optionally " +
      "<code>&amp;service=http://host:port</code>) to start annotating.</p>";
  }
}
