import { GameApp } from "./app.js";

document.addEventListener("DOMContentLoaded", () => {
  const app = new GameApp(document);
  void app.start();
});
