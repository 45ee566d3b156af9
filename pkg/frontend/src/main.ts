import { SurveyApi } from "./api.js";
import { SurveyController } from "./controller.js";

function raterIdFromLocation(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("rater") ?? "r1";
}

const container = document.getElementById("app");
if (container) {
  const controller = new SurveyController(
    new SurveyApi(""),
    raterIdFromLocation(),
    container,
    document,
  );
  document.addEventListener("keydown", (event) => controller.handleKey(event.key));
  void controller.start();
}
