// DOM wiring: review queue with evidence-box overlays, alarm chart with
// model-swap markers, and the curation-round trigger. All state shown here
// comes from API responses; see queue.ts / stats.ts for the logic.

import { ApiClient, ApiError } from "./api";
import { overlayRect, overlayStyle } from "./overlay";
import { ReviewQueue } from "./queue";
import { renderChartSvg, toChartModel } from "./stats";
import type { EventCard } from "./queue";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "");
const reviewer = params.get("reviewer") ?? "reviewer";

const CARD_IMAGE_WIDTH = 320;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderCard(card: EventCard, selected: boolean, queue: ReviewQueue): HTMLElement {
  const root = el("article", `card${selected ? " selected" : ""}`);
  const header = el("header");
  header.append(
    el("span", `badge ${card.eventType}`, card.eventType.replace("_", " ")),
    el("span", "channel", card.channel),
    el("span", "time", new Date(card.time).toLocaleString()),
    el("span", "score", `score ${card.score.toFixed(2)}`),
  );
  root.append(header);

  const still = el("div", "still");
  still.style.width = `${CARD_IMAGE_WIDTH}px`;
  if (card.imageRef) {
    const img = el("img");
    img.src = card.imageRef;
    img.alt = `${card.eventType} evidence`;
    img.addEventListener("load", () => {
      const display = {
        width: img.clientWidth,
        height: img.clientHeight,
      };
      const natural = { width: img.naturalWidth, height: img.naturalHeight };
      const overlay = el("div", "overlay");
      overlay.setAttribute("style", overlayStyle(overlayRect(card.box, natural, display)));
      still.append(overlay);
    });
    still.append(img);
  } else {
    still.append(el("p", "no-still", `no still image; box ${card.box.map((v) => v.toFixed(0)).join(", ")}`));
  }
  root.append(still);

  const actions = el("footer", "actions");
  const accept = el("button", "accept", "real (a)");
  accept.addEventListener("click", () => void queue.accept(card));
  const rejectLabel = card.negativeClass ? `false → ${card.negativeClass} (x)` : "false (x)";
  const reject = el("button", "reject", rejectLabel);
  reject.addEventListener("click", () => void queue.reject(card));
  actions.append(accept, reject);
  if (card.negativeClass) {
    // the selector is constrained: only the paired negative class is legal
    const select = el("select", "negative-class");
    const option = el("option", "", card.negativeClass);
    option.value = card.negativeClass;
    select.append(option);
    select.disabled = true;
    actions.append(select);
  }
  root.append(actions);
  return root;
}

async function refreshStats(statsRoot: HTMLElement, bucket: "day" | "hour"): Promise<void> {
  statsRoot.replaceChildren(el("p", "loading", "loading alarm series..."));
  try {
    const stats = await api.alarmStats(bucket);
    const model = toChartModel(stats);
    const holder = el("div", "chart");
    holder.innerHTML = renderChartSvg(model);
    statsRoot.replaceChildren(
      el("h2", "", `alarms per ${bucket} (total ${model.grandTotal})`),
      holder,
    );
  } catch (error) {
    statsRoot.replaceChildren(el("p", "error", `stats unavailable: ${String(error)}`));
  }
}

async function refreshModels(root: HTMLElement): Promise<void> {
  try {
    const { models } = await api.listModels();
    const list = el("ul", "models");
    for (const model of models) {
      list.append(el("li", "", `${model.model_id} = ${model.composition.join(" + ")}`));
    }
    root.replaceChildren(el("h2", "", `models (${models.length})`), list);
  } catch (error) {
    root.replaceChildren(el("p", "error", `models unavailable: ${String(error)}`));
  }
}

function main(): void {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app mount point");
  const queueRoot = el("section", "queue-view");
  const statsRoot = el("section", "stats-view");
  const modelsRoot = el("section", "models-view");
  const controls = el("section", "controls");
  const status = el("p", "status", "");
  app.append(controls, status, queueRoot, statsRoot, modelsRoot);

  const queue = new ReviewQueue(api, reviewer, { status: "unreviewed" }, 12, {
    onChanged: renderQueue,
    onError: (message) => {
      status.textContent = message;
      status.className = "status error";
    },
  });

  const roundButton = el("button", "round", "start curation round");
  roundButton.disabled = true;
  roundButton.addEventListener("click", () => {
    roundButton.disabled = true;
    roundButton.textContent = "round in progress...";
    api
      .triggerRound()
      .then((result) => {
        queue.noteRoundConsumed();
        status.className = "status";
        status.textContent =
          `round done: ${result.model_id} consumed ${result.consumed_event_ids.length} verdicts; ` +
          `training set ${result.composition_report.image_count} images`;
      })
      .catch((error) => {
        status.className = "status error";
        status.textContent =
          error instanceof ApiError && error.status === 409
            ? `round unavailable: ${error.detail}`
            : `round failed (registry unchanged): ${String(error)}`;
      })
      .finally(() => {
        roundButton.textContent = "start curation round";
        renderQueue();
        void refreshModels(modelsRoot);
        void refreshStats(statsRoot, bucketSelect.value as "day" | "hour");
      });
  });

  const bucketSelect = el("select");
  for (const bucket of ["day", "hour"]) {
    const option = el("option", "", `per ${bucket}`);
    option.value = bucket;
    bucketSelect.append(option);
  }
  bucketSelect.addEventListener("change", () =>
    void refreshStats(statsRoot, bucketSelect.value as "day" | "hour"),
  );

  const typeFilter = el("select");
  for (const value of ["", "fire", "person", "stoppage", "wrong_way"]) {
    const option = el("option", "", value === "" ? "all types" : value);
    option.value = value;
    typeFilter.append(option);
  }
  typeFilter.addEventListener("change", () => {
    queue.filters = { status: "unreviewed", type: typeFilter.value || undefined };
    void queue.load(1);
  });

  controls.append(typeFilter, bucketSelect, roundButton);

  function renderQueue(): void {
    const cards = queue.cards.map((card, i) => renderCard(card, i === queue.selected, queue));
    const heading = el(
      "h2",
      "",
      `unreviewed events: ${queue.total}` +
        (queue.pages > 1 ? ` (page ${queue.page}/${queue.pages})` : ""),
    );
    queueRoot.replaceChildren(heading, ...cards);
    if (queue.cards.length === 0 && !queue.loading) {
      queueRoot.append(el("p", "empty", "queue is clear"));
    }
    roundButton.disabled = !queue.roundTriggerable();
  }

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) {
      return;
    }
    void queue.onKey(event.key);
  });

  queue
    .load(1)
    .catch((error) => {
      status.className = "status error";
      status.textContent = `service unreachable: ${String(error)} — nothing loaded, nothing lost`;
    });
  void refreshStats(statsRoot, "day");
  void refreshModels(modelsRoot);
}

main();
