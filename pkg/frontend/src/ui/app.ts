/**
 * Single-page app wiring: project setup, annotation + intent input,
 * strategy editing, dataset/caption browsing, training monitor, model
 * gallery, and the generation panel. All state lives in the service; a
 * reload rebuilds every view from API responses.
 */

import { ApiClient, ApiError } from "../api/client.js";
import type { CaptionEntry, SpecDocument } from "../api/types.js";
import {
  AnnotationCanvasModel,
  colorForRegion,
} from "../state/annotations.js";
import { ModelGallery } from "../state/gallery.js";
import { MonitorModel } from "../state/monitor.js";
import { StrategyEditor, StrategyParseError } from "../state/strategy.js";
import { renderChart } from "./chart.js";

interface AppState {
  projectId: string | null;
  imageIds: string[];
  runId: string | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function statusLine(root: HTMLElement): (message: string, error?: boolean) => void {
  const line = el("p", { class: "status" });
  root.appendChild(line);
  return (message, error = false) => {
    line.textContent = message;
    line.style.color = error ? "#b00020" : "#2e7d32";
  };
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.code}: ${error.message}`;
  }
  if (error instanceof StrategyParseError) {
    return error.message;
  }
  return String(error);
}

export function mountApp(root: HTMLElement, client = new ApiClient()): void {
  const state: AppState = { projectId: null, imageIds: [], runId: null };
  const annotations = new AnnotationCanvasModel();

  root.appendChild(el("h1", {}, "intentforge"));

  // --- project + upload -----------------------------------------------
  const setup = el("section");
  setup.appendChild(el("h2", {}, "1. Project"));
  const nameInput = el("input", { placeholder: "project name" });
  const createButton = el("button", {}, "Create project");
  const fileInput = el("input", { type: "file", multiple: "true" });
  const setupStatus = statusLine(setup);
  setup.append(nameInput, createButton, fileInput);
  root.appendChild(setup);

  createButton.addEventListener("click", async () => {
    try {
      const project = await client.createProject(nameInput.value || "project");
      state.projectId = project.project_id;
      setupStatus(`project ${project.project_id} created`);
    } catch (error) {
      setupStatus(describeError(error), true);
    }
  });

  fileInput.addEventListener("change", async () => {
    if (state.projectId === null || fileInput.files === null) {
      return;
    }
    const files = await Promise.all(
      Array.from(fileInput.files).map(async (file) => {
        const bytes = new Uint8Array(await file.arrayBuffer());
        let binary = "";
        bytes.forEach((b) => (binary += String.fromCharCode(b)));
        return { filename: file.name, content_base64: btoa(binary) };
      }),
    );
    try {
      state.imageIds = await client.uploadImages(state.projectId, files);
      setupStatus(`uploaded ${state.imageIds.length} images`);
      renderThumbnails();
    } catch (error) {
      setupStatus(describeError(error), true);
    }
  });

  // --- annotation + intent --------------------------------------------
  const intentSection = el("section");
  intentSection.appendChild(el("h2", {}, "2. Intent"));
  const thumbs = el("div", { class: "thumbs" });
  const regionList = el("ul");
  const undoButton = el("button", {}, "Undo");
  const clearButton = el("button", {}, "Clear all");
  const intentText = el("textarea", {
    rows: "4",
    cols: "72",
    placeholder: "keep the face, change the jacket [1] into [2] …",
  });
  const submitButton = el("button", {}, "Generate FineTuning Strategy");
  const intentStatus = statusLine(intentSection);
  intentSection.append(
    thumbs,
    regionList,
    undoButton,
    clearButton,
    el("br"),
    intentText,
    el("br"),
    submitButton,
  );
  root.appendChild(intentSection);

  function renderRegionList(): void {
    regionList.replaceChildren(
      ...annotations.list().map((region) => {
        const item = el(
          "li",
          {},
          `[${region.regionId}] on ${region.imageId} ` +
            `(${region.bbox.map((v) => v.toFixed(2)).join(", ")})`,
        );
        item.style.color = colorForRegion(region);
        return item;
      }),
    );
  }

  function renderThumbnails(): void {
    thumbs.replaceChildren(
      ...state.imageIds.map((imageId) => {
        const img = el("img", {
          src: `/projects/${state.projectId}/images/${imageId}`,
          width: "128",
          draggable: "false",
        });
        let start: { x: number; y: number } | null = null;
        img.addEventListener("mousedown", (event) => {
          const bounds = img.getBoundingClientRect();
          start = { x: event.clientX - bounds.left, y: event.clientY - bounds.top };
        });
        img.addEventListener("mouseup", (event) => {
          if (start === null) {
            return;
          }
          const bounds = img.getBoundingClientRect();
          const end = { x: event.clientX - bounds.left, y: event.clientY - bounds.top };
          annotations.addBox(
            imageId,
            {
              x: Math.min(start.x, end.x),
              y: Math.min(start.y, end.y),
              width: Math.abs(end.x - start.x),
              height: Math.abs(end.y - start.y),
            },
            { width: bounds.width, height: bounds.height },
          );
          start = null;
          renderRegionList();
        });
        return img;
      }),
    );
  }

  undoButton.addEventListener("click", () => {
    annotations.undo();
    renderRegionList();
  });
  clearButton.addEventListener("click", () => {
    annotations.clearAll();
    renderRegionList();
  });

  // --- strategy editor -------------------------------------------------
  const strategySection = el("section");
  strategySection.appendChild(el("h2", {}, "3. Strategy"));
  const strategyArea = el("textarea", { rows: "16", cols: "72" });
  const saveStrategy = el("button", {}, "Save strategy");
  const strategyStatus = statusLine(strategySection);
  strategySection.append(strategyArea, el("br"), saveStrategy);
  root.appendChild(strategySection);

  let editor: StrategyEditor | null = null;

  function showSpec(spec: SpecDocument): void {
    strategyArea.value = JSON.stringify(spec, null, 2);
    strategyStatus(`strategy for trigger word "${spec.trigger_word}"`);
  }

  submitButton.addEventListener("click", async () => {
    if (state.projectId === null) {
      intentStatus("create a project first", true);
      return;
    }
    try {
      const spec = await client.submitIntent(
        state.projectId,
        intentText.value,
        annotations.toPayload(),
      );
      editor = new StrategyEditor(client, state.projectId);
      await editor.load();
      showSpec(spec);
      intentStatus("strategy generated");
    } catch (error) {
      intentStatus(describeError(error), true);
    }
  });

  saveStrategy.addEventListener("click", async () => {
    if (editor === null) {
      strategyStatus("generate a strategy first", true);
      return;
    }
    try {
      showSpec(await editor.save(strategyArea.value));
      strategyStatus("strategy saved");
    } catch (error) {
      strategyStatus(describeError(error), true);
    }
  });

  // --- preprocess + captions ------------------------------------------
  const dataSection = el("section");
  dataSection.appendChild(el("h2", {}, "4. Processed data"));
  const preprocessButton = el("button", {}, "Preprocess dataset");
  const captionList = el("div");
  const dataStatus = statusLine(dataSection);
  dataSection.append(preprocessButton, captionList);
  root.appendChild(dataSection);

  function highlightedCaption(entry: CaptionEntry): HTMLElement {
    const line = el("p");
    let cursor = 0;
    for (const span of entry.highlights) {
      line.appendChild(
        document.createTextNode(entry.caption.slice(cursor, span.start)),
      );
      const mark = el("mark", { title: span.concept });
      mark.textContent = entry.caption.slice(span.start, span.end);
      line.appendChild(mark);
      cursor = span.end;
    }
    line.appendChild(document.createTextNode(entry.caption.slice(cursor)));
    line.prepend(el("strong", {}, `${entry.path}: `));
    return line;
  }

  preprocessButton.addEventListener("click", async () => {
    if (state.projectId === null) {
      return;
    }
    try {
      const summary = await client.preprocess(state.projectId);
      dataStatus(
        "folders: " +
          Object.entries(summary.folders)
            .map(([name, count]) => `${name}=${count}`)
            .join(", "),
      );
      const captions = await client.getCaptions(state.projectId);
      captionList.replaceChildren(...captions.map(highlightedCaption));
    } catch (error) {
      dataStatus(describeError(error), true);
    }
  });

  // --- train + monitor -------------------------------------------------
  const monitorSection = el("section");
  monitorSection.appendChild(el("h2", {}, "5. Training monitor"));
  const trainButton = el("button", {}, "Start training");
  const stopButton = el("button", {}, "Stop");
  const promptField = el("input", {
    placeholder: "sample prompt (applies to future samples)",
    size: "48",
  });
  const chartHost = el("div");
  const samplesStrip = el("div", { class: "thumbs" });
  const monitorStatus = statusLine(monitorSection);
  monitorSection.append(trainButton, stopButton, promptField, chartHost, samplesStrip);
  root.appendChild(monitorSection);

  let monitor: MonitorModel | null = null;

  function renderMonitor(): void {
    if (monitor === null) {
      return;
    }
    chartHost.innerHTML = renderChart(monitor);
    samplesStrip.replaceChildren(
      ...monitor.checkpoints.map((checkpoint) =>
        el("img", { src: checkpoint.coverUrl, width: "96", title: `step ${checkpoint.step}` }),
      ),
    );
    monitorStatus(`run ${state.runId}: ${monitor.status}`);
  }

  trainButton.addEventListener("click", async () => {
    if (state.projectId === null) {
      return;
    }
    try {
      const run = await client.train(state.projectId, {});
      state.runId = run.run_id;
      monitor = new MonitorModel(client, run.run_id);
      monitor.samplePrompt = promptField.value;
      void (async () => {
        while (!(await monitor!.poll())) {
          renderMonitor();
          await new Promise((resolve) => setTimeout(resolve, 300));
        }
        renderMonitor();
        await refreshGallery();
      })();
    } catch (error) {
      monitorStatus(describeError(error), true);
    }
  });

  promptField.addEventListener("change", () => {
    if (monitor !== null) {
      monitor.samplePrompt = promptField.value;
    }
  });

  stopButton.addEventListener("click", async () => {
    if (monitor === null) {
      return;
    }
    try {
      await monitor.stop();
      renderMonitor();
    } catch (error) {
      monitorStatus(describeError(error), true);
    }
  });

  // --- gallery + generation -------------------------------------------
  const gallerySection = el("section");
  gallerySection.appendChild(el("h2", {}, "6. Models"));
  const galleryHost = el("div", { class: "thumbs" });
  const scoreHost = el("ol");
  const genPrompt = el("input", { placeholder: "generation prompt", size: "48" });
  const genSeed = el("input", { type: "number", value: "0" });
  const genButton = el("button", {}, "Generate");
  const genImage = el("img", { width: "192" });
  const galleryStatus = statusLine(gallerySection);
  gallerySection.append(galleryHost, scoreHost, genPrompt, genSeed, genButton, genImage);
  root.appendChild(gallerySection);

  let gallery: ModelGallery | null = null;

  async function refreshGallery(): Promise<void> {
    if (state.projectId === null) {
      return;
    }
    gallery = new ModelGallery(client, state.projectId);
    const cards = await gallery.load();
    galleryHost.replaceChildren(
      ...cards.map((card) => {
        const img = el("img", { src: card.cover_url, width: "96", title: `step ${card.step}` });
        img.addEventListener("click", () => {
          const selected = gallery!.select(card.step);
          scoreHost.replaceChildren(
            ...gallery!
              .scoreRows(selected)
              .map((row) => el("li", {}, `${row.label} = ${row.value}`)),
          );
        });
        return img;
      }),
    );
    galleryStatus(`${cards.length} checkpoints in library`);
  }

  genButton.addEventListener("click", async () => {
    const card = gallery?.selected();
    if (card === undefined || card === null || state.runId === null) {
      galleryStatus("select a model first", true);
      return;
    }
    try {
      const image = await client.generate(
        card.run_id,
        card.step,
        genPrompt.value,
        Number(genSeed.value),
      );
      genImage.src = `data:image/png;base64,${image}`;
    } catch (error) {
      galleryStatus(describeError(error), true);
    }
  });
}
