/** Admin dashboard: CSV upload with import report, per-task metrics
 * (pairwise kappa matrix, mean CMI, histogram, completion counts) and a
 * filtered CSV download form. */
import { ApiClient, ApiError, Metrics } from "../api";
import { clear, el } from "../dom";

export interface AdminContext {
  api: ApiClient;
  tasks: string[];
}

function metricsTable(metrics: Metrics): HTMLElement {
  const box = el("div", { class: "metrics", "data-testid": "metrics" });
  box.append(
    el("p", {}, `Corpus size: ${metrics.corpus_size}`),
    el("p", { "data-testid": "mean-cmi" },
       `Mean CMI: ${metrics.mean_cmi === null ? "n/a" : metrics.mean_cmi.toFixed(2)}`),
  );

  const histogram = el("div", { class: "histogram", "data-testid": "histogram" });
  const peak = Math.max(1, ...metrics.cmi_histogram);
  metrics.cmi_histogram.forEach((count, bin) => {
    const bar = el("div", { class: "bar", title: `[${bin * 10}, ${bin * 10 + 10}): ${count}` });
    bar.style.height = `${(count / peak) * 60 + 2}px`;
    histogram.append(bar);
  });
  box.append(histogram);

  if (metrics.kappa && metrics.kappa.annotators.length > 0) {
    const table = el("table", { class: "kappa", "data-testid": "kappa-matrix" });
    const header = el("tr", {}, el("th", {}, "κ"));
    for (const annotator of metrics.kappa.annotators) {
      header.append(el("th", {}, String(annotator)));
    }
    table.append(header);
    metrics.kappa.matrix.forEach((row, i) => {
      const tr = el("tr", {}, el("th", {}, String(metrics.kappa!.annotators[i])));
      for (const cell of row) {
        tr.append(el("td", {}, cell === null ? "–" : cell.toFixed(3)));
      }
      table.append(tr);
    });
    box.append(
      table,
      el("p", { "data-testid": "kappa-mean" },
         `Mean pairwise κ: ${metrics.kappa.mean === null ? "n/a" : metrics.kappa.mean.toFixed(3)}`),
    );
  } else {
    box.append(el("p", {}, "No annotations yet for this task."));
  }

  const counts = el("ul", { class: "completion" });
  for (const [annotator, done] of Object.entries(metrics.completion_counts)) {
    counts.append(el("li", {}, `annotator ${annotator}: ${done}/${metrics.corpus_size}`));
  }
  box.append(counts);
  return box;
}

export function renderAdminPage(context: AdminContext): HTMLElement {
  const root = el("div", { class: "page admin-page" });
  root.append(el("h2", {}, "Admin"));

  // Upload.
  const uploadReport = el("div", { class: "upload-report", "data-testid": "upload-report" });
  const fileInput = el("input", { type: "file", accept: ".csv", "data-testid": "upload-input" }) as HTMLInputElement;
  const uploadButton = el("button", { "data-testid": "upload-button" }, "Upload CSV");
  uploadButton.addEventListener("click", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      const report = await context.api.uploadCsv(await file.text());
      clear(uploadReport).append(
        el("p", {},
           `Inserted ${report.inserted}, skipped ${report.skipped_duplicates} duplicates, ` +
           `rejected ${report.rejected.length}.`),
      );
    } catch (error) {
      const message = error instanceof ApiError ? error.message : "upload failed";
      clear(uploadReport).append(el("p", { class: "error" }, message));
    }
  });
  root.append(
    el("section", { class: "card" }, el("h3", {}, "Upload sentences"), fileInput,
       uploadButton, uploadReport),
  );

  // Metrics.
  const taskSelect = el("select", { "data-testid": "metrics-task" });
  for (const task of context.tasks) taskSelect.append(el("option", { value: task }, task));
  const metricsBox = el("div", {});
  const metricsButton = el("button", { "data-testid": "metrics-button" }, "Compute metrics");
  metricsButton.addEventListener("click", async () => {
    try {
      const metrics = await context.api.metrics((taskSelect as HTMLSelectElement).value);
      clear(metricsBox).append(metricsTable(metrics));
    } catch (error) {
      const message = error instanceof ApiError ? error.message : "metrics failed";
      clear(metricsBox).append(el("p", { class: "error" }, message));
    }
  });
  root.append(
    el("section", { class: "card" }, el("h3", {}, "Annotation analysis"), taskSelect,
       metricsButton, metricsBox),
  );

  // Filtered download.
  const downloadTask = el("select", { "data-testid": "download-task" });
  for (const task of context.tasks) downloadTask.append(el("option", { value: task }, task));
  const minCmi = el("input", { type: "number", placeholder: "min CMI", "data-testid": "min-cmi" }) as HTMLInputElement;
  const maxCmi = el("input", { type: "number", placeholder: "max CMI", "data-testid": "max-cmi" }) as HTMLInputElement;
  const minKappa = el("input", { type: "number", step: "0.05", placeholder: "min κ", "data-testid": "min-kappa" }) as HTMLInputElement;
  const annotators = el("input", { type: "text", placeholder: "annotators a,b", "data-testid": "annotators" }) as HTMLInputElement;
  const downloadStatus = el("span", { class: "status", "data-testid": "download-status" });
  const downloadButton = el("button", { "data-testid": "download-button" }, "Download CSV");
  downloadButton.addEventListener("click", async () => {
    try {
      const task = (downloadTask as HTMLSelectElement).value;
      const text = await context.api.exportCsv(task, {
        min_cmi: minCmi.value,
        max_cmi: maxCmi.value,
        min_kappa: minKappa.value,
        annotators: annotators.value,
      });
      const link = el("a", {
        href: URL.createObjectURL(new Blob([text], { type: "text/csv" })),
        download: `annotations-${task}.csv`,
      });
      link.click();
      downloadStatus.textContent = `downloaded ${text.split("\n").length - 2} rows`;
    } catch (error) {
      downloadStatus.textContent =
        error instanceof ApiError ? error.message : "download failed";
    }
  });
  root.append(
    el("section", { class: "card" }, el("h3", {}, "Download annotations"), downloadTask,
       minCmi, maxCmi, minKappa, annotators, downloadButton, downloadStatus),
  );
  return root;
}
