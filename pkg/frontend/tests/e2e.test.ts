// @vitest-environment node
/** End-to-end: the UI's API client against a real backend process.
 *
 * Proves the contract items that mocks cannot: submitted feedback lands
 * in the stored record and comes back out of the CSV export, and history
 * edits bump versions server-side.  Runs when the backend package is
 * importable (CI sandbox / dev machine); skipped otherwise.
 */
import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";

const backendAvailable =
  spawnSync("python3", ["-c", "import commentator"], { timeout: 30_000 }).status === 0;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const port = (probe.address() as net.AddressInfo).port;
      probe.close(() => resolve(port));
    });
  });
}

async function waitForServer(base: string, timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      await fetch(`${base}/api/tasks`);
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }
  throw new Error("backend never came up");
}

describe.skipIf(!backendAvailable)("against a live backend", () => {
  let serverProcess: ReturnType<typeof spawn>;
  let base: string;

  beforeAll(async () => {
    const dbDir = join(mkdtempSync(join(tmpdir(), "commentator-e2e-")), "data");
    const corpus = join(dbDir, "..", "corpus.csv");
    writeFileSync(
      corpus,
      "id,text\n1,I am feeling very thand today\n2,Aaj ka weather bahut accha hai\n",
    );
    const cli = (args: string[]) =>
      spawnSync("python3", ["-m", "commentator.cli", ...args, "--db-dir", dbDir], {
        timeout: 60_000,
      });
    expect(cli(["import", corpus]).status).toBe(0);
    expect(
      cli(["user", "add", "boss", "--role", "admin", "--password", "adminpassword"]).status,
    ).toBe(0);

    const port = await freePort();
    base = `http://127.0.0.1:${port}`;
    serverProcess = spawn(
      "python3",
      ["-m", "commentator.cli", "serve", "--db-dir", dbDir, "--port", String(port)],
      { stdio: "ignore" },
    );
    await waitForServer(base);
  }, 60_000);

  afterAll(() => {
    serverProcess?.kill("SIGKILL");
  });

  it("carries feedback from the box into the stored record and export", async () => {
    const api = new ApiClient(base);
    await api.signup("worker", "workerpassword");
    await api.login("worker", "workerpassword");

    const tasks = await api.tasks();
    expect(tasks.map((t) => t.id)).toEqual(["lid", "pos", "mli"]);

    const assignment = await api.next("lid");
    expect(assignment.done).toBe(false);
    const sentence = assignment.sentence!;
    expect(assignment.suggestion!.tags).toHaveLength(sentence.tokens.length);

    const submitted = await api.submit(
      "lid",
      sentence.id,
      assignment.suggestion!.tags,
      "e2e feedback note",
    );
    expect(submitted.version).toBe(1);

    const history = await api.history("lid");
    expect(history[0].sentence_id).toBe(sentence.id);
    expect(history[0].tags).toEqual(assignment.suggestion!.tags);

    // The feedback sits in the stored record and surfaces in the export.
    const admin = new ApiClient(base);
    await admin.login("boss", "adminpassword");
    expect(await admin.exportCsv("lid", {})).toContain("e2e feedback note");

    // Edit from history: repopulate, flip the first tag, save via PUT.
    const edited = [...history[0].tags!];
    edited[0] = edited[0] === "un" ? "hi" : "un";
    const saved = await api.edit("lid", sentence.id, edited, "fixed the first token");
    expect(saved.version).toBe(2);

    // Export reflects only the latest version: new tags, new feedback.
    const csv = await admin.exportCsv("lid", {});
    expect(csv.split("\n")[1]).toContain(`,${edited[0]},`);
    expect(csv).toContain("fixed the first token");
    expect(csv).not.toContain("e2e feedback note");

    const metrics = await admin.metrics("lid");
    expect(metrics.corpus_size).toBe(2);
  }, 60_000);
});
