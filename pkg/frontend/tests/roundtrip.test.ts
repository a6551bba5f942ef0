/**
 * End-to-end session against the real service: spawns the Python server on
 * a 90-member toy ensemble and drives the same session logic the pages use.
 * Tests run in order; each leaves the server in a known state.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HttpApi } from "../src/api.js";
import { UiSession } from "../src/session.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const SRC_DIR = resolve(HERE, "..", "..", "src");
const PORT = 8900 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;
const N = 90;

let server: ChildProcess;
let workDir: string;
const api = new HttpApi(BASE);

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "classify-ui-"));
  server = spawn("python3", [join(HERE, "serve_fixture.py"), workDir,
    String(PORT)], { stdio: "ignore" });
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const meta = await api.meta();
      expect(meta.n).toBe(N);
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("service did not come up");
      await new Promise((r) => setTimeout(r, 250));
    }
  }
}, 40_000);

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

describe("live classification round trip", () => {
  it("saving an untouched session writes a file of zeros", async () => {
    const session = await UiSession.connect(api);
    const path = await session.save();
    const lines = readFileSync(path, "utf8").trim().split("\n");
    expect(lines[0]).toBe("run_index,label");
    expect(lines.length).toBe(N + 1);
    for (let i = 0; i < N; i++) expect(lines[i + 1]).toBe(`${i},0`);
  });

  it("loses no update over 100 interleaved label posts", async () => {
    const expected: number[] = [];
    const posts: Promise<unknown>[] = [];
    for (let i = 0; i < N; i++) {
      const first = i % 2 === 0 ? 1 : 2;
      if (i < 10) {
        // ten members get a second post after their first resolves
        posts.push(api.label(i, first).then(() => api.label(i, 1)));
        expected.push(1);
      } else {
        posts.push(api.label(i, first));
        expected.push(first);
      }
    }
    expect(posts.length + 10).toBe(100);
    await Promise.all(posts);
    const table = await api.classification();
    expect(table.labels).toEqual(expected);
    expect(table.tally["0"] + table.tally["1"] + table.tally["2"]).toBe(N);
  });

  it("a scripted 14/76 session saves a file the kernel fit ingests",
    async () => {
      const session = await UiSession.connect(api);
      expect(session.n).toBe(N);
      for (let i = 0; i < N; i++) {
        expect(session.index).toBe(i);
        if (i < 14) await session.accept();
        else await session.reject();
      }
      // Next is disabled at the end, so the last reject stays put
      expect(session.index).toBe(N - 1);
      expect(session.tally()).toEqual({ "0": 0, "1": 14, "2": 76 });

      const path = await session.save();
      const counts = execFileSync("python3", ["-c",
        "import sys\n"
        + `sys.path.insert(0, ${JSON.stringify(SRC_DIR)})\n`
        + "from kernelhm.selection import load_classification\n"
        + `cls = load_classification(${JSON.stringify(path)}, n=${N})\n`
        + "print(int((cls.labels == 1).sum()), int((cls.labels == 2).sum()))",
      ]).toString().trim();
      expect(counts).toBe("14 76");
    }, 30_000);

  it("relabeling before save keeps only the final decision", async () => {
    const session = await UiSession.connect(api);
    session.jump(5);
    await session.accept();
    expect((await api.member(5)).label).toBe(1);
    session.back();
    await session.reject();
    expect((await api.member(5)).label).toBe(2);
    expect(session.label(5)).toBe(2);
  });

  it("repopulates labels from the server after save and reload", async () => {
    const before = await UiSession.connect(api);
    await before.save();
    const after = await UiSession.connect(api);
    expect(after.labels()).toEqual(before.labels());
    // the relabel test above moved member 5 from accept to reject
    expect(after.tally()).toEqual({ "0": 0, "1": 13, "2": 77 });
  });
});
