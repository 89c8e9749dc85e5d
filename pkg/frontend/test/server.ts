// Spawns the actual Python session service with a scripted mock provider so
// frontend tests run against the real HTTP + SSE surface.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

const REPO_ROOT = resolve(__dirname, "..", "..");
const PYTHON_FIXTURES = join(REPO_ROOT, "tests", "fixtures");

export interface TestServer {
  base: string;
  stop(): Promise<void>;
}

function buildScript(copies: number): string {
  // Reuse the pipeline fixture script, multiplied so repeated UI actions
  // (regenerate, second batch) stay scripted.
  const script = JSON.parse(readFileSync(join(PYTHON_FIXTURES, "mock_script.json"), "utf-8"));
  const multiplied: Record<string, string[]> = {};
  for (const [stage, responses] of Object.entries(script) as [string, string[]][]) {
    multiplied[stage] = Array.from({ length: copies }, () => responses).flat();
  }
  const dir = mkdtempSync(join(tmpdir(), "mv-script-"));
  const path = join(dir, "script.json");
  writeFileSync(path, JSON.stringify(multiplied));
  return path;
}

export async function startServer(scriptCopies = 4): Promise<TestServer> {
  const port = 21000 + Math.floor(Math.random() * 20000);
  const dataDir = mkdtempSync(join(tmpdir(), "mv-data-"));
  const child: ChildProcess = spawn(
    "python3",
    [
      "-m",
      "missingvoices.cli",
      "serve",
      "--port",
      String(port),
      "--data-dir",
      dataDir,
      "--mock-script",
      buildScript(scriptCopies),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });

  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 20_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`server exited early (${child.exitCode}): ${stderr}`);
    }
    try {
      const response = await fetch(`${base}/healthz`);
      if (response.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error(`server did not start: ${stderr}`);
    }
    await new Promise((r) => setTimeout(r, 100));
  }

  return {
    base,
    stop() {
      return new Promise((resolveStop) => {
        child.once("exit", () => resolveStop());
        child.kill("SIGINT");
        setTimeout(() => child.kill("SIGKILL"), 3000).unref();
      });
    },
  };
}

export const CONTEXT_BODY = JSON.parse(
  readFileSync(join(PYTHON_FIXTURES, "context.json"), "utf-8"),
);

export const TRANSCRIPT_LINES: { speaker: string; text: string; ts: number }[] = readFileSync(
  join(PYTHON_FIXTURES, "transcript.jsonl"),
  "utf-8",
)
  .trim()
  .split("\n")
  .map((line) => JSON.parse(line))
  .map((seg) => ({ speaker: seg.speaker, text: seg.text, ts: seg.ts }));
